use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::maps::{image_features, simulate_maps, train_user_classifier, window_grids, ClassifierRun, FoldMaps};
use super::report::{Cell, FoldRecord, FusionRow, FusionSummary, SegmentationReport};
use super::{derive_seed, generate_dataset, DataMode, ExperimentConfig, PipelineError, Sample};
use crate::eegmap::{average_maps, EegMap};
use crate::grabcut::{GrabcutParams, GrabcutSession};
use crate::imaging::{jaccard, BinaryMask, WindowGrid};
use crate::optimize::{best_alpha, best_filter_params, learn_grabcut_params, LearnedParams, SearchOutcome};
use crate::segment::{segment_a, segment_b, segment_c, ConfigId, Scene};

/// Test image indices per fold: a seeded shuffle cut into consecutive runs of
/// the requested sizes, each run sorted.
pub fn assign_folds(n_images: usize, sizes: &[usize], seed: u64) -> Result<Vec<Vec<usize>>, PipelineError> {
    if sizes.iter().sum::<usize>() != n_images || sizes.contains(&0) {
        return Err(PipelineError::InvalidConfig(format!(
            "fold sizes {sizes:?} do not partition {n_images} images"
        )));
    }
    let mut order: Vec<usize> = (0..n_images).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for &s in sizes {
        let mut f = order[start..start + s].to_vec();
        f.sort_unstable();
        folds.push(f);
        start += s;
    }
    Ok(folds)
}

/// Masks and Jaccards of one configuration over `scenes`.
pub fn run_config(
    config: ConfigId,
    scenes: &[Scene<'_, f64>],
    params: &LearnedParams,
    grabcut: &GrabcutParams,
) -> Result<Vec<(BinaryMask, f64)>, PipelineError> {
    scenes
        .par_iter()
        .map(|s| {
            let mask = match config {
                ConfigId::A => segment_a(s.map, params.alpha)?,
                ConfigId::B => segment_b(s.map, params.p, params.sigma_b)?,
                ConfigId::C => segment_c(s.map, s.session, params.p1, params.p2, params.sigma_c, grabcut)?,
            };
            let j = jaccard(&mask, s.gt)?;
            Ok((mask, j))
        })
        .collect()
}

/// Dataset, window labels and GrabCut sessions for one configuration.
pub struct Experiment {
    pub cfg: ExperimentConfig,
    pub samples: Vec<Sample>,
    pub grids: Vec<WindowGrid>,
    pub sessions: Vec<GrabcutSession<f64>>,
}

/// Everything a cross-validation run produced.
pub struct CrossvalRun {
    pub report: SegmentationReport,
    pub searches: Vec<SearchOutcome>,
    /// Indexed `[fold][user]`.
    pub maps: Vec<Vec<FoldMaps>>,
}

impl Experiment {
    pub fn prepare(cfg: ExperimentConfig) -> Result<Self, PipelineError> {
        cfg.validate()?;
        let samples = generate_dataset(&cfg.dataset, cfg.seeds.dataset)?;
        Self::from_samples(cfg, samples)
    }

    /// Uses caller-supplied scenes; `cfg.dataset` must describe their size.
    pub fn from_samples(cfg: ExperimentConfig, samples: Vec<Sample>) -> Result<Self, PipelineError> {
        cfg.validate()?;
        if samples.len() != cfg.n_images() {
            return Err(PipelineError::Data(format!(
                "{} samples for a {}-image configuration",
                samples.len(),
                cfg.n_images()
            )));
        }
        let grids = window_grids(&cfg, &samples)?;
        let sessions = samples.par_iter().map(|s| GrabcutSession::new(&s.image)).collect();
        Ok(Self {
            cfg,
            samples,
            grids,
            sessions,
        })
    }

    pub fn folds(&self) -> Result<Vec<Vec<usize>>, PipelineError> {
        assign_folds(self.cfg.n_images(), &self.cfg.test_folds, self.cfg.seeds.folds)
    }

    fn train_images(&self, test: &[usize]) -> Vec<usize> {
        (0..self.cfg.n_images()).filter(|j| !test.contains(j)).collect()
    }

    /// Maps for every (fold, user) unit.
    pub fn fold_maps(&self, folds: &[Vec<usize>]) -> Result<Vec<Vec<FoldMaps>>, PipelineError> {
        match self.cfg.mode {
            DataMode::Sim => {
                let all = simulate_maps(&self.cfg, &self.grids)?;
                let pick = |u: usize, ids: &[usize]| ids.iter().map(|&j| (j, all[u][j].clone())).collect();
                Ok(folds
                    .iter()
                    .map(|test| {
                        let train = self.train_images(test);
                        (0..self.cfg.n_users())
                            .map(|u| FoldMaps {
                                train: pick(u, &train),
                                test: pick(u, test),
                            })
                            .collect()
                    })
                    .collect())
            }
            DataMode::Synthsig => {
                let features: Vec<Vec<Vec<Vec<f64>>>> =
                    (0..self.cfg.n_users()).map(|u| self.user_features(u)).collect::<Result<_, _>>()?;
                (0..folds.len())
                    .map(|f| {
                        (0..self.cfg.n_users())
                            .map(|u| Ok(self.train_classifier(folds, f, u, &features[u])?.maps))
                            .collect()
                    })
                    .collect()
            }
        }
    }

    /// One user's feature vectors for every image, indexed `[image][window]`.
    pub fn user_features(&self, user: usize) -> Result<Vec<Vec<Vec<f64>>>, PipelineError> {
        self.grids
            .par_iter()
            .enumerate()
            .map(|(j, g)| image_features(&self.cfg.synthsig, g, derive_seed(self.cfg.seeds.scores, user as u64, j as u64)))
            .collect()
    }

    /// Trains the classifier of one (fold, user) unit as cross-validation does.
    pub fn train_classifier(
        &self,
        folds: &[Vec<usize>],
        fold: usize,
        user: usize,
        features: &[Vec<Vec<f64>>],
    ) -> Result<ClassifierRun, PipelineError> {
        let test = folds
            .get(fold)
            .ok_or_else(|| PipelineError::InvalidConfig(format!("fold {fold} out of range")))?;
        let seed = derive_seed(self.cfg.seeds.scores ^ 0x5eed, fold as u64, user as u64);
        train_user_classifier(&self.cfg.synthsig, features, &self.grids, &self.train_images(test), test, seed)
    }

    /// Each image's map from the fold that holds it out, indexed `[user][image]`.
    pub fn held_out_maps(&self) -> Result<Vec<Vec<EegMap<f64>>>, PipelineError> {
        if self.cfg.mode == DataMode::Sim {
            return simulate_maps(&self.cfg, &self.grids);
        }
        let maps = self.fold_maps(&self.folds()?)?;
        let mut out: Vec<Vec<Option<EegMap<f64>>>> = vec![vec![None; self.cfg.n_images()]; self.cfg.n_users()];
        for per_user in maps {
            for (u, fm) in per_user.into_iter().enumerate() {
                for (j, m) in fm.test {
                    out[u][j] = Some(m);
                }
            }
        }
        Ok(out
            .into_iter()
            .map(|v| v.into_iter().map(|m| m.expect("folds cover every image")).collect())
            .collect())
    }

    fn scenes<'a>(&'a self, maps: &'a [(usize, EegMap<f64>)]) -> Vec<Scene<'a, f64>> {
        maps.iter()
            .map(|(j, m)| Scene {
                map: m,
                gt: &self.samples[*j].mask,
                session: &self.sessions[*j],
            })
            .collect()
    }

    /// Per-image optima `(alpha, p, sigma)` of configurations A and B.
    fn image_optima(&self, map: &EegMap<f64>, image: usize) -> Result<(f64, f64, f64), PipelineError> {
        let gt = &self.samples[image].mask;
        let (alpha, _) = best_alpha(map, gt)?;
        let (p, sigma, _) = best_filter_params(map, gt, self.cfg.search.sigma_max())?;
        Ok((alpha, p, sigma))
    }

    /// Learns one (fold, user) unit. `optima` holds per-image results that do
    /// not depend on the fold, when the maps themselves do not.
    fn learn_unit(
        &self,
        train: &[(usize, EegMap<f64>)],
        optima: Option<&[(f64, f64, f64)]>,
        seed: u64,
    ) -> Result<(LearnedParams, SearchOutcome), PipelineError> {
        let per_image: Vec<(f64, f64, f64)> = match optima {
            Some(o) => train.iter().map(|(j, _)| o[*j]).collect(),
            None => train
                .par_iter()
                .map(|(j, m)| self.image_optima(m, *j))
                .collect::<Result<_, _>>()?,
        };
        let n = per_image.len() as f64;
        let avg = |f: fn(&(f64, f64, f64)) -> f64| per_image.iter().map(f).sum::<f64>() / n;
        let search = learn_grabcut_params(&self.scenes(train), &self.cfg.search, &self.cfg.grabcut, seed)?;
        let best = search.best;
        let learned = LearnedParams {
            fold: None,
            user: None,
            alpha: avg(|o| o.0),
            p: avg(|o| o.1),
            sigma_b: avg(|o| o.2),
            p1: best.params.p1,
            p2: best.params.p2,
            sigma_c: best.params.sigma,
            train_error_c: best.error,
        };
        Ok((learned, search))
    }

    /// Learns parameters per (fold, user) on training images and evaluates
    /// every configuration on the held-out images.
    pub fn crossval(&self) -> Result<CrossvalRun, PipelineError> {
        let folds = self.folds()?;
        let maps = self.fold_maps(&folds)?;
        let records: Vec<FoldRecord> = folds
            .iter()
            .enumerate()
            .map(|(f, test)| FoldRecord {
                fold: f,
                train: self.train_images(test),
                test: test.clone(),
            })
            .collect();
        for r in &records {
            if r.train.iter().any(|j| r.test.contains(j)) {
                return Err(PipelineError::Data(format!("fold {} leaks test images into training", r.fold)));
            }
        }
        let n_users = self.cfg.n_users();
        let optima: Option<Vec<Vec<(f64, f64, f64)>>> = match self.cfg.mode {
            DataMode::Sim => {
                let all = simulate_maps(&self.cfg, &self.grids)?;
                Some(
                    all.iter()
                        .map(|per_image| {
                            per_image
                                .par_iter()
                                .enumerate()
                                .map(|(j, m)| self.image_optima(m, j))
                                .collect::<Result<Vec<_>, _>>()
                        })
                        .collect::<Result<_, _>>()?,
                )
            }
            DataMode::Synthsig => None,
        };
        let units: Vec<(usize, usize)> = (0..folds.len()).flat_map(|f| (0..n_users).map(move |u| (f, u))).collect();
        let results: Vec<(LearnedParams, SearchOutcome, Vec<Cell>)> = units
            .par_iter()
            .map(|&(f, u)| {
                let fm = &maps[f][u];
                let seed = derive_seed(self.cfg.seeds.search, f as u64, u as u64);
                let cached = optima.as_ref().map(|o| o[u].as_slice());
                let (mut learned, search) = self.learn_unit(&fm.train, cached, seed)?;
                learned.fold = Some(f);
                learned.user = Some(u);
                let test = self.scenes(&fm.test);
                let mut cells = Vec::with_capacity(test.len() * 3);
                for config in ConfigId::ALL {
                    let out = run_config(config, &test, &learned, &self.cfg.grabcut)?;
                    cells.extend(fm.test.iter().zip(out).map(|((image, _), (_, jaccard))| Cell {
                        fold: f,
                        user: u,
                        image: *image,
                        config,
                        jaccard,
                    }));
                }
                Ok((learned, search, cells))
            })
            .collect::<Result<_, PipelineError>>()?;

        let mut learned = Vec::with_capacity(results.len());
        let mut searches = Vec::with_capacity(results.len());
        let mut cells = Vec::new();
        for (l, s, c) in results {
            learned.push(l);
            searches.push(s);
            cells.extend(c);
        }
        let report = SegmentationReport::new(self.cfg.mode, self.cfg.n_images(), n_users, records, learned, cells);
        Ok(CrossvalRun { report, searches, maps })
    }

    /// Averages each image's held-out maps over users and segments the fused
    /// map with configuration C, using parameters averaged over folds and users.
    pub fn fuse(&self, run: &CrossvalRun) -> Result<FusionSummary, PipelineError> {
        let params = LearnedParams::mean(&run.report.learned)
            .ok_or_else(|| PipelineError::Data("no learned parameters to fuse".into()))?;
        let single = run.report.per_image_mean(ConfigId::C);
        let mut best = vec![f64::NEG_INFINITY; self.cfg.n_images()];
        for c in run.report.cells.iter().filter(|c| c.config == ConfigId::C) {
            best[c.image] = best[c.image].max(c.jaccard);
        }
        let mut fused_maps: Vec<(usize, EegMap<f64>)> = Vec::with_capacity(self.cfg.n_images());
        for per_user in &run.maps {
            for (k, (j, _)) in per_user[0].test.iter().enumerate() {
                let maps: Vec<EegMap<f64>> = per_user.iter().map(|fm| fm.test[k].1.clone()).collect();
                fused_maps.push((*j, average_maps(&maps)?));
            }
        }
        fused_maps.sort_by_key(|m| m.0);
        let scenes = self.scenes(&fused_maps);
        let out = run_config(ConfigId::C, &scenes, &params, &self.cfg.grabcut)?;
        let rows = fused_maps
            .iter()
            .zip(out)
            .map(|((j, _), (_, fused))| FusionRow {
                image: *j,
                fused,
                single_mean: single[*j],
                single_best: best[*j],
            })
            .collect();
        Ok(FusionSummary::from_rows(params, rows))
    }
}

pub fn run_crossval(cfg: &ExperimentConfig) -> Result<SegmentationReport, PipelineError> {
    Ok(Experiment::prepare(cfg.clone())?.crossval()?.report)
}

/// Cross-validation report extended with the fusion summary.
pub fn run_fusion(cfg: &ExperimentConfig) -> Result<SegmentationReport, PipelineError> {
    if cfg.n_users() < 2 {
        return Err(PipelineError::InvalidConfig("fusion needs at least two users".into()));
    }
    let exp = Experiment::prepare(cfg.clone())?;
    let run = exp.crossval()?;
    let fusion = exp.fuse(&run)?;
    let mut report = run.report;
    report.fusion = Some(fusion);
    Ok(report)
}
