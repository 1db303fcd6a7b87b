//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if a criterion fails that is not listed in `UNATTAINABLE`.
//!
//! `EEGSEG_ACCEPTANCE=1,6,8` restricts the run to the listed criteria.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use eegseg::classify::{auc, average_precision, grid_search_cv, train_svm, SvmParams};
use eegseg::eegmap::{gaussian_filter, make_trimap, normalize_map, EegMap, Trimap, TrimapLabel};
use eegseg::grabcut::{max_flow, run_grabcut, GrabcutParams, GrabcutSession};
use eegseg::imaging::{jaccard, partition_grid, BinaryMask, Image, PixelMap};
use eegseg::pipeline::{generate_dataset, simulate_scores, window_grids, Experiment, ExperimentConfig, SegmentationReport};
use eegseg::segment::ConfigId;
use eegseg::synthsig::{condition_recording, generate_recording, RecordingSpec};

use common::{blobs, brute_force_gaussian, exhaustive_min_cut, pair_count_auc, qp_oracle, random_network};

/// Criteria that cannot hold together with the others; they are still run
/// and reported.
const UNATTAINABLE: &[u8] = &[2];

const SEEDS: std::ops::RangeInclusive<u64> = 1..=10;
const MULTI_SEED_TRIALS: usize = 20;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

// 1 ---------------------------------------------------------------------------

fn configuration_ordering() -> Verdict {
    let cfg = ExperimentConfig::desk();
    let expected: Vec<f64> = cfg.users.iter().map(|u| u.expected_auc()).collect();
    let t = Instant::now();
    let exp = Experiment::prepare(cfg).unwrap();
    let scores = simulate_scores(&exp.cfg, &exp.grids).unwrap();
    let labels: Vec<bool> = exp.grids.iter().flat_map(|g| g.labels.iter().copied()).collect();
    let empirical: Vec<f64> = scores
        .iter()
        .map(|per_image| {
            let flat: Vec<f64> = per_image.iter().flatten().copied().collect();
            auc(&flat, &labels).unwrap()
        })
        .collect();
    let report = exp.crossval().unwrap().report;
    let elapsed = t.elapsed();
    let [a, b, c] = ConfigId::ALL.map(|k| report.mean(k));
    let calibrated = (mean(&expected) - 0.71).abs() <= 0.05 && (mean(&empirical) - 0.71).abs() <= 0.05;
    let pass = calibrated
        && c > b
        && b > a
        && (0.32..=0.62).contains(&c)
        && (0.10..=0.35).contains(&b)
        && (0.05..=0.25).contains(&a)
        && elapsed < Duration::from_secs(600);
    verdict(
        pass,
        format!(
            "A {a:.3} B {b:.3} C {c:.3}; user AUC expected {:.3} empirical {:.3}; {}",
            mean(&expected),
            mean(&empirical),
            secs(elapsed)
        ),
    )
}

// 2 ---------------------------------------------------------------------------

/// `(mean_t − mean_d) / pooled within-class sd` of one map.
fn separation(scores: &[f64], labels: &[bool]) -> f64 {
    let split = |want: bool| -> Vec<f64> {
        scores.iter().zip(labels).filter(|(_, &l)| l == want).map(|(&s, _)| s).collect()
    };
    let (t, d) = (split(true), split(false));
    let ss = |v: &[f64]| {
        let m = mean(v);
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>()
    };
    let pooled = ((ss(&t) + ss(&d)) / (t.len() + d.len() - 2) as f64).sqrt();
    (mean(&t) - mean(&d)) / pooled
}

fn simulation_sanity() -> Verdict {
    let mut seps = Vec::new();
    for seed in SEEDS {
        let cfg = ExperimentConfig::desk().with_seed(seed);
        let samples = generate_dataset(&cfg.dataset, cfg.seeds.dataset).unwrap();
        let grids = window_grids(&cfg, &samples).unwrap();
        for per_image in simulate_scores(&cfg, &grids).unwrap() {
            for (s, g) in per_image.iter().zip(&grids) {
                seps.push(separation(s, &g.labels));
            }
        }
    }
    let frac = seps.iter().filter(|&&s| s >= 1.0).count() as f64 / seps.len() as f64;
    verdict(
        frac >= 0.9,
        format!(
            "{:.1}% of {} user maps separate by >= 1 sd (median separation {:.2} sd)",
            100.0 * frac,
            seps.len(),
            {
                let mut s = seps.clone();
                s.sort_by(f64::total_cmp);
                s[s.len() / 2]
            }
        ),
    )
}

// 3 ---------------------------------------------------------------------------

fn epoch_features(spec: &RecordingSpec, seed: u64) -> (Vec<Vec<f64>>, Vec<bool>) {
    let cond = ExperimentConfig::desk().synthsig.conditioning;
    let rec = generate_recording::<f64>(spec, seed).unwrap();
    let fv = condition_recording(&rec, &cond).unwrap();
    let y = fv.iter().map(|f| f.label.is_target()).collect();
    (fv.into_iter().map(|f| f.values).collect(), y)
}

fn classifier_calibration() -> Verdict {
    let synth = ExperimentConfig::desk().synthsig;
    let train_spec = RecordingSpec {
        n_targets: 435,
        n_distractors: 2829,
        ..synth.recording.clone()
    };
    let test_spec = RecordingSpec {
        n_targets: 128,
        n_distractors: 832,
        ..synth.recording.clone()
    };
    let (mut aucs, mut aps, mut slowest) = (Vec::new(), Vec::new(), Duration::ZERO);
    for seed in 0..5u64 {
        let (x, y) = epoch_features(&train_spec, seed);
        let (xt, yt) = epoch_features(&test_spec, seed + 1000);
        let t = Instant::now();
        let g = grid_search_cv(&x, &y, &synth.c_grid, &synth.gamma_grid, synth.cv_folds, seed, synth.balanced).unwrap();
        let model = train_svm(&x, &y, &SvmParams::new(g.c, g.gamma)).unwrap();
        slowest = slowest.max(t.elapsed());
        let s = model.decision_scores(&xt).unwrap();
        aucs.push(auc(&s, &yt).unwrap());
        aps.push(average_precision(&s, &yt).unwrap());
    }
    let (a, p) = (mean(&aucs), mean(&aps));
    verdict(
        (a - 0.71).abs() <= 0.05 && p >= 0.25 && slowest < Duration::from_secs(300),
        format!("held-out AUC {a:.3}, AP {p:.3} over 5 seeds; slowest training {}", secs(slowest)),
    )
}

// 4, 5 ------------------------------------------------------------------------

struct SeedRun {
    a: f64,
    b: f64,
    fused: Vec<f64>,
    single: Vec<f64>,
}

fn multi_seed_runs() -> Vec<SeedRun> {
    SEEDS
        .map(|seed| {
            let mut cfg = ExperimentConfig::desk().with_seed(seed);
            cfg.search.n_trials = MULTI_SEED_TRIALS;
            let exp = Experiment::prepare(cfg).unwrap();
            let run = exp.crossval().unwrap();
            let fusion = exp.fuse(&run).unwrap();
            SeedRun {
                a: run.report.mean(ConfigId::A),
                b: run.report.mean(ConfigId::B),
                fused: fusion.rows.iter().map(|r| r.fused).collect(),
                single: fusion.rows.iter().map(|r| r.single_mean).collect(),
            }
        })
        .collect()
}

fn filtering_gain(runs: &[SeedRun]) -> Verdict {
    let a = mean(&runs.iter().map(|r| r.a).collect::<Vec<_>>());
    let b = mean(&runs.iter().map(|r| r.b).collect::<Vec<_>>());
    let per_seed = runs.iter().filter(|r| r.b >= 1.4 * r.a).count();
    verdict(
        runs.len() >= 10 && b >= 1.4 * a,
        format!(
            "B/A = {:.2} ({b:.3} / {a:.3}) over {} seeds; {per_seed} seeds individually >= 1.4",
            b / a,
            runs.len()
        ),
    )
}

fn fusion_gain(runs: &[SeedRun]) -> Verdict {
    let fused: Vec<f64> = runs.iter().flat_map(|r| r.fused.iter().copied()).collect();
    let single: Vec<f64> = runs.iter().flat_map(|r| r.single.iter().copied()).collect();
    let wins = fused.iter().zip(&single).filter(|(f, s)| f > s).count();
    let frac = wins as f64 / fused.len() as f64;
    let gain = mean(&fused) / mean(&single);
    let worst = runs
        .iter()
        .map(|r| mean(&r.fused) / mean(&r.single))
        .fold(f64::INFINITY, f64::min);
    verdict(
        runs.len() >= 10 && frac >= 0.7 && gain >= 1.3,
        format!(
            "fused {:.3} vs single {:.3} ({gain:.2}x), wins {wins}/{} ({:.0}%) over {} seeds; lowest per-seed gain {worst:.2}x",
            mean(&fused),
            mean(&single),
            fused.len(),
            100.0 * frac,
            runs.len()
        ),
    )
}

// 6 ---------------------------------------------------------------------------

fn oracle_equivalences() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut flow_ok = 0;
    for _ in 0..100 {
        let net = random_network(&mut rng);
        let cut = max_flow(&net);
        let best = exhaustive_min_cut(&net);
        if cut.flow == best && net.cut_capacity(&cut.source_side) == best {
            flow_ok += 1;
        }
    }

    let mut filter_err: f64 = 0.0;
    for sigma in [0.4, 1.0, 2.5, 4.0, 7.0, 12.0] {
        let values = (0..32 * 32).map(|_| rng.gen::<f64>()).collect();
        let map = PixelMap::new(32, 32, values).unwrap();
        let fast = gaussian_filter(&map, sigma).unwrap();
        let slow = brute_force_gaussian(&map, sigma);
        for (f, s) in fast.values().iter().zip(slow.values()) {
            filter_err = filter_err.max((f - s).abs());
        }
    }

    let mut svm_err: f64 = 0.0;
    for k in 0..10u64 {
        let n = rng.gen_range(3..=10);
        let (x, mut y) = blobs(n, 2 + k as usize % 3, 1.2, 600 + k);
        y[0] = true;
        y[1] = false;
        let (c, gamma) = ([0.5, 2.0, 10.0][k as usize % 3], [0.2, 1.0][k as usize % 2]);
        let model = train_svm(&x, &y, &SvmParams::new(c, gamma)).unwrap();
        svm_err = svm_err.max((model.dual_objective - qp_oracle(&x, &y, c, gamma)).abs());
    }

    let mut auc_ok = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(2..60);
        let mut labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.3)).collect();
        labels[0] = true;
        labels[1] = false;
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0..15) as f64 * 0.1).collect();
        if auc(&scores, &labels).unwrap() == pair_count_auc(&scores, &labels) {
            auc_ok += 1;
        }
    }

    verdict(
        flow_ok == 100 && filter_err <= 1e-9 && svm_err <= 1e-4 && auc_ok == 1000,
        format!(
            "max-flow {flow_ok}/100 exact; filter max err {filter_err:.1e}; SVM dual max err {svm_err:.1e}; AUC {auc_ok}/1000 exact"
        ),
    )
}

// 7 ---------------------------------------------------------------------------

fn random_mask(rng: &mut ChaCha8Rng, w: usize, h: usize) -> BinaryMask {
    let density = rng.gen::<f64>();
    BinaryMask::new(w, h, (0..w * h).map(|_| rng.gen_bool(density)).collect()).unwrap()
}

fn jaccard_invariants(rng: &mut ChaCha8Rng) -> bool {
    (0..300).all(|_| {
        let (w, h) = (rng.gen_range(1..12), rng.gen_range(1..12));
        let (a, b) = (random_mask(rng, w, h), random_mask(rng, w, h));
        let j = jaccard(&a, &b).unwrap();
        let inner = jaccard(&a.intersection(&b).unwrap(), &b).unwrap();
        j == jaccard(&b, &a).unwrap()
            && (0.0..=1.0).contains(&j)
            && j <= inner
            && inner <= 1.0
            && jaccard(&a, &a).unwrap() == 1.0
    })
}

fn normalization_invariants(rng: &mut ChaCha8Rng) -> bool {
    let grid = partition_grid(32, 24, 8, 6).unwrap();
    (0..300).all(|_| {
        let scores: Vec<f64> = (0..48).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let map = EegMap::new(grid.geometry, scores.clone()).unwrap();
        let n = normalize_map(&map).unwrap();
        let (scale, shift) = (rng.gen_range(0.01..100.0), rng.gen_range(-50.0..50.0));
        let moved = EegMap::new(grid.geometry, scores.iter().map(|v| scale * v + shift).collect()).unwrap();
        let m = normalize_map(&moved).unwrap();
        normalize_map(&n).unwrap() == n
            && n.scores().iter().zip(m.scores()).all(|(a, b)| (a - b).abs() <= 1e-12)
            && n.scores().iter().all(|v| (0.0..=1.0).contains(v))
    })
}

fn trimap_partition(rng: &mut ChaCha8Rng) -> bool {
    (0..200).all(|_| {
        let (w, h) = (rng.gen_range(2..20), rng.gen_range(2..20));
        let map = PixelMap::new(w, h, (0..w * h).map(|_| rng.gen::<f64>()).collect()).unwrap();
        let (p1, p2) = (rng.gen_range(0.0..0.5), rng.gen_range(0.5..0.99));
        let Ok(t) = make_trimap(&map, p1, p2) else {
            return false;
        };
        let (d, b, f) = t.counts();
        let unknown = t.unknown_region();
        let fg = t.foreground_region();
        d + b + f == w * h
            && unknown.count() == b + f
            && fg.count() == f
            && fg.intersection(&unknown).unwrap() == fg
    })
}

fn grabcut_invariants() -> bool {
    let cfg = ExperimentConfig::desk();
    let samples = generate_dataset(&cfg.dataset, 77).unwrap();
    samples.iter().take(8).enumerate().all(|(i, s)| {
        let trimap = generous_trimap(&s.mask, 2, 6);
        let params = GrabcutParams {
            iterations: 8,
            seed: i as u64,
            ..Default::default()
        };
        let state = GrabcutSession::<f64>::new(&s.image).run(&trimap, &params).unwrap();
        let monotone = state.energy_history.windows(2).all(|w| w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0));
        let hard = trimap
            .labels()
            .iter()
            .zip(&state.foreground)
            .all(|(l, &f)| *l != TrimapLabel::DefiniteBackground || !f);
        monotone && hard
    })
}

fn report_bytes(threads: usize) -> Vec<u8> {
    let mut cfg = ExperimentConfig::desk().with_seed(42);
    cfg.dataset.n_images = 8;
    cfg.test_folds = vec![3, 3, 2];
    cfg.search.n_trials = 4;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let exp = Experiment::prepare(cfg).unwrap();
        let run = exp.crossval().unwrap();
        let fusion = exp.fuse(&run).unwrap();
        let mut report: SegmentationReport = run.report;
        report.fusion = Some(fusion);
        let mut bytes = report.to_json().into_bytes();
        bytes.extend(report.cells_csv().into_bytes());
        bytes.extend(report.learned_csv().into_bytes());
        bytes
    })
}

fn invariant_suites() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let checks = [
        ("jaccard", jaccard_invariants(&mut rng)),
        ("normalization", normalization_invariants(&mut rng)),
        ("trimap", trimap_partition(&mut rng)),
        ("grabcut energy/hard background", grabcut_invariants()),
        ("report bytes 1 vs 4 threads", report_bytes(1) == report_bytes(4)),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    verdict(
        failed.is_empty(),
        if failed.is_empty() {
            format!("{} suites hold", checks.len())
        } else {
            format!("violated: {}", failed.join(", "))
        },
    )
}

// 8 ---------------------------------------------------------------------------

/// Probable foreground on `mask` dilated by `grow`, probable background for a
/// further `ring` pixels, definite background elsewhere.
fn generous_trimap(mask: &BinaryMask, grow: usize, ring: usize) -> Trimap {
    let (w, h) = mask.dims();
    let dist = chessboard_distance(mask);
    let labels = dist
        .iter()
        .map(|&d| {
            if d <= grow {
                TrimapLabel::ProbableForeground
            } else if d <= grow + ring {
                TrimapLabel::ProbableBackground
            } else {
                TrimapLabel::DefiniteBackground
            }
        })
        .collect();
    Trimap::new(w, h, labels).unwrap()
}

fn chessboard_distance(mask: &BinaryMask) -> Vec<usize> {
    let (w, h) = mask.dims();
    let set: Vec<(usize, usize)> = (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).filter(|&(x, y)| mask.get(x, y)).collect();
    (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .map(|(x, y)| {
            set.iter()
                .map(|&(sx, sy)| sx.abs_diff(x).max(sy.abs_diff(y)))
                .min()
                .unwrap_or(usize::MAX)
        })
        .collect()
}

fn grabcut_quality() -> Verdict {
    let (w, h) = (64, 48);
    let disc = BinaryMask::from_fn(w, h, |x, y| {
        let (dx, dy) = (x as f64 + 0.5 - 30.0, y as f64 + 0.5 - 23.0);
        dx * dx + dy * dy <= 13.0 * 13.0
    })
    .unwrap();
    let img = Image::new(
        w,
        h,
        disc.bits().iter().map(|&b| if b { [200, 60, 40] } else { [40, 110, 190] }).collect(),
    )
    .unwrap();
    let uniform = jaccard(&run_grabcut::<f64>(&img, &generous_trimap(&disc, 5, 6), &GrabcutParams::default()).unwrap(), &disc).unwrap();

    let cfg = ExperimentConfig::desk();
    let samples = generate_dataset(&cfg.dataset, cfg.seeds.dataset).unwrap();
    let camo: Vec<f64> = samples
        .iter()
        .filter(|s| s.camouflage)
        .map(|s| {
            let mask = run_grabcut::<f64>(&s.image, &generous_trimap(&s.mask, 3, 6), &GrabcutParams::default()).unwrap();
            assert_eq!(mask.dims(), s.mask.dims());
            jaccard(&mask, &s.mask).unwrap()
        })
        .collect();
    let valid = !camo.is_empty() && camo.iter().all(|j| (0.0..=1.0).contains(j));
    verdict(
        uniform >= 0.95 && valid,
        format!(
            "uniform disc J {uniform:.3}; {} camouflage scenes give valid masks (J {})",
            camo.len(),
            camo.iter().map(|j| format!("{j:.2}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

// -----------------------------------------------------------------------------

fn main() -> ExitCode {
    let only: Option<Vec<u8>> = std::env::var("EEGSEG_ACCEPTANCE")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let wanted = |id: u8| only.as_ref().is_none_or(|o| o.contains(&id));

    let mut runs: Option<Vec<SeedRun>> = None;
    let mut unexpected = 0;
    let criteria: [(u8, &str); 8] = [
        (1, "configuration ordering"),
        (2, "simulation-map sanity"),
        (3, "classifier calibration"),
        (4, "filtering gain"),
        (5, "fusion gain"),
        (6, "oracle equivalences"),
        (7, "invariant suites"),
        (8, "GrabCut quality floor"),
    ];
    for (id, name) in criteria {
        if !wanted(id) {
            continue;
        }
        let t = Instant::now();
        let v = match id {
            1 => configuration_ordering(),
            2 => simulation_sanity(),
            3 => classifier_calibration(),
            4 => filtering_gain(runs.get_or_insert_with(multi_seed_runs)),
            5 => fusion_gain(runs.get_or_insert_with(multi_seed_runs)),
            6 => oracle_equivalences(),
            7 => invariant_suites(),
            _ => grabcut_quality(),
        };
        let tag = if v.pass { "PASS" } else { "FAIL" };
        let known = if !v.pass && UNATTAINABLE.contains(&id) { " (known unattainable)" } else { "" };
        println!("{tag} {id} {name}: {}{known} [{}]", v.detail, secs(t.elapsed()));
        if !v.pass && known.is_empty() {
            unexpected += 1;
        }
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
