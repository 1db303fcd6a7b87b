use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DataMode, PipelineError, SECONDS_PER_IMAGE};
use crate::optimize::LearnedParams;
use crate::segment::ConfigId;

pub const REPORT_FORMAT: &str = "eegseg-report";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub fold: usize,
    pub user: usize,
    pub image: usize,
    pub config: ConfigId,
    pub jaccard: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub fold: usize,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigSummary {
    pub config: ConfigId,
    pub n: usize,
    pub mean: f64,
    /// Population standard deviation over cells.
    pub std: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionRow {
    pub image: usize,
    pub fused: f64,
    /// Mean over users of the cross-validated configuration C Jaccard.
    pub single_mean: f64,
    pub single_best: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionSummary {
    pub params: LearnedParams,
    pub rows: Vec<FusionRow>,
    pub fused_mean: f64,
    pub single_mean: f64,
    /// Images where the fused map beats the single-user mean.
    pub wins: usize,
}

impl FusionSummary {
    pub fn from_rows(params: LearnedParams, rows: Vec<FusionRow>) -> Self {
        let n = rows.len().max(1) as f64;
        Self {
            fused_mean: rows.iter().map(|r| r.fused).sum::<f64>() / n,
            single_mean: rows.iter().map(|r| r.single_mean).sum::<f64>() / n,
            wins: rows.iter().filter(|r| r.fused > r.single_mean).count(),
            params,
            rows,
        }
    }

    pub fn gain(&self) -> f64 {
        self.fused_mean / self.single_mean
    }

    pub fn win_fraction(&self) -> f64 {
        self.wins as f64 / self.rows.len() as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentationReport {
    pub format: String,
    pub version: u32,
    pub notes: Vec<String>,
    pub mode: DataMode,
    pub n_images: usize,
    pub n_users: usize,
    pub seconds_per_image: f64,
    pub folds: Vec<FoldRecord>,
    pub learned: Vec<LearnedParams>,
    pub cells: Vec<Cell>,
    pub summary: Vec<ConfigSummary>,
    pub fusion: Option<FusionSummary>,
}

pub(crate) fn summarize(cells: &[Cell]) -> Vec<ConfigSummary> {
    ConfigId::ALL
        .iter()
        .map(|&config| {
            let js: Vec<f64> = cells.iter().filter(|c| c.config == config).map(|c| c.jaccard).collect();
            let n = js.len();
            let mean = if n == 0 { 0.0 } else { js.iter().sum::<f64>() / n as f64 };
            let var = if n == 0 {
                0.0
            } else {
                js.iter().map(|j| (j - mean).powi(2)).sum::<f64>() / n as f64
            };
            ConfigSummary {
                config,
                n,
                mean,
                std: var.sqrt(),
            }
        })
        .collect()
}

impl SegmentationReport {
    pub(crate) fn new(
        mode: DataMode,
        n_images: usize,
        n_users: usize,
        folds: Vec<FoldRecord>,
        learned: Vec<LearnedParams>,
        cells: Vec<Cell>,
    ) -> Self {
        let mut notes = Vec::new();
        if folds.iter().map(|f| f.test.len()).collect::<std::collections::BTreeSet<_>>().len() > 1 {
            let sizes: Vec<String> = folds.iter().map(|f| f.test.len().to_string()).collect();
            notes.push(format!(
                "test folds of {} images cover each of the {n_images} images exactly once, instead of five equal folds of five",
                sizes.join("/")
            ));
        }
        notes.push(format!(
            "presentation time of {SECONDS_PER_IMAGE} s per image is recorded as metadata and not simulated"
        ));
        Self {
            format: REPORT_FORMAT.into(),
            version: 1,
            notes,
            mode,
            n_images,
            n_users,
            seconds_per_image: SECONDS_PER_IMAGE,
            summary: summarize(&cells),
            folds,
            learned,
            cells,
            fusion: None,
        }
    }

    pub fn mean(&self, config: ConfigId) -> f64 {
        self.summary
            .iter()
            .find(|s| s.config == config)
            .map_or(0.0, |s| s.mean)
    }

    /// Mean over users of the Jaccard of `config` on each image.
    pub fn per_image_mean(&self, config: ConfigId) -> Vec<f64> {
        let mut sum = vec![0.0; self.n_images];
        let mut count = vec![0usize; self.n_images];
        for c in self.cells.iter().filter(|c| c.config == config) {
            sum[c.image] += c.jaccard;
            count[c.image] += 1;
        }
        sum.iter().zip(&count).map(|(s, &n)| s / n.max(1) as f64).collect()
    }

    /// Jaccard cells with the notes as `#` comment lines.
    pub fn cells_csv(&self) -> String {
        let mut out = String::new();
        for note in &self.notes {
            writeln!(out, "# {note}").expect("write to string");
        }
        out.push_str("fold,user,image,config,jaccard\n");
        for c in &self.cells {
            writeln!(out, "{},{},{},{},{}", c.fold, c.user, c.image, c.config, c.jaccard).expect("write to string");
        }
        out
    }

    pub fn learned_csv(&self) -> String {
        let mut out = String::from("fold,user,alpha,p,sigma_b,p1,p2,sigma_c,train_error_c\n");
        let opt = |v: Option<usize>| v.map_or(String::new(), |v| v.to_string());
        for l in &self.learned {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                opt(l.fold),
                opt(l.user),
                l.alpha,
                l.p,
                l.sigma_b,
                l.p1,
                l.p2,
                l.sigma_c,
                l.train_error_c
            )
            .expect("write to string");
        }
        out
    }

    pub fn fusion_csv(&self) -> Option<String> {
        let f = self.fusion.as_ref()?;
        let mut out = String::from("image,fused,single_mean,single_best\n");
        for r in &f.rows {
            writeln!(out, "{},{},{},{}", r.image, r.fused, r.single_mean, r.single_best).expect("write to string");
        }
        Some(out)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let r: Self = serde_json::from_str(text).map_err(|e| PipelineError::Data(e.to_string()))?;
        if r.format != REPORT_FORMAT || r.version != 1 {
            return Err(PipelineError::Data(format!("not an {REPORT_FORMAT} v1 file")));
        }
        Ok(r)
    }

    /// Human-readable digest of the aggregates.
    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        for n in &self.notes {
            writeln!(out, "note: {n}").expect("write to string");
        }
        writeln!(out, "{} images, {} users, {} folds", self.n_images, self.n_users, self.folds.len())
            .expect("write to string");
        for s in &self.summary {
            writeln!(out, "config {}: mean Jaccard {:.3} (std {:.3}, n={})", s.config, s.mean, s.std, s.n)
                .expect("write to string");
        }
        if let Some(f) = &self.fusion {
            writeln!(
                out,
                "fusion: fused {:.3} vs single-user {:.3} ({:.2}x), better on {}/{} images",
                f.fused_mean,
                f.single_mean,
                f.gain(),
                f.wins,
                f.rows.len()
            )
            .expect("write to string");
        }
        out
    }

    /// Writes `report.json`, `cells.csv`, `params.csv` and, with fusion,
    /// `fusion.csv` into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<(), PipelineError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.to_json())?;
        std::fs::write(dir.join("cells.csv"), self.cells_csv())?;
        std::fs::write(dir.join("params.csv"), self.learned_csv())?;
        if let Some(csv) = self.fusion_csv() {
            std::fs::write(dir.join("fusion.csv"), csv)?;
        }
        Ok(())
    }
}
