use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use eegseg::classify::{auc, average_precision};
use eegseg::eegmap::io::{render_map, render_trimap, save_map};
use eegseg::eegmap::{gaussian_filter, make_trimap};
use eegseg::imaging::io::{write_image, write_mask};
use eegseg::imaging::jaccard;
use eegseg::optimize::LearnedParams;
use eegseg::pipeline::{
    generate_dataset, load_dataset, save_dataset, simulate_scores,
    DataMode, Experiment, ExperimentConfig, PipelineError, SegmentationReport,
};
use eegseg::segment::{segment_a, segment_b, segment_c, ConfigId};

#[derive(Parser)]
#[command(name = "eegseg", version, about = "Object segmentation seeded by per-window classifier score maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Versioned JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Built-in configuration used when --config is absent.
    #[arg(long, global = true, value_enum, default_value_t = Preset::Desk)]
    preset: Preset,

    /// Master seed; replaces the configured seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (default: the configured one, else ./eegseg-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    mode: Option<Mode>,

    /// Dataset directory written by gen-data (or hand-made with the same
    /// manifest) used instead of generating scenes.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Desk,
    Paper,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Sim,
    Synthsig,
}

#[derive(Subcommand)]
enum Command {
    /// Print the effective configuration as JSON.
    ShowConfig,
    /// Generate the synthetic image/mask dataset.
    GenData,
    /// Simulate raw per-window classifier scores for every user and image.
    SimulateScores,
    /// Train one user's SVM on one fold's training images.
    TrainClassifier {
        #[arg(long, default_value_t = 0)]
        user: usize,
        #[arg(long, default_value_t = 0)]
        fold: usize,
    },
    /// Write normalized held-out maps and their renderings.
    BuildMaps,
    /// Learn per-fold, per-user parameters and write the search logs.
    LearnParams,
    /// Segment every image of one user with given parameters.
    Segment {
        /// JSON file with one parameter set or a list (averaged).
        #[arg(long)]
        params: PathBuf,
        #[arg(long, default_value_t = 0)]
        user: usize,
    },
    /// Five-fold image cross-validation of configurations A, B and C.
    Crossval,
    /// Cross-validation followed by multi-user map fusion.
    Fuse,
    /// Summarize a report.json and check its aggregates.
    Report { path: PathBuf },
}

/// Error carrying the process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Self {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

fn config_error(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn data_error(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: 3,
        message: e.to_string(),
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => match cli.preset {
            Preset::Desk => ExperimentConfig::desk(),
            Preset::Paper => ExperimentConfig::paper(),
        },
    };
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(mode) = cli.mode {
        cfg.mode = match mode {
            Mode::Sim => DataMode::Sim,
            Mode::Synthsig => DataMode::Synthsig,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: &ExperimentConfig) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("eegseg-out"))
}

fn experiment(cli: &Cli, cfg: ExperimentConfig) -> Result<Experiment> {
    match &cli.data {
        Some(dir) => {
            let samples = load_dataset(dir)?;
            let mut cfg = cfg;
            if let Some(first) = samples.first() {
                cfg.dataset.n_images = samples.len();
                cfg.dataset.width = first.image.width();
                cfg.dataset.height = first.image.height();
            }
            Ok(Experiment::from_samples(cfg, samples)?)
        }
        None => Ok(Experiment::prepare(cfg)?),
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(data_error)?;
    }
    fs::write(path, contents).map_err(data_error)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let out = out_dir(cli, &cfg);
    match &cli.command {
        Command::ShowConfig => {
            println!("{}", cfg.to_json());
            Ok(())
        }
        Command::GenData => gen_data(&cfg, &out),
        Command::SimulateScores => simulate(cli, cfg, &out),
        Command::TrainClassifier { user, fold } => train_classifier(cli, cfg, &out, *user, *fold),
        Command::BuildMaps => build_maps(cli, cfg, &out),
        Command::LearnParams => learn_params(cli, cfg, &out),
        Command::Segment { params, user } => segment(cli, cfg, &out, params, *user),
        Command::Crossval => {
            let report = experiment(cli, cfg)?.crossval()?.report;
            report.write_to(&out)?;
            print!("{}", report.summary_text());
            Ok(())
        }
        Command::Fuse => {
            if cfg.n_users() < 2 {
                return Err(config_error("fusion needs at least two users"));
            }
            let exp = experiment(cli, cfg)?;
            let run = exp.crossval()?;
            let fusion = exp.fuse(&run)?;
            let mut report = run.report;
            report.fusion = Some(fusion);
            report.write_to(&out)?;
            print!("{}", report.summary_text());
            Ok(())
        }
        Command::Report { path } => report(path, cli.out.as_deref()),
    }
}

fn gen_data(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let samples = generate_dataset(&cfg.dataset, cfg.seeds.dataset)?;
    let dir = out.join("dataset");
    save_dataset(&samples, &dir)?;
    println!("wrote {} scenes to {}", samples.len(), dir.display());
    Ok(())
}

fn simulate(cli: &Cli, cfg: ExperimentConfig, out: &Path) -> Result<()> {
    if cfg.mode != DataMode::Sim {
        return Err(config_error("simulate-scores requires --mode sim"));
    }
    let exp = experiment(cli, cfg)?;
    let scores = simulate_scores(&exp.cfg, &exp.grids)?;
    let mut csv = String::from("user,image,window,target,score\n");
    for (u, per_image) in scores.iter().enumerate() {
        for (j, s) in per_image.iter().enumerate() {
            for (w, v) in s.iter().enumerate() {
                writeln!(csv, "{u},{j},{w},{},{v}", exp.grids[j].labels[w] as u8).expect("write to string");
            }
        }
    }
    let path = out.join("scores.csv");
    write(&path, csv)?;
    for (u, per_image) in scores.iter().enumerate() {
        let flat: Vec<f64> = per_image.iter().flatten().copied().collect();
        let labels: Vec<bool> = exp.grids.iter().flat_map(|g| g.labels.iter().copied()).collect();
        let a = auc(&flat, &labels).map_err(data_error)?;
        println!("user {u}: window AUC {a:.3}");
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn train_classifier(cli: &Cli, mut cfg: ExperimentConfig, out: &Path, user: usize, fold: usize) -> Result<()> {
    cfg.mode = DataMode::Synthsig;
    if user >= cfg.n_users() {
        return Err(config_error(format!("user {user} out of range")));
    }
    let exp = experiment(cli, cfg)?;
    let folds = exp.folds()?;
    let features = exp.user_features(user)?;
    let run = exp.train_classifier(&folds, fold, user, &features)?;
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for &j in &folds[fold] {
        scores.extend(run.model.decision_scores(&features[j]).map_err(data_error)?);
        labels.extend(exp.grids[j].labels.iter().copied());
    }
    let path = out.join(format!("classifier_u{user}_f{fold}.json"));
    write(&path, run.model.to_json())?;
    println!(
        "C={} gamma={} cv AUC {:.3}; held-out AUC {:.3}, AP {:.3}",
        run.model.c,
        run.model.gamma,
        run.cv_auc,
        auc(&scores, &labels).map_err(data_error)?,
        average_precision(&scores, &labels).map_err(data_error)?
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn build_maps(cli: &Cli, cfg: ExperimentConfig, out: &Path) -> Result<()> {
    let exp = experiment(cli, cfg)?;
    let maps = exp.held_out_maps()?;
    let dir = out.join("maps");
    fs::create_dir_all(&dir).map_err(data_error)?;
    for (u, per_image) in maps.iter().enumerate() {
        for (j, m) in per_image.iter().enumerate() {
            save_map(m, dir.join(format!("u{u}_i{j:02}.csv"))).map_err(data_error)?;
            render_map(m, dir.join(format!("u{u}_i{j:02}.pgm"))).map_err(data_error)?;
        }
    }
    println!("wrote {} maps to {}", maps.len() * exp.cfg.n_images(), dir.display());
    Ok(())
}

fn learn_params(cli: &Cli, cfg: ExperimentConfig, out: &Path) -> Result<()> {
    let exp = experiment(cli, cfg)?;
    let run = exp.crossval()?;
    let learned = &run.report.learned;
    write(&out.join("params.json"), serde_json::to_string_pretty(learned).expect("params serialize"))?;
    write(&out.join("params.csv"), run.report.learned_csv())?;
    for (l, s) in learned.iter().zip(&run.searches) {
        let name = format!("f{}_u{}.csv", l.fold.unwrap_or(0), l.user.unwrap_or(0));
        write(&out.join("trials").join(name), s.trial_log_csv())?;
    }
    print!("{}", run.report.learned_csv());
    Ok(())
}

fn read_params(path: &Path) -> Result<LearnedParams> {
    let text = fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    if let Ok(one) = serde_json::from_str::<LearnedParams>(&text) {
        return Ok(one);
    }
    let many: Vec<LearnedParams> =
        serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    LearnedParams::mean(&many).ok_or_else(|| config_error(format!("{} holds no parameters", path.display())))
}

fn segment(cli: &Cli, cfg: ExperimentConfig, out: &Path, params: &Path, user: usize) -> Result<()> {
    let params = read_params(params)?;
    if user >= cfg.n_users() {
        return Err(config_error(format!("user {user} out of range")));
    }
    let exp = experiment(cli, cfg)?;
    let maps = exp.held_out_maps()?.swap_remove(user);
    let dir = out.join("segment");
    fs::create_dir_all(&dir).map_err(data_error)?;
    let mut csv = String::from("image,config,jaccard\n");
    for (j, map) in maps.iter().enumerate() {
        let gt = &exp.samples[j].mask;
        let session = &exp.sessions[j];
        write_image(&exp.samples[j].image, dir.join(format!("i{j:02}_image.png"))).map_err(data_error)?;
        write_mask(gt, dir.join(format!("i{j:02}_gt.pgm"))).map_err(data_error)?;
        render_map(map, dir.join(format!("i{j:02}_map.pgm"))).map_err(data_error)?;
        let filtered = gaussian_filter(&map.rasterize(), params.sigma_c).map_err(data_error)?;
        if let Ok(trimap) = make_trimap(&filtered, params.p1, params.p2) {
            render_trimap(&trimap, dir.join(format!("i{j:02}_trimap.pgm"))).map_err(data_error)?;
        }
        for config in ConfigId::ALL {
            let mask = match config {
                ConfigId::A => segment_a(map, params.alpha),
                ConfigId::B => segment_b(map, params.p, params.sigma_b),
                ConfigId::C => segment_c(map, session, params.p1, params.p2, params.sigma_c, &exp.cfg.grabcut),
            }
            .map_err(data_error)?;
            write_mask(&mask, dir.join(format!("i{j:02}_{config}.pgm"))).map_err(data_error)?;
            let jac = jaccard(&mask, gt).map_err(data_error)?;
            writeln!(csv, "{j},{config},{jac}").expect("write to string");
        }
    }
    write(&dir.join("jaccard.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}

fn report(path: &Path, out: Option<&Path>) -> Result<()> {
    let text = fs::read_to_string(path).map_err(data_error)?;
    let report = SegmentationReport::from_json(&text)?;
    for s in &report.summary {
        let js: Vec<f64> = report.cells.iter().filter(|c| c.config == s.config).map(|c| c.jaccard).collect();
        let mean = js.iter().sum::<f64>() / js.len().max(1) as f64;
        if js.len() != s.n || (mean - s.mean).abs() > 1e-12 {
            return Err(data_error(format!("config {} aggregate does not match its cells", s.config)));
        }
    }
    print!("{}", report.summary_text());
    if let Some(dir) = out {
        report.write_to(dir)?;
    }
    Ok(())
}
