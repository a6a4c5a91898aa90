//! Command-line interface. Exit codes: 0 success, 2 config error, 3 data
//! error, 4 runtime failure.

use std::io::Write as _;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use imbapipe_core::bundle::ModelBundle;
use imbapipe_core::dataset::{summarize, write_csv};

use crate::config::{ConfigError, ExperimentConfig};
use crate::error::StageError;
use crate::fixtures::{self, FixtureSpec, FIXTURE_NAMES};
use crate::stages::{self, Experiment};
use crate::{artifacts, service};

#[derive(Debug, Parser)]
#[command(name = "imbapipe", version, about = "Imbalanced classification pipelines: resampling, model and feature selection, comparison, serving")]
pub struct Cli {
    /// Experiment config (TOML), or `default` for the built-in protocol.
    #[arg(long, global = true, default_value = "default")]
    pub config: PathBuf,
    /// Root seed (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Dataset CSV (overrides the config).
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    /// Name of the label column (overrides the config).
    #[arg(long, global = true)]
    pub label_column: Option<String>,
    /// Label counted as positive; repeat for several (overrides the config).
    #[arg(long = "positive-class", global = true)]
    pub positive_class: Vec<String>,
    /// Recompute stages whose outputs already exist.
    #[arg(long, global = true)]
    pub force: bool,
    /// Log progress to stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Class counts and per-feature summary statistics of the dataset.
    Describe,
    /// Writes a seeded synthetic fixture CSV.
    Fixture {
        /// degotalls-like or castellfollit-like
        name: String,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Every resampler paired with every default model; ranks resamplers.
    ResampleBench,
    /// Grid search per (family, top resampler).
    ModelSelect,
    /// k-best feature sweep for the model-selection pipelines.
    FeatureSelect,
    /// Repeated CV, Friedman and Nemenyi tests, CD diagram, winner.
    Compare,
    /// Permutation importance of the comparison winner.
    Importance,
    /// Baseline / +Resampling / +Model Parameterization / +Feature Selection.
    Ablation,
    /// Fits the comparison winner on the full dataset and writes a bundle.
    Train,
    /// Runs every stage enabled in the config, in order.
    Run,
    /// Scores a CSV with a bundle.
    Predict {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Output CSV (stdout when absent).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// HTTP prediction service.
    Serve {
        #[arg(long)]
        bundle: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: IpAddr,
        /// Allowed CORS origin (any when absent).
        #[arg(long)]
        cors_origin: Option<String>,
    },
}

impl Cli {
    /// The config file with command-line overrides applied.
    pub fn effective_config(&self) -> Result<ExperimentConfig, ConfigError> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output.dir = o.clone();
        }
        if let Some(d) = &self.data {
            cfg.dataset.path = d.clone();
        }
        if let Some(l) = &self.label_column {
            cfg.dataset.label_column = l.clone();
        }
        if !self.positive_class.is_empty() {
            cfg.dataset.positive_classes = self.positive_class.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args(args: impl IntoIterator<Item = String>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), StageError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(ConfigError::Invalid("--jobs must be >= 1".into()).into());
        }
        builder = builder.num_threads(j);
    }
    let pool = builder.build().map_err(|e| StageError::Runtime(e.to_string()))?;
    pool.install(|| dispatch(cli))
}

fn print(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes());
    let _ = out.flush();
}

fn dispatch(cli: &Cli) -> Result<(), StageError> {
    match &cli.command {
        Command::Fixture { name, output } => fixture(name, output.as_deref(), cli),
        Command::Predict { bundle, input, output } => predict(bundle, input, output.as_deref()),
        Command::Serve {
            bundle,
            port,
            bind,
            cors_origin,
        } => serve(bundle.as_deref(), SocketAddr::new(*bind, *port), cors_origin.as_deref()),
        Command::Describe => {
            let cfg = cli.effective_config()?;
            let data = stages::load_dataset(&cfg)?;
            let (neg, pos) = data.class_counts()?;
            let stats = summarize(&data).map_err(|e| StageError::Data(e.to_string()))?;
            print(&format!(
                "rows: {}\nfeatures: {}\nnegatives: {neg}\npositives: {pos}\n\n{}",
                data.n_rows(),
                data.n_features(),
                stats.to_text()
            ));
            Ok(())
        }
        stage => {
            let cfg = cli.effective_config()?;
            let exp = Experiment::open(cfg, cli.force)?;
            run_stage(&exp, stage)?;
            eprintln!("outputs: {}", exp.dir.root.display());
            Ok(())
        }
    }
}

fn run_stage(exp: &Experiment, command: &Command) -> Result<(), StageError> {
    match command {
        Command::ResampleBench => print(&imbapipe_core::evaluation::score_table_text(
            &stages::resample_bench(exp)?.score_rows(),
        )),
        Command::ModelSelect => print(&imbapipe_core::evaluation::score_table_text(
            &stages::model_select(exp)?.score_rows(),
        )),
        Command::FeatureSelect => print(&imbapipe_core::evaluation::score_table_text(
            &stages::feature_select(exp)?.score_rows(),
        )),
        Command::Compare => {
            stages::compare(exp)?;
            print(&read_report(exp, "compare.txt")?);
        }
        Command::Importance => {
            stages::importance(exp)?;
            print(&read_report(exp, "importance.csv")?);
        }
        Command::Ablation => print(&stages::ablation(exp)?.to_text()),
        Command::Train => {
            let b = stages::train(exp)?;
            print(&format!(
                "bundle: {}\npipeline: {}\nfeatures: {}\n",
                exp.dir.path("bundle.json").display(),
                b.pipeline_id,
                b.feature_names.len()
            ));
        }
        Command::Run => {
            let t = exp.cfg.stages;
            let steps: [(bool, Command); 7] = [
                (t.resample_bench, Command::ResampleBench),
                (t.model_select, Command::ModelSelect),
                (t.feature_select, Command::FeatureSelect),
                (t.compare, Command::Compare),
                (t.importance, Command::Importance),
                (t.train, Command::Train),
                (t.ablation, Command::Ablation),
            ];
            for (enabled, step) in steps {
                if enabled {
                    run_stage(exp, &step)?;
                }
            }
        }
        _ => unreachable!("non-stage command"),
    }
    Ok(())
}

fn read_report(exp: &Experiment, name: &str) -> Result<String, StageError> {
    let p = exp.dir.path(name);
    std::fs::read_to_string(&p).map_err(|e| StageError::io(&p, e))
}

fn fixture(name: &str, output: Option<&Path>, cli: &Cli) -> Result<(), StageError> {
    let seed = cli.seed.unwrap_or(0);
    let spec = FixtureSpec::by_name(name, seed).ok_or_else(|| {
        ConfigError::Invalid(format!("unknown fixture `{name}` (expected one of {FIXTURE_NAMES:?})"))
    })?;
    let default_path = PathBuf::from(format!("{name}.csv"));
    let path = output.unwrap_or(&default_path);
    artifacts::ensure_parent(path)?;
    let label = cli.label_column.as_deref().unwrap_or("label");
    write_csv(&fixtures::generate(&spec), path, label)?;
    print(&format!(
        "{}: {} rows, {} features, {} positives\n",
        path.display(),
        spec.rows,
        spec.features,
        spec.positives
    ));
    Ok(())
}

/// One prediction per CSV row, in input order: `row,label,score`. Scores
/// print in shortest round-trip form so they parse back bit-identically.
pub fn predict_csv(bundle: &ModelBundle, input: &Path) -> Result<String, StageError> {
    let mut rdr = csv::Reader::from_path(input)
        .map_err(|e| StageError::Data(format!("{}: {e}", input.display())))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| StageError::Data(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let cols = bundle
        .locate_columns(&header)
        .map_err(|e| StageError::Data(format!("{}: {e}", input.display())))?;
    let mut out = String::from("row,label,score\n");
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| StageError::Data(e.to_string()))?;
        let raw = cols
            .iter()
            .map(|&c| {
                let cell = rec.get(c).unwrap_or("").trim();
                cell.parse::<f64>().map_err(|_| {
                    StageError::Data(format!("row {i}, column `{}`: not a number: {cell:?}", header[c]))
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        let p = bundle
            .predict_row(&raw)
            .map_err(|e| StageError::Data(format!("row {i}: {e}")))?;
        out.push_str(&format!("{i},{},{}\n", p.label, p.score));
    }
    Ok(out)
}

fn load_bundle(path: &Path) -> Result<ModelBundle, StageError> {
    if !path.is_file() {
        return Err(StageError::MissingArtifact {
            path: path.to_path_buf(),
            stage: stages::TRAIN.to_string(),
        });
    }
    ModelBundle::load(path).map_err(|e| StageError::Data(format!("bundle {}: {e}", path.display())))
}

fn predict(bundle: &Path, input: &Path, output: Option<&Path>) -> Result<(), StageError> {
    let b = load_bundle(bundle)?;
    let text = predict_csv(&b, input)?;
    match output {
        Some(p) => {
            artifacts::ensure_parent(p)?;
            std::fs::write(p, text).map_err(|e| StageError::io(p, e))
        }
        None => {
            print(&text);
            Ok(())
        }
    }
}

fn serve(bundle: Option<&Path>, addr: SocketAddr, cors_origin: Option<&str>) -> Result<(), StageError> {
    let b = bundle.map(load_bundle).transpose()?;
    let app = service::router(b, cors_origin);
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| StageError::Runtime(e.to_string()))?;
    rt.block_on(service::serve(addr, app, |bound| {
        print(&format!("listening on http://{bound}\n"));
    }))
    .map_err(|e| StageError::Runtime(format!("server on {addr}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("imbapipe").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn global_flags_override_the_config() {
        let cli = parse(&[
            "describe",
            "--seed",
            "9",
            "--out",
            "o",
            "--positive-class",
            "A",
            "--positive-class",
            "B",
            "--label-column",
            "cls",
        ]);
        let cfg = cli.effective_config().unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.output.dir, PathBuf::from("o"));
        assert_eq!(cfg.dataset.positive_classes, vec!["A", "B"]);
        assert_eq!(cfg.dataset.label_column, "cls");
    }

    #[test]
    fn exit_codes_follow_the_error_class() {
        assert_eq!(main_with_args(["imbapipe", "--config", "/nonexistent.toml", "describe"].map(String::from)), 2);
        assert_eq!(
            main_with_args(["imbapipe", "--data", "/nonexistent.csv", "describe"].map(String::from)),
            3
        );
        assert_eq!(main_with_args(["imbapipe", "no-such-command"].map(String::from)), 2);
        assert_eq!(main_with_args(["imbapipe", "fixture", "nope"].map(String::from)), 2);
    }
}
