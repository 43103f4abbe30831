use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use nullbench_core::controller::{self, DatasetEntry, Filter, LoadedDataset, ResultStore, RunConfig, RunOptions, METRIC_NAMES};
use nullbench_core::dataset::{write_csv, DatasetConfig};
use nullbench_core::imputers::{self, ImputerOptions};
use nullbench_core::injector::{inject_all, scenario_at_rates};
use nullbench_core::{ImputerKind, ScenarioId};

#[derive(Parser)]
#[command(name = "nullbench", version, about = "Benchmark imputer-then-model pipelines under simulated missingness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the pipelines a run config expands to.
    Plan {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated seeds overriding the config.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
    /// Execute a run config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        cache_dir: Option<PathBuf>,
        #[arg(long, default_value = "results.jsonl")]
        results: PathBuf,
        /// Keep trained models as JSON in this directory.
        #[arg(long)]
        artifacts_dir: Option<PathBuf>,
        /// Skip pipelines already in the result store.
        #[arg(long)]
        resume: bool,
    },
    /// Inject missingness into a CSV described by a schema config.
    Inject {
        #[arg(long)]
        schema: PathBuf,
        /// CSV to read instead of the path in the schema.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, value_enum)]
        mechanism: MechanismArg,
        #[arg(long, default_value_t = 0.3)]
        rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Rule-table preset overriding the schema's rule source.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit an imputer on one CSV and apply it to another.
    Impute {
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        train: PathBuf,
        /// CSV to transform; defaults to the training CSV.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        imputer: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Where to write the fitted imputer as JSON.
        #[arg(long)]
        save_imputer: Option<PathBuf>,
    },
    /// Summarize a result store into CSV tables.
    Report {
        #[arg(long, default_value = "results.jsonl")]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// `field=value` conditions, e.g. `scenario=S3`.
        #[arg(long = "filter")]
        filters: Vec<String>,
    },
    /// Spearman correlations between pipeline choices and metrics.
    Correlate {
        #[arg(long, default_value = "results.jsonl")]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = ["f1", "accuracy", "label_stability", "tprd", "tnrd"].map(String::from))]
        metrics: Vec<String>,
        #[arg(long = "filter")]
        filters: Vec<String>,
    },
    /// Check a run config and load its datasets without running anything.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MechanismArg {
    Mcar,
    Mar,
    Mnar,
    Mixed,
}

impl MechanismArg {
    fn scenario(self) -> ScenarioId {
        match self {
            MechanismArg::Mcar => ScenarioId::S1,
            MechanismArg::Mar => ScenarioId::S2,
            MechanismArg::Mnar => ScenarioId::S3,
            MechanismArg::Mixed => ScenarioId::S10,
        }
    }
}

fn load_config(path: &Path, seeds: Option<Vec<u64>>) -> Result<RunConfig> {
    let mut cfg = RunConfig::from_file(path).with_context(|| format!("reading {}", path.display()))?;
    if let Some(s) = seeds {
        if s.is_empty() {
            bail!("--seeds is empty");
        }
        cfg.seeds = s;
    }
    Ok(cfg)
}

fn write_dataset(d: &nullbench_core::Dataset, path: &Path) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_csv(d, BufWriter::new(f), "")?;
    Ok(())
}

fn load_store(path: &Path, filters: &[String]) -> Result<Vec<controller::ResultRecord>> {
    if !path.exists() {
        bail!("result store {} does not exist", path.display());
    }
    let store = ResultStore::open(path)?;
    Ok(store.query(&Filter::parse(filters)?)?)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Plan { config, seeds } => {
            let cfg = load_config(&config, seeds)?;
            let datasets = cfg.load_datasets()?;
            let specs = controller::plan(&cfg, &datasets)?;
            for s in &specs {
                println!("{}  {}", s.guid(), s.label());
            }
            let baselines = specs.iter().filter(|s| s.is_baseline()).count();
            eprintln!("{} pipelines ({} baselines)", specs.len(), baselines);
        }
        Command::Run {
            config,
            seeds,
            workers,
            cache_dir,
            results,
            artifacts_dir,
            resume,
        } => {
            let cfg = load_config(&config, seeds)?;
            let options = RunOptions {
                workers,
                results,
                cache_dir,
                artifacts_dir,
                resume,
            };
            let summary = controller::run(&cfg, &options)?;
            println!(
                "session {}: {} planned, {} executed, {} skipped, {} failed, {} cache hits in {:.1}s",
                summary.session, summary.planned, summary.executed, summary.skipped, summary.failed, summary.cache_hits, summary.seconds
            );
            if summary.failed > 0 {
                eprintln!("some pipelines failed; see the `error` field of their records");
            }
        }
        Command::Inject {
            schema,
            csv,
            mechanism,
            rate,
            seed,
            preset,
            out,
        } => {
            let base = Path::new(".");
            let entry = DatasetEntry { config: schema, csv, preset };
            let data = LoadedDataset::load(&entry, base)?;
            let scenario = scenario_at_rates(mechanism.scenario(), &data.rules, rate, rate)?;
            let injection = inject_all(&data.data, &scenario.train_specs, seed)?;
            write_dataset(&injection.dataset, &out)?;
            println!(
                "{} of {} cells masked ({:.4})",
                injection.injected.count(),
                data.data.n_rows() * data.data.n_cols(),
                injection.injected.count() as f64 / (data.data.n_rows() * data.data.n_cols()) as f64
            );
        }
        Command::Impute {
            schema,
            train,
            input,
            imputer,
            seed,
            out,
            save_imputer,
        } => {
            let cfg = DatasetConfig::from_file(&schema)?;
            let kind: ImputerKind = imputer.parse()?;
            let train_data = cfg.load_from(&train)?;
            let fitted = imputers::fit(&train_data, &ImputerOptions::default().spec(kind), seed)?;
            let target = match &input {
                Some(p) => cfg.load_from(p)?,
                None => train_data,
            };
            let result = fitted.transform(&target)?;
            write_dataset(&result.dataset, &out)?;
            if let Some(p) = save_imputer {
                std::fs::write(&p, fitted.to_json()?).with_context(|| format!("writing {}", p.display()))?;
            }
            println!(
                "{} cells filled, {} of {} rows kept",
                result.filled.len(),
                result.dataset.n_rows(),
                target.n_rows()
            );
        }
        Command::Report { results, out, filters } => {
            let records = load_store(&results, &filters)?;
            for p in controller::write_report(&records, &out)? {
                println!("{}", p.display());
            }
        }
        Command::Correlate {
            results,
            out,
            metrics,
            filters,
        } => {
            let records = load_store(&results, &filters)?;
            for m in &metrics {
                if !METRIC_NAMES.contains(&m.as_str()) {
                    bail!("unknown metric `{m}` (known: {})", METRIC_NAMES.join(", "));
                }
            }
            let names: Vec<&str> = metrics.iter().map(String::as_str).collect();
            let table = controller::correlate(&records, &names)?;
            std::fs::write(&out, table.to_csv()?).with_context(|| format!("writing {}", out.display()))?;
            println!("{}", out.display());
        }
        Command::ValidateConfig { config } => {
            let cfg = load_config(&config, None)?;
            let datasets = cfg.load_datasets()?;
            let specs = controller::plan(&cfg, &datasets)?;
            for d in &datasets {
                println!("{}: {} rows, {} columns, digest {}", d.name, d.data.n_rows(), d.data.n_cols(), d.digest);
            }
            println!("ok: {} pipelines", specs.len());
        }
    }
    Ok(())
}
