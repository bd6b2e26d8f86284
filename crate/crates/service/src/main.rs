use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lde_core::metamodel::{
    extract_meta_features, infer_data_schema, CommonHeader, Dataset, MetaFeatures, Table,
};
use lde_core::metrics::{RankLevel, ResultSource};
use lde_core::splitter::make_stratified_folds;
use lde_core::synthetic::{generate, CorpusSpec};
use lde_core::Store;
use lde_service::analysis::{self, RecommendRequest, RegretRequest, VariabilityRequest};
use lde_service::ingest::{self, write_meta_csv, write_results_csv};
use uuid::Uuid;

#[derive(Parser)]
#[command(
    name = "lde",
    version,
    about = "Experiment metadata store and analysis tools"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct StoreArgs {
    /// Storage directory.
    #[arg(long, env = "LDE_ROOT", default_value = "lde-data")]
    root: PathBuf,
}

/// Options shared by every analysis command.
#[derive(Args)]
struct AnalysisArgs {
    #[arg(long, default_value = analysis::DEFAULT_METRIC)]
    metric: String,
    /// How repeated runs collapse to one score.
    #[arg(long, value_enum)]
    source: Option<Source>,
    /// Analyses are deterministic; the seed is echoed into JSON output so
    /// reruns can be matched to their inputs.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; `.json` selects JSON, anything else CSV. Stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Source {
    FirstRun,
    MeanAggregated,
}

impl From<Source> for ResultSource {
    fn from(s: Source) -> Self {
        match s {
            Source::FirstRun => ResultSource::FirstRun,
            Source::MeanAggregated => ResultSource::MeanAggregated,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Level {
    Pipelines,
    Params,
}

#[derive(Subcommand)]
enum Command {
    /// Run the REST server.
    Serve {
        #[command(flatten)]
        store: StoreArgs,
        #[arg(long, env = "LDE_BIND", default_value = "127.0.0.1:8080")]
        bind: String,
    },
    /// Import results or meta-features from CSV.
    #[command(subcommand)]
    Ingest(IngestCommand),
    /// Stratified k-fold split of a local CSV table.
    Split {
        table: PathBuf,
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also register the dataset and its folds in this store.
        #[arg(long, env = "LDE_ROOT")]
        root: Option<PathBuf>,
        #[arg(long, default_value = "cli")]
        author: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Top pipelines or parameter configs on one dataset, or best params of
    /// a pipeline across datasets.
    Rank {
        #[command(flatten)]
        store: StoreArgs,
        #[command(flatten)]
        common: AnalysisArgs,
        #[arg(long, required_unless_present = "pipeline")]
        dataset: Option<String>,
        #[arg(long, conflicts_with = "dataset")]
        pipeline: Option<String>,
        #[arg(long, value_enum, default_value = "pipelines")]
        level: Level,
        #[arg(long, default_value_t = 10)]
        n: usize,
    },
    /// Significance summary of run-to-run variability.
    Variability {
        #[command(flatten)]
        store: StoreArgs,
        #[command(flatten)]
        common: AnalysisArgs,
        #[arg(long, default_value = "dataset_configs")]
        mode: String,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, value_delimiter = ',', default_values_t = analysis::DEFAULT_TOP_NS)]
        top_n: Vec<usize>,
        /// JSON file of external scores for cross_corpus mode.
        #[arg(long)]
        external: Option<PathBuf>,
    },
    /// Leave-one-dataset-out regret under both result sources.
    Regret {
        #[command(flatten)]
        store: StoreArgs,
        #[command(flatten)]
        common: AnalysisArgs,
        /// greedy, knd or knd:<k>.
        #[arg(long, default_value = "knd")]
        recommender: String,
        #[arg(long, default_value_t = lde_core::metalearn::DEFAULT_HORIZON)]
        horizon: usize,
        #[arg(long, default_value_t = 0.0)]
        floor: f64,
    },
    /// Recommend configs for a new dataset.
    Recommend {
        #[command(flatten)]
        store: StoreArgs,
        #[command(flatten)]
        common: AnalysisArgs,
        /// JSON meta-features document.
        #[arg(long, required_unless_present = "table")]
        meta: Option<PathBuf>,
        /// CSV table to extract meta-features from.
        #[arg(long, conflicts_with = "meta", requires = "target")]
        table: Option<PathBuf>,
        #[arg(long)]
        target: Option<String>,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 10)]
        budget: usize,
    },
    /// Write a synthetic results corpus and its meta-features sidecar.
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        datasets: usize,
        #[arg(long, default_value_t = 10)]
        pipelines: usize,
        #[arg(long, default_value_t = 10)]
        configs: usize,
        #[arg(long, default_value_t = 1)]
        folds: usize,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        meta_out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum IngestCommand {
    /// Long-format results CSV.
    Results {
        file: PathBuf,
        #[command(flatten)]
        store: StoreArgs,
        /// Rename a metric on ingest, e.g. `acc=normalized_accuracy`.
        #[arg(long = "map", value_parser = parse_mapping)]
        mappings: Vec<(String, String)>,
    },
    /// Meta-features sidecar CSV.
    MetaFeatures {
        file: PathBuf,
        #[command(flatten)]
        store: StoreArgs,
    },
}

fn parse_mapping(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .ok_or_else(|| format!("expected FROM=TO, got '{s}'"))
}

type CliResult<T = ()> = Result<T, Box<dyn std::error::Error>>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn open_store(args: &StoreArgs) -> lde_core::Result<Store> {
    Store::open(&args.root)
}

fn is_json(out: &Option<PathBuf>) -> bool {
    out.as_ref()
        .and_then(|p| p.extension())
        .is_some_and(|e| e == "json")
}

fn emit(out: &Option<PathBuf>, text: &str) -> io::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text),
        None => io::stdout().write_all(text.as_bytes()),
    }
}

fn to_json<T: serde::Serialize>(value: &T, seed: Option<u64>) -> serde_json::Result<String> {
    let mut v = serde_json::to_value(value)?;
    if let (Some(seed), serde_json::Value::Object(map)) = (seed, &mut v) {
        map.insert("seed".into(), seed.into());
    }
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    Ok(serde_json::from_reader(File::open(path)?)?)
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Serve { store, bind } => {
            let store = Arc::new(open_store(&store)?);
            tracing_subscriber::fmt()
                .with_env_filter(
                    tracing_subscriber::EnvFilter::try_from_default_env()
                        .unwrap_or_else(|_| "info".into()),
                )
                .init();
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let (listener, addr) = lde_service::bind(&bind).await?;
                tracing::info!(%addr, root = %store.root().unwrap().display(), "listening");
                lde_service::serve(store, listener).await
            })?;
        }
        Command::Ingest(IngestCommand::Results {
            file,
            store,
            mappings,
        }) => {
            let store = open_store(&store)?;
            let map: BTreeMap<String, String> = mappings.into_iter().collect();
            let report = ingest::ingest_results(&store, File::open(file)?, &map)?;
            print!("{}", to_json(&report, None)?);
        }
        Command::Ingest(IngestCommand::MetaFeatures { file, store }) => {
            let store = open_store(&store)?;
            let report = ingest::ingest_meta_features(&store, File::open(file)?)?;
            print!("{}", to_json(&report, None)?);
        }
        Command::Split {
            table,
            target,
            k,
            seed,
            root,
            author,
            out,
        } => {
            let name = table
                .file_stem()
                .map(|s| s.to_string_lossy().to_string())
                .unwrap_or_else(|| "table".into());
            let t = Table::from_csv_reader(&name, File::open(&table)?, Some(target.clone()))?;
            let header = CommonHeader::new(author);
            let folds = match root {
                Some(root) => {
                    let store = Store::open(root)?;
                    let ds = Dataset {
                        header: header.clone().with_tags(&["split"]),
                        data_schema: infer_data_schema(&t)?,
                        meta_features: extract_meta_features(&t)?,
                        target: None,
                        source: Some(table.display().to_string()),
                    };
                    let id = store.put_artifact(ds)?;
                    let mut folds = make_stratified_folds(&t, k, seed, id, &header)?;
                    for f in &mut folds {
                        f.header.id = store.put_artifact(f.clone())?;
                    }
                    eprintln!("registered dataset {id} with {k} folds");
                    folds
                }
                None => make_stratified_folds(&t, k, seed, Uuid::nil(), &header)?,
            };
            emit(&out, &to_json(&folds, None)?)?;
        }
        Command::Rank {
            store,
            common,
            dataset,
            pipeline,
            level,
            n,
        } => {
            let store = open_store(&store)?;
            let source = common
                .source
                .map_or(ResultSource::MeanAggregated, Into::into);
            let ranking = match (dataset, pipeline) {
                (_, Some(p)) => analysis::best_params(&store, &p, &common.metric, source, n)?,
                (Some(d), None) => {
                    let level = match level {
                        Level::Pipelines => RankLevel::Pipeline,
                        Level::Params => RankLevel::ParamConfig,
                    };
                    analysis::top_entities(&store, &d, level, &common.metric, source, n)?
                }
                (None, None) => unreachable!("clap requires one of them"),
            };
            if is_json(&common.out) {
                emit(&common.out, &to_json(&ranking, Some(common.seed))?)?;
            } else {
                emit(&common.out, &ranking.to_csv())?;
            }
        }
        Command::Variability {
            store,
            common,
            mode,
            alpha,
            top_n,
            external,
        } => {
            let store = open_store(&store)?;
            let req = VariabilityRequest {
                metric: Some(common.metric.clone()),
                alpha: Some(alpha),
                top_ns: Some(top_n),
                mode: Some(mode),
                external: external.map(|p| read_json(&p)).transpose()?,
                datasets: None,
            };
            let report = analysis::variability(&store, &req)?;
            if is_json(&common.out) {
                emit(&common.out, &to_json(&report, Some(common.seed))?)?;
            } else {
                emit(&common.out, &report.summary.to_csv())?;
            }
        }
        Command::Regret {
            store,
            common,
            recommender,
            horizon,
            floor,
        } => {
            let store = open_store(&store)?;
            let req = RegretRequest {
                metric: Some(common.metric.clone()),
                recommender: Some(recommender),
                horizon: Some(horizon),
                floor: Some(floor),
            };
            let cmp = analysis::regret(&store, &req)?;
            if is_json(&common.out) {
                emit(&common.out, &to_json(&cmp, Some(common.seed))?)?;
            } else {
                let csv = cmp.to_csv();
                // --source keeps only that source's rows.
                let text = match common.source {
                    None => csv,
                    Some(s) => {
                        let tag = format!(",{},", ResultSource::from(s).as_str());
                        csv.lines()
                            .enumerate()
                            .filter(|(i, l)| *i == 0 || l.contains(&tag))
                            .map(|(_, l)| format!("{l}\n"))
                            .collect()
                    }
                };
                emit(&common.out, &text)?;
            }
        }
        Command::Recommend {
            store,
            common,
            meta,
            table,
            target,
            k,
            budget,
        } => {
            let store = open_store(&store)?;
            let req = RecommendRequest {
                meta_features: meta.map(|p| read_json::<MetaFeatures>(&p)).transpose()?,
                table_csv: table.map(std::fs::read_to_string).transpose()?,
                target,
                k: Some(k),
                budget: Some(budget),
                metric: Some(common.metric.clone()),
                source: common.source.map(Into::into),
            };
            let resp = analysis::recommend(&store, &req)?;
            if is_json(&common.out) {
                emit(&common.out, &to_json(&resp, Some(common.seed))?)?;
            } else {
                let mut text = String::from("rank,pipeline_id,pipeline_params_id,expected_score\n");
                for (i, r) in resp.recommendations.iter().enumerate() {
                    let score = r.expected_score.map_or("na".to_string(), |s| s.to_string());
                    text.push_str(&format!(
                        "{},{},{},{}\n",
                        i + 1,
                        r.config.pipeline_id,
                        r.config.pipeline_params_id,
                        score
                    ));
                }
                emit(&common.out, &text)?;
            }
        }
        Command::Synth {
            seed,
            datasets,
            pipelines,
            configs,
            folds,
            repeats,
            noise,
            out,
            meta_out,
        } => {
            let corpus = generate(&CorpusSpec {
                n_datasets: datasets,
                n_pipelines: pipelines,
                configs_per_pipeline: configs,
                n_folds: folds,
                n_repeats: repeats,
                noise_sd: noise,
                seed,
                ..CorpusSpec::default()
            })?;
            write_results_csv(&corpus.runs, File::create(out)?)?;
            if let Some(p) = meta_out {
                write_meta_csv(&corpus.meta, File::create(p)?)?;
            }
        }
    }
    Ok(())
}
