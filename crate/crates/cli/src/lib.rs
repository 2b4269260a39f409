//! Command-line driver: parses arguments, runs one analysis and emits its
//! report. [`run`] returns the process exit code (0 success, 1 usage error,
//! 2 data error) so it can be exercised in tests without spawning processes.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sensor_entropy::chowliu::{tree_profile, validate, ValidationReport};
use sensor_entropy::dependence::{matrix, DependenceKind};
use sensor_entropy::guesswork::guesswork_table;
use sensor_entropy::report::{Format, MeansCurve, Metadata, Payload, Report, SingleSensorTable, SubsetRanking, ValidationTable};
use sensor_entropy::sweep::{
    bin_table, default_grid, enumerate_subsets, run_sweep, sensitivity, size_means, top_k, SweepConfig, DEFAULT_MAX_BINS,
};
use sensor_entropy::synth::{brute_profile, golden_file, random_tree_model, GoldenFile};
use sensor_entropy::{load_table, BinRule, DatasetManifest, Error, SampleTable};

pub const WORKERS_ENV: &str = "SENSOR_ENTROPY_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "sensor-entropy", version, about = "Entropy profiles of multi-channel sensor data")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output format: markdown, csv or json.
    #[arg(long, global = true, default_value = "markdown")]
    format: Format,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Dataset manifest (TOML).
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Directory the manifest's file paths are relative to; defaults to the
    /// manifest's own directory.
    #[arg(long)]
    data_root: Option<PathBuf>,
    /// Binning rule: fd, scott, or a fixed bin count.
    #[arg(long, default_value = "fd")]
    bins: BinRule,
    /// Per-channel bin cap (sweeps default to 2048).
    #[arg(long)]
    max_bins: Option<usize>,
    /// Restrict the analysis to these channels, in this order.
    #[arg(long, value_delimiter = ',')]
    channels: Vec<String>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Worker threads.
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
    #[arg(long, default_value_t = 2)]
    min_size: usize,
    #[arg(long)]
    max_size: Option<usize>,
    /// Suppress progress lines on standard error.
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-channel entropy profiles with mean and standard deviation.
    Single {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Chow-Liu profile of every channel subset, in canonical order.
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Subsets ranked by min-entropy.
    Topk {
        /// Structured sweep report to rank; otherwise a sweep is run.
        #[arg(long)]
        results: Option<PathBuf>,
        #[arg(short, long, default_value_t = 10)]
        k: usize,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Mean profile per subset size over all subsets of that size.
    Means {
        #[arg(long)]
        results: Option<PathBuf>,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Direct enumeration against the Chow-Liu approximation.
    Validate {
        /// Comma-separated subset of 2 or 3 channels; repeatable. Defaults to
        /// every pair and triple.
        #[arg(long)]
        subset: Vec<String>,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Pairwise dependence matrix.
    Matrix {
        /// pearson or mi.
        #[arg(long, default_value = "mi")]
        kind: String,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Profile of one subset across fixed bin counts.
    Sensitivity {
        /// Channels of the subset; defaults to all channels.
        #[arg(long, value_delimiter = ',')]
        subset: Vec<String>,
        /// Strictly increasing bin counts; defaults to 5,8,16,...,2048.
        #[arg(long, value_delimiter = ',')]
        grid: Vec<usize>,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Expected guesses and time to success per min-entropy and rate.
    Guesswork {
        /// Min-entropy values in bits.
        #[arg(long, value_delimiter = ',')]
        hmin: Vec<f64>,
        /// Structured sweep report; uses each result's min-entropy.
        #[arg(long)]
        results: Option<PathBuf>,
        /// With --results, only the top k subsets.
        #[arg(long)]
        top: Option<usize>,
        /// Guess rates per second.
        #[arg(long, value_delimiter = ',', default_value = "1,10,1e3,1e6")]
        rates: Vec<f64>,
    },
    /// Checks tree routines against brute-force expansion on seeded models.
    SynthCheck {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        models: u64,
        /// Write the golden generator outputs to this file and exit.
        #[arg(long)]
        write_golden: Option<PathBuf>,
        /// Compare a golden file with freshly generated outputs.
        #[arg(long)]
        check_golden: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Data(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e.to_string())
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

/// Runs the command line and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            1
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

fn timestamp() -> String {
    let secs = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.parse::<i64>().ok());
    let when = match secs.and_then(|s| chrono::DateTime::from_timestamp(s, 0)) {
        Some(t) => t,
        None => chrono::Utc::now(),
    };
    when.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn metadata(dataset: &str, binning: &str) -> Metadata {
    Metadata {
        dataset: dataset.to_string(),
        binning: binning.to_string(),
        timestamp: timestamp(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
    }
}

fn write_output(cli: &Cli, text: &str) -> Outcome<()> {
    match &cli.out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Data(format!("{}: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Failure::Data(e.to_string()))
        }
    }
}

fn emit(cli: &Cli, report: Report) -> Outcome<()> {
    let text = report.emit(cli.format)?;
    write_output(cli, &text)
}

fn load(data: &DataArgs) -> Outcome<(String, SampleTable)> {
    let path = data
        .manifest
        .as_ref()
        .ok_or_else(|| Failure::Usage("--manifest is required".into()))?;
    let manifest = DatasetManifest::from_path(path)?;
    let root = match &data.data_root {
        Some(r) => r.clone(),
        None => path.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    let mut table = load_table(&manifest, root)?;
    if !data.channels.is_empty() {
        table = table.select(&data.channels)?;
    }
    Ok((manifest.name, table))
}

fn sweep_config(data: &DataArgs, sweep: &SweepArgs) -> Outcome<SweepConfig> {
    let mut config = SweepConfig {
        rule: data.bins,
        min_size: sweep.min_size,
        max_size: sweep.max_size,
        max_bins: Some(data.max_bins.unwrap_or(DEFAULT_MAX_BINS)),
        progress: !sweep.quiet,
        ..SweepConfig::default()
    };
    if let Some(w) = sweep.workers {
        if w == 0 {
            return Err(Failure::Usage("--workers must be positive".into()));
        }
        config.workers = w;
    }
    Ok(config)
}

fn sweep_ranking(data: &DataArgs, sweep: &SweepArgs) -> Outcome<(Metadata, SubsetRanking)> {
    let config = sweep_config(data, sweep)?;
    let (name, table) = load(data)?;
    let outcome = run_sweep(&table, &config)?;
    for f in &outcome.failures {
        eprintln!("warning: subset {}: {}", f.subset.join(","), f.reason);
    }
    Ok((
        metadata(&name, &data.bins.to_string()),
        SubsetRanking {
            universe: outcome.channels,
            results: outcome.results,
            failures: outcome.failures,
        },
    ))
}

fn read_ranking(path: &Path) -> Outcome<(Metadata, SubsetRanking)> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    let report = Report::from_structured(&text)?;
    match report.payload {
        Payload::SubsetRanking(r) => Ok((report.metadata, r)),
        other => Err(Failure::Data(format!(
            "{} holds a {} report, expected subset_ranking",
            path.display(),
            other.kind()
        ))),
    }
}

fn ranking_source(results: &Option<PathBuf>, data: &DataArgs, sweep: &SweepArgs) -> Outcome<(Metadata, SubsetRanking)> {
    match results {
        Some(path) => read_ranking(path),
        None => sweep_ranking(data, sweep),
    }
}

fn execute(cli: &Cli) -> Outcome<()> {
    match &cli.command {
        Command::Single { data } => {
            let (name, table) = load(data)?;
            let channels = bin_table(&table, data.bins, data.max_bins)
                .into_iter()
                .collect::<sensor_entropy::Result<Vec<_>>>()?;
            let payload = Payload::SingleSensorTable(SingleSensorTable::from_channels(&channels)?);
            emit(cli, Report::new(metadata(&name, &data.bins.to_string()), payload))
        }
        Command::Sweep { data, sweep } => {
            let (meta, ranking) = sweep_ranking(data, sweep)?;
            emit(cli, Report::new(meta, Payload::SubsetRanking(ranking)))
        }
        Command::Topk { results, k, data, sweep } => {
            if *k == 0 {
                return Err(Failure::Usage("-k must be positive".into()));
            }
            let (meta, mut ranking) = ranking_source(results, data, sweep)?;
            ranking.results = top_k(&ranking.results, *k);
            emit(cli, Report::new(meta, Payload::SubsetRanking(ranking)))
        }
        Command::Means { results, data, sweep } => {
            let (meta, ranking) = ranking_source(results, data, sweep)?;
            let curve = MeansCurve {
                rows: size_means(&ranking.results),
            };
            emit(cli, Report::new(meta, Payload::SweepMeansCurve(curve)))
        }
        Command::Validate { subset, data } => {
            let (name, table) = load(data)?;
            let binned = bin_table(&table, data.bins, data.max_bins);
            let subsets: Vec<Vec<usize>> = if subset.is_empty() {
                let n = table.channels().len();
                if n < 2 {
                    return Err(Failure::Data("validation needs at least two channels".into()));
                }
                enumerate_subsets(n, 2, n.min(3))?.collect()
            } else {
                subset
                    .iter()
                    .map(|s| s.split(',').map(|c| table.index_of(c.trim())).collect())
                    .collect::<sensor_entropy::Result<_>>()?
            };
            let mut rows: Vec<ValidationReport> = Vec::new();
            for s in subsets {
                let chans = s
                    .iter()
                    .map(|&i| binned[i].as_ref().map_err(|e| Failure::Data(format!("{}: {e}", table.channels()[i]))))
                    .collect::<Outcome<Vec<_>>>()?;
                rows.push(validate(&chans)?);
            }
            let payload = Payload::ValidationTable(ValidationTable { rows });
            emit(cli, Report::new(metadata(&name, &data.bins.to_string()), payload))
        }
        Command::Matrix { kind, data } => {
            let kind = match kind.as_str() {
                "pearson" => DependenceKind::Pearson,
                "mi" => DependenceKind::MutualInformationBits,
                other => return Err(Failure::Usage(format!("unknown matrix kind {other:?}"))),
            };
            let (name, table) = load(data)?;
            let binned = bin_table(&table, data.bins, data.max_bins)
                .into_iter()
                .collect::<sensor_entropy::Result<Vec<_>>>()?;
            let m = matrix(&table, &binned, kind)?;
            emit(cli, Report::new(metadata(&name, &data.bins.to_string()), Payload::DependenceMatrix(m)))
        }
        Command::Sensitivity { subset, grid, data } => {
            let (name, table) = load(data)?;
            let subset = if subset.is_empty() { table.channels().to_vec() } else { subset.clone() };
            let grid = if grid.is_empty() { default_grid() } else { grid.clone() };
            let curve = sensitivity(&table, &subset, &grid)?;
            emit(cli, Report::new(metadata(&name, "fixed"), Payload::SensitivityCurve(curve)))
        }
        Command::Guesswork { hmin, results, top, rates } => {
            let (dataset, hmins) = match (results, hmin.is_empty()) {
                (Some(_), false) => return Err(Failure::Usage("use either --hmin or --results".into())),
                (None, true) => return Err(Failure::Usage("--hmin or --results is required".into())),
                (None, false) => ("analytic".to_string(), hmin.clone()),
                (Some(path), true) => {
                    let (meta, ranking) = read_ranking(path)?;
                    let ranked = match top {
                        Some(k) => top_k(&ranking.results, *k),
                        None => ranking.results,
                    };
                    (meta.dataset, ranked.iter().map(|r| r.profile.hmin).collect())
                }
            };
            if hmins.iter().any(|h| !(*h >= 0.0 && h.is_finite())) {
                return Err(Failure::Usage("min-entropy values must be finite and nonnegative".into()));
            }
            let table = guesswork_table(&hmins, rates).map_err(|e| match e {
                Error::NonPositiveRate(_) | Error::InvalidGrid(_) => Failure::Usage(e.to_string()),
                other => other.into(),
            })?;
            emit(cli, Report::new(metadata(&dataset, "n/a"), Payload::GuessworkTable(table)))
        }
        Command::SynthCheck {
            seed,
            models,
            write_golden,
            check_golden,
        } => synth_check(cli, *seed, *models, write_golden.as_deref(), check_golden.as_deref()),
    }
}

fn synth_check(cli: &Cli, seed: u64, models: u64, write_golden: Option<&Path>, check_golden: Option<&Path>) -> Outcome<()> {
    if let Some(path) = write_golden {
        let text = serde_json::to_string_pretty(&golden_file()?).map_err(|e| Failure::Data(e.to_string()))? + "\n";
        fs::write(path, text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
        eprintln!("wrote {}", path.display());
        return Ok(());
    }
    if let Some(path) = check_golden {
        let text = fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
        let stored: GoldenFile = serde_json::from_str(&text).map_err(|e| Failure::Data(e.to_string()))?;
        stored
            .matches(&golden_file()?, 1e-12)
            .map_err(|e| Failure::Data(format!("golden mismatch: {e}")))?;
        eprintln!("{}: {} cases match", path.display(), stored.cases.len());
        return Ok(());
    }
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for s in seed..seed + models {
        let k = 1 + (s % 6) as usize;
        let arity = 2 + (s % 5) as usize;
        let model = random_tree_model(s, k, arity);
        let brute = brute_profile(&model)?;
        let tree = tree_profile(&model.to_chowliu()?);
        for (b, t) in brute.orders().iter().zip(tree.orders()) {
            worst = worst.max((b - t).abs());
        }
        rows.push(ValidationReport::new(model.names.clone(), brute, tree));
    }
    emit(cli, Report::new(metadata("synthetic", "exact"), Payload::ValidationTable(ValidationTable { rows })))?;
    if worst > 1e-6 {
        return Err(Failure::Data(format!("tree and brute-force profiles differ by {worst:e} bits")));
    }
    eprintln!("{models} models agree; largest difference {worst:e} bits");
    Ok(())
}
