//! Benchmark command line: assembles the two reference problems, runs
//! training and prediction, and writes reports, CSV data, and SVG plots.

use std::fs;
use std::path::{Path, PathBuf};
use std::process;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::Serialize;
use srom::sampling::{lift_to_ambient, BasisSampler, ModelSampler, SamplerKind, SubspaceModel};
use srom::training::TrainingResult;
use srom::Vector64;

use srom_bench::config::{DynamicConfig, StaticConfig};
use srom_bench::dynamic_bench::{self, DynamicArtifacts};
use srom_bench::plot::{line_plot, Band, Series};
use srom_bench::report::{
    dynamic_report, static_report, write_dynamic_metrics_csv, write_static_metrics_csv,
};
use srom_bench::static_bench::{self, StaticArtifacts, StaticAssembly};
use srom_bench::{BenchError, Result};

const TRUTH_COLOR: &str = "#1a1a1a";
const ROM_COLOR: &str = "#6b7280";

#[derive(Parser)]
#[command(
    name = "srom-bench",
    version,
    about = "Benchmarks for stochastic reduced-order subspace models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parametric linear-static benchmark.
    #[command(subcommand)]
    Static(Action),
    /// Transient chain benchmark, a desk-scale synthetic analogue of an
    /// impact on a large structure.
    #[command(subcommand)]
    Dynamic(Action),
    /// Draw stochastic subspace frames for the static benchmark
    /// snapshots and write them with a reproducibility manifest.
    SampleSubspace(SampleArgs),
}

#[derive(Subcommand)]
enum Action {
    /// Full pipeline: train the resample size, sample the prediction
    /// ensemble, evaluate bands, write reports and plots.
    Run(CommonArgs),
    /// Concentration search only; writes traces and a summary.
    Train(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Configuration file (TOML); built-in defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the configuration seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Restrict the run to one sampler.
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Override the ensemble draw count.
    #[arg(long)]
    draws: Option<usize>,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Resample size per frame.
    #[arg(long, default_value_t = 8)]
    concentration: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Bootstrap,
    Ppca,
}

impl MethodArg {
    fn kind(self) -> SamplerKind {
        match self {
            MethodArg::Bootstrap => SamplerKind::Bootstrap,
            MethodArg::Ppca => SamplerKind::Ppca,
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = execute(&cli) {
        eprintln!("error: {e}");
        process::exit(e.exit_code());
    }
}

fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Static(Action::Run(args)) => static_run(args),
        Command::Static(Action::Train(args)) => static_train(args),
        Command::Dynamic(Action::Run(args)) => dynamic_run(args),
        Command::Dynamic(Action::Train(args)) => dynamic_train(args),
        Command::SampleSubspace(args) => sample_subspace(args),
    }
}

fn static_config(args: &CommonArgs) -> Result<StaticConfig> {
    let mut config = StaticConfig::load(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(draws) = args.draws {
        config.ensemble.draws = draws;
    }
    config.validate()?;
    Ok(config)
}

fn dynamic_config(args: &CommonArgs) -> Result<DynamicConfig> {
    let mut config = DynamicConfig::load(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(draws) = args.draws {
        config.ensemble.draws = draws;
    }
    config.validate()?;
    Ok(config)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    write_text(path, &(text + "\n"))
}

/// Training trace without timing columns, so reruns of one seed write
/// identical bytes.
fn write_trace_csv(path: &Path, result: &TrainingResult<f64>) -> Result<()> {
    let mut text = String::from("concentration,objective,standard_error,replicates\n");
    for entry in &result.trace {
        text.push_str(&format!(
            "{},{},{},{}\n",
            entry.concentration, entry.estimate.mean, entry.estimate.se, entry.estimate.n_mc
        ));
    }
    write_text(path, &text)
}

fn method_color(kind: SamplerKind) -> &'static str {
    match kind {
        SamplerKind::Bootstrap => "#d95f02",
        SamplerKind::Ppca => "#1b6ca8",
    }
}

fn band_label(kind: SamplerKind, level: f64) -> String {
    format!("{} {:.0}% band", kind.label(), level * 100.0)
}

fn static_run(args: &CommonArgs) -> Result<()> {
    let config = static_config(args)?;
    let artifacts = static_bench::run(&config, args.method.map(MethodArg::kind))?;
    let dir = args.out_dir.join("static");
    ensure_dir(&dir)?;

    let report = static_report(&artifacts);
    write_json(&dir.join("report.json"), &report)?;
    let mut metrics = Vec::new();
    write_static_metrics_csv(&mut metrics, &report)?;
    fs::write(dir.join("metrics.csv"), metrics)?;
    write_text(&dir.join("config_used.toml"), &config.to_toml())?;
    write_static_curves(&dir, &artifacts)?;
    for m in &artifacts.methods {
        write_trace_csv(
            &dir.join(format!("trace_{}.csv", m.kind.label())),
            &m.training,
        )?;
        write_text(
            &dir.join(format!("seed_manifest_{}.json", m.kind.label())),
            &(m.manifest.to_json() + "\n"),
        )?;
    }
    write_text(&dir.join("bands.svg"), &static_plot(&artifacts))?;

    println!("static benchmark (seed {})", config.seed);
    println!(
        "  reduced model relative error at the test parameter: {:.3e}",
        report.rom_relative_error
    );
    for m in &report.methods {
        println!(
            "  {:9} concentration {:3}  coverage {:.3}  average width {:.4e}",
            m.method, m.concentration, m.coverage, m.average_width
        );
    }
    if let Some(ratio) = report.width_ratio {
        println!("  width ratio (gaussian model / bootstrap): {ratio:.2}");
    }
    println!("  outputs in {}", dir.display());
    Ok(())
}

fn write_static_curves(dir: &Path, artifacts: &StaticArtifacts) -> Result<()> {
    let n = artifacts.assembly.test_truth.len();
    let mut header = vec!["node".to_string(), "truth".to_string(), "rom".to_string()];
    let mut columns: Vec<Vector64> = vec![
        Vector64::from_fn(n, |i, _| i as f64),
        artifacts.assembly.test_truth.clone(),
        artifacts.assembly.test_rom.clone(),
    ];
    for m in &artifacts.methods {
        let label = m.kind.label();
        header.push(format!("{label}_mean"));
        header.push(format!("{label}_lower"));
        header.push(format!("{label}_upper"));
        columns.push(m.mean.clone());
        columns.push(m.band.lower.clone());
        columns.push(m.band.upper.clone());
    }
    let table = DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i]);
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut buf = Vec::new();
    srom::io::write_csv_matrix(&mut buf, &table, &header_refs)?;
    fs::write(dir.join("curves.csv"), buf)?;
    Ok(())
}

fn static_plot(artifacts: &StaticArtifacts) -> String {
    let n = artifacts.assembly.test_truth.len();
    let nodes: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let level = artifacts.assembly.config.ensemble.level;
    let bands: Vec<Band> = artifacts
        .methods
        .iter()
        .map(|m| Band {
            label: band_label(m.kind, level),
            color: method_color(m.kind),
            x: nodes.clone(),
            lower: m.band.lower.iter().copied().collect(),
            upper: m.band.upper.iter().copied().collect(),
        })
        .collect();
    let mut series = vec![
        Series {
            label: "truth".to_string(),
            color: TRUTH_COLOR,
            dashed: false,
            x: nodes.clone(),
            y: artifacts.assembly.test_truth.iter().copied().collect(),
        },
        Series {
            label: "reduced model".to_string(),
            color: ROM_COLOR,
            dashed: true,
            x: nodes.clone(),
            y: artifacts.assembly.test_rom.iter().copied().collect(),
        },
    ];
    for m in &artifacts.methods {
        series.push(Series {
            label: format!("{} mean", m.kind.label()),
            color: method_color(m.kind),
            dashed: true,
            x: nodes.clone(),
            y: m.mean.iter().copied().collect(),
        });
    }
    line_plot(
        "Static benchmark: displacement at the test parameter",
        "node",
        "displacement",
        &bands,
        &series,
    )
}

#[derive(Debug, Clone, Serialize)]
struct TrainingSummary {
    method: String,
    concentration: usize,
    objective_mean: f64,
    objective_standard_error: f64,
    seconds: f64,
}

fn training_kinds(args: &CommonArgs) -> Vec<SamplerKind> {
    match args.method {
        Some(m) => vec![m.kind()],
        None => vec![SamplerKind::Bootstrap, SamplerKind::Ppca],
    }
}

fn static_train(args: &CommonArgs) -> Result<()> {
    let config = static_config(args)?;
    let assembly = StaticAssembly::build(config.clone())?;
    let dir = args.out_dir.join("static");
    ensure_dir(&dir)?;
    let mut summaries = Vec::new();
    for kind in training_kinds(args) {
        let (result, seconds) = static_bench::train_method(&assembly, kind)?;
        write_trace_csv(&dir.join(format!("trace_{}.csv", kind.label())), &result)?;
        println!(
            "static training, {}: concentration {} in {seconds:.1}s",
            kind.label(),
            result.best_concentration
        );
        summaries.push(TrainingSummary {
            method: kind.label().to_string(),
            concentration: result.best_concentration,
            objective_mean: result.best.mean,
            objective_standard_error: result.best.se,
            seconds,
        });
    }
    write_json(&dir.join("training.json"), &summaries)?;
    write_text(&dir.join("config_used.toml"), &config.to_toml())?;
    println!("  outputs in {}", dir.display());
    Ok(())
}

fn dynamic_train(args: &CommonArgs) -> Result<()> {
    let config = dynamic_config(args)?;
    let assembly = dynamic_bench::DynamicAssembly::build(config.clone())?;
    let dir = args.out_dir.join("dynamic");
    ensure_dir(&dir)?;
    let mut summaries = Vec::new();
    for kind in training_kinds(args) {
        let (result, seconds) = dynamic_bench::train_method(&assembly, kind)?;
        write_trace_csv(&dir.join(format!("trace_{}.csv", kind.label())), &result)?;
        println!(
            "transient training (synthetic analogue), {}: concentration {} in {seconds:.1}s",
            kind.label(),
            result.best_concentration
        );
        summaries.push(TrainingSummary {
            method: kind.label().to_string(),
            concentration: result.best_concentration,
            objective_mean: result.best.mean,
            objective_standard_error: result.best.se,
            seconds,
        });
    }
    write_json(&dir.join("training.json"), &summaries)?;
    write_text(&dir.join("config_used.toml"), &config.to_toml())?;
    println!("  outputs in {}", dir.display());
    Ok(())
}

fn dynamic_run(args: &CommonArgs) -> Result<()> {
    let config = dynamic_config(args)?;
    let artifacts = dynamic_bench::run(&config, args.method.map(MethodArg::kind))?;
    let dir = args.out_dir.join("dynamic");
    ensure_dir(&dir)?;

    let report = dynamic_report(&artifacts);
    write_json(&dir.join("report.json"), &report)?;
    let mut metrics = Vec::new();
    write_dynamic_metrics_csv(&mut metrics, &report)?;
    fs::write(dir.join("metrics.csv"), metrics)?;
    write_text(&dir.join("config_used.toml"), &config.to_toml())?;
    let labels = artifacts.assembly.qoi_labels();
    for (row, label) in labels.iter().enumerate() {
        write_dynamic_series(&dir, &artifacts, row, label)?;
        write_text(
            &dir.join(format!("plot_{label}.svg")),
            &dynamic_plot(&artifacts, row, label),
        )?;
    }
    for m in &artifacts.methods {
        write_trace_csv(
            &dir.join(format!("trace_{}.csv", m.kind.label())),
            &m.training,
        )?;
        write_text(
            &dir.join(format!("seed_manifest_{}.json", m.kind.label())),
            &(m.manifest.to_json() + "\n"),
        )?;
    }

    println!(
        "transient chain benchmark, synthetic analogue (seed {})",
        config.seed
    );
    for m in &report.methods {
        println!("  {:9} concentration {:3}", m.method, m.concentration);
        for row in &m.rows {
            println!(
                "    {:18} coverage {:.3}  average width {:.4e}",
                row.quantity, row.coverage, row.average_width
            );
        }
    }
    if report.width_ratios.is_some() {
        println!("  full-scale reference rows included in report.json for qualitative comparison");
    }
    println!("  outputs in {}", dir.display());
    Ok(())
}

fn write_dynamic_series(
    dir: &Path,
    artifacts: &DynamicArtifacts,
    row: usize,
    label: &str,
) -> Result<()> {
    let truth = &artifacts.assembly.truth;
    let nodes = truth.node_count();
    let mut header = vec!["time".to_string(), "truth".to_string(), "rom".to_string()];
    let mut columns: Vec<Vector64> = vec![
        truth.times.clone(),
        artifacts.assembly.truth_qoi.row(row).transpose(),
        artifacts.assembly.rom_qoi.row(row).transpose(),
    ];
    for m in &artifacts.methods {
        let method = m.kind.label();
        header.push(format!("{method}_mean"));
        header.push(format!("{method}_lower"));
        header.push(format!("{method}_upper"));
        columns.push(m.means[row].clone());
        columns.push(m.bands[row].lower.clone());
        columns.push(m.bands[row].upper.clone());
    }
    let table = DMatrix::from_fn(nodes, columns.len(), |i, j| columns[j][i]);
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut buf = Vec::new();
    srom::io::write_csv_matrix(&mut buf, &table, &header_refs)?;
    fs::write(dir.join(format!("series_{label}.csv")), buf)?;
    Ok(())
}

fn dynamic_plot(artifacts: &DynamicArtifacts, row: usize, label: &str) -> String {
    let times: Vec<f64> = artifacts.assembly.truth.times.iter().copied().collect();
    let level = artifacts.assembly.config.ensemble.level;
    let bands: Vec<Band> = artifacts
        .methods
        .iter()
        .map(|m| Band {
            label: band_label(m.kind, level),
            color: method_color(m.kind),
            x: times.clone(),
            lower: m.bands[row].lower.iter().copied().collect(),
            upper: m.bands[row].upper.iter().copied().collect(),
        })
        .collect();
    let mut series = vec![
        Series {
            label: "truth".to_string(),
            color: TRUTH_COLOR,
            dashed: false,
            x: times.clone(),
            y: artifacts
                .assembly
                .truth_qoi
                .row(row)
                .iter()
                .copied()
                .collect(),
        },
        Series {
            label: "reduced model".to_string(),
            color: ROM_COLOR,
            dashed: true,
            x: times.clone(),
            y: artifacts
                .assembly
                .rom_qoi
                .row(row)
                .iter()
                .copied()
                .collect(),
        },
    ];
    for m in &artifacts.methods {
        series.push(Series {
            label: format!("{} mean", m.kind.label()),
            color: method_color(m.kind),
            dashed: true,
            x: times.clone(),
            y: m.means[row].iter().copied().collect(),
        });
    }
    line_plot(
        &format!("Transient chain (synthetic analogue): {label}"),
        "time (s)",
        label.split('_').next().unwrap_or("value"),
        &bands,
        &series,
    )
}

#[derive(Debug, Clone, Serialize)]
struct SubspaceManifest {
    benchmark: String,
    method: String,
    seed: u64,
    concentration: usize,
    draws: usize,
    total_redraws: usize,
    streams: Vec<u64>,
}

fn sample_subspace(args: &SampleArgs) -> Result<()> {
    let config = static_config(&args.common)?;
    let draws = args.common.draws.unwrap_or(16);
    if draws == 0 {
        return Err(BenchError::config("at least one frame is required"));
    }
    let kind = args
        .common
        .method
        .map_or(SamplerKind::Bootstrap, MethodArg::kind);
    let assembly = StaticAssembly::build(config.clone())?;
    let model = SubspaceModel::new(
        assembly.svd.clone(),
        config.problem.subspace_dim,
        args.concentration,
        kind,
    )?;
    let sampler = ModelSampler::new(&model, config.ensemble_seed());

    let mut frames = Vec::with_capacity(draws);
    let mut streams = Vec::with_capacity(draws);
    let mut total_redraws = 0usize;
    let mut next_stream = 0u64;
    while frames.len() < draws {
        if total_redraws > 8 * draws + 64 {
            return Err(srom::Error::DegenerateResample(format!(
                "{total_redraws} degenerate frames before {draws} draws completed"
            ))
            .into());
        }
        match sampler.sample_reduced(next_stream) {
            Ok(reduced) => {
                frames.push(lift_to_ambient(&model, &reduced)?);
                streams.push(next_stream);
            }
            Err(srom::Error::DegenerateResample(_)) => total_redraws += 1,
            Err(e) => return Err(e.into()),
        }
        next_stream += 1;
    }

    let dir = args.common.out_dir.join("subspace");
    ensure_dir(&dir)?;
    write_json(&dir.join("model.json"), &model.summary())?;
    write_json(
        &dir.join("manifest.json"),
        &SubspaceManifest {
            benchmark: "parametric-linear-static".to_string(),
            method: kind.label().to_string(),
            seed: config.seed,
            concentration: args.concentration,
            draws,
            total_redraws,
            streams,
        },
    )?;

    let n = assembly.system.dim();
    let k = config.problem.subspace_dim;
    let mut header = Vec::with_capacity(draws * k);
    for d in 0..draws {
        for j in 0..k {
            header.push(format!("draw{d}_basis{j}"));
        }
    }
    let stacked = DMatrix::from_fn(n, draws * k, |i, c| frames[c / k].matrix()[(i, c % k)]);
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut buf = Vec::new();
    srom::io::write_csv_matrix(&mut buf, &stacked, &header_refs)?;
    fs::write(dir.join("frames.csv"), buf)?;

    println!(
        "{} frames ({} sampler, resample size {}) written to {}",
        draws,
        kind.label(),
        args.concentration,
        dir.display()
    );
    Ok(())
}
