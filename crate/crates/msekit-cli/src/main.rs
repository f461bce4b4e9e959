use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use msekit::bias::{
    beta_bias_summary, bias_curve, empirical_bias_check, heterogeneity_cell_probs, reference_estimator,
    HeterogeneityModel,
};
use msekit::data::{parse_dataset, summarize_dataset, CellProbabilities, Dataset};
use msekit::dga::{enumerate_decomposable_graphs, load_graph_cache, DgaEstimator, DgaPrior};
use msekit::diagnostics::{
    consistency_csv, consistency_metrics, default_checkpoints, estimate_trajectory, run_internal_consistency,
    sensitivity_sweep, OutlierPolicy, SweepBase, SweepKind, DEFAULT_CHECKPOINTS, DEFAULT_MIN_OBS,
    TRAJECTORY_HEADER,
};
use msekit::figure::{render_figure, FigureKind, FigureOptions};
use msekit::lcmcr::{LcmcrConfig, LcmcrEstimator};
use msekit::loglinear::{IndependenceEstimator, SelectionTest, SparseMseEstimator};
use msekit::{catalog, PopulationEstimator};

#[derive(Parser)]
#[command(name = "msekit", version, about = "Multiple systems estimation of hidden population sizes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write the result here instead of standard output; a run record is
    /// written next to it as `<PATH>.run.json`.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Worker threads [default: available parallelism].
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EstimatorKind {
    Independence,
    Sparsemse,
    Dga,
    Lcmcr,
}

impl EstimatorKind {
    const ALL: [EstimatorKind; 4] =
        [EstimatorKind::Independence, EstimatorKind::Sparsemse, EstimatorKind::Dga, EstimatorKind::Lcmcr];
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TestKind {
    Lrt,
    Wald,
}

#[derive(Subcommand)]
enum Command {
    /// List the embedded datasets with their summaries.
    Datasets,
    /// Estimate the population size of one dataset.
    Estimate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum)]
        estimator: EstimatorKind,
        #[command(flatten)]
        est: EstimatorArgs,
        #[arg(long)]
        seed: Option<u64>,
        /// LCMCR only: write the raw retained draws here as CSV.
        #[arg(long)]
        draws: Option<PathBuf>,
    },
    /// Internal-consistency analysis on every conditioned dataset.
    Consistency {
        /// Estimators to run [default: all four].
        #[arg(long, value_enum, value_delimiter = ',')]
        estimators: Vec<EstimatorKind>,
        #[command(flatten)]
        est: EstimatorArgs,
        /// Conditioned datasets with fewer observations are dropped.
        #[arg(long, default_value_t = DEFAULT_MIN_OBS)]
        min_obs: u64,
        /// Drop failed estimates per estimator instead of dropping whole rows.
        #[arg(long)]
        per_estimator: bool,
        /// Also write summary metrics to this CSV file.
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimates on growing random subsamples of a dataset.
    Trajectory {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum)]
        estimator: EstimatorKind,
        #[command(flatten)]
        est: EstimatorArgs,
        /// Number of evenly spaced checkpoints in [max(30, n/20), 2n]; n is always added.
        #[arg(long, default_value_t = DEFAULT_CHECKPOINTS)]
        checkpoints: usize,
        /// Number of series; series i uses seed + i.
        #[arg(long, default_value_t = 1)]
        runs: u64,
        /// SVG only: horizontal reference line for the ratio axis.
        #[arg(long)]
        truth: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Re-estimate over a grid of one tuning parameter.
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        /// sparsemse-threshold, dga-kappa or dga-beta.
        #[arg(long)]
        kind: String,
        /// Comma-separated values or `start:stop[:lin|:log]`.
        #[arg(long)]
        grid: String,
        /// Grid points for range grids.
        #[arg(long, default_value_t = 11)]
        points: usize,
        #[command(flatten)]
        est: EstimatorArgs,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Asymptotic bias under Beta heterogeneity.
    Bias {
        /// Bias against precision a+b at fixed p0 (needs --p0, --lists, --precision).
        #[arg(long)]
        curve: bool,
        /// Monte Carlo check of the limit (needs --a, --b, --lists, --n).
        #[arg(long)]
        check: bool,
        #[arg(long)]
        p0: Option<f64>,
        #[arg(long, value_delimiter = ',', default_value = "2")]
        lists: Vec<usize>,
        /// `start:stop[:lin|:log]`.
        #[arg(long)]
        precision: Option<String>,
        /// Grid points for the precision range.
        #[arg(long, default_value_t = 50)]
        points: usize,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        b: Option<f64>,
        /// Population sizes for --check.
        #[arg(long, value_delimiter = ',')]
        n: Vec<u64>,
        #[arg(long, default_value_t = 100)]
        replicates: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Enumerate decomposable graphs on a number of lists.
    Graphs {
        #[arg(long)]
        lists: usize,
        #[arg(long)]
        include_complete: bool,
        /// Verify or rebuild a graph cache file.
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Simulate a count table from a population of size N.
    Simulate {
        #[arg(long)]
        n: u64,
        /// Independent lists with these inclusion probabilities.
        #[arg(long, value_delimiter = ',')]
        inclusion: Vec<f64>,
        /// Beta heterogeneity `a,b` (with --lists).
        #[arg(long, value_delimiter = ',')]
        beta: Vec<f64>,
        #[arg(long)]
        lists: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Catalog dataset name.
    #[arg(long, required_unless_present = "input")]
    data: Option<String>,
    /// Pattern-count CSV file.
    #[arg(long, conflicts_with = "data")]
    input: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct EstimatorArgs {
    /// SparseMSE p-value threshold.
    #[arg(long, default_value_t = msekit::loglinear::DEFAULT_THRESHOLD)]
    threshold: f64,
    /// SparseMSE term test.
    #[arg(long, value_enum, default_value_t = TestKind::Lrt)]
    test: TestKind,
    /// Bootstrap replicates for independence and SparseMSE.
    #[arg(long, default_value_t = msekit::loglinear::DEFAULT_REPLICATES)]
    replicates: usize,
    /// Interval level.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// dga prior inclusion probability.
    #[arg(long, default_value_t = 0.5)]
    kappa: f64,
    /// dga edge prior probability.
    #[arg(long, default_value_t = 0.5)]
    edge_beta: f64,
    /// dga: also average over the complete graph.
    #[arg(long)]
    include_complete: bool,
    /// dga grid bound [default: 100 * n_obs].
    #[arg(long)]
    nmax: Option<u64>,
    /// LCMCR chains [default: 200; 20 in consistency and trajectory without --full-budget].
    #[arg(long)]
    chains: Option<usize>,
    /// LCMCR iterations per chain [default: 100000; 10000 in consistency and trajectory without --full-budget].
    #[arg(long)]
    iters: Option<usize>,
    /// LCMCR retained draws per chain.
    #[arg(long, default_value_t = 100)]
    thin: usize,
    /// LCMCR class cap.
    #[arg(long, default_value_t = 10)]
    kmax: usize,
    /// Run LCMCR at full budget inside harness commands.
    #[arg(long)]
    full_budget: bool,
}

impl EstimatorArgs {
    fn build(&self, kind: EstimatorKind, harness: bool) -> Box<dyn PopulationEstimator> {
        match kind {
            EstimatorKind::Independence => {
                Box::new(IndependenceEstimator { replicates: self.replicates, level: self.level })
            }
            EstimatorKind::Sparsemse => Box::new(SparseMseEstimator {
                threshold: self.threshold,
                replicates: self.replicates,
                level: self.level,
                test: match self.test {
                    TestKind::Lrt => SelectionTest::LikelihoodRatio,
                    TestKind::Wald => SelectionTest::Wald,
                },
            }),
            EstimatorKind::Dga => Box::new(DgaEstimator {
                prior: DgaPrior {
                    kappa: self.kappa,
                    edge_beta: self.edge_beta,
                    include_complete: self.include_complete,
                    n_max: self.nmax,
                },
                level: self.level,
            }),
            EstimatorKind::Lcmcr => {
                let reduced = harness && !self.full_budget;
                let defaults = LcmcrConfig::default();
                let config = LcmcrConfig {
                    k_max: self.kmax,
                    chains: self.chains.unwrap_or(if reduced { 20 } else { defaults.chains }),
                    iterations: self.iters.unwrap_or(if reduced { 10_000 } else { defaults.iterations }),
                    thin_to: self.thin,
                    ..defaults
                };
                Box::new(LcmcrEstimator { config, level: self.level })
            }
        }
    }

    fn sweep_base(&self) -> SweepBase {
        SweepBase {
            sparsemse: SparseMseEstimator {
                threshold: self.threshold,
                replicates: self.replicates,
                level: self.level,
                test: match self.test {
                    TestKind::Lrt => SelectionTest::LikelihoodRatio,
                    TestKind::Wald => SelectionTest::Wald,
                },
            },
            dga: DgaEstimator {
                prior: DgaPrior {
                    kappa: self.kappa,
                    edge_beta: self.edge_beta,
                    include_complete: self.include_complete,
                    n_max: self.nmax,
                },
                level: self.level,
            },
        }
    }
}

type Failure = Box<dyn std::error::Error>;

fn fail(msg: impl Into<String>) -> Failure {
    msg.into().into()
}

/// Fixed seed, or a fresh one that is printed so the run can be replayed.
fn resolve_seed(seed: Option<u64>) -> u64 {
    let seed = seed.unwrap_or_else(rand::random);
    eprintln!("seed: {seed}");
    seed
}

fn load_data(args: &DataArgs) -> Result<Dataset, Failure> {
    match (&args.data, &args.input) {
        (_, Some(path)) => {
            let file = fs::File::open(path).map_err(|e| fail(format!("{}: {e}", path.display())))?;
            let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("input");
            Ok(parse_dataset(BufReader::new(file), name)?)
        }
        (Some(name), None) => Ok(catalog::load(name)?),
        (None, None) => Err(fail("either --data or --input is required")),
    }
}

/// Parse `a,b,c` or `start:stop[:lin|:log]` with `points` values.
fn parse_grid(text: &str, points: usize) -> Result<Vec<f64>, Failure> {
    if !text.contains(':') {
        return text
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| fail(format!("bad grid value `{v}`"))))
            .collect();
    }
    let parts: Vec<&str> = text.split(':').collect();
    let num = |s: &str| s.parse::<f64>().map_err(|_| fail(format!("bad grid bound `{s}`")));
    let (start, stop) = match parts.as_slice() {
        [a, b] | [a, b, _] => (num(a)?, num(b)?),
        _ => return Err(fail(format!("bad grid `{text}`"))),
    };
    let log = match parts.get(2) {
        None | Some(&"lin") => false,
        Some(&"log") => true,
        Some(other) => return Err(fail(format!("unknown grid scale `{other}`"))),
    };
    if points < 2 {
        return Ok(vec![start]);
    }
    if log && !(start > 0.0 && stop > 0.0) {
        return Err(fail("log grids need positive bounds"));
    }
    Ok((0..points)
        .map(|i| {
            let f = i as f64 / (points - 1) as f64;
            if i + 1 == points {
                stop
            } else if log {
                (start.ln() + f * (stop.ln() - start.ln())).exp()
            } else {
                start + f * (stop - start)
            }
        })
        .collect())
}

#[derive(Serialize)]
struct RunRecord {
    command_line: Vec<String>,
    fingerprint: String,
    seed: Option<u64>,
    wall_time_seconds: f64,
    version: String,
    outputs: Vec<String>,
}

struct Output {
    body: String,
    fingerprint: String,
    seed: Option<u64>,
    extra_files: Vec<PathBuf>,
}

impl Output {
    fn new(body: String, config: &serde_json::Value, seed: Option<u64>) -> Output {
        Output { body, fingerprint: msekit::estimate::fingerprint("msekit-cli", config), seed, extra_files: Vec::new() }
    }
}

fn unsupported(format: Format, command: &str) -> Failure {
    let name = match format {
        Format::Csv => "csv",
        Format::Json => "json",
        Format::Svg => "svg",
    };
    fail(format!("{command} does not support --format {name}"))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn write_extra(path: &Path, text: &str, out: &mut Output) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| fail(format!("{}: {e}", path.display())))?;
    out.extra_files.push(path.to_path_buf());
    Ok(())
}

fn run(cli: Cli) -> Result<Output, Failure> {
    let format = cli.common.format;
    match cli.command {
        Command::Datasets => {
            let all = catalog::load_all()?;
            let rows: Vec<serde_json::Value> = all
                .iter()
                .map(|d| {
                    let s = summarize_dataset(d);
                    json!({
                        "name": d.name,
                        "lists": d.table.lists(),
                        "n_obs": s.n_obs,
                        "overlap": s.overlap,
                        "overlap_fraction": s.overlap_fraction(),
                        "timeframe": d.timeframe,
                    })
                })
                .collect();
            let body = match format {
                Format::Json => to_json(&rows),
                Format::Csv => {
                    let mut out = String::from("name,lists,n_obs,overlap,timeframe\n");
                    for (d, r) in all.iter().zip(&rows) {
                        out.push_str(&format!("{},{},{},{},{}\n", d.name, d.table.lists(), r["n_obs"], r["overlap"], d.timeframe));
                    }
                    out
                }
                Format::Svg => return Err(unsupported(format, "datasets")),
            };
            Ok(Output::new(body, &json!({"command": "datasets"}), None))
        }
        Command::Estimate { data, estimator, est, seed, draws } => {
            let d = load_data(&data)?;
            let seed = resolve_seed(seed);
            let e = est.build(estimator, false);
            let (estimate, samples) = if estimator == EstimatorKind::Lcmcr {
                let lcmcr = LcmcrEstimator {
                    config: LcmcrConfig {
                        k_max: est.kmax,
                        chains: est.chains.unwrap_or(LcmcrConfig::default().chains),
                        iterations: est.iters.unwrap_or(LcmcrConfig::default().iterations),
                        thin_to: est.thin,
                        ..LcmcrConfig::default()
                    },
                    level: est.level,
                };
                let (e, s) = lcmcr.run(&d.table, seed)?;
                (e, Some(s))
            } else {
                (e.estimate(&d.table, seed)?, None)
            };
            let estimate = estimate.with_dataset(d.name.clone());
            for w in &estimate.warnings {
                eprintln!("warning: {w}");
            }
            let body = match format {
                Format::Json => {
                    let mut s = estimate.to_json();
                    s.push('\n');
                    s
                }
                Format::Csv => format!(
                    "dataset,estimator,point,lower,upper,level,seed,fingerprint\n{},{},{},{},{},{},{},{}\n",
                    d.name, estimate.estimator, estimate.point, estimate.lower, estimate.upper, estimate.level,
                    estimate.seed, estimate.fingerprint
                ),
                Format::Svg => return Err(unsupported(format, "estimate")),
            };
            let mut out = Output::new(body, &json!({"estimator": e.name(), "config": e.config(), "data": d.name}), Some(seed));
            out.fingerprint = estimate.fingerprint.clone();
            if let Some(path) = draws {
                let samples = samples.ok_or_else(|| fail("--draws is only available for lcmcr"))?;
                write_extra(&path, &samples.to_csv(), &mut out)?;
            }
            Ok(out)
        }
        Command::Consistency { estimators, est, min_obs, per_estimator, metrics, seed } => {
            let seed = resolve_seed(seed);
            let kinds = if estimators.is_empty() { EstimatorKind::ALL.to_vec() } else { estimators };
            let built: Vec<Box<dyn PopulationEstimator>> = kinds.iter().map(|&k| est.build(k, true)).collect();
            let refs: Vec<&dyn PopulationEstimator> = built.iter().map(|b| b.as_ref()).collect();
            let all = catalog::load_all()?;
            let results = run_internal_consistency(&all, &refs, min_obs, seed)?;
            let policy = if per_estimator { OutlierPolicy::PerEstimator } else { OutlierPolicy::RowWise };
            let summary = consistency_metrics(&results, policy)?;
            for m in &summary {
                eprintln!(
                    "{}: mean {:.3}, rmse {:.3}, median {:.3}, coverage {:.2} ({} rows), coverage over all rows {:.2}",
                    m.estimator, m.mean, m.rmse, m.median, m.coverage, m.rows, m.coverage_all_rows
                );
            }
            let csv = consistency_csv(&results);
            let body = match format {
                Format::Csv => csv,
                Format::Json => to_json(&json!({"results": results, "metrics": summary})),
                Format::Svg => render_figure(&csv, FigureKind::ConsistencyDots, &FigureOptions::default())?,
            };
            let config: Vec<serde_json::Value> = built.iter().map(|b| json!({"name": b.name(), "config": b.config()})).collect();
            let mut out = Output::new(body, &json!({"command": "consistency", "estimators": config, "min_obs": min_obs}), Some(seed));
            if let Some(path) = metrics {
                let mut text = String::from("estimator,rows,mean,rmse,median,coverage,coverage_all_rows\n");
                for m in &summary {
                    text.push_str(&format!(
                        "{},{},{},{},{},{},{}\n",
                        m.estimator, m.rows, m.mean, m.rmse, m.median, m.coverage, m.coverage_all_rows
                    ));
                }
                write_extra(&path, &text, &mut out)?;
            }
            Ok(out)
        }
        Command::Trajectory { data, estimator, est, checkpoints, runs, truth, seed } => {
            let d = load_data(&data)?;
            let seed = resolve_seed(seed);
            let e = est.build(estimator, true);
            let n = d.table.n_obs() as usize;
            let grid = default_checkpoints(n, checkpoints);
            let mut series = Vec::new();
            for i in 0..runs.max(1) {
                series.push(estimate_trajectory(&d, e.as_ref(), &grid, seed.wrapping_add(i))?);
            }
            let mut csv = format!("{TRAJECTORY_HEADER}\n");
            for s in &series {
                s.write_rows(&mut csv);
            }
            let body = match format {
                Format::Csv => csv,
                Format::Json => to_json(&series),
                Format::Svg => render_figure(
                    &csv,
                    FigureKind::Trajectory,
                    &FigureOptions { title: Some(format!("{} {}", d.name, e.name())), truth, markers: vec![n as f64] },
                )?,
            };
            Ok(Output::new(
                body,
                &json!({"command": "trajectory", "estimator": e.name(), "config": e.config(), "data": d.name, "checkpoints": grid, "runs": runs}),
                Some(seed),
            ))
        }
        Command::Sweep { data, kind, grid, points, est, seed } => {
            let d = load_data(&data)?;
            let seed = resolve_seed(seed);
            let kind: SweepKind = kind.parse()?;
            let values = parse_grid(&grid, points)?;
            let table = sensitivity_sweep(&d.table, kind, &values, &est.sweep_base(), seed)?;
            let csv = table.to_csv();
            let body = match format {
                Format::Csv => csv,
                Format::Json => to_json(&table),
                Format::Svg => render_figure(
                    &csv,
                    FigureKind::SweepBand,
                    &FigureOptions { title: Some(format!("{} {kind}", d.name)), ..FigureOptions::default() },
                )?,
            };
            let base = est.sweep_base();
            Ok(Output::new(
                body,
                &json!({"command": "sweep", "kind": kind.as_str(), "grid": values, "data": d.name,
                        "sparsemse": base.sparsemse.config(), "dga": base.dga.config()}),
                Some(seed),
            ))
        }
        Command::Bias { curve, check, p0, lists, precision, points, a, b, n, replicates, seed } => {
            if curve {
                let p0 = p0.ok_or_else(|| fail("--curve needs --p0"))?;
                let range = precision.ok_or_else(|| fail("--curve needs --precision"))?;
                let grid = parse_grid(&range, points)?;
                let c = bias_curve(p0, &lists, &grid)?;
                for s in &c.skipped {
                    eprintln!("skipped: {s}");
                }
                let csv = c.to_csv();
                let body = match format {
                    Format::Csv => csv,
                    Format::Json => to_json(&c),
                    Format::Svg => render_figure(&csv, FigureKind::BiasCurve, &FigureOptions::default())?,
                };
                return Ok(Output::new(body, &json!({"command": "bias-curve", "p0": p0, "lists": lists, "precision": grid}), None));
            }
            let (a, b) = match (a, b) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(fail("bias needs --curve, or --a and --b")),
            };
            if check {
                let l = *lists.first().ok_or_else(|| fail("--lists is required"))?;
                if n.is_empty() {
                    return Err(fail("--check needs --n"));
                }
                let seed = resolve_seed(seed);
                let p = heterogeneity_cell_probs(&HeterogeneityModel::Beta { a, b, lists: l })?;
                let result = empirical_bias_check(&p, reference_estimator, &n, replicates, seed)?;
                let body = match format {
                    Format::Csv => result.to_csv(),
                    Format::Json => to_json(&result),
                    Format::Svg => return Err(unsupported(format, "bias --check")),
                };
                return Ok(Output::new(
                    body,
                    &json!({"command": "bias-check", "a": a, "b": b, "lists": l, "n": n, "replicates": replicates}),
                    Some(seed),
                ));
            }
            let mut rows = Vec::new();
            for &l in &lists {
                rows.push((l, beta_bias_summary(a, b, l)?));
            }
            let body = match format {
                Format::Csv => {
                    let mut out = String::from("a,b,L,gamma,p0,relative_bias\n");
                    for (l, r) in &rows {
                        out.push_str(&format!("{a},{b},{l},{},{},{}\n", r.gamma, r.p0, r.relative_bias));
                    }
                    out
                }
                Format::Json => to_json(&rows.iter().map(|(l, r)| json!({"a": a, "b": b, "L": l, "report": r})).collect::<Vec<_>>()),
                Format::Svg => return Err(unsupported(format, "bias")),
            };
            Ok(Output::new(body, &json!({"command": "bias", "a": a, "b": b, "lists": lists}), None))
        }
        Command::Graphs { lists, include_complete, cache } => {
            let graphs = match &cache {
                Some(path) => {
                    let (graphs, status) = load_graph_cache(path, lists, include_complete)?;
                    eprintln!("cache {}: {status:?}", path.display());
                    graphs
                }
                None => enumerate_decomposable_graphs(lists, include_complete)?,
            };
            let names = msekit::data::default_list_names(lists);
            let body = match format {
                Format::Csv => {
                    let mut out = String::from("edges,edge_count,cliques\n");
                    for g in &graphs {
                        out.push_str(&format!("{},{},{}\n", g.edges(), g.edge_count(), g.describe(&names)));
                    }
                    out
                }
                Format::Json => to_json(&graphs),
                Format::Svg => return Err(unsupported(format, "graphs")),
            };
            eprintln!("{} decomposable graphs", graphs.len());
            Ok(Output::new(body, &json!({"command": "graphs", "lists": lists, "include_complete": include_complete}), None))
        }
        Command::Simulate { n, inclusion, beta, lists, seed } => {
            let p: CellProbabilities = match (inclusion.is_empty(), beta.as_slice()) {
                (false, []) => CellProbabilities::independent(&inclusion)?,
                (true, &[a, b]) => {
                    let l = lists.ok_or_else(|| fail("--beta needs --lists"))?;
                    heterogeneity_cell_probs(&HeterogeneityModel::Beta { a, b, lists: l })?
                }
                _ => return Err(fail("give either --inclusion p1,p2,... or --beta a,b with --lists")),
            };
            let seed = resolve_seed(seed);
            let t = p.simulate_counts(n, seed)?;
            let body = match format {
                Format::Csv => t.to_csv(),
                Format::Json => to_json(&t),
                Format::Svg => return Err(unsupported(format, "simulate")),
            };
            Ok(Output::new(body, &json!({"command": "simulate", "n": n, "probs": p.probs()}), Some(seed)))
        }
    }
}

fn main() -> ExitCode {
    let command_line: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    if let Some(jobs) = cli.common.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let output_path = cli.common.output.clone();
    let started = Instant::now();
    let out = match run(cli) {
        Ok(out) => out,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    match output_path {
        None => {
            print!("{}", out.body);
            ExitCode::SUCCESS
        }
        Some(path) => {
            if let Err(e) = fs::write(&path, &out.body) {
                eprintln!("error: {}: {e}", path.display());
                return ExitCode::FAILURE;
            }
            let mut outputs = vec![path.display().to_string()];
            outputs.extend(out.extra_files.iter().map(|p| p.display().to_string()));
            let record = RunRecord {
                command_line,
                fingerprint: out.fingerprint,
                seed: out.seed,
                wall_time_seconds: started.elapsed().as_secs_f64(),
                version: msekit::VERSION.to_string(),
                outputs,
            };
            let record_path = PathBuf::from(format!("{}.run.json", path.display()));
            if let Err(e) = fs::write(&record_path, to_json(&record)) {
                eprintln!("error: {}: {e}", record_path.display());
                return ExitCode::FAILURE;
            }
            ExitCode::SUCCESS
        }
    }
}
