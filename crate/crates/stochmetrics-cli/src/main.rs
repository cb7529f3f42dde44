//! Command-line pipeline for stochastic shape metrics:
//! `toygen → matrix → repair → embed → knn`, plus single-pair `dist`.
//!
//! Exit codes: 0 on success, 2 on input errors (unreadable or inconsistent
//! inputs, bad flag combinations), 3 on numerical failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use stochmetrics::align::{AlignOptions, AlignmentGroup};
use stochmetrics::align_energy::energy_shape_distance;
use stochmetrics::align_wasserstein::align_w2;
use stochmetrics::analysis::{
    distance_matrix, knn_predict, mds_with_distortion, metric_repair, DistanceMatrix, KnnTask,
};
use stochmetrics::dataio::{
    generate_toy, read_bundle_auto, read_distance_csv, read_targets_csv, render_distance_csv,
    render_embedding_csv, write_bundle, write_distance_csv, write_embedding_csv,
    write_objective_trace_csv, write_targets_csv, ToySpec,
};
use stochmetrics::ground::{EnergyNormalization, GroundMetricSpec};
use stochmetrics::moments::{
    center_grand_mean, pca_reduce, sample_gaussian_rep, shrinkage_covariance, Condition,
    GaussianCondition, ShrinkageSelect, ShrinkageTarget, StochasticRep,
};
use stochmetrics::Error;

#[derive(Parser)]
#[command(name = "stochmetrics", version, about = "Shape distances between stochastic neural representations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Distance between two representation bundles, with alignment diagnostics.
    Dist(DistArgs),
    /// Pairwise distance matrix over a collection of bundles.
    Matrix(MatrixArgs),
    /// Project a distance matrix onto the metric cone (triangle repair).
    Repair(RepairArgs),
    /// Classical MDS embedding with distortion diagnostics.
    Embed(EmbedArgs),
    /// k-nearest-neighbor prediction over a distance matrix.
    Knn(KnnArgs),
    /// Generate the synthetic toy corpus.
    Toygen(ToygenArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MetricKind {
    W2,
    Energy,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GroupKind {
    Orth,
    Perm,
    None,
}

impl From<GroupKind> for AlignmentGroup {
    fn from(g: GroupKind) -> Self {
        match g {
            GroupKind::Orth => AlignmentGroup::Orthogonal,
            GroupKind::Perm => AlignmentGroup::Permutation,
            GroupKind::None => AlignmentGroup::Identity,
        }
    }
}

#[derive(Args)]
struct MetricArgs {
    /// Ground metric family.
    #[arg(long, value_enum, default_value = "w2")]
    metric: MetricKind,
    /// Interpolation weight in [0, 2] (Wasserstein metric only).
    #[arg(long)]
    alpha: Option<f64>,
    /// Energy exponent in (0, 2] (energy metric only).
    #[arg(long)]
    q: Option<f64>,
    /// Nuisance group to align over.
    #[arg(long, value_enum, default_value = "orth")]
    group: GroupKind,
}

impl MetricArgs {
    fn ground_metric(&self) -> Result<GroundMetricSpec, CliError> {
        let spec = match self.metric {
            MetricKind::W2 => {
                if self.q.is_some() {
                    return Err(CliError::input("--q is only valid with --metric energy"));
                }
                GroundMetricSpec::InterpolatedWasserstein {
                    alpha: self.alpha.unwrap_or(1.0),
                }
            }
            MetricKind::Energy => {
                if self.alpha.is_some() {
                    return Err(CliError::input("--alpha is only valid with --metric w2"));
                }
                GroundMetricSpec::Energy {
                    q: self.q.unwrap_or(1.0),
                }
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Args)]
struct AlignArgs {
    /// Maximum alignment sweeps.
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    /// Relative objective-decrease convergence threshold.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Restarts per alignment (identity, then a mean warm start, then random).
    #[arg(long, default_value_t = 4)]
    restarts: usize,
    /// RNG seed; every derived stream is deterministic in it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl AlignArgs {
    fn options(&self) -> AlignOptions {
        AlignOptions {
            max_iters: self.max_iters,
            rel_tol: self.tol,
            n_restarts: self.restarts,
            seed: self.seed,
            ..AlignOptions::default()
        }
    }
}

#[derive(Args)]
struct PrepArgs {
    /// Subtract the grand-mean response from every condition.
    #[arg(long)]
    center: bool,
    /// Project onto this many principal axes (applied after centering).
    #[arg(long, value_name = "N")]
    pca: Option<usize>,
    /// Covariance shrinkage: a gamma in [0,1] or `cv` (sample-form inputs,
    /// Wasserstein metric only).
    #[arg(long, value_name = "F|cv")]
    shrinkage: Option<String>,
    /// Apply PCA before grand-mean centering instead of after.
    #[arg(long)]
    pca_first: bool,
}

#[derive(Args)]
struct DistArgs {
    /// First representation bundle.
    bundle_a: PathBuf,
    /// Second representation bundle.
    bundle_b: PathBuf,
    #[command(flatten)]
    metric: MetricArgs,
    #[command(flatten)]
    align: AlignArgs,
    #[command(flatten)]
    prep: PrepArgs,
    /// Write the JSON record here (objective trace lands beside it).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MatrixArgs {
    /// Bundle directories, or directories of bundles.
    inputs: Vec<PathBuf>,
    #[command(flatten)]
    metric: MetricArgs,
    #[command(flatten)]
    align: AlignArgs,
    #[command(flatten)]
    prep: PrepArgs,
    /// Worker threads for the pairwise loop.
    #[arg(long, env = "STOCHMETRICS_WORKERS")]
    workers: Option<usize>,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RepairArgs {
    /// Distance-matrix CSV to repair.
    input: PathBuf,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EmbedArgs {
    /// Distance-matrix CSV to embed.
    input: PathBuf,
    /// Embedding dimension.
    #[arg(short = 'm', long = "dim", default_value_t = 2)]
    dim: usize,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct KnnArgs {
    /// Distance-matrix CSV.
    input: PathBuf,
    /// Targets CSV (`id,target` with header).
    #[arg(long)]
    targets: PathBuf,
    /// Prediction task.
    #[arg(long, value_enum)]
    task: TaskKind,
    /// Cross-validation folds for choosing k.
    #[arg(long, default_value_t = 6)]
    folds: usize,
    /// Held-out fraction of networks.
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the JSON report here (stdout always gets a copy).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TaskKind {
    Classify,
    Regress,
}

#[derive(Args)]
struct ToygenArgs {
    /// Output directory for the corpus.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 11)]
    n_corr: usize,
    #[arg(long, default_value_t = 9)]
    n_scale: usize,
    /// Conditions per network.
    #[arg(long, default_value_t = 5)]
    conditions: usize,
    #[arg(long, default_value_t = -0.8)]
    corr_min: f64,
    #[arg(long, default_value_t = 0.8)]
    corr_max: f64,
    #[arg(long, default_value_t = 0.1)]
    scale_min: f64,
    #[arg(long, default_value_t = 1.0)]
    scale_max: f64,
    /// Spacing of condition means along the identity line.
    #[arg(long, default_value_t = 1.0)]
    spacing: f64,
    /// Hide each network behind a random rotation.
    #[arg(long)]
    rotate: bool,
    /// Emit sample-form bundles with this many trials per condition
    /// (moment form when omitted).
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Error plus the exit code it maps to.
struct CliError {
    message: String,
    code: u8,
}

impl CliError {
    fn input(msg: impl Into<String>) -> Self {
        CliError {
            message: msg.into(),
            code: 2,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        fn code(e: &Error) -> u8 {
            match e {
                Error::IndefiniteMatrix { .. }
                | Error::NotSymmetric(_)
                | Error::NotOrthogonal(_)
                | Error::NonFiniteValue { .. }
                | Error::NotConverged(_) => 3,
                Error::PairFailed { source, .. } => code(source),
                _ => 2,
            }
        }
        let mut message = e.to_string();
        let mut src: &dyn std::error::Error = &e;
        while let Some(next) = src.source() {
            message.push_str(&format!(": {next}"));
            src = next;
        }
        CliError {
            message,
            code: code(&e),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Dist(args) => cmd_dist(args),
        Command::Matrix(args) => cmd_matrix(args),
        Command::Repair(args) => cmd_repair(args),
        Command::Embed(args) => cmd_embed(args),
        Command::Knn(args) => cmd_knn(args),
        Command::Toygen(args) => cmd_toygen(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

/// Applies `--shrinkage`, then `--center` and `--pca` (centering first
/// unless `--pca-first`).
fn preprocess(
    rep: StochasticRep,
    prep: &PrepArgs,
    seed: u64,
    metric: &GroundMetricSpec,
) -> Result<StochasticRep, CliError> {
    let mut rep = rep;
    if let Some(spec) = &prep.shrinkage {
        if matches!(metric, GroundMetricSpec::Energy { .. }) {
            return Err(CliError::input(
                "--shrinkage requires moment-form distances (--metric w2)",
            ));
        }
        let select = if spec == "cv" {
            ShrinkageSelect::CrossValidated { splits: 5, seed }
        } else {
            let gamma: f64 = spec
                .parse()
                .map_err(|_| CliError::input(format!("bad --shrinkage value {spec:?}")))?;
            ShrinkageSelect::Fixed(gamma)
        };
        let conds = rep
            .conditions()
            .iter()
            .enumerate()
            .map(|(m, c)| match c {
                Condition::Samples(s) => {
                    let (cov, _) =
                        shrinkage_covariance(s, select, ShrinkageTarget::TraceMatchedIdentity)?;
                    Ok(Condition::Gaussian(GaussianCondition::new(s.mean(), cov)?))
                }
                Condition::Gaussian(_) => Err(Error::NoSamples(m)),
            })
            .collect::<Result<Vec<_>, Error>>()?;
        rep = StochasticRep::new(rep.id.clone(), conds)?;
    }
    if prep.pca_first {
        if let Some(dims) = prep.pca {
            rep = pca_reduce(&rep, dims)?.0;
        }
        if prep.center {
            rep = center_grand_mean(&rep);
        }
    } else {
        if prep.center {
            rep = center_grand_mean(&rep);
        }
        if let Some(dims) = prep.pca {
            rep = pca_reduce(&rep, dims)?.0;
        }
    }
    Ok(rep)
}

fn cmd_dist(args: DistArgs) -> Result<(), CliError> {
    let metric = args.metric.ground_metric()?;
    let opts = args.align.options();
    let rep_a = preprocess(read_bundle_auto(&args.bundle_a)?, &args.prep, opts.seed, &metric)?;
    let rep_b = preprocess(read_bundle_auto(&args.bundle_b)?, &args.prep, opts.seed, &metric)?;
    let group: AlignmentGroup = args.metric.group.into();

    let (distance, squared, iterations, converged, trace) = match metric {
        GroundMetricSpec::InterpolatedWasserstein { alpha } => {
            let res = align_w2(&rep_a, &rep_b, alpha, group, &opts)?;
            (
                res.distance,
                res.distance * res.distance,
                res.iterations,
                res.converged,
                res.objective_trace,
            )
        }
        GroundMetricSpec::Energy { q } => {
            let res =
                energy_shape_distance(&rep_a, &rep_b, q, group, EnergyNormalization::UStat, &opts)?;
            (
                res.value,
                res.squared,
                res.iterations,
                res.converged,
                res.objective_trace,
            )
        }
    };

    let trace_path = match &args.out {
        Some(out) => {
            let p = out.with_extension("trace.csv");
            write_objective_trace_csv(&trace, &p)?;
            Some(p.display().to_string())
        }
        None => None,
    };
    let record = serde_json::json!({
        "distance": distance,
        "squared": squared,
        "metric": match metric {
            GroundMetricSpec::InterpolatedWasserstein { .. } => "w2",
            GroundMetricSpec::Energy { .. } => "energy",
        },
        "alpha": match metric {
            GroundMetricSpec::InterpolatedWasserstein { alpha } => Some(alpha),
            _ => None,
        },
        "q": match metric {
            GroundMetricSpec::Energy { q } => Some(q),
            _ => None,
        },
        "group": match group {
            AlignmentGroup::Orthogonal => "orth",
            AlignmentGroup::Permutation => "perm",
            AlignmentGroup::Identity => "none",
        },
        "iterations": iterations,
        "converged": converged,
        "negative_squared": squared < 0.0,
        "trace_path": trace_path,
    });
    let text = serde_json::to_string_pretty(&record).expect("record serializes");
    println!("{text}");
    if let Some(out) = &args.out {
        std::fs::write(out, text.as_bytes())
            .map_err(|e| CliError::from(Error::io(out.clone(), e)))?;
    }
    Ok(())
}

/// A path is a bundle if it holds a manifest or CSV blocks; otherwise its
/// immediate subdirectories (sorted by name) are scanned for bundles.
fn collect_bundles(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    fn is_bundle(p: &Path) -> bool {
        p.join("manifest.json").exists() || p.join("cond_0.csv").exists()
    }
    let mut found = Vec::new();
    for input in inputs {
        if is_bundle(input) {
            found.push(input.clone());
            continue;
        }
        let mut subs: Vec<PathBuf> = std::fs::read_dir(input)
            .map_err(|e| CliError::from(Error::io(input.clone(), e)))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.is_dir() && is_bundle(p))
            .collect();
        subs.sort();
        if subs.is_empty() {
            return Err(CliError::input(format!(
                "no bundles found under {}",
                input.display()
            )));
        }
        found.extend(subs);
    }
    if found.is_empty() {
        return Err(CliError::input("no input bundles given"));
    }
    Ok(found)
}

fn cmd_matrix(args: MatrixArgs) -> Result<(), CliError> {
    let metric = args.metric.ground_metric()?;
    let opts = args.align.options();
    let reps = collect_bundles(&args.inputs)?
        .iter()
        .map(|p| preprocess(read_bundle_auto(p)?, &args.prep, opts.seed, &metric))
        .collect::<Result<Vec<_>, CliError>>()?;
    let d = distance_matrix(&reps, &metric, args.metric.group.into(), &opts, args.workers)?;
    emit_matrix(&d, args.out.as_deref())
}

fn emit_matrix(d: &DistanceMatrix, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => {
            write_distance_csv(d, path)?;
            eprintln!(
                "wrote {} ({}x{}, max triangle violation {:.3e}, {} negative entries)",
                path.display(),
                d.k(),
                d.k(),
                d.violation_report.max_triangle_violation,
                d.violation_report.negative_entries
            );
        }
        None => print!("{}", render_distance_csv(d)),
    }
    Ok(())
}

fn cmd_repair(args: RepairArgs) -> Result<(), CliError> {
    let d = read_distance_csv(&args.input)?;
    let repaired = metric_repair(&d)?;
    emit_matrix(&repaired, args.out.as_deref())
}

fn cmd_embed(args: EmbedArgs) -> Result<(), CliError> {
    let d = read_distance_csv(&args.input)?;
    let res = mds_with_distortion(&d, args.dim)?;
    eprintln!(
        "distortion percentiles p10 {:.4} p25 {:.4} median {:.4} p75 {:.4} p90 {:.4} ({} pairs excluded, {} eigenvalues clamped)",
        res.percentiles.p10,
        res.percentiles.p25,
        res.percentiles.median,
        res.percentiles.p75,
        res.percentiles.p90,
        res.excluded_pairs,
        res.embedding.clamped
    );
    match &args.out {
        Some(path) => write_embedding_csv(&d.ids, &res.embedding.coords, path)?,
        None => print!("{}", render_embedding_csv(&d.ids, &res.embedding.coords)?),
    }
    Ok(())
}

fn cmd_knn(args: KnnArgs) -> Result<(), CliError> {
    let d = read_distance_csv(&args.input)?;
    let rows = read_targets_csv(&args.targets)?;
    let mut by_id: std::collections::HashMap<&str, &str> = std::collections::HashMap::new();
    for (id, v) in &rows {
        by_id.insert(id.as_str(), v.as_str());
    }
    let ordered: Vec<&str> = d
        .ids
        .iter()
        .map(|id| {
            by_id
                .get(id.as_str())
                .copied()
                .ok_or_else(|| CliError::input(format!("no target for network {id:?}")))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let task = match args.task {
        TaskKind::Classify => KnnTask::Classify(ordered.iter().map(|s| s.to_string()).collect()),
        TaskKind::Regress => KnnTask::Regress(
            ordered
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|e| CliError::input(format!("bad regression target {s:?}: {e}")))
                })
                .collect::<Result<Vec<_>, CliError>>()?,
        ),
    };
    let report = knn_predict(&d, &task, args.folds, args.test_fraction, args.seed)?;
    let record = serde_json::json!({
        "chosen_k": report.chosen_k,
        "cv_scores": report.cv_scores,
        "held_out_score": report.held_out_score,
        "zero_variance_target": report.zero_variance_target,
        "test_ids": report.test_indices.iter().map(|&i| d.ids[i].clone()).collect::<Vec<_>>(),
    });
    let text = serde_json::to_string_pretty(&record).expect("report serializes");
    println!("{text}");
    if let Some(out) = &args.out {
        std::fs::write(out, text.as_bytes())
            .map_err(|e| CliError::from(Error::io(out.clone(), e)))?;
    }
    Ok(())
}

fn cmd_toygen(args: ToygenArgs) -> Result<(), CliError> {
    let spec = ToySpec {
        n_corr: args.n_corr,
        n_scale: args.n_scale,
        conditions: args.conditions,
        corr_range: (args.corr_min, args.corr_max),
        scale_range: (args.scale_min, args.scale_max),
        mean_spacing: args.spacing,
        rotate: args.rotate,
        seed: args.seed,
    };
    let reps = generate_toy(&spec)?;
    let params = spec.params();
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::from(Error::io(args.out.clone(), e)))?;
    for (i, rep) in reps.iter().enumerate() {
        let rep = match args.samples {
            Some(l) => sample_gaussian_rep(rep, l, spec.seed.wrapping_add(1 + i as u64))?,
            None => rep.clone(),
        };
        write_bundle(&rep, args.out.join(&rep.id))?;
    }
    let rows: Vec<(String, String)> = params
        .iter()
        .map(|p| {
            (
                p.id.clone(),
                format!(
                    "{:.16e};{:.16e};{};{}",
                    p.corr, p.scale, p.corr_index, p.scale_index
                ),
            )
        })
        .collect();
    // params.csv: id,corr,scale,corr_index,scale_index
    let expanded: Vec<(String, String)> = rows
        .iter()
        .map(|(id, packed)| (id.clone(), packed.replace(';', ",")))
        .collect();
    let path = args.out.join("params.csv");
    let mut text = String::from("id,corr,scale,corr_index,scale_index\n");
    for (id, rest) in &expanded {
        text.push_str(&format!("{id},{rest}\n"));
    }
    std::fs::write(&path, text).map_err(|e| CliError::from(Error::io(path.clone(), e)))?;
    // Separate single-target file for kNN regression on the correlation.
    let corr_targets: Vec<(String, String)> = params
        .iter()
        .map(|p| (p.id.clone(), format!("{:.16e}", p.corr)))
        .collect();
    write_targets_csv(&corr_targets, args.out.join("targets_corr.csv"))?;
    eprintln!(
        "wrote {} bundles under {} ({} form)",
        reps.len(),
        args.out.display(),
        if args.samples.is_some() { "sample" } else { "moment" }
    );
    Ok(())
}
