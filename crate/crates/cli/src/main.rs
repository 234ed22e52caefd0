//! `belkit` command-line front end.
//!
//! Exit codes: 0 success, 2 parameter error, 3 input format error,
//! 4 degenerate input.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use belkit::losses::{
    evaluate_loss, weight_map, DmaxScope, LossKind, LossParams, WeightMode, DEFAULT_BREAKAGE_ITERATIONS,
};
use belkit::metrics::{evaluate, EvalOptions, LengthWeighting, CSV_HEADER};
use belkit::nifti::{read_nifti, write_f32, write_mask, NiftiHeader, NiftiImage};
use belkit::phantom::{generate, TreeSpec};
use belkit::skeleton::{build_graph_with, skeletonize, thin, RootPlacement};
use belkit::softskel::breakage_map;
use belkit::volume::{lung_window_bounds, sliding_windows, PatchGrid};
use belkit::{BinaryMask, ErrorKind, ProbabilityVolume};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(
    name = "belkit",
    version,
    about = "Airway segmentation losses, skeletons and metrics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the per-voxel loss weight map of a ground-truth mask.
    Weights(WeightsArgs),
    /// Evaluate a loss on a prediction and print it as JSON.
    Loss(LossArgs),
    /// Compare a prediction against a ground-truth mask.
    Metrics(MetricsArgs),
    /// Thin a mask to a curve skeleton.
    Skeleton(SkeletonArgs),
    /// Write the soft skeleton deficit of a prediction.
    Breakage(BreakageArgs),
    /// Generate a synthetic airway tree with optional degradations.
    Phantom(PhantomArgs),
    /// Print the sliding-window origins tiling a volume.
    Patches(PatchesArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Boundary,
    Centerline,
    Uniform,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    Global,
    PerComponent,
}

#[derive(Clone, Copy, ValueEnum)]
enum LossArg {
    Dice,
    Tversky,
    Gul,
    Bel,
}

#[derive(Clone, Copy, Default, ValueEnum)]
enum RootArg {
    #[default]
    MaxZ,
    MinZ,
}

impl From<RootArg> for RootPlacement {
    fn from(r: RootArg) -> Self {
        match r {
            RootArg::MaxZ => RootPlacement::MaxZ,
            RootArg::MinZ => RootPlacement::MinZ,
        }
    }
}

/// Loss hyper-parameters. Precedence: flags, then `--params` file, then
/// `--preset`.
#[derive(Args)]
struct ParamArgs {
    /// Named preset such as `bel_0.6` or `gul_0.8_r0.5`.
    #[arg(long)]
    preset: Option<String>,
    /// JSON file with any subset of the loss parameter fields.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    mode: Option<ModeArg>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    dmax_scope: Option<ScopeArg>,
    /// Measure distances in millimetres using the header spacing.
    #[arg(long)]
    spacing_aware: bool,
}

#[derive(Args)]
struct WeightsArgs {
    #[arg(long)]
    gt: PathBuf,
    #[command(flatten)]
    params: ParamArgs,
    /// Prediction used to derive the breakage map.
    #[arg(long)]
    pred: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_BREAKAGE_ITERATIONS)]
    breakage_iters: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LossArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, value_enum)]
    loss: LossArg,
    /// Also write the gradient with respect to the prediction.
    #[arg(long)]
    grad: Option<PathBuf>,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, default_value_t = DEFAULT_BREAKAGE_ITERATIONS)]
    breakage_iters: usize,
    /// Leave the breakage term out of the BEL weights.
    #[arg(long)]
    no_breakage: bool,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Keep only the largest 26-connected component of the prediction.
    #[arg(long)]
    lcc: bool,
    /// Add the small-airway panel.
    #[arg(long)]
    small: bool,
    #[arg(long, default_value_t = belkit::metrics::DEFAULT_BRANCH_THRESHOLD)]
    branch_threshold: f64,
    #[arg(long, default_value_t = belkit::skeleton::DEFAULT_DROP_GENERATIONS)]
    drop_generations: usize,
    #[arg(long, value_enum, default_value_t)]
    root: RootArg,
    /// Weight the length rate by millimetres instead of voxel counts.
    #[arg(long)]
    mm: bool,
    /// Case name for CSV rows; defaults to the prediction file stem.
    #[arg(long)]
    case: Option<String>,
    /// Report file, `.json` or `.csv`. Printed as JSON when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SkeletonArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Branch graph as JSON.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Keep short spurs instead of pruning them.
    #[arg(long)]
    no_prune: bool,
    #[arg(long, value_enum, default_value_t)]
    root: RootArg,
}

#[derive(Args)]
struct BreakageArgs {
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BREAKAGE_ITERATIONS)]
    iters: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PhantomArgs {
    /// Tree spec JSON; missing fields take their defaults.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    depth: Option<usize>,
    /// Mask after all degradations.
    #[arg(long)]
    out: PathBuf,
    /// Undegraded mask.
    #[arg(long)]
    clean_out: Option<PathBuf>,
    /// Truth JSON: branch graph, radii, centerline length, degradations.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Erase a slab around a branch midpoint, `ID:GAP`. Repeatable.
    #[arg(long = "break")]
    breaks: Vec<String>,
    /// Add a false-positive ball, `X,Y,Z:R`. Repeatable.
    #[arg(long = "leak")]
    leaks: Vec<String>,
}

#[derive(Args)]
struct PatchesArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Patch edge length, or three comma-separated lengths.
    #[arg(long, default_value = "256")]
    size: String,
    #[arg(long, default_value_t = 0.25)]
    overlap: f64,
    /// Restrict windows to the bounding box of this lung mask.
    #[arg(long)]
    lung: Option<PathBuf>,
    /// Extend the lung box this many voxels towards +z.
    #[arg(long, default_value_t = 0)]
    extend_superior: usize,
    /// Print every window origin.
    #[arg(long)]
    list: bool,
}

#[derive(Debug)]
enum Failure {
    Core(belkit::Error),
    Parameter(String),
    Format(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Core(e) => match e.kind() {
                ErrorKind::Parameter => 2,
                ErrorKind::Format => 3,
                ErrorKind::Degenerate => 4,
            },
            Failure::Parameter(_) => 2,
            Failure::Format(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Parameter(m) => write!(f, "invalid parameter: {m}"),
            Failure::Format(m) => write!(f, "invalid input: {m}"),
        }
    }
}

impl From<belkit::Error> for Failure {
    fn from(e: belkit::Error) -> Self {
        Failure::Core(e)
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Weights(a) => run_weights(a),
        Command::Loss(a) => run_loss(a),
        Command::Metrics(a) => run_metrics(a),
        Command::Skeleton(a) => run_skeleton(a),
        Command::Breakage(a) => run_breakage(a),
        Command::Phantom(a) => run_phantom(a),
        Command::Patches(a) => run_patches(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn read_mask(path: &Path) -> CliResult<(BinaryMask, NiftiHeader)> {
    let img = read_nifti(path)?;
    Ok((img.to_mask()?, img.header))
}

fn read_probability(path: &Path) -> CliResult<ProbabilityVolume> {
    Ok(read_nifti(path)?.to_probability()?)
}

fn read_json_file(path: &Path) -> CliResult<Value> {
    let text = std::fs::read_to_string(path).map_err(belkit::Error::from)?;
    serde_json::from_str(&text).map_err(|e| Failure::Format(format!("{}: {e}", path.display())))
}

fn to_json_string<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report types serialize infallibly")
}

/// Write to stdout; a closed pipe on the reader side is not an error.
fn emit(text: &str) -> CliResult {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(belkit::Error::from(e).into()),
        _ => Ok(()),
    }
}

fn write_text(path: &Path, text: &str) -> CliResult {
    std::fs::write(path, text).map_err(belkit::Error::from)?;
    Ok(())
}

/// Overlay the keys of `patch` onto the object `base`.
fn merge(base: &mut Value, patch: Value, what: &str) -> CliResult {
    match (base.as_object_mut(), patch) {
        (Some(b), Value::Object(p)) => {
            b.extend(p);
            Ok(())
        }
        _ => Err(Failure::Format(format!("{what} must be a JSON object"))),
    }
}

fn resolve_params(a: &ParamArgs, default_mode: WeightMode) -> CliResult<LossParams> {
    let mut params = match &a.preset {
        Some(name) => LossParams::preset(name)?,
        None => LossParams {
            mode: default_mode,
            ..LossParams::default()
        },
    };
    if let Some(path) = &a.params {
        let mut value = serde_json::to_value(&params).expect("parameters serialize infallibly");
        merge(&mut value, read_json_file(path)?, "parameter file")?;
        params = serde_json::from_value(value).map_err(|e| Failure::Format(format!("{}: {e}", path.display())))?;
    }
    if let Some(alpha) = a.alpha {
        params.alpha = alpha;
        params.beta = 1.0 - alpha;
        params.mu = (1.0 - 2.0 * alpha) / (1.0 - alpha);
    }
    if let Some(mode) = a.mode {
        params.mode = match mode {
            ModeArg::Boundary => WeightMode::Boundary,
            ModeArg::Centerline => WeightMode::Centerline,
            ModeArg::Uniform => WeightMode::Uniform,
        };
    }
    if let Some(scope) = a.dmax_scope {
        params.dmax_scope = match scope {
            ScopeArg::Global => DmaxScope::Global,
            ScopeArg::PerComponent => DmaxScope::PerComponent,
        };
    }
    params.gamma = a.gamma.unwrap_or(params.gamma);
    params.r = a.r.unwrap_or(params.r);
    params.mu = a.mu.unwrap_or(params.mu);
    params.theta = a.theta.unwrap_or(params.theta);
    params.epsilon = a.epsilon.unwrap_or(params.epsilon);
    params.spacing_aware |= a.spacing_aware;
    params.validate()?;
    Ok(params)
}

fn run_weights(a: WeightsArgs) -> CliResult {
    let (g, header) = read_mask(&a.gt)?;
    let params = resolve_params(&a.params, WeightMode::Boundary)?;
    let b = match &a.pred {
        Some(path) => Some(breakage_map(&g, &read_probability(path)?, a.breakage_iters)?),
        None => None,
    };
    let w = weight_map(&g, &params, b.as_ref())?;
    write_f32(&a.out, w.volume(), Some(&header))?;
    Ok(())
}

fn run_loss(a: LossArgs) -> CliResult {
    let p = read_probability(&a.pred)?;
    let (g, header) = read_mask(&a.gt)?;
    let kind = match a.loss {
        LossArg::Dice => LossKind::Dice,
        LossArg::Tversky => LossKind::Tversky,
        LossArg::Gul => LossKind::Gul,
        LossArg::Bel => LossKind::Bel,
    };
    let default_mode = if kind == LossKind::Gul {
        WeightMode::Centerline
    } else {
        WeightMode::Boundary
    };
    let params = resolve_params(&a.params, default_mode)?;
    let iters = (!a.no_breakage).then_some(a.breakage_iters);
    let eval = evaluate_loss(kind, &p, &g, &params, iters, a.grad.is_some())?;
    if let (Some(path), Some(grad)) = (&a.grad, &eval.gradient) {
        write_f32(path, grad, Some(&header))?;
    }
    let report = json!({
        "loss": eval.output.loss,
        "kind": kind,
        "degenerate": eval.output.degenerate,
    });
    emit(&format!("{}\n", to_json_string(&report)))
}

fn run_metrics(a: MetricsArgs) -> CliResult {
    let (p, _) = read_mask(&a.pred)?;
    let (g, _) = read_mask(&a.gt)?;
    let opts = EvalOptions {
        lcc: a.lcc,
        small: a.small,
        branch_threshold: a.branch_threshold,
        drop_generations: a.drop_generations,
        root: a.root.into(),
        length_weighting: if a.mm {
            LengthWeighting::Millimeters
        } else {
            LengthWeighting::Voxels
        },
        ..EvalOptions::default()
    };
    let report = evaluate(&p, &g, &opts)?;
    let is_csv = a
        .out
        .as_deref()
        .and_then(Path::extension)
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let text = if is_csv {
        let case = a.case.clone().unwrap_or_else(|| case_name(&a.pred));
        format!("{CSV_HEADER}\n{}\n", report.csv_row(&case))
    } else {
        format!("{}\n", to_json_string(&report))
    };
    match &a.out {
        Some(path) => write_text(path, &text),
        None => emit(&text),
    }
}

fn case_name(path: &Path) -> String {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = name.strip_suffix(".gz").unwrap_or(&name);
    name.strip_suffix(".nii").unwrap_or(name).to_string()
}

fn run_skeleton(a: SkeletonArgs) -> CliResult {
    let (m, header) = read_mask(&a.input)?;
    let c = if a.no_prune { thin(&m) } else { skeletonize(&m)? };
    write_mask(&a.out, c.mask(), Some(&header))?;
    if let Some(path) = &a.graph {
        let graph = build_graph_with(&c, m.spacing(), a.root.into())?;
        write_text(path, &format!("{}\n", to_json_string(&graph.to_json())))?;
    }
    Ok(())
}

fn run_breakage(a: BreakageArgs) -> CliResult {
    let (g, header) = read_mask(&a.gt)?;
    let p = read_probability(&a.pred)?;
    let b = breakage_map(&g, &p, a.iters)?;
    write_f32(&a.out, b.volume(), Some(&header))?;
    Ok(())
}

fn parse_break(s: &str) -> CliResult<(usize, f64)> {
    let bad = || Failure::Parameter(format!("--break expects ID:GAP, got {s:?}"));
    let (id, gap) = s.split_once(':').ok_or_else(bad)?;
    Ok((
        id.trim().parse().map_err(|_| bad())?,
        gap.trim().parse().map_err(|_| bad())?,
    ))
}

fn parse_leak(s: &str) -> CliResult<([usize; 3], f64)> {
    let bad = || Failure::Parameter(format!("--leak expects X,Y,Z:R, got {s:?}"));
    let (xyz, r) = s.split_once(':').ok_or_else(bad)?;
    let coords: Vec<usize> = xyz
        .split(',')
        .map(|c| c.trim().parse().map_err(|_| bad()))
        .collect::<CliResult<_>>()?;
    let center: [usize; 3] = coords.try_into().map_err(|_| bad())?;
    Ok((center, r.trim().parse().map_err(|_| bad())?))
}

fn run_phantom(a: PhantomArgs) -> CliResult {
    let mut spec = TreeSpec::default();
    if let Some(path) = &a.spec {
        let mut value = serde_json::to_value(&spec).expect("spec serializes infallibly");
        merge(&mut value, read_json_file(path)?, "tree spec")?;
        spec = serde_json::from_value(value).map_err(|e| Failure::Format(format!("{}: {e}", path.display())))?;
    }
    spec.seed = a.seed.unwrap_or(spec.seed);
    spec.depth = a.depth.unwrap_or(spec.depth);
    let breaks = a.breaks.iter().map(|s| parse_break(s)).collect::<CliResult<Vec<_>>>()?;
    let leaks = a.leaks.iter().map(|s| parse_leak(s)).collect::<CliResult<Vec<_>>>()?;

    let truth = generate(&spec)?;
    let mut mask = truth.mask.clone();
    let mut degradations = Vec::new();
    for (id, gap) in breaks {
        let d = truth.break_branch_in(&mask, id, gap)?;
        degradations.push(json!({
            "op": "break",
            "branch": id,
            "gap": gap,
            "erased_voxels": d.erased_voxels,
            "erased_centerline": d.erased_centerline.len(),
        }));
        mask = d.mask;
    }
    for (center, radius) in leaks {
        let d = truth.add_leak_to(&mask, center, radius)?;
        degradations.push(json!({
            "op": "leak",
            "center": center,
            "radius": radius,
            "added_voxels": d.added_voxels,
        }));
        mask = d.mask;
    }

    write_mask(&a.out, &mask, None)?;
    if let Some(path) = &a.clean_out {
        write_mask(path, &truth.mask, None)?;
    }
    if let Some(path) = &a.truth {
        let mut value = serde_json::to_value(truth.to_json()).expect("truth serializes infallibly");
        value["degradations"] = Value::Array(degradations);
        write_text(path, &format!("{}\n", to_json_string(&value)))?;
    }
    Ok(())
}

fn parse_size(s: &str) -> CliResult<[usize; 3]> {
    let bad = || Failure::Parameter(format!("--size expects N or X,Y,Z, got {s:?}"));
    let parts: Vec<usize> = s
        .split(',')
        .map(|c| c.trim().parse().map_err(|_| bad()))
        .collect::<CliResult<_>>()?;
    match parts[..] {
        [n] => Ok([n; 3]),
        [x, y, z] => Ok([x, y, z]),
        _ => Err(bad()),
    }
}

fn run_patches(a: PatchesArgs) -> CliResult {
    let img: NiftiImage = read_nifti(&a.input)?;
    let dims = img.dims();
    let size = parse_size(&a.size)?;
    let grid = match &a.lung {
        Some(path) => {
            let (lung, _) = read_mask(path)?;
            let region = lung_window_bounds(&lung, a.extend_superior)?;
            PatchGrid::within(dims, region, size, a.overlap)?
        }
        None => sliding_windows(dims, size, a.overlap)?,
    };
    let mut report = json!({
        "dims": dims,
        "patch_size": grid.patch_size,
        "overlap": grid.overlap_fraction,
        "count": grid.len(),
    });
    if a.list {
        report["origins"] = json!(grid.origins);
    }
    emit(&format!("{}\n", to_json_string(&report)))
}
