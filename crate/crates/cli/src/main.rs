//! Command-line front end for the g-metric library.
//!
//! One binary, seven verbs: `check` audits a construction against the
//! axioms, `eval` computes a single tuple value, `ball`/`net`/`seq` run
//! the topology diagnostics, and `fixpoint`/`lambda` drive the contraction
//! machinery. Every verb reads local JSON files, validates them up front,
//! writes one JSON report, and exits 0 when everything passed, 1 when the
//! report enumerates violations, 2 when the invocation or an input file is
//! malformed (one line on stderr). Reports share a single envelope with a
//! version field and a verb discriminator; identical inputs and seed
//! produce byte-identical bytes. With --out the report lands via temp
//! file + rename, so an interrupted run never leaves a truncated file.

use std::fmt::Display;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use gmetric::analysis::{
    check_ball_inclusion, derived_metric, diagnose_cauchy, diagnose_convergence, epsilon_net,
    g_ball, CauchyReport, ConvergenceReport, DerivedVariant, SequenceDiagnostics,
};
use gmetric::axioms::full_audit;
use gmetric::fixedpoint::{
    estimate_lambda, solve_banach, solve_psi_phi, solve_quasi, solve_weak_contractive,
    uniqueness_probe, BoundBreach, PhiSpec, PsiSpec, UniquenessReport, WeakContractiveReport,
};
use gmetric::space::CoordMetric;
use gmetric::{
    CheckConfig, ConstructionSpec, ContractionCertificate, GMetric, GroundSample,
    IterationBudget, IterationSpace, OrbitPoint, OrbitTrace, PointTuple, Regime, SelfMap,
    StopReason, ViolationReport,
};

const REPORT_VERSION: &str = "gmetric-report/1";

/// An input or usage problem. The message is a single line; exit code 2.
struct CliError(String);

fn fail(ctx: impl Display, err: impl Display) -> CliError {
    CliError(format!("{ctx}: {err}").replace('\n', "; "))
}

#[derive(Parser)]
#[command(
    name = "gmetric",
    version,
    about = "Audit, evaluate, and iterate g-metric constructions over finite samples"
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Audit a construction against the g-metric axioms on a sample
    Check(CheckArgs),
    /// Evaluate a construction on one tuple of sample indices
    Eval(EvalArgs),
    /// g-ball membership around a center, with the two-point sandwich
    Ball(BallArgs),
    /// Greedy epsilon-net over the sample, cover-checked afterwards
    Net(NetArgs),
    /// Convergence and Cauchy diagnostics for a sequence prefix
    Seq(SeqArgs),
    /// Picard iteration under a contraction regime, bounds tracked per step
    Fixpoint(FixpointArgs),
    /// Estimate a contraction factor from sample tuples
    Lambda(LambdaArgs),
}

fn main() -> ExitCode {
    match run(Cli::parse().verb) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {}", e.0);
            ExitCode::from(2)
        }
    }
}

fn run(verb: Verb) -> Result<bool, CliError> {
    match verb {
        Verb::Check(a) => run_check(a),
        Verb::Eval(a) => run_eval(a),
        Verb::Ball(a) => run_ball(a),
        Verb::Net(a) => run_net(a),
        Verb::Seq(a) => run_seq(a),
        Verb::Fixpoint(a) => run_fixpoint(a),
        Verb::Lambda(a) => run_lambda(a),
    }
}

#[derive(Args)]
struct ConstructionArgs {
    /// Catalog kind: discrete, diameter, norm_diameter, average, max,
    /// shortest_path, enclosing_ball, non_mi
    #[arg(long, conflicts_with = "spec")]
    construction: Option<String>,
    /// Tuple arity minus one
    #[arg(long, conflicts_with = "spec")]
    order: Option<usize>,
    /// Construction spec JSON file (kind, order, transforms, sum_with)
    #[arg(long)]
    spec: Option<PathBuf>,
}

impl ConstructionArgs {
    /// Verbs with a natural default construction pass one; the audit-style
    /// verbs require an explicit choice.
    fn load(&self, default: Option<(&str, usize)>) -> Result<GMetric, CliError> {
        if let Some(path) = &self.spec {
            let text = fs::read_to_string(path).map_err(|e| fail(path.display(), e))?;
            return GMetric::from_json(&text).map_err(|e| fail(path.display(), e));
        }
        let kind = match (&self.construction, default) {
            (Some(k), _) => k.as_str(),
            (None, Some((k, _))) => k,
            (None, None) => {
                return Err(fail("--construction", "pick a catalog kind or pass --spec FILE"))
            }
        };
        let order = match (self.order, default) {
            (Some(n), _) => n,
            (None, Some((_, n))) => n,
            (None, None) => return Err(fail("--order", "a construction needs its order")),
        };
        let spec = serde_json::json!({ "kind": kind, "order": order });
        let spec: ConstructionSpec =
            serde_json::from_value(spec).map_err(|e| fail("--construction", e))?;
        GMetric::from_spec(&spec).map_err(|e| fail("--construction", e))
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Report destination; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    construction: ConstructionArgs,
    /// Ground sample JSON: {"points": [...], "metric": ...}
    #[arg(long)]
    sample: PathBuf,
    /// Sample the tuple spaces instead of exhausting them
    #[arg(long)]
    sampled: bool,
    /// Case budget per inequality family in sampled mode
    #[arg(long, default_value_t = 10_000)]
    budget: usize,
    /// Relative slack before an inequality counts as violated
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Seed for sampled mode
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

fn run_check(a: CheckArgs) -> Result<bool, CliError> {
    let g = a.construction.load(None)?;
    let sample = load_sample(&a.sample)?;
    let cfg = CheckConfig {
        tolerance: a.tol,
        exhaustive: !a.sampled,
        sample_budget: a.budget,
        rng_seed: a.seed,
    };
    let summary = full_audit(&g, &sample, &cfg).map_err(|e| fail("audit", e))?;
    let clean = summary.violations.is_empty();
    emit("check", &summary, a.output.out.as_deref())?;
    Ok(clean)
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    construction: ConstructionArgs,
    /// Ground sample JSON file
    #[arg(long)]
    sample: PathBuf,
    /// Comma-separated sample indices, order+1 of them
    #[arg(long)]
    tuple: String,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Serialize)]
struct EvalPayload {
    construction: ConstructionSpec,
    order: usize,
    tuple: Vec<usize>,
    value: f64,
}

fn run_eval(a: EvalArgs) -> Result<bool, CliError> {
    let g = a.construction.load(None)?;
    let sample = load_sample(&a.sample)?;
    let indices = parse_indices(&a.tuple)?;
    let t = PointTuple::new(indices.clone()).map_err(|e| fail("--tuple", e))?;
    let value = g.evaluate(&sample, &t).map_err(|e| fail("--tuple", e))?;
    let payload =
        EvalPayload { construction: g.spec(), order: g.order(), tuple: indices, value };
    emit("eval", &payload, a.output.out.as_deref())?;
    Ok(true)
}

#[derive(Args)]
struct BallArgs {
    #[command(flatten)]
    construction: ConstructionArgs,
    /// Ground sample JSON file
    #[arg(long)]
    sample: PathBuf,
    /// Sample index of the ball's center
    #[arg(long)]
    center: usize,
    #[arg(long)]
    radius: f64,
    #[command(flatten)]
    output: OutputArgs,
}

/// The three member lists nest: the shrunk g-ball sits inside the derived
/// two-point ball, which sits inside the full g-ball. A violation entry
/// means a point broke one of those inclusions.
#[derive(Serialize)]
struct BallPayload {
    construction: ConstructionSpec,
    order: usize,
    center: usize,
    radius: f64,
    /// g(center, y, .., y) < radius / (order + 1)
    shrunk_members: Vec<usize>,
    /// d(center, y) < radius for the symmetrized two-point collapse
    d_members: Vec<usize>,
    /// g(center, y, .., y) < radius
    g_members: Vec<usize>,
    violations: Vec<ViolationReport>,
}

fn run_ball(a: BallArgs) -> Result<bool, CliError> {
    let g = a.construction.load(None)?;
    let sample = load_sample(&a.sample)?;
    let ball = g_ball(&g, &sample, a.center, a.radius).map_err(|e| fail("ball", e))?;
    let n = g.order() as f64;
    let shrunk =
        g_ball(&g, &sample, a.center, a.radius / (n + 1.0)).map_err(|e| fail("ball", e))?;
    let d = derived_metric(&g, &sample, DerivedVariant::TwoSidedBlock { s: 1 })
        .map_err(|e| fail("ball", e))?;
    let d_members = (0..sample.size()).filter(|&y| d[a.center][y] < a.radius).collect();
    let violations = check_ball_inclusion(&g, &sample, &[a.center], &[a.radius])
        .map_err(|e| fail("ball", e))?;
    let clean = violations.is_empty();
    let payload = BallPayload {
        construction: g.spec(),
        order: g.order(),
        center: a.center,
        radius: a.radius,
        shrunk_members: shrunk.members.into_iter().collect(),
        d_members,
        g_members: ball.members.into_iter().collect(),
        violations,
    };
    emit("ball", &payload, a.output.out.as_deref())?;
    Ok(clean)
}

#[derive(Args)]
struct NetArgs {
    #[command(flatten)]
    construction: ConstructionArgs,
    /// Ground sample JSON file
    #[arg(long)]
    sample: PathBuf,
    /// Ball radius for the net
    #[arg(long)]
    eps: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Serialize)]
struct NetPayload {
    construction: ConstructionSpec,
    order: usize,
    eps: f64,
    centers: Vec<usize>,
    /// Points left outside every center's ball; the greedy sweep makes
    /// this empty by construction, so anything here is a violation.
    uncovered: Vec<usize>,
}

fn run_net(a: NetArgs) -> Result<bool, CliError> {
    let g = a.construction.load(None)?;
    let sample = load_sample(&a.sample)?;
    let centers = epsilon_net(&g, &sample, a.eps).map_err(|e| fail("net", e))?;
    let mut covered = vec![false; sample.size()];
    for &c in &centers {
        for &m in &g_ball(&g, &sample, c, a.eps).map_err(|e| fail("net", e))?.members {
            covered[m] = true;
        }
    }
    let uncovered: Vec<usize> =
        covered.iter().enumerate().filter(|(_, &hit)| !hit).map(|(i, _)| i).collect();
    let clean = uncovered.is_empty();
    let payload =
        NetPayload { construction: g.spec(), order: g.order(), eps: a.eps, centers, uncovered };
    emit("net", &payload, a.output.out.as_deref())?;
    Ok(clean)
}

#[derive(Args)]
struct SeqArgs {
    #[command(flatten)]
    construction: ConstructionArgs,
    /// Ground sample JSON file
    #[arg(long)]
    sample: PathBuf,
    /// JSON array of sample indices forming the sequence prefix
    #[arg(long)]
    prefix_file: PathBuf,
    /// Sample index of the candidate limit; enables the convergence scan
    #[arg(long)]
    limit: Option<usize>,
    /// Epsilon rungs for the convergence scan (repeatable; defaults to
    /// 0.25, 0.05, 0.01)
    #[arg(long)]
    eps: Vec<f64>,
    #[command(flatten)]
    output: OutputArgs,
}

/// The exit code reflects only the convergence criteria, which must agree
/// on every prefix. The Cauchy report's consecutive-decay gap is carried
/// as a caveat instead: a finite prefix cannot settle it.
#[derive(Serialize)]
struct SeqPayload {
    construction: ConstructionSpec,
    order: usize,
    prefix: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    candidate_limit: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    convergence: Option<ConvergenceReport>,
    cauchy: CauchyReport,
}

fn run_seq(a: SeqArgs) -> Result<bool, CliError> {
    let g = a.construction.load(None)?;
    let sample = load_sample(&a.sample)?;
    let prefix = load_indices(&a.prefix_file)?;
    if let Some(&bad) = a.eps.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
        return Err(fail("--eps", format!("{bad} is not a positive finite rung")));
    }
    let epsilons = if a.eps.is_empty() { vec![0.25, 0.05, 0.01] } else { a.eps.clone() };
    let diag =
        SequenceDiagnostics { prefix: prefix.clone(), candidate_limit: a.limit, order: g.order() };
    let convergence = match a.limit {
        Some(_) => Some(
            diagnose_convergence(&g, &sample, &diag, &epsilons).map_err(|e| fail("seq", e))?,
        ),
        None => None,
    };
    let cauchy = diagnose_cauchy(&g, &sample, &diag).map_err(|e| fail("seq", e))?;
    let clean = convergence.as_ref().map_or(true, |c| c.agree_on_all);
    let payload = SeqPayload {
        construction: g.spec(),
        order: g.order(),
        prefix,
        candidate_limit: a.limit,
        convergence,
        cauchy,
    };
    emit("seq", &payload, a.output.out.as_deref())?;
    Ok(clean)
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum FixRegime {
    Banach,
    PsiPhi,
    Quasi,
    Weak,
}

#[derive(Args)]
struct FixpointArgs {
    #[command(flatten)]
    construction: ConstructionArgs,
    /// Ground sample JSON; required by table maps, unused by affine maps
    #[arg(long)]
    sample: Option<PathBuf>,
    /// Self-map: affine:a,b for x -> a*x + b, or table:FILE (JSON index array)
    #[arg(long)]
    map: String,
    #[arg(long, default_value = "banach")]
    regime: FixRegime,
    /// Start: a number for affine maps, a sample index for table maps
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    /// Contraction factor; defaults from the map, or an estimate for tables
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<f64>,
    /// Gauge for the psi-phi regime: identity, square, or ratio
    #[arg(long, default_value = "identity")]
    psi: String,
    /// Drop-off for the psi-phi regime: linear:c or clamped:c
    #[arg(long, default_value = "linear:0.5")]
    phi: String,
    /// Stop once the step value drops below this
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    /// Rerun from this many random starts and compare terminals (banach)
    #[arg(long, default_value_t = 0)]
    trials: usize,
    /// Scalar domain bounds the probe draws starts from
    #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
    lo: f64,
    #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
    hi: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Terminal agreement tolerance for the uniqueness probe
    #[arg(long, default_value_t = 1e-10)]
    gap_tol: f64,
    /// Tuple budget when the factor must be estimated from a sample
    #[arg(long, default_value_t = 10_000)]
    budget: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Serialize)]
struct FixpointPayload {
    construction: ConstructionSpec,
    order: usize,
    regime: &'static str,
    map: SelfMap,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    certificate: Option<ContractionCertificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<TraceView>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weak: Option<WeakContractiveReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    uniqueness: Option<UniquenessReport>,
}

#[derive(Serialize)]
struct StepRow {
    k: usize,
    step_g: f64,
    bound_g: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    rate_to_terminal: Option<f64>,
    /// The point this step landed on.
    iterate: OrbitPoint,
}

/// Per-step rows are friendlier to downstream readers than the library's
/// parallel arrays.
#[derive(Serialize)]
struct TraceView {
    start: OrbitPoint,
    steps: Vec<StepRow>,
    terminal: OrbitPoint,
    orbit_diameter: Vec<f64>,
    stop_reason: StopReason,
    #[serde(skip_serializing_if = "Option::is_none")]
    breach: Option<BoundBreach>,
}

impl TraceView {
    fn new(trace: OrbitTrace) -> Self {
        let terminal = trace.terminal().clone();
        let OrbitTrace {
            start,
            iterates,
            step_g,
            bound_g,
            orbit_diameter,
            stop_reason,
            rate_to_terminal,
            breach,
        } = trace;
        let steps = step_g
            .iter()
            .enumerate()
            .map(|(k, &s)| StepRow {
                k,
                step_g: s,
                bound_g: bound_g[k],
                rate_to_terminal: rate_to_terminal.as_ref().map(|r| r[k]),
                iterate: iterates[k + 1].clone(),
            })
            .collect();
        Self { start, steps, terminal, orbit_diameter, stop_reason, breach }
    }
}

fn run_fixpoint(a: FixpointArgs) -> Result<bool, CliError> {
    let g = a.construction.load(Some(("diameter", 2)))?;
    let map = parse_map(&a.map)?;
    let sample = match &a.sample {
        Some(p) => Some(load_sample(p)?),
        None => None,
    };
    if a.trials > 0 && a.regime != FixRegime::Banach {
        return Err(fail(
            "--trials",
            "the uniqueness probe reruns the plain geometric solver; use --regime banach",
        ));
    }
    let budget = IterationBudget { tol: a.tol, max_iter: a.max_iter };

    let space = match &map {
        SelfMap::Table { .. } => match &sample {
            Some(s) => IterationSpace::Sample(s),
            None => return Err(fail("--map", "table maps need --sample")),
        },
        SelfMap::Affine { .. } => {
            if !(a.lo < a.hi && a.lo.is_finite() && a.hi.is_finite()) {
                return Err(fail(
                    "--lo/--hi",
                    format!("domain [{}, {}] is empty or unbounded", a.lo, a.hi),
                ));
            }
            IterationSpace::Scalars { metric: CoordMetric::Euclidean, lo: a.lo, hi: a.hi }
        }
        SelfMap::AffineVec { .. } => {
            return Err(fail("--map", "vector affine maps are reachable through the library only"))
        }
    };
    let x0 = match (&a.x0, &map) {
        (None, _) => None,
        (Some(raw), SelfMap::Table { .. }) => {
            Some(OrbitPoint::Index(raw.parse().map_err(|e| fail("--x0", e))?))
        }
        (Some(raw), _) => {
            Some(OrbitPoint::Coords(vec![raw.parse().map_err(|e| fail("--x0", e))?]))
        }
    };
    let need_x0 = || fail("--x0", "this regime iterates from a start point");

    let mut payload = FixpointPayload {
        construction: g.spec(),
        order: g.order(),
        regime: match a.regime {
            FixRegime::Banach => "banach",
            FixRegime::PsiPhi => "psi-phi",
            FixRegime::Quasi => "quasi",
            FixRegime::Weak => "weak",
        },
        map: map.clone(),
        lambda: None,
        certificate: None,
        trace: None,
        weak: None,
        uniqueness: None,
    };
    let clean;
    match a.regime {
        FixRegime::Banach | FixRegime::Quasi => {
            let regime =
                if a.regime == FixRegime::Quasi { Regime::Quasi } else { Regime::Banach };
            let lambda = match (a.lambda, &map) {
                (Some(l), _) => l,
                (None, SelfMap::Affine { a: slope, .. }) => {
                    // The catalog's diameter-style values scale linearly,
                    // so |a| is the exact factor; the quasi inequality
                    // divides its candidate by n, which multiplies the
                    // factor back up by n.
                    match regime {
                        Regime::Quasi => g.order() as f64 * slope.abs(),
                        _ => slope.abs(),
                    }
                }
                (None, _) => {
                    let s = sample.as_ref().expect("table maps carry a sample");
                    let cert = estimate_lambda(&g, s, &map, regime, a.budget)
                        .map_err(|e| fail("lambda", e))?;
                    let l = cert.lambda_hat;
                    payload.certificate = Some(cert);
                    l
                }
            };
            let start = x0.ok_or_else(need_x0)?;
            let trace = match regime {
                Regime::Quasi => solve_quasi(&g, &space, &map, start, lambda, budget),
                _ => solve_banach(&g, &space, &map, start, lambda, budget),
            }
            .map_err(|e| fail("fixpoint", e))?;
            let mut ok = !matches!(
                trace.stop_reason,
                StopReason::BoundViolated | StopReason::NonContractive
            );
            payload.lambda = Some(lambda);
            if a.trials > 0 {
                let probe = uniqueness_probe(
                    &g, &space, &map, lambda, budget, a.trials, a.seed, a.gap_tol,
                )
                .map_err(|e| fail("probe", e))?;
                ok &= probe.coincide;
                payload.uniqueness = Some(probe);
            }
            payload.trace = Some(TraceView::new(trace));
            clean = ok;
        }
        FixRegime::PsiPhi => {
            let psi = parse_psi(&a.psi)?;
            let phi = parse_phi(&a.phi)?;
            let start = x0.ok_or_else(need_x0)?;
            let trace = solve_psi_phi(&g, &space, &map, psi, phi, start, budget)
                .map_err(|e| fail("fixpoint", e))?;
            clean = !matches!(
                trace.stop_reason,
                StopReason::BoundViolated | StopReason::NonContractive
            );
            payload.trace = Some(TraceView::new(trace));
        }
        FixRegime::Weak => {
            let (SelfMap::Table { map: table }, Some(s)) = (&map, &sample) else {
                return Err(fail(
                    "--regime",
                    "weak runs the finite-sample argmin argument; it needs table:FILE and --sample",
                ));
            };
            let report = solve_weak_contractive(&g, s, table).map_err(|e| fail("fixpoint", e))?;
            clean = report.strictness_failures.is_empty() && report.fixed_point.is_some();
            payload.weak = Some(report);
        }
    }
    emit("fixpoint", &payload, a.output.out.as_deref())?;
    Ok(clean)
}

#[derive(Clone, Copy, ValueEnum)]
enum LambdaRegime {
    Banach,
    BanachWeakI,
    BanachWeakII,
    PsiPhi,
    Quasi,
    WeakContractive,
}

impl LambdaRegime {
    fn core(self) -> Regime {
        match self {
            LambdaRegime::Banach => Regime::Banach,
            LambdaRegime::BanachWeakI => Regime::BanachWeakI,
            LambdaRegime::BanachWeakII => Regime::BanachWeakII,
            LambdaRegime::PsiPhi => Regime::PsiPhi,
            LambdaRegime::Quasi => Regime::Quasi,
            LambdaRegime::WeakContractive => Regime::WeakContractive,
        }
    }
}

#[derive(Args)]
struct LambdaArgs {
    #[command(flatten)]
    construction: ConstructionArgs,
    /// Ground sample JSON file the tuples are drawn from
    #[arg(long)]
    sample: PathBuf,
    /// Self-map: affine:a,b or table:FILE
    #[arg(long)]
    map: String,
    #[arg(long, default_value = "banach")]
    regime: LambdaRegime,
    /// Tuple budget for the scan
    #[arg(long, default_value_t = 10_000)]
    budget: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Serialize)]
struct LambdaPayload {
    construction: ConstructionSpec,
    order: usize,
    regime: Regime,
    map: SelfMap,
    budget: usize,
    certificate: ContractionCertificate,
}

fn run_lambda(a: LambdaArgs) -> Result<bool, CliError> {
    let g = a.construction.load(Some(("diameter", 2)))?;
    let sample = load_sample(&a.sample)?;
    let map = parse_map(&a.map)?;
    let regime = a.regime.core();
    let certificate =
        estimate_lambda(&g, &sample, &map, regime, a.budget).map_err(|e| fail("lambda", e))?;
    let clean = !certificate.non_contractive;
    let payload = LambdaPayload {
        construction: g.spec(),
        order: g.order(),
        regime,
        map,
        budget: a.budget,
        certificate,
    };
    emit("lambda", &payload, a.output.out.as_deref())?;
    Ok(clean)
}

fn load_sample(path: &Path) -> Result<GroundSample, CliError> {
    let text = fs::read_to_string(path).map_err(|e| fail(path.display(), e))?;
    GroundSample::from_json(&text).map_err(|e| fail(path.display(), e))
}

fn load_indices(path: &Path) -> Result<Vec<usize>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| fail(path.display(), e))?;
    serde_json::from_str(&text).map_err(|e| fail(path.display(), e))
}

fn parse_indices(raw: &str) -> Result<Vec<usize>, CliError> {
    raw.split(',')
        .map(|s| s.trim().parse().map_err(|e| fail("--tuple", format!("'{s}': {e}"))))
        .collect()
}

fn parse_map(raw: &str) -> Result<SelfMap, CliError> {
    let (kind, rest) = raw.split_once(':').ok_or_else(|| {
        fail("--map", format!("'{raw}' has no kind; expected affine:a,b or table:FILE"))
    })?;
    match kind {
        "affine" => {
            let (sa, sb) = rest.split_once(',').ok_or_else(|| {
                fail("--map", format!("affine needs two coefficients, got '{rest}'"))
            })?;
            let a = sa.trim().parse().map_err(|e| fail("--map", e))?;
            let b = sb.trim().parse().map_err(|e| fail("--map", e))?;
            Ok(SelfMap::Affine { a, b })
        }
        "table" => Ok(SelfMap::Table { map: load_indices(Path::new(rest))? }),
        other => Err(fail("--map", format!("unknown map kind '{other}'; expected affine or table"))),
    }
}

fn parse_psi(raw: &str) -> Result<PsiSpec, CliError> {
    match raw {
        "identity" => Ok(PsiSpec::Identity),
        "square" => Ok(PsiSpec::Square),
        "ratio" => Ok(PsiSpec::Ratio),
        other => {
            Err(fail("--psi", format!("unknown gauge '{other}'; expected identity, square, or ratio")))
        }
    }
}

fn parse_phi(raw: &str) -> Result<PhiSpec, CliError> {
    let (kind, c) = raw.split_once(':').ok_or_else(|| {
        fail("--phi", format!("'{raw}' has no coefficient; expected linear:c or clamped:c"))
    })?;
    let c: f64 = c.trim().parse().map_err(|e| fail("--phi", e))?;
    match kind {
        "linear" => Ok(PhiSpec::Linear { c }),
        "clamped" => Ok(PhiSpec::ClampedSquare { c }),
        other => Err(fail("--phi", format!("unknown drop-off '{other}'; expected linear or clamped"))),
    }
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    version: &'static str,
    verb: &'static str,
    #[serde(flatten)]
    body: &'a T,
}

fn emit<T: Serialize>(verb: &'static str, body: &T, out: Option<&Path>) -> Result<(), CliError> {
    let report = Report { version: REPORT_VERSION, verb, body };
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| fail("report", e))?;
    text.push('\n');
    match out {
        None => io::stdout().write_all(text.as_bytes()).map_err(|e| fail("stdout", e)),
        Some(path) => write_atomic(path, &text),
    }
}

// Temp file next to the destination, then rename; readers never observe a
// partially written report.
fn write_atomic(path: &Path, text: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::Builder::new()
        .prefix(".gmetric-report")
        .tempfile_in(dir)
        .map_err(|e| fail(path.display(), e))?;
    tmp.write_all(text.as_bytes()).map_err(|e| fail(path.display(), e))?;
    tmp.persist(path).map_err(|e| fail(path.display(), e.error))?;
    Ok(())
}
