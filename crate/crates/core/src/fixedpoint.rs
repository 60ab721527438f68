//! Picard iteration under the contraction regimes a g-metric supports:
//! plain contractions, the one-sided and swapped-tail weakenings, control
//! function pairs, quasi-contractions with orbit bookkeeping, and the
//! finite weak-contractive argmin argument. Every solver returns a trace
//! whose per-step bounds can be checked against the run itself.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::axioms::{gather_multisets, multiset_count, tuple, violated, CheckConfig};
use crate::construct::{EvalError, GMetric};
use crate::space::{CoordMetric, GroundSample, MetricSource, PointTuple};

#[derive(Debug, Error)]
pub enum FpError {
    #[error("self-map table has {got} entries for a sample of {want}")]
    TableSize { got: usize, want: usize },
    #[error("table entry {value} at index {index} is out of range for a sample of {size}")]
    TableEntry { index: usize, value: usize, size: usize },
    #[error("map and space do not fit together: {0}")]
    MapSpaceMismatch(&'static str),
    #[error("affine parameter vectors have lengths {a} and {b}")]
    AffineShape { a: usize, b: usize },
    #[error("start point does not match the space: {0}")]
    BadStart(&'static str),
    #[error("tolerance must be positive and finite, got {0}")]
    BadTolerance(f64),
    #[error("iteration budget must allow at least one step")]
    ZeroIterations,
    #[error("budget must be at least 1")]
    ZeroBudget,
    #[error("control function rejected: {0}")]
    BadControl(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// The contraction hypotheses a certificate can speak about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// g applied to the fully mapped tuple vs the original tuple.
    #[serde(rename = "banach")]
    Banach,
    /// Only the first entry is mapped. Constant tuples make the right side
    /// zero while the left side is the gap to the image, so any map that
    /// moves some point is non-contractive here; the regime is satisfiable
    /// only by maps that fix every sampled point.
    #[serde(rename = "banach-weak-i")]
    BanachWeakI,
    /// Star form: g(T(x), T(y), .., T(y)) vs g(x, y, .., y).
    #[serde(rename = "banach-weak-ii")]
    BanachWeakII,
    /// Control-function form. The ratio estimated here is the same star
    /// form as the swapped-tail regime: it is the factor a linear control
    /// pair psi = id, phi = (1 - lambda)x would have to certify.
    #[serde(rename = "psi-phi")]
    PsiPhi,
    /// Strict decrease on every tuple with at least two distinct entries;
    /// a ratio of exactly 1 is already a violation.
    #[serde(rename = "weak-contractive")]
    WeakContractive,
    /// Mapped tuple vs (1/n) times the worst of the original tuple and all
    /// point-to-image stars.
    #[serde(rename = "quasi")]
    Quasi,
}

/// How the iterate moves: affine on scalar or vector coordinates, or an
/// explicit index table over a finite sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SelfMap {
    Affine { a: f64, b: f64 },
    AffineVec { a: Vec<f64>, b: Vec<f64> },
    Table { map: Vec<usize> },
}

/// Where the orbit lives. Table maps iterate over sample indices; affine
/// maps iterate over raw coordinates under the given norm. The bounds are
/// used only to draw random starting points.
#[derive(Debug, Clone)]
pub enum IterationSpace<'a> {
    Sample(&'a GroundSample),
    Scalars { metric: CoordMetric, lo: f64, hi: f64 },
    Vectors { metric: CoordMetric, lo: Vec<f64>, hi: Vec<f64> },
}

/// One orbit point: a sample index or a coordinate vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum OrbitPoint {
    Index(usize),
    Coords(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIter,
    BoundViolated,
    NonContractive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BreachKind {
    /// A step exceeded its a-priori bound.
    StepBound,
    /// The orbit spread exceeded the quasi-contraction diameter bound.
    OrbitDiameter,
    /// A step broke the control-function inequality.
    ControlStep,
}

/// The first bound that failed, pinned to its step index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundBreach {
    pub at: usize,
    pub kind: BreachKind,
    pub lhs: f64,
    pub rhs: f64,
}

/// Record of one Picard run. `step_g[k]` is g(y_k, y_{k+1}, .., y_{k+1});
/// `bound_g[k]` is the regime's a-priori bound for that step, same length.
/// `orbit_diameter[N]` is the largest g-value over tuples drawn from the
/// first N+1 iterates, computed up to an enumeration cap.
#[derive(Debug, Clone, Serialize)]
pub struct OrbitTrace {
    pub start: OrbitPoint,
    pub iterates: Vec<OrbitPoint>,
    pub step_g: Vec<f64>,
    pub bound_g: Vec<f64>,
    pub orbit_diameter: Vec<f64>,
    pub stop_reason: StopReason,
    /// g(y_N, t, .., t) against the terminal iterate t, recorded by the
    /// quasi-contraction solver so the convergence rate can be read off.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_to_terminal: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub breach: Option<BoundBreach>,
}

impl OrbitTrace {
    pub fn terminal(&self) -> &OrbitPoint {
        self.iterates.last().expect("a trace always holds the start")
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IterationBudget {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for IterationBudget {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 10_000 }
    }
}

/// The tuple attaining the worst ratio, with both sides of the inequality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioWitness {
    pub tuple: PointTuple,
    pub lhs: f64,
    pub rhs: f64,
}

/// Outcome of sampling a contraction inequality over a ground sample.
/// `lambda_hat` is the largest left/right ratio seen; a right side of zero
/// against a positive left side has no finite ratio and reports infinity.
#[derive(Debug, Clone, Serialize)]
pub struct ContractionCertificate {
    pub regime: Regime,
    pub lambda_hat: f64,
    pub samples_checked: u64,
    pub worst_ratio_witness: Option<RatioWitness>,
    pub non_contractive: bool,
}

const SALT_LAMBDA: u64 = 0x6c_61;
// Relative slack for comparing runs against their a-priori bounds.
const BOUND_TOL: f64 = 1e-9;
const DIAM_POINT_CAP: usize = 64;
const DIAM_TUPLE_CAP: u64 = 200_000;

fn apply_affine(map: &SelfMap, c: &[f64]) -> Vec<f64> {
    match map {
        SelfMap::Affine { a, b } => vec![a * c[0] + b],
        SelfMap::AffineVec { a, b } => {
            c.iter().zip(a).zip(b).map(|((x, ai), bi)| ai * x + bi).collect()
        }
        SelfMap::Table { .. } => unreachable!("table maps act on indices"),
    }
}

fn validate_table(map: &[usize], size: usize) -> Result<(), FpError> {
    if map.len() != size {
        return Err(FpError::TableSize { got: map.len(), want: size });
    }
    for (index, &value) in map.iter().enumerate() {
        if value >= size {
            return Err(FpError::TableEntry { index, value, size });
        }
    }
    Ok(())
}

struct Engine<'a> {
    g: &'a GMetric,
    sample: Option<&'a GroundSample>,
    metric: CoordMetric,
    map: &'a SelfMap,
    buf: Vec<usize>,
}

impl<'a> Engine<'a> {
    fn new(
        g: &'a GMetric,
        space: &IterationSpace<'a>,
        map: &'a SelfMap,
        x0: &OrbitPoint,
    ) -> Result<Self, FpError> {
        let mut engine = Engine {
            g,
            sample: None,
            metric: CoordMetric::Euclidean,
            map,
            buf: Vec::with_capacity(g.order() + 1),
        };
        match (space, map) {
            (IterationSpace::Sample(sample), SelfMap::Table { map }) => {
                validate_table(map, sample.size())?;
                g.compatible_with(sample)?;
                match x0 {
                    OrbitPoint::Index(i) if *i < sample.size() => {}
                    OrbitPoint::Index(_) => return Err(FpError::BadStart("index out of range")),
                    OrbitPoint::Coords(_) => {
                        return Err(FpError::BadStart("sample spaces take an index"))
                    }
                }
                engine.sample = Some(sample);
            }
            (IterationSpace::Sample(_), _) => {
                return Err(FpError::MapSpaceMismatch("affine maps need a coordinate space"))
            }
            (_, SelfMap::Table { .. }) => {
                return Err(FpError::MapSpaceMismatch("table maps need a finite sample"))
            }
            (IterationSpace::Scalars { metric, .. }, SelfMap::Affine { .. }) => {
                match x0 {
                    OrbitPoint::Coords(c) if c.len() == 1 => {}
                    _ => return Err(FpError::BadStart("scalar spaces take a 1-dim point")),
                }
                engine.metric = *metric;
            }
            (IterationSpace::Scalars { .. }, SelfMap::AffineVec { .. }) => {
                return Err(FpError::MapSpaceMismatch("vector maps need a vector space"))
            }
            (IterationSpace::Vectors { metric, lo, hi }, SelfMap::AffineVec { a, b }) => {
                if a.len() != b.len() {
                    return Err(FpError::AffineShape { a: a.len(), b: b.len() });
                }
                if lo.len() != a.len() || hi.len() != a.len() {
                    return Err(FpError::MapSpaceMismatch("space and map dimensions differ"));
                }
                match x0 {
                    OrbitPoint::Coords(c) if c.len() == a.len() => {}
                    _ => return Err(FpError::BadStart("dimension mismatch")),
                }
                engine.metric = *metric;
            }
            (IterationSpace::Vectors { .. }, SelfMap::Affine { .. }) => {
                return Err(FpError::MapSpaceMismatch("scalar maps need a scalar space"))
            }
        }
        Ok(engine)
    }

    fn apply(&self, p: &OrbitPoint) -> OrbitPoint {
        match (p, self.map) {
            (OrbitPoint::Index(i), SelfMap::Table { map }) => OrbitPoint::Index(map[*i]),
            (OrbitPoint::Coords(c), m) => OrbitPoint::Coords(apply_affine(m, c)),
            (OrbitPoint::Index(_), _) => unreachable!("validated in Engine::new"),
        }
    }

    fn value(&mut self, pts: &[&OrbitPoint]) -> Result<f64, EvalError> {
        if let Some(sample) = self.sample {
            self.buf.clear();
            for p in pts {
                match p {
                    OrbitPoint::Index(i) => self.buf.push(*i),
                    OrbitPoint::Coords(_) => unreachable!("validated in Engine::new"),
                }
            }
            self.buf.sort_unstable();
            Ok(self.g.eval_sorted(sample, &self.buf))
        } else {
            let v: Vec<Vec<f64>> = pts
                .iter()
                .map(|p| match p {
                    OrbitPoint::Coords(c) => c.clone(),
                    OrbitPoint::Index(_) => unreachable!("validated in Engine::new"),
                })
                .collect();
            self.g.evaluate_points(&v, self.metric)
        }
    }

    fn star(&mut self, a: &OrbitPoint, b: &OrbitPoint) -> Result<f64, EvalError> {
        let mut pts = Vec::with_capacity(self.g.order() + 1);
        pts.push(a);
        pts.resize(self.g.order() + 1, b);
        self.value(&pts)
    }
}

// s(O(x, N)) for N = 0.. over a prefix of the iterates, capped so the
// multiset enumeration stays bounded.
fn orbit_diameters(eng: &mut Engine, iterates: &[OrbitPoint]) -> Result<Vec<f64>, EvalError> {
    let k = eng.g.order() + 1;
    let mut cap = iterates.len().min(DIAM_POINT_CAP);
    while cap > 1 && multiset_count(cap, k) > DIAM_TUPLE_CAP {
        cap -= 1;
    }
    let mut out = Vec::with_capacity(cap);
    let mut worst = 0.0f64;
    out.push(0.0);
    let mut pts: Vec<&OrbitPoint> = Vec::with_capacity(k);
    for new in 1..cap {
        // Only tuples touching the newest point can raise the maximum.
        let mut rest = vec![0usize; k - 1];
        loop {
            pts.clear();
            pts.extend(rest.iter().map(|&i| &iterates[i]));
            pts.push(&iterates[new]);
            worst = worst.max(eng.value(&pts)?);
            // Advance the multiset over {0..=new}.
            let mut pos = k - 1;
            loop {
                if pos == 0 {
                    rest.clear();
                    break;
                }
                pos -= 1;
                if rest[pos] < new {
                    let v = rest[pos] + 1;
                    for r in rest[pos..].iter_mut() {
                        *r = v;
                    }
                    break;
                }
            }
            if rest.is_empty() {
                break;
            }
        }
        out.push(worst);
    }
    Ok(out)
}

enum BoundRule {
    Geometric { lambda: f64 },
    QuasiRate { lambda: f64, n: f64 },
    Control { psi: PsiSpec, phi: PhiSpec },
}

impl BoundRule {
    fn bound(&self, k: usize, steps: &[f64]) -> f64 {
        match self {
            BoundRule::Geometric { lambda } => lambda.powi(k as i32) * steps[0],
            BoundRule::QuasiRate { lambda, n } => {
                (lambda / n).powi(k as i32) * (n / (1.0 - lambda)) * steps[0]
            }
            BoundRule::Control { psi, phi } => {
                if k == 0 {
                    return steps[0];
                }
                let prev = steps[k - 1];
                let target = psi.apply(prev) - phi.apply(prev);
                if target <= 0.0 {
                    0.0
                } else {
                    psi.invert(target)
                }
            }
        }
    }

    fn breach_kind(&self) -> BreachKind {
        match self {
            BoundRule::Control { .. } => BreachKind::ControlStep,
            _ => BreachKind::StepBound,
        }
    }
}

fn picard(
    mut eng: Engine,
    x0: OrbitPoint,
    budget: IterationBudget,
    rule: BoundRule,
) -> Result<OrbitTrace, FpError> {
    if !(budget.tol > 0.0 && budget.tol.is_finite()) {
        return Err(FpError::BadTolerance(budget.tol));
    }
    if budget.max_iter == 0 {
        return Err(FpError::ZeroIterations);
    }
    let mut iterates = vec![x0.clone()];
    let mut step_g = Vec::new();
    let mut bound_g = Vec::new();
    let mut stop_reason = StopReason::MaxIter;
    let mut breach = None;
    let mut cur = x0.clone();
    for k in 0..budget.max_iter {
        let next = eng.apply(&cur);
        let step = eng.star(&cur, &next)?;
        step_g.push(step);
        let bound = rule.bound(k, &step_g);
        bound_g.push(bound);
        iterates.push(next.clone());
        if violated(step, bound, BOUND_TOL) {
            breach = Some(BoundBreach { at: k, kind: rule.breach_kind(), lhs: step, rhs: bound });
            stop_reason = StopReason::BoundViolated;
            break;
        }
        if step <= budget.tol {
            stop_reason = StopReason::Converged;
            break;
        }
        cur = next;
    }
    let orbit_diameter = orbit_diameters(&mut eng, &iterates)?;
    Ok(OrbitTrace {
        start: x0,
        iterates,
        step_g,
        bound_g,
        orbit_diameter,
        stop_reason,
        rate_to_terminal: None,
        breach,
    })
}

fn non_contractive_trace(x0: OrbitPoint) -> OrbitTrace {
    OrbitTrace {
        start: x0.clone(),
        iterates: vec![x0],
        step_g: Vec::new(),
        bound_g: Vec::new(),
        orbit_diameter: vec![0.0],
        stop_reason: StopReason::NonContractive,
        rate_to_terminal: None,
        breach: None,
    }
}

/// Picard iteration under a plain contraction with certified factor
/// `lambda`. Stops once g(y_k, y_{k+1}, .., y_{k+1}) drops to the
/// tolerance; each step is checked against the a-priori bound
/// lambda^k times the first step, and a violated bound ends the run with
/// a diagnostic trace instead of an error. A factor outside [0, 1) returns
/// an empty trace marked non-contractive.
pub fn solve_banach(
    g: &GMetric,
    space: &IterationSpace,
    map: &SelfMap,
    x0: OrbitPoint,
    lambda: f64,
    budget: IterationBudget,
) -> Result<OrbitTrace, FpError> {
    let eng = Engine::new(g, space, map, &x0)?;
    if !(0.0..1.0).contains(&lambda) {
        return Ok(non_contractive_trace(x0));
    }
    picard(eng, x0, budget, BoundRule::Geometric { lambda })
}

/// Picard iteration under a quasi-contraction with certified factor
/// `lambda`. The per-step bound is (lambda/n)^k * n/(1-lambda) times the
/// first step, which also bounds the distance from the k-th iterate to the
/// fixed point; `rate_to_terminal` records that distance against the final
/// iterate, standing in for the unknown fixed point up to terminal error.
/// The orbit spread is checked against n/(1-lambda) times the first step.
pub fn solve_quasi(
    g: &GMetric,
    space: &IterationSpace,
    map: &SelfMap,
    x0: OrbitPoint,
    lambda: f64,
    budget: IterationBudget,
) -> Result<OrbitTrace, FpError> {
    let eng = Engine::new(g, space, map, &x0)?;
    if !(0.0..1.0).contains(&lambda) {
        return Ok(non_contractive_trace(x0));
    }
    let n = g.order() as f64;
    let mut trace = picard(eng, x0, budget, BoundRule::QuasiRate { lambda, n })?;

    let mut eng = Engine::new(g, space, map, &trace.start)?;
    let terminal = trace.iterates.last().expect("trace holds the start").clone();
    let mut rate = Vec::with_capacity(trace.step_g.len());
    for pt in trace.iterates.iter().take(trace.step_g.len()) {
        rate.push(eng.star(pt, &terminal)?);
    }
    trace.rate_to_terminal = Some(rate);

    if trace.breach.is_none() {
        if let Some(cap) = trace.bound_g.first().copied() {
            for (at, &s) in trace.orbit_diameter.iter().enumerate() {
                if violated(s, cap, BOUND_TOL) {
                    trace.breach = Some(BoundBreach {
                        at,
                        kind: BreachKind::OrbitDiameter,
                        lhs: s,
                        rhs: cap,
                    });
                    trace.stop_reason = StopReason::BoundViolated;
                    break;
                }
            }
        }
    }
    Ok(trace)
}

/// Nondecreasing gauges vanishing only at zero, used on the left of the
/// control inequality. All catalog members are invertible on their range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PsiSpec {
    Identity,
    Square,
    /// t / (1 + t), a bounded gauge with range [0, 1).
    Ratio,
}

impl PsiSpec {
    fn apply(self, t: f64) -> f64 {
        match self {
            PsiSpec::Identity => t,
            PsiSpec::Square => t * t,
            PsiSpec::Ratio => t / (1.0 + t),
        }
    }

    fn invert(self, y: f64) -> f64 {
        match self {
            PsiSpec::Identity => y,
            PsiSpec::Square => y.sqrt(),
            PsiSpec::Ratio => y / (1.0 - y),
        }
    }
}

/// Drop-off terms for the control inequality; the coefficient must lie in
/// (0, 1) so the term is positive away from zero without swallowing the
/// identity gauge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhiSpec {
    Linear { c: f64 },
    /// c * min(t^2, t): quadratic near zero, linear past one.
    ClampedSquare { c: f64 },
}

impl PhiSpec {
    fn apply(self, t: f64) -> f64 {
        match self {
            PhiSpec::Linear { c } => c * t,
            PhiSpec::ClampedSquare { c } => c * (t * t).min(t),
        }
    }

    fn coefficient(self) -> f64 {
        match self {
            PhiSpec::Linear { c } | PhiSpec::ClampedSquare { c } => c,
        }
    }
}

// Both gauges must vanish at zero and stay positive on a log-spaced grid
// spanning (0, 1e6]; the left gauge must also be nondecreasing along it.
fn validate_controls(psi: PsiSpec, phi: PhiSpec) -> Result<(), FpError> {
    let c = phi.coefficient();
    if !(c > 0.0 && c < 1.0) {
        return Err(FpError::BadControl(format!(
            "coefficient {c} is outside (0, 1); a zero coefficient makes the drop-off vanish everywhere"
        )));
    }
    if psi.apply(0.0) != 0.0 || phi.apply(0.0) != 0.0 {
        return Err(FpError::BadControl("gauges must vanish at zero".into()));
    }
    let mut prev = 0.0;
    for i in 0..=60 {
        let t = 10f64.powf(-9.0 + 0.25 * i as f64);
        let p = psi.apply(t);
        if !(p > prev) {
            return Err(FpError::BadControl(format!("left gauge is not increasing at {t}")));
        }
        if !(phi.apply(t) > 0.0) {
            return Err(FpError::BadControl(format!("drop-off vanishes at {t}")));
        }
        prev = p;
    }
    Ok(())
}

/// Picard iteration under the control-function inequality
/// psi(step_{k+1}) <= psi(step_k) - phi(step_k). The bound trace maps the
/// right side back through the inverse gauge, so `step_g <= bound_g` is
/// exactly the inequality; a step that breaks it ends the run with a
/// control breach, which is the evidence that the map does not satisfy
/// this control pair.
pub fn solve_psi_phi(
    g: &GMetric,
    space: &IterationSpace,
    map: &SelfMap,
    psi: PsiSpec,
    phi: PhiSpec,
    x0: OrbitPoint,
    budget: IterationBudget,
) -> Result<OrbitTrace, FpError> {
    validate_controls(psi, phi)?;
    let eng = Engine::new(g, space, map, &x0)?;
    picard(eng, x0, budget, BoundRule::Control { psi, phi })
}

/// A strict-decrease failure: the mapped tuple did not get strictly
/// cheaper. Equality counts, so the comparison is exact, with no
/// tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrictnessFailure {
    pub tuple: PointTuple,
    pub mapped: PointTuple,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WeakContractiveReport {
    /// f(x) = g(x, T(x), .., T(x)) per sample index.
    pub f_values: Vec<f64>,
    /// Lowest index attaining the minimum of f.
    pub argmin: usize,
    /// Set when f vanishes exactly at the argmin.
    pub fixed_point: Option<usize>,
    pub strictness_failures: Vec<StrictnessFailure>,
}

/// The finite-space argmin argument: on a finite sample the displacement
/// function f attains its minimum, and under strict decrease the minimizer
/// must be a fixed point. Scans every tuple with at least two distinct
/// entries for the strict decrease, so a fixed point is declared even when
/// the validation fails, and vice versa.
pub fn solve_weak_contractive(
    g: &GMetric,
    sample: &GroundSample,
    table: &[usize],
) -> Result<WeakContractiveReport, FpError> {
    validate_table(table, sample.size())?;
    g.compatible_with(sample)?;
    let m = sample.size();
    let n = g.order();

    let mut buf = Vec::with_capacity(n + 1);
    let mut star = |a: usize, b: usize| {
        buf.clear();
        buf.push(a);
        buf.resize(n + 1, b);
        buf.sort_unstable();
        g.eval_sorted(sample, &buf)
    };
    let f_values: Vec<f64> = (0..m).map(|x| star(x, table[x])).collect();
    let argmin = f_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("samples are never empty");
    let fixed_point = (f_values[argmin] == 0.0).then_some(argmin);

    let mut strictness_failures = Vec::new();
    let mut mapped = Vec::with_capacity(n + 1);
    crate::axioms::for_each_multiset(m, n + 1, |idx| {
        if idx.iter().all(|&i| i == idx[0]) {
            return;
        }
        mapped.clear();
        mapped.extend(idx.iter().map(|&i| table[i]));
        mapped.sort_unstable();
        let lhs = g.eval_sorted(sample, &mapped);
        let rhs = g.eval_sorted(sample, idx);
        if !(lhs < rhs) {
            strictness_failures.push(StrictnessFailure {
                tuple: tuple(idx),
                mapped: tuple(&mapped),
                lhs,
                rhs,
            });
        }
    });
    Ok(WeakContractiveReport { f_values, argmin, fixed_point, strictness_failures })
}

#[derive(Debug, Clone, Serialize)]
pub struct UniquenessReport {
    pub starts: Vec<OrbitPoint>,
    pub terminals: Vec<OrbitPoint>,
    /// Largest symmetric star distance between two terminals.
    pub max_terminal_gap: f64,
    pub all_converged: bool,
    /// True when every run converged and the terminals sit within
    /// gap_tol * (1 + scale) of each other, scale being the largest
    /// coordinate magnitude among terminals.
    pub coincide: bool,
}

/// Reruns the contraction solver from several random starts and checks
/// that all terminals coincide. Starts are drawn from the space bounds
/// (or as distinct indices); a map with many fixed points, such as the
/// identity, fails the probe by design.
#[allow(clippy::too_many_arguments)]
pub fn uniqueness_probe(
    g: &GMetric,
    space: &IterationSpace,
    map: &SelfMap,
    lambda: f64,
    budget: IterationBudget,
    trials: usize,
    rng_seed: u64,
    gap_tol: f64,
) -> Result<UniquenessReport, FpError> {
    if trials == 0 {
        return Err(FpError::ZeroBudget);
    }
    if !(gap_tol > 0.0 && gap_tol.is_finite()) {
        return Err(FpError::BadTolerance(gap_tol));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let starts: Vec<OrbitPoint> = match space {
        IterationSpace::Sample(sample) => {
            let m = sample.size();
            let mut order: Vec<usize> = (0..m).collect();
            for i in (1..m).rev() {
                order.swap(i, rng.gen_range(0..=i));
            }
            order.into_iter().take(trials).map(OrbitPoint::Index).collect()
        }
        IterationSpace::Scalars { lo, hi, .. } => (0..trials)
            .map(|_| OrbitPoint::Coords(vec![rng.gen_range(*lo..=*hi)]))
            .collect(),
        IterationSpace::Vectors { lo, hi, .. } => (0..trials)
            .map(|_| {
                OrbitPoint::Coords(
                    lo.iter().zip(hi).map(|(&l, &h)| rng.gen_range(l..=h)).collect(),
                )
            })
            .collect(),
    };

    let mut terminals = Vec::with_capacity(starts.len());
    let mut all_converged = true;
    for s in &starts {
        let trace = solve_banach(g, space, map, s.clone(), lambda, budget)?;
        all_converged &= trace.stop_reason == StopReason::Converged;
        terminals.push(trace.terminal().clone());
    }

    let mut eng = Engine::new(g, space, map, &starts[0])?;
    let mut max_terminal_gap = 0.0f64;
    for i in 0..terminals.len() {
        for j in i + 1..terminals.len() {
            let fwd = eng.star(&terminals[i], &terminals[j])?;
            let bwd = eng.star(&terminals[j], &terminals[i])?;
            max_terminal_gap = max_terminal_gap.max(fwd).max(bwd);
        }
    }
    let scale = terminals
        .iter()
        .map(|t| match t {
            OrbitPoint::Coords(c) => c.iter().fold(0.0f64, |a, &x| a.max(x.abs())),
            OrbitPoint::Index(_) => 0.0,
        })
        .fold(0.0f64, f64::max);
    let coincide = all_converged && max_terminal_gap <= gap_tol * (1.0 + scale);
    Ok(UniquenessReport { starts, terminals, max_terminal_gap, all_converged, coincide })
}

struct LambdaCtx<'a> {
    g: &'a GMetric,
    sample: &'a GroundSample,
    table: Option<&'a [usize]>,
    map: &'a SelfMap,
    metric: CoordMetric,
    buf: Vec<usize>,
}

impl<'a> LambdaCtx<'a> {
    fn new(g: &'a GMetric, sample: &'a GroundSample, map: &'a SelfMap) -> Result<Self, FpError> {
        let mut metric = CoordMetric::Euclidean;
        let table = match map {
            SelfMap::Table { map } => {
                validate_table(map, sample.size())?;
                Some(map.as_slice())
            }
            SelfMap::Affine { .. } | SelfMap::AffineVec { .. } => {
                let dim = sample
                    .dim()
                    .ok_or(FpError::MapSpaceMismatch("affine maps need coordinate points"))?;
                let want = match map {
                    SelfMap::Affine { .. } => 1,
                    SelfMap::AffineVec { a, b } => {
                        if a.len() != b.len() {
                            return Err(FpError::AffineShape { a: a.len(), b: b.len() });
                        }
                        a.len()
                    }
                    SelfMap::Table { .. } => unreachable!(),
                };
                if dim != want {
                    return Err(FpError::MapSpaceMismatch("map and point dimensions differ"));
                }
                metric = match sample.source() {
                    MetricSource::Euclidean => CoordMetric::Euclidean,
                    MetricSource::L1 => CoordMetric::L1,
                    MetricSource::Linf => CoordMetric::Linf,
                    MetricSource::Explicit(_) => {
                        return Err(FpError::MapSpaceMismatch(
                            "affine maps need a coordinate metric, not an explicit matrix",
                        ))
                    }
                };
                None
            }
        };
        if table.is_some() {
            g.compatible_with(sample)?;
        }
        Ok(Self { g, sample, table, map, metric, buf: Vec::new() })
    }

    // Items are (sample index, mapped?) pairs forming one tuple.
    fn eval(&mut self, items: &[(usize, bool)]) -> Result<f64, EvalError> {
        if let Some(table) = self.table {
            self.buf.clear();
            self.buf.extend(items.iter().map(|&(i, m)| if m { table[i] } else { i }));
            self.buf.sort_unstable();
            Ok(self.g.eval_sorted(self.sample, &self.buf))
        } else {
            let pts: Vec<Vec<f64>> = items
                .iter()
                .map(|&(i, m)| {
                    let c = self.sample.coords(i).expect("checked in LambdaCtx::new");
                    if m {
                        apply_affine(self.map, c)
                    } else {
                        c.to_vec()
                    }
                })
                .collect();
            self.g.evaluate_points(&pts, self.metric)
        }
    }
}

struct RatioTracker {
    regime: Regime,
    lambda_hat: f64,
    samples_checked: u64,
    witness: Option<RatioWitness>,
    unbounded: bool,
}

impl RatioTracker {
    fn new(regime: Regime) -> Self {
        Self { regime, lambda_hat: 0.0, samples_checked: 0, witness: None, unbounded: false }
    }

    fn feed(&mut self, witness: &[usize], lhs: f64, rhs: f64) {
        self.samples_checked += 1;
        let ratio = if rhs > 0.0 {
            lhs / rhs
        } else if lhs > 0.0 {
            self.unbounded = true;
            f64::INFINITY
        } else {
            return;
        };
        if ratio > self.lambda_hat || self.witness.is_none() {
            self.lambda_hat = self.lambda_hat.max(ratio);
            self.witness = Some(RatioWitness { tuple: tuple(witness), lhs, rhs });
        }
    }

    fn finish(self) -> ContractionCertificate {
        ContractionCertificate {
            regime: self.regime,
            lambda_hat: self.lambda_hat,
            samples_checked: self.samples_checked,
            worst_ratio_witness: self.witness,
            non_contractive: self.unbounded || self.lambda_hat >= 1.0,
        }
    }
}

/// Estimates the contraction factor of a self-map under one regime by
/// scanning tuples from the sample: `lambda_hat` is the worst left/right
/// ratio, and the certificate flags non-contractive evidence instead of
/// failing. Tuples where both sides vanish carry no information and are
/// skipped; a vanishing right side against a positive left side admits no
/// factor at all and reports infinity (in JSON that field becomes null).
/// Enumeration is exhaustive when the tuple space fits in `budget`,
/// otherwise a fixed-seed stress kit of the same size.
pub fn estimate_lambda(
    g: &GMetric,
    sample: &GroundSample,
    map: &SelfMap,
    regime: Regime,
    budget: usize,
) -> Result<ContractionCertificate, FpError> {
    if budget == 0 {
        return Err(FpError::ZeroBudget);
    }
    let mut ctx = LambdaCtx::new(g, sample, map)?;
    let m = sample.size();
    let n = g.order();
    let k = n + 1;
    let mut tracker = RatioTracker::new(regime);

    match regime {
        Regime::Banach | Regime::WeakContractive | Regime::Quasi | Regime::BanachWeakI => {
            let cfg = CheckConfig {
                exhaustive: multiset_count(m, k) <= budget as u64,
                sample_budget: budget,
                rng_seed: 0,
                ..CheckConfig::default()
            };
            let mut items: Vec<(usize, bool)> = Vec::with_capacity(k);
            for idx in gather_multisets(m, k, &cfg, SALT_LAMBDA) {
                items.clear();
                items.extend(idx.iter().map(|&i| (i, false)));
                let rhs = ctx.eval(&items)?;
                match regime {
                    Regime::Banach | Regime::WeakContractive => {
                        for it in items.iter_mut() {
                            it.1 = true;
                        }
                        let lhs = ctx.eval(&items)?;
                        tracker.feed(&idx, lhs, rhs);
                    }
                    Regime::BanachWeakI => {
                        // Map one entry at a time; distinct values suffice
                        // since duplicates give the same tuple.
                        for pos in 0..k {
                            if pos > 0 && idx[pos] == idx[pos - 1] {
                                continue;
                            }
                            items[pos].1 = true;
                            let lhs = ctx.eval(&items)?;
                            items[pos].1 = false;
                            tracker.feed(&idx, lhs, rhs);
                        }
                    }
                    Regime::Quasi => {
                        let mut cand = rhs;
                        let mut pair = Vec::with_capacity(k);
                        for (ai, &a) in idx.iter().enumerate() {
                            if ai > 0 && idx[ai - 1] == a {
                                continue;
                            }
                            for (bi, &b) in idx.iter().enumerate() {
                                if bi > 0 && idx[bi - 1] == b {
                                    continue;
                                }
                                pair.clear();
                                pair.push((a, false));
                                pair.resize(k, (b, true));
                                cand = cand.max(ctx.eval(&pair)?);
                            }
                        }
                        for it in items.iter_mut() {
                            it.1 = true;
                        }
                        let lhs = ctx.eval(&items)?;
                        tracker.feed(&idx, lhs, cand / n as f64);
                    }
                    _ => unreachable!(),
                }
            }
        }
        Regime::BanachWeakII | Regime::PsiPhi => {
            let total = m * m;
            let stride = total.div_ceil(budget).max(1);
            let mut items: Vec<(usize, bool)> = Vec::with_capacity(k);
            let mut star_idx = Vec::with_capacity(k);
            for flat in (0..total).step_by(stride) {
                let (x, y) = (flat / m, flat % m);
                items.clear();
                items.push((x, false));
                items.resize(k, (y, false));
                let rhs = ctx.eval(&items)?;
                for it in items.iter_mut() {
                    it.1 = true;
                }
                let lhs = ctx.eval(&items)?;
                star_idx.clear();
                star_idx.push(x);
                star_idx.resize(k, y);
                tracker.feed(&star_idx, lhs, rhs);
            }
        }
    }
    Ok(tracker.finish())
}
