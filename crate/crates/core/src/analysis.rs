//! The metric-space toolbox on top of a construction and a finite sample:
//! balls, the ordinary metrics a g-metric induces, the ball sandwich between
//! the two topologies, finite-prefix sequence diagnostics, greedy covers,
//! and a numeric joint-continuity probe.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::axioms::{for_each_multiset, multiset_count, sort_reports, tuple, two_block, violated};
use crate::axioms::{AxiomId, CheckConfig, ViolationReport};
use crate::construct::{EvalError, GMetric};
use crate::space::GroundSample;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),
    #[error("block size {s} is out of range 1..={max}")]
    BadBlock { s: usize, max: usize },
    #[error("sequence prefix is empty")]
    EmptyPrefix,
    #[error("diagnostics order {diag} does not match the construction order {g}")]
    OrderMismatch { diag: usize, g: usize },
    #[error("sequence diagnostics need a candidate limit")]
    MissingLimit,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// A g-ball: the points whose star value from the center stays strictly
/// below the radius.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GBall {
    pub center: usize,
    pub radius: f64,
    pub members: BTreeSet<usize>,
}

impl GBall {
    pub fn contains(&self, index: usize) -> bool {
        self.members.contains(&index)
    }
}

/// A finite stand-in for a sequence: an ordered run of sample indices and
/// an optional limit candidate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceDiagnostics {
    pub prefix: Vec<usize>,
    pub candidate_limit: Option<usize>,
    pub order: usize,
}

// Sorted tuple for g(a, b, ..., b), the "star" value between two points.
fn star_tuple(buf: &mut Vec<usize>, a: usize, b: usize, n: usize) {
    two_block(buf, a, 1, b, n);
}

struct Ctx<'a> {
    g: &'a GMetric,
    sample: &'a GroundSample,
    buf: Vec<usize>,
}

impl<'a> Ctx<'a> {
    fn new(g: &'a GMetric, sample: &'a GroundSample) -> Result<Self, AnalysisError> {
        g.compatible_with(sample)?;
        Ok(Self { g, sample, buf: Vec::with_capacity(g.order() + 1) })
    }

    fn check_index(&self, index: usize) -> Result<(), AnalysisError> {
        let size = self.sample.size();
        if index >= size {
            return Err(EvalError::IndexOutOfRange { index, size }.into());
        }
        Ok(())
    }

    fn block(&mut self, a: usize, ca: usize, b: usize, cb: usize) -> f64 {
        two_block(&mut self.buf, a, ca, b, cb);
        self.g.eval_sorted(self.sample, &self.buf)
    }

    fn star(&mut self, a: usize, b: usize) -> f64 {
        self.block(a, 1, b, self.g.order())
    }

    // star values for every ordered pair, computed once per operation.
    fn star_matrix(&mut self) -> Vec<Vec<f64>> {
        let m = self.sample.size();
        (0..m).map(|a| (0..m).map(|b| self.star(a, b)).collect()).collect()
    }

    fn value_sorted(&mut self, entries: &[usize]) -> f64 {
        self.buf.clear();
        self.buf.extend_from_slice(entries);
        self.buf.sort_unstable();
        self.g.eval_sorted(self.sample, &self.buf)
    }
}

/// Collects the g-ball around `center`: membership by strict inequality,
/// so the center always belongs (its star value is zero).
pub fn g_ball(
    g: &GMetric,
    sample: &GroundSample,
    center: usize,
    radius: f64,
) -> Result<GBall, AnalysisError> {
    if !(radius > 0.0) {
        return Err(AnalysisError::NonPositiveRadius(radius));
    }
    let mut ctx = Ctx::new(g, sample)?;
    ctx.check_index(center)?;
    let members = (0..sample.size()).filter(|&y| ctx.star(center, y) < radius).collect();
    Ok(GBall { center, radius, members })
}

/// How to collapse a g-metric into an ordinary two-point distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DerivedVariant {
    /// d(x, y) = g(x^s, y^(n+1-s)) + g(y^s, x^(n+1-s)).
    TwoSidedBlock { s: usize },
    /// d(x, y) = sum over s = 1..n of g(x^s, y^(n+1-s)).
    MultiplicitySum,
    /// d(x, y) = the largest g-value over tuples drawn from {x, y}.
    TupleMax,
}

/// Pairwise distance matrix induced on the sample by the chosen variant.
/// Each variant yields an ordinary metric whenever the construction is a
/// g-metric; feed the result to `check_metric_axioms` to verify.
pub fn derived_metric(
    g: &GMetric,
    sample: &GroundSample,
    variant: DerivedVariant,
) -> Result<Vec<Vec<f64>>, AnalysisError> {
    let n = g.order();
    let k = n + 1;
    if let DerivedVariant::TwoSidedBlock { s } = variant {
        if s < 1 || s > n {
            return Err(AnalysisError::BadBlock { s, max: n });
        }
    }
    let mut ctx = Ctx::new(g, sample)?;
    let m = sample.size();
    let mut d = vec![vec![0.0; m]; m];
    for x in 0..m {
        for y in 0..m {
            if x == y {
                continue;
            }
            d[x][y] = match variant {
                DerivedVariant::TwoSidedBlock { s } => {
                    ctx.block(x, s, y, k - s) + ctx.block(y, s, x, k - s)
                }
                DerivedVariant::MultiplicitySum => {
                    (1..=n).map(|s| ctx.block(x, s, y, k - s)).sum()
                }
                DerivedVariant::TupleMax => (0..=k)
                    .map(|s| ctx.block(x, s, y, k - s))
                    .fold(0.0, f64::max),
            };
        }
    }
    Ok(d)
}

/// Verifies the sandwich B_g(c, r/(n+1)) ⊆ B_d(c, r) ⊆ B_g(c, r), where d
/// is the symmetric star metric g(x, y, …, y) + g(y, x, …, x).
///
/// A broken inclusion always traces back to the one-vs-rest multiplicity
/// bound between the two star orientations, so reports carry that family id
/// with both stars as witnesses.
pub fn check_ball_inclusion(
    g: &GMetric,
    sample: &GroundSample,
    centers: &[usize],
    radii: &[f64],
) -> Result<Vec<ViolationReport>, AnalysisError> {
    let n = g.order();
    let mut ctx = Ctx::new(g, sample)?;
    let mut reports = Vec::new();
    for (&c, &r) in centers.iter().zip(radii) {
        if !(r > 0.0) {
            return Err(AnalysisError::NonPositiveRadius(r));
        }
        ctx.check_index(c)?;
        for y in 0..sample.size() {
            let out = ctx.star(c, y);
            let back = ctx.star(y, c);
            let d = out + back;
            let witness = || {
                let mut t = Vec::new();
                star_tuple(&mut t, c, y, n);
                let lhs_t = tuple(&t);
                star_tuple(&mut t, y, c, n);
                vec![lhs_t, tuple(&t)]
            };
            if out < r / (n as f64 + 1.0) && d >= r {
                reports.push(ViolationReport::new(
                    AxiomId::Bp3,
                    witness(),
                    None,
                    d,
                    (n as f64 + 1.0) * out,
                ));
            }
            if d < r && out >= r {
                reports.push(ViolationReport::new(
                    AxiomId::Bp3,
                    witness(),
                    None,
                    (n as f64 + 1.0) / n as f64 * out,
                    d,
                ));
            }
        }
    }
    sort_reports(&mut reports);
    Ok(reports)
}

/// The three ball facts: a cheap tuple with at least three distinct entries
/// keeps all its entries inside the ball around any of them; the same for
/// every tuple under multiplicity independence (checked only when the
/// construction claims it); and inside a two-ball intersection the explicit
/// margin min(r_i - g(x_i, y, …, y)) re-centers a ball that stays inside.
pub fn check_ball_proposition(
    g: &GMetric,
    sample: &GroundSample,
    cfg: &CheckConfig,
) -> Result<Vec<ViolationReport>, AnalysisError> {
    let n = g.order();
    let m = sample.size();
    let tol = cfg.tolerance;
    let mut ctx = Ctx::new(g, sample)?;
    let stars = ctx.star_matrix();
    let mi = g.multiplicity_independent();
    let mut reports = Vec::new();

    // Items (1) and (2): entry membership reduces to the star value never
    // exceeding the tuple value, which makes the radius quantifier vacuous.
    let mut star_buf = Vec::with_capacity(n + 1);
    for_each_multiset(m, n + 1, |idx| {
        let mut support = idx.to_vec();
        support.dedup();
        if support.len() < 2 || (support.len() == 2 && !mi) {
            return;
        }
        let axiom = if support.len() >= 3 { AxiomId::G3 } else { AxiomId::Mi };
        let v = ctx.value_sorted(idx);
        for &a in &support {
            for &b in &support {
                if a == b {
                    continue;
                }
                if violated(stars[a][b], v, tol) {
                    star_tuple(&mut star_buf, a, b, n);
                    reports.push(ViolationReport::new(axiom, vec![tuple(&star_buf), tuple(idx)], None, stars[a][b], v));
                }
            }
        }
    });

    // Item (3): radii drawn from the spread of observed star values.
    let mut ladder: Vec<f64> = stars
        .iter()
        .flatten()
        .copied()
        .filter(|&v| v > 0.0)
        .collect();
    ladder.sort_by(f64::total_cmp);
    let pick = |q: f64| ladder[(q * (ladder.len() - 1) as f64) as usize];
    let radii = if ladder.is_empty() {
        vec![1.0]
    } else {
        let mut r = vec![pick(0.25), pick(0.5), pick(0.75), pick(1.0) * 1.25];
        r.dedup();
        r
    };
    for x1 in 0..m {
        for x2 in 0..m {
            for &r1 in &radii {
                for &r2 in &radii {
                    for y in 0..m {
                        if !(stars[x1][y] < r1 && stars[x2][y] < r2) {
                            continue;
                        }
                        let delta = (r1 - stars[x1][y]).min(r2 - stars[x2][y]);
                        for z in 0..m {
                            if stars[y][z] >= delta {
                                continue;
                            }
                            for (xi, ri) in [(x1, r1), (x2, r2)] {
                                if stars[xi][z] < ri {
                                    continue;
                                }
                                // Membership failed, so the mediator bound
                                // g(x_i, z, ...) <= g(x_i, y, ...) + g(y, z, ...)
                                // must have broken.
                                star_tuple(&mut star_buf, xi, z, n);
                                let lhs_t = tuple(&star_buf);
                                reports.push(ViolationReport::new(
                                    AxiomId::Bp2,
                                    vec![lhs_t, tuple(&vec![y; n + 1])],
                                    None,
                                    stars[xi][z],
                                    stars[xi][y] + stars[y][z],
                                ));
                            }
                        }
                    }
                }
            }
        }
    }

    sort_reports(&mut reports);
    reports.dedup();
    Ok(reports)
}

/// Satisfaction of one convergence criterion at one epsilon: the least
/// cutoff N (a prefix position) past which every checked combination stays
/// below epsilon, or None when even the final position fails.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonVerdict {
    pub epsilon: f64,
    /// Mixed tail tuples around the limit (the definition itself).
    pub full_n: Option<usize>,
    /// Plain ball membership of single tail points.
    pub ball_n: Option<usize>,
    /// Block forms, one entry per block size s = 1..=n.
    pub block_n: Vec<Option<usize>>,
    pub agree: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub order: usize,
    pub prefix_len: usize,
    pub candidate_limit: usize,
    pub per_epsilon: Vec<EpsilonVerdict>,
    pub agree_on_all: bool,
}

fn least_cutoff(worst: &[f64], eps: f64) -> Option<usize> {
    worst.iter().position(|&w| w < eps)
}

// worst[N] = max value over multisets of positions drawn from N.. of size
// `s`, padded to full arity by `pad`, where positions map through `prefix`.
fn suffix_worst(
    ctx: &mut Ctx,
    prefix: &[usize],
    s: usize,
    pad: usize,
    pad_count: usize,
) -> Vec<f64> {
    let kk = prefix.len();
    let mut worst_at_min = vec![f64::NEG_INFINITY; kk];
    let mut entries = Vec::with_capacity(s + pad_count);
    for_each_multiset(kk, s, |pos| {
        entries.clear();
        entries.extend(pos.iter().map(|&p| prefix[p]));
        entries.extend(std::iter::repeat(pad).take(pad_count));
        let v = ctx.value_sorted(&entries);
        if v > worst_at_min[pos[0]] {
            worst_at_min[pos[0]] = v;
        }
    });
    let mut acc = f64::NEG_INFINITY;
    for w in worst_at_min.iter_mut().rev() {
        acc = acc.max(*w);
        *w = acc;
    }
    worst_at_min
}

/// Evaluates the three equivalent convergence criteria on a finite prefix:
/// mixed tail tuples around the candidate limit, tail ball membership, and
/// the s-block forms. Reports the least workable cutoff per criterion and
/// whether the criteria agree at every epsilon; a finite prefix can only
/// ever be consistent with convergence, never certify it.
pub fn diagnose_convergence(
    g: &GMetric,
    sample: &GroundSample,
    diag: &SequenceDiagnostics,
    epsilons: &[f64],
) -> Result<ConvergenceReport, AnalysisError> {
    let n = g.order();
    if diag.order != n {
        return Err(AnalysisError::OrderMismatch { diag: diag.order, g: n });
    }
    if diag.prefix.is_empty() {
        return Err(AnalysisError::EmptyPrefix);
    }
    let limit = diag.candidate_limit.ok_or(AnalysisError::MissingLimit)?;
    let mut ctx = Ctx::new(g, sample)?;
    ctx.check_index(limit)?;
    for &p in &diag.prefix {
        ctx.check_index(p)?;
    }
    for &e in epsilons {
        if !(e > 0.0) {
            return Err(AnalysisError::NonPositiveEpsilon(e));
        }
    }

    let kk = diag.prefix.len();
    // Ball membership is the star from the limit, not toward it, so it is
    // not the s = n block column.
    let mut ball_worst = vec![f64::NEG_INFINITY; kk];
    for (i, &p) in diag.prefix.iter().enumerate() {
        ball_worst[i] = ctx.star(limit, p);
    }
    let mut acc = f64::NEG_INFINITY;
    for w in ball_worst.iter_mut().rev() {
        acc = acc.max(*w);
        *w = acc;
    }
    let blocks: Vec<Vec<f64>> =
        (1..=n).map(|s| suffix_worst(&mut ctx, &diag.prefix, s, limit, n + 1 - s)).collect();

    let per_epsilon: Vec<EpsilonVerdict> = epsilons
        .iter()
        .map(|&epsilon| {
            let full_n = least_cutoff(&blocks[n - 1], epsilon);
            let ball_n = least_cutoff(&ball_worst, epsilon);
            let block_n: Vec<Option<usize>> =
                blocks.iter().map(|w| least_cutoff(w, epsilon)).collect();
            let agree = block_n
                .iter()
                .chain([&full_n, &ball_n])
                .all(|v| v.is_some() == full_n.is_some());
            EpsilonVerdict { epsilon, full_n, ball_n, block_n, agree }
        })
        .collect();
    let agree_on_all = per_epsilon.iter().all(|v| v.agree);
    Ok(ConvergenceReport {
        order: n,
        prefix_len: kk,
        candidate_limit: limit,
        per_epsilon,
        agree_on_all,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CauchyEpsilonVerdict {
    pub epsilon: f64,
    /// Mixed tuples drawn entirely from the tail (the definition itself).
    pub full_n: Option<usize>,
    /// Consecutive-step values g(x_k, x_{k+1}, …, x_{k+1}).
    pub consecutive_n: Option<usize>,
    /// Two-index block forms g(x_k^s, x_l^(n+1-s)), one entry per s.
    pub block_n: Vec<Option<usize>>,
    pub agree: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CauchyReport {
    pub order: usize,
    pub prefix_len: usize,
    /// g(x_k, x_{k+1}, …, x_{k+1}) along the prefix.
    pub consecutive: Vec<f64>,
    pub per_epsilon: Vec<CauchyEpsilonVerdict>,
    pub agree_on_all: bool,
    /// Set when the criteria disagree at some tested epsilon: consecutive
    /// decay alone is equivalent to the Cauchy property only in the limit,
    /// and slowly drifting prefixes (harmonic-style) expose the gap.
    pub caveat: Option<String>,
    /// True when the full-tuple scan ran on a thinned tail because the
    /// multiset space was too large.
    pub full_thinned: bool,
}

const CAUCHY_FULL_CAP: u64 = 2_000_000;

/// Evaluates the three Cauchy criteria on a finite prefix and flags
/// disagreements. Epsilons are drawn from the observed consecutive values,
/// spanning from above their maximum down to a millionth of it.
///
/// Cutoffs range only over windows holding at least three prefix points:
/// past that, every criterion collapses onto the final pair and the
/// comparison carries no information. Within that window a slowly drifting
/// prefix can satisfy the consecutive criterion while the tail spread stays
/// wide, which is exactly the gap the caveat reports: consecutive decay is
/// necessary but not sufficient, and no finite chain of split-triangle
/// steps closes it because the telescoped bound grows with the index gap.
pub fn diagnose_cauchy(
    g: &GMetric,
    sample: &GroundSample,
    diag: &SequenceDiagnostics,
) -> Result<CauchyReport, AnalysisError> {
    let n = g.order();
    if diag.order != n {
        return Err(AnalysisError::OrderMismatch { diag: diag.order, g: n });
    }
    if diag.prefix.is_empty() {
        return Err(AnalysisError::EmptyPrefix);
    }
    let mut ctx = Ctx::new(g, sample)?;
    for &p in &diag.prefix {
        ctx.check_index(p)?;
    }
    let kk = diag.prefix.len();

    // Cutoffs must leave a window of at least three points.
    let window = kk.saturating_sub(2);

    let consecutive: Vec<f64> =
        (0..kk.saturating_sub(1)).map(|i| ctx.star(diag.prefix[i], diag.prefix[i + 1])).collect();
    let mut consec_worst = consecutive.clone();
    let mut acc = f64::NEG_INFINITY;
    for w in consec_worst.iter_mut().rev() {
        acc = acc.max(*w);
        *w = acc;
    }

    // Two-index blocks: worst over l >= k >= N by suffix scan on min(k, l).
    let mut blocks = Vec::with_capacity(n);
    for s in 1..=n {
        let mut worst = vec![f64::NEG_INFINITY; kk];
        let mut t = Vec::with_capacity(n + 1);
        for a in 0..kk {
            for b in 0..kk {
                two_block(&mut t, diag.prefix[a], s, diag.prefix[b], n + 1 - s);
                let v = ctx.g.eval_sorted(ctx.sample, &t);
                let lo = a.min(b);
                if v > worst[lo] {
                    worst[lo] = v;
                }
            }
        }
        let mut acc = f64::NEG_INFINITY;
        for w in worst.iter_mut().rev() {
            acc = acc.max(*w);
            *w = acc;
        }
        blocks.push(worst);
    }

    // Full mixed tuples from the tail; thin the positions when the multiset
    // space explodes.
    let count = multiset_count(kk, n + 1);
    let stride = if count > CAUCHY_FULL_CAP {
        let mut stride = 2;
        while multiset_count(kk / stride + 1, n + 1) > CAUCHY_FULL_CAP {
            stride += 1;
        }
        stride
    } else {
        1
    };
    let full_thinned = stride > 1;
    let positions: Vec<usize> = (0..kk).step_by(stride).collect();
    let thin_prefix: Vec<usize> = positions.iter().map(|&p| diag.prefix[p]).collect();
    let thin_worst = suffix_worst(&mut ctx, &thin_prefix, n + 1, 0, 0);
    // Re-spread onto true positions: a cutoff N uses the first thinned
    // position at or past N.
    let full_worst: Vec<f64> = (0..kk)
        .map(|cut| {
            match positions.iter().position(|&p| p >= cut) {
                Some(i) => thin_worst[i],
                None => f64::NEG_INFINITY,
            }
        })
        .collect();

    let base = consecutive.iter().fold(0.0f64, |a, &b| a.max(b));
    let epsilons: Vec<f64> = if base > 0.0 {
        vec![base * 1.1, base * 0.3, base * 1e-2, base * 1e-4, base * 1e-6]
    } else {
        vec![1e-9]
    };

    let per_epsilon: Vec<CauchyEpsilonVerdict> = epsilons
        .iter()
        .map(|&epsilon| {
            let full_n = least_cutoff(&full_worst[..window.min(full_worst.len())], epsilon);
            let consecutive_n = least_cutoff(&consec_worst[..window.min(consec_worst.len())], epsilon);
            let block_n: Vec<Option<usize>> =
                blocks.iter().map(|w| least_cutoff(&w[..window.min(w.len())], epsilon)).collect();
            let agree = block_n
                .iter()
                .chain([&full_n, &consecutive_n])
                .all(|v| v.is_some() == full_n.is_some());
            CauchyEpsilonVerdict { epsilon, full_n, consecutive_n, block_n, agree }
        })
        .collect();
    let agree_on_all = per_epsilon.iter().all(|v| v.agree);
    let caveat = (!agree_on_all).then(|| {
        "criteria disagree at some tested epsilon; consecutive decay on a finite prefix \
         does not bound tail spread"
            .to_string()
    });
    Ok(CauchyReport {
        order: n,
        prefix_len: kk,
        consecutive,
        per_epsilon,
        agree_on_all,
        caveat,
        full_thinned,
    })
}

/// Greedy cover: walks the sample in index order, opening a ball on each
/// point not yet covered. The result is a valid eps-net, minimal under the
/// greedy order but not globally.
pub fn epsilon_net(
    g: &GMetric,
    sample: &GroundSample,
    eps: f64,
) -> Result<Vec<usize>, AnalysisError> {
    if !(eps > 0.0) {
        return Err(AnalysisError::NonPositiveEpsilon(eps));
    }
    let mut ctx = Ctx::new(g, sample)?;
    let m = sample.size();
    let mut covered = vec![false; m];
    let mut net = Vec::new();
    for a in 0..m {
        if covered[a] {
            continue;
        }
        net.push(a);
        for y in 0..m {
            if !covered[y] && ctx.star(a, y) < eps {
                covered[y] = true;
            }
        }
    }
    Ok(net)
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuityReport {
    pub pairs_checked: usize,
    /// Largest lhs - rhs seen; at most zero on a clean run.
    pub worst_slack: f64,
    pub violations: Vec<ViolationReport>,
}

const SALT_CONTINUITY: u64 = 0x6a_63;

/// Numeric joint-continuity probe: perturbing each tuple entry moves the
/// value by no more than the larger of the two summed star gaps,
/// |g(X) - g(X')| <= max(Σ g(x_i', x_i, …, x_i), Σ g(x_i, x_i', …, x_i')).
/// The bound needs only permutation invariance and the split triangle, so
/// it holds for every catalog construction, multiplicity-independent or not.
pub fn check_joint_continuity(
    g: &GMetric,
    sample: &GroundSample,
    cfg: &CheckConfig,
) -> Result<ContinuityReport, AnalysisError> {
    let n = g.order();
    let m = sample.size();
    let mut ctx = Ctx::new(g, sample)?;
    let stars = ctx.star_matrix();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed ^ SALT_CONTINUITY);
    let pairs = cfg.sample_budget.clamp(1, 10_000);
    let mut worst_slack = f64::NEG_INFINITY;
    let mut violations = Vec::new();
    for _ in 0..pairs {
        let x: Vec<usize> = (0..n + 1).map(|_| rng.gen_range(0..m)).collect();
        let xp: Vec<usize> = x
            .iter()
            .map(|&e| if rng.gen_bool(0.5) { rng.gen_range(0..m) } else { e })
            .collect();
        let lhs = (ctx.value_sorted(&x) - ctx.value_sorted(&xp)).abs();
        let fwd: f64 = x.iter().zip(&xp).map(|(&a, &b)| stars[b][a]).sum();
        let bwd: f64 = x.iter().zip(&xp).map(|(&a, &b)| stars[a][b]).sum();
        let rhs = fwd.max(bwd);
        worst_slack = worst_slack.max(lhs - rhs);
        if violated(lhs, rhs, cfg.tolerance) {
            violations.push(ViolationReport::new(AxiomId::Bp5, vec![tuple(&x), tuple(&xp)], None, lhs, rhs));
        }
    }
    sort_reports(&mut violations);
    violations.dedup();
    Ok(ContinuityReport { pairs_checked: pairs, worst_slack, violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::axioms::check_metric_axioms;
    use crate::space::MetricSource;

    fn scalars(values: &[f64]) -> GroundSample {
        GroundSample::scalars(values, MetricSource::L1).unwrap()
    }

    fn cfg() -> CheckConfig {
        CheckConfig::default()
    }

    #[test]
    fn ball_membership_is_strict() {
        let s = scalars(&[0.0, 0.5, 2.0]);
        let g = GMetric::diameter(2).unwrap();
        let ball = g_ball(&g, &s, 0, 1.0).unwrap();
        assert_eq!(ball.members, BTreeSet::from([0, 1]));
        // Radius exactly at a star value excludes the point.
        let edge = g_ball(&g, &s, 0, 0.5).unwrap();
        assert_eq!(edge.members, BTreeSet::from([0]));

        let d = GMetric::discrete(2).unwrap();
        let tight = g_ball(&d, &s, 1, 0.5).unwrap();
        assert_eq!(tight.members, BTreeSet::from([1]));

        assert!(g_ball(&g, &s, 0, 0.0).is_err());
        assert!(g_ball(&g, &s, 9, 1.0).is_err());
    }

    #[test]
    fn derived_metrics_match_closed_forms() {
        let s = scalars(&[0.0, 1.0, 3.0]);
        let g = GMetric::diameter(2).unwrap();
        let d = derived_metric(&g, &s, DerivedVariant::TwoSidedBlock { s: 1 }).unwrap();
        for (x, vx) in [0.0f64, 1.0, 3.0].iter().enumerate() {
            for (y, vy) in [0.0f64, 1.0, 3.0].iter().enumerate() {
                assert_eq!(d[x][y], 2.0 * (vx - vy).abs());
            }
        }

        let disc = GMetric::discrete(3).unwrap();
        let d = derived_metric(&disc, &s, DerivedVariant::TupleMax).unwrap();
        for x in 0..3 {
            for y in 0..3 {
                assert_eq!(d[x][y], if x == y { 0.0 } else { 1.0 });
            }
        }

        assert!(derived_metric(&g, &s, DerivedVariant::TwoSidedBlock { s: 3 }).is_err());
    }

    #[test]
    fn derived_matrices_pass_the_metric_axioms() {
        let s = scalars(&[0.0, 0.7, 1.9, 4.0]);
        for g in [
            GMetric::discrete(3).unwrap(),
            GMetric::diameter(3).unwrap(),
            GMetric::max(3).unwrap(),
            GMetric::average(3).unwrap(),
            GMetric::shortest_path(2).unwrap(),
        ] {
            let n = g.order();
            for variant in [
                DerivedVariant::TwoSidedBlock { s: 1 },
                DerivedVariant::TwoSidedBlock { s: n },
                DerivedVariant::MultiplicitySum,
                DerivedVariant::TupleMax,
            ] {
                let d = derived_metric(&g, &s, variant).unwrap();
                let reports = check_metric_axioms(&d, &cfg());
                assert!(reports.is_empty(), "{variant:?}: {reports:?}");
            }
        }
    }

    #[test]
    fn ball_sandwich_holds_on_the_catalog() {
        let s = scalars(&[0.0, 0.9, 1.4, 2.9]);
        let g = GMetric::diameter(2).unwrap();
        let r = 3.0;
        let inner = g_ball(&g, &s, 0, r / 3.0).unwrap();
        let outer = g_ball(&g, &s, 0, r).unwrap();
        let d = derived_metric(&g, &s, DerivedVariant::TwoSidedBlock { s: 1 }).unwrap();
        let mid: BTreeSet<usize> = (0..4).filter(|&y| d[0][y] < r).collect();
        assert_eq!(inner.members, BTreeSet::from([0, 1]));
        assert_eq!(mid, BTreeSet::from([0, 1, 2]));
        assert_eq!(outer.members, BTreeSet::from([0, 1, 2, 3]));
        assert!(inner.members.is_subset(&mid) && mid.is_subset(&outer.members));

        for g in [
            GMetric::discrete(3).unwrap(),
            GMetric::max(2).unwrap(),
            GMetric::average(2).unwrap(),
            GMetric::shortest_path(2).unwrap(),
        ] {
            let centers = [0, 1, 2, 3, 0, 2];
            let radii = [0.3, 0.9, 1.7, 2.5, 4.0, 0.1];
            let reports = check_ball_inclusion(&g, &s, &centers, &radii).unwrap();
            assert!(reports.is_empty(), "{reports:?}");
        }
    }

    #[test]
    fn ball_proposition_is_clean_on_proven_constructions() {
        let s = scalars(&[0.0, 1.0, 2.5, 4.0]);
        for g in [
            GMetric::max(2).unwrap(),
            GMetric::max(3).unwrap(),
            GMetric::diameter(2).unwrap(),
            GMetric::discrete(3).unwrap(),
            GMetric::shortest_path(2).unwrap(),
        ] {
            let reports = check_ball_proposition(&g, &s, &cfg()).unwrap();
            assert!(reports.is_empty(), "{reports:?}");
        }
    }

    #[test]
    fn convergence_criteria_agree_on_a_geometric_prefix() {
        let s = scalars(&[1.0, 0.5, 0.25, 0.125, 0.0625, 0.0]);
        let g = GMetric::diameter(2).unwrap();
        let diag = SequenceDiagnostics {
            prefix: vec![0, 1, 2, 3, 4],
            candidate_limit: Some(5),
            order: 2,
        };
        let report = diagnose_convergence(&g, &s, &diag, &[0.3, 0.07]).unwrap();
        assert!(report.agree_on_all);
        assert_eq!(report.per_epsilon[0].ball_n, Some(2));
        assert_eq!(report.per_epsilon[0].full_n, Some(2));
        assert_eq!(report.per_epsilon[1].ball_n, Some(4));

        // Constant prefix at the limit: every criterion from the start.
        let still = SequenceDiagnostics { prefix: vec![5, 5, 5], candidate_limit: Some(5), order: 2 };
        let report = diagnose_convergence(&g, &s, &still, &[1e-6]).unwrap();
        assert_eq!(report.per_epsilon[0].full_n, Some(0));

        // Alternating far points: no cutoff works, and the criteria agree
        // on that too.
        let alt = SequenceDiagnostics {
            prefix: vec![0, 5, 0, 5, 0],
            candidate_limit: Some(5),
            order: 2,
        };
        let report = diagnose_convergence(&g, &s, &alt, &[0.5]).unwrap();
        assert!(report.agree_on_all);
        assert_eq!(report.per_epsilon[0].full_n, None);
        assert_eq!(report.per_epsilon[0].ball_n, None);
    }

    #[test]
    fn cauchy_flags_the_harmonic_caveat() {
        let g = GMetric::diameter(2).unwrap();
        let mut partial = 0.0;
        let sums: Vec<f64> = (1..=10)
            .map(|k| {
                partial += 1.0 / k as f64;
                partial
            })
            .collect();
        let s = scalars(&sums);
        let diag = SequenceDiagnostics {
            prefix: (0..10).collect(),
            candidate_limit: None,
            order: 2,
        };
        let report = diagnose_cauchy(&g, &s, &diag).unwrap();
        assert!(!report.agree_on_all);
        assert!(report.caveat.is_some());
        assert!(report.consecutive.windows(2).all(|w| w[1] < w[0]));

        let values: Vec<f64> = (0..12).map(|k| 0.5f64.powi(k)).collect();
        let geo = scalars(&values);
        let diag =
            SequenceDiagnostics { prefix: (0..12).collect(), candidate_limit: None, order: 2 };
        let report = diagnose_cauchy(&g, &geo, &diag).unwrap();
        assert_eq!(report.consecutive.len(), 11);
        assert_eq!(report.consecutive[0], 0.5);
        assert!(report.agree_on_all, "{:?}", report.per_epsilon);
        assert!(report.caveat.is_none());
        assert!(!report.full_thinned);
        assert_eq!(report.per_epsilon[0].consecutive_n, Some(0));
        assert_eq!(report.per_epsilon[0].full_n, Some(1));
    }

    #[test]
    fn greedy_net_covers_with_first_uncovered_centers() {
        let s = scalars(&[0.0, 1.0, 2.0, 3.0]);
        let g = GMetric::diameter(2).unwrap();
        let net = epsilon_net(&g, &s, 1.5).unwrap();
        assert_eq!(net, vec![0, 2]);

        // Post-hoc cover check.
        for y in 0..4 {
            assert!(net.iter().any(|&a| {
                let ball = g_ball(&g, &s, a, 1.5).unwrap();
                ball.contains(y)
            }));
        }

        let d = GMetric::discrete(2).unwrap();
        assert_eq!(epsilon_net(&d, &s, 0.5).unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(epsilon_net(&g, &s, 100.0).unwrap(), vec![0]);
        assert!(epsilon_net(&g, &s, 0.0).is_err());
    }

    #[test]
    fn joint_continuity_bound_holds_across_the_catalog() {
        let s = scalars(&[0.0, 0.8, 2.0, 3.3]);
        for g in [
            GMetric::discrete(2).unwrap(),
            GMetric::diameter(3).unwrap(),
            GMetric::max(2).unwrap(),
            GMetric::average(3).unwrap(),
            GMetric::shortest_path(2).unwrap(),
        ] {
            let budget = CheckConfig { sample_budget: 500, ..cfg() };
            let report = check_joint_continuity(&g, &s, &budget).unwrap();
            assert_eq!(report.pairs_checked, 500);
            assert!(report.violations.is_empty(), "{:?}", report.violations);
            // Rounding can push the slack a few ulps past zero.
            assert!(report.worst_slack <= 1e-12, "{}", report.worst_slack);
        }
    }
}
