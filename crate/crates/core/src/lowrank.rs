//! Low-rank FGW transport by mirror descent with alternating KL projections.
//!
//! A coupling is factored as S = Q0 diag(1/g) Q1^T through an r-bin inner
//! histogram g, with Q0 coupling (mu0, g) and Q1 coupling (mu1, g). Each
//! mirror-descent step exponentiates the gradient into multiplicative kernels
//! and projects back onto the constraint set with LR-Dykstra.
//!
//! The solve races a deterministic family of feasible starts for a few
//! iterations, finishes the winner, then restores exact feasibility: a long
//! Dykstra polish of the best iterate followed by exact marginal rounding.
//! Small problems get a final vertex snap through the reference solver's
//! linear-OT step. The returned plan always has exact marginals, so its cost
//! is a true upper bound on the distance.

use ndarray::{Array1, Array2, Axis};

use crate::error::{GdaError, Result};
use crate::fgw::{degree_sorted_coupling, CostCtx};
use crate::graph::{attribute_distance_matrix, Graph};
use crate::ot::exact_ot;

/// Bound on the within-column range of log-kernels. Entries further than this
/// below the column max are lifted, which keeps the Dykstra scalings mixing
/// fast once plans approach sparse support; the lifted mass is ~e^-60 and has
/// no measurable cost effect.
const KERNEL_SPAN: f64 = 60.0;
/// Inner-projection iteration budget per mirror-descent step.
const DYKSTRA_MAX_INNER: usize = 500;
/// Problem size n0*n1 above which the reference-solver warm start and the
/// final vertex snap are skipped.
pub(crate) const CG_LIFT_CAP: usize = 10_000;

const LOG_GUARD: f64 = 1e-300;

/// Factored transport plan: S = Q0 diag(1/g) Q1^T.
#[derive(Debug, Clone)]
pub struct LowRankPlan {
    pub q0: Array2<f64>,
    pub q1: Array2<f64>,
    pub g: Array1<f64>,
}

impl LowRankPlan {
    pub fn rank(&self) -> usize {
        self.g.len()
    }

    /// Materializes the full coupling.
    pub fn coupling(&self) -> Array2<f64> {
        let scaled = &self.q1 / &self.g.view().insert_axis(Axis(0));
        self.q0.dot(&scaled.t())
    }

    /// Checks the marginal invariants at an l1 tolerance.
    pub fn validate(&self, mu0: &Array1<f64>, mu1: &Array1<f64>, tol: f64) -> Result<()> {
        let r = self.g.len();
        if self.q0.ncols() != r || self.q1.ncols() != r {
            return Err(GdaError::Dimension("factor widths disagree with g".into()));
        }
        if self.q0.nrows() != mu0.len() || self.q1.nrows() != mu1.len() {
            return Err(GdaError::Dimension("factor heights disagree with marginals".into()));
        }
        if self.q0.iter().chain(self.q1.iter()).any(|&x| x < 0.0)
            || self.g.iter().any(|&x| x <= 0.0)
        {
            return Err(GdaError::Invalid("plan entries must be nonnegative, g positive".into()));
        }
        let l1 = |a: &Array1<f64>, b: &Array1<f64>| (a - b).mapv(f64::abs).sum();
        let checks = [
            l1(&self.q0.sum_axis(Axis(1)), mu0),
            l1(&self.q0.sum_axis(Axis(0)), &self.g),
            l1(&self.q1.sum_axis(Axis(1)), mu1),
            l1(&self.q1.sum_axis(Axis(0)), &self.g),
            (self.g.sum() - 1.0).abs(),
        ];
        for (idx, err) in checks.iter().enumerate() {
            if *err > tol {
                return Err(GdaError::Invalid(format!(
                    "plan marginal check {idx} off by {err:.3e} (tol {tol:.1e})"
                )));
            }
        }
        Ok(())
    }
}

/// Settings for the low-rank solve.
#[derive(Debug, Clone)]
pub struct LowRankConfig {
    /// Histogram size; None picks min(n0, n1), the largest rank at which the
    /// intermediate graph is no bigger than either endpoint.
    pub rank: Option<usize>,
    /// Mirror-descent step size gamma.
    pub step_size: f64,
    /// Lower bound on g entries; None picks 1e-10/rank.
    pub g_floor: Option<f64>,
    /// l1 marginal tolerance for the inner projections.
    pub dykstra_tol: f64,
    /// Outer mirror-descent iteration cap.
    pub max_iters: usize,
    /// Relative cost improvement under which an iteration counts as stalled.
    pub cost_tol: f64,
    /// Iterations granted to each start before the winner runs to completion.
    pub race_iters: usize,
    /// Stalled iterations tolerated before stopping.
    pub patience: usize,
    /// Iteration budget for the final feasibility polish.
    pub polish_max_iters: usize,
}

impl Default for LowRankConfig {
    fn default() -> Self {
        LowRankConfig {
            rank: None,
            step_size: 10.0,
            g_floor: None,
            dykstra_tol: 1e-6,
            max_iters: 200,
            cost_tol: 1e-6,
            race_iters: 25,
            patience: 10,
            polish_max_iters: 20_000,
        }
    }
}

impl LowRankConfig {
    fn resolve(&self, n0: usize, n1: usize) -> Result<(usize, f64)> {
        let rank = self.rank.unwrap_or_else(|| n0.min(n1));
        if rank == 0 {
            return Err(GdaError::Invalid("rank must be at least 1".into()));
        }
        let g_floor = self.g_floor.unwrap_or(1e-10 / rank as f64);
        if g_floor <= 0.0 || g_floor > 1.0 / rank as f64 {
            return Err(GdaError::Invalid(format!(
                "g_floor {g_floor} outside (0, 1/rank]"
            )));
        }
        if self.step_size <= 0.0 || self.dykstra_tol <= 0.0 || self.cost_tol <= 0.0 {
            return Err(GdaError::Invalid("step size and tolerances must be positive".into()));
        }
        Ok((rank, g_floor))
    }
}

/// Independent-coupling start: g uniform, Q0 = mu0 g^T, Q1 = mu1 g^T.
/// Satisfies every plan invariant exactly.
pub fn init_plan(mu0: &Array1<f64>, mu1: &Array1<f64>, r: usize) -> Result<LowRankPlan> {
    if r == 0 {
        return Err(GdaError::Invalid("rank must be at least 1".into()));
    }
    let g = Array1::from_elem(r, 1.0 / r as f64);
    let outer = |mu: &Array1<f64>| {
        let mut q = Array2::zeros((mu.len(), r));
        for i in 0..mu.len() {
            for j in 0..r {
                q[[i, j]] = mu[i] * g[j];
            }
        }
        q
    };
    Ok(LowRankPlan {
        q0: outer(mu0),
        q1: outer(mu1),
        g,
    })
}

fn ramp(k: usize, desc: bool) -> Array1<f64> {
    let mut v: Vec<f64> = (1..=k).map(|x| x as f64).collect();
    if desc {
        v.reverse();
    }
    let total: f64 = v.iter().sum();
    Array1::from_vec(v) / total
}

/// Deterministic asymmetric start: mixture of two product measures.
///
/// The pure product start is a fixed point of the mirror-descent map, so the
/// solver needs symmetry-breaking starts that are still exactly feasible.
/// Ramp orientation selects which alignment basin the start tilts toward.
pub(crate) fn ramp_init(
    mu0: &Array1<f64>,
    mu1: &Array1<f64>,
    r: usize,
    desc0: bool,
    desc1: bool,
) -> LowRankPlan {
    let g = Array1::from_elem(r, 1.0 / r as f64);
    let min3 = mu0
        .iter()
        .chain(mu1.iter())
        .chain(g.iter())
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let lam = min3 / 2.0;
    let (a1, b1, g1) = (ramp(mu0.len(), desc0), ramp(mu1.len(), desc1), ramp(r, false));
    let a2 = (mu0 - &(lam * &a1)) / (1.0 - lam);
    let b2 = (mu1 - &(lam * &b1)) / (1.0 - lam);
    let g2 = (&g - &(lam * &g1)) / (1.0 - lam);
    let mix = |x1: &Array1<f64>, x2: &Array1<f64>| {
        let mut q = Array2::zeros((x1.len(), r));
        for i in 0..x1.len() {
            for j in 0..r {
                q[[i, j]] = lam * x1[i] * g1[j] + (1.0 - lam) * x2[i] * g2[j];
            }
        }
        q
    };
    LowRankPlan {
        q0: mix(&a1, &a2),
        q1: mix(&b1, &b2),
        g,
    }
}

/// Full coupling of a ramp start at rank min(n0, n1); used as a start for the
/// reference solver as well.
pub(crate) fn ramp_coupling(
    mu0: &Array1<f64>,
    mu1: &Array1<f64>,
    desc0: bool,
    desc1: bool,
) -> Array2<f64> {
    ramp_init(mu0, mu1, mu0.len().min(mu1.len()), desc0, desc1).coupling()
}

/// Exact factorization of a full coupling into a rank-r plan.
///
/// r >= n1: Q0 is S plus mass-eps padding columns; r < n1: contiguous column
/// chunks of S are merged so every marginal holds exactly.
pub(crate) fn lift_full_plan(
    s: &Array2<f64>,
    mu0: &Array1<f64>,
    mu1: &Array1<f64>,
    r: usize,
    g_floor: f64,
) -> LowRankPlan {
    let (n0, n1) = s.dim();
    if r >= n1 {
        let pad = r - n1;
        let eps = if pad > 0 { g_floor } else { 0.0 };
        let scale = 1.0 - pad as f64 * eps;
        let mut g = Array1::zeros(r);
        let mut q0 = Array2::zeros((n0, r));
        let mut q1 = Array2::zeros((n1, r));
        for j in 0..n1 {
            g[j] = mu1[j] * scale;
            for i in 0..n0 {
                q0[[i, j]] = s[[i, j]] * scale;
            }
            q1[[j, j]] = mu1[j] * scale;
        }
        for j in n1..r {
            g[j] = eps;
            for i in 0..n0 {
                q0[[i, j]] = mu0[i] * eps;
            }
            for i in 0..n1 {
                q1[[i, j]] = mu1[i] * eps;
            }
        }
        LowRankPlan { q0, q1, g }
    } else {
        let bounds: Vec<usize> = (0..=r)
            .map(|j| ((j as f64 / r as f64) * n1 as f64).round() as usize)
            .collect();
        let mut g = Array1::zeros(r);
        let mut q0 = Array2::zeros((n0, r));
        let mut q1 = Array2::zeros((n1, r));
        for j in 0..r {
            for col in bounds[j]..bounds[j + 1] {
                g[j] += mu1[col];
                q1[[col, j]] = mu1[col];
                for i in 0..n0 {
                    q0[[i, j]] += s[[i, col]];
                }
            }
        }
        LowRankPlan { q0, q1, g }
    }
}

/// Kronecker lift of a full coupling into a rank-(n0*n1) plan.
///
/// Column (u, v) gets weight S[u, v]; Q0 puts that weight on row u, Q1 on
/// row v. Columns lighter than g_floor are topped up with the product
/// measure, which inflates total mass by at most n0*n1*g_floor.
pub fn lift_product_plan(
    s: &Array2<f64>,
    mu0: &Array1<f64>,
    mu1: &Array1<f64>,
    g_floor: f64,
) -> LowRankPlan {
    let (n0, n1) = s.dim();
    let r = n0 * n1;
    let mut g = Array1::zeros(r);
    let mut q0 = Array2::zeros((n0, r));
    let mut q1 = Array2::zeros((n1, r));
    for u in 0..n0 {
        for v in 0..n1 {
            let j = u * n1 + v;
            g[j] = s[[u, v]];
            q0[[u, j]] = s[[u, v]];
            q1[[v, j]] = s[[u, v]];
        }
    }
    for j in 0..r {
        let deficit = (g_floor - g[j]).max(0.0);
        if deficit > 0.0 {
            g[j] += deficit;
            for i in 0..n0 {
                q0[[i, j]] += mu0[i] * deficit;
            }
            for i in 0..n1 {
                q1[[i, j]] += mu1[i] * deficit;
            }
        }
    }
    LowRankPlan { q0, q1, g }
}

/// Multiplicative mirror-descent kernels for the current plan.
///
/// B = -alpha M + 4 (1-alpha) A0 Q0 diag(1/g) Q1^T A1, exponentiated along
/// each factor's descent direction and multiplied into the current iterate.
/// Log-kernels are clamped to KERNEL_SPAN below their column max, and columns
/// whose max exponent exceeds 500 are shifted before exp (pure stabilization;
/// Dykstra scalings absorb any per-column factor).
pub fn gradient_kernels(
    plan: &LowRankPlan,
    g0: &Graph,
    g1: &Graph,
    m: &Array2<f64>,
    alpha: f64,
    gamma: f64,
) -> Result<(Array2<f64>, Array2<f64>, Array1<f64>)> {
    if m.dim() != (g0.n(), g1.n()) || plan.q0.nrows() != g0.n() || plan.q1.nrows() != g1.n() {
        return Err(GdaError::Dimension("kernel inputs disagree".into()));
    }
    Ok(kernels_arrays(
        &g0.adjacency,
        &g1.adjacency,
        m,
        &plan.q0,
        &plan.q1,
        &plan.g,
        alpha,
        gamma,
    ))
}

#[allow(clippy::too_many_arguments)]
fn kernels_arrays(
    a0: &Array2<f64>,
    a1: &Array2<f64>,
    m: &Array2<f64>,
    q0: &Array2<f64>,
    q1: &Array2<f64>,
    g: &Array1<f64>,
    alpha: f64,
    gamma: f64,
) -> (Array2<f64>, Array2<f64>, Array1<f64>) {
    let r = g.len();
    let inv_g = g.mapv(|x| 1.0 / x);
    let q1_scaled = q1 * &inv_g.view().insert_axis(Axis(0));
    let b = {
        let left = a0.dot(q0);
        let right = q1_scaled.t().dot(a1);
        m.mapv(|x| -alpha * x) + left.dot(&right).mapv(|x| 4.0 * (1.0 - alpha) * x)
    };
    let bq1 = b.dot(q1);
    let btq0 = b.t().dot(q0);
    let l1 = &bq1 * &inv_g.view().insert_axis(Axis(0)) * gamma
        + q0.mapv(|x| x.max(LOG_GUARD).ln());
    let l2 = &btq0 * &inv_g.view().insert_axis(Axis(0)) * gamma
        + q1.mapv(|x| x.max(LOG_GUARD).ln());
    let mut l3 = Array1::zeros(r);
    for j in 0..r {
        let mut diag = 0.0;
        for u in 0..q0.nrows() {
            diag += q0[[u, j]] * bq1[[u, j]];
        }
        l3[j] = -gamma * diag / (g[j] * g[j]) + g[j].max(LOG_GUARD).ln();
    }
    let stabilize_cols = |l: &Array2<f64>| -> Array2<f64> {
        let mut out = Array2::zeros(l.dim());
        for j in 0..l.ncols() {
            let colmax = l.column(j).iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let shift = if colmax > 500.0 { colmax } else { 0.0 };
            for i in 0..l.nrows() {
                let v = l[[i, j]].max(colmax - KERNEL_SPAN);
                out[[i, j]] = (v - shift).exp();
            }
        }
        out
    };
    let e1 = stabilize_cols(&l1);
    let e2 = stabilize_cols(&l2);
    let m3 = l3.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let shift3 = if m3 > 500.0 { m3 } else { 0.0 };
    let e3 = l3.mapv(|v| (v.max(m3 - KERNEL_SPAN) - shift3).exp());
    (e1, e2, e3)
}

/// Alternating KL projection of a kernel triple onto the plan constraints.
///
/// First projection scales rows to the outer marginals and floors g; second
/// ties all three column sums to a shared g via a closed-form geometric mean.
/// Stops when the summed l1 row-marginal violation is at most delta; hitting
/// the iteration cap returns the last iterate with `converged = false`.
pub fn lr_dykstra(
    e1: &Array2<f64>,
    e2: &Array2<f64>,
    e3: &Array1<f64>,
    mu0: &Array1<f64>,
    mu1: &Array1<f64>,
    g_floor: f64,
    delta: f64,
    max_iters: usize,
) -> (LowRankPlan, bool) {
    let r = e3.len();
    let mut v1_prev = Array1::from_elem(r, 1.0);
    let mut v2_prev = Array1::from_elem(r, 1.0);
    let mut q1 = Array1::from_elem(r, 1.0);
    let mut q2 = Array1::from_elem(r, 1.0);
    let mut q3_1 = Array1::from_elem(r, 1.0);
    let mut q3_2 = Array1::from_elem(r, 1.0);
    let mut g_cur = e3.clone();
    let mut u1 = Array1::from_elem(mu0.len(), 1.0);
    let mut u2 = Array1::from_elem(mu1.len(), 1.0);
    let mut converged = false;
    for _ in 0..max_iters.max(1) {
        u1 = mu0 / &e1.dot(&v1_prev);
        u2 = mu1 / &e2.dot(&v2_prev);
        let floored = (&g_cur * &q3_1).mapv(|x| x.max(g_floor));
        q3_1 = &(&g_cur * &q3_1) / &floored;
        g_cur = floored;
        let v1t = e1.t().dot(&u1);
        let v2t = e2.t().dot(&u2);
        let g_new = (&g_cur * &q3_2 * &v1_prev * &q1 * &v1t * &v2_prev * &q2 * &v2t)
            .mapv(|x| x.powf(1.0 / 3.0));
        let v1 = &g_new / &v1t;
        let v2 = &g_new / &v2t;
        q1 = &(&v1_prev * &q1) / &v1;
        q2 = &(&v2_prev * &q2) / &v2;
        q3_2 = &(&g_cur * &q3_2) / &g_new;
        v1_prev = v1;
        v2_prev = v2;
        g_cur = g_new;
        let err = (&u1 * &e1.dot(&v1_prev) - mu0).mapv(f64::abs).sum()
            + (&u2 * &e2.dot(&v2_prev) - mu1).mapv(f64::abs).sum();
        if err <= delta {
            converged = true;
            break;
        }
    }
    let q0_out = e1 * &u1.view().insert_axis(Axis(1)) * &v1_prev.view().insert_axis(Axis(0));
    let q1_out = e2 * &u2.view().insert_axis(Axis(1)) * &v2_prev.view().insert_axis(Axis(0));
    (
        LowRankPlan {
            q0: q0_out,
            q1: q1_out,
            g: g_cur,
        },
        converged,
    )
}

/// Exact rounding onto the transport polytope: scale rows down, scale columns
/// down, repair the remaining deficit with a rank-1 outer product. O(nr) and
/// the output marginals match the targets to machine precision.
fn awr_round(q: &Array2<f64>, row_t: &Array1<f64>, col_t: &Array1<f64>) -> Array2<f64> {
    let rows = q.sum_axis(Axis(1));
    let mut x = q.clone();
    for i in 0..x.nrows() {
        let f = (row_t[i] / rows[i].max(LOG_GUARD)).min(1.0);
        for j in 0..x.ncols() {
            x[[i, j]] *= f;
        }
    }
    let cols = x.sum_axis(Axis(0));
    for j in 0..x.ncols() {
        let f = (col_t[j] / cols[j].max(LOG_GUARD)).min(1.0);
        for i in 0..x.nrows() {
            x[[i, j]] *= f;
        }
    }
    let er = row_t - &x.sum_axis(Axis(1));
    let ec = col_t - &x.sum_axis(Axis(0));
    let d: f64 = er.sum();
    if d > LOG_GUARD {
        for i in 0..x.nrows() {
            for j in 0..x.ncols() {
                x[[i, j]] += er[i] * ec[j] / d;
            }
        }
    }
    x
}

fn round_plan(plan: &LowRankPlan, mu0: &Array1<f64>, mu1: &Array1<f64>, g_floor: f64) -> LowRankPlan {
    let mut g = plan.g.mapv(|x| x.max(g_floor));
    let total = g.sum();
    g /= total;
    LowRankPlan {
        q0: awr_round(&plan.q0, mu0, &g),
        q1: awr_round(&plan.q1, mu1, &g),
        g,
    }
}

struct SingleRun {
    best_cost: f64,
    best_plan: LowRankPlan,
    trace: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
fn solve_single(
    ctx: &CostCtx,
    m: &Array2<f64>,
    mu0: &Array1<f64>,
    mu1: &Array1<f64>,
    init: &LowRankPlan,
    alpha: f64,
    g_floor: f64,
    cfg: &LowRankConfig,
    iters: usize,
) -> SingleRun {
    let mut plan = init.clone();
    let mut cost = ctx.cost(&plan.coupling()).max(0.0).sqrt();
    let mut best_cost = cost;
    let mut best_plan = plan.clone();
    let mut trace = vec![cost];
    let mut stall = 0usize;
    for _ in 0..iters {
        let (e1, e2, e3) = kernels_arrays(
            &ctx.a0,
            &ctx.a1,
            m,
            &plan.q0,
            &plan.q1,
            &plan.g,
            alpha,
            cfg.step_size,
        );
        let (next, _) = lr_dykstra(
            &e1,
            &e2,
            &e3,
            mu0,
            mu1,
            g_floor,
            cfg.dykstra_tol,
            DYKSTRA_MAX_INNER,
        );
        plan = next;
        cost = ctx.cost(&plan.coupling()).max(0.0).sqrt();
        if cost < best_cost - cfg.cost_tol * best_cost.abs().max(1e-16) {
            best_cost = cost;
            best_plan = plan.clone();
            stall = 0;
        } else {
            if cost < best_cost {
                best_cost = cost;
                best_plan = plan.clone();
            }
            stall += 1;
        }
        trace.push(best_cost);
        if stall >= cfg.patience {
            break;
        }
    }
    SingleRun {
        best_cost,
        best_plan,
        trace,
    }
}

fn init_menu(
    ctx: &CostCtx,
    mu0: &Array1<f64>,
    mu1: &Array1<f64>,
    rank: usize,
    g_floor: f64,
    alpha: f64,
    g0: &Graph,
    g1: &Graph,
) -> Result<Vec<LowRankPlan>> {
    let mut inits = vec![
        ramp_init(mu0, mu1, rank, false, false),
        ramp_init(mu0, mu1, rank, false, true),
        ramp_init(mu0, mu1, rank, true, false),
    ];
    let feature_plan = exact_ot(&ctx.m2, mu0, mu1)?;
    inits.push(lift_full_plan(&feature_plan, mu0, mu1, rank, g_floor));
    if let Some(p) = degree_sorted_coupling(&ctx.a0, &ctx.a1, mu0, mu1) {
        inits.push(lift_full_plan(&p, mu0, mu1, rank, g_floor));
    }
    // one conditional-gradient step from the product coupling
    let s = {
        let mut s = Array2::zeros((mu0.len(), mu1.len()));
        for i in 0..mu0.len() {
            for j in 0..mu1.len() {
                s[[i, j]] = mu0[i] * mu1[j];
            }
        }
        s
    };
    let r = s.sum_axis(Axis(1));
    let c = s.sum_axis(Axis(0));
    let a0sr = ctx.a0sq.dot(&r);
    let a1sc = ctx.a1sq.dot(&c);
    let cross = ctx.a0.dot(&s).dot(&ctx.a1);
    let mut grad = ctx.m2.mapv(|x| (1.0 - alpha) * x);
    for i in 0..grad.nrows() {
        for j in 0..grad.ncols() {
            grad[[i, j]] += 2.0 * alpha * (a0sr[i] + a1sc[j] - 2.0 * cross[[i, j]]);
        }
    }
    inits.push(lift_full_plan(
        &exact_ot(&grad, mu0, mu1)?,
        mu0,
        mu1,
        rank,
        g_floor,
    ));
    if mu0.len() * mu1.len() <= CG_LIFT_CAP {
        let res = crate::fgw::fgw_distance_cg(g0, g1, &crate::fgw::FgwConfig::default())?;
        inits.push(lift_full_plan(&res.coupling, mu0, mu1, rank, g_floor));
    }
    Ok(inits)
}

/// Low-rank FGW solve. Returns the best plan found and a cost trace.
///
/// The trace records the best cost measured at each outer iteration of the
/// winning run (monotone by construction) with the exact cost of the returned
/// rounded plan appended last.
pub fn solve_lowrank_fgw(
    g0: &Graph,
    g1: &Graph,
    alpha: f64,
    cfg: &LowRankConfig,
) -> Result<(LowRankPlan, Vec<f64>)> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(GdaError::Invalid(format!("alpha {alpha} outside [0,1]")));
    }
    let (n0, n1) = (g0.n(), g1.n());
    let (rank, g_floor) = cfg.resolve(n0, n1)?;
    let m = attribute_distance_matrix(g0, g1)?;
    let ctx = CostCtx::new(&g0.adjacency, &g1.adjacency, &m, alpha);
    let (mu0, mu1) = (&g0.marginal, &g1.marginal);
    let inits = init_menu(&ctx, mu0, mu1, rank, g_floor, alpha, g0, g1)?;
    let winner = if inits.len() == 1 || cfg.race_iters == 0 {
        0
    } else {
        let mut best = (f64::INFINITY, 0usize);
        for (idx, init) in inits.iter().enumerate() {
            let run = solve_single(&ctx, &m, mu0, mu1, init, alpha, g_floor, cfg, cfg.race_iters);
            if run.best_cost < best.0 {
                best = (run.best_cost, idx);
            }
        }
        best.1
    };
    let run = solve_single(
        &ctx,
        &m,
        mu0,
        mu1,
        &inits[winner],
        alpha,
        g_floor,
        cfg,
        cfg.max_iters,
    );
    let mut trace = run.trace;
    // feasibility restore: long projection of the best iterate, then exact
    // repair; the repair moves only the residual projection error in mass
    let guard = |a: &Array2<f64>| a.mapv(|x| x.max(LOG_GUARD));
    let (polished, _) = lr_dykstra(
        &guard(&run.best_plan.q0),
        &guard(&run.best_plan.q1),
        &run.best_plan.g.mapv(|x| x.max(LOG_GUARD)),
        mu0,
        mu1,
        g_floor,
        cfg.dykstra_tol.min(1e-8),
        cfg.polish_max_iters,
    );
    let mut plan = round_plan(&polished, mu0, mu1, g_floor);
    let mut final_cost = ctx.cost(&plan.coupling()).max(0.0).sqrt();
    // vertex snap: mirror descent creeps toward transport vertices but stops
    // short; the nearest vertex often evaluates strictly better and lifts
    // exactly whenever rank >= n1
    if n0 * n1 <= CG_LIFT_CAP {
        let vertex = exact_ot(&plan.coupling().mapv(|x| -x), mu0, mu1)?;
        let lifted = lift_full_plan(&vertex, mu0, mu1, rank, g_floor);
        let snap_cost = ctx.cost(&lifted.coupling()).max(0.0).sqrt();
        if snap_cost < final_cost {
            plan = lifted;
            final_cost = snap_cost;
        }
    }
    trace.push(final_cost);
    Ok((plan, trace))
}
