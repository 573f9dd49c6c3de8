//! Interpolation paths between two attributed graphs.
//!
//! A solved low-rank plan (Q0, Q1, g) projects both endpoint graphs onto the
//! same r anchor nodes via the barycentric maps P = Q diag(1/g). Convex
//! combinations of the two projected graphs then trace an approximate
//! geodesic: graph t carries adjacency (1-t/T) A~0 + (t/T) A~1, likewise for
//! features, with the shared anchor measure g as its marginal.

use std::collections::BTreeSet;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GdaError, Result};
use crate::fgw::{fgw_distance_cg, FgwConfig};
use crate::graph::{normalize_marginal, Graph};
use crate::io::{load_graph_dir, save_graph};
use crate::lowrank::{lift_product_plan, solve_lowrank_fgw, LowRankConfig, LowRankPlan, CG_LIFT_CAP};

/// Seed for the random pair subsample in [`path_quality`].
const PAIR_SAMPLE_SEED: u64 = 42;

/// Distances at or below this are treated as a degenerate (zero-length) path.
const DEGENERATE_DISTANCE: f64 = 1e-9;

/// Largest n0*n1 accepted by [`product_reference_plan`]; the lifted rank is
/// the full product size, so this mode is only for test-scale problems.
const PRODUCT_REFERENCE_CAP: usize = 128;

/// A discretized interpolation path between two graphs.
///
/// `graphs[t]` sits at interpolation weight `lambdas[t] = t / T`, so the
/// first entry is the projected source and the last the projected target.
#[derive(Debug, Clone)]
pub struct GeodesicPath {
    pub graphs: Vec<Graph>,
    pub lambdas: Vec<f64>,
    /// Endpoint distance measured on the original (unprojected) graphs.
    pub source_target_distance: f64,
}

/// One measured pair in a [`PathQualityReport`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathPairSample {
    pub lambda0: f64,
    pub lambda1: f64,
    /// |lambda1 - lambda0|: the ratio an exact geodesic would produce.
    pub expected_ratio: f64,
    /// d(graph at lambda0, graph at lambda1) / d(source, target).
    pub measured_ratio: f64,
}

/// How closely pairwise distances along a path track the geodesic line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathQualityReport {
    pub pairs: Vec<PathPairSample>,
    /// Pearson correlation between expected and measured ratios; absent when
    /// either side has no variance or fewer than two pairs were measured.
    pub pearson: Option<f64>,
    /// Set when the endpoints coincide and ratios are undefined.
    pub degenerate: bool,
}

/// Converts a plan into the pair of barycentric projection maps Q diag(1/g).
///
/// Both maps have columns summing to one (up to the plan's own marginal
/// error), so P^T averages node quantities into anchor quantities.
pub fn normalize_plan(plan: &LowRankPlan) -> Result<(Array2<f64>, Array2<f64>)> {
    for &gj in plan.g.iter() {
        if !gj.is_finite() || gj <= 0.0 {
            return Err(GdaError::Invalid(format!(
                "plan has non-positive anchor weight {gj}; cannot normalize"
            )));
        }
    }
    let g_row = plan.g.view().insert_axis(Axis(0));
    Ok((&plan.q0 / &g_row, &plan.q1 / &g_row))
}

/// Projects both endpoint graphs onto the plan's anchors.
///
/// Adjacency becomes P^T A P and features P^T X; both outputs share the
/// anchor weights g as their marginal. The plan's column sums must agree
/// with g within `marginal_tol` (L1), otherwise the barycentric maps do not
/// average to the claimed measure and the transform is rejected.
pub fn transform_graphs(
    g0: &Graph,
    g1: &Graph,
    plan: &LowRankPlan,
    marginal_tol: f64,
) -> Result<(Graph, Graph)> {
    if plan.q0.nrows() != g0.n() || plan.q1.nrows() != g1.n() {
        return Err(GdaError::Dimension(format!(
            "plan is {}x{} by {}x{}, graphs have {} and {} nodes",
            plan.q0.nrows(),
            plan.rank(),
            plan.q1.nrows(),
            plan.rank(),
            g0.n(),
            g1.n()
        )));
    }
    for q in [&plan.q0, &plan.q1] {
        let err: f64 = (&q.sum_axis(Axis(0)) - &plan.g).mapv(f64::abs).sum();
        if err > marginal_tol {
            return Err(GdaError::Numerical(format!(
                "plan column sums deviate from anchor weights by {err:.3e} (tol {marginal_tol:.3e})"
            )));
        }
    }
    let (p0, p1) = normalize_plan(plan)?;
    let marginal = normalize_marginal(plan.g.clone(), 1e-6)?;
    let project = |adj: &Array2<f64>, feats: &Array2<f64>, p: &Array2<f64>| {
        let a = p.t().dot(adj).dot(p);
        // dot accumulates (i,j) and (j,i) in different orders; re-symmetrize
        let a = (&a + &a.t()) / 2.0;
        (a, p.t().dot(feats))
    };
    let (a0, x0) = project(&g0.adjacency, &g0.features, &p0);
    let (a1, x1) = project(&g1.adjacency, &g1.features, &p1);
    Ok((
        Graph::new(a0, x0, marginal.clone(), None)?,
        Graph::new(a1, x1, marginal, None)?,
    ))
}

/// Convex combination of two aligned graphs at weight t/T.
///
/// The graphs must live on the same node set: equal size, feature dimension,
/// and marginal. t = 0 returns the first graph's matrices unchanged, t = T
/// the second's.
pub fn interpolate(gt0: &Graph, gt1: &Graph, t: usize, t_steps: usize) -> Result<Graph> {
    if t_steps == 0 {
        return Err(GdaError::Invalid("interpolation needs at least one step".into()));
    }
    if t > t_steps {
        return Err(GdaError::Invalid(format!(
            "interpolation index {t} exceeds step count {t_steps}"
        )));
    }
    if gt0.n() != gt1.n() || gt0.feature_dim() != gt1.feature_dim() {
        return Err(GdaError::Dimension(format!(
            "cannot interpolate {}x{} features with {}x{}",
            gt0.n(),
            gt0.feature_dim(),
            gt1.n(),
            gt1.feature_dim()
        )));
    }
    let mu_gap = (&gt0.marginal - &gt1.marginal)
        .mapv(f64::abs)
        .fold(0.0f64, |a, &b| a.max(b));
    if mu_gap > 1e-9 {
        return Err(GdaError::Invalid(format!(
            "marginals differ by {mu_gap:.3e}; graphs are not on a shared node set"
        )));
    }
    let lam = t as f64 / t_steps as f64;
    let adjacency = &gt0.adjacency * (1.0 - lam) + &gt1.adjacency * lam;
    let features = &gt0.features * (1.0 - lam) + &gt1.features * lam;
    Graph::new(adjacency, features, gt0.marginal.clone(), None)
}

/// Solves the low-rank coupling and lays out T+1 interpolated graphs.
///
/// The endpoint distance stored on the result is measured by the
/// Frank-Wolfe solver on the original graphs; above the lift cap the
/// multistart menu is skipped to keep large instances affordable.
pub fn generate_path(
    g0: &Graph,
    g1: &Graph,
    t_steps: usize,
    alpha: f64,
    cfg: &LowRankConfig,
) -> Result<GeodesicPath> {
    Ok(generate_path_with_plan(g0, g1, t_steps, alpha, cfg)?.0)
}

/// [`generate_path`] that also hands back the solved plan, for callers that
/// need the projection maps (label transfer onto the first stop).
pub fn generate_path_with_plan(
    g0: &Graph,
    g1: &Graph,
    t_steps: usize,
    alpha: f64,
    cfg: &LowRankConfig,
) -> Result<(GeodesicPath, LowRankPlan)> {
    if t_steps == 0 {
        return Err(GdaError::Invalid("a path needs at least one step".into()));
    }
    let (plan, _trace) = solve_lowrank_fgw(g0, g1, alpha, cfg)?;
    let tol = (10.0 * cfg.dykstra_tol).max(1e-9);
    let (gt0, gt1) = transform_graphs(g0, g1, &plan, tol)?;
    let mut graphs = Vec::with_capacity(t_steps + 1);
    let mut lambdas = Vec::with_capacity(t_steps + 1);
    for t in 0..=t_steps {
        graphs.push(interpolate(&gt0, &gt1, t, t_steps)?);
        lambdas.push(t as f64 / t_steps as f64);
    }
    let judge = FgwConfig {
        alpha,
        multistart: g0.n() * g1.n() <= CG_LIFT_CAP,
        ..FgwConfig::default()
    };
    let source_target_distance = fgw_distance_cg(g0, g1, &judge)?.distance;
    Ok((
        GeodesicPath {
            graphs,
            lambdas,
            source_target_distance,
        },
        plan,
    ))
}

/// Full-rank reference plan built from the Frank-Wolfe coupling.
///
/// Lifts the solved coupling onto the n0*n1 product space, which represents
/// it exactly (up to the mass floor) and so bounds what any low-rank solve
/// can achieve. Rejected above n0*n1 = 128: the lift squares the problem size.
pub fn product_reference_plan(g0: &Graph, g1: &Graph, alpha: f64) -> Result<LowRankPlan> {
    let r = g0.n() * g1.n();
    if r > PRODUCT_REFERENCE_CAP {
        return Err(GdaError::Invalid(format!(
            "product reference needs n0*n1 <= {PRODUCT_REFERENCE_CAP}, got {r}"
        )));
    }
    let cfg = FgwConfig {
        alpha,
        ..FgwConfig::default()
    };
    let result = fgw_distance_cg(g0, g1, &cfg)?;
    Ok(lift_product_plan(
        &result.coupling,
        &g0.marginal,
        &g1.marginal,
        1e-10 / r as f64,
    ))
}

/// Measures pairwise distances along a path against the geodesic line.
///
/// An exact geodesic satisfies d(path[s], path[t]) = |lambda_s - lambda_t| *
/// d(source, target); the report collects measured-over-endpoint ratios and
/// their Pearson correlation with the expected ones. All pairs are measured
/// for up to 11 graphs, otherwise `samples` distinct pairs drawn with a
/// fixed seed. Coincident endpoints yield a degenerate report (no ratios).
pub fn path_quality(path: &GeodesicPath, alpha: f64, samples: usize) -> Result<PathQualityReport> {
    let m = path.graphs.len();
    if m < 3 {
        return Err(GdaError::Invalid(format!(
            "path quality needs at least 3 graphs, got {m}"
        )));
    }
    if path.lambdas.len() != m {
        return Err(GdaError::Dimension(format!(
            "{} lambdas for {} graphs",
            path.lambdas.len(),
            m
        )));
    }
    let d = path.source_target_distance;
    if d <= DEGENERATE_DISTANCE {
        return Ok(PathQualityReport {
            pairs: Vec::new(),
            pearson: None,
            degenerate: true,
        });
    }
    let all_pairs = m * (m - 1) / 2;
    let mut chosen: Vec<(usize, usize)> = Vec::new();
    if m <= 11 || samples >= all_pairs {
        for s in 0..m {
            for t in s + 1..m {
                chosen.push((s, t));
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(PAIR_SAMPLE_SEED);
        let mut seen = BTreeSet::new();
        while seen.len() < samples {
            let s = rng.gen_range(0..m);
            let t = rng.gen_range(0..m);
            if s < t {
                seen.insert((s, t));
            }
        }
        chosen.extend(seen);
    }
    let judge = FgwConfig {
        alpha,
        ..FgwConfig::default()
    };
    let mut pairs = Vec::with_capacity(chosen.len());
    for (s, t) in chosen {
        let dist = fgw_distance_cg(&path.graphs[s], &path.graphs[t], &judge)?.distance;
        pairs.push(PathPairSample {
            lambda0: path.lambdas[s],
            lambda1: path.lambdas[t],
            expected_ratio: (path.lambdas[t] - path.lambdas[s]).abs(),
            measured_ratio: dist / d,
        });
    }
    let expected: Vec<f64> = pairs.iter().map(|p| p.expected_ratio).collect();
    let measured: Vec<f64> = pairs.iter().map(|p| p.measured_ratio).collect();
    Ok(PathQualityReport {
        pearson: pearson(&expected, &measured),
        pairs,
        degenerate: false,
    })
}

/// Pearson correlation; None when undefined (fewer than two points or a
/// constant side).
fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for i in 0..n {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx <= 1e-30 || syy <= 1e-30 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Step-count rule T = max(1, round(((q-1) C / (C_f delta))^(1/q) * d)).
///
/// C bounds the per-step error constant, C_f the model class complexity,
/// delta the tolerated per-step loss, q the loss exponent. All inputs must
/// be positive and finite.
pub fn estimate_optimal_t(d_fgw: f64, c: f64, c_f: f64, delta: f64, q: f64) -> Result<usize> {
    for (name, v) in [
        ("d_fgw", d_fgw),
        ("C", c),
        ("C_f", c_f),
        ("delta", delta),
        ("q", q),
    ] {
        if !v.is_finite() || v <= 0.0 {
            return Err(GdaError::Invalid(format!(
                "{name} must be positive and finite, got {v}"
            )));
        }
    }
    let base = (q - 1.0) * c / (c_f * delta);
    let raw = base.powf(1.0 / q) * d_fgw;
    Ok((raw.round() as usize).max(1))
}

#[derive(Serialize, Deserialize)]
struct PathManifest {
    lambdas: Vec<f64>,
    rank: usize,
    alpha: f64,
    source_target_distance: f64,
}

/// Writes a path as H_000..H_TTT graph directories plus a path.json manifest.
pub fn save_path(dir: &Path, path: &GeodesicPath, alpha: f64) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (t, g) in path.graphs.iter().enumerate() {
        save_graph(&dir.join(format!("H_{t:03}")), g)?;
    }
    let manifest = PathManifest {
        lambdas: path.lambdas.clone(),
        rank: path.graphs.first().map_or(0, Graph::n),
        alpha,
        source_target_distance: path.source_target_distance,
    };
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| GdaError::Invalid(format!("manifest serialization failed: {e}")))?;
    std::fs::write(dir.join("path.json"), text)?;
    Ok(())
}

/// Reads back a path written by [`save_path`]. The stored alpha is returned
/// alongside the path.
pub fn load_path(dir: &Path) -> Result<(GeodesicPath, f64)> {
    let text = std::fs::read_to_string(dir.join("path.json"))?;
    let manifest: PathManifest = serde_json::from_str(&text).map_err(|e| {
        GdaError::Parse {
            path: dir.join("path.json").display().to_string(),
            line: 0,
            msg: e.to_string(),
        }
    })?;
    let mut graphs = Vec::with_capacity(manifest.lambdas.len());
    for t in 0..manifest.lambdas.len() {
        graphs.push(load_graph_dir(&dir.join(format!("H_{t:03}")))?);
    }
    Ok((
        GeodesicPath {
            graphs,
            lambdas: manifest.lambdas,
            source_target_distance: manifest.source_target_distance,
        },
        manifest.alpha,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::uniform_marginal;
    use crate::lowrank::init_plan;
    use ndarray::array;
    use rand::Rng;

    fn random_graph(n: usize, d: usize, seed: u64) -> Graph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut adj = Array2::zeros((n, n));
        for i in 0..n {
            for j in i + 1..n {
                let w: f64 = rng.gen_range(0.0..1.0);
                adj[[i, j]] = w;
                adj[[j, i]] = w;
            }
        }
        let features = Array2::from_shape_fn((n, d), |_| rng.gen_range(-1.0..1.0));
        Graph::new(adj, features, uniform_marginal(n).unwrap(), None).unwrap()
    }

    #[test]
    fn normalize_plan_of_product_plan_repeats_marginals() {
        let mu0 = array![0.2, 0.3, 0.5];
        let mu1 = array![0.5, 0.5];
        let plan = init_plan(&mu0, &mu1, 4).unwrap();
        let (p0, p1) = normalize_plan(&plan).unwrap();
        for j in 0..4 {
            for i in 0..3 {
                assert!((p0[[i, j]] - mu0[i]).abs() < 1e-12);
            }
            for i in 0..2 {
                assert!((p1[[i, j]] - mu1[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn normalize_plan_rejects_zero_anchor_weight() {
        let mu = array![0.5, 0.5];
        let mut plan = init_plan(&mu, &mu, 2).unwrap();
        plan.g[1] = 0.0;
        assert!(normalize_plan(&plan).is_err());
    }

    #[test]
    fn transform_with_identity_permutation_plan_recovers_graph() {
        let adj = array![[0.0, 1.0], [1.0, 0.0]];
        let feats = array![[1.0, 0.0], [-1.0, 2.0]];
        let mu = array![0.5, 0.5];
        let g = Graph::new(adj.clone(), feats.clone(), mu.clone(), None).unwrap();
        // identity coupling I/2 factored at full rank: Q0 = Q1 = diag(mu)
        let plan = LowRankPlan {
            q0: Array2::from_diag(&mu),
            q1: Array2::from_diag(&mu),
            g: mu.clone(),
        };
        let (t0, t1) = transform_graphs(&g, &g, &plan, 1e-9).unwrap();
        for t in [&t0, &t1] {
            assert!((&t.adjacency - &adj).mapv(f64::abs).sum() < 1e-12);
            assert!((&t.features - &feats).mapv(f64::abs).sum() < 1e-12);
            assert!((&t.marginal - &mu).mapv(f64::abs).sum() < 1e-12);
        }
    }

    #[test]
    fn transform_rejects_plan_with_inconsistent_column_sums() {
        let g = random_graph(3, 2, 5);
        let mu = uniform_marginal(3).unwrap();
        let mut plan = init_plan(&mu, &mu, 3).unwrap();
        plan.g[0] += 0.05;
        plan.g[1] -= 0.05;
        let err = transform_graphs(&g, &g, &plan, 1e-6).unwrap_err();
        assert!(matches!(err, GdaError::Numerical(_)));
    }

    #[test]
    fn interpolate_hits_endpoints_exactly_and_averages_midpoint() {
        let a = random_graph(4, 2, 7);
        let b = random_graph(4, 2, 8);
        let start = interpolate(&a, &b, 0, 2).unwrap();
        let end = interpolate(&a, &b, 2, 2).unwrap();
        let mid = interpolate(&a, &b, 1, 2).unwrap();
        assert_eq!(start.adjacency, a.adjacency);
        assert_eq!(end.adjacency, b.adjacency);
        let want = (&a.adjacency + &b.adjacency) / 2.0;
        assert!((&mid.adjacency - &want).mapv(f64::abs).sum() < 1e-12);
        let wantf = (&a.features + &b.features) / 2.0;
        assert!((&mid.features - &wantf).mapv(f64::abs).sum() < 1e-12);
    }

    #[test]
    fn interpolate_rejects_bad_indices() {
        let a = random_graph(3, 1, 9);
        assert!(interpolate(&a, &a, 3, 2).is_err());
        assert!(interpolate(&a, &a, 0, 0).is_err());
    }

    #[test]
    fn generate_path_layout_and_lambdas() {
        let g0 = random_graph(5, 2, 11);
        let g1 = random_graph(4, 2, 12);
        let cfg = LowRankConfig::default();
        let path = generate_path(&g0, &g1, 4, 0.5, &cfg).unwrap();
        assert_eq!(path.graphs.len(), 5);
        assert_eq!(path.lambdas, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(path.source_target_distance > 0.0);
        // default rank is min(n0, n1); every stop lives on the anchors
        for g in &path.graphs {
            assert_eq!(g.n(), 4);
            assert!((&g.marginal - &path.graphs[0].marginal).mapv(f64::abs).sum() < 1e-12);
        }
    }

    #[test]
    fn identical_endpoints_give_flat_path() {
        let g = random_graph(6, 2, 21);
        let cfg = LowRankConfig::default();
        let path = generate_path(&g, &g, 3, 0.5, &cfg).unwrap();
        let judge = FgwConfig::default();
        for s in 0..path.graphs.len() {
            for t in s + 1..path.graphs.len() {
                let d = fgw_distance_cg(&path.graphs[s], &path.graphs[t], &judge)
                    .unwrap()
                    .distance;
                assert!(d <= 1e-6, "stops {s},{t} are {d:.3e} apart");
            }
        }
    }

    #[test]
    fn product_reference_transform_stays_close_to_source() {
        let g0 = random_graph(4, 2, 31);
        let g1 = random_graph(3, 2, 32);
        let plan = product_reference_plan(&g0, &g1, 0.5).unwrap();
        assert_eq!(plan.rank(), 12);
        plan.validate(&g0.marginal, &g1.marginal, 1e-6).unwrap();
        let (t0, _t1) = transform_graphs(&g0, &g1, &plan, 1e-6).unwrap();
        let judge = FgwConfig::default();
        let d = fgw_distance_cg(&g0, &t0, &judge).unwrap().distance;
        assert!(d <= 1e-3, "source moved {d:.3e} under product lift");
    }

    #[test]
    fn product_reference_refuses_large_products() {
        let g0 = random_graph(12, 1, 41);
        let g1 = random_graph(12, 1, 42);
        assert!(product_reference_plan(&g0, &g1, 0.5).is_err());
    }

    #[test]
    fn step_rule_hand_value_and_floor() {
        // (q-1) C / (C_f delta) = 8/2 = 4; 4^(1/2) * 1.5 = 3
        assert_eq!(estimate_optimal_t(1.5, 8.0, 1.0, 2.0, 2.0).unwrap(), 3);
        assert_eq!(estimate_optimal_t(0.01, 8.0, 1.0, 2.0, 2.0).unwrap(), 1);
        assert!(estimate_optimal_t(-1.0, 8.0, 1.0, 2.0, 2.0).is_err());
        assert!(estimate_optimal_t(1.5, 8.0, 0.0, 2.0, 2.0).is_err());
    }

    #[test]
    fn path_quality_flags_degenerate_paths() {
        let g = random_graph(5, 2, 51);
        let cfg = LowRankConfig::default();
        let path = generate_path(&g, &g, 3, 0.5, &cfg).unwrap();
        let report = path_quality(&path, 0.5, 50).unwrap();
        assert!(report.degenerate);
        assert!(report.pearson.is_none());
        assert!(report.pairs.is_empty());
    }

    #[test]
    fn path_quality_tracks_linear_layout() {
        let g0 = random_graph(6, 2, 61);
        let g1 = random_graph(6, 2, 62);
        let cfg = LowRankConfig::default();
        let path = generate_path(&g0, &g1, 4, 0.5, &cfg).unwrap();
        let report = path_quality(&path, 0.5, 50).unwrap();
        assert!(!report.degenerate);
        assert_eq!(report.pairs.len(), 10);
        let r = report.pearson.expect("variance present");
        assert!(r > 0.9, "pearson {r:.4}");
    }

    #[test]
    fn path_quality_subsamples_long_paths() {
        let g0 = random_graph(4, 1, 71);
        let g1 = random_graph(4, 1, 72);
        let cfg = LowRankConfig::default();
        let path = generate_path(&g0, &g1, 12, 0.5, &cfg).unwrap();
        let report = path_quality(&path, 0.5, 20).unwrap();
        assert_eq!(report.pairs.len(), 20);
        for p in &report.pairs {
            assert!(p.lambda0 < p.lambda1);
        }
    }

    #[test]
    fn pearson_handles_edge_cases() {
        assert!(pearson(&[1.0], &[2.0]).is_none());
        assert!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_none());
        let r = pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        let r = pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap();
        assert!((r + 1.0).abs() < 1e-12);
    }

    #[test]
    fn save_and_load_round_trip() {
        let g0 = random_graph(4, 2, 81);
        let g1 = random_graph(4, 2, 82);
        let cfg = LowRankConfig::default();
        let path = generate_path(&g0, &g1, 2, 0.4, &cfg).unwrap();
        let dir = std::env::temp_dir().join(format!("gda_path_{}", std::process::id()));
        save_path(&dir, &path, 0.4).unwrap();
        let (loaded, alpha) = load_path(&dir).unwrap();
        std::fs::remove_dir_all(&dir).unwrap();
        assert_eq!(alpha, 0.4);
        assert_eq!(loaded.lambdas, path.lambdas);
        assert!((loaded.source_target_distance - path.source_target_distance).abs() < 1e-12);
        assert_eq!(loaded.graphs.len(), path.graphs.len());
        for (a, b) in loaded.graphs.iter().zip(&path.graphs) {
            assert!((&a.adjacency - &b.adjacency).mapv(f64::abs).sum() < 1e-9);
            assert!((&a.features - &b.features).mapv(f64::abs).sum() < 1e-9);
        }
    }
}
