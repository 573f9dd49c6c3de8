//! Exact linear optimal transport.
//!
//! `exact_ot` returns a vertex of the transportation polytope minimizing
//! `<cost, S>`. Uniform equal marginals on square costs reduce to the
//! assignment problem (shortest augmenting paths); everything else runs a
//! transportation simplex on the spanning-tree basis with deterministic
//! pivoting, so identical inputs always give identical plans.

use ndarray::{Array1, Array2};

use crate::error::{GdaError, Result};

const MARGINAL_MATCH_TOL: f64 = 1e-12;

/// Minimum-cost assignment on a square matrix; returns column of each row.
///
/// Shortest-augmenting-path method with dual potentials, O(n^3). Ties are
/// broken toward the lowest column index, which keeps results deterministic.
pub fn solve_assignment(cost: &Array2<f64>) -> Vec<usize> {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "assignment needs a square cost matrix");
    // p[j] = row matched to column j, n meaning unmatched; column n is virtual
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![n; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 0..n {
        p[n] = i;
        let mut j0 = n;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = n;
            for j in 0..n {
                if !used[j] {
                    let cur = cost[[i0, j]] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == n {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == n {
                break;
            }
        }
    }
    let mut row_to_col = vec![0usize; n];
    for j in 0..n {
        if p[j] < n {
            row_to_col[p[j]] = j;
        }
    }
    row_to_col
}

fn is_uniform(mu: &Array1<f64>) -> bool {
    let t = 1.0 / mu.len() as f64;
    mu.iter().all(|&m| (m - t).abs() <= MARGINAL_MATCH_TOL)
}

/// Exact minimizer of `<cost, S>` over couplings with the given marginals.
pub fn exact_ot(cost: &Array2<f64>, mu0: &Array1<f64>, mu1: &Array1<f64>) -> Result<Array2<f64>> {
    exact_ot_margin(cost, mu0, mu1, 1e-11)
}

/// `exact_ot` with an explicit reduced-cost optimality margin for the simplex
/// path; the assignment fast path is exact and ignores it.
pub(crate) fn exact_ot_margin(
    cost: &Array2<f64>,
    mu0: &Array1<f64>,
    mu1: &Array1<f64>,
    margin: f64,
) -> Result<Array2<f64>> {
    let (n0, n1) = (cost.nrows(), cost.ncols());
    if mu0.len() != n0 || mu1.len() != n1 {
        return Err(GdaError::Dimension(format!(
            "cost {}x{} vs marginals {}/{}",
            n0,
            n1,
            mu0.len(),
            mu1.len()
        )));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(GdaError::Invalid("cost matrix has non-finite entries".into()));
    }
    let (s0, s1) = (mu0.sum(), mu1.sum());
    if (s0 - s1).abs() > 1e-9 {
        return Err(GdaError::Invalid(format!(
            "marginal masses differ: {s0} vs {s1}"
        )));
    }
    if n0 == n1 && is_uniform(mu0) && is_uniform(mu1) {
        let cols = solve_assignment(cost);
        let mut plan = Array2::zeros((n0, n1));
        let w = 1.0 / n0 as f64;
        for (i, &j) in cols.iter().enumerate() {
            plan[[i, j]] = w;
        }
        return Ok(plan);
    }
    let (plan, _, _) = transport_simplex(cost, mu0, mu1, margin)?;
    Ok(plan)
}

/// Transportation simplex. Returns the plan and the final dual potentials,
/// which certify optimality (all reduced costs above -margin).
pub(crate) fn transport_simplex(
    cost: &Array2<f64>,
    mu0: &Array1<f64>,
    mu1: &Array1<f64>,
    margin: f64,
) -> Result<(Array2<f64>, Vec<f64>, Vec<f64>)> {
    let (n0, n1) = (cost.nrows(), cost.ncols());
    let total_nodes = n0 + n1;
    let mut flow = Array2::<f64>::zeros((n0, n1));
    let mut basis = Array2::<bool>::from_elem((n0, n1), false);

    // northwest-corner initial basic feasible solution; zero-flow arcs keep
    // the basis a spanning tree under degeneracy
    {
        let mut supply: Vec<f64> = mu0.to_vec();
        let mut demand: Vec<f64> = mu1.to_vec();
        let (mut i, mut j) = (0usize, 0usize);
        loop {
            let q = supply[i].min(demand[j]);
            flow[[i, j]] = q;
            basis[[i, j]] = true;
            supply[i] -= q;
            demand[j] -= q;
            if i + 1 == n0 && j + 1 == n1 {
                break;
            }
            if supply[i] <= demand[j] && i + 1 < n0 {
                i += 1;
            } else if j + 1 < n1 {
                j += 1;
            } else {
                i += 1;
            }
        }
    }

    // adjacency of the basis tree over nodes [rows 0..n0) and [cols n0..n0+n1)
    let rebuild_adj = |basis: &Array2<bool>| -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); total_nodes];
        for i in 0..n0 {
            for j in 0..n1 {
                if basis[[i, j]] {
                    adj[i].push(n0 + j);
                    adj[n0 + j].push(i);
                }
            }
        }
        adj
    };

    let max_pivots = 200 * total_nodes * total_nodes + 1000;
    let mut dantzig = true;
    let mut u = vec![0.0f64; n0];
    let mut v = vec![0.0f64; n1];
    for pivot in 0..max_pivots {
        // duals from a tree traversal rooted at row 0
        let adj = rebuild_adj(&basis);
        let mut seen = vec![false; total_nodes];
        let mut stack = vec![0usize];
        seen[0] = true;
        u[0] = 0.0;
        while let Some(node) = stack.pop() {
            for &next in &adj[node] {
                if !seen[next] {
                    seen[next] = true;
                    if node < n0 {
                        v[next - n0] = cost[[node, next - n0]] - u[node];
                    } else {
                        u[next] = cost[[next, node - n0]] - v[node - n0];
                    }
                    stack.push(next);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(GdaError::Numerical("transport basis lost connectivity".into()));
        }

        // entering arc: most negative reduced cost, or first negative once the
        // pivot budget suggests stalling (Bland's rule guarantees termination)
        let mut enter: Option<(usize, usize)> = None;
        let mut best = -margin.abs();
        'scan: for i in 0..n0 {
            for j in 0..n1 {
                if !basis[[i, j]] {
                    let red = cost[[i, j]] - u[i] - v[j];
                    if red < best {
                        enter = Some((i, j));
                        if dantzig {
                            best = red;
                        } else {
                            break 'scan;
                        }
                    }
                }
            }
        }
        let (ei, ej) = match enter {
            Some(arc) => arc,
            None => {
                return Ok((flow, u, v));
            }
        };
        if pivot > 50 * total_nodes * total_nodes {
            dantzig = false;
        }

        // unique tree path from row ei to column ej; the entering arc closes a cycle
        let mut parent = vec![usize::MAX; total_nodes];
        let mut seen = vec![false; total_nodes];
        let mut stack = vec![ei];
        seen[ei] = true;
        while let Some(node) = stack.pop() {
            if node == n0 + ej {
                break;
            }
            for &next in &adj[node] {
                if !seen[next] {
                    seen[next] = true;
                    parent[next] = node;
                    stack.push(next);
                }
            }
        }
        let mut path = vec![n0 + ej];
        while *path.last().unwrap() != ei {
            path.push(parent[*path.last().unwrap()]);
        }
        path.reverse(); // ei ... ej over tree arcs

        // alternate cycle arcs: (ei,ej) gains flow, odd path arcs lose it
        let mut minus_arcs: Vec<(usize, usize)> = Vec::new();
        let mut plus_arcs: Vec<(usize, usize)> = Vec::new();
        for w in path.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (ri, cj) = if a < n0 { (a, b - n0) } else { (b, a - n0) };
            if a < n0 {
                minus_arcs.push((ri, cj));
            } else {
                plus_arcs.push((ri, cj));
            }
        }
        let mut theta = f64::INFINITY;
        let mut leave = minus_arcs[0];
        for &(ri, cj) in &minus_arcs {
            let f = flow[[ri, cj]];
            if f < theta - 1e-15 {
                theta = f;
                leave = (ri, cj);
            }
        }
        for &(ri, cj) in &minus_arcs {
            flow[[ri, cj]] -= theta;
        }
        for &(ri, cj) in &plus_arcs {
            flow[[ri, cj]] += theta;
        }
        flow[[ei, ej]] = theta;
        basis[[leave.0, leave.1]] = false;
        flow[[leave.0, leave.1]] = 0.0;
        basis[[ei, ej]] = true;
    }
    Err(GdaError::Numerical("transport simplex exceeded pivot budget".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn brute_assignment(cost: &Array2<f64>) -> f64 {
        fn rec(cost: &Array2<f64>, row: usize, used: &mut Vec<bool>) -> f64 {
            let n = cost.nrows();
            if row == n {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for j in 0..n {
                if !used[j] {
                    used[j] = true;
                    let c = cost[[row, j]] + rec(cost, row + 1, used);
                    used[j] = false;
                    best = best.min(c);
                }
            }
            best
        }
        rec(cost, 0, &mut vec![false; cost.ncols()])
    }

    #[test]
    fn assignment_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=6 {
            for _ in 0..20 {
                let cost = Array2::from_shape_fn((n, n), |_| rng.gen::<f64>());
                let cols = solve_assignment(&cost);
                let mine: f64 = (0..n).map(|i| cost[[i, cols[i]]]).sum();
                let mut sorted = cols.clone();
                sorted.sort_unstable();
                assert_eq!(sorted, (0..n).collect::<Vec<_>>(), "not a permutation");
                assert!((mine - brute_assignment(&cost)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exact_ot_uniform_square_is_permutation() {
        let cost = array![[1.0, 2.0, 0.0], [2.0, 0.0, 1.0], [0.0, 2.0, 1.0]];
        let mu = array![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];
        let plan = exact_ot(&cost, &mu, &mu).unwrap();
        assert!((plan[[0, 2]] - 1.0 / 3.0).abs() < 1e-15);
        assert!((plan[[1, 1]] - 1.0 / 3.0).abs() < 1e-15);
        assert!((plan[[2, 0]] - 1.0 / 3.0).abs() < 1e-15);
    }

    /// Feasibility plus nonnegative reduced costs is a complete optimality
    /// certificate for the transportation LP, so this needs no external oracle.
    #[test]
    fn simplex_produces_certified_optima() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..40 {
            let n0 = rng.gen_range(1..7);
            let n1 = rng.gen_range(1..7);
            let cost = Array2::from_shape_fn((n0, n1), |_| rng.gen::<f64>());
            let mut a: Vec<f64> = (0..n0).map(|_| rng.gen::<f64>() + 0.05).collect();
            let mut b: Vec<f64> = (0..n1).map(|_| rng.gen::<f64>() + 0.05).collect();
            let sa: f64 = a.iter().sum();
            let sb: f64 = b.iter().sum();
            a.iter_mut().for_each(|x| *x /= sa);
            b.iter_mut().for_each(|x| *x /= sb);
            let mu0 = Array1::from_vec(a);
            let mu1 = Array1::from_vec(b);
            let (plan, u, v) = transport_simplex(&cost, &mu0, &mu1, 1e-11).unwrap();
            for i in 0..n0 {
                let r: f64 = plan.row(i).sum();
                assert!((r - mu0[i]).abs() < 1e-12);
            }
            for j in 0..n1 {
                let c: f64 = plan.column(j).sum();
                assert!((c - mu1[j]).abs() < 1e-12);
            }
            for i in 0..n0 {
                for j in 0..n1 {
                    assert!(plan[[i, j]] >= -1e-15);
                    let red = cost[[i, j]] - u[i] - v[j];
                    assert!(red > -1e-9, "negative reduced cost {red}");
                    if plan[[i, j]] > 1e-12 {
                        assert!(red.abs() < 1e-9, "support off the dual face");
                    }
                }
            }
        }
    }

    #[test]
    fn simplex_agrees_with_assignment_on_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for n in 2..7 {
            let cost = Array2::from_shape_fn((n, n), |_| rng.gen::<f64>());
            let mu = Array1::from_elem(n, 1.0 / n as f64);
            let (plan, _, _) = transport_simplex(&cost, &mu, &mu, 1e-11).unwrap();
            let cols = solve_assignment(&cost);
            let hungarian: f64 = (0..n).map(|i| cost[[i, cols[i]]]).sum::<f64>() / n as f64;
            let simplex: f64 = (&plan * cost).sum();
            assert!((hungarian - simplex).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_mismatched_masses() {
        let cost = Array2::zeros((2, 2));
        assert!(exact_ot(&cost, &array![0.6, 0.6], &array![0.5, 0.5]).is_err());
    }
}
