use ndarray::{Array1, Array2};

use crate::error::{GdaError, Result};

/// An attributed graph: weighted adjacency, node features, and a node marginal.
///
/// Adjacency is dense and symmetric (interpolated graphs carry fractional
/// weights, so entries are real-valued). The marginal is a probability vector
/// over nodes; labels are optional class ids.
#[derive(Debug, Clone)]
pub struct Graph {
    pub adjacency: Array2<f64>,
    pub features: Array2<f64>,
    pub marginal: Array1<f64>,
    pub labels: Option<Vec<usize>>,
}

impl Graph {
    /// Builds a graph and checks every type invariant: square symmetric
    /// adjacency, matching feature rows, marginal on the simplex, finite
    /// entries, label ids within range.
    pub fn new(
        adjacency: Array2<f64>,
        features: Array2<f64>,
        marginal: Array1<f64>,
        labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        let n = adjacency.nrows();
        if n == 0 {
            return Err(GdaError::Invalid("graph must have at least one node".into()));
        }
        if adjacency.ncols() != n {
            return Err(GdaError::Dimension(format!(
                "adjacency is {}x{}, expected square",
                adjacency.nrows(),
                adjacency.ncols()
            )));
        }
        if features.nrows() != n {
            return Err(GdaError::Dimension(format!(
                "features have {} rows for {} nodes",
                features.nrows(),
                n
            )));
        }
        if marginal.len() != n {
            return Err(GdaError::Dimension(format!(
                "marginal has length {} for {} nodes",
                marginal.len(),
                n
            )));
        }
        for &v in adjacency.iter().chain(features.iter()).chain(marginal.iter()) {
            if !v.is_finite() {
                return Err(GdaError::Invalid("non-finite entry".into()));
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if (adjacency[[i, j]] - adjacency[[j, i]]).abs() > 1e-9 {
                    return Err(GdaError::Invalid(format!(
                        "adjacency asymmetric at ({i},{j})"
                    )));
                }
            }
        }
        if marginal.iter().any(|&m| m < 0.0) {
            return Err(GdaError::Invalid("marginal has negative entry".into()));
        }
        let total: f64 = marginal.sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(GdaError::Invalid(format!("marginal sums to {total}")));
        }
        if let Some(ref lab) = labels {
            if lab.len() != n {
                return Err(GdaError::Dimension(format!(
                    "{} labels for {} nodes",
                    lab.len(),
                    n
                )));
            }
        }
        Ok(Graph {
            adjacency,
            features,
            marginal,
            labels,
        })
    }

    pub fn n(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }
}

/// Length-n uniform probability vector.
pub fn uniform_marginal(n: usize) -> Result<Array1<f64>> {
    if n == 0 {
        return Err(GdaError::Invalid("marginal over zero nodes".into()));
    }
    Ok(Array1::from_elem(n, 1.0 / n as f64))
}

/// Renormalizes a nonnegative vector onto the simplex; rejects vectors whose
/// sum strays from 1 by more than `tol` or that carry negative mass.
pub fn normalize_marginal(mut mu: Array1<f64>, tol: f64) -> Result<Array1<f64>> {
    if mu.iter().any(|&m| m < 0.0 || !m.is_finite()) {
        return Err(GdaError::Invalid("marginal entries must be finite and >= 0".into()));
    }
    let total = mu.sum();
    if (total - 1.0).abs() > tol {
        return Err(GdaError::Invalid(format!(
            "marginal sums to {total}, outside tolerance {tol}"
        )));
    }
    mu.mapv_inplace(|m| m / total);
    Ok(mu)
}

/// Pairwise Euclidean distances between the feature rows of two graphs:
/// M(u,v) = ||X0(u) - X1(v)||_2 (unsquared).
pub fn attribute_distance_matrix(g0: &Graph, g1: &Graph) -> Result<Array2<f64>> {
    if g0.feature_dim() != g1.feature_dim() {
        return Err(GdaError::Dimension(format!(
            "feature dims {} vs {}",
            g0.feature_dim(),
            g1.feature_dim()
        )));
    }
    Ok(pairwise_distances(&g0.features, &g1.features))
}

/// Unsquared pairwise Euclidean distances between the rows of two matrices.
pub fn pairwise_distances(x0: &Array2<f64>, x1: &Array2<f64>) -> Array2<f64> {
    let (n0, n1) = (x0.nrows(), x1.nrows());
    let mut m = Array2::zeros((n0, n1));
    for u in 0..n0 {
        let xu = x0.row(u);
        for v in 0..n1 {
            let d2: f64 = xu
                .iter()
                .zip(x1.row(v).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            m[[u, v]] = d2.max(0.0).sqrt();
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn tiny(adj: Array2<f64>) -> Graph {
        let n = adj.nrows();
        let feats = Array2::zeros((n, 2));
        Graph::new(adj, feats, uniform_marginal(n).unwrap(), None).unwrap()
    }

    #[test]
    fn uniform_marginal_values() {
        assert_eq!(
            uniform_marginal(4).unwrap().to_vec(),
            vec![0.25, 0.25, 0.25, 0.25]
        );
        assert_eq!(uniform_marginal(1).unwrap().to_vec(), vec![1.0]);
        let m3 = uniform_marginal(3).unwrap();
        assert!((m3.sum() - 1.0).abs() < 1e-15);
        assert!(uniform_marginal(0).is_err());
    }

    #[test]
    fn attribute_distance_hand_values() {
        let g0 = Graph::new(
            array![[0.0]],
            array![[1.0, 2.0]],
            array![1.0],
            None,
        )
        .unwrap();
        let m = attribute_distance_matrix(&g0, &g0).unwrap();
        assert_eq!(m[[0, 0]], 0.0);

        let ga = Graph::new(array![[0.0]], array![[0.0, 0.0]], array![1.0], None).unwrap();
        let gb = Graph::new(array![[0.0]], array![[3.0, 4.0]], array![1.0], None).unwrap();
        let m = attribute_distance_matrix(&ga, &gb).unwrap();
        assert!((m[[0, 0]] - 5.0).abs() < 1e-15);
    }

    #[test]
    fn attribute_distance_matches_double_loop() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x0 = Array2::from_shape_fn((3, 2), |_| rng.gen::<f64>());
        let x1 = Array2::from_shape_fn((4, 2), |_| rng.gen::<f64>());
        let m = pairwise_distances(&x0, &x1);
        for u in 0..3 {
            for v in 0..4 {
                let mut d2 = 0.0;
                for k in 0..2 {
                    let diff = x0[[u, k]] - x1[[v, k]];
                    d2 += diff * diff;
                }
                assert!((m[[u, v]] - d2.sqrt()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn self_distance_zero_diagonal_symmetric() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Array2::from_shape_fn((5, 3), |_| rng.gen::<f64>());
        let m = pairwise_distances(&x, &x);
        for i in 0..5 {
            assert_eq!(m[[i, i]], 0.0);
            for j in 0..5 {
                assert!((m[[i, j]] - m[[j, i]]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(Graph::new(
            array![[0.0, 2.0], [0.0, 0.0]],
            Array2::zeros((2, 1)),
            array![0.5, 0.5],
            None
        )
        .is_err());
        assert!(Graph::new(
            array![[0.0]],
            Array2::zeros((1, 1)),
            array![0.7],
            None
        )
        .is_err());
        assert!(Graph::new(
            array![[f64::NAN]],
            Array2::zeros((1, 1)),
            array![1.0],
            None
        )
        .is_err());
        let _ = tiny(array![[0.0, 1.0], [1.0, 0.0]]);
    }
}
