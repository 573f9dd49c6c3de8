//! Contextual stochastic block model graphs with two balanced classes.
//!
//! Nodes split evenly into a mu_plus class and a mu_minus class. Each
//! unordered pair is wired independently: probability p within a class,
//! q_inter across. Features are Gaussian with identity covariance around the
//! scalar class mean broadcast over all d dimensions. The user-facing knobs
//! are homophily h = p / (p + q_inter) and expected degree
//! deg = n (p + q_inter) / 2; the edge probabilities are solved from those.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{GdaError, Result};
use crate::graph::{uniform_marginal, Graph};

/// Sampling parameters for one CSBM graph.
///
/// Scalar class means broadcast over all d feature dimensions. Class 0
/// carries mu_plus, class 1 carries mu_minus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsbmSpec {
    pub n: usize,
    pub p: f64,
    pub q_inter: f64,
    pub mu_plus: f64,
    pub mu_minus: f64,
    pub d: usize,
    pub seed: u64,
}

impl CsbmSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.n % 2 != 0 {
            return Err(GdaError::Invalid(format!(
                "node count must be even and at least 2, got {}",
                self.n
            )));
        }
        if self.d == 0 {
            return Err(GdaError::Invalid("feature dimension must be positive".into()));
        }
        for (name, v) in [("p", self.p), ("q_inter", self.q_inter)] {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(GdaError::Invalid(format!(
                    "{name} must lie in [0, 1], got {v}"
                )));
            }
        }
        if !self.mu_plus.is_finite() || !self.mu_minus.is_finite() {
            return Err(GdaError::Invalid("class means must be finite".into()));
        }
        Ok(())
    }

    /// Solves (p, q_inter) from homophily and expected degree.
    ///
    /// p + q_inter = 2 deg / n and p = h (p + q_inter). Fails when the
    /// resulting probabilities leave [0, 1].
    #[allow(clippy::too_many_arguments)]
    pub fn from_homophily_degree(
        n: usize,
        h: f64,
        degree: f64,
        mu_plus: f64,
        mu_minus: f64,
        d: usize,
        seed: u64,
    ) -> Result<CsbmSpec> {
        if !(0.0..=1.0).contains(&h) {
            return Err(GdaError::Invalid(format!(
                "homophily must lie in [0, 1], got {h}"
            )));
        }
        if n == 0 {
            return Err(GdaError::Invalid("node count must be positive".into()));
        }
        let total = 2.0 * degree / n as f64;
        let spec = CsbmSpec {
            n,
            p: h * total,
            q_inter: (1.0 - h) * total,
            mu_plus,
            mu_minus,
            d,
            seed,
        };
        spec.validate().map_err(|_| {
            GdaError::Invalid(format!(
                "degree {degree} with homophily {h} on {n} nodes needs edge probabilities outside [0, 1]"
            ))
        })?;
        Ok(spec)
    }

    /// Homophily h = p / (p + q_inter); 0 when the graph has no edges.
    pub fn homophily(&self) -> f64 {
        let total = self.p + self.q_inter;
        if total == 0.0 {
            0.0
        } else {
            self.p / total
        }
    }

    /// Expected degree n (p + q_inter) / 2.
    pub fn expected_degree(&self) -> f64 {
        self.n as f64 * (self.p + self.q_inter) / 2.0
    }

    /// Scalar feature mean of the given class, broadcast over every dimension.
    pub fn class_mean(&self, class: usize) -> f64 {
        if class == 0 {
            self.mu_plus
        } else {
            self.mu_minus
        }
    }
}

/// Which distribution parameter a shift preset moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShiftKind {
    Attribute,
    Degree,
    Homophily,
}

impl std::str::FromStr for ShiftKind {
    type Err = GdaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "attribute" => Ok(ShiftKind::Attribute),
            "degree" => Ok(ShiftKind::Degree),
            "homophily" => Ok(ShiftKind::Homophily),
            other => Err(GdaError::Invalid(format!(
                "unknown shift kind '{other}' (expected attribute, degree, or homophily)"
            ))),
        }
    }
}

/// Which end of a shifted pair to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShiftSide {
    Source,
    Target,
}

impl std::str::FromStr for ShiftSide {
    type Err = GdaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "source" => Ok(ShiftSide::Source),
            "target" => Ok(ShiftSide::Target),
            other => Err(GdaError::Invalid(format!(
                "unknown side '{other}' (expected source or target)"
            ))),
        }
    }
}

/// Standard shifted-pair presets: 500 nodes, 64 feature dims, and defaults
/// h = 0.5, degree 40, means +-0.5 on whichever axes the kind leaves alone.
///
/// attribute: means (0.6, -0.4) -> (0.4, -0.6); degree: 80 -> 20;
/// homophily: h 0.8 -> 0.2.
pub fn csbm_shift_preset(kind: ShiftKind, side: ShiftSide, seed: u64) -> CsbmSpec {
    let n = 500;
    let d = 64;
    let mut h = 0.5;
    let mut degree = 40.0;
    let (mut mu_plus, mut mu_minus) = (0.5, -0.5);
    match (kind, side) {
        (ShiftKind::Attribute, ShiftSide::Source) => (mu_plus, mu_minus) = (0.6, -0.4),
        (ShiftKind::Attribute, ShiftSide::Target) => (mu_plus, mu_minus) = (0.4, -0.6),
        (ShiftKind::Degree, ShiftSide::Source) => degree = 80.0,
        (ShiftKind::Degree, ShiftSide::Target) => degree = 20.0,
        (ShiftKind::Homophily, ShiftSide::Source) => h = 0.8,
        (ShiftKind::Homophily, ShiftSide::Target) => h = 0.2,
    }
    // preset values are always feasible, so the solve cannot fail
    CsbmSpec::from_homophily_degree(n, h, degree, mu_plus, mu_minus, d, seed)
        .expect("presets stay inside [0, 1]")
}

/// Samples one labeled CSBM graph; deterministic given the spec's seed.
///
/// Nodes 0..n/2 are class 0 (mu_plus), the rest class 1 (mu_minus).
/// Features are drawn first, then the n(n-1)/2 pair coin flips in row order.
pub fn generate_csbm(spec: &CsbmSpec) -> Result<Graph> {
    spec.validate()?;
    let n = spec.n;
    let half = n / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let labels: Vec<usize> = (0..n).map(|i| usize::from(i >= half)).collect();
    let mut features = Array2::zeros((n, spec.d));
    for i in 0..n {
        let mean = spec.class_mean(labels[i]);
        for k in 0..spec.d {
            let z: f64 = rng.sample(StandardNormal);
            features[[i, k]] = mean + z;
        }
    }
    let mut adjacency = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let prob = if labels[i] == labels[j] { spec.p } else { spec.q_inter };
            if rng.gen::<f64>() < prob {
                adjacency[[i, j]] = 1.0;
                adjacency[[j, i]] = 1.0;
            }
        }
    }
    Graph::new(adjacency, features, uniform_marginal(n)?, Some(labels))
}
