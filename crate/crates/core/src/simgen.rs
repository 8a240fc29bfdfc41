//! Synthetic systems with known coupling: five coupled Henon maps, a
//! five-node nonlinear autoregressive network, and instantaneous mixing.
//!
//! Channel indices are zero-based throughout; channel `c` is labelled
//! `ch{c+1}`.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::MultivariateSeries;
use crate::error::{Error, Result};

/// Samples discarded before the returned window starts.
pub const BURN_IN: usize = 1000;
const MAX_RESTARTS: usize = 100;
const DIVERGENCE_BOUND: f64 = 1e6;
const MIN_LEN: usize = 32;
const N_NODES: usize = 5;

/// A directed `source → target` coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub n_channels: usize,
    pub edges: BTreeSet<Edge>,
}

impl GroundTruth {
    pub fn new(n_channels: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (source, target) in edges {
            if source == target {
                return Err(Error::InvalidParameter(format!("self-loop on channel {source}")));
            }
            if source >= n_channels || target >= n_channels {
                return Err(Error::InvalidParameter(format!(
                    "edge {source}->{target} outside {n_channels} channels"
                )));
            }
            set.insert(Edge { source, target });
        }
        Ok(Self { n_channels, edges: set })
    }

    pub fn empty(n_channels: usize) -> Self {
        Self {
            n_channels,
            edges: BTreeSet::new(),
        }
    }

    pub fn contains(&self, source: usize, target: usize) -> bool {
        self.edges.contains(&Edge { source, target })
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Ordered pairs without an edge.
    pub fn n_non_edges(&self) -> usize {
        self.n_channels * self.n_channels.saturating_sub(1) - self.edges.len()
    }

    /// Relabels channels: channel `c` becomes `perm[c]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        GroundTruth::new(
            self.n_channels,
            self.edges.iter().map(|e| (perm[e.source], perm[e.target])),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidParameter(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: GroundTruth = serde_json::from_str(s).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        GroundTruth::new(raw.n_channels, raw.edges.iter().map(|e| (e.source, e.target)))
    }
}

fn check_len(n: usize) -> Result<()> {
    if n < MIN_LEN {
        return Err(Error::InvalidParameter(format!(
            "series length must be at least {MIN_LEN}, got {n}"
        )));
    }
    Ok(())
}

/// Henon coupling template: each interior node is driven by both neighbors.
pub fn henon_truth(q: f64) -> GroundTruth {
    if q > 0.0 {
        GroundTruth::new(N_NODES, [(0, 1), (2, 1), (1, 2), (3, 2), (2, 3), (4, 3)]).unwrap()
    } else {
        GroundTruth::empty(N_NODES)
    }
}

/// One step of the five coupled Henon maps from the two previous states.
pub fn henon_step(prev: &[f64; 5], prev2: &[f64; 5], q: f64) -> [f64; 5] {
    let mut next = [0.0; 5];
    for l in 0..N_NODES {
        let drive = if l == 0 || l == N_NODES - 1 {
            prev[l]
        } else {
            0.5 * q * (prev[l - 1] + prev[l + 1]) + (1.0 - q) * prev[l]
        };
        next[l] = 1.4 - drive * drive + 0.3 * prev2[l];
    }
    next
}

fn henon_attempt(n: usize, q: f64, rng: &mut ChaCha8Rng) -> Option<Vec<Vec<f64>>> {
    let mut prev2: [f64; 5] = std::array::from_fn(|_| rng.random::<f64>());
    let mut prev: [f64; 5] = std::array::from_fn(|_| rng.random::<f64>());
    let mut out = vec![Vec::with_capacity(n); N_NODES];
    for step in 0..BURN_IN + n {
        let next = henon_step(&prev, &prev2, q);
        if next.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_BOUND) {
            return None;
        }
        if step >= BURN_IN {
            for (c, v) in next.iter().enumerate() {
                out[c].push(*v);
            }
        }
        prev2 = prev;
        prev = next;
    }
    Some(out)
}

/// Five coupled Henon maps of length `n` with coupling strength `q`.
///
/// Initial conditions are uniform on [0, 1); a run that escapes to
/// |y| > 1e6 restarts from fresh initial conditions.
pub fn henon(n: usize, q: f64, seed: u64) -> Result<(MultivariateSeries, GroundTruth)> {
    check_len(n)?;
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidParameter(format!("coupling must lie in [0, 1], got {q}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..=MAX_RESTARTS {
        if let Some(values) = henon_attempt(n, q, &mut rng) {
            return Ok((MultivariateSeries::from_channels(values)?, henon_truth(q)));
        }
    }
    Err(Error::Diverged {
        restarts: MAX_RESTARTS,
    })
}

/// Coupling template of the nonlinear AR network.
pub fn ar_truth() -> GroundTruth {
    GroundTruth::new(N_NODES, [(0, 1), (0, 2), (1, 2), (0, 3), (3, 4)]).unwrap()
}

/// Runs the AR network from a zero state on `innovations`
/// (5 channels of equal length `BURN_IN + n`) and returns the last `n` rows.
pub fn nonlinear_ar_from_innovations(innovations: &[Vec<f64>], n: usize) -> Result<MultivariateSeries> {
    if innovations.len() != N_NODES {
        return Err(Error::ShapeMismatch {
            expected: format!("{N_NODES} innovation channels"),
            actual: format!("{}", innovations.len()),
        });
    }
    let total = BURN_IN + n;
    if let Some(bad) = innovations.iter().find(|e| e.len() != total) {
        return Err(Error::ShapeMismatch {
            expected: format!("{total} innovations per channel"),
            actual: format!("{}", bad.len()),
        });
    }
    let r2 = std::f64::consts::SQRT_2;
    let mut y = vec![vec![0.0; total]; N_NODES];
    let at = |y: &Vec<Vec<f64>>, c: usize, t: usize, lag: usize| if t >= lag { y[c][t - lag] } else { 0.0 };
    for t in 0..total {
        let e = |c: usize| innovations[c][t];
        let y1_1 = at(&y, 0, t, 1);
        let v0 = 0.95 * r2 * y1_1 - 0.9125 * at(&y, 0, t, 2) + e(0);
        let y1_2 = at(&y, 0, t, 2);
        let v1 = 0.5 * y1_2 * y1_2 + e(1);
        let v2 = -0.4 * at(&y, 0, t, 3) + 0.4 * at(&y, 1, t, 1) + e(2);
        let v3 = -0.5 * y1_1 * y1_1 + 0.25 * r2 * at(&y, 3, t, 1) + e(3);
        let v4 = -0.25 * r2 * at(&y, 3, t, 1) + 0.25 * r2 * at(&y, 4, t, 2) + e(4);
        for (c, v) in [v0, v1, v2, v3, v4].into_iter().enumerate() {
            y[c][t] = v;
        }
    }
    let values = y.into_iter().map(|c| c[BURN_IN..].to_vec()).collect();
    MultivariateSeries::from_channels(values)
}

/// The nonlinear AR network driven by independent standard Gaussian noise.
pub fn nonlinear_ar(n: usize, seed: u64) -> Result<(MultivariateSeries, GroundTruth)> {
    check_len(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = BURN_IN + n;
    let innovations: Vec<Vec<f64>> = (0..N_NODES)
        .map(|_| (0..total).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    Ok((nonlinear_ar_from_innovations(&innovations, n)?, ar_truth()))
}

/// The 5×5 mixing matrix with `1 − α` on the diagonal and `α` elsewhere.
pub fn mixing_matrix(alpha: f64) -> [[f64; 5]; 5] {
    std::array::from_fn(|r| std::array::from_fn(|c| if r == c { 1.0 - alpha } else { alpha }))
}

/// Instantaneous mixing `Y·A`: output channel `c` is `Σ_r Y_r · A[r][c]`.
pub fn mix(series: &MultivariateSeries, alpha: f64) -> Result<MultivariateSeries> {
    if series.n_channels() != N_NODES {
        return Err(Error::ShapeMismatch {
            expected: format!("{N_NODES} channels"),
            actual: format!("{}", series.n_channels()),
        });
    }
    if !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!("mixing strength must be finite, got {alpha}")));
    }
    if alpha == 0.0 {
        return Ok(series.clone());
    }
    let a = mixing_matrix(alpha);
    let input = series.channels();
    let values = (0..N_NODES)
        .map(|c| {
            (0..series.len())
                .map(|t| (0..N_NODES).map(|r| input[r][t] * a[r][c]).sum())
                .collect()
        })
        .collect();
    series.with_values(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn henon_hand_step() {
        let next = henon_step(&[0.5; 5], &[0.1; 5], 0.6);
        assert!((next[0] - 1.18).abs() < 1e-12);
        assert!((next[4] - 1.18).abs() < 1e-12);
    }

    #[test]
    fn henon_edge_counts() {
        let t = henon_truth(0.6);
        assert_eq!((t.n_edges(), t.n_non_edges()), (6, 14));
        assert_eq!(henon_truth(0.0).n_edges(), 0);
        let ar = ar_truth();
        assert_eq!((ar.n_edges(), ar.n_non_edges()), (5, 15));
    }

    #[test]
    fn decoupled_henon_nodes_follow_first_row() {
        let prev = [0.3, -0.2, 0.7, 0.1, 0.9];
        let prev2 = [0.0, 0.4, -0.5, 0.2, 0.6];
        let next = henon_step(&prev, &prev2, 0.0);
        for l in 0..5 {
            assert_eq!(next[l], 1.4 - prev[l] * prev[l] + 0.3 * prev2[l]);
        }
    }

    #[test]
    fn zero_innovations_stay_at_zero() {
        let innov = vec![vec![0.0; BURN_IN + 40]; 5];
        let s = nonlinear_ar_from_innovations(&innov, 40);
        // An all-zero channel is still a valid series.
        let s = s.unwrap();
        assert!(s.channels().iter().all(|c| c.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn mixing_first_row() {
        let mut values = vec![vec![0.0; 2]; 5];
        values[0][0] = 1.0;
        values[1][1] = 1.0;
        let s = MultivariateSeries::from_channels(values).unwrap();
        let m = mix(&s, 0.2).unwrap();
        let row0: Vec<f64> = (0..5).map(|c| m.channel(c)[0]).collect();
        assert_eq!(row0, vec![0.8, 0.2, 0.2, 0.2, 0.2]);
    }

    #[test]
    fn mixing_column_sums() {
        let a = mixing_matrix(0.1);
        for c in 0..5 {
            let s: f64 = (0..5).map(|r| a[r][c]).sum();
            assert!((s - 1.3).abs() < 1e-12);
        }
    }

    #[test]
    fn short_series_rejected() {
        assert!(henon(31, 0.6, 0).is_err());
        assert!(nonlinear_ar(10, 0).is_err());
    }

    #[test]
    fn truth_json_round_trip() {
        let t = henon_truth(0.4);
        assert_eq!(GroundTruth::from_json(&t.to_json().unwrap()).unwrap(), t);
        assert!(GroundTruth::new(3, [(1, 1)]).is_err());
    }
}
