//! Kraskov–Stögbauer–Grassberger estimators (algorithm 1) for mutual
//! information, conditional mutual information and conditional transfer
//! entropy. All values are in nats.
//!
//! For `I(Y; W | S)` the distance `ε(i)/2` to the T-th neighbor of row `i` is
//! taken in the joint `[Y, W, S]` space under the maximum norm; the marginal
//! counts `N_[W,S]`, `N_[Y,S]`, `N_S` are the admissible points strictly
//! inside that radius in the respective subspaces:
//!
//! ```text
//! I(Y;W|S) = ψ(T) + ⟨ψ(N_S + 1) − ψ(N_[W,S] + 1) − ψ(N_[Y,S] + 1)⟩
//! ```
//!
//! With no conditioning the `N_S` term becomes `ψ(N)`.
//!
//! Averages are accumulated as count histograms, so an estimate does not
//! depend on the order of the rows.

use std::cell::RefCell;

use serde::{Deserialize, Serialize};

use crate::data::EmbeddingState;
use crate::error::{Error, Result};
use crate::neighbors::{Metric, NeighborIndex};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Digamma function ψ(x) for x > 0.
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::DomainError(x));
    }
    let mut x = x;
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // Asymptotic expansion, Bernoulli-number coefficients.
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * 691.0 / 32760.0)))));
    Ok(acc + x.ln() - 0.5 * inv - series)
}

thread_local! {
    static PSI_TABLE: RefCell<Vec<f64>> = const { RefCell::new(Vec::new()) };
}

/// ψ(n) for positive integer n, memoized per thread.
fn psi_int(n: usize) -> f64 {
    debug_assert!(n >= 1);
    PSI_TABLE.with(|t| {
        let mut t = t.borrow_mut();
        if t.len() <= n {
            let start = t.len().max(1);
            if t.is_empty() {
                t.push(f64::NAN);
            }
            for k in start..=(n.max(1024)).max(2 * start) {
                t.push(if k == 1 { -EULER_GAMMA } else { digamma(k as f64).unwrap() });
            }
        }
        t[n]
    })
}

/// Σ_c hist[c]·ψ(c + 1), summed in count order.
fn psi_weighted_sum(hist: &[u32]) -> f64 {
    hist.iter()
        .enumerate()
        .filter(|(_, &h)| h > 0)
        .map(|(c, &h)| h as f64 * psi_int(c + 1))
        .sum()
}

/// Neighbor count `T` and Theiler window shared by all KSG estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KsgParams {
    pub neighbors: usize,
    pub theiler: usize,
}

impl KsgParams {
    pub fn new(neighbors: usize, theiler: usize) -> Self {
        assert!(neighbors >= 1, "KSG needs at least one neighbor");
        Self { neighbors, theiler }
    }
}

impl Default for KsgParams {
    fn default() -> Self {
        Self {
            neighbors: 10,
            theiler: 0,
        }
    }
}

fn check_rows(y: &[f64], cols: &[&[f64]]) -> Result<()> {
    if let Some(bad) = cols.iter().find(|c| c.len() != y.len()) {
        return Err(Error::ShapeMismatch {
            expected: format!("{} rows", y.len()),
            actual: format!("{} rows", bad.len()),
        });
    }
    Ok(())
}

/// A target and a conditioning set whose subspace indexes can be reused
/// across many `W` blocks.
pub(crate) struct ConditionalContext<'a> {
    y: &'a [f64],
    s: &'a [&'a [f64]],
    s_index: Option<&'a NeighborIndex>,
    ys_index: NeighborIndex,
    params: KsgParams,
}

impl<'a> ConditionalContext<'a> {
    /// `s_index` must index exactly `s` (max-norm, same Theiler window), or be
    /// `None` when `s` is empty.
    pub(crate) fn new(
        y: &'a [f64],
        s: &'a [&'a [f64]],
        s_index: Option<&'a NeighborIndex>,
        params: KsgParams,
    ) -> Result<Self> {
        check_rows(y, s)?;
        debug_assert_eq!(s.is_empty(), s_index.is_none());
        let mut ys: Vec<&[f64]> = Vec::with_capacity(s.len() + 1);
        ys.push(y);
        ys.extend_from_slice(s);
        let ys_index = NeighborIndex::new(&ys, Metric::MaxNorm, params.theiler)?;
        Ok(Self {
            y,
            s,
            s_index,
            ys_index,
            params,
        })
    }

    pub(crate) fn build_s_index(s: &[&[f64]], params: KsgParams) -> Result<Option<NeighborIndex>> {
        if s.is_empty() {
            Ok(None)
        } else {
            NeighborIndex::new(s, Metric::MaxNorm, params.theiler).map(Some)
        }
    }

    /// I(Y; W | S) for a (possibly multi-column) block `w`.
    pub(crate) fn cmi(&self, w: &[&[f64]]) -> Result<f64> {
        check_rows(self.y, w)?;
        if w.is_empty() {
            return Err(Error::InvalidParameter("empty W block".into()));
        }
        let n = self.y.len();
        let t = self.params.neighbors;

        let mut joint: Vec<&[f64]> = Vec::with_capacity(1 + w.len() + self.s.len());
        joint.push(self.y);
        joint.extend_from_slice(w);
        joint.extend_from_slice(self.s);
        let joint_index = NeighborIndex::new(&joint, Metric::MaxNorm, self.params.theiler)?;
        let ws_index = NeighborIndex::new(&joint[1..], Metric::MaxNorm, self.params.theiler)?;

        let mut hist_ws = vec![0u32; n];
        let mut hist_ys = vec![0u32; n];
        let mut hist_s = vec![0u32; n];
        let mut best = Vec::with_capacity(t + 1);
        for i in 0..n {
            joint_index.knn_into(i, t, &mut best)?;
            let half_eps = best[t - 1].0;
            hist_ws[ws_index.range_count(i, half_eps)] += 1;
            hist_ys[self.ys_index.range_count(i, half_eps)] += 1;
            if let Some(s_index) = self.s_index {
                hist_s[s_index.range_count(i, half_eps)] += 1;
            }
        }

        let psi_t = psi_int(t);
        let nf = n as f64;
        let estimate = match self.s_index {
            None => {
                // The Y subspace here is just y, so hist_ys holds the N_y counts.
                psi_t + psi_int(n) - (psi_weighted_sum(&hist_ws) + psi_weighted_sum(&hist_ys)) / nf
            }
            Some(_) => {
                psi_t
                    + (psi_weighted_sum(&hist_s) - psi_weighted_sum(&hist_ws) - psi_weighted_sum(&hist_ys)) / nf
            }
        };
        Ok(estimate)
    }
}

/// I(Y; W) for a target `y` and a block of columns `w`.
pub fn ksg_mi(y: &[f64], w: &[&[f64]], params: KsgParams) -> Result<f64> {
    let ctx = ConditionalContext::new(y, &[], None, params)?;
    ctx.cmi(w)
}

/// I(Y; W | S). An empty `s` reduces to [`ksg_mi`].
pub fn ksg_cmi(y: &[f64], w: &[f64], s: &[&[f64]], params: KsgParams) -> Result<f64> {
    let s_index = ConditionalContext::build_s_index(s, params)?;
    let ctx = ConditionalContext::new(y, s, s_index.as_ref(), params)?;
    ctx.cmi(&[w])
}

/// Conditional transfer entropy from channel `source` into the target, given
/// the target's embedding.
///
/// Embedding columns that are lags of `source` form the source block; the
/// remaining columns are the conditioning set. Without any source lag the
/// result is exactly zero.
pub fn ksg_cte(target: &[f64], embedding: &EmbeddingState, source: usize, params: KsgParams) -> Result<f64> {
    let (source_cols, rest): (Vec<_>, Vec<_>) = embedding
        .selected
        .iter()
        .zip(&embedding.realizations)
        .partition(|(c, _)| c.channel == source);
    if source_cols.is_empty() {
        return Ok(0.0);
    }
    let w: Vec<&[f64]> = source_cols.iter().map(|(_, col)| col.as_slice()).collect();
    let s: Vec<&[f64]> = rest.iter().map(|(_, col)| col.as_slice()).collect();
    let s_index = ConditionalContext::build_s_index(&s, params)?;
    let ctx = ConditionalContext::new(target, &s, s_index.as_ref(), params)?;
    ctx.cmi(&w)
}
