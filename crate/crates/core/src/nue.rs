//! Greedy non-uniform embedding (NUE) and the per-target dependency analysis.
//!
//! Each run starts from an empty embedding and repeatedly picks one lagged
//! candidate, then asks a termination test whether to keep it. Four variants
//! are provided:
//!
//! | algorithm   | ranking                               | termination                  |
//! |-------------|---------------------------------------|------------------------------|
//! | `bootstrap` | max I(Y; W \| S)                      | permutation percentile of CMI |
//! | `la`        | low-dimensional approximation of CMI  | permutation percentile of LA  |
//! | `aic`       | max I(Y; W \| S)                      | kernel-regression AIC         |
//! | `msr`       | max (1−λ)·I(Y; W \| S) − λ·MSR(Y \| W,S) | MSR improvement > γ        |
//!
//! The rejected candidate of the last iteration is recorded in the trace but
//! never enters the embedding.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{build_candidate_pool, candidate_slice, sample_sd, target_slice, Candidate, EmbeddingState, MultivariateSeries};
use crate::error::{Error, Result};
use crate::estimators::{ksg_cte, ConditionalContext, KsgParams};
use crate::neighbors::{jitter, NeighborIndex};
use crate::prediction::{aic_score, msr};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Bootstrap,
    La,
    Aic,
    Msr,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Bootstrap => "bootstrap",
            Algorithm::La => "la",
            Algorithm::Aic => "aic",
            Algorithm::Msr => "msr",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bootstrap" => Ok(Algorithm::Bootstrap),
            "la" => Ok(Algorithm::La),
            "aic" => Ok(Algorithm::Aic),
            "msr" => Ok(Algorithm::Msr),
            other => Err(Error::InvalidParameter(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Which AIC change admits a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AicRule {
    /// Keep the candidate when AIC decreases (lower is better).
    #[default]
    Decrease,
    /// Keep the candidate when AIC increases.
    Increase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NueConfig {
    pub algorithm: Algorithm,
    /// Embedding delay.
    pub m: usize,
    /// Embedding dimension (number of lags per channel).
    pub d: usize,
    /// Neighbor count for KSG and NN prediction.
    pub neighbors: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub bootstrap_size: usize,
    pub percentile: f64,
    pub theiler: usize,
    /// Defaults to the pool size.
    pub max_iterations: Option<usize>,
    pub seed: u64,
    pub aic_rule: AicRule,
    /// Jitter amplitude relative to each channel's standard deviation.
    pub jitter: f64,
}

impl Default for NueConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Msr,
            m: 1,
            d: 5,
            neighbors: 10,
            lambda: 0.5,
            gamma: 0.0,
            bootstrap_size: 100,
            percentile: 95.0,
            theiler: 0,
            max_iterations: None,
            seed: 0,
            aic_rule: AicRule::Decrease,
            jitter: 1e-10,
        }
    }
}

impl NueConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.m == 0 || self.d == 0 {
            return bad(format!("m and d must be positive (m={}, d={})", self.m, self.d));
        }
        if self.neighbors == 0 {
            return bad("neighbor count must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda must lie in [0, 1], got {}", self.lambda));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be non-negative, got {}", self.gamma));
        }
        if self.bootstrap_size == 0 {
            return bad("bootstrap size must be positive".into());
        }
        if !(self.percentile > 0.0 && self.percentile < 100.0) {
            return bad(format!("percentile must lie in (0, 100), got {}", self.percentile));
        }
        if self.max_iterations == Some(0) {
            return bad("max_iterations must be positive".into());
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return bad(format!("jitter must be non-negative, got {}", self.jitter));
        }
        Ok(())
    }

    pub fn ksg(&self) -> KsgParams {
        KsgParams::new(self.neighbors, self.theiler)
    }
}

/// A target vector together with the realizations of every pool candidate.
#[derive(Debug, Clone)]
pub struct CandidateSet<'a> {
    target: &'a [f64],
    pool: Vec<Candidate>,
    columns: Vec<&'a [f64]>,
}

impl<'a> CandidateSet<'a> {
    pub fn new(target: &'a [f64], pool: Vec<Candidate>, columns: Vec<&'a [f64]>) -> Result<Self> {
        if pool.len() != columns.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} columns", pool.len()),
                actual: format!("{} columns", columns.len()),
            });
        }
        if let Some(bad) = columns.iter().find(|c| c.len() != target.len()) {
            return Err(Error::ShapeMismatch {
                expected: format!("{} rows", target.len()),
                actual: format!("{} rows", bad.len()),
            });
        }
        Ok(Self { target, pool, columns })
    }

    /// The full `L·d` pool for `target`, as views into `series`.
    pub fn from_series(series: &'a MultivariateSeries, target: usize, m: usize, d: usize) -> Result<Self> {
        if target >= series.n_channels() {
            return Err(Error::InvalidParameter(format!("target {target} out of range")));
        }
        let y = target_slice(series, target, m, d)?;
        let pool = build_candidate_pool(series.n_channels(), m, d);
        let columns = pool
            .iter()
            .map(|&c| candidate_slice(series, c, m, d))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { target: y, pool, columns })
    }

    pub fn target(&self) -> &'a [f64] {
        self.target
    }

    pub fn pool(&self) -> &[Candidate] {
        &self.pool
    }

    pub fn column(&self, pool_index: usize) -> &'a [f64] {
        self.columns[pool_index]
    }

    fn remaining(&self, state: &EmbeddingState) -> Vec<usize> {
        (0..self.pool.len())
            .filter(|&i| !state.contains(&self.pool[i]))
            .collect()
    }
}

/// The winner of one selection step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub candidate: Candidate,
    pub pool_index: usize,
    /// Criterion value of the winner.
    pub value: f64,
    /// MSR of the target given the winner and the current embedding
    /// (MSR-based selection only).
    pub msr: Option<f64>,
}

/// First maximum in pool order.
fn argmax(scores: &[(usize, f64)]) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for &(i, v) in scores {
        if best.is_none_or(|(_, bv)| v > bv) {
            best = Some((i, v));
        }
    }
    best.ok_or(Error::EmptyPool)
}

/// Ranks remaining candidates by I(Y; W | S).
pub fn select_cmi(set: &CandidateSet<'_>, state: &EmbeddingState, params: KsgParams) -> Result<Selection> {
    let remaining = set.remaining(state);
    if remaining.is_empty() {
        return Err(Error::EmptyPool);
    }
    let s = state.columns();
    let s_index = ConditionalContext::build_s_index(&s, params)?;
    let ctx = ConditionalContext::new(set.target, &s, s_index.as_ref(), params)?;
    let scores = remaining
        .par_iter()
        .map(|&i| ctx.cmi(&[set.columns[i]]).map(|v| (i, v)))
        .collect::<Result<Vec<_>>>()?;
    let (i, value) = argmax(&scores)?;
    Ok(Selection {
        candidate: set.pool[i],
        pool_index: i,
        value,
        msr: None,
    })
}

/// Estimator contexts for the low-dimensional approximation of the CMI,
/// built once per iteration.
struct LaContext<'a> {
    target: ConditionalContext<'a>,
    /// I(W; W_j) for each selected W_j.
    redundancy: Vec<ConditionalContext<'a>>,
    /// I(W; W_j | Y) for each selected W_j.
    synergy: Vec<ConditionalContext<'a>>,
}

impl<'a> LaContext<'a> {
    fn new(
        y: &'a [f64],
        y_block: &'a [&'a [f64]],
        y_index: &'a NeighborIndex,
        selected: &'a [Vec<f64>],
        params: KsgParams,
    ) -> Result<Self> {
        let target = ConditionalContext::new(y, &[], None, params)?;
        let redundancy = selected
            .iter()
            .map(|wj| ConditionalContext::new(wj, &[], None, params))
            .collect::<Result<Vec<_>>>()?;
        let synergy = selected
            .iter()
            .map(|wj| ConditionalContext::new(wj, y_block, Some(y_index), params))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            target,
            redundancy,
            synergy,
        })
    }

    /// I(W;Y) − (2/|S|)·Σ I(W;W_j) + (2/|S|)·Σ I(W;W_j|Y); the sums vanish
    /// for an empty embedding.
    fn score(&self, w: &[f64]) -> Result<f64> {
        let relevance = self.target.cmi(&[w])?;
        let k = self.redundancy.len();
        if k == 0 {
            return Ok(relevance);
        }
        let mut redundancy = 0.0;
        for ctx in &self.redundancy {
            redundancy += ctx.cmi(&[w])?;
        }
        let mut synergy = 0.0;
        for ctx in &self.synergy {
            synergy += ctx.cmi(&[w])?;
        }
        let scale = 2.0 / k as f64;
        Ok(relevance - scale * redundancy + scale * synergy)
    }
}

fn la_score_once(y: &[f64], selected: &[Vec<f64>], w: &[f64], params: KsgParams) -> Result<f64> {
    let y_block = [y];
    let y_index = NeighborIndex::new(&y_block, crate::neighbors::Metric::MaxNorm, params.theiler)?;
    let ctx = LaContext::new(y, &y_block, &y_index, selected, params)?;
    ctx.score(w)
}

/// Ranks remaining candidates by the low-dimensional approximation of
/// I(Y; W | S).
pub fn select_la(set: &CandidateSet<'_>, state: &EmbeddingState, params: KsgParams) -> Result<Selection> {
    let remaining = set.remaining(state);
    if remaining.is_empty() {
        return Err(Error::EmptyPool);
    }
    let y_block = [set.target];
    let y_index = NeighborIndex::new(&y_block, crate::neighbors::Metric::MaxNorm, params.theiler)?;
    let ctx = LaContext::new(set.target, &y_block, &y_index, &state.realizations, params)?;
    let scores = remaining
        .par_iter()
        .map(|&i| ctx.score(set.columns[i]).map(|v| (i, v)))
        .collect::<Result<Vec<_>>>()?;
    let (i, value) = argmax(&scores)?;
    Ok(Selection {
        candidate: set.pool[i],
        pool_index: i,
        value,
        msr: None,
    })
}

fn design<'a>(w: &'a [f64], state: &'a EmbeddingState) -> Vec<&'a [f64]> {
    let mut u = Vec::with_capacity(state.len() + 1);
    u.push(w);
    u.extend(state.realizations.iter().map(Vec::as_slice));
    u
}

/// Ranks remaining candidates by `(1−λ)·I(Y; W | S) − λ·MSR(Y | W, S)`.
///
/// At `λ = 1` no CMI is estimated; at `λ = 0` only the winner's MSR is.
pub fn select_msr(
    set: &CandidateSet<'_>,
    state: &EmbeddingState,
    params: KsgParams,
    lambda: f64,
) -> Result<Selection> {
    let remaining = set.remaining(state);
    if remaining.is_empty() {
        return Err(Error::EmptyPool);
    }
    let y = set.target;
    let s = state.columns();
    let need_cmi = lambda < 1.0;
    let need_msr = lambda > 0.0;
    let s_index = if need_cmi {
        ConditionalContext::build_s_index(&s, params)?
    } else {
        None
    };
    let ctx = if need_cmi {
        Some(ConditionalContext::new(y, &s, s_index.as_ref(), params)?)
    } else {
        None
    };

    let scored = remaining
        .par_iter()
        .map(|&i| {
            let w = set.columns[i];
            let m = if need_msr {
                Some(msr(y, &design(w, state), params.neighbors, params.theiler)?.msr)
            } else {
                None
            };
            let value = match (&ctx, m) {
                (Some(ctx), Some(m)) => (1.0 - lambda) * ctx.cmi(&[w])? - lambda * m,
                (Some(ctx), None) => ctx.cmi(&[w])?,
                (None, Some(m)) => -m,
                (None, None) => unreachable!("lambda in [0, 1] needs at least one term"),
            };
            Ok((i, value, m))
        })
        .collect::<Result<Vec<_>>>()?;
    let scores: Vec<(usize, f64)> = scored.iter().map(|&(i, v, _)| (i, v)).collect();
    let (best, value) = argmax(&scores)?;
    let best_msr = match scored.iter().find(|&&(i, _, _)| i == best).and_then(|t| t.2) {
        Some(m) => m,
        None => msr(y, &design(set.columns[best], state), params.neighbors, params.theiler)?.msr,
    };
    Ok(Selection {
        candidate: set.pool[best],
        pool_index: best,
        value,
        msr: Some(best_msr),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Continue,
    Stop,
}

impl Decision {
    fn from_bool(keep: bool) -> Self {
        if keep {
            Decision::Continue
        } else {
            Decision::Stop
        }
    }

    pub fn is_continue(self) -> bool {
        self == Decision::Continue
    }
}

/// Outcome of a statistical termination test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerminationTest {
    pub decision: Decision,
    pub statistic: f64,
    pub threshold: f64,
}

/// Nearest-rank percentile of an ascending slice.
pub fn percentile_nearest_rank(sorted: &[f64], percentile: f64) -> f64 {
    assert!(!sorted.is_empty());
    let rank = (percentile / 100.0 * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn permuted<R: Rng + ?Sized>(x: &[f64], rng: &mut R) -> Vec<f64> {
    let mut v = x.to_vec();
    v.shuffle(rng);
    v
}

/// Compares I(Y; W | S) with the chosen percentile of its values after
/// independently permuting the rows of `y` and of `w` (S kept intact).
pub fn bootstrap_terminate<R: Rng + ?Sized>(
    y: &[f64],
    w_best: &[f64],
    state: &EmbeddingState,
    params: KsgParams,
    bootstrap_size: usize,
    percentile: f64,
    rng: &mut R,
) -> Result<TerminationTest> {
    let s = state.columns();
    let s_index = ConditionalContext::build_s_index(&s, params)?;
    let statistic = ConditionalContext::new(y, &s, s_index.as_ref(), params)?.cmi(&[w_best])?;
    let shuffled: Vec<(Vec<f64>, Vec<f64>)> = (0..bootstrap_size)
        .map(|_| {
            let ys = permuted(y, rng);
            let ws = permuted(w_best, rng);
            (ys, ws)
        })
        .collect();
    let mut null = shuffled
        .par_iter()
        .map(|(ys, ws)| ConditionalContext::new(ys, &s, s_index.as_ref(), params)?.cmi(&[ws]))
        .collect::<Result<Vec<_>>>()?;
    null.sort_by(f64::total_cmp);
    let threshold = percentile_nearest_rank(&null, percentile);
    Ok(TerminationTest {
        decision: Decision::from_bool(statistic > threshold),
        statistic,
        threshold,
    })
}

/// The same permutation test on the low-dimensional approximation score.
pub fn la_bootstrap_terminate<R: Rng + ?Sized>(
    y: &[f64],
    w_best: &[f64],
    state: &EmbeddingState,
    params: KsgParams,
    bootstrap_size: usize,
    percentile: f64,
    rng: &mut R,
) -> Result<TerminationTest> {
    let statistic = la_score_once(y, &state.realizations, w_best, params)?;
    let shuffled: Vec<(Vec<f64>, Vec<f64>)> = (0..bootstrap_size)
        .map(|_| {
            let ys = permuted(y, rng);
            let ws = permuted(w_best, rng);
            (ys, ws)
        })
        .collect();
    let mut null = shuffled
        .par_iter()
        .map(|(ys, ws)| la_score_once(ys, &state.realizations, ws, params))
        .collect::<Result<Vec<_>>>()?;
    null.sort_by(f64::total_cmp);
    let threshold = percentile_nearest_rank(&null, percentile);
    Ok(TerminationTest {
        decision: Decision::from_bool(statistic > threshold),
        statistic,
        threshold,
    })
}

fn aic_decision(previous: f64, current: f64, rule: AicRule) -> Decision {
    Decision::from_bool(match rule {
        AicRule::Decrease => current < previous,
        AicRule::Increase => current > previous,
    })
}

/// Kernel-regression AIC of the extended embedding against the previous one.
///
/// An empty previous embedding admits the candidate unconditionally; an
/// unchanged embedding, or one whose covariance is numerically singular
/// (a redundant column), stops.
pub fn aic_terminate(
    y: &[f64],
    state_k: &EmbeddingState,
    state_k_minus_1: &EmbeddingState,
    rule: AicRule,
) -> Result<TerminationTest> {
    let stop = TerminationTest {
        decision: Decision::Stop,
        statistic: f64::NAN,
        threshold: f64::NAN,
    };
    if state_k.selected == state_k_minus_1.selected {
        return Ok(stop);
    }
    let current = match aic_score(y, &state_k.columns()) {
        Ok(v) => v,
        Err(Error::SingularCovariance { .. }) if !state_k_minus_1.is_empty() => return Ok(stop),
        Err(e) => return Err(e),
    };
    if state_k_minus_1.is_empty() {
        return Ok(TerminationTest {
            decision: Decision::Continue,
            statistic: current,
            threshold: f64::NAN,
        });
    }
    let previous = aic_score(y, &state_k_minus_1.columns())?;
    Ok(TerminationTest {
        decision: aic_decision(previous, current, rule),
        statistic: current,
        threshold: previous,
    })
}

/// Keep the candidate iff the MSR drops by more than `gamma`.
pub fn msr_terminate(msr_prev: f64, msr_new: f64, gamma: f64) -> Decision {
    Decision::from_bool(msr_prev - msr_new > gamma)
}

/// One selection step of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub candidate: Candidate,
    /// Ranking criterion of the chosen candidate.
    pub criterion: f64,
    /// Termination statistic: CMI/LA score (bootstrap, la), AIC of the
    /// extended embedding (aic) or MSR of the extended embedding (msr).
    pub test_value: f64,
    /// What the statistic was compared against: the permutation percentile,
    /// the previous AIC, or the previous MSR. `None` where the first
    /// candidate is admitted unconditionally without a reference value.
    pub threshold: Option<f64>,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NueTrace {
    pub target: usize,
    pub records: Vec<IterationRecord>,
    pub embedding: EmbeddingState,
    pub iterations: usize,
}

fn channel_stream(channel: usize) -> u64 {
    (1u64 << 32) | channel as u64
}

/// Normalizes every channel and adds the configured relative jitter.
pub fn prepare_series(series: &MultivariateSeries, config: &NueConfig) -> Result<MultivariateSeries> {
    let normalized = series.normalize()?;
    if config.jitter == 0.0 {
        return Ok(normalized);
    }
    let values = normalized
        .channels()
        .iter()
        .enumerate()
        .map(|(c, x)| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(channel_stream(c));
            let amplitude = config.jitter * sample_sd(x);
            jitter(std::slice::from_ref(x), amplitude, rng.random()).pop().unwrap()
        })
        .collect();
    normalized.with_values(values)
}

/// Runs one NUE on a normalized, jittered series (see [`prepare_series`]).
pub fn run_nue_prepared(series: &MultivariateSeries, target: usize, config: &NueConfig) -> Result<NueTrace> {
    config.validate()?;
    let set = CandidateSet::from_series(series, target, config.m, config.d)?;
    let y = set.target();
    let params = config.ksg();
    let max_iterations = config
        .max_iterations
        .unwrap_or(set.pool().len())
        .min(set.pool().len());

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(target as u64);

    let mut state = EmbeddingState::new();
    let mut records = Vec::new();
    // MSR of the empty embedding is the (unit) target variance.
    let mut prev_msr = 1.0;
    let mut prev_aic: Option<f64> = None;

    for k in 1..=max_iterations {
        let (selection, test_value, threshold, keep) = match config.algorithm {
            Algorithm::Bootstrap => {
                let sel = select_cmi(&set, &state, params)?;
                let test = bootstrap_terminate(
                    y,
                    set.column(sel.pool_index),
                    &state,
                    params,
                    config.bootstrap_size,
                    config.percentile,
                    &mut rng,
                )?;
                (sel, test.statistic, Some(test.threshold), test.decision.is_continue())
            }
            Algorithm::La => {
                let sel = select_la(&set, &state, params)?;
                let test = la_bootstrap_terminate(
                    y,
                    set.column(sel.pool_index),
                    &state,
                    params,
                    config.bootstrap_size,
                    config.percentile,
                    &mut rng,
                )?;
                (sel, test.statistic, Some(test.threshold), test.decision.is_continue())
            }
            Algorithm::Aic => {
                let sel = select_cmi(&set, &state, params)?;
                match aic_score(y, &design(set.column(sel.pool_index), &state)) {
                    Ok(current) => {
                        let keep = match prev_aic {
                            None => true,
                            Some(prev) => aic_decision(prev, current, config.aic_rule).is_continue(),
                        };
                        let threshold = prev_aic;
                        if keep {
                            prev_aic = Some(current);
                        }
                        (sel, current, threshold, keep)
                    }
                    // A numerically redundant column adds nothing to the fit.
                    Err(Error::SingularCovariance { .. }) if k > 1 => (sel, f64::NAN, prev_aic, false),
                    Err(e) => return Err(e),
                }
            }
            Algorithm::Msr => {
                let sel = select_msr(&set, &state, params, config.lambda)?;
                let current = sel.msr.expect("MSR selection reports the winner's MSR");
                let keep = k == 1 || msr_terminate(prev_msr, current, config.gamma).is_continue();
                let threshold = Some(prev_msr);
                if keep {
                    prev_msr = current;
                }
                (sel, current, threshold, keep)
            }
        };
        records.push(IterationRecord {
            candidate: selection.candidate,
            criterion: selection.value,
            test_value,
            threshold,
            accepted: keep,
        });
        if !keep {
            break;
        }
        state.push(selection.candidate, set.column(selection.pool_index).to_vec());
    }

    Ok(NueTrace {
        target,
        iterations: records.len(),
        records,
        embedding: state,
    })
}

/// Normalizes and jitters `series`, then runs one NUE for `target`.
pub fn run_nue(series: &MultivariateSeries, target: usize, config: &NueConfig) -> Result<NueTrace> {
    config.validate()?;
    let prepared = prepare_series(series, config)?;
    run_nue_prepared(&prepared, target, config)
}

/// Directed dependencies between all channels. Matrices are indexed
/// `[source][target]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependencyResult {
    pub labels: Vec<String>,
    pub cte: Vec<Vec<f64>>,
    pub binary: Vec<Vec<bool>>,
    pub traces: Vec<NueTrace>,
    pub target_seconds: Vec<f64>,
    pub total_seconds: f64,
}

impl DependencyResult {
    pub fn n_channels(&self) -> usize {
        self.labels.len()
    }

    /// Σ over targets of the CTE sent by each channel.
    pub fn information_sent(&self) -> Vec<f64> {
        self.cte.iter().map(|row| row.iter().sum()).collect()
    }

    /// Sum of iteration counts over all targets.
    pub fn total_iterations(&self) -> usize {
        self.traces.iter().map(|t| t.iterations).sum()
    }
}

/// One NUE per target, then CTE for every source that has a lag in the
/// target's embedding (zero otherwise).
pub fn dependency_matrix(series: &MultivariateSeries, config: &NueConfig) -> Result<DependencyResult> {
    config.validate()?;
    let started = Instant::now();
    let prepared = prepare_series(series, config)?;
    let l = prepared.n_channels();
    let params = config.ksg();

    let per_target = (0..l)
        .into_par_iter()
        .map(|target| {
            let t0 = Instant::now();
            let trace = run_nue_prepared(&prepared, target, config)?;
            let y = target_slice(&prepared, target, config.m, config.d)?;
            let column = (0..l)
                .map(|source| {
                    if source == target || !trace.embedding.has_channel(source) {
                        Ok(0.0)
                    } else {
                        ksg_cte(y, &trace.embedding, source, params)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((trace, column, t0.elapsed().as_secs_f64()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut cte = vec![vec![0.0; l]; l];
    let mut binary = vec![vec![false; l]; l];
    let mut traces = Vec::with_capacity(l);
    let mut target_seconds = Vec::with_capacity(l);
    for (target, (trace, column, secs)) in per_target.into_iter().enumerate() {
        for source in 0..l {
            if source != target && trace.embedding.has_channel(source) {
                binary[source][target] = true;
                cte[source][target] = column[source];
            }
        }
        traces.push(trace);
        target_seconds.push(secs);
    }
    Ok(DependencyResult {
        labels: prepared.labels().to_vec(),
        cte,
        binary,
        traces,
        target_seconds,
        total_seconds: started.elapsed().as_secs_f64(),
    })
}
