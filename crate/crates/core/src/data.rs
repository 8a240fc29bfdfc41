//! Time-series storage, normalization, the candidate pool and lagged
//! realization matrices.
//!
//! Every matrix handed to the estimators shares one index frame: row `i`
//! corresponds to sample `i + d·m` of the original record, so the first
//! `d·m` samples are discarded for every variable alike.

use std::collections::HashSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Variance below this is treated as a constant channel.
const MIN_VARIANCE: f64 = 1e-30;

/// A multichannel record, stored channel-major (`values[channel][sample]`).
#[derive(Debug, Clone, PartialEq)]
pub struct MultivariateSeries {
    values: Vec<Vec<f64>>,
    labels: Vec<String>,
    sample_rate: Option<f64>,
}

impl MultivariateSeries {
    pub fn new(values: Vec<Vec<f64>>, labels: Vec<String>, sample_rate: Option<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidSeries(format!(
                "need at least 2 channels, got {}",
                values.len()
            )));
        }
        if labels.len() != values.len() {
            return Err(Error::InvalidSeries(format!(
                "{} labels for {} channels",
                labels.len(),
                values.len()
            )));
        }
        let len = values[0].len();
        if len == 0 {
            return Err(Error::InvalidSeries("series has no samples".into()));
        }
        for (c, channel) in values.iter().enumerate() {
            if channel.len() != len {
                return Err(Error::InvalidSeries(format!(
                    "channel {c} has {} samples, expected {len}",
                    channel.len()
                )));
            }
            if let Some(pos) = channel.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidSeries(format!(
                    "non-finite value in channel {c} at sample {pos}"
                )));
            }
        }
        let mut seen = HashSet::new();
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(Error::InvalidSeries(format!("duplicate channel label {label:?}")));
            }
        }
        if let Some(rate) = sample_rate {
            if !(rate.is_finite() && rate > 0.0) {
                return Err(Error::InvalidSeries(format!("sample rate must be positive, got {rate}")));
            }
        }
        Ok(Self {
            values,
            labels,
            sample_rate,
        })
    }

    /// Builds a series with labels `ch1`, `ch2`, ...
    pub fn from_channels(values: Vec<Vec<f64>>) -> Result<Self> {
        let labels = (1..=values.len()).map(|c| format!("ch{c}")).collect();
        Self::new(values, labels, None)
    }

    pub fn n_channels(&self) -> usize {
        self.values.len()
    }

    /// Number of samples per channel.
    pub fn len(&self) -> usize {
        self.values[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.values[c]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn sample_rate(&self) -> Option<f64> {
        self.sample_rate
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        self.values
    }

    /// Replaces the sample values, keeping labels and sample rate.
    pub fn with_values(&self, values: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(values, self.labels.clone(), self.sample_rate)
    }

    /// Zero mean, unit (unbiased) variance for every channel.
    pub fn normalize(&self) -> Result<Self> {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(c, x)| standardize(x).ok_or(Error::ConstantChannel { channel: c }))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            values,
            labels: self.labels.clone(),
            sample_rate: self.sample_rate,
        })
    }

    /// Reads the CSV layout: a header of channel labels, then one row per sample.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let labels: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        if labels.len() < 2 {
            return Err(Error::InvalidSeries(format!(
                "need at least 2 channels, got {}",
                labels.len()
            )));
        }
        let mut values = vec![Vec::new(); labels.len()];
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != labels.len() {
                return Err(Error::Csv(format!(
                    "row {} has {} fields, expected {}",
                    row + 2,
                    record.len(),
                    labels.len()
                )));
            }
            for (c, field) in record.iter().enumerate() {
                let v: f64 = field.parse().map_err(|_| {
                    Error::Csv(format!("row {}, column {}: cannot parse {field:?}", row + 2, c + 1))
                })?;
                values[c].push(v);
            }
        }
        Self::new(values, labels, None)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(&self.labels)?;
        let mut row = Vec::with_capacity(self.n_channels());
        for i in 0..self.len() {
            row.clear();
            row.extend(self.values.iter().map(|ch| ch[i].to_string()));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn standardize(x: &[f64]) -> Option<Vec<f64>> {
    let n = x.len();
    if n < 2 {
        return None;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if !(var >= MIN_VARIANCE) {
        return None;
    }
    let sd = var.sqrt();
    Some(x.iter().map(|v| (v - mean) / sd).collect())
}

/// Unbiased sample standard deviation.
pub(crate) fn sample_sd(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}

/// One lagged variable: `channel` observed `lag` samples before the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Candidate {
    pub channel: usize,
    pub lag: usize,
}

impl Candidate {
    pub fn new(channel: usize, lag: usize) -> Self {
        Self { channel, lag }
    }
}

/// Candidates `(c, j·m)` for every channel `c` and `j = 1..=d`, channel-major.
pub fn build_candidate_pool(n_channels: usize, m: usize, d: usize) -> Vec<Candidate> {
    (0..n_channels)
        .flat_map(|c| (1..=d).map(move |j| Candidate::new(c, j * m)))
        .collect()
}

/// Number of usable rows once the first `d·m` samples are dropped.
pub fn effective_len(len: usize, m: usize, d: usize) -> Result<usize> {
    let max_lag = d * m;
    if len <= max_lag {
        return Err(Error::SeriesTooShort { len, max_lag });
    }
    Ok(len - max_lag)
}

/// The target's present values aligned to the lagged frame.
pub fn target_slice(series: &MultivariateSeries, target: usize, m: usize, d: usize) -> Result<&[f64]> {
    effective_len(series.len(), m, d)?;
    Ok(&series.channel(target)[d * m..])
}

/// Realizations of a candidate in the lagged frame (a view, no copy).
pub fn candidate_slice(series: &MultivariateSeries, candidate: Candidate, m: usize, d: usize) -> Result<&[f64]> {
    let n = series.len();
    effective_len(n, m, d)?;
    if candidate.lag == 0 || candidate.lag > d * m {
        return Err(Error::InvalidParameter(format!(
            "lag {} outside 1..={}",
            candidate.lag,
            d * m
        )));
    }
    if candidate.channel >= series.n_channels() {
        return Err(Error::InvalidParameter(format!("channel {} out of range", candidate.channel)));
    }
    Ok(&series.channel(candidate.channel)[d * m - candidate.lag..n - candidate.lag])
}

/// Target vector and one column per candidate, all of length `N - d·m`.
pub fn lagged_matrix(
    series: &MultivariateSeries,
    candidates: &[Candidate],
    target: usize,
    m: usize,
    d: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let y = target_slice(series, target, m, d)?.to_vec();
    let columns = candidates
        .iter()
        .map(|&c| candidate_slice(series, c, m, d).map(<[f64]>::to_vec))
        .collect::<Result<Vec<_>>>()?;
    Ok((y, columns))
}

/// The selected candidates and their realizations, in selection order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingState {
    pub selected: Vec<Candidate>,
    pub realizations: Vec<Vec<f64>>,
}

impl EmbeddingState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    pub fn contains(&self, candidate: &Candidate) -> bool {
        self.selected.contains(candidate)
    }

    pub fn push(&mut self, candidate: Candidate, column: Vec<f64>) {
        debug_assert!(!self.contains(&candidate));
        debug_assert!(self.realizations.first().is_none_or(|c| c.len() == column.len()));
        self.selected.push(candidate);
        self.realizations.push(column);
    }

    pub fn columns(&self) -> Vec<&[f64]> {
        self.realizations.iter().map(Vec::as_slice).collect()
    }

    /// True if any selected candidate is a lag of `channel`.
    pub fn has_channel(&self, channel: usize) -> bool {
        self.selected.iter().any(|c| c.channel == channel)
    }
}
