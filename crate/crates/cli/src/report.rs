use serde::Serialize;

use entropy_embed::nue::{DependencyResult, IterationRecord};
use entropy_embed::NueConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct EmbeddedLag {
    pub channel: usize,
    pub label: String,
    pub lag: usize,
}

#[derive(Debug, Serialize)]
pub struct TargetEmbedding {
    pub target: usize,
    pub label: String,
    pub candidates: Vec<EmbeddedLag>,
}

#[derive(Debug, Serialize)]
pub struct Timings {
    pub per_target_seconds: Vec<f64>,
    pub total_seconds: f64,
}

/// The analysis report. Matrices are indexed `[source][target]`.
#[derive(Debug, Serialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub labels: Vec<String>,
    pub config: NueConfig,
    pub cte: Vec<Vec<f64>>,
    pub binary: Vec<Vec<u8>>,
    pub embeddings: Vec<TargetEmbedding>,
    pub iterations: Vec<usize>,
    pub information_sent: Vec<f64>,
    pub traces: Vec<Vec<IterationRecord>>,
    pub timings: Timings,
}

impl AnalysisReport {
    pub fn new(result: &DependencyResult, config: &NueConfig) -> Self {
        let labels = result.labels.clone();
        let embeddings = result
            .traces
            .iter()
            .map(|t| TargetEmbedding {
                target: t.target,
                label: labels[t.target].clone(),
                candidates: t
                    .embedding
                    .selected
                    .iter()
                    .map(|c| EmbeddedLag {
                        channel: c.channel,
                        label: labels[c.channel].clone(),
                        lag: c.lag,
                    })
                    .collect(),
            })
            .collect();
        Self {
            schema_version: SCHEMA_VERSION,
            labels,
            config: config.clone(),
            cte: result.cte.clone(),
            binary: result
                .binary
                .iter()
                .map(|row| row.iter().map(|&b| u8::from(b)).collect())
                .collect(),
            embeddings,
            iterations: result.traces.iter().map(|t| t.iterations).collect(),
            information_sent: result.information_sent(),
            traces: result.traces.iter().map(|t| t.records.clone()).collect(),
            timings: Timings {
                per_target_seconds: result.target_seconds.clone(),
                total_seconds: result.total_seconds,
            },
        }
    }

    /// Channels ordered by information sent, largest first; ties keep
    /// channel order.
    pub fn top_senders(&self, k: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.labels.len()).collect();
        order.sort_by(|&a, &b| self.information_sent[b].total_cmp(&self.information_sent[a]));
        order.truncate(k);
        order
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        let edges: usize = self.binary.iter().flatten().map(|&b| b as usize).sum();
        let iterations: usize = self.iterations.iter().sum();
        out.push_str(&format!(
            "{} channels, {} directed dependencies, {} iterations, {:.2} s\n",
            self.labels.len(),
            edges,
            iterations,
            self.timings.total_seconds
        ));
        out.push_str("rank  channel          info_sent  out_degree\n");
        for (rank, &c) in self.top_senders(5).iter().enumerate() {
            let degree: usize = self.binary[c].iter().map(|&b| b as usize).sum();
            out.push_str(&format!(
                "{:>4}  {:<15} {:>10.4}  {:>10}\n",
                rank + 1,
                self.labels[c],
                self.information_sent[c],
                degree
            ));
        }
        out
    }

    pub fn write_cte_csv<W: std::io::Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["source".to_string()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header)?;
        for (label, row) in self.labels.iter().zip(&self.cte) {
            let mut record = vec![label.clone()];
            record.extend(row.iter().map(f64::to_string));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}
