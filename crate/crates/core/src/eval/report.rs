use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::Protocol;
use crate::mapper::Metric;
use crate::{Error, Result};

/// Per-k metrics for one protocol run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: Protocol,
    pub metric: Metric,
    pub k_values: Vec<usize>,
    pub accuracy: Vec<f64>,
    /// `None` where every prediction–gold pair was unreachable.
    pub mean_graph_distance: Vec<Option<f64>>,
    pub unreachable_pairs: Vec<usize>,
    pub test_size: usize,
    pub index_size: usize,
    pub config_digest: String,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    protocol: Protocol,
    metric: Metric,
    k: usize,
    accuracy: f64,
    mean_graph_distance: Option<f64>,
    unreachable_pairs: usize,
    test_size: usize,
    index_size: usize,
    config_digest: String,
}

impl EvalReport {
    pub fn validate(&self) -> Result<()> {
        let n = self.k_values.len();
        if n == 0
            || self.accuracy.len() != n
            || self.mean_graph_distance.len() != n
            || self.unreachable_pairs.len() != n
        {
            return Err(Error::Invariant("report columns have different lengths".into()));
        }
        if self.k_values.windows(2).any(|w| w[0] >= w[1]) || self.k_values[0] == 0 {
            return Err(Error::Invariant("k values must be positive and strictly increasing".into()));
        }
        if !self.accuracy.iter().all(|a| (0.0..=1.0).contains(a)) {
            return Err(Error::Invariant("accuracy outside [0, 1]".into()));
        }
        if self.accuracy.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Invariant("accuracy decreases with k".into()));
        }
        if !self
            .mean_graph_distance
            .iter()
            .flatten()
            .all(|d| d.is_finite() && *d >= 0.0)
        {
            return Err(Error::Invariant("negative or non-finite graph distance".into()));
        }
        Ok(())
    }

    pub fn accuracy_at(&self, k: usize) -> Option<f64> {
        let i = self.k_values.iter().position(|&x| x == k)?;
        Some(self.accuracy[i])
    }

    pub fn distance_at(&self, k: usize) -> Option<f64> {
        let i = self.k_values.iter().position(|&x| x == k)?;
        self.mean_graph_distance[i]
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: EvalReport = serde_json::from_str(text)?;
        r.validate()?;
        Ok(r)
    }

    /// One row per k.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for (i, &k) in self.k_values.iter().enumerate() {
            out.serialize(CsvRow {
                protocol: self.protocol,
                metric: self.metric,
                k,
                accuracy: self.accuracy[i],
                mean_graph_distance: self.mean_graph_distance[i],
                unreachable_pairs: self.unreachable_pairs[i],
                test_size: self.test_size,
                index_size: self.index_size,
                config_digest: self.config_digest.clone(),
            })?;
        }
        out.flush().map_err(|e| Error::io("<csv>", e))
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv writer emits UTF-8"))
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rows = csv::Reader::from_reader(r);
        let rows: Vec<CsvRow> = rows.deserialize().collect::<std::result::Result<_, _>>()?;
        let first = rows
            .first()
            .ok_or_else(|| Error::Validation("report CSV has no rows".into()))?;
        let mut report = EvalReport {
            protocol: first.protocol,
            metric: first.metric,
            k_values: Vec::new(),
            accuracy: Vec::new(),
            mean_graph_distance: Vec::new(),
            unreachable_pairs: Vec::new(),
            test_size: first.test_size,
            index_size: first.index_size,
            config_digest: first.config_digest.clone(),
        };
        for row in &rows {
            if row.protocol != report.protocol
                || row.metric != report.metric
                || row.test_size != report.test_size
                || row.index_size != report.index_size
                || row.config_digest != report.config_digest
            {
                return Err(Error::Validation("report CSV rows disagree on shared fields".into()));
            }
            report.k_values.push(row.k);
            report.accuracy.push(row.accuracy);
            report.mean_graph_distance.push(row.mean_graph_distance);
            report.unreachable_pairs.push(row.unreachable_pairs);
        }
        report.validate()?;
        Ok(report)
    }
}
