use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::write_atomic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Sam,
    Ergas,
    Scc,
    Q2n,
    DLambda,
    Ds,
    Qnr,
}

impl Metric {
    pub const REDUCED: [Metric; 4] = [Metric::Sam, Metric::Ergas, Metric::Scc, Metric::Q2n];
    pub const FULL: [Metric; 3] = [Metric::DLambda, Metric::Ds, Metric::Qnr];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Sam => "SAM",
            Metric::Ergas => "ERGAS",
            Metric::Scc => "SCC",
            Metric::Q2n => "Q2n",
            Metric::DLambda => "D_lambda",
            Metric::Ds => "D_s",
            Metric::Qnr => "QNR",
        }
    }

    pub fn ideal(self) -> f64 {
        match self {
            Metric::Sam | Metric::Ergas | Metric::DLambda | Metric::Ds => 0.0,
            Metric::Scc | Metric::Q2n | Metric::Qnr => 1.0,
        }
    }

    pub fn from_name(s: &str) -> Option<Metric> {
        [Metric::REDUCED.as_slice(), Metric::FULL.as_slice()]
            .concat()
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

/// Mean and population standard deviation. `None` for an empty list.
pub fn aggregate(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some(Summary { mean, std: var.sqrt() })
}

/// Per-sample metric values for one method, in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub method: String,
    rows: Vec<(String, Metric, f64)>,
}

impl MetricReport {
    pub fn new(method: impl Into<String>) -> Self {
        Self {
            method: method.into(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, sample_id: impl Into<String>, metric: Metric, value: f64) {
        self.rows.push((sample_id.into(), metric, value));
    }

    pub fn rows(&self) -> &[(String, Metric, f64)] {
        &self.rows
    }

    /// Metrics present, in first-seen order.
    pub fn metrics(&self) -> Vec<Metric> {
        let mut out: Vec<Metric> = Vec::new();
        for (_, m, _) in &self.rows {
            if !out.contains(m) {
                out.push(*m);
            }
        }
        out
    }

    pub fn sample_count(&self) -> usize {
        let mut ids: Vec<&str> = self.rows.iter().map(|(id, _, _)| id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }

    pub fn values(&self, metric: Metric) -> Vec<f64> {
        self.rows.iter().filter(|r| r.1 == metric).map(|r| r.2).collect()
    }

    pub fn value(&self, sample_id: &str, metric: Metric) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.0 == sample_id && r.1 == metric)
            .map(|r| r.2)
    }

    pub fn summary(&self, metric: Metric) -> Option<Summary> {
        aggregate(&self.values(metric))
    }

    /// CSV with header `method,sample_id,metric,value,std`. Per-sample rows
    /// leave `std` empty; each metric ends with a `mean` row carrying the std.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["method", "sample_id", "metric", "value", "std"])?;
        for (id, m, v) in &self.rows {
            w.write_record([self.method.as_str(), id, m.name(), &fmt_value(*v), ""])?;
        }
        for m in self.metrics() {
            if let Some(s) = self.summary(m) {
                w.write_record([
                    self.method.as_str(),
                    "mean",
                    m.name(),
                    &fmt_value(s.mean),
                    &fmt_value(s.std),
                ])?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv()?.as_bytes())
    }

    /// Parses the format written by [`MetricReport::to_csv`]; summary rows are
    /// recomputed rather than read back.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let mut report: Option<MetricReport> = None;
        for rec in r.records() {
            let rec = rec?;
            let field = |i: usize| rec.get(i).unwrap_or("");
            let method = field(0);
            let rep = report.get_or_insert_with(|| MetricReport::new(method));
            if field(1) == "mean" {
                continue;
            }
            let metric = Metric::from_name(field(2))
                .ok_or_else(|| Error::parse("metric report", format!("unknown metric {:?}", field(2))))?;
            let value: f64 = field(3)
                .parse()
                .map_err(|_| Error::parse("metric report", format!("bad value {:?}", field(3))))?;
            rep.push(field(1), metric, value);
        }
        report.ok_or_else(|| Error::parse("metric report", "no rows"))
    }

    /// Human-readable `metric mean ± std (ideal x)` lines.
    pub fn summary_table(&self) -> String {
        let mut s = String::new();
        for m in self.metrics() {
            if let Some(sum) = self.summary(m) {
                s.push_str(&format!(
                    "{:<8} {:>12.6} ± {:<10.6} (ideal {})\n",
                    m.name(),
                    sum.mean,
                    sum.std,
                    m.ideal()
                ));
            }
        }
        s
    }
}

/// Shortest representation that parses back to the same value.
fn fmt_value(v: f64) -> String {
    format!("{v:?}")
}
