//! Metric logs stored as CSV with columns `epoch,split,metric,value`.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub epoch: usize,
    pub split: String,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsLog {
    pub rows: Vec<MetricRow>,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(format!("metrics csv: {e}"))
}

impl MetricsLog {
    pub fn push(&mut self, epoch: usize, split: &str, metric: &str, value: f64) {
        self.rows.push(MetricRow { epoch, split: split.to_string(), metric: metric.to_string(), value });
    }

    /// Last value logged for `(split, metric)`.
    pub fn last(&self, split: &str, metric: &str) -> Option<f64> {
        self.rows.iter().rev().find(|r| r.split == split && r.metric == metric).map(|r| r.value)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["epoch", "split", "metric", "value"]).map_err(csv_err)?;
        for r in &self.rows {
            out.write_record([r.epoch.to_string(), r.split.clone(), r.metric.clone(), format!("{:e}", r.value)])
                .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers().map_err(csv_err)?.clone();
        if headers.iter().collect::<Vec<_>>() != ["epoch", "split", "metric", "value"] {
            return Err(Error::Format(format!("unexpected metrics header {headers:?}")));
        }
        let mut log = MetricsLog::default();
        for rec in rd.records() {
            let rec = rec.map_err(csv_err)?;
            let field = |i: usize| rec.get(i).unwrap_or_default();
            let epoch = field(0).parse().map_err(|_| Error::Format(format!("bad epoch '{}'", field(0))))?;
            let value = field(3).parse().map_err(|_| Error::Format(format!("bad value '{}'", field(3))))?;
            log.push(epoch, field(1), field(2), value);
        }
        Ok(log)
    }
}

/// One line per run with the final test metrics and the best validation
/// value of each validation metric.
pub fn summary_table(runs: &[(String, MetricsLog)]) -> String {
    let mut out = String::from("run\tsplit\tmetric\tvalue\n");
    for (name, log) in runs {
        let mut finals: BTreeMap<(&str, &str), f64> = BTreeMap::new();
        for r in &log.rows {
            if r.split == "test" {
                finals.insert((r.split.as_str(), r.metric.as_str()), r.value);
            }
        }
        for ((split, metric), value) in finals {
            out.push_str(&format!("{name}\t{split}\t{metric}\t{value:.6e}\n"));
        }
    }
    out
}
