use std::io::Write;

use serde::{Deserialize, Serialize};

use super::spec::{ExperimentId, SweepVariable};
use crate::error::Result;

/// One series at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sweep_db: f64,
    pub series: String,
    pub mean: f64,
    pub stderr: f64,
    pub n_trials: u64,
    pub n_infeasible: u64,
    /// Bits pooled into a BER estimate; empty for every other statistic.
    pub n_bits: Option<u64>,
}

/// A trial that aborted with an error. It contributes to no row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub p_db: f64,
    pub s_db: f64,
    pub trial: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub experiment: ExperimentId,
    pub sweep_variable: SweepVariable,
    pub rows: Vec<ResultRow>,
    pub failures: Vec<TrialFailure>,
}

impl ResultTable {
    pub fn row(&self, series: &str, sweep_db: f64) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.series == series && r.sweep_db == sweep_db)
    }

    /// `(sweep_db, mean)` pairs of one series, in sweep order.
    pub fn curve(&self, series: &str) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.series == series)
            .map(|r| (r.sweep_db, r.mean))
            .collect()
    }

    /// Columns: sweep_db, series, mean, stderr, n_trials, n_infeasible, n_bits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut out, self)?;
        writeln!(out)?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<ResultRow>> {
        let mut r = csv::Reader::from_reader(input);
        Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
    }
}

/// Running sums for one series at one sweep point.
#[derive(Debug, Clone, Default)]
pub(crate) struct Accumulator {
    n: u64,
    infeasible: u64,
    sum: f64,
    sum_sq: f64,
    errors: u64,
    bits: u64,
}

impl Accumulator {
    pub fn push(&mut self, value: f64, infeasible: bool) {
        self.n += 1;
        self.infeasible += u64::from(infeasible);
        self.sum += value;
        self.sum_sq += value * value;
    }

    pub fn push_bits(&mut self, errors: u64, bits: u64, infeasible: bool) {
        self.n += 1;
        self.infeasible += u64::from(infeasible);
        self.errors += errors;
        self.bits += bits;
    }

    pub fn into_row(self, sweep_db: f64, series: String, pooled_bits: bool) -> ResultRow {
        let (mean, stderr, n_bits) = if pooled_bits {
            let p = if self.bits > 0 {
                self.errors as f64 / self.bits as f64
            } else {
                f64::NAN
            };
            (
                p,
                (p * (1.0 - p) / self.bits as f64).sqrt(),
                Some(self.bits),
            )
        } else {
            let n = self.n as f64;
            let mean = self.sum / n;
            let stderr = if self.n > 1 {
                ((self.sum_sq - n * mean * mean).max(0.0) / (n - 1.0) / n).sqrt()
            } else {
                0.0
            };
            (mean, stderr, None)
        };
        ResultRow {
            sweep_db,
            series,
            mean,
            stderr,
            n_trials: self.n,
            n_infeasible: self.infeasible,
            n_bits,
        }
    }
}
