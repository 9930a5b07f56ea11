//! Penalized angle-error metrics, confusion matrices, error CDFs and SNR
//! sweeps.
//!
//! Records are scored under their *true* source count even when the
//! classifier got the count wrong:
//!
//! * true L = 1: error of the mean of the two predicted angles;
//! * true L = 2: the two per-source errors are summed (absolute) or their
//!   squares summed (RMSE), without dividing by two.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub true_l: u8,
    /// Ascending, one per true source.
    pub true_angles: Vec<f64>,
    pub pred_l: u8,
    /// Ascending decoded head angles.
    pub pred_angles: Vec<f64>,
    pub snr_db: f64,
}

impl EvalRecord {
    fn pred(&self, i: usize) -> f64 {
        self.pred_angles[i.min(self.pred_angles.len() - 1)]
    }

    fn validate(&self) -> Result<()> {
        let ok = match self.true_l {
            1 => !self.true_angles.is_empty(),
            2 => self.true_angles.len() >= 2,
            _ => false,
        };
        if !ok || self.pred_angles.is_empty() {
            return domain(format!(
                "record with L={} has {} true / {} predicted angles",
                self.true_l,
                self.true_angles.len(),
                self.pred_angles.len()
            ));
        }
        Ok(())
    }

    /// Signed errors entering the metric for this record.
    fn errors(&self) -> Vec<f64> {
        if self.true_l == 1 {
            let mean = self.pred_angles.iter().sum::<f64>() / self.pred_angles.len() as f64;
            vec![mean - self.true_angles[0]]
        } else {
            vec![self.pred(0) - self.true_angles[0], self.pred(1) - self.true_angles[1]]
        }
    }

    pub fn squared_error(&self) -> f64 {
        self.errors().iter().map(|e| e * e).sum()
    }

    pub fn absolute_error(&self) -> f64 {
        self.errors().iter().map(|e| e.abs()).sum()
    }

    /// Per-angle mean absolute error (divides the two-source sum by two).
    pub fn normalized_absolute_error(&self) -> f64 {
        let e = self.errors();
        e.iter().map(|x| x.abs()).sum::<f64>() / e.len() as f64
    }

    pub fn correct_count(&self) -> bool {
        self.pred_l == self.true_l
    }
}

fn checked(records: &[EvalRecord]) -> Result<()> {
    if records.is_empty() {
        return domain("no evaluation records");
    }
    records.iter().try_for_each(EvalRecord::validate)
}

pub fn penalized_rmse(records: &[EvalRecord]) -> Result<f64> {
    checked(records)?;
    let sum: f64 = records.iter().map(EvalRecord::squared_error).sum();
    Ok((sum / records.len() as f64).sqrt())
}

pub fn penalized_mae(records: &[EvalRecord]) -> Result<f64> {
    checked(records)?;
    let sum: f64 = records.iter().map(EvalRecord::absolute_error).sum();
    Ok(sum / records.len() as f64)
}

/// Conventional variant: two-source errors averaged per angle.
pub fn normalized_mae(records: &[EvalRecord]) -> Result<f64> {
    checked(records)?;
    let sum: f64 = records.iter().map(EvalRecord::normalized_absolute_error).sum();
    Ok(sum / records.len() as f64)
}

pub fn classification_accuracy(records: &[EvalRecord]) -> Result<f64> {
    checked(records)?;
    Ok(records.iter().filter(|r| r.correct_count()).count() as f64 / records.len() as f64)
}

/// Metrics over the whole set and per true source count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub count: usize,
    pub accuracy: f64,
    pub rmse: f64,
    pub mae: f64,
    pub mae_normalized: f64,
    pub single: Option<Box<MetricSummary>>,
    pub two: Option<Box<MetricSummary>>,
}

pub fn summarize(records: &[EvalRecord]) -> Result<MetricSummary> {
    let flat = |rs: &[EvalRecord]| -> Result<MetricSummary> {
        Ok(MetricSummary {
            count: rs.len(),
            accuracy: classification_accuracy(rs)?,
            rmse: penalized_rmse(rs)?,
            mae: penalized_mae(rs)?,
            mae_normalized: normalized_mae(rs)?,
            single: None,
            two: None,
        })
    };
    let mut all = flat(records)?;
    let by = |l: u8| records.iter().filter(|r| r.true_l == l).cloned().collect::<Vec<_>>();
    let (one, two) = (by(1), by(2));
    if !one.is_empty() {
        all.single = Some(Box::new(flat(&one)?));
    }
    if !two.is_empty() {
        all.two = Some(Box::new(flat(&two)?));
    }
    Ok(all)
}

/// Rows are predicted L, columns true L (index = L − 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 2]; 2],
}

impl ConfusionMatrix {
    /// Column-normalized percentages; empty columns stay at zero.
    pub fn percentages(&self) -> [[f64; 2]; 2] {
        let mut out = [[0.0; 2]; 2];
        for col in 0..2 {
            let total = self.counts[0][col] + self.counts[1][col];
            if total == 0 {
                continue;
            }
            for row in 0..2 {
                out[row][col] = 100.0 * self.counts[row][col] as f64 / total as f64;
            }
        }
        out
    }

    pub fn column_totals(&self) -> [u64; 2] {
        [self.counts[0][0] + self.counts[1][0], self.counts[0][1] + self.counts[1][1]]
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pct = self.percentages();
        let totals = self.column_totals();
        writeln!(f, "{:<16}{:>12}{:>12}", "pred \\ true", "L=1", "L=2")?;
        for (row, p) in pct.iter().enumerate() {
            writeln!(
                f,
                "{:<16}{:>11.3}%{:>11.3}%",
                format!("L={}", row + 1),
                p[0],
                p[1]
            )?;
        }
        write!(f, "{:<16}{:>12}{:>12}", "total samples", totals[0], totals[1])
    }
}

pub fn confusion_matrix(records: &[EvalRecord]) -> Result<ConfusionMatrix> {
    if records.is_empty() {
        return domain("no evaluation records");
    }
    let mut counts = [[0u64; 2]; 2];
    for r in records {
        if !(1..=2).contains(&r.true_l) || !(1..=2).contains(&r.pred_l) {
            return domain(format!("source counts must be 1 or 2, got {}/{}", r.pred_l, r.true_l));
        }
        counts[(r.pred_l - 1) as usize][(r.true_l - 1) as usize] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub error_deg: f64,
    pub fraction: f64,
}

/// Empirical CDF of per-record RMSE, evaluated at each grid point.
pub fn error_cdf(records: &[EvalRecord], grid: &[f64]) -> Result<Vec<CdfPoint>> {
    checked(records)?;
    if grid.is_empty() {
        return domain("empty CDF grid");
    }
    let mut errs: Vec<f64> = records.iter().map(|r| r.squared_error().sqrt()).collect();
    errs.sort_by(f64::total_cmp);
    let n = errs.len() as f64;
    Ok(grid
        .iter()
        .map(|&x| CdfPoint {
            error_deg: x,
            fraction: errs.partition_point(|&e| e <= x) as f64 / n,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub snr_db: f64,
    pub count: usize,
    pub rmse: f64,
    pub log10_rmse: f64,
    pub mae: f64,
    pub accuracy: f64,
}

/// Aggregates one evaluated test set per SNR level.
pub fn snr_sweep(levels: &[(f64, Vec<EvalRecord>)]) -> Result<Vec<SweepPoint>> {
    if levels.is_empty() {
        return domain("no SNR levels");
    }
    levels
        .iter()
        .map(|(snr, recs)| {
            let rmse = penalized_rmse(recs)?;
            Ok(SweepPoint {
                snr_db: *snr,
                count: recs.len(),
                rmse,
                log10_rmse: rmse.log10(),
                mae: penalized_mae(recs)?,
                accuracy: classification_accuracy(recs)?,
            })
        })
        .collect()
}
