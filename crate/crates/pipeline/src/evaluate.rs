//! Scoring the network and the MUSIC baseline on dataset records.

use std::collections::BTreeMap;
use std::io::Write;

use aoa_core::covariance::{reconstruct_block, CMatrix, BLOCK_LEN};
use aoa_core::metrics::{confusion_matrix, error_cdf, snr_sweep, summarize, ConfusionMatrix, EvalRecord, MetricSummary, SweepPoint};
use aoa_core::music::estimate_aoa_music;
use aoa_core::ArrayConfig;
use aoa_nn::Predictor;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::DatasetConfig;
use crate::dataset::{build_sweep_set, Record, SweepSetConfig};
use crate::error::{PipelineError, Result};

/// Network predictions for `records`, scored against their true angles.
pub fn nn_eval_records(predictor: &Predictor, records: &[&Record]) -> Result<Vec<EvalRecord>> {
    let rows: Vec<&[f64]> = records.iter().map(|r| r.features.as_slice()).collect();
    let preds = predictor.predict_batch(&rows)?;
    Ok(preds
        .iter()
        .zip(records)
        .map(|(p, r)| p.to_eval_record(&r.meta.angles_deg, r.meta.snr_db))
        .collect())
}

/// Mean of the normalized covariance blocks stored in a feature vector.
pub fn covariance_from_features(features: &[f64]) -> Result<CMatrix> {
    if features.is_empty() || features.len() % BLOCK_LEN != 0 {
        return Err(PipelineError::Data(format!(
            "feature length {} is not a multiple of {BLOCK_LEN}",
            features.len()
        )));
    }
    let mut sum: Option<CMatrix> = None;
    for b in features.chunks(BLOCK_LEN) {
        let r = reconstruct_block(b)?;
        sum = Some(match sum {
            Some(s) => s + r,
            None => r,
        });
    }
    Ok(sum.expect("at least one block"))
}

/// MUSIC given the true source count of each record.
pub fn music_eval_records(records: &[&Record], array: &ArrayConfig) -> Result<Vec<EvalRecord>> {
    records
        .par_iter()
        .map(|r| {
            let l = r.meta.angles_deg.len();
            let est = estimate_aoa_music(&covariance_from_features(&r.features)?, l, array)?;
            Ok(EvalRecord {
                true_l: l as u8,
                true_angles: r.meta.angles_deg.clone(),
                pred_l: l as u8,
                pred_angles: est.angles_deg,
                snr_db: r.meta.snr_db,
            })
        })
        .collect()
}

/// One CSV row per record.
pub fn write_eval_csv<W: Write>(mut w: W, ids: &[u64], records: &[EvalRecord]) -> Result<()> {
    writeln!(w, "id,snr_db,true_l,pred_l,true_theta1,true_theta2,pred_theta1,pred_theta2,abs_error")?;
    for (id, r) in ids.iter().zip(records) {
        let t2 = r.true_angles.get(1).map(|v| format!("{v:.4}")).unwrap_or_default();
        let p2 = r.pred_angles.get(1).map(|v| format!("{v:.4}")).unwrap_or_default();
        writeln!(
            w,
            "{id},{},{},{},{:.4},{t2},{:.4},{p2},{:.6}",
            r.snr_db,
            r.true_l,
            r.pred_l,
            r.true_angles[0],
            r.pred_angles[0],
            r.absolute_error()
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub overall: MetricSummary,
    pub confusion: ConfusionMatrix,
    pub per_snr: Vec<SweepPoint>,
}

fn group_by_snr(records: &[EvalRecord]) -> Vec<(f64, Vec<EvalRecord>)> {
    let mut groups: BTreeMap<u64, (f64, Vec<EvalRecord>)> = BTreeMap::new();
    for r in records {
        // total-order key so negative SNRs sort first
        let bits = r.snr_db.to_bits();
        let key = if r.snr_db.is_sign_negative() { !bits } else { bits | (1 << 63) };
        groups.entry(key).or_insert_with(|| (r.snr_db, Vec::new())).1.push(r.clone());
    }
    groups.into_values().collect()
}

pub fn report(method: &str, records: &[EvalRecord]) -> Result<EvalReport> {
    Ok(EvalReport {
        method: method.into(),
        overall: summarize(records)?,
        confusion: confusion_matrix(records)?,
        per_snr: snr_sweep(&group_by_snr(records))?,
    })
}

impl std::fmt::Display for EvalReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let o = &self.overall;
        writeln!(
            f,
            "{}: n={} acc={:.4} rmse={:.3} mae={:.3} mae_norm={:.5}",
            self.method, o.count, o.accuracy, o.rmse, o.mae, o.mae_normalized
        )?;
        for (name, s) in [("L=1", &o.single), ("L=2", &o.two)] {
            if let Some(s) = s {
                writeln!(f, "  {name}: n={} acc={:.4} rmse={:.3} mae={:.3}", s.count, s.accuracy, s.rmse, s.mae)?;
            }
        }
        writeln!(f, "  snr_db     n    acc    rmse     mae")?;
        for p in &self.per_snr {
            writeln!(f, "  {:>6} {:>5} {:.4} {:>7.3} {:>7.3}", p.snr_db, p.count, p.accuracy, p.rmse, p.mae)?;
        }
        write!(f, "{}", self.confusion)
    }
}

/// NN and MUSIC metrics on one fresh test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub snr_db: f64,
    pub nn: Option<SweepPoint>,
    pub music: Option<SweepPoint>,
}

/// Builds one fresh full-field-of-view test set per SNR level and scores
/// the network and/or MUSIC (given the true source count) on it.
pub fn compare_sweep(
    config: &DatasetConfig,
    predictor: Option<&Predictor>,
    include_music: bool,
    levels: &[f64],
    template: &SweepSetConfig,
) -> Result<Vec<SweepRow>> {
    let array = config.array.build()?;
    let mut rows = Vec::with_capacity(levels.len());
    for &snr in levels {
        let set = build_sweep_set(config, &SweepSetConfig { snr_db: snr, ..template.clone() })?;
        let refs: Vec<&Record> = set.iter().collect();
        let point = |recs: Vec<EvalRecord>| -> Result<SweepPoint> { Ok(snr_sweep(&[(snr, recs)])?[0]) };
        let nn = predictor.map(|p| point(nn_eval_records(p, &refs)?)).transpose()?;
        let music = if include_music { Some(point(music_eval_records(&refs, &array)?)?) } else { None };
        log::info!("sweep {snr} dB: nn {:?} music {:?}", nn.map(|p| p.rmse), music.map(|p| p.rmse));
        rows.push(SweepRow { snr_db: snr, nn, music });
    }
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(mut w: W, rows: &[SweepRow]) -> Result<()> {
    writeln!(w, "snr_db,nn_rmse,nn_log10_rmse,nn_accuracy,music_rmse,music_log10_rmse")?;
    let f = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.snr_db,
            f(r.nn.map(|p| p.rmse)),
            f(r.nn.map(|p| p.log10_rmse)),
            f(r.nn.map(|p| p.accuracy)),
            f(r.music.map(|p| p.rmse)),
            f(r.music.map(|p| p.log10_rmse)),
        )?;
    }
    Ok(())
}

/// Empirical CDF of per-record RMSE for the given records.
pub fn write_cdf_csv<W: Write>(mut w: W, records: &[EvalRecord], max_deg: f64, step_deg: f64) -> Result<()> {
    let grid = aoa_core::array::angle_grid(0.0, max_deg, step_deg);
    writeln!(w, "error_deg,fraction")?;
    for p in error_cdf(records, &grid)? {
        writeln!(w, "{},{:.6}", p.error_deg, p.fraction)?;
    }
    Ok(())
}
