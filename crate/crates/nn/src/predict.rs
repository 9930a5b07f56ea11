//! Features in, source count and angles out.

use aoa_core::covariance::StandardScaler;
use aoa_core::metrics::EvalRecord;
use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::labels::{decode_angle, decode_prediction, DEFAULT_THRESHOLD};
use crate::network::Network;

pub const EVAL_BATCH: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    #[serde(rename = "L")]
    pub num_sources: u8,
    pub angles_deg: Vec<f64>,
    pub p: f64,
    pub raw_angles_deg: [f64; 2],
}

impl Prediction {
    pub fn to_eval_record(&self, true_angles: &[f64], snr_db: f64) -> EvalRecord {
        EvalRecord {
            true_l: true_angles.len() as u8,
            true_angles: true_angles.to_vec(),
            pred_l: self.num_sources,
            pred_angles: self.raw_angles_deg.to_vec(),
            snr_db,
        }
    }
}

/// Trained network bundled with its input scaler; immutable, so it can be
/// shared across threads.
#[derive(Debug, Clone)]
pub struct Predictor {
    pub network: Network<f32>,
    pub scaler: StandardScaler,
    pub threshold: f64,
}

impl Predictor {
    pub fn new(network: Network<f32>, scaler: StandardScaler) -> Result<Self> {
        if scaler.dim() != network.spec.input_dim {
            return Err(NnError::Config(format!(
                "scaler has {} features, model expects {}",
                scaler.dim(),
                network.spec.input_dim
            )));
        }
        Ok(Self {
            network,
            scaler,
            threshold: DEFAULT_THRESHOLD,
        })
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    /// Scales raw features into an `f32` batch.
    pub fn prepare(&self, rows: &[&[f64]]) -> Result<Array2<f32>> {
        let dim = self.scaler.dim();
        let mut x = Array2::zeros((rows.len(), dim));
        for (mut out, row) in x.axis_iter_mut(Axis(0)).zip(rows) {
            let scaled = self.scaler.transform(row)?;
            out.iter_mut().zip(scaled).for_each(|(o, v)| *o = v as f32);
        }
        Ok(x)
    }

    pub fn decode_outputs(&self, outputs: &Array2<f32>) -> Vec<Prediction> {
        outputs
            .rows()
            .into_iter()
            .map(|o| {
                let (p, z1, z2) = (o[0] as f64, o[1] as f64, o[2] as f64);
                let d = decode_prediction(p, z1, z2, self.threshold);
                Prediction {
                    num_sources: d.num_sources,
                    angles_deg: d.angles_deg,
                    p,
                    raw_angles_deg: d.raw_angles_deg,
                }
            })
            .collect()
    }

    pub fn predict(&self, features: &[f64]) -> Result<Prediction> {
        Ok(self.predict_batch(&[features])?.remove(0))
    }

    pub fn predict_batch(&self, rows: &[&[f64]]) -> Result<Vec<Prediction>> {
        let mut out = Vec::with_capacity(rows.len());
        for chunk in rows.chunks(EVAL_BATCH) {
            let x = self.prepare(chunk)?;
            out.extend(self.decode_outputs(&self.network.predict(x.view())?));
        }
        Ok(out)
    }
}

/// Evaluation records for already-scaled inputs with `[y, z1, z2]` targets.
pub fn records_from_targets(
    network: &Network<f32>,
    x: &Array2<f32>,
    y: &Array2<f32>,
    threshold: f64,
) -> Result<Vec<EvalRecord>> {
    let mut records = Vec::with_capacity(x.nrows());
    let start = 0..x.nrows();
    for lo in start.step_by(EVAL_BATCH) {
        let hi = (lo + EVAL_BATCH).min(x.nrows());
        let out = network.predict(x.slice(ndarray::s![lo..hi, ..]))?;
        for (o, t) in out.rows().into_iter().zip(y.slice(ndarray::s![lo..hi, ..]).rows()) {
            let d = decode_prediction(o[0] as f64, o[1] as f64, o[2] as f64, threshold);
            let true_angles = if t[0] >= 0.5 {
                vec![decode_angle(t[1] as f64), decode_angle(t[2] as f64)]
            } else {
                vec![decode_angle(t[1] as f64)]
            };
            records.push(EvalRecord {
                true_l: true_angles.len() as u8,
                true_angles,
                pred_l: d.num_sources,
                pred_angles: d.raw_angles_deg.to_vec(),
                snr_db: f64::NAN,
            });
        }
    }
    Ok(records)
}
