//! Binary cross-entropy, mean squared error and their τ-weighted sum.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::Scalar;

pub const BCE_CLAMP: f64 = 1e-7;

/// Batch-mean `−[y ln p + (1−y) ln(1−p)]` with `p` clamped to `[ε, 1−ε]`.
pub fn bce_loss(p: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>) -> f64 {
    let n = p.len().max(1) as f64;
    p.iter()
        .zip(y)
        .map(|(&p, &y)| {
            let p = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum::<f64>()
        / n
}

pub fn mse_loss(pred: ArrayView1<'_, f64>, target: ArrayView1<'_, f64>) -> f64 {
    let n = pred.len().max(1) as f64;
    pred.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n
}

pub fn joint_loss(losses: [f64; 3], tau: [f64; 3]) -> f64 {
    losses.iter().zip(tau).map(|(l, t)| l * t).sum()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub classification: f64,
    pub regression1: f64,
    pub regression2: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn components(&self) -> [f64; 3] {
        [self.classification, self.regression1, self.regression2]
    }
}

fn check(outputs: &ArrayView2<'_, f64>, targets: &ArrayView2<'_, f64>, tau: [f64; 3]) -> Result<()> {
    if outputs.dim() != targets.dim() || outputs.ncols() != 3 {
        return Err(NnError::Shape(format!(
            "outputs {:?} and targets {:?} must both be [B, 3]",
            outputs.dim(),
            targets.dim()
        )));
    }
    if tau.iter().any(|t| !(*t >= 0.0)) {
        return Err(NnError::Config(format!("loss weights must be non-negative, got {tau:?}")));
    }
    Ok(())
}

/// Loss components of head outputs `[p, ẑ1, ẑ2]` against `[y, z1, z2]`.
pub fn evaluate(outputs: ArrayView2<'_, f64>, targets: ArrayView2<'_, f64>, tau: [f64; 3]) -> Result<LossBreakdown> {
    check(&outputs, &targets, tau)?;
    let c = |k| (outputs.column(k), targets.column(k));
    let (o0, t0) = c(0);
    let (o1, t1) = c(1);
    let (o2, t2) = c(2);
    let parts = [bce_loss(o0, t0), mse_loss(o1, t1), mse_loss(o2, t2)];
    Ok(LossBreakdown {
        classification: parts[0],
        regression1: parts[1],
        regression2: parts[2],
        total: joint_loss(parts, tau),
    })
}

/// `dL/d(outputs)` of the joint loss, matching the clamped forward.
pub fn joint_grad_outputs<F: Scalar>(outputs: &Array2<F>, targets: &Array2<F>, tau: [f64; 3]) -> Array2<F> {
    let n = outputs.nrows().max(1) as f64;
    let mut g = Array2::zeros(outputs.raw_dim());
    for ((i, k), gv) in g.indexed_iter_mut() {
        let o = outputs[[i, k]].to_f64().unwrap();
        let t = targets[[i, k]].to_f64().unwrap();
        let d = if k == 0 {
            if o <= BCE_CLAMP || o >= 1.0 - BCE_CLAMP {
                0.0
            } else {
                (o - t) / (o * (1.0 - o))
            }
        } else {
            2.0 * (o - t)
        };
        *gv = F::from_f64(tau[k] * d / n).unwrap();
    }
    g
}

/// `dL/d(logits)`: the BCE term collapses to `p − y`, avoiding the
/// vanishing product at saturated sigmoids.
pub fn joint_grad_logits<F: Scalar>(outputs: &Array2<F>, targets: &Array2<F>, tau: [f64; 3]) -> Array2<F> {
    let n = F::from_usize(outputs.nrows().max(1)).unwrap();
    let two = F::from_f64(2.0).unwrap();
    let tau: Vec<F> = tau.iter().map(|&t| F::from_f64(t).unwrap()).collect();
    let mut g = outputs - targets;
    for (k, mut col) in g.axis_iter_mut(Axis(1)).enumerate() {
        if k == 0 {
            col.mapv_inplace(|d| tau[0] * d / n);
        } else {
            let o = outputs.column(k);
            ndarray::Zip::from(&mut col)
                .and(o)
                .for_each(|d, &o| *d = tau[k] * two * *d * o * (F::one() - o) / n);
        }
    }
    g
}
