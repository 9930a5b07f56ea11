//! Mini-batch training with a staged loss-weight schedule.

use std::io::Write;

use aoa_core::metrics::{classification_accuracy, penalized_mae, penalized_rmse};
use aoa_core::signal::derive_seed;
use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::labels::DEFAULT_THRESHOLD;
use crate::layers::Mode;
use crate::loss::{evaluate, joint_grad_logits, LossBreakdown};
use crate::network::Network;
use crate::optim::{Adam, AdamConfig};
use crate::predict::records_from_targets;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainStage {
    pub epochs: usize,
    pub tau: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub stages: Vec<TrainStage>,
    pub seed: u64,
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            adam: AdamConfig::default(),
            batch_size: 512,
            stages: vec![
                TrainStage {
                    epochs: 40,
                    tau: [0.1, 1.0, 1.0],
                },
                TrainStage {
                    epochs: 10,
                    tau: [0.001, 1.0, 1.0],
                },
            ],
            seed: 0,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

impl TrainConfig {
    pub fn total_epochs(&self) -> usize {
        self.stages.iter().map(|s| s.epochs).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(NnError::Config("batch size must be positive".into()));
        }
        for s in &self.stages {
            if s.tau.iter().any(|t| !(*t >= 0.0)) {
                return Err(NnError::Config(format!("negative loss weight in {:?}", s.tau)));
            }
        }
        Ok(())
    }
}

/// Scaled inputs `[N, D]` and targets `[N, 3]`.
#[derive(Debug, Clone)]
pub struct TrainData {
    pub x: Array2<f32>,
    pub y: Array2<f32>,
}

impl TrainData {
    pub fn new(x: Array2<f32>, y: Array2<f32>) -> Result<Self> {
        if x.nrows() != y.nrows() || y.ncols() != 3 {
            return Err(NnError::Shape(format!("inputs {:?} vs targets {:?}", x.dim(), y.dim())));
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub tau: [f64; 3],
    pub loss: LossBreakdown,
    pub val_rmse: Option<f64>,
    pub val_mae: Option<f64>,
    pub val_acc: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
}

impl TrainHistory {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "epoch,L_c,L_r1,L_r2,val_rmse,val_acc")?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for e in &self.epochs {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                e.epoch,
                e.loss.classification,
                e.loss.regression1,
                e.loss.regression2,
                opt(e.val_rmse),
                opt(e.val_acc)
            )?;
        }
        Ok(())
    }
}

/// Trains `net` in place. `on_epoch` sees each epoch's statistics as they land.
pub fn train(
    net: &mut Network<f32>,
    data: &TrainData,
    validation: Option<&TrainData>,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<TrainHistory> {
    config.validate()?;
    if data.is_empty() {
        return Err(NnError::Config("training split is empty".into()));
    }
    if validation.is_some_and(TrainData::is_empty) {
        return Err(NnError::Config("validation split is empty".into()));
    }
    if data.x.ncols() != net.spec.input_dim {
        return Err(NnError::Config(format!(
            "data has {} features, model expects {}",
            data.x.ncols(),
            net.spec.input_dim
        )));
    }
    let mut adam = Adam::new(config.adam);
    let mut history = TrainHistory::default();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch = 0;
    for stage in &config.stages {
        for _ in 0..stage.epochs {
            let started = std::time::Instant::now();
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, epoch as u64));
            order.shuffle(&mut rng);
            let mut sums = [0.0f64; 3];
            let mut seen = 0usize;
            for (b, idx) in order.chunks(config.batch_size).enumerate() {
                let x = data.x.select(Axis(0), idx);
                let y = data.y.select(Axis(0), idx);
                let dropout_seed = derive_seed(config.seed, ((epoch as u64) << 32) | b as u64 | 1 << 63);
                let pass = net.forward(x.view(), Mode::Train, dropout_seed)?;
                let parts = evaluate(pass.outputs.mapv(f64::from).view(), y.mapv(f64::from).view(), stage.tau)?;
                for (s, p) in sums.iter_mut().zip(parts.components()) {
                    *s += p * idx.len() as f64;
                }
                seen += idx.len();
                let grad = joint_grad_logits(&pass.outputs, &y, stage.tau);
                let grads = net.backward_logits(&pass, &grad)?;
                adam.step_network(net, &grads)?;
                net.apply_batch_stats(&pass.batch_stats)?;
            }
            let mean = sums.map(|s| s / seen as f64);
            let loss = LossBreakdown {
                classification: mean[0],
                regression1: mean[1],
                regression2: mean[2],
                total: crate::loss::joint_loss(mean, stage.tau),
            };
            let (val_rmse, val_mae, val_acc) = match validation {
                Some(v) => {
                    let recs = records_from_targets(net, &v.x, &v.y, config.threshold)?;
                    (
                        Some(penalized_rmse(&recs)?),
                        Some(penalized_mae(&recs)?),
                        Some(classification_accuracy(&recs)?),
                    )
                }
                None => (None, None, None),
            };
            epoch += 1;
            let stats = EpochStats {
                epoch,
                tau: stage.tau,
                loss,
                val_rmse,
                val_mae,
                val_acc,
                seconds: started.elapsed().as_secs_f64(),
            };
            log::info!(
                "epoch {epoch}: L_c {:.4} L_r1 {:.5} L_r2 {:.5} val_rmse {:?} val_acc {:?}",
                loss.classification,
                loss.regression1,
                loss.regression2,
                val_rmse,
                val_acc
            );
            on_epoch(&stats);
            history.epochs.push(stats);
        }
    }
    Ok(history)
}
