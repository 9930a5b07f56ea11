//! End-to-end single-sample inference latency.

use std::time::Instant;

use aoa_core::covariance::StandardScaler;
use aoa_nn::network::{ModelSpec, Network, FEATURE_DIM};
use aoa_nn::Predictor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};

pub const DEFAULT_RUNS: usize = 1000;
const WARMUP: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub model: String,
    pub param_count: usize,
    /// Batch-norm running statistics, not counted in `param_count`.
    pub non_trainable_count: usize,
    pub platform: String,
    pub runs: usize,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
}

impl std::fmt::Display for BenchReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} params={} ({:.2}M) platform={} runs={} mean={:.3}ms p50={:.3}ms p95={:.3}ms max={:.3}ms",
            self.model,
            self.param_count,
            self.param_count as f64 / 1e6,
            self.platform,
            self.runs,
            self.mean_ms,
            self.p50_ms,
            self.p95_ms,
            self.max_ms
        )
    }
}

pub fn platform() -> String {
    format!("{}-{}", std::env::consts::ARCH, std::env::consts::OS)
}

/// Freshly initialized predictor with an identity scaler.
pub fn untrained_predictor(model: &str, seed: u64) -> Result<Predictor> {
    let net = Network::<f32>::new(ModelSpec::by_name(model)?, seed)?;
    Ok(Predictor::new(net, StandardScaler::identity(FEATURE_DIM))?)
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let i = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[i]
}

/// Times `runs` calls of features → decoded angles, each on a fresh input.
pub fn bench_predictor(predictor: &Predictor, runs: usize, seed: u64) -> Result<BenchReport> {
    if runs == 0 {
        return Err(PipelineError::Usage("runs must be positive".into()));
    }
    let dim = predictor.scaler.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<Vec<f64>> = (0..runs + WARMUP)
        .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let mut times = Vec::with_capacity(runs);
    for (i, x) in inputs.iter().enumerate() {
        let t = Instant::now();
        let p = predictor.predict(x)?;
        let dt = t.elapsed().as_secs_f64() * 1e3;
        std::hint::black_box(p);
        if i >= WARMUP {
            times.push(dt);
        }
    }
    let mean = times.iter().sum::<f64>() / runs as f64;
    times.sort_by(f64::total_cmp);
    Ok(BenchReport {
        model: predictor.network.spec.name.clone(),
        param_count: predictor.network.param_count(),
        non_trainable_count: predictor.network.non_trainable_count(),
        platform: platform(),
        runs,
        mean_ms: mean,
        p50_ms: percentile(&times, 0.5),
        p95_ms: percentile(&times, 0.95),
        max_ms: times[runs - 1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_counts_match_network() {
        let p = untrained_predictor("cnn", 1).unwrap();
        let r = bench_predictor(&p, 5, 0).unwrap();
        assert_eq!(r.param_count, 2_139_651);
        assert_eq!(r.runs, 5);
        assert!(r.p50_ms <= r.max_ms && r.mean_ms > 0.0);
    }

    #[test]
    fn zero_runs_rejected() {
        let p = untrained_predictor("fc", 1).unwrap();
        assert!(bench_predictor(&p, 0, 0).is_err());
        assert!(untrained_predictor("rnn", 1).is_err());
    }
}
