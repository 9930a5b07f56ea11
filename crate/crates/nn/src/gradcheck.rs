//! Central finite-difference checks of the analytic gradients.

use ndarray::{Array2, ArrayD, IxDyn};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::layers::{Layer, Mode};
use crate::loss::{evaluate, joint_grad_outputs};
use crate::network::Network;

/// Denominator floor for the relative error, so exact zeros compare equal.
pub const REL_FLOOR: f64 = 1e-8;
/// Relative gap between the one-sided slopes above which a network probe may
/// straddle a ReLU or max-pool kink. A kink inside the step moves the central
/// difference by at most half the gap, so this stays well below the tolerance.
pub const KINK_GAP: f64 = 1e-5;
/// Step reduction used to locate a suspected kink.
const REFINE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    /// Probes dropped because the loss is not differentiable within `±h`.
    pub kinks: usize,
}

impl GradCheckReport {
    fn merge(&mut self, analytic: f64, numeric: f64) {
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR);
        self.checked += 1;
        self.max_rel_error = self.max_rel_error.max(rel);
    }
}

fn picks(len: usize, limit: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if len <= limit {
        (0..len).collect()
    } else {
        sample(rng, len, limit).into_vec()
    }
}

/// Joint-loss gradient check of a whole network in train mode (dropout mask
/// fixed by `seed`). At most `per_tensor` entries are probed per parameter tensor.
///
/// When the one-sided slopes at `h` disagree, the probe is repeated at
/// `h / 10`. A gap that shrinks at least 5x means the loss is smooth around
/// the parameter (or the kink lies outside the smaller step), and the smaller
/// central difference is used. A gap that persists puts a kink at the
/// parameter itself; that probe is counted in `kinks` and not compared.
pub fn check_network(
    net: &Network<f64>,
    x: &Array2<f64>,
    targets: &Array2<f64>,
    tau: [f64; 3],
    seed: u64,
    h: f64,
    per_tensor: usize,
) -> Result<GradCheckReport> {
    let loss = |n: &Network<f64>| -> Result<f64> {
        let pass = n.forward(x.view(), Mode::Train, seed)?;
        Ok(evaluate(pass.outputs.view(), targets.view(), tau)?.total)
    };
    let pass = net.forward(x.view(), Mode::Train, seed)?;
    let grads = net.backward(&pass, &joint_grad_outputs(&pass.outputs, targets, tau))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37);
    let mut report = GradCheckReport {
        checked: 0,
        max_rel_error: 0.0,
        kinks: 0,
    };
    let base = loss(net)?;
    let mut probe = net.clone();
    for (t, g) in grads.iter().enumerate() {
        for i in picks(g.len(), per_tensor, &mut rng) {
            let orig = probe.params()[t].iter().nth(i).copied().unwrap();
            let mut slopes = |step: f64| -> Result<(f64, f64)> {
                let mut at = |v: f64| -> Result<f64> {
                    *probe.params_mut()[t].iter_mut().nth(i).unwrap() = v;
                    loss(&probe)
                };
                let (up, down) = (at(orig + step)?, at(orig - step)?);
                at(orig)?;
                Ok(((up - base) / step, (base - down) / step))
            };
            // Gap between the slopes, net of the loss round-off at this step.
            let gap = |(f, b): (f64, f64), step: f64| {
                ((f - b).abs() - 100.0 * f64::EPSILON * base.abs().max(1.0) / step).max(0.0)
            };
            let (fwd, bwd) = slopes(h)?;
            let mut numeric = (fwd + bwd) / 2.0;
            let coarse = gap((fwd, bwd), h);
            if coarse > KINK_GAP * fwd.abs().max(bwd.abs()) {
                let fine = slopes(h / REFINE)?;
                if gap(fine, h / REFINE) * 5.0 > coarse {
                    report.kinks += 1;
                    continue;
                }
                numeric = (fine.0 + fine.1) / 2.0;
            }
            report.merge(g.iter().nth(i).copied().unwrap(), numeric);
        }
    }
    Ok(report)
}

/// Checks one layer on the probe loss `Σ w ⊙ layer(x)` for both the input
/// gradient and every parameter gradient.
pub fn check_layer(layer: &Layer<f64>, x: &ArrayD<f64>, mode: Mode, seed: u64, h: f64) -> Result<GradCheckReport> {
    let run = |l: &Layer<f64>, x: ArrayD<f64>| l.forward(x, mode, &mut ChaCha8Rng::seed_from_u64(seed));
    let (y, cache, _) = run(layer, x.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let w = ArrayD::from_shape_simple_fn(y.raw_dim(), || rng.random_range(-1.0..1.0));
    let probe_loss = |l: &Layer<f64>, x: &ArrayD<f64>| -> Result<f64> {
        let (y, _, _) = run(l, x.clone())?;
        Ok((&y * &w).sum())
    };
    let (dx, grads) = layer.backward(&cache, w.clone())?;
    let mut report = GradCheckReport {
        checked: 0,
        max_rel_error: 0.0,
        kinks: 0,
    };
    let mut xp = x.clone();
    for i in 0..x.len() {
        let orig = xp.as_slice_mut().unwrap()[i];
        xp.as_slice_mut().unwrap()[i] = orig + h;
        let up = probe_loss(layer, &xp)?;
        xp.as_slice_mut().unwrap()[i] = orig - h;
        let down = probe_loss(layer, &xp)?;
        xp.as_slice_mut().unwrap()[i] = orig;
        let analytic = dx.as_standard_layout().iter().nth(i).copied().unwrap();
        report.merge(analytic, (up - down) / (2.0 * h));
    }
    let mut probe = layer.clone();
    for (t, g) in grads.iter().enumerate() {
        for i in 0..g.len() {
            let orig = probe.params()[t].iter().nth(i).copied().unwrap();
            *probe.params_mut()[t].iter_mut().nth(i).unwrap() = orig + h;
            let up = probe_loss(&probe, x)?;
            *probe.params_mut()[t].iter_mut().nth(i).unwrap() = orig - h;
            let down = probe_loss(&probe, x)?;
            *probe.params_mut()[t].iter_mut().nth(i).unwrap() = orig;
            report.merge(g.iter().nth(i).copied().unwrap(), (up - down) / (2.0 * h));
        }
    }
    Ok(report)
}

/// Uniform `[-1, 1)` tensor, handy for probes.
pub fn random_tensor(shape: &[usize], seed: u64) -> ArrayD<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ArrayD::from_shape_simple_fn(IxDyn(shape), || rng.random_range(-1.0..1.0))
}
