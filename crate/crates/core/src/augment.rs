//! Data enrichment: angle relabeling by per-element phase rotation,
//! two-source superposition with a random carrier phase offset, and AWGN
//! level expansion.

use std::f64::consts::PI;

use ndarray::Zip;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::array::ArrayConfig;
use crate::error::{domain, Result};
use crate::signal::{add_awgn, derive_seed, rng_from, IqFrame};

/// Half-width of the learned field of view, degrees.
pub const FOV_DEG: f64 = 74.0;

/// Angle offsets applied by the phase-shift augmentation, degrees.
pub const PHASE_SHIFTS_DEG: [f64; 4] = [-4.0, -2.0, 2.0, 4.0];

pub fn in_fov(theta_deg: f64) -> bool {
    (-FOV_DEG..=FOV_DEG).contains(&theta_deg)
}

/// A relabeling of a single-source frame from `original_angle` to
/// `original_angle + phi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseShiftSpec {
    pub phi_deg: f64,
    pub original_angle_deg: f64,
}

impl PhaseShiftSpec {
    pub fn new(original_angle_deg: f64, phi_deg: f64) -> Result<Self> {
        if !in_fov(original_angle_deg + phi_deg) {
            return domain(format!(
                "shifted angle {}° leaves the ±{FOV_DEG}° field of view",
                original_angle_deg + phi_deg
            ));
        }
        Ok(Self {
            phi_deg,
            original_angle_deg,
        })
    }

    pub fn target_angle(&self) -> f64 {
        self.original_angle_deg + self.phi_deg
    }
}

/// Per-element multipliers `exp(−j·2π·α·m·[sin(θ+φ) − sin θ])`.
pub fn phase_shift_weights(theta_deg: f64, phi_deg: f64, config: &ArrayConfig) -> Vec<Complex64> {
    (0..config.num_elements())
        .map(|m| {
            let d = config.element_phase(m, theta_deg + phi_deg) - config.element_phase(m, theta_deg);
            Complex64::from_polar(1.0, d)
        })
        .collect()
}

/// Rotates each channel of a single-source frame at `theta_deg` so that it
/// looks like the same source at `theta_deg + phi_deg`.
pub fn phase_shift(frame: &IqFrame, theta_deg: f64, phi_deg: f64, config: &ArrayConfig) -> Result<IqFrame> {
    let spec = PhaseShiftSpec::new(theta_deg, phi_deg)?;
    if frame.num_elements() != config.num_elements() {
        return domain(format!(
            "frame has {} channels, array has {}",
            frame.num_elements(),
            config.num_elements()
        ));
    }
    let weights = phase_shift_weights(spec.original_angle_deg, spec.phi_deg, config);
    let mut out = frame.clone();
    for (mut row, w) in out.samples.rows_mut().into_iter().zip(weights) {
        row.mapv_inplace(|z| z * w);
    }
    Ok(out)
}

/// Outcome of a two-source superposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuperpositionSpec {
    /// Carrier phase difference Δφ ∈ [0, 2π), radians.
    pub carrier_phase_delta: f64,
    /// Component angles in ascending order, degrees.
    pub component_angles: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct Superposition {
    pub frame: IqFrame,
    pub spec: SuperpositionSpec,
}

/// `frame_a + frame_b·exp(jΔφ)` with Δφ ~ U[0, 2π) drawn from `seed`.
pub fn superimpose(
    frame_a: &IqFrame,
    theta_a: f64,
    frame_b: &IqFrame,
    theta_b: f64,
    seed: u64,
) -> Result<Superposition> {
    let delta = rng_from(derive_seed(seed, 0x7068_6173_65)).random_range(0.0..2.0 * PI);
    superimpose_with_phase(frame_a, theta_a, frame_b, theta_b, delta)
}

pub fn superimpose_with_phase(
    frame_a: &IqFrame,
    theta_a: f64,
    frame_b: &IqFrame,
    theta_b: f64,
    delta: f64,
) -> Result<Superposition> {
    if frame_a.samples.dim() != frame_b.samples.dim() {
        return domain(format!(
            "frame shapes differ: {:?} vs {:?}",
            frame_a.samples.dim(),
            frame_b.samples.dim()
        ));
    }
    if frame_a.sample_rate != frame_b.sample_rate {
        return domain("frames have different sample rates");
    }
    if theta_a == theta_b {
        return domain("superimposed sources need distinct angles");
    }
    let rot = Complex64::from_polar(1.0, delta);
    let mut out = frame_a.clone();
    Zip::from(&mut out.samples)
        .and(&frame_b.samples)
        .for_each(|x, &b| *x += b * rot);
    out.seed = derive_seed(frame_a.seed, frame_b.seed);
    let (lo, hi) = if theta_a < theta_b {
        (theta_a, theta_b)
    } else {
        (theta_b, theta_a)
    };
    Ok(Superposition {
        frame: out,
        spec: SuperpositionSpec {
            carrier_phase_delta: delta.rem_euclid(2.0 * PI),
            component_angles: (lo, hi),
        },
    })
}

/// One noisy copy of `frame` per SNR level, seeds derived from `seed`.
pub fn expand_awgn(frame: &IqFrame, snr_levels: &[f64], seed: u64) -> Result<Vec<(f64, IqFrame)>> {
    snr_levels
        .iter()
        .enumerate()
        .map(|(i, &snr)| Ok((snr, add_awgn(frame, snr, derive_seed(seed, i as u64))?)))
        .collect()
}
