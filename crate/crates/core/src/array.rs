//! Uniform linear array geometry, steering vectors and beam patterns.
//!
//! Angles cross every public boundary in degrees. The steering phase of
//! element `m` is `-2π·α·m·sin θ`, so the wavelength cancels and only the
//! spacing factor `α` matters to anything downstream.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Carrier used by the default receiver setup (EU ISM band), Hz.
pub const DEFAULT_CARRIER_HZ: f64 = 868e6;

/// Geometry of a uniform linear array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    num_elements: usize,
    spacing_factor: f64,
    wavelength: f64,
}

impl ArrayConfig {
    pub fn new(num_elements: usize, spacing_factor: f64, wavelength: f64) -> Result<Self> {
        let config = Self {
            num_elements,
            spacing_factor,
            wavelength,
        };
        config.validate()?;
        Ok(config)
    }

    /// Builds the configuration from a carrier frequency instead of a wavelength.
    pub fn with_carrier(num_elements: usize, spacing_factor: f64, carrier_hz: f64) -> Result<Self> {
        if !(carrier_hz > 0.0) || !carrier_hz.is_finite() {
            return domain(format!("carrier frequency must be positive, got {carrier_hz}"));
        }
        Self::new(num_elements, spacing_factor, SPEED_OF_LIGHT / carrier_hz)
    }

    /// Re-checks the invariants; useful after deserializing.
    pub fn validate(&self) -> Result<()> {
        if self.num_elements < 2 {
            return Err(Error::Config(format!(
                "array needs at least 2 elements, got {}",
                self.num_elements
            )));
        }
        if !(self.spacing_factor > 0.0) || !self.spacing_factor.is_finite() {
            return Err(Error::Config(format!(
                "spacing factor must be positive, got {}",
                self.spacing_factor
            )));
        }
        if !(self.wavelength > 0.0) || !self.wavelength.is_finite() {
            return Err(Error::Config(format!(
                "wavelength must be positive, got {}",
                self.wavelength
            )));
        }
        Ok(())
    }

    pub fn num_elements(&self) -> usize {
        self.num_elements
    }

    pub fn spacing_factor(&self) -> f64 {
        self.spacing_factor
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn carrier_frequency(&self) -> f64 {
        SPEED_OF_LIGHT / self.wavelength
    }

    /// Phase of element `m` (zero based) for a plane wave from `theta_deg`.
    /// Not range checked; beam-pattern code scans past ±90°.
    pub(crate) fn element_phase(&self, m: usize, theta_deg: f64) -> f64 {
        -2.0 * PI * self.spacing_factor * m as f64 * theta_deg.to_radians().sin()
    }

    pub(crate) fn raw_steering(&self, theta_deg: f64) -> Vec<Complex64> {
        (0..self.num_elements)
            .map(|m| Complex64::from_polar(1.0, self.element_phase(m, theta_deg)))
            .collect()
    }
}

impl Default for ArrayConfig {
    /// Four elements, spacing factor 0.2, 868 MHz carrier.
    fn default() -> Self {
        Self {
            num_elements: 4,
            spacing_factor: 0.2,
            wavelength: SPEED_OF_LIGHT / DEFAULT_CARRIER_HZ,
        }
    }
}

/// Wave number `2π/λ` in rad/m.
pub fn wave_number(wavelength: f64) -> Result<f64> {
    if !(wavelength > 0.0) || !wavelength.is_finite() {
        return domain(format!("wavelength must be positive, got {wavelength}"));
    }
    Ok(2.0 * PI / wavelength)
}

/// Element positions along the array axis in meters, first element at 0.
pub fn element_positions(config: &ArrayConfig) -> Result<Vec<f64>> {
    config.validate()?;
    Ok((0..config.num_elements)
        .map(|m| config.spacing_factor * m as f64 * config.wavelength)
        .collect())
}

/// Per-element phase delays of a plane wave arriving from `angle_deg`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector {
    pub angle_deg: f64,
    pub elements: Vec<Complex64>,
}

impl SteeringVector {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// `selfᴴ · other`.
    pub fn inner(&self, other: &[Complex64]) -> Complex64 {
        self.elements
            .iter()
            .zip(other)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

/// Steering vector for a source at `theta_deg` ∈ [−90, 90].
pub fn steering_vector(theta_deg: f64, config: &ArrayConfig) -> Result<SteeringVector> {
    if !(-90.0..=90.0).contains(&theta_deg) {
        return domain(format!("angle {theta_deg}° outside [-90, 90]"));
    }
    Ok(SteeringVector {
        angle_deg: theta_deg,
        elements: config.raw_steering(theta_deg),
    })
}

/// Normalized beam power `|aᴴ(steer)·a(scan)|² / M²` in dB for every scan
/// angle. The main lobe sits at 0 dB. Scan angles beyond ±90° are accepted
/// and follow the mirrored pattern of a linear array.
pub fn array_factor(steer_deg: f64, scan_grid: &[f64], config: &ArrayConfig) -> Result<Vec<f64>> {
    if scan_grid.is_empty() {
        return domain("scan grid is empty");
    }
    config.validate()?;
    let steer = config.raw_steering(steer_deg);
    Ok(scan_grid
        .iter()
        .map(|&theta| linear_power(&steer, theta, config))
        .map(|p| 10.0 * p.max(1e-30).log10())
        .collect())
}

fn linear_power(steer: &[Complex64], theta: f64, config: &ArrayConfig) -> f64 {
    let m = config.num_elements as f64;
    let sum: Complex64 = steer
        .iter()
        .enumerate()
        .map(|(i, s)| s.conj() * Complex64::from_polar(1.0, config.element_phase(i, theta)))
        .sum();
    sum.norm_sqr() / (m * m)
}

/// Width in degrees of the −3 dB main lobe around `steer_deg`, measured by
/// walking outward in `step_deg` increments. The walk continues through the
/// array axis (±90°) into the mirrored half-plane, which is how a polar
/// pattern of a linear array is read.
pub fn half_power_beamwidth(steer_deg: f64, config: &ArrayConfig, step_deg: f64) -> Result<f64> {
    if !(step_deg > 0.0) {
        return domain("beamwidth step must be positive");
    }
    config.validate()?;
    let steer = config.raw_steering(steer_deg);
    let half = 10f64.powf(-0.3);
    let max_steps = (180.0 / step_deg).ceil() as usize;
    let walk = |dir: f64| {
        let mut k = 0;
        while k < max_steps {
            let theta = steer_deg + dir * (k + 1) as f64 * step_deg;
            if linear_power(&steer, theta, config) < half {
                break;
            }
            k += 1;
        }
        k as f64 * step_deg
    };
    Ok(walk(-1.0) + walk(1.0))
}

/// Inclusive grid from `start` to `end` in `step` increments.
pub fn angle_grid(start: f64, end: f64, step: f64) -> Vec<f64> {
    let n = ((end - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| start + i as f64 * step).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg(m: usize, alpha: f64, lambda: f64) -> ArrayConfig {
        ArrayConfig::new(m, alpha, lambda).unwrap()
    }

    #[test]
    fn wave_number_examples() {
        assert_abs_diff_eq!(wave_number(1.0).unwrap(), 2.0 * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wave_number(2.0 * PI).unwrap(), 1.0, epsilon = 1e-12);
        // 868 MHz: quoted to three decimals as 18.186 rad/m.
        assert_abs_diff_eq!(wave_number(0.34552).unwrap(), 18.186, epsilon = 2e-3);
        assert!(wave_number(0.0).is_err());
        assert!(wave_number(-1.0).is_err());
    }

    #[test]
    fn positions() {
        let p = element_positions(&cfg(4, 0.2, 1.0)).unwrap();
        for (got, want) in p.iter().zip([0.0, 0.2, 0.4, 0.6]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
        assert_eq!(element_positions(&cfg(2, 0.5, 2.0)).unwrap(), vec![0.0, 1.0]);
        assert!(ArrayConfig::new(1, 0.2, 1.0).is_err());
        assert!(ArrayConfig::new(4, 0.0, 1.0).is_err());
        assert!(ArrayConfig::new(4, 0.2, -1.0).is_err());
    }

    #[test]
    fn default_config() {
        let c = ArrayConfig::default();
        assert_eq!(c.num_elements(), 4);
        assert_eq!(c.spacing_factor(), 0.2);
        assert_abs_diff_eq!(c.carrier_frequency(), 868e6, epsilon = 1e-3);
    }

    #[test]
    fn steering_examples() {
        let c = cfg(2, 0.5, 1.0);
        let s = steering_vector(0.0, &cfg(4, 0.2, 1.0)).unwrap();
        assert!(s.elements.iter().all(|e| (e - Complex64::new(1.0, 0.0)).norm() < 1e-12));

        let s = steering_vector(30.0, &c).unwrap();
        assert!((s.elements[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((s.elements[1] - Complex64::new(0.0, -1.0)).norm() < 1e-12);

        let s = steering_vector(-30.0, &c).unwrap();
        assert!((s.elements[1] - Complex64::new(0.0, 1.0)).norm() < 1e-12);

        assert!(steering_vector(90.5, &c).is_err());
        assert!(steering_vector(-91.0, &c).is_err());
    }

    #[test]
    fn array_factor_main_lobe_is_zero_db() {
        let c = cfg(4, 0.25, 1.0);
        let p = array_factor(20.0, &[20.0], &c).unwrap();
        assert_abs_diff_eq!(p[0], 0.0, epsilon = 1e-12);
        assert!(array_factor(0.0, &[], &c).is_err());
    }

    #[test]
    fn array_factor_peak_at_steer() {
        let c = cfg(4, 0.25, 1.0);
        let grid = angle_grid(-90.0, 90.0, 0.1);
        for steer in [-50.0, -10.0, 0.0, 35.0, 70.0] {
            let p = array_factor(steer, &grid, &c).unwrap();
            let (imax, _) = p
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap();
            assert!((grid[imax] - steer).abs() <= 0.1 + 1e-9, "steer {steer} peak {}", grid[imax]);
        }
    }

    #[test]
    fn beamwidth_broadside_and_steered() {
        let c = cfg(4, 0.25, 1.0);
        let bw0 = half_power_beamwidth(0.0, &c, 0.1).unwrap();
        let bw60 = half_power_beamwidth(60.0, &c, 0.1).unwrap();
        assert!((bw0 - 54.0).abs() <= 1.0, "{bw0}");
        assert!((bw60 - 132.0).abs() <= 1.0, "{bw60}");
        assert!(bw60 > bw0);
    }

    #[test]
    fn grid_is_inclusive() {
        let g = angle_grid(-90.0, 90.0, 0.1);
        assert_eq!(g.len(), 1801);
        assert_abs_diff_eq!(*g.last().unwrap(), 90.0, epsilon = 1e-9);
    }
}
