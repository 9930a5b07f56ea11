//! MUSIC baseline: Hermitian eigendecomposition, noise-subspace pseudo
//! spectrum and peak picking.

use ndarray::Array2;
use num_complex::Complex64;

use crate::array::{angle_grid, ArrayConfig};
use crate::covariance::{CMatrix, CovarianceStack};
use crate::error::{domain, Result};

/// Eigenpairs of a Hermitian matrix, eigenvalues ascending, eigenvectors in
/// the matching columns.
#[derive(Debug, Clone)]
pub struct Eigendecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl Eigendecomposition {
    /// `Q·D·Qᴴ`.
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.eigenvalues.len();
        let q = &self.eigenvectors;
        Array2::from_shape_fn((n, n), |(i, j)| {
            (0..n)
                .map(|k| q[[i, k]] * self.eigenvalues[k] * q[[j, k]].conj())
                .sum()
        })
    }
}

const MAX_SWEEPS: usize = 64;

/// Cyclic complex Jacobi. The input is symmetrized as `(R + Rᴴ)/2` first.
pub fn eigendecompose_hermitian(r: &CMatrix) -> Result<Eigendecomposition> {
    let (n, n2) = r.dim();
    if n != n2 || n == 0 {
        return domain(format!("expected a non-empty square matrix, got {:?}", r.dim()));
    }
    if r.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return domain("matrix has non-finite entries");
    }
    let mut a = Array2::from_shape_fn((n, n), |(i, j)| (r[[i, j]] + r[[j, i]].conj()) * 0.5);
    let mut v = CMatrix::eye(n);
    let scale = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();

    for _ in 0..MAX_SWEEPS {
        let off: f64 = a
            .indexed_iter()
            .filter(|((i, j), _)| i != j)
            .map(|(_, z)| z.norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= f64::EPSILON * scale || off == 0.0 {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[[p, q]];
                let mag = apq.norm();
                if mag <= f64::MIN_POSITIVE {
                    continue;
                }
                let phase = apq / mag;
                let app = a[[p, p]].re;
                let aqq = a[[q, q]].re;
                let tau = (aqq - app) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // U restricted to (p, q): [[c, s], [-s·e^{-iφ}, c·e^{-iφ}]].
                let upp = Complex64::new(c, 0.0);
                let upq = Complex64::new(s, 0.0);
                let uqp = -phase.conj() * s;
                let uqq = phase.conj() * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = akp * upp + akq * uqp;
                    a[[k, q]] = akp * upq + akq * uqq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = upp.conj() * apk + uqp.conj() * aqk;
                    a[[q, k]] = upq.conj() * apk + uqq.conj() * aqk;
                }
                a[[p, q]] = Complex64::new(0.0, 0.0);
                a[[q, p]] = Complex64::new(0.0, 0.0);
                a[[p, p]].im = 0.0;
                a[[q, q]].im = 0.0;
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = vkp * upp + vkq * uqp;
                    v[[k, q]] = vkp * upq + vkq * uqq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[i, i]].re.total_cmp(&a[[j, j]].re));
    let eigenvalues = order.iter().map(|&i| a[[i, i]].re).collect();
    let eigenvectors = Array2::from_shape_fn((n, n), |(row, col)| v[[row, order[col]]]);
    Ok(Eigendecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Pseudo spectrum `P(θ) = 1 / (aᴴ(θ)·Qn·Qnᴴ·a(θ))` over a grid.
#[derive(Debug, Clone)]
pub struct MusicSpectrum {
    pub grid: Vec<f64>,
    pub power: Vec<f64>,
    pub assumed_sources: usize,
}

/// Default search grid: 0.1° over [−90°, 90°].
pub fn default_grid() -> Vec<f64> {
    angle_grid(-90.0, 90.0, 0.1)
}

/// Smallest denominator kept so the spectrum stays finite and positive.
const DENOM_FLOOR: f64 = 1e-300;

pub fn music_spectrum(r: &CMatrix, num_sources: usize, grid: &[f64], config: &ArrayConfig) -> Result<MusicSpectrum> {
    let m = config.num_elements();
    if r.dim() != (m, m) {
        return domain(format!("covariance is {:?}, array has {m} elements", r.dim()));
    }
    if num_sources == 0 || num_sources >= m {
        return domain(format!("assumed sources must be in 1..{m}, got {num_sources}"));
    }
    let eig = eigendecompose_hermitian(r)?;
    let noise_dim = m - num_sources;
    let power = grid
        .iter()
        .map(|&theta| 1.0 / noise_projection(&eig.eigenvectors, noise_dim, theta, config).max(DENOM_FLOOR))
        .collect();
    Ok(MusicSpectrum {
        grid: grid.to_vec(),
        power,
        assumed_sources: num_sources,
    })
}

/// `‖Qnᴴ·a(θ)‖²` with Qn the first `noise_dim` eigenvector columns.
fn noise_projection(q: &CMatrix, noise_dim: usize, theta: f64, config: &ArrayConfig) -> f64 {
    let a = config.raw_steering(theta);
    (0..noise_dim)
        .map(|k| {
            let dot: Complex64 = a.iter().enumerate().map(|(i, ai)| q[[i, k]].conj() * ai).sum();
            dot.norm_sqr()
        })
        .sum()
}

/// Noise-subspace leakage `‖aᴴ(θ)·Qn‖` of a covariance at a given angle.
pub fn subspace_leakage(r: &CMatrix, num_sources: usize, theta: f64, config: &ArrayConfig) -> Result<f64> {
    let eig = eigendecompose_hermitian(r)?;
    let noise_dim = config.num_elements() - num_sources;
    Ok(noise_projection(&eig.eigenvectors, noise_dim, theta, config).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MusicEstimate {
    /// Ascending angles, one per assumed source.
    pub angles_deg: Vec<f64>,
    /// Fewer distinct peaks than sources were found; the list was padded.
    pub ambiguous: bool,
}

/// Strict local maxima of the spectrum, ordered by descending power then
/// ascending angle. Returns grid indices.
pub fn find_peaks(spectrum: &MusicSpectrum) -> Vec<usize> {
    let p = &spectrum.power;
    let mut peaks: Vec<usize> = (1..p.len().saturating_sub(1))
        .filter(|&i| p[i] > p[i - 1] && p[i] > p[i + 1])
        .collect();
    peaks.sort_by(|&i, &j| p[j].total_cmp(&p[i]).then(spectrum.grid[i].total_cmp(&spectrum.grid[j])));
    peaks
}

/// Parabolic refinement of a peak using the denominators `1/P`, which are
/// smooth around the true angle even when `P` diverges.
fn refine(spectrum: &MusicSpectrum, i: usize) -> f64 {
    let g = &spectrum.grid;
    let d = |k: usize| 1.0 / spectrum.power[k];
    let (dl, d0, dr) = (d(i - 1), d(i), d(i + 1));
    let curvature = dl - 2.0 * d0 + dr;
    let step = 0.5 * (g[i + 1] - g[i - 1]);
    if curvature <= 0.0 || !curvature.is_finite() {
        return g[i];
    }
    let offset = (0.5 * (dl - dr) / curvature).clamp(-0.5, 0.5);
    g[i] + offset * step
}

pub fn estimate_from_spectrum(spectrum: &MusicSpectrum) -> MusicEstimate {
    let l = spectrum.assumed_sources;
    let peaks = find_peaks(spectrum);
    let mut angles: Vec<f64> = peaks.iter().take(l).map(|&i| refine(spectrum, i)).collect();
    let ambiguous = angles.len() < l;
    if ambiguous {
        if angles.is_empty() {
            let (imax, _) = spectrum
                .power
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .expect("non-empty grid");
            angles.push(spectrum.grid[imax]);
        }
        while angles.len() < l {
            angles.push(angles[angles.len() - 1]);
        }
    }
    angles.sort_by(f64::total_cmp);
    MusicEstimate {
        angles_deg: angles,
        ambiguous,
    }
}

/// MUSIC estimate from a single covariance on the default grid.
pub fn estimate_aoa_music(r: &CMatrix, num_sources: usize, config: &ArrayConfig) -> Result<MusicEstimate> {
    let spectrum = music_spectrum(r, num_sources, &default_grid(), config)?;
    Ok(estimate_from_spectrum(&spectrum))
}

/// As [`estimate_aoa_music`] on the mean covariance of a stack.
pub fn estimate_aoa_music_stack(stack: &CovarianceStack, num_sources: usize, config: &ArrayConfig) -> Result<MusicEstimate> {
    estimate_aoa_music(&stack.mean()?, num_sources, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::steering_vector;
    use crate::covariance::relative_frobenius;

    fn outer(theta: f64, cfg: &ArrayConfig) -> CMatrix {
        let a = steering_vector(theta, cfg).unwrap().elements;
        Array2::from_shape_fn((a.len(), a.len()), |(j, k)| a[j] * a[k].conj())
    }

    #[test]
    fn identity_eigenvalues() {
        let e = eigendecompose_hermitian(&CMatrix::eye(4)).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0; 4]);
    }

    #[test]
    fn rank_one_eigenvalues() {
        let cfg = ArrayConfig::default();
        let e = eigendecompose_hermitian(&outer(33.0, &cfg)).unwrap();
        for (got, want) in e.eigenvalues.iter().zip([0.0, 0.0, 0.0, 4.0]) {
            assert!((got - want).abs() < 1e-12, "{:?}", e.eigenvalues);
        }
    }

    #[test]
    fn diagonal_matrix() {
        let mut r = CMatrix::zeros((4, 4));
        for (i, v) in [3.0, 1.0, 4.0, 2.0].iter().enumerate() {
            r[[i, i]] = Complex64::new(*v, 0.0);
        }
        let e = eigendecompose_hermitian(&r).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 2.0, 3.0, 4.0]);
        for (col, row) in [1, 3, 0, 2].iter().enumerate() {
            assert!((e.eigenvectors[[*row, col]].norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn reconstruction_and_unitarity() {
        let cfg = ArrayConfig::default();
        let mut r = outer(-12.0, &cfg) * Complex64::new(2.0, 0.0) + outer(40.0, &cfg);
        for i in 0..4 {
            r[[i, i]] += Complex64::new(0.1, 0.0);
        }
        r[[0, 3]] += Complex64::new(0.05, 0.2);
        r[[3, 0]] += Complex64::new(0.05, -0.2);
        let e = eigendecompose_hermitian(&r).unwrap();
        assert!(relative_frobenius(&e.reconstruct(), &r) < 1e-12);
        let q = &e.eigenvectors;
        for i in 0..4 {
            for j in 0..4 {
                let dot: Complex64 = (0..4).map(|k| q[[k, i]].conj() * q[[k, j]]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - Complex64::new(want, 0.0)).norm() < 1e-12);
            }
        }
        assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn non_finite_rejected() {
        let mut r = CMatrix::eye(4);
        r[[1, 1]] = Complex64::new(f64::NAN, 0.0);
        assert!(eigendecompose_hermitian(&r).is_err());
    }

    #[test]
    fn identity_spectrum_is_flat() {
        let cfg = ArrayConfig::default();
        let sp = music_spectrum(&CMatrix::eye(4), 1, &default_grid(), &cfg).unwrap();
        let (lo, hi) = sp.power.iter().fold((f64::MAX, f64::MIN), |(lo, hi), &p| (lo.min(p), hi.max(p)));
        assert!((hi - lo) / hi < 1e-9);
    }

    #[test]
    fn single_source_peak() {
        let cfg = ArrayConfig::default();
        let mut r = outer(10.0, &cfg);
        for i in 0..4 {
            r[[i, i]] += Complex64::new(1e-3, 0.0);
        }
        let est = estimate_aoa_music(&r, 1, &cfg).unwrap();
        assert!((est.angles_deg[0] - 10.0).abs() <= 0.1, "{:?}", est);
        assert!(!est.ambiguous);
        assert!(music_spectrum(&r, 4, &default_grid(), &cfg).is_err());
        assert!(music_spectrum(&r, 0, &default_grid(), &cfg).is_err());
    }

    #[test]
    fn two_sources_noiseless() {
        let cfg = ArrayConfig::default();
        let r = outer(-30.0, &cfg) + outer(30.0, &cfg);
        let est = estimate_aoa_music(&r, 2, &cfg).unwrap();
        assert!((est.angles_deg[0] + 30.0).abs() <= 0.1, "{:?}", est);
        assert!((est.angles_deg[1] - 30.0).abs() <= 0.1, "{:?}", est);
    }

    #[test]
    fn signed_zero_same_answer() {
        let cfg = ArrayConfig::default();
        let a = estimate_aoa_music(&outer(0.0, &cfg), 1, &cfg).unwrap();
        let b = estimate_aoa_music(&outer(-0.0, &cfg), 1, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn leakage_vanishes_at_true_angle() {
        let cfg = ArrayConfig::default();
        let r = outer(21.0, &cfg);
        assert!(subspace_leakage(&r, 1, 21.0, &cfg).unwrap() <= 1e-6);
    }

    #[test]
    fn padding_when_peaks_are_missing() {
        let sp = MusicSpectrum {
            grid: vec![0.0, 1.0, 2.0, 3.0],
            power: vec![1.0, 2.0, 3.0, 4.0],
            assumed_sources: 2,
        };
        let est = estimate_from_spectrum(&sp);
        assert!(est.ambiguous);
        assert_eq!(est.angles_deg, vec![3.0, 3.0]);
    }
}
