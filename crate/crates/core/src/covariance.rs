//! Sample covariance stacks, the signal-presence gate, and the serialized
//! model inputs.
//!
//! Every window contributes 16 numbers for a 4-element array: the real parts
//! of the upper triangle including the diagonal (10), then the imaginary
//! parts of the strict lower triangle in column-major order (6). Each
//! 16-value block is scaled to unit Euclidean norm on its own.

use ndarray::{s, Array2, Array3, ArrayView2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::signal::IqFrame;

/// Default window length (2^12 samples).
pub const DEFAULT_WINDOW_LEN: usize = 1 << 12;
/// Default number of windows per frame.
pub const DEFAULT_WINDOWS: usize = 8;
/// Array size the serialized features are defined for.
pub const FEATURE_ELEMENTS: usize = 4;
/// Values per window block.
pub const BLOCK_LEN: usize = FEATURE_ELEMENTS * FEATURE_ELEMENTS;

pub type CMatrix = Array2<Complex64>;

/// `R = (1/W)·Σ x[n]·x[n]ᴴ` over the columns of `window`.
pub fn sample_covariance(window: ArrayView2<'_, Complex64>) -> Result<CMatrix> {
    let (m, w) = window.dim();
    if w == 0 || m == 0 {
        return domain("covariance window is empty");
    }
    let mut r = CMatrix::zeros((m, m));
    let inv = 1.0 / w as f64;
    for j in 0..m {
        let xj = window.row(j);
        for k in j..m {
            let xk = window.row(k);
            let acc: Complex64 = xj.iter().zip(xk.iter()).map(|(a, b)| a * b.conj()).sum();
            let v = acc * inv;
            if j == k {
                r[[j, j]] = Complex64::new(v.re, 0.0);
            } else {
                r[[j, k]] = v;
                r[[k, j]] = v.conj();
            }
        }
    }
    Ok(r)
}

/// Consecutive-window covariance matrices of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceStack {
    pub matrices: Vec<CMatrix>,
    pub window_length: usize,
    pub frame_id: u64,
}

impl CovarianceStack {
    pub fn num_elements(&self) -> usize {
        self.matrices.first().map_or(0, |r| r.nrows())
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    /// Element-wise mean of the window covariances.
    pub fn mean(&self) -> Result<CMatrix> {
        let first = self
            .matrices
            .first()
            .ok_or_else(|| Error::Domain("covariance stack is empty".into()))?;
        let mut acc = CMatrix::zeros(first.raw_dim());
        for r in &self.matrices {
            acc += r;
        }
        Ok(acc / Complex64::new(self.matrices.len() as f64, 0.0))
    }
}

/// Splits the frame into `count` non-overlapping windows of `window_length`
/// samples (from the start) and computes one covariance per window.
pub fn stack_covariances(frame: &IqFrame, window_length: usize, count: usize) -> Result<CovarianceStack> {
    if window_length == 0 || count == 0 {
        return domain("window length and count must be positive");
    }
    let needed = window_length
        .checked_mul(count)
        .ok_or_else(|| Error::Domain("window layout overflows".into()))?;
    if frame.len() < needed {
        return domain(format!(
            "frame has {} samples, {count} windows of {window_length} need {needed}",
            frame.len()
        ));
    }
    let matrices = (0..count)
        .map(|c| {
            let start = c * window_length;
            sample_covariance(frame.samples.slice(s![.., start..start + window_length]))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CovarianceStack {
        matrices,
        window_length,
        frame_id: frame.seed,
    })
}

/// Per-entry noise exceedance probability used by [`Detector::for_noise_floor`].
pub const CFAR_ENTRY_RATE: f64 = 0.1;

/// Threshold rule for "a signal is present": more than `fraction` of the
/// off-diagonal covariance magnitudes exceed `magnitude_threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detector {
    pub magnitude_threshold: f64,
    pub fraction: f64,
}

impl Default for Detector {
    fn default() -> Self {
        Self {
            magnitude_threshold: 1e-4,
            fraction: 0.9,
        }
    }
}

impl Detector {
    /// Constant-false-alarm calibration for white noise of power `σ²` seen
    /// through the mean of `windows` covariances of `window_length` samples.
    /// Each noise-only off-diagonal magnitude is Rayleigh with RMS
    /// `σ²/√(C·W)`; the threshold is exceeded with probability
    /// [`CFAR_ENTRY_RATE`] per entry, so a noise frame passes the
    /// all-pairs rule with probability about `CFAR_ENTRY_RATE^(M(M-1)/2)`.
    pub fn for_noise_floor(noise_power: f64, window_length: usize, windows: usize) -> Self {
        let rms = noise_power / ((window_length * windows.max(1)) as f64).sqrt();
        Self {
            magnitude_threshold: rms * (1.0 / CFAR_ENTRY_RATE).ln().sqrt(),
            fraction: 0.9,
        }
    }

    pub fn detect(&self, r: &CMatrix) -> bool {
        detect_signal(r, self.magnitude_threshold, self.fraction)
    }

    /// A frame is flagged when its mean window covariance passes the rule.
    pub fn detect_stack(&self, stack: &CovarianceStack) -> Result<bool> {
        Ok(self.detect(&stack.mean()?))
    }
}

pub fn detect_signal(r: &CMatrix, magnitude_threshold: f64, fraction: f64) -> bool {
    let m = r.nrows();
    let total = m * m - m;
    if total == 0 {
        return false;
    }
    let above = r
        .indexed_iter()
        .filter(|((j, k), z)| j != k && z.norm() > magnitude_threshold)
        .count();
    above as f64 > fraction * total as f64
}

/// Flattened model input: `C` unit-norm blocks of 16 values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(BLOCK_LEN)
    }
}

/// `(M, M, C)` image: channel `c` is window block `c` reshaped row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureImage {
    pub values: Array3<f64>,
}

impl FeatureImage {
    /// Channel-by-channel flattening; equals the feature vector.
    pub fn flatten(&self) -> Vec<f64> {
        let (h, w, c) = self.values.dim();
        let mut out = Vec::with_capacity(h * w * c);
        for ch in 0..c {
            for r in 0..h {
                for col in 0..w {
                    out.push(self.values[[r, col, ch]]);
                }
            }
        }
        out
    }
}

/// Raw 16-value block of one 4×4 covariance, before normalization.
pub fn serialize_block(r: &CMatrix) -> Result<[f64; BLOCK_LEN]> {
    if r.dim() != (FEATURE_ELEMENTS, FEATURE_ELEMENTS) {
        return Err(Error::Unsupported(format!(
            "features are defined for 4x4 covariances, got {:?}",
            r.dim()
        )));
    }
    let mut b = [0.0; BLOCK_LEN];
    let mut i = 0;
    for j in 0..FEATURE_ELEMENTS {
        for k in j..FEATURE_ELEMENTS {
            b[i] = r[[j, k]].re;
            i += 1;
        }
    }
    for k in 0..FEATURE_ELEMENTS {
        for j in k + 1..FEATURE_ELEMENTS {
            b[i] = r[[j, k]].im;
            i += 1;
        }
    }
    Ok(b)
}

/// Inverse of [`serialize_block`] for Hermitian matrices.
pub fn reconstruct_block(b: &[f64]) -> Result<CMatrix> {
    if b.len() != BLOCK_LEN {
        return domain(format!("block must have {BLOCK_LEN} values, got {}", b.len()));
    }
    let mut r = CMatrix::zeros((FEATURE_ELEMENTS, FEATURE_ELEMENTS));
    let mut i = 0;
    for j in 0..FEATURE_ELEMENTS {
        for k in j..FEATURE_ELEMENTS {
            r[[j, k]].re = b[i];
            r[[k, j]].re = b[i];
            i += 1;
        }
    }
    for k in 0..FEATURE_ELEMENTS {
        for j in k + 1..FEATURE_ELEMENTS {
            r[[j, k]].im = b[i];
            r[[k, j]].im = -b[i];
            i += 1;
        }
    }
    Ok(r)
}

pub fn serialize_features(stack: &CovarianceStack) -> Result<FeatureVector> {
    if stack.is_empty() {
        return domain("covariance stack is empty");
    }
    let mut values = Vec::with_capacity(stack.len() * BLOCK_LEN);
    for (c, r) in stack.matrices.iter().enumerate() {
        let b = serialize_block(r)?;
        let norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Degenerate(format!("window {c} has zero or non-finite norm")));
        }
        values.extend(b.iter().map(|v| v / norm));
    }
    Ok(FeatureVector { values })
}

pub fn featurize_image(stack: &CovarianceStack) -> Result<FeatureImage> {
    let fv = serialize_features(stack)?;
    Ok(image_from_vector(&fv.values))
}

/// Reshapes block-major feature values into an `(4, 4, C)` image.
pub fn image_from_vector(values: &[f64]) -> FeatureImage {
    let c = values.len() / BLOCK_LEN;
    let mut img = Array3::zeros((FEATURE_ELEMENTS, FEATURE_ELEMENTS, c));
    for (ch, block) in values.chunks_exact(BLOCK_LEN).enumerate() {
        for (i, v) in block.iter().enumerate() {
            img[[i / FEATURE_ELEMENTS, i % FEATURE_ELEMENTS, ch]] = *v;
        }
    }
    FeatureImage { values: img }
}

/// Frame → covariance stack → normalized feature vector.
pub fn frame_features(frame: &IqFrame, window_length: usize, count: usize) -> Result<FeatureVector> {
    serialize_features(&stack_covariances(frame, window_length, count)?)
}

/// Per-feature standardization fitted on a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl StandardScaler {
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let mut acc = ScalerAccumulator::default();
        for row in rows {
            acc.push(row)?;
        }
        acc.finish()
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.dim() {
            return domain(format!("scaler expects {} features, got {}", self.dim(), row.len()));
        }
        Ok(row
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect())
    }
}

/// Streaming Welford mean/variance per feature.
#[derive(Debug, Clone, Default)]
pub struct ScalerAccumulator {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl ScalerAccumulator {
    pub fn push(&mut self, row: &[f64]) -> Result<()> {
        if self.count == 0 {
            self.mean = vec![0.0; row.len()];
            self.m2 = vec![0.0; row.len()];
        } else if row.len() != self.mean.len() {
            return domain("rows of differing length");
        }
        self.count += 1;
        let n = self.count as f64;
        for ((x, m), m2) in row.iter().zip(self.mean.iter_mut()).zip(self.m2.iter_mut()) {
            let d = x - *m;
            *m += d / n;
            *m2 += d * (x - *m);
        }
        Ok(())
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Population statistics; constant features get unit std.
    pub fn finish(self) -> Result<StandardScaler> {
        if self.count == 0 {
            return domain("cannot fit a scaler on zero rows");
        }
        let n = self.count as f64;
        let std = self
            .m2
            .iter()
            .map(|m2| {
                let s = (m2 / n).sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Ok(StandardScaler { mean: self.mean, std })
    }
}

/// Max `|R − Rᴴ|` entry.
pub fn hermitian_defect(r: &CMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for ((j, k), z) in r.indexed_iter() {
        worst = worst.max((z - r[[k, j]].conj()).norm());
    }
    worst
}

pub fn frobenius(r: &CMatrix) -> f64 {
    r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn trace(r: &CMatrix) -> f64 {
    r.diag().iter().map(|z| z.re).sum()
}

/// `‖a − b‖_F / ‖b‖_F`.
pub fn relative_frobenius(a: &CMatrix, b: &CMatrix) -> f64 {
    frobenius(&(a - b)) / frobenius(b)
}
