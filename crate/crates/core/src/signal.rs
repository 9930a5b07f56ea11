//! Synthetic multichannel IQ frames: `x = Σ a(θ_l)·s_l + n`.
//!
//! Basebands are narrowband stand-ins for the real transmissions. The
//! covariance features only see inter-channel phase, so the baseband kind is
//! treated as nuisance variation.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::str::FromStr;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array2, Zip};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::array::{steering_vector, ArrayConfig};
use crate::error::{domain, Error, Result};

/// Default frame length (2^15 samples).
pub const DEFAULT_FRAME_LEN: usize = 1 << 15;
/// Default complex sample rate, Hz.
pub const DEFAULT_SAMPLE_RATE: f64 = 2e6;
/// Signal power that noise-only frames are referenced to.
pub const REFERENCE_POWER: f64 = 1.0;

/// SplitMix64 finalizer, used to derive independent child seeds.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Narrowband stand-in waveforms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Baseband {
    /// `exp(j2π f n / fs)`.
    ComplexTone { offset_hz: f64 },
    /// Linear sweep across `sweep_hz` centred on DC over the whole sequence.
    LinearChirp { sweep_hz: f64 },
    /// Rectangular-pulse QPSK with random symbols.
    RandomQpsk { symbol_rate: f64 },
}

impl Baseband {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Baseband::ComplexTone { .. } => "complex_tone",
            Baseband::LinearChirp { .. } => "linear_chirp",
            Baseband::RandomQpsk { .. } => "random_qpsk",
        }
    }

    /// Builds a baseband from a kind name and its single parameter.
    pub fn from_kind(kind: &str, param: f64) -> Result<Self> {
        match kind {
            "complex_tone" | "tone" => Ok(Baseband::ComplexTone { offset_hz: param }),
            "linear_chirp" | "chirp" => Ok(Baseband::LinearChirp { sweep_hz: param }),
            "random_qpsk" | "qpsk" => Ok(Baseband::RandomQpsk { symbol_rate: param }),
            other => Err(Error::Config(format!("unknown baseband kind `{other}`"))),
        }
    }
}

impl FromStr for Baseband {
    type Err = Error;

    /// Parses `kind` or `kind:param`, e.g. `tone:1000`, `qpsk:125000`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, param) = match s.split_once(':') {
            Some((k, p)) => (
                k,
                p.parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad baseband parameter in `{s}`")))?,
            ),
            None => (s, 0.0),
        };
        let param = match (kind, s.contains(':')) {
            ("random_qpsk" | "qpsk", false) => 125e3,
            _ => param,
        };
        Self::from_kind(kind, param)
    }
}

/// Unit-average-power baseband of `length` samples; deterministic in `seed`.
pub fn gen_baseband(kind: &Baseband, length: usize, sample_rate: f64, seed: u64) -> Result<Vec<Complex64>> {
    if length == 0 {
        return domain("baseband length must be positive");
    }
    if !(sample_rate > 0.0) {
        return Err(Error::Config(format!("sample rate must be positive, got {sample_rate}")));
    }
    let out = match *kind {
        Baseband::ComplexTone { offset_hz } => {
            let w = 2.0 * PI * offset_hz / sample_rate;
            (0..length)
                .map(|n| Complex64::from_polar(1.0, w * n as f64))
                .collect()
        }
        Baseband::LinearChirp { sweep_hz } => {
            let duration = length as f64 / sample_rate;
            let rate = sweep_hz / duration;
            let f0 = -sweep_hz / 2.0;
            (0..length)
                .map(|n| {
                    let t = n as f64 / sample_rate;
                    Complex64::from_polar(1.0, 2.0 * PI * (f0 * t + 0.5 * rate * t * t))
                })
                .collect()
        }
        Baseband::RandomQpsk { symbol_rate } => {
            if !(symbol_rate > 0.0) {
                return Err(Error::Config(format!("symbol rate must be positive, got {symbol_rate}")));
            }
            let sps = ((sample_rate / symbol_rate).round() as usize).max(1);
            let mut rng = rng_from(seed);
            let mut out = Vec::with_capacity(length);
            while out.len() < length {
                let k: u8 = rng.random_range(0..4);
                let sym = Complex64::from_polar(1.0, PI / 4.0 + PI / 2.0 * k as f64);
                let take = sps.min(length - out.len());
                out.extend(std::iter::repeat_n(sym, take));
            }
            out
        }
    };
    Ok(out)
}

/// One impinging source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub angle_deg: f64,
    pub baseband: Baseband,
    /// Linear power, ≥ 0.
    pub power: f64,
    /// Seed of this source's baseband stream.
    pub seed: u64,
}

impl SourceSpec {
    pub fn new(angle_deg: f64, baseband: Baseband) -> Self {
        Self {
            angle_deg,
            baseband,
            power: 1.0,
            seed: 0,
        }
    }

    pub fn with_power(mut self, power: f64) -> Self {
        self.power = power;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// An M×N block of complex baseband samples, one row per array element.
#[derive(Debug, Clone, PartialEq)]
pub struct IqFrame {
    pub samples: Array2<Complex64>,
    pub sample_rate: f64,
    pub config: ArrayConfig,
    pub seed: u64,
}

impl IqFrame {
    pub fn num_elements(&self) -> usize {
        self.samples.nrows()
    }

    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean `|x|²` over all elements and samples.
    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Writes the binary container: `b"IQF1"`, M (u32), N (u64),
    /// sample rate (f64), seed (u64), spacing factor (f64), wavelength (f64),
    /// then interleaved little-endian f32 I/Q, channel-major.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(FRAME_MAGIC)?;
        w.write_u32::<LittleEndian>(self.num_elements() as u32)?;
        w.write_u64::<LittleEndian>(self.len() as u64)?;
        w.write_f64::<LittleEndian>(self.sample_rate)?;
        w.write_u64::<LittleEndian>(self.seed)?;
        w.write_f64::<LittleEndian>(self.config.spacing_factor())?;
        w.write_f64::<LittleEndian>(self.config.wavelength())?;
        for row in self.samples.rows() {
            for z in row {
                w.write_f32::<LittleEndian>(z.re as f32)?;
                w.write_f32::<LittleEndian>(z.im as f32)?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != FRAME_MAGIC {
            return Err(Error::Format("not an IQ frame container".into()));
        }
        let m = r.read_u32::<LittleEndian>()? as usize;
        let n = r.read_u64::<LittleEndian>()? as usize;
        let sample_rate = r.read_f64::<LittleEndian>()?;
        let seed = r.read_u64::<LittleEndian>()?;
        let alpha = r.read_f64::<LittleEndian>()?;
        let wavelength = r.read_f64::<LittleEndian>()?;
        let config = ArrayConfig::new(m, alpha, wavelength)
            .map_err(|e| Error::Format(format!("frame header: {e}")))?;
        if n.checked_mul(m).is_none_or(|t| t > 1 << 32) {
            return Err(Error::Format(format!("implausible frame size {m}x{n}")));
        }
        let mut samples = Array2::zeros((m, n));
        for z in samples.iter_mut() {
            let re = r.read_f32::<LittleEndian>()? as f64;
            let im = r.read_f32::<LittleEndian>()? as f64;
            *z = Complex64::new(re, im);
        }
        Ok(Self {
            samples,
            sample_rate,
            config,
            seed,
        })
    }
}

const FRAME_MAGIC: &[u8; 4] = b"IQF1";

/// Noiseless frame from at most two sources, then optional AWGN at `snr_db`
/// relative to the summed signal power. With no sources the frame is pure
/// noise referenced to [`REFERENCE_POWER`].
pub fn synthesize_frame(
    sources: &[SourceSpec],
    config: &ArrayConfig,
    length: usize,
    sample_rate: f64,
    snr_db: Option<f64>,
    seed: u64,
) -> Result<IqFrame> {
    if sources.len() > 2 {
        return Err(Error::Unsupported(format!(
            "at most two sources are supported, got {}",
            sources.len()
        )));
    }
    if sources.len() == 2 && sources[0].angle_deg == sources[1].angle_deg {
        return domain("two sources must have distinct angles");
    }
    if length == 0 {
        return domain("frame length must be positive");
    }
    config.validate()?;
    let mut samples = Array2::<Complex64>::zeros((config.num_elements(), length));
    for src in sources {
        if !(src.power >= 0.0) {
            return domain(format!("source power must be non-negative, got {}", src.power));
        }
        let a = steering_vector(src.angle_deg, config)?;
        let s = gen_baseband(&src.baseband, length, sample_rate, src.seed)?;
        let amp = src.power.sqrt();
        for (mut row, am) in samples.rows_mut().into_iter().zip(&a.elements) {
            let g = am * amp;
            Zip::from(&mut row).and(&s).for_each(|x, &b| *x += g * b);
        }
    }
    let mut frame = IqFrame {
        samples,
        sample_rate,
        config: *config,
        seed,
    };
    match snr_db {
        None => {}
        Some(snr) if sources.is_empty() => {
            add_noise_power(&mut frame, REFERENCE_POWER / db_to_linear(snr), seed);
        }
        Some(snr) => frame = add_awgn(&frame, snr, seed)?,
    }
    Ok(frame)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Adds circular complex Gaussian noise so that the measured signal power
/// over the added noise power equals `snr_db`. `+∞` returns the input.
pub fn add_awgn(frame: &IqFrame, snr_db: f64, seed: u64) -> Result<IqFrame> {
    if frame.is_empty() {
        return domain("cannot add noise to an empty frame");
    }
    if !frame.is_finite() {
        return domain("frame has non-finite samples");
    }
    if snr_db.is_nan() {
        return domain("snr is NaN");
    }
    let mut out = frame.clone();
    if snr_db == f64::INFINITY {
        return Ok(out);
    }
    let noise_power = frame.mean_power() / db_to_linear(snr_db);
    add_noise_power(&mut out, noise_power, seed);
    Ok(out)
}

/// Adds noise of the given per-sample complex variance in place.
pub fn add_noise_power(frame: &mut IqFrame, noise_power: f64, seed: u64) {
    if noise_power <= 0.0 {
        return;
    }
    let sigma = (noise_power / 2.0).sqrt();
    let mut rng = rng_from(derive_seed(seed, 0x6e6f_6973_65));
    for z in frame.samples.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *z += Complex64::new(sigma * re, sigma * im);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone() -> Baseband {
        Baseband::ComplexTone { offset_hz: 1000.0 }
    }

    #[test]
    fn zero_tone_is_constant_one() {
        let s = gen_baseband(&Baseband::ComplexTone { offset_hz: 0.0 }, 16, 2e6, 3).unwrap();
        assert!(s.iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn chirp_constant_modulus() {
        let s = gen_baseband(&Baseband::LinearChirp { sweep_hz: 50e3 }, 8, 2e6, 0).unwrap();
        assert_eq!(s.len(), 8);
        assert!(s.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn qpsk_is_seed_deterministic() {
        let k = Baseband::RandomQpsk { symbol_rate: 125e3 };
        let a = gen_baseband(&k, 4096, 2e6, 42).unwrap();
        let b = gen_baseband(&k, 4096, 2e6, 42).unwrap();
        let c = gen_baseband(&k, 4096, 2e6, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let p: f64 = a.iter().map(|z| z.norm_sqr()).sum::<f64>() / a.len() as f64;
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn baseband_parsing() {
        assert_eq!("tone:5".parse::<Baseband>().unwrap(), Baseband::ComplexTone { offset_hz: 5.0 });
        assert!(matches!("qpsk".parse::<Baseband>().unwrap(), Baseband::RandomQpsk { .. }));
        assert!(matches!("ofdm".parse::<Baseband>(), Err(Error::Config(_))));
        assert!(gen_baseband(&tone(), 0, 2e6, 0).is_err());
    }

    #[test]
    fn broadside_rows_identical() {
        let cfg = ArrayConfig::default();
        let f = synthesize_frame(&[SourceSpec::new(0.0, tone())], &cfg, 256, 2e6, None, 1).unwrap();
        for m in 1..4 {
            assert_eq!(f.samples.row(m), f.samples.row(0));
        }
    }

    #[test]
    fn noise_only_frame_has_requested_variance() {
        let cfg = ArrayConfig::default();
        let snr = 3.0;
        let f = synthesize_frame(&[], &cfg, DEFAULT_FRAME_LEN, 2e6, Some(snr), 9).unwrap();
        let want = REFERENCE_POWER / db_to_linear(snr);
        for row in f.samples.rows() {
            let var = row.iter().map(|z| z.norm_sqr()).sum::<f64>() / row.len() as f64;
            assert!((var - want).abs() / want < 0.05, "{var} vs {want}");
        }
    }

    #[test]
    fn superposition_is_linear() {
        let cfg = ArrayConfig::default();
        let a = SourceSpec::new(30.0, tone()).with_seed(1);
        let b = SourceSpec::new(-30.0, Baseband::RandomQpsk { symbol_rate: 1e5 }).with_seed(2);
        let both = synthesize_frame(&[a, b], &cfg, 1024, 2e6, None, 0).unwrap();
        let fa = synthesize_frame(&[a], &cfg, 1024, 2e6, None, 0).unwrap();
        let fb = synthesize_frame(&[b], &cfg, 1024, 2e6, None, 0).unwrap();
        let diff = (&both.samples - &fa.samples - &fb.samples)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-12);
    }

    #[test]
    fn too_many_sources() {
        let cfg = ArrayConfig::default();
        let s = |t| SourceSpec::new(t, tone());
        let err = synthesize_frame(&[s(0.0), s(10.0), s(20.0)], &cfg, 64, 2e6, None, 0);
        assert!(matches!(err, Err(Error::Unsupported(_))));
        assert!(synthesize_frame(&[s(5.0), s(5.0)], &cfg, 64, 2e6, None, 0).is_err());
    }

    #[test]
    fn awgn_examples() {
        let cfg = ArrayConfig::default();
        let f = synthesize_frame(&[SourceSpec::new(12.0, tone())], &cfg, DEFAULT_FRAME_LEN, 2e6, None, 0).unwrap();
        assert_eq!(add_awgn(&f, f64::INFINITY, 1).unwrap(), f);

        let noisy = add_awgn(&f, 0.0, 5).unwrap();
        let noise = &noisy.samples - &f.samples;
        let np = noise.iter().map(|z| z.norm_sqr()).sum::<f64>() / noise.len() as f64;
        assert!((np - f.mean_power()).abs() / f.mean_power() < 0.05);

        assert_eq!(add_awgn(&f, 0.0, 5).unwrap(), noisy);
        let empty = IqFrame {
            samples: Array2::zeros((4, 0)),
            sample_rate: 2e6,
            config: cfg,
            seed: 0,
        };
        assert!(add_awgn(&empty, 0.0, 0).is_err());
    }

    #[test]
    fn container_round_trip() {
        let cfg = ArrayConfig::default();
        let f = synthesize_frame(&[SourceSpec::new(-20.0, tone())], &cfg, 128, 2e6, Some(10.0), 77).unwrap();
        let mut buf = Vec::new();
        f.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 8 + 8 + 8 + 8 + 8 + 4 * 128 * 8);
        let g = IqFrame::read_from(buf.as_slice()).unwrap();
        assert_eq!(g.seed, 77);
        assert_eq!(g.config, cfg);
        let err = (&g.samples - &f.samples).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 1e-5);
        assert!(IqFrame::read_from(&b"nope"[..]).is_err());
    }
}
