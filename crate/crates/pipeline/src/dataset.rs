//! Dataset building and loading.
//!
//! Raw single-source frames are assigned to splits first; every phase-shifted,
//! noisy or superimposed descendant inherits its parent's split, and pairs are
//! only formed inside a split.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use aoa_core::augment::{phase_shift, superimpose};
use aoa_core::covariance::{frame_features, ScalerAccumulator, StandardScaler};
use aoa_core::signal::{add_awgn, derive_seed, synthesize_frame, Baseband, IqFrame, SourceSpec};
use aoa_core::ArrayConfig;
use aoa_nn::labels::encode_label;
use aoa_nn::train::TrainData;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::DatasetConfig;
use crate::error::{PipelineError, Result};

pub const RECORDS_FILE: &str = "records.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const FORMAT_VERSION: u32 = 1;

const SPLIT_STREAM: u64 = 0x5350_4c49_54;
const PAIR_STREAM: u64 = 0x5041_4952;
const POWER_STREAM: u64 = 0x504f_5745_52;
const CHUNK: usize = 64;
const PAIR_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl std::str::FromStr for Split {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" | "val" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(PipelineError::Usage(format!("unknown split '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub snr_db: f64,
    pub scenario: String,
    pub aug: String,
    pub seed: u64,
    /// Ascending true angles.
    pub angles_deg: Vec<f64>,
}

/// One JSON line of `records.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub id: u64,
    pub split: Split,
    pub features: Vec<f64>,
    pub label: [f64; 3],
    pub meta: RecordMeta,
}

impl Record {
    pub fn num_sources(&self) -> u8 {
        self.meta.angles_deg.len() as u8
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub single: usize,
    pub two: usize,
}

impl ClassCounts {
    pub fn total(&self) -> usize {
        self.single + self.two
    }

    /// Fraction of two-source records.
    pub fn two_fraction(&self) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            self.two as f64 / self.total() as f64
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: ClassCounts,
    pub validation: ClassCounts,
    pub test: ClassCounts,
}

impl SplitCounts {
    pub fn get_mut(&mut self, s: Split) -> &mut ClassCounts {
        match s {
            Split::Train => &mut self.train,
            Split::Validation => &mut self.validation,
            Split::Test => &mut self.test,
        }
    }

    pub fn get(&self, s: Split) -> ClassCounts {
        match s {
            Split::Train => self.train,
            Split::Validation => self.validation,
            Split::Test => self.test,
        }
    }

    pub fn total(&self) -> ClassCounts {
        ClassCounts {
            single: self.train.single + self.validation.single + self.test.single,
            two: self.train.two + self.validation.two + self.test.two,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub records: String,
    pub num_records: usize,
    /// Fitted on the train split only.
    pub scaler: StandardScaler,
    pub splits: [f64; 3],
    pub raw_frames: [usize; 3],
    pub counts: SplitCounts,
    pub config: DatasetConfig,
}

impl DatasetManifest {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let path = dir.as_ref().join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| PipelineError::Data(format!("cannot read {}: {e}", path.display())))?;
        let m: Self = serde_json::from_str(&text)?;
        if m.format_version != FORMAT_VERSION {
            return Err(PipelineError::Data(format!("unsupported manifest version {}", m.format_version)));
        }
        Ok(m)
    }

    /// Human-readable class-balance table.
    pub fn balance_report(&self) -> String {
        let mut s = String::from("split       single      two    two%\n");
        for (name, c) in [
            ("train", self.counts.train),
            ("validation", self.counts.validation),
            ("test", self.counts.test),
            ("total", self.counts.total()),
        ] {
            s.push_str(&format!(
                "{name:<10} {:>7} {:>8} {:>6.1}\n",
                c.single,
                c.two,
                100.0 * c.two_fraction()
            ));
        }
        s
    }
}

/// A single source as it appears in one raw recording.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceDraw {
    pub scenario: usize,
    pub angle_deg: f64,
    pub power: f64,
    pub seed: u64,
}

/// Everything needed to turn draws into frames and features.
pub struct Synth<'a> {
    pub config: &'a DatasetConfig,
    pub array: ArrayConfig,
    basebands: Vec<Baseband>,
}

impl<'a> Synth<'a> {
    pub fn new(config: &'a DatasetConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            array: config.array.build()?,
            basebands: config.scenarios.iter().map(|s| s.baseband()).collect::<Result<_>>()?,
        })
    }

    pub fn draw(&self, scenario: usize, angle_deg: f64, seed: u64) -> SourceDraw {
        let [lo, hi] = self.config.scenarios[scenario].power_range;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, POWER_STREAM));
        let power = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        SourceDraw {
            scenario,
            angle_deg,
            power,
            seed,
        }
    }

    pub fn noiseless(&self, d: &SourceDraw) -> Result<IqFrame> {
        let src = SourceSpec::new(d.angle_deg, self.basebands[d.scenario])
            .with_power(d.power)
            .with_seed(d.seed);
        let f = &self.config.frame;
        Ok(synthesize_frame(&[src], &self.array, f.length, f.sample_rate, None, d.seed)?)
    }

    /// Noiseless frame relabeled from `d.angle_deg` to `d.angle_deg + shift`.
    pub fn shifted(&self, d: &SourceDraw, shift: f64) -> Result<IqFrame> {
        let frame = self.noiseless(d)?;
        if shift == 0.0 {
            Ok(frame)
        } else {
            Ok(phase_shift(&frame, d.angle_deg, shift, &self.array)?)
        }
    }

    pub fn features(&self, frame: &IqFrame) -> Result<Vec<f64>> {
        let f = &self.config.frame;
        Ok(frame_features(frame, f.window_length, f.windows)?.values)
    }

    pub fn scenario_name(&self, i: usize) -> &str {
        &self.config.scenarios[i].name
    }
}

fn label_for(angles: &[f64]) -> Result<[f64; 3]> {
    let l = encode_label(angles[0], angles.get(1).copied())?;
    Ok(l.as_array())
}

fn fmt_shift(s: f64) -> String {
    if s == 0.0 {
        "raw".into()
    } else {
        format!("shift:{s:+}")
    }
}

/// One unit of generation work: a single-source variant expanded over all
/// SNR levels, or one noisy two-source superposition.
#[derive(Debug, Clone)]
enum Job {
    Single {
        draw: SourceDraw,
        shift: f64,
        shift_idx: usize,
        split: Split,
    },
    Pair {
        a: (SourceDraw, f64),
        b: (SourceDraw, f64),
        snr_db: f64,
        seed: u64,
        split: Split,
    },
}

/// Record without id; ids are assigned in output order.
type Pending = (Split, Vec<f64>, [f64; 3], RecordMeta);

fn run_job(synth: &Synth<'_>, job: &Job) -> Result<Vec<Pending>> {
    match job {
        Job::Single {
            draw,
            shift,
            shift_idx,
            split,
        } => {
            let clean = synth.shifted(draw, *shift)?;
            let angle = draw.angle_deg + shift;
            let label = label_for(&[angle])?;
            synth
                .config
                .snr_levels_db
                .iter()
                .enumerate()
                .map(|(j, &snr)| {
                    let noise_seed = derive_seed(draw.seed, ((*shift_idx as u64) << 16) | j as u64);
                    let noisy = add_awgn(&clean, snr, noise_seed)?;
                    Ok((
                        *split,
                        synth.features(&noisy)?,
                        label,
                        RecordMeta {
                            snr_db: snr,
                            scenario: synth.scenario_name(draw.scenario).to_string(),
                            aug: format!("{},awgn:{snr}", fmt_shift(*shift)),
                            seed: noise_seed,
                            angles_deg: vec![angle],
                        },
                    ))
                })
                .collect()
        }
        Job::Pair {
            a,
            b,
            snr_db,
            seed,
            split,
        } => {
            let (ta, tb) = (a.0.angle_deg + a.1, b.0.angle_deg + b.1);
            let fa = synth.shifted(&a.0, a.1)?;
            let fb = synth.shifted(&b.0, b.1)?;
            let sup = superimpose(&fa, ta, &fb, tb, *seed)?;
            let noisy = add_awgn(&sup.frame, *snr_db, derive_seed(*seed, 1))?;
            let (lo, hi) = sup.spec.component_angles;
            let (first, second) = if ta < tb { (a, b) } else { (b, a) };
            Ok(vec![(
                *split,
                synth.features(&noisy)?,
                label_for(&[lo, hi])?,
                RecordMeta {
                    snr_db: *snr_db,
                    scenario: format!(
                        "{}+{}",
                        synth.scenario_name(first.0.scenario),
                        synth.scenario_name(second.0.scenario)
                    ),
                    aug: format!("pair({},{}),awgn:{snr_db}", fmt_shift(first.1), fmt_shift(second.1)),
                    seed: *seed,
                    angles_deg: vec![lo, hi],
                },
            )])
        }
    }
}

fn assign_splits(n: usize, fractions: [f64; 3], seed: u64) -> Vec<Split> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, SPLIT_STREAM)));
    let n_train = (n as f64 * fractions[0]).round() as usize;
    let n_val = ((n as f64 * (fractions[0] + fractions[1])).round() as usize).max(n_train);
    let mut out = vec![Split::Test; n];
    for (rank, &i) in order.iter().enumerate() {
        out[i] = if rank < n_train {
            Split::Train
        } else if rank < n_val {
            Split::Validation
        } else {
            Split::Test
        };
    }
    out
}

fn plan_pairs(
    pools: &[Vec<(SourceDraw, f64)>; 3],
    count: usize,
    config: &DatasetConfig,
) -> Result<Vec<Job>> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, PAIR_STREAM));
    let weights: Vec<f64> = Split::ALL
        .iter()
        .map(|s| {
            let pool = &pools[s.index()];
            let mixed = pool.iter().any(|(d, _)| d.scenario != pool[0].0.scenario);
            if mixed { config.splits[s.index()] } else { 0.0 }
        })
        .collect();
    let wsum: f64 = weights.iter().sum();
    if count > 0 && !(wsum > 0.0) {
        return Err(PipelineError::Config("no split has enough frames to form pairs".into()));
    }
    let levels = &config.snr_levels_db;
    let mut jobs = Vec::with_capacity(count);
    for c in 0..count {
        let mut u = rng.random_range(0.0..wsum);
        let split = *Split::ALL
            .iter()
            .find(|s| {
                u -= weights[s.index()];
                u < 0.0
            })
            .unwrap_or(&Split::Test);
        let pool = &pools[split.index()];
        let mut found = None;
        for _ in 0..PAIR_ATTEMPTS {
            let a = pool[rng.random_range(0..pool.len())];
            let b = pool[rng.random_range(0..pool.len())];
            let (ta, tb) = (a.0.angle_deg + a.1, b.0.angle_deg + b.1);
            if a.0.scenario != b.0.scenario && ta != tb && (ta - tb).abs() >= config.pairs.min_separation_deg {
                found = Some((a, b));
                break;
            }
        }
        let (a, b) = found.ok_or_else(|| {
            PipelineError::Config(format!(
                "could not find a valid pair in the {split:?} split; relax min_separation_deg or add scenarios"
            ))
        })?;
        jobs.push(Job::Pair {
            a,
            b,
            snr_db: levels[c % levels.len()],
            seed: derive_seed(derive_seed(config.seed, PAIR_STREAM), c as u64),
            split,
        });
    }
    Ok(jobs)
}

fn plan(config: &DatasetConfig, synth: &Synth<'_>) -> Result<(Vec<Job>, [usize; 3])> {
    let angles = config.base_angles.values();
    let mut raw = Vec::with_capacity(config.raw_frame_count());
    for s in 0..config.scenarios.len() {
        let s_seed = derive_seed(config.seed, s as u64);
        for (ai, &angle) in angles.iter().enumerate() {
            for k in 0..config.frames_per_angle {
                let seed = derive_seed(s_seed, ((ai as u64) << 32) | k as u64);
                raw.push(synth.draw(s, angle, seed));
            }
        }
    }
    let splits = assign_splits(raw.len(), config.splits, config.seed);
    let mut raw_counts = [0usize; 3];
    for s in &splits {
        raw_counts[s.index()] += 1;
    }
    let shifts: Vec<f64> = std::iter::once(0.0).chain(config.phase_shifts_deg.iter().copied()).collect();
    let mut jobs = Vec::new();
    let mut pools: [Vec<(SourceDraw, f64)>; 3] = Default::default();
    for (draw, &split) in raw.iter().zip(&splits) {
        for (shift_idx, &shift) in shifts.iter().enumerate() {
            jobs.push(Job::Single {
                draw: *draw,
                shift,
                shift_idx,
                split,
            });
            pools[split.index()].push((*draw, shift));
        }
    }
    let singles = jobs.len() * config.snr_levels_db.len();
    let pair_count = (singles as f64 * config.pairs.ratio).round() as usize;
    jobs.extend(plan_pairs(&pools, pair_count, config)?);
    Ok((jobs, raw_counts))
}

/// Generates features for all jobs in deterministic order, chunk by chunk.
fn generate(synth: &Synth<'_>, jobs: &[Job], mut sink: impl FnMut(Pending) -> Result<()>) -> Result<()> {
    for (ci, chunk) in jobs.chunks(CHUNK).enumerate() {
        let done: Vec<Result<Vec<Pending>>> = chunk.par_iter().map(|j| run_job(synth, j)).collect();
        for r in done {
            for p in r? {
                sink(p)?;
            }
        }
        if ci % 32 == 0 {
            log::debug!("generated {} / {} jobs", (ci + 1) * CHUNK.min(chunk.len()), jobs.len());
        }
    }
    Ok(())
}

/// Builds `records.jsonl` and `manifest.json` under `out_dir`.
pub fn build_dataset(config: &DatasetConfig, out_dir: impl AsRef<Path>) -> Result<DatasetManifest> {
    let out_dir = out_dir.as_ref();
    let synth = Synth::new(config)?;
    std::fs::create_dir_all(out_dir)?;
    let (jobs, raw_frames) = plan(config, &synth)?;
    log::info!("building dataset: {} raw frames, {} generation jobs", synth.config.raw_frame_count(), jobs.len());
    let mut w = BufWriter::new(File::create(out_dir.join(RECORDS_FILE))?);
    let mut scaler = ScalerAccumulator::default();
    let mut counts = SplitCounts::default();
    let mut id = 0u64;
    generate(&synth, &jobs, |(split, features, label, meta)| {
        if split == Split::Train {
            scaler.push(&features)?;
        }
        let c = counts.get_mut(split);
        if meta.angles_deg.len() == 2 {
            c.two += 1;
        } else {
            c.single += 1;
        }
        let rec = Record {
            id,
            split,
            features,
            label,
            meta,
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
        id += 1;
        Ok(())
    })?;
    w.flush()?;
    if scaler.count() == 0 {
        return Err(PipelineError::Config("training split is empty".into()));
    }
    let manifest = DatasetManifest {
        format_version: FORMAT_VERSION,
        records: RECORDS_FILE.into(),
        num_records: id as usize,
        scaler: scaler.finish()?,
        splits: config.splits,
        raw_frames,
        counts,
        config: config.clone(),
    };
    let mut mw = BufWriter::new(File::create(out_dir.join(MANIFEST_FILE))?);
    serde_json::to_writer_pretty(&mut mw, &manifest)?;
    mw.write_all(b"\n")?;
    mw.flush()?;
    Ok(manifest)
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<Record>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| PipelineError::Data(format!("cannot open {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: Record = serde_json::from_str(&line)
            .map_err(|e| PipelineError::Data(format!("{}:{}: {e}", path.display(), i + 1)))?;
        if r.meta.angles_deg.is_empty() || r.meta.angles_deg.len() > 2 {
            return Err(PipelineError::Data(format!("{}:{}: bad angle list", path.display(), i + 1)));
        }
        out.push(r);
    }
    Ok(out)
}

/// Manifest plus all records of a dataset directory.
pub fn open_dataset(dir: impl AsRef<Path>) -> Result<(DatasetManifest, Vec<Record>)> {
    let dir = dir.as_ref();
    let m = DatasetManifest::load(dir)?;
    let records = read_records(dir.join(&m.records))?;
    if records.len() != m.num_records {
        return Err(PipelineError::Data(format!(
            "manifest lists {} records, file has {}",
            m.num_records,
            records.len()
        )));
    }
    Ok((m, records))
}

/// Scaled `f32` inputs and targets of the given records.
pub fn to_train_data<'r>(records: impl IntoIterator<Item = &'r Record>, scaler: &StandardScaler) -> Result<TrainData> {
    let rs: Vec<&Record> = records.into_iter().collect();
    let dim = scaler.dim();
    let mut x = Array2::<f32>::zeros((rs.len(), dim));
    let mut y = Array2::<f32>::zeros((rs.len(), 3));
    for (i, r) in rs.iter().enumerate() {
        let scaled = scaler.transform(&r.features)?;
        for (j, v) in scaled.into_iter().enumerate() {
            x[[i, j]] = v as f32;
        }
        for k in 0..3 {
            y[[i, k]] = r.label[k] as f32;
        }
    }
    Ok(TrainData::new(x, y)?)
}

/// Settings for a held-out evaluation set at one SNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSetConfig {
    pub snr_db: f64,
    /// Single-source angles are swept over `[-fov, fov]` in this step.
    pub angle_step_deg: f64,
    pub frames_per_angle: usize,
    /// Two-source records per single-source record.
    pub pair_ratio: f64,
    pub seed: u64,
}

/// Fresh frames (unseen seeds) covering the full field of view: singles on a
/// regular angle sweep plus random cross-scenario pairs from the same sweep.
pub fn build_sweep_set(config: &DatasetConfig, sweep: &SweepSetConfig) -> Result<Vec<Record>> {
    let synth = Synth::new(config)?;
    let fov = aoa_core::augment::FOV_DEG;
    let angles = aoa_core::array::angle_grid(-fov, fov, sweep.angle_step_deg);
    let n_scen = config.scenarios.len();
    let base = derive_seed(sweep.seed, sweep.snr_db.to_bits());
    let mut draws = Vec::new();
    for (ai, &a) in angles.iter().enumerate() {
        for k in 0..sweep.frames_per_angle {
            let idx = ai * sweep.frames_per_angle + k;
            draws.push(synth.draw(idx % n_scen, a, derive_seed(base, idx as u64)));
        }
    }
    let mut jobs: Vec<Job> = Vec::new();
    let mut sweep_cfg = config.clone();
    sweep_cfg.snr_levels_db = vec![sweep.snr_db];
    let synth = Synth::new(&sweep_cfg)?;
    for d in &draws {
        jobs.push(Job::Single {
            draw: *d,
            shift: 0.0,
            shift_idx: 0,
            split: Split::Test,
        });
    }
    let pairs = (draws.len() as f64 * sweep.pair_ratio).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(base, PAIR_STREAM));
    for c in 0..pairs {
        let mut found = None;
        for _ in 0..PAIR_ATTEMPTS {
            let (ta, tb) = (angles[rng.random_range(0..angles.len())], angles[rng.random_range(0..angles.len())]);
            let (sa, sb) = (rng.random_range(0..n_scen), rng.random_range(0..n_scen));
            if sa != sb && ta != tb && (ta - tb).abs() >= config.pairs.min_separation_deg {
                found = Some(((sa, ta), (sb, tb)));
                break;
            }
        }
        let ((sa, ta), (sb, tb)) = found.ok_or_else(|| PipelineError::Config("cannot form sweep pairs".into()))?;
        let pseed = derive_seed(base, (1 << 40) | c as u64);
        jobs.push(Job::Pair {
            a: (synth.draw(sa, ta, derive_seed(pseed, 2)), 0.0),
            b: (synth.draw(sb, tb, derive_seed(pseed, 3)), 0.0),
            snr_db: sweep.snr_db,
            seed: pseed,
            split: Split::Test,
        });
    }
    let mut out = Vec::with_capacity(jobs.len());
    generate(&synth, &jobs, |(split, features, label, meta)| {
        out.push(Record {
            id: out.len() as u64,
            split,
            features,
            label,
            meta,
        });
        Ok(())
    })?;
    Ok(out)
}
