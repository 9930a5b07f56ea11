//! The `aoa` command line.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use aoa_core::array::{angle_grid, array_factor};
use aoa_core::covariance::{stack_covariances, Detector};
use aoa_core::music::{default_grid, estimate_from_spectrum, music_spectrum};
use aoa_core::signal::{synthesize_frame, Baseband, IqFrame, SourceSpec, REFERENCE_POWER};
use aoa_nn::checkpoint;
use aoa_nn::network::{ModelSpec, Network};
use aoa_nn::{Prediction, Predictor, TrainConfig, TrainStage};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bench::{bench_predictor, untrained_predictor, DEFAULT_RUNS};
use crate::config::DatasetConfig;
use crate::dataset::{build_dataset, open_dataset, to_train_data, Record, Split, SweepSetConfig};
use crate::error::{PipelineError, Result};
use crate::evaluate::{
    compare_sweep, covariance_from_features, music_eval_records, nn_eval_records, report, write_cdf_csv,
    write_eval_csv, write_sweep_csv,
};

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const HISTORY_FILE: &str = "history.csv";

#[derive(Debug, Parser)]
#[command(name = "aoa", version, about = "Angle-of-arrival estimation toolkit for a 4-element linear array")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Seed overriding the configured one.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML configuration file (dataset settings, or training settings for `train`).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize IQ frames and write them as binary frame files.
    Simulate(SimulateArgs),
    /// Generate a feature dataset (records.jsonl + manifest.json).
    BuildDataset(BuildArgs),
    /// Train a network on a dataset.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset split.
    Eval(EvalArgs),
    /// Predict source count and angles for one frame or feature vector.
    Infer(InferArgs),
    /// MUSIC spectrum and estimates for a frame, or MUSIC metrics on a dataset.
    Music(MusicArgs),
    /// Single-sample inference latency.
    Bench(BenchArgs),
    /// CSV series for plotting.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Source angles in degrees (one or two); omit for a noise-only frame.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub angles: Vec<f64>,
    /// Baseband waveform, `kind[:param]`.
    #[arg(long, default_value = "chirp:20000")]
    pub baseband: String,
    /// SNR in dB; noise-only frames use it relative to unit power. Omit for noiseless.
    #[arg(long, allow_hyphen_values = true)]
    pub snr: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub frames: usize,
    /// Also write the feature vectors as JSON lines.
    #[arg(long)]
    pub features: bool,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Multiply the number of raw frames per angle.
    #[arg(long)]
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Arch {
    Fc,
    Cnn,
}

impl Arch {
    pub fn name(self) -> &'static str {
        match self {
            Arch::Fc => "fc",
            Arch::Cnn => "cnn",
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "fc")]
    pub model: Arch,
    /// Epochs per stage, e.g. `40,10`.
    #[arg(long, value_delimiter = ',')]
    pub epochs: Option<Vec<usize>>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint file.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Decision threshold on the two-source probability.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Binary frame file.
    #[arg(long, conflicts_with = "features")]
    pub frame: Option<PathBuf>,
    /// JSON array of 128 feature values.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Receiver noise power used to calibrate the detection gate.
    #[arg(long, default_value_t = REFERENCE_POWER)]
    pub noise_power: f64,
    /// Skip the detection gate.
    #[arg(long)]
    pub no_gate: bool,
}

#[derive(Debug, Args)]
pub struct MusicArgs {
    #[arg(long, conflicts_with = "data")]
    pub frame: Option<PathBuf>,
    /// Dataset directory; evaluates MUSIC with the true source count.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Number of sources assumed for a frame.
    #[arg(long, default_value_t = 1)]
    pub sources: usize,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Checkpoint; without it a freshly initialized `--arch` network is timed.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "cnn")]
    pub arch: Arch,
    #[arg(long, default_value_t = DEFAULT_RUNS)]
    pub runs: usize,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[command(subcommand)]
    pub kind: PlotKind,
}

#[derive(Debug, Subcommand)]
pub enum PlotKind {
    /// Array factor in dB over [-90, 90].
    ArrayFactor {
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        steer: f64,
        #[arg(long, default_value_t = 0.5)]
        step: f64,
    },
    /// Per-record RMSE CDF of a checkpoint on a dataset split.
    Cdf {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        /// Restrict to records with this many true sources.
        #[arg(long)]
        sources: Option<usize>,
        #[arg(long, default_value_t = 20.0)]
        max: f64,
        #[arg(long, default_value_t = 0.25)]
        step: f64,
    },
    /// RMSE against SNR on fresh full field-of-view test sets.
    SnrSweep {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-10,-5,0,5")]
        levels: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        angle_step: f64,
        #[arg(long, default_value_t = 4)]
        frames_per_angle: usize,
        #[arg(long)]
        no_music: bool,
    },
}

/// Removes the lock file when training ends, successfully or not.
struct TrainLock(PathBuf);

impl TrainLock {
    fn acquire(checkpoint: &Path) -> Result<Self> {
        let path = checkpoint.with_extension("ckpt.lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
                Ok(Self(path))
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(PipelineError::Usage(format!(
                "{} exists; another training run is writing this checkpoint",
                path.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for TrainLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.0);
    }
}

fn require_out(g: &GlobalArgs) -> Result<&Path> {
    let out = g
        .out
        .as_deref()
        .ok_or_else(|| PipelineError::Usage("--out <dir> is required".into()))?;
    std::fs::create_dir_all(out)?;
    Ok(out)
}

fn dataset_config(g: &GlobalArgs) -> Result<DatasetConfig> {
    let mut cfg = match &g.config {
        Some(p) => DatasetConfig::load(p)?,
        None => DatasetConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string(v)?);
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, v)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn split_records<'r>(records: &'r [Record], split: &str) -> Result<Vec<&'r Record>> {
    let split: Split = split.parse()?;
    let out: Vec<&Record> = records.iter().filter(|r| r.split == split).collect();
    if out.is_empty() {
        return Err(PipelineError::Data(format!("the {split:?} split is empty")));
    }
    Ok(out)
}

fn load_model(path: &Path) -> Result<Predictor> {
    if !path.exists() {
        return Err(PipelineError::Data(format!("checkpoint {} not found", path.display())));
    }
    Ok(checkpoint::load(path)?)
}

fn read_frame(path: &Path) -> Result<IqFrame> {
    let f = File::open(path).map_err(|e| PipelineError::Data(format!("cannot open {}: {e}", path.display())))?;
    Ok(IqFrame::read_from(std::io::BufReader::new(f))?)
}

fn cmd_simulate(g: &GlobalArgs, a: &SimulateArgs) -> Result<()> {
    if a.angles.len() > 2 {
        return Err(PipelineError::Usage("at most two source angles".into()));
    }
    if a.angles.is_empty() && a.snr.is_none() {
        return Err(PipelineError::Usage("a noise-only frame needs --snr".into()));
    }
    let cfg = dataset_config(g)?;
    let out = require_out(g)?;
    let array = cfg.array.build()?;
    let baseband: Baseband = a.baseband.parse()?;
    let seed = g.seed.unwrap_or(cfg.seed);
    let mut feats = if a.features {
        Some(BufWriter::new(File::create(out.join("features.jsonl"))?))
    } else {
        None
    };
    for i in 0..a.frames {
        let fseed = aoa_core::signal::derive_seed(seed, i as u64);
        let sources: Vec<SourceSpec> = a
            .angles
            .iter()
            .enumerate()
            .map(|(k, &t)| SourceSpec::new(t, baseband).with_seed(aoa_core::signal::derive_seed(fseed, k as u64)))
            .collect();
        let frame = synthesize_frame(&sources, &array, cfg.frame.length, cfg.frame.sample_rate, a.snr, fseed)?;
        let path = out.join(format!("frame_{i:05}.iq"));
        let mut w = BufWriter::new(File::create(&path)?);
        frame.write_to(&mut w)?;
        w.flush()?;
        if let Some(fw) = feats.as_mut() {
            let v = aoa_core::covariance::frame_features(&frame, cfg.frame.window_length, cfg.frame.windows)?;
            serde_json::to_writer(&mut *fw, &v.values)?;
            fw.write_all(b"\n")?;
        }
    }
    if let Some(mut fw) = feats {
        fw.flush()?;
    }
    println!("wrote {} frame(s) to {}", a.frames, out.display());
    Ok(())
}

fn cmd_build(g: &GlobalArgs, a: &BuildArgs) -> Result<()> {
    let mut cfg = dataset_config(g)?;
    if let Some(s) = a.scale {
        cfg = cfg.scaled(s)?;
    }
    let out = require_out(g)?;
    let t = std::time::Instant::now();
    let m = build_dataset(&cfg, out)?;
    println!("{} records in {:.1}s -> {}", m.num_records, t.elapsed().as_secs_f64(), out.display());
    print!("{}", m.balance_report());
    Ok(())
}

/// Training settings from `--config` (TOML) with flag overrides.
pub fn train_config(g: &GlobalArgs, a: &TrainArgs) -> Result<TrainConfig> {
    let mut cfg: TrainConfig = match &g.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| PipelineError::Data(format!("cannot read {}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| PipelineError::Config(e.to_string()))?
        }
        None => TrainConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(b) = a.batch_size {
        cfg.batch_size = b;
    }
    if let Some(e) = &a.epochs {
        if e.len() != cfg.stages.len() {
            return Err(PipelineError::Usage(format!(
                "--epochs needs {} comma-separated values",
                cfg.stages.len()
            )));
        }
        cfg.stages = cfg
            .stages
            .iter()
            .zip(e)
            .map(|(s, &n)| TrainStage { epochs: n, tau: s.tau })
            .collect();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_train(g: &GlobalArgs, a: &TrainArgs) -> Result<()> {
    let cfg = train_config(g, a)?;
    let out = require_out(g)?;
    let ckpt = out.join(CHECKPOINT_FILE);
    let _lock = TrainLock::acquire(&ckpt)?;
    let (manifest, records) = open_dataset(&a.data)?;
    let train = to_train_data(records.iter().filter(|r| r.split == Split::Train), &manifest.scaler)?;
    let val_recs: Vec<&Record> = records.iter().filter(|r| r.split == Split::Validation).collect();
    let val = if val_recs.is_empty() {
        None
    } else {
        Some(to_train_data(val_recs, &manifest.scaler)?)
    };
    let mut net = Network::<f32>::new(ModelSpec::by_name(a.model.name())?, cfg.seed)?;
    log::info!("training {} ({} params) on {} records", a.model.name(), net.param_count(), train.len());
    let history = aoa_nn::train(&mut net, &train, val.as_ref(), &cfg, |e| {
        eprintln!(
            "epoch {:>3} loss {:.5} (c {:.4} r1 {:.5} r2 {:.5}) val_acc {} val_mae {} {:.1}s",
            e.epoch,
            e.loss.total,
            e.loss.classification,
            e.loss.regression1,
            e.loss.regression2,
            e.val_acc.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into()),
            e.val_mae.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into()),
            e.seconds
        );
    })?;
    let predictor = Predictor::new(net, manifest.scaler.clone())?.with_threshold(cfg.threshold);
    checkpoint::save(&predictor, &ckpt)?;
    history.write_csv(BufWriter::new(File::create(out.join(HISTORY_FILE))?))?;
    println!("checkpoint {}", ckpt.display());
    Ok(())
}

fn cmd_eval(g: &GlobalArgs, a: &EvalArgs) -> Result<()> {
    let mut predictor = load_model(&a.model)?;
    if let Some(t) = a.threshold {
        predictor = predictor.with_threshold(t);
    }
    let (_, records) = open_dataset(&a.data)?;
    let recs = split_records(&records, &a.split)?;
    let evals = nn_eval_records(&predictor, &recs)?;
    let rep = report(&predictor.network.spec.name, &evals)?;
    print!("{rep}");
    if let Some(out) = &g.out {
        std::fs::create_dir_all(out)?;
        let ids: Vec<u64> = recs.iter().map(|r| r.id).collect();
        write_eval_csv(BufWriter::new(File::create(out.join("eval.csv"))?), &ids, &evals)?;
        write_json(&out.join("report.json"), &rep)?;
        std::fs::write(out.join("confusion.txt"), rep.confusion.to_string())?;
    }
    Ok(())
}

/// Output of `infer`: `{"L": 0}` when the gate finds no signal.
#[derive(Debug, Serialize)]
#[serde(untagged)]
pub enum InferOutput {
    NoSignal {
        #[serde(rename = "L")]
        num_sources: u8,
    },
    Detected(Prediction),
}

pub fn infer_frame(predictor: &Predictor, frame: &IqFrame, config: &DatasetConfig, detector: Option<Detector>) -> Result<InferOutput> {
    let f = &config.frame;
    let stack = stack_covariances(frame, f.window_length, f.windows)?;
    if let Some(d) = detector {
        if !d.detect_stack(&stack)? {
            return Ok(InferOutput::NoSignal { num_sources: 0 });
        }
    }
    let features = aoa_core::covariance::serialize_features(&stack)?;
    Ok(InferOutput::Detected(predictor.predict(&features.values)?))
}

fn cmd_infer(g: &GlobalArgs, a: &InferArgs) -> Result<()> {
    let predictor = load_model(&a.model)?;
    let out = match (&a.frame, &a.features) {
        (Some(p), None) => {
            let cfg = dataset_config(g)?;
            let detector = (!a.no_gate).then(|| Detector::for_noise_floor(a.noise_power, cfg.frame.window_length, cfg.frame.windows));
            infer_frame(&predictor, &read_frame(p)?, &cfg, detector)?
        }
        (None, Some(p)) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| PipelineError::Data(format!("cannot read {}: {e}", p.display())))?;
            let v: Vec<f64> = serde_json::from_str(&text)?;
            InferOutput::Detected(predictor.predict(&v)?)
        }
        _ => return Err(PipelineError::Usage("give exactly one of --frame or --features".into())),
    };
    print_json(&out)
}

fn cmd_music(g: &GlobalArgs, a: &MusicArgs) -> Result<()> {
    let cfg = dataset_config(g)?;
    let array = cfg.array.build()?;
    match (&a.frame, &a.data) {
        (Some(p), None) => {
            let frame = read_frame(p)?;
            let stack = stack_covariances(&frame, cfg.frame.window_length, cfg.frame.windows)?;
            let r = covariance_from_features(&aoa_core::covariance::serialize_features(&stack)?.values)?;
            let spectrum = music_spectrum(&r, a.sources, &default_grid(), &array)?;
            let est = estimate_from_spectrum(&spectrum);
            if let Some(out) = &g.out {
                std::fs::create_dir_all(out)?;
                let mut w = BufWriter::new(File::create(out.join("spectrum.csv"))?);
                writeln!(w, "angle_deg,power_db")?;
                for (t, p) in spectrum.grid.iter().zip(&spectrum.power) {
                    writeln!(w, "{t},{:.6}", 10.0 * p.log10())?;
                }
                w.flush()?;
            }
            #[derive(Serialize)]
            struct Out {
                angles_deg: Vec<f64>,
                ambiguous: bool,
            }
            print_json(&Out {
                angles_deg: est.angles_deg,
                ambiguous: est.ambiguous,
            })
        }
        (None, Some(d)) => {
            let (_, records) = open_dataset(d)?;
            let recs = split_records(&records, &a.split)?;
            let evals = music_eval_records(&recs, &array)?;
            let rep = report("music", &evals)?;
            print!("{rep}");
            if let Some(out) = &g.out {
                std::fs::create_dir_all(out)?;
                let ids: Vec<u64> = recs.iter().map(|r| r.id).collect();
                write_eval_csv(BufWriter::new(File::create(out.join("music_eval.csv"))?), &ids, &evals)?;
                write_json(&out.join("music_report.json"), &rep)?;
            }
            Ok(())
        }
        _ => Err(PipelineError::Usage("give exactly one of --frame or --data".into())),
    }
}

fn cmd_bench(g: &GlobalArgs, a: &BenchArgs) -> Result<()> {
    let predictor = match &a.model {
        Some(p) => load_model(p)?,
        None => untrained_predictor(a.arch.name(), g.seed.unwrap_or(1))?,
    };
    let rep = bench_predictor(&predictor, a.runs, g.seed.unwrap_or(0))?;
    println!("{rep}");
    if let Some(out) = &g.out {
        std::fs::create_dir_all(out)?;
        write_json(&out.join(format!("bench_{}.json", rep.model)), &rep)?;
    }
    Ok(())
}

fn cmd_plot(g: &GlobalArgs, a: &PlotArgs) -> Result<()> {
    let out = require_out(g)?;
    match &a.kind {
        PlotKind::ArrayFactor { steer, step } => {
            let cfg = dataset_config(g)?;
            let grid = angle_grid(-90.0, 90.0, *step);
            let af = array_factor(*steer, &grid, &cfg.array.build()?)?;
            let path = out.join("array_factor.csv");
            let mut w = BufWriter::new(File::create(&path)?);
            writeln!(w, "angle_deg,gain_db")?;
            for (t, v) in grid.iter().zip(&af) {
                writeln!(w, "{t},{v:.6}")?;
            }
            w.flush()?;
            println!("{}", path.display());
        }
        PlotKind::Cdf {
            model,
            data,
            split,
            sources,
            max,
            step,
        } => {
            let predictor = load_model(model)?;
            let (_, records) = open_dataset(data)?;
            let mut recs = split_records(&records, split)?;
            if let Some(l) = sources {
                recs.retain(|r| r.meta.angles_deg.len() == *l);
            }
            if recs.is_empty() {
                return Err(PipelineError::Data("no records match".into()));
            }
            let evals = nn_eval_records(&predictor, &recs)?;
            let path = out.join("cdf.csv");
            write_cdf_csv(BufWriter::new(File::create(&path)?), &evals, *max, *step)?;
            println!("{}", path.display());
        }
        PlotKind::SnrSweep {
            model,
            levels,
            angle_step,
            frames_per_angle,
            no_music,
        } => {
            if model.is_none() && *no_music {
                return Err(PipelineError::Usage("nothing to sweep: give --model or drop --no-music".into()));
            }
            let cfg = dataset_config(g)?;
            let predictor = model.as_deref().map(load_model).transpose()?;
            let template = SweepSetConfig {
                snr_db: 0.0,
                angle_step_deg: *angle_step,
                frames_per_angle: *frames_per_angle,
                pair_ratio: 1.0,
                seed: g.seed.unwrap_or(cfg.seed ^ 0x7377_6565_70),
            };
            let rows = compare_sweep(&cfg, predictor.as_ref(), !no_music, levels, &template)?;
            let path = out.join("snr_sweep.csv");
            write_sweep_csv(BufWriter::new(File::create(&path)?), &rows)?;
            write_sweep_csv(std::io::stdout().lock(), &rows)?;
        }
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(g, a),
        Command::BuildDataset(a) => cmd_build(g, a),
        Command::Train(a) => cmd_train(g, a),
        Command::Eval(a) => cmd_eval(g, a),
        Command::Infer(a) => cmd_infer(g, a),
        Command::Music(a) => cmd_music(g, a),
        Command::Bench(a) => cmd_bench(g, a),
        Command::Plot(a) => cmd_plot(g, a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn parses_negative_lists() {
        let cli = Cli::try_parse_from(["aoa", "simulate", "--angles", "-20,35", "--snr", "-5", "--out", "x"]).unwrap();
        match cli.command {
            Command::Simulate(a) => {
                assert_eq!(a.angles, vec![-20.0, 35.0]);
                assert_eq!(a.snr, Some(-5.0));
            }
            _ => panic!(),
        }
    }

    #[test]
    fn epochs_override() {
        let cli = Cli::try_parse_from(["aoa", "--seed", "3", "train", "--data", "d", "--epochs", "2,1"]).unwrap();
        let Command::Train(a) = &cli.command else { panic!() };
        let cfg = train_config(&cli.global, a).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.stages.iter().map(|s| s.epochs).collect::<Vec<_>>(), vec![2, 1]);
        let bad = Cli::try_parse_from(["aoa", "train", "--data", "d", "--epochs", "2"]).unwrap();
        let Command::Train(a) = &bad.command else { panic!() };
        assert_eq!(train_config(&bad.global, a).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn lock_is_exclusive_and_released() {
        let dir = tempfile::tempdir().unwrap();
        let ckpt = dir.path().join(CHECKPOINT_FILE);
        let l = TrainLock::acquire(&ckpt).unwrap();
        assert!(TrainLock::acquire(&ckpt).is_err());
        drop(l);
        assert!(TrainLock::acquire(&ckpt).is_ok());
    }
}
