//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the lines are printed in
//! order without output capture. Set `AOA_ACCEPTANCE_DIR` to keep the
//! generated dataset, checkpoint and CSV artifacts, and
//! `AOA_ACCEPTANCE_ONLY=1,3,4` to run a subset.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use aoa_core::array::DEFAULT_CARRIER_HZ;
use aoa_core::augment::{phase_shift, superimpose, PHASE_SHIFTS_DEG};
use aoa_core::covariance::{
    frobenius, hermitian_defect, reconstruct_block, relative_frobenius, serialize_block, stack_covariances, trace,
    CMatrix, Detector, BLOCK_LEN,
};
use aoa_core::metrics::{penalized_mae, penalized_rmse, EvalRecord};
use aoa_core::music::{eigendecompose_hermitian, estimate_aoa_music};
use aoa_core::signal::{add_noise_power, db_to_linear, derive_seed, synthesize_frame, Baseband, IqFrame, SourceSpec};
use aoa_core::ArrayConfig;
use aoa_nn::checkpoint;
use aoa_nn::gradcheck::{check_layer, check_network, random_tensor};
use aoa_nn::layers::{BatchNorm, Conv2d, Dense, Layer, Mode};
use aoa_nn::network::{ModelSpec, Network};
use aoa_nn::{Predictor, TrainConfig};
use aoa_pipeline::bench::{bench_predictor, untrained_predictor};
use aoa_pipeline::dataset::{build_dataset, open_dataset, to_train_data, DatasetManifest, Record, Split, SweepSetConfig};
use aoa_pipeline::evaluate::{compare_sweep, nn_eval_records, report};
use aoa_pipeline::DatasetConfig;
use ndarray::{Array2, Ix2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn array() -> ArrayConfig {
    ArrayConfig::with_carrier(4, 0.2, DEFAULT_CARRIER_HZ).unwrap()
}

fn work_dir() -> &'static Path {
    static DIR: OnceLock<(Option<tempfile::TempDir>, PathBuf)> = OnceLock::new();
    let (_, p) = DIR.get_or_init(|| match std::env::var_os("AOA_ACCEPTANCE_DIR") {
        Some(d) => {
            let p = PathBuf::from(d);
            std::fs::create_dir_all(&p).unwrap();
            (None, p)
        }
        None => {
            let t = tempfile::tempdir().unwrap();
            let p = t.path().to_path_buf();
            (Some(t), p)
        }
    });
    p
}

/// Default dataset design at 9 raw frames per (scenario, angle): 20,250 records.
fn dataset_config() -> DatasetConfig {
    DatasetConfig {
        frames_per_angle: 9,
        ..DatasetConfig::default()
    }
}

struct Built {
    manifest: DatasetManifest,
    records: Vec<Record>,
    seconds: f64,
}

fn dataset() -> &'static Built {
    static DS: OnceLock<Built> = OnceLock::new();
    DS.get_or_init(|| {
        let dir = work_dir().join("dataset");
        let t = Instant::now();
        build_dataset(&dataset_config(), &dir).unwrap();
        let seconds = t.elapsed().as_secs_f64();
        let (manifest, records) = open_dataset(&dir).unwrap();
        Built {
            manifest,
            records,
            seconds,
        }
    })
}

struct Trained {
    predictor: Predictor,
    seconds: f64,
}

fn trained_fc() -> &'static Trained {
    static M: OnceLock<Trained> = OnceLock::new();
    M.get_or_init(|| {
        let ds = dataset();
        let cfg = TrainConfig::default();
        let train = to_train_data(ds.records.iter().filter(|r| r.split == Split::Train), &ds.manifest.scaler).unwrap();
        let val =
            to_train_data(ds.records.iter().filter(|r| r.split == Split::Validation), &ds.manifest.scaler).unwrap();
        let mut net = Network::<f32>::new(ModelSpec::fc(), cfg.seed).unwrap();
        let t = Instant::now();
        aoa_nn::train(&mut net, &train, Some(&val), &cfg, |e| {
            if e.epoch % 10 == 0 || e.epoch == cfg.total_epochs() {
                eprintln!(
                    "    epoch {:>2}: loss {:.5} val_acc {:.4} val_mae {:.3}",
                    e.epoch,
                    e.loss.total,
                    e.val_acc.unwrap_or(f64::NAN),
                    e.val_mae.unwrap_or(f64::NAN)
                );
            }
        })
        .unwrap();
        let seconds = t.elapsed().as_secs_f64();
        let predictor = Predictor::new(net, ds.manifest.scaler.clone()).unwrap();
        checkpoint::save(&predictor, work_dir().join("fc.ckpt")).unwrap();
        Trained { predictor, seconds }
    })
}

fn random_frame(rng: &mut ChaCha8Rng, cfg: &ArrayConfig, len: usize) -> IqFrame {
    let n_src = rng.random_range(0..=2usize);
    let sources: Vec<SourceSpec> = (0..n_src)
        .map(|k| {
            let bb = match rng.random_range(0..3) {
                0 => Baseband::LinearChirp {
                    sweep_hz: rng.random_range(1e3..1e5),
                },
                1 => Baseband::RandomQpsk {
                    symbol_rate: rng.random_range(1e4..2e5),
                },
                _ => Baseband::ComplexTone {
                    offset_hz: rng.random_range(-5e4..5e4),
                },
            };
            SourceSpec::new(-74.0 + 148.0 * rng.random::<f64>() + k as f64 * 1e-3, bb)
                .with_power(rng.random_range(0.1..10.0))
                .with_seed(rng.random())
        })
        .collect();
    let snr = if n_src == 0 || rng.random_bool(0.8) {
        Some(rng.random_range(-10.0..30.0))
    } else {
        None
    };
    synthesize_frame(&sources, cfg, len, 1e6, snr, rng.random()).unwrap()
}

fn c1_covariance() -> Outcome {
    let cfg = array();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut herm, mut psd, mut quad) = (0.0f64, 0.0f64, 0.0f64);
    let frames = 1000;
    let mut matrices = 0;
    for _ in 0..frames {
        let frame = random_frame(&mut rng, &cfg, 8 * 1024);
        let c = Complex64::from_polar(rng.random_range(0.1..10.0), rng.random_range(0.0..6.3));
        let mut scaled = frame.clone();
        scaled.samples.mapv_inplace(|z| z * c);
        let a = stack_covariances(&frame, 1024, 8).unwrap();
        let b = stack_covariances(&scaled, 1024, 8).unwrap();
        for (r, rs) in a.matrices.iter().zip(&b.matrices) {
            herm = herm.max(hermitian_defect(r) / frobenius(r));
            let lmin = eigendecompose_hermitian(r).unwrap().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
            psd = psd.max(-lmin / trace(r));
            let expect = r.mapv(|z| z * c.norm_sqr());
            quad = quad.max(relative_frobenius(rs, &expect));
            matrices += 1;
        }
    }
    check(
        herm < 1e-12 && psd <= 1e-9 && quad < 1e-12,
        format!(
            "{frames} frames / {matrices} matrices: max |R-R^H|/||R|| {herm:.1e}, max -lambda_min/tr {psd:.1e}, scale-quadratic rel err {quad:.1e}"
        ),
    )
}

fn c2_features() -> Outcome {
    let ds = dataset();
    let mut worst_norm = 0.0f64;
    let mut bad_len = 0;
    for r in &ds.records {
        if r.features.len() != 128 {
            bad_len += 1;
            continue;
        }
        for b in r.features.chunks(BLOCK_LEN) {
            worst_norm = worst_norm.max((b.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs());
        }
    }
    let cfg = array();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst_rt = 0.0f64;
    for _ in 0..200 {
        let frame = random_frame(&mut rng, &cfg, 8 * 1024);
        for r in stack_covariances(&frame, 1024, 8).unwrap().matrices {
            let raw = serialize_block(&r).unwrap();
            let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
            let unit: Vec<f64> = raw.iter().map(|v| v / norm).collect();
            let back: CMatrix = reconstruct_block(&unit).unwrap().mapv(|z| z * norm);
            worst_rt = worst_rt.max(relative_frobenius(&back, &r));
        }
    }
    check(
        bad_len == 0 && worst_norm <= 1e-9 && worst_rt < 1e-12,
        format!(
            "{} records, {bad_len} with length != 128, max |block norm - 1| {worst_norm:.1e}, reconstruction rel err {worst_rt:.1e}",
            ds.records.len()
        ),
    )
}

fn c3_music() -> Outcome {
    let cfg = array();
    let mut worst = 0.0f64;
    let mut worst_at = 0.0;
    for deg in -44..=44 {
        let theta = deg as f64;
        let src = SourceSpec::new(theta, Baseband::LinearChirp { sweep_hz: 2e4 }).with_seed((deg + 100) as u64);
        let frame = synthesize_frame(&[src], &cfg, 32768, 1e6, None, 1).unwrap();
        let r = stack_covariances(&frame, 4096, 8).unwrap().mean().unwrap();
        let est = estimate_aoa_music(&r, 1, &cfg).unwrap();
        let err = (est.angles_deg[0] - theta).abs();
        if err > worst {
            worst = err;
            worst_at = theta;
        }
    }
    check(worst <= 0.2, format!("89 angles in [-44, 44], max |error| {worst:.4} deg at {worst_at} deg"))
}

fn c4_augmentation() -> Outcome {
    let cfg = array();
    let bb = Baseband::LinearChirp { sweep_hz: 2e4 };
    let mut worst = 0.0f64;
    let mut cases = 0;
    for base in (-70..=70).step_by(10) {
        let theta = base as f64;
        let src = SourceSpec::new(theta, bb).with_seed((base + 100) as u64);
        let frame = synthesize_frame(&[src], &cfg, 32768, 1e6, None, 3).unwrap();
        for phi in PHASE_SHIFTS_DEG {
            let shifted = phase_shift(&frame, theta, phi, &cfg).unwrap();
            let direct_src = SourceSpec::new(theta + phi, bb).with_seed((base + 100) as u64);
            let direct = synthesize_frame(&[direct_src], &cfg, 32768, 1e6, None, 3).unwrap();
            let a = stack_covariances(&shifted, 4096, 8).unwrap().mean().unwrap();
            let b = stack_covariances(&direct, 4096, 8).unwrap().mean().unwrap();
            worst = worst.max(relative_frobenius(&a, &b));
            cases += 1;
        }
    }
    // Monte-Carlo over the carrier phase of a coherent pair (same waveform).
    let fa = synthesize_frame(&[SourceSpec::new(-20.0, bb).with_seed(9)], &cfg, 32768, 1e6, None, 9).unwrap();
    let fb = synthesize_frame(&[SourceSpec::new(35.0, bb).with_seed(9).with_power(0.7)], &cfg, 32768, 1e6, None, 9)
        .unwrap();
    let cov = |f: &IqFrame| stack_covariances(f, 4096, 8).unwrap().mean().unwrap();
    let target = cov(&fa) + cov(&fb);
    let draws = 200;
    let mut acc = CMatrix::zeros((4, 4));
    for k in 0..draws {
        acc += &cov(&superimpose(&fa, -20.0, &fb, 35.0, derive_seed(404, k)).unwrap().frame);
    }
    let mc = relative_frobenius(&acc.mapv(|z| z / draws as f64), &target);
    check(
        worst < 1e-6 && mc < 0.05,
        format!("{cases} (theta, phi) cases: max rel Frobenius {worst:.1e}; superposition mean over {draws} draws vs R1+R2: {:.2}%", 100.0 * mc),
    )
}

fn c5_gradients() -> Outcome {
    const H: f64 = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut bn = BatchNorm::<f64>::new(3);
    bn.gamma = ndarray::arr1(&[0.7, 1.3, -0.4]);
    bn.beta = ndarray::arr1(&[0.1, -0.2, 0.3]);
    let layers: Vec<(Layer<f64>, Vec<usize>, Mode)> = vec![
        (Layer::Dense(Dense::init(6, 5, &mut rng)), vec![4, 6], Mode::Train),
        (Layer::Relu, vec![4, 7], Mode::Train),
        (Layer::Dropout { rate: 0.2 }, vec![4, 7], Mode::Train),
        (Layer::Conv2d(Conv2d::init(2, 3, 3, &mut rng)), vec![4, 4, 4, 2], Mode::Train),
        (Layer::BatchNorm(bn.clone()), vec![4, 2, 2, 3], Mode::Train),
        (Layer::BatchNorm(bn), vec![4, 3], Mode::Eval),
        (Layer::MaxPool { size: 2 }, vec![4, 4, 4, 2], Mode::Train),
        (Layer::Sigmoid, vec![4, 5], Mode::Train),
        (Layer::Flatten, vec![4, 2, 2, 3], Mode::Train),
        (Layer::ToImage { side: 2, channels: 3 }, vec![4, 12], Mode::Train),
    ];
    let mut worst_layer = (0.0f64, String::new());
    for (i, (layer, shape, mode)) in layers.iter().enumerate() {
        let r = check_layer(layer, &random_tensor(shape, 100 + i as u64), *mode, 7, H).unwrap();
        if r.max_rel_error >= worst_layer.0 {
            worst_layer = (r.max_rel_error, layer.kind().to_string());
        }
    }
    let mut targets = random_tensor(&[4, 3], 4).into_dimensionality::<Ix2>().unwrap().mapv(|v| (v + 1.0) / 2.0);
    for (i, mut row) in targets.rows_mut().into_iter().enumerate() {
        row[0] = (i % 2) as f64;
    }
    let x: Array2<f64> = random_tensor(&[4, 128], 3).into_dimensionality().unwrap();
    let mut nets = Vec::new();
    for (spec, seed) in [(ModelSpec::fc(), 5), (ModelSpec::cnn(), 6)] {
        let net = Network::<f64>::new(spec, seed).unwrap();
        let r = check_network(&net, &x, &targets, [0.1, 1.0, 1.0], 9, H, 12).unwrap();
        nets.push((net.spec.name.clone(), r.max_rel_error, r.checked, r.kinks));
    }
    let ok = worst_layer.0 < 1e-4 && nets.iter().all(|n| n.1 < 1e-4 && n.3 * 10 <= n.2);
    check(
        ok,
        format!(
            "{} layer kinds, worst {:.1e} ({}); {}",
            layers.len(),
            worst_layer.0,
            worst_layer.1,
            nets.iter()
                .map(|(n, e, c, k)| format!("{n}: {e:.1e} over {c} params ({k} at kinks)"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    )
}

fn c6_shapes() -> Outcome {
    let b = 3;
    let x = Array2::<f32>::zeros((b, 128));
    let shapes = |spec: ModelSpec| -> Vec<(String, Vec<usize>)> {
        let net = Network::<f32>::new(spec, 1).unwrap();
        let pass = net.forward(x.view(), Mode::Eval, 0).unwrap();
        let mut out: Vec<(String, Vec<usize>)> = net
            .layers
            .iter()
            .zip(&pass.shapes)
            .filter(|(l, _)| matches!(l, Layer::Dense(_) | Layer::Conv2d(_) | Layer::MaxPool { .. } | Layer::ToImage { .. } | Layer::Flatten))
            .map(|(l, s)| (l.kind().to_string(), s.clone()))
            .collect();
        out.push(("output".into(), pass.outputs.shape().to_vec()));
        out
    };
    let fc = shapes(ModelSpec::fc());
    let cnn = shapes(ModelSpec::cnn());
    let dims = |v: &[(String, Vec<usize>)]| v.iter().map(|s| s.1.clone()).collect::<Vec<_>>();
    let fc_want = vec![vec![b, 1024], vec![b, 2048], vec![b, 1024], vec![b, 512], vec![b, 3]];
    let cnn_want = vec![
        vec![b, 4, 4, 8],
        vec![b, 2, 2, 512],
        vec![b, 1, 1, 512],
        vec![b, 512],
        vec![b, 1024],
        vec![b, 1024],
        vec![b, 512],
        vec![b, 3],
    ];
    check(
        dims(&fc) == fc_want && dims(&cnn) == cnn_want,
        format!("FC {:?}; CNN {:?}", dims(&fc), dims(&cnn)),
    )
}

fn c7_training() -> Outcome {
    let ds = dataset();
    let m = trained_fc();
    let total = ds.manifest.counts.total();
    let test: Vec<&Record> = ds.records.iter().filter(|r| r.split == Split::Test).collect();
    let evals = nn_eval_records(&m.predictor, &test).unwrap();
    let rep = report("fc", &evals).unwrap();
    std::fs::write(work_dir().join("fc_test_report.txt"), rep.to_string()).unwrap();
    let acc = rep.overall.accuracy;
    let mae = penalized_mae(&evals).unwrap();
    let balanced = (0.45..=0.55).contains(&total.two_fraction());
    check(
        ds.records.len() >= 20_000 && balanced && acc >= 0.99 && mae <= 3.0 && m.seconds < 3600.0,
        format!(
            "{} records ({:.1}% two-source, built in {:.0}s), training {:.1} min; test n={} accuracy {:.4}, penalized MAE {:.3} deg (L=1 {:.3}, L=2 {:.3})",
            ds.records.len(),
            100.0 * total.two_fraction(),
            ds.seconds,
            m.seconds / 60.0,
            test.len(),
            acc,
            mae,
            rep.overall.single.as_ref().map_or(f64::NAN, |s| s.mae),
            rep.overall.two.as_ref().map_or(f64::NAN, |s| s.mae),
        ),
    )
}

fn c8_degradation() -> Outcome {
    let m = trained_fc();
    let levels = [-10.0, -5.0, 0.0, 5.0];
    let template = SweepSetConfig {
        snr_db: 0.0,
        angle_step_deg: 1.0,
        frames_per_angle: 2,
        pair_ratio: 1.0,
        seed: 0x5eed_0008,
    };
    let rows = compare_sweep(&dataset_config(), Some(&m.predictor), true, &levels, &template).unwrap();
    let mut csv = Vec::new();
    aoa_pipeline::evaluate::write_sweep_csv(&mut csv, &rows).unwrap();
    std::fs::write(work_dir().join("snr_sweep.csv"), csv).unwrap();
    let nn: Vec<f64> = rows.iter().map(|r| r.nn.unwrap().rmse).collect();
    let music: Vec<f64> = rows.iter().map(|r| r.music.unwrap().rmse).collect();
    let at0 = levels.iter().position(|&l| l == 0.0).unwrap();
    let monotone = nn.windows(2).all(|w| w[1] <= 1.1 * w[0]);
    check(
        nn[at0] < music[at0] && monotone,
        format!(
            "{} records per level; RMSE by SNR {:?}: NN {:?}, MUSIC(true L) {:?}",
            rows[0].nn.unwrap().count,
            levels,
            nn.iter().map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
            music.iter().map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        ),
    )
}

fn c9_detection() -> Outcome {
    let cfg = array();
    let (wlen, windows, len) = (4096, 8, 32768);
    let noise_power = 1.0;
    let det = Detector::for_noise_floor(noise_power, wlen, windows);
    let n = 10_000u64;
    let false_alarms: usize = (0..n)
        .into_par_iter()
        .map(|i| {
            let f = synthesize_frame(&[], &cfg, len, 1e6, Some(0.0), derive_seed(909, i)).unwrap();
            det.detect_stack(&stack_covariances(&f, wlen, windows).unwrap()).unwrap() as usize
        })
        .sum();
    let misses: usize = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(919, i));
            let snr = rng.random_range(0.0..20.0);
            let n_src = rng.random_range(1..=2usize);
            let sources: Vec<SourceSpec> = (0..n_src)
                .map(|k| {
                    let bb = if k == 0 {
                        Baseband::LinearChirp { sweep_hz: 2e4 }
                    } else {
                        Baseband::RandomQpsk { symbol_rate: 1.25e5 }
                    };
                    SourceSpec::new(rng.random_range(-74.0..74.0), bb)
                        .with_power(db_to_linear(snr) / n_src as f64)
                        .with_seed(rng.random())
                })
                .collect();
            let mut f = synthesize_frame(&sources, &cfg, len, 1e6, None, rng.random()).unwrap();
            add_noise_power(&mut f, noise_power, rng.random());
            (!det.detect_stack(&stack_covariances(&f, wlen, windows).unwrap()).unwrap()) as usize
        })
        .sum();
    let (fa, md) = (false_alarms as f64 / n as f64, misses as f64 / n as f64);
    check(
        fa < 0.01 && md < 0.01,
        format!(
            "threshold {:.3e} (CFAR, sigma^2 = 1), false detections {false_alarms}/{n} ({:.2}%), misses {misses}/{n} ({:.2}%) at SNR in [0, 20) dB",
            det.magnitude_threshold,
            100.0 * fa,
            100.0 * md
        ),
    )
}

fn c10_latency() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for arch in ["fc", "cnn"] {
        let p = untrained_predictor(arch, 1).unwrap();
        let path = work_dir().join(format!("{arch}_bench.ckpt"));
        checkpoint::save(&p, &path).unwrap();
        let loaded = checkpoint::load(&path).unwrap();
        let rep = bench_predictor(&loaded, 1000, 10).unwrap();
        ok &= rep.mean_ms < 50.0;
        if arch == "cnn" {
            ok &= (rep.param_count as f64 - 2.14e6).abs() <= 0.05 * 2.14e6;
        }
        parts.push(format!("{arch}: {} params, mean {:.3} ms, p95 {:.3} ms", rep.param_count, rep.mean_ms, rep.p95_ms));
    }
    check(ok, format!("1000 runs each; {}", parts.join("; ")))
}

fn c11_metrics() -> Outcome {
    let rec = |tl: u8, t: &[f64], p: &[f64]| EvalRecord {
        true_l: tl,
        true_angles: t.to_vec(),
        pred_l: tl,
        pred_angles: p.to_vec(),
        snr_db: 0.0,
    };
    let perfect = [rec(1, &[10.0], &[10.0, 10.0]), rec(2, &[-10.0, 20.0], &[-10.0, 20.0])];
    let one = [rec(1, &[10.0], &[8.0, 14.0])];
    let two = [rec(2, &[-10.0, 20.0], &[-12.0, 23.0])];
    let got = [
        penalized_rmse(&perfect).unwrap(),
        penalized_mae(&perfect).unwrap(),
        penalized_mae(&one).unwrap(),
        penalized_rmse(&one).unwrap(),
        penalized_mae(&two).unwrap(),
        penalized_rmse(&two).unwrap(),
    ];
    let want = [0.0, 0.0, 1.0, 1.0, 5.0, 13f64.sqrt()];
    let err = got.iter().zip(&want).map(|(g, w)| (g - w).abs()).fold(0.0, f64::max);
    check(err <= 1e-12, format!("values {got:?}, max deviation {err:.1e}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("covariance correctness", c1_covariance),
        ("feature contract", c2_features),
        ("MUSIC oracle", c3_music),
        ("augmentation equivalence", c4_augmentation),
        ("gradient checks", c5_gradients),
        ("shape conformance", c6_shapes),
        ("desk-scale training", c7_training),
        ("degradation ordering", c8_degradation),
        ("detection gate", c9_detection),
        ("latency and CNN size", c10_latency),
        ("metric arithmetic", c11_metrics),
    ];
    let limits: [Option<f64>; 11] = [Some(10.0), None, Some(30.0), None, Some(60.0), None, None, None, None, None, None];
    // Only print the one-line summaries; failures are reported by the lines.
    std::panic::set_hook(Box::new(|_| {}));
    let only: Option<Vec<usize>> = std::env::var("AOA_ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let mut failed = 0;
    let mut skipped = 0;
    for (i, ((name, f), limit)) in criteria.iter().zip(limits).enumerate() {
        if only.as_ref().is_some_and(|o| !o.contains(&(i + 1))) {
            println!("SKIP criterion {:>2} ({name})", i + 1);
            skipped += 1;
            continue;
        }
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        let outcome = match (outcome, limit) {
            (Ok(d), Some(l)) if secs >= l => Err(format!("{d}; runtime {secs:.1}s exceeds {l}s")),
            (o, _) => o,
        };
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} criterion {:>2} ({name}): {detail} [{secs:.1}s]", i + 1);
    }
    println!("acceptance: {} passed, {failed} failed, {skipped} skipped", criteria.len() - failed - skipped);
    if failed > 0 {
        std::process::exit(1);
    }
}
