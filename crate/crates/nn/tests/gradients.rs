use aoa_nn::gradcheck::{check_layer, check_network, random_tensor};
use aoa_nn::layers::{BatchNorm, Conv2d, Dense, Layer, LayerSpec, Mode};
use aoa_nn::network::{ModelSpec, Network};
use ndarray::{Array2, Ix2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-4;
const TOL: f64 = 1e-4;

fn targets(batch: usize, seed: u64) -> Array2<f64> {
    let r = random_tensor(&[batch, 3], seed).into_dimensionality::<Ix2>().unwrap();
    let mut t = r.mapv(|v| (v + 1.0) / 2.0);
    for (i, mut row) in t.rows_mut().into_iter().enumerate() {
        row[0] = (i % 2) as f64;
    }
    t
}

fn input(batch: usize, dim: usize, seed: u64) -> Array2<f64> {
    random_tensor(&[batch, dim], seed).into_dimensionality::<Ix2>().unwrap()
}

#[test]
fn each_layer_kind() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut bn = BatchNorm::<f64>::new(3);
    bn.gamma = ndarray::arr1(&[0.7, 1.3, -0.4]);
    bn.beta = ndarray::arr1(&[0.1, -0.2, 0.3]);
    let cases: Vec<(Layer<f64>, Vec<usize>, Mode)> = vec![
        (Layer::Dense(Dense::init(6, 5, &mut rng)), vec![4, 6], Mode::Train),
        (Layer::Relu, vec![4, 7], Mode::Train),
        (Layer::Dropout { rate: 0.3 }, vec![4, 7], Mode::Train),
        (Layer::Dropout { rate: 0.3 }, vec![4, 7], Mode::Eval),
        (Layer::Conv2d(Conv2d::init(2, 3, 3, &mut rng)), vec![4, 4, 4, 2], Mode::Train),
        (Layer::BatchNorm(bn.clone()), vec![4, 2, 2, 3], Mode::Train),
        (Layer::BatchNorm(bn), vec![4, 3], Mode::Eval),
        (Layer::MaxPool { size: 2 }, vec![4, 4, 4, 2], Mode::Train),
        (Layer::Sigmoid, vec![4, 5], Mode::Train),
        (Layer::Flatten, vec![4, 2, 2, 3], Mode::Train),
        (Layer::ToImage { side: 2, channels: 3 }, vec![4, 12], Mode::Train),
    ];
    for (i, (layer, shape, mode)) in cases.into_iter().enumerate() {
        let x = random_tensor(&shape, 100 + i as u64);
        let r = check_layer(&layer, &x, mode, 7, H).unwrap();
        assert!(r.max_rel_error < TOL, "{} ({mode:?}): {r:?}", layer.kind());
        assert!(r.checked > 0);
    }
}

#[test]
fn tiny_two_layer_net() {
    let spec = ModelSpec {
        name: "tiny".into(),
        input_dim: 6,
        trunk: vec![
            LayerSpec::Dense { units: 5 },
            LayerSpec::Relu,
            LayerSpec::Dense { units: 5 },
            LayerSpec::Relu,
        ],
    };
    let mut net = Network::<f64>::new(spec, 2).unwrap();
    // Zero biases put dead samples exactly on a ReLU kink.
    for (i, mut p) in net.params_mut().into_iter().enumerate().filter(|(_, p)| p.ndim() == 1) {
        let b = random_tensor(p.shape(), 50 + i as u64).mapv(|v| 0.1 * v);
        p.assign(&b);
    }
    let r = check_network(&net, &input(4, 6, 1), &targets(4, 2), [0.1, 1.0, 1.0], 3, H, usize::MAX).unwrap();
    assert_eq!((r.checked, r.kinks), (net.param_count(), 0));
    assert!(r.max_rel_error < TOL, "{r:?}");
}

#[test]
fn full_fc_architecture() {
    let net = Network::<f64>::new(ModelSpec::fc(), 5).unwrap();
    let r = check_network(&net, &input(4, 128, 3), &targets(4, 4), [0.1, 1.0, 1.0], 9, H, 12).unwrap();
    assert!(r.max_rel_error < TOL && r.kinks * 10 <= r.checked, "{r:?}");
}

#[test]
fn full_cnn_architecture() {
    let net = Network::<f64>::new(ModelSpec::cnn(), 6).unwrap();
    let r = check_network(&net, &input(4, 128, 5), &targets(4, 6), [0.1, 1.0, 1.0], 10, H, 12).unwrap();
    assert!(r.max_rel_error < TOL && r.kinks * 10 <= r.checked, "{r:?}");
}

#[test]
fn zero_upstream_gradient_gives_zero_grads() {
    let net = Network::<f64>::new(ModelSpec::cnn(), 1).unwrap();
    let x = input(4, 128, 1);
    let pass = net.forward(x.view(), Mode::Train, 0).unwrap();
    let grads = net.backward(&pass, &Array2::zeros((4, 3))).unwrap();
    assert!(grads.iter().all(|g| g.iter().all(|&v| v == 0.0)));
}

#[test]
fn fixed_dropout_seed_gives_identical_gradients() {
    let net = Network::<f64>::new(ModelSpec::fc(), 1).unwrap();
    let x = input(4, 128, 1);
    let g = Array2::from_elem((4, 3), 0.1);
    let run = |seed| {
        let pass = net.forward(x.view(), Mode::Train, seed).unwrap();
        net.backward(&pass, &g).unwrap()
    };
    assert_eq!(run(42), run(42));
    assert_ne!(run(42), run(43));
}

#[test]
fn inverted_dropout_expectation() {
    // Linear probe: mean over masks of a dense layer fed by dropout equals
    // the eval-mode output.
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let dense = Layer::Dense(Dense::<f64>::init(50, 1, &mut rng));
    let drop = Layer::<f64>::Dropout { rate: 0.2 };
    let x = random_tensor(&[1, 50], 8);
    let (eval, _, _) = dense.forward(x.clone(), Mode::Eval, &mut rng).unwrap();
    let trials = 20_000;
    let mut acc = 0.0;
    let mut sq = 0.0;
    for _ in 0..trials {
        let (d, _, _) = drop.forward(x.clone(), Mode::Train, &mut rng).unwrap();
        let (y, _, _) = dense.forward(d, Mode::Eval, &mut rng).unwrap();
        acc += y[[0, 0]];
        sq += y[[0, 0]] * y[[0, 0]];
    }
    let mean = acc / trials as f64;
    let se = ((sq / trials as f64 - mean * mean) / trials as f64).sqrt();
    assert!((mean - eval[[0, 0]]).abs() < 4.0 * se, "mean {mean} eval {} se {se}", eval[[0, 0]]);
}
