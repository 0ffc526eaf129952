use mwtomo::ann::{
    adam_step, infer, infer_batch, train, Activation, AdamState, MlpArchitecture, MlpModel, TrainConfig, TrainingData,
};
use mwtomo::forward::ScatteringMatrix;
use mwtomo::rng;
use mwtomo::{DielectricMap, ErrorKind, Grid};
use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng as _;

fn fd_check(activation: Activation) -> f64 {
    let arch = MlpArchitecture::new(10, vec![5], 3, activation).unwrap();
    let mut r = rng::stream(3, &[1]);
    let model = MlpModel::init(arch, &mut r).unwrap();
    let x = Array2::from_shape_fn((4, 10), |_| r.random_range(-1.0..1.0));
    let t = Array2::from_shape_fn((4, 3), |_| r.random_range(-1.0..1.0));
    let g = model.backward_batch(&x.view(), &t.view()).unwrap();
    let loss = |m: &MlpModel| m.backward_batch(&x.view(), &t.view()).unwrap().loss;
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..model.params.len() {
        let mut p = model.clone();
        p.params[i] += h;
        let up = loss(&p);
        p.params[i] -= 2.0 * h;
        let down = loss(&p);
        let fd = (up - down) / (2.0 * h);
        let err = (fd - g.grad[i]).abs() / fd.abs().max(g.grad[i].abs()).max(1e-6);
        worst = worst.max(err);
    }
    worst
}

#[test]
fn backprop_matches_finite_differences() {
    assert!(fd_check(Activation::Tanh) <= 1e-5);
    assert!(fd_check(Activation::Identity) <= 1e-5);
}

#[test]
fn adam_first_step_has_learning_rate_magnitude() {
    let lr = 1e-3;
    let grad = [0.5, -2.0, 0.25, 40.0];
    let mut params = [1.0, 1.0, 1.0, 1.0];
    let mut st = AdamState::new(4, lr);
    adam_step(&mut st, &grad, &mut params).unwrap();
    for (p, g) in params.iter().zip(grad) {
        let step = 1.0 - p;
        assert!((step.abs() - lr).abs() <= 1e-9, "{step}");
        assert_eq!(step.signum(), g.signum());
    }
    let before = params;
    assert_eq!(adam_step(&mut st, &[f64::NAN, 0.0, 0.0, 0.0], &mut params).unwrap_err().kind(), ErrorKind::Numerical);
    assert_eq!(params, before);
}

/// A toy inverse problem: the "measurement" is a fixed linear image of the map.
fn toy_data(n_samples: usize, seed: u64) -> TrainingData {
    let grid = Grid::new(0.15, 8).unwrap();
    let mut r = rng::stream(seed, &[0]);
    let mix = Array2::from_shape_fn((4, 4), |(i, j)| 1.0 + ((i * 4 + j) as f64).sin());
    let mut data = TrainingData::default();
    for id in 0..n_samples {
        let level = r.random_range(10.0..30.0);
        let cond = r.random_range(0.2..1.0);
        let eps = Array2::from_shape_fn((8, 8), |(i, j)| if i < 4 && j < 4 { level } else { 10.0 });
        let sigma = Array2::from_elem((8, 8), cond);
        let values = mix.mapv(|m| Complex64::new(m * level, m * cond));
        data.ids.push(id as u64);
        data.inputs.push(ScatteringMatrix {
            values,
            frequency: 1e9,
            fingerprint: [7; 32],
        });
        data.targets.push(DielectricMap::new(grid, eps, sigma).unwrap());
    }
    data
}

fn toy_config() -> TrainConfig {
    TrainConfig {
        hidden_layers: vec![16, 16],
        learning_rate: 1e-3,
        epochs: 40,
        batch_size: 8,
        snr_db: f64::INFINITY,
        ..TrainConfig::default()
    }
}

#[test]
fn training_is_deterministic_and_reduces_loss() {
    let tr = toy_data(48, 1);
    let va = toy_data(8, 2);
    let cfg = toy_config();
    let (a, ra) = train(&tr, &va, &cfg).unwrap();
    let (b, _) = train(&tr, &va, &cfg).unwrap();
    assert_eq!(a.params.iter().map(|p| p.to_bits()).collect::<Vec<_>>(), b.params.iter().map(|p| p.to_bits()).collect::<Vec<_>>());
    let first = ra.epochs[0].train_loss;
    let last = ra.epochs.last().unwrap().train_loss;
    assert!(last < 0.5 * first, "{first} -> {last}");
    assert_eq!(ra.epochs.len(), 40);

    let noisy = TrainConfig {
        snr_db: 20.0,
        ..cfg.clone()
    };
    let (c, _) = train(&tr, &va, &noisy).unwrap();
    let (d, _) = train(&tr, &va, &noisy).unwrap();
    assert_eq!(c.params, d.params);
    assert_ne!(c.params, a.params);
}

#[test]
fn model_files_round_trip_and_infer_identically() {
    let tr = toy_data(16, 3);
    let cfg = TrainConfig {
        epochs: 2,
        ..toy_config()
    };
    let (model, _) = train(&tr, &tr, &cfg).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("m.mwtm");
    model.save(&path).unwrap();
    let back = MlpModel::load(&path).unwrap();
    assert_eq!(model.params, back.params);
    assert_ne!(back.data_fingerprint, [0; 32]);
    assert_eq!(back.data_fingerprint, model.data_fingerprint);
    let grid = tr.targets[0].grid;
    let one = infer(&back, &tr.inputs[0], &grid).unwrap();
    let many = infer_batch(&model, &tr.inputs[..3], &grid).unwrap();
    assert_eq!(one.map, many[0].map);

    let mut bytes = std::fs::read(&path).unwrap();
    let k = bytes.len() / 2;
    bytes[k] ^= 0x10;
    std::fs::write(&path, bytes).unwrap();
    assert_eq!(MlpModel::load(&path).unwrap_err().kind(), ErrorKind::Integrity);
}

#[test]
fn mismatched_input_is_rejected() {
    let tr = toy_data(8, 4);
    let cfg = TrainConfig {
        epochs: 1,
        ..toy_config()
    };
    let (model, _) = train(&tr, &tr, &cfg).unwrap();
    let wrong = ScatteringMatrix {
        values: Array2::zeros((3, 3)),
        frequency: 1e9,
        fingerprint: [7; 32],
    };
    let err = infer(&model, &wrong, &tr.targets[0].grid).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Usage);
}
