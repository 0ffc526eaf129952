mod common;

use ndarray::Array2;
use num_complex::Complex64 as C;

use common::disc_map;
use mwtomo::config::ExperimentConfig;
use mwtomo::forward::{ForwardModel, ScatteringMatrix};
use mwtomo::inversion::{born_invert, csi_invert, dbim_invert, CsiConfig, DbimConfig};
use mwtomo::medium::contrast_of;
use mwtomo::metrics::relative_rms;
use mwtomo::{DielectricMap, ErrorKind};

fn setup(n: usize) -> (ExperimentConfig, ForwardModel, DielectricMap, ScatteringMatrix) {
    let mut cfg = ExperimentConfig::default();
    cfg.grid.n = n;
    let bg = cfg.background;
    let truth = disc_map(&cfg, 0.03, 1.05 * bg.eps_r, 1.05 * bg.sigma);
    let model = ForwardModel::new(&cfg).unwrap();
    let chi = contrast_of(&truth, &bg, cfg.frequency).unwrap();
    let s = model.scattering_matrix(&chi).unwrap();
    (cfg, model, truth, s)
}

fn non_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12))
}

#[test]
fn zero_data_returns_the_background() {
    let (cfg, model, _, s) = setup(16);
    let zero = ScatteringMatrix {
        values: Array2::from_elem(s.values.dim(), C::new(0.0, 0.0)),
        ..s
    };
    let bg = DielectricMap::uniform(cfg.grid, &cfg.background);
    let dbim = DbimConfig::default();
    assert_eq!(born_invert(&model, &zero, &dbim).unwrap().estimate, bg);
    assert_eq!(dbim_invert(&model, &zero, &dbim).unwrap().estimate, bg);
    assert_eq!(csi_invert(&model, &zero, &CsiConfig::default()).unwrap().estimate, bg);
}

#[test]
fn weak_disc_is_recovered_with_monotone_histories() {
    let (_, model, truth, s) = setup(16);
    let dbim = dbim_invert(&model, &s, &DbimConfig::default()).unwrap();
    assert!(non_increasing(&dbim.residuals), "{:?}", dbim.residuals);
    assert!(dbim.residuals.last().unwrap() < &0.05);
    assert!(relative_rms(&dbim.estimate, &truth).unwrap() < 0.02);

    let cfg = CsiConfig {
        iterations: 64,
        ..CsiConfig::default()
    };
    let csi = csi_invert(&model, &s, &cfg).unwrap();
    assert_eq!(csi.functional.len(), csi.residuals.len());
    assert!(non_increasing(&csi.functional), "{:?}", csi.functional);
    assert!(csi.functional.last().unwrap() < &(0.1 * csi.functional[0]));
    assert!(relative_rms(&csi.estimate, &truth).unwrap() < 0.02);

    let born = born_invert(&model, &s, &DbimConfig::default()).unwrap();
    assert_eq!(born.iterations, 1);
    assert!(relative_rms(&born.estimate, &truth).unwrap() < 0.02);
}

#[test]
fn data_from_another_setup_is_rejected() {
    let (_, model, _, s) = setup(16);
    let wrong = ScatteringMatrix {
        values: Array2::from_elem((4, 4), C::new(1.0, 0.0)),
        ..s.clone()
    };
    let err = dbim_invert(&model, &wrong, &DbimConfig::default()).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Usage);
    let other = ScatteringMatrix {
        fingerprint: [1; 32],
        ..s
    };
    assert!(csi_invert(&model, &other, &CsiConfig::default()).is_err());
}
