mod common;

use approx::assert_relative_eq;
use ndarray::Array2;
use num_complex::Complex64 as C;
use rand::Rng;

use common::{disc_map, rel_err, CylinderOracle};
use mwtomo::config::ExperimentConfig;
use mwtomo::forward::{add_awgn, dense_mom_solve, ForwardModel, ScatteringMatrix};
use mwtomo::medium::contrast_of;
use mwtomo::rng;
use mwtomo::{ContrastMap, Grid};

fn config(n: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.grid.n = n;
    c
}

#[test]
fn oracle_incident_series_matches_closed_form() {
    let cfg = config(32);
    let model = ForwardModel::new(&cfg).unwrap();
    let oracle = CylinderOracle::new(&cfg, 0.03, 40.0, 1.0, 60);
    let tx = cfg.array.position(3);
    for (r, c) in [(5, 7), (16, 16), (20, 11)] {
        let p = cfg.grid.cell_center(r, c);
        let series = oracle.incident(tx, p);
        let direct = model.incident(3).values[[r, c]];
        assert!((series - direct).norm() <= 1e-8 * direct.norm(), "{series} vs {direct}");
    }
}

#[test]
fn disc_matches_cylinder_series() {
    let cfg = config(48);
    let map = disc_map(&cfg, 0.03, 40.0, 1.0);
    let chi = contrast_of(&map, &cfg.background, cfg.frequency).unwrap();
    let model = ForwardModel::new(&cfg).unwrap();
    let s = model.scattering_matrix_tol(&chi, 1e-8).unwrap();
    let oracle = CylinderOracle::new(&cfg, 0.03, 40.0, 1.0, 60);
    let pos = cfg.array.positions();
    let mut num = Vec::new();
    let mut reference = Vec::new();
    for v in 0..pos.len() {
        for r in 0..pos.len() {
            num.push(s.values[[v, r]]);
            reference.push(oracle.scattered(pos[v], pos[r]));
        }
    }
    let err = rel_err(&num, &reference);
    assert!(err < 0.03, "scattered-field error {err}");
}

#[test]
fn dense_and_fft_solvers_agree() {
    let cfg = config(12);
    let model = ForwardModel::new(&cfg).unwrap();
    let mut rng = rng::stream(5, &[1]);
    let grid = cfg.grid;
    let chi = Array2::from_shape_fn(grid.shape(), |_| {
        C::new(rng.random_range(0.0..1.0), -rng.random_range(0.0..0.5))
    });
    let chi = ContrastMap::new(grid, chi).unwrap();
    let dense = dense_mom_solve(&model, &chi, model.incident(0)).unwrap();
    let (fast, _) = model.solve_total_field(&chi, model.incident(0), 1e-10).unwrap();
    assert!(rel_err(fast.flat(), dense.flat()) < 1e-7);
}

#[test]
fn zero_contrast_scatters_nothing() {
    let cfg = config(16);
    let model = ForwardModel::new(&cfg).unwrap();
    let s = model.scattering_matrix(&ContrastMap::zeros(cfg.grid)).unwrap();
    assert_eq!(s.norm(), 0.0);
}

#[test]
fn scattering_matrix_is_reciprocal() {
    let cfg = config(24);
    let map = disc_map(&cfg, 0.04, 30.0, 0.5);
    let mut map = map;
    // break the symmetry of the disc
    map.eps_r[[4, 9]] = 50.0;
    map.eps_r[[18, 6]] = 15.0;
    let chi = contrast_of(&map, &cfg.background, cfg.frequency).unwrap();
    let s = ForwardModel::new(&cfg).unwrap().scattering_matrix_tol(&chi, 1e-8).unwrap();
    let t = s.values.t().to_owned();
    let diff = (&s.values - &t).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    assert!(diff / s.norm() < 1e-3);
}

#[test]
fn awgn_hits_requested_snr() {
    let values = Array2::from_shape_fn((10, 10), |(i, j)| C::new(i as f64 + 1.0, j as f64 - 4.5));
    let s = ScatteringMatrix {
        values,
        frequency: 1e9,
        fingerprint: [0; 32],
    };
    let mut noise_power = 0.0;
    let trials = 200;
    for t in 0..trials {
        let n = add_awgn(&s, 10.0, &mut rng::stream(9, &[t])).unwrap();
        noise_power += (&n.values - &s.values).iter().map(|z| z.norm_sqr()).sum::<f64>() / 100.0;
    }
    let snr = 10.0 * (s.mean_power() / (noise_power / trials as f64)).log10();
    assert_relative_eq!(snr, 10.0, epsilon = 0.2);
    assert_eq!(add_awgn(&s, f64::INFINITY, &mut rng::stream(1, &[])).unwrap(), s);
}

#[test]
fn rejects_mismatched_grid() {
    let cfg = config(16);
    let model = ForwardModel::new(&cfg).unwrap();
    let other = ContrastMap::zeros(Grid::new(0.15, 20).unwrap());
    assert!(model.scattering_matrix(&other).is_err());
}
