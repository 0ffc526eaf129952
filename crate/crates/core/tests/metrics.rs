use mwtomo::metrics::{image_set_spectrum, mean_squared_spectrum, minus3db_crossover, nmse, radial_average, relative_rms};
use mwtomo::rng;
use mwtomo::{BackgroundMedium, DielectricMap, Grid};
use ndarray::Array2;
use rand::Rng as _;
use rand_distr::StandardNormal;

fn noise_images(count: usize, n: usize, seed: u64) -> Vec<Array2<f64>> {
    let mut r = rng::stream(seed, &[0]);
    (0..count)
        .map(|_| Array2::from_shape_fn((n, n), |_| r.sample::<f64, _>(StandardNormal)))
        .collect()
}

#[test]
fn parseval_holds_for_the_spectrum_and_the_radial_bins() {
    let images = noise_images(3, 24, 1);
    let power = mean_squared_spectrum(&images).unwrap();
    let variance: f64 = images
        .iter()
        .map(|a| {
            let m = a.mean().unwrap();
            a.iter().map(|v| (v - m).powi(2)).sum::<f64>() / a.len() as f64
        })
        .sum::<f64>()
        / 3.0;
    assert!((power.sum() - variance).abs() <= 1e-9 * variance);
    let radial = radial_average(&power, 13, 3).unwrap();
    assert!((radial.total_power() - power.sum()).abs() <= 1e-9 * variance);
    assert!(radial.corner_power > 0.0);
}

#[test]
fn white_noise_is_flat() {
    let n = 32;
    let s = image_set_spectrum(&noise_images(500, n, 2)).unwrap();
    for (nu, v) in s.nu.iter().zip(&s.s).skip(1) {
        let db = 10.0 * (v * (n * n) as f64).log10();
        assert!(db.abs() <= 1.0, "nu {nu}: {db} dB");
    }
}

#[test]
fn crossover_of_a_spectrum_with_itself_is_nyquist() {
    let s = image_set_spectrum(&noise_images(4, 16, 3)).unwrap();
    assert_eq!(minus3db_crossover(&s, &s).unwrap(), 0.5);
    let mut low = s.clone();
    for (nu, v) in low.nu.iter().zip(low.s.iter_mut()) {
        if *nu > 0.2 {
            *v *= 0.1;
        }
    }
    let x = minus3db_crossover(&low, &s).unwrap();
    assert!(x > 0.15 && x <= 0.25, "{x}");
}

#[test]
fn nmse_and_rms_scale_as_expected() {
    let grid = Grid::new(0.15, 8).unwrap();
    let bg = BackgroundMedium::default();
    let truth = DielectricMap::new(grid, Array2::from_elem((8, 8), 20.0), Array2::from_elem((8, 8), 1.0)).unwrap();
    let est = DielectricMap::new(grid, Array2::from_elem((8, 8), 22.0), Array2::from_elem((8, 8), 0.5)).unwrap();
    let (e, s) = nmse(&est, &truth).unwrap();
    assert!((e - 0.01).abs() < 1e-12 && (s - 0.25).abs() < 1e-12);
    assert!((relative_rms(&est, &truth).unwrap() - 0.1).abs() < 1e-12);
    let zero = DielectricMap::uniform(grid, &bg);
    assert_eq!(relative_rms(&zero, &zero).unwrap(), 0.0);
    let mut empty = zero.clone();
    empty.sigma.fill(0.0);
    assert!(nmse(&zero, &empty).is_err());
}
