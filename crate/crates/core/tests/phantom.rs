use mwtomo::phantom::{generate_phantom, BreastClass, PhantomConfig, Tissue, AXIS_RANGE, CENTER_RADIUS, SKIN_RANGE};
use mwtomo::{BackgroundMedium, Grid};

fn grid(n: usize) -> Grid {
    Grid::new(0.15, n).unwrap()
}

#[test]
fn every_class_meets_its_ranges_and_geometry() {
    let g = grid(32);
    let bg = BackgroundMedium::default();
    let cfg = PhantomConfig::default();
    let tissues = cfg.tissues;
    let mut envelope = tissues.adipose;
    envelope.eps_r.max = tissues.fibroglandular.eps_r.max;
    envelope.sigma.max = tissues.fibroglandular.sigma.max;
    for class in BreastClass::ALL {
        for seed in 0..10u64 {
            let p = generate_phantom(class, &g, &bg, &cfg, 1000 + seed).unwrap();
            assert!(class.admits(p.tissue_percentages()), "{class} seed {seed}: {:?}", p.tissue_percentages());
            let geo = p.geometry.unwrap();
            for axis in [geo.semi_axes.0, geo.semi_axes.1] {
                assert!((AXIS_RANGE.0..=AXIS_RANGE.1).contains(&(2.0 * axis)));
            }
            assert!((SKIN_RANGE.0..=SKIN_RANGE.1).contains(&geo.skin_thickness));
            assert!(geo.center.0.hypot(geo.center.1) <= CENTER_RADIUS);
            for ((r, c), &code) in p.labels.labels.indexed_iter() {
                let t = Tissue::from_code(code).unwrap();
                let at = g.cell_center(r, c);
                assert_eq!(t == Tissue::Background, !geo.contains(at, g.origin));
                if t.is_inner() {
                    assert!(geo.inner_contains(at, g.origin));
                }
                let (eps, sigma) = (p.dielectrics.eps_r[[r, c]], p.dielectrics.sigma[[r, c]]);
                // the inner blur mixes neighbouring tissues, so inner cells
                // only stay within the overall inner envelope
                let s = match t {
                    Tissue::Background => {
                        assert_eq!((eps, sigma), (bg.eps_r, bg.sigma));
                        continue;
                    }
                    Tissue::Skin => tissues.skin,
                    _ => envelope,
                };
                assert!(eps >= s.eps_r.min && eps <= s.eps_r.max, "{t:?} eps {eps}");
                assert!(sigma >= s.sigma.min && sigma <= s.sigma.max, "{t:?} sigma {sigma}");
            }
        }
    }
}

#[test]
fn generation_is_a_pure_function_of_the_seed() {
    let g = grid(24);
    let bg = BackgroundMedium::default();
    let cfg = PhantomConfig::default();
    let a = generate_phantom(BreastClass::III, &g, &bg, &cfg, 77).unwrap();
    let b = generate_phantom(BreastClass::III, &g, &bg, &cfg, 77).unwrap();
    let c = generate_phantom(BreastClass::III, &g, &bg, &cfg, 78).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.dielectrics, c.dielectrics);
}

#[test]
fn denser_classes_hold_more_fibroglandular_tissue() {
    let g = grid(32);
    let bg = BackgroundMedium::default();
    let cfg = PhantomConfig::default();
    let mean_fibro = |class: BreastClass| {
        (0..8u64)
            .map(|s| generate_phantom(class, &g, &bg, &cfg, s).unwrap().tissue_percentages()[2])
            .sum::<f64>()
            / 8.0
    };
    let fibro: Vec<f64> = BreastClass::ALL.iter().map(|&c| mean_fibro(c)).collect();
    assert!(fibro.windows(2).all(|w| w[0] < w[1]), "{fibro:?}");
}

#[test]
fn invalid_config_is_rejected() {
    let cfg = PhantomConfig {
        max_retries: 0,
        ..PhantomConfig::default()
    };
    let r = generate_phantom(BreastClass::I, &grid(32), &BackgroundMedium::default(), &cfg, 1);
    assert!(r.is_err());
}
