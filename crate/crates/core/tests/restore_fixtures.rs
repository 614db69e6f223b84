use lumbarkit::restore::{self, is_singleton, RestoreConfig, RestoreError, RgbMask, BLUE, CANONICAL, GREEN, RED};
use lumbarkit::synthetic::{defective_fixture_set, Defect};
use lumbarkit::ClassId;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn check_postconditions(mask: &RgbMask, cfg: &RestoreConfig) {
    let colors = mask.distinct_colors();
    assert!(colors.len() <= 4);
    assert!(colors.iter().all(|c| CANONICAL.contains(c)));
    for r in 0..mask.height() {
        for c in 0..mask.width() {
            assert!(!is_singleton(mask, r, c, cfg.connectivity), "singleton at ({r}, {c})");
        }
    }
    if colors.contains(&GREEN) || colors.contains(&BLUE) {
        assert!(colors.contains(&RED));
    }
}

#[test]
fn defective_fixtures_restore_cleanly() {
    let cfg = RestoreConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let fixtures = defective_fixture_set(&mut rng, 50, 64, 80);
    for (i, (_, defect, mask)) in fixtures.iter().enumerate() {
        assert_eq!(mask.distinct_colors().len(), 16);
        let restored = match restore::restore(mask, &cfg) {
            Ok(r) => r,
            Err(RestoreError::NoConvergence { .. }) => panic!("fixture {i} did not converge"),
            Err(e) => panic!("fixture {i}: {e}"),
        };
        let out = RgbMask::from_labels(&restored.mask, &cfg.palette);
        check_postconditions(&out, &cfg);
        let again = restore::restore(&out, &cfg).unwrap();
        assert_eq!(again.mask, restored.mask, "fixture {i} is not a fixed point");
        if *defect == Defect::MissingVertebrae {
            assert!(restored.mask.labels().contains(&ClassId::Vertebrae));
        }
    }
}

#[test]
fn four_connectivity_also_converges() {
    let cfg = RestoreConfig {
        connectivity: restore::Neighborhood::Four,
        ..RestoreConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (_, _, mask) in defective_fixture_set(&mut rng, 10, 48, 64) {
        let restored = restore::restore(&mask, &cfg).unwrap();
        check_postconditions(&RgbMask::from_labels(&restored.mask, &cfg.palette), &cfg);
    }
}

#[test]
fn restoration_mostly_recovers_the_layout() {
    let cfg = RestoreConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for (layout, defect, mask) in defective_fixture_set(&mut rng, 6, 64, 80) {
        if defect != Defect::DarkVertebrae {
            continue;
        }
        let restored = restore::restore(&mask, &cfg).unwrap().mask;
        let truth = layout.labels();
        let agree = restored
            .labels()
            .iter()
            .zip(truth.labels())
            .filter(|(a, b)| a == b)
            .count();
        assert!(agree as f64 / truth.len() as f64 > 0.9);
    }
}

#[test]
fn three_pixel_band_erodes_from_its_tips() {
    // majority voting chips the tips of a three-row band one column at a time
    let mut mask = RgbMask::filled(60, 9, lumbarkit::restore::BLACK).unwrap();
    for r in 3..6 {
        for c in 2..58 {
            mask.set(r, c, RED);
        }
    }
    let cfg = RestoreConfig::default();
    assert!(matches!(restore::restore(&mask, &cfg), Err(RestoreError::NoConvergence { .. })));
    let slow = RestoreConfig { max_rounds: 128, ..cfg };
    let done = restore::restore(&mask, &slow).unwrap();
    assert!(done.rounds > 16);
    assert!(done.mask.labels().iter().all(|&c| c == ClassId::Background));

    let mut thick = RgbMask::filled(20, 9, lumbarkit::restore::BLACK).unwrap();
    for r in 2..6 {
        for c in 2..18 {
            thick.set(r, c, RED);
        }
    }
    let kept = restore::restore(&thick, &cfg).unwrap();
    let red = kept.mask.labels().iter().filter(|&&c| c == ClassId::Vertebrae).count();
    assert_eq!(red, 4 * 16 - 4, "only the four corners are chipped");
}
