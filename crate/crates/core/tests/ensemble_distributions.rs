//! Shape of the ln chi distribution near and away from the Ising point.

use xyfid::ensemble::{run_point, EnsembleOptions, EnsembleStats, GridPoint};
use xyfid::model::{Boundary, ChainSpec};
use xyfid::spectral::DriveAxis;

const SEED: u64 = 20130701;

fn stats(length: usize, field: f64, n: usize) -> EnsembleStats {
    let gp = GridPoint {
        spec: ChainSpec::new(length, field, 1.0, 0.1, Boundary::PeriodicEvenSector).unwrap(),
        drive: DriveAxis::Field,
        n_realizations: n,
    };
    run_point(&gp, SEED, &EnsembleOptions::default()).unwrap()
}

#[test]
fn critical_distribution_is_wider_and_more_asymmetric() {
    let critical = stats(128, 1.0, 2000);
    let far = stats(128, 1.5, 2000);
    assert_eq!(critical.n_failed, 0);
    assert_eq!(far.n_failed, 0);
    assert!(
        critical.ln_chi.sd > far.ln_chi.sd,
        "sd {} vs {}",
        critical.ln_chi.sd,
        far.ln_chi.sd
    );
    // The critical tail points toward small chi, so compare magnitudes.
    assert!(
        critical.ln_chi.skewness.abs() > far.ln_chi.skewness.abs(),
        "skewness {} vs {}",
        critical.ln_chi.skewness,
        far.ln_chi.skewness
    );
}

#[test]
fn critical_distribution_broadens_with_size() {
    let small = stats(128, 1.0, 300);
    let large = stats(512, 1.0, 300);
    assert!(
        large.ln_chi.sd > small.ln_chi.sd,
        "sd {} at L=128 vs {} at L=512",
        small.ln_chi.sd,
        large.ln_chi.sd
    );
}
