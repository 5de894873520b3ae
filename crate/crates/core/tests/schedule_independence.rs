use std::f64::consts::{FRAC_PI_3, FRAC_PI_4, FRAC_PI_8};

use cml_core::entangle::chsh_experiment;
use cml_core::field::{variance_scaling_experiment, FluctuationModel};
use cml_core::geodesic::{free_particle_ensemble, EnsembleConfig};
use cml_core::oscillator::{malus_experiment, polarizer_chain, SourceKind};
use cml_core::slit::{two_slit_experiment, SlitGeometry};
use cml_core::uncertainty::uncertainty_product_experiment;

fn on_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

fn agree<T: PartialEq + std::fmt::Debug + Send>(f: impl Fn() -> T + Send + Sync) {
    let serial = on_threads(1, &f);
    let parallel = on_threads(4, &f);
    assert_eq!(serial, parallel);
}

#[test]
fn photon_experiments() {
    agree(|| malus_experiment(&[0.0, FRAC_PI_4, FRAC_PI_3], 50_000, 1).unwrap());
    agree(|| polarizer_chain(&[0.0, FRAC_PI_4, 1.5], SourceKind::Unpolarized, 50_000, 2).unwrap());
}

#[test]
fn chsh() {
    agree(|| chsh_experiment(0.0, FRAC_PI_4, FRAC_PI_8, 3.0 * FRAC_PI_8, 100_000, 3).unwrap());
}

#[test]
fn two_slit() {
    agree(|| two_slit_experiment(&SlitGeometry::default(), 50_000, 4).unwrap());
}

#[test]
fn metric_experiments() {
    let model = FluctuationModel::default();
    agree(|| variance_scaling_experiment(&model, &[1, 8], 1000, 5).unwrap());
    agree(|| uncertainty_product_experiment(&model, &[1, 8], [1.0, 0.0, 0.0, 1.0], 1000, 6).unwrap());
    let crypto = FluctuationModel::crypto(1e36, 9).unwrap();
    agree(|| variance_scaling_experiment(&crypto, &[1, 8], 1000, 5).unwrap());
}

#[test]
fn ensemble() {
    let config = EnsembleConfig {
        n_particles: 1000,
        steps: 20,
        ..EnsembleConfig::default()
    };
    agree(|| {
        cml_core::geodesic::free_particle_ensemble_with(&FluctuationModel::default(), &config, 7)
            .unwrap()
            .variance
    });
    let a = free_particle_ensemble(&FluctuationModel::default(), 1000, 20, 0.1, 7).unwrap();
    let b = free_particle_ensemble(&FluctuationModel::default(), 1000, 20, 0.1, 8).unwrap();
    assert_ne!(a.final_positions, b.final_positions);
}
