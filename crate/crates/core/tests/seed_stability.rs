use cml_core::field::{variance_scaling_experiment, FluctuationModel};
use cml_core::geodesic::free_particle_ensemble;
use cml_core::stats;

#[test]
fn spread_rate_is_stable_across_seeds() {
    let model = FluctuationModel::default();
    let slopes: Vec<f64> = (0..10)
        .map(|seed| {
            free_particle_ensemble(&model, 2000, 60, 0.1, seed)
                .unwrap()
                .slope_per_ds
        })
        .collect();
    let mean = slopes.iter().sum::<f64>() / slopes.len() as f64;
    for s in &slopes {
        assert!((s / mean - 1.0).abs() < 0.1, "slopes {slopes:?}");
    }
}

#[test]
fn variance_slope_is_stable_across_seeds() {
    let model = FluctuationModel::default();
    let m: Vec<usize> = (0..=6).map(|k| 1 << k).collect();
    for seed in 0..5 {
        let r = variance_scaling_experiment(&model, &m, 1000, seed).unwrap();
        assert!((r.fit.slope + 1.0).abs() < 0.1, "seed {seed}: slope {}", r.fit.slope);
    }
}

#[test]
fn final_positions_are_gaussian_when_pooled() {
    // Positions of separate seeds are centred separately, then pooled.
    let model = FluctuationModel::default();
    let mut pooled = Vec::new();
    for seed in 100..104 {
        let r = free_particle_ensemble(&model, 10_000, 200, 0.1, seed).unwrap();
        let m = stats::mean(&r.final_positions);
        pooled.extend(r.final_positions.iter().map(|x| x - m));
    }
    let k = stats::excess_kurtosis(&pooled);
    assert!(k.abs() < 0.1, "pooled kurtosis {k}");
}
