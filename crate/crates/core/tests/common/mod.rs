#![allow(dead_code)]

use xtrack::prelude::*;

/// Simplified minimum labelings of a random drifting-blob series.
pub fn random_labelings(
    seed: u64,
    dims: &[usize],
    steps: usize,
) -> (ScalarFieldSeries, Vec<ManifoldLabeling>) {
    let script = synth::random_script(seed, dims, steps, 6, -1.0);
    labeled(synth::generate(&script).expect("valid script"))
}

pub fn labeled(series: ScalarFieldSeries) -> (ScalarFieldSeries, Vec<ManifoldLabeling>) {
    let domain = series.domain().clone();
    let ls = series
        .steps()
        .iter()
        .map(|s| {
            let l = label_manifolds(s, &domain, ExtremumKind::Minimum).unwrap();
            simplify(&l, s, &domain, 0.5).unwrap()
        })
        .collect();
    (series, ls)
}

pub fn ridge() -> (ScalarFieldSeries, Vec<ManifoldLabeling>) {
    labeled(synth::generate(&synth::ridge_script()).unwrap())
}

/// Every probabilistic strategy at the given distance plus the baseline.
pub fn methods(d: f64) -> Vec<Method> {
    Strategy::ALL.iter().map(|&s| Method::new(s, d)).collect()
}
