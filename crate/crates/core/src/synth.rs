//! Synthetic Gaussian-blob series and brute-force reference oracles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::field::{FieldError, GridDomain, ScalarFieldSeries};
use crate::morse::{total_cmp, ExtremumKind, ManifoldLabeling, MorseError, PersistencePair};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Blob {
    /// World-space center per step.
    pub path: Vec<Vec<f64>>,
    /// Negative amplitudes carve minima, positive ones raise maxima.
    pub amplitude: f64,
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianScript {
    pub dims: Vec<usize>,
    #[serde(default)]
    pub spacing: Option<Vec<f64>>,
    #[serde(default)]
    pub periodic: Option<Vec<bool>>,
    pub steps: usize,
    #[serde(default)]
    pub base: f64,
    pub blobs: Vec<Blob>,
}

impl GaussianScript {
    pub fn domain(&self) -> Result<GridDomain, FieldError> {
        let rank = self.dims.len();
        GridDomain::new(
            self.dims.clone(),
            self.spacing.clone().unwrap_or_else(|| vec![1.0; rank]),
            self.periodic.clone().unwrap_or_else(|| vec![false; rank]),
        )
    }
}

/// Samples `base + Σ amplitude · exp(−‖x − c_t‖² / (2σ²))` on the lattice.
pub fn generate(script: &GaussianScript) -> Result<ScalarFieldSeries, FieldError> {
    let domain = script.domain()?;
    for (k, b) in script.blobs.iter().enumerate() {
        if !(b.sigma > 0.0) {
            return Err(FieldError::InvalidSeries(format!(
                "blob {k}: sigma must be positive"
            )));
        }
        if b.path.len() != script.steps || b.path.iter().any(|c| c.len() != domain.rank()) {
            return Err(FieldError::InvalidSeries(format!(
                "blob {k}: path needs {} points of rank {}",
                script.steps,
                domain.rank()
            )));
        }
    }
    let positions: Vec<Vec<f64>> = (0..domain.vertex_count())
        .map(|v| domain.position(v))
        .collect();
    let steps = (0..script.steps)
        .map(|t| {
            positions
                .iter()
                .map(|p| {
                    script.base
                        + script
                            .blobs
                            .iter()
                            .map(|b| {
                                let r = domain.world_distance(p, &b.path[t]);
                                b.amplitude * (-(r * r) / (2.0 * b.sigma * b.sigma)).exp()
                            })
                            .sum::<f64>()
                })
                .collect()
        })
        .collect();
    ScalarFieldSeries::new(domain, steps)
}

/// Two-step ridge configuration: a deep, wide basin A and a shallow basin
/// B whose center drifts across the ridge between them. At the second
/// step B's minimum sits inside A's first-step ascending manifold, close
/// to its boundary.
pub fn ridge_script() -> GaussianScript {
    GaussianScript {
        dims: vec![40, 21],
        spacing: None,
        periodic: None,
        steps: 2,
        base: 0.0,
        blobs: vec![
            Blob {
                path: vec![vec![12.0, 10.0], vec![12.0, 10.0]],
                amplitude: -10.0,
                sigma: 4.0,
            },
            Blob {
                path: vec![vec![RIDGE_B0_X, 10.0], vec![RIDGE_B1_X, 10.0]],
                amplitude: -4.0,
                sigma: 2.0,
            },
        ],
    }
}

pub const RIDGE_B0_X: f64 = 27.0;
pub const RIDGE_B1_X: f64 = 22.0;

/// Random drifting blobs; minima when `amplitude_sign` is negative.
pub fn random_script(
    seed: u64,
    dims: &[usize],
    steps: usize,
    blobs: usize,
    amplitude_sign: f64,
) -> GaussianScript {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let extent: Vec<f64> = dims.iter().map(|&n| (n - 1) as f64).collect();
    let blobs = (0..blobs)
        .map(|_| {
            let mut c: Vec<f64> = extent.iter().map(|&e| rng.gen_range(0.0..=e)).collect();
            let v: Vec<f64> = extent.iter().map(|_| rng.gen_range(-1.5..1.5)).collect();
            let mut path = Vec::with_capacity(steps);
            for _ in 0..steps {
                path.push(c.clone());
                for (x, (dx, e)) in c.iter_mut().zip(v.iter().zip(&extent)) {
                    *x = (*x + dx + rng.gen_range(-0.5..0.5)).clamp(0.0, *e);
                }
            }
            Blob {
                path,
                amplitude: amplitude_sign * rng.gen_range(0.5..3.0),
                sigma: rng.gen_range(1.5..5.0),
            }
        })
        .collect();
    GaussianScript {
        dims: dims.to_vec(),
        spacing: None,
        periodic: None,
        steps,
        base: 0.0,
        blobs,
    }
}

/// Merge-tree pairs by naive component relabeling: vertices are added in
/// total order and, on every merge, the younger component is relabeled by
/// scanning the whole domain.
pub fn oracle_merge_tree(
    step: &[f64],
    domain: &GridDomain,
    kind: ExtremumKind,
) -> Result<Vec<PersistencePair>, MorseError> {
    if step.len() != domain.vertex_count() {
        return Err(MorseError::SizeMismatch {
            expected: domain.vertex_count(),
            found: step.len(),
        });
    }
    let values: Vec<f64> = match kind {
        ExtremumKind::Minimum => step.to_vec(),
        ExtremumKind::Maximum => step.iter().map(|x| -x).collect(),
    };
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| total_cmp(&values, a, b));

    let mut component: Vec<Option<usize>> = vec![None; n];
    let mut pairs = Vec::new();
    for &v in &order {
        let mut births: Vec<usize> = domain
            .vertex_neighbors(v)
            .expect("vertex in range")
            .into_iter()
            .filter_map(|w| component[w])
            .collect();
        births.sort_by(|&a, &b| total_cmp(&values, a, b));
        births.dedup();
        let Some((&elder, younger)) = births.split_first() else {
            component[v] = Some(v);
            continue;
        };
        for &y in younger {
            pairs.push(PersistencePair {
                extremum: y,
                saddle: Some(v),
                persistence: values[v] - values[y],
            });
            for c in component.iter_mut() {
                if *c == Some(y) {
                    *c = Some(elder);
                }
            }
        }
        component[v] = Some(elder);
    }
    pairs.push(PersistencePair {
        extremum: order[0],
        saddle: None,
        persistence: f64::INFINITY,
    });
    pairs.sort_by_key(|p| p.extremum);
    Ok(pairs)
}

/// Dense joint-label counts by a double loop over vertices and label pairs.
pub fn oracle_overlap(a: &ManifoldLabeling, b: &ManifoldLabeling) -> Vec<Vec<u64>> {
    let mut out = vec![vec![0u64; b.extremum_count()]; a.extremum_count()];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = (0..a.vertex_count())
                .filter(|&v| a.label(v) == i && b.label(v) == j)
                .count() as u64;
        }
    }
    out
}
