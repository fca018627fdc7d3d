//! Feature-level overlap: features are clusters of extrema, and their
//! overlap is the block sum of the extremum-level counts. Manifolds of one
//! step are disjoint, so the block sum equals the overlap of the unions.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::correspond::{CorrespondenceMatrix, Direction, OverlapMatrix, Strategy};
use crate::sparse::Csr;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("feature {feature} is empty")]
    Empty { feature: usize },
    #[error("feature {feature} references extremum {extremum}, only {count} exist")]
    OutOfRange {
        feature: usize,
        extremum: usize,
        count: usize,
    },
    #[error("extremum {extremum} belongs to more than one feature")]
    Overlapping { extremum: usize },
    #[error("feature {feature} has a zero denominator")]
    ZeroDenominator { feature: usize },
    #[error("feature set for t={got} used where t={want} was expected")]
    WrongStep { want: usize, got: usize },
    #[error("feature file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = FeatureError> = std::result::Result<T, E>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub extrema: Vec<usize>,
}

/// Features of one time step. Matrix indices follow list order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub t: usize,
    pub features: Vec<Feature>,
}

impl FeatureSet {
    /// One feature per extremum.
    pub fn singletons(t: usize, extremum_count: usize) -> Self {
        Self {
            t,
            features: (0..extremum_count)
                .map(|i| Feature {
                    id: i,
                    label: None,
                    extrema: vec![i],
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Checks non-empty, in-range, pairwise disjoint index sets.
    pub fn validate(&self, extremum_count: usize) -> Result<()> {
        let mut owner = vec![false; extremum_count];
        for (k, f) in self.features.iter().enumerate() {
            if f.extrema.is_empty() {
                return Err(FeatureError::Empty { feature: k });
            }
            for &i in &f.extrema {
                if i >= extremum_count {
                    return Err(FeatureError::OutOfRange {
                        feature: k,
                        extremum: i,
                        count: extremum_count,
                    });
                }
                if std::mem::replace(&mut owner[i], true) {
                    return Err(FeatureError::Overlapping { extremum: i });
                }
            }
        }
        Ok(())
    }

    /// Feature index of every extremum, `None` when unassigned.
    pub fn membership(&self, extremum_count: usize) -> Result<Vec<Option<usize>>> {
        self.validate(extremum_count)?;
        let mut out = vec![None; extremum_count];
        for (k, f) in self.features.iter().enumerate() {
            for &i in &f.extrema {
                out[i] = Some(k);
            }
        }
        Ok(out)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("feature set serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Block-summed counts between features of two steps.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureOverlapMatrix {
    pub direction: Direction,
    pub strategy: Strategy,
    pub counts: Csr<u64>,
}

impl FeatureOverlapMatrix {
    pub fn get(&self, k: usize, l: usize) -> u64 {
        self.counts.get(k, l).unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureCorrespondenceMatrix {
    pub matrix: CorrespondenceMatrix,
    /// Per row, the probability mass landing on extrema outside every
    /// feature of the other step.
    pub unassigned: Vec<f64>,
}

pub fn feature_overlap(
    features: &FeatureSet,
    other: &FeatureSet,
    o: &OverlapMatrix,
) -> Result<FeatureOverlapMatrix> {
    let rows = features.membership(o.rows())?;
    let cols = other.membership(o.cols())?;
    let triplets = o
        .counts
        .iter()
        .filter_map(|(i, j, c)| Some((rows[i]?, cols[j]?, c)));
    Ok(FeatureOverlapMatrix {
        direction: o.direction,
        strategy: o.strategy,
        counts: Csr::from_triplets(features.len(), other.len(), triplets),
    })
}

/// Per-feature denominators: the summed overlap of the feature's extrema
/// with every extremum of the other step. Because manifolds partition the
/// domain this equals the size of the union of the feature's manifolds
/// (manifold overlap), or its total sample count (sampling).
pub fn feature_denominators(features: &FeatureSet, o: &OverlapMatrix) -> Result<Vec<u64>> {
    features.validate(o.rows())?;
    let row_sums = o.row_sums();
    features
        .features
        .iter()
        .enumerate()
        .map(|(k, f)| {
            let total: u64 = f.extrema.iter().map(|&i| row_sums[i]).sum();
            if total == 0 {
                Err(FeatureError::ZeroDenominator { feature: k })
            } else {
                Ok(total)
            }
        })
        .collect()
}

pub fn feature_correspondence(
    fo: &FeatureOverlapMatrix,
    denominators: &[u64],
) -> Result<FeatureCorrespondenceMatrix> {
    if let Some(k) = denominators.iter().position(|&d| d == 0) {
        return Err(FeatureError::ZeroDenominator { feature: k });
    }
    let probabilities = fo.counts.map(|k, _, c| c as f64 / denominators[k] as f64);
    let unassigned = (0..fo.counts.rows())
        .map(|k| {
            let kept: u64 = fo.counts.row(k).map(|(_, c)| c).sum();
            (denominators[k] - kept) as f64 / denominators[k] as f64
        })
        .collect();
    Ok(FeatureCorrespondenceMatrix {
        matrix: CorrespondenceMatrix {
            direction: fo.direction,
            strategy: fo.strategy,
            probabilities,
        },
        unassigned,
    })
}

/// Lifts an extremum-level overlap matrix to features in one call.
pub fn lift(
    features: &FeatureSet,
    other: &FeatureSet,
    o: &OverlapMatrix,
) -> Result<FeatureCorrespondenceMatrix> {
    let fo = feature_overlap(features, other, o)?;
    let den = feature_denominators(features, o)?;
    feature_correspondence(&fo, &den)
}
