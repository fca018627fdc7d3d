//! Overlap and correspondence matrices between consecutive time steps.
//!
//! Row `i` of a matrix at time `t` belongs to extremum `i` of step `t`; the
//! columns are the extrema of step `t + 1` (forward) or `t - 1` (backward).
//! Overlap matrices hold exact integer counts together with a per-row
//! denominator; correspondence matrices are their row-normalized form.

use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::GridDomain;
use crate::morse::{Extremum, ManifoldLabeling};
use crate::sparse::Csr;

#[derive(Debug, Error)]
pub enum CorrespondError {
    #[error("labelings differ: {0}")]
    Mismatch(String),
    #[error("invalid sampling distance {0}")]
    Distance(f64),
    #[error("invalid matrix document: {0}")]
    Document(String),
}

pub type Result<T, E = CorrespondError> = std::result::Result<T, E>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    SamplingEuclidean,
    SamplingCombinatorial,
    ManifoldOverlap,
    Binary,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Binary,
        Strategy::SamplingEuclidean,
        Strategy::SamplingCombinatorial,
        Strategy::ManifoldOverlap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::SamplingEuclidean => "sampling-euclidean",
            Strategy::SamplingCombinatorial => "sampling-combinatorial",
            Strategy::ManifoldOverlap => "manifold-overlap",
            Strategy::Binary => "binary",
        }
    }

    pub fn is_sampling(self) -> bool {
        matches!(
            self,
            Strategy::SamplingEuclidean | Strategy::SamplingCombinatorial
        )
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown strategy `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DistanceMode {
    Euclidean,
    Combinatorial,
}

/// Sampling neighborhood parameters.
///
/// Euclidean radii are in world units unless `lattice_units` is set.
/// Combinatorial radii are hop counts; fractional values are floored.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sampling {
    pub mode: DistanceMode,
    pub d: f64,
    pub lattice_units: bool,
}

impl Sampling {
    pub fn euclidean(d: f64) -> Self {
        Self {
            mode: DistanceMode::Euclidean,
            d,
            lattice_units: false,
        }
    }

    pub fn combinatorial(d: f64) -> Self {
        Self {
            mode: DistanceMode::Combinatorial,
            d,
            lattice_units: false,
        }
    }

    pub fn strategy(&self) -> Strategy {
        match self.mode {
            DistanceMode::Euclidean => Strategy::SamplingEuclidean,
            DistanceMode::Combinatorial => Strategy::SamplingCombinatorial,
        }
    }
}

/// The set of vertices sampled around an extremum, sorted by id.
pub fn sampling_neighborhood(
    m: &Extremum,
    domain: &GridDomain,
    sampling: &Sampling,
) -> Result<Vec<usize>> {
    vertex_neighborhood(m.vertex, domain, sampling)
}

pub(crate) fn vertex_neighborhood(
    center: usize,
    domain: &GridDomain,
    sampling: &Sampling,
) -> Result<Vec<usize>> {
    if !(sampling.d >= 0.0) {
        return Err(CorrespondError::Distance(sampling.d));
    }
    if center >= domain.vertex_count() {
        return Err(CorrespondError::Mismatch(format!(
            "vertex {center} outside domain"
        )));
    }
    match sampling.mode {
        DistanceMode::Euclidean => {
            let ball = if sampling.lattice_units {
                domain
                    .with_unit_spacing()
                    .euclidean_ball(center, sampling.d)
            } else {
                domain.euclidean_ball(center, sampling.d)
            };
            Ok(ball.expect("center checked above"))
        }
        DistanceMode::Combinatorial => Ok(bfs_ball(domain, center, sampling.d.floor() as usize)),
    }
}

fn bfs_ball(domain: &GridDomain, center: usize, hops: usize) -> Vec<usize> {
    let mut seen = HashSet::from([center]);
    let mut frontier = VecDeque::from([(center, 0usize)]);
    while let Some((v, depth)) = frontier.pop_front() {
        if depth == hops {
            continue;
        }
        domain.for_each_neighbor(v, |w| {
            if seen.insert(w) {
                frontier.push_back((w, depth + 1));
            }
        });
    }
    let mut out: Vec<usize> = seen.into_iter().collect();
    out.sort_unstable();
    out
}

/// Integer overlap counts with per-row denominators.
#[derive(Clone, Debug, PartialEq)]
pub struct OverlapMatrix {
    pub direction: Direction,
    pub strategy: Strategy,
    pub denominators: Vec<u64>,
    pub counts: Csr<u64>,
}

impl OverlapMatrix {
    pub fn rows(&self) -> usize {
        self.counts.rows()
    }

    pub fn cols(&self) -> usize {
        self.counts.cols()
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts.get(i, j).unwrap_or(0)
    }

    pub fn row_sums(&self) -> Vec<u64> {
        (0..self.rows())
            .map(|i| self.counts.row(i).map(|(_, c)| c).sum())
            .collect()
    }
}

/// Row-normalized overlap: entry `(i, j)` is the probability that
/// extremum `i` corresponds to extremum `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrespondenceMatrix {
    pub direction: Direction,
    pub strategy: Strategy,
    pub probabilities: Csr<f64>,
}

impl CorrespondenceMatrix {
    pub fn rows(&self) -> usize {
        self.probabilities.rows()
    }

    pub fn cols(&self) -> usize {
        self.probabilities.cols()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.probabilities.get(i, j).unwrap_or(0.0)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows())
            .map(|i| self.probabilities.row(i).map(|(_, p)| p).sum())
            .collect()
    }

    /// Non-zero positions.
    pub fn support(&self) -> HashSet<(usize, usize)> {
        self.probabilities.iter().map(|(i, j, _)| (i, j)).collect()
    }
}

fn check_pair(a: &ManifoldLabeling, b: &ManifoldLabeling) -> Result<()> {
    if a.vertex_count() != b.vertex_count() {
        return Err(CorrespondError::Mismatch(format!(
            "{} vs {} vertices",
            a.vertex_count(),
            b.vertex_count()
        )));
    }
    if a.kind() != b.kind() {
        return Err(CorrespondError::Mismatch(format!(
            "{:?} vs {:?} manifolds",
            a.kind(),
            b.kind()
        )));
    }
    Ok(())
}

fn check_domain(l: &ManifoldLabeling, domain: &GridDomain) -> Result<()> {
    if l.vertex_count() != domain.vertex_count() {
        return Err(CorrespondError::Mismatch(format!(
            "labeling has {} vertices, domain {}",
            l.vertex_count(),
            domain.vertex_count()
        )));
    }
    Ok(())
}

/// Counts, for every extremum of `current`, how many of its sampled
/// vertices fall into each manifold of `other`.
pub fn sampling_overlap(
    current: &ManifoldLabeling,
    other: &ManifoldLabeling,
    domain: &GridDomain,
    sampling: &Sampling,
    direction: Direction,
) -> Result<OverlapMatrix> {
    check_pair(current, other)?;
    check_domain(current, domain)?;
    let mut triplets = Vec::new();
    let mut denominators = Vec::with_capacity(current.extremum_count());
    for m in current.extrema() {
        let samples = sampling_neighborhood(m, domain, sampling)?;
        denominators.push(samples.len() as u64);
        triplets.extend(samples.into_iter().map(|v| (m.id, other.label(v), 1u64)));
    }
    Ok(OverlapMatrix {
        direction,
        strategy: sampling.strategy(),
        denominators,
        counts: Csr::from_triplets(current.extremum_count(), other.extremum_count(), triplets),
    })
}

/// Joint label counts of two consecutive steps: the forward matrix at `t`
/// and its transpose, the backward matrix at `t + 1`.
pub fn manifold_overlap(
    current: &ManifoldLabeling,
    next: &ManifoldLabeling,
) -> Result<(OverlapMatrix, OverlapMatrix)> {
    check_pair(current, next)?;
    let triplets = current
        .labels()
        .iter()
        .zip(next.labels())
        .map(|(&i, &j)| (i, j, 1u64));
    let counts = Csr::from_triplets(current.extremum_count(), next.extremum_count(), triplets);
    let forward = OverlapMatrix {
        direction: Direction::Forward,
        strategy: Strategy::ManifoldOverlap,
        denominators: current.sizes().iter().map(|&s| s as u64).collect(),
        counts: counts.clone(),
    };
    let backward = OverlapMatrix {
        direction: Direction::Backward,
        strategy: Strategy::ManifoldOverlap,
        denominators: next.sizes().iter().map(|&s| s as u64).collect(),
        counts: counts.transpose(),
    };
    Ok((forward, backward))
}

/// One unit entry per row: the manifold of `other` containing the
/// extremum's own vertex.
pub fn binary_overlap(
    current: &ManifoldLabeling,
    other: &ManifoldLabeling,
    direction: Direction,
) -> Result<OverlapMatrix> {
    check_pair(current, other)?;
    let triplets = current
        .extrema()
        .iter()
        .map(|m| (m.id, other.label(m.vertex), 1u64));
    Ok(OverlapMatrix {
        direction,
        strategy: Strategy::Binary,
        denominators: vec![1; current.extremum_count()],
        counts: Csr::from_triplets(current.extremum_count(), other.extremum_count(), triplets),
    })
}

pub fn binary_correspondence(
    current: &ManifoldLabeling,
    other: &ManifoldLabeling,
    direction: Direction,
) -> Result<CorrespondenceMatrix> {
    Ok(normalize(&binary_overlap(current, other, direction)?))
}

pub fn normalize(o: &OverlapMatrix) -> CorrespondenceMatrix {
    CorrespondenceMatrix {
        direction: o.direction,
        strategy: o.strategy,
        probabilities: o.counts.map(|i, _, c| c as f64 / o.denominators[i] as f64),
    }
}

/// Strategy plus its sampling parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Method {
    pub strategy: Strategy,
    /// Used by the sampling strategies only.
    pub d: f64,
    pub lattice_units: bool,
}

impl Method {
    pub fn new(strategy: Strategy, d: f64) -> Self {
        Self {
            strategy,
            d,
            lattice_units: false,
        }
    }

    fn sampling(&self) -> Option<Sampling> {
        let mode = match self.strategy {
            Strategy::SamplingEuclidean => DistanceMode::Euclidean,
            Strategy::SamplingCombinatorial => DistanceMode::Combinatorial,
            _ => return None,
        };
        Some(Sampling {
            mode,
            d: self.d,
            lattice_units: self.lattice_units,
        })
    }
}

/// Both directions between steps `t` and `t + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairOverlap {
    /// Rows at `t`, columns at `t + 1`.
    pub forward: OverlapMatrix,
    /// Rows at `t + 1`, columns at `t`.
    pub backward: OverlapMatrix,
}

pub fn overlap_pair(
    current: &ManifoldLabeling,
    next: &ManifoldLabeling,
    domain: &GridDomain,
    method: &Method,
) -> Result<PairOverlap> {
    let (forward, backward) = match method.strategy {
        Strategy::ManifoldOverlap => manifold_overlap(current, next)?,
        Strategy::Binary => (
            binary_overlap(current, next, Direction::Forward)?,
            binary_overlap(next, current, Direction::Backward)?,
        ),
        Strategy::SamplingEuclidean | Strategy::SamplingCombinatorial => {
            let s = method.sampling().expect("sampling strategy");
            (
                sampling_overlap(current, next, domain, &s, Direction::Forward)?,
                sampling_overlap(next, current, domain, &s, Direction::Backward)?,
            )
        }
    };
    Ok(PairOverlap { forward, backward })
}

/// JSON form of an overlap matrix. Counts rather than probabilities are
/// stored so that normalization is reproducible.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapDocument {
    pub t: usize,
    pub direction: Direction,
    pub strategy: Strategy,
    pub rows: usize,
    pub cols: usize,
    pub denominators: Vec<u64>,
    pub entries: Vec<[u64; 3]>,
}

impl OverlapDocument {
    pub fn new(t: usize, o: &OverlapMatrix) -> Self {
        Self {
            t,
            direction: o.direction,
            strategy: o.strategy,
            rows: o.rows(),
            cols: o.cols(),
            denominators: o.denominators.clone(),
            entries: o
                .counts
                .iter()
                .map(|(i, j, c)| [i as u64, j as u64, c])
                .collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<OverlapMatrix> {
        if self.denominators.len() != self.rows {
            return Err(CorrespondError::Document(format!(
                "{} denominators for {} rows",
                self.denominators.len(),
                self.rows
            )));
        }
        if self.denominators.contains(&0) {
            return Err(CorrespondError::Document("zero denominator".into()));
        }
        let mut triplets = Vec::with_capacity(self.entries.len());
        for &[i, j, c] in &self.entries {
            let (i, j) = (i as usize, j as usize);
            if i >= self.rows || j >= self.cols || c == 0 {
                return Err(CorrespondError::Document(format!(
                    "bad entry [{i}, {j}, {c}]"
                )));
            }
            triplets.push((i, j, c));
        }
        Ok(OverlapMatrix {
            direction: self.direction,
            strategy: self.strategy,
            denominators: self.denominators.clone(),
            counts: Csr::from_triplets(self.rows, self.cols, triplets),
        })
    }
}
