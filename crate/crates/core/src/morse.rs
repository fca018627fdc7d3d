//! Extrema, steepest-descent manifolds and persistence simplification.
//!
//! Vertices are compared under a strict total order `(value, id)`, which
//! breaks ties on plateaus deterministically. Maxima are handled by running
//! the minima code on the negated field, so "lower" below always refers to
//! the oriented field.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::GridDomain;

#[derive(Debug, Error)]
pub enum MorseError {
    #[error("threshold {0}% outside [0, 100]")]
    Threshold(f64),
    #[error("step has {found} values, domain has {expected} vertices")]
    SizeMismatch { expected: usize, found: usize },
    #[error("labeling does not belong to this step: {0}")]
    Mismatch(String),
}

pub type Result<T, E = MorseError> = std::result::Result<T, E>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtremumKind {
    Minimum,
    Maximum,
}

impl ExtremumKind {
    pub fn manifold(self) -> ManifoldKind {
        match self {
            ExtremumKind::Minimum => ManifoldKind::Ascending,
            ExtremumKind::Maximum => ManifoldKind::Descending,
        }
    }

    /// Value in the oriented field (maxima negate).
    #[inline]
    fn orient(self, x: f64) -> f64 {
        match self {
            ExtremumKind::Minimum => x,
            ExtremumKind::Maximum => -x,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ManifoldKind {
    Ascending,
    Descending,
}

/// `(value, id)` lexicographic comparison.
#[inline]
pub fn total_cmp(values: &[f64], a: usize, b: usize) -> Ordering {
    values[a].total_cmp(&values[b]).then(a.cmp(&b))
}

#[inline]
fn lower(values: &[f64], a: usize, b: usize) -> bool {
    total_cmp(values, a, b) == Ordering::Less
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub id: usize,
    pub vertex: usize,
    pub value: f64,
    /// `f64::INFINITY` for the global extremum.
    pub persistence: f64,
    pub kind: ExtremumKind,
}

/// Partition of the vertices into the manifolds of one step's extrema.
#[derive(Clone, Debug, PartialEq)]
pub struct ManifoldLabeling {
    kind: ManifoldKind,
    extremum_kind: ExtremumKind,
    label: Vec<usize>,
    extrema: Vec<Extremum>,
    sizes: Vec<usize>,
}

impl ManifoldLabeling {
    /// Builds a labeling from raw parts, re-tallying sizes and checking the
    /// partition invariants.
    pub fn from_parts(
        extremum_kind: ExtremumKind,
        label: Vec<usize>,
        extrema: Vec<Extremum>,
    ) -> Result<Self> {
        let mut sizes = vec![0usize; extrema.len()];
        for &l in &label {
            *sizes
                .get_mut(l)
                .ok_or_else(|| MorseError::Mismatch(format!("label {l} has no extremum")))? += 1;
        }
        for (i, e) in extrema.iter().enumerate() {
            if e.id != i || label.get(e.vertex) != Some(&i) || e.kind != extremum_kind {
                return Err(MorseError::Mismatch(format!(
                    "extremum {i} is not labeled by its own id"
                )));
            }
        }
        Ok(Self {
            kind: extremum_kind.manifold(),
            extremum_kind,
            label,
            extrema,
            sizes,
        })
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn extremum_kind(&self) -> ExtremumKind {
        self.extremum_kind
    }

    pub fn labels(&self) -> &[usize] {
        &self.label
    }

    pub fn label(&self, v: usize) -> usize {
        self.label[v]
    }

    pub fn extrema(&self) -> &[Extremum] {
        &self.extrema
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn vertex_count(&self) -> usize {
        self.label.len()
    }

    pub fn extremum_count(&self) -> usize {
        self.extrema.len()
    }
}

fn oriented(step: &[f64], kind: ExtremumKind) -> Vec<f64> {
    step.iter().map(|&x| kind.orient(x)).collect()
}

fn check_len(step: &[f64], domain: &GridDomain) -> Result<()> {
    if step.len() != domain.vertex_count() {
        return Err(MorseError::SizeMismatch {
            expected: domain.vertex_count(),
            found: step.len(),
        });
    }
    Ok(())
}

/// Labels every vertex with the extremum its steepest-descent chain ends
/// at (steepest ascent for maxima). Extremum ids follow vertex order, and
/// every extremum carries its persistence.
pub fn label_manifolds(
    step: &[f64],
    domain: &GridDomain,
    kind: ExtremumKind,
) -> Result<ManifoldLabeling> {
    check_len(step, domain)?;
    let values = oriented(step, kind);
    let n = values.len();

    // Descent pointer: the lowest neighbor when it is lower than the vertex.
    let mut next = vec![usize::MAX; n];
    for (v, slot) in next.iter_mut().enumerate() {
        let mut best = v;
        domain.for_each_neighbor(v, |w| {
            if lower(&values, w, best) {
                best = w;
            }
        });
        *slot = best;
    }

    const UNSET: usize = usize::MAX;
    let mut label = vec![UNSET; n];
    let mut extrema = Vec::new();
    for v in 0..n {
        if next[v] == v {
            label[v] = extrema.len();
            extrema.push(Extremum {
                id: extrema.len(),
                vertex: v,
                value: step[v],
                persistence: f64::INFINITY,
                kind,
            });
        }
    }
    let mut path = Vec::new();
    for v in 0..n {
        let mut u = v;
        while label[u] == UNSET {
            path.push(u);
            u = next[u];
        }
        let l = label[u];
        for p in path.drain(..) {
            label[p] = l;
        }
    }

    let pairs = sweep(&values, domain);
    for pair in pairs.iter().filter(|p| p.saddle.is_some()) {
        let id = label[pair.extremum];
        extrema[id].persistence = pair.persistence_oriented;
    }

    ManifoldLabeling::from_parts(kind, label, extrema)
}

/// One 0-dimensional persistence pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PersistencePair {
    pub extremum: usize,
    /// `None` for the global extremum.
    pub saddle: Option<usize>,
    pub persistence: f64,
}

struct SweepPair {
    extremum: usize,
    saddle: Option<usize>,
    /// Elder extremum vertex this one merged into.
    partner: Option<usize>,
    persistence_oriented: f64,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[x] != root {
            let up = self.parent[x];
            self.parent[x] = root;
            x = up;
        }
        root
    }
}

/// Union-find sweep over the oriented field in total order. Component roots
/// are always the component's birth vertex, so the elder of two components
/// is simply the lower root.
fn sweep(values: &[f64], domain: &GridDomain) -> Vec<SweepPair> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| total_cmp(values, a, b));
    let mut rank = vec![0usize; n];
    for (r, &v) in order.iter().enumerate() {
        rank[v] = r;
    }

    let mut uf = UnionFind::new(n);
    let mut pairs = Vec::new();
    let mut roots = Vec::with_capacity(14);
    for &v in &order {
        roots.clear();
        domain.for_each_neighbor(v, |w| {
            if rank[w] < rank[v] {
                roots.push(w);
            }
        });
        for r in roots.iter_mut() {
            *r = uf.find(*r);
        }
        roots.sort_unstable_by_key(|&r| rank[r]);
        roots.dedup();
        let Some((&elder, younger)) = roots.split_first() else {
            continue; // new component born at v
        };
        for &y in younger {
            pairs.push(SweepPair {
                extremum: y,
                saddle: Some(v),
                partner: Some(elder),
                persistence_oriented: values[v] - values[y],
            });
            uf.parent[y] = elder;
        }
        uf.parent[v] = elder;
    }
    pairs.push(SweepPair {
        extremum: order[0],
        saddle: None,
        partner: None,
        persistence_oriented: f64::INFINITY,
    });
    pairs
}

/// Extremum/saddle pairs of the sublevel (minima) or superlevel (maxima)
/// merge tree, sorted by extremum vertex.
pub fn persistence_pairs(
    step: &[f64],
    domain: &GridDomain,
    kind: ExtremumKind,
) -> Result<Vec<PersistencePair>> {
    check_len(step, domain)?;
    let values = oriented(step, kind);
    let mut out: Vec<PersistencePair> = sweep(&values, domain)
        .into_iter()
        .map(|p| PersistencePair {
            extremum: p.extremum,
            saddle: p.saddle,
            persistence: p.persistence_oriented,
        })
        .collect();
    out.sort_by_key(|p| p.extremum);
    Ok(out)
}

/// Scalar range used to turn a percentage threshold into an absolute one.
pub fn step_range(step: &[f64]) -> f64 {
    let (lo, hi) = step
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    hi - lo
}

/// Cancels extrema with persistence below `threshold_pct` percent of the
/// step's scalar range.
pub fn simplify(
    labeling: &ManifoldLabeling,
    step: &[f64],
    domain: &GridDomain,
    threshold_pct: f64,
) -> Result<ManifoldLabeling> {
    simplify_with_range(labeling, step, domain, threshold_pct, step_range(step))
}

/// Like [`simplify`] with an explicit scalar range (e.g. series-global).
///
/// A cancelled extremum's manifold is relabeled to the elder extremum it
/// merged into, following the chain until a survivor is reached.
pub fn simplify_with_range(
    labeling: &ManifoldLabeling,
    step: &[f64],
    domain: &GridDomain,
    threshold_pct: f64,
    range: f64,
) -> Result<ManifoldLabeling> {
    if !(0.0..=100.0).contains(&threshold_pct) {
        return Err(MorseError::Threshold(threshold_pct));
    }
    check_len(step, domain)?;
    if labeling.vertex_count() != step.len() {
        return Err(MorseError::Mismatch("vertex count differs".into()));
    }
    let kind = labeling.extremum_kind();
    let values = oriented(step, kind);
    let cutoff = threshold_pct / 100.0 * range;

    let pairs = sweep(&values, domain);
    let n = values.len();
    // partner vertex of every cancelled extremum vertex
    let mut merged_into = vec![usize::MAX; n];
    for p in &pairs {
        if p.persistence_oriented < cutoff {
            if let Some(partner) = p.partner {
                merged_into[p.extremum] = partner;
            }
        }
    }

    let old = labeling.extrema();
    for e in old {
        if e.vertex >= n || labeling.label(e.vertex) != e.id {
            return Err(MorseError::Mismatch(format!("extremum {} misplaced", e.id)));
        }
    }

    let mut remap = vec![usize::MAX; old.len()];
    let mut survivors = Vec::new();
    for e in old {
        if merged_into[e.vertex] == usize::MAX {
            remap[e.id] = survivors.len();
            survivors.push(Extremum {
                id: survivors.len(),
                ..e.clone()
            });
        }
    }
    for e in old {
        if remap[e.id] != usize::MAX {
            continue;
        }
        let mut v = e.vertex;
        while merged_into[v] != usize::MAX {
            v = merged_into[v];
        }
        remap[e.id] = remap[labeling.label(v)];
    }
    let label = labeling.labels().iter().map(|&l| remap[l]).collect();
    ManifoldLabeling::from_parts(kind, label, survivors)
}
