//! Time-layered tracking graphs built from correspondence matrices.
//!
//! Track ids are propagated along edges in `(t, id)` order. Every node picks
//! its strongest incoming edge (ties go to the lower predecessor id). A
//! predecessor hands its track id to the strongest of the nodes that picked
//! it (ties go to the lower node id); every other node, including nodes
//! without predecessors, opens a fresh track. Fresh ids are handed out in
//! `(t, id)` order starting from zero.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::correspond::CorrespondenceMatrix;
use crate::features::FeatureSet;
use crate::field::GridDomain;
use crate::morse::{ExtremumKind, ManifoldLabeling};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("layer {t}: {message}")]
    Dimension { t: usize, message: String },
    #[error("invalid filter: {0}")]
    Filter(String),
    #[error("graph document: {0}")]
    Parse(#[from] serde_json::Error),
}

pub type Result<T, E = GraphError> = std::result::Result<T, E>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Extremum,
    Feature,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub t: usize,
    pub id: usize,
    pub kind: NodeKind,
    pub vertex: usize,
    pub value: f64,
    pub pos: Vec<f64>,
    pub track: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub t: usize,
    pub i: usize,
    pub j: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pf: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pb: Option<f64>,
    pub strength: f64,
}

impl Edge {
    fn present(&self) -> impl Iterator<Item = f64> {
        self.pf.into_iter().chain(self.pb)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strength {
    Max,
    Avg,
    Min,
}

impl Strength {
    /// Combines the present directional probabilities.
    pub fn combine(self, pf: Option<f64>, pb: Option<f64>) -> f64 {
        let present: Vec<f64> = pf.into_iter().chain(pb).collect();
        match self {
            Strength::Max => present.iter().copied().fold(0.0, f64::max),
            Strength::Min => present.iter().copied().reduce(f64::min).unwrap_or(0.0),
            Strength::Avg if present.is_empty() => 0.0,
            Strength::Avg => present.iter().sum::<f64>() / present.len() as f64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConnectivityPolicy {
    /// Require both directions to be non-zero.
    pub bidirectional: bool,
    pub strength: Strength,
}

impl Default for ConnectivityPolicy {
    fn default() -> Self {
        Self {
            bidirectional: true,
            strength: Strength::Max,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Require {
    Any,
    Both,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub persistence_pct: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub require: Option<Require>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphMeta {
    pub strategy: String,
    pub policy: ConnectivityPolicy,
    pub thresholds: Thresholds,
    /// Echo of the configuration that produced the graph.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub config: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackingGraph {
    pub meta: GraphMeta,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

/// Attributes of a node before track ids are known.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeSpec {
    pub kind: NodeKind,
    pub vertex: usize,
    pub value: f64,
    pub pos: Vec<f64>,
}

/// One layer of extremum nodes per labeling.
pub fn extremum_layers(labelings: &[ManifoldLabeling], domain: &GridDomain) -> Vec<Vec<NodeSpec>> {
    labelings
        .iter()
        .map(|l| {
            l.extrema()
                .iter()
                .map(|e| NodeSpec {
                    kind: NodeKind::Extremum,
                    vertex: e.vertex,
                    value: e.value,
                    pos: domain.position(e.vertex),
                })
                .collect()
        })
        .collect()
}

/// One layer of feature nodes per step; a feature is placed at its most
/// extreme member.
pub fn feature_layers(
    labelings: &[ManifoldLabeling],
    features: &[FeatureSet],
    domain: &GridDomain,
) -> Vec<Vec<NodeSpec>> {
    labelings
        .iter()
        .zip(features)
        .map(|(l, fs)| {
            fs.features
                .iter()
                .map(|f| {
                    let rep = f
                        .extrema
                        .iter()
                        .map(|&i| &l.extrema()[i])
                        .reduce(|a, b| {
                            let b_wins = match l.extremum_kind() {
                                ExtremumKind::Minimum => b.value < a.value,
                                ExtremumKind::Maximum => b.value > a.value,
                            };
                            if b_wins {
                                b
                            } else {
                                a
                            }
                        })
                        .expect("validated feature is non-empty");
                    NodeSpec {
                        kind: NodeKind::Feature,
                        vertex: rep.vertex,
                        value: rep.value,
                        pos: domain.position(rep.vertex),
                    }
                })
                .collect()
        })
        .collect()
}

/// Builds the graph. `forward[t]` maps step `t` to `t + 1` (rows at `t`),
/// `backward[t]` maps `t + 1` back to `t` (rows at `t + 1`).
pub fn assemble(
    layers: Vec<Vec<NodeSpec>>,
    forward: &[CorrespondenceMatrix],
    backward: &[CorrespondenceMatrix],
    policy: ConnectivityPolicy,
    strategy: &str,
) -> Result<TrackingGraph> {
    let pairs = layers.len().saturating_sub(1);
    if forward.len() != pairs || backward.len() != pairs {
        return Err(GraphError::Dimension {
            t: 0,
            message: format!(
                "{} layers need {pairs} matrices per direction, got {} forward and {} backward",
                layers.len(),
                forward.len(),
                backward.len()
            ),
        });
    }
    for t in 0..pairs {
        let (here, next) = (layers[t].len(), layers[t + 1].len());
        if (forward[t].rows(), forward[t].cols()) != (here, next) {
            return Err(GraphError::Dimension {
                t,
                message: format!(
                    "forward matrix is {}x{}, layers are {here} and {next}",
                    forward[t].rows(),
                    forward[t].cols()
                ),
            });
        }
        if (backward[t].rows(), backward[t].cols()) != (next, here) {
            return Err(GraphError::Dimension {
                t: t + 1,
                message: format!(
                    "backward matrix is {}x{}, layers are {next} and {here}",
                    backward[t].rows(),
                    backward[t].cols()
                ),
            });
        }
    }

    let nodes = layers
        .into_iter()
        .enumerate()
        .flat_map(|(t, layer)| {
            layer.into_iter().enumerate().map(move |(id, s)| Node {
                t,
                id,
                kind: s.kind,
                vertex: s.vertex,
                value: s.value,
                pos: s.pos,
                track: 0,
            })
        })
        .collect();

    let mut edges = Vec::new();
    for t in 0..pairs {
        let mut both: BTreeMap<(usize, usize), (Option<f64>, Option<f64>)> = BTreeMap::new();
        for (i, j, p) in forward[t].probabilities.iter().filter(|e| e.2 > 0.0) {
            both.entry((i, j)).or_default().0 = Some(p);
        }
        for (j, i, p) in backward[t].probabilities.iter().filter(|e| e.2 > 0.0) {
            both.entry((i, j)).or_default().1 = Some(p);
        }
        for ((i, j), (pf, pb)) in both {
            if policy.bidirectional && (pf.is_none() || pb.is_none()) {
                continue;
            }
            edges.push(Edge {
                t,
                i,
                j,
                pf,
                pb,
                strength: policy.strength.combine(pf, pb),
            });
        }
    }

    let mut g = TrackingGraph {
        meta: GraphMeta {
            strategy: strategy.to_string(),
            policy,
            thresholds: Thresholds::default(),
            config: BTreeMap::new(),
        },
        nodes,
        edges,
    };
    g.recompute_tracks();
    Ok(g)
}

impl TrackingGraph {
    pub fn node(&self, t: usize, id: usize) -> Option<&Node> {
        self.nodes.iter().find(|n| n.t == t && n.id == id)
    }

    pub fn edge(&self, t: usize, i: usize, j: usize) -> Option<&Edge> {
        self.edges.iter().find(|e| e.t == t && e.i == i && e.j == j)
    }

    pub fn track_count(&self) -> usize {
        let mut ids: Vec<u64> = self.nodes.iter().map(|n| n.track).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }

    /// Re-derives track ids from the current nodes and edges.
    pub fn recompute_tracks(&mut self) {
        self.nodes.sort_by_key(|n| (n.t, n.id));
        self.edges.sort_by_key(|e| (e.t, e.i, e.j));
        let index: HashMap<(usize, usize), usize> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(k, n)| ((n.t, n.id), k))
            .collect();

        // strongest incoming edge per node: (predecessor id, strength)
        let mut best_in: HashMap<usize, (usize, f64)> = HashMap::new();
        for e in &self.edges {
            let Some(&to) = index.get(&(e.t + 1, e.j)) else {
                continue;
            };
            if !index.contains_key(&(e.t, e.i)) {
                continue;
            }
            match best_in.get(&to) {
                Some(&(_, s)) if s >= e.strength => {}
                _ => {
                    best_in.insert(to, (e.i, e.strength));
                }
            }
        }
        // per predecessor, the strongest claimant (edges are in (i, j)
        // order, so the first maximum found is the lowest id)
        let mut heir: HashMap<usize, (usize, f64)> = HashMap::new();
        for (k, n) in self.nodes.iter().enumerate() {
            if let Some(&(pred, s)) = best_in.get(&k) {
                let p = index[&(n.t - 1, pred)];
                match heir.get(&p) {
                    Some(&(_, hs)) if hs >= s => {}
                    _ => {
                        heir.insert(p, (k, s));
                    }
                }
            }
        }

        let mut fresh = 0u64;
        for k in 0..self.nodes.len() {
            let n = &self.nodes[k];
            let inherited = best_in.get(&k).and_then(|&(pred, _)| {
                let p = index[&(n.t - 1, pred)];
                (heir.get(&p).map(|h| h.0) == Some(k)).then(|| self.nodes[p].track)
            });
            self.nodes[k].track = inherited.unwrap_or_else(|| {
                fresh += 1;
                fresh - 1
            });
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Layered Graphviz document; see [`probability_bin`] for edge widths.
    pub fn to_dot(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "// tracking graph: strategy={}", self.meta.strategy);
        let _ = writeln!(
            out,
            "// policy: bidirectional={} strength={:?}",
            self.meta.policy.bidirectional, self.meta.policy.strength
        );
        out.push_str("// legend: edge penwidth encodes probability bins\n");
        for bin in 1..=4u8 {
            let hi = f64::from(bin) * 0.25;
            let _ = writeln!(
                out,
                "//   bin {bin}: ({:.2}, {:.2}] penwidth {}",
                hi - 0.25,
                hi,
                bin_penwidth(bin)
            );
        }
        out.push_str("//   node fill color: track id\n");
        out.push_str("digraph tracking {\n");
        out.push_str("  rankdir=LR;\n");
        out.push_str("  node [shape=circle, style=filled, fontsize=10];\n");
        let mut t_prev = None;
        for n in &self.nodes {
            if t_prev != Some(n.t) {
                if t_prev.is_some() {
                    out.push_str("  }\n");
                }
                let _ = writeln!(out, "  subgraph t{} {{\n    rank=same;", n.t);
                t_prev = Some(n.t);
            }
            let _ = writeln!(
                out,
                "    \"n{}_{}\" [label=\"{}\", fillcolor=\"{}\", tooltip=\"t={} value={}\"];",
                n.t,
                n.id,
                n.id,
                track_color(n.track),
                n.t,
                n.value
            );
        }
        if t_prev.is_some() {
            out.push_str("  }\n");
        }
        for e in &self.edges {
            let bin = probability_bin(e.strength);
            let dir = match (e.pf.is_some(), e.pb.is_some()) {
                (true, true) => "both",
                (true, false) => "forward",
                _ => "backward",
            };
            let _ = writeln!(
                out,
                "  \"n{}_{}\" -> \"n{}_{}\" [penwidth={}, tooltip=\"p={:.3} bin {} {}\"];",
                e.t,
                e.i,
                e.t + 1,
                e.j,
                bin_penwidth(bin),
                e.strength,
                bin,
                dir
            );
        }
        out.push_str("}\n");
        out
    }
}

/// Quartile bin of a probability: (0, .25] -> 1, ..., (.75, 1] -> 4.
/// Zero falls into bin 1.
pub fn probability_bin(p: f64) -> u8 {
    if p <= 0.25 {
        1
    } else if p <= 0.5 {
        2
    } else if p <= 0.75 {
        3
    } else {
        4
    }
}

pub fn bin_penwidth(bin: u8) -> &'static str {
    match bin {
        1 => "0.5",
        2 => "1.5",
        3 => "3",
        _ => "5",
    }
}

fn track_color(track: u64) -> &'static str {
    const PALETTE: [&str; 12] = [
        "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
        "#bcbd22", "#17becf", "#aec7e8", "#ffbb78",
    ];
    PALETTE[(track % PALETTE.len() as u64) as usize]
}

/// Keeps edges whose probabilities exceed `p_min`: any present direction,
/// or both directions (which must then both be present).
pub fn threshold_filter(g: &TrackingGraph, p_min: f64, require: Require) -> Result<TrackingGraph> {
    if !(0.0..=1.0).contains(&p_min) {
        return Err(GraphError::Filter(format!("p_min {p_min} outside [0, 1]")));
    }
    let mut out = g.clone();
    out.edges.retain(|e| match require {
        Require::Any => e.present().any(|p| p > p_min),
        Require::Both => e.pf.is_some_and(|p| p > p_min) && e.pb.is_some_and(|p| p > p_min),
    });
    out.meta.thresholds.p_min = Some(p_min);
    out.meta.thresholds.require = Some(require);
    out.recompute_tracks();
    Ok(out)
}

/// Domain-specific pruning. Absent fields pass everything.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SemanticPredicate {
    /// Inclusive `[lo, hi]` range of node values.
    pub value_range: Option<(f64, f64)>,
    /// Inclusive world-space box `(min corner, max corner)`.
    pub spatial_box: Option<(Vec<f64>, Vec<f64>)>,
    /// Maximum world distance between the endpoints of an edge.
    pub max_jump: Option<f64>,
}

impl SemanticPredicate {
    pub fn is_empty(&self) -> bool {
        self.value_range.is_none() && self.spatial_box.is_none() && self.max_jump.is_none()
    }

    fn validate(&self, rank: usize) -> Result<()> {
        if let Some((lo, hi)) = self.value_range {
            if !(lo <= hi) {
                return Err(GraphError::Filter(format!(
                    "value range [{lo}, {hi}] inverted"
                )));
            }
        }
        if let Some((lo, hi)) = &self.spatial_box {
            if lo.len() != rank || hi.len() != rank {
                return Err(GraphError::Filter(format!(
                    "box corners must have {rank} entries"
                )));
            }
            if lo.iter().zip(hi).any(|(a, b)| !(a <= b)) {
                return Err(GraphError::Filter("box corners inverted".into()));
            }
        }
        if let Some(j) = self.max_jump {
            if !(j >= 0.0) {
                return Err(GraphError::Filter(format!("max jump {j} is negative")));
            }
        }
        Ok(())
    }

    fn keeps_node(&self, n: &Node) -> bool {
        let in_range = self
            .value_range
            .is_none_or(|(lo, hi)| (lo..=hi).contains(&n.value));
        let in_box = self.spatial_box.as_ref().is_none_or(|(lo, hi)| {
            n.pos
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(x, (a, b))| (*a..=*b).contains(x))
        });
        in_range && in_box
    }
}

pub fn semantic_filter(
    g: &TrackingGraph,
    domain: &GridDomain,
    predicate: &SemanticPredicate,
) -> Result<TrackingGraph> {
    predicate.validate(domain.rank())?;
    let mut out = g.clone();
    out.nodes.retain(|n| predicate.keeps_node(n));
    let pos: HashMap<(usize, usize), &[f64]> = out
        .nodes
        .iter()
        .map(|n| ((n.t, n.id), n.pos.as_slice()))
        .collect();
    out.edges.retain(|e| {
        let (Some(a), Some(b)) = (pos.get(&(e.t, e.i)), pos.get(&(e.t + 1, e.j))) else {
            return false;
        };
        predicate
            .max_jump
            .is_none_or(|jump| domain.world_distance(a, b) <= jump)
    });
    out.recompute_tracks();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correspond::{Direction, Strategy};
    use crate::sparse::Csr;

    fn cm(
        rows: usize,
        cols: usize,
        entries: &[(usize, usize, f64)],
        dir: Direction,
    ) -> CorrespondenceMatrix {
        CorrespondenceMatrix {
            direction: dir,
            strategy: Strategy::ManifoldOverlap,
            probabilities: Csr::from_triplets(rows, cols, entries.iter().copied()),
        }
    }

    fn layer(n: usize, t: usize) -> Vec<NodeSpec> {
        (0..n)
            .map(|i| NodeSpec {
                kind: NodeKind::Extremum,
                vertex: i,
                value: (10 * t + i) as f64,
                pos: vec![i as f64, t as f64],
            })
            .collect()
    }

    fn identity(n: usize, dir: Direction) -> CorrespondenceMatrix {
        let e: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        cm(n, n, &e, dir)
    }

    #[test]
    fn identity_chain_gives_parallel_tracks() {
        let steps = 4;
        let layers = (0..steps).map(|t| layer(3, t)).collect();
        let f: Vec<_> = (0..steps - 1)
            .map(|_| identity(3, Direction::Forward))
            .collect();
        let b: Vec<_> = (0..steps - 1)
            .map(|_| identity(3, Direction::Backward))
            .collect();
        let g = assemble(layers, &f, &b, ConnectivityPolicy::default(), "test").unwrap();
        assert_eq!(g.edges.len(), 9);
        assert!(g.edges.iter().all(|e| e.strength == 1.0 && e.i == e.j));
        assert_eq!(g.track_count(), 3);
        for n in &g.nodes {
            assert_eq!(n.track, n.id as u64);
        }
    }

    #[test]
    fn one_sided_entries_follow_policy() {
        let layers = vec![layer(1, 0), layer(2, 1)];
        let f = vec![cm(1, 2, &[(0, 0, 0.7), (0, 1, 0.3)], Direction::Forward)];
        let b = vec![cm(2, 1, &[(0, 0, 1.0)], Direction::Backward)];
        let bi = assemble(layers.clone(), &f, &b, ConnectivityPolicy::default(), "x").unwrap();
        assert_eq!(bi.edges.len(), 1);
        assert_eq!(bi.edges[0].strength, 1.0);

        let any = ConnectivityPolicy {
            bidirectional: false,
            strength: Strength::Max,
        };
        let g = assemble(layers.clone(), &f, &b, any, "x").unwrap();
        let e = g.edge(0, 0, 1).unwrap();
        assert_eq!((e.pf, e.pb, e.strength), (Some(0.3), None, 0.3));
        let avg = assemble(
            layers.clone(),
            &f,
            &b,
            ConnectivityPolicy {
                bidirectional: false,
                strength: Strength::Avg,
            },
            "x",
        )
        .unwrap();
        assert!((avg.edge(0, 0, 0).unwrap().strength - 0.85).abs() < 1e-15);
        assert_eq!(avg.edge(0, 0, 1).unwrap().strength, 0.3);
        let min = assemble(
            layers,
            &f,
            &b,
            ConnectivityPolicy {
                bidirectional: false,
                strength: Strength::Min,
            },
            "x",
        )
        .unwrap();
        assert_eq!(min.edge(0, 0, 0).unwrap().strength, 0.7);
        // split: node 0 keeps the track, node 1 opens a new one
        assert_eq!(g.node(1, 0).unwrap().track, 0);
        assert_eq!(g.node(1, 1).unwrap().track, 1);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let layers = vec![layer(2, 0), layer(2, 1)];
        let f = vec![identity(3, Direction::Forward)];
        let b = vec![identity(2, Direction::Backward)];
        assert!(matches!(
            assemble(layers.clone(), &f, &b, ConnectivityPolicy::default(), "x"),
            Err(GraphError::Dimension { .. })
        ));
        assert!(assemble(layers, &[], &[], ConnectivityPolicy::default(), "x").is_err());
    }

    #[test]
    fn merge_tie_goes_to_lower_predecessor() {
        let layers = vec![layer(2, 0), layer(1, 1)];
        let f = vec![cm(2, 1, &[(0, 0, 1.0), (1, 0, 1.0)], Direction::Forward)];
        let b = vec![cm(1, 2, &[(0, 0, 0.5), (0, 1, 0.5)], Direction::Backward)];
        let g = assemble(layers, &f, &b, ConnectivityPolicy::default(), "x").unwrap();
        assert_eq!(g.node(1, 0).unwrap().track, 0);
    }

    fn sample_graph() -> TrackingGraph {
        let layers = vec![layer(2, 0), layer(2, 1), layer(1, 2)];
        let f = vec![
            cm(
                2,
                2,
                &[(0, 0, 0.8), (0, 1, 0.2), (1, 1, 1.0)],
                Direction::Forward,
            ),
            cm(2, 1, &[(0, 0, 1.0), (1, 0, 1.0)], Direction::Forward),
        ];
        let b = vec![
            cm(
                2,
                2,
                &[(0, 0, 1.0), (1, 0, 0.4), (1, 1, 0.6)],
                Direction::Backward,
            ),
            cm(1, 2, &[(0, 0, 0.3), (0, 1, 0.7)], Direction::Backward),
        ];
        assemble(
            layers,
            &f,
            &b,
            ConnectivityPolicy::default(),
            "manifold-overlap",
        )
        .unwrap()
    }

    #[test]
    fn threshold_semantics() {
        let g = sample_graph();
        assert_eq!(g.edges.len(), 5);
        let same = threshold_filter(&g, 0.0, Require::Any).unwrap();
        assert_eq!(same.edges, g.edges);
        let one = threshold_filter(&g, 1.0, Require::Any).unwrap();
        assert!(one.edges.is_empty());
        let strict = threshold_filter(&g, 0.99, Require::Any).unwrap();
        assert!(strict.edges.iter().all(|e| e.present().any(|p| p == 1.0)));
        let both = threshold_filter(&g, 0.25, Require::Both).unwrap();
        // (0,0,1): pf 0.2 fails; (1,0,0): pb 0.3 passes with pf 1.0
        assert!(both.edge(0, 0, 1).is_none());
        assert!(both.edge(1, 0, 0).is_some());
        assert!(threshold_filter(&g, 1.5, Require::Any).is_err());
        for p in [0.1, 0.25, 0.5] {
            for r in [Require::Any, Require::Both] {
                let once = threshold_filter(&g, p, r).unwrap();
                assert_eq!(threshold_filter(&once, p, r).unwrap(), once);
            }
        }
    }

    #[test]
    fn semantic_filters() {
        let g = sample_graph();
        let domain = GridDomain::regular(&[4, 4]).unwrap();
        let empty = SemanticPredicate::default();
        assert_eq!(semantic_filter(&g, &domain, &empty).unwrap(), g);

        let zero_jump = SemanticPredicate {
            max_jump: Some(0.0),
            ..Default::default()
        };
        let z = semantic_filter(&g, &domain, &zero_jump).unwrap();
        // node positions differ in the t coordinate, so nothing survives
        assert!(z.edges.is_empty());
        assert_eq!(z.nodes.len(), g.nodes.len());

        let values = SemanticPredicate {
            value_range: Some((0.0, 10.5)),
            ..Default::default()
        };
        let v = semantic_filter(&g, &domain, &values).unwrap();
        assert_eq!(v.nodes.len(), 3);
        assert!(v.edges.iter().all(|e| e.t == 0 && e.j == 0));

        let inverted = SemanticPredicate {
            value_range: Some((2.0, 1.0)),
            ..Default::default()
        };
        assert!(semantic_filter(&g, &domain, &inverted).is_err());
        let bad_box = SemanticPredicate {
            spatial_box: Some((vec![1.0, 1.0], vec![0.0, 2.0])),
            ..Default::default()
        };
        assert!(semantic_filter(&g, &domain, &bad_box).is_err());

        // node-only and edge-only predicates commute
        let jump = SemanticPredicate {
            max_jump: Some(1.2),
            ..Default::default()
        };
        let a = semantic_filter(
            &semantic_filter(&g, &domain, &values).unwrap(),
            &domain,
            &jump,
        )
        .unwrap();
        let b = semantic_filter(
            &semantic_filter(&g, &domain, &jump).unwrap(),
            &domain,
            &values,
        )
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(semantic_filter(&a, &domain, &values).unwrap(), a);
    }

    #[test]
    fn json_and_dot_export() {
        let g = sample_graph();
        let json = g.to_json();
        let back = TrackingGraph::from_json(&json).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.to_json(), json);
        assert!(!json.contains("\"pb\": null"));

        let dot = g.to_dot();
        assert!(dot.starts_with("// tracking graph"));
        assert_eq!(dot.matches(" -> ").count(), g.edges.len());
        assert!(dot.contains("rank=same"));

        let empty = TrackingGraph {
            meta: g.meta.clone(),
            nodes: vec![],
            edges: vec![],
        };
        assert_eq!(TrackingGraph::from_json(&empty.to_json()).unwrap(), empty);
        assert!(empty.to_dot().trim_end().ends_with('}'));
    }

    #[test]
    fn bins() {
        assert_eq!(probability_bin(0.8), 4);
        assert_eq!(probability_bin(0.75), 3);
        assert_eq!(probability_bin(0.25), 1);
        assert_eq!(probability_bin(0.2500001), 2);
        assert_eq!(probability_bin(1.0), 4);
    }
}
