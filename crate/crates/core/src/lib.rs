//! Extrema tracking for time-varying scalar fields on regular grids.
//!
//! Each time step is reduced to its extrema and their ascending
//! (minima) or descending (maxima) manifolds. Consecutive steps are then
//! related through overlap matrices, either by sampling a neighborhood
//! around every extremum or by intersecting whole manifolds, and the
//! row-normalized correspondence matrices are assembled into a tracking
//! graph.
//!
//! ```no_run
//! use xtrack::prelude::*;
//!
//! let series = synth::generate(&synth::ridge_script()).unwrap();
//! let domain = series.domain();
//! let a = label_manifolds(series.step(0), domain, ExtremumKind::Minimum).unwrap();
//! let b = label_manifolds(series.step(1), domain, ExtremumKind::Minimum).unwrap();
//! let (forward, backward) = manifold_overlap(&a, &b).unwrap();
//! let c = normalize(&forward);
//! # let _ = (backward, c);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod correspond;
pub mod features;
pub mod field;
pub mod morse;
pub mod pipeline;
pub mod sparse;
pub mod synth;
pub mod trackgraph;

pub mod prelude {
    pub use crate::correspond::{
        binary_correspondence, binary_overlap, manifold_overlap, normalize, overlap_pair,
        sampling_neighborhood, sampling_overlap, CorrespondenceMatrix, Direction, DistanceMode,
        Method, OverlapMatrix, Sampling, Strategy,
    };
    pub use crate::features::{
        feature_correspondence, feature_denominators, feature_overlap, FeatureSet,
    };
    pub use crate::field::{GridDomain, InputFormat, ScalarFieldSeries};
    pub use crate::morse::{
        label_manifolds, persistence_pairs, simplify, Extremum, ExtremumKind, ManifoldLabeling,
    };
    pub use crate::synth;
    pub use crate::trackgraph::{
        assemble, semantic_filter, threshold_filter, ConnectivityPolicy, Require,
        SemanticPredicate, Strength, TrackingGraph,
    };
}
