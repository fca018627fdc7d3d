//! End-to-end orchestration: load, label, simplify, correspond, lift to
//! features, assemble, filter and write.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::correspond::{
    normalize, overlap_pair, CorrespondError, CorrespondenceMatrix, Method, OverlapDocument,
    PairOverlap, Strategy,
};
use crate::features::{lift, FeatureError, FeatureSet};
use crate::field::{self, FieldError, InputFormat, ScalarFieldSeries};
use crate::morse::{
    label_manifolds, simplify_with_range, step_range, ExtremumKind, ManifoldLabeling, MorseError,
};
use crate::trackgraph::{
    assemble, extremum_layers, feature_layers, semantic_filter, threshold_filter,
    ConnectivityPolicy, GraphError, Require, SemanticPredicate, Strength, TrackingGraph,
};

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Morse(#[from] MorseError),
    #[error(transparent)]
    Correspond(#[from] CorrespondError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{stage} failed{}: {source}", at_step(*.t))]
    Stage {
        stage: &'static str,
        t: Option<usize>,
        #[source]
        source: StageError,
    },
}

fn at_step(t: Option<usize>) -> String {
    t.map(|t| format!(" at t={t}")).unwrap_or_default()
}

impl PipelineError {
    fn stage(stage: &'static str, t: Option<usize>) -> impl FnOnce(StageError) -> Self {
        move |source| PipelineError::Stage { stage, t, source }
    }

    /// 2 config error, 3 data error, 4 internal failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Stage { source, .. } => match source {
                StageError::Field(_) | StageError::Feature(_) | StageError::Io(_) => 3,
                _ => 4,
            },
        }
    }
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormatChoice {
    /// `.csv` by extension, otherwise raw with the dtype from the header.
    Auto,
    Fixed(InputFormat),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub inputs: Vec<PathBuf>,
    pub format: FormatChoice,
    pub kind: ExtremumKind,
    pub persistence_pct: f64,
    /// Simplify against the series-wide scalar range instead of per step.
    pub global_range: bool,
    pub strategy: Strategy,
    pub d: f64,
    pub lattice_units: bool,
    pub bidirectional: bool,
    pub strength: Strength,
    /// `None` picks the strategy default.
    pub p_min: Option<f64>,
    pub require: Require,
    pub predicate: SemanticPredicate,
    pub features: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub write_labels: bool,
    pub write_matrices: bool,
    /// 0 = rayon default.
    pub threads: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            inputs: Vec::new(),
            format: FormatChoice::Auto,
            kind: ExtremumKind::Minimum,
            persistence_pct: 0.5,
            global_range: false,
            strategy: Strategy::ManifoldOverlap,
            d: 2.0,
            lattice_units: false,
            bidirectional: true,
            strength: Strength::Max,
            p_min: None,
            require: Require::Any,
            predicate: SemanticPredicate::default(),
            features: None,
            out_dir: PathBuf::from("xtrack-out"),
            write_labels: false,
            write_matrices: true,
            threads: 0,
        }
    }
}

/// Probability cutoff used when none is configured.
pub fn default_p_min(strategy: Strategy) -> f64 {
    match strategy {
        Strategy::ManifoldOverlap => 0.25,
        Strategy::SamplingEuclidean | Strategy::SamplingCombinatorial => 0.1,
        Strategy::Binary => 0.0,
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(PipelineError::Config(format!(
            "{key}: expected a boolean, got `{v}`"
        ))),
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim()
        .parse()
        .map_err(|_| PipelineError::Config(format!("{key}: expected a number, got `{v}`")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|x| parse_f64(key, x)).collect()
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl PipelineConfig {
    /// Applies one `key = value` setting. Keys match the long command-line
    /// flags.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "input" => self.inputs = value.split(',').map(|s| PathBuf::from(s.trim())).collect(),
            "format" => {
                self.format = match value {
                    "auto" => FormatChoice::Auto,
                    "raw-f32" => FormatChoice::Fixed(InputFormat::RawF32),
                    "raw-f64" => FormatChoice::Fixed(InputFormat::RawF64),
                    "csv" => FormatChoice::Fixed(InputFormat::Csv),
                    _ => return Err(PipelineError::Config(format!("unknown format `{value}`"))),
                }
            }
            "kind" => {
                self.kind = match value {
                    "min" | "minimum" | "minima" => ExtremumKind::Minimum,
                    "max" | "maximum" | "maxima" => ExtremumKind::Maximum,
                    _ => return Err(PipelineError::Config(format!("unknown kind `{value}`"))),
                }
            }
            "persistence-pct" => self.persistence_pct = parse_f64(key, value)?,
            "global-range" => self.global_range = parse_bool(key, value)?,
            "strategy" => self.strategy = value.parse().map_err(PipelineError::Config)?,
            "d" => self.d = parse_f64(key, value)?,
            "lattice-units" => self.lattice_units = parse_bool(key, value)?,
            "bidirectional" => self.bidirectional = parse_bool(key, value)?,
            "strength" => {
                self.strength = match value {
                    "max" => Strength::Max,
                    "avg" => Strength::Avg,
                    "min" => Strength::Min,
                    _ => return Err(PipelineError::Config(format!("unknown strength `{value}`"))),
                }
            }
            "p-min" => self.p_min = Some(parse_f64(key, value)?),
            "require" => {
                self.require = match value {
                    "any" => Require::Any,
                    "both" => Require::Both,
                    _ => return Err(PipelineError::Config(format!("unknown require `{value}`"))),
                }
            }
            "value-range" => {
                let xs = parse_list(key, value)?;
                let [lo, hi] = xs[..] else {
                    return Err(PipelineError::Config("value-range needs `lo,hi`".into()));
                };
                self.predicate.value_range = Some((lo, hi));
            }
            "box-min" | "box-max" => {
                let xs = parse_list(key, value)?;
                let (lo, hi) = self.predicate.spatial_box.get_or_insert_with(|| {
                    (
                        vec![f64::NEG_INFINITY; xs.len()],
                        vec![f64::INFINITY; xs.len()],
                    )
                });
                if key == "box-min" {
                    *lo = xs;
                } else {
                    *hi = xs;
                }
            }
            "max-jump" => self.predicate.max_jump = Some(parse_f64(key, value)?),
            "features" => self.features = Some(PathBuf::from(value)),
            "out" => self.out_dir = PathBuf::from(value),
            "write-labels" => self.write_labels = parse_bool(key, value)?,
            "write-matrices" => self.write_matrices = parse_bool(key, value)?,
            "threads" => {
                self.threads = value
                    .parse()
                    .map_err(|_| PipelineError::Config(format!("threads: bad count `{value}`")))?
            }
            _ => return Err(PipelineError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Parses a flat `key = value` file (`#` starts a comment).
    pub fn apply_file_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                PipelineError::Config(format!("line {}: expected `key = value`", n + 1))
            })?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn effective_p_min(&self) -> f64 {
        self.p_min.unwrap_or_else(|| default_p_min(self.strategy))
    }

    pub fn method(&self) -> Method {
        Method {
            strategy: self.strategy,
            d: self.d,
            lattice_units: self.lattice_units,
        }
    }

    pub fn policy(&self) -> ConnectivityPolicy {
        ConnectivityPolicy {
            bidirectional: self.bidirectional,
            strength: self.strength,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs.is_empty() {
            return Err(PipelineError::Config("no input given".into()));
        }
        if !(0.0..=100.0).contains(&self.persistence_pct) {
            return Err(PipelineError::Config(format!(
                "persistence-pct {} outside [0, 100]",
                self.persistence_pct
            )));
        }
        if !(self.d >= 0.0) {
            return Err(PipelineError::Config(format!("d {} is negative", self.d)));
        }
        let p = self.effective_p_min();
        if !(0.0..=1.0).contains(&p) {
            return Err(PipelineError::Config(format!("p-min {p} outside [0, 1]")));
        }
        if let Some((lo, hi)) = self.predicate.value_range {
            if !(lo <= hi) {
                return Err(PipelineError::Config("value-range is inverted".into()));
            }
        }
        if let Some((lo, hi)) = &self.predicate.spatial_box {
            if lo.len() != hi.len() || lo.iter().zip(hi).any(|(a, b)| !(a <= b)) {
                return Err(PipelineError::Config(
                    "box-min/box-max are inconsistent".into(),
                ));
            }
        }
        if self.predicate.max_jump.is_some_and(|j| !(j >= 0.0)) {
            return Err(PipelineError::Config("max-jump is negative".into()));
        }
        Ok(())
    }

    /// Settings echoed into output metadata. Output location and thread
    /// count are left out so reruns elsewhere stay byte-identical.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let inputs: Vec<String> = self
            .inputs
            .iter()
            .map(|p| p.display().to_string())
            .collect();
        m.insert("input".into(), inputs.join(","));
        m.insert(
            "format".into(),
            match self.format {
                FormatChoice::Auto => "auto",
                FormatChoice::Fixed(InputFormat::RawF32) => "raw-f32",
                FormatChoice::Fixed(InputFormat::RawF64) => "raw-f64",
                FormatChoice::Fixed(InputFormat::Csv) => "csv",
            }
            .into(),
        );
        m.insert(
            "kind".into(),
            match self.kind {
                ExtremumKind::Minimum => "min",
                ExtremumKind::Maximum => "max",
            }
            .into(),
        );
        m.insert("persistence-pct".into(), self.persistence_pct.to_string());
        m.insert("global-range".into(), self.global_range.to_string());
        m.insert("strategy".into(), self.strategy.to_string());
        m.insert("d".into(), self.d.to_string());
        m.insert("lattice-units".into(), self.lattice_units.to_string());
        m.insert("bidirectional".into(), self.bidirectional.to_string());
        m.insert(
            "strength".into(),
            format!("{:?}", self.strength).to_lowercase(),
        );
        m.insert("p-min".into(), self.effective_p_min().to_string());
        m.insert(
            "require".into(),
            format!("{:?}", self.require).to_lowercase(),
        );
        if let Some((lo, hi)) = self.predicate.value_range {
            m.insert("value-range".into(), format!("{lo},{hi}"));
        }
        if let Some((lo, hi)) = &self.predicate.spatial_box {
            m.insert("box-min".into(), fmt_list(lo));
            m.insert("box-max".into(), fmt_list(hi));
        }
        if let Some(j) = self.predicate.max_jump {
            m.insert("max-jump".into(), j.to_string());
        }
        if let Some(f) = &self.features {
            m.insert("features".into(), f.display().to_string());
        }
        m
    }
}

fn in_pool<T: Send>(threads: usize, job: impl FnOnce() -> T + Send) -> T {
    if threads == 0 {
        return job();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(job),
        Err(e) => {
            log::warn!("falling back to the global pool: {e}");
            job()
        }
    }
}

/// Simplified labelings of every step, shared between strategies.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub series: ScalarFieldSeries,
    pub labelings: Vec<ManifoldLabeling>,
    pub timings: Vec<(String, Duration)>,
}

pub fn load_input(config: &PipelineConfig) -> Result<ScalarFieldSeries> {
    let load = PipelineError::stage("load", None);
    let first = &config.inputs[0];
    let is_csv = match config.format {
        FormatChoice::Fixed(InputFormat::Csv) => true,
        FormatChoice::Fixed(_) => false,
        FormatChoice::Auto => first
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("csv")),
    };
    let res = if is_csv {
        field::load_csv_steps(&config.inputs)
    } else {
        if config.inputs.len() != 1 {
            return Err(PipelineError::Config(
                "raw input takes exactly one file (multiple inputs are csv steps)".into(),
            ));
        }
        match config.format {
            FormatChoice::Fixed(f) => field::load_series(first, f),
            FormatChoice::Auto => field::load_raw(first, None),
        }
    };
    res.map_err(|e| load(e.into()))
}

/// Labels and simplifies every step of a series.
pub fn prepare_series(series: ScalarFieldSeries, config: &PipelineConfig) -> Result<Prepared> {
    let mut timings = Vec::new();
    let started = Instant::now();
    let global = config.global_range.then(|| {
        let (lo, hi) = series.global_range();
        hi - lo
    });
    let domain = series.domain();
    let labelings: Vec<std::result::Result<ManifoldLabeling, (usize, MorseError)>> =
        in_pool(config.threads, || {
            series
                .steps()
                .par_iter()
                .enumerate()
                .map(|(t, step)| {
                    let raw = label_manifolds(step, domain, config.kind).map_err(|e| (t, e))?;
                    let range = global.unwrap_or_else(|| step_range(step));
                    simplify_with_range(&raw, step, domain, config.persistence_pct, range)
                        .map_err(|e| (t, e))
                })
                .collect()
        });
    let labelings = labelings
        .into_iter()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|(t, e)| PipelineError::stage("label", Some(t))(e.into()))?;
    timings.push(("label".to_string(), started.elapsed()));
    log::info!(
        "labeled {} steps in {:?} ({} extrema total)",
        labelings.len(),
        started.elapsed(),
        labelings.iter().map(|l| l.extremum_count()).sum::<usize>()
    );
    Ok(Prepared {
        series,
        labelings,
        timings,
    })
}

pub fn prepare(config: &PipelineConfig) -> Result<Prepared> {
    config.validate()?;
    let started = Instant::now();
    let series = load_input(config)?;
    log::info!("loaded {} steps in {:?}", series.len(), started.elapsed());
    let mut p = prepare_series(series, config)?;
    p.timings.insert(0, ("load".to_string(), started.elapsed()));
    Ok(p)
}

/// Overlap matrices for every consecutive pair.
pub fn correspond_all(
    prepared: &Prepared,
    method: &Method,
    threads: usize,
) -> Result<Vec<PairOverlap>> {
    let domain = prepared.series.domain();
    let ls = &prepared.labelings;
    let pairs: Vec<std::result::Result<PairOverlap, (usize, CorrespondError)>> =
        in_pool(threads, || {
            (0..ls.len().saturating_sub(1))
                .into_par_iter()
                .map(|t| overlap_pair(&ls[t], &ls[t + 1], domain, method).map_err(|e| (t, e)))
                .collect()
        });
    pairs
        .into_iter()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|(t, e)| PipelineError::stage("correspond", Some(t))(e.into()))
}

fn load_features(path: &Path, prepared: &Prepared) -> Result<Vec<FeatureSet>> {
    let stage = |e: StageError| PipelineError::stage("features", None)(e);
    let text = fs::read_to_string(path).map_err(|e| stage(e.into()))?;
    let mut sets: Vec<FeatureSet> = match serde_json::from_str::<Vec<FeatureSet>>(&text) {
        Ok(v) => v,
        Err(_) => vec![FeatureSet::from_json(&text).map_err(|e| stage(e.into()))?],
    };
    sets.sort_by_key(|s| s.t);
    let n = prepared.labelings.len();
    // steps without an entry fall back to singleton features
    let mut by_t: Vec<Option<FeatureSet>> = vec![None; n];
    for s in sets {
        let t = s.t;
        if t >= n {
            return Err(stage(
                FeatureError::WrongStep {
                    want: n - 1,
                    got: t,
                }
                .into(),
            ));
        }
        s.validate(prepared.labelings[t].extremum_count())
            .map_err(|e| PipelineError::stage("features", Some(t))(e.into()))?;
        by_t[t] = Some(s);
    }
    Ok(by_t
        .into_iter()
        .enumerate()
        .map(|(t, s)| {
            s.unwrap_or_else(|| FeatureSet::singletons(t, prepared.labelings[t].extremum_count()))
        })
        .collect())
}

/// Correspondence matrices per pair: forward with rows at `t`, backward
/// with rows at `t + 1`.
pub fn correspondences(
    overlaps: &[PairOverlap],
    features: Option<&[FeatureSet]>,
) -> Result<(Vec<CorrespondenceMatrix>, Vec<CorrespondenceMatrix>)> {
    let mut forward = Vec::with_capacity(overlaps.len());
    let mut backward = Vec::with_capacity(overlaps.len());
    for (t, pair) in overlaps.iter().enumerate() {
        match features {
            None => {
                forward.push(normalize(&pair.forward));
                backward.push(normalize(&pair.backward));
            }
            Some(fs) => {
                let err = |e: FeatureError| PipelineError::stage("features", Some(t))(e.into());
                forward.push(lift(&fs[t], &fs[t + 1], &pair.forward).map_err(err)?.matrix);
                backward.push(
                    lift(&fs[t + 1], &fs[t], &pair.backward)
                        .map_err(err)?
                        .matrix,
                );
            }
        }
    }
    Ok((forward, backward))
}

/// Unfiltered graph plus the filtered one.
pub fn build_graphs(
    config: &PipelineConfig,
    prepared: &Prepared,
    overlaps: &[PairOverlap],
    features: Option<&[FeatureSet]>,
) -> Result<(TrackingGraph, TrackingGraph)> {
    let (forward, backward) = correspondences(overlaps, features)?;
    let domain = prepared.series.domain();
    let layers = match features {
        Some(fs) => feature_layers(&prepared.labelings, fs, domain),
        None => extremum_layers(&prepared.labelings, domain),
    };
    let graph_err = |e: GraphError| PipelineError::stage("graph", None)(e.into());
    let mut raw = assemble(
        layers,
        &forward,
        &backward,
        config.policy(),
        config.strategy.name(),
    )
    .map_err(graph_err)?;
    raw.meta.thresholds.persistence_pct = Some(config.persistence_pct);
    raw.meta.config = config.echo();
    let mut g =
        threshold_filter(&raw, config.effective_p_min(), config.require).map_err(graph_err)?;
    if !config.predicate.is_empty() {
        g = semantic_filter(&g, domain, &config.predicate).map_err(graph_err)?;
    }
    Ok((raw, g))
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub steps: usize,
    pub extrema: Vec<usize>,
    pub edges: usize,
    pub tracks: usize,
    pub outputs: Vec<PathBuf>,
    #[serde(skip)]
    pub timings: Vec<(String, Duration)>,
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| PipelineError::stage("write", None)(e.into()))
}

/// Runs the whole pipeline and writes its artifacts to `config.out_dir`.
pub fn run(config: &PipelineConfig) -> Result<RunSummary> {
    let prepared = prepare(config)?;
    run_prepared(config, prepared)
}

pub fn run_prepared(config: &PipelineConfig, prepared: Prepared) -> Result<RunSummary> {
    let mut timings = prepared.timings.clone();
    let started = Instant::now();
    let overlaps = correspond_all(&prepared, &config.method(), config.threads)?;
    timings.push(("correspond".to_string(), started.elapsed()));
    log::info!(
        "{} pairs correlated in {:?}",
        overlaps.len(),
        started.elapsed()
    );

    let features = match &config.features {
        Some(path) => Some(load_features(path, &prepared)?),
        None => None,
    };
    let started = Instant::now();
    let (_, graph) = build_graphs(config, &prepared, &overlaps, features.as_deref())?;
    timings.push(("graph".to_string(), started.elapsed()));

    let started = Instant::now();
    let out = &config.out_dir;
    let io = |e: std::io::Error| PipelineError::stage("write", None)(e.into());
    fs::create_dir_all(out).map_err(io)?;
    let mut outputs = Vec::new();
    if config.write_matrices {
        let dir = out.join("matrices");
        fs::create_dir_all(&dir).map_err(io)?;
        for (t, pair) in overlaps.iter().enumerate() {
            for (step, m, tag) in [
                (t, &pair.forward, "forward"),
                (t + 1, &pair.backward, "backward"),
            ] {
                let path = dir.join(format!("overlap_t{step:04}_{tag}.json"));
                let doc =
                    serde_json::to_string(&OverlapDocument::new(step, m)).expect("serializes");
                write_file(&path, doc.as_bytes())?;
                outputs.push(path);
            }
        }
    }
    if config.write_labels {
        let path = out.join("labels.xtrk");
        let labels: Vec<&[usize]> = prepared.labelings.iter().map(|l| l.labels()).collect();
        let mut buf = Vec::new();
        field::write_labels(&mut buf, prepared.series.domain(), &labels)
            .map_err(|e| PipelineError::stage("write", None)(e.into()))?;
        write_file(&path, &buf)?;
        outputs.push(path);
    }
    let json = out.join("graph.json");
    write_file(&json, graph.to_json().as_bytes())?;
    let dot = out.join("graph.dot");
    write_file(&dot, graph.to_dot().as_bytes())?;
    outputs.extend([json, dot]);
    timings.push(("write".to_string(), started.elapsed()));
    for (stage, d) in &timings {
        log::info!("stage {stage}: {d:?}");
    }

    Ok(RunSummary {
        steps: prepared.labelings.len(),
        extrema: prepared
            .labelings
            .iter()
            .map(|l| l.extremum_count())
            .collect(),
        edges: graph.edges.len(),
        tracks: graph.track_count(),
        outputs,
        timings,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyReport {
    pub strategy: Strategy,
    pub p_min: f64,
    /// Non-zeros over all forward and backward matrices.
    pub matrix_entries: usize,
    pub raw_edges: usize,
    pub filtered_edges: usize,
    pub tracks: usize,
    /// Share of the binary baseline's matrix entries also present here.
    pub binary_retention: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeComparison {
    pub t: usize,
    pub i: usize,
    pub j: usize,
    /// Filtered edge strength per strategy, in report order.
    pub strengths: Vec<Option<f64>>,
    /// Largest minus smallest present strength.
    pub spread: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub strategies: Vec<StrategyReport>,
    pub edges: Vec<EdgeComparison>,
}

fn support(ms: &[CorrespondenceMatrix]) -> HashSet<(usize, usize, usize)> {
    ms.iter()
        .enumerate()
        .flat_map(|(t, m)| m.support().into_iter().map(move |(i, j)| (t, i, j)))
        .collect()
}

/// Runs several strategies on one set of labelings. Cutoffs follow each
/// strategy's default unless `config.p_min` is set.
pub fn compare(config: &PipelineConfig, strategies: &[Strategy]) -> Result<CompareReport> {
    let prepared = prepare(config)?;
    compare_prepared(config, &prepared, strategies)
}

pub fn compare_prepared(
    config: &PipelineConfig,
    prepared: &Prepared,
    strategies: &[Strategy],
) -> Result<CompareReport> {
    if strategies.is_empty() {
        return Err(PipelineError::Config("no strategies to compare".into()));
    }
    let features = match &config.features {
        Some(path) => Some(load_features(path, prepared)?),
        None => None,
    };
    let binary_config = PipelineConfig {
        strategy: Strategy::Binary,
        ..config.clone()
    };
    let binary = correspond_all(prepared, &binary_config.method(), config.threads)?;
    let (bf, bb) = correspondences(&binary, features.as_deref())?;
    let (binary_fwd, binary_bwd) = (support(&bf), support(&bb));
    let binary_total = binary_fwd.len() + binary_bwd.len();

    let mut reports = Vec::new();
    let mut edge_map: BTreeMap<(usize, usize, usize), Vec<Option<f64>>> = BTreeMap::new();
    for (k, &strategy) in strategies.iter().enumerate() {
        let cfg = PipelineConfig {
            strategy,
            ..config.clone()
        };
        let overlaps = correspond_all(prepared, &cfg.method(), cfg.threads)?;
        let (f, b) = correspondences(&overlaps, features.as_deref())?;
        let (sf, sb) = (support(&f), support(&b));
        let kept = binary_fwd.intersection(&sf).count() + binary_bwd.intersection(&sb).count();
        let (raw, filtered) = build_graphs(&cfg, prepared, &overlaps, features.as_deref())?;
        for e in &filtered.edges {
            edge_map
                .entry((e.t, e.i, e.j))
                .or_insert_with(|| vec![None; strategies.len()])[k] = Some(e.strength);
        }
        reports.push(StrategyReport {
            strategy,
            p_min: cfg.effective_p_min(),
            matrix_entries: sf.len() + sb.len(),
            raw_edges: raw.edges.len(),
            filtered_edges: filtered.edges.len(),
            tracks: filtered.track_count(),
            binary_retention: if binary_total == 0 {
                1.0
            } else {
                kept as f64 / binary_total as f64
            },
        });
    }
    let edges = edge_map
        .into_iter()
        .map(|((t, i, j), strengths)| {
            let present: Vec<f64> = strengths.iter().flatten().copied().collect();
            let spread = present.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                - present.iter().copied().fold(f64::INFINITY, f64::min);
            EdgeComparison {
                t,
                i,
                j,
                strengths,
                spread,
            }
        })
        .collect();
    Ok(CompareReport {
        strategies: reports,
        edges,
    })
}

impl CompareReport {
    /// Plain-text side-by-side table.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<24} {:>6} {:>9} {:>9} {:>9} {:>7} {:>10}",
            "strategy", "p_min", "entries", "raw", "filtered", "tracks", "retention"
        );
        for r in &self.strategies {
            let _ = writeln!(
                out,
                "{:<24} {:>6.2} {:>9} {:>9} {:>9} {:>7} {:>9.1}%",
                r.strategy.name(),
                r.p_min,
                r.matrix_entries,
                r.raw_edges,
                r.filtered_edges,
                r.tracks,
                100.0 * r.binary_retention
            );
        }
        let names: BTreeSet<&str> = self.strategies.iter().map(|r| r.strategy.name()).collect();
        if names.len() > 1 {
            let disagreeing = self
                .edges
                .iter()
                .filter(|e| e.strengths.iter().any(Option::is_none))
                .count();
            let max_spread = self.edges.iter().map(|e| e.spread).fold(0.0, f64::max);
            let _ = writeln!(
                out,
                "{} filtered edges in the union, {} not shared by every strategy, max strength spread {:.3}",
                self.edges.len(),
                disagreeing,
                max_spread
            );
        }
        out
    }
}
