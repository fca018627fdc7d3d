//! Regular grid domains, scalar-field time series and their on-disk formats.
//!
//! A [`GridDomain`] is a 2D or 3D lattice of vertices. Vertex ids are linear
//! indices with the first axis varying fastest, so a 2D vertex `(x, y)` has
//! id `x + dims[0] * y`. The lattice is triangulated implicitly with the
//! Freudenthal (Kuhn) scheme: two vertices are adjacent when their coordinate
//! offset is a non-zero vector whose entries are all in `{0, 1}` or all in
//! `{0, -1}`. That gives 6 neighbors per interior vertex in 2D and 14 in 3D.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

pub const RAW_MAGIC: &[u8; 4] = b"XTRK";
pub const RAW_VERSION: u32 = 1;
/// Version tag used by label dumps (u32 payload).
pub const LABEL_VERSION: u32 = 2;

const DTYPE_F32: u8 = 0;
const DTYPE_F64: u8 = 1;
const DTYPE_U32: u8 = 2;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("vertex {vertex} out of range (vertex count {count})")]
    VertexOutOfRange { vertex: usize, count: usize },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("size mismatch: expected {expected} values, found {found}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("non-finite value at offset {offset} (step {step}, vertex {vertex})")]
    NonFinite {
        offset: usize,
        step: usize,
        vertex: usize,
    },
    #[error("csv parse error at line {line}, column {column}: {message}")]
    Csv {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid series: {0}")]
    InvalidSeries(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = FieldError> = std::result::Result<T, E>;

/// A regular 2D or 3D vertex lattice with per-axis spacing and periodicity.
#[derive(Clone, Debug, PartialEq)]
pub struct GridDomain {
    dims: Vec<usize>,
    spacing: Vec<f64>,
    periodic: Vec<bool>,
}

impl GridDomain {
    /// Axes of extent 1 are accepted so that strip-shaped fields (`1×n`)
    /// can be expressed, but the rank must be 2 or 3 and the lattice must
    /// hold at least two vertices.
    pub fn new(dims: Vec<usize>, spacing: Vec<f64>, periodic: Vec<bool>) -> Result<Self> {
        if dims.len() != 2 && dims.len() != 3 {
            return Err(FieldError::InvalidDomain(format!(
                "rank must be 2 or 3, got {}",
                dims.len()
            )));
        }
        if spacing.len() != dims.len() || periodic.len() != dims.len() {
            return Err(FieldError::InvalidDomain(
                "dims, spacing and periodic must have the same length".into(),
            ));
        }
        if dims.contains(&0) {
            return Err(FieldError::InvalidDomain("dims must be positive".into()));
        }
        if dims.iter().product::<usize>() < 2 {
            return Err(FieldError::InvalidDomain(
                "domain must contain at least two vertices".into(),
            ));
        }
        if let Some(s) = spacing.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(FieldError::InvalidDomain(format!(
                "spacing must be finite and positive, got {s}"
            )));
        }
        Ok(Self {
            dims,
            spacing,
            periodic,
        })
    }

    /// Unit-spaced, non-periodic lattice.
    pub fn regular(dims: &[usize]) -> Result<Self> {
        Self::new(
            dims.to_vec(),
            vec![1.0; dims.len()],
            vec![false; dims.len()],
        )
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn periodic(&self) -> &[bool] {
        &self.periodic
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.dims.iter().product()
    }

    /// Same lattice and periodicity with unit spacing.
    pub fn with_unit_spacing(&self) -> Self {
        Self {
            dims: self.dims.clone(),
            spacing: vec![1.0; self.rank()],
            periodic: self.periodic.clone(),
        }
    }

    fn check(&self, v: usize) -> Result<()> {
        let count = self.vertex_count();
        if v >= count {
            return Err(FieldError::VertexOutOfRange { vertex: v, count });
        }
        Ok(())
    }

    /// Lattice coordinate of a vertex id. Unused trailing entries are zero.
    pub fn coord(&self, v: usize) -> [usize; 3] {
        let mut c = [0usize; 3];
        let mut rest = v;
        for (axis, &n) in self.dims.iter().enumerate() {
            c[axis] = rest % n;
            rest /= n;
        }
        c
    }

    pub fn index(&self, coord: &[usize]) -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for (axis, &n) in self.dims.iter().enumerate() {
            idx += coord[axis] * stride;
            stride *= n;
        }
        idx
    }

    /// World position (spacing-scaled lattice coordinate).
    pub fn position(&self, v: usize) -> Vec<f64> {
        let c = self.coord(v);
        (0..self.rank())
            .map(|a| c[a] as f64 * self.spacing[a])
            .collect()
    }

    /// Per-axis lattice offset between two coordinates, honoring periodic
    /// wrap (minimum image).
    fn axis_gap(&self, axis: usize, a: usize, b: usize) -> usize {
        let gap = a.abs_diff(b);
        if self.periodic[axis] {
            gap.min(self.dims[axis] - gap)
        } else {
            gap
        }
    }

    /// Euclidean world-space distance with minimum-image convention on
    /// periodic axes.
    pub fn distance(&self, u: usize, v: usize) -> f64 {
        let (cu, cv) = (self.coord(u), self.coord(v));
        (0..self.rank())
            .map(|a| {
                let g = self.axis_gap(a, cu[a], cv[a]) as f64 * self.spacing[a];
                g * g
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Distance between two world positions, minimum image on periodic axes.
    pub fn world_distance(&self, p: &[f64], q: &[f64]) -> f64 {
        (0..self.rank())
            .map(|a| {
                let mut g = (p[a] - q[a]).abs();
                if self.periodic[a] {
                    let period = self.dims[a] as f64 * self.spacing[a];
                    g %= period;
                    g = g.min(period - g);
                }
                g * g
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Shift coordinate `c` on `axis` by `delta`; `None` when it leaves a
    /// non-periodic axis.
    fn shift(&self, axis: usize, c: usize, delta: isize) -> Option<usize> {
        let n = self.dims[axis] as isize;
        let moved = c as isize + delta;
        if self.periodic[axis] {
            Some(moved.rem_euclid(n) as usize)
        } else if (0..n).contains(&moved) {
            Some(moved as usize)
        } else {
            None
        }
    }

    /// 1-ring of `v` in the Freudenthal triangulation, sorted by id.
    pub fn vertex_neighbors(&self, v: usize) -> Result<Vec<usize>> {
        self.check(v)?;
        let mut out = Vec::with_capacity(14);
        self.for_each_neighbor(v, |w| out.push(w));
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    /// Visits the 1-ring of `v` without allocating. Ids may repeat on
    /// periodic axes of extent ≤ 2; callers that need a set must dedup.
    pub(crate) fn for_each_neighbor(&self, v: usize, mut visit: impl FnMut(usize)) {
        let c = self.coord(v);
        let rank = self.rank();
        // Non-zero 0/1 patterns; each is applied with sign +1 and -1.
        for mask in 1u32..(1 << rank) {
            'sign: for sign in [1isize, -1] {
                let mut nc = c;
                for axis in 0..rank {
                    if mask & (1 << axis) != 0 {
                        match self.shift(axis, c[axis], sign) {
                            Some(x) => nc[axis] = x,
                            None => continue 'sign,
                        }
                    }
                }
                let w = self.index(&nc[..rank]);
                if w != v {
                    visit(w);
                }
            }
        }
    }

    /// All vertices within world distance `d` of `center`, sorted by id.
    pub fn euclidean_ball(&self, center: usize, d: f64) -> Result<Vec<usize>> {
        self.check(center)?;
        if !(d >= 0.0) {
            return Err(FieldError::InvalidDomain(format!(
                "ball radius must be non-negative, got {d}"
            )));
        }
        let c = self.coord(center);
        let rank = self.rank();
        // Candidate coordinates per axis: lattice offsets up to the radius.
        let mut candidates: Vec<Vec<(usize, f64)>> = Vec::with_capacity(rank);
        for (axis, &ca) in c[..rank].iter().enumerate() {
            let n = self.dims[axis];
            let reach = (d / self.spacing[axis]).floor();
            let reach = if reach >= n as f64 { n } else { reach as usize };
            let mut axis_set = BTreeSet::new();
            for off in 0..=reach.min(n) {
                for s in [1isize, -1] {
                    if let Some(x) = self.shift(axis, ca, s * off as isize) {
                        axis_set.insert(x);
                    }
                }
            }
            candidates.push(
                axis_set
                    .into_iter()
                    .map(|x| {
                        let g = self.axis_gap(axis, ca, x) as f64 * self.spacing[axis];
                        (x, g * g)
                    })
                    .collect(),
            );
        }
        let limit = d * d;
        let mut out = Vec::new();
        let mut nc = [0usize; 3];
        self.collect_ball(&candidates, 0, 0.0, limit, &mut nc, &mut out);
        out.sort_unstable();
        Ok(out)
    }

    fn collect_ball(
        &self,
        candidates: &[Vec<(usize, f64)>],
        axis: usize,
        acc: f64,
        limit: f64,
        nc: &mut [usize; 3],
        out: &mut Vec<usize>,
    ) {
        if axis == candidates.len() {
            out.push(self.index(&nc[..axis]));
            return;
        }
        for &(x, g2) in &candidates[axis] {
            let total = acc + g2;
            if total <= limit {
                nc[axis] = x;
                self.collect_ball(candidates, axis + 1, total, limit, nc, out);
            }
        }
    }
}

/// Time-ordered stack of scalar fields sharing one domain.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarFieldSeries {
    domain: GridDomain,
    steps: Vec<Vec<f64>>,
    timestamps: Option<Vec<String>>,
}

impl ScalarFieldSeries {
    pub fn new(domain: GridDomain, steps: Vec<Vec<f64>>) -> Result<Self> {
        if steps.is_empty() {
            return Err(FieldError::InvalidSeries(
                "series needs at least one step".into(),
            ));
        }
        let count = domain.vertex_count();
        for (t, step) in steps.iter().enumerate() {
            if step.len() != count {
                return Err(FieldError::SizeMismatch {
                    expected: count,
                    found: step.len(),
                });
            }
            if let Some(v) = step.iter().position(|x| !x.is_finite()) {
                return Err(FieldError::NonFinite {
                    offset: t * count + v,
                    step: t,
                    vertex: v,
                });
            }
        }
        Ok(Self {
            domain,
            steps,
            timestamps: None,
        })
    }

    pub fn with_timestamps(mut self, timestamps: Vec<String>) -> Result<Self> {
        if timestamps.len() != self.steps.len() {
            return Err(FieldError::InvalidSeries(format!(
                "{} timestamps for {} steps",
                timestamps.len(),
                self.steps.len()
            )));
        }
        self.timestamps = Some(timestamps);
        Ok(self)
    }

    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    pub fn steps(&self) -> &[Vec<f64>] {
        &self.steps
    }

    pub fn step(&self, t: usize) -> &[f64] {
        &self.steps[t]
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn timestamps(&self) -> Option<&[String]> {
        self.timestamps.as_deref()
    }

    /// (min, max) over all steps.
    pub fn global_range(&self) -> (f64, f64) {
        self.steps
            .iter()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputFormat {
    RawF32,
    RawF64,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RawDtype {
    F32,
    F64,
}

/// Reads a series in the declared format. For raw files the header dtype
/// must match the declared one.
pub fn load_series(path: &Path, format: InputFormat) -> Result<ScalarFieldSeries> {
    match format {
        InputFormat::RawF32 => load_raw(path, Some(RawDtype::F32)),
        InputFormat::RawF64 => load_raw(path, Some(RawDtype::F64)),
        InputFormat::Csv => {
            let (domain, step) = read_csv_step(path)?;
            ScalarFieldSeries::new(domain, vec![step])
        }
    }
}

/// One csv file per step; all files must share their shape.
pub fn load_csv_steps<P: AsRef<Path>>(paths: &[P]) -> Result<ScalarFieldSeries> {
    let mut domain: Option<GridDomain> = None;
    let mut steps = Vec::with_capacity(paths.len());
    for p in paths {
        let (d, step) = read_csv_step(p.as_ref())?;
        match &domain {
            Some(prev) if prev != &d => {
                return Err(FieldError::InvalidSeries(format!(
                    "{} has dims {:?}, expected {:?}",
                    p.as_ref().display(),
                    d.dims(),
                    prev.dims()
                )))
            }
            Some(_) => {}
            None => domain = Some(d),
        }
        steps.push(step);
    }
    let domain = domain.ok_or_else(|| FieldError::InvalidSeries("no csv files given".into()))?;
    ScalarFieldSeries::new(domain, steps)
}

fn read_csv_step(path: &Path) -> Result<(GridDomain, Vec<f64>)> {
    parse_csv_step(BufReader::new(File::open(path)?))
}

/// Rows of the csv run along the last axis, columns along the first.
pub fn parse_csv_step(reader: impl Read) -> Result<(GridDomain, Vec<f64>)> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for record in csv.records() {
        let record = record.map_err(|e| match e.position() {
            Some(pos) => FieldError::Csv {
                line: pos.line() as usize,
                column: 0,
                message: e.to_string(),
            },
            None => FieldError::Io(std::io::Error::other(e)),
        })?;
        let line = record.position().map_or(rows + 1, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        for (col, cell) in record.iter().enumerate() {
            let x: f64 = cell.parse().map_err(|e| FieldError::Csv {
                line,
                column: col + 1,
                message: format!("{e}"),
            })?;
            if !x.is_finite() {
                return Err(FieldError::NonFinite {
                    offset: values.len(),
                    step: 0,
                    vertex: values.len(),
                });
            }
            values.push(x);
        }
        let n = record.len();
        match width {
            None => width = Some(n),
            Some(w) if w != n => {
                return Err(FieldError::Csv {
                    line,
                    column: n,
                    message: format!("row has {n} values, expected {w}"),
                })
            }
            _ => {}
        }
        rows += 1;
    }
    let width = width.ok_or_else(|| FieldError::MalformedHeader("empty csv".into()))?;
    let domain = GridDomain::regular(&[width, rows])?;
    Ok((domain, values))
}

struct RawHeader {
    version: u32,
    domain: GridDomain,
    steps: usize,
    dtype: u8,
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u8(r: &mut impl Read) -> std::io::Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

fn header_err(e: std::io::Error) -> FieldError {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        FieldError::MalformedHeader("truncated header".into())
    } else {
        FieldError::Io(e)
    }
}

fn read_header(r: &mut impl Read) -> Result<RawHeader> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(header_err)?;
    if &magic != RAW_MAGIC {
        return Err(FieldError::MalformedHeader(format!("bad magic {magic:?}")));
    }
    let version = read_u32(r).map_err(header_err)?;
    if version != RAW_VERSION && version != LABEL_VERSION {
        return Err(FieldError::MalformedHeader(format!(
            "unsupported version {version}"
        )));
    }
    let rank = read_u32(r).map_err(header_err)? as usize;
    if rank != 2 && rank != 3 {
        return Err(FieldError::MalformedHeader(format!("rank {rank}")));
    }
    let mut dims = Vec::with_capacity(rank);
    for _ in 0..rank {
        dims.push(read_u32(r).map_err(header_err)? as usize);
    }
    let steps = read_u32(r).map_err(header_err)? as usize;
    let dtype = read_u8(r).map_err(header_err)?;
    let mask = read_u8(r).map_err(header_err)?;
    let mut reserved = [0u8; 2];
    r.read_exact(&mut reserved).map_err(header_err)?;
    let mut spacing = Vec::with_capacity(rank);
    for _ in 0..rank {
        let mut b = [0u8; 8];
        r.read_exact(&mut b).map_err(header_err)?;
        spacing.push(f64::from_le_bytes(b));
    }
    let periodic = (0..rank).map(|a| mask & (1 << a) != 0).collect();
    let domain = GridDomain::new(dims, spacing, periodic)
        .map_err(|e| FieldError::MalformedHeader(e.to_string()))?;
    Ok(RawHeader {
        version,
        domain,
        steps,
        dtype,
    })
}

fn write_header(
    w: &mut impl Write,
    version: u32,
    domain: &GridDomain,
    steps: usize,
    dtype: u8,
) -> std::io::Result<()> {
    w.write_all(RAW_MAGIC)?;
    w.write_all(&version.to_le_bytes())?;
    w.write_all(&(domain.rank() as u32).to_le_bytes())?;
    for &d in domain.dims() {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    w.write_all(&(steps as u32).to_le_bytes())?;
    let mask = domain
        .periodic()
        .iter()
        .enumerate()
        .fold(0u8, |m, (a, &p)| if p { m | (1 << a) } else { m });
    w.write_all(&[dtype, mask, 0, 0])?;
    for s in domain.spacing() {
        w.write_all(&s.to_le_bytes())?;
    }
    Ok(())
}

fn read_payload(r: &mut impl Read) -> Result<Vec<u8>> {
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    Ok(payload)
}

/// Reads a raw series. `expect` pins the dtype; `None` accepts either.
pub fn load_raw(path: &Path, expect: Option<RawDtype>) -> Result<ScalarFieldSeries> {
    let mut r = BufReader::new(File::open(path)?);
    read_raw(&mut r, expect)
}

pub fn read_raw(r: &mut impl Read, expect: Option<RawDtype>) -> Result<ScalarFieldSeries> {
    let header = read_header(r)?;
    if header.version != RAW_VERSION {
        return Err(FieldError::MalformedHeader(format!(
            "version {} is not a scalar series",
            header.version
        )));
    }
    let dtype = match header.dtype {
        DTYPE_F32 => RawDtype::F32,
        DTYPE_F64 => RawDtype::F64,
        other => {
            return Err(FieldError::MalformedHeader(format!(
                "dtype {other} is not a scalar dtype"
            )))
        }
    };
    if let Some(want) = expect {
        if want != dtype {
            return Err(FieldError::MalformedHeader(format!(
                "file dtype {dtype:?} does not match declared {want:?}"
            )));
        }
    }
    if header.steps == 0 {
        return Err(FieldError::MalformedHeader("zero steps".into()));
    }
    let count = header.domain.vertex_count();
    let expected = count * header.steps;
    let width = match dtype {
        RawDtype::F32 => 4,
        RawDtype::F64 => 8,
    };
    let payload = read_payload(r)?;
    if payload.len() != expected * width {
        return Err(FieldError::SizeMismatch {
            expected,
            found: payload.len() / width,
        });
    }
    let mut steps = Vec::with_capacity(header.steps);
    for t in 0..header.steps {
        let mut step = Vec::with_capacity(count);
        for v in 0..count {
            let offset = t * count + v;
            let bytes = &payload[offset * width..(offset + 1) * width];
            let x = match dtype {
                RawDtype::F32 => f32::from_le_bytes(bytes.try_into().unwrap()) as f64,
                RawDtype::F64 => f64::from_le_bytes(bytes.try_into().unwrap()),
            };
            if !x.is_finite() {
                return Err(FieldError::NonFinite {
                    offset,
                    step: t,
                    vertex: v,
                });
            }
            step.push(x);
        }
        steps.push(step);
    }
    ScalarFieldSeries::new(header.domain, steps)
}

/// Writes a raw series. With `F32` the values are narrowed.
pub fn save_raw(path: &Path, series: &ScalarFieldSeries, dtype: RawDtype) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_raw(&mut w, series, dtype)?;
    w.flush()?;
    Ok(())
}

pub fn write_raw(w: &mut impl Write, series: &ScalarFieldSeries, dtype: RawDtype) -> Result<()> {
    let code = match dtype {
        RawDtype::F32 => DTYPE_F32,
        RawDtype::F64 => DTYPE_F64,
    };
    write_header(w, RAW_VERSION, series.domain(), series.len(), code)?;
    for step in series.steps() {
        for &x in step {
            match dtype {
                RawDtype::F32 => w.write_all(&(x as f32).to_le_bytes())?,
                RawDtype::F64 => w.write_all(&x.to_le_bytes())?,
            }
        }
    }
    Ok(())
}

/// Dumps per-vertex label arrays (one per step) with a u32 payload.
pub fn write_labels(w: &mut impl Write, domain: &GridDomain, labels: &[&[usize]]) -> Result<()> {
    write_header(w, LABEL_VERSION, domain, labels.len(), DTYPE_U32)?;
    for step in labels {
        if step.len() != domain.vertex_count() {
            return Err(FieldError::SizeMismatch {
                expected: domain.vertex_count(),
                found: step.len(),
            });
        }
        for &l in *step {
            let l = u32::try_from(l)
                .map_err(|_| FieldError::InvalidSeries(format!("label {l} exceeds u32")))?;
            w.write_all(&l.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_labels(r: &mut impl Read) -> Result<(GridDomain, Vec<Vec<usize>>)> {
    let header = read_header(r)?;
    if header.version != LABEL_VERSION || header.dtype != DTYPE_U32 {
        return Err(FieldError::MalformedHeader("not a label dump".into()));
    }
    let count = header.domain.vertex_count();
    let payload = read_payload(r)?;
    if payload.len() != count * header.steps * 4 {
        return Err(FieldError::SizeMismatch {
            expected: count * header.steps,
            found: payload.len() / 4,
        });
    }
    let labels = payload
        .chunks_exact(4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()) as usize)
        .collect::<Vec<_>>()
        .chunks(count)
        .map(|c| c.to_vec())
        .collect();
    Ok((header.domain, labels))
}
