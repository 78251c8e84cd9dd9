//! Sparse grids over downward-closed index sets and their interpolants,
//! evaluated with the combination technique.
//!
//! A [`SparseGrid`] holds the point set and the signed tensor terms; a
//! [`SparseGridInterpolant`] pairs a grid with one sample per point. Keeping
//! the two apart lets samples be reused across nested grids.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{self, BufRead, Read, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::index_set::{IndexSet, MultiIndex};
use crate::interp1d::{InterpError, NodeFamily1D, NodeId, Nodes1D};
use crate::lc_wiener::ParamVector;
use crate::payload::Payload;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("index set is not downward-closed")]
    NotDownwardClosed,
    #[error(transparent)]
    Interp(#[from] InterpError),
    #[error("expected {expected} samples, got {got}")]
    SampleCount { expected: usize, got: usize },
}

/// Sampler failure at a grid point.
#[derive(Debug, Error)]
#[error("sampling failed at {point}: {source}")]
pub struct SampleError<E: std::error::Error + 'static> {
    pub point: GridPoint,
    #[source]
    pub source: E,
}

/// Point of a sparse grid. Only coordinates away from the origin are stored,
/// sorted by dimension; all other coordinates are 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct GridPoint {
    coords: Vec<(usize, NodeId)>,
}

impl GridPoint {
    pub fn origin() -> Self {
        Self::default()
    }

    pub fn from_ids(ids: impl IntoIterator<Item = (usize, NodeId)>) -> Self {
        let mut coords: Vec<_> = ids.into_iter().filter(|(_, id)| !id.is_origin()).collect();
        coords.sort_unstable();
        coords.dedup_by_key(|c| c.0);
        Self { coords }
    }

    pub fn ids(&self) -> &[(usize, NodeId)] {
        &self.coords
    }

    pub fn id(&self, dim: usize) -> NodeId {
        self.coords
            .binary_search_by_key(&dim, |c| c.0)
            .map(|i| self.coords[i].1)
            .unwrap_or(NodeId::ORIGIN)
    }

    /// Dense coordinates, padded with zeros to at least `len` entries.
    pub fn to_param(&self, family: &NodeFamily1D, len: usize) -> ParamVector {
        let len = len.max(self.coords.last().map_or(0, |c| c.0 + 1));
        let mut y = vec![0.0; len];
        for &(d, id) in &self.coords {
            y[d] = family.coordinate(id);
        }
        ParamVector::new(y)
    }
}

impl fmt::Display for GridPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, (d, id)) in self.coords.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{d}:{}/{}", id.num, id.den)?;
        }
        f.write_str("]")
    }
}

/// Signed tensor interpolation operator of the combination technique.
#[derive(Debug, Clone)]
struct Term {
    coeff: i64,
    index: MultiIndex,
    /// Grid point indices of the tensor grid, row-major over the support
    /// dimensions in increasing order.
    table: Vec<usize>,
}

/// Inclusion-exclusion coefficient `sum_{e in {0,1}^N, nu + e in set} (-1)^|e|`.
pub fn combination_coefficient(set: &IndexSet, nu: &MultiIndex) -> i64 {
    let dims = set.active_dimensions();
    let forward: Vec<usize> = (0..dims)
        .filter(|&d| set.contains(&nu.incremented(d)))
        .collect();
    fn walk(set: &IndexSet, current: &MultiIndex, forward: &[usize], sign: i64) -> i64 {
        let mut total = 0;
        for (k, &d) in forward.iter().enumerate() {
            let next = current.incremented(d);
            if set.contains(&next) {
                total -= sign;
                total += walk(set, &next, &forward[k + 1..], -sign);
            }
        }
        total
    }
    1 + walk(set, nu, &forward, 1)
}

/// Point set and combination terms of a sparse grid.
#[derive(Debug, Clone)]
pub struct SparseGrid {
    family: NodeFamily1D,
    index_set: IndexSet,
    dims: usize,
    levels: Vec<Nodes1D>,
    points: Vec<GridPoint>,
    lookup: HashMap<GridPoint, usize>,
    terms: Vec<Term>,
}

impl SparseGrid {
    pub fn new(index_set: IndexSet, family: NodeFamily1D) -> Result<Self, GridError> {
        if index_set.is_empty() || !index_set.is_downward_closed() {
            return Err(GridError::NotDownwardClosed);
        }
        let levels = (0..=index_set.max_level())
            .map(|l| family.make_nodes(l))
            .collect::<Result<Vec<_>, _>>()?;
        let dims = index_set.active_dimensions();

        let active: Vec<(i64, MultiIndex)> = index_set
            .iter()
            .map(|nu| (combination_coefficient(&index_set, nu), nu.clone()))
            .filter(|(c, _)| *c != 0)
            .collect();

        // Nested nodes: the union over terms with non-zero coefficient (which
        // include all maximal elements) is the whole grid.
        let mut unique: HashSet<GridPoint> = HashSet::new();
        for (_, nu) in &active {
            for_each_tensor_point(nu, &levels, |p| {
                if !unique.contains(&p) {
                    unique.insert(p);
                }
            });
        }
        let mut points: Vec<GridPoint> = unique.into_iter().collect();
        points.sort_unstable_by(|a, b| a.coords.len().cmp(&b.coords.len()).then_with(|| a.cmp(b)));
        let lookup: HashMap<GridPoint, usize> = points
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, p)| (p, i))
            .collect();

        let terms = active
            .into_iter()
            .map(|(coeff, index)| {
                let mut table = Vec::new();
                for_each_tensor_point(&index, &levels, |p| table.push(lookup[&p]));
                Term {
                    coeff,
                    index,
                    table,
                }
            })
            .collect();

        Ok(Self {
            family,
            index_set,
            dims,
            levels,
            points,
            lookup,
            terms,
        })
    }

    pub fn family(&self) -> &NodeFamily1D {
        &self.family
    }

    pub fn index_set(&self) -> &IndexSet {
        &self.index_set
    }

    /// Number of dimensions touched by the index set.
    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points in canonical order.
    pub fn points(&self) -> &[GridPoint] {
        &self.points
    }

    pub fn position(&self, point: &GridPoint) -> Option<usize> {
        self.lookup.get(point).copied()
    }

    /// Multi-indices with non-zero combination coefficient.
    pub fn combination_terms(&self) -> impl Iterator<Item = (&MultiIndex, i64)> {
        self.terms.iter().map(|t| (&t.index, t.coeff))
    }

    /// Combination coefficient of any member of the index set (0 otherwise).
    pub fn coefficient(&self, nu: &MultiIndex) -> i64 {
        self.terms
            .iter()
            .find(|t| &t.index == nu)
            .map_or(0, |t| t.coeff)
    }

    /// Non-zero Lagrange weights `(point, L_y(z))` of the interpolant at `z`.
    /// Coordinates past the end of `z` are taken as 0.
    pub fn lagrange_weights(&self, z: &[f64]) -> Vec<(usize, f64)> {
        let mut acc: HashMap<usize, f64> = HashMap::new();
        let coord = |d: usize| z.get(d).copied().unwrap_or(0.0);
        for term in &self.terms {
            let entries = term.index.entries();
            let sizes: Vec<usize> = entries
                .iter()
                .map(|&(_, l)| self.levels[l as usize].len())
                .collect();
            let local: Vec<(usize, Vec<f64>)> = entries
                .iter()
                .map(|&(d, l)| self.levels[l as usize].weights(coord(d)))
                .collect();
            let mut strides = vec![1usize; sizes.len()];
            for k in (0..sizes.len().saturating_sub(1)).rev() {
                strides[k] = strides[k + 1] * sizes[k + 1];
            }
            let mut counter = vec![0usize; local.len()];
            loop {
                let mut w = term.coeff as f64;
                let mut offset = 0;
                for (k, (start, ws)) in local.iter().enumerate() {
                    w *= ws[counter[k]];
                    offset += (start + counter[k]) * strides[k];
                }
                if w != 0.0 {
                    *acc.entry(term.table[offset]).or_insert(0.0) += w;
                }
                if !advance(&mut counter, |k| local[k].1.len()) {
                    break;
                }
            }
        }
        let mut out: Vec<(usize, f64)> = acc.into_iter().filter(|&(_, w)| w != 0.0).collect();
        out.sort_unstable_by_key(|&(i, _)| i);
        out
    }

    /// `label,index_set_size,grid_points,dims,max_level,p` header line.
    pub fn metadata_csv_header() -> &'static str {
        "label,index_set_size,grid_points,dims,max_level,p"
    }

    pub fn metadata_csv_row(&self, label: &str) -> String {
        format!(
            "{label},{},{},{},{},{}",
            self.index_set.len(),
            self.points.len(),
            self.dims,
            self.index_set.max_level(),
            self.family.p()
        )
    }
}

/// Visits the tensor grid of `nu` in row-major order over its support.
fn for_each_tensor_point(nu: &MultiIndex, levels: &[Nodes1D], mut f: impl FnMut(GridPoint)) {
    let axes: Vec<(usize, &[NodeId])> = nu
        .entries()
        .iter()
        .map(|&(d, l)| (d, levels[l as usize].ids()))
        .collect();
    let mut counter = vec![0usize; axes.len()];
    loop {
        f(GridPoint::from_ids(
            axes.iter().zip(&counter).map(|(&(d, ids), &c)| (d, ids[c])),
        ));
        if !advance(&mut counter, |k| axes[k].1.len()) {
            return;
        }
    }
}

/// Odometer step over `counter[k] < limit(k)`, last digit fastest. Returns
/// false after the final state.
fn advance(counter: &mut [usize], limit: impl Fn(usize) -> usize) -> bool {
    for k in (0..counter.len()).rev() {
        counter[k] += 1;
        if counter[k] < limit(k) {
            return true;
        }
        counter[k] = 0;
    }
    false
}

/// Sparse-grid interpolant: a grid with one sample per point.
#[derive(Debug, Clone)]
pub struct SparseGridInterpolant<V> {
    grid: SparseGrid,
    samples: Vec<V>,
}

impl<V: Payload> SparseGridInterpolant<V> {
    /// Samples `sampler` at every grid point in parallel. The sampler receives
    /// the point and its dense coordinates (length `grid.dims()`).
    pub fn build<E, F>(grid: SparseGrid, sampler: F) -> Result<Self, SampleError<E>>
    where
        E: std::error::Error + Send + 'static,
        F: Fn(&GridPoint, &ParamVector) -> Result<V, E> + Sync,
    {
        let samples = grid
            .points
            .par_iter()
            .map(|p| {
                let y = p.to_param(&grid.family, grid.dims);
                sampler(p, &y).map_err(|source| SampleError {
                    point: p.clone(),
                    source,
                })
            })
            .collect::<Result<Vec<V>, _>>()?;
        Ok(Self { grid, samples })
    }

    /// Infallible variant of [`SparseGridInterpolant::build`].
    pub fn from_fn(grid: SparseGrid, f: impl Fn(&ParamVector) -> V + Sync) -> Self {
        let samples = grid
            .points
            .par_iter()
            .map(|p| f(&p.to_param(&grid.family, grid.dims)))
            .collect();
        Self { grid, samples }
    }

    /// Samples aligned with `grid.points()`.
    pub fn from_samples(grid: SparseGrid, samples: Vec<V>) -> Result<Self, GridError> {
        if samples.len() != grid.len() {
            return Err(GridError::SampleCount {
                expected: grid.len(),
                got: samples.len(),
            });
        }
        Ok(Self { grid, samples })
    }

    pub fn grid(&self) -> &SparseGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[V] {
        &self.samples
    }

    pub fn into_parts(self) -> (SparseGrid, Vec<V>) {
        (self.grid, self.samples)
    }

    pub fn sample_at(&self, point: &GridPoint) -> Option<&V> {
        self.grid.position(point).map(|i| &self.samples[i])
    }

    pub fn evaluate(&self, z: &[f64]) -> V {
        let weights = self.grid.lagrange_weights(z);
        if weights.is_empty() {
            return self.samples[0].zeros_like();
        }
        crate::payload::combine(weights.iter().map(|&(i, w)| (w, &self.samples[i])))
    }
}

/// Header of a flat binary sample record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleHeader {
    pub dims: usize,
    pub mesh: usize,
    pub steps: usize,
    pub count: usize,
    pub len: usize,
}

const SAMPLE_MAGIC: &str = "sllg-samples v1";

/// Writes a text header line followed by `count * len` little-endian `f64`.
pub fn write_samples(
    mut w: impl Write,
    dims: usize,
    mesh: usize,
    steps: usize,
    samples: &[Vec<f64>],
) -> io::Result<()> {
    let len = samples.first().map_or(0, Vec::len);
    if samples.iter().any(|s| s.len() != len) {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            "samples differ in length",
        ));
    }
    writeln!(
        w,
        "{SAMPLE_MAGIC} dims={dims} mesh={mesh} steps={steps} count={} len={len}",
        samples.len()
    )?;
    for s in samples {
        for v in s {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()
}

pub fn read_samples(r: impl Read) -> io::Result<(SampleHeader, Vec<Vec<f64>>)> {
    let bad = |msg: String| io::Error::new(io::ErrorKind::InvalidData, msg);
    let mut r = io::BufReader::new(r);
    let mut line = String::new();
    r.read_line(&mut line)?;
    let rest = line
        .trim_end()
        .strip_prefix(SAMPLE_MAGIC)
        .ok_or_else(|| bad("missing sample header".into()))?;
    let mut fields = HashMap::new();
    for kv in rest.split_whitespace() {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| bad(format!("bad header field {kv:?}")))?;
        let v: usize = v
            .parse()
            .map_err(|_| bad(format!("bad header value {kv:?}")))?;
        fields.insert(k.to_string(), v);
    }
    let get = |k: &str| {
        fields
            .get(k)
            .copied()
            .ok_or_else(|| bad(format!("header lacks {k}")))
    };
    let header = SampleHeader {
        dims: get("dims")?,
        mesh: get("mesh")?,
        steps: get("steps")?,
        count: get("count")?,
        len: get("len")?,
    };
    let mut samples = Vec::with_capacity(header.count);
    let mut buf = [0u8; 8];
    for _ in 0..header.count {
        let mut s = Vec::with_capacity(header.len);
        for _ in 0..header.len {
            r.read_exact(&mut buf)?;
            s.push(f64::from_le_bytes(buf));
        }
        samples.push(s);
    }
    Ok((header, samples))
}
