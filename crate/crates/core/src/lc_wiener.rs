//! Faber-Schauder hat functions and the Lévy-Ciesielski parametrization of a
//! scalar Wiener process on the unit time interval.
//!
//! Basis functions carry a hierarchical index `(level, position)`; level 0 is
//! the linear function `t`, level `l >= 1` holds `2^(l-1)` hats with disjoint
//! supports of width `2^(1-l)`. Parameter vectors are stored in the linear
//! ordering `n = floor(2^(l-1)) + j - 1`, so a vector of length `2^L` holds
//! every coefficient up to level `L`.

use std::ops::Deref;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WienerError {
    #[error("time {0} outside [0, 1]")]
    TimeOutOfRange(f64),
    #[error("invalid hierarchical index (level {level}, position {position})")]
    InvalidIndex { level: u32, position: u64 },
    #[error("requested level {requested} exceeds path level {available}")]
    LevelTooFine { requested: u32, available: u32 },
    #[error("path must have 2^L + 1 samples starting at 0, got {0} samples")]
    MalformedPath(usize),
}

/// Hierarchical index of a Faber-Schauder function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HierIndex {
    pub level: u32,
    /// 1-based position within the level.
    pub position: u64,
}

impl HierIndex {
    pub fn new(level: u32, position: u64) -> Result<Self, WienerError> {
        if position == 0 || position > functions_on_level(level) || level > 62 {
            return Err(WienerError::InvalidIndex { level, position });
        }
        Ok(Self { level, position })
    }

    pub fn linear(&self) -> usize {
        linear_index(*self)
    }

    /// Open support interval `(a, b)`. Level 0 is supported on the whole interval.
    pub fn support(&self) -> (f64, f64) {
        if self.level == 0 {
            return (0.0, 1.0);
        }
        let width = 0.5f64.powi(self.level as i32 - 1);
        (
            (self.position - 1) as f64 * width,
            self.position as f64 * width,
        )
    }
}

/// Number of basis functions on a level: `ceil(2^(l-1))`.
pub fn functions_on_level(level: u32) -> u64 {
    if level == 0 {
        1
    } else {
        1u64 << (level - 1)
    }
}

pub fn linear_index(h: HierIndex) -> usize {
    if h.level == 0 {
        0
    } else {
        (1usize << (h.level - 1)) + h.position as usize - 1
    }
}

pub fn hier_index(n: usize) -> HierIndex {
    let level = level_of_linear(n);
    let position = if level == 0 {
        1
    } else {
        (n - (1usize << (level - 1)) + 1) as u64
    };
    HierIndex { level, position }
}

/// Hierarchical level of the basis function with linear index `n`,
/// i.e. `ceil(log2(n + 1))`.
pub fn level_of_linear(n: usize) -> u32 {
    if n == 0 {
        0
    } else {
        usize::BITS - n.leading_zeros()
    }
}

fn check_time(t: f64) -> Result<(), WienerError> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(WienerError::TimeOutOfRange(t))
    }
}

fn unit_hat(t: f64) -> f64 {
    if (0.0..=0.5).contains(&t) {
        t
    } else if t > 0.5 && t <= 1.0 {
        1.0 - t
    } else {
        0.0
    }
}

/// Value of the Faber-Schauder function `h` at time `t`.
pub fn faber_schauder(h: HierIndex, t: f64) -> Result<f64, WienerError> {
    check_time(t)?;
    HierIndex::new(h.level, h.position)?;
    Ok(eval_unchecked(h, t))
}

fn eval_unchecked(h: HierIndex, t: f64) -> f64 {
    if h.level == 0 {
        return t;
    }
    let scale = (1u64 << (h.level - 1)) as f64;
    scale.sqrt().recip() * unit_hat(scale * t - h.position as f64 + 1.0)
}

/// Lévy-Ciesielski coefficients in linear order; trailing coefficients
/// beyond the stored length are zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamVector {
    coeffs: Vec<f64>,
}

impl ParamVector {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            coeffs: vec![0.0; dim],
        }
    }

    /// Truncation level `L = ceil(log2 N)`: the finest level holding a stored coefficient.
    pub fn truncation_level(&self) -> u32 {
        match self.coeffs.len() {
            0 | 1 => 0,
            n => level_of_linear(n - 1),
        }
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.coeffs
    }
}

impl Deref for ParamVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.coeffs
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }
}

/// Evaluates the truncated expansion `W(y, t) = sum_n y_n eta_n(t)`.
///
/// Only one hat per level is non-zero at `t`, so the cost is linear in the
/// number of levels spanned by `y`.
pub fn wiener_eval(y: &[f64], t: f64) -> Result<f64, WienerError> {
    check_time(t)?;
    Ok(wiener_eval_unchecked(y, t))
}

pub(crate) fn wiener_eval_unchecked(y: &[f64], t: f64) -> f64 {
    let Some(&y0) = y.first() else {
        return 0.0;
    };
    let mut w = y0 * t;
    let mut level = 1u32;
    loop {
        let first = 1usize << (level - 1);
        if first >= y.len() {
            break;
        }
        let count = first as u64;
        let position = ((t * count as f64).floor() as u64 + 1).min(count);
        let n = first + position as usize - 1;
        if n < y.len() && y[n] != 0.0 {
            w += y[n] * eval_unchecked(HierIndex { level, position }, t);
        }
        level += 1;
    }
    w
}

/// Samples of a path on the dyadic grid `t_k = k 2^-L`, `k = 0..=2^L`.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerPath {
    level: u32,
    values: Vec<f64>,
}

impl WienerPath {
    pub fn from_values(values: Vec<f64>) -> Result<Self, WienerError> {
        let n = values.len();
        if n < 2 || !(n - 1).is_power_of_two() || values[0] != 0.0 {
            return Err(WienerError::MalformedPath(n));
        }
        Ok(Self {
            level: (n - 1).trailing_zeros(),
            values,
        })
    }

    /// Samples `f` on the dyadic grid of the given level; `f(0)` is forced to 0.
    pub fn from_fn(level: u32, f: impl Fn(f64) -> f64) -> Self {
        let count = 1usize << level;
        let mut values: Vec<f64> = (0..=count).map(|k| f(k as f64 / count as f64)).collect();
        values[0] = 0.0;
        Self { level, values }
    }

    /// Brownian-bridge construction: `W(1) = z_0`, then every midpoint of
    /// level `l` is the average of its neighbours plus `2^(-(l+1)/2) z_n`.
    /// `normals` are consumed in linear LC order; missing ones count as 0.
    pub fn brownian_bridge(level: u32, normals: &[f64]) -> Self {
        let count = 1usize << level;
        let mut values = vec![0.0; count + 1];
        values[count] = normals.first().copied().unwrap_or(0.0);
        for l in 1..=level {
            let stride = count >> (l - 1);
            let scale = 0.5f64.powf(0.5 * (l as f64 + 1.0));
            for j in 0..(1usize << (l - 1)) {
                let a = j * stride;
                let b = a + stride;
                let n = (1usize << (l - 1)) + j;
                let z = normals.get(n).copied().unwrap_or(0.0);
                values[a + stride / 2] = 0.5 * (values[a] + values[b]) + scale * z;
            }
        }
        Self { level, values }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 / (self.values.len() - 1) as f64
    }
}

/// Hierarchical coefficients of `w` up to `level`; the result has `2^level`
/// entries and reproduces `w` exactly on the dyadic points of that level.
pub fn lc_coefficients(w: &WienerPath, level: u32) -> Result<ParamVector, WienerError> {
    if level > w.level {
        return Err(WienerError::LevelTooFine {
            requested: level,
            available: w.level,
        });
    }
    let count = 1usize << w.level;
    let mut y = vec![0.0; 1usize << level];
    y[0] = w.values[count];
    for l in 1..=level {
        let stride = count >> (l - 1);
        let scale = 2f64.powf(0.5 * (l as f64 + 1.0));
        for j in 0..(1usize << (l - 1)) {
            let a = j * stride;
            let b = a + stride;
            let mid = w.values[a + stride / 2];
            y[(1usize << (l - 1)) + j] = scale * (mid - 0.5 * (w.values[a] + w.values[b]));
        }
    }
    Ok(ParamVector::new(y))
}

/// Weighted parameter norm `sum_l max_j |y_{l,j}| 2^(-(1-alpha) l / 2)`.
pub fn param_norm_alpha(y: &[f64], alpha: f64) -> f64 {
    let mut total = 0.0;
    let mut level = 0u32;
    let mut start = 0usize;
    while start < y.len() {
        let end = (start + functions_on_level(level) as usize).min(y.len());
        let peak = y[start..end].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        total += peak * 2f64.powf(-(1.0 - alpha) * level as f64 / 2.0);
        start = end;
        level += 1;
    }
    total
}

/// Number of leading coefficients that influence `W` on the time grid with
/// step `2^-k`: every hat of level `> k` vanishes on that grid.
pub fn relevant_dimensions(k: u32) -> usize {
    1usize << k
}
