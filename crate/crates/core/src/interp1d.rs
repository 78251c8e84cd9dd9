//! Piecewise polynomial interpolation on the real line with node families
//! adapted to the standard Gaussian weight.
//!
//! Nodes are images `phi(x) = alpha * erfinv(x)` of equispaced points in
//! `(-1, 1)`. A family is fixed by the order `p` (piecewise degree `p - 1`)
//! and the tail variance `sigma2 > 1`. Level `nu` has `m = 2^(nu+1) - 1` main
//! nodes; for `p >= 3` every bounded interval carries `p - 2` extra nodes at
//! images of equispaced interior points, which makes the full node sets nested
//! across levels.
//!
//! Every node is identified exactly by its transformed abscissa
//! `x + 1 = q / ((p - 1) 2^nu)`, stored as a reduced fraction ([`NodeId`]).

use thiserror::Error;

use crate::payload::Payload;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InterpError {
    #[error("tail variance must exceed 1, got {0}")]
    InvalidVariance(f64),
    #[error("order p must be at least 2, got {0}")]
    InvalidOrder(u32),
    #[error("expected {expected} values, got {got}")]
    Misaligned { expected: usize, got: usize },
    #[error("level {0} is too fine")]
    LevelTooFine(u32),
}

const MAX_LEVEL: u32 = 40;

/// Inverse error function on `(-1, 1)`.
///
/// Starts from Giles' single-precision polynomial and polishes with Halley
/// iterations on `erf`, which brings the result to a few ulps.
pub fn erf_inv(x: f64) -> f64 {
    if x <= -1.0 {
        return f64::NEG_INFINITY;
    }
    if x >= 1.0 {
        return f64::INFINITY;
    }
    if x == 0.0 {
        return 0.0;
    }
    let mut w = -((1.0 - x) * (1.0 + x)).ln();
    let p = if w < 5.0 {
        w -= 2.5;
        [
            2.81022636e-08,
            3.43273939e-07,
            -3.5233877e-06,
            -4.39150654e-06,
            0.00021858087,
            -0.00125372503,
            -0.00417768164,
            0.246640727,
            1.50140941,
        ]
        .iter()
        .fold(0.0, |acc, c| acc * w + c)
    } else {
        w = w.sqrt() - 3.0;
        [
            -0.000200214257,
            0.000100950558,
            0.00134934322,
            -0.00367342844,
            0.00573950773,
            -0.0076224613,
            0.00943887047,
            1.00167406,
            2.83297682,
        ]
        .iter()
        .fold(0.0, |acc, c| acc * w + c)
    };
    let mut y = p * x;
    let two_over_sqrt_pi = 2.0 / std::f64::consts::PI.sqrt();
    for _ in 0..3 {
        let f = libm::erf(y) - x;
        if f == 0.0 {
            break;
        }
        let df = two_over_sqrt_pi * (-y * y).exp();
        y -= f / (df + y * f);
    }
    y
}

/// Level-to-knots map `m(nu) = 2^(nu+1) - 1`.
pub fn level_to_knots(nu: u32) -> usize {
    (1usize << (nu + 1)) - 1
}

/// Exact identity of a node: transformed abscissa `x + 1 = num / den`,
/// reduced. The origin is `1/1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId {
    pub num: u64,
    pub den: u64,
}

impl NodeId {
    pub const ORIGIN: NodeId = NodeId { num: 1, den: 1 };

    fn reduced(num: u64, den: u64) -> Self {
        let g = gcd(num, den);
        Self {
            num: num / g,
            den: den / g,
        }
    }

    /// Abscissa in the transformed variable `x in (-1, 1)`.
    pub fn transformed(&self) -> f64 {
        self.num as f64 / self.den as f64 - 1.0
    }

    pub fn is_origin(&self) -> bool {
        *self == Self::ORIGIN
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Gaussian-adapted node family for piecewise polynomials of degree `p - 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeFamily1D {
    p: u32,
    sigma2: f64,
    alpha: f64,
}

impl NodeFamily1D {
    pub const DEFAULT_SIGMA2: f64 = 5.0;

    pub fn new(p: u32, sigma2: f64) -> Result<Self, InterpError> {
        if p < 2 {
            return Err(InterpError::InvalidOrder(p));
        }
        if sigma2.is_nan() || sigma2 <= 1.0 || sigma2.is_infinite() {
            return Err(InterpError::InvalidVariance(sigma2));
        }
        let alpha = (4.0 * p as f64 / (1.0 - 1.0 / sigma2)).sqrt();
        Ok(Self { p, sigma2, alpha })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Node transform `phi(x) = alpha erfinv(x)`.
    pub fn phi(&self, x: f64) -> f64 {
        self.alpha * erf_inv(x)
    }

    pub fn coordinate(&self, id: NodeId) -> f64 {
        if id.is_origin() {
            0.0
        } else {
            self.phi(id.transformed())
        }
    }

    /// Constant `sqrt(sigma2) (alpha sqrt(pi) / 2)^(2p)`.
    pub fn c_phi(&self) -> f64 {
        self.sigma2.sqrt()
            * (self.alpha * std::f64::consts::PI.sqrt() / 2.0).powi(2 * self.p as i32)
    }

    /// Number of nodes (main and extra) on a level: `(m - 1)(p - 1) + 1`.
    pub fn nodes_on_level(&self, level: u32) -> usize {
        (level_to_knots(level) - 1) * (self.p as usize - 1) + 1
    }

    pub fn make_nodes(&self, level: u32) -> Result<Nodes1D, InterpError> {
        if level > MAX_LEVEL {
            return Err(InterpError::LevelTooFine(level));
        }
        let pm1 = self.p as u64 - 1;
        let den = pm1 << level;
        let m = level_to_knots(level) as u64;
        let ids: Vec<NodeId> = (pm1..=m * pm1).map(|q| NodeId::reduced(q, den)).collect();
        let all: Vec<f64> = ids.iter().map(|&id| self.coordinate(id)).collect();
        let main = all.iter().step_by(pm1 as usize).copied().collect();
        let extras = all
            .iter()
            .enumerate()
            .filter(|(i, _)| !(*i as u64).is_multiple_of(pm1))
            .map(|(_, &y)| y)
            .collect();
        Ok(Nodes1D {
            level,
            p: self.p,
            main,
            extras,
            all,
            ids,
        })
    }
}

/// Nodes of one level. `all` is the sorted union of main and extra nodes;
/// bounded interval `s` spans `all[s(p-1)..=(s+1)(p-1)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Nodes1D {
    level: u32,
    p: u32,
    main: Vec<f64>,
    extras: Vec<f64>,
    all: Vec<f64>,
    ids: Vec<NodeId>,
}

impl Nodes1D {
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn main(&self) -> &[f64] {
        &self.main
    }

    pub fn extras(&self) -> &[f64] {
        &self.extras
    }

    pub fn all(&self) -> &[f64] {
        &self.all
    }

    pub fn ids(&self) -> &[NodeId] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.all.len()
    }

    pub fn is_empty(&self) -> bool {
        self.all.is_empty()
    }

    /// Non-zero Lagrange weights of the interpolant at `t`: returns the index
    /// of the first node involved and `p` weights (a single unit weight when
    /// the level has one node).
    pub fn weights(&self, t: f64) -> (usize, Vec<f64>) {
        let m = self.main.len();
        if m == 1 {
            return (0, vec![1.0]);
        }
        let pm1 = self.p as usize - 1;
        // Last bounded interval whose left end is <= t; the outer intervals
        // extend polynomially into the tails.
        let s = self.main[1..m - 1].partition_point(|&y| y <= t);
        let start = s * pm1;
        let nodes = &self.all[start..=start + pm1];
        let w = nodes
            .iter()
            .enumerate()
            .map(|(i, &yi)| {
                nodes
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, &yj)| (t - yj) / (yi - yj))
                    .product()
            })
            .collect();
        (start, w)
    }

    /// Interpolates payload values given at `all()`.
    pub fn interpolate<V: Payload>(&self, values: &[V], t: f64) -> Result<V, InterpError> {
        if values.len() != self.all.len() {
            return Err(InterpError::Misaligned {
                expected: self.all.len(),
                got: values.len(),
            });
        }
        let (start, w) = self.weights(t);
        Ok(crate::payload::combine(
            w.iter().zip(&values[start..]).map(|(&wi, v)| (wi, v)),
        ))
    }
}

/// Piecewise degree-`(p-1)` interpolation of `values` (aligned with
/// `nodes.all()`) evaluated at `t`, with polynomial extension of the first
/// and last bounded pieces into the tails.
pub fn interpolate_1d(nodes: &Nodes1D, values: &[f64], t: f64) -> Result<f64, InterpError> {
    nodes.interpolate(values, t)
}

/// Detail `Delta_i u = I_{m(i)} u - I_{m(i-1)} u` with `I_{m(-1)} = 0`,
/// sampled eagerly on the two node levels involved.
pub struct Detail<V> {
    fine: Nodes1D,
    fine_values: Vec<V>,
    coarse: Option<(Nodes1D, Vec<V>)>,
}

impl<V: Payload> Detail<V> {
    pub fn eval(&self, t: f64) -> V {
        let mut out = self
            .fine
            .interpolate(&self.fine_values, t)
            .expect("aligned by construction");
        if let Some((nodes, values)) = &self.coarse {
            let c = nodes
                .interpolate(values, t)
                .expect("aligned by construction");
            out.axpy(-1.0, &c);
        }
        out
    }
}

pub fn detail_apply<V: Payload>(
    fam: &NodeFamily1D,
    level: u32,
    u: impl Fn(f64) -> V,
) -> Result<Detail<V>, InterpError> {
    let fine = fam.make_nodes(level)?;
    let fine_values = fine.all().iter().map(|&y| u(y)).collect();
    let coarse = if level == 0 {
        None
    } else {
        let nodes = fam.make_nodes(level - 1)?;
        let values = nodes.all().iter().map(|&y| u(y)).collect();
        Some((nodes, values))
    };
    Ok(Detail {
        fine,
        fine_values,
        coarse,
    })
}
