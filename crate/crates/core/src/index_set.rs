//! Multi-indices, downward-closed index sets and their a-priori selection by
//! profit (value over work).
//!
//! Dimensions are the 0-based linear Lévy-Ciesielski indices; dimension `n`
//! belongs to hierarchical level `ceil(log2(n + 1))`, which is the level that
//! enters the profit formulas.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lc_wiener::level_of_linear;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IndexSetError {
    #[error("profit increases from {parent} to {child}: {parent_profit} < {child_profit}")]
    NonMonotoneProfit {
        parent: MultiIndex,
        child: MultiIndex,
        parent_profit: f64,
        child_profit: f64,
    },
    #[error("profit of {0} is not a finite non-negative number")]
    InvalidProfit(MultiIndex),
    #[error("search space exhausted after {0} multi-indices")]
    Exhausted(usize),
    #[error("set is not downward-closed: {missing} missing below {member}")]
    NotDownwardClosed {
        member: MultiIndex,
        missing: MultiIndex,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Finitely supported multi-index, stored as `(dimension, level)` pairs with
/// strictly increasing dimensions and levels `>= 1`.
///
/// Ordering is shortlex: first by `|nu|_1`, then by the entry list.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct MultiIndex {
    entries: Vec<(usize, u32)>,
}

impl MultiIndex {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn unit(dim: usize) -> Self {
        Self {
            entries: vec![(dim, 1)],
        }
    }

    /// Builds from arbitrary `(dim, level)` pairs; zero levels are dropped and
    /// repeated dimensions are summed.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, u32)>) -> Self {
        let mut entries: Vec<(usize, u32)> = Vec::new();
        let mut raw: Vec<(usize, u32)> = pairs.into_iter().filter(|&(_, l)| l > 0).collect();
        raw.sort_unstable();
        for (d, l) in raw {
            match entries.last_mut() {
                Some(last) if last.0 == d => last.1 += l,
                _ => entries.push((d, l)),
            }
        }
        Self { entries }
    }

    /// Dense constructor: `levels[d]` is the level of dimension `d`.
    pub fn from_dense(levels: &[u32]) -> Self {
        Self::from_pairs(levels.iter().copied().enumerate())
    }

    pub fn entries(&self) -> &[(usize, u32)] {
        &self.entries
    }

    pub fn level(&self, dim: usize) -> u32 {
        self.entries
            .binary_search_by_key(&dim, |e| e.0)
            .map(|i| self.entries[i].1)
            .unwrap_or(0)
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|e| e.0)
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn l1(&self) -> u32 {
        self.entries.iter().map(|e| e.1).sum()
    }

    pub fn max_dim(&self) -> Option<usize> {
        self.entries.last().map(|e| e.0)
    }

    /// `nu + e_dim`.
    pub fn incremented(&self, dim: usize) -> Self {
        let mut entries = self.entries.clone();
        match entries.binary_search_by_key(&dim, |e| e.0) {
            Ok(i) => entries[i].1 += 1,
            Err(i) => entries.insert(i, (dim, 1)),
        }
        Self { entries }
    }

    /// `nu - e_dim`, or `None` when `dim` is not in the support.
    pub fn decremented(&self, dim: usize) -> Option<Self> {
        let i = self.entries.binary_search_by_key(&dim, |e| e.0).ok()?;
        let mut entries = self.entries.clone();
        if entries[i].1 == 1 {
            entries.remove(i);
        } else {
            entries[i].1 -= 1;
        }
        Some(Self { entries })
    }

    pub fn backward_neighbors(&self) -> impl Iterator<Item = MultiIndex> + '_ {
        self.support().filter_map(|d| self.decremented(d))
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.l1()
            .cmp(&other.l1())
            .then_with(|| self.entries.cmp(&other.entries))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Text form `dim:level,dim:level`; the zero index is the empty string.
impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (d, l)) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{d}:{l}")?;
        }
        Ok(())
    }
}

impl FromStr for MultiIndex {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Self::zero());
        }
        let mut pairs = Vec::new();
        for item in s.split(',') {
            let (d, l) = item
                .split_once(':')
                .ok_or_else(|| format!("expected dim:level, got {item:?}"))?;
            let d: usize = d
                .trim()
                .parse()
                .map_err(|e| format!("bad dimension {d:?}: {e}"))?;
            let l: u32 = l
                .trim()
                .parse()
                .map_err(|e| format!("bad level {l:?}: {e}"))?;
            if l == 0 {
                return Err(format!("zero level for dimension {d}"));
            }
            if pairs.iter().any(|&(pd, _)| pd == d) {
                return Err(format!("dimension {d} repeated"));
            }
            pairs.push((d, l));
        }
        Ok(Self::from_pairs(pairs))
    }
}

/// Downward-closed set of multi-indices. Members keep their insertion order,
/// so for sets produced by [`build_quasi_optimal`] every prefix is itself the
/// quasi-optimal set of that size.
#[derive(Debug, Clone, Default)]
pub struct IndexSet {
    members: Vec<MultiIndex>,
    lookup: HashSet<MultiIndex>,
}

impl PartialEq for IndexSet {
    fn eq(&self, other: &Self) -> bool {
        self.lookup == other.lookup
    }
}

impl IndexSet {
    /// `{0}`.
    pub fn zero() -> Self {
        let mut set = Self::default();
        set.push_unchecked(MultiIndex::zero());
        set
    }

    pub fn from_indices(
        indices: impl IntoIterator<Item = MultiIndex>,
    ) -> Result<Self, IndexSetError> {
        let mut set = Self::default();
        for nu in indices {
            set.push_unchecked(nu);
        }
        set.check_downward_closed()?;
        Ok(set)
    }

    /// Full tensor set `{nu : nu_d <= levels[d]}`.
    pub fn tensor(levels: &[u32]) -> Self {
        let mut members = vec![MultiIndex::zero()];
        for (d, &max) in levels.iter().enumerate() {
            let mut next = Vec::new();
            for nu in &members {
                for l in 1..=max {
                    next.push(MultiIndex::from_pairs(
                        nu.entries().iter().copied().chain([(d, l)]),
                    ));
                }
            }
            members.extend(next);
        }
        members.sort();
        let mut set = Self::default();
        for nu in members {
            set.push_unchecked(nu);
        }
        set
    }

    fn push_unchecked(&mut self, nu: MultiIndex) {
        if self.lookup.insert(nu.clone()) {
            self.members.push(nu);
        }
    }

    pub fn contains(&self, nu: &MultiIndex) -> bool {
        self.lookup.contains(nu)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, MultiIndex> {
        self.members.iter()
    }

    pub fn members(&self) -> &[MultiIndex] {
        &self.members
    }

    /// First `k` members in insertion order.
    pub fn prefix(&self, k: usize) -> IndexSet {
        let mut set = Self::default();
        for nu in self.members.iter().take(k) {
            set.push_unchecked(nu.clone());
        }
        set
    }

    pub fn check_downward_closed(&self) -> Result<(), IndexSetError> {
        for nu in &self.members {
            for b in nu.backward_neighbors() {
                if !self.contains(&b) {
                    return Err(IndexSetError::NotDownwardClosed {
                        member: nu.clone(),
                        missing: b,
                    });
                }
            }
        }
        if !self.members.is_empty() && !self.contains(&MultiIndex::zero()) {
            return Err(IndexSetError::NotDownwardClosed {
                member: self.members[0].clone(),
                missing: MultiIndex::zero(),
            });
        }
        Ok(())
    }

    pub fn is_downward_closed(&self) -> bool {
        self.check_downward_closed().is_ok()
    }

    /// Number of active parameters: one past the largest dimension used.
    pub fn active_dimensions(&self) -> usize {
        self.members
            .iter()
            .filter_map(|nu| nu.max_dim())
            .max()
            .map_or(0, |d| d + 1)
    }

    pub fn max_level(&self) -> u32 {
        self.members
            .iter()
            .flat_map(|nu| nu.entries().iter().map(|e| e.1))
            .max()
            .unwrap_or(0)
    }

    /// One multi-index per line in insertion order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for nu in &self.members {
            out.push_str(&nu.to_string());
            out.push('\n');
        }
        out
    }

    /// Parses [`IndexSet::to_text`] output. Lines starting with `#` are
    /// comments; an empty line is the zero index.
    pub fn from_text(text: &str) -> Result<Self, IndexSetError> {
        let mut set = Self::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim_start().starts_with('#') {
                continue;
            }
            let nu: MultiIndex = line.parse().map_err(|message| IndexSetError::Parse {
                line: i + 1,
                message,
            })?;
            set.push_unchecked(nu);
        }
        set.check_downward_closed()?;
        Ok(set)
    }
}

impl<'a> IntoIterator for &'a IndexSet {
    type Item = &'a MultiIndex;
    type IntoIter = std::slice::Iter<'a, MultiIndex>;

    fn into_iter(self) -> Self::IntoIter {
        self.members.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ProfitVariant {
    Basic,
    #[default]
    Improved,
}

impl FromStr for ProfitVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "basic" => Ok(Self::Basic),
            "improved" => Ok(Self::Improved),
            other => Err(format!("unknown profit variant {other:?}")),
        }
    }
}

impl fmt::Display for ProfitVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Basic => "basic",
            Self::Improved => "improved",
        })
    }
}

/// Constants of the value estimates.
///
/// Basic: `rho = scale 2^((1-alpha) l / 2)`. Improved: `rho = scale
/// 2^((3/2-delta) l) / r_l` when `nu_i = 1` and `scale 2^((1/2-delta) l)`
/// otherwise, where `r_l` counts the dimensions of level `l` at level 1 in
/// `nu` (only when `include_r_factor` is set). Values per dimension are
/// `c1 / rho` for `nu_i = 1` and `c2 (2^nu_i rho)^-p` for `nu_i > 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfitParams {
    pub p: u32,
    pub variant: ProfitVariant,
    pub include_r_factor: bool,
    pub c1: f64,
    pub c2: f64,
    pub scale: f64,
    pub alpha: f64,
    pub delta: f64,
}

impl ProfitParams {
    /// All constants set to their neutral values (`c1 = c2 = scale = 1`,
    /// `alpha = delta = 0`), as used in the convergence experiments.
    pub fn new(p: u32, variant: ProfitVariant) -> Self {
        Self {
            p,
            variant,
            include_r_factor: false,
            c1: 1.0,
            c2: 1.0,
            scale: 1.0,
            alpha: 0.0,
            delta: 0.0,
        }
    }

    pub fn basic(p: u32) -> Self {
        Self::new(p, ProfitVariant::Basic)
    }

    pub fn improved(p: u32) -> Self {
        Self::new(p, ProfitVariant::Improved)
    }

    pub fn with_r_factor(mut self) -> Self {
        self.include_r_factor = true;
        self
    }

    pub fn profit(&self, nu: &MultiIndex) -> f64 {
        value(nu, self) / work(nu, self.p)
    }
}

/// Hierarchical level carried by a parameter dimension.
pub fn dimension_level(dim: usize) -> u32 {
    level_of_linear(dim)
}

/// `prod_{i in supp nu} p 2^nu_i`.
pub fn work(nu: &MultiIndex, p: u32) -> f64 {
    nu.entries()
        .iter()
        .map(|&(_, l)| p as f64 * 2f64.powi(l as i32))
        .product()
}

pub fn value(nu: &MultiIndex, params: &ProfitParams) -> f64 {
    let p = params.p as i32;
    nu.entries()
        .iter()
        .map(|&(d, l)| {
            let level = dimension_level(d) as f64;
            let rho = match params.variant {
                ProfitVariant::Basic => {
                    params.scale * 2f64.powf((1.0 - params.alpha) * level / 2.0)
                }
                ProfitVariant::Improved if l == 1 => {
                    let r = if params.include_r_factor {
                        level_one_count(nu, dimension_level(d)) as f64
                    } else {
                        1.0
                    };
                    params.scale * 2f64.powf((1.5 - params.delta) * level) / r
                }
                ProfitVariant::Improved => params.scale * 2f64.powf((0.5 - params.delta) * level),
            };
            if l == 1 {
                params.c1 / rho
            } else {
                params.c2 * (2f64.powi(l as i32) * rho).powi(-p)
            }
        })
        .product()
}

/// `r_l(nu)`: dimensions of hierarchical level `level` where `nu` equals 1.
fn level_one_count(nu: &MultiIndex, level: u32) -> usize {
    nu.entries()
        .iter()
        .filter(|&&(d, l)| l == 1 && dimension_level(d) == level)
        .count()
}

pub fn profit_basic(nu: &MultiIndex, p: u32) -> f64 {
    ProfitParams::basic(p).profit(nu)
}

pub fn profit_improved(nu: &MultiIndex, p: u32) -> f64 {
    ProfitParams::improved(p).profit(nu)
}

/// Bounds of the multi-index search space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchSpace {
    pub max_dims: usize,
    pub max_level: u32,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            max_dims: 1 << 16,
            max_level: 30,
        }
    }
}

struct Candidate {
    profit: f64,
    index: MultiIndex,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl Ord for Candidate {
    // max-heap: highest profit first, then the shortlex-smaller index
    fn cmp(&self, other: &Self) -> Ordering {
        self.profit
            .total_cmp(&other.profit)
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// The `n` multi-indices of highest profit, ties broken in shortlex order,
/// built by best-first expansion of admissible forward neighbours.
///
/// Dimensions are activated lazily: the first unused dimension `e_D` is always
/// a candidate, which requires `profit(e_D)` to be non-increasing in `D`.
pub fn build_quasi_optimal(
    profit: impl Fn(&MultiIndex) -> f64,
    n: usize,
    space: SearchSpace,
) -> Result<IndexSet, IndexSetError> {
    let eval = |nu: &MultiIndex| -> Result<f64, IndexSetError> {
        let p = profit(nu);
        if p.is_finite() && p >= 0.0 {
            Ok(p)
        } else {
            Err(IndexSetError::InvalidProfit(nu.clone()))
        }
    };
    let mut set = IndexSet::default();
    if n == 0 {
        return Ok(set);
    }
    let mut heap = BinaryHeap::new();
    let mut queued: HashSet<MultiIndex> = HashSet::new();
    let zero = MultiIndex::zero();
    heap.push(Candidate {
        profit: eval(&zero)?,
        index: zero.clone(),
    });
    queued.insert(zero);
    let mut active = 0usize;
    let mut last_unit_profit: Option<f64> = None;

    while set.len() < n {
        let Some(Candidate { index: nu, .. }) = heap.pop() else {
            return Err(IndexSetError::Exhausted(set.len()));
        };
        set.push_unchecked(nu.clone());
        let opens_dimension =
            nu.is_zero() || (nu.support_len() == 1 && nu.entries()[0] == (active, 1));
        if opens_dimension && active < space.max_dims {
            if !nu.is_zero() {
                active += 1;
            }
            if active < space.max_dims {
                let unit = MultiIndex::unit(active);
                let p = eval(&unit)?;
                if let Some(prev) = last_unit_profit {
                    if p > prev {
                        return Err(IndexSetError::NonMonotoneProfit {
                            parent: MultiIndex::unit(active - 1),
                            child: unit,
                            parent_profit: prev,
                            child_profit: p,
                        });
                    }
                }
                last_unit_profit = Some(p);
                check_parents(&set, &unit, p, &eval)?;
                queued.insert(unit.clone());
                heap.push(Candidate {
                    profit: p,
                    index: unit,
                });
            }
        }
        for k in 0..active {
            let mu = nu.incremented(k);
            if mu.level(k) > space.max_level || queued.contains(&mu) {
                continue;
            }
            if mu.backward_neighbors().all(|b| set.contains(&b)) {
                let p = eval(&mu)?;
                check_parents(&set, &mu, p, &eval)?;
                queued.insert(mu.clone());
                heap.push(Candidate {
                    profit: p,
                    index: mu,
                });
            }
        }
    }
    Ok(set)
}

fn check_parents(
    set: &IndexSet,
    child: &MultiIndex,
    child_profit: f64,
    eval: &impl Fn(&MultiIndex) -> Result<f64, IndexSetError>,
) -> Result<(), IndexSetError> {
    debug_assert!(child.backward_neighbors().all(|b| set.contains(&b)));
    for parent in child.backward_neighbors() {
        let parent_profit = eval(&parent)?;
        if child_profit > parent_profit {
            return Err(IndexSetError::NonMonotoneProfit {
                parent,
                child: child.clone(),
                parent_profit,
                child_profit,
            });
        }
    }
    Ok(())
}

/// Quasi-optimal set for the given profit parameters.
pub fn build_with_params(
    params: &ProfitParams,
    n: usize,
    space: SearchSpace,
) -> Result<IndexSet, IndexSetError> {
    build_quasi_optimal(|nu| params.profit(nu), n, space)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn nu(pairs: &[(usize, u32)]) -> MultiIndex {
        MultiIndex::from_pairs(pairs.iter().copied())
    }

    #[test]
    fn work_examples() {
        assert_eq!(work(&MultiIndex::zero(), 2), 1.0);
        assert_eq!(work(&nu(&[(0, 1)]), 2), 4.0);
        assert_eq!(work(&nu(&[(0, 2), (1, 1)]), 2), 32.0);
    }

    #[test]
    fn profit_examples() {
        assert_eq!(profit_basic(&MultiIndex::zero(), 2), 1.0);
        assert_relative_eq!(profit_basic(&nu(&[(0, 1)]), 2), 0.25);
        assert_relative_eq!(profit_basic(&nu(&[(0, 2)]), 2), 1.0 / 128.0);
        assert_relative_eq!(profit_improved(&nu(&[(0, 1)]), 2), 0.25);
        assert_relative_eq!(profit_improved(&nu(&[(1, 1)]), 2), 2f64.powf(-1.5) / 4.0);
        assert_relative_eq!(
            profit_improved(&nu(&[(1, 1)]), 2),
            0.0883883476,
            max_relative = 1e-9
        );
        assert_eq!(profit_improved(&MultiIndex::zero(), 2), 1.0);
    }

    #[test]
    fn r_factor_multiplies_level_one_values() {
        let params = ProfitParams::improved(2).with_r_factor();
        // dims 2 and 3 share level 2, so r = 2 for both factors
        let both = nu(&[(2, 1), (3, 1)]);
        let plain = ProfitParams::improved(2).profit(&both);
        assert_relative_eq!(params.profit(&both), 4.0 * plain);
        let single = nu(&[(2, 1), (4, 1)]);
        assert_relative_eq!(
            params.profit(&single),
            ProfitParams::improved(2).profit(&single)
        );
    }

    #[test]
    fn dimension_levels_match_hierarchical_indexing() {
        for n in 0..4096 {
            assert_eq!(dimension_level(n), crate::lc_wiener::hier_index(n).level);
        }
        assert_eq!(dimension_level(0), 0);
        assert_eq!(dimension_level(1), 1);
        assert_eq!(dimension_level(2), 2);
        assert_eq!(dimension_level(4), 3);
    }

    #[test]
    fn quasi_optimal_examples() {
        let one = build_with_params(&ProfitParams::basic(2), 1, SearchSpace::default()).unwrap();
        assert_eq!(one.members(), &[MultiIndex::zero()]);
        let two = build_with_params(&ProfitParams::basic(2), 2, SearchSpace::default()).unwrap();
        assert_eq!(two.members(), &[MultiIndex::zero(), MultiIndex::unit(0)]);
    }

    #[test]
    fn detects_non_monotone_profit() {
        let bad = |nu: &MultiIndex| if nu.l1() == 1 { 2.0 } else { 1.0 };
        assert!(matches!(
            build_quasi_optimal(bad, 3, SearchSpace::default()),
            Err(IndexSetError::NonMonotoneProfit { .. })
        ));
        let growing_units = |nu: &MultiIndex| match nu.entries() {
            [] => 1.0,
            [(d, 1)] => 0.1 + 0.01 * *d as f64,
            _ => 0.0,
        };
        assert!(matches!(
            build_quasi_optimal(growing_units, 4, SearchSpace::default()),
            Err(IndexSetError::NonMonotoneProfit { .. })
        ));
        assert!(matches!(
            build_quasi_optimal(|_| f64::NAN, 1, SearchSpace::default()),
            Err(IndexSetError::InvalidProfit(_))
        ));
    }

    #[test]
    fn exhausting_the_search_space() {
        let space = SearchSpace {
            max_dims: 2,
            max_level: 1,
        };
        let set = build_with_params(&ProfitParams::basic(2), 4, space).unwrap();
        assert_eq!(set.len(), 4);
        assert_eq!(
            build_with_params(&ProfitParams::basic(2), 5, space),
            Err(IndexSetError::Exhausted(4))
        );
    }

    fn brute_force(params: &ProfitParams, n: usize, dims: usize, max_level: u32) -> IndexSet {
        let mut all = Vec::new();
        let total = (max_level as usize + 1).pow(dims as u32);
        for code in 0..total {
            let mut c = code;
            let mut levels = vec![0u32; dims];
            for l in levels.iter_mut() {
                *l = (c % (max_level as usize + 1)) as u32;
                c /= max_level as usize + 1;
            }
            let nu = MultiIndex::from_dense(&levels);
            all.push((params.profit(&nu), nu));
        }
        all.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        IndexSet::from_indices(all.into_iter().take(n).map(|(_, nu)| nu))
            .expect("sorted prefix is downward-closed")
    }

    #[test]
    fn matches_brute_force_on_truncated_space() {
        let space = SearchSpace {
            max_dims: 6,
            max_level: 4,
        };
        for params in [
            ProfitParams::basic(2),
            ProfitParams::improved(2),
            ProfitParams::basic(3),
            ProfitParams::improved(3),
        ] {
            for n in [1, 2, 5, 17, 60, 200, 700] {
                let built = build_with_params(&params, n, space).unwrap();
                let reference = brute_force(&params, n, 6, 4);
                assert_eq!(built, reference, "{params:?} n = {n}");
                assert_eq!(built.members(), reference.members(), "{params:?} n = {n}");
            }
        }
    }

    #[test]
    fn profits_are_monotone() {
        for p in [2, 3] {
            for params in [ProfitParams::basic(p), ProfitParams::improved(p)] {
                let base = [
                    MultiIndex::zero(),
                    nu(&[(0, 1)]),
                    nu(&[(0, 2), (5, 1)]),
                    nu(&[(3, 3), (17, 1), (40, 2)]),
                    nu(&[(1, 1), (2, 1), (63, 4)]),
                ];
                for b in &base {
                    for k in 0..64 {
                        assert!(
                            params.profit(&b.incremented(k)) <= params.profit(b),
                            "{params:?} {b} +e{k}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn text_format() {
        let set =
            build_with_params(&ProfitParams::improved(2), 12, SearchSpace::default()).unwrap();
        let text = set.to_text();
        assert!(text.starts_with("\n0:1\n"));
        let parsed = IndexSet::from_text(&text).unwrap();
        assert_eq!(parsed.members(), set.members());
        assert_eq!(
            "3:2,0:1".parse::<MultiIndex>().unwrap(),
            nu(&[(0, 1), (3, 2)])
        );
        assert!("0:0".parse::<MultiIndex>().is_err());
        assert!("1:1,1:2".parse::<MultiIndex>().is_err());
        assert!(IndexSet::from_text("\n1:1\n").is_ok());
        assert!(matches!(
            IndexSet::from_text("\n0:2\n"),
            Err(IndexSetError::NotDownwardClosed { .. })
        ));
        assert!(matches!(
            IndexSet::from_text("x"),
            Err(IndexSetError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn tensor_sets() {
        let t = IndexSet::tensor(&[2, 1]);
        assert_eq!(t.len(), 6);
        assert!(t.is_downward_closed());
        assert_eq!(t.active_dimensions(), 2);
        assert_eq!(t.max_level(), 2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn quasi_optimal_sets_are_downward_closed(n in 1usize..2000, improved in any::<bool>(), p in 2u32..4) {
            let params = if improved { ProfitParams::improved(p) } else { ProfitParams::basic(p) };
            let set = build_with_params(&params, n, SearchSpace::default()).unwrap();
            prop_assert_eq!(set.len(), n);
            prop_assert!(set.is_downward_closed());
            // every prefix is downward-closed as well
            prop_assert!(set.prefix(n / 2 + 1).is_downward_closed());
        }

        #[test]
        fn ordering_is_scale_invariant(n in 1usize..300, factor in 1e-3f64..1e3) {
            let params = ProfitParams::improved(2);
            let a = build_quasi_optimal(|nu| params.profit(nu), n, SearchSpace::default()).unwrap();
            let b = build_quasi_optimal(|nu| factor * params.profit(nu), n, SearchSpace::default()).unwrap();
            prop_assert_eq!(a.members(), b.members());
        }
    }
}
