//! Single- and multi-level sparse-grid collocation of the LLG sample paths,
//! cost accounting, multilevel grid sizing and Monte Carlo error estimates.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index_set::{build_with_params, IndexSet, IndexSetError, ProfitParams, SearchSpace};
use crate::interp1d::NodeFamily1D;
use crate::llg::{
    Damping, InitialCondition, LlgProblem, Mesh2D, NoiseCoefficient, SolveError, SolverOptions,
    Trajectory, TransferError,
};
use crate::payload::Payload;
use crate::sparse_grid::{GridError, GridPoint, SampleError, SparseGrid, SparseGridInterpolant};

#[derive(Debug, Error)]
pub enum CollocationError {
    #[error("solver failed at grid point {point}: {source}")]
    Sample {
        point: GridPoint,
        source: SolveError,
    },
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Transfer(#[from] TransferError),
    #[error(transparent)]
    IndexSet(#[from] IndexSetError),
    #[error("invalid schedule: {0}")]
    Schedule(String),
}

impl From<SampleError<SolveError>> for CollocationError {
    fn from(e: SampleError<SolveError>) -> Self {
        Self::Sample {
            point: e.point,
            source: e.source,
        }
    }
}

/// Space-time discretisation: `n` squares per side and `steps` time steps on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Discretization {
    pub n: usize,
    pub steps: usize,
}

impl Discretization {
    pub fn new(n: usize, steps: usize) -> Self {
        Self { n, steps }
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn tau(&self) -> f64 {
        1.0 / self.steps as f64
    }

    /// `tau^-1 h^-2`.
    pub fn sample_cost(&self) -> f64 {
        (self.steps * self.n * self.n) as f64
    }

    pub fn refines(&self, coarse: &Discretization) -> bool {
        self.n.is_multiple_of(coarse.n) && self.steps.is_multiple_of(coarse.steps)
    }

    /// Number of Lévy-Ciesielski coefficients that influence the path values
    /// at the time nodes.
    pub fn relevant_dimensions(&self) -> usize {
        self.steps.next_power_of_two()
    }
}

/// Increasingly fine discretisations, each refining the previous one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSchedule {
    levels: Vec<Discretization>,
}

impl LevelSchedule {
    pub fn new(levels: Vec<Discretization>) -> Result<Self, CollocationError> {
        if levels.is_empty() {
            return Err(CollocationError::Schedule("no levels".into()));
        }
        for w in levels.windows(2) {
            if !(w[1].n >= w[0].n && w[1].steps > w[0].steps && w[1].refines(&w[0])) {
                return Err(CollocationError::Schedule(format!(
                    "{:?} does not refine {:?}",
                    w[1], w[0]
                )));
            }
        }
        Ok(Self { levels })
    }

    /// `tau_k = 2^{-k-2}`, `h_k = 2^{-k}` for `k = 0..=k_max`.
    pub fn dyadic(k_max: usize) -> Self {
        Self {
            levels: (0..=k_max)
                .map(|k| Discretization::new(1 << k, 1 << (k + 2)))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn level(&self, k: usize) -> Discretization {
        self.levels[k]
    }

    pub fn levels(&self) -> &[Discretization] {
        &self.levels
    }

    /// First `k_max + 1` levels.
    pub fn truncated(&self, k_max: usize) -> Self {
        Self {
            levels: self.levels[..=k_max].to_vec(),
        }
    }
}

/// Problem data shared by all discretisations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub noise: NoiseCoefficient,
    pub initial: InitialCondition,
    pub damping: Damping,
    pub solver: SolverOptions,
}

impl ProblemSpec {
    /// Unit example noise from the constant state `(0, 0, 1)`.
    pub fn sg_experiment() -> Self {
        Self {
            noise: NoiseCoefficient::example(),
            initial: InitialCondition::Constant { m: [0.0, 0.0, 1.0] },
            damping: Damping::default(),
            solver: SolverOptions::default(),
        }
    }

    /// Example noise at one fifth intensity, starting from the noise field.
    pub fn ml_experiment() -> Self {
        Self {
            noise: NoiseCoefficient::example().with_intensity(0.2),
            initial: InitialCondition::NoiseField,
            damping: Damping::default(),
            solver: SolverOptions::default(),
        }
    }

    pub fn build(&self, d: Discretization) -> LlgProblem {
        LlgProblem::new(d.n, d.steps, self.noise, self.initial)
            .with_damping(self.damping)
            .with_options(self.solver)
    }
}

/// Nested profit-ordered index sets and the grid size of every prefix.
#[derive(Debug, Clone)]
pub struct GridSequence {
    params: ProfitParams,
    set: IndexSet,
    sizes: Vec<usize>,
}

impl GridSequence {
    /// Sequence long enough to contain a grid with at least `min_points` points.
    pub fn with_points(params: ProfitParams, min_points: usize) -> Result<Self, IndexSetError> {
        let mut n = 32;
        loop {
            let set = build_with_params(&params, n, SearchSpace::default())?;
            let sizes = prefix_sizes(&set, params.p);
            if *sizes.last().expect("non-empty") >= min_points {
                return Ok(Self { params, set, sizes });
            }
            n *= 2;
        }
    }

    pub fn params(&self) -> &ProfitParams {
        &self.params
    }

    /// `#H` of the first `k + 1` multi-indices.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Distinct achievable grid sizes.
    pub fn achievable(&self) -> &[usize] {
        &self.sizes
    }

    pub fn index_set(&self, prefix: usize) -> IndexSet {
        self.set.prefix(prefix)
    }

    /// Smallest prefix whose grid has at least `points` points.
    pub fn prefix_at_least(&self, points: usize) -> Option<usize> {
        let i = self.sizes.partition_point(|&s| s < points);
        (i < self.sizes.len()).then_some(i + 1)
    }

    /// Largest prefix whose grid has at most `points` points.
    pub fn prefix_at_most(&self, points: usize) -> Option<usize> {
        let i = self.sizes.partition_point(|&s| s <= points);
        (i > 0).then_some(i)
    }

    pub fn size_of(&self, prefix: usize) -> usize {
        self.sizes[prefix - 1]
    }

    pub fn grid(&self, prefix: usize, family: NodeFamily1D) -> Result<SparseGrid, GridError> {
        SparseGrid::new(self.index_set(prefix), family)
    }
}

/// Grid size after each prefix of a nested downward-closed sequence: every
/// added `nu` contributes `prod_i (p - 1) 2^{nu_i}` new points.
pub fn prefix_sizes(set: &IndexSet, p: u32) -> Vec<usize> {
    let mut total = 0usize;
    set.iter()
        .map(|nu| {
            total += nu
                .entries()
                .iter()
                .map(|&(_, l)| (p as usize - 1) << l)
                .product::<usize>();
            total
        })
        .collect()
}

/// One entry of a multilevel sizing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelSize {
    /// Lower bound on `#H` from the balancing condition.
    pub bound: f64,
    /// Prefix length of the nested sequence.
    pub prefix: usize,
    pub points: usize,
    pub capped: bool,
}

/// Constants of the multilevel balancing condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlConstants {
    pub c_fe: f64,
    pub c_sg: f64,
    pub r: f64,
}

impl Default for MlConstants {
    fn default() -> Self {
        Self {
            c_fe: 0.7510,
            c_sg: 0.1721,
            r: 0.4703,
        }
    }
}

/// Raw lower bounds `#H_{Lambda_{K-k}} >= (C_SG (K+1) / C_FE * (tau_k + h_k) / (tau_K + h_K))^{1/r}`,
/// listed for `Lambda_0..Lambda_K`.
pub fn ml_size_bounds(k_max: usize, c: &MlConstants, schedule: &LevelSchedule) -> Vec<f64> {
    let err = |k: usize| {
        let d = schedule.level(k);
        d.tau() + d.h()
    };
    (0..=k_max)
        .map(|j| {
            let k = k_max - j;
            (c.c_sg * (k_max as f64 + 1.0) / c.c_fe * err(k) / err(k_max)).powf(1.0 / c.r)
        })
        .collect()
}

/// Smallest achievable grids meeting the balancing condition, for
/// `Lambda_0..Lambda_K`. With a `cap`, larger requirements are replaced by the
/// largest achievable grid not exceeding the cap.
pub fn ml_grid_sizing(
    k_max: usize,
    c: &MlConstants,
    schedule: &LevelSchedule,
    seq: &GridSequence,
    cap: Option<usize>,
) -> Vec<LevelSize> {
    ml_size_bounds(k_max, c, schedule)
        .into_iter()
        .map(|bound| {
            let need = bound.ceil().max(1.0) as usize;
            let mut prefix = seq.prefix_at_least(need).unwrap_or(seq.sizes.len());
            let mut capped = false;
            if let Some(cap) = cap {
                if seq.size_of(prefix) > cap {
                    prefix = seq.prefix_at_most(cap).unwrap_or(1);
                    capped = true;
                }
            }
            LevelSize {
                bound,
                prefix,
                points: seq.size_of(prefix),
                capped,
            }
        })
        .collect()
}

/// Cost of a collocation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub grid_sizes: Vec<usize>,
    /// `tau^-1 h^-2` of the discretisation paired with each grid.
    pub sample_costs: Vec<f64>,
    /// `sum_k #H_k C_sample`.
    pub modeled: f64,
}

impl CostReport {
    pub fn new(grid_sizes: Vec<usize>, sample_costs: Vec<f64>) -> Self {
        let modeled = grid_sizes
            .iter()
            .zip(&sample_costs)
            .map(|(&q, &c)| q as f64 * c)
            .sum();
        Self {
            grid_sizes,
            sample_costs,
            modeled,
        }
    }
}

/// Multilevel interpolant `sum_j I_{Lambda_j}[m_{K-j} - m_{K-j-1}]`; term `j`
/// lives on discretisation `K - j`.
#[derive(Debug, Clone)]
pub struct MultiLevelInterpolant {
    terms: Vec<(Discretization, SparseGridInterpolant<Trajectory>)>,
    finest: Discretization,
}

impl MultiLevelInterpolant {
    pub fn terms(&self) -> &[(Discretization, SparseGridInterpolant<Trajectory>)] {
        &self.terms
    }

    pub fn finest(&self) -> Discretization {
        self.finest
    }

    /// Sum of the evaluated terms on `target`, which must refine every level.
    pub fn evaluate_on(
        &self,
        z: &[f64],
        target: Discretization,
    ) -> Result<Trajectory, TransferError> {
        let mut acc: Option<Trajectory> = None;
        for (_, interp) in &self.terms {
            let part = interp.evaluate(z).prolongate(target.n, target.steps)?;
            match &mut acc {
                None => acc = Some(part),
                Some(a) => a.axpy(1.0, &part),
            }
        }
        Ok(acc.expect("at least one term"))
    }

    pub fn evaluate(&self, z: &[f64]) -> Trajectory {
        self.evaluate_on(z, self.finest)
            .expect("levels refine into the finest")
    }
}

type CacheKey = (Discretization, GridPoint);

/// Sampler of the parametric problem with a per-(discretisation, point)
/// cache and a count of the solves actually performed.
pub struct Collocation {
    spec: ProblemSpec,
    family: NodeFamily1D,
    problems: Mutex<HashMap<Discretization, Arc<LlgProblem>>>,
    cache: Mutex<HashMap<CacheKey, Arc<Trajectory>>>,
    solves: Mutex<HashMap<Discretization, usize>>,
}

impl Collocation {
    pub fn new(spec: ProblemSpec, family: NodeFamily1D) -> Self {
        Self {
            spec,
            family,
            problems: Mutex::new(HashMap::new()),
            cache: Mutex::new(HashMap::new()),
            solves: Mutex::new(HashMap::new()),
        }
    }

    pub fn family(&self) -> &NodeFamily1D {
        &self.family
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn problem(&self, d: Discretization) -> Arc<LlgProblem> {
        let mut problems = self.problems.lock().expect("problem table poisoned");
        problems
            .entry(d)
            .or_insert_with(|| Arc::new(self.spec.build(d)))
            .clone()
    }

    /// Solve count per discretisation.
    pub fn solves(&self) -> HashMap<Discretization, usize> {
        self.solves.lock().expect("solve table poisoned").clone()
    }

    /// Sum of `tau^-1 h^-2` over the solves performed so far.
    pub fn incurred_cost(&self) -> f64 {
        self.solves()
            .iter()
            .map(|(d, &c)| c as f64 * d.sample_cost())
            .sum()
    }

    pub fn clear_cache(&self) {
        self.cache.lock().expect("cache poisoned").clear();
    }

    /// Sample path at a grid point, cached.
    pub fn sample(
        &self,
        d: Discretization,
        point: &GridPoint,
    ) -> Result<Arc<Trajectory>, SolveError> {
        let key = (d, point.clone());
        if let Some(t) = self.cache.lock().expect("cache poisoned").get(&key) {
            return Ok(t.clone());
        }
        let problem = self.problem(d);
        let y = point.to_param(&self.family, d.relevant_dimensions());
        let traj = Arc::new(problem.sample_path(&y)?);
        *self
            .solves
            .lock()
            .expect("solve table poisoned")
            .entry(d)
            .or_insert(0) += 1;
        self.cache
            .lock()
            .expect("cache poisoned")
            .insert(key, traj.clone());
        Ok(traj)
    }

    /// Uncached sample path at an arbitrary parameter vector.
    pub fn solve(&self, d: Discretization, y: &[f64]) -> Result<Trajectory, SolveError> {
        let t = self.problem(d).sample_path(y)?;
        *self
            .solves
            .lock()
            .expect("solve table poisoned")
            .entry(d)
            .or_insert(0) += 1;
        Ok(t)
    }

    /// `I_Lambda[m_{tau,h}]`.
    pub fn single_level(
        &self,
        set: IndexSet,
        d: Discretization,
    ) -> Result<SparseGridInterpolant<Trajectory>, CollocationError> {
        let grid = SparseGrid::new(set, self.family)?;
        Ok(SparseGridInterpolant::build(grid, |p, _| {
            self.sample(d, p).map(|t| (*t).clone())
        })?)
    }

    /// Multilevel interpolant with `sets[j]` paired with level `K - j` of
    /// `schedule`, where `K = sets.len() - 1`.
    pub fn multi_level(
        &self,
        schedule: &LevelSchedule,
        sets: &[IndexSet],
    ) -> Result<MultiLevelInterpolant, CollocationError> {
        if sets.is_empty() || sets.len() > schedule.len() {
            return Err(CollocationError::Schedule(format!(
                "{} index sets for {} levels",
                sets.len(),
                schedule.len()
            )));
        }
        let k_max = sets.len() - 1;
        let mut terms = Vec::with_capacity(sets.len());
        for (j, set) in sets.iter().enumerate() {
            let k = k_max - j;
            let fine = schedule.level(k);
            let coarse = (k > 0).then(|| schedule.level(k - 1));
            let grid = SparseGrid::new(set.clone(), self.family)?;
            let interp =
                SparseGridInterpolant::build(grid, |p, _| -> Result<Trajectory, SolveError> {
                    let mut diff = (*self.sample(fine, p)?).clone();
                    if let Some(c) = coarse {
                        let up = self
                            .sample(c, p)?
                            .prolongate(fine.n, fine.steps)
                            .expect("schedule levels refine");
                        diff.axpy(-1.0, &up);
                    }
                    Ok(diff)
                })?;
            terms.push((fine, interp));
        }
        Ok(MultiLevelInterpolant {
            terms,
            finest: schedule.level(k_max),
        })
    }
}

/// Monte Carlo reference: i.i.d. standard normal parameters and the sample
/// paths they produce on a reference discretisation.
pub struct McReference {
    disc: Discretization,
    mesh: Mesh2D,
    params: Vec<Vec<f64>>,
    paths: Vec<Trajectory>,
}

impl McReference {
    /// Draws `samples` parameter vectors of length `dims` from `ChaCha8(seed)`.
    pub fn draw(samples: usize, dims: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..samples)
            .map(|_| (0..dims).map(|_| rng.sample(StandardNormal)).collect())
            .collect()
    }

    pub fn new(
        colloc: &Collocation,
        disc: Discretization,
        samples: usize,
        dims: usize,
        seed: u64,
    ) -> Result<Self, CollocationError> {
        assert!(samples >= 1, "at least one Monte Carlo sample");
        let params = Self::draw(samples, dims, seed);
        let paths = params
            .par_iter()
            .map(|y| colloc.solve(disc, y))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            disc,
            mesh: Mesh2D::new(disc.n),
            params,
            paths,
        })
    }

    pub fn discretization(&self) -> Discretization {
        self.disc
    }

    pub fn params(&self) -> &[Vec<f64>] {
        &self.params
    }

    pub fn paths(&self) -> &[Trajectory] {
        &self.paths
    }

    /// `(1/N) sum_i |m_ref(y_i) - approx(y_i)|` in `L^2(0,T; H^1)`.
    pub fn error<F>(&self, approx: F) -> Result<f64, CollocationError>
    where
        F: Fn(&[f64]) -> Result<Trajectory, CollocationError> + Sync,
    {
        let errs = self
            .params
            .par_iter()
            .zip(&self.paths)
            .map(|(y, reference)| {
                let a = approx(y)?;
                Ok(reference.distance(&a, &self.mesh, self.disc.steps)?)
            })
            .collect::<Result<Vec<f64>, CollocationError>>()?;
        Ok(errs.iter().sum::<f64>() / errs.len() as f64)
    }
}

/// Monte Carlo error of a single-level interpolant against its own sampler.
pub fn estimate_error_mc(
    approx: &SparseGridInterpolant<Trajectory>,
    reference: &McReference,
) -> Result<f64, CollocationError> {
    reference.error(|y| Ok(approx.evaluate(y)))
}

/// Least-squares fit `log y = log c + e log x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    pub coefficient: f64,
    pub exponent: f64,
}

pub fn fit_power_law(points: &[(f64, f64)]) -> Option<PowerLaw> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|&(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let exponent = sxy / sxx;
    Some(PowerLaw {
        coefficient: (my - exponent * mx).exp(),
        exponent,
    })
}

/// `C_SG` and `r` from `(points, error)` pairs: `error ~ C_SG points^{-r}`.
pub fn fit_sg_constants(rows: &[(usize, f64)]) -> Option<(f64, f64)> {
    let fit = fit_power_law(&rows.iter().map(|&(q, e)| (q as f64, e)).collect::<Vec<_>>())?;
    Some((fit.coefficient, -fit.exponent))
}

/// `C_FE` from `(tau + h, error)` pairs assuming first order: the mean of
/// `error / (tau + h)`.
pub fn fit_fe_constant(rows: &[(f64, f64)]) -> Option<f64> {
    if rows.is_empty() {
        return None;
    }
    Some(rows.iter().map(|&(s, e)| e / s).sum::<f64>() / rows.len() as f64)
}

/// Configuration of the sparse-grid convergence study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgStudy {
    pub profit: ProfitParams,
    pub sigma2: f64,
    pub disc: Discretization,
    pub max_points: usize,
    pub mc_samples: usize,
    pub mc_dims: usize,
    pub seed: u64,
    pub spec: ProblemSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgRow {
    pub points: usize,
    pub error: f64,
    pub dims: usize,
    pub index_set_size: usize,
}

pub const SG_CSV_HEADER: &str = "collocation_points,error,active_dimensions,index_set_size";

impl SgRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{:e},{},{}",
            self.points, self.error, self.dims, self.index_set_size
        )
    }
}

/// Grid sizes roughly geometric with ratio 1.5 from the nested sequence.
fn study_prefixes(seq: &GridSequence, max_points: usize) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    let mut target = 1.0f64;
    while let Some(prefix) = seq.prefix_at_least(target.ceil() as usize) {
        if seq.size_of(prefix) > max_points {
            break;
        }
        if out.last() != Some(&prefix) {
            out.push(prefix);
        }
        target = (seq.size_of(prefix) as f64 * 1.5).max(target + 1.0);
    }
    out
}

impl SgStudy {
    /// Error of nested quasi-optimal grids against the same discretisation at
    /// Monte Carlo parameters. Samples are taken once on the largest grid.
    pub fn run(&self) -> Result<Vec<SgRow>, CollocationError> {
        let family = NodeFamily1D::new(self.profit.p, self.sigma2).map_err(GridError::from)?;
        let colloc = Collocation::new(self.spec, family);
        let seq = GridSequence::with_points(self.profit, self.max_points)?;
        let prefixes = study_prefixes(&seq, self.max_points);
        let largest = seq.grid(
            *prefixes.last().expect("Q = 1 is always admissible"),
            family,
        )?;
        let reference =
            McReference::new(&colloc, self.disc, self.mc_samples, self.mc_dims, self.seed)?;
        let samples = largest
            .points()
            .par_iter()
            .map(|p| colloc.sample(self.disc, p))
            .collect::<Result<Vec<_>, _>>()?;
        let mut rows = Vec::with_capacity(prefixes.len());
        for &prefix in &prefixes {
            let grid = seq.grid(prefix, family)?;
            let map: Vec<usize> = grid
                .points()
                .iter()
                .map(|p| largest.position(p).expect("nested grids"))
                .collect();
            let error = reference.error(|y| {
                let w = grid.lagrange_weights(y);
                Ok(crate::payload::combine(
                    w.iter().map(|&(i, wi)| (wi, &*samples[map[i]])),
                ))
            })?;
            rows.push(SgRow {
                points: grid.len(),
                error,
                dims: grid.dims(),
                index_set_size: prefix,
            });
        }
        Ok(rows)
    }
}

/// Configuration of the single- versus multi-level comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlStudy {
    pub k_max: usize,
    pub profit: ProfitParams,
    pub sigma2: f64,
    /// Balancing constants; `None` fits them with pilot runs.
    pub constants: Option<MlConstants>,
    /// Largest grid of the sparse-grid pilot.
    pub pilot_points: usize,
    pub cap: Option<usize>,
    pub reference: Discretization,
    pub mc_samples: usize,
    pub mc_dims: usize,
    pub seed: u64,
    pub spec: ProblemSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlRow {
    pub method: String,
    pub k: usize,
    pub cost: f64,
    pub error: f64,
    pub grid_sizes: Vec<usize>,
    pub active_dimensions: usize,
    pub capped: bool,
}

pub const ML_CSV_HEADER: &str = "method,K,cost,error,active_dimensions,grid_sizes";

impl MlRow {
    pub fn csv(&self) -> String {
        let sizes: Vec<String> = self.grid_sizes.iter().map(|s| s.to_string()).collect();
        format!(
            "{},{},{:e},{:e},{},{}",
            self.method,
            self.k,
            self.cost,
            self.error,
            self.active_dimensions,
            sizes.join(" ")
        )
    }
}

impl MlStudy {
    pub fn schedule(&self) -> LevelSchedule {
        LevelSchedule::dyadic(self.k_max)
    }

    /// Grid sizes of every multilevel run `K = 0..=k_max`.
    pub fn ml_sizes(&self, c: &MlConstants, seq: &GridSequence) -> Vec<Vec<LevelSize>> {
        let schedule = self.schedule();
        (0..=self.k_max)
            .map(|k| ml_grid_sizing(k, c, &schedule, seq, self.cap))
            .collect()
    }

    /// `C_FE` from the discretisation error of every level against the
    /// reference, and `C_SG`, `r` from single-level grids up to
    /// `pilot_points` on the middle level.
    pub fn pilot(
        &self,
        colloc: &Collocation,
        reference: &McReference,
    ) -> Result<MlConstants, CollocationError> {
        let schedule = self.schedule();
        let mut fe = Vec::with_capacity(schedule.len());
        for d in schedule.levels() {
            let err = reference.error(|y| Ok(colloc.solve(*d, y)?))?;
            fe.push((d.tau() + d.h(), err));
        }
        let c_fe = fit_fe_constant(&fe).expect("at least one level");
        let d = schedule.level(self.k_max / 2);
        let own = McReference {
            disc: d,
            mesh: Mesh2D::new(d.n),
            params: reference.params.clone(),
            paths: reference
                .params
                .par_iter()
                .map(|y| colloc.solve(d, y))
                .collect::<Result<Vec<_>, _>>()?,
        };
        let seq = GridSequence::with_points(self.profit, self.pilot_points)?;
        let mut sg = Vec::new();
        for prefix in study_prefixes(&seq, self.pilot_points) {
            let interp = colloc.single_level(seq.index_set(prefix), d)?;
            sg.push((interp.grid().len(), own.error(|y| Ok(interp.evaluate(y)))?));
        }
        let (c_sg, r) = fit_sg_constants(&sg)
            .ok_or_else(|| CollocationError::Schedule("pilot grids too small".into()))?;
        Ok(MlConstants { c_fe, c_sg, r })
    }

    /// Prefix of the single-level grid for level `k`: minimal with `#H > 4^k`.
    pub fn sl_prefix(seq: &GridSequence, k: usize) -> Option<usize> {
        seq.prefix_at_least((1usize << (2 * k)) + 1)
    }

    fn sequence(&self, c: &MlConstants) -> Result<GridSequence, CollocationError> {
        let need_sl = (1usize << (2 * self.k_max)) + 1;
        let bounds = ml_size_bounds(self.k_max, c, &self.schedule());
        let need_ml = bounds.iter().fold(1.0f64, |a, &b| a.max(b)).ceil() as usize;
        let need_ml = self.cap.map_or(need_ml, |c| need_ml.min(c.max(1)));
        Ok(GridSequence::with_points(
            self.profit,
            need_sl.max(need_ml),
        )?)
    }

    pub fn run(&self) -> Result<MlOutcome, CollocationError> {
        let family = NodeFamily1D::new(self.profit.p, self.sigma2).map_err(GridError::from)?;
        let colloc = Collocation::new(self.spec, family);
        let schedule = self.schedule();
        for d in schedule.levels() {
            if !self.reference.refines(d) {
                return Err(CollocationError::Schedule(format!(
                    "reference does not refine {d:?}"
                )));
            }
        }
        let reference = McReference::new(
            &colloc,
            self.reference,
            self.mc_samples,
            self.mc_dims,
            self.seed,
        )?;
        let constants = match self.constants {
            Some(c) => c,
            None => self.pilot(&colloc, &reference)?,
        };
        let seq = self.sequence(&constants)?;

        let mut sl = Vec::new();
        for k in 0..=self.k_max {
            let d = schedule.level(k);
            let prefix =
                Self::sl_prefix(&seq, k).expect("sequence sized for the single-level grids");
            let interp = colloc.single_level(seq.index_set(prefix), d)?;
            let error = reference.error(|y| Ok(interp.evaluate(y)))?;
            let cost = CostReport::new(vec![interp.grid().len()], vec![d.sample_cost()]);
            sl.push(MlRow {
                method: "single".into(),
                k,
                cost: cost.modeled,
                error,
                grid_sizes: cost.grid_sizes,
                active_dimensions: interp.grid().dims(),
                capped: false,
            });
        }

        let mut ml = Vec::new();
        let sizes_all = self.ml_sizes(&constants, &seq);
        for (k, sizes) in sizes_all.iter().enumerate() {
            let sets: Vec<IndexSet> = sizes.iter().map(|s| seq.index_set(s.prefix)).collect();
            let interp = colloc.multi_level(&schedule.truncated(k), &sets)?;
            let error = reference.error(|y| Ok(interp.evaluate_on(y, self.reference)?))?;
            let costs: Vec<f64> = (0..=k)
                .map(|j| schedule.level(k - j).sample_cost())
                .collect();
            let report = CostReport::new(sizes.iter().map(|s| s.points).collect(), costs);
            ml.push(MlRow {
                method: "multi".into(),
                k,
                cost: report.modeled,
                error,
                grid_sizes: report.grid_sizes,
                active_dimensions: interp
                    .terms()
                    .iter()
                    .map(|(_, i)| i.grid().dims())
                    .max()
                    .unwrap_or(0),
                capped: sizes.iter().any(|s| s.capped),
            });
        }
        Ok(MlOutcome {
            constants,
            sizes: sizes_all,
            single: sl,
            multi: ml,
        })
    }
}

/// Result of [`MlStudy::run`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlOutcome {
    pub constants: MlConstants,
    pub sizes: Vec<Vec<LevelSize>>,
    pub single: Vec<MlRow>,
    pub multi: Vec<MlRow>,
}

impl MlOutcome {
    pub fn single_slope(&self) -> Option<f64> {
        slope(&self.single)
    }

    pub fn multi_slope(&self) -> Option<f64> {
        slope(&self.multi)
    }
}

fn slope(rows: &[MlRow]) -> Option<f64> {
    fit_power_law(&rows.iter().map(|r| (r.cost, r.error)).collect::<Vec<_>>()).map(|f| f.exponent)
}
