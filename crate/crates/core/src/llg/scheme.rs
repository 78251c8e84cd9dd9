//! First-order tangent-plane scheme.
//!
//! With `H = lap(m) + C_hat(W, m)` the equation
//! `m_t = l1 m x H - l2 m x (m x H)` is equivalent, for `|m| = 1`, to
//! `c m_t + d m x m_t = H_perp` with `c = l2 / (l1^2 + l2^2)` and
//! `d = -l1 / (l1^2 + l2^2)`. Each step solves for a tangent velocity `v`:
//!
//! `c (v, phi)_h + d (m x v, phi)_h + tau (grad v, grad phi)
//!     = -(grad m, grad phi) + (C_hat(W(t_n), m), phi)`
//!
//! for all tangent `phi`, with lumped mass in the zero-order terms, then sets
//! `m <- (m + tau v) / |m + tau v|` at every vertex.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::mesh::Mesh2D;
use super::noise::NoiseCoefficient;
use super::operators::{apply_chat, apply_exp_sg, Jet, NoisePoint};
use super::trajectory::Trajectory;
use super::{add, cross, dot, norm, scale, V3};
use crate::lc_wiener::{wiener_eval, WienerError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("linear solver did not converge in {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("linear solver broke down after {0} iterations")]
    Breakdown(usize),
    #[error("renormalisation of a zero vector at vertex {0}")]
    DegenerateUpdate(usize),
    #[error("non-finite value in the update")]
    NonFinite,
    #[error(transparent)]
    Wiener(#[from] WienerError),
}

/// Landau-Lifshitz coefficients `l1` (precession) and `l2` (damping).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Damping {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Default for Damping {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 1.0,
        }
    }
}

impl Damping {
    /// From the Gilbert damping `lambda`: `l1 = 1/(1+lambda^2)`, `l2 = lambda/(1+lambda^2)`.
    pub fn gilbert(lambda: f64) -> Self {
        let d = 1.0 + lambda * lambda;
        Self {
            lambda1: 1.0 / d,
            lambda2: lambda / d,
        }
    }

    /// `(c, d)` of the form `c m_t + d m x m_t = H_perp`.
    pub fn gilbert_coefficients(&self) -> (f64, f64) {
        let s = self.lambda1 * self.lambda1 + self.lambda2 * self.lambda2;
        (self.lambda2 / s, -self.lambda1 / s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum InitialCondition {
    Constant {
        m: V3,
    },
    /// The unit noise field itself.
    NoiseField,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 2000,
        }
    }
}

/// Discretised problem on `[0,1]^2 x [0,1]` with `steps` uniform time steps.
#[derive(Debug, Clone)]
pub struct LlgProblem {
    mesh: Mesh2D,
    steps: usize,
    noise: NoiseCoefficient,
    damping: Damping,
    options: SolverOptions,
    initial: Vec<V3>,
    vertex_noise: Vec<NoisePoint>,
    /// Noise at the edge midpoints `(01, 12, 20)` of every element.
    quad_noise: Vec<[NoisePoint; 3]>,
}

impl LlgProblem {
    pub fn new(n: usize, steps: usize, noise: NoiseCoefficient, initial: InitialCondition) -> Self {
        assert!(steps >= 1, "at least one time step");
        let mesh = Mesh2D::new(n);
        let vertex_noise: Vec<NoisePoint> = (0..mesh.vertices())
            .map(|v| {
                let [x, y] = mesh.vertex(v);
                noise.point(x, y)
            })
            .collect();
        let quad_noise = mesh
            .elements()
            .iter()
            .map(|tri| {
                let mid = |a: usize, b: usize| {
                    let (pa, pb) = (mesh.vertex(a), mesh.vertex(b));
                    noise.point(0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1]))
                };
                [
                    mid(tri[0], tri[1]),
                    mid(tri[1], tri[2]),
                    mid(tri[2], tri[0]),
                ]
            })
            .collect();
        let initial = match initial {
            InitialCondition::Constant { m } => {
                let m = scale(1.0 / norm(m), m);
                vec![m; mesh.vertices()]
            }
            InitialCondition::NoiseField => (0..mesh.vertices())
                .map(|v| {
                    let [x, y] = mesh.vertex(v);
                    NoiseCoefficient::example().point(x, y).g
                })
                .collect(),
        };
        Self {
            mesh,
            steps,
            noise,
            damping: Damping::default(),
            options: SolverOptions::default(),
            initial,
            vertex_noise,
            quad_noise,
        }
    }

    pub fn with_damping(mut self, damping: Damping) -> Self {
        self.damping = damping;
        self
    }

    pub fn with_options(mut self, options: SolverOptions) -> Self {
        self.options = options;
        self
    }

    /// Replaces the initial state; values are normalised nodewise.
    pub fn with_initial_field(mut self, field: Vec<V3>) -> Self {
        assert_eq!(field.len(), self.mesh.vertices());
        self.initial = field.into_iter().map(|m| scale(1.0 / norm(m), m)).collect();
        self
    }

    pub fn mesh(&self) -> &Mesh2D {
        &self.mesh
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn tau(&self) -> f64 {
        1.0 / self.steps as f64
    }

    pub fn noise(&self) -> &NoiseCoefficient {
        &self.noise
    }

    pub fn initial(&self) -> &[V3] {
        &self.initial
    }

    /// Exchange energy `1/2 |grad m|^2`.
    pub fn energy(&self, m: &[V3]) -> f64 {
        0.5 * self.mesh.stiffness().quadratic_form3(m)
    }

    /// Load vector `((C_hat(s, m_h), psi_i))_i` by edge-midpoint quadrature.
    pub fn chat_load(&self, s: f64, m: &[V3]) -> Vec<V3> {
        let mut load = vec![[0.0; 3]; m.len()];
        if s == 0.0 {
            return load;
        }
        let w = self.mesh.element_area() / 3.0;
        for (e, tri) in self.mesh.elements().iter().enumerate() {
            let grads = self.mesh.element_gradients(e);
            let mut dx = [0.0; 3];
            let mut dy = [0.0; 3];
            for (a, &v) in tri.iter().enumerate() {
                dx = add(dx, scale(grads[a][0], m[v]));
                dy = add(dy, scale(grads[a][1], m[v]));
            }
            for (q, (a, b)) in [(0, 1), (1, 2), (2, 0)].into_iter().enumerate() {
                let jet = Jet {
                    v: scale(0.5, add(m[tri[a]], m[tri[b]])),
                    dx,
                    dy,
                };
                let val = scale(0.5 * w, apply_chat(s, &jet, &self.quad_noise[e][q]));
                load[tri[a]] = add(load[tri[a]], val);
                load[tri[b]] = add(load[tri[b]], val);
            }
        }
        load
    }

    /// One step from `m` with path value `w = W(t_n)`.
    pub fn step(&self, m: &[V3], w: f64) -> Result<Vec<V3>, SolveError> {
        let tau = self.tau();
        let nv = m.len();
        let (c, d) = self.damping.gilbert_coefficients();
        let a = self.mesh.stiffness();
        let ml = self.mesh.lumped_mass();
        let basis: Vec<(V3, V3)> = m.iter().map(|&mi| tangent_basis(mi)).collect();

        let mut am = vec![[0.0; 3]; nv];
        a.matvec3(m, &mut am);
        let load = self.chat_load(self.noise.angle(w), m);
        let mut rhs = vec![0.0; 2 * nv];
        for i in 0..nv {
            let r = add(scale(-1.0, am[i]), load[i]);
            rhs[2 * i] = dot(r, basis[i].0);
            rhs[2 * i + 1] = dot(r, basis[i].1);
        }

        let diag_a = a.diagonal();
        let precond: Vec<f64> = (0..2 * nv)
            .map(|k| 1.0 / (c * ml[k / 2] + tau * diag_a[k / 2]))
            .collect();
        let mut lifted = vec![[0.0; 3]; nv];
        let mut alifted = vec![[0.0; 3]; nv];
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..nv {
                lifted[i] = add(scale(x[2 * i], basis[i].0), scale(x[2 * i + 1], basis[i].1));
            }
            a.matvec3(&lifted, &mut alifted);
            for i in 0..nv {
                let (al, be) = (x[2 * i], x[2 * i + 1]);
                y[2 * i] = ml[i] * (c * al - d * be) + tau * dot(alifted[i], basis[i].0);
                y[2 * i + 1] = ml[i] * (d * al + c * be) + tau * dot(alifted[i], basis[i].1);
            }
        };
        let x = bicgstab(
            apply,
            &precond,
            &rhs,
            self.options.tolerance,
            self.options.max_iterations,
        )?;

        let mut next = Vec::with_capacity(nv);
        for i in 0..nv {
            let v = add(scale(x[2 * i], basis[i].0), scale(x[2 * i + 1], basis[i].1));
            let u = add(m[i], scale(tau, v));
            let len = norm(u);
            if !len.is_finite() {
                return Err(SolveError::NonFinite);
            }
            if len == 0.0 {
                return Err(SolveError::DegenerateUpdate(i));
            }
            next.push(if len == 1.0 { u } else { scale(1.0 / len, u) });
        }
        Ok(next)
    }

    /// Full trajectory for parameter vector `y` (Lévy-Ciesielski coefficients).
    pub fn sample_path(&self, y: &[f64]) -> Result<Trajectory, SolveError> {
        let mut fields = Vec::with_capacity(self.steps + 1);
        fields.push(self.initial.clone());
        for k in 0..self.steps {
            let t = k as f64 / self.steps as f64;
            let w = wiener_eval(y, t)?;
            let next = self.step(fields.last().expect("initial state"), w)?;
            fields.push(next);
        }
        Ok(Trajectory::from_fields(self.mesh.n(), fields))
    }

    /// `M^n = e^{W(t_n) G} m^n` at every vertex.
    pub fn inverse_transform(
        &self,
        traj: &Trajectory,
        y: &[f64],
    ) -> Result<Trajectory, SolveError> {
        let mut out = traj.clone();
        for k in 0..=traj.steps() {
            let t = k as f64 / traj.steps() as f64;
            let s = self.noise.angle(wiener_eval(y, t)?);
            for (v, m) in out.field_mut(k).iter_mut().enumerate() {
                *m = apply_exp_sg(s, *m, self.vertex_noise[v].g);
            }
        }
        Ok(out)
    }

    /// Inverse of [`LlgProblem::inverse_transform`].
    pub fn forward_transform(
        &self,
        traj: &Trajectory,
        y: &[f64],
    ) -> Result<Trajectory, SolveError> {
        let mut out = traj.clone();
        for k in 0..=traj.steps() {
            let t = k as f64 / traj.steps() as f64;
            let s = self.noise.angle(wiener_eval(y, t)?);
            for (v, m) in out.field_mut(k).iter_mut().enumerate() {
                *m = apply_exp_sg(-s, *m, self.vertex_noise[v].g);
            }
        }
        Ok(out)
    }
}

/// Orthonormal `(t1, t2)` with `t1 x t2 = m` for unit `m`.
pub fn tangent_basis(m: V3) -> (V3, V3) {
    let axis = if m[0].abs() <= m[1].abs() && m[0].abs() <= m[2].abs() {
        [1.0, 0.0, 0.0]
    } else if m[1].abs() <= m[2].abs() {
        [0.0, 1.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    let t1 = cross(axis, m);
    let t1 = scale(1.0 / norm(t1), t1);
    (t1, cross(m, t1))
}

/// Jacobi-preconditioned BiCGSTAB for `A x = b` from `x = 0`; stops when
/// `|b - A x| <= tol |b|`.
pub fn bicgstab(
    mut apply: impl FnMut(&[f64], &mut [f64]),
    inv_diag: &[f64],
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>, SolveError> {
    let n = b.len();
    let dotp = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let bnorm = dotp(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let target = tol * bnorm;
    let mut r = b.to_vec();
    let r0 = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ph = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut sh = vec![0.0; n];
    let mut t = vec![0.0; n];
    for it in 1..=max_iter {
        let rho_new = dotp(&r0, &r);
        if rho_new == 0.0 || omega == 0.0 {
            return Err(SolveError::Breakdown(it));
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for k in 0..n {
            p[k] = r[k] + beta * (p[k] - omega * v[k]);
            ph[k] = inv_diag[k] * p[k];
        }
        apply(&ph, &mut v);
        let denom = dotp(&r0, &v);
        if denom == 0.0 {
            return Err(SolveError::Breakdown(it));
        }
        alpha = rho / denom;
        for k in 0..n {
            s[k] = r[k] - alpha * v[k];
        }
        if dotp(&s, &s).sqrt() <= target {
            for k in 0..n {
                x[k] += alpha * ph[k];
            }
            return Ok(x);
        }
        for k in 0..n {
            sh[k] = inv_diag[k] * s[k];
        }
        apply(&sh, &mut t);
        let tt = dotp(&t, &t);
        omega = if tt == 0.0 { 0.0 } else { dotp(&t, &s) / tt };
        for k in 0..n {
            x[k] += alpha * ph[k] + omega * sh[k];
            r[k] = s[k] - omega * t[k];
        }
        let res = dotp(&r, &r).sqrt();
        if !res.is_finite() {
            return Err(SolveError::NonFinite);
        }
        if res <= target {
            return Ok(x);
        }
        if it == max_iter {
            return Err(SolveError::NotConverged {
                iterations: it,
                residual: res / bnorm,
            });
        }
    }
    Err(SolveError::NotConverged {
        iterations: max_iter,
        residual: f64::NAN,
    })
}

#[cfg(test)]
mod tests {
    use super::super::sub;
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    fn wavy_initial(p: &LlgProblem) -> Vec<V3> {
        (0..p.mesh().vertices())
            .map(|v| {
                let [x, y] = p.mesh().vertex(v);
                let th =
                    0.8 * (std::f64::consts::PI * x).cos() * (std::f64::consts::PI * y).cos() + 0.3;
                [th.sin(), 0.2 * x, th.cos()]
            })
            .collect()
    }

    #[test]
    fn gilbert_coefficients() {
        assert_eq!(Damping::default().gilbert_coefficients(), (0.5, -0.5));
        let d = Damping::gilbert(0.3);
        let (c, dd) = d.gilbert_coefficients();
        assert_abs_diff_eq!(c, 0.3, epsilon = 1e-14);
        assert_abs_diff_eq!(dd, -1.0, epsilon = 1e-14);
    }

    #[test]
    fn tangent_bases_are_right_handed() {
        for m in [
            [0.0, 0.0, 1.0],
            [1.0, 0.0, 0.0],
            [0.6, 0.0, -0.8],
            [0.48, 0.6, 0.64],
        ] {
            let (t1, t2) = tangent_basis(m);
            assert_abs_diff_eq!(dot(t1, m), 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(norm(t2), 1.0, epsilon = 1e-15);
            let c = cross(t1, t2);
            for k in 0..3 {
                assert_abs_diff_eq!(c[k], m[k], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn bicgstab_solves_a_nonsymmetric_system() {
        let n = 50;
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                let left = if i > 0 { x[i - 1] } else { 0.0 };
                let right = if i + 1 < n { x[i + 1] } else { 0.0 };
                y[i] = 4.0 * x[i] - 1.5 * left - 0.5 * right;
            }
        };
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = bicgstab(apply, &vec![0.25; n], &b, 1e-12, 200).unwrap();
        let mut y = vec![0.0; n];
        apply(&x, &mut y);
        for (yi, bi) in y.iter().zip(&b) {
            assert_abs_diff_eq!(yi, bi, epsilon = 1e-10);
        }
        assert!(matches!(
            bicgstab(apply, &vec![0.25; n], &b, 1e-14, 1),
            Err(SolveError::NotConverged { iterations: 1, .. })
        ));
        assert_eq!(
            bicgstab(apply, &vec![1.0; n], &vec![0.0; n], 1e-10, 5).unwrap(),
            vec![0.0; n]
        );
    }

    #[test]
    fn constant_state_is_a_fixed_point() {
        let p = LlgProblem::new(
            6,
            16,
            NoiseCoefficient::constant([0.0, 0.0, 1.0]),
            InitialCondition::Constant { m: [0.0, 0.0, 1.0] },
        );
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let traj = p.sample_path(&normals(&mut rng, 16)).unwrap();
        for k in 0..=16 {
            assert!(traj.field(k).iter().all(|&m| m == [0.0, 0.0, 1.0]));
        }
    }

    #[test]
    fn deterministic_energy_decays_and_modulus_is_kept() {
        let p = LlgProblem::new(
            8,
            32,
            NoiseCoefficient::zero(),
            InitialCondition::Constant { m: [0.0, 0.0, 1.0] },
        );
        let init = wavy_initial(&p);
        let p = p.with_initial_field(init);
        let traj = p.sample_path(&[0.0; 8]).unwrap();
        let mut prev = f64::INFINITY;
        for k in 0..=traj.steps() {
            let e = p.energy(traj.field(k));
            assert!(e <= prev + 1e-10, "step {k}: {e} > {prev}");
            prev = e;
            assert!(traj.modulus_error(k) <= 1e-12);
        }
        assert!(p.energy(traj.field(32)) < 0.9 * p.energy(traj.field(0)));
    }

    #[test]
    fn noisy_paths_keep_unit_modulus_and_are_deterministic() {
        let p = LlgProblem::new(
            8,
            32,
            NoiseCoefficient::example(),
            InitialCondition::Constant { m: [0.0, 0.0, 1.0] },
        );
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let y = normals(&mut rng, 32);
        let a = p.sample_path(&y).unwrap();
        let b = p.sample_path(&y).unwrap();
        assert_eq!(a, b);
        for k in 0..=a.steps() {
            assert!(a.modulus_error(k) <= 1e-12);
        }
        // the noise actually moves the state
        assert!(sub(a.field(32)[10], [0.0, 0.0, 1.0])
            .iter()
            .any(|v| v.abs() > 1e-4));
    }

    #[test]
    fn zero_parameters_give_the_deterministic_path() {
        let noisy = LlgProblem::new(
            4,
            8,
            NoiseCoefficient::example(),
            InitialCondition::NoiseField,
        );
        let quiet = LlgProblem::new(4, 8, NoiseCoefficient::zero(), InitialCondition::NoiseField);
        assert_eq!(
            noisy.sample_path(&[0.0; 8]).unwrap(),
            quiet.sample_path(&[]).unwrap()
        );
    }

    #[test]
    fn only_resolved_levels_matter() {
        // 8 steps resolve levels 0..=3, i.e. the first 8 coefficients
        let p = LlgProblem::new(
            4,
            8,
            NoiseCoefficient::example(),
            InitialCondition::Constant { m: [0.0, 0.6, 0.8] },
        );
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let y = normals(&mut rng, 32);
        let mut z = y.clone();
        for v in &mut z[8..] {
            *v += 1.0;
        }
        assert_eq!(p.sample_path(&y).unwrap(), p.sample_path(&z).unwrap());
        z[7] += 1.0;
        assert_ne!(p.sample_path(&y).unwrap(), p.sample_path(&z).unwrap());
    }

    #[test]
    fn doss_sussmann_round_trip() {
        let p = LlgProblem::new(
            4,
            8,
            NoiseCoefficient::example().with_intensity(0.2),
            InitialCondition::NoiseField,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y = normals(&mut rng, 8);
        let m = p.sample_path(&y).unwrap();
        let big = p.inverse_transform(&m, &y).unwrap();
        for k in 0..=8 {
            assert!(big.modulus_error(k) <= 1e-10);
        }
        let back = p.forward_transform(&big, &y).unwrap();
        for k in 0..=8 {
            for (a, b) in back.field(k).iter().zip(m.field(k)) {
                for c in 0..3 {
                    assert_abs_diff_eq!(a[c], b[c], epsilon = 1e-12);
                }
            }
        }
        assert_eq!(p.inverse_transform(&m, &[0.0; 8]).unwrap(), m);
    }

    #[test]
    fn chat_load_vanishes_for_constant_noise() {
        let p = LlgProblem::new(
            3,
            4,
            NoiseCoefficient::constant([1.0, 0.0, 0.0]),
            InitialCondition::NoiseField,
        );
        let load = p.chat_load(0.7, p.initial());
        assert!(load.iter().all(|v| *v == [0.0; 3]));
        let q = LlgProblem::new(
            3,
            4,
            NoiseCoefficient::example(),
            InitialCondition::NoiseField,
        );
        let load = q.chat_load(0.7, q.initial());
        assert!(load.iter().any(|v| norm(*v) > 1e-6));
    }
}
