//! Structured right-triangle meshes of the unit square with P1 matrices.

use super::V3;

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Csr {
    fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::new();
        let mut vals: Vec<f64> = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().expect("entry exists") += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows())
            .map(|r| self.row(r).find(|&(c, _)| c == r).map_or(0.0, |e| e.1))
            .collect()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate() {
            *out = self.row(r).map(|(c, v)| v * x[c]).sum();
        }
    }

    /// `x^T A x` for a scalar field.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        (0..self.rows())
            .map(|r| x[r] * self.row(r).map(|(c, v)| v * x[c]).sum::<f64>())
            .sum()
    }

    /// Applies `A` to each component of an interleaved 3-vector field.
    pub fn matvec3(&self, x: &[V3], y: &mut [V3]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = [0.0; 3];
            for (c, v) in self.row(r) {
                for k in 0..3 {
                    acc[k] += v * x[c][k];
                }
            }
            *out = acc;
        }
    }

    /// `sum_k x_k^T A x_k` over the components of a 3-vector field.
    pub fn quadratic_form3(&self, x: &[V3]) -> f64 {
        let mut total = 0.0;
        for (r, xr) in x.iter().enumerate() {
            for (c, v) in self.row(r) {
                total += v * (xr[0] * x[c][0] + xr[1] * x[c][1] + xr[2] * x[c][2]);
            }
        }
        total
    }
}

/// `n x n` squares on `[0,1]^2`, each cut along the diagonal `v00 - v11`
/// into the triangles `(v00, v10, v11)` and `(v00, v11, v01)`.
/// Vertex `(i, j)` sits at `(i h, j h)` with index `i + (n + 1) j`.
#[derive(Debug, Clone)]
pub struct Mesh2D {
    n: usize,
    h: f64,
    elements: Vec<[usize; 3]>,
    mass: Csr,
    stiffness: Csr,
    lumped: Vec<f64>,
}

/// Scaled barycentric gradients `h grad(lambda_i)` of the two triangle types.
const GRADS: [[[f64; 2]; 3]; 2] = [
    [[-1.0, 0.0], [1.0, -1.0], [0.0, 1.0]],
    [[0.0, -1.0], [1.0, 0.0], [-1.0, 1.0]],
];

impl Mesh2D {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "mesh needs at least one square per side");
        let h = 1.0 / n as f64;
        let stride = n + 1;
        let mut elements = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let v00 = i + stride * j;
                let (v10, v01, v11) = (v00 + 1, v00 + stride, v00 + stride + 1);
                elements.push([v00, v10, v11]);
                elements.push([v00, v11, v01]);
            }
        }
        let area = 0.5 * h * h;
        let nv = stride * stride;
        let mut mt = Vec::with_capacity(18 * n * n);
        let mut at = Vec::with_capacity(18 * n * n);
        for (e, tri) in elements.iter().enumerate() {
            let grads = &GRADS[e % 2];
            for a in 0..3 {
                for b in 0..3 {
                    let m = if a == b { area / 6.0 } else { area / 12.0 };
                    mt.push((tri[a], tri[b], m));
                    // area * grad.grad is independent of h in 2D
                    let k = 0.5 * (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1]);
                    if k != 0.0 {
                        at.push((tri[a], tri[b], k));
                    }
                }
            }
        }
        let mass = Csr::from_triplets(nv, mt);
        let stiffness = Csr::from_triplets(nv, at);
        let lumped = (0..nv).map(|r| mass.row(r).map(|e| e.1).sum()).collect();
        Self {
            n,
            h,
            elements,
            mass,
            stiffness,
            lumped,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn vertices(&self) -> usize {
        (self.n + 1) * (self.n + 1)
    }

    pub fn vertex(&self, v: usize) -> [f64; 2] {
        let stride = self.n + 1;
        [(v % stride) as f64 * self.h, (v / stride) as f64 * self.h]
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        let stride = self.n + 1;
        let (i, j) = (v % stride, v / stride);
        i == 0 || j == 0 || i == self.n || j == self.n
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    pub fn element_area(&self) -> f64 {
        0.5 * self.h * self.h
    }

    /// Physical barycentric gradients of element `e`.
    pub fn element_gradients(&self, e: usize) -> [[f64; 2]; 3] {
        let g = &GRADS[e % 2];
        let s = 1.0 / self.h;
        [
            [g[0][0] * s, g[0][1] * s],
            [g[1][0] * s, g[1][1] * s],
            [g[2][0] * s, g[2][1] * s],
        ]
    }

    pub fn mass(&self) -> &Csr {
        &self.mass
    }

    pub fn stiffness(&self) -> &Csr {
        &self.stiffness
    }

    /// Row sums of the consistent mass matrix.
    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped
    }

    /// P1 interpolant of nodal values at `(x, y)` in the closed unit square.
    pub fn eval(&self, values: &[V3], x: f64, y: f64) -> V3 {
        let n = self.n;
        let fx = (x * n as f64).clamp(0.0, n as f64);
        let fy = (y * n as f64).clamp(0.0, n as f64);
        let i = (fx.floor() as usize).min(n - 1);
        let j = (fy.floor() as usize).min(n - 1);
        let v00 = i + (n + 1) * j;
        p1_value(
            values[v00],
            values[v00 + 1],
            values[v00 + n + 2],
            values[v00 + n + 1],
            fx - i as f64,
            fy - j as f64,
        )
    }

    /// Nodal interpolation of a P1 field from this mesh onto the vertices of
    /// the mesh with `fine_n = r * n` squares per side.
    pub fn prolongate(&self, values: &[V3], fine_n: usize) -> Option<Vec<V3>> {
        prolongate_p1(values, self.n, fine_n)
    }
}

/// Nodal interpolation of a P1 field on the `n`-mesh onto the `fine_n`-mesh;
/// `None` unless `n` divides `fine_n`.
pub fn prolongate_p1(values: &[V3], n: usize, fine_n: usize) -> Option<Vec<V3>> {
    if !fine_n.is_multiple_of(n) {
        return None;
    }
    if fine_n == n {
        return Some(values.to_vec());
    }
    let r = fine_n / n;
    let stride = n + 1;
    let mut out = Vec::with_capacity((fine_n + 1) * (fine_n + 1));
    for jf in 0..=fine_n {
        let (j, eta) = split(jf, r, n);
        for if_ in 0..=fine_n {
            let (i, xi) = split(if_, r, n);
            let v00 = i + stride * j;
            out.push(p1_value(
                values[v00],
                values[v00 + 1],
                values[v00 + stride + 1],
                values[v00 + stride],
                xi,
                eta,
            ));
        }
    }
    Some(out)
}

/// Coarse cell and local coordinate of fine index `k` with ratio `r`.
fn split(k: usize, r: usize, n: usize) -> (usize, f64) {
    let cell = (k / r).min(n - 1);
    (cell, (k - cell * r) as f64 / r as f64)
}

/// P1 value on the square with corner values `u00, u10, u11, u01`.
pub fn p1_value(u00: V3, u10: V3, u11: V3, u01: V3, xi: f64, eta: f64) -> V3 {
    let mut out = [0.0; 3];
    for k in 0..3 {
        out[k] = if xi >= eta {
            u00[k] + xi * (u10[k] - u00[k]) + eta * (u11[k] - u10[k])
        } else {
            u00[k] + eta * (u01[k] - u00[k]) + xi * (u11[k] - u01[k])
        };
    }
    out
}
