//! Discrete trajectories `m^0..m^N` on a mesh, their transfer between
//! discretisations and the `L^2(0,T; H^1)` distance.

use std::io::{self, BufRead, Read, Write};

use thiserror::Error;

use super::mesh::{prolongate_p1, Mesh2D};
use super::{norm, V3};
use crate::payload::Payload;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransferError {
    #[error("mesh {from} does not refine to mesh {to}")]
    Mesh { from: usize, to: usize },
    #[error("{from} steps do not refine to {to} steps")]
    Time { from: usize, to: usize },
}

/// States at `t_k = k / steps`, `k = 0..=steps`, on the `n`-mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    n: usize,
    steps: usize,
    data: Vec<V3>,
}

impl Trajectory {
    pub fn from_fields(n: usize, fields: Vec<Vec<V3>>) -> Self {
        let nv = (n + 1) * (n + 1);
        assert!(!fields.is_empty());
        assert!(
            fields.iter().all(|f| f.len() == nv),
            "field size does not match mesh"
        );
        let steps = fields.len() - 1;
        Self {
            n,
            steps,
            data: fields.into_iter().flatten().collect(),
        }
    }

    pub fn constant(n: usize, steps: usize, value: V3) -> Self {
        Self {
            n,
            steps,
            data: vec![value; (n + 1) * (n + 1) * (steps + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn tau(&self) -> f64 {
        1.0 / self.steps as f64
    }

    fn vertices(&self) -> usize {
        (self.n + 1) * (self.n + 1)
    }

    pub fn field(&self, k: usize) -> &[V3] {
        let nv = self.vertices();
        &self.data[k * nv..(k + 1) * nv]
    }

    pub fn field_mut(&mut self, k: usize) -> &mut [V3] {
        let nv = self.vertices();
        &mut self.data[k * nv..(k + 1) * nv]
    }

    pub fn data(&self) -> &[V3] {
        &self.data
    }

    /// `max_i ||m^k(x_i)| - 1|`.
    pub fn modulus_error(&self, k: usize) -> f64 {
        self.field(k)
            .iter()
            .map(|&m| (norm(m) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// P1 interpolation in space and linear interpolation in time onto a
    /// finer discretisation.
    pub fn prolongate(&self, n: usize, steps: usize) -> Result<Trajectory, TransferError> {
        if !n.is_multiple_of(self.n) {
            return Err(TransferError::Mesh {
                from: self.n,
                to: n,
            });
        }
        if !steps.is_multiple_of(self.steps) {
            return Err(TransferError::Time {
                from: self.steps,
                to: steps,
            });
        }
        if n == self.n && steps == self.steps {
            return Ok(self.clone());
        }
        let spatial: Vec<Vec<V3>> = (0..=self.steps)
            .map(|k| prolongate_p1(self.field(k), self.n, n).expect("divisibility checked"))
            .collect();
        let r = steps / self.steps;
        let mut data = Vec::with_capacity((steps + 1) * (n + 1) * (n + 1));
        for k in 0..=steps {
            let (kc, rem) = (k / r, k % r);
            if rem == 0 {
                data.extend_from_slice(&spatial[kc]);
            } else {
                let w = rem as f64 / r as f64;
                data.extend(spatial[kc].iter().zip(&spatial[kc + 1]).map(|(a, b)| {
                    [
                        a[0] + w * (b[0] - a[0]),
                        a[1] + w * (b[1] - a[1]),
                        a[2] + w * (b[2] - a[2]),
                    ]
                }));
            }
        }
        Ok(Trajectory { n, steps, data })
    }

    /// `(sum_{k=1}^N tau (|e^k|_{L2}^2 + |grad e^k|_{L2}^2))^{1/2}` with the
    /// consistent P1 mass and stiffness matrices of `mesh`.
    pub fn norm_l2h1(&self, mesh: &Mesh2D) -> f64 {
        assert_eq!(mesh.n(), self.n, "mesh does not match trajectory");
        let total: f64 = (1..=self.steps)
            .map(|k| {
                let f = self.field(k);
                mesh.mass().quadratic_form3(f) + mesh.stiffness().quadratic_form3(f)
            })
            .sum();
        (self.tau() * total).sqrt()
    }

    /// Distance of two trajectories, both moved to `mesh` and `steps` first.
    pub fn distance(
        &self,
        other: &Trajectory,
        mesh: &Mesh2D,
        steps: usize,
    ) -> Result<f64, TransferError> {
        let mut a = self.prolongate(mesh.n(), steps)?;
        let b = other.prolongate(mesh.n(), steps)?;
        a.axpy(-1.0, &b);
        Ok(a.norm_l2h1(mesh))
    }

    /// Writes `sllg-trajectory v1 n=.. tau=.. steps=..` and the states as
    /// little-endian `f64`, step-major then vertex-major.
    pub fn write_binary(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(
            w,
            "sllg-trajectory v1 n={} tau={:e} steps={}",
            self.n,
            self.tau(),
            self.steps
        )?;
        for v in &self.data {
            for c in v {
                w.write_all(&c.to_le_bytes())?;
            }
        }
        w.flush()
    }

    pub fn read_binary(r: impl Read) -> io::Result<Self> {
        let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
        let mut r = io::BufReader::new(r);
        let mut line = String::new();
        r.read_line(&mut line)?;
        let rest = line
            .trim_end()
            .strip_prefix("sllg-trajectory v1")
            .ok_or_else(|| bad("missing trajectory header"))?;
        let (mut n, mut steps) = (None, None);
        for kv in rest.split_whitespace() {
            match kv.split_once('=') {
                Some(("n", v)) => n = v.parse::<usize>().ok(),
                Some(("steps", v)) => steps = v.parse::<usize>().ok(),
                Some(("tau", _)) => {}
                _ => return Err(bad("bad header field")),
            }
        }
        let (n, steps) = (
            n.ok_or_else(|| bad("header lacks n"))?,
            steps.ok_or_else(|| bad("header lacks steps"))?,
        );
        if n == 0 || steps == 0 {
            return Err(bad("empty discretisation"));
        }
        let len = (n + 1) * (n + 1) * (steps + 1);
        let mut data = Vec::with_capacity(len);
        let mut buf = [0u8; 8];
        for _ in 0..len {
            let mut v = [0.0; 3];
            for c in &mut v {
                r.read_exact(&mut buf)?;
                *c = f64::from_le_bytes(buf);
            }
            data.push(v);
        }
        Ok(Self { n, steps, data })
    }

    /// `step,time,energy,modulus_error` per step.
    pub fn diagnostics_csv(&self, mesh: &Mesh2D) -> String {
        assert_eq!(mesh.n(), self.n, "mesh does not match trajectory");
        let mut out = String::from("step,time,energy,modulus_error\n");
        for k in 0..=self.steps {
            let e = 0.5 * mesh.stiffness().quadratic_form3(self.field(k));
            out.push_str(&format!(
                "{k},{},{e:e},{:e}\n",
                k as f64 * self.tau(),
                self.modulus_error(k)
            ));
        }
        out
    }
}

impl Payload for Trajectory {
    fn zeros_like(&self) -> Self {
        Self {
            n: self.n,
            steps: self.steps,
            data: vec![[0.0; 3]; self.data.len()],
        }
    }

    fn axpy(&mut self, a: f64, x: &Self) {
        assert!(
            self.n == x.n && self.steps == x.steps,
            "trajectory shapes differ"
        );
        for (s, v) in self.data.iter_mut().zip(&x.data) {
            s[0] += a * v[0];
            s[1] += a * v[1];
            s[2] += a * v[2];
        }
    }

    /// Euclidean norm of all nodal values.
    fn norm(&self) -> f64 {
        self.data
            .iter()
            .map(|v| v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
            .sum::<f64>()
            .sqrt()
    }
}
