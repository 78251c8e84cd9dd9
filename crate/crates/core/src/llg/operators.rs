//! Pointwise operator algebra of the transformed equation:
//! `G v = v x g`, the rotation `e^{sG}`, the first-order operator `C` and
//! the lower-order term `C_hat(s, v) = e^{-sG} E(s, v)`.
//!
//! Operators act on jets (value and first derivatives) because `C` involves
//! `grad v` and `C G` needs the derivatives of `G v`.

use super::{add, cross, scale, V3};

/// Noise coefficient data at a point: value, partial derivatives, Laplacian.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoisePoint {
    pub g: V3,
    pub gx: V3,
    pub gy: V3,
    pub lap: V3,
}

/// Value and first partial derivatives of a vector field at a point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet {
    pub v: V3,
    pub dx: V3,
    pub dy: V3,
}

impl Jet {
    pub fn constant(v: V3) -> Self {
        Self {
            v,
            dx: [0.0; 3],
            dy: [0.0; 3],
        }
    }
}

pub fn apply_g(v: V3, g: V3) -> V3 {
    cross(v, g)
}

/// `G` on a jet, by the product rule.
pub fn apply_g_jet(j: &Jet, n: &NoisePoint) -> Jet {
    Jet {
        v: cross(j.v, n.g),
        dx: add(cross(j.dx, n.g), cross(j.v, n.gx)),
        dy: add(cross(j.dy, n.g), cross(j.v, n.gy)),
    }
}

/// `v + sin(s) G v + (1 - cos s) G^2 v`; a rotation about `g` when `|g| = 1`.
pub fn apply_exp_sg(s: f64, v: V3, g: V3) -> V3 {
    let gv = apply_g(v, g);
    let ggv = apply_g(gv, g);
    let (sn, cs) = s.sin_cos();
    add(v, add(scale(sn, gv), scale(1.0 - cs, ggv)))
}

/// `C v = v x lap(g) + 2 (d_x v x d_x g + d_y v x d_y g)`.
pub fn apply_c(j: &Jet, n: &NoisePoint) -> V3 {
    add(
        cross(j.v, n.lap),
        scale(2.0, add(cross(j.dx, n.gx), cross(j.dy, n.gy))),
    )
}

/// `(C G + G C) v`.
fn anticommutator(j: &Jet, n: &NoisePoint) -> V3 {
    add(apply_c(&apply_g_jet(j, n), n), apply_g(apply_c(j, n), n.g))
}

/// `E(s, v) = sin(s) C v + (1 - cos s)(C G + G C) v`.
pub fn apply_e(s: f64, j: &Jet, n: &NoisePoint) -> V3 {
    let (sn, cs) = s.sin_cos();
    add(
        scale(sn, apply_c(j, n)),
        scale(1.0 - cs, anticommutator(j, n)),
    )
}

/// `C_hat(s, v) = e^{-sG} E(s, v)`.
pub fn apply_chat(s: f64, j: &Jet, n: &NoisePoint) -> V3 {
    apply_exp_sg(-s, apply_e(s, j, n), n.g)
}

/// `C_hat` as the six-term sum `sum_i b_i(s) F_i(v)`.
pub fn apply_chat_expanded(s: f64, j: &Jet, n: &NoisePoint) -> V3 {
    let (sn, cs) = s.sin_cos();
    let omc = 1.0 - cs;
    let cv = apply_c(j, n);
    let av = anticommutator(j, n);
    let g = |v: V3| apply_g(v, n.g);
    let b = [sn, omc, -sn * sn, -sn * omc, omc * sn, omc * omc];
    let f = [cv, av, g(cv), g(av), g(g(cv)), g(g(av))];
    b.iter()
        .zip(&f)
        .fold([0.0; 3], |acc, (&bi, &fi)| add(acc, scale(bi, fi)))
}
