//! Sample-path solver for the transformed (random-coefficient) LLG equation
//! on the unit square: P1 finite elements on a structured mesh, first-order
//! tangent-plane time stepping and nodewise renormalisation.

pub mod mesh;
pub mod noise;
pub mod operators;
pub mod scheme;
pub mod trajectory;

pub use mesh::Mesh2D;
pub use noise::{NoiseCoefficient, NoiseShape};
pub use scheme::{Damping, InitialCondition, LlgProblem, SolveError, SolverOptions};
pub use trajectory::{Trajectory, TransferError};

/// Point in R^3.
pub type V3 = [f64; 3];

pub fn add(a: V3, b: V3) -> V3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub(a: V3, b: V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale(s: f64, a: V3) -> V3 {
    [s * a[0], s * a[1], s * a[2]]
}

pub fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: V3, b: V3) -> V3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm(a: V3) -> f64 {
    dot(a, a).sqrt()
}
