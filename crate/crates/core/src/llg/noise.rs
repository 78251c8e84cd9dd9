//! Spatial noise coefficients `g` with analytic derivatives.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::operators::NoisePoint;
use super::V3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum NoiseShape {
    /// `g = 0`: deterministic dynamics.
    Zero,
    /// Spatially constant unit `g`.
    Constant { g: V3 },
    /// `g = (-cos(pi x)/2, -cos(pi y)/2, sqrt(1 - cos^2(pi x)/4 - cos^2(pi y)/4))`,
    /// unit length with vanishing normal derivative on the boundary.
    Example,
}

/// Noise coefficient `intensity * g_shape` with `|g_shape| = 1`.
///
/// A scaled coefficient is handled by scaling the driving path, `W -> intensity W`,
/// so every operator works with the unit field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseCoefficient {
    pub shape: NoiseShape,
    pub intensity: f64,
}

impl NoiseCoefficient {
    pub fn zero() -> Self {
        Self {
            shape: NoiseShape::Zero,
            intensity: 1.0,
        }
    }

    pub fn constant(g: V3) -> Self {
        Self {
            shape: NoiseShape::Constant { g },
            intensity: 1.0,
        }
    }

    pub fn example() -> Self {
        Self {
            shape: NoiseShape::Example,
            intensity: 1.0,
        }
    }

    pub fn with_intensity(mut self, intensity: f64) -> Self {
        self.intensity = intensity;
        self
    }

    /// Rotation angle for the path value `w`.
    pub fn angle(&self, w: f64) -> f64 {
        self.intensity * w
    }

    /// Unit field and derivatives at `(x, y)`.
    pub fn point(&self, x: f64, y: f64) -> NoisePoint {
        match self.shape {
            NoiseShape::Zero => NoisePoint::default(),
            NoiseShape::Constant { g } => NoisePoint {
                g,
                ..Default::default()
            },
            NoiseShape::Example => example_point(x, y),
        }
    }
}

fn example_point(x: f64, y: f64) -> NoisePoint {
    let (sx, cx) = (PI * x).sin_cos();
    let (sy, cy) = (PI * y).sin_cos();
    let a = -0.5 * cx;
    let b = -0.5 * cy;
    let ax = 0.5 * PI * sx;
    let by = 0.5 * PI * sy;
    let axx = -PI * PI * a;
    let byy = -PI * PI * b;
    let c = (1.0 - a * a - b * b).sqrt();
    let cx_ = -a * ax / c;
    let cy_ = -b * by / c;
    let cxx = -(ax * ax + a * axx) / c - (a * ax).powi(2) / c.powi(3);
    let cyy = -(by * by + b * byy) / c - (b * by).powi(2) / c.powi(3);
    NoisePoint {
        g: [a, b, c],
        gx: [ax, 0.0, cx_],
        gy: [0.0, by, cy_],
        lap: [axx, byy, cxx + cyy],
    }
}
