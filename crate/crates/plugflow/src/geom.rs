//! Cylindrical coordinates on the Wilson cylinder `[1,3] x S^1 x [-2,2]`.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

pub const R_MIN: f64 = 1.0;
pub const R_MAX: f64 = 3.0;
pub const Z_MAX: f64 = 2.0;

/// Reduce an angle into `[0, 2pi)`.
pub fn reduce_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// Signed angular difference `a - b` wrapped into `(-pi, pi]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylPoint {
    pub r: f64,
    pub theta: f64,
    pub z: f64,
}

impl CylPoint {
    /// Builds a point with the angle reduced mod 2pi. No range check.
    pub fn new(r: f64, theta: f64, z: f64) -> Self {
        CylPoint {
            r,
            theta: reduce_angle(theta),
            z,
        }
    }

    pub fn in_cylinder(&self, tol: f64) -> bool {
        self.r >= R_MIN - tol && self.r <= R_MAX + tol && self.z.abs() <= Z_MAX + tol
    }

    pub fn cartesian(&self) -> [f64; 3] {
        [self.r * self.theta.cos(), self.r * self.theta.sin(), self.z]
    }

    pub fn rotate(&self, phi: f64) -> Self {
        CylPoint::new(self.r, self.theta + phi, self.z)
    }

    /// The involution `(r, theta, z) -> (r, theta, -z)`.
    pub fn flip(&self) -> Self {
        CylPoint {
            r: self.r,
            theta: self.theta,
            z: -self.z,
        }
    }
}

/// Flat metric `dr^2 + r^2 dtheta^2 + dz^2`, i.e. euclidean distance in R^3.
pub fn flat_dist(a: &CylPoint, b: &CylPoint) -> f64 {
    let p = a.cartesian();
    let q = b.cartesian();
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
}
