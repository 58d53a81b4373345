//! Closed forms for the vertical speed `g` and the angular speed `f`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// `e^{-1/x}` for `x > 0`, zero otherwise.
fn flat_exp(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-1.0 / x).exp()
    }
}

/// Smooth monotone step: 0 for `x <= 0`, 1 for `x >= 1`.
pub fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let a = flat_exp(x);
        let b = flat_exp(1.0 - x);
        a / (a + b)
    }
}

/// Identity below 1/2, constant 1 above 1, smooth and monotone in between.
fn join(v: f64) -> f64 {
    if v <= 0.5 {
        v
    } else if v >= 1.0 {
        1.0
    } else {
        let s = smooth_step(2.0 * v - 1.0);
        (1.0 - s) * v + s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VanishOrder {
    /// Even order `n >= 2`.
    Even(u32),
    /// Vanishes to infinite order at the two zeros.
    Flat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilsonProfile {
    pub g0: f64,
    pub eps0: f64,
    pub order: VanishOrder,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Radial extent of the f plateau.
    pub plateau_r: (f64, f64),
    /// |z| extent of the f plateau.
    pub plateau_z: (f64, f64),
    /// Width of the collar along the boundary of R where f vanishes.
    pub collar: f64,
    /// Vertical translate of the sign profile of f. Zero for a valid profile.
    pub f_shift: f64,
}

impl Default for WilsonProfile {
    fn default() -> Self {
        WilsonProfile::generic(0.2, 0.24, VanishOrder::Even(2))
    }
}

impl WilsonProfile {
    /// Profile with sandwich constants computed from the closed form of g.
    pub fn generic(g0: f64, eps0: f64, order: VanishOrder) -> Self {
        let (lambda1, lambda2) = Self::natural_lambdas(g0, eps0, order);
        WilsonProfile {
            g0,
            eps0,
            order,
            lambda1,
            lambda2,
            plateau_r: (1.25, 2.75),
            plateau_z: (0.25, 1.75),
            collar: 0.05,
            f_shift: 0.0,
        }
    }

    /// In `d <= eps0/sqrt 2`, g = g0 (d/eps0)^n and `x^n + y^n <= (x^2+y^2)^{n/2} <= 2^{n/2-1}(x^n + y^n)`.
    pub fn natural_lambdas(g0: f64, eps0: f64, order: VanishOrder) -> (f64, f64) {
        match order {
            VanishOrder::Even(n) => {
                let base = g0 / eps0.powi(n as i32);
                (base, base * 2f64.powi(n as i32 / 2 - 1))
            }
            VanishOrder::Flat => (0.0, 0.0),
        }
    }

    pub fn check_domain(r: f64, z: f64) -> Result<()> {
        if !(1.0..=3.0).contains(&r) || !(-2.0..=2.0).contains(&z) {
            return Err(Error::Domain { r, z });
        }
        Ok(())
    }

    /// Checked evaluation of g.
    pub fn eval_g(&self, r: f64, z: f64) -> Result<f64> {
        Self::check_domain(r, z)?;
        Ok(self.g(r, z))
    }

    /// Checked evaluation of f.
    pub fn eval_f(&self, r: f64, z: f64) -> Result<f64> {
        Self::check_domain(r, z)?;
        Ok(self.f(r, z))
    }

    /// Unchecked g; extends smoothly past the horizontal boundary.
    #[inline]
    pub fn g(&self, r: f64, z: f64) -> f64 {
        let dz = z.abs() - 1.0;
        let d2 = (r - 2.0) * (r - 2.0) + dz * dz;
        let u = d2 / (self.eps0 * self.eps0);
        if u >= 1.0 {
            return self.g0;
        }
        let v = match self.order {
            VanishOrder::Even(2) => u,
            VanishOrder::Even(n) => u.powi(n as i32 / 2),
            VanishOrder::Flat => {
                if u <= 0.0 {
                    0.0
                } else {
                    (1.0 - 1.0 / u).exp()
                }
            }
        };
        self.g0 * join(v)
    }

    /// Radial factor of the bump in f.
    #[inline]
    pub fn bump_r(&self, r: f64) -> f64 {
        let lo = 1.0 + self.collar;
        let hi = 3.0 - self.collar;
        let a = smooth_step((r - lo) / (self.plateau_r.0 - lo));
        let b = smooth_step((hi - r) / (hi - self.plateau_r.1));
        a * b
    }

    /// Vertical factor of the bump in f.
    #[inline]
    pub fn bump_z(&self, z: f64) -> f64 {
        let hi = 2.0 - self.collar;
        smooth_step((hi - z.abs()) / (hi - self.plateau_z.1))
    }

    /// Odd sign step: -1 on [-z1, -z0], +1 on [z0, z1] before the shift.
    #[inline]
    pub fn sign_step(&self, z: f64) -> f64 {
        let w = self.plateau_z.0;
        let x = z - self.f_shift;
        if x >= w {
            1.0
        } else if x <= -w {
            -1.0
        } else {
            2.0 * smooth_step((x + w) / (2.0 * w)) - 1.0
        }
    }

    /// f with the radial bump factor supplied, for shells of constant radius.
    #[inline]
    pub fn f_with_bump(&self, bump_r: f64, z: f64) -> f64 {
        if bump_r == 0.0 {
            return 0.0;
        }
        -self.sign_step(z) * bump_r * self.bump_z(z)
    }

    /// Unchecked f.
    #[inline]
    pub fn f(&self, r: f64, z: f64) -> f64 {
        self.f_with_bump(self.bump_r(r), z)
    }

    /// `(dr/dt, dtheta/dt, dz/dt)`.
    pub fn wilson_field(&self, p: &crate::geom::CylPoint) -> Result<[f64; 3]> {
        Self::check_domain(p.r, p.z)?;
        Ok([0.0, self.f(p.r, p.z), self.g(p.r, p.z)])
    }

    /// `|r-2|^n + ||z|-1|^n`, the comparison function of the finite-order condition.
    pub fn order_comparison(&self, r: f64, z: f64) -> Option<f64> {
        match self.order {
            VanishOrder::Even(n) => {
                let n = n as i32;
                Some((r - 2.0).powi(n) + (z.abs() - 1.0).powi(n))
            }
            VanishOrder::Flat => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_is_complementary() {
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            assert!((smooth_step(x) + smooth_step(1.0 - x) - 1.0).abs() < 1e-15);
        }
        assert_eq!(smooth_step(-0.1), 0.0);
        assert_eq!(smooth_step(1.1), 1.0);
    }

    #[test]
    fn join_is_monotone() {
        let mut prev = -1.0;
        for i in 0..=2000 {
            let v = join(i as f64 / 1000.0);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn flat_order_reaches_g0() {
        let p = WilsonProfile::generic(0.5, 0.2, VanishOrder::Flat);
        assert_eq!(p.g(2.0, 1.0), 0.0);
        assert_eq!(p.g(2.3, 1.0), 0.5);
        assert!(p.g(2.05, 1.0) > 0.0);
    }
}
