//! Parametric self-insertion maps and their entry faces.
//!
//! The map sends `(r', theta', -2)` in the domain `L_i` to a point whose radius is
//! `V(r') + eps - Q (theta' - theta_i)^n` with `V(r') = r' - lambda_v (r' - 2)^n`;
//! angle and height are affine in `theta'` on every shell of constant image radius.

pub mod shell;
pub mod validate;

use crate::error::{Error, Result};
use crate::geom::{angle_diff, reduce_angle, CylPoint};
use crate::wilson::{flow_for, Tolerances, WilsonProfile};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub use shell::{ShellFace, ShellPiece};
pub use validate::{validate_insertion, validate_insertions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsertionSpec {
    /// 1 (lower, anchored at z = -1) or 2 (upper, anchored at z = +1).
    pub index: usize,
    pub r_min: f64,
    pub r_max: f64,
    /// Center of the angular window of the domain.
    pub center: f64,
    pub half_width: f64,
    /// Angle of the special point `(2, theta_hat)`.
    pub theta_hat: f64,
    /// Angle of the image of the special point.
    pub image_center: f64,
    pub beta_theta: f64,
    pub lambda_v: f64,
    pub q: f64,
    pub m: f64,
    pub k: f64,
    pub h: f64,
    pub z_anchor: f64,
    pub s_tube: f64,
    /// Even exponent of the vertex and transverse profiles.
    pub order: u32,
    #[serde(default)]
    pub epsilon: f64,
    /// Constant C of the admissibility bound `eps < C sqrt(delta)`.
    pub admissibility_c: f64,
}

impl InsertionSpec {
    /// Default member of the family for insertion `index`.
    pub fn generic(index: usize, epsilon: f64) -> Self {
        // The special angle sits toward the low end of the face on each shell,
        // so slowly rising orbits meet the face close to its vertex.
        let (center, image_center, k, z_anchor, hat) = if index == 1 {
            (0.0, 0.5 * PI, -0.15, -1.0, 0.25)
        } else {
            (PI, 1.5 * PI, 0.15, 1.0, -0.25)
        };
        InsertionSpec {
            index,
            r_min: 1.3,
            r_max: 3.0,
            center,
            half_width: 0.3,
            theta_hat: center + hat,
            image_center,
            beta_theta: 0.25,
            lambda_v: 0.4,
            q: 1.5,
            m: 0.2,
            k,
            h: 0.1,
            z_anchor,
            s_tube: 0.5,
            order: 2,
            epsilon,
            admissibility_c: 1.0,
        }
    }

    /// Window offset of an angle, `theta - center` wrapped.
    #[inline]
    pub fn offset(&self, theta: f64) -> f64 {
        angle_diff(theta, self.center)
    }

    #[inline]
    fn hat_offset(&self) -> f64 {
        angle_diff(self.theta_hat, self.center)
    }

    pub fn in_domain(&self, r_prime: f64, theta_prime: f64) -> bool {
        const SLACK: f64 = 1e-12;
        r_prime >= self.r_min - SLACK
            && r_prime <= self.r_max + SLACK
            && self.offset(theta_prime).abs() <= self.half_width + SLACK
    }

    /// Vertex profile `V(r') = r' - lambda_v (r'-2)^n`.
    #[inline]
    pub fn vertex(&self, r_prime: f64) -> f64 {
        r_prime - self.lambda_v * (r_prime - 2.0).powi(self.order as i32)
    }

    #[inline]
    pub fn vertex_slope(&self, r_prime: f64) -> f64 {
        let n = self.order as i32;
        1.0 - self.lambda_v * n as f64 * (r_prime - 2.0).powi(n - 1)
    }

    /// Transverse term `Q delta^n` at window offset `u`.
    #[inline]
    fn transverse(&self, u: f64) -> f64 {
        self.q * (u - self.hat_offset()).powi(self.order as i32)
    }

    /// Image radius as a function of domain radius and window offset.
    #[inline]
    pub fn rho_u(&self, r_prime: f64, u: f64) -> f64 {
        self.vertex(r_prime) + self.epsilon - self.transverse(u)
    }

    pub fn rho(&self, r_prime: f64, theta_prime: f64) -> f64 {
        self.rho_u(r_prime, self.offset(theta_prime))
    }

    /// Image angle (unreduced, relative to `image_center`) and height on the shell `rho`.
    #[inline]
    pub fn angle_height_u(&self, rho: f64, u: f64) -> (f64, f64) {
        let lift = rho - 2.0 - self.epsilon;
        let a = self.beta_theta * u + self.m * lift;
        let z = self.z_anchor + self.h * lift + self.k * (u - self.hat_offset());
        (a, z)
    }

    /// Unchecked image of `(r', center + u, -2)`.
    pub fn image_u(&self, r_prime: f64, u: f64) -> CylPoint {
        let rho = self.rho_u(r_prime, u);
        let (a, z) = self.angle_height_u(rho, u);
        CylPoint::new(rho, self.image_center + a, z)
    }

    /// The entry-face map `(r', theta') -> sigma_i(r', theta', -2)`.
    pub fn sigma_bottom(&self, r_prime: f64, theta_prime: f64) -> Result<CylPoint> {
        if !self.in_domain(r_prime, theta_prime) {
            return Err(Error::OffDomain {
                index: self.index,
                r_prime,
                theta_prime,
            });
        }
        Ok(self.image_u(r_prime, self.offset(theta_prime)))
    }

    /// `sigma_i(r', theta', z')`: the entry point flowed for time `S (z'+2)/4`.
    pub fn sigma(
        &self,
        w: &WilsonProfile,
        r_prime: f64,
        theta_prime: f64,
        z_prime: f64,
    ) -> Result<CylPoint> {
        if !(-2.0..=2.0).contains(&z_prime) {
            return Err(Error::Precondition(format!(
                "z' = {z_prime} outside [-2, 2]"
            )));
        }
        let p = self.sigma_bottom(r_prime, theta_prime)?;
        flow_for(
            w,
            p,
            self.s_tube * (z_prime + 2.0) / 4.0,
            Tolerances::tight(),
        )
    }

    /// Jacobian of `(rho, angle, z)` with respect to `(r', u)`.
    fn jacobian(&self, r_prime: f64, u: f64) -> [[f64; 2]; 3] {
        let n = self.order as i32;
        let d_r = self.vertex_slope(r_prime);
        let d_u = -self.q * n as f64 * (u - self.hat_offset()).powi(n - 1);
        [
            [d_r, d_u],
            [self.m * d_r, self.beta_theta + self.m * d_u],
            [self.h * d_r, self.k + self.h * d_u],
        ]
    }

    /// Gauss-Newton from a seed; returns `(r', u, residual)`.
    fn newton(&self, p: &CylPoint, mut r_prime: f64, mut u: f64) -> (f64, f64, f64) {
        let mut res = f64::INFINITY;
        for _ in 0..50 {
            let q = self.image_u(r_prime, u);
            let e = [q.r - p.r, p.r * angle_diff(q.theta, p.theta), q.z - p.z];
            res = (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt();
            if res <= 1e-13 {
                break;
            }
            let mut j = self.jacobian(r_prime, u);
            for c in 0..2 {
                j[1][c] *= p.r;
            }
            let mut a = [[0.0; 2]; 2];
            let mut b = [0.0; 2];
            for row in 0..3 {
                for c in 0..2 {
                    b[c] += j[row][c] * e[row];
                    for d in 0..2 {
                        a[c][d] += j[row][c] * j[row][d];
                    }
                }
            }
            let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
            if det.abs() < 1e-300 {
                break;
            }
            let dr = (a[1][1] * b[0] - a[0][1] * b[1]) / det;
            let du = (a[0][0] * b[1] - a[1][0] * b[0]) / det;
            r_prime -= dr;
            u -= du;
            if dr.abs() < 1e-16 && du.abs() < 1e-16 {
                let q = self.image_u(r_prime, u);
                let e = [q.r - p.r, p.r * angle_diff(q.theta, p.theta), q.z - p.z];
                res = (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt();
                break;
            }
        }
        (r_prime, u, res)
    }

    /// Inverse of the entry-face map seeded from a precomputed chart.
    pub fn sigma_bottom_inverse(&self, chart: &FaceChart, p: &CylPoint) -> Result<(f64, f64)> {
        let seed = chart.nearest(p);
        self.sigma_bottom_inverse_from(p, seed.0, seed.1)
            .or_else(|_| {
                // Fallback: every chart node as a seed.
                let mut best = (f64::INFINITY, 0.0, 0.0);
                for node in &chart.nodes {
                    let (r, u, res) = self.newton(p, node.0, self.offset(node.1));
                    if res < best.0 && self.in_domain(r, self.center + u) {
                        best = (res, r, u);
                    }
                }
                if best.0 <= 1e-10 {
                    Ok((best.1, reduce_angle(self.center + best.2)))
                } else {
                    Err(Error::OffFace {
                        index: self.index,
                        residual: best.0,
                    })
                }
            })
    }

    /// Inverse from an explicit seed `(r', theta')`.
    pub fn sigma_bottom_inverse_from(
        &self,
        p: &CylPoint,
        r_seed: f64,
        theta_seed: f64,
    ) -> Result<(f64, f64)> {
        let (r, u, res) = self.newton(p, r_seed, self.offset(theta_seed));
        let tol = 1e-9;
        let inside =
            r >= self.r_min - tol && r <= self.r_max + tol && u.abs() <= self.half_width + tol;
        if res <= 1e-10 && inside {
            Ok((r, reduce_angle(self.center + u)))
        } else {
            Err(Error::OffFace {
                index: self.index,
                residual: res,
            })
        }
    }

    /// Solves `V(r') = value` on `[r_min, r_max]`.
    pub fn vertex_inverse(&self, value: f64) -> Option<f64> {
        let (a, b) = (self.r_min, self.r_max);
        let (va, vb) = (self.vertex(a), self.vertex(b));
        if !(value >= va && value <= vb) {
            return None;
        }
        if self.order == 2 && self.lambda_v > 0.0 {
            let c = value - 2.0;
            let disc = 1.0 - 4.0 * self.lambda_v * c;
            if disc >= 0.0 {
                let x = 2.0 * c / (1.0 + disc.sqrt());
                return Some((2.0 + x).clamp(a, b));
            }
        }
        // Safeguarded Newton on the monotone branch.
        let (mut lo, mut hi) = (a, b);
        let mut x = 0.5 * (a + b);
        for _ in 0..200 {
            let fx = self.vertex(x) - value;
            if fx.abs() < 1e-15 {
                break;
            }
            if fx < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let d = self.vertex_slope(x);
            let nx = x - fx / d;
            x = if d > 0.0 && nx > lo && nx < hi {
                nx
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo < 1e-16 {
                break;
            }
        }
        Some(x)
    }

    /// Radius of the fixed point `rho(r, theta_hat) = r` on `(2+eps, r_max)`.
    pub fn find_r_eps(&self) -> Result<f64> {
        if self.epsilon <= 0.0 {
            return Err(Error::Precondition(format!(
                "epsilon = {} must be positive",
                self.epsilon
            )));
        }
        let phi = |r: f64| self.rho_u(r, self.hat_offset()) - r;
        let (mut a, mut b) = (2.0 + self.epsilon, self.r_max);
        let (fa, fb) = (phi(a), phi(b));
        if !(fa > 0.0 && fb < 0.0) {
            return Err(Error::Config(format!(
                "no sign change of r(sigma(r)) - r on ({a}, {b}): epsilon too large for lambda_v"
            )));
        }
        for _ in 0..200 {
            let c = 0.5 * (a + b);
            if phi(c) > 0.0 {
                a = c;
            } else {
                b = c;
            }
            if b - a < 1e-15 {
                break;
            }
        }
        Ok(0.5 * (a + b))
    }

    /// Window offsets `u` where the entry face meets the shell `{r = rho}`.
    pub fn shell_intervals(&self, rho: f64) -> Vec<(f64, f64)> {
        let n = self.order as i32;
        let hat = self.hat_offset();
        let w = self.half_width;
        // |delta|^n = (V(r') + eps - rho)/Q must be reachable with r' in [r_min, r_max].
        let hi_val = (self.vertex(self.r_max) + self.epsilon - rho) / self.q;
        let lo_val = (self.vertex(self.r_min) + self.epsilon - rho) / self.q;
        if hi_val < 0.0 || self.q <= 0.0 {
            return Vec::new();
        }
        let d_hi = hi_val.powf(1.0 / n as f64);
        let d_lo = if lo_val > 0.0 {
            lo_val.powf(1.0 / n as f64)
        } else {
            0.0
        };
        let mut out = Vec::new();
        let clip = |a: f64, b: f64, out: &mut Vec<(f64, f64)>| {
            let (a, b) = (a.max(-w), b.min(w));
            if b > a {
                out.push((a, b));
            }
        };
        if d_lo == 0.0 {
            clip(hat - d_hi, hat + d_hi, &mut out);
        } else {
            clip(hat - d_hi, hat - d_lo, &mut out);
            clip(hat + d_lo, hat + d_hi, &mut out);
        }
        out
    }

    /// Domain radius of the face point on shell `rho` at offset `u`.
    pub fn shell_r_prime(&self, rho: f64, u: f64) -> Option<f64> {
        self.vertex_inverse(rho - self.epsilon + self.transverse(u))
    }

    /// Face point on shell `rho` at offset `u`: `(r', angle offset from image_center, z)`.
    pub fn shell_point(&self, rho: f64, u: f64) -> Option<(f64, f64, f64)> {
        let rp = self.shell_r_prime(rho, u)?;
        let (a, z) = self.angle_height_u(rho, u);
        Some((rp, a, z))
    }

    /// Sampled inverse-map coordinates along the footprint circle `r = r0`.
    pub fn vartheta_profile(&self, r0: f64, samples: usize) -> VarthetaProfile {
        let mut prof = VarthetaProfile::default();
        for (a, b) in self.shell_intervals(r0) {
            let n = samples.max(3);
            for j in 0..n {
                let u = a + (b - a) * j as f64 / (n - 1) as f64;
                if let Some((rp, ang, _)) = self.shell_point(r0, u) {
                    prof.theta.push(self.image_center + ang);
                    prof.big_r.push(rp);
                    prof.big_theta.push(self.center + u);
                }
            }
        }
        prof
    }

    /// Special point of the domain, `(2, theta_hat)`.
    pub fn special(&self) -> (f64, f64) {
        (2.0, self.theta_hat)
    }

    /// Vertical offset of the vertex of the face curve on `{r = 2}` from the anchor height.
    pub fn vertex_offset(&self) -> f64 {
        let (_, z) = self.angle_height_u(2.0, self.hat_offset());
        (z - self.z_anchor).abs()
    }
}

/// Inverse-map coordinates sampled along a footprint circle.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct VarthetaProfile {
    /// Footprint angles, unreduced and increasing.
    pub theta: Vec<f64>,
    /// Domain radius of the preimage.
    pub big_r: Vec<f64>,
    /// Domain angle of the preimage, unreduced.
    pub big_theta: Vec<f64>,
}

impl VarthetaProfile {
    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }
}

/// Precomputed grid of the entry face, used to seed inversions.
#[derive(Debug, Clone)]
pub struct FaceChart {
    pub index: usize,
    /// `(r', theta', image)`.
    pub nodes: Vec<(f64, f64, CylPoint)>,
}

impl FaceChart {
    pub fn new(spec: &InsertionSpec, n_r: usize, n_theta: usize) -> Self {
        let mut nodes = Vec::with_capacity(n_r * n_theta);
        for i in 0..n_r {
            let r = spec.r_min + (spec.r_max - spec.r_min) * i as f64 / (n_r - 1) as f64;
            for j in 0..n_theta {
                let u = -spec.half_width + 2.0 * spec.half_width * j as f64 / (n_theta - 1) as f64;
                nodes.push((r, reduce_angle(spec.center + u), spec.image_u(r, u)));
            }
        }
        FaceChart {
            index: spec.index,
            nodes,
        }
    }

    pub fn nearest(&self, p: &CylPoint) -> (f64, f64) {
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for (r, t, q) in &self.nodes {
            let d = crate::geom::flat_dist(p, q);
            if d < best.0 {
                best = (d, *r, *t);
            }
        }
        (best.1, best.2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn special_point_images() {
        let s = InsertionSpec::generic(1, 0.0);
        let p = s.sigma_bottom(2.0, s.theta_hat).unwrap();
        assert_eq!(p.r, 2.0);
        assert_eq!(p.z, -1.0);
        let s = InsertionSpec::generic(2, 0.1);
        let p = s.sigma_bottom(2.0, s.theta_hat).unwrap();
        assert!((p.r - 2.1).abs() < 1e-15);
        assert_eq!(p.z, 1.0);
    }

    #[test]
    fn radius_off_vertex() {
        let s = InsertionSpec::generic(1, 0.0);
        let p = s.sigma_bottom(2.5, s.theta_hat).unwrap();
        assert!((p.r - 2.4).abs() < 1e-15);
    }

    #[test]
    fn inverse_round_trip() {
        let s = InsertionSpec::generic(2, 0.0);
        let chart = FaceChart::new(&s, 21, 21);
        let th = s.theta_hat + 0.05;
        let p = s.sigma_bottom(2.4, th).unwrap();
        let (r, t) = s.sigma_bottom_inverse(&chart, &p).unwrap();
        assert!((r - 2.4).abs() < 1e-8);
        assert!(angle_diff(t, th).abs() < 1e-8);
    }

    #[test]
    fn fixed_point_closed_form() {
        for (eps, want) in [(0.1, 2.5), (0.016, 2.2)] {
            let s = InsertionSpec::generic(1, eps);
            let r = s.find_r_eps().unwrap();
            assert!((r - want).abs() < 1e-12, "{r} vs {want}");
        }
        assert!(InsertionSpec::generic(1, 0.0).find_r_eps().is_err());
        assert!(InsertionSpec::generic(1, -0.1).find_r_eps().is_err());
    }

    #[test]
    fn off_domain_rejected() {
        let s = InsertionSpec::generic(1, 0.0);
        assert!(s.sigma_bottom(1.1, s.theta_hat).is_err());
        assert!(s.sigma_bottom(2.0, s.theta_hat + 1.0).is_err());
    }
}
