//! Dormand-Prince 5(4) stepping on a shell of constant radius.
//!
//! The state is `(theta, z)`; r is a parameter of the shell and never integrated.

use crate::error::{Error, Result};
use crate::geom::reduce_angle;
use crate::wilson::profile::WilsonProfile;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// Largest (theta, z) displacement allowed in one step; keeps event chords short.
    pub max_disp: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rtol: 1e-10,
            atol: 1e-12,
            max_disp: 0.05,
        }
    }
}

impl Tolerances {
    pub fn tight() -> Self {
        Tolerances {
            rtol: 1e-12,
            atol: 1e-14,
            max_disp: 0.05,
        }
    }
}

/// The Wilson field restricted to the shell `{r = const}`.
#[derive(Debug, Clone, Copy)]
pub struct Shell<'a> {
    pub profile: &'a WilsonProfile,
    pub r: f64,
    bump_r: f64,
}

impl<'a> Shell<'a> {
    pub fn new(profile: &'a WilsonProfile, r: f64) -> Self {
        Shell {
            profile,
            r,
            bump_r: profile.bump_r(r),
        }
    }

    #[inline]
    pub fn rhs(&self, z: f64) -> [f64; 2] {
        [
            self.profile.f_with_bump(self.bump_r, z),
            self.profile.g(self.r, z),
        ]
    }
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// One accepted step with its continuous extension.
#[derive(Debug, Clone, Copy)]
pub struct Step {
    pub t0: f64,
    pub h: f64,
    pub y0: [f64; 2],
    pub y1: [f64; 2],
    rcont: [[f64; 2]; 4],
}

impl Step {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    /// Dense output at time `t` inside the step. Angle is not reduced.
    #[inline]
    pub fn eval(&self, t: f64) -> [f64; 2] {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let mut out = [0.0; 2];
        for i in 0..2 {
            out[i] = self.y0[i]
                + s * (self.rcont[0][i]
                    + s1 * (self.rcont[1][i] + s * (self.rcont[2][i] + s1 * self.rcont[3][i])));
        }
        out
    }
}

pub struct Stepper<'a> {
    pub shell: Shell<'a>,
    pub tol: Tolerances,
    pub t: f64,
    /// `(theta, z)`, theta reduced at the start of every step.
    pub y: [f64; 2],
    dir: f64,
    h: f64,
    k1: [f64; 2],
}

impl<'a> Stepper<'a> {
    /// `dir` is +1 for forward time, -1 for backward.
    pub fn new(shell: Shell<'a>, t: f64, theta: f64, z: f64, dir: f64, tol: Tolerances) -> Self {
        let k1 = shell.rhs(z);
        let speed = k1[0].abs().max(k1[1].abs()).max(1e-6);
        let h = (tol.max_disp / speed).min(0.05);
        Stepper {
            shell,
            tol,
            t,
            y: [reduce_angle(theta), z],
            dir,
            h,
            k1,
        }
    }

    fn h_cap(&self) -> f64 {
        let speed = self.k1[0].abs().max(self.k1[1].abs()).max(1e-9);
        // Steps must resolve the collars of the bump functions, where the
        // embedded error estimate is unreliable on long steps.
        let rise = 0.5 * self.shell.profile.collar / self.k1[1].abs().max(1e-9);
        (self.tol.max_disp / speed).min(rise)
    }

    /// Takes one accepted step, never past `|t - t_stop| = 0` in the stepping direction.
    pub fn step(&mut self, t_stop: f64) -> Result<Step> {
        self.y[0] = reduce_angle(self.y[0]);
        let y0 = self.y;
        let remaining = (t_stop - self.t) * self.dir;
        if remaining <= 0.0 {
            return Err(Error::Precondition(
                "stepper already at its stop time".into(),
            ));
        }
        let mut h = self.h.min(self.h_cap()).min(remaining);
        let k1 = self.k1;
        loop {
            let last = h >= remaining;
            if !last && h < 1e-14 * self.t.abs().max(1.0) {
                return Err(Error::StepUnderflow { t: self.t });
            }
            let hs = h * self.dir;
            let sh = &self.shell;
            let z2 = y0[1] + hs * A21 * k1[1];
            let k2 = sh.rhs(z2);
            let z3 = y0[1] + hs * (A31 * k1[1] + A32 * k2[1]);
            let k3 = sh.rhs(z3);
            let z4 = y0[1] + hs * (A41 * k1[1] + A42 * k2[1] + A43 * k3[1]);
            let k4 = sh.rhs(z4);
            let z5 = y0[1] + hs * (A51 * k1[1] + A52 * k2[1] + A53 * k3[1] + A54 * k4[1]);
            let k5 = sh.rhs(z5);
            let z6 =
                y0[1] + hs * (A61 * k1[1] + A62 * k2[1] + A63 * k3[1] + A64 * k4[1] + A65 * k5[1]);
            let k6 = sh.rhs(z6);
            let mut y1 = [0.0; 2];
            for i in 0..2 {
                y1[i] = y0[i]
                    + hs * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            let k7 = sh.rhs(y1[1]);
            let mut err2 = 0.0;
            for i in 0..2 {
                let e = hs
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                // The angle is measured against a fixed scale, so steps do not depend on where theta is.
                let mag = if i == 0 { std::f64::consts::PI } else { y0[i].abs().max(y1[i].abs()) };
                let sc = self.tol.atol + self.tol.rtol * mag;
                err2 += (e / sc) * (e / sc);
            }
            let err = (err2 / 2.0).sqrt();
            if err <= 1.0 {
                let mut rcont = [[0.0; 2]; 4];
                for i in 0..2 {
                    let ydiff = y1[i] - y0[i];
                    let bspl = hs * k1[i] - ydiff;
                    rcont[0][i] = ydiff;
                    rcont[1][i] = bspl;
                    rcont[2][i] = ydiff - hs * k7[i] - bspl;
                    rcont[3][i] = hs
                        * (D1 * k1[i]
                            + D3 * k3[i]
                            + D4 * k4[i]
                            + D5 * k5[i]
                            + D6 * k6[i]
                            + D7 * k7[i]);
                }
                let step = Step {
                    t0: self.t,
                    h: hs,
                    y0,
                    y1,
                    rcont,
                };
                self.t = if last { t_stop } else { self.t + hs };
                self.y = y1;
                self.k1 = k7;
                let fac = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                // A step truncated at the stop time says nothing about the next step size.
                if !(last && h < self.h) {
                    self.h = h * fac;
                }
                return Ok(step);
            }
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
        }
    }

    /// Restarts from a new state on the same shell.
    pub fn reset(&mut self, t: f64, theta: f64, z: f64) {
        self.t = t;
        self.y = [reduce_angle(theta), z];
        self.k1 = self.shell.rhs(z);
    }
}

/// Refines a root of `z(t) - target` inside a step with the secant method.
pub fn locate_height(step: &Step, target: f64, tol: f64) -> f64 {
    let (mut a, mut b) = (step.t0, step.t1());
    let mut fa = step.y0[1] - target;
    let mut fb = step.y1[1] - target;
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    // Illinois-modified regula falsi: secant steps kept inside the bracket.
    let mut side = 0;
    for _ in 0..100 {
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = step.eval(c)[1] - target;
        if fc.abs() <= tol || (b - a).abs() <= 1e-15 * c.abs().max(1.0) {
            return c;
        }
        if (fc > 0.0) == (fb > 0.0) {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    (a * fb - b * fa) / (fb - fa)
}
