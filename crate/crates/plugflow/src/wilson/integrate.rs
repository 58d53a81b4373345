//! Flow of the Wilson field on the cylinder, stopping at the horizontal boundary.

use crate::error::Result;
use crate::geom::{reduce_angle, CylPoint, Z_MAX};
use crate::wilson::ode::{locate_height, Shell, Stepper, Tolerances};
use crate::wilson::profile::WilsonProfile;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Window over which the stagnation test averages the vertical advance.
const STAGNATION_WINDOW: f64 = 100.0;
const STAGNATION_RATE: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum WilsonOutcome {
    /// Reached z = +2 (forward) or z = -2 (backward).
    Exited {
        t: f64,
        point: CylPoint,
    },
    StillInside {
        t: f64,
        point: CylPoint,
    },
    /// Vertical motion below the stagnation rate near a periodic orbit.
    Stagnated {
        t: f64,
        point: CylPoint,
    },
}

impl WilsonOutcome {
    pub fn point(&self) -> CylPoint {
        match *self {
            WilsonOutcome::Exited { point, .. }
            | WilsonOutcome::StillInside { point, .. }
            | WilsonOutcome::Stagnated { point, .. } => point,
        }
    }

    pub fn time(&self) -> f64 {
        match *self {
            WilsonOutcome::Exited { t, .. }
            | WilsonOutcome::StillInside { t, .. }
            | WilsonOutcome::Stagnated { t, .. } => t,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WilsonSegment {
    pub start: CylPoint,
    /// `(t, point)` at every accepted step.
    pub path: Vec<(f64, CylPoint)>,
    pub outcome: WilsonOutcome,
}

impl WilsonSegment {
    pub fn write_csv<W: Write>(&self, mut w: W, header: &str) -> std::io::Result<()> {
        if !header.is_empty() {
            writeln!(w, "# {header}")?;
        }
        writeln!(w, "t,r,theta,z")?;
        for (t, p) in &self.path {
            writeln!(w, "{t:.17e},{:.17e},{:.17e},{:.17e}", p.r, p.theta, p.z)?;
        }
        Ok(())
    }
}

fn near_periodic(profile: &WilsonProfile, r: f64, z: f64) -> bool {
    (r - 2.0).abs() < profile.eps0 && (z.abs() - 1.0).abs() < profile.eps0
}

/// Integrates for signed time `t_max` (negative means backward flow).
pub fn integrate_wilson(
    profile: &WilsonProfile,
    p: CylPoint,
    t_max: f64,
    tol: Tolerances,
) -> Result<WilsonSegment> {
    WilsonProfile::check_domain(p.r, p.z)?;
    let dir = if t_max < 0.0 { -1.0 } else { 1.0 };
    let exit_z = dir * Z_MAX;
    let mut path = vec![(0.0, p)];
    if p.z * dir >= Z_MAX {
        return Ok(WilsonSegment {
            start: p,
            path,
            outcome: WilsonOutcome::Exited { t: 0.0, point: p },
        });
    }
    let shell = Shell::new(profile, p.r);
    let mut st = Stepper::new(shell, 0.0, p.theta, p.z, dir, tol);
    let mut window_t = 0.0;
    let mut window_z = p.z;
    while st.t * dir < t_max * dir {
        let s = st.step(t_max)?;
        if (s.y1[1] - exit_z) * dir >= 0.0 {
            let tc = locate_height(&s, exit_z, 1e-12);
            let y = s.eval(tc);
            let point = CylPoint::new(p.r, y[0], exit_z);
            path.push((tc, point));
            return Ok(WilsonSegment {
                start: p,
                path,
                outcome: WilsonOutcome::Exited { t: tc, point },
            });
        }
        let q = CylPoint::new(p.r, s.y1[0], s.y1[1]);
        path.push((s.t1(), q));
        if (st.t - window_t).abs() >= STAGNATION_WINDOW {
            let rate = (s.y1[1] - window_z).abs() / (st.t - window_t).abs();
            if rate < STAGNATION_RATE && near_periodic(profile, p.r, s.y1[1]) {
                return Ok(WilsonSegment {
                    start: p,
                    path,
                    outcome: WilsonOutcome::Stagnated { t: st.t, point: q },
                });
            }
            window_t = st.t;
            window_z = s.y1[1];
        }
    }
    let last = path.last().map(|x| x.1).unwrap_or(p);
    Ok(WilsonSegment {
        start: p,
        path,
        outcome: WilsonOutcome::StillInside {
            t: st.t,
            point: last,
        },
    })
}

/// Endpoint of the flow for exactly time `t` (no boundary stop), on the shell of `p`.
pub fn flow_for(profile: &WilsonProfile, p: CylPoint, t: f64, tol: Tolerances) -> Result<CylPoint> {
    if t == 0.0 {
        return Ok(p);
    }
    let dir = t.signum();
    let shell = Shell::new(profile, p.r);
    let mut st = Stepper::new(shell, 0.0, p.theta, p.z, dir, tol);
    while st.t * dir < t * dir {
        st.step(t)?;
    }
    Ok(CylPoint::new(p.r, reduce_angle(st.y[0]), st.y[1]))
}
