//! The self-inserted plug in notched Wilson coordinates.
//!
//! Orbits follow the Wilson field and jump exactly at the faces of the inserted
//! tubes and at the parts of the horizontal boundary glued to them.

pub mod flow;
pub mod periodic;
pub mod special;

use crate::error::{Error, Result};
use crate::geom::{flat_dist, CylPoint, Z_MAX};
use crate::insertion::{shell::face_point, validate_insertions, InsertionSpec, ShellFace};
use crate::report::ValidationReport;
use crate::wilson::ode::{Shell, Stepper};
use crate::wilson::{validate_wilson, Tolerances, WilsonProfile};
use serde::{Deserialize, Serialize};

pub use flow::{
    classify_orbit, flow_orbit, run_half, Classification, Direction, End, EventKind, HalfRun,
    Observer, OrbitClass, OrbitTrace, SectionHit, StepView, TraceSample, TransitionEvent,
};

pub use periodic::{periodic_orbit_search, seed_grid, PeriodicOrbit, SearchConfig, SearchResult};
pub use special::{check_entry_exit, entry_disk, radius_law_survey, shadow_angle, special_points, EntryExitReport, RadiusLawReport, SpecialPoints};

/// Grid used when a spec is built; the CLI certifies at a finer grid.
pub const BUILD_GRID: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budgets {
    /// Per direction, in time units.
    pub t_max: f64,
    pub max_events: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            t_max: 2e4,
            max_events: 10_000,
        }
    }
}

/// An immutable, validated plug.
#[derive(Debug, Clone)]
pub struct PlugSpec {
    pub wilson: WilsonProfile,
    /// Empty in Wilson-only mode, otherwise insertion 1 then insertion 2.
    pub insertions: Vec<InsertionSpec>,
    pub tol: Tolerances,
    pub budgets: Budgets,
    /// Angle of the section used for returns.
    pub section_angle: f64,
    report: ValidationReport,
}

impl PlugSpec {
    pub fn new(
        wilson: WilsonProfile,
        insertions: Vec<InsertionSpec>,
        tol: Tolerances,
        budgets: Budgets,
    ) -> Result<Self> {
        if !(insertions.is_empty() || insertions.len() == 2) {
            return Err(Error::Config(format!(
                "expected 0 or 2 insertions, got {}",
                insertions.len()
            )));
        }
        if insertions.len() == 2 {
            if insertions[0].index != 1 || insertions[1].index != 2 {
                return Err(Error::Config("insertions must be ordered 1, 2".into()));
            }
            if insertions[0].epsilon != insertions[1].epsilon {
                return Err(Error::Config(
                    "both insertions must share one offset".into(),
                ));
            }
        }
        let mut report = validate_wilson(&wilson, BUILD_GRID);
        report.extend(validate_insertions(&insertions, &wilson, BUILD_GRID));
        if !report.all_pass() {
            let ids: Vec<_> = report.failures().iter().map(|c| c.id.clone()).collect();
            return Err(Error::Precondition(format!(
                "plug fails {}",
                ids.join(", ")
            )));
        }
        Ok(PlugSpec {
            wilson,
            insertions,
            tol,
            budgets,
            section_angle: 1.0,
            report,
        })
    }

    /// Default generic plug with offset `epsilon`.
    pub fn generic(epsilon: f64) -> Result<Self> {
        PlugSpec::new(
            WilsonProfile::default(),
            vec![
                InsertionSpec::generic(1, epsilon),
                InsertionSpec::generic(2, epsilon),
            ],
            Tolerances::default(),
            Budgets::default(),
        )
    }

    pub fn wilson_only(wilson: WilsonProfile) -> Result<Self> {
        PlugSpec::new(
            wilson,
            Vec::new(),
            Tolerances::default(),
            Budgets::default(),
        )
    }

    pub fn with_budgets(mut self, budgets: Budgets) -> Self {
        self.budgets = budgets;
        self
    }

    pub fn epsilon(&self) -> f64 {
        self.insertions.first().map_or(0.0, |s| s.epsilon)
    }

    pub fn validation(&self) -> &ValidationReport {
        &self.report
    }

    /// Insertion whose domain contains `(r, theta)`.
    pub fn domain_of(&self, r: f64, theta: f64) -> Option<usize> {
        self.insertions.iter().position(|s| s.in_domain(r, theta))
    }

    /// Index of the tube whose interior contains `p`.
    pub fn in_tube(&self, p: &CylPoint) -> Option<usize> {
        for (k, s) in self.insertions.iter().enumerate() {
            let face = ShellFace::new(s, &self.wilson, p.r, false);
            if face.is_empty() {
                continue;
            }
            let mut st = Stepper::new(
                Shell::new(&self.wilson, p.r),
                0.0,
                p.theta,
                p.z,
                -1.0,
                self.tol,
            );
            while st.t > -s.s_tube {
                let Ok(step) = st.step(-s.s_tube) else { break };
                if step.y1[1] <= -Z_MAX {
                    break;
                }
                if let Some((tc, _)) = face.crossing(s, &self.wilson, &step, step.t0, step.t1()) {
                    if tc < -1e-12 && tc > -s.s_tube + 1e-12 {
                        return Some(k);
                    }
                    break;
                }
            }
        }
        None
    }

    /// Domain coordinates `(insertion, r', theta')` of a point lying on an entry
    /// face (`top = false`) or a top face (`top = true`).
    pub fn face_preimage(&self, p: &CylPoint, top: bool) -> Option<(usize, f64, f64)> {
        for (k, s) in self.insertions.iter().enumerate() {
            for (a, b) in s.shell_intervals(p.r) {
                let dist = |u: f64| -> Option<([f64; 2], f64)> {
                    let f = face_point(s, &self.wilson, p.r, u, top)?;
                    let da = crate::geom::angle_diff(p.theta, s.image_center + f[0]);
                    Some(([p.r * da, p.z - f[1]], (p.r * da).hypot(p.z - f[1])))
                };
                let n = 64;
                let mut best = (f64::INFINITY, a);
                for j in 0..=n {
                    let u = a + (b - a) * j as f64 / n as f64;
                    if let Some((_, d)) = dist(u) {
                        if d < best.0 {
                            best = (d, u);
                        }
                    }
                }
                if best.0 > 0.1 {
                    continue;
                }
                let mut u = best.1;
                let h = 1e-7;
                for _ in 0..30 {
                    let (Some((e0, _)), Some((e1, _))) = (dist(u), dist((u + h).min(b))) else {
                        break;
                    };
                    let d = [(e1[0] - e0[0]) / h, (e1[1] - e0[1]) / h];
                    let dd = d[0] * d[0] + d[1] * d[1];
                    if dd == 0.0 {
                        break;
                    }
                    let step = (e0[0] * d[0] + e0[1] * d[1]) / dd;
                    u = (u - step).clamp(a, b);
                    if step.abs() < 1e-15 {
                        break;
                    }
                }
                if let Some((_, d)) = dist(u) {
                    if d < 1e-9 {
                        let rp = s.shell_r_prime(p.r, u)?;
                        return Some((k, rp, s.center + u));
                    }
                }
            }
        }
        None
    }

    /// Identified copies of `p`: the point itself and, on a glued part of the
    /// horizontal boundary, its image on the tube face.
    pub fn representatives(&self, p: &CylPoint) -> Vec<CylPoint> {
        let mut out = vec![*p];
        if (p.z.abs() - Z_MAX).abs() < 1e-9 {
            if let Some(k) = self.domain_of(p.r, p.theta) {
                let s = &self.insertions[k];
                if let Ok(q) = s.sigma(&self.wilson, p.r, p.theta, p.z.signum() * Z_MAX) {
                    out.push(q);
                }
            }
        }
        out
    }

    /// Flat-cylinder distance, taking the boundary identifications into account.
    pub fn distance(&self, a: &CylPoint, b: &CylPoint) -> f64 {
        let direct = flat_dist(a, b);
        let near_boundary = |p: &CylPoint| (p.z.abs() - Z_MAX).abs() < 1e-9;
        if !near_boundary(a) && !near_boundary(b) {
            return direct;
        }
        let ra = self.representatives(a);
        let rb = self.representatives(b);
        let mut d = direct;
        for x in &ra {
            for y in &rb {
                d = d.min(flat_dist(x, y));
            }
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_invalid_plug() {
        let mut w = WilsonProfile::default();
        w.f_shift = -0.6;
        let e = PlugSpec::new(w, vec![], Tolerances::default(), Budgets::default());
        assert!(matches!(e, Err(Error::Precondition(_))));
    }

    #[test]
    fn tube_membership() {
        let spec = PlugSpec::generic(0.0).unwrap();
        let s = &spec.insertions[0];
        let bottom = s.sigma_bottom(2.4, 0.1).unwrap();
        let mid = s.sigma(&spec.wilson, 2.4, 0.1, 0.0).unwrap();
        assert_eq!(spec.in_tube(&mid), Some(0));
        let outside =
            crate::wilson::flow_for(&spec.wilson, bottom, -0.2, Tolerances::tight()).unwrap();
        assert_eq!(spec.in_tube(&outside), None);
        assert_eq!(spec.in_tube(&CylPoint::new(2.9, 2.0, 0.0)), None);
    }

    #[test]
    fn face_preimage_round_trip() {
        let spec = PlugSpec::generic(0.0).unwrap();
        for (k, (rp, th)) in [(0, (2.3, 0.12)), (1, (1.8, std::f64::consts::PI - 0.2))] {
            let s = &spec.insertions[k];
            let b = s.sigma_bottom(rp, th).unwrap();
            let (kk, r2, t2) = spec.face_preimage(&b, false).unwrap();
            assert_eq!(kk, k);
            assert!((r2 - rp).abs() < 1e-8 && crate::geom::angle_diff(t2, th).abs() < 1e-8);
            let top = s.sigma(&spec.wilson, rp, th, 2.0).unwrap();
            let (kk, r2, t2) = spec.face_preimage(&top, true).unwrap();
            assert_eq!(kk, k);
            assert!((r2 - rp).abs() < 1e-7 && crate::geom::angle_diff(t2, th).abs() < 1e-7);
        }
    }
}
