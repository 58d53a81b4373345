//! Special points and the entry/exit symmetry of primary orbits.

use crate::error::Result;
use crate::geom::{angle_diff, flat_dist, CylPoint, Z_MAX};
use crate::quotient::flow::{run_half, End, EventKind, Observer, TransitionEvent};
use crate::quotient::PlugSpec;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Face points on the periodic orbits of the Wilson plug (on `r = 2 + eps` when `eps != 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpecialPoints {
    /// `[p1-, p1+, p2-, p2+]`: entry-face then top-face point of each insertion.
    pub points: [CylPoint; 4],
}

pub fn special_points(spec: &PlugSpec) -> Result<SpecialPoints> {
    let mut pts = [CylPoint::new(2.0, 0.0, 0.0); 4];
    for (k, s) in spec.insertions.iter().enumerate() {
        let (r, th) = s.special();
        pts[2 * k] = s.sigma(&spec.wilson, r, th, -Z_MAX)?;
        pts[2 * k + 1] = s.sigma(&spec.wilson, r, th, Z_MAX)?;
    }
    Ok(SpecialPoints { points: pts })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntryExitReport {
    pub samples: usize,
    pub exited: usize,
    pub trapped: usize,
    /// Largest horizontal distance between an exit and its entry.
    pub max_deviation: f64,
    pub worst_entry: Option<CylPoint>,
}

impl EntryExitReport {
    pub fn trapped_fraction(&self) -> f64 {
        if self.samples == 0 {
            0.0
        } else {
            self.trapped as f64 / self.samples as f64
        }
    }
}

/// Primary entry points in `r_lo <= r <= r_hi`, off the glued domains.
pub fn primary_entries(spec: &PlugSpec, count: usize, r_lo: f64, r_hi: f64) -> Vec<CylPoint> {
    const GOLDEN: f64 = 0.618_033_988_749_894_8;
    let mut out = Vec::with_capacity(count);
    let mut j = 0usize;
    while out.len() < count && j < 100 * count.max(1) {
        let r = if count > 1 {
            r_lo + (r_hi - r_lo) * (out.len() as f64) / (count - 1) as f64
        } else {
            r_lo
        };
        let th = std::f64::consts::TAU * ((j as f64 * GOLDEN) % 1.0);
        j += 1;
        if spec.domain_of(r, th).is_none() {
            out.push(CylPoint::new(r, th, -Z_MAX));
        }
    }
    out
}

/// Flows `count` primary entries and compares every exit with its entry.
pub fn check_entry_exit(
    spec: &PlugSpec,
    count: usize,
    r_lo: f64,
    r_hi: f64,
) -> Result<EntryExitReport> {
    let entries = primary_entries(spec, count, r_lo, r_hi);
    let runs: Vec<Result<(CylPoint, End, CylPoint)>> = entries
        .par_iter()
        .map(|p| run_half(spec, *p, 1.0, &mut ()).map(|h| (*p, h.end, h.last)))
        .collect();
    let mut rep = EntryExitReport {
        samples: entries.len(),
        exited: 0,
        trapped: 0,
        max_deviation: 0.0,
        worst_entry: None,
    };
    for run in runs {
        let (p, end, last) = run?;
        if end.exited() {
            rep.exited += 1;
            let dev = (last.r - p.r).hypot(p.r * angle_diff(last.theta, p.theta));
            if dev > rep.max_deviation || rep.worst_entry.is_none() {
                rep.max_deviation = rep.max_deviation.max(dev);
                rep.worst_entry = Some(p);
            }
        } else {
            rep.trapped += 1;
        }
    }
    Ok(rep)
}

/// Secondary-entry radius margins `r' - (r - eps)` collected over forward runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadiusLawReport {
    pub runs: usize,
    pub entries: usize,
    pub min_margin: f64,
    /// Entry-face point of the smallest margin.
    pub argmin: Option<CylPoint>,
    /// Distance from `argmin` to the nearest lower special point.
    pub argmin_to_special: f64,
    /// Smallest margin among entries farther than `away` from both lower special points.
    pub min_margin_away: f64,
    pub away: f64,
}

/// Flows every start forward within the spec budgets and records each secondary entry.
pub fn radius_law_survey(spec: &PlugSpec, starts: &[CylPoint], away: f64) -> Result<RadiusLawReport> {
    let eps = spec.epsilon();
    let sp = special_points(spec)?;
    let lower = [sp.points[0], sp.points[2]];
    let runs: Vec<Result<Vec<(f64, CylPoint)>>> = starts
        .par_iter()
        .map(|p| {
            let h = run_half(spec, *p, 1.0, &mut ())?;
            Ok(h.events.iter().filter_map(|e| e.radius_margin(eps).map(|m| (m, e.pre))).collect())
        })
        .collect();
    let mut rep = RadiusLawReport {
        runs: starts.len(),
        entries: 0,
        min_margin: f64::INFINITY,
        argmin: None,
        argmin_to_special: f64::INFINITY,
        min_margin_away: f64::INFINITY,
        away,
    };
    let to_special = |q: &CylPoint| lower.iter().map(|s| flat_dist(q, s)).fold(f64::INFINITY, f64::min);
    for run in runs {
        for (m, pre) in run? {
            rep.entries += 1;
            if m < rep.min_margin {
                rep.min_margin = m;
                rep.argmin = Some(pre);
            }
            if to_special(&pre) > away {
                rep.min_margin_away = rep.min_margin_away.min(m);
            }
        }
    }
    rep.argmin_to_special = rep.argmin.as_ref().map_or(f64::INFINITY, to_special);
    Ok(rep)
}

struct FirstEntry(Option<TransitionEvent>);

impl Observer for FirstEntry {
    fn on_event(&mut self, e: &TransitionEvent, _level: i32) {
        if self.0.is_none() && matches!(e.kind, EventKind::SecondaryEntry(_)) {
            self.0 = Some(*e);
        }
    }

    fn stop(&self) -> bool {
        self.0.is_some()
    }
}

/// Angle on the bottom face, at radius `r`, whose orbit first enters insertion `k` (0-based)
/// closest to its special point; scanned over `n` angles. Every point of the disk of flat
/// radius `rho` about the chosen point is a primary entry, off the glued domains.
pub fn shadow_angle(spec: &PlugSpec, k: usize, r: f64, rho: f64, n: usize) -> Result<f64> {
    let target = special_points(spec)?.points[2 * k];
    let hits: Vec<Result<Option<(f64, f64)>>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let th = std::f64::consts::TAU * j as f64 / n as f64;
            let glued = (0..=16).any(|i| {
                let a = std::f64::consts::TAU * i as f64 / 16.0;
                let q = r + rho * a.cos();
                (0..=8).any(|j| spec.domain_of(q, th + (j as f64 / 8.0) * rho * a.sin() / q).is_some())
            });
            if glued {
                return Ok(None);
            }
            let mut obs = FirstEntry(None);
            run_half(spec, CylPoint::new(r, th, -Z_MAX), 1.0, &mut obs)?;
            Ok(obs.0.filter(|e| e.kind == EventKind::SecondaryEntry(k + 1)).map(|e| (flat_dist(&e.pre, &target), th)))
        })
        .collect();
    let mut best: Option<(f64, f64)> = None;
    for h in hits {
        if let Some((d, th)) = h? {
            if best.is_none_or(|b| d < b.0) {
                best = Some((d, th));
            }
        }
    }
    best.map(|b| b.1).ok_or_else(|| crate::Error::Precondition(format!("no orbit from r = {r} enters insertion {}", k + 1)))
}

/// `count` bottom-face points filling the disk of radius `rho` about `(r, theta)` in the flat
/// metric, in a fixed sunflower order.
pub fn entry_disk(r: f64, theta: f64, rho: f64, count: usize) -> Vec<CylPoint> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let s = rho * ((i as f64 + 0.5) / count as f64).sqrt();
            let a = golden * i as f64;
            CylPoint::new(r + s * a.cos(), theta + s * a.sin() / r, -Z_MAX)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quotient::{flow::Direction, flow_orbit, Budgets};

    #[test]
    fn special_points_on_the_periodic_orbits() {
        let spec = PlugSpec::generic(0.0).unwrap();
        let sp = special_points(&spec).unwrap();
        for p in sp.points {
            assert!((p.r - 2.0).abs() < 1e-10);
        }
        assert!((sp.points[0].z + 1.0).abs() < 1e-12);
        assert!((sp.points[2].z - 1.0).abs() < 1e-12);
        let s = &spec.insertions[0];
        let (k, rp, th) = spec.face_preimage(&sp.points[0], false).unwrap();
        assert_eq!(k, 0);
        assert!((rp - 2.0).abs() < 1e-8 && angle_diff(th, s.theta_hat).abs() < 1e-8);

        let spec = PlugSpec::generic(0.1).unwrap();
        let sp = special_points(&spec).unwrap();
        assert!((sp.points[0].r - 2.1).abs() < 1e-10);
    }

    #[test]
    fn outer_entries_exit_where_they_entered() {
        let spec = PlugSpec::generic(0.0).unwrap().with_budgets(Budgets {
            t_max: 3000.0,
            max_events: 2000,
        });
        let rep = check_entry_exit(&spec, 40, 2.6, 2.99).unwrap();
        assert_eq!(rep.trapped, 0);
        assert!(rep.max_deviation < 1e-6, "{rep:?}");
    }

    #[test]
    fn backward_from_exit_retraces() {
        let spec = PlugSpec::generic(0.0).unwrap().with_budgets(Budgets {
            t_max: 3000.0,
            max_events: 2000,
        });
        let p = CylPoint::new(2.7, 2.5, -2.0);
        let f = run_half(&spec, p, 1.0, &mut ()).unwrap();
        assert!(f.end.exited());
        let b = flow_orbit(&spec, f.last, Direction::Backward).unwrap();
        assert!(b.backward.exited());
        let first = b.samples.first().unwrap();
        assert!((first.r - p.r).abs() < 1e-9 && angle_diff(first.theta, p.theta).abs() < 1e-6);
    }

    #[test]
    fn entry_disk_fills_the_disk() {
        let d = entry_disk(1.98, 1.0, 0.015, 50);
        assert_eq!(d.len(), 50);
        for p in &d {
            let c = CylPoint::new(1.98, 1.0, -Z_MAX);
            assert!((p.r - c.r).hypot(c.r * angle_diff(p.theta, c.theta)) <= 0.015 + 1e-12);
            assert_eq!(p.z, -Z_MAX);
        }
        let rs: Vec<f64> = d.iter().map(|p| p.r).collect();
        assert!(rs.iter().cloned().fold(f64::INFINITY, f64::min) < 1.975);
        assert!(rs.iter().cloned().fold(0.0, f64::max) > 1.985);
    }

    #[test]
    fn radius_law_holds_on_a_few_orbits() {
        let spec = PlugSpec::generic(0.0).unwrap().with_budgets(Budgets { t_max: 2000.0, max_events: 2000 });
        let starts: Vec<CylPoint> = (0..12).map(|j| CylPoint::new(2.0, 0.5 * j as f64, -1.0 + 0.1 * (j % 3) as f64)).collect();
        let r = radius_law_survey(&spec, &starts, 1e-3).unwrap();
        assert!(r.entries > 0);
        assert!(r.min_margin >= -1e-9, "{r:?}");
    }
}
