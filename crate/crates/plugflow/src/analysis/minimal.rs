//! Sampled closures of the special orbits.

use crate::error::Result;
use crate::geom::{CylPoint, Z_MAX};
use crate::quotient::flow::{run_half, End, Observer, StepView};
use crate::quotient::{special_points, Budgets, PlugSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Points in the plane-embedded cylinder with a bucket index for nearest-neighbour queries.
#[derive(Debug, Clone)]
pub struct PointCloud {
    pub pts: Vec<[f64; 3]>,
    /// Extra path length charged for reaching a point; zero unless it stands in for a glued copy.
    pub offsets: Vec<f64>,
    cell: f64,
    buckets: HashMap<(i64, i64, i64), Vec<u32>>,
}

impl PointCloud {
    pub fn new(pts: Vec<[f64; 3]>, cell: f64) -> Self {
        let mut buckets: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
        for (i, p) in pts.iter().enumerate() {
            buckets.entry(Self::key(p, cell)).or_default().push(i as u32);
        }
        let offsets = vec![0.0; pts.len()];
        PointCloud { pts, offsets, cell, buckets }
    }

    pub fn with_offsets(pts: Vec<[f64; 3]>, offsets: Vec<f64>, cell: f64) -> Self {
        let mut c = Self::new(pts, cell);
        c.offsets = offsets;
        c
    }

    fn key(p: &[f64; 3], cell: f64) -> (i64, i64, i64) {
        ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64, (p[2] / cell).floor() as i64)
    }

    pub fn from_cyl(pts: &[CylPoint], cell: f64) -> Self {
        Self::new(pts.iter().map(|p| p.cartesian()).collect(), cell)
    }

    /// Distance from `q` to the nearest point; infinite for an empty cloud.
    pub fn nearest(&self, q: &[f64; 3]) -> f64 {
        if self.pts.is_empty() {
            return f64::INFINITY;
        }
        let (a, b, c) = Self::key(q, self.cell);
        let mut best = f64::INFINITY;
        // The whole cloud fits in a box of side 6 plus a margin of one cell.
        let max_ring = (7.0 / self.cell).ceil() as i64 + 1;
        for ring in 0..=max_ring {
            if best <= (ring as f64 - 1.0).max(0.0) * self.cell {
                break;
            }
            for i in -ring..=ring {
                for j in -ring..=ring {
                    for k in -ring..=ring {
                        if i.abs().max(j.abs()).max(k.abs()) != ring {
                            continue;
                        }
                        if let Some(list) = self.buckets.get(&(a + i, b + j, c + k)) {
                            for &n in list {
                                let p = &self.pts[n as usize];
                                let d = self.offsets[n as usize] + ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
                                best = best.min(d);
                            }
                        }
                    }
                }
            }
        }
        best
    }

    /// `max over p in other` of the distance from `p` to this cloud.
    pub fn one_sided_from(&self, other: &[[f64; 3]]) -> f64 {
        other.par_iter().map(|p| self.nearest(p)).reduce(|| 0.0, f64::max)
    }

    pub fn hausdorff(&self, other: &PointCloud) -> f64 {
        self.one_sided_from(&other.pts).max(other.one_sided_from(&self.pts))
    }
}

/// Band below `|z| = 2` whose points also reach the tube face through the identification.
pub const GLUE_BAND: f64 = 0.25;

/// Embedded copies of `p` with the extra path length to reach each: `p` itself and,
/// within [`GLUE_BAND`] of a glued part of the horizontal boundary, the identified face point.
pub(crate) fn glued_copies(spec: &PlugSpec, p: &CylPoint) -> Vec<([f64; 3], f64)> {
    let mut out = vec![(p.cartesian(), 0.0)];
    let gap = Z_MAX - p.z.abs();
    if gap < GLUE_BAND {
        let b = CylPoint::new(p.r, p.theta, p.z.signum() * Z_MAX);
        out.extend(spec.representatives(&b).into_iter().skip(1).map(|q| (q.cartesian(), gap)));
    }
    out
}

/// Cloud of all glued copies of `pts`.
pub fn glued_cloud(spec: &PlugSpec, pts: &[CylPoint], cell: f64) -> PointCloud {
    let (xs, off) = pts.iter().flat_map(|p| glued_copies(spec, p)).unzip();
    PointCloud::with_offsets(xs, off, cell)
}

/// Largest identification-aware distance from a point of `from` to `to`.
pub fn glued_one_sided(spec: &PlugSpec, from: &[CylPoint], to: &PointCloud) -> f64 {
    from.par_iter()
        .map(|p| glued_copies(spec, p).iter().map(|(x, o)| o + to.nearest(x)).fold(f64::INFINITY, f64::min))
        .reduce(|| 0.0, f64::max)
}

/// Identification-aware Hausdorff distance between two sample sets.
pub fn glued_hausdorff(spec: &PlugSpec, a: &[CylPoint], b: &[CylPoint], cell: f64) -> f64 {
    let ca = glued_cloud(spec, a, cell);
    let cb = glued_cloud(spec, b, cell);
    glued_one_sided(spec, a, &cb).max(glued_one_sided(spec, b, &ca))
}

/// Samples a half orbit at the multiples of `dt`.
pub(crate) struct Sampler {
    /// Signed sampling step; negative for backward runs.
    dt: f64,
    next: usize,
    pub(crate) pts: Vec<CylPoint>,
    pub(crate) levels: Vec<i32>,
}

impl Sampler {
    /// `first` is the index of the first multiple to record.
    pub(crate) fn new(dt: f64, first: usize) -> Self {
        Sampler { dt, next: first, pts: Vec::new(), levels: Vec::new() }
    }
}

impl Observer for Sampler {
    fn on_step(&mut self, v: &StepView) {
        loop {
            let t = self.next as f64 * self.dt;
            let sg = self.dt.signum();
            if (t - v.t_b) * sg > 1e-12 {
                break;
            }
            if (t - v.t_a) * sg >= -1e-12 {
                let t = if sg > 0.0 { t.min(v.t_b) } else { t.max(v.t_b) };
                self.pts.push(v.point(t));
                self.levels.push(v.level);
            }
            self.next += 1;
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpecialOrbitSample {
    pub start: CylPoint,
    pub end: End,
    pub end_backward: End,
    pub events: usize,
    pub max_level: i32,
    pub min_radius: f64,
    #[serde(skip)]
    pub points: Vec<CylPoint>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinimalSetSample {
    pub t_max: f64,
    pub orbits: Vec<SpecialOrbitSample>,
    pub min_radius: f64,
    /// Between the closures sampled from the two lower special points.
    pub hausdorff_12: f64,
}

impl MinimalSetSample {
    pub fn cloud(&self, i: usize, cell: f64) -> PointCloud {
        PointCloud::from_cyl(&self.orbits[i].points, cell)
    }

    /// Largest identification-aware distance from a point of `pts` to the union of the sampled closures.
    pub fn distance_from(&self, spec: &PlugSpec, pts: &[CylPoint], cell: f64) -> f64 {
        let all: Vec<CylPoint> = self.orbits.iter().flat_map(|o| o.points.iter().copied()).collect();
        glued_one_sided(spec, pts, &glued_cloud(spec, &all, cell))
    }
}

/// Flows the lower special point of each insertion both ways for `budgets.t_max`, sampling every `dt`.
pub fn minimal_set_sample(spec: &PlugSpec, budgets: Budgets, dt: f64) -> Result<MinimalSetSample> {
    if spec.insertions.len() != 2 {
        return Err(crate::Error::Precondition("the minimal set needs both insertions".into()));
    }
    let sp = special_points(spec)?;
    let mut s = spec.clone();
    s.budgets = budgets;
    let starts = [sp.points[0], sp.points[2]];
    let orbits = starts
        .par_iter()
        .map(|&p| {
            let mut fwd = Sampler::new(dt, 0);
            let h = run_half(&s, p, 1.0, &mut fwd)?;
            let mut bwd = Sampler::new(-dt, 1);
            let hb = run_half(&s, p, -1.0, &mut bwd)?;
            let mut points = bwd.pts;
            points.reverse();
            points.extend(fwd.pts);
            let levels = fwd.levels.iter().chain(&bwd.levels);
            Ok(SpecialOrbitSample {
                start: p,
                end: h.end,
                end_backward: hb.end,
                events: h.events.len() + hb.events.len(),
                max_level: levels.copied().max().unwrap_or(0),
                min_radius: points.iter().map(|q| q.r).fold(f64::INFINITY, f64::min),
                points,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let cell = 0.05;
    let hausdorff_12 = glued_hausdorff(spec, &orbits[0].points, &orbits[1].points, cell);
    let min_radius = orbits.iter().map(|o| o.min_radius).fold(f64::INFINITY, f64::min);
    Ok(MinimalSetSample { t_max: budgets.t_max, orbits, min_radius, hausdorff_12 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_matches_brute_force() {
        let mut x = 0.37f64;
        let mut next = || {
            x = (x * 9301.0 + 0.49297).fract();
            4.0 * x - 2.0
        };
        let pts: Vec<[f64; 3]> = (0..500).map(|_| [next(), next(), next()]).collect();
        let cloud = PointCloud::new(pts.clone(), 0.1);
        for _ in 0..50 {
            let q = [next(), next(), next()];
            let brute = pts.iter().map(|p| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()).fold(f64::INFINITY, f64::min);
            assert!((cloud.nearest(&q) - brute).abs() < 1e-15);
        }
    }

    #[test]
    fn glued_copies_are_at_zero_distance() {
        let spec = PlugSpec::generic(0.0).unwrap();
        let mut pair = None;
        'search: for i in 0..200 {
            for j in 0..40 {
                let p = CylPoint::new(1.0 + 2.0 * j as f64 / 40.0, std::f64::consts::TAU * i as f64 / 200.0, Z_MAX);
                if let [_, q] = spec.representatives(&p)[..] {
                    pair = Some((p, q));
                    break 'search;
                }
            }
        }
        let (p, q) = pair.expect("some boundary point is glued");
        assert!(glued_hausdorff(&spec, &[p], &[q], 0.05) < 1e-12);
        assert!(PointCloud::from_cyl(&[p], 0.05).hausdorff(&PointCloud::from_cyl(&[q], 0.05)) > 0.01);
        let below = CylPoint::new(p.r, p.theta, Z_MAX - 0.1);
        assert!((glued_hausdorff(&spec, &[below], &[q], 0.05) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn special_orbits_stay_outside_the_reeb_radius() {
        let spec = PlugSpec::generic(0.0).unwrap();
        let m = minimal_set_sample(&spec, Budgets { t_max: 500.0, max_events: 100_000 }, 0.1).unwrap();
        assert!(m.min_radius >= 2.0 - 1e-6, "{}", m.min_radius);
        for o in &m.orbits {
            assert!(o.end.budget(), "{:?}", o.end);
            assert!(o.max_level >= 2);
        }
        assert!(m.hausdorff_12.is_finite());
    }
}
