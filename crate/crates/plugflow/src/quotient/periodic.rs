//! Search for periodic orbits by section returns and shooting.

use crate::error::Result;
use crate::geom::{angle_diff, CylPoint};
use crate::quotient::flow::{near_returns, run_half, End, SectionHit, SectionRecorder};
use crate::quotient::{Budgets, PlugSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub nr: usize,
    pub ntheta: usize,
    pub nz: usize,
    pub return_tol: f64,
    pub budgets: Budgets,
    /// Candidate clusters refined, best returns first.
    pub max_refine: usize,
    pub closure_tol: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            nr: 20,
            ntheta: 20,
            nz: 10,
            return_tol: 1e-4,
            budgets: Budgets {
                t_max: 1e4,
                max_events: 10_000,
            },
            max_refine: 24,
            closure_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub representative: CylPoint,
    pub period: f64,
    pub closure_error: f64,
    /// Section returns `(r, z, level)` over one period, starting with the representative.
    pub section: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SearchResult {
    pub orbits: Vec<PeriodicOrbit>,
    pub seeds: usize,
    pub skipped_in_tube: usize,
    pub exited: usize,
    pub trapped: usize,
    /// Seeds whose first section hit recurs without lying on a periodic orbit found.
    pub recurrent_unexplained: usize,
    pub failed: usize,
    pub first_error: Option<String>,
    pub near_returns: usize,
    pub clusters: usize,
    pub refined: usize,
}

/// Seed grid: `r_k = 1 + 2k/nr` (k = 1..nr), `theta_j = 2 pi j/ntheta`, `z_l = -2 + 4(l + 1/2)/nz`.
pub fn seed_grid(nr: usize, ntheta: usize, nz: usize) -> Vec<CylPoint> {
    let mut out = Vec::with_capacity(nr * ntheta * nz);
    for k in 1..=nr {
        let r = 1.0 + 2.0 * k as f64 / nr as f64;
        for j in 0..ntheta {
            let th = TAU * j as f64 / ntheta as f64;
            for l in 0..nz {
                let z = -2.0 + 4.0 * (l as f64 + 0.5) / nz as f64;
                out.push(CylPoint::new(r, th, z));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    r: f64,
    z: f64,
    period: f64,
    gap: f64,
    seed: usize,
}

struct SeedRun {
    end: std::result::Result<End, String>,
    /// First base-level section hit, when a later base-level hit comes back within tolerance.
    recurrent: Option<[f64; 3]>,
    candidates: Vec<Candidate>,
    returns: usize,
}

fn run_seed(spec: &PlugSpec, seed: usize, p: CylPoint, tol: f64) -> SeedRun {
    let mut rec = SectionRecorder::new(spec.section_angle);
    match run_half(spec, p, 1.0, &mut rec) {
        Err(e) => SeedRun {
            end: Err(e.to_string()),
            recurrent: None,
            candidates: Vec::new(),
            returns: 0,
        },
        Ok(h) => {
            let pairs = near_returns(&rec.hits, tol);
            let mut best: BTreeMap<(i64, i64), Candidate> = BTreeMap::new();
            for &(i, j) in &pairs {
                let (a, b) = (&rec.hits[i], &rec.hits[j]);
                // Representatives are started on the base level.
                if b.level != 0 {
                    continue;
                }
                let c = Candidate {
                    r: b.r,
                    z: b.z,
                    period: b.t - a.t,
                    gap: (a.r - b.r).hypot(a.z - b.z),
                    seed,
                };
                let key = cell(c.r, c.z);
                match best.get(&key) {
                    Some(o) if o.gap <= c.gap => {}
                    _ => {
                        best.insert(key, c);
                    }
                }
            }
            SeedRun {
                end: Ok(h.end),
                recurrent: first_recurrence(&rec.hits, tol),
                candidates: best.into_values().collect(),
                returns: pairs.len(),
            }
        }
    }
}

fn first_recurrence(hits: &[SectionHit], tol: f64) -> Option<[f64; 3]> {
    let mut base = hits.iter().filter(|h| h.level == 0);
    let first = base.next()?;
    base.any(|h| (h.r - first.r).hypot(h.z - first.z) < tol)
        .then_some([first.r, first.z, 0.0])
}

fn cell(r: f64, z: f64) -> (i64, i64) {
    ((r / 0.01).floor() as i64, (z / 0.01).floor() as i64)
}

/// Point reached from `(r, section, z)` after time `t`, if the orbit stays and returns to its level.
fn shoot(spec: &PlugSpec, r: f64, z: f64, t: f64) -> Option<[f64; 3]> {
    if !(1.0..=3.0).contains(&r) || !(-2.0..=2.0).contains(&z) || t <= 0.0 {
        return None;
    }
    let mut s = spec.clone();
    s.budgets = Budgets {
        t_max: t,
        max_events: usize::MAX,
    };
    let p = CylPoint::new(r, spec.section_angle, z);
    let h = run_half(&s, p, 1.0, &mut ()).ok()?;
    if !matches!(h.end, End::TimeBudget { .. }) || h.level != 0 {
        return None;
    }
    let q = h.last;
    Some([
        q.r - r,
        r * angle_diff(q.theta, spec.section_angle),
        q.z - z,
    ])
}

fn norm(e: &[f64; 3]) -> f64 {
    (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt()
}

/// Levenberg-Marquardt on `(r, z, T)`; returns `(r, z, T, closure)` when it closes with a stable period.
fn refine(spec: &PlugSpec, c: &Candidate, closure_tol: f64) -> Option<(f64, f64, f64, f64)> {
    let mut x = [c.r, c.z, c.period];
    let mut e = shoot(spec, x[0], x[1], x[2])?;
    let mut lambda = 1e-3;
    let mut prev_period = x[2];
    let mut stable = false;
    for _ in 0..40 {
        if norm(&e) <= closure_tol && stable {
            break;
        }
        let hs = [1e-7, 1e-7, 1e-7 * x[2].max(1.0)];
        let mut jac = [[0.0; 3]; 3];
        for c in 0..3 {
            let mut y = x;
            y[c] += hs[c];
            let ey = shoot(spec, y[0], y[1], y[2])?;
            for row in 0..3 {
                jac[row][c] = (ey[row] - e[row]) / hs[c];
            }
        }
        let mut improved = false;
        for _ in 0..12 {
            let dx = lm_step(&jac, &e, lambda)?;
            let y = [x[0] + dx[0], x[1] + dx[1], x[2] + dx[2]];
            if let Some(ey) = shoot(spec, y[0], y[1], y[2]) {
                if norm(&ey) < norm(&e) {
                    prev_period = x[2];
                    x = y;
                    e = ey;
                    lambda = (lambda * 0.3).max(1e-12);
                    improved = true;
                    break;
                }
            }
            lambda *= 10.0;
        }
        stable = (x[2] - prev_period).abs() <= 1e-3 * x[2];
        if !improved {
            break;
        }
    }
    (norm(&e) <= closure_tol && stable).then_some((x[0], x[1], x[2], norm(&e)))
}

fn lm_step(j: &[[f64; 3]; 3], e: &[f64; 3], lambda: f64) -> Option<[f64; 3]> {
    // (J^T J + lambda diag(J^T J)) dx = -J^T e
    let mut a = [[0.0; 3]; 3];
    let mut b = [0.0; 3];
    for r in 0..3 {
        for c in 0..3 {
            b[c] -= j[r][c] * e[r];
            for d in 0..3 {
                a[c][d] += j[r][c] * j[r][d];
            }
        }
    }
    for c in 0..3 {
        a[c][c] += lambda * a[c][c].max(1e-12);
    }
    solve3(a, b)
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &k| a[i][col].abs().total_cmp(&a[k][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut s = b[row];
        for k in row + 1..3 {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}

fn section_over_period(spec: &PlugSpec, r: f64, z: f64, period: f64) -> Vec<[f64; 3]> {
    let mut s = spec.clone();
    s.budgets = Budgets {
        t_max: period,
        max_events: usize::MAX,
    };
    let mut rec = SectionRecorder::new(spec.section_angle);
    let _ = run_half(&s, CylPoint::new(r, spec.section_angle, z), 1.0, &mut rec);
    // Crossings are half-open in time, so the start is never recorded and the closing return is dropped.
    let mut pts = vec![[r, z, 0.0]];
    pts.extend(
        rec.hits
            .iter()
            .filter(|h: &&SectionHit| h.t < period * (1.0 - 1e-9))
            .map(|h| [h.r, h.z, h.level as f64]),
    );
    pts
}

/// Hausdorff distance of two sets of `(r, z, level)` section points; points on different levels never match.
pub fn hausdorff(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    let d = |p: &[f64; 3], q: &[f64; 3]| {
        if p[2] == q[2] {
            (p[0] - q[0]).hypot(p[1] - q[1])
        } else {
            f64::INFINITY
        }
    };
    let one = |x: &[[f64; 3]], y: &[[f64; 3]]| {
        x.iter()
            .map(|p| y.iter().map(|q| d(p, q)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    one(a, b).max(one(b, a))
}

pub fn periodic_orbit_search(spec: &PlugSpec, cfg: &SearchConfig) -> Result<SearchResult> {
    let mut s = spec.clone();
    s.budgets = cfg.budgets;
    let all = seed_grid(cfg.nr, cfg.ntheta, cfg.nz);
    let keep: Vec<bool> = all.par_iter().map(|p| s.in_tube(p).is_none()).collect();
    let seeds: Vec<CylPoint> = all
        .iter()
        .zip(&keep)
        .filter(|(_, k)| **k)
        .map(|(p, _)| *p)
        .collect();
    let mut res = SearchResult {
        seeds: seeds.len(),
        skipped_in_tube: all.len() - seeds.len(),
        ..Default::default()
    };

    let runs: Vec<SeedRun> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, p)| run_seed(&s, i, *p, cfg.return_tol))
        .collect();
    let mut clusters: BTreeMap<(i64, i64), Candidate> = BTreeMap::new();
    for run in &runs {
        match &run.end {
            Err(msg) => {
                res.failed += 1;
                res.first_error.get_or_insert_with(|| msg.clone());
            }
            Ok(end) if end.exited() => res.exited += 1,
            Ok(_) => res.trapped += 1,
        }
        res.near_returns += run.returns;
        for c in &run.candidates {
            let key = cell(c.r, c.z);
            match clusters.get(&key) {
                Some(o) if (o.gap, o.seed) <= (c.gap, c.seed) => {}
                _ => {
                    clusters.insert(key, *c);
                }
            }
        }
    }
    res.clusters = clusters.len();
    let mut cands: Vec<Candidate> = clusters.into_values().collect();
    cands.sort_by(|a, b| a.gap.total_cmp(&b.gap).then(a.seed.cmp(&b.seed)));
    cands.truncate(cfg.max_refine);
    res.refined = cands.len();

    let refined: Vec<Option<PeriodicOrbit>> = cands
        .par_iter()
        .map(|c| {
            refine(&s, c, cfg.closure_tol)
                .filter(|&(r, z, _, _)| s.in_tube(&CylPoint::new(r, s.section_angle, z)).is_none())
                .map(|(r, z, period, closure)| PeriodicOrbit {
                    representative: CylPoint::new(r, s.section_angle, z),
                    period,
                    closure_error: closure,
                    section: section_over_period(&s, r, z, period),
                })
        })
        .collect();
    for orbit in refined.into_iter().flatten() {
        let dup = res
            .orbits
            .iter()
            .any(|o| hausdorff(&o.section, &orbit.section) <= 10.0 * cfg.return_tol);
        if !dup {
            res.orbits.push(orbit);
        }
    }
    for run in &runs {
        if let Some(h) = run.recurrent {
            let on_orbit = |o: &PeriodicOrbit| {
                o.section.iter().any(|q| {
                    q[2] == h[2] && (q[0] - h[0]).hypot(q[1] - h[1]) <= 10.0 * cfg.return_tol
                })
            };
            if !res.orbits.iter().any(on_orbit) {
                res.recurrent_unexplained += 1;
            }
        }
    }
    Ok(res)
}
