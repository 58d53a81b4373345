//! Separated-set counts and entropy estimates from sampled orbits.

use crate::analysis::growth::linear_fit;
use crate::analysis::minimal::{glued_copies, Sampler};
use crate::error::{Error, Result};
use crate::geom::CylPoint;
use crate::quotient::flow::{run_half, End};
use crate::quotient::PlugSpec;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// A sampled orbit: embedded copies of each sample with the path length charged for reaching them.
#[derive(Debug, Clone)]
pub struct SampledOrbit {
    pub start: CylPoint,
    /// Sample `k` is at time `(k - center) dt`.
    samples: Vec<Vec<([f64; 3], f64)>>,
    pub center: usize,
    pub forward: End,
    pub backward: End,
    /// The event budget ran out in either direction before the time window was covered.
    pub truncated: bool,
}

impl SampledOrbit {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn distance(&self, other: &SampledOrbit, k: usize) -> f64 {
        let mut d = f64::INFINITY;
        for (x, a) in &self.samples[k] {
            for (y, b) in &other.samples[k] {
                let e = a + b + ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) + (x[2] - y[2]).powi(2)).sqrt();
                d = d.min(e);
            }
        }
        d
    }
}

/// Flows `p` over `[-t_max, t_max]` sampled at the multiples of `dt`. An orbit that leaves the
/// plug, or runs out of events, stays at its last point.
pub fn sample_orbit(spec: &PlugSpec, p: CylPoint, t_max: f64, dt: f64) -> Result<SampledOrbit> {
    let mut s = spec.clone();
    s.budgets.t_max = t_max;
    let k = (t_max / dt).round() as usize;
    let mut fwd = Sampler::new(dt, 0);
    let hf = run_half(&s, p, 1.0, &mut fwd)?;
    let mut bwd = Sampler::new(-dt, 1);
    let hb = run_half(&s, p, -1.0, &mut bwd)?;
    let mut pts = bwd.pts;
    pts.truncate(k);
    pts.reverse();
    let pad = k - pts.len();
    let mut all = vec![hb.last; pad];
    all.extend(pts);
    let mut f = fwd.pts;
    f.truncate(k + 1);
    let missing = k + 1 - f.len();
    all.extend(f);
    all.extend(std::iter::repeat_n(hf.last, missing));
    let truncated = matches!(hf.end, End::EventBudget { .. }) || matches!(hb.end, End::EventBudget { .. });
    Ok(SampledOrbit {
        start: p,
        samples: all.iter().map(|q| glued_copies(spec, q)).collect(),
        center: k,
        forward: hf.end,
        backward: hb.end,
        truncated,
    })
}

/// Greedy packing: seed `i` is kept when, for every kept seed `j`, `dist(i, j, k) > eps`
/// for some sample index `k` in `window`. Returns the kept indices in seed order.
pub fn greedy_separated<D>(n: usize, window: std::ops::RangeInclusive<usize>, eps: f64, dist: D) -> Vec<usize>
where
    D: Fn(usize, usize, usize) -> f64 + Sync,
{
    let mut kept: Vec<usize> = Vec::new();
    for i in 0..n {
        let close = kept.par_iter().any(|&j| window.clone().all(|k| dist(i, j, k) <= eps));
        if !close {
            kept.push(i);
        }
    }
    kept
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeparatedCount {
    pub t: f64,
    pub eps_sep: f64,
    pub count: usize,
    pub kept: Vec<usize>,
    /// Seeds whose event budget ran out inside the window.
    pub truncated: Vec<usize>,
}

fn count_sampled(orbits: &[SampledOrbit], t: f64, eps_sep: f64, dt: f64) -> SeparatedCount {
    let m = (t / dt).round() as usize;
    let c = orbits.first().map_or(0, |o| o.center);
    let window = c.saturating_sub(m)..=c + m.min(c);
    let kept = greedy_separated(orbits.len(), window, eps_sep, |i, j, k| orbits[i].distance(&orbits[j], k));
    let truncated = orbits.iter().enumerate().filter(|(_, o)| o.truncated).map(|(i, _)| i).collect();
    SeparatedCount { t, eps_sep, count: kept.len(), kept, truncated }
}

fn sample_all(spec: &PlugSpec, seeds: &[CylPoint], t_max: f64, dt: f64) -> Result<Vec<SampledOrbit>> {
    if !(dt > 0.0) || !(t_max >= 0.0) {
        return Err(Error::Precondition(format!("need dt > 0 and T >= 0, got dt {dt}, T {t_max}")));
    }
    seeds.par_iter().map(|&p| sample_orbit(spec, p, t_max, dt)).collect()
}

/// Size of a greedy `(T, eps_sep)`-separated subset of `seeds`, flowed over `[-T, T]`.
pub fn separated_count(spec: &PlugSpec, seeds: &[CylPoint], t: f64, eps_sep: f64, dt: f64) -> Result<SeparatedCount> {
    let orbits = sample_all(spec, seeds, t, dt)?;
    Ok(count_sampled(&orbits, t, eps_sep, dt))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeparationCurve {
    /// Length of the time window per unit of `T`: 2 for `[-T, T]`.
    pub window: f64,
    pub seeds: usize,
    pub counts: Vec<SeparatedCount>,
}

impl SeparationCurve {
    pub fn eps_values(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.counts.iter().map(|c| c.eps_sep).collect();
        e.sort_by(f64::total_cmp);
        e.dedup();
        e
    }

    /// `(T, count)` for one separation scale, by increasing `T`.
    pub fn series(&self, eps_sep: f64) -> Vec<(f64, usize)> {
        let mut v: Vec<(f64, usize)> = self.counts.iter().filter(|c| c.eps_sep == eps_sep).map(|c| (c.t, c.count)).collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    }

    pub fn write_csv<W: Write>(&self, w: &mut W, header: &str) -> std::io::Result<()> {
        writeln!(w, "{header}")?;
        writeln!(w, "t,eps_sep,count,truncated")?;
        for c in &self.counts {
            writeln!(w, "{:.6},{:.6},{},{}", c.t, c.eps_sep, c.count, c.truncated.len())?;
        }
        Ok(())
    }
}

/// Counts on the grid `T in t_grid` (plus `T = 0`) and `eps_sep in eps_grid`; orbits are flowed once.
pub fn separation_curve(spec: &PlugSpec, seeds: &[CylPoint], t_grid: &[f64], eps_grid: &[f64], dt: f64) -> Result<SeparationCurve> {
    let t_max = t_grid.iter().copied().fold(0.0, f64::max);
    let orbits = sample_all(spec, seeds, t_max, dt)?;
    let mut ts = vec![0.0];
    ts.extend_from_slice(t_grid);
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let mut counts = Vec::new();
    for &e in eps_grid {
        for &t in &ts {
            counts.push(count_sampled(&orbits, t, e, dt));
        }
    }
    Ok(SeparationCurve { window: 2.0, seeds: seeds.len(), counts })
}

/// Doubling map `x -> 2x mod 1` on the dyadic grid `i / n`, iterated `0..=t_max` times, as a
/// one-sided separation curve under the circle metric.
pub fn doubling_map_curve(n: usize, t_grid: &[usize], eps_sep: f64) -> SeparationCurve {
    let t_max = t_grid.iter().copied().max().unwrap_or(0);
    let orbits: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut x = i as f64 / n as f64;
            (0..=t_max)
                .map(|_| {
                    let y = x;
                    x = (2.0 * x).fract();
                    y
                })
                .collect()
        })
        .collect();
    let dist = |i: usize, j: usize, k: usize| {
        let d = (orbits[i][k] - orbits[j][k]).abs();
        d.min(1.0 - d)
    };
    let counts = t_grid
        .iter()
        .map(|&t| {
            let kept = greedy_separated(n, 0..=t, eps_sep, dist);
            SeparatedCount { t: t as f64, eps_sep, count: kept.len(), kept, truncated: Vec::new() }
        })
        .collect();
    SeparationCurve { window: 1.0, seeds: n, counts }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlphaFit {
    pub alpha: f64,
    /// Slope of `log s` against `T^alpha`.
    pub coefficient: f64,
    pub r2: f64,
    /// `(log s(T) - log s(0)) / T^alpha` at the smallest and largest positive `T`.
    pub ratio_first: f64,
    pub ratio_last: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntropyScale {
    pub eps_sep: f64,
    /// Slope of `log s` against `T`.
    pub slope: f64,
    pub r2: f64,
    /// `slope / window`.
    pub h_top: f64,
    pub alpha: Vec<AlphaFit>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntropyEstimates {
    pub scales: Vec<EntropyScale>,
    /// Estimate at the smallest separation scale.
    pub h_top: f64,
    /// Exponents between which `log s / T^alpha` turns from growing to decaying.
    pub dim_bracket: (f64, f64),
    /// The bracket is open on one side or wider than a quarter.
    pub bracket_wide: bool,
}

/// Fits `log s` against `T` and `T^alpha` for every scale of `curve`; `T = 0` only serves as the
/// baseline of the ratios.
pub fn entropy_estimates(curve: &SeparationCurve, alphas: &[f64]) -> Result<EntropyEstimates> {
    let eps = curve.eps_values();
    if eps.is_empty() {
        return Err(Error::Precondition("no separated counts".into()));
    }
    let mut scales = Vec::new();
    for &e in &eps {
        let series = curve.series(e);
        let base = series.iter().find(|(t, _)| *t == 0.0).map(|(_, c)| (*c as f64).ln());
        let pts: Vec<(f64, f64)> = series.iter().filter(|(t, c)| *t > 0.0 && *c > 0).map(|(t, c)| (*t, (*c as f64).ln())).collect();
        if pts.len() < 2 {
            return Err(Error::Precondition(format!("need two positive T values at eps_sep {e}")));
        }
        let t: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let (_, slope, r2, _) = linear_fit(&t, &y);
        let base = base.unwrap_or(0.0);
        let alpha = alphas
            .iter()
            .map(|&a| {
                let x: Vec<f64> = t.iter().map(|v| v.powf(a)).collect();
                let (_, c, r2, _) = linear_fit(&x, &y);
                let ratio = |i: usize| (y[i] - base) / x[i];
                AlphaFit { alpha: a, coefficient: c, r2, ratio_first: ratio(0), ratio_last: ratio(x.len() - 1) }
            })
            .collect();
        scales.push(EntropyScale { eps_sep: e, slope, r2, h_top: slope / curve.window, alpha });
    }
    let finest = &scales[0];
    let growing = |f: &AlphaFit| f.ratio_last > f.ratio_first;
    let lo = finest.alpha.iter().filter(|f| growing(f)).map(|f| f.alpha).fold(f64::NAN, f64::max);
    let hi = finest.alpha.iter().filter(|f| !growing(f) && !(f.alpha < lo)).map(|f| f.alpha).fold(f64::NAN, f64::min);
    let bracket_wide = lo.is_nan() || hi.is_nan() || hi - lo > 0.25;
    let dim_bracket = (if lo.is_nan() { 0.0 } else { lo }, if hi.is_nan() { f64::INFINITY } else { hi });
    Ok(EntropyEstimates { h_top: finest.h_top, scales, dim_bracket, bracket_wide })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doubling_map_has_entropy_log_two() {
        let c = doubling_map_curve(1 << 14, &[2, 3, 4, 5, 6, 7, 8], 0.1);
        let e = entropy_estimates(&c, &[0.5, 1.0]).unwrap();
        let ln2 = std::f64::consts::LN_2;
        assert!((e.h_top / ln2 - 1.0).abs() < 0.1, "{}", e.h_top);
    }

    fn segment(n: usize, half: f64) -> Vec<CylPoint> {
        (0..n).map(|i| CylPoint::new(2.0, std::f64::consts::PI, -half + 2.0 * half * (i as f64 + 0.5) / n as f64)).collect()
    }

    #[test]
    fn zero_time_is_a_packing_of_the_seeds() {
        let spec = PlugSpec::generic(0.0).unwrap();
        let seeds = segment(40, 0.5);
        let c = separated_count(&spec, &seeds, 0.0, 0.1, 0.5).unwrap();
        let z: Vec<f64> = seeds.iter().map(|p| p.z).collect();
        let pure = greedy_separated(z.len(), 0..=0, 0.1, |i, j, _| (z[i] - z[j]).abs());
        assert_eq!(c.kept, pure);
    }

    #[test]
    fn counts_grow_with_time_and_shrink_with_scale() {
        let spec = PlugSpec::generic(0.1).unwrap();
        let c = separation_curve(&spec, &segment(60, 1e-2), &[20.0, 50.0, 100.0], &[0.05, 0.1, 0.2], 0.5).unwrap();
        for e in c.eps_values() {
            let s = c.series(e);
            assert!(s.windows(2).all(|w| w[1].1 >= w[0].1), "{s:?}");
            for (t, n) in &s {
                let wide = c.series(2.0 * e).iter().find(|x| x.0 == *t).map(|x| x.1);
                if let Some(m) = wide {
                    assert!(*n >= m, "T {t} eps {e}: {n} < {m}");
                }
            }
        }
    }

    #[test]
    fn packing_of_points_on_a_line() {
        let xs: Vec<f64> = (0..101).map(|i| i as f64 * 0.01).collect();
        let kept = greedy_separated(xs.len(), 0..=0, 0.1, |i, j, _| (xs[i] - xs[j]).abs());
        assert_eq!(kept.len(), 10);
        assert_eq!(kept[..3], [0, 11, 22]);
    }
}
