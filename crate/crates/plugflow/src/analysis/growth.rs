//! Area of graph-distance balls on the mesh, and growth-type model competition.

use crate::analysis::mesh::PropellerMesh;
use serde::{Deserialize, Serialize};
use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::io::Write;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowthCurve {
    pub s: Vec<f64>,
    pub area: Vec<f64>,
    /// Largest radius whose ball avoids the unresolved part of the mesh.
    pub s_valid: f64,
    /// Distance at which the ball first meets a propeller.
    pub s_onset: f64,
    /// Nodes not reachable from the basepoint.
    pub unreachable: usize,
}

/// Ordered wrapper so distances can sit in a heap.
#[derive(Debug, Clone, Copy)]
struct Dist(f64);
impl PartialEq for Dist {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o).is_eq()
    }
}
impl Eq for Dist {}
impl PartialOrd for Dist {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Dist {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&o.0)
    }
}

/// Graph distances from `source` with the edge weights of the mesh.
pub fn distances(mesh: &PropellerMesh, source: usize) -> Vec<f64> {
    let n = mesh.nodes.len();
    let mut deg = vec![0u32; n + 1];
    for &(a, b, _) in &mesh.edges {
        deg[a as usize] += 1;
        deg[b as usize] += 1;
    }
    let mut start = vec![0usize; n + 1];
    for i in 0..n {
        start[i + 1] = start[i] + deg[i] as usize;
    }
    let mut fill = start.clone();
    let mut adj = vec![(0u32, 0.0f64); start[n]];
    for &(a, b, w) in &mesh.edges {
        adj[fill[a as usize]] = (b, w);
        fill[a as usize] += 1;
        adj[fill[b as usize]] = (a, w);
        fill[b as usize] += 1;
    }
    let mut dist = vec![f64::INFINITY; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Reverse((Dist(0.0), source as u32)));
    while let Some(Reverse((Dist(d), v))) = heap.pop() {
        if d > dist[v as usize] {
            continue;
        }
        for &(u, w) in &adj[start[v as usize]..start[v as usize + 1]] {
            let nd = d + w;
            if nd < dist[u as usize] {
                dist[u as usize] = nd;
                heap.push(Reverse((Dist(nd), u)));
            }
        }
    }
    dist
}

/// `Gr(s)` at `s = ds, 2 ds, ..., s_max`; a cell counts once its mean corner distance is within `s`.
pub fn growth_function(mesh: &PropellerMesh, s_max: f64, ds: f64) -> GrowthCurve {
    let dist = distances(mesh, mesh.basepoint);
    let unreachable = dist.iter().filter(|d| !d.is_finite()).count();
    let s_valid = mesh.frontier.iter().map(|&f| dist[f as usize]).fold(f64::INFINITY, f64::min);
    let s_onset = mesh.nodes.iter().zip(&dist).filter(|(n, _)| n.strand.is_some()).map(|(_, d)| *d).fold(f64::INFINITY, f64::min);
    let nb = (s_max / ds).floor() as usize;
    let mut bins = vec![0.0; nb + 1];
    for (corners, area) in &mesh.cells {
        let d = corners.iter().map(|&c| dist[c as usize]).sum::<f64>() / 4.0;
        if d.is_finite() {
            let b = (d / ds).ceil() as usize;
            if b <= nb {
                bins[b] += area;
            }
        }
    }
    let mut s = Vec::with_capacity(nb);
    let mut area = Vec::with_capacity(nb);
    let mut acc = bins[0];
    for (i, b) in bins.iter().enumerate().skip(1) {
        acc += b;
        s.push(i as f64 * ds);
        area.push(acc);
    }
    GrowthCurve { s, area, s_valid, s_onset, unreachable }
}

impl GrowthCurve {
    /// The propeller range `s_onset <= s <= s_valid`.
    pub fn propeller_range(&self) -> GrowthCurve {
        self.valid_range(self.s_onset, f64::INFINITY)
    }

    /// The part of the curve with `s_lo <= s <= min(s_hi, s_valid)`.
    pub fn valid_range(&self, s_lo: f64, s_hi: f64) -> GrowthCurve {
        let hi = s_hi.min(self.s_valid);
        let (s, area) = self.s.iter().zip(&self.area).filter(|(s, a)| **s >= s_lo && **s <= hi && **a > 0.0).map(|(s, a)| (*s, *a)).unzip();
        GrowthCurve { s, area, ..*self }
    }

    pub fn write_csv<W: Write>(&self, w: &mut W, header: &str) -> std::io::Result<()> {
        writeln!(w, "{header}")?;
        writeln!(w, "s,area")?;
        for (s, a) in self.s.iter().zip(&self.area) {
            writeln!(w, "{s:.6},{a:.9}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthModel {
    /// `log Gr ~ d log s`
    Polynomial,
    /// `log Gr ~ a sqrt(s)`
    Intermediate,
    /// `log Gr ~ b s`
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelFit {
    pub model: GrowthModel,
    pub intercept: f64,
    /// Degree, `a` or `b` depending on the model.
    pub coefficient: f64,
    pub r2: f64,
    pub aic: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowthTypeReport {
    pub bins: usize,
    pub fits: Vec<ModelFit>,
    pub best: GrowthModel,
}

impl GrowthTypeReport {
    pub fn fit(&self, m: GrowthModel) -> &ModelFit {
        self.fits.iter().find(|f| f.model == m).expect("every model is fitted")
    }
}

/// Least squares `y ~ a + b x`; returns `(a, b, r2, rss)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let icpt = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - rss / syy } else { 1.0 };
    (icpt, slope, r2, rss)
}

/// Competes the three growth models on `log Gr`; the smallest AIC wins.
pub fn growth_type_fit(curve: &GrowthCurve) -> crate::Result<GrowthTypeReport> {
    let pts: Vec<(f64, f64)> = curve.s.iter().zip(&curve.area).filter(|(s, a)| **s > 0.0 && **a > 0.0).map(|(s, a)| (*s, a.ln())).collect();
    if pts.len() < 20 {
        return Err(crate::Error::Precondition(format!("growth curve has {} usable bins, need 20", pts.len())));
    }
    let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let n = y.len() as f64;
    let mut fits = Vec::new();
    for model in [GrowthModel::Polynomial, GrowthModel::Intermediate, GrowthModel::Exponential] {
        let x: Vec<f64> = pts
            .iter()
            .map(|p| match model {
                GrowthModel::Polynomial => p.0.ln(),
                GrowthModel::Intermediate => p.0.sqrt(),
                GrowthModel::Exponential => p.0,
            })
            .collect();
        let (a, b, r2, rss) = linear_fit(&x, &y);
        let aic = n * (rss / n).max(1e-300).ln() + 2.0 * 2.0;
        fits.push(ModelFit { model, intercept: a, coefficient: b, r2, aic });
    }
    let best = fits.iter().min_by(|a, b| a.aic.total_cmp(&b.aic)).map(|f| f.model).unwrap_or(GrowthModel::Polynomial);
    Ok(GrowthTypeReport { bins: pts.len(), fits, best })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(f: impl Fn(f64) -> f64) -> GrowthCurve {
        let s: Vec<f64> = (1..=200).map(|i| i as f64 * 0.5).collect();
        let area = s.iter().map(|&x| f(x)).collect();
        GrowthCurve { s, area, s_valid: f64::INFINITY, s_onset: 0.0, unreachable: 0 }
    }

    #[test]
    fn cubic_is_polynomial_of_degree_three() {
        let r = growth_type_fit(&synthetic(|s| s.powi(3))).unwrap();
        assert_eq!(r.best, GrowthModel::Polynomial);
        assert!((r.fit(GrowthModel::Polynomial).coefficient - 3.0).abs() < 0.2);
    }

    #[test]
    fn root_exponential_is_intermediate() {
        let r = growth_type_fit(&synthetic(|s| (2.0 * s.sqrt()).exp())).unwrap();
        assert_eq!(r.best, GrowthModel::Intermediate);
        assert!((r.fit(GrowthModel::Intermediate).coefficient - 2.0).abs() < 1e-9);
    }

    #[test]
    fn exponential_is_exponential() {
        let r = growth_type_fit(&synthetic(|s| (0.3 * s).exp())).unwrap();
        assert_eq!(r.best, GrowthModel::Exponential);
    }

    #[test]
    fn too_few_bins_is_an_error() {
        let c = GrowthCurve { s: vec![1.0, 2.0], area: vec![1.0, 4.0], s_valid: 9.0, s_onset: 0.0, unreachable: 0 };
        assert!(growth_type_fit(&c).is_err());
    }

    #[test]
    fn small_balls_are_flat_disks() {
        use crate::analysis::mesh::{build_m0, MeshConfig};
        let spec = crate::quotient::PlugSpec::generic(0.0).unwrap();
        let cfg = MeshConfig { t_max: 5.0, max_strands: 100, ..Default::default() };
        let m = build_m0(&spec, &cfg).unwrap();
        let c = growth_function(&m, 1.0, 0.05);
        for target in [0.5, 0.6, 0.8] {
            let i = c.s.iter().position(|s| (s - target).abs() < 1e-9).unwrap();
            let disk = std::f64::consts::PI * target * target;
            assert!((c.area[i] / disk - 1.0).abs() < 0.1, "s {target}: {} vs {disk}", c.area[i]);
        }
        for w in c.area.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }
}
