//! The invariant surface swept by the notched Reeb cylinder, as a flowed mesh.
//!
//! Level 0 is a static grid on `{r = 2, |z| <= 1}` minus the tube interiors.
//! Each notch contributes the forward flow of its entry-side boundary curve,
//! sampled as strands at equal times and refined where neighbours separate.

use crate::error::Result;
use crate::geom::CylPoint;
use crate::quotient::flow::{run_half, End, Observer, StepView, TransitionEvent};
use crate::quotient::{Budgets, PlugSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshConfig {
    /// Target edge length on the flat metric.
    pub resolution: f64,
    /// Flow time of the propeller strands.
    pub t_max: f64,
    pub max_events: usize,
    /// Initial strands per notch curve.
    pub initial_strands: usize,
    pub max_strands: usize,
    /// Smallest parameter gap refined, relative to the notch curve length.
    pub min_gap: f64,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig {
            resolution: 0.1,
            t_max: 70.0,
            max_events: 2000,
            initial_strands: 24,
            max_strands: 8000,
            min_gap: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshNode {
    pub p: CylPoint,
    pub level: i32,
    pub t: f64,
    /// `None` on the level-0 grid.
    pub strand: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Strand {
    /// Insertion index, 1 or 2.
    pub insertion: usize,
    pub u: f64,
    /// Radius after the first entry.
    pub r_entry: f64,
    pub end: End,
    /// Node index range `[first, first + len)`.
    pub first: usize,
    pub len: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropellerMesh {
    pub nodes: Vec<MeshNode>,
    pub edges: Vec<(u32, u32, f64)>,
    /// Quad corners and flat area.
    pub cells: Vec<([u32; 4], f64)>,
    pub basepoint: usize,
    pub strands: Vec<Strand>,
    /// Level-0 grid points dropped inside a tube.
    pub notch_removed: usize,
    /// Nodes beyond which the surface was not computed.
    pub frontier: Vec<u32>,
    pub epsilon: f64,
    pub config: MeshConfig,
    /// Largest mismatch between a level change and the events between two samples.
    pub level_jump_defect: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub max_level: i32,
    pub min_level: i32,
    /// Connected components of the level-1 part, gluing strands across deeper excursions.
    pub level1_components: usize,
    pub min_radius: f64,
    pub level0_radius_defect: f64,
    /// Entry radii move monotonically to 2 towards the special strand, and the
    /// radial extent of the live level-1 strands never grows.
    pub level1_monotone: bool,
}

#[derive(Default)]
struct StrandRecorder {
    dt: f64,
    next: usize,
    events: u32,
    closed: bool,
    pts: Vec<(CylPoint, i32, u32)>,
}

impl Observer for StrandRecorder {
    fn on_step(&mut self, v: &StepView) {
        loop {
            let t = self.next as f64 * self.dt;
            if t > v.t_b + 1e-12 {
                break;
            }
            if t >= v.t_a - 1e-12 {
                self.pts.push((v.point(t.min(v.t_b)), v.level, self.events));
            }
            self.next += 1;
        }
    }

    fn on_event(&mut self, _e: &TransitionEvent, level: i32) {
        self.events += 1;
        if level == 0 {
            self.closed = true;
        }
    }

    fn stop(&self) -> bool {
        self.closed
    }
}

struct RawStrand {
    insertion: usize,
    u: f64,
    r_entry: f64,
    end: End,
    pts: Vec<(CylPoint, i32, u32)>,
    start: CylPoint,
    close: Option<CylPoint>,
}

/// Entry-side notch curve of insertion `k` on `{r = 2}`: the parameter range with `|z| <= 1`.
fn notch_range(spec: &PlugSpec, k: usize) -> Option<(f64, f64)> {
    let s = &spec.insertions[k];
    let z = |u: f64| s.shell_point(2.0, u).map(|(_, _, z)| z);
    let mut best: Option<(f64, f64)> = None;
    for (a, b) in s.shell_intervals(2.0) {
        let (za, zb) = (z(a)?, z(b)?);
        // The face is a straight segment on the shell, so z is affine in u.
        let at = |target: f64| a + (b - a) * (target - za) / (zb - za);
        let (mut lo, mut hi) = (a, b);
        for target in [-1.0, 1.0] {
            let u = at(target);
            if u > lo && u < hi {
                let inside_left = (z(0.5 * (lo + u))?.abs()) <= 1.0;
                if inside_left {
                    hi = u;
                } else {
                    lo = u;
                }
            }
        }
        if z(0.5 * (lo + hi))?.abs() <= 1.0 && hi > lo && best.is_none_or(|(x, y)| hi - lo > y - x) {
            best = Some((lo, hi));
        }
    }
    best
}

fn run_strand(spec: &PlugSpec, k: usize, u: f64, dt: f64) -> Result<RawStrand> {
    let s = &spec.insertions[k];
    let (rp, a, z) = s.shell_point(2.0, u).ok_or_else(|| {
        crate::error::Error::Precondition(format!("notch curve of insertion {} undefined at {u}", s.index))
    })?;
    let start = CylPoint::new(2.0, s.image_center + a, z);
    let mut rec = StrandRecorder { dt, ..Default::default() };
    let h = run_half(spec, start, 1.0, &mut rec)?;
    let close = rec.closed.then_some(h.last);
    Ok(RawStrand { insertion: s.index, u, r_entry: rp, end: h.end, pts: rec.pts, start, close })
}

fn chord(a: &CylPoint, b: &CylPoint) -> f64 {
    let (x, y) = (a.cartesian(), b.cartesian());
    ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) + (x[2] - y[2]).powi(2)).sqrt()
}

fn quad_area(p: [&CylPoint; 4]) -> f64 {
    let c: Vec<[f64; 3]> = p.iter().map(|q| q.cartesian()).collect();
    let d1 = [c[2][0] - c[0][0], c[2][1] - c[0][1], c[2][2] - c[0][2]];
    let d2 = [c[3][0] - c[1][0], c[3][1] - c[1][1], c[3][2] - c[1][2]];
    let x = [d1[1] * d2[2] - d1[2] * d2[1], d1[2] * d2[0] - d1[0] * d2[2], d1[0] * d2[1] - d1[1] * d2[0]];
    0.5 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

/// First sample index where two neighbouring strands stop bounding a mesh cell.
fn separation(a: &RawStrand, b: &RawStrand, max_edge: f64) -> Option<usize> {
    let n = a.pts.len().min(b.pts.len());
    (0..n).find(|&i| a.pts[i].1 != b.pts[i].1 || chord(&a.pts[i].0, &b.pts[i].0) > max_edge)
}

pub fn build_m0(spec: &PlugSpec, cfg: &MeshConfig) -> Result<PropellerMesh> {
    let h = cfg.resolution;
    let dt = 0.5 * h; // the plateau speed on r = 2 is 2
    let mut run_spec = spec.clone();
    run_spec.budgets = Budgets { t_max: cfg.t_max, max_events: cfg.max_events };

    // Level-0 grid.
    let nth = ((TAU * 2.0 / h).round() as usize).max(8);
    let nz = (((2.0 / h).round() as usize) / 2) * 2 + 1;
    let (dth, dz) = (TAU / nth as f64, 2.0 / (nz - 1) as f64);
    let grid_pts: Vec<(usize, usize, CylPoint)> = (0..nth)
        .flat_map(|j| (0..nz).map(move |i| (j, i, CylPoint::new(2.0, j as f64 * dth, -1.0 + i as f64 * dz))))
        .collect();
    let keep: Vec<bool> = grid_pts.par_iter().map(|(_, _, p)| spec.in_tube(p).is_none()).collect();
    let mut nodes: Vec<MeshNode> = Vec::new();
    let mut grid_index = vec![u32::MAX; nth * nz];
    for ((j, i, p), k) in grid_pts.iter().zip(&keep) {
        if *k {
            grid_index[j * nz + i] = nodes.len() as u32;
            nodes.push(MeshNode { p: *p, level: 0, t: 0.0, strand: None });
        }
    }
    let notch_removed = grid_pts.len() - nodes.len();
    let gid = |j: i64, i: i64| -> Option<u32> {
        if i < 0 || i >= nz as i64 {
            return None;
        }
        let j = j.rem_euclid(nth as i64) as usize;
        let v = grid_index[j * nz + i as usize];
        (v != u32::MAX).then_some(v)
    };
    let mut edges: Vec<(u32, u32, f64)> = Vec::new();
    let mut cells: Vec<([u32; 4], f64)> = Vec::new();
    let steps: [(i64, i64); 8] = [(1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (1, 2), (2, -1), (1, -2)];
    for j in 0..nth as i64 {
        for i in 0..nz as i64 {
            let Some(a) = gid(j, i) else { continue };
            for (dj, di) in steps {
                if let Some(b) = gid(j + dj, i + di) {
                    let d = (2.0 * dth * dj as f64).hypot(dz * di as f64);
                    edges.push((a, b, d));
                }
            }
            if let (Some(b), Some(c), Some(d)) = (gid(j + 1, i), gid(j + 1, i + 1), gid(j, i + 1)) {
                cells.push(([a, b, c, d], 2.0 * dth * dz));
            }
        }
    }
    let basepoint = gid((PI / dth).round() as i64, (nz / 2) as i64)
        .ok_or_else(|| crate::error::Error::Precondition("basepoint (2, pi, 0) lies in a tube".into()))?
        as usize;

    // Strands, refined by bisection of the notch parameter.
    let mut families: Vec<Vec<RawStrand>> = Vec::new();
    for k in 0..spec.insertions.len() {
        let Some((lo, hi)) = notch_range(spec, k) else { continue };
        let n0 = cfg.initial_strands.max(2);
        let us: Vec<f64> = (0..n0).map(|j| lo + (hi - lo) * j as f64 / (n0 - 1) as f64).collect();
        let fam = us.par_iter().map(|&u| run_strand(&run_spec, k, u, dt)).collect::<Result<Vec<_>>>()?;
        families.push(fam);
    }
    let max_edge = 2.0 * h;
    let total = |f: &[Vec<RawStrand>]| f.iter().map(Vec::len).sum::<usize>();
    loop {
        // (first split index, family, midpoint), earliest splits first.
        let mut want: Vec<(usize, usize, f64)> = Vec::new();
        for (fi, fam) in families.iter().enumerate() {
            let span = fam.last().map_or(0.0, |s| s.u) - fam.first().map_or(0.0, |s| s.u);
            for w in fam.windows(2) {
                if (w[1].u - w[0].u).abs() <= cfg.min_gap * span.abs() {
                    continue;
                }
                if let Some(k) = separation(&w[0], &w[1], max_edge) {
                    // A cut by a face only needs locating to within the resolution.
                    let cut = w[0].pts[k].1 != w[1].pts[k].1;
                    if cut && k > 0 && chord(&w[0].pts[k - 1].0, &w[1].pts[k - 1].0) <= 0.5 * h {
                        continue;
                    }
                    want.push((k, fi, 0.5 * (w[0].u + w[1].u)));
                }
            }
        }
        want.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.total_cmp(&b.2)));
        let room = cfg.max_strands.saturating_sub(total(&families));
        want.truncate(room);
        if want.is_empty() {
            break;
        }
        let new = want
            .par_iter()
            .map(|&(_, fi, u)| {
                let k = spec.insertions.iter().position(|s| s.index == families[fi][0].insertion).unwrap_or(0);
                run_strand(&run_spec, k, u, dt).map(|s| (fi, s))
            })
            .collect::<Result<Vec<_>>>()?;
        for (fi, s) in new {
            families[fi].push(s);
        }
        for fam in &mut families {
            fam.sort_by(|a, b| a.u.total_cmp(&b.u));
        }
    }

    let grid_nodes: Vec<CylPoint> = nodes.iter().map(|n| n.p).collect();
    let nearest_grid = |p: &CylPoint| -> Option<(u32, f64)> {
        let j0 = (p.theta.rem_euclid(TAU) / dth).round() as i64;
        let i0 = ((p.z + 1.0) / dz).round() as i64;
        let mut best: Option<(u32, f64)> = None;
        for dj in -3..=3 {
            for di in -3..=3 {
                if let Some(v) = gid(j0 + dj, i0 + di) {
                    let d = chord(p, &grid_nodes[v as usize]);
                    if best.is_none_or(|(_, e)| d < e) {
                        best = Some((v, d));
                    }
                }
            }
        }
        best
    };

    let mut strands = Vec::new();
    let mut frontier = Vec::new();
    let mut level_jump_defect = 0;
    let mut joins = Vec::new();
    for fam in &families {
        let mut firsts = Vec::with_capacity(fam.len());
        for s in fam {
            let first = nodes.len();
            let id = strands.len() as u32;
            for (n, (p, level, _)) in s.pts.iter().enumerate() {
                nodes.push(MeshNode { p: *p, level: *level, t: n as f64 * dt, strand: Some(id) });
            }
            for n in 1..s.pts.len() {
                let (a, b) = (&s.pts[n - 1], &s.pts[n]);
                let (va, vb) = (spec.wilson.wilson_field(&a.0)?, spec.wilson.wilson_field(&b.0)?);
                let speed = |v: [f64; 3], p: &CylPoint| (v[2]).hypot(p.r * v[1]).hypot(v[0]);
                let w = 0.5 * dt * (speed(va, &a.0) + speed(vb, &b.0));
                edges.push(((first + n - 1) as u32, (first + n) as u32, w));
                if b.2 == a.2 {
                    level_jump_defect = level_jump_defect.max((b.1 - a.1).abs());
                } else if b.2 == a.2 + 1 {
                    level_jump_defect = level_jump_defect.max(((b.1 - a.1).abs() - 1).abs());
                }
            }
            if let (Some(g), true) = (nearest_grid(&s.start), !s.pts.is_empty()) {
                joins.push((g.0, first as u32, g.1));
            }
            if let (Some(c), true) = (s.close, !s.pts.is_empty()) {
                if let Some(g) = nearest_grid(&c) {
                    joins.push((g.0, (first + s.pts.len() - 1) as u32, g.1));
                }
            }
            if s.end.budget() && !s.pts.is_empty() {
                frontier.push((first + s.pts.len() - 1) as u32);
            }
            firsts.push(first);
            strands.push(Strand {
                insertion: s.insertion,
                u: s.u,
                r_entry: s.r_entry,
                end: s.end,
                first,
                len: s.pts.len(),
            });
        }
        for (w, f) in fam.windows(2).zip(firsts.windows(2)) {
            let (a, b) = (&w[0], &w[1]);
            let n = a.pts.len().min(b.pts.len());
            let stop = separation(a, b, max_edge).unwrap_or(n);
            for i in 0..stop {
                let (ia, ib) = ((f[0] + i) as u32, (f[1] + i) as u32);
                edges.push((ia, ib, chord(&a.pts[i].0, &b.pts[i].0)));
                if i + 1 < stop {
                    edges.push((ia, ib + 1, chord(&a.pts[i].0, &b.pts[i + 1].0)));
                    // Cells that straddle a jump have no flat shape.
                    let same = a.pts[i].2 == a.pts[i + 1].2 && b.pts[i].2 == b.pts[i + 1].2;
                    if same {
                        let q = [&a.pts[i].0, &b.pts[i].0, &b.pts[i + 1].0, &a.pts[i + 1].0];
                        cells.push(([ia, ib, ib + 1, ia + 1], quad_area(q)));
                    }
                }
            }
            // A split that was not resolved leaves the surface in between unknown.
            let located = |k: usize| k > 0 && chord(&a.pts[k - 1].0, &b.pts[k - 1].0) <= 0.5 * h;
            if stop < n && (a.pts[stop].1 == b.pts[stop].1 || !located(stop)) {
                frontier.push((f[0] + stop) as u32);
                frontier.push((f[1] + stop) as u32);
            }
        }
    }
    edges.extend(joins);

    Ok(PropellerMesh {
        nodes,
        edges,
        cells,
        basepoint,
        strands,
        notch_removed,
        frontier,
        epsilon: spec.epsilon(),
        config: *cfg,
        level_jump_defect,
    })
}

struct Dsu(Vec<u32>);

impl Dsu {
    fn find(&mut self, x: u32) -> u32 {
        let mut r = x;
        while self.0[r as usize] != r {
            r = self.0[r as usize];
        }
        let mut y = x;
        while self.0[y as usize] != r {
            let next = self.0[y as usize];
            self.0[y as usize] = r;
            y = next;
        }
        r
    }
    fn union(&mut self, a: u32, b: u32) {
        let (x, y) = (self.find(a), self.find(b));
        if x != y {
            self.0[x.max(y) as usize] = x.min(y);
        }
    }
}

impl PropellerMesh {
    pub fn levels(&self) -> LevelSummary {
        let mut dsu = Dsu((0..self.nodes.len() as u32).collect());
        for &(a, b, _) in &self.edges {
            if self.nodes[a as usize].level == 1 && self.nodes[b as usize].level == 1 {
                dsu.union(a, b);
            }
        }
        // Deeper excursions close up on the facing side of their notch.
        for s in &self.strands {
            let mut last: Option<u32> = None;
            for n in s.first..s.first + s.len {
                match self.nodes[n].level {
                    1 => {
                        if let Some(l) = last {
                            dsu.union(l, n as u32);
                        }
                        last = Some(n as u32);
                    }
                    l if l < 1 => last = None,
                    _ => {}
                }
            }
        }
        let mut roots: Vec<u32> = (0..self.nodes.len())
            .filter(|&n| self.nodes[n].level == 1)
            .map(|n| dsu.find(n as u32))
            .collect();
        roots.sort_unstable();
        roots.dedup();

        let mut monotone = true;
        for ins in [1, 2] {
            let fam: Vec<&Strand> = self.strands.iter().filter(|s| s.insertion == ins).collect();
            if fam.is_empty() {
                continue;
            }
            let special = fam.iter().enumerate().min_by(|a, b| a.1.r_entry.total_cmp(&b.1.r_entry)).map_or(0, |x| x.0);
            for w in fam[..=special].windows(2) {
                monotone &= w[1].r_entry <= w[0].r_entry + 1e-12;
            }
            for w in fam[special..].windows(2) {
                monotone &= w[1].r_entry >= w[0].r_entry - 1e-12;
            }
            let horizon = fam.iter().map(|s| s.len).max().unwrap_or(0);
            let mut prev = f64::INFINITY;
            for k in 0..horizon {
                let extent = fam.iter().filter(|s| s.len > k).map(|s| (s.r_entry - 2.0).abs()).fold(0.0, f64::max);
                monotone &= extent <= prev + 1e-12;
                prev = extent;
            }
        }

        LevelSummary {
            max_level: self.nodes.iter().map(|n| n.level).max().unwrap_or(0),
            min_level: self.nodes.iter().map(|n| n.level).min().unwrap_or(0),
            level1_components: roots.len(),
            min_radius: self.nodes.iter().map(|n| n.p.r).fold(f64::INFINITY, f64::min),
            level0_radius_defect: self.nodes.iter().filter(|n| n.level == 0).map(|n| (n.p.r - 2.0).abs()).fold(0.0, f64::max),
            level1_monotone: monotone,
        }
    }

    /// Total flat area of the cells.
    pub fn area(&self) -> f64 {
        self.cells.iter().map(|c| c.1).sum()
    }

    /// Samples with level labels and the weighted edges as one JSON object.
    pub fn write_json<W: Write>(&self, w: &mut W, config_hash: &str) -> std::io::Result<()> {
        #[derive(Serialize)]
        struct Export<'a> {
            config_hash: &'a str,
            epsilon: f64,
            basepoint: usize,
            config: &'a MeshConfig,
            nodes: &'a [MeshNode],
            edges: &'a [(u32, u32, f64)],
            frontier: &'a [u32],
        }
        let e = Export {
            config_hash,
            epsilon: self.epsilon,
            basepoint: self.basepoint,
            config: &self.config,
            nodes: &self.nodes,
            edges: &self.edges,
            frontier: &self.frontier,
        };
        serde_json::to_writer(&mut *w, &e)?;
        writeln!(w)
    }

    /// Nodes as CSV: `index, r, theta, z, level, t, strand`.
    pub fn write_nodes_csv<W: Write>(&self, w: &mut W, header: &str) -> std::io::Result<()> {
        writeln!(w, "{header}")?;
        writeln!(w, "index,r,theta,z,level,t,strand")?;
        for (i, n) in self.nodes.iter().enumerate() {
            let s = n.strand.map_or(-1, |s| s as i64);
            writeln!(w, "{i},{:.12},{:.12},{:.12},{},{:.6},{s}", n.p.r, n.p.theta, n.p.z, n.level, n.t)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> MeshConfig {
        MeshConfig { resolution: 0.1, t_max: 60.0, initial_strands: 12, max_strands: 300, ..Default::default() }
    }

    #[test]
    fn level_zero_is_the_notched_cylinder() {
        let spec = PlugSpec::generic(0.0).unwrap();
        let m = build_m0(&spec, &small()).unwrap();
        assert!(m.notch_removed > 0);
        for n in m.nodes.iter().filter(|n| n.strand.is_none()) {
            assert_eq!(n.level, 0);
            assert_eq!(n.p.r, 2.0);
            assert!(n.p.z.abs() <= 1.0 + 1e-12);
        }
        let b = m.nodes[m.basepoint].p;
        assert!((b.theta - PI).abs() < 0.1 && b.z.abs() < 1e-12);
    }

    #[test]
    fn levels_are_nonnegative_and_jump_by_one() {
        let spec = PlugSpec::generic(0.0).unwrap();
        let m = build_m0(&spec, &small()).unwrap();
        let l = m.levels();
        assert!(l.min_level >= 0);
        assert!(l.max_level >= 2, "{l:?}");
        assert_eq!(m.level_jump_defect, 0);
        assert!(l.min_radius >= 2.0 - 1e-9, "{l:?}");
        assert_eq!(l.level1_components, 2, "{l:?}");
        assert!(l.level1_monotone);
    }
}
