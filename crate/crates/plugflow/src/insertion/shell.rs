//! The entry and top faces cut by a shell `{r = const}`.
//!
//! A Wilson orbit never leaves its shell, so face crossings reduce to
//! intersecting the orbit with one curve per face on that shell.

use crate::geom::{angle_diff, CylPoint};
use crate::insertion::InsertionSpec;
use crate::wilson::ode::{Shell, Step};
use crate::wilson::{flow_for, Tolerances, WilsonProfile};

const VERTICES: usize = 17;

/// A connected arc of a face curve, as a polyline in `(angle offset, z)`.
#[derive(Debug, Clone)]
pub struct ShellPiece {
    pub u_lo: f64,
    pub u_hi: f64,
    pub u: Vec<f64>,
    pub pts: Vec<[f64; 2]>,
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

/// Face curve(s) of one insertion on one shell. Angles are offsets from `image_center`.
#[derive(Debug, Clone)]
pub struct ShellFace {
    pub index: usize,
    pub top: bool,
    pub r: f64,
    pub pieces: Vec<ShellPiece>,
}

impl ShellFace {
    pub fn new(spec: &InsertionSpec, w: &WilsonProfile, r: f64, top: bool) -> Self {
        let mut pieces = Vec::new();
        for (a, b) in spec.shell_intervals(r) {
            let mut u = Vec::with_capacity(VERTICES);
            let mut pts = Vec::with_capacity(VERTICES);
            for j in 0..VERTICES {
                let uj = a + (b - a) * j as f64 / (VERTICES - 1) as f64;
                if let Some(p) = face_point(spec, w, r, uj, top) {
                    u.push(uj);
                    pts.push(p);
                }
            }
            if pts.len() < 2 {
                continue;
            }
            let mut lo = [f64::INFINITY; 2];
            let mut hi = [f64::NEG_INFINITY; 2];
            for p in &pts {
                for c in 0..2 {
                    lo[c] = lo[c].min(p[c]);
                    hi[c] = hi[c].max(p[c]);
                }
            }
            pieces.push(ShellPiece {
                u_lo: a,
                u_hi: b,
                u,
                pts,
                lo,
                hi,
            });
        }
        ShellFace {
            index: spec.index,
            top,
            r,
            pieces,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    /// Earliest crossing of the orbit piece `[t_a, t_b]` of `step` with this face.
    /// Returns `(t, u)`.
    pub fn crossing(
        &self,
        spec: &InsertionSpec,
        w: &WilsonProfile,
        step: &Step,
        t_a: f64,
        t_b: f64,
    ) -> Option<(f64, f64)> {
        if self.pieces.is_empty() {
            return None;
        }
        let ya = step.eval(t_a);
        let yb = step.eval(t_b);
        let aa = angle_diff(ya[0], spec.image_center);
        let ab = angle_diff(yb[0], spec.image_center);
        let pad = 0.05;
        let (zlo, zhi) = (ya[1].min(yb[1]) - pad, ya[1].max(yb[1]) + pad);
        let (alo, ahi) = (aa.min(ab) - pad, aa.max(ab) + pad);
        if (aa - ab).abs() > 1.0 {
            // Straddles the cut opposite to the image center; no face there.
            return None;
        }
        let dir = (t_b - t_a).signum();
        let mut best: Option<(f64, f64)> = None;
        for piece in &self.pieces {
            if piece.hi[1] < zlo || piece.lo[1] > zhi || piece.hi[0] < alo || piece.lo[0] > ahi {
                continue;
            }
            const SUB: usize = 8;
            let mut prev = [aa, ya[1]];
            let mut prev_t = t_a;
            for s in 1..=SUB {
                let t = t_a + (t_b - t_a) * s as f64 / SUB as f64;
                let y = step.eval(t);
                let cur = [angle_diff(y[0], spec.image_center), y[1]];
                for k in 0..piece.pts.len() - 1 {
                    if let Some((ls, lf)) = seg_intersect(prev, cur, piece.pts[k], piece.pts[k + 1])
                    {
                        let t0 = prev_t + (t - prev_t) * ls;
                        let u0 = piece.u[k] + (piece.u[k + 1] - piece.u[k]) * lf;
                        if let Some((tc, uc)) = self.refine(spec, w, step, t0, u0, piece) {
                            let lo = t_a.min(t_b) - 1e-12;
                            let hi = t_a.max(t_b) + 1e-12;
                            if tc >= lo && tc <= hi {
                                let better = match best {
                                    None => true,
                                    Some((bt, _)) => (tc - bt) * dir < 0.0,
                                };
                                if better {
                                    best = Some((tc, uc));
                                }
                            }
                        }
                    }
                }
                prev = cur;
                prev_t = t;
            }
        }
        best
    }

    /// Newton in `(t, u)` on `orbit(t) = face(u)`.
    fn refine(
        &self,
        spec: &InsertionSpec,
        w: &WilsonProfile,
        step: &Step,
        mut t: f64,
        mut u: f64,
        piece: &ShellPiece,
    ) -> Option<(f64, f64)> {
        let shell = Shell::new(w, self.r);
        let du = 1e-7;
        let edge = 1e-9;
        for _ in 0..40 {
            let y = step.eval(t);
            let fp = face_point(spec, w, self.r, u, self.top)?;
            let e = [angle_diff(y[0], spec.image_center) - fp[0], y[1] - fp[1]];
            if (self.r * e[0]).abs() + e[1].abs() < 1e-13 {
                return (u >= piece.u_lo - edge && u <= piece.u_hi + edge).then_some((t, u));
            }
            let v = shell.rhs(y[1]);
            let (ua, ub) = if u + du <= piece.u_hi {
                (u, u + du)
            } else {
                (u - du, u)
            };
            let pa = face_point(spec, w, self.r, ua, self.top)?;
            let pb = face_point(spec, w, self.r, ub, self.top)?;
            let d = [(pb[0] - pa[0]) / du, (pb[1] - pa[1]) / du];
            // Solve [v, -d] [dt, du]^T = -e.
            let det = v[0] * (-d[1]) - (-d[0]) * v[1];
            if det.abs() < 1e-300 {
                return None;
            }
            let dt = (-e[0] * (-d[1]) - (-d[0]) * (-e[1])) / det;
            let duu = (v[0] * (-e[1]) - v[1] * (-e[0])) / det;
            t += dt;
            u = (u + duu).clamp(piece.u_lo - 1e-6, piece.u_hi + 1e-6);
        }
        None
    }
}

/// `(angle offset, z)` of the face point at offset `u` on shell `r`.
pub fn face_point(
    spec: &InsertionSpec,
    w: &WilsonProfile,
    r: f64,
    u: f64,
    top: bool,
) -> Option<[f64; 2]> {
    let (_, a, z) = spec.shell_point(r, u)?;
    if !top {
        return Some([a, z]);
    }
    let p = CylPoint::new(r, spec.image_center + a, z);
    let q = flow_for(w, p, spec.s_tube, Tolerances::tight()).ok()?;
    Some([a + angle_diff(q.theta, p.theta), q.z])
}

/// Intersection parameters of segments `p0p1` and `q0q1`, both in `[0, 1]`.
fn seg_intersect(p0: [f64; 2], p1: [f64; 2], q0: [f64; 2], q1: [f64; 2]) -> Option<(f64, f64)> {
    let r = [p1[0] - p0[0], p1[1] - p0[1]];
    let s = [q1[0] - q0[0], q1[1] - q0[1]];
    let den = r[0] * s[1] - r[1] * s[0];
    if den.abs() < 1e-300 {
        return None;
    }
    let qp = [q0[0] - p0[0], q0[1] - p0[1]];
    let a = (qp[0] * s[1] - qp[1] * s[0]) / den;
    let b = (qp[0] * r[1] - qp[1] * r[0]) / den;
    let tol = 1e-9;
    (a >= -tol && a <= 1.0 + tol && b >= -tol && b <= 1.0 + tol).then_some((a, b))
}
