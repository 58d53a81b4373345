//! Event-driven orbits of the inserted plug.

use crate::error::{Error, Result};
use crate::geom::{angle_diff, reduce_angle, CylPoint, Z_MAX};
use crate::insertion::ShellFace;
use crate::quotient::PlugSpec;
use crate::wilson::ode::{locate_height, Shell, Step, Stepper};
use crate::wilson::WilsonProfile;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::TAU;
use std::io::Write;

/// Crossings closer than this are reported instead of ordered.
const TIE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    PrimaryEntry,
    PrimaryExit,
    /// Insertion index 1 or 2.
    SecondaryEntry(usize),
    SecondaryExit(usize),
}

impl EventKind {
    pub fn delta(&self) -> i32 {
        match self {
            EventKind::SecondaryEntry(_) => 1,
            EventKind::SecondaryExit(_) => -1,
            _ => 0,
        }
    }
}

/// A transition, always described in forward time: `pre` is the point before the jump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionEvent {
    pub kind: EventKind,
    pub t: f64,
    pub pre: CylPoint,
    pub post: CylPoint,
    pub delta: i32,
}

impl TransitionEvent {
    fn new(kind: EventKind, t: f64, pre: CylPoint, post: CylPoint) -> Self {
        TransitionEvent {
            kind,
            t,
            pre,
            post,
            delta: kind.delta(),
        }
    }

    /// `r' - (r - eps)` for a secondary entry.
    pub fn radius_margin(&self, epsilon: f64) -> Option<f64> {
        match self.kind {
            EventKind::SecondaryEntry(_) => Some(self.post.r - (self.pre.r - epsilon)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
    Both,
}

/// How one direction of an orbit ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "end")]
pub enum End {
    /// Primary exit (forward) or primary entry (backward).
    Exited {
        t: f64,
    },
    TimeBudget {
        t: f64,
    },
    EventBudget {
        t: f64,
    },
    /// Stopped by the observer.
    Stopped {
        t: f64,
    },
    NotRun,
}

impl End {
    pub fn exited(&self) -> bool {
        matches!(self, End::Exited { .. })
    }

    pub fn budget(&self) -> bool {
        matches!(self, End::TimeBudget { .. } | End::EventBudget { .. })
    }
}

/// The part `[t_a, t_b]` of an accepted step that the orbit actually followed.
pub struct StepView<'a> {
    pub step: &'a Step,
    pub r: f64,
    pub level: i32,
    pub t_a: f64,
    pub t_b: f64,
}

impl StepView<'_> {
    pub fn point(&self, t: f64) -> CylPoint {
        let y = self.step.eval(t);
        CylPoint::new(self.r, y[0], y[1])
    }
}

pub trait Observer {
    fn on_step(&mut self, _view: &StepView) {}
    /// `level` is the level after the event in the direction of integration.
    fn on_event(&mut self, _event: &TransitionEvent, _level: i32) {}
    fn stop(&self) -> bool {
        false
    }
}

impl Observer for () {}

impl<A: Observer, B: Observer> Observer for (A, B) {
    fn on_step(&mut self, v: &StepView) {
        self.0.on_step(v);
        self.1.on_step(v);
    }
    fn on_event(&mut self, e: &TransitionEvent, level: i32) {
        self.0.on_event(e, level);
        self.1.on_event(e, level);
    }
    fn stop(&self) -> bool {
        self.0.stop() || self.1.stop()
    }
}

#[derive(Debug, Clone)]
pub struct HalfRun {
    pub end: End,
    /// In the order met, i.e. by decreasing time for a backward run.
    pub events: Vec<TransitionEvent>,
    pub last: CylPoint,
    pub level: i32,
    /// Largest distance between a numerically reached return and the point it must return to.
    pub max_return_defect: f64,
}

enum Hit {
    Face { k: usize, t: f64, u: f64 },
    Boundary { t: f64 },
}

fn point_at(step: &Step, r: f64, t: f64) -> CylPoint {
    let y = step.eval(t);
    CylPoint::new(r, y[0], y[1])
}

/// Flows one direction (`dir = 1` forward, `-1` backward) from `p` at time 0.
pub fn run_half<O: Observer>(
    spec: &PlugSpec,
    p: CylPoint,
    dir: f64,
    obs: &mut O,
) -> Result<HalfRun> {
    WilsonProfile::check_domain(p.r, p.z)?;
    let w = &spec.wilson;
    let b = spec.budgets;
    let eps = spec.epsilon();
    let forward = dir > 0.0;
    let mut p = p;
    let mut t = 0.0;
    let mut level = 0;
    let mut events: Vec<TransitionEvent> = Vec::new();
    // Glued points of the open excursions: `(insertion, r', theta')`. A finite
    // excursion entered at `(r', theta', -2)` leaves at `(r', theta', 2)`, so a
    // return is snapped to that point instead of accumulating integration error.
    let mut open: Vec<(usize, f64, f64)> = Vec::new();
    let mut defect: f64 = 0.0;

    let record =
        |ev: TransitionEvent, level: &mut i32, events: &mut Vec<TransitionEvent>, obs: &mut O| {
            *level += if forward { ev.delta } else { -ev.delta };
            obs.on_event(&ev, *level);
            events.push(ev);
        };

    // A start on a face is already at the jump.
    if let Some((k, rp, tp)) = spec.face_preimage(&p, !forward) {
        let s = &spec.insertions[k];
        if forward {
            let post = CylPoint::new(rp, tp, -Z_MAX);
            record(
                TransitionEvent::new(EventKind::SecondaryEntry(s.index), 0.0, p, post),
                &mut level,
                &mut events,
                obs,
            );
            p = post;
        } else {
            let pre = CylPoint::new(rp, tp, Z_MAX);
            record(
                TransitionEvent::new(EventKind::SecondaryExit(s.index), 0.0, pre, p),
                &mut level,
                &mut events,
                obs,
            );
            p = pre;
        }
        open.push((k, rp, tp));
    }

    loop {
        // Horizontal boundary in the direction of motion.
        if p.z * dir >= Z_MAX {
            let glued = match open.pop() {
                Some((k, rp, tp)) => {
                    defect = defect.max((p.r - rp).hypot(p.r * angle_diff(p.theta, tp)));
                    p = CylPoint::new(rp, tp, p.z);
                    Some(k)
                }
                None => spec.domain_of(p.r, p.theta),
            };
            match glued {
                Some(k) => {
                    let s = &spec.insertions[k];
                    if forward {
                        let q = s.sigma(w, p.r, p.theta, Z_MAX)?;
                        record(
                            TransitionEvent::new(EventKind::SecondaryExit(s.index), t, p, q),
                            &mut level,
                            &mut events,
                            obs,
                        );
                        p = q;
                    } else {
                        let q = s.sigma_bottom(p.r, p.theta)?;
                        record(
                            TransitionEvent::new(EventKind::SecondaryEntry(s.index), t, q, p),
                            &mut level,
                            &mut events,
                            obs,
                        );
                        p = q;
                    }
                }
                None => {
                    let kind = if forward {
                        EventKind::PrimaryExit
                    } else {
                        EventKind::PrimaryEntry
                    };
                    record(
                        TransitionEvent::new(kind, t, p, p),
                        &mut level,
                        &mut events,
                        obs,
                    );
                    return Ok(HalfRun {
                        end: End::Exited { t },
                        events,
                        last: p,
                        level,
                        max_return_defect: defect,
                    });
                }
            }
            if events.len() >= b.max_events {
                return Ok(HalfRun {
                    end: End::EventBudget { t },
                    events,
                    last: p,
                    level,
                    max_return_defect: defect,
                });
            }
            continue;
        }

        let faces: Vec<(usize, ShellFace)> = spec
            .insertions
            .iter()
            .enumerate()
            .map(|(k, s)| (k, ShellFace::new(s, w, p.r, !forward)))
            .filter(|(_, f)| !f.is_empty())
            .collect();
        let mut st = Stepper::new(Shell::new(w, p.r), t, p.theta, p.z, dir, spec.tol);
        let t_stop = dir * b.t_max;
        loop {
            if obs.stop() {
                return Ok(HalfRun {
                    end: End::Stopped { t: st.t },
                    events,
                    last: p,
                    level,
                    max_return_defect: defect,
                });
            }
            if (st.t - t_stop) * dir >= 0.0 {
                return Ok(HalfRun {
                    end: End::TimeBudget { t: st.t },
                    events,
                    last: p,
                    level,
                    max_return_defect: defect,
                });
            }
            let step = st.step(t_stop)?;
            let mut hit = None;
            if (step.y1[1] - dir * Z_MAX) * dir >= 0.0 {
                hit = Some(Hit::Boundary {
                    t: locate_height(&step, dir * Z_MAX, 1e-12),
                });
            }
            let t_end = match hit {
                Some(Hit::Boundary { t }) => t,
                _ => step.t1(),
            };
            for (k, face) in &faces {
                let s = &spec.insertions[*k];
                if let Some((tc, u)) = face.crossing(s, w, &step, step.t0, t_end) {
                    let earlier = match &hit {
                        None => true,
                        Some(Hit::Face { t, .. }) | Some(Hit::Boundary { t }) => {
                            if (tc - t).abs() < TIE {
                                return Err(Error::EventLocation {
                                    t0: step.t0,
                                    t1: step.t1(),
                                    msg: format!("simultaneous crossings at t = {tc}"),
                                });
                            }
                            (tc - t) * dir < 0.0
                        }
                    };
                    if earlier {
                        hit = Some(Hit::Face { k: *k, t: tc, u });
                    }
                }
            }
            let t_b = match &hit {
                Some(Hit::Face { t, .. }) | Some(Hit::Boundary { t }) => *t,
                None => step.t1(),
            };
            obs.on_step(&StepView {
                step: &step,
                r: p.r,
                level,
                t_a: step.t0,
                t_b,
            });
            match hit {
                None => {
                    p = point_at(&step, p.r, step.t1());
                }
                Some(Hit::Boundary { t: tb }) => {
                    let q = point_at(&step, p.r, tb);
                    p = CylPoint::new(q.r, q.theta, dir * Z_MAX);
                    t = tb;
                    break;
                }
                Some(Hit::Face { k, t: tc, u }) => {
                    let s = &spec.insertions[k];
                    let on_face = point_at(&step, p.r, tc);
                    let rp = s.shell_r_prime(p.r, u).ok_or(Error::OffFace {
                        index: s.index,
                        residual: f64::NAN,
                    })?;
                    let th = reduce_angle(s.center + u);
                    if forward {
                        let post = CylPoint::new(rp, th, -Z_MAX);
                        let ev = TransitionEvent::new(
                            EventKind::SecondaryEntry(s.index),
                            tc,
                            on_face,
                            post,
                        );
                        debug_assert!(ev.radius_margin(eps).unwrap() > -1e-9);
                        record(ev, &mut level, &mut events, obs);
                        p = post;
                        open.push((k, rp, th));
                    } else {
                        let pre = CylPoint::new(rp, th, Z_MAX);
                        record(
                            TransitionEvent::new(
                                EventKind::SecondaryExit(s.index),
                                tc,
                                pre,
                                on_face,
                            ),
                            &mut level,
                            &mut events,
                            obs,
                        );
                        p = pre;
                        open.push((k, rp, th));
                    }
                    t = tc;
                    if events.len() >= b.max_events {
                        return Ok(HalfRun {
                            end: End::EventBudget { t },
                            events,
                            last: p,
                            level,
                            max_return_defect: defect,
                        });
                    }
                    break;
                }
            }
        }
    }
}

/// A crossing of the section `{theta = section_angle}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionHit {
    pub t: f64,
    pub r: f64,
    pub z: f64,
    pub level: i32,
}

/// Records section crossings, refined on the dense output.
#[derive(Debug, Clone, Default)]
pub struct SectionRecorder {
    pub angle: f64,
    pub hits: Vec<SectionHit>,
}

impl SectionRecorder {
    pub fn new(angle: f64) -> Self {
        SectionRecorder {
            angle,
            hits: Vec::new(),
        }
    }
}

impl Observer for SectionRecorder {
    fn on_step(&mut self, v: &StepView) {
        let a = v.step.eval(v.t_a)[0];
        let b = v.step.eval(v.t_b)[0];
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        // Unreduced section copies inside [lo, hi].
        let mut k = ((lo - self.angle) / TAU).ceil();
        while self.angle + k * TAU <= hi {
            let target = self.angle + k * TAU;
            let (mut ta, mut tb) = (v.t_a, v.t_b);
            let mut fa = a - target;
            for _ in 0..60 {
                let tm = 0.5 * (ta + tb);
                let fm = v.step.eval(tm)[0] - target;
                if (fm < 0.0) == (fa < 0.0) {
                    ta = tm;
                    fa = fm;
                } else {
                    tb = tm;
                }
                if (tb - ta).abs() < 1e-14 {
                    break;
                }
            }
            let tm = 0.5 * (ta + tb);
            let y = v.step.eval(tm);
            if (a - target) * (b - target) < 0.0 || (b - target) == 0.0 {
                self.hits.push(SectionHit {
                    t: tm,
                    r: v.r,
                    z: y[1],
                    level: v.level,
                });
            }
            k += 1.0;
        }
    }
}

/// For each hit, the latest earlier hit on the same level closer than `tol` in `(r, z)`.
/// Returns `(earlier, later)` index pairs.
pub fn near_returns(hits: &[SectionHit], tol: f64) -> Vec<(usize, usize)> {
    let mut grid: HashMap<(i64, i64, i32), Vec<usize>> = HashMap::new();
    let key = |h: &SectionHit| {
        (
            (h.r / tol).floor() as i64,
            (h.z / tol).floor() as i64,
            h.level,
        )
    };
    let mut out = Vec::new();
    for (j, h) in hits.iter().enumerate() {
        let (a, b, l) = key(h);
        let mut best: Option<usize> = None;
        for da in -1..=1 {
            for db in -1..=1 {
                if let Some(list) = grid.get(&(a + da, b + db, l)) {
                    for &i in list.iter().rev() {
                        let o = &hits[i];
                        if (o.r - h.r).hypot(o.z - h.z) < tol {
                            best = Some(best.map_or(i, |x: usize| x.max(i)));
                            break;
                        }
                    }
                }
            }
        }
        if let Some(i) = best {
            out.push((i, j));
        }
        grid.entry((a, b, l)).or_default().push(j);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t: f64,
    pub r: f64,
    pub theta: f64,
    pub z: f64,
    pub level: i32,
}

#[derive(Default)]
struct PathRecorder {
    samples: Vec<TraceSample>,
}

impl PathRecorder {
    fn push(&mut self, t: f64, p: &CylPoint, level: i32) {
        self.samples.push(TraceSample {
            t,
            r: p.r,
            theta: p.theta,
            z: p.z,
            level,
        });
    }
}

impl Observer for PathRecorder {
    fn on_step(&mut self, v: &StepView) {
        if self.samples.is_empty() {
            self.push(v.t_a, &v.point(v.t_a), v.level);
        }
        self.push(v.t_b, &v.point(v.t_b), v.level);
    }

    fn on_event(&mut self, e: &TransitionEvent, level: i32) {
        // The orbit is at `pre` then `post` in forward time.
        let forward = self.samples.last().map_or(e.t >= 0.0, |s| e.t >= s.t);
        let (a, b) = if forward {
            (&e.pre, &e.post)
        } else {
            (&e.post, &e.pre)
        };
        let before = if forward {
            level - e.delta
        } else {
            level + e.delta
        };
        self.push(e.t, a, before);
        self.push(e.t, b, level);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitClass {
    Finite,
    ForwardTrapped,
    BackwardTrapped,
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub class: OrbitClass,
    /// Trapping is only ever observed up to the budget.
    pub within_budget: bool,
    /// Both directions were integrated.
    pub complete: bool,
    /// Infinite, with a return within the tolerance.
    pub candidate_nonwandering: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrbitTrace {
    pub start: CylPoint,
    /// Time-ordered path; `r` is the radius function and `level` the level function.
    pub samples: Vec<TraceSample>,
    /// Time-ordered.
    pub events: Vec<TransitionEvent>,
    pub section: Vec<SectionHit>,
    pub forward: End,
    pub backward: End,
    pub max_return_defect: f64,
}

impl OrbitTrace {
    pub fn write_csv<W: Write>(&self, mut w: W, header: &str) -> std::io::Result<()> {
        if !header.is_empty() {
            writeln!(w, "{header}")?;
        }
        writeln!(w, "t,r,theta,z,level")?;
        for s in &self.samples {
            writeln!(
                w,
                "{:.17e},{:.17e},{:.17e},{:.17e},{}",
                s.t, s.r, s.theta, s.z, s.level
            )?;
        }
        Ok(())
    }

    /// Level function at time `t`: entries minus exits on `[0, t]` (or minus that on `[t, 0]`).
    pub fn level_at(&self, t: f64) -> i32 {
        let mut n = 0;
        for e in &self.events {
            if t >= 0.0 && e.t >= 0.0 && e.t <= t {
                n += e.delta;
            } else if t < 0.0 && e.t < 0.0 && e.t > t {
                n -= e.delta;
            }
        }
        n
    }
}

/// Integrates `p` in the requested direction(s) within the spec budgets.
pub fn flow_orbit(spec: &PlugSpec, p: CylPoint, direction: Direction) -> Result<OrbitTrace> {
    let run = |dir: f64| -> Result<(HalfRun, Vec<TraceSample>, Vec<SectionHit>)> {
        let mut obs = (
            PathRecorder::default(),
            SectionRecorder::new(spec.section_angle),
        );
        let h = run_half(spec, p, dir, &mut obs)?;
        Ok((h, obs.0.samples, obs.1.hits))
    };
    let mut samples = Vec::new();
    let mut events = Vec::new();
    let mut section = Vec::new();
    let mut backward = End::NotRun;
    let mut forward = End::NotRun;
    let mut defect: f64 = 0.0;
    if direction != Direction::Forward {
        let (h, mut s, mut sec) = run(-1.0)?;
        s.reverse();
        sec.reverse();
        samples.extend(s);
        section.extend(sec);
        events.extend(h.events.iter().rev().copied());
        backward = h.end;
        defect = defect.max(h.max_return_defect);
    }
    if direction != Direction::Backward {
        let (h, s, sec) = run(1.0)?;
        let skip = usize::from(!samples.is_empty() && !s.is_empty());
        samples.extend(s.into_iter().skip(skip));
        section.extend(sec);
        events.extend(h.events);
        forward = h.end;
        defect = defect.max(h.max_return_defect);
    }
    if samples.is_empty() {
        samples.push(TraceSample {
            t: 0.0,
            r: p.r,
            theta: p.theta,
            z: p.z,
            level: 0,
        });
    }
    Ok(OrbitTrace {
        start: p,
        samples,
        events,
        section,
        forward,
        backward,
        max_return_defect: defect,
    })
}

/// Budget-qualified class; `return_tol` decides the non-wandering candidate flag.
pub fn classify_orbit(trace: &OrbitTrace, return_tol: f64) -> Classification {
    let fwd = trace.forward.budget() || matches!(trace.forward, End::Stopped { .. });
    let bwd = trace.backward.budget() || matches!(trace.backward, End::Stopped { .. });
    let class = match (fwd, bwd) {
        (false, false) => OrbitClass::Finite,
        (true, false) => OrbitClass::ForwardTrapped,
        (false, true) => OrbitClass::BackwardTrapped,
        (true, true) => OrbitClass::Infinite,
    };
    let candidate =
        class == OrbitClass::Infinite && !near_returns(&trace.section, return_tol).is_empty();
    Classification {
        class,
        within_budget: fwd || bwd,
        complete: trace.forward != End::NotRun && trace.backward != End::NotRun,
        candidate_nonwandering: candidate,
    }
}

/// Wrapped angular distance of two exits, for reporting.
pub fn angle_gap(a: f64, b: f64) -> f64 {
    angle_diff(a, b).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quotient::Budgets;

    fn spec() -> PlugSpec {
        PlugSpec::generic(0.0).unwrap().with_budgets(Budgets {
            t_max: 2000.0,
            max_events: 2000,
        })
    }

    #[test]
    fn far_entry_exits_above_itself() {
        let s = spec();
        let p = CylPoint::new(2.9, 4.0, -2.0);
        let tr = flow_orbit(&s, p, Direction::Both).unwrap();
        assert!(tr.forward.exited() && tr.backward.exited());
        let last = tr.samples.last().unwrap();
        assert!((last.z - 2.0).abs() < 1e-12);
        assert!(
            angle_gap(last.theta, p.theta) < 1e-6,
            "{}",
            angle_gap(last.theta, p.theta)
        );
        assert_eq!(classify_orbit(&tr, 1e-4).class, OrbitClass::Finite);
    }

    #[test]
    fn levels_follow_events() {
        let s = spec();
        let tr = flow_orbit(&s, CylPoint::new(2.0, 0.5, -2.0), Direction::Forward).unwrap();
        assert!(tr.events.len() > 3);
        let mut n = 0;
        for e in &tr.events {
            n += e.delta;
            assert!(n >= 0);
            if let Some(m) = e.radius_margin(0.0) {
                assert!(m >= -1e-9);
            }
        }
        for smp in tr.samples.iter().step_by(97) {
            let lv = tr.level_at(smp.t);
            // At an event time both levels are sampled.
            assert!(lv == smp.level || tr.events.iter().any(|e| e.t == smp.t));
        }
    }
}
