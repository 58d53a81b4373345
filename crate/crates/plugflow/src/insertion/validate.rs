//! Grid certification of the insertion conditions.

use crate::geom::{angle_diff, flat_dist, CylPoint};
use crate::insertion::InsertionSpec;
use crate::report::{ValidationReport, Worst};
use crate::wilson::{flow_for, Tolerances, WilsonProfile};

/// Transversality threshold for the normalized face/field determinant.
const TRANSVERSE_MIN: f64 = 1e-4;

fn domain_grid(s: &InsertionSpec, n: usize) -> impl Iterator<Item = (f64, f64)> + '_ {
    let n = n.max(3);
    (0..n).flat_map(move |i| {
        let r = s.r_min + (s.r_max - s.r_min) * i as f64 / (n - 1) as f64;
        (0..n).map(move |j| {
            let u = -s.half_width + 2.0 * s.half_width * j as f64 / (n - 1) as f64;
            (r, u)
        })
    })
}

/// Conditions of a single insertion; ids are prefixed by `I<index>.`.
pub fn validate_insertion(s: &InsertionSpec, w: &WilsonProfile, grid: usize) -> ValidationReport {
    let mut rep = ValidationReport::new();
    let id = |name: &str| format!("I{}.{}", s.index, name);
    let hat = angle_diff(s.theta_hat, s.center);

    let params_ok = s.r_min < 2.0
        && 2.0 < s.r_max
        && s.r_max <= 3.0
        && s.r_min >= 1.0
        && s.half_width > 0.0
        && hat.abs() < s.half_width
        && s.beta_theta > 0.0
        && s.s_tube > 0.0
        && s.order >= 2
        && s.order.is_multiple_of(2)
        && (s.z_anchor - if s.index == 1 { -1.0 } else { 1.0 }).abs() < 1e-15;
    rep.push_with(
        &id("params"),
        params_ok,
        if params_ok { 1.0 } else { -1.0 },
        vec![s.r_min, s.r_max, s.half_width, hat],
        "r_min < 2 < 3, w > 0, (2, theta_hat) interior, beta > 0, S > 0, even order",
    );
    if !params_ok {
        return rep;
    }

    let mut radius = Worst::new();
    let mut transverse = Worst::new();
    let mut k4 = Worst::new();
    let mut vslope = Worst::new();
    let sign = s.z_anchor.signum();
    for (rp, u) in domain_grid(s, grid) {
        let p = s.image_u(rp, u);
        let at = [rp, s.center + u];
        let special = (rp - 2.0).abs() < 1e-12 && (u - hat).abs() < 1e-12;
        if !special {
            // Strict inequality; the margin is scaled by the distance to the special point.
            let gap = rp + s.epsilon - p.r;
            let d2 = (rp - 2.0).powi(2) + (u - hat).powi(2);
            radius.see(gap / d2.powi(s.order as i32 / 2).max(1e-300), &at);
        }
        k4.see(sign * p.z, &at);
        vslope.see(s.vertex_slope(rp), &at);
        if p.r >= 1.0 && p.r <= 3.0 {
            let f = w.f(p.r, p.z);
            let g = w.g(p.r, p.z);
            let det = s.vertex_slope(rp) * (s.beta_theta * g - s.k * f);
            transverse.see(det - TRANSVERSE_MIN, &at);
        }
    }
    let special_img = s.image_u(2.0, hat);
    let eq = (special_img.r - (2.0 + s.epsilon)).abs();
    let radius_margin = if eq > 1e-12 { -eq } else { radius.margin };
    rep.push(
        &id("K8e.radius"),
        radius_margin,
        radius.at,
        "r(sigma(r',theta')) < r' + eps off (2, theta_hat), equality there",
    );
    rep.push(
        &id("H43.transverse"),
        transverse.margin,
        transverse.at,
        "V'(beta g - k f) bounded away from 0",
    );
    rep.push(
        &id("K4.sign"),
        k4.margin,
        k4.at,
        "face height has the sign of the anchor",
    );
    rep.push(
        &id("H45.vertex_monotone"),
        vslope.margin,
        vslope.at,
        "V' > 0 on [r_min, r_max]",
    );

    // Special segment: the vertical segment over (2, theta_hat) maps into {r = 2 + eps}.
    let mut arc = Worst::new();
    let mut arc_z = Worst::new();
    for j in 0..=8 {
        let zp = -2.0 + 4.0 * j as f64 / 8.0;
        match s.sigma(w, 2.0, s.theta_hat, zp) {
            Ok(q) => {
                arc.see(1e-12 - (q.r - 2.0 - s.epsilon).abs(), &[zp]);
                arc_z.see(1e-10 - (q.z - s.z_anchor).abs(), &[zp]);
            }
            Err(_) => arc.see(-1.0, &[zp]),
        }
    }
    rep.push(
        &id("K7e.arc"),
        arc.margin,
        arc.at,
        "special segment stays on {r = 2 + eps}",
    );
    if s.epsilon == 0.0 {
        rep.push(
            &id("K7.orbit"),
            arc_z.margin,
            arc_z.at.clone(),
            "special segment is an arc of the periodic orbit",
        );
        rep.push(
            &id("K6.meets_own"),
            arc_z.margin,
            arc_z.at,
            "inserted region meets its own periodic orbit",
        );
    }

    // Top face lies on the forward orbit of the entry face (independent integration).
    let mut k3 = Worst::new();
    for (rp, u) in domain_grid(s, 7) {
        let th = s.center + u;
        let bottom = s.image_u(rp, u);
        if bottom.r < 1.0 {
            continue;
        }
        let a = s.sigma(w, rp, th, 2.0);
        let coarse = Tolerances {
            rtol: 1e-10,
            atol: 1e-12,
            max_disp: 0.05,
        };
        let b = flow_for(w, bottom, s.s_tube, coarse);
        match (a, b) {
            (Ok(a), Ok(b)) => k3.see(1e-7 - flat_dist(&a, &b), &[rp, th]),
            _ => k3.see(-1.0, &[rp, th]),
        }
    }
    rep.push(
        &id("K3.tube"),
        k3.margin,
        k3.at,
        "top face on the forward orbit of the entry face",
    );

    // Inverse-coordinate profiles near the special radius.
    let mut convex = Worst::new();
    let mut increasing = Worst::new();
    let mut unique_min = Worst::new();
    for dr in [-0.1, -0.05, 0.0, 0.05, 0.1] {
        let r0 = 2.0 + s.epsilon + dr;
        let prof = s.vartheta_profile(r0, 201);
        if prof.theta.len() < 3 {
            continue;
        }
        let n = prof.theta.len();
        let mut minima = 0;
        for j in 1..n - 1 {
            let d2 = prof.big_r[j + 1] - 2.0 * prof.big_r[j] + prof.big_r[j - 1];
            convex.see(d2, &[r0, prof.theta[j]]);
            if prof.big_r[j] < prof.big_r[j - 1] && prof.big_r[j] <= prof.big_r[j + 1] {
                minima += 1;
            }
        }
        for j in 1..n {
            increasing.see(
                prof.big_theta[j] - prof.big_theta[j - 1],
                &[r0, prof.theta[j]],
            );
            increasing.see(prof.theta[j] - prof.theta[j - 1], &[r0, prof.theta[j]]);
        }
        unique_min.see(if minima <= 1 { 1.0 } else { -(minima as f64) }, &[r0]);
    }
    rep.push(
        &id("H44.convex"),
        convex.margin,
        convex.at,
        "R_{i,r0} convex near its vertex",
    );
    rep.push(
        &id("H43.increasing"),
        increasing.margin,
        increasing.at,
        "Theta_{i,r0} strictly increasing",
    );
    rep.push(
        &id("H43.unique_min"),
        unique_min.margin,
        unique_min.at,
        "R_{i,r0} has one local minimum",
    );

    // Admissibility of the offset, advisory only.
    if s.epsilon > 0.0 {
        let delta = s.vertex_offset();
        let bound = s.admissibility_c * delta.sqrt();
        rep.push_warning(
            &id("DK.admissible"),
            bound - s.epsilon,
            vec![s.epsilon, delta, bound],
            "inadmissible unless 0 < eps < C sqrt(delta), delta = vertex height offset on {r = 2}",
        );
    }
    rep
}

/// Samples of the inserted solid: entry-face grid flowed through the tube.
fn tube_samples(s: &InsertionSpec, w: &WilsonProfile, n: usize) -> Vec<CylPoint> {
    let mut out = Vec::new();
    for (rp, u) in domain_grid(s, n) {
        let p = s.image_u(rp, u);
        if p.r < 1.0 {
            continue;
        }
        for j in 0..=4 {
            let t = s.s_tube * j as f64 / 4.0;
            let tol = Tolerances {
                rtol: 1e-8,
                atol: 1e-10,
                max_disp: 0.1,
            };
            if let Ok(q) = flow_for(w, p, t, tol) {
                out.push(q);
            }
        }
    }
    out
}

/// Conditions of the pair, including each insertion separately.
pub fn validate_insertions(
    pair: &[InsertionSpec],
    w: &WilsonProfile,
    grid: usize,
) -> ValidationReport {
    let mut rep = ValidationReport::new();
    for s in pair {
        rep.extend(validate_insertion(s, w, grid));
    }
    if pair.len() != 2 {
        return rep;
    }
    let (a, b) = (&pair[0], &pair[1]);
    let sign_ok = a.k < 0.0 && b.k > 0.0 || a.k == 0.0 || b.k == 0.0;
    rep.push_with(
        "K.sign_k",
        sign_ok,
        if sign_ok { 1.0 } else { -1.0 },
        vec![a.k, b.k],
        "k < 0 for i = 1, k > 0 for i = 2",
    );
    let sep = angle_diff(a.center, b.center).abs() - a.half_width - b.half_width;
    rep.push(
        "K2.domains",
        sep,
        vec![a.center, b.center],
        "angular windows of L1 and L2 disjoint",
    );
    let ta = tube_samples(a, w, 15);
    let tb = tube_samples(b, w, 15);
    let mut gap = Worst::new();
    for p in &ta {
        for q in &tb {
            gap.see(flat_dist(p, q), &[p.r, p.theta, p.z, q.r, q.theta, q.z]);
        }
    }
    rep.push("K2.images", gap.margin, gap.at, "inserted solids disjoint");
    for (s, other, samples) in [(a, b, &ta), (b, a, &tb)] {
        let mut miss = Worst::new();
        for p in samples.iter() {
            let d = ((p.r - 2.0).powi(2) + (p.z - other.z_anchor).powi(2)).sqrt();
            miss.see(d, &[p.r, p.theta, p.z]);
        }
        rep.push(
            &format!("I{}.K6.misses_other", s.index),
            miss.margin,
            miss.at,
            "inserted region misses the other periodic orbit",
        );
    }
    rep
}
