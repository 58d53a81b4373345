//! Grid certification of the conditions imposed on g and f.

use crate::report::{ValidationReport, Worst};
use crate::wilson::profile::{VanishOrder, WilsonProfile};
use std::f64::consts::TAU;

fn grid(n: usize) -> impl Iterator<Item = (f64, f64)> {
    let n = n.max(2);
    (0..n).flat_map(move |i| {
        let r = 1.0 + 2.0 * i as f64 / (n - 1) as f64;
        (0..n).map(move |j| (r, -2.0 + 4.0 * j as f64 / (n - 1) as f64))
    })
}

/// Checks every condition on a `grid x grid` lattice of `[1,3] x [-2,2]`.
pub fn validate_wilson(p: &WilsonProfile, grid_n: usize) -> ValidationReport {
    let mut rep = ValidationReport::new();
    let g0_ok = p.g0 > 0.0 && p.g0 <= 1.0;
    rep.push_with(
        "P.g0",
        g0_ok,
        p.g0.min(1.0 - p.g0),
        vec![p.g0],
        "peak speed in (0,1]",
    );
    rep.push(
        "P.eps0",
        p.eps0.min(0.25 - p.eps0),
        vec![p.eps0],
        "vanishing radius in (0,1/4)",
    );
    let order_ok = match p.order {
        VanishOrder::Even(n) => n >= 2 && n % 2 == 0,
        VanishOrder::Flat => true,
    };
    rep.push_with(
        "P.order",
        order_ok,
        if order_ok { 1.0 } else { -1.0 },
        vec![],
        "even order or flat",
    );
    if !(g0_ok && p.eps0 > 0.0 && p.eps0 < 0.25) {
        return rep;
    }

    let mut range = Worst::new();
    let mut zeros = Worst::new();
    let mut sym_g = Worst::new();
    let mut edge_g = Worst::new();
    let mut odd = Worst::new();
    let mut w2 = Worst::new();
    let mut w3 = Worst::new();
    let mut w4 = Worst::new();
    let mut w5 = Worst::new();
    let mut w6 = Worst::new();
    let mut frange = Worst::new();
    let edge = 0.04;
    for (r, z) in grid(grid_n) {
        let g = p.g(r, z);
        let f = p.f(r, z);
        let at = [r, z];
        range.see(g.min(p.g0 - g), &at);
        let is_zero = (r - 2.0).abs() < 1e-12 && (z.abs() - 1.0).abs() < 1e-12;
        if !is_zero {
            zeros.see(g, &at);
        }
        sym_g.see(1e-14 - (g - p.g(r, -z)).abs(), &at);
        let near_edge = (r - 1.0).min(3.0 - r).min(2.0 - z.abs()) <= edge;
        if near_edge {
            edge_g.see(1e-15 - (g - p.g0).abs(), &at);
            w2.see(1e-300 - f.abs(), &at);
        }
        odd.see(1e-15 - (f + p.f(r, -z)).abs(), &at);
        frange.see(1.0 + 1e-15 - f.abs(), &at);
        if z <= 0.0 {
            w3.see(f + 1e-300, &at);
        }
        if z >= 0.0 {
            w4.see(-f + 1e-300, &at);
        }
        let in_plateau_r = (1.25..=2.75).contains(&r);
        if in_plateau_r && (-1.75..=-0.25).contains(&z) {
            w5.see(1e-15 - (f - 1.0).abs(), &at);
        }
        if in_plateau_r && (0.25..=1.75).contains(&z) {
            w6.see(1e-15 - (f + 1.0).abs(), &at);
        }
    }
    let zero_vals = [p.g(2.0, -1.0), p.g(2.0, 1.0)];
    let zm = -zero_vals[0].abs().max(zero_vals[1].abs());
    let zeros_margin = if zm == 0.0 { zeros.margin } else { zm };
    rep.push("G.range", range.margin + 1e-300, range.at, "0 <= g <= g0");
    rep.push(
        "G.zeros",
        zeros_margin,
        zeros.at,
        "g vanishes exactly at (2,-1) and (2,1)",
    );
    rep.push("G.symmetry", sym_g.margin, sym_g.at, "g(r,z) = g(r,-z)");
    rep.push(
        "G.boundary",
        edge_g.margin,
        edge_g.at,
        "g = g0 near the boundary of R",
    );
    rep.push("W1", odd.margin, odd.at, "f odd in z");
    rep.push("W2", w2.margin, w2.at, "f = 0 near the boundary of R");
    rep.push("W3", w3.margin, w3.at, "f >= 0 for z <= 0");
    rep.push("W4", w4.margin, w4.at, "f <= 0 for z >= 0");
    rep.push("W5", w5.margin, w5.at, "f = 1 on [5/4,11/4]x[-7/4,-1/4]");
    rep.push("W6", w6.margin, w6.at, "f = -1 on [5/4,11/4]x[1/4,7/4]");
    rep.push("F.range", frange.margin, frange.at, "|f| <= 1");

    // Monotone growth of g with the distance to each zero, along rays.
    let mut mono = Worst::new();
    for zc in [-1.0, 1.0] {
        for a in 0..64 {
            let ang = TAU * a as f64 / 64.0;
            let mut prev = 0.0;
            for k in 1..=200 {
                let d = 1.25 * p.eps0 * k as f64 / 200.0;
                let (r, z) = (2.0 + d * ang.cos(), zc + d * ang.sin());
                let g = p.g(r, z);
                mono.see(g - prev + 1e-300, &[r, z]);
                prev = g;
            }
        }
    }
    rep.push(
        "H41.monotone",
        mono.margin,
        mono.at,
        "g increasing in the distance to (2,+-1)",
    );

    if let VanishOrder::Even(2) = p.order {
        // Hessian by central differences at each zero.
        let mut hess = Worst::new();
        let h = p.eps0 * 1e-3;
        for zc in [-1.0, 1.0] {
            let g = |r: f64, z: f64| p.g(r, z);
            let grr = (g(2.0 + h, zc) - 2.0 * g(2.0, zc) + g(2.0 - h, zc)) / (h * h);
            let gzz = (g(2.0, zc + h) - 2.0 * g(2.0, zc) + g(2.0, zc - h)) / (h * h);
            let grz = (g(2.0 + h, zc + h) - g(2.0 + h, zc - h) - g(2.0 - h, zc + h)
                + g(2.0 - h, zc - h))
                / (4.0 * h * h);
            let det = grr * gzz - grz * grz;
            hess.see(grr.min(det), &[2.0, zc]);
        }
        rep.push(
            "H41.hessian",
            hess.margin,
            hess.at,
            "positive definite Hessian at the zeros",
        );
    }

    match p.order {
        VanishOrder::Even(_) => {
            let mut lo = Worst::new();
            let mut hi = Worst::new();
            let rad = p.eps0 / 2f64.sqrt();
            for zc in [-1.0, 1.0] {
                for i in 1..=100 {
                    let d = rad * i as f64 / 100.0;
                    for a in 0..100 {
                        let ang = TAU * (a as f64 + 0.5) / 100.0;
                        let (r, z) = (2.0 + d * ang.cos(), zc + d * ang.sin());
                        let s = p.order_comparison(r, z).unwrap_or(0.0);
                        let g = p.g(r, z);
                        let slack = 1e-12 * g.abs();
                        lo.see((g - p.lambda1 * s + slack) / s.max(1e-300), &[r, z]);
                        hi.see((p.lambda2 * s - g + slack) / s.max(1e-300), &[r, z]);
                    }
                }
            }
            rep.push_with(
                "H42.sandwich",
                lo.margin >= 0.0 && hi.margin >= 0.0 && p.lambda1 > 0.0,
                lo.margin.min(hi.margin),
                if lo.margin < hi.margin { lo.at } else { hi.at },
                "lambda1 S <= g <= lambda2 S on d^2 <= eps0^2/2",
            );
        }
        VanishOrder::Flat => rep.push_warning(
            "H42.sandwich",
            -1.0,
            vec![],
            "infinitely flat profile has no finite vanishing order",
        ),
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_profile_passes() {
        let rep = validate_wilson(&WilsonProfile::default(), 201);
        assert!(rep.all_pass(), "{:#?}", rep.failures());
    }

    #[test]
    fn bad_g0_fails() {
        let mut p = WilsonProfile::default();
        p.g0 = 1.5;
        let rep = validate_wilson(&p, 51);
        assert!(!rep.get("P.g0").unwrap().pass);
    }

    #[test]
    fn shifted_plateau_breaks_sign_condition() {
        let mut p = WilsonProfile::default();
        p.f_shift = -0.6;
        let rep = validate_wilson(&p, 201);
        let w3 = rep.get("W3").unwrap();
        assert!(!w3.pass);
        assert!(w3.witness.as_ref().unwrap()[1] <= 0.0);
    }

    #[test]
    fn higher_order_passes() {
        let p = WilsonProfile::generic(0.2, 0.24, VanishOrder::Even(4));
        let rep = validate_wilson(&p, 101);
        assert!(rep.all_pass(), "{:#?}", rep.failures());
    }
}
