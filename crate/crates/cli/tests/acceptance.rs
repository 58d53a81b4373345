//! Acceptance suite: one PASS/FAIL line per criterion, then a single assertion.
//!
//! Criteria 3 to 10 write their outputs into a directory; criterion 11 reruns the
//! same producers into a second directory and compares every file byte for byte.

use plugflow::analysis::{doubling_map_curve, entropy_estimates, growth_type_fit, GrowthCurve, GrowthModel};
use plugflow::geom::{angle_diff, CylPoint, Z_MAX};
use plugflow::quotient::{entry_disk, radius_law_survey, run_half, seed_grid, shadow_angle, Budgets, End};
use plugflow::wilson::{integrate_wilson, Tolerances, WilsonOutcome, WilsonProfile};
use plugflow_cli::config::RunConfig;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::time::Instant;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn default_config() -> RunConfig {
    RunConfig::load(&configs().join("default.toml")).unwrap()
}

fn cli(args: &[&str]) -> i32 {
    plugflow_cli::run(std::iter::once("plugflow").chain(args.iter().copied()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn write_json<T: Serialize>(p: &Path, v: &T) {
    std::fs::write(p, serde_json::to_string_pretty(v).unwrap()).unwrap();
}

/// Writes the default config at offset `eps` and returns its path.
fn config_at(dir: &Path, eps: f64) -> PathBuf {
    let mut c = default_config();
    c.plug.epsilon = eps;
    let p = dir.join(format!("eps_{eps}.toml"));
    std::fs::write(&p, c.to_toml()).unwrap();
    p
}

struct Verdict {
    pass: bool,
    detail: String,
}

/// Criterion, check on the output directory, runtime bound in seconds.
type Check = (u32, fn(&Path) -> Verdict, f64);

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

// Criterion 1: Wilson plug on its own.

/// Classical RK4 of the field in Cartesian coordinates; largest radius drift until the orbit leaves.
fn cartesian_drift(w: &WilsonProfile, p: CylPoint, t_max: f64, h: f64) -> f64 {
    let field = |x: [f64; 3]| {
        let r = x[0].hypot(x[1]);
        let f = w.f(r, x[2]);
        [-x[1] * f, x[0] * f, w.g(r, x[2])]
    };
    let mut x = p.cartesian();
    let mut drift: f64 = 0.0;
    let mut t = 0.0;
    while t < t_max && x[2].abs() < Z_MAX {
        let add = |a: [f64; 3], k: [f64; 3], c: f64| [a[0] + c * k[0], a[1] + c * k[1], a[2] + c * k[2]];
        let k1 = field(x);
        let k2 = field(add(x, k1, h / 2.0));
        let k3 = field(add(x, k2, h / 2.0));
        let k4 = field(add(x, k3, h));
        for i in 0..3 {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t += h;
        drift = drift.max((x[0].hypot(x[1]) - p.r).abs());
    }
    drift
}

fn gap(a: &CylPoint, b: &CylPoint) -> f64 {
    (a.r - b.r).hypot(a.r * angle_diff(a.theta, b.theta)).hypot(a.z - b.z)
}

fn criterion_1() -> Verdict {
    let w = WilsonProfile::default();
    let tol = Tolerances::default();
    let mut rng = StdRng::seed_from_u64(1);
    let pts: Vec<CylPoint> = (0..100)
        .map(|_| CylPoint::new(rng.gen_range(1.0..3.0), rng.gen_range(0.0..std::f64::consts::TAU), rng.gen_range(-2.0..2.0)))
        .collect();

    let mut drift: f64 = 0.0;
    let mut oracle_drift: f64 = 0.0;
    let mut rotation: f64 = 0.0;
    for p in &pts {
        let seg = integrate_wilson(&w, *p, 100.0, tol).unwrap();
        drift = seg.path.iter().map(|(_, q)| (q.r - p.r).abs()).fold(drift, f64::max);
        oracle_drift = oracle_drift.max(cartesian_drift(&w, *p, 100.0, 5e-3));
        let phi = rng.gen_range(0.0..std::f64::consts::TAU);
        let a = integrate_wilson(&w, p.rotate(phi), 100.0, tol).unwrap().outcome.point();
        let b = seg.outcome.point().rotate(phi);
        rotation = rotation.max(gap(&a, &b));
    }

    let mut entry_exit: f64 = 0.0;
    let mut unexited = 0;
    for _ in 0..100 {
        let p = CylPoint::new(rng.gen_range(1.0..3.0), rng.gen_range(0.0..std::f64::consts::TAU), -Z_MAX);
        if p.r == 2.0 {
            continue;
        }
        match integrate_wilson(&w, p, 1e6, tol).unwrap().outcome {
            WilsonOutcome::Exited { point, .. } => {
                entry_exit = entry_exit.max((point.r - p.r).hypot(p.r * angle_diff(point.theta, p.theta)));
            }
            _ => unexited += 1,
        }
    }

    let mut trapped = true;
    let mut worst_limit: f64 = 0.0;
    for j in 0..10 {
        let th = std::f64::consts::TAU * j as f64 / 10.0;
        for (z0, t, limit) in [(-Z_MAX, 1e4, -1.0), (Z_MAX, -1e4, 1.0)] {
            let seg = integrate_wilson(&w, CylPoint::new(2.0, th, z0), t, tol).unwrap();
            let sign = (limit - z0).signum();
            let monotone = seg.path.windows(2).all(|q| (q[1].1.z - q[0].1.z) * sign >= 0.0);
            let short_of_limit = seg.path.iter().all(|(_, q)| (limit - q.z) * sign > 0.0);
            trapped &= !matches!(seg.outcome, WilsonOutcome::Exited { .. }) && monotone && short_of_limit;
            worst_limit = worst_limit.max((seg.outcome.point().z - limit).abs());
        }
    }

    let pass = drift <= 1e-7
        && oracle_drift <= 1e-7
        && rotation <= 1e-7
        && entry_exit <= 1e-6
        && unexited == 0
        && trapped
        && worst_limit <= 1e-3;
    verdict(
        pass,
        format!(
            "radius drift {drift:.1e} (Cartesian oracle {oracle_drift:.1e}), rotation {rotation:.1e}, entry-exit {entry_exit:.1e} \
             ({unexited} not exited), r = 2 trapped and monotone {trapped}, distance to the periodic orbit at T = 1e4 {worst_limit:.1e}"
        ),
    )
}

// Criterion 2: validation of the shipped configs.

fn criterion_2(tmp: &Path) -> Verdict {
    let out = tmp.join("validate");
    let default = configs().join("default.toml");
    let mut ok = cli(&["validate", "--config", s(&default), "--out", s(&out.join("default"))]) == 0;
    let v = read_json(&out.join("default/validate.json"));
    ok &= v["pass"] == true && v["grid"] == 200;
    let mut detail = format!("default passes at grid {} {ok}", v["grid"]);

    let neg = config_at(tmp, -0.05);
    let neg_ok = cli(&["validate", "--config", s(&neg), "--out", s(&out.join("neg"))]) == 0;
    let big = config_at(tmp, 0.5);
    let big_ok = cli(&["validate", "--config", s(&big), "--out", s(&out.join("big"))]) == 0
        && read_json(&out.join("big/validate.json"))["tags"].as_array().unwrap().iter().any(|t| t == "inadmissible");
    ok &= neg_ok && big_ok;
    detail += &format!("; eps = -0.05 passes {neg_ok}; eps = 0.5 passes tagged inadmissible {big_ok}");

    let families = [
        ("wilson_f_shift", "W"),
        ("hyp_sandwich", "H42"),
        ("overlapping_windows", "K2"),
        ("vertex_decreasing", "K8e"),
        ("transverse_flat", "H43"),
        ("vertex_monotone", "H45"),
    ];
    for (name, family) in families {
        let cfg = configs().join("mutated").join(format!("{name}.toml"));
        let dir = out.join(name);
        let code = cli(&["validate", "--config", s(&cfg), "--out", s(&dir)]);
        let v = read_json(&dir.join("validate.json"));
        let failing: Vec<&Value> = v["report"]["checks"].as_array().unwrap().iter().filter(|c| c["pass"] == false).collect();
        let hit = failing.iter().any(|c| {
            let id = c["id"].as_str().unwrap();
            id.split('.').any(|part| part == family || (family == "W" && part.starts_with('W')))
        });
        let witnessed = failing.iter().all(|c| c["witness"].as_array().is_some_and(|w| !w.is_empty()));
        let good = code == 1 && hit && witnessed;
        ok &= good;
        detail += &format!("; {name} fails {family} with witness {good}");
    }
    verdict(ok, detail)
}

// Producers of criteria 3 to 10.

fn radius_law(dir: &Path) {
    let spec = default_config().spec().unwrap().with_budgets(Budgets { t_max: 1e4, max_events: 10_000 });
    let ring = (0..40).map(|j| CylPoint::new(2.0, std::f64::consts::TAU * j as f64 / 40.0, -1.0));
    let seeds: Vec<CylPoint> = seed_grid(40, 40, 20).into_iter().chain(ring).filter(|p| spec.in_tube(p).is_none()).collect();
    let rep = radius_law_survey(&spec, &seeds, 1e-3).unwrap();
    write_json(&dir.join("radius_law.json"), &rep);
}

fn trapped_disk(dir: &Path) {
    #[derive(Serialize)]
    struct Disk {
        theta: f64,
        entries: Vec<(CylPoint, bool, End)>,
    }
    let spec = default_config().spec().unwrap().with_budgets(Budgets { t_max: 1e4, max_events: 1_000_000 });
    let theta = shadow_angle(&spec, 0, 1.98, 0.015, 1440).unwrap();
    let entries = entry_disk(1.98, theta, 0.015, 50)
        .into_iter()
        .map(|p| {
            let primary = spec.domain_of(p.r, p.theta).is_none();
            (p, primary, run_half(&spec, p, 1.0, &mut ()).unwrap().end)
        })
        .collect();
    write_json(&dir.join("trapped_disk.json"), &Disk { theta, entries });
}

fn doubling(dir: &Path) {
    let curve = doubling_map_curve(1 << 14, &[2, 3, 4, 5, 6, 7, 8], 0.1);
    write_json(&dir.join("doubling.json"), &entropy_estimates(&curve, &[0.5, 1.0]).unwrap());
}

/// Runs every producer into `dir`; returns the wall time of each step by criterion.
fn produce(dir: &Path, cfg_dir: &Path) -> Vec<(u32, f64)> {
    std::fs::create_dir_all(dir).unwrap();
    let default = configs().join("default.toml");
    let neg = config_at(cfg_dir, -0.05);
    let pos = config_at(cfg_dir, 0.1);
    let d = |n: &str| dir.join(n);
    let mut times = Vec::new();
    let mut step = |c: u32, f: &mut dyn FnMut()| {
        let t = Instant::now();
        f();
        times.push((c, t.elapsed().as_secs_f64()));
    };
    let run = |args: &[&str]| assert_eq!(cli(args), 0, "{args:?}");
    step(3, &mut || radius_law(dir));
    step(4, &mut || run(&["periodic", "--config", s(&default), "--out", s(&d("periodic_zero"))]));
    step(5, &mut || run(&["periodic", "--config", s(&neg), "--out", s(&d("periodic_negative"))]));
    step(6, &mut || run(&["orbit", "--special", "--config", s(&default), "--out", s(&d("minimal"))]));
    step(7, &mut || trapped_disk(dir));
    step(8, &mut || run(&["m0", "--config", s(&default), "--out", s(&d("m0"))]));
    step(10, &mut || {
        run(&["entropy", "--config", s(&default), "--out", s(&d("entropy_zero"))]);
        run(&["entropy", "--config", s(&pos), "--out", s(&d("entropy_positive"))]);
        doubling(dir);
    });
    times
}

fn elapsed(times: &[(u32, f64)], c: u32) -> f64 {
    times.iter().filter(|t| t.0 == c).map(|t| t.1).sum()
}

fn criterion_3(dir: &Path) -> Verdict {
    let r = read_json(&dir.join("radius_law.json"));
    let entries = r["entries"].as_u64().unwrap();
    let min = r["min_margin"].as_f64().unwrap();
    let at = r["argmin_to_special"].as_f64().unwrap();
    let away = r["min_margin_away"].as_f64().unwrap();
    verdict(
        entries >= 100_000 && min >= -1e-9 && at <= 1e-3 && away > min,
        format!("{entries} entries, min margin {min:.2e} at {at:.1e} from the special point, min margin farther than 1e-3 {away:.2e}"),
    )
}

fn periodic_result(dir: &Path, name: &str) -> Value {
    read_json(&dir.join(name).join("periodic.json"))["result"].clone()
}

fn criterion_4(dir: &Path) -> Verdict {
    let r = periodic_result(dir, "periodic_zero");
    let n = r["orbits"].as_array().unwrap().len();
    verdict(n == 0 && r["failed"] == 0, format!("{n} periodic orbits from {} seeds", r["seeds"]))
}

fn criterion_5(dir: &Path) -> Verdict {
    let r = periodic_result(dir, "periodic_negative");
    let orbits = r["orbits"].as_array().unwrap();
    let closure = orbits.iter().map(|o| o["closure_error"].as_f64().unwrap()).fold(0.0, f64::max);
    let seeds = r["seeds"].as_u64().unwrap();
    let classified = r["exited"].as_u64().unwrap() + r["trapped"].as_u64().unwrap();
    let pass = orbits.len() == 2 && closure <= 1e-6 && classified == seeds && r["failed"] == 0 && r["recurrent_unexplained"] == 0;
    verdict(
        pass,
        format!(
            "{} periodic orbits, max closure {closure:.1e}; {classified} of {seeds} seeds finite or non-recurrent, {} unexplained returns",
            orbits.len(),
            r["recurrent_unexplained"]
        ),
    )
}

fn criterion_6(dir: &Path) -> Verdict {
    let rows = read_json(&dir.join("minimal/minimal.json"))["rows"].as_array().unwrap().clone();
    let min_r = rows.iter().map(|r| r["min_radius"].as_f64().unwrap()).fold(f64::INFINITY, f64::min);
    let h: Vec<f64> = rows.iter().map(|r| r["hausdorff_12"].as_f64().unwrap()).collect();
    let t: Vec<f64> = rows.iter().map(|r| r["t_max"].as_f64().unwrap()).collect();
    let decreasing = h.windows(2).all(|w| w[1] < w[0]);
    verdict(
        min_r >= 2.0 - 1e-6 && decreasing && t == [1e3, 5e3, 2e4],
        format!("min radius {min_r:.12}, Hausdorff {h:.4?} at T {t:?}"),
    )
}

fn criterion_7(dir: &Path) -> Verdict {
    let d = read_json(&dir.join("trapped_disk.json"));
    let entries = d["entries"].as_array().unwrap();
    let in_band = entries.iter().all(|e| {
        let r = e[0]["r"].as_f64().unwrap();
        (1.95..2.0).contains(&r) && e[1] == true
    });
    let trapped = entries.iter().filter(|e| e[2]["end"] != "exited").count();
    verdict(
        entries.len() == 50 && in_band && trapped == 50,
        format!("{trapped}/{} trapped at T = 1e4, primary entries with r in [1.95, 2) {in_band}, disk angle {:.4}", entries.len(), d["theta"]),
    )
}

fn criterion_8(dir: &Path) -> Verdict {
    let l = &read_json(&dir.join("m0/m0.json"))["levels"];
    let pass = l["level1_components"] == 2 && l["min_level"].as_i64().unwrap() >= 0 && l["level1_monotone"] == true;
    verdict(
        pass,
        format!(
            "{} level-1 components, levels {}..{}, level-1 strands monotone to r = 2 {}",
            l["level1_components"], l["min_level"], l["max_level"], l["level1_monotone"]
        ),
    )
}

fn synthetic(f: impl Fn(f64) -> f64) -> GrowthCurve {
    let s: Vec<f64> = (1..=200).map(|i| i as f64 * 0.5).collect();
    let area = s.iter().map(|&x| f(x)).collect();
    GrowthCurve { s, area, s_valid: f64::INFINITY, s_onset: 0.0, unreachable: 0 }
}

fn criterion_9(dir: &Path) -> Verdict {
    let fit = &read_json(&dir.join("m0/m0.json"))["fit"];
    let best = fit["best"].as_str().unwrap_or("none").to_string();
    let inter = fit["fits"].as_array().unwrap().iter().find(|f| f["model"] == "intermediate").unwrap();
    let a = inter["coefficient"].as_f64().unwrap();
    let r2 = inter["r2"].as_f64().unwrap();
    let oracles = [
        (GrowthModel::Polynomial, synthetic(|s| s.powi(3))),
        (GrowthModel::Intermediate, synthetic(|s| (2.0 * s.sqrt()).exp())),
        (GrowthModel::Exponential, synthetic(|s| (0.3 * s).exp())),
    ];
    let recovered = oracles.iter().all(|(m, c)| growth_type_fit(c).unwrap().best == *m);
    verdict(
        best == "intermediate" && a > 0.0 && r2 >= 0.9 && recovered,
        format!("best model {best}, a = {a:.4}, R2 = {r2:.4}; synthetic oracles recovered {recovered}"),
    )
}

fn finest(v: &Value) -> (f64, f64) {
    let scales = v["estimates"]["scales"].as_array().unwrap();
    let f = scales.iter().min_by(|a, b| a["eps_sep"].as_f64().unwrap().total_cmp(&b["eps_sep"].as_f64().unwrap())).unwrap();
    (f["slope"].as_f64().unwrap(), f["eps_sep"].as_f64().unwrap())
}

fn criterion_10(dir: &Path) -> Verdict {
    let zero = read_json(&dir.join("entropy_zero/entropy.json"));
    let pos = read_json(&dir.join("entropy_positive/entropy.json"));
    let (s0, e0) = finest(&zero);
    let (s1, _) = finest(&pos);
    let h0 = zero["estimates"]["h_top"].as_f64().unwrap();
    let h2 = read_json(&dir.join("doubling.json"))["h_top"].as_f64().unwrap();
    let ln2 = std::f64::consts::LN_2;
    let same_seeds = zero["curve"]["seeds"] == pos["curve"]["seeds"];
    let pass = same_seeds && s1 > 0.0 && s1 >= 2.0 * s0 && h0 <= 1e-3 && (h2 / ln2 - 1.0).abs() <= 0.1;
    verdict(
        pass,
        format!("slope at eps_sep {e0}: {s0:.3e} at eps = 0, {s1:.3e} at eps = 0.1; h_top(0) = {h0:.1e}; doubling map {h2:.4} vs log 2 {ln2:.4}"),
    )
}

fn files(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn criterion_11(a: &Path, b: &Path) -> Verdict {
    let fa = files(a);
    let fb = files(b);
    let differing: Vec<String> =
        fa.iter().filter(|f| std::fs::read(a.join(f)).ok() != std::fs::read(b.join(f)).ok()).map(|f| f.display().to_string()).collect();
    verdict(
        fa == fb && differing.is_empty() && !fa.is_empty(),
        format!("{} files compared, {} differ {differing:?}", fa.len(), differing.len()),
    )
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_dir = tmp.path().join("configs");
    std::fs::create_dir_all(&cfg_dir).unwrap();
    // (criterion, verdict, seconds, runtime bound)
    let mut results: Vec<(u32, Verdict, f64, f64)> = Vec::new();

    let t = Instant::now();
    results.push((1, criterion_1(), t.elapsed().as_secs_f64(), 60.0));
    let t = Instant::now();
    results.push((2, criterion_2(tmp.path()), t.elapsed().as_secs_f64(), 60.0));

    // Both runs use the same output path, so the echoed configs and hashes agree.
    let run_dir = tmp.path().join("run");
    let first = tmp.path().join("first");
    let times = produce(&run_dir, &cfg_dir);
    std::fs::rename(&run_dir, &first).unwrap();
    let checks: [Check; 8] = [
        (3, criterion_3, 300.0),
        (4, criterion_4, 600.0),
        (5, criterion_5, 600.0),
        (6, criterion_6, 600.0),
        (7, criterion_7, 300.0),
        (8, criterion_8, 600.0),
        (9, criterion_9, 600.0),
        (10, criterion_10, 900.0),
    ];
    for (c, check, limit) in checks {
        // Criteria 8 and 9 share the mesh run.
        let secs = elapsed(&times, if c == 9 { 8 } else { c });
        results.push((c, check(&first), secs, limit));
    }

    let t = Instant::now();
    produce(&run_dir, &cfg_dir);
    results.push((11, criterion_11(&first, &run_dir), t.elapsed().as_secs_f64(), f64::INFINITY));

    let mut failed = Vec::new();
    for (c, v, secs, limit) in &results {
        let pass = v.pass && secs <= limit;
        println!("{} criterion {c}: {} ({secs:.1} s)", if pass { "PASS" } else { "FAIL" }, v.detail);
        if !pass {
            failed.push(*c);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria {failed:?}");
        std::process::exit(1);
    }
}
