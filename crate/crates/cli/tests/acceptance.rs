//! Acceptance suite. Runs every criterion through the `equideform` binary
//! and prints one PASS/FAIL line per criterion.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use serde_json::Value;

struct Run {
    code: i32,
    elapsed: Duration,
    out: PathBuf,
}

impl Run {
    fn report(&self) -> Value {
        let text = std::fs::read_to_string(self.out.join("report.json")).expect("report.json");
        serde_json::from_str(&text).expect("report parses")
    }

    fn records(&self) -> Vec<Value> {
        let text = std::fs::read_to_string(self.out.join("branch.jsonl")).expect("branch.jsonl");
        text.lines().map(|l| serde_json::from_str(l).expect("record parses")).collect()
    }
}

fn run(dir: &Path, name: &str, command: &str, config: &str, seed: Option<u64>) -> Run {
    let out = dir.join(name);
    std::fs::create_dir_all(&out).unwrap();
    let cfg = out.join("config.toml");
    std::fs::write(&cfg, config).unwrap();
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_equideform"));
    cmd.arg(command).arg("--config").arg(&cfg).arg("--out").arg(&out);
    if let Some(s) = seed {
        cmd.arg("--seed").arg(s.to_string());
    }
    let start = Instant::now();
    let status = cmd.output().expect("binary runs");
    Run {
        code: status.status.code().unwrap_or(-1),
        elapsed: start.elapsed(),
        out,
    }
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

fn u(v: &Value) -> u64 {
    v.as_u64().unwrap_or(u64::MAX)
}

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn bundle_checks<'a>(report: &'a Value, name: &str) -> Vec<&'a Value> {
    report["payload"]["checks"]
        .as_array()
        .map(|a| a.iter().filter(|c| c["name"] == name).collect())
        .unwrap_or_default()
}

fn max_value(checks: &[&Value]) -> f64 {
    checks.iter().map(|c| f(&c["value"])).fold(0.0, f64::max)
}

fn criterion_1(bundle: &Run) -> Outcome {
    let r = bundle.report();
    let closure = bundle_checks(&r, "bracket_closure");
    let inv = bundle_checks(&r, "invariance");
    let rank = bundle_checks(&r, "complement_rank");
    let slice = bundle_checks(&r, "slice_margin");
    let min_margin = slice.iter().map(|c| f(&c["value"])).fold(f64::INFINITY, f64::min);
    let secs = bundle.elapsed.as_secs_f64();
    check(
        bundle.code == 0
            && closure.len() == 14
            && inv.len() == 14
            && rank.len() == 14
            && max_value(&closure) < 1e-12
            && max_value(&inv) < 1e-12
            && rank.iter().all(|c| c["passed"] == true)
            && slice.iter().all(|c| c["passed"] == true)
            && min_margin > 1e-3
            && secs < 5.0,
        format!(
            "closure {:.2e}, invariance {:.2e}, min slice margin {:.3e}, {:.2} s",
            max_value(&closure),
            max_value(&inv),
            min_margin,
            secs
        ),
    )
}

fn criterion_2(bundle: &Run) -> Outcome {
    let r = bundle.report();
    let membership = bundle_checks(&r, "section_membership");
    let base = bundle_checks(&r, "section_base");
    check(
        !membership.is_empty()
            && !base.is_empty()
            && max_value(&membership) < 1e-10
            && max_value(&base) < 1e-12,
        format!(
            "membership {:.2e}, base {:.2e}",
            max_value(&membership),
            max_value(&base)
        ),
    )
}

fn criterion_3(bundle: &Run) -> Outcome {
    let r = bundle.report();
    let anti = bundle_checks(&r, "bracket_antisymmetry");
    let jacobi = bundle_checks(&r, "bracket_jacobi");
    let undeformed = bundle_checks(&r, "bracket_undeformed");
    let lambdas: Vec<f64> = jacobi.iter().map(|c| f(&c["lambda"])).collect();
    let covered = [-1.0, 0.0, 0.5, 1.0].iter().all(|l| lambdas.contains(l));
    check(
        covered
            && anti.iter().all(|c| f(&c["value"]) == 0.0)
            && max_value(&jacobi) < 1e-12
            && !undeformed.is_empty()
            && max_value(&undeformed) < 1e-14,
        format!(
            "antisymmetry {:.1e}, Jacobi {:.2e}, undeformed {:.2e}",
            max_value(&anti),
            max_value(&jacobi),
            max_value(&undeformed)
        ),
    )
}

fn sn_cn(lambda: f64, r: f64) -> (f64, f64) {
    if lambda > 0.0 {
        let k = lambda.sqrt();
        ((k * r).sin() / k, (k * r).cos())
    } else if lambda < 0.0 {
        let k = (-lambda).sqrt();
        ((k * r).sinh() / k, (k * r).cosh())
    } else {
        (r, 1.0)
    }
}

/// Root of `cn(rho) - h sn(rho)`, the curvature relation of a geodesic
/// circle, by bisection.
fn oracle_radius(lambda: f64, h: f64) -> f64 {
    let g = |r: f64| {
        let (s, c) = sn_cn(lambda, r);
        c - h * s
    };
    let (mut a, mut b) = (1e-9, 1.0);
    while g(b) > 0.0 {
        b *= 2.0;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if g(m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// `Length - h Area` of the geodesic circle of radius `rho`, area by Simpson.
fn circle_energy(lambda: f64, h: f64, rho: f64) -> f64 {
    let m = 2000;
    let dr = rho / m as f64;
    let area: f64 = (0..=m)
        .map(|i| {
            let w = if i == 0 || i == m { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            w * sn_cn(lambda, i as f64 * dr).0
        })
        .sum::<f64>()
        * dr
        / 3.0
        * std::f64::consts::TAU;
    std::f64::consts::TAU * sn_cn(lambda, rho).0 - h * area
}

/// Stationary point of [`circle_energy`] by golden-section search.
fn energy_radius(lambda: f64, h: f64) -> f64 {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.05, 3.0);
    for _ in 0..80 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if circle_energy(lambda, h, c) > circle_energy(lambda, h, d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

fn criterion_4(branch: &Run) -> Outcome {
    let records = branch.records();
    let mut err: f64 = 0.0;
    let mut oracle_agreement: f64 = 0.0;
    for (i, r) in records.iter().enumerate() {
        let lambda = f(&r["lambda_hat"]);
        let rho = oracle_radius(lambda, 2.0);
        if i % 15 == 0 {
            oracle_agreement = oracle_agreement.max((energy_radius(lambda, 2.0) - rho).abs());
        }
        err = err.max((f(&r["derived_scalars"]["best_fit_radius"]) - rho).abs());
    }
    let last = records.last().map(|r| f(&r["lambda_hat"])).unwrap_or(f64::NAN);
    let secs = branch.elapsed.as_secs_f64();
    check(
        branch.code == 0
            && records.len() == 61
            && last == -3.0
            && err < 1e-8
            && oracle_agreement < 1e-5
            && secs < 10.0,
        format!(
            "{} records, max radius error {:.2e}, oracle cross-check {:.1e}, {:.2} s",
            records.len(),
            err,
            oracle_agreement,
            secs
        ),
    )
}

fn certified(r: &Value, kernel: u64) -> bool {
    u(&r["kernel_dim"]) == kernel
        && u(&r["killing_rank"]) == kernel
        && f(&r["max_principal_angle"]) < 1e-6
        && f(&r["spectral_gap"]) > 1e3
}

fn criterion_5(branch: &Run) -> Outcome {
    let records = branch.records();
    let bad = records.iter().filter(|r| !certified(r, 2)).count();
    let angle = records.iter().map(|r| f(&r["max_principal_angle"])).fold(0.0, f64::max);
    let gap = records.iter().map(|r| f(&r["spectral_gap"])).fold(f64::INFINITY, f64::min);
    check(
        !records.is_empty() && bad == 0,
        format!(
            "{} records, {} uncertified, max angle {:.2e}, min gap {:.2e}",
            records.len(),
            bad,
            angle,
            gap
        ),
    )
}

fn diagnostics_ok(d: &Value) -> bool {
    let op = &d["operator"];
    f(&op["symmetry_residual"]) < 1e-10
        && op["index"].as_i64() == Some(0)
        && f(&op["hessian_consistency"]) < 1e-5
}

fn criterion_6(runs: &[&Run]) -> Outcome {
    let mut count = 0;
    let mut bad = 0;
    let mut sym: f64 = 0.0;
    let mut hess: f64 = 0.0;
    for run in runs {
        let r = run.report();
        for d in r["payload"]["diagnostics"].as_array().into_iter().flatten() {
            count += 1;
            if !diagnostics_ok(d) {
                bad += 1;
            }
            sym = sym.max(f(&d["operator"]["symmetry_residual"]));
            hess = hess.max(f(&d["operator"]["hessian_consistency"]));
        }
    }
    check(
        count > 0 && bad == 0,
        format!("{count} records, {bad} failing, symmetry {sym:.2e}, Hessian {hess:.2e}"),
    )
}

fn criterion_7(dir: &Path, branch: &Run) -> Outcome {
    let records = branch.records();
    let mut worst_param: f64 = 0.0;
    let mut worst_dist: f64 = 0.0;
    let mut failures = 0;
    let mut count = 0;
    for (k, r) in records.iter().enumerate().step_by(12) {
        let lambda = f(&r["lambda_hat"]);
        let name = format!("c7_{k}");
        let state = dir.join(format!("{name}_state.json"));
        std::fs::write(&state, serde_json::json!({"values": r["state"]["values"]}).to_string()).unwrap();
        let config = format!(
            "[problem]\ninstance = \"cmc_circle\"\nh = 2.0\nn = 128\nlambda = {lambda:?}\nstate_file = {:?}\n",
            state.display().to_string()
        );
        let run = run(dir, &name, "congruence", &config, Some(1000 + k as u64));
        let p = &run.report()["payload"];
        let norm = p["applied"]["t"]
            .as_array()
            .map(|t| t.iter().map(|x| f(x) * f(x)).sum::<f64>().sqrt())
            .unwrap_or(f64::NAN);
        count += 1;
        let param = f(&p["parameter_error"]);
        let dist = f(&p["distance"]);
        worst_param = worst_param.max(param);
        worst_dist = worst_dist.max(dist);
        if !(run.code == 0 && p["congruent"] == true && norm <= 0.05 && param < 1e-6 && dist < 1e-8) {
            failures += 1;
        }
    }
    check(
        count > 0 && failures == 0,
        format!("{count} states, max parameter error {worst_param:.2e}, max distance {worst_dist:.2e}"),
    )
}

fn criterion_8(torus: &Run) -> Outcome {
    let records = torus.records();
    let mut err: f64 = 0.0;
    for r in &records {
        let t = f(&r["lambda_hat"]);
        let q11 = (1.0 - t) + 4.0 * t;
        err = err.max((f(&r["derived_scalars"]["length"]) - q11.sqrt()).abs());
    }
    let dims = records
        .iter()
        .all(|r| u(&r["kernel_dim"]) == 2 && u(&r["killing_rank"]) == 2);
    let last = records.last().map(|r| f(&r["lambda_hat"])).unwrap_or(f64::NAN);
    check(
        torus.code == 0 && last == 1.0 && dims && err < 1e-10,
        format!("{} records, max length error {:.2e}", records.len(), err),
    )
}

fn criterion_9(analyze: &Run, branch: &Run) -> Outcome {
    let nd = &analyze.report()["payload"]["nondegeneracy"];
    let records = branch.records();
    let err = records
        .iter()
        .map(|r| (f(&r["derived_scalars"]["length_times_sqrt_lambda"]) - std::f64::consts::TAU).abs())
        .fold(0.0, f64::max);
    let (first, last) = (
        records.first().map(|r| f(&r["lambda_hat"])),
        records.last().map(|r| f(&r["lambda_hat"])),
    );
    check(
        analyze.code == 0
            && u(&nd["kernel_dim"]) == 3
            && u(&nd["killing_rank"]) == 3
            && branch.code == 0
            && first == Some(0.5)
            && last == Some(2.0)
            && err < 1e-8,
        format!(
            "kernel {}/{}, {} records, max |length sqrt(lambda) - 2 pi| {:.2e}",
            nd["kernel_dim"],
            nd["killing_rank"],
            records.len(),
            err
        ),
    )
}

fn criterion_10(analyze: &Run, legs: &[&Run]) -> Outcome {
    let nd = &analyze.report()["payload"]["nondegeneracy"];
    let mut residual: f64 = 0.0;
    let mut count = 0;
    let mut ends = Vec::new();
    for leg in legs {
        let records = leg.records();
        count += records.len();
        residual = records.iter().map(|r| f(&r["residual_norm"])).fold(residual, f64::max);
        ends.push(records.last().map(|r| f(&r["lambda_hat"])).unwrap_or(f64::NAN));
    }
    check(
        analyze.code == 0
            && u(&nd["kernel_dim"]) == 0
            && legs.iter().all(|l| l.code == 0)
            && ends == vec![0.2, -0.2]
            && residual < 1e-10,
        format!("kernel {}, {count} records over two legs, max residual {residual:.2e}", nd["kernel_dim"]),
    )
}

fn criterion_11(fail: &Run) -> Outcome {
    let records = fail.records();
    let report = fail.report();
    let diags = report["payload"]["diagnostics"].as_array().cloned().unwrap_or_default();
    let last = records.last();
    let last_lambda = last.map(|r| f(&r["lambda_hat"])).unwrap_or(f64::NAN);
    let last_diag = diags.last();
    let ok = fail.code == 3
        && report["payload"]["termination"]["status"] == "failed"
        && last.is_some_and(|r| certified(r, 2) && r["flagged"] == false)
        && last_diag.is_some_and(|d| f(&d["lambda_hat"]) == last_lambda && diagnostics_ok(d));
    check(
        ok,
        format!(
            "exit {}, {} records, last lambda {:.6}, stopped at {}",
            fail.code,
            records.len(),
            last_lambda,
            report["payload"]["termination"]["lambda_hat"]
        ),
    )
}

const CIRCLE: &str = "[problem]\ninstance = \"cmc_circle\"\nh = 2.0\nn = 128\norder = \"spectral\"\n";

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let dir = tmp.path();

    let bundle = run(dir, "bundle", "verify-bundle", "[bundle]\nlambdas = [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0]\ndims = [2, 3]\nsamples = 200\nsection_points = 21\nsection_range = [-1.0, 1.0]\nbracket_lambdas = [-1.0, 0.0, 0.5, 1.0]\ntriples = 100\n", Some(1));
    let circle = run(
        dir,
        "circle",
        "continue",
        &format!("{CIRCLE}\n[path]\nstart = 1.0\nend = -3.0\nstep = {:?}\n", 4.0 / 60.0),
        Some(2),
    );
    let torus = run(
        dir,
        "torus",
        "continue",
        "[problem]\ninstance = \"harmonic_torus\"\nn = 64\nclass = [1, 0]\nq0 = [[1.0, 0.0], [0.0, 1.0]]\nq1 = [[4.0, 0.0], [0.0, 1.0]]\n\n[path]\nstart = 0.0\nend = 1.0\nstep = 0.05\n",
        Some(3),
    );
    let sphere = "[problem]\ninstance = \"harmonic_sphere\"\nn = 64\nlambda = 1.0\n";
    let sphere_analyze = run(dir, "sphere_analyze", "analyze", sphere, Some(4));
    let sphere_branch = run(
        dir,
        "sphere_branch",
        "continue",
        &format!("{sphere}\n[path]\nstart = 0.5\nend = 2.0\nstep = 0.1\n"),
        Some(5),
    );
    let profile = "[problem]\ninstance = \"cmc_profile\"\nh = 1.0\nn = 41\ninterval = [0.0, 1.0]\nradii = [1.0, 1.0]\nlambda = 0.0\n";
    let profile_analyze = run(dir, "profile_analyze", "analyze", profile, Some(6));
    let profile_up = run(
        dir,
        "profile_up",
        "continue",
        &format!("{profile}\n[path]\nstart = 0.0\nend = 0.2\nstep = 0.05\n"),
        Some(7),
    );
    let profile_down = run(
        dir,
        "profile_down",
        "continue",
        &format!("{profile}\n[path]\nstart = 0.0\nend = -0.2\nstep = 0.05\n"),
        Some(8),
    );
    let fail = run(
        dir,
        "circle_fail",
        "continue",
        &format!("{CIRCLE}\n[path]\nstart = -3.0\nend = -4.5\nstep = 0.1\nmin_step = 1e-4\n"),
        Some(9),
    );

    let outcomes: Vec<(usize, &str, Outcome)> = vec![
        (1, "bundle verification", criterion_1(&bundle)),
        (2, "section property", criterion_2(&bundle)),
        (3, "deformed bracket", criterion_3(&bundle)),
        (4, "CMC circle branch", criterion_4(&circle)),
        (5, "equivariant nondegeneracy", criterion_5(&circle)),
        (
            6,
            "operator diagnostics",
            criterion_6(&[&circle, &torus, &sphere_branch, &profile_up, &profile_down]),
        ),
        (7, "orbit congruence", criterion_7(dir, &circle)),
        (8, "harmonic torus branch", criterion_8(&torus)),
        (9, "harmonic sphere", criterion_9(&sphere_analyze, &sphere_branch)),
        (10, "CMC profile", criterion_10(&profile_analyze, &[&profile_up, &profile_down])),
        (11, "failure semantics", criterion_11(&fail)),
    ];
    let mut failed = 0;
    for (k, name, outcome) in &outcomes {
        match outcome {
            Ok(d) => println!("criterion {k:2} PASS  {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {k:2} FAIL  {name}: {d}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", outcomes.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
