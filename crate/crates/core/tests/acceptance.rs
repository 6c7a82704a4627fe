//! Acceptance gate: one PASS/FAIL line per criterion.

use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use chronexp::dyson::{
    self, airy_path, check_inverse_identity, chron_equiv_check, product_integral_errors, random_smooth_path,
};
use chronexp::lie::{residual, Generator};
use chronexp::numeric::{catalog, catalog_entry, compare_series_to_reference, CatalogEntry};
use chronexp::{parse_problem, Expr, ProblemKind};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../problems")
        .join(name)
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let out = f()?;
    let elapsed = start.elapsed();
    if elapsed > limit {
        return Err(format!("{out}; took {elapsed:.2?}, limit {limit:?}"));
    }
    Ok(format!("{out} in {elapsed:.2?}"))
}

fn residual_criterion() -> Outcome {
    timed(Duration::from_secs(10), || {
        let entries = catalog();
        if entries.len() != 8 {
            return Err(format!("catalog has {} entries, expected 8", entries.len()));
        }
        for e in &entries {
            let sol = Generator::new(&e.problem)
                .lie_coefficients(6)
                .map_err(|x| x.to_string())?;
            let report = residual(&sol, &e.problem).map_err(|x| x.to_string())?;
            if report.residuals.iter().any(|r| r.len() != 6) {
                return Err(format!("{}: residual not checked through order 5", e.name));
            }
            if !report.passed() {
                return Err(format!(
                    "{}: nonzero residual at order {:?}",
                    e.name,
                    report.first_failing_order()
                ));
            }
        }
        Ok("8 catalog problems, exact zero residual through order 5".into())
    })
}

fn polynomial_entries() -> Vec<CatalogEntry> {
    ["riccati", "exponential", "explicit_time", "harmonic", "lotka_volterra"]
        .iter()
        .map(|n| catalog_entry(n).expect("catalog entry"))
        .collect()
}

fn equivalence_criterion() -> Outcome {
    timed(Duration::from_secs(30), || {
        for e in polynomial_entries() {
            let report = chron_equiv_check(&e.problem, 6).map_err(|x| x.to_string())?;
            if report.entries.len() != 7 * e.problem.field_count() {
                return Err(format!("{}: wrong number of compared orders", e.name));
            }
            if let Some(m) = report.first_mismatch() {
                return Err(format!("{}: field {} differs at order {}", e.name, m.field, m.order));
            }
        }
        Ok("Picard iterate == Lie series, orders 0..=6, 5 problems".into())
    })
}

fn inverse_criterion() -> Outcome {
    let airy = check_inverse_identity(&airy_path(0.0, 1.0, 1e-2).unwrap()).residual;
    let random = check_inverse_identity(&random_smooth_path(4, 0, 0.0, 1.0, 1e-2).unwrap()).residual;
    let msg = format!("airy {airy:.2e}, random 4x4 {random:.2e} (bound 1e-11)");
    if airy <= 1e-11 && random <= 1e-11 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn homomorphism_criterion() -> Outcome {
    let mut count = 0;
    for e in catalog() {
        let p = &e.problem;
        let c = Expr::sym(p.initial_symbol(0));
        let functions = match (p.kind, e.name) {
            (ProblemKind::Pde, "heat" | "burgers") => vec![c.clone() * Expr::jet(0, &[1])],
            (ProblemKind::Pde, _) => continue,
            _ => vec![c.clone().pow(2), c.pow(3)],
        };
        let g = Generator::new(p);
        for f in functions {
            let report = g.check_homomorphism(&f, 5).map_err(|x| x.to_string())?;
            if report.orders.len() != 6 {
                return Err(format!("{}: wrong number of orders", e.name));
            }
            if let Some(n) = report.first_mismatch() {
                return Err(format!("{} with {f}: mismatch at order {n}", e.name));
            }
            count += 1;
        }
    }
    Ok(format!("{count} (problem, G) pairs exact through order 5"))
}

fn convergence_criterion() -> Outcome {
    let offsets = [0.2, 0.1, 0.05, 0.025];
    let points = [0.3, 0.7, 1.1, 1.5, 1.9];
    let mut slopes = Vec::new();
    let mut ok = true;
    for name in ["riccati", "heat"] {
        let e = catalog_entry(name).unwrap();
        for n in [2u32, 4, 6] {
            let sol = Generator::new(&e.problem)
                .lie_coefficients(n)
                .map_err(|x| x.to_string())?;
            let table = compare_series_to_reference(&sol, &e, &offsets, &points).map_err(|x| x.to_string())?;
            let slope = table.slope();
            ok &= (slope - (n as f64 + 1.0)).abs() <= 0.4;
            slopes.push(format!("{name} N={n}: {slope:.2}"));
        }
    }
    let msg = slopes.join(", ");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn closed_form_criterion() -> Outcome {
    let r = catalog_entry("riccati").unwrap();
    let sol = Generator::new(&r.problem).lie_coefficients(8).unwrap();
    let b = r.initial_bindings(sol.coeffs.iter().flatten(), &[]).unwrap();
    let riccati_err = (sol.eval(0.1, &b).unwrap()[0] - 1.0 / 1.1).abs();

    let h = catalog_entry("heat").unwrap();
    let sol = Generator::new(&h.problem).lie_coefficients(6).unwrap();
    let mut heat_err: f64 = 0.0;
    for x in [0.0, 0.3, 1.0, 2.0, 3.0] {
        let b = h.initial_bindings(sol.coeffs.iter().flatten(), &[x]).unwrap();
        let exact = (-0.05f64).exp() * x.sin();
        heat_err = heat_err.max((sol.eval(0.05, &b).unwrap()[0] - exact).abs());
    }
    let msg = format!("riccati {riccati_err:.2e} (bound 1e-8), heat {heat_err:.2e} (bound 1e-9)");
    if riccati_err <= 1e-8 && heat_err <= 1e-9 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn product_order_criterion() -> Outcome {
    let steps = [10, 30, 100, 300, 1000];
    let mut msgs = Vec::new();
    let mut ok = true;
    let paths = [
        ("airy", airy_path(0.0, 1.0, 0.1).unwrap()),
        ("random 4x4", random_smooth_path(4, 0, 0.0, 1.0, 0.1).unwrap()),
    ];
    for (name, path) in paths {
        let pts = product_integral_errors(&path, &steps).map_err(|x| x.to_string())?;
        let slope = dyson::loglog_slope(&pts);
        ok &= (slope - 2.0).abs() <= 0.3;
        msgs.push(format!("{name} slope {slope:.3}"));
    }
    let msg = format!("{} over h in [1e-3, 1e-1]", msgs.join(", "));
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn negative_control_criterion() -> Outcome {
    let path = fixture("riccati_sign_flipped.json");
    let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
    let flipped = parse_problem(&text).map_err(|e| e.to_string())?;
    let reference = catalog_entry("riccati").unwrap();
    let sol = Generator::new(&flipped).lie_coefficients(6).unwrap();
    let report = residual(&sol, &reference.problem).map_err(|e| e.to_string())?;
    let order = report.first_failing_order();
    if order != Some(1) {
        return Err(format!("residual first fails at {order:?}, expected order 1"));
    }
    let out = Command::new(env!("CARGO_BIN_EXE_chronexp"))
        .args([
            "verify",
            path.to_str().unwrap(),
            "--suite",
            "all",
            "--reference",
            "riccati",
        ])
        .output()
        .map_err(|e| e.to_string())?;
    let stdout = String::from_utf8_lossy(&out.stdout);
    if out.status.code() != Some(3) {
        return Err(format!("verify exited with {:?}, expected 3", out.status.code()));
    }
    if !stdout.contains("first failing order 1") {
        return Err("verify output does not name order 1".into());
    }
    Ok("residual fails at order 1; verify exits 3".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("defining-equation residual", residual_criterion),
        ("chronological/exponential equivalence", equivalence_criterion),
        ("inverse identity", inverse_criterion),
        ("homomorphism", homomorphism_criterion),
        ("convergence order", convergence_criterion),
        ("closed-form reproduction", closed_form_criterion),
        ("product-integral order", product_order_criterion),
        ("negative control", negative_control_criterion),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(msg) => println!("criterion {} PASS {name}: {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {} FAIL {name}: {msg}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
