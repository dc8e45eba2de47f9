//! Acceptance suite: ten criteria, one PASS/FAIL line each. Runs as a plain
//! binary (`harness = false`) and exits nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pfdamage::control::{beta_continuation, control_1d_setup, reduced_cost, solve_p_beta, CONTROL_1D_REFERENCE};
use pfdamage::forcing::{SpatialShape, TimeProfile, TractionTerm};
use pfdamage::grid::Side;
use pfdamage::material::{extend_coefficient, quadratic_well, subgradient_residual, Penalty, PenaltyKind};
use pfdamage::par::Execution;
use pfdamage::piecewise::{PiecewisePoly, Poly};
use pfdamage::problem::{healing_drive_2d, quadratic_material, standard_2d};
use pfdamage::stepper::{energy_audit, truncate_chi, VIOLATION_TOLERANCE};
use pfdamage::verify::{continuous_dependence_test, oracle_comparison, tau_sweep, Perturbation, PerturbationSpec};

type Outcome = Result<(bool, String), String>;

struct Criterion {
    name: &'static str,
    limit: Duration,
    check: fn() -> Outcome,
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn penalty_axioms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = String::new();
    let mut ok = true;
    for kind in [PenaltyKind::MoreauYosida, PenaltyKind::SmoothVariant] {
        for _ in 0..1000 {
            let x: f64 = rng.random_range(-5.0..5.0);
            let beta: f64 = 10f64.powf(rng.random_range(-6.0..0.0)).min(0.999);
            let beta2 = beta * rng.random_range(0.01..1.0);
            let p = Penalty::new(beta, kind).map_err(|e| e.to_string())?;
            let p2 = Penalty::new(beta2, kind).map_err(|e| e.to_string())?;
            let v = p.value(x);
            // (i) smaller beta, larger penalty
            let mono = p2.value(x) >= v;
            // (ii) unbounded growth for x > 0 along beta / 10^k
            let grows = x <= 0.0 || {
                let vals: Vec<f64> =
                    (0..8).map(|k| Penalty::new(beta * 10f64.powi(-k), kind).unwrap().value(x)).collect();
                vals.windows(2).all(|w| w[1] > w[0]) && vals[7] >= 1e6 * vals[0]
            };
            // (iii) zero on the nonpositive half-line
            let zero = x > 0.0 || (v == 0.0 && p.slope(x) == 0.0);
            // (iv) convexity, from the stored curvature and second differences
            let h = 1e-3 * (1.0 + x.abs());
            let d2 = p.value(x + h) - 2.0 * v + p.value(x - h);
            let convex = p.curvature(x) >= 0.0 && d2 >= -1e-12 * (1.0 + v.abs());
            // Moreau-Yosida envelope: inf_y |x - y|^2 / (2 beta) over y <= 0 is attained at min(x, 0)
            let closed = kind != PenaltyKind::MoreauYosida || {
                let y = x.min(0.0);
                (x - y) * (x - y) / (2.0 * beta) == v
            };
            if !(mono && grows && zero && convex && closed) {
                ok = false;
                worst = format!("{kind:?} fails at x = {x}, beta = {beta}");
            }
        }
    }
    Ok((ok, if ok { "1000 samples x 2 families, closed form exact".into() } else { worst }))
}

fn coefficient_construction() -> Outcome {
    let laws: [(&str, Vec<f64>); 3] =
        [("x^2", vec![0.0, 0.0, 1.0]), ("1", vec![1.0]), ("3x^2-2x^3", vec![0.0, 0.0, 3.0, -2.0])];
    let tol = 1e-8;
    let delta = 1.0;
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for (name, coeffs) in laws {
        let poly = Poly::new(coeffs.clone());
        let c_tilde =
            PiecewisePoly::from_interval_pieces(vec![0.0, 1.0], vec![poly.clone()]).map_err(|e| e.to_string())?;
        let split = extend_coefficient(&c_tilde, delta).map_err(|e| e.to_string())?;
        let (c1, c2) = (&split.c1, &split.c2);
        let c = |x: f64| c1.eval(x) + c2.eval(x);
        let h = 1e-3;
        let xs: Vec<f64> = (0..=20_000).map(|i| -10.0 + 20.0 * i as f64 / 20_000.0).collect();
        let mut bad = |what: &str, err: f64| {
            worst = worst.max(err);
            if err > tol {
                failures.push(format!("{name}: {what} off by {err:.2e}"));
            }
        };
        let c_top = c(1.0 + delta);
        let c_bottom = c(0.0);
        let slope = |f: &PiecewisePoly, x: f64| (f.eval(x + h) - f.eval(x - h)) / (2.0 * h);
        let (s1_lo, s1_hi) = (slope(c1, -10.0), slope(c1, 10.0));
        let (s2_lo, s2_hi) = (slope(c2, -10.0), slope(c2, 10.0));
        for &x in &xs {
            bad("c1 convexity", -(c1.eval(x + h) - 2.0 * c1.eval(x) + c1.eval(x - h)));
            bad("c2 concavity", c2.eval(x + h) - 2.0 * c2.eval(x) + c2.eval(x - h));
            bad("c >= 0", -c(x));
            if (0.0..=1.0).contains(&x) {
                bad("c = c~ on [0, 1]", (c(x) - poly.eval(x)).abs());
            }
            if x < 0.0 {
                bad("c constant below 0", (c(x) - c_bottom).abs());
            }
            if x > 1.0 + delta {
                bad("c constant above 1 + delta", (c(x) - c_top).abs());
            }
            // bounded slopes: c1', c2' never exceed their (flat) tail values
            let (s1, s2) = (slope(c1, x), slope(c2, x));
            bad("c1' bounded", (s1 - s1_hi).max(s1_lo - s1));
            bad("c2' bounded", (s2 - s2_lo).max(s2_hi - s2));
        }
    }
    let ok = failures.is_empty();
    Ok((ok, if ok { format!("3 laws on [-10, 10], worst {worst:.2e}") } else { failures.join("; ") }))
}

fn oracle_equivalence() -> Outcome {
    let material = quadratic_material(2, quadratic_well(1.0, 1.0), 1.0).map_err(|e| e.to_string())?;
    let r = oracle_comparison(&material, PenaltyKind::MoreauYosida, 100, 3).map_err(|e| e.to_string())?;
    let ok = r.cases.len() == 100 && r.passed(1e-9, 1e-5);
    Ok((ok, format!("max |chi - oracle| {:.2e}, gradient rel. error {:.2e}", r.max_error, r.max_gradient_error)))
}

fn energy_inequality() -> Outcome {
    let p = standard_2d(1e-3).map_err(|e| e.to_string())?;
    let traj = p.run().map_err(|e| e.to_string())?;
    let a = energy_audit(&traj);
    let min_rel = traj.records[1..]
        .iter()
        .map(|r| if r.slack_scale > 0.0 { r.slack / r.slack_scale } else { r.slack })
        .fold(f64::INFINITY, f64::min);
    let ok =
        traj.failure.is_none() && traj.completed_steps() == 50 && min_rel >= -VIOLATION_TOLERANCE && a.violations == 0;
    Ok((ok, format!("50 steps, min relative slack {min_rel:.3e}")))
}

fn irreversibility_limit() -> Outcome {
    let betas = [1e-1, 1e-2, 1e-3, 1e-4];
    let mut maxpos = Vec::new();
    let mut comp_ok = true;
    let mut worst_ratio = 0.0f64;
    for &beta in &betas {
        let p = healing_drive_2d(8, beta, 2.0).map_err(|e| e.to_string())?;
        let traj = p.run().map_err(|e| e.to_string())?;
        if let Some(f) = traj.failure {
            return Err(f);
        }
        let tau = traj.tau;
        let rates: Vec<Vec<f64>> =
            traj.chi.windows(2).map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| (a - b) / tau).collect()).collect();
        let max_rate = rates.iter().flatten().fold(0.0f64, |m, r| m.max(r.abs()));
        maxpos.push(rates.iter().flatten().fold(0.0f64, |m, &r| m.max(r)));
        let bound = 2.0 * beta * max_rate;
        for (k, rk) in rates.iter().enumerate() {
            for (i, &r) in rk.iter().enumerate() {
                let res = subgradient_residual(r, traj.xi[k + 1][i]);
                worst_ratio = worst_ratio.max(res / bound);
                comp_ok &= res <= bound;
            }
        }
    }
    let ok = maxpos[3] <= 0.1 * maxpos[0] && comp_ok;
    Ok((
        ok,
        format!(
            "max (chi_t)+ {:.3e} -> {:.3e} (ratio {:.2e}), worst residual / (2 beta max|rate|) {worst_ratio:.3}",
            maxpos[0],
            maxpos[3],
            maxpos[3] / maxpos[0]
        ),
    ))
}

fn tau_convergence() -> Outcome {
    let p = standard_2d(1e-3).map_err(|e| e.to_string())?;
    let reference = p.step.tau / 8.0;
    let r = tau_sweep(&p, &[0.1, 0.05, 0.025], reference, Execution::Parallel).map_err(|e| e.to_string())?;
    let ratios = r.error_ratios();
    let ok = ratios.len() == 2 && ratios.iter().all(|x| (1.6..=2.6).contains(x));
    let shown: Vec<String> = ratios.iter().map(|x| format!("{x:.3}")).collect();
    Ok((ok, format!("ratios [{}] against tau = {reference}", shown.join(", "))))
}

fn continuous_dependence() -> Outcome {
    let p = standard_2d(1e-3).map_err(|e| e.to_string())?;
    let spec = PerturbationSpec {
        direction: Perturbation::Traction {
            term: TractionTerm {
                side: Side::Right,
                direction: [1.0, 0.0],
                amplitude: 1.0,
                shape: SpatialShape::Uniform,
                profile: TimeProfile::Constant { value: 1.0 },
            },
        },
        magnitudes: vec![1e-4, 1e-3, 1e-2],
    };
    let r = continuous_dependence_test(&p, &spec, Execution::Parallel).map_err(|e| e.to_string())?;
    let ratios: Vec<f64> = r.rows.iter().map(|row| row.ratio).collect();
    let spread = ratios.iter().fold(0.0f64, |m, &x| m.max(x)) / ratios.iter().fold(f64::INFINITY, |m, &x| m.min(x));
    let ok = r.identical_lhs == 0.0 && spread <= 10.0;
    Ok((ok, format!("identical-data LHS {:e}, ratio max/min {spread:.5}", r.identical_lhs)))
}

fn truncation() -> Outcome {
    let p = healing_drive_2d(8, 1e-3, 8.0).map_err(|e| e.to_string())?;
    let traj = p.run().map_err(|e| e.to_string())?;
    let min_chi = traj.chi.iter().flatten().fold(f64::INFINITY, |m, &x| m.min(x));
    let t = truncate_chi(&p.disc, &p.material, &p.step, &traj, &p.forcing).map_err(|e| e.to_string())?;
    let ok = min_chi < 0.0 && t.negative_values > 0 && t.elasticity_delta <= 1e-12;
    Ok((
        ok,
        format!(
            "min chi {min_chi:.4}, {} negative values, elasticity residual change {:.1e}",
            t.negative_values, t.elasticity_delta
        ),
    ))
}

fn landscape_oracle() -> Outcome {
    let beta = 1e-3;
    let (p, guess, cfg) = control_1d_setup(20, beta, 1e-3).map_err(|e| e.to_string())?;
    let spacing = 0.2;
    let mut lattice = Vec::new();
    for i in 0..11 {
        for j in 0..11 {
            let b = vec![spacing * i as f64, spacing * j as f64];
            let (v, _) = reduced_cost(&p, &guess.with_coeffs(b.clone()), beta, &cfg).map_err(|e| e.to_string())?;
            lattice.push((b, v));
        }
    }
    let (best, best_v) = lattice.iter().min_by(|a, b| a.1.total_cmp(&b.1)).cloned().unwrap();
    let r = solve_p_beta(&p, beta, &cfg, &guess, Execution::Parallel).map_err(|e| e.to_string())?;
    let dist = r.coeffs.iter().zip(&best).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    // every lattice point the optimizer visited must carry the same cost
    let mut mismatch = 0.0f64;
    let mut shared = 0;
    for pt in &r.landscape {
        if let Some((_, v)) = lattice.iter().find(|(b, _)| b.iter().zip(&pt.coeffs).all(|(x, y)| x == y)) {
            mismatch = mismatch.max((v - pt.value).abs());
            shared += 1;
        }
    }
    let ok = dist <= spacing && shared > 0 && mismatch <= 1e-12;
    Ok((ok, format!(
        "lattice argmin {best:?} (j = {best_v:.4e}), optimizer {:?} (j = {:.4e}), Chebyshev distance {dist:.4}, landscape mismatch {mismatch:.1e} at {shared} shared points; reference {CONTROL_1D_REFERENCE:?}",
        r.coeffs.iter().map(|c| (c * 1e4).round() / 1e4).collect::<Vec<_>>(),
        r.value
    )))
}

fn continuation() -> Outcome {
    let (p, guess, cfg) = control_1d_setup(20, 1e-4, 1e-3).map_err(|e| e.to_string())?;
    let r = beta_continuation(&p, &cfg, &guess, true, Execution::Parallel).map_err(|e| e.to_string())?;
    let diffs = r.value_differences();
    let decreasing = diffs.len() == 3 && diffs.windows(2).all(|w| w[1] < w[0]);
    let tol = cfg.optimizer.step_tolerance;
    let a = r.adapted.as_ref().ok_or("no adapted run")?;
    let ok = r.failure.is_none() && decreasing && a.distance_to_anchor <= tol && a.result.value <= a.anchor_value;
    let shown: Vec<String> = diffs.iter().map(|d| format!("{d:.3e}")).collect();
    Ok((
        ok,
        format!(
            "|j* differences| [{}], adapted distance {:.1e} (tol {tol}), J~ {:.6e} <= J~(anchor) {:.6e}",
            shown.join(", "),
            a.distance_to_anchor,
            a.result.value,
            a.anchor_value
        ),
    ))
}

fn main() -> ExitCode {
    // `cargo test` passes filter arguments; this suite always runs in full
    let criteria = [
        Criterion { name: "1 penalty axioms", limit: secs(1), check: penalty_axioms },
        Criterion { name: "2 coefficient extension", limit: secs(1), check: coefficient_construction },
        Criterion { name: "3 damage-step oracle", limit: secs(10), check: oracle_equivalence },
        Criterion { name: "4 energy inequality", limit: secs(30), check: energy_inequality },
        Criterion { name: "5 irreversibility limit", limit: secs(60), check: irreversibility_limit },
        Criterion { name: "6 tau self-convergence", limit: secs(120), check: tau_convergence },
        Criterion { name: "7 continuous dependence", limit: secs(120), check: continuous_dependence },
        Criterion { name: "8 truncation", limit: secs(10), check: truncation },
        Criterion { name: "9 control landscape", limit: secs(120), check: landscape_oracle },
        Criterion { name: "10 beta continuation", limit: secs(600), check: continuation },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.check)();
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok((ok, d)) => (ok && elapsed <= c.limit, d),
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} [{}] {detail} ({:.2} s, limit {} s)",
            if ok { "PASS" } else { "FAIL" },
            c.name,
            elapsed.as_secs_f64(),
            c.limit.as_secs()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
