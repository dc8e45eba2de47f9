use std::sync::Arc;

use proptest::prelude::*;

use pfdamage::control::{project_admissible, ControlBasis, ControlMode, ControlVector};
use pfdamage::forcing::SpatialShape;
use pfdamage::grid::{assemble_mass, assemble_scalar_laplace, lumped_mass, Grid, Side};
use pfdamage::io::Snapshot;
use pfdamage::material::{extend_coefficient, quadratic_well, Penalty, PenaltyKind, StiffnessTensor};
use pfdamage::par::{self, Execution};
use pfdamage::piecewise::{PiecewisePoly, Poly};
use pfdamage::problem::{control_1d, quadratic_material};
use pfdamage::stepper::{damage_step, energy_audit, Discretization, StepConfig};
use pfdamage::verify::{scalar_oracle, ScalarStep};

fn kind() -> impl Strategy<Value = PenaltyKind> {
    prop_oneof![Just(PenaltyKind::MoreauYosida), Just(PenaltyKind::SmoothVariant)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn penalty_is_convex_monotone_and_vanishes_below_zero(
        x in -3.0f64..3.0, b1 in 1e-4f64..0.99, shrink in 0.01f64..1.0, kind in kind()
    ) {
        let p1 = Penalty::new(b1, kind).unwrap();
        let p2 = Penalty::new(b1 * shrink, kind).unwrap();
        prop_assert!(p2.value(x) >= p1.value(x));
        if x <= 0.0 {
            prop_assert_eq!(p1.value(x), 0.0);
            prop_assert_eq!(p1.slope(x), 0.0);
        }
        let h = 1e-4;
        let d2 = p1.value(x + h) - 2.0 * p1.value(x) + p1.value(x - h);
        prop_assert!(d2 >= -1e-12 * (1.0 + p1.value(x)));
        // slope is the derivative of the value
        if x.abs() > 2.0 * h {
            let fd = (p1.value(x + h) - p1.value(x - h)) / (2.0 * h);
            prop_assert!((fd - p1.slope(x)).abs() <= 1e-6 * (1.0 + p1.slope(x).abs()) + h / b1);
        }
    }

    #[test]
    fn shifted_polynomial_agrees(c in prop::collection::vec(-5.0f64..5.0, 1..6), s in -2.0f64..2.0, y in -2.0f64..2.0) {
        let p = Poly::new(c);
        let q = p.shifted(s);
        prop_assert!((q.eval(y) - p.eval(y + s)).abs() <= 1e-9 * (1.0 + p.eval(y + s).abs()));
    }

    #[test]
    fn antiderivative_differentiates_back(
        c in prop::collection::vec(-3.0f64..3.0, 1..5), d in prop::collection::vec(-3.0f64..3.0, 1..5), x in -3.0f64..3.0
    ) {
        let pw = PiecewisePoly::from_pieces(vec![0.0], vec![Poly::new(c), Poly::new(d)]).unwrap();
        let back = pw.antiderivative(0.0, 1.5).derivative();
        prop_assert!((back.eval(x) - pw.eval(x)).abs() <= 1e-9 * (1.0 + pw.eval(x).abs()));
    }

    /// `c~ = a + b x^2 + c x^3` with `b >= 0`, `b + c >= 0` is nonnegative on
    /// `[0, 1]` with a flat start. The extension is refused exactly when the
    /// ramp would end below zero.
    #[test]
    fn extension_splits_any_admissible_cubic(a in 0.0f64..2.0, b in 0.0f64..3.0, t in 0.0f64..1.0, delta in 0.2f64..2.0) {
        let c = -b + t * (b + 3.0);
        let c_tilde = PiecewisePoly::from_interval_pieces(vec![0.0, 1.0], vec![Poly::new(vec![a, 0.0, b, c])]).unwrap();
        // the slope ramps linearly to 0 over [1, 1 + delta]
        let end_value = a + b + c + 0.5 * delta * (2.0 * b + 3.0 * c);
        let split = match extend_coefficient(&c_tilde, delta) {
            Ok(s) => s,
            Err(e) => {
                prop_assert!(end_value < 1e-12, "rejected although c(1 + delta) = {}: {}", end_value, e);
                return Ok(());
            }
        };
        prop_assert!((split.c(1.0 + delta) - end_value).abs() <= 1e-9);
        let h = 1e-3;
        let top = split.c(1.0 + delta);
        for i in 0..=400 {
            let x = -4.0 + 8.0 * i as f64 / 400.0;
            prop_assert!(split.c1.eval(x + h) - 2.0 * split.c1.eval(x) + split.c1.eval(x - h) >= -1e-9);
            prop_assert!(split.c2.eval(x + h) - 2.0 * split.c2.eval(x) + split.c2.eval(x - h) <= 1e-9);
            prop_assert!(split.c(x) >= -1e-9);
            if (0.0..=1.0).contains(&x) {
                prop_assert!((split.c(x) - c_tilde.eval(x)).abs() <= 1e-9);
            }
            if x < 0.0 {
                prop_assert!((split.c(x) - a).abs() <= 1e-9);
            }
            if x > 1.0 + delta {
                prop_assert!((split.c(x) - top).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn mass_and_laplace_invariants(lx in 0.5f64..3.0, ly in 0.5f64..3.0, nx in 1usize..7, ny in 1usize..7) {
        let grid = Grid::new(2, &[lx, ly], &[nx, ny]).unwrap();
        let ones = vec![1.0; grid.n_nodes()];
        let m1 = assemble_mass(&grid).matvec(&ones);
        let lumped = lumped_mass(&grid);
        for (a, b) in m1.iter().zip(&lumped) {
            prop_assert!((a - b).abs() <= 1e-12 * lx * ly);
        }
        prop_assert!((lumped.iter().sum::<f64>() - lx * ly).abs() <= 1e-12 * lx * ly);
        let a1 = assemble_scalar_laplace(&grid).matvec(&ones);
        prop_assert!(a1.iter().all(|v| v.abs() <= 1e-12));
    }

    #[test]
    fn parallel_map_preserves_order(xs in prop::collection::vec(-1e6f64..1e6, 0..300)) {
        let f = |x: &f64| x.sin() * x;
        prop_assert_eq!(par::map(Execution::Sequential, &xs, f), par::map(Execution::Parallel, &xs, f));
    }

    #[test]
    fn snapshot_text_round_trips(vals in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 4)) {
        let snap = Snapshot { k: 2, t: vals[0], dim: 1, coords: vec![[vals[1], 0.0]], chi: vec![vals[2]], u: vec![vals[3]] };
        prop_assert_eq!(Snapshot::parse(&snap.to_text()).unwrap(), snap);
    }

    #[test]
    fn projection_lands_in_admissible_set(c0 in -5.0f64..5.0, c1 in -5.0f64..5.0, cap in 0.1f64..10.0) {
        let problem = control_1d(4, 1e-2).unwrap();
        let modes = vec![
            ControlMode { side: Side::Left, direction: [-1.0, 0.0], shape: SpatialShape::Uniform },
            ControlMode { side: Side::Right, direction: [1.0, 0.0], shape: SpatialShape::Uniform },
        ];
        let basis = Arc::new(ControlBasis::new(problem.grid(), &problem.step, modes, vec![0.0]).unwrap());
        let b = ControlVector::new(basis, vec![0.0, 0.0], vec![[-2.0, 2.0], [0.0, 3.0]], cap).unwrap().with_coeffs(vec![c0, c1]);
        let p = project_admissible(&b);
        prop_assert!(p.is_admissible());
        prop_assert_eq!(project_admissible(&p).coeffs, p.coeffs);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    /// Constant data stays constant and solves the scalar equation.
    #[test]
    fn homogeneous_step_matches_oracle(
        p in -0.5f64..1.5, w in 0.0f64..8.0, tau in 1e-3f64..0.2, lb in -4.0f64..-0.5, kind in kind()
    ) {
        let material = quadratic_material(1, quadratic_well(1.0, 1.0), 1.0).unwrap();
        let penalty = Penalty::new(10f64.powf(lb), kind).unwrap();
        let cfg = StepConfig::new(tau, tau, penalty).unwrap();
        let disc = Discretization::new(Grid::new(1, &[1.0], &[5]).unwrap(), material.stiffness(), &cfg.linear).unwrap();
        let n = disc.grid.n_nodes();
        let loads: Vec<f64> = disc.lumped.iter().map(|m| m * w).collect();
        let out = damage_step(&disc, &material, &cfg, &vec![p; n], &loads).unwrap();
        let oracle = scalar_oracle(&material, &penalty, &ScalarStep { chi_prev: p, strain_energy: w, tau }).unwrap();
        for chi in out.chi {
            prop_assert!((chi - oracle).abs() <= 1e-9, "{} vs {}", chi, oracle);
        }
    }

    /// Unforced runs from random smooth damage never violate the energy
    /// inequality.
    #[test]
    fn unforced_runs_dissipate(
        base in 0.3f64..1.0, amp in 0.0f64..0.2, beta in 1e-3f64..0.5, lambda in 0.0f64..2.0, strain in -0.5f64..0.5
    ) {
        let mut problem = control_1d(12, beta).unwrap();
        let grid = problem.grid().clone();
        problem.initial.chi0 = grid.sample(|q| base + amp * (std::f64::consts::PI * q[0]).cos());
        problem.initial.u0 = grid.sample(|q| strain * q[0] * q[0]);
        let material = pfdamage::material::MaterialLaw::from_split(
            &extend_coefficient(&pfdamage::material::quadratic_c_tilde(), 1.0).unwrap(),
            PiecewisePoly::constant(1.0),
            quadratic_well(1.0, 1.0),
            StiffnessTensor::isotropic(1, lambda, 1.0).unwrap(),
            1.0,
        ).unwrap();
        let disc = Discretization::new(grid, material.stiffness(), &problem.step.linear).unwrap();
        problem.material = Arc::new(material);
        problem.disc = Arc::new(disc);
        let traj = problem.run().unwrap();
        let audit = energy_audit(&traj);
        prop_assert!(traj.failure.is_none());
        prop_assert!(audit.passed(), "min relative slack {}", audit.min_relative_slack);
        prop_assert!(audit.energy_nonincreasing);
    }
}
