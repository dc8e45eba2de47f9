//! `pfdamage` command-line driver.
//!
//! Exit codes: 0 success, 1 bad input or I/O, 2 numerical failure,
//! 3 a verification check or the optimizer's acceptance test failed.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pfdamage::config::RunConfig;
use pfdamage::control::{adapted_continuation, beta_continuation};
use pfdamage::io::{self, Snapshot};
use pfdamage::material::extend_coefficient;
use pfdamage::par::{self, Execution};
use pfdamage::stepper::{energy_audit, truncate_chi};
use pfdamage::verify::{beta_sweep, continuous_dependence_test, oracle_comparison, tau_sweep};
use pfdamage::Error;

#[derive(Parser)]
#[command(name = "pfdamage", version, about = "Phase-field damage solver with verification and boundary control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Directory for output files (created if missing).
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long)]
    threads: Option<usize>,
    /// Override every random seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Forward run: energy table, snapshots and the energy audit.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Executable checks of the scheme.
    Verify {
        #[arg(value_enum)]
        check: Check,
        #[command(flatten)]
        common: Common,
    },
    /// Penalty continuation for the boundary-control problem.
    Optimize {
        /// Solve the adapted problem (proximal term around an anchor control).
        #[arg(long)]
        adapted: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Convex/concave split of the configured coefficient.
    ExtendCoeff {
        /// Sample points for the table.
        #[arg(long, default_value_t = 2001)]
        samples: usize,
        /// Sampling interval.
        #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [-10.0, 10.0], allow_negative_numbers = true)]
        range: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Check {
    Beta,
    Tau,
    Contdep,
    Oracles,
    Audit,
    Truncation,
    All,
}

enum Failure {
    Error(Error),
    /// A run or optimizer that stopped early without an error value.
    Stopped(String),
    Checks(Vec<String>),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Error(e.into())
    }
}

struct Context {
    cfg: RunConfig,
    header: String,
    out: PathBuf,
    exec: Execution,
}

impl Context {
    fn new(common: &Common) -> Result<Self, Failure> {
        let mut cfg = RunConfig::load(&common.config)?;
        if let Some(seed) = common.seed {
            cfg.set_seed(seed);
        }
        par::init_threads(common.threads);
        let exec = match common.threads {
            Some(1) => Execution::Sequential,
            _ => Execution::Parallel,
        };
        let text = cfg.to_toml()?;
        let header = io::provenance_header(&text);
        std::fs::create_dir_all(&common.out_dir)?;
        io::write_file(&common.out_dir.join("config.toml"), &header, &text)?;
        Ok(Context { cfg, header, out: common.out_dir.clone(), exec })
    }

    fn write(&self, name: &str, body: &str) -> Result<(), Failure> {
        io::write_file(&self.out.join(name), &self.header, body)?;
        Ok(())
    }
}

fn report(results: &mut Vec<String>, name: &str, passed: bool, detail: String) {
    println!("{} {name}: {detail}", if passed { "PASS" } else { "FAIL" });
    if !passed {
        results.push(name.to_string());
    }
}

fn simulate(common: &Common) -> Result<(), Failure> {
    let ctx = Context::new(common)?;
    let problem = ctx.cfg.problem_with(ctx.exec)?;
    let traj = problem.run()?;
    ctx.write("energy.csv", &io::energy_csv(&traj.records))?;
    if ctx.cfg.output.write_snapshots {
        for k in 0..=traj.completed_steps() {
            if traj.u[k].is_some() {
                let snap = Snapshot::from_level(problem.grid(), &traj, k)?;
                ctx.write(&format!("snapshots/snap_{k:05}.csv"), &snap.to_text())?;
            }
        }
    }
    let audit = energy_audit(&traj);
    let summary = format!(
        "steps {}\nfinal_energy {}\naudit_violations {}\nmin_relative_slack {}\nfunctional_increases {}\n",
        traj.completed_steps(),
        traj.records.last().map_or(0.0, |r| r.total()),
        audit.violations,
        audit.min_relative_slack,
        audit.functional_increases
    );
    ctx.write("summary.txt", &summary)?;
    print!("{summary}");
    if let Some(msg) = traj.failure {
        return Err(Failure::Stopped(msg));
    }
    Ok(())
}

fn verify(check: Check, common: &Common) -> Result<(), Failure> {
    let ctx = Context::new(common)?;
    let v = ctx.cfg.verify.clone().unwrap_or_default();
    let problem = ctx.cfg.problem_with(ctx.exec)?;
    let run = |c: Check| check == Check::All || check == c;
    let mut failed = Vec::new();

    if run(Check::Oracles) {
        let r = oracle_comparison(&problem.material, ctx.cfg.time.penalty, v.oracle_samples, v.seed)?;
        let mut csv = String::from("chi_prev,strain_energy,tau,beta,solver,oracle,error\n");
        for c in &r.cases {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                c.step.chi_prev,
                c.step.strain_energy,
                c.step.tau,
                c.beta,
                c.solver,
                c.oracle,
                c.error()
            ));
        }
        ctx.write("oracles.csv", &csv)?;
        let detail = format!("max error {:.3e}, gradient {:.3e}", r.max_error, r.max_gradient_error);
        report(&mut failed, "oracles", r.passed(1e-9, 1e-5), detail);
    }
    if run(Check::Audit) || run(Check::Truncation) {
        let mut step = problem.step.clone();
        step.snapshot_every = 1;
        let traj = problem.run_with(&step, &problem.forcing)?;
        if run(Check::Audit) {
            ctx.write("energy.csv", &io::energy_csv(&traj.records))?;
            let a = energy_audit(&traj);
            let detail = format!("{} violations, min relative slack {:.3e}", a.violations, a.min_relative_slack);
            report(&mut failed, "audit", a.passed() && traj.failure.is_none(), detail);
        }
        if run(Check::Truncation) {
            match truncate_chi(&problem.disc, &problem.material, &step, &traj, &problem.forcing) {
                Ok(t) => {
                    let detail = format!(
                        "{} negative values, elasticity delta {:.3e}, interior damage delta {:.3e}",
                        t.negative_values, t.elasticity_delta, t.damage_delta_interior
                    );
                    report(&mut failed, "truncation", t.elasticity_delta <= 1e-12, detail);
                }
                Err(e @ Error::TheoremPrecondition(_)) if check == Check::All => {
                    println!("SKIP truncation: {e}");
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    if run(Check::Beta) {
        let r = beta_sweep(&problem, &v.betas, ctx.exec)?;
        ctx.write("beta_sweep.csv", &io::sweep_csv(&r))?;
        let maxpos: Vec<String> = r.points.iter().map(|p| format!("{:.3e}", p.max_positive_rate)).collect();
        report(&mut failed, "beta", r.passed, format!("max positive rate [{}]", maxpos.join(", ")));
    }
    if run(Check::Tau) {
        let r = tau_sweep(&problem, &v.taus, v.tau_reference, ctx.exec)?;
        ctx.write("tau_sweep.csv", &io::sweep_csv(&r))?;
        let ratios: Vec<String> = r.error_ratios().iter().map(|x| format!("{x:.3}")).collect();
        let detail =
            format!("error ratios [{}], fitted rate {:.3}", ratios.join(", "), r.fitted_rate.unwrap_or(f64::NAN));
        report(&mut failed, "tau", r.passed, detail);
    }
    if run(Check::Contdep) {
        match &v.perturbation {
            Some(spec) => match continuous_dependence_test(&problem, spec, ctx.exec) {
                Ok(r) => {
                    ctx.write("dependence.csv", &io::dependence_csv(&r))?;
                    let detail =
                        format!("ratio spread {:.4}, identical-data distance {:e}", r.ratio_spread, r.identical_lhs);
                    report(&mut failed, "contdep", r.passed(), detail);
                }
                Err(e @ Error::TheoremPrecondition(_)) if check == Check::All => println!("SKIP contdep: {e}"),
                Err(e) => return Err(e.into()),
            },
            None if check == Check::All => println!("SKIP contdep: no [verify.perturbation] section"),
            None => return Err(Error::Config("verify: contdep needs [verify.perturbation]".into()).into()),
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Checks(failed))
    }
}

fn optimize(adapted: bool, common: &Common) -> Result<(), Failure> {
    let ctx = Context::new(common)?;
    let problem = ctx.cfg.problem_with(ctx.exec)?;
    let (guess, cfg) = ctx.cfg.control_setup(&problem)?;
    let cont = if adapted && cfg.anchor.is_some() {
        adapted_continuation(&problem, &cfg, &guess, ctx.exec)?
    } else {
        beta_continuation(&problem, &cfg, &guess, adapted, ctx.exec)?
    };
    ctx.write("continuation.csv", &io::continuation_csv(&cont))?;
    for l in &cont.levels {
        println!("beta {:e}: value {:.6e}, coeffs {:?}, evals {}", l.beta, l.value, l.coeffs, l.evals);
    }
    if let Some(last) = cont.levels.last() {
        ctx.write("controls.csv", &io::controls_csv(&guess.basis, &last.coeffs))?;
    }
    if let Some(a) = &cont.adapted {
        ctx.write("adapted_controls.csv", &io::controls_csv(&guess.basis, &a.result.coeffs))?;
        ctx.write("adapted_landscape.csv", &io::landscape_csv(&a.result))?;
        println!("adapted: value {:.6e}, distance to anchor {:.3e}", a.result.value, a.distance_to_anchor);
    }
    if let Some(msg) = &cont.failure {
        return Err(Failure::Stopped(msg.clone()));
    }
    let mut failed = Vec::new();
    let diffs: Vec<String> = cont.value_differences().iter().map(|d| format!("{d:.3e}")).collect();
    let passed = cont.passed(cfg.optimizer.step_tolerance);
    report(&mut failed, "continuation", passed, format!("value differences [{}]", diffs.join(", ")));
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Checks(failed))
    }
}

#[allow(clippy::neg_cmp_op_on_partial_ord)]
fn extend_coeff(samples: usize, range: &[f64], common: &Common) -> Result<(), Failure> {
    let ctx = Context::new(common)?;
    let (lo, hi) = (range[0], range[1]);
    if !(lo < hi) || samples == 0 {
        return Err(Error::Config("extend-coeff: need LO < HI and at least one sample".into()).into());
    }
    let m = &ctx.cfg.material;
    let split = extend_coefficient(&m.c_tilde.c_tilde()?, m.delta)?;
    ctx.write("split_pieces.csv", &io::split_pieces_csv(&split))?;
    ctx.write("split_samples.csv", &io::split_samples_csv(&split, lo, hi, samples))?;
    println!("lambda1 {} lambda2 {} delta {}", split.lambda1 + 0.0, split.lambda2 + 0.0, split.delta);
    Ok(())
}

fn exit_code(f: &Failure) -> u8 {
    match f {
        Failure::Checks(_) => 3,
        Failure::Error(e) if e.is_numerical() => 2,
        Failure::Stopped(_) => 2,
        Failure::Error(_) => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (result, out) = match &cli.command {
        Command::Simulate { common } => (simulate(common), &common.out_dir),
        Command::Verify { check, common } => (verify(*check, common), &common.out_dir),
        Command::Optimize { adapted, common } => (optimize(*adapted, common), &common.out_dir),
        Command::ExtendCoeff { samples, range, common } => (extend_coeff(*samples, range, common), &common.out_dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Error(e) => eprintln!("error: {e}"),
                Failure::Stopped(msg) => eprintln!("stopped early: {msg}"),
                Failure::Checks(names) => {
                    eprintln!("failed checks: {} (outputs in {})", names.join(", "), out.display())
                }
            }
            ExitCode::from(exit_code(&f))
        }
    }
}
