use std::path::PathBuf;

use pfdamage::config::RunConfig;
use pfdamage::control::control_1d_setup;
use pfdamage::problem::{healing_drive_2d, standard_2d, Problem};

fn preset(name: &str) -> RunConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    RunConfig::load(&path).unwrap()
}

fn same_problem(a: &Problem, b: &Problem) {
    assert_eq!(a.step, b.step);
    assert_eq!(a.initial, b.initial);
    assert_eq!(a.forcing, b.forcing);
    assert_eq!(a.grid().n_nodes(), b.grid().n_nodes());
    let ta = a.run().unwrap();
    let tb = b.run().unwrap();
    assert_eq!(ta.chi, tb.chi);
    assert_eq!(ta.u_final(), tb.u_final());
}

#[test]
fn standard_preset_matches_builder() {
    let cfg = preset("standard.toml");
    let mut from_file = cfg.problem().unwrap();
    from_file.step.snapshot_every = 1;
    same_problem(&from_file, &standard_2d(1e-3).unwrap());
}

#[test]
fn healing_preset_matches_builder() {
    let cfg = preset("healing.toml");
    same_problem(&cfg.problem().unwrap(), &healing_drive_2d(8, 1e-3, 2.0).unwrap());
}

#[test]
fn control_preset_matches_builder() {
    let cfg = preset("control_1d.toml");
    let problem = cfg.problem().unwrap();
    let (guess, ccfg) = cfg.control_setup(&problem).unwrap();
    let (p2, g2, c2) = control_1d_setup(20, 1e-4, 1e-3).unwrap();
    same_problem(&problem, &p2);
    assert_eq!(guess.coeffs, g2.coeffs);
    assert_eq!(guess.bounds, g2.bounds);
    assert_eq!(ccfg.chi_q, c2.chi_q);
    assert_eq!(ccfg.chi_t, c2.chi_t);
    assert_eq!(ccfg.beta_schedule, c2.beta_schedule);
    assert_eq!(ccfg.optimizer, c2.optimizer);
}

#[test]
fn presets_round_trip() {
    for name in ["standard.toml", "healing.toml", "control_1d.toml"] {
        let cfg = preset(name);
        let again = RunConfig::parse(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again, "{name}");
    }
}
