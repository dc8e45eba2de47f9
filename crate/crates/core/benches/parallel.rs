//! Sequential against rayon execution for the hot loops: weighted elasticity
//! assembly, nodal strain-energy loads, a full forward run and a beta sweep.
//! Build with `--no-default-features` to see the fallback path alone.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use pfdamage::grid::{ElasticityKernel, Grid};
use pfdamage::material::StiffnessTensor;
use pfdamage::par::Execution;
use pfdamage::problem::standard_2d_with;
use pfdamage::verify::beta_sweep;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("assembly");
    for cells in [32, 128] {
        for (name, exec) in MODES {
            let grid = Grid::new(2, &[1.0, 1.0], &[cells, cells]).unwrap().with_execution(exec);
            let kernel = ElasticityKernel::new(&grid, &StiffnessTensor::isotropic(2, 1.0, 1.0).unwrap()).unwrap();
            let weight: Vec<f64> = (0..grid.n_nodes()).map(|i| 0.5 + 0.4 * (i as f64).sin()).collect();
            let u: Vec<f64> = (0..grid.n_vector_dofs()).map(|i| 1e-3 * (i as f64).cos()).collect();
            group.bench_with_input(BenchmarkId::new(format!("elasticity/{name}"), cells), &cells, |b, _| {
                b.iter(|| kernel.assemble(&grid, &weight).unwrap())
            });
            group.bench_with_input(BenchmarkId::new(format!("strain_loads/{name}"), cells), &cells, |b, _| {
                b.iter(|| kernel.strain_energy_loads(&grid, &u))
            });
        }
    }
    group.finish();
}

fn forward_run(c: &mut Criterion) {
    let mut group = c.benchmark_group("forward_run");
    group.sample_size(10);
    for (name, exec) in MODES {
        let mut problem = standard_2d_with(32, 0.05, 1e-3, 1.0).unwrap();
        let mut disc = (*problem.disc).clone();
        disc.grid = disc.grid.with_execution(exec);
        problem.disc = std::sync::Arc::new(disc);
        group.bench_function(name, |b| b.iter(|| problem.run().unwrap()));
    }
    group.finish();
}

fn sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("beta_sweep");
    group.sample_size(10);
    let problem = standard_2d_with(16, 0.05, 1e-1, 1.0).unwrap();
    let betas = [1e-1, 1e-2, 1e-3, 1e-4];
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| beta_sweep(&problem, &betas, exec).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, assembly, forward_run, sweep);
criterion_main!(benches);
