use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qre_core::dice::{scan_dice_grid, DiceGrid};
use qre_core::logit::solve_logit_multistart;
use qre_core::paradox::{premise_grid, prop1_bound_check};
use qre_core::sampling::argmax_counts;
use qre_core::structural::{Marginal, MarginalKind, PerturbationFamily};
use qre_core::{build_paradox_game, Execution, LogitParams, SolverConfig};

const MODES: [(&str, Execution); 2] = [
    ("serial", Execution::Serial),
    ("parallel", Execution::Parallel),
];

fn monte_carlo(c: &mut Criterion) {
    let mut g = c.benchmark_group("mc_argmax_counts");
    g.sample_size(10);
    let m = Marginal::new(MarginalKind::Normal, 1.0).unwrap();
    let x = [0.0, 0.3, -0.2, 0.5, 0.1];
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new(name, 1_000_000), &exec, |b, &exec| {
            b.iter(|| argmax_counts(&x, &m, 0, 1_000_000, 7, exec))
        });
    }
    g.finish();
}

fn dice_grid(c: &mut Criterion) {
    let mut g = c.benchmark_group("dice_grid_k4");
    g.sample_size(10);
    let d: Vec<f64> = (1..=6).map(f64::from).collect();
    let grid = DiceGrid {
        utilities: DiceGrid::premise_utilities(4, &d, &d),
        bases: DiceGrid::increasing_bases(4, 2.5, 10),
    };
    for (name, exec) in MODES {
        g.bench_with_input(
            BenchmarkId::new(name, grid.bases.len()),
            &exec,
            |b, &exec| b.iter(|| scan_dice_grid(4, &grid, exec).unwrap()),
        );
    }
    g.finish();
}

fn multistart(c: &mut Criterion) {
    let mut g = c.benchmark_group("logit_multistart");
    g.sample_size(10);
    let game = build_paradox_game(5, &[3, 2]).unwrap();
    let params = LogitParams::homogeneous(3, 2.0).unwrap();
    for (name, exec) in MODES {
        let cfg = SolverConfig::default().with_execution(exec);
        g.bench_with_input(BenchmarkId::new(name, 64), &cfg, |b, cfg| {
            b.iter(|| solve_logit_multistart(&game, &params, 63, cfg))
        });
    }
    g.finish();
}

fn quadrature_battery(c: &mut Criterion) {
    let mut g = c.benchmark_group("second_best_bound");
    g.sample_size(10);
    let families: Vec<_> = MarginalKind::ALL
        .iter()
        .map(|&k| PerturbationFamily::iid(1, k, 1.0).unwrap())
        .collect();
    let grid = premise_grid(5, 20);
    for (name, exec) in MODES {
        let cfg = SolverConfig::default().with_execution(exec);
        g.bench_with_input(
            BenchmarkId::new(name, families.len() * grid.len()),
            &cfg,
            |b, cfg| b.iter(|| prop1_bound_check(&families, &grid, 1e-6, cfg).unwrap()),
        );
    }
    g.finish();
}

criterion_group!(
    benches,
    monte_carlo,
    dice_grid,
    multistart,
    quadrature_battery
);
criterion_main!(benches);
