use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use rlgl_core::{
    assemble, generate_paper_scenario, run, solve, QpProblem, ScenarioConfig, SimulationLog,
};

/// One mid-game instant of the reference scenario, while robots are bunched.
struct Snapshot {
    config: ScenarioConfig,
    log: SimulationLog,
    index: usize,
}

fn snapshot() -> Snapshot {
    let mut config = generate_paper_scenario(42);
    config.schedule.duration = 10.0;
    let log = run(&config).expect("reference scenario runs");
    Snapshot {
        config,
        log,
        index: 500,
    }
}

fn bench_assemble_and_solve(c: &mut Criterion) {
    let s = snapshot();
    let rec = &s.log.records[s.index];
    let pg = &s.config.playground;
    let robots = &s.config.robots;

    c.bench_function("assemble 22 robots", |b| {
        b.iter(|| {
            for i in 0..robots.len() {
                black_box(assemble(rec.time, i, black_box(&rec.states), robots, pg).unwrap());
            }
        })
    });

    let problems: Vec<QpProblem> = (0..robots.len())
        .map(|i| QpProblem {
            u_nominal: rec.nominal[i].expect("live robot"),
            rows: assemble(rec.time, i, &rec.states, robots, pg).unwrap().rows,
            u_box: robots[i].u_max,
            slack_weight: s.config.slack_weight,
        })
        .collect();
    c.bench_function("solve 22 filters", |b| {
        b.iter(|| {
            for p in &problems {
                black_box(solve(black_box(p)));
            }
        })
    });
}

fn bench_run(c: &mut Criterion) {
    let mut config = generate_paper_scenario(42);
    config.schedule.duration = 2.0;
    let mut group = c.benchmark_group("game");
    group.sample_size(10);
    group.bench_function("22 robots, 2 s", |b| {
        b.iter(|| run(black_box(&config)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_assemble_and_solve, bench_run);
criterion_main!(benches);
