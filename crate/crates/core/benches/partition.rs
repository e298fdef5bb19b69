use cellassoc::{
    solve, solve_equilibrium_2d, BaseCost, Congestion, CongestionSpec, DensityField, Domain, EquilibriumConfig, Point,
    RadioParams, ShareRateModel, SolverConfig, Station,
};
use criterion::{criterion_group, criterion_main, Criterion};

fn stations() -> Vec<Station> {
    [(-3.0, -3.0), (3.0, -3.0), (3.0, 3.0), (-3.0, 3.0), (0.0, 0.0)]
        .iter()
        .map(|(x, y)| Station::at(Point::new(*x, *y)))
        .collect()
}

fn bench(c: &mut Criterion) {
    let d = DensityField::radial(Domain::rectangle((-4.0, 4.0), (-4.0, 4.0), 128, 128).unwrap(), 6.0).unwrap();
    let st = stations();
    let spec = CongestionSpec::multiplicative(
        BaseCost::DistancePower { exponent: 2.0 },
        vec![Congestion::Polynomial(vec![1.0, 2.0]); 5],
    );
    let model = ShareRateModel::new(st.clone(), RadioParams::with_sigma(0.3, 2.0, 1.0, 1.0).unwrap(), 100.0).unwrap();
    let solver_cfg = SolverConfig::default();
    let eq_cfg = EquilibriumConfig::default();

    let threads = rayon::current_num_threads();
    for (label, pool) in [
        ("1 thread".to_string(), rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap()),
        (format!("default pool ({threads} threads)"), rayon::ThreadPoolBuilder::new().build().unwrap()),
    ] {
        let mut group = c.benchmark_group(label);
        group.sample_size(10);
        group.bench_function("optimal 128x128", |b| {
            b.iter(|| pool.install(|| solve(&d, &st, &spec, &solver_cfg).unwrap()))
        });
        group.bench_function("equilibrium 128x128", |b| {
            b.iter(|| pool.install(|| solve_equilibrium_2d(&d, &model, &eq_cfg).unwrap()))
        });
        group.finish();
    }
}

criterion_group!(benches, bench);
criterion_main!(benches);
