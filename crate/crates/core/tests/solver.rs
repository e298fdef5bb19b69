use approx::assert_abs_diff_eq;
use cellassoc::{
    brute_force_oracle, check_optimality, solve, total_cost, voronoi_partition, BaseCost, Congestion, CongestionSpec,
    DensityField, Domain, OracleMode, Point, SolverConfig, Station,
};

fn line(n: usize) -> Domain {
    Domain::interval(0.0, 1.0, n).unwrap()
}

#[test]
fn additive_optimum_matches_exhaustive_oracle() {
    let weights = vec![0.3, 0.9, 0.5, 0.2, 0.7, 0.4, 0.8, 0.1, 0.6, 0.3, 0.5, 0.9];
    let d = DensityField::from_weights(line(12), weights).unwrap();
    let stations = [Station::on_line(0.1), Station::on_line(0.5), Station::on_line(0.85)];
    let spec = CongestionSpec::additive(
        BaseCost::DistancePower { exponent: 2.0 },
        vec![Congestion::Polynomial(vec![0.0, 0.4]), Congestion::Zero, Congestion::Polynomial(vec![0.1, 0.0, 1.0])],
    );
    let (p, r) = solve(&d, &stations, &spec, &SolverConfig::default()).unwrap();
    let (_, best) = brute_force_oracle(&d, &stations, &spec, OracleMode::Exhaustive).unwrap();
    assert!(r.converged);
    assert_abs_diff_eq!(r.total_cost, best, epsilon = 1e-12);
    assert_abs_diff_eq!(total_cost(&p, &d, &stations, &spec).unwrap().total, best, epsilon = 1e-12);
}

#[test]
fn multiplicative_optimum_matches_exhaustive_oracle() {
    let weights = vec![0.5, 0.2, 0.8, 0.6, 0.3, 0.9, 0.4, 0.7, 0.2, 0.5, 0.6, 0.3, 0.8, 0.1];
    let d = DensityField::from_weights(line(14), weights).unwrap();
    let stations = [Station::on_line(0.2), Station::on_line(0.75)];
    let spec = CongestionSpec::multiplicative(
        BaseCost::DistancePower { exponent: 1.5 },
        vec![Congestion::Polynomial(vec![0.5, 1.0]), Congestion::Exp2 { scale: 2.0, power: 1.0, floor: 0.0 }],
    );
    let (_, r) = solve(&d, &stations, &spec, &SolverConfig::default()).unwrap();
    let (_, best) = brute_force_oracle(&d, &stations, &spec, OracleMode::Exhaustive).unwrap();
    assert_abs_diff_eq!(r.total_cost, best, epsilon = 1e-12 * best.abs());
}

#[test]
fn threshold_scan_agrees_with_solver_on_fine_grid() {
    let d = DensityField::from_fn(line(10_000), |p| 0.5 + p.x).unwrap();
    let stations = [Station::on_line(0.15), Station::on_line(0.8)];
    let spec = CongestionSpec::additive(
        BaseCost::DistancePower { exponent: 2.0 },
        vec![Congestion::Polynomial(vec![0.0, 0.3]), Congestion::Polynomial(vec![0.0, 0.1])],
    );
    let (_, r) = solve(&d, &stations, &spec, &SolverConfig::default()).unwrap();
    let (_, best) = brute_force_oracle(&d, &stations, &spec, OracleMode::ThresholdScan).unwrap();
    assert!((r.total_cost - best).abs() <= 1e-6 * best);
}

#[test]
fn solution_passes_optimality_check() {
    let d = DensityField::from_fn(line(4000), |p| 1.0 + 2.0 * p.x).unwrap();
    let stations = [Station::on_line(0.0), Station::on_line(0.4), Station::on_line(1.0)];
    let spec = CongestionSpec::additive(
        BaseCost::DistancePower { exponent: 2.0 },
        vec![Congestion::Polynomial(vec![0.0, 0.2]); 3],
    );
    let (p, r) = solve(&d, &stations, &spec, &SolverConfig::default()).unwrap();
    let c = check_optimality(&p, &d, &stations, &spec, 1e-9).unwrap();
    assert_eq!(c.violations, 0, "{c:?}");
    assert!(c.mass_residual <= 1e-12);
    assert_abs_diff_eq!(r.masses.iter().sum::<f64>(), d.total_mass(), epsilon = 1e-12);
}

#[test]
fn zero_congestion_is_voronoi_in_the_plane() {
    let d = DensityField::radial(Domain::rectangle((-2.0, 2.0), (-2.0, 2.0), 48, 48).unwrap(), 3.0).unwrap();
    let stations: Vec<Station> =
        [(-1.0, -1.0), (1.2, -0.5), (0.3, 1.4)].iter().map(|(x, y)| Station::at(Point::new(*x, *y))).collect();
    let spec = CongestionSpec::additive(BaseCost::DistancePower { exponent: 2.0 }, vec![Congestion::Zero; 3]);
    let (p, _) = solve(&d, &stations, &spec, &SolverConfig::default()).unwrap();
    assert_eq!(p.assignment, voronoi_partition(&d, &stations).unwrap().assignment);
}

#[test]
fn repeated_solves_are_bit_identical() {
    let d =
        DensityField::from_fn(Domain::rectangle((0.0, 1.0), (0.0, 1.0), 40, 40).unwrap(), |p| 1.0 + p.x * p.y).unwrap();
    let stations: Vec<Station> =
        [(0.2, 0.2), (0.8, 0.3), (0.5, 0.9)].iter().map(|(x, y)| Station::at(Point::new(*x, *y))).collect();
    let spec = CongestionSpec::multiplicative(
        BaseCost::DistancePower { exponent: 2.0 },
        vec![Congestion::Polynomial(vec![1.0, 2.0]); 3],
    );
    let cfg = SolverConfig::default();
    let (a, ra) = solve(&d, &stations, &spec, &cfg).unwrap();
    let (b, rb) = solve(&d, &stations, &spec, &cfg).unwrap();
    assert_eq!(a.assignment, b.assignment);
    assert_eq!(ra.to_json().unwrap(), rb.to_json().unwrap());
}

#[test]
fn density_csv_round_trips() {
    let d = DensityField::from_fn(Domain::rectangle((0.0, 2.0), (-1.0, 1.0), 5, 4).unwrap(), |p| 1.0 + p.x + p.y * p.y)
        .unwrap();
    let mut buf = Vec::new();
    d.write_csv(&mut buf).unwrap();
    let back = DensityField::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back.domain().num_cells(), 20);
    for (a, b) in d.weights().iter().zip(back.weights()) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-12 * a.abs());
    }
}

#[test]
fn partition_csv_has_one_row_per_cell() {
    let d = DensityField::uniform(line(10));
    let stations = [Station::on_line(0.0), Station::on_line(1.0)];
    let p = voronoi_partition(&d, &stations).unwrap();
    let mut buf = Vec::new();
    p.write_csv(d.domain(), &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "cell_index,x,station_index");
    assert_eq!(rows.len(), 11);
    assert!(rows[1].ends_with(",0") && rows[10].ends_with(",1"));
}
