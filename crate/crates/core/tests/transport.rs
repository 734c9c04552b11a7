mod common;

use phonon::config::demo_source;
use phonon::grid::GridConfig;
use phonon::inverse::forward_map_with;
use phonon::transport::{
    boundary_temperature, solve_forward, BoundarySource, NoSource, Source, TestWindow,
};
use phonon::Error;

#[test]
fn response_is_linear_in_the_source() {
    let s = common::paper_setup();
    let a = demo_source();
    let b = BoundarySource::new(0.3, 0.5, 1.2, [0.02, 0.05, 0.2]).unwrap();
    let base_a = boundary_temperature(&s.truth, &s.grid, &a, 1.0).unwrap();
    let base_b = boundary_temperature(&s.truth, &s.grid, &b, 1.0).unwrap();
    let combo = move |t: f64, mu: f64, w: f64| 2.0 * a.value(t, mu, w) - 0.5 * b.value(t, mu, w);
    let mixed = boundary_temperature(&s.truth, &s.grid, &combo, 1.0).unwrap();
    let scale = base_a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for ((m, x), y) in mixed.iter().zip(&base_a).zip(&base_b) {
        assert!((m - (2.0 * x - 0.5 * y)).abs() <= 1e-12 * scale);
    }
}

#[test]
fn no_source_gives_zero_solution() {
    let s = common::paper_setup();
    let traj = solve_forward(&s.truth, &s.grid, &NoSource, 1.0).unwrap();
    assert_eq!(traj.max_abs(), 0.0);
}

#[test]
fn information_moves_at_most_one_cell_per_step() {
    let s = common::paper_setup();
    let traj = solve_forward(&s.truth, &s.grid, &demo_source(), 1.0).unwrap();
    for n in 0..s.grid.nx() - 1 {
        for j in n + 1..s.grid.nx() {
            assert!(
                traj.slice(n, j).iter().all(|&v| v == 0.0),
                "cell {j} reached at step {n}"
            );
        }
    }
    assert!(traj.max_abs() > 0.0);
}

#[test]
fn boundary_measurement_converges_under_refinement() {
    let window = TestWindow {
        center: 1.0321,
        width: 0.08,
    };
    let measure = |k: f64| {
        let base = GridConfig::default();
        let s = common::setup_with(GridConfig {
            dx: base.dx / k,
            dt: base.dt / k,
            ..base
        });
        forward_map_with(&s.truth, &s.grid, &demo_source(), &window).unwrap()
    };
    let (a, b, c) = (measure(1.0), measure(2.0), measure(4.0));
    assert!((b - c).abs() < (a - b).abs(), "{a} {b} {c}");
}

#[test]
fn paper_grid_is_unstable_in_the_diffusive_scaling() {
    let s = common::paper_setup();
    let err = solve_forward(&s.truth, &s.grid, &NoSource, 0.1).unwrap_err();
    assert!(matches!(err, Error::Cfl { .. }));
    assert!(err.to_string().contains("max characteristic speed"));
}
