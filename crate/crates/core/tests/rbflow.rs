mod common;

use std::sync::Arc;

use approx::assert_abs_diff_eq;
use common::random_points;
use rblab::rbflow::{
    exact_cigar_u, flow_residual_of_example1, initial_state, rhs, run, step, Boundary, DtPolicy,
    FlowError, FlowState, InitProfile, TRAJECTORY_CSV_HEADER,
};

#[test]
fn exact_solution_examples() {
    assert_eq!(exact_cigar_u(0.0, 0.0, 0.0), 0.0);
    assert_abs_diff_eq!(
        exact_cigar_u(1.0, 0.0, 0.0),
        -0.5 * 2f64.ln(),
        epsilon = 1e-16
    );
}

#[test]
fn rhs_examples() {
    let s = FlowState::from_fn(16, 16, 0.25, (0.0, 0.0), 0.2, Boundary::Periodic, |_, _| {
        -0.4
    })
    .unwrap();
    assert!(rhs(&s).unwrap().iter().all(|v| *v == 0.0));
    let (s, _) = initial_state(
        InitProfile::TorusPerturb,
        0.5,
        2.0 * std::f64::consts::PI / 32.0,
    )
    .unwrap();
    assert!(rhs(&s).unwrap().iter().all(|v| *v == 0.0));
    let (s, _) = initial_state(InitProfile::Cigar, 0.0, 1.0 / 32.0).unwrap();
    let mid = (s.nx / 2) * s.ny + s.ny / 2;
    assert_abs_diff_eq!(rhs(&s).unwrap()[mid], -2.0, epsilon = 1e-3);
}

#[test]
fn rhs_of_exact_cigar_matches_time_derivative() {
    let h = 2e-4;
    for (k, p) in random_points(&[-3.0, -3.0, 0.0], &[3.0, 3.0, 0.5], 100, 91)
        .iter()
        .enumerate()
    {
        let (x, y, t) = (p[0], p[1], p[2]);
        let f: Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync> = Arc::new(exact_cigar_u);
        let mut s = FlowState::from_fn(
            3,
            3,
            h,
            (x - h, y - h),
            0.0,
            Boundary::Dirichlet {
                label: "exact".into(),
                f,
            },
            |a, b| exact_cigar_u(a, b, t),
        )
        .unwrap();
        s.time = t;
        let e = (4.0 * t).exp();
        let analytic = -2.0 * e / (e + x * x + y * y);
        let r = rhs(&s).unwrap()[4];
        assert!(
            (r - analytic).abs() < 1e-6,
            "point {k} {p:?}: {r} vs {analytic}"
        );
    }
}

#[test]
fn half_coupling_leaves_state_bitwise_unchanged() {
    for profile in [InitProfile::Cigar, InitProfile::TorusPerturb] {
        let h = if profile == InitProfile::Cigar {
            1.0 / 8.0
        } else {
            0.1
        };
        let (s, _) = initial_state(profile, 0.5, h).unwrap();
        let (end, traj) = run(&s, 0.1, DtPolicy::Fixed(0.01), None).unwrap();
        assert_eq!(traj.steps, 10);
        assert!(end
            .u
            .iter()
            .zip(&s.u)
            .all(|(a, b)| a.to_bits() == b.to_bits()));
        let one = step(&s, 0.05).unwrap();
        assert!(one
            .u
            .iter()
            .zip(&s.u)
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}

#[test]
fn flat_torus_is_a_fixed_point() {
    let (s, _) = initial_state(InitProfile::Flat, 0.0, 0.2).unwrap();
    let (end, traj) = run(&s, 1.0, DtPolicy::default(), None).unwrap();
    assert!(traj
        .rows
        .iter()
        .all(|r| r.max_abs_s == 0.0 && r.area == traj.rows[0].area));
    assert_eq!(end.u, s.u);
}

#[test]
fn torus_curvature_decays_monotonically() {
    for rho in [0.0, 0.1, 0.2] {
        let (s, _) = initial_state(
            InitProfile::TorusPerturb,
            rho,
            2.0 * std::f64::consts::PI / 64.0,
        )
        .unwrap();
        let (_, traj) = run(&s, 2.0, DtPolicy::default(), None).unwrap();
        let rows = &traj.rows[2..];
        for w in rows.windows(2) {
            assert!(
                w[1].max_abs_s <= w[0].max_abs_s,
                "rho={rho} at t={}",
                w[1].time
            );
        }
        assert!(traj.last().max_abs_s < 0.5 * traj.rows[0].max_abs_s);
        assert!(traj.rows.iter().all(|r| r.sup_err.is_none()));
    }
}

#[test]
fn coarse_cigar_tracks_exact_solution() {
    let (s, reference) = initial_state(InitProfile::Cigar, 0.0, 1.0 / 8.0).unwrap();
    let reference = reference.expect("exact reference at rho = 0");
    let (end, traj) = run(&s, 0.1, DtPolicy::default(), Some(&reference)).unwrap();
    assert_abs_diff_eq!(end.time, 0.1, epsilon = 1e-15);
    let err = traj.last().sup_err.unwrap();
    assert!(err < 5e-3 * 16.0, "{err:e}");
    assert_eq!(traj.rows[0].sup_err, Some(0.0));
}

#[test]
fn cfl_and_parameter_errors() {
    let (s, _) = initial_state(InitProfile::TorusPerturb, 0.0, 0.1).unwrap();
    let bound = s.cfl_bound();
    assert!(matches!(
        run(&s, 1.0, DtPolicy::Fixed(2.0 * bound), None),
        Err(FlowError::Cfl { .. })
    ));
    assert!(matches!(
        initial_state(InitProfile::Cigar, 0.0, 0.3),
        Err(FlowError::Parameter(_))
    ));
    assert!(matches!(
        initial_state(InitProfile::Flat, 0.0, -1.0),
        Err(FlowError::Parameter(_))
    ));
    let (s, _) = initial_state(InitProfile::Flat, 0.7, 0.5).unwrap();
    assert_eq!(
        run(&s, 1.0, DtPolicy::default(), None).unwrap_err(),
        FlowError::Refused { rho: 0.7 }
    );
}

#[test]
fn non_finite_state_is_reported_as_blow_up() {
    let mut s = FlowState::from_fn(16, 16, 0.4, (0.0, 0.0), 0.0, Boundary::Periodic, |x, y| {
        0.1 * (x + y).sin()
    })
    .unwrap();
    s.u[37] = f64::NAN;
    match run(&s, 1.0, DtPolicy::default(), None) {
        Err(FlowError::BlowUp {
            steps, trajectory, ..
        }) => {
            assert_eq!(steps, 1);
            assert_eq!(trajectory.rows.len(), 1);
        }
        other => panic!("expected blow-up, got {other:?}"),
    }
}

#[test]
fn example1_flow_residual() {
    assert!(flow_residual_of_example1(0.0, 0.3).unwrap() < 1e-8);
    for rho in [0.25, 0.5] {
        // rhs vanishes at rho = 1/2, leaving sup |∂u/∂t| = 2(1−ρ)e^{A}/D
        let r = flow_residual_of_example1(rho, 0.0).unwrap();
        assert!(r > 0.0);
        if rho == 0.5 {
            assert_abs_diff_eq!(r, 2.0 * (1.0 - rho), epsilon = 1e-12);
        }
    }
    // residual is 2ρE/(E + x² + y²): its sup sits at the origin and stays 2ρ for all t
    for t in [0.0, 1.0, 5.0] {
        assert_abs_diff_eq!(
            flow_residual_of_example1(0.25, t).unwrap(),
            0.5,
            epsilon = 1e-12
        );
    }
    assert!(flow_residual_of_example1(1.5, 0.0).is_err());
}

#[test]
fn trajectory_csv_is_stable() {
    assert_eq!(TRAJECTORY_CSV_HEADER, "time,max_abs_S,area,sup_err");
    let (s, _) = initial_state(InitProfile::Flat, 0.0, 1.0).unwrap();
    let (_, traj) = run(&s, 0.5, DtPolicy::default(), None).unwrap();
    let row = traj.last().csv_row();
    assert_eq!(row.split(',').count(), 4);
    assert!(row.ends_with(','));
}
