use crushflow::analysis::collapse_report;
use crushflow::cantor::{center, limit_point, ScaleSequence};
use crushflow::field::{Reversed, Velocity};
use crushflow::flowmap::{
    analytic_cantor_path, analytic_cantor_trajectory, crush_map, in_core, integrate, ode_residual, Integrator,
};
use crushflow::{Address, Construction, Error, FieldKind, Params, TorusPoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn params() -> Params {
    Params::default()
}

#[test]
fn reversed_flow_over_first_stages_is_the_crushing_map_on_cores() {
    let p = params();
    let u = Reversed { construction: Construction::new(p).unwrap() };
    let integ = Integrator::new(1e-10);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 1..=3 {
        let t0 = p.final_time * (1.0 - p.tau(n) / p.tau_inf());
        let side = ScaleSequence::phi(p.nu).length(n);
        for k in 0..6 {
            let a = Address::from_index(2, n, rng.gen_range(0..1u64 << (2 * n)));
            let c = center(ScaleSequence::Theta, &a).unwrap();
            let frac = if k == 0 { 0.0 } else { 0.5 };
            let x = c.translated(&[rng.gen_range(-frac..=frac) * side, rng.gen_range(-frac..=frac) * side]);
            assert!(in_core(&p, &x, n));
            let got = integ.flow(&u, &x, t0, p.final_time).unwrap();
            let want = crush_map(&p, &x, n).unwrap();
            assert!(got.distance_inf(&want) <= 1e-4, "n={n}: {got:?} vs {want:?}");
        }
    }
}

#[test]
fn forward_flow_reaches_dyadic_centre_at_full_depth() {
    let p = params();
    let v = Velocity { construction: Construction::new(p).unwrap() };
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..3 {
        let a = Address::from_index(2, p.depth, rng.gen::<u64>() & ((1 << (2 * p.depth)) - 1));
        let x0 = center(ScaleSequence::phi(p.nu), &a).unwrap();
        let end = Integrator::new(1e-10).flow(&v, &x0, 0.0, p.tau(p.depth)).unwrap();
        let target = center(ScaleSequence::Theta, &a).unwrap();
        assert!(end.distance_inf(&target) < 1e-6);
        let analytic = analytic_cantor_trajectory(&p, &a, p.tau(p.depth)).unwrap();
        assert!(analytic.distance_inf(&target) < 1e-12);
    }
}

#[test]
fn limit_points_flow_close_to_their_dyadic_limit() {
    let p = params();
    let a = Address::uniform(2, p.depth, 1).unwrap();
    let x = limit_point(ScaleSequence::phi(p.nu), &a).unwrap();
    let at_end = analytic_cantor_trajectory(&p, &a, p.tau_inf()).unwrap();
    let dyadic = limit_point(ScaleSequence::Theta, &a).unwrap();
    assert!(at_end.distance_inf(&dyadic) <= 0.5 * ScaleSequence::Theta.length(p.depth) + 1e-12);
    assert!(x.distance_inf(&center(ScaleSequence::phi(p.nu), &a).unwrap()) <= ScaleSequence::phi(p.nu).length(p.depth));
}

#[test]
fn analytic_path_solves_the_ode() {
    let p = params();
    let v = Velocity { construction: Construction::new(p).unwrap() };
    let a = Address::from_index(2, 6, 0b1011_0110_0101);
    let (ws, we) = p.stage_window(3);
    let residual = |samples: usize| {
        let times: Vec<f64> = (0..=samples).map(|k| ws + (we - ws) * k as f64 / samples as f64).collect();
        ode_residual(&v, &analytic_cantor_path(&p, &a, &times).unwrap())
    };
    let coarse = residual(200);
    let fine = residual(400);
    assert!(coarse <= 1e-3, "{coarse}");
    assert!((coarse / fine - 4.0).abs() < 0.5, "{coarse} {fine}");
}

#[test]
fn trajectory_csv_layout() {
    let p = params();
    let v = Velocity { construction: Construction::new(p).unwrap() };
    let x0 = TorusPoint::new(vec![0.3, 0.7]);
    let traj = integrate(&v, &x0, 0.0, p.tau(2), 1e-8).unwrap();
    let csv = traj.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,x1,x2,err_est"));
    assert_eq!(lines.count(), traj.len());
    assert!(!csv.contains('\r'));
    let times: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
    assert!(times.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn time_range_errors() {
    let p = params();
    let c = Construction::new(p).unwrap();
    let v = Velocity { construction: c.clone() };
    assert!(matches!(v.checked_value(-0.1, &[0.1, 0.1]), Err(Error::TimeOutOfRange { .. })));
    assert!(v.checked_value(p.tau_inf(), &[0.1, 0.1]).unwrap().iter().all(|x| *x == 0.0));
    let u = Reversed { construction: c };
    assert!(matches!(u.checked_value(1.5, &[0.1, 0.1]), Err(Error::TimeOutOfRange { .. })));
    assert!(u.checked_value(0.0, &[0.2, 0.9]).unwrap().iter().all(|x| *x == 0.0));
}

#[test]
fn every_field_kind_builds() {
    let p = params();
    let p3 = Params::new(3, 0.75).unwrap();
    for kind in FieldKind::ALL {
        let pp = if kind == FieldKind::Usteady { p3 } else { p };
        let f = kind.build(&pp, 2, 0.5).unwrap();
        assert_eq!(f.dim(), pp.dim);
        let x = vec![0.4; pp.dim];
        assert_eq!(f.value(0.1, &x).len(), pp.dim);
    }
    assert!(FieldKind::Usteady.build(&p, 0, 0.5).is_err());
    assert!(FieldKind::Vi.build(&p, p.depth, 0.5).is_err());
    assert!("q".parse::<FieldKind>().is_err());
}

#[test]
fn collapse_report_serialises_with_fixed_names() {
    let r = collapse_report(&params(), 16, 3, true, 0.0).unwrap();
    let v = serde_json::to_value(&r).unwrap();
    for key in ["grid", "generation", "fraction", "volume", "density_ratio", "core_fraction", "images"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    assert_eq!(v["images"].as_array().unwrap().len(), 256);
}
