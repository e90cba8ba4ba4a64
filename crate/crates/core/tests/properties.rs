use crushflow::blob::{BlobDirection, Cutoff, StationaryBlob};
use crushflow::bump::bump;
use crushflow::cantor::{
    box_dimension, cantor_address, center, decode_address, generation_volume, min_image, shifted_center, wrap, Cube,
    ScaleSequence,
};
use crushflow::flowmap::{crush_map, expand_map, in_core};
use crushflow::{Address, Construction, Params, TorusPoint};
use proptest::prelude::*;

fn address(dim: usize, depth: usize) -> impl Strategy<Value = Address> {
    any::<u64>().prop_map(move |bits| Address::from_index(dim, depth, bits & ((1u64 << (dim * depth)) - 1)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn wrap_lands_in_unit_interval(x in -1e6f64..1e6) {
        let w = wrap(x);
        prop_assert!((0.0..1.0).contains(&w));
        prop_assert!(min_image(x).abs() <= 0.5);
    }

    #[test]
    fn address_text_round_trips(a in (1usize..4, 1usize..6).prop_flat_map(|(d, n)| address(d, n))) {
        let parsed = Address::parse(&a.to_string()).unwrap();
        prop_assert_eq!(parsed, a);
    }

    #[test]
    fn dyadic_centres_decode_to_their_address(a in (1usize..4).prop_flat_map(|n| address(2, n))) {
        let c = center(ScaleSequence::Theta, &a).unwrap();
        prop_assert_eq!(decode_address(&c, a.depth()), a);
    }

    #[test]
    fn cantor_cubes_sit_inside_their_dyadic_cells(nu in 0.05f64..0.95, a in (1usize..5).prop_flat_map(|n| address(2, n))) {
        let n = a.depth();
        let phi = Cube::new(center(ScaleSequence::phi(nu), &a).unwrap(), ScaleSequence::phi(nu).length(n));
        let cell = Cube::new(center(ScaleSequence::Theta, &a).unwrap(), ScaleSequence::Theta.length(n));
        let shifted = Cube::new(shifted_center(nu, &a).unwrap(), ScaleSequence::phi(nu).length(n));
        prop_assert!(cantor_address(&phi.center, nu, n).as_ref() == Some(&a));
        prop_assert!(shifted.inside_margin(&cell) > 0.0);
    }

    #[test]
    fn crush_then_expand_is_identity_on_cores(
        a in (1usize..6).prop_flat_map(|n| address(2, n)),
        fx in -0.5f64..=0.5,
        fy in -0.5f64..=0.5,
    ) {
        let p = Params::default();
        let n = a.depth();
        let side = ScaleSequence::phi(p.nu).length(n);
        let x = center(ScaleSequence::Theta, &a).unwrap().translated(&[fx * side * 0.999, fy * side * 0.999]);
        prop_assert!(in_core(&p, &x, n));
        let y = crush_map(&p, &x, n).unwrap();
        prop_assert!(cantor_address(&y, p.nu, n).as_ref() == Some(&a));
        let back = expand_map(&p, &y, n).unwrap();
        prop_assert!(back.distance_inf(&x) < 1e-12);
    }

    #[test]
    fn active_stage_inverts_tau(beta in 0.1f64..0.9, i in 0usize..30, frac in 0.01f64..0.99) {
        let p = Params::default().with_beta(beta).unwrap();
        let t = p.tau(i) + frac * (p.tau(i + 1) - p.tau(i));
        prop_assert_eq!(p.active_stage(t).unwrap(), Some(i));
        prop_assert!(p.tau(i + 1) > p.tau(i));
        prop_assert!(p.tau(i + 1) < p.tau_inf());
    }

    #[test]
    fn stationary_blob_is_trace_free(
        x in prop::collection::vec(-0.8f64..0.8, 3),
        q in prop::collection::vec(-1.0f64..1.0, 3).prop_filter("nonzero", |q| q.iter().any(|c| c.abs() > 0.1)),
        delta in 0.02f64..0.9,
    ) {
        let w = StationaryBlob::new(BlobDirection::new(q).unwrap(), delta).unwrap();
        let j = w.jacobian(&x);
        let scale = 1.0 + j.amax();
        prop_assert!(j.trace().abs() <= 1e-12 * scale);
    }

    #[test]
    fn stationary_blob_vanishes_outside_support(
        x in prop::collection::vec(-0.5f64..0.5, 2),
        axis in 0usize..2,
        excess in 0.0f64..1.0,
        delta in 0.02f64..0.9,
    ) {
        let w = StationaryBlob::new(BlobDirection::axis(2, 0), delta).unwrap();
        let r = Cutoff::new(delta).unwrap().support_radius();
        let mut y = x.clone();
        y[axis] = r + excess;
        prop_assert!(w.value(&y).iter().all(|c| *c == 0.0));
    }

    #[test]
    fn bump_cdf_is_monotone(a in -0.6f64..0.6, b in -0.6f64..0.6) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(bump().cdf(lo) <= bump().cdf(hi));
        prop_assert!((bump().cdf(lo) + bump().cdf(-lo) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn stage_fields_vanish_off_window(i in 1usize..6, x in prop::collection::vec(0.0f64..1.0, 2), frac in 0.0f64..1.0) {
        let p = Params::default();
        let c = Construction::new(p).unwrap();
        let (ws, _) = p.stage_window(i);
        let t = p.tau(i) + frac * (ws - p.tau(i));
        prop_assert!(c.stage_value(i, t, &x).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn dimension_and_volume_closed_forms(nu in 0.05f64..0.95, n in 1usize..12, d in 1usize..4) {
        prop_assert!((box_dimension(nu, d, n) - d as f64 / (1.0 + nu)).abs() < 1e-12);
        let v = generation_volume(nu, d, n);
        let direct = (1u64 << (n * d).min(60)) as f64 * ScaleSequence::phi(nu).length(n).powi(d as i32);
        prop_assert!((v / direct - 1.0).abs() < 1e-12);
    }

    #[test]
    fn torus_points_are_reduced(coords in prop::collection::vec(-5.0f64..5.0, 1..4)) {
        let p = TorusPoint::new(coords.clone());
        for (a, b) in p.coords().iter().zip(&coords) {
            prop_assert!((0.0..1.0).contains(a));
            prop_assert!(min_image(a - b).abs() < 1e-12);
        }
    }
}
