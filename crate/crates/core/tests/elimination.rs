use gasnet_core::{cofactor_products, eliminate_joint_flows, Error};
use proptest::collection::vec;
use proptest::prelude::*;

fn rates(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<f64>> {
    n.prop_flat_map(|n| vec(-5.0..-0.2_f64, n))
}

fn case() -> impl Strategy<Value = (Vec<f64>, f64, Vec<f64>)> {
    rates(1..=8).prop_flat_map(|c| {
        let n = c.len();
        (Just(c), -50.0..50.0_f64, vec(-50.0..50.0_f64, n))
    })
}

fn scale(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(1.0_f64, |m, v| m.max(v.abs()))
}

proptest! {
    #[test]
    fn outlet_flows_conserve_mass((c, q0, ql) in case()) {
        let qr = eliminate_joint_flows(&c, q0, &ql).unwrap();
        let sum: f64 = qr.iter().sum();
        let s = scale(qr.iter().copied().chain([q0]));
        prop_assert!((sum - q0).abs() <= 1e-12 * s);
    }

    #[test]
    fn outlet_pressures_rise_at_a_common_rate((c, q0, ql) in case()) {
        let qr = eliminate_joint_flows(&c, q0, &ql).unwrap();
        let rate: Vec<f64> = (0..c.len()).map(|k| c[k] * (qr[k] - ql[k])).collect();
        let s = scale((0..c.len()).flat_map(|k| [c[k] * qr[k], c[k] * ql[k]]));
        for r in &rate {
            prop_assert!((r - rate[0]).abs() <= 1e-12 * s);
        }
    }

    #[test]
    fn cofactors_match_direct_products(c in rates(1..=8)) {
        let cof = cofactor_products(&c);
        for k in 0..c.len() {
            let direct: f64 = c.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, v)| v).product();
            prop_assert!((cof.per_pipe[k] - direct).abs() <= 1e-14 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn flows_are_invariant_under_pipe_relabeling((c, q0, ql) in case(), shift in 0usize..8) {
        let n = c.len();
        let rot = |v: &[f64]| -> Vec<f64> { (0..n).map(|i| v[(i + shift) % n]).collect() };
        let qr = eliminate_joint_flows(&c, q0, &ql).unwrap();
        let qr_rot = eliminate_joint_flows(&rot(&c), q0, &rot(&ql)).unwrap();
        let s = scale(qr.iter().copied());
        for (a, b) in rot(&qr).iter().zip(&qr_rot) {
            prop_assert!((a - b).abs() <= 1e-12 * s);
        }
    }

    #[test]
    fn a_single_joining_pipe_carries_the_whole_flow(c in -5.0..-0.2_f64, q0 in -50.0..50.0_f64, ql in -50.0..50.0_f64) {
        prop_assert_eq!(eliminate_joint_flows(&[c], q0, &[ql]).unwrap(), vec![q0]);
    }
}

#[test]
fn zero_coefficient_does_not_divide_by_zero() {
    // P_k is a product over the other pipes only
    let cof = cofactor_products(&[0.0, -2.0, -3.0]);
    assert_eq!(cof.per_pipe, vec![6.0, 0.0, 0.0]);
    assert_eq!(cof.total, 6.0);
}

#[test]
fn cancelling_cofactors_are_rejected() {
    // c₁ + c₂ = 0 makes the two-pipe total vanish
    let err = eliminate_joint_flows(&[-1.5, 1.5], 1.0, &[0.0, 0.0]).unwrap_err();
    assert!(matches!(err, Error::DegenerateJunction { .. }));
}

#[test]
fn near_cancellation_is_detected_relative_to_scale() {
    let cof = cofactor_products(&[-1.0, 1.0 + 1e-14]);
    assert!(cof.is_degenerate());
    assert!(!cofactor_products(&[-1.0, 1.0 + 1e-9]).is_degenerate());
}
