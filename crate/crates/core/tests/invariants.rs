mod common;

use common::search::*;
use lrp2e::eval::{PenaltyParams, PenaltyState};
use proptest::prelude::*;

#[test]
fn route_deltas_match_forward_simulation() {
    let n = delta_fuzz(100_000, 11).unwrap();
    assert_eq!(n, 100_000);
}

#[test]
fn plan_bookkeeping_survives_operators() {
    let n = partition_trials(10_000, 5).unwrap();
    assert!(n >= 10_000);
}

#[test]
fn penalty_weights_stay_clamped() {
    penalty_trials(200, 3).unwrap();
}

#[test]
fn relatedness_matches_recomputation() {
    assert!(shaw_trials(8).unwrap() > 0);
}

#[test]
fn acut_matches_route_cost_over_load() {
    assert!(acut_trials(9).unwrap() > 0);
}

#[test]
fn operator_weights_follow_smoothing_recurrence() {
    weight_trials(500, 4).unwrap();
}

#[test]
fn unit_ratio_deterioration_is_accepted_with_probability_inverse_e() {
    let rate = sa_rate(100_000, 21);
    assert!((rate - (-1.0f64).exp()).abs() <= 0.02, "{rate}");
}

proptest! {
    #[test]
    fn weights_clamped_for_any_history(
        history in prop::collection::vec(prop::array::uniform4(any::<bool>()), 1..3000),
        initial in 0.01f64..10_000.0,
    ) {
        let params = PenaltyParams { initial, ..Default::default() };
        let mut pen = PenaltyState::new(params);
        for chunk in history.chunks(params.period) {
            for &h in chunk {
                pen.record(h);
            }
            pen.update();
            for w in pen.weights {
                prop_assert!((params.min..=params.max).contains(&w));
            }
        }
    }
}
