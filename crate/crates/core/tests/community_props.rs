use proptest::prelude::*;
use solarec::community::{simulate, CommunityState, Member, ProducerSpec};

const EPS: f64 = 1e-9;

fn producer() -> impl Strategy<Value = ProducerSpec> {
    (
        0.5f64..5.0,
        proptest::collection::vec(0.0f64..1.0, 24),
        0.0f64..10.0,
        0.5f64..=1.0,
        prop_oneof![Just(f64::INFINITY), 0.0f64..5.0],
    )
        .prop_map(|(p_max, shape, cap, eff, limit)| ProducerSpec {
            producer_id: "pv".into(),
            p_max,
            avg_profile: shape.iter().map(|s| s * p_max).collect(),
            storage_capacity: cap,
            storage_efficiency: eff,
            storage_power_limit: limit,
        })
}

fn community() -> impl Strategy<Value = CommunityState> {
    (1usize..72).prop_flat_map(|horizon| {
        (
            proptest::collection::vec(proptest::collection::vec(0.0f64..4.0, horizon), 0..4),
            proptest::collection::vec(producer(), 0..3),
            Just(horizon),
        )
            .prop_map(|(series, producers, horizon)| {
                let members = series.into_iter().enumerate().map(|(i, s)| Member::new(format!("m{i}"), s)).collect();
                CommunityState::new(members, producers, horizon)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn hourly_balance_and_bounds(state in community()) {
        let report = simulate(&state).unwrap();
        let capacity = state.pooled_storage().capacity;
        for h in &report.hourly_trace {
            prop_assert!((h.production - (h.direct_use + h.charge + h.exported)).abs() <= EPS);
            prop_assert!((h.consumption - (h.direct_use + h.discharge + h.imported)).abs() <= EPS);
            prop_assert!(h.soc_end >= 0.0 && h.soc_end <= capacity + EPS);
            prop_assert!(h.charge >= 0.0 && h.discharge >= 0.0 && h.exported >= 0.0 && h.imported >= 0.0);
        }
        prop_assert!(report.shared_energy <= report.total_production.min(report.total_consumption) + EPS);
        prop_assert!((0.0..=1.0 + EPS).contains(&report.self_consumption_ratio));
        prop_assert!((0.0..=1.0 + EPS).contains(&report.self_sufficiency));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn more_load_never_reduces_sharing(state in community(), bump in proptest::collection::vec(0.0f64..3.0, 72), who in 0usize..4) {
        prop_assume!(!state.members.is_empty());
        let base = simulate(&state).unwrap().shared_energy;
        let mut bumped = state.clone();
        let m = who % bumped.members.len();
        for (v, b) in bumped.members[m].series.iter_mut().zip(&bump) {
            *v += b;
        }
        prop_assert!(simulate(&bumped).unwrap().shared_energy >= base - EPS);
    }

    #[test]
    fn lossless_storage_only_helps(state in community()) {
        let mut lossless = state.clone();
        for p in &mut lossless.producers {
            p.storage_efficiency = 1.0;
        }
        let mut bare = lossless.clone();
        for p in &mut bare.producers {
            p.storage_capacity = 0.0;
        }
        prop_assert!(simulate(&lossless).unwrap().shared_energy >= simulate(&bare).unwrap().shared_energy - EPS);
    }

    #[test]
    fn initial_charge_bounds_generalize(state in community(), fill in 0.0f64..=1.0) {
        // stored energy at hour 0 can be delivered on top of production
        let mut charged = state.clone();
        let storage = charged.pooled_storage();
        charged.initial_soc = storage.capacity * fill;
        let report = simulate(&charged).unwrap();
        let ceiling = report.total_production + charged.initial_soc * storage.efficiency.sqrt();
        prop_assert!(report.shared_energy <= ceiling.min(report.total_consumption) + EPS);
    }

    #[test]
    fn simulate_is_pure(state in community()) {
        prop_assert_eq!(simulate(&state).unwrap(), simulate(&state).unwrap());
    }
}
