mod common;

use evflex_core::controllers::{Policy, PriceRule};
use evflex_core::dataset::{generate, parse_schedule, write_schedule, GeneratorParams};
use evflex_core::env::{ChargerLimits, ChargerObservation, RbcSettings};
use evflex_core::flexoffer::slice_bounds;
use evflex_core::models::{BatteryParams, Charger, ChargerParams, Curve, EvBattery};
use evflex_core::trace::run_episode;
use evflex_core::SimulationMode;
use proptest::prelude::*;

fn battery_params() -> impl Strategy<Value = (BatteryParams, f64)> {
    (
        20.0..100.0f64,
        3.0..150.0f64,
        0.8..=1.0f64,
        0.0..0.01f64,
        0.5..0.95f64,
        0.0..0.1f64,
        0.0..=1.0f64,
    )
        .prop_map(|(c0, p, eta, theta, dod, fade, soc)| {
            let mut b = BatteryParams::new(c0, p);
            b.round_trip_efficiency = eta;
            b.thermal_loss = theta;
            b.depth_of_discharge = dod;
            b.degradation.rate = fade;
            b.degradation.min_capacity_fraction = (1.0 - dod).max(0.6);
            (b, soc)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    // 100 cases x 1000 steps = 10^5 randomized steps
    #[test]
    fn stored_energy_stays_between_floor_and_capacity(
        (params, soc) in battery_params(),
        supplied in prop::collection::vec(-200.0..200.0f64, 1000),
    ) {
        let mut b = EvBattery::new(&params, soc).unwrap();
        for q in supplied {
            let step = b.update(q, 1.0);
            prop_assert!(step.stored_after >= b.floor_energy() - 1e-9);
            prop_assert!(step.stored_after <= b.capacity_current() + 1e-9);
            prop_assert!((0.0..=1.0).contains(&b.soc()));
        }
    }

    #[test]
    fn consumption_is_odd_in_action(power in 0.0..100.0f64, action in 0.0..=1.0f64, dt in 0.1..2.0f64) {
        let params = ChargerParams {
            nominal_power_charging: power,
            nominal_power_discharging: power,
            efficiency: 0.9,
            efficiency_curve: None,
        };
        let c = Charger::new(common::charger_id(), &params, SimulationMode::V2g).unwrap();
        let up = c.consumption(action, SimulationMode::V2g, dt).unwrap();
        let down = c.consumption(-action, SimulationMode::V2g, dt).unwrap();
        prop_assert_eq!(up, -down);
    }

    #[test]
    fn round_trip_never_gains_energy(
        c0 in 20.0..100.0f64,
        eta in 0.5..0.999f64,
        soc in 0.2..0.8f64,
        q in 0.0..50.0f64,
    ) {
        let mut p = BatteryParams::new(c0, 100.0);
        p.round_trip_efficiency = eta;
        let mut b = EvBattery::new(&p, soc).unwrap();
        let before = b.stored_energy();
        let charged = b.charge(q, 1.0);
        b.discharge(-charged.accepted, 1.0);
        prop_assert!(b.stored_energy() <= before + 1e-9);
    }

    #[test]
    fn slice_upper_bound_falls_with_soc(
        knee in 0.5..0.95f64,
        tail in 0.0..1.0f64,
        lo in 0.0..1.0f64,
        hi in 0.0..1.0f64,
        mode in prop::sample::select(vec![SimulationMode::V2g, SimulationMode::G2v, SimulationMode::NoControl]),
    ) {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        let mut p = BatteryParams::new(60.0, 22.0);
        p.depth_of_discharge = 1.0;
        p.degradation.min_capacity_fraction = 1.0;
        p.power_curve = Curve::new(vec![(0.0, 1.0), (knee, 1.0), (1.0, tail)]).unwrap();
        let charger = Charger::new(common::charger_id(), &common::charger_params(11.0), mode).unwrap();
        let a = slice_bounds(&charger, &EvBattery::new(&p, lo).unwrap(), mode);
        let b = slice_bounds(&charger, &EvBattery::new(&p, hi).unwrap(), mode);
        prop_assert!(b.p_max <= a.p_max + 1e-12);
        if mode != SimulationMode::V2g {
            prop_assert_eq!(a.p_min, 0.0);
            prop_assert_eq!(b.p_min, 0.0);
        }
    }

    #[test]
    fn schedules_round_trip(seed in any::<u64>(), workplace in any::<bool>(), weeks in 1usize..4) {
        let id = common::charger_id();
        let params = if workplace {
            GeneratorParams::workplace(vec![id], seed)
        } else {
            GeneratorParams::household(id, seed)
        };
        let rows = generate(&params, weeks * 7 * 24).unwrap();
        let mut buf = Vec::new();
        write_schedule(&mut buf, &rows).unwrap();
        prop_assert_eq!(parse_schedule(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn price_rule_never_discharges_in_g2v(
        soc in 0.0..=1.0f64,
        departure in 1u32..30,
        req in 0.0..=1.0f64,
        price in 0.0..1.0f64,
        gain in 0.0..0.5f64,
        loss in 0.0..0.5f64,
    ) {
        let rule = PriceRule::from_prices(&[0.1, 0.2, 0.3, 0.4], &RbcSettings::default(), SimulationMode::G2v);
        let limits = ChargerLimits { max_charge_soc_gain: gain, max_discharge_soc_loss: loss };
        for obs in [
            ChargerObservation::connected(soc, Some(departure), Some(req)),
            ChargerObservation::connected(soc, None, None),
        ] {
            let a = rule.decide(&obs, &limits, price);
            prop_assert!((0.0..=1.0).contains(&a), "{a}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Random plug-in windows and prices: whenever full-power charging from
    /// plug-in meets the requirement, the price rule does too.
    #[test]
    fn price_rule_meets_feasible_deadlines(
        sessions in prop::collection::vec((1u32..6, 2u32..14, 0.3..1.0f64, 0.1..0.9f64), 1..5),
        prices in prop::collection::vec(0.05..0.4f64, 24),
        power in 2.0..22.0f64,
        v2g in any::<bool>(),
    ) {
        let id = common::charger_id();
        let mut schedule = Vec::new();
        for &(gap, stay, req, arrival) in &sessions {
            for k in (1..=gap).rev() {
                schedule.push(if k <= 2 { common::incoming(id, k, arrival) } else { common::transit() });
            }
            for k in (1..=stay).rev() {
                schedule.push(common::plugged(id, k, req));
            }
        }
        schedule.push(common::transit());
        let mode = if v2g { SimulationMode::V2g } else { SimulationMode::G2v };
        let mut battery = BatteryParams::new(40.0, 50.0);
        battery.round_trip_efficiency = 0.95;
        let mut params = common::charger_params(power);
        params.efficiency = 0.95;
        let mut scenario = common::single_charger_scenario(mode, params, battery, 0.5, schedule);
        let n = scenario.horizon_steps;
        scenario.price = (0..n).map(|t| prices[t % 24]).collect();
        let mut rule = PriceRule::from_prices(&scenario.price, &scenario.rbc, mode);
        let mut env = common::env(scenario);
        let trace = run_episode(&mut env, &mut rule as &mut dyn Policy, 0, None).unwrap();
        prop_assert!(trace.summary.departures > 0);
        prop_assert_eq!(trace.summary.feasible_shortfalls, 0, "{:?}", trace.departures);
    }
}
