mod common;

use std::collections::BTreeSet;

use bpswitch_core::catalog::{BillingPlan, DayMatch, DestinationMatch, FixedCostSpec, Subgroup, SubgroupRule, SubscriberContext};
use bpswitch_core::cost::variable_cost;
use bpswitch_core::simulate::{self, generate_month, stream_rng, SimConfig, SubgroupMapping, TrafficStream};
use bpswitch_core::{BillingMode, Catalog, PayoffFunction, PlanId, Rubles};

fn flat_catalog(rate_millis: i64) -> Catalog {
    let plan = BillingPlan {
        id: PlanId(1),
        name: "Flat".into(),
        provider: "X".into(),
        active: true,
        fixed: FixedCostSpec::default(),
        subgroups: vec![Subgroup {
            rule: SubgroupRule { name: "all".into(), destination: DestinationMatch::Any, day: DayMatch::Any },
            payoff: PayoffFunction::flat(Rubles::from_millis(rate_millis)),
        }],
    };
    Catalog::new(vec![plan], SubscriberContext { current_plan_id: PlanId(1), owned_sim_providers: BTreeSet::new() })
        .unwrap()
}

fn single_stream(calls_per_month: f64, mu: f64, runs: u32) -> (SimConfig, SubgroupMapping) {
    let config = SimConfig {
        seed: 7,
        runs,
        streams: vec![TrafficStream { name: "all".into(), calls_per_month, mu }],
        billing_mode: BillingMode::Lookup,
    };
    let mut mapping = SubgroupMapping::default();
    mapping.insert(PlanId(1), vec![0]);
    (config, mapping)
}

#[test]
fn poisson_count_mean() {
    let stream = TrafficStream { name: "w".into(), calls_per_month: 33.0, mu: 0.41 };
    let runs = 10_000u32;
    let total: usize = (0..runs).map(|r| generate_month(&stream, &mut stream_rng(11, r, 0)).len()).sum();
    let mean = total as f64 / f64::from(runs);
    assert!((mean - 33.0).abs() <= 3.0 * (33.0f64 / f64::from(runs)).sqrt(), "mean count {mean}");
}

#[test]
fn exponential_duration_mean() {
    let stream = TrafficStream { name: "w".into(), calls_per_month: 33.0, mu: 0.41 };
    let durations: Vec<f64> = (0..2000).flat_map(|r| generate_month(&stream, &mut stream_rng(5, r, 0))).collect();
    let n = durations.len() as f64;
    let mean = durations.iter().sum::<f64>() / n;
    // exponential standard deviation equals its mean
    let sigma = (1.0 / 0.41) / n.sqrt();
    assert!((mean - 1.0 / 0.41).abs() <= 3.0 * sigma, "mean duration {mean}");
}

#[test]
fn flat_plan_mean_cost() {
    let catalog = flat_catalog(3000);
    let (config, mapping) = single_stream(39.0, 0.41, 100_000);
    let result = simulate::run(&config, &catalog, &mapping).unwrap();
    let stats = result.plan(PlanId(1)).unwrap();
    assert!((stats.mean - 117.0).abs() <= 3.0 * stats.std_error, "{stats:?}");
    assert!(stats.percentiles.p5 <= stats.percentiles.p50 && stats.percentiles.p50 <= stats.percentiles.p95);
    assert!((stats.std_error - stats.std_dev / (100_000f64).sqrt()).abs() < 1e-12);
}

#[test]
fn silent_traffic_costs_nothing() {
    let (config, mapping) = single_stream(0.0, 0.41, 50);
    let result = simulate::run(&config, &flat_catalog(3000), &mapping).unwrap();
    let stats = result.plan(PlanId(1)).unwrap();
    assert_eq!((stats.mean, stats.std_dev, stats.percentiles.p95), (0.0, 0.0, 0.0));
}

#[test]
fn reruns_are_identical() {
    let catalog = common::mts_catalog();
    let (config, mapping) = SimConfig::from_profile(&common::mts_profile(), 42, 2000, BillingMode::Lookup).unwrap();
    let a = simulate::run(&config, &catalog, &mapping).unwrap();
    let b = simulate::run(&config, &catalog, &mapping).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    let other = SimConfig { seed: 43, ..config };
    assert_ne!(simulate::run(&other, &catalog, &mapping).unwrap().to_json(), a.to_json());
}

#[test]
fn shared_streams_for_shared_subgroups() {
    let (config, mapping) = SimConfig::from_profile(&common::mts_profile(), 1, 1, BillingMode::Lookup).unwrap();
    // to-mts, to-other, to-all, to-mobiles, to-landlines, workdays, weekends
    assert_eq!(config.streams.len(), 7);
    assert_eq!(mapping.streams_for(PlanId(1)), mapping.streams_for(PlanId(5)));
    assert_eq!(mapping.streams_for(PlanId(2)), mapping.streams_for(PlanId(3)));
}

#[test]
fn cumulative_mode_agrees_with_analytic() {
    let catalog = common::mts_catalog();
    let profile = common::mts_profile();
    let (config, mapping) = SimConfig::from_profile(&profile, 3, 20_000, BillingMode::Cumulative).unwrap();
    let result = simulate::run(&config, &catalog, &mapping).unwrap();
    for plan in catalog.plans() {
        let analytic = variable_cost(plan, &profile, BillingMode::Cumulative).unwrap().0;
        let stats = result.plan(plan.id).unwrap();
        assert!(
            (stats.mean - analytic).abs() <= 3.0 * stats.std_error + 1e-9,
            "plan {}: {} vs {analytic} (se {})",
            plan.id,
            stats.mean,
            stats.std_error
        );
    }
}

#[test]
fn replaying_the_printout() {
    use bpswitch_core::traffic::{classify_all, parse_cdr, Calendar, Classifier, PrefixTable};
    let parsed = parse_cdr(include_str!("../../../data/sample_cdr.csv").as_bytes(), true).unwrap();
    let classifier = Classifier::new(
        PrefixTable::load(include_str!("../../../data/prefixes.csv").as_bytes()).unwrap(),
        Calendar::default(),
    );
    let calls = classify_all(&parsed.records, &classifier).calls;
    let catalog = common::mts_catalog();
    let replay = simulate::replay_trace(&calls, &catalog, 6.0, BillingMode::Lookup).unwrap();
    let oblastnoi = replay.iter().find(|(id, _)| *id == PlanId(6)).unwrap().1;
    // 33 workday calls at 3 and 6 weekend calls at 1 per month
    assert!((oblastnoi - 105.0).abs() < 1e-9);
    let maxi = replay.iter().find(|(id, _)| *id == PlanId(2)).unwrap().1;
    assert_eq!(maxi, 0.0);
}
