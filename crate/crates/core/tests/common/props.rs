//! Random catalogs and profiles, plus the invariants checked over them.
//! Shared by the proptest suite and the acceptance runner.

use std::collections::{BTreeMap, BTreeSet};

use bpswitch_core::catalog::{
    BillingPlan, DayClass, DayMatch, DestinationClass, DestinationMatch, FixedCostSpec, RateSegment, Subgroup,
    SubgroupRule, SubscriberContext,
};
use bpswitch_core::cost::{full_costs, rank, variable_cost};
use bpswitch_core::sensitivity::scale_traffic;
use bpswitch_core::simulate::{self, SimConfig};
use bpswitch_core::traffic::{
    estimate_profile, CallRecord, Calendar, Classifier, EstimateOptions, PrefixTable, Service, SubgroupTraffic,
};
use bpswitch_core::{BillingMode, Catalog, DurationModel, PayoffFunction, PlanId, Rubles, TrafficProfile};
use chrono::{Duration, NaiveDate, NaiveTime};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

type Check = Result<(), TestCaseError>;

/// Segment lengths and rates; the last segment is open.
pub fn payoff_parts() -> impl Strategy<Value = Vec<(u32, i64)>> {
    prop::collection::vec((1u32..12, 0i64..12_000), 1..5)
}

pub fn build_payoff(parts: &[(u32, i64)]) -> PayoffFunction {
    PayoffFunction::new(segments_of(parts)).expect("contiguous segments")
}

fn segments_of(parts: &[(u32, i64)]) -> Vec<RateSegment> {
    let mut from = 1;
    parts
        .iter()
        .enumerate()
        .map(|(i, &(len, rate))| {
            let rate = Rubles::from_millis(rate);
            if i + 1 == parts.len() {
                RateSegment::open(from, rate)
            } else {
                let seg = RateSegment::closed(from, from + len - 1, rate);
                from += len;
                seg
            }
        })
        .collect()
}

fn rule(name: &str, destination: DestinationMatch, day: DayMatch) -> SubgroupRule {
    SubgroupRule { name: name.into(), destination, day }
}

/// Subgroup layouts that each cover every destination/day cell.
fn layout(kind: u8) -> Vec<SubgroupRule> {
    use DayMatch as D;
    use DestinationMatch as M;
    match kind % 6 {
        0 => vec![rule("all", M::Any, D::Any)],
        1 => vec![rule("on-net", M::SameNetwork, D::Any), rule("rest", M::Any, D::Any)],
        2 => vec![rule("mobile", M::Mobile, D::Any), rule("landline", M::Landline, D::Any)],
        3 => vec![rule("workdays", M::Any, D::Workday), rule("weekends", M::Any, D::Weekend)],
        4 => vec![
            rule("on-net", M::SameNetwork, D::Any),
            rule("off-net", M::OtherMobile, D::Any),
            rule("landline", M::Landline, D::Any),
        ],
        _ => vec![rule("weekend-landline", M::Landline, D::Weekend), rule("rest", M::Any, D::Any)],
    }
}

const PROVIDERS: [&str; 3] = ["A", "B", "C"];

pub fn catalog_strategy() -> impl Strategy<Value = Catalog> {
    let plan = (
        any::<u8>(),
        prop::collection::vec(payoff_parts(), 3),
        0usize..3,
        any::<bool>(),
        [0i64..400_000, 0i64..200_000, 0i64..3_000_000],
    );
    (prop::collection::vec(plan, 1..7), any::<prop::sample::Index>(), prop::collection::btree_set(0usize..3, 0..3))
        .prop_map(|(plans, current, owned)| {
            let current = PlanId(current.index(plans.len()) as u32 + 1);
            let plans = plans
                .into_iter()
                .enumerate()
                .map(|(i, (kind, payoffs, provider, active, [sub, switch, sim]))| BillingPlan {
                    id: PlanId(i as u32 + 1),
                    name: format!("Plan {}", i + 1),
                    provider: PROVIDERS[provider].into(),
                    active,
                    fixed: FixedCostSpec {
                        subscription_fee: Rubles::from_millis(sub),
                        switch_fee: Rubles::from_millis(switch),
                        purchase_cost: Rubles::from_millis(sim),
                    },
                    subgroups: layout(kind)
                        .into_iter()
                        .zip(&payoffs)
                        .map(|(rule, parts)| Subgroup { rule, payoff: build_payoff(parts) })
                        .collect(),
                })
                .collect();
            let context = SubscriberContext {
                current_plan_id: current,
                owned_sim_providers: owned.into_iter().map(|p| PROVIDERS[p].to_string()).collect(),
            };
            Catalog::new(plans, context).expect("generated catalog is valid")
        })
}

/// A profile for `catalog`: one monthly total split by random weights in each row.
pub fn profile_for(catalog: &Catalog, total: f64, weights: &[u32], mu: f64, truncation: Option<u32>) -> TrafficProfile {
    let mut plans = BTreeMap::new();
    let mut w = weights.iter().cycle();
    for plan in catalog.plans() {
        let shares: Vec<f64> = plan.subgroups.iter().map(|_| f64::from(*w.next().unwrap() + 1)).collect();
        let sum: f64 = shares.iter().sum();
        let row = plan
            .subgroups
            .iter()
            .zip(&shares)
            .map(|(sg, share)| SubgroupTraffic {
                name: sg.rule.name.clone(),
                calls_per_month: total * share / sum,
                duration: DurationModel::Exponential { mu, truncation },
            })
            .collect();
        plans.insert(plan.id, row);
    }
    TrafficProfile::new(6.0, plans).expect("rows share one total")
}

pub fn scenario_strategy() -> impl Strategy<Value = (Catalog, TrafficProfile)> {
    (
        catalog_strategy(),
        0.0f64..300.0,
        prop::collection::vec(0u32..20, 3),
        0.05f64..2.5,
        prop::option::of(1u32..300),
    )
        .prop_map(|(catalog, total, weights, mu, truncation)| {
            let profile = profile_for(&catalog, total, &weights, mu, truncation);
            (catalog, profile)
        })
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

/// Contiguous segments are accepted and every minute has exactly one
/// containing segment, whose rate `rate_at` returns. Shifting any interior
/// boundary by one minute opens a gap or an overlap and is rejected.
pub fn payoff_partition(parts: &[(u32, i64)], shift_at: prop::sample::Index, widen: bool) -> Check {
    let payoff = build_payoff(parts);
    let horizon: u32 = parts.iter().map(|p| p.0).sum::<u32>() + 5;
    for minute in 1..=horizon {
        let containing: Vec<_> = payoff.segments().iter().filter(|s| s.contains(minute)).collect();
        prop_assert_eq!(containing.len(), 1, "minute {}", minute);
        prop_assert_eq!(containing[0].rate, payoff.rate_at(minute));
    }
    let cumulative: f64 = (1..=horizon).map(|m| payoff.rate_at(m).as_f64()).sum();
    prop_assert!(close(payoff.cumulative_through(horizon), cumulative, 1e-12));
    if parts.len() > 1 {
        let mut segments = segments_of(parts);
        let i = shift_at.index(segments.len() - 1) + 1;
        if widen {
            segments[i].from += 1;
        } else {
            segments[i].from -= 1;
        }
        prop_assert!(PayoffFunction::new(segments).is_err());
    }
    Ok(())
}

pub fn calls_strategy() -> impl Strategy<Value = Vec<(u8, i64, u32)>> {
    // (destination selector, day offset, seconds)
    prop::collection::vec((0u8..4, 0i64..180, 1u32..1800), 1..120)
}

fn synth_records(calls: &[(u8, i64, u32)]) -> Vec<CallRecord> {
    const NUMBERS: [&str; 4] = ["+79161234567", "+79851234567", "+74951234567", "+30123456"];
    let start = NaiveDate::from_ymd_opt(2010, 9, 1).unwrap();
    calls
        .iter()
        .map(|&(dest, day, seconds)| CallRecord {
            date: start + Duration::days(day),
            time: NaiveTime::from_hms_opt(12, 0, 0).unwrap(),
            number: NUMBERS[usize::from(dest)].into(),
            zone: "Moscow".into(),
            service: Service::Tel,
            duration_seconds: seconds,
            cost: Rubles::ZERO,
        })
        .collect()
}

fn classifier() -> Classifier {
    let prefixes = PrefixTable::new([
        ("+7916".to_string(), DestinationClass::SameNetwork),
        ("+7495".to_string(), DestinationClass::Landline),
        ("+79".to_string(), DestinationClass::OtherMobile),
    ]);
    let holidays = [NaiveDate::from_ymd_opt(2011, 1, 3).unwrap()];
    Classifier::new(prefixes, Calendar::new(holidays))
}

/// Every destination/day cell has at least one matching subgroup and lands in
/// the first; estimated rows account for every call exactly once.
pub fn classification_partition(catalog: &Catalog, calls: &[(u8, i64, u32)]) -> Check {
    for plan in catalog.plans() {
        for destination in DestinationClass::ALL {
            for day in DayClass::ALL {
                let matching: BTreeSet<usize> = plan
                    .subgroups
                    .iter()
                    .enumerate()
                    .filter(|(_, sg)| sg.rule.matches(destination, day))
                    .map(|(i, _)| i)
                    .collect();
                prop_assert!(!matching.is_empty());
                prop_assert_eq!(plan.classify(destination, day), matching.first().copied());
            }
        }
    }
    let classifier = classifier();
    let records = synth_records(calls);
    let classified: Vec<_> = records.iter().map(|r| classifier.classify(r).unwrap()).collect();
    let months = 6.0;
    let profile = estimate_profile(&classified, catalog, months, EstimateOptions::default())
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
    for plan in catalog.plans() {
        let row = profile.plan(plan.id).unwrap();
        let mut expected = vec![0usize; plan.subgroups.len()];
        for call in &classified {
            expected[plan.classify(call.destination, call.day).unwrap()] += 1;
        }
        for (sg, count) in row.iter().zip(expected) {
            prop_assert!(close(sg.calls_per_month * months, count as f64, 1e-12));
        }
        let total: f64 = row.iter().map(|s| s.calls_per_month).sum();
        prop_assert!(close(total * months, calls.len() as f64, 1e-12));
    }
    Ok(())
}

/// All rows of a profile carry the same monthly total; breaking one row is rejected.
pub fn row_totals(catalog: &Catalog, profile: &TrafficProfile, bump: f64) -> Check {
    let totals: Vec<f64> = profile.plans().map(|(_, row)| row.iter().map(|s| s.calls_per_month).sum()).collect();
    let first = totals[0];
    prop_assert!(totals.iter().all(|&t| close(t, first, 1e-9)));
    let mut plans: BTreeMap<PlanId, Vec<SubgroupTraffic>> =
        profile.plans().map(|(id, row)| (id, row.to_vec())).collect();
    if plans.len() > 1 {
        let last = *plans.keys().last().unwrap();
        plans.get_mut(&last).unwrap()[0].calls_per_month += bump * first.max(1.0);
        prop_assert!(TrafficProfile::new(6.0, plans).is_err());
    }
    prop_assert!(profile.check_against(catalog).is_ok());
    Ok(())
}

fn scaled_prices(catalog: &Catalog, factor: i64) -> Catalog {
    let plans = catalog
        .plans()
        .iter()
        .map(|p| BillingPlan {
            fixed: FixedCostSpec {
                subscription_fee: p.fixed.subscription_fee * factor,
                switch_fee: p.fixed.switch_fee * factor,
                purchase_cost: p.fixed.purchase_cost * factor,
            },
            subgroups: p
                .subgroups
                .iter()
                .map(|sg| Subgroup { rule: sg.rule.clone(), payoff: sg.payoff.scaled(factor) })
                .collect(),
            ..p.clone()
        })
        .collect();
    Catalog::new(plans, catalog.context().clone()).unwrap()
}

/// Variable cost is linear in the traffic multiplier and in the tariff; the
/// ranking is unchanged when every price and the traffic are scaled together.
pub fn linearity_and_argmin(catalog: &Catalog, profile: &TrafficProfile, k: f64, exponent: u32) -> Check {
    let fail = |e: &dyn std::fmt::Display| TestCaseError::fail(e.to_string());
    let scaled_profile = scale_traffic(profile, k).map_err(|e| fail(&e))?;
    for plan in catalog.plans() {
        for mode in [BillingMode::Lookup, BillingMode::Cumulative] {
            let (base, _) = variable_cost(plan, profile, mode).map_err(|e| fail(&e))?;
            let (scaled, _) = variable_cost(plan, &scaled_profile, mode).map_err(|e| fail(&e))?;
            prop_assert!(close(scaled, k * base, 1e-9), "plan {}: {} vs {}", plan.id, scaled, k * base);
        }
    }
    // powers of two scale floating-point costs exactly, so near-ties cannot flip
    let factor = 1i64 << exponent;
    let current = Some(catalog.context().current_plan_id);
    let base = rank(&full_costs(catalog, profile, BillingMode::Lookup).map_err(|e| fail(&e))?, current)
        .map_err(|e| fail(&e))?;
    let repriced = full_costs(&scaled_prices(catalog, factor), profile, BillingMode::Lookup).map_err(|e| fail(&e))?;
    for (a, b) in repriced.iter().zip(full_costs(catalog, profile, BillingMode::Lookup).unwrap()) {
        prop_assert!(close(a.variable, factor as f64 * b.variable, 1e-12));
    }
    let doubled_traffic = scale_traffic(profile, factor as f64).map_err(|e| fail(&e))?;
    let doubled_fees = scaled_catalog_fees_only(catalog, factor);
    let both = rank(&full_costs(&doubled_fees, &doubled_traffic, BillingMode::Lookup).unwrap(), current).unwrap();
    prop_assert_eq!(&base, &both);
    let all_prices = rank(&repriced, current).unwrap();
    prop_assert_eq!(&base, &all_prices);
    Ok(())
}

fn scaled_catalog_fees_only(catalog: &Catalog, factor: i64) -> Catalog {
    let plans = catalog
        .plans()
        .iter()
        .map(|p| BillingPlan {
            fixed: FixedCostSpec {
                subscription_fee: p.fixed.subscription_fee * factor,
                switch_fee: p.fixed.switch_fee * factor,
                purchase_cost: p.fixed.purchase_cost * factor,
            },
            ..p.clone()
        })
        .collect();
    Catalog::new(plans, catalog.context().clone()).unwrap()
}

/// Two runs with the same seed serialize to identical bytes, whatever the thread count.
pub fn simulation_reproducible(catalog: &Catalog, profile: &TrafficProfile, seed: u64, runs: u32) -> Check {
    let fail = |e: &dyn std::fmt::Display| TestCaseError::fail(e.to_string());
    let (config, mapping) = SimConfig::from_profile(profile, seed, runs, BillingMode::Lookup).map_err(|e| fail(&e))?;
    let first = simulate::run(&config, catalog, &mapping).map_err(|e| fail(&e))?.to_json();
    let second = simulate::run(&config, catalog, &mapping).map_err(|e| fail(&e))?.to_json();
    prop_assert_eq!(&first, &second);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let third = pool.install(|| simulate::run(&config, catalog, &mapping)).map_err(|e| fail(&e))?.to_json();
    prop_assert_eq!(&first, &third);
    Ok(())
}

/// Discretized exponential masses decrease minute by minute, vanish past the
/// cut-off and sum to the reported total mass.
pub fn exponential_mass(mu: f64, truncation: Option<u32>) -> Check {
    let model = DurationModel::Exponential { mu, truncation };
    let horizon = truncation.unwrap_or(400);
    let mut sum = 0.0;
    for m in 1..=horizon {
        let (here, next) = (model.mass(m), model.mass(m + 1));
        prop_assert!(here >= 0.0);
        if m < horizon && next > 0.0 {
            prop_assert!(next < here, "minute {}: {} !< {}", m, next, here);
        }
        sum += here;
    }
    if let Some(t) = truncation {
        prop_assert_eq!(model.mass(t + 1), 0.0);
        prop_assert!(close(sum, model.total_mass(), 1e-12));
    } else {
        prop_assert!(sum <= 1.0 + 1e-12);
        prop_assert!(close(sum + (-mu * f64::from(horizon)).exp(), 1.0, 1e-12));
    }
    prop_assert!(model.residual_mass() >= 0.0);
    Ok(())
}
