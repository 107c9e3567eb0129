#![allow(dead_code)]

pub mod props;

use bpswitch_core::{Catalog, TrafficProfile};

pub const CATALOG_JSON: &str = include_str!("../../../../data/mts_catalog.json");
pub const PROFILE_JSON: &str = include_str!("../../../../data/mts_profile.json");

pub fn mts_catalog() -> Catalog {
    Catalog::from_json_str(CATALOG_JSON).expect("bundled catalog is valid")
}

pub fn mts_profile() -> TrafficProfile {
    TrafficProfile::from_json_str(PROFILE_JSON).expect("bundled profile is valid")
}

/// Variable costs per plan at k = 1, computed by direct summation over minutes
/// 1..=4000 of v(θ)·(e^{-μ(θ-1)} - e^{-μθ}), independent of the engine.
pub fn brute_force_variable(catalog: &Catalog, profile: &TrafficProfile, mu: f64) -> Vec<(u32, f64)> {
    catalog
        .plans()
        .iter()
        .map(|plan| {
            let row = profile.plan(plan.id).unwrap();
            let total = plan
                .subgroups
                .iter()
                .zip(row)
                .map(|(sg, t)| {
                    let s: f64 = (1..=4000u32)
                        .map(|m| {
                            let mass = (-mu * f64::from(m - 1)).exp() - (-mu * f64::from(m)).exp();
                            sg.payoff.rate_at(m).as_f64() * mass
                        })
                        .sum();
                    t.calls_per_month * s
                })
                .sum();
            (plan.id.0, total)
        })
        .collect()
}

/// Brute force over a fine k grid: the optimal plan at each k from the k = 1
/// variable costs of every plan, full(k) = fixed + k·variable. Returns the
/// first grid point of each new optimum.
pub fn brute_force_switches(catalog: &Catalog, profile: &TrafficProfile, mu: f64, fixed: &[f64], step: f64) -> Vec<(f64, u32)> {
    let variable = brute_force_variable(catalog, profile, mu);
    let mut switches: Vec<(f64, u32)> = Vec::new();
    let steps = ((10.0 - 0.5) / step).round() as usize;
    for i in 0..=steps {
        let k = 0.5 + i as f64 * step;
        let best = variable
            .iter()
            .zip(fixed)
            .map(|(&(id, v), f)| (f + k * v, id))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap()
            .1;
        if switches.last().map(|s| s.1) != Some(best) {
            switches.push((k, best));
        }
    }
    switches
}

/// Fixed costs of the bundled plans when staying on plan 6 with an MTS SIM.
pub const MTS_FIXED: [f64; 6] = [90.0, 315.0, 90.0, 250.0, 2750.0, 0.0];
