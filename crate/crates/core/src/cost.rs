//! Expected monthly cost of each plan and the plan ranking.
//!
//! For a subgroup with payoff `v` and duration distribution `f`, the expected
//! cost of one call is `s = Σ_θ v(θ) f(θ)`: a call is charged the rate of the
//! minute it ends in. A plan's variable cost is `Σ_j λ_j s_j`, its full cost
//! adds the fixed fees of moving to (or staying on) it, and the cheapest full
//! cost wins.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::catalog::{BillingPlan, Catalog, PayoffFunction, PlanId, SegmentEnd, SubscriberContext};
use crate::traffic::{DurationModel, Service, TrafficProfile};

#[derive(Debug, thiserror::Error)]
pub enum CostError {
    #[error("traffic profile has no row for plan {0}")]
    MissingProfileRow(PlanId),
    #[error("plan {plan} has {expected} subgroups but its traffic row has {found}")]
    SubgroupMismatch { plan: PlanId, expected: usize, found: usize },
    #[error("nothing to rank")]
    Empty,
}

/// How a call of `θ` minutes is charged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BillingMode {
    /// The rate of the call's final minute, `v(θ)`.
    #[default]
    Lookup,
    /// The sum of the rates of every minute, `Σ_{m≤θ} v(m)`.
    Cumulative,
}

/// Expected charge of one call.
pub fn expected_call_cost(payoff: &PayoffFunction, duration: &DurationModel, mode: BillingMode) -> f64 {
    match duration {
        DurationModel::Empirical { mass } => {
            let mut total = 0.0;
            let mut charged_so_far = 0.0;
            for (i, &p) in mass.iter().enumerate() {
                let rate = payoff.rate_at(i as u32 + 1).as_f64();
                let charge = match mode {
                    BillingMode::Lookup => rate,
                    BillingMode::Cumulative => {
                        charged_so_far += rate;
                        charged_so_far
                    }
                };
                total += charge * p;
            }
            total
        }
        DurationModel::Exponential { mu, truncation } => exponential_call_cost(payoff, *mu, *truncation, mode),
    }
}

/// Closed form of the discretized sum, segment by segment.
///
/// With `S(m) = exp(-μ(m-1))` the probability that a call reaches minute `m`,
/// a segment `[a, b]` contributes `rate · (S(a) - S(b+1))` in lookup mode and
/// `rate · Σ_{m=a..b} (S(m) - S(T+1))` in cumulative mode.
fn exponential_call_cost(payoff: &PayoffFunction, mu: f64, truncation: Option<u32>, mode: BillingMode) -> f64 {
    let reach = |minute: f64| (-mu * (minute - 1.0)).exp();
    let beyond_horizon = truncation.map_or(0.0, |t| reach(f64::from(t) + 1.0));
    // 1 - e^{-μ}
    let ratio_complement = -(-mu).exp_m1();

    let mut total = 0.0;
    for seg in payoff.segments() {
        if truncation.is_some_and(|t| seg.from > t) {
            break;
        }
        let upper = match (seg.to, truncation) {
            (SegmentEnd::Minute(b), Some(t)) => Some(b.min(t)),
            (SegmentEnd::Minute(b), None) => Some(b),
            (SegmentEnd::Open, t) => t,
        };
        let rate = seg.rate.as_f64();
        if rate == 0.0 {
            continue;
        }
        let start = reach(f64::from(seg.from));
        let stop = upper.map_or(0.0, |b| reach(f64::from(b) + 1.0));
        total += match mode {
            BillingMode::Lookup => rate * (start - stop),
            BillingMode::Cumulative => {
                let count = upper.map_or(0.0, |b| f64::from(b - seg.from + 1));
                rate * ((start - stop) / ratio_complement - count * beyond_horizon)
            }
        };
    }
    total
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubgroupCost {
    pub name: String,
    pub calls_per_month: f64,
    /// Expected cost of one call in this subgroup.
    pub call_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostBreakdown {
    pub plan_id: PlanId,
    pub plan_name: String,
    pub subgroups: Vec<SubgroupCost>,
    /// Variable cost per service; only calls are modeled.
    pub services: BTreeMap<Service, f64>,
    pub variable: f64,
    pub fixed: f64,
    pub full: f64,
}

impl CostBreakdown {
    /// Adds another service's monthly variable cost to the totals.
    pub fn add_service(&mut self, service: Service, variable: f64) {
        *self.services.entry(service).or_insert(0.0) += variable;
        self.variable = self.services.values().sum();
        self.full = self.variable + self.fixed;
    }
}

/// Monthly variable cost of `plan` and the per-subgroup expected call costs.
pub fn variable_cost(
    plan: &BillingPlan,
    profile: &TrafficProfile,
    mode: BillingMode,
) -> Result<(f64, Vec<SubgroupCost>), CostError> {
    let row = profile.plan(plan.id).ok_or(CostError::MissingProfileRow(plan.id))?;
    if row.len() != plan.subgroups.len() {
        return Err(CostError::SubgroupMismatch { plan: plan.id, expected: plan.subgroups.len(), found: row.len() });
    }
    let subgroups: Vec<SubgroupCost> = plan
        .subgroups
        .iter()
        .zip(row)
        .map(|(sg, traffic)| SubgroupCost {
            name: sg.rule.name.clone(),
            calls_per_month: traffic.calls_per_month,
            call_cost: expected_call_cost(&sg.payoff, &traffic.duration, mode),
        })
        .collect();
    let total = subgroups.iter().map(|s| s.calls_per_month * s.call_cost).sum();
    Ok((total, subgroups))
}

/// Fixed cost of being on `target` next month.
///
/// Subscription is always paid; the switch fee only when leaving the current
/// plan; the SIM purchase only when no SIM of the target's provider is owned.
pub fn fixed_cost(target: &BillingPlan, context: &SubscriberContext) -> f64 {
    let mut fee = target.fixed.subscription_fee;
    if target.id != context.current_plan_id {
        fee = fee + target.fixed.switch_fee;
    }
    if !context.owned_sim_providers.contains(&target.provider) {
        fee = fee + target.fixed.purchase_cost;
    }
    fee.as_f64()
}

/// One breakdown per candidate plan (active plans plus the current one), in catalog order.
pub fn full_costs(
    catalog: &Catalog,
    profile: &TrafficProfile,
    mode: BillingMode,
) -> Result<Vec<CostBreakdown>, CostError> {
    catalog
        .candidates()
        .map(|plan| {
            let (variable, subgroups) = variable_cost(plan, profile, mode)?;
            let fixed = fixed_cost(plan, catalog.context());
            Ok(CostBreakdown {
                plan_id: plan.id,
                plan_name: plan.name.clone(),
                subgroups,
                services: BTreeMap::from([(Service::Tel, variable)]),
                variable,
                fixed,
                full: variable + fixed,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Ranking {
    /// Plan ids by ascending full cost.
    pub order: Vec<PlanId>,
    pub optimal: PlanId,
}

/// Orders plans by full cost. Exact ties go to `current`, then to the lower id.
pub fn rank(breakdowns: &[CostBreakdown], current: Option<PlanId>) -> Result<Ranking, CostError> {
    let mut order: Vec<&CostBreakdown> = breakdowns.iter().collect();
    order.sort_by(|a, b| {
        a.full
            .total_cmp(&b.full)
            .then_with(|| (Some(b.plan_id) == current).cmp(&(Some(a.plan_id) == current)))
            .then_with(|| a.plan_id.cmp(&b.plan_id))
    });
    let order: Vec<PlanId> = order.into_iter().map(|b| b.plan_id).collect();
    let optimal = *order.first().ok_or(CostError::Empty)?;
    Ok(Ranking { order, optimal })
}

/// Full costs, ranking, and the recommendation for one subscriber.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    pub current_plan_id: PlanId,
    pub billing_mode: BillingMode,
    pub breakdowns: Vec<CostBreakdown>,
    pub ranking: Ranking,
}

impl CostReport {
    pub fn evaluate(catalog: &Catalog, profile: &TrafficProfile, mode: BillingMode) -> Result<Self, CostError> {
        let breakdowns = full_costs(catalog, profile, mode)?;
        let current = catalog.context().current_plan_id;
        let ranking = rank(&breakdowns, Some(current))?;
        Ok(CostReport { current_plan_id: current, billing_mode: mode, breakdowns, ranking })
    }

    pub fn breakdown(&self, id: PlanId) -> Option<&CostBreakdown> {
        self.breakdowns.iter().find(|b| b.plan_id == id)
    }

    pub fn optimal(&self) -> &CostBreakdown {
        self.breakdown(self.ranking.optimal).expect("ranked plan has a breakdown")
    }

    /// 1-based position of `id` in the ranking.
    pub fn rank_of(&self, id: PlanId) -> Option<usize> {
        self.ranking.order.iter().position(|&p| p == id).map(|i| i + 1)
    }

    /// Subgroup names across all plans, in order of first appearance.
    pub fn subgroup_columns(&self) -> Vec<String> {
        let mut columns: Vec<String> = Vec::new();
        for b in &self.breakdowns {
            for s in &b.subgroups {
                if !columns.contains(&s.name) {
                    columns.push(s.name.clone());
                }
            }
        }
        columns
    }

    /// One row per plan: plan, name, one expected call cost per subgroup column
    /// (blank where the plan has no such subgroup), variable, fixed, full, rank.
    pub fn to_csv(&self) -> String {
        let columns = self.subgroup_columns();
        let mut writer = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["plan".to_string(), "name".to_string()];
        header.extend(columns.iter().map(|c| format!("s:{c}")));
        header.extend(["variable", "fixed", "full", "rank"].map(String::from));
        writer.write_record(&header).expect("in-memory csv");
        for b in &self.breakdowns {
            let mut row = vec![b.plan_id.to_string(), b.plan_name.clone()];
            for column in &columns {
                row.push(
                    b.subgroups
                        .iter()
                        .find(|s| &s.name == column)
                        .map_or_else(String::new, |s| s.call_cost.to_string()),
                );
            }
            row.push(b.variable.to_string());
            row.push(b.fixed.to_string());
            row.push(b.full.to_string());
            row.push(self.rank_of(b.plan_id).map_or_else(String::new, |r| r.to_string()));
            writer.write_record(&row).expect("in-memory csv");
        }
        String::from_utf8(writer.into_inner().expect("in-memory csv")).expect("utf-8 csv")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
