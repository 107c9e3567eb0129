//! How the optimal plan changes when total traffic is multiplied by `k`.
//!
//! Subgroup proportions and duration models stay fixed; only call forces
//! scale. Each plan's full cost is then affine in `k` (fixed fees do not
//! scale), the optimal cost is the lower envelope of those lines, and the
//! optimal plan changes at the envelope's kinks.

mod regression;

pub use regression::{polyfit, RegressionError, RegressionFit};

use serde::Serialize;

use crate::catalog::{Catalog, PlanId};
use crate::cost::{BillingMode, CostError, CostReport};
use crate::traffic::TrafficProfile;

#[derive(Debug, thiserror::Error)]
pub enum SensitivityError {
    #[error("traffic multiplier must be positive and finite, got {0}")]
    BadMultiplier(f64),
    #[error("k grid is empty")]
    EmptyGrid,
    #[error("k grid must be strictly increasing")]
    UnsortedGrid,
    #[error("invalid k grid: from {from}, to {to}, step {step}")]
    BadGridSpec { from: f64, to: f64, step: f64 },
    #[error("need at least {need} sweep points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Regression(#[from] RegressionError),
}

/// Multiplies every call force by `k`.
pub fn scale_traffic(profile: &TrafficProfile, k: f64) -> Result<TrafficProfile, SensitivityError> {
    if !(k.is_finite() && k > 0.0) {
        return Err(SensitivityError::BadMultiplier(k));
    }
    Ok(profile.with_forces_scaled(k))
}

/// `from, from + step, ...` up to and including `to` (within rounding).
pub fn k_grid(from: f64, to: f64, step: f64) -> Result<Vec<f64>, SensitivityError> {
    let bad = || SensitivityError::BadGridSpec { from, to, step };
    if !(from.is_finite() && to.is_finite() && step.is_finite()) || from <= 0.0 || step <= 0.0 || to < from {
        return Err(bad());
    }
    let steps = ((to - from) / step + 1e-9).floor();
    if steps > 1e7 {
        return Err(bad());
    }
    Ok((0..=steps as u64).map(|i| from + i as f64 * step).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanCost {
    pub plan_id: PlanId,
    pub full: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub k: f64,
    pub optimal_plan_id: PlanId,
    pub optimal_full_cost: f64,
    /// Full cost of staying on the current plan.
    pub stay_cost: f64,
    pub plan_costs: Vec<PlanCost>,
}

/// A stretch of `k` over which one plan stays optimal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalInterval {
    pub plan_id: PlanId,
    pub k_from: f64,
    pub k_to: f64,
}

/// Re-evaluates the plan choice on scaled copies of one traffic profile.
pub struct Sweeper<'a> {
    catalog: &'a Catalog,
    profile: &'a TrafficProfile,
    mode: BillingMode,
}

impl<'a> Sweeper<'a> {
    pub fn new(catalog: &'a Catalog, profile: &'a TrafficProfile, mode: BillingMode) -> Self {
        Sweeper { catalog, profile, mode }
    }

    pub fn point(&self, k: f64) -> Result<SweepPoint, SensitivityError> {
        let scaled = scale_traffic(self.profile, k)?;
        let report = CostReport::evaluate(self.catalog, &scaled, self.mode)?;
        let stay = report
            .breakdown(report.current_plan_id)
            .expect("current plan is always a candidate");
        Ok(SweepPoint {
            k,
            optimal_plan_id: report.ranking.optimal,
            optimal_full_cost: report.optimal().full,
            stay_cost: stay.full,
            plan_costs: report
                .breakdowns
                .iter()
                .map(|b| PlanCost { plan_id: b.plan_id, full: b.full })
                .collect(),
        })
    }

    pub fn sweep(&self, grid: &[f64]) -> Result<Vec<SweepPoint>, SensitivityError> {
        if grid.is_empty() {
            return Err(SensitivityError::EmptyGrid);
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SensitivityError::UnsortedGrid);
        }
        grid.iter().map(|&k| self.point(k)).collect()
    }

    fn optimal_at(&self, k: f64) -> Result<PlanId, SensitivityError> {
        Ok(self.point(k)?.optimal_plan_id)
    }

    /// Groups a sweep into intervals of constant optimal plan. Where the
    /// optimum changes between two grid points the boundary is located by
    /// bisection; plans that win only strictly between grid points are found
    /// on the way.
    pub fn switch_points(&self, sweep: &[SweepPoint]) -> Result<Vec<OptimalInterval>, SensitivityError> {
        let Some(first) = sweep.first() else {
            return Ok(Vec::new());
        };
        let mut intervals = Vec::new();
        let mut current = OptimalInterval { plan_id: first.optimal_plan_id, k_from: first.k, k_to: first.k };
        for pair in sweep.windows(2) {
            let (left, right) = (&pair[0], &pair[1]);
            let mut lo = left.k;
            let mut budget = self.catalog.plans().len();
            while current.plan_id != right.optimal_plan_id && budget > 0 {
                budget -= 1;
                let (boundary, next_plan, next_lo) = self.bisect(lo, current.plan_id, right.k)?;
                current.k_to = boundary;
                intervals.push(current);
                current = OptimalInterval { plan_id: next_plan, k_from: boundary, k_to: boundary };
                lo = next_lo;
            }
            if current.plan_id != right.optimal_plan_id {
                // the sweep came from a different catalog or profile; trust the grid
                current.k_to = left.k;
                intervals.push(current);
                current = OptimalInterval { plan_id: right.optimal_plan_id, k_from: right.k, k_to: right.k };
            }
            current.k_to = right.k;
        }
        current.k_to = sweep.last().map_or(current.k_to, |p| p.k);
        intervals.push(current);
        Ok(intervals)
    }

    /// Narrows `[lo, hi]` to where `plan` stops being optimal. Returns the
    /// boundary estimate, the plan optimal just past it, and the right end of
    /// the final bracket.
    fn bisect(&self, mut lo: f64, plan: PlanId, mut hi: f64) -> Result<(f64, PlanId, f64), SensitivityError> {
        for _ in 0..200 {
            if hi - lo <= 1e-12 * hi.abs().max(1.0) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.optimal_at(mid)? == plan {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((0.5 * (lo + hi), self.optimal_at(hi)?, hi))
    }
}

/// Sweep table: `k, optimal_plan, optimal_cost, stay_cost, plan_<id>...`.
pub fn sweep_to_csv(points: &[SweepPoint]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let plan_ids: Vec<PlanId> = points.first().map_or_else(Vec::new, |p| p.plan_costs.iter().map(|c| c.plan_id).collect());
    let mut header: Vec<String> = ["k", "optimal_plan", "optimal_cost", "stay_cost"].map(String::from).to_vec();
    header.extend(plan_ids.iter().map(|id| format!("plan_{id}")));
    writer.write_record(&header).expect("in-memory csv");
    for p in points {
        let mut row = vec![p.k.to_string(), p.optimal_plan_id.to_string(), p.optimal_full_cost.to_string(), p.stay_cost.to_string()];
        row.extend(p.plan_costs.iter().map(|c| c.full.to_string()));
        writer.write_record(&row).expect("in-memory csv");
    }
    String::from_utf8(writer.into_inner().expect("in-memory csv")).expect("utf-8 csv")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedFit {
    /// Model form, e.g. `"optimal ~ 1 + k + k^2"`.
    pub model: String,
    #[serde(flatten)]
    pub fit: RegressionFit,
}

/// Regression models of the stay-put and with-switching cost curves.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    /// Cost of never switching, linear through the origin.
    pub stay_through_origin: NamedFit,
    /// Cost with optimal switching, linear through the origin.
    pub optimal_through_origin: NamedFit,
    pub optimal_linear: NamedFit,
    pub optimal_quadratic: NamedFit,
    pub optimal_cubic: NamedFit,
}

impl FitReport {
    pub fn fits(&self) -> [&NamedFit; 5] {
        [
            &self.stay_through_origin,
            &self.optimal_through_origin,
            &self.optimal_linear,
            &self.optimal_quadratic,
            &self.optimal_cubic,
        ]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit report serializes")
    }
}

pub const MIN_FIT_POINTS: usize = 5;

pub fn fit_report(sweep: &[SweepPoint]) -> Result<FitReport, SensitivityError> {
    if sweep.len() < MIN_FIT_POINTS {
        return Err(SensitivityError::TooFewPoints { need: MIN_FIT_POINTS, got: sweep.len() });
    }
    let stay: Vec<(f64, f64)> = sweep.iter().map(|p| (p.k, p.stay_cost)).collect();
    let optimal: Vec<(f64, f64)> = sweep.iter().map(|p| (p.k, p.optimal_full_cost)).collect();
    let named = |model: &str, points: &[(f64, f64)], degree, intercept| -> Result<NamedFit, SensitivityError> {
        Ok(NamedFit { model: model.to_string(), fit: polyfit(points, degree, intercept)? })
    };
    Ok(FitReport {
        stay_through_origin: named("stay ~ k", &stay, 1, false)?,
        optimal_through_origin: named("optimal ~ k", &optimal, 1, false)?,
        optimal_linear: named("optimal ~ 1 + k", &optimal, 1, true)?,
        optimal_quadratic: named("optimal ~ 1 + k + k^2", &optimal, 2, true)?,
        optimal_cubic: named("optimal ~ 1 + k + k^2 + k^3", &optimal, 3, true)?,
    })
}
