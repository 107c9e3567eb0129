use std::collections::BTreeMap;
use std::io::Read;

use chrono::{Months, NaiveDate};
use serde::{Deserialize, Serialize};

use super::classify::ClassifiedCall;
use super::duration::{fit_exponential, histogram_of, DurationError, DurationModel, DEFAULT_TRUNCATION};
use crate::catalog::{Catalog, PlanId};

#[derive(Debug, thiserror::Error)]
pub enum ProfileError {
    #[error("i/o error reading profile: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed profile document: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("observation period must be positive, got {0} months")]
    NonPositiveMonths(f64),
    #[error("no outgoing call traffic to estimate from")]
    NoTraffic,
    #[error("profile has no plans")]
    Empty,
    #[error("plan {plan}, subgroup {subgroup:?}: call force {value} is not a non-negative number")]
    BadForce { plan: PlanId, subgroup: String, value: f64 },
    #[error("plan {plan}: subgroup call forces total {total} per month, other plans total {expected}")]
    RowTotalMismatch { plan: PlanId, total: f64, expected: f64 },
    #[error("plan {plan}, subgroup {subgroup:?}: {source}")]
    Duration {
        plan: PlanId,
        subgroup: String,
        #[source]
        source: DurationError,
    },
    #[error("plan {plan}, subgroup {subgroup:?}: no duration model and no profile default")]
    MissingDuration { plan: PlanId, subgroup: String },
    #[error("profile has no row for plan {0}")]
    MissingPlan(PlanId),
    #[error("plan {plan}: profile subgroups {found:?} do not match catalog subgroups {expected:?}")]
    SubgroupMismatch { plan: PlanId, expected: Vec<String>, found: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubgroupTraffic {
    pub name: String,
    /// Average calls per month (λ).
    pub calls_per_month: f64,
    pub duration: DurationModel,
}

/// Per-plan subgroup call forces and duration models.
///
/// Every plan row splits the same total monthly call count among that plan's
/// own subgroups.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficProfile {
    observation_months: f64,
    plans: BTreeMap<PlanId, Vec<SubgroupTraffic>>,
}

impl TrafficProfile {
    pub fn new(observation_months: f64, plans: BTreeMap<PlanId, Vec<SubgroupTraffic>>) -> Result<Self, ProfileError> {
        if !(observation_months.is_finite() && observation_months > 0.0) {
            return Err(ProfileError::NonPositiveMonths(observation_months));
        }
        if plans.is_empty() {
            return Err(ProfileError::Empty);
        }
        let mut expected: Option<f64> = None;
        for (&plan, row) in &plans {
            for sg in row {
                if !(sg.calls_per_month.is_finite() && sg.calls_per_month >= 0.0) {
                    return Err(ProfileError::BadForce {
                        plan,
                        subgroup: sg.name.clone(),
                        value: sg.calls_per_month,
                    });
                }
                sg.duration.validate().map_err(|source| ProfileError::Duration {
                    plan,
                    subgroup: sg.name.clone(),
                    source,
                })?;
            }
            let total: f64 = row.iter().map(|s| s.calls_per_month).sum();
            match expected {
                None => expected = Some(total),
                Some(e) if (total - e).abs() > 1e-9 * e.abs().max(1.0) => {
                    return Err(ProfileError::RowTotalMismatch { plan, total, expected: e });
                }
                Some(_) => {}
            }
        }
        Ok(TrafficProfile { observation_months, plans })
    }

    pub fn observation_months(&self) -> f64 {
        self.observation_months
    }

    pub fn plan(&self, id: PlanId) -> Option<&[SubgroupTraffic]> {
        self.plans.get(&id).map(Vec::as_slice)
    }

    pub fn plans(&self) -> impl Iterator<Item = (PlanId, &[SubgroupTraffic])> {
        self.plans.iter().map(|(&id, row)| (id, row.as_slice()))
    }

    /// Total calls per month (identical for every plan row).
    pub fn total_calls_per_month(&self) -> f64 {
        self.plans
            .values()
            .next()
            .map_or(0.0, |row| row.iter().map(|s| s.calls_per_month).sum())
    }

    /// Checks that every catalog plan has a row whose subgroup names match in order.
    pub fn check_against(&self, catalog: &Catalog) -> Result<(), ProfileError> {
        for plan in catalog.plans() {
            let row = self.plan(plan.id).ok_or(ProfileError::MissingPlan(plan.id))?;
            let expected: Vec<String> = plan.subgroup_names().map(str::to_string).collect();
            let found: Vec<String> = row.iter().map(|s| s.name.clone()).collect();
            if expected != found {
                return Err(ProfileError::SubgroupMismatch { plan: plan.id, expected, found });
            }
        }
        Ok(())
    }

    /// Copy with every call force multiplied by `factor`; durations untouched.
    pub(crate) fn with_forces_scaled(&self, factor: f64) -> TrafficProfile {
        let plans = self
            .plans
            .iter()
            .map(|(&id, row)| {
                let row = row
                    .iter()
                    .map(|s| SubgroupTraffic { calls_per_month: s.calls_per_month * factor, ..s.clone() })
                    .collect();
                (id, row)
            })
            .collect();
        TrafficProfile { observation_months: self.observation_months, plans }
    }

    pub fn load<R: Read>(mut source: R) -> Result<Self, ProfileError> {
        let mut text = String::new();
        source.read_to_string(&mut text)?;
        Self::from_json_str(&text)
    }

    /// Subgroups without a `duration` use the document-level `duration`.
    pub fn from_json_str(text: &str) -> Result<Self, ProfileError> {
        let doc: ProfileDoc = serde_json::from_str(text)?;
        let mut plans = BTreeMap::new();
        for row in doc.plans {
            let plan = PlanId(row.plan_id);
            let subgroups = row
                .subgroups
                .into_iter()
                .map(|sg| {
                    let duration = sg.duration.or_else(|| doc.duration.clone()).ok_or_else(|| {
                        ProfileError::MissingDuration { plan, subgroup: sg.name.clone() }
                    })?;
                    Ok(SubgroupTraffic { name: sg.name, calls_per_month: sg.calls_per_month, duration })
                })
                .collect::<Result<Vec<_>, ProfileError>>()?;
            plans.insert(plan, subgroups);
        }
        TrafficProfile::new(doc.observation_months, plans)
    }

    pub fn to_json_string(&self) -> String {
        let doc = ProfileDoc {
            observation_months: self.observation_months,
            duration: None,
            plans: self
                .plans
                .iter()
                .map(|(id, row)| PlanRowDoc {
                    plan_id: id.0,
                    subgroups: row
                        .iter()
                        .map(|s| SubgroupDoc {
                            name: s.name.clone(),
                            calls_per_month: s.calls_per_month,
                            duration: Some(s.duration.clone()),
                        })
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("profile serializes")
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileDoc {
    observation_months: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    duration: Option<DurationModel>,
    plans: Vec<PlanRowDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanRowDoc {
    plan_id: u32,
    subgroups: Vec<SubgroupDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SubgroupDoc {
    name: String,
    calls_per_month: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    duration: Option<DurationModel>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DurationEstimate {
    /// Moment-fitted exponential, cut off after `truncation` minutes.
    Exponential { truncation: Option<u32> },
    /// Per-minute relative frequencies up to `horizon`.
    Histogram { horizon: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateOptions {
    pub duration: DurationEstimate,
    /// One duration model from all calls, shared by every subgroup.
    pub pooled: bool,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            duration: DurationEstimate::Exponential { truncation: Some(DEFAULT_TRUNCATION) },
            pooled: true,
        }
    }
}

fn estimate_duration(calls: &[&ClassifiedCall], how: DurationEstimate) -> Result<DurationModel, DurationError> {
    match how {
        DurationEstimate::Exponential { truncation } => {
            let minutes: Vec<f64> = calls.iter().map(|c| c.duration_minutes()).collect();
            Ok(fit_exponential(&minutes)?.model(truncation))
        }
        DurationEstimate::Histogram { horizon } => histogram_of(calls.iter().map(|c| c.minute_index), horizon),
    }
}

/// Splits calls into each catalog plan's subgroups and converts counts to calls per month.
pub fn estimate_profile(
    calls: &[ClassifiedCall],
    catalog: &Catalog,
    months: f64,
    options: EstimateOptions,
) -> Result<TrafficProfile, ProfileError> {
    if !(months.is_finite() && months > 0.0) {
        return Err(ProfileError::NonPositiveMonths(months));
    }
    if calls.is_empty() {
        return Err(ProfileError::NoTraffic);
    }
    let pooled = if options.pooled {
        let all: Vec<&ClassifiedCall> = calls.iter().collect();
        Some(estimate_duration(&all, options.duration).map_err(|source| ProfileError::Duration {
            plan: catalog.context().current_plan_id,
            subgroup: "(pooled)".into(),
            source,
        })?)
    } else {
        None
    };

    let mut plans = BTreeMap::new();
    for plan in catalog.plans() {
        let mut buckets: Vec<Vec<&ClassifiedCall>> = vec![Vec::new(); plan.subgroups.len()];
        for call in calls {
            let j = plan
                .classify(call.destination, call.day)
                .expect("validated plans classify every call");
            buckets[j].push(call);
        }
        let mut row = Vec::with_capacity(buckets.len());
        for (sg, bucket) in plan.subgroups.iter().zip(&buckets) {
            let duration = match (&pooled, bucket.is_empty()) {
                (Some(model), _) => model.clone(),
                (None, true) => DurationModel::Empirical { mass: Vec::new() },
                (None, false) => estimate_duration(bucket, options.duration).map_err(|source| {
                    ProfileError::Duration { plan: plan.id, subgroup: sg.rule.name.clone(), source }
                })?,
            };
            row.push(SubgroupTraffic {
                name: sg.rule.name.clone(),
                calls_per_month: bucket.len() as f64 / months,
                duration,
            });
        }
        plans.insert(plan.id, row);
    }
    TrafficProfile::new(months, plans)
}

/// Length of the inclusive date window `[first, last]` in months: whole
/// calendar months from `first`, plus the trailing partial month pro rata.
pub fn observation_months(first: NaiveDate, last: NaiveDate) -> f64 {
    let (first, last) = if first <= last { (first, last) } else { (last, first) };
    let end = last.succ_opt().unwrap_or(last);
    let mut cursor = first;
    let mut months = 0u32;
    loop {
        let Some(next) = cursor.checked_add_months(Months::new(1)) else {
            return f64::from(months);
        };
        if next > end {
            let remaining = (end - cursor).num_days() as f64;
            let month_len = (next - cursor).num_days() as f64;
            return f64::from(months) + remaining / month_len;
        }
        months += 1;
        cursor = next;
    }
}
