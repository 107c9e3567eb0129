//! Monte-Carlo billing: synthesize months of traffic and charge them to every plan.
//!
//! Each traffic stream is a Poisson process of calls (exponential gaps at rate
//! λ per month) with exponential durations (rate μ per minute). Every
//! `(run, stream)` pair draws from its own ChaCha substream keyed by the
//! master seed, so results do not depend on thread scheduling.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::Serialize;

use crate::catalog::{Catalog, PayoffFunction, PlanId};
use crate::cost::BillingMode;
use crate::traffic::{ClassifiedCall, DurationModel, TrafficProfile};

/// Days per simulated month.
pub const MONTH_DAYS: f64 = 30.0;

const MAX_STREAMS: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("call duration must be positive, got {0}")]
    NonPositiveDuration(f64),
    #[error("no stream mapping for plan {0}")]
    MissingMapping(PlanId),
    #[error("plan {plan} has {expected} subgroups but {found} mapped streams")]
    MappingMismatch { plan: PlanId, expected: usize, found: usize },
    #[error("plan {plan}, subgroup {subgroup:?}: simulation needs an exponential duration model")]
    UnsupportedDuration { plan: PlanId, subgroup: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrafficStream {
    pub name: String,
    pub calls_per_month: f64,
    /// Duration rate in 1/minutes.
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub seed: u64,
    pub runs: u32,
    pub streams: Vec<TrafficStream>,
    pub billing_mode: BillingMode,
}

/// For each plan, the stream feeding each of its subgroups.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SubgroupMapping {
    plans: BTreeMap<PlanId, Vec<usize>>,
}

impl SubgroupMapping {
    pub fn insert(&mut self, plan: PlanId, streams: Vec<usize>) {
        self.plans.insert(plan, streams);
    }

    pub fn streams_for(&self, plan: PlanId) -> Option<&[usize]> {
        self.plans.get(&plan).map(Vec::as_slice)
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.runs == 0 {
            return Err(SimError::InvalidConfig("runs must be at least 1".into()));
        }
        if self.streams.len() > MAX_STREAMS {
            return Err(SimError::InvalidConfig(format!("at most {MAX_STREAMS} streams")));
        }
        for s in &self.streams {
            if !(s.calls_per_month.is_finite() && s.calls_per_month >= 0.0) {
                return Err(SimError::InvalidConfig(format!("stream {:?}: bad call force {}", s.name, s.calls_per_month)));
            }
            if !(s.mu.is_finite() && s.mu > 0.0) {
                return Err(SimError::InvalidConfig(format!("stream {:?}: bad duration rate {}", s.name, s.mu)));
            }
        }
        Ok(())
    }

    /// Builds streams from a profile with exponential duration models.
    ///
    /// Subgroups that share a name and parameters across plans share one
    /// stream, so those plans are billed for the same synthetic calls.
    pub fn from_profile(
        profile: &TrafficProfile,
        seed: u64,
        runs: u32,
        billing_mode: BillingMode,
    ) -> Result<(SimConfig, SubgroupMapping), SimError> {
        let mut streams: Vec<TrafficStream> = Vec::new();
        let mut mapping = SubgroupMapping::default();
        let mut shared: BTreeMap<(String, u64, u64), usize> = BTreeMap::new();
        for (plan, row) in profile.plans() {
            let mut indices = Vec::with_capacity(row.len());
            for sg in row {
                let DurationModel::Exponential { mu, .. } = sg.duration else {
                    return Err(SimError::UnsupportedDuration { plan, subgroup: sg.name.clone() });
                };
                let key = (sg.name.clone(), sg.calls_per_month.to_bits(), mu.to_bits());
                let index = *shared.entry(key).or_insert_with(|| {
                    let name = if streams.iter().any(|s| s.name == sg.name) {
                        format!("plan{plan}:{}", sg.name)
                    } else {
                        sg.name.clone()
                    };
                    streams.push(TrafficStream { name, calls_per_month: sg.calls_per_month, mu });
                    streams.len() - 1
                });
                indices.push(index);
            }
            mapping.insert(plan, indices);
        }
        let config = SimConfig { seed, runs, streams, billing_mode };
        config.validate()?;
        Ok((config, mapping))
    }
}

/// Generator for stream `stream` in run `run`.
pub fn stream_rng(seed: u64, run: u32, stream: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((u64::from(run) << 16) | stream as u64);
    rng
}

/// Durations (minutes) of the calls arriving in one simulated month.
pub fn generate_month<R: Rng + ?Sized>(stream: &TrafficStream, rng: &mut R) -> Vec<f64> {
    if stream.calls_per_month <= 0.0 {
        return Vec::new();
    }
    let gaps = Exp::new(stream.calls_per_month / MONTH_DAYS).expect("positive arrival rate");
    let durations = Exp::new(stream.mu).expect("positive duration rate");
    let mut out = Vec::new();
    let mut clock = gaps.sample(rng);
    while clock <= MONTH_DAYS {
        let mut d = durations.sample(rng);
        while d <= 0.0 {
            d = durations.sample(rng);
        }
        out.push(d);
        clock += gaps.sample(rng);
    }
    out
}

/// Charge for one call of `duration_minutes`; the billed minute is the ceiling.
pub fn bill_call(payoff: &PayoffFunction, duration_minutes: f64, mode: BillingMode) -> Result<f64, SimError> {
    if !(duration_minutes > 0.0) {
        return Err(SimError::NonPositiveDuration(duration_minutes));
    }
    let minute = duration_minutes.ceil().min(f64::from(u32::MAX)) as u32;
    Ok(match mode {
        BillingMode::Lookup => payoff.rate_at(minute).as_f64(),
        BillingMode::Cumulative => payoff.cumulative_through(minute),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Percentiles {
    pub p5: f64,
    pub p50: f64,
    pub p95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanSimStats {
    pub plan_id: PlanId,
    /// Sample mean of the monthly variable cost.
    pub mean: f64,
    pub std_dev: f64,
    pub std_error: f64,
    pub percentiles: Percentiles,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub seed: u64,
    pub runs: u32,
    pub billing_mode: BillingMode,
    pub plans: Vec<PlanSimStats>,
}

impl SimResult {
    pub fn plan(&self, id: PlanId) -> Option<&PlanSimStats> {
        self.plans.iter().find(|p| p.plan_id == id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sim result serializes")
    }
}

/// Simulates `config.runs` months and summarizes each catalog plan's monthly variable cost.
pub fn run(config: &SimConfig, catalog: &Catalog, mapping: &SubgroupMapping) -> Result<SimResult, SimError> {
    config.validate()?;
    let mut plans = Vec::with_capacity(catalog.plans().len());
    for plan in catalog.plans() {
        let streams = mapping.streams_for(plan.id).ok_or(SimError::MissingMapping(plan.id))?;
        if streams.len() != plan.subgroups.len() {
            return Err(SimError::MappingMismatch { plan: plan.id, expected: plan.subgroups.len(), found: streams.len() });
        }
        if let Some(&bad) = streams.iter().find(|&&s| s >= config.streams.len()) {
            return Err(SimError::InvalidConfig(format!("plan {}: stream index {bad} out of range", plan.id)));
        }
        plans.push((plan, streams));
    }

    let monthly: Vec<Vec<f64>> = (0..config.runs)
        .into_par_iter()
        .map(|run| {
            let months: Vec<Vec<f64>> = config
                .streams
                .iter()
                .enumerate()
                .map(|(j, stream)| generate_month(stream, &mut stream_rng(config.seed, run, j)))
                .collect();
            plans
                .iter()
                .map(|(plan, streams)| {
                    plan.subgroups
                        .iter()
                        .zip(streams.iter())
                        .map(|(sg, &j)| {
                            months[j]
                                .iter()
                                .map(|&d| bill_call(&sg.payoff, d, config.billing_mode).expect("positive duration"))
                                .sum::<f64>()
                        })
                        .sum()
                })
                .collect()
        })
        .collect();

    let stats = plans
        .iter()
        .enumerate()
        .map(|(i, (plan, _))| {
            let samples: Vec<f64> = monthly.iter().map(|row| row[i]).collect();
            summarize(plan.id, samples)
        })
        .collect();

    Ok(SimResult { seed: config.seed, runs: config.runs, billing_mode: config.billing_mode, plans: stats })
}

fn summarize(plan_id: PlanId, mut samples: Vec<f64>) -> PlanSimStats {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let std_dev = if samples.len() > 1 {
        (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    samples.sort_by(f64::total_cmp);
    PlanSimStats {
        plan_id,
        mean,
        std_dev,
        std_error: std_dev / n.sqrt(),
        percentiles: Percentiles {
            p5: percentile(&samples, 0.05),
            p50: percentile(&samples, 0.50),
            p95: percentile(&samples, 0.95),
        },
    }
}

/// Linear interpolation between closest ranks of a sorted sample.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Monthly cost of each plan if the recorded calls were billed under it.
pub fn replay_trace(
    calls: &[ClassifiedCall],
    catalog: &Catalog,
    months: f64,
    mode: BillingMode,
) -> Result<Vec<(PlanId, f64)>, SimError> {
    if !(months.is_finite() && months > 0.0) {
        return Err(SimError::InvalidConfig(format!("observation period {months} months")));
    }
    catalog
        .plans()
        .iter()
        .map(|plan| {
            let mut total = 0.0;
            for call in calls {
                let j = plan.classify(call.destination, call.day).expect("validated plan");
                total += bill_call(&plan.subgroups[j].payoff, call.duration_minutes(), mode)?;
            }
            Ok((plan.id, total / months))
        })
        .collect()
}
