//! Billing-plan catalog: plans, fixed fees, subgroup rules and payoff functions.
//!
//! A catalog is loaded from a JSON document, validated once, and is immutable
//! afterwards. Every payoff function is a per-minute price list stored as a
//! run of closed segments `[from, to]` followed by one open tail segment, so
//! that `rate_at` is defined for every minute `>= 1`.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::money::Rubles;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlanId(pub u32);

impl fmt::Display for PlanId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SegmentError {
    #[error("payoff function has no segments")]
    Empty,
    #[error("first segment starts at minute {0}, expected 1")]
    FirstNotAtOne(u32),
    #[error("gap at minute {expected}: next segment starts at {found}")]
    Gap { expected: u32, found: u32 },
    #[error("segment starting at minute {found} overlaps previous segment ending at {previous_end}")]
    Overlap { previous_end: u32, found: u32 },
    #[error("segment [{from}..{to}] ends before it starts")]
    Reversed { from: u32, to: u32 },
    #[error("open segment starting at minute {0} is not the last segment")]
    OpenNotLast(u32),
    #[error("last segment ends at minute {0} but must be open")]
    NoOpenTail(u32),
    #[error("negative rate {rate} in segment starting at minute {from}")]
    NegativeRate { from: u32, rate: Rubles },
}

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("malformed catalog document: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("i/o error reading catalog: {0}")]
    Io(#[from] std::io::Error),
    #[error("duplicate plan id {0}")]
    DuplicatePlanId(PlanId),
    #[error("plan id must be >= 1")]
    ZeroPlanId,
    #[error("plan {plan}, subgroup {subgroup:?}: {source}")]
    Segment {
        plan: PlanId,
        subgroup: String,
        #[source]
        source: SegmentError,
    },
    #[error("plan {0} has no subgroups")]
    NoSubgroups(PlanId),
    #[error("plan {plan}: no subgroup rule matches {destination} calls on {day}s")]
    IncompleteCoverage {
        plan: PlanId,
        destination: DestinationClass,
        day: DayClass,
    },
    #[error("plan {0} has more than one full wildcard subgroup rule")]
    MultipleWildcards(PlanId),
    #[error("plan {plan}: negative fixed fee {field}")]
    NegativeFee { plan: PlanId, field: &'static str },
    #[error("current plan id {0} is not in the catalog")]
    UnknownCurrentPlan(PlanId),
    #[error("catalog has no plans")]
    NoPlans,
}

/// Upper end of a rate segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentEnd {
    Minute(u32),
    Open,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RateSegment {
    pub from: u32,
    pub to: SegmentEnd,
    pub rate: Rubles,
}

impl RateSegment {
    pub fn closed(from: u32, to: u32, rate: Rubles) -> Self {
        RateSegment { from, to: SegmentEnd::Minute(to), rate }
    }

    pub fn open(from: u32, rate: Rubles) -> Self {
        RateSegment { from, to: SegmentEnd::Open, rate }
    }

    pub fn contains(&self, minute: u32) -> bool {
        minute >= self.from
            && match self.to {
                SegmentEnd::Minute(to) => minute <= to,
                SegmentEnd::Open => true,
            }
    }
}

/// Piecewise-constant per-minute rate schedule covering minutes `1..`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PayoffFunction {
    segments: Vec<RateSegment>,
}

impl PayoffFunction {
    pub fn new(segments: Vec<RateSegment>) -> Result<Self, SegmentError> {
        let first = segments.first().ok_or(SegmentError::Empty)?;
        if first.from != 1 {
            return Err(SegmentError::FirstNotAtOne(first.from));
        }
        let mut expected = 1u32;
        for (i, seg) in segments.iter().enumerate() {
            if seg.rate.is_negative() {
                return Err(SegmentError::NegativeRate { from: seg.from, rate: seg.rate });
            }
            if seg.from > expected {
                return Err(SegmentError::Gap { expected, found: seg.from });
            }
            if seg.from < expected {
                return Err(SegmentError::Overlap { previous_end: expected - 1, found: seg.from });
            }
            match seg.to {
                SegmentEnd::Minute(to) => {
                    if to < seg.from {
                        return Err(SegmentError::Reversed { from: seg.from, to });
                    }
                    if i + 1 == segments.len() {
                        return Err(SegmentError::NoOpenTail(to));
                    }
                    expected = to + 1;
                }
                SegmentEnd::Open => {
                    if i + 1 != segments.len() {
                        return Err(SegmentError::OpenNotLast(seg.from));
                    }
                }
            }
        }
        Ok(PayoffFunction { segments })
    }

    /// A single open segment charging `rate` for every minute.
    pub fn flat(rate: Rubles) -> Self {
        PayoffFunction { segments: vec![RateSegment::open(1, rate)] }
    }

    pub fn segments(&self) -> &[RateSegment] {
        &self.segments
    }

    fn segment_index(&self, minute: u32) -> usize {
        // segments are sorted by `from`; the first one starts at minute 1
        self.segments.partition_point(|s| s.from <= minute.max(1)) - 1
    }

    /// Rate charged for a call whose last minute is `minute` (minutes start at 1).
    pub fn rate_at(&self, minute: u32) -> Rubles {
        self.segments[self.segment_index(minute)].rate
    }

    /// Sum of `rate_at(m)` for `m` in `1..=minute`.
    pub fn cumulative_through(&self, minute: u32) -> f64 {
        let mut total = 0.0;
        for seg in &self.segments {
            if seg.from > minute {
                break;
            }
            let end = match seg.to {
                SegmentEnd::Minute(to) => to.min(minute),
                SegmentEnd::Open => minute,
            };
            total += seg.rate.as_f64() * f64::from(end - seg.from + 1);
        }
        total
    }

    /// Multiplies every rate by an integer factor.
    pub fn scaled(&self, factor: i64) -> PayoffFunction {
        PayoffFunction {
            segments: self
                .segments
                .iter()
                .map(|s| RateSegment { rate: s.rate * factor, ..*s })
                .collect(),
        }
    }
}

/// Where a call goes, as seen by the subscriber's network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DestinationClass {
    SameNetwork,
    OtherMobile,
    Landline,
}

impl DestinationClass {
    pub const ALL: [DestinationClass; 3] =
        [DestinationClass::SameNetwork, DestinationClass::OtherMobile, DestinationClass::Landline];

    pub fn as_str(self) -> &'static str {
        match self {
            DestinationClass::SameNetwork => "same-network",
            DestinationClass::OtherMobile => "other-mobile",
            DestinationClass::Landline => "landline",
        }
    }
}

impl fmt::Display for DestinationClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for DestinationClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DestinationClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s.trim())
            .ok_or_else(|| format!("unknown destination class {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DayClass {
    Workday,
    Weekend,
}

impl DayClass {
    pub const ALL: [DayClass; 2] = [DayClass::Workday, DayClass::Weekend];
}

impl fmt::Display for DayClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DayClass::Workday => "workday",
            DayClass::Weekend => "weekend",
        })
    }
}

/// Destination side of a subgroup rule. `Mobile` matches both mobile classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DestinationMatch {
    SameNetwork,
    OtherMobile,
    Landline,
    Mobile,
    Any,
}

impl DestinationMatch {
    pub fn matches(self, class: DestinationClass) -> bool {
        match self {
            DestinationMatch::Any => true,
            DestinationMatch::Mobile => class != DestinationClass::Landline,
            DestinationMatch::SameNetwork => class == DestinationClass::SameNetwork,
            DestinationMatch::OtherMobile => class == DestinationClass::OtherMobile,
            DestinationMatch::Landline => class == DestinationClass::Landline,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DayMatch {
    Workday,
    Weekend,
    Any,
}

impl DayMatch {
    pub fn matches(self, day: DayClass) -> bool {
        match self {
            DayMatch::Any => true,
            DayMatch::Workday => day == DayClass::Workday,
            DayMatch::Weekend => day == DayClass::Weekend,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubgroupRule {
    pub name: String,
    pub destination: DestinationMatch,
    pub day: DayMatch,
}

impl SubgroupRule {
    pub fn matches(&self, destination: DestinationClass, day: DayClass) -> bool {
        self.destination.matches(destination) && self.day.matches(day)
    }

    pub fn is_wildcard(&self) -> bool {
        self.destination == DestinationMatch::Any && self.day == DayMatch::Any
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subgroup {
    pub rule: SubgroupRule,
    pub payoff: PayoffFunction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FixedCostSpec {
    pub subscription_fee: Rubles,
    pub switch_fee: Rubles,
    pub purchase_cost: Rubles,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BillingPlan {
    pub id: PlanId,
    pub name: String,
    pub provider: String,
    /// Inactive plans can be kept but not switched to.
    pub active: bool,
    pub fixed: FixedCostSpec,
    pub subgroups: Vec<Subgroup>,
}

impl BillingPlan {
    /// Index of the first subgroup whose rule matches. Always `Some` for a validated plan.
    pub fn classify(&self, destination: DestinationClass, day: DayClass) -> Option<usize> {
        self.subgroups.iter().position(|s| s.rule.matches(destination, day))
    }

    pub fn subgroup_names(&self) -> impl Iterator<Item = &str> {
        self.subgroups.iter().map(|s| s.rule.name.as_str())
    }

    fn validate(&self) -> Result<(), CatalogError> {
        if self.id.0 == 0 {
            return Err(CatalogError::ZeroPlanId);
        }
        if self.subgroups.is_empty() {
            return Err(CatalogError::NoSubgroups(self.id));
        }
        if self.subgroups.iter().filter(|s| s.rule.is_wildcard()).count() > 1 {
            return Err(CatalogError::MultipleWildcards(self.id));
        }
        for (field, fee) in [
            ("subscription_fee", self.fixed.subscription_fee),
            ("switch_fee", self.fixed.switch_fee),
            ("purchase_cost", self.fixed.purchase_cost),
        ] {
            if fee.is_negative() {
                return Err(CatalogError::NegativeFee { plan: self.id, field });
            }
        }
        for destination in DestinationClass::ALL {
            for day in DayClass::ALL {
                if self.classify(destination, day).is_none() {
                    return Err(CatalogError::IncompleteCoverage { plan: self.id, destination, day });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubscriberContext {
    pub current_plan_id: PlanId,
    #[serde(default)]
    pub owned_sim_providers: BTreeSet<String>,
}

/// A validated, immutable set of billing plans plus the subscriber's situation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Catalog {
    plans: Vec<BillingPlan>,
    context: SubscriberContext,
}

impl Catalog {
    pub fn new(plans: Vec<BillingPlan>, context: SubscriberContext) -> Result<Self, CatalogError> {
        if plans.is_empty() {
            return Err(CatalogError::NoPlans);
        }
        let mut seen = HashSet::new();
        for plan in &plans {
            if !seen.insert(plan.id) {
                return Err(CatalogError::DuplicatePlanId(plan.id));
            }
            plan.validate()?;
        }
        if !seen.contains(&context.current_plan_id) {
            return Err(CatalogError::UnknownCurrentPlan(context.current_plan_id));
        }
        Ok(Catalog { plans, context })
    }

    pub fn load<R: Read>(mut source: R) -> Result<Self, CatalogError> {
        let mut text = String::new();
        source.read_to_string(&mut text)?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self, CatalogError> {
        let doc: CatalogDoc = serde_json::from_str(text)?;
        doc.into_catalog()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&CatalogDoc::from(self)).expect("catalog document serializes")
    }

    pub fn plans(&self) -> &[BillingPlan] {
        &self.plans
    }

    pub fn plan(&self, id: PlanId) -> Option<&BillingPlan> {
        self.plans.iter().find(|p| p.id == id)
    }

    pub fn context(&self) -> &SubscriberContext {
        &self.context
    }

    pub fn current_plan(&self) -> &BillingPlan {
        self.plan(self.context.current_plan_id).expect("validated current plan")
    }

    /// Plans the subscriber may end up on next month: active plans plus the current one.
    pub fn candidates(&self) -> impl Iterator<Item = &BillingPlan> {
        let current = self.context.current_plan_id;
        self.plans.iter().filter(move |p| p.active || p.id == current)
    }

    /// Same plans, different subscriber situation.
    pub fn with_context(&self, context: SubscriberContext) -> Result<Self, CatalogError> {
        Catalog::new(self.plans.clone(), context)
    }

    pub fn inactive_count(&self) -> usize {
        self.plans.iter().filter(|p| !p.active).count()
    }
}

// JSON document shapes

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogDoc {
    plans: Vec<PlanDoc>,
    context: SubscriberContext,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanDoc {
    id: u32,
    name: String,
    #[serde(default)]
    provider: String,
    #[serde(default = "default_active")]
    active: bool,
    #[serde(default)]
    fixed: FixedCostSpec,
    subgroups: Vec<SubgroupDoc>,
}

fn default_active() -> bool {
    true
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SubgroupDoc {
    name: String,
    #[serde(default = "any_destination")]
    destination_class: DestinationMatch,
    #[serde(default = "any_day")]
    day_class: DayMatch,
    segments: Vec<SegmentDoc>,
}

fn any_destination() -> DestinationMatch {
    DestinationMatch::Any
}

fn any_day() -> DayMatch {
    DayMatch::Any
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentDoc {
    from: u32,
    to: SegmentEndDoc,
    rate: Rubles,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum SegmentEndDoc {
    Minute(u32),
    Word(OpenWord),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum OpenWord {
    Open,
}

impl CatalogDoc {
    fn into_catalog(self) -> Result<Catalog, CatalogError> {
        let plans = self
            .plans
            .into_iter()
            .map(PlanDoc::into_plan)
            .collect::<Result<Vec<_>, _>>()?;
        Catalog::new(plans, self.context)
    }
}

impl PlanDoc {
    fn into_plan(self) -> Result<BillingPlan, CatalogError> {
        let id = PlanId(self.id);
        let subgroups = self
            .subgroups
            .into_iter()
            .map(|sg| {
                let segments = sg
                    .segments
                    .iter()
                    .map(|s| RateSegment {
                        from: s.from,
                        to: match s.to {
                            SegmentEndDoc::Minute(m) => SegmentEnd::Minute(m),
                            SegmentEndDoc::Word(OpenWord::Open) => SegmentEnd::Open,
                        },
                        rate: s.rate,
                    })
                    .collect();
                let payoff = PayoffFunction::new(segments).map_err(|source| CatalogError::Segment {
                    plan: id,
                    subgroup: sg.name.clone(),
                    source,
                })?;
                Ok(Subgroup {
                    rule: SubgroupRule { name: sg.name, destination: sg.destination_class, day: sg.day_class },
                    payoff,
                })
            })
            .collect::<Result<Vec<_>, CatalogError>>()?;
        Ok(BillingPlan {
            id,
            name: self.name,
            provider: self.provider,
            active: self.active,
            fixed: self.fixed,
            subgroups,
        })
    }
}

impl From<&Catalog> for CatalogDoc {
    fn from(catalog: &Catalog) -> Self {
        CatalogDoc {
            plans: catalog
                .plans
                .iter()
                .map(|p| PlanDoc {
                    id: p.id.0,
                    name: p.name.clone(),
                    provider: p.provider.clone(),
                    active: p.active,
                    fixed: p.fixed,
                    subgroups: p
                        .subgroups
                        .iter()
                        .map(|sg| SubgroupDoc {
                            name: sg.rule.name.clone(),
                            destination_class: sg.rule.destination,
                            day_class: sg.rule.day,
                            segments: sg
                                .payoff
                                .segments()
                                .iter()
                                .map(|s| SegmentDoc {
                                    from: s.from,
                                    to: match s.to {
                                        SegmentEnd::Minute(m) => SegmentEndDoc::Minute(m),
                                        SegmentEnd::Open => SegmentEndDoc::Word(OpenWord::Open),
                                    },
                                    rate: s.rate,
                                })
                                .collect(),
                        })
                        .collect(),
                })
                .collect(),
            context: catalog.context.clone(),
        }
    }
}
