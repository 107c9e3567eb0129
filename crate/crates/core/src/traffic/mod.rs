//! Traffic ingestion and estimation.
//!
//! A CDR printout is parsed into [`CallRecord`]s, outgoing calls are
//! classified by destination and day type, and per-subgroup call forces and
//! duration distributions are estimated into a [`TrafficProfile`].

mod cdr;
mod classify;
mod duration;
mod profile;

pub use cdr::{parse_cdr, CallRecord, CdrError, CdrWarning, ParsedCdr, Service};
pub use classify::{
    classify_all, Calendar, ClassifiedCall, Classification, ClassifyError, Classifier, PrefixTable,
    PrefixTableError,
};
pub use duration::{
    build_histogram, fit_exponential, DurationError, DurationModel, ExponentialFit,
    DEFAULT_TRUNCATION,
};
pub use profile::{
    estimate_profile, observation_months, DurationEstimate, EstimateOptions, ProfileError,
    SubgroupTraffic, TrafficProfile,
};
