//! Loading catalogs, printouts and profiles from disk.

use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};

use bpswitch_core::traffic::{
    classify_all, estimate_profile, observation_months, parse_cdr, Calendar, Classification, Classifier,
    DurationEstimate, EstimateOptions, ParsedCdr, PrefixTable, Service, DEFAULT_TRUNCATION,
};
use bpswitch_core::{Catalog, TrafficProfile};

use crate::{DurationArg, TrafficArgs};

/// Minutes covered by a histogram duration model; longer calls share the last bin.
pub const HISTOGRAM_HORIZON: u32 = 60;

pub fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("cannot open {}", path.display()))
}

pub fn catalog(path: Option<&PathBuf>) -> Result<Catalog> {
    let path = path.ok_or_else(|| anyhow!("--catalog is required"))?;
    Catalog::load(open(path)?).with_context(|| format!("invalid catalog {}", path.display()))
}

pub fn printout(path: &Path, strict: bool) -> Result<ParsedCdr> {
    parse_cdr(open(path)?, strict).with_context(|| format!("invalid printout {}", path.display()))
}

/// Outgoing calls of a printout, classified, plus the observation window.
pub struct Calls {
    pub parsed: ParsedCdr,
    pub classification: Classification,
    pub months: f64,
}

pub fn calls(cdr: &Path, args: &TrafficArgs) -> Result<Calls> {
    let parsed = printout(cdr, args.strict)?;
    let prefixes = match &args.prefixes {
        Some(p) => PrefixTable::load(open(p)?).with_context(|| format!("invalid prefix table {}", p.display()))?,
        None => PrefixTable::default(),
    };
    let calendar = match &args.holidays {
        Some(p) => Calendar::load(open(p)?).with_context(|| format!("invalid holiday list {}", p.display()))?,
        None => Calendar::default(),
    };
    let classification = classify_all(&parsed.records, &Classifier::new(prefixes, calendar));
    if !parsed.records.iter().any(|r| r.service == Service::Tel) {
        bail!("no Tel traffic in {}", cdr.display());
    }
    let months = match args.months {
        Some(m) if m.is_finite() && m > 0.0 => m,
        Some(m) => bail!("--months must be positive, got {m}"),
        None => {
            let first = parsed.records.iter().map(|r| r.date).min().expect("non-empty");
            let last = parsed.records.iter().map(|r| r.date).max().expect("non-empty");
            observation_months(first, last)
        }
    };
    Ok(Calls { parsed, classification, months })
}

pub fn estimate_options(args: &TrafficArgs) -> EstimateOptions {
    let duration = match args.duration {
        DurationArg::Exponential => DurationEstimate::Exponential { truncation: Some(DEFAULT_TRUNCATION) },
        DurationArg::Histogram => DurationEstimate::Histogram { horizon: HISTOGRAM_HORIZON },
    };
    EstimateOptions { duration, ..EstimateOptions::default() }
}

/// Traffic profile from `--profile`, or estimated from `--cdr`.
pub fn profile(catalog: &Catalog, args: &TrafficArgs) -> Result<TrafficProfile> {
    let profile = match (&args.profile, &args.cdr) {
        (Some(path), _) => {
            TrafficProfile::load(open(path)?).with_context(|| format!("invalid profile {}", path.display()))?
        }
        (None, Some(cdr)) => {
            let calls = calls(cdr, args)?;
            estimate_profile(&calls.classification.calls, catalog, calls.months, estimate_options(args))?
        }
        (None, None) => bail!("traffic input required: pass --cdr or --profile"),
    };
    profile.check_against(catalog).context("profile does not fit the catalog")?;
    Ok(profile)
}
