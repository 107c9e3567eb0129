use std::io::Read;

use chrono::{NaiveDate, NaiveTime};
use serde::{Deserialize, Serialize};

use crate::money::Rubles;

const HEADER: [&str; 7] = ["date", "time", "number", "zone", "service", "duration", "cost"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Service {
    Tel,
    Sms,
    Internet,
}

impl Service {
    fn parse(tag: &str) -> Option<Service> {
        match tag.to_ascii_lowercase().as_str() {
            "tel" => Some(Service::Tel),
            "sms" => Some(Service::Sms),
            "internet" | "gprs" => Some(Service::Internet),
            _ => None,
        }
    }
}

/// One billed row of a detail printout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallRecord {
    pub date: NaiveDate,
    pub time: NaiveTime,
    pub number: String,
    pub zone: String,
    pub service: Service,
    /// Zero for non-call services.
    pub duration_seconds: u32,
    pub cost: Rubles,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CdrWarning {
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct ParsedCdr {
    pub records: Vec<CallRecord>,
    pub warnings: Vec<CdrWarning>,
}

#[derive(Debug, thiserror::Error)]
pub enum CdrError {
    #[error("i/o error reading CDR: {0}")]
    Io(#[from] std::io::Error),
    #[error("CDR is not valid CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("unexpected CDR header {found:?}, expected {expected:?}")]
    BadHeader { found: String, expected: String },
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
}

/// Parses a `;`-separated CDR with header `date;time;number;zone;service;duration;cost`.
///
/// Rows with an unknown service tag are always skipped with a warning. Other
/// malformed rows are fatal when `strict`, otherwise skipped with a warning.
pub fn parse_cdr<R: Read>(source: R, strict: bool) -> Result<ParsedCdr, CdrError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b';')
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let header = reader.headers()?.clone();
    let names: Vec<String> = header.iter().map(|h| h.to_ascii_lowercase()).collect();
    if names != HEADER {
        return Err(CdrError::BadHeader {
            found: header.iter().collect::<Vec<_>>().join(";"),
            expected: HEADER.join(";"),
        });
    }

    let mut out = ParsedCdr::default();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        if row.iter().all(str::is_empty) {
            continue;
        }
        match parse_row(&row) {
            Ok(Some(record)) => out.records.push(record),
            Ok(None) => out.warnings.push(CdrWarning {
                line,
                message: format!("unrecognized service {:?}, row skipped", row.get(4).unwrap_or("")),
            }),
            Err(message) if strict => return Err(CdrError::Row { line, message }),
            Err(message) => out.warnings.push(CdrWarning { line, message }),
        }
    }
    Ok(out)
}

fn parse_row(row: &csv::StringRecord) -> Result<Option<CallRecord>, String> {
    if row.len() != HEADER.len() {
        return Err(format!("expected {} fields, found {}", HEADER.len(), row.len()));
    }
    let Some(service) = Service::parse(&row[4]) else {
        return Ok(None);
    };
    let date = NaiveDate::parse_from_str(&row[0], "%d.%m.%Y")
        .map_err(|e| format!("bad date {:?}: {e}", &row[0]))?;
    let time = NaiveTime::parse_from_str(&row[1], "%H:%M:%S")
        .map_err(|e| format!("bad time {:?}: {e}", &row[1]))?;
    let duration_seconds = match service {
        Service::Tel => parse_call_duration(&row[5])?,
        _ => {
            row[5]
                .parse::<u64>()
                .map_err(|_| format!("bad {service:?} count {:?}", &row[5]))?;
            0
        }
    };
    let cost: Rubles = row[6].parse().map_err(|e| format!("bad cost: {e}"))?;
    Ok(Some(CallRecord {
        date,
        time,
        number: row[2].to_string(),
        zone: row[3].to_string(),
        service,
        duration_seconds,
        cost,
    }))
}

/// `M:SS` where `M` may exceed 59.
fn parse_call_duration(text: &str) -> Result<u32, String> {
    let bad = || format!("bad call duration {text:?}, expected M:SS");
    let (minutes, seconds) = text.split_once(':').ok_or_else(bad)?;
    if seconds.len() != 2 {
        return Err(bad());
    }
    let minutes: u32 = minutes.parse().map_err(|_| bad())?;
    let seconds: u32 = seconds.parse().map_err(|_| bad())?;
    if seconds >= 60 {
        return Err(bad());
    }
    minutes.checked_mul(60).and_then(|m| m.checked_add(seconds)).ok_or_else(bad)
}
