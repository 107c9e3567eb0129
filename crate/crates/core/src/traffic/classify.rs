use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Read};

use chrono::{Datelike, NaiveDate, Weekday};

use super::cdr::{CallRecord, Service};
use crate::catalog::{DayClass, DestinationClass};

#[derive(Debug, thiserror::Error)]
pub enum PrefixTableError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
}

/// Maps dialed-number prefixes to destination classes by longest match.
#[derive(Debug, Clone, Default)]
pub struct PrefixTable {
    // sorted longest first
    entries: Vec<(String, DestinationClass)>,
}

impl PrefixTable {
    pub fn new(entries: impl IntoIterator<Item = (String, DestinationClass)>) -> Self {
        let mut entries: Vec<_> = entries.into_iter().map(|(p, c)| (normalize(&p), c)).collect();
        entries.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        PrefixTable { entries }
    }

    /// Reads `prefix;destination_class` lines. A leading `prefix;...` header and
    /// blank or `#` lines are ignored.
    pub fn load<R: Read>(source: R) -> Result<Self, PrefixTableError> {
        let mut entries = Vec::new();
        for (idx, line) in BufReader::new(source).lines().enumerate() {
            let line = line?;
            let text = line.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let (prefix, class) = text.split_once(';').ok_or_else(|| PrefixTableError::Line {
                line: idx + 1,
                message: "expected prefix;destination_class".into(),
            })?;
            if idx == 0 && prefix.trim().eq_ignore_ascii_case("prefix") {
                continue;
            }
            let class = class
                .trim()
                .parse()
                .map_err(|message| PrefixTableError::Line { line: idx + 1, message })?;
            entries.push((prefix.trim().to_string(), class));
        }
        Ok(PrefixTable::new(entries))
    }

    pub fn lookup(&self, number: &str) -> Option<DestinationClass> {
        let number = normalize(number);
        self.entries
            .iter()
            .find(|(prefix, _)| number.starts_with(prefix.as_str()))
            .map(|&(_, class)| class)
    }
}

fn normalize(number: &str) -> String {
    number.chars().filter(|c| !c.is_whitespace() && *c != '-').collect()
}

/// Saturday and Sunday plus listed holidays are weekend days.
#[derive(Debug, Clone, Default)]
pub struct Calendar {
    holidays: BTreeSet<NaiveDate>,
}

impl Calendar {
    pub fn new(holidays: impl IntoIterator<Item = NaiveDate>) -> Self {
        Calendar { holidays: holidays.into_iter().collect() }
    }

    /// One ISO date (`YYYY-MM-DD`) per line; blank and `#` lines ignored.
    pub fn load<R: Read>(source: R) -> Result<Self, PrefixTableError> {
        let mut holidays = BTreeSet::new();
        for (idx, line) in BufReader::new(source).lines().enumerate() {
            let line = line?;
            let text = line.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let date = NaiveDate::parse_from_str(text, "%Y-%m-%d").map_err(|e| PrefixTableError::Line {
                line: idx + 1,
                message: format!("bad date {text:?}: {e}"),
            })?;
            holidays.insert(date);
        }
        Ok(Calendar { holidays })
    }

    pub fn day_class(&self, date: NaiveDate) -> DayClass {
        if matches!(date.weekday(), Weekday::Sat | Weekday::Sun) || self.holidays.contains(&date) {
            DayClass::Weekend
        } else {
            DayClass::Workday
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassifiedCall {
    pub record: CallRecord,
    pub destination: DestinationClass,
    pub day: DayClass,
    /// `ceil(seconds / 60)`, at least 1.
    pub minute_index: u32,
    /// False when no prefix matched and the destination fell back to other-mobile.
    pub prefix_matched: bool,
}

impl ClassifiedCall {
    pub fn duration_minutes(&self) -> f64 {
        f64::from(self.record.duration_seconds) / 60.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClassifyError {
    #[error("record is a {0:?} service, not a call")]
    NotACall(Service),
    #[error("call has zero duration")]
    ZeroDuration,
}

pub struct Classifier {
    pub prefixes: PrefixTable,
    pub calendar: Calendar,
}

impl Classifier {
    pub fn new(prefixes: PrefixTable, calendar: Calendar) -> Self {
        Classifier { prefixes, calendar }
    }

    pub fn classify(&self, record: &CallRecord) -> Result<ClassifiedCall, ClassifyError> {
        if record.service != Service::Tel {
            return Err(ClassifyError::NotACall(record.service));
        }
        if record.duration_seconds == 0 {
            return Err(ClassifyError::ZeroDuration);
        }
        let matched = self.prefixes.lookup(&record.number);
        Ok(ClassifiedCall {
            record: record.clone(),
            destination: matched.unwrap_or(DestinationClass::OtherMobile),
            day: self.calendar.day_class(record.date),
            minute_index: record.duration_seconds.div_ceil(60),
            prefix_matched: matched.is_some(),
        })
    }
}

/// Outgoing calls from a printout plus counts of what was left out.
#[derive(Debug, Clone, Default)]
pub struct Classification {
    pub calls: Vec<ClassifiedCall>,
    pub unmapped_prefixes: usize,
    pub dropped_zero_duration: usize,
    pub non_call_records: usize,
}

pub fn classify_all(records: &[CallRecord], classifier: &Classifier) -> Classification {
    let mut out = Classification::default();
    for record in records {
        match classifier.classify(record) {
            Ok(call) => {
                if !call.prefix_matched {
                    out.unmapped_prefixes += 1;
                }
                out.calls.push(call);
            }
            Err(ClassifyError::ZeroDuration) => out.dropped_zero_duration += 1,
            Err(ClassifyError::NotACall(_)) => out.non_call_records += 1,
        }
    }
    out
}
