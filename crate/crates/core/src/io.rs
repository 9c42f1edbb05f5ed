//! CSV ingestion, prevalence construction from event records, and the JSON
//! result document.
//!
//! Schemas (UTF-8, comma separated, header required):
//! - prevalence: `day,count`
//! - events: `unit_id,detection_day,removal_day` (empty removal = still prevalent)

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::FitResult;
use crate::likelihood::{Observation, PrevalenceSeries};
use crate::model::ModelSpec;
use crate::reproduction::RtSeries;

pub const PREVALENCE_HEADER: [&str; 2] = ["day", "count"];
pub const EVENTS_HEADER: [&str; 3] = ["unit_id", "detection_day", "removal_day"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub unit_id: String,
    /// Detection ("birth") day.
    pub detection_day: i64,
    /// Removal ("death") day; the unit is prevalent through this day inclusive.
    pub removal_day: Option<i64>,
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let found: Vec<&str> = found.iter().collect();
    if found != expected {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header '{}', found '{}'",
                expected.join(","),
                found.join(",")
            ),
        });
    }
    Ok(())
}

fn parse_field<T: std::str::FromStr>(field: &str, name: &str, line: usize) -> Result<T> {
    field.parse().map_err(|_| Error::Parse {
        line,
        message: format!("{name} '{field}' is not a valid integer"),
    })
}

pub fn parse_prevalence<R: Read>(input: R) -> Result<PrevalenceSeries> {
    let mut rdr = reader(input);
    check_header(rdr.headers()?, &PREVALENCE_HEADER)?;
    let mut observations: Vec<Observation> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if record.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let day: u64 = parse_field(&record[0], "day", line)?;
        let count: u64 = parse_field(&record[1], "count", line)?;
        if let Some(prev) = observations.last() {
            let day = day as f64;
            if day == prev.day {
                return Err(Error::Parse {
                    line,
                    message: format!("duplicate day {}", day),
                });
            }
            if day < prev.day {
                return Err(Error::Parse {
                    line,
                    message: format!("day {} follows day {}; days must be ascending", day, prev.day),
                });
            }
        }
        observations.push(Observation {
            day: day as f64,
            count,
        });
    }
    PrevalenceSeries::new(observations)
}

pub fn read_prevalence_csv<P: AsRef<Path>>(path: P) -> Result<PrevalenceSeries> {
    parse_prevalence(File::open(path)?)
}

fn format_day(day: f64) -> String {
    if day.fract() == 0.0 {
        format!("{}", day as i64)
    } else {
        format!("{day}")
    }
}

pub fn write_prevalence<W: Write>(series: &PrevalenceSeries, mut out: W) -> Result<()> {
    writeln!(out, "{}", PREVALENCE_HEADER.join(","))?;
    for obs in series.observations() {
        writeln!(out, "{},{}", format_day(obs.day), obs.count)?;
    }
    Ok(())
}

pub fn parse_events<R: Read>(input: R) -> Result<Vec<EventRecord>> {
    let mut rdr = reader(input);
    check_header(rdr.headers()?, &EVENTS_HEADER)?;
    let mut records = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if record.len() != 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected 3 fields, found {}", record.len()),
            });
        }
        let unit_id = record[0].to_string();
        if unit_id.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty unit_id".to_string(),
            });
        }
        let detection_day: i64 = parse_field(&record[1], "detection_day", line)?;
        let removal_day: Option<i64> = match &record[2] {
            "" => None,
            field => Some(parse_field(field, "removal_day", line)?),
        };
        if detection_day < 0 {
            return Err(Error::Parse {
                line,
                message: format!("detection_day {detection_day} is before day 0"),
            });
        }
        if let Some(removal) = removal_day {
            if removal < detection_day {
                return Err(Error::Parse {
                    line,
                    message: format!(
                        "unit {unit_id}: removal day {removal} precedes detection day {detection_day}"
                    ),
                });
            }
        }
        records.push(EventRecord {
            unit_id,
            detection_day,
            removal_day,
        });
    }
    Ok(records)
}

pub fn read_events_csv<P: AsRef<Path>>(path: P) -> Result<Vec<EventRecord>> {
    parse_events(File::open(path)?)
}

pub fn write_events<W: Write>(records: &[EventRecord], mut out: W) -> Result<()> {
    writeln!(out, "{}", EVENTS_HEADER.join(","))?;
    for r in records {
        let removal = r.removal_day.map(|d| d.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{}", r.unit_id, r.detection_day, removal)?;
    }
    Ok(())
}

/// Daily prevalence on days `0..=horizon`: a unit counts on days
/// `detection_day..=removal_day` (through the horizon when not removed).
/// The horizon defaults to the largest recorded day.
pub fn events_to_prevalence(records: &[EventRecord], horizon: Option<i64>) -> Result<PrevalenceSeries> {
    if records.is_empty() {
        return Err(Error::InvalidSeries("no event records".to_string()));
    }
    let mut ids = BTreeSet::new();
    for r in records {
        if let Some(removal) = r.removal_day {
            if removal < r.detection_day {
                return Err(Error::InvalidSeries(format!(
                    "unit {}: removal day {removal} precedes detection day {}",
                    r.unit_id, r.detection_day
                )));
            }
        }
        if !ids.insert(r.unit_id.as_str()) {
            log::warn!("unit id {} appears more than once", r.unit_id);
        }
    }
    let horizon = horizon.unwrap_or_else(|| {
        records
            .iter()
            .map(|r| r.removal_day.unwrap_or(r.detection_day).max(r.detection_day))
            .max()
            .expect("nonempty")
    });
    if horizon < 1 {
        return Err(Error::InvalidSeries(format!(
            "horizon {horizon} gives fewer than 2 days"
        )));
    }
    // difference array: +1 at detection, -1 the day after removal
    let len = horizon as usize + 2;
    let mut delta = vec![0i64; len];
    for r in records {
        if r.detection_day > horizon {
            continue;
        }
        delta[r.detection_day as usize] += 1;
        if let Some(removal) = r.removal_day {
            if removal < horizon {
                delta[removal as usize + 1] -= 1;
            }
        }
    }
    let mut running = 0i64;
    let counts: Vec<u64> = delta[..=horizon as usize]
        .iter()
        .map(|d| {
            running += d;
            running as u64
        })
        .collect();
    PrevalenceSeries::daily(&counts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub family: crate::survival::Family,
    pub constraint: crate::survival::Constraint,
    pub parameters: Vec<String>,
}

/// Serialized fit: top-level `model`, `estimates`, `standard_errors`,
/// `loglik`, `aic`, `rt`, `warnings`, plus convergence diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub model: ModelDocument,
    pub estimates: Vec<f64>,
    pub standard_errors: Option<Vec<f64>>,
    pub loglik: Option<f64>,
    pub aic: Option<f64>,
    pub rt: Option<RtSeries>,
    pub warnings: Vec<String>,
    #[serde(default)]
    pub converged: bool,
    #[serde(default)]
    pub iterations: usize,
}

impl ResultDocument {
    pub fn from_fit(fit: &FitResult, rt: Option<RtSeries>) -> Self {
        let finite = |v: f64| v.is_finite().then_some(v);
        Self {
            model: ModelDocument {
                family: fit.model.family,
                constraint: fit.model.constraint,
                parameters: fit.parameter_names.clone(),
            },
            estimates: fit.estimate.clone(),
            standard_errors: fit.standard_errors.clone(),
            loglik: finite(fit.loglik),
            aic: finite(fit.aic),
            rt,
            warnings: fit.warnings.clone(),
            converged: fit.converged,
            iterations: fit.iterations,
        }
    }

    /// A parameter-only document (no fit statistics), e.g. for simulation input.
    pub fn from_parameters(model: &ModelSpec, estimates: Vec<f64>) -> Self {
        Self {
            model: ModelDocument {
                family: model.family,
                constraint: model.constraint,
                parameters: model.param_names(),
            },
            estimates,
            standard_errors: None,
            loglik: None,
            aic: None,
            rt: None,
            warnings: Vec::new(),
            converged: false,
            iterations: 0,
        }
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        let model = ModelSpec::new(self.model.family, self.model.constraint)?;
        if self.estimates.len() != model.n_params() {
            return Err(Error::ParameterLength {
                expected: model.n_params(),
                got: self.estimates.len(),
            });
        }
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn read<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
