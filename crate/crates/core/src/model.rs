//! Family + constraint model specifications and their free-parameter layout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::survival::{Constraint, Family, SurvivalPair, SurvivalSpec};

/// A reproduction/removal model: one Burr-family and one constraint mode.
///
/// The free-parameter vector is ordered as the reproduction spec's free
/// parameters followed by the removal parameters (full model) or by `ln d`
/// and/or `ln c` (constrained models).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub constraint: Constraint,
}

impl ModelSpec {
    pub fn new(family: Family, constraint: Constraint) -> Result<Self> {
        if !family.supports(constraint) {
            return Err(Error::ConstraintInapplicable {
                family: family.display_name().to_string(),
                constraint: constraint.cli_name().to_string(),
            });
        }
        Ok(Self { family, constraint })
    }

    pub fn n_params(&self) -> usize {
        let base = self.family.n_free();
        match self.constraint {
            Constraint::Full => 2 * base,
            Constraint::AcceleratedEventTime | Constraint::ProportionalRate => base + 1,
            Constraint::Both => base + 2,
        }
    }

    /// Whether the constrained model is only a reparameterization of the full
    /// model (Lomax and para-logistic under both constraints).
    pub fn same_as_full(&self) -> bool {
        self.constraint == Constraint::Both
            && matches!(self.family, Family::Lomax | Family::ParaLogistic)
    }

    pub fn param_names(&self) -> Vec<String> {
        use Constraint::*;
        use Family::*;
        let names: &[&str] = match (self.family, self.constraint) {
            (BurrXII, Full) => &["ln(a1)", "ln(b1)", "ln(q1)", "ln(a2)", "ln(b2)", "ln(q2)"],
            (BurrXII, AcceleratedEventTime) => &["ln(a)", "ln(b1)", "ln(q)", "ln(d)"],
            (BurrXII, ProportionalRate) => &["ln(a)", "ln(b)", "ln(q1)", "ln(c)"],
            (BurrXII, Both) => &["ln(a)", "ln(b1)", "ln(q1)", "ln(d)", "ln(c)"],
            (LogLogistic | ParaLogistic, Full) => &["ln(a1)", "ln(b1)", "ln(a2)", "ln(b2)"],
            (LogLogistic | ParaLogistic, AcceleratedEventTime) => &["ln(a)", "ln(b1)", "ln(d)"],
            (LogLogistic | ParaLogistic, ProportionalRate) => &["ln(a)", "ln(b)", "ln(c)"],
            (LogLogistic | ParaLogistic, Both) => &["ln(a)", "ln(b1)", "ln(d)", "ln(c)"],
            (Lomax, Full) => &["ln(b1)", "ln(q1)", "ln(b2)", "ln(q2)"],
            (Lomax, AcceleratedEventTime) => &["ln(b1)", "ln(q)", "ln(d)"],
            (Lomax, ProportionalRate) => &["ln(b)", "ln(q1)", "ln(c)"],
            (Lomax, Both) => &["ln(b1)", "ln(q1)", "ln(d)", "ln(c)"],
        };
        names.iter().map(|s| s.to_string()).collect()
    }

    fn family_symbols(&self) -> Vec<&'static str> {
        match self.family {
            Family::BurrXII => vec!["a", "b", "q"],
            Family::LogLogistic | Family::ParaLogistic => vec!["a", "b"],
            Family::Lomax => vec!["b", "q"],
        }
    }

    /// Builds the survival pair for a parameter vector.
    pub fn pair(&self, delta: &[f64]) -> Result<SurvivalPair> {
        if delta.len() != self.n_params() {
            return Err(Error::ParameterLength {
                expected: self.n_params(),
                got: delta.len(),
            });
        }
        let base = self.family.n_free();
        let repro = SurvivalSpec::from_free(self.family, &delta[..base])?;
        match self.constraint {
            Constraint::Full => {
                let removal = SurvivalSpec::from_free(self.family, &delta[base..])?;
                SurvivalPair::full(repro, removal)
            }
            Constraint::AcceleratedEventTime => Ok(SurvivalPair::accelerated(repro, delta[base])),
            Constraint::ProportionalRate => SurvivalPair::proportional(repro, delta[base]),
            Constraint::Both => SurvivalPair::both(repro, delta[base], delta[base + 1]),
        }
    }

    pub fn full(&self) -> ModelSpec {
        ModelSpec {
            family: self.family,
            constraint: Constraint::Full,
        }
    }

    /// Maps a constrained parameter vector to the equivalent full-model
    /// vector, when the realized removal spec stays in the family.
    pub fn embed_in_full(&self, delta: &[f64]) -> Option<Vec<f64>> {
        let (repro, removal) = self.pair(delta).ok()?.realize();
        if removal.family() != self.family {
            return None;
        }
        let mut full = repro.free_params();
        full.extend(removal.free_params());
        Some(full)
    }

    /// Default starting point: `ln b` at the log of the series midpoint time,
    /// `ln q = 1`, `ln a = 0`, `ln d = ln c = 0`.
    pub fn default_start(&self, first_day: f64, last_day: f64) -> Vec<f64> {
        let log_b = (0.5 * (first_day + last_day)).max(1.0).ln();
        let spec_start: Vec<f64> = self
            .family_symbols()
            .into_iter()
            .map(|s| match s {
                "b" => log_b,
                "q" => 1.0,
                _ => 0.0,
            })
            .collect();
        let mut start = spec_start.clone();
        match self.constraint {
            Constraint::Full => start.extend(spec_start),
            Constraint::AcceleratedEventTime | Constraint::ProportionalRate => start.push(0.0),
            Constraint::Both => start.extend([0.0, 0.0]),
        }
        start
    }
}

impl std::fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.family, self.constraint)
    }
}
