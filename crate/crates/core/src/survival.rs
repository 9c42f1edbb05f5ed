//! Burr XII survival family and the constrained reproduction/removal pairs.
//!
//! Every parameter is held on the natural-log scale so any real vector is a
//! valid parameterization. Times are in days with day 0 at detection of the
//! index case.

use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// A lifetime distribution described by its survival function.
///
/// Implemented by [`SurvivalSpec`]; tests inject other laws (exponential
/// survivals) through the same trait.
pub trait Lifetime {
    /// `ln S(t)`, always `<= 0`.
    fn log_survival(&self, t: f64) -> f64;

    /// `-dS/dt`.
    fn density(&self, t: f64) -> f64;

    fn survival(&self, t: f64) -> f64 {
        self.log_survival(t).exp()
    }

    /// Probability that the event falls in `(t_prev, t_next]` given survival
    /// past `t_prev`.
    fn discrete_hazard(&self, t_prev: f64, t_next: f64) -> f64 {
        -(self.log_survival(t_next) - self.log_survival(t_prev)).exp_m1()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    #[serde(rename = "burr")]
    BurrXII,
    LogLogistic,
    Lomax,
    ParaLogistic,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::BurrXII,
        Family::LogLogistic,
        Family::Lomax,
        Family::ParaLogistic,
    ];

    /// Number of free parameters of one survival function.
    pub fn n_free(self) -> usize {
        match self {
            Family::BurrXII => 3,
            _ => 2,
        }
    }

    pub fn cli_name(self) -> &'static str {
        match self {
            Family::BurrXII => "burr",
            Family::LogLogistic => "loglogistic",
            Family::Lomax => "lomax",
            Family::ParaLogistic => "paralogistic",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Family::BurrXII => "Burr",
            Family::LogLogistic => "Log-logistic",
            Family::Lomax => "Lomax",
            Family::ParaLogistic => "Para-logistic",
        }
    }

    /// Whether the family admits the given reproduction/removal constraint.
    /// The log-logistic has `q` fixed at 1, so it has no proportional-rate form.
    pub fn supports(self, constraint: Constraint) -> bool {
        !(self == Family::LogLogistic && constraint.has_pr())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "burr" | "burrxii" | "burr12" => Ok(Family::BurrXII),
            "loglogistic" | "log-logistic" | "fisk" => Ok(Family::LogLogistic),
            "lomax" => Ok(Family::Lomax),
            "paralogistic" | "para-logistic" => Ok(Family::ParaLogistic),
            other => Err(Error::InvalidArgument(format!("unknown family '{other}'"))),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

/// How the removal distribution is tied to the reproduction distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Constraint {
    Full,
    /// Removal time is reproduction time rescaled: `b2 = d * b1`.
    #[serde(rename = "aft")]
    AcceleratedEventTime,
    /// Removal survival is reproduction survival to the power `c`: `q2 = c * q1`.
    #[serde(rename = "pr")]
    ProportionalRate,
    Both,
}

impl Constraint {
    pub const ALL: [Constraint; 4] = [
        Constraint::Full,
        Constraint::AcceleratedEventTime,
        Constraint::ProportionalRate,
        Constraint::Both,
    ];

    pub fn has_aft(self) -> bool {
        matches!(self, Constraint::AcceleratedEventTime | Constraint::Both)
    }

    pub fn has_pr(self) -> bool {
        matches!(self, Constraint::ProportionalRate | Constraint::Both)
    }

    pub fn cli_name(self) -> &'static str {
        match self {
            Constraint::Full => "full",
            Constraint::AcceleratedEventTime => "aft",
            Constraint::ProportionalRate => "pr",
            Constraint::Both => "both",
        }
    }
}

impl std::str::FromStr for Constraint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(Constraint::Full),
            "aft" | "accelerated" => Ok(Constraint::AcceleratedEventTime),
            "pr" | "proportional" => Ok(Constraint::ProportionalRate),
            "both" => Ok(Constraint::Both),
            other => Err(Error::InvalidArgument(format!(
                "unknown constraint '{other}'"
            ))),
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

/// A Burr XII survival function `S(t) = [1 + (t/b)^a]^(-q)` or one of its
/// special cases.
///
/// Parameters fixed by the family (`q = 1` for the log-logistic, `a = 1` for
/// the Lomax, `a = q` for the para-logistic) are derived, never stored as free.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurvivalSpec {
    family: Family,
    log_a: f64,
    log_b: f64,
    log_q: f64,
}

impl SurvivalSpec {
    pub fn burr(log_a: f64, log_b: f64, log_q: f64) -> Self {
        Self {
            family: Family::BurrXII,
            log_a,
            log_b,
            log_q,
        }
    }

    pub fn log_logistic(log_a: f64, log_b: f64) -> Self {
        Self {
            family: Family::LogLogistic,
            log_a,
            log_b,
            log_q: 0.0,
        }
    }

    pub fn lomax(log_b: f64, log_q: f64) -> Self {
        Self {
            family: Family::Lomax,
            log_a: 0.0,
            log_b,
            log_q,
        }
    }

    pub fn para_logistic(log_a: f64, log_b: f64) -> Self {
        Self {
            family: Family::ParaLogistic,
            log_a,
            log_b,
            log_q: log_a,
        }
    }

    /// Builds a spec of `family` from its free parameters in canonical order:
    /// Burr `[ln a, ln b, ln q]`, log-logistic `[ln a, ln b]`, Lomax
    /// `[ln b, ln q]`, para-logistic `[ln a, ln b]`.
    pub fn from_free(family: Family, free: &[f64]) -> Result<Self> {
        if free.len() != family.n_free() {
            return Err(Error::ParameterLength {
                expected: family.n_free(),
                got: free.len(),
            });
        }
        Ok(match family {
            Family::BurrXII => Self::burr(free[0], free[1], free[2]),
            Family::LogLogistic => Self::log_logistic(free[0], free[1]),
            Family::Lomax => Self::lomax(free[0], free[1]),
            Family::ParaLogistic => Self::para_logistic(free[0], free[1]),
        })
    }

    pub fn free_params(&self) -> Vec<f64> {
        match self.family {
            Family::BurrXII => vec![self.log_a, self.log_b, self.log_q],
            Family::LogLogistic | Family::ParaLogistic => vec![self.log_a, self.log_b],
            Family::Lomax => vec![self.log_b, self.log_q],
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn log_a(&self) -> f64 {
        self.log_a
    }

    pub fn log_b(&self) -> f64 {
        self.log_b
    }

    pub fn log_q(&self) -> f64 {
        self.log_q
    }

    pub fn a(&self) -> f64 {
        self.log_a.exp()
    }

    pub fn b(&self) -> f64 {
        self.log_b.exp()
    }

    pub fn q(&self) -> f64 {
        self.log_q.exp()
    }

    /// Same shape with time rescaled by `d = exp(log_d)`: `S'(t) = S(t/d)`.
    pub fn accelerated(&self, log_d: f64) -> Self {
        Self {
            log_b: self.log_b + log_d,
            ..*self
        }
    }

    /// `S'(t) = S(t)^c` with `c = exp(log_c)`. The para-logistic loses its
    /// `a = q` tie under this operation and becomes a general Burr XII.
    pub fn powered(&self, log_c: f64) -> Result<Self> {
        match self.family {
            Family::LogLogistic => Err(Error::ConstraintInapplicable {
                family: self.family.display_name().to_string(),
                constraint: "proportional-rate".to_string(),
            }),
            Family::ParaLogistic => Ok(Self::burr(self.log_a, self.log_b, self.log_q + log_c)),
            Family::BurrXII | Family::Lomax => Ok(Self {
                log_q: self.log_q + log_c,
                ..*self
            }),
        }
    }

    /// `ln(1 + (t/b)^a)` evaluated without overflow.
    fn log1p_scaled_power(&self, t: f64) -> f64 {
        let x = self.a() * (t.ln() - self.log_b);
        softplus(x)
    }

    /// Mean event time `b Γ(1+1/a) Γ(q-1/a) / Γ(q)`; exists only when `a q > 1`.
    pub fn mean_event_time(&self) -> Result<f64> {
        let a = self.a();
        let q = self.q();
        if a * q <= 1.0 {
            return Err(Error::MomentNonexistent(format!(
                "requires a*q > 1, got a={a}, q={q}"
            )));
        }
        let inv_a = 1.0 / a;
        Ok((self.log_b + ln_gamma(1.0 + inv_a) + ln_gamma(q - inv_a) - ln_gamma(q)).exp())
    }
}

impl Lifetime for SurvivalSpec {
    fn log_survival(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        -self.q() * self.log1p_scaled_power(t)
    }

    fn density(&self, t: f64) -> f64 {
        let a = self.a();
        let q = self.q();
        if t <= 0.0 {
            return if a > 1.0 {
                0.0
            } else if a == 1.0 {
                q / self.b()
            } else {
                f64::INFINITY
            };
        }
        let log_ratio = t.ln() - self.log_b;
        let log_f = self.log_a + self.log_q - self.log_b + (a - 1.0) * log_ratio
            - (q + 1.0) * softplus(a * log_ratio);
        log_f.exp()
    }
}

/// `ln(1 + e^x)`.
fn softplus(x: f64) -> f64 {
    if x > 35.0 {
        x + (-x).exp()
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// Reproduction and removal survival functions plus the constraint tying them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurvivalPair {
    reproduction: SurvivalSpec,
    removal: SurvivalSpec,
    constraint: Constraint,
    log_d: Option<f64>,
    log_c: Option<f64>,
}

impl SurvivalPair {
    pub fn full(reproduction: SurvivalSpec, removal: SurvivalSpec) -> Result<Self> {
        if reproduction.family != removal.family {
            return Err(Error::InvalidArgument(format!(
                "reproduction family {} differs from removal family {}",
                reproduction.family, removal.family
            )));
        }
        Ok(Self {
            reproduction,
            removal,
            constraint: Constraint::Full,
            log_d: None,
            log_c: None,
        })
    }

    /// Accelerated event time: `S_mu(t) = S_lambda(t / d)`.
    pub fn accelerated(reproduction: SurvivalSpec, log_d: f64) -> Self {
        Self {
            reproduction,
            removal: reproduction.accelerated(log_d),
            constraint: Constraint::AcceleratedEventTime,
            log_d: Some(log_d),
            log_c: None,
        }
    }

    /// Proportional rate: `S_mu(t) = S_lambda(t)^c`.
    pub fn proportional(reproduction: SurvivalSpec, log_c: f64) -> Result<Self> {
        Ok(Self {
            reproduction,
            removal: reproduction.powered(log_c)?,
            constraint: Constraint::ProportionalRate,
            log_d: None,
            log_c: Some(log_c),
        })
    }

    /// Both forms: `S_mu(t) = [S_lambda(t / d)]^c`.
    pub fn both(reproduction: SurvivalSpec, log_d: f64, log_c: f64) -> Result<Self> {
        Ok(Self {
            reproduction,
            removal: reproduction.accelerated(log_d).powered(log_c)?,
            constraint: Constraint::Both,
            log_d: Some(log_d),
            log_c: Some(log_c),
        })
    }

    pub fn constraint(&self) -> Constraint {
        self.constraint
    }

    pub fn log_d(&self) -> Option<f64> {
        self.log_d
    }

    pub fn log_c(&self) -> Option<f64> {
        self.log_c
    }

    pub fn reproduction(&self) -> &SurvivalSpec {
        &self.reproduction
    }

    pub fn removal(&self) -> &SurvivalSpec {
        &self.removal
    }

    /// Expands the constrained parameterization into two concrete specs
    /// `(reproduction, removal)`.
    pub fn realize(&self) -> (SurvivalSpec, SurvivalSpec) {
        (self.reproduction, self.removal)
    }

    /// Number of free parameters implied by the family and constraint.
    pub fn n_free(&self) -> usize {
        let base = self.reproduction.family.n_free();
        match self.constraint {
            Constraint::Full => 2 * base,
            Constraint::AcceleratedEventTime | Constraint::ProportionalRate => base + 1,
            Constraint::Both => base + 2,
        }
    }
}
