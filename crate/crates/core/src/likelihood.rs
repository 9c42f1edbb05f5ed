//! Conditional discrete-time likelihood of a prevalence series.
//!
//! Each observation `y_j` is modelled given `y_{j-1}` with the transition law
//! whose `θ` and `π` are the discrete removal and reproduction hazards on
//! `(t_{j-1}, t_j]`. Pairs ending in a zero count carry no information about
//! the hazards beyond `θ^{y_{j-1}}` and are excluded, as are reintroductions
//! (zero followed by a positive count), which the model gives probability zero.

use serde::{Deserialize, Serialize};

use crate::bdprocess::{self, TransitionLaw};
use crate::error::{Error, Result};
use crate::model::ModelSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub day: f64,
    pub count: u64,
}

/// Ordered `(day, count)` observations of infected-and-detected, not yet
/// removed units. Day 0 is the detection of the index case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceSeries {
    observations: Vec<Observation>,
}

impl PrevalenceSeries {
    pub fn new(observations: Vec<Observation>) -> Result<Self> {
        if observations.len() < 2 {
            return Err(Error::InvalidSeries(format!(
                "need at least 2 observations, got {}",
                observations.len()
            )));
        }
        for (i, obs) in observations.iter().enumerate() {
            if !obs.day.is_finite() || obs.day < 0.0 {
                return Err(Error::InvalidSeries(format!(
                    "observation {i}: day {} must be finite and >= 0",
                    obs.day
                )));
            }
        }
        if let Some(w) = observations.windows(2).find(|w| w[1].day <= w[0].day) {
            return Err(Error::InvalidSeries(format!(
                "days must be strictly increasing: {} follows {}",
                w[1].day, w[0].day
            )));
        }
        Ok(Self { observations })
    }

    pub fn from_pairs<I: IntoIterator<Item = (f64, u64)>>(pairs: I) -> Result<Self> {
        Self::new(
            pairs
                .into_iter()
                .map(|(day, count)| Observation { day, count })
                .collect(),
        )
    }

    /// Counts observed on days `0, 1, .., counts.len() - 1`.
    pub fn daily(counts: &[u64]) -> Result<Self> {
        Self::from_pairs(counts.iter().enumerate().map(|(d, &c)| (d as f64, c)))
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn days(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.day).collect()
    }

    pub fn counts(&self) -> Vec<u64> {
        self.observations.iter().map(|o| o.count).collect()
    }

    pub fn first_day(&self) -> f64 {
        self.observations[0].day
    }

    pub fn last_day(&self) -> f64 {
        self.observations[self.observations.len() - 1].day
    }

    /// Consecutive `(t_prev, t_next)` day pairs.
    pub fn steps(&self) -> Vec<(f64, f64)> {
        self.observations
            .windows(2)
            .map(|w| (w[0].day, w[1].day))
            .collect()
    }
}

/// Per-pair breakdown of a log-likelihood evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodTerms {
    pub total: f64,
    /// `(t_j, log P(y_j | y_{j-1}))` for every included pair.
    pub terms: Vec<(f64, f64)>,
    /// Days `t_j` of pairs excluded because `y_j = 0`.
    pub excluded_zero: Vec<f64>,
    /// Days `t_j` of zero-to-positive transitions, excluded with a warning.
    pub reintroductions: Vec<f64>,
}

impl LikelihoodTerms {
    pub fn warnings(&self) -> Vec<String> {
        self.reintroductions
            .iter()
            .map(|day| {
                format!("day {day}: positive count after zero prevalence excluded from likelihood")
            })
            .collect()
    }
}

pub fn log_likelihood_terms(
    model: &ModelSpec,
    delta: &[f64],
    data: &PrevalenceSeries,
) -> Result<LikelihoodTerms> {
    let pair = model.pair(delta)?;
    let (repro, removal) = pair.realize();
    let mut out = LikelihoodTerms {
        total: 0.0,
        terms: Vec::new(),
        excluded_zero: Vec::new(),
        reintroductions: Vec::new(),
    };
    for w in data.observations().windows(2) {
        let (prev, next) = (w[0], w[1]);
        if next.count == 0 {
            out.excluded_zero.push(next.day);
            continue;
        }
        if prev.count == 0 {
            out.reintroductions.push(next.day);
            continue;
        }
        let law = bdprocess::discrete_law_of(&repro, &removal, prev.day, next.day);
        let term = law.log_pmf(prev.count, next.count);
        out.terms.push((next.day, term));
        out.total += term;
    }
    if !out.total.is_finite() {
        out.total = f64::NEG_INFINITY;
    }
    Ok(out)
}

/// Sum of log conditional probabilities over consecutive observation pairs.
/// Returns `-inf` when an included term has zero probability (or the
/// parameters are numerically unusable).
pub fn log_likelihood(model: &ModelSpec, delta: &[f64], data: &PrevalenceSeries) -> Result<f64> {
    Ok(log_likelihood_terms(model, delta, data)?.total)
}

/// One-step-ahead conditional means `y_{j-1} (1 - h_mu) / (1 - h_lambda)`,
/// reported at `t_j`.
pub fn conditional_expectation_series(
    model: &ModelSpec,
    delta: &[f64],
    data: &PrevalenceSeries,
) -> Result<Vec<(f64, f64)>> {
    let pair = model.pair(delta)?;
    let (repro, removal) = pair.realize();
    Ok(data
        .observations()
        .windows(2)
        .map(|w| {
            let law: TransitionLaw = bdprocess::discrete_law_of(&repro, &removal, w[0].day, w[1].day);
            (w[1].day, w[0].count as f64 * law.growth_factor())
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival::{Constraint, Family, Lifetime, SurvivalSpec};
    use approx::assert_relative_eq;

    fn lomax_full() -> ModelSpec {
        ModelSpec::new(Family::Lomax, Constraint::Full).unwrap()
    }

    const DELTA: [f64; 4] = [3.235, 2.712, 4.987, 3.98];

    #[test]
    fn series_validation() {
        assert!(PrevalenceSeries::daily(&[1]).is_err());
        assert!(PrevalenceSeries::from_pairs([(0.0, 1), (0.0, 2)]).is_err());
        assert!(PrevalenceSeries::from_pairs([(2.0, 1), (1.0, 2)]).is_err());
        assert!(PrevalenceSeries::from_pairs([(-1.0, 1), (1.0, 2)]).is_err());
        assert_eq!(PrevalenceSeries::daily(&[1, 3]).unwrap().len(), 2);
    }

    #[test]
    fn single_term() {
        let data = PrevalenceSeries::daily(&[1, 1]).unwrap();
        let ll = log_likelihood(&lomax_full(), &DELTA, &data).unwrap();
        let pair = lomax_full().pair(&DELTA).unwrap();
        let law = bdprocess::transition_law_discrete(&pair, 0.0, 1.0);
        assert_relative_eq!(ll, law.log_pmf(1, 1), epsilon = 1e-15);
    }

    #[test]
    fn all_zero_tail_is_empty_sum() {
        let data = PrevalenceSeries::daily(&[4, 0, 0, 0]).unwrap();
        let terms = log_likelihood_terms(&lomax_full(), &DELTA, &data).unwrap();
        assert_eq!(terms.total, 0.0);
        assert_eq!(terms.excluded_zero.len(), 3);
        assert!(terms.terms.is_empty());
    }

    #[test]
    fn reintroduction_is_excluded_with_warning() {
        let data = PrevalenceSeries::daily(&[2, 0, 3, 4]).unwrap();
        let terms = log_likelihood_terms(&lomax_full(), &DELTA, &data).unwrap();
        assert_eq!(terms.reintroductions, vec![2.0]);
        assert_eq!(terms.terms.len(), 1);
        assert_eq!(terms.warnings().len(), 1);
    }

    #[test]
    fn impossible_transition_is_neg_infinity() {
        // π = 0 (reproduction never happens) makes growth impossible
        let model = ModelSpec::new(Family::Lomax, Constraint::Full).unwrap();
        let delta = [800.0, -800.0, 1.0, 1.0];
        let data = PrevalenceSeries::daily(&[1, 5]).unwrap();
        assert_eq!(log_likelihood(&model, &delta, &data).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn conditional_expectation_examples() {
        let same = ModelSpec::new(Family::Lomax, Constraint::AcceleratedEventTime).unwrap();
        let data = PrevalenceSeries::daily(&[3, 5, 0, 2, 7]).unwrap();
        let pred = conditional_expectation_series(&same, &[2.0, 1.0, 0.0], &data).unwrap();
        let lagged: Vec<f64> = data.counts()[..4].iter().map(|&c| c as f64).collect();
        for ((_, p), y) in pred.iter().zip(&lagged) {
            assert_relative_eq!(*p, *y, epsilon = 1e-12);
        }
        assert_eq!(pred[2].1, 0.0);

        let pred = conditional_expectation_series(&lomax_full(), &DELTA, &data).unwrap();
        let repro = SurvivalSpec::lomax(DELTA[0], DELTA[1]);
        let removal = SurvivalSpec::lomax(DELTA[2], DELTA[3]);
        for (j, (day, p)) in pred.iter().enumerate() {
            let (t0, t1) = (j as f64, j as f64 + 1.0);
            let r = (removal.survival(t1) / removal.survival(t0)) / (repro.survival(t1) / repro.survival(t0));
            assert_eq!(*day, t1);
            assert_relative_eq!(*p, data.counts()[j] as f64 * r, max_relative = 1e-12);
        }
    }
}
