//! Maximum-likelihood fitting, observed-information standard errors, and AIC
//! comparison across the family/constraint grid.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{self, PrevalenceSeries};
use crate::model::ModelSpec;
use crate::optimize::{self, Minimum, NelderMeadOptions};
use crate::survival::{Constraint, Family};

/// Polishing restarts stop once a restart improves the optimum by less than this.
const POLISH_TOL: f64 = 1e-10;
const MAX_POLISH_ROUNDS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub simplex: NelderMeadOptions,
    /// Number of starting points; the first is the unjittered start.
    pub starts: usize,
    /// Standard deviation of the Gaussian jitter added to later starts.
    pub jitter: f64,
    pub seed: u64,
    /// Overrides the default starting point.
    pub start: Option<Vec<f64>>,
    /// Additional starting points tried alongside the jittered ones.
    pub extra_starts: Vec<Vec<f64>>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            simplex: NelderMeadOptions::default(),
            starts: 8,
            jitter: 0.5,
            seed: 0,
            start: None,
            extra_starts: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ModelSpec,
    pub parameter_names: Vec<String>,
    /// Log-scale estimates in the model's parameter order.
    pub estimate: Vec<f64>,
    /// Log-scale standard errors; `None` when the observed information matrix
    /// is not positive definite.
    pub standard_errors: Option<Vec<f64>>,
    pub loglik: f64,
    pub aic: f64,
    pub converged: bool,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

impl FitResult {
    pub fn n_params(&self) -> usize {
        self.estimate.len()
    }
}

pub fn aic(n_params: usize, loglik: f64) -> f64 {
    2.0 * n_params as f64 - 2.0 * loglik
}

/// SplitMix64 finalizer; derives independent stream seeds from a root seed.
pub fn derive_seed(root: u64, salt: u64) -> u64 {
    let mut z = root ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn model_salt(model: &ModelSpec) -> u64 {
    let f = Family::ALL.iter().position(|&f| f == model.family).unwrap_or(0) as u64;
    let c = Constraint::ALL
        .iter()
        .position(|&c| c == model.constraint)
        .unwrap_or(0) as u64;
    1 + 4 * f + c
}

fn negative_loglik<'a>(model: &ModelSpec, data: &'a PrevalenceSeries) -> impl Fn(&[f64]) -> f64 + Sync + 'a {
    let model = *model;
    move |delta: &[f64]| match likelihood::log_likelihood(&model, delta, data) {
        Ok(ll) if ll.is_finite() => -ll,
        _ => f64::INFINITY,
    }
}

/// Maximizes the conditional log-likelihood by multi-start Nelder-Mead, then
/// restarts from the best vertex until the optimum stops improving.
pub fn fit(model: &ModelSpec, data: &PrevalenceSeries, opts: &FitOptions) -> Result<FitResult> {
    let n = model.n_params();
    let base = match &opts.start {
        Some(s) if s.len() != n => {
            return Err(Error::ParameterLength {
                expected: n,
                got: s.len(),
            })
        }
        Some(s) => s.clone(),
        None => model.default_start(data.first_day(), data.last_day()),
    };
    if let Some(bad) = opts.extra_starts.iter().find(|s| s.len() != n) {
        return Err(Error::ParameterLength {
            expected: n,
            got: bad.len(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, model_salt(model)));
    let jitter = Normal::new(0.0, opts.jitter.max(0.0)).expect("finite jitter");
    let mut starts = vec![base.clone()];
    for _ in 1..opts.starts.max(1) {
        starts.push(base.iter().map(|v| v + jitter.sample(&mut rng)).collect());
    }
    starts.extend(opts.extra_starts.iter().cloned());

    let objective = negative_loglik(model, data);
    let runs: Vec<Minimum> = starts
        .par_iter()
        .map(|s| optimize::nelder_mead(&objective, s, &opts.simplex))
        .collect();
    // first index wins ties so the choice does not depend on scheduling
    let mut best = runs
        .iter()
        .fold(None::<&Minimum>, |acc, m| match acc {
            Some(b) if b.f <= m.f => Some(b),
            _ => Some(m),
        })
        .expect("at least one start")
        .clone();
    let mut iterations = best.iterations;

    for _ in 0..MAX_POLISH_ROUNDS {
        let again = optimize::nelder_mead(&objective, &best.x, &opts.simplex);
        iterations += again.iterations;
        let improvement = best.f - again.f;
        if again.f <= best.f {
            best = again;
        }
        if !(improvement > POLISH_TOL) {
            break;
        }
    }

    let mut warnings = Vec::new();
    let loglik = -best.f;
    if !loglik.is_finite() {
        warnings.push("no starting point gave a finite likelihood".to_string());
    }
    let terms = likelihood::log_likelihood_terms(model, &best.x, data)?;
    warnings.extend(terms.warnings());

    let standard_errors = if loglik.is_finite() {
        standard_errors(model, &best.x, data)?
    } else {
        None
    };
    if standard_errors.is_none() {
        warnings.push("observed information not positive definite; standard errors withheld".to_string());
    }
    if !best.converged {
        warnings.push(format!(
            "simplex did not converge within {} iterations",
            opts.simplex.max_iterations
        ));
    }

    Ok(FitResult {
        model: *model,
        parameter_names: model.param_names(),
        aic: aic(n, loglik),
        estimate: best.x,
        standard_errors,
        loglik,
        converged: best.converged && loglik.is_finite(),
        iterations,
        warnings,
    })
}

/// Standard errors from the central-difference Hessian of the negative
/// log-likelihood; `None` when it is not positive definite.
pub fn standard_errors(
    model: &ModelSpec,
    at: &[f64],
    data: &PrevalenceSeries,
) -> Result<Option<Vec<f64>>> {
    if at.len() != model.n_params() {
        return Err(Error::ParameterLength {
            expected: model.n_params(),
            got: at.len(),
        });
    }
    let objective = negative_loglik(model, data);
    let information = optimize::hessian(&objective, at);
    Ok(optimize::standard_errors_from_information(&information))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellOutcome {
    Fitted { fit: FitResult },
    /// Reparameterization of the full model; carries the full-model fit.
    SameAsFull { fit: FitResult },
    Inapplicable,
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelTableRow {
    pub family: Family,
    pub constraint: Constraint,
    #[serde(flatten)]
    pub outcome: CellOutcome,
}

impl ModelTableRow {
    pub fn fit(&self) -> Option<&FitResult> {
        match &self.outcome {
            CellOutcome::Fitted { fit } | CellOutcome::SameAsFull { fit } => Some(fit),
            _ => None,
        }
    }

    pub fn aic(&self) -> Option<f64> {
        self.fit().map(|f| f.aic)
    }
}

/// Fits every requested (family, constraint) cell and ranks by AIC.
///
/// Constrained optima are embedded into the full model as extra starting
/// points, so a full fit is never worse than a nested constrained fit.
/// Log-logistic PR/both cells are inapplicable; Lomax and para-logistic
/// "both" cells report the full-model fit.
pub fn model_table(
    families: &[Family],
    constraints: &[Constraint],
    data: &PrevalenceSeries,
    opts: &FitOptions,
) -> Vec<ModelTableRow> {
    let mut rows = Vec::new();
    for &family in families {
        let constrained: Vec<(Constraint, Result<FitResult>)> = constraints
            .par_iter()
            .filter(|&&c| c != Constraint::Full && family.supports(c))
            .filter(|&&c| !ModelSpec { family, constraint: c }.same_as_full())
            .map(|&c| {
                let model = ModelSpec {
                    family,
                    constraint: c,
                };
                (c, fit(&model, data, opts))
            })
            .collect();

        let needs_full = constraints
            .iter()
            .any(|&c| c == Constraint::Full || (ModelSpec { family, constraint: c }).same_as_full());
        let full = if needs_full {
            let model = ModelSpec {
                family,
                constraint: Constraint::Full,
            };
            let mut full_opts = opts.clone();
            full_opts.extra_starts.extend(
                constrained
                    .iter()
                    .filter_map(|(c, r)| {
                        let fit = r.as_ref().ok()?;
                        ModelSpec { family, constraint: *c }.embed_in_full(&fit.estimate)
                    }),
            );
            Some(fit(&model, data, &full_opts))
        } else {
            None
        };

        for &constraint in constraints {
            let spec = ModelSpec { family, constraint };
            let outcome = if !family.supports(constraint) {
                CellOutcome::Inapplicable
            } else if constraint == Constraint::Full || spec.same_as_full() {
                match full.as_ref().expect("full fit requested") {
                    Ok(fit) if constraint == Constraint::Full => CellOutcome::Fitted { fit: fit.clone() },
                    Ok(fit) => CellOutcome::SameAsFull { fit: fit.clone() },
                    Err(e) => CellOutcome::Failed {
                        reason: e.to_string(),
                    },
                }
            } else {
                match constrained.iter().find(|(c, _)| *c == constraint) {
                    Some((_, Ok(fit))) => CellOutcome::Fitted { fit: fit.clone() },
                    Some((_, Err(e))) => CellOutcome::Failed {
                        reason: e.to_string(),
                    },
                    None => CellOutcome::Inapplicable,
                }
            };
            let outcome = match outcome {
                CellOutcome::Fitted { fit } if !fit.loglik.is_finite() => CellOutcome::Failed {
                    reason: "no finite likelihood".to_string(),
                },
                other => other,
            };
            rows.push(ModelTableRow {
                family,
                constraint,
                outcome,
            });
        }
    }
    // stable sort: fitted rows by AIC, then everything else in grid order
    rows.sort_by(|a, b| match (a.aic(), b.aic()) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(y: u64, n: usize) -> PrevalenceSeries {
        PrevalenceSeries::daily(&vec![y; n]).unwrap()
    }

    #[test]
    fn aic_definition() {
        assert_eq!(aic(4, -100.0), 208.0);
    }

    #[test]
    fn seeds_are_distinct() {
        assert_ne!(derive_seed(7, 1), derive_seed(7, 2));
        assert_eq!(derive_seed(7, 1), derive_seed(7, 1));
    }

    #[test]
    fn flat_series_gives_unit_growth() {
        let data = flat(6, 25);
        let model = ModelSpec::new(Family::Lomax, Constraint::AcceleratedEventTime).unwrap();
        let res = fit(&model, &data, &FitOptions::default()).unwrap();
        let pred = likelihood::conditional_expectation_series(&model, &res.estimate, &data).unwrap();
        for (_, p) in pred {
            assert!((p / 6.0 - 1.0).abs() < 0.05, "prediction {p}");
        }
    }

    #[test]
    fn table_structure() {
        let data = PrevalenceSeries::daily(&[1, 2, 2, 4, 5, 7, 6, 8, 7, 5, 4, 4, 2, 1, 1]).unwrap();
        let opts = FitOptions {
            starts: 2,
            ..FitOptions::default()
        };
        let rows = model_table(&[Family::LogLogistic], &Constraint::ALL, &data, &opts);
        assert_eq!(rows.len(), 4);
        let pr = rows.iter().find(|r| r.constraint == Constraint::ProportionalRate).unwrap();
        assert_eq!(pr.outcome, CellOutcome::Inapplicable);
        // ranked rows lead
        assert!(rows[0].aic().is_some());
    }
}
