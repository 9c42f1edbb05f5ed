//! Transition law of the nonhomogeneous birth-death process.
//!
//! Starting from `y0` units, the count after one step has probability
//! generating function `[θ + (1-θ)(1-π)u / (1-πu)]^y0`: each unit survives
//! removal with probability `1-θ` and, if it does, is replaced by a
//! positive-geometric number of units with parameter `π`. The mass function is
//! the Bernoulli-binomial Lagrangian (double-binomial) law.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Geometric, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::error::Result;
use crate::quadrature::{self, Tolerance};
use crate::survival::{Lifetime, SurvivalPair};

/// Below this, `θ` or `π` is treated as zero and the mass function switches
/// to its closed-form limit.
pub const DEGENERATE_TOL: f64 = 1e-12;

/// Offspring draws above this many surviving units use the gamma-Poisson
/// representation of the negative binomial instead of summing geometrics.
const GEOMETRIC_SUM_LIMIT: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawMode {
    Continuous,
    DiscreteConditional,
}

/// One step of the process: removal-side `θ` and reproduction-side `π`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionLaw {
    theta: f64,
    pi: f64,
    // ln(1-θ) and ln(1-π), kept separately so hazards close to 0 or 1 keep
    // full precision
    ln_1m_theta: f64,
    ln_1m_pi: f64,
    gamma: Option<f64>,
    mode: LawMode,
}

impl TransitionLaw {
    /// A discrete-conditional law from `θ = h_mu` and `π = h_lambda`.
    pub fn new(theta: f64, pi: f64) -> Self {
        assert!(
            (0.0..=1.0).contains(&theta) && (0.0..1.0).contains(&pi),
            "transition law requires 0 <= theta <= 1, 0 <= pi < 1 (got {theta}, {pi})"
        );
        Self {
            theta,
            pi,
            ln_1m_theta: (-theta).ln_1p(),
            ln_1m_pi: (-pi).ln_1p(),
            gamma: None,
            mode: LawMode::DiscreteConditional,
        }
    }

    /// Builds the law from the log conditional survivals `ln(1-θ)`, `ln(1-π)`.
    pub fn from_log_complements(ln_1m_theta: f64, ln_1m_pi: f64) -> Self {
        let ln_1m_theta = ln_1m_theta.min(0.0);
        let ln_1m_pi = ln_1m_pi.min(0.0);
        Self {
            theta: -ln_1m_theta.exp_m1(),
            pi: -ln_1m_pi.exp_m1(),
            ln_1m_theta,
            ln_1m_pi,
            gamma: None,
            mode: LawMode::DiscreteConditional,
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn pi(&self) -> f64 {
        self.pi
    }

    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn mode(&self) -> LawMode {
        self.mode
    }

    /// Expected count per starting unit, `(1-θ)/(1-π)`.
    pub fn growth_factor(&self) -> f64 {
        (self.ln_1m_theta - self.ln_1m_pi).exp()
    }

    /// Log-probability of moving from `y0` to `y` units.
    pub fn log_pmf(&self, y0: u64, y: u64) -> f64 {
        if y0 == 0 {
            return if y == 0 { 0.0 } else { f64::NEG_INFINITY };
        }
        let n0 = y0 as f64;
        if y == 0 {
            return n0 * ln_or_neg_inf(self.theta);
        }
        let small_theta = self.theta < DEGENERATE_TOL;
        let small_pi = self.pi < DEGENERATE_TOL;
        match (small_theta, small_pi) {
            (true, true) => {
                if y == y0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            // every unit survives and leaves a positive-geometric count:
            // P(y) = C(y-1, y0-1) (1-π)^y0 π^(y-y0)
            (true, false) => {
                if y < y0 {
                    f64::NEG_INFINITY
                } else {
                    ln_binomial(y - 1, y0 - 1)
                        + n0 * self.ln_1m_pi
                        + (y - y0) as f64 * self.pi.ln()
                }
            }
            // no offspring beyond the unit itself: Binomial(y0, 1-θ)
            (false, true) => {
                if y > y0 {
                    f64::NEG_INFINITY
                } else {
                    ln_binomial(y0, y)
                        + y as f64 * self.ln_1m_theta
                        + (y0 - y) as f64 * ln_or_neg_inf(self.theta)
                }
            }
            (false, false) => self.log_pmf_general(y0, y),
        }
    }

    /// `(y0/y) θ^y0 π^y Σ_k C(y0-1,k) C(y,y-k-1) [(1-π)(1-θ)/(πθ)]^(k+1)`
    /// with the powers of `θ` and `π` folded into each term.
    fn log_pmf_general(&self, y0: u64, y: u64) -> f64 {
        let ln_theta = ln_or_neg_inf(self.theta);
        let ln_pi = self.pi.ln();
        let ln_cross = self.ln_1m_theta + self.ln_1m_pi;
        let k_max = (y - 1).min(y0 - 1);
        let terms = (0..=k_max).map(|k| {
            let j = k + 1;
            let mut term = ln_binomial(y0 - 1, k) + ln_binomial(y, y - j) + j as f64 * ln_cross;
            // θ^(y0-j) and π^(y-j); 0^0 = 1
            if y0 > j {
                term += (y0 - j) as f64 * ln_theta;
            }
            if y > j {
                term += (y - j) as f64 * ln_pi;
            }
            term
        });
        (y0 as f64).ln() - (y as f64).ln() + log_sum_exp(terms)
    }

    pub fn pmf(&self, y0: u64, y: u64) -> f64 {
        self.log_pmf(y0, y).exp()
    }

    /// Closed-form mean and variance of the count after one step.
    pub fn moments(&self, y0: u64) -> Moments {
        let n0 = y0 as f64;
        let (theta, pi) = (self.theta, self.pi);
        let one_m_pi = 1.0 - pi;
        let mean = n0 * (1.0 - theta) / one_m_pi;
        let variance = n0 * (1.0 - theta) * (theta + pi * (1.0 - theta - pi)) / one_m_pi.powi(3);
        // y0 R [1 + (2γ - 1) R] with R = (1-θ)/(1-π)
        let variance_rt_form = self.gamma.map(|gamma| {
            let r = self.growth_factor();
            n0 * r * (1.0 + (2.0 * gamma - 1.0) * r)
        });
        Moments {
            mean,
            variance,
            variance_rt_form,
        }
    }

    /// Draws the count after one step from `y0` units.
    pub fn sample<R: Rng + ?Sized>(&self, y0: u64, rng: &mut R) -> u64 {
        if y0 == 0 || self.theta >= 1.0 {
            return 0;
        }
        let survivors = if self.theta <= 0.0 {
            y0
        } else {
            Binomial::new(y0, 1.0 - self.theta)
                .expect("survival probability in [0,1]")
                .sample(rng)
        };
        if survivors == 0 || self.pi <= 0.0 {
            return survivors;
        }
        survivors + self.extra_offspring(survivors, rng)
    }

    /// Sum of `n` geometric failure counts with success probability `1-π`.
    fn extra_offspring<R: Rng + ?Sized>(&self, n: u64, rng: &mut R) -> u64 {
        let p = 1.0 - self.pi;
        if n <= GEOMETRIC_SUM_LIMIT {
            let geo = Geometric::new(p).expect("success probability in (0,1]");
            (0..n).map(|_| geo.sample(rng)).sum()
        } else {
            let rate = Gamma::new(n as f64, self.pi / p)
                .expect("positive shape and scale")
                .sample(rng);
            if rate <= 0.0 {
                return 0;
            }
            Poisson::new(rate).expect("positive rate").sample(rng) as u64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    /// Variance rewritten through `R(t)` and `γ(t)`; continuous laws only.
    pub variance_rt_form: Option<f64>,
}

fn ln_or_neg_inf(x: f64) -> f64 {
    if x > 0.0 {
        x.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// `ln Σ exp(x_i)`, returning `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let values: Vec<f64> = values.into_iter().collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `ρ(t) = ln S_lambda(t) - ln S_mu(t)`.
pub fn rho_of<R: Lifetime + ?Sized, M: Lifetime + ?Sized>(repro: &R, removal: &M, t: f64) -> f64 {
    repro.log_survival(t) - removal.log_survival(t)
}

/// `γ(t) = ∫_0^t f_lambda(τ) / S_mu(τ) dτ` by adaptive quadrature.
pub fn gamma_of<R: Lifetime + ?Sized, M: Lifetime + ?Sized>(
    repro: &R,
    removal: &M,
    t: f64,
) -> Result<f64> {
    if t <= 0.0 {
        return Ok(0.0);
    }
    let integrand = |tau: f64| {
        let f = repro.density(tau);
        if f == 0.0 {
            0.0
        } else {
            f * (-removal.log_survival(tau)).exp()
        }
    };
    let est = quadrature::integrate(integrand, 0.0, t, Tolerance::default())?;
    Ok(est.value.max(0.0))
}

/// Continuous-time law over `[0, t]` from the survival functions.
pub fn continuous_law_of<R: Lifetime + ?Sized, M: Lifetime + ?Sized>(
    repro: &R,
    removal: &M,
    t: f64,
) -> Result<TransitionLaw> {
    let gamma = gamma_of(repro, removal, t)?;
    let e_rho = rho_of(repro, removal, t).exp();
    let denom = e_rho + gamma;
    // θ = 1 - 1/(e^ρ + γ),  π = γ/(e^ρ + γ)
    let ln_1m_theta = -denom.ln();
    let ln_1m_pi = e_rho.ln() - denom.ln();
    let mut law = TransitionLaw::from_log_complements(ln_1m_theta, ln_1m_pi);
    law.theta = (((e_rho - 1.0) + gamma) / denom).clamp(0.0, 1.0);
    law.pi = (gamma / denom).clamp(0.0, 1.0);
    law.gamma = Some(gamma);
    law.mode = LawMode::Continuous;
    Ok(law)
}

/// Discrete-conditional law on `(t_prev, t_next]`: `θ = h_mu`, `π = h_lambda`.
pub fn discrete_law_of<R: Lifetime + ?Sized, M: Lifetime + ?Sized>(
    repro: &R,
    removal: &M,
    t_prev: f64,
    t_next: f64,
) -> TransitionLaw {
    let ln_1m_theta = removal.log_survival(t_next) - removal.log_survival(t_prev);
    let ln_1m_pi = repro.log_survival(t_next) - repro.log_survival(t_prev);
    TransitionLaw::from_log_complements(ln_1m_theta, ln_1m_pi)
}

pub fn rho(pair: &SurvivalPair, t: f64) -> f64 {
    let (repro, removal) = pair.realize();
    rho_of(&repro, &removal, t)
}

pub fn gamma(pair: &SurvivalPair, t: f64) -> Result<f64> {
    let (repro, removal) = pair.realize();
    gamma_of(&repro, &removal, t)
}

pub fn transition_law_continuous(pair: &SurvivalPair, t: f64) -> Result<TransitionLaw> {
    let (repro, removal) = pair.realize();
    continuous_law_of(&repro, &removal, t)
}

pub fn transition_law_discrete(pair: &SurvivalPair, t_prev: f64, t_next: f64) -> TransitionLaw {
    let (repro, removal) = pair.realize();
    discrete_law_of(&repro, &removal, t_prev, t_next)
}
