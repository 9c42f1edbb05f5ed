//! Effective reproduction number `R(t_{j-1}) = (1 - h_mu) / (1 - h_lambda)`
//! and percentile bands from simulated prevalence paths.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bdprocess::{self, TransitionLaw};
use crate::error::{Error, Result};
use crate::estimate::derive_seed;
use crate::model::ModelSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RtPoint {
    /// Start of the step, `t_{j-1}`.
    pub day: f64,
    pub r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lower: f64,
    pub upper: f64,
    /// Paths still alive at the start of the step.
    pub paths: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtSeries {
    pub points: Vec<RtPoint>,
    /// First day with `R < 1`.
    pub threshold_crossing: Option<f64>,
    /// Per-point percentile band; `None` where every path had gone extinct.
    pub bands: Option<Vec<Option<Band>>>,
    pub level: Option<f64>,
    pub paths_used: usize,
}

fn step_laws(model: &ModelSpec, delta: &[f64], steps: &[(f64, f64)]) -> Result<Vec<TransitionLaw>> {
    let (repro, removal) = model.pair(delta)?.realize();
    for &(t0, t1) in steps {
        if !(t0 >= 0.0 && t1 > t0) {
            return Err(Error::InvalidArgument(format!("invalid step ({t0}, {t1})")));
        }
    }
    Ok(steps
        .iter()
        .map(|&(t0, t1)| bdprocess::discrete_law_of(&repro, &removal, t0, t1))
        .collect())
}

/// `R` for each `(t_prev, t_next)` step and the first sub-unity day.
pub fn rt_series(model: &ModelSpec, delta: &[f64], steps: &[(f64, f64)]) -> Result<RtSeries> {
    let laws = step_laws(model, delta, steps)?;
    let points: Vec<RtPoint> = steps
        .iter()
        .zip(&laws)
        .map(|(&(t0, _), law)| RtPoint {
            day: t0,
            r: law.growth_factor(),
        })
        .collect();
    let threshold_crossing = points.iter().find(|p| p.r < 1.0).map(|p| p.day);
    Ok(RtSeries {
        points,
        threshold_crossing,
        bands: None,
        level: None,
        paths_used: 0,
    })
}

/// Consecutive step pairs of a day grid.
pub fn steps_of(days: &[f64]) -> Vec<(f64, f64)> {
    days.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Simulates counts on `days` starting from `y_init` at `days[0]`.
pub fn simulate_path<R: Rng + ?Sized>(
    model: &ModelSpec,
    delta: &[f64],
    days: &[f64],
    y_init: u64,
    rng: &mut R,
) -> Result<Vec<u64>> {
    let laws = step_laws(model, delta, &steps_of(days))?;
    Ok(path_from_laws(&laws, y_init, rng))
}

fn path_from_laws<R: Rng + ?Sized>(laws: &[TransitionLaw], y_init: u64, rng: &mut R) -> Vec<u64> {
    let mut path = Vec::with_capacity(laws.len() + 1);
    let mut y = y_init;
    path.push(y);
    for law in laws {
        y = law.sample(y, rng);
        path.push(y);
    }
    path
}

/// Nearest-rank percentile of sorted values, `p` in `[0, 1]`.
fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = ((p * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

/// Pointwise bands of the per-path growth ratios `y_j / y_{j-1}`. Paths
/// contribute nothing from the step after they reach zero.
pub fn bands_from_paths(paths: &[Vec<u64>], level: f64) -> Vec<Option<Band>> {
    let n_steps = paths.iter().map(|p| p.len().saturating_sub(1)).max().unwrap_or(0);
    let tail = (1.0 - level / 100.0) / 2.0;
    (0..n_steps)
        .map(|j| {
            let mut ratios: Vec<f64> = paths
                .iter()
                .filter(|p| p.len() > j + 1 && p[j] > 0)
                .map(|p| p[j + 1] as f64 / p[j] as f64)
                .collect();
            if ratios.is_empty() {
                return None;
            }
            ratios.sort_by(f64::total_cmp);
            Some(Band {
                lower: nearest_rank(&ratios, tail),
                upper: nearest_rank(&ratios, 1.0 - tail),
                paths: ratios.len(),
            })
        })
        .collect()
}

pub fn validate_band_request(paths: usize, level: f64) -> Result<()> {
    if paths < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 paths, got {paths}")));
    }
    if !(level > 0.0 && level <= 100.0) {
        return Err(Error::InvalidArgument(format!("level must be in (0, 100], got {level}")));
    }
    Ok(())
}

/// Simulates `paths` free-running trajectories on `days` from `y_init` and
/// attaches `level`% percentile bands of the per-path growth ratios to the
/// model's `R` series. Path `i` uses a stream derived from `(seed, i)`.
pub fn rt_bands(
    model: &ModelSpec,
    delta: &[f64],
    y_init: u64,
    days: &[f64],
    paths: usize,
    level: f64,
    seed: u64,
) -> Result<RtSeries> {
    validate_band_request(paths, level)?;
    if y_init == 0 {
        return Err(Error::InvalidArgument("initial prevalence must be >= 1".to_string()));
    }
    let steps = steps_of(days);
    let mut series = rt_series(model, delta, &steps)?;
    let laws = step_laws(model, delta, &steps)?;
    let simulated: Vec<Vec<u64>> = (0..paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64 + 1));
            path_from_laws(&laws, y_init, &mut rng)
        })
        .collect();
    series.bands = Some(bands_from_paths(&simulated, level));
    series.level = Some(level);
    series.paths_used = paths;
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival::{Constraint, Family};

    #[test]
    fn identical_specs_give_unit_r() {
        let model = ModelSpec::new(Family::Lomax, Constraint::AcceleratedEventTime).unwrap();
        let steps = steps_of(&(0..30).map(f64::from).collect::<Vec<_>>());
        let rt = rt_series(&model, &[2.0, 1.5, 0.0], &steps).unwrap();
        assert!(rt.points.iter().all(|p| p.r == 1.0));
        assert_eq!(rt.threshold_crossing, None);
    }

    #[test]
    fn direct_ratio() {
        let law = TransitionLaw::new(0.75, 0.5);
        assert!((law.growth_factor() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn reported_lomax_crosses_unity_once() {
        let model = ModelSpec::new(Family::Lomax, Constraint::Full).unwrap();
        let days: Vec<f64> = (0..60).map(f64::from).collect();
        let rt = rt_series(&model, &[3.235, 2.712, 4.987, 3.98], &steps_of(&days)).unwrap();
        let crossings = rt
            .points
            .windows(2)
            .filter(|w| (w[0].r >= 1.0) != (w[1].r >= 1.0))
            .count();
        assert_eq!(crossings, 1);
        assert!(rt.points.windows(2).all(|w| w[1].r < w[0].r));
        assert!(rt.threshold_crossing.is_some());
    }

    #[test]
    fn identical_paths_collapse_bands() {
        let model = ModelSpec::new(Family::Lomax, Constraint::Full).unwrap();
        let delta = [3.2, 2.7, 5.0, 4.0];
        let days: Vec<f64> = (0..20).map(f64::from).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let path = simulate_path(&model, &delta, &days, 3, &mut rng).unwrap();
        let bands = bands_from_paths(&[path.clone(), path.clone()], 95.0);
        for (j, band) in bands.iter().enumerate() {
            match band {
                Some(b) => {
                    let ratio = path[j + 1] as f64 / path[j] as f64;
                    assert_eq!((b.lower, b.upper), (ratio, ratio));
                }
                None => assert_eq!(path[j], 0),
            }
        }
    }

    #[test]
    fn full_level_is_min_max() {
        let paths = vec![vec![2, 4], vec![2, 1], vec![2, 3], vec![2, 0]];
        let b = bands_from_paths(&paths, 100.0)[0].unwrap();
        assert_eq!((b.lower, b.upper, b.paths), (0.0, 2.0, 4));
    }

    #[test]
    fn extinct_paths_dropped() {
        let paths = vec![vec![1, 0, 0], vec![1, 2, 2]];
        let bands = bands_from_paths(&paths, 95.0);
        assert_eq!(bands[1].unwrap().paths, 1);
        let none = bands_from_paths(&[vec![1, 0, 0]], 95.0);
        assert!(none[1].is_none());
    }

    #[test]
    fn rejects_bad_requests() {
        let model = ModelSpec::new(Family::Lomax, Constraint::Full).unwrap();
        let days = [0.0, 1.0, 2.0];
        let delta = [3.2, 2.7, 5.0, 4.0];
        assert!(rt_bands(&model, &delta, 1, &days, 1, 95.0, 0).is_err());
        assert!(rt_bands(&model, &delta, 0, &days, 10, 95.0, 0).is_err());
        assert!(rt_bands(&model, &delta, 1, &days, 10, 0.0, 0).is_err());
    }
}
