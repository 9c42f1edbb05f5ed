//! Derivative-free minimization and finite-difference curvature.

use nalgebra::DMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub max_iterations: usize,
    /// Converged when `max f - min f` over the simplex falls below this...
    pub f_tol: f64,
    /// ...and every vertex is within this distance (per coordinate) of the best.
    pub x_tol: f64,
    /// Edge length of the initial axis-aligned simplex.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_iterations: 20_000,
            f_tol: 1e-8,
            x_tol: 1e-6,
            initial_step: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Nelder-Mead simplex minimization. Non-finite objective values are treated
/// as `+inf`, so the objective may reject points by returning `inf` or NaN.
pub fn nelder_mead<F>(f: F, start: &[f64], opts: &NelderMeadOptions) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let n = start.len();
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let f0 = eval(start);
    simplex.push((start.to_vec(), f0));
    for i in 0..n {
        let mut x = start.to_vec();
        x[i] += opts.initial_step;
        let fx = eval(&x);
        simplex.push((x, fx));
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best_f = simplex[0].1;
        let worst_f = simplex[n].1;
        let f_spread = if worst_f.is_finite() {
            worst_f - best_f
        } else {
            f64::INFINITY
        };
        let x_spread = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if f_spread < opts.f_tol && x_spread < opts.x_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |coef: f64, from: &[f64]| -> Vec<f64> {
            centroid
                .iter()
                .zip(from)
                .map(|(c, x)| c + coef * (x - c))
                .collect()
        };

        let worst = simplex[n].0.clone();
        let second_worst_f = simplex[n - 1].1;
        let reflected = along(-REFLECT, &worst);
        let fr = eval(&reflected);

        if fr < best_f {
            let expanded = along(-REFLECT * EXPAND, &worst);
            let fe = eval(&expanded);
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < second_worst_f {
            simplex[n] = (reflected, fr);
            continue;
        }
        if fr < worst_f {
            let outside = along(-REFLECT * CONTRACT, &worst);
            let fc = eval(&outside);
            if fc <= fr {
                simplex[n] = (outside, fc);
                continue;
            }
        } else {
            let inside = along(CONTRACT, &worst);
            let fc = eval(&inside);
            if fc < worst_f {
                simplex[n] = (inside, fc);
                continue;
            }
        }
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = best
                .iter()
                .zip(&vertex.0)
                .map(|(b, x)| b + SHRINK * (x - b))
                .collect();
            let fx = eval(&x);
            *vertex = (x, fx);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, f) = simplex.swap_remove(0);
    Minimum {
        x,
        f,
        iterations,
        evaluations,
        converged,
    }
}

/// Central-difference Hessian of `f` at `x` with steps
/// `h_i = max(1e-4, 1e-4 |x_i|)`.
pub fn hessian<F>(f: F, x: &[f64]) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let n = x.len();
    let steps: Vec<f64> = x.iter().map(|v| (1e-4 * v.abs()).max(1e-4)).collect();
    let f0 = f(x);
    let at = |moves: &[(usize, f64)]| {
        let mut p = x.to_vec();
        for &(i, d) in moves {
            p[i] += d;
        }
        f(&p)
    };
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        let hi = steps[i];
        h[(i, i)] = (at(&[(i, hi)]) - 2.0 * f0 + at(&[(i, -hi)])) / (hi * hi);
        for j in 0..i {
            let hj = steps[j];
            let v = (at(&[(i, hi), (j, hj)]) - at(&[(i, hi), (j, -hj)]) - at(&[(i, -hi), (j, hj)])
                + at(&[(i, -hi), (j, -hj)]))
                / (4.0 * hi * hj);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    h
}

/// Square roots of the diagonal of `information^-1`, or `None` when the
/// matrix is not positive definite (or not finite).
pub fn standard_errors_from_information(information: &DMatrix<f64>) -> Option<Vec<f64>> {
    if information.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let chol = information.clone().cholesky()?;
    let inverse = chol.inverse();
    let n = information.nrows();
    let ses: Vec<f64> = (0..n).map(|i| inverse[(i, i)]).collect();
    if ses.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return None;
    }
    Some(ses.into_iter().map(f64::sqrt).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rosenbrock(x: &[f64]) -> f64 {
        x.windows(2)
            .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
            .sum()
    }

    #[test]
    fn rosenbrock_4d() {
        let opts = NelderMeadOptions {
            max_iterations: 10_000,
            f_tol: 1e-14,
            x_tol: 1e-8,
            initial_step: 0.5,
        };
        let mut start = vec![-1.2, 1.0, -1.2, 1.0];
        // restart from the returned vertex until the simplex stops moving
        let mut total = 0;
        let mut m;
        loop {
            m = nelder_mead(rosenbrock, &start, &opts);
            total += m.iterations;
            let moved = m.x.iter().zip(&start).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            start = m.x.clone();
            if moved < 1e-9 {
                break;
            }
        }
        assert!(total <= 10_000, "{total} iterations");
        for xi in &m.x {
            assert!((xi - 1.0).abs() < 1e-6, "{:?}", m.x);
        }
    }

    #[test]
    fn quadratic_bowl() {
        let m = nelder_mead(
            |x| (x[0] - 3.0).powi(2) + 2.0 * (x[1] + 1.0).powi(2),
            &[0.0, 0.0],
            &NelderMeadOptions::default(),
        );
        assert!(m.converged);
        assert!((m.x[0] - 3.0).abs() < 1e-5 && (m.x[1] + 1.0).abs() < 1e-5);
    }

    #[test]
    fn rejects_infinite_region() {
        let m = nelder_mead(
            |x| if x[0] < 0.5 { f64::INFINITY } else { (x[0] - 1.0).powi(2) },
            &[2.0],
            &NelderMeadOptions::default(),
        );
        assert!((m.x[0] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn unit_information_gives_unit_errors() {
        let f = |x: &[f64]| 0.5 * x.iter().map(|v| v * v).sum::<f64>();
        let h = hessian(f, &[0.0, 0.0, 0.0]);
        let se = standard_errors_from_information(&h).unwrap();
        for s in se {
            assert_relative_eq!(s, 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn curvature_four_gives_half() {
        let f = |x: &[f64]| 0.5 * (4.0 * x[0] * x[0] + x[1] * x[1]);
        let h = hessian(f, &[0.3, -0.2]);
        let se = standard_errors_from_information(&h).unwrap();
        assert_relative_eq!(se[0], 0.5, epsilon = 1e-6);
        assert_relative_eq!(se[1], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn indefinite_information_withheld() {
        let f = |x: &[f64]| x[0] * x[0] - x[1] * x[1];
        let h = hessian(f, &[0.0, 0.0]);
        assert!(standard_errors_from_information(&h).is_none());
    }

    #[test]
    fn correlated_hessian() {
        let f = |x: &[f64]| x[0] * x[0] + x[0] * x[1] + 2.0 * x[1] * x[1];
        let h = hessian(f, &[1.0, 2.0]);
        assert_relative_eq!(h[(0, 0)], 2.0, epsilon = 1e-5);
        assert_relative_eq!(h[(0, 1)], 1.0, epsilon = 1e-5);
        assert_relative_eq!(h[(1, 1)], 4.0, epsilon = 1e-5);
    }
}
