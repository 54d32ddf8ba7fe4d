//! (μ/μ_w, λ)-CMA-ES on a box, searched in coordinates normalized to [0, 1].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::eigen::symmetric_eigen;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct CmaEsOptions<T> {
    pub population_size: usize,
    pub max_iterations: usize,
    /// Initial step size in normalized coordinates.
    pub initial_sigma: T,
    pub seed: u64,
    pub target_loss: Option<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxIterations,
    TargetLoss,
    /// Step size or covariance collapsed below numerical resolution.
    Stagnation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum<T> {
    /// Best projected candidate, in the original coordinates.
    pub x: Vec<T>,
    /// Its loss, without the bound penalty.
    pub value: T,
    /// Running best loss after each iteration.
    pub trace: Vec<T>,
    pub evaluations: usize,
    /// Candidates whose loss was not finite.
    pub failed_evaluations: usize,
    pub stop: StopReason,
}

/// Minimize over the box `[lower, upper]`.
///
/// `batch` receives one generation of candidates (already projected into the
/// box) and returns their losses in the same order; non-finite losses rank
/// last. Coordinates with `lower == upper` are held fixed. Out-of-box samples
/// are scored at their projection plus a penalty on the squared normalized
/// projection distance, weighted so that a distance of one sampling width
/// costs the interquartile range of the generation's losses.
pub fn minimize_box<T, F>(
    lower: &[T],
    upper: &[T],
    opts: &CmaEsOptions<T>,
    mut batch: F,
) -> Result<Minimum<T>>
where
    T: Real,
    F: FnMut(&[Vec<T>]) -> Vec<T>,
{
    if lower.len() != upper.len() {
        return Err(Error::Shape(format!(
            "{} lower bounds, {} upper bounds",
            lower.len(),
            upper.len()
        )));
    }
    for (i, (lo, hi)) in lower.iter().zip(upper).enumerate() {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::invalid("bounds", format!("entry {i}: [{lo}, {hi}]")));
        }
    }
    if opts.population_size < 4 {
        return Err(Error::invalid("population_size", "must be >= 4"));
    }
    if !(opts.initial_sigma > T::zero() && opts.initial_sigma <= T::one()) {
        return Err(Error::invalid("initial_sigma", "must lie in (0, 1]"));
    }
    let free: Vec<usize> = (0..lower.len()).filter(|&i| lower[i] < upper[i]).collect();
    if free.is_empty() {
        return Err(Error::invalid("bounds", "every entry has lower == upper"));
    }

    let n = free.len();
    let nf = T::lit(n as f64);
    let lambda = opts.population_size;
    let mu = lambda / 2;
    let raw_w: Vec<T> = (0..mu)
        .map(|i| T::lit((mu as f64 + 0.5).ln() - ((i + 1) as f64).ln()))
        .collect();
    let w_sum: T = raw_w.iter().copied().sum();
    let weights: Vec<T> = raw_w.iter().map(|w| *w / w_sum).collect();
    let mu_eff = T::one() / weights.iter().map(|w| *w * *w).sum::<T>();

    let two = T::lit(2.0);
    let c_sigma = (mu_eff + two) / (nf + mu_eff + T::lit(5.0));
    let d_sigma = T::one()
        + two * T::zero().max(((mu_eff - T::one()) / (nf + T::one())).sqrt() - T::one())
        + c_sigma;
    let c_c = (T::lit(4.0) + mu_eff / nf) / (nf + T::lit(4.0) + two * mu_eff / nf);
    let c_1 = two / ((nf + T::lit(1.3)).powi(2) + mu_eff);
    let c_mu = (T::one() - c_1).min(
        two * (mu_eff - two + T::one() / mu_eff) / ((nf + two).powi(2) + mu_eff),
    );
    let chi_n = nf.sqrt() * (T::one() - T::one() / (T::lit(4.0) * nf) + T::one() / (T::lit(21.0) * nf * nf));

    let to_original = |z: &[T]| -> Vec<T> {
        let mut x = lower.to_vec();
        for (k, &i) in free.iter().enumerate() {
            x[i] = lower[i] + z[k] * (upper[i] - lower[i]);
        }
        x
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut mean = vec![T::lit(0.5); n];
    let mut sigma = opts.initial_sigma;
    let mut cov = identity::<T>(n);
    let mut b = identity::<T>(n);
    let mut d = vec![T::one(); n];
    let mut p_sigma = vec![T::zero(); n];
    let mut p_c = vec![T::zero(); n];

    let mut best_x = to_original(&mean);
    let mut best_value = T::infinity();
    let mut trace = Vec::with_capacity(opts.max_iterations);
    let mut evaluations = 0;
    let mut failed = 0;
    let mut stop = StopReason::MaxIterations;

    for generation in 0..opts.max_iterations {
        // y = B D z, x = m + σ y
        let mut ys = Vec::with_capacity(lambda);
        let mut clipped = Vec::with_capacity(lambda);
        let mut dist2 = Vec::with_capacity(lambda);
        for _ in 0..lambda {
            let z: Vec<T> = (0..n)
                .map(|_| {
                    let s: f64 = StandardNormal.sample(&mut rng);
                    T::lit(s)
                })
                .collect();
            let y: Vec<T> = (0..n)
                .map(|r| (0..n).map(|c| b[r * n + c] * d[c] * z[c]).sum())
                .collect();
            let x: Vec<T> = (0..n).map(|i| mean[i] + sigma * y[i]).collect();
            let p: Vec<T> = x.iter().map(|v| v.max(T::zero()).min(T::one())).collect();
            dist2.push(x.iter().zip(&p).map(|(a, c)| (*a - *c) * (*a - *c)).sum::<T>());
            clipped.push(p);
            ys.push(y);
        }

        let candidates: Vec<Vec<T>> = clipped.iter().map(|p| to_original(p)).collect();
        let mut raw = batch(&candidates);
        if raw.len() != lambda {
            return Err(Error::Shape(format!(
                "objective returned {} losses for {lambda} candidates",
                raw.len()
            )));
        }
        evaluations += lambda;
        for v in raw.iter_mut() {
            if !v.is_finite() {
                *v = T::infinity();
                failed += 1;
            }
        }
        let mut finite: Vec<T> = raw.iter().copied().filter(|v| v.is_finite()).collect();
        if finite.is_empty() {
            return Err(Error::Diverged(format!(
                "every candidate of iteration {generation} has a non-finite loss"
            )));
        }
        finite.sort_by(|a, c| a.partial_cmp(c).unwrap());
        // a projection distance of one sampling width costs one interquartile range of loss
        let m = finite.len();
        let spread = (finite[(3 * m) / 4] - finite[m / 4]).max(finite[m / 2] * T::epsilon());
        let mean_var = cov.iter().step_by(n + 1).copied().sum::<T>() / nf;
        let weight = (spread / (sigma * sigma * mean_var)).max(T::min_positive_value());
        let fitness: Vec<T> = raw.iter().zip(&dist2).map(|(r, d2)| *r + weight * *d2).collect();

        for (i, r) in raw.iter().enumerate() {
            if *r < best_value {
                best_value = *r;
                best_x = candidates[i].clone();
            }
        }
        trace.push(best_value);

        let mut order: Vec<usize> = (0..lambda).collect();
        order.sort_by(|&a, &c| fitness[a].partial_cmp(&fitness[c]).unwrap_or(std::cmp::Ordering::Equal));

        if let Some(target) = opts.target_loss {
            if best_value <= target {
                stop = StopReason::TargetLoss;
                break;
            }
        }

        // recombination in y, so the mean moves toward the selected (unprojected) samples
        let mut y_w = vec![T::zero(); n];
        for (rank, &idx) in order.iter().take(mu).enumerate() {
            for i in 0..n {
                y_w[i] = y_w[i] + weights[rank] * ys[idx][i];
            }
        }
        for i in 0..n {
            mean[i] = mean[i] + sigma * y_w[i];
        }

        // C^{-1/2} y_w = B D^{-1} Bᵀ y_w
        let bt_y: Vec<T> = (0..n)
            .map(|c| (0..n).map(|r| b[r * n + c] * y_w[r]).sum::<T>() / d[c])
            .collect();
        let inv_sqrt_y: Vec<T> = (0..n)
            .map(|r| (0..n).map(|c| b[r * n + c] * bt_y[c]).sum())
            .collect();
        let cs = (c_sigma * (two - c_sigma) * mu_eff).sqrt();
        for i in 0..n {
            p_sigma[i] = (T::one() - c_sigma) * p_sigma[i] + cs * inv_sqrt_y[i];
        }
        let ps_norm = p_sigma.iter().map(|v| *v * *v).sum::<T>().sqrt();
        let gens = T::lit((2 * (generation + 1)) as f64);
        let h_sigma = ps_norm / (T::one() - (T::one() - c_sigma).powf(gens)).sqrt()
            < (T::lit(1.4) + two / (nf + T::one())) * chi_n;
        let cc = (c_c * (two - c_c) * mu_eff).sqrt();
        for i in 0..n {
            p_c[i] = (T::one() - c_c) * p_c[i] + if h_sigma { cc * y_w[i] } else { T::zero() };
        }
        let delta_h = if h_sigma { T::zero() } else { (two - c_c) * c_c };
        let decay = T::one() + c_1 * delta_h - c_1 - c_mu;
        for r in 0..n {
            for c in r..n {
                let mut rank_mu = T::zero();
                for (rank, &idx) in order.iter().take(mu).enumerate() {
                    rank_mu = rank_mu + weights[rank] * ys[idx][r] * ys[idx][c];
                }
                let v = decay * cov[r * n + c] + c_1 * p_c[r] * p_c[c] + c_mu * rank_mu;
                cov[r * n + c] = v;
                cov[c * n + r] = v;
            }
        }

        sigma = sigma * ((c_sigma / d_sigma) * (ps_norm / chi_n - T::one())).exp();

        let (vals, vecs) = symmetric_eigen(&cov, n);
        b = vecs;
        d = vals.iter().map(|v| v.max(T::zero()).sqrt()).collect();
        let d_max = d.iter().copied().fold(T::zero(), T::max);
        let d_min = d.iter().copied().fold(T::infinity(), T::min);
        // condition number of C above 1e14, or steps below 1e-12 of the initial width
        let tol_x = T::lit(1e-12).max(T::epsilon()) * opts.initial_sigma;
        if !sigma.is_finite() || d_min < d_max * T::lit(1e-7) || sigma * d_max < tol_x {
            stop = StopReason::Stagnation;
            break;
        }
    }

    Ok(Minimum {
        x: best_x,
        value: best_value,
        trace,
        evaluations,
        failed_evaluations: failed,
        stop,
    })
}

fn identity<T: Real>(n: usize) -> Vec<T> {
    let mut m = vec![T::zero(); n * n];
    for i in 0..n {
        m[i * n + i] = T::one();
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(pop: usize, iters: usize, seed: u64) -> CmaEsOptions<f64> {
        CmaEsOptions {
            population_size: pop,
            max_iterations: iters,
            initial_sigma: 0.3,
            seed,
            target_loss: None,
        }
    }

    fn sphere(target: Vec<f64>) -> impl FnMut(&[Vec<f64>]) -> Vec<f64> {
        move |pop| {
            pop.iter()
                .map(|x| x.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum())
                .collect()
        }
    }

    #[test]
    fn rosenbrock_in_a_box() {
        let lo = [-2.0, -2.0];
        let hi = [2.0, 2.0];
        let res = minimize_box(&lo, &hi, &opts(12, 600, 5), |pop| {
            pop.iter()
                .map(|x| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2))
                .collect()
        })
        .unwrap();
        assert!(res.value < 1e-12, "{}", res.value);
        assert!((res.x[0] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn optimum_on_the_bound() {
        let res = minimize_box(&[0.0, 0.0], &[1.0, 1.0], &opts(8, 300, 1), sphere(vec![-1.0, 0.5])).unwrap();
        assert!(res.x[0].abs() < 1e-9, "{:?}", res.x);
        assert!((res.value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fixed_coordinates_are_untouched() {
        let res = minimize_box(
            &[0.0, 0.3, 0.0],
            &[1.0, 0.3, 1.0],
            &opts(8, 200, 2),
            sphere(vec![0.25, 0.9, 0.75]),
        )
        .unwrap();
        assert_eq!(res.x[1], 0.3);
        assert!((res.value - 0.36).abs() < 1e-10);
    }

    #[test]
    fn trace_is_running_best() {
        let res = minimize_box(&[0.0; 4], &[1.0; 4], &opts(8, 100, 9), sphere(vec![0.1; 4])).unwrap();
        assert!(res.trace.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(res.evaluations, 8 * res.trace.len());
    }

    #[test]
    fn same_seed_same_result() {
        let a = minimize_box(&[0.0; 3], &[1.0; 3], &opts(6, 50, 4), sphere(vec![0.2; 3])).unwrap();
        let b = minimize_box(&[0.0; 3], &[1.0; 3], &opts(6, 50, 4), sphere(vec![0.2; 3])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn target_loss_stops_early() {
        let mut o = opts(8, 1000, 3);
        o.target_loss = Some(1e-4);
        let res = minimize_box(&[0.0; 2], &[1.0; 2], &o, sphere(vec![0.3, 0.6])).unwrap();
        assert_eq!(res.stop, StopReason::TargetLoss);
        assert!(res.value <= 1e-4);
        assert!(res.trace.len() < 1000);
    }

    #[test]
    fn rejects_bad_inputs() {
        let all_fixed = minimize_box(&[1.0, 2.0], &[1.0, 2.0], &opts(8, 10, 0), sphere(vec![0.0; 2]));
        assert!(matches!(all_fixed, Err(Error::Invalid { .. })));
        let inf = minimize_box(&[0.0], &[f64::INFINITY], &opts(8, 10, 0), sphere(vec![0.0]));
        assert!(inf.is_err());
        let diverged = minimize_box(&[0.0], &[1.0], &opts(8, 10, 0), |p| vec![f64::NAN; p.len()]);
        assert!(matches!(diverged, Err(Error::Diverged(_))));
        assert!(minimize_box(&[0.0], &[1.0], &opts(3, 10, 0), sphere(vec![0.0])).is_err());
    }

    #[test]
    fn partial_failures_are_counted() {
        let mut calls = 0;
        let res = minimize_box(&[0.0; 2], &[1.0; 2], &opts(8, 20, 0), |pop| {
            calls += 1;
            pop.iter()
                .enumerate()
                .map(|(i, x)| if i == 0 { f64::INFINITY } else { x[0] * x[0] + x[1] * x[1] })
                .collect()
        })
        .unwrap();
        assert_eq!(res.failed_evaluations, calls);
        assert!(res.value.is_finite());
    }
}
