//! Link and base inertias reflected to a joint.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Compound-pendulum swing test of a link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumMeasurement<T> {
    /// kg
    pub mass: T,
    /// Pivot to center of mass, m.
    pub com_distance: T,
    /// Small-amplitude swing frequency, Hz.
    pub eigenfrequency: T,
    /// m/s²
    pub gravity: T,
    /// m
    pub sigma_r: T,
    /// Hz
    pub sigma_f: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumInertia<T> {
    /// About the pivot, kg·m².
    pub pivot: T,
    /// About the center of mass, kg·m².
    pub com: T,
    /// First-order standard deviation of `com` over `(r, f)`, kg·m².
    pub sigma_com: T,
}

/// `I_P = m r g / (2π f)²`, `I_CoM = I_P - m r²`, with first-order error propagation.
pub fn pendulum_inertia<T: Real>(meas: &PendulumMeasurement<T>) -> Result<PendulumInertia<T>> {
    let PendulumMeasurement {
        mass: m,
        com_distance: r,
        eigenfrequency: f,
        gravity: g,
        sigma_r,
        sigma_f,
    } = *meas;
    if f == T::zero() {
        return Err(Error::Domain("eigenfrequency is zero".into()));
    }
    if !(m > T::zero() && r > T::zero() && f > T::zero() && g > T::zero()) {
        return Err(Error::invalid("pendulum", "mass, distance, frequency and gravity must be > 0"));
    }
    if !(sigma_r >= T::zero() && sigma_f >= T::zero()) {
        return Err(Error::invalid("pendulum", "uncertainties must be >= 0"));
    }
    let w = T::TAU() * f;
    let pivot = m * r * g / (w * w);
    let com = pivot - m * r * r;
    let d_r = m * g / (w * w) - T::lit(2.0) * m * r;
    let d_f = -T::lit(2.0) * m * r * g / (T::TAU() * T::TAU() * f * f * f);
    let sigma_com = ((d_r * sigma_r).powi(2) + (d_f * sigma_f).powi(2)).sqrt();
    Ok(PendulumInertia { pivot, com, sigma_com })
}

/// Swing frequency of a link with the given center-of-mass inertia, Hz.
pub fn pendulum_frequency<T: Real>(mass: T, com_distance: T, gravity: T, com_inertia: T) -> T {
    let pivot = com_inertia + mass * com_distance * com_distance;
    (mass * com_distance * gravity / pivot).sqrt() / T::TAU()
}

/// Planar two-link leg carrying a point-mass base.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarLegModel<T> {
    /// kg
    pub base_mass: T,
    /// Thigh and shank length, m.
    pub link_length: T,
    /// kg·m²
    pub hip_inertia: T,
    /// kg·m²
    pub knee_inertia: T,
}

impl<T: Real> PlanarLegModel<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_mass > T::zero()
            && self.link_length > T::zero()
            && self.hip_inertia > T::zero()
            && self.knee_inertia > T::zero())
        {
            return Err(Error::invalid("leg", "all quantities must be > 0"));
        }
        Ok(())
    }
}

/// Knee-reduced inertia for vertical base motion with `q_h = q_k / 2`:
/// `½ [m l² sin²(q_k/2) + I_h/4 + I_k]`.
///
/// The leading ½ shares the base load between the two stance legs.
pub fn effective_inertia_vertical<T: Real>(leg: &PlanarLegModel<T>, knee_angle: T) -> Result<T> {
    leg.validate()?;
    if !(knee_angle > T::zero() && knee_angle < T::PI()) {
        return Err(Error::Domain(format!("knee angle {knee_angle} outside (0, π)")));
    }
    let s = (knee_angle / T::lit(2.0)).sin();
    let l = leg.link_length;
    Ok(T::lit(0.5) * (leg.base_mass * l * l * s * s + leg.hip_inertia / T::lit(4.0) + leg.knee_inertia))
}

/// Solution branch of the knee angle for the horizontal stance constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    fn sign<T: Real>(self) -> T {
        match self {
            Branch::Plus => T::one(),
            Branch::Minus => -T::one(),
        }
    }
}

/// Constrained configuration for horizontal base motion at base height `√2 l`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizontalStance<T> {
    pub hip_angle: T,
    pub knee_angle: T,
    /// Base position along the ground, m.
    pub x: T,
    /// Base height, m.
    pub z: T,
}

/// Knee angle and base position that keep `z_B = √2 l`.
///
/// Forward kinematics: `z_B = l (cos q_h + cos(q_k - q_h))`,
/// `x_B = l (sin(q_k - q_h) - sin q_h)`.
pub fn horizontal_stance<T: Real>(leg: &PlanarLegModel<T>, hip_angle: T, branch: Branch) -> Result<HorizontalStance<T>> {
    let arg = T::SQRT_2() - hip_angle.cos();
    if !(arg >= -T::one() && arg <= T::one()) {
        return Err(Error::Domain(format!(
            "hip angle {hip_angle} rad is kinematically unreachable at base height √2·l"
        )));
    }
    let rel = branch.sign::<T>() * arg.acos();
    let l = leg.link_length;
    Ok(HorizontalStance {
        hip_angle,
        knee_angle: hip_angle + rel,
        x: l * (rel.sin() - hip_angle.sin()),
        z: l * (hip_angle.cos() + rel.cos()),
    })
}

/// Hip-reduced inertia for horizontal base motion,
/// `½ [m (∂x_B/∂q_h)² + I_h + I_k (∂q_k/∂q_h)²]`, by central differences.
///
/// The ½ shares the base load between the two stance legs, as in the
/// vertical case.
pub fn effective_inertia_horizontal<T: Real>(leg: &PlanarLegModel<T>, hip_angle: T, branch: Branch) -> Result<T> {
    leg.validate()?;
    let h = T::lit(1e-6);
    let a = horizontal_stance(leg, hip_angle - h, branch)?;
    let b = horizontal_stance(leg, hip_angle + h, branch)?;
    let dx = (b.x - a.x) / (T::lit(2.0) * h);
    let dk = (b.knee_angle - a.knee_angle) / (T::lit(2.0) * h);
    Ok(T::lit(0.5) * (leg.base_mass * dx * dx + leg.hip_inertia + leg.knee_inertia * dk * dk))
}

/// `Σ I_c · n_c²` for components turning at `n_c` times the output speed.
pub fn reduced_inertia_sum<T: Real>(components: &[(T, T)]) -> Result<T> {
    let mut total = T::zero();
    for (i, &(inertia, ratio)) in components.iter().enumerate() {
        if !(ratio > T::zero()) {
            return Err(Error::invalid("ratio", format!("component {i} ratio must be > 0")));
        }
        total = total + inertia * ratio * ratio;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn thigh() -> PendulumMeasurement<f64> {
        PendulumMeasurement {
            mass: 3.775,
            com_distance: 0.30,
            eigenfrequency: 0.82,
            gravity: 9.806,
            sigma_r: 0.01,
            sigma_f: 0.03,
        }
    }

    fn anymal_leg() -> PlanarLegModel<f64> {
        PlanarLegModel {
            base_mass: 52.8,
            link_length: 0.3,
            hip_inertia: 0.07,
            knee_inertia: 0.07,
        }
    }

    #[test]
    fn thigh_row() {
        let r = pendulum_inertia(&thigh()).unwrap();
        assert!((r.com - 0.0786).abs() < 5e-4, "{}", r.com);
        assert!((r.sigma_com - 0.0318).abs() < 2e-3, "{}", r.sigma_com);
        let exact = PendulumMeasurement { sigma_r: 0.0, sigma_f: 0.0, ..thigh() };
        assert_eq!(pendulum_inertia(&exact).unwrap().sigma_com, 0.0);
        let zero = PendulumMeasurement { eigenfrequency: 0.0, ..thigh() };
        assert!(matches!(pendulum_inertia(&zero), Err(Error::Domain(_))));
    }

    /// Sample (r, f) from independent Gaussians and compare the spread of I_CoM.
    #[test]
    fn propagation_matches_monte_carlo() {
        let m = thigh();
        let analytic = pendulum_inertia(&m).unwrap().sigma_com;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let nr = Normal::new(m.com_distance, m.sigma_r).unwrap();
        let nf = Normal::new(m.eigenfrequency, m.sigma_f).unwrap();
        let n = 100_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| {
                let r = nr.sample(&mut rng);
                let f = nf.sample(&mut rng);
                let w = std::f64::consts::TAU * f;
                m.mass * r * m.gravity / (w * w) - m.mass * r * r
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let sd = (samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((sd / analytic - 1.0).abs() < 0.1, "mc {sd} vs {analytic}");
    }

    proptest! {
        #[test]
        fn pendulum_round_trip(mass in 0.5f64..10.0, r in 0.05f64..0.6, i_com in 1e-3f64..0.5) {
            let f = pendulum_frequency(mass, r, 9.81, i_com);
            let meas = PendulumMeasurement {
                mass, com_distance: r, eigenfrequency: f, gravity: 9.81, sigma_r: 0.0, sigma_f: 0.0,
            };
            let back = pendulum_inertia(&meas).unwrap().com;
            // I_CoM is a difference of two larger terms; allow for that cancellation
            let scale = (i_com + mass * r * r) / i_com;
            prop_assert!((back / i_com - 1.0).abs() < 1e-13 * scale);
        }

        #[test]
        fn vertical_floor(q in 1e-3f64..3.14) {
            let leg = anymal_leg();
            let floor = 0.5 * (leg.hip_inertia / 4.0 + leg.knee_inertia);
            prop_assert!(effective_inertia_vertical(&leg, q).unwrap() > floor);
        }
    }

    /// Kinetic energy of the constrained mechanism, `½ M q̇_k²`, with
    /// `M = m ż_B'² + I_h q_h'² + I_k` from finite differences of the
    /// kinematics; the reduced inertia per leg is `M / 2`.
    fn vertical_oracle(leg: &PlanarLegModel<f64>, qk: f64) -> f64 {
        let z = |q: f64| 2.0 * leg.link_length * (q / 2.0).cos();
        let qh = |q: f64| q / 2.0;
        let h = 1e-5;
        let dz = (z(qk + h) - z(qk - h)) / (2.0 * h);
        let dh = (qh(qk + h) - qh(qk - h)) / (2.0 * h);
        0.5 * (leg.base_mass * dz * dz + leg.hip_inertia * dh * dh + leg.knee_inertia)
    }

    #[test]
    fn vertical_matches_virtual_work() {
        let leg = anymal_leg();
        for k in 0..=290 {
            let q = 0.1 + 0.01 * k as f64;
            let a = effective_inertia_vertical(&leg, q).unwrap();
            let b = vertical_oracle(&leg, q);
            assert!((a / b - 1.0).abs() < 1e-6, "q={q}: {a} vs {b}");
        }
    }

    #[test]
    fn vertical_examples() {
        let leg = anymal_leg();
        let agile = effective_inertia_vertical(&leg, std::f64::consts::FRAC_PI_2).unwrap();
        assert!((agile - 0.5 * (52.8 * 0.09 * 0.5 + 0.0175 + 0.07)).abs() < 1e-12);
        assert!((agile - 1.23).abs() < 0.01);
        assert!(agile / 0.067 > 10.0);
        let near_zero = effective_inertia_vertical(&leg, 1e-8).unwrap();
        assert!((near_zero - 0.5 * (0.07 / 4.0 + 0.07)).abs() < 1e-12);
        assert!(effective_inertia_vertical(&leg, 0.0).is_err());
        assert!(effective_inertia_vertical(&leg, std::f64::consts::PI).is_err());
    }

    #[test]
    fn horizontal_constraint_residual() {
        let leg = anymal_leg();
        let limit = (std::f64::consts::SQRT_2 - 1.0).acos();
        for branch in [Branch::Plus, Branch::Minus] {
            for k in 0..=200 {
                let q = -limit + 2.0 * limit * k as f64 / 200.0;
                let s = horizontal_stance(&leg, q, branch).unwrap();
                assert!((s.z - std::f64::consts::SQRT_2 * 0.3).abs() < 1e-9);
            }
        }
        assert!(matches!(horizontal_stance(&leg, limit + 1e-3, Branch::Plus), Err(Error::Domain(_))));
        let s = horizontal_stance(&leg, std::f64::consts::FRAC_PI_4, Branch::Plus).unwrap();
        assert!((s.knee_angle - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn horizontal_smoothness() {
        // The curve is steep near the reach limit, so a fixed relative bound only
        // holds on the central band. Across the full interior we check that the
        // increment over a step shrinks in proportion to the step, which rules out jumps.
        let leg = anymal_leg();
        let limit = (std::f64::consts::SQRT_2 - 1.0).acos();
        let inertia = |q: f64| effective_inertia_horizontal(&leg, q, Branch::Plus).unwrap();
        let mut q = -0.8;
        while q < 0.8 {
            let (a, b) = (inertia(q), inertia(q + 1e-3));
            assert!(((b - a) / a).abs() < 0.01, "jump at {q}");
            q += 1e-3;
        }
        let mut q = -limit + 0.02;
        while q < limit - 0.02 - 1e-3 {
            let base = inertia(q);
            let full = (inertia(q + 1e-3) - base).abs();
            let half = (inertia(q + 5e-4) - base).abs();
            // slack covers turning points where the increment is second order
            assert!(half <= 0.6 * full + 1e-4 * base, "non-linear increment at {q}: {half} vs {full}");
            q += 1e-3;
        }
    }

    #[test]
    fn horizontal_stationary_base() {
        // locate roots of ∂x_B/∂q_h by bisection; there the base term drops out
        let leg = anymal_leg();
        let h = 1e-6;
        let deriv = |q: f64| {
            (horizontal_stance(&leg, q + h, Branch::Plus).unwrap().x
                - horizontal_stance(&leg, q - h, Branch::Plus).unwrap().x)
                / (2.0 * h)
        };
        let limit = (std::f64::consts::SQRT_2 - 1.0).acos() - 1e-3;
        let mut roots = Vec::new();
        let n = 400;
        for k in 0..n {
            let a = -limit + 2.0 * limit * k as f64 / n as f64;
            let b = -limit + 2.0 * limit * (k + 1) as f64 / n as f64;
            if deriv(a) * deriv(b) < 0.0 {
                let (mut lo, mut hi) = (a, b);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if deriv(lo) * deriv(mid) <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                roots.push(0.5 * (lo + hi));
            }
        }
        assert!(!roots.is_empty());
        for q in roots {
            let dk = (horizontal_stance(&leg, q + h, Branch::Plus).unwrap().knee_angle
                - horizontal_stance(&leg, q - h, Branch::Plus).unwrap().knee_angle)
                / (2.0 * h);
            let expect = 0.5 * (leg.hip_inertia + leg.knee_inertia * dk * dk);
            let got = effective_inertia_horizontal(&leg, q, Branch::Plus).unwrap();
            assert!((got - expect).abs() < 1e-6 * expect, "{q}: {got} vs {expect}");
        }
    }

    #[test]
    fn reduced_sum_examples() {
        let rotor: f64 = reduced_inertia_sum(&[(1.14e-2, 1.0), (0.511e-2, 1.0), (0.00203e-2, 1.0), (0.00146e-2, 1.0)]).unwrap();
        assert!((rotor - 1.65e-2).abs() < 1e-4);
        assert_eq!(reduced_inertia_sum(&[(0.3, 1.0)]).unwrap(), 0.3);
        let lever = 0.503 * 0.273 * 0.273 + 8.67e-3 + rotor + 1.8e-4;
        assert!((lever - 6.28e-2).abs() < 1e-4);
        assert!(reduced_inertia_sum(&[(0.3, 0.0)]).is_err());
    }
}
