//! Frequency responses and inertia estimates.

mod inertia;

pub use inertia::{
    effective_inertia_horizontal, effective_inertia_vertical, horizontal_stance, pendulum_frequency,
    pendulum_inertia, reduced_inertia_sum, Branch, HorizontalStance, PendulumInertia, PendulumMeasurement,
    PlanarLegModel,
};

use num_complex::Complex;

use crate::dynamics::{DriveGains, JointParams, MotorParams};
use crate::error::{Error, Result};
use crate::excitation::ChirpSpec;
use crate::scalar::Real;
use crate::trajectory::Trajectory;

/// Sampled Bode data.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResponse<T> {
    /// Hz
    pub frequencies: Vec<T>,
    /// dB
    pub magnitude: Vec<T>,
    /// Degrees, unwrapped along increasing frequency.
    pub phase: Vec<T>,
}

impl<T: Real> FrequencyResponse<T> {
    /// Build from complex gains, unwrapping the phase.
    pub fn from_complex(frequencies: Vec<T>, gains: &[Complex<T>]) -> Result<Self> {
        if frequencies.len() != gains.len() {
            return Err(Error::Shape(format!(
                "{} frequencies for {} gains",
                frequencies.len(),
                gains.len()
            )));
        }
        let magnitude = gains.iter().map(|g| to_db(g.norm())).collect();
        let wrapped: Vec<T> = gains.iter().map(|g| g.arg().to_degrees()).collect();
        let out = Self {
            frequencies,
            magnitude,
            phase: unwrap_degrees(&wrapped),
        };
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.frequencies.len();
        if self.magnitude.len() != n || self.phase.len() != n {
            return Err(Error::Shape("frequency response columns differ in length".into()));
        }
        if self.frequencies.iter().any(|f| !(*f > T::zero())) {
            return Err(Error::invalid("frequencies", "must be positive"));
        }
        if self.frequencies.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("frequencies", "must be strictly increasing"));
        }
        Ok(())
    }
}

pub fn to_db<T: Real>(magnitude: T) -> T {
    T::lit(20.0) * magnitude.log10()
}

/// Remove 360° jumps between consecutive samples.
pub fn unwrap_degrees<T: Real>(phase: &[T]) -> Vec<T> {
    let full = T::lit(360.0);
    let half = T::lit(180.0);
    let mut out = Vec::with_capacity(phase.len());
    let mut offset = T::zero();
    for (i, &p) in phase.iter().enumerate() {
        if i > 0 {
            let prev = phase[i - 1];
            let jump = p - prev;
            if jump > half {
                offset = offset - full * ((jump + half) / full).floor();
            } else if jump < -half {
                offset = offset + full * ((-jump + half) / full).floor();
            }
        }
        out.push(p + offset);
    }
    out
}

/// `n` log-spaced frequencies from `f_lo` to `f_hi` inclusive.
pub fn log_grid<T: Real>(f_lo: T, f_hi: T, n: usize) -> Result<Vec<T>> {
    if !(f_lo > T::zero() && f_hi > f_lo) || n < 2 {
        return Err(Error::invalid("grid", "require 0 < f_lo < f_hi and at least 2 points"));
    }
    let (a, b) = (f_lo.ln(), f_hi.ln());
    let mut g: Vec<T> = (0..n)
        .map(|i| (a + (b - a) * T::lit(i as f64) / T::lit((n - 1) as f64)).exp())
        .collect();
    g[0] = f_lo;
    g[n - 1] = f_hi;
    Ok(g)
}

/// Closed-loop position response `e^{-sT} P / (I s² + (d + D) s + P)` at `s = i 2π f`.
pub fn h_q_response<T: Real>(params: &JointParams<T>, gains: &DriveGains<T>, delay: T, freq: T) -> Complex<T> {
    let w = T::TAU() * freq;
    let s = Complex::new(T::zero(), w);
    let den = s * s * params.armature_inertia + s * (params.viscous_damping + gains.d_gain) + gains.p_gain;
    Complex::new(gains.p_gain, T::zero()) / den * Complex::from_polar(T::one(), -w * delay)
}

pub fn h_q_bode<T: Real>(
    params: &JointParams<T>,
    gains: &DriveGains<T>,
    delay: T,
    freqs: &[T],
) -> Result<FrequencyResponse<T>> {
    let g: Vec<Complex<T>> = freqs.iter().map(|f| h_q_response(params, gains, delay, *f)).collect();
    FrequencyResponse::from_complex(freqs.to_vec(), &g)
}

/// Characteristic frequencies of `I s² + (d + D) s + P`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondOrderModes<T> {
    /// Undamped natural frequency, Hz.
    pub natural: T,
    pub damping_ratio: T,
    /// Damped natural frequency, Hz; zero when overdamped.
    pub damped: T,
    /// Frequency of the magnitude peak, Hz; `None` when `ζ ≥ 1/√2`.
    pub peak: Option<T>,
}

pub fn closed_loop_modes<T: Real>(params: &JointParams<T>, gains: &DriveGains<T>) -> SecondOrderModes<T> {
    let i = params.armature_inertia;
    let c = params.viscous_damping + gains.d_gain;
    let p = gains.p_gain;
    let wn = (p / i).sqrt();
    let zeta = c / (T::lit(2.0) * (p * i).sqrt());
    let one = T::one();
    let damped = if zeta < one { wn * (one - zeta * zeta).sqrt() } else { T::zero() };
    let peak_sq = one - T::lit(2.0) * zeta * zeta;
    SecondOrderModes {
        natural: wn / T::TAU(),
        damping_ratio: zeta,
        damped: damped / T::TAU(),
        peak: (peak_sq > T::zero()).then(|| wn * peak_sq.sqrt() / T::TAU()),
    }
}

/// Relative half-width of the frequency band used per grid point.
pub const FRF_BAND: f64 = 0.1;

/// Gain and phase from input target to output position of one joint.
///
/// For every grid frequency both signals are fitted by least squares to
/// `a sin φ(t) + b cos φ(t) + c` over the samples where the chirp's
/// instantaneous frequency lies within ±10 % of the grid point. The chirp is
/// assumed to start at the first sample.
pub fn empirical_frf<T: Real>(
    input: &Trajectory<T>,
    output: &Trajectory<T>,
    joint: usize,
    spec: &ChirpSpec<T>,
    freq_grid: &[T],
) -> Result<FrequencyResponse<T>> {
    spec.validate()?;
    if input.len() != output.len() {
        return Err(Error::Shape(format!("{} input samples, {} output samples", input.len(), output.len())));
    }
    if joint >= input.n_joints() || joint >= output.n_joints() {
        return Err(Error::Shape(format!("joint {joint} out of range")));
    }
    input.sample_step()?;
    let t0 = input.time[0];
    let t_end = input.time[input.len() - 1];
    let band = T::lit(FRF_BAND);
    let mut gains = Vec::with_capacity(freq_grid.len());
    for &f in freq_grid {
        if !(f >= spec.f_start && f <= spec.f_end) {
            return Err(Error::Domain(format!(
                "grid frequency {f} Hz outside the chirp band [{}, {}] Hz",
                spec.f_start, spec.f_end
            )));
        }
        let lo = t0 + spec.time_at_frequency(f * (T::one() - band)).max(T::zero());
        let hi = (t0 + spec.time_at_frequency(f * (T::one() + band))).min(t_end);
        if !(hi - lo >= T::one() / f) {
            return Err(Error::Domain(format!(
                "window at {f} Hz spans {} s, shorter than one cycle",
                hi - lo
            )));
        }
        let idx: Vec<usize> = (0..input.len()).filter(|&k| input.time[k] >= lo && input.time[k] <= hi).collect();
        let phases: Vec<T> = idx.iter().map(|&k| spec.phase(input.time[k] - t0)).collect();
        let u: Vec<T> = idx.iter().map(|&k| input.targets[k][joint]).collect();
        let y: Vec<T> = idx.iter().map(|&k| output.positions[k][joint]).collect();
        let cu = sine_phasor(&phases, &u)?;
        let cy = sine_phasor(&phases, &y)?;
        if cu.norm() == T::zero() {
            return Err(Error::Domain(format!("input has no content at {f} Hz")));
        }
        gains.push(cy / cu);
    }
    FrequencyResponse::from_complex(freq_grid.to_vec(), &gains)
}

/// Least-squares phasor of `x ≈ a sin φ + b cos φ + c`, returned as `b - i a`
/// so that `x ≈ Re(phasor · e^{iφ}) + c`.
fn sine_phasor<T: Real>(phase: &[T], x: &[T]) -> Result<Complex<T>> {
    let mut ata = [[T::zero(); 3]; 3];
    let mut atb = [T::zero(); 3];
    for (p, v) in phase.iter().zip(x) {
        let row = [p.sin(), p.cos(), T::one()];
        for r in 0..3 {
            for c in 0..3 {
                ata[r][c] = ata[r][c] + row[r] * row[c];
            }
            atb[r] = atb[r] + row[r] * *v;
        }
    }
    let sol = solve3(ata, atb).ok_or_else(|| Error::Domain("singular sine-fit normal equations".into()))?;
    Ok(Complex::new(sol[1], -sol[0]))
}

fn solve3<T: Real>(mut a: [[T; 3]; 3], mut b: [T; 3]) -> Option<[T; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[piv][col] == T::zero() {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..3 {
            let f = a[r][col] / a[col][col];
            for c in col..3 {
                a[r][c] = a[r][c] - f * a[col][c];
            }
            b[r] = b[r] - f * b[col];
        }
    }
    let mut x = [T::zero(); 3];
    for r in (0..3).rev() {
        let mut s = b[r];
        for c in r + 1..3 {
            s = s - a[r][c] * x[c];
        }
        x[r] = s / a[r][r];
    }
    Some(x)
}

/// Current-per-voltage response `1 / (L s + R)` of the q axis, A/V.
pub fn pmsm_inner_loop<T: Real>(resistance: T, inductance: T, freq: T) -> Complex<T> {
    let s = Complex::new(T::zero(), T::TAU() * freq);
    Complex::new(T::one(), T::zero()) / (s * inductance + resistance)
}

/// [`pmsm_inner_loop`] normalized to unit DC gain.
pub fn pmsm_tracking_response<T: Real>(resistance: T, inductance: T, freq: T) -> Complex<T> {
    pmsm_inner_loop(resistance, inductance, freq) * resistance
}

/// `R / (2π L)`, Hz.
pub fn pmsm_bandwidth<T: Real>(resistance: T, inductance: T) -> Result<T> {
    if !(resistance > T::zero() && inductance > T::zero()) {
        return Err(Error::invalid("pmsm", "resistance and inductance must be > 0"));
    }
    Ok(resistance / (T::TAU() * inductance))
}

/// `U - R i_q - k_ω ω_e`, V. Negative when the current cannot be raised.
pub fn voltage_headroom<T: Real>(current: T, motor_speed_elec: T, motor: &MotorParams<T>) -> T {
    motor.bus_voltage - motor.coil_resistance * current - motor.back_emf() * motor_speed_elec
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::build_envelope;
    use crate::excitation::chirp;
    use proptest::prelude::*;

    fn lever() -> (JointParams<f64>, DriveGains<f64>) {
        (JointParams::new(6.28e-2, 0.0, 0.0, 0.0), DriveGains::new(60.0, 2.0))
    }

    #[test]
    fn unit_dc_gain() {
        let (p, g) = lever();
        let h = h_q_response(&p, &g, 0.01, 1e-6);
        assert!((h.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn lever_case_values() {
        let (p, g) = lever();
        // hand evaluation of |P / (P - I w² + i D w)| at 10 Hz
        let w = std::f64::consts::TAU * 10.0;
        let re = 60.0 - 6.28e-2 * w * w;
        let im = 2.0 * w;
        let expect = 20.0 * (60.0 / (re * re + im * im).sqrt()).log10();
        let got = to_db(h_q_response(&p, &g, 0.0, 10.0).norm());
        assert!((got - expect).abs() < 1e-12);
        let m = closed_loop_modes(&p, &g);
        assert!((m.natural - (60.0f64 / 6.28e-2).sqrt() / std::f64::consts::TAU).abs() < 1e-12);
    }

    /// The magnitude peak sits at the closed-form frequency: a golden-section
    /// search on |H| agrees to 1e-9 relative.
    #[test]
    fn peak_matches_closed_form() {
        let p = JointParams::new(0.05, 0.1, 0.0, 0.0);
        let g = DriveGains::new(80.0, 0.3);
        let m = closed_loop_modes(&p, &g);
        let peak = m.peak.unwrap();
        let mag = |f: f64| h_q_response(&p, &g, 0.0, f).norm();
        let (mut a, mut b) = (0.5 * peak, 1.5 * peak);
        let r = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = b - r * (b - a);
            let d = a + r * (b - a);
            if mag(c) > mag(d) {
                b = d;
            } else {
                a = c;
            }
        }
        assert!(((a + b) / 2.0 / peak - 1.0).abs() < 1e-9);
        // damped frequency is the imaginary part of the pole over 2π
        let c: f64 = 0.4;
        let disc = (4.0 * 0.05 * 80.0 - c * c).sqrt() / (2.0 * 0.05);
        assert!((m.damped - disc / std::f64::consts::TAU).abs() < 1e-9 * m.damped);
    }

    #[test]
    fn unwrap_removes_jumps() {
        let w = unwrap_degrees(&[170.0, -175.0, -10.0, 160.0, -170.0, 10.0]);
        assert_eq!(w, vec![170.0, 185.0, 350.0, 520.0, 550.0, 730.0]);
    }

    #[test]
    fn pmsm_examples() {
        let f = pmsm_bandwidth(1.04f64, 5.34e-4).unwrap();
        assert!((f - 310.0).abs() < 1.0);
        assert!((pmsm_bandwidth(1.04, 2.0 * 5.34e-4).unwrap() - f / 2.0).abs() < 1e-9);
        let l = 0.3;
        assert!((pmsm_bandwidth(std::f64::consts::TAU * l, l).unwrap() - 1.0).abs() < 1e-15);
        assert!((pmsm_inner_loop(1.04f64, 5.34e-4, 0.0).re - 1.0 / 1.04).abs() < 1e-15);
        let h = pmsm_tracking_response(1.04f64, 5.34e-4, f);
        assert!((to_db(h.norm()) + 3.0103).abs() < 1e-3);
        assert!((h.arg().to_degrees() + 45.0).abs() < 1e-9);
        assert!(pmsm_bandwidth(0.0, 1.0).is_err());
    }

    #[test]
    fn headroom_examples() {
        let m = MotorParams {
            gear_ratio: 5.6,
            motor_constant: 0.59,
            coil_resistance: 1.04,
            phase_inductance: None,
            back_emf_constant: None,
            max_motor_torque: 25.0,
            max_motor_speed: 300.0,
            bus_voltage: 48.0,
            regen_coefficient: 0.3,
        };
        assert_eq!(voltage_headroom(0.0, 0.0, &m), 48.0);
        // along the back-EMF boundary of the envelope the headroom vanishes
        let env = build_envelope(&m).unwrap();
        for k in 1..10 {
            let speed = env.zero_torque_speed * k as f64 / 10.0 / m.gear_ratio;
            let speed_motor = speed * m.gear_ratio;
            let current = (m.bus_voltage - m.back_emf() * speed_motor) / m.coil_resistance;
            assert!(voltage_headroom(current, speed_motor, &m).abs() < 1e-12);
        }
        let a = voltage_headroom(1.0, 2.0, &m);
        let b = voltage_headroom(2.0, 2.0, &m);
        let c = voltage_headroom(3.0, 2.0, &m);
        assert!(((a - b) - (b - c)).abs() < 1e-12 && a > b);
    }

    fn sweep(f0: f64, f1: f64, duration: f64) -> (ChirpSpec<f64>, Trajectory<f64>) {
        let spec = ChirpSpec {
            f_start: f0,
            f_end: f1,
            duration,
            amplitude: vec![0.2],
            center: vec![0.1],
            sample_rate: 200.0,
        };
        let tr = chirp(&spec, 1, &[0.3]).unwrap();
        (spec, tr)
    }

    #[test]
    fn identity_frf() {
        let (spec, tr) = sweep(0.5, 8.0, 120.0);
        let grid = log_grid(0.6, 7.0, 12).unwrap();
        let r = empirical_frf(&tr, &tr, 0, &spec, &grid).unwrap();
        for (m, p) in r.magnitude.iter().zip(&r.phase) {
            assert!(m.abs() < 1e-9 && p.abs() < 1e-7, "{m} {p}");
        }
        assert_eq!(r.frequencies[0], 0.6);
    }

    #[test]
    fn pure_delay_frf() {
        let (spec, tr) = sweep(0.5, 8.0, 200.0);
        let delay = 0.02;
        let shift = (delay * 200.0) as usize;
        let mut out = tr.clone();
        for k in 0..tr.len() {
            out.positions[k][0] = if k >= shift { tr.targets[k - shift][0] } else { tr.targets[0][0] };
        }
        let grid = log_grid(0.6, 7.0, 12).unwrap();
        let r = empirical_frf(&tr, &out, 0, &spec, &grid).unwrap();
        for ((f, m), p) in r.frequencies.iter().zip(&r.magnitude).zip(&r.phase) {
            assert!(m.abs() < 0.05, "{f}: {m} dB");
            assert!((p + 360.0 * f * delay).abs() < 2.0, "{f}: {p}");
        }
    }

    #[test]
    fn frf_domain_errors() {
        let (spec, tr) = sweep(0.5, 8.0, 20.0);
        assert!(matches!(empirical_frf(&tr, &tr, 0, &spec, &[0.4]), Err(Error::Domain(_))));
        // 20 s over 7.5 Hz gives a 0.53 s window at 0.5 Hz, shorter than its 2 s period
        assert!(matches!(empirical_frf(&tr, &tr, 0, &spec, &[0.5]), Err(Error::Domain(_))));
        assert!(empirical_frf(&tr, &tr, 1, &spec, &[5.0]).is_err());
    }

    proptest! {
        #[test]
        fn delay_changes_phase_only(
            inertia in 1e-3f64..1.0,
            damping in 0.0f64..5.0,
            p_gain in 1.0f64..200.0,
            d_gain in 0.0f64..10.0,
            delay in 0.0f64..0.05,
            f in 0.01f64..50.0,
        ) {
            let p = JointParams::new(inertia, damping, 0.0, 0.0);
            let g = DriveGains::new(p_gain, d_gain);
            let a = h_q_response(&p, &g, 0.0, f);
            let b = h_q_response(&p, &g, delay, f);
            prop_assert!((a.norm() - b.norm()).abs() <= 1e-12 * a.norm());
            prop_assert!((h_q_response(&p, &g, delay, 1e-9).norm() - 1.0).abs() < 1e-6);
        }
    }
}
