//! Identification input generators: linear chirps and random joint steps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::trajectory::Trajectory;

/// Linear sine sweep applied to every joint.
#[derive(Debug, Clone, PartialEq)]
pub struct ChirpSpec<T> {
    /// Hz
    pub f_start: T,
    /// Hz
    pub f_end: T,
    /// s
    pub duration: T,
    /// Per-joint amplitude, rad.
    pub amplitude: Vec<T>,
    /// Per-joint center, rad.
    pub center: Vec<T>,
    /// Hz
    pub sample_rate: T,
}

impl<T: Real> ChirpSpec<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_start > T::zero() && self.f_start <= self.f_end) {
            return Err(Error::invalid("chirp", "require 0 < f_start <= f_end"));
        }
        if !(self.duration > T::zero()) || !self.duration.is_finite() {
            return Err(Error::invalid("chirp", "duration must be > 0"));
        }
        if !(self.sample_rate >= T::lit(2.0) * self.f_end) {
            return Err(Error::invalid(
                "chirp",
                format!(
                    "sample_rate {} is below the Nyquist rate {} of f_end",
                    self.sample_rate,
                    T::lit(2.0) * self.f_end
                ),
            ));
        }
        if self.amplitude.len() != self.center.len() {
            return Err(Error::Shape(format!(
                "{} amplitudes for {} centers",
                self.amplitude.len(),
                self.center.len()
            )));
        }
        if self.amplitude.iter().any(|a| !(*a >= T::zero())) {
            return Err(Error::invalid("chirp", "amplitudes must be >= 0"));
        }
        Ok(())
    }

    /// Sweep rate `(f_end - f_start) / duration`, Hz/s.
    pub fn sweep_rate(&self) -> T {
        (self.f_end - self.f_start) / self.duration
    }

    /// Phase `2π (f_0 t + k t² / 2)`.
    pub fn phase(&self, t: T) -> T {
        T::TAU() * (self.f_start * t + self.sweep_rate() * t * t / T::lit(2.0))
    }

    /// Instantaneous frequency in Hz.
    pub fn frequency(&self, t: T) -> T {
        self.f_start + self.sweep_rate() * t
    }

    /// Time at which the sweep passes `f` (not clamped to the sweep window).
    pub fn time_at_frequency(&self, f: T) -> T {
        let k = self.sweep_rate();
        if k == T::zero() {
            T::zero()
        } else {
            (f - self.f_start) / k
        }
    }

    /// Number of samples, `duration × sample_rate` rounded.
    pub fn sample_count(&self) -> usize {
        (self.duration * self.sample_rate).round().to_usize().unwrap_or(0)
    }
}

/// Generate a chirp trajectory.
///
/// `phase_offsets` may be empty (all zero) or hold one entry per joint. The
/// returned positions equal the targets and the velocities are their analytic
/// derivative.
pub fn chirp<T: Real>(spec: &ChirpSpec<T>, n_joints: usize, phase_offsets: &[T]) -> Result<Trajectory<T>> {
    spec.validate()?;
    if spec.amplitude.len() != n_joints {
        return Err(Error::Shape(format!(
            "chirp spec has {} joints, requested {n_joints}",
            spec.amplitude.len()
        )));
    }
    if !phase_offsets.is_empty() && phase_offsets.len() != n_joints {
        return Err(Error::Shape(format!(
            "{} phase offsets for {n_joints} joints",
            phase_offsets.len()
        )));
    }
    let offset = |j: usize| phase_offsets.get(j).copied().unwrap_or_else(T::zero);
    let dt = T::one() / spec.sample_rate;
    let count = spec.sample_count();
    let mut time = Vec::with_capacity(count);
    let mut targets = Vec::with_capacity(count);
    let mut rates = Vec::with_capacity(count);
    for k in 0..count {
        let t = T::lit(k as f64) * dt;
        let phi = spec.phase(t);
        let omega = T::TAU() * spec.frequency(t);
        time.push(t);
        targets.push(
            (0..n_joints)
                .map(|j| spec.center[j] + spec.amplitude[j] * (phi + offset(j)).sin())
                .collect(),
        );
        rates.push(
            (0..n_joints)
                .map(|j| spec.amplitude[j] * omega * (phi + offset(j)).cos())
                .collect(),
        );
    }
    Trajectory::from_reference(time, targets, rates)
}

/// Piecewise-constant random targets.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSpec<T> {
    /// Hold time of each step, s.
    pub dwell: T,
    /// Half-width of the uniform draw around `center`, rad.
    pub amplitude_range: T,
    pub center: T,
    pub duration: T,
    pub sample_rate: T,
    pub seed: u64,
}

impl<T: Real> StepSpec<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.dwell > T::zero()) {
            return Err(Error::invalid("steps", "dwell must be > 0"));
        }
        if !(self.duration >= self.dwell) {
            return Err(Error::invalid("steps", "duration must be >= dwell"));
        }
        if !(self.amplitude_range >= T::zero()) {
            return Err(Error::invalid("steps", "amplitude_range must be >= 0"));
        }
        if !(self.sample_rate > T::zero()) {
            return Err(Error::invalid("steps", "sample_rate must be > 0"));
        }
        Ok(())
    }

    /// Number of dwell segments covering the duration.
    pub fn segment_count(&self) -> usize {
        let ratio = (self.duration / self.dwell).to_f64_lossy();
        // tolerate representation error in duration/dwell
        (ratio - 1e-9).ceil().max(1.0) as usize
    }
}

/// Generate a random-step trajectory; identical seeds give identical output.
pub fn random_steps<T: Real>(spec: &StepSpec<T>, n_joints: usize) -> Result<Trajectory<T>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let segments = spec.segment_count();
    let levels: Vec<Vec<T>> = (0..segments)
        .map(|_| {
            (0..n_joints)
                .map(|_| {
                    let u: f64 = rng.random();
                    spec.center + spec.amplitude_range * T::lit(2.0 * u - 1.0)
                })
                .collect()
        })
        .collect();

    let count = (spec.duration * spec.sample_rate).round().to_usize().unwrap_or(0);
    let samples_per_dwell = (spec.dwell * spec.sample_rate).to_f64_lossy();
    let dt = T::one() / spec.sample_rate;
    let mut time = Vec::with_capacity(count);
    let mut targets = Vec::with_capacity(count);
    for k in 0..count {
        let seg = ((k as f64 / samples_per_dwell + 1e-9).floor() as usize).min(segments - 1);
        time.push(T::lit(k as f64) * dt);
        targets.push(levels[seg].clone());
    }
    let rates = vec![vec![T::zero(); n_joints]; count];
    Trajectory::from_reference(time, targets, rates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(f0: f64, f1: f64, duration: f64, rate: f64, n: usize) -> ChirpSpec<f64> {
        ChirpSpec {
            f_start: f0,
            f_end: f1,
            duration,
            amplitude: vec![0.3; n],
            center: (0..n).map(|j| 0.1 * j as f64).collect(),
            sample_rate: rate,
        }
    }

    #[test]
    fn starts_at_center_plus_offset() {
        let s = spec(0.1, 10.0, 20.0, 400.0, 3);
        let tr = chirp(&s, 3, &[]).unwrap();
        assert_eq!(tr.targets[0], s.center);
        let offs = [0.0, 0.5, -1.0];
        let tr = chirp(&s, 3, &offs).unwrap();
        for j in 0..3 {
            assert!((tr.targets[0][j] - (s.center[j] + 0.3 * offs[j].sin())).abs() < 1e-15);
        }
    }

    #[test]
    fn sweep_reaches_end_frequency() {
        let s = spec(0.1, 10.0, 20.0, 400.0, 1);
        assert!((s.frequency(20.0) - 10.0).abs() < 1e-12);
        assert!((s.frequency(0.0) - 0.1).abs() < 1e-15);
        assert_eq!(s.sample_count(), 8000);
    }

    /// Central differences of the phase match 2π f(t) to 0.1 %.
    #[test]
    fn phase_derivative_matches_instantaneous_frequency() {
        let s = spec(0.1, 10.0, 20.0, 400.0, 1);
        let h = 1e-5;
        for k in 0..8000 {
            let t = k as f64 / 400.0;
            let fd = (s.phase(t + h) - s.phase(t - h)) / (2.0 * h) / std::f64::consts::TAU;
            let f = s.frequency(t);
            assert!((fd - f).abs() <= 1e-3 * f, "t={t}: {fd} vs {f}");
        }
    }

    #[test]
    fn below_nyquist_is_rejected() {
        let s = spec(0.1, 10.0, 20.0, 19.0, 1);
        assert!(chirp(&s, 1, &[]).is_err());
        assert!(chirp(&spec(0.1, 10.0, 20.0, 20.0, 1), 1, &[]).is_ok());
        assert!(chirp(&spec(2.0, 1.0, 20.0, 400.0, 1), 1, &[]).is_err());
    }

    /// DFT magnitude stays above -40 dB of its peak on every bin in the band.
    #[test]
    fn spectral_coverage() {
        let s = spec(1.0, 10.0, 20.0, 100.0, 1);
        let tr = chirp(&s, 1, &[]).unwrap();
        let x: Vec<f64> = tr.joint_targets(0).iter().map(|v| v - s.center[0]).collect();
        let n = x.len();
        let df = 100.0 / n as f64;
        let mags: Vec<(f64, f64)> = (1..n / 2)
            .map(|b| {
                let (mut re, mut im) = (0.0, 0.0);
                for (k, v) in x.iter().enumerate() {
                    let a = std::f64::consts::TAU * (b * k) as f64 / n as f64;
                    re += v * a.cos();
                    im -= v * a.sin();
                }
                (b as f64 * df, (re * re + im * im).sqrt())
            })
            .collect();
        let peak = mags.iter().map(|m| m.1).fold(0.0, f64::max);
        for (f, m) in &mags {
            if *f >= 1.0 && *f <= 10.0 {
                assert!(20.0 * (m / peak).log10() > -40.0, "{f} Hz at {m}");
            }
        }
    }

    #[test]
    fn zero_range_steps_are_constant() {
        let spec = StepSpec {
            dwell: 0.5,
            amplitude_range: 0.0,
            center: 0.7,
            duration: 10.0,
            sample_rate: 400.0,
            seed: 3,
        };
        let tr = random_steps(&spec, 4).unwrap();
        assert!(tr.targets.iter().flatten().all(|&v| v == 0.7));
    }

    #[test]
    fn twenty_segments_in_ten_seconds() {
        let spec = StepSpec {
            dwell: 0.5,
            amplitude_range: 0.2,
            center: 0.0,
            duration: 10.0,
            sample_rate: 400.0,
            seed: 11,
        };
        assert_eq!(spec.segment_count(), 20);
        let tr = random_steps(&spec, 1).unwrap();
        assert_eq!(tr.len(), 4000);
        let changes = tr.targets.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(changes, 19);
    }

    #[test]
    fn steps_are_seed_deterministic() {
        let mut spec = StepSpec {
            dwell: 0.5,
            amplitude_range: 0.2,
            center: 0.0,
            duration: 3.0,
            sample_rate: 400.0,
            seed: 42,
        };
        let a = random_steps(&spec, 3).unwrap();
        assert_eq!(a, random_steps(&spec, 3).unwrap());
        spec.seed = 43;
        assert_ne!(a, random_steps(&spec, 3).unwrap());
    }

    proptest! {
        #[test]
        fn chirp_amplitude_bound(
            f0 in 0.05f64..2.0,
            span in 0.0f64..8.0,
            amp in 0.0f64..1.0,
            offset in -3.0f64..3.0,
        ) {
            let s = ChirpSpec {
                f_start: f0,
                f_end: f0 + span,
                duration: 5.0,
                amplitude: vec![amp],
                center: vec![0.25],
                sample_rate: 100.0,
            };
            let tr = chirp(&s, 1, &[offset]).unwrap();
            for row in &tr.targets {
                prop_assert!((row[0] - 0.25).abs() <= amp + 1e-15);
            }
        }

        #[test]
        fn steps_change_only_on_dwell_boundaries(
            seed in 0u64..1000,
            dwell_samples in 1usize..200,
            n_dwell in 1usize..10,
        ) {
            let rate = 400.0;
            let dwell = dwell_samples as f64 / rate;
            let spec = StepSpec {
                dwell,
                amplitude_range: 0.3,
                center: 0.0,
                duration: dwell * n_dwell as f64,
                sample_rate: rate,
                seed,
            };
            let tr = random_steps(&spec, 2).unwrap();
            for k in 1..tr.len() {
                if tr.targets[k] != tr.targets[k - 1] {
                    prop_assert_eq!(k % dwell_samples, 0);
                }
            }
        }
    }
}
