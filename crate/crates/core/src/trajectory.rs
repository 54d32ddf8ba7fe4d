//! Uniformly sampled multi-joint time series and its CSV representation.
//!
//! CSV layout, one row per sample:
//!
//! ```text
//! t,q0..q{n-1},qd0..qd{n-1},target0..target{n-1}[,tau0..tau{n-1}]
//! ```

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Relative tolerance on the spacing of consecutive timestamps.
pub const UNIFORM_STEP_RTOL: f64 = 1e-6;

/// Per-joint targets, positions, velocities and (optionally) torques on a uniform time grid.
///
/// Sample-major storage: `positions[k][j]` is joint `j` at sample `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub time: Vec<T>,
    pub positions: Vec<Vec<T>>,
    pub velocities: Vec<Vec<T>>,
    pub targets: Vec<Vec<T>>,
    pub torques: Option<Vec<Vec<T>>>,
}

impl<T: Real> Trajectory<T> {
    pub fn new(
        time: Vec<T>,
        positions: Vec<Vec<T>>,
        velocities: Vec<Vec<T>>,
        targets: Vec<Vec<T>>,
        torques: Option<Vec<Vec<T>>>,
    ) -> Result<Self> {
        let traj = Self {
            time,
            positions,
            velocities,
            targets,
            torques,
        };
        traj.check_shape()?;
        Ok(traj)
    }

    /// Reference trajectory: positions equal the targets and velocities their time derivative.
    pub fn from_reference(time: Vec<T>, targets: Vec<Vec<T>>, rates: Vec<Vec<T>>) -> Result<Self> {
        let positions = targets.clone();
        Self::new(time, positions, rates, targets, None)
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn n_joints(&self) -> usize {
        self.targets.first().map_or(0, Vec::len)
    }

    pub fn duration(&self) -> T {
        match (self.time.first(), self.time.last()) {
            (Some(&a), Some(&b)) => b - a,
            _ => T::zero(),
        }
    }

    /// Position series of a single joint.
    pub fn joint_positions(&self, j: usize) -> Vec<T> {
        self.positions.iter().map(|row| row[j]).collect()
    }

    pub fn joint_targets(&self, j: usize) -> Vec<T> {
        self.targets.iter().map(|row| row[j]).collect()
    }

    fn check_shape(&self) -> Result<()> {
        let k = self.time.len();
        let n = self.n_joints();
        let tables: [(&str, Option<&Vec<Vec<T>>>); 4] = [
            ("positions", Some(&self.positions)),
            ("velocities", Some(&self.velocities)),
            ("targets", Some(&self.targets)),
            ("torques", self.torques.as_ref()),
        ];
        for (name, table) in tables {
            let Some(table) = table else { continue };
            if table.len() != k {
                return Err(Error::Shape(format!(
                    "{name} has {} samples, time has {k}",
                    table.len()
                )));
            }
            if let Some(row) = table.iter().position(|r| r.len() != n) {
                return Err(Error::Shape(format!(
                    "{name} row {row} has {} joints, expected {n}",
                    table[row].len()
                )));
            }
        }
        Ok(())
    }

    /// Returns the uniform sample step, or an error when timestamps are not
    /// strictly increasing with constant spacing.
    pub fn sample_step(&self) -> Result<T> {
        if self.time.len() < 2 {
            return Err(Error::NonUniformSampling(
                "at least two samples are required".into(),
            ));
        }
        let dt = self.time[1] - self.time[0];
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(Error::NonUniformSampling(format!(
                "first step {dt} is not positive"
            )));
        }
        // allow for timestamp rounding in the scalar type
        let t_max = self.time[0].abs().max(self.time[self.time.len() - 1].abs());
        let tol = dt * T::lit(UNIFORM_STEP_RTOL) + T::lit(4.0) * T::epsilon() * t_max;
        for (k, w) in self.time.windows(2).enumerate() {
            let step = w[1] - w[0];
            if (step - dt).abs() > tol {
                return Err(Error::NonUniformSampling(format!(
                    "step {step} between samples {k} and {} differs from {dt}",
                    k + 1
                )));
            }
        }
        Ok(dt)
    }

    /// Errors on the first NaN or infinity found in the targets.
    pub fn check_finite_targets(&self) -> Result<()> {
        for (k, row) in self.targets.iter().enumerate() {
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("target{j} at sample {k}")));
            }
        }
        Ok(())
    }

    /// Copy with zero-mean Gaussian noise of standard deviation `sigma` added to
    /// every position sample. Draws run sample-major, joint-minor.
    pub fn with_position_noise(&self, sigma: T, seed: u64) -> Result<Self> {
        let normal = Normal::new(0.0, sigma.to_f64_lossy())
            .map_err(|e| Error::invalid("position noise", e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = self.clone();
        for row in &mut out.positions {
            for q in row.iter_mut() {
                *q = *q + T::lit(normal.sample(&mut rng));
            }
        }
        Ok(out)
    }

    /// Cast to another scalar type.
    pub fn cast<U: Real>(&self) -> Trajectory<U> {
        let c = |x: &T| U::lit(x.to_f64_lossy());
        let table = |t: &Vec<Vec<T>>| -> Vec<Vec<U>> {
            t.iter().map(|r| r.iter().map(c).collect()).collect()
        };
        Trajectory {
            time: self.time.iter().map(c).collect(),
            positions: table(&self.positions),
            velocities: table(&self.velocities),
            targets: table(&self.targets),
            torques: self.torques.as_ref().map(table),
        }
    }

    pub fn header(n_joints: usize, with_torques: bool) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        for prefix in ["q", "qd", "target"] {
            h.extend((0..n_joints).map(|j| format!("{prefix}{j}")));
        }
        if with_torques {
            h.extend((0..n_joints).map(|j| format!("tau{j}")));
        }
        h
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let n = self.n_joints();
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(Self::header(n, self.torques.is_some()))?;
        let mut record = Vec::with_capacity(1 + 4 * n);
        for k in 0..self.len() {
            record.clear();
            record.push(self.time[k].to_f64_lossy().to_string());
            for table in [&self.positions, &self.velocities, &self.targets] {
                record.extend(table[k].iter().map(|v| v.to_f64_lossy().to_string()));
            }
            if let Some(tau) = &self.torques {
                record.extend(tau[k].iter().map(|v| v.to_f64_lossy().to_string()));
            }
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header: Vec<String> = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
        let cols = header.len();
        let (n, with_torques) = if cols >= 4 && (cols - 1) % 4 == 0 && header[cols - 1].starts_with("tau") {
            ((cols - 1) / 4, true)
        } else if cols >= 4 && (cols - 1) % 3 == 0 {
            ((cols - 1) / 3, false)
        } else {
            return Err(Error::Config(format!(
                "trajectory header has {cols} columns; expected 1+3n or 1+4n"
            )));
        };
        let expected = Self::header(n, with_torques);
        if header != expected {
            return Err(Error::Config(format!(
                "trajectory header mismatch: expected `{}`, found `{}`",
                expected.join(","),
                header.join(",")
            )));
        }

        let mut time = Vec::new();
        let mut positions = Vec::new();
        let mut velocities = Vec::new();
        let mut targets = Vec::new();
        let mut torques = with_torques.then(Vec::new);
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let vals: Vec<T> = rec
                .iter()
                .enumerate()
                .map(|(c, s)| {
                    s.trim().parse::<f64>().map(T::lit).map_err(|e| {
                        // +2: one-based line numbers and the header line
                        Error::Config(format!("line {}: column `{}`: {e}", row + 2, header[c]))
                    })
                })
                .collect::<Result<_>>()?;
            time.push(vals[0]);
            positions.push(vals[1..1 + n].to_vec());
            velocities.push(vals[1 + n..1 + 2 * n].to_vec());
            targets.push(vals[1 + 2 * n..1 + 3 * n].to_vec());
            if let Some(t) = torques.as_mut() {
                t.push(vals[1 + 3 * n..1 + 4 * n].to_vec());
            }
        }
        Self::new(time, positions, velocities, targets, torques)
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path.as_ref())?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}
