//! Turning `initial_data` components into sampled scalar fields.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twonvw_core::field::derivative;
use twonvw_core::hs2::{parabola_slopes, MonotoneCubic};
use twonvw_core::profiles::{Profile, Shape};
use twonvw_core::Grid1D;

use crate::config::{ConfigError, ShapeSpec};

/// A scalar component ready for sampling.
#[derive(Debug, Clone)]
pub enum Source {
    /// Sum of analytic shapes (one for the named families, several for `random`).
    Analytic(Vec<Shape>),
    Table { x: Vec<f64>, interp: MonotoneCubic, amplitude: f64 },
}

// FNV-1a, so that each component draws its own stream from the run seed.
fn name_hash(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

impl Source {
    /// `field` names the component in error messages; table paths are relative to `base_dir`.
    pub fn build(spec: &ShapeSpec, name: &str, field: &str, seed: u64, base_dir: &Path) -> Result<Self, ConfigError> {
        let one = |profile, amplitude| Ok(Source::Analytic(vec![Shape::new(profile, amplitude)]));
        match *spec {
            ShapeSpec::Gaussian { amplitude, center, width } => one(Profile::Gaussian { center, width }, amplitude),
            ShapeSpec::SinePacket { amplitude, center, width, wavenumber } => {
                one(Profile::SinePacket { center, width, wavenumber }, amplitude)
            }
            ShapeSpec::Bump { amplitude, center, radius } => one(Profile::Bump { center, radius }, amplitude),
            ShapeSpec::Dipole { amplitude, center, width } => one(Profile::Dipole { center, width }, amplitude),
            ShapeSpec::Random { amplitude, center, spread, width, modes } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ name_hash(name));
                let shapes = (0..modes)
                    .map(|_| {
                        let c = center + spread * rng.gen_range(-1.0..=1.0);
                        let w = width * rng.gen_range(0.75..=1.25);
                        let a = amplitude * rng.gen_range(-1.0..=1.0) / modes as f64;
                        Shape::new(Profile::Gaussian { center: c, width: w }, a)
                    })
                    .collect();
                Ok(Source::Analytic(shapes))
            }
            ShapeSpec::File { ref path, amplitude } => {
                let full = base_dir.join(path);
                let (x, y) = read_table(&full).map_err(|m| ConfigError::invalid(format!("{field}.path"), m))?;
                let slopes = parabola_slopes(&x, &y);
                let interp = MonotoneCubic::new(&x, &y, &slopes)
                    .map_err(|e| ConfigError::invalid(format!("{field}.path"), e.to_string()))?;
                Ok(Source::Table { x, interp, amplitude })
            }
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            Source::Analytic(shapes) => shapes.iter().map(|s| s.value(x)).sum(),
            Source::Table { x: xs, interp, amplitude } => {
                if x < xs[0] || x > xs[xs.len() - 1] {
                    0.0
                } else {
                    amplitude * interp.eval(x).unwrap_or(0.0)
                }
            }
        }
    }

    pub fn values(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.value(x)).collect()
    }

    /// Derivative at the grid nodes: exact for analytic shapes, fourth-order
    /// differences of the samples for tables.
    pub fn derivatives(&self, grid: &Grid1D) -> Vec<f64> {
        let xs = grid.nodes();
        match self {
            Source::Analytic(shapes) => xs.iter().map(|&x| shapes.iter().map(|s| s.derivative(x)).sum()).collect(),
            Source::Table { .. } => derivative(grid, &self.values(&xs)),
        }
    }

    /// Running integral from the left end of the support at the ascending nodes.
    /// Tables use the trapezoid rule on the nodes.
    pub fn antiderivative(&self, grid: &Grid1D) -> Vec<f64> {
        let xs = grid.nodes();
        match self {
            Source::Analytic(shapes) => {
                let mut acc = vec![0.0; xs.len()];
                for s in shapes {
                    for (a, v) in acc.iter_mut().zip(s.antiderivative(&xs)) {
                        *a += v;
                    }
                }
                acc
            }
            Source::Table { .. } => {
                let v = self.values(&xs);
                let h = grid.dx();
                let mut acc = vec![0.0; xs.len()];
                for i in 1..xs.len() {
                    acc[i] = acc[i - 1] + 0.5 * h * (v[i - 1] + v[i]);
                }
                acc
            }
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match self {
            Source::Analytic(shapes) => shapes
                .iter()
                .map(|s| s.support())
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (c, d)| (a.min(c), b.max(d))),
            Source::Table { x, .. } => (x[0], x[x.len() - 1]),
        }
    }

    /// The single analytic shape, if this component is one.
    pub fn as_shape(&self) -> Option<Shape> {
        match self {
            Source::Analytic(shapes) if shapes.len() == 1 => Some(shapes[0]),
            _ => None,
        }
    }
}

/// Reads a two-column `x, value` CSV, skipping a header row if present.
fn read_table(path: &Path) -> Result<(Vec<f64>, Vec<f64>), String> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| format!("{}: {e}", path.display()))?;
        if record.len() != 2 {
            return Err(format!("{}: row {} has {} columns, expected 2", path.display(), i + 1, record.len()));
        }
        match (record[0].parse::<f64>(), record[1].parse::<f64>()) {
            (Ok(x), Ok(y)) => {
                xs.push(x);
                ys.push(y);
            }
            _ if i == 0 => continue,
            _ => return Err(format!("{}: row {} is not numeric", path.display(), i + 1)),
        }
    }
    if xs.len() < 3 {
        return Err(format!("{}: need at least 3 rows, found {}", path.display(), xs.len()));
    }
    if xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(format!("{}: x must be strictly increasing", path.display()));
    }
    Ok((xs, ys))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn build(spec: ShapeSpec, seed: u64) -> Source {
        Source::build(&spec, "u", "initial_data.components.u", seed, Path::new(".")).unwrap()
    }

    #[test]
    fn random_is_seeded_and_bounded() {
        let spec = ShapeSpec::Random { amplitude: 0.4, center: 0.0, spread: 2.0, width: 1.0, modes: 6 };
        let xs: Vec<f64> = (0..200).map(|i| -6.0 + 0.06 * i as f64).collect();
        let a = build(spec.clone(), 7).values(&xs);
        assert_eq!(a, build(spec.clone(), 7).values(&xs));
        assert_ne!(a, build(spec, 8).values(&xs));
        assert!(a.iter().all(|v| v.abs() <= 0.4));
    }

    #[test]
    fn table_round_trips_a_parabola_and_vanishes_outside() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "x,value").unwrap();
        for i in 0..=40 {
            let x = -1.0 + 0.05 * i as f64;
            writeln!(f, "{x},{}", 1.0 - x * x).unwrap();
        }
        drop(f);
        let spec = ShapeSpec::File { path: "t.csv".into(), amplitude: 2.0 };
        let s = Source::build(&spec, "u", "u", 0, dir.path()).unwrap();
        assert!((s.value(0.33) - 2.0 * (1.0 - 0.33 * 0.33)).abs() < 1e-3);
        assert_eq!(s.value(1.5), 0.0);
        assert_eq!(s.support(), (-1.0, 1.0));
    }

    #[test]
    fn missing_table_names_the_path_field() {
        let spec = ShapeSpec::File { path: "nope.csv".into(), amplitude: 1.0 };
        let err = Source::build(&spec, "u", "initial_data.components.u", 0, Path::new("/nonexistent")).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { ref field, .. } if field == "initial_data.components.u.path"));
    }

    #[test]
    fn antiderivative_of_a_gaussian() {
        let g = Grid1D::new(-8.0, 8.0, 321).unwrap();
        let s = build(ShapeSpec::Gaussian { amplitude: 1.0, center: 0.0, width: 1.0 }, 0);
        let a = s.antiderivative(&g);
        assert!((a[320] - std::f64::consts::PI.sqrt()).abs() < 1e-10);
    }
}
