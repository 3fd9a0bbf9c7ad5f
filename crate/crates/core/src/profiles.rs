//! Smooth shape functions used to build initial data.

use core::f64::consts::SQRT_2;

#[allow(unused_imports)] // shadowed by std methods when a dependency links std
use num_traits::Float;

/// A smooth, rapidly decaying scalar profile `g(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    /// `exp(-((x - center) / width)^2)`.
    Gaussian { center: f64, width: f64 },
    /// Gaussian envelope times `cos(wavenumber (x - center))`.
    SinePacket { center: f64, width: f64, wavenumber: f64 },
    /// `exp(1 - 1 / (1 - ((x - center) / radius)^2))` inside the radius, 0 outside.
    Bump { center: f64, radius: f64 },
    /// `sqrt(2) z exp(1/2 - z^2)` with `z = (x - center) / width`: odd, zero mass, peak 1.
    Dipole { center: f64, width: f64 },
}

impl Profile {
    pub fn value(&self, x: f64) -> f64 {
        self.jet(x).0
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.jet(x).1
    }

    /// `(g(x), g'(x))`.
    pub fn jet(&self, x: f64) -> (f64, f64) {
        match *self {
            Profile::Gaussian { center, width } => {
                let z = (x - center) / width;
                let g = (-z * z).exp();
                (g, -2.0 * z / width * g)
            }
            Profile::SinePacket { center, width, wavenumber } => {
                let z = (x - center) / width;
                let env = (-z * z).exp();
                let denv = -2.0 * z / width * env;
                let (sn, cs) = (wavenumber * (x - center)).sin_cos();
                (env * cs, denv * cs - env * wavenumber * sn)
            }
            Profile::Dipole { center, width } => {
                let z = (x - center) / width;
                let e = (0.5 - z * z).exp();
                (SQRT_2 * z * e, SQRT_2 / width * (1.0 - 2.0 * z * z) * e)
            }
            Profile::Bump { center, radius } => {
                let z = (x - center) / radius;
                let q = 1.0 - z * z;
                if q <= 0.0 {
                    return (0.0, 0.0);
                }
                let g = (1.0 - 1.0 / q).exp();
                // d/dx (1 - 1/q) = -2 z / (radius q^2)
                (g, -2.0 * z / (radius * q * q) * g)
            }
        }
    }

    /// Interval outside of which `|g| <= 1e-16`.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Profile::Gaussian { center, width } | Profile::SinePacket { center, width, .. } => {
                let r = 6.1 * width;
                (center - r, center + r)
            }
            Profile::Dipole { center, width } => {
                let r = 6.4 * width;
                (center - r, center + r)
            }
            Profile::Bump { center, radius } => (center - radius, center + radius),
        }
    }

    pub fn center(&self) -> f64 {
        match *self {
            Profile::Gaussian { center, .. }
            | Profile::SinePacket { center, .. }
            | Profile::Bump { center, .. }
            | Profile::Dipole { center, .. } => center,
        }
    }
}

/// A profile times an amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shape {
    pub profile: Profile,
    pub amplitude: f64,
}

impl Shape {
    pub fn new(profile: Profile, amplitude: f64) -> Self {
        Self { profile, amplitude }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.amplitude * self.profile.value(x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.amplitude * self.profile.derivative(x)
    }

    pub fn support(&self) -> (f64, f64) {
        self.profile.support()
    }

    /// `int_{-inf}^{x} g` at each of the ascending points `xs`, by Simpson's
    /// rule on every gap.
    pub fn antiderivative(&self, xs: &[f64]) -> alloc::vec::Vec<f64> {
        let (a, _) = self.support();
        let mut out = alloc::vec::Vec::with_capacity(xs.len());
        let mut acc = 0.0;
        let mut from = a;
        for &x in xs {
            if x > from {
                acc += crate::coefficients::simpson(|y| self.value(y), from, x, 8);
                from = x;
            }
            out.push(acc);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_match_finite_differences() {
        let profiles = [
            Profile::Gaussian { center: 0.3, width: 1.2 },
            Profile::SinePacket { center: -1.0, width: 2.0, wavenumber: 3.0 },
            Profile::Bump { center: 0.5, radius: 2.0 },
            Profile::Dipole { center: 0.2, width: 0.7 },
        ];
        let h = 1e-6;
        for p in profiles {
            for i in 0..40 {
                let x = -3.0 + 0.15 * i as f64;
                let fd = (p.value(x + h) - p.value(x - h)) / (2.0 * h);
                assert!((fd - p.derivative(x)).abs() < 1e-7, "{p:?} at {x}");
            }
        }
    }

    #[test]
    fn support_bounds_are_respected() {
        let g = Profile::Gaussian { center: 1.0, width: 0.5 };
        let (a, b) = g.support();
        assert!(g.value(a).abs() <= 1e-16 && g.value(b).abs() <= 1e-16);
        let bump = Profile::Bump { center: 0.0, radius: 1.0 };
        assert_eq!(bump.value(1.0), 0.0);
        assert_eq!(bump.value(0.0), 1.0);
        let d = Profile::Dipole { center: 0.0, width: 1.0 };
        let (a, b) = d.support();
        assert!(d.value(a).abs() <= 1e-16 && d.value(b).abs() <= 1e-16);
        assert!((d.value(core::f64::consts::FRAC_1_SQRT_2) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dipole_antiderivative_returns_to_zero() {
        let s = Shape::new(Profile::Dipole { center: 1.0, width: 0.8 }, 0.4);
        let xs: alloc::vec::Vec<f64> = (0..=200).map(|i| -5.0 + 0.06 * i as f64).collect();
        let r = s.antiderivative(&xs);
        assert!(r[200].abs() < 1e-14);
        // Closed form: -0.4 sqrt(2) (w/2) exp(1/2 - z^2).
        for (x, v) in xs.iter().zip(&r) {
            let z = (x - 1.0) / 0.8;
            let exact = -0.4 * core::f64::consts::SQRT_2 * 0.4 * (0.5 - z * z).exp();
            assert!((v - exact).abs() < 1e-9, "{x}");
        }
    }
}
