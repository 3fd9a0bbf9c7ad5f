//! Uniform grids, sampled fields, interpolation, quadrature and the state norms.

use alloc::format;
use alloc::vec::Vec;
use core::ops::{Add, Mul, Sub};

use num_complex::Complex64;
#[allow(unused_imports)] // Float is shadowed by std methods when a dependency links std
use num_traits::{Float, Zero};

use crate::coefficients::Potential;
use crate::error::{config_err, domain_err, CoreError};
use crate::BOUNDARY_TOL;

/// Values that can be sampled on a grid: real or complex.
pub trait Sample: Copy + Zero + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn modulus(self) -> f64;
}

impl Sample for f64 {
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl Sample for Complex64 {
    fn modulus(self) -> f64 {
        self.norm()
    }
}

/// A uniform grid on `[x_min, x_max]` with `n` nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n: usize,
    dx: f64,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self, CoreError> {
        if n < 16 {
            return Err(config_err(format!("grid.n = {n} must be at least 16")));
        }
        if !(x_min.is_finite() && x_max.is_finite() && x_max > x_min) {
            return Err(config_err(format!("grid bounds [{x_min}, {x_max}] must be finite with x_min < x_max")));
        }
        Ok(Self { x_min, x_max, n, dx: (x_max - x_min) / (n - 1) as f64 })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.x_max
        } else {
            self.x_min + i as f64 * self.dx
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    fn slack(&self) -> f64 {
        1e-12 * self.dx
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min - self.slack() && x <= self.x_max + self.slack()
    }

    /// Cell index `i` in `0..n-1` and local coordinate `t` in `[0, 1]` of `x`.
    pub fn locate(&self, x: f64) -> Result<(usize, f64), CoreError> {
        if !self.contains(x) {
            return Err(domain_err(format!("x = {x} outside [{}, {}]", self.x_min, self.x_max)));
        }
        let pos = ((x - self.x_min) / self.dx).clamp(0.0, (self.n - 1) as f64);
        let i = (pos.floor() as usize).min(self.n - 2);
        Ok((i, (pos - i as f64).clamp(0.0, 1.0)))
    }

    /// Index of the node within `1e-12 dx` of `x`, if any.
    pub fn node_at(&self, x: f64) -> Option<usize> {
        let pos = (x - self.x_min) / self.dx;
        let k = pos.round();
        if k >= 0.0 && (k as usize) < self.n && (pos - k).abs() <= 1e-12 {
            Some(k as usize)
        } else {
            None
        }
    }
}

/// Four-point Lagrange weights for one query point, reusable across fields on the same grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    pub base: usize,
    pub weights: [f64; 4],
}

impl Stencil {
    pub fn new(grid: &Grid1D, x: f64) -> Result<Self, CoreError> {
        if let Some(k) = grid.node_at(x) {
            let base = k.saturating_sub(1).min(grid.n - 4);
            let mut weights = [0.0; 4];
            weights[k - base] = 1.0;
            return Ok(Self { base, weights });
        }
        let (i, _) = grid.locate(x)?;
        let base = i.saturating_sub(1).min(grid.n - 4);
        let t = (x - grid.x(base)) / grid.dx;
        // Nodes at local coordinates 0, 1, 2, 3.
        let (a, b, c, d) = (t, t - 1.0, t - 2.0, t - 3.0);
        let weights = [-b * c * d / 6.0, a * c * d / 2.0, -a * b * d / 2.0, a * b * c / 6.0];
        Ok(Self { base, weights })
    }

    pub fn apply<T: Sample>(&self, samples: &[T]) -> T {
        let s = &samples[self.base..self.base + 4];
        s[0] * self.weights[0] + s[1] * self.weights[1] + s[2] * self.weights[2] + s[3] * self.weights[3]
    }
}

/// Cubic interpolation of `samples` at `x`; exact at nodes and for cubic polynomials.
pub fn interpolate<T: Sample>(grid: &Grid1D, samples: &[T], x: f64) -> Result<T, CoreError> {
    debug_assert_eq!(samples.len(), grid.n);
    Ok(Stencil::new(grid, x)?.apply(samples))
}

/// Like [`interpolate`], but returns `far` outside the grid.
pub fn interpolate_or<T: Sample>(grid: &Grid1D, samples: &[T], x: f64, far: T) -> T {
    match Stencil::new(grid, x) {
        Ok(st) => st.apply(samples),
        Err(_) => far,
    }
}

fn cell_integral<T: Sample>(samples: &[T], dx: f64, i: usize, t0: f64, t1: f64) -> T {
    let f0 = samples[i];
    let slope = samples[i + 1] - f0;
    f0 * ((t1 - t0) * dx) + slope * (0.5 * (t1 * t1 - t0 * t0) * dx)
}

/// Integral over `[a, b]` of the piecewise-linear interpolant of `samples`.
pub fn integrate<T: Sample>(grid: &Grid1D, samples: &[T], a: f64, b: f64) -> Result<T, CoreError> {
    if b < a {
        return Err(domain_err(format!("reversed integration bounds [{a}, {b}]")));
    }
    let (ia, ta) = grid.locate(a)?;
    let (ib, tb) = grid.locate(b)?;
    if ia == ib {
        return Ok(cell_integral(samples, grid.dx, ia, ta, tb));
    }
    let mut acc = cell_integral(samples, grid.dx, ia, ta, 1.0);
    for i in ia + 1..ib {
        acc = acc + (samples[i] + samples[i + 1]) * (0.5 * grid.dx);
    }
    Ok(acc + cell_integral(samples, grid.dx, ib, 0.0, tb))
}

/// Trapezoid rule over the whole grid.
pub fn integrate_all<T: Sample>(grid: &Grid1D, samples: &[T]) -> T {
    let n = samples.len();
    let mut acc = (samples[0] + samples[n - 1]) * 0.5;
    for &v in &samples[1..n - 1] {
        acc = acc + v;
    }
    acc * grid.dx
}

/// Fourth-order differences: five-point centred in the interior, shifted
/// five-point stencils on the two nodes nearest each end.
pub fn derivative<T: Sample>(grid: &Grid1D, samples: &[T]) -> Vec<T> {
    let n = samples.len();
    let h = 1.0 / (12.0 * grid.dx);
    let f = samples;
    let mut out = Vec::with_capacity(n);
    out.push((f[0] * -25.0 + f[1] * 48.0 - f[2] * 36.0 + f[3] * 16.0 - f[4] * 3.0) * h);
    out.push((f[0] * -3.0 - f[1] * 10.0 + f[2] * 18.0 - f[3] * 6.0 + f[4]) * h);
    for i in 2..n - 2 {
        out.push(((f[i + 1] - f[i - 1]) * 8.0 - f[i + 2] + f[i - 2]) * h);
    }
    out.push((f[n - 1] * 3.0 + f[n - 2] * 10.0 - f[n - 3] * 18.0 + f[n - 4] * 6.0 - f[n - 5]) * h);
    out.push((f[n - 1] * 25.0 - f[n - 2] * 48.0 + f[n - 3] * 36.0 - f[n - 4] * 16.0 + f[n - 5] * 3.0) * h);
    out
}

pub fn sup_norm<T: Sample>(samples: &[T]) -> f64 {
    samples.iter().fold(0.0, |m, v| m.max(v.modulus()))
}

pub fn l2_norm<T: Sample>(grid: &Grid1D, samples: &[T]) -> f64 {
    let sq: Vec<f64> = samples.iter().map(|v| v.modulus() * v.modulus()).collect();
    integrate_all(grid, &sq).sqrt()
}

/// Snapshot of `(zeta, zeta_t)` for the constant-speed equation.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub grid: Grid1D,
    pub zeta: Vec<Complex64>,
    pub zeta_t: Vec<Complex64>,
    pub far_field: Complex64,
    pub time: f64,
}

impl ComplexField {
    /// Builds a snapshot and checks the compact-perturbation and unit-disk conditions.
    pub fn new(
        grid: Grid1D,
        zeta: Vec<Complex64>,
        zeta_t: Vec<Complex64>,
        far_field: Complex64,
        time: f64,
    ) -> Result<Self, CoreError> {
        if zeta.len() != grid.n || zeta_t.len() != grid.n {
            return Err(CoreError::Data(format!(
                "field lengths {} / {} do not match grid size {}",
                zeta.len(),
                zeta_t.len(),
                grid.n
            )));
        }
        if !(far_field.norm() < 1.0) {
            return Err(config_err(format!("far field modulus {} must be < 1", far_field.norm())));
        }
        let f = Self { grid, zeta, zeta_t, far_field, time };
        f.check()?;
        Ok(f)
    }

    /// Re-checks the snapshot conditions.
    pub fn check(&self) -> Result<(), CoreError> {
        let n = self.grid.n;
        for &i in &[0, n - 1] {
            let off = (self.zeta[i] - self.far_field).norm();
            if off > BOUNDARY_TOL {
                return Err(domain_err(format!(
                    "perturbation reaches the boundary at x = {} (|zeta - zeta*| = {off:e})",
                    self.grid.x(i)
                )));
            }
        }
        let sup = sup_norm(&self.zeta);
        if !(sup < 1.0) {
            return Err(CoreError::StateEscape { modulus: sup });
        }
        if self.zeta.iter().chain(self.zeta_t.iter()).any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(CoreError::Data("non-finite field sample".into()));
        }
        Ok(())
    }

    pub fn zeta_x(&self) -> Vec<Complex64> {
        derivative(&self.grid, &self.zeta)
    }
}

/// The norms making up the solution-space metric.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateNorms {
    pub sup_zeta: f64,
    /// `||zeta - zeta*||_{L2} + ||zeta_x||_{L2}`.
    pub h1_dist: f64,
    pub sup_zeta_t: f64,
    pub l2_zeta_t: f64,
    /// `||W0(|zeta|)||_{L1}`.
    pub w0_mass: f64,
}

pub fn norms<P: Potential + ?Sized>(f: &ComplexField, p: &P) -> StateNorms {
    let pert: Vec<Complex64> = f.zeta.iter().map(|z| z - f.far_field).collect();
    let zx = f.zeta_x();
    let w: Vec<f64> = f.zeta.iter().map(|z| p.value(z.norm()).abs()).collect();
    StateNorms {
        sup_zeta: sup_norm(&f.zeta),
        h1_dist: l2_norm(&f.grid, &pert) + l2_norm(&f.grid, &zx),
        sup_zeta_t: sup_norm(&f.zeta_t),
        l2_zeta_t: l2_norm(&f.grid, &f.zeta_t),
        w0_mass: integrate_all(&f.grid, &w),
    }
}

/// Distance between two snapshots on the same grid in the solution-space metric:
/// `W^{1,inf}` and `H^1` of the difference of `zeta`, `L^inf` and `L^2` of the
/// difference of `zeta_t`, and `L^1` of the difference of `W0(|zeta|)`.
pub fn metric_distance<P: Potential + ?Sized>(a: &ComplexField, b: &ComplexField, p: &P) -> f64 {
    metric_distance_parts(&a.grid, (&a.zeta, &a.zeta_t), (&b.zeta, &b.zeta_t), p)
}

/// [`metric_distance`] on raw `(zeta, zeta_t)` sample pairs.
pub fn metric_distance_parts<P: Potential + ?Sized>(
    grid: &Grid1D,
    a: (&[Complex64], &[Complex64]),
    b: (&[Complex64], &[Complex64]),
    p: &P,
) -> f64 {
    let dz: Vec<Complex64> = a.0.iter().zip(b.0).map(|(x, y)| x - y).collect();
    let dzt: Vec<Complex64> = a.1.iter().zip(b.1).map(|(x, y)| x - y).collect();
    let dzx = derivative(grid, &dz);
    let dw: Vec<f64> = a
        .0
        .iter()
        .zip(b.0)
        .map(|(x, y)| (p.value(x.norm()) - p.value(y.norm())).abs())
        .collect();
    sup_norm(&dz)
        + sup_norm(&dzx)
        + l2_norm(grid, &dz)
        + l2_norm(grid, &dzx)
        + sup_norm(&dzt)
        + l2_norm(grid, &dzt)
        + integrate_all(grid, &dw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::BuiltinPotential;
    use alloc::vec;
    use proptest::prelude::*;

    fn grid(n: usize) -> Grid1D {
        Grid1D::new(-3.0, 4.0, n).unwrap()
    }

    #[test]
    fn grid_rejects_small_n() {
        assert!(matches!(Grid1D::new(0.0, 1.0, 15), Err(CoreError::Config(_))));
        assert!(Grid1D::new(1.0, 1.0, 32).is_err());
    }

    #[test]
    fn interpolation_reproduces_constants_and_cubics() {
        let g = grid(41);
        let k = vec![2.5; g.n()];
        assert!((interpolate(&g, &k, 0.123).unwrap() - 2.5).abs() < 1e-14);
        let cube: Vec<f64> = g.nodes().iter().map(|x| x * x * x - 2.0 * x).collect();
        for i in 0..g.n() - 1 {
            let x = g.x(i) + 0.5 * g.dx();
            let got = interpolate(&g, &cube, x).unwrap();
            assert!((got - (x * x * x - 2.0 * x)).abs() < 1e-12, "x = {x}");
        }
    }

    #[test]
    fn interpolation_is_fourth_order() {
        let err = |n: usize| {
            let g = grid(n);
            let s: Vec<f64> = g.nodes().iter().map(|x| x.sin()).collect();
            (0..997)
                .map(|k| {
                    let x = -3.0 + 7.0 * (k as f64 + 0.37) / 997.0;
                    (interpolate(&g, &s, x).unwrap() - x.sin()).abs()
                })
                .fold(0.0, f64::max)
        };
        let ratio = err(101) / err(201);
        assert!(ratio > 13.0 && ratio < 19.0, "ratio {ratio}");
    }

    #[test]
    fn interpolation_outside_domain_fails() {
        let g = grid(20);
        let s = vec![0.0; 20];
        assert!(matches!(interpolate(&g, &s, 4.1), Err(CoreError::Domain(_))));
        assert_eq!(interpolate_or(&g, &s, 4.1, 7.0), 7.0);
    }

    #[test]
    fn integrate_basic_cases() {
        let g = Grid1D::new(0.0, 2.0, 33).unwrap();
        let one = vec![1.0; 33];
        assert!((integrate(&g, &one, 0.0, 1.0).unwrap() - 1.0).abs() < 1e-14);
        let lin = g.nodes();
        assert!((integrate(&g, &lin, 0.0, 2.0).unwrap() - 2.0).abs() < 1e-14);
        assert!((integrate(&g, &lin, 0.3, 1.71).unwrap() - 0.5 * (1.71f64.powi(2) - 0.09)).abs() < 1e-14);
        assert!(matches!(integrate(&g, &lin, 1.0, 0.5), Err(CoreError::Domain(_))));
    }

    #[test]
    fn integrate_gaussian_against_refined_oracle() {
        let f = |x: f64| (-x * x).exp();
        let run = |n: usize| {
            let g = Grid1D::new(-5.0, 5.0, n).unwrap();
            let s: Vec<f64> = g.nodes().iter().map(|&x| f(x)).collect();
            integrate(&g, &s, -5.0, 5.0).unwrap()
        };
        // Oracle: Simpson on a 10x finer grid.
        let oracle = crate::coefficients::simpson(f, -5.0, 5.0, 2000);
        let e1 = (run(101) - oracle).abs();
        let e2 = (run(201) - oracle).abs();
        assert!(e1 < 0.1 * 0.1);
        // Trapezoid is spectrally accurate for this integrand; the O(dx^2) bound holds a fortiori.
        assert!(e2 <= e1 + 1e-15);
    }

    #[test]
    fn interpolation_is_exact_at_nodes() {
        let g = grid(50);
        let s: Vec<f64> = g.nodes().iter().map(|x| (3.0 * x).cos()).collect();
        for i in 0..g.n() {
            assert_eq!(interpolate(&g, &s, g.x(i)).unwrap(), s[i]);
        }
    }

    #[test]
    fn norms_of_constant_state() {
        let g = grid(64);
        let zs = Complex64::new(0.0, 0.0);
        let f = ComplexField::new(g, vec![zs; 64], vec![Complex64::zero(); 64], zs, 0.0).unwrap();
        let nm = norms(&f, &BuiltinPotential::Reference);
        assert_eq!(nm, StateNorms { sup_zeta: 0.0, ..Default::default() });
        let zs = Complex64::new(0.3, 0.4);
        let f = ComplexField::new(g, vec![zs; 64], vec![Complex64::zero(); 64], zs, 0.0).unwrap();
        let nm = norms(&f, &BuiltinPotential::Zero);
        assert!((nm.sup_zeta - 0.5).abs() < 1e-15);
        // One-sided end differences of a constant round to ~1e-16.
        assert!(nm.h1_dist < 1e-14);
    }

    fn bump_field(a: f64) -> ComplexField {
        let g = Grid1D::new(-10.0, 10.0, 401).unwrap();
        let zs = Complex64::new(0.2, 0.1);
        let zeta = g.nodes().iter().map(|x| zs + Complex64::new(a, -0.5 * a) * (-x * x).exp()).collect();
        let zt = g.nodes().iter().map(|x| Complex64::new(0.0, a) * (-x * x).exp()).collect();
        ComplexField::new(g, zeta, zt, zs, 0.0).unwrap()
    }

    #[test]
    fn l2_of_gaussian_matches_closed_form() {
        // int exp(-2x^2) dx = sqrt(pi/2)
        let a = 0.1;
        let nm = norms(&bump_field(a), &BuiltinPotential::Reference);
        let want = a * (core::f64::consts::PI / 2.0).sqrt().sqrt();
        assert!((nm.l2_zeta_t - want).abs() < 1e-6 * want);
    }

    #[test]
    fn boundary_perturbation_is_rejected() {
        let g = grid(32);
        let mut z = vec![Complex64::zero(); 32];
        z[0] = Complex64::new(1e-6, 0.0);
        let err = ComplexField::new(g, z, vec![Complex64::zero(); 32], Complex64::zero(), 0.0);
        assert!(matches!(err, Err(CoreError::Domain(_))));
    }

    proptest! {
        #[test]
        fn integrate_is_additive(a in -3.0f64..4.0, b in -3.0f64..4.0, c in -3.0f64..4.0) {
            let mut v = [a, b, c];
            v.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let g = grid(77);
            let s: Vec<f64> = g.nodes().iter().map(|x| 2.0 + x.sin()).collect();
            let ab = integrate(&g, &s, v[0], v[1]).unwrap();
            let bc = integrate(&g, &s, v[1], v[2]).unwrap();
            let ac = integrate(&g, &s, v[0], v[2]).unwrap();
            prop_assert!((ab + bc - ac).abs() <= 1e-12 * ac.abs().max(1e-300) + 1e-15);
        }

        #[test]
        fn norms_are_homogeneous(lambda in 0.1f64..3.0) {
            let p = BuiltinPotential::Reference;
            let base = norms(&bump_field(0.05), &p);
            let scaled = norms(&bump_field(0.05 * lambda), &p);
            prop_assert!((scaled.h1_dist - lambda * base.h1_dist).abs() < 1e-12 * scaled.h1_dist.max(1e-12));
            prop_assert!((scaled.l2_zeta_t - lambda * base.l2_zeta_t).abs() < 1e-12 * scaled.l2_zeta_t);
            prop_assert!((scaled.sup_zeta_t - lambda * base.sup_zeta_t).abs() < 1e-12 * scaled.sup_zeta_t);
        }
    }
}
