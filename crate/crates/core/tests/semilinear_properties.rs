use std::f64::consts::PI;

use proptest::prelude::*;
use twonvw_core::diagnostics::{DensitySnapshot, EnergyMonitor};
use twonvw_core::field::metric_distance;
use twonvw_core::semilinear::{self, SemilinearConfig};
use twonvw_core::{apriori_constants, BuiltinPotential, Complex64, ComplexField, Grid1D, Potential};

fn gauss(x: f64, c: f64, w: f64) -> f64 {
    (-((x - c) / w).powi(2)).exp()
}

/// Grid on `[-half, half]` with `dx = 1/m`, so that `T = 1` is grid aligned at `c = 1`.
fn grid(m: usize, half: f64) -> Grid1D {
    let n = (2.0 * half * m as f64).round() as usize + 1;
    Grid1D::new(-half, half, n).unwrap()
}

fn field(g: Grid1D, far: Complex64, z: impl Fn(f64) -> Complex64, zt: impl Fn(f64) -> Complex64) -> ComplexField {
    let xs = g.nodes();
    ComplexField::new(g, xs.iter().map(|&x| far + z(x)).collect(), xs.iter().map(|&x| zt(x)).collect(), far, 0.0).unwrap()
}

fn solve<P: Potential>(f0: &ComplexField, p: &P, t: f64) -> Vec<ComplexField> {
    let e0 = DensitySnapshot::from_complex(f0, p, 1.0).total_energy();
    let cfg = SemilinearConfig::from_energy(&f0.grid, 1.0, p, e0).unwrap();
    let mut levels = Vec::new();
    semilinear::picard_solve_observed(f0, p, &cfg, t, |f, _| {
        levels.push(f.clone());
        Ok(())
    })
    .unwrap();
    levels
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    // Rotating data and far field together rotates the solution.
    #[test]
    fn phase_equivariance(theta in 0.0..2.0 * PI, phase0 in 0.0..2.0 * PI) {
        let p = BuiltinPotential::Flat4 { s0: 0.5 };
        let g = grid(16, 8.0);
        let far = Complex64::from_polar(0.5, phase0);
        let bump = |x: f64| Complex64::new(0.15 * gauss(x, 0.3, 1.0), -0.1 * gauss(x, -0.4, 0.8));
        let vel = |x: f64| Complex64::new(0.0, 0.1 * gauss(x, 0.0, 1.2));
        let rot = Complex64::from_polar(1.0, theta);
        let a = solve(&field(g, far, bump, vel), &p, 1.0);
        let b = solve(&field(g, far * rot, |x| rot * bump(x), |x| rot * vel(x)), &p, 1.0);
        let (fa, fb) = (a.last().unwrap(), b.last().unwrap());
        let err = fa.zeta.iter().zip(&fb.zeta).chain(fa.zeta_t.iter().zip(&fb.zeta_t))
            .map(|(x, y)| (rot * x - y).norm())
            .fold(0.0, f64::max);
        prop_assert!(err < 1e-12, "rotation defect {err:e}");
    }

    // sup |zeta| never exceeds c_E of the initial energy.
    #[test]
    fn apriori_bound_holds(
        amp in 0.05..0.45f64,
        width in 0.5..1.3f64,
        center in -1.0..1.0f64,
        phase in 0.0..2.0 * PI,
        vel in -0.3..0.3f64,
    ) {
        let p = BuiltinPotential::Reference;
        let g = grid(16, 10.0);
        let f0 = field(
            g,
            Complex64::new(0.0, 0.0),
            |x| Complex64::from_polar(amp * gauss(x, center, width), phase),
            |x| Complex64::new(vel * gauss(x, center, width), 0.0),
        );
        let e0 = DensitySnapshot::from_complex(&f0, &p, 1.0).total_energy();
        let bound = apriori_constants(&p, e0, 1.0).unwrap().c_e;
        let mut monitor = EnergyMonitor::new(Some(bound));
        for f in solve(&f0, &p, 1.0) {
            monitor.push(DensitySnapshot::from_complex(&f, &p, 1.0));
        }
        prop_assert!(!monitor.any_violation(), "c_E = {bound}");
    }

    // Distance of two solutions is at most the Gronwall factor times the
    // largest distance of their free waves so far.
    #[test]
    fn continuous_dependence(delta in 1e-4..1e-2f64, shift in -1.0..1.0f64) {
        let p = BuiltinPotential::Reference;
        let g = grid(16, 8.0);
        let zero = Complex64::new(0.0, 0.0);
        let base = |x: f64| Complex64::new(0.3 * gauss(x, 0.0, 1.0), 0.1 * gauss(x, 0.5, 0.7));
        let f0 = field(g, zero, base, |_| zero);
        let f1 = field(g, zero, |x| base(x) + delta * gauss(x, shift, 0.8), |x| Complex64::new(0.0, delta * gauss(x, -shift, 1.0)));
        let e = [&f0, &f1].iter().map(|f| DensitySnapshot::from_complex(f, &p, 1.0).total_energy()).fold(0.0, f64::max);
        let k = apriori_constants(&p, e, 1.0).unwrap();
        let a = solve(&f0, &p, 1.0);
        let b = solve(&f1, &p, 1.0);
        let mut free_sup: f64 = 0.0;
        for (fa, fb) in a.iter().zip(&b) {
            let t = fa.time;
            let wa = semilinear::free_wave(&f0, 1.0, t).unwrap();
            let wb = semilinear::free_wave(&f1, 1.0, t).unwrap();
            free_sup = free_sup.max(metric_distance(&wa, &wb, &p));
            let gronwall = ((k.l_e_prime + k.l_e_second) * t * t / 2.0).exp();
            let d = metric_distance(fa, fb, &p);
            prop_assert!(d <= gronwall * free_sup * (1.0 + 1e-9), "t = {t}: {d:e} > {gronwall} * {free_sup:e}");
        }
    }
}

/// Energy of asymmetric data with velocity, on the fitted domain.
fn flux_data(m: usize) -> ComplexField {
    let g = grid(m, 7.0);
    field(
        g,
        Complex64::new(0.0, 0.0),
        |x| Complex64::new(0.3 * gauss(x, 0.2, 1.0), 0.15 * gauss(x, -0.3, 0.8)),
        |x| Complex64::new(0.2 * gauss(x, 0.1, 0.9), 0.0),
    )
}

#[test]
fn flux_is_conserved_to_second_order() {
    let p = BuiltinPotential::Reference;
    let drift = |m: usize| {
        let f0 = flux_data(m);
        let levels = solve(&f0, &p, 1.0);
        let f = |s: &ComplexField| DensitySnapshot::from_complex(s, &p, 1.0).total_flux();
        let f_0 = f(&f0);
        assert!(f_0.abs() > 1e-3, "flux must not vanish by symmetry");
        (f(levels.last().unwrap()) - f_0).abs() / f_0.abs()
    };
    let (coarse, fine) = (drift(64), drift(128));
    let ratio = coarse / fine;
    assert!((3.0..=5.0).contains(&ratio), "flux drift {coarse:e} -> {fine:e} (ratio {ratio})");
}
