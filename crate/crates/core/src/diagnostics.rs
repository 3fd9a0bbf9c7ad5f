//! Energy and flux densities, conservation residuals, the a priori bound
//! monitor and convergence-order fitting.
//!
//! Both conservation laws are written with the flux density `F` of the
//! state and the speed weight applied outside it:
//! `E_t - (c^2 F)_x = 0` and `F_t - (E - 2 W0)_x = 0`.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by std methods when a dependency links std
use num_traits::Float;

use crate::coefficients::{Potential, WaveSpeed};
use crate::error::CoreError;
use crate::field::{derivative, integrate_all, sup_norm, ComplexField, Grid1D};
use crate::quasilinear::PolarState;

/// Pointwise densities of one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct DensitySnapshot {
    pub time: f64,
    pub grid: Grid1D,
    pub energy: Vec<f64>,
    pub flux: Vec<f64>,
    /// `c^2` at each node.
    pub speed_sq: Vec<f64>,
    pub potential: Vec<f64>,
    /// `sup |zeta|`, i.e. `sup s` in polar variables.
    pub sup_state: f64,
}

impl DensitySnapshot {
    pub fn from_complex<P: Potential + ?Sized>(f: &ComplexField, p: &P, c: f64) -> Self {
        let (energy, flux) = energy_density_complex(f, p, c);
        Self {
            time: f.time,
            grid: f.grid,
            energy,
            flux,
            speed_sq: alloc::vec![c * c; f.grid.n()],
            potential: f.zeta.iter().map(|z| p.value(z.norm())).collect(),
            sup_state: sup_norm(&f.zeta),
        }
    }

    pub fn from_polar<P: Potential + ?Sized>(u: &PolarState, p: &P, ws: &WaveSpeed) -> Self {
        let (energy, flux) = energy_density_polar(u, p, ws);
        Self {
            time: u.time,
            grid: u.grid,
            energy,
            flux,
            speed_sq: u.psi.iter().map(|&psi| ws.c(psi).powi(2)).collect(),
            potential: u.s.iter().map(|&s| p.value(s)).collect(),
            sup_state: sup_norm(&u.s),
        }
    }

    pub fn total_energy(&self) -> f64 {
        integrate_all(&self.grid, &self.energy)
    }

    pub fn total_flux(&self) -> f64 {
        integrate_all(&self.grid, &self.flux)
    }
}

/// `E = |zeta_t|^2/2 + c^2 |zeta_x|^2/2 + W0(|zeta|)` and `F = Re(conj(zeta_t) zeta_x)`.
pub fn energy_density_complex<P: Potential + ?Sized>(f: &ComplexField, p: &P, c: f64) -> (Vec<f64>, Vec<f64>) {
    let zx = f.zeta_x();
    let mut e = Vec::with_capacity(f.grid.n());
    let mut fl = Vec::with_capacity(f.grid.n());
    for i in 0..f.grid.n() {
        let zt = f.zeta_t[i];
        e.push(0.5 * zt.norm_sqr() + 0.5 * c * c * zx[i].norm_sqr() + p.value(f.zeta[i].norm()));
        fl.push((zt.conj() * zx[i]).re);
    }
    (e, fl)
}

/// `E = (s^2 (phi^2 + omega^2) + v^2 + r^2)/2 + W0(s)` and `F = (s^2 phi omega + v r) / c(psi)`.
pub fn energy_density_polar<P: Potential + ?Sized>(u: &PolarState, p: &P, ws: &WaveSpeed) -> (Vec<f64>, Vec<f64>) {
    let n = u.grid.n();
    let mut e = Vec::with_capacity(n);
    let mut fl = Vec::with_capacity(n);
    for i in 0..n {
        let (s, phi, v, om, r) = (u.s[i], u.phi[i], u.v[i], u.omega[i], u.r[i]);
        let s2 = s * s;
        e.push(0.5 * (s2 * (phi * phi + om * om) + v * v + r * r) + p.value(s));
        fl.push((s2 * phi * om + v * r) / ws.c(u.psi[i]));
    }
    (e, fl)
}

/// One row of the energy time series.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub time: f64,
    pub total_e: f64,
    pub total_f: f64,
    /// L1 norm of the discrete `E_t - (c^2 F)_x`; `None` at the first and last snapshot.
    pub residual_e: Option<f64>,
    /// L1 norm of the discrete `F_t - (E - 2 W0)_x`; `None` at the first and last snapshot.
    pub residual_f: Option<f64>,
    pub sup_state: f64,
    pub apriori_violated: bool,
}

/// Slack allowed above `c_E` before the a priori bound counts as violated.
pub const APRIORI_SLACK: f64 = 1e-6;

/// Streams snapshots and emits one [`EnergyReport`] per snapshot, residuals
/// from centred time differences over three consecutive snapshots.
#[derive(Debug, Clone, Default)]
pub struct EnergyMonitor {
    apriori_bound: Option<f64>,
    window: VecDeque<DensitySnapshot>,
    reports: Vec<EnergyReport>,
}

impl EnergyMonitor {
    /// `apriori_bound` is `c_E`; `None` disables the bound check.
    pub fn new(apriori_bound: Option<f64>) -> Self {
        Self { apriori_bound, window: VecDeque::with_capacity(3), reports: Vec::new() }
    }

    fn report(&self, snap: &DensitySnapshot, residuals: Option<(f64, f64)>) -> EnergyReport {
        EnergyReport {
            time: snap.time,
            total_e: snap.total_energy(),
            total_f: snap.total_flux(),
            residual_e: residuals.map(|r| r.0),
            residual_f: residuals.map(|r| r.1),
            sup_state: snap.sup_state,
            apriori_violated: self.apriori_bound.is_some_and(|b| snap.sup_state > b + APRIORI_SLACK),
        }
    }

    /// Adds a snapshot; returns the number of reports finalised by it.
    pub fn push(&mut self, snap: DensitySnapshot) -> usize {
        if self.reports.is_empty() && self.window.is_empty() {
            let r = self.report(&snap, None);
            self.reports.push(r);
            self.window.push_back(snap);
            return 1;
        }
        self.window.push_back(snap);
        if self.window.len() < 3 {
            return 0;
        }
        let res = residuals(&self.window[0], &self.window[1], &self.window[2]);
        let r = self.report(&self.window[1], Some(res));
        self.reports.push(r);
        self.window.pop_front();
        1
    }

    /// Reports finalised so far.
    pub fn reports(&self) -> &[EnergyReport] {
        &self.reports
    }

    pub fn any_violation(&self) -> bool {
        self.reports.iter().any(|r| r.apriori_violated)
            || self.window.back().is_some_and(|s| self.report(s, None).apriori_violated)
    }

    /// Closes the series with a report for the last snapshot.
    pub fn finish(mut self) -> Vec<EnergyReport> {
        if self.window.len() >= 2 {
            let last = self.window.back().unwrap().clone();
            let r = self.report(&last, None);
            self.reports.push(r);
        }
        self.reports
    }
}

/// `(||E_t - (c^2 F)_x||_1, ||F_t - (E - 2 W0)_x||_1)` at the middle snapshot.
pub fn residuals(prev: &DensitySnapshot, mid: &DensitySnapshot, next: &DensitySnapshot) -> (f64, f64) {
    let g = &mid.grid;
    let dt2 = next.time - prev.time;
    let c2f: Vec<f64> = mid.flux.iter().zip(&mid.speed_sq).map(|(f, c2)| f * c2).collect();
    let e2w: Vec<f64> = mid.energy.iter().zip(&mid.potential).map(|(e, w)| e - 2.0 * w).collect();
    let d_c2f = derivative(g, &c2f);
    let d_e2w = derivative(g, &e2w);
    let n = g.n();
    let mut re = Vec::with_capacity(n);
    let mut rf = Vec::with_capacity(n);
    for i in 0..n {
        re.push(((next.energy[i] - prev.energy[i]) / dt2 - d_c2f[i]).abs());
        rf.push(((next.flux[i] - prev.flux[i]) / dt2 - d_e2w[i]).abs());
    }
    (integrate_all(g, &re), integrate_all(g, &rf))
}

/// Least-squares slope of `ln(error)` against `ln(h)`.
pub fn fit_order(pairs: &[(f64, f64)]) -> Result<f64, CoreError> {
    if pairs.len() < 3 {
        return Err(CoreError::Data(format!("need at least 3 (h, error) pairs, got {}", pairs.len())));
    }
    for w in pairs.windows(2) {
        if !(w[1].0 < w[0].0) {
            return Err(CoreError::Data(format!("step sizes must be strictly decreasing ({} then {})", w[0].0, w[1].0)));
        }
    }
    if let Some(&(h, e)) = pairs.iter().find(|(h, e)| !(*h > 0.0 && *e > 0.0 && e.is_finite())) {
        return Err(CoreError::Data(format!("non-positive step or error in pair ({h}, {e})")));
    }
    let n = pairs.len() as f64;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::BuiltinPotential;
    use alloc::vec;
    use num_complex::Complex64;

    #[test]
    fn fit_order_recovers_powers() {
        let two: Vec<(f64, f64)> = [0.1, 0.05, 0.025].iter().map(|&h| (h, 3.0 * h * h)).collect();
        assert!((fit_order(&two).unwrap() - 2.0).abs() < 1e-10);
        let one: Vec<(f64, f64)> = [0.4, 0.2, 0.1, 0.05].iter().map(|&h| (h, 0.7 * h)).collect();
        assert!((fit_order(&one).unwrap() - 1.0).abs() < 1e-10);
        assert!(matches!(fit_order(&[(0.1, 1.0), (0.05, 0.0), (0.02, 1.0)]), Err(CoreError::Data(_))));
        assert!(fit_order(&[(0.1, 1.0), (0.2, 0.5), (0.3, 0.1)]).is_err());
        assert!(fit_order(&[(0.1, 1.0), (0.05, 0.5)]).is_err());
    }

    #[test]
    fn constant_state_has_zero_density() {
        let g = Grid1D::new(-1.0, 1.0, 32).unwrap();
        let zs = Complex64::new(0.0, 0.0);
        let f = ComplexField::new(g, vec![zs; 32], vec![zs; 32], zs, 0.0).unwrap();
        let (e, fl) = energy_density_complex(&f, &BuiltinPotential::Reference, 1.0);
        assert!(e.iter().chain(&fl).all(|v| *v == 0.0));
    }

    #[test]
    fn right_moving_wave_densities() {
        let c = 2.0;
        let h = |x: f64| Complex64::new(0.1, -0.2) * (-x * x).exp();
        let dh = |x: f64| Complex64::new(0.1, -0.2) * (-2.0 * x * (-x * x).exp());
        let residual = |n: usize| {
            let g = Grid1D::new(-8.0, 8.0, n).unwrap();
            let snap = |t: f64| {
                let z = g.nodes().iter().map(|&x| h(x - c * t)).collect();
                let zt = g.nodes().iter().map(|&x| dh(x - c * t) * -c).collect();
                let f = ComplexField::new(g, z, zt, Complex64::new(0.0, 0.0), t).unwrap();
                DensitySnapshot::from_complex(&f, &BuiltinPotential::Zero, c)
            };
            let s0 = snap(0.0);
            for (i, &x) in g.nodes().iter().enumerate() {
                let d2 = dh(x).norm_sqr();
                assert!((s0.energy[i] - c * c * d2).abs() < 1e-3);
                assert!((s0.flux[i] + c * d2).abs() < 1e-3);
            }
            let dt = 1e-4;
            residuals(&snap(-dt), &s0, &snap(dt))
        };
        let (a, b) = (residual(801), residual(1601));
        assert!(a.0 < 2e-3 && a.1 < 2e-3, "{a:?}");
        assert!(a.0 / b.0 > 3.5 && a.1 / b.1 > 3.5, "{a:?} {b:?}");
    }

    #[test]
    fn monitor_emits_one_report_per_snapshot() {
        let g = Grid1D::new(-1.0, 1.0, 32).unwrap();
        let mut mon = EnergyMonitor::new(Some(0.2));
        for k in 0..5 {
            let zs = Complex64::new(0.0, 0.0);
            let mut z = vec![zs; 32];
            z[16] = Complex64::new(0.1 * k as f64, 0.0);
            let f = ComplexField::new(g, z, vec![zs; 32], zs, k as f64 * 0.1).unwrap();
            mon.push(DensitySnapshot::from_complex(&f, &BuiltinPotential::Reference, 1.0));
        }
        assert!(mon.any_violation());
        let reports = mon.finish();
        assert_eq!(reports.len(), 5);
        assert!(reports[0].residual_e.is_none() && reports[4].residual_e.is_none());
        assert!(reports[1..4].iter().all(|r| r.residual_e.is_some() && r.residual_f.is_some()));
        let flags: Vec<bool> = reports.iter().map(|r| r.apriori_violated).collect();
        assert_eq!(flags, vec![false, false, false, true, true]);
    }
}
