//! Constant-speed case `zeta_tt - c^2 zeta_xx + (W0'(|zeta|)/|zeta|) zeta = 0`,
//! solved through its d'Alembert/Duhamel integral form by Picard iteration
//! over short windows.
//!
//! Time steps are tied to the grid, `dt = dx / c`, so every characteristic
//! trace and every edge of a backward light cone lands on a node.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)] // Float is shadowed by std methods when a dependency links std
use num_traits::{Float, Zero};

use crate::coefficients::{apriori_constants, Potential};
use crate::error::{config_err, domain_err, CoreError};
use crate::field::{derivative, integrate, interpolate_or, metric_distance_parts, ComplexField, Grid1D};
use crate::BOUNDARY_TOL;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemilinearConfig {
    pub c: f64,
    pub dt: f64,
    pub t_window: f64,
    pub picard_tol: f64,
    pub picard_max: usize,
}

pub const DEFAULT_PICARD_TOL: f64 = 1e-10;
pub const DEFAULT_PICARD_MAX: usize = 60;

/// Longest window on which the Picard map contracts, `(1 - E/E') / (2 sqrt(k_E'))`.
pub fn window_bound(k_e_prime: f64, energy: f64, energy_prime: f64) -> f64 {
    (1.0 - energy / energy_prime) / (2.0 * k_e_prime.sqrt())
}

impl SemilinearConfig {
    /// Grid-aligned configuration with an explicit window length.
    pub fn new(grid: &Grid1D, c: f64, t_window: f64) -> Result<Self, CoreError> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(config_err(format!("wave speed c = {c} must be positive")));
        }
        if !(t_window > 0.0) {
            return Err(config_err(format!("window length {t_window} must be positive")));
        }
        Ok(Self {
            c,
            dt: grid.dx() / c,
            t_window,
            picard_tol: DEFAULT_PICARD_TOL,
            picard_max: DEFAULT_PICARD_MAX,
        })
    }

    /// Window from the contraction bound with budget `E' = 2E`.
    pub fn from_energy<P: Potential + ?Sized>(
        grid: &Grid1D,
        c: f64,
        p: &P,
        energy: f64,
    ) -> Result<Self, CoreError> {
        let budget = 2.0 * energy;
        let k = apriori_constants(p, budget, c)?;
        Self::new(grid, c, window_bound(k.k_e, energy, budget))
    }

    pub fn check(&self, grid: &Grid1D) -> Result<(), CoreError> {
        if ((self.dt * self.c / grid.dx()) - 1.0).abs() > 1e-12 {
            return Err(config_err(format!(
                "dt = {} is not grid aligned (dt c / dx = {})",
                self.dt,
                self.dt * self.c / grid.dx()
            )));
        }
        if !(self.picard_tol > 0.0) || self.picard_max == 0 {
            return Err(config_err("picard_tol and picard_max must be positive"));
        }
        Ok(())
    }

    /// Number of grid-aligned steps per window (at least one).
    pub fn steps_per_window(&self) -> usize {
        ((self.t_window / self.dt + 1e-9).floor() as usize).max(1)
    }
}

/// Record of one window of Picard iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct PicardTrace {
    pub window_start: f64,
    pub steps: usize,
    pub iterate_count: usize,
    pub diff_norms: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemilinearRun {
    pub final_state: ComplexField,
    pub traces: Vec<PicardTrace>,
}

/// `(W0'(|z|)/|z|) z`, continued by `W0''(0) z` at the origin.
pub fn source_term<P: Potential + ?Sized>(p: &P, z: Complex64) -> Result<Complex64, CoreError> {
    let r = z.norm();
    if !(r < 1.0) {
        return Err(CoreError::StateEscape { modulus: r });
    }
    let factor = if r < 1e-6 { p.d2(0.0) + 0.5 * p.d3(0.0) * r } else { p.d1(r) / r };
    Ok(z * factor)
}

/// Smallest interval holding every node where the state differs from the far field.
fn perturbation_support(f: &ComplexField) -> Option<(f64, f64)> {
    let active = |i: usize| {
        (f.zeta[i] - f.far_field).norm() > BOUNDARY_TOL || f.zeta_t[i].norm() > BOUNDARY_TOL
    };
    let n = f.grid.n();
    let first = (0..n).find(|&i| active(i))?;
    let last = (0..n).rev().find(|&i| active(i))?;
    Some((f.grid.x(first), f.grid.x(last)))
}

fn check_reach(f: &ComplexField, reach: f64) -> Result<(), CoreError> {
    if let Some((a, b)) = perturbation_support(f) {
        let g = &f.grid;
        let slack = 1e-9 * g.dx();
        if a - reach < g.x_min() - slack || b + reach > g.x_max() + slack {
            return Err(domain_err(format!(
                "perturbation on [{a}, {b}] reaches the truncation boundary within {reach} of travel"
            )));
        }
    }
    Ok(())
}

/// Padded copies of the data, extended by the far field on `pad` nodes each side.
struct Padded {
    pad: usize,
    zeta: Vec<Complex64>,
    zeta_t: Vec<Complex64>,
    zeta_x: Vec<Complex64>,
    /// Trapezoid prefix integral of `zeta_t`.
    prefix: Vec<Complex64>,
}

impl Padded {
    fn new(f: &ComplexField, pad: usize) -> Self {
        let n = f.grid.n();
        let m = n + 2 * pad;
        let mut zeta = vec![f.far_field; m];
        let mut zeta_t = vec![Complex64::zero(); m];
        let mut zeta_x = vec![Complex64::zero(); m];
        zeta[pad..pad + n].copy_from_slice(&f.zeta);
        zeta_t[pad..pad + n].copy_from_slice(&f.zeta_t);
        zeta_x[pad..pad + n].copy_from_slice(&derivative(&f.grid, &f.zeta));
        let half_dx = 0.5 * f.grid.dx();
        let mut prefix = vec![Complex64::zero(); m];
        for j in 1..m {
            prefix[j] = prefix[j - 1] + (zeta_t[j - 1] + zeta_t[j]) * half_dx;
        }
        Self { pad, zeta, zeta_t, zeta_x, prefix }
    }

    /// Free wave after `k` aligned steps at real node `j`.
    fn free(&self, c: f64, j: usize, k: usize) -> (Complex64, Complex64) {
        let jj = j + self.pad;
        let (l, r) = (jj - k, jj + k);
        let z = (self.zeta[l] + self.zeta[r]) * 0.5 + (self.prefix[r] - self.prefix[l]) * (0.5 / c);
        let zt = (self.zeta_x[r] - self.zeta_x[l]) * (0.5 * c) + (self.zeta_t[l] + self.zeta_t[r]) * 0.5;
        (z, zt)
    }
}

/// The d'Alembert solution of `zeta_tt = c^2 zeta_xx` at time `f0.time + t`.
///
/// Grid-aligned times use node shifts only; other times fall back to cubic
/// interpolation of the traces.
pub fn free_wave(f0: &ComplexField, c: f64, t: f64) -> Result<ComplexField, CoreError> {
    if !(t >= 0.0) {
        return Err(config_err(format!("free-wave time {t} must be non-negative")));
    }
    let g = f0.grid;
    check_reach(f0, c * t)?;
    let shift = c * t / g.dx();
    let k = shift.round();
    if (shift - k).abs() <= 1e-9 {
        let k = k as usize;
        let padded = Padded::new(f0, k);
        let (zeta, zeta_t) = (0..g.n()).map(|j| padded.free(c, j, k)).unzip();
        return ComplexField::new(g, zeta, zeta_t, f0.far_field, f0.time + t);
    }
    let zx = derivative(&g, &f0.zeta);
    let zero = Complex64::zero();
    let mut zeta = Vec::with_capacity(g.n());
    let mut zeta_t = Vec::with_capacity(g.n());
    for x in g.nodes() {
        let (a, b) = (x - c * t, x + c * t);
        let za = interpolate_or(&g, &f0.zeta, a, f0.far_field);
        let zb = interpolate_or(&g, &f0.zeta, b, f0.far_field);
        let lo = a.max(g.x_min());
        let hi = b.min(g.x_max());
        let integral = if hi > lo { integrate(&g, &f0.zeta_t, lo, hi)? } else { zero };
        zeta.push((za + zb) * 0.5 + integral * (0.5 / c));
        let dxa = interpolate_or(&g, &zx, a, zero);
        let dxb = interpolate_or(&g, &zx, b, zero);
        let ta = interpolate_or(&g, &f0.zeta_t, a, zero);
        let tb = interpolate_or(&g, &f0.zeta_t, b, zero);
        zeta_t.push((dxb - dxa) * (0.5 * c) + (ta + tb) * 0.5);
    }
    ComplexField::new(g, zeta, zeta_t, f0.far_field, f0.time + t)
}

/// Running Duhamel integrals on a padded grid, advanced one aligned step at a time.
///
/// At level `k` it holds the double-trapezoid integral of the source over the
/// backward cone of every node (`cone`, and `cone_prev` for level `k - 1`) and
/// the trapezoid integrals along the two characteristics ending at the node.
/// Values are exact for every node whose cone stays inside the padding.
#[derive(Debug, Clone)]
struct Cone {
    dt: f64,
    dx: f64,
    cone_prev: Vec<Complex64>,
    cone: Vec<Complex64>,
    /// Along the trace arriving from the left (`x - c (t - tau)`).
    left: Vec<Complex64>,
    /// Along the trace arriving from the right.
    right: Vec<Complex64>,
    source: Vec<Complex64>,
}

fn at(v: &[Complex64], j: isize) -> Complex64 {
    if j < 0 || j as usize >= v.len() {
        Complex64::zero()
    } else {
        v[j as usize]
    }
}

fn smooth(f: &[Complex64], j: usize) -> Complex64 {
    let j = j as isize;
    (at(f, j - 1) + at(f, j + 1)) * 0.5 + at(f, j)
}

impl Cone {
    fn new(source0: Vec<Complex64>, dt: f64, dx: f64) -> Self {
        let m = source0.len();
        let zero = Complex64::zero();
        // Time symmetry of the cone gives the level -1 value from the source at level 0.
        let cone_prev = (0..m).map(|j| smooth(&source0, j) * (0.5 * dt * dx)).collect();
        Self { dt, dx, cone_prev, cone: alloc::vec![zero; m], left: alloc::vec![zero; m], right: alloc::vec![zero; m], source: source0 }
    }

    fn step(&mut self, next_source: Vec<Complex64>) {
        let m = self.cone.len();
        let (dt, dx) = (self.dt, self.dx);
        let f_prev = &self.source;
        let mut left = Vec::with_capacity(m);
        let mut right = Vec::with_capacity(m);
        let mut cone = Vec::with_capacity(m);
        for j in 0..m {
            let ji = j as isize;
            left.push(at(&self.left, ji - 1) + (at(f_prev, ji - 1) + next_source[j]) * (0.5 * dt));
            right.push(at(&self.right, ji + 1) + (at(f_prev, ji + 1) + next_source[j]) * (0.5 * dt));
            cone.push(at(&self.cone, ji - 1) + at(&self.cone, ji + 1) - self.cone_prev[j] + smooth(f_prev, j) * (dt * dx));
        }
        self.left = left;
        self.right = right;
        self.cone_prev = core::mem::replace(&mut self.cone, cone);
        self.source = next_source;
    }

    /// `(zeta, zeta_t)` corrections on the `n` real nodes behind `pad` padding nodes.
    fn corrections(&self, pad: usize, n: usize, c: f64) -> (Vec<Complex64>, Vec<Complex64>) {
        let scale = -0.5 / c;
        let zc = self.cone[pad..pad + n].iter().map(|v| v * scale).collect();
        let ztc = (pad..pad + n).map(|j| (self.left[j] + self.right[j]) * -0.5).collect();
        (zc, ztc)
    }
}

/// Duhamel corrections for every level, from sources on a grid padded by
/// `source.len() - 1` nodes each side.
#[cfg(test)]
fn duhamel_levels(
    source: &[Vec<Complex64>],
    n: usize,
    dt: f64,
    dx: f64,
    c: f64,
) -> (Vec<Vec<Complex64>>, Vec<Vec<Complex64>>) {
    let pad = source.len() - 1;
    let mut cone = Cone::new(source[0].clone(), dt, dx);
    let mut zc = Vec::new();
    let mut ztc = Vec::new();
    let (a, b) = cone.corrections(pad, n, c);
    zc.push(a);
    ztc.push(b);
    for f in &source[1..] {
        cone.step(f.clone());
        let (a, b) = cone.corrections(pad, n, c);
        zc.push(a);
        ztc.push(b);
    }
    (zc, ztc)
}

/// Duhamel corrections at the last snapshot of `history`: `-(1/2c)` times the
/// cone integral of the source for `zeta`, `-1/2` times the two characteristic
/// line integrals for `zeta_t`.
///
/// `history` must hold consecutive grid-aligned snapshots starting at the
/// time the free wave is measured from.
pub fn duhamel_apply<P: Potential + ?Sized>(
    history: &[ComplexField],
    p: &P,
    c: f64,
) -> Result<(Vec<Complex64>, Vec<Complex64>), CoreError> {
    let first = history.first().ok_or_else(|| CoreError::Data("empty history".into()))?;
    let g = first.grid;
    let dt = g.dx() / c;
    for (k, h) in history.iter().enumerate() {
        let expect = first.time + k as f64 * dt;
        if h.grid != g || (h.time - expect).abs() > 1e-9 * dt.max(expect.abs()) {
            return Err(CoreError::Data(format!(
                "history snapshot {k} at t = {} does not continue the grid-aligned sequence (expected {expect})",
                h.time
            )));
        }
    }
    let pad = history.len() - 1;
    let mut cone = Cone::new(padded_source(&first.zeta, first.far_field, pad, p)?, dt, g.dx());
    for h in &history[1..] {
        cone.step(padded_source(&h.zeta, h.far_field, pad, p)?);
    }
    Ok(cone.corrections(pad, g.n(), c))
}

fn padded_source<P: Potential + ?Sized>(
    zeta: &[Complex64],
    far: Complex64,
    pad: usize,
    p: &P,
) -> Result<Vec<Complex64>, CoreError> {
    let n = zeta.len();
    let mut out = vec![source_term(p, far)?; n + 2 * pad];
    for (o, &z) in out[pad..pad + n].iter_mut().zip(zeta) {
        *o = source_term(p, z)?;
    }
    Ok(out)
}

/// Global strong-form solver state: the free wave of the initial data and
/// the Duhamel integrals accumulated up to the current level.
struct StrongForm<'a> {
    data: Padded,
    c: f64,
    n: usize,
    cone: Cone,
    far: Complex64,
    grid: &'a Grid1D,
}

impl StrongForm<'_> {
    fn free(&self, k: usize) -> (Vec<Complex64>, Vec<Complex64>) {
        (0..self.n).map(|j| self.data.free(self.c, j, k)).unzip()
    }
}

/// Picard iteration for levels `start + 1 ..= start + steps`, all earlier
/// levels fixed. Advances `form.cone` past the window on success.
fn picard_window<P: Potential + ?Sized>(
    form: &mut StrongForm<'_>,
    current: &ComplexField,
    start: usize,
    p: &P,
    cfg: &SemilinearConfig,
    steps: usize,
) -> Result<(Vec<Vec<Complex64>>, Vec<Vec<Complex64>>, PicardTrace), CoreError> {
    let g = form.grid;
    let pad = form.data.pad;
    check_reach(current, cfg.c * steps as f64 * cfg.dt)?;
    let (free_z, free_zt): (Vec<_>, Vec<_>) = (1..=steps).map(|k| form.free(start + k)).unzip();
    let mut cur_z = free_z.clone();
    let mut cur_zt = free_zt.clone();
    let mut diffs = Vec::new();
    let mut converged = false;
    for _ in 0..cfg.picard_max {
        let mut cone = form.cone.clone();
        let mut diff = 0.0f64;
        for k in 0..steps {
            cone.step(padded_source(&cur_z[k], form.far, pad, p)?);
            let (zc, ztc) = cone.corrections(pad, form.n, cfg.c);
            let nz: Vec<Complex64> = free_z[k].iter().zip(&zc).map(|(a, b)| a + b).collect();
            let nzt: Vec<Complex64> = free_zt[k].iter().zip(&ztc).map(|(a, b)| a + b).collect();
            diff = diff.max(metric_distance_parts(g, (&nz, &nzt), (&cur_z[k], &cur_zt[k]), p));
            cur_z[k] = nz;
            cur_zt[k] = nzt;
        }
        diffs.push(diff);
        if diff < cfg.picard_tol {
            converged = true;
            break;
        }
    }
    let trace = PicardTrace {
        window_start: current.time,
        steps,
        iterate_count: diffs.len(),
        diff_norms: diffs,
        converged,
    };
    if !converged {
        return Err(CoreError::NonContraction { diff_norms: trace.diff_norms });
    }
    // The last sweep integrated the sources of the previous iterate; redo it with the converged one.
    let mut cone = form.cone.clone();
    for z in &cur_z {
        cone.step(padded_source(z, form.far, pad, p)?);
    }
    form.cone = cone;
    Ok((cur_z, cur_zt, trace))
}

/// Solves up to `t_final` (relative to `f0.time`), window by window.
pub fn picard_solve<P: Potential + ?Sized>(
    f0: &ComplexField,
    p: &P,
    cfg: &SemilinearConfig,
    t_final: f64,
) -> Result<SemilinearRun, CoreError> {
    picard_solve_observed(f0, p, cfg, t_final, |_, _| Ok(()))
}

/// [`picard_solve`] calling `observer` on every time level, starting with `f0`,
/// together with the traces of the windows finished so far.
///
/// Every level is the free wave of `f0` plus the Duhamel integral over the
/// whole history since `f0`; windows only decide which levels are iterated
/// together while the earlier ones stay fixed.
pub fn picard_solve_observed<P, O>(
    f0: &ComplexField,
    p: &P,
    cfg: &SemilinearConfig,
    t_final: f64,
    mut observer: O,
) -> Result<SemilinearRun, CoreError>
where
    P: Potential + ?Sized,
    O: FnMut(&ComplexField, &[PicardTrace]) -> Result<(), CoreError>,
{
    let g = f0.grid;
    cfg.check(&g)?;
    f0.check()?;
    let w_far = p.d1(f0.far_field.norm());
    if w_far.abs() > 1e-10 {
        return Err(config_err(format!(
            "far field |zeta*| = {} is not a critical point of W0 (W0' = {w_far:e})",
            f0.far_field.norm()
        )));
    }
    let total = t_final / cfg.dt;
    let total_steps = total.round();
    if !(t_final >= 0.0) || (total - total_steps).abs() > 1e-9 * total.max(1.0) {
        return Err(config_err(format!(
            "t_final = {t_final} is not a whole number of grid-aligned steps dt = {}",
            cfg.dt
        )));
    }
    let total_steps = total_steps as usize;
    let per_window = cfg.steps_per_window();
    check_reach(f0, cfg.c * t_final)?;

    let pad = total_steps;
    let mut form = StrongForm {
        data: Padded::new(f0, pad),
        c: cfg.c,
        n: g.n(),
        cone: Cone::new(padded_source(&f0.zeta, f0.far_field, pad, p)?, cfg.dt, g.dx()),
        far: f0.far_field,
        grid: &g,
    };
    let mut state = f0.clone();
    let mut traces = Vec::new();
    observer(&state, &traces)?;
    let mut done = 0usize;
    while done < total_steps {
        let steps = per_window.min(total_steps - done);
        let (zs, zts, trace) = picard_window(&mut form, &state, done, p, cfg, steps)?;
        traces.push(trace);
        for (k, (z, zt)) in zs.into_iter().zip(zts).enumerate() {
            let time = f0.time + (done + k + 1) as f64 * cfg.dt;
            let level = ComplexField::new(g, z, zt, f0.far_field, time)?;
            observer(&level, &traces)?;
            state = level;
        }
        done += steps;
    }
    Ok(SemilinearRun { final_state: state, traces })
}
