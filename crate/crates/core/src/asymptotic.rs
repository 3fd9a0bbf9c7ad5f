//! Slow-time reduction of the wave system to the two-component
//! Hunter–Saxton system.
//!
//! Data are embedded as `psi = psi0 + eps u(eps t, x - c0 t)` and
//! `s = s0 + eps r(eps t, x - c0 t)` with `rho = r_x`. The cubic part of
//! the expanded Lagrangian is
//! `a u_t u_x + b u u_x^2 + d r_t r_x + e u r_x^2` with
//! `a = s0^2 c0`, `b = s0^2 (c c')0`, `d = c0`, `e = (c c')0`, and its
//! Euler–Lagrange equations become the standard system after
//! `T = (b/a) tau`, `rho_std = sqrt(e/b) rho`, i.e. `T = c'(psi0) tau`
//! and `rho_std = rho / s0`.
//!
//! A compactly supported wave leaves the region ahead of it undisturbed, so
//! the comparison uses the gauge `u(+inf) = 0`.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by std methods when a dependency links std
use num_traits::Float;

use crate::coefficients::{Potential, WaveSpeed};
use crate::diagnostics::fit_order;
use crate::error::{config_err, domain_err, CoreError};
use crate::field::{interpolate, l2_norm, Grid1D};
use crate::hs2::{self, Gauge, MarkerState};
use crate::profiles::Shape;
use crate::quasilinear::{self, PolarState, QuasilinearConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticConfig {
    pub psi0: f64,
    pub s0: f64,
    pub epsilon: f64,
    pub wave_speed: WaveSpeed,
    pub u_init: Shape,
    pub rho_init: Shape,
}

impl AsymptoticConfig {
    pub fn c0(&self) -> f64 {
        self.wave_speed.c(self.psi0)
    }

    pub fn cprime0(&self) -> f64 {
        self.wave_speed.speed(self.psi0).1
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self { epsilon, ..*self }
    }

    /// Union of the supports of both initial profiles.
    pub fn support(&self) -> (f64, f64) {
        let (a, b) = self.u_init.support();
        let (c, d) = self.rho_init.support();
        (a.min(c), b.max(d))
    }

    /// Checks the reduction is well posed for this potential.
    pub fn validate<P: Potential + ?Sized>(&self, p: &P) -> Result<(), CoreError> {
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(config_err(format!("epsilon must be a non-negative number, got {}", self.epsilon)));
        }
        if !(self.s0 > 0.0 && self.s0 < 1.0) {
            return Err(config_err(format!("s0 = {} must lie in (0, 1)", self.s0)));
        }
        match p.flat_point() {
            Some(f) if (f - self.s0).abs() <= 1e-12 => {}
            Some(f) => return Err(config_err(format!("potential {} has its flat point at {f}, not at s0 = {}", p.name(), self.s0))),
            None => return Err(config_err(format!("potential {} has no flat point; the cubic term would survive", p.name()))),
        }
        if self.cprime0().abs() < 1e-12 {
            return Err(config_err(format!("c'(psi0) vanishes at psi0 = {}; the reduction degenerates", self.psi0)));
        }
        let (a, b) = self.rho_init.support();
        let mass = crate::coefficients::simpson(|y| self.rho_init.value(y), a, b, 4096);
        let scale = crate::coefficients::simpson(|y| self.rho_init.value(y).abs(), a, b, 4096);
        if mass.abs() > 1e-10 * (1.0 + scale) {
            return Err(config_err(format!(
                "rho_init has mass {mass:e}; it must integrate to zero so that s returns to s0 on both sides"
            )));
        }
        Ok(())
    }
}

/// Embedded initial state on `grid` at `t = 0`.
pub fn embed(cfg: &AsymptoticConfig, grid: Grid1D) -> Result<PolarState, CoreError> {
    let (lo, hi) = cfg.support();
    if lo <= grid.x_min() || hi >= grid.x_max() {
        return Err(config_err(format!(
            "initial profiles on [{lo}, {hi}] are not inside the grid [{}, {}]",
            grid.x_min(),
            grid.x_max()
        )));
    }
    let eps = cfg.epsilon;
    let c0 = cfg.c0();
    let xs = grid.nodes();
    let r = cfg.rho_init.antiderivative(&xs);
    let psi: Vec<f64> = xs.iter().map(|&x| cfg.psi0 + eps * cfg.u_init.value(x)).collect();
    let s: Vec<f64> = r.iter().map(|&r| cfg.s0 + eps * r).collect();
    if let Some((i, &bad)) = s.iter().enumerate().find(|(_, &v)| !(v > 0.0 && v < 1.0)) {
        return Err(config_err(format!("embedded order parameter s = {bad} at x = {} leaves (0, 1)", xs[i])));
    }
    let dpsi: Vec<f64> = xs.iter().map(|&x| eps * cfg.u_init.derivative(x)).collect();
    let ds: Vec<f64> = xs.iter().map(|&x| eps * cfg.rho_init.value(x)).collect();
    let psi_t = dpsi.iter().map(|d| -c0 * d).collect();
    let s_t = ds.iter().map(|d| -c0 * d).collect();
    PolarState::from_jets(grid, psi, s, psi_t, s_t, dpsi, ds, &cfg.wave_speed, (cfg.psi0, cfg.s0), 0.0)
}

/// `(u, rho)` on the frame coordinates `ys` at the state's time.
///
/// `u` comes from `psi` and `rho` from the transported gradient `r = c s_x`,
/// both read at `y + c0 t` by cubic interpolation.
pub fn extract(state: &PolarState, cfg: &AsymptoticConfig, ys: &[f64]) -> Result<(Vec<f64>, Vec<f64>), CoreError> {
    if !(cfg.epsilon > 0.0) {
        return Err(config_err("extraction needs epsilon > 0"));
    }
    let shift = cfg.c0() * state.time;
    let g = &state.grid;
    let ws = &cfg.wave_speed;
    let s_x: Vec<f64> = state.r.iter().zip(&state.psi).map(|(r, &p)| r / ws.c(p)).collect();
    let mut u = Vec::with_capacity(ys.len());
    let mut rho = Vec::with_capacity(ys.len());
    for &y in ys {
        let x = y + shift;
        if !g.contains(x) {
            return Err(domain_err(format!("frame point y = {y} maps to x = {x}, outside the grid")));
        }
        u.push((interpolate(g, &state.psi, x)? - cfg.psi0) / cfg.epsilon);
        rho.push(interpolate(g, &s_x, x)? / cfg.epsilon);
    }
    Ok((u, rho))
}

/// Coefficients of `a u_t u_x + b u u_x^2 + d r_t r_x + e u r_x^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagrangianCoefficients {
    pub a: f64,
    pub b: f64,
    pub d: f64,
    pub e: f64,
}

/// `T = time_scale * tau`, `rho_std = rho_scale * rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RescalingMap {
    pub time_scale: f64,
    pub rho_scale: f64,
}

impl LagrangianCoefficients {
    pub const UNIT: Self = Self { a: 1.0, b: 1.0, d: 1.0, e: 1.0 };

    pub fn from_config(cfg: &AsymptoticConfig) -> Self {
        let (c0, cp) = cfg.wave_speed.speed(cfg.psi0);
        let s2 = cfg.s0 * cfg.s0;
        Self { a: s2 * c0, b: s2 * c0 * cp, d: c0, e: c0 * cp }
    }

    /// Map to the standard system. Needs `b/a = e/d` and `e/b > 0`.
    pub fn standardization(&self) -> Result<RescalingMap, CoreError> {
        let Self { a, b, d, e } = *self;
        if a == 0.0 || d == 0.0 || b == 0.0 {
            return Err(config_err(format!("degenerate Lagrangian coefficients {self:?}")));
        }
        let ts = b / a;
        if (e / d - ts).abs() > 1e-12 * ts.abs().max(1.0) {
            return Err(config_err(format!("b/a = {ts} differs from e/d = {}; no rescaling to the standard form", e / d)));
        }
        if !(e / b > 0.0) {
            return Err(config_err(format!("e/b = {} must be positive", e / b)));
        }
        Ok(RescalingMap { time_scale: ts, rho_scale: (e / b).sqrt() })
    }
}

pub fn rescaling_map(cfg: &AsymptoticConfig) -> Result<RescalingMap, CoreError> {
    if !(cfg.s0 > 0.0) {
        return Err(config_err(format!("s0 = {} must be positive", cfg.s0)));
    }
    LagrangianCoefficients::from_config(cfg).standardization()
}

/// Samples on a uniform space-time grid, row `i` at time `t0 + i dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    pub nt: usize,
    pub nx: usize,
    pub dt: f64,
    pub dx: f64,
    pub values: Vec<f64>,
}

impl SpaceTimeField {
    pub fn from_fn(nt: usize, nx: usize, dt: f64, dx: f64, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(nt * nx);
        for i in 0..nt {
            for j in 0..nx {
                values.push(f(i, j));
            }
        }
        Self { nt, nx, dt, dx, values }
    }

    pub fn zeros_like(&self) -> Self {
        Self { values: alloc::vec![0.0; self.values.len()], ..*self }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.nx + j]
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.nx + j] += v;
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.nx + j] = v;
    }
}

/// Both residual forms on the nodes at least two cells from the edge.
#[derive(Debug, Clone, PartialEq)]
pub struct ElResidual {
    /// `-dS/du / (dt dx)` of the box-discretized action.
    pub action_u: SpaceTimeField,
    pub action_r: SpaceTimeField,
    /// `2a u_tx + 2b (u u_x)_x - b u_x^2 - e r_x^2` by centred differences.
    pub strong_u: SpaceTimeField,
    /// `2d r_tx + 2e (u r_x)_x` by centred differences.
    pub strong_r: SpaceTimeField,
}

impl ElResidual {
    fn norm(&self, f: impl Fn(usize, usize) -> f64) -> f64 {
        let (nt, nx) = (self.strong_u.nt, self.strong_u.nx);
        let mut acc = 0.0;
        for i in 2..nt.saturating_sub(2) {
            for j in 2..nx.saturating_sub(2) {
                acc += f(i, j).powi(2);
            }
        }
        (acc * self.strong_u.dt * self.strong_u.dx).sqrt()
    }

    /// Discrete space-time L2 norm of the strong-form residual, both components.
    pub fn strong_norm(&self) -> f64 {
        self.norm(|i, j| self.strong_u.at(i, j).hypot(self.strong_r.at(i, j)))
    }

    pub fn action_norm(&self) -> f64 {
        self.norm(|i, j| self.action_u.at(i, j).hypot(self.action_r.at(i, j)))
    }

    /// L2 norm of the difference between the two forms.
    pub fn diff_norm(&self) -> f64 {
        self.norm(|i, j| {
            (self.action_u.at(i, j) - self.strong_u.at(i, j)).hypot(self.action_r.at(i, j) - self.strong_r.at(i, j))
        })
    }
}

/// Action gradient and strong-form residual of the cubic Lagrangian.
///
/// The action is a box scheme: on each cell the fields are the corner
/// averages and the derivatives are averaged one-sided differences. Its
/// gradient is taken analytically with respect to every nodal value.
pub fn discrete_el_residual(
    k: &LagrangianCoefficients,
    u: &SpaceTimeField,
    r: &SpaceTimeField,
) -> Result<ElResidual, CoreError> {
    if u.nt != r.nt || u.nx != r.nx || u.dt != r.dt || u.dx != r.dx {
        return Err(CoreError::Data("u and r must share one space-time grid".into()));
    }
    if u.nt < 5 || u.nx < 5 {
        return Err(CoreError::Data("space-time grid needs at least 5 x 5 nodes".into()));
    }
    let (nt, nx, dt, dx) = (u.nt, u.nx, u.dt, u.dx);
    let mut gu = u.zeros_like();
    let mut gr = u.zeros_like();
    // Corner order: (0,0), (1,0), (0,1), (1,1) as (time, space) offsets.
    let sgn_t = [-1.0, 1.0, -1.0, 1.0];
    let sgn_x = [-1.0, -1.0, 1.0, 1.0];
    let offs = [(0, 0), (1, 0), (0, 1), (1, 1)];
    for i in 0..nt - 1 {
        for j in 0..nx - 1 {
            let cu: [f64; 4] = core::array::from_fn(|c| u.at(i + offs[c].0, j + offs[c].1));
            let cr: [f64; 4] = core::array::from_fn(|c| r.at(i + offs[c].0, j + offs[c].1));
            let avg = |v: &[f64; 4]| 0.25 * (v[0] + v[1] + v[2] + v[3]);
            let dt_of = |v: &[f64; 4]| (v[1] + v[3] - v[0] - v[2]) / (2.0 * dt);
            let dx_of = |v: &[f64; 4]| (v[2] + v[3] - v[0] - v[1]) / (2.0 * dx);
            let (uu, ut, ux) = (avg(&cu), dt_of(&cu), dx_of(&cu));
            let (rt, rx) = (dt_of(&cr), dx_of(&cr));
            let l_ut = k.a * ux;
            let l_ux = k.a * ut + 2.0 * k.b * uu * ux;
            let l_u = k.b * ux * ux + k.e * rx * rx;
            let l_rt = k.d * rx;
            let l_rx = k.d * rt + 2.0 * k.e * uu * rx;
            for c in 0..4 {
                let (ii, jj) = (i + offs[c].0, j + offs[c].1);
                let du = l_ut * sgn_t[c] / (2.0 * dt) + l_ux * sgn_x[c] / (2.0 * dx) + 0.25 * l_u;
                let dr = l_rt * sgn_t[c] / (2.0 * dt) + l_rx * sgn_x[c] / (2.0 * dx);
                // dS = dt dx dL; store -dS / (dt dx).
                gu.add(ii, jj, -du);
                gr.add(ii, jj, -dr);
            }
        }
    }
    let mut su = u.zeros_like();
    let mut sr = u.zeros_like();
    let cx = |f: &SpaceTimeField, i: usize, j: usize| (f.at(i, j + 1) - f.at(i, j - 1)) / (2.0 * dx);
    let ctx = |f: &SpaceTimeField, i: usize, j: usize| {
        (f.at(i + 1, j + 1) - f.at(i + 1, j - 1) - f.at(i - 1, j + 1) + f.at(i - 1, j - 1)) / (4.0 * dt * dx)
    };
    for i in 0..nt {
        for j in 0..nx {
            let interior = i >= 2 && i + 2 < nt && j >= 2 && j + 2 < nx;
            if !interior {
                gu.set(i, j, 0.0);
                gr.set(i, j, 0.0);
                continue;
            }
            let flux = |jj: usize, f: &SpaceTimeField| u.at(i, jj) * cx(f, i, jj);
            let d_uux = (flux(j + 1, u) - flux(j - 1, u)) / (2.0 * dx);
            let d_urx = (flux(j + 1, r) - flux(j - 1, r)) / (2.0 * dx);
            let (ux, rx) = (cx(u, i, j), cx(r, i, j));
            su.set(i, j, 2.0 * k.a * ctx(u, i, j) + 2.0 * k.b * d_uux - k.b * ux * ux - k.e * rx * rx);
            sr.set(i, j, 2.0 * k.d * ctx(r, i, j) + 2.0 * k.e * d_urx);
        }
    }
    Ok(ElResidual { action_u: gu, action_r: gr, strong_u: su, strong_r: sr })
}

/// Discretization of the convergence study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyNumerics {
    /// Grid spacing of the full-system runs.
    pub dx: f64,
    pub cfl: f64,
    /// Extra room beyond the fastest possible signal.
    pub pad: f64,
    pub markers: usize,
    pub marker_dt: f64,
    /// Number of comparison points on the frame window.
    pub compare_points: usize,
}

impl Default for StudyNumerics {
    fn default() -> Self {
        Self { dx: 0.05, cfl: 0.8, pad: 2.0, markers: 2001, marker_dt: 1e-3, compare_points: 801 }
    }
}

/// Reference solution of the standard system on the comparison window.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub window: Grid1D,
    /// Standardized slow time reached.
    pub time: f64,
    pub u: Vec<f64>,
    /// Standardized density.
    pub rho: Vec<f64>,
}

/// Solves the standard system from the standardized initial data to
/// `T = time_scale * t_slow`, running backwards through the reversal
/// `(T, u, rho) -> (-T, -u, rho)` when `time_scale < 0`.
pub fn hs2_reference(cfg: &AsymptoticConfig, t_slow: f64, num: &StudyNumerics) -> Result<Reference, CoreError> {
    let map = rescaling_map(cfg)?;
    let t_std = map.time_scale * t_slow;
    let sign = if t_std < 0.0 { -1.0 } else { 1.0 };
    let (lo, hi) = cfg.support();
    let (u0, r0) = (cfg.u_init, cfg.rho_init);
    let markers = MarkerState::over_support(
        (lo, hi),
        num.markers,
        |y| sign * u0.value(y),
        |y| sign * u0.derivative(y),
        |y| map.rho_scale * r0.value(y),
    )?;
    let run = hs2::evolve(&markers, t_std.abs(), num.marker_dt, Gauge::RightDecay, &[])?;
    let mut end = run.into_result()?;
    end.u.iter_mut().for_each(|v| *v *= sign);
    end.alpha.iter_mut().for_each(|v| *v *= sign);
    let window = Grid1D::new(lo, hi, num.compare_points)?;
    let (u, rho) = hs2::sample_eulerian(&end, &window)?;
    Ok(Reference { window, time: t_std, u, rho })
}

#[derive(Debug, Clone, PartialEq)]
pub enum RowStatus {
    Ok,
    Failed(CoreError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub epsilon: f64,
    pub fast_time: f64,
    pub grid_points: usize,
    /// L2 distance of the standardized `u` on the window.
    pub error_u: f64,
    pub error_rho: f64,
    /// `sqrt(error_u^2 + error_rho^2)`.
    pub error: f64,
    pub status: RowStatus,
}

impl StudyRow {
    fn failed(epsilon: f64, fast_time: f64, e: CoreError) -> Self {
        Self {
            epsilon,
            fast_time,
            grid_points: 0,
            error_u: f64::NAN,
            error_rho: f64::NAN,
            error: f64::NAN,
            status: RowStatus::Failed(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyTable {
    pub t_slow: f64,
    pub map: RescalingMap,
    pub gauge: Gauge,
    pub rows: Vec<StudyRow>,
    /// Slope of `ln error` against `ln eps`, when every row succeeded with a
    /// positive error.
    pub order: Option<f64>,
}

impl StudyTable {
    pub fn strictly_decreasing(&self) -> bool {
        self.rows.iter().all(|r| r.status == RowStatus::Ok) && self.rows.windows(2).all(|w| w[1].error < w[0].error)
    }
}

/// Full-system run for one `eps`, compared against `reference`.
pub fn run_epsilon<P: Potential + ?Sized>(
    base: &AsymptoticConfig,
    p: &P,
    epsilon: f64,
    t_slow: f64,
    num: &StudyNumerics,
    reference: &Reference,
) -> StudyRow {
    let fast_time = if epsilon > 0.0 { t_slow / epsilon } else { f64::INFINITY };
    let result = (|| -> Result<StudyRow, CoreError> {
        let cfg = base.with_epsilon(epsilon);
        cfg.validate(p)?;
        if !(epsilon > 0.0) {
            return Err(config_err("the study needs epsilon > 0"));
        }
        let map = rescaling_map(&cfg)?;
        let (lo, hi) = cfg.support();
        let reach = cfg.wave_speed.c_max() * fast_time + num.pad;
        let (x_min, x_max) = (lo - reach, hi + reach);
        let n = ((x_max - x_min) / num.dx).ceil() as usize + 1;
        let grid = Grid1D::new(x_min, x_max, n)?;
        let u0 = embed(&cfg, grid)?;
        let qcfg = QuasilinearConfig::with_cfl(&grid, &cfg.wave_speed, num.cfl);
        let run = quasilinear::evolve(&u0, p, &cfg.wave_speed, &qcfg, fast_time, |_| Ok(()))?;
        let ys = reference.window.nodes();
        let (u, rho) = extract(&run.final_state, &cfg, &ys)?;
        let w = &reference.window;
        let du: Vec<f64> = u.iter().zip(&reference.u).map(|(a, b)| a - b).collect();
        let dr: Vec<f64> = rho.iter().zip(&reference.rho).map(|(a, b)| map.rho_scale * a - b).collect();
        let (error_u, error_rho) = (l2_norm(w, &du), l2_norm(w, &dr));
        Ok(StudyRow {
            epsilon,
            fast_time,
            grid_points: n,
            error_u,
            error_rho,
            error: error_u.hypot(error_rho),
            status: RowStatus::Ok,
        })
    })();
    result.unwrap_or_else(|e| StudyRow::failed(epsilon, fast_time, e))
}

/// Collects rows (in the order of the sweep) into a table with the fitted order.
pub fn assemble(cfg: &AsymptoticConfig, t_slow: f64, rows: Vec<StudyRow>) -> Result<StudyTable, CoreError> {
    let map = rescaling_map(cfg)?;
    let usable = rows.iter().all(|r| r.status == RowStatus::Ok && r.error > 0.0);
    let order = if usable {
        fit_order(&rows.iter().map(|r| (r.epsilon, r.error)).collect::<Vec<_>>()).ok()
    } else {
        None
    };
    Ok(StudyTable { t_slow, map, gauge: Gauge::RightDecay, rows, order })
}

/// Runs the sweep sequentially. `epsilons` should be decreasing.
pub fn convergence_study<P: Potential + ?Sized>(
    base: &AsymptoticConfig,
    p: &P,
    epsilons: &[f64],
    t_slow: f64,
    num: &StudyNumerics,
) -> Result<StudyTable, CoreError> {
    base.with_epsilon(epsilons.first().copied().unwrap_or(1.0)).validate(p)?;
    let reference = hs2_reference(base, t_slow, num)?;
    let rows = epsilons.iter().map(|&e| run_epsilon(base, p, e, t_slow, num, &reference)).collect();
    assemble(base, t_slow, rows)
}
