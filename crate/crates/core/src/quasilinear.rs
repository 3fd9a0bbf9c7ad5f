//! The full system in first-order form `U_t - c(psi) A U_x = F(U)` with
//! `U = (psi, s, phi, v, omega, r)`, solved by backward characteristics.
//!
//! `A` couples `(phi, omega)` and `(v, r)` with eigenvalues -1, 0, 1, so the
//! Riemann variables `phi +- omega` and `v +- r` are transported at `-+c`
//! while `psi` and `s` are only driven by the source. Each window is solved
//! by an outer fixed point over whole trajectories: freeze a trajectory
//! `U_hat`, solve the linear transport problem with `c(psi_hat)` and
//! `F(U_hat)`, repeat.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by std methods when a dependency links std
use num_traits::Float;

use crate::coefficients::{Potential, WaveSpeed};
use crate::diagnostics::energy_density_polar;
use crate::error::{config_err, domain_err, CoreError};
use crate::field::{derivative, integrate_all, sup_norm, ComplexField, Grid1D, Stencil};
use crate::BOUNDARY_TOL;

/// Sampled `(psi, s, phi, v, omega, r)` with `phi = psi_t`, `v = s_t`,
/// `omega = c(psi) psi_x`, `r = c(psi) s_x`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarState {
    pub grid: Grid1D,
    pub psi: Vec<f64>,
    pub s: Vec<f64>,
    pub phi: Vec<f64>,
    pub v: Vec<f64>,
    pub omega: Vec<f64>,
    pub r: Vec<f64>,
    pub time: f64,
    /// `(psi_inf, s_inf)`.
    pub far_field: (f64, f64),
}

impl PolarState {
    /// Builds the state from `psi, s` and their time derivatives; `omega` and `r`
    /// come from centred differences of `psi` and `s` times `c(psi)`.
    pub fn from_primitive(
        grid: Grid1D,
        psi: Vec<f64>,
        s: Vec<f64>,
        psi_t: Vec<f64>,
        s_t: Vec<f64>,
        ws: &WaveSpeed,
        far_field: (f64, f64),
        time: f64,
    ) -> Result<Self, CoreError> {
        let n = grid.n();
        if [psi.len(), s.len(), psi_t.len(), s_t.len()].iter().any(|&l| l != n) {
            return Err(CoreError::Data(format!("polar fields must all have {n} samples")));
        }
        let dpsi = derivative(&grid, &psi);
        let ds = derivative(&grid, &s);
        Self::from_jets(grid, psi, s, psi_t, s_t, dpsi, ds, ws, far_field, time)
    }

    /// Like [`PolarState::from_primitive`] with known spatial derivatives.
    #[allow(clippy::too_many_arguments)]
    pub fn from_jets(
        grid: Grid1D,
        psi: Vec<f64>,
        s: Vec<f64>,
        psi_t: Vec<f64>,
        s_t: Vec<f64>,
        dpsi: Vec<f64>,
        ds: Vec<f64>,
        ws: &WaveSpeed,
        far_field: (f64, f64),
        time: f64,
    ) -> Result<Self, CoreError> {
        let n = grid.n();
        if [psi.len(), s.len(), psi_t.len(), s_t.len(), dpsi.len(), ds.len()].iter().any(|&l| l != n) {
            return Err(CoreError::Data(format!("polar fields must all have {n} samples")));
        }
        let c: Vec<f64> = psi.iter().map(|&p| ws.c(p)).collect();
        let omega = dpsi.iter().zip(&c).map(|(d, c)| d * c).collect();
        let r = ds.iter().zip(&c).map(|(d, c)| d * c).collect();
        let state = Self { grid, psi, s, phi: psi_t, v: s_t, omega, r, time, far_field };
        state.check()?;
        Ok(state)
    }

    /// Positivity of `s`, finiteness and far-field boundary values.
    pub fn check(&self) -> Result<(), CoreError> {
        for (i, &s) in self.s.iter().enumerate() {
            if !(s > 0.0) {
                return Err(CoreError::Degeneracy { s, x: self.grid.x(i) });
            }
        }
        let fields = self.fields();
        if fields.iter().any(|f| f.iter().any(|v| !v.is_finite())) {
            return Err(CoreError::Data("non-finite polar sample".into()));
        }
        let far = self.far_vector();
        for &i in &[0, self.grid.n() - 1] {
            for (k, f) in fields.iter().enumerate() {
                if (f[i] - far[k]).abs() > BOUNDARY_TOL {
                    return Err(domain_err(format!(
                        "perturbation reaches the boundary at x = {} (component {k} off by {:e})",
                        self.grid.x(i),
                        (f[i] - far[k]).abs()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn fields(&self) -> [&[f64]; 6] {
        [&self.psi, &self.s, &self.phi, &self.v, &self.omega, &self.r]
    }

    pub fn far_vector(&self) -> [f64; 6] {
        [self.far_field.0, self.far_field.1, 0.0, 0.0, 0.0, 0.0]
    }

    pub fn point(&self, i: usize) -> [f64; 6] {
        [self.psi[i], self.s[i], self.phi[i], self.v[i], self.omega[i], self.r[i]]
    }

    /// A constant state equal to the far field.
    pub fn constant(grid: Grid1D, psi: f64, s: f64, time: f64) -> Result<Self, CoreError> {
        let n = grid.n();
        let z = alloc::vec![0.0; n];
        Self::from_primitive(
            grid,
            alloc::vec![psi; n],
            alloc::vec![s; n],
            z.clone(),
            z,
            &WaveSpeed::new(1.0, 1.0)?,
            (psi, s),
            time,
        )
    }

    /// `zeta = s e^{i psi}`, `zeta_t = (v + i s phi) e^{i psi}`.
    pub fn to_complex(&self) -> Result<ComplexField, CoreError> {
        let n = self.grid.n();
        let mut zeta = Vec::with_capacity(n);
        let mut zeta_t = Vec::with_capacity(n);
        for i in 0..n {
            let rot = Complex64::from_polar(1.0, self.psi[i]);
            zeta.push(rot * self.s[i]);
            zeta_t.push(rot * Complex64::new(self.v[i], self.s[i] * self.phi[i]));
        }
        let far = Complex64::from_polar(self.far_field.1, self.far_field.0);
        ComplexField::new(self.grid, zeta, zeta_t, far, self.time)
    }

    /// `max_k sup |U_k| + max_k sup |D_x U_k|`.
    pub fn w1_inf_norm(&self) -> f64 {
        let mut sup = 0.0f64;
        let mut dsup = 0.0f64;
        for f in self.fields() {
            sup = sup.max(sup_norm(f));
            dsup = dsup.max(sup_norm(&derivative(&self.grid, f)));
        }
        sup + dsup
    }

    pub fn min_s(&self) -> f64 {
        self.s.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn total_energy<P: Potential + ?Sized>(&self, p: &P, ws: &WaveSpeed) -> f64 {
        integrate_all(&self.grid, &energy_density_polar(self, p, ws).0)
    }

    /// Nodes where the state differs from the far field by more than the boundary tolerance.
    pub fn perturbation_support(&self) -> Option<(f64, f64)> {
        let far = self.far_vector();
        let fields = self.fields();
        let active = |i: usize| fields.iter().zip(&far).any(|(f, v)| (f[i] - v).abs() > BOUNDARY_TOL);
        let n = self.grid.n();
        let first = (0..n).find(|&i| active(i))?;
        let last = (0..n).rev().find(|&i| active(i))?;
        Some((self.grid.x(first), self.grid.x(last)))
    }
}

/// Right side `F(U)` of the first-order system (transport terms excluded).
pub fn rhs_f<P: Potential + ?Sized>(u: &[f64; 6], p: &P, ws: &WaveSpeed) -> Result<[f64; 6], CoreError> {
    let [psi, s, phi, v, om, r] = *u;
    if !(s > 0.0) {
        return Err(CoreError::Degeneracy { s, x: f64::NAN });
    }
    let (c, cp) = ws.speed(psi);
    let q = cp / c;
    Ok([
        phi,
        v,
        -2.0 / s * (phi * v - om * r) - q * r * r / (s * s),
        s * (phi * phi - om * om) + q * om * r - p.d1(s),
        q * phi * om,
        q * phi * r,
    ])
}

/// Characteristic families: `Plus` carries `phi + omega`, `v + r` and has
/// `dx/dt = -c`; `Minus` carries `phi - omega`, `v - r` with `dx/dt = +c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Plus,
    Minus,
}

impl Family {
    /// Sign of the backward displacement: the foot of a `Plus` curve lies to the right.
    fn back_sign(self) -> f64 {
        match self {
            Family::Plus => 1.0,
            Family::Minus => -1.0,
        }
    }
}

/// Time levels of a frozen director angle, linearly interpolated in time.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiHistory {
    pub grid: Grid1D,
    pub times: Vec<f64>,
    pub levels: Vec<Vec<f64>>,
    pub far: f64,
}

impl PsiHistory {
    fn at(&self, t: f64, x: f64) -> Result<f64, CoreError> {
        let st = Stencil::new(&self.grid, x)?;
        let last = self.times.len() - 1;
        let k = match self.times.iter().position(|&tk| tk >= t) {
            Some(0) => return Ok(st.apply(&self.levels[0])),
            Some(k) => k,
            None if (t - self.times[last]).abs() <= 1e-12 => last,
            None => return Err(domain_err(format!("time {t} beyond the psi history"))),
        };
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = (t - t0) / (t1 - t0);
        Ok((1.0 - w) * st.apply(&self.levels[k - 1]) + w * st.apply(&self.levels[k]))
    }
}

/// Foot `x_pm(tau; t, x)` of the backward characteristic through `(t, x)`,
/// by Heun steps no longer than the history spacing.
pub fn trace_characteristic(
    hist: &PsiHistory,
    ws: &WaveSpeed,
    t: f64,
    x: f64,
    tau: f64,
    family: Family,
) -> Result<f64, CoreError> {
    if tau > t {
        return Err(config_err(format!("trace target tau = {tau} lies after t = {t}")));
    }
    let (t_lo, t_hi) = (hist.times[0], *hist.times.last().unwrap());
    if tau < t_lo - 1e-12 || t > t_hi + 1e-12 {
        return Err(domain_err(format!("[{tau}, {t}] not covered by history [{t_lo}, {t_hi}]")));
    }
    let spacing = if hist.times.len() > 1 { (t_hi - t_lo) / (hist.times.len() - 1) as f64 } else { t - tau };
    let substeps = (((t - tau) / spacing.max(1e-300)).ceil() as usize).max(1);
    let h = (t - tau) / substeps as f64;
    let sign = family.back_sign();
    let mut xc = x;
    let mut tc = t;
    for _ in 0..substeps {
        let c1 = ws.c(hist.at(tc, xc)?);
        let xp = xc + sign * h * c1;
        let c2 = ws.c(hist.at(tc - h, xp)?);
        xc += sign * h * 0.5 * (c1 + c2);
        tc -= h;
        if !hist.grid.contains(xc) {
            return Err(domain_err(format!("characteristic left the domain at x = {xc}")));
        }
    }
    Ok(xc)
}

/// Stencil at `x`, or `None` outside the grid (far field).
fn stencil(grid: &Grid1D, x: f64) -> Option<Stencil> {
    Stencil::new(grid, x).ok()
}

fn sample(st: &Option<Stencil>, f: &[f64], far: f64) -> f64 {
    match st {
        Some(st) => st.apply(f),
        None => far,
    }
}

/// One semi-Lagrangian step with frozen coefficients: transport by `c(psi_hat)`,
/// source `source(U_hat)` integrated by the midpoint rule along each characteristic.
pub(crate) fn advance(
    u: &PolarState,
    hat_now: &PolarState,
    hat_next: &PolarState,
    ws: &WaveSpeed,
    dt: f64,
    source: &impl Fn(&[f64; 6]) -> Result<[f64; 6], CoreError>,
) -> Result<PolarState, CoreError> {
    let g = &u.grid;
    let n = g.n();
    let far = u.far_vector();
    let rp: Vec<f64> = u.phi.iter().zip(&u.omega).map(|(a, b)| a + b).collect();
    let rm: Vec<f64> = u.phi.iter().zip(&u.omega).map(|(a, b)| a - b).collect();
    let qp: Vec<f64> = u.v.iter().zip(&u.r).map(|(a, b)| a + b).collect();
    let qm: Vec<f64> = u.v.iter().zip(&u.r).map(|(a, b)| a - b).collect();
    let now = hat_now.fields();
    let next = hat_next.fields();
    let mid_state = |x: f64| -> [f64; 6] {
        let st = stencil(g, x);
        core::array::from_fn(|k| 0.5 * (sample(&st, now[k], far[k]) + sample(&st, next[k], far[k])))
    };

    let mut out = PolarState {
        grid: u.grid,
        psi: Vec::with_capacity(n),
        s: Vec::with_capacity(n),
        phi: Vec::with_capacity(n),
        v: Vec::with_capacity(n),
        omega: Vec::with_capacity(n),
        r: Vec::with_capacity(n),
        time: u.time + dt,
        far_field: u.far_field,
    };
    for j in 0..n {
        let x = g.x(j);
        let c1 = ws.c(hat_next.psi[j]);
        let mut riemann = [[0.0; 2]; 2];
        for (f, family) in [Family::Plus, Family::Minus].into_iter().enumerate() {
            let sign = family.back_sign();
            let xp = x + sign * dt * c1;
            let c2 = ws.c(sample(&stencil(g, xp), &hat_now.psi, far[0]));
            let foot = x + sign * dt * 0.5 * (c1 + c2);
            let st = stencil(g, foot);
            let src = source(&mid_state(0.5 * (x + foot)))?;
            let (r_arr, q_arr, pm) = if f == 0 { (&rp, &qp, 1.0) } else { (&rm, &qm, -1.0) };
            riemann[f][0] = sample(&st, r_arr, 0.0) + dt * (src[2] + pm * src[4]);
            riemann[f][1] = sample(&st, q_arr, 0.0) + dt * (src[3] + pm * src[5]);
        }
        let at_node: [f64; 6] = core::array::from_fn(|k| 0.5 * (now[k][j] + next[k][j]));
        let src = source(&at_node)?;
        out.psi.push(u.psi[j] + dt * src[0]);
        out.s.push(u.s[j] + dt * src[1]);
        out.phi.push(0.5 * (riemann[0][0] + riemann[1][0]));
        out.omega.push(0.5 * (riemann[0][0] - riemann[1][0]));
        out.v.push(0.5 * (riemann[0][1] + riemann[1][1]));
        out.r.push(0.5 * (riemann[0][1] - riemann[1][1]));
    }
    for (i, &s) in out.s.iter().enumerate() {
        if !(s > 0.0) {
            return Err(CoreError::Degeneracy { s, x: g.x(i) });
        }
    }
    Ok(out)
}

/// One transport step of the linear problem frozen at `U_hat` (given at both ends of the step).
pub fn transport_step<P: Potential + ?Sized>(
    u: &PolarState,
    hat_now: &PolarState,
    hat_next: &PolarState,
    p: &P,
    ws: &WaveSpeed,
    dt: f64,
) -> Result<PolarState, CoreError> {
    advance(u, hat_now, hat_next, ws, dt, &|w| rhs_f(w, p, ws))
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuasilinearConfig {
    pub dt: f64,
    /// Energy budget `E'`; `None` means twice the initial energy of each window.
    pub energy_budget: Option<f64>,
    /// Norm budget `L'`; `None` means twice `max(||U0||_{W^{1,inf}}, sup 1/s0)` of each window.
    pub norm_budget: Option<f64>,
    pub fixpoint_tol: f64,
    pub fixpoint_max: usize,
    pub t_local: f64,
}

pub const MAX_HALVINGS: usize = 20;
pub const MAX_CFL: f64 = 0.9;

impl QuasilinearConfig {
    /// Defaults with `dt` at the given CFL number.
    pub fn with_cfl(grid: &Grid1D, ws: &WaveSpeed, cfl: f64) -> Self {
        Self {
            dt: cfl * grid.dx() / ws.c_max(),
            energy_budget: None,
            norm_budget: None,
            fixpoint_tol: 1e-10,
            fixpoint_max: 60,
            t_local: 0.25,
        }
    }

    pub fn check(&self, grid: &Grid1D, ws: &WaveSpeed) -> Result<(), CoreError> {
        let cfl = self.dt * ws.c_max() / grid.dx();
        if !(self.dt > 0.0) || cfl > MAX_CFL + 1e-12 {
            return Err(config_err(format!("time step dt = {} gives CFL {cfl} (must be in (0, {MAX_CFL}])", self.dt)));
        }
        if !(self.fixpoint_tol > 0.0) || self.fixpoint_max == 0 || !(self.t_local > 0.0) {
            return Err(config_err("fixpoint_tol, fixpoint_max and t_local must be positive"));
        }
        Ok(())
    }
}

/// Outcome of one accepted window.
#[derive(Debug, Clone, PartialEq)]
pub struct FixpointTrace {
    pub window_start: f64,
    pub attempted_t: f64,
    pub achieved_t: f64,
    pub halvings: usize,
    pub diff_norms: Vec<f64>,
    pub energy_budget: f64,
    pub norm_budget: f64,
}

/// `sup_t ||U_1 - U_2||_{W^{1,inf}}` over two trajectories.
fn trajectory_distance(a: &[PolarState], b: &[PolarState]) -> f64 {
    let mut worst = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let mut sup = 0.0f64;
        let mut dsup = 0.0f64;
        for (fx, fy) in x.fields().iter().zip(y.fields()) {
            let d: Vec<f64> = fx.iter().zip(fy).map(|(p, q)| p - q).collect();
            sup = sup.max(sup_norm(&d));
            dsup = dsup.max(sup_norm(&derivative(&x.grid, &d)));
        }
        worst = worst.max(sup + dsup);
    }
    worst
}

enum Attempt {
    Done(Vec<PolarState>, Vec<f64>),
    Tripped(String),
}

fn budgets_hold<P: Potential + ?Sized>(
    traj: &[PolarState],
    p: &P,
    ws: &WaveSpeed,
    e_budget: f64,
    l_budget: f64,
) -> Result<(), String> {
    for u in traj {
        let e = u.total_energy(p, ws);
        if e > e_budget * (1.0 + 1e-12) + 1e-14 {
            return Err(format!("energy {e} exceeds budget {e_budget} at t = {}", u.time));
        }
        let norm = u.w1_inf_norm();
        if norm > l_budget {
            return Err(format!("W1,inf norm {norm} exceeds budget {l_budget} at t = {}", u.time));
        }
        let inv = 1.0 / u.min_s();
        if inv > l_budget {
            return Err(format!("1/min s = {inv} exceeds budget {l_budget} at t = {}", u.time));
        }
    }
    Ok(())
}

fn attempt_window<P: Potential + ?Sized>(
    u0: &PolarState,
    p: &P,
    ws: &WaveSpeed,
    cfg: &QuasilinearConfig,
    steps: usize,
    dt: f64,
    e_budget: f64,
    l_budget: f64,
) -> Result<Attempt, CoreError> {
    // Step-local predictor-corrector sweep for the first frozen trajectory.
    let mut hat = Vec::with_capacity(steps + 1);
    hat.push(u0.clone());
    for k in 0..steps {
        let cur = &hat[k];
        let pred = transport_step(cur, cur, cur, p, ws, dt)?;
        let corr = transport_step(cur, cur, &pred, p, ws, dt)?;
        hat.push(corr);
    }
    if let Err(why) = budgets_hold(&hat, p, ws, e_budget, l_budget) {
        return Ok(Attempt::Tripped(why));
    }
    let mut diffs = Vec::new();
    for _ in 0..cfg.fixpoint_max {
        let mut next = Vec::with_capacity(steps + 1);
        next.push(u0.clone());
        for k in 0..steps {
            let step = transport_step(&next[k], &hat[k], &hat[k + 1], p, ws, dt)?;
            next.push(step);
        }
        if let Err(why) = budgets_hold(&next, p, ws, e_budget, l_budget) {
            return Ok(Attempt::Tripped(why));
        }
        let d = trajectory_distance(&next, &hat);
        diffs.push(d);
        hat = next;
        if d < cfg.fixpoint_tol {
            return Ok(Attempt::Done(hat, diffs));
        }
    }
    Err(CoreError::NonContraction { diff_norms: diffs })
}

/// Solves one window from `u0`: whole-trajectory fixed point, halving the
/// window when a budget monitor trips. Returns the trajectory (including `u0`).
pub fn fixpoint_solve<P: Potential + ?Sized>(
    u0: &PolarState,
    p: &P,
    ws: &WaveSpeed,
    cfg: &QuasilinearConfig,
    dt: f64,
    max_steps: usize,
) -> Result<(Vec<PolarState>, FixpointTrace), CoreError> {
    u0.check()?;
    let e0 = u0.total_energy(p, ws);
    let e_budget = cfg.energy_budget.unwrap_or(2.0 * e0);
    let l0 = u0.w1_inf_norm().max(1.0 / u0.min_s());
    let l_budget = cfg.norm_budget.unwrap_or(2.0 * l0);
    if e0 > e_budget * (1.0 + 1e-12) + 1e-14 || l0 > l_budget {
        return Err(config_err(format!(
            "initial state exceeds its budgets (E = {e0} vs {e_budget}, L = {l0} vs {l_budget})"
        )));
    }
    let mut steps = ((cfg.t_local / dt + 1e-9).floor() as usize).clamp(1, max_steps.max(1));
    let attempted_t = steps as f64 * dt;
    let reach = ws.c_max() * attempted_t;
    if let Some((a, b)) = u0.perturbation_support() {
        let g = &u0.grid;
        if a - reach < g.x_min() || b + reach > g.x_max() {
            return Err(domain_err(format!(
                "perturbation on [{a}, {b}] can reach the truncation boundary within {attempted_t}"
            )));
        }
    }
    let mut halvings = 0;
    loop {
        match attempt_window(u0, p, ws, cfg, steps, dt, e_budget, l_budget)? {
            Attempt::Done(traj, diff_norms) => {
                let trace = FixpointTrace {
                    window_start: u0.time,
                    attempted_t,
                    achieved_t: steps as f64 * dt,
                    halvings,
                    diff_norms,
                    energy_budget: e_budget,
                    norm_budget: l_budget,
                };
                return Ok((traj, trace));
            }
            Attempt::Tripped(reason) => {
                if halvings == MAX_HALVINGS || steps == 1 {
                    return Err(CoreError::WindowCollapse { time: u0.time, reason });
                }
                halvings += 1;
                steps = (steps / 2).max(1);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuasilinearRun {
    pub final_state: PolarState,
    pub windows: Vec<FixpointTrace>,
    /// Step actually used, `t_final / ceil(t_final / cfg.dt)`.
    pub dt: f64,
}

/// Evolves `u0` by `t_final`, window after window, calling `observer` on every level.
pub fn evolve<P, O>(
    u0: &PolarState,
    p: &P,
    ws: &WaveSpeed,
    cfg: &QuasilinearConfig,
    t_final: f64,
    mut observer: O,
) -> Result<QuasilinearRun, CoreError>
where
    P: Potential + ?Sized,
    O: FnMut(&PolarState) -> Result<(), CoreError>,
{
    cfg.check(&u0.grid, ws)?;
    u0.check()?;
    let w_far = p.d1(u0.far_field.1);
    if w_far.abs() > 1e-10 {
        return Err(config_err(format!(
            "far-field order parameter s_inf = {} is not a critical point of W0 (W0' = {w_far:e})",
            u0.far_field.1
        )));
    }
    if !(t_final >= 0.0) {
        return Err(config_err(format!("t_final = {t_final} must be non-negative")));
    }
    let total_steps = ((t_final / cfg.dt) - 1e-9).ceil().max(0.0) as usize;
    let dt = if total_steps == 0 { cfg.dt } else { t_final / total_steps as f64 };
    let mut state = u0.clone();
    observer(&state)?;
    let mut windows = Vec::new();
    let mut done = 0;
    while done < total_steps {
        let (traj, trace) = fixpoint_solve(&state, p, ws, cfg, dt, total_steps - done)?;
        let steps = traj.len() - 1;
        for (k, mut level) in traj.into_iter().enumerate().skip(1) {
            level.time = u0.time + (done + k) as f64 * dt;
            observer(&level)?;
            state = level;
        }
        done += steps;
        windows.push(trace);
    }
    Ok(QuasilinearRun { final_state: state, windows, dt })
}
