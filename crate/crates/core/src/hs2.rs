//! Two-component Hunter–Saxton solver on Lagrangian markers.
//!
//! Along `dx/dt = u` the gradient `alpha = u_x` and density `rho` obey the
//! complex Riccati equation `w' = -w^2/2` for `w = alpha + i rho`, and the
//! Jacobian obeys `J' = alpha J`. The velocity itself needs the cumulative
//! energy `int (u_x^2 + rho^2) dy`, which makes it the only nonlocal part.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by std methods when a dependency links std
use num_traits::Float;

use crate::error::{config_err, domain_err, CoreError};
use crate::field::{integrate_all, Grid1D};

/// Threshold on the Jacobian below which a marker counts as broken.
pub const BREAK_JACOBIAN: f64 = 1e-6;

/// Largest admissible `dt * max|alpha|`.
pub const MAX_STEP_GRADIENT: f64 = 0.1;

/// Which end of the line the velocity is pinned to zero at.
///
/// `LeftDecay` integrates the energy from the left (`u -> 0` at `-inf`);
/// `RightDecay` integrates from the right (`u -> 0` at `+inf`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Gauge {
    #[default]
    LeftDecay,
    RightDecay,
}

impl Gauge {
    pub fn name(self) -> &'static str {
        match self {
            Gauge::LeftDecay => "u(-inf) = 0",
            Gauge::RightDecay => "u(+inf) = 0",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkerState {
    /// Labels: the initial positions.
    pub xi: Vec<f64>,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub alpha: Vec<f64>,
    pub rho: Vec<f64>,
    pub j: Vec<f64>,
    pub time: f64,
}

/// Time derivatives of the marker fields.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkerRates {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub alpha: Vec<f64>,
    pub rho: Vec<f64>,
    pub j: Vec<f64>,
}

impl MarkerState {
    /// Markers at `n` uniform labels on `[xi_min, xi_max]` with `J = 1`.
    pub fn uniform(
        xi_min: f64,
        xi_max: f64,
        n: usize,
        u: impl Fn(f64) -> f64,
        alpha: impl Fn(f64) -> f64,
        rho: impl Fn(f64) -> f64,
    ) -> Result<Self, CoreError> {
        if n < 2 || !(xi_max > xi_min) || !xi_min.is_finite() || !xi_max.is_finite() {
            return Err(config_err(format!("marker layout needs n >= 2 and xi_min < xi_max (got n = {n}, [{xi_min}, {xi_max}])")));
        }
        let h = (xi_max - xi_min) / (n - 1) as f64;
        let xi: Vec<f64> = (0..n).map(|i| if i == n - 1 { xi_max } else { xi_min + i as f64 * h }).collect();
        let m = Self {
            x: xi.clone(),
            u: xi.iter().map(|&s| u(s)).collect(),
            alpha: xi.iter().map(|&s| alpha(s)).collect(),
            rho: xi.iter().map(|&s| rho(s)).collect(),
            j: alloc::vec![1.0; n],
            xi,
            time: 0.0,
        };
        m.check_finite()?;
        Ok(m)
    }

    /// Layout over `support` widened by 10% on each side.
    pub fn over_support(
        support: (f64, f64),
        n: usize,
        u: impl Fn(f64) -> f64,
        alpha: impl Fn(f64) -> f64,
        rho: impl Fn(f64) -> f64,
    ) -> Result<Self, CoreError> {
        let margin = 0.1 * (support.1 - support.0);
        Self::uniform(support.0 - margin, support.1 + margin, n, u, alpha, rho)
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    fn check_finite(&self) -> Result<(), CoreError> {
        let all = [&self.x, &self.u, &self.alpha, &self.rho, &self.j];
        if all.iter().any(|v| v.iter().any(|a| !a.is_finite())) {
            return Err(CoreError::Data("non-finite marker value".into()));
        }
        Ok(())
    }

    /// `(alpha^2 + rho^2) J` per marker.
    pub fn cell_energy(&self) -> Vec<f64> {
        (0..self.len()).map(|i| (self.alpha[i].powi(2) + self.rho[i].powi(2)) * self.j[i]).collect()
    }

    /// `int_{-inf}^{x_i} (u_x^2 + rho^2) dx` at each marker.
    ///
    /// Cell integrals use the cubic through the four surrounding labels
    /// (a quadratic in the two end cells), so `u` stays fourth-order
    /// consistent with `alpha`. Summed left to right in a fixed order.
    pub fn cumulative_energy(&self) -> Vec<f64> {
        let e = self.cell_energy();
        let n = e.len();
        let mut cum = alloc::vec![0.0; n];
        for k in 1..n {
            let h = self.xi[k] - self.xi[k - 1];
            let cell = if n < 3 {
                0.5 * h * (e[k - 1] + e[k])
            } else if k == 1 {
                h / 12.0 * (5.0 * e[0] + 8.0 * e[1] - e[2])
            } else if k == n - 1 {
                h / 12.0 * (5.0 * e[n - 1] + 8.0 * e[n - 2] - e[n - 3])
            } else {
                h / 24.0 * (-e[k - 2] + 13.0 * e[k - 1] + 13.0 * e[k] - e[k + 1])
            };
            cum[k] = cum[k - 1] + cell;
        }
        cum
    }

    /// `int (u_x^2 + rho^2) dx`.
    pub fn total_energy(&self) -> f64 {
        self.cumulative_energy().last().copied().unwrap_or(0.0)
    }

    /// `int rho dx = int rho J dxi`, trapezoid in the labels.
    pub fn mass(&self) -> f64 {
        (1..self.len())
            .map(|i| 0.5 * (self.rho[i - 1] * self.j[i - 1] + self.rho[i] * self.j[i]) * (self.xi[i] - self.xi[i - 1]))
            .sum()
    }

    pub fn max_neg_alpha(&self) -> f64 {
        self.alpha.iter().fold(f64::NEG_INFINITY, |m, &a| m.max(-a))
    }

    pub fn sup_alpha(&self) -> f64 {
        self.alpha.iter().fold(0.0, |m, &a| m.max(a.abs()))
    }

    /// Index and value of the smallest Jacobian.
    pub fn min_jacobian(&self) -> (usize, f64) {
        self.j
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) })
    }

    fn combine(&self, k: &MarkerRates, h: f64) -> Self {
        let add = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(a, b)| a + h * b).collect();
        Self {
            xi: self.xi.clone(),
            x: add(&self.x, &k.x),
            u: add(&self.u, &k.u),
            alpha: add(&self.alpha, &k.alpha),
            rho: add(&self.rho, &k.rho),
            j: add(&self.j, &k.j),
            time: self.time + h,
        }
    }
}

/// Right-hand side of the marker system under the chosen gauge.
pub fn marker_rhs(m: &MarkerState, gauge: Gauge) -> Result<MarkerRates, CoreError> {
    let n = m.len();
    let (i, jmin) = m.min_jacobian();
    if !(jmin > 0.0) {
        return Err(CoreError::Wavebreaking { time: m.time, t_star: m.time, marker: i });
    }
    let cum = m.cumulative_energy();
    let total = cum[n - 1];
    let u_rate = cum
        .iter()
        .map(|&c| match gauge {
            Gauge::LeftDecay => 0.5 * c,
            Gauge::RightDecay => -0.5 * (total - c),
        })
        .collect();
    Ok(MarkerRates {
        x: m.u.clone(),
        u: u_rate,
        alpha: (0..n).map(|k| 0.5 * (m.rho[k] * m.rho[k] - m.alpha[k] * m.alpha[k])).collect(),
        rho: (0..n).map(|k| -m.alpha[k] * m.rho[k]).collect(),
        j: (0..n).map(|k| m.alpha[k] * m.j[k]).collect(),
    })
}

fn rk4_step(m: &MarkerState, h: f64, gauge: Gauge) -> Result<MarkerState, CoreError> {
    let k1 = marker_rhs(m, gauge)?;
    let k2 = marker_rhs(&m.combine(&k1, 0.5 * h), gauge)?;
    let k3 = marker_rhs(&m.combine(&k2, 0.5 * h), gauge)?;
    let k4 = marker_rhs(&m.combine(&k3, h), gauge)?;
    let blend = |a: &[f64], b1: &[f64], b2: &[f64], b3: &[f64], b4: &[f64]| {
        (0..a.len()).map(|i| a[i] + h / 6.0 * (b1[i] + 2.0 * b2[i] + 2.0 * b3[i] + b4[i])).collect()
    };
    let out = MarkerState {
        xi: m.xi.clone(),
        x: blend(&m.x, &k1.x, &k2.x, &k3.x, &k4.x),
        u: blend(&m.u, &k1.u, &k2.u, &k3.u, &k4.u),
        alpha: blend(&m.alpha, &k1.alpha, &k2.alpha, &k3.alpha, &k4.alpha),
        rho: blend(&m.rho, &k1.rho, &k2.rho, &k3.rho, &k4.rho),
        j: blend(&m.j, &k1.j, &k2.j, &k3.j, &k4.j),
        time: m.time + h,
    };
    out.check_finite()?;
    Ok(out)
}

/// Where and when the markers broke.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowUp {
    /// Time of the last completed step.
    pub time: f64,
    /// Zero of the linear extrapolation of `1 / max(-alpha)`.
    pub t_star: f64,
    pub marker: usize,
}

impl From<BlowUp> for CoreError {
    fn from(b: BlowUp) -> Self {
        CoreError::Wavebreaking { time: b.time, t_star: b.t_star, marker: b.marker }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hs2Run {
    /// States at the requested output times that were reached.
    pub snapshots: Vec<MarkerState>,
    pub final_state: MarkerState,
    pub blowup: Option<BlowUp>,
    pub steps: usize,
}

impl Hs2Run {
    /// The final state, or the wavebreaking error if the run broke.
    pub fn into_result(self) -> Result<MarkerState, CoreError> {
        match self.blowup {
            Some(b) => Err(b.into()),
            None => Ok(self.final_state),
        }
    }
}

/// RK4 integration to `t_final` with step `dt`.
///
/// The step shrinks below `dt` whenever `dt * max|alpha|` would exceed
/// [`MAX_STEP_GRADIENT`], which lets the run resolve the approach to a
/// blow-up. `output_times` (ascending, in `[0, t_final]`) are hit exactly.
/// A run that breaks returns normally with `blowup` set; the observer sees
/// every output snapshot reached before that.
pub fn evolve_observed(
    m0: &MarkerState,
    t_final: f64,
    dt: f64,
    gauge: Gauge,
    output_times: &[f64],
    mut observer: impl FnMut(&MarkerState),
) -> Result<Hs2Run, CoreError> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(config_err(format!("time step must be positive, got {dt}")));
    }
    if !(t_final >= m0.time) || !t_final.is_finite() {
        return Err(config_err(format!("t_final = {t_final} lies before the initial time {}", m0.time)));
    }
    if dt * m0.sup_alpha() > MAX_STEP_GRADIENT {
        return Err(config_err(format!(
            "dt * max|alpha| = {} exceeds {MAX_STEP_GRADIENT}",
            dt * m0.sup_alpha()
        )));
    }
    if output_times.windows(2).any(|w| w[1] < w[0]) || output_times.iter().any(|&t| t < m0.time || t > t_final) {
        return Err(config_err("output times must be ascending and inside [t0, t_final]"));
    }
    let (mut marker, jmin) = m0.min_jacobian();
    if !(jmin > 0.0) {
        return Err(CoreError::Wavebreaking { time: m0.time, t_star: m0.time, marker });
    }

    let mut m = m0.clone();
    let mut snapshots = Vec::new();
    let mut next_out = 0;
    let mut emit = |m: &MarkerState, next_out: &mut usize, snapshots: &mut Vec<MarkerState>| {
        while *next_out < output_times.len() && (output_times[*next_out] - m.time).abs() <= 1e-12 * (1.0 + m.time.abs()) {
            observer(m);
            snapshots.push(m.clone());
            *next_out += 1;
        }
    };
    emit(&m, &mut next_out, &mut snapshots);

    let mut steps = 0;
    let mut prev_inv: Option<(f64, f64)> = None;
    while m.time < t_final - 1e-12 * (1.0 + t_final.abs()) {
        let target = output_times.get(next_out).copied().unwrap_or(t_final).min(t_final);
        let grad = m.sup_alpha();
        let mut h = dt.min(target - m.time);
        if grad * h > MAX_STEP_GRADIENT {
            h = MAX_STEP_GRADIENT / grad;
        }
        let next = rk4_step(&m, h, gauge);
        let next = match next {
            Ok(s) => s,
            Err(CoreError::Wavebreaking { .. }) | Err(CoreError::Data(_)) => {
                // A stage overshot the singularity; report from the last good state.
                let t_star = extrapolate(prev_inv, &m).unwrap_or(m.time);
                let blowup = BlowUp { time: m.time, t_star, marker };
                return Ok(Hs2Run { snapshots, final_state: m, blowup: Some(blowup), steps });
            }
            Err(e) => return Err(e),
        };
        steps += 1;
        let reached_target = (next.time - target).abs() <= 1e-12 * (1.0 + target.abs()) || h == target - m.time;
        prev_inv = inverse_gradient(&m).map(|v| (m.time, v)).or(prev_inv);
        m = next;
        if reached_target {
            m.time = target;
        }
        let (i, jmin) = m.min_jacobian();
        marker = i;
        if jmin < BREAK_JACOBIAN {
            let t_star = extrapolate(prev_inv, &m).unwrap_or(m.time);
            return Ok(Hs2Run { snapshots, blowup: Some(BlowUp { time: m.time, t_star, marker }), final_state: m, steps });
        }
        emit(&m, &mut next_out, &mut snapshots);
    }
    Ok(Hs2Run { snapshots, final_state: m, blowup: None, steps })
}

/// [`evolve_observed`] without an observer.
pub fn evolve(m0: &MarkerState, t_final: f64, dt: f64, gauge: Gauge, output_times: &[f64]) -> Result<Hs2Run, CoreError> {
    evolve_observed(m0, t_final, dt, gauge, output_times, |_| {})
}

fn inverse_gradient(m: &MarkerState) -> Option<f64> {
    let g = m.max_neg_alpha();
    (g > 0.0).then(|| 1.0 / g)
}

/// Zero crossing of the line through the previous and current `1/max(-alpha)`.
fn extrapolate(prev: Option<(f64, f64)>, m: &MarkerState) -> Option<f64> {
    let (t0, v0) = prev?;
    let v1 = inverse_gradient(m)?;
    let slope = (v1 - v0) / (m.time - t0);
    (slope < 0.0).then(|| m.time - v1 / slope)
}

/// Monotone cubic Hermite interpolant through `(x_i, y_i)` with slope
/// estimates `d_i`, limited by the Hyman filter.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(x: &[f64], y: &[f64], slopes: &[f64]) -> Result<Self, CoreError> {
        let n = x.len();
        if n < 2 || y.len() != n || slopes.len() != n {
            return Err(CoreError::Data("interpolant needs at least two points and matching lengths".into()));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(CoreError::Data("interpolation nodes must be strictly increasing".into()));
        }
        let secant: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
        let mut d = slopes.to_vec();
        for i in 0..n {
            let left = if i > 0 { secant[i - 1] } else { secant[0] };
            let right = if i < n - 1 { secant[i] } else { secant[n - 2] };
            // Constrain only where the data are locally monotone.
            if left == 0.0 || right == 0.0 {
                d[i] = 0.0;
            } else if left * right > 0.0 {
                let bound = 3.0 * left.abs().min(right.abs());
                d[i] = if d[i] * left <= 0.0 { 0.0 } else { d[i].signum() * d[i].abs().min(bound) };
            }
        }
        Ok(Self { x: x.to_vec(), y: y.to_vec(), d })
    }

    pub fn eval(&self, t: f64) -> Result<f64, CoreError> {
        let n = self.x.len();
        if t < self.x[0] || t > self.x[n - 1] {
            return Err(domain_err(format!("{t} outside the marker span [{}, {}]", self.x[0], self.x[n - 1])));
        }
        let k = match self.x.partition_point(|&a| a <= t) {
            0 => 0,
            p => (p - 1).min(n - 2),
        };
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let (s2, s3) = (s * s, s * s * s);
        Ok((2.0 * s3 - 3.0 * s2 + 1.0) * self.y[k]
            + (s3 - 2.0 * s2 + s) * h * self.d[k]
            + (-2.0 * s3 + 3.0 * s2) * self.y[k + 1]
            + (s3 - s2) * h * self.d[k + 1])
    }
}

/// Slopes of a three-point parabola through neighbouring nodes.
pub fn parabola_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 2 {
        let s = (y[1] - y[0]) / (x[1] - x[0]);
        return alloc::vec![s, s];
    }
    let at = |i: usize, j: usize, k: usize, t: f64| {
        // Derivative at t of the interpolating quadratic through i, j, k.
        let (a, b, c) = (x[i], x[j], x[k]);
        y[i] * ((t - b) + (t - c)) / ((a - b) * (a - c))
            + y[j] * ((t - a) + (t - c)) / ((b - a) * (b - c))
            + y[k] * ((t - a) + (t - b)) / ((c - a) * (c - b))
    };
    (0..n)
        .map(|i| match i {
            0 => at(0, 1, 2, x[0]),
            _ if i == n - 1 => at(n - 3, n - 2, n - 1, x[n - 1]),
            _ => at(i - 1, i, i + 1, x[i]),
        })
        .collect()
}

/// Resamples `(u, rho)` onto `grid`.
///
/// `u` uses the marker gradients `alpha` as Hermite slopes. `rho` is
/// interpolated the same way with parabola slopes and then corrected so its
/// trapezoid integral equals the marker mass `int rho J dxi` over the window.
pub fn sample_eulerian(m: &MarkerState, grid: &Grid1D) -> Result<(Vec<f64>, Vec<f64>), CoreError> {
    let (i, jmin) = m.min_jacobian();
    if !(jmin > 0.0) {
        return Err(CoreError::Wavebreaking { time: m.time, t_star: m.time, marker: i });
    }
    let n = m.len();
    if m.x[0] > grid.x_min() || m.x[n - 1] < grid.x_max() {
        return Err(domain_err(format!(
            "markers span [{}, {}] but the grid spans [{}, {}]",
            m.x[0],
            m.x[n - 1],
            grid.x_min(),
            grid.x_max()
        )));
    }
    let u_int = MonotoneCubic::new(&m.x, &m.u, &m.alpha)?;
    let rho_int = MonotoneCubic::new(&m.x, &m.rho, &parabola_slopes(&m.x, &m.rho))?;
    let nodes = grid.nodes();
    let u = nodes.iter().map(|&x| u_int.eval(x)).collect::<Result<Vec<_>, _>>()?;
    let mut rho = nodes.iter().map(|&x| rho_int.eval(x)).collect::<Result<Vec<_>, _>>()?;
    // Mass on the grid window, measured on the markers.
    let target = window_mass(m, grid.x_min(), grid.x_max(), &rho_int)?;
    let have = integrate_all(grid, &rho);
    // Spread the defect in proportion to |rho|: keeps the support and works
    // for densities of either sign.
    let weight: Vec<f64> = rho.iter().map(|r| r.abs()).collect();
    let total_weight = integrate_all(grid, &weight);
    if total_weight > 0.0 {
        let k = (target - have) / total_weight;
        rho.iter_mut().zip(&weight).for_each(|(r, w)| *r += k * w);
    }
    Ok((u, rho))
}

/// `int_a^b rho dx` computed from the markers: the trapezoid rule in labels on
/// the interior cells plus Simpson pieces of the interpolant at the two cut
/// cells.
fn window_mass(m: &MarkerState, a: f64, b: f64, rho_int: &MonotoneCubic) -> Result<f64, CoreError> {
    let n = m.len();
    let ia = m.x.partition_point(|&x| x < a);
    let ib = m.x.partition_point(|&x| x <= b);
    if ia >= ib {
        return Ok(crate::coefficients::simpson(|x| rho_int.eval(x).unwrap_or(0.0), a, b, 8));
    }
    let mut total = 0.0;
    for k in ia + 1..ib {
        total += 0.5 * (m.rho[k - 1] * m.j[k - 1] + m.rho[k] * m.j[k]) * (m.xi[k] - m.xi[k - 1]);
    }
    let piece = |lo: f64, hi: f64| crate::coefficients::simpson(|x| rho_int.eval(x).unwrap_or(0.0), lo, hi, 8);
    if m.x[ia] > a {
        total += piece(a, m.x[ia]);
    }
    if ib >= 1 && m.x[ib - 1] < b && ib - 1 < n {
        total += piece(m.x[ib - 1], b);
    }
    Ok(total)
}
