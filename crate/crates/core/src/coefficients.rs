//! Order-parameter potentials, the anisotropic wave speed and the a priori
//! constants that size the contraction windows of the semilinear solver.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)] // shadowed by std methods when a dependency links std
use num_traits::Float;

use crate::error::{config_err, CoreError};

/// An order-parameter potential `W0` on `[0, 1)` with derivatives up to order four.
pub trait Potential {
    /// The derivative of the given order (0 to 4) at `s`.
    fn derivative(&self, order: usize, s: f64) -> f64;

    /// Zeros of `W0` in `[0, 1)`, as supplied by the author of the potential.
    fn zeros(&self) -> Vec<f64>;

    /// An interior point where `W0'`, `W0''` and `W0'''` all vanish.
    fn flat_point(&self) -> Option<f64> {
        None
    }

    fn name(&self) -> String;

    fn value(&self, s: f64) -> f64 {
        self.derivative(0, s)
    }

    fn d1(&self, s: f64) -> f64 {
        self.derivative(1, s)
    }

    fn d2(&self, s: f64) -> f64 {
        self.derivative(2, s)
    }

    fn d3(&self, s: f64) -> f64 {
        self.derivative(3, s)
    }
}

/// The potentials shipped with the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BuiltinPotential {
    /// `s^2 / (1 - s)^2`.
    Reference,
    /// `s^2 (s - s0)^4 / (1 - s)^2`, flat to third order at `s0`.
    Flat4 { s0: f64 },
    /// `s^2`; no blow-up at `s = 1`, so it is not admissible.
    Quadratic,
    /// `W0 = 0`.
    Zero,
}

impl BuiltinPotential {
    pub fn by_name(name: &str, s0: Option<f64>) -> Result<Self, CoreError> {
        match name {
            "reference" => Ok(Self::Reference),
            "flat4" => {
                let s0 = s0.ok_or_else(|| config_err("potential flat4 requires parameter s0"))?;
                if !(s0 > 0.0 && s0 < 1.0) {
                    return Err(config_err(format!("potential.s0 = {s0} must lie in (0, 1)")));
                }
                Ok(Self::Flat4 { s0 })
            }
            "quadratic" => Ok(Self::Quadratic),
            "zero" => Ok(Self::Zero),
            other => Err(config_err(format!("unknown potential name {other:?}"))),
        }
    }
}

// Derivatives 0..=4 of s^2, (s - s0)^4 and (1 - s)^-2.
fn square_jet(s: f64) -> [f64; 5] {
    [s * s, 2.0 * s, 2.0, 0.0, 0.0]
}

fn quartic_jet(s: f64, s0: f64) -> [f64; 5] {
    let d = s - s0;
    [d * d * d * d, 4.0 * d * d * d, 12.0 * d * d, 24.0 * d, 24.0]
}

fn pole_jet(s: f64) -> [f64; 5] {
    // d^k/ds^k (1 - s)^-2 = (k + 1)! (1 - s)^-(k + 2)
    let q = 1.0 / (1.0 - s);
    let q2 = q * q;
    [q2, 2.0 * q2 * q, 6.0 * q2 * q2, 24.0 * q2 * q2 * q, 120.0 * q2 * q2 * q2]
}

const BINOM: [[f64; 5]; 5] = [
    [1.0, 0.0, 0.0, 0.0, 0.0],
    [1.0, 1.0, 0.0, 0.0, 0.0],
    [1.0, 2.0, 1.0, 0.0, 0.0],
    [1.0, 3.0, 3.0, 1.0, 0.0],
    [1.0, 4.0, 6.0, 4.0, 1.0],
];

fn leibniz(a: &[f64; 5], b: &[f64; 5], order: usize) -> f64 {
    (0..=order).map(|i| BINOM[order][i] * a[i] * b[order - i]).sum()
}

fn product_jet(a: &[f64; 5], b: &[f64; 5]) -> [f64; 5] {
    let mut out = [0.0; 5];
    for (k, o) in out.iter_mut().enumerate() {
        *o = leibniz(a, b, k);
    }
    out
}

impl Potential for BuiltinPotential {
    fn derivative(&self, order: usize, s: f64) -> f64 {
        assert!(order <= 4, "derivatives are available up to order 4");
        match *self {
            Self::Reference => leibniz(&square_jet(s), &pole_jet(s), order),
            Self::Flat4 { s0 } => {
                let ab = product_jet(&square_jet(s), &quartic_jet(s, s0));
                leibniz(&ab, &pole_jet(s), order)
            }
            Self::Quadratic => square_jet(s)[order],
            Self::Zero => 0.0,
        }
    }

    fn zeros(&self) -> Vec<f64> {
        match *self {
            Self::Reference | Self::Quadratic => vec![0.0],
            Self::Flat4 { s0 } => vec![0.0, s0],
            Self::Zero => Vec::new(),
        }
    }

    fn flat_point(&self) -> Option<f64> {
        match *self {
            Self::Flat4 { s0 } => Some(s0),
            _ => None,
        }
    }

    fn name(&self) -> String {
        match *self {
            Self::Reference => "reference".into(),
            Self::Flat4 { .. } => "flat4".into(),
            Self::Quadratic => "quadratic".into(),
            Self::Zero => "zero".into(),
        }
    }
}

/// Frank elastic constants of the planar director, `c(psi)^2 = K1 sin^2 psi + K3 cos^2 psi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveSpeed {
    k1: f64,
    k3: f64,
}

impl WaveSpeed {
    pub fn new(k1: f64, k3: f64) -> Result<Self, CoreError> {
        if !(k1 > 0.0 && k1.is_finite()) {
            return Err(config_err(format!("wave_speed.K1 = {k1} must be positive")));
        }
        if !(k3 > 0.0 && k3.is_finite()) {
            return Err(config_err(format!("wave_speed.K3 = {k3} must be positive")));
        }
        Ok(Self { k1, k3 })
    }

    pub fn isotropic(c: f64) -> Result<Self, CoreError> {
        Self::new(c * c, c * c)
    }

    pub fn k1(&self) -> f64 {
        self.k1
    }

    pub fn k3(&self) -> f64 {
        self.k3
    }

    pub fn is_isotropic(&self) -> bool {
        self.k1 == self.k3
    }

    /// `(c(psi), c'(psi))`.
    pub fn speed(&self, psi: f64) -> (f64, f64) {
        let (sn, cs) = psi.sin_cos();
        let c = (self.k1 * sn * sn + self.k3 * cs * cs).sqrt();
        (c, (self.k1 - self.k3) * sn * cs / c)
    }

    pub fn c(&self, psi: f64) -> f64 {
        self.speed(psi).0
    }

    pub fn c_max(&self) -> f64 {
        self.k1.max(self.k3).sqrt()
    }

    pub fn c_min(&self) -> f64 {
        self.k1.min(self.k3).sqrt()
    }
}

/// Convenience wrapper matching the operation name used across the crate.
pub fn wave_speed(ws: &WaveSpeed, psi: f64) -> (f64, f64) {
    ws.speed(psi)
}

/// The admissibility conditions checked by [`validate_potential`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clause {
    Evaluation,
    NonNegative,
    Smoothness,
    ZeroSet,
    TailDivergence,
    TailMonotone,
}

impl Clause {
    pub fn key(&self) -> &'static str {
        match self {
            Clause::Evaluation => "evaluation",
            Clause::NonNegative => "non_negative",
            Clause::Smoothness => "c4_smoothness",
            Clause::ZeroSet => "zero_set",
            Clause::TailDivergence => "tail_divergence",
            Clause::TailMonotone => "tail_monotone",
        }
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClauseResult {
    pub clause: Clause,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub potential: String,
    pub clauses: Vec<ClauseResult>,
    /// Threshold above which `W0 > 0` and `W0' > 0`, when one was found.
    pub s_tilde: Option<f64>,
    /// `(delta, integral of W0(u)(1 - u) over [0, 1 - delta])`.
    pub partial_integrals: Vec<(f64, f64)>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.clauses.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> impl Iterator<Item = &ClauseResult> {
        self.clauses.iter().filter(|c| !c.passed)
    }

    pub fn clause(&self, clause: Clause) -> Option<&ClauseResult> {
        self.clauses.iter().find(|c| c.clause == clause)
    }

    /// `Ok(())` when every clause passed, otherwise an error naming the failed clauses.
    pub fn into_result(self) -> Result<(), CoreError> {
        if self.is_valid() {
            return Ok(());
        }
        let names: Vec<String> = self.failed().map(|c| format!("{} ({})", c.clause, c.detail)).collect();
        Err(CoreError::InvalidPotential(names.join("; ")))
    }
}

/// Composite Simpson rule with `panels` (rounded up to even) subintervals.
pub(crate) fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels.max(2) + panels % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

const DIVERGENCE_DELTAS: [f64; 5] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

/// `int_0^{1 - delta} W0(u) (1 - u) du` for each delta of the decade sweep,
/// computed in the variable `y = -ln(1 - u)` where the integrand is smooth.
fn tail_partial_integrals<P: Potential + ?Sized>(p: &P) -> Vec<(f64, f64)> {
    let integrand = |y: f64| {
        let u = 1.0 - (-y).exp();
        let e = (-y).exp();
        p.value(u) * e * e
    };
    let mut out = Vec::with_capacity(DIVERGENCE_DELTAS.len());
    let mut acc = 0.0;
    let mut y_prev = 0.0;
    for &delta in DIVERGENCE_DELTAS.iter() {
        let y = -delta.ln();
        let panels = (((y - y_prev) * 800.0) as usize).max(64);
        acc += simpson(integrand, y_prev, y, panels);
        out.push((delta, acc));
        y_prev = y;
    }
    out
}

/// Largest sample of `[0, 1 - 1e-6]` at which `W0 > 0` and `W0' > 0` fail,
/// or zero when they hold everywhere. `None` when they fail at the top sample.
fn find_s_tilde<P: Potential + ?Sized>(p: &P, samples: usize) -> Option<f64> {
    let samples = samples.max(16);
    let top = 1.0 - 1e-6;
    let mut s_tilde = 0.0;
    for i in 0..samples {
        let s = top * i as f64 / (samples - 1) as f64;
        if !(p.value(s) > 0.0 && p.d1(s) > 0.0) {
            if i == samples - 1 {
                return None;
            }
            s_tilde = s;
        }
    }
    Some(s_tilde)
}

/// Checks the admissibility conditions on `W0` numerically and reports each one.
pub fn validate_potential<P: Potential + ?Sized>(p: &P, tail_samples: usize) -> ValidationReport {
    let tail_samples = tail_samples.max(16);
    let top = 1.0 - 1e-6;
    let mut clauses = Vec::new();

    // Evaluation and non-negativity on the tail scan.
    let mut bad_eval = None;
    let mut negative = None;
    for i in 0..tail_samples {
        let s = top * i as f64 / (tail_samples - 1) as f64;
        let vals: [f64; 5] = core::array::from_fn(|k| p.derivative(k, s));
        if vals.iter().any(|v| !v.is_finite()) && bad_eval.is_none() {
            bad_eval = Some(s);
        }
        if vals[0] < 0.0 && negative.is_none() {
            negative = Some((s, vals[0]));
        }
    }
    clauses.push(ClauseResult {
        clause: Clause::Evaluation,
        passed: bad_eval.is_none(),
        detail: match bad_eval {
            None => format!("{tail_samples} samples finite"),
            Some(s) => format!("non-finite derivative at s = {s}"),
        },
    });
    clauses.push(ClauseResult {
        clause: Clause::NonNegative,
        passed: negative.is_none(),
        detail: match negative {
            None => "W0 >= 0 on all samples".into(),
            Some((s, w)) => format!("W0({s}) = {w} < 0"),
        },
    });

    // Consecutive derivatives must agree with centred differences of the previous one.
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut worst_at = (0usize, 0.0f64);
    for i in 0..200 {
        let s = h + (0.95 - h) * i as f64 / 199.0;
        for k in 0..4 {
            let fd = (p.derivative(k, s + h) - p.derivative(k, s - h)) / (2.0 * h);
            let exact = p.derivative(k + 1, s);
            let scale = 1.0f64.max(exact.abs()).max(p.derivative(k, s).abs());
            let err = (fd - exact).abs() / scale;
            if !(err <= worst) {
                worst = if err.is_nan() { f64::INFINITY } else { err };
                worst_at = (k, s);
            }
        }
    }
    clauses.push(ClauseResult {
        clause: Clause::Smoothness,
        passed: worst <= 1e-5,
        detail: format!(
            "max relative finite-difference mismatch {worst:.3e} (order {} at s = {:.4})",
            worst_at.0 + 1,
            worst_at.1
        ),
    });

    // Listed zeros, and the quadratic limit at s = 0.
    let mut zero_problems: Vec<String> = Vec::new();
    for z in p.zeros() {
        let w = p.value(z);
        let w2 = p.d2(z);
        if !(0.0..1.0).contains(&z) {
            zero_problems.push(format!("zero {z} outside [0, 1)"));
        } else if !(w.abs() <= 1e-12) {
            zero_problems.push(format!("|W0({z})| = {w:e} > 1e-12"));
        } else if !(w2.is_finite() && w2 >= -1e-10) {
            zero_problems.push(format!("W0''({z}) = {w2} not a finite non-negative limit"));
        }
    }
    if !p.d2(0.0).is_finite() {
        zero_problems.push("W0''(0) is not finite".into());
    }
    clauses.push(ClauseResult {
        clause: Clause::ZeroSet,
        passed: zero_problems.is_empty(),
        detail: if zero_problems.is_empty() {
            format!("{} listed zeros verified", p.zeros().len())
        } else {
            zero_problems.join("; ")
        },
    });

    // Divergence of the tail integral: per-decade increments must stay positive and
    // must not decay, i.e. the partial integrals keep growing without a limit.
    let partial = tail_partial_integrals(p);
    let increments: Vec<f64> = partial.windows(2).map(|w| w[1].1 - w[0].1).collect();
    let finite = partial.iter().all(|(_, v)| v.is_finite());
    let growing = increments.iter().all(|&d| d > 0.0);
    let sustained = match (increments.first(), increments.last()) {
        (Some(&first), Some(&last)) => last >= 0.5 * first,
        _ => false,
    };
    clauses.push(ClauseResult {
        clause: Clause::TailDivergence,
        passed: finite && growing && sustained,
        detail: format!(
            "partial integrals {:?}; per-decade increments {:?}",
            partial.iter().map(|p| p.1).collect::<Vec<_>>(),
            increments
        ),
    });

    let s_tilde = find_s_tilde(p, tail_samples);
    clauses.push(ClauseResult {
        clause: Clause::TailMonotone,
        passed: s_tilde.is_some(),
        detail: match s_tilde {
            Some(s) => format!("W0 > 0 and W0' > 0 on ({s}, 1)"),
            None => "no threshold with W0 > 0 and W0' > 0 up to s = 1".into(),
        },
    });

    ValidationReport { potential: p.name(), clauses, s_tilde, partial_integrals: partial }
}

/// Bounds implied by a finite energy budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AprioriConstants {
    /// Bound on `sup |zeta|`.
    pub c_e: f64,
    /// Bound on `sup W0(|zeta|)`, equal to `W0(c_e)`.
    pub big_c_e: f64,
    /// Constant with `W0'(s)^2 <= k_e W0(s)` on `[0, c_e]`.
    pub k_e: f64,
    /// `sup |W0'|` on `[0, c_e]`.
    pub l_e: f64,
    /// `sup |W0'(s) / s|` on `[0, c_e]`.
    pub l_e_prime: f64,
    /// `sup |W0''|` on `[0, c_e]`.
    pub l_e_second: f64,
    /// The energy budget the constants were computed for.
    pub energy: f64,
    pub s_tilde: f64,
}

const SCAN_SAMPLES: usize = 100_000;

/// Golden-section refinement of a maximum bracketed by `[a, b]`.
fn refine_max(f: &impl Fn(f64) -> Result<f64, CoreError>, a: f64, b: f64) -> Result<f64, CoreError> {
    let g = 0.5 * (5.0f64.sqrt() - 1.0);
    let (mut a, mut b) = (a, b);
    let mut best = f(a)?.max(f(b)?);
    for _ in 0..60 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        let (fc, fd) = (f(c)?, f(d)?);
        best = best.max(fc).max(fd);
        if fc > fd {
            b = d;
        } else {
            a = c;
        }
        if b - a < 1e-15 {
            break;
        }
    }
    Ok(best)
}

/// `sup f` on `[0, top]` from a dense scan refined around the best sample.
fn scan_sup(f: impl Fn(f64) -> Result<f64, CoreError>, top: f64) -> Result<f64, CoreError> {
    let h = top / (SCAN_SAMPLES - 1) as f64;
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0usize;
    for i in 0..SCAN_SAMPLES {
        let v = f(i as f64 * h)?;
        if v > best {
            best = v;
            arg = i;
        }
    }
    let lo = arg.saturating_sub(1) as f64 * h;
    let hi = ((arg + 1).min(SCAN_SAMPLES - 1)) as f64 * h;
    Ok(best.max(refine_max(&f, lo, hi)?))
}

/// The energy-scaled bound integral `int_{s_tilde}^{S} W0(u) (S - u) du`.
pub fn bound_integral<P: Potential + ?Sized>(p: &P, s_tilde: f64, big_s: f64) -> f64 {
    if big_s <= s_tilde {
        return 0.0;
    }
    let y0 = -(1.0 - s_tilde).ln();
    let y1 = -(1.0 - big_s).ln();
    let integrand = |y: f64| {
        let one_minus_u = (-y).exp();
        let u = 1.0 - one_minus_u;
        p.value(u) * (big_s - u) * one_minus_u
    };
    simpson(integrand, y0, y1, 4000)
}

/// A priori constants for energy budget `energy` and wave speed `c`.
///
/// `c_e` solves `int_{s_tilde}^{c_e} W0(u)(c_e - u) du = max(E, E^2 / (8 c^2))` by bisection;
/// the second argument of the max is the sharp constant of the Sobolev-type
/// argument and only matters for large budgets.
pub fn apriori_constants<P: Potential + ?Sized>(
    p: &P,
    energy: f64,
    c: f64,
) -> Result<AprioriConstants, CoreError> {
    if !(energy > 0.0 && energy.is_finite()) {
        return Err(config_err(format!("energy budget {energy} must be positive")));
    }
    if !(c > 0.0) {
        return Err(config_err(format!("wave speed {c} must be positive")));
    }
    let s_tilde = find_s_tilde(p, 10_000)
        .ok_or_else(|| CoreError::InvalidPotential("no tail threshold s_tilde".into()))?;
    let target = energy.max(energy * energy / (8.0 * c * c));

    let mut lo = s_tilde;
    let mut hi = 1.0 - 1e-15;
    if bound_integral(p, s_tilde, hi) < target {
        return Err(CoreError::InvalidPotential(format!(
            "energy budget {energy} puts c_E within 1e-15 of 1 (bound integral below {target})"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if bound_integral(p, s_tilde, mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let c_e = hi;
    let zeros = p.zeros();

    let ratio = |s: f64| -> Result<f64, CoreError> {
        let w = p.value(s);
        let d = p.d1(s);
        if w > 0.0 {
            return Ok(d * d / w);
        }
        if let Some(&z) = zeros.iter().find(|&&z| (s - z).abs() < 1e-9) {
            return Ok(2.0 * p.d2(z));
        }
        if d == 0.0 {
            return Ok(0.0);
        }
        Err(CoreError::InvalidPotential(format!(
            "W0'^2/W0 unbounded at s = {s} (W0 = {w}, W0' = {d}) away from listed zeros"
        )))
    };
    let k_e = scan_sup(ratio, c_e)?;
    let l_e = scan_sup(|s| Ok(p.d1(s).abs()), c_e)?;
    let l_e_prime = scan_sup(
        |s| Ok(if s == 0.0 { p.d2(0.0).abs() } else { (p.d1(s) / s).abs() }),
        c_e,
    )?;
    let l_e_second = scan_sup(|s| Ok(p.d2(s).abs()), c_e)?;

    Ok(AprioriConstants {
        c_e,
        big_c_e: p.value(c_e),
        k_e,
        l_e,
        l_e_prime,
        l_e_second,
        energy,
        s_tilde,
    })
}
