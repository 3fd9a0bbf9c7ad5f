//! Acceptance gate: runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

use std::f64::consts::FRAC_PI_4;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use twonvw_core::asymptotic::{self, AsymptoticConfig, LagrangianCoefficients, SpaceTimeField, StudyNumerics};
use twonvw_core::coefficients::Clause;
use twonvw_core::diagnostics::{fit_order, DensitySnapshot, EnergyMonitor};
use twonvw_core::field::l2_norm;
use twonvw_core::hs2::{self, Gauge, MarkerState};
use twonvw_core::profiles::{Profile, Shape};
use twonvw_core::quasilinear::{self, PolarState, QuasilinearConfig};
use twonvw_core::semilinear::{self, SemilinearConfig};
use twonvw_core::{
    apriori_constants, BOUNDARY_TOL, validate_potential, BuiltinPotential, Complex64, ComplexField, CoreError, Grid1D, WaveSpeed,
};

struct Outcome {
    pass: bool,
    detail: String,
}

type Check = fn() -> Result<Outcome, CoreError>;

fn gauss(x: f64, c: f64, w: f64) -> f64 {
    (-((x - c) / w).powi(2)).exp()
}

fn energy(f: &ComplexField, p: &BuiltinPotential, c: f64) -> f64 {
    DensitySnapshot::from_complex(f, p, c).total_energy()
}

// 1. Free waves are reproduced exactly by node shifts.
fn free_wave_exactness() -> Result<Outcome, CoreError> {
    let n = 1024;
    let half = 0.01 * (n - 1) as f64;
    let g = Grid1D::new(-half, half, n)?;
    let c = 1.0;
    let amp = Complex64::new(0.4, -0.2);
    let profile = |x: f64| amp * gauss(x, 0.3, 0.7);
    let z = g.nodes().iter().map(|&x| profile(x)).collect();
    let f0 = ComplexField::new(g, z, vec![Complex64::new(0.0, 0.0); n], Complex64::new(0.0, 0.0), 0.0)?;
    let cfg = SemilinearConfig::new(&g, c, 0.25)?;
    let run = semilinear::picard_solve(&f0, &BuiltinPotential::Zero, &cfg, 1.0)?;
    let t = run.final_state.time;
    let err = g
        .nodes()
        .iter()
        .zip(&run.final_state.zeta)
        .map(|(&x, z)| (z - (profile(x - c * t) + profile(x + c * t)) * 0.5).norm())
        .fold(0.0, f64::max);
    Ok(Outcome { pass: err <= 1e-12 && (t - 1.0).abs() < 1e-12, detail: format!("max |error| = {err:.2e}") })
}

fn reference_data(n: usize) -> Result<ComplexField, CoreError> {
    // Smallest domain holding the numerical support of the bump plus unit travel and a
    // half-unit buffer for the spreading tail,
    // with dx = 1/m so that T = 1 stays grid aligned at c = 1; m doubles with n.
    let amplitude = 0.3;
    let reach = (amplitude / BOUNDARY_TOL).ln().sqrt() + 1.0 + 0.5;
    let m = ((1023.0 / (2.0 * reach)).floor() as usize) * n / 1024;
    let dx = 1.0 / m as f64;
    let half = 0.5 * dx * (n - 1) as f64;
    let g = Grid1D::new(-half, half, n)?;
    let z = g.nodes().iter().map(|&x| Complex64::new(amplitude, 0.0) * gauss(x, 0.0, 1.0)).collect();
    let zt = vec![Complex64::new(0.0, 0.0); n];
    ComplexField::new(g, z, zt, Complex64::new(0.0, 0.0), 0.0)
}

fn energy_drift(n: usize) -> Result<(f64, f64, bool), CoreError> {
    let p = BuiltinPotential::Reference;
    let c = 1.0;
    let f0 = reference_data(n)?;
    let e0 = energy(&f0, &p, c);
    let cfg = SemilinearConfig::from_energy(&f0.grid, c, &p, e0)?;
    let bound = apriori_constants(&p, e0, c)?.c_e;
    let mut monitor = EnergyMonitor::new(Some(bound));
    let run = semilinear::picard_solve_observed(&f0, &p, &cfg, 1.0, |f, _| {
        monitor.push(DensitySnapshot::from_complex(f, &p, c));
        Ok(())
    })?;
    let drift = (energy(&run.final_state, &p, c) - e0).abs();
    Ok((drift / e0, drift, monitor.any_violation()))
}

// 2. Second-order energy drift.
fn energy_conservation() -> Result<Outcome, CoreError> {
    let (rel_a, _, _) = energy_drift(1024)?;
    let (rel_b, abs_b, _) = energy_drift(2048)?;
    let ratio = rel_a / rel_b;
    Ok(Outcome {
        pass: (3.0..=5.0).contains(&ratio) && abs_b <= 1e-5,
        detail: format!("relative drift {rel_a:.3e} -> {rel_b:.3e} (ratio {ratio:.2}), absolute drift at n = 2048: {abs_b:.2e}"),
    })
}

fn random_field(rng: &mut ChaCha8Rng, g: Grid1D) -> Result<ComplexField, CoreError> {
    let mut z = vec![Complex64::new(0.0, 0.0); g.n()];
    let mut zt = z.clone();
    for _ in 0..3 {
        let (c, w) = (rng.gen_range(-2.0..2.0), rng.gen_range(0.5..1.2));
        let a = Complex64::from_polar(rng.gen_range(0.0..0.12), rng.gen_range(0.0..6.3));
        let b = Complex64::from_polar(rng.gen_range(0.0..0.1), rng.gen_range(0.0..6.3));
        for (i, x) in g.nodes().into_iter().enumerate() {
            z[i] += a * gauss(x, c, w);
            zt[i] += b * gauss(x, c, w);
        }
    }
    ComplexField::new(g, z, zt, Complex64::new(0.0, 0.0), 0.0)
}

const CONTRACTION_FLOOR: f64 = 1e-13;

// 3. Picard contraction on the window given by the contraction bound.
fn picard_contraction() -> Result<Outcome, CoreError> {
    let p = BuiltinPotential::Reference;
    let c = 1.0;
    let g = Grid1D::new(-12.0, 12.0, 385)?;
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut good = 0;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let f0 = random_field(&mut rng, g)?;
        let cfg = SemilinearConfig::from_energy(&g, c, &p, energy(&f0, &p, c))?;
        let t_final = cfg.dt * (2.0 / cfg.dt).round();
        let run = semilinear::picard_solve(&f0, &p, &cfg, t_final)?;
        let mut trial_worst = 0.0f64;
        for tr in &run.traces {
            for k in 0..tr.diff_norms.len().saturating_sub(1) {
                // Ratios below the rounding floor carry no information.
                if tr.diff_norms[k] > CONTRACTION_FLOOR {
                    trial_worst = trial_worst.max(tr.diff_norms[k + 1] / tr.diff_norms[k]);
                }
            }
        }
        worst = worst.max(trial_worst);
        if trial_worst <= 0.9 && run.traces.iter().all(|t| t.converged) {
            good += 1;
        }
    }
    Ok(Outcome { pass: good >= 19, detail: format!("{good}/20 trials contract (worst ratio {worst:.3})") })
}

// 4. The a priori bound holds in accepted runs and trips when the budget is understated.
fn apriori_bound() -> Result<Outcome, CoreError> {
    let p = BuiltinPotential::Reference;
    let c = 1.0;
    let mut violations = 0;
    let (_, _, v) = energy_drift(1024)?;
    violations += v as usize;
    let g = Grid1D::new(-12.0, 12.0, 385)?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..5 {
        let f0 = random_field(&mut rng, g)?;
        let e0 = energy(&f0, &p, c);
        let cfg = SemilinearConfig::from_energy(&g, c, &p, e0)?;
        let mut monitor = EnergyMonitor::new(Some(apriori_constants(&p, e0, c)?.c_e));
        semilinear::picard_solve_observed(&f0, &p, &cfg, cfg.dt * (1.0 / cfg.dt).round(), |f, _| {
            monitor.push(DensitySnapshot::from_complex(f, &p, c));
            Ok(())
        })?;
        violations += monitor.any_violation() as usize;
    }
    // Same data, monitored against a budget 10^4 times below its energy.
    let f0 = reference_data(1024)?;
    let e0 = energy(&f0, &p, c);
    let understated = apriori_constants(&p, 1e-4 * e0, c)?.c_e;
    let mut monitor = EnergyMonitor::new(Some(understated));
    let cfg = SemilinearConfig::from_energy(&f0.grid, c, &p, e0)?;
    let dt = f0.grid.dx() / c;
    semilinear::picard_solve_observed(&f0, &p, &cfg, (0.25 / dt).round() * dt, |f, _| {
        monitor.push(DensitySnapshot::from_complex(f, &p, c));
        Ok(())
    })?;
    let tripped = monitor.any_violation();
    Ok(Outcome {
        pass: violations == 0 && tripped,
        detail: format!("{violations} violations in 6 accepted runs; understated budget (c_E = {understated:.4}) tripped: {tripped}"),
    })
}

fn polar_data(g: Grid1D, ws: &WaveSpeed, psi0: f64) -> Result<PolarState, CoreError> {
    let xs = g.nodes();
    let psi = xs.iter().map(|&x| psi0 + 0.3 * gauss(x, 0.0, 1.0)).collect();
    let s = xs.iter().map(|&x| 0.5 + 0.1 * gauss(x, 0.4, 0.9)).collect();
    let psi_t = xs.iter().map(|&x| 0.2 * gauss(x, -0.3, 0.8)).collect();
    let s_t = xs.iter().map(|&x| -0.1 * gauss(x, 0.2, 1.1)).collect();
    let dpsi = xs.iter().map(|&x| 0.3 * -2.0 * x * gauss(x, 0.0, 1.0)).collect();
    let ds = xs.iter().map(|&x| 0.1 * -2.0 * (x - 0.4) / 0.81 * gauss(x, 0.4, 0.9)).collect();
    PolarState::from_jets(g, psi, s, psi_t, s_t, dpsi, ds, ws, (psi0, 0.5), 0.0)
}

// 5. Polar and complex solvers agree in the isotropic case.
fn polar_complex_cross() -> Result<Outcome, CoreError> {
    let p = BuiltinPotential::Flat4 { s0: 0.5 };
    let c = 1.0;
    let ws = WaveSpeed::isotropic(c)?;
    let mut pairs = Vec::new();
    for n in [256, 512, 1024] {
        let dx = 16.0 / n as f64;
        let g = Grid1D::new(-8.0, -8.0 + dx * (n - 1) as f64, n)?;
        let u0 = polar_data(g, &ws, 0.0)?;
        let f0 = u0.to_complex()?;
        let cfg = SemilinearConfig::from_energy(&g, c, &p, energy(&f0, &p, c))?;
        let semi = semilinear::picard_solve(&f0, &p, &cfg, 0.5)?;
        let qcfg = QuasilinearConfig::with_cfl(&g, &ws, 0.9);
        let quasi = quasilinear::evolve(&u0, &p, &ws, &qcfg, 0.5, |_| Ok(()))?;
        let zq = quasi.final_state.to_complex()?;
        let diff: Vec<Complex64> = zq.zeta.iter().zip(&semi.final_state.zeta).map(|(a, b)| a - b).collect();
        pairs.push((dx, l2_norm(&g, &diff)));
    }
    let order = fit_order(&pairs)?;
    let decreasing = pairs.windows(2).all(|w| w[1].1 < w[0].1);
    Ok(Outcome {
        pass: decreasing && order >= 0.8,
        detail: format!(
            "L2 differences {:.3e}, {:.3e}, {:.3e}; fitted order {order:.2}",
            pairs[0].1, pairs[1].1, pairs[2].1
        ),
    })
}

// 6. Discrete conservation-law residuals vanish under refinement.
fn conservation_residuals() -> Result<Outcome, CoreError> {
    let p = BuiltinPotential::Flat4 { s0: 0.5 };
    let ws = WaveSpeed::new(2.0, 1.0)?;
    let mut res_e = Vec::new();
    let mut res_f = Vec::new();
    for n in [201, 401, 801] {
        let g = Grid1D::new(-10.0, 10.0, n)?;
        let u0 = polar_data(g, &ws, FRAC_PI_4)?;
        let cfg = QuasilinearConfig::with_cfl(&g, &ws, 0.8);
        let mut monitor = EnergyMonitor::new(None);
        quasilinear::evolve(&u0, &p, &ws, &cfg, 1.0, |u| {
            monitor.push(DensitySnapshot::from_polar(u, &p, &ws));
            Ok(())
        })?;
        let reports = monitor.finish();
        let max = |f: fn(&twonvw_core::diagnostics::EnergyReport) -> Option<f64>| {
            reports.iter().filter_map(f).fold(0.0, f64::max)
        };
        res_e.push((g.dx(), max(|r| r.residual_e)));
        res_f.push((g.dx(), max(|r| r.residual_f)));
    }
    let (oe, of) = (fit_order(&res_e)?, fit_order(&res_f)?);
    Ok(Outcome {
        pass: oe >= 0.8 && of >= 0.8,
        detail: format!(
            "max residual_E {:.2e} -> {:.2e} (order {oe:.2}), residual_F {:.2e} -> {:.2e} (order {of:.2})",
            res_e[0].1, res_e[2].1, res_f[0].1, res_f[2].1
        ),
    })
}

// 7. Uniform data follow the complex Riccati solution.
fn riccati_exactness() -> Result<Outcome, CoreError> {
    let w0 = Complex64::new(-0.8, 0.6);
    let m0 = MarkerState::uniform(-1.0, 1.0, 101, |x| w0.re * x, |_| w0.re, |_| w0.im)?;
    let run = hs2::evolve(&m0, 1.0, 1e-3, Gauge::LeftDecay, &[])?;
    let m = run.into_result()?;
    let w = w0 / (1.0 + w0 * 0.5 * m.time);
    let e0 = m0.cell_energy();
    let mut werr = 0.0f64;
    let mut eerr = 0.0f64;
    for (k, e) in m.cell_energy().iter().enumerate() {
        werr = werr.max((Complex64::new(m.alpha[k], m.rho[k]) - w).norm());
        eerr = eerr.max((e - e0[k]).abs() / e0[k]);
    }
    Ok(Outcome {
        pass: werr <= 1e-8 && eerr <= 1e-10 && (m.time - 1.0).abs() < 1e-12,
        detail: format!("max |w - w_exact| = {werr:.2e}, max relative cell-energy change {eerr:.2e}"),
    })
}

fn dipole_markers(rho: impl Fn(f64) -> f64) -> Result<MarkerState, CoreError> {
    // u0 = -2 x exp(-x^2), so min u0' = -2 at x = 0.
    MarkerState::uniform(-4.0, 4.0, 401, |x| -2.0 * x * gauss(x, 0.0, 1.0), |x| -2.0 * (1.0 - 2.0 * x * x) * gauss(x, 0.0, 1.0), rho)
}

fn sup_alpha_through(m0: &MarkerState, t: f64) -> Result<(Option<hs2::BlowUp>, f64), CoreError> {
    let mut sup = m0.sup_alpha();
    let run = hs2::evolve_observed(m0, t, 1e-3, Gauge::LeftDecay, &(1..=1000).map(|k| t * k as f64 / 1000.0).collect::<Vec<_>>(), |m| {
        sup = sup.max(m.sup_alpha());
    })?;
    Ok((run.blowup, sup.max(run.final_state.sup_alpha())))
}

// 8. Breaking without density, regular with density bounded below.
fn blowup_dichotomy() -> Result<Outcome, CoreError> {
    let breaking = dipole_markers(|_| 0.0)?;
    let run = hs2::evolve(&breaking, 3.0, 1e-3, Gauge::LeftDecay, &[])?;
    let t_star = run.blowup.map(|b| b.t_star).unwrap_or(f64::NAN);
    let on_time = (t_star - 1.0).abs() <= 0.01;

    let sup_w0 = |m: &MarkerState| (0..m.len()).map(|k| m.alpha[k].hypot(m.rho[k])).fold(0.0, f64::max);
    // Density at least 0.5 everywhere and largest where the gradient is most negative.
    let dense = dipole_markers(|x| 0.5 + 1.5 * gauss(x, 0.0, 1.0))?;
    let (b1, sup1) = sup_alpha_through(&dense, 10.0)?;
    let bounded = b1.is_none() && sup1 <= sup_w0(&dense);

    // Constant density 0.5: no breaking; |alpha| stays under the exact
    // per-marker envelope |w0|^2 / (2 rho0).
    let thin = dipole_markers(|_| 0.5)?;
    let envelope = (0..thin.len())
        .map(|k| {
            let w2 = thin.alpha[k].powi(2) + thin.rho[k].powi(2);
            if thin.alpha[k] < 0.0 { w2 / (2.0 * thin.rho[k]) } else { w2.sqrt() }
        })
        .fold(0.0, f64::max);
    let (b2, sup2) = sup_alpha_through(&thin, 10.0)?;
    let regular = b2.is_none() && sup2 <= envelope * (1.0 + 1e-6);
    Ok(Outcome {
        pass: on_time && bounded && regular,
        detail: format!(
            "t* = {t_star:.5}; rho0 = 0.5 + 1.5 exp(-x^2): sup|alpha| = {sup1:.4} vs sup|w0| = {:.4}; \
             rho0 = 0.5: sup|alpha| = {sup2:.4} vs envelope {envelope:.4} (sup|w0| = {:.4})",
            sup_w0(&dense),
            sup_w0(&thin)
        ),
    })
}

// 9. Action gradient and strong form agree to second order.
fn el_consistency() -> Result<Outcome, CoreError> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let bumps: Vec<[f64; 5]> = (0..8)
        .map(|_| {
            [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.3..1.7),
                rng.gen_range(-1.5..1.5),
                rng.gen_range(0.5..1.0),
                rng.gen_range(0.0..1.0),
            ]
        })
        .collect();
    let field = |t: f64, x: f64, which: usize| {
        bumps
            .iter()
            .skip(which)
            .step_by(2)
            .map(|b| b[0] * (-((t - b[1]) / b[3]).powi(2) - ((x - b[2]) / b[3]).powi(2)).exp() * (1.0 + b[4] * x))
            .sum::<f64>()
    };
    let mut pairs = Vec::new();
    for h in [0.1, 0.05, 0.025] {
        let (nt, nx) = ((2.0 / h) as usize + 1, (6.0 / h) as usize + 1);
        let u = SpaceTimeField::from_fn(nt, nx, h, h, |i, j| field(i as f64 * h, -3.0 + j as f64 * h, 0));
        let r = SpaceTimeField::from_fn(nt, nx, h, h, |i, j| field(i as f64 * h, -3.0 + j as f64 * h, 1));
        let res = asymptotic::discrete_el_residual(&LagrangianCoefficients::UNIT, &u, &r)?;
        pairs.push((h, res.diff_norm()));
    }
    let order = fit_order(&pairs)?;
    Ok(Outcome {
        pass: order >= 1.7,
        detail: format!("differences {:.2e}, {:.2e}, {:.2e}; fitted order {order:.2}", pairs[0].1, pairs[1].1, pairs[2].1),
    })
}

// 10. The full system converges to the reduced one as eps -> 0.
fn asymptotic_reduction() -> Result<Outcome, CoreError> {
    let p = BuiltinPotential::Flat4 { s0: 0.5 };
    let base = AsymptoticConfig {
        psi0: FRAC_PI_4,
        s0: 0.5,
        epsilon: 0.2,
        wave_speed: WaveSpeed::new(2.0, 1.0)?,
        u_init: Shape::new(Profile::Gaussian { center: 0.0, width: 1.0 }, 1.0),
        rho_init: Shape::new(Profile::Dipole { center: 0.0, width: 1.0 }, 0.5),
    };
    let num = StudyNumerics::default();
    let eps = [0.2, 0.1, 0.05];
    let reference = asymptotic::hs2_reference(&base, 0.5, &num)?;
    let rows = std::thread::scope(|s| {
        let handles: Vec<_> = eps
            .iter()
            .map(|&e| {
                let (base, p, num, reference) = (&base, &p, &num, &reference);
                s.spawn(move || asymptotic::run_epsilon(base, p, e, 0.5, num, reference))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep thread panicked")).collect::<Vec<_>>()
    });
    let table = asymptotic::assemble(&base, 0.5, rows)?;
    let errs: Vec<String> = table.rows.iter().map(|r| format!("{:.3e}", r.error)).collect();
    let order = table.order.unwrap_or(f64::NAN);
    Ok(Outcome {
        pass: table.strictly_decreasing() && order >= 0.8,
        detail: format!("errors {} at eps = 0.2, 0.1, 0.05; fitted order {order:.2}", errs.join(", ")),
    })
}

// 11. Admissible potentials pass, the quadratic one fails on divergence.
fn potential_gate() -> Result<Outcome, CoreError> {
    let reference = validate_potential(&BuiltinPotential::Reference, 2000).is_valid();
    let flat = validate_potential(&BuiltinPotential::Flat4 { s0: 0.5 }, 2000).is_valid();
    let quad = validate_potential(&BuiltinPotential::Quadratic, 2000);
    let rejected = quad.clause(Clause::TailDivergence).is_some_and(|c| !c.passed);
    let message = quad.into_result().err().map(|e| e.to_string()).unwrap_or_default();
    let named = message.contains(Clause::TailDivergence.key());
    Ok(Outcome {
        pass: reference && flat && rejected && named,
        detail: format!("reference valid: {reference}, flat4 valid: {flat}, quadratic rejected with \"{message}\""),
    })
}

fn main() -> ExitCode {
    let criteria: [(&str, Check, u64); 11] = [
        ("free-wave exactness", free_wave_exactness, 5),
        ("semilinear energy conservation", energy_conservation, 60),
        ("Picard contraction", picard_contraction, 120),
        ("a priori bound", apriori_bound, 30),
        ("polar/complex cross-oracle", polar_complex_cross, 120),
        ("conservation-law residuals", conservation_residuals, 120),
        ("Riccati exactness", riccati_exactness, 5),
        ("blow-up dichotomy", blowup_dichotomy, 10),
        ("Euler-Lagrange consistency", el_consistency, 30),
        ("asymptotic reduction", asymptotic_reduction, 600),
        ("potential gate", potential_gate, 5),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let results: Vec<Option<(bool, String)>> = std::thread::scope(|s| {
        let handles: Vec<_> = criteria
            .iter()
            .enumerate()
            .map(|(i, &(name, check, budget))| {
                let selected = filter.is_empty() || filter.iter().any(|f| f == &(i + 1).to_string());
                s.spawn(move || {
                    if !selected {
                        return None;
                    }
                    let start = Instant::now();
                    let outcome = check();
                    let took = start.elapsed();
                    let in_time = took <= Duration::from_secs(budget);
                    Some(match outcome {
                        Ok(o) => (
                            o.pass && in_time,
                            format!("{name}: {} ({:.1} s of {budget} s)", o.detail, took.as_secs_f64()),
                        ),
                        Err(e) => (false, format!("{name}: error: {e}")),
                    })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("criterion panicked")).collect()
    });
    let mut failed = 0;
    for (i, r) in results.into_iter().enumerate() {
        if let Some((pass, line)) = r {
            println!("criterion {:>2} {}: {line}", i + 1, if pass { "PASS" } else { "FAIL" });
            failed += (!pass) as usize;
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
