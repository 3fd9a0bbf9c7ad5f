//! Executes a validated configuration and writes its artifacts.
//!
//! Every run directory gets a `manifest.json` holding the canonical
//! configuration, crate versions, the time actually reached and the outcome,
//! whether or not the solver succeeded.

use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::path::PathBuf;

use serde_json::{json, Value};
use twonvw_core::asymptotic::{self, AsymptoticConfig, RowStatus, StudyNumerics, StudyTable};
use twonvw_core::diagnostics::{fit_order, DensitySnapshot, EnergyMonitor, EnergyReport};
use twonvw_core::hs2::{self, Gauge, MarkerState};
use twonvw_core::profiles::{Profile, Shape};
use twonvw_core::quasilinear::{self, PolarState, QuasilinearConfig};
use twonvw_core::semilinear::{self, SemilinearConfig};
use twonvw_core::{
    apriori_constants, validate_potential, BuiltinPotential, Complex64, ComplexField, CoreError, Grid1D, Potential,
    WaveSpeed,
};

use crate::config::{self, ConfigError, GaugeSpec, RunConfig, Solver, DEFAULT_HS2_DT};
use crate::init::Source;
use crate::output::{Cell, Csv, OutDir};

/// Sample count of the divergence sweep in `validate-potential`.
pub const TAIL_SAMPLES: usize = 2000;

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Core(CoreError),
    Io(io::Error),
}

impl RunError {
    /// Process exit status for this failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => 2,
            RunError::Core(e) => core_exit_code(e),
            RunError::Io(_) => 1,
        }
    }
}

/// Usage errors 2, degeneracy 3, non-contraction 4, wavebreaking 5, domain 6.
pub fn core_exit_code(e: &CoreError) -> u8 {
    match e {
        CoreError::Config(_) | CoreError::Data(_) | CoreError::InvalidPotential(_) => 2,
        CoreError::Degeneracy { .. } | CoreError::StateEscape { .. } => 3,
        CoreError::NonContraction { .. } => 4,
        CoreError::Wavebreaking { .. } | CoreError::WindowCollapse { .. } => 5,
        CoreError::Domain(_) => 6,
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Core(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<CoreError> for RunError {
    fn from(e: CoreError) -> Self {
        RunError::Core(e)
    }
}

impl From<io::Error> for RunError {
    fn from(e: io::Error) -> Self {
        RunError::Io(e)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Options {
    pub out_dir: PathBuf,
    /// Directory that relative table paths in the configuration are resolved against.
    pub base_dir: PathBuf,
    pub epsilon_sweep: Option<Vec<f64>>,
}

/// What a run reached, for the manifest and the console summary.
#[derive(Debug, Default)]
struct Progress {
    achieved_t: Option<f64>,
    extra: BTreeMap<String, Value>,
    lines: Vec<String>,
}

/// Runs `cfg` and returns the summary lines on success.
pub fn run(mut cfg: RunConfig, opts: &Options) -> Result<Vec<String>, RunError> {
    if let Some(eps) = &opts.epsilon_sweep {
        match cfg.asymptotic.as_mut() {
            Some(a) if cfg.solver == Solver::Asymptotic => {
                a.epsilons = eps.clone();
                // Re-run validation on the overridden sweep.
                cfg = config::parse(&config::dump(&cfg))?;
            }
            _ => return Err(ConfigError::invalid("--epsilon-sweep", "only applies to the asymptotic solver").into()),
        }
    }
    let mut out = OutDir::create(&opts.out_dir)?;
    let mut progress = Progress::default();
    let result = match cfg.solver {
        Solver::Semilinear => run_semilinear(&cfg, opts, &mut out, &mut progress),
        Solver::Quasilinear => run_quasilinear(&cfg, opts, &mut out, &mut progress),
        Solver::Hs2 => run_hs2(&cfg, opts, &mut out, &mut progress),
        Solver::Asymptotic => run_asymptotic(&cfg, opts, &mut out, &mut progress),
        Solver::ValidatePotential => run_validate(&cfg, &mut out, &mut progress),
    };
    write_manifest(&cfg, &mut out, &progress, result.as_ref().err())?;
    result.map(|()| progress.lines)
}

fn write_manifest(cfg: &RunConfig, out: &mut OutDir, progress: &Progress, err: Option<&RunError>) -> io::Result<()> {
    let config: Value = serde_json::from_str(&config::dump(cfg)).map_err(io::Error::other)?;
    let mut manifest = json!({
        "config": config,
        "versions": {
            "twonvw-cli": env!("CARGO_PKG_VERSION"),
            "twonvw-core": twonvw_core_version(),
        },
        "solver": cfg.solver.name(),
        "achieved_T": progress.achieved_t,
        "status": if err.is_none() { "ok" } else { "failed" },
        "exit_code": err.map_or(0, |e| e.exit_code()),
        "error": err.map(|e| e.to_string()),
        "artifacts": out.written(),
    });
    let map = manifest.as_object_mut().expect("manifest is an object");
    for (k, v) in &progress.extra {
        map.insert(k.clone(), v.clone());
    }
    out.write_json("manifest.json", &manifest)
}

fn twonvw_core_version() -> &'static str {
    // Both crates share the workspace version.
    env!("CARGO_PKG_VERSION")
}

fn potential(cfg: &RunConfig) -> Result<BuiltinPotential, RunError> {
    BuiltinPotential::by_name(&cfg.potential.name, cfg.potential.params.s0).map_err(|e| {
        let field = if matches!(e, CoreError::Config(ref m) if m.contains("s0")) { "potential.params.s0" } else { "potential.name" };
        RunError::Config(ConfigError::invalid(field, e.to_string()))
    })
}

fn wave_speed(cfg: &RunConfig) -> Result<WaveSpeed, RunError> {
    let ws = cfg.wave_speed.expect("validated");
    WaveSpeed::new(ws.k1, ws.k3).map_err(|e| ConfigError::invalid("wave_speed", e.to_string()).into())
}

fn grid(cfg: &RunConfig) -> Result<Grid1D, RunError> {
    let g = cfg.grid.expect("validated");
    Grid1D::new(g.x_min, g.x_max, g.n).map_err(|e| ConfigError::invalid("grid", e.to_string()).into())
}

fn components(cfg: &RunConfig, opts: &Options) -> Result<BTreeMap<String, Source>, RunError> {
    cfg.initial_data
        .components
        .iter()
        .map(|(name, spec)| {
            let field = format!("initial_data.components.{name}");
            Ok((name.clone(), Source::build(spec, name, &field, cfg.seed, &opts.base_dir)?))
        })
        .collect()
}

fn sample(comps: &BTreeMap<String, Source>, name: &str, xs: &[f64]) -> Vec<f64> {
    comps.get(name).map_or_else(|| vec![0.0; xs.len()], |s| s.values(xs))
}

fn sample_derivative(comps: &BTreeMap<String, Source>, name: &str, g: &Grid1D) -> Vec<f64> {
    comps.get(name).map_or_else(|| vec![0.0; g.n()], |s| s.derivatives(g))
}

fn energy_csv(reports: &[EnergyReport]) -> Csv {
    let mut csv = Csv::new(&["time", "total_E", "total_F", "residual_E", "residual_F", "sup_state", "apriori_violated"]);
    for r in reports {
        csv.row(&[
            Cell::Real(r.time),
            Cell::Real(r.total_e),
            Cell::Real(r.total_f),
            r.residual_e.into(),
            r.residual_f.into(),
            Cell::Real(r.sup_state),
            Cell::Bool(r.apriori_violated),
        ]);
    }
    csv
}

/// Snapshot recorded during a run, written once the solver returns.
struct Snapshot {
    requested: f64,
    time: f64,
    csv: Csv,
}

fn write_snapshots(out: &mut OutDir, progress: &mut Progress, snaps: Vec<Snapshot>) -> io::Result<()> {
    let mut index = Vec::new();
    for (i, s) in snaps.into_iter().enumerate() {
        let name = format!("snapshot_{i:03}.csv");
        out.write_csv(&name, &s.csv)?;
        index.push(json!({ "file": name, "requested_time": s.requested, "time": s.time }));
    }
    progress.extra.insert("snapshots".into(), Value::Array(index));
    Ok(())
}

fn energy_summary(progress: &mut Progress, reports: &[EnergyReport]) {
    if let (Some(first), Some(last)) = (reports.first(), reports.last()) {
        let drift = (last.total_e - first.total_e).abs() / first.total_e.abs().max(f64::MIN_POSITIVE);
        let violations = reports.iter().filter(|r| r.apriori_violated).count();
        progress.lines.push(format!(
            "energy {:.6e} -> {:.6e} (relative drift {drift:.3e}), a priori violations: {violations}",
            first.total_e, last.total_e
        ));
        progress.extra.insert("relative_energy_drift".into(), json!(drift));
    }
}

fn run_semilinear(cfg: &RunConfig, opts: &Options, out: &mut OutDir, progress: &mut Progress) -> Result<(), RunError> {
    let p = potential(cfg)?;
    let ws = cfg.wave_speed.expect("validated");
    if ws.k1 != ws.k3 {
        return Err(ConfigError::invalid("wave_speed.K3", "the semilinear solver needs K1 = K3").into());
    }
    let c = wave_speed(cfg)?.c_max();
    let g = grid(cfg)?;
    let time = cfg.time.expect("validated");
    let dt = g.dx() / c;
    if let Some(d) = time.dt {
        if (d - dt).abs() > 1e-12 * dt {
            return Err(ConfigError::invalid("time.dt", format!("steps are grid aligned, so dt must equal dx / c = {dt}")).into());
        }
    }
    let steps = time.t_final / dt;
    if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
        return Err(ConfigError::invalid(
            "time.t_final",
            format!("must be a whole number of grid-aligned steps dx / c = {dt} (got {steps} steps)"),
        )
        .into());
    }
    let comps = components(cfg, opts)?;
    let xs = g.nodes();
    let far = cfg.initial_data.far_field.unwrap_or([0.0, 0.0]);
    let far = Complex64::new(far[0], far[1]);
    let complex = |re: &str, im: &str, base: Complex64| -> Vec<Complex64> {
        sample(&comps, re, &xs).into_iter().zip(sample(&comps, im, &xs)).map(|(a, b)| base + Complex64::new(a, b)).collect()
    };
    let f0 = ComplexField::new(g, complex("zeta_re", "zeta_im", far), complex("zeta_t_re", "zeta_t_im", Complex64::new(0.0, 0.0)), far, 0.0)?;

    let e0 = DensitySnapshot::from_complex(&f0, &p, c).total_energy();
    let bound = apriori_constants(&p, e0, c)?.c_e;
    let scfg = SemilinearConfig::from_energy(&g, c, &p, e0)?;
    progress.extra.insert(
        "semilinear".into(),
        json!({ "c": c, "dt": dt, "window": scfg.t_window, "initial_energy": e0, "apriori_bound": bound }),
    );
    progress.extra.insert("conventions".into(), json!({ "flux": "F = Re(conj(zeta_t) zeta_x); residual_E measures E_t - (c^2 F)_x" }));

    let targets: Vec<(usize, f64)> = cfg.outputs.snapshot_times.iter().map(|&t| ((t / dt).round() as usize, t)).collect();
    let every = cfg.outputs.energy_every;
    let mut monitor = EnergyMonitor::new(Some(bound));
    let mut snaps = Vec::new();
    let mut level = 0usize;
    let mut achieved = None;
    let result = semilinear::picard_solve_observed(&f0, &p, &scfg, time.t_final, |f, _| {
        if level % every == 0 {
            monitor.push(DensitySnapshot::from_complex(f, &p, c));
        }
        for &(k, t) in &targets {
            if k == level {
                let mut csv = Csv::new(&["x", "zeta_re", "zeta_im", "zeta_t_re", "zeta_t_im"]);
                for i in 0..f.grid.n() {
                    csv.reals(&[f.grid.x(i), f.zeta[i].re, f.zeta[i].im, f.zeta_t[i].re, f.zeta_t[i].im]);
                }
                snaps.push(Snapshot { requested: t, time: f.time, csv });
            }
        }
        achieved = Some(f.time);
        level += 1;
        Ok(())
    });
    progress.achieved_t = achieved;
    let reports = monitor.finish();
    out.write_csv("energy.csv", &energy_csv(&reports))?;
    write_snapshots(out, progress, snaps)?;
    energy_summary(progress, &reports);
    let run = result?;
    let windows: Vec<Value> = run
        .traces
        .iter()
        .map(|t| json!({ "window_start": t.window_start, "steps": t.steps, "iterates": t.iterate_count, "diff_norms": t.diff_norms, "converged": t.converged }))
        .collect();
    out.write_json("windows.json", &windows)?;
    progress.lines.insert(0, format!("semilinear: reached t = {} in {} windows", run.final_state.time, run.traces.len()));
    Ok(())
}

fn run_quasilinear(cfg: &RunConfig, opts: &Options, out: &mut OutDir, progress: &mut Progress) -> Result<(), RunError> {
    let p = potential(cfg)?;
    let ws = wave_speed(cfg)?;
    let g = grid(cfg)?;
    let time = cfg.time.expect("validated");
    let far = match (cfg.initial_data.far_field, p.flat_point()) {
        (Some([psi, s]), _) => (psi, s),
        (None, Some(s0)) => (0.0, s0),
        (None, None) => {
            return Err(ConfigError::invalid(
                "initial_data.far_field",
                "required: [psi, s] at infinity, with s a critical point of the potential",
            )
            .into())
        }
    };
    let comps = components(cfg, opts)?;
    let xs = g.nodes();
    let shifted = |name: &str, base: f64| -> Vec<f64> { sample(&comps, name, &xs).into_iter().map(|v| base + v).collect() };
    let u0 = PolarState::from_jets(
        g,
        shifted("psi", far.0),
        shifted("s", far.1),
        sample(&comps, "psi_t", &xs),
        sample(&comps, "s_t", &xs),
        sample_derivative(&comps, "psi", &g),
        sample_derivative(&comps, "s", &g),
        &ws,
        far,
        0.0,
    )?;
    let mut qcfg = QuasilinearConfig::with_cfl(&g, &ws, time.cfl.unwrap_or(config::DEFAULT_CFL));
    if let Some(dt) = time.dt {
        qcfg.dt = dt;
    }
    qcfg.check(&g, &ws).map_err(|e| ConfigError::invalid(if time.dt.is_some() { "time.dt" } else { "time.cfl" }, e.to_string()))?;
    let levels = (time.t_final / qcfg.dt).ceil().max(1.0);
    let dt_eff = time.t_final / levels;
    progress.extra.insert(
        "quasilinear".into(),
        json!({ "far_field": [far.0, far.1], "dt": dt_eff, "initial_energy": u0.total_energy(&p, &ws) }),
    );
    progress.extra.insert("conventions".into(), json!({ "flux": "F = (s^2 phi omega + v r) / c(psi); residual_E measures E_t - (c^2 F)_x" }));

    let every = cfg.outputs.energy_every;
    let targets = &cfg.outputs.snapshot_times;
    let mut next = 0usize;
    let mut monitor = EnergyMonitor::new(None);
    let mut snaps = Vec::new();
    let mut level = 0usize;
    let mut achieved = None;
    let result = quasilinear::evolve(&u0, &p, &ws, &qcfg, time.t_final, |u| {
        if level % every == 0 {
            monitor.push(DensitySnapshot::from_polar(u, &p, &ws));
        }
        while next < targets.len() && u.time >= targets[next] - 0.5 * dt_eff {
            let mut csv = Csv::new(&["x", "psi", "s", "phi", "v", "omega", "r"]);
            for i in 0..u.grid.n() {
                csv.reals(&[u.grid.x(i), u.psi[i], u.s[i], u.phi[i], u.v[i], u.omega[i], u.r[i]]);
            }
            snaps.push(Snapshot { requested: targets[next], time: u.time, csv });
            next += 1;
        }
        achieved = Some(u.time);
        level += 1;
        Ok(())
    });
    progress.achieved_t = achieved;
    let reports = monitor.finish();
    out.write_csv("energy.csv", &energy_csv(&reports))?;
    write_snapshots(out, progress, snaps)?;
    energy_summary(progress, &reports);
    let run = result?;
    let windows: Vec<Value> = run
        .windows
        .iter()
        .map(|w| {
            json!({
                "window_start": w.window_start, "attempted_t": w.attempted_t, "achieved_t": w.achieved_t,
                "halvings": w.halvings, "diff_norms": w.diff_norms,
                "energy_budget": w.energy_budget, "norm_budget": w.norm_budget,
            })
        })
        .collect();
    out.write_json("windows.json", &windows)?;
    progress
        .lines
        .insert(0, format!("quasilinear: reached t = {} with dt = {} in {} windows", run.final_state.time, run.dt, run.windows.len()));
    Ok(())
}

fn gauge(spec: GaugeSpec) -> Gauge {
    match spec {
        GaugeSpec::LeftDecay => Gauge::LeftDecay,
        GaugeSpec::RightDecay => Gauge::RightDecay,
    }
}

fn hs2_markers(cfg: &RunConfig, opts: &Options) -> Result<MarkerState, RunError> {
    let spec = cfg.hs2.expect("filled by defaults");
    let comps = components(cfg, opts)?;
    let support = comps
        .values()
        .map(Source::support)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (c, d)| (a.min(c), b.max(d)));
    if !(support.1 > support.0) {
        return Err(ConfigError::invalid("initial_data.components", "hs2 needs at least one of u, alpha, rho").into());
    }
    let margin = 0.1 * (support.1 - support.0);
    let lattice = Grid1D::new(support.0 - margin, support.1 + margin, spec.markers)?;
    let xi = lattice.nodes();
    let n = xi.len();
    let (u, alpha) = match (comps.get("u"), comps.get("alpha")) {
        (Some(u), _) => (u.values(&xi), u.derivatives(&lattice)),
        (None, Some(a)) => {
            let mut u = a.antiderivative(&lattice);
            if spec.gauge == GaugeSpec::RightDecay {
                let total = u[n - 1];
                u.iter_mut().for_each(|v| *v -= total);
            }
            (u, a.values(&xi))
        }
        (None, None) => (vec![0.0; n], vec![0.0; n]),
    };
    let rho = sample(&comps, "rho", &xi);
    Ok(MarkerState { x: xi.clone(), xi, u, alpha, rho, j: vec![1.0; n], time: 0.0 })
}

fn run_hs2(cfg: &RunConfig, opts: &Options, out: &mut OutDir, progress: &mut Progress) -> Result<(), RunError> {
    let spec = cfg.hs2.expect("filled by defaults");
    let time = cfg.time.expect("validated");
    let m0 = hs2_markers(cfg, opts)?;
    let grad = m0.sup_alpha();
    let dt = match time.dt {
        Some(dt) => dt,
        None if grad > 0.0 => DEFAULT_HS2_DT.min(hs2::MAX_STEP_GRADIENT / grad),
        None => DEFAULT_HS2_DT,
    };
    if dt * grad > hs2::MAX_STEP_GRADIENT {
        return Err(ConfigError::invalid(
            "time.dt",
            format!("dt * max|alpha| = {} exceeds {}", dt * grad, hs2::MAX_STEP_GRADIENT),
        )
        .into());
    }
    let g = gauge(spec.gauge);
    progress.extra.insert("gauge".into(), json!(g.name()));
    progress.extra.insert("hs2".into(), json!({ "markers": m0.len(), "dt": dt, "xi_range": [m0.xi[0], m0.xi[m0.len() - 1]] }));

    let mut times = vec![0.0];
    times.extend(cfg.outputs.snapshot_times.iter().copied().filter(|&t| t > 0.0 && t < time.t_final));
    let run = hs2::evolve(&m0, time.t_final, dt, g, &times)?;

    let mut traj = Csv::new(&["t", "xi", "x", "u", "alpha", "rho", "J"]);
    let mut energy = Csv::new(&["t", "total_energy", "mass", "min_J", "sup_alpha"]);
    let mut states: Vec<&MarkerState> = run.snapshots.iter().collect();
    if states.last().map_or(true, |s| s.time != run.final_state.time) {
        states.push(&run.final_state);
    }
    for m in &states {
        for i in 0..m.len() {
            traj.reals(&[m.time, m.xi[i], m.x[i], m.u[i], m.alpha[i], m.rho[i], m.j[i]]);
        }
        energy.reals(&[m.time, m.total_energy(), m.mass(), m.min_jacobian().1, m.sup_alpha()]);
    }
    out.write_csv("trajectory.csv", &traj)?;
    out.write_csv("energy.csv", &energy)?;
    let report = match &run.blowup {
        Some(b) => json!({ "broke": true, "t_star": b.t_star, "marker_index": b.marker, "time": b.time }),
        None => json!({ "broke": false, "t_star": null, "marker_index": null, "time": null }),
    };
    out.write_json("blowup.json", &report)?;
    progress.achieved_t = Some(run.final_state.time);
    progress.lines.push(format!("hs2: {} markers, {} steps, reached t = {}", m0.len(), run.steps, run.final_state.time));
    if let Some(b) = run.blowup {
        progress.lines.push(format!("wavebreaking at t = {} (extrapolated t* = {}, marker {})", b.time, b.t_star, b.marker));
        return Err(CoreError::from(b).into());
    }
    Ok(())
}

fn single_shape(comps: &BTreeMap<String, Source>, name: &str) -> Result<Shape, RunError> {
    match comps.get(name) {
        None => Ok(Shape::new(Profile::Gaussian { center: 0.0, width: 1.0 }, 0.0)),
        Some(src) => src.as_shape().ok_or_else(|| {
            ConfigError::invalid(format!("initial_data.components.{name}"), "the asymptotic study needs a single analytic profile").into()
        }),
    }
}

fn study_json(table: &StudyTable) -> Value {
    let rows: Vec<Value> = table
        .rows
        .iter()
        .map(|r| {
            let (status, message) = match &r.status {
                RowStatus::Ok => ("ok", None),
                RowStatus::Failed(e) => ("failed", Some(e.to_string())),
            };
            json!({
                "epsilon": r.epsilon, "fast_time": r.fast_time, "grid_points": r.grid_points,
                "error_u": r.error_u, "error_rho": r.error_rho, "error": r.error,
                "status": status, "message": message,
            })
        })
        .collect();
    json!({
        "t_slow": table.t_slow,
        "gauge": table.gauge.name(),
        "rescaling": { "time_scale": table.map.time_scale, "rho_scale": table.map.rho_scale },
        "rows": rows,
        "fitted_order": table.order,
        "strictly_decreasing": table.strictly_decreasing(),
    })
}

fn run_asymptotic(cfg: &RunConfig, opts: &Options, out: &mut OutDir, progress: &mut Progress) -> Result<(), RunError> {
    let p = potential(cfg)?;
    let ws = wave_speed(cfg)?;
    let spec = cfg.asymptotic.clone().expect("validated");
    let s0 = p.flat_point().ok_or_else(|| {
        RunError::Config(ConfigError::invalid("potential.name", "the asymptotic study needs a potential with a flat point (flat4)"))
    })?;
    let comps = components(cfg, opts)?;
    let base = AsymptoticConfig {
        psi0: spec.psi0,
        s0,
        epsilon: spec.epsilons[0],
        wave_speed: ws,
        u_init: single_shape(&comps, "u")?,
        rho_init: single_shape(&comps, "rho")?,
    };
    for &eps in &spec.epsilons {
        base.with_epsilon(eps).validate(&p)?;
    }
    let num = StudyNumerics {
        dx: spec.dx,
        cfl: spec.cfl,
        pad: spec.pad,
        markers: spec.markers,
        marker_dt: spec.marker_dt,
        compare_points: spec.compare_points,
    };
    let t_slow = cfg.time.expect("validated").t_final;
    let reference = asymptotic::hs2_reference(&base, t_slow, &num)?;
    let mut csv = Csv::new(&["y", "u", "rho"]);
    for (i, y) in reference.window.nodes().into_iter().enumerate() {
        csv.reals(&[y, reference.u[i], reference.rho[i]]);
    }
    out.write_csv("reference.csv", &csv)?;

    // One worker per epsilon; rows come back in sweep order.
    let rows = std::thread::scope(|scope| {
        let handles: Vec<_> = spec
            .epsilons
            .iter()
            .map(|&eps| {
                let (base, p, num, reference) = (&base, &p, &num, &reference);
                scope.spawn(move || asymptotic::run_epsilon(base, p, eps, t_slow, num, reference))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("study worker panicked")).collect::<Vec<_>>()
    });
    let table = asymptotic::assemble(&base, t_slow, rows)?;
    out.write_json("study.json", &study_json(&table))?;
    progress.extra.insert("gauge".into(), json!(table.gauge.name()));
    for r in &table.rows {
        progress.lines.push(match &r.status {
            RowStatus::Ok => format!("eps = {}: error {:.6e} (u {:.6e}, rho {:.6e})", r.epsilon, r.error, r.error_u, r.error_rho),
            RowStatus::Failed(e) => format!("eps = {}: failed: {e}", r.epsilon),
        });
    }
    if let Some(order) = table.order {
        progress.lines.push(format!("fitted order {order:.3}"));
    }
    if let Some(e) = table.rows.iter().find_map(|r| match &r.status {
        RowStatus::Failed(e) => Some(e.clone()),
        RowStatus::Ok => None,
    }) {
        return Err(e.into());
    }
    progress.achieved_t = Some(t_slow);
    Ok(())
}

fn run_validate(cfg: &RunConfig, out: &mut OutDir, progress: &mut Progress) -> Result<(), RunError> {
    let p = potential(cfg)?;
    let report = validate_potential(&p, TAIL_SAMPLES);
    let clauses: Vec<Value> = report
        .clauses
        .iter()
        .map(|c| json!({ "clause": c.clause.key(), "passed": c.passed, "detail": c.detail }))
        .collect();
    let json = json!({
        "potential": report.potential,
        "valid": report.is_valid(),
        "s_tilde": report.s_tilde,
        "clauses": clauses,
        "partial_integrals": report.partial_integrals.iter().map(|&(d, v)| json!({ "delta": d, "integral": v })).collect::<Vec<_>>(),
    });
    out.write_json("report.json", &json)?;
    for c in &report.clauses {
        progress.lines.push(format!("{}: {}", c.clause.key(), if c.passed { "pass" } else { "FAIL" }));
    }
    report.into_result()?;
    Ok(())
}

/// Input of `fit-order`: `(h, error)` pairs.
#[derive(Debug, Clone, PartialEq, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitInput {
    pub pairs: Vec<(f64, f64)>,
}

/// Least-squares slope of `log error` against `log h`.
pub fn run_fit(input: &FitInput, out_dir: Option<&std::path::Path>) -> Result<Vec<String>, RunError> {
    let order = fit_order(&input.pairs).map_err(|e| ConfigError::invalid("pairs", e.to_string()))?;
    if let Some(dir) = out_dir {
        let mut out = OutDir::create(dir)?;
        out.write_json("fit.json", &json!({ "pairs": input.pairs, "order": order }))?;
    }
    Ok(vec![format!("fitted order {order:.6}")])
}
