//! Run configuration: strict JSON loading, defaults, validation and the
//! canonical dump used for manifests.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

/// Why a configuration could not be used.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Io { path: String, message: String },
    Parse { line: usize, column: usize, message: String },
    Invalid { field: String, message: String },
}

impl ConfigError {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Invalid { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Io { path, message } => write!(f, "cannot read {path}: {message}"),
            Self::Parse { line, column, message } => write!(f, "parse error at line {line}, column {column}: {message}"),
            Self::Invalid { field, message } => write!(f, "invalid value for {field}: {message}"),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    Semilinear,
    Quasilinear,
    Hs2,
    Asymptotic,
    ValidatePotential,
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Solver::Semilinear => "semilinear",
            Solver::Quasilinear => "quasilinear",
            Solver::Hs2 => "hs2",
            Solver::Asymptotic => "asymptotic",
            Solver::ValidatePotential => "validate-potential",
        }
    }

    /// Component names accepted under `initial_data.components`.
    fn components(self) -> &'static [&'static str] {
        match self {
            Solver::Semilinear => &["zeta_re", "zeta_im", "zeta_t_re", "zeta_t_im"],
            Solver::Quasilinear => &["psi", "s", "psi_t", "s_t"],
            Solver::Hs2 => &["u", "alpha", "rho"],
            Solver::Asymptotic => &["u", "rho"],
            Solver::ValidatePotential => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    /// `reference`, `flat4`, `quadratic` or `zero`.
    pub name: String,
    #[serde(default)]
    pub params: PotentialParams,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialParams {
    /// Flat point of `flat4`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s0: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveSpeedSpec {
    #[serde(rename = "K1")]
    pub k1: f64,
    #[serde(rename = "K3")]
    pub k3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub t_final: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cfl: Option<f64>,
}

/// One scalar component of the initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ShapeSpec {
    Gaussian { amplitude: f64, center: f64, width: f64 },
    SinePacket { amplitude: f64, center: f64, width: f64, wavenumber: f64 },
    Bump { amplitude: f64, center: f64, radius: f64 },
    Dipole { amplitude: f64, center: f64, width: f64 },
    /// Sum of `modes` Gaussians with centres in `center ± spread`, drawn from the run seed.
    Random { amplitude: f64, center: f64, spread: f64, width: f64, modes: usize },
    /// Two-column CSV table `x, value`, zero outside its range.
    File {
        path: String,
        #[serde(default = "one")]
        amplitude: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    /// Far-field state: `[re, im]` of `zeta*` or `[psi, s]` at infinity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub far_field: Option<[f64; 2]>,
    #[serde(default)]
    pub components: BTreeMap<String, ShapeSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    /// Record every k-th time level in the energy series.
    #[serde(default = "one_usize")]
    pub energy_every: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
}

impl Default for Outputs {
    fn default() -> Self {
        Self { snapshot_times: Vec::new(), energy_every: 1, out_dir: None }
    }
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GaugeSpec {
    /// `u -> 0` at minus infinity.
    LeftDecay,
    /// `u -> 0` at plus infinity.
    RightDecay,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hs2Spec {
    #[serde(default = "default_markers")]
    pub markers: usize,
    #[serde(default = "default_gauge")]
    pub gauge: GaugeSpec,
}

impl Default for Hs2Spec {
    fn default() -> Self {
        Self { markers: default_markers(), gauge: default_gauge() }
    }
}

fn default_markers() -> usize {
    1001
}

fn default_gauge() -> GaugeSpec {
    GaugeSpec::LeftDecay
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsymptoticSpec {
    /// Background director angle.
    pub psi0: f64,
    pub epsilons: Vec<f64>,
    #[serde(default = "default_study_dx")]
    pub dx: f64,
    #[serde(default = "default_study_cfl")]
    pub cfl: f64,
    #[serde(default = "default_study_pad")]
    pub pad: f64,
    #[serde(default = "default_study_markers")]
    pub markers: usize,
    #[serde(default = "default_study_marker_dt")]
    pub marker_dt: f64,
    #[serde(default = "default_study_compare")]
    pub compare_points: usize,
}

fn default_study_dx() -> f64 {
    0.05
}
fn default_study_cfl() -> f64 {
    0.8
}
fn default_study_pad() -> f64 {
    2.0
}
fn default_study_markers() -> usize {
    2001
}
fn default_study_marker_dt() -> f64 {
    1e-3
}
fn default_study_compare() -> usize {
    801
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub solver: Solver,
    pub potential: PotentialSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wave_speed: Option<WaveSpeedSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeSpec>,
    #[serde(default)]
    pub initial_data: InitialData,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hs2: Option<Hs2Spec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asymptotic: Option<AsymptoticSpec>,
}

/// Default Courant number of the quasilinear solver.
pub const DEFAULT_CFL: f64 = 0.8;
/// Default marker step of the hs2 solver.
pub const DEFAULT_HS2_DT: f64 = 1e-3;

/// Parses a configuration from text, fills defaults and validates it.
pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg: RunConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    cfg.fill_defaults();
    cfg.validate()?;
    Ok(cfg)
}

/// Reads and parses a configuration file.
pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse(&text)
}

/// Canonical text form: pretty JSON in declaration order with a trailing newline.
pub fn dump(cfg: &RunConfig) -> String {
    let mut s = serde_json::to_string_pretty(cfg).expect("configuration serializes");
    s.push('\n');
    s
}

fn require_positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::invalid(field, format!("must be positive and finite, got {v}")))
    }
}

fn require_finite(field: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::invalid(field, format!("must be finite, got {v}")))
    }
}

impl RunConfig {
    fn fill_defaults(&mut self) {
        match self.solver {
            Solver::Quasilinear => {
                if let Some(t) = self.time.as_mut() {
                    if t.dt.is_none() && t.cfl.is_none() {
                        t.cfl = Some(DEFAULT_CFL);
                    }
                }
            }
            Solver::Hs2 => {
                self.hs2.get_or_insert_with(Hs2Spec::default);
            }
            _ => {}
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let needs_speed = matches!(self.solver, Solver::Semilinear | Solver::Quasilinear | Solver::Asymptotic);
        let needs_grid = matches!(self.solver, Solver::Semilinear | Solver::Quasilinear);
        let needs_time = self.solver != Solver::ValidatePotential;

        if let Some(s0) = self.potential.params.s0 {
            require_finite("potential.params.s0", s0)?;
        }
        if let Some(ws) = &self.wave_speed {
            require_positive("wave_speed.K1", ws.k1)?;
            require_positive("wave_speed.K3", ws.k3)?;
        } else if needs_speed {
            return Err(ConfigError::invalid("wave_speed", format!("required by the {} solver", self.solver.name())));
        }
        if let Some(g) = &self.grid {
            require_finite("grid.x_min", g.x_min)?;
            require_finite("grid.x_max", g.x_max)?;
            if g.x_max <= g.x_min {
                return Err(ConfigError::invalid("grid.x_max", format!("must exceed grid.x_min = {}", g.x_min)));
            }
            if g.n < 5 {
                return Err(ConfigError::invalid("grid.n", format!("needs at least 5 nodes, got {}", g.n)));
            }
        } else if needs_grid {
            return Err(ConfigError::invalid("grid", format!("required by the {} solver", self.solver.name())));
        }
        if let Some(t) = &self.time {
            require_finite("time.t_final", t.t_final)?;
            if t.t_final < 0.0 {
                return Err(ConfigError::invalid("time.t_final", format!("must be non-negative, got {}", t.t_final)));
            }
            if let Some(dt) = t.dt {
                require_positive("time.dt", dt)?;
            }
            if let Some(cfl) = t.cfl {
                require_positive("time.cfl", cfl)?;
            }
            if t.dt.is_some() && t.cfl.is_some() {
                return Err(ConfigError::invalid("time.cfl", "give either time.dt or time.cfl, not both"));
            }
            if t.cfl.is_some() && self.solver != Solver::Quasilinear {
                return Err(ConfigError::invalid("time.cfl", format!("not used by the {} solver", self.solver.name())));
            }
        } else if needs_time {
            return Err(ConfigError::invalid("time", format!("required by the {} solver", self.solver.name())));
        }
        if let Some(far) = self.initial_data.far_field {
            require_finite("initial_data.far_field[0]", far[0])?;
            require_finite("initial_data.far_field[1]", far[1])?;
        }
        let allowed = self.solver.components();
        for (name, shape) in &self.initial_data.components {
            let field = format!("initial_data.components.{name}");
            if !allowed.contains(&name.as_str()) {
                return Err(ConfigError::invalid(
                    field,
                    format!("unknown component for the {} solver (expected one of {})", self.solver.name(), allowed.join(", ")),
                ));
            }
            shape.validate(&field)?;
        }
        if self.solver == Solver::Hs2
            && self.initial_data.components.contains_key("u")
            && self.initial_data.components.contains_key("alpha")
        {
            return Err(ConfigError::invalid(
                "initial_data.components.alpha",
                "give u (alpha is then its derivative) or alpha (u is then its antiderivative), not both",
            ));
        }
        for (i, &t) in self.outputs.snapshot_times.iter().enumerate() {
            let field = format!("outputs.snapshot_times[{i}]");
            require_finite(&field, t)?;
            if let Some(time) = &self.time {
                if t < 0.0 || t > time.t_final {
                    return Err(ConfigError::invalid(field, format!("must lie in [0, time.t_final = {}]", time.t_final)));
                }
            }
            if i > 0 && t <= self.outputs.snapshot_times[i - 1] {
                return Err(ConfigError::invalid(field, "snapshot times must be strictly increasing"));
            }
        }
        if self.outputs.energy_every == 0 {
            return Err(ConfigError::invalid("outputs.energy_every", "must be at least 1"));
        }
        if let Some(h) = &self.hs2 {
            if h.markers < 2 {
                return Err(ConfigError::invalid("hs2.markers", format!("needs at least 2 markers, got {}", h.markers)));
            }
        }
        match (&self.asymptotic, self.solver) {
            (Some(a), _) => a.validate()?,
            (None, Solver::Asymptotic) => {
                return Err(ConfigError::invalid("asymptotic", "required by the asymptotic solver"));
            }
            _ => {}
        }
        Ok(())
    }
}

impl ShapeSpec {
    fn validate(&self, field: &str) -> Result<(), ConfigError> {
        let f = |name: &str| format!("{field}.{name}");
        match *self {
            ShapeSpec::Gaussian { amplitude, center, width } | ShapeSpec::Dipole { amplitude, center, width } => {
                require_finite(&f("amplitude"), amplitude)?;
                require_finite(&f("center"), center)?;
                require_positive(&f("width"), width)
            }
            ShapeSpec::SinePacket { amplitude, center, width, wavenumber } => {
                require_finite(&f("amplitude"), amplitude)?;
                require_finite(&f("center"), center)?;
                require_positive(&f("width"), width)?;
                require_finite(&f("wavenumber"), wavenumber)
            }
            ShapeSpec::Bump { amplitude, center, radius } => {
                require_finite(&f("amplitude"), amplitude)?;
                require_finite(&f("center"), center)?;
                require_positive(&f("radius"), radius)
            }
            ShapeSpec::Random { amplitude, center, spread, width, modes } => {
                require_finite(&f("amplitude"), amplitude)?;
                require_finite(&f("center"), center)?;
                require_finite(&f("spread"), spread)?;
                if spread < 0.0 {
                    return Err(ConfigError::invalid(f("spread"), "must be non-negative"));
                }
                require_positive(&f("width"), width)?;
                if modes == 0 {
                    return Err(ConfigError::invalid(f("modes"), "must be at least 1"));
                }
                Ok(())
            }
            ShapeSpec::File { ref path, amplitude } => {
                if path.is_empty() {
                    return Err(ConfigError::invalid(f("path"), "must not be empty"));
                }
                require_finite(&f("amplitude"), amplitude)
            }
        }
    }
}

impl AsymptoticSpec {
    fn validate(&self) -> Result<(), ConfigError> {
        require_finite("asymptotic.psi0", self.psi0)?;
        if self.epsilons.is_empty() {
            return Err(ConfigError::invalid("asymptotic.epsilons", "needs at least one value"));
        }
        for (i, &e) in self.epsilons.iter().enumerate() {
            require_positive(&format!("asymptotic.epsilons[{i}]"), e)?;
        }
        require_positive("asymptotic.dx", self.dx)?;
        require_positive("asymptotic.cfl", self.cfl)?;
        require_finite("asymptotic.pad", self.pad)?;
        require_positive("asymptotic.marker_dt", self.marker_dt)?;
        if self.markers < 2 {
            return Err(ConfigError::invalid("asymptotic.markers", "needs at least 2 markers"));
        }
        if self.compare_points < 2 {
            return Err(ConfigError::invalid("asymptotic.compare_points", "needs at least 2 points"));
        }
        Ok(())
    }
}
