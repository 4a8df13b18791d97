//! Unit system, physical parameters, grid descriptors and run configuration.
//!
//! All quantities are nondimensional. The default unit system measures length
//! in Compton wavelengths and time in Compton periods, so that `c = 1` and
//! `omega_c = 2π`. Configurations are stored as flat TOML documents whose keys
//! mirror the fields below; unknown keys are rejected.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Version of the flat configuration schema written by [`RunConfig::to_toml`].
pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Minimum ratio between the domain half-width and the light-cone radius `c·T`.
pub const LIGHT_CONE_MARGIN: f64 = 1.1;

/// Largest seed a configuration or archive can hold (TOML integers are signed).
pub const MAX_SEED: u64 = i64::MAX as u64;

/// Default characteristic amplitude the stagnant field is normalized to.
///
/// Only the product `alpha · phi_char` enters the guidance law. With this
/// value and `alpha = 0.045` the stagnant stage lasts 10–20 Compton periods
/// before the perturbation breaks the symmetry.
pub const DEFAULT_FIELD_SCALE: f64 = 25.0;

/// Names of the length and time units used by a configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Units {
    pub length: String,
    pub time: String,
}

impl Default for Units {
    fn default() -> Self {
        Units {
            length: "compton_wavelength".into(),
            time: "compton_period".into(),
        }
    }
}

/// Physical constants of the coupled wave-particle system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Wave speed.
    pub c: f64,
    /// Compton angular frequency.
    pub omega_c: f64,
    /// Width of the localized source.
    pub a: f64,
    /// Forcing amplitude.
    pub epsilon_p: f64,
    /// Particle-wave coupling.
    pub alpha: f64,
}

impl PhysicalParams {
    /// Compton units with the reproduction values of the source width and coupling.
    pub fn compton() -> Self {
        PhysicalParams {
            c: 1.0,
            omega_c: 2.0 * PI,
            a: 0.5,
            epsilon_p: 1.0,
            alpha: 0.045,
        }
    }

    /// Compton period `2π/ω_c`.
    pub fn tau_c(&self) -> f64 {
        2.0 * PI / self.omega_c
    }

    /// Compton wavelength `c·τ_c`.
    pub fn lambda_c(&self) -> f64 {
        self.c * self.tau_c()
    }
}

/// Uniform spatial lattice and time stepping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub dt: f64,
    pub nt: usize,
}

impl Grid {
    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx as f64 - 1.0)
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.x_min + self.x_max)
    }

    /// Position of node `j`.
    ///
    /// Nodes are laid out symmetrically about the midpoint so that a grid
    /// centered on the particle is mirror-symmetric bit for bit.
    #[inline]
    pub fn x(&self, j: usize) -> f64 {
        let offset = (2 * j) as f64 - (self.nx - 1) as f64;
        self.midpoint() + offset * (0.5 * self.dx())
    }

    /// All node positions.
    pub fn nodes(&self) -> Vec<f64> {
        (0..self.nx).map(|j| self.x(j)).collect()
    }

    /// Simulated time span `nt·dt`.
    pub fn duration(&self) -> f64 {
        self.nt as f64 * self.dt
    }

    pub fn courant(&self, c: f64) -> f64 {
        c * self.dt / self.dx()
    }
}

/// Leapfrog time-stepping variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeScheme {
    /// Central differences with `dt²` multiplying the spatial operator.
    Standard,
    /// Central differences with `dt²` replaced by `(2 sin(ω_c dt/2)/ω_c)²`,
    /// which integrates the spatially uniform mode exactly.
    #[default]
    MassExact,
}

impl TimeScheme {
    /// Effective squared step multiplying the right-hand side.
    pub fn step_squared(self, dt: f64, omega_c: f64) -> f64 {
        match self {
            TimeScheme::Standard => dt * dt,
            TimeScheme::MassExact => {
                let h = 2.0 * (0.5 * omega_c * dt).sin() / omega_c;
                h * h
            }
        }
    }

    /// Effective step multiplying the initial time derivative in the bootstrap step.
    pub fn velocity_step(self, dt: f64, omega_c: f64) -> f64 {
        match self {
            TimeScheme::Standard => dt,
            TimeScheme::MassExact => (omega_c * dt).sin() / omega_c,
        }
    }
}

/// Everything needed to run one coupled simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: PhysicalParams,
    pub grid: Grid,
    pub units: Units,
    pub scheme: TimeScheme,
    pub seed: u64,
    /// Perturbation amplitude relative to the characteristic field amplitude.
    pub perturbation_ratio: f64,
    /// Initial particle position.
    pub x0: f64,
    /// Trajectory sampling interval in steps.
    pub sample_stride: usize,
    /// Field snapshot interval in steps.
    pub snapshot_stride: Option<usize>,
    /// Characteristic amplitude the stagnant field is normalized to during
    /// calibration; `None` keeps `epsilon_p` as given.
    pub normalize_to: Option<f64>,
}

/// Reproduction configuration: Compton units, `alpha = 0.045`, `a = λ_c/2`,
/// `dx = λ_c/20`, `dt = dx/(2c)` and a 100 τ_c horizon on a light-cone-safe domain.
pub fn default_config() -> RunConfig {
    let params = PhysicalParams::compton();
    let dx = params.lambda_c() / 20.0;
    let dt = dx / (2.0 * params.c);
    let horizon = 100.0 * params.tau_c();
    RunConfig::with_horizon(params, dx, dt, horizon)
}

impl RunConfig {
    /// Builds a configuration at the given resolution whose domain is centered
    /// on `x0 = 0` and sized for `horizon` by the light-cone rule.
    pub fn with_horizon(params: PhysicalParams, dx: f64, dt: f64, horizon: f64) -> RunConfig {
        let nt = (horizon / dt).round() as usize;
        let half_cells = ((LIGHT_CONE_MARGIN * params.c * nt as f64 * dt + params.lambda_c()) / dx).ceil() as usize;
        let half = half_cells as f64 * dx;
        let grid = Grid {
            x_min: -half,
            x_max: half,
            nx: 2 * half_cells + 1,
            dt,
            nt,
        };
        let sample_stride = ((params.tau_c() / 8.0) / dt).round().max(1.0) as usize;
        RunConfig {
            params,
            grid,
            units: Units::default(),
            scheme: TimeScheme::default(),
            seed: 0,
            perturbation_ratio: 1e-4,
            x0: 0.0,
            sample_stride,
            snapshot_stride: None,
            normalize_to: Some(DEFAULT_FIELD_SCALE),
        }
    }

    /// Same configuration with a new horizon; the domain is resized to keep
    /// the light cone inside it.
    pub fn with_duration(&self, horizon: f64) -> RunConfig {
        let mut out = RunConfig::with_horizon(self.params, self.grid.dx(), self.grid.dt, horizon);
        let shift = self.x0;
        out.grid.x_min += shift;
        out.grid.x_max += shift;
        out.x0 = self.x0;
        out.units = self.units.clone();
        out.scheme = self.scheme;
        out.seed = self.seed;
        out.perturbation_ratio = self.perturbation_ratio;
        out.sample_stride = self.sample_stride;
        out.snapshot_stride = self.snapshot_stride;
        out.normalize_to = self.normalize_to;
        out
    }

    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        validate(self)
    }

    /// Hex SHA-256 of the canonical TOML serialization.
    pub fn digest(&self) -> String {
        let text = self.to_toml();
        let hash = Sha256::digest(text.as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&ConfigFile::from(self)).expect("flat config always serializes")
    }

    pub fn from_toml(text: &str) -> Result<RunConfig> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        file.try_into()
    }

    /// Parses a config document after applying `key = value` overrides.
    ///
    /// Overrides are TOML values; a bare word that does not parse as one is
    /// taken as a string.
    pub fn from_toml_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<RunConfig> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        for (key, raw) in overrides {
            table.insert(key.clone(), parse_override(raw));
        }
        let file: ConfigFile = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::ConfigParse(e.to_string()))?;
        file.try_into()
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::from_toml(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }
}

fn parse_override(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Which invariant a configuration breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Positivity,
    GridShape,
    Cfl,
    LightCone,
    Sampling,
    Perturbation,
    Seed,
    Units,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Lists every violated invariant; `Ok` iff none is.
pub fn validate(config: &RunConfig) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    let mut push = |kind, message: String| out.push(Violation { kind, message });
    let p = &config.params;
    let g = &config.grid;

    let positive = [("c", p.c), ("omega_c", p.omega_c), ("a", p.a), ("dt", g.dt)];
    for (name, v) in positive {
        if !(v.is_finite() && v > 0.0) {
            push(
                ViolationKind::Positivity,
                format!("{name} must be positive and finite (got {v})"),
            );
        }
    }
    for (name, v) in [("epsilon_p", p.epsilon_p), ("alpha", p.alpha)] {
        if !(v.is_finite() && v >= 0.0) {
            push(
                ViolationKind::Positivity,
                format!("{name} must be non-negative and finite (got {v})"),
            );
        }
    }
    if let Some(target) = config.normalize_to {
        if !(target.is_finite() && target > 0.0) {
            push(
                ViolationKind::Positivity,
                format!("normalize_to must be positive (got {target})"),
            );
        }
    }
    if g.nx < 3 {
        push(
            ViolationKind::GridShape,
            format!("nx must be at least 3 (got {})", g.nx),
        );
    }
    if g.nt < 1 {
        push(ViolationKind::GridShape, "nt must be at least 1".into());
    }
    let dx = g.dx();
    if !(g.x_min.is_finite() && g.x_max.is_finite() && dx > 0.0) {
        push(
            ViolationKind::GridShape,
            format!("x_max must exceed x_min (got dx = {dx})"),
        );
    } else if p.c > 0.0 && g.dt > 0.0 {
        let courant = g.courant(p.c);
        if courant > 1.0 {
            push(ViolationKind::Cfl, format!("CFL exceeded: c*dt/dx = {courant} > 1"));
        }
        let reach = LIGHT_CONE_MARGIN * p.c * g.duration();
        if g.x_max - config.x0 < reach || config.x0 - g.x_min < reach {
            push(
                ViolationKind::LightCone,
                format!(
                    "light cone exits domain: need [{}, {}] within [{}, {}]",
                    config.x0 - reach,
                    config.x0 + reach,
                    g.x_min,
                    g.x_max
                ),
            );
        }
    }
    if !config.x0.is_finite() {
        push(ViolationKind::GridShape, "x0 must be finite".into());
    }
    if config.sample_stride < 1 {
        push(ViolationKind::Sampling, "sample_stride must be at least 1".into());
    }
    if config.snapshot_stride == Some(0) {
        push(ViolationKind::Sampling, "snapshot_stride must be at least 1".into());
    }
    if !(config.perturbation_ratio.is_finite() && config.perturbation_ratio >= 0.0) {
        push(
            ViolationKind::Perturbation,
            format!(
                "perturbation_ratio must be non-negative (got {})",
                config.perturbation_ratio
            ),
        );
    }
    if config.seed > MAX_SEED {
        push(
            ViolationKind::Seed,
            format!("seed must not exceed {MAX_SEED} (got {})", config.seed),
        );
    }
    if config.units.length.is_empty() || config.units.time.is_empty() {
        push(ViolationKind::Units, "unit names must be non-empty".into());
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// On-disk layout of a configuration.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    schema_version: u32,
    length_unit: String,
    time_unit: String,
    c: f64,
    omega_c: f64,
    a: f64,
    epsilon_p: f64,
    alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    normalize_to: Option<f64>,
    x_min: f64,
    x_max: f64,
    nx: usize,
    dt: f64,
    nt: usize,
    #[serde(default)]
    time_scheme: TimeScheme,
    seed: u64,
    perturbation_ratio: f64,
    x0: f64,
    sample_stride: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    snapshot_stride: Option<usize>,
}

impl From<&RunConfig> for ConfigFile {
    fn from(c: &RunConfig) -> Self {
        ConfigFile {
            schema_version: CONFIG_SCHEMA_VERSION,
            length_unit: c.units.length.clone(),
            time_unit: c.units.time.clone(),
            c: c.params.c,
            omega_c: c.params.omega_c,
            a: c.params.a,
            epsilon_p: c.params.epsilon_p,
            alpha: c.params.alpha,
            normalize_to: c.normalize_to,
            x_min: c.grid.x_min,
            x_max: c.grid.x_max,
            nx: c.grid.nx,
            dt: c.grid.dt,
            nt: c.grid.nt,
            time_scheme: c.scheme,
            seed: c.seed,
            perturbation_ratio: c.perturbation_ratio,
            x0: c.x0,
            sample_stride: c.sample_stride,
            snapshot_stride: c.snapshot_stride,
        }
    }
}

impl TryFrom<ConfigFile> for RunConfig {
    type Error = Error;

    fn try_from(f: ConfigFile) -> Result<RunConfig> {
        if f.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::ConfigParse(format!(
                "unsupported schema_version {} (expected {CONFIG_SCHEMA_VERSION})",
                f.schema_version
            )));
        }
        Ok(RunConfig {
            params: PhysicalParams {
                c: f.c,
                omega_c: f.omega_c,
                a: f.a,
                epsilon_p: f.epsilon_p,
                alpha: f.alpha,
            },
            grid: Grid {
                x_min: f.x_min,
                x_max: f.x_max,
                nx: f.nx,
                dt: f.dt,
                nt: f.nt,
            },
            units: Units {
                length: f.length_unit,
                time: f.time_unit,
            },
            scheme: f.time_scheme,
            seed: f.seed,
            perturbation_ratio: f.perturbation_ratio,
            x0: f.x0,
            sample_stride: f.sample_stride,
            snapshot_stride: f.snapshot_stride,
            normalize_to: f.normalize_to,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_matches_reproduction_values() {
        let cfg = default_config();
        assert_eq!(cfg.params.alpha, 0.045);
        assert_eq!(cfg.params.a, 0.5 * cfg.params.lambda_c());
        assert_eq!(cfg.params.c, 1.0);
        assert!((cfg.params.tau_c() - 1.0).abs() < 1e-15);
        assert!((cfg.grid.courant(cfg.params.c) - 0.5).abs() < 1e-12);
        assert!((cfg.grid.dx() - 0.05).abs() < 1e-15);
        assert_eq!(cfg.grid.nt, 4000);
        assert_eq!(cfg.perturbation_ratio, 1e-4);
        assert_eq!(cfg.sample_stride, 5);
        assert_eq!(validate(&cfg), Ok(()));
    }

    #[test]
    fn cfl_violation_reported() {
        let mut cfg = default_config();
        cfg.grid.dt = 2.0 * cfg.grid.dx() / cfg.params.c;
        cfg.grid.nt = 10;
        let errs = validate(&cfg).unwrap_err();
        assert!(errs.iter().any(|v| v.kind == ViolationKind::Cfl));
        assert!(errs.iter().any(|v| v.message.starts_with("CFL exceeded")));
    }

    #[test]
    fn light_cone_violation_reported() {
        let mut cfg = default_config();
        cfg.grid.x_min = -50.0;
        cfg.grid.x_max = 50.0;
        cfg.grid.nx = 2001;
        let errs = validate(&cfg).unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].kind, ViolationKind::LightCone);
        assert!(errs[0].message.starts_with("light cone exits domain"));
    }

    #[test]
    fn every_violation_listed() {
        let mut cfg = default_config();
        cfg.params.c = -1.0;
        cfg.params.alpha = -0.1;
        cfg.sample_stride = 0;
        cfg.grid.nx = 2;
        let kinds: Vec<_> = validate(&cfg).unwrap_err().into_iter().map(|v| v.kind).collect();
        assert!(kinds.contains(&ViolationKind::Positivity));
        assert!(kinds.contains(&ViolationKind::Sampling));
        assert!(kinds.contains(&ViolationKind::GridShape));
    }

    #[test]
    fn nodes_are_mirror_symmetric() {
        let g = default_config().grid;
        let m = (g.nx - 1) / 2;
        assert_eq!(g.x(m), 0.0);
        for j in 0..g.nx {
            assert_eq!(g.x(j), -g.x(g.nx - 1 - j));
        }
        assert!((g.x(0) - g.x_min).abs() < 1e-9);
        assert!((g.x(g.nx - 1) - g.x_max).abs() < 1e-9);
    }

    #[test]
    fn toml_round_trip_preserves_units_and_fields() {
        let mut cfg = default_config();
        cfg.units = Units {
            length: "custom_len".into(),
            time: "custom_time".into(),
        };
        cfg.snapshot_stride = Some(40);
        cfg.seed = 987654321;
        let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.digest(), cfg.digest());
    }

    #[test]
    fn seeds_are_bounded_by_toml_integers() {
        let mut cfg = default_config();
        cfg.seed = MAX_SEED;
        assert!(cfg.validate().is_ok());
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap().seed, MAX_SEED);
        cfg.seed = MAX_SEED + 1;
        let v = cfg.validate().unwrap_err();
        assert_eq!(v[0].kind, ViolationKind::Seed);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = default_config().to_toml() + "alhpa = 0.1\n";
        let err = RunConfig::from_toml(&text).unwrap_err();
        assert!(matches!(err, Error::ConfigParse(ref m) if m.contains("alhpa")), "{err}");
    }

    #[test]
    fn overrides_take_precedence() {
        let text = default_config().to_toml();
        let overrides = vec![
            ("alpha".to_string(), "0.1".to_string()),
            ("time_scheme".to_string(), "standard".to_string()),
        ];
        let cfg = RunConfig::from_toml_with_overrides(&text, &overrides).unwrap();
        assert_eq!(cfg.params.alpha, 0.1);
        assert_eq!(cfg.scheme, TimeScheme::Standard);
        let bad = vec![("nope".to_string(), "1".to_string())];
        assert!(RunConfig::from_toml_with_overrides(&text, &bad).is_err());
    }

    #[test]
    fn digest_changes_with_content() {
        let a = default_config();
        let mut b = a.clone();
        b.seed += 1;
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }

    #[test]
    fn mass_exact_reduces_to_standard_for_small_steps() {
        let w = 2.0 * PI;
        let dt = 1e-4;
        let rel = TimeScheme::MassExact.step_squared(dt, w) / TimeScheme::Standard.step_squared(dt, w);
        assert!((rel - 1.0).abs() < 1e-6);
    }
}
