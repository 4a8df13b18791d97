//! Calibration, single coupled simulations and seeded ensembles.
//!
//! A run starts from a zero field plus a small seeded perturbation, with the
//! particle at rest at `x0`. Each step first advances the field with the
//! source at the pre-step particle position, then advances the particle across
//! the same interval using both field levels.

use rayon::prelude::*;

use crate::config::{validate, RunConfig, MAX_SEED};
use crate::error::{Error, Result};
use crate::particle::{advance, ParticleState};
use crate::wavefield::{random_perturbation, FieldState, KleinGordonSolver, SourceSpec};

/// Calibration run length in Compton periods.
pub const CALIBRATION_PERIODS: f64 = 10.0;

/// Divergence guard relative to the characteristic amplitude.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

/// Forcing amplitude and the stagnant-field amplitude it produces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    /// Forcing amplitude used for the runs.
    pub epsilon_p: f64,
    /// Characteristic amplitude of the stagnant field at `epsilon_p`.
    pub phi_char: f64,
    /// Stagnant amplitude at the configured (unnormalized) `epsilon_p`.
    pub raw_phi_char: f64,
}

/// Max `|φ|` over the final Compton period of a stagnant, unperturbed run of
/// [`CALIBRATION_PERIODS`] periods.
pub fn stagnant_amplitude(config: &RunConfig, epsilon_p: f64) -> Result<f64> {
    let mut params = config.params;
    params.alpha = 0.0;
    params.epsilon_p = epsilon_p;
    let tau = params.tau_c();
    let dt = config.grid.dt;
    let steps = (CALIBRATION_PERIODS * tau / dt).round() as usize;
    let tail = ((tau / dt).round() as usize).clamp(1, steps);
    let solver = KleinGordonSolver::new(params, config.grid, config.scheme)?;
    let x_p = config.x0;
    let f0 = FieldState::zeros(config.grid);
    let zeros = vec![0.0; config.grid.nx];
    let mut field = solver.first_step(&f0, &zeros, &SourceSpec { x_p, t: 0.0 })?;
    let mut peak: f64 = 0.0;
    for n in 1..=steps {
        if n > 1 {
            let src = SourceSpec { x_p, t: field.t };
            solver.step_in_place(&mut field, &src)?;
        }
        if n > steps - tail {
            peak = peak.max(field.max_abs());
        }
    }
    Ok(peak)
}

/// Measures the stagnant amplitude and, when the config asks for it, rescales
/// `epsilon_p` so the characteristic amplitude equals `normalize_to`.
pub fn calibrate(config: &RunConfig) -> Result<Calibration> {
    validate(config).map_err(|v| Error::InvalidConfig(v.into_iter().map(|v| v.message).collect()))?;
    let raw = stagnant_amplitude(config, config.params.epsilon_p)?;
    if !(raw > 0.0 && raw.is_finite()) {
        return Err(Error::Calibration(format!(
            "stagnant field amplitude is {raw} (epsilon_p = {})",
            config.params.epsilon_p
        )));
    }
    Ok(match config.normalize_to {
        Some(target) => Calibration {
            epsilon_p: config.params.epsilon_p * (target / raw),
            phi_char: target,
            raw_phi_char: raw,
        },
        None => Calibration {
            epsilon_p: config.params.epsilon_p,
            phi_char: raw,
            raw_phi_char: raw,
        },
    })
}

/// Sampled trajectory of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub sample_stride: usize,
    pub dt: f64,
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    pub betas: Vec<f64>,
    pub config_digest: String,
}

impl TrajectoryRecord {
    /// Time of sample `k`; the same expression produced the stored times.
    pub fn sample_time(k: usize, stride: usize, dt: f64) -> f64 {
        (k * stride) as f64 * dt
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Index of the sample at time `t`, if `t` is a sampled time.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let interval = self.sample_stride as f64 * self.dt;
        let k = (t / interval).round();
        if k < 0.0 || k as usize >= self.times.len() {
            return None;
        }
        let k = k as usize;
        ((self.times[k] - t).abs() <= 1e-9 * interval).then_some(k)
    }
}

/// Field at one step, kept when snapshots are requested.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSnapshot {
    pub step: usize,
    pub t: f64,
    pub phi: Vec<f64>,
}

/// Output of [`run_single`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub record: TrajectoryRecord,
    pub snapshots: Vec<FieldSnapshot>,
}

/// Read-only view handed to observers after every step.
pub struct StepView<'a> {
    pub step: usize,
    pub field: &'a FieldState,
    pub particle: &'a ParticleState,
}

/// Coupled field-particle system.
pub struct Simulation {
    config: RunConfig,
    solver: KleinGordonSolver,
    field: FieldState,
    particle: ParticleState,
}

impl Simulation {
    /// Zero field plus the seeded perturbation of amplitude
    /// `perturbation_ratio · phi_char`.
    pub fn new(config: &RunConfig, calibration: &Calibration) -> Result<Simulation> {
        let amplitude = config.perturbation_ratio * calibration.phi_char;
        let phi0 = if amplitude > 0.0 {
            random_perturbation(config.seed, amplitude, &config.grid)?
        } else {
            vec![0.0; config.grid.nx]
        };
        Simulation::with_initial_field(config, calibration, phi0)
    }

    /// Starts from an explicit initial field.
    pub fn with_initial_field(config: &RunConfig, calibration: &Calibration, phi0: Vec<f64>) -> Result<Simulation> {
        validate(config).map_err(|v| Error::InvalidConfig(v.into_iter().map(|v| v.message).collect()))?;
        if !(calibration.phi_char > 0.0) {
            return Err(Error::Calibration(format!(
                "characteristic amplitude must be positive (got {})",
                calibration.phi_char
            )));
        }
        let mut params = config.params;
        params.epsilon_p = calibration.epsilon_p;
        let solver = KleinGordonSolver::new(params, config.grid, config.scheme)?
            .with_divergence_limit(DIVERGENCE_FACTOR * calibration.phi_char);
        Ok(Simulation {
            config: config.clone(),
            solver,
            field: FieldState::initial(config.grid, phi0)?,
            particle: ParticleState::at_rest(config.x0, 0.0),
        })
    }

    pub fn field(&self) -> &FieldState {
        &self.field
    }

    pub fn particle(&self) -> &ParticleState {
        &self.particle
    }

    pub fn step_index(&self) -> usize {
        self.field.step
    }

    pub fn solver(&self) -> &KleinGordonSolver {
        &self.solver
    }

    /// One coupled step: field first, then particle.
    pub fn advance(&mut self) -> Result<()> {
        let src = SourceSpec {
            x_p: self.particle.x_p,
            t: self.field.t,
        };
        if self.field.step == 0 {
            let zeros = vec![0.0; self.config.grid.nx];
            self.field = self.solver.first_step(&self.field, &zeros, &src)?;
        } else {
            self.solver.step_in_place(&mut self.field, &src)?;
        }
        self.particle = advance(
            &self.particle,
            self.field.previous(),
            self.field.current(),
            self.solver.params(),
            self.field.step,
        )?;
        Ok(())
    }

    /// Runs to `nt`, calling `observe` at step 0 and after every step.
    pub fn run(&mut self, mut observe: impl FnMut(&StepView<'_>)) -> Result<()> {
        observe(&self.view());
        while self.field.step < self.config.grid.nt {
            self.advance()?;
            observe(&self.view());
        }
        Ok(())
    }

    fn view(&self) -> StepView<'_> {
        StepView {
            step: self.field.step,
            field: &self.field,
            particle: &self.particle,
        }
    }
}

/// Collects samples every `sample_stride` steps.
struct Sampler {
    stride: usize,
    dt: f64,
    times: Vec<f64>,
    positions: Vec<f64>,
    betas: Vec<f64>,
}

impl Sampler {
    fn new(config: &RunConfig) -> Self {
        let n = config.grid.nt / config.sample_stride + 1;
        Sampler {
            stride: config.sample_stride,
            dt: config.grid.dt,
            times: Vec::with_capacity(n),
            positions: Vec::with_capacity(n),
            betas: Vec::with_capacity(n),
        }
    }

    fn observe(&mut self, view: &StepView<'_>) {
        if view.step % self.stride == 0 {
            let k = view.step / self.stride;
            self.times.push(TrajectoryRecord::sample_time(k, self.stride, self.dt));
            self.positions.push(view.particle.x_p);
            self.betas.push(view.particle.beta);
        }
    }

    fn finish(self, seed: u64, digest: String) -> TrajectoryRecord {
        TrajectoryRecord {
            seed,
            sample_stride: self.stride,
            dt: self.dt,
            times: self.times,
            positions: self.positions,
            betas: self.betas,
            config_digest: digest,
        }
    }
}

/// Runs one simulation, calling `observe` after every step in addition to
/// the built-in trajectory sampling.
pub fn run_observed(
    config: &RunConfig,
    calibration: &Calibration,
    mut observe: impl FnMut(&StepView<'_>),
) -> Result<TrajectoryRecord> {
    let mut sim = Simulation::new(config, calibration)?;
    let mut sampler = Sampler::new(config);
    sim.run(|v| {
        sampler.observe(v);
        observe(v);
    })?;
    Ok(sampler.finish(config.seed, ensemble_digest(config)))
}

/// Runs one seeded simulation and samples its trajectory (and field
/// snapshots when `snapshot_stride` is set).
pub fn run_single(config: &RunConfig, calibration: &Calibration) -> Result<RunOutput> {
    let mut snapshots = Vec::new();
    let stride = config.snapshot_stride;
    let record = run_observed(config, calibration, |v| {
        if let Some(s) = stride {
            if v.step % s == 0 {
                snapshots.push(FieldSnapshot {
                    step: v.step,
                    t: v.field.t,
                    phi: v.field.phi_curr.clone(),
                });
            }
        }
    })?;
    Ok(RunOutput { record, snapshots })
}

/// A run that failed inside an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub seed: u64,
    pub error: String,
}

/// Trajectories of an ensemble sharing one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    /// Configuration shared by all runs; each record uses it with its own seed.
    pub config: RunConfig,
    pub calibration: Calibration,
    /// Records sorted by seed.
    pub records: Vec<TrajectoryRecord>,
    pub failures: Vec<RunFailure>,
}

impl EnsembleResult {
    pub fn phi_char(&self) -> f64 {
        self.calibration.phi_char
    }

    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }

    /// Digest of the shared configuration.
    pub fn config_digest(&self) -> String {
        ensemble_digest(&self.config)
    }

    /// Sampled times common to all records.
    pub fn times(&self) -> &[f64] {
        self.records.first().map(|r| r.times.as_slice()).unwrap_or(&[])
    }
}

/// Digest of a configuration with the fields that do not affect
/// trajectories (seed and snapshot interval) cleared.
pub fn ensemble_digest(config: &RunConfig) -> String {
    let mut c = config.clone();
    c.seed = 0;
    c.snapshot_stride = None;
    c.digest()
}

/// Runs `n_runs` simulations with seeds `seed_base..seed_base + n_runs` on
/// `workers` threads.
///
/// The payload does not depend on `workers`; failures are recorded per seed.
pub fn run_ensemble(config: &RunConfig, n_runs: usize, seed_base: u64, workers: usize) -> Result<EnsembleResult> {
    if n_runs == 0 {
        return Err(Error::Parameter("ensemble needs at least one run".into()));
    }
    if workers == 0 {
        return Err(Error::Parameter("ensemble needs at least one worker".into()));
    }
    match seed_base.checked_add(n_runs as u64 - 1) {
        Some(last) if last <= MAX_SEED => {}
        _ => return Err(Error::Parameter(format!("seeds must not exceed {MAX_SEED}"))),
    }
    let calibration = calibrate(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Parameter(e.to_string()))?;
    let outcomes: Vec<(u64, Result<TrajectoryRecord>)> = pool.install(|| {
        (0..n_runs as u64)
            .into_par_iter()
            .map(|i| {
                let mut c = config.clone();
                c.seed = seed_base + i;
                c.snapshot_stride = None;
                (c.seed, run_observed(&c, &calibration, |_| {}))
            })
            .collect()
    });
    let mut records = Vec::with_capacity(n_runs);
    let mut failures = Vec::new();
    for (seed, out) in outcomes {
        match out {
            Ok(r) => records.push(r),
            Err(e) => failures.push(RunFailure {
                seed,
                error: e.to_string(),
            }),
        }
    }
    let mut config = config.clone();
    config.seed = 0;
    config.snapshot_stride = None;
    Ok(EnsembleResult {
        config,
        calibration,
        records,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{default_config, PhysicalParams};

    pub(crate) fn short_config(horizon: f64) -> RunConfig {
        default_config().with_duration(horizon)
    }

    #[test]
    fn zero_forcing_fails_calibration() {
        let mut c = short_config(2.0);
        c.params.epsilon_p = 0.0;
        assert!(matches!(calibrate(&c), Err(Error::Calibration(_))));
    }

    #[test]
    fn calibration_is_linear_in_forcing() {
        let mut c = short_config(2.0);
        c.normalize_to = None;
        let a = calibrate(&c).unwrap();
        c.params.epsilon_p *= 2.0;
        let b = calibrate(&c).unwrap();
        assert!((b.phi_char / a.phi_char - 2.0).abs() < 1e-12);
    }

    #[test]
    fn normalized_calibration_reproduces_target() {
        let c = short_config(2.0);
        let cal = calibrate(&c).unwrap();
        assert_eq!(cal.phi_char, c.normalize_to.unwrap());
        let rerun = stagnant_amplitude(&c, cal.epsilon_p).unwrap();
        assert!((rerun / cal.phi_char - 1.0).abs() < 1e-6, "{rerun}");
    }

    #[test]
    fn zero_perturbation_keeps_particle_at_origin() {
        let mut c = short_config(20.0);
        c.perturbation_ratio = 0.0;
        let cal = calibrate(&c).unwrap();
        let out = run_single(&c, &cal).unwrap();
        assert!(out.record.positions.iter().all(|&x| x == c.x0));
        assert!(out.record.betas.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn first_sample_is_rest_at_origin() {
        let c = short_config(1.0);
        let cal = calibrate(&c).unwrap();
        let r = run_single(&c, &cal).unwrap().record;
        assert_eq!((r.times[0], r.positions[0], r.betas[0]), (0.0, c.x0, 0.0));
        assert_eq!(r.len(), c.grid.nt / c.sample_stride + 1);
        for w in r.times.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn snapshots_follow_stride() {
        let mut c = short_config(1.0);
        c.snapshot_stride = Some(10);
        let cal = calibrate(&c).unwrap();
        let out = run_single(&c, &cal).unwrap();
        assert_eq!(out.snapshots.len(), c.grid.nt / 10 + 1);
        assert_eq!(out.snapshots[1].step, 10);
        assert_eq!(out.snapshots[1].phi.len(), c.grid.nx);
    }

    #[test]
    fn same_seed_same_record() {
        let c = short_config(3.0);
        let cal = calibrate(&c).unwrap();
        let a = run_single(&c, &cal).unwrap();
        let b = run_single(&c, &cal).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_config_rejected_before_running() {
        let mut c = short_config(3.0);
        c.grid.dt = 1.0;
        assert!(matches!(calibrate(&c), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn divergent_run_is_recorded_not_fatal() {
        let mut c = short_config(1.0);
        c.params = PhysicalParams { alpha: 0.0, ..c.params };
        // Perturbation far above the divergence guard.
        c.perturbation_ratio = 2.0 * DIVERGENCE_FACTOR;
        let res = run_ensemble(&c, 2, 5, 2).unwrap();
        assert!(!res.is_complete());
        assert_eq!(res.failures.len(), 2);
        assert_eq!(res.failures[0].seed, 5);
        assert!(res.failures[0].error.contains("diverged"));
    }

    #[test]
    fn record_index_lookup() {
        let c = short_config(1.0);
        let cal = calibrate(&c).unwrap();
        let r = run_single(&c, &cal).unwrap().record;
        assert_eq!(r.index_of(0.0), Some(0));
        assert_eq!(r.index_of(r.times[3]), Some(3));
        assert_eq!(r.index_of(0.01), None);
        assert_eq!(r.index_of(1e6), None);
    }
}
