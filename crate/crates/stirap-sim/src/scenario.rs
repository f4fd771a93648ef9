//! JSON scenario configs and the deterministic runner behind the CLI:
//! config parsing and validation, a by-name registry of protocol step
//! builders, trajectory export, and parameter sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::analysis::{dark_state_overlap, StepSchedule};
use crate::chain::{make_decay_model, DecayModel, LevelChain};
use crate::error::Error;
use crate::logic::{
    dff_step, siso_shift, tff_step, verify_truth_tables, ConformanceReport, DataWord,
    FlipFlopResult, ShiftDirection, SimContext, SisoMode, SisoOutcome,
};
use crate::propagator::{
    backend, basis_state, default_dt, observables, superposition, ObservableSeries, StateVector,
    Trajectory,
};
use crate::pulses::{
    adiabaticity_metric, build_fstirap, build_stirap_pair, compose_program, AdiabaticityReport,
    ProgramFragment, ProtocolKind, PulseProgram,
};

/// Top-level scenario file. Unknown keys are rejected so typos surface as
/// parse errors instead of silently falling back to defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub format_version: u32,
    pub system: SystemConfig,
    #[serde(default)]
    pub pulses: PulsesConfig,
    #[serde(default)]
    pub initial: InitialStateConfig,
    #[serde(default)]
    pub logic: LogicTask,
    #[serde(default)]
    pub numeric: NumericConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub n_levels: usize,
    /// Shared one-photon detuning on the excited levels.
    #[serde(default)]
    pub detuning: f64,
    /// Explicit per-level detunings; overrides `detuning` when present.
    #[serde(default)]
    pub detunings: Option<Vec<f64>>,
    /// Excited-level lifetime in units of the pulse width.
    #[serde(default = "default_excited_lifetime")]
    pub excited_lifetime: f64,
    #[serde(default = "default_ground_lifetime")]
    pub ground_lifetime: f64,
}

fn default_excited_lifetime() -> f64 {
    16.4
}

fn default_ground_lifetime() -> f64 {
    1e7
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulsesConfig {
    #[serde(default = "default_omega0")]
    pub omega0: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_delay")]
    pub delay: f64,
    #[serde(default = "default_gap")]
    pub gap: f64,
    #[serde(default)]
    pub steps: Vec<StepConfig>,
}

fn default_omega0() -> f64 {
    30.0
}

fn default_sigma() -> f64 {
    1.0
}

fn default_delay() -> f64 {
    1.2
}

fn default_gap() -> f64 {
    6.0
}

impl Default for PulsesConfig {
    fn default() -> Self {
        Self {
            omega0: default_omega0(),
            sigma: default_sigma(),
            delay: default_delay(),
            gap: default_gap(),
            steps: Vec::new(),
        }
    }
}

/// One protocol step; `type` selects the builder from the registry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepConfig {
    #[serde(rename = "type")]
    pub kind: String,
    pub pump: usize,
    pub stokes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

/// Initial state: exactly one of `level` or `superposition`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialStateConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub superposition: Option<Vec<usize>>,
}

impl Default for InitialStateConfig {
    fn default() -> Self {
        Self {
            level: Some(0),
            superposition: None,
        }
    }
}

/// Optional logic operation to run on top of the configured system.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum LogicTask {
    #[default]
    None,
    Tff {
        present: u8,
        pulse: u8,
    },
    Dff {
        present: u8,
        d: u8,
    },
    Siso {
        mode: SisoMode,
        direction: ShiftDirection,
        data_in: DataWord,
    },
    TruthTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericConfig {
    /// Integrator step; derived from the window when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Maximum number of exported trajectory samples.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_method")]
    pub method: String,
}

fn default_samples() -> usize {
    2000
}

fn default_method() -> String {
    "rk4".into()
}

impl Default for NumericConfig {
    fn default() -> Self {
        Self {
            dt: None,
            samples: default_samples(),
            method: default_method(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory_csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_json: Option<String>,
}

/// Builds one pulse fragment from its config entry. Implementations are
/// registered by name and selected via the step's `type` field.
pub trait ProtocolBuilder: Send + Sync {
    fn name(&self) -> &'static str;

    fn build(&self, step: &StepConfig, pulses: &PulsesConfig) -> Result<ProgramFragment, Error>;
}

struct StirapBuilder;

impl ProtocolBuilder for StirapBuilder {
    fn name(&self) -> &'static str {
        "stirap"
    }

    fn build(&self, step: &StepConfig, pulses: &PulsesConfig) -> Result<ProgramFragment, Error> {
        if step.alpha.is_some() {
            return Err(Error::Config(
                "'alpha' only applies to fstirap steps".into(),
            ));
        }
        build_stirap_pair(
            step.pump,
            step.stokes,
            0.0,
            pulses.delay,
            pulses.sigma,
            pulses.omega0,
        )
    }
}

struct FstirapBuilder;

impl ProtocolBuilder for FstirapBuilder {
    fn name(&self) -> &'static str {
        "fstirap"
    }

    fn build(&self, step: &StepConfig, pulses: &PulsesConfig) -> Result<ProgramFragment, Error> {
        let alpha = step.alpha.unwrap_or(std::f64::consts::FRAC_PI_4);
        build_fstirap(
            step.pump,
            step.stokes,
            0.0,
            pulses.delay,
            pulses.sigma,
            pulses.omega0,
            alpha,
        )
    }
}

static STIRAP_BUILDER: StirapBuilder = StirapBuilder;
static FSTIRAP_BUILDER: FstirapBuilder = FstirapBuilder;
static PROTOCOL_BUILDERS: [&dyn ProtocolBuilder; 2] = [&STIRAP_BUILDER, &FSTIRAP_BUILDER];

/// All registered protocol step builders.
pub fn protocol_builders() -> &'static [&'static dyn ProtocolBuilder] {
    &PROTOCOL_BUILDERS
}

/// Looks a protocol builder up by its registered name.
pub fn protocol_builder(name: &str) -> Result<&'static dyn ProtocolBuilder, Error> {
    protocol_builders()
        .iter()
        .copied()
        .find(|b| b.name() == name)
        .ok_or_else(|| {
            let known: Vec<&str> = protocol_builders().iter().map(|b| b.name()).collect();
            Error::Config(format!(
                "unknown protocol '{name}' (known: {})",
                known.join(", ")
            ))
        })
}

/// Parses and validates a scenario config from JSON text.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, Error> {
    let cfg: ScenarioConfig =
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.format_version != 1 {
            return Err(Error::Config(format!(
                "unsupported format_version {} (this build reads version 1)",
                self.format_version
            )));
        }
        let chain = build_chain(self)?;
        build_decay(self, &chain)?;
        backend(&self.numeric.method)?;
        if let Some(dt) = self.numeric.dt {
            if !(dt > 0.0) {
                return Err(Error::Config(format!("numeric.dt must be positive, got {dt}")));
            }
        }
        if self.numeric.samples < 2 {
            return Err(Error::Config(format!(
                "numeric.samples must be at least 2, got {}",
                self.numeric.samples
            )));
        }
        for step in &self.pulses.steps {
            protocol_builder(&step.kind)?;
            for ch in [step.pump, step.stokes] {
                if ch >= chain.n_channels() {
                    return Err(Error::ChannelOutOfRange {
                        channel: ch,
                        n_channels: chain.n_channels(),
                    });
                }
            }
        }
        match &self.logic {
            LogicTask::None => {
                // surfaces adjacency/delay problems before the run starts
                build_program(self)?;
                initial_state(self, chain.n_levels())?;
            }
            task => {
                if !self.pulses.steps.is_empty() {
                    return Err(Error::Config(
                        "logic tasks build their own pulse programs; remove pulses.steps".into(),
                    ));
                }
                if let LogicTask::Siso { data_in, .. } = task {
                    let expected = chain.readout_levels().len();
                    if data_in.len() != expected {
                        return Err(Error::Config(format!(
                            "data_in has {} bits, the {}-level chain reads out {} bits",
                            data_in.len(),
                            chain.n_levels(),
                            expected
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Chain from the system section.
pub fn build_chain(cfg: &ScenarioConfig) -> Result<LevelChain, Error> {
    let n = cfg.system.n_levels;
    match &cfg.system.detunings {
        Some(detunings) => LevelChain::new(n, detunings.clone(), (1..n).step_by(2)),
        None => LevelChain::with_shared_detuning(n, cfg.system.detuning),
    }
}

/// Decay model from the system lifetimes.
pub fn build_decay(cfg: &ScenarioConfig, chain: &LevelChain) -> Result<DecayModel, Error> {
    make_decay_model(cfg.system.excited_lifetime, cfg.system.ground_lifetime, chain)
}

/// Composed pulse program from the configured steps.
pub fn build_program(cfg: &ScenarioConfig) -> Result<PulseProgram, Error> {
    if cfg.pulses.steps.is_empty() {
        return Err(Error::Config("at least one pulse step is required".into()));
    }
    let fragments = cfg
        .pulses
        .steps
        .iter()
        .map(|s| protocol_builder(&s.kind)?.build(s, &cfg.pulses))
        .collect::<Result<Vec<_>, _>>()?;
    compose_program(fragments, cfg.pulses.gap)
}

/// Initial amplitude vector from the initial-state section.
pub fn initial_state(cfg: &ScenarioConfig, n_levels: usize) -> Result<StateVector, Error> {
    let init = &cfg.initial;
    match (&init.level, &init.superposition) {
        (Some(level), None) => {
            if *level >= n_levels {
                return Err(Error::Config(format!(
                    "initial level {level} out of range for {n_levels} levels"
                )));
            }
            Ok(basis_state(n_levels, *level))
        }
        (None, Some(levels)) => {
            if levels.is_empty() {
                return Err(Error::Config("initial superposition needs levels".into()));
            }
            if let Some(&bad) = levels.iter().find(|&&l| l >= n_levels) {
                return Err(Error::Config(format!(
                    "initial level {bad} out of range for {n_levels} levels"
                )));
            }
            Ok(superposition(n_levels, levels))
        }
        _ => Err(Error::Config(
            "initial state takes exactly one of 'level' or 'superposition'".into(),
        )),
    }
}

/// Logic-operation context from a config's system, pulse, and numeric
/// sections.
pub fn logic_context(cfg: &ScenarioConfig) -> Result<SimContext, Error> {
    let chain = build_chain(cfg)?;
    let decay = build_decay(cfg, &chain)?;
    Ok(sim_context(cfg, chain, decay))
}

fn sim_context(cfg: &ScenarioConfig, chain: LevelChain, decay: DecayModel) -> SimContext {
    let mut ctx = SimContext::new(chain, decay);
    ctx.omega0 = cfg.pulses.omega0;
    ctx.sigma = cfg.pulses.sigma;
    ctx.delay = cfg.pulses.delay;
    ctx.gap = cfg.pulses.gap;
    ctx.dt = cfg.numeric.dt;
    ctx.backend = cfg.numeric.method.clone();
    ctx
}

/// Result of the configured logic task, if any.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LogicRecord {
    FlipFlop(FlipFlopResult),
    Siso(SisoOutcome),
    TruthTable(ConformanceReport),
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub final_norm: f64,
    pub final_populations: Vec<f64>,
    pub n_samples: usize,
    pub dt: f64,
}

/// Everything a run produced, written as the machine-readable record.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub config: ScenarioConfig,
    pub adiabaticity: Vec<AdiabaticityReport>,
    pub trajectory_path: Option<String>,
    pub logic: Option<LogicRecord>,
    pub diagnostics: Option<Diagnostics>,
}

/// Runs a validated scenario end to end. Reruns of the same config are
/// deterministic, including exported files.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunRecord, Error> {
    cfg.validate()?;
    let chain = build_chain(cfg)?;
    let decay = build_decay(cfg, &chain)?;

    let (logic, traj): (Option<LogicRecord>, Option<Trajectory>) = match &cfg.logic {
        LogicTask::None => {
            let program = build_program(cfg)?;
            let initial = initial_state(cfg, chain.n_levels())?;
            let dt = cfg.numeric.dt.unwrap_or_else(|| default_dt(&program));
            let traj =
                backend(&cfg.numeric.method)?.propagate(&initial, &chain, &program, &decay, dt)?;
            (None, Some(traj))
        }
        LogicTask::Tff { present, pulse } => {
            let ctx = sim_context(cfg, chain.clone(), decay.clone());
            let (result, traj) = tff_step(*present, *pulse, &ctx)?;
            (Some(LogicRecord::FlipFlop(result)), Some(traj))
        }
        LogicTask::Dff { present, d } => {
            let ctx = sim_context(cfg, chain.clone(), decay.clone());
            let (result, traj) = dff_step(*d, *present, &ctx)?;
            (Some(LogicRecord::FlipFlop(result)), Some(traj))
        }
        LogicTask::Siso {
            mode,
            direction,
            data_in,
        } => {
            let ctx = sim_context(cfg, chain.clone(), decay.clone());
            let (outcome, traj) = siso_shift(data_in, *direction, *mode, &ctx)?;
            (Some(LogicRecord::Siso(outcome)), Some(traj))
        }
        LogicTask::TruthTable => {
            let ctx = sim_context(cfg, chain.clone(), decay.clone());
            let report = verify_truth_tables(&ctx)?;
            (Some(LogicRecord::TruthTable(report)), None)
        }
    };

    let adiabaticity = traj
        .as_ref()
        .map(|t| step_adiabaticity(&chain, t.program(), cfg.pulses.sigma))
        .unwrap_or_default();

    let diagnostics = traj.as_ref().map(|t| Diagnostics {
        final_norm: t.final_state().norm(),
        final_populations: t.final_state().iter().map(|z| z.norm_sqr()).collect(),
        n_samples: t.len(),
        dt: if t.len() > 1 {
            t.times()[1] - t.times()[0]
        } else {
            0.0
        },
    });

    let mut trajectory_path = None;
    if let (Some(t), Some(path)) = (&traj, &cfg.outputs.trajectory_csv) {
        let obs = observables(t, &even_pairs(chain.n_levels()))?;
        export_trajectory(t, &obs, Path::new(path), cfg.numeric.samples)?;
        trajectory_path = Some(path.clone());
    }

    let record = RunRecord {
        config: cfg.clone(),
        adiabaticity,
        trajectory_path,
        logic,
        diagnostics,
    };
    if let Some(path) = &cfg.outputs.record_json {
        let text = serde_json::to_string_pretty(&record)
            .map_err(|e| Error::Config(format!("record serialization failed: {e}")))?;
        fs::write(path, text)?;
    }
    Ok(record)
}

/// Every pair of distinct readout (even) levels, in index order.
pub fn even_pairs(n_levels: usize) -> Vec<(usize, usize)> {
    let readout: Vec<usize> = (0..n_levels).step_by(2).collect();
    let mut pairs = Vec::new();
    for i in 0..readout.len() {
        for j in (i + 1)..readout.len() {
            pairs.push((readout[i], readout[j]));
        }
    }
    pairs
}

/// Adiabaticity figure per configured step, evaluated at the pulse-overlap
/// midpoint of each fragment.
pub fn step_adiabaticity(
    chain: &LevelChain,
    program: &PulseProgram,
    sigma: f64,
) -> Vec<AdiabaticityReport> {
    program
        .fragments()
        .iter()
        .map(|frag| {
            let delta = frag
                .unit()
                .and_then(|u| chain.detunings().get(2 * u + 1).copied())
                .unwrap_or(0.0);
            let t_mid = 0.5 * (frag.first_center() + frag.last_center());
            let op = program.rabi(frag.pump_channel, t_mid);
            let os = program.rabi(frag.stokes_channel, t_mid);
            adiabaticity_metric(delta, (op * op + os * os).sqrt(), sigma)
        })
        .collect()
}

/// Writes the trajectory as CSV: time, populations, even-pair coherences,
/// channel Rabi frequencies, at most `max_samples` rows, full precision.
pub fn export_trajectory(
    traj: &Trajectory,
    obs: &ObservableSeries,
    path: &Path,
    max_samples: usize,
) -> Result<(), Error> {
    let n = obs.n_levels();
    let channels: Vec<usize> = traj
        .program()
        .max_channel()
        .map(|m| (0..=m).collect())
        .unwrap_or_default();

    let mut out = String::new();
    out.push_str("t");
    for l in 0..n {
        write!(out, ",rho_{l}{l}").unwrap();
    }
    for c in &obs.coherences {
        let (j, k) = c.pair;
        write!(out, ",re_rho_{j}{k},im_rho_{j}{k}").unwrap();
    }
    for ch in &channels {
        write!(out, ",omega_{ch}").unwrap();
    }
    out.push('\n');

    for idx in traj.decimated_indices(max_samples) {
        let t = obs.times[idx];
        write!(out, "{t:.16e}").unwrap();
        for l in 0..n {
            write!(out, ",{:.16e}", obs.populations[l][idx]).unwrap();
        }
        for c in &obs.coherences {
            write!(out, ",{:.16e},{:.16e}", c.re[idx], c.im[idx]).unwrap();
        }
        for &ch in &channels {
            write!(out, ",{:.16e}", traj.program().rabi(ch, t)).unwrap();
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Copy of `cfg` with the dot-separated parameter path set to `value`.
/// The path must point at an existing field, e.g. `pulses.delay` or
/// `pulses.steps.0.alpha`.
pub fn with_param(cfg: &ScenarioConfig, path: &str, value: f64) -> Result<ScenarioConfig, Error> {
    let mut v =
        serde_json::to_value(cfg).map_err(|e| Error::Config(e.to_string()))?;
    let pointer = format!("/{}", path.replace('.', "/"));
    match v.pointer_mut(&pointer) {
        Some(slot) => *slot = serde_json::json!(value),
        None => {
            return Err(Error::Config(format!(
                "unknown sweep parameter '{path}'"
            )))
        }
    }
    serde_json::from_value(v)
        .map_err(|e| Error::Config(format!("sweep value {value} rejected for '{path}': {e}")))
}

/// Per-value summary of a sweep run.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: f64,
    /// Final population at the destination level of the configured cascade.
    pub final_transfer: f64,
    /// Minimum instantaneous dark-state overlap along the run.
    pub min_dark_overlap: f64,
    /// Smallest per-step adiabaticity metric.
    pub adiabaticity: f64,
}

/// Runs the scenario once per parameter value, in parallel, and summarizes
/// each run. Only plain (non-logic) scenarios can be swept. Row order
/// follows `values`.
pub fn sweep(
    base: &ScenarioConfig,
    param: &str,
    values: &[f64],
) -> Result<Vec<SweepRow>, Error> {
    if base.logic != LogicTask::None {
        return Err(Error::Config("sweeps apply to plain scenarios, not logic tasks".into()));
    }
    // dry run of the patching so a bad path fails before spawning work
    with_param(base, param, values.first().copied().unwrap_or(0.0))?;
    values
        .par_iter()
        .map(|&value| {
            let mut cfg = with_param(base, param, value)?;
            cfg.outputs = OutputConfig::default();
            summarize_run(&cfg, value)
        })
        .collect()
}

fn summarize_run(cfg: &ScenarioConfig, value: f64) -> Result<SweepRow, Error> {
    cfg.validate()?;
    let chain = build_chain(cfg)?;
    let decay = build_decay(cfg, &chain)?;
    let program = build_program(cfg)?;
    let initial = initial_state(cfg, chain.n_levels())?;
    let dt = cfg.numeric.dt.unwrap_or_else(|| default_dt(&program));
    let traj = backend(&cfg.numeric.method)?.propagate(&initial, &chain, &program, &decay, dt)?;

    let dest = destination_level(cfg, &program);
    let final_transfer = match dest {
        Some(level) => traj.final_state()[level].norm_sqr(),
        None => traj
            .final_state()
            .iter()
            .map(|z| z.norm_sqr())
            .fold(0.0, f64::max),
    };
    let schedule = StepSchedule::from_program(&program);
    let min_dark_overlap = dark_state_overlap(&traj, &schedule)
        .map(|o| o.into_iter().fold(f64::INFINITY, f64::min))
        .unwrap_or(f64::NAN);
    let adiabaticity = step_adiabaticity(&chain, &program, cfg.pulses.sigma)
        .iter()
        .map(|r| r.metric)
        .fold(f64::INFINITY, f64::min);
    Ok(SweepRow {
        value,
        final_transfer,
        min_dark_overlap,
        adiabaticity,
    })
}

/// Where the configured cascade should leave the population, tracked through
/// the full-transfer steps. Fractional steps leave it undefined.
fn destination_level(cfg: &ScenarioConfig, program: &PulseProgram) -> Option<usize> {
    let mut current = cfg.initial.level?;
    for frag in program.fragments() {
        if !matches!(frag.kind, ProtocolKind::Stirap) {
            return None;
        }
        let (e, l) = (frag.stokes_channel, frag.pump_channel);
        // channel c couples levels (c, c+1); a full transfer moves population
        // from the outer level of the late channel to that of the early one
        let (outer_late, outer_early) = if l < e { (l, e + 1) } else { (l + 1, e) };
        if current == outer_late {
            current = outer_early;
        }
    }
    Some(current)
}
