//! Numerical integration of the dissipative amplitude equation
//! dc/dt = −iH(t)c − Γc over a pulse program.
//!
//! Two interchangeable backends sit behind the [`Propagator`] trait and are
//! selected by name: the production fixed-step RK4 integrator and a
//! piecewise-constant matrix-exponential backend used as an independent
//! cross-check.

mod expm;
mod rk4;

pub use expm::{expm, ExpmMidpoint};
pub use rk4::{step_rk4, Rk4};

use nalgebra::DVector;
use num_complex::Complex64;

use crate::chain::{DecayModel, LevelChain};
use crate::error::Error;
use crate::pulses::PulseProgram;

pub type StateVector = DVector<Complex64>;

/// |level⟩ as an amplitude vector.
pub fn basis_state(n_levels: usize, level: usize) -> StateVector {
    let mut c = StateVector::zeros(n_levels);
    c[level] = Complex64::new(1.0, 0.0);
    c
}

/// Largest amplitude magnitude in a complex vector; handy for comparing
/// final states between backends.
pub fn max_abs(v: &StateVector) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Equal-weight real superposition of the given levels, normalized.
pub fn superposition(n_levels: usize, levels: &[usize]) -> StateVector {
    let w = 1.0 / (levels.len() as f64).sqrt();
    let mut c = StateVector::zeros(n_levels);
    for &l in levels {
        c[l] = Complex64::new(w, 0.0);
    }
    c
}

/// Amplitudes sampled on the integration grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<StateVector>,
    program: PulseProgram,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<StateVector>, program: PulseProgram) -> Self {
        assert_eq!(times.len(), states.len());
        Self { times, states, program }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[StateVector] {
        &self.states
    }

    pub fn program(&self) -> &PulseProgram {
        &self.program
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &StateVector {
        self.states.last().expect("trajectory is never empty")
    }

    /// Grid index closest to `t`.
    pub fn index_at(&self, t: f64) -> usize {
        match self.times.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) if i == self.times.len() => self.times.len() - 1,
            Err(i) => {
                if (t - self.times[i - 1]).abs() <= (self.times[i] - t).abs() {
                    i - 1
                } else {
                    i
                }
            }
        }
    }

    pub fn state_at(&self, t: f64) -> &StateVector {
        &self.states[self.index_at(t)]
    }

    /// Evenly spaced sample indices, at most `max_points` of them, always
    /// including the final point.
    pub fn decimated_indices(&self, max_points: usize) -> Vec<usize> {
        let n = self.len();
        if n <= max_points {
            return (0..n).collect();
        }
        let stride = (n - 1) as f64 / (max_points - 1) as f64;
        (0..max_points)
            .map(|k| ((k as f64 * stride).round() as usize).min(n - 1))
            .collect()
    }
}

/// Coherence ρ_jk(t) = c_j c_k* for one level pair, split into real and
/// imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceSeries {
    pub pair: (usize, usize),
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

/// Populations and requested coherences along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSeries {
    pub times: Vec<f64>,
    /// populations[level][sample]
    pub populations: Vec<Vec<f64>>,
    pub coherences: Vec<CoherenceSeries>,
}

impl ObservableSeries {
    pub fn n_levels(&self) -> usize {
        self.populations.len()
    }

    pub fn index_at(&self, t: f64) -> usize {
        match self.times.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) if i == self.times.len() => self.times.len() - 1,
            Err(i) => {
                if (t - self.times[i - 1]).abs() <= (self.times[i] - t).abs() {
                    i - 1
                } else {
                    i
                }
            }
        }
    }

    pub fn population_at(&self, level: usize, t: f64) -> f64 {
        self.populations[level][self.index_at(t)]
    }

    pub fn coherence_at(&self, pair: (usize, usize), t: f64) -> Option<Complex64> {
        let i = self.index_at(t);
        self.coherences
            .iter()
            .find(|c| c.pair == pair)
            .map(|c| Complex64::new(c.re[i], c.im[i]))
    }
}

/// Pointwise populations |c_j|² and coherences c_j c_k* for the requested
/// level pairs.
pub fn observables(traj: &Trajectory, pairs: &[(usize, usize)]) -> Result<ObservableSeries, Error> {
    let n = traj.final_state().len();
    for &(j, k) in pairs {
        if j >= n || k >= n {
            return Err(Error::IndexOutOfRange(format!(
                "coherence pair ({j}, {k}) out of range for {n} levels"
            )));
        }
    }
    let mut populations = vec![Vec::with_capacity(traj.len()); n];
    let mut coherences: Vec<CoherenceSeries> = pairs
        .iter()
        .map(|&pair| CoherenceSeries {
            pair,
            re: Vec::with_capacity(traj.len()),
            im: Vec::with_capacity(traj.len()),
        })
        .collect();
    for state in traj.states() {
        for (level, series) in populations.iter_mut().enumerate() {
            series.push(state[level].norm_sqr());
        }
        for series in &mut coherences {
            let (j, k) = series.pair;
            let rho = state[j] * state[k].conj();
            series.re.push(rho.re);
            series.im.push(rho.im);
        }
    }
    Ok(ObservableSeries {
        times: traj.times().to_vec(),
        populations,
        coherences,
    })
}

/// A time-stepping backend for the amplitude equation.
pub trait Propagator: Send + Sync {
    fn name(&self) -> &'static str;

    fn propagate(
        &self,
        initial: &StateVector,
        chain: &LevelChain,
        program: &PulseProgram,
        decay: &DecayModel,
        dt: f64,
    ) -> Result<Trajectory, Error>;
}

static RK4: Rk4 = Rk4;
static EXPM: ExpmMidpoint = ExpmMidpoint;
static BACKENDS: [&dyn Propagator; 2] = [&RK4, &EXPM];

/// All registered backends.
pub fn backends() -> &'static [&'static dyn Propagator] {
    &BACKENDS
}

/// Looks a backend up by its registered name.
pub fn backend(name: &str) -> Result<&'static dyn Propagator, Error> {
    backends()
        .iter()
        .copied()
        .find(|b| b.name() == name)
        .ok_or_else(|| Error::UnknownBackend(name.to_string()))
}

/// Default step size: 2·10⁴ steps across the program window.
pub fn default_dt(program: &PulseProgram) -> f64 {
    (program.t_end() - program.t_start()) / 2e4
}

/// RK4 propagation over the full program window.
pub fn propagate(
    initial: &StateVector,
    chain: &LevelChain,
    program: &PulseProgram,
    decay: &DecayModel,
    dt: f64,
) -> Result<Trajectory, Error> {
    RK4.propagate(initial, chain, program, decay, dt)
}

/// Independent verification backend: freezes H at each step midpoint and
/// advances by the exact matrix exponential.
pub fn propagate_expm_oracle(
    initial: &StateVector,
    chain: &LevelChain,
    program: &PulseProgram,
    decay: &DecayModel,
    dt: f64,
) -> Result<Trajectory, Error> {
    EXPM.propagate(initial, chain, program, decay, dt)
}

pub(crate) fn check_inputs(
    initial: &StateVector,
    chain: &LevelChain,
    program: &PulseProgram,
    decay: &DecayModel,
    dt: f64,
) -> Result<usize, Error> {
    if initial.len() != chain.n_levels() {
        return Err(Error::IndexOutOfRange(format!(
            "initial state has {} amplitudes, chain has {} levels",
            initial.len(),
            chain.n_levels()
        )));
    }
    if decay.n_levels() != chain.n_levels() {
        return Err(Error::InvalidDecay(format!(
            "decay model covers {} levels, chain has {}",
            decay.n_levels(),
            chain.n_levels()
        )));
    }
    if let Some(ch) = program.max_channel() {
        if ch >= chain.n_channels() {
            return Err(Error::ChannelOutOfRange {
                channel: ch,
                n_channels: chain.n_channels(),
            });
        }
    }
    if !(dt > 0.0) {
        return Err(Error::Numerical(format!("step size must be positive, got {dt}")));
    }
    let n_steps = ((program.t_end() - program.t_start()) / dt).round() as usize;
    Ok(n_steps.max(1))
}
