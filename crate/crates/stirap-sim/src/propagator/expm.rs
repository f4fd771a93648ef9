use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{check_inputs, Propagator, StateVector, Trajectory};
use crate::chain::{build_hamiltonian, DecayModel, LevelChain};
use crate::error::Error;
use crate::pulses::PulseProgram;

/// Matrix exponential by scaling-and-squaring with a Taylor core.
///
/// The argument is scaled down until its Frobenius norm is below 1/2, the
/// series is summed to convergence, and the result squared back up. Intended
/// for the small generator matrices of this crate.
pub fn expm(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = a.nrows();
    let norm = a.norm();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a / Complex64::new(2f64.powi(squarings as i32), 0.0);

    let mut result = DMatrix::<Complex64>::identity(n, n);
    let mut term = DMatrix::<Complex64>::identity(n, n);
    for k in 1..=40u32 {
        term = (&term * &scaled) / Complex64::new(k as f64, 0.0);
        result += &term;
        if term.norm() < 1e-20 * result.norm() {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Piecewise-constant propagation: H is frozen at each step midpoint and the
/// state advanced by exp((−iH − Γ)·dt). Exact for constant generators;
/// used as the independent cross-check backend.
pub struct ExpmMidpoint;

impl Propagator for ExpmMidpoint {
    fn name(&self) -> &'static str {
        "expm"
    }

    fn propagate(
        &self,
        initial: &StateVector,
        chain: &LevelChain,
        program: &PulseProgram,
        decay: &DecayModel,
        dt: f64,
    ) -> Result<Trajectory, Error> {
        let n_steps = check_inputs(initial, chain, program, decay, dt)?;
        let t0 = program.t_start();
        let mut times = Vec::with_capacity(n_steps + 1);
        let mut states = Vec::with_capacity(n_steps + 1);
        let mut state = initial.clone();
        times.push(t0);
        states.push(state.clone());
        for step in 0..n_steps {
            let t_mid = t0 + (step as f64 + 0.5) * dt;
            let h = build_hamiltonian(chain, &program.drives_at(t_mid))?;
            let mut generator = h * Complex64::new(0.0, -dt);
            for (i, &gamma) in decay.rates().iter().enumerate() {
                generator[(i, i)] -= Complex64::new(gamma * dt, 0.0);
            }
            state = expm(&generator) * state;
            if state.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Numerical(format!(
                    "non-finite amplitude after expm step at t = {t_mid}"
                )));
            }
            times.push(t0 + (step + 1) as f64 * dt);
            states.push(state.clone());
        }
        Ok(Trajectory::new(times, states, program.clone()))
    }
}
