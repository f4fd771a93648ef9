use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{check_inputs, Propagator, StateVector, Trajectory};
use crate::chain::{build_hamiltonian, DecayModel, LevelChain};
use crate::error::Error;
use crate::pulses::PulseProgram;

/// dc/dt = −iH(t)c − Γc at time `t`.
fn derivative(
    chain: &LevelChain,
    program: &PulseProgram,
    decay: &DecayModel,
    t: f64,
    c: &StateVector,
) -> Result<StateVector, Error> {
    let h: DMatrix<Complex64> = build_hamiltonian(chain, &program.drives_at(t))?;
    let mut dc = &h * c;
    dc *= Complex64::new(0.0, -1.0);
    for (i, &gamma) in decay.rates().iter().enumerate() {
        dc[i] -= c[i] * gamma;
    }
    Ok(dc)
}

/// One classical fourth-order Runge-Kutta step, evaluating H at t, t+dt/2
/// and t+dt.
pub fn step_rk4(
    state: &StateVector,
    chain: &LevelChain,
    program: &PulseProgram,
    decay: &DecayModel,
    t: f64,
    dt: f64,
) -> Result<StateVector, Error> {
    debug_assert!(dt > 0.0);
    let half = Complex64::new(dt / 2.0, 0.0);
    let two = Complex64::new(2.0, 0.0);
    let k1 = derivative(chain, program, decay, t, state)?;
    let k2 = derivative(chain, program, decay, t + dt / 2.0, &(state + &k1 * half))?;
    let k3 = derivative(chain, program, decay, t + dt / 2.0, &(state + &k2 * half))?;
    let k4 = derivative(chain, program, decay, t + dt, &(state + &k3 * Complex64::new(dt, 0.0)))?;
    let next = state + (k1 + k2 * two + k3 * two + k4) * Complex64::new(dt / 6.0, 0.0);
    if next.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical(format!(
            "non-finite amplitude after RK4 step at t = {t}"
        )));
    }
    Ok(next)
}

/// Fixed-step classical RK4 integrator.
pub struct Rk4;

impl Propagator for Rk4 {
    fn name(&self) -> &'static str {
        "rk4"
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
        let mut times = Vec::with_capacity(n_steps + 1);
        let mut states = Vec::with_capacity(n_steps + 1);
        let mut state = initial.clone();
        let t0 = program.t_start();
        times.push(t0);
        states.push(state.clone());
        for step in 0..n_steps {
            let t = t0 + step as f64 * dt;
            state = step_rk4(&state, chain, program, decay, t, dt)?;
            times.push(t0 + (step + 1) as f64 * dt);
            states.push(state.clone());
        }
        Ok(Trajectory::new(times, states, program.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagator::{basis_state, expm, max_abs};
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_hamiltonian_leaves_state_unchanged() {
        let chain = LevelChain::resonant(3).unwrap();
        let program = PulseProgram::idle(0.0, 1.0).unwrap();
        let decay = DecayModel::none(3);
        let state = basis_state(3, 0);
        let next = step_rk4(&state, &chain, &program, &decay, 0.0, 0.1).unwrap();
        assert_abs_diff_eq!((next - state).norm(), 0.0);
    }

    #[test]
    fn pure_decay_matches_exponential_to_fifth_order() {
        let g = 0.7;
        let chain = LevelChain::resonant(3).unwrap();
        let program = PulseProgram::idle(0.0, 1.0).unwrap();
        let decay = DecayModel::new(vec![0.0, g, 0.0], None).unwrap();
        let state = basis_state(3, 1);
        let dt = 1e-2;
        let next = step_rk4(&state, &chain, &program, &decay, 0.0, dt).unwrap();
        let expect = (-2.0 * g * dt).exp();
        assert!((next[1].norm_sqr() - expect).abs() < dt.powi(5));
    }

    #[test]
    fn constant_hamiltonian_step_matches_matrix_exponential() {
        use crate::chain::{build_hamiltonian, ChannelDrive};
        let chain = LevelChain::with_shared_detuning(3, 1.5).unwrap();
        let drives = [
            ChannelDrive { channel_index: 0, rabi: 4.0 },
            ChannelDrive { channel_index: 1, rabi: 7.0 },
        ];
        use crate::pulses::{GaussianPulse, PulseChannel};
        let h = build_hamiltonian(&chain, &drives).unwrap();
        let decay = DecayModel::none(3);
        let dt = 1e-3;
        let wide = |ch: usize, rabi: f64| PulseChannel {
            channel_index: ch,
            envelopes: vec![GaussianPulse::new(0.0, 1e9, rabi).unwrap()],
        };
        let const_program = crate::pulses::tests_support::program_from_channels(
            vec![wide(0, 4.0), wide(1, 7.0)],
            0.0,
            dt,
        );
        let state = basis_state(3, 0);
        let stepped = step_rk4(&state, &chain, &const_program, &decay, 0.0, dt).unwrap();
        let exact = expm(&(h * Complex64::new(0.0, -dt))) * &state;
        assert!(max_abs(&(stepped - exact)) < 1e-10);
    }
}
