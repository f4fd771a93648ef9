//! Chain-coupled level systems: static description, decay rates, and the
//! RWA Hamiltonian matrix.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::collections::BTreeSet;

use crate::error::Error;

/// Static description of an odd-N chain of levels, with nearest-neighbour
/// optical couplings |i⟩↔|i+1⟩.
///
/// Levels are numbered along the chain: even indices are the long-lived
/// states, odd indices are the optically excited (lossy) ones by default.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelChain {
    n_levels: usize,
    detunings: Vec<f64>,
    lossy_levels: BTreeSet<usize>,
}

impl LevelChain {
    /// Resonant chain: all detunings zero, odd levels lossy.
    pub fn resonant(n_levels: usize) -> Result<Self, Error> {
        Self::new(n_levels, vec![0.0; n_levels], (1..n_levels).step_by(2))
    }

    /// Chain with a single shared one-photon detuning on the excited (odd)
    /// levels, as in the single-Δ figures.
    pub fn with_shared_detuning(n_levels: usize, delta: f64) -> Result<Self, Error> {
        let detunings = (0..n_levels)
            .map(|i| if i % 2 == 1 { delta } else { 0.0 })
            .collect();
        Self::new(n_levels, detunings, (1..n_levels).step_by(2))
    }

    pub fn new(
        n_levels: usize,
        detunings: Vec<f64>,
        lossy_levels: impl IntoIterator<Item = usize>,
    ) -> Result<Self, Error> {
        let chain = Self {
            n_levels,
            detunings,
            lossy_levels: lossy_levels.into_iter().collect(),
        };
        match validate_chain(&chain) {
            v if v.is_valid() => Ok(chain),
            v => Err(Error::InvalidChain(v.violations)),
        }
    }

    pub fn n_levels(&self) -> usize {
        self.n_levels
    }

    /// Number of Λ-units, n = (N−1)/2.
    pub fn n_units(&self) -> usize {
        (self.n_levels - 1) / 2
    }

    /// Number of coupling channels, N−1.
    pub fn n_channels(&self) -> usize {
        self.n_levels - 1
    }

    pub fn detunings(&self) -> &[f64] {
        &self.detunings
    }

    pub fn is_lossy(&self, level: usize) -> bool {
        self.lossy_levels.contains(&level)
    }

    pub fn lossy_levels(&self) -> impl Iterator<Item = usize> + '_ {
        self.lossy_levels.iter().copied()
    }

    /// Even-indexed readout levels |0⟩, |2⟩, ... in chain order.
    pub fn readout_levels(&self) -> Vec<usize> {
        (0..self.n_levels).step_by(2).collect()
    }
}

/// Instantaneous Rabi frequency on one coupling channel.
///
/// Channel `i` drives the transition |i⟩↔|i+1⟩.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelDrive {
    pub channel_index: usize,
    pub rabi: f64,
}

/// Outcome of [`validate_chain`].
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every chain invariant and reports all violations at once.
pub fn validate_chain(chain: &LevelChain) -> ValidationReport {
    let mut violations = Vec::new();
    let n = chain.n_levels;
    if n < 3 {
        violations.push(format!("n_levels must be >= 3, got {n}"));
    }
    if n % 2 == 0 {
        violations.push(format!("n_levels must be odd, got {n}"));
    }
    if chain.detunings.len() != n {
        violations.push(format!(
            "detunings must have length {n}, got {}",
            chain.detunings.len()
        ));
    }
    if let Some(&d0) = chain.detunings.first() {
        if d0 != 0.0 {
            violations.push(format!("detunings[0] must be 0, got {d0}"));
        }
    }
    if let Some(bad) = chain.detunings.iter().find(|d| !d.is_finite()) {
        violations.push(format!("detunings must be finite, got {bad}"));
    }
    if let Some(&bad) = chain.lossy_levels.iter().find(|&&l| l >= n) {
        violations.push(format!("lossy level {bad} out of range 0..{n}"));
    }
    ValidationReport { violations }
}

/// Per-level amplitude decay rates (the diagonal Γ entering the dissipative
/// amplitude equation) plus optional pairwise pure dephasing.
///
/// Dephasing is carried for completeness; the amplitude backend ignores it.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayModel {
    amplitude_decay: Vec<f64>,
    dephasing: Option<Vec<f64>>,
}

impl DecayModel {
    pub fn new(amplitude_decay: Vec<f64>, dephasing: Option<Vec<f64>>) -> Result<Self, Error> {
        if amplitude_decay.iter().any(|&g| !(g >= 0.0)) {
            return Err(Error::InvalidDecay(
                "amplitude decay rates must be nonnegative and finite".into(),
            ));
        }
        if let Some(d) = &dephasing {
            if d.iter().any(|&g| !(g >= 0.0)) {
                return Err(Error::InvalidDecay(
                    "dephasing rates must be nonnegative".into(),
                ));
            }
        }
        Ok(Self {
            amplitude_decay,
            dephasing,
        })
    }

    /// Closed-system limit: all rates zero.
    pub fn none(n_levels: usize) -> Self {
        Self {
            amplitude_decay: vec![0.0; n_levels],
            dephasing: None,
        }
    }

    pub fn rates(&self) -> &[f64] {
        &self.amplitude_decay
    }

    pub fn dephasing(&self) -> Option<&[f64]> {
        self.dephasing.as_deref()
    }

    pub fn n_levels(&self) -> usize {
        self.amplitude_decay.len()
    }
}

/// Decay model from the two lifetimes of the physical system, in reduced
/// time units: γ = 1/τ_excited on lossy levels, 1/τ_ground elsewhere.
pub fn make_decay_model(
    excited_lifetime: f64,
    ground_lifetime: f64,
    chain: &LevelChain,
) -> Result<DecayModel, Error> {
    if !(excited_lifetime > 0.0) || !(ground_lifetime > 0.0) {
        return Err(Error::InvalidDecay(format!(
            "lifetimes must be positive, got excited={excited_lifetime} ground={ground_lifetime}"
        )));
    }
    let rates = (0..chain.n_levels())
        .map(|i| {
            if chain.is_lossy(i) {
                if excited_lifetime.is_infinite() {
                    0.0
                } else {
                    1.0 / excited_lifetime
                }
            } else if ground_lifetime.is_infinite() {
                0.0
            } else {
                1.0 / ground_lifetime
            }
        })
        .collect();
    DecayModel::new(rates, None)
}

/// Assembles the RWA chain Hamiltonian for the given instantaneous drives:
/// detunings on the diagonal, −Ω on the first off-diagonals, ħ = 1.
///
/// Channels without a drive have Ω = 0. Real envelopes produce a real
/// symmetric matrix.
pub fn build_hamiltonian(
    chain: &LevelChain,
    drives: &[ChannelDrive],
) -> Result<DMatrix<Complex64>, Error> {
    let n = chain.n_levels();
    let mut h = DMatrix::<Complex64>::zeros(n, n);
    for (i, &delta) in chain.detunings().iter().enumerate() {
        h[(i, i)] = Complex64::new(delta, 0.0);
    }
    for drive in drives {
        let i = drive.channel_index;
        if i >= chain.n_channels() {
            return Err(Error::ChannelOutOfRange {
                channel: i,
                n_channels: chain.n_channels(),
            });
        }
        let omega = Complex64::new(drive.rabi, 0.0);
        h[(i, i + 1)] -= omega;
        h[(i + 1, i)] -= omega.conj();
    }
    Ok(h)
}
