//! Gaussian envelopes, STIRAP / fractional-STIRAP fragment builders, program
//! composition, and the adiabaticity metric.

use serde::{Deserialize, Serialize};

use crate::chain::ChannelDrive;
use crate::error::Error;

/// A single Gaussian envelope peak·exp(−(t−center)²/2σ²). Never truncated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPulse {
    pub center: f64,
    pub width: f64,
    pub peak: f64,
}

impl GaussianPulse {
    pub fn new(center: f64, width: f64, peak: f64) -> Result<Self, Error> {
        if !(width > 0.0) {
            return Err(Error::InvalidPulse(format!(
                "pulse width must be positive, got {width}"
            )));
        }
        if !(peak >= 0.0) {
            return Err(Error::InvalidPulse(format!(
                "pulse peak must be nonnegative, got {peak}"
            )));
        }
        Ok(Self { center, width, peak })
    }

    pub fn value(&self, t: f64) -> f64 {
        let x = (t - self.center) / self.width;
        self.peak * (-0.5 * x * x).exp()
    }
}

/// Exact Gaussian envelope amplitude at time `t`.
pub fn envelope_value(pulse: &GaussianPulse, t: f64) -> f64 {
    pulse.value(t)
}

/// All envelopes feeding one coupling channel, summed pointwise.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseChannel {
    pub channel_index: usize,
    pub envelopes: Vec<GaussianPulse>,
}

impl PulseChannel {
    pub fn value(&self, t: f64) -> f64 {
        self.envelopes.iter().map(|e| e.value(t)).sum()
    }
}

/// Which protocol a fragment realizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "type")]
pub enum ProtocolKind {
    Stirap,
    Fstirap { alpha: f64 },
}

/// One protocol step: a small set of envelopes on a pump/Stokes channel pair,
/// placed at absolute times. Fragments are composed into a [`PulseProgram`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProgramFragment {
    pub kind: ProtocolKind,
    pub pump_channel: usize,
    pub stokes_channel: usize,
    envelopes: Vec<(usize, GaussianPulse)>,
}

impl ProgramFragment {
    pub fn envelopes(&self) -> &[(usize, GaussianPulse)] {
        &self.envelopes
    }

    pub fn first_center(&self) -> f64 {
        self.envelopes
            .iter()
            .map(|(_, e)| e.center)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn last_center(&self) -> f64 {
        self.envelopes
            .iter()
            .map(|(_, e)| e.center)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_width(&self) -> f64 {
        self.envelopes
            .iter()
            .map(|(_, e)| e.width)
            .fold(0.0, f64::max)
    }

    fn shift(&mut self, dt: f64) {
        for (_, e) in &mut self.envelopes {
            e.center += dt;
        }
    }

    /// The Λ-unit this fragment acts on, when its channels form the pair
    /// {2k, 2k+1}; generic channel pairs have no unit assignment.
    pub fn unit(&self) -> Option<usize> {
        let lo = self.pump_channel.min(self.stokes_channel);
        let hi = self.pump_channel.max(self.stokes_channel);
        (lo % 2 == 0 && hi == lo + 1).then_some(lo / 2)
    }

    /// Mixing angle θ = atan2(Ω_even, Ω_odd) this fragment leaves behind on
    /// its unit once all its envelopes have passed.
    pub fn asymptotic_angle(&self) -> Option<(usize, f64)> {
        let unit = self.unit()?;
        let t = self.last_center() + 8.0 * self.max_width();
        let even: f64 = self
            .envelopes
            .iter()
            .filter(|(c, _)| *c == 2 * unit)
            .map(|(_, e)| e.value(t))
            .sum();
        let odd: f64 = self
            .envelopes
            .iter()
            .filter(|(c, _)| *c == 2 * unit + 1)
            .map(|(_, e)| e.value(t))
            .sum();
        if even == 0.0 && odd == 0.0 {
            return None;
        }
        Some((unit, even.atan2(odd)))
    }
}

/// Labeled time separating protocol steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMarker {
    pub label: String,
    pub time: f64,
}

/// A full drive schedule: per-channel envelope sums over a simulation window,
/// with markers at step boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseProgram {
    channels: Vec<PulseChannel>,
    t_start: f64,
    t_end: f64,
    step_markers: Vec<StepMarker>,
    fragments: Vec<ProgramFragment>,
}

impl PulseProgram {
    /// A drive-free program over the given window (used for logic "hold").
    pub fn idle(t_start: f64, t_end: f64) -> Result<Self, Error> {
        if !(t_start < t_end) {
            return Err(Error::InvalidPulse(format!(
                "t_start must precede t_end, got [{t_start}, {t_end}]"
            )));
        }
        Ok(Self {
            channels: Vec::new(),
            t_start,
            t_end,
            step_markers: Vec::new(),
            fragments: Vec::new(),
        })
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn step_markers(&self) -> &[StepMarker] {
        &self.step_markers
    }

    pub fn fragments(&self) -> &[ProgramFragment] {
        &self.fragments
    }

    pub fn channels(&self) -> &[PulseChannel] {
        &self.channels
    }

    /// Summed Rabi frequency on `channel` at time `t` (0 for silent channels).
    pub fn rabi(&self, channel: usize, t: f64) -> f64 {
        self.channels
            .iter()
            .filter(|c| c.channel_index == channel)
            .map(|c| c.value(t))
            .sum()
    }

    /// Largest channel index that ever carries a pulse, if any.
    pub fn max_channel(&self) -> Option<usize> {
        self.channels.iter().map(|c| c.channel_index).max()
    }

    /// Largest envelope peak in the program.
    pub fn max_peak(&self) -> f64 {
        self.channels
            .iter()
            .flat_map(|c| c.envelopes.iter())
            .map(|e| e.peak)
            .fold(0.0, f64::max)
    }

    pub fn drives_at(&self, t: f64) -> Vec<ChannelDrive> {
        self.channels
            .iter()
            .map(|c| ChannelDrive {
                channel_index: c.channel_index,
                rabi: c.value(t),
            })
            .collect()
    }
}

/// Standard counterintuitive STIRAP pair: Stokes envelope at
/// `t_center − delay/2`, pump at `t_center + delay/2`, equal widths and peaks.
///
/// The Stokes channel is the one coupling the initially empty pair of levels;
/// reverse transfer is expressed by passing the channel adjacent to the
/// populated end as `pump_channel`.
pub fn build_stirap_pair(
    pump_channel: usize,
    stokes_channel: usize,
    t_center: f64,
    delay: f64,
    sigma: f64,
    omega0: f64,
) -> Result<ProgramFragment, Error> {
    check_pair(pump_channel, stokes_channel, delay)?;
    let stokes = GaussianPulse::new(t_center - delay / 2.0, sigma, omega0)?;
    let pump = GaussianPulse::new(t_center + delay / 2.0, sigma, omega0)?;
    Ok(ProgramFragment {
        kind: ProtocolKind::Stirap,
        pump_channel,
        stokes_channel,
        envelopes: vec![(stokes_channel, stokes), (pump_channel, pump)],
    })
}

/// Fractional STIRAP after the three-pulse recipe: an early Stokes envelope
/// plus a coincident pump/Stokes pair, weighted so that
/// Ω_P(t)/Ω_S(t) → tan(alpha) as t → +∞. The final mixing angle is `alpha`;
/// alpha = π/4 leaves an equal superposition, alpha = π/2 degenerates to the
/// full STIRAP pair.
pub fn build_fstirap(
    pump_channel: usize,
    stokes_channel: usize,
    t_center: f64,
    delay: f64,
    sigma: f64,
    omega0: f64,
    alpha: f64,
) -> Result<ProgramFragment, Error> {
    use std::f64::consts::FRAC_PI_2;
    if !(0.0..=FRAC_PI_2).contains(&alpha) {
        return Err(Error::InvalidPulse(format!(
            "fstirap mixing target alpha must lie in [0, pi/2], got {alpha}"
        )));
    }
    check_pair(pump_channel, stokes_channel, delay)?;
    if alpha == FRAC_PI_2 {
        // cos(alpha) = 0 removes the early Stokes entirely; this limit is the
        // plain counterintuitive pair.
        return build_stirap_pair(pump_channel, stokes_channel, t_center, delay, sigma, omega0);
    }
    let early = GaussianPulse::new(t_center - delay / 2.0, sigma, omega0 * alpha.cos())?;
    let late_stokes = GaussianPulse::new(t_center + delay / 2.0, sigma, omega0 * alpha.cos())?;
    let late_pump = GaussianPulse::new(t_center + delay / 2.0, sigma, omega0 * alpha.sin())?;
    Ok(ProgramFragment {
        kind: ProtocolKind::Fstirap { alpha },
        pump_channel,
        stokes_channel,
        envelopes: vec![
            (stokes_channel, early),
            (stokes_channel, late_stokes),
            (pump_channel, late_pump),
        ],
    })
}

fn check_pair(pump_channel: usize, stokes_channel: usize, delay: f64) -> Result<(), Error> {
    if pump_channel.abs_diff(stokes_channel) != 1 {
        return Err(Error::InvalidPulse(format!(
            "pump and Stokes channels must be adjacent, got {pump_channel} and {stokes_channel}"
        )));
    }
    if !(delay > 0.0) {
        return Err(Error::InvalidPulse(format!(
            "pulse delay must be positive, got {delay}"
        )));
    }
    Ok(())
}

/// Places fragments sequentially with at least `gap` between the last envelope
/// center of one fragment and the first of the next, preserving each
/// fragment's internal spacing. Step markers sit `gap/2` after each fragment;
/// the window pads the outermost centers by 5 widths.
pub fn compose_program(fragments: Vec<ProgramFragment>, gap: f64) -> Result<PulseProgram, Error> {
    if fragments.is_empty() {
        return Err(Error::InvalidPulse("program needs at least one fragment".into()));
    }
    if !(gap > 0.0) {
        return Err(Error::InvalidPulse(format!(
            "inter-fragment gap must be positive, got {gap}"
        )));
    }
    let mut placed: Vec<ProgramFragment> = Vec::with_capacity(fragments.len());
    for mut frag in fragments {
        if let Some(prev) = placed.last() {
            let earliest = prev.last_center() + gap;
            let shift = earliest - frag.first_center();
            if shift > 0.0 {
                frag.shift(shift);
            }
        }
        placed.push(frag);
    }

    let step_markers = placed
        .iter()
        .enumerate()
        .map(|(i, f)| StepMarker {
            label: format!("step-{}", roman(i + 1)),
            time: f.last_center() + gap / 2.0,
        })
        .collect();

    let max_width = placed.iter().map(ProgramFragment::max_width).fold(0.0, f64::max);
    let t_start = placed
        .iter()
        .map(ProgramFragment::first_center)
        .fold(f64::INFINITY, f64::min)
        - 5.0 * max_width;
    let t_end = placed
        .iter()
        .map(ProgramFragment::last_center)
        .fold(f64::NEG_INFINITY, f64::max)
        + 5.0 * max_width;

    let mut channels: Vec<PulseChannel> = Vec::new();
    for frag in &placed {
        for &(ch, env) in frag.envelopes() {
            match channels.iter_mut().find(|c| c.channel_index == ch) {
                Some(c) => c.envelopes.push(env),
                None => channels.push(PulseChannel {
                    channel_index: ch,
                    envelopes: vec![env],
                }),
            }
        }
    }
    channels.sort_by_key(|c| c.channel_index);

    Ok(PulseProgram {
        channels,
        t_start,
        t_end,
        step_markers,
        fragments: placed,
    })
}

fn roman(n: usize) -> String {
    const NUMERALS: [(usize, &str); 7] = [
        (100, "c"),
        (90, "xc"),
        (50, "l"),
        (10, "x"),
        (9, "ix"),
        (5, "v"),
        (4, "iv"),
    ];
    let mut n = n;
    let mut out = String::new();
    for (value, sym) in NUMERALS {
        while n >= value {
            out.push_str(sym);
            n -= value;
        }
    }
    out.push_str(&"i".repeat(n));
    out
}

/// Adiabaticity figure of merit for one protocol step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticityReport {
    pub delta: f64,
    pub omega_rms: f64,
    pub sigma: f64,
    pub metric: f64,
}

/// Dimensionless adiabaticity metric: ||Δ| − √(Δ²+Ω²)|·σ off resonance,
/// Ω·σ at Δ = 0. Values well above 1 mark the adiabatic regime.
pub fn adiabaticity_metric(delta: f64, omega: f64, sigma: f64) -> AdiabaticityReport {
    assert!(sigma > 0.0, "pulse width must be positive");
    let metric = if delta == 0.0 {
        omega * sigma
    } else {
        (delta.abs() - (delta * delta + omega * omega).sqrt()).abs() * sigma
    };
    AdiabaticityReport {
        delta,
        omega_rms: omega,
        sigma,
        metric,
    }
}
