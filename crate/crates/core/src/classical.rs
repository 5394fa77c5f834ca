//! Perturbed classical oscillator baselines.
//!
//! A unit-frequency sinusoid `x(t) = A cos(2 pi t + phi)` is sampled on the
//! same grid as the quantum model and interrupted by impacts at the same
//! Bernoulli rate. Two impact definitions are provided:
//!
//! - full randomization: the strongest possible impact, destroying all
//!   memory of amplitude and phase;
//! - continuity-constrained: the position `x(t0)` is unchanged by the
//!   impact, the amplitude and velocity are re-randomized within that
//!   constraint.
//!
//! Impacts may be weakened by a factor `epsilon`, mixing the proposed
//! post-impact amplitude and phase with the old ones.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::series::TimeSeries;

/// Amplitude and phase of the unit-frequency sinusoid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorState {
    /// Amplitude in `[0, 1]`.
    pub amplitude: f64,
    /// Phase in `[0, 2*pi)`.
    pub phase: f64,
}

impl OscillatorState {
    pub fn new(amplitude: f64, phase: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&amplitude) {
            return Err(Error::InvalidConfig(format!("amplitude {amplitude} outside [0, 1]")));
        }
        Ok(Self { amplitude, phase: wrap_phase(phase) })
    }

    /// Maximum-amplitude oscillator starting at its positive turning point.
    pub fn cosine() -> Self {
        Self { amplitude: 1.0, phase: 0.0 }
    }

    /// Position at time `t` (cycles). The phase argument is reduced with
    /// the fractional part of `t` so late-time samples keep full precision.
    pub fn position(&self, t: f64) -> f64 {
        self.amplitude * (TAU * t.fract() + self.phase).cos()
    }

    /// Velocity at time `t`.
    pub fn velocity(&self, t: f64) -> f64 {
        -TAU * self.amplitude * (TAU * t.fract() + self.phase).sin()
    }
}

fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    if w == TAU {
        0.0
    } else {
        w
    }
}

/// Which impact definition a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassicalModel {
    /// Amplitude and phase completely randomized.
    FullRandomization,
    /// Position preserved; amplitude and velocity re-randomized.
    ContinuityConstrained,
}

/// Probability measure for the continuity-constrained velocity draw.
///
/// The two readings differ in which quantity is uniform; both keep the
/// position fixed and the velocity sign random.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VelocityMeasure {
    /// New amplitude uniform in `[|x0|, 1]`; speed follows.
    #[default]
    AmplitudeUniform,
    /// New speed uniform in `[0, s_max(x0)]`; amplitude follows.
    SpeedUniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalModelConfig {
    pub model: ClassicalModel,
    /// Impact weakening factor in `(0, 1]`; 1 applies impacts at full
    /// strength.
    pub epsilon: f64,
    pub velocity_measure: VelocityMeasure,
    pub delta_t_sample: f64,
    pub p_rate: f64,
    pub n_cycles: u32,
    pub seed: u64,
}

impl ClassicalModelConfig {
    pub fn new(model: ClassicalModel) -> Self {
        Self {
            model,
            epsilon: 1.0,
            velocity_measure: VelocityMeasure::default(),
            delta_t_sample: 1.0 / 64.0,
            p_rate: 0.0,
            n_cycles: 2048,
            seed: 0,
        }
    }

    pub fn with_rate(mut self, p_rate: f64) -> Self {
        self.p_rate = p_rate;
        self
    }

    pub fn n_samples(&self) -> usize {
        (self.n_cycles as f64 / self.delta_t_sample).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_t_sample > 0.0 && self.delta_t_sample <= 0.1) {
            return Err(Error::InvalidConfig(format!(
                "delta_t_sample = {} must be in (0, 0.1]",
                self.delta_t_sample
            )));
        }
        if self.p_rate < 0.0 {
            return Err(Error::InvalidConfig("p_rate must be nonnegative".into()));
        }
        if self.n_cycles < 1 {
            return Err(Error::InvalidConfig("n_cycles must be at least 1".into()));
        }
        if self.delta_t_sample * self.p_rate > 0.5 {
            return Err(Error::InvalidConfig(format!(
                "delta_t_sample * p_rate = {} > 0.5 breaks the one-impact-per-step approximation",
                self.delta_t_sample * self.p_rate
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::InvalidConfig(format!("epsilon = {} outside (0, 1]", self.epsilon)));
        }
        Ok(())
    }
}

/// Full-randomization impact: `A' ~ U(0, 1)`, `phi' ~ U(0, 2*pi)`,
/// independent of the prior state. The signal is discontinuous at the
/// impact in general.
pub fn impact_full(rng: &mut impl Rng) -> OscillatorState {
    OscillatorState { amplitude: rng.gen::<f64>(), phase: rng.gen::<f64>() * TAU }
}

/// Continuity-constrained impact at time `t0`: the position is unchanged,
/// the new amplitude is drawn within `[|x(t0)|, 1]` (directly, or induced
/// by a uniform speed draw), and the new velocity sign is random.
pub fn impact_continuous(
    state: &OscillatorState,
    t0: f64,
    measure: VelocityMeasure,
    rng: &mut impl Rng,
) -> Result<OscillatorState> {
    let x0 = state.position(t0);
    if x0.abs() > 1.0 + 1e-12 {
        return Err(Error::PositionOutOfRange { position: x0 });
    }
    let x0 = x0.clamp(-1.0, 1.0);

    let amplitude = match measure {
        VelocityMeasure::AmplitudeUniform => x0.abs() + rng.gen::<f64>() * (1.0 - x0.abs()),
        VelocityMeasure::SpeedUniform => {
            // Speed in units of 2*pi: s = sqrt(A^2 - x0^2) <= sqrt(1 - x0^2).
            let s_max = (1.0 - x0 * x0).max(0.0).sqrt();
            let s = rng.gen::<f64>() * s_max;
            x0.hypot(s).min(1.0)
        }
    };
    let positive_velocity = rng.gen::<f64>() < 0.5;

    if amplitude <= f64::MIN_POSITIVE {
        return Ok(OscillatorState { amplitude: 0.0, phase: 0.0 });
    }
    // x(t0) = A' cos(psi) with psi the total phase at t0; the velocity is
    // -2*pi*A' sin(psi), so a positive velocity needs sin(psi) < 0.
    let cos_psi = (x0 / amplitude).clamp(-1.0, 1.0);
    let mut psi = cos_psi.acos();
    if positive_velocity {
        psi = -psi;
    }
    Ok(OscillatorState { amplitude, phase: wrap_phase(psi - TAU * t0.fract()) })
}

/// Mix a proposed post-impact state with the old one: the amplitude mixes
/// linearly, the phase moves by `epsilon` of the shortest signed arc from
/// the old phase to the proposed one.
pub fn weaken(old: &OscillatorState, proposed: &OscillatorState, epsilon: f64) -> OscillatorState {
    if epsilon >= 1.0 {
        return *proposed;
    }
    let amplitude = epsilon * proposed.amplitude + (1.0 - epsilon) * old.amplitude;
    let mut arc = proposed.phase - old.phase;
    if arc > std::f64::consts::PI {
        arc -= TAU;
    } else if arc < -std::f64::consts::PI {
        arc += TAU;
    }
    OscillatorState { amplitude, phase: wrap_phase(old.phase + epsilon * arc) }
}

/// Sample `x(k dt)` with stochastic impacts; deterministic given the seed.
pub fn simulate_classical(config: &ClassicalModelConfig) -> Result<TimeSeries> {
    simulate_classical_stream(config, 0)
}

/// [`simulate_classical`] on a specific RNG stream of the master seed.
pub fn simulate_classical_stream(config: &ClassicalModelConfig, stream: u64) -> Result<TimeSeries> {
    config.validate()?;
    let n = config.n_samples();
    let prob = config.delta_t_sample * config.p_rate;
    let mut rng = stream_rng(config.seed, stream);
    let mut state = OscillatorState::cosine();
    let mut values = vec![0.0; n];

    for (k, slot) in values.iter_mut().enumerate() {
        let t = k as f64 * config.delta_t_sample;
        *slot = state.position(t);
        if prob > 0.0 && rng.gen::<f64>() < prob {
            let proposed = match config.model {
                ClassicalModel::FullRandomization => impact_full(&mut rng),
                ClassicalModel::ContinuityConstrained => {
                    impact_continuous(&state, t, config.velocity_measure, &mut rng)?
                }
            };
            state = weaken(&state, &proposed, config.epsilon);
        }
    }
    Ok(TimeSeries::new(values, config.delta_t_sample))
}
