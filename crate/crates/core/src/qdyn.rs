//! Exact two-level quantum dynamics under random collision perturbations.
//!
//! The system is a double well with spatial basis states `|L>` and `|R>`
//! coupled by a tunneling matrix element `omega1/2`. Free evolution beats
//! probability between the wells at angular frequency `omega1`. A collision
//! is modelled as a top-hat tilt of one well by `omegaP` for a duration
//! `dt_impact` drawn uniformly from `[0, 2*pi/omegaP]`; the propagator over
//! the tilt is applied exactly, so the well amplitudes are continuous at
//! both edges of the perturbation.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::series::TimeSeries;

/// Tolerance on `|alpha|^2 + |beta|^2 - 1` accepted at API boundaries.
pub const NORM_TOL: f64 = 1e-9;

/// Per-step drift above which a trajectory renormalizes its state.
const RENORM_TOL: f64 = 1e-12;

/// Pure state in the spatial basis: `alpha |L> + beta |R>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector {
    pub alpha: Complex64,
    pub beta: Complex64,
}

impl StateVector {
    /// Construct and check normalization to [`NORM_TOL`].
    pub fn new(alpha: Complex64, beta: Complex64) -> Result<Self> {
        let s = Self { alpha, beta };
        s.check_normalized()?;
        Ok(s)
    }

    /// `|L>`: all probability in the left well. This is also the state with
    /// energy-basis coefficients `a = b = 1/sqrt(2)`, i.e. a full-amplitude
    /// beat.
    pub fn left() -> Self {
        Self { alpha: Complex64::new(1.0, 0.0), beta: Complex64::new(0.0, 0.0) }
    }

    /// Symmetric energy eigenstate (`a = 1, b = 0`); stationary under free
    /// evolution.
    pub fn ground() -> Self {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self { alpha: h, beta: h }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.alpha.norm_sqr() + self.beta.norm_sqr()
    }

    pub fn check_normalized(&self) -> Result<()> {
        let n = self.norm_sqr();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm_sqr: n });
        }
        Ok(())
    }

    /// Left-well occupancy `|alpha|^2`.
    pub fn occupancy(&self) -> f64 {
        self.alpha.norm_sqr()
    }

    fn renormalized(self) -> Self {
        let n = self.norm_sqr().sqrt();
        Self { alpha: self.alpha / n, beta: self.beta / n }
    }
}

/// Which well an impact raises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

/// Impact side policy for stochastic trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImpactSide {
    /// Raise the left well at every impact.
    LeftOnly,
    /// Raise either well with equal probability.
    #[default]
    RandomSide,
}

/// One collision event on the sampling grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpactEvent {
    /// Sample index at which the impact is applied.
    pub sample: usize,
    /// Tilt duration; must lie in `[0, 2*pi/omegaP]`.
    pub duration: f64,
    pub side: Side,
}

/// Parameters of the quantum model. Times are in cycles of the unperturbed
/// beat, so `omega1` defaults to `2*pi` and one cycle is one time unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumModelConfig {
    /// Tunneling splitting (angular frequency). Fixed at `2*pi` for presets.
    pub omega1: f64,
    /// Baseline well energy. Contributes only a global phase and is dropped
    /// from the propagators; kept for completeness.
    pub omega0: f64,
    /// Well tilt during an impact (angular frequency).
    pub omega_p: f64,
    /// Sampling interval in cycles.
    pub delta_t_sample: f64,
    /// Mean impacts per cycle.
    pub p_rate: f64,
    /// Record length in cycles.
    pub n_cycles: u32,
    /// Master seed for the trajectory RNG stream.
    pub seed: u64,
    pub impact_side: ImpactSide,
}

impl Default for QuantumModelConfig {
    fn default() -> Self {
        Self {
            omega1: TAU,
            omega0: 0.0,
            omega_p: 260.0 * TAU,
            delta_t_sample: 1.0 / 64.0,
            p_rate: 0.0,
            n_cycles: 2048,
            seed: 0,
            impact_side: ImpactSide::default(),
        }
    }
}

impl QuantumModelConfig {
    /// NH3 preset: room-temperature perturbation strength over a 0.8 cm^-1
    /// splitting gives `omegaP = 260 * omega1`.
    pub fn nh3() -> Self {
        Self::default()
    }

    /// ND3 preset: fifteen times smaller splitting, `omegaP = 3925 * omega1`.
    pub fn nd3() -> Self {
        Self { omega_p: 3925.0 * TAU, ..Self::default() }
    }

    pub fn with_rate(mut self, p_rate: f64) -> Self {
        self.p_rate = p_rate;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Upper bound of the impact duration distribution, `2*pi/omegaP`.
    pub fn max_impact_duration(&self) -> f64 {
        TAU / self.omega_p
    }

    /// Number of samples in a record: the record covers `[0, n_cycles)` on a
    /// uniform grid, which makes the DFT bin spacing exactly `1/n_cycles`.
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
        if self.omega1 <= 0.0 {
            return Err(Error::InvalidConfig("omega1 must be positive".into()));
        }
        if self.omega_p < 0.0 {
            return Err(Error::InvalidConfig("omega_p must be nonnegative".into()));
        }
        if self.p_rate < 0.0 {
            return Err(Error::InvalidConfig("p_rate must be nonnegative".into()));
        }
        if self.n_cycles < 1 {
            return Err(Error::InvalidConfig("n_cycles must be at least 1".into()));
        }
        let prob = self.delta_t_sample * self.p_rate;
        if prob > 0.5 {
            return Err(Error::InvalidConfig(format!(
                "delta_t_sample * p_rate = {prob} > 0.5 breaks the one-impact-per-step approximation"
            )));
        }
        if self.p_rate > 0.0 {
            if self.omega_p == 0.0 {
                return Err(Error::InvalidConfig(
                    "omega_p must be positive when impacts are enabled".into(),
                ));
            }
            if self.max_impact_duration() >= self.delta_t_sample {
                return Err(Error::InvalidConfig(format!(
                    "impact duration bound 2*pi/omega_p = {} must be shorter than delta_t_sample = {}",
                    self.max_impact_duration(),
                    self.delta_t_sample
                )));
            }
        }
        Ok(())
    }
}

/// Advance a state by the exact free propagator over time `t`.
///
/// With `c = cos(omega1 t / 2)` and `s = sin(omega1 t / 2)`:
/// `alpha' = c a - i s b`, `beta' = -i s a + c b`. The global phase from
/// `omega0` cancels in every observable and is dropped.
pub fn free_propagate(state: StateVector, t: f64, config: &QuantumModelConfig) -> Result<StateVector> {
    state.check_normalized()?;
    Ok(free_propagate_unchecked(state, t, config.omega1))
}

fn free_propagate_unchecked(state: StateVector, t: f64, omega1: f64) -> StateVector {
    let half = 0.5 * omega1 * t;
    let c = half.cos();
    let s = half.sin();
    let i = Complex64::i();
    StateVector {
        alpha: c * state.alpha - i * s * state.beta,
        beta: -i * s * state.alpha + c * state.beta,
    }
}

/// Advance a state by the exact propagator of the tilted Hamiltonian over an
/// impact of the given duration.
///
/// Raising the left well adds `omegaP` to the `|L>` diagonal; the right-side
/// impact mirrors the diagonal. With `Omega = hypot(omegaP, omega1)`,
/// `cos(theta) = omegaP/Omega`, `sin(theta) = omega1/Omega`,
/// `c = cos(Omega dt/2)`, `s = sin(Omega dt/2)` and the overall phase
/// `exp(-i omegaP dt / 2)`:
///
/// ```text
/// alpha' = g [ (c -+ i s cos(theta)) alpha - i s sin(theta) beta ]
/// beta'  = g [ -i s sin(theta) alpha + (c +- i s cos(theta)) beta ]
/// ```
///
/// This is the same evolution as matching the spatial amplitudes onto the
/// tilted eigenbasis at onset and back at offset: both amplitudes are
/// continuous at the start and end of the perturbation by construction.
pub fn impact_propagate(
    state: StateVector,
    duration: f64,
    side: Side,
    config: &QuantumModelConfig,
) -> Result<StateVector> {
    state.check_normalized()?;
    if duration < 0.0 {
        return Err(Error::InvalidConfig(format!("impact duration {duration} < 0")));
    }
    Ok(impact_propagate_unchecked(state, duration, side, config.omega_p, config.omega1))
}

fn impact_propagate_unchecked(
    state: StateVector,
    duration: f64,
    side: Side,
    omega_p: f64,
    omega1: f64,
) -> StateVector {
    let big_omega = omega_p.hypot(omega1);
    if big_omega == 0.0 {
        return state;
    }
    let cos_theta = omega_p / big_omega;
    let sin_theta = omega1 / big_omega;
    let half = 0.5 * big_omega * duration;
    let c = half.cos();
    let s = half.sin();
    let g = Complex64::from_polar(1.0, -0.5 * omega_p * duration);
    let i = Complex64::i();
    let diag = i * s * cos_theta;
    let off = -i * s * sin_theta;
    let (daa, dbb) = match side {
        Side::Left => (c - diag, c + diag),
        Side::Right => (c + diag, c - diag),
    };
    StateVector {
        alpha: g * (daa * state.alpha + off * state.beta),
        beta: g * (off * state.alpha + dbb * state.beta),
    }
}

/// Energy-basis coefficients `(a, b)` of a spatial-basis state, with the
/// symmetric combination first: `a = (alpha + beta)/sqrt(2)`,
/// `b = (alpha - beta)/sqrt(2)`.
pub fn basis_transform(state: &StateVector) -> (Complex64, Complex64) {
    let inv = std::f64::consts::FRAC_1_SQRT_2;
    ((state.alpha + state.beta) * inv, (state.alpha - state.beta) * inv)
}

/// Inverse of [`basis_transform`].
pub fn basis_transform_inverse(a: Complex64, b: Complex64) -> StateVector {
    let inv = std::f64::consts::FRAC_1_SQRT_2;
    StateVector { alpha: (a + b) * inv, beta: (a - b) * inv }
}

/// Single-state density matrix in the spatial basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix {
    pub rho_ll: f64,
    pub rho_rr: f64,
    pub rho_lr: Complex64,
}

impl DensityMatrix {
    pub fn trace(&self) -> f64 {
        self.rho_ll + self.rho_rr
    }

    /// `rho_LL rho_RR - |rho_LR|^2`; zero for a pure state.
    pub fn determinant(&self) -> f64 {
        self.rho_ll * self.rho_rr - self.rho_lr.norm_sqr()
    }
}

/// Density matrix of a pure state: `rho_LL = |alpha|^2`, `rho_RR = |beta|^2`,
/// `rho_LR = alpha * conj(beta)`.
pub fn density_matrix(state: &StateVector) -> DensityMatrix {
    DensityMatrix {
        rho_ll: state.alpha.norm_sqr(),
        rho_rr: state.beta.norm_sqr(),
        rho_lr: state.alpha * state.beta.conj(),
    }
}

/// How impacts are injected into a trajectory.
#[derive(Debug, Clone)]
pub enum ImpactSchedule {
    /// Bernoulli draw of probability `delta_t_sample * p_rate` at every
    /// sample.
    Stochastic,
    /// Explicit events; durations may still be drawn (`duration = NaN` means
    /// draw uniformly). Events must be sorted by sample index.
    Scripted(Vec<ImpactEvent>),
}

/// Bookkeeping from one trajectory run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TrajectoryStats {
    pub impacts: u64,
    pub renormalizations: u64,
    /// Largest `| |psi|^2 - 1 |` observed before any renormalization.
    pub max_norm_error: f64,
}

/// Full state record of one trajectory, one entry per sample.
#[derive(Debug, Clone)]
pub struct StateTrajectory {
    pub states: Vec<StateVector>,
    pub dt: f64,
    pub stats: TrajectoryStats,
}

impl StateTrajectory {
    pub fn occupancy_series(&self) -> TimeSeries {
        TimeSeries::new(self.states.iter().map(|s| s.occupancy()).collect(), self.dt)
    }
}

fn run_trajectory(
    config: &QuantumModelConfig,
    initial: StateVector,
    schedule: &ImpactSchedule,
    rng: &mut ChaCha8Rng,
    mut on_sample: impl FnMut(usize, &StateVector),
) -> Result<TrajectoryStats> {
    config.validate()?;
    initial.check_normalized()?;
    if let ImpactSchedule::Scripted(events) = schedule {
        for ev in events {
            if ev.duration.is_finite() && !(0.0..=config.max_impact_duration()).contains(&ev.duration) {
                return Err(Error::InvalidConfig(format!(
                    "scripted impact duration {} outside [0, {}]",
                    ev.duration,
                    config.max_impact_duration()
                )));
            }
        }
    }

    let n = config.n_samples();
    let prob = config.delta_t_sample * config.p_rate;
    let mut state = initial;
    let mut stats = TrajectoryStats::default();
    let mut scripted_cursor = 0usize;

    for k in 0..n {
        on_sample(k, &state);

        // Impacts are instantaneous kicks on the sampling grid: the full
        // tilt-duration propagator is applied but the clock does not
        // advance, which keeps the sample grid uniform.
        match schedule {
            ImpactSchedule::Stochastic => {
                if prob > 0.0 && rng.gen::<f64>() < prob {
                    let duration = rng.gen::<f64>() * config.max_impact_duration();
                    let side = match config.impact_side {
                        ImpactSide::LeftOnly => Side::Left,
                        ImpactSide::RandomSide => {
                            if rng.gen::<f64>() < 0.5 {
                                Side::Left
                            } else {
                                Side::Right
                            }
                        }
                    };
                    state = impact_propagate_unchecked(state, duration, side, config.omega_p, config.omega1);
                    stats.impacts += 1;
                }
            }
            ImpactSchedule::Scripted(events) => {
                while scripted_cursor < events.len() && events[scripted_cursor].sample == k {
                    let ev = events[scripted_cursor];
                    let duration = if ev.duration.is_finite() {
                        ev.duration
                    } else {
                        rng.gen::<f64>() * config.max_impact_duration()
                    };
                    state = impact_propagate_unchecked(state, duration, ev.side, config.omega_p, config.omega1);
                    stats.impacts += 1;
                    scripted_cursor += 1;
                }
            }
        }

        state = free_propagate_unchecked(state, config.delta_t_sample, config.omega1);

        let err = (state.norm_sqr() - 1.0).abs();
        if err > stats.max_norm_error {
            stats.max_norm_error = err;
        }
        if err > RENORM_TOL {
            state = state.renormalized();
            stats.renormalizations += 1;
        }
    }
    Ok(stats)
}

/// Simulate the left-well occupancy `y(k dt) = |alpha(k dt)|^2` for
/// `k = 0..n_samples`. Deterministic: the same `(config, initial)` give a
/// bit-identical record.
pub fn simulate_trajectory(config: &QuantumModelConfig, initial: StateVector) -> Result<TimeSeries> {
    let (series, _) = simulate_trajectory_detailed(config, initial)?;
    Ok(series)
}

/// [`simulate_trajectory`] plus unitarity bookkeeping.
pub fn simulate_trajectory_detailed(
    config: &QuantumModelConfig,
    initial: StateVector,
) -> Result<(TimeSeries, TrajectoryStats)> {
    let mut values = vec![0.0; config.n_samples()];
    let mut rng = stream_rng(config.seed, 0);
    let stats = run_trajectory(config, initial, &ImpactSchedule::Stochastic, &mut rng, |k, s| {
        values[k] = s.occupancy();
    })?;
    Ok((TimeSeries::new(values, config.delta_t_sample), stats))
}

/// Simulate one trajectory on the given RNG stream, recording the occupancy.
pub fn simulate_trajectory_stream(
    config: &QuantumModelConfig,
    initial: StateVector,
    stream: u64,
) -> Result<TimeSeries> {
    let mut values = vec![0.0; config.n_samples()];
    let mut rng = stream_rng(config.seed, stream);
    run_trajectory(config, initial, &ImpactSchedule::Stochastic, &mut rng, |k, s| {
        values[k] = s.occupancy();
    })?;
    Ok(TimeSeries::new(values, config.delta_t_sample))
}

/// Simulate one trajectory recording the full state at every sample.
pub fn simulate_states(
    config: &QuantumModelConfig,
    initial: StateVector,
    stream: u64,
) -> Result<StateTrajectory> {
    let mut states = vec![StateVector::left(); config.n_samples()];
    let mut rng = stream_rng(config.seed, stream);
    let stats = run_trajectory(config, initial, &ImpactSchedule::Stochastic, &mut rng, |k, s| {
        states[k] = *s;
    })?;
    Ok(StateTrajectory { states, dt: config.delta_t_sample, stats })
}

/// Simulate with explicit impact events (diagnostic / figure reproduction).
pub fn simulate_scripted(
    config: &QuantumModelConfig,
    initial: StateVector,
    events: Vec<ImpactEvent>,
) -> Result<StateTrajectory> {
    let mut states = vec![StateVector::left(); config.n_samples()];
    let mut rng = stream_rng(config.seed, 0);
    let stats = run_trajectory(config, initial, &ImpactSchedule::Scripted(events), &mut rng, |k, s| {
        states[k] = *s;
    })?;
    Ok(StateTrajectory { states, dt: config.delta_t_sample, stats })
}

/// Sample-index window `[start, end)` over a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub start: usize,
    pub end: usize,
}

impl Window {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    /// Window covering cycles `[start_cycle, end_cycle)` at sampling step `dt`.
    pub fn from_cycles(start_cycle: f64, end_cycle: f64, dt: f64) -> Self {
        Self {
            start: (start_cycle / dt).round() as usize,
            end: (end_cycle / dt).round() as usize,
        }
    }
}

/// Histogram of occupancy values over `[0, 1]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OccupancyHistogram {
    pub counts: Vec<u64>,
    pub total: u64,
}

impl OccupancyHistogram {
    fn new(n_bins: usize) -> Self {
        Self { counts: vec![0; n_bins], total: 0 }
    }

    fn add(&mut self, y: f64) {
        let n = self.counts.len();
        let idx = ((y * n as f64) as usize).min(n - 1);
        self.counts[idx] += 1;
        self.total += 1;
    }

    /// Fraction of samples in the outermost bin on each edge.
    pub fn edge_fraction(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        (self.counts[0] + self.counts[self.counts.len() - 1]) as f64 / self.total as f64
    }

    /// Fraction of samples in the central half of the range.
    pub fn central_fraction(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let n = self.counts.len();
        let mid: u64 = self.counts[n / 4..n - n / 4].iter().sum();
        mid as f64 / self.total as f64
    }
}

/// Localization diagnostics over an ensemble of state trajectories.
///
/// A localizing ensemble would show the occupancy histogram piling up at 0
/// and 1 while the per-trajectory coherence collapses; persistent
/// per-trajectory coherence with a spread-out histogram refutes that
/// picture even when the ensemble-averaged coherence has dephased away.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoherenceStats {
    /// Time average of `|rho_LR(t)|` within the window, per trajectory.
    pub per_trajectory_coherence: Vec<f64>,
    /// Mean of `per_trajectory_coherence`.
    pub mean_coherence: f64,
    /// Smallest per-trajectory value.
    pub min_coherence: f64,
    /// Time average of `|<rho_LR(t)>_ensemble|` within the window.
    pub ensemble_coherence: f64,
    pub occupancy_histogram: OccupancyHistogram,
}

/// Compute coherence / localization diagnostics over a late-time window.
pub fn coherence_statistics(ensemble: &[StateTrajectory], window: Window) -> Result<CoherenceStats> {
    if ensemble.is_empty() {
        return Err(Error::Empty("trajectory ensemble"));
    }
    let len = ensemble[0].states.len();
    if window.start >= window.end || window.end > len {
        return Err(Error::EmptyWindow(format!(
            "[{}, {}) over record of {} samples",
            window.start, window.end, len
        )));
    }
    for t in ensemble {
        if t.states.len() != len {
            return Err(Error::GridMismatch("trajectories have unequal lengths".into()));
        }
    }

    let n_t = window.end - window.start;
    let mut per_traj = Vec::with_capacity(ensemble.len());
    let mut ensemble_sum = vec![Complex64::new(0.0, 0.0); n_t];
    let mut hist = OccupancyHistogram::new(20);

    for traj in ensemble {
        let mut acc = 0.0;
        for (i, state) in traj.states[window.start..window.end].iter().enumerate() {
            let rho = density_matrix(state);
            acc += rho.rho_lr.norm();
            ensemble_sum[i] += rho.rho_lr;
            hist.add(rho.rho_ll.clamp(0.0, 1.0));
        }
        per_traj.push(acc / n_t as f64);
    }

    let m = ensemble.len() as f64;
    let ensemble_coherence = ensemble_sum.iter().map(|z| (z / m).norm()).sum::<f64>() / n_t as f64;
    let mean = per_traj.iter().sum::<f64>() / per_traj.len() as f64;
    let min = per_traj.iter().cloned().fold(f64::INFINITY, f64::min);

    Ok(CoherenceStats {
        per_trajectory_coherence: per_traj,
        mean_coherence: mean,
        min_coherence: min,
        ensemble_coherence,
        occupancy_histogram: hist,
    })
}

/// Parse a scripted impact list of the form `t:duration[,t:duration...]`
/// where `duration` is a number in time units or `auto` to draw it.
pub fn parse_impact_script(text: &str, config: &QuantumModelConfig) -> Result<Vec<ImpactEvent>> {
    let mut events = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (t_str, d_str) = part
            .split_once(':')
            .ok_or_else(|| Error::InvalidConfig(format!("impact spec `{part}` is not t:duration")))?;
        let t: f64 = t_str
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad impact time `{t_str}`")))?;
        let duration = if d_str.eq_ignore_ascii_case("auto") {
            f64::NAN
        } else {
            d_str
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad impact duration `{d_str}`")))?
        };
        events.push(ImpactEvent {
            sample: (t / config.delta_t_sample).round() as usize,
            duration,
            side: Side::Left,
        });
    }
    events.sort_by_key(|e| e.sample);
    Ok(events)
}

/// Mean number of impacts per cycle implied by a trajectory's stats.
pub fn realized_rate(stats: &TrajectoryStats, config: &QuantumModelConfig) -> f64 {
    stats.impacts as f64 / config.n_cycles as f64
}
