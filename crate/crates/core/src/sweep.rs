//! Impact-rate sweeps, quench detection, pressure mapping, and comparison
//! against experimental linewidth data.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::{simulate_classical_stream, ClassicalModelConfig};
use crate::error::{Error, Result};
use crate::qdyn::{simulate_trajectory_stream, QuantumModelConfig, StateVector};
use crate::rng::sweep_stream;
use crate::spectra::{average_spectra, fit_lineshape, spectrum_of, FitRange, LineshapeFit, Spectrum, SpectrumKind};

/// Which model a sweep runs at each grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SweepModel {
    Quantum(QuantumModelConfig),
    Classical(ClassicalModelConfig),
}

impl SweepModel {
    pub fn descriptor(&self) -> String {
        match self {
            SweepModel::Quantum(cfg) => {
                format!("quantum(omega_p={:.6},side={:?})", cfg.omega_p, cfg.impact_side)
            }
            SweepModel::Classical(cfg) => format!(
                "classical({:?},measure={:?},epsilon={})",
                cfg.model, cfg.velocity_measure, cfg.epsilon
            ),
        }
    }

    fn n_cycles(&self) -> u32 {
        match self {
            SweepModel::Quantum(c) => c.n_cycles,
            SweepModel::Classical(c) => c.n_cycles,
        }
    }

    fn seed(&self) -> u64 {
        match self {
            SweepModel::Quantum(c) => c.seed,
            SweepModel::Classical(c) => c.seed,
        }
    }

    fn simulate(&self, p: f64, stream: u64) -> Result<crate::series::TimeSeries> {
        match self {
            SweepModel::Quantum(cfg) => {
                let cfg = QuantumModelConfig { p_rate: p, ..cfg.clone() };
                simulate_trajectory_stream(&cfg, StateVector::left(), stream)
            }
            SweepModel::Classical(cfg) => {
                let cfg = ClassicalModelConfig { p_rate: p, ..cfg.clone() };
                simulate_classical_stream(&cfg, stream)
            }
        }
    }
}

/// Tuning knobs for a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub spectrum: SpectrumKind,
    pub fit_range: FitRange,
    /// Number of subgroups used to estimate per-row standard errors;
    /// 0 disables the estimate.
    pub se_groups: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { spectrum: SpectrumKind::default(), fit_range: FitRange::default(), se_groups: 4 }
    }
}

/// Fitted line parameters at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Impacts per cycle.
    pub p: f64,
    /// Pressure label, set by [`map_pressure`].
    pub pressure_bar: Option<f64>,
    pub fit: Option<LineshapeFit>,
    /// Standard error of the fitted peak frequency across subgroups.
    pub nu0_se: Option<f64>,
    pub b_se: Option<f64>,
    pub n_trajectories: u32,
    /// Set when simulation or fitting failed for this row.
    pub error: Option<String>,
}

impl SweepRow {
    pub fn nu0(&self) -> Option<f64> {
        self.fit.as_ref().map(|f| f.nu0)
    }

    pub fn b(&self) -> Option<f64> {
        self.fit.as_ref().map(|f| f.b)
    }

    pub fn converged(&self) -> bool {
        self.fit.as_ref().map(|f| f.converged).unwrap_or(false)
    }
}

/// Result of a full sweep, sorted by `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub model: String,
    pub seed: u64,
    pub ensemble_size: u32,
    pub n_cycles: u32,
    pub options: SweepOptions,
    pub rows: Vec<SweepRow>,
}

/// Run `ensemble` trajectories per grid point, average their spectra, and
/// fit the lineshape. Deterministic for a fixed master seed: every
/// trajectory draws from stream `(row_index, trajectory_index)` of the
/// master seed, spectra are averaged in trajectory order, and rows are
/// collected in grid order, so the result is identical under any thread
/// count.
pub fn run_sweep(model: &SweepModel, p_grid: &[f64], ensemble: usize, options: &SweepOptions) -> Result<SweepResult> {
    if p_grid.is_empty() {
        return Err(Error::InvalidConfig("empty p grid".into()));
    }
    if p_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig("p grid must be strictly ascending".into()));
    }
    if ensemble == 0 {
        return Err(Error::InvalidConfig("ensemble size must be at least 1".into()));
    }

    let rows: Vec<SweepRow> = p_grid
        .iter()
        .enumerate()
        .map(|(i, &p)| run_row(model, i, p, ensemble, options))
        .collect();

    Ok(SweepResult {
        model: model.descriptor(),
        seed: model.seed(),
        ensemble_size: ensemble as u32,
        n_cycles: model.n_cycles(),
        options: options.clone(),
        rows,
    })
}

fn run_row(model: &SweepModel, row_index: usize, p: f64, ensemble: usize, options: &SweepOptions) -> SweepRow {
    let failed = |msg: String| SweepRow {
        p,
        pressure_bar: None,
        fit: None,
        nu0_se: None,
        b_se: None,
        n_trajectories: 0,
        error: Some(msg),
    };

    // Trajectories in parallel; collection preserves index order.
    let spectra: std::result::Result<Vec<Spectrum>, Error> = (0..ensemble)
        .into_par_iter()
        .map(|j| {
            let series = model.simulate(p, sweep_stream(row_index, j))?;
            spectrum_of(&series, options.spectrum, true)
        })
        .collect();
    let spectra = match spectra {
        Ok(s) => s,
        Err(e) => return failed(e.to_string()),
    };

    let mean = match average_spectra(&spectra) {
        Ok(m) => m,
        Err(e) => return failed(e.to_string()),
    };
    let fit = match fit_lineshape(&mean, options.fit_range) {
        Ok(f) => f,
        Err(e) => return failed(e.to_string()),
    };

    // Subgroup fits for standard errors (contiguous blocks of the
    // trajectory order).
    let (nu0_se, b_se) = if options.se_groups >= 2 && ensemble >= options.se_groups {
        let g = options.se_groups;
        let mut nu0s = Vec::with_capacity(g);
        let mut bs = Vec::with_capacity(g);
        for k in 0..g {
            let lo = k * ensemble / g;
            let hi = (k + 1) * ensemble / g;
            if let Ok(avg) = average_spectra(&spectra[lo..hi]) {
                if let Ok(f) = fit_lineshape(&avg, options.fit_range) {
                    nu0s.push(f.nu0);
                    bs.push(f.b);
                }
            }
        }
        (standard_error(&nu0s), standard_error(&bs))
    } else {
        (None, None)
    };

    SweepRow {
        p,
        pressure_bar: None,
        fit: Some(fit),
        nu0_se,
        b_se,
        n_trajectories: ensemble as u32,
        error: None,
    }
}

fn standard_error(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    Some((var / n).sqrt())
}

/// Smallest `p` at which the fitted peak frequency stays below `threshold`
/// for two consecutive grid points, linearly interpolated between the
/// bracketing rows. `None` when no quench lies in the grid. Failed rows are
/// skipped.
pub fn detect_quench(result: &SweepResult, threshold: f64) -> Option<f64> {
    let rows: Vec<(f64, f64)> = result
        .rows
        .iter()
        .filter_map(|r| r.fit.as_ref().map(|f| (r.p, f.nu0)))
        .collect();
    for i in 0..rows.len().saturating_sub(1) {
        let (p_i, nu_i) = rows[i];
        let (_, nu_next) = rows[i + 1];
        if nu_i < threshold && nu_next < threshold {
            if i == 0 {
                return Some(p_i);
            }
            let (p_prev, nu_prev) = rows[i - 1];
            if nu_prev <= nu_i {
                return Some(p_i);
            }
            return Some(p_prev + (nu_prev - threshold) / (nu_prev - nu_i) * (p_i - p_prev));
        }
    }
    None
}

/// Default quench threshold in cycles per time unit.
pub const QUENCH_THRESHOLD: f64 = 0.05;

/// Least-squares slope of `b` versus `p` through the origin over rows with
/// `p <= p_max`. Needs at least 3 usable rows.
pub fn broadening_slope(result: &SweepResult, p_max: f64) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut count = 0;
    for row in &result.rows {
        if row.p > p_max {
            continue;
        }
        if let Some(fit) = &row.fit {
            num += row.p * fit.b;
            den += row.p * row.p;
            count += 1;
        }
    }
    if count < 3 {
        return Err(Error::InsufficientData(format!(
            "{count} rows with p <= {p_max}, need at least 3"
        )));
    }
    Ok(num / den)
}

/// Impacts-per-cycle to pressure conversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PressureScaling {
    /// Impacts per cycle corresponding to one bar.
    pub p_per_bar: f64,
}

impl PressureScaling {
    pub fn new(p_per_bar: f64) -> Result<Self> {
        if p_per_bar <= 0.0 {
            return Err(Error::InvalidConfig(format!("p_per_bar = {p_per_bar} must be positive")));
        }
        Ok(Self { p_per_bar })
    }

    /// NH3: 4.5 impacts per cycle at 1 bar.
    pub fn nh3() -> Self {
        Self { p_per_bar: 4.5 }
    }

    /// ND3: the same effects appear at fifteen times lower pressure, so
    /// 67.5 impacts per cycle at 1 bar.
    pub fn nd3() -> Self {
        Self { p_per_bar: 67.5 }
    }

    pub fn pressure(&self, p: f64) -> f64 {
        p / self.p_per_bar
    }
}

/// Label every row with its pressure. Pure relabeling: `p` is kept, so the
/// mapping round-trips exactly.
pub fn map_pressure(result: &SweepResult, scaling: PressureScaling) -> SweepResult {
    let mut out = result.clone();
    for row in &mut out.rows {
        row.pressure_bar = Some(scaling.pressure(row.p));
    }
    out
}

/// Remove pressure labels.
pub fn unmap_pressure(result: &SweepResult) -> SweepResult {
    let mut out = result.clone();
    for row in &mut out.rows {
        row.pressure_bar = None;
    }
    out
}

/// Digitized experimental dataset: pressure-indexed normalized peak
/// frequency and width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentalDataset {
    pub source: String,
    /// Rows of (pressure in bar, nu0 normalized to the zero-pressure
    /// transition frequency, b in the same normalized units).
    pub rows: Vec<(f64, f64, f64)>,
}

impl ExperimentalDataset {
    pub fn validate(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::Empty("experimental dataset"));
        }
        for &(pressure, nu0, _) in &self.rows {
            if pressure < 0.0 {
                return Err(Error::InvalidConfig(format!("negative pressure {pressure}")));
            }
            if !(0.0..=1.1).contains(&nu0) {
                return Err(Error::InvalidConfig(format!("normalized nu0 {nu0} outside [0, 1.1]")));
            }
        }
        Ok(())
    }

    /// Parse CSV with `#` comment lines and columns
    /// `pressure_bar,nu0_norm,b_norm`.
    pub fn from_csv(text: &str, path: &str) -> Result<Self> {
        let mut source = String::new();
        let mut rows = Vec::new();
        let mut header_seen = false;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if !source.is_empty() {
                    source.push(' ');
                }
                source.push_str(comment.trim());
                continue;
            }
            if !header_seen {
                let cols: Vec<&str> = line.split(',').map(str::trim).collect();
                if cols != ["pressure_bar", "nu0_norm", "b_norm"] {
                    return Err(Error::Schema {
                        path: path.into(),
                        detail: format!("expected header pressure_bar,nu0_norm,b_norm, got `{line}`"),
                    });
                }
                header_seen = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::Schema {
                    path: path.into(),
                    detail: format!("expected 3 columns, got {}: `{line}`", fields.len()),
                });
            }
            let parse = |s: &str| -> Result<f64> {
                s.parse().map_err(|_| Error::Schema {
                    path: path.into(),
                    detail: format!("bad number `{s}`"),
                })
            };
            rows.push((parse(fields[0])?, parse(fields[1])?, parse(fields[2])?));
        }
        if !header_seen {
            return Err(Error::Schema { path: path.into(), detail: "missing header row".into() });
        }
        let ds = Self { source, rows };
        ds.validate()?;
        Ok(ds)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_csv(&text, &path.display().to_string())
    }
}

/// Per-point residuals and summary statistics of a model-vs-data overlay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub scaling_p_per_bar: f64,
    /// Data pressures inside the model's pressure range.
    pub pressures: Vec<f64>,
    pub nu0_model: Vec<f64>,
    pub nu0_data: Vec<f64>,
    pub nu0_residuals: Vec<f64>,
    pub nu0_rms: f64,
    pub b_model: Vec<f64>,
    pub b_data: Vec<f64>,
    pub b_residuals: Vec<f64>,
    pub b_rms: f64,
    /// Data-to-model ratio of through-origin broadening slopes below the
    /// model quench pressure.
    pub b_slope_ratio: Option<f64>,
    /// Model quench point mapped to bar, when detected.
    pub quench_pressure_bar: Option<f64>,
    /// Sign of the data / model width trends above the quench pressure
    /// (positive = increasing), when enough points exist.
    pub data_b_trend_above_quench: Option<f64>,
    pub model_b_trend_above_quench: Option<f64>,
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> Option<f64> {
    if xs.len() < 2 || x < xs[0] || x > xs[xs.len() - 1] {
        return None;
    }
    let idx = xs.partition_point(|&v| v < x).min(xs.len() - 1).max(1);
    let (x0, x1) = (xs[idx - 1], xs[idx]);
    let (y0, y1) = (ys[idx - 1], ys[idx]);
    if x1 == x0 {
        return Some(y0);
    }
    Some(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
}

fn through_origin_slope(points: &[(f64, f64)]) -> Option<f64> {
    let num: f64 = points.iter().map(|(x, y)| x * y).sum();
    let den: f64 = points.iter().map(|(x, _)| x * x).sum();
    if den > 0.0 {
        Some(num / den)
    } else {
        None
    }
}

fn linear_trend(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|(x, _)| x).sum::<f64>() / n;
    let my = points.iter().map(|(_, y)| y).sum::<f64>() / n;
    let num: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = points.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    if den > 0.0 {
        Some(num / den)
    } else {
        None
    }
}

/// Interpolate the model curves at the dataset pressures and report
/// residuals, RMS errors, the below-quench broadening slope ratio, and the
/// above-quench width trends.
pub fn compare_experiment(
    result: &SweepResult,
    data: &ExperimentalDataset,
    scaling: PressureScaling,
) -> Result<ComparisonReport> {
    data.validate()?;
    let model: Vec<(f64, f64, f64)> = result
        .rows
        .iter()
        .filter_map(|r| r.fit.as_ref().map(|f| (scaling.pressure(r.p), f.nu0, f.b)))
        .collect();
    if model.len() < 2 {
        return Err(Error::InsufficientData("fewer than 2 usable model rows".into()));
    }
    let xs: Vec<f64> = model.iter().map(|m| m.0).collect();
    let nu0s: Vec<f64> = model.iter().map(|m| m.1).collect();
    let bs: Vec<f64> = model.iter().map(|m| m.2).collect();

    let mut pressures = Vec::new();
    let mut nu0_model = Vec::new();
    let mut nu0_data = Vec::new();
    let mut b_model = Vec::new();
    let mut b_data = Vec::new();
    for &(pressure, nu0, b) in &data.rows {
        let (Some(nm), Some(bm)) = (interpolate(&xs, &nu0s, pressure), interpolate(&xs, &bs, pressure))
        else {
            continue;
        };
        pressures.push(pressure);
        nu0_model.push(nm);
        nu0_data.push(nu0);
        b_model.push(bm);
        b_data.push(b);
    }
    if pressures.is_empty() {
        return Err(Error::NoOverlap);
    }

    let nu0_residuals: Vec<f64> = nu0_data.iter().zip(&nu0_model).map(|(d, m)| d - m).collect();
    let b_residuals: Vec<f64> = b_data.iter().zip(&b_model).map(|(d, m)| d - m).collect();
    let rms = |v: &[f64]| (v.iter().map(|r| r * r).sum::<f64>() / v.len() as f64).sqrt();

    let quench_pressure = detect_quench(result, QUENCH_THRESHOLD).map(|p| scaling.pressure(p));
    let below = |pressure: f64| quench_pressure.map(|q| pressure < q).unwrap_or(true);

    let data_below: Vec<(f64, f64)> = pressures
        .iter()
        .zip(&b_data)
        .filter(|(p, _)| below(**p))
        .map(|(p, b)| (*p, *b))
        .collect();
    let model_below: Vec<(f64, f64)> = xs
        .iter()
        .zip(&bs)
        .filter(|(p, _)| below(**p) && **p > 0.0)
        .map(|(p, b)| (*p, *b))
        .collect();
    let b_slope_ratio = match (through_origin_slope(&data_below), through_origin_slope(&model_below)) {
        (Some(d), Some(m)) if m != 0.0 => Some(d / m),
        _ => None,
    };

    let above = |pressure: f64| quench_pressure.map(|q| pressure > q).unwrap_or(false);
    let data_above: Vec<(f64, f64)> = data
        .rows
        .iter()
        .filter(|(p, _, _)| above(*p))
        .map(|(p, _, b)| (*p, *b))
        .collect();
    let model_above: Vec<(f64, f64)> =
        xs.iter().zip(&bs).filter(|(p, _)| above(**p)).map(|(p, b)| (*p, *b)).collect();

    Ok(ComparisonReport {
        scaling_p_per_bar: scaling.p_per_bar,
        nu0_rms: rms(&nu0_residuals),
        b_rms: rms(&b_residuals),
        pressures,
        nu0_model,
        nu0_data,
        nu0_residuals,
        b_model,
        b_data,
        b_residuals,
        b_slope_ratio,
        quench_pressure_bar: quench_pressure,
        data_b_trend_above_quench: linear_trend(&data_above),
        model_b_trend_above_quench: linear_trend(&model_above),
    })
}

/// FNV-1a hash of the canonical JSON of a value; stable across runs and
/// platforms, used to stamp output files.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_string(value).unwrap_or_default();
    let mut hash: u64 = 0xcbf29ce484222325;
    for byte in json.as_bytes() {
        hash ^= *byte as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    format!("{hash:016x}")
}

impl SweepResult {
    /// CSV with columns `p,pressure_bar,nu0,b,A,converged,n_traj` after a
    /// comment header carrying the config hash and seed.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "# model={} seed={} ensemble={} cycles={} config_hash={}",
            self.model,
            self.seed,
            self.ensemble_size,
            self.n_cycles,
            config_hash(&(&self.model, self.seed, self.ensemble_size, self.n_cycles, &self.options)),
        )?;
        writeln!(w, "p,pressure_bar,nu0,b,A,converged,n_traj")?;
        for row in &self.rows {
            let pressure = row.pressure_bar.map(|v| v.to_string()).unwrap_or_default();
            match &row.fit {
                Some(fit) => writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    row.p, pressure, fit.nu0, fit.b, fit.amplitude, fit.converged, row.n_trajectories
                )?,
                None => writeln!(w, "{},{},,,,false,{}", row.p, pressure, row.n_trajectories)?,
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is UTF-8")
    }

    /// Parse the CSV produced by [`SweepResult::write_csv`]. Fit metadata
    /// that is not serialized (residuals, iteration counts) is
    /// reconstructed with neutral values.
    pub fn from_csv(text: &str, path: &str) -> Result<Self> {
        let mut rows = Vec::new();
        let mut model = String::new();
        let mut seed = 0u64;
        let mut ensemble = 0u32;
        let mut cycles = 0u32;
        let mut header_seen = false;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                for token in comment.split_whitespace() {
                    if let Some(v) = token.strip_prefix("model=") {
                        model = v.to_string();
                    } else if let Some(v) = token.strip_prefix("seed=") {
                        seed = v.parse().unwrap_or(0);
                    } else if let Some(v) = token.strip_prefix("ensemble=") {
                        ensemble = v.parse().unwrap_or(0);
                    } else if let Some(v) = token.strip_prefix("cycles=") {
                        cycles = v.parse().unwrap_or(0);
                    }
                }
                continue;
            }
            if !header_seen {
                if line != "p,pressure_bar,nu0,b,A,converged,n_traj" {
                    return Err(Error::Schema {
                        path: path.into(),
                        detail: format!("unexpected header `{line}`"),
                    });
                }
                header_seen = true;
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(Error::Schema {
                    path: path.into(),
                    detail: format!("expected 7 columns, got {}", f.len()),
                });
            }
            let parse = |s: &str| -> Result<f64> {
                s.parse().map_err(|_| Error::Schema { path: path.into(), detail: format!("bad number `{s}`") })
            };
            let p = parse(f[0])?;
            let pressure_bar = if f[1].is_empty() { None } else { Some(parse(f[1])?) };
            let fit = if f[2].is_empty() {
                None
            } else {
                Some(LineshapeFit {
                    nu0: parse(f[2])?,
                    b: parse(f[3])?,
                    amplitude: parse(f[4])?,
                    residual_norm: f64::NAN,
                    converged: f[5] == "true",
                    iterations: 0,
                    pinned: parse(f[2])? == 0.0,
                })
            };
            rows.push(SweepRow {
                p,
                pressure_bar,
                fit,
                nu0_se: None,
                b_se: None,
                n_trajectories: f[6].parse().unwrap_or(0),
                error: None,
            });
        }
        if !header_seen {
            return Err(Error::Schema { path: path.into(), detail: "missing header row".into() });
        }
        Ok(SweepResult {
            model,
            seed,
            ensemble_size: ensemble,
            n_cycles: cycles,
            options: SweepOptions::default(),
            rows,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_quantum_model(seed: u64) -> SweepModel {
        SweepModel::Quantum(QuantumModelConfig { n_cycles: 128, seed, ..QuantumModelConfig::nh3() })
    }

    fn fake_result(points: &[(f64, f64, f64)]) -> SweepResult {
        SweepResult {
            model: "test".into(),
            seed: 0,
            ensemble_size: 1,
            n_cycles: 0,
            options: SweepOptions::default(),
            rows: points
                .iter()
                .map(|&(p, nu0, b)| SweepRow {
                    p,
                    pressure_bar: None,
                    fit: Some(LineshapeFit {
                        b,
                        nu0,
                        amplitude: 1.0,
                        residual_norm: 0.0,
                        converged: true,
                        iterations: 1,
                        pinned: nu0 == 0.0,
                    }),
                    nu0_se: Some(0.01),
                    b_se: Some(0.01),
                    n_trajectories: 1,
                    error: None,
                })
                .collect(),
        }
    }

    #[test]
    fn unperturbed_sweep_row_sits_at_unity() {
        let result = run_sweep(&quick_quantum_model(1), &[1e-9], 2, &SweepOptions::default()).unwrap();
        let fit = result.rows[0].fit.as_ref().unwrap();
        // Grid resolution is 1/128 cycles^-1 here.
        assert!((fit.nu0 - 1.0).abs() < 2.0 / 128.0, "nu0 = {}", fit.nu0);
        assert!(fit.b < 4.0 / 128.0, "b = {}", fit.b);
    }

    #[test]
    fn sweep_rejects_bad_grids() {
        let model = quick_quantum_model(1);
        assert!(run_sweep(&model, &[], 1, &SweepOptions::default()).is_err());
        assert!(run_sweep(&model, &[2.0, 1.0], 1, &SweepOptions::default()).is_err());
        assert!(run_sweep(&model, &[1.0], 0, &SweepOptions::default()).is_err());
    }

    #[test]
    fn row_failure_does_not_abort() {
        // p = 40 violates delta_t * p <= 0.5 at dt = 1/64 and must fail the
        // row, not the sweep.
        let result = run_sweep(&quick_quantum_model(1), &[0.5, 40.0], 1, &SweepOptions::default()).unwrap();
        assert!(result.rows[0].fit.is_some());
        assert!(result.rows[1].fit.is_none());
        assert!(result.rows[1].error.is_some());
    }

    #[test]
    fn quench_detection_interpolates() {
        let r = fake_result(&[(1.0, 0.9, 0.2), (2.0, 0.45, 0.4), (3.0, 0.02, 1.0), (4.0, 0.01, 0.9)]);
        let p = detect_quench(&r, 0.05).unwrap();
        // Crossing between p = 2 (0.45) and p = 3 (0.02).
        assert!((p - (2.0 + (0.45 - 0.05) / (0.45 - 0.02))).abs() < 1e-12, "p* = {p}");
        assert!(detect_quench(&fake_result(&[(1.0, 0.9, 0.1), (2.0, 0.8, 0.2)]), 0.05).is_none());
        // Quenched from the first row.
        let r0 = fake_result(&[(1.0, 0.0, 1.0), (2.0, 0.0, 0.9)]);
        assert_eq!(detect_quench(&r0, 0.05), Some(1.0));
    }

    #[test]
    fn slope_through_origin() {
        let r = fake_result(&[(0.5, 1.0, 0.125), (1.0, 1.0, 0.25), (2.0, 1.0, 0.5), (4.0, 1.0, 2.0)]);
        let slope = broadening_slope(&r, 2.0).unwrap();
        assert!((slope - 0.25).abs() < 1e-12);
        assert!(broadening_slope(&r, 0.6).is_err());
    }

    #[test]
    fn pressure_mapping_round_trips() {
        let r = fake_result(&[(4.5, 0.8, 0.5), (6.5, 0.1, 0.9)]);
        let mapped = map_pressure(&r, PressureScaling::nh3());
        assert_eq!(mapped.rows[0].pressure_bar, Some(1.0));
        assert!((mapped.rows[1].pressure_bar.unwrap() - 6.5 / 4.5).abs() < 1e-15);
        // ND3 scaling: p = 4.5 corresponds to 1/15 bar.
        let nd3 = map_pressure(&r, PressureScaling::nd3());
        assert!((nd3.rows[0].pressure_bar.unwrap() - 1.0 / 15.0).abs() < 1e-15);
        // Round trip preserves p bit-exactly.
        let back = unmap_pressure(&mapped);
        assert_eq!(back.rows[0].p.to_bits(), r.rows[0].p.to_bits());
        assert_eq!(back.rows[1].p.to_bits(), r.rows[1].p.to_bits());
    }

    #[test]
    fn csv_round_trip() {
        let r = fake_result(&[(0.5, 0.99, 0.1), (1.0, 0.97, 0.2)]);
        let text = r.to_csv_string();
        let parsed = SweepResult::from_csv(&text, "test.csv").unwrap();
        assert_eq!(parsed.rows.len(), 2);
        assert_eq!(parsed.rows[0].p, 0.5);
        assert_eq!(parsed.rows[0].nu0(), Some(0.99));
        assert_eq!(parsed.rows[1].b(), Some(0.2));
        assert!(SweepResult::from_csv("p,oops\n1,2\n", "bad.csv").is_err());
    }

    #[test]
    fn comparison_self_is_exact() {
        let r = fake_result(&[(0.9, 1.0, 0.1), (4.5, 0.8, 0.5), (9.0, 0.4, 0.9)]);
        let scaling = PressureScaling::nh3();
        let data = ExperimentalDataset {
            source: "self".into(),
            rows: vec![(0.2, 1.0, 0.1), (1.0, 0.8, 0.5), (2.0, 0.4, 0.9)],
        };
        let report = compare_experiment(&r, &data, scaling).unwrap();
        assert!(report.nu0_rms < 1e-12, "rms = {}", report.nu0_rms);
        assert!(report.b_rms < 1e-12);
        let ratio = report.b_slope_ratio.unwrap();
        assert!((ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn comparison_contract_errors() {
        let r = fake_result(&[(0.9, 1.0, 0.1), (4.5, 0.8, 0.5)]);
        let empty = ExperimentalDataset { source: "x".into(), rows: vec![] };
        assert!(compare_experiment(&r, &empty, PressureScaling::nh3()).is_err());
        let disjoint = ExperimentalDataset { source: "x".into(), rows: vec![(50.0, 0.5, 0.5)] };
        assert!(matches!(
            compare_experiment(&r, &disjoint, PressureScaling::nh3()),
            Err(Error::NoOverlap)
        ));
    }

    #[test]
    fn dataset_csv_parsing() {
        let text = "# source: synthetic example\npressure_bar,nu0_norm,b_norm\n0.5,0.95,0.4\n1.0,0.8,0.8\n";
        let ds = ExperimentalDataset::from_csv(text, "x.csv").unwrap();
        assert_eq!(ds.rows.len(), 2);
        assert!(ds.source.contains("synthetic"));
        assert!(ExperimentalDataset::from_csv("a,b\n1,2\n", "x.csv").is_err());
        assert!(ExperimentalDataset::from_csv("pressure_bar,nu0_norm,b_norm\n1,5.0,0.1\n", "x.csv").is_err());
    }

    #[test]
    fn config_hash_is_stable() {
        let h1 = config_hash(&("model", 7u64));
        let h2 = config_hash(&("model", 7u64));
        let h3 = config_hash(&("model", 8u64));
        assert_eq!(h1, h2);
        assert_ne!(h1, h3);
        assert_eq!(h1.len(), 16);
    }
}
