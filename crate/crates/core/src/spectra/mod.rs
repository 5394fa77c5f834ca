//! Spectrum estimation and resonance lineshape fitting.
//!
//! Spectra are one-sided, computed from mean-removed records on a uniform
//! grid, so the bin spacing is exactly `1/duration`. Two estimators are
//! provided: the periodogram (squared modulus, satisfying Parseval) and the
//! amplitude spectrum (plain modulus). Lineshape extraction fits the
//! two-term resonance profile
//!
//! ```text
//! f(nu) = 1 / (1 + (nu - nu0)^2 / b^2) + 1 / (1 + (nu + nu0)^2 / b^2)
//! ```
//!
//! with amplitude `A`, width `b` and peak frequency `nu0` as parameters.

mod fit;

pub use fit::{fit_lineshape, FitRange, LineshapeFit};

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// What the spectrum's values represent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumKind {
    /// One-sided squared modulus, normalized so legs sum to `N * variance`.
    Power,
    /// One-sided plain modulus of the transform.
    #[default]
    Amplitude,
}

/// One-sided spectrum on a uniform frequency grid from 0 to Nyquist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// Grid spacing in cycles per time unit; bin `m` sits at `m * df`.
    df: f64,
    values: Vec<f64>,
    kind: SpectrumKind,
    /// Whether the sample mean was removed before transforming.
    mean_removed: bool,
    n_trajectories: u32,
}

impl Spectrum {
    /// Assemble a spectrum from raw values (for synthetic inputs and file
    /// round-trips). Values must be nonnegative and the grid spacing
    /// positive.
    pub fn from_values(df: f64, values: Vec<f64>, kind: SpectrumKind, mean_removed: bool) -> Result<Self> {
        if df <= 0.0 {
            return Err(Error::InvalidConfig(format!("grid spacing {df} must be positive")));
        }
        if values.is_empty() {
            return Err(Error::Empty("spectrum"));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidConfig("spectrum values must be finite and nonnegative".into()));
        }
        Ok(Self { df, values, kind, mean_removed, n_trajectories: 1 })
    }

    pub fn df(&self) -> f64 {
        self.df
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> SpectrumKind {
        self.kind
    }

    pub fn mean_removed(&self) -> bool {
        self.mean_removed
    }

    pub fn n_trajectories(&self) -> u32 {
        self.n_trajectories
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Frequency of bin `m`.
    pub fn frequency(&self, m: usize) -> f64 {
        m as f64 * self.df
    }

    pub fn frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(|m| self.frequency(m))
    }

    /// Sum of all bins; for a mean-removed power spectrum this equals
    /// `N * variance` of the source record.
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Write as CSV with columns `nu,power` after `#` comment lines.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W, comments: &[String]) -> std::io::Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "# kind={:?} mean_removed={} n_trajectories={}", self.kind, self.mean_removed, self.n_trajectories)?;
        writeln!(w, "nu,power")?;
        for (m, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{}", self.frequency(m), v)?;
        }
        Ok(())
    }
}

fn transform(series: &TimeSeries, remove_mean: bool) -> Result<(Vec<Complex64>, usize)> {
    if series.len() < 2 {
        return Err(Error::Empty("time series (need at least 2 samples)"));
    }
    let n = series.len();
    let mean = if remove_mean { series.mean() } else { 0.0 };
    let mut buf: Vec<Complex64> =
        series.values().iter().map(|&y| Complex64::new(y - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    Ok((buf, n))
}

/// One-sided periodogram. Bin normalization is `|X_m|^2 / N` with interior
/// bins doubled, so the one-sided sum of a mean-removed record equals
/// `N * variance` (Parseval).
pub fn periodogram(series: &TimeSeries, remove_mean: bool) -> Result<Spectrum> {
    let (buf, n) = transform(series, remove_mean)?;
    let half = n / 2;
    let mut values = Vec::with_capacity(half + 1);
    for (m, z) in buf.iter().take(half + 1).enumerate() {
        let mut p = z.norm_sqr() / n as f64;
        let interior = m != 0 && !(n % 2 == 0 && m == half);
        if interior {
            p *= 2.0;
        }
        values.push(p);
    }
    Ok(Spectrum {
        df: 1.0 / series.duration(),
        values,
        kind: SpectrumKind::Power,
        mean_removed: remove_mean,
        n_trajectories: 1,
    })
}

/// One-sided amplitude spectrum: `|X_m|` without doubling. Used for the
/// lineshape fits; ensemble averaging keeps the Rayleigh-mean profile of
/// the underlying line.
pub fn amplitude_spectrum(series: &TimeSeries, remove_mean: bool) -> Result<Spectrum> {
    let (buf, n) = transform(series, remove_mean)?;
    let half = n / 2;
    let values = buf.iter().take(half + 1).map(|z| z.norm()).collect();
    Ok(Spectrum {
        df: 1.0 / series.duration(),
        values,
        kind: SpectrumKind::Amplitude,
        mean_removed: remove_mean,
        n_trajectories: 1,
    })
}

/// Compute the spectrum of `series` with the given estimator.
pub fn spectrum_of(series: &TimeSeries, kind: SpectrumKind, remove_mean: bool) -> Result<Spectrum> {
    match kind {
        SpectrumKind::Power => periodogram(series, remove_mean),
        SpectrumKind::Amplitude => amplitude_spectrum(series, remove_mean),
    }
}

/// Pointwise mean of spectra on identical grids; `n_trajectories` sums.
/// The inputs are consumed in slice order, so a fixed trajectory ordering
/// gives a bit-reproducible average.
pub fn average_spectra(spectra: &[Spectrum]) -> Result<Spectrum> {
    let first = spectra.first().ok_or(Error::Empty("spectrum list"))?;
    for s in &spectra[1..] {
        if s.len() != first.len() || s.df != first.df {
            return Err(Error::GridMismatch(format!(
                "{} bins at df = {} vs {} bins at df = {}",
                s.len(),
                s.df,
                first.len(),
                first.df
            )));
        }
        if s.kind != first.kind || s.mean_removed != first.mean_removed {
            return Err(Error::GridMismatch("mixed spectrum kinds".into()));
        }
    }
    let mut values = vec![0.0; first.len()];
    for s in spectra {
        for (acc, v) in values.iter_mut().zip(&s.values) {
            *acc += v;
        }
    }
    let m = spectra.len() as f64;
    for v in &mut values {
        *v /= m;
    }
    Ok(Spectrum {
        df: first.df,
        values,
        kind: first.kind,
        mean_removed: first.mean_removed,
        n_trajectories: spectra.iter().map(|s| s.n_trajectories).sum(),
    })
}

/// The two-term resonance lineshape. Symmetric in `nu`; the terms merge
/// into a single zero-centered peak as `nu0 -> 0`.
///
/// Panics if `b <= 0`.
pub fn vvw_lineshape(nu: f64, b: f64, nu0: f64) -> f64 {
    assert!(b > 0.0, "lineshape width b must be positive, got {b}");
    let inv_b2 = 1.0 / (b * b);
    let dm = nu - nu0;
    let dp = nu + nu0;
    1.0 / (1.0 + inv_b2 * dm * dm) + 1.0 / (1.0 + inv_b2 * dp * dp)
}

/// Theoretical strong-impact width `b = p / (2*pi)` for `p` impacts per
/// cycle; used as a reference overlay.
pub fn vvw_strong_impact_width(p: f64) -> f64 {
    p / std::f64::consts::TAU
}
