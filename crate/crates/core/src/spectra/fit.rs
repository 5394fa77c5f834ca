//! Damped Gauss-Newton (Levenberg-Marquardt) extraction of the lineshape
//! parameters from a spectrum.
//!
//! The free fit minimizes `sum_i [S(nu_i) - A f(nu_i; b, nu0)]^2` over the
//! selected frequency range with analytic derivatives. Bounds (`b > 0`,
//! `nu0 >= 0`) are enforced by clamping after each step. A second fit with
//! `nu0` pinned at zero resolves the quench degeneracy: near and past the
//! quench the two-term shape becomes flat in `nu0`, so the row is reported
//! as quenched when the pinned fit is within 0.1% of the free residual or
//! when the fitted width has grown past the fitted peak frequency.

use serde::{Deserialize, Serialize};

use super::{vvw_lineshape, Spectrum};
use crate::error::{Error, Result};

/// Relative tolerance on step size and gradient for convergence.
const TOL: f64 = 1e-10;
const MAX_ITER: usize = 200;
/// Pinned fit within this relative residual of the free fit counts as
/// quenched.
const QUENCH_RESIDUAL_MARGIN: f64 = 1e-3;
const B_MIN: f64 = 1e-9;

/// Frequency range `[min, max]` selected for fitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitRange {
    pub min: f64,
    pub max: f64,
}

impl Default for FitRange {
    /// The default window covers the line and its near wings; the fast
    /// perturbed-splitting frequency never enters the records, so nothing
    /// of interest lies above a few cycles per time unit.
    fn default() -> Self {
        Self { min: 0.0, max: 4.0 }
    }
}

/// Result of a lineshape fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineshapeFit {
    /// Half-width of the fitted profile.
    pub b: f64,
    /// Fitted peak frequency; exactly 0 when the quench rule fired.
    pub nu0: f64,
    pub amplitude: f64,
    /// Euclidean norm of the residual vector.
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    /// True when the reported parameters come from the nu0 = 0 pinned fit.
    pub pinned: bool,
}

impl LineshapeFit {
    /// Evaluate the fitted model at `nu`.
    pub fn evaluate(&self, nu: f64) -> f64 {
        self.amplitude * vvw_lineshape(nu, self.b, self.nu0)
    }
}

struct LmOutcome {
    a: f64,
    b: f64,
    nu0: f64,
    ssr: f64,
    converged: bool,
    iterations: usize,
}

/// Fit the two-term lineshape to a spectrum over `range`.
///
/// The DC bin is excluded whenever the spectrum was mean-removed. Needs at
/// least 10 bins in range and a nonzero spectrum.
pub fn fit_lineshape(spectrum: &Spectrum, range: FitRange) -> Result<LineshapeFit> {
    let mut nu = Vec::new();
    let mut s = Vec::new();
    for (m, &v) in spectrum.values().iter().enumerate() {
        let f = spectrum.frequency(m);
        if f < range.min || f > range.max {
            continue;
        }
        if f == 0.0 && spectrum.mean_removed() {
            continue;
        }
        nu.push(f);
        s.push(v);
    }
    if nu.len() < 10 {
        return Err(Error::DegenerateFit(format!("{} bins in range, need at least 10", nu.len())));
    }
    let peak = s.iter().cloned().fold(0.0f64, f64::max);
    if peak <= 0.0 {
        return Err(Error::DegenerateFit("all-zero spectrum".into()));
    }

    // Initialization: peak bin for nu0 and amplitude, half-power half-width
    // for b.
    let i0 = s.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0;
    let nu0_init = nu[i0];
    let a_init = s[i0];
    let half = a_init / 2.0;
    let mut j = i0;
    while j + 1 < s.len() && s[j] > half {
        j += 1;
    }
    let b_init = (nu[j] - nu[i0]).max(spectrum.df());

    let free = lm_fit(&nu, &s, [a_init, b_init, nu0_init], false);
    let pinned = lm_fit(&nu, &s, [a_init, free.b.max(b_init), 0.0], true);

    // Quench tie-break: prefer the pinned fit when it is effectively as
    // good as the free one, or when the free fit's width has overtaken its
    // peak frequency (the mirrored terms then overlap within their width
    // and the spectrum no longer resolves a nonzero peak).
    let quenched = pinned.ssr <= free.ssr * (1.0 + QUENCH_RESIDUAL_MARGIN) || free.b >= free.nu0;
    let chosen = if quenched { &pinned } else { &free };

    Ok(LineshapeFit {
        b: chosen.b,
        nu0: chosen.nu0,
        amplitude: chosen.a,
        residual_norm: chosen.ssr.sqrt(),
        converged: chosen.converged,
        iterations: chosen.iterations,
        pinned: quenched,
    })
}

#[allow(clippy::too_many_arguments)]
fn model_and_jacobian(
    nu: &[f64],
    a: f64,
    b: f64,
    nu0: f64,
    pin_nu0: bool,
    residual: &mut [f64],
    jac: &mut [[f64; 3]],
    s: &[f64],
) -> f64 {
    let b2 = b * b;
    let mut ssr = 0.0;
    for (i, (&x, &y)) in nu.iter().zip(s).enumerate() {
        let um = x - nu0;
        let up = x + nu0;
        let dm = b2 + um * um;
        let dp = b2 + up * up;
        let gm = b2 / dm;
        let gp = b2 / dp;
        let f = gm + gp;
        let r = y - a * f;
        residual[i] = r;
        ssr += r * r;
        // d model / d A
        jac[i][0] = f;
        // d g / d b = 2 b u^2 / (b^2 + u^2)^2
        jac[i][1] = a * (2.0 * b * um * um / (dm * dm) + 2.0 * b * up * up / (dp * dp));
        // d g / d nu0 via u derivatives: g'(u) = -2 b^2 u / (b^2 + u^2)^2
        jac[i][2] = if pin_nu0 {
            0.0
        } else {
            a * (2.0 * b2 * um / (dm * dm) - 2.0 * b2 * up / (dp * dp))
        };
    }
    ssr
}

#[allow(clippy::needless_range_loop)]
fn lm_fit(nu: &[f64], s: &[f64], init: [f64; 3], pin_nu0: bool) -> LmOutcome {
    let n = nu.len();
    let mut a = init[0];
    let mut b = init[1].max(B_MIN);
    let mut nu0 = if pin_nu0 { 0.0 } else { init[2].max(0.0) };

    let mut residual = vec![0.0; n];
    let mut jac = vec![[0.0; 3]; n];
    let mut ssr = model_and_jacobian(nu, a, b, nu0, pin_nu0, &mut residual, &mut jac, s);

    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..MAX_ITER {
        iterations = iter + 1;

        // Normal equations J^T J delta = J^T r with Marquardt damping.
        let mut jtj = [[0.0f64; 3]; 3];
        let mut jtr = [0.0f64; 3];
        for (row, &r) in jac.iter().zip(&residual) {
            for k in 0..3 {
                jtr[k] += row[k] * r;
                for l in k..3 {
                    jtj[k][l] += row[k] * row[l];
                }
            }
        }
        for k in 0..3 {
            for l in 0..k {
                jtj[k][l] = jtj[l][k];
            }
        }

        // Gradient convergence (relative to the residual scale).
        let gnorm = jtr.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm <= TOL * (1.0 + ssr) {
            converged = true;
            break;
        }

        let mut improved = false;
        for _ in 0..16 {
            let mut m = jtj;
            for (k, row) in m.iter_mut().enumerate() {
                row[k] += lambda * jtj[k][k].max(1e-30);
            }
            let Some(delta) = solve3(&m, &jtr) else {
                lambda *= 10.0;
                continue;
            };
            let a_new = a + delta[0];
            let b_new = (b + delta[1]).max(B_MIN);
            let nu0_new = if pin_nu0 { 0.0 } else { (nu0 + delta[2]).max(0.0) };

            let mut res_new = vec![0.0; n];
            let mut jac_new = vec![[0.0; 3]; n];
            let ssr_new =
                model_and_jacobian(nu, a_new, b_new, nu0_new, pin_nu0, &mut res_new, &mut jac_new, s);

            if ssr_new < ssr {
                let step = [(a_new - a), (b_new - b), (nu0_new - nu0)];
                let scale = [a.abs().max(1e-30), b.abs().max(1e-30), nu0.abs().max(1e-30)];
                let rel_step = step
                    .iter()
                    .zip(&scale)
                    .map(|(d, sc)| (d / sc).abs())
                    .fold(0.0f64, f64::max);

                a = a_new;
                b = b_new;
                nu0 = nu0_new;
                ssr = ssr_new;
                residual = res_new;
                jac = jac_new;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;

                if rel_step <= TOL {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e14 {
                break;
            }
        }

        if converged {
            break;
        }
        if !improved {
            // Stuck: damping exhausted without improvement.
            converged = ssr.is_finite();
            break;
        }
    }

    LmOutcome { a, b, nu0, ssr, converged, iterations }
}

/// Solve a 3x3 linear system by Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
fn solve3(m: &[[f64; 3]; 3], rhs: &[f64; 3]) -> Option<[f64; 3]> {
    let mut a = *m;
    let mut b = *rhs;
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for col in (0..3).rev() {
        let mut acc = b[col];
        for k in col + 1..3 {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::TimeSeries;
    use crate::spectra::{amplitude_spectrum, periodogram, SpectrumKind};

    fn synthetic(b: f64, nu0: f64, amp: f64, df: f64, numax: f64) -> Spectrum {
        let n = (numax / df).round() as usize;
        let values: Vec<f64> = (0..=n).map(|m| amp * vvw_lineshape(m as f64 * df, b, nu0)).collect();
        Spectrum {
            df,
            values,
            kind: SpectrumKind::Amplitude,
            mean_removed: false,
            n_trajectories: 1,
        }
    }

    #[test]
    fn round_trip_on_noiseless_curve() {
        let spec = synthetic(0.2, 1.0, 5.0, 1.0 / 1024.0, 4.0);
        let fit = fit_lineshape(&spec, FitRange::default()).unwrap();
        assert!(fit.converged);
        assert!(!fit.pinned);
        assert!((fit.b - 0.2).abs() / 0.2 < 1e-6, "b = {}", fit.b);
        assert!((fit.nu0 - 1.0).abs() < 1e-6, "nu0 = {}", fit.nu0);
        assert!((fit.amplitude - 5.0).abs() / 5.0 < 1e-6, "A = {}", fit.amplitude);
    }

    #[test]
    fn round_trip_over_parameter_grid() {
        // Recovery over the (b, nu0) plane, including nu0 = 0 where the
        // pinned branch must engage.
        for &b in &[0.05, 0.1, 0.3, 0.6, 1.0] {
            for &nu0 in &[0.0, 0.25, 0.5, 1.0, 1.5] {
                if b >= nu0 && nu0 > 0.0 {
                    // Width above frequency is reported as quenched by
                    // design; skip in the recovery scan.
                    continue;
                }
                let spec = synthetic(b, nu0, 3.0, 1.0 / 512.0, 4.0);
                let fit = fit_lineshape(&spec, FitRange::default()).unwrap();
                assert!(fit.converged, "no convergence at b={b} nu0={nu0}");
                assert!((fit.b - b).abs() / b < 1e-6, "b: {} vs {b} (nu0={nu0})", fit.b);
                if nu0 == 0.0 {
                    assert!(fit.nu0.abs() < 1e-6, "nu0: {} vs 0", fit.nu0);
                } else {
                    assert!((fit.nu0 - nu0).abs() / nu0 < 1e-6, "nu0: {} vs {nu0}", fit.nu0);
                }
            }
        }
    }

    #[test]
    fn scale_invariance() {
        let spec = synthetic(0.3, 0.9, 1.0, 1.0 / 512.0, 4.0);
        let mut scaled = spec.clone();
        for v in &mut scaled.values {
            *v *= 137.0;
        }
        let f1 = fit_lineshape(&spec, FitRange::default()).unwrap();
        let f2 = fit_lineshape(&scaled, FitRange::default()).unwrap();
        assert!((f1.b - f2.b).abs() < 1e-9);
        assert!((f1.nu0 - f2.nu0).abs() < 1e-9);
        assert!((f2.amplitude / f1.amplitude - 137.0).abs() < 1e-9);
    }

    #[test]
    fn quench_rule_pins_wide_lines() {
        // b > nu0: the free fit may sit anywhere, the report must be
        // quenched.
        let spec = synthetic(1.0, 0.5, 2.0, 1.0 / 512.0, 4.0);
        let fit = fit_lineshape(&spec, FitRange::default()).unwrap();
        assert!(fit.pinned);
        assert_eq!(fit.nu0, 0.0);
    }

    #[test]
    fn degenerate_inputs_rejected() {
        let spec = Spectrum {
            df: 1.0 / 512.0,
            values: vec![0.0; 2049],
            kind: SpectrumKind::Power,
            mean_removed: true,
            n_trajectories: 1,
        };
        assert!(matches!(fit_lineshape(&spec, FitRange::default()), Err(Error::DegenerateFit(_))));
        assert!(fit_lineshape(&spec, FitRange { min: 0.0, max: 0.001 }).is_err());
    }

    #[test]
    fn fits_simulated_tone_spectra() {
        // A finite tone on the grid fits to nu0 = 1 with resolution-limited
        // width for both estimators.
        let dt = 1.0 / 64.0;
        let n = 2048 * 64;
        let series =
            TimeSeries::new((0..n).map(|k| 0.5 * (std::f64::consts::TAU * k as f64 * dt).cos()).collect(), dt);
        for spec in [periodogram(&series, true).unwrap(), amplitude_spectrum(&series, true).unwrap()] {
            let fit = fit_lineshape(&spec, FitRange::default()).unwrap();
            assert!((fit.nu0 - 1.0).abs() < 2.0 * spec.df(), "nu0 = {}", fit.nu0);
            assert!(fit.b < 4.0 * spec.df(), "b = {}", fit.b);
        }
    }
}
