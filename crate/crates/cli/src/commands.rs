//! Implementations of the four subcommands.

use std::path::{Path, PathBuf};

use anyhow::Context;
use rayon::prelude::*;

use inversion_core::classical::{ClassicalModel, ClassicalModelConfig, VelocityMeasure};
use inversion_core::qdyn::{
    coherence_statistics, parse_impact_script, simulate_states, simulate_scripted,
    simulate_trajectory, ImpactSide, QuantumModelConfig, StateVector, Window,
};
use inversion_core::spectra::{FitRange, SpectrumKind};
use inversion_core::sweep::{
    broadening_slope, compare_experiment, config_hash, detect_quench, map_pressure, run_sweep,
    ExperimentalDataset, PressureScaling, SweepModel, SweepOptions, SweepResult, QUENCH_THRESHOLD,
};

use crate::manifest::RunManifest;
use crate::plot::{self, Panel, Series};
use crate::{CoherenceArgs, CompareArgs, FileDefaults, SweepArgs, TrajectoryArgs};

fn resolve(outdir: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        outdir.join(path)
    }
}

/// Accept `0.015625` or `1/64`.
fn parse_dt(text: &str) -> anyhow::Result<f64> {
    if let Some((num, den)) = text.split_once('/') {
        let num: f64 = num.trim().parse().context("bad sampling interval numerator")?;
        let den: f64 = den.trim().parse().context("bad sampling interval denominator")?;
        anyhow::ensure!(den != 0.0, "zero denominator in sampling interval");
        Ok(num / den)
    } else {
        text.trim().parse().context("bad sampling interval")
    }
}

/// Accept `start:stop:step` or a single value.
fn parse_grid(text: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [single] => Ok(vec![single.trim().parse().context("bad grid value")?]),
        [start, stop, step] => {
            let start: f64 = start.trim().parse().context("bad grid start")?;
            let stop: f64 = stop.trim().parse().context("bad grid stop")?;
            let step: f64 = step.trim().parse().context("bad grid step")?;
            anyhow::ensure!(step > 0.0 && stop >= start, "grid must ascend");
            let n = ((stop - start) / step).round() as usize;
            Ok((0..=n).map(|i| start + i as f64 * step).collect())
        }
        _ => anyhow::bail!("grid must be `value` or `start:stop:step`, got `{text}`"),
    }
}

fn parse_scaling(text: &str) -> anyhow::Result<PressureScaling> {
    match text {
        "nh3" => Ok(PressureScaling::nh3()),
        "nd3" => Ok(PressureScaling::nd3()),
        other => {
            let value: f64 = other.parse().with_context(|| format!("bad pressure scaling `{other}`"))?;
            Ok(PressureScaling::new(value)?)
        }
    }
}

fn quantum_preset(name: &str) -> anyhow::Result<QuantumModelConfig> {
    match name {
        "nh3" => Ok(QuantumModelConfig::nh3()),
        "nd3" => Ok(QuantumModelConfig::nd3()),
        other => anyhow::bail!("unknown preset `{other}` (expected nh3 or nd3)"),
    }
}

pub fn trajectory(args: TrajectoryArgs, defaults: &FileDefaults, outdir: &Path) -> anyhow::Result<()> {
    let mut cfg = quantum_preset(&args.preset)?;
    if let Some(w) = args.omega_p {
        cfg.omega_p = w;
    }
    cfg.p_rate = args.p;
    cfg.n_cycles = args.cycles.or(defaults.cycles).unwrap_or(8);
    if let Some(dt) = &args.dt {
        cfg.delta_t_sample = parse_dt(dt)?;
    } else if let Some(dt) = defaults.dt {
        cfg.delta_t_sample = dt;
    }
    cfg.seed = args.seed.or(defaults.seed).unwrap_or(0);
    cfg.impact_side = match args.side.as_str() {
        "left" => ImpactSide::LeftOnly,
        "random" => ImpactSide::RandomSide,
        other => anyhow::bail!("unknown impact side `{other}` (expected left or random)"),
    };

    let series = match &args.impacts {
        Some(script) => {
            let events = parse_impact_script(script, &cfg)?;
            simulate_scripted(&cfg, StateVector::left(), events)?.occupancy_series()
        }
        None => simulate_trajectory(&cfg, StateVector::left())?,
    };

    let out = resolve(outdir, &args.out);
    let comments = vec![
        format!("inversion trajectory seed={} config_hash={}", cfg.seed, config_hash(&cfg)),
        format!(
            "preset={} omega_p={} p={} cycles={} dt={}",
            args.preset, cfg.omega_p, cfg.p_rate, cfg.n_cycles, cfg.delta_t_sample
        ),
    ];
    let mut file = std::fs::File::create(&out).with_context(|| format!("cannot write {}", out.display()))?;
    series.write_csv(&mut file, &comments)?;

    let mut manifest = RunManifest::new("trajectory", serde_json::to_value(&cfg)?, cfg.seed);
    manifest.record(&out);

    if let Some(svg_path) = &args.svg {
        let svg_path = resolve(outdir, svg_path);
        let points: Vec<(f64, f64)> =
            series.values().iter().enumerate().map(|(k, &y)| (series.time(k), y)).collect();
        let panel = Panel {
            title: format!("Left-well occupancy, p = {} impacts per cycle", cfg.p_rate),
            x_label: "t (cycles)".into(),
            y_label: "|alpha|^2".into(),
            series: vec![Series::line("occupancy", plot::decimate(points, 4096))],
        };
        std::fs::write(&svg_path, plot::render(&[panel]))?;
        manifest.record(&svg_path);
    }
    manifest.write()?;
    println!("wrote {} ({} samples)", out.display(), series.len());
    Ok(())
}

fn build_sweep_model(args: &SweepArgs, defaults: &FileDefaults) -> anyhow::Result<SweepModel> {
    let seed = args.seed.or(defaults.seed).unwrap_or(7);
    let cycles = args.cycles.or(defaults.cycles).unwrap_or(2048);
    let dt = match &args.dt {
        Some(text) => parse_dt(text)?,
        None => defaults.dt.unwrap_or(1.0 / 64.0),
    };

    let model = match args.model.as_str() {
        "nh3" | "nd3" => {
            let mut cfg = quantum_preset(&args.model)?;
            if let Some(w) = args.omega_p {
                cfg.omega_p = w;
            }
            cfg.seed = seed;
            cfg.n_cycles = cycles;
            cfg.delta_t_sample = dt;
            SweepModel::Quantum(cfg)
        }
        "custom" => {
            let omega_p = args.omega_p.context("--model custom requires --omega-p")?;
            let cfg = QuantumModelConfig {
                omega_p,
                seed,
                n_cycles: cycles,
                delta_t_sample: dt,
                ..QuantumModelConfig::nh3()
            };
            SweepModel::Quantum(cfg)
        }
        "classical-full" | "classical-continuous" => {
            let kind = if args.model == "classical-full" {
                ClassicalModel::FullRandomization
            } else {
                ClassicalModel::ContinuityConstrained
            };
            let mut cfg = ClassicalModelConfig::new(kind);
            cfg.seed = seed;
            cfg.n_cycles = cycles;
            cfg.delta_t_sample = dt;
            if let Some(eps) = args.epsilon {
                cfg.epsilon = eps;
            }
            cfg.velocity_measure = match args.velocity_measure.as_str() {
                "amplitude-uniform" => VelocityMeasure::AmplitudeUniform,
                "speed-uniform" => VelocityMeasure::SpeedUniform,
                other => anyhow::bail!("unknown velocity measure `{other}`"),
            };
            SweepModel::Classical(cfg)
        }
        other => anyhow::bail!(
            "unknown model `{other}` (expected nh3, nd3, classical-full, classical-continuous, custom)"
        ),
    };
    Ok(model)
}

pub fn sweep(args: SweepArgs, defaults: &FileDefaults, outdir: &Path) -> anyhow::Result<()> {
    let model = build_sweep_model(&args, defaults)?;
    let grid = parse_grid(&args.p)?;
    let ensemble = args.ensemble.or(defaults.ensemble).unwrap_or(32);
    let options = SweepOptions {
        spectrum: match args.spectrum.as_str() {
            "amplitude" => SpectrumKind::Amplitude,
            "power" => SpectrumKind::Power,
            other => anyhow::bail!("unknown spectrum estimator `{other}`"),
        },
        fit_range: FitRange { min: 0.0, max: args.fit_max },
        ..SweepOptions::default()
    };

    let mut result = run_sweep(&model, &grid, ensemble, &options)?;
    if let Some(scaling) = &args.pressure_scale {
        result = map_pressure(&result, parse_scaling(scaling)?);
    }

    let out = resolve(outdir, &args.out);
    std::fs::write(&out, result.to_csv_string()).with_context(|| format!("cannot write {}", out.display()))?;

    let snapshot = serde_json::json!({
        "model": &model,
        "p_grid": &grid,
        "ensemble": ensemble,
        "options": &result.options,
        "pressure_scale": &args.pressure_scale,
    });
    let mut manifest = RunManifest::new("sweep", snapshot, result.seed);
    manifest.record(&out);

    if let Some(svg_path) = &args.svg {
        let svg_path = resolve(outdir, svg_path);
        std::fs::write(&svg_path, sweep_svg(&result))?;
        manifest.record(&svg_path);
    }
    manifest.write()?;

    for row in &result.rows {
        if let Some(err) = &row.error {
            eprintln!("row p = {} failed: {err}", row.p);
        }
    }
    println!("wrote {} ({} rows, model {})", out.display(), result.rows.len(), result.model);
    if let Some(p_star) = detect_quench(&result, QUENCH_THRESHOLD) {
        println!("quench at p* = {p_star:.3} impacts per cycle");
    }
    if let Ok(slope) = broadening_slope(&result, 2.0) {
        println!("low-rate broadening slope b/p = {slope:.4}");
    }
    Ok(())
}

fn sweep_svg(result: &SweepResult) -> String {
    let nu0: Vec<(f64, f64)> =
        result.rows.iter().filter_map(|r| r.nu0().map(|v| (r.p, v))).collect();
    let b: Vec<(f64, f64)> = result.rows.iter().filter_map(|r| r.b().map(|v| (r.p, v))).collect();
    // Strong-impact reference width b = p / (2 pi).
    let reference: Vec<(f64, f64)> = result
        .rows
        .iter()
        .map(|r| (r.p, inversion_core::spectra::vvw_strong_impact_width(r.p)))
        .collect();
    let mk = |name: &str, pts: Vec<(f64, f64)>| Series {
        name: name.into(),
        points: pts,
        markers: true,
        line: true,
    };
    plot::render(&[
        Panel {
            title: format!("Fitted peak frequency, {}", result.model),
            x_label: "p (impacts per cycle)".into(),
            y_label: "nu0".into(),
            series: vec![mk("nu0", nu0)],
        },
        Panel {
            title: "Fitted width".into(),
            x_label: "p (impacts per cycle)".into(),
            y_label: "b".into(),
            series: vec![mk("fitted b", b), Series::line("strong-impact p/2pi", reference)],
        },
    ])
}

pub fn compare(args: CompareArgs, outdir: &Path) -> anyhow::Result<()> {
    let sweep_text = std::fs::read_to_string(&args.sweep)
        .with_context(|| format!("cannot read sweep CSV {}", args.sweep.display()))?;
    let result = SweepResult::from_csv(&sweep_text, &args.sweep.display().to_string())?;
    let dataset = ExperimentalDataset::load(&args.data)
        .with_context(|| format!("cannot load dataset {}", args.data.display()))?;
    let scaling = parse_scaling(&args.scaling)?;

    let report = compare_experiment(&result, &dataset, scaling)?;
    let out = resolve(outdir, &args.out);
    std::fs::write(&out, serde_json::to_string_pretty(&report)?)
        .with_context(|| format!("cannot write {}", out.display()))?;

    let snapshot = serde_json::json!({
        "sweep_csv": &args.sweep,
        "dataset_csv": &args.data,
        "dataset_source": &dataset.source,
        "scaling_p_per_bar": report.scaling_p_per_bar,
    });
    let mut manifest = RunManifest::new("compare", snapshot, result.seed);
    manifest.record(&out);

    if let Some(svg_path) = &args.svg {
        let svg_path = resolve(outdir, svg_path);
        let mapped = map_pressure(&result, scaling);
        let model_nu0: Vec<(f64, f64)> = mapped
            .rows
            .iter()
            .filter_map(|r| r.nu0().map(|v| (r.pressure_bar.unwrap_or(r.p), v)))
            .collect();
        let model_b: Vec<(f64, f64)> = mapped
            .rows
            .iter()
            .filter_map(|r| r.b().map(|v| (r.pressure_bar.unwrap_or(r.p), v)))
            .collect();
        let data_nu0: Vec<(f64, f64)> = dataset.rows.iter().map(|&(p, n, _)| (p, n)).collect();
        let data_b: Vec<(f64, f64)> = dataset.rows.iter().map(|&(p, _, b)| (p, b)).collect();
        let svg = plot::render(&[
            Panel {
                title: "Peak frequency vs pressure".into(),
                x_label: "pressure (bar)".into(),
                y_label: "nu0 (normalized)".into(),
                series: vec![Series::line("model", model_nu0), Series::scatter("experiment", data_nu0)],
            },
            Panel {
                title: "Width vs pressure".into(),
                x_label: "pressure (bar)".into(),
                y_label: "b (normalized)".into(),
                series: vec![Series::line("model", model_b), Series::scatter("experiment", data_b)],
            },
        ]);
        std::fs::write(&svg_path, svg)?;
        manifest.record(&svg_path);
    }
    manifest.write()?;

    println!("wrote {}", out.display());
    println!("nu0 rms = {:.4}, b rms = {:.4}", report.nu0_rms, report.b_rms);
    if let Some(ratio) = report.b_slope_ratio {
        println!("experimental/model broadening slope ratio = {ratio:.3}");
    }
    Ok(())
}

pub fn coherence(args: CoherenceArgs, defaults: &FileDefaults, outdir: &Path) -> anyhow::Result<()> {
    let mut cfg = quantum_preset(&args.preset)?;
    cfg.p_rate = args.p;
    cfg.n_cycles = args.cycles.or(defaults.cycles).unwrap_or(512);
    cfg.seed = args.seed.or(defaults.seed).unwrap_or(7);
    if let Some(dt) = defaults.dt {
        cfg.delta_t_sample = dt;
    }
    let ensemble = args.ensemble.or(defaults.ensemble).unwrap_or(32);
    let window_start = args.window_start.unwrap_or(cfg.n_cycles as f64 / 2.0);

    let trajectories: Vec<_> = (0..ensemble as u64)
        .into_par_iter()
        .map(|j| simulate_states(&cfg, StateVector::left(), j))
        .collect::<Result<_, _>>()?;
    let window = Window::from_cycles(window_start, cfg.n_cycles as f64, cfg.delta_t_sample);
    let stats = coherence_statistics(&trajectories, window)?;

    let out = resolve(outdir, &args.out);
    let payload = serde_json::json!({
        "config": &cfg,
        "ensemble": ensemble,
        "window_start_cycles": window_start,
        "mean_coherence": stats.mean_coherence,
        "min_coherence": stats.min_coherence,
        "ensemble_coherence": stats.ensemble_coherence,
        "per_trajectory_coherence": stats.per_trajectory_coherence,
        "occupancy_histogram": stats.occupancy_histogram,
    });
    std::fs::write(&out, serde_json::to_string_pretty(&payload)?)
        .with_context(|| format!("cannot write {}", out.display()))?;

    let mut manifest = RunManifest::new("coherence", serde_json::to_value(&cfg)?, cfg.seed);
    manifest.record(&out);
    if let Some(svg_path) = &args.svg {
        let svg_path = resolve(outdir, svg_path);
        let svg = plot::histogram(
            &format!("Occupancy distribution, p = {} (late window)", cfg.p_rate),
            "|alpha|^2",
            &stats.occupancy_histogram.counts,
        );
        std::fs::write(&svg_path, svg)?;
        manifest.record(&svg_path);
    }
    manifest.write()?;

    println!("wrote {}", out.display());
    println!(
        "per-trajectory |rho_LR|: mean = {:.4}, min = {:.4}; ensemble-averaged = {:.4}",
        stats.mean_coherence, stats.min_coherence, stats.ensemble_coherence
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dt_parsing() {
        assert_eq!(parse_dt("1/64").unwrap(), 1.0 / 64.0);
        assert_eq!(parse_dt("0.25").unwrap(), 0.25);
        assert!(parse_dt("1/0").is_err());
        assert!(parse_dt("x").is_err());
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("3.5").unwrap(), vec![3.5]);
        let g = parse_grid("0.5:2:0.5").unwrap();
        assert_eq!(g, vec![0.5, 1.0, 1.5, 2.0]);
        assert!(parse_grid("2:1:0.5").is_err());
        assert!(parse_grid("1:2").is_err());
    }

    #[test]
    fn scaling_parsing() {
        assert_eq!(parse_scaling("nh3").unwrap().p_per_bar, 4.5);
        assert_eq!(parse_scaling("nd3").unwrap().p_per_bar, 67.5);
        assert_eq!(parse_scaling("12.5").unwrap().p_per_bar, 12.5);
        assert!(parse_scaling("-1").is_err());
        assert!(parse_scaling("bogus").is_err());
    }
}
