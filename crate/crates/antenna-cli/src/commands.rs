//! One function per CLI command, each returning the artifacts to write.

use antenna_core::bfp::{apply_resolution, bfp_profile, render_image};
use antenna_core::design::{efficiency_map, optimize, MapCell};
use antenna_core::emission::{
    angular_density, collection_efficiency, AngularSpectrum, Hemisphere,
};
use antenna_core::photophysics::{
    estimate_g2, fit_g2, photon_budget, simulate_photon_stream, G2Curve, IrfMode, ThreeLevelRates,
    TimeTrace,
};

use crate::config::{stack_from_config, CliError, CliResult, RunConfig};
use crate::output::{csv, fmt_float, key_value_text, pgm_16bit, Artifact};

fn resolution_from(cfg: &RunConfig) -> CliResult<f64> {
    let mrad = cfg.f64_or("resolution_mrad", 0.25)?;
    let rad = mrad * 1e-3;
    if !(rad > 0.0 && rad <= 0.05) {
        return Err(CliError::Validation(format!(
            "key 'resolution_mrad': {mrad} must lie in (0, 50]"
        )));
    }
    Ok(rad)
}

fn spectrum_rows(spec: &AngularSpectrum<f64>, label: &str, rows: &mut Vec<String>) {
    for (&theta, &density) in spec.angles.iter().zip(&spec.density) {
        rows.push(format!(
            "{},{},{label}",
            fmt_float(theta.to_degrees()),
            fmt_float(density)
        ));
    }
}

pub fn run_pattern(cfg: &RunConfig) -> CliResult<Vec<Artifact>> {
    let (stack, objective, _, _) = stack_from_config(cfg)?;
    let resolution = resolution_from(cfg)?;
    let lower = angular_density(&stack, Hemisphere::Lower, resolution)?;
    let upper = angular_density(&stack, Hemisphere::Upper, resolution)?;
    let eta = collection_efficiency(&lower, &upper, &objective)?;
    let mut rows = Vec::with_capacity(lower.angles.len() + upper.angles.len());
    spectrum_rows(&lower, "lower", &mut rows);
    spectrum_rows(&upper, "upper", &mut rows);
    println!(
        "pattern: eta(NA={}) = {:.6}, lower fraction {:.6}",
        objective.numerical_aperture,
        eta,
        lower.integrate()
    );
    Ok(vec![Artifact {
        name: "pattern.csv".into(),
        bytes: csv("theta_deg,dp_dtheta_per_rad,halfspace", rows),
    }])
}

pub fn run_map(cfg: &RunConfig) -> CliResult<Vec<Artifact>> {
    let (_, objective, template, _) = stack_from_config(cfg)?;
    let t_range = (cfg.f64_or("t_min", 100.0)?, cfg.f64_or("t_max", 800.0)?);
    let h_range = (cfg.f64_or("h_min", 50.0)?, cfg.f64_or("h_max", 750.0)?);
    let steps = (cfg.usize_or("t_steps", 36)?, cfg.usize_or("h_steps", 36)?);
    if steps.0 < 2 || steps.1 < 2 {
        return Err(CliError::Validation("map needs at least 2 steps per axis".into()));
    }
    let map = efficiency_map(&template, t_range, h_range, steps, &objective)?;
    let mut rows = Vec::with_capacity(map.t_grid.len() * map.h_grid.len());
    for (ti, &t) in map.t_grid.iter().enumerate() {
        for (hi, &h) in map.h_grid.iter().enumerate() {
            let (eta, valid) = match map.cell(ti, hi) {
                MapCell::Valid(v) => (fmt_float(*v), 1),
                MapCell::Infeasible => ("nan".into(), 0),
                MapCell::Failed(_) => ("nan".into(), 0),
            };
            rows.push(format!("{},{},{eta},{valid}", fmt_float(t), fmt_float(h)));
        }
    }
    if let Some((lo, hi)) = map.min_max_valid() {
        println!("map: eta range [{lo:.6}, {hi:.6}] over {} cells", map.cells.len());
    }
    Ok(vec![Artifact {
        name: "efficiency_map.csv".into(),
        bytes: csv("t_nm,h_nm,eta,valid", rows),
    }])
}

pub fn run_optimize(cfg: &RunConfig) -> CliResult<Vec<Artifact>> {
    let (_, objective, template, _) = stack_from_config(cfg)?;
    let t_bounds = (cfg.f64_or("t_min", 200.0)?, cfg.f64_or("t_max", 700.0)?);
    let h_bounds = (cfg.f64_or("h_min", 50.0)?, cfg.f64_or("h_max", 650.0)?);
    let tolerance = cfg.f64_or("tolerance", 0.5)?;
    if tolerance <= 0.0 {
        return Err(CliError::Validation("tolerance must be positive".into()));
    }
    let optimum = optimize(&template, t_bounds, h_bounds, &objective, tolerance)?;
    println!(
        "optimize: eta {:.6} at t = {:.2} nm, h = {:.2} nm ({} evaluations)",
        optimum.eta_star, optimum.t_star, optimum.h_star, optimum.evaluations
    );
    Ok(vec![Artifact {
        name: "optimum.txt".into(),
        bytes: key_value_text(&[
            ("t_star_nm", fmt_float(optimum.t_star)),
            ("h_star_nm", fmt_float(optimum.h_star)),
            ("eta_star", fmt_float(optimum.eta_star)),
            ("evaluations", optimum.evaluations.to_string()),
        ]),
    }])
}

fn parse_pattern_csv(path: &str, medium_index: f64) -> CliResult<AngularSpectrum<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {path}: {e}")))?;
    let mut angles = Vec::new();
    let mut density = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(CliError::Parse(format!(
                "{path}:{}: expected 3 columns",
                lineno + 1
            )));
        }
        if fields[2] != "lower" {
            continue;
        }
        let theta: f64 = fields[0]
            .parse()
            .map_err(|_| CliError::Parse(format!("{path}:{}: bad angle", lineno + 1)))?;
        let dens: f64 = fields[1]
            .parse()
            .map_err(|_| CliError::Parse(format!("{path}:{}: bad density", lineno + 1)))?;
        angles.push(theta.to_radians());
        density.push(dens);
    }
    if angles.len() < 2 {
        return Err(CliError::Validation(format!(
            "{path}: no lower-half-space rows found"
        )));
    }
    Ok(AngularSpectrum {
        hemisphere: Hemisphere::Lower,
        angles,
        density,
        medium_index,
    })
}

pub fn run_bfp(cfg: &RunConfig) -> CliResult<Vec<Artifact>> {
    let (stack, objective, _, _) = stack_from_config(cfg)?;
    let lower = match cfg.get("pattern_csv") {
        Some(path) => parse_pattern_csv(path, stack.substrate.index)?,
        None => {
            let resolution = resolution_from(cfg)?;
            angular_density(&stack, Hemisphere::Lower, resolution)?
        }
    };
    let profile = bfp_profile(&lower, &objective)?;
    let fwhm = cfg.f64_or("fwhm_deg", 2.0)?;
    if fwhm < 0.0 {
        return Err(CliError::Validation("fwhm_deg must be >= 0".into()));
    }
    let profile = if fwhm > 0.0 {
        apply_resolution(&profile, fwhm, stack.substrate.index)?
    } else {
        profile
    };
    let pixels_across = cfg.usize_or("image_pixels", 512)?;
    if pixels_across < 16 || pixels_across % 2 != 0 {
        return Err(CliError::Validation(
            "image_pixels must be even and at least 16".into(),
        ));
    }
    let image = render_image(&profile, pixels_across);
    let rows: Vec<String> = profile
        .na_coordinate
        .iter()
        .zip(&profile.intensity)
        .map(|(&rho, &inten)| format!("{},{}", fmt_float(rho), fmt_float(inten)))
        .collect();
    println!(
        "bfp: profile of {} samples (smoothed: {}), image {}x{}",
        rows.len(),
        profile.smoothed,
        pixels_across,
        pixels_across
    );
    Ok(vec![
        Artifact {
            name: "bfp_profile.csv".into(),
            bytes: csv("rho_na,intensity", rows),
        },
        Artifact {
            name: "bfp_image.pgm".into(),
            bytes: pgm_16bit(&image.pixels, pixels_across),
        },
    ])
}

pub fn run_photo_sim(cfg: &RunConfig) -> CliResult<Vec<Artifact>> {
    let k21 = cfg.f64_or("k21", 1.26e8)?;
    let k12 = cfg.f64_or("k12", 0.63e8)?;
    let k23 = cfg.f64_or("k23", 0.0)?;
    let k31 = cfg.f64_or("k31", 0.0)?;
    let detection_prob = cfg.f64_or("detection_prob", 0.5)?;
    let duration = cfg.f64_or("duration", 0.01)?;
    let seed = cfg.u64_or("seed", 42)?;
    if !(k21 > 0.0) || k12 < 0.0 || k23 < 0.0 || k31 < 0.0 {
        return Err(CliError::Validation("rates must be non-negative, k21 > 0".into()));
    }
    if k23 > 0.0 && !(k31 > 0.0) {
        return Err(CliError::Validation(
            "k23 > 0 requires k31 > 0 (absorbing triplet)".into(),
        ));
    }
    if !(detection_prob > 0.0 && detection_prob <= 1.0) {
        return Err(CliError::Validation("detection_prob must lie in (0, 1]".into()));
    }
    if !(duration > 0.0) {
        return Err(CliError::Validation("duration must be positive".into()));
    }
    let rates = ThreeLevelRates::new(k12, k21, k23, k31);
    let stream = simulate_photon_stream(&rates, detection_prob, duration, seed);
    println!(
        "photo-sim: {} detected photons over {duration} s (seed {seed})",
        stream.len()
    );
    let rows: Vec<String> = stream.iter().map(|&t| fmt_float(t)).collect();
    let mut artifacts = vec![Artifact {
        name: "photons.csv".into(),
        bytes: csv("timestamp_s", rows),
    }];
    if let Some(raw) = cfg.get("trace_bin_width") {
        let bin: f64 = raw
            .parse()
            .map_err(|_| CliError::Parse(format!("key 'trace_bin_width': '{raw}' is not a number")))?;
        if !(bin > 0.0) {
            return Err(CliError::Validation("trace_bin_width must be positive".into()));
        }
        let trace = TimeTrace::from_timestamps(&stream, bin, duration);
        let rows: Vec<String> = trace
            .counts
            .iter()
            .enumerate()
            .map(|(i, &c)| format!("{},{c}", fmt_float(i as f64 * bin)))
            .collect();
        artifacts.push(Artifact {
            name: "trace.csv".into(),
            bytes: csv("time_s,counts", rows),
        });
    }
    Ok(artifacts)
}

fn parse_curve_csv(path: &str) -> CliResult<G2Curve<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {path}: {e}")))?;
    let mut delays = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 2 {
            return Err(CliError::Parse(format!(
                "{path}:{}: expected delay_s,g2 columns",
                lineno + 1
            )));
        }
        delays.push(fields[0].parse().map_err(|_| {
            CliError::Parse(format!("{path}:{}: bad delay", lineno + 1))
        })?);
        values.push(fields[1].parse().map_err(|_| {
            CliError::Parse(format!("{path}:{}: bad value", lineno + 1))
        })?);
    }
    let counts = vec![0u64; delays.len()];
    Ok(G2Curve {
        delays,
        values,
        counts,
    })
}

fn parse_timestamps_csv(path: &str) -> CliResult<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {path}: {e}")))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        out.push(line.trim().parse().map_err(|_| {
            CliError::Parse(format!("{path}:{}: bad timestamp", lineno + 1))
        })?);
    }
    Ok(out)
}

pub fn run_photo_fit(cfg: &RunConfig) -> CliResult<Vec<Artifact>> {
    let estimated = cfg.get("stream").is_some();
    let curve = match (cfg.get("curve"), cfg.get("stream")) {
        (Some(_), Some(_)) => {
            return Err(CliError::Validation(
                "give either 'curve' or 'stream', not both".into(),
            ))
        }
        (Some(path), None) => parse_curve_csv(path)?,
        (None, Some(path)) => {
            let stream = parse_timestamps_csv(path)?;
            let bin_width = cfg.f64_required("bin_width")?;
            let max_delay = cfg.f64_required("max_delay")?;
            if !(bin_width > 0.0) || max_delay < 10.0 * bin_width {
                return Err(CliError::Validation(
                    "need bin_width > 0 and max_delay >= 10*bin_width".into(),
                ));
            }
            estimate_g2(&stream, bin_width, max_delay)?
        }
        (None, None) => {
            return Err(CliError::Validation(
                "photo-fit needs a 'curve' or 'stream' input file".into(),
            ))
        }
    };
    let irf = match cfg.get("irf_sigma") {
        None => IrfMode::Free,
        Some("free") => IrfMode::Free,
        Some(raw) => {
            let sigma: f64 = raw.parse().map_err(|_| {
                CliError::Parse(format!("key 'irf_sigma': '{raw}' is neither a number nor 'free'"))
            })?;
            if sigma < 0.0 {
                return Err(CliError::Validation("irf_sigma must be >= 0".into()));
            }
            IrfMode::Fixed(sigma)
        }
    };
    let fit = fit_g2(&curve, irf)?;
    println!(
        "photo-fit: rise rate {:.6e} 1/s, contrast {:.4}, irf sigma {:.3e} s, residual {:.3e}{}",
        fit.rise_rate,
        fit.contrast,
        fit.irf_sigma,
        fit.residual_norm,
        if fit.low_contrast { " (low contrast)" } else { "" }
    );
    let mut artifacts = vec![Artifact {
        name: "g2fit.txt".into(),
        bytes: key_value_text(&[
            ("rise_rate_per_s", fmt_float(fit.rise_rate)),
            ("contrast", fmt_float(fit.contrast)),
            ("irf_sigma_s", fmt_float(fit.irf_sigma)),
            ("residual_norm", fmt_float(fit.residual_norm)),
            ("low_contrast", (fit.low_contrast as u8).to_string()),
        ]),
    }];
    if estimated {
        let rows: Vec<String> = curve
            .delays
            .iter()
            .zip(&curve.values)
            .map(|(&d, &v)| format!("{},{}", fmt_float(d), fmt_float(v)))
            .collect();
        artifacts.push(Artifact {
            name: "g2curve.csv".into(),
            bytes: csv("delay_s,g2", rows),
        });
    }
    Ok(artifacts)
}

pub fn run_budget(cfg: &RunConfig) -> CliResult<Vec<Artifact>> {
    let s_de = cfg.f64_required("s_de")?;
    let eta_det = cfg.f64_required("eta_det")?;
    let n2_on = cfg.f64_required("n2_on")?;
    let k21 = cfg.f64_required("k21")?;
    let off_fraction = cfg.f64_required("off_fraction")?;
    if !(eta_det > 0.0 && eta_det <= 1.0) {
        return Err(CliError::Validation("eta_det must lie in (0, 1]".into()));
    }
    if !(0.0..=1.0).contains(&n2_on) {
        return Err(CliError::Validation("n2_on must lie in [0, 1]".into()));
    }
    if !(0.0..1.0).contains(&off_fraction) {
        return Err(CliError::Validation("off_fraction must lie in [0, 1)".into()));
    }
    if s_de < 0.0 || k21 < 0.0 {
        return Err(CliError::Validation("rates must be non-negative".into()));
    }
    let b = photon_budget(s_de, eta_det, n2_on, k21, off_fraction)?;
    println!("s_de = {}", fmt_float(b.s_de));
    println!("eta_det = {}", fmt_float(b.eta_det));
    println!("s_co = {}", fmt_float(b.s_co));
    println!("n2_on = {}", fmt_float(b.n2_on));
    println!("k21 = {}", fmt_float(b.k21));
    println!("off_fraction = {}", fmt_float(b.off_fraction));
    println!("s_em = {}", fmt_float(b.s_em));
    println!("eta = {}", fmt_float(b.eta));
    Ok(Vec::new())
}
