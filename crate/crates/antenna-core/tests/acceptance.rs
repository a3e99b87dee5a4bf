//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (run with `--nocapture` to see them all).

use antenna_core::design::{efficiency_map, AntennaTemplate};
use antenna_core::emission::{
    angular_density, dissipated_power, find_lobes, hemisphere_powers, total_radiated_power,
    AngularSpectrum, Hemisphere, ObjectiveGeometry,
};
use antenna_core::photophysics::{
    estimate_g2, fit_g2, off_time_fraction, photon_budget, simulate_photon_stream,
    steady_state, suggest_off_threshold, IrfMode, ThreeLevelRates, TimeTrace,
};
use antenna_core::stack::{HalfSpace, Layer, LayerStack};
use antenna_core::{bfp, QuadConfig};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RESOLUTION: f64 = 0.00025;

fn nominal_stack(t: f64, h: f64) -> LayerStack<f64> {
    LayerStack::new(
        HalfSpace::new(1.78),
        vec![Layer::new(t, 1.50)],
        HalfSpace::new(1.0),
        0,
        h,
        580.0,
    )
}

fn objective() -> ObjectiveGeometry<f64> {
    ObjectiveGeometry::new(1.65, 1.78)
}

fn spectra(stack: &LayerStack<f64>) -> (AngularSpectrum<f64>, AngularSpectrum<f64>) {
    (
        angular_density(stack, Hemisphere::Lower, RESOLUTION).unwrap(),
        angular_density(stack, Hemisphere::Upper, RESOLUTION).unwrap(),
    )
}

fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "acceptance {criterion}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

#[test]
fn criterion_1_cone_fraction() {
    let cone = 68f64.to_radians();
    let mut pass = true;
    let mut details = Vec::new();
    for t in [350.0, 600.0] {
        let (lower, _) = spectra(&nominal_stack(t, 200.0));
        let frac = lower.integrate_to(cone);
        details.push(format!("t={t}: {frac:.4}"));
        pass &= (0.955..=0.975).contains(&frac);
    }
    let detail = format!(
        "fraction inside the 68° cone must lie in [0.955, 0.975]; {}",
        details.join(", ")
    );
    report("criterion 1 (cone fraction)", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_2_bare_interface_loss() {
    let stack: LayerStack<f64> = LayerStack::new(
        HalfSpace::new(1.78),
        vec![Layer::new(1000.0, 1.0)],
        HalfSpace::new(1.0),
        0,
        5.0,
        580.0,
    );
    let power = total_radiated_power(&stack).unwrap();
    let pass = (power.upper_fraction - 0.14).abs() <= 0.02;
    let detail = format!(
        "upper half-space fraction {:.4} must equal 0.14 ± 0.02",
        power.upper_fraction
    );
    report("criterion 2 (bare-interface loss)", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_3_lobe_counts() {
    let window = (34.2f64 - 1.0, 57.4f64 + 1.0);
    let mut pass = true;
    let mut details = Vec::new();
    for (t, expected) in [(350.0, 1usize), (600.0, 2usize)] {
        let (lower, _) = spectra(&nominal_stack(t, 200.0));
        let lobes = find_lobes(&lower, 0.1);
        let in_window = lobes
            .iter()
            .all(|(a, _)| (window.0..=window.1).contains(&a.to_degrees()));
        pass &= lobes.len() == expected && in_window;
        details.push(format!(
            "t={t}: {} lobe(s) at [{}]",
            lobes.len(),
            lobes
                .iter()
                .map(|(a, _)| format!("{:.1}°", a.to_degrees()))
                .collect::<Vec<_>>()
                .join(", ")
        ));
        // the 2°-smoothed BFP profile preserves the count
        let profile = bfp::bfp_profile(&lower, &objective()).unwrap();
        let smoothed = bfp::apply_resolution(&profile, 2.0, 1.78).unwrap();
        let peaks = smoothed.maxima(0.1);
        pass &= peaks.len() == expected;
        details.push(format!("t={t} smoothed BFP: {} peak(s)", peaks.len()));
    }
    let detail = details.join("; ");
    report("criterion 3 (lobe counts)", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_4_fabrication_tolerance() {
    let template = AntennaTemplate::new(1.78, 1.50, 1.0, 580.0);
    let map = efficiency_map(&template, (330.0, 370.0), (180.0, 220.0), (5, 5), &objective())
        .unwrap();
    let (lo, hi) = map.min_max_valid().unwrap();
    let spread = hi - lo;
    // the spread bound carries its own 0.005 tolerance
    let pass = spread <= 0.03 + 0.005 && lo >= 0.93;
    let detail = format!("spread {spread:.4} (≤ 0.035), min η {lo:.4} (≥ 0.93)");
    report("criterion 4 (fabrication tolerance)", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_5_photon_budget() {
    let b = photon_budget(4.9e7f64, 0.518, 0.82, 1.26e8, 0.05).unwrap();
    let pass = (b.s_co - 9.4e7).abs() <= 0.1e7
        && (b.s_em - 9.8e7).abs() <= 0.1e7
        && (b.eta - 0.96).abs() <= 0.01;
    let detail = format!(
        "S_co {:.3e} (9.4±0.1e7), S_em {:.3e} (9.8±0.1e7), η {:.4} (0.96±0.01)",
        b.s_co, b.s_em, b.eta
    );
    report("criterion 5 (photon budget)", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_6_energy_conservation_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut uniform = move || (rng.next_u64() >> 11) as f64 / 9007199254740992.0;
    let mut worst_energy = 0.0f64;
    let mut worst_norm = 0.0f64;
    let k0 = 2.0 * std::f64::consts::PI / 580.0;
    let cfg = QuadConfig::with_rel_tol(1e-10);
    for _ in 0..100 {
        let n_layers = 2 + (uniform() * 4.0) as usize;
        let layers: Vec<Layer<f64>> = (0..n_layers)
            .map(|_| {
                let index = 1.0 + uniform() * 1.5;
                // cap the stack's total evanescent opacity so that every
                // quasi-mode linewidth stays wide enough for quadrature (and
                // the fixed spectrum grid) to resolve; thicknesses stay
                // inside the stated [20, 1000] nm range
                let kappa = k0 * (2.5f64 * 2.5 - index * index).max(1e-9).sqrt();
                let d_max = (20.0 + 2.0 / (kappa * n_layers as f64)).min(1000.0);
                Layer::new(20.0 + uniform() * (d_max - 20.0), index)
            })
            .collect();
        let max_layer = layers.iter().map(|l| l.index).fold(1.0, f64::max);
        // substrate at least as dense as every layer: no bound modes, so all
        // dissipated power must reach the far field
        let substrate = max_layer + uniform() * (2.5 - max_layer);
        let superstrate = 1.0 + uniform() * (max_layer - 1.0);
        let emitter_layer = (uniform() * n_layers as f64) as usize;
        let h = (0.05 + 0.9 * uniform()) * layers[emitter_layer].thickness;
        let stack = LayerStack::new(
            HalfSpace::new(substrate),
            layers,
            HalfSpace::new(superstrate),
            emitter_layer,
            h,
            580.0,
        );
        let total = dissipated_power(&stack, &cfg).unwrap();
        let (lo, up) = hemisphere_powers(&stack, &cfg).unwrap();
        let energy_err = ((lo + up) - total).abs() / total;
        worst_energy = worst_energy.max(energy_err);

        let lower = angular_density(&stack, Hemisphere::Lower, 5e-6).unwrap();
        let upper = angular_density(&stack, Hemisphere::Upper, 5e-6).unwrap();
        let norm_err = (lower.integrate() + upper.integrate() - 1.0).abs();
        worst_norm = worst_norm.max(norm_err);
    }
    let pass = worst_energy < 1e-6 && worst_norm < 1e-6;
    let detail = format!(
        "worst far-field vs k-integral error {worst_energy:.2e} (< 1e-6), worst normalization error {worst_norm:.2e} (< 1e-6) over 100 stacks"
    );
    report("criterion 6 (energy conservation)", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_7_analytic_limits() {
    let stack = LayerStack::new(
        HalfSpace::new(1.5),
        vec![Layer::new(400.0, 1.5)],
        HalfSpace::new(1.5),
        0,
        123.0,
        580.0,
    );
    let (lower, upper) = spectra(&stack);
    let mut worst = 0.0f64;
    for spec in [&lower, &upper] {
        for (&th, &d) in spec.angles.iter().zip(&spec.density) {
            worst = worst.max((d - 0.75 * th.sin().powi(3)).abs());
        }
    }
    let eta = lower.integrate_to(std::f64::consts::FRAC_PI_3);
    let eta_err = (eta - 0.15625).abs();
    let pass = worst < 1e-8 && eta_err < 1e-8;
    let detail = format!(
        "max |dP/dθ − (3/4)sin³θ| = {worst:.2e} (< 1e-8), |η(60°) − 0.15625| = {eta_err:.2e} (< 1e-8)"
    );
    report("criterion 7 (analytic limits)", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_8_photophysics_round_trip() {
    // two-level stream: rise rate recovery within 5%
    let k21 = 1.26e8f64;
    let k12 = 0.5 * k21;
    let rates = ThreeLevelRates::two_level(k12, k21);
    let stream = simulate_photon_stream(&rates, 0.5, 0.05, 20221);
    let n_detected = stream.len();
    let curve = estimate_g2(&stream, 4e-10, 6e-8).unwrap();
    let fit = fit_g2(&curve, IrfMode::Fixed(0.0)).unwrap();
    let expected = k12 + k21;
    let rate_err = (fit.rise_rate - expected).abs() / expected;

    // slow-triplet stream tuned to steady-state N3 = 0.05
    let mut k23_lo = 0.0f64;
    let mut k23_hi = 1e5f64;
    for _ in 0..200 {
        let mid = 0.5 * (k23_lo + k23_hi);
        let n3 = steady_state(&ThreeLevelRates::new(k12, k21, mid, 1e4))
            .unwrap()
            .n3;
        if n3 < 0.05 {
            k23_lo = mid;
        } else {
            k23_hi = mid;
        }
    }
    let k23 = 0.5 * (k23_lo + k23_hi);
    let triplet = ThreeLevelRates::new(k12, k21, k23, 1e4);
    let n3 = steady_state(&triplet).unwrap().n3;
    let duration = 0.1;
    let blinking = simulate_photon_stream(&triplet, 0.2, duration, 4242);
    let trace = TimeTrace::from_timestamps(&blinking, 5e-6, duration);
    let threshold = suggest_off_threshold(&trace);
    let off = off_time_fraction(&trace, threshold);
    let off_err = (off - 0.05).abs();

    let pass = n_detected >= 1_000_000 && rate_err < 0.05 && off_err <= 0.01;
    let detail = format!(
        "{n_detected} photons, fitted rise rate {:.3e} vs {expected:.3e} ({:.1}% error, < 5%); off fraction {off:.4} vs target 0.05 (N3 = {n3:.4}, threshold {threshold})",
        fit.rise_rate,
        rate_err * 100.0
    );
    report("criterion 8 (photophysics round trip)", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_9_ultrathin_film_insensitivity() {
    let objective = objective();
    let bare = AntennaTemplate::new(1.78, 1.50, 1.0, 580.0);
    let filmed = bare.clone().with_film(20.0, 1.7);
    let cfg = QuadConfig::default();
    let eta_bare = antenna_core::emission::stack_collection_efficiency(
        &bare.stack(350.0, 200.0).unwrap(),
        &objective,
        &cfg,
    )
    .unwrap();
    let eta_film = antenna_core::emission::stack_collection_efficiency(
        &filmed.stack(350.0, 200.0).unwrap(),
        &objective,
        &cfg,
    )
    .unwrap();
    let delta = (eta_film - eta_bare).abs();
    let pass = delta < 0.01;
    let detail =
        format!("η without film {eta_bare:.4}, with 20 nm n=1.7 film {eta_film:.4}, |Δ| = {delta:.4} (< 0.01)");
    report("criterion 9 (ultrathin film)", pass, &detail);
    assert!(pass, "{detail}");
}
