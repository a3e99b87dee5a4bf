//! Three-level emitter dynamics and the measurement chain: steady states,
//! the g²(τ) model with detector response, least-squares fitting, exact
//! stochastic photon-stream simulation, on/off time-trace analysis,
//! saturation and the photon-budget accounting.
//!
//! Level scheme: ground (1), excited (2), triplet (3); pumping 1→2 at k₁₂,
//! radiative decay 2→1 at k₂₁, intersystem crossing 2→3 at k₂₃ and triplet
//! relaxation 3→1 at k₃₁.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::special::erfcx;
use crate::{convert, Error, Real, Result};

/// Rate constants of the three-level scheme, all in s⁻¹.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeLevelRates<T> {
    /// Intensity-dependent excitation rate.
    pub k12: T,
    /// Radiative decay rate.
    pub k21: T,
    /// Intersystem crossing rate.
    pub k23: T,
    /// Triplet decay rate.
    pub k31: T,
}

impl<T: Real> ThreeLevelRates<T> {
    pub fn new(k12: T, k21: T, k23: T, k31: T) -> Self {
        ThreeLevelRates { k12, k21, k23, k31 }
    }

    pub fn two_level(k12: T, k21: T) -> Self {
        ThreeLevelRates {
            k12,
            k21,
            k23: T::zero(),
            k31: T::zero(),
        }
    }

    /// Whether the two-level on-time approximation applies: both triplet
    /// rates at least two orders of magnitude below k₁₂ + k₂₁.
    pub fn slow_triplet_regime(&self) -> bool {
        let fast = self.k12 + self.k21;
        let lim = convert::<T>(1e-2) * fast;
        self.k23 < lim && self.k31 < lim
    }
}

/// Occupation probabilities of the three levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Populations<T> {
    pub n1: T,
    pub n2: T,
    pub n3: T,
}

/// Normalized coincidence histogram.
#[derive(Debug, Clone)]
pub struct G2Curve<T> {
    /// Centered bin midpoints in seconds; symmetric about zero.
    pub delays: Vec<T>,
    /// Normalized coincidence rate per bin.
    pub values: Vec<T>,
    /// Raw coincidences per bin.
    pub counts: Vec<u64>,
}

/// Result of fitting the g² model.
#[derive(Debug, Clone, Copy)]
pub struct G2Fit<T> {
    /// τ⁻¹ = k₁₂ + k₂₁.
    pub rise_rate: T,
    /// Dip depth: the fitted value at zero delay is 1 − contrast (before
    /// detector-response rounding).
    pub contrast: T,
    /// Per-detector Gaussian response width, seconds.
    pub irf_sigma: T,
    /// Root-mean-square of the fit residuals.
    pub residual_norm: T,
    /// Set when the input curve has no dip below 0.9.
    pub low_contrast: bool,
}

/// Detector response handling for [`fit_g2`].
#[derive(Debug, Clone, Copy)]
pub enum IrfMode<T> {
    Fixed(T),
    Free,
}

/// Binned detection record.
#[derive(Debug, Clone)]
pub struct TimeTrace<T> {
    pub bin_width: T,
    pub counts: Vec<u32>,
}

/// The full photon accounting from detected counts back to emitted photons.
#[derive(Debug, Clone, Copy)]
pub struct PhotonBudget<T> {
    /// Detected counts per second.
    pub s_de: T,
    /// Detection-chain efficiency.
    pub eta_det: T,
    /// Collected photons per second, S_de/η_det.
    pub s_co: T,
    /// On-time excited population.
    pub n2_on: T,
    pub k21: T,
    pub off_fraction: T,
    /// Emitted photons per second, N₂ᵒⁿ·k₂₁·(1 − off).
    pub s_em: T,
    /// Collection efficiency S_co/S_em.
    pub eta: T,
}

impl<T: Real> TimeTrace<T> {
    pub fn new(bin_width: T, counts: Vec<u32>) -> Self {
        TimeTrace { bin_width, counts }
    }

    /// Bin a timestamp stream over [0, duration).
    pub fn from_timestamps(timestamps: &[T], bin_width: T, duration: T) -> Self {
        assert!(bin_width > T::zero() && duration > T::zero());
        let bins = (duration / bin_width).ceil().to_usize().unwrap_or(0).max(1);
        let mut counts = vec![0u32; bins];
        for &t in timestamps {
            let idx = (t / bin_width).floor().to_usize().unwrap_or(0);
            if idx < bins {
                counts[idx] += 1;
            }
        }
        TimeTrace { bin_width, counts }
    }
}

/// Closed-form steady state of the three-level rate equations.
pub fn steady_state<T: Real>(rates: &ThreeLevelRates<T>) -> Result<Populations<T>> {
    assert!(rates.k21 > T::zero(), "radiative rate must be positive");
    if rates.k23 > T::zero() && !(rates.k31 > T::zero()) {
        return Err(Error::AbsorbingTriplet);
    }
    if !(rates.k12 > T::zero()) {
        return Ok(Populations {
            n1: T::one(),
            n2: T::zero(),
            n3: T::zero(),
        });
    }
    // k12·N1 = (k21 + k23)·N2, k23·N2 = k31·N3, N1 + N2 + N3 = 1
    let r1 = (rates.k21 + rates.k23) / rates.k12;
    let r3 = if rates.k23 > T::zero() {
        rates.k23 / rates.k31
    } else {
        T::zero()
    };
    let n2 = T::one() / (T::one() + r1 + r3);
    let (n1, n3) = (r1 * n2, r3 * n2);
    let sum = n1 + n2 + n3;
    Ok(Populations {
        n1: n1 / sum,
        n2: n2 / sum,
        n3: n3 / sum,
    })
}

/// Steady-state excited population of the on-time two-level system,
/// k₁₂/(k₁₂ + k₂₁).
///
/// This is the solution of dN₂/dt = 0 that vanishes at zero pumping and
/// saturates at one; with k₁₂ = 4.556·k₂₁ it reproduces the reported
/// high-power value of 0.82. (The index-swapped form k₂₁/(k₁₂ + k₂₁) would
/// instead tend to one for an unpumped emitter and contradict that value.)
pub fn on_time_excited_population<T: Real>(k12: T, k21: T) -> T {
    assert!(k21 > T::zero() && k12 >= T::zero());
    k12 / (k12 + k21)
}

/// g²(τ) of a pumped two-level emitter through the detection chain:
/// 1 − contrast·e^{−rise_rate·|τ|} convolved with a Gaussian of standard
/// deviation √2·irf_sigma (two detectors), in closed form.
pub fn g2_model<T: Real>(delay: T, rise_rate: T, contrast: T, irf_sigma: T) -> T {
    debug_assert!(rise_rate > T::zero() && irf_sigma >= T::zero());
    let t = delay.abs();
    if irf_sigma == T::zero() {
        return T::one() - contrast * (-rise_rate * t).exp();
    }
    let sigma = convert::<T>(2.0).sqrt() * irf_sigma;
    let half = convert::<T>(0.5);
    let sqrt2 = convert::<T>(2.0).sqrt();
    let gauss = (-t * t / (convert::<T>(2.0) * sigma * sigma)).exp();
    let term = |u: T| -> T {
        if u >= T::zero() {
            gauss * erfcx(u / sqrt2)
        } else {
            // e^{u²/2 − t²/(2σ²)} = e^{σ²λ²/2 − λt}
            convert::<T>(2.0) * (half * sigma * sigma * rise_rate * rise_rate - rise_rate * t).exp()
                - gauss * erfcx(-u / sqrt2)
        }
    };
    let u_minus = sigma * rise_rate - t / sigma;
    let u_plus = sigma * rise_rate + t / sigma;
    T::one() - contrast * half * (term(u_minus) + term(u_plus))
}

/// Least-squares fit of [`g2_model`] to an estimated curve.
///
/// The starting rise rate comes from the 1/e recovery point of the dip;
/// iteration stops when the relative parameter change drops below 1e-9
/// (or after 500 iterations, which is reported as a failure).
pub fn fit_g2<T: Real>(curve: &G2Curve<T>, irf: IrfMode<T>) -> Result<G2Fit<T>> {
    let n = curve.delays.len();
    if n < 10 {
        return Err(Error::InsufficientData { needed: 10, got: n });
    }
    let min_value = curve.values.iter().fold(T::infinity(), |a, &b| a.min(b));
    let low_contrast = min_value > convert(0.9);
    let c0 = (T::one() - min_value).max(convert(0.05)).min(T::one());

    // 1/e recovery of the dip: value crosses 1 − c0/e
    let target = T::one() - c0 * convert::<T>(std::f64::consts::E).recip();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        curve.delays[i]
            .abs()
            .partial_cmp(&curve.delays[j].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let max_delay = curve.delays[*order.last().unwrap()].abs();
    let mut tau = max_delay / convert(3.0);
    for &i in &order {
        if curve.values[i] >= target && curve.delays[i].abs() > T::zero() {
            tau = curve.delays[i].abs();
            break;
        }
    }
    let lambda0 = tau.recip();

    let bin = if n >= 2 {
        (curve.delays[1] - curve.delays[0]).abs()
    } else {
        tau
    };
    let (mut params, sigma_fixed) = match irf {
        IrfMode::Fixed(s) => (vec![lambda0.ln(), c0], Some(s)),
        IrfMode::Free => (
            vec![lambda0.ln(), c0, (bin * convert::<T>(0.5)).max(convert(1e-15)).ln()],
            None,
        ),
    };

    let residuals = |p: &[T]| -> Vec<T> {
        let lambda = p[0].exp();
        let c = p[1];
        let sigma = sigma_fixed.unwrap_or_else(|| p[2].exp());
        curve
            .delays
            .iter()
            .zip(&curve.values)
            .map(|(&d, &v)| g2_model(d, lambda, c, sigma) - v)
            .collect()
    };

    let (fitted, rms, converged) = levenberg_marquardt(&residuals, &mut params)?;
    if !converged {
        return Err(Error::FitFailure(format!(
            "no convergence after 500 iterations; last iterate rise_rate={}, contrast={}",
            fitted[0].exp(),
            fitted[1]
        )));
    }
    Ok(G2Fit {
        rise_rate: fitted[0].exp(),
        contrast: fitted[1].max(T::zero()).min(T::one()),
        irf_sigma: sigma_fixed.unwrap_or_else(|| fitted[2].exp()),
        residual_norm: rms,
        low_contrast,
    })
}

/// Dense Levenberg–Marquardt with a forward-difference Jacobian; at most
/// three parameters, so the normal equations are solved directly.
fn levenberg_marquardt<T: Real, F>(residuals: &F, params: &mut Vec<T>) -> Result<(Vec<T>, T, bool)>
where
    F: Fn(&[T]) -> Vec<T>,
{
    let m = params.len();
    let mut r = residuals(params);
    let mut cost: T = r.iter().map(|&v| v * v).sum();
    let mut mu = convert::<T>(1e-3);
    let mut converged = false;

    for _ in 0..500 {
        // Jacobian
        let n = r.len();
        let mut jac = vec![vec![T::zero(); m]; n];
        for j in 0..m {
            let h = convert::<T>(1e-7) * params[j].abs().max(T::one());
            let mut shifted = params.clone();
            shifted[j] += h;
            let rs = residuals(&shifted);
            for k in 0..n {
                jac[k][j] = (rs[k] - r[k]) / h;
            }
        }
        let mut jtj = [[T::zero(); 3]; 3];
        let mut jtr = [T::zero(); 3];
        for k in 0..n {
            for a in 0..m {
                jtr[a] += jac[k][a] * r[k];
                for b in 0..m {
                    jtj[a][b] += jac[k][a] * jac[k][b];
                }
            }
        }

        let mut improved = false;
        for _ in 0..30 {
            // (JᵀJ + μ·diag(JᵀJ))·δ = −Jᵀr
            let mut a = [[T::zero(); 4]; 3];
            for i in 0..m {
                for j in 0..m {
                    a[i][j] = jtj[i][j];
                }
                a[i][i] += mu * jtj[i][i].max(convert(1e-30));
                a[i][m] = -jtr[i];
            }
            if let Some(delta) = solve_small(&mut a, m) {
                let trial: Vec<T> = params.iter().zip(&delta).map(|(&p, &d)| p + d).collect();
                let rt = residuals(&trial);
                let ct: T = rt.iter().map(|&v| v * v).sum();
                if ct.is_finite() && ct < cost {
                    let rel_change = delta
                        .iter()
                        .zip(params.iter())
                        .map(|(&d, &p)| d.abs() / p.abs().max(T::one()))
                        .fold(T::zero(), |acc, v| acc.max(v));
                    *params = trial;
                    r = rt;
                    cost = ct;
                    mu = (mu / convert(3.0)).max(convert(1e-14));
                    improved = true;
                    if rel_change < convert(1e-9) {
                        converged = true;
                    }
                    break;
                }
            }
            mu *= convert(4.0);
            if mu > convert(1e14) {
                break;
            }
        }
        if converged {
            break;
        }
        if !improved {
            // gradient step exhausted: stationary point
            converged = true;
            break;
        }
    }
    let rms = (cost / convert(r.len() as f64)).sqrt();
    Ok((params.clone(), rms, converged))
}

/// Gaussian elimination with partial pivoting on an augmented system of at
/// most three unknowns.
fn solve_small<T: Real>(a: &mut [[T; 4]; 3], m: usize) -> Option<Vec<T>> {
    for col in 0..m {
        let mut pivot = col;
        for row in col + 1..m {
            if a[row][col].abs() > a[pivot][col].abs() {
                pivot = row;
            }
        }
        if a[pivot][col].abs() < convert(1e-300) {
            return None;
        }
        a.swap(col, pivot);
        for row in col + 1..m {
            let f = a[row][col] / a[col][col];
            for k in col..=m {
                let sub = f * a[col][k];
                a[row][k] -= sub;
            }
        }
    }
    let mut x = vec![T::zero(); m];
    for col in (0..m).rev() {
        let mut acc = a[col][m];
        for k in col + 1..m {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
    }
    Some(x)
}

/// Exact stochastic simulation of the three-level scheme; emitted photons
/// (2→1 transitions) are kept with probability `detection_prob`.
///
/// A single 64-bit seed drives a ChaCha8 counter-based generator, so equal
/// seeds give identical streams on every platform. Timestamps are strictly
/// increasing and bounded by `duration`.
pub fn simulate_photon_stream<T: Real>(
    rates: &ThreeLevelRates<T>,
    detection_prob: T,
    duration: T,
    seed: u64,
) -> Vec<T> {
    simulate_with_occupancy(rates, detection_prob, duration, seed).0
}

pub(crate) fn simulate_with_occupancy<T: Real>(
    rates: &ThreeLevelRates<T>,
    detection_prob: T,
    duration: T,
    seed: u64,
) -> (Vec<T>, [f64; 3]) {
    assert!(
        detection_prob > T::zero() && detection_prob <= T::one(),
        "detection probability must lie in (0, 1]"
    );
    assert!(duration > T::zero(), "duration must be positive");
    let k12 = rates.k12.to_f64().unwrap();
    let k21 = rates.k21.to_f64().unwrap();
    let k23 = rates.k23.to_f64().unwrap();
    let k31 = rates.k31.to_f64().unwrap();
    let p_det = detection_prob.to_f64().unwrap();
    let t_end = duration.to_f64().unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // strictly interior uniform so waiting times are finite and positive
    let mut uniform = move || ((rng.next_u64() >> 11) as f64 + 0.5) / 9007199254740992.0;

    let mut t = 0.0f64;
    let mut state = 1u8;
    let mut occupancy = [0.0f64; 3];
    let mut stream = Vec::new();
    loop {
        let rate = match state {
            1 => k12,
            2 => k21 + k23,
            _ => k31,
        };
        if rate <= 0.0 {
            occupancy[(state - 1) as usize] += t_end - t;
            break;
        }
        let dt = -uniform().ln() / rate;
        if t + dt > t_end {
            occupancy[(state - 1) as usize] += t_end - t;
            break;
        }
        occupancy[(state - 1) as usize] += dt;
        t += dt;
        state = match state {
            1 => 2,
            2 => {
                if k23 == 0.0 || uniform() < k21 / (k21 + k23) {
                    if uniform() < p_det {
                        stream.push(T::from_f64(t).unwrap());
                    }
                    1
                } else {
                    3
                }
            }
            _ => 1,
        };
    }
    (stream, occupancy)
}

/// Full pair-correlation histogram over |Δt| ≤ max_delay, normalized by the
/// uncorrelated expectation rate²·duration·bin_width; symmetric in delay.
pub fn estimate_g2<T: Real>(stream: &[T], bin_width: T, max_delay: T) -> Result<G2Curve<T>> {
    if stream.len() < 1000 {
        return Err(Error::InsufficientData {
            needed: 1000,
            got: stream.len(),
        });
    }
    assert!(bin_width > T::zero(), "bin width must be positive");
    assert!(
        max_delay >= convert::<T>(10.0) * bin_width,
        "correlation window must span at least 10 bins"
    );
    let nbins = (max_delay / bin_width).ceil().to_usize().unwrap();
    let window = bin_width * convert(nbins as f64);
    let mut counts = vec![0u64; nbins];
    for (i, &ti) in stream.iter().enumerate() {
        for &tj in &stream[i + 1..] {
            let dt = tj - ti;
            if dt >= window {
                break;
            }
            let k = (dt / bin_width).floor().to_usize().unwrap();
            counts[k.min(nbins - 1)] += 1;
        }
    }
    let duration = *stream.last().unwrap() - stream[0];
    let rate = convert::<T>(stream.len() as f64) / duration;
    let expected = rate * rate * duration * bin_width;

    let mut delays = Vec::with_capacity(2 * nbins);
    let mut values = Vec::with_capacity(2 * nbins);
    let mut out_counts = Vec::with_capacity(2 * nbins);
    for k in (0..nbins).rev() {
        delays.push(-bin_width * (convert::<T>(k as f64) + convert(0.5)));
        values.push(convert::<T>(counts[k] as f64) / expected);
        out_counts.push(counts[k]);
    }
    for k in 0..nbins {
        delays.push(bin_width * (convert::<T>(k as f64) + convert(0.5)));
        values.push(convert::<T>(counts[k] as f64) / expected);
        out_counts.push(counts[k]);
    }
    Ok(G2Curve {
        delays,
        values,
        counts: out_counts,
    })
}

/// Fraction of trace bins at or below the threshold.
pub fn off_time_fraction<T: Real>(trace: &TimeTrace<T>, threshold: u32) -> T {
    assert!(!trace.counts.is_empty(), "trace must not be empty");
    let off = trace.counts.iter().filter(|&&c| c <= threshold).count();
    convert::<T>(off as f64) / convert(trace.counts.len() as f64)
}

/// Default off/on threshold: the valley of the smoothed bimodal histogram
/// of bin counts. Returns 0 when the histogram shows no separate on-mode.
pub fn suggest_off_threshold<T: Real>(trace: &TimeTrace<T>) -> u32 {
    let max = match trace.counts.iter().max() {
        Some(&m) if m > 0 => m as usize,
        _ => return 0,
    };
    let mut hist = vec![0f64; max + 1];
    for &c in &trace.counts {
        hist[c as usize] += 1.0;
    }
    // moving-average smoothing, window scaled to the count range
    let half = (max / 32).max(1);
    let smooth: Vec<f64> = (0..=max)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(max);
            hist[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    let on_peak = smooth
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0);
    if on_peak == 0 {
        return 0;
    }
    let off_peak = smooth[..=on_peak / 2]
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0);
    let valley = smooth[off_peak..=on_peak]
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i + off_peak)
        .unwrap_or(off_peak);
    valley as u32
}

/// Photon-budget chain: S_co = S_de/η_det, S_em = N₂ᵒⁿ·k₂₁·(1 − off),
/// η = S_co/S_em.
pub fn photon_budget<T: Real>(
    s_de: T,
    eta_det: T,
    n2_on: T,
    k21: T,
    off_fraction: T,
) -> Result<PhotonBudget<T>> {
    assert!(s_de >= T::zero() && k21 >= T::zero());
    assert!(eta_det > T::zero() && eta_det <= T::one());
    assert!(n2_on >= T::zero() && n2_on <= T::one());
    assert!(off_fraction >= T::zero() && off_fraction < T::one());
    let s_co = s_de / eta_det;
    let s_em = n2_on * k21 * (T::one() - off_fraction);
    if !(s_em > T::zero()) {
        return Err(Error::UndefinedEfficiency);
    }
    Ok(PhotonBudget {
        s_de,
        eta_det,
        s_co,
        n2_on,
        k21,
        off_fraction,
        s_em,
        eta: s_co / s_em,
    })
}

/// Detected rate versus excitation power:
/// S_de(P) = chain_eff·k₂₁·N₂(k₁₂ = coeff·P)·(1 − off(P)).
pub fn saturation_detected_rate<T: Real, F>(
    power: T,
    excitation_coeff: T,
    k21: T,
    chain_eff: T,
    off_fraction_at_power: F,
) -> T
where
    F: Fn(T) -> T,
{
    assert!(power >= T::zero() && excitation_coeff > T::zero());
    let k12 = excitation_coeff * power;
    let n2 = on_time_excited_population(k12, k21);
    chain_eff * k21 * n2 * (T::one() - off_fraction_at_power(power))
}
