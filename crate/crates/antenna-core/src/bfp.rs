//! Back-focal-plane synthesis: the collected angular spectrum mapped through
//! an ideal aplanatic objective (sine condition, unit focal length) to a
//! radial intensity profile, optional Gaussian smoothing for the instrument
//! resolution, and rasterization to a square image.

use rayon::prelude::*;

use crate::emission::{prominent_maxima, AngularSpectrum, Hemisphere, ObjectiveGeometry};
use crate::{convert, Error, Real, Result};

/// Radial BFP intensity versus the aperture coordinate ρ = n₁·sinθ₁.
#[derive(Debug, Clone)]
pub struct BfpProfile<T> {
    /// Strictly increasing, within [0, NA].
    pub na_coordinate: Vec<T>,
    /// Energy per unit BFP area, arbitrary units, ≥ 0.
    pub intensity: Vec<T>,
    /// Whether instrument resolution has been applied.
    pub smoothed: bool,
    pub numerical_aperture: T,
    pub immersion_index: T,
}

/// Rasterized BFP image spanning [−NA, NA]².
#[derive(Debug, Clone)]
pub struct BfpImage<T> {
    /// Row-major square matrix of non-negative intensities.
    pub pixels: Vec<T>,
    pub pixels_across: usize,
    /// NA units per pixel.
    pub pixel_pitch: T,
    /// Pixel coordinates of the optical axis.
    pub center: (T, T),
}

impl<T: Real> BfpProfile<T> {
    /// ∫ I(ρ)·2πρ dρ over the stored grid (trapezoid): the collected energy.
    pub fn energy(&self) -> T {
        let two_pi = T::TAU();
        let mut acc = T::zero();
        for i in 1..self.na_coordinate.len() {
            let dr = self.na_coordinate[i] - self.na_coordinate[i - 1];
            let a = self.intensity[i - 1] * self.na_coordinate[i - 1];
            let b = self.intensity[i] * self.na_coordinate[i];
            acc += (a + b) * dr * convert(0.5);
        }
        acc * two_pi
    }

    /// Strict local maxima with the given prominence fraction.
    pub fn maxima(&self, min_prominence: T) -> Vec<(T, T)> {
        prominent_maxima(&self.na_coordinate, &self.intensity, min_prominence)
    }
}

impl<T: Real> BfpImage<T> {
    pub fn pixel(&self, row: usize, col: usize) -> T {
        self.pixels[row * self.pixels_across + col]
    }

    /// Pixel sum × pixel area: the image-plane energy.
    pub fn energy(&self) -> T {
        let sum: T = self.pixels.iter().copied().sum();
        sum * self.pixel_pitch * self.pixel_pitch
    }
}

/// Map a lower-half-space spectrum into the BFP: ρ = n₁·sinθ₁ and
/// I(ρ) = (dP/dθ)/(2π·n₁²·sinθ·cosθ), unsmoothed.
pub fn bfp_profile<T: Real>(
    lower: &AngularSpectrum<T>,
    objective: &ObjectiveGeometry<T>,
) -> Result<BfpProfile<T>> {
    objective.validate()?;
    if lower.hemisphere != Hemisphere::Lower {
        return Err(Error::MismatchedSpectra(
            "BFP profiles are built from the lower half-space spectrum".into(),
        ));
    }
    let n1 = objective.immersion_index;
    if (lower.medium_index - n1).abs() > convert::<T>(1e-9) * n1 {
        return Err(Error::InvalidObjective(format!(
            "objective immersion index {} does not match the spectrum medium {}",
            n1, lower.medium_index
        )));
    }
    let theta_max = objective.max_angle();
    let last = *lower
        .angles
        .last()
        .ok_or_else(|| Error::SpectrumCoverage("empty spectrum".into()))?;
    if last < theta_max - convert(1e-9) {
        return Err(Error::SpectrumCoverage(format!(
            "spectrum ends at {last} rad but the aperture needs {theta_max} rad"
        )));
    }

    let two_pi = T::TAU();
    let mut rho = Vec::new();
    let mut intensity = Vec::new();
    for (&theta, &dens) in lower.angles.iter().zip(&lower.density) {
        if theta > theta_max {
            break;
        }
        let (s, c) = theta.sin_cos();
        let i = if s == T::zero() {
            T::zero() // dP/dθ ∝ sin³θ near 0, so I → 0
        } else {
            dens / (two_pi * n1 * n1 * s * c)
        };
        rho.push(n1 * s);
        intensity.push(i);
    }
    // close the grid exactly at the aperture edge
    let na = objective.numerical_aperture;
    if let (Some(&last_rho), Some(&last_i)) = (rho.last(), intensity.last()) {
        if last_rho < na - convert(1e-12) {
            let (s, c) = theta_max.sin_cos();
            // linear interpolation of the density at the cut angle
            let idx = rho.len() - 1;
            let dens = if idx + 1 < lower.density.len() {
                let th0 = lower.angles[idx];
                let th1 = lower.angles[idx + 1];
                let w = (theta_max - th0) / (th1 - th0);
                lower.density[idx] * (T::one() - w) + lower.density[idx + 1] * w
            } else {
                lower.density[idx]
            };
            let _ = last_i;
            rho.push(na);
            intensity.push(dens / (two_pi * n1 * n1 * s * c));
        }
    }
    Ok(BfpProfile {
        na_coordinate: rho,
        intensity,
        smoothed: false,
        numerical_aperture: na,
        immersion_index: n1,
    })
}

/// Convolve the profile with a Gaussian of the stated FWHM in the angular
/// (θ₁) domain, renormalizing truncated kernel mass at the domain edges,
/// then rescale so the collected energy is exactly preserved.
pub fn apply_resolution<T: Real>(
    profile: &BfpProfile<T>,
    fwhm_degrees: T,
    n1: T,
) -> Result<BfpProfile<T>> {
    if profile.smoothed {
        return Err(Error::AlreadySmoothed);
    }
    assert!(fwhm_degrees > T::zero(), "FWHM must be positive");
    let fwhm = fwhm_degrees.to_radians();
    let sigma = fwhm / (convert::<T>(2.0) * (convert::<T>(2.0) * convert::<T>(2.0).ln()).sqrt());
    let thetas: Vec<T> = profile
        .na_coordinate
        .iter()
        .map(|&r| (r / n1).min(T::one()).asin())
        .collect();
    let n = thetas.len();
    // trapezoid cell widths double as the quadrature weights of the kernel
    let widths: Vec<T> = (0..n)
        .map(|i| {
            let lo = if i == 0 { thetas[0] } else { thetas[i - 1] };
            let hi = if i + 1 == n { thetas[n - 1] } else { thetas[i + 1] };
            (hi - lo) * convert(0.5)
        })
        .collect();
    let cut = sigma * convert(6.0);
    let inv_two_sigma_sqr = T::one() / (convert::<T>(2.0) * sigma * sigma);
    let mut out = vec![T::zero(); n];
    for i in 0..n {
        let mut acc = T::zero();
        let mut mass = T::zero();
        // kernel support around θ_i
        let mut j = i;
        while j > 0 && thetas[i] - thetas[j - 1] <= cut {
            j -= 1;
        }
        while j < n && thetas[j] - thetas[i] <= cut {
            let d = thetas[j] - thetas[i];
            let w = (-d * d * inv_two_sigma_sqr).exp() * widths[j];
            acc += w * profile.intensity[j];
            mass += w;
            j += 1;
        }
        out[i] = if mass > T::zero() { acc / mass } else { profile.intensity[i] };
    }
    let mut smoothed = BfpProfile {
        na_coordinate: profile.na_coordinate.clone(),
        intensity: out,
        smoothed: true,
        numerical_aperture: profile.numerical_aperture,
        immersion_index: profile.immersion_index,
    };
    let before = profile.energy();
    let after = smoothed.energy();
    if after > T::zero() {
        let scale = before / after;
        for v in &mut smoothed.intensity {
            *v *= scale;
        }
    }
    Ok(smoothed)
}

/// Rasterize the radial profile onto a square grid spanning [−NA, NA]² by
/// monotone cubic interpolation along ρ; pixels beyond the aperture are zero.
pub fn render_image<T: Real>(profile: &BfpProfile<T>, pixels_across: usize) -> BfpImage<T> {
    assert!(
        pixels_across >= 16 && pixels_across % 2 == 0,
        "image size must be even and at least 16"
    );
    let na = profile.numerical_aperture;
    let n = pixels_across;
    let pitch = convert::<T>(2.0) * na / convert(n as f64);
    let spline = MonotoneCubic::new(&profile.na_coordinate, &profile.intensity);
    let coord = |i: usize| -> T { -na + pitch * (convert::<T>(i as f64) + convert(0.5)) };
    let rows: Vec<Vec<T>> = (0..n)
        .into_par_iter()
        .map(|row| {
            let y = coord(row);
            (0..n)
                .map(|col| {
                    let x = coord(col);
                    let r = (x * x + y * y).sqrt();
                    if r > na {
                        T::zero()
                    } else {
                        spline.eval(r).max(T::zero())
                    }
                })
                .collect()
        })
        .collect();
    let mut pixels = Vec::with_capacity(n * n);
    for row in rows {
        pixels.extend(row);
    }
    let c = (convert::<T>(n as f64) - T::one()) * convert(0.5);
    BfpImage {
        pixels,
        pixels_across: n,
        pixel_pitch: pitch,
        center: (c, c),
    }
}

/// Fritsch–Carlson monotone cubic interpolant: no overshoot between nodes,
/// so interpolated intensities stay non-negative.
struct MonotoneCubic<T> {
    xs: Vec<T>,
    ys: Vec<T>,
    slopes: Vec<T>,
}

impl<T: Real> MonotoneCubic<T> {
    fn new(xs: &[T], ys: &[T]) -> Self {
        let n = xs.len();
        assert!(n >= 2, "need at least two interpolation nodes");
        let mut deltas = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            deltas.push((ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]));
        }
        let mut m = vec![T::zero(); n];
        m[0] = deltas[0];
        m[n - 1] = deltas[n - 2];
        for i in 1..n - 1 {
            if deltas[i - 1] * deltas[i] <= T::zero() {
                m[i] = T::zero();
            } else {
                // harmonic mean weighted by interval widths
                let w1 = convert::<T>(2.0) * (xs[i + 1] - xs[i]) + (xs[i] - xs[i - 1]);
                let w2 = (xs[i + 1] - xs[i]) + convert::<T>(2.0) * (xs[i] - xs[i - 1]);
                m[i] = (w1 + w2) / (w1 / deltas[i - 1] + w2 / deltas[i]);
            }
        }
        // clamp endpoint slopes to preserve monotonicity
        for (i, d) in [(0usize, deltas[0]), (n - 1, deltas[n - 2])] {
            if m[i] * d <= T::zero() {
                m[i] = T::zero();
            } else if m[i].abs() > convert::<T>(3.0) * d.abs() {
                m[i] = convert::<T>(3.0) * d;
            }
        }
        MonotoneCubic {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            slopes: m,
        }
    }

    fn eval(&self, x: T) -> T {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let mut lo = 0usize;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.xs[mid] <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let hseg = self.xs[lo + 1] - self.xs[lo];
        let s = (x - self.xs[lo]) / hseg;
        let s2 = s * s;
        let s3 = s2 * s;
        let two = convert::<T>(2.0);
        let three = convert::<T>(3.0);
        let h00 = two * s3 - three * s2 + T::one();
        let h10 = s3 - two * s2 + s;
        let h01 = -two * s3 + three * s2;
        let h11 = s3 - s2;
        self.ys[lo] * h00
            + self.slopes[lo] * hseg * h10
            + self.ys[lo + 1] * h01
            + self.slopes[lo + 1] * hseg * h11
    }
}
