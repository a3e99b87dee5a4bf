//! Angular emission of the vertical dipole and its energy bookkeeping.
//!
//! Every plane-wave component of the dipole field is dressed by the
//! effective reflections of the sub-stacks above and below the emitter,
//! including all round trips inside the emitter layer. Far-field spectra
//! are normalized so that the lower and upper half-spaces together carry
//! unit power; the total radiated power (relative to the same dipole in an
//! unbounded emitter-layer medium) comes from the dissipated-power integral
//! over in-plane wavenumber, which for a lossless stack must match the sum
//! of the far-field integrals.

use num_complex::Complex;

use crate::quad::{integrate_segments, QuadConfig};
use crate::stack::{effective_interface, kz, LayerStack, Side};
use crate::{convert, Error, Real, Result};

/// Which half-space a spectrum describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hemisphere {
    /// Into the substrate.
    Lower,
    /// Into the superstrate.
    Upper,
}

/// Far-field power density versus polar angle in one half-space.
///
/// `density` is dP/dθ in fractions of the total emitted power per radian;
/// the lower and upper spectra of the same stack integrate to one.
#[derive(Debug, Clone)]
pub struct AngularSpectrum<T> {
    pub hemisphere: Hemisphere,
    /// Strictly increasing grid in [0, π/2), radians from the stack normal.
    pub angles: Vec<T>,
    pub density: Vec<T>,
    pub medium_index: T,
}

/// Total radiated power and its half-space split.
#[derive(Debug, Clone, Copy)]
pub struct RadiatedPower<T> {
    /// Power relative to the same dipole in an unbounded emitter-layer medium.
    pub total_normalized: T,
    pub lower_fraction: T,
    pub upper_fraction: T,
}

/// Collection optic: an aplanatic objective index-matched to the substrate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveGeometry<T> {
    pub numerical_aperture: T,
    pub immersion_index: T,
}

impl<T: Real> ObjectiveGeometry<T> {
    pub fn new(numerical_aperture: T, immersion_index: T) -> Self {
        ObjectiveGeometry {
            numerical_aperture,
            immersion_index,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.numerical_aperture > T::zero() && self.numerical_aperture < self.immersion_index)
        {
            return Err(Error::InvalidObjective(format!(
                "numerical aperture {} must lie in (0, {})",
                self.numerical_aperture, self.immersion_index
            )));
        }
        Ok(())
    }

    /// Collection half-angle in the immersion medium.
    pub fn max_angle(&self) -> T {
        (self.numerical_aperture / self.immersion_index).asin()
    }
}

impl<T: Real> AngularSpectrum<T> {
    /// Integral of the density over the whole grid (composite Simpson).
    pub fn integrate(&self) -> T {
        self.integrate_to(T::infinity())
    }

    /// Integral of the density over [0, theta], Simpson on the uniform grid
    /// with a quadratic partial cell at the cut.
    pub fn integrate_to(&self, theta: T) -> T {
        let n = self.angles.len();
        if n < 2 {
            return T::zero();
        }
        let step = self.angles[1] - self.angles[0];
        let theta = theta.min(*self.angles.last().unwrap());
        let half = convert::<T>(0.5);
        let third = T::one() / convert::<T>(3.0);
        // full Simpson pairs below the cut
        let mut acc = T::zero();
        let mut comp = T::zero();
        let mut add = |x: T| {
            let y = x - comp;
            let t = acc + y;
            comp = (t - acc) - y;
            acc = t;
        };
        let mut i = 0usize;
        while i + 2 < n && self.angles[i + 2] <= theta {
            add(step * third * (self.density[i] + convert::<T>(4.0) * self.density[i + 1] + self.density[i + 2]));
            i += 2;
        }
        // quadratic through the next three points, integrated to the cut
        let r = theta - self.angles[i];
        if r > T::zero() && i + 1 < n {
            let (f0, f1, f2) = if i + 2 < n {
                (self.density[i], self.density[i + 1], self.density[i + 2])
            } else {
                (self.density[i - 1], self.density[i], self.density[i + 1])
            };
            let (x0, r) = if i + 2 < n {
                (T::zero(), r)
            } else {
                (step, r + step)
            };
            // Newton form on nodes 0, step, 2·step
            let d1 = (f1 - f0) / step;
            let d2 = (f2 - convert::<T>(2.0) * f1 + f0) / (convert::<T>(2.0) * step * step);
            let at = |x: T| {
                f0 * x + d1 * half * x * x
                    + d2 * (x * x * x * third - step * half * x * x)
            };
            add(at(r) - at(x0));
        }
        acc
    }

    pub fn max_density(&self) -> T {
        self.density.iter().fold(T::zero(), |a, &b| a.max(b))
    }
}

/// Per-stack far-field machinery shared by the public operations.
pub(crate) struct DipoleField<'a, T> {
    stack: &'a LayerStack<T>,
    k0: T,
    n_e: T,
    k_e: T,
    d_up: T,
    d_down: T,
    t_e: T,
}

struct CavityState<T> {
    kz_e: Complex<T>,
    r_up: Complex<T>,
    r_down: Complex<T>,
    t_up: Complex<T>,
    t_down: Complex<T>,
    /// 1 − r_up·r_down·e^{2i·kz_e·t_e}
    denominator: Complex<T>,
}

impl<'a, T: Real> DipoleField<'a, T> {
    pub(crate) fn new(stack: &'a LayerStack<T>) -> Result<Self> {
        stack.validate()?;
        let k0 = stack.k0();
        let n_e = stack.emitter_index();
        Ok(DipoleField {
            stack,
            k0,
            n_e,
            k_e: k0 * n_e,
            d_up: stack.distance_up(),
            d_down: stack.emitter_height,
            t_e: stack.emitter_thickness(),
        })
    }

    fn hemisphere_index(&self, hemisphere: Hemisphere) -> T {
        match hemisphere {
            Hemisphere::Lower => self.stack.substrate.index,
            Hemisphere::Upper => self.stack.superstrate.index,
        }
    }

    fn cavity(&self, k_parallel: T) -> Result<CavityState<T>> {
        // exactly on the emitter-layer light line the dispersion relation
        // cancels to kz_e = 0 and every interface degenerates; step off it
        let mut k_parallel = k_parallel;
        if kz(self.n_e, k_parallel, self.k0).norm_sqr()
            < convert::<T>(1e-14) * self.k_e * self.k_e
        {
            k_parallel *= T::one() - convert(1e-7);
        }
        let (r_down, t_down) = effective_interface(self.stack, Side::Down, k_parallel)?;
        let (r_up, t_up) = effective_interface(self.stack, Side::Up, k_parallel)?;
        let kz_e = kz(self.n_e, k_parallel, self.k0);
        let round_trip = (Complex::<T>::i() * kz_e * convert::<T>(2.0) * self.t_e).exp();
        let denominator = Complex::new(T::one(), T::zero()) - r_up * r_down * round_trip;
        if denominator.norm_sqr() < convert::<T>(1e-280) {
            return Err(Error::DegeneratePlaneWave {
                k_parallel: k_parallel.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(CavityState {
            kz_e,
            r_up,
            r_down,
            t_up,
            t_down,
            denominator,
        })
    }

    /// dP/dθ into one half-space, normalized to the homogeneous-medium total.
    pub(crate) fn raw_density(&self, hemisphere: Hemisphere, theta: T) -> Result<T> {
        let n_h = self.hemisphere_index(hemisphere);
        let (sin_t, cos_t) = theta.sin_cos();
        // |kz_e|²/k_e² in the cancellation-free form (n_e² − n_h²) + n_h²cos²θ;
        // exact at grazing angles, where the k_parallel route loses all
        // precision. If the two terms cancel to below their own rounding
        // noise the angle sits numerically on the emitter-layer light line
        // (a removable point): step off it and evaluate there.
        let nh2 = n_h * n_h;
        let ne2 = self.n_e * self.n_e;
        let base = (ne2 - nh2) + nh2 * cos_t * cos_t;
        let noise = (ne2 - nh2).abs().max(nh2 * cos_t * cos_t) * T::epsilon() * convert(64.0);
        if base.abs() < noise {
            let shifted = theta + convert::<T>(1e-7);
            let shifted = if shifted < T::FRAC_PI_2() {
                shifted
            } else {
                theta - convert::<T>(1e-7)
            };
            return self.raw_density(hemisphere, shifted);
        }
        let k_parallel = self.k0 * n_h * sin_t;
        let cav = self.cavity(k_parallel)?;
        let two_i_kz = Complex::<T>::i() * cav.kz_e * convert::<T>(2.0);
        let one = Complex::new(T::one(), T::zero());
        let amplitude = match hemisphere {
            Hemisphere::Lower => {
                let source = one + cav.r_up * (two_i_kz * self.d_up).exp();
                source / cav.denominator
                    * (Complex::<T>::i() * cav.kz_e * self.d_down).exp()
                    * cav.t_down
            }
            Hemisphere::Upper => {
                let source = one + cav.r_down * (two_i_kz * self.d_down).exp();
                source / cav.denominator
                    * (Complex::<T>::i() * cav.kz_e * self.d_up).exp()
                    * cav.t_up
            }
        };
        let zeta_sqr = base.abs() / ne2;
        let ratio = n_h / self.n_e;
        Ok(convert::<T>(0.75)
            * ratio.powi(3)
            * sin_t.powi(3)
            * cos_t
            * cos_t
            * amplitude.norm_sqr()
            / zeta_sqr)
    }

    /// Cavity enhancement factor of the dissipated-power integrand.
    fn enhancement(&self, s: T) -> Result<Complex<T>> {
        let cav = self.cavity(self.k_e * s)?;
        let two_i_kz = Complex::<T>::i() * cav.kz_e * convert::<T>(2.0);
        let one = Complex::new(T::one(), T::zero());
        let up = one + cav.r_up * (two_i_kz * self.d_up).exp();
        let down = one + cav.r_down * (two_i_kz * self.d_down).exp();
        Ok(up * down / cav.denominator)
    }

    /// Points where the round-trip denominator of the integrand dips:
    /// quasi-waveguide resonances that the quadrature must not straddle.
    ///
    /// Each dip found on the scan grid is localized by ternary descent and
    /// surrounded by a geometric ladder of breakpoints, so narrow Lorentzian
    /// peaks meet panel edges at every scale instead of hiding inside one
    /// wide panel.
    fn resonance_points(lo: T, hi: T, samples: usize, metric: &dyn Fn(T) -> T) -> Vec<T> {
        let mut pts = Vec::new();
        let n = samples.max(8);
        let span = hi - lo;
        let step = span / convert(n as f64);
        let at = |i: usize| lo + step * (convert::<T>(i as f64) + convert(0.5));
        let mut prev2 = T::infinity();
        let mut prev = metric(at(0));
        for i in 1..n {
            let cur = metric(at(i));
            if prev < prev2 && prev < cur && prev < convert(0.5) {
                // ternary descent to the dip center
                let (mut a, mut b) = (at(i.saturating_sub(2)), at(i));
                for _ in 0..100 {
                    let third = (b - a) / convert(3.0);
                    let (m1, m2) = (a + third, b - third);
                    if metric(m1) < metric(m2) {
                        b = m2;
                    } else {
                        a = m1;
                    }
                    if !(a < b) {
                        break;
                    }
                }
                let center = (a + b) * convert(0.5);
                pts.push(center);
                for scale in [1e-12, 1e-9, 1e-7, 1e-5, 1e-3] {
                    let d = span * convert(scale);
                    if center - d > lo {
                        pts.push(center - d);
                    }
                    if center + d < hi {
                        pts.push(center + d);
                    }
                }
            }
            prev2 = prev;
            prev = cur;
        }
        pts
    }

    fn denominator_metric(&self, k_parallel: T) -> T {
        self.cavity(k_parallel)
            .map(|c| c.denominator.norm())
            .unwrap_or(T::zero())
    }

    /// Breakpoints for the far-field θ integral of one hemisphere: branch
    /// kinks at every region light line plus resonance dips.
    fn hemisphere_breakpoints(&self, hemisphere: Hemisphere) -> Vec<T> {
        let n_h = self.hemisphere_index(hemisphere);
        let k0 = self.k0;
        let mut pts = vec![T::zero(), T::FRAC_PI_2()];
        for n in self.stack.region_indices() {
            if n < n_h {
                pts.push((n / n_h).asin());
            }
        }
        let metric = |th: T| self.denominator_metric(k0 * n_h * th.sin());
        pts.extend(Self::resonance_points(
            T::zero(),
            T::FRAC_PI_2(),
            2048,
            &metric,
        ));
        dedup_sorted(&mut pts);
        pts
    }

    /// Far-field power into one half-space (homogeneous-medium units).
    pub(crate) fn hemisphere_power(&self, hemisphere: Hemisphere, cfg: &QuadConfig<T>) -> Result<T> {
        let pts = self.hemisphere_breakpoints(hemisphere);
        integrate_segments(&|th| self.raw_density(hemisphere, th), &pts, cfg)
    }

    /// Far-field power into the lower cone [0, theta_max].
    pub(crate) fn cone_power(&self, theta_max: T, cfg: &QuadConfig<T>) -> Result<T> {
        let mut pts: Vec<T> = self
            .hemisphere_breakpoints(Hemisphere::Lower)
            .into_iter()
            .filter(|&p| p < theta_max)
            .collect();
        pts.push(theta_max);
        dedup_sorted(&mut pts);
        integrate_segments(&|th| self.raw_density(Hemisphere::Lower, th), &pts, cfg)
    }

    /// Dissipated power relative to the homogeneous medium, integrating the
    /// plane-wave spectrum over k_parallel ∈ [0, ∞). The propagating part is
    /// parametrized by s = sin φ and the evanescent part by s = cosh ψ, which
    /// removes the 1/kz_e endpoint singularity.
    pub(crate) fn total_dissipated(&self, cfg: &QuadConfig<T>) -> Result<T> {
        let three_half = convert::<T>(1.5);
        let prop = |phi: T| -> Result<T> {
            let s = phi.sin();
            Ok(three_half * s.powi(3) * self.enhancement(s)?.re)
        };
        let evan = |psi: T| -> Result<T> {
            let s = psi.cosh();
            Ok(three_half * s.powi(3) * self.enhancement(s)?.im)
        };

        let n_e = self.n_e;
        let mut prop_pts = vec![T::zero(), T::FRAC_PI_2()];
        let mut evan_pts = vec![T::zero()];
        let mut n_max = n_e;
        for n in self.stack.region_indices() {
            n_max = n_max.max(n);
            if n < n_e {
                prop_pts.push((n / n_e).asin());
            } else if n > n_e {
                evan_pts.push((n / n_e).acosh());
            }
        }
        let s_guard = convert::<T>(3.0) * n_max / n_e;
        evan_pts.push(s_guard.acosh());
        let metric_prop = |phi: T| self.denominator_metric(self.k_e * phi.sin());
        prop_pts.extend(Self::resonance_points(
            T::zero(),
            T::FRAC_PI_2(),
            2048,
            &metric_prop,
        ));
        dedup_sorted(&mut prop_pts);
        let evan_hi = s_guard.acosh();
        let metric_evan = |psi: T| self.denominator_metric(self.k_e * psi.cosh());
        evan_pts.extend(Self::resonance_points(
            T::zero(),
            evan_hi,
            2048,
            &metric_evan,
        ));
        dedup_sorted(&mut evan_pts);

        let p = integrate_segments(&prop, &prop_pts, cfg)?;
        let e = integrate_segments(&evan, &evan_pts, cfg)?;
        let total = p + e;

        // the spectrum beyond k_p = 3·k0·n_max is a numerical guard band:
        // for a lossless stack it must carry essentially nothing
        let guard = integrate_segments(
            &evan,
            &[evan_hi, (convert::<T>(2.0) * s_guard).acosh()],
            &QuadConfig {
                rel_tol: convert(1e-6),
                abs_tol: convert::<T>(1e-12) * total.abs(),
                ..*cfg
            },
        )?;
        if guard.abs() > convert::<T>(1e-9) * total.abs() {
            return Err(Error::QuadratureNotConverged {
                residual: (guard / total).to_f64().unwrap_or(f64::NAN),
                panels: 0,
            });
        }
        Ok(total)
    }
}

fn dedup_sorted<T: Real>(pts: &mut Vec<T>) {
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    pts.dedup_by(|a, b| (*a - *b).abs() < convert(1e-12));
}

/// Angular emission spectrum of the stack into one half-space.
///
/// The density is evaluated on a uniform grid of the given resolution and
/// normalized by the total far-field power, so the lower and upper spectra
/// together integrate to one.
pub fn angular_density<T: Real>(
    stack: &LayerStack<T>,
    hemisphere: Hemisphere,
    angle_grid_resolution: T,
) -> Result<AngularSpectrum<T>> {
    assert!(
        angle_grid_resolution > T::zero() && angle_grid_resolution <= convert(0.05),
        "angle grid resolution must lie in (0, 0.05] rad"
    );
    let field = DipoleField::new(stack)?;
    let cfg = QuadConfig::default();
    let norm = field.hemisphere_power(Hemisphere::Lower, &cfg)?
        + field.hemisphere_power(Hemisphere::Upper, &cfg)?;

    // uniform grid that closes just inside π/2, so grid integrals cover the
    // whole half-space; the step is the requested resolution rounded down
    let span = T::FRAC_PI_2() - convert(1e-9);
    let panels = (span / angle_grid_resolution).ceil();
    let step = span / panels;
    let count = panels.to_usize().unwrap() + 1;
    let mut angles = Vec::with_capacity(count);
    let mut density = Vec::with_capacity(count);
    for i in 0..count {
        let theta = (step * convert(i as f64)).min(span);
        angles.push(theta);
        density.push(field.raw_density(hemisphere, theta)? / norm);
    }
    Ok(AngularSpectrum {
        hemisphere,
        angles,
        density,
        medium_index: field.hemisphere_index(hemisphere),
    })
}

/// Far-field power radiated into (lower, upper) half-spaces, in units of
/// the homogeneous-medium power. For a lossless stack their sum equals the
/// dissipated-power integral of [`total_radiated_power`].
pub fn hemisphere_powers<T: Real>(
    stack: &LayerStack<T>,
    cfg: &QuadConfig<T>,
) -> Result<(T, T)> {
    let field = DipoleField::new(stack)?;
    Ok((
        field.hemisphere_power(Hemisphere::Lower, cfg)?,
        field.hemisphere_power(Hemisphere::Upper, cfg)?,
    ))
}

/// The dissipated-power k-integral alone, at a caller-chosen tolerance.
pub fn dissipated_power<T: Real>(stack: &LayerStack<T>, cfg: &QuadConfig<T>) -> Result<T> {
    DipoleField::new(stack)?.total_dissipated(cfg)
}

/// Total radiated power (dissipated-power integral) plus the half-space
/// split from the far-field integrals.
pub fn total_radiated_power<T: Real>(stack: &LayerStack<T>) -> Result<RadiatedPower<T>> {
    let field = DipoleField::new(stack)?;
    let cfg = QuadConfig::default();
    let total = field.total_dissipated(&cfg)?;
    let lower = field.hemisphere_power(Hemisphere::Lower, &cfg)?;
    let upper = field.hemisphere_power(Hemisphere::Upper, &cfg)?;
    let sum = lower + upper;
    Ok(RadiatedPower {
        total_normalized: total,
        lower_fraction: lower / sum,
        upper_fraction: upper / sum,
    })
}

/// Collected fraction η = ∫₀^{asin(NA/n₁)} of the normalized lower spectrum.
pub fn collection_efficiency<T: Real>(
    lower: &AngularSpectrum<T>,
    upper: &AngularSpectrum<T>,
    objective: &ObjectiveGeometry<T>,
) -> Result<T> {
    objective.validate()?;
    if lower.hemisphere != Hemisphere::Lower || upper.hemisphere != Hemisphere::Upper {
        return Err(Error::MismatchedSpectra(
            "expected one lower and one upper spectrum".into(),
        ));
    }
    let tol = convert::<T>(1e-9);
    if (lower.medium_index - objective.immersion_index).abs() > tol * objective.immersion_index {
        return Err(Error::InvalidObjective(format!(
            "objective immersion index {} does not match the lower medium {}",
            objective.immersion_index, lower.medium_index
        )));
    }
    let norm = lower.integrate() + upper.integrate();
    if (norm - T::one()).abs() > convert(1e-3) {
        return Err(Error::MismatchedSpectra(format!(
            "spectra are not normalized together (sum {norm})"
        )));
    }
    Ok(lower.integrate_to(objective.max_angle()))
}

/// η computed directly from the stack by adaptive quadrature; identical
/// physics to the spectrum route, used where many η evaluations are needed.
pub fn stack_collection_efficiency<T: Real>(
    stack: &LayerStack<T>,
    objective: &ObjectiveGeometry<T>,
    cfg: &QuadConfig<T>,
) -> Result<T> {
    objective.validate()?;
    let tol = convert::<T>(1e-9);
    if (stack.substrate.index - objective.immersion_index).abs() > tol * objective.immersion_index
    {
        return Err(Error::InvalidObjective(format!(
            "objective immersion index {} does not match the substrate {}",
            objective.immersion_index, stack.substrate.index
        )));
    }
    let field = DipoleField::new(stack)?;
    let cone = field.cone_power(objective.max_angle(), cfg)?;
    let lower = field.hemisphere_power(Hemisphere::Lower, cfg)?;
    let upper = field.hemisphere_power(Hemisphere::Upper, cfg)?;
    Ok(cone / (lower + upper))
}

/// Strict local maxima of the density with topographic prominence at least
/// `min_prominence` times the global maximum, sorted by angle.
pub fn find_lobes<T: Real>(spectrum: &AngularSpectrum<T>, min_prominence: T) -> Vec<(T, T)> {
    prominent_maxima(&spectrum.angles, &spectrum.density, min_prominence)
}

/// Shared peak finder: strict local maxima whose prominence (height above
/// the deepest valley separating them from higher ground) reaches the given
/// fraction of the global maximum.
pub(crate) fn prominent_maxima<T: Real>(xs: &[T], ys: &[T], min_prominence: T) -> Vec<(T, T)> {
    assert!(
        min_prominence > T::zero() && min_prominence < T::one(),
        "prominence threshold must lie in (0, 1)"
    );
    let n = ys.len();
    if n < 3 {
        return Vec::new();
    }
    let global_max = ys.iter().fold(T::zero(), |a, &b| a.max(b));
    if global_max <= T::zero() {
        return Vec::new();
    }
    let threshold = min_prominence * global_max;
    let mut peaks = Vec::new();
    for i in 1..n - 1 {
        if !(ys[i] > ys[i - 1] && ys[i] > ys[i + 1]) {
            continue;
        }
        // walk outward to the nearest higher ground, tracking the valley floor
        let mut left_min = ys[i];
        let mut j = i;
        while j > 0 {
            j -= 1;
            left_min = left_min.min(ys[j]);
            if ys[j] > ys[i] {
                break;
            }
        }
        let mut right_min = ys[i];
        let mut j = i;
        while j + 1 < n {
            j += 1;
            right_min = right_min.min(ys[j]);
            if ys[j] > ys[i] {
                break;
            }
        }
        let prominence = ys[i] - left_min.max(right_min);
        if prominence >= threshold {
            peaks.push((xs[i], ys[i]));
        }
    }
    peaks
}
