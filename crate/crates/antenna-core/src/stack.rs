//! Planar-multilayer optical primitives.
//!
//! Geometry convention: the stack is listed bottom to top — a semi-infinite
//! substrate, a list of finite layers, a semi-infinite superstrate. The
//! emitter is a vertical electric dipole inside one layer, at height `h`
//! above that layer's bottom boundary. Fields carry the e^{−iωt} time
//! dependence; propagation phases accumulate as e^{+i·kz·d}; kz lies on the
//! branch with Im(kz) ≥ 0 (and Re(kz) ≥ 0 when purely real), so evanescent
//! waves decay away from their source.
//!
//! Fresnel coefficients are written for the magnetic-field amplitude of
//! p-polarized waves — the only polarization a vertical dipole radiates.

use num_complex::Complex;

use crate::{convert, Error, Real, Result};

/// A finite lossless dielectric layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layer<T> {
    /// Thickness in nm; finite and strictly positive.
    pub thickness: T,
    /// Real refractive index, ≥ 1.
    pub index: T,
}

impl<T: Real> Layer<T> {
    pub fn new(thickness: T, index: T) -> Self {
        Layer { thickness, index }
    }
}

/// A semi-infinite bounding medium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfSpace<T> {
    /// Real refractive index, ≥ 1.
    pub index: T,
}

impl<T: Real> HalfSpace<T> {
    pub fn new(index: T) -> Self {
        HalfSpace { index }
    }
}

/// Which side of the emitter plane an operation looks toward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Toward the substrate.
    Down,
    /// Toward the superstrate.
    Up,
}

/// A complete stack with an embedded vertical dipole.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack<T> {
    pub substrate: HalfSpace<T>,
    /// Ordered bottom to top.
    pub layers: Vec<Layer<T>>,
    pub superstrate: HalfSpace<T>,
    /// Index into `layers` of the layer containing the emitter.
    pub emitter_layer: usize,
    /// Emitter height above the bottom boundary of its layer, in nm.
    pub emitter_height: T,
    /// Vacuum wavelength in nm.
    pub wavelength: T,
}

/// Out-of-plane wavenumbers of one plane-wave component in every region.
#[derive(Debug, Clone)]
pub struct PlaneWaveState<T> {
    /// In-plane wavenumber in nm⁻¹.
    pub k_parallel: T,
    /// kz per region, bottom to top: substrate, layers…, superstrate.
    pub kz_per_region: Vec<Complex<T>>,
}

/// Out-of-plane wavenumber √((k₀n)² − k_p²) on the Im ≥ 0 branch.
///
/// For lossless media the result is either purely real (≥ 0) or purely
/// imaginary (Im > 0), so it is computed without complex arithmetic.
#[inline]
pub fn kz<T: Real>(index: T, k_parallel: T, k0: T) -> Complex<T> {
    let kn = k0 * index;
    let val = kn * kn - k_parallel * k_parallel;
    if val >= T::zero() {
        Complex::new(val.sqrt(), T::zero())
    } else {
        Complex::new(T::zero(), (-val).sqrt())
    }
}

/// p-polarization interface coefficients for the H-field amplitude:
/// r = (n_j²·kz_i − n_i²·kz_j)/(n_j²·kz_i + n_i²·kz_j), t = 2n_j²·kz_i/(same).
///
/// With these, |r|² + Re(kz_j·n_i²/(kz_i·n_j²))·|t|² = 1 for propagating
/// waves between lossless media.
pub fn fresnel_p<T: Real>(
    n_i: T,
    n_j: T,
    kz_i: Complex<T>,
    kz_j: Complex<T>,
) -> Result<(Complex<T>, Complex<T>)> {
    let ni2 = n_i * n_i;
    let nj2 = n_j * n_j;
    let den = kz_i * nj2 + kz_j * ni2;
    if den.norm_sqr() < degenerate_floor::<T>() {
        return Err(Error::DegeneratePlaneWave {
            k_parallel: f64::NAN,
        });
    }
    let r = (kz_i * nj2 - kz_j * ni2) / den;
    let t = kz_i * convert::<T>(2.0) * nj2 / den;
    Ok((r, t))
}

#[inline]
fn degenerate_floor<T: Real>() -> T {
    // |den| < 1e-300 in f64; clamps to the smallest positive value in f32
    T::from_f64(1e-300)
        .filter(|v| *v > T::zero())
        .unwrap_or_else(T::min_positive_value)
}

impl<T: Real> LayerStack<T> {
    pub fn new(
        substrate: HalfSpace<T>,
        layers: Vec<Layer<T>>,
        superstrate: HalfSpace<T>,
        emitter_layer: usize,
        emitter_height: T,
        wavelength: T,
    ) -> Self {
        LayerStack {
            substrate,
            layers,
            superstrate,
            emitter_layer,
            emitter_height,
            wavelength,
        }
    }

    /// Vacuum wavenumber 2π/λ in nm⁻¹; derived, never stored.
    #[inline]
    pub fn k0(&self) -> T {
        T::TAU() / self.wavelength
    }

    #[inline]
    pub fn emitter_index(&self) -> T {
        self.layers[self.emitter_layer].index
    }

    #[inline]
    pub fn emitter_thickness(&self) -> T {
        self.layers[self.emitter_layer].thickness
    }

    /// Distance from the emitter up to the top boundary of its layer.
    #[inline]
    pub fn distance_up(&self) -> T {
        self.emitter_thickness() - self.emitter_height
    }

    /// Refractive indices of all regions, bottom to top.
    pub fn region_indices(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(self.layers.len() + 2);
        v.push(self.substrate.index);
        v.extend(self.layers.iter().map(|l| l.index));
        v.push(self.superstrate.index);
        v
    }

    pub fn max_index(&self) -> T {
        self.region_indices()
            .into_iter()
            .fold(T::zero(), |a, b| a.max(b))
    }

    /// Every violated invariant, as human-readable messages; empty means ok.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let one = T::one();
        if !(self.wavelength > T::zero()) || !self.wavelength.is_finite() {
            out.push(format!(
                "wavelength must be finite and positive, got {}",
                self.wavelength
            ));
        }
        if self.layers.is_empty() {
            out.push("stack needs at least one layer to hold the emitter".into());
        }
        for (i, layer) in self.layers.iter().enumerate() {
            if !(layer.thickness > T::zero()) || !layer.thickness.is_finite() {
                out.push(format!("layer {i}: non-positive thickness {}", layer.thickness));
            }
            if !(layer.index >= one) || !layer.index.is_finite() {
                out.push(format!(
                    "layer {i}: index must be real and >= 1, got {}",
                    layer.index
                ));
            }
        }
        for (name, hs) in [("substrate", &self.substrate), ("superstrate", &self.superstrate)] {
            if !(hs.index >= one) || !hs.index.is_finite() {
                out.push(format!("{name}: index must be real and >= 1, got {}", hs.index));
            }
        }
        if self.emitter_layer >= self.layers.len() {
            out.push(format!(
                "emitter_layer {} out of range for {} layers",
                self.emitter_layer,
                self.layers.len()
            ));
        } else {
            let t = self.layers[self.emitter_layer].thickness;
            if !(self.emitter_height > T::zero() && self.emitter_height < t) {
                out.push(format!(
                    "emitter outside its layer: height {} not in (0, {})",
                    self.emitter_height, t
                ));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidStack(v))
        }
    }

    /// kz in every region for the given in-plane wavenumber.
    pub fn plane_wave(&self, k_parallel: T) -> PlaneWaveState<T> {
        let k0 = self.k0();
        PlaneWaveState {
            k_parallel,
            kz_per_region: self
                .region_indices()
                .into_iter()
                .map(|n| kz(n, k_parallel, k0))
                .collect(),
        }
    }
}

/// Effective reflection and transmission of the whole sub-stack on one side
/// of the emitter, referenced at the emitter layer's boundary on that side.
///
/// Built by the interface recursion
/// r = (r_near + r_far·e^{2i·kz·d})/(1 + r_near·r_far·e^{2i·kz·d}),
/// t = t_near·t_far·e^{i·kz·d}/(1 + r_near·r_far·e^{2i·kz·d}),
/// folded from the outermost interface inward. The transmission is the
/// H-field amplitude reaching the half-space on that side.
pub(crate) fn effective_interface<T: Real>(
    stack: &LayerStack<T>,
    side: Side,
    k_parallel: T,
) -> Result<(Complex<T>, Complex<T>)> {
    let k0 = stack.k0();
    let e = stack.emitter_layer;
    // media chain from the emitter layer outward, ending in the half-space
    let (count, outer) = match side {
        Side::Down => (e, stack.substrate.index),
        Side::Up => (stack.layers.len() - 1 - e, stack.superstrate.index),
    };
    let layer_at = |step: usize| -> &Layer<T> {
        match side {
            Side::Down => &stack.layers[e - step],
            Side::Up => &stack.layers[e + step],
        }
    };
    let index_at = |step: usize| -> T {
        if step == 0 {
            stack.emitter_index()
        } else {
            layer_at(step).index
        }
    };

    // innermost incident medium for the far interface
    let n_last = index_at(count);
    let (mut r, mut t) = fresnel_p(n_last, outer, kz(n_last, k_parallel, k0), kz(outer, k_parallel, k0))?;
    // wrap the remaining interfaces, moving toward the emitter
    for step in (1..=count).rev() {
        let spacer = layer_at(step);
        let n_in = index_at(step - 1);
        let kz_sp = kz(spacer.index, k_parallel, k0);
        let phase = (Complex::<T>::i() * kz_sp * spacer.thickness).exp();
        let phase2 = phase * phase;
        let (r_near, t_near) = fresnel_p(n_in, spacer.index, kz(n_in, k_parallel, k0), kz_sp)?;
        let den = Complex::<T>::one() + r_near * r * phase2;
        if den.norm_sqr() < degenerate_floor::<T>() {
            return Err(Error::DegeneratePlaneWave {
                k_parallel: k_parallel.to_f64().unwrap_or(f64::NAN),
            });
        }
        r = (r_near + r * phase2) / den;
        t = t_near * t * phase / den;
    }
    Ok((r, t))
}

/// Amplitude reflection coefficient of the sub-stack toward `side`, seen by
/// a p-polarized wave inside the emitter layer.
pub fn effective_reflection<T: Real>(
    stack: &LayerStack<T>,
    side: Side,
    k_parallel: T,
) -> Result<Complex<T>> {
    effective_interface(stack, side, k_parallel).map(|(r, _)| r)
}

trait ComplexOne {
    fn one() -> Self;
}
impl<T: Real> ComplexOne for Complex<T> {
    fn one() -> Self {
        Complex::new(T::one(), T::zero())
    }
}
