//! Adaptive Gauss–Kronrod (G7, K15) quadrature, generic over the scalar.
//!
//! Refinement bisects the panel with the largest error estimate until the
//! summed estimate meets the relative tolerance or the panel budget runs
//! out. The refinement order and the final summation order are fixed, so
//! results are independent of evaluation context.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::{convert, Error, Real, Result};

// K15 abscissae (non-negative half) and weights, with the embedded G7 weights.
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

/// Quadrature controls; defaults follow the crate-wide numerics policy
/// (relative tolerance 1e-8, hard cap of 10^6 panels).
#[derive(Debug, Clone, Copy)]
pub struct QuadConfig<T> {
    pub rel_tol: T,
    /// Absolute floor for near-zero integrals.
    pub abs_tol: T,
    pub max_panels: usize,
    /// Uniform pre-split of each segment before adaptive refinement, so
    /// narrow resonance spikes cannot hide between the nodes of one panel.
    pub initial_per_segment: usize,
}

impl<T: Real> Default for QuadConfig<T> {
    fn default() -> Self {
        QuadConfig {
            rel_tol: convert(1e-8),
            abs_tol: convert(1e-300),
            max_panels: 1_000_000,
            initial_per_segment: 16,
        }
    }
}

impl<T: Real> QuadConfig<T> {
    /// Same policy at a tightened relative tolerance (used by oracle tests).
    pub fn with_rel_tol(rel_tol: T) -> Self {
        QuadConfig {
            rel_tol,
            ..Self::default()
        }
    }
}

struct Panel<T> {
    a: T,
    b: T,
    value: T,
    error: T,
}

impl<T: Real> PartialEq for Panel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<T: Real> Eq for Panel<T> {}
impl<T: Real> PartialOrd for Panel<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Real> Ord for Panel<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        // max-heap pops the largest error; NaN refines first, ties break on
        // the left endpoint so the order is total and reproducible
        match self.error.partial_cmp(&other.error) {
            Some(ord) if ord != Ordering::Equal => ord,
            Some(_) => match self.a.partial_cmp(&other.a) {
                Some(o) => o.reverse(),
                None => Ordering::Equal,
            },
            None => {
                if self.error.is_nan() {
                    Ordering::Greater
                } else {
                    Ordering::Less
                }
            }
        }
    }
}

/// One K15 panel. Returns (value, error estimate).
fn gk15<T: Real, F>(f: &F, a: T, b: T) -> Result<(T, T)>
where
    F: Fn(T) -> Result<T>,
{
    let half = convert::<T>(0.5) * (b - a);
    let center = convert::<T>(0.5) * (a + b);
    let f_center = f(center)?;
    let mut res_k = convert::<T>(WGK[7]) * f_center;
    let mut res_g = convert::<T>(WG[3]) * f_center;
    let mut res_abs = res_k.abs();
    let mut samples = [T::zero(); 15];
    samples[7] = f_center;
    for j in 0..7 {
        let x = convert::<T>(XGK[j]) * half;
        let f1 = f(center - x)?;
        let f2 = f(center + x)?;
        samples[j] = f1;
        samples[14 - j] = f2;
        let w = convert::<T>(WGK[j]);
        res_k += w * (f1 + f2);
        res_abs += w * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += convert::<T>(WG[j / 2]) * (f1 + f2);
        }
    }
    let mean = res_k * convert(0.5);
    let mut res_asc = convert::<T>(WGK[7]) * (f_center - mean).abs();
    for j in 0..7 {
        let w = convert::<T>(WGK[j]);
        res_asc += w * ((samples[j] - mean).abs() + (samples[14 - j] - mean).abs());
    }
    let value = res_k * half;
    debug_assert!(
        value.to_f64().map_or(true, |v| v.is_finite()),
        "gk15 non-finite value on [{a:?}, {b:?}]"
    );
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc > T::zero() && err > T::zero() {
        let scale = (convert::<T>(200.0) * err / res_asc).powf(convert(1.5));
        err = if scale < T::one() {
            res_asc * scale
        } else {
            res_asc
        };
    }
    let tiny = T::min_positive_value() / (convert::<T>(50.0) * T::epsilon());
    if res_abs > tiny {
        let min_err = convert::<T>(50.0) * T::epsilon() * res_abs;
        if min_err > err {
            err = min_err;
        }
    }
    Ok((value, err))
}

/// Integrate `f` over the union of segments defined by `breakpoints`
/// (strictly increasing). Segments share one panel budget and one global
/// tolerance, so effort flows to wherever the integrand is hard.
pub(crate) fn integrate_segments<T: Real, F>(
    f: &F,
    breakpoints: &[T],
    cfg: &QuadConfig<T>,
) -> Result<T>
where
    F: Fn(T) -> Result<T>,
{
    assert!(breakpoints.len() >= 2, "need at least one segment");
    let mut heap: BinaryHeap<Panel<T>> = BinaryHeap::new();
    // panels bisected down to floating-point resolution live here
    let mut frozen: Vec<Panel<T>> = Vec::new();
    let mut total_value = T::zero();
    let mut total_error = T::zero();
    let mut panels = 0usize;
    let whole_span: T = breakpoints[breakpoints.len() - 1] - breakpoints[0];
    for seg in breakpoints.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        if !(b > a) {
            continue;
        }
        // narrow resonance-ladder segments start with a single panel
        let init = if b - a < whole_span * convert(1e-6) {
            1
        } else {
            cfg.initial_per_segment.max(1)
        };
        let step = (b - a) / convert(init as f64);
        for i in 0..init {
            let pa = a + step * convert(i as f64);
            let pb = if i + 1 == init {
                b
            } else {
                a + step * convert((i + 1) as f64)
            };
            let (v, e) = gk15(f, pa, pb)?;
            total_value += v;
            total_error += e;
            panels += 1;
            heap.push(Panel {
                a: pa,
                b: pb,
                value: v,
                error: e,
            });
        }
    }

    loop {
        let target = (cfg.rel_tol * total_value.abs()).max(cfg.abs_tol);
        if total_error <= target || panels + 2 > cfg.max_panels || heap.is_empty() {
            break;
        }
        let worst = heap.pop().expect("heap cannot be empty while refining");
        let mid = convert::<T>(0.5) * (worst.a + worst.b);
        if !(worst.a < mid && mid < worst.b) {
            // interval at floating-point resolution; set it aside
            frozen.push(worst);
            continue;
        }
        total_value -= worst.value;
        total_error -= worst.error;
        for (pa, pb) in [(worst.a, mid), (mid, worst.b)] {
            let (v, e) = gk15(f, pa, pb)?;
            total_value += v;
            total_error += e;
            panels += 1;
            heap.push(Panel {
                a: pa,
                b: pb,
                value: v,
                error: e,
            });
        }
    }

    // deterministic final accumulation: left-to-right compensated sum
    let mut ordered: Vec<Panel<T>> = heap.into_vec();
    ordered.extend(frozen);
    ordered.sort_by(|p, q| p.a.partial_cmp(&q.a).unwrap_or(Ordering::Equal));
    let mut sum = T::zero();
    let mut comp = T::zero();
    let mut residual = T::zero();
    for p in &ordered {
        let y = p.value - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        residual += p.error;
    }
    let target = (cfg.rel_tol * sum.abs()).max(cfg.abs_tol);
    if residual > target * convert(4.0) {
        return Err(Error::QuadratureNotConverged {
            residual: residual.to_f64().unwrap_or(f64::NAN),
            panels,
        });
    }
    Ok(sum)
}

#[cfg(test)]
fn integrate<T: Real, F>(f: &F, a: T, b: T, cfg: &QuadConfig<T>) -> Result<T>
where
    F: Fn(T) -> Result<T>,
{
    integrate_segments(f, &[a, b], cfg)
}
