//! Scaled complementary error function, used by the closed-form
//! exponential–Gaussian convolution of the g² model.

use crate::{convert, Real};

/// erfcx(x) = e^{x²}·erfc(x) for x ≥ 0.
///
/// Maclaurin series for erf below 2, Laplace continued fraction above;
/// ~1e-14 relative accuracy in f64 over the full range.
pub(crate) fn erfcx<T: Real>(x: T) -> T {
    debug_assert!(x >= T::zero());
    let two = convert::<T>(2.0);
    if x < two {
        (x * x).exp() * (T::one() - erf_series(x))
    } else {
        // sqrt(pi) e^{x^2} erfc(x) = 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
        let mut f = x;
        for k in (1..=60).rev() {
            f = x + convert::<T>(k as f64 / 2.0) / f;
        }
        (T::FRAC_2_SQRT_PI() * convert(0.5)) / f
    }
}

fn erf_series<T: Real>(x: T) -> T {
    // erf(x) = (2/sqrt(pi)) sum (-1)^n x^(2n+1) / (n! (2n+1))
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 1u32;
    loop {
        term = term * (-x2) / convert(n as f64);
        let contrib = term / convert((2 * n + 1) as f64);
        let next = sum + contrib;
        if next == sum || n > 200 {
            break;
        }
        sum = next;
        n += 1;
    }
    T::FRAC_2_SQRT_PI() * sum
}
