//! Error function of a complex argument.
//!
//! Two evaluators cover the plane:
//!
//! * the Maclaurin series `erf z = (2/√π) Σ (−1)^k z^{2k+1} / (k!(2k+1))`,
//!   used where `|Re z|` is small so the alternating terms do not cancel badly;
//! * the Laplace continued fraction of the Faddeeva function
//!   `w(ζ) = e^{−ζ²} erfc(−iζ)` for `Im ζ` large or `|ζ|` large, combined with
//!   `erf z = 1 − e^{−z²} w(iz)`.
//!
//! The symmetries `erf(−z) = −erf(z)` and `erf(z̄) = conj(erf z)` reduce every
//! argument to the first quadrant.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest `|Im z|` accepted by [`erf_complex`].
pub const MAX_IMAG: f64 = 30.0;

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;
const CF_MAX_TERMS: usize = 20_000;

/// `erf z` with absolute error below 1e−10 where `|erf z| ≤ 1`, and relative
/// error below 1e−10 elsewhere.
pub fn erf_complex(z: Complex64) -> Result<Complex64> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Parameter(format!("erf argument must be finite (got {z})")));
    }
    if z.im.abs() > MAX_IMAG {
        return Err(Error::Parameter(format!(
            "erf argument {z} outside |Im z| <= {MAX_IMAG}"
        )));
    }
    let flip_re = z.re < 0.0;
    let flip_im = z.im < 0.0;
    let q = Complex64::new(z.re.abs(), z.im.abs());
    let mut r = erf_first_quadrant(q);
    if flip_im {
        r = r.conj();
    }
    if flip_re {
        // erf(−z̄) = −conj(erf z)
        r = -r.conj();
    }
    if !(r.re.is_finite() && r.im.is_finite()) {
        return Err(Error::Parameter(format!("erf({z}) overflows")));
    }
    Ok(r)
}

fn erf_first_quadrant(z: Complex64) -> Complex64 {
    if z.re < 1.5 && z.norm() < 6.0 {
        erf_series(z)
    } else {
        let one = Complex64::new(1.0, 0.0);
        one - (-(z * z)).exp() * faddeeva(Complex64::new(-z.im, z.re))
    }
}

/// Maclaurin series, summed until the terms stop contributing.
fn erf_series(z: Complex64) -> Complex64 {
    let z2 = z * z;
    let mut term = z;
    let mut sum = z;
    let mut k = 0usize;
    loop {
        k += 1;
        term *= -z2 / k as f64;
        let add = term / (2 * k + 1) as f64;
        sum += add;
        if k > 4 && add.norm() <= 1e-17 * sum.norm() {
            break;
        }
        if k > 4000 {
            break;
        }
    }
    sum * FRAC_2_SQRT_PI
}

/// Faddeeva function `w(ζ) = e^{−ζ²} erfc(−iζ)` for `Im ζ ≥ 0`.
pub fn faddeeva(zeta: Complex64) -> Complex64 {
    debug_assert!(zeta.im >= 0.0);
    if zeta.im >= 1.5 || zeta.norm() >= 6.0 {
        faddeeva_cf(zeta)
    } else {
        // erfc(−iζ) with −iζ = Im ζ − i Re ζ; the real part stays below 1.5.
        let one = Complex64::new(1.0, 0.0);
        (-(zeta * zeta)).exp() * (one - erf_series(Complex64::new(zeta.im, -zeta.re)))
    }
}

/// Laplace continued fraction
/// `w(ζ) = (i/√π) / (ζ − ½/(ζ − 1/(ζ − (3/2)/(ζ − …))))`, evaluated with
/// the modified Lentz algorithm.
fn faddeeva_cf(zeta: Complex64) -> Complex64 {
    let tiny = Complex64::new(1e-300, 0.0);
    let mut f = zeta;
    let mut c = f;
    let mut d = Complex64::new(0.0, 0.0);
    for n in 1..CF_MAX_TERMS {
        let a = -(n as f64) * 0.5;
        d = zeta + d * a;
        if d.norm() == 0.0 {
            d = tiny;
        }
        c = zeta + c.inv() * a;
        if c.norm() == 0.0 {
            c = tiny;
        }
        d = d.inv();
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).norm() < 1e-16 {
            break;
        }
    }
    Complex64::new(0.0, 1.0 / PI.sqrt()) / f
}

/// `e^{−Y²} erf(X − iY)` for `X ≥ 0`, finite for any `Y`.
///
/// The Gaussian factor is folded in analytically:
/// `e^{−Y²} erf(X − iY) = e^{−Y²} − e^{−X²} e^{2iXY} w(Y + iX)`.
pub(crate) fn gaussian_erf(x: f64, y: f64) -> Result<Complex64> {
    let z = Complex64::new(x, -y);
    if y.abs() <= 5.0 {
        return Ok(erf_complex(z)? * (-(y * y)).exp());
    }
    if x < 0.0 {
        // Reflect: erf(X − iY) = −erf(−X + iY) = −conj(erf(−X − iY)).
        return Ok(-gaussian_erf(-x, -y)?.conj());
    }
    let w = if y >= 0.0 {
        faddeeva(Complex64::new(y, x))
    } else {
        // w(−ζ̄) = conj(w(ζ)) keeps the argument in the upper half plane.
        faddeeva(Complex64::new(-y, x)).conj()
    };
    let phase = Complex64::from_polar((-(x * x)).exp(), 2.0 * x * y);
    Ok(Complex64::new((-(y * y)).exp(), 0.0) - phase * w)
}
