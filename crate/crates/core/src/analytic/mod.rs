//! Closed-form response of the free Klein-Gordon equation to a Gaussian
//! initial disturbance at rest.
//!
//! On `[−L, L]` the initial profile `ψ₀(x) = β exp(−((x − x₀)/a)²)` is
//! expanded in the orthonormal Fourier series with wavenumbers `k_n = nπ/L`:
//!
//! ```text
//! ψ(x, t) = Σ_{n=−N/2}^{N/2} C_n e^{i k_n x} cos(ω_n t),   ω_n = √(c²k_n² + ω_c²)
//! C_n = (1/2L) ∫ ψ₀(x) e^{−i k_n x} dx
//!     = (1/2L) β (√π a/2) e^{−k_n²a²/4 − i k_n x₀}
//!       [erf((L + x₀)/a − i k_n a/2) + erf((L − x₀)/a + i k_n a/2)]
//! ```
//!
//! The `e^{−k_n²a²/4}` factor is folded into the error functions so high modes
//! neither overflow nor lose precision.

mod erf;

pub use erf::{erf_complex, faddeeva, MAX_IMAG};

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::config::PhysicalParams;
use crate::error::{Error, Result};
use crate::stats::{trapezoid, DensitySeries};

/// Default number of modes `N`.
pub const DEFAULT_MODES: usize = 4096;

/// Largest admissible relative size of the first omitted mode.
const TRUNCATION_TAIL: f64 = 1e-12;

/// Parameters of the Gaussian response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticParams {
    /// Amplitude of the initial disturbance.
    pub beta_amp: f64,
    /// Gaussian width.
    pub a: f64,
    /// Centre of the disturbance.
    pub x_p0: f64,
    /// Half-width `L` of the domain.
    pub half_length: f64,
    /// Truncation `N`; modes `−N/2..=N/2` are kept.
    pub n_modes: usize,
    pub c: f64,
    pub omega_c: f64,
}

impl AnalyticParams {
    /// Validated parameters.
    ///
    /// Fails when the truncated spectrum would drop modes whose Gaussian
    /// envelope `exp(−(k a/2)²)` exceeds 1e−12.
    pub fn new(
        beta_amp: f64,
        a: f64,
        x_p0: f64,
        half_length: f64,
        n_modes: usize,
        physics: &PhysicalParams,
    ) -> Result<AnalyticParams> {
        let p = AnalyticParams {
            beta_amp,
            a,
            x_p0,
            half_length,
            n_modes,
            c: physics.c,
            omega_c: physics.omega_c,
        };
        p.check()?;
        Ok(p)
    }

    fn check(&self) -> Result<()> {
        let finite = [self.beta_amp, self.a, self.x_p0, self.half_length, self.c, self.omega_c];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("analytic parameters must be finite".into()));
        }
        if !(self.half_length > 0.0) {
            return Err(Error::Parameter(format!(
                "half length must be positive (got {})",
                self.half_length
            )));
        }
        if !(self.a > 0.0) {
            return Err(Error::Parameter(format!(
                "gaussian width must be positive (got {})",
                self.a
            )));
        }
        if !(self.c > 0.0) || self.omega_c < 0.0 {
            return Err(Error::Parameter("c must be positive and omega_c non-negative".into()));
        }
        if self.n_modes < 2 || self.n_modes % 2 != 0 {
            return Err(Error::Parameter(format!(
                "mode count must be even and at least 2 (got {})",
                self.n_modes
            )));
        }
        if self.x_p0.abs() >= self.half_length {
            return Err(Error::Parameter(format!(
                "disturbance centre {} outside (-{L}, {L})",
                self.x_p0,
                L = self.half_length
            )));
        }
        let y = 0.5 * self.wavenumber(self.n_modes as i64 / 2 + 1) * self.a;
        if (-(y * y)).exp() > TRUNCATION_TAIL {
            return Err(Error::Parameter(format!(
                "{} modes truncate the spectrum of a gaussian of width {} on half length {}",
                self.n_modes, self.a, self.half_length
            )));
        }
        Ok(())
    }

    /// `k_n = nπ/L`.
    pub fn wavenumber(&self, n: i64) -> f64 {
        n as f64 * PI / self.half_length
    }

    /// `ω_n = √(c²k_n² + ω_c²)`.
    pub fn frequency(&self, n: i64) -> f64 {
        let ck = self.c * self.wavenumber(n);
        (ck * ck + self.omega_c * self.omega_c).sqrt()
    }

    /// `ψ₀(x)`.
    pub fn initial(&self, x: f64) -> f64 {
        let s = (x - self.x_p0) / self.a;
        self.beta_amp * (-s * s).exp()
    }
}

/// Fourier coefficient `C_n`, for `|n| ≤ N/2`.
pub fn fourier_coefficient(n: i64, params: &AnalyticParams) -> Result<Complex64> {
    if n.unsigned_abs() > params.n_modes as u64 / 2 {
        return Err(Error::Parameter(format!(
            "mode {n} outside the truncation |n| <= {}",
            params.n_modes / 2
        )));
    }
    let l = params.half_length;
    let a = params.a;
    let k = params.wavenumber(n);
    let y = 0.5 * k * a;
    let x1 = (l + params.x_p0) / a;
    let x2 = (l - params.x_p0) / a;
    // e^{−y²}[erf(x1 − iy) + erf(x2 + iy)]
    let bracket = erf::gaussian_erf(x1, y)? + erf::gaussian_erf(x2, -y)?;
    let prefactor = params.beta_amp * PI.sqrt() * a / (4.0 * l);
    let shift = Complex64::from_polar(1.0, -k * params.x_p0);
    Ok(bracket * shift * prefactor)
}

/// Mode amplitudes of one parameter set, computed once.
#[derive(Debug, Clone)]
pub struct AnalyticSolution {
    params: AnalyticParams,
    /// `C_n` for `n = −N/2..=N/2`.
    coefficients: Vec<Complex64>,
    wavenumbers: Vec<f64>,
    frequencies: Vec<f64>,
}

impl AnalyticSolution {
    pub fn new(params: AnalyticParams) -> Result<AnalyticSolution> {
        params.check()?;
        let half = params.n_modes as i64 / 2;
        let modes: Vec<i64> = (-half..=half).collect();
        let coefficients = modes
            .iter()
            .map(|&n| fourier_coefficient(n, &params))
            .collect::<Result<Vec<_>>>()?;
        Ok(AnalyticSolution {
            params,
            coefficients,
            wavenumbers: modes.iter().map(|&n| params.wavenumber(n)).collect(),
            frequencies: modes.iter().map(|&n| params.frequency(n)).collect(),
        })
    }

    pub fn params(&self) -> &AnalyticParams {
        &self.params
    }

    /// `C_n`, or `None` outside the truncation.
    pub fn coefficient(&self, n: i64) -> Option<Complex64> {
        let half = self.params.n_modes as i64 / 2;
        (n.abs() <= half).then(|| self.coefficients[(n + half) as usize])
    }

    /// `ψ(x, t)` for `|x| ≤ L`.
    pub fn psi(&self, x: f64, t: f64) -> Result<Complex64> {
        let l = self.params.half_length;
        if !(x.abs() <= l) || !t.is_finite() {
            return Err(Error::OutOfDomain { x, lo: -l, hi: l });
        }
        let mut sum = Complex64::new(0.0, 0.0);
        for ((c, &k), &w) in self.coefficients.iter().zip(&self.wavenumbers).zip(&self.frequencies) {
            let (s, co) = (k * x).sin_cos();
            sum += c * Complex64::new(co, s) * (w * t).cos();
        }
        Ok(sum)
    }

    /// Normalized `|ψ(·, t)|²` on `xs`.
    pub fn born_density(&self, xs: &[f64], t: f64) -> Result<Vec<f64>> {
        let mut rho = xs
            .par_iter()
            .map(|&x| self.psi(x, t).map(|p| p.norm_sqr()))
            .collect::<Result<Vec<f64>>>()?;
        let mass = trapezoid(xs, &rho)?;
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::Normalization(format!("|psi|^2 has integral {mass} at t = {t}")));
        }
        for r in &mut rho {
            *r /= mass;
        }
        Ok(rho)
    }

    /// Born densities at each of `times` on a uniform grid `xs`.
    pub fn born_series(&self, xs: &[f64], times: &[f64]) -> Result<DensitySeries> {
        let rows = times
            .iter()
            .map(|&t| self.born_density(xs, t))
            .collect::<Result<Vec<_>>>()?;
        DensitySeries::new(times.to_vec(), xs.to_vec(), rows)
    }

    /// `∫ ½(ψ_t² + c²ψ_x² + ω_c²ψ²) dx` from the mode amplitudes.
    ///
    /// Kinetic and potential parts are summed separately so the result
    /// exercises the time dependence of each.
    pub fn energy_at(&self, t: f64) -> f64 {
        let l = self.params.half_length;
        let mut kinetic = 0.0;
        let mut potential = 0.0;
        for (c, &w) in self.coefficients.iter().zip(&self.frequencies) {
            let (s, co) = (w * t).sin_cos();
            let m = c.norm_sqr() * w * w;
            kinetic += m * s * s;
            potential += m * co * co;
        }
        l * (kinetic + potential)
    }
}

/// `ψ(x, t)`; builds the coefficients on every call, so prefer
/// [`AnalyticSolution`] for repeated evaluation.
pub fn psi(x: f64, t: f64, params: &AnalyticParams) -> Result<Complex64> {
    AnalyticSolution::new(*params)?.psi(x, t)
}

/// Normalized Born density `|ψ(·, t)|²` on `xs`.
pub fn born_density(xs: &[f64], t: f64, params: &AnalyticParams) -> Result<Vec<f64>> {
    AnalyticSolution::new(*params)?.born_density(xs, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(a: f64, x0: f64, l: f64, n: usize) -> AnalyticParams {
        AnalyticParams::new(1.0, a, x0, l, n, &PhysicalParams::compton()).unwrap()
    }

    /// Composite Simpson rule, the independent oracle for the coefficients.
    fn simpson(f: impl Fn(f64) -> Complex64, lo: f64, hi: f64, n: usize) -> Complex64 {
        let h = (hi - lo) / n as f64;
        let mut s = f(lo) + f(hi);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += f(lo + i as f64 * h) * w;
        }
        s * (h / 3.0)
    }

    #[test]
    fn zeroth_coefficient_is_real_mass() {
        let p = params(0.5, 0.0, 10.0, 256);
        let c0 = fourier_coefficient(0, &p).unwrap();
        let expected = PI.sqrt() * 0.5 / 20.0 * erf_complex(Complex64::new(20.0, 0.0)).unwrap().re;
        assert!(c0.im == 0.0);
        assert!((c0.re - expected).abs() < 1e-15);
    }

    #[test]
    fn coefficients_match_quadrature() {
        let p = params(0.7, 1.3, 6.0, 128);
        for n in [-64, -17, -1, 0, 3, 40, 64] {
            let k = p.wavenumber(n);
            let q = simpson(
                |x| Complex64::from_polar(p.initial(x), -k * x),
                -p.half_length,
                p.half_length,
                20_000,
            ) / (2.0 * p.half_length);
            let c = fourier_coefficient(n, &p).unwrap();
            assert!((c - q).norm() < 1e-12, "n = {n}: {c} vs {q}");
        }
    }

    #[test]
    fn conjugate_symmetry() {
        let p = params(1.0, -2.0, 20.0, 512);
        for n in [1, 5, 100, 256] {
            let a = fourier_coefficient(n, &p).unwrap();
            let b = fourier_coefficient(-n, &p).unwrap();
            assert!((a - b.conj()).norm() <= 1e-15 * a.norm().max(1e-300));
        }
    }

    #[test]
    fn truncation_is_checked() {
        let phys = PhysicalParams::compton();
        assert!(AnalyticParams::new(1.0, 0.01, 0.0, 100.0, 64, &phys).is_err());
        assert!(AnalyticParams::new(1.0, 1.0, 0.0, 100.0, 3, &phys).is_err());
        assert!(AnalyticParams::new(1.0, 1.0, 0.0, -1.0, 64, &phys).is_err());
        assert!(AnalyticParams::new(1.0, 1.0, 0.0, 100.0, 4096, &phys).is_ok());
        assert!(fourier_coefficient(2049, &params(1.0, 0.0, 100.0, 4096)).is_err());
    }

    #[test]
    fn reconstructs_initial_condition() {
        let p = params(1.0, 0.5, 30.0, 1024);
        let sol = AnalyticSolution::new(p).unwrap();
        for i in 0..=120 {
            let x = -30.0 + i as f64 * 0.5;
            let v = sol.psi(x, 0.0).unwrap();
            assert!((v.re - p.initial(x)).abs() < 1e-8, "x = {x}");
            assert!(v.im.abs() < 1e-10);
        }
    }

    #[test]
    fn even_data_stays_even() {
        let sol = AnalyticSolution::new(params(1.0, 0.0, 30.0, 1024)).unwrap();
        for t in [0.3, 2.0, 7.7] {
            for x in [0.1, 1.0, 4.5, 12.0] {
                let a = sol.psi(x, t).unwrap();
                let b = sol.psi(-x, t).unwrap();
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn out_of_domain_rejected() {
        let sol = AnalyticSolution::new(params(1.0, 0.0, 10.0, 256)).unwrap();
        assert!(matches!(sol.psi(10.5, 0.0), Err(Error::OutOfDomain { .. })));
        assert!(sol.psi(10.0, 0.0).is_ok());
    }

    #[test]
    fn born_density_is_normalized_and_peaks_at_centre() {
        let p = params(1.0, 2.0, 20.0, 512);
        let xs: Vec<f64> = (0..=400).map(|i| -20.0 + 0.1 * i as f64).collect();
        let rho = born_density(&xs, 0.0, &p).unwrap();
        assert!(rho.iter().all(|&r| r >= 0.0));
        assert!((trapezoid(&xs, &rho).unwrap() - 1.0).abs() < 1e-10);
        let peak = rho.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert!((xs[peak] - 2.0).abs() < 1e-9);
        let zero = AnalyticParams { beta_amp: 0.0, ..p };
        assert!(matches!(born_density(&xs, 0.0, &zero), Err(Error::Normalization(_))));
    }

    #[test]
    fn energy_is_constant() {
        let sol = AnalyticSolution::new(params(1.0, 0.0, 40.0, 1024)).unwrap();
        let e0 = sol.energy_at(0.0);
        for t in [0.37, 5.0, 91.3] {
            assert!((sol.energy_at(t) - e0).abs() <= 1e-13 * e0);
        }
    }
}
