//! Relativistic guidance law `γ ẋ_p = −α ∂φ/∂x` and its Runge-Kutta integrator.
//!
//! The left-hand side is read as the proper velocity `u = γẋ`, which gives the
//! explicit coordinate velocity `ẋ = u/√(1 + u²/c²)`. The gradient is taken in
//! the lab frame at the instantaneous particle position.

use crate::config::{Grid, PhysicalParams};
use crate::error::{Error, Result};
use crate::wavefield::{gradient_on, FieldLevel};

/// Kinematic state of the particle at one time level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleState {
    pub x_p: f64,
    /// Proper velocity `γẋ`.
    pub u: f64,
    /// `ẋ/c`.
    pub beta: f64,
    pub gamma: f64,
    pub t: f64,
}

impl ParticleState {
    /// Particle held at rest at `x`.
    pub fn at_rest(x: f64, t: f64) -> Self {
        ParticleState {
            x_p: x,
            u: 0.0,
            beta: 0.0,
            gamma: 1.0,
            t,
        }
    }

    /// State with proper velocity `u`, with `beta` and `gamma` derived from it.
    pub fn from_proper_velocity(x: f64, u: f64, t: f64, c: f64) -> Self {
        let w = u / c;
        ParticleState {
            x_p: x,
            u,
            beta: coordinate_velocity(u, c) / c,
            gamma: (1.0 + w * w).sqrt(),
            t,
        }
    }
}

/// `u = −α ∂φ/∂x`.
#[inline]
pub fn proper_velocity(gradient: f64, alpha: f64) -> f64 {
    -alpha * gradient
}

/// `ẋ = u/√(1 + u²/c²)`, bounded strictly below `c` in magnitude.
///
/// For `|u| ≳ 10⁸ c` the exact value rounds to `±c`; it is then replaced by
/// the nearest representable speed below `c`.
#[inline]
pub fn coordinate_velocity(u: f64, c: f64) -> f64 {
    let w = u / c;
    // Past 1e8 the exact speed rounds to c, and w² may overflow.
    let v = if w.abs() > 1e8 {
        c.copysign(w)
    } else {
        c * (w / (1.0 + w * w).sqrt())
    };
    if v.abs() < c {
        v
    } else if w.is_nan() {
        f64::NAN
    } else {
        c.next_down().copysign(u)
    }
}

/// Interpolates the gradient linearly in time between two field levels.
struct GuidingField<'a> {
    grid: &'a Grid,
    level_n: &'a [f64],
    level_np1: &'a [f64],
    alpha: f64,
    c: f64,
}

impl GuidingField<'_> {
    fn velocity(&self, x: f64, theta: f64) -> Result<f64> {
        let g = if theta == 0.0 {
            gradient_on(self.grid, self.level_n, x)?
        } else if theta == 1.0 {
            gradient_on(self.grid, self.level_np1, x)?
        } else {
            let g0 = gradient_on(self.grid, self.level_n, x)?;
            let g1 = gradient_on(self.grid, self.level_np1, x)?;
            (1.0 - theta) * g0 + theta * g1
        };
        Ok(coordinate_velocity(proper_velocity(g, self.alpha), self.c))
    }
}

/// Advances the particle from `field_n.t` to `field_np1.t` with classic RK4.
///
/// Stage gradients between the two levels are linearly interpolated in time.
/// The returned state carries `u`, `beta` and `gamma` evaluated from the
/// gradient of `field_np1` at the new position.
pub fn advance(
    state: &ParticleState,
    field_n: FieldLevel<'_>,
    field_np1: FieldLevel<'_>,
    params: &PhysicalParams,
    step: usize,
) -> Result<ParticleState> {
    let dt = field_np1.t - field_n.t;
    let grid = field_n.grid;
    let breach = |x: f64| Error::LightConeBreach { step, x };
    let field = GuidingField {
        grid,
        level_n: field_n.phi,
        level_np1: field_np1.phi,
        alpha: params.alpha,
        c: params.c,
    };
    let eval = |x: f64, theta: f64| field.velocity(x, theta).map_err(|_| breach(x));

    let x = state.x_p;
    let k1 = eval(x, 0.0)?;
    let k2 = eval(x + 0.5 * dt * k1, 0.5)?;
    let k3 = eval(x + 0.5 * dt * k2, 0.5)?;
    let k4 = eval(x + dt * k3, 1.0)?;
    let x_new = x + dt / 6.0 * (((k1 + 2.0 * k2) + 2.0 * k3) + k4);

    let g = gradient_on(grid, field_np1.phi, x_new).map_err(|_| breach(x_new))?;
    let out = ParticleState::from_proper_velocity(x_new, proper_velocity(g, params.alpha), field_np1.t, params.c);
    if !(out.beta.abs() < 1.0) {
        return Err(Error::Causality {
            t: out.t,
            beta: out.beta,
        });
    }
    Ok(out)
}
