//! Classical fixed-step Runge-Kutta.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// One classical RK4 step of `s' = rhs(t, s)` from `t` to `t + h_step`.
///
/// A non-finite result is reported as [`Error::Diverged`] at `t + h_step`.
pub fn rk4_step<F>(rhs: F, t: f64, s: &DVector<f64>, h_step: f64) -> Result<DVector<f64>>
where
    F: Fn(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    if !(h_step > 0.0 && h_step.is_finite()) {
        return Err(Error::config(format!(
            "integration step must be positive, got {h_step}"
        )));
    }
    let half = 0.5 * h_step;
    let k1 = rhs(t, s)?;
    let k2 = rhs(t + half, &(s + &k1 * half))?;
    let k3 = rhs(t + half, &(s + &k2 * half))?;
    let k4 = rhs(t + h_step, &(s + &k3 * h_step))?;
    let next = s + (k1 + (k2 + k3) * 2.0 + k4) * (h_step / 6.0);
    if next.iter().all(|v| v.is_finite()) {
        Ok(next)
    } else {
        Err(Error::Diverged { time: t + h_step })
    }
}
