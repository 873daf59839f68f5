//! Adaptive Dormand–Prince 5(4) integrator for autonomous 3-D systems.

use nalgebra::Vector3;

use crate::error::{Error, Result};

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `y' = f(y)` from parameter 0 to `span` (either sign).
pub fn integrate<F>(f: F, y0: Vector3<f64>, span: f64, tol: f64) -> Result<Vector3<f64>>
where
    F: Fn(&Vector3<f64>) -> Result<Vector3<f64>>,
{
    if span == 0.0 {
        return Ok(y0);
    }
    let dir = span.signum();
    let total = span.abs();
    let mut t = 0.0;
    let mut y = y0;
    let mut h = (total / 16.0).min(0.01);
    let mut k1 = f(&y)?;
    let mut steps = 0usize;
    while t < total {
        steps += 1;
        if steps > 200_000 {
            return Err(Error::Solver {
                stage: "rarefaction ode",
                iterations: steps,
                residual: total - t,
            });
        }
        if t + h > total {
            h = total - t;
        }
        let hs = h * dir;
        let k2 = f(&(y + hs * A21 * k1))?;
        let k3 = f(&(y + hs * (A31 * k1 + A32 * k2)))?;
        let k4 = f(&(y + hs * (A41 * k1 + A42 * k2 + A43 * k3)))?;
        let k5 = f(&(y + hs * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4)))?;
        let k6 = f(&(y + hs * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5)))?;
        let y_new = y + hs * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
        let k7 = f(&y_new)?;
        let err_vec = hs * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
        let mut err: f64 = 0.0;
        for i in 0..3 {
            let sc = tol + tol * y[i].abs().max(y_new[i].abs());
            err = err.max((err_vec[i] / sc).abs());
        }
        if err <= 1.0 {
            t += h;
            y = y_new;
            k1 = k7;
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
        if h < 1e-14 * total {
            return Err(Error::Solver {
                stage: "rarefaction ode",
                iterations: steps,
                residual: err,
            });
        }
    }
    Ok(y)
}
