//! Polytropic gamma-law gas in Lagrangian coordinates.
//!
//! Conserved variables are `(tau, w, E)`: specific volume, velocity and total
//! specific energy `E = w^2/2 + e`. The mathematical entropy is `eta = -S`
//! with zero entropy flux, so the relative flux reduces to
//! `q(u; v) = -grad eta(v) . (f(u) - f(v))`.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Thermodynamic constants of the gas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasParameters {
    pub gamma: f64,
    pub c_v: f64,
    pub r_bar: f64,
    pub k_bar: f64,
}

impl GasParameters {
    /// Builds the parameters with `c_v = r_bar / (gamma - 1)`.
    pub fn new(gamma: f64, r_bar: f64, k_bar: f64) -> Result<Self> {
        if !(gamma > 1.0) || !gamma.is_finite() {
            return Err(Error::Config(format!("gamma must exceed 1, got {gamma}")));
        }
        if !(r_bar > 0.0) || !(k_bar > 0.0) {
            return Err(Error::Config(format!(
                "r_bar and k_bar must be positive, got {r_bar}, {k_bar}"
            )));
        }
        Ok(Self {
            gamma,
            c_v: r_bar / (gamma - 1.0),
            r_bar,
            k_bar,
        })
    }

    /// Builds the parameters from all four constants, rejecting an inconsistent `c_v`.
    pub fn with_cv(gamma: f64, c_v: f64, r_bar: f64, k_bar: f64) -> Result<Self> {
        let g = Self::new(gamma, r_bar, k_bar)?;
        if !(c_v > 0.0) || ((c_v - g.c_v) / g.c_v).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "c_v = {c_v} is inconsistent with r_bar/(gamma-1) = {}",
                g.c_v
            )));
        }
        Ok(g)
    }
}

impl Default for GasParameters {
    fn default() -> Self {
        Self::new(1.4, 1.0, 1.0).expect("default gas is valid")
    }
}

/// A point of the state space in conserved variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct State {
    pub tau: f64,
    pub w: f64,
    pub e_total: f64,
}

impl From<[f64; 3]> for State {
    fn from(a: [f64; 3]) -> Self {
        State::new(a[0], a[1], a[2])
    }
}

impl From<State> for [f64; 3] {
    fn from(s: State) -> Self {
        [s.tau, s.w, s.e_total]
    }
}

impl State {
    pub const fn new(tau: f64, w: f64, e_total: f64) -> Self {
        Self { tau, w, e_total }
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.tau, self.w, self.e_total)
    }

    /// Builds a state from specific volume, velocity and pressure.
    pub fn from_primitive(tau: f64, w: f64, p: f64, gas: &GasParameters) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::Domain { field: "tau", value: tau });
        }
        if !(p > 0.0) {
            return Err(Error::Domain { field: "p", value: p });
        }
        Ok(Self::new(tau, w, 0.5 * w * w + p * tau / (gas.gamma - 1.0)))
    }

    pub fn internal_energy(&self) -> f64 {
        self.e_total - 0.5 * self.w * self.w
    }

    /// Euclidean distance in conserved variables.
    pub fn distance(&self, other: &State) -> f64 {
        (self.to_vector() - other.to_vector()).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.tau.is_finite() && self.w.is_finite() && self.e_total.is_finite()
    }

    fn check(&self) -> Result<f64> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::Domain {
                field: "tau",
                value: self.tau,
            });
        }
        let e = self.internal_energy();
        if !(e > 0.0) || !e.is_finite() {
            return Err(Error::Domain {
                field: "internal_energy",
                value: e,
            });
        }
        Ok(e)
    }

    /// Pressure; assumes a valid state.
    pub fn pressure(&self, gas: &GasParameters) -> f64 {
        (gas.gamma - 1.0) * self.internal_energy() / self.tau
    }

    /// Temperature; assumes a valid state.
    pub fn temperature(&self, gas: &GasParameters) -> f64 {
        self.internal_energy() / gas.c_v
    }

    /// Lagrangian sound speed `sqrt(gamma p / tau)`.
    pub fn sound_speed(&self, gas: &GasParameters) -> f64 {
        (gas.gamma * self.pressure(gas) / self.tau).sqrt()
    }
}

/// Derived thermodynamic quantities of a state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermoState {
    pub p: f64,
    pub theta: f64,
    pub s_entropy: f64,
    pub e_internal: f64,
}

pub fn complete_thermo(u: &State, gas: &GasParameters) -> Result<ThermoState> {
    let e = u.check()?;
    let p = (gas.gamma - 1.0) * e / u.tau;
    let theta = e / gas.c_v;
    let s_entropy = gas.c_v * (p * u.tau.powf(gas.gamma) / gas.k_bar).ln();
    Ok(ThermoState {
        p,
        theta,
        s_entropy,
        e_internal: e,
    })
}

/// Mathematical entropy `eta = -S`.
pub fn entropy(u: &State, gas: &GasParameters) -> Result<f64> {
    let e = u.check()?;
    Ok(gas.c_v
        * ((1.0 - gas.gamma) * u.tau.ln() - e.ln() + (gas.k_bar / (gas.gamma - 1.0)).ln()))
}

/// The entropy pair `(eta, q)`; the flux vanishes identically.
pub fn entropy_pair(u: &State, gas: &GasParameters) -> Result<(f64, f64)> {
    Ok((entropy(u, gas)?, 0.0))
}

/// Gradient of `eta` in conserved variables.
pub fn entropy_gradient(u: &State, gas: &GasParameters) -> Result<Vector3<f64>> {
    let e = u.check()?;
    Ok(Vector3::new(
        gas.c_v * (1.0 - gas.gamma) / u.tau,
        gas.c_v * u.w / e,
        -gas.c_v / e,
    ))
}

/// Hessian of `eta` in conserved variables.
pub fn eta_hessian(u: &State, gas: &GasParameters) -> Result<Matrix3<f64>> {
    let e = u.check()?;
    let cv = gas.c_v;
    let h_tt = cv * (gas.gamma - 1.0) / (u.tau * u.tau);
    let h_ww = cv / e + cv * u.w * u.w / (e * e);
    let h_we = -cv * u.w / (e * e);
    let h_ee = cv / (e * e);
    Ok(Matrix3::new(
        h_tt, 0.0, 0.0, //
        0.0, h_ww, h_we, //
        0.0, h_we, h_ee,
    ))
}

/// Smallest eigenvalue of the entropy Hessian.
pub fn min_hessian_eigenvalue(u: &State, gas: &GasParameters) -> Result<f64> {
    let h = eta_hessian(u, gas)?;
    Ok(SymmetricEigen::new(h).eigenvalues.min())
}

/// Flux `f(u) = (-w, p, w p)`.
pub fn flux(u: &State, gas: &GasParameters) -> Vector3<f64> {
    let p = u.pressure(gas);
    Vector3::new(-u.w, p, u.w * p)
}

/// Jacobian `Df(u)` in conserved variables.
pub fn flux_jacobian(u: &State, gas: &GasParameters) -> Matrix3<f64> {
    let p = u.pressure(gas);
    let gm1 = gas.gamma - 1.0;
    let p_tau = -p / u.tau;
    let p_w = -gm1 * u.w / u.tau;
    let p_e = gm1 / u.tau;
    Matrix3::new(
        0.0, -1.0, 0.0, //
        p_tau, p_w, p_e, //
        u.w * p_tau, p + u.w * p_w, u.w * p_e,
    )
}

/// `eta(u|v) = eta(u) - eta(v) - grad eta(v) . (u - v)`.
pub fn relative_entropy(u: &State, v: &State, gas: &GasParameters) -> Result<f64> {
    let du = u.to_vector() - v.to_vector();
    Ok(entropy(u, gas)? - entropy(v, gas)? - entropy_gradient(v, gas)?.dot(&du))
}

/// `q(u; v) = -grad eta(v) . (f(u) - f(v))` (the entropy flux itself is zero).
pub fn relative_flux(u: &State, v: &State, gas: &GasParameters) -> Result<f64> {
    u.check()?;
    let df = flux(u, gas) - flux(v, gas);
    Ok(-entropy_gradient(v, gas)?.dot(&df))
}

/// Axis-aligned working set in conserved variables with a reference state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateBox {
    pub lower: State,
    pub upper: State,
    pub reference: State,
    pub epsilon: f64,
}

impl Default for StateBox {
    fn default() -> Self {
        Self {
            lower: State::new(0.8, -0.3, 2.0),
            upper: State::new(1.25, 0.3, 3.0),
            reference: State::new(1.0, 0.0, 2.5),
            epsilon: 0.05,
        }
    }
}

impl StateBox {
    pub fn new(lower: State, upper: State, reference: State, epsilon: f64) -> Result<Self> {
        let b = Self {
            lower,
            upper,
            reference,
            epsilon,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let lo: [f64; 3] = self.lower.into();
        let hi: [f64; 3] = self.upper.into();
        let d: [f64; 3] = self.reference.into();
        for k in 0..3 {
            if !(lo[k] < hi[k]) {
                return Err(Error::Config(format!("empty box in component {k}")));
            }
            if !(lo[k] < d[k] && d[k] < hi[k]) {
                return Err(Error::Config(format!(
                    "reference state not strictly inside the box in component {k}"
                )));
            }
        }
        if !(self.lower.tau > 0.0) {
            return Err(Error::Config("box must have positive specific volume".into()));
        }
        if !(self.min_internal_energy() > 0.0) {
            return Err(Error::Config(
                "box contains states with non-positive internal energy".into(),
            ));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        Ok(())
    }

    pub fn contains(&self, u: &State) -> bool {
        (self.lower.tau..=self.upper.tau).contains(&u.tau)
            && (self.lower.w..=self.upper.w).contains(&u.w)
            && (self.lower.e_total..=self.upper.e_total).contains(&u.e_total)
    }

    fn max_w2(&self) -> f64 {
        self.lower.w.powi(2).max(self.upper.w.powi(2))
    }

    fn min_w2(&self) -> f64 {
        if self.lower.w <= 0.0 && self.upper.w >= 0.0 {
            0.0
        } else {
            self.lower.w.powi(2).min(self.upper.w.powi(2))
        }
    }

    pub fn min_internal_energy(&self) -> f64 {
        self.lower.e_total - 0.5 * self.max_w2()
    }

    pub fn max_internal_energy(&self) -> f64 {
        self.upper.e_total - 0.5 * self.min_w2()
    }

    pub fn inf_temperature(&self, gas: &GasParameters) -> f64 {
        self.min_internal_energy() / gas.c_v
    }

    /// `J = inf theta / 2`.
    pub fn j_constant(&self, gas: &GasParameters) -> f64 {
        0.5 * self.inf_temperature(gas)
    }

    /// Largest characteristic speed `|lambda_{1,3}|` attained in the box.
    pub fn max_sound_speed(&self, gas: &GasParameters) -> f64 {
        (gas.gamma * (gas.gamma - 1.0) * self.max_internal_energy()).sqrt() / self.lower.tau
    }

    /// Smallest `|lambda_{1,3}|` attained in the box.
    pub fn min_sound_speed(&self, gas: &GasParameters) -> f64 {
        (gas.gamma * (gas.gamma - 1.0) * self.min_internal_energy()).sqrt() / self.upper.tau
    }

    /// Uniform tensor grid with `n` points per axis (box corners included).
    pub fn grid(&self, n: usize) -> Vec<State> {
        let n = n.max(2);
        let lin = |a: f64, b: f64, k: usize| a + (b - a) * k as f64 / (n - 1) as f64;
        let mut out = Vec::with_capacity(n * n * n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    out.push(State::new(
                        lin(self.lower.tau, self.upper.tau, i),
                        lin(self.lower.w, self.upper.w, j),
                        lin(self.lower.e_total, self.upper.e_total, k),
                    ));
                }
            }
        }
        out
    }
}

/// Smallest `C*` with `|u - v|^2 / C* <= eta(u|v) <= C* |u - v|^2` over distinct pairs
/// of `bounds.grid(n)`.
pub fn relative_entropy_constant(bounds: &StateBox, gas: &GasParameters, n: usize) -> Result<f64> {
    let pts = bounds.grid(n);
    let mut c: f64 = 1.0;
    for (i, u) in pts.iter().enumerate() {
        for v in &pts[i + 1..] {
            let d2 = u.distance(v).powi(2);
            for e in [relative_entropy(u, v, gas)?, relative_entropy(v, u, gas)?] {
                c = c.max(e / d2).max(d2 / e);
            }
        }
    }
    Ok(c)
}
