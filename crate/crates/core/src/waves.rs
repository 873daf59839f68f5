//! Eigenstructure, wave curves and the exact Riemann solver.
//!
//! Genuinely nonlinear curves (families 1 and 3) are parametrized by the shift
//! of their own characteristic speed: `lambda_i(S_i(sigma)(u0)) = lambda_i(u0) + sigma`,
//! with `sigma < 0` selecting the admissible shock branch. The contact curve is
//! parametrized by arc length in conserved variables.

use std::fmt;

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gas::{self, GasParameters, State, StateBox};
use crate::ode;

/// Characteristic family of a wave or front. `NonPhysical` marks bookkeeping
/// fronts of the front tracking scheme and has no wave curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    One,
    Two,
    Three,
    NonPhysical,
}

impl Family {
    pub const PHYSICAL: [Family; 3] = [Family::One, Family::Two, Family::Three];

    /// Ordering index; non-physical fronts rank above every physical family.
    pub fn index(self) -> usize {
        match self {
            Family::One => 1,
            Family::Two => 2,
            Family::Three => 3,
            Family::NonPhysical => 4,
        }
    }

    pub fn from_index(i: usize) -> Option<Family> {
        match i {
            1 => Some(Family::One),
            2 => Some(Family::Two),
            3 => Some(Family::Three),
            4 => Some(Family::NonPhysical),
            _ => None,
        }
    }

    pub fn is_genuinely_nonlinear(self) -> bool {
        matches!(self, Family::One | Family::Three)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::NonPhysical => write!(f, "NP"),
            other => write!(f, "{}", other.index()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WaveKind {
    Shock,
    Rarefaction,
    Contact,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenSystem {
    pub lambdas: [f64; 3],
    pub r_vectors: [Vector3<f64>; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveCurvePoint {
    pub state: State,
    pub sigma: f64,
    pub speed: f64,
}

/// Exact solution of a Riemann problem as three wave parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiemannFan {
    pub left: State,
    pub right: State,
    pub sigmas: [f64; 3],
    pub middle_states: [State; 2],
    pub wave_kinds: [Option<WaveKind>; 3],
    pub residual: f64,
}

impl RiemannFan {
    /// States `[u_L, u_1, u_2, u_R]` separating the three waves.
    pub fn states(&self) -> [State; 4] {
        [
            self.left,
            self.middle_states[0],
            self.middle_states[1],
            self.right,
        ]
    }
}

/// Wave curve machinery bound to a gas and an optional admissible box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waves {
    pub gas: GasParameters,
    pub bounds: Option<StateBox>,
    /// Largest `|u_L - u_R|` accepted by the Riemann solver.
    pub solvability: f64,
}

/// Largest parameter increment taken by one continuation step along a Hugoniot curve.
const CONTINUATION_STEP: f64 = 0.01;
const TAYLOR_MAX: f64 = 1e-8;
const NEWTON_MAX: usize = 60;
const RIEMANN_MAX: usize = 100;

fn not_gnl(family: Family) -> Error {
    Error::Usage(format!("family {family} has no genuinely nonlinear curve"))
}

impl Waves {
    pub fn new(gas: GasParameters) -> Self {
        Self {
            gas,
            bounds: None,
            solvability: 0.5,
        }
    }

    pub fn with_bounds(mut self, bounds: StateBox) -> Self {
        self.bounds = Some(bounds);
        self
    }

    pub fn with_solvability(mut self, threshold: f64) -> Self {
        self.solvability = threshold;
        self
    }

    pub fn unbounded(&self) -> Self {
        Self {
            bounds: None,
            ..*self
        }
    }

    fn in_bounds(&self, u: &State) -> bool {
        self.bounds.is_none_or(|b| b.contains(u))
    }

    // ---------------------------------------------------------------- eigen

    pub fn lambda(&self, u: &State, family: Family) -> f64 {
        match family {
            Family::One => -u.sound_speed(&self.gas),
            Family::Two => 0.0,
            Family::Three => u.sound_speed(&self.gas),
            Family::NonPhysical => f64::NAN,
        }
    }

    /// Gradient of `lambda_i` in conserved variables.
    pub fn grad_lambda(&self, u: &State, family: Family) -> Vector3<f64> {
        let g = &self.gas;
        let c = u.sound_speed(g);
        let k = g.gamma * (g.gamma - 1.0) / (2.0 * c * u.tau * u.tau);
        let grad_c = Vector3::new(-c / u.tau, -k * u.w, k);
        match family {
            Family::One => -grad_c,
            Family::Three => grad_c,
            _ => Vector3::zeros(),
        }
    }

    /// Right eigenvector: `r . grad lambda = 1` for families 1, 3 and unit length for family 2.
    pub fn eigenvector(&self, u: &State, family: Family) -> Vector3<f64> {
        let g = &self.gas;
        let p = u.pressure(g);
        let gm1 = g.gamma - 1.0;
        let to_conserved = |dtau: f64, dw: f64, dp: f64| {
            Vector3::new(dtau, dw, u.w * dw + (p * dtau + u.tau * dp) / gm1)
        };
        match family {
            Family::Two => to_conserved(1.0, 0.0, 0.0).normalize(),
            Family::One | Family::Three => {
                let c = u.sound_speed(g);
                let k = 2.0 * u.tau / (g.gamma + 1.0);
                if family == Family::Three {
                    to_conserved(-k / c, k, k * c)
                } else {
                    to_conserved(k / c, k, -k * c)
                }
            }
            Family::NonPhysical => Vector3::zeros(),
        }
    }

    pub fn eigen(&self, u: &State) -> Result<EigenSystem> {
        gas::complete_thermo(u, &self.gas)?;
        Ok(EigenSystem {
            lambdas: [
                self.lambda(u, Family::One),
                0.0,
                self.lambda(u, Family::Three),
            ],
            r_vectors: [
                self.eigenvector(u, Family::One),
                self.eigenvector(u, Family::Two),
                self.eigenvector(u, Family::Three),
            ],
        })
    }

    // ---------------------------------------------------------------- curves

    /// Point on the Hugoniot locus of a genuinely nonlinear family, either sign of `sigma`.
    /// Returns the state and its Rankine–Hugoniot speed.
    pub fn hugoniot_point(&self, u0: &State, family: Family, sigma: f64) -> Result<(State, f64)> {
        self.hugoniot_continuation(u0, family, sigma, false)
    }

    fn hugoniot_continuation(
        &self,
        u0: &State,
        family: Family,
        sigma: f64,
        check_box: bool,
    ) -> Result<(State, f64)> {
        if !family.is_genuinely_nonlinear() {
            return Err(not_gnl(family));
        }
        gas::complete_thermo(u0, &self.gas)?;
        let lam0 = self.lambda(u0, family);
        if sigma == 0.0 {
            return Ok((*u0, lam0));
        }
        let r0 = self.eigenvector(u0, family);
        let h = 1e-4;
        let rp = self.eigenvector(&State::from_vector(&(u0.to_vector() + h * r0)), family);
        let rm = self.eigenvector(&State::from_vector(&(u0.to_vector() - h * r0)), family);
        let dr = (rp - rm) / (2.0 * h);
        let taylor = |s: f64| -> Vector4<f64> {
            let u = u0.to_vector() + s * r0 + 0.5 * s * s * dr;
            Vector4::new(u[0], u[1], u[2], lam0 + 0.5 * s)
        };
        if sigma.abs() <= TAYLOR_MAX {
            let y = taylor(sigma);
            return Ok((State::new(y[0], y[1], y[2]), y[3]));
        }

        let n = ((sigma.abs() / CONTINUATION_STEP).ceil() as usize).max(1);
        let mut prev = Vector4::new(u0.tau, u0.w, u0.e_total, lam0);
        let mut prev2: Option<Vector4<f64>> = None;
        let mut last_valid = 0.0;
        for k in 1..=n {
            let s_k = sigma * k as f64 / n as f64;
            let guess = match prev2 {
                Some(p2) if k > 2 => 2.0 * prev - p2,
                _ => taylor(s_k),
            };
            let y = self.hugoniot_newton(u0, family, lam0, s_k, guess)?;
            let state = State::new(y[0], y[1], y[2]);
            if check_box && !self.in_bounds(&state) {
                return Err(Error::Range {
                    last_valid,
                    attempted: s_k,
                });
            }
            last_valid = s_k;
            prev2 = Some(prev);
            prev = y;
        }
        Ok((State::new(prev[0], prev[1], prev[2]), prev[3]))
    }

    fn hugoniot_residual(
        &self,
        u0: &State,
        f0: &Vector3<f64>,
        family: Family,
        lam0: f64,
        sigma: f64,
        y: &Vector4<f64>,
    ) -> Vector4<f64> {
        let u = State::new(y[0], y[1], y[2]);
        let s = y[3];
        let du = u.to_vector() - u0.to_vector();
        let rh = gas::flux(&u, &self.gas) - f0 - s * du;
        Vector4::new(rh[0], rh[1], rh[2], self.lambda(&u, family) - lam0 - sigma)
    }

    fn hugoniot_newton(
        &self,
        u0: &State,
        family: Family,
        lam0: f64,
        sigma: f64,
        mut y: Vector4<f64>,
    ) -> Result<Vector4<f64>> {
        let f0 = gas::flux(u0, &self.gas);
        let mut res = self.hugoniot_residual(u0, &f0, family, lam0, sigma, &y);
        for _ in 0..NEWTON_MAX {
            let u = State::new(y[0], y[1], y[2]);
            if !(u.tau > 0.0) || !(u.internal_energy() > 0.0) {
                break;
            }
            let df = gas::flux_jacobian(&u, &self.gas);
            let gl = self.grad_lambda(&u, family);
            let du = u.to_vector() - u0.to_vector();
            let s = y[3];
            let mut jac = Matrix4::zeros();
            for r in 0..3 {
                for c in 0..3 {
                    jac[(r, c)] = df[(r, c)] - if r == c { s } else { 0.0 };
                }
                jac[(r, 3)] = -du[r];
                jac[(3, r)] = gl[r];
            }
            let Some(step) = jac.lu().solve(&res) else {
                break;
            };
            y -= step;
            res = self.hugoniot_residual(u0, &f0, family, lam0, sigma, &y);
            if step.amax() <= 1e-15 * (1.0 + y.amax()) || res.amax() <= 1e-15 {
                break;
            }
        }
        if res.iter().all(|v| v.is_finite()) && res.amax() <= 1e-11 {
            Ok(y)
        } else {
            Err(Error::Solver {
                stage: "hugoniot continuation",
                iterations: NEWTON_MAX,
                residual: res.amax(),
            })
        }
    }

    /// Admissible shock branch, `sigma <= 0`.
    pub fn shock_curve(&self, u0: &State, family: Family, sigma: f64) -> Result<WaveCurvePoint> {
        if sigma > 0.0 {
            return Err(Error::Usage(format!(
                "shock curve needs sigma <= 0, got {sigma}"
            )));
        }
        let (state, speed) = self.hugoniot_continuation(u0, family, sigma, true)?;
        Ok(WaveCurvePoint {
            state,
            sigma,
            speed,
        })
    }

    fn rarefaction_raw(&self, u0: &State, family: Family, sigma: f64) -> Result<State> {
        if !family.is_genuinely_nonlinear() {
            return Err(not_gnl(family));
        }
        let g = &self.gas;
        let th = gas::complete_thermo(u0, g)?;
        if sigma == 0.0 {
            return Ok(*u0);
        }
        let c0 = u0.sound_speed(g);
        let c = match family {
            Family::Three => c0 + sigma,
            _ => c0 - sigma,
        };
        if !(c > 0.0) {
            return Err(Error::Domain {
                field: "sound_speed",
                value: c,
            });
        }
        // isentrope p tau^gamma = A with sound speed c = sqrt(gamma p / tau)
        let a = th.p * u0.tau.powf(g.gamma);
        let tau = (g.gamma * a / (c * c)).powf(1.0 / (g.gamma + 1.0));
        let p = a * tau.powf(-g.gamma);
        let dw = 2.0 / (g.gamma - 1.0) * (c * tau - c0 * u0.tau);
        let w = match family {
            Family::Three => u0.w + dw,
            _ => u0.w - dw,
        };
        State::from_primitive(tau, w, p, g)
    }

    /// Integral curve of `r_i` through `u0`, `sigma >= 0`, evaluated in closed form on the isentrope.
    pub fn rarefaction_curve(
        &self,
        u0: &State,
        family: Family,
        sigma: f64,
    ) -> Result<WaveCurvePoint> {
        if sigma < 0.0 {
            return Err(Error::Usage(format!(
                "rarefaction curve needs sigma >= 0, got {sigma}"
            )));
        }
        let state = self.rarefaction_raw(u0, family, sigma)?;
        self.check_monotone_curve(&state, sigma, |s| self.rarefaction_raw(u0, family, s))?;
        Ok(WaveCurvePoint {
            state,
            sigma,
            speed: self.lambda(&state, family),
        })
    }

    /// Integral curve of `r_i` computed by adaptive Runge–Kutta integration.
    pub fn rarefaction_curve_ode(
        &self,
        u0: &State,
        family: Family,
        sigma: f64,
        tol: f64,
    ) -> Result<WaveCurvePoint> {
        if !family.is_genuinely_nonlinear() {
            return Err(not_gnl(family));
        }
        gas::complete_thermo(u0, &self.gas)?;
        let y = ode::integrate(
            |y| {
                let u = State::from_vector(y);
                gas::complete_thermo(&u, &self.gas)?;
                Ok(self.eigenvector(&u, family))
            },
            u0.to_vector(),
            sigma,
            tol,
        )?;
        let state = State::from_vector(&y);
        Ok(WaveCurvePoint {
            state,
            sigma,
            speed: self.lambda(&state, family),
        })
    }

    fn contact_raw(&self, u0: &State, sigma: f64) -> Result<State> {
        let th = gas::complete_thermo(u0, &self.gas)?;
        let slope = th.p / (self.gas.gamma - 1.0);
        let dtau = sigma / (1.0 + slope * slope).sqrt();
        let u = State::new(u0.tau + dtau, u0.w, u0.e_total + slope * dtau);
        gas::complete_thermo(&u, &self.gas)?;
        Ok(u)
    }

    /// Contact curve: constant pressure and velocity, arc-length parameter.
    pub fn contact_curve(&self, u0: &State, sigma: f64) -> Result<WaveCurvePoint> {
        let state = self.contact_raw(u0, sigma)?;
        self.check_monotone_curve(&state, sigma, |s| self.contact_raw(u0, s))?;
        Ok(WaveCurvePoint {
            state,
            sigma,
            speed: 0.0,
        })
    }

    fn check_monotone_curve(
        &self,
        end: &State,
        sigma: f64,
        curve: impl Fn(f64) -> Result<State>,
    ) -> Result<()> {
        if self.in_bounds(end) {
            return Ok(());
        }
        let (mut good, mut bad) = (0.0, sigma);
        for _ in 0..50 {
            let mid = 0.5 * (good + bad);
            match curve(mid) {
                Ok(u) if self.in_bounds(&u) => good = mid,
                _ => bad = mid,
            }
        }
        Err(Error::Range {
            last_valid: good,
            attempted: sigma,
        })
    }

    /// Lax wave curve: shock branch for `sigma < 0`, rarefaction for `sigma > 0`,
    /// contact for family 2. No box check.
    pub fn wave_curve(&self, u0: &State, family: Family, sigma: f64) -> Result<State> {
        match family {
            Family::Two => self.contact_raw(u0, sigma),
            Family::One | Family::Three if sigma < 0.0 => {
                Ok(self.hugoniot_continuation(u0, family, sigma, false)?.0)
            }
            Family::One | Family::Three => self.rarefaction_raw(u0, family, sigma),
            Family::NonPhysical => Err(not_gnl(family)),
        }
    }

    /// Hugoniot locus of each family, both signs (contact line for family 2).
    pub fn hugoniot_curve(&self, u0: &State, family: Family, sigma: f64) -> Result<State> {
        match family {
            Family::Two => self.contact_raw(u0, sigma),
            _ => Ok(self.hugoniot_continuation(u0, family, sigma, false)?.0),
        }
    }

    /// Applies the three wave curves in order 1, 2, 3.
    pub fn compose(&self, u_l: &State, sigmas: [f64; 3]) -> Result<[State; 3]> {
        let u1 = self.wave_curve(u_l, Family::One, sigmas[0])?;
        let u2 = self.wave_curve(&u1, Family::Two, sigmas[1])?;
        let u3 = self.wave_curve(&u2, Family::Three, sigmas[2])?;
        Ok([u1, u2, u3])
    }

    fn compose_hugoniot(&self, u_l: &State, q: [f64; 3]) -> Result<[State; 3]> {
        let u1 = self.hugoniot_curve(u_l, Family::One, q[0])?;
        let u2 = self.hugoniot_curve(&u1, Family::Two, q[1])?;
        let u3 = self.hugoniot_curve(&u2, Family::Three, q[2])?;
        Ok([u1, u2, u3])
    }

    fn solve_composition<F>(
        &self,
        stage: &'static str,
        u_l: &State,
        u_r: &State,
        compose: F,
    ) -> Result<([f64; 3], [State; 3], f64)>
    where
        F: Fn([f64; 3]) -> Result<[State; 3]>,
    {
        gas::complete_thermo(u_l, &self.gas)?;
        gas::complete_thermo(u_r, &self.gas)?;
        let gap = u_l.distance(u_r);
        if gap > self.solvability {
            return Err(Error::Usage(format!(
                "|u_L - u_R| = {gap} exceeds the solvability threshold {}",
                self.solvability
            )));
        }
        let target = u_r.to_vector();
        let eval = |x: &Vector3<f64>| -> Result<(Vector3<f64>, [State; 3])> {
            let states = compose([x[0], x[1], x[2]])?;
            Ok((states[2].to_vector() - target, states))
        };
        let mut x = Vector3::zeros();
        let (mut g, mut states) = eval(&x)?;
        if g.norm() == 0.0 {
            return Ok(([0.0; 3], states, 0.0));
        }
        // initial Jacobian at the origin is the eigenvector matrix
        let mut iterations = 0;
        while iterations < RIEMANN_MAX && g.norm() > 1e-14 {
            iterations += 1;
            let h = 1e-7;
            let mut jac = Matrix3::zeros();
            for k in 0..3 {
                let mut xp = x;
                let mut xm = x;
                xp[k] += h;
                xm[k] -= h;
                let col = (eval(&xp)?.0 - eval(&xm)?.0) / (2.0 * h);
                jac.set_column(k, &col);
            }
            let Some(step) = jac.lu().solve(&g) else {
                break;
            };
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let trial = x - alpha * step;
                if let Ok((g_new, s_new)) = eval(&trial) {
                    if g_new.norm() < g.norm() {
                        x = trial;
                        g = g_new;
                        states = s_new;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        let residual = g.norm();
        if residual > 1e-10 || !residual.is_finite() {
            return Err(Error::Solver {
                stage,
                iterations,
                residual,
            });
        }
        Ok(([x[0], x[1], x[2]], states, residual))
    }

    /// Exact Riemann solver by a damped Newton iteration on the wave-curve composition.
    pub fn solve_riemann(&self, u_l: &State, u_r: &State) -> Result<RiemannFan> {
        let (sigmas, states, residual) =
            self.solve_composition("riemann solver", u_l, u_r, |s| self.compose(u_l, s))?;
        if let Some(b) = &self.bounds {
            for s in &states[..2] {
                if !b.contains(s) {
                    return Err(Error::Range {
                        last_valid: 0.0,
                        attempted: sigmas.iter().map(|v| v.abs()).sum(),
                    });
                }
            }
        }
        let mut kinds = [None; 3];
        for (k, &s) in sigmas.iter().enumerate() {
            if s != 0.0 {
                kinds[k] = Some(match (k, s < 0.0) {
                    (1, _) => WaveKind::Contact,
                    (_, true) => WaveKind::Shock,
                    (_, false) => WaveKind::Rarefaction,
                });
            }
        }
        Ok(RiemannFan {
            left: *u_l,
            right: *u_r,
            sigmas,
            middle_states: [states[0], states[1]],
            wave_kinds: kinds,
            residual,
        })
    }

    /// Coordinates `q` with `v = S_3(q_3) o S_2(q_2) o S_1(q_1)(u)` along Hugoniot curves.
    pub fn decompose(&self, u: &State, v: &State) -> Result<[f64; 3]> {
        if u == v {
            return Ok([0.0; 3]);
        }
        let (q, _, _) =
            self.solve_composition("wave decomposition", u, v, |q| self.compose_hugoniot(u, q))?;
        Ok(q)
    }
}

/// Least-squares Rankine–Hugoniot speed of a jump.
pub fn rh_speed_of(u_l: &State, u_r: &State, gas: &GasParameters) -> f64 {
    let du = u_r.to_vector() - u_l.to_vector();
    let n2 = du.norm_squared();
    if n2 == 0.0 {
        return 0.0;
    }
    (gas::flux(u_r, gas) - gas::flux(u_l, gas)).dot(&du) / n2
}

/// Componentwise Rankine–Hugoniot residual `|f(u_R) - f(u_L) - s (u_R - u_L)|_inf`.
pub fn rh_residual(u_l: &State, u_r: &State, speed: f64, gas: &GasParameters) -> f64 {
    let r = gas::flux(u_r, gas) - gas::flux(u_l, gas) - speed * (u_r.to_vector() - u_l.to_vector());
    r.amax()
}
