//! Fronts, piecewise-constant profiles, scheme parameters and the two Riemann solvers
//! of the front tracking scheme.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gas::{GasParameters, State, StateBox};
use crate::waves::{self, Family, Waves};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrontKind {
    Shock,
    RarefactionStep,
    Contact,
    NonPhysical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Front {
    pub id: u64,
    pub position: f64,
    pub speed: f64,
    pub family: Family,
    pub kind: FrontKind,
    pub left_state: State,
    pub right_state: State,
    /// Signed curve parameter; `|u_R - u_L|` for non-physical fronts.
    pub sigma: f64,
}

impl Front {
    pub fn strength(&self) -> f64 {
        self.sigma.abs()
    }

    /// `s0 = |u_R - u_L|`.
    pub fn jump(&self) -> f64 {
        self.left_state.distance(&self.right_state)
    }

    pub fn is_shock(&self) -> bool {
        self.kind == FrontKind::Shock
    }

    /// True Rankine–Hugoniot speed of the jump carried by a shock or contact.
    pub fn rh_speed(&self, gas: &GasParameters) -> Result<f64> {
        match self.kind {
            FrontKind::Shock => Ok(waves::rh_speed_of(&self.left_state, &self.right_state, gas)),
            FrontKind::Contact => Ok(0.0),
            other => Err(Error::Usage(format!(
                "front {} is a {other:?}, not a shock",
                self.id
            ))),
        }
    }
}

/// Piecewise-constant state at one time. Fronts are listed left to right; fronts
/// emitted by one Riemann fan at `t = 0` share a position and are ordered by speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub time: f64,
    pub leftmost_state: State,
    pub fronts: Vec<Front>,
}

impl Profile {
    pub fn constant(u: State) -> Self {
        Self {
            time: 0.0,
            leftmost_state: u,
            fronts: Vec::new(),
        }
    }

    pub fn rightmost_state(&self) -> State {
        self.fronts
            .last()
            .map_or(self.leftmost_state, |f| f.right_state)
    }

    /// State on the cell containing `x`; at a front position the right state is returned.
    pub fn state_at(&self, x: f64) -> State {
        let k = self.fronts.partition_point(|f| f.position <= x);
        if k == 0 {
            self.leftmost_state
        } else {
            self.fronts[k - 1].right_state
        }
    }

    /// Left limit at `x`.
    pub fn state_left_of(&self, x: f64) -> State {
        let k = self.fronts.partition_point(|f| f.position < x);
        if k == 0 {
            self.leftmost_state
        } else {
            self.fronts[k - 1].right_state
        }
    }

    /// Cells `(x_left, x_right, state)` with infinite outer ends; empty cells are kept.
    pub fn cells(&self) -> Vec<(f64, f64, State)> {
        let mut out = Vec::with_capacity(self.fronts.len() + 1);
        let mut left = f64::NEG_INFINITY;
        let mut state = self.leftmost_state;
        for f in &self.fronts {
            out.push((left, f.position, state));
            left = f.position;
            state = f.right_state;
        }
        out.push((left, f64::INFINITY, state));
        out
    }

    pub fn total_variation(&self) -> f64 {
        self.fronts.iter().map(Front::jump).sum()
    }

    pub fn np_total(&self) -> f64 {
        self.fronts
            .iter()
            .filter(|f| f.kind == FrontKind::NonPhysical)
            .map(Front::strength)
            .sum()
    }

    /// Checks chaining, ordering, finiteness and (optionally) box membership.
    pub fn validate(&self, bounds: Option<&StateBox>) -> Result<()> {
        let mut prev_state = self.leftmost_state;
        let mut prev_x = f64::NEG_INFINITY;
        let check = |u: &State| -> Result<()> {
            if !u.is_finite() {
                return Err(Error::Domain {
                    field: "profile_state",
                    value: f64::NAN,
                });
            }
            if let Some(b) = bounds {
                if !b.contains(u) {
                    return Err(Error::Range {
                        last_valid: 0.0,
                        attempted: u.tau,
                    });
                }
            }
            Ok(())
        };
        check(&prev_state)?;
        for f in &self.fronts {
            if f.left_state != prev_state {
                return Err(Error::Usage(format!("front {} breaks the state chain", f.id)));
            }
            if !(f.position >= prev_x) {
                return Err(Error::Usage(format!("front {} is out of order", f.id)));
            }
            check(&f.right_state)?;
            prev_state = f.right_state;
            prev_x = f.position;
        }
        Ok(())
    }

    /// CSV with one row per cell, `x` being the left end of the cell.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,tau,w,e_total\n");
        for (x, _, u) in self.cells() {
            let _ = writeln!(s, "{x:e},{:e},{:e},{:e}", u.tau, u.w, u.e_total);
        }
        s
    }
}

/// Numerical constants of the scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeParameters {
    pub nu: f64,
    pub lambda_hat: f64,
    /// Lower end of the shifted-shock speed windows.
    pub alpha: f64,
    pub kappa: f64,
    pub np_threshold: f64,
    pub speed_jitter: f64,
    pub max_interactions: usize,
    pub seed: u64,
}

impl SchemeParameters {
    /// Defaults tied to the box: `lambda_hat = 2.5 sup c`, `alpha = inf c / 2`,
    /// `np_threshold = nu^2`, `speed_jitter = nu / 10`.
    pub fn for_box(nu: f64, bounds: &StateBox, gas: &GasParameters) -> Self {
        Self {
            nu,
            lambda_hat: 2.5 * bounds.max_sound_speed(gas),
            alpha: 0.5 * bounds.min_sound_speed(gas),
            kappa: 1.0,
            np_threshold: nu * nu,
            speed_jitter: 0.1 * nu,
            max_interactions: 500_000,
            seed: 0,
        }
    }

    pub fn validate(&self, bounds: &StateBox, gas: &GasParameters) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.nu > 0.0) {
            return bad(format!("nu must be positive, got {}", self.nu));
        }
        let c_max = bounds.max_sound_speed(gas);
        if !(self.lambda_hat > c_max) {
            return bad(format!(
                "lambda_hat = {} must exceed the largest characteristic speed {c_max}",
                self.lambda_hat
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5 * self.lambda_hat) {
            return bad(format!("alpha = {} outside (0, lambda_hat/2)", self.alpha));
        }
        if !(self.speed_jitter >= 0.0 && self.speed_jitter <= self.nu) {
            return bad(format!("speed_jitter must lie in [0, nu], got {}", self.speed_jitter));
        }
        if !(self.np_threshold >= 0.0) || !(self.kappa >= 0.0) {
            return bad("np_threshold and kappa must be non-negative".into());
        }
        if self.max_interactions == 0 {
            return bad("max_interactions must be positive".into());
        }
        Ok(())
    }

    /// Speed window `[lo, hi]` for a shifted shock of the given family.
    pub fn shift_window(&self, family: Family) -> Option<(f64, f64)> {
        match family {
            Family::One => Some((-0.5 * self.lambda_hat, -self.alpha)),
            Family::Three => Some((self.alpha, 0.5 * self.lambda_hat)),
            _ => None,
        }
    }
}

/// One elementary wave before it is turned into fronts.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Wave {
    pub family: Family,
    pub sigma: f64,
    pub left: State,
    pub right: State,
}

/// Waves with `|sigma|` below this are dropped from an accurate fan.
pub(crate) const DROP: f64 = 1e-14;
/// Non-physical residuals below this are absorbed into the last outgoing wave.
const SNAP: f64 = 1e-14;

/// The front tracking scheme: curve machinery plus scheme constants.
#[derive(Debug, Clone, Copy)]
pub struct FrontTracker {
    pub waves: Waves,
    pub params: SchemeParameters,
}

impl FrontTracker {
    pub fn new(gas: GasParameters, params: SchemeParameters) -> Self {
        Self {
            waves: Waves::new(gas).with_solvability(f64::INFINITY),
            params,
        }
    }

    pub fn gas(&self) -> &GasParameters {
        &self.waves.gas
    }

    /// Deterministic speed perturbation in `[-jitter, jitter]` keyed by `(seed, id)`.
    pub fn jitter(&self, id: u64) -> f64 {
        let j = self.params.speed_jitter;
        if j == 0.0 {
            return 0.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.params.seed);
        rng.set_stream(id);
        rng.random_range(-j..=j)
    }

    /// Exact fan of `(u_l, u_r)` as elementary waves; negligible waves are dropped
    /// and the chain is closed exactly on `u_r`.
    pub(crate) fn accurate_waves(&self, u_l: &State, u_r: &State) -> Result<Vec<Wave>> {
        if u_l == u_r {
            return Ok(Vec::new());
        }
        let fan = self.waves.solve_riemann(u_l, u_r)?;
        let states = fan.states();
        let mut out: Vec<Wave> = Vec::with_capacity(3);
        let mut left = *u_l;
        for (k, fam) in Family::PHYSICAL.into_iter().enumerate() {
            if fan.sigmas[k].abs() < DROP {
                continue;
            }
            out.push(Wave {
                family: fam,
                sigma: fan.sigmas[k],
                left,
                right: states[k + 1],
            });
            left = states[k + 1];
        }
        match out.last_mut() {
            Some(w) => w.right = *u_r,
            None => out.push(non_physical(*u_l, *u_r)),
        }
        Ok(out)
    }

    /// Simplified solver: keeps the incoming waves (merged when of one family) and
    /// sends the residual jump away as a non-physical wave.
    pub(crate) fn simplified_waves(
        &self,
        left: &Front,
        right: &Front,
    ) -> Result<Vec<Wave>> {
        let u_l = left.left_state;
        let u_r = right.right_state;
        let (fa, fb) = (left.family, right.family);
        let mut plan: Vec<(Family, f64)> = Vec::with_capacity(2);
        match (fa, fb) {
            (Family::NonPhysical, Family::NonPhysical) => {}
            (Family::NonPhysical, f) => plan.push((f, right.sigma)),
            (f, Family::NonPhysical) => plan.push((f, left.sigma)),
            (a, b) if a == b => plan.push((a, left.sigma + right.sigma)),
            (a, b) if a > b => {
                plan.push((b, right.sigma));
                plan.push((a, left.sigma));
            }
            (a, b) => {
                plan.push((a, left.sigma));
                plan.push((b, right.sigma));
            }
        }
        let mut out = Vec::with_capacity(3);
        let mut cur = u_l;
        for (fam, sigma) in plan {
            if sigma.abs() < DROP {
                continue;
            }
            let next = self.waves.wave_curve(&cur, fam, sigma)?;
            out.push(Wave {
                family: fam,
                sigma,
                left: cur,
                right: next,
            });
            cur = next;
        }
        if cur.distance(&u_r) <= SNAP {
            match out.last_mut() {
                Some(w) => w.right = u_r,
                None if cur == u_r => {}
                None => out.push(non_physical(cur, u_r)),
            }
        } else {
            out.push(non_physical(cur, u_r));
        }
        Ok(out)
    }

    /// Turns waves into fronts at `position`, splitting rarefactions into steps of strength at most `nu`.
    pub(crate) fn materialize(
        &self,
        waves: &[Wave],
        position: f64,
        next_id: &mut u64,
    ) -> Result<Vec<Front>> {
        let mut out = Vec::new();
        let mut push = |family, kind, left, right, sigma, speed: Option<f64>, out: &mut Vec<Front>| {
            let id = *next_id;
            *next_id += 1;
            out.push(Front {
                id,
                position,
                speed: speed.unwrap_or(f64::NAN),
                family,
                kind,
                left_state: left,
                right_state: right,
                sigma,
            });
        };
        for w in waves {
            match w.family {
                Family::NonPhysical => push(
                    Family::NonPhysical,
                    FrontKind::NonPhysical,
                    w.left,
                    w.right,
                    w.left.distance(&w.right),
                    Some(self.params.lambda_hat),
                    &mut out,
                ),
                Family::Two => push(
                    Family::Two,
                    FrontKind::Contact,
                    w.left,
                    w.right,
                    w.sigma,
                    None,
                    &mut out,
                ),
                fam if w.sigma < 0.0 => push(
                    fam,
                    FrontKind::Shock,
                    w.left,
                    w.right,
                    w.sigma,
                    None,
                    &mut out,
                ),
                fam => {
                    let n = ((w.sigma / self.params.nu).ceil() as usize).max(1);
                    let step = w.sigma / n as f64;
                    let mut l = w.left;
                    for k in 1..=n {
                        let r = if k == n {
                            w.right
                        } else {
                            self.waves.wave_curve(&w.left, fam, w.sigma * k as f64 / n as f64)?
                        };
                        push(fam, FrontKind::RarefactionStep, l, r, step, None, &mut out);
                        l = r;
                    }
                }
            }
        }
        for f in &mut out {
            if f.speed.is_nan() {
                f.speed = self.natural_speed(f) + self.jitter(f.id);
            }
        }
        Ok(out)
    }

    /// Unperturbed speed of a front: RH for shocks, zero for contacts, the
    /// characteristic speed of the left state for rarefaction steps, `lambda_hat` for NP.
    pub fn natural_speed(&self, f: &Front) -> f64 {
        match f.kind {
            FrontKind::Shock => waves::rh_speed_of(&f.left_state, &f.right_state, self.gas()),
            FrontKind::Contact => 0.0,
            FrontKind::RarefactionStep => self.waves.lambda(&f.left_state, f.family),
            FrontKind::NonPhysical => self.params.lambda_hat,
        }
    }

    /// Accurate solver at `x = 0` with ids starting from 0.
    pub fn accurate_solver(&self, u_l: &State, u_r: &State) -> Result<Vec<Front>> {
        let w = self.accurate_waves(u_l, u_r)?;
        self.materialize(&w, 0.0, &mut 0)
    }

    /// Simplified solver for two colliding fronts, outgoing fronts placed at `left.position`.
    pub fn simplified_solver(&self, left: &Front, right: &Front) -> Result<Vec<Front>> {
        if left.right_state != right.left_state {
            return Err(Error::Usage("colliding fronts are not adjacent".into()));
        }
        let w = self.simplified_waves(left, right)?;
        let mut id = left.id.max(right.id) + 1;
        self.materialize(&w, left.position, &mut id)
    }

    /// Resolves every jump of a step function with the accurate solver at `t = 0`.
    pub fn profile_from_steps(&self, steps: &StepFunction) -> Result<Profile> {
        let mut next_id = 0;
        let mut fronts = Vec::new();
        for (k, &x) in steps.breakpoints.iter().enumerate() {
            let w = self.accurate_waves(&steps.values[k], &steps.values[k + 1])?;
            fronts.extend(self.materialize(&w, x, &mut next_id)?);
        }
        Ok(Profile {
            time: 0.0,
            leftmost_state: steps.values[0],
            fronts,
        })
    }

    /// Piecewise-constant approximation of `data` on `[a, b]` (constant outside)
    /// within `nu` in sup norm, resolved into fronts.
    pub fn discretize_initial<F>(
        &self,
        data: F,
        interval: (f64, f64),
        bounds: &StateBox,
    ) -> Result<Profile>
    where
        F: Fn(f64) -> State,
    {
        let steps = StepFunction::sample(data, interval, self.params.nu, bounds)?;
        self.profile_from_steps(&steps)
    }
}

fn non_physical(left: State, right: State) -> Wave {
    Wave {
        family: Family::NonPhysical,
        sigma: left.distance(&right),
        left,
        right,
    }
}

/// Raw piecewise-constant data: `values.len() == breakpoints.len() + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    pub breakpoints: Vec<f64>,
    pub values: Vec<State>,
}

impl StepFunction {
    pub fn constant(u: State) -> Self {
        Self {
            breakpoints: Vec::new(),
            values: vec![u],
        }
    }

    pub fn new(breakpoints: Vec<f64>, values: Vec<State>) -> Result<Self> {
        if values.len() != breakpoints.len() + 1 {
            return Err(Error::Usage("step function needs one more value than breakpoints".into()));
        }
        if breakpoints.windows(2).any(|p| !(p[0] < p[1])) {
            return Err(Error::Usage("breakpoints must increase strictly".into()));
        }
        Ok(Self { breakpoints, values })
    }

    pub fn value_at(&self, x: f64) -> State {
        self.values[self.breakpoints.partition_point(|&b| b <= x)]
    }

    pub fn total_variation(&self) -> f64 {
        self.values.windows(2).map(|p| p[0].distance(&p[1])).sum()
    }

    /// Greedy sampling: a new cell starts where `data` first leaves the sup-norm ball
    /// of radius `nu` around the current cell value, located by bisection.
    pub fn sample<F>(data: F, interval: (f64, f64), nu: f64, bounds: &StateBox) -> Result<Self>
    where
        F: Fn(f64) -> State,
    {
        let (a, b) = interval;
        if !(a < b) {
            return Err(Error::Usage(format!("empty interval [{a}, {b}]")));
        }
        let eval = |x: f64| -> Result<State> {
            let u = data(x);
            if !bounds.contains(&u) {
                return Err(Error::Domain {
                    field: "initial_data",
                    value: x,
                });
            }
            Ok(u)
        };
        let far = |u: &State, v: &State| {
            (u.tau - v.tau)
                .abs()
                .max((u.w - v.w).abs())
                .max((u.e_total - v.e_total).abs())
                > nu
        };
        let n = 4096.max((64.0 * (b - a) / nu).ceil() as usize).min(1 << 20);
        let dx = (b - a) / n as f64;
        let mut breakpoints = Vec::new();
        let mut values = vec![eval(a)?];
        let mut prev_x = a;
        for k in 1..=n {
            let x = if k == n { b } else { a + dx * k as f64 };
            let u = eval(x)?;
            let cur = *values.last().expect("nonempty");
            if far(&u, &cur) {
                let (mut lo, mut hi) = (prev_x, x);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if far(&eval(mid)?, &cur) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                breakpoints.push(hi);
                values.push(eval(hi)?);
            }
            prev_x = x;
        }
        // constant continuation beyond b
        let tail = eval(b)?;
        let last = *values.last().expect("nonempty");
        if tail != last {
            breakpoints.push(b);
            values.push(tail);
        }
        Ok(Self { breakpoints, values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tracker(nu: f64) -> FrontTracker {
        let gas = GasParameters::default();
        FrontTracker::new(gas, SchemeParameters::for_box(nu, &StateBox::default(), &gas))
    }

    fn base() -> State {
        State::new(1.0, 0.0, 2.5)
    }

    #[test]
    fn default_parameters_validate() {
        let t = tracker(0.01);
        t.params.validate(&StateBox::default(), t.gas()).unwrap();
        let mut p = t.params;
        p.lambda_hat = 1.0;
        assert!(p.validate(&StateBox::default(), t.gas()).is_err());
    }

    #[test]
    fn equal_states_give_no_fronts() {
        assert!(tracker(0.01).accurate_solver(&base(), &base()).unwrap().is_empty());
    }

    #[test]
    fn rarefaction_is_split_into_steps() {
        let t = tracker(0.01);
        let ur = t.waves.rarefaction_curve(&base(), Family::Three, 0.05).unwrap().state;
        let fronts = t.accurate_solver(&base(), &ur).unwrap();
        assert_eq!(fronts.len(), 5);
        for f in &fronts {
            assert_eq!(f.kind, FrontKind::RarefactionStep);
            assert!(f.strength() <= 0.01 + 1e-12);
            let lam = t.waves.lambda(&f.left_state, Family::Three);
            assert!((f.speed - lam).abs() <= t.params.speed_jitter);
        }
        assert_eq!(fronts.last().unwrap().right_state, ur);
    }

    #[test]
    fn single_shock_gives_one_front() {
        let t = tracker(0.01);
        let pt = t.waves.shock_curve(&base(), Family::One, -0.04).unwrap();
        let fronts = t.accurate_solver(&base(), &pt.state).unwrap();
        assert_eq!(fronts.len(), 1);
        let f = fronts[0];
        assert_eq!(f.kind, FrontKind::Shock);
        assert!((f.rh_speed(t.gas()).unwrap() - pt.speed).abs() < 1e-9);
        assert!((f.speed - pt.speed).abs() <= t.params.nu);
    }

    fn shock(t: &FrontTracker, u: State, fam: Family, sigma: f64, id: u64) -> Front {
        let r = t.waves.wave_curve(&u, fam, sigma).unwrap();
        Front {
            id,
            position: 0.0,
            speed: 0.0,
            family: fam,
            kind: FrontKind::Shock,
            left_state: u,
            right_state: r,
            sigma,
        }
    }

    #[test]
    fn merging_weak_shocks_leaves_quadratic_residual() {
        let t = tracker(0.01);
        let mut ratios = Vec::new();
        for eps in [0.02, 0.01, 0.005] {
            let a = shock(&t, base(), Family::One, -eps, 0);
            let b = shock(&t, a.right_state, Family::One, -eps, 1);
            let out = t.simplified_solver(&a, &b).unwrap();
            let np: Vec<_> = out.iter().filter(|f| f.kind == FrontKind::NonPhysical).collect();
            let phys: Vec<_> = out.iter().filter(|f| f.kind != FrontKind::NonPhysical).collect();
            assert_eq!(phys.len(), 1);
            assert!((phys[0].sigma + 2.0 * eps).abs() < 1e-14);
            let s = np.first().map_or(0.0, |f| f.strength());
            // compare against the accurate fan of the same pair
            let acc = t.accurate_solver(&a.left_state, &b.right_state).unwrap();
            assert!(acc.iter().any(|f| f.family == Family::One));
            assert_eq!(np.first().map(|f| f.speed), np.first().map(|_| t.params.lambda_hat));
            ratios.push(s / (eps * eps));
        }
        // |sigma_NP| = O(|sigma'||sigma''|)
        for r in &ratios {
            assert!(*r < 1.0, "ratio {r}");
        }
    }

    #[test]
    fn simplified_solver_without_residual_has_no_np_front() {
        let t = tracker(0.01);
        let a = shock(&t, base(), Family::Two, 0.02, 0);
        let mut a = a;
        a.kind = FrontKind::Contact;
        let mut b = shock(&t, a.right_state, Family::Two, 0.03, 1);
        b.kind = FrontKind::Contact;
        let out = t.simplified_solver(&a, &b).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].kind, FrontKind::Contact);
        assert_eq!(out[0].right_state, b.right_state);
    }

    #[test]
    fn jitter_is_deterministic_and_bounded() {
        let t = tracker(0.01);
        for id in 0..100 {
            let j = t.jitter(id);
            assert_eq!(j, t.jitter(id));
            assert!(j.abs() <= 0.001);
        }
        assert_ne!(t.jitter(1), t.jitter(2));
    }

    #[test]
    fn constant_data_has_no_fronts() {
        let t = tracker(0.01);
        let p = t
            .discretize_initial(|_| base(), (-1.0, 1.0), &StateBox::default())
            .unwrap();
        assert!(p.fronts.is_empty());
        assert_eq!(p.leftmost_state, base());
    }

    #[test]
    fn step_data_keeps_its_jumps() {
        let u1 = State::new(1.05, 0.02, 2.55);
        let u2 = State::new(0.97, -0.01, 2.48);
        let data = move |x: f64| {
            if x < -0.3 {
                base()
            } else if x < 0.4 {
                u1
            } else {
                u2
            }
        };
        let s = StepFunction::sample(data, (-1.0, 1.0), 0.01, &StateBox::default()).unwrap();
        assert_eq!(s.breakpoints.len(), 2);
        assert!((s.breakpoints[0] + 0.3).abs() < 1e-12);
        assert!((s.breakpoints[1] - 0.4).abs() < 1e-12);
        assert_eq!(s.values, vec![base(), u1, u2]);
        let p = tracker(0.01).profile_from_steps(&s).unwrap();
        p.validate(None).unwrap();
        assert_eq!(p.rightmost_state(), u2);
    }

    #[test]
    fn smooth_bump_is_resolved_within_nu() {
        // tau bump with total variation 0.1
        let data = |x: f64| {
            let b = if x.abs() < 1.0 { 0.05 * (std::f64::consts::PI * x).cos().mul_add(0.5, 0.5) } else { 0.0 };
            State::new(1.0 + b, 0.0, 2.5)
        };
        let s = StepFunction::sample(data, (-1.0, 1.0), 0.01, &StateBox::default()).unwrap();
        assert!(s.values.len() >= 10);
        assert!(s.total_variation() <= 0.1 + 1e-12);
        for k in 0..2000 {
            let x = -1.2 + 2.4 * k as f64 / 2000.0;
            let (u, v) = (data(x), s.value_at(x));
            assert!((u.tau - v.tau).abs() <= 0.01 + 1e-12);
        }
    }

    #[test]
    fn data_outside_box_is_rejected() {
        let r = StepFunction::sample(|_| State::new(2.0, 0.0, 2.5), (0.0, 1.0), 0.01, &StateBox::default());
        assert!(matches!(r, Err(Error::Domain { .. })));
    }

    #[test]
    fn profile_queries() {
        let t = tracker(0.01);
        let ur = t.waves.shock_curve(&base(), Family::Three, -0.05).unwrap().state;
        let mut p = Profile::constant(base());
        p.fronts = t.accurate_solver(&base(), &ur).unwrap();
        p.fronts[0].position = 0.5;
        assert_eq!(p.state_at(0.0), base());
        assert_eq!(p.state_at(0.5), ur);
        assert_eq!(p.state_left_of(0.5), base());
        assert_eq!(p.cells().len(), 2);
        assert!(p.to_csv().starts_with("x,tau,w,e_total\n-inf,"));
        assert!(p.fronts[0].rh_speed(t.gas()).is_ok());
        let mut np = p.fronts[0];
        np.kind = FrontKind::RarefactionStep;
        assert!(matches!(np.rh_speed(t.gas()), Err(Error::Usage(_))));
    }
}
