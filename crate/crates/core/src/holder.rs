//! Initial data families and the L2 stability experiment: a reference solution
//! from perturbed data against a front-tracking solution from clean data.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bly::{phi, BlyConstants, DecompositionCache};
use crate::entropy::{info_speed, quadrilateral_audit, AuditSettings, QuadLedger};
use crate::error::{Error, Result};
use crate::front::{FrontTracker, Profile, SchemeParameters};
use crate::gas::{GasParameters, State, StateBox};
use crate::stats::{loglog_fit, LogLogFit};
use crate::tracker::{Trajectory, TraceDriven};
use crate::waves::{Family, Waves};

/// A wave placed at `position`, applied left to right from the base state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveSpec {
    pub position: f64,
    pub family: usize,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    Riemann {
        left: State,
        right: State,
        #[serde(default)]
        position: f64,
    },
    /// Piecewise constant data built from elementary waves.
    Waves { base: State, waves: Vec<WaveSpec> },
    /// A constant state plus a perturbation profile of the given amplitude.
    Perturbed {
        base: State,
        amplitude: f64,
        perturbation: Perturbation,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    /// `cos^2(pi y / 2)` on `|y| < 1`.
    Bump,
    /// `sqrt|y| sin(1/|y|)` on `|y| < 1`: bounded, continuous, infinite variation.
    Oscillatory,
}

/// `direction * g((x - center) / width)` for a profile `g` supported on `|y| < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub direction: [f64; 3],
    pub center: f64,
    pub width: f64,
    pub shape: Shape,
}

impl Perturbation {
    pub fn profile(&self, x: f64) -> f64 {
        let y = (x - self.center) / self.width;
        if y.abs() >= 1.0 {
            return 0.0;
        }
        match self.shape {
            Shape::Bump => (0.5 * std::f64::consts::PI * y).cos().powi(2),
            Shape::Oscillatory if y == 0.0 => 0.0,
            Shape::Oscillatory => y.abs().sqrt() * (1.0 / y.abs()).sin(),
        }
    }

    pub fn at(&self, x: f64) -> [f64; 3] {
        let g = self.profile(x);
        self.direction.map(|d| d * g)
    }

    fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::Config(format!("perturbation width must be positive, got {}", self.width)));
        }
        if self.direction.iter().any(|d| !d.is_finite()) {
            return Err(Error::Config("perturbation direction must be finite".into()));
        }
        Ok(())
    }
}

fn add(u: State, d: [f64; 3], scale: f64) -> State {
    State::new(u.tau + scale * d[0], u.w + scale * d[1], u.e_total + scale * d[2])
}

/// Pointwise data, evaluated on demand.
#[derive(Debug, Clone)]
pub struct DataFunction {
    breakpoints: Vec<f64>,
    values: Vec<State>,
    perturbation: Option<(Perturbation, f64)>,
}

impl DataFunction {
    pub fn eval(&self, x: f64) -> State {
        let k = self.breakpoints.partition_point(|&b| b <= x);
        let u = self.values[k];
        match self.perturbation {
            Some((p, amp)) => add(u, p.at(x), amp),
            None => u,
        }
    }

    /// The same data plus `amplitude` times `p`.
    pub fn perturbed(&self, p: Perturbation, amplitude: f64) -> Result<Self> {
        p.validate()?;
        if self.perturbation.is_some() {
            return Err(Error::Usage("data already carries a perturbation".into()));
        }
        Ok(Self {
            perturbation: Some((p, amplitude)),
            ..self.clone()
        })
    }
}

impl InitialData {
    pub fn function(&self, waves: &Waves) -> Result<DataFunction> {
        match self {
            InitialData::Riemann { left, right, position } => Ok(DataFunction {
                breakpoints: vec![*position],
                values: vec![*left, *right],
                perturbation: None,
            }),
            InitialData::Waves { base, waves: specs } => {
                let mut values = vec![*base];
                let mut breakpoints = Vec::with_capacity(specs.len());
                let mut prev = f64::NEG_INFINITY;
                for w in specs {
                    if !(w.position > prev) {
                        return Err(Error::Config("wave positions must increase".into()));
                    }
                    prev = w.position;
                    let family = Family::from_index(w.family)
                        .filter(|f| *f != Family::NonPhysical)
                        .ok_or_else(|| Error::Config(format!("wave family must be 1, 2 or 3, got {}", w.family)))?;
                    let last = *values.last().expect("nonempty");
                    values.push(waves.wave_curve(&last, family, w.sigma)?);
                    breakpoints.push(w.position);
                }
                Ok(DataFunction {
                    breakpoints,
                    values,
                    perturbation: None,
                })
            }
            InitialData::Perturbed {
                base,
                amplitude,
                perturbation,
            } => {
                perturbation.validate()?;
                Ok(DataFunction {
                    breakpoints: Vec::new(),
                    values: vec![*base],
                    perturbation: Some((*perturbation, *amplitude)),
                })
            }
        }
    }
}

/// `L1`, `L2` and `Linf` norms of `a - b` on `window`, exact for piecewise-constant profiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

pub fn difference_norms(a: &Profile, b: &Profile, window: (f64, f64)) -> Norms {
    let (l, r) = window;
    let mut cuts: Vec<f64> = a
        .fronts
        .iter()
        .chain(&b.fronts)
        .map(|f| f.position)
        .filter(|&x| x > l && x < r)
        .collect();
    cuts.push(l);
    cuts.push(r);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut n = Norms { l1: 0.0, l2: 0.0, linf: 0.0 };
    for w in cuts.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let m = 0.5 * (w[0] + w[1]);
        let d = a.state_at(m).distance(&b.state_at(m));
        n.l1 += d * (w[1] - w[0]);
        n.l2 += d * d * (w[1] - w[0]);
        n.linf = n.linf.max(d);
    }
    n.l2 = n.l2.sqrt();
    n
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HolderConfig {
    pub data: InitialData,
    pub perturbation: Perturbation,
    /// Perturbation amplitudes; a zero amplitude gives the control row.
    pub amplitudes: Vec<f64>,
    pub nu_ladder: Vec<f64>,
    /// Interval on which initial data is discretized.
    pub interval: (f64, f64),
    pub r: f64,
    pub tau: f64,
    pub kappa: f64,
    pub c1: f64,
    /// Re-evaluation period of the trace-driven shifts.
    pub shift_period: Option<f64>,
    pub seed: u64,
}

impl HolderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.amplitudes.is_empty() || self.nu_ladder.is_empty() {
            return Err(Error::Config("amplitude and nu ladders must be nonempty".into()));
        }
        if self.amplitudes.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::Config("amplitudes must be finite and non-negative".into()));
        }
        if self.nu_ladder.iter().any(|n| !(n.is_finite() && *n > 0.0)) {
            return Err(Error::Config("nu values must be positive".into()));
        }
        for (name, v) in [("R", self.r), ("tau", self.tau), ("kappa", self.kappa)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.c1.is_finite() && self.c1 >= 0.0) {
            return Err(Error::Config(format!("C1 must be non-negative, got {}", self.c1)));
        }
        if !(self.interval.0 < self.interval.1) {
            return Err(Error::Config("discretization interval is empty".into()));
        }
        self.perturbation.validate()
    }
}

/// One cell of the experiment: a `(nu, amplitude)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderRow {
    pub nu: f64,
    pub amplitude: f64,
    pub s: f64,
    /// `||u(0) - v(0)||` in L2 on `(-R - s tau, R + s tau)`.
    pub l2_initial: f64,
    /// `||u(tau) - v(tau)||` on `(-R, R)`.
    pub terminal: Norms,
    /// `||u(tau) - psi(tau)||` in L2 and `||psi(tau) - v(tau)||` in L1 on `(-R, R)`.
    pub l2_u_psi: f64,
    pub l1_psi_v: f64,
    /// `Phi(v(tau), psi(tau))` and the Cauchy–Schwarz product
    /// `sqrt(int sum |jump| dt * int sum |jump| (rh - h')^2 dt)`.
    pub phi: f64,
    pub cauchy_schwarz: f64,
    pub triangle_ok: bool,
    pub interpolation_ok: bool,
    pub ledger: QuadLedger,
}

impl HolderRow {
    pub fn ledger_k(&self) -> f64 {
        self.ledger.required_k()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderResult {
    pub rows: Vec<HolderRow>,
    /// Fit of the terminal against the initial L2 distance on the finest `nu`.
    pub fit: Option<LogLogFit>,
    /// Smallest `K` with `terminal <= K sqrt(initial)` on every row.
    pub k_holder: f64,
    /// Smallest `K` balancing every entropy ledger.
    pub k_ledger: f64,
    /// Largest `Phi / cauchy_schwarz` over rows with shifted shocks.
    pub k_cauchy_schwarz: f64,
    pub max_consistency: f64,
}

impl HolderResult {
    pub fn finest_nu(&self) -> f64 {
        self.rows.iter().map(|r| r.nu).fold(f64::INFINITY, f64::min)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "nu,amplitude,l2_initial,l2_terminal,l1_terminal,linf_terminal,bound,ledger_k,phi,cauchy_schwarz,fit_slope,fit_lo,fit_hi\n",
        );
        let (slope, lo, hi) = self
            .fit
            .map_or((f64::NAN, f64::NAN, f64::NAN), |f| (f.slope, f.ci95.0, f.ci95.1));
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{},{}\n",
                r.nu,
                r.amplitude,
                r.l2_initial,
                r.terminal.l2,
                r.terminal.l1,
                r.terminal.linf,
                self.k_holder * r.l2_initial.sqrt(),
                r.ledger_k(),
                r.phi,
                r.cauchy_schwarz,
                slope,
                lo,
                hi
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Environment<'a> {
    pub gas: &'a GasParameters,
    pub bounds: &'a StateBox,
    pub bly: &'a BlyConstants,
}

fn run_cell(cfg: &HolderConfig, env: Environment<'_>, nu: f64, amplitude: f64) -> Result<HolderRow> {
    let gas = *env.gas;
    let waves = Waves::new(gas);
    let mut params = SchemeParameters::for_box(nu, env.bounds, &gas);
    params.seed = cfg.seed;
    let tracker = FrontTracker::new(gas, params);
    let clean = cfg.data.function(&waves).map_err(|e| e.in_stage("data"))?;
    let dirty = clean
        .perturbed(cfg.perturbation, amplitude)
        .map_err(|e| e.in_stage("data"))?;
    let p_clean = tracker
        .discretize_initial(|x| clean.eval(x), cfg.interval, env.bounds)
        .map_err(|e| e.in_stage("discretize clean data"))?;
    let p_dirty = tracker
        .discretize_initial(|x| dirty.eval(x), cfg.interval, env.bounds)
        .map_err(|e| e.in_stage("discretize perturbed data"))?;
    let v = tracker
        .evolve(&p_clean, cfg.tau, None)
        .map_err(|e| e.in_stage("evolve v"))?;
    let u = Arc::new(
        tracker
            .evolve(&p_dirty, cfg.tau, None)
            .map_err(|e| e.in_stage("evolve u"))?,
    );
    let policy = TraceDriven::new(u.clone(), cfg.c1, cfg.shift_period);
    let psi = tracker
        .evolve(&p_clean, cfg.tau, Some(&policy))
        .map_err(|e| e.in_stage("evolve psi"))?;
    let range = states_of(&psi);
    let s = info_speed(env.bounds, &range, 6, params.lambda_hat, &waves)
        .map_err(|e| e.in_stage("information speed"))?
        .s;
    let settings = AuditSettings {
        r: cfg.r,
        tau: cfg.tau,
        s,
        kappa: cfg.kappa,
        c1: cfg.c1,
    };
    let ledger = quadrilateral_audit(&u, &psi, settings, env.bounds, &gas)
        .map_err(|e| e.in_stage("entropy ledger"))?;
    let wide = (-cfg.r - s * cfg.tau, cfg.r + s * cfg.tau);
    let narrow = (-cfg.r, cfg.r);
    let l2_initial = difference_norms(&u.initial, &v.initial, wide).l2;
    let (u_t, v_t, psi_t) = (u.final_profile(), v.final_profile(), psi.final_profile());
    let terminal = difference_norms(&u_t, &v_t, narrow);
    let l2_u_psi = difference_norms(&u_t, &psi_t, narrow).l2;
    let l1_psi_v = difference_norms(&psi_t, &v_t, narrow).l1;
    let mut cache = DecompositionCache::new();
    let phi_value = phi(&v_t, &psi_t, env.bly, &waves, &mut cache)
        .map_err(|e| e.in_stage("phi"))?
        .phi;
    let slack = 1e-12 * (1.0 + terminal.l1);
    Ok(HolderRow {
        nu,
        amplitude,
        s,
        l2_initial,
        terminal,
        l2_u_psi,
        l1_psi_v,
        phi: phi_value,
        cauchy_schwarz: (ledger.shock_mass * ledger.shock_term).sqrt(),
        triangle_ok: terminal.l1 <= (2.0 * cfg.r).sqrt() * l2_u_psi + l1_psi_v + slack,
        interpolation_ok: terminal.l2 <= (terminal.l1 * terminal.linf).sqrt() * (1.0 + 1e-12) + 1e-300,
        ledger,
    })
}

fn states_of(t: &Trajectory) -> Vec<State> {
    let mut v = vec![t.initial.leftmost_state];
    v.extend(t.initial.fronts.iter().map(|f| f.right_state));
    v.extend(t.events.iter().flat_map(|e| e.added.iter().map(|f| f.right_state)));
    v
}

/// Runs every `(nu, amplitude)` cell in parallel and merges the rows in ladder order.
pub fn holder_experiment(cfg: &HolderConfig, env: Environment<'_>) -> Result<HolderResult> {
    cfg.validate()?;
    let cells: Vec<(f64, f64)> = cfg
        .nu_ladder
        .iter()
        .flat_map(|&nu| cfg.amplitudes.iter().map(move |&a| (nu, a)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(nu, a)| run_cell(cfg, env, nu, a))
        .collect::<Result<Vec<HolderRow>>>()?;
    let finest = rows.iter().map(|r| r.nu).fold(f64::INFINITY, f64::min);
    let fit_rows: Vec<&HolderRow> = rows
        .iter()
        .filter(|r| r.nu == finest && r.l2_initial > 0.0 && r.terminal.l2 > 0.0)
        .collect();
    let fit = if fit_rows.len() >= 2 {
        let xs: Vec<f64> = fit_rows.iter().map(|r| r.l2_initial).collect();
        let ys: Vec<f64> = fit_rows.iter().map(|r| r.terminal.l2).collect();
        Some(loglog_fit(&xs, &ys).map_err(|e| e.in_stage("exponent fit"))?)
    } else {
        None
    };
    let k_holder = rows
        .iter()
        .filter(|r| r.l2_initial > 0.0)
        .map(|r| r.terminal.l2 / r.l2_initial.sqrt())
        .fold(0.0, f64::max);
    let k_ledger = rows.iter().map(HolderRow::ledger_k).fold(0.0, f64::max);
    let k_cauchy_schwarz = rows
        .iter()
        .filter(|r| r.cauchy_schwarz > 0.0)
        .map(|r| r.phi / r.cauchy_schwarz)
        .fold(0.0, f64::max);
    let max_consistency = rows.iter().map(|r| r.ledger.consistency).fold(0.0, f64::max);
    Ok(HolderResult {
        rows,
        fit,
        k_holder,
        k_ledger,
        k_cauchy_schwarz,
        max_consistency,
    })
}
