//! Seeded small-variation run suites and the invariant checks evaluated on them.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bly::{phi, BlyConstants, DecompositionCache};
use crate::entropy::{dissipation_at_front, front_traces, info_speed, quadrilateral_audit, AuditSettings};
use crate::error::{Error, Result};
use crate::front::{FrontKind, FrontTracker, Profile, SchemeParameters};
use crate::gas::{GasParameters, State, StateBox};
use crate::glimm::{build_weight, weight_decay_audit};
use crate::holder::{InitialData, WaveSpec};
use crate::tracker::{minimize_dissipation, ShiftContext, Side, TraceContext, TraceDriven, Trajectory};
use crate::waves::{Family, Waves};

fn default_partner_scale() -> f64 {
    0.05
}

fn default_samples() -> usize {
    9
}

/// Shape of a suite: `runs` random data sets, each evolved at every `nu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSpec {
    pub runs: usize,
    pub nu: Vec<f64>,
    /// Upper bound on the total variation of the initial data.
    pub tv: f64,
    /// Number of elementary waves per data set.
    pub waves: usize,
    pub t_end: f64,
    pub interval: (f64, f64),
    /// Largest displacement of a partner wave, as a fraction of the mean wave spacing.
    #[serde(default = "default_partner_scale")]
    pub partner_scale: f64,
    /// Sampled times per run, evenly spaced in `(0, t_end]`.
    #[serde(default = "default_samples")]
    pub samples: usize,
}

impl SuiteSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.runs == 0 || self.waves == 0 || self.samples == 0 {
            return bad("suite runs, waves and samples must be positive".into());
        }
        if self.nu.is_empty() || self.nu.iter().any(|n| !(n.is_finite() && *n > 0.0)) {
            return bad("suite nu ladder must be nonempty and positive".into());
        }
        for (name, v) in [("tv", self.tv), ("t_end", self.t_end)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("suite {name} must be positive, got {v}"));
            }
        }
        if !(0.0..=0.1).contains(&self.partner_scale) {
            return bad("suite partner_scale must lie in [0, 0.1]".into());
        }
        if !(self.interval.0 < self.interval.1) {
            return bad("suite interval is empty".into());
        }
        Ok(())
    }

    /// `samples` evenly spaced times ending at `t_end`.
    pub fn times(&self) -> Vec<f64> {
        (1..=self.samples)
            .map(|k| self.t_end * k as f64 / self.samples as f64)
            .collect()
    }
}

fn step_variation(waves: &Waves, base: State, specs: &[WaveSpec]) -> Result<f64> {
    let mut u = base;
    let mut tv = 0.0;
    for w in specs {
        let family = Family::from_index(w.family).expect("generated family");
        let next = waves.wave_curve(&u, family, w.sigma)?;
        tv += u.distance(&next);
        u = next;
    }
    Ok(tv)
}

/// Rescales strengths until the step data has variation at most `tv`.
fn normalize(waves: &Waves, base: State, specs: &mut [WaveSpec], tv: f64) -> Result<()> {
    for _ in 0..20 {
        let now = step_variation(waves, base, specs)?;
        if now <= tv {
            return Ok(());
        }
        let f = 0.98 * tv / now;
        specs.iter_mut().for_each(|w| w.sigma *= f);
    }
    Err(Error::Solver {
        stage: "suite data normalization",
        iterations: 20,
        residual: step_variation(waves, base, specs)? - tv,
    })
}

/// A random wave data set of variation `<= tv` and a partner with the same waves
/// displaced by at most `partner_scale` spacings, so both share their far states.
pub fn random_data(waves: &Waves, base: State, spec: &SuiteSpec, seed: u64) -> Result<(InitialData, InitialData)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b) = spec.interval;
    let gap = (b - a) / spec.waves as f64;
    let mut specs: Vec<WaveSpec> = (0..spec.waves)
        .map(|k| {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            WaveSpec {
                position: a + gap * (k as f64 + rng.random_range(0.1..0.9)),
                family: rng.random_range(1..=3),
                sigma: sign * 0.01 * rng.random_range(0.2..1.0),
            }
        })
        .collect();
    let target = step_variation(waves, base, &specs)?;
    specs.iter_mut().for_each(|w| w.sigma *= spec.tv / target);
    normalize(waves, base, &mut specs, spec.tv)?;
    let mut partner = specs.clone();
    for w in &mut partner {
        w.position += spec.partner_scale * gap * rng.random_range(-1.0..1.0);
    }
    Ok((
        InitialData::Waves { base, waves: specs },
        InitialData::Waves { base, waves: partner },
    ))
}

/// One suite cell: data set `index` evolved at `nu`, with its partner.
#[derive(Debug, Clone)]
pub struct SuiteRun {
    pub index: usize,
    pub nu: f64,
    pub data: InitialData,
    pub u: Trajectory,
    pub v: Trajectory,
}

/// Evolves every `(data set, nu)` cell in parallel; results keep ladder order.
/// Data set `k` uses seed `seed + k` both for its data and the scheme jitter.
pub fn run_suite<P>(
    spec: &SuiteSpec,
    gas: &GasParameters,
    bounds: &StateBox,
    params: P,
    seed: u64,
) -> Result<Vec<SuiteRun>>
where
    P: Fn(f64) -> SchemeParameters + Sync,
{
    spec.validate()?;
    let waves = Waves::new(*gas);
    let cells: Vec<(usize, f64)> = (0..spec.runs)
        .flat_map(|k| spec.nu.iter().map(move |&nu| (k, nu)))
        .collect();
    cells
        .par_iter()
        .map(|&(k, nu)| {
            let s = seed.wrapping_add(k as u64);
            let (data, partner) = random_data(&waves, bounds.reference, spec, s)?;
            let mut p = params(nu);
            p.seed = s;
            let tracker = FrontTracker::new(*gas, p);
            let evolve = |d: &InitialData| -> Result<Trajectory> {
                let f = d.function(&waves)?;
                let p0 = tracker.discretize_initial(|x| f.eval(x), spec.interval, bounds)?;
                tracker.evolve(&p0, spec.t_end, None)
            };
            Ok(SuiteRun {
                index: k,
                nu,
                u: evolve(&data)?,
                v: evolve(&partner)?,
                data,
            })
        })
        .collect()
}

/// Verdict of one invariant check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub samples: usize,
    pub violations: usize,
    /// The worst observed value of the checked quantity.
    pub metric: f64,
    pub threshold: f64,
}

/// `Upsilon` decay and the weight constraints (ratio windows and pointwise decay)
/// over every trajectory of the suite.
pub fn decay_checks(
    runs: &[SuiteRun],
    kappa: f64,
    c1: f64,
    bounds: &StateBox,
    tol: f64,
) -> Result<[CheckOutcome; 2]> {
    let reports = runs
        .par_iter()
        .flat_map(|r| [&r.u, &r.v])
        .map(|t| weight_decay_audit(t, kappa, c1, bounds, tol))
        .collect::<Result<Vec<_>>>()?;
    let events: usize = reports.iter().map(|r| r.events.len()).sum();
    let worst = reports
        .iter()
        .map(|r| r.max_upsilon_increase())
        .fold(f64::NEG_INFINITY, f64::max);
    let worst_a = reports
        .iter()
        .flat_map(|r| r.events.iter().map(|e| e.max_weight_increase))
        .fold(f64::NEG_INFINITY, f64::max);
    let up: usize = reports.iter().map(|r| r.upsilon_violations).sum();
    let weights: usize = reports
        .iter()
        .map(|r| r.ratio_violations + r.weight_violations)
        .sum();
    Ok([
        CheckOutcome {
            name: "upsilon_decay".into(),
            passed: up == 0,
            samples: events,
            violations: up,
            metric: worst,
            threshold: tol,
        },
        CheckOutcome {
            name: "weight_constraints".into(),
            passed: weights == 0,
            samples: events,
            violations: weights,
            metric: worst_a,
            threshold: tol,
        },
    ])
}

/// `(1/K) ||u - v||_1 <= Phi <= 2K ||u - v||_1` and `W_i in [1, 2]` at the suite times
/// for every pair. `metric` is the smallest `K` that works.
pub fn phi_equivalence_check(
    runs: &[SuiteRun],
    times: &[f64],
    bly: &BlyConstants,
    waves: &Waves,
    k_l1: f64,
) -> Result<CheckOutcome> {
    let per_run = runs
        .par_iter()
        .map(|r| {
            let mut cache = DecompositionCache::new();
            let mut out = Vec::with_capacity(times.len());
            for &t in times {
                let (pu, pv) = (r.u.profile_at(t, Side::After), r.v.profile_at(t, Side::After));
                out.push(phi(&pu, &pv, bly, waves, &mut cache)?);
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut need: f64 = 1.0;
    let mut violations = 0;
    let mut samples = 0;
    for v in per_run.iter().flatten() {
        samples += 1;
        let weights_ok = v.min_weight >= 1.0 && v.max_weight <= 2.0;
        if v.l1 > 0.0 {
            let k = (v.l1 / v.phi).max(v.phi / (2.0 * v.l1));
            need = need.max(k);
            if !weights_ok || k > k_l1 {
                violations += 1;
            }
        } else if !weights_ok || v.phi != 0.0 {
            violations += 1;
        }
    }
    Ok(CheckOutcome {
        name: "phi_equivalence".into(),
        passed: violations == 0,
        samples,
        violations,
        metric: need,
        threshold: k_l1,
    })
}

/// Perturbed traces at contacts of the sampled profiles, weighted by the Glimm weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactSweep {
    pub samples: usize,
    pub positive: usize,
    pub max_d: f64,
    pub threshold: f64,
}

/// Draws `n` samples: a random contact from `profiles`, a left trace near its left
/// state and a right trace either equal to it or sharing its `w` and `p`, which is
/// what a weak solution can have across a stationary line.
#[allow(clippy::too_many_arguments)]
pub fn contact_sweep(
    profiles: &[Profile],
    kappa: f64,
    c1: f64,
    bounds: &StateBox,
    gas: &GasParameters,
    n: usize,
    spread: f64,
    seed: u64,
) -> Result<ContactSweep> {
    let mut contacts = Vec::new();
    for p in profiles {
        let w = build_weight(p, kappa, c1, bounds, gas)?;
        for f in p.fronts.iter().filter(|f| f.kind == FrontKind::Contact) {
            contacts.push((*f, w.left_of(f.position), w.at(f.position)));
        }
    }
    if contacts.is_empty() {
        return Err(Error::Usage("no contact fronts in the sampled profiles".into()));
    }
    let threshold = 1e-14;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sweep = ContactSweep {
        samples: n,
        positive: 0,
        max_d: f64::NEG_INFINITY,
        threshold,
    };
    for _ in 0..n {
        let (f, a_l, a_r) = contacts[rng.random_range(0..contacts.len())];
        let l = f.left_state;
        let mut jiggle = || 1.0 + spread * rng.random_range(-1.0..1.0);
        let (tau, p) = (l.tau * jiggle(), l.pressure(gas) * jiggle());
        let w = l.w + spread * l.tau * rng.random_range(-1.0..1.0);
        let um = State::from_primitive(tau, w, p, gas)?;
        let up = if rng.random_bool(0.5) {
            um
        } else {
            State::from_primitive(tau * (1.0 + spread * rng.random_range(-1.0..1.0)), w, p, gas)?
        };
        let d = dissipation_at_front((um, up), &f, 0.0, a_l, a_r, 0.0, gas)?.d;
        sweep.max_d = sweep.max_d.max(d);
        if d > threshold {
            sweep.positive += 1;
        }
    }
    Ok(sweep)
}

/// One shock of `psi` with traces taken from a reference and the dissipation-minimizing
/// shift speed in the family window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShockSample {
    pub t: f64,
    pub s0: f64,
    pub a_right: f64,
    pub h_dot: f64,
    pub rh: f64,
    pub d: f64,
}

impl ShockSample {
    /// `a_2 s_0 (h' - lambda)^2`.
    pub fn unit(&self) -> f64 {
        self.a_right * self.s0 * (self.h_dot - self.rh).powi(2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShockSweep {
    pub samples: Vec<ShockSample>,
    /// Largest `K` with `D <= -K a_2 s_0 (h' - lambda)^2` on every sample; infinite
    /// when no sample moved off the Rankine–Hugoniot speed.
    pub k: f64,
    /// Samples with `D > tol` (no `K > 0` can cover them).
    pub positive: usize,
}

/// Shock dissipation of `psi`'s shocks at `times` against traces of `reference`,
/// with `a_1 = 1` and `a_2 = 1 -+ C1 s0` inside the ratio windows.
pub fn shock_sweep(
    reference: &Trajectory,
    psi: &Trajectory,
    times: &[f64],
    c1: f64,
    gas: &GasParameters,
    tol: f64,
) -> Result<ShockSweep> {
    let mut out = ShockSweep {
        samples: Vec::new(),
        k: f64::INFINITY,
        positive: 0,
    };
    for &t in times {
        let p = psi.profile_at(t, Side::After);
        let r = reference.profile_at(t, Side::After);
        for f in p.fronts.iter().filter(|f| f.is_shock()) {
            let Some(window) = psi.params.shift_window(f.family) else {
                continue;
            };
            let s0 = f.jump();
            let a_right = match f.family {
                Family::One => 1.0 - c1 * s0,
                _ => 1.0 + c1 * s0,
            };
            let rh = f.rh_speed(gas)?;
            let shift = ShiftContext {
                front: f,
                time: t,
                position: f.position,
                rh_speed: rh,
                window,
                gas,
            };
            let (u_minus, u_plus) = front_traces(&r, f.position);
            let h_dot = minimize_dissipation(&TraceContext {
                shift: &shift,
                u_minus,
                u_plus,
                a_left: 1.0,
                a_right,
            });
            let d = dissipation_at_front((u_minus, u_plus), f, t, 1.0, a_right, h_dot, gas)?.d;
            let s = ShockSample {
                t,
                s0,
                a_right,
                h_dot,
                rh,
                d,
            };
            if d > tol {
                out.positive += 1;
            }
            let unit = s.unit();
            if unit > 0.0 {
                out.k = out.k.min(-d / unit);
            }
            out.samples.push(s);
        }
    }
    Ok(out)
}

/// Merges sweeps: the common `K` is the smallest one.
pub fn merge_shock_sweeps(sweeps: Vec<ShockSweep>) -> ShockSweep {
    let mut out = ShockSweep {
        samples: Vec::new(),
        k: f64::INFINITY,
        positive: 0,
    };
    for s in sweeps {
        out.k = out.k.min(s.k);
        out.positive += s.positive;
        out.samples.extend(s.samples);
    }
    out
}

/// Runs the entropy ledger on every data set at the coarsest `nu`: the reference is
/// the partner run at the finest `nu`, `psi` tracks the data set with trace-driven
/// shifts against it. `metric` is the largest relative consistency defect.
#[allow(clippy::too_many_arguments)]
pub fn ledger_check<P>(
    runs: &[SuiteRun],
    spec: &SuiteSpec,
    params: P,
    kappa: f64,
    c1: f64,
    bounds: &StateBox,
    gas: &GasParameters,
    tol: f64,
) -> Result<(CheckOutcome, f64)>
where
    P: Fn(f64) -> SchemeParameters + Sync,
{
    if !(kappa > 0.0) {
        // the audit needs kappa > 0; report the check as failed instead of aborting
        return Ok((
            CheckOutcome {
                name: "entropy_ledger".into(),
                passed: false,
                samples: 0,
                violations: 0,
                metric: f64::NAN,
                threshold: tol,
            },
            f64::NAN,
        ));
    }
    let coarse = spec.nu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let fine = spec.nu.iter().copied().fold(f64::INFINITY, f64::min);
    let waves = Waves::new(*gas);
    let r = 0.5 * (spec.interval.1 - spec.interval.0);
    let center = 0.5 * (spec.interval.0 + spec.interval.1);
    if center.abs() > 1e-12 * r {
        return Err(Error::Config("ledger check needs an interval centered at 0".into()));
    }
    let pairs: Vec<(&SuiteRun, &SuiteRun)> = runs
        .iter()
        .filter(|a| a.nu == coarse)
        .filter_map(|a| runs.iter().find(|b| b.index == a.index && b.nu == fine).map(|b| (a, b)))
        .collect();
    let ledgers = pairs
        .par_iter()
        .map(|(a, b)| {
            let reference = Arc::new(b.v.clone());
            let policy = TraceDriven::new(reference.clone(), c1, None);
            let tracker = FrontTracker::new(*gas, a.u.params);
            let psi = tracker.evolve(&a.u.initial, spec.t_end, Some(&policy))?;
            let mut range = vec![psi.initial.leftmost_state];
            range.extend(psi.initial.fronts.iter().map(|f| f.right_state));
            range.extend(psi.events.iter().flat_map(|e| e.added.iter().map(|f| f.right_state)));
            let s = info_speed(bounds, &range, 6, params(coarse).lambda_hat, &waves)?.s;
            let settings = AuditSettings {
                r,
                tau: spec.t_end,
                s,
                kappa,
                c1,
            };
            quadrilateral_audit(&reference, &psi, settings, bounds, gas)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut worst: f64 = 0.0;
    let mut k: f64 = 0.0;
    let mut violations = 0;
    for l in &ledgers {
        let scale = 1.0 + l.initial_energy.abs() + l.terminal_energy.abs();
        let defect = l.consistency.abs() / scale;
        worst = worst.max(defect);
        if defect > tol {
            violations += 1;
        }
        k = k.max(l.required_k());
    }
    Ok((
        CheckOutcome {
            name: "entropy_ledger".into(),
            passed: violations == 0,
            samples: ledgers.len(),
            violations,
            metric: worst,
            threshold: tol,
        },
        k,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> SuiteSpec {
        SuiteSpec {
            runs: 2,
            nu: vec![1e-2, 5e-3],
            tv: 0.05,
            waves: 6,
            t_end: 0.5,
            interval: (-1.0, 1.0),
            partner_scale: 0.05,
            samples: 4,
        }
    }

    fn params(nu: f64) -> SchemeParameters {
        SchemeParameters::for_box(nu, &StateBox::default(), &GasParameters::default())
    }

    #[test]
    fn random_data_respects_variation_and_is_seeded() {
        let gas = GasParameters::default();
        let waves = Waves::new(gas);
        let base = StateBox::default().reference;
        let s = spec();
        for seed in 0..10 {
            let (a, b) = random_data(&waves, base, &s, seed).unwrap();
            for d in [&a, &b] {
                let InitialData::Waves { waves: specs, .. } = d else {
                    panic!("wave data expected")
                };
                let tv = step_variation(&waves, base, specs).unwrap();
                assert!(tv <= s.tv && tv > 0.5 * s.tv, "{tv}");
            }
            assert_ne!(a, b);
            assert_eq!(random_data(&waves, base, &s, seed).unwrap().0, a);
        }
    }

    #[test]
    fn suite_passes_checks_at_calibrated_constants() {
        let gas = GasParameters::default();
        let bounds = StateBox::default();
        let s = spec();
        let runs = run_suite(&s, &gas, &bounds, params, 11).unwrap();
        assert_eq!(runs.len(), 4);
        assert_eq!((runs[1].index, runs[1].nu), (0, 5e-3));
        let [up, w] = decay_checks(&runs, 64.0, 0.5, &bounds, 1e-12).unwrap();
        assert!(up.passed && w.passed, "{up:?} {w:?}");
        let waves = Waves::new(gas);
        let k = crate::bly::calibrate_l1_constant(&waves, &bounds, 500, 0.1, 1).unwrap();
        let eq = phi_equivalence_check(&runs, &s.times(), &BlyConstants::default(), &waves, k).unwrap();
        assert!(eq.passed, "{eq:?}");
        let profiles: Vec<Profile> = runs.iter().map(|r| r.u.final_profile()).collect();
        let c = contact_sweep(&profiles, 64.0, 0.5, &bounds, &gas, 200, 0.05, 2).unwrap();
        assert_eq!(c.positive, 0, "{c:?}");
        let (l, k) = ledger_check(&runs, &s, params, 64.0, 0.5, &bounds, &gas, 1e-9).unwrap();
        assert!(l.passed && l.samples == 2 && k.is_finite(), "{l:?}");
    }

    #[test]
    fn zero_kappa_breaks_decay() {
        let gas = GasParameters::default();
        let bounds = StateBox::default();
        let runs = run_suite(&spec(), &gas, &bounds, params, 11).unwrap();
        let [up, _] = decay_checks(&runs, 0.0, 0.5, &bounds, 1e-12).unwrap();
        assert!(!up.passed && up.violations > 0);
    }

    #[test]
    fn shock_sweep_against_own_traces_is_neutral() {
        let gas = GasParameters::default();
        let bounds = StateBox::default();
        let runs = run_suite(&spec(), &gas, &bounds, params, 3).unwrap();
        let t = &runs[0].u;
        let sw = shock_sweep(t, t, &[0.1, 0.3], 0.5, &gas, 1e-14).unwrap();
        assert!(!sw.samples.is_empty());
        assert_eq!(sw.positive, 0);
        assert!(sw.samples.iter().all(|s| s.d.abs() < 1e-14));
    }
}
