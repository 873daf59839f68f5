//! The experiment commands: each turns a run configuration into a set of artifacts
//! and a pass/fail verdict.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::bly::{calibrate_l1_constant, fit_slope_constants, phi_slope_monitor, shrink_kappas};
use crate::config::{Check, RunConfig, ShiftConfig, CONFIG_SCHEMA_VERSION};
use crate::entropy::{info_speed, QuadLedger};
use crate::error::{Error, Result};
use crate::front::{FrontTracker, Profile, DROP};
use crate::gas::{relative_entropy_constant, GasParameters, State};
use crate::glimm::{calibrate_c1, calibrate_kappa, glimm_series, glimm_series_csv};
use crate::holder::{holder_experiment, Environment, HolderResult};
use crate::suite::{
    contact_sweep, decay_checks, ledger_check, merge_shock_sweeps, phi_equivalence_check, run_suite, shock_sweep,
    CheckOutcome, SuiteRun, SuiteSpec,
};
use crate::tracker::{ConstantOffset, ShiftPolicy, Side, Trajectory};
use crate::waves::{rh_residual, Family, WaveKind, Waves};

/// Files produced by one command, written together by [`Artifacts::write_to`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Artifacts {
    files: BTreeMap<String, Vec<u8>>,
    hash: String,
}

impl Artifacts {
    pub fn new(config_hash: &str) -> Self {
        Self {
            files: BTreeMap::new(),
            hash: config_hash.to_string(),
        }
    }

    /// Adds a CSV file; the first line records the config hash as a comment.
    pub fn csv(&mut self, name: &str, body: &str) {
        let text = format!("# config_hash={}\n{body}", self.hash);
        self.files.insert(name.to_string(), text.into_bytes());
    }

    /// Adds a JSON document carrying `schema_version` and `config_hash`.
    pub fn json<T: Serialize>(&mut self, name: &str, body: &T) -> Result<()> {
        let mut v = serde_json::to_value(body).map_err(|e| Error::Io(e.to_string()))?;
        let doc = match v {
            Value::Object(ref mut m) => {
                m.insert("schema_version".into(), json!(CONFIG_SCHEMA_VERSION));
                m.insert("config_hash".into(), json!(self.hash));
                v
            }
            other => json!({
                "schema_version": CONFIG_SCHEMA_VERSION,
                "config_hash": self.hash,
                "data": other,
            }),
        };
        let mut text = serde_json::to_string_pretty(&doc).map_err(|e| Error::Io(e.to_string()))?;
        text.push('\n');
        self.files.insert(name.to_string(), text.into_bytes());
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(String::as_str)
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.get(name).map(Vec::as_slice)
    }

    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let io = |e: std::io::Error, p: &Path| Error::Io(format!("{}: {e}", p.display()));
        std::fs::create_dir_all(dir).map_err(|e| io(e, dir))?;
        let mut out = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            let p = dir.join(name);
            std::fs::write(&p, bytes).map_err(|e| io(e, &p))?;
            out.push(p);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub artifacts: Artifacts,
    pub passed: bool,
    pub summary: String,
}

fn section<'a, T>(s: &'a Option<T>, name: &'static str, stage: &'static str) -> Result<&'a T> {
    s.as_ref()
        .ok_or_else(|| Error::Config(format!("the configuration has no [{name}] section")).in_stage(stage))
}

/// One wave of a solved fan, as written to the fan table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FanRow {
    pub family: usize,
    pub kind: WaveKind,
    pub sigma: f64,
    pub left: State,
    pub right: State,
    /// Shock or contact speed; the fan edges for a rarefaction.
    pub speed_left: f64,
    pub speed_right: f64,
    /// Rankine–Hugoniot residual at the shock speed; zero otherwise.
    pub rh_residual: f64,
    /// `lambda(u_L) > s > lambda(u_R)` for shocks, `lambda(u_L) < lambda(u_R)` for rarefactions.
    pub lax: bool,
}

pub fn fan_rows(waves: &Waves, left: &State, right: &State) -> Result<(Vec<FanRow>, f64)> {
    if left == right {
        return Ok((Vec::new(), 0.0));
    }
    let gas = &waves.gas;
    let fan = waves.solve_riemann(left, right)?;
    let states = fan.states();
    let mut rows = Vec::new();
    for (k, fam) in Family::PHYSICAL.into_iter().enumerate() {
        let Some(kind) = fan.wave_kinds[k] else {
            continue;
        };
        // same cut as the tracker: roundoff-sized waves are not fronts
        if fan.sigmas[k].abs() < DROP {
            continue;
        }
        let (a, b) = (states[k], states[k + 1]);
        let row = match kind {
            WaveKind::Shock => {
                let s = crate::waves::rh_speed_of(&a, &b, gas);
                let (la, lb) = (waves.lambda(&a, fam), waves.lambda(&b, fam));
                FanRow {
                    family: fam.index(),
                    kind,
                    sigma: fan.sigmas[k],
                    left: a,
                    right: b,
                    speed_left: s,
                    speed_right: s,
                    rh_residual: rh_residual(&a, &b, s, gas),
                    lax: la > s && s > lb,
                }
            }
            WaveKind::Rarefaction => {
                let (la, lb) = (waves.lambda(&a, fam), waves.lambda(&b, fam));
                FanRow {
                    family: fam.index(),
                    kind,
                    sigma: fan.sigmas[k],
                    left: a,
                    right: b,
                    speed_left: la,
                    speed_right: lb,
                    rh_residual: 0.0,
                    lax: la < lb,
                }
            }
            WaveKind::Contact => FanRow {
                family: fam.index(),
                kind,
                sigma: fan.sigmas[k],
                left: a,
                right: b,
                speed_left: 0.0,
                speed_right: 0.0,
                rh_residual: rh_residual(&a, &b, 0.0, gas),
                lax: true,
            },
        };
        rows.push(row);
    }
    Ok((rows, fan.residual))
}

fn fan_csv(rows: &[FanRow]) -> String {
    let mut s = String::from(
        "family,kind,sigma,left_tau,left_w,left_e,right_tau,right_w,right_e,speed_left,speed_right,rh_residual,lax\n",
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{},{:?},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}",
            r.family,
            r.kind,
            r.sigma,
            r.left.tau,
            r.left.w,
            r.left.e_total,
            r.right.tau,
            r.right.w,
            r.right.e_total,
            r.speed_left,
            r.speed_right,
            r.rh_residual,
            r.lax
        );
    }
    s
}

/// Solves the configured Riemann problem and writes its fan.
pub fn cmd_riemann(cfg: &RunConfig) -> Result<Outcome> {
    let r = section(&cfg.riemann, "riemann", "riemann data")?;
    let gas = cfg.gas_parameters()?;
    let waves = Waves::new(gas).with_bounds(cfg.state_box);
    let (rows, residual) = fan_rows(&waves, &r.left, &r.right).map_err(|e| e.in_stage("riemann solver"))?;
    let passed = rows.iter().all(|w| w.lax && w.rh_residual <= 1e-10) && residual <= 1e-9;
    let mut a = Artifacts::new(&cfg.hash());
    a.csv("riemann_fan.csv", &fan_csv(&rows));
    a.json(
        "riemann_fan.json",
        &json!({ "left": r.left, "right": r.right, "composition_residual": residual, "waves": rows, "passed": passed }),
    )?;
    Ok(Outcome {
        artifacts: a,
        passed,
        summary: format!("{} waves, composition residual {residual:e}", rows.len()),
    })
}

fn time_label(t: f64) -> String {
    format!("{t:.6}").replace('.', "p")
}

/// Front tracking from the configured data, with an optional constant shift.
pub fn cmd_evolve(cfg: &RunConfig) -> Result<Outcome> {
    let e = section(&cfg.evolve, "evolve", "evolve data")?;
    let gas = cfg.gas_parameters()?;
    let waves = Waves::new(gas);
    let params = cfg.scheme_at(cfg.scheme.nu, &gas);
    let tracker = FrontTracker::new(gas, params);
    let data = e.data.function(&waves).map_err(|x| x.in_stage("evolve data"))?;
    let p0 = tracker
        .discretize_initial(|x| data.eval(x), e.interval, &cfg.state_box)
        .map_err(|x| x.in_stage("discretize data"))?;
    let shift = match e.shift {
        ShiftConfig::None => None,
        ShiftConfig::Constant { offset, family } => Some(ConstantOffset {
            offset,
            family: family.and_then(Family::from_index),
        }),
    };
    let policy = shift.as_ref().map(|s| s as &dyn ShiftPolicy);
    let traj = tracker
        .evolve(&p0, e.t_end, policy)
        .map_err(|x| x.in_stage("front tracking"))?;
    let mut a = Artifacts::new(&cfg.hash());
    a.json("trajectory.json", &json!({ "trajectory": traj }))?;
    for &t in &e.profile_times {
        a.csv(&format!("profile_t{}.csv", time_label(t)), &traj.profile_at(t, Side::After).to_csv());
    }
    let n = e.series_points;
    let times: Vec<f64> = (0..n).map(|k| e.t_end * k as f64 / (n - 1) as f64).collect();
    let series = glimm_series(&traj, params.kappa, &times);
    a.csv("glimm_series.csv", &glimm_series_csv(&series));
    let last = traj.final_profile();
    let summary = json!({
        "events": traj.events.len(),
        "stats": traj.stats,
        "fronts_final": last.fronts.len(),
        "np_total_final": last.np_total(),
        "total_variation_final": last.total_variation(),
        "upsilon_initial": series[0][3],
        "upsilon_final": series[n - 1][3],
    });
    a.json("evolve_summary.json", &summary)?;
    Ok(Outcome {
        artifacts: a,
        passed: true,
        summary: format!(
            "{} events, {} fronts at t = {}, NP mass {:e}",
            traj.events.len(),
            last.fronts.len(),
            e.t_end,
            last.np_total()
        ),
    })
}

fn profiles_at(runs: &[SuiteRun], times: &[f64]) -> Vec<Profile> {
    runs.iter()
        .flat_map(|r| [&r.u, &r.v])
        .flat_map(|t| times.iter().map(move |&s| t.profile_at(s, Side::After)))
        .collect()
}

/// `(reference, psi)` pairs: each data set's partner at the finest `nu` against the
/// data set itself at the coarsest `nu`.
fn fine_coarse_pairs<'a>(runs: &'a [SuiteRun], spec: &SuiteSpec) -> Vec<(&'a Trajectory, &'a Trajectory)> {
    let fine = spec.nu.iter().copied().fold(f64::INFINITY, f64::min);
    let coarse = spec.nu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    runs.iter()
        .filter(|r| r.nu == coarse)
        .filter_map(|r| {
            runs.iter()
                .find(|f| f.index == r.index && f.nu == fine)
                .map(|f| (&f.v, &r.u))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub runs: usize,
    pub events: usize,
    pub kappa: f64,
    pub c1: f64,
    pub k_l1: Option<f64>,
    pub shock_k: Option<f64>,
    pub ledger_k: Option<f64>,
    pub checks: Vec<CheckOutcome>,
}

/// Runs the selected invariant checks on a seeded suite.
pub fn cmd_validate(cfg: &RunConfig) -> Result<Outcome> {
    let v = section(&cfg.validate, "validate", "validation suite")?;
    if v.checks.is_empty() {
        return Err(Error::Usage("no checks selected".into()));
    }
    let gas = cfg.gas_parameters()?;
    let bounds = &cfg.state_box;
    let waves = Waves::new(gas);
    let kappa = cfg.scheme.kappa;
    let c1 = cfg.weight.c1;
    let params = |nu| cfg.scheme_at(nu, &gas);
    let runs = run_suite(&v.suite, &gas, bounds, params, cfg.seed).map_err(|e| e.in_stage("suite runs"))?;
    let times = v.suite.times();
    let mut report = ValidationReport {
        passed: true,
        runs: runs.len(),
        events: runs.iter().map(|r| r.u.events.len() + r.v.events.len()).sum(),
        kappa,
        c1,
        k_l1: None,
        shock_k: None,
        ledger_k: None,
        checks: Vec::new(),
    };
    let mut checks = v.checks.clone();
    checks.sort();
    checks.dedup();
    if checks.contains(&Check::UpsilonDecay) || checks.contains(&Check::WeightConstraints) {
        let [up, w] = decay_checks(&runs, kappa, c1, bounds, v.tolerance).map_err(|e| e.in_stage("decay audit"))?;
        if checks.contains(&Check::UpsilonDecay) {
            report.checks.push(up);
        }
        if checks.contains(&Check::WeightConstraints) {
            report.checks.push(w);
        }
    }
    if checks.contains(&Check::PhiEquivalence) {
        let k = calibrate_l1_constant(&waves, bounds, v.l1_samples, 4.0 * v.suite.tv, cfg.seed)
            .map_err(|e| e.in_stage("l1 constant"))?;
        report.k_l1 = Some(k);
        report.checks.push(
            phi_equivalence_check(&runs, &times, &cfg.bly, &waves, k).map_err(|e| e.in_stage("phi equivalence"))?,
        );
    }
    if checks.contains(&Check::ContactDissipation) {
        let profiles = profiles_at(&runs, &times);
        let c = contact_sweep(&profiles, kappa, c1, bounds, &gas, v.contact_samples, 0.05, cfg.seed)
            .map_err(|e| e.in_stage("contact dissipation"))?;
        report.checks.push(CheckOutcome {
            name: "contact_dissipation".into(),
            passed: c.positive == 0,
            samples: c.samples,
            violations: c.positive,
            metric: c.max_d,
            threshold: c.threshold,
        });
    }
    if checks.contains(&Check::ShockDissipation) {
        let sweeps = fine_coarse_pairs(&runs, &v.suite)
            .into_iter()
            .map(|(r, p)| shock_sweep(r, p, &times, c1, &gas, v.tolerance))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.in_stage("shock dissipation"))?;
        let s = merge_shock_sweeps(sweeps);
        report.shock_k = Some(s.k);
        report.checks.push(CheckOutcome {
            name: "shock_dissipation".into(),
            passed: s.positive == 0 && s.k > 0.0,
            samples: s.samples.len(),
            violations: s.positive,
            metric: s.k,
            threshold: 0.0,
        });
    }
    if checks.contains(&Check::EntropyLedger) {
        let (outcome, k) = ledger_check(&runs, &v.suite, params, kappa, c1, bounds, &gas, v.ledger_tolerance)
            .map_err(|e| e.in_stage("entropy ledger"))?;
        report.ledger_k = Some(k);
        report.checks.push(outcome);
    }
    report.passed = report.checks.iter().all(|c| c.passed);
    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    let summary = if failed.is_empty() {
        format!("{} checks passed on {} runs", report.checks.len(), report.runs)
    } else {
        format!("failed: {}", failed.join(", "))
    };
    let mut a = Artifacts::new(&cfg.hash());
    a.json("validation_report.json", &report)?;
    Ok(Outcome {
        artifacts: a,
        passed: report.passed,
        summary,
    })
}

/// Ledger totals without the per-quadrilateral table, plus its worst entries.
fn compact_ledger(l: &QuadLedger) -> Value {
    let mut short = l.clone();
    short.quads.clear();
    json!({ "totals": short, "worst_quads": l.worst_quads(5), "quads": l.quads.len() })
}

/// The stability experiment over the configured ladders.
pub fn cmd_holder(cfg: &RunConfig) -> Result<Outcome> {
    let h = section(&cfg.holder, "holder", "reference solution")?;
    let gas = cfg.gas_parameters()?;
    let hc = cfg.holder_config(h);
    let env = Environment {
        gas: &gas,
        bounds: &cfg.state_box,
        bly: &cfg.bly,
    };
    let res: HolderResult = holder_experiment(&hc, env)?;
    let tol = 1e-9;
    let balanced = res.rows.iter().all(|r| {
        r.ledger.consistency.abs() <= tol * (1.0 + r.ledger.initial_energy.abs() + r.ledger.terminal_energy.abs())
    });
    let passed = balanced && res.rows.iter().all(|r| r.triangle_ok && r.interpolation_ok);
    let rows: Vec<Value> = res
        .rows
        .iter()
        .map(|r| {
            json!({
                "nu": r.nu,
                "amplitude": r.amplitude,
                "s": r.s,
                "l2_initial": r.l2_initial,
                "terminal": r.terminal,
                "l2_u_psi": r.l2_u_psi,
                "l1_psi_v": r.l1_psi_v,
                "phi": r.phi,
                "cauchy_schwarz": r.cauchy_schwarz,
                "triangle_ok": r.triangle_ok,
                "interpolation_ok": r.interpolation_ok,
                "ledger_k": r.ledger_k(),
                "ledger": compact_ledger(&r.ledger),
            })
        })
        .collect();
    let mut a = Artifacts::new(&cfg.hash());
    a.csv("holder_table.csv", &res.to_csv());
    a.json(
        "holder_result.json",
        &json!({
            "passed": passed,
            "rows": rows,
            "fit": res.fit,
            "k_holder": res.k_holder,
            "k_ledger": res.k_ledger,
            "k_cauchy_schwarz": res.k_cauchy_schwarz,
            "max_consistency": res.max_consistency,
        }),
    )?;
    let fit = res
        .fit
        .map_or("no fit".to_string(), |f| format!("exponent {:.3} [{:.3}, {:.3}]", f.slope, f.ci95.0, f.ci95.1));
    Ok(Outcome {
        artifacts: a,
        passed,
        summary: format!("{} rows, K = {:.4}, {fit}", res.rows.len(), res.k_holder),
    })
}

fn states_of(runs: &[SuiteRun]) -> Vec<State> {
    let mut v = Vec::new();
    for t in runs.iter().flat_map(|r| [&r.u, &r.v]) {
        v.push(t.initial.leftmost_state);
        v.extend(t.initial.fronts.iter().map(|f| f.right_state));
        v.extend(t.events.iter().flat_map(|e| e.added.iter().map(|f| f.right_state)));
    }
    v.sort_by(|a, b| {
        a.tau
            .total_cmp(&b.tau)
            .then(a.w.total_cmp(&b.w))
            .then(a.e_total.total_cmp(&b.e_total))
    });
    v.dedup();
    v
}

/// Calibrates the constants of the checks on a seeded suite and records them with
/// the config hash.
pub fn cmd_calibrate(cfg: &RunConfig) -> Result<Outcome> {
    let c = section(&cfg.calibrate, "calibrate", "calibration suite")?;
    let gas: GasParameters = cfg.gas_parameters()?;
    let bounds = &cfg.state_box;
    let waves = Waves::new(gas);
    let hash = cfg.hash();
    let params = |nu| cfg.scheme_at(nu, &gas);
    let runs = run_suite(&c.suite, &gas, bounds, params, cfg.seed).map_err(|e| e.in_stage("suite runs"))?;
    let times = c.suite.times();
    let trajs: Vec<Trajectory> = runs.iter().flat_map(|r| [r.u.clone(), r.v.clone()]).collect();
    let profiles = profiles_at(&runs, &times);

    let mut ledger = crate::config::ConstantsLedger::new();
    let suite = "calibration";
    let kappa = calibrate_kappa(&trajs, cfg.weight.c1, bounds, c.tolerance).map_err(|e| e.in_stage("kappa"))?;
    let kappa_used = kappa.unwrap_or(cfg.scheme.kappa);
    if let Some(k) = kappa {
        ledger.record("kappa", k, suite, cfg, &hash);
    }
    let c1 = calibrate_c1(&profiles, kappa_used, c.c1_start, bounds, &gas);
    if let Some(v) = c1 {
        ledger.record("c1", v, suite, cfg, &hash);
    }
    let c1_used = c1.unwrap_or(cfg.weight.c1);
    let pairs: Vec<(Profile, Profile)> = runs
        .iter()
        .flat_map(|r| times.iter().map(move |&t| (r.u.profile_at(t, Side::After), r.v.profile_at(t, Side::After))))
        .collect();
    let bly = shrink_kappas(&pairs, cfg.bly, &waves).map_err(|e| e.in_stage("bly constants"))?;
    ledger.record("kappa1", bly.kappa1, suite, cfg, &hash);
    ledger.record("kappa2", bly.kappa2, suite, cfg, &hash);
    let k_l1 = calibrate_l1_constant(&waves, bounds, c.l1_samples, 4.0 * c.suite.tv, cfg.seed)
        .map_err(|e| e.in_stage("l1 constant"))?;
    ledger.record("k_l1", k_l1, suite, cfg, &hash);
    let c_star = relative_entropy_constant(bounds, &gas, 6).map_err(|e| e.in_stage("relative entropy constant"))?;
    ledger.record("c_star", c_star, suite, cfg, &hash);
    let coarse = params(c.suite.nu.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let speed = info_speed(bounds, &states_of(&runs), 6, coarse.lambda_hat, &waves)
        .map_err(|e| e.in_stage("information speed"))?;
    ledger.record("s", speed.s, suite, cfg, &hash);
    ledger.record("lambda_hat", coarse.lambda_hat, suite, cfg, &hash);
    ledger.record("alpha", coarse.alpha, suite, cfg, &hash);

    // Slope constants: unshifted pairs give C, constant offsets give K.
    let dt = c.suite.t_end / 400.0;
    let mut unshifted = Vec::new();
    let mut shifted = Vec::new();
    for r in &runs {
        unshifted.push(phi_slope_monitor(&r.u, &r.v, &bly, &waves, dt).map_err(|e| e.in_stage("phi slope"))?);
        let tracker = FrontTracker::new(gas, r.v.params);
        for &offset in &c.offsets {
            let policy = ConstantOffset { offset, family: None };
            let psi = tracker
                .evolve(&r.v.initial, c.suite.t_end, Some(&policy))
                .map_err(|e| e.in_stage("shifted run"))?;
            shifted.push(phi_slope_monitor(&r.u, &psi, &bly, &waves, dt).map_err(|e| e.in_stage("phi slope"))?);
        }
    }
    let (k_slope, c_slope) = fit_slope_constants(&unshifted, &shifted, c.margin);
    ledger.record("slope_k", k_slope, suite, cfg, &hash);
    ledger.record("slope_c", c_slope, suite, cfg, &hash);

    let sweeps = fine_coarse_pairs(&runs, &c.suite)
        .into_iter()
        .map(|(r, p)| shock_sweep(r, p, &times, c1_used, &gas, c.tolerance))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("shock dissipation"))?;
    let shock = merge_shock_sweeps(sweeps);
    if shock.k.is_finite() {
        ledger.record("shock_k", shock.k, suite, cfg, &hash);
    }
    let (lc, ledger_k) = ledger_check(&runs, &c.suite, params, kappa_used, c1_used, bounds, &gas, 1e-9)
        .map_err(|e| e.in_stage("entropy ledger"))?;
    ledger.record("ledger_k", ledger_k, suite, cfg, &hash);

    let passed = kappa.is_some() && c1.is_some() && shock.positive == 0 && lc.passed;
    let mut a = Artifacts::new(&hash);
    a.json("constants.json", &ledger)?;
    a.json(
        "calibration_details.json",
        &json!({
            "passed": passed,
            "runs": runs.len(),
            "kappa_found": kappa.is_some(),
            "c1_found": c1.is_some(),
            "information_speed": speed,
            "shock_positive": shock.positive,
            "shock_samples": shock.samples.len(),
            "ledger": lc,
            "slope_samples": unshifted.iter().chain(&shifted).map(|r| r.samples.len()).sum::<usize>(),
        }),
    )?;
    Ok(Outcome {
        artifacts: a,
        passed,
        summary: format!(
            "kappa {}, C1 {}, K_l1 {k_l1:.4}, slope (K, C) = ({k_slope:.4e}, {c_slope:.4e})",
            kappa.map_or("not found".into(), |k| k.to_string()),
            c1.map_or("not found".into(), |k| k.to_string())
        ),
    })
}
