//! Glimm functionals `L`, `Q`, `Upsilon = L + kappa Q` and the space-time weight `a(x, t)`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::front::{Front, FrontKind, Profile};
use crate::gas::{GasParameters, StateBox};
use crate::tracker::{Side, Trajectory};
use crate::waves::Family;

/// Whether `left` (positioned to the left) and `right` approach each other.
pub fn approaching(left: &Front, right: &Front) -> bool {
    let (a, b) = (left.family, right.family);
    a > b
        || (a == b
            && a.is_genuinely_nonlinear()
            && (left.kind == FrontKind::Shock || right.kind == FrontKind::Shock))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairContribution {
    pub left_id: u64,
    pub right_id: u64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlimmReport {
    pub l: f64,
    pub q: f64,
    pub kappa: f64,
    pub upsilon: f64,
    pub pairs: Vec<PairContribution>,
}

/// Full report with every approaching pair listed.
pub fn glimm(p: &Profile, kappa: f64) -> GlimmReport {
    let l: f64 = p.fronts.iter().map(Front::strength).sum();
    let mut pairs = Vec::new();
    for (i, a) in p.fronts.iter().enumerate() {
        for b in &p.fronts[i + 1..] {
            if approaching(a, b) {
                pairs.push(PairContribution {
                    left_id: a.id,
                    right_id: b.id,
                    value: a.strength() * b.strength(),
                });
            }
        }
    }
    let q = pairs.iter().map(|c| c.value).sum();
    GlimmReport {
        l,
        q,
        kappa,
        upsilon: l + kappa * q,
        pairs,
    }
}

/// `(L, Q)` in one left-to-right sweep.
pub fn glimm_totals(p: &Profile) -> (f64, f64) {
    // strength seen so far, per family index, all fronts and shocks only
    let mut all = [0.0f64; 5];
    let mut shocks = [0.0f64; 5];
    let (mut l, mut q) = (0.0, 0.0);
    for f in &p.fronts {
        let s = f.strength();
        let k = f.family.index();
        let higher: f64 = all[k + 1..].iter().sum();
        let mut partner = higher;
        if f.family.is_genuinely_nonlinear() {
            partner += if f.kind == FrontKind::Shock {
                all[k]
            } else {
                shocks[k]
            };
        }
        q += s * partner;
        l += s;
        all[k] += s;
        if f.kind == FrontKind::Shock {
            shocks[k] += s;
        }
    }
    (l, q)
}

pub fn upsilon(p: &Profile, kappa: f64) -> f64 {
    let (l, q) = glimm_totals(p);
    l + kappa * q
}

/// Signed strength entering the weight: `dtheta / (C1 J)` on contacts, `-|du|` on
/// shocks, `+|du|` on rarefaction steps and non-physical fronts.
pub fn sigma_bar(front: &Front, c1: f64, j: f64, gas: &GasParameters) -> f64 {
    match front.kind {
        FrontKind::Contact => {
            let dtheta = front.right_state.temperature(gas) - front.left_state.temperature(gas);
            dtheta / (c1 * j)
        }
        FrontKind::Shock => -front.jump(),
        FrontKind::RarefactionStep | FrontKind::NonPhysical => front.jump(),
    }
}

/// Piecewise-constant weight: `levels[k]` holds on the cell right of front `k - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightProfile {
    pub time: f64,
    pub c1: f64,
    pub j: f64,
    pub kappa: f64,
    pub upsilon: f64,
    pub positions: Vec<f64>,
    pub sigma_bars: Vec<f64>,
    pub levels: Vec<f64>,
}

impl WeightProfile {
    /// Right-continuous value at `x`.
    pub fn at(&self, x: f64) -> f64 {
        self.levels[self.positions.partition_point(|&p| p <= x)]
    }

    pub fn left_of(&self, x: f64) -> f64 {
        self.levels[self.positions.partition_point(|&p| p < x)]
    }

    pub fn min(&self) -> f64 {
        self.levels.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.levels.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Builds `a` from the left: `a = 1 + C1 Upsilon` on the far left, decreased by
/// `C1 |du|` across 1-shocks, increased by `C1 |du|` across 3-shocks, scaled by
/// `theta_R / theta_L` across contacts, constant elsewhere.
pub fn build_weight(
    p: &Profile,
    kappa: f64,
    c1: f64,
    bounds: &StateBox,
    gas: &GasParameters,
) -> Result<WeightProfile> {
    let j = bounds.j_constant(gas);
    let ups = upsilon(p, kappa);
    let mut a = 1.0 + c1 * ups;
    let mut levels = Vec::with_capacity(p.fronts.len() + 1);
    let mut sigma_bars = Vec::with_capacity(p.fronts.len());
    levels.push(a);
    for f in &p.fronts {
        let sb = sigma_bar(f, c1, j, gas);
        let neg = |x: f64| (-x).max(0.0);
        a += match (f.kind, f.family) {
            (FrontKind::Contact, _) => {
                let theta_l = f.left_state.temperature(gas);
                c1 * (j * a / theta_l) * sb
            }
            (FrontKind::Shock, Family::One) => -c1 * neg(sb),
            (FrontKind::Shock, Family::Three) => c1 * neg(sb),
            _ => 0.0,
        };
        if !(a > 0.0) {
            return Err(Error::Config(format!(
                "weight became non-positive ({a}) at front {}; C1 = {c1} is too large",
                f.id
            )));
        }
        sigma_bars.push(sb);
        levels.push(a);
    }
    Ok(WeightProfile {
        time: p.time,
        c1,
        j,
        kappa,
        upsilon: ups,
        positions: p.fronts.iter().map(|f| f.position).collect(),
        sigma_bars,
        levels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioCheck {
    pub front_id: u64,
    pub kind: FrontKind,
    pub family: Family,
    pub ratio: f64,
    pub lower: f64,
    pub upper: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub checks: Vec<RatioCheck>,
    pub violations: usize,
}

/// Verifies `a_R / a_L` at every front: equality `theta_R / theta_L` (relative 1e-12)
/// on contacts, the 1-shock window `[1 - 2 C1 s0, 1 - C1 s0 / 2]`, the 3-shock window
/// `[1 + C1 s0 / 2, 1 + 2 C1 s0]`, and ratio one elsewhere.
pub fn check_ratios(w: &WeightProfile, p: &Profile, gas: &GasParameters) -> RatioReport {
    let mut rep = RatioReport::default();
    for (k, f) in p.fronts.iter().enumerate() {
        let ratio = w.levels[k + 1] / w.levels[k];
        let s0 = f.jump();
        let c1 = w.c1;
        let (lower, upper, ok) = match (f.kind, f.family) {
            (FrontKind::Contact, _) => {
                let target = f.right_state.temperature(gas) / f.left_state.temperature(gas);
                (target, target, ((ratio - target) / target).abs() <= 1e-12)
            }
            (FrontKind::Shock, Family::One) => {
                let (lo, hi) = (1.0 - 2.0 * c1 * s0, 1.0 - 0.5 * c1 * s0);
                (lo, hi, ratio >= lo && ratio <= hi)
            }
            (FrontKind::Shock, _) => {
                let (lo, hi) = (1.0 + 0.5 * c1 * s0, 1.0 + 2.0 * c1 * s0);
                (lo, hi, ratio >= lo && ratio <= hi)
            }
            _ => (1.0, 1.0, ratio == 1.0),
        };
        if !ok {
            rep.violations += 1;
        }
        rep.checks.push(RatioCheck {
            front_id: f.id,
            kind: f.kind,
            family: f.family,
            ratio,
            lower,
            upper,
            ok,
        });
    }
    rep
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayEvent {
    pub time: f64,
    pub position: f64,
    pub upsilon_before: f64,
    pub upsilon_after: f64,
    /// Largest `a(x, t+) - a(x, t-)` over cells of positive width.
    pub max_weight_increase: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub events: Vec<DecayEvent>,
    pub upsilon_violations: usize,
    pub weight_violations: usize,
    pub ratio_violations: usize,
    pub tolerance: f64,
}

impl DecayReport {
    pub fn passed(&self) -> bool {
        self.upsilon_violations == 0 && self.weight_violations == 0 && self.ratio_violations == 0
    }

    pub fn max_upsilon_increase(&self) -> f64 {
        self.events
            .iter()
            .map(|e| e.upsilon_after - e.upsilon_before)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Largest `after - before` over the common refinement of the two weights, skipping
/// cells narrower than roundoff.
fn max_increase(before: &WeightProfile, after: &WeightProfile) -> f64 {
    let mut cuts: Vec<f64> = before
        .positions
        .iter()
        .chain(after.positions.iter())
        .copied()
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut worst = after.levels[0] - before.levels[0];
    let last = *after.levels.last().expect("nonempty") - *before.levels.last().expect("nonempty");
    worst = worst.max(last);
    for w in cuts.windows(2) {
        if w[1] - w[0] > 1e-12 * (1.0 + w[0].abs().max(w[1].abs())) {
            let mid = 0.5 * (w[0] + w[1]);
            worst = worst.max(after.at(mid) - before.at(mid));
        }
    }
    worst
}

/// Scans every interaction: `Upsilon(t+) <= Upsilon(t-) + tol`, pointwise decay of
/// `a` away from the interaction point, and the ratio windows after the event.
pub fn weight_decay_audit(
    traj: &Trajectory,
    kappa: f64,
    c1: f64,
    bounds: &StateBox,
    tol: f64,
) -> Result<DecayReport> {
    let gas = &traj.gas;
    let mut rep = DecayReport {
        tolerance: tol,
        ..Default::default()
    };
    let mut r = traj.replay();
    let initial = r.profile(traj.initial.time);
    rep.ratio_violations += check_ratios(&build_weight(&initial, kappa, c1, bounds, gas)?, &initial, gas).violations;
    while let Some(ev) = r.next_event() {
        let before = r.profile(ev.time);
        r.advance();
        if !ev.is_interaction() {
            continue;
        }
        let after = r.profile(ev.time);
        let wb = build_weight(&before, kappa, c1, bounds, gas)?;
        let wa = build_weight(&after, kappa, c1, bounds, gas)?;
        let inc = max_increase(&wb, &wa);
        if wa.upsilon > wb.upsilon + tol {
            rep.upsilon_violations += 1;
        }
        if inc > tol {
            rep.weight_violations += 1;
        }
        rep.ratio_violations += check_ratios(&wa, &after, gas).violations;
        rep.events.push(DecayEvent {
            time: ev.time,
            position: ev.position,
            upsilon_before: wb.upsilon,
            upsilon_after: wa.upsilon,
            max_weight_increase: inc,
        });
    }
    Ok(rep)
}

/// Smallest power of two `kappa` in `[1, 1024]` for which `Upsilon` and the weight
/// decay (within `tol`) at every interaction of every trajectory.
pub fn calibrate_kappa(
    trajs: &[Trajectory],
    c1: f64,
    bounds: &StateBox,
    tol: f64,
) -> Result<Option<f64>> {
    for k in 0..=10 {
        let kappa = f64::from(1u32 << k);
        let mut ok = true;
        for t in trajs {
            let rep = weight_decay_audit(t, kappa, c1, bounds, tol)?;
            if rep.upsilon_violations > 0 || rep.weight_violations > 0 {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(Some(kappa));
        }
    }
    Ok(None)
}

/// Halves `C1` from `start` until every sampled weight is positive and every ratio window holds.
pub fn calibrate_c1(
    profiles: &[Profile],
    kappa: f64,
    start: f64,
    bounds: &StateBox,
    gas: &GasParameters,
) -> Option<f64> {
    let mut c1 = start;
    for _ in 0..30 {
        let ok = profiles.iter().all(|p| {
            build_weight(p, kappa, c1, bounds, gas)
                .map(|w| check_ratios(&w, p, gas).violations == 0)
                .unwrap_or(false)
        });
        if ok {
            return Some(c1);
        }
        c1 *= 0.5;
    }
    None
}

/// `(t, L, Q, Upsilon)` at the given times (profiles after events at equal times).
pub fn glimm_series(traj: &Trajectory, kappa: f64, times: &[f64]) -> Vec<[f64; 4]> {
    times
        .iter()
        .map(|&t| {
            let (l, q) = glimm_totals(&traj.profile_at(t, Side::After));
            [t, l, q, l + kappa * q]
        })
        .collect()
}

pub fn glimm_series_csv(rows: &[[f64; 4]]) -> String {
    let mut s = String::from("t,L,Q,upsilon\n");
    for r in rows {
        let _ = writeln!(s, "{:e},{:e},{:e},{:e}", r[0], r[1], r[2], r[3]);
    }
    s
}
