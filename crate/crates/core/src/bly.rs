//! Weighted `L1`-equivalent distance `Phi(u, v)` between two front tracking profiles
//! and monitors of its time derivative.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::front::{FrontKind, Profile};
use crate::gas::{State, StateBox};
use crate::glimm::glimm_totals;
use crate::tracker::{Side, Trajectory};
use crate::waves::{Family, Waves};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveDecomposition {
    pub q: [f64; 3],
}

impl WaveDecomposition {
    pub fn l1(&self) -> f64 {
        self.q.iter().map(|v| v.abs()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlyConstants {
    pub kappa1: f64,
    pub kappa2: f64,
}

impl Default for BlyConstants {
    fn default() -> Self {
        Self {
            kappa1: 1.0,
            kappa2: 1.0,
        }
    }
}

pub fn decompose(waves: &Waves, u: &State, v: &State) -> Result<WaveDecomposition> {
    Ok(WaveDecomposition {
        q: waves.decompose(u, v)?,
    })
}

/// Memo of wave decompositions keyed by the exact bit patterns of both states.
#[derive(Debug, Default)]
pub struct DecompositionCache {
    map: HashMap<[u64; 6], [f64; 3]>,
}

impl DecompositionCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&mut self, waves: &Waves, u: &State, v: &State) -> Result<[f64; 3]> {
        if u == v {
            return Ok([0.0; 3]);
        }
        let key = [
            u.tau.to_bits(),
            u.w.to_bits(),
            u.e_total.to_bits(),
            v.tau.to_bits(),
            v.w.to_bits(),
            v.e_total.to_bits(),
        ];
        if let Some(q) = self.map.get(&key) {
            return Ok(*q);
        }
        let q = waves.decompose(u, v)?;
        self.map.insert(key, q);
        Ok(q)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Strengths of physical fronts by family, split by which profile they belong to.
#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    u: [f64; 3],
    v: [f64; 3],
}

/// `A_i` for a point with the given strength sums to its left and right and signs of `q`.
fn a_from_sums(left: &Sums, right: &Sums, q: &[f64; 3]) -> [f64; 3] {
    let mut a = [0.0; 3];
    for i in 0..3 {
        let mut s = 0.0;
        for k in 0..3 {
            if k > i {
                s += left.u[k] + left.v[k];
            }
            if k < i {
                s += right.u[k] + right.v[k];
            }
        }
        if i != 1 {
            s += if q[i] < 0.0 {
                left.u[i] + right.v[i]
            } else {
                left.v[i] + right.u[i]
            };
        }
        a[i] = s;
    }
    a
}

fn add_front(s: &mut [f64; 3], fam: Family, strength: f64) {
    if fam != Family::NonPhysical {
        s[fam.index() - 1] += strength;
    }
}

/// `(A_1, A_2, A_3)` at `x` (which should not coincide with a front); non-physical fronts are not counted.
pub fn a_fields(x: f64, u: &Profile, v: &Profile, q: &[f64; 3]) -> [f64; 3] {
    let mut left = Sums::default();
    let mut right = Sums::default();
    for (p, is_u) in [(u, true), (v, false)] {
        for f in &p.fronts {
            let side = if f.position < x { &mut left } else { &mut right };
            let arr = if is_u { &mut side.u } else { &mut side.v };
            add_front(arr, f.family, f.strength());
        }
    }
    a_from_sums(&left, &right, q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiValue {
    pub phi: f64,
    /// `||u - v||_{L1}` with the Euclidean norm of conserved variables.
    pub l1: f64,
    /// Extremes of `sum |q_i| / |v - u|` over cells where `u != v`.
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub min_weight: f64,
    pub max_weight: f64,
}

/// `Phi(u, v)` integrated exactly over the common refinement of both front sets.
pub fn phi(
    u: &Profile,
    v: &Profile,
    k: &BlyConstants,
    waves: &Waves,
    cache: &mut DecompositionCache,
) -> Result<PhiValue> {
    let (_, qu) = glimm_totals(u);
    let (_, qv) = glimm_totals(v);
    let base = 1.0 + k.kappa2 * (qu + qv);

    let mut marks: Vec<(f64, bool, usize)> = Vec::with_capacity(u.fronts.len() + v.fronts.len());
    marks.extend(u.fronts.iter().enumerate().map(|(i, f)| (f.position, true, i)));
    marks.extend(v.fronts.iter().enumerate().map(|(i, f)| (f.position, false, i)));
    marks.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut right = Sums::default();
    for f in &u.fronts {
        add_front(&mut right.u, f.family, f.strength());
    }
    for f in &v.fronts {
        add_front(&mut right.v, f.family, f.strength());
    }
    let mut left = Sums::default();
    let (mut su, mut sv) = (u.leftmost_state, v.leftmost_state);
    let mut out = PhiValue {
        phi: 0.0,
        l1: 0.0,
        min_ratio: f64::INFINITY,
        max_ratio: 0.0,
        min_weight: f64::INFINITY,
        max_weight: f64::NEG_INFINITY,
    };
    let mut x_left = f64::NEG_INFINITY;
    let mut idx = 0;
    loop {
        let x_right = marks.get(idx).map_or(f64::INFINITY, |m| m.0);
        let width = x_right - x_left;
        if width > 0.0 {
            let q = cache.get(waves, &su, &sv).map_err(|e| {
                Error::Stage {
                    stage: "phi cell decomposition",
                    source: Box::new(e),
                }
            })?;
            let a = a_from_sums(&left, &right, &q);
            let mut cell = 0.0;
            for i in 0..3 {
                let w = base + k.kappa1 * a[i];
                out.min_weight = out.min_weight.min(w);
                out.max_weight = out.max_weight.max(w);
                cell += q[i].abs() * w;
            }
            let d = su.distance(&sv);
            if d > 0.0 {
                if width.is_infinite() {
                    return Err(Error::Usage(format!(
                        "profiles differ on an unbounded cell starting at {x_left}"
                    )));
                }
                let ratio = q.iter().map(|v| v.abs()).sum::<f64>() / d;
                out.min_ratio = out.min_ratio.min(ratio);
                out.max_ratio = out.max_ratio.max(ratio);
                out.phi += width * cell;
                out.l1 += width * d;
            }
        }
        if idx == marks.len() {
            break;
        }
        // cross every front sitting at x_right
        while idx < marks.len() && marks[idx].0 == x_right {
            let (_, is_u, i) = marks[idx];
            let f = if is_u { &u.fronts[i] } else { &v.fronts[i] };
            let (l, r) = if is_u {
                (&mut left.u, &mut right.u)
            } else {
                (&mut left.v, &mut right.v)
            };
            add_front(l, f.family, f.strength());
            add_front(r, f.family, -f.strength());
            if is_u {
                su = f.right_state;
            } else {
                sv = f.right_state;
            }
            idx += 1;
        }
        x_left = x_right;
    }
    Ok(out)
}

/// Largest `max(ratio, 1/ratio)` of `sum |q_i| / |v - u|` over random pairs in the box
/// with `|v - u| <= max_dist`, times `1.05`.
pub fn calibrate_l1_constant(
    waves: &Waves,
    bounds: &StateBox,
    samples: usize,
    max_dist: f64,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 1.0;
    let lo = bounds.lower.to_vector();
    let hi = bounds.upper.to_vector();
    let mut done = 0;
    while done < samples {
        let mut u = lo;
        let mut dir = nalgebra::Vector3::zeros();
        for k in 0..3 {
            u[k] = rng.random_range(lo[k]..hi[k]);
            dir[k] = rng.random_range(-1.0..1.0);
        }
        let v = u + dir.normalize() * rng.random_range(1e-6..max_dist);
        let (us, vs) = (State::from_vector(&u), State::from_vector(&v));
        if !bounds.contains(&vs) {
            continue;
        }
        let q = waves.decompose(&us, &vs)?;
        let r = q.iter().map(|x| x.abs()).sum::<f64>() / us.distance(&vs);
        worst = worst.max(r).max(1.0 / r);
        done += 1;
    }
    Ok(1.05 * worst)
}

/// Halves both `kappa_1` and `kappa_2` until every weight is at most 2 on every pair.
pub fn shrink_kappas(
    pairs: &[(Profile, Profile)],
    start: BlyConstants,
    waves: &Waves,
) -> Result<BlyConstants> {
    let mut k = start;
    let mut cache = DecompositionCache::new();
    for _ in 0..40 {
        let mut ok = true;
        for (u, v) in pairs {
            if phi(u, v, &k, waves, &mut cache)?.max_weight > 2.0 {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(k);
        }
        k.kappa1 *= 0.5;
        k.kappa2 *= 0.5;
    }
    Err(Error::Config("kappa_1, kappa_2 could not be shrunk to W <= 2".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeSample {
    pub t: f64,
    pub phi: f64,
    pub slope: f64,
    /// `sum over shocks of psi of |jump| * |h' - h'_true|` at the start of the step.
    pub shift_term: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventJump {
    pub t: f64,
    pub phi_before: f64,
    pub phi_after: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SlopeReport {
    pub samples: Vec<SlopeSample>,
    pub events: Vec<EventJump>,
    pub skipped_windows: usize,
    pub windows: usize,
    pub min_l1_ratio: f64,
    pub max_l1_ratio: f64,
    pub max_weight: f64,
    pub min_weight: f64,
    pub nu: f64,
}

impl SlopeReport {
    pub fn max_slope(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.slope)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest `Phi(t+) - Phi(t-)` over events.
    pub fn max_event_increase(&self) -> f64 {
        self.events
            .iter()
            .map(|e| e.phi_after - e.phi_before)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Samples violating `slope <= K * shift_term + C * nu`.
    pub fn violations(&self, k: f64, c: f64) -> usize {
        self.samples
            .iter()
            .filter(|s| s.slope > k * s.shift_term + c * self.nu)
            .count()
    }

    pub fn to_csv(&self, k: f64, c: f64) -> String {
        let mut s = String::from("t,phi,slope,bound,ok\n");
        for p in &self.samples {
            let bound = k * p.shift_term + c * self.nu;
            let _ = writeln!(
                s,
                "{:e},{:e},{:e},{:e},{}",
                p.t,
                p.phi,
                p.slope,
                bound,
                p.slope <= bound
            );
        }
        s
    }
}

fn shift_term(p: &Profile, waves: &Waves) -> f64 {
    p.fronts
        .iter()
        .filter(|f| f.kind == FrontKind::Shock)
        .map(|f| {
            let rh = crate::waves::rh_speed_of(&f.left_state, &f.right_state, &waves.gas);
            f.jump() * (f.speed - rh).abs()
        })
        .sum()
}

/// Samples `Phi(u, psi)` on `[0, t_end]`: forward-difference slopes inside every window
/// free of events of either trajectory, and `Phi(t+)` against `Phi(t-)` at events.
/// Windows shorter than `10 sample_dt` are skipped and counted.
pub fn phi_slope_monitor(
    u: &Trajectory,
    psi: &Trajectory,
    k: &BlyConstants,
    waves: &Waves,
    sample_dt: f64,
) -> Result<SlopeReport> {
    let t_end = u.t_end.min(psi.t_end);
    let mut times: Vec<f64> = u
        .event_times()
        .into_iter()
        .chain(psi.event_times())
        .filter(|&t| t > 0.0 && t < t_end)
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut rep = SlopeReport {
        min_l1_ratio: f64::INFINITY,
        max_l1_ratio: 0.0,
        max_weight: f64::NEG_INFINITY,
        min_weight: f64::INFINITY,
        nu: psi.params.nu,
        ..Default::default()
    };
    let mut cache = DecompositionCache::new();
    let mut eval = |t: f64, side: Side, rep: &mut SlopeReport| -> Result<(f64, f64)> {
        let pu = u.profile_at(t, side);
        let pp = psi.profile_at(t, side);
        let v = phi(&pu, &pp, k, waves, &mut cache)?;
        if v.l1 > 0.0 {
            rep.min_l1_ratio = rep.min_l1_ratio.min(v.min_ratio);
            rep.max_l1_ratio = rep.max_l1_ratio.max(v.max_ratio);
        }
        rep.max_weight = rep.max_weight.max(v.max_weight);
        rep.min_weight = rep.min_weight.min(v.min_weight);
        Ok((v.phi, shift_term(&pp, waves)))
    };
    for &t in &times {
        let (before, _) = eval(t, Side::Before, &mut rep)?;
        let (after, _) = eval(t, Side::After, &mut rep)?;
        rep.events.push(EventJump {
            t,
            phi_before: before,
            phi_after: after,
        });
    }
    let mut bounds = vec![0.0];
    bounds.extend(times.iter().copied());
    bounds.push(t_end);
    for w in bounds.windows(2) {
        let (ta, tb) = (w[0], w[1]);
        rep.windows += 1;
        if tb - ta < 10.0 * sample_dt {
            rep.skipped_windows += 1;
            continue;
        }
        // stay strictly inside the window
        let n = ((tb - ta) / sample_dt).floor() as usize;
        let pad = 0.5 * ((tb - ta) - (n - 1) as f64 * sample_dt);
        let mut prev: Option<(f64, f64, f64)> = None;
        for j in 0..n {
            let t = ta + pad + j as f64 * sample_dt;
            let (val, term) = eval(t, Side::After, &mut rep)?;
            if let Some((tp, vp, termp)) = prev {
                rep.samples.push(SlopeSample {
                    t: tp,
                    phi: vp,
                    slope: (val - vp) / (t - tp),
                    shift_term: termp,
                });
            }
            prev = Some((t, val, term));
        }
    }
    Ok(rep)
}

/// Fits `(K, C)` for `slope <= K * shift_term + C * nu`: `C` from unshifted reports,
/// then `K` from shifted ones, both scaled by `margin`.
pub fn fit_slope_constants(unshifted: &[SlopeReport], shifted: &[SlopeReport], margin: f64) -> (f64, f64) {
    let c = unshifted
        .iter()
        .flat_map(|r| r.samples.iter().map(move |s| s.slope / r.nu))
        .fold(0.0f64, f64::max)
        * margin;
    let k = shifted
        .iter()
        .flat_map(|r| {
            r.samples.iter().filter(|s| s.shift_term > 0.0).map(move |s| (s.slope - c * r.nu) / s.shift_term)
        })
        .fold(0.0f64, f64::max)
        * margin;
    (k, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::front::{Front, FrontTracker, SchemeParameters, StepFunction};
    use crate::gas::GasParameters;

    fn waves() -> Waves {
        Waves::new(GasParameters::default())
    }

    fn base() -> State {
        State::new(1.0, 0.0, 2.5)
    }

    #[test]
    fn decompose_examples() {
        let w = waves();
        assert_eq!(decompose(&w, &base(), &base()).unwrap().q, [0.0; 3]);
        let v = w.hugoniot_point(&base(), Family::One, -0.03).unwrap().0;
        let q = decompose(&w, &base(), &v).unwrap().q;
        assert!((q[0] + 0.03).abs() < 1e-8 && q[1].abs() < 1e-8 && q[2].abs() < 1e-8);
    }

    #[test]
    fn l1_equivalence_constant_is_moderate() {
        let k = calibrate_l1_constant(&waves(), &StateBox::default(), 200, 0.1, 1).unwrap();
        assert!(k > 1.0 && k < 5.0, "K = {k}");
    }

    fn step_front(id: u64, x: f64, fam: Family, sigma: f64, left: State) -> Front {
        let right = waves().wave_curve(&left, fam, sigma).unwrap();
        Front {
            id,
            position: x,
            speed: 0.0,
            family: fam,
            kind: if sigma < 0.0 { FrontKind::Shock } else { FrontKind::RarefactionStep },
            left_state: left,
            right_state: right,
            sigma,
        }
    }

    #[test]
    fn a_fields_enumeration() {
        let u = Profile::constant(base());
        assert_eq!(a_fields(0.0, &u, &u, &[0.0; 3]), [0.0; 3]);
        // one 3-front of strength 0.05 left of x in u
        let mut u3 = Profile::constant(base());
        u3.fronts.push(step_front(0, -1.0, Family::Three, -0.05, base()));
        let v = Profile::constant(base());
        let a = a_fields(0.0, &u3, &v, &[0.0, 0.0, -0.01]);
        assert!((a[0] - 0.05).abs() < 1e-15);
        assert!((a[1] - 0.05).abs() < 1e-15);
        // q_3 < 0: u-fronts on the left count
        assert!((a[2] - 0.05).abs() < 1e-15);
        let a = a_fields(0.0, &u3, &v, &[0.0, 0.0, 0.01]);
        assert_eq!(a[2], 0.0);
        // x left of everything: only k < i fronts on the right count
        let mut u1 = Profile::constant(base());
        u1.fronts.push(step_front(0, 1.0, Family::One, 0.02, base()));
        let a = a_fields(0.0, &u1, &v, &[-0.01, 0.0, 0.0]);
        assert_eq!(a[0], 0.0);
        // q_1 >= 0: same-family u-fronts on the right count
        assert!((a_fields(0.0, &u1, &v, &[0.01, 0.0, 0.0])[0] - 0.02).abs() < 1e-15);
        assert!((a[1] - 0.02).abs() < 1e-15 && (a[2] - 0.02).abs() < 1e-15);
    }

    #[test]
    fn phi_of_a_single_cell() {
        let w = waves();
        let q = -0.02;
        let v_state = w.hugoniot_point(&base(), Family::One, q).unwrap().0;
        let u = Profile::constant(base());
        let v = Profile {
            time: 0.0,
            leftmost_state: base(),
            fronts: vec![
                Front {
                    id: 0,
                    position: -1.0,
                    speed: 0.0,
                    family: Family::NonPhysical,
                    kind: FrontKind::NonPhysical,
                    left_state: base(),
                    right_state: v_state,
                    sigma: base().distance(&v_state),
                },
                Front {
                    id: 1,
                    position: 1.0,
                    speed: 0.0,
                    family: Family::NonPhysical,
                    kind: FrontKind::NonPhysical,
                    left_state: v_state,
                    right_state: base(),
                    sigma: base().distance(&v_state),
                },
            ],
        };
        let k = BlyConstants::default();
        let mut cache = DecompositionCache::new();
        let r = phi(&u, &v, &k, &w, &mut cache).unwrap();
        // no physical fronts and Q(v) = 0, so W_1 = 1
        assert!((r.phi - 2.0 * q.abs()).abs() < 1e-9);
        assert!((r.l1 - 2.0 * base().distance(&v_state)).abs() < 1e-15);
        assert_eq!(phi(&u, &u, &k, &w, &mut cache).unwrap().phi, 0.0);
    }

    #[test]
    fn phi_is_partition_invariant() {
        let w = waves();
        let t = FrontTracker::new(w.gas, SchemeParameters::for_box(0.01, &StateBox::default(), &w.gas));
        let u1 = w.wave_curve(&base(), Family::Three, -0.03).unwrap();
        let v1 = w.wave_curve(&base(), Family::One, 0.02).unwrap();
        let u = t
            .profile_from_steps(&StepFunction::new(vec![-0.5, 0.5], vec![base(), u1, base()]).unwrap())
            .unwrap();
        let v = t
            .profile_from_steps(&StepFunction::new(vec![-0.2, 0.7], vec![base(), v1, base()]).unwrap())
            .unwrap();
        let k = BlyConstants::default();
        let mut cache = DecompositionCache::new();
        let a = phi(&u, &v, &k, &w, &mut cache).unwrap();
        // refine u with a zero-strength split: insert a degenerate cell boundary
        let mut u_ref = u.clone();
        let mid = u_ref.fronts.iter().position(|f| f.position > 0.0).unwrap();
        let s = u_ref.fronts[mid - 1].right_state;
        u_ref.fronts.insert(
            mid,
            Front {
                id: 99,
                position: 0.1,
                speed: 0.0,
                family: Family::NonPhysical,
                kind: FrontKind::NonPhysical,
                left_state: s,
                right_state: s,
                sigma: 0.0,
            },
        );
        let b = phi(&u_ref, &v, &k, &w, &mut cache).unwrap();
        assert!((a.phi - b.phi).abs() < 1e-14);
        assert!(a.phi > 0.0);
        assert!(a.phi >= a.l1 / 5.0 && a.phi <= 2.0 * 5.0 * a.l1);
    }

    #[test]
    fn identical_trajectories_have_zero_phi() {
        let w = waves();
        let t = FrontTracker::new(w.gas, SchemeParameters::for_box(0.01, &StateBox::default(), &w.gas));
        let u1 = w.wave_curve(&base(), Family::Three, -0.03).unwrap();
        let p0 = t
            .profile_from_steps(&StepFunction::new(vec![-0.5, 0.5], vec![base(), u1, base()]).unwrap())
            .unwrap();
        let traj = t.evolve(&p0, 1.0, None).unwrap();
        let rep = phi_slope_monitor(&traj, &traj, &BlyConstants::default(), &w, 0.01).unwrap();
        assert!(rep.samples.iter().all(|s| s.phi == 0.0 && s.slope == 0.0));
        assert!(rep.events.iter().all(|e| e.phi_before == 0.0 && e.phi_after == 0.0));
    }

    #[test]
    fn slope_constants_fit() {
        let mk = |slope: f64, term: f64| SlopeReport {
            samples: vec![SlopeSample {
                t: 0.0,
                phi: 0.0,
                slope,
                shift_term: term,
            }],
            nu: 0.01,
            ..Default::default()
        };
        let (k, c) = fit_slope_constants(&[mk(0.001, 0.0)], &[mk(0.003, 0.001)], 1.0);
        assert!((c - 0.1).abs() < 1e-12);
        assert!((k - 2.0).abs() < 1e-9);
        assert_eq!(mk(0.003, 0.001).violations(k, c), 0);
    }
}
