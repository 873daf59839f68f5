//! Event-driven evolution of front tracking profiles, optional shock shifts, and
//! the trajectory record with replay.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::front::{Front, FrontKind, FrontTracker, Profile, SchemeParameters};
use crate::gas::{self, GasParameters, State};
use crate::waves::Family;

pub const TRAJECTORY_SCHEMA_VERSION: u32 = 1;

/// What a shift policy sees when asked for the speed of one shock.
#[derive(Debug, Clone, Copy)]
pub struct ShiftContext<'a> {
    pub front: &'a Front,
    pub time: f64,
    pub position: f64,
    pub rh_speed: f64,
    pub window: (f64, f64),
    pub gas: &'a GasParameters,
}

/// Imposes speeds on shock fronts. Returned speeds are clipped to the family window;
/// `None` leaves the front at its natural speed.
pub trait ShiftPolicy: Send + Sync {
    fn imposed_speed(&self, ctx: &ShiftContext<'_>) -> Option<f64>;

    /// Period of re-evaluation between interactions, if any.
    fn reevaluate_every(&self) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoShift;

impl ShiftPolicy for NoShift {
    fn imposed_speed(&self, _: &ShiftContext<'_>) -> Option<f64> {
        None
    }
}

/// `h' = lambda_s + offset`, clipped to the window; optionally restricted to one family.
#[derive(Debug, Clone, Copy)]
pub struct ConstantOffset {
    pub offset: f64,
    pub family: Option<Family>,
}

impl ShiftPolicy for ConstantOffset {
    fn imposed_speed(&self, ctx: &ShiftContext<'_>) -> Option<f64> {
        if self.family.is_some_and(|f| f != ctx.front.family) {
            return None;
        }
        Some(ctx.rh_speed + self.offset)
    }
}

/// Inputs of a trace-driven rule: the shock, the reference traces on both sides and
/// the weights on both sides.
#[derive(Debug, Clone, Copy)]
pub struct TraceContext<'a> {
    pub shift: &'a ShiftContext<'a>,
    pub u_minus: State,
    pub u_plus: State,
    pub a_left: f64,
    pub a_right: f64,
}

pub type TraceRule = Arc<dyn Fn(&TraceContext<'_>) -> f64 + Send + Sync>;

/// Speeds read off a reference trajectory through a pluggable rule.
#[derive(Clone)]
pub struct TraceDriven {
    pub reference: Arc<Trajectory>,
    pub c1: f64,
    pub period: Option<f64>,
    pub rule: TraceRule,
}

impl std::fmt::Debug for TraceDriven {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TraceDriven")
            .field("c1", &self.c1)
            .field("period", &self.period)
            .finish_non_exhaustive()
    }
}

impl TraceDriven {
    /// Uses [`minimize_dissipation`] as the rule.
    pub fn new(reference: Arc<Trajectory>, c1: f64, period: Option<f64>) -> Self {
        Self {
            reference,
            c1,
            period,
            rule: Arc::new(minimize_dissipation),
        }
    }
}

/// Picks the window speed minimizing the front dissipation, which is affine in `h'`.
/// Ties fall back to the clipped Rankine–Hugoniot speed.
pub fn minimize_dissipation(ctx: &TraceContext<'_>) -> f64 {
    let s = ctx.shift;
    let (lo, hi) = s.window;
    let f = s.front;
    let eta = |a: &State, b: &State| gas::relative_entropy(a, b, s.gas).unwrap_or(0.0);
    let slope = -(ctx.a_right * eta(&ctx.u_plus, &f.right_state)
        - ctx.a_left * eta(&ctx.u_minus, &f.left_state));
    if slope > 1e-15 {
        lo
    } else if slope < -1e-15 {
        hi
    } else {
        s.rh_speed.clamp(lo, hi)
    }
}

impl ShiftPolicy for TraceDriven {
    fn imposed_speed(&self, ctx: &ShiftContext<'_>) -> Option<f64> {
        let p = self.reference.profile_at(ctx.time, Side::After);
        let s0 = ctx.front.jump();
        let a_right = match ctx.front.family {
            Family::One => 1.0 - self.c1 * s0,
            _ => 1.0 + self.c1 * s0,
        };
        let tc = TraceContext {
            shift: ctx,
            u_minus: p.state_left_of(ctx.position),
            u_plus: p.state_at(ctx.position),
            a_left: 1.0,
            a_right,
        };
        Some((self.rule)(&tc))
    }

    fn reevaluate_every(&self) -> Option<f64> {
        self.period
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverUsed {
    Accurate,
    Simplified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    Interaction(SolverUsed),
    SpeedUpdate,
}

/// One change of the front list: `removed` (contiguous, left to right) is replaced
/// by `added`, whose positions refer to `time`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub position: f64,
    pub kind: EventKind,
    pub removed: Vec<u64>,
    pub added: Vec<Front>,
}

impl Event {
    pub fn is_interaction(&self) -> bool {
        matches!(self.kind, EventKind::Interaction(_))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvolutionStats {
    pub interactions: usize,
    pub accurate: usize,
    pub simplified: usize,
    pub speed_updates: usize,
    /// Interactions where a third front sat at the meeting point.
    pub multi_collisions: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Before,
    After,
}

const CHECKPOINT_EVERY: usize = 128;

#[derive(Debug, Clone, Default)]
struct Checkpoint {
    applied: usize,
    live: Vec<(Front, f64)>,
}

/// Complete record of one evolution: the initial profile plus the event log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub schema_version: u32,
    pub gas: GasParameters,
    pub params: SchemeParameters,
    pub shifted: bool,
    pub t_end: f64,
    pub initial: Profile,
    pub events: Vec<Event>,
    pub stats: EvolutionStats,
    #[serde(skip)]
    checkpoints: Vec<Checkpoint>,
}

impl PartialEq for Trajectory {
    fn eq(&self, other: &Self) -> bool {
        self.schema_version == other.schema_version
            && self.gas == other.gas
            && self.params == other.params
            && self.shifted == other.shifted
            && self.t_end == other.t_end
            && self.initial == other.initial
            && self.events == other.events
            && self.stats == other.stats
    }
}

/// Sequential reconstruction of profiles from a trajectory.
#[derive(Debug, Clone)]
pub struct Replay<'a> {
    traj: &'a Trajectory,
    applied: usize,
    live: Vec<(Front, f64)>,
}

impl<'a> Replay<'a> {
    pub fn new(traj: &'a Trajectory) -> Self {
        let t0 = traj.initial.time;
        Self {
            traj,
            applied: 0,
            live: traj.initial.fronts.iter().map(|f| (*f, t0)).collect(),
        }
    }

    pub fn applied(&self) -> usize {
        self.applied
    }

    /// Live fronts with the time their stored position refers to.
    pub(crate) fn live(&self) -> &[(Front, f64)] {
        &self.live
    }

    pub fn next_event(&self) -> Option<&'a Event> {
        self.traj.events.get(self.applied)
    }

    /// Applies the next event and returns it.
    pub fn advance(&mut self) -> Option<&'a Event> {
        let ev = self.traj.events.get(self.applied)?;
        let at = ev
            .removed
            .first()
            .and_then(|id| self.live.iter().position(|(f, _)| f.id == *id))
            .expect("event refers to live fronts");
        self.live.drain(at..at + ev.removed.len());
        for (k, f) in ev.added.iter().enumerate() {
            self.live.insert(at + k, (*f, ev.time));
        }
        self.applied += 1;
        Some(ev)
    }

    /// Positions are clamped to be non-decreasing: fronts extrapolated from
    /// different start times can cross by rounding.
    pub fn profile(&self, t: f64) -> Profile {
        let mut x = f64::NEG_INFINITY;
        Profile {
            time: t,
            leftmost_state: self.traj.initial.leftmost_state,
            fronts: self
                .live
                .iter()
                .map(|(f, t0)| {
                    x = x.max(f.position + f.speed * (t - t0));
                    Front { position: x, ..*f }
                })
                .collect(),
        }
    }
}

impl Trajectory {
    fn build_checkpoints(&mut self) {
        let mut cps = Vec::new();
        let mut r = Replay::new(self);
        cps.push(Checkpoint {
            applied: 0,
            live: r.live.clone(),
        });
        while r.advance().is_some() {
            if r.applied.is_multiple_of(CHECKPOINT_EVERY) {
                cps.push(Checkpoint {
                    applied: r.applied,
                    live: r.live.clone(),
                });
            }
        }
        self.checkpoints = cps;
    }

    /// Restores replay checkpoints after deserialization.
    pub fn reindex(&mut self) {
        self.build_checkpoints();
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let mut t: Trajectory =
            serde_json::from_str(s).map_err(|e| Error::Config(format!("trajectory: {e}")))?;
        if t.schema_version != TRAJECTORY_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported trajectory schema {}",
                t.schema_version
            )));
        }
        t.reindex();
        Ok(t)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trajectory serializes")
    }

    pub fn replay(&self) -> Replay<'_> {
        Replay::new(self)
    }

    /// Profile at `t`, including (`After`) or excluding (`Before`) events at exactly `t`.
    pub fn profile_at(&self, t: f64, side: Side) -> Profile {
        let n = match side {
            Side::Before => self.events.partition_point(|e| e.time < t),
            Side::After => self.events.partition_point(|e| e.time <= t),
        };
        let mut r = Replay::new(self);
        if let Some(cp) = self
            .checkpoints
            .iter()
            .take_while(|c| c.applied <= n)
            .last()
        {
            r.applied = cp.applied;
            r.live = cp.live.clone();
        }
        while r.applied < n {
            r.advance();
        }
        r.profile(t)
    }

    pub fn final_profile(&self) -> Profile {
        self.profile_at(self.t_end, Side::After)
    }

    pub fn interaction_times(&self) -> Vec<f64> {
        self.events
            .iter()
            .filter(|e| e.is_interaction())
            .map(|e| e.time)
            .collect()
    }

    /// Distinct times of all events, increasing.
    pub fn event_times(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.events.iter().map(|e| e.time).collect();
        v.dedup();
        v
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    front: Front,
    t0: f64,
    prev: Option<usize>,
    next: Option<usize>,
    alive: bool,
    version: u32,
}

impl Node {
    fn x(&self, t: f64) -> f64 {
        self.front.position + self.front.speed * (t - self.t0)
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    time: f64,
    seq: u64,
    left: usize,
    right: usize,
    lv: u32,
    rv: u32,
}

impl PartialEq for Candidate {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Candidate {
    // reversed: BinaryHeap pops the earliest candidate
    fn cmp(&self, o: &Self) -> Ordering {
        o.time.total_cmp(&self.time).then(o.seq.cmp(&self.seq))
    }
}

struct Evolution<'a> {
    tracker: &'a FrontTracker,
    policy: Option<&'a dyn ShiftPolicy>,
    nodes: Vec<Node>,
    heap: BinaryHeap<Candidate>,
    seq: u64,
    next_id: u64,
    t_end: f64,
    events: Vec<Event>,
    stats: EvolutionStats,
}

impl Evolution<'_> {
    fn schedule(&mut self, i: usize, now: f64) {
        let Some(j) = self.nodes[i].next else {
            return;
        };
        let (a, b) = (&self.nodes[i], &self.nodes[j]);
        let (sa, sb) = (a.front.speed, b.front.speed);
        if !(sa > sb) {
            return;
        }
        let t = (b.front.position - a.front.position + sa * a.t0 - sb * b.t0) / (sa - sb);
        let t = t.max(now);
        if t > self.t_end {
            return;
        }
        self.seq += 1;
        self.heap.push(Candidate {
            time: t,
            seq: self.seq,
            left: i,
            right: j,
            lv: a.version,
            rv: b.version,
        });
    }

    fn valid(&self, c: &Candidate) -> bool {
        let (a, b) = (&self.nodes[c.left], &self.nodes[c.right]);
        a.alive && b.alive && a.version == c.lv && b.version == c.rv && a.next == Some(c.right)
    }

    /// Speed of a new or existing front at time `t`, honoring the policy for shocks.
    fn speed_for(&self, f: &Front, t: f64, x: f64) -> f64 {
        let natural = self.tracker.natural_speed(f);
        if f.kind == FrontKind::Shock {
            if let (Some(policy), Some(window)) =
                (self.policy, self.tracker.params.shift_window(f.family))
            {
                let ctx = ShiftContext {
                    front: f,
                    time: t,
                    position: x,
                    rh_speed: natural,
                    window,
                    gas: self.tracker.gas(),
                };
                if let Some(v) = policy.imposed_speed(&ctx) {
                    return v.clamp(window.0, window.1);
                }
            }
        }
        if f.kind == FrontKind::NonPhysical {
            natural
        } else {
            natural + self.tracker.jitter(f.id)
        }
    }

    fn interact(&mut self, c: Candidate) -> Result<()> {
        let t = c.time;
        self.stats.interactions += 1;
        if self.stats.interactions > self.tracker.params.max_interactions {
            return Err(Error::InteractionCap {
                cap: self.tracker.params.max_interactions,
                time: t,
            });
        }
        let (i, j) = (c.left, c.right);
        let x = 0.5 * (self.nodes[i].x(t) + self.nodes[j].x(t));
        for nb in [self.nodes[i].prev, self.nodes[j].next].into_iter().flatten() {
            if (self.nodes[nb].x(t) - x).abs() <= 1e-12 * (1.0 + x.abs()) {
                self.stats.multi_collisions += 1;
            }
        }
        let mut a = self.nodes[i].front;
        let mut b = self.nodes[j].front;
        a.position = x;
        b.position = x;
        let p = &self.tracker.params;
        let approaching = crate::glimm::approaching(&a, &b);
        let simplified = a.kind == FrontKind::NonPhysical
            || b.kind == FrontKind::NonPhysical
            || !approaching
            || a.strength() * b.strength() < p.np_threshold;
        let waves = if simplified {
            self.stats.simplified += 1;
            self.tracker.simplified_waves(&a, &b)?
        } else {
            self.stats.accurate += 1;
            self.tracker.accurate_waves(&a.left_state, &b.right_state)?
        };
        let mut out = self.tracker.materialize(&waves, x, &mut self.next_id)?;
        for f in &mut out {
            f.speed = self.speed_for(f, t, x);
        }
        self.events.push(Event {
            time: t,
            position: x,
            kind: EventKind::Interaction(if simplified {
                SolverUsed::Simplified
            } else {
                SolverUsed::Accurate
            }),
            removed: vec![a.id, b.id],
            added: out.clone(),
        });

        let prev = self.nodes[i].prev;
        let next = self.nodes[j].next;
        self.nodes[i].alive = false;
        self.nodes[j].alive = false;
        let mut last = prev;
        let mut created = Vec::with_capacity(out.len());
        for f in out {
            let k = self.nodes.len();
            self.nodes.push(Node {
                front: f,
                t0: t,
                prev: last,
                next: None,
                alive: true,
                version: 0,
            });
            if let Some(l) = last {
                self.nodes[l].next = Some(k);
            }
            last = Some(k);
            created.push(k);
        }
        if let Some(l) = last {
            self.nodes[l].next = next;
        }
        if let Some(n) = next {
            self.nodes[n].prev = last;
        }
        if created.is_empty() {
            if let Some(pv) = prev {
                self.nodes[pv].next = next;
            }
        }
        if let Some(pv) = prev {
            self.schedule(pv, t);
        }
        for k in created {
            self.schedule(k, t);
        }
        Ok(())
    }

    fn retune_speeds(&mut self, t: f64) {
        for k in 0..self.nodes.len() {
            let n = self.nodes[k];
            if !n.alive || n.front.kind != FrontKind::Shock {
                continue;
            }
            let x = n.x(t);
            let v = self.speed_for(&n.front, t, x);
            if v == n.front.speed {
                continue;
            }
            let node = &mut self.nodes[k];
            node.front.position = x;
            node.front.speed = v;
            node.t0 = t;
            node.version += 1;
            self.stats.speed_updates += 1;
            self.events.push(Event {
                time: t,
                position: x,
                kind: EventKind::SpeedUpdate,
                removed: vec![node.front.id],
                added: vec![node.front],
            });
            if let Some(pv) = node.prev {
                self.schedule(pv, t);
            }
            self.schedule(k, t);
        }
    }

    fn peek_valid(&mut self) -> Option<Candidate> {
        while let Some(c) = self.heap.peek().copied() {
            if self.valid(&c) {
                return Some(c);
            }
            self.heap.pop();
        }
        None
    }
}

impl FrontTracker {
    /// Evolves `p0` to time `t_end`, interaction by interaction.
    pub fn evolve(
        &self,
        p0: &Profile,
        t_end: f64,
        policy: Option<&dyn ShiftPolicy>,
    ) -> Result<Trajectory> {
        if !(t_end >= p0.time) {
            return Err(Error::Usage(format!("t_end = {t_end} precedes the profile time")));
        }
        p0.validate(None)?;
        let mut ev = Evolution {
            tracker: self,
            policy,
            nodes: Vec::with_capacity(p0.fronts.len() * 4),
            heap: BinaryHeap::new(),
            seq: 0,
            next_id: p0.fronts.iter().map(|f| f.id + 1).max().unwrap_or(0),
            t_end,
            events: Vec::new(),
            stats: EvolutionStats::default(),
        };
        let mut initial = p0.clone();
        for (k, f) in initial.fronts.iter_mut().enumerate() {
            if policy.is_some() {
                f.speed = ev.speed_for(f, p0.time, f.position);
            }
            ev.nodes.push(Node {
                front: *f,
                t0: p0.time,
                prev: k.checked_sub(1),
                next: None,
                alive: true,
                version: 0,
            });
            if k > 0 {
                ev.nodes[k - 1].next = Some(k);
            }
        }
        for k in 0..ev.nodes.len() {
            ev.schedule(k, p0.time);
        }
        let period = policy.and_then(|p| p.reevaluate_every()).filter(|d| *d > 0.0);
        let mut tick = 1usize;
        loop {
            let next_tick = period.map_or(f64::INFINITY, |d| p0.time + d * tick as f64);
            let cand = ev.peek_valid();
            let t_coll = cand.map_or(f64::INFINITY, |c| c.time);
            if next_tick < t_coll && next_tick <= t_end {
                ev.retune_speeds(next_tick);
                tick += 1;
                continue;
            }
            match cand {
                Some(c) if c.time <= t_end => {
                    ev.heap.pop();
                    ev.interact(c)?;
                }
                _ => break,
            }
        }
        let mut traj = Trajectory {
            schema_version: TRAJECTORY_SCHEMA_VERSION,
            gas: *self.gas(),
            params: self.params,
            shifted: policy.is_some(),
            t_end,
            initial,
            events: ev.events,
            stats: ev.stats,
            checkpoints: Vec::new(),
        };
        traj.build_checkpoints();
        Ok(traj)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::front::StepFunction;
    use crate::gas::StateBox;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tracker(nu: f64, seed: u64) -> FrontTracker {
        let gas = GasParameters::default();
        let mut p = SchemeParameters::for_box(nu, &StateBox::default(), &gas);
        p.seed = seed;
        FrontTracker::new(gas, p)
    }

    fn base() -> State {
        State::new(1.0, 0.0, 2.5)
    }

    fn random_steps(seed: u64, n: usize, tv: f64) -> StepFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = vec![base()];
        let per = tv / n as f64;
        for _ in 0..n {
            let u = *values.last().unwrap();
            let d = nalgebra::Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
            .normalize()
                * per;
            values.push(State::from_vector(&(u.to_vector() + d)));
        }
        let breakpoints = (0..n).map(|k| -1.0 + 2.0 * (k as f64 + 0.5) / n as f64).collect();
        StepFunction::new(breakpoints, values).unwrap()
    }

    #[test]
    fn constant_data_has_no_events() {
        let t = tracker(0.01, 1);
        let traj = t.evolve(&Profile::constant(base()), 1.0, None).unwrap();
        assert!(traj.events.is_empty());
        assert_eq!(traj.final_profile().leftmost_state, base());
    }

    #[test]
    fn single_riemann_datum_moves_at_fan_speeds() {
        let t = tracker(0.01, 2);
        let w = &t.waves;
        let u1 = w.wave_curve(&base(), Family::One, 0.03).unwrap();
        let u2 = w.wave_curve(&u1, Family::Two, 0.02).unwrap();
        let ur = w.wave_curve(&u2, Family::Three, -0.04).unwrap();
        let steps = StepFunction::new(vec![0.0], vec![base(), ur]).unwrap();
        let p0 = t.profile_from_steps(&steps).unwrap();
        let traj = t.evolve(&p0, 1.0, None).unwrap();
        assert_eq!(traj.stats.interactions, 0);
        let p1 = traj.profile_at(1.0, Side::After);
        p1.validate(None).unwrap();
        let fan = w.solve_riemann(&base(), &ur).unwrap();
        let shock = p1.fronts.iter().find(|f| f.kind == FrontKind::Shock).unwrap();
        let rh = crate::waves::rh_speed_of(&fan.middle_states[1], &ur, t.gas());
        assert!((shock.position - rh).abs() <= t.params.nu);
        let contact = p1.fronts.iter().find(|f| f.kind == FrontKind::Contact).unwrap();
        assert!(contact.position.abs() <= t.params.nu);
        assert!((shock.rh_speed(t.gas()).unwrap() - rh).abs() < 1e-9);
    }

    #[test]
    fn random_small_bv_data_finishes_with_bounded_variation() {
        for seed in 0..4 {
            let t = tracker(0.01, seed);
            let steps = random_steps(seed, 12, 0.05);
            let p0 = t.profile_from_steps(&steps).unwrap();
            let traj = t.evolve(&p0, 2.0, None).unwrap();
            assert!(traj.stats.interactions > 0);
            assert_eq!(traj.stats.multi_collisions, 0);
            let tv0 = p0.total_variation();
            let mut r = traj.replay();
            while let Some(e) = r.advance() {
                let p = r.profile(e.time);
                p.validate(None).unwrap();
                assert!(p.total_variation() <= 3.0 * tv0);
            }
        }
    }

    #[test]
    fn unshifted_shocks_move_near_rankine_hugoniot_speed() {
        let t = tracker(0.01, 9);
        let p0 = t.profile_from_steps(&random_steps(9, 10, 0.05)).unwrap();
        let traj = t.evolve(&p0, 2.0, None).unwrap();
        let mut seen = 0;
        for f in traj.initial.fronts.iter().chain(traj.events.iter().flat_map(|e| e.added.iter())) {
            if f.kind == FrontKind::Shock {
                assert!((f.rh_speed(t.gas()).unwrap() - f.speed).abs() <= t.params.nu);
                seen += 1;
            }
            if f.kind == FrontKind::NonPhysical {
                assert_eq!(f.speed, t.params.lambda_hat);
            }
        }
        assert!(seen > 0);
    }

    #[test]
    fn replay_matches_random_access_and_json_round_trip() {
        let t = tracker(0.01, 3);
        let p0 = t.profile_from_steps(&random_steps(3, 10, 0.05)).unwrap();
        let traj = t.evolve(&p0, 1.5, None).unwrap();
        let json = traj.to_json();
        let back = Trajectory::from_json(&json).unwrap();
        assert_eq!(back, traj);
        assert_eq!(back.to_json(), json);
        for &tt in &[0.0, 0.3, 0.77, 1.5] {
            assert_eq!(back.profile_at(tt, Side::After), traj.profile_at(tt, Side::After));
        }
        let again = t.evolve(&p0, 1.5, None).unwrap();
        assert_eq!(again.to_json(), json);
    }

    #[test]
    fn interaction_cap_is_reported() {
        let mut t = tracker(0.01, 4);
        t.params.max_interactions = 1;
        let p0 = t.profile_from_steps(&random_steps(4, 12, 0.05)).unwrap();
        let err = t.evolve(&p0, 2.0, None).unwrap_err();
        assert!(matches!(err, Error::InteractionCap { cap: 1, .. }));
    }

    #[test]
    fn shifted_shocks_stay_in_their_windows() {
        let t = tracker(0.01, 5);
        let p0 = t.profile_from_steps(&random_steps(5, 10, 0.05)).unwrap();
        let policy = ConstantOffset {
            offset: 10.0,
            family: None,
        };
        let traj = t.evolve(&p0, 1.0, Some(&policy)).unwrap();
        for f in traj.initial.fronts.iter().chain(traj.events.iter().flat_map(|e| e.added.iter())) {
            match (f.kind, f.family) {
                (FrontKind::Shock, Family::One) => {
                    assert!(f.speed >= -0.5 * t.params.lambda_hat && f.speed <= -t.params.alpha)
                }
                (FrontKind::Shock, Family::Three) => {
                    assert!(f.speed >= t.params.alpha && f.speed <= 0.5 * t.params.lambda_hat)
                }
                _ => {}
            }
        }
    }

    #[test]
    fn np_total_shrinks_with_nu() {
        let totals: Vec<f64> = [0.02, 0.002]
            .iter()
            .map(|&nu| {
                let t = tracker(nu, 6);
                let p0 = t.profile_from_steps(&random_steps(6, 12, 0.05)).unwrap();
                let traj = t.evolve(&p0, 2.0, None).unwrap();
                traj.final_profile().np_total()
            })
            .collect();
        assert!(totals[1] <= totals[0], "{totals:?}");
    }

    #[test]
    fn trace_driven_policy_follows_reference() {
        let t = tracker(0.01, 7);
        let ur = t.waves.wave_curve(&base(), Family::Three, -0.05).unwrap();
        let steps = StepFunction::new(vec![0.0], vec![base(), ur]).unwrap();
        let p0 = t.profile_from_steps(&steps).unwrap();
        let reference = Arc::new(t.evolve(&p0, 1.0, None).unwrap());
        let policy = TraceDriven::new(reference, 1.0, Some(0.1));
        let traj = t.evolve(&p0, 1.0, Some(&policy)).unwrap();
        let shock = traj.final_profile().fronts[0];
        let (lo, hi) = t.params.shift_window(Family::Three).unwrap();
        assert!(shock.speed >= lo && shock.speed <= hi);
    }
}
