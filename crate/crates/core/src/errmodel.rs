//! Fault sampling and Pauli-frame propagation over the round schedule.
//!
//! A round is processed by walking `Lattice::round_ops` in order. Faults are
//! attached to an operation index and take effect right after that gate
//! (for measurements, right before the readout).

use rand::Rng;

use crate::error::{Error, Result};
use crate::lattice::{op_touches_previous, Lattice, Op, Rel, LOSS_SLOTS};
use crate::pauli::Pauli;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ErrorModelParams {
    pub p_comp: f64,
    pub p_loss: f64,
    pub p_lint: f64,
}

impl ErrorModelParams {
    pub fn new(p_comp: f64, p_loss: f64, p_lint: f64) -> Result<Self> {
        let p = ErrorModelParams { p_comp, p_loss, p_lint };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("p_comp", self.p_comp), ("p_loss", self.p_loss), ("p_lint", self.p_lint)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParam(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn noiseless() -> Self {
        ErrorModelParams { p_comp: 0.0, p_loss: 0.0, p_lint: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Pauli(Pauli),
    Loss,
    /// Drawn when a C_Z is skipped because the partner is gone. Identity
    /// draws are kept so the number of draws can be audited.
    LossInteraction(Pauli),
}

impl EventKind {
    fn rank(self) -> u8 {
        match self {
            EventKind::Loss => 1,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ErrorEvent {
    /// Absolute round of the affected site.
    pub round: u64,
    pub site: usize,
    /// Index into `Lattice::round_ops` of the operation the fault follows.
    pub op: u32,
    /// Gate slot of the site, `0..LOSS_SLOTS`.
    pub slot: u8,
    pub kind: EventKind,
}

/// Readout of one fully measured round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundOutcome {
    pub round: u64,
    /// Measurement flip relative to the noiseless outcome.
    pub flips: Vec<bool>,
    pub lost: Vec<bool>,
}

#[derive(Debug, Clone)]
struct SiteFrames {
    x: Vec<bool>,
    z: Vec<bool>,
    lost: Vec<bool>,
    measured: Vec<bool>,
    flip: Vec<bool>,
}

impl SiteFrames {
    fn new(n: usize) -> Self {
        SiteFrames { x: vec![false; n], z: vec![false; n], lost: vec![false; n], measured: vec![false; n], flip: vec![false; n] }
    }
}

fn uniform_pauli<R: Rng>(rng: &mut R) -> Pauli {
    Pauli::ALL[rng.gen_range(0..4)]
}

fn hit<R: Rng>(rng: &mut R, p: f64) -> bool {
    p > 0.0 && rng.gen::<f64>() < p
}

fn slot_of(op: &Op, which: usize) -> u8 {
    match *op {
        Op::Init { .. } => 0,
        Op::Measure { .. } => (LOSS_SLOTS - 1) as u8,
        Op::Cz { slot_a, slot_b, .. } => {
            if which == 0 {
                slot_a
            } else {
                slot_b
            }
        }
    }
}

/// Frame simulator holding the round being processed and the one below it,
/// whose layer-1 spokes are still awaiting their last gate and readout.
#[derive(Debug, Clone)]
pub struct FrameSim<'a> {
    lattice: &'a Lattice,
    next_round: u64,
    prev: SiteFrames,
    cur: SiteFrames,
}

impl<'a> FrameSim<'a> {
    pub fn new(lattice: &'a Lattice) -> Self {
        let n = lattice.site_count();
        FrameSim { lattice, next_round: 0, prev: SiteFrames::new(n), cur: SiteFrames::new(n) }
    }

    /// A noiseless simulator positioned to process `round` next. Without
    /// faults every frame is trivial, so no earlier rounds need running.
    pub fn starting_at(lattice: &'a Lattice, round: u64) -> Self {
        FrameSim { next_round: round, ..Self::new(lattice) }
    }

    pub fn lattice(&self) -> &'a Lattice {
        self.lattice
    }

    /// The round the next call to `propagate` will process.
    pub fn next_round(&self) -> u64 {
        self.next_round
    }

    fn ops_active(&self, op: &Op) -> bool {
        self.next_round > 0 || !op_touches_previous(op)
    }

    /// Lost flags of the previous round's sites at the start of the next round.
    fn carried_lost(&self) -> &[bool] {
        &self.prev.lost
    }

    fn frames(&mut self, rel: Rel) -> &mut SiteFrames {
        if rel.dr < 0 {
            &mut self.prev
        } else {
            &mut self.cur
        }
    }

    fn apply_pauli(&mut self, rel: Rel, p: Pauli) {
        let f = self.frames(rel);
        if f.lost[rel.id] {
            return;
        }
        let (x, z) = p.bits();
        f.x[rel.id] ^= x;
        f.z[rel.id] ^= z;
    }

    /// Process one round with the given faults, which must be sorted by
    /// `(op, Pauli before Loss)`. Returns the outcome of the round below,
    /// which is complete once this round has run.
    pub fn propagate(&mut self, events: &[ErrorEvent]) -> Option<RoundOutcome> {
        let r = self.next_round;
        self.prev = std::mem::replace(&mut self.cur, SiteFrames::new(self.lattice.site_count()));
        // `prev` now holds round r-1, `cur` the fresh round r.
        let mut cursor = 0;
        for (i, sop) in self.lattice.round_ops.iter().enumerate() {
            if !(r > 0 || !op_touches_previous(&sop.op)) {
                continue;
            }
            let i = i as u32;
            let start = cursor;
            while cursor < events.len() && events[cursor].op == i {
                cursor += 1;
            }
            let here = &events[start..cursor];
            match sop.op {
                Op::Init { site } => {
                    let f = self.frames(site);
                    f.x[site.id] = false;
                    f.z[site.id] = false;
                    self.apply_events(r, here);
                }
                Op::Cz { a, b, .. } => {
                    let la = self.frames(a).lost[a.id];
                    let lb = self.frames(b).lost[b.id];
                    if !la && !lb {
                        let xa = self.frames(a).x[a.id];
                        let xb = self.frames(b).x[b.id];
                        self.frames(a).z[a.id] ^= xb;
                        self.frames(b).z[b.id] ^= xa;
                    }
                    self.apply_events(r, here);
                }
                Op::Measure { site } => {
                    self.apply_events(r, here);
                    let f = self.frames(site);
                    f.measured[site.id] = true;
                    f.flip[site.id] = !f.lost[site.id] && f.z[site.id];
                }
            }
        }
        debug_assert_eq!(cursor, events.len(), "events must be sorted and refer to active ops");
        self.next_round += 1;
        (r > 0).then(|| self.outcome(r - 1, false))
    }

    fn apply_events(&mut self, r: u64, events: &[ErrorEvent]) {
        for e in events {
            let rel = Rel { dr: e.round as i32 - r as i32, id: e.site };
            match e.kind {
                EventKind::Pauli(p) | EventKind::LossInteraction(p) => self.apply_pauli(rel, p),
                EventKind::Loss => self.frames(rel).lost[e.site] = true,
            }
        }
    }

    fn outcome(&self, round: u64, from_cur: bool) -> RoundOutcome {
        let f = if from_cur { &self.cur } else { &self.prev };
        RoundOutcome { round, flips: f.flip.clone(), lost: f.lost.clone() }
    }

    /// Read out the sites of the last processed round that are still waiting
    /// for their final gate, as if the cluster ended there.
    pub fn flush(&mut self) -> Option<RoundOutcome> {
        if self.next_round == 0 {
            return None;
        }
        let f = &mut self.cur;
        for s in 0..f.x.len() {
            if !f.measured[s] {
                f.measured[s] = true;
                f.flip[s] = !f.lost[s] && f.z[s];
            }
        }
        Some(self.outcome(self.next_round - 1, true))
    }
}

/// Sample gate faults and loss for the round `sim` will process next.
pub fn sample_round<R: Rng>(params: &ErrorModelParams, sim: &FrameSim<'_>, rng: &mut R) -> Vec<ErrorEvent> {
    let lattice = sim.lattice;
    let r = sim.next_round;
    let n = lattice.site_count();
    let mut lost_prev = sim.carried_lost().to_vec();
    if r == 0 {
        lost_prev.iter_mut().for_each(|l| *l = false);
    }
    let mut lost_cur = vec![false; n];
    let mut events = Vec::new();
    let abs = |rel: Rel| (r as i64 + rel.dr as i64) as u64;
    for (i, sop) in lattice.round_ops.iter().enumerate() {
        if !sim.ops_active(&sop.op) {
            continue;
        }
        let i = i as u32;
        let is_lost = |rel: Rel, lp: &[bool], lc: &[bool]| if rel.dr < 0 { lp[rel.id] } else { lc[rel.id] };
        let mut losses: [Option<(Rel, u8)>; 2] = [None, None];
        match sop.op {
            Op::Init { site } => {
                if hit(rng, params.p_comp) {
                    let p = uniform_pauli(rng);
                    if p != Pauli::I {
                        events.push(ErrorEvent { round: abs(site), site: site.id, op: i, slot: 0, kind: EventKind::Pauli(p) });
                    }
                }
                losses[0] = Some((site, 0));
            }
            Op::Cz { a, b, .. } => {
                let la = is_lost(a, &lost_prev, &lost_cur);
                let lb = is_lost(b, &lost_prev, &lost_cur);
                if !la && !lb && hit(rng, params.p_comp) {
                    let k = rng.gen_range(0..16);
                    for (rel, p, which) in [(a, Pauli::ALL[k / 4], 0), (b, Pauli::ALL[k % 4], 1)] {
                        if p != Pauli::I {
                            let slot = slot_of(&sop.op, which);
                            events.push(ErrorEvent { round: abs(rel), site: rel.id, op: i, slot, kind: EventKind::Pauli(p) });
                        }
                    }
                }
                if !la {
                    losses[0] = Some((a, slot_of(&sop.op, 0)));
                }
                if !lb {
                    losses[1] = Some((b, slot_of(&sop.op, 1)));
                }
            }
            Op::Measure { site } => {
                if !is_lost(site, &lost_prev, &lost_cur) {
                    if hit(rng, params.p_comp) {
                        let p = uniform_pauli(rng);
                        if p != Pauli::I {
                            let slot = (LOSS_SLOTS - 1) as u8;
                            events.push(ErrorEvent { round: abs(site), site: site.id, op: i, slot, kind: EventKind::Pauli(p) });
                        }
                    }
                    losses[0] = Some((site, (LOSS_SLOTS - 1) as u8));
                }
            }
        }
        for (rel, slot) in losses.into_iter().flatten() {
            if hit(rng, params.p_loss) {
                events.push(ErrorEvent { round: abs(rel), site: rel.id, op: i, slot, kind: EventKind::Loss });
                if rel.dr < 0 {
                    lost_prev[rel.id] = true;
                } else {
                    lost_cur[rel.id] = true;
                }
            }
        }
    }
    events
}

/// Draw loss-interaction faults for every C_Z skipped because exactly one
/// partner was already lost. `events` must contain the round's loss events.
pub fn apply_loss_interactions<R: Rng>(
    params: &ErrorModelParams,
    sim: &FrameSim<'_>,
    events: &[ErrorEvent],
    rng: &mut R,
) -> Vec<ErrorEvent> {
    let lattice = sim.lattice;
    let r = sim.next_round;
    let n = lattice.site_count();
    let mut lost_prev = if r == 0 { vec![false; n] } else { sim.carried_lost().to_vec() };
    let mut lost_cur = vec![false; n];
    let mut out = Vec::new();
    if params.p_lint <= 0.0 {
        return out;
    }
    let mut cursor = 0;
    for (i, sop) in lattice.round_ops.iter().enumerate() {
        if !sim.ops_active(&sop.op) {
            continue;
        }
        let i = i as u32;
        if let Op::Cz { a, b, .. } = sop.op {
            let lost = |rel: Rel, lp: &[bool], lc: &[bool]| if rel.dr < 0 { lp[rel.id] } else { lc[rel.id] };
            let la = lost(a, &lost_prev, &lost_cur);
            let lb = lost(b, &lost_prev, &lost_cur);
            if la != lb {
                let (survivor, which) = if la { (b, 1) } else { (a, 0) };
                if hit(rng, params.p_lint) {
                    let p = uniform_pauli(rng);
                    out.push(ErrorEvent {
                        round: (r as i64 + survivor.dr as i64) as u64,
                        site: survivor.id,
                        op: i,
                        slot: slot_of(&sop.op, which),
                        kind: EventKind::LossInteraction(p),
                    });
                }
            }
        }
        while cursor < events.len() && events[cursor].op <= i {
            let e = &events[cursor];
            if e.kind == EventKind::Loss {
                if e.round < r {
                    lost_prev[e.site] = true;
                } else {
                    lost_cur[e.site] = true;
                }
            }
            cursor += 1;
        }
    }
    out
}

/// Merge two op-sorted fault lists into the order `propagate` expects.
pub fn merge_events(mut a: Vec<ErrorEvent>, b: Vec<ErrorEvent>) -> Vec<ErrorEvent> {
    a.extend(b);
    a.sort_by_key(|e| (e.op, e.kind.rank()));
    a
}

/// Sample and propagate one noisy round using the counter-based streams.
pub fn step_noisy(params: &ErrorModelParams, sim: &mut FrameSim<'_>, seed: u64, trial: u64) -> Option<RoundOutcome> {
    use crate::rng::{stream, Stream};
    let r = sim.next_round;
    let mut frng = stream(seed, trial, r, Stream::Faults);
    let faults = sample_round(params, sim, &mut frng);
    let mut lrng = stream(seed, trial, r, Stream::LossInteraction);
    let lint = apply_loss_interactions(params, sim, &faults, &mut lrng);
    let events = if lint.is_empty() { faults } else { merge_events(faults, lint) };
    sim.propagate(&events)
}

/// Run `rounds` rounds with the given faults (each already op-sorted per
/// round) and flush, returning every round's outcome.
pub fn propagate_rounds(lattice: &Lattice, rounds: usize, events: &[ErrorEvent]) -> Vec<RoundOutcome> {
    let mut sim = FrameSim::new(lattice);
    let mut out = Vec::with_capacity(rounds);
    for r in 0..rounds as u64 {
        let mine: Vec<ErrorEvent> = events.iter().copied().filter(|e| processing_round(lattice, e) == r).collect();
        let mine = merge_events(mine, Vec::new());
        out.extend(sim.propagate(&mine));
    }
    out.extend(sim.flush());
    out
}

/// The round whose processing executes the operation an event refers to.
pub fn processing_round(lattice: &Lattice, e: &ErrorEvent) -> u64 {
    let op = &lattice.round_ops[e.op as usize].op;
    let dr = match *op {
        Op::Init { site } | Op::Measure { site } => {
            debug_assert_eq!(site.id, e.site);
            site.dr
        }
        Op::Cz { a, b, .. } => {
            if a.id == e.site {
                a.dr
            } else {
                b.dr
            }
        }
    };
    (e.round as i64 - dr as i64) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{GateSlot, SiteKind};
    use crate::rng::{stream, Stream};

    fn lattice() -> Lattice {
        Lattice::build(3).unwrap()
    }

    fn op_index(l: &Lattice, pred: impl Fn(&Op) -> bool) -> u32 {
        l.round_ops.iter().position(|s| pred(&s.op)).unwrap() as u32
    }

    fn flipped(outs: &[RoundOutcome]) -> Vec<(u64, usize)> {
        outs.iter().flat_map(|o| o.flips.iter().enumerate().filter(|(_, &f)| f).map(move |(s, _)| (o.round, s))).collect()
    }

    #[test]
    fn params_are_validated() {
        assert!(ErrorModelParams::new(0.1, 0.0, 1.0).is_ok());
        assert!(matches!(ErrorModelParams::new(-0.1, 0.0, 0.0), Err(Error::InvalidParam(_))));
        assert!(ErrorModelParams::new(0.0, 1.5, 0.0).is_err());
    }

    #[test]
    fn noiseless_run_has_no_flips_or_losses() {
        let l = lattice();
        let outs = propagate_rounds(&l, 4, &[]);
        assert_eq!(outs.len(), 4);
        assert!(outs.iter().all(|o| o.flips.iter().all(|f| !f) && o.lost.iter().all(|x| !x)));
    }

    #[test]
    fn z_before_measurement_flips_only_that_qubit() {
        let l = lattice();
        let q = l.sites.iter().find(|s| s.kind == SiteKind::Hub && s.layer == 0).unwrap().id;
        let op = op_index(&l, |o| matches!(o, Op::Measure { site } if site.id == q && site.dr == 0));
        let e = ErrorEvent { round: 1, site: q, op, slot: 5, kind: EventKind::Pauli(Pauli::Z) };
        assert_eq!(flipped(&propagate_rounds(&l, 3, &[e])), vec![(1, q)]);
        let x = ErrorEvent { kind: EventKind::Pauli(Pauli::X), ..e };
        assert!(flipped(&propagate_rounds(&l, 3, &[x])).is_empty());
    }

    #[test]
    fn x_after_init_flips_every_partner() {
        let l = lattice();
        // An interior layer-0 spoke has four partners: down, two hubs, up.
        let q = l
            .sites
            .iter()
            .find(|s| s.kind == SiteKind::Spoke && s.layer == 0 && l.gates[s.id].iter().all(|g| !matches!(g, GateSlot::Idle)))
            .unwrap()
            .id;
        let op = op_index(&l, |o| matches!(o, Op::Init { site } if site.id == q));
        let e = ErrorEvent { round: 1, site: q, op, slot: 0, kind: EventKind::Pauli(Pauli::X) };
        let got = flipped(&propagate_rounds(&l, 3, &[e]));
        let mut want: Vec<(u64, usize)> = l.gates[q]
            .iter()
            .filter_map(|g| match g {
                GateSlot::Cz { partner, .. } => Some(((1 + partner.dr) as u64, partner.id)),
                _ => None,
            })
            .collect();
        want.sort();
        let mut got = got;
        got.sort();
        assert_eq!(got, want);
        assert_eq!(got.len(), 4);
    }

    #[test]
    fn loss_stops_later_gates_and_readout() {
        let l = lattice();
        let q = l.sites.iter().find(|s| s.kind == SiteKind::Hub && s.layer == 1).unwrap().id;
        let op = op_index(&l, |o| matches!(o, Op::Init { site } if site.id == q));
        let x = ErrorEvent { round: 1, site: q, op, slot: 0, kind: EventKind::Pauli(Pauli::X) };
        let lost = ErrorEvent { kind: EventKind::Loss, ..x };
        let outs = propagate_rounds(&l, 3, &[x, lost]);
        assert!(outs[1].lost[q]);
        assert!(flipped(&outs).is_empty());
    }

    #[test]
    fn sampling_is_deterministic_per_stream() {
        let l = lattice();
        let p = ErrorModelParams::new(0.05, 0.02, 1.0).unwrap();
        let run = || {
            let mut sim = FrameSim::new(&l);
            (0..5).filter_map(|_| step_noisy(&p, &mut sim, 11, 3)).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn gate_fault_count_is_binomial() {
        let l = lattice();
        let p = ErrorModelParams::new(0.01, 0.0, 0.0).unwrap();
        let mut sim = FrameSim::new(&l);
        sim.propagate(&[]);
        let gates = l.round_ops.len() as f64;
        let trials = 400u64;
        let mut faulty_ops = 0usize;
        for t in 0..trials {
            let ev = sample_round(&p, &sim, &mut stream(5, t, 1, Stream::Faults));
            let mut ops: Vec<u32> = ev.iter().map(|e| e.op).collect();
            ops.dedup();
            faulty_ops += ops.len();
        }
        // Identity draws are not recorded: a single-qubit draw is non-trivial
        // with probability 3/4, a two-qubit draw with 15/16.
        let n_single = l.round_ops.iter().filter(|s| !matches!(s.op, Op::Cz { .. })).count() as f64;
        let n_two = gates - n_single;
        let q = p.p_comp;
        let per_round = n_single * q * 0.75 + n_two * q * 15.0 / 16.0;
        let mean = per_round * trials as f64;
        let var = trials as f64 * (n_single * q * 0.75 * (1.0 - q * 0.75) + n_two * q * 15.0 / 16.0 * (1.0 - q * 15.0 / 16.0));
        assert!((faulty_ops as f64 - mean).abs() < 5.0 * var.sqrt(), "{faulty_ops} vs {mean}");
    }

    #[test]
    fn lost_hub_with_full_lint_draws_once_per_skipped_gate() {
        let l = lattice();
        let hub = l
            .sites
            .iter()
            .find(|s| s.kind == SiteKind::Hub && s.layer == 0 && l.gates[s.id].iter().all(|g| !matches!(g, GateSlot::Idle)))
            .unwrap()
            .id;
        let mut sim = FrameSim::new(&l);
        sim.propagate(&[]);
        let op = op_index(&l, |o| matches!(o, Op::Init { site } if site.id == hub && site.dr == 0));
        let loss = ErrorEvent { round: 1, site: hub, op, slot: 0, kind: EventKind::Loss };
        let p = ErrorModelParams::new(0.0, 0.0, 1.0).unwrap();
        let mut total = 0;
        let mut nontrivial = 0;
        for t in 0..200 {
            let lint = apply_loss_interactions(&p, &sim, &[loss], &mut stream(1, t, 1, Stream::LossInteraction));
            assert_eq!(lint.len(), 4);
            total += lint.len();
            nontrivial += lint.iter().filter(|e| e.kind != EventKind::LossInteraction(Pauli::I)).count();
        }
        let frac = nontrivial as f64 / total as f64;
        assert!((frac - 0.75).abs() < 0.06, "{frac}");
    }

    #[test]
    fn processing_round_of_carried_spoke_ops() {
        let l = lattice();
        let (i, site) = l
            .round_ops
            .iter()
            .enumerate()
            .find_map(|(i, s)| match s.op {
                Op::Measure { site } if site.dr < 0 => Some((i as u32, site)),
                _ => None,
            })
            .unwrap();
        let e = ErrorEvent { round: 2, site: site.id, op: i, slot: 5, kind: EventKind::Pauli(Pauli::Z) };
        assert_eq!(processing_round(&l, &e), 3);
        assert_eq!(flipped(&propagate_rounds(&l, 5, &[e])), vec![(2, site.id)]);
    }
}
