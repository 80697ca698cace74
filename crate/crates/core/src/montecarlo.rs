//! Continuous simulation: blocks of `t_check` noisy rounds, each followed by
//! a check that caps the cluster with two perfect rounds, decodes the window
//! and compares the logical parity with the previous check. The cap lives on
//! a clone of the simulator and is discarded afterwards.

use std::collections::HashSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decoder::{build_weight_graph, merge_graph_for_loss, mwpm, Partner, WeightGraph};
use crate::errmodel::{step_noisy, ErrorModelParams, FrameSim};
use crate::error::{Error, Result};
use crate::lattice::{FaceEnd, Lattice, LatticeType, Side};
use crate::syndrome::{merge_lost, History, Merged};

pub const MAX_T_CHECK: u64 = 10_000;
const ADAPT_EVERY: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TCheck {
    Auto,
    Fixed(u64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub d: usize,
    pub params: ErrorModelParams,
    pub t_check: TCheck,
    /// Retention window in rounds; `5d` when unset.
    pub t_delete: Option<u64>,
    /// Total block budget over all trials.
    pub blocks: Option<u64>,
    /// Total noisy-round budget over all trials.
    pub rounds: Option<u64>,
    /// Stop once this many failures have been seen over all trials.
    pub failures: Option<u64>,
    /// Hard cap on noisy rounds over all trials.
    pub max_rounds: u64,
    /// Independent block sequences; each gets an equal share of every budget.
    pub trials: u64,
    pub seed: u64,
}

impl RunConfig {
    pub fn new(d: usize, params: ErrorModelParams, seed: u64) -> Self {
        RunConfig {
            d,
            params,
            t_check: TCheck::Auto,
            t_delete: None,
            blocks: None,
            rounds: None,
            failures: None,
            max_rounds: 10_000_000,
            trials: 1,
            seed,
        }
    }

    pub fn t_delete(&self) -> u64 {
        self.t_delete.unwrap_or(5 * self.d as u64)
    }

    pub fn t_check_max(&self) -> u64 {
        MAX_T_CHECK.min(self.t_delete().saturating_sub(2)).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.d < 3 || self.d.is_multiple_of(2) {
            return Err(Error::InvalidDistance(self.d));
        }
        if self.t_delete() < 3 {
            return Err(Error::InvalidParam(format!("t_delete = {} must be at least 3", self.t_delete())));
        }
        if let TCheck::Fixed(t) = self.t_check {
            if t == 0 || t + 2 > self.t_delete() {
                return Err(Error::InvalidParam(format!("t_check = {t} must lie in 1..=t_delete-2")));
            }
        }
        if self.trials == 0 {
            return Err(Error::InvalidParam("trials must be positive".into()));
        }
        if self.blocks.is_none() && self.rounds.is_none() && self.failures.is_none() {
            return Err(Error::InvalidParam("a stop rule (blocks, rounds or failures) is required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Completed,
    /// The stop rule could not be met within the round cap.
    Timeout,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub d: usize,
    pub params: ErrorModelParams,
    pub seed: u64,
    pub failures: u64,
    pub blocks: u64,
    pub rounds: u64,
    /// Logical error probability per round and its 95% Wilson interval.
    pub p_round: f64,
    pub ci_round: (f64, f64),
    /// The same over `d` rounds.
    pub p_d_rounds: f64,
    pub ci_d_rounds: (f64, f64),
    /// Lattice type the failures were monitored on.
    pub monitored: LatticeType,
    pub spanning_failures: u64,
    pub status: Status,
    #[serde(skip)]
    pub wall_seconds: f64,
}

impl RunResult {
    pub fn rounds_per_second(&self) -> f64 {
        if self.wall_seconds > 0.0 {
            self.rounds as f64 / self.wall_seconds
        } else {
            0.0
        }
    }
}

/// 95% Wilson score interval for `k` successes out of `n`.
pub fn wilson(k: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let denom = 1.0 + z * z / n_f;
    let centre = (p + z * z / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z * z / (4.0 * n_f * n_f)).sqrt() / denom;
    let lo = if k == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// Convert a per-round probability to one over `d` rounds.
pub fn per_d_rounds(p: f64, d: usize) -> f64 {
    1.0 - (1.0 - p).powi(d as i32)
}

/// Next block length from the failure count of the last `blocks` blocks.
pub fn adapt_t_check(current: u64, failures: u64, blocks: u64, max: u64) -> u64 {
    let max = max.clamp(1, MAX_T_CHECK);
    if blocks == 0 {
        return current.clamp(1, max);
    }
    let rate = failures as f64 / blocks as f64;
    let next = if rate < 0.1 {
        current.saturating_mul(2)
    } else if rate > 0.5 {
        current / 2
    } else {
        current
    };
    next.clamp(1, max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockOutcome {
    pub failure: bool,
    pub spanning: bool,
    pub events: usize,
    /// Logical parity seen at this check.
    pub parity: bool,
}

fn in_low(merged: &Merged, round: u64, id: usize) -> bool {
    merged.component_of(round, id).is_some_and(|k| merged.components[k].boundary() == Some(Side::Low))
}

/// Cells of every spanning component, for counting each one once.
fn spanning_cells(merged: &Merged) -> Vec<Vec<(u64, usize)>> {
    let spanning: Vec<usize> = (0..merged.components.len()).filter(|&k| merged.components[k].spanning()).collect();
    let mut out = vec![Vec::new(); spanning.len()];
    if spanning.is_empty() {
        return out;
    }
    for i in 0..merged.cell_count() {
        let c = merged.cell_at(i);
        let k = merged.component_of(c.round, c.id).expect("in window");
        if let Some(pos) = spanning.iter().position(|&s| s == k) {
            out[pos].push((c.round, c.id));
        }
    }
    out
}

/// Turns successive check parities into failure counts. Every check in which
/// a spanning loss cluster appears or grows is a failure and rebases the
/// parity; otherwise a parity change is a failure.
#[derive(Debug, Default)]
struct FailureRule {
    marked: HashSet<(u64, usize)>,
    last_parity: bool,
}

impl FailureRule {
    /// Returns `(failure, any spanning component present)`.
    fn judge(&mut self, merged: &Merged, parity: bool) -> (bool, bool) {
        let spanning = spanning_cells(merged);
        let grown = spanning.iter().any(|cells| cells.iter().any(|c| !self.marked.contains(c)));
        let failure = grown || parity != self.last_parity;
        self.last_parity = parity;
        let any = !spanning.is_empty();
        for cells in spanning {
            self.marked.extend(cells);
        }
        (failure, any)
    }

    fn forget_before(&mut self, round: u64) {
        self.marked.retain(|&(r, _)| r >= round);
    }
}

/// One independent block sequence.
pub struct Trial<'a> {
    lattice: &'a Lattice,
    graph: &'a WeightGraph,
    params: ErrorModelParams,
    seed: u64,
    trial: u64,
    t_delete: u64,
    sim: FrameSim<'a>,
    history: History,
    lo: u64,
    committed: bool,
    below_in_low: Vec<bool>,
    rule: FailureRule,
    primal_faces: Vec<usize>,
    pub failures: u64,
    pub spanning_failures: u64,
    pub rounds: u64,
    pub blocks: u64,
}

impl<'a> Trial<'a> {
    pub fn new(lattice: &'a Lattice, graph: &'a WeightGraph, params: ErrorModelParams, seed: u64, trial: u64, t_delete: u64) -> Self {
        let mut sim = FrameSim::new(lattice);
        // Round 0 is perfect: the cluster starts in a known state.
        sim.propagate(&[]);
        let primal_faces = (0..lattice.site_count()).filter(|&s| lattice.face_of(s) == LatticeType::Primal).collect();
        Trial {
            lattice,
            graph,
            params,
            seed,
            trial,
            t_delete,
            sim,
            history: History::new(),
            lo: 0,
            committed: false,
            below_in_low: vec![false; lattice.cells(LatticeType::Primal).len()],
            rule: FailureRule::default(),
            primal_faces,
            failures: 0,
            spanning_failures: 0,
            rounds: 0,
            blocks: 0,
        }
    }

    /// Outcomes of rounds whose readout is final, from the window start.
    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn window_start(&self) -> u64 {
        self.lo
    }

    /// Run `t_check` noisy rounds and one check.
    pub fn run_block(&mut self, t_check: u64) -> Result<BlockOutcome> {
        for _ in 0..t_check {
            self.history.extend(step_noisy(&self.params, &mut self.sim, self.seed, self.trial));
            self.rounds += 1;
        }
        let last = self.sim.next_round() - 1;
        let mut cap = self.sim.clone();
        self.history.extend(cap.propagate(&[]));
        self.history.extend(cap.propagate(&[]));
        self.history.extend(cap.flush());
        let result = self.check(last);
        // Undo the cap: its readouts are not part of the real cluster.
        self.history.truncate(last);
        self.blocks += 1;
        result
    }

    fn check(&mut self, last: u64) -> Result<BlockOutcome> {
        let lo = self.lo;
        let hi = last + 1;
        let merged = merge_lost(self.lattice, &self.history, LatticeType::Primal, lo, hi)?;
        let span = (hi - lo + 1) as usize;
        // Parity contributions bucketed by the latest round they touch.
        let mut bucket = vec![false; span];

        for q in lo..=hi + 1 {
            let Some(o) = self.history.get(q as i64) else { continue };
            for &s in &self.primal_faces {
                if !o.flips[s] || o.lost[s] {
                    continue;
                }
                let mut low_ends = 0;
                let mut top = lo;
                for end in self.lattice.face_ends[s] {
                    match end {
                        FaceEnd::Boundary(side) => low_ends += (side == Side::Low) as u32,
                        FaceEnd::Cell(c) => {
                            let r = q as i64 + c.dr as i64;
                            if r < lo as i64 {
                                low_ends += self.below_in_low[c.id] as u32;
                            } else if r as u64 <= hi {
                                low_ends += in_low(&merged, r as u64, c.id) as u32;
                                top = top.max(r as u64);
                            }
                        }
                    }
                }
                if low_ends == 1 {
                    bucket[(top - lo) as usize] ^= true;
                }
            }
        }

        let events = merged.detection_events();
        let mut spans: Vec<(u64, u64)> =
            merged.components.iter().filter(|c| c.size > 1).map(|c| (c.min_round, c.max_round)).collect();
        if !events.events.is_empty() {
            let contracted = merge_graph_for_loss(self.graph, &merged);
            let matching = mwpm(&events, &contracted)?;
            let comp = |i: usize| &merged.components[events.events[i].0];
            for &(i, partner) in &matching.pairs {
                let (mut a, mut b) = (comp(i).min_round, comp(i).max_round);
                let crossing = match partner {
                    Partner::Boundary(side) => side == Side::Low,
                    Partner::Event(j) => {
                        a = a.min(comp(j).min_round);
                        b = b.max(comp(j).max_round);
                        false
                    }
                };
                if crossing {
                    bucket[(b - lo) as usize] ^= true;
                }
                spans.push((a, b));
            }
        }

        let parity = bucket.iter().fold(self.committed, |acc, &b| acc ^ b);
        let (failure, spanning) = self.rule.judge(&merged, parity);
        if failure {
            self.failures += 1;
            if spanning {
                self.spanning_failures += 1;
            }
        }

        // Advance the window without splitting any component or matched pair.
        let mut new_lo = lo.max((hi + 1).saturating_sub(self.t_delete));
        loop {
            let lowered = spans.iter().filter(|&&(a, b)| a < new_lo && new_lo <= b).map(|&(a, _)| a).min();
            match lowered {
                Some(a) => new_lo = a,
                None => break,
            }
        }
        if new_lo > lo {
            for b in &bucket[..(new_lo - lo) as usize] {
                self.committed ^= b;
            }
            for id in 0..self.below_in_low.len() {
                self.below_in_low[id] = in_low(&merged, new_lo - 1, id);
            }
            self.history.drop_before(new_lo);
            self.rule.forget_before(new_lo);
            self.lo = new_lo;
        }
        Ok(BlockOutcome { failure, spanning, events: events.events.len(), parity })
    }
}

struct Quota {
    blocks: u64,
    rounds: u64,
    failures: u64,
    max_rounds: u64,
}

fn share(total: u64, trials: u64, k: u64) -> u64 {
    total / trials + u64::from(k < total % trials)
}

#[derive(Debug, Clone, Copy, Default)]
struct TrialTally {
    failures: u64,
    spanning: u64,
    rounds: u64,
    blocks: u64,
    hit_cap: bool,
}

fn run_trial(cfg: &RunConfig, lattice: &Lattice, graph: &WeightGraph, k: u64, quota: &Quota) -> Result<TrialTally> {
    let mut trial = Trial::new(lattice, graph, cfg.params, cfg.seed, k, cfg.t_delete());
    let max = cfg.t_check_max();
    let mut t_check = match cfg.t_check {
        TCheck::Fixed(t) => t,
        TCheck::Auto => 1,
    };
    let (mut recent_f, mut recent_b) = (0u64, 0u64);
    loop {
        if trial.blocks >= quota.blocks || trial.rounds >= quota.rounds || trial.failures >= quota.failures {
            return Ok(TrialTally { failures: trial.failures, spanning: trial.spanning_failures, rounds: trial.rounds, blocks: trial.blocks, hit_cap: false });
        }
        if trial.rounds >= quota.max_rounds {
            return Ok(TrialTally { failures: trial.failures, spanning: trial.spanning_failures, rounds: trial.rounds, blocks: trial.blocks, hit_cap: true });
        }
        let room = quota.rounds.min(quota.max_rounds) - trial.rounds;
        let out = trial.run_block(t_check.min(room).max(1))?;
        if let TCheck::Auto = cfg.t_check {
            recent_f += out.failure as u64;
            recent_b += 1;
            if recent_b == ADAPT_EVERY {
                t_check = adapt_t_check(t_check, recent_f, recent_b, max);
                recent_f = 0;
                recent_b = 0;
            }
        }
    }
}

/// Run the configured trials on `workers` threads (0 = rayon default).
pub fn estimate(cfg: &RunConfig, workers: usize) -> Result<RunResult> {
    cfg.validate()?;
    let start = Instant::now();
    let zero_rates = cfg.params.p_comp == 0.0 && cfg.params.p_loss == 0.0;
    let lattice = Lattice::build(cfg.d)?;
    let graph = build_weight_graph(&lattice, LatticeType::Primal, &cfg.params)?;
    let unreachable = cfg.failures.is_some_and(|f| f > 0) && zero_rates && cfg.blocks.is_none() && cfg.rounds.is_none();
    let tallies: Vec<TrialTally> = if unreachable {
        Vec::new()
    } else {
        let quotas: Vec<Quota> = (0..cfg.trials)
            .map(|k| Quota {
                blocks: cfg.blocks.map_or(u64::MAX, |b| share(b, cfg.trials, k)),
                rounds: cfg.rounds.map_or(u64::MAX, |r| share(r, cfg.trials, k)),
                failures: cfg.failures.map_or(u64::MAX, |f| share(f, cfg.trials, k).max(1)),
                max_rounds: share(cfg.max_rounds, cfg.trials, k),
            })
            .collect();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::InvalidParam(format!("worker pool: {e}")))?;
        pool.install(|| {
            (0..cfg.trials)
                .into_par_iter()
                .map(|k| run_trial(cfg, &lattice, &graph, k, &quotas[k as usize]))
                .collect::<Result<Vec<_>>>()
        })?
    };
    let failures: u64 = tallies.iter().map(|t| t.failures).sum();
    let rounds: u64 = tallies.iter().map(|t| t.rounds).sum();
    let blocks: u64 = tallies.iter().map(|t| t.blocks).sum();
    let spanning: u64 = tallies.iter().map(|t| t.spanning).sum();
    let capped = tallies.iter().any(|t| t.hit_cap) && cfg.failures.is_some_and(|f| failures < f);
    let p_round = if rounds > 0 { failures as f64 / rounds as f64 } else { 0.0 };
    let ci_round = wilson(failures, rounds);
    Ok(RunResult {
        d: cfg.d,
        params: cfg.params,
        seed: cfg.seed,
        failures,
        blocks,
        rounds,
        p_round,
        ci_round,
        p_d_rounds: per_d_rounds(p_round, cfg.d),
        ci_d_rounds: (per_d_rounds(ci_round.0, cfg.d), per_d_rounds(ci_round.1, cfg.d)),
        monitored: LatticeType::Primal,
        spanning_failures: spanning,
        status: if unreachable || capped { Status::Timeout } else { Status::Completed },
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Reference simulator without windowing: every check re-simulates the
/// trial from round 0 and decodes its whole history from scratch.
pub mod reference {
    use super::*;

    fn parity_from_scratch(lattice: &Lattice, graph: &WeightGraph, history: &History, hi: u64) -> Result<(bool, Merged)> {
        let merged = merge_lost(lattice, history, LatticeType::Primal, 0, hi)?;
        let mut parity = false;
        for q in 0..=hi + 1 {
            let Some(o) = history.get(q as i64) else { continue };
            for s in 0..lattice.site_count() {
                if lattice.face_of(s) != LatticeType::Primal || !o.flips[s] || o.lost[s] {
                    continue;
                }
                let side_low = |e: FaceEnd| match e {
                    FaceEnd::Boundary(side) => side == Side::Low,
                    FaceEnd::Cell(c) => in_low(&merged, (q as i64 + c.dr as i64) as u64, c.id),
                };
                let [a, b] = lattice.face_ends[s];
                parity ^= side_low(a) != side_low(b);
            }
        }
        let events = merged.detection_events();
        if !events.events.is_empty() {
            let contracted = merge_graph_for_loss(graph, &merged);
            let m = mwpm(&events, &contracted)?;
            for &(_, partner) in &m.pairs {
                parity ^= partner == Partner::Boundary(Side::Low);
            }
        }
        Ok((parity, merged))
    }

    /// Failures over `rounds` noisy rounds, checking after every round.
    pub fn naive_trial(lattice: &Lattice, graph: &WeightGraph, params: &ErrorModelParams, seed: u64, trial: u64, rounds: u64) -> Result<u64> {
        let mut failures = 0;
        let mut rule = FailureRule::default();
        for r in 1..=rounds {
            let mut sim = FrameSim::new(lattice);
            let mut history = History::new();
            sim.propagate(&[]);
            for _ in 0..r {
                history.extend(step_noisy(params, &mut sim, seed, trial));
            }
            history.extend(sim.propagate(&[]));
            history.extend(sim.propagate(&[]));
            history.extend(sim.flush());
            let (parity, merged) = parity_from_scratch(lattice, graph, &history, r + 1)?;
            failures += rule.judge(&merged, parity).0 as u64;
        }
        Ok(failures)
    }

    /// `(failures, rounds)` over `trials` independent trials of `rounds` rounds.
    pub fn naive_estimate(d: usize, params: &ErrorModelParams, seed: u64, trials: u64, rounds: u64) -> Result<(u64, u64)> {
        let lattice = Lattice::build(d)?;
        let graph = build_weight_graph(&lattice, LatticeType::Primal, params)?;
        let failures = (0..trials)
            .into_par_iter()
            .map(|k| naive_trial(&lattice, &graph, params, seed, k, rounds))
            .collect::<Result<Vec<u64>>>()?
            .into_iter()
            .sum();
        Ok((failures, trials * rounds))
    }
}
