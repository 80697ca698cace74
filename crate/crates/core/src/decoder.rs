//! Matching decoder: a negative-log-likelihood weight graph derived from the
//! error model, contraction around lost qubits, shortest paths and exact
//! minimum-weight perfect matching of detection events.

use std::collections::{BinaryHeap, HashMap};
use std::cmp::Reverse;
use std::io::Write;

use serde::Serialize;

use crate::errmodel::{ErrorEvent, ErrorModelParams, EventKind, FrameSim};
use crate::error::{Error, Result};
use crate::lattice::{FaceEnd, GateSlot, Lattice, LatticeType, Op, Rel, Side};
use crate::matching::min_weight_perfect_matching;
use crate::pauli::Pauli;
use crate::syndrome::{DetectionEventSet, Merged};

/// Weights are `-ln p` in fixed point so matching runs on exact integers.
pub const WEIGHT_SCALE: f64 = 10_000.0;

pub fn weight_of(p: f64) -> i64 {
    if p <= 0.0 {
        return i64::MAX;
    }
    (-p.ln() * WEIGHT_SCALE).round().max(0.0) as i64
}

/// Endpoint of a template edge, relative to the round of its first cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Node {
    Cell { dr: i32, id: usize },
    Boundary(Side),
}

#[derive(Debug, Clone, Serialize)]
pub struct Edge {
    /// First endpoint: a cell at offset 0.
    pub a: usize,
    pub b: Node,
    pub probability: f64,
    pub weight: i64,
    /// The edge crosses the correlation cut at the low boundary.
    pub crossing: bool,
}

/// Translation-invariant weight graph for one lattice type.
#[derive(Debug, Clone)]
pub struct WeightGraph {
    pub lattice: LatticeType,
    pub edges: Vec<Edge>,
    /// Edge indices keyed by their first cell.
    out: Vec<Vec<u32>>,
    /// Total probability of single faults flipping both boundaries and no cell.
    pub undetectable: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum AbsNode {
    Cell(i64, usize),
    Boundary(Side),
}

type FlipSet = Vec<AbsNode>;

fn xor(a: &FlipSet, b: &FlipSet) -> FlipSet {
    let mut out: FlipSet = a.iter().chain(b.iter()).copied().collect();
    out.sort_unstable();
    let mut res = Vec::with_capacity(out.len());
    let mut i = 0;
    while i < out.len() {
        if i + 1 < out.len() && out[i] == out[i + 1] {
            i += 2;
        } else {
            res.push(out[i]);
            i += 1;
        }
    }
    res
}

const BULK_ROUND: u64 = 3;

/// Cells toggled (per lattice type) by one X or Z on `target` right after op `op`.
fn flip_sets(lattice: &Lattice, op: u32, target: Rel, slot: u8, p: Pauli) -> [FlipSet; 2] {
    let e = ErrorEvent {
        round: (BULK_ROUND as i64 + target.dr as i64) as u64,
        site: target.id,
        op,
        slot,
        kind: EventKind::Pauli(p),
    };
    let mut sim = FrameSim::starting_at(lattice, BULK_ROUND);
    let outs = [sim.propagate(&[e]), sim.propagate(&[]), sim.flush()];
    let mut sets: [FlipSet; 2] = [Vec::new(), Vec::new()];
    for o in outs.into_iter().flatten() {
        for (s, _) in o.flips.iter().enumerate().filter(|(_, &f)| f) {
            let lt = lattice.face_of(s);
            let toggles: FlipSet = lattice.face_ends[s]
                .iter()
                .map(|&end| match end {
                    FaceEnd::Cell(c) => AbsNode::Cell(o.round as i64 + c.dr as i64, c.id),
                    FaceEnd::Boundary(side) => AbsNode::Boundary(side),
                })
                .collect();
            sets[lt.index()] = xor(&sets[lt.index()], &toggles);
        }
    }
    sets
}

fn op_targets(op: &Op) -> Vec<(Rel, u8)> {
    match *op {
        Op::Init { site } => vec![(site, 0)],
        Op::Measure { site } => vec![(site, 5)],
        Op::Cz { a, slot_a, b, slot_b } => vec![(a, slot_a), (b, slot_b)],
    }
}

/// Loss opportunities a site has had before reaching gate slot `slot`.
fn loss_draws_before(lattice: &Lattice, site: usize, slot: u8) -> usize {
    lattice.gates[site][..slot as usize].iter().filter(|g| !matches!(g, GateSlot::Idle)).count()
}

#[derive(Default)]
struct Accumulator {
    log_not: HashMap<(usize, Node), f64>,
    undetectable_log_not: f64,
}

impl Accumulator {
    fn add_pair(&mut self, u: AbsNode, v: AbsNode, p: f64) {
        let key = match (u, v) {
            (AbsNode::Cell(r1, c1), AbsNode::Cell(r2, c2)) => {
                let ((r1, c1), (r2, c2)) = if (r1, c1) <= (r2, c2) { ((r1, c1), (r2, c2)) } else { ((r2, c2), (r1, c1)) };
                (c1, Node::Cell { dr: (r2 - r1) as i32, id: c2 })
            }
            (AbsNode::Cell(_, c), AbsNode::Boundary(s)) | (AbsNode::Boundary(s), AbsNode::Cell(_, c)) => (c, Node::Boundary(s)),
            (AbsNode::Boundary(_), AbsNode::Boundary(_)) => {
                self.undetectable_log_not += (1.0 - p).ln();
                return;
            }
        };
        *self.log_not.entry(key).or_insert(0.0) += (1.0 - p).ln();
    }

    /// Record a fault with toggle set `set`; sets larger than one edge are
    /// split along the given single-qubit components.
    fn add(&mut self, set: &FlipSet, parts: &[&FlipSet], p: f64) {
        if p <= 0.0 || set.is_empty() {
            return;
        }
        if set.len() == 2 {
            self.add_pair(set[0], set[1], p);
            return;
        }
        for part in parts {
            for pair in part.chunks(2) {
                if let [u, v] = *pair {
                    self.add_pair(u, v, p);
                }
            }
        }
    }
}

/// Enumerate every primitive fault of one bulk round, propagate it in
/// isolation and accumulate its probability on the edge it flips.
pub fn build_weight_graph(lattice: &Lattice, lt: LatticeType, params: &ErrorModelParams) -> Result<WeightGraph> {
    params.validate()?;
    let li = lt.index();
    let mut acc = Accumulator::default();
    for (i, sop) in lattice.round_ops.iter().enumerate() {
        let i = i as u32;
        let targets = op_targets(&sop.op);
        let parts: Vec<[FlipSet; 2]> = targets
            .iter()
            .map(|&(rel, slot)| {
                let xs = flip_sets(lattice, i, rel, slot, Pauli::X);
                let zs = flip_sets(lattice, i, rel, slot, Pauli::Z);
                [xs[li].clone(), zs[li].clone()]
            })
            .collect();
        let single = |q: usize, p: Pauli| -> Vec<&FlipSet> {
            let mut v = Vec::new();
            if p.has_x() {
                v.push(&parts[q][0]);
            }
            if p.has_z() {
                v.push(&parts[q][1]);
            }
            v
        };
        let combine = |v: &[&FlipSet]| v.iter().fold(Vec::new(), |acc, s| xor(&acc, s));
        match sop.op {
            Op::Init { .. } | Op::Measure { .. } => {
                for p in [Pauli::X, Pauli::Y, Pauli::Z] {
                    let comps = single(0, p);
                    acc.add(&combine(&comps), &comps, params.p_comp / 4.0);
                }
            }
            Op::Cz { a, slot_a, b, slot_b } => {
                for pa in Pauli::ALL {
                    for pb in Pauli::ALL {
                        if pa == Pauli::I && pb == Pauli::I {
                            continue;
                        }
                        let mut comps = single(0, pa);
                        comps.extend(single(1, pb));
                        acc.add(&combine(&comps), &comps, params.p_comp / 16.0);
                    }
                }
                // Loss interaction: the partner vanished at an earlier slot.
                for (q, partner, pslot) in [(0, b, slot_b), (1, a, slot_a)] {
                    let p_gone = (params.p_loss * loss_draws_before(lattice, partner.id, pslot) as f64).min(1.0);
                    let p = p_gone * params.p_lint / 4.0;
                    for pauli in [Pauli::X, Pauli::Y, Pauli::Z] {
                        let comps = single(q, pauli);
                        acc.add(&combine(&comps), &comps, p);
                    }
                }
            }
        }
    }
    let mut keys: Vec<(usize, Node)> = acc.log_not.keys().copied().collect();
    keys.sort_unstable();
    let ncells = lattice.cells(lt).len();
    let mut out = vec![Vec::new(); ncells];
    let mut edges = Vec::with_capacity(keys.len());
    for (a, b) in keys {
        let probability = 1.0 - acc.log_not[&(a, b)].exp();
        if probability <= 0.0 {
            continue;
        }
        out[a].push(edges.len() as u32);
        edges.push(Edge { a, b, probability, weight: weight_of(probability), crossing: b == Node::Boundary(Side::Low) });
    }
    Ok(WeightGraph { lattice: lt, edges, out, undetectable: 1.0 - acc.undetectable_log_not.exp() })
}

impl WeightGraph {
    pub fn edges_from(&self, cell: usize) -> impl Iterator<Item = &Edge> {
        self.out.get(cell).into_iter().flatten().map(move |&k| &self.edges[k as usize])
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["lattice", "a_cell", "b_kind", "b_dr", "b_cell", "probability", "weight", "crossing"])?;
        let lt = format!("{:?}", self.lattice).to_lowercase();
        for e in &self.edges {
            let (kind, dr, cell) = match e.b {
                Node::Cell { dr, id } => ("cell".to_string(), dr.to_string(), id.to_string()),
                Node::Boundary(s) => (format!("boundary_{}", format!("{s:?}").to_lowercase()), String::new(), String::new()),
            };
            wr.write_record([
                lt.clone(),
                e.a.to_string(),
                kind,
                dr,
                cell,
                format!("{:.6e}", e.probability),
                e.weight.to_string(),
                (e.crossing as u8).to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

pub const LOW_NODE: u32 = 0;
pub const HIGH_NODE: u32 = 1;

/// Matching graph over one window: node 0 and 1 are the low and high
/// boundaries (with every component merged into them), other nodes are
/// superstabilizers.
#[derive(Debug, Clone)]
pub struct Contracted {
    /// Node of each component of the merge.
    pub node_of: Vec<u32>,
    start: Vec<u32>,
    to: Vec<u32>,
    weight: Vec<i64>,
    prob: Vec<f64>,
}

impl Contracted {
    pub fn node_count(&self) -> usize {
        self.start.len() - 1
    }

    /// `(neighbour, weight, probability)` of every edge at `u`.
    pub fn neighbors(&self, u: u32) -> impl Iterator<Item = (u32, i64, f64)> + '_ {
        let (s, e) = (self.start[u as usize] as usize, self.start[u as usize + 1] as usize);
        (s..e).map(move |k| (self.to[k], self.weight[k], self.prob[k]))
    }

    /// Crossing bit of an edge: it joins the low-boundary region to the rest.
    pub fn crossing(u: u32, v: u32) -> bool {
        (u == LOW_NODE) != (v == LOW_NODE)
    }

    pub fn edge_count(&self) -> usize {
        self.to.len() / 2
    }
}

/// Contract merged cells (and boundary-merged components) into single
/// nodes, combining parallel edges as independent error sources.
pub fn merge_graph_for_loss(graph: &WeightGraph, merged: &Merged) -> Contracted {
    let ncomp = merged.components.len();
    let node_of: Vec<u32> = merged
        .components
        .iter()
        .enumerate()
        .map(|(k, c)| match c.boundary() {
            Some(Side::Low) => LOW_NODE,
            Some(Side::High) => HIGH_NODE,
            None => 2 + k as u32,
        })
        .collect();
    let n = 2 + ncomp;
    let mut list: Vec<(u32, u32, f64)> = Vec::new();
    for i in 0..merged.cell_count() {
        let cell = merged.cell_at(i);
        let Some(ca) = merged.component_of(cell.round, cell.id) else { continue };
        let u = node_of[ca];
        for e in graph.edges_from(cell.id) {
            let v = match e.b {
                Node::Cell { dr, id } => match merged.component_of(cell.round + dr as u64, id) {
                    Some(cb) => node_of[cb],
                    None => continue,
                },
                Node::Boundary(Side::Low) => LOW_NODE,
                Node::Boundary(Side::High) => HIGH_NODE,
            };
            if u != v {
                list.push((u.min(v), u.max(v), (1.0 - e.probability).ln()));
            }
        }
    }
    list.sort_by_key(|x| (x.0, x.1));
    let mut combined: Vec<(u32, u32, f64)> = Vec::with_capacity(list.len());
    for (u, v, l) in list {
        match combined.last_mut() {
            Some(last) if last.0 == u && last.1 == v => last.2 += l,
            _ => combined.push((u, v, l)),
        }
    }
    let mut degree = vec![0u32; n + 1];
    for &(u, v, _) in &combined {
        degree[u as usize] += 1;
        degree[v as usize] += 1;
    }
    let mut start = vec![0u32; n + 1];
    for k in 0..n {
        start[k + 1] = start[k] + degree[k];
    }
    let mut fill = start.clone();
    let m = start[n] as usize;
    let (mut to, mut weight, mut prob) = (vec![0u32; m], vec![0i64; m], vec![0f64; m]);
    for &(u, v, l) in &combined {
        let p = 1.0 - l.exp();
        let w = weight_of(p);
        for (x, y) in [(u, v), (v, u)] {
            let k = fill[x as usize] as usize;
            to[k] = y;
            weight[k] = w;
            prob[k] = p;
            fill[x as usize] += 1;
        }
    }
    Contracted { node_of, start, to, weight, prob }
}

/// Shortest-path costs between detection events and to each boundary.
#[derive(Debug, Clone)]
pub struct DistanceTable {
    pub n: usize,
    /// Row-major `n × n`; `i64::MAX` when unreachable.
    pub pair: Vec<i64>,
    pub pair_parity: Vec<bool>,
    /// Cheapest boundary, its cost and crossing parity, if boundaries are enabled.
    pub boundary: Vec<Option<(i64, Side, bool)>>,
}

impl DistanceTable {
    pub fn pair(&self, i: usize, j: usize) -> i64 {
        self.pair[i * self.n + j]
    }
}

/// Dijkstra from every event node. Paths end at, but never pass through, a boundary.
pub fn distance_table(graph: &Contracted, events: &[u32], boundaries: bool) -> DistanceTable {
    let n = events.len();
    let nn = graph.node_count();
    let mut pair = vec![i64::MAX; n * n];
    let mut pair_parity = vec![false; n * n];
    let mut boundary = vec![None; n];
    let mut dist = vec![i64::MAX; nn];
    let mut par = vec![false; nn];
    let mut touched: Vec<u32> = Vec::new();
    let mut heap = BinaryHeap::new();
    for (i, &src) in events.iter().enumerate() {
        for &t in &touched {
            dist[t as usize] = i64::MAX;
        }
        touched.clear();
        dist[src as usize] = 0;
        par[src as usize] = false;
        touched.push(src);
        heap.push(Reverse((0i64, src)));
        while let Some(Reverse((d, u))) = heap.pop() {
            if d > dist[u as usize] {
                continue;
            }
            if u == LOW_NODE || u == HIGH_NODE {
                continue;
            }
            for (v, w, _) in graph.neighbors(u) {
                let nd = d.saturating_add(w);
                if nd < dist[v as usize] {
                    if dist[v as usize] == i64::MAX {
                        touched.push(v);
                    }
                    dist[v as usize] = nd;
                    par[v as usize] = par[u as usize] ^ Contracted::crossing(u, v);
                    heap.push(Reverse((nd, v)));
                }
            }
        }
        for (j, &dst) in events.iter().enumerate() {
            pair[i * n + j] = dist[dst as usize];
            pair_parity[i * n + j] = par[dst as usize];
        }
        if boundaries {
            let lo = dist[LOW_NODE as usize];
            let hi = dist[HIGH_NODE as usize];
            boundary[i] = if lo == i64::MAX && hi == i64::MAX {
                None
            } else if lo <= hi {
                Some((lo, Side::Low, par[LOW_NODE as usize]))
            } else {
                Some((hi, Side::High, par[HIGH_NODE as usize]))
            };
        }
    }
    DistanceTable { n, pair, pair_parity, boundary }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Partner {
    Event(usize),
    Boundary(Side),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Matching {
    /// `(event, partner)` with each event pair listed once, lower index first.
    pub pairs: Vec<(usize, Partner)>,
    pub weight: i64,
    /// XOR of the cut-crossing bits of the chosen paths.
    pub parity: bool,
}

/// Exact minimum-weight perfect matching of the events in `table`, each
/// event optionally matched to its nearest boundary.
pub fn mwpm_table(table: &DistanceTable) -> Result<Matching> {
    let n = table.n;
    let bcost = |i: usize| table.boundary[i].map(|b| b.0);
    let mut pair_edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let d = table.pair(i, j);
            if d == i64::MAX {
                continue;
            }
            // A pair no cheaper than two boundary matches is never needed.
            if let (Some(bi), Some(bj)) = (bcost(i), bcost(j)) {
                if d >= bi.saturating_add(bj) {
                    continue;
                }
            }
            pair_edges.push((i, j, d));
        }
    }
    // Events joined by no candidate pair are matched independently.
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for &(i, j, _) in &pair_edges {
        let (a, b) = (root(&mut parent, i), root(&mut parent, j));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut group_of = vec![usize::MAX; n];
    for i in 0..n {
        let r = root(&mut parent, i);
        if group_of[r] == usize::MAX {
            group_of[r] = groups.len();
            groups.push(Vec::new());
        }
        group_of[i] = group_of[r];
        groups[group_of[i]].push(i);
    }
    let with_boundary = table.boundary.iter().any(Option::is_some);
    let mut mate = vec![usize::MAX; n];
    let mut local = vec![0usize; n];
    let mut group_edges: Vec<Vec<(usize, usize, i64)>> = vec![Vec::new(); groups.len()];
    for &(i, j, d) in &pair_edges {
        group_edges[group_of[i]].push((i, j, d));
    }
    for (g, members) in groups.iter().enumerate() {
        let k = members.len();
        for (li, &i) in members.iter().enumerate() {
            local[i] = li;
        }
        let mut edges: Vec<(usize, usize, i64)> = Vec::new();
        for &(i, j, d) in &group_edges[g] {
            edges.push((local[i], local[j], d));
            if with_boundary {
                // Boundary copies pair up for free wherever their events could.
                edges.push((k + local[i], k + local[j], 0));
            }
        }
        let total = if with_boundary {
            for &i in members {
                if let Some(b) = bcost(i) {
                    edges.push((local[i], k + local[i], b));
                }
            }
            2 * k
        } else {
            k
        };
        let m = min_weight_perfect_matching(total, &edges).map_err(|_| Error::Infeasible(n))?;
        for (li, &i) in members.iter().enumerate() {
            mate[i] = if m[li] >= k { usize::MAX - 1 } else { members[m[li]] };
        }
    }
    let mut pairs = Vec::new();
    let mut weight = 0i64;
    let mut parity = false;
    for i in 0..n {
        let m = mate[i];
        if m == usize::MAX - 1 {
            let (w, side, p) = table.boundary[i].expect("boundary edge exists");
            pairs.push((i, Partner::Boundary(side)));
            weight += w;
            parity ^= p;
        } else if i < m {
            pairs.push((i, Partner::Event(m)));
            weight += table.pair(i, m);
            parity ^= table.pair_parity[i * n + m];
        }
    }
    Ok(Matching { pairs, weight, parity })
}

/// Match the events of a merged window on its contracted graph.
pub fn mwpm(events: &DetectionEventSet, graph: &Contracted) -> Result<Matching> {
    let nodes: Vec<u32> = events.events.iter().map(|&(c, _)| graph.node_of[c]).collect();
    mwpm_table(&distance_table(graph, &nodes, true))
}

/// Cut-crossing parity of the correction realized by a matching.
pub fn correction_parity(matching: &Matching) -> bool {
    matching.parity
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::errmodel::RoundOutcome;
    use crate::matching::brute_force_min;
    use crate::syndrome::{merge_lost, History};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn blank(l: &Lattice, rounds: u64) -> History {
        let mut h = History::new();
        for r in 0..rounds {
            let n = l.site_count();
            h.push(RoundOutcome { round: r, flips: vec![false; n], lost: vec![false; n] });
        }
        h
    }

    fn params() -> ErrorModelParams {
        ErrorModelParams::new(1e-3, 0.0, 0.0).unwrap()
    }

    #[test]
    fn zero_rates_give_no_edges() {
        let l = Lattice::build(3).unwrap();
        let g = build_weight_graph(&l, LatticeType::Primal, &ErrorModelParams::noiseless()).unwrap();
        assert!(g.edges.is_empty());
    }

    #[test]
    fn measurement_faults_land_on_face_edges() {
        let l = Lattice::build(3).unwrap();
        let g = build_weight_graph(&l, LatticeType::Primal, &params()).unwrap();
        for (s, ends) in l.face_ends.iter().enumerate() {
            if l.face_of(s) != LatticeType::Primal {
                continue;
            }
            let [FaceEnd::Cell(a), FaceEnd::Cell(b)] = *ends else { continue };
            let (a, b) = if (a.dr, a.id) <= (b.dr, b.id) { (a, b) } else { (b, a) };
            let want = Node::Cell { dr: b.dr - a.dr, id: b.id };
            assert!(g.edges_from(a.id).any(|e| e.b == want), "face {s} has no edge");
        }
        assert!(g.undetectable == 0.0);
    }

    #[test]
    fn translation_classes_have_equal_probability() {
        // Every interior space-like edge of the same orientation sees the same faults.
        let l = Lattice::build(5).unwrap();
        let g = build_weight_graph(&l, LatticeType::Primal, &params()).unwrap();
        let cells = l.cells(LatticeType::Primal);
        let mut by_offset: HashMap<(i32, i32), Vec<f64>> = HashMap::new();
        for e in &g.edges {
            let Node::Cell { dr: 0, id } = e.b else { continue };
            let (ca, cb) = (&cells[e.a], &cells[id]);
            if !ca.is_complete() || !cb.is_complete() || ca.boundary.is_some() || cb.boundary.is_some() {
                continue;
            }
            by_offset.entry((cb.center.0 - ca.center.0, cb.center.1 - ca.center.1)).or_default().push(e.probability);
        }
        assert!(!by_offset.is_empty());
        for (off, ps) in by_offset {
            for p in &ps {
                assert!((p - ps[0]).abs() < 1e-12 * ps[0], "{off:?}: {ps:?}");
            }
        }
    }

    #[test]
    fn weights_do_not_grow_with_error_rate() {
        let l = Lattice::build(3).unwrap();
        let lo = build_weight_graph(&l, LatticeType::Primal, &ErrorModelParams::new(1e-3, 1e-3, 1.0).unwrap()).unwrap();
        let hi = build_weight_graph(&l, LatticeType::Primal, &ErrorModelParams::new(2e-3, 1e-3, 1.0).unwrap()).unwrap();
        let map: HashMap<(usize, Node), i64> = hi.edges.iter().map(|e| ((e.a, e.b), e.weight)).collect();
        for e in &lo.edges {
            assert!(map[&(e.a, e.b)] <= e.weight);
        }
    }

    #[test]
    fn no_loss_leaves_graph_unchanged() {
        let l = Lattice::build(3).unwrap();
        let g = build_weight_graph(&l, LatticeType::Primal, &params()).unwrap();
        let h = blank(&l, 8);
        let m = merge_lost(&l, &h, LatticeType::Primal, 2, 4).unwrap();
        let c = merge_graph_for_loss(&g, &m);
        let mut count = 0;
        for i in 0..m.cell_count() {
            let cell = m.cell_at(i);
            for e in g.edges_from(cell.id) {
                let u = c.node_of[m.component_of(cell.round, cell.id).unwrap()];
                let v = match e.b {
                    Node::Cell { dr, id } => match m.component_of(cell.round + dr as u64, id) {
                        Some(k) => c.node_of[k],
                        None => continue,
                    },
                    Node::Boundary(s) => s as u32,
                };
                count += 1;
                assert!(c.neighbors(u).any(|(t, w, _)| t == v && w == e.weight));
            }
        }
        assert_eq!(count, c.edge_count());
    }

    #[test]
    fn contraction_combines_parallel_edges() {
        let l = Lattice::build(5).unwrap();
        let g = build_weight_graph(&l, LatticeType::Primal, &params()).unwrap();
        let mut h = blank(&l, 6);
        // Lose an interior space-like face between two round-2 cells.
        let (s, a, b) = l
            .face_ends
            .iter()
            .enumerate()
            .find_map(|(s, e)| match *e {
                [FaceEnd::Cell(a), FaceEnd::Cell(b)]
                    if l.face_of(s) == LatticeType::Primal && a.dr == 0 && b.dr == 0 && l.cells(LatticeType::Primal)[a.id].boundary.is_none() && l.cells(LatticeType::Primal)[b.id].boundary.is_none() =>
                {
                    Some((s, a, b))
                }
                _ => None,
            })
            .unwrap();
        let h2 = {
            let o = &mut h;
            let mut outs: Vec<RoundOutcome> = (0..6).map(|r| o.get(r).unwrap().clone()).collect();
            outs[2].lost[s] = true;
            let mut nh = History::new();
            nh.extend(outs);
            nh
        };
        let m = merge_lost(&l, &h2, LatticeType::Primal, 1, 3).unwrap();
        let c = merge_graph_for_loss(&g, &m);
        let ka = m.component_of(2, a.id).unwrap();
        assert_eq!(Some(ka), m.component_of(2, b.id));
        let u = c.node_of[ka];
        // Probability of every neighbour of the merged node combines the
        // template edges from both members.
        let mut expect: HashMap<u32, f64> = HashMap::new();
        for id in [a.id, b.id] {
            for e in g.edges_from(id).map(|e| (e.b, e.probability)).chain(
                g.edges.iter().filter(|e| e.b == Node::Cell { dr: 0, id }).map(|e| (Node::Cell { dr: 0, id: e.a }, e.probability)),
            ) {
                let v = match e.0 {
                    Node::Cell { dr, id } => c.node_of[m.component_of(2 + dr as u64, id).unwrap()],
                    Node::Boundary(s) => s as u32,
                };
                if v != u {
                    let q = expect.entry(v).or_insert(0.0);
                    *q = *q + e.1 - *q * e.1;
                }
            }
        }
        for (v, p) in expect {
            let got = c.neighbors(u).find(|x| x.0 == v).map(|x| x.2).unwrap();
            assert!((got - p).abs() < 1e-12, "{got} vs {p}");
        }
        let _ = h;
    }

    fn random_instance(seed: u64, d: usize) -> (DistanceTable, bool) {
        let l = Lattice::build(d).unwrap();
        let g = build_weight_graph(&l, LatticeType::Primal, &ErrorModelParams::new(1e-3, 1e-3, 1.0).unwrap()).unwrap();
        let h = blank(&l, 8);
        let m = merge_lost(&l, &h, LatticeType::Primal, 1, 5).unwrap();
        let c = merge_graph_for_loss(&g, &m);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let k = rng.gen_range(1..=10);
        let mut nodes: Vec<u32> = Vec::new();
        while nodes.len() < k {
            let v = rng.gen_range(2..c.node_count() as u32);
            if !nodes.contains(&v) {
                nodes.push(v);
            }
        }
        let boundaries = rng.gen_bool(0.8);
        (distance_table(&c, &nodes, boundaries), boundaries)
    }

    fn brute(t: &DistanceTable) -> Option<i64> {
        let n = t.n;
        let pair: Vec<Vec<i64>> = (0..n).map(|i| (0..n).map(|j| t.pair(i, j)).collect()).collect();
        let b: Vec<Option<i64>> = t.boundary.iter().map(|b| b.map(|x| x.0)).collect();
        brute_force_min(&pair, &b)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn mwpm_equals_brute_force(seed in any::<u64>(), d in prop_oneof![Just(3usize), Just(5usize)]) {
            let (t, _) = random_instance(seed, d);
            match (mwpm_table(&t), brute(&t)) {
                (Ok(m), Some(w)) => prop_assert_eq!(m.weight, w),
                (Err(Error::Infeasible(_)), None) => {}
                (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
            }
        }
    }

    #[test]
    fn odd_events_without_boundaries_are_infeasible() {
        let t = DistanceTable { n: 1, pair: vec![0], pair_parity: vec![false], boundary: vec![None] };
        assert!(matches!(mwpm_table(&t), Err(Error::Infeasible(1))));
        let empty = DistanceTable { n: 0, pair: vec![], pair_parity: vec![], boundary: vec![] };
        assert!(!correction_parity(&mwpm_table(&empty).unwrap()));
    }

    #[test]
    fn weights_csv_has_header_and_rows() {
        let l = Lattice::build(3).unwrap();
        let g = build_weight_graph(&l, LatticeType::Primal, &params()).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("lattice,a_cell,b_kind"));
        assert_eq!(text.lines().count(), g.edges.len() + 1);
    }
}
