//! Distance-`d` simulation region of the topological cluster state.
//!
//! Coordinates follow the doubled unit-cell convention: a site `(x, y, t)` is
//! a qubit when one or two of its coordinates are odd. Sites with two odd
//! coordinates are faces of primal cells (centres at all-odd coordinates);
//! sites with one odd coordinate are faces of dual cells (centres at all-even
//! coordinates). C_Z gates join sites at unit distance.
//!
//! The region is `x ∈ [1, 2d-1]`, `y ∈ [0, 2d-2]` and unbounded in `t`. Primal
//! boundaries sit at low and high `y`, dual boundaries at low and high `x`.
//! One round of the two-layer schedule covers slices `t = 2r` (layer 0) and
//! `t = 2r + 1` (layer 1); every physical position is initialized, entangled
//! with up to four neighbours and measured once per round.

use std::collections::{HashMap, VecDeque};

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum LatticeType {
    Primal,
    Dual,
}

impl LatticeType {
    pub const BOTH: [LatticeType; 2] = [LatticeType::Primal, LatticeType::Dual];

    pub fn index(self) -> usize {
        match self {
            LatticeType::Primal => 0,
            LatticeType::Dual => 1,
        }
    }

    pub fn other(self) -> LatticeType {
        match self {
            LatticeType::Primal => LatticeType::Dual,
            LatticeType::Dual => LatticeType::Primal,
        }
    }
}

/// Which of the two same-type boundaries. For the primal lattice `Low` is the
/// bottom (`y = 0`), for the dual lattice it is the left (`x = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Side {
    Low,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SiteKind {
    /// All four partners lie in the same slice.
    Hub,
    /// Two in-slice partners plus one partner in each adjacent slice.
    Spoke,
}

#[derive(Debug, Clone, Serialize)]
pub struct QubitSite {
    pub id: usize,
    pub x: i32,
    pub y: i32,
    /// Parity of the time coordinate within a round.
    pub layer: u8,
    /// The lattice this site is a face of; it is an edge of the other one.
    pub face_of: LatticeType,
    pub kind: SiteKind,
}

/// A reference to a site or cell in a round relative to some base round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Rel {
    pub dr: i32,
    pub id: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum FaceEnd {
    Cell(Rel),
    Boundary(Side),
}

#[derive(Debug, Clone, Serialize)]
pub struct Cell {
    pub id: usize,
    pub lattice: LatticeType,
    pub center: (i32, i32, u8),
    /// Face sites relative to the cell's round.
    pub faces: Vec<Rel>,
    /// Set when one of the faces is shared with a boundary.
    pub boundary: Option<Side>,
}

impl Cell {
    pub fn is_complete(&self) -> bool {
        self.faces.len() == 6
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GateSlot {
    Init,
    /// C_Z with `partner`, relative to this site's round.
    Cz { partner: Rel, step: u32 },
    /// A C_Z position whose partner lies outside the region.
    Idle,
    Measure,
}

/// The six gate positions of a site within its lifetime. Loss may strike
/// after each of the first five and during the measurement.
pub const LOSS_SLOTS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Op {
    Init { site: Rel },
    Cz { a: Rel, slot_a: u8, b: Rel, slot_b: u8 },
    Measure { site: Rel },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ScheduledOp {
    /// Global timestep: 16 per round, 8 per slice.
    pub step: u64,
    pub op: Op,
}

pub const STEPS_PER_ROUND: u64 = 16;

#[derive(Debug, Clone, Serialize)]
pub struct Lattice {
    pub d: usize,
    pub x_range: (i32, i32),
    pub y_range: (i32, i32),
    pub sites: Vec<QubitSite>,
    /// Cell templates, indexed by `LatticeType::index()`.
    pub cells: [Vec<Cell>; 2],
    /// For each site, the two cells (or boundaries) it is a face of, relative
    /// to the site's round.
    pub face_ends: Vec<[FaceEnd; 2]>,
    /// Gate positions of each site over its lifetime.
    pub gates: Vec<[GateSlot; LOSS_SLOTS]>,
    /// Ordered operations executed while processing one round, relative to
    /// that round. Operations with `dr = -1` finish the previous round's
    /// layer-1 spokes.
    pub round_ops: Vec<ScheduledOp>,
    /// Primal faces on the low boundary: the correlation cut.
    pub correlation_cut: Vec<usize>,
    #[serde(skip)]
    index: HashMap<(i32, i32, u8), usize>,
}

fn odd(v: i32) -> bool {
    v.rem_euclid(2) == 1
}

fn odd_count(x: i32, y: i32, layer: u8) -> usize {
    odd(x) as usize + odd(y) as usize + layer as usize
}

// In-slice C_Z order seen from a hub: +x, +y, -x, -y. No two opposite
// partners come last, so an X fault on a hub never splits into two chains.
const HUB_DIRS: [(i32, i32); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];
const STEP_INIT: u32 = 0;
const STEP_TIME_CZ: u32 = 1;
const STEP_SPOKE_MEASURE: u32 = 2;
const STEP_FIRST_PLANE: u32 = 3;
const STEP_HUB_MEASURE: u32 = 7;

impl Lattice {
    pub fn build(d: usize) -> Result<Self> {
        if d < 3 || d.is_multiple_of(2) {
            return Err(Error::InvalidDistance(d));
        }
        let di = d as i32;
        let x_range = (1, 2 * di - 1);
        let y_range = (0, 2 * di - 2);
        let mut sites = Vec::new();
        let mut index = HashMap::new();
        for layer in 0..2u8 {
            for y in y_range.0..=y_range.1 {
                for x in x_range.0..=x_range.1 {
                    let n = odd_count(x, y, layer);
                    if n == 0 || n == 3 {
                        continue;
                    }
                    let face_of = if n == 2 { LatticeType::Primal } else { LatticeType::Dual };
                    // Hubs have both in-plane coordinates of equal parity.
                    let kind = if odd(x) == odd(y) { SiteKind::Hub } else { SiteKind::Spoke };
                    let id = sites.len();
                    index.insert((x, y, layer), id);
                    sites.push(QubitSite { id, x, y, layer, face_of, kind });
                }
            }
        }
        let mut lat = Lattice {
            d,
            x_range,
            y_range,
            sites,
            cells: [Vec::new(), Vec::new()],
            face_ends: Vec::new(),
            gates: Vec::new(),
            round_ops: Vec::new(),
            correlation_cut: Vec::new(),
            index,
        };
        lat.build_cells();
        lat.build_face_ends();
        lat.build_schedule();
        lat.correlation_cut = (0..lat.sites.len())
            .filter(|&s| lat.face_of(s) == LatticeType::Primal && lat.face_ends[s].contains(&FaceEnd::Boundary(Side::Low)))
            .collect();
        Ok(lat)
    }

    pub fn distance(&self) -> usize {
        self.d
    }

    pub fn site_count(&self) -> usize {
        self.sites.len()
    }

    pub fn site_at(&self, x: i32, y: i32, layer: u8) -> Option<usize> {
        self.index.get(&(x, y, layer)).copied()
    }

    pub fn face_of(&self, site: usize) -> LatticeType {
        self.sites[site].face_of
    }

    pub fn cells(&self, lt: LatticeType) -> &[Cell] {
        &self.cells[lt.index()]
    }

    pub fn cell(&self, lt: LatticeType, id: usize) -> Result<&Cell> {
        self.cells[lt.index()].get(id).ok_or(Error::UnknownId { kind: "cell", id })
    }

    /// Face sites of a cell, relative to the cell's round.
    pub fn cell_faces(&self, lt: LatticeType, id: usize) -> Result<&[Rel]> {
        Ok(&self.cell(lt, id)?.faces)
    }

    pub fn cell_at(&self, lt: LatticeType, x: i32, y: i32) -> Option<usize> {
        self.cells[lt.index()].iter().position(|c| c.center.0 == x && c.center.1 == y)
    }

    /// Position of a slice `t` in (round offset, layer) form.
    fn slice_to_round(t: i32) -> (i32, u8) {
        (t.div_euclid(2), t.rem_euclid(2) as u8)
    }

    fn build_cells(&mut self) {
        for lt in LatticeType::BOTH {
            // Primal centres sit at odd t (layer 1), dual centres at even t.
            let (cparity, ct) = match lt {
                LatticeType::Primal => (1, 1),
                LatticeType::Dual => (0, 0),
            };
            let mut cells = Vec::new();
            for cy in self.y_range.0..=self.y_range.1 {
                for cx in self.x_range.0..=self.x_range.1 {
                    if cx.rem_euclid(2) != cparity || cy.rem_euclid(2) != cparity {
                        continue;
                    }
                    let mut faces = Vec::new();
                    let offsets = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, -1), (0, 0, 1)];
                    for (dx, dy, dt) in offsets {
                        let (dr, layer) = Self::slice_to_round(ct + dt);
                        if let Some(&id) = self.index.get(&(cx + dx, cy + dy, layer)) {
                            faces.push(Rel { dr, id });
                        }
                    }
                    let id = cells.len();
                    cells.push(Cell { id, lattice: lt, center: (cx, cy, ct as u8), faces, boundary: None });
                }
            }
            self.cells[lt.index()] = cells;
        }
    }

    fn build_face_ends(&mut self) {
        let mut ends = Vec::with_capacity(self.sites.len());
        for s in &self.sites {
            let lt = s.face_of;
            let t = s.layer as i32;
            // A face joins the two cells along its single even axis.
            let axis = if !odd(s.x) {
                (1, 0, 0)
            } else if !odd(s.y) {
                (0, 1, 0)
            } else {
                (0, 0, 1)
            };
            let axis = if lt == LatticeType::Dual {
                // Dual faces have one odd coordinate; cells lie along it.
                if odd(s.x) {
                    (1, 0, 0)
                } else if odd(s.y) {
                    (0, 1, 0)
                } else {
                    (0, 0, 1)
                }
            } else {
                axis
            };
            let mut pair = [FaceEnd::Boundary(Side::Low), FaceEnd::Boundary(Side::High)];
            for (k, sign) in [-1, 1].into_iter().enumerate() {
                let (cx, cy, ct) = (s.x + sign * axis.0, s.y + sign * axis.1, t + sign * axis.2);
                let (dr, _) = Self::slice_to_round(ct);
                pair[k] = match self.cell_at(lt, cx, cy) {
                    Some(id) => FaceEnd::Cell(Rel { dr, id }),
                    None => FaceEnd::Boundary(if sign < 0 { Side::Low } else { Side::High }),
                };
            }
            ends.push(pair);
        }
        for (s, pair) in ends.iter().enumerate() {
            let lt = self.sites[s].face_of;
            match *pair {
                [FaceEnd::Cell(c), FaceEnd::Boundary(side)] | [FaceEnd::Boundary(side), FaceEnd::Cell(c)] => {
                    self.cells[lt.index()][c.id].boundary = Some(side);
                }
                _ => {}
            }
        }
        self.face_ends = ends;
    }

    fn build_schedule(&mut self) {
        let n = self.sites.len();
        let mut gates = vec![[GateSlot::Init, GateSlot::Idle, GateSlot::Idle, GateSlot::Idle, GateSlot::Idle, GateSlot::Measure]; n];
        let mut plane_edges: Vec<(u32, usize, usize, u8, u8)> = Vec::new();
        for hub in self.sites.iter().filter(|s| s.kind == SiteKind::Hub) {
            for (k, (dx, dy)) in HUB_DIRS.iter().enumerate() {
                let Some(spoke) = self.site_at(hub.x + dx, hub.y + dy, hub.layer) else { continue };
                let step = STEP_FIRST_PLANE + k as u32;
                gates[hub.id][k + 1] = GateSlot::Cz { partner: Rel { dr: 0, id: spoke }, step: step + 8 * hub.layer as u32 };
                plane_edges.push((step, hub.id, spoke, k as u8 + 1, 0));
            }
        }
        // Spokes: down (slot 1), the two in-plane gates in step order (slots 2, 3), up (slot 4).
        let mut spoke_plane: HashMap<usize, Vec<(u32, usize)>> = HashMap::new();
        for &(step, hub, spoke, _, _) in &plane_edges {
            spoke_plane.entry(spoke).or_default().push((step, hub));
        }
        for e in plane_edges.iter_mut() {
            let list = spoke_plane.get_mut(&e.2).expect("spoke listed");
            list.sort();
            let pos = list.iter().position(|&(st, h)| st == e.0 && h == e.1).expect("present");
            e.4 = 2 + pos as u8;
        }
        for &(step, hub, spoke, _, slot) in &plane_edges {
            let step = step + 8 * self.sites[spoke].layer as u32;
            gates[spoke][slot as usize] = GateSlot::Cz { partner: Rel { dr: 0, id: hub }, step };
        }
        for s in self.sites.iter().filter(|s| s.kind == SiteKind::Spoke) {
            let other = self.site_at(s.x, s.y, 1 - s.layer).expect("spoke positions exist in both layers");
            // Layer-0 spokes meet layer-1 of the same round above and of the
            // previous round below.
            let (down, up) = if s.layer == 0 { (Rel { dr: -1, id: other }, Rel { dr: 0, id: other }) } else { (Rel { dr: 0, id: other }, Rel { dr: 1, id: other }) };
            let down_step = STEP_TIME_CZ + 8 * s.layer as u32;
            gates[s.id][1] = GateSlot::Cz { partner: down, step: down_step };
            gates[s.id][4] = GateSlot::Cz { partner: up, step: down_step + 8 };
        }
        self.gates = gates;

        let mut ops = Vec::new();
        for layer in 0..2u8 {
            let base = 8 * layer as u64;
            let in_layer: Vec<usize> = self.sites.iter().filter(|s| s.layer == layer).map(|s| s.id).collect();
            for &s in &in_layer {
                ops.push(ScheduledOp { step: base + STEP_INIT as u64, op: Op::Init { site: Rel { dr: 0, id: s } } });
            }
            // The previous slice's spokes are one layer down.
            let prev_dr = if layer == 0 { -1 } else { 0 };
            let spokes: Vec<usize> = in_layer.iter().copied().filter(|&s| self.sites[s].kind == SiteKind::Spoke).collect();
            for &s in &spokes {
                let below = self.site_at(self.sites[s].x, self.sites[s].y, 1 - layer).expect("spoke pair");
                ops.push(ScheduledOp {
                    step: base + STEP_TIME_CZ as u64,
                    op: Op::Cz { a: Rel { dr: prev_dr, id: below }, slot_a: 4, b: Rel { dr: 0, id: s }, slot_b: 1 },
                });
            }
            for &s in &spokes {
                let below = self.site_at(self.sites[s].x, self.sites[s].y, 1 - layer).expect("spoke pair");
                ops.push(ScheduledOp { step: base + STEP_SPOKE_MEASURE as u64, op: Op::Measure { site: Rel { dr: prev_dr, id: below } } });
            }
            let mut plane: Vec<_> = plane_edges.iter().filter(|e| self.sites[e.1].layer == layer).collect();
            plane.sort_by_key(|e| (e.0, e.1, e.2));
            for &&(step, hub, spoke, slot_h, slot_s) in &plane {
                ops.push(ScheduledOp {
                    step: base + step as u64,
                    op: Op::Cz { a: Rel { dr: 0, id: hub }, slot_a: slot_h, b: Rel { dr: 0, id: spoke }, slot_b: slot_s },
                });
            }
            for &s in in_layer.iter().filter(|&&s| self.sites[s].kind == SiteKind::Hub) {
                ops.push(ScheduledOp { step: base + STEP_HUB_MEASURE as u64, op: Op::Measure { site: Rel { dr: 0, id: s } } });
            }
        }
        self.round_ops = ops;
    }

    /// Operations executed while processing round `r`, with absolute steps and
    /// absolute rounds encoded in each `Rel::dr`. Round 0 has nothing below it,
    /// so its time-like gates toward round -1 are omitted.
    pub fn schedule_round(&self, r: u64) -> Vec<ScheduledOp> {
        let base = r * STEPS_PER_ROUND;
        let shift = |rel: Rel| Rel { dr: rel.dr + r as i32, id: rel.id };
        self.round_ops
            .iter()
            .filter(|op| r > 0 || !op_touches_previous(&op.op))
            .map(|op| ScheduledOp {
                step: base + op.step,
                op: match op.op {
                    Op::Init { site } => Op::Init { site: shift(site) },
                    Op::Measure { site } => Op::Measure { site: shift(site) },
                    Op::Cz { a, slot_a, b, slot_b } => Op::Cz { a: shift(a), slot_a, b: shift(b), slot_b },
                },
            })
            .collect()
    }

    /// Shortest face chain joining the two same-type boundaries, counted in
    /// face sites, within a single slab of cells (space-like chains only).
    pub fn min_boundary_chain(&self, lt: LatticeType) -> usize {
        // Nodes: cells of round 0 plus two boundary nodes. Only faces whose
        // two ends both lie in round 0 (or a boundary) are used.
        let cells = self.cells(lt);
        let low = cells.len();
        let high = low + 1;
        let mut adj = vec![Vec::new(); cells.len() + 2];
        for (s, ends) in self.face_ends.iter().enumerate() {
            if self.face_of(s) != lt {
                continue;
            }
            let node = |e: FaceEnd| match e {
                FaceEnd::Cell(c) if c.dr == 0 => Some(c.id),
                FaceEnd::Cell(_) => None,
                FaceEnd::Boundary(Side::Low) => Some(low),
                FaceEnd::Boundary(Side::High) => Some(high),
            };
            if let (Some(a), Some(b)) = (node(ends[0]), node(ends[1])) {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        let mut dist = vec![usize::MAX; adj.len()];
        let mut queue = VecDeque::from([low]);
        dist[low] = 0;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist[high]
    }

    /// Cells of type `lt` adjacent to the `side` boundary.
    pub fn boundary_cells(&self, lt: LatticeType, side: Side) -> Vec<usize> {
        self.cells(lt).iter().filter(|c| c.boundary == Some(side)).map(|c| c.id).collect()
    }
}

pub(crate) fn op_touches_previous(op: &Op) -> bool {
    match *op {
        Op::Init { site } | Op::Measure { site } => site.dr < 0,
        Op::Cz { a, b, .. } => a.dr < 0 || b.dr < 0,
    }
}

/// `⌊(d + 1) / 2⌋`, the fewest faults that can be mis-matched into a logical error.
pub fn effective_distance(chain: usize) -> usize {
    chain.div_ceil(2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_distance() {
        for d in [0, 1, 2, 4, 6] {
            assert!(matches!(Lattice::build(d), Err(Error::InvalidDistance(_))));
        }
    }

    #[test]
    fn chain_lengths_match_distance() {
        for d in [3, 5, 7, 9] {
            let lat = Lattice::build(d).unwrap();
            assert_eq!(lat.min_boundary_chain(LatticeType::Primal), d);
            assert_eq!(lat.min_boundary_chain(LatticeType::Dual), d);
            assert_eq!(effective_distance(lat.min_boundary_chain(LatticeType::Primal)), d.div_ceil(2));
        }
    }

    #[test]
    fn two_complete_dual_cells_per_row_at_d3() {
        let lat = Lattice::build(3).unwrap();
        let row: Vec<_> = lat.cells(LatticeType::Dual).iter().filter(|c| c.center.1 == 2 && c.is_complete()).collect();
        assert_eq!(row.len(), 2);
    }

    #[test]
    fn sharing_degrees() {
        let lat = Lattice::build(5).unwrap();
        for lt in LatticeType::BOTH {
            // Count, over a 3-round window, how many same-type cells contain each
            // face site and each edge site of round 1.
            let mut face_count: HashMap<usize, usize> = HashMap::new();
            for r in 0..3 {
                for c in lat.cells(lt) {
                    for f in &c.faces {
                        if f.dr + r == 1 {
                            *face_count.entry(f.id).or_default() += 1;
                        }
                    }
                }
            }
            for s in lat.sites.iter().filter(|s| s.face_of == lt) {
                let interior = lat.face_ends[s.id].iter().all(|e| matches!(e, FaceEnd::Cell(_)));
                let expect = if interior { 2 } else { 1 };
                assert_eq!(face_count.get(&s.id).copied().unwrap_or(0), expect, "{lt:?} site {:?}", s);
            }
            // An edge site of `lt` touches the cells containing two of its
            // C_Z partners as faces; interior edges touch four.
            for s in lat.sites.iter().filter(|s| s.face_of == lt.other()) {
                let partners: Vec<Rel> = lat.gates[s.id]
                    .iter()
                    .filter_map(|g| match g {
                        GateSlot::Cz { partner, .. } => Some(Rel { dr: partner.dr + 1, id: partner.id }),
                        _ => None,
                    })
                    .collect();
                let mut touching = 0;
                for r in 0..4 {
                    for c in lat.cells(lt) {
                        let hits = c.faces.iter().filter(|f| partners.contains(&Rel { dr: f.dr + r, id: f.id })).count();
                        if hits >= 2 {
                            touching += 1;
                        }
                    }
                }
                if partners.len() == 4 && partners.iter().all(|p| lat.face_ends[p.id].iter().all(|e| matches!(e, FaceEnd::Cell(_)))) {
                    assert_eq!(touching, 4, "{lt:?} edge site {:?}", s);
                }
            }
        }
    }

    #[test]
    fn interior_cells_have_six_faces_and_fig5_union() {
        let lat = Lattice::build(5).unwrap();
        let p = LatticeType::Primal;
        let face = lat.site_at(4, 3, 1).unwrap();
        let ends = lat.face_ends[face];
        let (FaceEnd::Cell(a), FaceEnd::Cell(b)) = (ends[0], ends[1]) else { panic!("interior face") };
        let fa: Vec<Rel> = lat.cell_faces(p, a.id).unwrap().iter().map(|f| Rel { dr: f.dr + a.dr, id: f.id }).collect();
        let fb: Vec<Rel> = lat.cell_faces(p, b.id).unwrap().iter().map(|f| Rel { dr: f.dr + b.dr, id: f.id }).collect();
        assert_eq!(fa.len(), 6);
        assert_eq!(fb.len(), 6);
        let shared: Vec<_> = fa.iter().filter(|f| fb.contains(f)).collect();
        assert_eq!(shared, vec![&Rel { dr: 0, id: face }]);
        let mut union = fa.clone();
        union.extend(fb.iter().filter(|f| !fa.contains(f)));
        assert_eq!(union.len(), 11);
        assert!(lat.cell_faces(p, 10_000).is_err());
    }

    #[test]
    fn schedule_counts() {
        let lat = Lattice::build(5).unwrap();
        let ops = lat.schedule_round(3);
        let mut init = vec![0; lat.site_count()];
        let mut cz = vec![0; lat.site_count()];
        let mut meas = vec![0; lat.site_count()];
        let mut pair_steps: HashMap<(Rel, Rel), Vec<u64>> = HashMap::new();
        for op in &ops {
            match op.op {
                Op::Init { site } => init[site.id] += 1,
                Op::Measure { site } => meas[site.id] += 1,
                Op::Cz { a, b, .. } => {
                    cz[a.id] += 1;
                    cz[b.id] += 1;
                    pair_steps.entry((a.min(b), a.max(b))).or_default().push(op.step);
                }
            }
        }
        for s in &lat.sites {
            assert_eq!(init[s.id], 1);
            assert_eq!(meas[s.id], 1);
            let full = lat.gates[s.id].iter().filter(|g| matches!(g, GateSlot::Cz { .. })).count();
            assert_eq!(cz[s.id], full);
            assert_eq!(lat.gates[s.id].len(), LOSS_SLOTS);
        }
        assert!(pair_steps.values().all(|v| v.len() == 1));
        // Interior sites perform all four gates.
        let x = lat.site_at(4, 4, 1).unwrap();
        assert_eq!(cz[x], 4);
    }

    #[test]
    fn per_site_gate_order_is_monotone() {
        let lat = Lattice::build(3).unwrap();
        for (s, g) in lat.gates.iter().enumerate() {
            let layer = lat.sites[s].layer as i64;
            let steps: Vec<i64> = g
                .iter()
                .filter_map(|slot| match slot {
                    GateSlot::Cz { step, .. } => Some(*step as i64),
                    _ => None,
                })
                .collect();
            assert!(steps.windows(2).all(|w| w[0] < w[1]), "site {s} layer {layer}: {steps:?}");
        }
    }

    #[test]
    fn offset_map_is_isomorphism() {
        let lat = Lattice::build(5).unwrap();
        // (x, y, t) -> (y + 1, x - 1, t + 1) maps primal faces to dual faces.
        for s in lat.sites.iter().filter(|s| s.face_of == LatticeType::Primal) {
            let t = s.layer as i32 + 1;
            let img = lat.site_at(s.y + 1, s.x - 1, t.rem_euclid(2) as u8).expect("image exists");
            assert_eq!(lat.face_of(img), LatticeType::Dual);
        }
        assert_eq!(lat.cells(LatticeType::Primal).len(), lat.cells(LatticeType::Dual).len());
    }
}
