//! Measurement products of cells and superstabilizers formed around lost
//! face sites.

use std::collections::VecDeque;

use serde::Serialize;

use crate::errmodel::RoundOutcome;
use crate::error::{Error, Result};
use crate::lattice::{FaceEnd, Lattice, LatticeType, Rel, Side};

/// Consecutive round outcomes kept for syndrome extraction.
#[derive(Debug, Clone, Default)]
pub struct History {
    first: u64,
    rounds: VecDeque<RoundOutcome>,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, outcome: RoundOutcome) {
        if self.rounds.is_empty() {
            self.first = outcome.round;
        } else {
            debug_assert_eq!(outcome.round, self.first + self.rounds.len() as u64, "rounds must be consecutive");
        }
        self.rounds.push_back(outcome);
    }

    pub fn first_round(&self) -> u64 {
        self.first
    }

    /// One past the last stored round.
    pub fn end_round(&self) -> u64 {
        self.first + self.rounds.len() as u64
    }

    pub fn get(&self, round: i64) -> Option<&RoundOutcome> {
        if round < self.first as i64 {
            return None;
        }
        self.rounds.get((round - self.first as i64) as usize)
    }

    /// Forget every round below `round`.
    pub fn drop_before(&mut self, round: u64) {
        while self.first < round && !self.rounds.is_empty() {
            self.rounds.pop_front();
            self.first += 1;
        }
    }

    /// Replace the rounds at and above `round` (used to undo capping).
    pub fn truncate(&mut self, round: u64) {
        let keep = round.saturating_sub(self.first) as usize;
        self.rounds.truncate(keep);
    }

    fn site(&self, round: i64, id: usize) -> Result<(bool, bool)> {
        let o = self.get(round).ok_or_else(|| Error::Domain(format!("round {round} is not in the history")))?;
        Ok((o.flips[id], o.lost[id]))
    }
}

impl Extend<RoundOutcome> for History {
    fn extend<I: IntoIterator<Item = RoundOutcome>>(&mut self, iter: I) {
        for o in iter {
            self.push(o);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct CellKey {
    pub lattice: LatticeType,
    pub round: u64,
    pub id: usize,
}

/// Flip parity over the surviving faces of one cell and whether any face is lost.
pub fn cell_parity(lattice: &Lattice, history: &History, cell: CellKey) -> Result<(bool, bool)> {
    let faces = lattice.cell_faces(cell.lattice, cell.id)?;
    let mut parity = false;
    let mut any_lost = false;
    for f in faces {
        let (flip, lost) = history.site(cell.round as i64 + f.dr as i64, f.id)?;
        parity ^= flip && !lost;
        any_lost |= lost;
    }
    Ok((parity, any_lost))
}

/// `+1` or `-1` for a cell whose faces all survived.
pub fn measurement_product(lattice: &Lattice, history: &History, cell: CellKey) -> Result<i8> {
    let (parity, lost) = cell_parity(lattice, history, cell)?;
    if lost {
        return Err(Error::MustMerge(cell.id));
    }
    Ok(if parity { -1 } else { 1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundaryTouch {
    Low,
    High,
    Both,
}

fn touch(reach: [bool; 2]) -> Option<BoundaryTouch> {
    match reach {
        [false, false] => None,
        [true, false] => Some(BoundaryTouch::Low),
        [false, true] => Some(BoundaryTouch::High),
        [true, true] => Some(BoundaryTouch::Both),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Superstabilizer {
    pub lattice: LatticeType,
    pub members: Vec<CellKey>,
    /// Surviving face sites as `(round, site)`.
    pub surviving_faces: Vec<(u64, usize)>,
    pub product: i8,
    /// Boundaries merged in through a lost boundary face.
    pub touches_boundary: Option<BoundaryTouch>,
    pub spanning: bool,
}

/// Aggregate data of one connected component of cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Component {
    pub parity: bool,
    /// Merged with the low / high boundary through a lost boundary face.
    pub reach: [bool; 2],
    /// Contains a cell adjacent to the low / high boundary.
    pub adjacent: [bool; 2],
    pub min_round: u64,
    pub max_round: u64,
    pub size: u32,
    /// A lost face links it to a cell below the window.
    pub open_below: bool,
}

impl Component {
    /// Bordering both boundaries once merged: no surviving chain can separate them.
    pub fn spanning(&self) -> bool {
        (self.reach[0] && self.adjacent[1]) || (self.reach[1] && self.adjacent[0])
    }

    /// `None` for an ordinary node, otherwise the boundary it has merged into.
    pub fn boundary(&self) -> Option<Side> {
        if self.reach[1] {
            Some(Side::High)
        } else if self.reach[0] {
            Some(Side::Low)
        } else {
            None
        }
    }
}

/// Cells of one lattice type in rounds `lo..=hi` grouped over lost faces.
#[derive(Debug, Clone)]
pub struct Merged {
    pub lattice: LatticeType,
    pub lo: u64,
    pub hi: u64,
    cells_per_round: usize,
    comp_of: Vec<u32>,
    pub components: Vec<Component>,
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let p = parent[x as usize];
        parent[x as usize] = parent[p as usize];
        x = p;
    }
    x
}

fn union(parent: &mut [u32], a: u32, b: u32) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        // Smaller index becomes the root so the result is order independent.
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi as usize] = lo;
    }
}

impl Merged {
    pub fn index(&self, round: u64, id: usize) -> Option<usize> {
        (round >= self.lo && round <= self.hi && id < self.cells_per_round).then(|| (round - self.lo) as usize * self.cells_per_round + id)
    }

    pub fn component_of(&self, round: u64, id: usize) -> Option<usize> {
        self.index(round, id).map(|i| self.comp_of[i] as usize)
    }

    pub fn cell_count(&self) -> usize {
        self.comp_of.len()
    }

    pub fn cell_at(&self, index: usize) -> CellKey {
        CellKey { lattice: self.lattice, round: self.lo + (index / self.cells_per_round) as u64, id: index % self.cells_per_round }
    }

    pub fn any_spanning(&self) -> bool {
        self.components.iter().any(Component::spanning)
    }

    /// Components with product `-1` that have not merged into a boundary.
    pub fn detection_events(&self) -> DetectionEventSet {
        let events = self
            .components
            .iter()
            .enumerate()
            .filter(|(_, c)| c.parity && c.boundary().is_none())
            .map(|(i, c)| (i, c.min_round))
            .collect();
        DetectionEventSet { lattice: self.lattice, events }
    }

    /// Full description of every component, including surviving faces.
    pub fn superstabilizers(&self, lattice: &Lattice, history: &History) -> Result<Vec<Superstabilizer>> {
        let mut members: Vec<Vec<CellKey>> = vec![Vec::new(); self.components.len()];
        for i in 0..self.comp_of.len() {
            members[self.comp_of[i] as usize].push(self.cell_at(i));
        }
        let mut out = Vec::with_capacity(members.len());
        for (c, cells) in self.components.iter().zip(members) {
            let mut faces: Vec<(u64, usize)> = Vec::new();
            for cell in &cells {
                for f in lattice.cell_faces(self.lattice, cell.id)? {
                    let r = cell.round as i64 + f.dr as i64;
                    if !history.site(r, f.id)?.1 {
                        faces.push((r as u64, f.id));
                    }
                }
            }
            faces.sort_unstable();
            // A surviving face shared by two members is interior to the merge.
            let mut surviving = Vec::with_capacity(faces.len());
            let mut i = 0;
            while i < faces.len() {
                if i + 1 < faces.len() && faces[i + 1] == faces[i] {
                    i += 2;
                } else {
                    surviving.push(faces[i]);
                    i += 1;
                }
            }
            out.push(Superstabilizer {
                lattice: self.lattice,
                members: cells,
                surviving_faces: surviving,
                product: if c.parity { -1 } else { 1 },
                touches_boundary: touch(c.reach),
                spanning: c.spanning(),
            });
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DetectionEventSet {
    pub lattice: LatticeType,
    /// `(component index, earliest round)` of every `-1` product.
    pub events: Vec<(usize, u64)>,
}

/// Lost face sites of type `lt` that belong to cells in `lo..=hi`.
pub fn lost_faces(lattice: &Lattice, history: &History, lt: LatticeType, lo: u64, hi: u64) -> Vec<(u64, usize)> {
    let mut out = Vec::new();
    for r in lo.saturating_sub(1)..=hi + 1 {
        let Some(o) = history.get(r as i64) else { continue };
        for (s, &lost) in o.lost.iter().enumerate() {
            if lost && lattice.face_of(s) == lt {
                out.push((r, s));
            }
        }
    }
    out
}

/// Group cells of type `lt` in rounds `lo..=hi` over the lost faces in history.
pub fn merge_lost(lattice: &Lattice, history: &History, lt: LatticeType, lo: u64, hi: u64) -> Result<Merged> {
    let lost = lost_faces(lattice, history, lt, lo, hi);
    merge_lost_sites(lattice, history, lt, lo, hi, &lost)
}

/// As [`merge_lost`], processing the given lost sites in the given order.
pub fn merge_lost_sites(
    lattice: &Lattice,
    history: &History,
    lt: LatticeType,
    lo: u64,
    hi: u64,
    lost: &[(u64, usize)],
) -> Result<Merged> {
    if hi < lo {
        return Err(Error::Domain(format!("empty round range {lo}..={hi}")));
    }
    let per = lattice.cells(lt).len();
    let n = per * (hi - lo + 1) as usize;
    let mut parent: Vec<u32> = (0..n as u32).collect();
    let mut reach = vec![[false; 2]; n];
    let mut open_below = vec![false; n];
    let idx = |r: i64, id: usize| -> Option<usize> {
        (r >= lo as i64 && r <= hi as i64).then(|| (r - lo as i64) as usize * per + id)
    };
    for &(r, s) in lost {
        if lattice.face_of(s) != lt {
            continue;
        }
        let ends = lattice.face_ends[s];
        let cell_of = |e: FaceEnd| match e {
            FaceEnd::Cell(Rel { dr, id }) => Some((r as i64 + dr as i64, id)),
            FaceEnd::Boundary(_) => None,
        };
        let inside: Vec<usize> = ends.iter().filter_map(|&e| cell_of(e)).filter_map(|(cr, id)| idx(cr, id)).collect();
        let Some(&first) = inside.first() else { continue };
        for &e in &ends {
            match e {
                FaceEnd::Boundary(side) => reach[first][side as usize] = true,
                FaceEnd::Cell(_) => {
                    let (cr, id) = cell_of(e).expect("cell end");
                    match idx(cr, id) {
                        Some(j) => union(&mut parent, first as u32, j as u32),
                        None if cr < lo as i64 => open_below[first] = true,
                        None => {}
                    }
                }
            }
        }
    }
    let cells = lattice.cells(lt);
    let mut comp_of = vec![u32::MAX; n];
    let mut root_comp = vec![u32::MAX; n];
    let mut components: Vec<Component> = Vec::new();
    for i in 0..n {
        let root = find(&mut parent, i as u32) as usize;
        if root_comp[root] == u32::MAX {
            root_comp[root] = components.len() as u32;
            let round = lo + (i / per) as u64;
            components.push(Component {
                parity: false,
                reach: [false; 2],
                adjacent: [false; 2],
                min_round: round,
                max_round: round,
                size: 0,
                open_below: false,
            });
        }
        let c = root_comp[root];
        comp_of[i] = c;
        let round = lo + (i / per) as u64;
        let cell = &cells[i % per];
        let (parity, _) = cell_parity(lattice, history, CellKey { lattice: lt, round, id: cell.id })?;
        let comp = &mut components[c as usize];
        comp.parity ^= parity;
        comp.reach[0] |= reach[i][0];
        comp.reach[1] |= reach[i][1];
        if let Some(side) = cell.boundary {
            comp.adjacent[side as usize] = true;
        }
        comp.min_round = comp.min_round.min(round);
        comp.max_round = comp.max_round.max(round);
        comp.size += 1;
        comp.open_below |= open_below[i];
    }
    Ok(Merged { lattice: lt, lo, hi, cells_per_round: per, comp_of, components })
}

/// Per-round JSON description of the non-trivial superstabilizers.
pub fn dump_json(lattice: &Lattice, history: &History, merged: &Merged) -> Result<serde_json::Value> {
    let supers = merged.superstabilizers(lattice, history)?;
    let mut rounds: Vec<serde_json::Value> = Vec::new();
    for r in merged.lo..=merged.hi {
        let here: Vec<&Superstabilizer> =
            supers.iter().filter(|s| s.members.len() > 1 || s.touches_boundary.is_some()).filter(|s| s.members[0].round == r).collect();
        rounds.push(serde_json::json!({ "round": r, "superstabilizers": here }));
    }
    Ok(serde_json::json!({ "lattice": merged.lattice, "rounds": rounds }))
}
