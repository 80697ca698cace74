//! Signed Pauli strings and the small amount of stabilizer algebra needed to
//! derive cluster-state generators.
//!
//! Phases are tracked as a power of `i`. The single-qubit convention is
//! `Y = iXZ`, so `XZ = -iY` and `ZX = iY`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    /// Symplectic `(x, z)` bits.
    pub fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    pub fn from_bits(x: bool, z: bool) -> Pauli {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn has_x(self) -> bool {
        self.bits().0
    }

    pub fn has_z(self) -> bool {
        self.bits().1
    }

    /// Product `self * rhs` as `(i^k, P)`.
    pub fn mul(self, rhs: Pauli) -> (u8, Pauli) {
        use Pauli::*;
        match (self, rhs) {
            (I, p) | (p, I) => (0, p),
            (a, b) if a == b => (0, I),
            (X, Y) => (1, Z),
            (Y, Z) => (1, X),
            (Z, X) => (1, Y),
            (Y, X) => (3, Z),
            (Z, Y) => (3, X),
            (X, Z) => (3, Y),
            _ => unreachable!(),
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// A Pauli string `i^phase * P_0 ⊗ P_1 ⊗ ...`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliString {
    phase: u8,
    factors: Vec<Pauli>,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        PauliString { phase: 0, factors: vec![Pauli::I; n] }
    }

    pub fn new(phase: u8, factors: Vec<Pauli>) -> Self {
        PauliString { phase: phase % 4, factors }
    }

    /// A single non-identity factor on qubit `q` of an `n`-qubit register.
    pub fn single(n: usize, q: usize, p: Pauli) -> Self {
        let mut s = Self::identity(n);
        s.factors[q] = p;
        s
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    /// Exponent `k` of the global phase `i^k`.
    pub fn phase(&self) -> u8 {
        self.phase
    }

    /// `Some(+1 | -1)` when the phase is real.
    pub fn sign(&self) -> Option<i8> {
        match self.phase {
            0 => Some(1),
            2 => Some(-1),
            _ => None,
        }
    }

    pub fn factors(&self) -> &[Pauli] {
        &self.factors
    }

    pub fn get(&self, q: usize) -> Pauli {
        self.factors[q]
    }

    pub fn is_identity(&self) -> bool {
        self.factors.iter().all(|&p| p == Pauli::I)
    }

    pub fn negate(mut self) -> Self {
        self.phase = (self.phase + 2) % 4;
        self
    }

    pub fn mul(&self, rhs: &PauliString) -> Result<PauliString> {
        if self.len() != rhs.len() {
            return Err(Error::Arity { expected: self.len(), found: rhs.len() });
        }
        let mut phase = self.phase + rhs.phase;
        let factors = self
            .factors
            .iter()
            .zip(&rhs.factors)
            .map(|(&a, &b)| {
                let (k, p) = a.mul(b);
                phase += k;
                p
            })
            .collect();
        Ok(PauliString { phase: phase % 4, factors })
    }

    pub fn commutes_with(&self, rhs: &PauliString) -> bool {
        let anti = self
            .factors
            .iter()
            .zip(&rhs.factors)
            .filter(|(&a, &b)| {
                let (ax, az) = a.bits();
                let (bx, bz) = b.bits();
                (ax & bz) ^ (az & bx)
            })
            .count();
        anti % 2 == 0
    }

    /// Conjugate by a controlled-Z on qubits `a` and `b`.
    pub fn conjugate_cz(&self, a: usize, b: usize) -> PauliString {
        let n = self.len();
        // Rewrite every Y as i·X·Z, then map X_a -> X_a Z_b, X_b -> Z_a X_b.
        let mut out = PauliString { phase: self.phase, factors: vec![Pauli::I; n] };
        for (q, &p) in self.factors.iter().enumerate() {
            let (x, z) = p.bits();
            if x && z {
                out.phase = (out.phase + 1) % 4;
            }
            if x {
                let mut img = PauliString::single(n, q, Pauli::X);
                if q == a {
                    img.factors[b] = Pauli::Z;
                } else if q == b {
                    img.factors[a] = Pauli::Z;
                }
                out = out.mul(&img).expect("same length");
            }
            if z {
                out = out.mul(&PauliString::single(n, q, Pauli::Z)).expect("same length");
            }
        }
        out
    }

    /// Render with 1-based subscripts, e.g. `X1 I2 Z3`.
    pub fn to_indexed(&self) -> String {
        let body = self
            .factors
            .iter()
            .enumerate()
            .map(|(q, p)| format!("{}{}", p.symbol(), q + 1))
            .collect::<Vec<_>>()
            .join(" ");
        format!("{}{}", sign_prefix(self.phase), body)
    }

    /// Render as space-separated symbols, e.g. `X I Z`.
    pub fn to_spaced(&self) -> String {
        let body = self.factors.iter().map(|p| p.symbol().to_string()).collect::<Vec<_>>().join(" ");
        format!("{}{}", sign_prefix(self.phase), body)
    }
}

fn sign_prefix(phase: u8) -> &'static str {
    match phase {
        0 => "",
        1 => "+i ",
        2 => "- ",
        _ => "-i ",
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = match self.phase {
            0 => "+",
            1 => "+i",
            2 => "-",
            _ => "-i",
        };
        write!(f, "{sign}")?;
        for p in &self.factors {
            write!(f, "{}", p.symbol())?;
        }
        Ok(())
    }
}

/// Parses strings like `XIZ`, `-YY`, `+iXZ`, `-i Z Z`. Whitespace and `⊗` between
/// factors are ignored.
impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut rest = s.trim();
        let mut phase = 0u8;
        if let Some(r) = rest.strip_prefix('-') {
            phase = 2;
            rest = r;
        } else if let Some(r) = rest.strip_prefix('+') {
            rest = r;
        }
        if let Some(r) = rest.strip_prefix('i') {
            phase = (phase + 1) % 4;
            rest = r;
        }
        let mut factors = Vec::new();
        for c in rest.chars() {
            let p = match c {
                'I' => Pauli::I,
                'X' => Pauli::X,
                'Y' => Pauli::Y,
                'Z' => Pauli::Z,
                c if c.is_whitespace() || c == '⊗' => continue,
                other => return Err(Error::Parse(format!("unexpected character {other:?} in Pauli string"))),
            };
            factors.push(p);
        }
        if factors.is_empty() {
            return Err(Error::Parse("empty Pauli string".into()));
        }
        Ok(PauliString { phase, factors })
    }
}

/// `C_Z P C_Z` for a two-qubit string.
pub fn cz_conjugate(p: &PauliString) -> Result<PauliString> {
    if p.len() != 2 {
        return Err(Error::Arity { expected: 2, found: p.len() });
    }
    Ok(p.conjugate_cz(0, 1))
}

/// Ordered product of the given strings.
pub fn stabilizer_product(set: &[PauliString]) -> Result<PauliString> {
    let first = set.first().ok_or_else(|| Error::Parse("empty product".into()))?;
    let mut acc = PauliString::identity(first.len());
    for s in set {
        acc = acc.mul(s)?;
    }
    Ok(acc)
}

/// Generating set with real phases, one generator per qubit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StabilizerSet {
    qubit_count: usize,
    generators: Vec<PauliString>,
}

impl StabilizerSet {
    pub fn new(qubit_count: usize, generators: Vec<PauliString>) -> Result<Self> {
        for g in &generators {
            if g.len() != qubit_count {
                return Err(Error::Arity { expected: qubit_count, found: g.len() });
            }
            if g.sign().is_none() {
                return Err(Error::ImaginaryPhase(g.to_string()));
            }
        }
        Ok(StabilizerSet { qubit_count, generators })
    }

    /// `X` on every qubit: the product state `|+>^n`.
    pub fn all_plus(n: usize) -> Self {
        let generators = (0..n).map(|q| PauliString::single(n, q, Pauli::X)).collect();
        StabilizerSet { qubit_count: n, generators }
    }

    pub fn qubit_count(&self) -> usize {
        self.qubit_count
    }

    pub fn generators(&self) -> &[PauliString] {
        &self.generators
    }

    pub fn generator(&self, i: usize) -> &PauliString {
        &self.generators[i]
    }

    pub fn mutually_commute(&self) -> bool {
        self.generators
            .iter()
            .enumerate()
            .all(|(i, a)| self.generators[i + 1..].iter().all(|b| a.commutes_with(b)))
    }
}

/// Simple undirected graph whose edges are C_Z applications.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterGraph {
    qubit_count: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl ClusterGraph {
    pub fn new(qubit_count: usize) -> Self {
        ClusterGraph { qubit_count, edges: BTreeSet::new() }
    }

    pub fn from_edges(qubit_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut g = Self::new(qubit_count);
        for (a, b) in edges {
            g.add_edge(a, b)?;
        }
        Ok(g)
    }

    /// Rejects self-loops, out-of-range ids and duplicates.
    pub fn add_edge(&mut self, a: usize, b: usize) -> Result<()> {
        if a == b {
            return Err(Error::InvalidGraph(format!("self-loop on qubit {a}")));
        }
        if a >= self.qubit_count || b >= self.qubit_count {
            return Err(Error::InvalidGraph(format!("edge ({a}, {b}) outside {} qubits", self.qubit_count)));
        }
        if !self.edges.insert((a.min(b), a.max(b))) {
            return Err(Error::InvalidGraph(format!("duplicate edge ({a}, {b})")));
        }
        Ok(())
    }

    pub fn qubit_count(&self) -> usize {
        self.qubit_count
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn neighbors(&self, q: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| if a == q { Some(b) } else if b == q { Some(a) } else { None })
            .collect()
    }
}

/// `A_i = X_i ⊗ Z_{neighbours of i}`.
pub fn cluster_stabilizers(g: &ClusterGraph) -> StabilizerSet {
    let n = g.qubit_count();
    let mut generators: Vec<PauliString> = (0..n).map(|q| PauliString::single(n, q, Pauli::X)).collect();
    for (a, b) in g.edges() {
        generators[a].factors[b] = Pauli::Z;
        generators[b].factors[a] = Pauli::Z;
    }
    StabilizerSet { qubit_count: n, generators }
}

/// Conjugates every generator through the C_Z circuit, gate by gate.
pub fn conjugate_set(s: &StabilizerSet, circuit: &[(usize, usize)]) -> Result<StabilizerSet> {
    let n = s.qubit_count();
    if let Some(&(a, b)) = circuit.iter().find(|&&(a, b)| a >= n || b >= n || a == b) {
        return Err(Error::InvalidGraph(format!("gate ({a}, {b}) invalid for {n} qubits")));
    }
    let generators = s
        .generators
        .iter()
        .map(|g| circuit.iter().fold(g.clone(), |acc, &(a, b)| acc.conjugate_cz(a, b)))
        .collect();
    StabilizerSet::new(n, generators)
}

/// Five-qubit face graph: qubit 3 (1-based) joined to 1, 2, 4 and 5.
pub fn face_graph() -> ClusterGraph {
    ClusterGraph::from_edges(5, [(0, 2), (1, 2), (3, 2), (4, 2)]).expect("valid graph")
}

/// The 18-qubit single-cell graph in the 1-based labelling used by the
/// derivation tables. Face qubits are 3, 7, 10, 12, 14 and 17.
pub fn cell_graph() -> ClusterGraph {
    const EDGES: [(usize, usize); 24] = [
        (1, 3),
        (1, 17),
        (2, 3),
        (2, 10),
        (3, 4),
        (3, 5),
        (4, 14),
        (5, 7),
        (6, 7),
        (6, 10),
        (7, 8),
        (7, 9),
        (8, 14),
        (9, 12),
        (10, 11),
        (10, 16),
        (11, 12),
        (12, 13),
        (12, 15),
        (13, 14),
        (14, 18),
        (15, 17),
        (16, 17),
        (17, 18),
    ];
    ClusterGraph::from_edges(18, EDGES.iter().map(|&(a, b)| (a - 1, b - 1))).expect("valid graph")
}

/// 1-based labels of the six face qubits of [`cell_graph`].
pub const CELL_FACES: [usize; 6] = [3, 7, 10, 12, 14, 17];

/// A titled table of labelled generators.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct GeneratorTable {
    pub title: String,
    /// `(label, generator)` rows, generator rendered as spaced symbols.
    pub rows: Vec<(String, String)>,
}

impl GeneratorTable {
    fn indexed(title: &str, set: &StabilizerSet, qubits: impl IntoIterator<Item = usize>) -> Self {
        let rows = qubits.into_iter().map(|q| (format!("A_{q}"), set.generator(q - 1).to_spaced())).collect();
        GeneratorTable { title: title.into(), rows }
    }
}

/// Stabilizers of the face and cell cluster states, derived by conjugating
/// the all-X generators through each C_Z gate.
pub fn derive_cell() -> Result<Vec<GeneratorTable>> {
    let face = face_graph();
    let face_before = StabilizerSet::all_plus(5);
    let face_after = conjugate_set(&face_before, &face.edges().collect::<Vec<_>>())?;
    let cell = cell_graph();
    let cell_set = conjugate_set(&StabilizerSet::all_plus(18), &cell.edges().collect::<Vec<_>>())?;
    let subset: Vec<PauliString> = CELL_FACES.iter().map(|&q| cell_set.generator(q - 1).clone()).collect();
    let product = stabilizer_product(&subset)?;
    Ok(vec![
        GeneratorTable::indexed("face, before C_Z", &face_before, 1..=5),
        GeneratorTable::indexed("face, after C_Z", &face_after, 1..=5),
        GeneratorTable::indexed("cell generators", &cell_set, 1..=18),
        GeneratorTable::indexed("face subset", &cell_set, CELL_FACES),
        GeneratorTable { title: "face product".into(), rows: vec![("A".into(), product.to_spaced())] },
    ])
}

/// Plain-text layout: a title line, one `label | symbols` row per generator,
/// blank line between tables.
pub fn render_tables(tables: &[GeneratorTable]) -> String {
    let mut out = String::new();
    for (i, t) in tables.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&t.title);
        out.push('\n');
        for (label, row) in &t.rows {
            out.push_str(&format!("{label:<4} | {row}\n"));
        }
    }
    out
}
