//! Nets: finite port graphs built from typed cells, wires, and labelled
//! free ports.
//!
//! A port may appear at most twice across cells and wires, and every
//! port appears in at least one wire. Ports occurring exactly once are
//! free and carry a distinct label each. Ports occurring in two wires
//! are plain connectors; [`LinkNet`] collapses connector chains into
//! direct links for the rule engines.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

pub mod compose;
pub mod iso;
pub mod parse;
pub mod vc;

/// Opaque port identifier, unique within one net.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct PortId(pub u32);

impl fmt::Display for PortId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Free-port location label.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct Label(pub String);

impl Label {
    pub fn new(s: impl Into<String>) -> Self {
        Label(s.into())
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Rule set selector: `Core` is the three-kind system, `Extension`
/// additionally enables the erasure rules and `delta1` cells.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Mode {
    Core,
    Extension,
}

/// Cell kinds with their port discipline.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Gamma,
    Delta2,
    Epsilon,
    /// Coarity-1 duplicator produced when a `delta2` loses one of its
    /// principal ports; only legal in extension mode.
    Delta1,
}

impl CellKind {
    pub fn arity(self) -> usize {
        match self {
            CellKind::Gamma => 2,
            CellKind::Delta2 => 4,
            CellKind::Epsilon => 0,
            CellKind::Delta1 => 2,
        }
    }

    pub fn coarity(self) -> usize {
        match self {
            CellKind::Gamma => 1,
            CellKind::Delta2 => 2,
            CellKind::Epsilon => 1,
            CellKind::Delta1 => 1,
        }
    }

    /// Duplicator kinds own numbered aux pairs, one per principal port.
    pub fn is_delta(self) -> bool {
        matches!(self, CellKind::Delta2 | CellKind::Delta1)
    }

    pub fn name(self) -> &'static str {
        match self {
            CellKind::Gamma => "gamma",
            CellKind::Delta2 => "delta2",
            CellKind::Epsilon => "epsilon",
            CellKind::Delta1 => "delta1",
        }
    }
}

/// Index of a cell in its net. Stable only within one `Net` value.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct CellId(pub u32);

/// One port position on a cell: `Prin(k)` is the k-th principal port,
/// `Aux(j)` the j-th auxiliary port. For duplicators, aux ports `2k`
/// and `2k+1` form the pair associated with principal port `k`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub enum PortSel {
    Prin(u8),
    Aux(u8),
}

impl PortSel {
    pub fn display(self) -> String {
        match self {
            PortSel::Prin(k) => format!("p{}", k + 1),
            PortSel::Aux(j) => format!("a{}", j + 1),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Cell {
    pub name: String,
    pub kind: CellKind,
    /// Principal ports, length = coarity.
    pub principal: Vec<PortId>,
    /// Auxiliary ports, length = arity.
    pub aux: Vec<PortId>,
}

impl Cell {
    pub fn port(&self, sel: PortSel) -> PortId {
        match sel {
            PortSel::Prin(k) => self.principal[k as usize],
            PortSel::Aux(j) => self.aux[j as usize],
        }
    }

    pub fn ports(&self) -> impl Iterator<Item = (PortSel, PortId)> + '_ {
        let prins = self
            .principal
            .iter()
            .enumerate()
            .map(|(k, p)| (PortSel::Prin(k as u8), *p));
        let auxs = self
            .aux
            .iter()
            .enumerate()
            .map(|(j, p)| (PortSel::Aux(j as u8), *p));
        prins.chain(auxs)
    }
}

/// An unordered pair of ports. A wire from a port to itself is legal
/// only for a standalone connector (a closed cyclic wire).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct Wire(pub PortId, pub PortId);

impl Wire {
    pub fn new(a: PortId, b: PortId) -> Self {
        if a <= b {
            Wire(a, b)
        } else {
            Wire(b, a)
        }
    }

    pub fn other(&self, p: PortId) -> PortId {
        if self.0 == p {
            self.1
        } else {
            self.0
        }
    }

    pub fn touches(&self, p: PortId) -> bool {
        self.0 == p || self.1 == p
    }
}

/// A net: cells, a wire multiset, and labels for the free ports.
/// The port set is implicit (everything referenced by cells, wires,
/// or the label map).
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Net {
    pub name: String,
    pub cells: Vec<Cell>,
    pub wires: Vec<Wire>,
    pub free: BTreeMap<Label, PortId>,
    next_port: u32,
    fresh_counter: u32,
}

/// One violation found by [`Net::validate`].
#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
pub enum Violation {
    /// Port appears in a cell or label map but in no wire.
    Unwired { port: PortId },
    /// Port appears more than twice across cells and wires.
    OccurrenceBound { port: PortId, count: usize },
    /// A cell uses the same port twice.
    CellPortsClash { cell: String, port: PortId },
    /// A label names a port that is not free.
    LabelNotFree { label: Label, port: PortId },
    /// A free port carries no label.
    UnlabelledFree { port: PortId },
    /// Two labels name the same port.
    DuplicateLabelTarget { port: PortId },
    /// `delta1` cell present outside extension mode.
    Delta1InCoreMode { cell: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Unwired { port } => write!(f, "port {port} appears in no wire"),
            Violation::OccurrenceBound { port, count } => {
                write!(f, "port {port} occurs {count} times (max 2)")
            }
            Violation::CellPortsClash { cell, port } => {
                write!(f, "cell {cell} reuses port {port}")
            }
            Violation::LabelNotFree { label, port } => {
                write!(f, "label {label} names non-free port {port}")
            }
            Violation::UnlabelledFree { port } => write!(f, "free port {port} has no label"),
            Violation::DuplicateLabelTarget { port } => {
                write!(f, "port {port} carries more than one label")
            }
            Violation::Delta1InCoreMode { cell } => {
                write!(f, "cell {cell} has kind delta1, which needs extension mode")
            }
        }
    }
}

#[derive(Clone, Debug, thiserror::Error)]
pub enum NetError {
    #[error("invalid net: {0:?}")]
    Invalid(Vec<Violation>),
    #[error("label {0} missing")]
    MissingLabel(Label),
    #[error("label sets not disjoint: {0}")]
    LabelClash(Label),
    #[error("injection maps outside the operand labels: {0}")]
    SigmaOutOfRange(Label),
}

impl Net {
    pub fn new(name: impl Into<String>) -> Self {
        Net {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn alloc_port(&mut self) -> PortId {
        let p = PortId(self.next_port);
        self.next_port += 1;
        p
    }

    /// Deterministic fresh cell name, used by the rewrite rules.
    pub fn fresh_name(&mut self, prefix: &str) -> String {
        let n = self.fresh_counter;
        self.fresh_counter += 1;
        format!("{prefix}{n}")
    }

    pub fn add_cell(&mut self, name: impl Into<String>, kind: CellKind) -> CellId {
        let principal = (0..kind.coarity()).map(|_| self.alloc_port()).collect();
        let aux = (0..kind.arity()).map(|_| self.alloc_port()).collect();
        self.cells.push(Cell {
            name: name.into(),
            kind,
            principal,
            aux,
        });
        CellId(self.cells.len() as u32 - 1)
    }

    pub fn cell(&self, id: CellId) -> &Cell {
        &self.cells[id.0 as usize]
    }

    pub fn add_wire(&mut self, a: PortId, b: PortId) {
        self.wires.push(Wire::new(a, b));
    }

    /// Declares a labelled free port and wires it to `target`.
    pub fn add_free(&mut self, label: Label, target: PortId) -> PortId {
        let p = self.alloc_port();
        self.free.insert(label, p);
        self.add_wire(p, target);
        p
    }

    /// Declares a labelled free port without wiring it yet.
    pub fn add_free_port(&mut self, label: Label) -> PortId {
        let p = self.alloc_port();
        self.free.insert(label, p);
        p
    }

    pub fn cell_ids(&self) -> impl Iterator<Item = CellId> {
        (0..self.cells.len() as u32).map(CellId)
    }

    pub fn cell_by_name(&self, name: &str) -> Option<CellId> {
        self.cells
            .iter()
            .position(|c| c.name == name)
            .map(|i| CellId(i as u32))
    }

    /// All ports referenced anywhere, sorted.
    pub fn ports(&self) -> BTreeSet<PortId> {
        let mut s = BTreeSet::new();
        for c in &self.cells {
            for (_, p) in c.ports() {
                s.insert(p);
            }
        }
        for w in &self.wires {
            s.insert(w.0);
            s.insert(w.1);
        }
        for p in self.free.values() {
            s.insert(*p);
        }
        s
    }

    fn occurrence_counts(&self) -> HashMap<PortId, (usize, usize)> {
        // (cell occurrences, wire occurrences)
        let mut m: HashMap<PortId, (usize, usize)> = HashMap::new();
        for c in &self.cells {
            for (_, p) in c.ports() {
                m.entry(p).or_default().0 += 1;
            }
        }
        for w in &self.wires {
            m.entry(w.0).or_default().1 += 1;
            m.entry(w.1).or_default().1 += 1;
        }
        for p in self.free.values() {
            m.entry(*p).or_default();
        }
        m
    }

    /// Every invariant violation in the net; empty iff the net is legal.
    pub fn validate(&self, mode: Mode) -> Vec<Violation> {
        let mut out = Vec::new();
        let occ = self.occurrence_counts();
        for c in &self.cells {
            let mut seen = BTreeSet::new();
            for (_, p) in c.ports() {
                if !seen.insert(p) {
                    out.push(Violation::CellPortsClash {
                        cell: c.name.clone(),
                        port: p,
                    });
                }
            }
            if c.kind == CellKind::Delta1 && mode == Mode::Core {
                out.push(Violation::Delta1InCoreMode {
                    cell: c.name.clone(),
                });
            }
        }
        let mut ports: Vec<_> = occ.keys().copied().collect();
        ports.sort();
        let mut label_targets: HashMap<PortId, usize> = HashMap::new();
        for p in self.free.values() {
            *label_targets.entry(*p).or_default() += 1;
        }
        for p in ports {
            let (cells, wires) = occ[&p];
            if wires == 0 {
                out.push(Violation::Unwired { port: p });
            }
            let total = cells + wires;
            if total > 2 {
                out.push(Violation::OccurrenceBound {
                    port: p,
                    count: total,
                });
            }
            let labelled = label_targets.get(&p).copied().unwrap_or(0);
            let is_free = total == 1;
            if labelled > 1 {
                out.push(Violation::DuplicateLabelTarget { port: p });
            }
            if is_free && labelled == 0 {
                out.push(Violation::UnlabelledFree { port: p });
            }
            if !is_free && labelled > 0 {
                out.push(Violation::LabelNotFree {
                    label: self
                        .free
                        .iter()
                        .find(|(_, q)| **q == p)
                        .map(|(l, _)| l.clone())
                        .unwrap(),
                    port: p,
                });
            }
        }
        out.sort_by_key(|v| format!("{v:?}"));
        out
    }

    pub fn is_valid(&self, mode: Mode) -> bool {
        self.validate(mode).is_empty()
    }

    /// The free ports keyed by label. Precondition: the net validates.
    pub fn free_ports(&self, mode: Mode) -> Result<BTreeMap<Label, PortId>, NetError> {
        let report = self.validate(mode);
        if !report.is_empty() {
            return Err(NetError::Invalid(report));
        }
        Ok(self.free.clone())
    }

    pub fn labels(&self) -> BTreeSet<Label> {
        self.free.keys().cloned().collect()
    }

    /// Count of wires, counting a cyclic wire once.
    pub fn wire_count(&self) -> usize {
        self.wires.len()
    }
}

/// A finite injective relabelling used to fuse free ports in parallel
/// composition, and to pair locations of two transition systems.
#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct PartialInjection {
    pairs: BTreeMap<Label, Label>,
}

impl PartialInjection {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(
        pairs: impl IntoIterator<Item = (Label, Label)>,
    ) -> Result<Self, &'static str> {
        let mut map = BTreeMap::new();
        let mut rng = BTreeSet::new();
        for (a, b) in pairs {
            if !rng.insert(b.clone()) {
                return Err("not injective");
            }
            if map.insert(a, b).is_some() {
                return Err("not a function");
            }
        }
        Ok(PartialInjection { pairs: map })
    }

    pub fn get(&self, l: &Label) -> Option<&Label> {
        self.pairs.get(l)
    }

    pub fn domain(&self) -> impl Iterator<Item = &Label> {
        self.pairs.keys()
    }

    pub fn range(&self) -> impl Iterator<Item = &Label> {
        self.pairs.values()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Label, &Label)> {
        self.pairs.iter()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn inverse(&self) -> PartialInjection {
        PartialInjection {
            pairs: self.pairs.iter().map(|(a, b)| (b.clone(), a.clone())).collect(),
        }
    }

    pub fn contains_range(&self, l: &Label) -> bool {
        self.pairs.values().any(|v| v == l)
    }

    pub fn preimage(&self, l: &Label) -> Option<&Label> {
        self.pairs.iter().find(|(_, v)| *v == l).map(|(k, _)| k)
    }
}

/// One end of a collapsed link.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub enum Endpoint {
    Cell { cell: CellId, sel: PortSel },
    Free { label: Label },
}

impl Endpoint {
    pub fn cell(&self) -> Option<(CellId, PortSel)> {
        match self {
            Endpoint::Cell { cell, sel } => Some((*cell, *sel)),
            Endpoint::Free { .. } => None,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct LinkId(pub u32);

/// A net with connector chains collapsed: every link joins two
/// endpoints that are cell ports or free ports. Closed connector
/// loops are counted but carry no endpoints.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LinkNet {
    pub cells: Vec<Cell>,
    pub links: Vec<[Endpoint; 2]>,
    pub closed_loops: usize,
    endpoint_index: BTreeMap<Endpoint, LinkId>,
}

impl LinkNet {
    /// Collapse a validated net. Panics on nets that do not validate;
    /// call `validate` first.
    pub fn build(net: &Net) -> LinkNet {
        let mut end_of_port: HashMap<PortId, Endpoint> = HashMap::new();
        for (i, c) in net.cells.iter().enumerate() {
            for (sel, p) in c.ports() {
                end_of_port.insert(
                    p,
                    Endpoint::Cell {
                        cell: CellId(i as u32),
                        sel,
                    },
                );
            }
        }
        for (l, p) in &net.free {
            end_of_port.insert(*p, Endpoint::Free { label: l.clone() });
        }
        // Wires incident to each port, as indices into net.wires.
        let mut incident: HashMap<PortId, Vec<usize>> = HashMap::new();
        for (i, w) in net.wires.iter().enumerate() {
            incident.entry(w.0).or_default().push(i);
            if w.1 != w.0 {
                incident.entry(w.1).or_default().push(i);
            } else {
                incident.entry(w.0).or_default().push(i);
            }
        }
        let mut used = vec![false; net.wires.len()];
        let mut links = Vec::new();
        let mut closed_loops = 0usize;
        // Walk chains starting from anchored ports (cell ports and free ports).
        let mut anchors: Vec<PortId> = end_of_port.keys().copied().collect();
        anchors.sort();
        for &start in &anchors {
            let Some(wires_here) = incident.get(&start) else {
                continue;
            };
            for &w0 in wires_here {
                if used[w0] {
                    continue;
                }
                used[w0] = true;
                let mut port = net.wires[w0].other(start);
                let mut _prev = w0;
                loop {
                    if let Some(e) = end_of_port.get(&port) {
                        links.push([end_of_port[&start].clone(), e.clone()]);
                        break;
                    }
                    // connector: take its other wire
                    let next = incident[&port]
                        .iter()
                        .copied()
                        .find(|&wi| !used[wi])
                        .expect("connector with a single wire");
                    used[next] = true;
                    port = net.wires[next].other(port);
                    _prev = next;
                }
            }
        }
        // Remaining wires form closed connector loops.
        for (i, w) in net.wires.iter().enumerate() {
            if !used[i] {
                used[i] = true;
                if w.0 != w.1 {
                    let mut port = w.1;
                    while port != w.0 {
                        let next = incident[&port]
                            .iter()
                            .copied()
                            .find(|&wi| !used[wi])
                            .expect("open chain in loop sweep");
                        used[next] = true;
                        port = net.wires[next].other(port);
                    }
                }
                closed_loops += 1;
            }
        }
        links.sort();
        let mut endpoint_index = BTreeMap::new();
        for (i, l) in links.iter().enumerate() {
            endpoint_index.insert(l[0].clone(), LinkId(i as u32));
            endpoint_index.insert(l[1].clone(), LinkId(i as u32));
        }
        LinkNet {
            cells: net.cells.clone(),
            links,
            closed_loops,
            endpoint_index,
        }
    }

    pub fn cell(&self, id: CellId) -> &Cell {
        &self.cells[id.0 as usize]
    }

    pub fn link_of(&self, e: &Endpoint) -> Option<LinkId> {
        self.endpoint_index.get(e).copied()
    }

    pub fn ends(&self, l: LinkId) -> &[Endpoint; 2] {
        &self.links[l.0 as usize]
    }

    /// The end index of `e` on its link (0 or 1). For a self-link the
    /// lower index wins.
    pub fn end_index(&self, l: LinkId, e: &Endpoint) -> u8 {
        if &self.links[l.0 as usize][0] == e {
            0
        } else {
            1
        }
    }

    pub fn free_labels(&self) -> BTreeSet<Label> {
        let mut s = BTreeSet::new();
        for l in &self.links {
            for e in l {
                if let Endpoint::Free { label } = e {
                    s.insert(label.clone());
                }
            }
        }
        s
    }

    pub fn cell_ids(&self) -> impl Iterator<Item = CellId> {
        (0..self.cells.len() as u32).map(CellId)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eps_net() -> Net {
        let mut n = Net::new("eps");
        let e = n.add_cell("e", CellKind::Epsilon);
        let p = n.cell(e).principal[0];
        n.add_free(Label::new("x"), p);
        n
    }

    #[test]
    fn empty_net_validates() {
        let n = Net::new("empty");
        assert!(n.validate(Mode::Core).is_empty());
        assert!(n.free_ports(Mode::Core).unwrap().is_empty());
    }

    #[test]
    fn single_epsilon_validates_with_one_free_port() {
        let n = eps_net();
        assert!(n.validate(Mode::Core).is_empty());
        assert_eq!(n.free_ports(Mode::Core).unwrap().len(), 1);
    }

    #[test]
    fn occurrence_bound_violation_reported() {
        let mut n = eps_net();
        // Wire the epsilon principal port once more: 1 cell + 2 wires = 3.
        let e = n.cell_by_name("e").unwrap();
        let p = n.cell(e).principal[0];
        let q = n.alloc_port();
        n.add_wire(p, q);
        let report = n.validate(Mode::Core);
        assert!(report
            .iter()
            .any(|v| matches!(v, Violation::OccurrenceBound { count: 3, .. })));
    }

    #[test]
    fn unlabelled_free_port_reported() {
        let mut n = Net::new("n");
        let e = n.add_cell("e", CellKind::Epsilon);
        let p = n.cell(e).principal[0];
        let q = n.alloc_port();
        n.add_wire(p, q);
        let report = n.validate(Mode::Core);
        assert!(report
            .iter()
            .any(|v| matches!(v, Violation::UnlabelledFree { .. })));
    }

    #[test]
    fn closed_net_has_no_free_ports() {
        // Two epsilon cells wired principal to principal.
        let mut n = Net::new("ee");
        let a = n.add_cell("a", CellKind::Epsilon);
        let b = n.add_cell("b", CellKind::Epsilon);
        let pa = n.cell(a).principal[0];
        let pb = n.cell(b).principal[0];
        n.add_wire(pa, pb);
        assert!(n.validate(Mode::Core).is_empty());
        assert!(n.free_ports(Mode::Core).unwrap().is_empty());
    }

    #[test]
    fn link_net_collapses_connectors() {
        let mut n = Net::new("chain");
        let e = n.add_cell("e", CellKind::Epsilon);
        let p = n.cell(e).principal[0];
        // p -- c1 -- c2 -- free
        let c1 = n.alloc_port();
        let c2 = n.alloc_port();
        n.add_wire(p, c1);
        n.add_wire(c1, c2);
        let f = n.add_free_port(Label::new("x"));
        n.add_wire(c2, f);
        assert!(n.validate(Mode::Core).is_empty());
        let ln = LinkNet::build(&n);
        assert_eq!(ln.links.len(), 1);
        assert_eq!(ln.closed_loops, 0);
    }

    #[test]
    fn cyclic_wire_counts_as_loop() {
        let mut n = Net::new("loop");
        let x = n.alloc_port();
        n.add_wire(x, x);
        assert!(n.validate(Mode::Core).is_empty());
        let ln = LinkNet::build(&n);
        assert_eq!(ln.closed_loops, 1);
    }
}
