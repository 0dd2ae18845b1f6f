//! The multi-token machine over a net.
//!
//! Four token kinds live in a machine state:
//!
//! * mobile **marriage** tokens carrying a configuration (a pair of
//!   stacks) and remembering their origin port and configuration;
//! * static **single** and **married status** tokens sitting at
//!   duplicator principal ports, recording the civil state of each
//!   virtual copy of the cell (the status stack is the copy address);
//! * static **matching** tokens at free ports, witnessing that a
//!   marriage token left the net there.
//!
//! Positions are directed wire slots: a token sits on a link heading
//! for one of its ends. A token named after a cell port is leaving
//! that cell; one named after a free port is coming in from the
//! environment or waiting there to leave.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::lts::action::CellType;
use crate::net::{CellId, CellKind, Endpoint, Label, LinkId, LinkNet, PortSel};

pub mod external;
pub mod focus;
pub mod lts;
pub mod marriage;
pub mod moves;

/// Branch symbol on the first stack.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize)]
pub enum Sym {
    P,
    Q,
}

impl Sym {
    pub fn conj(self) -> Sym {
        match self {
            Sym::P => Sym::Q,
            Sym::Q => Sym::P,
        }
    }
}

/// Stack element: a routing symbol or a branch number.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize)]
pub enum Atom {
    S(Sym),
    N(u64),
}

/// A finite stack; the last element is the top.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default, Serialize)]
pub struct Stack(pub Vec<Atom>);

impl Stack {
    pub fn empty() -> Self {
        Stack(Vec::new())
    }

    pub fn from_syms(syms: impl IntoIterator<Item = Sym>) -> Self {
        Stack(syms.into_iter().map(Atom::S).collect())
    }

    pub fn push(&mut self, a: Atom) {
        self.0.push(a);
    }

    pub fn pop(&mut self) -> Option<Atom> {
        self.0.pop()
    }

    pub fn top(&self) -> Option<&Atom> {
        self.0.last()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Routing symbols swapped pointwise, numbers fixed.
    pub fn conj(&self) -> Stack {
        Stack(
            self.0
                .iter()
                .map(|a| match a {
                    Atom::S(s) => Atom::S(s.conj()),
                    Atom::N(n) => Atom::N(*n),
                })
                .collect(),
        )
    }
}

impl fmt::Display for Stack {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            match a {
                Atom::S(Sym::P) => f.write_str("p")?,
                Atom::S(Sym::Q) => f.write_str("q")?,
                Atom::N(n) => write!(f, "{n}")?,
            }
        }
        Ok(())
    }
}

/// A pair of stacks. Conjugation flips the first stack only.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default, Serialize)]
pub struct Conf {
    pub g: Stack,
    pub d: Stack,
}

impl Conf {
    pub fn empty() -> Self {
        Conf::default()
    }

    pub fn new(g: Stack, d: Stack) -> Self {
        Conf { g, d }
    }

    pub fn conj(&self) -> Conf {
        Conf {
            g: self.g.conj(),
            d: self.d.clone(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty() && self.d.is_empty()
    }
}

impl fmt::Display for Conf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({};{})", self.g, self.d)
    }
}

/// Copy address inside a duplicator's virtual-copy tree, root first.
pub type Addr = Vec<Sym>;

/// The stack a fresh hunter for copy `addr` carries: it pops the
/// newest branch decision last.
pub fn hunter_stack(addr: &Addr) -> Stack {
    Stack(addr.iter().rev().map(|s| Atom::S(*s)).collect())
}

/// Recovers the copy address from a hunter's origin stack.
pub fn addr_of_stack(s: &Stack) -> Option<Addr> {
    let mut out = Vec::new();
    for a in s.0.iter().rev() {
        match a {
            Atom::S(sym) => out.push(*sym),
            Atom::N(_) => return None,
        }
    }
    Some(out)
}

/// Directed slot on a link: heading for `ends[toward]`; `arrived`
/// distinguishes "just left the far end" from "reached this end".
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize)]
pub struct Pos {
    pub link: LinkId,
    pub toward: u8,
    pub arrived: bool,
}

impl Pos {
    pub fn target<'a>(&self, ln: &'a LinkNet) -> &'a Endpoint {
        &ln.ends(self.link)[self.toward as usize]
    }

    pub fn source<'a>(&self, ln: &'a LinkNet) -> &'a Endpoint {
        &ln.ends(self.link)[1 - self.toward as usize]
    }

    /// The port this token is named after.
    pub fn named<'a>(&self, ln: &'a LinkNet) -> &'a Endpoint {
        if self.arrived {
            self.target(ln)
        } else {
            self.source(ln)
        }
    }

    /// Same slot, opposite direction; used by sequence inversion.
    pub fn flipped(&self) -> Pos {
        Pos {
            link: self.link,
            toward: 1 - self.toward,
            arrived: !self.arrived,
        }
    }
}

/// Where a marriage token was installed.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize)]
pub enum OriginSite {
    CellPrin { cell: CellId, prin: u8 },
    Free { label: Label },
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize)]
pub struct Origin {
    pub site: OriginSite,
    pub conf: Conf,
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize)]
pub struct MarriageTok {
    pub pos: Pos,
    pub conf: Conf,
    pub origin: Origin,
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize)]
pub struct MatchingTok {
    pub at: Label,
    pub conf: Conf,
    pub origin: Origin,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize)]
pub enum Civil {
    Single,
    Married(CellType),
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize)]
pub struct StatusTok {
    pub cell: CellId,
    pub prin: u8,
    pub addr: Addr,
    pub civil: Civil,
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize)]
pub enum Token {
    Status(StatusTok),
    Marriage(MarriageTok),
    Matching(MatchingTok),
}

impl Token {
    pub fn as_marriage(&self) -> Option<&MarriageTok> {
        match self {
            Token::Marriage(m) => Some(m),
            _ => None,
        }
    }
}

/// A finite multiset of tokens; kept sorted for canonical keys.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default, Serialize)]
pub struct MachineState {
    tokens: Vec<Token>,
}

impl MachineState {
    pub fn from_tokens(mut tokens: Vec<Token>) -> Self {
        tokens.sort();
        MachineState { tokens }
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn insert(&mut self, t: Token) {
        let idx = self.tokens.partition_point(|x| x <= &t);
        self.tokens.insert(idx, t);
    }

    /// Removes one occurrence; true when found.
    pub fn remove(&mut self, t: &Token) -> bool {
        if let Some(i) = self.tokens.iter().position(|x| x == t) {
            self.tokens.remove(i);
            true
        } else {
            false
        }
    }

    pub fn contains(&self, t: &Token) -> bool {
        self.tokens.iter().any(|x| x == t)
    }

    pub fn marriages(&self) -> impl Iterator<Item = &MarriageTok> {
        self.tokens.iter().filter_map(|t| t.as_marriage())
    }

    pub fn matchings(&self) -> impl Iterator<Item = &MatchingTok> {
        self.tokens.iter().filter_map(|t| match t {
            Token::Matching(m) => Some(m),
            _ => None,
        })
    }

    pub fn statuses(&self) -> impl Iterator<Item = &StatusTok> {
        self.tokens.iter().filter_map(|t| match t {
            Token::Status(s) => Some(s),
            _ => None,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn key(&self) -> String {
        format!("{:?}", self.tokens)
    }

    /// Looks up a marriage token by its origin.
    pub fn marriage_by_origin(&self, origin: &Origin) -> Option<&MarriageTok> {
        self.marriages().find(|m| &m.origin == origin)
    }

    pub fn matching_by_origin(&self, origin: &Origin) -> Option<&MatchingTok> {
        self.matchings().find(|m| &m.origin == origin)
    }
}

/// One internal transition with enough metadata to replay or permute
/// it.
#[derive(Clone, Debug)]
pub enum InternalStep {
    Move {
        before: MarriageTok,
        after: MarriageTok,
    },
    Marriage(marriage::MarriageFiring),
}

impl InternalStep {
    pub fn is_marriage(&self) -> bool {
        matches!(self, InternalStep::Marriage(_))
    }

    /// Origin of the moved token, when this is a move.
    pub fn moved_origin(&self) -> Option<&Origin> {
        match self {
            InternalStep::Move { before, .. } => Some(&before.origin),
            InternalStep::Marriage(_) => None,
        }
    }
}

/// Whether the single status for this copy is present.
pub fn single_present_pub(state: &MachineState, cell: CellId, prin: u8, addr: &Addr) -> bool {
    state.contains(&Token::Status(StatusTok {
        cell,
        prin,
        addr: addr.clone(),
        civil: Civil::Single,
    }))
}

/// Status lookup used by the move rules.
pub struct StatusView {
    map: BTreeMap<(CellId, u8, Addr), Civil>,
    children: BTreeSet<(CellId, u8, Addr)>,
}

impl StatusView {
    pub fn of(state: &MachineState) -> StatusView {
        let mut map = BTreeMap::new();
        let mut children = BTreeSet::new();
        for s in state.statuses() {
            map.insert((s.cell, s.prin, s.addr.clone()), s.civil);
            if !s.addr.is_empty() {
                let mut parent = s.addr.clone();
                parent.pop();
                children.insert((s.cell, s.prin, parent));
            }
        }
        StatusView { map, children }
    }

    pub fn civil(&self, cell: CellId, prin: u8, addr: &Addr) -> Option<Civil> {
        self.map.get(&(cell, prin, addr.clone())).copied()
    }

    pub fn has_children(&self, cell: CellId, prin: u8, addr: &Addr) -> bool {
        self.children.contains(&(cell, prin, addr.clone()))
    }
}

/// Leaving-slot position for a cell principal port.
pub fn leaving_prin(ln: &LinkNet, cell: CellId, prin: u8) -> Option<Pos> {
    let e = Endpoint::Cell {
        cell,
        sel: PortSel::Prin(prin),
    };
    let link = ln.link_of(&e)?;
    let my_end = ln.end_index(link, &e);
    Some(Pos {
        link,
        toward: 1 - my_end,
        arrived: false,
    })
}

/// Leaving-slot position for a free port (a freshly injected token).
pub fn leaving_free(ln: &LinkNet, label: &Label) -> Option<Pos> {
    let e = Endpoint::Free {
        label: label.clone(),
    };
    let link = ln.link_of(&e)?;
    let my_end = ln.end_index(link, &e);
    Some(Pos {
        link,
        toward: 1 - my_end,
        arrived: false,
    })
}

/// Arrived-slot position at a free port.
pub fn arrived_free(ln: &LinkNet, label: &Label) -> Option<Pos> {
    leaving_free(ln, label).map(|p| Pos {
        link: p.link,
        toward: 1 - p.toward,
        arrived: true,
    })
}

/// Fresh hunter installed at a duplicator principal port.
pub fn hunter(ln: &LinkNet, cell: CellId, prin: u8, addr: &Addr) -> Option<MarriageTok> {
    let conf = Conf::new(hunter_stack(addr), Stack::empty());
    Some(MarriageTok {
        pos: leaving_prin(ln, cell, prin)?,
        conf: conf.clone(),
        origin: Origin {
            site: OriginSite::CellPrin { cell, prin },
            conf,
        },
    })
}

/// One marriage token and one single status token per duplicator
/// principal port; nothing else.
pub fn initial_state(ln: &LinkNet) -> MachineState {
    let mut tokens = Vec::new();
    for c in ln.cell_ids() {
        let kind = ln.cell(c).kind;
        if !kind.is_delta() {
            continue;
        }
        for k in 0..kind.coarity() as u8 {
            tokens.push(Token::Status(StatusTok {
                cell: c,
                prin: k,
                addr: Vec::new(),
                civil: Civil::Single,
            }));
            if let Some(h) = hunter(ln, c, k, &Vec::new()) {
                tokens.push(Token::Marriage(h));
            }
        }
    }
    MachineState::from_tokens(tokens)
}

pub fn cell_type(kind: CellKind) -> CellType {
    match kind {
        CellKind::Gamma => CellType::Gamma,
        CellKind::Delta2 | CellKind::Delta1 => CellType::Delta,
        CellKind::Epsilon => CellType::Epsilon,
    }
}

/// Reads a hunter's copy address off its origin; `None` for tokens
/// that came in from the environment.
pub fn hunter_addr(m: &MarriageTok) -> Option<(CellId, u8, Addr)> {
    match &m.origin.site {
        OriginSite::CellPrin { cell, prin } => {
            if !m.origin.conf.d.is_empty() {
                return None;
            }
            addr_of_stack(&m.origin.conf.g).map(|a| (*cell, *prin, a))
        }
        OriginSite::Free { .. } => None,
    }
}

// ---------------------------------------------------------------------
// JSON surface

pub fn atom_json(a: &Atom) -> serde_json::Value {
    match a {
        Atom::S(Sym::P) => serde_json::json!("p"),
        Atom::S(Sym::Q) => serde_json::json!("q"),
        Atom::N(n) => serde_json::json!({ "n": n }),
    }
}

pub fn conf_json(c: &Conf) -> serde_json::Value {
    serde_json::json!({
        "g": c.g.0.iter().map(atom_json).collect::<Vec<_>>(),
        "d": c.d.0.iter().map(atom_json).collect::<Vec<_>>(),
    })
}

pub fn endpoint_name(ln: &LinkNet, e: &Endpoint) -> String {
    match e {
        Endpoint::Free { label } => label.0.clone(),
        Endpoint::Cell { cell, sel } => {
            format!("{}.{}", ln.cell(*cell).name, sel.display())
        }
    }
}

pub fn token_json(ln: &LinkNet, t: &Token) -> serde_json::Value {
    match t {
        Token::Marriage(m) => serde_json::json!({
            "kind": "marriage",
            "pos": endpoint_name(ln, m.pos.named(ln)),
            "conf": conf_json(&m.conf),
            "origin": origin_json(ln, &m.origin),
        }),
        Token::Matching(m) => serde_json::json!({
            "kind": "matching",
            "pos": m.at.0,
            "conf": conf_json(&m.conf),
            "origin": origin_json(ln, &m.origin),
        }),
        Token::Status(s) => serde_json::json!({
            "kind": match s.civil { Civil::Single => "single-status", Civil::Married(_) => "married-status" },
            "pos": format!("{}.p{}", ln.cell(s.cell).name, s.prin + 1),
            "stack": s.addr.iter().map(|x| atom_json(&Atom::S(*x))).collect::<Vec<_>>(),
            "partner": match s.civil {
                Civil::Single => serde_json::Value::Null,
                Civil::Married(ct) => serde_json::json!(ct.name()),
            },
        }),
    }
}

fn origin_json(ln: &LinkNet, o: &Origin) -> serde_json::Value {
    let site = match &o.site {
        OriginSite::Free { label } => label.0.clone(),
        OriginSite::CellPrin { cell, prin } => {
            format!("{}.p{}", ln.cell(*cell).name, prin + 1)
        }
    };
    serde_json::json!({ "site": site, "conf": conf_json(&o.conf) })
}

pub fn state_json(ln: &LinkNet, s: &MachineState) -> serde_json::Value {
    serde_json::json!(s.tokens().iter().map(|t| token_json(ln, t)).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::parse::parse_net;
    use crate::net::Mode;

    #[test]
    fn conjugation_is_an_involution_and_flips_syms() {
        let s = Stack(vec![Atom::S(Sym::P), Atom::N(3), Atom::S(Sym::Q)]);
        assert_eq!(s.conj().0, vec![Atom::S(Sym::Q), Atom::N(3), Atom::S(Sym::P)]);
        assert_eq!(s.conj().conj(), s);
        assert_eq!(Stack::empty().conj(), Stack::empty());
        let c = Conf::new(s.clone(), Stack(vec![Atom::N(1)]));
        assert_eq!(c.conj().conj(), c);
        assert_eq!(c.conj().d, c.d);
    }

    #[test]
    fn initial_state_counts_tokens_per_principal_port() {
        let n = parse_net(
            "net d\ncell D : delta2\nfree a = D.p1\nfree b = D.p2\n\
             free c = D.a1\nfree d = D.a2\nfree e = D.a3\nfree f = D.a4\n",
            Mode::Core,
        )
        .unwrap();
        let ln = LinkNet::build(&n);
        let s = initial_state(&ln);
        assert_eq!(s.marriages().count(), 2);
        assert_eq!(s.statuses().count(), 2);
        assert!(s.matchings().next().is_none());
    }

    #[test]
    fn no_duplicators_means_empty_initial_state() {
        let n = parse_net("net e\ncell E : epsilon\nfree x = E.p1\n", Mode::Core).unwrap();
        let ln = LinkNet::build(&n);
        assert!(initial_state(&ln).is_empty());
    }

    #[test]
    fn hunter_stack_round_trips_addresses() {
        let addr = vec![Sym::P, Sym::Q, Sym::P];
        assert_eq!(addr_of_stack(&hunter_stack(&addr)), Some(addr));
    }
}
