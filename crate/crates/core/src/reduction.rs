//! Redex enumeration and the interaction rules.
//!
//! A redex is a single wire joining two principal ports whose cell
//! kinds match an enabled rule. Rule application deletes the two cells
//! and splices the dangling wire ends: annihilations join the engaged
//! aux attachments (crossed for two gammas, straight pairwise for two
//! duplicators) and cap every other dangling end with a fresh epsilon
//! cell; a gamma/duplicator pair commutes, duplicating the duplicator
//! into two copies routed through one merger gamma per remaining port.
//! Extension mode adds the erasure rules; a duplicator that loses one
//! principal group against an epsilon survives demoted to `delta1`.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::Rng;
use rand::SeedableRng;
use serde::Serialize;

use crate::net::iso::{canonical_cell_order, canonical_key};
use crate::net::{Cell, CellId, CellKind, Mode, Net, NetError, PortId, Wire};

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RedexKind {
    Gg,
    Dd,
    Gd,
    GeExt,
    EeExt,
    DeExt,
}

impl RedexKind {
    pub fn enabled_in(self, mode: Mode) -> bool {
        match self {
            RedexKind::Gg | RedexKind::Dd | RedexKind::Gd => true,
            _ => mode == Mode::Extension,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RedexKind::Gg => "gg",
            RedexKind::Dd => "dd",
            RedexKind::Gd => "gd",
            RedexKind::GeExt => "ge",
            RedexKind::EeExt => "ee",
            RedexKind::DeExt => "de",
        }
    }
}

/// A wire joining two facing principal ports.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Serialize)]
pub struct Redex {
    pub kind: RedexKind,
    pub left: (CellId, u8),
    pub right: (CellId, u8),
}

fn classify(a: CellKind, b: CellKind) -> Option<(RedexKind, bool)> {
    // bool: swap so the canonical left matches the rule orientation
    // (gamma first for Gd/GeExt, delta first for DeExt).
    use CellKind::*;
    let d = |k: CellKind| k.is_delta();
    match (a, b) {
        (Gamma, Gamma) => Some((RedexKind::Gg, false)),
        (x, y) if d(x) && d(y) => Some((RedexKind::Dd, false)),
        (Gamma, y) if d(y) => Some((RedexKind::Gd, false)),
        (x, Gamma) if d(x) => Some((RedexKind::Gd, true)),
        (Gamma, Epsilon) => Some((RedexKind::GeExt, false)),
        (Epsilon, Gamma) => Some((RedexKind::GeExt, true)),
        (Epsilon, Epsilon) => Some((RedexKind::EeExt, false)),
        (x, Epsilon) if d(x) => Some((RedexKind::DeExt, false)),
        (Epsilon, y) if d(y) => Some((RedexKind::DeExt, true)),
        _ => None,
    }
}

/// Every enabled redex, in canonical order. Principal ports face each
/// other through a wire or a chain of connector ports.
pub fn find_redexes(net: &Net, mode: Mode) -> Vec<Redex> {
    let ln = crate::net::LinkNet::build(net);
    let order = canonical_cell_order(net);
    let rank: HashMap<u32, usize> = order
        .iter()
        .enumerate()
        .map(|(r, &i)| (i as u32, r))
        .collect();
    let mut out = Vec::new();
    for link in &ln.links {
        let (
            crate::net::Endpoint::Cell {
                cell: cl,
                sel: crate::net::PortSel::Prin(pl),
            },
            crate::net::Endpoint::Cell {
                cell: cr,
                sel: crate::net::PortSel::Prin(pr),
            },
        ) = (&link[0], &link[1])
        else {
            continue;
        };
        let (l, r) = ((*cl, *pl), (*cr, *pr));
        if l == r {
            continue;
        }
        let (kl, kr) = (net.cell(l.0).kind, net.cell(r.0).kind);
        let Some((kind, swap)) = classify(kl, kr) else {
            continue;
        };
        if !kind.enabled_in(mode) {
            continue;
        }
        let (mut a, mut b) = if swap { (r, l) } else { (l, r) };
        // stable orientation for symmetric rules
        if kind == RedexKind::Gg || kind == RedexKind::Dd || kind == RedexKind::EeExt {
            let ka = (rank[&a.0 .0], a.1);
            let kb = (rank[&b.0 .0], b.1);
            if kb < ka {
                std::mem::swap(&mut a, &mut b);
            }
        }
        out.push(Redex {
            kind,
            left: a,
            right: b,
        });
    }
    out.sort_by_key(|r| {
        (
            rank[&r.left.0 .0],
            r.left.1,
            rank[&r.right.0 .0],
            r.right.1,
            r.kind,
        )
    });
    out.dedup();
    out
}

#[derive(Clone, Debug, thiserror::Error)]
pub enum ReduceError {
    #[error("redex is not present in the net")]
    StaleRedex,
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Splice plan: each port of a deleted cell maps to its continuation.
struct Splicer {
    deleted_cells: BTreeSet<u32>,
    pairing: HashMap<PortId, PortId>,
    /// deleted ports with no continuation (engaged principals)
    consumed: BTreeSet<PortId>,
}

impl Splicer {
    fn new() -> Self {
        Splicer {
            deleted_cells: BTreeSet::new(),
            pairing: HashMap::new(),
            consumed: BTreeSet::new(),
        }
    }

    fn delete(&mut self, c: CellId) {
        self.deleted_cells.insert(c.0);
    }

    fn pair(&mut self, a: PortId, b: PortId) {
        self.pairing.insert(a, b);
        self.pairing.insert(b, a);
    }

    fn chain(&mut self, from: PortId, to: PortId) {
        // one-directional continuation (to a fresh cell's port)
        self.pairing.insert(from, to);
    }

    fn consume(&mut self, p: PortId) {
        self.consumed.insert(p);
    }

    /// Rebuilds the wire set of `net` after deleting the planned cells.
    ///
    /// Every non-consumed port of a deleted cell carries exactly one
    /// wire edge and one pairing edge, so the dangling structure is a
    /// disjoint union of alternating paths and cycles. Paths are
    /// replaced by one wire between their surviving endpoints; pure
    /// cycles become cyclic wires.
    fn apply(self, net: &mut Net, deleted_ports: &BTreeSet<PortId>) {
        let is_deleted = |p: &PortId| deleted_ports.contains(p);
        let mut wire_peer: HashMap<PortId, PortId> = HashMap::new();
        for w in &net.wires {
            if is_deleted(&w.0) {
                wire_peer.insert(w.0, w.1);
            }
            if is_deleted(&w.1) {
                wire_peer.insert(w.1, w.0);
            }
        }
        let mut new_wires: Vec<Wire> = net
            .wires
            .iter()
            .copied()
            .filter(|w| !is_deleted(&w.0) && !is_deleted(&w.1))
            .collect();
        let mut visited: BTreeSet<PortId> = self.consumed.clone();
        #[derive(Clone, Copy, PartialEq)]
        enum Via {
            Wire,
            Pair,
        }
        let step = |cur: PortId, via: Via| -> (PortId, Via) {
            match via {
                Via::Wire => (self.pairing[&cur], Via::Pair),
                Via::Pair => (wire_peer[&cur], Via::Wire),
            }
        };
        // open chains, entered from a surviving node
        let mut starts: Vec<(PortId, PortId, Via)> = Vec::new();
        let mut paired: Vec<PortId> = self
            .pairing
            .keys()
            .copied()
            .filter(|p| is_deleted(p))
            .collect();
        paired.sort();
        for &p in &paired {
            let w = wire_peer[&p];
            if !is_deleted(&w) {
                starts.push((w, p, Via::Wire));
            }
            let q = self.pairing[&p];
            if !is_deleted(&q) {
                starts.push((q, p, Via::Pair));
            }
        }
        starts.sort_by_key(|(o, p, _)| (*o, *p));
        for (outside, first, entry) in starts {
            if visited.contains(&first) {
                continue;
            }
            let mut cur = first;
            let mut via = entry;
            let end = loop {
                visited.insert(cur);
                let (next, nvia) = step(cur, via);
                if !is_deleted(&next) {
                    break next;
                }
                cur = next;
                via = nvia;
            };
            new_wires.push(Wire::new(outside, end));
        }
        // pure cycles
        for &p in &paired {
            if visited.contains(&p) {
                continue;
            }
            let mut cur = p;
            let mut via = Via::Wire;
            loop {
                visited.insert(cur);
                let (next, nvia) = step(cur, via);
                if visited.contains(&next) {
                    break;
                }
                cur = next;
                via = nvia;
            }
            let x = net.alloc_port();
            new_wires.push(Wire::new(x, x));
        }
        // drop deleted cells
        let keep: Vec<Cell> = net
            .cells
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.deleted_cells.contains(&(*i as u32)))
            .map(|(_, c)| c.clone())
            .collect();
        net.cells = keep;
        net.wires = new_wires;
    }
}

fn deleted_ports_of(net: &Net, splicer: &Splicer) -> BTreeSet<PortId> {
    let mut s = BTreeSet::new();
    for &ci in &splicer.deleted_cells {
        for (_, p) in net.cells[ci as usize].ports() {
            s.insert(p);
        }
    }
    s
}

/// Aux indices of the pair owned by principal port `k`.
pub fn aux_pair(kind: CellKind, k: u8) -> [usize; 2] {
    debug_assert!(kind.is_delta());
    [2 * k as usize, 2 * k as usize + 1]
}

/// Applies one redex, returning the rewritten net. Free-port labels
/// are untouched.
pub fn apply_redex(net: &Net, redex: &Redex) -> Result<Net, ReduceError> {
    if !find_redexes(net, Mode::Extension).contains(redex) {
        return Err(ReduceError::StaleRedex);
    }
    let mut out = net.clone();
    let mut sp = Splicer::new();
    let (lc, lk) = redex.left;
    let (rc, rk) = redex.right;
    let lcell = net.cell(lc).clone();
    let rcell = net.cell(rc).clone();
    sp.delete(lc);
    sp.delete(rc);
    // The engaged principals vanish. Facing directly, their wire just
    // disappears; facing through connectors, pairing them dissolves the
    // chain into a floating ring.
    let lp = lcell.principal[lk as usize];
    let rp = rcell.principal[rk as usize];
    let direct = net.wires.iter().any(|w| w.touches(lp) && w.touches(rp));
    if direct {
        sp.consume(lp);
        sp.consume(rp);
    } else {
        sp.pair(lp, rp);
    }

    let cap = |out: &mut Net, sp: &mut Splicer, p: PortId| {
        let name = out.fresh_name("e");
        let e = out.add_cell(name, CellKind::Epsilon);
        let ep = out.cell(e).principal[0];
        sp.chain(p, ep);
    };

    match redex.kind {
        RedexKind::Gg => {
            sp.pair(lcell.aux[0], rcell.aux[1]);
            sp.pair(lcell.aux[1], rcell.aux[0]);
        }
        RedexKind::Dd => {
            let la = aux_pair(lcell.kind, lk);
            let ra = aux_pair(rcell.kind, rk);
            if lc == rc {
                debug_assert_ne!(lk, rk);
                sp.pair(lcell.aux[la[0]], lcell.aux[ra[0]]);
                sp.pair(lcell.aux[la[1]], lcell.aux[ra[1]]);
            } else {
                sp.pair(lcell.aux[la[0]], rcell.aux[ra[0]]);
                sp.pair(lcell.aux[la[1]], rcell.aux[ra[1]]);
                for (cell, engaged_k) in [(&lcell, lk), (&rcell, rk)] {
                    for k in 0..cell.kind.coarity() as u8 {
                        if k == engaged_k {
                            continue;
                        }
                        cap(&mut out, &mut sp, cell.principal[k as usize]);
                        for j in aux_pair(cell.kind, k) {
                            cap(&mut out, &mut sp, cell.aux[j]);
                        }
                    }
                }
            }
        }
        RedexKind::Gd => {
            // left is the gamma, right the duplicator (per classify)
            let dkind = rcell.kind;
            let name_p = out.fresh_name("d");
            let copy_p = out.add_cell(name_p, dkind);
            let name_q = out.fresh_name("d");
            let copy_q = out.add_cell(name_q, dkind);
            // copies face the gamma's aux attachments, crossed: the copy
            // selected by popping p leaves through the second aux.
            let cp = out.cell(copy_p).principal[rk as usize];
            let cq = out.cell(copy_q).principal[rk as usize];
            sp.chain(lcell.aux[1], cp);
            sp.chain(lcell.aux[0], cq);
            // one merger gamma per remaining duplicator port
            let mut remaining: Vec<(bool, usize)> = Vec::new();
            for k in 0..dkind.coarity() {
                if k as u8 != rk {
                    remaining.push((true, k));
                }
            }
            for j in 0..dkind.arity() {
                remaining.push((false, j));
            }
            for (is_prin, idx) in remaining {
                let name = out.fresh_name("g");
                let m = out.add_cell(name, CellKind::Gamma);
                let (mp, ma0, ma1) = {
                    let mc = out.cell(m);
                    (mc.principal[0], mc.aux[0], mc.aux[1])
                };
                let (pp, pq) = if is_prin {
                    (
                        out.cell(copy_p).principal[idx],
                        out.cell(copy_q).principal[idx],
                    )
                } else {
                    (out.cell(copy_p).aux[idx], out.cell(copy_q).aux[idx])
                };
                out.add_wire(ma0, pp);
                out.add_wire(ma1, pq);
                let old = if is_prin {
                    rcell.principal[idx]
                } else {
                    rcell.aux[idx]
                };
                sp.chain(old, mp);
            }
        }
        RedexKind::GeExt => {
            cap(&mut out, &mut sp, lcell.aux[0]);
            cap(&mut out, &mut sp, lcell.aux[1]);
        }
        RedexKind::EeExt => {}
        RedexKind::DeExt => {
            // left is the duplicator
            let engaged = aux_pair(lcell.kind, lk);
            for j in engaged {
                cap(&mut out, &mut sp, lcell.aux[j]);
            }
            if lcell.kind == CellKind::Delta2 {
                let name = out.fresh_name("d");
                let d1 = out.add_cell(name, CellKind::Delta1);
                let other = 1 - lk;
                let d1p = out.cell(d1).principal[0];
                sp.chain(lcell.principal[other as usize], d1p);
                let pair = aux_pair(CellKind::Delta2, other);
                for (j, &src) in pair.iter().enumerate() {
                    let d1a = out.cell(d1).aux[j];
                    sp.chain(lcell.aux[src], d1a);
                }
            }
            // delta1 against epsilon erases fully; engaged caps above
            // already cover both its aux ports.
        }
    }

    let deleted = deleted_ports_of(net, &sp);
    sp.apply(&mut out, &deleted);
    debug_assert!(
        out.validate(Mode::Extension).is_empty(),
        "rule application must preserve validity: {:?}",
        out.validate(Mode::Extension)
    );
    Ok(out)
}

/// All `(redex, reduct)` pairs; the one-step transition relation.
pub fn successors(net: &Net, mode: Mode) -> Result<Vec<(Redex, Net)>, ReduceError> {
    let report = net.validate(mode);
    if !report.is_empty() {
        return Err(NetError::Invalid(report).into());
    }
    find_redexes(net, mode)
        .into_iter()
        .map(|r| apply_redex(net, &r).map(|n| (r, n)))
        .collect()
}

#[derive(Clone, Copy, Debug)]
pub enum Strategy {
    Leftmost,
    SeededRandom(u64),
    ExhaustiveBfs,
}

#[derive(Clone, Copy, Debug)]
pub struct Budget {
    pub max_steps: usize,
    pub max_states: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_steps: 10_000,
            max_states: 50_000,
        }
    }
}

#[derive(Clone, Debug)]
pub enum Outcome {
    /// Normal form(s) reached; exhaustive search returns every normal
    /// form up to isomorphism.
    Normal(Vec<Net>),
    BudgetExhausted { frontier: Vec<Net> },
    /// A reachable net is isomorphic to one of its own ancestors.
    CycleDetected { witness: Net },
}

/// One trace entry per applied rule.
#[derive(Clone, Debug, Serialize)]
pub struct TraceStep {
    pub step: usize,
    pub rule: &'static str,
    pub redex: (String, u8, String, u8),
    pub net_hash: String,
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

pub fn net_hash(net: &Net) -> String {
    format!("{:016x}", fnv1a64(canonical_key(net).as_bytes()))
}

pub fn trace_step(net: &Net, step: usize, redex: &Redex, reduct: &Net) -> TraceStep {
    TraceStep {
        step,
        rule: redex.kind.name(),
        redex: (
            net.cell(redex.left.0).name.clone(),
            redex.left.1,
            net.cell(redex.right.0).name.clone(),
            redex.right.1,
        ),
        net_hash: net_hash(reduct),
    }
}

/// Reduces under the chosen strategy within the budget.
pub fn normalize(
    net: &Net,
    strategy: Strategy,
    budget: Budget,
    mode: Mode,
) -> Result<(Outcome, Vec<TraceStep>), ReduceError> {
    let report = net.validate(mode);
    if !report.is_empty() {
        return Err(NetError::Invalid(report).into());
    }
    match strategy {
        Strategy::Leftmost | Strategy::SeededRandom(_) => {
            let mut rng = match strategy {
                Strategy::SeededRandom(seed) => Some(rand_chacha::ChaCha8Rng::seed_from_u64(seed)),
                _ => None,
            };
            let mut cur = net.clone();
            let mut trace = Vec::new();
            for step in 0..budget.max_steps {
                let redexes = find_redexes(&cur, mode);
                if redexes.is_empty() {
                    return Ok((Outcome::Normal(vec![cur]), trace));
                }
                let pick = match &mut rng {
                    Some(r) => redexes[r.gen_range(0..redexes.len())],
                    None => redexes[0],
                };
                let next = apply_redex(&cur, &pick)?;
                trace.push(trace_step(&cur, step, &pick, &next));
                cur = next;
            }
            Ok((
                Outcome::BudgetExhausted {
                    frontier: vec![cur],
                },
                trace,
            ))
        }
        Strategy::ExhaustiveBfs => {
            let mut visited: BTreeSet<String> = BTreeSet::new();
            let mut normal_forms: BTreeMap<String, Net> = BTreeMap::new();
            let mut frontier_cut: Vec<Net> = Vec::new();
            let mut states = 0usize;
            // depth-first with an explicit stack carrying the path keys
            fn dfs(
                cur: &Net,
                mode: Mode,
                path: &mut Vec<String>,
                visited: &mut BTreeSet<String>,
                normal_forms: &mut BTreeMap<String, Net>,
                frontier_cut: &mut Vec<Net>,
                states: &mut usize,
                budget: &Budget,
            ) -> Result<Option<Net>, ReduceError> {
                let key = canonical_key(cur);
                if path.contains(&key) {
                    return Ok(Some(cur.clone()));
                }
                if visited.contains(&key) {
                    return Ok(None);
                }
                visited.insert(key.clone());
                *states += 1;
                if *states > budget.max_states {
                    frontier_cut.push(cur.clone());
                    return Ok(None);
                }
                let redexes = find_redexes(cur, mode);
                if redexes.is_empty() {
                    normal_forms.insert(key, cur.clone());
                    return Ok(None);
                }
                path.push(key);
                for r in redexes {
                    let next = apply_redex(cur, &r)?;
                    if let Some(w) = dfs(
                        &next,
                        mode,
                        path,
                        visited,
                        normal_forms,
                        frontier_cut,
                        states,
                        budget,
                    )? {
                        path.pop();
                        return Ok(Some(w));
                    }
                }
                path.pop();
                Ok(None)
            }
            let mut path = Vec::new();
            if let Some(w) = dfs(
                net,
                mode,
                &mut path,
                &mut visited,
                &mut normal_forms,
                &mut frontier_cut,
                &mut states,
                &budget,
            )? {
                return Ok((Outcome::CycleDetected { witness: w }, Vec::new()));
            }
            if !frontier_cut.is_empty() {
                return Ok((
                    Outcome::BudgetExhausted {
                        frontier: frontier_cut,
                    },
                    Vec::new(),
                ));
            }
            Ok((
                Outcome::Normal(normal_forms.into_values().collect()),
                Vec::new(),
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::iso::{isomorphic, isomorphic_brute};
    use crate::net::parse::parse_net;
    use crate::net::Label;

    fn gg_free_net() -> Net {
        parse_net(
            "net gg\ncell G : gamma\ncell H : gamma\nwire G.p1 -- H.p1\n\
             free a = G.a1\nfree b = G.a2\nfree c = H.a1\nfree d = H.a2\n",
            Mode::Core,
        )
        .unwrap()
    }

    #[test]
    fn gg_annihilation_crossed() {
        let n = gg_free_net();
        let rs = find_redexes(&n, Mode::Core);
        assert_eq!(rs.len(), 1);
        assert_eq!(rs[0].kind, RedexKind::Gg);
        let out = apply_redex(&n, &rs[0]).unwrap();
        assert!(out.validate(Mode::Core).is_empty());
        assert_eq!(out.cells.len(), 0);
        assert_eq!(out.labels(), n.labels());
        // expected: a -- d and b -- c (crossed)
        let expected = parse_net("net e\nfree a = @d\nfree b = @c\n", Mode::Core).unwrap();
        assert!(isomorphic(&out, &expected));
        assert!(isomorphic_brute(&out, &expected));
        assert!(out.wire_count() < n.wire_count());
    }

    #[test]
    fn dd_annihilation_caps_the_dead_groups() {
        let n = parse_net(
            "net dd\ncell A : delta2\ncell B : delta2\nwire A.p1 -- B.p1\n\
             free a1 = A.a1\nfree a2 = A.a2\nfree a3 = A.a3\nfree a4 = A.a4\nfree ap = A.p2\n\
             free b1 = B.a1\nfree b2 = B.a2\nfree b3 = B.a3\nfree b4 = B.a4\nfree bp = B.p2\n",
            Mode::Core,
        )
        .unwrap();
        let rs = find_redexes(&n, Mode::Core);
        assert_eq!(rs.len(), 1);
        let out = apply_redex(&n, &rs[0]).unwrap();
        assert!(out.validate(Mode::Core).is_empty());
        // both cells die; six caps appear
        assert_eq!(out.cells.len(), 6);
        assert!(out.cells.iter().all(|c| c.kind == CellKind::Epsilon));
        assert_eq!(out.labels(), n.labels());
        // engaged pairs joined straight: a1--b1, a2--b2
        let expected = parse_net(
            "net x\nfree a1 = @b1\nfree a2 = @b2\n\
             cell e1 : epsilon\ncell e2 : epsilon\ncell e3 : epsilon\n\
             cell e4 : epsilon\ncell e5 : epsilon\ncell e6 : epsilon\n\
             free a3 = e1.p1\nfree a4 = e2.p1\nfree ap = e3.p1\n\
             free b3 = e4.p1\nfree b4 = e5.p1\nfree bp = e6.p1\n",
            Mode::Core,
        )
        .unwrap();
        assert!(isomorphic(&out, &expected));
    }

    #[test]
    fn gd_duplicates_through_the_gamma() {
        let n = parse_net(
            "net gd\ncell G : gamma\ncell D : delta2\nwire G.p1 -- D.p1\n\
             free g1 = G.a1\nfree g2 = G.a2\n\
             free d1 = D.a1\nfree d2 = D.a2\nfree d3 = D.a3\nfree d4 = D.a4\nfree dp = D.p2\n",
            Mode::Core,
        )
        .unwrap();
        let rs = find_redexes(&n, Mode::Core);
        assert_eq!(rs.len(), 1);
        assert_eq!(rs[0].kind, RedexKind::Gd);
        let out = apply_redex(&n, &rs[0]).unwrap();
        assert!(out.validate(Mode::Core).is_empty());
        let deltas = out
            .cells
            .iter()
            .filter(|c| c.kind == CellKind::Delta2)
            .count();
        let gammas = out
            .cells
            .iter()
            .filter(|c| c.kind == CellKind::Gamma)
            .count();
        assert_eq!((deltas, gammas), (2, 5));
        assert_eq!(out.labels(), n.labels());
    }

    #[test]
    fn normal_form_has_no_successors() {
        let n = parse_net("net e\ncell E : epsilon\nfree x = E.p1\n", Mode::Core).unwrap();
        assert!(successors(&n, Mode::Core).unwrap().is_empty());
        let (o, trace) = normalize(&n, Strategy::Leftmost, Budget::default(), Mode::Core).unwrap();
        assert!(trace.is_empty());
        match o {
            Outcome::Normal(nf) => assert!(isomorphic(&nf[0], &n)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn extension_erasure_rules() {
        let n = parse_net(
            "net ge\ncell G : gamma\ncell E : epsilon\nwire G.p1 -- E.p1\n\
             free a = G.a1\nfree b = G.a2\n",
            Mode::Extension,
        )
        .unwrap();
        assert!(find_redexes(&n, Mode::Core).is_empty());
        let rs = find_redexes(&n, Mode::Extension);
        assert_eq!(rs.len(), 1);
        assert_eq!(rs[0].kind, RedexKind::GeExt);
        let out = apply_redex(&n, &rs[0]).unwrap();
        // gamma-count decreases even though the total stays flat
        assert_eq!(out.cells.len(), 2);
        assert!(out.cells.iter().all(|c| c.kind == CellKind::Epsilon));
    }

    #[test]
    fn de_demotes_delta2() {
        let n = parse_net(
            "net de\ncell D : delta2\ncell E : epsilon\nwire D.p1 -- E.p1\n\
             free a = D.a1\nfree b = D.a2\nfree c = D.a3\nfree d = D.a4\nfree p = D.p2\n",
            Mode::Extension,
        )
        .unwrap();
        let rs = find_redexes(&n, Mode::Extension);
        assert_eq!(rs.len(), 1);
        assert_eq!(rs[0].kind, RedexKind::DeExt);
        let out = apply_redex(&n, &rs[0]).unwrap();
        assert!(out.validate(Mode::Extension).is_empty());
        assert_eq!(
            out.cells
                .iter()
                .filter(|c| c.kind == CellKind::Delta1)
                .count(),
            1
        );
        assert_eq!(out.labels(), n.labels());
    }

    #[test]
    fn stale_redex_rejected() {
        let n = gg_free_net();
        let rs = find_redexes(&n, Mode::Core);
        let out = apply_redex(&n, &rs[0]).unwrap();
        assert!(matches!(
            apply_redex(&out, &rs[0]),
            Err(ReduceError::StaleRedex)
        ));
    }

    #[test]
    fn self_facing_delta_annihilates_into_wires() {
        let n = parse_net(
            "net sd\ncell D : delta2\nwire D.p1 -- D.p2\n\
             free a = D.a1\nfree b = D.a2\nfree c = D.a3\nfree d = D.a4\n",
            Mode::Core,
        )
        .unwrap();
        let rs = find_redexes(&n, Mode::Core);
        assert_eq!(rs.len(), 1);
        let out = apply_redex(&n, &rs[0]).unwrap();
        assert!(out.validate(Mode::Core).is_empty());
        assert_eq!(out.cells.len(), 0);
        let expected = parse_net("net x\nfree a = @c\nfree b = @d\n", Mode::Core).unwrap();
        assert!(isomorphic(&out, &expected));
    }

    #[test]
    fn labels_preserved_by_every_rule_on_random_nets() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut tried = 0;
        for _ in 0..200 {
            let n = crate::analysis::corpus::random_net(&mut rng, 3);
            for r in find_redexes(&n, Mode::Extension) {
                let out = apply_redex(&n, &r).unwrap();
                assert!(out.validate(Mode::Extension).is_empty());
                assert_eq!(out.labels(), n.labels());
                if r.kind == RedexKind::Gg {
                    assert!(out.wire_count() < n.wire_count());
                }
                tried += 1;
            }
        }
        assert!(tried > 20, "corpus produced too few redexes: {tried}");
    }
}
