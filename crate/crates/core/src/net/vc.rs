//! Vicious circles: cycles that enter each `gamma` cell at an
//! auxiliary port and leave through its principal port, hopping over
//! wires only.
//!
//! A detected cycle carries a feeder witness: the duplicator cells
//! whose principal-port wires reach the cycle through aux-entry hops.
//! A token emitted at such a duplicator ends up orbiting the cycle
//! forever, so the divergence predicates ([`crate::analysis`]) treat a
//! net as viciously circular only when some cycle is fed; an unfed
//! cycle is inert because no token can ever reach it.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{CellId, CellKind, Endpoint, LinkNet, Net, PortSel};

/// One directed cycle through `gamma` cells, with the aux port used to
/// enter each cell, plus the cells witnessing that a duplicator feeds
/// the cycle (empty when nothing does).
#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
pub struct ViciousCircle {
    /// `(cell, entry aux index)` around the cycle.
    pub cycle: Vec<(CellId, u8)>,
    /// Duplicator cells plus the gamma cells on a feeding path.
    pub witness_tree: BTreeSet<CellId>,
}

impl ViciousCircle {
    pub fn is_fed(&self) -> bool {
        !self.witness_tree.is_empty()
    }
}

/// From a gamma cell's principal port, where does the wire lead?
/// Returns the aux entry `(cell, aux index)` if it reaches a gamma aux.
fn prin_to_gamma_aux(ln: &LinkNet, c: CellId) -> Option<(CellId, u8)> {
    let e = Endpoint::Cell {
        cell: c,
        sel: PortSel::Prin(0),
    };
    let link = ln.link_of(&e)?;
    let ends = ln.ends(link);
    let other = if ends[0] == e { &ends[1] } else { &ends[0] };
    match other {
        Endpoint::Cell { cell, sel: PortSel::Aux(j) } if ln.cell(*cell).kind == CellKind::Gamma => {
            Some((*cell, *j))
        }
        _ => None,
    }
}

/// Every elementary gamma cycle, deduplicated by rotation, each with
/// its feeder witness.
pub fn detect_vicious_circles(net: &Net) -> Vec<ViciousCircle> {
    let ln = LinkNet::build(net);
    detect_in_links(&ln)
}

pub fn detect_in_links(ln: &LinkNet) -> Vec<ViciousCircle> {
    // successor[g] = (h, j): g's principal wire enters gamma h at aux j.
    let mut succ: BTreeMap<CellId, (CellId, u8)> = BTreeMap::new();
    for c in ln.cell_ids() {
        if ln.cell(c).kind == CellKind::Gamma {
            if let Some(hit) = prin_to_gamma_aux(ln, c) {
                succ.insert(c, hit);
            }
        }
    }
    // Each gamma has at most one successor, so cycles are the rho-shaped
    // tails of the functional graph.
    let mut cycles: Vec<Vec<(CellId, u8)>> = Vec::new();
    let mut seen_cycle_members: BTreeSet<CellId> = BTreeSet::new();
    for start in succ.keys().copied() {
        if seen_cycle_members.contains(&start) {
            continue;
        }
        let mut path: Vec<CellId> = vec![start];
        let mut pos: BTreeMap<CellId, usize> = BTreeMap::new();
        pos.insert(start, 0);
        let mut cur = start;
        while let Some(&(next, _)) = succ.get(&cur) {
            if let Some(&i) = pos.get(&next) {
                // cycle: path[i..]
                let members: Vec<CellId> = path[i..].to_vec();
                if members.iter().any(|m| seen_cycle_members.contains(m)) {
                    break;
                }
                let mut cyc = Vec::new();
                for k in 0..members.len() {
                    let from = members[k];
                    let (to, j) = succ[&from];
                    debug_assert_eq!(to, members[(k + 1) % members.len()]);
                    cyc.push((to, j));
                }
                // rotate so the least cell leads
                let lead = cyc
                    .iter()
                    .enumerate()
                    .min_by_key(|(_, (c, j))| (*c, *j))
                    .map(|(i, _)| i)
                    .unwrap();
                cyc.rotate_left(lead);
                for (c, _) in &cyc {
                    seen_cycle_members.insert(*c);
                }
                cycles.push(cyc);
                break;
            }
            pos.insert(next, path.len());
            path.push(next);
            cur = next;
        }
    }
    cycles.sort();
    cycles
        .into_iter()
        .map(|cycle| {
            let witness_tree = feeders(ln, &cycle);
            ViciousCircle { cycle, witness_tree }
        })
        .collect()
}

/// Duplicator principal ports whose wire reaches the cycle through
/// push-only hops (entering gammas at aux ports and leaving at their
/// principal ports). Returns the feeding cells, or empty.
fn feeders(ln: &LinkNet, cycle: &[(CellId, u8)]) -> BTreeSet<CellId> {
    let on_cycle: BTreeSet<CellId> = cycle.iter().map(|(c, _)| *c).collect();
    let mut witness = BTreeSet::new();
    for c in ln.cell_ids() {
        let kind = ln.cell(c).kind;
        if !kind.is_delta() {
            continue;
        }
        for k in 0..kind.coarity() {
            let mut path: Vec<CellId> = vec![c];
            let mut at = Endpoint::Cell {
                cell: c,
                sel: PortSel::Prin(k as u8),
            };
            let mut guard = 0;
            loop {
                guard += 1;
                if guard > ln.cells.len() + 2 {
                    break;
                }
                let Some(link) = ln.link_of(&at) else { break };
                let ends = ln.ends(link);
                let other = if ends[0] == at { &ends[1] } else { &ends[0] };
                match other {
                    Endpoint::Cell { cell: g, sel: PortSel::Aux(_) }
                        if ln.cell(*g).kind == CellKind::Gamma =>
                    {
                        if on_cycle.contains(g) {
                            witness.extend(path.iter().copied());
                            witness.insert(*g);
                            break;
                        }
                        path.push(*g);
                        at = Endpoint::Cell {
                            cell: *g,
                            sel: PortSel::Prin(0),
                        };
                    }
                    _ => break,
                }
            }
        }
    }
    witness
}

/// Whether the net counts as viciously circular for the termination
/// predicates: some cycle is fed by a duplicator.
pub fn in_vc(net: &Net) -> bool {
    detect_vicious_circles(net).iter().any(|c| c.is_fed())
}

/// Oracle for tests: enumerate all aux-to-principal walks up to the
/// cell count and report whether any closes into a cycle.
pub fn has_cycle_brute(net: &Net) -> bool {
    let ln = LinkNet::build(net);
    let gammas: Vec<CellId> = ln
        .cell_ids()
        .filter(|c| ln.cell(*c).kind == CellKind::Gamma)
        .collect();
    for &start in &gammas {
        let mut cur = start;
        for _ in 0..=gammas.len() {
            match prin_to_gamma_aux(&ln, cur) {
                Some((next, _)) => {
                    if next == start {
                        return true;
                    }
                    cur = next;
                }
                None => break,
            }
        }
    }
    false
}
