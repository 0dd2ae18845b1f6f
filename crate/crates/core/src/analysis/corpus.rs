//! Deterministic test corpus: the three walkthrough nets, exhaustive
//! small iso-classes, and seeded random nets.
//!
//! Exhausting every net with up to three cells is not tractable (the
//! wirings of 18 ports alone reach into the billions), so the
//! generated families are: every class with at most one cell, every
//! two-cell class over small port budgets, every redex-bearing
//! two-cell pattern with a bounded number of extra internal wires,
//! and seeded random nets with up to five cells.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::net::iso::canonical_key;
use crate::net::parse::parse_net;
use crate::net::{CellKind, Label, Mode, Net, PortId, Wire};

/// The single-token routing example: two facing gammas, one eraser;
/// a token in at `p1` leaves at `p3`, one in at `p2` jams.
pub const FIG_ROUTING: &str = "net routing
cell G1 : gamma
cell G2 : gamma
cell E : epsilon
wire G1.p1 -- G2.p1
wire G2.a1 -- E.p1
free p1 = G1.a1
free p2 = G1.a2
free p3 = G2.a2
";

/// The worked reduction example: two duplicators facing each other,
/// one gamma loop fed by a duplicator port, nine free ports. Exactly
/// one duplicator redex; viciously circular until it is fired.
pub const FIG_WORKED: &str = "net worked
cell A : delta2
cell B : delta2
cell C : gamma
wire A.p1 -- B.p1
wire C.p1 -- C.a1
wire A.p2 -- C.a2
free a1 = A.a1
free a2 = A.a2
free a3 = A.a3
free a4 = A.a4
free b1 = B.a1
free b2 = B.a2
free b3 = B.a3
free b4 = B.a4
free bp = B.p2
";

/// Three duplicators in a cycle of principal ports; all auxiliary
/// ports free. Three pairwise different reducts.
pub const FIG_TRIANGLE: &str = "net triangle
cell D1 : delta2
cell D2 : delta2
cell D3 : delta2
wire D1.p1 -- D2.p2
wire D2.p1 -- D3.p2
wire D3.p1 -- D1.p2
free a1 = D1.a1
free a2 = D1.a2
free a3 = D1.a3
free a4 = D1.a4
free b1 = D2.a1
free b2 = D2.a2
free b3 = D2.a3
free b4 = D2.a4
free c1 = D3.a1
free c2 = D3.a2
free c3 = D3.a3
free c4 = D3.a4
";

pub fn fig_routing() -> Net {
    parse_net(FIG_ROUTING, Mode::Core).unwrap()
}

pub fn fig_worked() -> Net {
    parse_net(FIG_WORKED, Mode::Core).unwrap()
}

pub fn fig_triangle() -> Net {
    parse_net(FIG_TRIANGLE, Mode::Core).unwrap()
}

/// A duplicator feeding the smallest gamma loop: the canonical
/// diverging net (never terminates, never reaches a quiet state).
pub const FED_LOOP: &str = "net fedloop
cell G : gamma
cell D : delta2
wire G.p1 -- G.a1
wire D.p1 -- G.a2
free a = D.p2
free b = D.a1
free c = D.a2
free d = D.a3
free e = D.a4
";

pub fn fed_loop() -> Net {
    parse_net(FED_LOOP, Mode::Core).unwrap()
}

pub const SINGLE_EPSILON: &str = "net eps\ncell E : epsilon\nfree x = E.p1\n";

pub fn single_epsilon() -> Net {
    parse_net(SINGLE_EPSILON, Mode::Core).unwrap()
}

fn kinds_core() -> [CellKind; 3] {
    [CellKind::Gamma, CellKind::Delta2, CellKind::Epsilon]
}

/// Enumerates every partial matching of `ports`, bounded by
/// `max_wires` internal wires, and hands each to `emit`.
fn matchings(
    ports: &[PortId],
    max_wires: usize,
    current: &mut Vec<Wire>,
    used: &mut Vec<bool>,
    emit: &mut impl FnMut(&[Wire]),
) {
    let Some(i) = (0..ports.len()).find(|&i| !used[i]) else {
        emit(current);
        return;
    };
    // leave it free
    used[i] = true;
    matchings(ports, max_wires, current, used, emit);
    // or wire it to a later unused port
    if current.len() < max_wires {
        for j in i + 1..ports.len() {
            if used[j] {
                continue;
            }
            used[j] = true;
            current.push(Wire::new(ports[i], ports[j]));
            matchings(ports, max_wires, current, used, emit);
            current.pop();
            used[j] = false;
        }
    }
    used[i] = false;
}

/// The cell ports a kind list will allocate, without building frees.
fn cell_ports(kinds: &[CellKind]) -> Vec<PortId> {
    let mut n = Net::new("probe");
    for (i, k) in kinds.iter().enumerate() {
        n.add_cell(format!("c{i}"), *k);
    }
    let mut out = Vec::new();
    for c in &n.cells {
        for (_, p) in c.ports() {
            out.push(p);
        }
    }
    out
}

/// Builds a net from a cell-kind list and an internal wiring over the
/// cell ports; the remaining cell ports become labelled free ports.
fn assemble(kinds: &[CellKind], wires: &[Wire]) -> Net {
    let mut n = Net::new("gen");
    for (i, k) in kinds.iter().enumerate() {
        n.add_cell(format!("c{i}"), *k);
    }
    let mut wired: Vec<PortId> = Vec::new();
    for w in wires {
        n.add_wire(w.0, w.1);
        wired.push(w.0);
        wired.push(w.1);
    }
    let mut li = 0;
    let cells = n.cells.clone();
    for c in &cells {
        for (_, p) in c.ports() {
            if !wired.contains(&p) {
                n.add_free(Label::new(format!("l{li}")), p);
                li += 1;
            }
        }
    }
    n
}

fn dedupe(nets: Vec<Net>) -> Vec<Net> {
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    for n in nets {
        if n.validate(Mode::Core).is_empty() && seen.insert(canonical_key(&n)) {
            out.push(n);
        }
    }
    out
}

/// Every class with zero or one core cell.
pub fn one_cell_classes() -> Vec<Net> {
    let mut out = vec![Net::new("empty")];
    for k in kinds_core() {
        let ports = cell_ports(&[k]);
        let mut emit = |wires: &[Wire]| {
            out.push(assemble(&[k], wires));
        };
        let mut used = vec![false; ports.len()];
        matchings(&ports, 3, &mut Vec::new(), &mut used, &mut emit);
    }
    dedupe(out)
}

/// Two-cell classes: exhaustive for small kind pairs, and bounded
/// extra wiring around a forced principal-principal redex for
/// gamma/duplicator and duplicator/duplicator.
pub fn two_cell_classes() -> Vec<Net> {
    let mut out = Vec::new();
    let pairs = [
        (CellKind::Gamma, CellKind::Gamma, 3),
        (CellKind::Gamma, CellKind::Epsilon, 2),
        (CellKind::Epsilon, CellKind::Epsilon, 1),
        (CellKind::Delta2, CellKind::Epsilon, 3),
    ];
    for (a, b, maxw) in pairs {
        let kinds = [a, b];
        let ports = cell_ports(&kinds);
        let mut emit = |wires: &[Wire]| out.push(assemble(&kinds, wires));
        let mut used = vec![false; ports.len()];
        matchings(&ports, maxw, &mut Vec::new(), &mut used, &mut emit);
    }
    // redex-bearing gamma/duplicator and duplicator/duplicator
    for kinds in [
        [CellKind::Gamma, CellKind::Delta2],
        [CellKind::Delta2, CellKind::Delta2],
    ] {
        let mut probe = Net::new("probe");
        for (i, k) in kinds.iter().enumerate() {
            probe.add_cell(format!("c{i}"), *k);
        }
        let pa = probe.cells[0].principal[0];
        let pb = probe.cells[1].principal[0];
        let rest: Vec<PortId> = cell_ports(&kinds)
            .into_iter()
            .filter(|p| *p != pa && *p != pb)
            .collect();
        let mut emit = |wires: &[Wire]| {
            let mut all = vec![Wire::new(pa, pb)];
            all.extend_from_slice(wires);
            out.push(assemble(&kinds, &all));
        };
        let mut used = vec![false; rest.len()];
        matchings(&rest, 2, &mut Vec::new(), &mut used, &mut emit);
    }
    dedupe(out)
}

/// A seeded random net over the core kinds.
pub fn random_net<R: Rng>(rng: &mut R, max_cells: usize) -> Net {
    let n_cells = rng.gen_range(0..=max_cells);
    let kinds: Vec<CellKind> = (0..n_cells)
        .map(|_| *kinds_core().choose(rng).unwrap())
        .collect();
    let mut ports = cell_ports(&kinds);
    ports.shuffle(rng);
    let mut wires = Vec::new();
    let mut i = 0;
    while i + 1 < ports.len() {
        if rng.gen_bool(0.55) {
            wires.push(Wire::new(ports[i], ports[i + 1]));
            i += 2;
        } else {
            i += 1;
        }
    }
    assemble(&kinds, &wires)
}

/// Rebuilds an isomorphic copy with permuted cells and fresh port
/// numbers; used to exercise the canonical form.
pub fn shuffle_net<R: Rng>(rng: &mut R, net: &Net) -> Net {
    let mut order: Vec<usize> = (0..net.cells.len()).collect();
    order.shuffle(rng);
    let mut out = Net::new(net.name.clone());
    let mut port_map = std::collections::BTreeMap::new();
    for &i in &order {
        let c = &net.cells[i];
        let id = out.add_cell(c.name.clone(), c.kind);
        let fresh = out.cell(id).clone();
        for (sel, old) in c.ports() {
            port_map.insert(old, fresh.port(sel));
        }
    }
    for (l, p) in &net.free {
        let fresh = out.add_free_port(l.clone());
        port_map.insert(*p, fresh);
    }
    for w in &net.wires {
        let a = *port_map.entry(w.0).or_insert_with(|| out.alloc_port());
        let b = *port_map.entry(w.1).or_insert_with(|| out.alloc_port());
        out.add_wire(a, b);
    }
    out
}

/// Nets with at least one redex, for the per-rule equivalence suite.
pub fn redex_corpus() -> Vec<Net> {
    let mut out: Vec<Net> = two_cell_classes()
        .into_iter()
        .filter(|n| !crate::reduction::find_redexes(n, Mode::Core).is_empty())
        .collect();
    out.push(fig_routing());
    out.push(fig_worked());
    out.push(fig_triangle());
    dedupe(out)
}
