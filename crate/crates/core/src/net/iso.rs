//! Canonical forms and isomorphism for nets.
//!
//! Isomorphism is a kind-preserving bijection on cells plus a
//! label-preserving correspondence of free ports, with wires compared
//! up to connector collapsing (a chain of connector ports counts as a
//! single wire). The canonical form anchors a breadth-first numbering
//! at the sorted free-port labels; closed components fall back to a
//! minimal-seed search.

use std::collections::{BTreeMap, VecDeque};

use super::{CellId, Endpoint, LinkNet, Net, PortSel};

fn endpoint_desc(e: &Endpoint, index: &BTreeMap<u32, usize>) -> String {
    match e {
        Endpoint::Free { label } => format!("f:{label}"),
        Endpoint::Cell { cell, sel } => match index.get(&cell.0) {
            Some(i) => format!("c{i}.{}", sel.display()),
            None => "c?.?".to_string(),
        },
    }
}

fn bfs_assign(ln: &LinkNet, seeds: &[CellId], index: &mut BTreeMap<u32, usize>, order: &mut Vec<usize>) {
    let mut queue: VecDeque<CellId> = VecDeque::new();
    for s in seeds {
        if !index.contains_key(&s.0) {
            index.insert(s.0, order.len());
            order.push(s.0 as usize);
            queue.push_back(*s);
        }
    }
    while let Some(c) = queue.pop_front() {
        let cell = ln.cell(c);
        let sels: Vec<PortSel> = (0..cell.kind.coarity())
            .map(|k| PortSel::Prin(k as u8))
            .chain((0..cell.kind.arity()).map(|j| PortSel::Aux(j as u8)))
            .collect();
        for sel in sels {
            let e = Endpoint::Cell { cell: c, sel };
            let Some(l) = ln.link_of(&e) else { continue };
            let ends = ln.ends(l);
            for other in ends {
                if let Endpoint::Cell { cell: oc, .. } = other {
                    if !index.contains_key(&oc.0) {
                        index.insert(oc.0, order.len());
                        order.push(oc.0 as usize);
                        queue.push_back(*oc);
                    }
                }
            }
        }
    }
}

fn describe(ln: &LinkNet, index: &BTreeMap<u32, usize>, order: &[usize]) -> String {
    let mut parts: Vec<String> = Vec::new();
    parts.push(format!("loops:{}", ln.closed_loops));
    let mut labels: Vec<_> = ln.free_labels().into_iter().collect();
    labels.sort();
    for l in labels {
        let e = Endpoint::Free { label: l.clone() };
        let link = ln.link_of(&e).expect("free label has a link");
        let ends = ln.ends(link);
        let other = if ends[0] == e { &ends[1] } else { &ends[0] };
        parts.push(format!("free {l} -> {}", endpoint_desc(other, index)));
    }
    for (rank, &orig) in order.iter().enumerate() {
        let c = CellId(orig as u32);
        let cell = ln.cell(c);
        let mut row = format!("cell c{rank} {}:", cell.kind.name());
        for k in 0..cell.kind.coarity() {
            let sel = PortSel::Prin(k as u8);
            row.push_str(&port_desc(ln, c, sel, index));
        }
        for j in 0..cell.kind.arity() {
            let sel = PortSel::Aux(j as u8);
            row.push_str(&port_desc(ln, c, sel, index));
        }
        parts.push(row);
    }
    parts.join(";")
}

fn port_desc(ln: &LinkNet, c: CellId, sel: PortSel, index: &BTreeMap<u32, usize>) -> String {
    let e = Endpoint::Cell { cell: c, sel };
    match ln.link_of(&e) {
        None => format!(" {}->(unwired)", sel.display()),
        Some(l) => {
            let ends = ln.ends(l);
            // A port may be wired to the *same* endpoint twice only via
            // distinct links; pick the other end of this link.
            let other = if ends[0] == e { &ends[1] } else { &ends[0] };
            format!(" {}->{}", sel.display(), endpoint_desc(other, index))
        }
    }
}

/// Canonical ordering of the original cell indices.
pub fn canonical_cell_order(net: &Net) -> Vec<usize> {
    let ln = LinkNet::build(net);
    canonical_cell_order_ln(&ln)
}

fn canonical_cell_order_ln(ln: &LinkNet) -> Vec<usize> {
    let mut index: BTreeMap<u32, usize> = BTreeMap::new();
    let mut order: Vec<usize> = Vec::new();
    // Anchored sweep from sorted free labels.
    let mut labels: Vec<_> = ln.free_labels().into_iter().collect();
    labels.sort();
    let mut seeds: Vec<CellId> = Vec::new();
    for l in &labels {
        let e = Endpoint::Free { label: l.clone() };
        if let Some(link) = ln.link_of(&e) {
            for end in ln.ends(link) {
                if let Endpoint::Cell { cell, .. } = end {
                    seeds.push(*cell);
                }
            }
        }
    }
    bfs_assign(ln, &seeds, &mut index, &mut order);
    // Closed components: try every unassigned cell as seed, take the
    // lexicographically least component description.
    loop {
        let unassigned: Vec<CellId> = ln
            .cell_ids()
            .filter(|c| !index.contains_key(&c.0))
            .collect();
        if unassigned.is_empty() {
            break;
        }
        let mut best: Option<(String, Vec<usize>, BTreeMap<u32, usize>)> = None;
        for seed in &unassigned {
            let mut idx = index.clone();
            let mut ord = order.clone();
            bfs_assign(ln, &[*seed], &mut idx, &mut ord);
            let desc = describe(ln, &idx, &ord);
            if best.as_ref().map(|(d, _, _)| desc < *d).unwrap_or(true) {
                best = Some((desc, ord, idx));
            }
        }
        let (_, ord, idx) = best.unwrap();
        order = ord;
        index = idx;
    }
    order
}

/// A canonical textual key: two nets get equal keys iff they are
/// isomorphic (up to connector collapsing).
pub fn canonical_key(net: &Net) -> String {
    let ln = LinkNet::build(net);
    let order = canonical_cell_order_ln(&ln);
    let index: BTreeMap<u32, usize> = order
        .iter()
        .enumerate()
        .map(|(i, &orig)| (orig as u32, i))
        .collect();
    describe(&ln, &index, &order)
}

pub fn isomorphic(a: &Net, b: &Net) -> bool {
    canonical_key(a) == canonical_key(b)
}

/// Brute-force oracle: searches all kind-preserving cell bijections.
/// Exponential; for tests on small nets only.
pub fn isomorphic_brute(a: &Net, b: &Net) -> bool {
    let la = LinkNet::build(a);
    let lb = LinkNet::build(b);
    if la.closed_loops != lb.closed_loops || la.cells.len() != lb.cells.len() {
        return false;
    }
    if la.free_labels() != lb.free_labels() {
        return false;
    }
    let n = la.cells.len();
    let mut perm: Vec<Option<usize>> = vec![None; n];
    let mut used = vec![false; n];
    fn links_match(la: &LinkNet, lb: &LinkNet, perm: &[Option<usize>]) -> bool {
        // Check every fully-mapped link of a against b.
        let map_end = |e: &Endpoint| -> Option<Endpoint> {
            match e {
                Endpoint::Free { label } => Some(Endpoint::Free { label: label.clone() }),
                Endpoint::Cell { cell, sel } => perm[cell.0 as usize].map(|m| Endpoint::Cell {
                    cell: CellId(m as u32),
                    sel: *sel,
                }),
            }
        };
        let mut need: Vec<[Endpoint; 2]> = Vec::new();
        for l in &la.links {
            if let (Some(x), Some(y)) = (map_end(&l[0]), map_end(&l[1])) {
                let mut pair = [x, y];
                pair.sort();
                need.push(pair);
            }
        }
        let mut have: Vec<[Endpoint; 2]> = lb
            .links
            .iter()
            .map(|l| {
                let mut pair = l.clone();
                pair.sort();
                pair
            })
            .collect();
        need.sort();
        have.sort();
        // every needed link must exist in b
        let mut i = 0;
        for n in need {
            while i < have.len() && have[i] < n {
                i += 1;
            }
            if i >= have.len() || have[i] != n {
                return false;
            }
            i += 1;
        }
        true
    }
    fn rec(
        la: &LinkNet,
        lb: &LinkNet,
        i: usize,
        perm: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
    ) -> bool {
        if i == perm.len() {
            // full check both directions
            return links_match(la, lb, perm) && la.links.len() == lb.links.len();
        }
        for j in 0..perm.len() {
            if used[j] || la.cells[i].kind != lb.cells[j].kind {
                continue;
            }
            perm[i] = Some(j);
            used[j] = true;
            if links_match(la, lb, perm) && rec(la, lb, i + 1, perm, used) {
                return true;
            }
            perm[i] = None;
            used[j] = false;
        }
        false
    }
    if n == 0 {
        return la.links == lb.links;
    }
    rec(&la, &lb, 0, &mut perm, &mut used)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::parse::parse_net;
    use crate::net::Mode;

    #[test]
    fn renamed_cells_are_isomorphic() {
        let a = parse_net(
            "net a\ncell X : gamma\nfree p = X.p1\nfree q = X.a1\nfree r = X.a2\n",
            Mode::Core,
        )
        .unwrap();
        let b = parse_net(
            "net b\ncell Y : gamma\nfree p = Y.p1\nfree q = Y.a1\nfree r = Y.a2\n",
            Mode::Core,
        )
        .unwrap();
        assert!(isomorphic(&a, &b));
        assert!(isomorphic_brute(&a, &b));
    }

    #[test]
    fn label_swap_breaks_isomorphism() {
        let a = parse_net(
            "net a\ncell X : gamma\nfree p = X.p1\nfree q = X.a1\nfree r = X.a2\n",
            Mode::Core,
        )
        .unwrap();
        let b = parse_net(
            "net b\ncell X : gamma\nfree p = X.p1\nfree r = X.a1\nfree q = X.a2\n",
            Mode::Core,
        )
        .unwrap();
        assert!(!isomorphic(&a, &b));
        assert!(!isomorphic_brute(&a, &b));
    }

    #[test]
    fn connector_subdivision_is_ignored() {
        let a = parse_net("net a\ncell E : epsilon\nfree x = E.p1\n", Mode::Core).unwrap();
        let mut b = parse_net("net b\ncell E : epsilon\nfree x = E.p1\n", Mode::Core).unwrap();
        // subdivide the wire in b with a connector
        let w = b.wires.pop().unwrap();
        let c = b.alloc_port();
        b.add_wire(w.0, c);
        b.add_wire(c, w.1);
        assert!(b.validate(Mode::Core).is_empty());
        assert!(isomorphic(&a, &b));
    }

    #[test]
    fn closed_components_canonicalize() {
        let a = parse_net(
            "net a\ncell X : epsilon\ncell Y : epsilon\nwire X.p1 -- Y.p1\n",
            Mode::Core,
        )
        .unwrap();
        let b = parse_net(
            "net b\ncell Y : epsilon\ncell X : epsilon\nwire Y.p1 -- X.p1\n",
            Mode::Core,
        )
        .unwrap();
        assert_eq!(canonical_key(&a), canonical_key(&b));
    }

    #[test]
    fn canonical_agrees_with_brute_on_random_pairs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..60 {
            let a = crate::analysis::corpus::random_net(&mut rng, 3);
            let mut b = crate::analysis::corpus::random_net(&mut rng, 3);
            if rng.gen_bool(0.5) {
                b = crate::analysis::corpus::shuffle_net(&mut rng, &a);
            }
            assert_eq!(
                isomorphic(&a, &b),
                isomorphic_brute(&a, &b),
                "canonical and brute-force disagree"
            );
        }
    }
}
