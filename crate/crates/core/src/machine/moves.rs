//! Internal move rules for marriage tokens.
//!
//! Every token has at most one enabled move:
//!
//! * a token that has not yet reached the far end of its link crosses
//!   the wire (the position name changes from the port it left to the
//!   port it faces);
//! * a token facing a gamma aux port traverses the cell, pushing `p`
//!   (first aux) or `q` (second) on its first stack and leaving by the
//!   principal port;
//! * a token facing a gamma principal port pops its first stack and
//!   leaves by an aux port, crossed: `p` exits the second aux, `q` the
//!   first;
//! * a token facing a duplicator port walks the cell's virtual-copy
//!   tree. Branch decisions pop routing symbols (the branch taken is
//!   the conjugate of the popped symbol). Reaching a copy married to
//!   another duplicator lets the token through: entering by an aux of
//!   the engaged pair records the aux index on the second stack and
//!   leaves by the principal port; entering by the principal port pops
//!   the index and leaves by that aux. Either way the branch path is
//!   pushed back on the first stack for the journey beyond. Unmarried
//!   or erased copies block.
//! * epsilon principal ports and free ports block.

use crate::lts::action::CellType;
use crate::net::{CellId, CellKind, Endpoint, LinkNet, PortSel};

use super::{Addr, Atom, Civil, MarriageTok, Pos, StatusView, Sym};

/// Result of walking a duplicator's copy tree with a token's first
/// stack.
pub(crate) enum Walk {
    Committed { path: Addr, pops: usize },
    /// Stopped with a branch pending and no routing symbol left: the
    /// token is face to face with a virtual merger gamma born of a
    /// fork, and a duplicator hunter may marry it.
    AtMergerFace,
    Blocked,
}

pub(crate) fn walk_tree(view: &StatusView, cell: CellId, prin: u8, gstack: &[Atom]) -> Walk {
    let mut addr: Addr = Vec::new();
    let mut pops = 0usize;
    loop {
        match view.civil(cell, prin, &addr) {
            None => return Walk::Blocked,
            Some(Civil::Married(CellType::Delta)) => {
                return Walk::Committed { path: addr, pops }
            }
            Some(Civil::Married(CellType::Epsilon)) => return Walk::Blocked,
            Some(Civil::Married(CellType::Gamma)) | Some(Civil::Single) => {
                if view.civil(cell, prin, &addr) == Some(Civil::Single)
                    && !view.has_children(cell, prin, &addr)
                {
                    return Walk::Blocked;
                }
                // descend: pop a routing symbol, take the conjugate branch
                match gstack.get(gstack.len().wrapping_sub(1 + pops)) {
                    Some(Atom::S(sym)) => {
                        addr.push(sym.conj());
                        pops += 1;
                    }
                    Some(Atom::N(_)) => return Walk::Blocked,
                    None => return Walk::AtMergerFace,
                }
            }
        }
    }
}

/// True when a token with the given first stack, heading into this
/// cell port, stops face to face with a virtual merger gamma.
pub(crate) fn faces_virtual_merger(
    view: &StatusView,
    cell: CellId,
    sel: PortSel,
    kind: CellKind,
    gstack: &[Atom],
) -> bool {
    if !kind.is_delta() {
        return false;
    }
    let pair = match sel {
        PortSel::Prin(k) => k,
        PortSel::Aux(j) => j / 2,
    };
    matches!(walk_tree(view, cell, pair, gstack), Walk::AtMergerFace)
}

fn exit(ln: &LinkNet, cell: CellId, sel: PortSel) -> Option<Pos> {
    let e = Endpoint::Cell { cell, sel };
    let link = ln.link_of(&e)?;
    let my_end = ln.end_index(link, &e);
    Some(Pos {
        link,
        toward: 1 - my_end,
        arrived: false,
    })
}

/// The unique enabled move of `t`, if any, in a context whose statuses
/// are `view`. Marriages are not moves.
pub fn token_move(ln: &LinkNet, view: &StatusView, t: &MarriageTok) -> Option<MarriageTok> {
    if !t.pos.arrived {
        let mut after = t.clone();
        after.pos.arrived = true;
        return Some(after);
    }
    let target = t.pos.target(ln).clone();
    let Endpoint::Cell { cell, sel } = target else {
        return None; // waiting at a free port
    };
    let kind = ln.cell(cell).kind;
    match (kind, sel) {
        (CellKind::Gamma, PortSel::Aux(j)) => {
            let mut after = t.clone();
            after
                .conf
                .g
                .push(Atom::S(if j == 0 { Sym::P } else { Sym::Q }));
            after.pos = exit(ln, cell, PortSel::Prin(0))?;
            Some(after)
        }
        (CellKind::Gamma, PortSel::Prin(_)) => {
            let mut after = t.clone();
            match after.conf.g.pop()? {
                Atom::S(Sym::P) => after.pos = exit(ln, cell, PortSel::Aux(1))?,
                Atom::S(Sym::Q) => after.pos = exit(ln, cell, PortSel::Aux(0))?,
                Atom::N(_) => return None,
            }
            Some(after)
        }
        (CellKind::Epsilon, _) => None,
        (dk, PortSel::Aux(j)) if dk.is_delta() => {
            let pair = j as usize / 2;
            let idx = j as usize % 2;
            match walk_tree(view, cell, pair as u8, &t.conf.g.0) {
                Walk::Blocked | Walk::AtMergerFace => None,
                Walk::Committed { path, pops } => {
                    let mut after = t.clone();
                    for _ in 0..pops {
                        after.conf.g.pop();
                    }
                    for sym in path.iter().rev() {
                        after.conf.g.push(Atom::S(*sym));
                    }
                    after.conf.d.push(Atom::N(idx as u64 + 1));
                    after.pos = exit(ln, cell, PortSel::Prin(pair as u8))?;
                    Some(after)
                }
            }
        }
        (dk, PortSel::Prin(k)) if dk.is_delta() => {
            match walk_tree(view, cell, k, &t.conf.g.0) {
                Walk::Blocked | Walk::AtMergerFace => None,
                Walk::Committed { path, pops } => {
                    // the branch index must sit right under the walk pops
                    let d_top = t.conf.d.top()?;
                    let Atom::N(idx1) = d_top else { return None };
                    let idx1 = *idx1;
                    if idx1 == 0 || idx1 > 2 {
                        return None;
                    }
                    let mut after = t.clone();
                    for _ in 0..pops {
                        after.conf.g.pop();
                    }
                    after.conf.d.pop();
                    for sym in path.iter().rev() {
                        after.conf.g.push(Atom::S(*sym));
                    }
                    let aux = 2 * k as usize + (idx1 as usize - 1);
                    after.pos = exit(ln, cell, PortSel::Aux(aux as u8))?;
                    Some(after)
                }
            }
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::{
        hunter, initial_state, leaving_free, Conf, MachineState, Origin, OriginSite, Stack, Token,
    };
    use crate::net::parse::parse_net;
    use crate::net::{Label, LinkNet, Mode};

    fn inject(ln: &LinkNet, label: &str, conf: Conf) -> MarriageTok {
        let l = Label::new(label);
        MarriageTok {
            pos: leaving_free(ln, &l).unwrap(),
            conf: conf.clone(),
            origin: Origin {
                site: OriginSite::Free { label: l },
                conf,
            },
        }
    }

    /// Two facing gammas; auxes to free ports; one aux of the second
    /// capped by an epsilon.
    fn routing_net() -> LinkNet {
        let n = parse_net(
            "net r\ncell G1 : gamma\ncell G2 : gamma\ncell E : epsilon\n\
             wire G1.p1 -- G2.p1\nwire G2.a1 -- E.p1\n\
             free p1 = G1.a1\nfree p2 = G1.a2\nfree p3 = G2.a2\n",
            Mode::Core,
        )
        .unwrap();
        LinkNet::build(&n)
    }

    fn run_to_rest(ln: &LinkNet, view: &StatusView, mut t: MarriageTok, cap: usize) -> MarriageTok {
        for _ in 0..cap {
            match token_move(ln, view, &t) {
                Some(n) => t = n,
                None => break,
            }
        }
        t
    }

    #[test]
    fn token_in_first_aux_exits_at_the_far_second_aux() {
        let ln = routing_net();
        let view = StatusView::of(&MachineState::default());
        let t = inject(&ln, "p1", Conf::empty());
        let done = run_to_rest(&ln, &view, t, 16);
        assert_eq!(
            done.pos.target(&ln),
            &Endpoint::Free {
                label: Label::new("p3")
            }
        );
        assert!(done.pos.arrived);
        assert!(done.conf.is_empty(), "stack restored after push/pop");
    }

    #[test]
    fn token_in_second_aux_gets_stuck_at_the_eraser() {
        let ln = routing_net();
        let view = StatusView::of(&MachineState::default());
        let t = inject(&ln, "p2", Conf::empty());
        let done = run_to_rest(&ln, &view, t, 16);
        match done.pos.target(&ln) {
            Endpoint::Cell { cell, .. } => {
                assert_eq!(ln.cell(*cell).kind, CellKind::Epsilon);
            }
            other => panic!("expected to stall at the eraser, at {other:?}"),
        }
        assert!(token_move(&ln, &view, &done).is_none());
    }

    #[test]
    fn gamma_aux_entry_pushes_one_symbol() {
        let ln = routing_net();
        let view = StatusView::of(&MachineState::default());
        let t = inject(&ln, "p1", Conf::empty());
        let t = token_move(&ln, &view, &t).unwrap(); // cross
        let t = token_move(&ln, &view, &t).unwrap(); // traverse aux1: push p
        assert_eq!(t.conf.g.0, vec![Atom::S(Sym::P)]);
    }

    #[test]
    fn unmarried_duplicator_blocks_both_sides() {
        let n = parse_net(
            "net d\ncell D : delta2\nfree a = D.p1\nfree b = D.p2\n\
             free c = D.a1\nfree d = D.a2\nfree e = D.a3\nfree f = D.a4\n",
            Mode::Core,
        )
        .unwrap();
        let ln = LinkNet::build(&n);
        let state = initial_state(&ln);
        let view = StatusView::of(&state);
        // visitor heading into an aux port
        let v = inject(&ln, "c", Conf::empty());
        let v = token_move(&ln, &view, &v).unwrap(); // cross to D.a1
        assert!(token_move(&ln, &view, &v).is_none());
        // the cell's own hunter can cross out but no further
        let h = hunter(&ln, crate::net::CellId(0), 0, &Vec::new()).unwrap();
        let h2 = token_move(&ln, &view, &h).unwrap();
        assert!(h2.pos.arrived);
        assert!(token_move(&ln, &view, &h2).is_none(), "free port blocks");
    }

    #[test]
    fn moves_are_deterministic_by_construction() {
        // every enabled token has exactly one move; sample a wandering token
        let ln = routing_net();
        let view = StatusView::of(&MachineState::default());
        let mut t = inject(&ln, "p1", Conf::new(Stack::from_syms([Sym::Q]), Stack::empty()));
        let mut steps = 0;
        while let Some(n) = token_move(&ln, &view, &t) {
            t = n;
            steps += 1;
            assert!(steps < 32, "unexpected divergence in a redex-free net");
        }
    }

    #[test]
    fn marriage_tokens_survive_roundtrip_encoding() {
        let ln = routing_net();
        let t = inject(&ln, "p1", Conf::new(Stack::from_syms([Sym::P]), Stack::empty()));
        let s = MachineState::from_tokens(vec![Token::Marriage(t)]);
        let js = crate::machine::state_json(&ln, &s);
        assert_eq!(js.as_array().unwrap().len(), 1);
        assert_eq!(js[0]["kind"], "marriage");
        assert_eq!(js[0]["conf"]["g"][0], "p");
    }
}
