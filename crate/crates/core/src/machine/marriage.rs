//! Marriage transitions: the atomic, irreversible resolution of a
//! pairing between a duplicator copy and a partner.
//!
//! * Two duplicator copies marry when their hunters have swapped
//!   places: each sits at the other's home port carrying the conjugate
//!   of the other's installation configuration. Both hunters and the
//!   hunters of the cells' other principal ports are consumed, and the
//!   two engaged singles flip to married.
//! * A duplicator copy marries a gamma when its hunter faces the gamma
//!   principal port with fully empty stacks. The copy forks: every
//!   principal port gets two deeper singles and two fresh hunters, one
//!   per branch.
//! * In extension mode a copy facing an eraser marries it and merely
//!   goes inert on that port; the rest of the cell keeps hunting.
//!
//! A consumed sibling that has already left the net cannot be removed
//! silently: the transition then carries a kill action at the port the
//! sibling exited through, addressed with the conjugate of its exit
//! configuration.

use serde::Serialize;

use crate::lts::action::{CellType, ExternalAction};
use crate::net::{CellId, CellKind, Endpoint, Label, LinkNet, PortSel};

use super::{
    hunter, hunter_addr, hunter_stack, Addr, Civil, Conf, MachineState, MarriageTok, Origin,
    OriginSite, Stack, StatusTok, Token,
};

/// A marriage about to fire: consumed/produced tokens plus the kill
/// actions for flown-out siblings.
#[derive(Clone, Debug, Serialize)]
pub struct MarriageFiring {
    pub kind: MarriageKind,
    /// The engaged copies: (cell, principal, address).
    pub engaged: Vec<(CellId, u8, Addr)>,
    /// Main hunters consumed.
    pub mains: Vec<MarriageTok>,
    pub consumed: Vec<Token>,
    pub produced: Vec<Token>,
    pub kills: Vec<(Label, ExternalAction)>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
pub enum MarriageKind {
    DeltaDelta,
    GammaDelta,
    DeltaEpsilon,
}

fn flip(
    state: &MachineState,
    cell: CellId,
    prin: u8,
    addr: &Addr,
    to: CellType,
    consumed: &mut Vec<Token>,
    produced: &mut Vec<Token>,
) {
    consumed.push(Token::Status(StatusTok {
        cell,
        prin,
        addr: addr.clone(),
        civil: Civil::Single,
    }));
    produced.push(Token::Status(StatusTok {
        cell,
        prin,
        addr: addr.clone(),
        civil: Civil::Married(to),
    }));
    debug_assert!(state.contains(consumed.last().unwrap()));
}

/// Collects the copy's hunters at the *other* principal ports: present
/// ones are consumed, flown-out ones produce kill actions (consuming
/// their matching witness). Origins in `spare` (the marriage mains)
/// are left alone.
fn reap_siblings(
    state: &MachineState,
    cell: CellId,
    engaged_prin: u8,
    addr: &Addr,
    coarity: usize,
    spare: &[Origin],
    consumed: &mut Vec<Token>,
    kills: &mut Vec<(Label, ExternalAction)>,
) {
    for k in 0..coarity as u8 {
        if k == engaged_prin {
            continue;
        }
        let origin = Origin {
            site: OriginSite::CellPrin { cell, prin: k },
            conf: Conf::new(hunter_stack(addr), Stack::empty()),
        };
        if spare.contains(&origin) {
            continue;
        }
        if let Some(m) = state.marriage_by_origin(&origin) {
            consumed.push(Token::Marriage(m.clone()));
        } else if let Some(mt) = state.matching_by_origin(&origin) {
            consumed.push(Token::Matching(mt.clone()));
            kills.push((mt.at.clone(), ExternalAction::Kill(mt.conf.conj())));
        }
        // neither present nor witnessed: the copy port was already dead
    }
}

/// Is the single status for this copy still present?
fn single_present(state: &MachineState, cell: CellId, prin: u8, addr: &Addr) -> bool {
    state.contains(&Token::Status(StatusTok {
        cell,
        prin,
        addr: addr.clone(),
        civil: Civil::Single,
    }))
}

/// Fork products of a gamma marriage at `(cell, addr)`: deeper singles
/// and fresh hunters for both branches at every principal port.
fn fork(ln: &LinkNet, cell: CellId, addr: &Addr, produced: &mut Vec<Token>) {
    let coarity = ln.cell(cell).kind.coarity();
    for k in 0..coarity as u8 {
        for sym in [super::Sym::P, super::Sym::Q] {
            let mut deeper = addr.clone();
            deeper.push(sym);
            produced.push(Token::Status(StatusTok {
                cell,
                prin: k,
                addr: deeper.clone(),
                civil: Civil::Single,
            }));
            if let Some(h) = hunter(ln, cell, k, &deeper) {
                produced.push(Token::Marriage(h));
            }
        }
    }
}

/// Every enabled marriage in `state`.
pub fn enumerate_marriages(ln: &LinkNet, state: &MachineState, ext: bool) -> Vec<MarriageFiring> {
    let mut out = Vec::new();
    let hunters: Vec<&MarriageTok> = state
        .marriages()
        .filter(|m| m.pos.arrived && hunter_addr(m).is_some())
        .collect();

    // duplicator-duplicator
    for (i, x) in hunters.iter().enumerate() {
        let Some((cx, kx, ax)) = hunter_addr(x) else { continue };
        for y in hunters.iter().skip(i + 1) {
            let Some((cy, ky, ay)) = hunter_addr(y) else { continue };
            if (cx, kx) == (cy, ky) && ax == ay {
                continue;
            }
            // x must sit at y's home port and vice versa, each carrying
            // the conjugate of the other's installation configuration
            let x_at_y = x.pos.target(ln)
                == &Endpoint::Cell {
                    cell: cy,
                    sel: PortSel::Prin(ky),
                };
            let y_at_x = y.pos.target(ln)
                == &Endpoint::Cell {
                    cell: cx,
                    sel: PortSel::Prin(kx),
                };
            if !x_at_y || !y_at_x {
                continue;
            }
            if x.conf != y.origin.conf.conj() || y.conf != x.origin.conf.conj() {
                continue;
            }
            if !single_present(state, cx, kx, &ax) || !single_present(state, cy, ky, &ay) {
                continue;
            }
            let spare = [x.origin.clone(), y.origin.clone()];
            let mut consumed = vec![Token::Marriage((*x).clone()), Token::Marriage((*y).clone())];
            let mut produced = Vec::new();
            let mut kills = Vec::new();
            flip(state, cx, kx, &ax, CellType::Delta, &mut consumed, &mut produced);
            flip(state, cy, ky, &ay, CellType::Delta, &mut consumed, &mut produced);
            reap_siblings(
                state,
                cx,
                kx,
                &ax,
                ln.cell(cx).kind.coarity(),
                &spare,
                &mut consumed,
                &mut kills,
            );
            if (cx, &ax) != (cy, &ay) {
                reap_siblings(
                    state,
                    cy,
                    ky,
                    &ay,
                    ln.cell(cy).kind.coarity(),
                    &spare,
                    &mut consumed,
                    &mut kills,
                );
            }
            out.push(MarriageFiring {
                kind: MarriageKind::DeltaDelta,
                engaged: vec![(cx, kx, ax.clone()), (cy, ky, ay.clone())],
                mains: vec![(*x).clone(), (*y).clone()],
                consumed,
                produced,
                kills,
            });
        }
    }

    // duplicator-gamma and duplicator-eraser; a virtual merger gamma
    // left behind by a fork marries exactly like a real one
    for x in &hunters {
        let Some((cx, kx, ax)) = hunter_addr(x) else { continue };
        if !x.conf.is_empty() {
            continue;
        }
        let partner = match x.pos.target(ln) {
            Endpoint::Cell { cell: g, sel: PortSel::Prin(_) }
                if ln.cell(*g).kind == CellKind::Gamma =>
            {
                CellType::Gamma
            }
            Endpoint::Cell { cell: g, sel: PortSel::Prin(_) }
                if ln.cell(*g).kind == CellKind::Epsilon && ext =>
            {
                CellType::Epsilon
            }
            Endpoint::Cell { cell: d, sel } => {
                let view = super::StatusView::of(state);
                let kind = ln.cell(*d).kind;
                if super::moves::faces_virtual_merger(&view, *d, *sel, kind, &x.conf.g.0) {
                    CellType::Gamma
                } else {
                    continue;
                }
            }
            _ => continue,
        };
        if !single_present(state, cx, kx, &ax) {
            continue;
        }
        let mut consumed = vec![Token::Marriage((*x).clone())];
        let mut produced = Vec::new();
        let mut kills = Vec::new();
        flip(state, cx, kx, &ax, partner, &mut consumed, &mut produced);
        if partner == CellType::Gamma {
            reap_siblings(
                state,
                cx,
                kx,
                &ax,
                ln.cell(cx).kind.coarity(),
                &[x.origin.clone()],
                &mut consumed,
                &mut kills,
            );
            fork(ln, cx, &ax, &mut produced);
        }
        out.push(MarriageFiring {
            kind: if partner == CellType::Gamma {
                MarriageKind::GammaDelta
            } else {
                MarriageKind::DeltaEpsilon
            },
            engaged: vec![(cx, kx, ax.clone())],
            mains: vec![(*x).clone()],
            consumed,
            produced,
            kills,
        });
    }
    out
}

/// Applies a firing to a state.
pub fn apply_firing(state: &MachineState, f: &MarriageFiring) -> MachineState {
    let mut s = state.clone();
    for t in &f.consumed {
        let ok = s.remove(t);
        debug_assert!(ok, "firing consumed a token that is not present");
    }
    for t in &f.produced {
        s.insert(t.clone());
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::moves::token_move;
    use crate::machine::{initial_state, StatusView};
    use crate::net::parse::parse_net;
    use crate::net::Mode;

    fn silent_round(ln: &LinkNet, state: &MachineState) -> Vec<MachineState> {
        let view = StatusView::of(state);
        let mut succs = Vec::new();
        for m in state.marriages() {
            if let Some(after) = token_move(ln, &view, m) {
                let mut s = state.clone();
                s.remove(&Token::Marriage(m.clone()));
                s.insert(Token::Marriage(after));
                succs.push(s);
            }
        }
        for f in enumerate_marriages(ln, state, false) {
            if f.kills.is_empty() {
                succs.push(apply_firing(state, &f));
            }
        }
        succs
    }

    #[test]
    fn facing_duplicators_marry_after_two_crossings() {
        let n = parse_net(
            "net dd\ncell A : delta2\ncell B : delta2\nwire A.p1 -- B.p1\n\
             free a1 = A.a1\nfree a2 = A.a2\nfree a3 = A.a3\nfree a4 = A.a4\nfree ap = A.p2\n\
             free b1 = B.a1\nfree b2 = B.a2\nfree b3 = B.a3\nfree b4 = B.a4\nfree bp = B.p2\n",
            Mode::Core,
        )
        .unwrap();
        let ln = LinkNet::build(&n);
        let s0 = initial_state(&ln);
        assert!(enumerate_marriages(&ln, &s0, false).is_empty());
        // both engaged hunters cross
        let mut s = s0.clone();
        for _ in 0..2 {
            let view = StatusView::of(&s);
            let m = s
                .marriages()
                .find(|m| !m.pos.arrived && token_move(&ln, &view, m).is_some())
                .cloned();
            let m = m.expect("a hunter can cross");
            let after = token_move(&ln, &StatusView::of(&s), &m).unwrap();
            s.remove(&Token::Marriage(m));
            s.insert(Token::Marriage(after));
        }
        let firings = enumerate_marriages(&ln, &s, false);
        let dd: Vec<_> = firings
            .iter()
            .filter(|f| f.kind == MarriageKind::DeltaDelta)
            .collect();
        assert_eq!(dd.len(), 1);
        let after = apply_firing(&s, dd[0]);
        // all four hunters gone, two married and two single statuses
        assert_eq!(after.marriages().count(), 0);
        let married = after
            .statuses()
            .filter(|st| matches!(st.civil, Civil::Married(CellType::Delta)))
            .count();
        let single = after
            .statuses()
            .filter(|st| st.civil == Civil::Single)
            .count();
        assert_eq!((married, single), (2, 2));
        assert!(dd[0].kills.is_empty());
    }

    #[test]
    fn gamma_marriage_forks_the_duplicator() {
        let n = parse_net(
            "net gd\ncell G : gamma\ncell D : delta2\nwire G.p1 -- D.p1\n\
             free g1 = G.a1\nfree g2 = G.a2\n\
             free d1 = D.a1\nfree d2 = D.a2\nfree d3 = D.a3\nfree d4 = D.a4\nfree dp = D.p2\n",
            Mode::Core,
        )
        .unwrap();
        let ln = LinkNet::build(&n);
        let mut s = initial_state(&ln);
        // the engaged hunter crosses to face the gamma
        let view = StatusView::of(&s);
        let m = s
            .marriages()
            .find(|m| token_move(&ln, &view, m).is_some())
            .cloned()
            .unwrap();
        let after = token_move(&ln, &view, &m).unwrap();
        s.remove(&Token::Marriage(m));
        s.insert(Token::Marriage(after));
        let firings = enumerate_marriages(&ln, &s, false);
        let gd: Vec<_> = firings
            .iter()
            .filter(|f| f.kind == MarriageKind::GammaDelta)
            .collect();
        assert_eq!(gd.len(), 1);
        let t = apply_firing(&s, gd[0]);
        // one married, five singles, four hunters
        let married = t
            .statuses()
            .filter(|st| matches!(st.civil, Civil::Married(_)))
            .count();
        let single = t.statuses().filter(|st| st.civil == Civil::Single).count();
        assert_eq!((married, single), (1, 5));
        assert_eq!(t.marriages().count(), 4);
    }

    #[test]
    fn exhaustive_silent_run_of_a_dd_redex_reaches_the_inert_state() {
        let n = parse_net(
            "net dd\ncell A : delta2\ncell B : delta2\nwire A.p1 -- B.p1\n\
             free a1 = A.a1\nfree a2 = A.a2\nfree a3 = A.a3\nfree a4 = A.a4\nfree ap = A.p2\n\
             free b1 = B.a1\nfree b2 = B.a2\nfree b3 = B.a3\nfree b4 = B.a4\nfree bp = B.p2\n",
            Mode::Core,
        )
        .unwrap();
        let ln = LinkNet::build(&n);
        let mut frontier = vec![initial_state(&ln)];
        let mut seen = std::collections::BTreeSet::new();
        let mut stuck = Vec::new();
        while let Some(s) = frontier.pop() {
            if !seen.insert(s.key()) {
                continue;
            }
            let succs = silent_round(&ln, &s);
            if succs.is_empty() {
                stuck.push(s);
            } else {
                frontier.extend(succs);
            }
        }
        assert!(!stuck.is_empty());
        for s in stuck {
            assert_eq!(s.marriages().count(), 0, "stuck states are post-marriage");
        }
    }
}
