//! May-termination and may-divergence, on machines and on nets.
//!
//! The machine predicates explore the closed internal transition
//! graph. Divergence is certified by a revisited state or by a pump:
//! a segment that returns one token to its position with the same
//! second stack and a grown first stack, never digging below the
//! starting depth, moving nothing else, and never pausing at a
//! duplicator principal port. Such a segment replays forever, and a
//! pumped state behaves exactly like its base in a closed machine, so
//! merging the two keeps the exploration finite without losing
//! reachable normal forms.
//!
//! The net predicates explore the reduction graph up to isomorphism.
//! Divergence there is a reachable fed vicious circle or a reduction
//! cycle.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::machine::external::internal_successors;
use crate::machine::{Atom, InternalStep, MachineState, Token};
use crate::net::iso::canonical_key;
use crate::net::vc::in_vc;
use crate::net::{CellKind, Endpoint, LinkNet, Mode, Net, PortSel};
use crate::reduction::{find_redexes, successors};

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Bounds {
    pub max_states: usize,
    pub max_depth: usize,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            max_states: 4000,
            max_depth: 64,
        }
    }
}

/// Three-valued answer with a replay witness for the positives.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Tri {
    Yes(String),
    No,
    Unknown,
}

impl Tri {
    pub fn is_yes(&self) -> bool {
        matches!(self, Tri::Yes(_))
    }

    pub fn definite(&self) -> bool {
        !matches!(self, Tri::Unknown)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TerminationVerdict {
    pub fin: Tri,
    pub inf: Tri,
}

/// Does `later` extend `base` by one token's grown first stack, with
/// everything else identical? Returns the index of that token in
/// `later` when so.
fn pump_extension(base: &MachineState, later: &MachineState) -> Option<usize> {
    if base.len() != later.len() {
        return None;
    }
    let mut pumped = None;
    let mut bs: Vec<&Token> = base.tokens().iter().collect();
    for (i, t) in later.tokens().iter().enumerate() {
        if let Some(j) = bs.iter().position(|b| *b == t) {
            bs.remove(j);
            continue;
        }
        if pumped.is_some() {
            return None;
        }
        pumped = Some(i);
    }
    let i = pumped?;
    let Token::Marriage(m_later) = &later.tokens()[i] else {
        return None;
    };
    // exactly one base token should remain unmatched
    if bs.len() != 1 {
        return None;
    }
    let Token::Marriage(m_base) = bs[0] else {
        return None;
    };
    let same_everything_else = m_base.pos == m_later.pos
        && m_base.origin == m_later.origin
        && m_base.conf.d == m_later.conf.d;
    if !same_everything_else {
        return None;
    }
    let b = &m_base.conf.g.0;
    let l = &m_later.conf.g.0;
    if l.len() > b.len() && l[..b.len()] == b[..] {
        Some(i)
    } else {
        None
    }
}

/// A token value that could take part in a marriage: parked at a
/// duplicator principal port, or parked at a gamma principal port with
/// nothing on its stacks. Pump bases and segments must avoid these,
/// since marriage eligibility depends on the exact stack.
fn marriage_sensitive(ln: &LinkNet, m: &crate::machine::MarriageTok) -> bool {
    if !m.pos.arrived {
        return false;
    }
    let Endpoint::Cell { cell, sel } = m.pos.target(ln) else {
        return false;
    };
    let kind = ln.cell(*cell).kind;
    if kind.is_delta() && matches!(sel, PortSel::Prin(_)) {
        return true;
    }
    if kind == CellKind::Gamma && matches!(sel, PortSel::Prin(_)) && m.conf.is_empty() {
        return true;
    }
    false
}

/// Validates the pump segment conditions over the path slice.
fn segment_is_pump(
    ln: &LinkNet,
    path: &[(String, MachineState, Option<InternalStep>)],
    from: usize,
    next_step: &InternalStep,
    next_state: &MachineState,
) -> bool {
    let base_state = &path[from].1;
    let Some(idx) = pump_extension(base_state, next_state) else {
        return false;
    };
    let Token::Marriage(pumped) = &next_state.tokens()[idx] else {
        return false;
    };
    let origin = &pumped.origin;
    let Some(base_tok) = base_state.marriages().find(|m| &m.origin == origin) else {
        return false;
    };
    if marriage_sensitive(ln, base_tok) {
        return false;
    }
    let g_floor = base_tok.conf.g.len();
    let d_floor = base_tok.conf.d.len();
    // every step after `from`, plus the new one, must move that token,
    // stay above the floors, and avoid marriage-sensitive stops
    let steps = path[from + 1..]
        .iter()
        .filter_map(|(_, _, st)| st.as_ref())
        .chain(std::iter::once(next_step));
    for st in steps {
        let InternalStep::Move { after, .. } = st else {
            return false;
        };
        if &after.origin != origin {
            return false;
        }
        if after.conf.g.len() < g_floor || after.conf.d.len() < d_floor {
            return false;
        }
        if after.conf.d.len() == d_floor && after.conf.d.0[..] != base_tok.conf.d.0[..] {
            return false;
        }
        if after.conf.g.len() == g_floor && after.conf.g.0[..] != base_tok.conf.g.0[..] {
            return false;
        }
        if marriage_sensitive(ln, after) {
            return false;
        }
        // numbers never enter the first stack along a pump
        if matches!(after.conf.g.top(), Some(Atom::N(_))) {
            return false;
        }
    }
    true
}

/// Machine-side verdicts by bounded exploration of internal steps.
pub fn tm_verdicts(ln: &LinkNet, start: &MachineState, mode: Mode, b: Bounds) -> TerminationVerdict {
    struct Frame {
        succ: Vec<(InternalStep, MachineState)>,
        idx: usize,
    }
    let mut capped = false;
    let mut cycle: Option<String> = None;
    let mut normal: Option<String> = None;
    let mut visited: BTreeSet<String> = BTreeSet::new();
    let mut path: Vec<(String, MachineState, Option<InternalStep>)> = Vec::new();
    let mut stack: Vec<Frame> = Vec::new();

    let enter = |state: MachineState,
                     step: Option<InternalStep>,
                     path: &mut Vec<(String, MachineState, Option<InternalStep>)>,
                     visited: &mut BTreeSet<String>,
                     capped: &mut bool,
                     normal: &mut Option<String>|
     -> Option<Frame> {
        if visited.len() >= b.max_states || path.len() >= b.max_depth {
            *capped = true;
            return None;
        }
        let key = state.key();
        visited.insert(key.clone());
        let succ = internal_successors(ln, &state, mode);
        if succ.is_empty() && normal.is_none() {
            *normal = Some(format!("quiet state after {} steps", path.len()));
        }
        path.push((key, state, step));
        Some(Frame { succ, idx: 0 })
    };

    if let Some(f) = enter(
        start.clone(),
        None,
        &mut path,
        &mut visited,
        &mut capped,
        &mut normal,
    ) {
        stack.push(f);
    }
    while !stack.is_empty() {
        let next = {
            let top = stack.last_mut().unwrap();
            if top.idx < top.succ.len() {
                top.idx += 1;
                Some(top.succ[top.idx - 1].clone())
            } else {
                None
            }
        };
        let Some((st, next_state)) = next else {
            stack.pop();
            path.pop();
            continue;
        };
        let nk = next_state.key();
        let mut pumped = false;
        if path.iter().any(|(k, _, _)| *k == nk) {
            cycle.get_or_insert_with(|| "state revisited along the run".to_string());
            continue;
        }
        // pump bases can only sit under a suffix of moves of the same
        // token, so scan just that suffix
        if let InternalStep::Move { after, .. } = &st {
            let origin = &after.origin;
            let mut from = path.len();
            while from > 0 {
                let prev_matches = match &path[from - 1].2 {
                    Some(InternalStep::Move { after: a2, .. }) => &a2.origin == origin,
                    Some(_) => false,
                    None => false,
                };
                let candidate = from - 1;
                if segment_is_pump(ln, &path, candidate, &st, &next_state) {
                    cycle.get_or_insert_with(|| {
                        format!(
                            "pump: a token regrows its first stack over a {}-step loop",
                            path.len() - candidate
                        )
                    });
                    pumped = true;
                    break;
                }
                if !prev_matches {
                    break;
                }
                from -= 1;
            }
        }
        if pumped || visited.contains(&nk) {
            continue;
        }
        if let Some(f) = enter(
            next_state,
            Some(st),
            &mut path,
            &mut visited,
            &mut capped,
            &mut normal,
        ) {
            stack.push(f);
        }
    }

    let fin = match (&normal, capped) {
        (Some(w), _) => Tri::Yes(w.clone()),
        (None, false) => Tri::No,
        _ => Tri::Unknown,
    };
    let inf = match (&cycle, capped) {
        (Some(w), _) => Tri::Yes(w.clone()),
        (None, false) => Tri::No,
        _ => Tri::Unknown,
    };
    TerminationVerdict { fin, inf }
}

pub fn tm_fin(net: &Net, mode: Mode, b: Bounds) -> Tri {
    let ln = LinkNet::build(net);
    tm_verdicts(&ln, &crate::machine::initial_state(&ln), mode, b).fin
}

pub fn tm_inf(net: &Net, mode: Mode, b: Bounds) -> Tri {
    let ln = LinkNet::build(net);
    tm_verdicts(&ln, &crate::machine::initial_state(&ln), mode, b).inf
}

/// Net-side verdicts over the reduction graph. Duplication can grow
/// nets without bound, so nets that outgrow the start by more than a
/// dozen cells are treated as an exhausted frontier.
pub fn net_verdicts(net: &Net, mode: Mode, b: Bounds) -> TerminationVerdict {
    struct Frame {
        succ: Vec<Net>,
        idx: usize,
    }
    let cell_cap = net.cells.len() + 12;
    let mut capped = false;
    let mut found_nf: Option<String> = None;
    let mut found_inf: Option<String> = None;
    let mut visited: BTreeSet<String> = BTreeSet::new();
    let mut path: Vec<String> = Vec::new();
    let mut stack: Vec<Frame> = Vec::new();

    let enter = |n: &Net,
                 path: &mut Vec<String>,
                 visited: &mut BTreeSet<String>,
                 capped: &mut bool,
                 found_nf: &mut Option<String>,
                 found_inf: &mut Option<String>|
     -> Option<Frame> {
        if visited.len() >= b.max_states || path.len() >= b.max_depth || n.cells.len() > cell_cap
        {
            *capped = true;
            return None;
        }
        let key = canonical_key(n);
        visited.insert(key.clone());
        let vicious = in_vc(n);
        if vicious && found_inf.is_none() {
            *found_inf = Some(format!(
                "reached a fed vicious circle after {} steps",
                path.len()
            ));
        }
        let redexes = find_redexes(n, mode);
        if redexes.is_empty() && !vicious && found_nf.is_none() {
            *found_nf = Some(format!(
                "normal form without a fed circle after {} steps",
                path.len()
            ));
        }
        let succ: Vec<Net> = successors(n, mode)
            .map(|v| v.into_iter().map(|(_, n)| n).collect())
            .unwrap_or_default();
        path.push(key);
        Some(Frame { succ, idx: 0 })
    };

    if let Some(f) = enter(
        net,
        &mut path,
        &mut visited,
        &mut capped,
        &mut found_nf,
        &mut found_inf,
    ) {
        stack.push(f);
    }
    while !stack.is_empty() {
        let next = {
            let top = stack.last_mut().unwrap();
            if top.idx < top.succ.len() {
                top.idx += 1;
                Some(top.succ[top.idx - 1].clone())
            } else {
                None
            }
        };
        let Some(next_net) = next else {
            stack.pop();
            path.pop();
            continue;
        };
        let nk = canonical_key(&next_net);
        if path.iter().any(|k| *k == nk) {
            found_inf
                .get_or_insert_with(|| "reduction revisits a net up to isomorphism".to_string());
            continue;
        }
        if visited.contains(&nk) {
            continue;
        }
        if let Some(f) = enter(
            &next_net,
            &mut path,
            &mut visited,
            &mut capped,
            &mut found_nf,
            &mut found_inf,
        ) {
            stack.push(f);
        }
    }

    let fin = match (&found_nf, capped) {
        (Some(w), _) => Tri::Yes(w.clone()),
        (None, false) => Tri::No,
        _ => Tri::Unknown,
    };
    let inf = match (&found_inf, capped) {
        (Some(w), _) => Tri::Yes(w.clone()),
        (None, false) => Tri::No,
        _ => Tri::Unknown,
    };
    TerminationVerdict { fin, inf }
}

pub fn net_fin(net: &Net, mode: Mode, b: Bounds) -> Tri {
    net_verdicts(net, mode, b).fin
}

pub fn net_inf(net: &Net, mode: Mode, b: Bounds) -> Tri {
    net_verdicts(net, mode, b).inf
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::corpus;

    #[test]
    fn quiet_nets_terminate_on_both_sides() {
        let n = corpus::single_epsilon();
        let tv = tm_verdicts(
            &LinkNet::build(&n),
            &crate::machine::initial_state(&LinkNet::build(&n)),
            Mode::Core,
            Bounds::default(),
        );
        assert!(tv.fin.is_yes());
        assert_eq!(tv.inf, Tri::No);
        let nv = net_verdicts(&n, Mode::Core, Bounds::default());
        assert!(nv.fin.is_yes());
        assert_eq!(nv.inf, Tri::No);
    }

    #[test]
    fn fed_loop_diverges_definitely_on_both_sides() {
        let n = corpus::fed_loop();
        let ln = LinkNet::build(&n);
        let tv = tm_verdicts(
            &ln,
            &crate::machine::initial_state(&ln),
            Mode::Core,
            Bounds::default(),
        );
        assert!(tv.inf.is_yes(), "machine: {:?}", tv);
        assert_eq!(tv.fin, Tri::No, "machine: {:?}", tv);
        let nv = net_verdicts(&n, Mode::Core, Bounds::default());
        assert!(nv.inf.is_yes(), "net: {:?}", nv);
        assert_eq!(nv.fin, Tri::No, "net: {:?}", nv);
    }

    #[test]
    fn worked_example_has_all_four_yes_semantics() {
        let n = corpus::fig_worked();
        let ln = LinkNet::build(&n);
        let tv = tm_verdicts(
            &ln,
            &crate::machine::initial_state(&ln),
            Mode::Core,
            Bounds::default(),
        );
        assert!(tv.fin.is_yes(), "machine fin: {:?}", tv);
        assert!(tv.inf.is_yes(), "machine inf: {:?}", tv);
        let nv = net_verdicts(&n, Mode::Core, Bounds::default());
        assert!(nv.fin.is_yes(), "net fin: {:?}", nv);
        assert!(nv.inf.is_yes(), "net inf: {:?}", nv);
    }
}
