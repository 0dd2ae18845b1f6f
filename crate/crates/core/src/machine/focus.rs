//! Focused sequences: runs in which a single designated token moves
//! while everything else is frozen, plus the canonicity test and
//! sequence inversion built on them.

use crate::net::LinkNet;

use super::moves::token_move;
use super::{
    arrived_free, leaving_free, leaving_prin, Conf, MachineState, MarriageTok, MatchingTok, Origin,
    OriginSite, StatusView, Token,
};

#[derive(Clone, Debug, thiserror::Error)]
pub enum FocusError {
    #[error("expected a marriage token")]
    WrongKind,
    #[error("token sequence is not a focused run (step {0})")]
    NotFocused(usize),
    #[error("origin port has no wire")]
    Detached,
}

/// The marriage token as installed at its own origin.
pub fn origin_token(ln: &LinkNet, t: &MarriageTok) -> Result<MarriageTok, FocusError> {
    let pos = match &t.origin.site {
        OriginSite::CellPrin { cell, prin } => leaving_prin(ln, *cell, *prin),
        OriginSite::Free { label } => leaving_free(ln, label),
    }
    .ok_or(FocusError::Detached)?;
    Ok(MarriageTok {
        pos,
        conf: t.origin.conf.clone(),
        origin: t.origin.clone(),
    })
}

/// The marriage token a matching token witnesses: back at the free
/// port, about to leave.
pub fn m2m(ln: &LinkNet, t: &MatchingTok) -> Result<MarriageTok, FocusError> {
    let pos = arrived_free(ln, &t.at).ok_or(FocusError::Detached)?;
    Ok(MarriageTok {
        pos,
        conf: t.conf.clone(),
        origin: t.origin.clone(),
    })
}

/// `opworig`: same slot travelled the other way, conjugated stacks,
/// re-rooted at `(site, conf)`.
pub fn opworig(t: &MarriageTok, site: OriginSite, conf: Conf) -> MarriageTok {
    MarriageTok {
        pos: t.pos.flipped(),
        conf: t.conf.conj(),
        origin: Origin { site, conf },
    }
}

/// One focused step of `t` in the frozen context `frozen` (only the
/// statuses matter; `t` itself must not be drawn from the context).
pub fn focused_step(
    ln: &LinkNet,
    frozen: &MachineState,
    t: &MarriageTok,
) -> Option<MarriageTok> {
    let view = StatusView::of(frozen);
    token_move(ln, &view, t)
}

/// Iterates `focused_step` from `start`, recording every token it
/// passes through (including `start`), up to `cap` steps.
pub fn focused_run(
    ln: &LinkNet,
    frozen: &MachineState,
    start: &MarriageTok,
    cap: usize,
) -> Vec<MarriageTok> {
    let view = StatusView::of(frozen);
    let mut out = vec![start.clone()];
    let mut cur = start.clone();
    for _ in 0..cap {
        match token_move(ln, &view, &cur) {
            Some(next) => {
                out.push(next.clone());
                cur = next;
            }
            None => break,
        }
    }
    out
}

/// Per-token canonicity witness.
#[derive(Clone, Debug)]
pub struct CanonicityWitness {
    pub token: Token,
    pub canonical: bool,
    pub steps: usize,
}

/// A state is canonical when every marriage or matching token is
/// reachable from its own origin token by a focused run with the rest
/// of the state frozen.
pub fn is_canonical(
    ln: &LinkNet,
    state: &MachineState,
    cap: usize,
) -> (bool, Vec<CanonicityWitness>) {
    let mut witnesses = Vec::new();
    let mut all = true;
    let mut targets: Vec<(Token, MarriageTok)> = Vec::new();
    for m in state.marriages() {
        targets.push((Token::Marriage(m.clone()), m.clone()));
    }
    for m in state.matchings() {
        if let Ok(tok) = m2m(ln, m) {
            targets.push((Token::Matching(m.clone()), tok));
        }
    }
    for (token, goal) in targets {
        let mut frozen = state.clone();
        frozen.remove(&token);
        let Ok(origin) = origin_token(ln, &goal) else {
            witnesses.push(CanonicityWitness {
                token,
                canonical: false,
                steps: 0,
            });
            all = false;
            continue;
        };
        let run = focused_run(ln, &frozen, &origin, cap);
        let hit = run.iter().position(|x| x.pos == goal.pos && x.conf == goal.conf);
        witnesses.push(CanonicityWitness {
            token,
            canonical: hit.is_some(),
            steps: hit.unwrap_or(run.len()),
        });
        all &= witnesses.last().unwrap().canonical;
    }
    (all, witnesses)
}

/// Inverts a focused run: reverses it, flipping each slot and
/// conjugating each configuration, re-rooting at `(site, conf)`.
/// Checks that every adjacent pair of the result is again a focused
/// step in the same frozen context.
pub fn invert_focused_sequence(
    ln: &LinkNet,
    frozen: &MachineState,
    seq: &[MarriageTok],
    site: OriginSite,
    conf: Conf,
) -> Result<Vec<MarriageTok>, FocusError> {
    if seq.is_empty() {
        return Ok(Vec::new());
    }
    // the input must itself be a focused run
    for (i, w) in seq.windows(2).enumerate() {
        match focused_step(ln, frozen, &w[0]) {
            Some(next) if next == w[1] => {}
            _ => return Err(FocusError::NotFocused(i)),
        }
    }
    let out: Vec<MarriageTok> = seq
        .iter()
        .rev()
        .map(|t| opworig(t, site.clone(), conf.clone()))
        .collect();
    for (i, w) in out.windows(2).enumerate() {
        match focused_step(ln, frozen, &w[0]) {
            Some(next) if next == w[1] => {}
            _ => return Err(FocusError::NotFocused(i)),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::{initial_state, Stack, Sym};
    use crate::net::parse::parse_net;
    use crate::net::{Label, Mode};

    fn gamma_net() -> LinkNet {
        let n = parse_net(
            "net g\ncell G : gamma\nfree l = G.a1\nfree m = G.p1\nfree n = G.a2\n",
            Mode::Core,
        )
        .unwrap();
        LinkNet::build(&n)
    }

    fn injected(ln: &LinkNet, label: &str, conf: Conf) -> MarriageTok {
        MarriageTok {
            pos: leaving_free(ln, &Label::new(label)).unwrap(),
            conf: conf.clone(),
            origin: Origin {
                site: OriginSite::Free {
                    label: Label::new(label),
                },
                conf,
            },
        }
    }

    #[test]
    fn origin_token_is_a_fixed_point() {
        let ln = gamma_net();
        let t = injected(&ln, "l", Conf::empty());
        let o = origin_token(&ln, &t).unwrap();
        assert_eq!(o, t);
        assert_eq!(origin_token(&ln, &o).unwrap(), o);
    }

    #[test]
    fn opworig_round_trip_restores_slot_and_stacks() {
        let ln = gamma_net();
        let t = injected(&ln, "l", Conf::new(Stack::from_syms([Sym::P]), Stack::empty()));
        let r = OriginSite::Free {
            label: Label::new("m"),
        };
        let e = Conf::empty();
        let once = opworig(&t, r.clone(), e.clone());
        let twice = opworig(&once, t.origin.site.clone(), t.origin.conf.clone());
        assert_eq!(twice, t);
    }

    #[test]
    fn focused_run_through_one_gamma_inverts() {
        let ln = gamma_net();
        let frozen = MachineState::default();
        let t = injected(&ln, "l", Conf::empty());
        // l -> (cross) -> G.a1 -> (push) -> leave p1 -> (cross) -> m
        let run = focused_run(&ln, &frozen, &t, 8);
        assert_eq!(run.len(), 4);
        let inv = invert_focused_sequence(
            &ln,
            &frozen,
            &run,
            OriginSite::Free {
                label: Label::new("m"),
            },
            Conf::empty(),
        )
        .unwrap();
        assert_eq!(inv.len(), run.len());
        // the inverse walks back from m to l, conjugated
        assert_eq!(inv[0].pos, run[3].pos.flipped());
        assert_eq!(inv[3].pos, run[0].pos.flipped());
        assert_eq!(inv[3].conf, run[0].conf.conj());
        // inverting a length-1 sequence yields the single op-token
        let one = invert_focused_sequence(
            &ln,
            &frozen,
            &run[0..1],
            OriginSite::Free {
                label: Label::new("m"),
            },
            Conf::empty(),
        )
        .unwrap();
        assert_eq!(one.len(), 1);
    }

    #[test]
    fn initial_state_is_canonical() {
        let n = parse_net(
            "net d\ncell D : delta2\nfree a = D.p1\nfree b = D.p2\n\
             free c = D.a1\nfree d = D.a2\nfree e = D.a3\nfree f = D.a4\n",
            Mode::Core,
        )
        .unwrap();
        let ln = LinkNet::build(&n);
        let s = initial_state(&ln);
        let (ok, _) = is_canonical(&ln, &s, 64);
        assert!(ok);
    }

    #[test]
    fn token_with_unreachable_history_is_not_canonical() {
        let ln = gamma_net();
        // claims origin l with an empty configuration, but sits beyond
        // the gamma with an impossible stack
        let bogus = MarriageTok {
            pos: arrived_free(&ln, &Label::new("n")).unwrap(),
            conf: Conf::new(Stack::from_syms([Sym::Q, Sym::Q]), Stack::empty()),
            origin: Origin {
                site: OriginSite::Free {
                    label: Label::new("l"),
                },
                conf: Conf::empty(),
            },
        };
        let state = MachineState::from_tokens(vec![Token::Marriage(bogus)]);
        let (ok, w) = is_canonical(&ln, &state, 64);
        assert!(!ok);
        assert_eq!(w.len(), 1);
        assert!(!w[0].canonical);
    }
}
