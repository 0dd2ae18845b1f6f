//! External transition rules: how a machine interacts with its
//! environment through the free ports.
//!
//! Firings are atomic rule instances; a labelled transition is any
//! union of firings that consume pairwise disjoint tokens, so several
//! independent actions can happen in one step.

use std::collections::BTreeSet;

use crate::lts::action::{CellType, ExternalAction, LabelMultiset};
use crate::net::{CellKind, Endpoint, Label, LinkNet, Mode, PortSel};

use super::marriage::{apply_firing, enumerate_marriages, MarriageFiring};
use super::{
    addr_of_stack, hunter, hunter_stack, leaving_free, single_present_pub, Civil, Conf,
    MachineState, MarriageTok, MatchingTok, Origin, OriginSite, Stack, StatusTok, Token,
};

/// One atomic external rule instance.
#[derive(Clone, Debug)]
pub struct Firing {
    pub label: Vec<(Label, ExternalAction)>,
    pub consumed: Vec<Token>,
    pub produced: Vec<Token>,
    pub rule: &'static str,
}

impl Firing {
    fn apply(&self, state: &MachineState) -> MachineState {
        let mut s = state.clone();
        for t in &self.consumed {
            let ok = s.remove(t);
            debug_assert!(ok, "{}: consumed token missing", self.rule);
        }
        for t in &self.produced {
            s.insert(t.clone());
        }
        s
    }
}

fn injected(ln: &LinkNet, label: &Label, conf: &Conf) -> Option<MarriageTok> {
    Some(MarriageTok {
        pos: leaving_free(ln, label)?,
        conf: conf.clone(),
        origin: Origin {
            site: OriginSite::Free {
                label: label.clone(),
            },
            conf: conf.clone(),
        },
    })
}

fn marriage_to_firing(f: &MarriageFiring) -> Firing {
    Firing {
        label: f.kills.clone(),
        consumed: f.consumed.clone(),
        produced: f.produced.clone(),
        rule: "marriage",
    }
}

/// All single-rule firings enabled in `state`. `in_universe` bounds
/// the configurations considered for inputs and `visitor_cap` the
/// visitors enumerated per location (inputs are otherwise unbounded);
/// composition synthesizes further inputs on demand.
pub fn enumerate_firings(
    ln: &LinkNet,
    state: &MachineState,
    in_universe: &BTreeSet<Conf>,
    mode: Mode,
    visitor_cap: usize,
) -> Vec<Firing> {
    let ext = mode == Mode::Extension;
    let mut out = Vec::new();

    // inputs, bounded per location by the tokens already installed there
    for label in ln.free_labels() {
        let here = |o: &super::Origin| matches!(&o.site, OriginSite::Free { label: l } if *l == label);
        let installed = state.marriages().filter(|m| here(&m.origin)).count()
            + state.matchings().filter(|m| here(&m.origin)).count();
        if installed >= visitor_cap {
            continue;
        }
        for conf in in_universe {
            if let Some(tok) = injected(ln, &label, conf) {
                out.push(Firing {
                    label: vec![(label.clone(), ExternalAction::In(conf.clone()))],
                    consumed: vec![],
                    produced: vec![Token::Marriage(tok)],
                    rule: "in",
                });
            }
        }
    }

    // outputs: marriage tokens waiting at a free port
    for m in state.marriages() {
        if !m.pos.arrived {
            continue;
        }
        let Endpoint::Free { label } = m.pos.target(ln) else {
            continue;
        };
        out.push(Firing {
            label: vec![(label.clone(), ExternalAction::Out(m.conf.clone()))],
            consumed: vec![Token::Marriage(m.clone())],
            produced: vec![Token::Matching(MatchingTok {
                at: label.clone(),
                conf: m.conf.clone(),
                origin: m.origin.clone(),
            })],
            rule: "out",
        });
    }

    // a visitor faces a local gamma (or eraser, in extension mode, or
    // a fork's virtual merger): the local cell marries the visitor's
    // environment duplicator
    for v in state.marriages() {
        let OriginSite::Free { label: lv } = &v.origin.site else {
            continue;
        };
        if !v.pos.arrived || !v.conf.g.is_empty() {
            continue;
        }
        let local = match v.pos.target(ln) {
            Endpoint::Cell { cell, sel: PortSel::Prin(_) }
                if ln.cell(*cell).kind == CellKind::Gamma =>
            {
                CellType::Gamma
            }
            Endpoint::Cell { cell, sel: PortSel::Prin(_) }
                if ln.cell(*cell).kind == CellKind::Epsilon && ext =>
            {
                CellType::Epsilon
            }
            Endpoint::Cell { cell, sel } => {
                let view = super::StatusView::of(state);
                let kind = ln.cell(*cell).kind;
                if super::moves::faces_virtual_merger(&view, *cell, *sel, kind, &v.conf.g.0) {
                    CellType::Gamma
                } else {
                    continue;
                }
            }
            _ => continue,
        };
        out.push(Firing {
            label: vec![(
                lv.clone(),
                ExternalAction::Ma(local, CellType::Delta, v.origin.conf.clone()),
            )],
            consumed: vec![Token::Marriage(v.clone())],
            produced: vec![],
            rule: "ma-local-gamma",
        });
    }

    // a visitor faces a local unmarried duplicator copy whose own
    // hunter has flown out: marry across the border
    for v in state.marriages() {
        let OriginSite::Free { label: lv } = &v.origin.site else {
            continue;
        };
        if !v.pos.arrived || !v.conf.d.is_empty() {
            continue;
        }
        let Endpoint::Cell { cell, sel: PortSel::Prin(k) } = v.pos.target(ln) else {
            continue;
        };
        let (cell, k) = (*cell, *k);
        if !ln.cell(cell).kind.is_delta() {
            continue;
        }
        // the visitor's configuration addresses one specific copy
        let Some(addr) = addr_of_stack(&v.conf.g.conj()) else {
            continue;
        };
        if !single_present_pub(state, cell, k, &addr) {
            continue;
        }
        let home = Origin {
            site: OriginSite::CellPrin { cell, prin: k },
            conf: Conf::new(hunter_stack(&addr), Stack::empty()),
        };
        let Some(witness) = state.matching_by_origin(&home) else {
            continue;
        };
        let mut consumed = vec![
            Token::Marriage(v.clone()),
            Token::Matching(witness.clone()),
            Token::Status(StatusTok {
                cell,
                prin: k,
                addr: addr.clone(),
                civil: Civil::Single,
            }),
        ];
        let produced = vec![Token::Status(StatusTok {
            cell,
            prin: k,
            addr: addr.clone(),
            civil: Civil::Married(CellType::Delta),
        })];
        let mut label = vec![
            (
                lv.clone(),
                ExternalAction::Ma(CellType::Delta, CellType::Delta, v.origin.conf.clone()),
            ),
            (
                witness.at.clone(),
                ExternalAction::Ma(CellType::Delta, CellType::Delta, witness.conf.conj()),
            ),
        ];
        reap_for_external(
            ln,
            state,
            cell,
            k,
            &addr,
            &[v.origin.clone(), home.clone()],
            &mut consumed,
            &mut label,
        );
        out.push(Firing {
            label,
            consumed,
            produced,
            rule: "ma-env-delta",
        });
    }

    // the environment marries a local duplicator copy whose hunter
    // flew out, playing a gamma (or an eraser, in extension mode)
    for witness in state.matchings() {
        let OriginSite::CellPrin { cell, prin } = &witness.origin.site else {
            continue;
        };
        let (cell, prin) = (*cell, *prin);
        if !witness.origin.conf.d.is_empty() {
            continue;
        }
        let Some(addr) = addr_of_stack(&witness.origin.conf.g) else {
            continue;
        };
        if !single_present_pub(state, cell, prin, &addr) {
            continue;
        }
        let mut partners = vec![CellType::Gamma];
        if ext {
            partners.push(CellType::Epsilon);
        }
        for partner in partners {
            let mut consumed = vec![
                Token::Matching(witness.clone()),
                Token::Status(StatusTok {
                    cell,
                    prin,
                    addr: addr.clone(),
                    civil: Civil::Single,
                }),
            ];
            let mut produced = vec![Token::Status(StatusTok {
                cell,
                prin,
                addr: addr.clone(),
                civil: Civil::Married(partner),
            })];
            let mut label = vec![(
                witness.at.clone(),
                ExternalAction::Ma(CellType::Delta, partner, witness.conf.conj()),
            )];
            if partner == CellType::Gamma {
                reap_for_external(
                    ln,
                    state,
                    cell,
                    prin,
                    &addr,
                    &[witness.origin.clone()],
                    &mut consumed,
                    &mut label,
                );
                // fork: deeper singles and hunters at every principal port
                for k2 in 0..ln.cell(cell).kind.coarity() as u8 {
                    for sym in [super::Sym::P, super::Sym::Q] {
                        let mut deeper = addr.clone();
                        deeper.push(sym);
                        produced.push(Token::Status(StatusTok {
                            cell,
                            prin: k2,
                            addr: deeper.clone(),
                            civil: Civil::Single,
                        }));
                        if let Some(h) = hunter(ln, cell, k2, &deeper) {
                            produced.push(Token::Marriage(h));
                        }
                    }
                }
            }
            out.push(Firing {
                label,
                consumed,
                produced,
                rule: "ma-env-gamma",
            });
        }
    }

    // forwarding through matching tokens whose origin is a free port
    for witness in state.matchings() {
        let OriginSite::Free { label: lo } = &witness.origin.site else {
            continue;
        };
        let mut types = vec![CellType::Gamma, CellType::Delta];
        if ext {
            types.push(CellType::Epsilon);
        }
        for c in &types {
            for d in &types {
                out.push(Firing {
                    label: vec![
                        (
                            lo.clone(),
                            ExternalAction::Ma(*c, *d, witness.origin.conf.clone()),
                        ),
                        (
                            witness.at.clone(),
                            ExternalAction::Ma(*d, *c, witness.conf.conj()),
                        ),
                    ],
                    consumed: vec![Token::Matching(witness.clone())],
                    produced: vec![],
                    rule: "ma-forward",
                });
            }
        }
        // kill forwarding
        out.push(Firing {
            label: vec![
                (
                    lo.clone(),
                    ExternalAction::Cokill(witness.origin.conf.conj()),
                ),
                (witness.at.clone(), ExternalAction::Kill(witness.conf.conj())),
            ],
            consumed: vec![Token::Matching(witness.clone())],
            produced: vec![],
            rule: "kill-forward",
        });
    }

    // a kill demanded by the environment lands on a visiting token
    for w in state.marriages() {
        let OriginSite::Free { label: lw } = &w.origin.site else {
            continue;
        };
        out.push(Firing {
            label: vec![(lw.clone(), ExternalAction::Cokill(w.origin.conf.conj()))],
            consumed: vec![Token::Marriage(w.clone())],
            produced: vec![],
            rule: "cokill",
        });
    }

    // marriages whose siblings flew out carry kill actions
    for f in enumerate_marriages(ln, state, ext) {
        if !f.kills.is_empty() {
            out.push(marriage_to_firing(&f));
        }
    }

    out
}

#[allow(clippy::too_many_arguments)]
fn reap_for_external(
    _ln: &LinkNet,
    state: &MachineState,
    cell: crate::net::CellId,
    engaged: u8,
    addr: &super::Addr,
    spare: &[Origin],
    consumed: &mut Vec<Token>,
    label: &mut Vec<(Label, ExternalAction)>,
) {
    let coarity = _ln.cell(cell).kind.coarity();
    for k in 0..coarity as u8 {
        if k == engaged {
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
            label.push((mt.at.clone(), ExternalAction::Kill(mt.conf.conj())));
        }
    }
}

fn consumed_disjoint(a: &Firing, b: &Firing) -> bool {
    a.consumed.iter().all(|t| !b.consumed.contains(t))
}

/// Labelled external transitions: unions of disjoint firings, up to
/// `label_cap` actions per label and `max_bundle` firings per bundle.
pub fn external_successors(
    ln: &LinkNet,
    state: &MachineState,
    in_universe: &BTreeSet<Conf>,
    mode: Mode,
    label_cap: usize,
    max_bundle: usize,
    visitor_cap: usize,
) -> Vec<(LabelMultiset, MachineState)> {
    let firings = enumerate_firings(ln, state, in_universe, mode, visitor_cap);
    let mut out = Vec::new();
    // bundles by DFS over the firing list
    fn rec(
        state: &MachineState,
        firings: &[Firing],
        start: usize,
        chosen: &mut Vec<usize>,
        label_cap: usize,
        max_bundle: usize,
        out: &mut Vec<(LabelMultiset, MachineState)>,
    ) {
        if !chosen.is_empty() {
            let mut label: Vec<(Label, ExternalAction)> = Vec::new();
            let mut s = state.clone();
            for &i in chosen.iter() {
                label.extend(firings[i].label.iter().cloned());
                s = firings[i].apply(&s);
            }
            out.push((LabelMultiset::from_entries(label), s));
        }
        if chosen.len() >= max_bundle {
            return;
        }
        for i in start..firings.len() {
            let size: usize = chosen
                .iter()
                .map(|&j| firings[j].label.len())
                .sum::<usize>()
                + firings[i].label.len();
            if size > label_cap {
                continue;
            }
            if chosen
                .iter()
                .all(|&j| consumed_disjoint(&firings[j], &firings[i]))
            {
                chosen.push(i);
                rec(state, firings, i + 1, chosen, label_cap, max_bundle, out);
                chosen.pop();
            }
        }
    }
    let mut chosen = Vec::new();
    rec(
        state,
        &firings,
        0,
        &mut chosen,
        label_cap,
        max_bundle,
        &mut out,
    );
    let mut keyed: Vec<(String, (LabelMultiset, MachineState))> = out
        .into_iter()
        .map(|(l, s)| (format!("{l:?}|{}", s.key()), (l, s)))
        .collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    keyed.dedup_by(|a, b| a.0 == b.0);
    keyed.into_iter().map(|(_, x)| x).collect()
}

/// Internal (silent) successors: one move or one marriage without
/// kill actions, with the step metadata.
pub fn internal_successors(
    ln: &LinkNet,
    state: &MachineState,
    mode: Mode,
) -> Vec<(super::InternalStep, MachineState)> {
    let view = super::StatusView::of(state);
    let mut out = Vec::new();
    for m in state.marriages() {
        if let Some(after) = super::moves::token_move(ln, &view, m) {
            let mut s = state.clone();
            s.remove(&Token::Marriage(m.clone()));
            s.insert(Token::Marriage(after.clone()));
            out.push((
                super::InternalStep::Move {
                    before: m.clone(),
                    after,
                },
                s,
            ));
        }
    }
    for f in enumerate_marriages(ln, state, mode == Mode::Extension) {
        if f.kills.is_empty() {
            out.push((
                super::InternalStep::Marriage(f.clone()),
                apply_firing(state, &f),
            ));
        }
    }
    out
}
