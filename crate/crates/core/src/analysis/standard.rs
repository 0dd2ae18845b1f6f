//! Computations of the closed machine and their standardisation.
//!
//! A standard computation front-loads every marriage: it is a sequence
//! of thunks (the moves of the tokens a marriage consumes, then the
//! marriage itself) followed by a marriage-free continuation.
//! Standardising permutes moves of unrelated tokens past marriages and
//! absorbs the moves of tokens a marriage kills; move behaviour is
//! monotone in the status tokens, so replaying a move later than it
//! originally happened cannot change its effect.

use std::collections::BTreeMap;

use rand::Rng;

use crate::machine::external::internal_successors;
use crate::machine::marriage::MarriageFiring;
use crate::machine::{InternalStep, MachineState, Origin, Token};
use crate::net::{LinkNet, Mode};

/// A transition sequence rooted at a concrete state.
#[derive(Clone, Debug)]
pub struct Computation {
    pub initial: MachineState,
    pub steps: Vec<(InternalStep, MachineState)>,
    /// true when the final state has no internal successor
    pub maximal: bool,
}

impl Computation {
    pub fn final_state(&self) -> &MachineState {
        self.steps.last().map(|(_, s)| s).unwrap_or(&self.initial)
    }

    pub fn marriage_count(&self) -> usize {
        self.steps.iter().filter(|(st, _)| st.is_marriage()).count()
    }
}

/// Runs the closed machine, choosing uniformly among enabled internal
/// steps, until it jams or the budget runs out.
pub fn random_computation<R: Rng>(
    ln: &LinkNet,
    start: &MachineState,
    mode: Mode,
    rng: &mut R,
    max_steps: usize,
) -> Computation {
    let mut steps = Vec::new();
    let mut cur = start.clone();
    let mut maximal = false;
    for _ in 0..max_steps {
        let succ = internal_successors(ln, &cur, mode);
        if succ.is_empty() {
            maximal = true;
            break;
        }
        let (st, next) = succ[rng.gen_range(0..succ.len())].clone();
        cur = next.clone();
        steps.push((st, next));
    }
    if !maximal {
        maximal = internal_successors(ln, &cur, mode).is_empty();
    }
    Computation {
        initial: start.clone(),
        steps,
        maximal,
    }
}

/// One thunk: the focused moves of the consumed hunters, closed by the
/// marriage. Two move groups for a duplicator pair, one otherwise.
#[derive(Clone, Debug)]
pub struct Thunk {
    pub focused_parts: Vec<Vec<InternalStep>>,
    pub closing: MarriageFiring,
}

#[derive(Clone, Debug)]
pub struct StandardComputation {
    pub thunks: Vec<Thunk>,
    pub continuation: Vec<InternalStep>,
    /// State right after each marriage of the *original* computation,
    /// reproduced by the permuted run (thunks plus the residual moves
    /// of the surviving bystanders).
    pub checkpoints: Vec<MachineState>,
    pub final_state: MachineState,
}

#[derive(Clone, Debug, thiserror::Error)]
pub enum StandardizeError {
    #[error("input is not a computation: step {0} does not follow from its predecessor")]
    NotAComputation(usize),
    #[error("replay failed at {0}")]
    Replay(String),
}

fn moved_origin(step: &InternalStep) -> Option<Origin> {
    step.moved_origin().cloned()
}

fn consumed_origins(f: &MarriageFiring) -> Vec<(Origin, bool)> {
    // (origin, is_main)
    let mains: Vec<Origin> = f.mains.iter().map(|m| m.origin.clone()).collect();
    f.consumed
        .iter()
        .filter_map(|t| match t {
            Token::Marriage(m) => Some((m.origin.clone(), mains.contains(&m.origin))),
            _ => None,
        })
        .collect()
}

/// Replays one move in `state` by locating the moved token.
fn replay_move(state: &MachineState, step: &InternalStep) -> Result<MachineState, StandardizeError> {
    let InternalStep::Move { before, after } = step else {
        return Err(StandardizeError::Replay("expected a move".into()));
    };
    let mut s = state.clone();
    if !s.remove(&Token::Marriage(before.clone())) {
        return Err(StandardizeError::Replay(format!(
            "moved token missing: {before:?}"
        )));
    }
    s.insert(Token::Marriage(after.clone()));
    Ok(s)
}

/// Replays a marriage semantically: selects the enabled firing with
/// the same engaged copies, which consumes the bystander casualties
/// wherever they currently stand.
fn replay_marriage(
    ln: &LinkNet,
    state: &MachineState,
    original: &MarriageFiring,
    mode: Mode,
) -> Result<(MachineState, MarriageFiring), StandardizeError> {
    let firings = crate::machine::marriage::enumerate_marriages(ln, state, mode == Mode::Extension);
    let found = firings
        .into_iter()
        .find(|f| f.kind == original.kind && f.engaged == original.engaged)
        .ok_or_else(|| {
            StandardizeError::Replay(format!(
                "marriage on {:?} not enabled in the permuted run",
                original.engaged
            ))
        })?;
    Ok((crate::machine::marriage::apply_firing(state, &found), found))
}

/// Standardises a computation. For a finite maximal input the result
/// ends in the same final state; for an interrupted run the
/// checkpoints agree with every post-marriage state of the input.
pub fn standardize(
    ln: &LinkNet,
    comp: &Computation,
    mode: Mode,
) -> Result<StandardComputation, StandardizeError> {
    // sanity: the recorded steps chain
    let mut prev = comp.initial.clone();
    for (i, (step, post)) in comp.steps.iter().enumerate() {
        let expected = match step {
            InternalStep::Move { .. } => replay_move(&prev, step)
                .map_err(|_| StandardizeError::NotAComputation(i))?,
            InternalStep::Marriage(f) => {
                let mut s = prev.clone();
                for t in &f.consumed {
                    if !s.remove(t) {
                        return Err(StandardizeError::NotAComputation(i));
                    }
                }
                for t in &f.produced {
                    s.insert(t.clone());
                }
                s
            }
        };
        if &expected != post {
            return Err(StandardizeError::NotAComputation(i));
        }
        prev = post.clone();
    }

    // classify moves: thunk index, absorbed, or continuation
    let marriage_indices: Vec<usize> = comp
        .steps
        .iter()
        .enumerate()
        .filter(|(_, (s, _))| s.is_marriage())
        .map(|(i, _)| i)
        .collect();
    // consumer of each origin: (marriage ordinal, is_main)
    let mut consumer: BTreeMap<Origin, (usize, bool)> = BTreeMap::new();
    for (ord, &mi) in marriage_indices.iter().enumerate() {
        let InternalStep::Marriage(f) = &comp.steps[mi].0 else {
            unreachable!()
        };
        for (o, is_main) in consumed_origins(f) {
            consumer.entry(o).or_insert((ord, is_main));
        }
    }
    #[derive(PartialEq)]
    enum Slot {
        Thunk(usize),
        Absorbed,
        Continuation,
    }
    let mut slots: Vec<Slot> = Vec::new();
    for (i, (step, _)) in comp.steps.iter().enumerate() {
        if step.is_marriage() {
            slots.push(Slot::Thunk(
                marriage_indices.iter().position(|&m| m == i).unwrap(),
            ));
            continue;
        }
        let o = moved_origin(step).expect("moves carry their token");
        slots.push(match consumer.get(&o) {
            Some((_, false)) => Slot::Absorbed,
            Some((ord, true)) => Slot::Thunk(*ord),
            None => Slot::Continuation,
        });
    }

    // assemble and replay the permuted sequence
    let mut cur = comp.initial.clone();
    let mut thunks = Vec::new();
    let mut checkpoints = Vec::new();
    for (ord, &mi) in marriage_indices.iter().enumerate() {
        let mut parts: BTreeMap<Origin, Vec<InternalStep>> = BTreeMap::new();
        for (i, (step, _)) in comp.steps.iter().enumerate() {
            if i < mi && slots[i] == Slot::Thunk(ord) && !step.is_marriage() {
                let o = moved_origin(step).unwrap();
                parts.entry(o).or_default().push(step.clone());
                cur = replay_move(&cur, step)?;
            }
        }
        let InternalStep::Marriage(f) = &comp.steps[mi].0 else {
            unreachable!()
        };
        let (next, fired) = replay_marriage(ln, &cur, f, mode)?;
        cur = next;
        thunks.push(Thunk {
            focused_parts: parts.into_values().collect(),
            closing: fired,
        });
        // checkpoint: also give the bystanders their pre-marriage moves
        let mut check = cur.clone();
        for (i, (step, _)) in comp.steps.iter().enumerate() {
            if i >= mi || step.is_marriage() {
                continue;
            }
            let belongs = match &slots[i] {
                Slot::Continuation => true,
                Slot::Thunk(o2) => *o2 > ord && !step.is_marriage(),
                Slot::Absorbed => {
                    // killed by a *later* marriage: still alive here
                    let o = moved_origin(step).unwrap();
                    consumer.get(&o).map(|(c, _)| *c > ord).unwrap_or(false)
                }
            };
            if belongs {
                check = replay_move(&check, step)?;
            }
        }
        checkpoints.push(check);
    }
    // continuation: everything never consumed, in original order
    let mut continuation = Vec::new();
    for (i, (step, _)) in comp.steps.iter().enumerate() {
        if slots[i] == Slot::Continuation {
            cur = replay_move(&cur, step)?;
            continuation.push(step.clone());
        }
    }
    Ok(StandardComputation {
        thunks,
        continuation,
        checkpoints,
        final_state: cur,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::corpus;
    use crate::machine::initial_state;
    use rand::SeedableRng;

    #[test]
    fn already_standard_runs_are_unchanged_in_effect() {
        let net = corpus::fig_worked();
        let ln = LinkNet::build(&net);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let comp = random_computation(&ln, &initial_state(&ln), Mode::Core, &mut rng, 40);
        let std = standardize(&ln, &comp, Mode::Core).unwrap();
        if comp.maximal {
            assert_eq!(std.final_state.key(), comp.final_state().key());
        }
        assert_eq!(std.thunks.len(), comp.marriage_count());
    }

    #[test]
    fn standardisation_preserves_final_states_over_many_runs() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let nets = [
            corpus::fig_worked(),
            corpus::fig_triangle(),
            corpus::fig_routing(),
        ];
        let mut maximal_seen = 0;
        for _ in 0..60 {
            for net in &nets {
                let ln = LinkNet::build(net);
                let comp =
                    random_computation(&ln, &initial_state(&ln), Mode::Core, &mut rng, 60);
                let std = standardize(&ln, &comp, Mode::Core).unwrap();
                if comp.maximal {
                    maximal_seen += 1;
                    assert_eq!(
                        std.final_state.key(),
                        comp.final_state().key(),
                        "final state drifted on {}",
                        net.name
                    );
                }
                // checkpoints agree with the original post-marriage states
                let mut idx = 0;
                for (step, post) in &comp.steps {
                    if step.is_marriage() {
                        assert_eq!(
                            std.checkpoints[idx].key(),
                            post.key(),
                            "checkpoint {idx} drifted on {}",
                            net.name
                        );
                        idx += 1;
                    }
                }
            }
        }
        assert!(maximal_seen > 10, "too few maximal runs: {maximal_seen}");
    }
}
