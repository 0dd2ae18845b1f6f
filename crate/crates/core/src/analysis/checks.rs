//! Executable equivalence checks: per-rule soundness, composing
//! machines against the machine of the composed net, and the
//! termination adequacy comparison.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::lts::{check_bisimulation, check_simulation, compose_lts, Caps, EquivMode, Verdict};
use crate::machine::external::internal_successors;
use crate::machine::lts::MachineLts;
use crate::machine::{Conf, InternalStep, MachineState, Stack, Sym};
use crate::net::compose::compose_nets;
use crate::net::{LinkNet, Mode, Net, NetError, PartialInjection};
use crate::reduction::{apply_redex, Redex, RedexKind, ReduceError};

use super::termination::{net_verdicts, tm_verdicts, Bounds, TerminationVerdict, Tri};

/// Default probe configurations injected during the games. Inputs are
/// unbounded in principle; this finite set plus on-demand synthesis
/// keeps the games finite.
pub fn default_probes() -> BTreeSet<Conf> {
    [Conf::empty()].into()
}

/// Wider probe set for targeted experiments: routing symbols address
/// virtual copies directly.
pub fn symbol_probes() -> BTreeSet<Conf> {
    [
        Conf::empty(),
        Conf::new(Stack::from_syms([Sym::P]), Stack::empty()),
        Conf::new(Stack::from_syms([Sym::Q]), Stack::empty()),
    ]
    .into()
}

#[derive(Clone, Debug, thiserror::Error)]
pub enum CheckError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Reduce(#[from] ReduceError),
    #[error("no marriage transition matches the redex (rule transcription bug?)")]
    NoCorrespondingMarriage,
}

fn machine(net: &Net, mode: Mode, probes: &BTreeSet<Conf>) -> MachineLts {
    let mut m = MachineLts::new(net, mode).with_universe(probes.clone());
    // one enumerated visitor per port keeps the games tractable;
    // composition synthesizes any further inputs it needs
    m.visitor_cap = 1;
    m
}

/// Breadth-first silent search for the first marriage transition whose
/// engaged copies match the redex cells at root addresses.
pub fn find_redex_marriage(
    ln: &LinkNet,
    start: &MachineState,
    redex: &Redex,
    mode: Mode,
    cap: usize,
) -> Option<MachineState> {
    let mut want: Vec<(crate::net::CellId, u8, crate::machine::Addr)> = match redex.kind {
        RedexKind::Dd => {
            let mut w = vec![
                (redex.left.0, redex.left.1, Vec::new()),
                (redex.right.0, redex.right.1, Vec::new()),
            ];
            w.sort();
            w
        }
        RedexKind::Gd => vec![(redex.right.0, redex.right.1, Vec::new())],
        RedexKind::DeExt => vec![(redex.left.0, redex.left.1, Vec::new())],
        _ => return None,
    };
    want.sort();
    let mut queue = std::collections::VecDeque::new();
    let mut seen = BTreeSet::new();
    queue.push_back(start.clone());
    seen.insert(start.key());
    let mut visited = 0usize;
    while let Some(s) = queue.pop_front() {
        visited += 1;
        if visited > cap {
            return None;
        }
        for (step, next) in internal_successors(ln, &s, mode) {
            if let InternalStep::Marriage(f) = &step {
                let mut engaged = f.engaged.clone();
                engaged.sort();
                if engaged == want {
                    return Some(next);
                }
            }
            if seen.insert(next.key()) {
                queue.push_back(next);
            }
        }
    }
    None
}

#[derive(Clone, Debug, Serialize)]
pub struct SoundnessReport {
    pub rule: &'static str,
    pub equivalence: Verdict,
    /// the reduct machine is simulated by the whole original machine
    pub simulation: Verdict,
}

/// Checks one reduction step against the machines: annihilating two
/// gammas (or the erasure rules) leaves the machine unchanged up to
/// weak bisimilarity; a duplicator rule matches the machine re-rooted
/// just after the corresponding marriage. Either way the reduct's
/// machine is weakly simulated by the original one.
pub fn soundness_check(
    net: &Net,
    redex: &Redex,
    mode: Mode,
    caps: Caps,
    probes: &BTreeSet<Conf>,
) -> Result<SoundnessReport, CheckError> {
    let reduct = apply_redex(net, redex)?;
    let m_red = machine(&reduct, mode, probes);
    let m_orig = machine(net, mode, probes);
    let needs_marriage = matches!(redex.kind, RedexKind::Dd | RedexKind::Gd | RedexKind::DeExt);
    let equivalence = if needs_marriage {
        let rooted = find_redex_marriage(
            &m_orig.ln,
            &m_orig.start,
            redex,
            mode,
            caps.state_cap.min(2000),
        )
        .ok_or(CheckError::NoCorrespondingMarriage)?;
        let m_rooted = m_orig.clone().rerooted(rooted);
        check_bisimulation(&m_rooted, &m_red, EquivMode::Weak, caps)
    } else {
        check_bisimulation(&m_orig, &m_red, EquivMode::Weak, caps)
    };
    let simulation = check_simulation(&m_red, &m_orig, EquivMode::Weak, caps);
    Ok(SoundnessReport {
        rule: redex.kind.name(),
        equivalence,
        simulation,
    })
}

/// Machine of the composed net against the composition of the
/// machines, up to weak bisimilarity.
pub fn compositionality_check(
    a: &Net,
    b: &Net,
    sigma: &PartialInjection,
    mode: Mode,
    caps: Caps,
    probes: &BTreeSet<Conf>,
) -> Result<Verdict, CheckError> {
    let whole = compose_nets(a, b, sigma, mode)?;
    let m_whole = machine(&whole, mode, probes);
    let ma = machine(a, mode, probes);
    let mb = machine(b, mode, probes);
    let product = compose_lts(&ma, &mb, sigma.clone());
    Ok(check_bisimulation(&m_whole, &product, EquivMode::Weak, caps))
}

#[derive(Clone, Debug, Serialize)]
pub struct AdequacyReport {
    pub machine: TerminationVerdict,
    pub net: TerminationVerdict,
    /// None while any verdict is unknown.
    pub fin_agrees: Option<bool>,
    pub inf_agrees: Option<bool>,
}

impl AdequacyReport {
    pub fn pass(&self) -> bool {
        self.fin_agrees != Some(false) && self.inf_agrees != Some(false)
    }

    pub fn definite(&self) -> bool {
        self.fin_agrees.is_some() && self.inf_agrees.is_some()
    }
}

/// Compares may-termination and may-divergence of the closed machine
/// against the reduction system.
pub fn adequacy_check(net: &Net, mode: Mode, bounds: Bounds) -> Result<AdequacyReport, CheckError> {
    let report = net.validate(mode);
    if !report.is_empty() {
        return Err(NetError::Invalid(report).into());
    }
    let ln = LinkNet::build(net);
    let m = tm_verdicts(&ln, &crate::machine::initial_state(&ln), mode, bounds);
    let n = net_verdicts(net, mode, bounds);
    let agree = |x: &Tri, y: &Tri| match (x, y) {
        (Tri::Unknown, _) | (_, Tri::Unknown) => None,
        _ => Some(x.is_yes() == y.is_yes()),
    };
    Ok(AdequacyReport {
        fin_agrees: agree(&m.fin, &n.fin),
        inf_agrees: agree(&m.inf, &n.inf),
        machine: m,
        net: n,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PreservationReport {
    pub thunks_sent: usize,
    pub marriages_matched: usize,
    pub continuation_finite_both: Option<bool>,
    pub notes: Vec<String>,
}

/// Sends a computation across one reduction: standardises it and
/// checks that its marriages (beyond the one the redex performs) are
/// reproducible in the reduct's machine, thunk by thunk, and that a
/// finite continuation stays finite (a cycle witness stays infinite)
/// on the other side.
pub fn preservation_probe(
    net: &Net,
    redex: &Redex,
    comp: &super::standard::Computation,
    mode: Mode,
    bounds: Bounds,
) -> Result<PreservationReport, CheckError> {
    let reduct = apply_redex(net, redex)?;
    let ln = LinkNet::build(net);
    let ln_red = LinkNet::build(&reduct);
    let mut notes = Vec::new();
    let std = match super::standard::standardize(&ln, comp, mode) {
        Ok(s) => s,
        Err(e) => {
            notes.push(format!("standardisation failed: {e}"));
            return Err(CheckError::NoCorrespondingMarriage);
        }
    };
    // walk the reduct machine along the image: skip the thunk whose
    // marriage corresponds to the redex, replay the rest by engaged
    // copies
    let mut cur = crate::machine::initial_state(&ln_red);
    let mut matched = 0usize;
    let mut skipped = false;
    for t in &std.thunks {
        let engaged: Vec<_> = t.closing.engaged.clone();
        let is_redex_marriage = {
            let mut cells: Vec<_> = engaged.iter().map(|(c, k, a)| (*c, *k, a.clone())).collect();
            cells.sort();
            let mut want = vec![
                (redex.left.0, redex.left.1, Vec::new()),
                (redex.right.0, redex.right.1, Vec::new()),
            ];
            want.sort();
            want.dedup();
            cells == want
        };
        if is_redex_marriage && !skipped {
            skipped = true;
            matched += 1;
            continue;
        }
        // look for a reachable marriage on cells that survive in the
        // reduct; survivors keep their names
        let survivors: BTreeSet<String> = reduct.cells.iter().map(|c| c.name.clone()).collect();
        let names: Vec<String> = engaged
            .iter()
            .map(|(c, _, _)| net.cell(*c).name.clone())
            .collect();
        if !names.iter().all(|n| survivors.contains(n)) {
            notes.push(format!(
                "thunk on {names:?} involves cells consumed by the reduction; skipped"
            ));
            continue;
        }
        let translate: Vec<_> = engaged
            .iter()
            .map(|(c, k, a)| {
                let name = &net.cell(*c).name;
                let nc = reduct.cell_by_name(name).unwrap();
                (nc, *k, a.clone())
            })
            .collect();
        let found = search_marriage(&ln_red, &cur, &translate, mode, bounds.max_states);
        match found {
            Some(next) => {
                cur = next;
                matched += 1;
            }
            None => notes.push(format!("no counterpart marriage for {names:?}")),
        }
    }
    // continuation: compare divergence of the residues
    let tv_orig = tm_verdicts(&ln, comp.final_state(), mode, bounds);
    let tv_red = tm_verdicts(&ln_red, &cur, mode, bounds);
    let continuation_finite_both = match (tv_orig.inf.definite(), tv_red.inf.definite()) {
        (true, true) => Some(tv_orig.inf.is_yes() == tv_red.inf.is_yes()),
        _ => None,
    };
    Ok(PreservationReport {
        thunks_sent: std.thunks.len(),
        marriages_matched: matched,
        continuation_finite_both,
        notes,
    })
}

fn search_marriage(
    ln: &LinkNet,
    start: &MachineState,
    engaged: &[(crate::net::CellId, u8, crate::machine::Addr)],
    mode: Mode,
    cap: usize,
) -> Option<MachineState> {
    let mut want: Vec<_> = engaged.to_vec();
    want.sort();
    want.dedup();
    let mut queue = std::collections::VecDeque::new();
    let mut seen = BTreeSet::new();
    queue.push_back(start.clone());
    seen.insert(start.key());
    let mut visited = 0;
    while let Some(s) = queue.pop_front() {
        visited += 1;
        if visited > cap {
            return None;
        }
        for (step, next) in internal_successors(ln, &s, mode) {
            if let InternalStep::Marriage(f) = &step {
                let mut e = f.engaged.clone();
                e.sort();
                e.dedup();
                if e == want {
                    return Some(next);
                }
            }
            if seen.insert(next.key()) {
                queue.push_back(next);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::corpus;
    use crate::reduction::find_redexes;

    fn small_caps() -> Caps {
        Caps {
            depth: 5,
            state_cap: 4000,
            silent_budget: 8,
            label_size_cap: 4,
        }
    }

    #[test]
    fn gamma_annihilation_is_weakly_bisimilar() {
        let n = crate::net::parse::parse_net(
            "net gg\ncell G : gamma\ncell H : gamma\nwire G.p1 -- H.p1\n\
             free a = G.a1\nfree b = G.a2\nfree c = H.a1\nfree d = H.a2\n",
            Mode::Core,
        )
        .unwrap();
        let r = find_redexes(&n, Mode::Core)[0];
        let rep = soundness_check(&n, &r, Mode::Core, small_caps(), &default_probes()).unwrap();
        assert!(rep.equivalence.is_related(), "{:?}", rep.equivalence);
        assert!(rep.simulation.is_related(), "{:?}", rep.simulation);
    }

    #[test]
    fn worked_example_duplicator_rule_checks_after_rerooting() {
        let n = corpus::fig_worked();
        let r = find_redexes(&n, Mode::Core)[0];
        assert_eq!(r.kind, RedexKind::Dd);
        let rep = soundness_check(&n, &r, Mode::Core, small_caps(), &default_probes()).unwrap();
        assert!(
            rep.equivalence.is_related(),
            "equiv: {:?}",
            rep.equivalence
        );
        assert!(rep.simulation.is_related(), "sim: {:?}", rep.simulation);
    }

    #[test]
    fn adequacy_on_walkthrough_nets() {
        for net in [
            corpus::single_epsilon(),
            corpus::fig_worked(),
            corpus::fed_loop(),
        ] {
            let rep = adequacy_check(&net, Mode::Core, Bounds::default()).unwrap();
            assert!(rep.definite(), "{}: {:?}", net.name, rep);
            assert!(rep.pass(), "{}: {:?}", net.name, rep);
        }
    }

    #[test]
    fn disjoint_composition_is_compositional() {
        let a = corpus::single_epsilon();
        let mut b = corpus::single_epsilon();
        // rename the label to keep the label sets disjoint
        let n = crate::net::parse::parse_net(
            "net eps2\ncell E : epsilon\nfree y = E.p1\n",
            Mode::Core,
        )
        .unwrap();
        b = n;
        let v = compositionality_check(
            &a,
            &b,
            &PartialInjection::new(),
            Mode::Core,
            small_caps(),
            &default_probes(),
        )
        .unwrap();
        assert!(v.is_related(), "{v:?}");
    }
}
