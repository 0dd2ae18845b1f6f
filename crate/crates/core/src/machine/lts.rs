//! The machine as a locative transition system: silent internal steps
//! plus the external action bundles.

use std::collections::BTreeSet;

use crate::lts::action::LabelMultiset;
use crate::lts::Lts;
use crate::net::{Label, LinkNet, Mode, Net};

use super::external::{external_successors, internal_successors};
use super::{initial_state, leaving_free, Conf, MachineState, MarriageTok, Origin, OriginSite, Token};

/// Machine view of a net. Inputs are enumerated over `in_universe`
/// (injection is synthesized on demand during composition), external
/// bundles are bounded by `label_cap` actions and `bundle_cap`
/// simultaneous rule firings.
#[derive(Clone)]
pub struct MachineLts {
    pub ln: LinkNet,
    pub mode: Mode,
    pub in_universe: BTreeSet<Conf>,
    pub label_cap: usize,
    pub bundle_cap: usize,
    /// enumerated visitors per free port; keeps the state space finite
    pub visitor_cap: usize,
    pub start: MachineState,
}

impl MachineLts {
    pub fn new(net: &Net, mode: Mode) -> MachineLts {
        let ln = LinkNet::build(net);
        let start = initial_state(&ln);
        MachineLts {
            ln,
            mode,
            in_universe: [Conf::empty()].into(),
            label_cap: 8,
            bundle_cap: 1,
            visitor_cap: 2,
            start,
        }
    }

    pub fn with_universe(mut self, universe: BTreeSet<Conf>) -> Self {
        self.in_universe = universe;
        self
    }

    pub fn rerooted(mut self, s: MachineState) -> Self {
        self.start = s;
        self
    }
}

impl Lts for MachineLts {
    type State = MachineState;

    fn locations(&self) -> BTreeSet<Label> {
        self.ln.free_labels()
    }

    fn initial(&self) -> MachineState {
        self.start.clone()
    }

    fn successors(&self, s: &MachineState) -> Vec<(LabelMultiset, MachineState)> {
        let mut out: Vec<(LabelMultiset, MachineState)> = internal_successors(&self.ln, s, self.mode)
            .into_iter()
            .map(|(_, t)| (LabelMultiset::empty(), t))
            .collect();
        out.extend(external_successors(
            &self.ln,
            s,
            &self.in_universe,
            self.mode,
            self.label_cap,
            self.bundle_cap,
            self.visitor_cap,
        ));
        let mut keyed: Vec<(String, (LabelMultiset, MachineState))> = out
            .into_iter()
            .map(|(l, s)| (format!("{l:?}|{}", s.key()), (l, s)))
            .collect();
        keyed.sort_by(|a, b| a.0.cmp(&b.0));
        keyed.dedup_by(|a, b| a.0 == b.0);
        keyed.into_iter().map(|(_, x)| x).collect()
    }

    fn state_key(&self, s: &MachineState) -> String {
        s.key()
    }

    fn inject(&self, s: &MachineState, loc: &Label, conf: &Conf) -> Option<MachineState> {
        if !self.ln.free_labels().contains(loc) {
            return None;
        }
        let tok = MarriageTok {
            pos: leaving_free(&self.ln, loc)?,
            conf: conf.clone(),
            origin: Origin {
                site: OriginSite::Free { label: loc.clone() },
                conf: conf.clone(),
            },
        };
        let mut t = s.clone();
        t.insert(Token::Marriage(tok));
        Some(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lts::action::ExternalAction;
    use crate::net::parse::parse_net;

    #[test]
    fn inputs_always_enabled_and_outputs_follow_arrivals() {
        let n = parse_net("net w\nfree a = @b\n", Mode::Core).unwrap();
        let m = MachineLts::new(&n, Mode::Core);
        let s0 = m.initial();
        assert!(s0.is_empty());
        let succ = m.successors(&s0);
        // in at both ports
        let ins: Vec<_> = succ
            .iter()
            .filter(|(l, _)| {
                l.len() == 1 && matches!(l.entries()[0].1, ExternalAction::In(_))
            })
            .collect();
        assert_eq!(ins.len(), 2);
        // inject at a, cross to b, flow out at b
        let s1 = m.inject(&s0, &Label::new("a"), &Conf::empty()).unwrap();
        let s2s = m.successors(&s1);
        let cross = s2s
            .iter()
            .find(|(l, _)| l.is_empty())
            .expect("crossing move");
        let s2 = cross.1.clone();
        let outs: Vec<_> = m
            .successors(&s2)
            .into_iter()
            .filter(|(l, _)| {
                l.len() == 1
                    && l.entries()[0].0 == Label::new("b")
                    && matches!(l.entries()[0].1, ExternalAction::Out(_))
            })
            .collect();
        assert_eq!(outs.len(), 1);
        // the matching token stays behind
        assert_eq!(outs[0].1.matchings().count(), 1);
    }

    #[test]
    fn combined_labels_on_distinct_tokens() {
        let n = parse_net("net w\nfree a = @b\nfree c = @d\n", Mode::Core).unwrap();
        let mut m = MachineLts::new(&n, Mode::Core);
        m.bundle_cap = 2;
        let succ = m.successors(&m.initial());
        // two ins at different ports can combine
        assert!(succ.iter().any(|(l, _)| l.len() == 2
            && l.entries().iter().all(|(_, a)| matches!(a, ExternalAction::In(_)))));
    }
}
