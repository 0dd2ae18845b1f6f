//! Brute-force strong-bisimilarity decision for finite table LTSs by
//! signature partition refinement. Serves as the oracle the game
//! checker is compared against.

use std::collections::BTreeMap;

use super::{LabelMultiset, TableLts};

/// Block index per state of `a` followed by the states of `b`.
/// Two states are strongly bisimilar iff they end in the same block.
pub fn refine_partition(a: &TableLts, b: &TableLts) -> (Vec<usize>, Vec<usize>) {
    let na = a.transitions.len();
    let nb = b.transitions.len();
    let mut block: Vec<usize> = vec![0; na + nb];
    loop {
        // signature: sorted multiset of (label, successor block)
        let mut sigs: Vec<Vec<(LabelMultiset, usize)>> = Vec::with_capacity(na + nb);
        for s in 0..na + nb {
            let succ = if s < na {
                a.transitions[s].clone()
            } else {
                b.transitions[s - na].clone()
            };
            let mut sig: Vec<(LabelMultiset, usize)> = succ
                .into_iter()
                .map(|(l, t)| (l, block[if s < na { t } else { t + na }]))
                .collect();
            sig.sort();
            sig.dedup();
            sigs.push(sig);
        }
        let mut renumber: BTreeMap<(usize, Vec<(LabelMultiset, usize)>), usize> = BTreeMap::new();
        let mut next: Vec<usize> = Vec::with_capacity(na + nb);
        for s in 0..na + nb {
            let key = (block[s], sigs[s].clone());
            let id = renumber.len();
            let v = *renumber.entry(key).or_insert(id);
            next.push(v);
        }
        if next == block {
            break;
        }
        block = next;
    }
    let (ba, bb) = block.split_at(na);
    (ba.to_vec(), bb.to_vec())
}

/// Strong bisimilarity of the two initial states.
pub fn bisimilar_by_refinement(a: &TableLts, b: &TableLts) -> bool {
    let (ba, bb) = refine_partition(a, b);
    ba[a.initial] == bb[b.initial]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lts::action::ExternalAction;
    use crate::lts::{check_bisimulation, Caps, EquivMode, Lts};
    use crate::machine::Conf;
    use crate::net::Label;

    fn out(l: &str) -> LabelMultiset {
        LabelMultiset::singleton(Label::new(l), ExternalAction::Out(Conf::empty()))
    }

    #[test]
    fn unrolled_copies_are_bisimilar() {
        let a = TableLts {
            locations: [Label::new("l")].into(),
            initial: 0,
            transitions: vec![vec![(out("l"), 1)], vec![(out("l"), 0)]],
        };
        let b = TableLts {
            locations: [Label::new("l")].into(),
            initial: 0,
            transitions: vec![vec![(out("l"), 0)]],
        };
        assert!(bisimilar_by_refinement(&a, &b));
        assert!(check_bisimulation(&a, &b, EquivMode::Strong, Caps::default()).is_related());
    }

    #[test]
    fn branching_difference_detected() {
        // a can choose between two different follow-ups; b cannot
        let a = TableLts {
            locations: [Label::new("l"), Label::new("m")].into(),
            initial: 0,
            transitions: vec![
                vec![(out("l"), 1), (out("l"), 2)],
                vec![(out("l"), 3)],
                vec![(out("m"), 3)],
                vec![],
            ],
        };
        let b = TableLts {
            locations: [Label::new("l"), Label::new("m")].into(),
            initial: 0,
            transitions: vec![
                vec![(out("l"), 1)],
                vec![(out("l"), 3), (out("m"), 3)],
                vec![],
                vec![],
            ],
        };
        assert!(!bisimilar_by_refinement(&a, &b));
        let v = check_bisimulation(&a, &b, EquivMode::Strong, Caps::default());
        assert!(v.is_distinguished());
    }
}
