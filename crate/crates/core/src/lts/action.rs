//! External actions and multiset labels for locative transition
//! systems.

use std::fmt;

use serde::Serialize;

use crate::machine::Conf;
use crate::net::{Label, PartialInjection};

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize)]
pub enum CellType {
    Gamma,
    Delta,
    /// Extension mode only.
    Epsilon,
}

impl CellType {
    pub fn name(self) -> &'static str {
        match self {
            CellType::Gamma => "g",
            CellType::Delta => "d",
            CellType::Epsilon => "e",
        }
    }
}

/// An action played at one location.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize)]
pub enum ExternalAction {
    Out(Conf),
    In(Conf),
    /// `Ma(c, d, conf)`: a marriage between a local cell of type `c`
    /// and an environment cell of type `d`.
    Ma(CellType, CellType, Conf),
    Kill(Conf),
    Cokill(Conf),
}

impl ExternalAction {
    /// The involution pairing complementary actions.
    pub fn dual(&self) -> ExternalAction {
        match self {
            ExternalAction::Out(c) => ExternalAction::In(c.clone()),
            ExternalAction::In(c) => ExternalAction::Out(c.clone()),
            ExternalAction::Ma(x, y, c) => ExternalAction::Ma(*y, *x, c.conj()),
            ExternalAction::Kill(c) => ExternalAction::Cokill(c.clone()),
            ExternalAction::Cokill(c) => ExternalAction::Kill(c.clone()),
        }
    }

    pub fn conf(&self) -> &Conf {
        match self {
            ExternalAction::Out(c)
            | ExternalAction::In(c)
            | ExternalAction::Ma(_, _, c)
            | ExternalAction::Kill(c)
            | ExternalAction::Cokill(c) => c,
        }
    }
}

impl fmt::Display for ExternalAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExternalAction::Out(c) => write!(f, "out({};{})", c.g, c.d),
            ExternalAction::In(c) => write!(f, "in({};{})", c.g, c.d),
            ExternalAction::Ma(x, y, c) => {
                write!(f, "ma[{}{}]({};{})", x.name(), y.name(), c.g, c.d)
            }
            ExternalAction::Kill(c) => write!(f, "kill({};{})", c.g, c.d),
            ExternalAction::Cokill(c) => write!(f, "cokill({};{})", c.g, c.d),
        }
    }
}

/// A finite multiset of located actions; the transition labels.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default, Serialize)]
pub struct LabelMultiset(Vec<(Label, ExternalAction)>);

impl LabelMultiset {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_entries(mut entries: Vec<(Label, ExternalAction)>) -> Self {
        entries.sort();
        LabelMultiset(entries)
    }

    pub fn singleton(l: Label, a: ExternalAction) -> Self {
        LabelMultiset(vec![(l, a)])
    }

    pub fn entries(&self) -> &[(Label, ExternalAction)] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn union(&self, other: &LabelMultiset) -> LabelMultiset {
        let mut v = self.0.clone();
        v.extend(other.0.iter().cloned());
        LabelMultiset::from_entries(v)
    }

    pub fn locations(&self) -> impl Iterator<Item = &Label> {
        self.0.iter().map(|(l, _)| l)
    }

    /// Splits into entries whose location satisfies `pred` and the
    /// rest.
    pub fn partition(&self, pred: impl Fn(&Label) -> bool) -> (LabelMultiset, LabelMultiset) {
        let (a, b): (Vec<_>, Vec<_>) = self.0.iter().cloned().partition(|(l, _)| pred(l));
        (LabelMultiset(a), LabelMultiset(b))
    }
}

impl fmt::Display for LabelMultiset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("{}");
        }
        f.write_str("{")?;
        for (i, (l, a)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}@{l}")?;
        }
        f.write_str("}")
    }
}

/// Whether `m` splits into pairs `(l, a)` / `(sigma(l), dual(a))`.
/// The empty multiset qualifies.
pub fn is_sigma_dual(m: &LabelMultiset, sigma: &PartialInjection) -> bool {
    fn go(mut rest: Vec<(Label, ExternalAction)>, sigma: &PartialInjection) -> bool {
        let Some((l, a)) = rest.pop() else { return true };
        // try to pair (l, a) with a remaining partner
        let partners: Vec<usize> = rest
            .iter()
            .enumerate()
            .filter(|(_, (l2, a2))| {
                (sigma.get(&l) == Some(l2) && a2 == &a.dual())
                    || (sigma.get(l2) == Some(&l) && a == a2.dual())
            })
            .map(|(i, _)| i)
            .collect();
        for i in partners {
            let mut next = rest.clone();
            next.remove(i);
            if go(next, sigma) {
                return true;
            }
        }
        false
    }
    go(m.0.clone(), sigma)
}
