//! Locative transition systems: labelled transition systems whose
//! labels are finite multisets of located actions, with synchronising
//! parallel composition and bounded (bi)simulation checking.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::Serialize;

use crate::machine::Conf;
use crate::net::{Label, PartialInjection};

pub mod action;
pub mod refine;

pub use action::{is_sigma_dual, CellType, ExternalAction, LabelMultiset};

/// A transition system over multiset labels. `successors` must be a
/// deterministic function of the state; inputs may additionally be
/// synthesized through [`Lts::inject`], which composition uses to
/// match outputs of the partner system.
pub trait Lts {
    type State: Clone + Ord + std::fmt::Debug;

    fn locations(&self) -> BTreeSet<Label>;
    fn initial(&self) -> Self::State;
    fn successors(&self, s: &Self::State) -> Vec<(LabelMultiset, Self::State)>;
    fn state_key(&self, s: &Self::State) -> String;
    /// Performs `in(conf)` at `loc` when the system supports it there.
    fn inject(&self, s: &Self::State, loc: &Label, conf: &Conf) -> Option<Self::State>;
}

/// Finite table-backed LTS, used by tests and the refinement oracle.
#[derive(Clone, Debug, Default)]
pub struct TableLts {
    pub locations: BTreeSet<Label>,
    pub initial: usize,
    pub transitions: Vec<Vec<(LabelMultiset, usize)>>,
}

impl Lts for TableLts {
    type State = usize;

    fn locations(&self) -> BTreeSet<Label> {
        self.locations.clone()
    }

    fn initial(&self) -> usize {
        self.initial
    }

    fn successors(&self, s: &usize) -> Vec<(LabelMultiset, usize)> {
        self.transitions.get(*s).cloned().unwrap_or_default()
    }

    fn state_key(&self, s: &usize) -> String {
        s.to_string()
    }

    fn inject(&self, s: &usize, loc: &Label, conf: &Conf) -> Option<usize> {
        let want = LabelMultiset::singleton(loc.clone(), ExternalAction::In(conf.clone()));
        self.successors(s)
            .into_iter()
            .find(|(l, _)| *l == want)
            .map(|(_, t)| t)
    }
}

/// Parallel composition along a partial injection of locations.
pub struct ProductLts<'a, A: Lts, B: Lts> {
    pub a: &'a A,
    pub b: &'a B,
    pub sigma: PartialInjection,
}

pub fn compose_lts<'a, A: Lts, B: Lts>(
    a: &'a A,
    b: &'a B,
    sigma: PartialInjection,
) -> ProductLts<'a, A, B> {
    debug_assert!(a.locations().is_disjoint(&b.locations()));
    ProductLts { a, b, sigma }
}

impl<'a, A: Lts, B: Lts> ProductLts<'a, A, B> {
    fn shared_a(&self, l: &Label) -> bool {
        self.sigma.get(l).is_some()
    }

    fn shared_b(&self, l: &Label) -> bool {
        self.sigma.contains_range(l)
    }

    /// Pairs off the shared parts of two labels; unpaired shared
    /// entries must be answerable by a synthesized input on the other
    /// side. Returns the injections to perform, or `None` when the
    /// labels cannot synchronise.
    fn match_shared(
        &self,
        la: &[(Label, ExternalAction)],
        lb: &[(Label, ExternalAction)],
    ) -> Option<(Vec<(Label, Conf)>, Vec<(Label, Conf)>)> {
        // backtracking multiset matching
        fn go(
            sigma: &PartialInjection,
            mut la: Vec<(Label, ExternalAction)>,
            lb: Vec<(Label, ExternalAction)>,
            inj_a: &mut Vec<(Label, Conf)>,
            inj_b: &mut Vec<(Label, Conf)>,
        ) -> bool {
            let Some((l, x)) = la.pop() else {
                // remaining b-entries must be inputs for the a side
                for (m, y) in &lb {
                    let partner = match sigma.preimage(m) {
                        Some(p) => p.clone(),
                        None => return false,
                    };
                    match y.dual() {
                        ExternalAction::In(c) => inj_a.push((partner, c)),
                        _ => return false,
                    }
                }
                return true;
            };
            let target = sigma.get(&l).expect("shared label").clone();
            let dual = x.dual();
            let mut matched = false;
            for (i, (m, y)) in lb.iter().enumerate() {
                if *m == target && *y == dual {
                    let mut rest = lb.clone();
                    rest.remove(i);
                    if go(sigma, la.clone(), rest, inj_a, inj_b) {
                        return true;
                    }
                    matched = true;
                }
            }
            let _ = matched;
            // no partner drawn from b's label: the b side must be able
            // to input the dual
            if let ExternalAction::In(c) = dual {
                inj_b.push((target, c));
                if go(sigma, la, lb, inj_a, inj_b) {
                    return true;
                }
                inj_b.pop();
            }
            false
        }
        let mut inj_a = Vec::new();
        let mut inj_b = Vec::new();
        if go(
            &self.sigma,
            la.to_vec(),
            lb.to_vec(),
            &mut inj_a,
            &mut inj_b,
        ) {
            Some((inj_a, inj_b))
        } else {
            None
        }
    }
}

impl<'a, A: Lts, B: Lts> Lts for ProductLts<'a, A, B> {
    type State = (A::State, B::State);

    fn locations(&self) -> BTreeSet<Label> {
        let mut s: BTreeSet<Label> = self
            .a
            .locations()
            .into_iter()
            .filter(|l| !self.shared_a(l))
            .collect();
        s.extend(
            self.b
                .locations()
                .into_iter()
                .filter(|l| !self.shared_b(l)),
        );
        s
    }

    fn initial(&self) -> Self::State {
        (self.a.initial(), self.b.initial())
    }

    fn successors(&self, s: &Self::State) -> Vec<(LabelMultiset, Self::State)> {
        let (sa, sb) = s;
        let mut out: Vec<(LabelMultiset, Self::State)> = Vec::new();
        let succ_a = self.a.successors(sa);
        let succ_b = self.b.successors(sb);
        // solo moves on non-shared locations
        for (la, ta) in &succ_a {
            if la.locations().all(|l| !self.shared_a(l)) {
                out.push((la.clone(), (ta.clone(), sb.clone())));
            }
        }
        for (lb, tb) in &succ_b {
            if lb.locations().all(|l| !self.shared_b(l)) {
                out.push((lb.clone(), (sa.clone(), tb.clone())));
            }
        }
        // joint moves: both sides move, or one side moves and the other
        // only absorbs synthesized inputs
        let stay_a: (LabelMultiset, A::State) = (LabelMultiset::empty(), sa.clone());
        let stay_b: (LabelMultiset, B::State) = (LabelMultiset::empty(), sb.clone());
        let mut a_options: Vec<&(LabelMultiset, A::State)> = succ_a.iter().collect();
        a_options.push(&stay_a);
        let mut b_options: Vec<&(LabelMultiset, B::State)> = succ_b.iter().collect();
        b_options.push(&stay_b);
        for (ia, (la, ta)) in a_options.iter().enumerate() {
            for (ib, (lb, tb)) in b_options.iter().enumerate() {
                let a_stays = ia == a_options.len() - 1;
                let b_stays = ib == b_options.len() - 1;
                if a_stays && b_stays {
                    continue;
                }
                let (la_shared, la_free) = la.partition(|l| self.shared_a(l));
                let (lb_shared, lb_free) = lb.partition(|l| self.shared_b(l));
                // only synchronising joint moves: independent joints would
                // bundle actions the firing-capped machines never bundle
                if la_shared.is_empty() && lb_shared.is_empty() {
                    continue;
                }
                let Some((inj_a, inj_b)) =
                    self.match_shared(la_shared.entries(), lb_shared.entries())
                else {
                    continue;
                };
                let mut fa = ta.clone();
                let mut ok = true;
                for (loc, conf) in &inj_a {
                    match self.a.inject(&fa, loc, conf) {
                        Some(next) => fa = next,
                        None => {
                            ok = false;
                            break;
                        }
                    }
                }
                if !ok {
                    continue;
                }
                let mut fb = tb.clone();
                for (loc, conf) in &inj_b {
                    match self.b.inject(&fb, loc, conf) {
                        Some(next) => fb = next,
                        None => {
                            ok = false;
                            break;
                        }
                    }
                }
                if !ok {
                    continue;
                }
                out.push((la_free.union(&lb_free), (fa, fb)));
            }
        }
        let mut keyed: Vec<(String, (LabelMultiset, Self::State))> = out
            .into_iter()
            .map(|(l, s)| (format!("{l:?}|{}", self.state_key(&s)), (l, s)))
            .collect();
        keyed.sort_by(|a, b| a.0.cmp(&b.0));
        keyed.dedup_by(|a, b| a.0 == b.0);
        keyed.into_iter().map(|(_, x)| x).collect()
    }

    fn state_key(&self, s: &Self::State) -> String {
        format!("({}|{})", self.a.state_key(&s.0), self.b.state_key(&s.1))
    }

    fn inject(&self, s: &Self::State, loc: &Label, conf: &Conf) -> Option<Self::State> {
        if self.a.locations().contains(loc) && !self.shared_a(loc) {
            return self
                .a
                .inject(&s.0, loc, conf)
                .map(|t| (t, s.1.clone()));
        }
        if self.b.locations().contains(loc) && !self.shared_b(loc) {
            return self
                .b
                .inject(&s.1, loc, conf)
                .map(|t| (s.0.clone(), t));
        }
        None
    }
}

/// Exploration and game caps.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Caps {
    pub depth: usize,
    pub state_cap: usize,
    pub silent_budget: usize,
    pub label_size_cap: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            depth: 6,
            state_cap: 6000,
            silent_budget: 10,
            label_size_cap: 8,
        }
    }
}

/// States reachable by `label` with silent closure before and after
/// (silent closure only, when the label is empty). Sets `truncated`
/// when the silent budget cut the closure.
pub fn weak_successors<L: Lts>(
    lts: &L,
    s: &L::State,
    label: &LabelMultiset,
    silent_budget: usize,
    truncated: &mut bool,
) -> Vec<L::State> {
    let pre = silent_closure(lts, std::slice::from_ref(s), silent_budget, truncated);
    if label.is_empty() {
        return pre;
    }
    let mut mids = Vec::new();
    for u in &pre {
        for (l, v) in lts.successors(u) {
            if &l == label {
                mids.push(v);
            }
        }
    }
    silent_closure(lts, &mids, silent_budget, truncated)
}

fn silent_closure<L: Lts>(
    lts: &L,
    starts: &[L::State],
    budget: usize,
    truncated: &mut bool,
) -> Vec<L::State> {
    let mut seen: BTreeMap<String, L::State> = BTreeMap::new();
    let mut queue: VecDeque<(L::State, usize)> = VecDeque::new();
    for s in starts {
        if seen.insert(lts.state_key(s), s.clone()).is_none() {
            queue.push_back((s.clone(), 0));
        }
    }
    while let Some((s, d)) = queue.pop_front() {
        if d >= budget {
            *truncated = true;
            continue;
        }
        for (l, t) in lts.successors(&s) {
            if l.is_empty() {
                let k = lts.state_key(&t);
                if !seen.contains_key(&k) {
                    seen.insert(k, t.clone());
                    queue.push_back((t, d + 1));
                }
            }
        }
    }
    seen.into_values().collect()
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
pub enum EquivMode {
    Strong,
    Weak,
}

/// Three-valued verdict with a replayable distinguishing trace.
/// `complete` is true when no cap was hit anywhere, making the
/// positive verdict exact rather than depth-bounded.
#[derive(Clone, Debug, Serialize)]
pub enum Verdict {
    Related {
        explored_pairs: usize,
        complete: bool,
        sample: Vec<(String, String)>,
    },
    Distinguished {
        trace: Vec<String>,
    },
    BoundExhausted {
        explored_pairs: usize,
    },
}

impl Verdict {
    pub fn is_related(&self) -> bool {
        matches!(self, Verdict::Related { .. })
    }

    pub fn is_exact_related(&self) -> bool {
        matches!(self, Verdict::Related { complete: true, .. })
    }

    pub fn is_distinguished(&self) -> bool {
        matches!(self, Verdict::Distinguished { .. })
    }
}

/// Memoizes successor lists; the games revisit states heavily.
struct Cached<'l, L: Lts> {
    inner: &'l L,
    memo: std::cell::RefCell<HashMap<String, Vec<(LabelMultiset, L::State)>>>,
}

impl<'l, L: Lts> Cached<'l, L> {
    fn new(inner: &'l L) -> Self {
        Cached {
            inner,
            memo: std::cell::RefCell::new(HashMap::new()),
        }
    }
}

impl<'l, L: Lts> Lts for Cached<'l, L> {
    type State = L::State;

    fn locations(&self) -> BTreeSet<Label> {
        self.inner.locations()
    }

    fn initial(&self) -> L::State {
        self.inner.initial()
    }

    fn successors(&self, s: &L::State) -> Vec<(LabelMultiset, L::State)> {
        let key = self.inner.state_key(s);
        if let Some(v) = self.memo.borrow().get(&key) {
            return v.clone();
        }
        let v = self.inner.successors(s);
        self.memo.borrow_mut().insert(key, v.clone());
        v
    }

    fn state_key(&self, s: &L::State) -> String {
        self.inner.state_key(s)
    }

    fn inject(&self, s: &L::State, loc: &Label, conf: &Conf) -> Option<L::State> {
        self.inner.inject(s, loc, conf)
    }
}

struct Challenge {
    desc: String,
    /// the defender's enumeration was cut by a budget
    truncated: bool,
    answers: Vec<usize>,
}

struct Node {
    key: (String, String),
    challenges: Vec<Challenge>,
    /// expansion cut by depth or the state cap
    frontier: bool,
}

/// Explicit game graph, solved by two fixpoints: a least fixpoint for
/// failure (some challenge with a complete answer set whose answers
/// all failed) and a greatest fixpoint for proof. Frontier pairs and
/// truncated challenges are treated optimistically, so a positive
/// verdict is exact only when nothing was cut (`complete`).
fn run_game<A: Lts, B: Lts>(ra: &A, rb: &B, mode: EquivMode, bisim: bool, caps: Caps) -> Verdict {
    let a = &Cached::new(ra);
    let b = &Cached::new(rb);
    let mut nodes: Vec<Node> = Vec::new();
    let mut index: HashMap<(String, String), usize> = HashMap::new();
    let mut queue: VecDeque<(A::State, B::State, usize, usize)> = VecDeque::new();
    let root = (a.initial(), b.initial());
    let root_key = (a.state_key(&root.0), b.state_key(&root.1));
    index.insert(root_key.clone(), 0);
    nodes.push(Node {
        key: root_key,
        challenges: Vec::new(),
        frontier: false,
    });
    queue.push_back((root.0, root.1, 0, caps.depth));

    let intern =
        |sa: &A::State, sb: &B::State, depth: usize,
         nodes: &mut Vec<Node>,
         index: &mut HashMap<(String, String), usize>,
         queue: &mut VecDeque<(A::State, B::State, usize, usize)>|
         -> usize {
            let key = (a.state_key(sa), b.state_key(sb));
            if let Some(&i) = index.get(&key) {
                return i;
            }
            let i = nodes.len();
            index.insert(key.clone(), i);
            nodes.push(Node {
                key,
                challenges: Vec::new(),
                frontier: false,
            });
            queue.push_back((sa.clone(), sb.clone(), i, depth));
            i
        };

    while let Some((sa, sb, me, depth)) = queue.pop_front() {
        if depth == 0 || nodes.len() >= caps.state_cap {
            nodes[me].frontier = true;
            continue;
        }
        let mut challenges = Vec::new();
        for (label, ta) in a.successors(&sa) {
            let mut truncated = false;
            let bs: Vec<B::State> = match mode {
                EquivMode::Strong => b
                    .successors(&sb)
                    .into_iter()
                    .filter(|(l, _)| *l == label)
                    .map(|(_, t)| t)
                    .collect(),
                EquivMode::Weak => {
                    weak_successors(b, &sb, &label, caps.silent_budget, &mut truncated)
                }
            };
            let answers = bs
                .iter()
                .map(|tb| intern(&ta, tb, depth - 1, &mut nodes, &mut index, &mut queue))
                .collect();
            challenges.push(Challenge {
                desc: format!("left {}", label),
                truncated,
                answers,
            });
        }
        if bisim {
            for (label, tb) in b.successors(&sb) {
                let mut truncated = false;
                let asx: Vec<A::State> = match mode {
                    EquivMode::Strong => a
                        .successors(&sa)
                        .into_iter()
                        .filter(|(l, _)| *l == label)
                        .map(|(_, t)| t)
                        .collect(),
                    EquivMode::Weak => {
                        weak_successors(a, &sa, &label, caps.silent_budget, &mut truncated)
                    }
                };
                let answers = asx
                    .iter()
                    .map(|ta| intern(ta, &tb, depth - 1, &mut nodes, &mut index, &mut queue))
                    .collect();
                challenges.push(Challenge {
                    desc: format!("right {}", label),
                    truncated,
                    answers,
                });
            }
        }
        nodes[me].challenges = challenges;
    }

    // least fixpoint: definite failures
    let n = nodes.len();
    let mut failed = vec![false; n];
    loop {
        let mut changed = false;
        for i in 0..n {
            if failed[i] || nodes[i].frontier {
                continue;
            }
            let fails = nodes[i].challenges.iter().any(|c| {
                !c.truncated && c.answers.iter().all(|&j| failed[j])
            });
            if fails {
                failed[i] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    // greatest fixpoint: frontier pairs are vacuously fine, truncated
    // challenges count as answerable
    let mut proved: Vec<bool> = (0..n).map(|i| !failed[i]).collect();
    loop {
        let mut changed = false;
        for i in 0..n {
            if !proved[i] || nodes[i].frontier {
                continue;
            }
            let ok = nodes[i]
                .challenges
                .iter()
                .all(|c| c.truncated || c.answers.iter().any(|&j| proved[j]));
            if !ok {
                proved[i] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let complete = nodes.iter().all(|nd| !nd.frontier)
        && nodes
            .iter()
            .all(|nd| nd.challenges.iter().all(|c| !c.truncated));
    if proved[0] {
        let sample: Vec<(String, String)> = nodes
            .iter()
            .enumerate()
            .filter(|(i, _)| proved[*i])
            .map(|(_, nd)| nd.key.clone())
            .take(256)
            .collect();
        Verdict::Related {
            explored_pairs: proved.iter().filter(|p| **p).count(),
            complete,
            sample,
        }
    } else if failed[0] {
        // extract a distinguishing trace by descending failing
        // challenges whose answers all fail
        let mut trace = Vec::new();
        let mut at = 0usize;
        for _ in 0..caps.depth {
            if !failed[at] {
                break;
            }
            let Some(ch) = nodes[at]
                .challenges
                .iter()
                .find(|c| !c.truncated && c.answers.iter().all(|&j| failed[j]))
            else {
                break;
            };
            trace.push(format!(
                "at {:?} challenger plays {}; every answer fails",
                nodes[at].key, ch.desc
            ));
            match ch.answers.first() {
                Some(&j) => at = j,
                None => {
                    trace.push("defender has no answer at all".to_string());
                    break;
                }
            }
        }
        Verdict::Distinguished { trace }
    } else {
        Verdict::BoundExhausted {
            explored_pairs: n,
        }
    }
}

/// Bounded bisimulation game between the initial states.
pub fn check_bisimulation<A: Lts, B: Lts>(a: &A, b: &B, mode: EquivMode, caps: Caps) -> Verdict {
    run_game(a, b, mode, true, caps)
}

/// Bounded simulation game: every move of `a` is answered by `b`.
pub fn check_simulation<A: Lts, B: Lts>(a: &A, b: &B, mode: EquivMode, caps: Caps) -> Verdict {
    run_game(a, b, mode, false, caps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::Conf;

    fn lab(s: &str) -> Label {
        Label::new(s)
    }

    fn in_label(s: &str) -> LabelMultiset {
        LabelMultiset::singleton(lab(s), ExternalAction::In(Conf::empty()))
    }

    fn out_label(s: &str) -> LabelMultiset {
        LabelMultiset::singleton(lab(s), ExternalAction::Out(Conf::empty()))
    }

    #[test]
    fn identity_is_related() {
        let t = TableLts {
            locations: [lab("l")].into(),
            initial: 0,
            transitions: vec![vec![(in_label("l"), 1)], vec![]],
        };
        assert!(check_bisimulation(&t, &t, EquivMode::Strong, Caps::default()).is_related());
    }

    #[test]
    fn missing_transition_distinguishes() {
        let a = TableLts {
            locations: [lab("l")].into(),
            initial: 0,
            transitions: vec![vec![(in_label("l"), 1)], vec![]],
        };
        let b = TableLts {
            locations: [lab("l")].into(),
            initial: 0,
            transitions: vec![vec![]],
        };
        let v = check_bisimulation(&a, &b, EquivMode::Strong, Caps::default());
        assert!(v.is_distinguished());
    }

    #[test]
    fn weak_closure_skips_silent_steps() {
        // a: silent then out; b: out directly
        let a = TableLts {
            locations: [lab("l")].into(),
            initial: 0,
            transitions: vec![
                vec![(LabelMultiset::empty(), 1)],
                vec![(out_label("l"), 2)],
                vec![],
            ],
        };
        let b = TableLts {
            locations: [lab("l")].into(),
            initial: 0,
            transitions: vec![vec![(out_label("l"), 1)], vec![]],
        };
        assert!(check_bisimulation(&a, &b, EquivMode::Weak, Caps::default()).is_related());
        assert!(check_bisimulation(&a, &b, EquivMode::Strong, Caps::default()).is_distinguished());
    }

    #[test]
    fn composition_synchronises_out_with_in() {
        // a: out at l (shared); b: in at m (shared): composite does a
        // silent step
        let a = TableLts {
            locations: [lab("l")].into(),
            initial: 0,
            transitions: vec![vec![(out_label("l"), 1)], vec![]],
        };
        let b = TableLts {
            locations: [lab("m")].into(),
            initial: 0,
            transitions: vec![vec![(in_label("m"), 1)], vec![]],
        };
        let sigma = PartialInjection::from_pairs([(lab("l"), lab("m"))]).unwrap();
        let p = compose_lts(&a, &b, sigma);
        assert!(p.locations().is_empty());
        let succ = p.successors(&p.initial());
        assert!(
            succ.iter().any(|(l, s)| l.is_empty() && *s == (1, 1)),
            "expected a synchronised silent move, got {succ:?}"
        );
    }

    #[test]
    fn interleaving_when_sigma_is_empty() {
        let a = TableLts {
            locations: [lab("l")].into(),
            initial: 0,
            transitions: vec![vec![(out_label("l"), 1)], vec![]],
        };
        let b = TableLts {
            locations: [lab("m")].into(),
            initial: 0,
            transitions: vec![vec![(out_label("m"), 1)], vec![]],
        };
        let p = compose_lts(&a, &b, PartialInjection::new());
        let succ = p.successors(&p.initial());
        // every solo lifts; nothing synchronises
        assert!(succ.iter().any(|(l, s)| *l == out_label("l") && *s == (1, 0)));
        assert!(succ.iter().any(|(l, s)| *l == out_label("m") && *s == (0, 1)));
        assert_eq!(succ.len(), 2);
    }

    #[test]
    fn commutativity_of_composition_up_to_strong_bisimilarity() {
        let a = TableLts {
            locations: [lab("l")].into(),
            initial: 0,
            transitions: vec![vec![(out_label("l"), 1)], vec![]],
        };
        let b = TableLts {
            locations: [lab("m")].into(),
            initial: 0,
            transitions: vec![vec![(in_label("m"), 1)], vec![]],
        };
        let sigma = PartialInjection::from_pairs([(lab("l"), lab("m"))]).unwrap();
        let ab = compose_lts(&a, &b, sigma.clone());
        let ba = compose_lts(&b, &a, sigma.inverse());
        assert!(check_bisimulation(&ab, &ba, EquivMode::Strong, Caps::default()).is_related());
    }
}
