//! Parallel composition of nets along a partial injection of labels.

use super::{Label, Mode, Net, NetError, PartialInjection, PortId, Wire};

/// Disjoint union of `a` and `b`, fusing the free port `l` of `a` with
/// the free port `sigma(l)` of `b` by a wire, for every `l` in the
/// domain. Fused labels disappear; the rest keep their names.
pub fn compose_nets(
    a: &Net,
    b: &Net,
    sigma: &PartialInjection,
    mode: Mode,
) -> Result<Net, NetError> {
    let ra = a.validate(mode);
    if !ra.is_empty() {
        return Err(NetError::Invalid(ra));
    }
    let rb = b.validate(mode);
    if !rb.is_empty() {
        return Err(NetError::Invalid(rb));
    }
    for l in a.labels() {
        if b.labels().contains(&l) {
            return Err(NetError::LabelClash(l));
        }
    }
    for l in sigma.domain() {
        if !a.free.contains_key(l) {
            return Err(NetError::SigmaOutOfRange(l.clone()));
        }
    }
    for l in sigma.range() {
        if !b.free.contains_key(l) {
            return Err(NetError::SigmaOutOfRange(l.clone()));
        }
    }

    let mut out = Net::new(format!("{}+{}", a.name, b.name));
    // Copy a as-is, then b with ports shifted.
    let shift = a
        .ports()
        .iter()
        .map(|p| p.0 + 1)
        .max()
        .unwrap_or(0);
    out.cells = a.cells.clone();
    out.wires = a.wires.clone();
    let move_port = |p: PortId| PortId(p.0 + shift);
    for c in &b.cells {
        let mut c2 = c.clone();
        c2.name = format!("b.{}", c.name);
        c2.principal = c.principal.iter().map(|p| move_port(*p)).collect();
        c2.aux = c.aux.iter().map(|p| move_port(*p)).collect();
        out.cells.push(c2);
    }
    for w in &b.wires {
        out.wires.push(Wire::new(move_port(w.0), move_port(w.1)));
    }
    let top = b.ports().iter().map(|p| p.0 + 1).max().unwrap_or(0) + shift;
    out.set_next_port(top.max(shift));

    // Labels: keep non-fused, wire fused pairs together.
    for (l, p) in &a.free {
        if sigma.get(l).is_none() {
            out.free.insert(l.clone(), *p);
        }
    }
    for (l, p) in &b.free {
        if !sigma.contains_range(l) {
            out.free.insert(l.clone(), move_port(*p));
        }
    }
    for (l, r) in sigma.iter() {
        let pa = a.free[l];
        let pb = move_port(b.free[r]);
        out.wires.push(Wire::new(pa, pb));
    }
    debug_assert!(out.validate(mode).is_empty(), "composition must validate");
    Ok(out)
}

impl Net {
    pub(crate) fn set_next_port(&mut self, n: u32) {
        self.next_port = self.next_port.max(n);
    }
}

/// Splits labels into `(kept_from_a, kept_from_b)` after composing
/// along `sigma`; handy for location bookkeeping.
pub fn composed_labels(
    a: &Net,
    b: &Net,
    sigma: &PartialInjection,
) -> (Vec<Label>, Vec<Label>) {
    let ka = a
        .labels()
        .into_iter()
        .filter(|l| sigma.get(l).is_none())
        .collect();
    let kb = b
        .labels()
        .into_iter()
        .filter(|l| !sigma.contains_range(l))
        .collect();
    (ka, kb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::parse::parse_net;
    use crate::net::CellKind;

    #[test]
    fn empty_sigma_is_disjoint_union() {
        let a = parse_net("net a\ncell E : epsilon\nfree x = E.p1\n", Mode::Core).unwrap();
        let b = parse_net("net b\ncell F : epsilon\nfree y = F.p1\n", Mode::Core).unwrap();
        let c = compose_nets(&a, &b, &PartialInjection::new(), Mode::Core).unwrap();
        assert!(c.validate(Mode::Core).is_empty());
        assert_eq!(c.free.len(), 2);
        assert_eq!(c.cells.len(), 2);
    }

    #[test]
    fn fusing_counts_free_ports() {
        // gamma with free principal side vs epsilon net
        let a = parse_net(
            "net a\ncell G : gamma\nfree p = G.p1\nfree q = G.a1\nfree r = G.a2\n",
            Mode::Core,
        )
        .unwrap();
        let b = parse_net("net b\ncell E : epsilon\nfree e = E.p1\n", Mode::Core).unwrap();
        let sigma =
            PartialInjection::from_pairs([(Label::new("p"), Label::new("e"))]).unwrap();
        let c = compose_nets(&a, &b, &sigma, Mode::Core).unwrap();
        assert!(c.validate(Mode::Core).is_empty());
        // gamma faces epsilon; two labels remain
        assert_eq!(c.free.len(), 2);
        let redexes = crate::reduction::find_redexes(&c, Mode::Extension);
        assert_eq!(redexes.len(), 1);
    }

    #[test]
    fn label_clash_rejected() {
        let a = parse_net("net a\ncell E : epsilon\nfree x = E.p1\n", Mode::Core).unwrap();
        let b = parse_net("net b\ncell F : epsilon\nfree x = F.p1\n", Mode::Core).unwrap();
        assert!(matches!(
            compose_nets(&a, &b, &PartialInjection::new(), Mode::Core),
            Err(NetError::LabelClash(_))
        ));
    }

    #[test]
    fn composition_cell_multiset_is_union() {
        let a = parse_net("net a\ncell E : epsilon\nfree x = E.p1\n", Mode::Core).unwrap();
        let b = parse_net(
            "net b\ncell G : gamma\nfree p = G.p1\nfree q = G.a1\nfree r = G.a2\n",
            Mode::Core,
        )
        .unwrap();
        let c = compose_nets(&a, &b, &PartialInjection::new(), Mode::Core).unwrap();
        let mut kinds: Vec<CellKind> = c.cells.iter().map(|c| c.kind).collect();
        kinds.sort();
        assert_eq!(kinds, vec![CellKind::Gamma, CellKind::Epsilon]);
    }
}
