//! Line-oriented net DSL and the canonical JSON form.
//!
//! ```text
//! net fig5a
//! cell A : delta2
//! cell C : gamma
//! wire A.p1 -- C.a2      # portrefs: <cell>.p<k> / <cell>.a<j>
//! free x = A.a1          # labelled free port wired to a portref
//! free y = @z            # wires two free ports directly
//! ```
//!
//! `#` starts a comment; one statement per line. Serialization is
//! deterministic: cells ordered by kind then canonical numbering,
//! wires sorted.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Cell, CellKind, Label, Mode, Net, PortId, Violation};

#[derive(Clone, Debug, thiserror::Error)]
pub enum ParseError {
    #[error("line {line}, col {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("net does not validate: {0:?}")]
    Validation(Vec<Violation>),
}

fn syntax(line: usize, col: usize, msg: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        col,
        msg: msg.into(),
    }
}

struct PortRef {
    cell: String,
    prin: bool,
    idx: usize,
}

fn parse_portref(tok: &str, line: usize, col: usize) -> Result<PortRef, ParseError> {
    let (cell, port) = tok
        .split_once('.')
        .ok_or_else(|| syntax(line, col, format!("expected <cell>.<port>, got `{tok}`")))?;
    if cell.is_empty() {
        return Err(syntax(line, col, "empty cell name"));
    }
    let (prin, num) = match port.as_bytes().first() {
        Some(b'p') => (true, &port[1..]),
        Some(b'a') => (false, &port[1..]),
        _ => return Err(syntax(line, col, format!("bad port `{port}` (want pN or aN)"))),
    };
    let idx: usize = num
        .parse()
        .map_err(|_| syntax(line, col, format!("bad port index `{num}`")))?;
    if idx == 0 {
        return Err(syntax(line, col, "port indices start at 1"));
    }
    Ok(PortRef {
        cell: cell.to_string(),
        prin,
        idx: idx - 1,
    })
}

/// Parses the DSL into a net and validates it.
pub fn parse_net(text: &str, mode: Mode) -> Result<Net, ParseError> {
    let mut net = Net::new("net");
    let mut cells: BTreeMap<String, usize> = BTreeMap::new();
    let mut free_ports: BTreeMap<String, PortId> = BTreeMap::new();

    let resolve = |net: &Net,
                       cells: &BTreeMap<String, usize>,
                       r: &PortRef,
                       line: usize|
     -> Result<PortId, ParseError> {
        let ci = *cells
            .get(&r.cell)
            .ok_or_else(|| syntax(line, 1, format!("unknown cell `{}`", r.cell)))?;
        let cell = &net.cells[ci];
        let list = if r.prin { &cell.principal } else { &cell.aux };
        list.get(r.idx).copied().ok_or_else(|| {
            syntax(
                line,
                1,
                format!(
                    "cell `{}` ({}) has no {} port {}",
                    r.cell,
                    cell.kind.name(),
                    if r.prin { "principal" } else { "auxiliary" },
                    r.idx + 1
                ),
            )
        })
    };

    for (li, raw) in text.lines().enumerate() {
        let line = li + 1;
        let stmt = raw.split('#').next().unwrap_or("").trim();
        if stmt.is_empty() {
            continue;
        }
        let words: Vec<&str> = stmt.split_whitespace().collect();
        match words[0] {
            "net" => {
                if words.len() != 2 {
                    return Err(syntax(line, 1, "usage: net <name>"));
                }
                net.name = words[1].to_string();
            }
            "cell" => {
                // cell <id> : <kind>
                if words.len() != 4 || words[2] != ":" {
                    return Err(syntax(line, 1, "usage: cell <id> : <kind>"));
                }
                let kind = match words[3] {
                    "gamma" => CellKind::Gamma,
                    "delta2" => CellKind::Delta2,
                    "epsilon" => CellKind::Epsilon,
                    "delta1" => CellKind::Delta1,
                    other => return Err(syntax(line, 1, format!("unknown kind `{other}`"))),
                };
                if cells.contains_key(words[1]) {
                    return Err(syntax(line, 1, format!("duplicate cell `{}`", words[1])));
                }
                net.add_cell(words[1], kind);
                cells.insert(words[1].to_string(), net.cells.len() - 1);
            }
            "wire" => {
                // wire <portref> -- <portref>
                if words.len() != 4 || words[2] != "--" {
                    return Err(syntax(line, 1, "usage: wire <portref> -- <portref>"));
                }
                let a = parse_portref(words[1], line, 1)?;
                let b = parse_portref(words[3], line, 1)?;
                let pa = resolve(&net, &cells, &a, line)?;
                let pb = resolve(&net, &cells, &b, line)?;
                net.add_wire(pa, pb);
            }
            "free" => {
                // free <label> = <portref> | free <label> = @<label>
                if words.len() != 4 || words[2] != "=" {
                    return Err(syntax(line, 1, "usage: free <label> = <portref>|@<label>"));
                }
                let label = Label::new(words[1]);
                if net.free.contains_key(&label) {
                    return Err(syntax(line, 1, format!("duplicate label `{label}`")));
                }
                if let Some(other) = words[3].strip_prefix('@') {
                    let here = net.add_free_port(label.clone());
                    free_ports.insert(words[1].to_string(), here);
                    let there = match free_ports.get(other) {
                        Some(p) => *p,
                        None => {
                            let p = net.add_free_port(Label::new(other));
                            free_ports.insert(other.to_string(), p);
                            p
                        }
                    };
                    net.add_wire(here, there);
                } else {
                    let r = parse_portref(words[3], line, 1)?;
                    let target = resolve(&net, &cells, &r, line)?;
                    let p = net.add_free(label, target);
                    free_ports.insert(words[1].to_string(), p);
                }
            }
            other => return Err(syntax(line, 1, format!("unknown statement `{other}`"))),
        }
    }
    let report = net.validate(mode);
    if !report.is_empty() {
        return Err(ParseError::Validation(report));
    }
    Ok(net)
}

/// Deterministic DSL text for a net. Cells are emitted in canonical
/// order (kind, then canonical numbering anchored at the sorted free
/// labels), links sorted, so equal nets serialize identically.
/// Connector chains collapse to single statements; closed connector
/// rings (reduction garbage, inexpressible in the DSL) are dropped
/// with a comment.
pub fn serialize_net(net: &Net) -> String {
    use super::{Endpoint, LinkNet, PortSel};
    let ln = LinkNet::build(net);
    let order = super::iso::canonical_cell_order(net);
    let mut out = String::new();
    out.push_str(&format!("net {}\n", net.name));
    let mut names: BTreeMap<u32, String> = BTreeMap::new();
    for (rank, &ci) in order.iter().enumerate() {
        names.insert(ci as u32, format!("c{rank}"));
        out.push_str(&format!("cell c{rank} : {}\n", net.cells[ci].kind.name()));
    }
    let desc = |e: &Endpoint| -> String {
        match e {
            Endpoint::Cell { cell, sel } => format!("{}.{}", names[&cell.0], sel.display()),
            Endpoint::Free { label } => format!("@{label}"),
        }
    };
    let _ = PortSel::Prin(0);
    let mut frees: Vec<String> = Vec::new();
    let mut wires: Vec<String> = Vec::new();
    let mut seen_free: std::collections::BTreeSet<Label> = std::collections::BTreeSet::new();
    let mut links: Vec<&[Endpoint; 2]> = ln.links.iter().collect();
    links.sort_by_key(|l| (desc(&l[0]), desc(&l[1])));
    for l in links {
        match (&l[0], &l[1]) {
            (Endpoint::Free { label: a }, Endpoint::Free { label: b }) => {
                let (x, y) = if a <= b { (a, b) } else { (b, a) };
                if seen_free.insert(x.clone()) {
                    seen_free.insert(y.clone());
                    frees.push(format!("free {x} = @{y}\n"));
                }
            }
            (Endpoint::Free { label }, other) | (other, Endpoint::Free { label }) => {
                if seen_free.insert(label.clone()) {
                    frees.push(format!("free {label} = {}\n", desc(other)));
                }
            }
            (a, b) => {
                let (x, y) = {
                    let (da, db) = (desc(a), desc(b));
                    if da <= db { (da, db) } else { (db, da) }
                };
                wires.push(format!("wire {x} -- {y}\n"));
            }
        }
    }
    frees.sort();
    wires.sort();
    for f in frees {
        out.push_str(&f);
    }
    for w in wires {
        out.push_str(&w);
    }
    if ln.closed_loops > 0 {
        out.push_str(&format!("# {} closed connector ring(s) dropped\n", ln.closed_loops));
    }
    out
}

/// JSON mirror of the net fields with canonical ordering.
#[derive(Serialize, Deserialize)]
pub struct NetJson {
    pub name: String,
    pub ports: Vec<u32>,
    pub cells: Vec<CellJson>,
    pub wires: Vec<[u32; 2]>,
    pub free: BTreeMap<String, u32>,
}

#[derive(Serialize, Deserialize)]
pub struct CellJson {
    pub name: String,
    pub kind: CellKind,
    pub principal: Vec<u32>,
    pub aux: Vec<u32>,
}

pub fn net_to_json(net: &Net) -> NetJson {
    let order = super::iso::canonical_cell_order(net);
    let cells: Vec<&Cell> = order.iter().map(|&i| &net.cells[i]).collect();
    let mut wires: Vec<[u32; 2]> = net
        .wires
        .iter()
        .map(|w| {
            let (a, b) = (w.0 .0, w.1 .0);
            if a <= b {
                [a, b]
            } else {
                [b, a]
            }
        })
        .collect();
    wires.sort();
    NetJson {
        name: net.name.clone(),
        ports: net.ports().iter().map(|p| p.0).collect(),
        cells: cells
            .into_iter()
            .map(|c| CellJson {
                name: c.name.clone(),
                kind: c.kind,
                principal: c.principal.iter().map(|p| p.0).collect(),
                aux: c.aux.iter().map(|p| p.0).collect(),
            })
            .collect(),
        wires,
        free: net.free.iter().map(|(l, p)| (l.0.clone(), p.0)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: &str = "net eps\ncell e : epsilon\nfree x = e.p1\n";

    #[test]
    fn parse_single_epsilon() {
        let n = parse_net(EPS, Mode::Core).unwrap();
        assert_eq!(n.cells.len(), 1);
        assert_eq!(n.wires.len(), 1);
        assert_eq!(n.free.len(), 1);
    }

    #[test]
    fn serialize_parse_is_idempotent() {
        let n = parse_net(EPS, Mode::Core).unwrap();
        let s1 = serialize_net(&n);
        let n2 = parse_net(&s1, Mode::Core).unwrap();
        let s2 = serialize_net(&n2);
        assert_eq!(s1, s2);
    }

    #[test]
    fn syntax_error_carries_position() {
        let err = parse_net("cell A :\n", Mode::Core).unwrap_err();
        match err {
            ParseError::Syntax { line, .. } => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_portref_rejected() {
        let err = parse_net("net x\ncell A : gamma\nwire A.p1 -- A.a9\n", Mode::Core).unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line: 3, .. }));
    }

    #[test]
    fn delta1_needs_extension_mode() {
        let text = "net d\ncell D : delta1\nfree a = D.p1\nfree b = D.a1\nfree c = D.a2\n";
        assert!(parse_net(text, Mode::Core).is_err());
        assert!(parse_net(text, Mode::Extension).is_ok());
    }

    #[test]
    fn free_to_free_wire() {
        let n = parse_net("net w\nfree a = @b\n", Mode::Core).unwrap();
        assert_eq!(n.free.len(), 2);
        assert_eq!(n.wires.len(), 1);
    }
}
