//! Workbench CLI: parse and validate nets, reduce them, run and dump
//! token machines, compose nets, and run the equivalence checks.
//!
//! Exit codes: 0 success / all definite checks pass, 1 check failure,
//! 2 usage or input error, 3 verdicts left unknown by the caps.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;

use micnet::analysis::{
    adequacy_check, compositionality_check, default_probes, random_computation, soundness_check,
    standardize, Bounds,
};
use micnet::lts::{Caps, Lts, Verdict};
use micnet::machine::lts::MachineLts;
use micnet::machine::{conf_json, initial_state, state_json, Atom, Conf, Stack, Sym};
use micnet::net::parse::{net_to_json, parse_net, serialize_net};
use micnet::net::vc::detect_vicious_circles;
use micnet::net::{compose::compose_nets, iso, Label, Mode, Net, PartialInjection};
use micnet::reduction::{
    find_redexes, net_hash, normalize, trace_step, Budget, Outcome, Strategy,
};

#[derive(Parser)]
#[command(name = "micnet", version, about = "multiport interaction combinator workbench")]
struct Cli {
    #[command(flatten)]
    run: RunConfig,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct RunConfig {
    /// Rule set: the three-cell core or the extension with erasure
    #[arg(long, value_enum, default_value_t = ModeArg::Core, global = true)]
    mode: ModeArg,
    /// Seed for the randomised strategies
    #[arg(long, default_value_t = 0, global = true)]
    seed: u64,
    /// Game depth
    #[arg(long, global = true)]
    depth: Option<usize>,
    /// Explored state cap
    #[arg(long, global = true)]
    state_cap: Option<usize>,
    /// Silent steps per weak closure
    #[arg(long, global = true)]
    silent_budget: Option<usize>,
    /// Actions per transition label
    #[arg(long, global = true)]
    label_size_cap: Option<usize>,
    /// Output form for dumps
    #[arg(long, value_enum, default_value_t = Out::Table, global = true)]
    output: Out,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Core,
    Extension,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Out {
    Json,
    Dot,
    Table,
}

impl RunConfig {
    fn mode(&self) -> Mode {
        match self.mode {
            ModeArg::Core => Mode::Core,
            ModeArg::Extension => Mode::Extension,
        }
    }

    /// Caps: flags override the defaults file (`MICNET_CAPS`, JSON with
    /// the same field names), which overrides the built-ins.
    fn caps(&self) -> Caps {
        let mut caps = Caps::default();
        if let Ok(path) = std::env::var("MICNET_CAPS") {
            if let Ok(text) = std::fs::read_to_string(path) {
                if let Ok(v) = serde_json::from_str::<serde_json::Value>(&text) {
                    if let Some(d) = v["depth"].as_u64() {
                        caps.depth = d as usize;
                    }
                    if let Some(d) = v["state_cap"].as_u64() {
                        caps.state_cap = d as usize;
                    }
                    if let Some(d) = v["silent_budget"].as_u64() {
                        caps.silent_budget = d as usize;
                    }
                    if let Some(d) = v["label_size_cap"].as_u64() {
                        caps.label_size_cap = d as usize;
                    }
                }
            }
        }
        if let Some(d) = self.depth {
            caps.depth = d;
        }
        if let Some(d) = self.state_cap {
            caps.state_cap = d;
        }
        if let Some(d) = self.silent_budget {
            caps.silent_budget = d;
        }
        if let Some(d) = self.label_size_cap {
            caps.label_size_cap = d;
        }
        caps
    }

    fn bounds(&self) -> Bounds {
        let caps = self.caps();
        Bounds {
            max_states: caps.state_cap,
            max_depth: caps.depth.max(48),
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse a net and report every invariant violation
    Validate { net: PathBuf },
    /// Apply interaction rules under a strategy
    Reduce {
        net: PathBuf,
        #[arg(long, default_value = "leftmost")]
        strategy: String,
        #[arg(long, default_value_t = 10_000)]
        budget: usize,
    },
    /// List the redexes
    Redexes { net: PathBuf },
    /// Report vicious circles and their feeders
    Vc { net: PathBuf },
    /// Token machine commands
    #[command(subcommand)]
    Machine (MachineCmd),
    /// Fuse free ports of two nets: --map l=r,l2=r2
    Compose {
        net_a: PathBuf,
        net_b: PathBuf,
        #[arg(long)]
        map: String,
    },
    /// Equivalence and termination checks
    #[command(subcommand)]
    Check(CheckCmd),
    /// Run the bundled acceptance corpus
    Corpus {
        #[arg(long, default_value = "")]
        filter: String,
    },
}

#[derive(Subcommand)]
enum MachineCmd {
    /// Step the closed machine, optionally injecting scripted actions
    Run {
        net: PathBuf,
        #[arg(long, default_value_t = 50)]
        max_steps: usize,
        /// JSONL: {"step":N,"loc":"l","conf":{"g":[...],"d":[...]}}
        #[arg(long)]
        external_script: Option<PathBuf>,
    },
    /// Dump the reachable labelled transition system, truncated
    Lts {
        net: PathBuf,
        #[arg(long, default_value_t = 4)]
        lts_depth: usize,
    },
}

#[derive(Subcommand)]
enum CheckCmd {
    /// Per-rule machine equivalence for every redex of the net
    Soundness { net: PathBuf },
    /// Machine of the fused net against the fused machines
    Compositionality {
        net_a: PathBuf,
        net_b: PathBuf,
        #[arg(long)]
        map: String,
    },
    /// Termination agreement between machine and net
    Adequacy { net: PathBuf },
    /// Standardise random maximal computations
    Standardize {
        net: PathBuf,
        #[arg(long, default_value_t = 20)]
        runs: usize,
    },
}

fn load_net(path: &Path, mode: Mode) -> Result<Net, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    parse_net(&text, mode).map_err(|e| format!("{}: {e}", path.display()))
}

fn parse_map(s: &str) -> Result<PartialInjection, String> {
    let mut pairs = Vec::new();
    for part in s.split(',').filter(|p| !p.is_empty()) {
        let (l, r) = part
            .split_once('=')
            .ok_or_else(|| format!("bad --map entry `{part}` (want l=r)"))?;
        pairs.push((Label::new(l.trim()), Label::new(r.trim())));
    }
    PartialInjection::from_pairs(pairs).map_err(|e| e.to_string())
}

fn atom_of_json(v: &serde_json::Value) -> Option<Atom> {
    match v {
        serde_json::Value::String(s) if s == "p" => Some(Atom::S(Sym::P)),
        serde_json::Value::String(s) if s == "q" => Some(Atom::S(Sym::Q)),
        serde_json::Value::Object(o) => o.get("n")?.as_u64().map(Atom::N),
        _ => None,
    }
}

fn conf_of_json(v: &serde_json::Value) -> Option<Conf> {
    let mut g = Stack::empty();
    let mut d = Stack::empty();
    for a in v.get("g")?.as_array()? {
        g.push(atom_of_json(a)?);
    }
    for a in v.get("d")?.as_array()? {
        d.push(atom_of_json(a)?);
    }
    Some(Conf::new(g, d))
}

fn verdict_json(v: &Verdict) -> serde_json::Value {
    match v {
        Verdict::Related {
            explored_pairs,
            complete,
            ..
        } => serde_json::json!({
            "result": "related", "explored_pairs": explored_pairs, "complete": complete
        }),
        Verdict::Distinguished { trace } => {
            serde_json::json!({ "result": "distinguished", "trace": trace })
        }
        Verdict::BoundExhausted { explored_pairs } => {
            serde_json::json!({ "result": "bound-exhausted", "explored_pairs": explored_pairs })
        }
    }
}

/// Cells as triangles with a principal-port mark; tokens by glyph.
fn net_dot(net: &Net, state: Option<(&micnet::net::LinkNet, &micnet::machine::MachineState)>) -> String {
    let mut out = String::from("graph net {\n  node [fontname=\"monospace\"];\n");
    for c in &net.cells {
        out.push_str(&format!(
            "  \"{}\" [shape=triangle, label=\"{}:{}\"];\n",
            c.name,
            c.name,
            c.kind.name()
        ));
    }
    for (l, _) in &net.free {
        out.push_str(&format!("  \"{l}\" [shape=plaintext];\n"));
    }
    // wires: name endpoints by owner
    let mut owner: std::collections::HashMap<u32, String> = std::collections::HashMap::new();
    for c in &net.cells {
        for (sel, p) in c.ports() {
            let mark = match sel {
                micnet::net::PortSel::Prin(k) => format!("{}·p{}", c.name, k + 1),
                micnet::net::PortSel::Aux(j) => format!("{}·a{}", c.name, j + 1),
            };
            owner.insert(p.0, format!("\"{}\"", c.name));
            owner.insert(p.0, format!("\"{}\"", c.name));
            let _ = mark;
        }
    }
    for (l, p) in &net.free {
        owner.insert(p.0, format!("\"{l}\""));
    }
    let mut conn = 0;
    for w in &net.wires {
        let mut name = |p: u32| {
            owner.get(&p).cloned().unwrap_or_else(|| {
                conn += 1;
                format!("\"~{conn}\"")
            })
        };
        let (a, b) = (name(w.0 .0), name(w.1 .0));
        out.push_str(&format!("  {a} -- {b};\n"));
    }
    if let Some((ln, s)) = state {
        for (i, t) in s.tokens().iter().enumerate() {
            let (glyph, at) = match t {
                micnet::machine::Token::Status(st) => (
                    if matches!(st.civil, micnet::machine::Civil::Single) {
                        "■"
                    } else {
                        "×"
                    },
                    ln.cell(st.cell).name.clone(),
                ),
                micnet::machine::Token::Marriage(m) => (
                    "●",
                    micnet::machine::endpoint_name(ln, m.pos.named(ln)),
                ),
                micnet::machine::Token::Matching(m) => ("○", m.at.0.clone()),
            };
            out.push_str(&format!(
                "  \"tok{i}\" [shape=plaintext, label=\"{glyph}\"];\n  \"tok{i}\" -- \"{}\" [style=dotted];\n",
                at.split('.').next().unwrap_or(&at)
            ));
        }
    }
    out.push_str("}\n");
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<ExitCode, String> {
    let mode = cli.run.mode();
    let caps = cli.run.caps();
    match &cli.cmd {
        Cmd::Validate { net } => {
            let text = std::fs::read_to_string(net)
                .map_err(|e| format!("cannot read {}: {e}", net.display()))?;
            match parse_net(&text, mode) {
                Ok(n) => {
                    println!("valid: {} cells, {} wires, {} free ports", n.cells.len(), n.wires.len(), n.free.len());
                    Ok(ExitCode::SUCCESS)
                }
                Err(micnet::net::parse::ParseError::Validation(report)) => {
                    for v in &report {
                        println!("violation: {v}");
                    }
                    Ok(ExitCode::from(1))
                }
                Err(e) => Err(e.to_string()),
            }
        }
        Cmd::Reduce {
            net,
            strategy,
            budget,
        } => {
            let n = load_net(net, mode)?;
            let strat = match strategy.as_str() {
                "leftmost" => Strategy::Leftmost,
                "random" => Strategy::SeededRandom(cli.run.seed),
                "bfs" => Strategy::ExhaustiveBfs,
                other => return Err(format!("unknown strategy `{other}`")),
            };
            let (outcome, trace) = normalize(
                &n,
                strat,
                Budget {
                    max_steps: *budget,
                    max_states: *budget,
                },
                mode,
            )
            .map_err(|e| e.to_string())?;
            for t in &trace {
                println!("{}", serde_json::to_string(t).unwrap());
            }
            match outcome {
                Outcome::Normal(nfs) => {
                    for nf in &nfs {
                        if cli.run.output == Out::Json {
                            println!("{}", serde_json::to_string(&net_to_json(nf)).unwrap());
                        } else {
                            print!("{}", serialize_net(nf));
                        }
                    }
                    println!("# {} normal form(s)", nfs.len());
                    Ok(ExitCode::SUCCESS)
                }
                Outcome::BudgetExhausted { frontier } => {
                    println!("# budget exhausted with {} open net(s)", frontier.len());
                    Ok(ExitCode::from(3))
                }
                Outcome::CycleDetected { witness } => {
                    println!("# reduction cycle; witness hash {}", net_hash(&witness));
                    Ok(ExitCode::SUCCESS)
                }
            }
        }
        Cmd::Redexes { net } => {
            let n = load_net(net, mode)?;
            let rs = find_redexes(&n, mode);
            for r in &rs {
                println!(
                    "{} {}:p{} -- {}:p{}",
                    r.kind.name(),
                    n.cell(r.left.0).name,
                    r.left.1 + 1,
                    n.cell(r.right.0).name,
                    r.right.1 + 1
                );
            }
            println!("# {} redex(es)", rs.len());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Vc { net } => {
            let n = load_net(net, mode)?;
            let circles = detect_vicious_circles(&n);
            for c in &circles {
                let cells: Vec<String> = c
                    .cycle
                    .iter()
                    .map(|(id, j)| format!("{}(a{})", n.cell(*id).name, j + 1))
                    .collect();
                let feeders: Vec<String> = c
                    .witness_tree
                    .iter()
                    .map(|id| n.cell(*id).name.clone())
                    .collect();
                println!(
                    "cycle: {} | {}",
                    cells.join(" -> "),
                    if c.is_fed() {
                        format!("fed by {}", feeders.join(", "))
                    } else {
                        "unfed".to_string()
                    }
                );
            }
            println!(
                "# {} cycle(s); viciously circular: {}",
                circles.len(),
                micnet::net::vc::in_vc(&n)
            );
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Machine(mc) => machine_cmd(cli, mc, mode),
        Cmd::Compose { net_a, net_b, map } => {
            let a = load_net(net_a, mode)?;
            let b = load_net(net_b, mode)?;
            let sigma = parse_map(map)?;
            let c = compose_nets(&a, &b, &sigma, mode).map_err(|e| e.to_string())?;
            if cli.run.output == Out::Json {
                println!("{}", serde_json::to_string(&net_to_json(&c)).unwrap());
            } else {
                print!("{}", serialize_net(&c));
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Check(cc) => check_cmd(cli, cc, mode, caps),
        Cmd::Corpus { filter } => corpus_cmd(cli, filter, mode, caps),
    }
}

fn machine_cmd(cli: &Cli, mc: &MachineCmd, mode: Mode) -> Result<ExitCode, String> {
    match mc {
        MachineCmd::Run {
            net,
            max_steps,
            external_script,
        } => {
            let n = load_net(net, mode)?;
            let m = MachineLts::new(&n, mode);
            let mut script: Vec<(usize, Label, Conf)> = Vec::new();
            if let Some(path) = external_script {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
                for line in text.lines().filter(|l| !l.trim().is_empty()) {
                    let v: serde_json::Value =
                        serde_json::from_str(line).map_err(|e| e.to_string())?;
                    let step = v["step"].as_u64().ok_or("script: missing step")? as usize;
                    let loc = Label::new(v["loc"].as_str().ok_or("script: missing loc")?);
                    let conf = conf_of_json(&v["conf"]).unwrap_or_else(Conf::empty);
                    script.push((step, loc, conf));
                }
            }
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cli.run.seed);
            let mut s = initial_state(&m.ln);
            println!(
                "{}",
                serde_json::json!({"step": 0, "state": state_json(&m.ln, &s)})
            );
            for step in 1..=*max_steps {
                for (at, loc, conf) in &script {
                    if *at == step {
                        s = m
                            .inject(&s, loc, conf)
                            .ok_or_else(|| format!("cannot inject at {loc}"))?;
                        println!(
                            "{}",
                            serde_json::json!({"step": step, "in": {"loc": loc.0, "conf": conf_json(conf)}})
                        );
                    }
                }
                let succ = micnet::machine::external::internal_successors(&m.ln, &s, mode);
                if succ.is_empty() {
                    println!("{}", serde_json::json!({"step": step, "quiet": true}));
                    break;
                }
                use rand::Rng;
                let (_, next) = succ[rng.gen_range(0..succ.len())].clone();
                s = next;
                println!(
                    "{}",
                    serde_json::json!({"step": step, "state": state_json(&m.ln, &s)})
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        MachineCmd::Lts { net, lts_depth } => {
            let n = load_net(net, mode)?;
            let m = MachineLts::new(&n, mode);
            let mut seen: BTreeSet<String> = BTreeSet::new();
            let mut frontier = vec![m.initial()];
            seen.insert(m.state_key(&m.initial()));
            let mut edges = Vec::new();
            let mut names: std::collections::HashMap<String, usize> = Default::default();
            names.insert(m.state_key(&m.initial()), 0);
            for _ in 0..*lts_depth {
                let mut next_frontier = Vec::new();
                for s in &frontier {
                    let sid = names[&m.state_key(s)];
                    for (l, t) in m.successors(s) {
                        let key = m.state_key(&t);
                        let tid = match names.get(&key) {
                            Some(&i) => i,
                            None => {
                                let i = names.len();
                                names.insert(key.clone(), i);
                                i
                            }
                        };
                        edges.push((sid, l.to_string(), tid));
                        if seen.insert(key) {
                            next_frontier.push(t);
                        }
                    }
                }
                frontier = next_frontier;
            }
            if cli.run.output == Out::Dot {
                println!("digraph lts {{");
                for i in 0..names.len() {
                    println!("  s{i};");
                }
                for (a, l, b) in &edges {
                    println!("  s{a} -> s{b} [label=\"{}\"];", l.replace('"', "'"));
                }
                println!("}}");
            } else {
                println!("# {} states, {} edges", names.len(), edges.len());
                for (a, l, b) in &edges {
                    println!("s{a} --{l}--> s{b}");
                }
                print!("{}", net_dot(&n, None));
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn exit_for(verdicts: &[&Verdict]) -> ExitCode {
    if verdicts.iter().any(|v| v.is_distinguished()) {
        ExitCode::from(1)
    } else if verdicts.iter().all(|v| v.is_related()) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    }
}

fn check_cmd(cli: &Cli, cc: &CheckCmd, mode: Mode, caps: Caps) -> Result<ExitCode, String> {
    match cc {
        CheckCmd::Soundness { net } => {
            let n = load_net(net, mode)?;
            let mut verdicts = Vec::new();
            for r in find_redexes(&n, mode) {
                let rep = soundness_check(&n, &r, mode, caps, &default_probes())
                    .map_err(|e| e.to_string())?;
                println!(
                    "{}",
                    serde_json::json!({
                        "check": "soundness",
                        "net_hash": net_hash(&n),
                        "rule": rep.rule,
                        "equivalence": verdict_json(&rep.equivalence),
                        "simulation": verdict_json(&rep.simulation),
                        "caps": caps,
                    })
                );
                verdicts.push(rep.equivalence.clone());
                verdicts.push(rep.simulation.clone());
            }
            Ok(exit_for(&verdicts.iter().collect::<Vec<_>>()))
        }
        CheckCmd::Compositionality { net_a, net_b, map } => {
            let a = load_net(net_a, mode)?;
            let b = load_net(net_b, mode)?;
            let sigma = parse_map(map)?;
            let v = compositionality_check(&a, &b, &sigma, mode, caps, &default_probes())
                .map_err(|e| e.to_string())?;
            println!(
                "{}",
                serde_json::json!({
                    "check": "compositionality",
                    "verdict": verdict_json(&v),
                    "caps": caps,
                })
            );
            Ok(exit_for(&[&v]))
        }
        CheckCmd::Adequacy { net } => {
            let n = load_net(net, mode)?;
            let rep = adequacy_check(&n, mode, cli.run.bounds()).map_err(|e| e.to_string())?;
            println!(
                "{}",
                serde_json::json!({
                    "check": "adequacy",
                    "net_hash": net_hash(&n),
                    "report": rep,
                })
            );
            if !rep.pass() {
                Ok(ExitCode::from(1))
            } else if !rep.definite() {
                Ok(ExitCode::from(3))
            } else {
                Ok(ExitCode::SUCCESS)
            }
        }
        CheckCmd::Standardize { net, runs } => {
            let n = load_net(net, mode)?;
            let ln = micnet::net::LinkNet::build(&n);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cli.run.seed);
            let mut failures = 0;
            for i in 0..*runs {
                let comp = random_computation(&ln, &initial_state(&ln), mode, &mut rng, 60);
                match standardize(&ln, &comp, mode) {
                    Ok(std) => {
                        let same = !comp.maximal
                            || std.final_state.key() == comp.final_state().key();
                        if !same {
                            failures += 1;
                        }
                        println!(
                            "{}",
                            serde_json::json!({
                                "run": i,
                                "steps": comp.steps.len(),
                                "thunks": std.thunks.len(),
                                "maximal": comp.maximal,
                                "final_state_preserved": same,
                            })
                        );
                    }
                    Err(e) => {
                        failures += 1;
                        println!("{}", serde_json::json!({"run": i, "error": e.to_string()}));
                    }
                }
            }
            Ok(if failures == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}

fn corpus_cmd(cli: &Cli, filter: &str, mode: Mode, caps: Caps) -> Result<ExitCode, String> {
    use micnet::analysis::corpus;
    let mut rows: Vec<(String, String, bool, bool)> = Vec::new(); // (net, check, pass, definite)
    let nets = [
        ("routing", corpus::fig_routing()),
        ("worked", corpus::fig_worked()),
        ("triangle", corpus::fig_triangle()),
        ("fedloop", corpus::fed_loop()),
        ("eps", corpus::single_epsilon()),
    ];
    for (name, net) in &nets {
        if !name.contains(filter) && !filter.is_empty() {
            continue;
        }
        let rep = adequacy_check(net, mode, cli.run.bounds()).map_err(|e| e.to_string())?;
        rows.push((name.to_string(), "adequacy".into(), rep.pass(), rep.definite()));
        for r in find_redexes(net, mode).into_iter().take(2) {
            let rep = soundness_check(net, &r, mode, caps, &default_probes())
                .map_err(|e| e.to_string())?;
            rows.push((
                name.to_string(),
                format!("soundness:{}", rep.rule),
                !rep.equivalence.is_distinguished() && !rep.simulation.is_distinguished(),
                rep.equivalence.is_related() && rep.simulation.is_related(),
            ));
        }
    }
    println!("{:<12} {:<18} {:<6} definite", "net", "check", "pass");
    let mut fail = false;
    let mut unknown = false;
    for (n, c, p, d) in &rows {
        println!("{n:<12} {c:<18} {p:<6} {d}");
        fail |= !p;
        unknown |= !d;
    }
    Ok(if fail {
        ExitCode::from(1)
    } else if unknown {
        ExitCode::from(3)
    } else {
        ExitCode::SUCCESS
    })
}
