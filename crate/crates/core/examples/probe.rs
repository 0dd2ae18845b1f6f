use micnet::analysis::corpus;
use micnet::analysis::{default_probes, soundness_check};
use micnet::lts::Caps;
use micnet::net::Mode;
use micnet::reduction::find_redexes;
use std::time::Instant;

fn main() {
    let caps = Caps { depth: 3, state_cap: 3000, silent_budget: 6, label_size_cap: 6 };
    let nets = corpus::redex_corpus();
    println!("{} redex nets", nets.len());
    let t0 = Instant::now();
    let mut n_checks = 0;
    let mut slow = 0;
    for (i, net) in nets.iter().enumerate() {
        if i % 5 != 0 && !["routing", "worked", "triangle"].contains(&net.name.as_str()) {
            continue;
        }
        for redex in find_redexes(net, Mode::Core) {
            let t = Instant::now();
            let _ = soundness_check(net, &redex, Mode::Core, caps, &default_probes());
            n_checks += 1;
            if t.elapsed().as_millis() > 1500 {
                slow += 1;
                println!("slow: #{i} {} {} {:?}", net.name, redex.kind.name(), t.elapsed());
            }
        }
        if t0.elapsed().as_secs() > 90 {
            println!("...bail at net {i} after {n_checks} checks");
            break;
        }
    }
    println!("total {:?} for {n_checks} checks ({slow} slow)", t0.elapsed());
}
