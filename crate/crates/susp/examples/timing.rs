use std::time::{Duration, Instant};

fn main() {
    let k: u32 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let budget: u64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(600);
    let t = Instant::now();
    let c = susp::bounds::clique_bound(k, Some(Duration::from_secs(budget))).unwrap();
    let (nodes, refuted) = susp::bounds::debug_clique_stats();
    println!(
        "clique k={k}: {:?} size={} exact={} nodes={nodes} refuted={refuted}",
        t.elapsed(),
        c.size,
        c.exact
    );
}
