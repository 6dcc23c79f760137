use cafs_core::*;
use std::time::Instant;

fn main() {
    for (name, spec, inits, daemon) in [
        ("line6 central", "line:6", 100u64, DaemonMode::Central),
        ("line8byz central", "line:8:byz=7", 100, DaemonMode::Central),
        ("line5 distributed", "line:5", 100, DaemonMode::Distributed),
        ("line5byz distributed", "line:5:byz=4", 100, DaemonMode::Distributed),
        ("grid4x2 central", "grid:4x2:byz=7", 100, DaemonMode::Central),
        ("random8 central", "random:8:extra=3:byz=~2:seed=9", 100, DaemonMode::Central),
    ] {
        let (kind, placement, seed) = topology::parse_generator_spec(spec).unwrap();
        let topo = generate(kind, placement, seed).unwrap();
        let starts: Vec<Configuration> = (0..inits).map(|s| random_configuration(&topo, 3, s)).collect();
        let budget = ExplorationBudget::desk().with_daemon(daemon);
        let t = Instant::now();
        match explore(&topo, &Cafs, budget, &StartSet::Explicit(starts)) {
            Ok(r) => println!("{name}: nodes={} edges={} exhaustive={} converged={} maxh={} in {:?}",
                r.nodes, r.edges, r.exhaustive, r.converged, r.max_height_seen, t.elapsed()),
            Err(e) => println!("{name}: ERROR {e}"),
        }
    }
}
