use cafs_core::*;
use std::time::Instant;

fn main() {
    let fixtures: Vec<(&str, Topology)> = vec![
        ("line3_byz", Topology::new(vec![vec![1], vec![0, 2], vec![1]], 0, [2])),
        ("line4_byz", Topology::new(vec![vec![1], vec![0, 2], vec![1, 3], vec![2]], 0, [3])),
        ("star4_byz", Topology::new(vec![vec![1, 2, 3], vec![0], vec![0], vec![0]], 0, [3])),
        ("ring4_byz", Topology::new(vec![vec![1, 3], vec![0, 2], vec![1, 3], vec![0, 2]], 0, [3])),
        ("triangle_byz", Topology::new(vec![vec![1, 2], vec![0, 2], vec![0, 1]], 0, [2])),
    ];
    for (name, topo) in &fixtures {
        let budget = ExplorationBudget::desk().with_adversary(AdversaryClass::FullWrites);
        let t = Instant::now();
        match explore(topo, &Cafs, budget, &StartSet::AllConfigurations) {
            Ok(r) => println!(
                "{name}: nodes={} edges={} converged={} exhaustive={} dead_ends={} maxh={} in {:?}",
                r.nodes, r.edges, r.converged, r.exhaustive, r.dead_ends, r.max_height_seen, t.elapsed()
            ),
            Err(e) => println!("{name}: ERROR {e}"),
        }
    }
    // Silent n=8 single start probe
    let topo = generate(topology::GeneratorKind::Ring(8), topology::Placement::Ids(vec![4]), 0).unwrap();
    let t = Instant::now();
    let starts: Vec<Configuration> = (0..50).map(|s| random_configuration(&topo, 3, s)).collect();
    match explore(&topo, &Cafs, ExplorationBudget::desk(), &StartSet::Explicit(starts)) {
        Ok(r) => println!(
            "ring8 silent x50: nodes={} edges={} converged={} exhaustive={} longest={} in {:?}",
            r.nodes, r.edges, r.converged, r.exhaustive, r.longest_execution, t.elapsed()
        ),
        Err(e) => println!("ring8: ERROR {e}"),
    }
}
