use cafs_core::*;
use std::time::Instant;

/// All labeled connected graphs on n nodes (edge-subset enumeration).
fn connected_graphs(n: usize) -> Vec<Vec<Vec<usize>>> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    let mut out = Vec::new();
    for mask in 0u32..(1 << pairs.len()) {
        let mut adj = vec![Vec::new(); n];
        for (i, &(a, b)) in pairs.iter().enumerate() {
            if mask & (1 << i) != 0 {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        let topo = Topology::new(adj.clone(), 0, []);
        if topo.validate().is_empty() {
            out.push(adj);
        }
    }
    out
}

fn main() {
    let t0 = Instant::now();
    let mut instances = 0usize;
    let mut total_nodes = 0usize;
    for n in 1..=4usize {
        for adj in connected_graphs(n) {
            for root in 0..n {
                // all byzantine subsets of the non-root processes keeping the correct subgraph connected
                for byz_mask in 0u32..(1 << n) {
                    if byz_mask & (1 << root) != 0 { continue; }
                    let byz: Vec<usize> = (0..n).filter(|&v| byz_mask & (1 << v) != 0).collect();
                    let topo = Topology::new(adj.clone(), root, byz);
                    if !topo.validate().is_empty() { continue; }
                    let r = match explore(&topo, &Cafs, ExplorationBudget::desk(), &StartSet::AllConfigurations) {
                        Ok(r) => r,
                        Err(e) => { println!("n={n} root={root} adj={adj:?}: {e}"); continue; }
                    };
                    assert!(r.converged && r.exhaustive, "n={n} root={root}");
                    assert!(r.max_actions[&root] <= 1);
                    instances += 1;
                    total_nodes += r.nodes;
                }
            }
        }
    }
    println!("criterion1 sweep: {instances} instances, {total_nodes} nodes, {:?}", t0.elapsed());

    // criterion 4 full pipeline: explore with collect_targets then certify each
    let topo = Topology::new(vec![vec![1], vec![0, 2], vec![1]], 0, [2]);
    let mut budget = ExplorationBudget::desk().with_adversary(AdversaryClass::FullWrites);
    budget.collect_targets = true;
    let t = Instant::now();
    let r = explore(&topo, &Cafs, budget, &StartSet::AllConfigurations).unwrap();
    println!("line3 targets: {} in {:?}", r.targets.len(), t.elapsed());
    let params = ContainmentParams::for_topology(&topo);
    let t = Instant::now();
    let mut worst_t = 0; let mut worst_k = 0;
    for target in &r.targets {
        match certify_temporal_containment(&topo, &Cafs, target, &params, budget).unwrap() {
            CertifyOutcome::Certified { max_perturbations, max_changes, .. } => {
                worst_t = worst_t.max(max_perturbations);
                worst_k = worst_k.max(max_changes.values().copied().max().unwrap_or(0));
            }
            other => panic!("{other:?}"),
        }
    }
    println!("line3 certify all {} targets: worst_t={worst_t} worst_k={worst_k} in {:?}", r.targets.len(), t.elapsed());
}
