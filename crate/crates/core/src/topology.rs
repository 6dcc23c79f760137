//! Communication graphs with local port numbering, a distinguished root, and
//! Byzantine placement.
//!
//! Channel numbers are positions in the stored neighbor order: the order in
//! which neighbors appear in the topology file (or generator output) is
//! authoritative, because the cyclic re-parenting rule depends on it.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Index of a process, `0..n-1`.
pub type ProcessId = usize;

/// Channel number on a process, `0..degree-1`.
pub type Channel = usize;

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid topology: {0}")]
    Invalid(ValidationReport),
    #[error("generator error: {0}")]
    Generate(String),
}

/// An undirected communication graph with per-process port numbering.
///
/// `neighbors[v]` lists v's neighbors in channel order; `neighbors[v][k]` is
/// the process on v's channel `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    neighbors: Vec<Vec<ProcessId>>,
    root: ProcessId,
    byzantine: BTreeSet<ProcessId>,
}

impl Topology {
    /// Build a topology without validating it. Call [`Topology::validate`]
    /// before trusting the instance.
    pub fn new(
        neighbors: Vec<Vec<ProcessId>>,
        root: ProcessId,
        byzantine: impl IntoIterator<Item = ProcessId>,
    ) -> Self {
        Topology {
            neighbors,
            root,
            byzantine: byzantine.into_iter().collect(),
        }
    }

    pub fn process_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn root(&self) -> ProcessId {
        self.root
    }

    pub fn byzantine_set(&self) -> &BTreeSet<ProcessId> {
        &self.byzantine
    }

    pub fn byzantine_count(&self) -> usize {
        self.byzantine.len()
    }

    pub fn is_byzantine(&self, v: ProcessId) -> bool {
        self.byzantine.contains(&v)
    }

    pub fn is_correct(&self, v: ProcessId) -> bool {
        !self.is_byzantine(v)
    }

    pub fn degree(&self, v: ProcessId) -> usize {
        self.neighbors[v].len()
    }

    /// Neighbors of `v` in channel order.
    pub fn neighbors(&self, v: ProcessId) -> &[ProcessId] {
        &self.neighbors[v]
    }

    /// The process on channel `k` of `v`.
    pub fn neighbor(&self, v: ProcessId, k: Channel) -> ProcessId {
        self.neighbors[v][k]
    }

    /// The channel of `v` that leads to `u`, if they are adjacent.
    pub fn channel_to(&self, v: ProcessId, u: ProcessId) -> Option<Channel> {
        self.neighbors[v].iter().position(|&w| w == u)
    }

    pub fn processes(&self) -> impl Iterator<Item = ProcessId> {
        0..self.process_count()
    }

    pub fn correct_processes(&self) -> impl Iterator<Item = ProcessId> + '_ {
        self.processes().filter(|&v| self.is_correct(v))
    }

    /// Check every structural invariant. Violations are data, not failures:
    /// the report is empty iff the topology is well formed.
    pub fn validate(&self) -> ValidationReport {
        let n = self.process_count();
        let mut violations = Vec::new();
        if n == 0 {
            violations.push(Violation::Empty);
            return ValidationReport { violations };
        }
        if self.root >= n {
            violations.push(Violation::UnknownProcess(self.root));
            return ValidationReport { violations };
        }
        for v in 0..n {
            let mut seen = BTreeSet::new();
            for &u in &self.neighbors[v] {
                if u >= n {
                    violations.push(Violation::UnknownProcess(u));
                    continue;
                }
                if u == v {
                    violations.push(Violation::SelfLoop(v));
                }
                if !seen.insert(u) {
                    violations.push(Violation::DuplicateNeighbor { process: v, neighbor: u });
                }
                if !self.neighbors[u].contains(&v) {
                    violations.push(Violation::AsymmetricEdge { from: v, to: u });
                }
            }
        }
        for &b in &self.byzantine {
            if b >= n {
                violations.push(Violation::UnknownProcess(b));
            }
        }
        if self.is_byzantine(self.root) {
            violations.push(Violation::ByzantineRoot);
        }
        if !violations.is_empty() {
            return ValidationReport { violations };
        }
        if !self.is_connected(|_| true) {
            violations.push(Violation::Disconnected);
        }
        if !self.is_connected(|v| self.is_correct(v)) {
            violations.push(Violation::CorrectSubgraphDisconnected);
        }
        ValidationReport { violations }
    }

    /// Connectivity of the subgraph induced by `keep`, starting from any kept
    /// process. An empty induced subgraph counts as connected.
    fn is_connected(&self, keep: impl Fn(ProcessId) -> bool) -> bool {
        let n = self.process_count();
        let Some(start) = (0..n).find(|&v| keep(v)) else {
            return true;
        };
        let mut seen = vec![false; n];
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &u in &self.neighbors[v] {
                if keep(u) && !seen[u] {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        (0..n).all(|v| !keep(v) || seen[v])
    }

    /// The correct processes at distance >= `c` (in the full graph) from every
    /// Byzantine process. With no Byzantines the nearest-Byzantine distance is
    /// infinite, so all processes qualify.
    pub fn c_correct_set(&self, c: usize) -> BTreeSet<ProcessId> {
        let dist = self.distance_to_byzantine();
        self.correct_processes()
            .filter(|&v| dist[v].map_or(true, |d| d >= c))
            .collect()
    }

    /// Multi-source BFS distance to the nearest Byzantine process, measured
    /// in the full graph (Byzantine nodes are traversable). `None` when there
    /// are no Byzantines.
    fn distance_to_byzantine(&self) -> Vec<Option<usize>> {
        let n = self.process_count();
        let mut dist = vec![None; n];
        let mut queue = VecDeque::new();
        for &b in &self.byzantine {
            dist[b] = Some(0);
            queue.push_back(b);
        }
        while let Some(v) = queue.pop_front() {
            let d = dist[v].unwrap();
            for &u in &self.neighbors[v] {
                if dist[u].is_none() {
                    dist[u] = Some(d + 1);
                    queue.push_back(u);
                }
            }
        }
        dist
    }

    /// BFS distances from `start` inside the correct-induced subgraph.
    fn correct_bfs(&self, start: ProcessId) -> Vec<Option<usize>> {
        let n = self.process_count();
        let mut dist = vec![None; n];
        if self.is_byzantine(start) {
            return dist;
        }
        dist[start] = Some(0);
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &u in &self.neighbors[v] {
                if self.is_correct(u) && dist[u].is_none() {
                    dist[u] = Some(dist[v].unwrap() + 1);
                    queue.push_back(u);
                }
            }
        }
        dist
    }

    /// Derived quantities used by every bound check.
    pub fn metrics(&self) -> GraphMetrics {
        let max_degree = (0..self.process_count())
            .map(|v| self.degree(v))
            .max()
            .unwrap_or(0);
        let delta_to_root = self.correct_bfs(self.root);
        let mut diameter = 0;
        for v in self.correct_processes() {
            let dist = self.correct_bfs(v);
            for u in self.correct_processes() {
                if let Some(d) = dist[u] {
                    diameter = diameter.max(d);
                }
            }
        }
        GraphMetrics {
            max_degree,
            correct_diameter: diameter,
            delta_to_root,
        }
    }

    /// Parse the topology file format:
    ///
    /// ```text
    /// n 3
    /// root 0
    /// byzantine 2
    /// 0: 1
    /// 1: 0 2
    /// 2: 1
    /// ```
    ///
    /// The neighbor order on each adjacency line defines channel numbers.
    /// The parsed topology is validated before it is returned.
    pub fn parse(text: &str) -> Result<Topology, TopologyError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let parse_err = |line: usize, message: &str| TopologyError::Parse {
            line,
            message: message.to_string(),
        };

        let (ln, l) = lines.next().ok_or_else(|| parse_err(1, "missing 'n' line"))?;
        let n: usize = l
            .strip_prefix("n ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| parse_err(ln, "expected 'n <count>'"))?;
        if n == 0 {
            return Err(parse_err(ln, "process count must be positive"));
        }

        let (ln, l) = lines.next().ok_or_else(|| parse_err(ln, "missing 'root' line"))?;
        let root: usize = l
            .strip_prefix("root ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| parse_err(ln, "expected 'root <id>'"))?;

        let (ln, l) = lines
            .next()
            .ok_or_else(|| parse_err(ln, "missing 'byzantine' line"))?;
        let byz_body = l
            .strip_prefix("byzantine")
            .ok_or_else(|| parse_err(ln, "expected 'byzantine <id list or empty>'"))?;
        let mut byzantine = BTreeSet::new();
        for tok in byz_body.split_whitespace() {
            let id: usize = tok
                .parse()
                .map_err(|_| parse_err(ln, "byzantine ids must be integers"))?;
            byzantine.insert(id);
        }

        let mut neighbors: Vec<Option<Vec<ProcessId>>> = vec![None; n];
        for (ln, l) in lines {
            let (id_part, rest) = l
                .split_once(':')
                .ok_or_else(|| parse_err(ln, "expected '<id>: <neighbor list>'"))?;
            let id: usize = id_part
                .trim()
                .parse()
                .map_err(|_| parse_err(ln, "process id must be an integer"))?;
            if id >= n {
                return Err(parse_err(ln, &format!("process id {id} out of range")));
            }
            if neighbors[id].is_some() {
                return Err(parse_err(ln, &format!("duplicate adjacency line for {id}")));
            }
            let mut adj = Vec::new();
            for tok in rest.split_whitespace() {
                let u: usize = tok
                    .parse()
                    .map_err(|_| parse_err(ln, "neighbor ids must be integers"))?;
                adj.push(u);
            }
            neighbors[id] = Some(adj);
        }
        let neighbors: Vec<Vec<ProcessId>> = neighbors
            .into_iter()
            .enumerate()
            .map(|(id, adj)| {
                adj.ok_or_else(|| TopologyError::Parse {
                    line: 0,
                    message: format!("missing adjacency line for process {id}"),
                })
            })
            .collect::<Result<_, _>>()?;

        let topo = Topology::new(neighbors, root, byzantine);
        let report = topo.validate();
        if report.is_empty() {
            Ok(topo)
        } else {
            Err(TopologyError::Invalid(report))
        }
    }

    /// Canonical serialization; `parse` of the output reproduces the topology.
    pub fn format(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("n {}\n", self.process_count()));
        out.push_str(&format!("root {}\n", self.root));
        let byz: Vec<String> = self.byzantine.iter().map(|b| b.to_string()).collect();
        out.push_str(&format!("byzantine {}\n", byz.join(" ")));
        for v in 0..self.process_count() {
            let adj: Vec<String> = self.neighbors[v].iter().map(|u| u.to_string()).collect();
            out.push_str(&format!("{}: {}\n", v, adj.join(" ")));
        }
        out
    }
}

/// Derived graph quantities: the system degree, the diameter of the
/// correct-induced subgraph, and per-process distances to the root within it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphMetrics {
    pub max_degree: usize,
    pub correct_diameter: usize,
    /// Distance from each process to the root through correct processes only;
    /// `None` for Byzantine processes.
    pub delta_to_root: Vec<Option<usize>>,
}

impl GraphMetrics {
    /// Δ^d, the per-process disturbance bound for the containment checks.
    /// Δ=0 only happens for the single-process system, where Δ^d = 1.
    pub fn degree_pow_diameter(&self) -> u64 {
        (self.max_degree as u64).max(1).pow(self.correct_diameter as u32)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Empty,
    UnknownProcess(ProcessId),
    SelfLoop(ProcessId),
    DuplicateNeighbor { process: ProcessId, neighbor: ProcessId },
    AsymmetricEdge { from: ProcessId, to: ProcessId },
    ByzantineRoot,
    Disconnected,
    CorrectSubgraphDisconnected,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "topology has no processes"),
            Violation::UnknownProcess(v) => write!(f, "unknown process id {v}"),
            Violation::SelfLoop(v) => write!(f, "self-loop at process {v}"),
            Violation::DuplicateNeighbor { process, neighbor } => {
                write!(f, "process {process} lists neighbor {neighbor} twice")
            }
            Violation::AsymmetricEdge { from, to } => {
                write!(f, "asymmetric edge: {from} lists {to} but not vice versa")
            }
            Violation::ByzantineRoot => write!(f, "root is Byzantine"),
            Violation::Disconnected => write!(f, "graph is disconnected"),
            Violation::CorrectSubgraphDisconnected => {
                write!(f, "correct subgraph disconnected")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msgs: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", msgs.join("; "))
    }
}

/// Byzantine placement rule for the generators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Placement {
    None,
    Ids(Vec<ProcessId>),
    /// Place this many Byzantines at random, retrying while the correct
    /// subgraph would be disconnected.
    RandomCount(usize),
}

/// Structured description of a generated instance, e.g. `line:5:byz=4`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GeneratorKind {
    Line(usize),
    Ring(usize),
    Star(usize),
    Grid(usize, usize),
    RandomConnected { n: usize, extra_edges: usize },
}

const PLACEMENT_RETRIES: usize = 100;

/// Generate a topology. The root is process 0; neighbor lists are in
/// ascending id order, so channel numbers are reproducible. Deterministic for
/// a fixed seed.
pub fn generate(
    kind: GeneratorKind,
    placement: Placement,
    seed: u64,
) -> Result<Topology, TopologyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = match kind {
        GeneratorKind::Line(n) => {
            require(n >= 1, "line size must be >= 1")?;
            (1..n).map(|i| (i - 1, i)).collect::<Vec<_>>()
        }
        GeneratorKind::Ring(n) => {
            require(n >= 3, "ring size must be >= 3")?;
            (0..n).map(|i| (i, (i + 1) % n)).collect()
        }
        GeneratorKind::Star(n) => {
            require(n >= 2, "star size must be >= 2")?;
            (1..n).map(|i| (0, i)).collect()
        }
        GeneratorKind::Grid(w, h) => {
            require(w >= 1 && h >= 1, "grid sides must be >= 1")?;
            let mut e = Vec::new();
            for y in 0..h {
                for x in 0..w {
                    let v = y * w + x;
                    if x + 1 < w {
                        e.push((v, v + 1));
                    }
                    if y + 1 < h {
                        e.push((v, v + w));
                    }
                }
            }
            e
        }
        GeneratorKind::RandomConnected { n, extra_edges } => {
            require(n >= 1, "size must be >= 1")?;
            // Random spanning tree (each node attaches to a random earlier
            // node), then extra random non-parallel edges.
            let mut e: Vec<(usize, usize)> = (1..n)
                .map(|i| (rng.gen_range(0..i), i))
                .collect();
            let mut have: BTreeSet<(usize, usize)> = e.iter().copied().collect();
            let mut candidates: Vec<(usize, usize)> = (0..n)
                .flat_map(|a| ((a + 1)..n).map(move |b| (a, b)))
                .filter(|p| !have.contains(p))
                .collect();
            candidates.shuffle(&mut rng);
            for pair in candidates.into_iter().take(extra_edges) {
                have.insert(pair);
                e.push(pair);
            }
            e
        }
    };

    let n = edges
        .iter()
        .flat_map(|&(a, b)| [a, b])
        .max()
        .map_or(1, |m| m + 1);
    let build = |byz: &BTreeSet<ProcessId>| {
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in &edges {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for adj in &mut neighbors {
            adj.sort_unstable();
        }
        Topology::new(neighbors, 0, byz.iter().copied())
    };

    match placement {
        Placement::None => finish(build(&BTreeSet::new())),
        Placement::Ids(ids) => finish(build(&ids.into_iter().collect())),
        Placement::RandomCount(count) => {
            require(count < n, "byzantine count must leave the root correct")?;
            for _ in 0..PLACEMENT_RETRIES {
                let mut pool: Vec<ProcessId> = (1..n).collect();
                pool.shuffle(&mut rng);
                let byz: BTreeSet<ProcessId> = pool.into_iter().take(count).collect();
                let topo = build(&byz);
                if topo.validate().is_empty() {
                    return Ok(topo);
                }
            }
            Err(TopologyError::Generate(format!(
                "no placement of {count} Byzantines keeps the correct subgraph \
                 connected after {PLACEMENT_RETRIES} attempts"
            )))
        }
    }
}

fn finish(topo: Topology) -> Result<Topology, TopologyError> {
    let report = topo.validate();
    if report.is_empty() {
        Ok(topo)
    } else {
        Err(TopologyError::Invalid(report))
    }
}

fn require(cond: bool, msg: &str) -> Result<(), TopologyError> {
    if cond {
        Ok(())
    } else {
        Err(TopologyError::Generate(msg.to_string()))
    }
}

/// Parse an inline generator spec like `line:5:byz=4`, `ring:6:byz=~2:seed=7`,
/// `grid:3x2` or `random:8:extra=3`.
pub fn parse_generator_spec(spec: &str) -> Result<(GeneratorKind, Placement, u64), TopologyError> {
    let err = |m: &str| TopologyError::Generate(format!("bad generator spec '{spec}': {m}"));
    let mut parts = spec.split(':');
    let kind_name = parts.next().ok_or_else(|| err("empty"))?;
    let size = parts
        .next()
        .ok_or_else(|| err("missing size"))?;
    let mut placement = Placement::None;
    let mut seed = 0u64;
    let mut extra = 0usize;
    for part in parts {
        if let Some(v) = part.strip_prefix("byz=") {
            placement = if let Some(count) = v.strip_prefix('~') {
                Placement::RandomCount(count.parse().map_err(|_| err("bad byz count"))?)
            } else {
                let ids = v
                    .split(',')
                    .map(|t| t.parse())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| err("bad byz id list"))?;
                Placement::Ids(ids)
            };
        } else if let Some(v) = part.strip_prefix("seed=") {
            seed = v.parse().map_err(|_| err("bad seed"))?;
        } else if let Some(v) = part.strip_prefix("extra=") {
            extra = v.parse().map_err(|_| err("bad extra edge count"))?;
        } else {
            return Err(err(&format!("unknown field '{part}'")));
        }
    }
    let kind = match kind_name {
        "line" => GeneratorKind::Line(size.parse().map_err(|_| err("bad size"))?),
        "ring" => GeneratorKind::Ring(size.parse().map_err(|_| err("bad size"))?),
        "star" => GeneratorKind::Star(size.parse().map_err(|_| err("bad size"))?),
        "grid" => {
            let (w, h) = size.split_once('x').ok_or_else(|| err("grid size is WxH"))?;
            GeneratorKind::Grid(
                w.parse().map_err(|_| err("bad grid width"))?,
                h.parse().map_err(|_| err("bad grid height"))?,
            )
        }
        "random" => GeneratorKind::RandomConnected {
            n: size.parse().map_err(|_| err("bad size"))?,
            extra_edges: extra,
        },
        other => return Err(err(&format!("unknown kind '{other}'"))),
    };
    Ok((kind, placement, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// r--a line with a Byzantine tail: r(0)-a(1)-b(2), b Byzantine.
    pub(crate) fn line3_byz() -> Topology {
        Topology::new(vec![vec![1], vec![0, 2], vec![1]], 0, [2])
    }

    #[test]
    fn parse_two_node_line() {
        let topo = Topology::parse("n 2\nroot 0\nbyzantine\n0: 1\n1: 0\n").unwrap();
        assert_eq!(topo.process_count(), 2);
        assert_eq!(topo.neighbor(1, 0), 0);
        assert!(topo.validate().is_empty());
    }

    #[test]
    fn parse_rejects_byzantine_root() {
        let err = Topology::parse("n 2\nroot 0\nbyzantine 0\n0: 1\n1: 0\n").unwrap_err();
        match err {
            TopologyError::Invalid(report) => {
                assert!(report.violations.contains(&Violation::ByzantineRoot));
            }
            other => panic!("expected validation failure, got {other:?}"),
        }
    }

    #[test]
    fn parse_accepts_line_with_byzantine_end() {
        let topo = Topology::parse("n 3\nroot 0\nbyzantine 2\n0: 1\n1: 0 2\n2: 1\n").unwrap();
        assert_eq!(topo, line3_byz());
        // Correct subgraph {0, 1} stays connected through the 0-1 edge.
        assert!(topo.validate().is_empty());
    }

    #[test]
    fn validate_flags_disconnected_correct_subgraph() {
        // r(0)-b(1)-a(2) with the middle process Byzantine: removing it
        // separates 0 from 2.
        let topo = Topology::new(vec![vec![1], vec![0, 2], vec![1]], 0, [1]);
        let report = topo.validate();
        assert!(report
            .violations
            .contains(&Violation::CorrectSubgraphDisconnected));
    }

    #[test]
    fn validate_accepts_triangle_with_byzantine() {
        // Triangle r(0), a(1), b(2) with b Byzantine: the 0-1 edge keeps the
        // correct subgraph connected.
        let topo = Topology::new(vec![vec![1, 2], vec![0, 2], vec![0, 1]], 0, [2]);
        assert!(topo.validate().is_empty());
    }

    #[test]
    fn validate_flags_asymmetric_edge() {
        let topo = Topology::new(vec![vec![1], vec![]], 0, []);
        let report = topo.validate();
        assert!(report
            .violations
            .contains(&Violation::AsymmetricEdge { from: 0, to: 1 }));
    }

    #[test]
    fn c_correct_set_zero_radius_is_all_correct() {
        let topo = line3_byz();
        let set: Vec<_> = topo.c_correct_set(0).into_iter().collect();
        assert_eq!(set, vec![0, 1]);
    }

    #[test]
    fn c_correct_set_on_line() {
        let topo = line3_byz();
        // Hop counts on the line: b is 1 from a, 2 from r.
        assert_eq!(topo.c_correct_set(1).into_iter().collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(topo.c_correct_set(2).into_iter().collect::<Vec<_>>(), vec![0]);
        assert!(topo.c_correct_set(3).is_empty());
    }

    #[test]
    fn c_correct_set_without_byzantines_ignores_radius() {
        let topo = generate(GeneratorKind::Ring(4), Placement::None, 0).unwrap();
        assert_eq!(topo.c_correct_set(5).len(), 4);
        assert_eq!(topo.c_correct_set(0), topo.c_correct_set(100));
    }

    #[test]
    fn c_correct_set_shrinks_with_radius() {
        let topo = generate(
            GeneratorKind::Grid(3, 2),
            Placement::Ids(vec![5]),
            0,
        )
        .unwrap();
        for c in 0..5 {
            let larger = topo.c_correct_set(c);
            let smaller = topo.c_correct_set(c + 1);
            assert!(smaller.is_subset(&larger));
        }
    }

    #[test]
    fn metrics_on_line_with_byzantine() {
        let m = line3_byz().metrics();
        assert_eq!(m.max_degree, 2);
        assert_eq!(m.correct_diameter, 1);
        assert_eq!(m.delta_to_root[1], Some(1));
        assert_eq!(m.delta_to_root[2], None);
    }

    #[test]
    fn metrics_on_single_node() {
        let topo = Topology::new(vec![vec![]], 0, []);
        let m = topo.metrics();
        assert_eq!(m.max_degree, 0);
        assert_eq!(m.correct_diameter, 0);
        assert_eq!(m.delta_to_root[0], Some(0));
        assert_eq!(m.degree_pow_diameter(), 1);
    }

    #[test]
    fn metrics_on_star() {
        // Root center with 4 correct leaves: leaf-to-leaf goes via the center.
        let topo = generate(GeneratorKind::Star(5), Placement::None, 0).unwrap();
        let m = topo.metrics();
        assert_eq!(m.max_degree, 4);
        assert_eq!(m.correct_diameter, 2);
        for leaf in 1..5 {
            assert_eq!(m.delta_to_root[leaf], Some(1));
        }
    }

    #[test]
    fn metrics_bounds() {
        for seed in 0..20 {
            let topo = generate(
                GeneratorKind::RandomConnected { n: 7, extra_edges: 3 },
                Placement::RandomCount(2),
                seed,
            )
            .unwrap();
            let m = topo.metrics();
            assert!(m.correct_diameter <= topo.process_count() - 1);
            for v in topo.correct_processes() {
                assert!(m.delta_to_root[v].unwrap() <= m.correct_diameter);
            }
        }
    }

    #[test]
    fn generator_is_deterministic() {
        let a = generate(
            GeneratorKind::RandomConnected { n: 6, extra_edges: 2 },
            Placement::RandomCount(1),
            42,
        )
        .unwrap();
        let b = generate(
            GeneratorKind::RandomConnected { n: 6, extra_edges: 2 },
            Placement::RandomCount(1),
            42,
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn generated_ring_metrics() {
        let topo = generate(GeneratorKind::Ring(4), Placement::None, 0).unwrap();
        assert!(topo.validate().is_empty());
        let m = topo.metrics();
        assert_eq!(m.max_degree, 2);
        assert_eq!(m.correct_diameter, 2);
    }

    #[test]
    fn generator_spec_round_trips() {
        let (kind, placement, seed) = parse_generator_spec("line:5:byz=4").unwrap();
        assert_eq!(kind, GeneratorKind::Line(5));
        assert_eq!(placement, Placement::Ids(vec![4]));
        assert_eq!(seed, 0);

        let (kind, placement, seed) = parse_generator_spec("random:8:extra=2:byz=~2:seed=9").unwrap();
        assert_eq!(kind, GeneratorKind::RandomConnected { n: 8, extra_edges: 2 });
        assert_eq!(placement, Placement::RandomCount(2));
        assert_eq!(seed, 9);

        assert!(parse_generator_spec("blob:3").is_err());
    }

    #[test]
    fn format_parse_round_trip() {
        let topo = generate(
            GeneratorKind::Grid(3, 3),
            Placement::Ids(vec![8]),
            0,
        )
        .unwrap();
        let text = topo.format();
        let back = Topology::parse(&text).unwrap();
        assert_eq!(topo, back);
    }

    #[test]
    fn validate_is_pure() {
        let topo = Topology::new(vec![vec![1], vec![0, 2], vec![1]], 0, [1]);
        assert_eq!(topo.validate(), topo.validate());
    }
}
