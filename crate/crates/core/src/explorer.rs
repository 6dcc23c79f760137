//! Exhaustive, fairness-bounded search over every execution of a protocol on
//! a small instance.
//!
//! The search graph's nodes are configurations extended with scheduling
//! bookkeeping; its edges are composite steps. Three passes run over it:
//!
//! 1. discovery — breadth-first enumeration of every reachable node under the
//!    budget, with the step relation stored as a compact adjacency list;
//! 2. strongly connected components — any cycle that matters for the question
//!    at hand (any cycle at all for convergence, a cycle changing a shielded
//!    process for containment) is reported with a witness lasso;
//! 3. dynamic programming — exact per-process maxima (actions, S-variable
//!    changes, completed perturbations, execution length) over the acyclic
//!    condensation.
//!
//! Fairness: with a silent adversary the search enumerates the *unfair*
//! daemon (every selection the daemon mode allows, no age bookkeeping), a
//! strict superset of every B-fair schedule, so its verdicts and maxima
//! dominate all fairness bounds at once. With an active adversary class weak
//! fairness is load bearing (write-only steps could otherwise starve correct
//! processes forever), so nodes carry per-process ages and the search
//! enumerates exactly the B-fair schedules, write-only steps included.
//!
//! Finiteness rests on a reachable-height closure: every action writes a
//! neighbor's height plus one, so the global maximum grows by at most one per
//! action, and a self-stabilizing protocol executes boundedly many actions
//! per process. The search allows `max(caps) + sum over correct v of
//! 2 * Delta^delta(v)` (the per-process action bounds) and fails loudly when
//! a protocol escapes it, as greedy height-chasing under a distributed
//! daemon can. The naive allowance `max(caps) + n` is not enough: on the
//! complete 4-graph a correct process can climb five heights above the caps.

use std::collections::{BTreeMap, HashMap, VecDeque};

use thiserror::Error;

use crate::analysis::{is_c_legitimate, is_c_stable, ContainmentParams, Stability};
use crate::scheduling::DaemonMode;
use crate::sim::{RunHistory, StepRecord};
use crate::state_model::{
    first_enabled, local_view_from_states, ByzantineWrite, Configuration, Height, LocalView,
    ProcessState, Protocol,
};
use crate::topology::{ProcessId, Topology};

pub const DEFAULT_MAX_NODES: usize = 2_000_000;
pub const DEFAULT_MAX_EDGES: usize = 50_000_000;

/// The adversary behaviors the search closes over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdversaryClass {
    /// Byzantine states stay frozen.
    Silent,
    /// Every write within the height cap, every step, including none.
    FullWrites,
}

#[derive(Debug, Clone, Copy)]
pub struct ExplorationBudget {
    /// Cap on enumerated initial heights.
    pub initial_height_cap: Height,
    /// Cap on enumerated Byzantine writes.
    pub adversary_height_cap: Height,
    /// Fairness bound for B-fair enumeration (active adversary classes).
    pub fairness_bound: u32,
    pub daemon: DaemonMode,
    pub adversary: AdversaryClass,
    pub max_nodes: usize,
    pub max_edges: usize,
    pub max_depth: u32,
    /// Test hook: enumerate children in reverse order. Results must not
    /// depend on it.
    pub reverse_children: bool,
    /// Collect the distinct stabilized configurations at first reach.
    pub collect_targets: bool,
}

impl ExplorationBudget {
    /// Desk-scale defaults: caps 3, bound 3, distributed daemon, silent
    /// adversary.
    pub fn desk() -> Self {
        ExplorationBudget {
            initial_height_cap: 3,
            adversary_height_cap: 3,
            fairness_bound: 3,
            daemon: DaemonMode::Distributed,
            adversary: AdversaryClass::Silent,
            max_nodes: DEFAULT_MAX_NODES,
            max_edges: DEFAULT_MAX_EDGES,
            max_depth: u32::MAX,
            reverse_children: false,
            collect_targets: false,
        }
    }

    pub fn with_adversary(mut self, adversary: AdversaryClass) -> Self {
        self.adversary = adversary;
        self
    }

    pub fn with_daemon(mut self, daemon: DaemonMode) -> Self {
        self.daemon = daemon;
        self
    }

    pub fn with_caps(mut self, initial: Height, adversary: Height) -> Self {
        self.initial_height_cap = initial;
        self.adversary_height_cap = adversary;
        self
    }

    fn tracks_ages(&self) -> bool {
        self.adversary == AdversaryClass::FullWrites
    }
}

/// Which configurations the search starts from.
#[derive(Debug, Clone)]
pub enum StartSet {
    /// Every configuration with heights up to the initial cap — the
    /// self-stabilization quantifier.
    AllConfigurations,
    Explicit(Vec<Configuration>),
}

#[derive(Debug, Error)]
pub enum ExploreError {
    #[error(
        "height closure violated: process {process} reached height {height} > limit {limit}; \
         the protocol escapes the budgeted space"
    )]
    HeightClosure { process: ProcessId, height: Height, limit: Height },
    #[error("explorer supports at most 8 processes, topology has {0}")]
    TooManyProcesses(usize),
    #[error("height limit {0} does not fit the compact encoding (must be < 255)")]
    CapTooLarge(Height),
    #[error("bad start set: {0}")]
    BadStart(String),
}

#[derive(Debug, Clone)]
pub struct ExplorationResult {
    /// Every explored maximal execution reaches a 0-legitimate and 0-stable
    /// configuration. Only trust it when `exhaustive` holds.
    pub converged: bool,
    /// Exact maximum number of rule executions per correct process over the
    /// explored executions. Under an active adversary class executions are
    /// truncated at first stabilization (the containment check owns what
    /// happens after); under silent, runs end at quiescence, so the maxima
    /// cover whole executions.
    pub max_actions: BTreeMap<ProcessId, u64>,
    /// Steps of the longest explored execution (converged searches only).
    pub longest_execution: u64,
    pub nodes: usize,
    pub edges: usize,
    /// No budget limit was hit; verdicts are exact for the budgeted space.
    pub exhaustive: bool,
    /// Nodes where the central daemon could not honor the fairness bound;
    /// those branches are pruned (a distributed daemon never produces any).
    pub dead_ends: usize,
    pub max_height_seen: Height,
    /// An execution that never stabilizes (lasso or stuck terminal), present
    /// iff not converged.
    pub witness: Option<RunHistory>,
    /// Distinct stabilized configurations at first reach, when collected.
    pub targets: Vec<Configuration>,
}

/// Outcome of checking temporal containment from one stabilized start.
#[derive(Debug, Clone)]
pub enum CertifyOutcome {
    Certified {
        /// Exact maximum number of perturbations over every enumerated
        /// execution from the start.
        max_perturbations: u64,
        /// Exact maximum S-variable changes per shielded process.
        max_changes: BTreeMap<ProcessId, u64>,
        nodes: usize,
    },
    /// Containment fails: shielded changes recur forever, or a bound is
    /// exceeded.
    Counterexample { reason: String, witness: RunHistory },
    /// Budget exhausted before the space closed.
    Indeterminate { reason: String },
}

const NIL_CODE: u8 = 0;
const UNDEF: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct Edge {
    target: u32,
    action_mask: u8,
    change_mask: u8,
    /// Entering a legitimate-and-stable configuration with shielded changes
    /// pending completes one perturbation.
    completion: bool,
}

/// Transient expansion product; edges keep only the compact part.
struct Child {
    key: Vec<u8>,
    action_mask: u8,
    change_mask: u8,
    completion: bool,
    selected: Vec<ProcessId>,
    writes: Vec<ByzantineWrite>,
}

struct Expansion {
    children: Vec<Child>,
    any_activable: bool,
}

struct Search<'a> {
    topo: &'a Topology,
    protocol: &'a dyn Protocol,
    budget: ExplorationBudget,
    n: usize,
    correct_mask: u8,
    shielded_mask: u8,
    radius: usize,
    height_limit: Height,
    certify: bool,
    truncate_at_target: bool,

    map: HashMap<Box<[u8]>, u32>,
    offsets: Vec<usize>,
    edges: Vec<Edge>,
    target: Vec<bool>,
    bad_terminals: Vec<u32>,
    dead_ends: usize,
    max_height_seen: Height,
    exhaustive: bool,
    ls_memo: HashMap<Box<[u8]>, bool>,
}

impl<'a> Search<'a> {
    fn new(
        topo: &'a Topology,
        protocol: &'a dyn Protocol,
        budget: ExplorationBudget,
        certify: bool,
        truncate_at_target: bool,
        radius: usize,
    ) -> Result<Self, ExploreError> {
        let n = topo.process_count();
        if n > 8 {
            return Err(ExploreError::TooManyProcesses(n));
        }
        let caps = budget.initial_height_cap.max(budget.adversary_height_cap);
        if caps >= 200 {
            return Err(ExploreError::CapTooLarge(caps));
        }
        if budget.tracks_ages() && budget.fairness_bound >= 255 {
            return Err(ExploreError::CapTooLarge(budget.fairness_bound as Height));
        }
        // Heights rise at most once per action; allow each correct process
        // its action bound, clamped to the one-byte encoding.
        let metrics = topo.metrics();
        let mut climb: u64 = n as u64;
        for v in topo.correct_processes() {
            let delta = metrics.delta_to_root[v].unwrap_or(0) as u32;
            climb = climb
                .saturating_add(2 * (metrics.max_degree as u64).max(1).saturating_pow(delta));
        }
        let height_limit = (caps + climb.min(1000)).min(254);
        let mut correct_mask = 0u8;
        for v in topo.correct_processes() {
            correct_mask |= 1 << v;
        }
        let mut shielded_mask = 0u8;
        for &v in &topo.c_correct_set(radius) {
            shielded_mask |= 1 << v;
        }
        Ok(Search {
            topo,
            protocol,
            budget,
            n,
            correct_mask,
            shielded_mask,
            radius,
            height_limit,
            certify,
            truncate_at_target,
            map: HashMap::new(),
            offsets: Vec::new(),
            edges: Vec::new(),
            target: Vec::new(),
            bad_terminals: Vec::new(),
            dead_ends: 0,
            max_height_seen: 0,
            exhaustive: true,
            ls_memo: HashMap::new(),
        })
    }

    fn key_len(&self) -> usize {
        2 * self.n
            + if self.budget.tracks_ages() { self.n } else { 0 }
            + if self.certify { 1 } else { 0 }
    }

    fn encode_start(&self, config: &Configuration) -> Vec<u8> {
        let mut key = Vec::with_capacity(self.key_len());
        for v in 0..self.n {
            let s = config.state(v);
            key.push(s.parent.map_or(NIL_CODE, |k| k as u8 + 1));
            key.push(s.height as u8);
        }
        if self.budget.tracks_ages() {
            key.extend(std::iter::repeat(0u8).take(self.n));
        }
        if self.certify {
            key.push(0);
        }
        key
    }

    fn config_from_key(&self, key: &[u8]) -> Configuration {
        let states = (0..self.n)
            .map(|v| {
                let parent = match key[2 * v] {
                    NIL_CODE => None,
                    code => Some(code as usize - 1),
                };
                ProcessState::new(parent, key[2 * v + 1] as Height)
            })
            .collect();
        Configuration::new(states)
    }

    /// Legitimate and stable at the search radius, memoized per
    /// configuration bytes.
    fn is_ls(&mut self, config_bytes: &[u8]) -> bool {
        if let Some(&ls) = self.ls_memo.get(config_bytes) {
            return ls;
        }
        let config = self.config_from_key(config_bytes);
        let ls = is_c_legitimate(&config, self.topo, self.protocol, self.radius)
            && is_c_stable(&config, self.topo, self.protocol, self.radius, 100_000)
                == Stability::Stable;
        self.ls_memo
            .insert(config_bytes.to_vec().into_boxed_slice(), ls);
        ls
    }

    /// Generate every legal outgoing step of `key`.
    fn expand(&mut self, key: &[u8]) -> Result<Expansion, ExploreError> {
        let n = self.n;
        let tracked = self.budget.tracks_ages();
        let bound = self.budget.fairness_bound;
        let mut view = LocalView::scratch();

        let states: Vec<ProcessState> = (0..n)
            .map(|v| {
                let parent = match key[2 * v] {
                    NIL_CODE => None,
                    code => Some(code as usize - 1),
                };
                ProcessState::new(parent, key[2 * v + 1] as Height)
            })
            .collect();

        // Enabled processes and their outcomes against the pre-step snapshot.
        let mut actions: [Option<ProcessState>; 8] = [None; 8];
        let mut activable_mask = 0u8;
        for v in 0..n {
            if self.correct_mask & (1 << v) == 0 {
                continue;
            }
            local_view_from_states(&mut view, &states, self.topo, v);
            if let Some(rule) = first_enabled(self.protocol, &view) {
                activable_mask |= 1 << v;
                actions[v] = Some(self.protocol.action(&view, rule));
            }
        }
        let activable: Vec<ProcessId> =
            (0..n).filter(|&v| activable_mask & (1 << v) != 0).collect();

        // Write combinations: per Byzantine process, either no write or any
        // capped state different from the current one (a same-state write is
        // a semantic no-op and would only add no-op edges).
        let byz: Vec<ProcessId> = self.topo.byzantine_set().iter().copied().collect();
        let mut write_combos: Vec<Vec<ByzantineWrite>> = vec![Vec::new()];
        if self.budget.adversary == AdversaryClass::FullWrites {
            for &bz in &byz {
                let mut options: Vec<Option<ProcessState>> = vec![None];
                for code in 0..=self.topo.degree(bz) {
                    let parent = if code == 0 { None } else { Some(code - 1) };
                    for h in 0..=self.budget.adversary_height_cap {
                        let s = ProcessState::new(parent, h);
                        if s != states[bz] {
                            options.push(Some(s));
                        }
                    }
                }
                let mut next = Vec::with_capacity(write_combos.len() * options.len());
                for combo in &write_combos {
                    for opt in &options {
                        let mut c = combo.clone();
                        if let Some(state) = opt {
                            c.push(ByzantineWrite { process: bz, state: *state });
                        }
                        next.push(c);
                    }
                }
                write_combos = next;
            }
        }

        // Selection sets allowed by the daemon mode. With age tracking the
        // empty selection is allowed (write-only steps); fairness legality is
        // checked per child below.
        let mut selection_masks: Vec<u8> = Vec::new();
        for bits in 0u32..(1 << activable.len()) {
            if bits == 0 && !tracked {
                continue;
            }
            if self.budget.daemon == DaemonMode::Central && bits.count_ones() > 1 {
                continue;
            }
            let mut mask = 0u8;
            for (i, &v) in activable.iter().enumerate() {
                if bits & (1 << i) != 0 {
                    mask |= 1 << v;
                }
            }
            selection_masks.push(mask);
        }

        let mut children = Vec::new();
        let mut child_states: Vec<ProcessState> = states.clone();
        for &sel_mask in &selection_masks {
            'combos: for combo in &write_combos {
                if sel_mask == 0 && combo.is_empty() {
                    continue;
                }
                child_states.copy_from_slice(&states);
                let mut change_mask = 0u8;
                for v in 0..n {
                    if sel_mask & (1 << v) != 0 {
                        let new_state = actions[v].expect("selected process is activable");
                        if new_state != states[v] {
                            change_mask |= 1 << v;
                        }
                        child_states[v] = new_state;
                    }
                }
                for w in combo {
                    child_states[w.process] = w.state;
                    change_mask |= 1 << w.process;
                }
                for v in 0..n {
                    let h = child_states[v].height;
                    self.max_height_seen = self.max_height_seen.max(h);
                    if h > self.height_limit {
                        return Err(ExploreError::HeightClosure {
                            process: v,
                            height: h,
                            limit: self.height_limit,
                        });
                    }
                }

                let mut key_buf = Vec::with_capacity(self.key_len());
                for v in 0..n {
                    let s = child_states[v];
                    key_buf.push(s.parent.map_or(NIL_CODE, |k| k as u8 + 1));
                    key_buf.push(s.height as u8);
                }
                if tracked {
                    for v in 0..n {
                        let was_waiting = activable_mask & (1 << v) != 0
                            && sel_mask & (1 << v) == 0;
                        let age = if was_waiting {
                            local_view_from_states(&mut view, &child_states, self.topo, v);
                            if first_enabled(self.protocol, &view).is_some() {
                                key[2 * n + v] + 1
                            } else {
                                0
                            }
                        } else {
                            0
                        };
                        if u32::from(age) >= bound {
                            continue 'combos; // starves v beyond the bound
                        }
                        key_buf.push(age);
                    }
                }

                let mut completion = false;
                if self.certify {
                    let dirty = *key.last().unwrap() != 0;
                    let pending = dirty || (change_mask & self.shielded_mask) != 0;
                    let ls = self.is_ls(&key_buf[..2 * n]);
                    completion = ls && pending;
                    key_buf.push(u8::from(pending && !ls));
                }

                children.push(Child {
                    key: key_buf,
                    action_mask: sel_mask,
                    change_mask,
                    completion,
                    selected: (0..n).filter(|&v| sel_mask & (1 << v) != 0).collect(),
                    writes: combo.clone(),
                });
            }
        }
        if self.budget.reverse_children {
            children.reverse();
        }
        Ok(Expansion { children, any_activable: !activable.is_empty() })
    }

    fn intern(&mut self, key: &[u8]) -> (u32, bool) {
        if let Some(&id) = self.map.get(key) {
            return (id, false);
        }
        let id = self.map.len() as u32;
        self.map.insert(key.to_vec().into_boxed_slice(), id);
        (id, true)
    }

    /// Breadth-first discovery; nodes are popped in id order, so the edge
    /// list is in compressed adjacency form when it completes.
    fn discover(&mut self, starts: &[Vec<u8>]) -> Result<Vec<u32>, ExploreError> {
        let mut queue: VecDeque<(u32, Vec<u8>, u32)> = VecDeque::new();
        let mut start_ids = Vec::with_capacity(starts.len());
        for key in starts {
            let (id, new) = self.intern(key);
            start_ids.push(id);
            if new {
                queue.push_back((id, key.clone(), 0));
            }
        }
        while let Some((id, key, depth)) = queue.pop_front() {
            debug_assert_eq!(self.offsets.len(), id as usize);
            self.offsets.push(self.edges.len());

            let is_target = self.truncate_at_target && {
                let t = self.is_ls(&key[..2 * self.n]);
                self.target.push(t);
                t
            };
            if !self.truncate_at_target {
                self.target.push(false);
            }
            if is_target {
                continue;
            }
            if depth >= self.budget.max_depth
                || self.map.len() > self.budget.max_nodes
                || self.edges.len() > self.budget.max_edges
            {
                self.exhaustive = false;
                continue;
            }

            let expansion = self.expand(&key)?;
            if expansion.children.is_empty() {
                if expansion.any_activable {
                    // Central daemon could not honor the bound: pruned leaf.
                    self.dead_ends += 1;
                } else if !self.is_ls(&key[..2 * self.n]) {
                    self.bad_terminals.push(id);
                }
                continue;
            }
            for child in expansion.children {
                let (cid, new) = self.intern(&child.key);
                self.edges.push(Edge {
                    target: cid,
                    action_mask: child.action_mask,
                    change_mask: child.change_mask,
                    completion: child.completion,
                });
                if new {
                    queue.push_back((cid, child.key, depth + 1));
                }
            }
        }
        self.offsets.push(self.edges.len());
        Ok(start_ids)
    }

    fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    fn edges_of(&self, node: u32) -> &[Edge] {
        &self.edges[self.offsets[node as usize]..self.offsets[node as usize + 1]]
    }

    /// Iterative Tarjan; returns per-node component ids. Components are
    /// numbered in emission order, i.e. every component's successors have
    /// smaller ids.
    fn tarjan(&self) -> (Vec<u32>, u32) {
        let n = self.node_count();
        let mut index = vec![UNDEF; n];
        let mut lowlink = vec![0u32; n];
        let mut on_stack = vec![false; n];
        let mut scc_id = vec![UNDEF; n];
        let mut stack: Vec<u32> = Vec::new();
        let mut next_index = 0u32;
        let mut scc_count = 0u32;
        let mut frames: Vec<(u32, usize)> = Vec::new();

        for root in 0..n as u32 {
            if index[root as usize] != UNDEF {
                continue;
            }
            frames.push((root, 0));
            index[root as usize] = next_index;
            lowlink[root as usize] = next_index;
            next_index += 1;
            stack.push(root);
            on_stack[root as usize] = true;

            while let Some(&mut (v, ref mut cursor)) = frames.last_mut() {
                let edges = self.edges_of(v);
                if *cursor < edges.len() {
                    let w = edges[*cursor].target;
                    *cursor += 1;
                    if index[w as usize] == UNDEF {
                        index[w as usize] = next_index;
                        lowlink[w as usize] = next_index;
                        next_index += 1;
                        stack.push(w);
                        on_stack[w as usize] = true;
                        frames.push((w, 0));
                    } else if on_stack[w as usize] {
                        lowlink[v as usize] =
                            lowlink[v as usize].min(index[w as usize]);
                    }
                } else {
                    frames.pop();
                    if let Some(&mut (parent, _)) = frames.last_mut() {
                        lowlink[parent as usize] =
                            lowlink[parent as usize].min(lowlink[v as usize]);
                    }
                    if lowlink[v as usize] == index[v as usize] {
                        loop {
                            let w = stack.pop().unwrap();
                            on_stack[w as usize] = false;
                            scc_id[w as usize] = scc_count;
                            if w == v {
                                break;
                            }
                        }
                        scc_count += 1;
                    }
                }
            }
        }
        (scc_id, scc_count)
    }

    /// First edge inside a multi-node component whose weight matters, if any.
    fn find_bad_cycle(
        &self,
        scc_id: &[u32],
        scc_count: u32,
        relevant: impl Fn(&Edge) -> bool,
    ) -> Option<u32> {
        let mut scc_size = vec![0u32; scc_count as usize];
        for &s in scc_id {
            scc_size[s as usize] += 1;
        }
        for v in 0..self.node_count() as u32 {
            if scc_size[scc_id[v as usize] as usize] < 2 {
                continue;
            }
            for e in self.edges_of(v) {
                if scc_id[e.target as usize] == scc_id[v as usize] && relevant(e) {
                    return Some(v);
                }
            }
        }
        None
    }

    /// Componentwise suffix maxima: for each component and dimension, the
    /// maximum accumulated weight over any path leaving it. Edges inside a
    /// component must have zero weight in every dimension (checked by the
    /// cycle passes first).
    fn suffix_max(
        &self,
        scc_id: &[u32],
        scc_count: u32,
        dims: usize,
        weight: impl Fn(&Edge, usize) -> u32,
    ) -> Vec<u64> {
        let mut value = vec![0u64; scc_count as usize * dims];
        // Components emitted by Tarjan in reverse topological order: process
        // nodes grouped by ascending component id, successors already final.
        let mut members: Vec<Vec<u32>> = vec![Vec::new(); scc_count as usize];
        for v in 0..self.node_count() as u32 {
            members[scc_id[v as usize] as usize].push(v);
        }
        for scc in 0..scc_count as usize {
            for &v in &members[scc] {
                for e in self.edges_of(v) {
                    let target_scc = scc_id[e.target as usize] as usize;
                    if target_scc == scc {
                        continue;
                    }
                    for d in 0..dims {
                        let cand = value[target_scc * dims + d] + u64::from(weight(e, d));
                        if cand > value[scc * dims + d] {
                            value[scc * dims + d] = cand;
                        }
                    }
                }
            }
        }
        value
    }

    /// Shortest id-path from `from` to a node satisfying `pred`, along edges.
    fn path_to(&self, from: &[u32], pred: impl Fn(u32) -> bool) -> Option<Vec<u32>> {
        let n = self.node_count();
        let mut parent = vec![UNDEF; n];
        let mut seen = vec![false; n];
        let mut queue: VecDeque<u32> = VecDeque::new();
        for &s in from {
            if !seen[s as usize] {
                seen[s as usize] = true;
                queue.push_back(s);
            }
        }
        while let Some(v) = queue.pop_front() {
            if pred(v) {
                let mut path = vec![v];
                let mut cur = v;
                while parent[cur as usize] != UNDEF {
                    cur = parent[cur as usize];
                    path.push(cur);
                }
                path.reverse();
                return Some(path);
            }
            for e in self.edges_of(v) {
                if !seen[e.target as usize] {
                    seen[e.target as usize] = true;
                    parent[e.target as usize] = v;
                    queue.push_back(e.target);
                }
            }
        }
        None
    }

    /// A cycle through `entry` staying inside its component.
    fn cycle_through(&self, scc_id: &[u32], entry: u32) -> Vec<u32> {
        let scc = scc_id[entry as usize];
        let n = self.node_count();
        let mut parent = vec![UNDEF; n];
        let mut seen = vec![false; n];
        let mut queue: VecDeque<u32> = VecDeque::new();
        // BFS from entry's successors (inside the component) back to entry.
        for e in self.edges_of(entry) {
            if scc_id[e.target as usize] == scc && !seen[e.target as usize] {
                seen[e.target as usize] = true;
                queue.push_back(e.target);
            }
        }
        if self
            .edges_of(entry)
            .iter()
            .any(|e| e.target == entry)
        {
            return vec![entry, entry];
        }
        while let Some(v) = queue.pop_front() {
            if v == entry {
                break;
            }
            for e in self.edges_of(v) {
                let w = e.target;
                if scc_id[w as usize] == scc && !seen[w as usize] {
                    seen[w as usize] = true;
                    parent[w as usize] = v;
                    queue.push_back(w);
                }
                if w == entry {
                    let mut path = vec![entry];
                    let mut cur = v;
                    path.push(cur);
                    while parent[cur as usize] != UNDEF {
                        cur = parent[cur as usize];
                        path.push(cur);
                    }
                    path.push(entry);
                    path.reverse();
                    return path;
                }
            }
        }
        vec![entry]
    }

    /// Re-walk an id path, regenerating each step, and package it as a run.
    fn history_along(
        &mut self,
        start_key: &[u8],
        path: &[u32],
    ) -> Result<RunHistory, ExploreError> {
        let mut history = RunHistory {
            configs: vec![self.config_from_key(start_key)],
            steps: Vec::new(),
        };
        let mut key = start_key.to_vec();
        for pair in path.windows(2) {
            let next_id = pair[1];
            let expansion = self.expand(&key)?;
            let child = expansion
                .children
                .into_iter()
                .find(|c| self.map.get(c.key.as_slice()) == Some(&next_id))
                .expect("edge on recorded path regenerates");
            let config = self.config_from_key(&child.key);
            history.steps.push(StepRecord {
                selected: child.selected,
                writes: child.writes,
                changed: history.configs.last().unwrap().diff(&config),
            });
            history.configs.push(config);
            key = child.key;
        }
        Ok(history)
    }

    /// Greedy descent along edges that realize a suffix maximum, yielding a
    /// concrete path achieving `value[dim]` from `start`.
    fn maximizing_path(
        &self,
        scc_id: &[u32],
        value: &[u64],
        dims: usize,
        dim: usize,
        weight: impl Fn(&Edge, usize) -> u32 + Copy,
        start: u32,
    ) -> Vec<u32> {
        let mut path = vec![start];
        let mut cur = start;
        let mut remaining = value[scc_id[start as usize] as usize * dims + dim];
        let mut guard = 0usize;
        while remaining > 0 {
            guard += 1;
            if guard > self.node_count() * 4 {
                break;
            }
            let scc = scc_id[cur as usize];
            // Prefer a cross-component edge realizing the value; otherwise
            // move inside the component toward one.
            let mut moved = false;
            for e in self.edges_of(cur) {
                let target_scc = scc_id[e.target as usize];
                if target_scc != scc
                    && value[target_scc as usize * dims + dim] + u64::from(weight(e, dim))
                        == remaining
                {
                    remaining = value[target_scc as usize * dims + dim];
                    cur = e.target;
                    path.push(cur);
                    moved = true;
                    break;
                }
            }
            if moved {
                continue;
            }
            // Walk inside the component to a member that has the realizing
            // exit edge.
            let exit = self.path_to(&[cur], |v| {
                scc_id[v as usize] == scc
                    && self.edges_of(v).iter().any(|e| {
                        let ts = scc_id[e.target as usize];
                        ts != scc
                            && value[ts as usize * dims + dim] + u64::from(weight(e, dim))
                                == remaining
                    })
            });
            match exit {
                Some(p) if p.len() > 1 => {
                    path.extend_from_slice(&p[1..]);
                    cur = *p.last().unwrap();
                }
                _ => break,
            }
        }
        path
    }
}

fn enumerate_all_configurations(
    topo: &Topology,
    cap: Height,
    max: usize,
) -> Result<Vec<Configuration>, ExploreError> {
    let n = topo.process_count();
    let mut total: usize = 1;
    for v in 0..n {
        total = total
            .checked_mul((topo.degree(v) + 1) * (cap as usize + 1))
            .filter(|&t| t <= max)
            .ok_or_else(|| {
                ExploreError::BadStart(format!(
                    "initial configuration space exceeds {max} nodes"
                ))
            })?;
    }
    let mut configs = Vec::with_capacity(total);
    let mut states = vec![ProcessState::new(None, 0); n];
    fn rec(
        topo: &Topology,
        cap: Height,
        v: usize,
        states: &mut Vec<ProcessState>,
        out: &mut Vec<Configuration>,
    ) {
        if v == topo.process_count() {
            out.push(Configuration::new(states.clone()));
            return;
        }
        for code in 0..=topo.degree(v) {
            let parent = if code == 0 { None } else { Some(code - 1) };
            for h in 0..=cap {
                states[v] = ProcessState::new(parent, h);
                rec(topo, cap, v + 1, states, out);
            }
        }
    }
    rec(topo, cap, 0, &mut states, &mut configs);
    Ok(configs)
}

fn start_configs(
    topo: &Topology,
    budget: &ExplorationBudget,
    starts: &StartSet,
) -> Result<Vec<Configuration>, ExploreError> {
    match starts {
        StartSet::AllConfigurations => {
            enumerate_all_configurations(topo, budget.initial_height_cap, budget.max_nodes)
        }
        StartSet::Explicit(configs) => {
            for config in configs {
                config
                    .check(topo)
                    .map_err(|e| ExploreError::BadStart(e.to_string()))?;
                if let Some(s) = config.states().iter().find(|s| s.height > budget.initial_height_cap) {
                    return Err(ExploreError::BadStart(format!(
                        "start height {} exceeds the initial height cap {}",
                        s.height, budget.initial_height_cap
                    )));
                }
            }
            Ok(configs.clone())
        }
    }
}

/// Exhaustively search every execution from the start set and certify
/// convergence, with exact worst-case action counts when converged.
pub fn explore(
    topo: &Topology,
    protocol: &dyn Protocol,
    budget: ExplorationBudget,
    starts: &StartSet,
) -> Result<ExplorationResult, ExploreError> {
    let configs = start_configs(topo, &budget, starts)?;
    let mut search = Search::new(topo, protocol, budget, false, true, 0)?;
    let start_keys: Vec<Vec<u8>> = configs.iter().map(|c| search.encode_start(c)).collect();
    let start_ids = search.discover(&start_keys)?;

    let (scc_id, scc_count) = search.tarjan();
    let cycle_entry = search.find_bad_cycle(&scc_id, scc_count, |_| true);

    let n = topo.process_count();
    let mut result = ExplorationResult {
        converged: false,
        max_actions: BTreeMap::new(),
        longest_execution: 0,
        nodes: search.node_count(),
        edges: search.edges.len(),
        exhaustive: search.exhaustive,
        dead_ends: search.dead_ends,
        max_height_seen: search.max_height_seen,
        witness: None,
        targets: Vec::new(),
    };

    if budget.collect_targets {
        let mut seen = std::collections::BTreeSet::new();
        for (key, &id) in &search.map {
            if *search.target.get(id as usize).unwrap_or(&false) {
                seen.insert(key[..2 * n].to_vec());
            }
        }
        result.targets = seen
            .iter()
            .map(|key| search.config_from_key(key))
            .collect();
    }

    let bad_terminal = search.bad_terminals.first().copied();
    if let Some(entry) = cycle_entry {
        // Lasso: reach the cycle, then go around it once.
        let mut path = search
            .path_to(&start_ids, |v| v == entry)
            .expect("cycle entry is reachable");
        let cycle = search.cycle_through(&scc_id, entry);
        path.extend_from_slice(&cycle[1..]);
        let start_key = key_of_start(&start_keys, &start_ids, path[0]);
        result.witness = Some(search.history_along(&start_key, &path)?);
        return Ok(result);
    }
    if let Some(stuck) = bad_terminal {
        let path = search
            .path_to(&start_ids, |v| v == stuck)
            .expect("terminal is reachable");
        let start_key = key_of_start(&start_keys, &start_ids, path[0]);
        result.witness = Some(search.history_along(&start_key, &path)?);
        return Ok(result);
    }

    result.converged = search.exhaustive;
    if result.converged {
        // Acyclic now: exact per-process action maxima plus path length.
        let dims = n + 1;
        let value = search.suffix_max(&scc_id, scc_count, dims, |e, d| {
            if d < n {
                u32::from(e.action_mask >> d & 1)
            } else {
                1
            }
        });
        for v in topo.correct_processes() {
            let best = start_ids
                .iter()
                .map(|&s| value[scc_id[s as usize] as usize * dims + v])
                .max()
                .unwrap_or(0);
            result.max_actions.insert(v, best);
        }
        result.longest_execution = start_ids
            .iter()
            .map(|&s| value[scc_id[s as usize] as usize * dims + n])
            .max()
            .unwrap_or(0);
    }
    Ok(result)
}

fn key_of_start(start_keys: &[Vec<u8>], start_ids: &[u32], id: u32) -> Vec<u8> {
    let pos = start_ids
        .iter()
        .position(|&s| s == id)
        .expect("path starts at a start node");
    start_keys[pos].clone()
}

/// Exact worst-case action count of one process (projection of `explore`).
pub fn worst_case_actions(
    topo: &Topology,
    protocol: &dyn Protocol,
    v: ProcessId,
    budget: ExplorationBudget,
    starts: &StartSet,
) -> Result<Option<u64>, ExploreError> {
    let result = explore(topo, protocol, budget, starts)?;
    Ok(result.max_actions.get(&v).copied())
}

/// Exhaustively check temporal containment from one stabilized start: every
/// enumerated execution must quiet down (no shielded change recurs forever),
/// complete at most `params.t` perturbations, and change each shielded
/// process at most `params.k` times.
pub fn certify_temporal_containment(
    topo: &Topology,
    protocol: &dyn Protocol,
    start: &Configuration,
    params: &ContainmentParams,
    budget: ExplorationBudget,
) -> Result<CertifyOutcome, ExploreError> {
    start
        .check(topo)
        .map_err(|e| ExploreError::BadStart(e.to_string()))?;
    if !is_c_legitimate(start, topo, protocol, params.c)
        || is_c_stable(start, topo, protocol, params.c, 100_000) != Stability::Stable
    {
        return Err(ExploreError::BadStart(
            "start configuration is not legitimate and stable at the requested radius".into(),
        ));
    }
    let mut search = Search::new(topo, protocol, budget, true, false, params.c)?;
    if let Some(s) = start.states().iter().find(|s| s.height > search.height_limit) {
        return Err(ExploreError::BadStart(format!(
            "start height {} exceeds the reachable-height limit {}",
            s.height, search.height_limit
        )));
    }
    let start_keys = vec![search.encode_start(start)];
    let start_ids = search.discover(&start_keys)?;
    if !search.exhaustive {
        return Ok(CertifyOutcome::Indeterminate {
            reason: format!(
                "budget exhausted after {} nodes / {} edges",
                search.node_count(),
                search.edges.len()
            ),
        });
    }
    if let Some(&stuck) = search.bad_terminals.first() {
        let _ = stuck;
        return Ok(CertifyOutcome::Indeterminate {
            reason: "search reached a stuck non-legitimate terminal".into(),
        });
    }

    let shielded_mask = search.shielded_mask;
    let (scc_id, scc_count) = search.tarjan();
    if let Some(entry) =
        search.find_bad_cycle(&scc_id, scc_count, |e| e.change_mask & shielded_mask != 0)
    {
        let mut path = search
            .path_to(&start_ids, |v| v == entry)
            .expect("cycle entry is reachable");
        let cycle = search.cycle_through(&scc_id, entry);
        path.extend_from_slice(&cycle[1..]);
        let witness = search.history_along(&start_keys[0], &path)?;
        return Ok(CertifyOutcome::Counterexample {
            reason: "a shielded process can change S-variables forever".into(),
            witness,
        });
    }

    let n = topo.process_count();
    let dims = n + 1;
    let weight = |e: &Edge, d: usize| -> u32 {
        if d < n {
            u32::from((e.change_mask & shielded_mask) >> d & 1)
        } else {
            u32::from(e.completion)
        }
    };
    let value = search.suffix_max(&scc_id, scc_count, dims, weight);
    let at = |dim: usize| value[scc_id[start_ids[0] as usize] as usize * dims + dim];

    let max_perturbations = at(n);
    let mut max_changes = BTreeMap::new();
    for v in 0..n {
        if shielded_mask & (1 << v) != 0 {
            max_changes.insert(v, at(v));
        }
    }

    let mut violation: Option<(String, usize)> = None;
    if max_perturbations > params.t {
        violation = Some((
            format!("{max_perturbations} perturbations exceed the bound t={}", params.t),
            n,
        ));
    } else if let Some((&v, &count)) = max_changes.iter().find(|(_, &count)| count > params.k) {
        violation = Some((
            format!("process {v} changes {count} times, exceeding k={}", params.k),
            v,
        ));
    }
    if let Some((reason, dim)) = violation {
        let path = search.maximizing_path(
            &scc_id,
            &value,
            dims,
            dim,
            weight,
            start_ids[0],
        );
        let witness = search.history_along(&start_keys[0], &path)?;
        return Ok(CertifyOutcome::Counterexample { reason, witness });
    }

    Ok(CertifyOutcome::Certified {
        max_perturbations,
        max_changes,
        nodes: search.node_count(),
    })
}
