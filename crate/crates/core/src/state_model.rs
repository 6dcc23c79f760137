//! The shared-variable computation model: configurations, local read
//! snapshots, guarded rules, and composite-atomic steps.
//!
//! A step selects a set of correct activable processes and a set of Byzantine
//! writes. Every selected process evaluates its first enabled rule against the
//! pre-step configuration; the resulting states and the Byzantine writes are
//! then installed simultaneously.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::topology::{Channel, ProcessId, Topology};

/// Tree height. Caps supplied by run/exploration budgets keep heights small;
/// `u64` leaves ample headroom above any configured cap.
pub type Height = u64;

/// The S-variables of one process: a parent designation (a channel number or
/// NIL) and a height.
///
/// There are no construction-time invariants: initial configurations are
/// arbitrary. Validated configurations additionally keep parent channels
/// below the process degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProcessState {
    pub parent: Option<Channel>,
    pub height: Height,
}

impl ProcessState {
    pub const fn new(parent: Option<Channel>, height: Height) -> Self {
        ProcessState { parent, height }
    }

    /// The root's sole legitimate state: no parent, height 0.
    pub const ROOT_REST: ProcessState = ProcessState { parent: None, height: 0 };
}

impl fmt::Display for ProcessState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.parent {
            Some(k) => write!(f, "parent={} height={}", k, self.height),
            None => write!(f, "parent=NIL height={}", self.height),
        }
    }
}

/// A global snapshot: one state per process.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    states: Vec<ProcessState>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("configuration describes {got} processes, topology has {want}")]
    WrongProcessCount { got: usize, want: usize },
    #[error("process {process}: parent channel {channel} out of range (degree {degree})")]
    ParentOutOfRange { process: ProcessId, channel: Channel, degree: usize },
    #[error("configuration parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Configuration {
    pub fn new(states: Vec<ProcessState>) -> Self {
        Configuration { states }
    }

    /// A configuration with every process at `(NIL, 0)`.
    pub fn zeroed(n: usize) -> Self {
        Configuration { states: vec![ProcessState::new(None, 0); n] }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, v: ProcessId) -> ProcessState {
        self.states[v]
    }

    pub fn set_state(&mut self, v: ProcessId, s: ProcessState) {
        self.states[v] = s;
    }

    pub fn states(&self) -> &[ProcessState] {
        &self.states
    }

    /// Check the configuration against a topology: right process count,
    /// parent channels within degree.
    pub fn check(&self, topo: &Topology) -> Result<(), ConfigError> {
        if self.len() != topo.process_count() {
            return Err(ConfigError::WrongProcessCount {
                got: self.len(),
                want: topo.process_count(),
            });
        }
        for v in topo.processes() {
            if let Some(k) = self.states[v].parent {
                if k >= topo.degree(v) {
                    return Err(ConfigError::ParentOutOfRange {
                        process: v,
                        channel: k,
                        degree: topo.degree(v),
                    });
                }
            }
        }
        Ok(())
    }

    /// Processes whose state differs from `other`.
    pub fn diff(&self, other: &Configuration) -> Vec<ProcessId> {
        self.states
            .iter()
            .zip(&other.states)
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(v, _)| v)
            .collect()
    }

    /// Canonical serialization: one record per process,
    /// `<id> parent=<channel|NIL> height=<integer>`.
    pub fn format(&self) -> String {
        let mut out = String::new();
        for (v, s) in self.states.iter().enumerate() {
            out.push_str(&format!("{v} {s}\n"));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Configuration, ConfigError> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |m: &str| ConfigError::Parse { line: i + 1, message: m.to_string() };
            let mut toks = line.split_whitespace();
            let id: usize = toks
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| err("expected process id"))?;
            let parent = toks
                .next()
                .and_then(|t| t.strip_prefix("parent="))
                .ok_or_else(|| err("expected parent=<channel|NIL>"))?;
            let parent = if parent == "NIL" {
                None
            } else {
                Some(parent.parse().map_err(|_| err("bad parent channel"))?)
            };
            let height: Height = toks
                .next()
                .and_then(|t| t.strip_prefix("height="))
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| err("expected height=<integer>"))?;
            records.push((id, ProcessState::new(parent, height), i + 1));
        }
        let n = records.len();
        let mut states = vec![None; n];
        for (id, s, line) in records {
            if id >= n || states[id].is_some() {
                return Err(ConfigError::Parse {
                    line,
                    message: format!("bad or duplicate process id {id}"),
                });
            }
            states[id] = Some(s);
        }
        Ok(Configuration::new(states.into_iter().map(|s| s.unwrap()).collect()))
    }
}

/// What one process can read in a single atomic step: its own state and its
/// neighbors' states, indexed by channel number.
///
/// `neighbor_correct` is an analysis-side oracle for the specification
/// predicate. Rule guards and actions must not consult it: a real process
/// cannot know which neighbors are Byzantine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalView {
    pub id: ProcessId,
    pub is_root: bool,
    pub state: ProcessState,
    pub neighbors: Vec<ProcessState>,
    pub neighbor_correct: Vec<bool>,
}

impl LocalView {
    pub fn degree(&self) -> usize {
        self.neighbors.len()
    }

    /// The state of the neighbor the parent pointer designates, if the
    /// pointer names a valid channel.
    pub fn parent_state(&self) -> Option<ProcessState> {
        self.state.parent.and_then(|k| self.neighbors.get(k).copied())
    }
}

/// Snapshot of `v`'s neighborhood in `config`, indexed by channel.
pub fn local_view(config: &Configuration, topo: &Topology, v: ProcessId) -> LocalView {
    LocalView {
        id: v,
        is_root: v == topo.root(),
        state: config.state(v),
        neighbors: topo.neighbors(v).iter().map(|&u| config.state(u)).collect(),
        neighbor_correct: topo.neighbors(v).iter().map(|&u| topo.is_correct(u)).collect(),
    }
}

/// Rebuild `view` in place from a raw state slice, reusing its buffers. The
/// explorer's hot loops use this to avoid per-view allocations; the result is
/// identical to [`local_view`].
pub fn local_view_from_states(
    view: &mut LocalView,
    states: &[ProcessState],
    topo: &Topology,
    v: ProcessId,
) {
    view.id = v;
    view.is_root = v == topo.root();
    view.state = states[v];
    view.neighbors.clear();
    view.neighbors.extend(topo.neighbors(v).iter().map(|&u| states[u]));
    view.neighbor_correct.clear();
    view
        .neighbor_correct
        .extend(topo.neighbors(v).iter().map(|&u| topo.is_correct(u)));
}

impl LocalView {
    /// An empty view to be filled by [`local_view_from_states`].
    pub fn scratch() -> LocalView {
        LocalView {
            id: 0,
            is_root: false,
            state: ProcessState::new(None, 0),
            neighbors: Vec::new(),
            neighbor_correct: Vec::new(),
        }
    }
}

/// A protocol: an ordered rule list plus the local specification predicate.
///
/// Guards and actions are deterministic and read only the view (and never its
/// correctness flags). When several guards hold, the first enabled rule in
/// declaration order fires.
pub trait Protocol {
    fn name(&self) -> &'static str;
    fn rule_count(&self) -> usize;
    fn guard(&self, view: &LocalView, rule: usize) -> bool;
    /// The state the process writes when `rule` fires. Only meaningful when
    /// the guard holds.
    fn action(&self, view: &LocalView, rule: usize) -> ProcessState;
    /// The local specification predicate. May consult the view's correctness
    /// flags (analysis-side oracle).
    fn spec(&self, view: &LocalView) -> bool;
    /// True when every enabled action is guaranteed to change at least one
    /// S-variable; lets stability checks short-circuit.
    fn actions_always_change(&self) -> bool {
        false
    }
}

/// Indices of the rules whose guards hold; empty iff the process is not
/// activable.
pub fn enabled_rules(protocol: &dyn Protocol, view: &LocalView) -> Vec<usize> {
    (0..protocol.rule_count())
        .filter(|&r| protocol.guard(view, r))
        .collect()
}

pub fn first_enabled(protocol: &dyn Protocol, view: &LocalView) -> Option<usize> {
    (0..protocol.rule_count()).find(|&r| protocol.guard(view, r))
}

pub fn is_activable(protocol: &dyn Protocol, config: &Configuration, topo: &Topology, v: ProcessId) -> bool {
    first_enabled(protocol, &local_view(config, topo, v)).is_some()
}

/// Correct processes with at least one enabled rule, in id order.
pub fn activable_set(protocol: &dyn Protocol, config: &Configuration, topo: &Topology) -> Vec<ProcessId> {
    topo.correct_processes()
        .filter(|&v| is_activable(protocol, config, topo, v))
        .collect()
}

/// An arbitrary rewrite of a Byzantine process's S-variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ByzantineWrite {
    pub process: ProcessId,
    pub state: ProcessState,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StepError {
    #[error("unknown process id {0}")]
    UnknownProcess(ProcessId),
    #[error("selected process {0} is Byzantine; Byzantines act only through writes")]
    SelectedByzantine(ProcessId),
    #[error("selected process {0} is not activable")]
    NotActivable(ProcessId),
    #[error("duplicate write for Byzantine process {0}")]
    DuplicateWrite(ProcessId),
    #[error("write targets correct process {0}")]
    WriteTargetsCorrect(ProcessId),
    #[error("write for process {process} has out-of-range parent channel {channel}")]
    WriteParentOutOfRange { process: ProcessId, channel: Channel },
    #[error("step selects no process and contains no write")]
    EmptyStep,
}

/// Execute one composite-atomic step.
///
/// All selected processes evaluate their first enabled rule against the
/// pre-step configuration; their new states and the Byzantine writes are
/// installed simultaneously. Selection order is irrelevant; duplicates in
/// `selected` are collapsed.
pub fn apply_step(
    config: &Configuration,
    topo: &Topology,
    protocol: &dyn Protocol,
    selected: &[ProcessId],
    writes: &[ByzantineWrite],
) -> Result<Configuration, StepError> {
    let selected: BTreeSet<ProcessId> = selected.iter().copied().collect();
    if selected.is_empty() && writes.is_empty() {
        return Err(StepError::EmptyStep);
    }

    let mut next = config.clone();
    for &v in &selected {
        if v >= topo.process_count() {
            return Err(StepError::UnknownProcess(v));
        }
        if topo.is_byzantine(v) {
            return Err(StepError::SelectedByzantine(v));
        }
        let view = local_view(config, topo, v);
        let rule = first_enabled(protocol, &view).ok_or(StepError::NotActivable(v))?;
        next.set_state(v, protocol.action(&view, rule));
    }

    let mut written = BTreeSet::new();
    for w in writes {
        if w.process >= topo.process_count() {
            return Err(StepError::UnknownProcess(w.process));
        }
        if topo.is_correct(w.process) {
            return Err(StepError::WriteTargetsCorrect(w.process));
        }
        if !written.insert(w.process) {
            return Err(StepError::DuplicateWrite(w.process));
        }
        if let Some(k) = w.state.parent {
            if k >= topo.degree(w.process) {
                return Err(StepError::WriteParentOutOfRange { process: w.process, channel: k });
            }
        }
        next.set_state(w.process, w.state);
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::Cafs;
    use crate::topology::Topology;

    fn line2() -> Topology {
        Topology::new(vec![vec![1], vec![0]], 0, [])
    }

    fn line3_byz() -> Topology {
        Topology::new(vec![vec![1], vec![0, 2], vec![1]], 0, [2])
    }

    #[test]
    fn local_view_reads_neighbors_by_channel() {
        let topo = line2();
        let config = Configuration::new(vec![
            ProcessState::new(None, 0),
            ProcessState::new(Some(0), 1),
        ]);
        let view = local_view(&config, &topo, 1);
        assert_eq!(view.neighbors[0], ProcessState::new(None, 0));
        assert!(!view.is_root);
        assert_eq!(view.parent_state(), Some(ProcessState::new(None, 0)));
    }

    #[test]
    fn local_view_of_isolated_root() {
        let topo = Topology::new(vec![vec![]], 0, []);
        let view = local_view(&Configuration::zeroed(1), &topo, 0);
        assert!(view.is_root);
        assert!(view.neighbors.is_empty());
    }

    #[test]
    fn local_view_in_triangle_lists_all_ports() {
        let topo = Topology::new(vec![vec![1, 2], vec![0, 2], vec![0, 1]], 0, []);
        let config = Configuration::new(vec![
            ProcessState::new(None, 0),
            ProcessState::new(Some(0), 1),
            ProcessState::new(Some(1), 7),
        ]);
        let view = local_view(&config, &topo, 0);
        assert_eq!(view.neighbors.len(), 2);
        assert_eq!(view.neighbors[0], config.state(1));
        assert_eq!(view.neighbors[1], config.state(2));
    }

    #[test]
    fn local_view_is_pure() {
        let topo = line3_byz();
        let config = Configuration::zeroed(3);
        assert_eq!(local_view(&config, &topo, 1), local_view(&config, &topo, 1));
    }

    #[test]
    fn apply_step_fixes_root() {
        let topo = line2();
        let cafs = Cafs;
        let config = Configuration::new(vec![
            ProcessState::new(Some(0), 0),
            ProcessState::new(Some(0), 1),
        ]);
        let next = apply_step(&config, &topo, &cafs, &[0], &[]).unwrap();
        assert_eq!(next.state(0), ProcessState::new(None, 0));
        assert_eq!(next.state(1), config.state(1));
    }

    #[test]
    fn apply_step_write_only() {
        let topo = line3_byz();
        let config = Configuration::zeroed(3);
        let w = ByzantineWrite { process: 2, state: ProcessState::new(Some(0), 9) };
        let next = apply_step(&config, &topo, &Cafs, &[], &[w]).unwrap();
        assert_eq!(next.state(2), ProcessState::new(Some(0), 9));
        assert_eq!(next.state(0), config.state(0));
        assert_eq!(next.state(1), config.state(1));
    }

    #[test]
    fn apply_step_rejects_bad_steps() {
        let topo = line3_byz();
        let config = Configuration::zeroed(3);
        assert_eq!(
            apply_step(&config, &topo, &Cafs, &[], &[]),
            Err(StepError::EmptyStep)
        );
        assert_eq!(
            apply_step(&config, &topo, &Cafs, &[2], &[]),
            Err(StepError::SelectedByzantine(2))
        );
        // Root at rest is not activable.
        assert_eq!(
            apply_step(&config, &topo, &Cafs, &[0], &[]),
            Err(StepError::NotActivable(0))
        );
        let w = ByzantineWrite { process: 2, state: ProcessState::new(None, 1) };
        assert_eq!(
            apply_step(&config, &topo, &Cafs, &[], &[w, w]),
            Err(StepError::DuplicateWrite(2))
        );
        let w = ByzantineWrite { process: 1, state: ProcessState::new(None, 1) };
        assert_eq!(
            apply_step(&config, &topo, &Cafs, &[], &[w]),
            Err(StepError::WriteTargetsCorrect(1))
        );
    }

    #[test]
    fn simultaneous_actions_read_pre_state() {
        // Path 0-1-2-3, all correct: 1 and 3 both act from the pre-step
        // snapshot; both selection orders give the same configuration.
        let topo = Topology::new(vec![vec![1], vec![0, 2], vec![1, 3], vec![2]], 0, []);
        let config = Configuration::new(vec![
            ProcessState::new(None, 0),
            ProcessState::new(Some(0), 5),
            ProcessState::new(Some(0), 6),
            ProcessState::new(Some(0), 9),
        ]);
        let ab = apply_step(&config, &topo, &Cafs, &[1, 3], &[]).unwrap();
        let ba = apply_step(&config, &topo, &Cafs, &[3, 1], &[]).unwrap();
        assert_eq!(ab, ba);
        // 1 re-parents from channel 0 to channel 1, reading 2's pre-step height 6.
        assert_eq!(ab.state(1), ProcessState::new(Some(1), 7));
        // 3 wraps to its only channel, reading 2's pre-step height 6.
        assert_eq!(ab.state(3), ProcessState::new(Some(0), 7));
    }

    #[test]
    fn unselected_processes_never_change() {
        let topo = line3_byz();
        let config = Configuration::new(vec![
            ProcessState::new(None, 0),
            ProcessState::new(Some(0), 3),
            ProcessState::new(None, 2),
        ]);
        let next = apply_step(&config, &topo, &Cafs, &[1], &[]).unwrap();
        assert_eq!(next.state(0), config.state(0));
        assert_eq!(next.state(2), config.state(2));
    }

    #[test]
    fn configuration_serialization_round_trip() {
        let config = Configuration::new(vec![
            ProcessState::new(None, 0),
            ProcessState::new(Some(1), 42),
            ProcessState::new(Some(0), 7),
        ]);
        let text = config.format();
        assert_eq!(text, "0 parent=NIL height=0\n1 parent=1 height=42\n2 parent=0 height=7\n");
        assert_eq!(Configuration::parse(&text).unwrap(), config);
    }

    #[test]
    fn configuration_check_flags_out_of_range_parent() {
        let topo = line2();
        let config = Configuration::new(vec![
            ProcessState::new(Some(3), 0),
            ProcessState::new(None, 0),
        ]);
        assert!(matches!(
            config.check(&topo),
            Err(ConfigError::ParentOutOfRange { process: 0, channel: 3, .. })
        ));
    }
}
