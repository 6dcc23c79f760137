//! Classify configurations and runs: local conformance, stability under a
//! silent adversary, perturbation intervals, and the quantitative containment
//! verdicts.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::Serialize;

use crate::sim::RunHistory;
use crate::state_model::{activable_set, apply_step, local_view, Configuration, Protocol};
use crate::topology::{ProcessId, Topology};

/// Tri-state verdicts: budget exhaustion is surfaced, never coerced to a
/// boolean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Indeterminate,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Pass => write!(f, "pass"),
            Verdict::Fail => write!(f, "fail"),
            Verdict::Indeterminate => write!(f, "indeterminate"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
    Indeterminate,
}

/// Every process at least `c` hops from a Byzantine satisfies the local
/// specification.
pub fn is_c_legitimate(
    config: &Configuration,
    topo: &Topology,
    protocol: &dyn Protocol,
    c: usize,
) -> bool {
    topo.c_correct_set(c)
        .iter()
        .all(|&v| protocol.spec(&local_view(config, topo, v)))
}

/// No execution from `config` in which the Byzantines stay silent changes the
/// S-variables of a process at least `c` hops from a Byzantine.
///
/// For `c = 0` with a protocol whose enabled actions always change state this
/// reduces to "no correct process is activable". The general path runs the
/// Byzantine-silent closure: every schedule of correct moves is explored up
/// to `budget` distinct configurations; exceeding the budget yields
/// `Indeterminate`, reported distinctly from `Unstable`.
pub fn is_c_stable(
    config: &Configuration,
    topo: &Topology,
    protocol: &dyn Protocol,
    c: usize,
    budget: usize,
) -> Stability {
    if c == 0 && protocol.actions_always_change() {
        return if activable_set(protocol, config, topo).is_empty() {
            Stability::Stable
        } else {
            Stability::Unstable
        };
    }
    stability_by_closure(config, topo, protocol, c, budget)
}

/// The definitional stability check, with no shortcut: explore every
/// Byzantine-silent schedule and look for an S-variable change by a process
/// at least `c` hops from a Byzantine.
pub fn stability_by_closure(
    config: &Configuration,
    topo: &Topology,
    protocol: &dyn Protocol,
    c: usize,
    budget: usize,
) -> Stability {
    silent_closure(config, topo, protocol, &topo.c_correct_set(c), budget)
}

fn silent_closure(
    config: &Configuration,
    topo: &Topology,
    protocol: &dyn Protocol,
    shielded: &BTreeSet<ProcessId>,
    budget: usize,
) -> Stability {
    let mut visited: HashSet<Configuration> = HashSet::new();
    visited.insert(config.clone());
    let mut stack = vec![config.clone()];
    while let Some(cfg) = stack.pop() {
        let activable = activable_set(protocol, &cfg, topo);
        if activable.is_empty() {
            continue;
        }
        // A process's new state in a composite step does not depend on who
        // else moves, so one singleton sweep detects shielded changes.
        for &v in &activable {
            let next = apply_step(&cfg, topo, protocol, &[v], &[]).expect("activable step");
            if next.state(v) != cfg.state(v) && shielded.contains(&v) {
                return Stability::Unstable;
            }
        }
        assert!(activable.len() <= 20, "activable set too large for closure");
        for mask in 1u32..(1 << activable.len()) {
            let selected: Vec<ProcessId> = activable
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, &v)| v)
                .collect();
            let next = apply_step(&cfg, topo, protocol, &selected, &[]).expect("activable step");
            if !visited.contains(&next) {
                if visited.len() >= budget {
                    return Stability::Indeterminate;
                }
                visited.insert(next.clone());
                stack.push(next);
            }
        }
    }
    Stability::Stable
}

/// A maximal run segment between two legitimate-and-stable configurations
/// that contains at least one S-variable change by a shielded (c-correct)
/// process.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PerturbationInterval {
    /// Config index of the legitimate-and-stable configuration the segment
    /// leaves.
    pub start: usize,
    /// Config index of the first legitimate-and-stable configuration after
    /// `start`.
    pub end: usize,
    /// Changes per c-correct process within the segment.
    pub changes: BTreeMap<ProcessId, u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScanOutcome {
    pub intervals: Vec<PerturbationInterval>,
    /// Config index of the first legitimate-and-stable configuration.
    pub stabilized_at: Option<usize>,
    /// A shielded process changed after the last legitimate-and-stable
    /// configuration and the run ended before restabilizing.
    pub open_disturbance: bool,
    /// Some stability check exhausted its budget.
    pub indeterminate_stability: bool,
}

/// Classify every configuration of the run and extract the perturbation
/// intervals, in order. Segments without a shielded change are not
/// perturbations.
pub fn perturbation_scan(
    history: &RunHistory,
    topo: &Topology,
    protocol: &dyn Protocol,
    c: usize,
    stability_budget: usize,
) -> ScanOutcome {
    let shielded = topo.c_correct_set(c);
    let mut cache: HashMap<&Configuration, (bool, Stability)> = HashMap::new();
    let mut indeterminate = false;
    let status: Vec<bool> = history
        .configs
        .iter()
        .map(|cfg| {
            let (legit, stable) = *cache.entry(cfg).or_insert_with(|| {
                (
                    is_c_legitimate(cfg, topo, protocol, c),
                    is_c_stable(cfg, topo, protocol, c, stability_budget),
                )
            });
            if stable == Stability::Indeterminate {
                indeterminate = true;
            }
            legit && stable == Stability::Stable
        })
        .collect();

    let mut intervals = Vec::new();
    let mut open_disturbance = false;
    let stabilized_at = status.iter().position(|&ls| ls);
    if let Some(first) = stabilized_at {
        let mut cur = first;
        loop {
            let Some(next) = (cur + 1..status.len()).find(|&i| status[i]) else {
                // Run ended before restabilizing.
                open_disturbance = (cur..history.steps.len()).any(|s| {
                    history.steps[s].changed.iter().any(|p| shielded.contains(p))
                });
                break;
            };
            let mut changes: BTreeMap<ProcessId, u64> = BTreeMap::new();
            for s in cur..next {
                for p in &history.steps[s].changed {
                    if shielded.contains(p) {
                        *changes.entry(*p).or_default() += 1;
                    }
                }
            }
            if !changes.is_empty() {
                intervals.push(PerturbationInterval { start: cur, end: next, changes });
            }
            cur = next;
        }
    }
    ScanOutcome {
        intervals,
        stabilized_at,
        open_disturbance,
        indeterminate_stability: indeterminate,
    }
}

/// The quantities a containment check is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ContainmentParams {
    /// Containment radius (hops).
    pub c: usize,
    /// Byzantine budget.
    pub f: usize,
    /// Maximum number of c-perturbations.
    pub t: u64,
    /// Maximum S-variable changes per c-correct process after stabilization.
    pub k: u64,
}

impl ContainmentParams {
    /// The guaranteed bounds for the cyclic re-parenting protocol on this
    /// instance: radius 0, t = n * Delta^d, k = Delta^d, with d the diameter
    /// of the correct subgraph.
    pub fn for_topology(topo: &Topology) -> Self {
        let m = topo.metrics();
        let dpd = m.degree_pow_diameter();
        ContainmentParams {
            c: 0,
            f: topo.byzantine_count(),
            t: topo.process_count() as u64 * dpd,
            k: dpd,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerdictRecord {
    pub name: String,
    pub measured: Option<u64>,
    pub bound: u64,
    pub verdict: Verdict,
    /// True when the bound carries a configured slack constant rather than an
    /// exact guarantee.
    pub heuristic: bool,
}

/// Measured containment quantities of one run plus the bound verdicts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ContainmentReport {
    pub params: ContainmentParams,
    /// Config index of the first c-legitimate and c-stable configuration.
    pub stabilized_at: Option<usize>,
    /// Steps carrying at least one correct-process action before the first
    /// legitimate-and-stable configuration.
    pub stabilization_steps: Option<u64>,
    pub intervals: Vec<PerturbationInterval>,
    /// Post-stabilization change counts per c-correct process.
    pub post_changes: BTreeMap<ProcessId, u64>,
    pub open_disturbance: bool,
    pub verdicts: Vec<VerdictRecord>,
}

/// Slack constant for the stabilization-steps check; the guarantee is
/// asymptotic, so this bound is heuristic and flagged as such.
pub const DEFAULT_SLACK: u64 = 4;

pub fn containment_report(
    history: &RunHistory,
    topo: &Topology,
    protocol: &dyn Protocol,
    params: ContainmentParams,
    slack: u64,
    stability_budget: usize,
) -> ContainmentReport {
    let scan = perturbation_scan(history, topo, protocol, params.c, stability_budget);
    let shielded = topo.c_correct_set(params.c);

    let stabilization_steps = scan.stabilized_at.map(|at| {
        (0..at).filter(|&s| !history.steps[s].selected.is_empty()).count() as u64
    });
    let mut post_changes: BTreeMap<ProcessId, u64> =
        shielded.iter().map(|&v| (v, 0)).collect();
    if let Some(at) = scan.stabilized_at {
        for s in at..history.steps.len() {
            for p in &history.steps[s].changed {
                if let Some(count) = post_changes.get_mut(p) {
                    *count += 1;
                }
            }
        }
    }

    let metrics = topo.metrics();
    let l_bound = slack
        * (topo.process_count() - topo.byzantine_count()) as u64
        * metrics.degree_pow_diameter();

    let judge = |measured: Option<u64>, bound: u64| match measured {
        _ if scan.indeterminate_stability => Verdict::Indeterminate,
        None => Verdict::Indeterminate,
        Some(m) if m <= bound => Verdict::Pass,
        Some(_) => Verdict::Fail,
    };

    let perturbations = scan.stabilized_at.map(|_| scan.intervals.len() as u64);
    let max_changes = scan
        .stabilized_at
        .map(|_| post_changes.values().copied().max().unwrap_or(0));
    let verdicts = vec![
        VerdictRecord {
            name: "perturbations".into(),
            measured: perturbations,
            bound: params.t,
            verdict: judge(perturbations, params.t),
            heuristic: false,
        },
        VerdictRecord {
            name: "max_changes_per_c_correct".into(),
            measured: max_changes,
            bound: params.k,
            verdict: judge(max_changes, params.k),
            heuristic: false,
        },
        VerdictRecord {
            name: "stabilization_steps".into(),
            measured: stabilization_steps,
            bound: l_bound,
            verdict: judge(stabilization_steps, l_bound),
            heuristic: true,
        },
    ];

    ContainmentReport {
        params,
        stabilized_at: scan.stabilized_at,
        stabilization_steps,
        intervals: scan.intervals,
        post_changes,
        open_disturbance: scan.open_disturbance,
        verdicts,
    }
}

impl ContainmentReport {
    pub fn overall(&self) -> Verdict {
        if self.verdicts.iter().any(|v| v.verdict == Verdict::Fail) {
            Verdict::Fail
        } else if self.verdicts.iter().any(|v| v.verdict == Verdict::Indeterminate) {
            Verdict::Indeterminate
        } else {
            Verdict::Pass
        }
    }

    /// One record per verdict: name, measured value, bound, verdict.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,measured,bound,verdict\n");
        for v in &self.verdicts {
            let name = if v.heuristic {
                format!("{}_heuristic", v.name)
            } else {
                v.name.clone()
            };
            let measured = v.measured.map_or(String::new(), |m| m.to_string());
            out.push_str(&format!("{name},{measured},{},{}\n", v.bound, v.verdict));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
