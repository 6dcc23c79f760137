//! Who moves and what Byzantines write.
//!
//! Weak fairness ("no process stays activable forever without being chosen")
//! is operationalized by a bound `B`: a process continuously activable for
//! `B` consecutive steps must have been selected in one of them. Every
//! B-bounded execution prefix extends to a weakly fair execution, so finite
//! runs and the explorer's bounded enumeration both witness fairness through
//! the same mechanism.
//!
//! In simulation runs a fair selection happens on every step where some
//! correct process is activable; steps carrying only Byzantine writes occur
//! when no correct process can move. The explorer additionally enumerates
//! write-only steps interleaved under the same age bookkeeping, which caps
//! them at `B-1` in a row while anything is activable.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::state_model::{ByzantineWrite, Configuration, Height, ProcessState};
use crate::topology::{ProcessId, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DaemonMode {
    /// Exactly one process per step.
    Central,
    /// Any nonempty subset per step.
    Distributed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    /// Cycle through process ids.
    RoundRobin,
    /// Seeded random choice, fairness-forced within the bound.
    RandomFair,
    /// Delay every process as long as the bound allows.
    AdversarialBounded,
}

#[derive(Debug, Clone, Copy)]
pub struct SchedulerPolicy {
    pub kind: PolicyKind,
    pub daemon: DaemonMode,
    /// A continuously activable process is selected within this many steps.
    pub fairness_bound: u32,
    pub seed: u64,
}

impl SchedulerPolicy {
    pub fn new(kind: PolicyKind, daemon: DaemonMode, fairness_bound: u32, seed: u64) -> Self {
        assert!(fairness_bound >= 1, "fairness bound must be positive");
        SchedulerPolicy { kind, daemon, fairness_bound, seed }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("select called with no activable process; detect quiescence instead")]
    NothingActivable,
}

/// Per-run selection state: ages count how many consecutive steps each
/// process has been activable without being selected.
#[derive(Debug, Clone)]
pub struct Scheduler {
    policy: SchedulerPolicy,
    rng: ChaCha8Rng,
    ages: Vec<u32>,
    last_picked: Option<ProcessId>,
    /// Steps on which some process exceeded the fairness bound because the
    /// central daemon could not select every forced process at once.
    fairness_overruns: usize,
}

impl Scheduler {
    pub fn new(policy: SchedulerPolicy, process_count: usize) -> Self {
        Scheduler {
            policy,
            rng: ChaCha8Rng::seed_from_u64(policy.seed),
            ages: vec![0; process_count],
            last_picked: None,
            fairness_overruns: 0,
        }
    }

    pub fn policy(&self) -> &SchedulerPolicy {
        &self.policy
    }

    pub fn fairness_overruns(&self) -> usize {
        self.fairness_overruns
    }

    /// Current age of a process (consecutive activable-but-unselected steps).
    pub fn age(&self, v: ProcessId) -> u32 {
        self.ages[v]
    }

    /// Pick a nonempty subset of `activable` respecting the daemon mode and
    /// the fairness bound, then advance the age bookkeeping.
    pub fn select(&mut self, activable: &[ProcessId]) -> Result<Vec<ProcessId>, ScheduleError> {
        if activable.is_empty() {
            return Err(ScheduleError::NothingActivable);
        }
        let bound = self.policy.fairness_bound;
        let oldest = |candidates: &[ProcessId]| -> ProcessId {
            candidates
                .iter()
                .copied()
                .max_by_key(|&v| (self.ages[v], v))
                .unwrap()
        };
        let youngest = |candidates: &[ProcessId]| -> ProcessId {
            candidates
                .iter()
                .copied()
                .min_by_key(|&v| (self.ages[v], std::cmp::Reverse(v)))
                .unwrap()
        };
        // A single pick per step can honor the bound only by switching to
        // oldest-first before deadlines collide: once the oldest age is
        // within |activable| steps of the bound, serve by age. This keeps
        // every age below the bound whenever |activable| <= B.
        let tight = activable
            .iter()
            .any(|&v| self.ages[v] as usize + activable.len() >= bound as usize);

        let selected: Vec<ProcessId> = match self.policy.daemon {
            DaemonMode::Central if tight => vec![oldest(activable)],
            DaemonMode::Central => match self.policy.kind {
                PolicyKind::RoundRobin => {
                    let start = self.last_picked.map_or(0, |p| p + 1);
                    let pick = activable
                        .iter()
                        .copied()
                        .find(|&v| v >= start)
                        .unwrap_or(activable[0]);
                    vec![pick]
                }
                PolicyKind::RandomFair => {
                    vec![activable[self.rng.gen_range(0..activable.len())]]
                }
                PolicyKind::AdversarialBounded => vec![youngest(activable)],
            },
            DaemonMode::Distributed => {
                let forced: Vec<ProcessId> = activable
                    .iter()
                    .copied()
                    .filter(|&v| self.ages[v] + 1 >= bound)
                    .collect();
                match self.policy.kind {
                    PolicyKind::RoundRobin => {
                        if let Some(&f) = forced.first() {
                            vec![f]
                        } else {
                            let start = self.last_picked.map_or(0, |p| p + 1);
                            let pick = activable
                                .iter()
                                .copied()
                                .find(|&v| v >= start)
                                .unwrap_or(activable[0]);
                            vec![pick]
                        }
                    }
                    PolicyKind::RandomFair => {
                        let mut sel: Vec<ProcessId> = activable
                            .iter()
                            .copied()
                            .filter(|v| forced.contains(v) || self.rng.gen_bool(0.5))
                            .collect();
                        if sel.is_empty() {
                            sel.push(activable[self.rng.gen_range(0..activable.len())]);
                        }
                        sel
                    }
                    PolicyKind::AdversarialBounded => {
                        if forced.is_empty() {
                            vec![youngest(activable)]
                        } else {
                            forced
                        }
                    }
                }
            }
        };

        self.note_step(activable, &selected);
        Ok(selected)
    }

    /// Advance ages for a step that carried only Byzantine writes.
    pub fn note_write_only_step(&mut self, activable: &[ProcessId]) {
        self.note_step(activable, &[]);
    }

    fn note_step(&mut self, activable: &[ProcessId], selected: &[ProcessId]) {
        for v in 0..self.ages.len() {
            if activable.contains(&v) && !selected.contains(&v) {
                self.ages[v] += 1;
                if self.ages[v] >= self.policy.fairness_bound {
                    self.fairness_overruns += 1;
                }
            } else {
                self.ages[v] = 0;
            }
        }
        if selected.len() == 1 {
            self.last_picked = Some(selected[0]);
        }
    }
}

/// What the Byzantine processes do.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AdversaryStrategy {
    /// Never writes.
    Silent,
    /// Each Byzantine rewrites itself to a random capped state on a coin
    /// flip, every step.
    RandomWrites,
    /// Alternate every Byzantine between an attractive state `(NIL, low)`
    /// and a repulsive state `(channel 0, high)` every `period` writes.
    Oscillator { period: usize, low: Height, high: Height },
    /// Pin every Byzantine to `(NIL, 0)`, the real root's rest state.
    RootImpersonator,
    /// Scripted writes, one batch per step.
    Replay(Vec<Vec<ByzantineWrite>>),
}

impl AdversaryStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            AdversaryStrategy::Silent => "silent",
            AdversaryStrategy::RandomWrites => "random",
            AdversaryStrategy::Oscillator { .. } => "oscillator",
            AdversaryStrategy::RootImpersonator => "root-impersonator",
            AdversaryStrategy::Replay(_) => "replay",
        }
    }
}

/// Per-run adversary state.
#[derive(Debug, Clone)]
pub struct Adversary {
    strategy: AdversaryStrategy,
    height_cap: Height,
    rng: ChaCha8Rng,
    calls: usize,
}

impl Adversary {
    pub fn new(strategy: AdversaryStrategy, height_cap: Height, seed: u64) -> Self {
        Adversary {
            strategy,
            height_cap,
            rng: ChaCha8Rng::seed_from_u64(seed),
            calls: 0,
        }
    }

    pub fn strategy(&self) -> &AdversaryStrategy {
        &self.strategy
    }

    pub fn height_cap(&self) -> Height {
        self.height_cap
    }

    /// The writes for the next step. Guaranteed to target only Byzantine
    /// processes, with capped heights and in-range parent channels.
    pub fn act(&mut self, config: &Configuration, topo: &Topology) -> Vec<ByzantineWrite> {
        let step = self.calls;
        self.calls += 1;
        let cap = self.height_cap;
        let writes: Vec<ByzantineWrite> = match &self.strategy {
            AdversaryStrategy::Silent => Vec::new(),
            AdversaryStrategy::RandomWrites => {
                let mut out = Vec::new();
                for &b in topo.byzantine_set() {
                    if self.rng.gen_bool(0.5) {
                        let degree = topo.degree(b);
                        let parent = match self.rng.gen_range(0..=degree) {
                            0 => None,
                            k => Some(k - 1),
                        };
                        out.push(ByzantineWrite {
                            process: b,
                            state: ProcessState::new(parent, self.rng.gen_range(0..=cap)),
                        });
                    }
                }
                out
            }
            AdversaryStrategy::Oscillator { period, low, high } => {
                if step % period != 0 {
                    Vec::new()
                } else {
                    let attract = (step / period) % 2 == 0;
                    topo.byzantine_set()
                        .iter()
                        .map(|&b| {
                            let state = if attract {
                                ProcessState::new(None, (*low).min(cap))
                            } else {
                                let parent = (topo.degree(b) > 0).then_some(0);
                                ProcessState::new(parent, (*high).min(cap))
                            };
                            ByzantineWrite { process: b, state }
                        })
                        .collect()
                }
            }
            AdversaryStrategy::RootImpersonator => topo
                .byzantine_set()
                .iter()
                .filter(|&&b| config.state(b) != ProcessState::ROOT_REST)
                .map(|&b| ByzantineWrite { process: b, state: ProcessState::ROOT_REST })
                .collect(),
            AdversaryStrategy::Replay(script) => {
                script.get(step).cloned().unwrap_or_default()
            }
        };
        for w in &writes {
            assert!(
                topo.is_byzantine(w.process),
                "adversary write names correct process {}",
                w.process
            );
            assert!(w.state.height <= cap, "adversary write exceeds height cap");
        }
        writes
    }

    /// True when no future call can produce a write, so a quiescent run may
    /// stop.
    pub fn exhausted(&self, config: &Configuration, topo: &Topology) -> bool {
        match &self.strategy {
            AdversaryStrategy::Silent => true,
            AdversaryStrategy::RandomWrites | AdversaryStrategy::Oscillator { .. } => {
                topo.byzantine_count() == 0
            }
            AdversaryStrategy::RootImpersonator => topo
                .byzantine_set()
                .iter()
                .all(|&b| config.state(b) == ProcessState::ROOT_REST),
            AdversaryStrategy::Replay(script) => self.calls >= script.len(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::Topology;

    fn policy(kind: PolicyKind, daemon: DaemonMode, b: u32) -> SchedulerPolicy {
        SchedulerPolicy::new(kind, daemon, b, 7)
    }

    #[test]
    fn round_robin_cycles() {
        let mut s = Scheduler::new(policy(PolicyKind::RoundRobin, DaemonMode::Central, 10), 4);
        assert_eq!(s.select(&[1]).unwrap(), vec![1]);
        assert_eq!(s.select(&[1, 3]).unwrap(), vec![3]);
        assert_eq!(s.select(&[1, 3]).unwrap(), vec![1]);
    }

    #[test]
    fn adversarial_respects_fairness_bound() {
        let mut s = Scheduler::new(
            policy(PolicyKind::AdversarialBounded, DaemonMode::Central, 4),
            2,
        );
        // Both always activable; the youngest-first rule starves process 0
        // as long as the bound allows, then the oldest-first takeover kicks
        // in before anyone reaches the bound.
        assert_eq!(s.select(&[0, 1]).unwrap(), vec![1]);
        assert_eq!(s.select(&[0, 1]).unwrap(), vec![1]);
        assert_eq!(s.select(&[0, 1]).unwrap(), vec![0]);
        assert_eq!(s.fairness_overruns(), 0);
        for _ in 0..50 {
            s.select(&[0, 1]).unwrap();
        }
        assert_eq!(s.fairness_overruns(), 0);
    }

    #[test]
    fn bounded_fairness_holds_over_long_runs() {
        for kind in [PolicyKind::RoundRobin, PolicyKind::RandomFair, PolicyKind::AdversarialBounded] {
            for daemon in [DaemonMode::Central, DaemonMode::Distributed] {
                let b = 4;
                let mut s = Scheduler::new(policy(kind, daemon, b), 3);
                for _ in 0..500 {
                    let sel = s.select(&[0, 1, 2]).unwrap();
                    assert!(!sel.is_empty());
                    if daemon == DaemonMode::Central {
                        assert_eq!(sel.len(), 1);
                    }
                }
                assert_eq!(s.fairness_overruns(), 0, "{kind:?} {daemon:?}");
                for v in 0..3 {
                    assert!(s.age(v) < b);
                }
            }
        }
    }

    #[test]
    fn age_resets_when_activability_lapses() {
        let mut s = Scheduler::new(
            policy(PolicyKind::AdversarialBounded, DaemonMode::Central, 5),
            3,
        );
        s.select(&[0, 1]).unwrap();
        assert_eq!(s.age(0), 1);
        // 0 drops out of the activable set: its continuity is broken.
        s.select(&[1]).unwrap();
        assert_eq!(s.age(0), 0);
    }

    #[test]
    fn random_fair_is_deterministic_per_seed() {
        let run = || {
            let mut s =
                Scheduler::new(policy(PolicyKind::RandomFair, DaemonMode::Distributed, 3), 5);
            (0..50)
                .map(|_| s.select(&[0, 1, 2, 3, 4]).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn select_requires_an_activable_process() {
        let mut s = Scheduler::new(policy(PolicyKind::RoundRobin, DaemonMode::Central, 3), 2);
        assert_eq!(s.select(&[]), Err(ScheduleError::NothingActivable));
    }

    fn line3_byz() -> Topology {
        Topology::new(vec![vec![1], vec![0, 2], vec![1]], 0, [2])
    }

    #[test]
    fn silent_never_writes() {
        let topo = line3_byz();
        let mut adv = Adversary::new(AdversaryStrategy::Silent, 6, 1);
        for _ in 0..10 {
            assert!(adv.act(&Configuration::zeroed(3), &topo).is_empty());
        }
        assert!(adv.exhausted(&Configuration::zeroed(3), &topo));
    }

    #[test]
    fn root_impersonator_pins_then_rests() {
        let topo = line3_byz();
        let mut config = Configuration::zeroed(3);
        config.set_state(2, ProcessState::new(Some(0), 5));
        let mut adv = Adversary::new(AdversaryStrategy::RootImpersonator, 6, 1);
        let writes = adv.act(&config, &topo);
        assert_eq!(
            writes,
            vec![ByzantineWrite { process: 2, state: ProcessState::ROOT_REST }]
        );
        config.set_state(2, ProcessState::ROOT_REST);
        assert!(adv.act(&config, &topo).is_empty());
        assert!(adv.exhausted(&config, &topo));
    }

    #[test]
    fn oscillator_alternates_every_step_at_period_one() {
        let topo = line3_byz();
        let config = Configuration::zeroed(3);
        let mut adv = Adversary::new(
            AdversaryStrategy::Oscillator { period: 1, low: 0, high: 100 },
            100,
            1,
        );
        let w0 = adv.act(&config, &topo);
        let w1 = adv.act(&config, &topo);
        let w2 = adv.act(&config, &topo);
        assert_eq!(w0[0].state, ProcessState::new(None, 0));
        assert_eq!(w1[0].state, ProcessState::new(Some(0), 100));
        assert_eq!(w2, w0);
    }

    #[test]
    fn oscillator_respects_period_and_cap() {
        let topo = line3_byz();
        let config = Configuration::zeroed(3);
        let mut adv = Adversary::new(
            AdversaryStrategy::Oscillator { period: 2, low: 0, high: 100 },
            6,
            1,
        );
        let batches: Vec<_> = (0..6).map(|_| adv.act(&config, &topo)).collect();
        assert!(!batches[0].is_empty());
        assert!(batches[1].is_empty());
        assert!(!batches[2].is_empty());
        assert_eq!(batches[2][0].state.height, 6); // clamped to the cap
    }

    #[test]
    fn random_writes_target_only_byzantines() {
        let topo = line3_byz();
        let mut adv = Adversary::new(AdversaryStrategy::RandomWrites, 6, 99);
        for _ in 0..100 {
            for w in adv.act(&Configuration::zeroed(3), &topo) {
                assert!(topo.is_byzantine(w.process));
                assert!(w.state.height <= 6);
            }
        }
    }
}
