//! Seeded simulation runs: one scheduler, one adversary, one trace.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::scheduling::{Adversary, ScheduleError, Scheduler};
use crate::state_model::{
    activable_set, apply_step, ByzantineWrite, Configuration, Height, ProcessState, Protocol,
    StepError,
};
use crate::topology::{ProcessId, Topology};

/// One recorded composite step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepRecord {
    pub selected: Vec<ProcessId>,
    pub writes: Vec<ByzantineWrite>,
    /// Processes whose S-variables differ from the previous configuration.
    pub changed: Vec<ProcessId>,
}

/// A fully materialized run: `configs[0]` is the initial configuration and
/// `configs[i + 1]` is the configuration after `steps[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunHistory {
    pub configs: Vec<Configuration>,
    pub steps: Vec<StepRecord>,
}

impl RunHistory {
    pub fn initial(&self) -> &Configuration {
        &self.configs[0]
    }

    pub fn final_config(&self) -> &Configuration {
        self.configs.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Step(#[from] StepError),
}

/// Idle-call allowance for adversaries that are alive but quiet; prevents
/// spinning on a strategy that never writes again without reporting so.
const MAX_IDLE_CALLS: usize = 1_000;

/// Run until quiescence (nothing activable and the adversary exhausted) or
/// until `max_steps` recorded steps.
pub fn run(
    topo: &Topology,
    protocol: &dyn Protocol,
    scheduler: &mut Scheduler,
    adversary: &mut Adversary,
    initial: Configuration,
    max_steps: usize,
) -> Result<RunHistory, SimError> {
    let mut history = RunHistory { configs: vec![initial], steps: Vec::new() };
    let mut idle_calls = 0;
    while history.steps.len() < max_steps {
        let config = history.configs.last().unwrap().clone();
        let writes = adversary.act(&config, topo);
        let activable = activable_set(protocol, &config, topo);
        if activable.is_empty() && writes.is_empty() {
            if adversary.exhausted(&config, topo) {
                break;
            }
            idle_calls += 1;
            if idle_calls > MAX_IDLE_CALLS {
                break;
            }
            continue;
        }
        idle_calls = 0;
        let selected = if activable.is_empty() {
            scheduler.note_write_only_step(&activable);
            Vec::new()
        } else {
            scheduler.select(&activable)?
        };
        let next = apply_step(&config, topo, protocol, &selected, &writes)?;
        let changed = config.diff(&next);
        history.steps.push(StepRecord { selected, writes, changed });
        history.configs.push(next);
    }
    Ok(history)
}

/// Arbitrary initial configuration: parents uniform over NIL and the real
/// channels, heights uniform up to the cap.
pub fn random_configuration(topo: &Topology, height_cap: Height, seed: u64) -> Configuration {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states = topo
        .processes()
        .map(|v| {
            let parent = match rng.gen_range(0..=topo.degree(v)) {
                0 => None,
                k => Some(k - 1),
            };
            ProcessState::new(parent, rng.gen_range(0..=height_cap))
        })
        .collect();
    Configuration::new(states)
}

/// A legitimate, stable starting point: a breadth-first spanning tree of the
/// correct subgraph rooted at `r`, with Byzantine processes posing as roots.
pub fn spanning_configuration(topo: &Topology) -> Configuration {
    let n = topo.process_count();
    let mut states = vec![ProcessState::ROOT_REST; n];
    let mut dist = vec![None; n];
    dist[topo.root()] = Some(0u64);
    let mut queue = std::collections::VecDeque::from([topo.root()]);
    while let Some(v) = queue.pop_front() {
        for &u in topo.neighbors(v) {
            if topo.is_correct(u) && dist[u].is_none() {
                dist[u] = Some(dist[v].unwrap() + 1);
                let channel = topo.channel_to(u, v).unwrap();
                states[u] = ProcessState::new(Some(channel), dist[u].unwrap());
                queue.push_back(u);
            }
        }
    }
    Configuration::new(states)
}
