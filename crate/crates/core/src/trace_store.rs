//! Canonical execution traces: recording, a line-oriented file format, and
//! digest-verified replay.
//!
//! Every step carries a digest of the resulting configuration; full snapshots
//! appear every `snapshot_interval` configurations, at caller-supplied
//! boundary indices (analysis interval endpoints), and at the final
//! configuration. Replay re-executes each step and checks every digest,
//! change set, and snapshot, so a trace file is self-verifying against its
//! topology and protocol.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::sim::{RunHistory, StepRecord};
use crate::state_model::{
    apply_step, ByzantineWrite, Configuration, Height, ProcessState, Protocol, StepError,
};
use crate::topology::{ProcessId, Topology};

/// Stable 64-bit hash (hex) of the canonical configuration serialization.
pub fn config_digest(config: &Configuration) -> String {
    short_sha(config.format().as_bytes())
}

/// Stable 64-bit hash (hex) of the canonical topology serialization.
pub fn topology_digest(topo: &Topology) -> String {
    short_sha(topo.format().as_bytes())
}

fn short_sha(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceHeader {
    pub topology_digest: String,
    pub protocol: String,
    /// Scheduler parameters, informational.
    pub policy: String,
    /// Adversary parameters, informational.
    pub adversary: String,
    pub height_cap: Height,
    pub snapshot_interval: usize,
}

impl TraceHeader {
    pub fn new(
        topo: &Topology,
        protocol: &dyn Protocol,
        policy: impl Into<String>,
        adversary: impl Into<String>,
        height_cap: Height,
    ) -> Self {
        TraceHeader {
            topology_digest: topology_digest(topo),
            protocol: protocol.name().to_string(),
            policy: policy.into(),
            adversary: adversary.into(),
            height_cap,
            snapshot_interval: DEFAULT_SNAPSHOT_INTERVAL,
        }
    }
}

pub const DEFAULT_SNAPSHOT_INTERVAL: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceStep {
    pub selected: Vec<ProcessId>,
    pub writes: Vec<ByzantineWrite>,
    pub changed: Vec<ProcessId>,
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionTrace {
    pub header: TraceHeader,
    pub initial: Configuration,
    pub steps: Vec<TraceStep>,
    /// Full configurations keyed by configuration index (index 0 is
    /// `initial` and is not repeated here).
    pub snapshots: BTreeMap<usize, Configuration>,
    pub final_digest: String,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("header mismatch: {0}")]
    HeaderMismatch(String),
    #[error("step {step}: {source}")]
    Step { step: usize, source: StepError },
    #[error("step {step}: recorded change set does not match the replayed diff")]
    ChangedMismatch { step: usize },
    #[error("step {step}: digest mismatch")]
    DigestMismatch { step: usize },
    #[error("snapshot at configuration {index} does not match the replayed configuration")]
    SnapshotMismatch { index: usize },
}

/// Record a completed run. `boundaries` lists extra configuration indices to
/// snapshot (for example perturbation interval endpoints).
pub fn record(header: TraceHeader, history: &RunHistory, boundaries: &[usize]) -> ExecutionTrace {
    let last = history.configs.len() - 1;
    let mut snapshot_at: Vec<usize> = boundaries.to_vec();
    if header.snapshot_interval > 0 {
        snapshot_at.extend((0..=last).filter(|i| i % header.snapshot_interval == 0));
    }
    snapshot_at.push(last);
    let snapshots: BTreeMap<usize, Configuration> = snapshot_at
        .into_iter()
        .filter(|&i| i != 0 && i <= last)
        .map(|i| (i, history.configs[i].clone()))
        .collect();

    let steps = history
        .steps
        .iter()
        .zip(&history.configs[1..])
        .map(|(step, config)| TraceStep {
            selected: step.selected.clone(),
            writes: step.writes.clone(),
            changed: step.changed.clone(),
            digest: config_digest(config),
        })
        .collect();

    ExecutionTrace {
        header,
        initial: history.configs[0].clone(),
        steps,
        snapshots,
        final_digest: config_digest(history.final_config()),
    }
}

#[derive(Debug)]
pub struct ReplayOutcome {
    pub final_config: Configuration,
    pub steps_verified: usize,
}

impl ExecutionTrace {
    /// Re-execute every step and verify digests, change sets, and snapshots.
    pub fn replay(
        &self,
        topo: &Topology,
        protocol: &dyn Protocol,
    ) -> Result<ReplayOutcome, TraceError> {
        Ok(ReplayOutcome {
            steps_verified: self.steps.len(),
            final_config: self.materialize(topo, protocol)?.configs.pop().unwrap(),
        })
    }

    /// Replay with full verification and return every configuration, for
    /// analysis of a stored trace.
    pub fn materialize(
        &self,
        topo: &Topology,
        protocol: &dyn Protocol,
    ) -> Result<RunHistory, TraceError> {
        if self.header.topology_digest != topology_digest(topo) {
            return Err(TraceError::HeaderMismatch(format!(
                "trace was recorded on topology {}, got {}",
                self.header.topology_digest,
                topology_digest(topo)
            )));
        }
        if self.header.protocol != protocol.name() {
            return Err(TraceError::HeaderMismatch(format!(
                "trace was recorded with protocol {}, got {}",
                self.header.protocol,
                protocol.name()
            )));
        }
        let mut history =
            RunHistory { configs: vec![self.initial.clone()], steps: Vec::new() };
        for (i, step) in self.steps.iter().enumerate() {
            let config = history.configs.last().unwrap();
            let next = apply_step(config, topo, protocol, &step.selected, &step.writes)
                .map_err(|source| TraceError::Step { step: i, source })?;
            if config.diff(&next) != step.changed {
                return Err(TraceError::ChangedMismatch { step: i });
            }
            if config_digest(&next) != step.digest {
                return Err(TraceError::DigestMismatch { step: i });
            }
            if let Some(snapshot) = self.snapshots.get(&(i + 1)) {
                if *snapshot != next {
                    return Err(TraceError::SnapshotMismatch { index: i + 1 });
                }
            }
            history.steps.push(StepRecord {
                selected: step.selected.clone(),
                writes: step.writes.clone(),
                changed: step.changed.clone(),
            });
            history.configs.push(next);
        }
        if config_digest(history.final_config()) != self.final_digest {
            return Err(TraceError::DigestMismatch { step: self.steps.len() });
        }
        Ok(history)
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        out.push_str("trace-format 1\n");
        out.push_str(&format!("topology-sha {}\n", self.header.topology_digest));
        out.push_str(&format!("protocol {}\n", self.header.protocol));
        out.push_str(&format!("policy {}\n", self.header.policy));
        out.push_str(&format!("adversary {}\n", self.header.adversary));
        out.push_str(&format!("height-cap {}\n", self.header.height_cap));
        out.push_str(&format!("snapshot-interval {}\n", self.header.snapshot_interval));
        out.push_str("config 0\n");
        out.push_str(&self.initial.format());
        out.push_str("end\n");
        for (i, step) in self.steps.iter().enumerate() {
            let selected: Vec<String> = step.selected.iter().map(|v| v.to_string()).collect();
            let writes: Vec<String> = step
                .writes
                .iter()
                .map(|w| {
                    let parent = w.state.parent.map_or("NIL".to_string(), |k| k.to_string());
                    format!("{}:{}:{}", w.process, parent, w.state.height)
                })
                .collect();
            let changed: Vec<String> = step.changed.iter().map(|v| v.to_string()).collect();
            out.push_str(&format!(
                "step {i} selected={} writes={} changed={} digest={}\n",
                selected.join(","),
                writes.join(";"),
                changed.join(","),
                step.digest
            ));
            if let Some(config) = self.snapshots.get(&(i + 1)) {
                out.push_str(&format!("config {}\n", i + 1));
                out.push_str(&config.format());
                out.push_str("end\n");
            }
        }
        out.push_str(&format!(
            "end-trace steps={} final-digest={}\n",
            self.steps.len(),
            self.final_digest
        ));
        out
    }

    pub fn parse(text: &str) -> Result<ExecutionTrace, TraceError> {
        let err = |line: usize, message: &str| TraceError::Parse {
            line,
            message: message.to_string(),
        };
        let mut lines = text.lines().enumerate().peekable();
        let mut field = |prefix: &str| -> Result<String, TraceError> {
            let (i, line) = lines
                .next()
                .ok_or_else(|| err(0, "unexpected end of trace"))?;
            line.strip_prefix(prefix)
                .map(|rest| rest.trim_start().to_string())
                .ok_or_else(|| err(i + 1, &format!("expected '{prefix}'")))
        };
        let version = field("trace-format")?;
        if version != "1" {
            return Err(err(1, "unsupported trace format version"));
        }
        let header = TraceHeader {
            topology_digest: field("topology-sha")?,
            protocol: field("protocol")?,
            policy: field("policy")?,
            adversary: field("adversary")?,
            height_cap: field("height-cap")?
                .parse()
                .map_err(|_| err(6, "bad height cap"))?,
            snapshot_interval: field("snapshot-interval")?
                .parse()
                .map_err(|_| err(7, "bad snapshot interval"))?,
        };

        let read_config = |lines: &mut std::iter::Peekable<
            std::iter::Enumerate<std::str::Lines>,
        >|
         -> Result<Configuration, TraceError> {
            let mut body = String::new();
            loop {
                let (i, line) = lines
                    .next()
                    .ok_or_else(|| err(0, "unterminated config block"))?;
                if line == "end" {
                    break;
                }
                body.push_str(line);
                body.push('\n');
                let _ = i;
            }
            Configuration::parse(&body).map_err(|e| TraceError::Parse {
                line: 0,
                message: e.to_string(),
            })
        };

        let mut initial = None;
        let mut steps: Vec<TraceStep> = Vec::new();
        let mut snapshots = BTreeMap::new();
        let mut final_digest = None;
        while let Some((i, line)) = lines.next() {
            let lineno = i + 1;
            if let Some(rest) = line.strip_prefix("config ") {
                let index: usize = rest
                    .trim()
                    .parse()
                    .map_err(|_| err(lineno, "bad config index"))?;
                let config = read_config(&mut lines)?;
                if index == 0 {
                    initial = Some(config);
                } else {
                    snapshots.insert(index, config);
                }
            } else if let Some(rest) = line.strip_prefix("step ") {
                let mut toks = rest.split_whitespace();
                let index: usize = toks
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| err(lineno, "bad step index"))?;
                if index != steps.len() {
                    return Err(err(lineno, "step indices must be contiguous from 0"));
                }
                let mut selected = None;
                let mut writes = None;
                let mut changed = None;
                let mut digest = None;
                for tok in toks {
                    if let Some(v) = tok.strip_prefix("selected=") {
                        selected = Some(parse_id_list(v).map_err(|m| err(lineno, &m))?);
                    } else if let Some(v) = tok.strip_prefix("writes=") {
                        writes = Some(parse_writes(v).map_err(|m| err(lineno, &m))?);
                    } else if let Some(v) = tok.strip_prefix("changed=") {
                        changed = Some(parse_id_list(v).map_err(|m| err(lineno, &m))?);
                    } else if let Some(v) = tok.strip_prefix("digest=") {
                        digest = Some(v.to_string());
                    } else {
                        return Err(err(lineno, &format!("unknown step field '{tok}'")));
                    }
                }
                let step = TraceStep {
                    selected: selected.ok_or_else(|| err(lineno, "missing selected="))?,
                    writes: writes.ok_or_else(|| err(lineno, "missing writes="))?,
                    changed: changed.ok_or_else(|| err(lineno, "missing changed="))?,
                    digest: digest.ok_or_else(|| err(lineno, "missing digest="))?,
                };
                if step.selected.is_empty() && step.writes.is_empty() {
                    return Err(err(lineno, "step selects no process and has no writes"));
                }
                steps.push(step);
            } else if let Some(rest) = line.strip_prefix("end-trace ") {
                for tok in rest.split_whitespace() {
                    if let Some(v) = tok.strip_prefix("steps=") {
                        let count: usize =
                            v.parse().map_err(|_| err(lineno, "bad step count"))?;
                        if count != steps.len() {
                            return Err(err(lineno, "step count does not match trailer"));
                        }
                    } else if let Some(v) = tok.strip_prefix("final-digest=") {
                        final_digest = Some(v.to_string());
                    }
                }
            } else if !line.trim().is_empty() {
                return Err(err(lineno, "unrecognized line"));
            }
        }

        Ok(ExecutionTrace {
            header,
            initial: initial.ok_or_else(|| err(0, "missing initial configuration"))?,
            steps,
            snapshots,
            final_digest: final_digest.ok_or_else(|| err(0, "missing trailer"))?,
        })
    }
}

fn parse_id_list(text: &str) -> Result<Vec<ProcessId>, String> {
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|t| t.parse().map_err(|_| format!("bad process id '{t}'")))
        .collect()
}

fn parse_writes(text: &str) -> Result<Vec<ByzantineWrite>, String> {
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(';')
        .map(|tok| {
            let mut parts = tok.split(':');
            let process = parts
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| format!("bad write '{tok}'"))?;
            let parent = match parts.next().ok_or_else(|| format!("bad write '{tok}'"))? {
                "NIL" => None,
                k => Some(k.parse().map_err(|_| format!("bad write '{tok}'"))?),
            };
            let height = parts
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| format!("bad write '{tok}'"))?;
            Ok(ByzantineWrite { process, state: ProcessState::new(parent, height) })
        })
        .collect()
}
