//! Threaded Block Two-Pass.
//!
//! Blocks are grouped into segments of `segment_len` consecutive blocks and
//! dealt block-cyclically to `workers` threads. Within a segment every worker
//! runs Pass I on its blocks and publishes `v_t` into a write-once slot; after
//! one barrier it runs Pass II reading only `v_{t-1}`. The arithmetic per block
//! is the serial kernel, so the output is bitwise equal to the serial solver.

use std::sync::{Barrier, Mutex, OnceLock};
use std::thread;

use serde::Serialize;

use crate::error::{Result, SwrError};
use crate::hierarchical::{last_row, BlockPartition};
use crate::recurrence::{check_lengths, CoefficientSequence, InputSequence, StateSequence};
use crate::window::{b2p_local, b2p_update};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PipelinePlan {
    part: BlockPartition,
    workers: usize,
    segment_len: usize,
}

impl PipelinePlan {
    pub fn new(part: BlockPartition, workers: usize, segment_len: usize) -> Result<Self> {
        if workers == 0 || segment_len == 0 {
            return Err(SwrError::Domain("workers and segment length must be at least 1".into()));
        }
        Ok(Self {
            part,
            workers,
            segment_len,
        })
    }

    /// One segment covering every block.
    pub fn single_segment(part: BlockPartition, workers: usize) -> Result<Self> {
        Self::new(part, workers, part.blocks())
    }

    pub fn partition(&self) -> BlockPartition {
        self.part
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn segment_len(&self) -> usize {
        self.segment_len
    }

    pub fn segments(&self) -> usize {
        self.part.blocks().div_ceil(self.segment_len)
    }

    pub fn segment_of(&self, t: usize) -> usize {
        t / self.segment_len
    }

    /// Blocks owned by `worker` in `segment`.
    pub fn assignment(&self, worker: usize, segment: usize) -> impl Iterator<Item = usize> {
        let start = segment * self.segment_len;
        let end = (start + self.segment_len).min(self.part.blocks());
        (start + worker..end).step_by(self.workers)
    }
}

/// A carrier handoff between neighboring blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Message {
    pub sender: usize,
    pub receiver: usize,
    /// Values transferred (one per channel).
    pub payload: usize,
    /// Barrier after which the message is readable.
    pub barrier: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PipelineTrace {
    pub messages: Vec<Message>,
    pub barriers: usize,
    pub segments: usize,
}

impl PipelineTrace {
    /// Checks the locality and synchronization contract.
    pub fn validate(&self) -> Result<()> {
        if let Some(m) = self.messages.iter().find(|m| m.receiver != m.sender + 1) {
            return Err(SwrError::Domain(format!(
                "block {} sent to non-neighbor {}",
                m.sender, m.receiver
            )));
        }
        if self.barriers != self.segments {
            return Err(SwrError::Domain(format!(
                "{} barriers for {} segments",
                self.barriers, self.segments
            )));
        }
        Ok(())
    }
}

/// The communication schedule implied by `plan` for `d` channels.
pub fn pipeline_trace(plan: &PipelinePlan, d: usize) -> PipelineTrace {
    let b = plan.part.blocks();
    PipelineTrace {
        messages: (1..b)
            .map(|t| Message {
                sender: t - 1,
                receiver: t,
                payload: d,
                barrier: plan.segment_of(t - 1),
            })
            .collect(),
        barriers: plan.segments(),
        segments: plan.segments(),
    }
}

pub fn pipeline_b2p(a: &CoefficientSequence, u: &InputSequence, plan: &PipelinePlan) -> Result<StateSequence> {
    pipeline_b2p_traced(a, u, plan).map(|(x, _)| x)
}

/// Runs the pipeline and records every carrier read and barrier actually executed.
pub fn pipeline_b2p_traced(
    a: &CoefficientSequence,
    u: &InputSequence,
    plan: &PipelinePlan,
) -> Result<(StateSequence, PipelineTrace)> {
    check_lengths(a, u)?;
    let part = plan.part;
    if u.n() != part.n() {
        return Err(SwrError::Divisibility {
            n: u.n(),
            block: part.block_size(),
        });
    }
    let d = u.d();
    let b = part.blocks();
    let folded = u.folded(a)?;
    let coeffs = a.as_slice();

    let carriers: Vec<OnceLock<Vec<f64>>> = (0..b).map(|_| OnceLock::new()).collect();
    let outputs: Vec<OnceLock<Vec<f64>>> = (0..b).map(|_| OnceLock::new()).collect();
    let workers = plan.workers;
    let barrier = Barrier::new(workers);
    let log: Mutex<Vec<Message>> = Mutex::new(Vec::new());
    let barriers_passed: Mutex<usize> = Mutex::new(0);
    let failure: OnceLock<SwrError> = OnceLock::new();

    thread::scope(|scope| {
        for worker in 0..workers {
            let (carriers, outputs, barrier, log, barriers_passed, failure, folded) =
                (&carriers, &outputs, &barrier, &log, &barriers_passed, &failure, &folded);
            scope.spawn(move || {
                for segment in 0..plan.segments() {
                    let mut local = Vec::new();
                    for t in plan.assignment(worker, segment) {
                        let r = part.range(t);
                        match b2p_local(&coeffs[r.clone()], &folded[r.start * d..r.end * d], d) {
                            Ok((blk, w)) => {
                                carriers[t]
                                    .set(last_row(&w, d).to_vec())
                                    .expect("carrier slot written twice");
                                local.push((t, blk, w));
                            }
                            Err(e) => {
                                let _ = failure.set(e);
                            }
                        }
                    }
                    if barrier.wait().is_leader() {
                        *barriers_passed.lock().unwrap() += 1;
                    }
                    for (t, blk, mut w) in local {
                        if t > 0 {
                            let Some(prev) = carriers[t - 1].get() else {
                                // Pass I of the neighbor failed; the error is reported after the scope.
                                continue;
                            };
                            b2p_update(&blk, &mut w, prev);
                            log.lock().unwrap().push(Message {
                                sender: t - 1,
                                receiver: t,
                                payload: prev.len(),
                                barrier: plan.segment_of(t - 1),
                            });
                        }
                        outputs[t].set(w).expect("output slot written twice");
                    }
                }
            });
        }
    });

    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let mut x = Vec::with_capacity(part.n() * d);
    for slot in outputs {
        x.extend_from_slice(&slot.into_inner().expect("every block is assigned"));
    }
    let mut messages = log.into_inner().unwrap();
    messages.sort();
    let trace = PipelineTrace {
        messages,
        barriers: barriers_passed.into_inner().unwrap(),
        segments: plan.segments(),
    };
    Ok((StateSequence::new(x, d)?, trace))
}
