//! The transfinite execution engine.
//!
//! Successor stages are ordinary [`step`]s. Limit stages cannot be reached
//! by stepping, so they are proven: when a configuration inside the current
//! block repeats exactly, determinism makes the block's tail cycle forever,
//! which pins down the limsup at the next `w`-limit. [`take_limit`] builds
//! that snapshot (limit state, head 0, cellwise max over one period) and a
//! new block starts there. Completed blocks become [`LimitRecord`]s; an
//! exact repetition among records proves the record sequence cycles, which
//! reaches the next `w^2`-limit, and so on up a tower of levels bounded by
//! [`RunConfig::max_tower`].
//!
//! A repetition alone never means divergence: the limit snapshot usually
//! differs from the repeated configuration (an oscillating cell reads 1 at
//! the limit), and the machine may do something new there. Divergence is
//! declared only for a self-regenerating block: the entry snapshot equals
//! both the limit of the block's period and the limit of the entire block.
//! The first equality repeats the block at the next limit; the second keeps
//! every higher limit (where the block's transient writes also recur
//! cofinally) at the same snapshot. Together they freeze the run at all
//! later stages, so the verdict is sound at every level at once.

use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::machine::{step, Program, Snapshot, StepResult};
use crate::ordinal::Ordinal;
use crate::tape::{block_limsup, BitGenerator, Tape};

/// Exploration bounds for one run. A run that outgrows any of them ends in
/// [`RunOutcome::HorizonExceeded`]; enlarging bounds never changes a verdict
/// already reached, it only resolves horizons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RunConfig {
    /// Snapshots retained within one block: the entry plus the successor
    /// steps explored before giving up on finding a repetition.
    pub max_steps_per_block: usize,
    /// Highest limit level `K`; reachable stages stay below `w^(K+1)`.
    pub max_tower: u32,
    /// Completed records retained per level before the run is cut off.
    pub max_history: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { max_steps_per_block: 4096, max_tower: 4, max_history: 512 }
    }
}

/// One proven limit: the snapshot a segment of the run started from and the
/// full evolution of that segment, down to raw snapshots.
///
/// Invariants kept by the engine: `block` is nonempty, its first element is
/// (or begins with) `entry`, and all snapshots share tape bases.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LimitRecord {
    /// 1 for a block of raw snapshots, `k+1` for a block of level-`k`
    /// records.
    pub level: u32,
    pub entry: Snapshot,
    pub block: Block,
}

/// The body of a [`LimitRecord`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Block {
    Steps(Vec<Snapshot>),
    Limits(Vec<LimitRecord>),
}

impl LimitRecord {
    /// The limit snapshot of this record's entire block, recursively:
    /// limit state, head 0, cellwise max over every contained snapshot.
    pub fn block_limit(&self) -> Snapshot {
        let mut snaps = Vec::new();
        collect_snapshots(&self.block, &mut snaps);
        limit_of(&snaps)
    }

    /// The divergence-witness property: the block, run forever, regenerates
    /// its own entry at the limit. Checkable without the engine.
    pub fn entry_regenerates(&self) -> bool {
        self.block_limit() == self.entry
    }
}

fn collect_snapshots<'a>(block: &'a Block, out: &mut Vec<&'a Snapshot>) {
    match block {
        Block::Steps(snaps) => out.extend(snaps.iter()),
        Block::Limits(records) => {
            for r in records {
                collect_snapshots(&r.block, out);
            }
        }
    }
}

fn limit_of(snaps: &[&Snapshot]) -> Snapshot {
    assert!(!snaps.is_empty(), "limit of an empty block");
    let per_tape = |pick: fn(&Snapshot) -> &Tape| {
        let tapes: Vec<Tape> = snaps.iter().map(|s| pick(s).clone()).collect();
        block_limsup(&tapes)
    };
    Snapshot {
        state: Program::LIMIT,
        head: 0,
        input: per_tape(|s| &s.input),
        work: per_tape(|s| &s.work),
        output: per_tape(|s| &s.output),
    }
}

/// The snapshot at the `w`-limit of `block` repeated forever: limit state,
/// head back on cell 0, each cell the limsup (cellwise max) over one period.
pub fn take_limit(block: &[Snapshot]) -> Snapshot {
    let refs: Vec<&Snapshot> = block.iter().collect();
    limit_of(&refs)
}

fn common_output(block: &Block) -> Option<Tape> {
    fn all_match(block: &Block, expect: &Tape) -> bool {
        match block {
            Block::Steps(snaps) => snaps.iter().all(|s| s.output == *expect),
            Block::Limits(records) => records.iter().all(|r| all_match(&r.block, expect)),
        }
    }
    let mut snaps = Vec::new();
    collect_snapshots(block, &mut snaps);
    let first = snaps.first()?.output.clone();
    all_match(block, &first).then_some(first)
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunOutcome {
    /// The halt state was attained; `stage` is a successor ordinal since
    /// halting happens by a step.
    Halted { output: Tape, stage: Ordinal },
    /// A self-regenerating block was found; the machine repeats it at every
    /// later stage and limit, so it can never halt.
    Diverges { witness: LimitRecord, stabilized_output: Option<Tape> },
    /// An exploration bound was hit before any verdict.
    HorizonExceeded { stage_reached: Ordinal },
}

/// [`RunOutcome`] without the evidence payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Halted,
    Diverges,
    Horizon,
}

impl RunOutcome {
    pub fn verdict(&self) -> Verdict {
        match self {
            RunOutcome::Halted { .. } => Verdict::Halted,
            RunOutcome::Diverges { .. } => Verdict::Diverges,
            RunOutcome::HorizonExceeded { .. } => Verdict::Horizon,
        }
    }
}

/// Behavior of the output tape in the long run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Eventual {
    Halts,
    /// Diverges, but the output tape is the same in every snapshot of the
    /// witness, so it has exhibited its final value.
    Stabilizes(Tape),
    Oscillates,
    Unknown,
}

impl Eventual {
    pub fn label(&self) -> &'static str {
        match self {
            Eventual::Halts => "halts",
            Eventual::Stabilizes(_) => "stabilizes",
            Eventual::Oscillates => "oscillates",
            Eventual::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Eventual {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

pub fn classify_eventual(outcome: &RunOutcome) -> Eventual {
    match outcome {
        RunOutcome::Halted { .. } => Eventual::Halts,
        RunOutcome::Diverges { stabilized_output: Some(t), .. } => Eventual::Stabilizes(t.clone()),
        RunOutcome::Diverges { stabilized_output: None, .. } => Eventual::Oscillates,
        RunOutcome::HorizonExceeded { .. } => Eventual::Unknown,
    }
}

/// One entry in a run's event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceEvent {
    /// Stage 0.
    Init { snap: Snapshot },
    Step {
        stage: Ordinal,
        snap: Snapshot,
    },
    /// A proven limit jump. `period_start_stage` names the stage whose
    /// snapshot (or record segment) begins the repeating period, so the
    /// limit can be re-derived from the trace alone.
    Limit {
        stage: Ordinal,
        level: u32,
        period_start_stage: Ordinal,
        snap: Snapshot,
    },
}

impl TraceEvent {
    pub fn stage(&self) -> Ordinal {
        match self {
            TraceEvent::Init { .. } => Ordinal::zero(),
            TraceEvent::Step { stage, .. } | TraceEvent::Limit { stage, .. } => stage.clone(),
        }
    }

    pub fn snapshot(&self) -> &Snapshot {
        match self {
            TraceEvent::Init { snap }
            | TraceEvent::Step { snap, .. }
            | TraceEvent::Limit { snap, .. } => snap,
        }
    }
}

/// The ordered event log of one run. Empty when tracing was disabled.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

/// A self-contained, serializable run report: everything needed to render
/// or re-verify the history without the original `Program` value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceFile {
    pub state_names: Vec<String>,
    pub uses_oracle: bool,
    pub events: Vec<TraceEvent>,
    pub outcome: RunOutcome,
}

impl TraceFile {
    pub fn new(program: &Program, trace: Trace, outcome: RunOutcome) -> TraceFile {
        TraceFile {
            state_names: program.state_names().to_vec(),
            uses_oracle: program.uses_oracle(),
            events: trace.events,
            outcome,
        }
    }

    /// Renders the documented line format, one line per stage:
    ///
    /// ```text
    /// stage <TAB> kind <TAB> state <TAB> head <TAB> input <TAB> work <TAB> output
    /// ```
    ///
    /// `kind` is `init`, `step`, or `limit:<level>`; tapes print as
    /// `base{pos:bit,...}`. The final marker line is `:halted stage=..`,
    /// `:strong-loop level=..`, or `:horizon stage=..`.
    pub fn history(&self) -> String {
        let mut out = String::new();
        for ev in &self.events {
            let kind = match ev {
                TraceEvent::Init { .. } => "init".to_string(),
                TraceEvent::Step { .. } => "step".to_string(),
                TraceEvent::Limit { level, .. } => format!("limit:{level}"),
            };
            let s = ev.snapshot();
            let state = self
                .state_names
                .get(usize::from(s.state.0))
                .map_or_else(|| format!("state{}", s.state.0), Clone::clone);
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                ev.stage(),
                kind,
                state,
                s.head,
                s.input,
                s.work,
                s.output
            );
        }
        let marker = match &self.outcome {
            RunOutcome::Halted { stage, .. } => format!(":halted stage={stage}"),
            RunOutcome::Diverges { witness, .. } => {
                format!(":strong-loop level={}", witness.level)
            }
            RunOutcome::HorizonExceeded { stage_reached } => {
                format!(":horizon stage={stage_reached}")
            }
        };
        out.push_str(&marker);
        out.push('\n');
        out
    }
}

/// Configured entry point for runs of one program.
pub struct Runner<'a> {
    program: &'a Program,
    oracle: Option<&'a BitGenerator>,
    cfg: RunConfig,
    record_trace: bool,
}

impl<'a> Runner<'a> {
    pub fn new(program: &'a Program) -> Runner<'a> {
        Runner { program, oracle: None, cfg: RunConfig::default(), record_trace: true }
    }

    pub fn config(mut self, cfg: RunConfig) -> Self {
        self.cfg = cfg;
        self
    }

    pub fn oracle(mut self, z: &'a BitGenerator) -> Self {
        self.oracle = Some(z);
        self
    }

    /// Tracing is on by default; long exploratory runs turn it off to keep
    /// memory proportional to the live history instead of the whole run.
    pub fn record_trace(mut self, yes: bool) -> Self {
        self.record_trace = yes;
        self
    }

    pub fn run(&self, input: Tape) -> (RunOutcome, Trace) {
        self.run_cancellable(input, || false).expect("uncancellable run was cancelled")
    }

    /// Like [`Runner::run`], but polls `cancel` between successor steps and
    /// returns `None` if it ever answers true.
    pub fn run_cancellable(
        &self,
        input: Tape,
        cancel: impl FnMut() -> bool,
    ) -> Option<(RunOutcome, Trace)> {
        assert!(
            self.cfg.max_steps_per_block >= 1 && self.cfg.max_tower >= 1 && self.cfg.max_history >= 1,
            "all run bounds must be at least 1"
        );
        assert_eq!(
            self.program.uses_oracle(),
            self.oracle.is_some(),
            "oracle arity mismatch"
        );
        let cur = Snapshot::initial(input);
        let engine = Engine {
            p: self.program,
            oracle: self.oracle,
            cfg: self.cfg,
            stage: Ordinal::zero(),
            block: vec![cur.clone()],
            block_start: Ordinal::zero(),
            recs: vec![Vec::new(); self.cfg.max_tower as usize + 1],
            cur,
            trace: self.record_trace.then(Vec::new),
        };
        engine.drive(cancel)
    }
}

struct Engine<'a> {
    p: &'a Program,
    oracle: Option<&'a BitGenerator>,
    cfg: RunConfig,
    stage: Ordinal,
    cur: Snapshot,
    /// Raw snapshots since the last limit, the snapshot at that limit first.
    block: Vec<Snapshot>,
    block_start: Ordinal,
    /// `recs[k]`: completed level-`k` records (with their segment start
    /// stages) since the last limit of level > k. Index 0 unused.
    recs: Vec<Vec<(Ordinal, LimitRecord)>>,
    trace: Option<Vec<TraceEvent>>,
}

impl Engine<'_> {
    fn emit(&mut self, ev: TraceEvent) {
        if let Some(t) = &mut self.trace {
            t.push(ev);
        }
    }

    fn drive(mut self, mut cancel: impl FnMut() -> bool) -> Option<(RunOutcome, Trace)> {
        self.emit(TraceEvent::Init { snap: self.cur.clone() });
        loop {
            if cancel() {
                return None;
            }
            let halted = match step(self.p, &self.cur, self.oracle) {
                StepResult::Continue(s) => {
                    self.cur = s;
                    false
                }
                StepResult::Halt(s) => {
                    self.cur = s;
                    true
                }
            };
            self.stage = self.stage.succ();
            self.emit(TraceEvent::Step { stage: self.stage.clone(), snap: self.cur.clone() });
            if halted {
                let outcome = RunOutcome::Halted {
                    output: self.cur.output.clone(),
                    stage: self.stage.clone(),
                };
                return Some(self.finish(outcome));
            }
            // exact repetition? snapshots in a block are pairwise distinct,
            // so at most one index can match
            if let Some(j) = self.block.iter().position(|s| *s == self.cur) {
                if let Err(outcome) = self.fire(1, j) {
                    return Some(self.finish(outcome));
                }
            } else {
                if self.block.len() >= self.cfg.max_steps_per_block {
                    let outcome =
                        RunOutcome::HorizonExceeded { stage_reached: self.stage.clone() };
                    return Some(self.finish(outcome));
                }
                self.block.push(self.cur.clone());
            }
        }
    }

    /// A level-`k` limit is provable: the period is the tail from index `j`
    /// of the level below. Either report divergence, cascade to a higher
    /// level when the completed record itself repeats, or take the limit.
    fn fire(&mut self, mut k: u32, mut j: usize) -> Result<(), RunOutcome> {
        loop {
            let (record, tau, full_limit, period_start) = if k == 1 {
                let period: Vec<&Snapshot> = self.block[j..].iter().collect();
                let full: Vec<&Snapshot> = self.block.iter().collect();
                (
                    LimitRecord {
                        level: 1,
                        entry: self.block[0].clone(),
                        block: Block::Steps(self.block.clone()),
                    },
                    limit_of(&period),
                    limit_of(&full),
                    self.block_start.plus(&Ordinal::nat(j as u64)),
                )
            } else {
                let list = &self.recs[(k - 1) as usize];
                let mut period = Vec::new();
                for (_, r) in &list[j..] {
                    collect_snapshots(&r.block, &mut period);
                }
                let mut full = Vec::new();
                for (_, r) in list {
                    collect_snapshots(&r.block, &mut full);
                }
                (
                    LimitRecord {
                        level: k,
                        entry: list[0].1.entry.clone(),
                        block: Block::Limits(list.iter().map(|(_, r)| r.clone()).collect()),
                    },
                    limit_of(&period),
                    limit_of(&full),
                    list[j].0.clone(),
                )
            };

            // Self-regenerating block: the period reproduces the entry at
            // the next limit, and the whole block (whose transient writes
            // recur cofinally under higher limits) reproduces it as well.
            // Both are needed; each alone admits an escape.
            if tau == record.entry && full_limit == record.entry {
                let stabilized_output = common_output(&record.block);
                return Err(RunOutcome::Diverges { witness: record, stabilized_output });
            }
            if k > self.cfg.max_tower {
                return Err(RunOutcome::HorizonExceeded { stage_reached: self.stage.clone() });
            }
            if let Some(i) = self.recs[k as usize].iter().position(|(_, r)| *r == record) {
                // the record sequence repeats from i: a limit one level up
                j = i;
                k += 1;
                continue;
            }
            if self.recs[k as usize].len() >= self.cfg.max_history {
                return Err(RunOutcome::HorizonExceeded { stage_reached: self.stage.clone() });
            }
            let seg_start = if k == 1 {
                self.block_start.clone()
            } else {
                self.recs[(k - 1) as usize][0].0.clone()
            };
            self.recs[k as usize].push((seg_start, record));
            self.stage = self.stage.next_limit(k);
            self.cur = tau.clone();
            self.emit(TraceEvent::Limit {
                stage: self.stage.clone(),
                level: k,
                period_start_stage: period_start,
                snap: tau,
            });
            self.block = vec![self.cur.clone()];
            self.block_start = self.stage.clone();
            for lv in 1..k as usize {
                self.recs[lv].clear();
            }
            return Ok(());
        }
    }

    fn finish(self, outcome: RunOutcome) -> (RunOutcome, Trace) {
        (outcome, Trace { events: self.trace.unwrap_or_default() })
    }
}

/// Replays a trace against the program it came from, checking every
/// successor step against [`step`], every limit against [`take_limit`] over
/// the events of its period, stage arithmetic, and the recorded outcome.
pub fn verify_trace(
    program: &Program,
    oracle: Option<&BitGenerator>,
    file: &TraceFile,
) -> Result<(), String> {
    let events = &file.events;
    if events.is_empty() {
        return Err("empty trace".into());
    }
    let TraceEvent::Init { snap: first } = &events[0] else {
        return Err("trace does not begin with init".into());
    };
    if first.state != Program::START || first.head != 0 {
        return Err("init snapshot is not a start configuration".into());
    }
    for (idx, ev) in events.iter().enumerate().skip(1) {
        let prev = &events[idx - 1];
        if ev.stage() <= prev.stage() {
            return Err(format!("stages not increasing at event {idx}"));
        }
        match ev {
            TraceEvent::Init { .. } => return Err(format!("init at event {idx}")),
            TraceEvent::Step { stage, snap } => {
                if *stage != prev.stage().succ() {
                    return Err(format!("step at event {idx} skips stages"));
                }
                let expect = step(program, prev.snapshot(), oracle);
                if expect.snapshot() != snap {
                    return Err(format!("step at stage {stage} does not replay"));
                }
            }
            TraceEvent::Limit { stage, level, period_start_stage, snap } => {
                let p_idx = events
                    .iter()
                    .position(|e| e.stage() == *period_start_stage)
                    .ok_or_else(|| format!("period start {period_start_stage} not in trace"))?;
                if p_idx >= idx {
                    return Err(format!("period start after limit at stage {stage}"));
                }
                if *level == 1 && events[idx - 1].snapshot() != events[p_idx].snapshot() {
                    return Err(format!("no exact repetition before limit at stage {stage}"));
                }
                let period: Vec<&Snapshot> =
                    events[p_idx..idx].iter().map(TraceEvent::snapshot).collect();
                if limit_of(&period) != *snap {
                    return Err(format!("limit snapshot at stage {stage} is not the limsup"));
                }
                if *stage != events[idx - 1].stage().next_limit(*level) {
                    return Err(format!("limit stage {stage} is not the least admissible"));
                }
            }
        }
    }
    let last = events.last().unwrap();
    match &file.outcome {
        RunOutcome::Halted { output, stage } => {
            let s = last.snapshot();
            if last.stage() != *stage || s.state != program.halt_state() || s.output != *output {
                return Err("halted outcome does not match the final event".into());
            }
            if !stage.is_successor() {
                return Err("halting stage is not a successor".into());
            }
        }
        RunOutcome::Diverges { witness, .. } => {
            if !witness.entry_regenerates() {
                return Err("divergence witness does not regenerate its entry".into());
            }
        }
        RunOutcome::HorizonExceeded { stage_reached } => {
            if last.stage() != *stage_reached {
                return Err("horizon stage does not match the final event".into());
            }
        }
    }
    Ok(())
}
