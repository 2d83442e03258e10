//! Programs, snapshots, and the classical successor step.
//!
//! A program is a finite control over three binary tapes read through a
//! single shared head, with an optional read-only oracle track. The three
//! distinguished states are fixed by index so every module agrees on them:
//! `start` is 0, `limit` is 1, `halt` is last. The transition table is
//! total over all non-halt states by construction, so [`step`] can never
//! fail to find a rule.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::tape::{BitGenerator, Tape};

/// Index into a program's state table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct State(pub u16);

/// The three writable tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TapeId {
    Input,
    Work,
    Output,
}

impl TapeId {
    pub const ALL: [TapeId; 3] = [TapeId::Input, TapeId::Work, TapeId::Output];
}

impl fmt::Display for TapeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TapeId::Input => "input",
            TapeId::Work => "work",
            TapeId::Output => "output",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Move {
    Left,
    Right,
}

/// One resolved table entry: what to write on the three tracks, where to
/// move, and the next state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Transition {
    pub write: [bool; 3],
    pub mv: Move,
    pub next: State,
}

/// A validated machine program.
///
/// Constructed through [`Program::new`] (or the assembler in [`crate::asm`]),
/// which checks the canonical state layout and that the table covers every
/// (state, scanned) combination for every non-halt state, the limit state
/// included. The halt state owns no rules; reaching it ends the run.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Program {
    state_names: Vec<String>,
    uses_oracle: bool,
    /// Row-major: `transitions[state * combo_count + scan]`.
    transitions: Vec<Transition>,
}

/// Rejected [`Program::new`] input.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProgramError {
    #[error("program needs at least start, limit, and halt states")]
    TooFewStates,
    #[error("state layout must be [start, limit, ..., halt], found {found:?} at index {index}")]
    BadStateLayout { index: usize, found: String },
    #[error("duplicate state name {name:?}")]
    DuplicateState { name: String },
    #[error("transition table has {found} entries, expected {expected}")]
    WrongTableSize { expected: usize, found: usize },
    #[error("transition {index} targets nonexistent state {target}")]
    BadTarget { index: usize, target: u16 },
}

impl Program {
    pub const START: State = State(0);
    pub const LIMIT: State = State(1);

    /// Builds a program from an explicit total transition table.
    ///
    /// `state_names` must begin `start, limit` and end `halt`; the table
    /// holds `combo_count` entries per non-halt state, ordered by
    /// [`scan_code`].
    pub fn new(
        state_names: Vec<String>,
        uses_oracle: bool,
        transitions: Vec<Transition>,
    ) -> Result<Program, ProgramError> {
        if state_names.len() < 3 {
            return Err(ProgramError::TooFewStates);
        }
        for (index, expect) in [(0, "start"), (1, "limit"), (state_names.len() - 1, "halt")] {
            if state_names[index] != expect {
                return Err(ProgramError::BadStateLayout {
                    index,
                    found: state_names[index].clone(),
                });
            }
        }
        for (i, name) in state_names.iter().enumerate() {
            if state_names[..i].contains(name) {
                return Err(ProgramError::DuplicateState { name: name.clone() });
            }
        }
        let combos = if uses_oracle { 16 } else { 8 };
        let expected = (state_names.len() - 1) * combos;
        if transitions.len() != expected {
            return Err(ProgramError::WrongTableSize { expected, found: transitions.len() });
        }
        for (index, t) in transitions.iter().enumerate() {
            if usize::from(t.next.0) >= state_names.len() {
                return Err(ProgramError::BadTarget { index, target: t.next.0 });
            }
        }
        Ok(Program { state_names, uses_oracle, transitions })
    }

    pub fn state_count(&self) -> usize {
        self.state_names.len()
    }

    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }

    pub fn name_of(&self, s: State) -> &str {
        &self.state_names[usize::from(s.0)]
    }

    pub fn state_by_name(&self, name: &str) -> Option<State> {
        self.state_names
            .iter()
            .position(|n| n == name)
            .map(|i| State(u16::try_from(i).unwrap()))
    }

    pub fn halt_state(&self) -> State {
        State(u16::try_from(self.state_names.len() - 1).unwrap())
    }

    pub fn uses_oracle(&self) -> bool {
        self.uses_oracle
    }

    /// Scanned combinations per state: 8, or 16 with an oracle track.
    pub fn combo_count(&self) -> usize {
        if self.uses_oracle {
            16
        } else {
            8
        }
    }

    /// The rule applied in `state` when the head scans combination `scan`.
    pub fn transition(&self, state: State, scan: usize) -> &Transition {
        debug_assert!(state != self.halt_state(), "halt has no transitions");
        &self.transitions[usize::from(state.0) * self.combo_count() + scan]
    }

    pub(crate) fn transitions(&self) -> &[Transition] {
        &self.transitions
    }
}

/// Packs scanned bits into a table column: input is bit 0, work bit 1,
/// output bit 2, oracle bit 3.
pub fn scan_code(i: bool, w: bool, o: bool, z: Option<bool>) -> usize {
    usize::from(i) | usize::from(w) << 1 | usize::from(o) << 2 | z.map_or(0, usize::from) << 3
}

/// The full machine configuration at one stage.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Snapshot {
    pub state: State,
    pub head: u64,
    pub input: Tape,
    pub work: Tape,
    pub output: Tape,
}

impl Snapshot {
    /// Stage-0 configuration: start state, head on cell 0, zeroed work and
    /// output tapes.
    pub fn initial(input: Tape) -> Snapshot {
        Snapshot {
            state: Program::START,
            head: 0,
            input,
            work: Tape::new(BitGenerator::Const(false)),
            output: Tape::new(BitGenerator::Const(false)),
        }
    }

    pub fn tape(&self, id: TapeId) -> &Tape {
        match id {
            TapeId::Input => &self.input,
            TapeId::Work => &self.work,
            TapeId::Output => &self.output,
        }
    }
}

/// Outcome of one successor step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepResult {
    Continue(Snapshot),
    /// The step entered the halt state; the snapshot carries the final
    /// writes and head move.
    Halt(Snapshot),
}

impl StepResult {
    pub fn snapshot(&self) -> &Snapshot {
        match self {
            StepResult::Continue(s) | StepResult::Halt(s) => s,
        }
    }
}

/// Applies one classical step: read the scanned bits, apply the unique
/// rule, write, move (a left move at cell 0 stays at cell 0), change state.
///
/// Panics if `s` is already halted or if the oracle's presence does not
/// match the program's arity; both are engine bugs, not run outcomes.
pub fn step(p: &Program, s: &Snapshot, oracle: Option<&BitGenerator>) -> StepResult {
    assert!(s.state != p.halt_state(), "stepping a halted snapshot");
    assert_eq!(p.uses_oracle(), oracle.is_some(), "oracle arity mismatch");

    let scan = scan_code(
        s.input.read(s.head),
        s.work.read(s.head),
        s.output.read(s.head),
        oracle.map(|z| z.bit(s.head)),
    );
    let t = p.transition(s.state, scan);
    let next = Snapshot {
        state: t.next,
        head: match t.mv {
            Move::Left => s.head.saturating_sub(1),
            Move::Right => s.head + 1,
        },
        input: s.input.write(s.head, t.write[0]),
        work: s.work.write(s.head, t.write[1]),
        output: s.output.write(s.head, t.write[2]),
    };
    if t.next == p.halt_state() {
        StepResult::Halt(next)
    } else {
        StepResult::Continue(next)
    }
}
