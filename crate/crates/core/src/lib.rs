//! Simulator for Turing machines that run past `w` steps.
//!
//! At successor stages the machine steps classically; at limit stages the
//! head returns to cell 0, control enters the distinguished `limit` state,
//! and every cell takes its limsup. The engine reaches limit stages by
//! proving them: an exact configuration repeat pins down the next `w`-limit,
//! a repeated block record pins down the next `w^2`-limit, and so on.
//!
//! - [`ordinal`]: stage clocks below `e0` in normal form.
//! - [`tape`]: lazily materialized binary tapes and order-code oracles.
//! - [`machine`]: programs, snapshots, the successor step.
//! - [`asm`]: the textual rule language and its disassembler.
//! - [`runner`]: the transfinite engine, traces, divergence witnesses.
//! - [`programs`]: a small certified program library and order-code checks.
//! - [`jump`]: program enumeration and the halting-set approximation.
//! - [`forcing`]: boolean-valued runs over unknown inputs.

pub mod asm;
pub mod forcing;
pub mod jump;
pub mod machine;
pub mod ordinal;
pub mod programs;
pub mod runner;
pub mod tape;

pub use forcing::{collapse_check, Condition, Fact, ForcedFactTable, ForcingConfig};
pub use jump::{jump_approx, JumpApprox, ProgramEnumeration};
pub use machine::{Program, Snapshot, State, TapeId};
pub use ordinal::Ordinal;
pub use runner::{classify_eventual, take_limit, RunConfig, RunOutcome, Runner, Verdict};
pub use tape::{BitGenerator, OrderSpec, Tape};
