//! Canonical program enumeration and the halting-set approximation.
//!
//! The true halting set over transfinite runs is semidecidable but not
//! decidable, so the approximation here is honestly three-valued: every
//! enumerated program is run under a finite horizon and lands in `halted`
//! (with its stage), `diverges` (with a replayable witness), or `unknown`.
//! Raising the horizon can only drain `unknown`; it never flips a verdict.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::Serialize;

use crate::machine::{Move, Program, State, Transition};
use crate::ordinal::Ordinal;
use crate::runner::{LimitRecord, RunConfig, RunOutcome, Runner};
use crate::tape::{BitGenerator, Tape};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum JumpError {
    #[error("enumeration needs at least 3 states, got {0}")]
    TooFewStates(u16),
    #[error("index {index} out of range, bound is {bound}")]
    OutOfRange { index: BigUint, bound: BigUint },
    #[error("program with {states} states does not fit the {max_states}-state bound")]
    DoesNotFit { states: usize, max_states: u16 },
    #[error("oracle arity mismatch")]
    ArityMismatch,
}

/// Dense bijective numbering of all programs with up to `max_states` states
/// (halt included) and a fixed arity.
///
/// A program is flattened to one digit per table cell in a mixed-radix
/// numeral: cell digit `((write_combo * 2) + move) * (states) + next` where
/// `write_combo` packs the input/work/output write bits, `move` is 0 for L
/// and 1 for R, and `next` counts non-halt states first with halt last. The
/// cell for (start, scan 0) is the least significant digit, so near indices
/// differ in the start state's first rule. Programs with fewer states come
/// first: all 3-state programs, then all 4-state ones, and so on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProgramEnumeration {
    max_states: u16,
    uses_oracle: bool,
}

impl ProgramEnumeration {
    pub fn new(max_states: u16, uses_oracle: bool) -> Result<Self, JumpError> {
        if max_states < 3 {
            return Err(JumpError::TooFewStates(max_states));
        }
        Ok(ProgramEnumeration { max_states, uses_oracle })
    }

    /// The 4-state, oracle-free numbering the halting experiments use.
    pub fn standard() -> Self {
        ProgramEnumeration { max_states: 4, uses_oracle: false }
    }

    pub fn uses_oracle(&self) -> bool {
        self.uses_oracle
    }

    fn combos(&self) -> usize {
        if self.uses_oracle {
            16
        } else {
            8
        }
    }

    /// Digits per program and radix for the shape with `k` non-halt states.
    fn shape(&self, k: usize) -> (usize, BigUint) {
        (k * self.combos(), BigUint::from(16 * (k + 1)))
    }

    fn shape_count(&self, k: usize) -> BigUint {
        let (cells, radix) = self.shape(k);
        radix.pow(u32::try_from(cells).unwrap())
    }

    /// Total number of enumerated programs.
    pub fn count(&self) -> BigUint {
        (2..usize::from(self.max_states)).map(|k| self.shape_count(k)).sum()
    }

    fn state_names(k: usize) -> Vec<String> {
        let mut names = vec!["start".to_string(), "limit".to_string()];
        names.extend((2..k).map(|i| format!("s{i}")));
        names.push("halt".to_string());
        names
    }

    pub fn enumerate(&self, index: &BigUint) -> Result<Program, JumpError> {
        let mut rest = index.clone();
        for k in 2..usize::from(self.max_states) {
            let count = self.shape_count(k);
            if rest >= count {
                rest -= count;
                continue;
            }
            let (cells, radix) = self.shape(k);
            let mut table = Vec::with_capacity(cells);
            for _ in 0..cells {
                let digit = u64::try_from(&rest % &radix).unwrap();
                rest /= &radix;
                let next = digit % (k as u64 + 1);
                let move_and_write = digit / (k as u64 + 1);
                let combo = move_and_write / 2;
                table.push(Transition {
                    write: [combo & 1 != 0, combo & 2 != 0, combo & 4 != 0],
                    mv: if move_and_write % 2 == 0 { Move::Left } else { Move::Right },
                    next: State(u16::try_from(next).unwrap()),
                });
            }
            return Ok(Program::new(Self::state_names(k), self.uses_oracle, table)
                .expect("every digit string decodes to a valid table"));
        }
        Err(JumpError::OutOfRange { index: index.clone(), bound: self.count() })
    }

    /// Inverse of [`ProgramEnumeration::enumerate`] on the transition table;
    /// state names are not consulted, so the round trip through `enumerate`
    /// reproduces `p` exactly when `p` carries the canonical names.
    pub fn index_of(&self, p: &Program) -> Result<BigUint, JumpError> {
        if p.uses_oracle() != self.uses_oracle {
            return Err(JumpError::ArityMismatch);
        }
        let k = p.state_count() - 1;
        if p.state_count() > usize::from(self.max_states) {
            return Err(JumpError::DoesNotFit {
                states: p.state_count(),
                max_states: self.max_states,
            });
        }
        let offset: BigUint = (2..k).map(|k| self.shape_count(k)).sum();
        let (_, radix) = self.shape(k);
        let mut index = BigUint::from(0u32);
        for t in p.transitions().iter().rev() {
            let combo = u64::from(t.write[0])
                + 2 * u64::from(t.write[1])
                + 4 * u64::from(t.write[2]);
            let mv = match t.mv {
                Move::Left => 0,
                Move::Right => 1,
            };
            let digit = (combo * 2 + mv) * (k as u64 + 1) + u64::from(t.next.0);
            index = index * &radix + digit;
        }
        Ok(offset + index)
    }
}

/// Horizon-bounded partition of the enumerated programs on one input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct JumpApprox {
    pub input: Tape,
    pub horizon: RunConfig,
    pub halted: BTreeMap<u64, Ordinal>,
    pub diverges: BTreeMap<u64, LimitRecord>,
    pub unknown: BTreeSet<u64>,
}

fn classify_range(
    enumeration: &ProgramEnumeration,
    x: &Tape,
    max_index: u64,
    cfg: RunConfig,
    parallel: bool,
) -> Vec<(u64, RunOutcome)> {
    let one = |i: u64| {
        let p = enumeration
            .enumerate(&BigUint::from(i))
            .expect("max_index stays far below the enumeration bound");
        let (outcome, _) =
            Runner::new(&p).config(cfg).record_trace(false).run(x.clone());
        (i, outcome)
    };
    let mut rows: Vec<(u64, RunOutcome)> = if parallel {
        (0..max_index).into_par_iter().map(one).collect()
    } else {
        (0..max_index).map(one).collect()
    };
    rows.sort_by_key(|(i, _)| *i);
    rows
}

fn aggregate(
    input: Tape,
    horizon: RunConfig,
    rows: Vec<(u64, RunOutcome)>,
) -> JumpApprox {
    let mut approx = JumpApprox {
        input,
        horizon,
        halted: BTreeMap::new(),
        diverges: BTreeMap::new(),
        unknown: BTreeSet::new(),
    };
    for (i, outcome) in rows {
        match outcome {
            RunOutcome::Halted { stage, .. } => {
                approx.halted.insert(i, stage);
            }
            RunOutcome::Diverges { witness, .. } => {
                approx.diverges.insert(i, witness);
            }
            RunOutcome::HorizonExceeded { .. } => {
                approx.unknown.insert(i);
            }
        }
    }
    approx
}

/// Runs programs `0..max_index` of `enumeration` on `x`, fanning out across
/// worker threads; aggregation is ordered by index, so the result is
/// schedule-independent.
pub fn jump_approx(
    enumeration: &ProgramEnumeration,
    x: &Tape,
    max_index: u64,
    cfg: RunConfig,
) -> JumpApprox {
    aggregate(x.clone(), cfg, classify_range(enumeration, x, max_index, cfg, true))
}

/// Single-threaded [`jump_approx`], for schedule-independence checks.
pub fn jump_approx_sequential(
    enumeration: &ProgramEnumeration,
    x: &Tape,
    max_index: u64,
    cfg: RunConfig,
) -> JumpApprox {
    aggregate(x.clone(), cfg, classify_range(enumeration, x, max_index, cfg, false))
}

/// Runs enumerated program `e` on `x` with oracle parameter `z`.
pub fn relative_run(
    enumeration: &ProgramEnumeration,
    e: &BigUint,
    x: &Tape,
    z: &BitGenerator,
    cfg: RunConfig,
) -> Result<RunOutcome, JumpError> {
    let p = enumeration.enumerate(e)?;
    if !p.uses_oracle() {
        return Err(JumpError::ArityMismatch);
    }
    let (outcome, _) =
        Runner::new(&p).config(cfg).oracle(z).record_trace(false).run(x.clone());
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::assemble;
    use crate::programs::stdlib_program;
    use crate::runner::Verdict;
    use proptest::prelude::*;

    fn zeros() -> Tape {
        Tape::new(BitGenerator::Const(false))
    }

    fn ord(s: &str) -> Ordinal {
        s.parse().unwrap()
    }

    #[test]
    fn bound_counts_both_shapes() {
        let e = ProgramEnumeration::standard();
        let three_state = BigUint::from(48u32).pow(16);
        let four_state = BigUint::from(64u32).pow(24);
        assert_eq!(e.count(), three_state + four_state);
        assert!(e.enumerate(&e.count()).is_err());
    }

    #[test]
    fn first_indices_decode_to_known_programs() {
        let e = ProgramEnumeration::standard();
        // index 0: every rule writes nothing, moves left, returns to start
        let p0 = e.enumerate(&BigUint::from(0u32)).unwrap();
        assert_eq!(p0.state_count(), 3);
        let (o0, _) = Runner::new(&p0).run(zeros());
        assert_eq!(o0.verdict(), Verdict::Diverges);

        // index 2: the start rule for scan 0 jumps straight to halt
        let p2 = e.enumerate(&BigUint::from(2u32)).unwrap();
        match Runner::new(&p2).run(zeros()).0 {
            RunOutcome::Halted { stage, .. } => assert_eq!(stage, ord("1")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn library_programs_round_trip_through_their_indices() {
        let e = ProgramEnumeration::standard();
        for name in ["halt-now", "halt-at-limit", "blinker", "repeat-escape"] {
            let p = stdlib_program(name).unwrap();
            let i = e.index_of(&p).unwrap();
            assert_eq!(e.enumerate(&i).unwrap(), p, "{name}");
        }
        let too_big = stdlib_program("mark-forever").unwrap();
        assert!(matches!(
            e.index_of(&too_big),
            Err(JumpError::DoesNotFit { states: 7, max_states: 4 })
        ));
    }

    #[test]
    fn partition_places_hand_classified_programs() {
        let e = ProgramEnumeration::standard();
        let approx = jump_approx(&e, &zeros(), 64, RunConfig::default());

        let place = |p: &Program| u64::try_from(&e.index_of(p).unwrap()).ok();
        if let Some(i) = place(&stdlib_program("halt-now").unwrap()) {
            if i < 64 {
                assert_eq!(approx.halted.get(&i), Some(&ord("1")));
            }
        }
        // index 0 diverges with a checkable witness; index 2 halts at once
        assert!(approx.diverges[&0].entry_regenerates());
        assert_eq!(approx.halted[&2], ord("1"));
        // exactly one verdict per index
        for i in 0..64 {
            let hits = usize::from(approx.halted.contains_key(&i))
                + usize::from(approx.diverges.contains_key(&i))
                + usize::from(approx.unknown.contains(&i));
            assert_eq!(hits, 1, "index {i}");
        }
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let e = ProgramEnumeration::standard();
        let cfg = RunConfig { max_steps_per_block: 128, ..RunConfig::default() };
        let par = jump_approx(&e, &zeros(), 96, cfg);
        let seq = jump_approx_sequential(&e, &zeros(), 96, cfg);
        assert_eq!(par, seq);
    }

    #[test]
    fn larger_horizons_only_resolve_unknowns() {
        let e = ProgramEnumeration::standard();
        let small = RunConfig { max_steps_per_block: 24, max_tower: 2, max_history: 8 };
        let big = RunConfig { max_steps_per_block: 512, max_tower: 4, max_history: 64 };
        let a = jump_approx(&e, &zeros(), 128, small);
        let b = jump_approx(&e, &zeros(), 128, big);
        for (i, stage) in &a.halted {
            assert_eq!(b.halted.get(i), Some(stage));
        }
        for (i, witness) in &a.diverges {
            assert_eq!(b.diverges.get(i), Some(witness));
        }
    }

    #[test]
    fn relative_run_consults_the_oracle() {
        let copier = assemble(
            "state start:\n\
             \x20 on (_,_,_,0): write (_,_,0), move R, goto second\n\
             \x20 on (_,_,_,1): write (_,_,1), move R, goto second\n\
             state limit:\n  on (_,_,_,_): write same, move R, goto halt\n\
             state second:\n\
             \x20 on (_,_,_,0): write (_,_,0), move R, goto halt\n\
             \x20 on (_,_,_,1): write (_,_,1), move R, goto halt\n",
        )
        .unwrap();
        assert_eq!(copier.state_count(), 4);
        let e = ProgramEnumeration::new(4, true).unwrap();
        let i = e.index_of(&copier).unwrap();
        let z: BitGenerator = "periodic(;10)".parse().unwrap();
        match relative_run(&e, &i, &zeros(), &z, RunConfig::default()).unwrap() {
            RunOutcome::Halted { stage, output } => {
                assert_eq!(stage, ord("2"));
                assert!(output.read(0));
                assert!(!output.read(1));
            }
            other => panic!("{other:?}"),
        }
        // a non-oracle numbering can never satisfy the oracle parameter
        let plain = ProgramEnumeration::standard();
        assert_eq!(
            relative_run(&plain, &BigUint::from(0u32), &zeros(), &z, RunConfig::default()),
            Err(JumpError::ArityMismatch)
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn index_round_trip(i in 0u64..10_000, oracle in any::<bool>()) {
            let e = ProgramEnumeration::new(4, oracle).unwrap();
            let index = BigUint::from(i);
            let p = e.enumerate(&index).unwrap();
            prop_assert_eq!(e.index_of(&p).unwrap(), index);
        }

        #[test]
        fn index_round_trip_across_the_shape_seam(offset in 0u64..500) {
            let e = ProgramEnumeration::standard();
            let seam = BigUint::from(48u32).pow(16);
            for index in [&seam - offset, &seam + offset] {
                let p = e.enumerate(&index).unwrap();
                let states = if index < seam { 3 } else { 4 };
                prop_assert_eq!(p.state_count(), states);
                prop_assert_eq!(e.index_of(&p).unwrap(), index);
            }
        }
    }
}
