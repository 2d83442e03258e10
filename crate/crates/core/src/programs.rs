//! Named library programs with certified behaviors, and native oracles for
//! coded orders.
//!
//! Each program ships as assembly text, so every entry passes the full
//! assembler validation and round-trips through the disassembler. The
//! certified behaviors are the exact outcomes the tests freeze.
//!
//! The native side answers the questions the `count-through-semi` program
//! semidecides, but by direct structural recursion over the [`OrderSpec`]:
//! well-foundedness, order type, and element ranks of the coded relation
//! (surplus elements included, so `fin(n)` has type `w` like `omega`).

use serde::{Deserialize, Serialize};

use crate::asm::assemble;
use crate::machine::Program;
use crate::ordinal::Ordinal;
use crate::runner::{RunOutcome, Runner, Verdict};
use crate::tape::{BitGenerator, OrderSpec, Tape};
use crate::RunConfig;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProgramsError {
    #[error("no library program named {0:?}")]
    UnknownProgram(String),
    #[error("order spec {0} is ill-founded")]
    IllFounded(OrderSpec),
}

/// One library program plus its documented contract.
#[derive(Debug, Clone)]
pub struct StdlibEntry {
    pub name: &'static str,
    pub program: Program,
    /// Input class and certified outcome, one line.
    pub certified: &'static str,
}

pub const STDLIB_NAMES: [&str; 8] = [
    "halt-now",
    "halt-at-limit",
    "halt-at-omega-squared",
    "mark-forever",
    "blinker",
    "repeat-escape",
    "count-through-semi",
    "copy-input",
];

const HALT_NOW: &str = "\
# one step: write a 1 on the output, stop
state start:
  on (_,_,_): write (_,_,1), move R, goto halt

state limit:
  on (_,_,_): write same, move R, goto halt
";

const HALT_AT_LIMIT: &str = "\
# idles in place, so the very first snapshot repeats; the limit state stops
state start:
  on (_,_,_): write same, move L, goto start

state limit:
  on (_,_,_): write same, move L, goto halt
";

const HALT_AT_OMEGA_SQUARED: &str = "\
# Each w-block probes work cell 1, marks it, toggles work cell 0, wipes the
# mark, and settles into a spin. The wipe keeps cell 1 at 0 in every w-limit,
# but the mark recurs in every block, so its limsup over all blocks is 1:
# the first probe after the w^2-limit reads it and stops, two steps later.
state start:
  on (_,_,_): write same, move L, goto spin

state limit:
  on (_,_,_): write same, move R, goto probe

state spin:
  on (_,_,_): write same, move L, goto spin

state probe:
  on (_,1,_): write same, move L, goto halt
  on (_,0,_): write (_,1,_), move L, goto toggle

state toggle:
  on (_,0,_): write (_,1,_), move R, goto wipe
  on (_,1,_): write (_,0,_), move R, goto wipe

state wipe:
  on (_,0,_): write same, move L, goto spin
  on (_,1,_): write (_,0,_), move L, goto spin
";

const MARK_FOREVER: &str = "\
# marks work cells 0..4, walks back to cell 0, and stays there forever;
# the marking region is bounded so the snapshots can actually repeat
state start:
  on (_,_,_): write (_,1,_), move R, goto m1

state limit:
  on (_,_,_): write same, move L, goto back

state m1:
  on (_,_,_): write (_,1,_), move R, goto m2

state m2:
  on (_,_,_): write (_,1,_), move R, goto m3

state m3:
  on (_,_,_): write (_,1,_), move L, goto back

state back:
  on (_,_,_): write same, move L, goto back
";

const BLINKER: &str = "\
# flips output cell 0 forever; the limit state resumes flipping, so each
# w-limit regenerates the previous one
state start:
  on (_,_,0): write (_,_,1), move L, goto start
  on (_,_,1): write (_,_,0), move L, goto start

state limit:
  on (_,_,0): write (_,_,1), move L, goto start
  on (_,_,1): write (_,_,0), move L, goto start
";

const REPEAT_ESCAPE: &str = "\
# flips work cell 0 at successor stages: the stage-0 snapshot repeats at
# stage 2, yet the limit snapshot reads 1 and halts, so mere repetition
# must not be mistaken for divergence
state start:
  on (_,0,_): write (_,1,_), move L, goto start
  on (_,1,_): write (_,0,_), move L, goto start

state limit:
  on (_,_,_): write same, move L, goto halt
";

const COUNT_THROUGH_SEMI: &str = "\
# Semidecision fragment of the count-through procedure on an order code.
# Probes [1 < 0] at input cell 1 and [2 < 0] at input cell 3: a hit means
# element 0 is not minimal, which no well-founded code here allows, so the
# program commits to a provable loop (Diverges). Otherwise it sweeps right
# forever; the sweep's head never revisits a configuration, so the engine
# reports HorizonExceeded. It never reaches halt: exhausting a coded order
# needs limits this engine grants only to repeating snapshots.
state start:
  on (_,_,_): write same, move R, goto probe1

state limit:
  on (_,_,_): write same, move L, goto spin

state probe1:
  on (1,_,_): write same, move L, goto spin
  on (0,_,_): write same, move R, goto hop

state hop:
  on (_,_,_): write same, move R, goto probe2

state probe2:
  on (1,_,_): write same, move L, goto spin
  on (0,_,_): write same, move R, goto sweep

state sweep:
  on (_,_,_): write same, move R, goto sweep

state spin:
  on (_,_,_): write same, move L, goto spin
";

const COPY_INPUT: &str = "\
# copies input cells 0 and 1 to the output and stops
state start:
  on (0,_,_): write (_,_,0), move R, goto second
  on (1,_,_): write (_,_,1), move R, goto second

state limit:
  on (_,_,_): write same, move R, goto halt

state second:
  on (0,_,_): write (_,_,0), move R, goto halt
  on (1,_,_): write (_,_,1), move R, goto halt
";

fn source(name: &str) -> Option<&'static str> {
    Some(match name {
        "halt-now" => HALT_NOW,
        "halt-at-limit" => HALT_AT_LIMIT,
        "halt-at-omega-squared" => HALT_AT_OMEGA_SQUARED,
        "mark-forever" => MARK_FOREVER,
        "blinker" => BLINKER,
        "repeat-escape" => REPEAT_ESCAPE,
        "count-through-semi" => COUNT_THROUGH_SEMI,
        "copy-input" => COPY_INPUT,
        _ => return None,
    })
}

fn certified(name: &str) -> &'static str {
    match name {
        "halt-now" => "any input: Halted at stage 1, output cell 0 = 1",
        "halt-at-limit" => "any input: Halted at stage w+1",
        "halt-at-omega-squared" => "any input: Halted at stage w^2+2",
        "mark-forever" => "any input: Diverges, output stabilizes at const(0)",
        "blinker" => "any input: Diverges, output oscillates",
        "repeat-escape" => "any input: Halted at stage w+1 after repeating a snapshot",
        "count-through-semi" => {
            "input ordercode(s): never Halted; Diverges when the code puts an \
             element below 0, else HorizonExceeded"
        }
        "copy-input" => "any input: Halted at stage 2, output 0..1 copies input 0..1",
        _ => unreachable!(),
    }
}

/// The full library, in [`STDLIB_NAMES`] order.
pub fn stdlib() -> Vec<StdlibEntry> {
    STDLIB_NAMES
        .iter()
        .map(|name| StdlibEntry {
            name,
            program: assemble(source(name).unwrap())
                .unwrap_or_else(|e| panic!("library program {name} does not assemble: {e}")),
            certified: certified(name),
        })
        .collect()
}

pub fn stdlib_program(name: &str) -> Result<Program, ProgramsError> {
    let src = source(name).ok_or_else(|| ProgramsError::UnknownProgram(name.to_string()))?;
    Ok(assemble(src).expect("library programs assemble"))
}

/// The assembly text a library program was built from.
pub fn stdlib_source(name: &str) -> Result<&'static str, ProgramsError> {
    source(name).ok_or_else(|| ProgramsError::UnknownProgram(name.to_string()))
}

/// Whether the coded relation is well-founded. Purely structural: only
/// `omegastar` injects descent, and it survives under `sum` and `prod`.
pub fn well_founded(s: &OrderSpec) -> bool {
    match s {
        OrderSpec::Fin(_) | OrderSpec::Omega => true,
        OrderSpec::OmegaStar => false,
        OrderSpec::Sum(a, b) | OrderSpec::Prod(a, b) => well_founded(a) && well_founded(b),
    }
}

/// Order type of the coded relation, surplus elements included: every code
/// has field all of the naturals, so `fin(n)` contributes `w`, a sum adds,
/// and a product multiplies inner-by-outer.
pub fn order_type(s: &OrderSpec) -> Result<Ordinal, ProgramsError> {
    match s {
        OrderSpec::Fin(_) | OrderSpec::Omega => Ok(Ordinal::omega()),
        OrderSpec::OmegaStar => Err(ProgramsError::IllFounded(s.clone())),
        OrderSpec::Sum(a, b) => Ok(order_type(a)?.plus(&order_type(b)?)),
        OrderSpec::Prod(inner, outer) => Ok(order_type(inner)?.times(&order_type(outer)?)),
    }
}

/// Rank of element `m` in the coded relation: its position in the unique
/// enumeration respecting `precedes`.
pub fn element_rank(s: &OrderSpec, m: u64) -> Result<Ordinal, ProgramsError> {
    match s {
        OrderSpec::Fin(_) | OrderSpec::Omega => Ok(Ordinal::nat(m)),
        OrderSpec::OmegaStar => Err(ProgramsError::IllFounded(s.clone())),
        OrderSpec::Sum(a, b) => {
            if m % 2 == 0 {
                element_rank(a, m / 2)
            } else {
                Ok(order_type(a)?.plus(&element_rank(b, m / 2)?))
            }
        }
        OrderSpec::Prod(inner, outer) => {
            let (i, j) = crate::tape::unpair(m);
            Ok(order_type(inner)?
                .times(&element_rank(outer, j)?)
                .plus(&element_rank(inner, i)?))
        }
    }
}

/// How a `count-through-semi` run relates to the native oracle's answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContractVerdict {
    /// Halted on a well-founded code, or refused (diverged or ran out of
    /// horizon) on an ill-founded one.
    Agree,
    /// Well-founded, but the run did not halt within the horizon.
    Incomplete,
    /// Halted on an ill-founded code; must never happen.
    Unsound,
}

impl ContractVerdict {
    pub fn label(&self) -> &'static str {
        match self {
            ContractVerdict::Agree => "AGREE",
            ContractVerdict::Incomplete => "INCOMPLETE",
            ContractVerdict::Unsound => "UNSOUND",
        }
    }
}

impl std::fmt::Display for ContractVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Outcome of running `count-through-semi` on `ordercode(spec)` side by
/// side with the native oracle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountThroughReport {
    pub spec: OrderSpec,
    pub oracle_well_founded: bool,
    pub outcome: RunOutcome,
    pub verdict: ContractVerdict,
}

pub fn count_through_contract(spec: &OrderSpec, cfg: RunConfig) -> CountThroughReport {
    let program = stdlib_program("count-through-semi").unwrap();
    let input = Tape::new(BitGenerator::OrderCode(spec.clone()));
    let (outcome, _) = Runner::new(&program).config(cfg).record_trace(false).run(input);
    let oracle_well_founded = well_founded(spec);
    let verdict = match (outcome.verdict(), oracle_well_founded) {
        (Verdict::Halted, true) => ContractVerdict::Agree,
        (Verdict::Halted, false) => ContractVerdict::Unsound,
        (_, true) => ContractVerdict::Incomplete,
        (_, false) => ContractVerdict::Agree,
    };
    CountThroughReport { spec: spec.clone(), oracle_well_founded, outcome, verdict }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::disassemble;
    use crate::runner::{classify_eventual, Eventual};
    use crate::tape::pair;
    use proptest::prelude::*;

    fn ord(s: &str) -> Ordinal {
        s.parse().unwrap()
    }

    fn run_on(name: &str, input: Tape) -> RunOutcome {
        let p = stdlib_program(name).unwrap();
        Runner::new(&p).record_trace(false).run(input).0
    }

    fn zeros() -> Tape {
        Tape::new(BitGenerator::Const(false))
    }

    #[test]
    fn every_name_resolves_and_round_trips() {
        let entries = stdlib();
        assert_eq!(entries.len(), STDLIB_NAMES.len());
        for e in &entries {
            let back = assemble(&disassemble(&e.program)).unwrap();
            assert_eq!(back, e.program, "{} does not survive disassembly", e.name);
        }
        assert!(matches!(
            stdlib_program("nonesuch"),
            Err(ProgramsError::UnknownProgram(n)) if n == "nonesuch"
        ));
    }

    #[test]
    fn halting_members_hit_their_stages() {
        match run_on("halt-now", zeros()) {
            RunOutcome::Halted { stage, output } => {
                assert_eq!(stage, ord("1"));
                assert!(output.read(0));
            }
            other => panic!("{other:?}"),
        }
        match run_on("halt-at-limit", zeros()) {
            RunOutcome::Halted { stage, .. } => assert_eq!(stage, ord("w+1")),
            other => panic!("{other:?}"),
        }
        match run_on("halt-at-omega-squared", zeros()) {
            RunOutcome::Halted { stage, .. } => assert_eq!(stage, ord("w^2+2")),
            other => panic!("{other:?}"),
        }
        match run_on("repeat-escape", zeros()) {
            RunOutcome::Halted { stage, .. } => assert_eq!(stage, ord("w+1")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn copy_input_copies_two_cells() {
        let input = Tape::new("periodic(;10)".parse().unwrap());
        match run_on("copy-input", input) {
            RunOutcome::Halted { stage, output } => {
                assert_eq!(stage, ord("2"));
                assert!(output.read(0));
                assert!(!output.read(1));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn diverging_members_carry_their_classifications() {
        let mark = run_on("mark-forever", zeros());
        match classify_eventual(&mark) {
            Eventual::Stabilizes(t) => assert_eq!(t, zeros()),
            other => panic!("{other:?}"),
        }
        let blink = run_on("blinker", zeros());
        assert_eq!(classify_eventual(&blink), Eventual::Oscillates);
        for outcome in [mark, blink] {
            match outcome {
                RunOutcome::Diverges { witness, .. } => assert!(witness.entry_regenerates()),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn count_through_behaviors() {
        let code = |s: &OrderSpec| Tape::new(BitGenerator::OrderCode(s.clone()));
        let small = RunConfig { max_steps_per_block: 256, ..RunConfig::default() };
        let run = |s: &OrderSpec| {
            let p = stdlib_program("count-through-semi").unwrap();
            Runner::new(&p).config(small).record_trace(false).run(code(s)).0.verdict()
        };
        // a descending chain below element 0 is caught and committed to a loop
        assert_eq!(run(&OrderSpec::OmegaStar), Verdict::Diverges);
        let left_star = OrderSpec::Sum(Box::new(OrderSpec::OmegaStar), Box::new(OrderSpec::Omega));
        assert_eq!(run(&left_star), Verdict::Diverges);
        // well-founded codes make it sweep past every probe, forever
        assert_eq!(run(&OrderSpec::Omega), Verdict::Horizon);
        assert_eq!(run(&OrderSpec::Fin(0)), Verdict::Horizon);
        // ill-foundedness hidden from the fixed probes is missed, honestly
        let right_star = OrderSpec::Sum(Box::new(OrderSpec::Omega), Box::new(OrderSpec::OmegaStar));
        assert_eq!(run(&right_star), Verdict::Horizon);
    }

    #[test]
    fn contract_verdicts() {
        let small = RunConfig { max_steps_per_block: 256, ..RunConfig::default() };
        let report = count_through_contract(&OrderSpec::OmegaStar, small);
        assert!(!report.oracle_well_founded);
        assert_eq!(report.verdict, ContractVerdict::Agree);

        // the honest gap: well-founded codes are never exhausted, because a
        // halting run would need limits the sweep's growing head forbids
        let report = count_through_contract(&OrderSpec::Omega, small);
        assert!(report.oracle_well_founded);
        assert_eq!(report.verdict, ContractVerdict::Incomplete);
    }

    #[test]
    fn well_foundedness_is_structural() {
        use OrderSpec::*;
        assert!(well_founded(&Omega));
        assert!(well_founded(&Fin(0)));
        assert!(!well_founded(&OmegaStar));
        assert!(!well_founded(&Sum(Box::new(Omega), Box::new(OmegaStar))));
        assert!(!well_founded(&Prod(Box::new(OmegaStar), Box::new(Omega))));
        assert!(well_founded(&Prod(
            Box::new(Sum(Box::new(Omega), Box::new(Fin(2)))),
            Box::new(Omega)
        )));
    }

    #[test]
    fn order_types_with_surplus_elements() {
        use OrderSpec::*;
        let sum = |a: OrderSpec, b: OrderSpec| Sum(Box::new(a), Box::new(b));
        let prod = |a: OrderSpec, b: OrderSpec| Prod(Box::new(a), Box::new(b));

        assert_eq!(order_type(&Omega).unwrap(), ord("w"));
        assert_eq!(order_type(&Fin(0)).unwrap(), ord("w"));
        assert_eq!(order_type(&Fin(7)).unwrap(), ord("w"));
        assert_eq!(order_type(&sum(Omega, Fin(2))).unwrap(), ord("w*2"));
        assert_eq!(order_type(&sum(sum(Omega, Omega), Fin(1))).unwrap(), ord("w*3"));
        assert_eq!(order_type(&prod(Omega, Omega)).unwrap(), ord("w^2"));
        assert_eq!(order_type(&prod(prod(Omega, Omega), Omega)).unwrap(), ord("w^3"));
        assert_eq!(order_type(&prod(Omega, sum(Omega, Omega))).unwrap(), ord("w^2*2"));
        assert_eq!(order_type(&sum(prod(Omega, Omega), Omega)).unwrap(), ord("w^2+w"));
        assert!(order_type(&sum(Omega, OmegaStar)).is_err());
    }

    #[test]
    fn element_ranks() {
        use OrderSpec::*;
        let two_omegas = Sum(Box::new(Omega), Box::new(Omega));
        assert_eq!(element_rank(&two_omegas, 4).unwrap(), ord("2"));
        assert_eq!(element_rank(&two_omegas, 3).unwrap(), ord("w+1"));

        let grid = Prod(Box::new(Omega), Box::new(Omega));
        // element pair(2,1) sits in outer copy 1 at inner position 2
        assert_eq!(element_rank(&grid, pair(2, 1)).unwrap(), ord("w+2"));
        assert_eq!(element_rank(&grid, pair(0, 0)).unwrap(), ord("0"));
    }

    /// Well-founded specs only, depth at most `depth`.
    fn arb_wf_spec(depth: u32) -> impl Strategy<Value = OrderSpec> {
        let leaf = prop_oneof![Just(OrderSpec::Omega), (0u64..4).prop_map(OrderSpec::Fin)];
        leaf.prop_recursive(depth, 8, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| OrderSpec::Sum(Box::new(a), Box::new(b))),
                (inner.clone(), inner)
                    .prop_map(|(a, b)| OrderSpec::Prod(Box::new(a), Box::new(b))),
            ]
        })
    }

    fn arb_any_spec(depth: u32) -> impl Strategy<Value = OrderSpec> {
        let leaf = prop_oneof![
            Just(OrderSpec::Omega),
            Just(OrderSpec::OmegaStar),
            (0u64..4).prop_map(OrderSpec::Fin),
        ];
        leaf.prop_recursive(depth, 8, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| OrderSpec::Sum(Box::new(a), Box::new(b))),
                (inner.clone(), inner)
                    .prop_map(|(a, b)| OrderSpec::Prod(Box::new(a), Box::new(b))),
            ]
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        /// The generator's bits, the rank function, and the order type tell
        /// one consistent story on the first 64 field elements.
        #[test]
        fn ranks_respect_the_coding(spec in arb_wf_spec(2)) {
            let gen = BitGenerator::OrderCode(spec.clone());
            let ty = order_type(&spec).unwrap();
            let ranks: Vec<Ordinal> =
                (0..64).map(|m| element_rank(&spec, m).unwrap()).collect();
            for (i, ri) in ranks.iter().enumerate() {
                prop_assert!(*ri < ty);
                for (j, rj) in ranks.iter().enumerate() {
                    let bit = gen.bit(pair(i as u64, j as u64));
                    prop_assert_eq!(bit, ri < rj, "precedes({},{}) vs ranks", i, j);
                }
            }
        }

        /// The semidecision never halts, so in particular it is never
        /// unsound; ill-founded specs always come back AGREE.
        #[test]
        fn contract_is_never_unsound(spec in arb_any_spec(3)) {
            let cfg = RunConfig { max_steps_per_block: 128, ..RunConfig::default() };
            let report = count_through_contract(&spec, cfg);
            prop_assert_ne!(report.verdict, ContractVerdict::Unsound);
            prop_assert_ne!(report.outcome.verdict(), Verdict::Halted);
            if !report.oracle_well_founded {
                prop_assert_eq!(report.verdict, ContractVerdict::Agree);
            }
        }
    }
}
