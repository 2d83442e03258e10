//! Boolean-valued runs over unknown inputs.
//!
//! Instead of one input, a run here carries all of them at once. A
//! *condition* fixes finitely many initial input bits (a prefix); a table
//! maps each observable fact (a cell value, the head position, the control
//! state) to the minimal conditions that settle it. Stepping a table refines
//! conditions exactly as far as the machine actually reads, and the limit
//! rule mirrors the concrete one: a cell is 0 at the first `w`-limit under
//! the conditions that pin it to 0 throughout the detected cycle, and 1
//! under those that make 1 recur.
//!
//! Scope is deliberately small: successor stages plus the first `w`-limit,
//! facts for cells `0..window`, conditions up to `condition_len` bits. A
//! step that needs more (head leaving the window, a read past the condition
//! length) aborts with an error rather than guessing. Branches that reach
//! the halt state are frozen in place; the limit rule still stamps every
//! condition with the limit state, which is only meaningful when no branch
//! halted during the cycle. [`collapse_check`] never observes the
//! difference: along a halting concrete input the comparison ends at the
//! halt, before any limit is taken.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

use crate::machine::{self, Program, Snapshot, State, StepResult, TapeId};
use crate::ordinal::Ordinal;
use crate::runner::take_limit;
use crate::tape::Tape;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ForcingConfig {
    /// Facts are tracked for cells `0..window` on each tape.
    pub window: u64,
    /// Longest condition, in bits.
    pub condition_len: usize,
    /// Table-sequence horizon for cycle detection.
    pub max_steps: usize,
}

impl Default for ForcingConfig {
    fn default() -> Self {
        ForcingConfig { window: 64, condition_len: 16, max_steps: 4096 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize)]
pub enum ForcingError {
    #[error("head reached cell {head}, outside the {window}-cell window")]
    WindowExceeded { head: u64, window: u64 },
    #[error("conditions of {depth} bits cannot decide the control state")]
    StateUndecided { depth: usize },
    #[error("conditions of {depth} bits cannot decide the head position")]
    HeadUndecided { depth: usize },
    #[error("conditions of {depth} bits cannot decide {tape} cell {position}")]
    CellUndecided { depth: usize, tape: TapeId, position: u64 },
    #[error("no cycle among {0} consecutive tables")]
    NoLasso(usize),
}

/// Finitely many fixed initial input bits: cells `0..len` hold exactly
/// `bits`. The empty condition constrains nothing. `q` extends `p` when `p`
/// is a prefix of `q`; extending means knowing more.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Condition {
    bits: Vec<bool>,
}

impl Condition {
    pub fn root() -> Condition {
        Condition { bits: Vec::new() }
    }

    pub fn from_bits(bits: Vec<bool>) -> Condition {
        Condition { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bit(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn child(&self, bit: bool) -> Condition {
        let mut bits = self.bits.clone();
        bits.push(bit);
        Condition { bits }
    }

    /// Prefix order, reflexively: every condition extends itself.
    pub fn extends(&self, other: &Condition) -> bool {
        self.bits.starts_with(&other.bits)
    }

    fn strictly_extends(&self, other: &Condition) -> bool {
        self.len() > other.len() && self.extends(other)
    }

    pub fn comparable(&self, other: &Condition) -> bool {
        self.extends(other) || other.extends(self)
    }

    /// Whether a concrete input satisfies this condition.
    pub fn agrees_with(&self, x: &Tape) -> bool {
        self.bits.iter().enumerate().all(|(i, &b)| x.read(i as u64) == b)
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Condition, String> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(format!("condition bits are 0 or 1, not {other:?}")),
            })
            .collect::<Result<Vec<bool>, String>>()
            .map(Condition::from_bits)
    }
}

impl Serialize for Condition {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

/// One observable feature of a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Fact {
    CellValue { tape: TapeId, position: u64, bit: bool },
    HeadAt(u64),
    InState(State),
}

impl Fact {
    pub fn cell(tape: TapeId, position: u64, bit: bool) -> Fact {
        Fact::CellValue { tape, position, bit }
    }

    pub fn label(&self, p: &Program) -> String {
        match *self {
            Fact::CellValue { tape, position, bit } => {
                format!("{tape}[{position}]={}", u8::from(bit))
            }
            Fact::HeadAt(h) => format!("head@{h}"),
            Fact::InState(s) => format!("state={}", p.name_of(s)),
        }
    }

    fn holds_in(&self, s: &Snapshot) -> bool {
        match *self {
            Fact::CellValue { tape, position, bit } => s.tape(tape).read(position) == bit,
            Fact::HeadAt(h) => s.head == h,
            Fact::InState(st) => s.state == st,
        }
    }
}

/// The conditions forcing one fact.
///
/// `Cones` lists a minimal antichain; anything extending a member forces the
/// fact, as does anything all of whose full-length extensions do (a bar).
/// `InputBit` stands for every condition that defines input cell `position`
/// as `bit`; kept symbolic because its antichain has `2^position` members.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
enum Row {
    Cones(Vec<Condition>),
    InputBit { position: u64, bit: bool },
}

fn cones_cover(members: &[Condition], q: &Condition) -> bool {
    if members.iter().any(|m| q.extends(m)) {
        return true;
    }
    if !members.iter().any(|m| m.strictly_extends(q)) {
        return false;
    }
    cones_cover(members, &q.child(false)) && cones_cover(members, &q.child(true))
}

impl Row {
    fn forces(&self, q: &Condition) -> bool {
        match self {
            Row::Cones(members) => cones_cover(members, q),
            Row::InputBit { position, bit } => {
                let position = usize::try_from(*position).unwrap();
                q.len() > position && q.bit(position) == *bit
            }
        }
    }

    /// Whether any extension of `q` up to `max_len` bits could force.
    fn possible_below(&self, q: &Condition, max_len: usize) -> bool {
        match self {
            Row::Cones(members) => {
                self.forces(q) || members.iter().any(|m| m.strictly_extends(q))
            }
            Row::InputBit { position, bit } => {
                let position = usize::try_from(*position).unwrap();
                if q.len() > position {
                    q.bit(position) == *bit
                } else {
                    position < max_len
                }
            }
        }
    }

    /// All minimal conditions below `q` that force, appended to `out`.
    fn restricted_below(&self, q: &Condition, out: &mut Vec<Condition>) {
        match self {
            Row::Cones(members) => {
                for m in members {
                    if q.extends(m) {
                        out.push(q.clone());
                    } else if m.strictly_extends(q) {
                        out.push(m.clone());
                    }
                }
            }
            Row::InputBit { position, bit } => {
                let position = usize::try_from(*position).unwrap();
                if q.len() > position {
                    if q.bit(position) == *bit {
                        out.push(q.clone());
                    }
                    return;
                }
                // every filling of cells len..position, then the fixed bit
                let gap = position - q.len();
                for mask in 0u64..(1 << gap) {
                    let mut c = q.clone();
                    for i in 0..gap {
                        c = c.child(mask & (1 << i) != 0);
                    }
                    out.push(c.child(*bit));
                }
            }
        }
    }

    /// The first condition compatible with the concrete input `x` that
    /// forces, if any.
    fn witness_along(&self, x: &Tape, max_len: usize) -> Option<Condition> {
        match self {
            Row::Cones(members) => members.iter().find(|m| m.agrees_with(x)).cloned(),
            Row::InputBit { position, bit } => {
                let position = usize::try_from(*position).unwrap();
                if position < max_len && x.read(position as u64) == *bit {
                    Some(Condition::from_bits((0..=position as u64).map(|i| x.read(i)).collect()))
                } else {
                    None
                }
            }
        }
    }
}

/// The canonical minimal antichain generating the same forced set as
/// `contribs`: siblings that both force merge into their parent, and
/// extensions of members are dropped.
fn tidy(contribs: &[Condition]) -> Vec<Condition> {
    fn pass(members: &[Condition], q: Condition) -> (bool, Vec<Condition>) {
        if members.iter().any(|m| q.extends(m)) {
            return (true, Vec::new());
        }
        if !members.iter().any(|m| m.strictly_extends(&q)) {
            return (false, Vec::new());
        }
        let zero = q.child(false);
        let one = q.child(true);
        let (f0, o0) = pass(members, zero.clone());
        let (f1, o1) = pass(members, one.clone());
        if f0 && f1 {
            return (true, Vec::new());
        }
        let mut out = if f0 { vec![zero] } else { o0 };
        out.extend(if f1 { vec![one] } else { o1 });
        (false, out)
    }
    if contribs.is_empty() {
        return Vec::new();
    }
    let (full, out) = pass(contribs, Condition::root());
    if full {
        vec![Condition::root()]
    } else {
        out
    }
}

/// Borrowed view of one table row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowView<'a> {
    /// Minimal antichain of forcing conditions.
    Antichain(&'a [Condition]),
    /// Every condition defining input cell `position` as `bit`.
    AnyWithInputBit { position: u64, bit: bool },
}

fn serialize_entries<S: Serializer>(
    entries: &BTreeMap<Fact, Row>,
    serializer: S,
) -> Result<S::Ok, S::Error> {
    let mut seq = serializer.serialize_seq(Some(entries.len()))?;
    for pair in entries {
        seq.serialize_element(&pair)?;
    }
    seq.end()
}

/// Everything forced at one stage: fact by fact, the minimal conditions
/// settling it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ForcedFactTable {
    stage: Ordinal,
    #[serde(serialize_with = "serialize_entries")]
    entries: BTreeMap<Fact, Row>,
}

impl ForcedFactTable {
    pub fn stage(&self) -> &Ordinal {
        &self.stage
    }

    /// Stage-blind comparison, the right notion for cycle detection.
    pub fn same_entries(&self, other: &ForcedFactTable) -> bool {
        self.entries == other.entries
    }

    pub fn forces(&self, q: &Condition, f: Fact) -> bool {
        self.entries.get(&f).is_some_and(|row| row.forces(q))
    }

    pub fn rows(&self) -> impl Iterator<Item = (Fact, RowView<'_>)> {
        self.entries.iter().map(|(f, row)| {
            let view = match row {
                Row::Cones(members) => RowView::Antichain(members),
                Row::InputBit { position, bit } => {
                    RowView::AnyWithInputBit { position: *position, bit: *bit }
                }
            };
            (*f, view)
        })
    }

    /// Replaces one row verbatim, bypassing every invariant. Fixture for
    /// negative controls; an empty list removes the row.
    pub fn override_row(&mut self, f: Fact, conditions: Vec<Condition>) {
        if conditions.is_empty() {
            self.entries.remove(&f);
        } else {
            self.entries.insert(f, Row::Cones(conditions));
        }
    }

    fn head_rows(&self) -> impl Iterator<Item = (u64, &Row)> {
        self.entries
            .range(Fact::HeadAt(0)..=Fact::HeadAt(u64::MAX))
            .map(|(f, row)| match f {
                Fact::HeadAt(h) => (*h, row),
                _ => unreachable!(),
            })
    }

    fn state_rows(&self) -> impl Iterator<Item = (State, &Row)> {
        self.entries
            .range(Fact::InState(State(0))..=Fact::InState(State(u16::MAX)))
            .map(|(f, row)| match f {
                Fact::InState(s) => (*s, row),
                _ => unreachable!(),
            })
    }
}

/// Free-function spelling of [`ForcedFactTable::forces`].
pub fn forces(t: &ForcedFactTable, q: &Condition, f: Fact) -> bool {
    t.forces(q, f)
}

/// The stage-0 table: the empty condition settles the start state, the head
/// on cell 0, and every tracked work and output cell as 0; each input cell
/// is settled exactly by the conditions that define it.
pub fn initial_table(p: &Program, cfg: &ForcingConfig) -> ForcedFactTable {
    assert!(!p.uses_oracle(), "boolean runs range over inputs, not oracles");
    let root = || Row::Cones(vec![Condition::root()]);
    let mut entries = BTreeMap::new();
    entries.insert(Fact::InState(Program::START), root());
    entries.insert(Fact::HeadAt(0), root());
    for n in 0..cfg.window {
        entries.insert(Fact::cell(TapeId::Work, n, false), root());
        entries.insert(Fact::cell(TapeId::Output, n, false), root());
        for bit in [false, true] {
            entries.insert(Fact::cell(TapeId::Input, n, bit), Row::InputBit { position: n, bit });
        }
    }
    ForcedFactTable { stage: Ordinal::zero(), entries }
}

struct LiveBranch {
    head: u64,
    new_head: u64,
    writes: [bool; 3],
    next: State,
}

/// `None` marks a branch frozen in the halt state.
type Branch = (Condition, Option<LiveBranch>);

fn split(
    p: &Program,
    t: &ForcedFactTable,
    cfg: &ForcingConfig,
    q: &Condition,
    out: &mut Vec<Branch>,
    err: ForcingError,
) -> Result<(), ForcingError> {
    if q.len() == cfg.condition_len {
        return Err(err);
    }
    resolve_into(p, t, cfg, q.child(false), out)?;
    resolve_into(p, t, cfg, q.child(true), out)
}

fn resolve_into(
    p: &Program,
    t: &ForcedFactTable,
    cfg: &ForcingConfig,
    q: Condition,
    out: &mut Vec<Branch>,
) -> Result<(), ForcingError> {
    let state = match t.state_rows().map(|(s, _)| s).find(|&s| t.forces(&q, Fact::InState(s))) {
        Some(s) => s,
        None => {
            let err = ForcingError::StateUndecided { depth: cfg.condition_len };
            return split(p, t, cfg, &q, out, err);
        }
    };
    if state == p.halt_state() {
        out.push((q, None));
        return Ok(());
    }
    let head = match t.head_rows().map(|(h, _)| h).find(|&h| t.forces(&q, Fact::HeadAt(h))) {
        Some(h) => h,
        None => {
            let err = ForcingError::HeadUndecided { depth: cfg.condition_len };
            return split(p, t, cfg, &q, out, err);
        }
    };
    let mut scan = [false; 3];
    for tape in TapeId::ALL {
        let forced_0 = t.forces(&q, Fact::cell(tape, head, false));
        let forced_1 = !forced_0 && t.forces(&q, Fact::cell(tape, head, true));
        if !forced_0 && !forced_1 {
            let err = ForcingError::CellUndecided {
                depth: cfg.condition_len,
                tape,
                position: head,
            };
            return split(p, t, cfg, &q, out, err);
        }
        scan[tape as usize] = forced_1;
    }
    let tr = p.transition(state, machine::scan_code(scan[0], scan[1], scan[2], None));
    let new_head = match tr.mv {
        machine::Move::Left => head.saturating_sub(1),
        machine::Move::Right => head + 1,
    };
    if new_head >= cfg.window {
        return Err(ForcingError::WindowExceeded { head: new_head, window: cfg.window });
    }
    out.push((q, Some(LiveBranch { head, new_head, writes: tr.write, next: tr.next })));
    Ok(())
}

/// Splits until every branch settles its local configuration, then applies
/// one machine step along each branch. Halted branches pass through frozen.
pub fn boolean_step(
    p: &Program,
    t: &ForcedFactTable,
    cfg: &ForcingConfig,
) -> Result<ForcedFactTable, ForcingError> {
    let mut branches = Vec::new();
    resolve_into(p, t, cfg, Condition::root(), &mut branches)?;

    let mut entries = BTreeMap::new();

    // cells: positions under no live head keep their rows verbatim (the
    // branch fronts form a bar, so the restricted union re-tidies to the
    // same row); written positions are rebuilt from contributions
    let touched: Vec<u64> =
        branches.iter().filter_map(|(_, b)| b.as_ref().map(|b| b.head)).collect();
    for tape in TapeId::ALL {
        for position in 0..cfg.window {
            if !touched.contains(&position) {
                for bit in [false, true] {
                    let f = Fact::cell(tape, position, bit);
                    if let Some(row) = t.entries.get(&f) {
                        entries.insert(f, row.clone());
                    }
                }
                continue;
            }
            for bit in [false, true] {
                let f = Fact::cell(tape, position, bit);
                let mut contribs = Vec::new();
                for (q, branch) in &branches {
                    match branch {
                        Some(b) if b.head == position => {
                            if b.writes[tape as usize] == bit {
                                contribs.push(q.clone());
                            }
                        }
                        _ => {
                            if let Some(row) = t.entries.get(&f) {
                                row.restricted_below(q, &mut contribs);
                            }
                        }
                    }
                }
                let row = tidy(&contribs);
                if !row.is_empty() {
                    entries.insert(f, Row::Cones(row));
                }
            }
        }
    }

    // head and state rows: live branches land where the step sends them,
    // frozen branches keep whatever held before
    let mut head_contribs: BTreeMap<u64, Vec<Condition>> = BTreeMap::new();
    let mut state_contribs: BTreeMap<State, Vec<Condition>> = BTreeMap::new();
    for (q, branch) in &branches {
        match branch {
            Some(b) => {
                head_contribs.entry(b.new_head).or_default().push(q.clone());
                state_contribs.entry(b.next).or_default().push(q.clone());
            }
            None => {
                for (h, row) in t.head_rows() {
                    row.restricted_below(q, head_contribs.entry(h).or_default());
                }
                for (s, row) in t.state_rows() {
                    row.restricted_below(q, state_contribs.entry(s).or_default());
                }
            }
        }
    }
    for (h, contribs) in head_contribs {
        let row = tidy(&contribs);
        if !row.is_empty() {
            entries.insert(Fact::HeadAt(h), Row::Cones(row));
        }
    }
    for (s, contribs) in state_contribs {
        let row = tidy(&contribs);
        if !row.is_empty() {
            entries.insert(Fact::InState(s), Row::Cones(row));
        }
    }

    Ok(ForcedFactTable { stage: t.stage.succ(), entries })
}

/// Computes the table at stage `w` from a run of successor tables that
/// contains an exact repeat (stage fields aside).
///
/// Every condition gets the head on cell 0 in the limit state. A cell is 0
/// under the conditions forcing 0 at every stage of the cycle, and 1 under
/// those forcing 1 at some stage of it, closed so that sibling conditions
/// reaching 1 at different phases merge.
pub fn boolean_limit(
    history: &[ForcedFactTable],
    cfg: &ForcingConfig,
) -> Result<ForcedFactTable, ForcingError> {
    let mut cycle_bounds = None;
    'scan: for e in 1..history.len() {
        for s in 0..e {
            if history[e].same_entries(&history[s]) {
                cycle_bounds = Some((s, e));
                break 'scan;
            }
        }
    }
    let Some((s, e)) = cycle_bounds else {
        return Err(ForcingError::NoLasso(history.len()));
    };
    let cycle = &history[s..e];

    let root = || Row::Cones(vec![Condition::root()]);
    let mut entries = BTreeMap::new();
    entries.insert(Fact::InState(Program::LIMIT), root());
    entries.insert(Fact::HeadAt(0), root());

    let mut cell_facts: Vec<Fact> = Vec::new();
    for table in cycle {
        for f in table.entries.range(..Fact::HeadAt(0)).map(|(f, _)| *f) {
            if !cell_facts.contains(&f) {
                cell_facts.push(f);
            }
        }
    }

    for f in cell_facts {
        let rows: Vec<Option<&Row>> = cycle.iter().map(|t| t.entries.get(&f)).collect();
        if let Some(first) = rows[0] {
            if rows.iter().all(|r| *r == Some(first)) {
                entries.insert(f, first.clone());
                continue;
            }
        }
        let Fact::CellValue { bit, .. } = f else { unreachable!() };
        let throughout = !bit;
        if throughout && rows.iter().any(|r| r.is_none()) {
            continue;
        }
        fn pass(
            rows: &[Option<&Row>],
            q: Condition,
            throughout: bool,
            max_len: usize,
        ) -> (bool, Vec<Condition>) {
            let forced = |r: &Option<&Row>| r.is_some_and(|row| row.forces(&q));
            let covered =
                if throughout { rows.iter().all(forced) } else { rows.iter().any(forced) };
            if covered {
                return (true, Vec::new());
            }
            let possible = |r: &Option<&Row>| {
                r.is_some_and(|row| row.possible_below(&q, max_len))
            };
            let viable =
                if throughout { rows.iter().all(possible) } else { rows.iter().any(possible) };
            if !viable || q.len() >= max_len {
                return (false, Vec::new());
            }
            let zero = q.child(false);
            let one = q.child(true);
            let (f0, o0) = pass(rows, zero.clone(), throughout, max_len);
            let (f1, o1) = pass(rows, one.clone(), throughout, max_len);
            if f0 && f1 {
                return (true, Vec::new());
            }
            let mut out = if f0 { vec![zero] } else { o0 };
            out.extend(if f1 { vec![one] } else { o1 });
            (false, out)
        }
        let (full, members) = pass(&rows, Condition::root(), throughout, cfg.condition_len);
        let members = if full { vec![Condition::root()] } else { members };
        if !members.is_empty() {
            entries.insert(f, Row::Cones(members));
        }
    }

    Ok(ForcedFactTable { stage: Ordinal::omega(), entries })
}

/// Structural and semantic soundness of one table: well-formed minimal
/// antichains, no condition forcing both values of a cell, and every branch
/// deciding every cell (input cells beyond the condition length excepted).
pub fn validate_table(t: &ForcedFactTable, cfg: &ForcingConfig) -> Result<(), String> {
    for (f, row) in &t.entries {
        match row {
            Row::Cones(members) => {
                if members.is_empty() {
                    return Err(format!("{f:?}: empty row stored instead of omitted"));
                }
                for w in members.windows(2) {
                    if w[0] >= w[1] {
                        return Err(format!("{f:?}: antichain out of order"));
                    }
                }
                for (i, a) in members.iter().enumerate() {
                    if a.len() > cfg.condition_len {
                        return Err(format!("{f:?}: condition longer than tracked"));
                    }
                    for b in &members[i + 1..] {
                        if a.comparable(b) {
                            return Err(format!("{f:?}: {a} and {b} are comparable"));
                        }
                    }
                }
            }
            Row::InputBit { position, .. } => {
                if !matches!(f, Fact::CellValue { tape: TapeId::Input, .. }) {
                    return Err(format!("{f:?}: input-bit row on a non-input fact"));
                }
                if *position >= cfg.window {
                    return Err(format!("{f:?}: position outside the window"));
                }
            }
        }
        match f {
            Fact::CellValue { position, .. } if *position >= cfg.window => {
                return Err(format!("{f:?}: cell outside the window"));
            }
            Fact::HeadAt(h) if *h >= cfg.window => {
                return Err(format!("{f:?}: head outside the window"));
            }
            _ => {}
        }
    }

    for tape in [TapeId::Input, TapeId::Work, TapeId::Output] {
        for position in 0..cfg.window {
            let row0 = t.entries.get(&Fact::cell(tape, position, false));
            let row1 = t.entries.get(&Fact::cell(tape, position, true));
            match (row0, row1) {
                (Some(Row::InputBit { .. }), Some(Row::InputBit { .. })) => continue,
                (Some(Row::InputBit { .. }), _) | (_, Some(Row::InputBit { .. }))
                    if row0.is_some() && row1.is_some() =>
                {
                    return Err(format!(
                        "{tape:?} cell {position}: one value symbolic, the other not"
                    ));
                }
                _ => {}
            }
            if let (Some(Row::Cones(a)), Some(Row::Cones(b))) = (row0, row1) {
                for m in a {
                    for n in b {
                        if m.comparable(n) {
                            return Err(format!(
                                "{tape:?} cell {position}: {m} forces both values"
                            ));
                        }
                    }
                }
            }
            if tape == TapeId::Input && position >= cfg.condition_len as u64 {
                continue;
            }
            fn total(
                row0: Option<&Row>,
                row1: Option<&Row>,
                q: Condition,
                max_len: usize,
            ) -> bool {
                let forced = |r: Option<&Row>| r.is_some_and(|row| row.forces(&q));
                if forced(row0) || forced(row1) {
                    return true;
                }
                let possible =
                    |r: Option<&Row>| r.is_some_and(|row| row.possible_below(&q, max_len));
                if (!possible(row0) && !possible(row1)) || q.len() == max_len {
                    return false;
                }
                total(row0, row1, q.child(false), max_len)
                    && total(row0, row1, q.child(true), max_len)
            }
            if !total(row0, row1, Condition::root(), cfg.condition_len) {
                return Err(format!("{tape:?} cell {position}: some branch never decides it"));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CollapseMismatch {
    pub stage: Ordinal,
    pub fact: Fact,
    /// A condition the concrete input satisfies that forces the violated
    /// fact.
    pub condition: Condition,
}

/// Outcome of running the boolean and concrete simulations side by side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CollapseReport {
    pub steps_compared: usize,
    pub limit_compared: bool,
    pub aborted: Option<ForcingError>,
    pub mismatches: Vec<CollapseMismatch>,
}

impl CollapseReport {
    pub fn passes(&self) -> bool {
        self.mismatches.is_empty() && self.aborted.is_none()
    }
}

enum DirectEnd {
    Halted(usize),
    Cycles { start: usize },
    Lost,
}

/// Checks that everything forced along `x` actually happens when `x` runs:
/// at every successor stage both simulations reach, and at the first
/// `w`-limit when the concrete run gets there.
pub fn collapse_check(p: &Program, x: &Tape, cfg: &ForcingConfig) -> CollapseReport {
    collapse_check_from(p, x, initial_table(p, cfg), cfg)
}

/// [`collapse_check`] from an explicit stage-0 table, so negative controls
/// can start from a deliberately corrupted one.
pub fn collapse_check_from(
    p: &Program,
    x: &Tape,
    t0: ForcedFactTable,
    cfg: &ForcingConfig,
) -> CollapseReport {
    let mut snaps = vec![Snapshot::initial(x.clone())];
    let end = loop {
        if snaps.len() > cfg.max_steps {
            break DirectEnd::Lost;
        }
        match machine::step(p, snaps.last().unwrap(), None) {
            StepResult::Halt(s) => {
                snaps.push(s);
                break DirectEnd::Halted(snaps.len() - 1);
            }
            StepResult::Continue(s) => {
                if let Some(j) = snaps.iter().position(|seen| *seen == s) {
                    break DirectEnd::Cycles { start: j };
                }
                snaps.push(s);
            }
        }
    };

    let mut report = CollapseReport {
        steps_compared: 0,
        limit_compared: false,
        aborted: None,
        mismatches: Vec::new(),
    };
    if matches!(end, DirectEnd::Lost) {
        report.aborted = Some(ForcingError::NoLasso(cfg.max_steps));
    }

    let compare = |table: &ForcedFactTable,
                   stage: Ordinal,
                   snap: &Snapshot,
                   mismatches: &mut Vec<CollapseMismatch>| {
        for (f, row) in &table.entries {
            if let Some(condition) = row.witness_along(x, cfg.condition_len) {
                if !f.holds_in(snap) {
                    mismatches.push(CollapseMismatch { stage: stage.clone(), fact: *f, condition });
                }
            }
        }
    };

    let mut tables = vec![t0];
    loop {
        let n = tables.len() - 1;
        // the concrete snapshot at stage n; a cycling run wraps around
        let snap = match end {
            DirectEnd::Cycles { start } if n >= snaps.len() => {
                &snaps[start + (n - start) % (snaps.len() - start)]
            }
            _ if n < snaps.len() => &snaps[n],
            _ => break,
        };
        compare(&tables[n], Ordinal::nat(n as u64), snap, &mut report.mismatches);
        report.steps_compared += 1;

        match end {
            DirectEnd::Halted(k) if n == k => break,
            DirectEnd::Lost if n + 1 == snaps.len() => break,
            _ => {}
        }
        if let DirectEnd::Cycles { start } = end {
            if (0..n).any(|s| tables[s].same_entries(&tables[n])) {
                match boolean_limit(&tables, cfg) {
                    Ok(limit_table) => {
                        let direct_limit = take_limit(&snaps[start..]);
                        compare(
                            &limit_table,
                            Ordinal::omega(),
                            &direct_limit,
                            &mut report.mismatches,
                        );
                        report.limit_compared = true;
                    }
                    Err(e) => report.aborted = Some(e),
                }
                break;
            }
        }
        if n >= cfg.max_steps {
            report.aborted = Some(ForcingError::NoLasso(n));
            break;
        }
        match boolean_step(p, &tables[n], cfg) {
            Ok(t) => tables.push(t),
            Err(e) => {
                report.aborted = Some(e);
                break;
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::assemble;
    use crate::programs::stdlib_program;
    use proptest::prelude::*;

    fn cond(s: &str) -> Condition {
        s.parse().unwrap()
    }

    fn zeros() -> Tape {
        Tape::new(crate::tape::BitGenerator::Const(false))
    }

    fn cfg() -> ForcingConfig {
        ForcingConfig::default()
    }

    /// start: branch on input cell 0; both arms move right
    fn branch_program() -> Program {
        assemble(
            "state start:\n\
             \x20 on (0,_,_): write same, move R, goto left\n\
             \x20 on (1,_,_): write same, move R, goto right\n\
             state limit:\n  on (_,_,_): write same, move L, goto limit\n\
             state left:\n  on (_,_,_): write same, move L, goto left\n\
             state right:\n  on (_,_,_): write same, move L, goto right\n",
        )
        .unwrap()
    }

    /// copies input cell 0 to work cell 0, then idles in place
    fn copy_idle_program() -> Program {
        assemble(
            "state start:\n\
             \x20 on (0,_,_): write (_,0,_), move L, goto idle\n\
             \x20 on (1,_,_): write (_,1,_), move L, goto idle\n\
             state limit:\n  on (_,_,_): write same, move L, goto idle\n\
             state idle:\n  on (_,_,_): write same, move L, goto idle\n",
        )
        .unwrap()
    }

    #[test]
    fn initial_table_settles_the_start_configuration() {
        let p = stdlib_program("blinker").unwrap();
        let t = initial_table(&p, &cfg());
        let root = Condition::root();
        assert!(forces(&t, &root, Fact::InState(Program::START)));
        assert!(forces(&t, &root, Fact::HeadAt(0)));
        assert!(forces(&t, &root, Fact::cell(TapeId::Work, 7, false)));
        assert!(!forces(&t, &root, Fact::cell(TapeId::Input, 0, true)));
        assert!(forces(&t, &cond("1"), Fact::cell(TapeId::Input, 0, true)));
        assert!(forces(&t, &cond("01"), Fact::cell(TapeId::Input, 1, true)));
        assert!(!forces(&t, &cond("0"), Fact::cell(TapeId::Input, 5, false)));
        assert_eq!(Fact::InState(Program::START).label(&p), "state=start");
        assert_eq!(Fact::cell(TapeId::Input, 3, true).label(&p), "input[3]=1");
        assert!(validate_table(&t, &cfg()).is_ok());
    }

    #[test]
    fn forcing_covers_extensions_and_bars() {
        let p = stdlib_program("blinker").unwrap();
        let mut t = initial_table(&p, &cfg());
        let f = Fact::cell(TapeId::Work, 9, true);
        t.override_row(f, vec![cond("00"), cond("01")]);
        assert!(forces(&t, &cond("00"), f), "extension of a member");
        assert!(forces(&t, &cond("011"), f), "deeper extension");
        assert!(forces(&t, &cond("0"), f), "both children force, so the bar closes");
        assert!(!forces(&t, &Condition::root(), f));
        assert!(!forces(&t, &cond("1"), f));
        t.override_row(f, vec![cond("00")]);
        assert!(!forces(&t, &cond("0"), f), "the 01 branch escapes");
    }

    #[test]
    fn a_branching_step_splits_conditions_and_merges_agreement() {
        let p = branch_program();
        let t0 = initial_table(&p, &cfg());
        let t1 = boolean_step(&p, &t0, &cfg()).unwrap();
        let left = Fact::InState(p.state_by_name("left").unwrap());
        let right = Fact::InState(p.state_by_name("right").unwrap());
        assert!(forces(&t1, &cond("0"), left));
        assert!(forces(&t1, &cond("1"), right));
        assert!(!forces(&t1, &Condition::root(), left));
        assert!(!forces(&t1, &Condition::root(), right));
        // both arms moved right: sibling conditions merge back to the root
        let head_row: Vec<(Fact, RowView)> =
            t1.rows().filter(|(f, _)| matches!(f, Fact::HeadAt(_))).collect();
        assert_eq!(head_row.len(), 1);
        assert_eq!(head_row[0].0, Fact::HeadAt(1));
        assert_eq!(head_row[0].1, RowView::Antichain(&[Condition::root()]));
        // untouched work cells persist wholesale
        assert!(forces(&t1, &Condition::root(), Fact::cell(TapeId::Work, 3, false)));
        assert!(validate_table(&t1, &cfg()).is_ok());
    }

    #[test]
    fn an_input_blind_step_keeps_the_empty_condition_complete() {
        let p = stdlib_program("blinker").unwrap();
        let t1 = boolean_step(&p, &initial_table(&p, &cfg()), &cfg()).unwrap();
        let root = Condition::root();
        assert!(forces(&t1, &root, Fact::InState(Program::START)));
        assert!(forces(&t1, &root, Fact::HeadAt(0)));
        assert!(forces(&t1, &root, Fact::cell(TapeId::Output, 0, true)));
        assert!(forces(&t1, &root, Fact::cell(TapeId::Work, 0, false)));
        // inputs stay open: the step read cell 0 but nothing settles it
        assert!(!forces(&t1, &root, Fact::cell(TapeId::Input, 0, false)));
        assert!(!forces(&t1, &root, Fact::cell(TapeId::Input, 0, true)));
        assert!(forces(&t1, &cond("0"), Fact::cell(TapeId::Input, 0, false)));
        assert!(validate_table(&t1, &cfg()).is_ok());
    }

    #[test]
    fn halting_branches_freeze_and_live_ones_continue() {
        // input 0 sends the machine straight to halt; input 1 keeps marking
        let p = assemble(
            "state start:\n\
             \x20 on (0,_,_): write same, move L, goto halt\n\
             \x20 on (1,_,_): write (_,1,_), move L, goto start\n\
             state limit:\n  on (_,_,_): write same, move L, goto start\n",
        )
        .unwrap();
        let t1 = boolean_step(&p, &initial_table(&p, &cfg()), &cfg()).unwrap();
        assert!(forces(&t1, &cond("0"), Fact::InState(p.halt_state())));
        assert!(forces(&t1, &cond("0"), Fact::cell(TapeId::Work, 0, false)));
        assert!(forces(&t1, &cond("1"), Fact::InState(Program::START)));
        assert!(forces(&t1, &cond("1"), Fact::cell(TapeId::Work, 0, true)));
        let t2 = boolean_step(&p, &t1, &cfg()).unwrap();
        assert!(t2.same_entries(&t1), "one branch frozen, the other in a loop");
        assert!(forces(&t2, &cond("0"), Fact::InState(p.halt_state())));
        assert!(forces(&t2, &cond("0"), Fact::HeadAt(0)));
        assert!(validate_table(&t2, &cfg()).is_ok());
    }

    #[test]
    fn the_limit_of_an_oscillating_cell_reads_one() {
        let p = stdlib_program("blinker").unwrap();
        let mut tables = vec![initial_table(&p, &cfg())];
        for _ in 0..3 {
            let next = boolean_step(&p, tables.last().unwrap(), &cfg()).unwrap();
            tables.push(next);
        }
        let limit = boolean_limit(&tables, &cfg()).unwrap();
        let root = Condition::root();
        assert_eq!(*limit.stage(), Ordinal::omega());
        assert!(forces(&limit, &root, Fact::InState(Program::LIMIT)));
        assert!(forces(&limit, &root, Fact::HeadAt(0)));
        assert!(forces(&limit, &root, Fact::cell(TapeId::Output, 0, true)));
        assert!(!forces(&limit, &root, Fact::cell(TapeId::Output, 0, false)));
        assert!(!forces(&limit, &cond("0"), Fact::cell(TapeId::Output, 0, false)));
        assert!(forces(&limit, &root, Fact::cell(TapeId::Work, 0, false)));
        assert!(validate_table(&limit, &cfg()).is_ok());
    }

    #[test]
    fn limit_rows_follow_the_input() {
        let p = copy_idle_program();
        let mut tables = vec![initial_table(&p, &cfg())];
        loop {
            let next = boolean_step(&p, tables.last().unwrap(), &cfg()).unwrap();
            let repeat = tables.iter().any(|t| t.same_entries(&next));
            tables.push(next);
            if repeat {
                break;
            }
        }
        let limit = boolean_limit(&tables, &cfg()).unwrap();
        assert!(forces(&limit, &cond("0"), Fact::cell(TapeId::Work, 0, false)));
        assert!(forces(&limit, &cond("1"), Fact::cell(TapeId::Work, 0, true)));
        assert!(!forces(&limit, &Condition::root(), Fact::cell(TapeId::Work, 0, false)));
        assert!(!forces(&limit, &Condition::root(), Fact::cell(TapeId::Work, 0, true)));
        assert!(forces(&limit, &cond("01"), Fact::cell(TapeId::Work, 0, false)));
        assert!(validate_table(&limit, &cfg()).is_ok());
    }

    #[test]
    fn phase_shifted_branches_merge_at_the_limit() {
        // input 0 blinks the output immediately, input 1 waits one step
        // first; at the limit both branches have shown 1 cofinally, so the
        // empty condition forces the 1
        let p = assemble(
            "state start:\n\
             \x20 on (0,_,0): write (_,_,1), move L, goto start\n\
             \x20 on (0,_,1): write (_,_,0), move L, goto start\n\
             \x20 on (1,_,_): write same, move L, goto wait\n\
             state limit:\n  on (_,_,_): write same, move L, goto limit\n\
             state wait:\n\
             \x20 on (_,_,0): write (_,_,1), move L, goto wait\n\
             \x20 on (_,_,1): write (_,_,0), move L, goto wait\n",
        )
        .unwrap();
        let mut tables = vec![initial_table(&p, &cfg())];
        loop {
            let next = boolean_step(&p, tables.last().unwrap(), &cfg()).unwrap();
            let repeat = tables.iter().any(|t| t.same_entries(&next));
            tables.push(next);
            if repeat {
                break;
            }
        }
        let limit = boolean_limit(&tables, &cfg()).unwrap();
        assert!(forces(&limit, &Condition::root(), Fact::cell(TapeId::Output, 0, true)));
        for q in ["", "0", "1"] {
            assert!(!forces(&limit, &cond(q), Fact::cell(TapeId::Output, 0, false)));
        }
        assert!(validate_table(&limit, &cfg()).is_ok());
    }

    #[test]
    fn window_and_depth_guards_abort_honestly() {
        let sweeper = assemble(
            "state start:\n  on (_,_,_): write same, move R, goto start\n\
             state limit:\n  on (_,_,_): write same, move R, goto start\n",
        )
        .unwrap();
        let narrow = ForcingConfig { window: 8, ..cfg() };
        let mut t = initial_table(&sweeper, &narrow);
        let err = loop {
            match boolean_step(&sweeper, &t, &narrow) {
                Ok(next) => t = next,
                Err(e) => break e,
            }
        };
        assert_eq!(err, ForcingError::WindowExceeded { head: 8, window: 8 });

        let shallow = ForcingConfig { condition_len: 4, ..cfg() };
        let mut t = initial_table(&sweeper, &shallow);
        let err = loop {
            match boolean_step(&sweeper, &t, &shallow) {
                Ok(next) => t = next,
                Err(e) => break e,
            }
        };
        assert_eq!(
            err,
            ForcingError::CellUndecided { depth: 4, tape: TapeId::Input, position: 4 }
        );

        let p = stdlib_program("blinker").unwrap();
        let lone = initial_table(&p, &cfg());
        assert_eq!(boolean_limit(&[lone], &cfg()), Err(ForcingError::NoLasso(1)));
    }

    #[test]
    fn collapse_agrees_with_concrete_runs() {
        let blinker = stdlib_program("blinker").unwrap();
        let r = collapse_check(&blinker, &zeros(), &cfg());
        assert!(r.passes(), "{:?}", r);
        assert!(r.limit_compared);
        assert!(r.steps_compared >= 2);

        // a genuinely input-dependent branch, concrete input starting with 1
        let copy = copy_idle_program();
        let x: Tape = Tape::new("periodic(1;0)".parse().unwrap());
        let r = collapse_check(&copy, &x, &cfg());
        assert!(r.passes(), "{:?}", r);
        assert!(r.limit_compared);

        // halting run: comparison ends at the halt, no limit taken
        let halt_now = stdlib_program("halt-now").unwrap();
        let r = collapse_check(&halt_now, &zeros(), &cfg());
        assert!(r.passes(), "{:?}", r);
        assert!(!r.limit_compared);
        assert_eq!(r.steps_compared, 2);
    }

    #[test]
    fn corrupted_tables_are_reported_with_stage_and_fact() {
        let p = stdlib_program("blinker").unwrap();
        let mut t0 = initial_table(&p, &cfg());
        let lie = Fact::cell(TapeId::Output, 0, true);
        t0.override_row(lie, vec![Condition::root()]);
        let r = collapse_check_from(&p, &zeros(), t0.clone(), &cfg());
        assert!(!r.passes());
        let first = &r.mismatches[0];
        assert_eq!(first.stage, Ordinal::zero());
        assert_eq!(first.fact, lie);
        assert_eq!(first.condition, Condition::root());
        assert!(validate_table(&t0, &cfg()).is_err(), "0 and 1 both forced at the root");
    }

    #[test]
    fn tables_serialize_for_structured_dumps() {
        let p = stdlib_program("blinker").unwrap();
        let t = initial_table(&p, &cfg());
        let json = serde_json::to_string(&t).unwrap();
        assert!(json.contains("InputBit"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn collapse_passes_for_library_programs_on_periodic_inputs(
            name in prop::sample::select(vec![
                "halt-now", "copy-input", "blinker", "mark-forever",
                "repeat-escape", "halt-at-limit",
            ]),
            head in prop::collection::vec(any::<bool>(), 0..3),
            period in prop::collection::vec(any::<bool>(), 1..4),
        ) {
            let fmt_bits = |bits: &[bool]| -> String {
                bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
            };
            let spec = format!("periodic({};{})", fmt_bits(&head), fmt_bits(&period));
            let x = Tape::new(spec.parse().unwrap());
            let p = stdlib_program(name).unwrap();
            let r = collapse_check(&p, &x, &cfg());
            prop_assert!(r.passes(), "{name} on {spec}: {r:?}");
        }
    }
}
