//! Line-oriented assembly for machine programs.
//!
//! ```text
//! # zero the scanned output bit, forever
//! state start:
//!   on (_,_,1): write (_,_,0), move R, goto start
//!   on (_,_,0): write same, move R, goto start
//! state limit:
//!   on (_,_,_): write same, move L, goto start
//! ```
//!
//! A scan pattern has three components (input, work, output) or four when
//! the program reads an oracle track; all rules in one program must agree
//! on the arity. `_` in a pattern matches both bits; `_` in a write
//! position (and the `write same` shorthand) keeps the scanned bit. When
//! several rules match a scanned combination the one with more literal
//! components wins; an exact tie is an error, as is any uncovered
//! combination. `start`, `limit`, and `halt` are reserved; `halt` may not
//! carry rules and needs no declaration.

use std::fmt::Write as _;

use crate::machine::{Move, Program, State, Transition};

/// Why a text failed to assemble.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AsmError {
    #[error("line {line}, column {col}: expected {expected}")]
    Parse { line: usize, col: usize, expected: &'static str },
    #[error("line {line}: rule appears before any `state` header")]
    RuleOutsideState { line: usize },
    #[error("line {line}: state {name:?} declared twice")]
    DuplicateState { line: usize, name: String },
    #[error("line {line}: the halt state cannot carry rules")]
    RuleOnHalt { line: usize },
    #[error("line {line}: goto target {name:?} is not a declared state")]
    UnknownState { line: usize, name: String },
    #[error("line {line}: scan pattern has {found} components, earlier rules use {expected}")]
    MixedArity { line: usize, expected: usize, found: usize },
    #[error("line {line}: duplicate rule for state {state:?} on {pattern}")]
    DuplicateRule { line: usize, state: String, pattern: String },
    #[error(
        "state {state:?}, scanned {scanned}: matched by equally specific rules on lines {first} and {second}"
    )]
    AmbiguousRules { state: String, scanned: String, first: usize, second: usize },
    #[error("state {state:?}, scanned {scanned}: no rule covers this case")]
    MissingCase { state: String, scanned: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pat {
    Bit(bool),
    Any,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum WriteSpec {
    Bit(bool),
    Keep,
}

#[derive(Debug, Clone)]
struct RawRule {
    pattern: Vec<Pat>,
    write: [WriteSpec; 3],
    mv: Move,
    goto: String,
    line: usize,
}

struct StateBlock {
    name: String,
    rules: Vec<RawRule>,
}

/// Renders a scanned combination the way diagnostics and docs write it.
fn scanned_name(scan: usize, arity: usize) -> String {
    let mut s = String::from("(");
    for c in 0..arity {
        if c > 0 {
            s.push(',');
        }
        s.push(if scan >> c & 1 == 1 { '1' } else { '0' });
    }
    s.push(')');
    s
}

pub fn assemble(text: &str) -> Result<Program, AsmError> {
    let mut blocks: Vec<StateBlock> = Vec::new();
    let mut arity: Option<(usize, usize)> = None; // (components, line fixing it)

    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let content = raw_line.split('#').next().unwrap();
        if content.trim().is_empty() {
            continue;
        }
        let mut c = LineCursor { src: content.as_bytes(), pos: 0, line: line_no };
        if c.eat_word("state") {
            let name = c.ident()?;
            c.expect(":")?;
            c.finish()?;
            if blocks.iter().any(|b| b.name == name) {
                return Err(AsmError::DuplicateState { line: line_no, name });
            }
            blocks.push(StateBlock { name, rules: Vec::new() });
        } else if c.eat_word("on") {
            let rule = c.rule(line_no)?;
            match arity {
                None => arity = Some((rule.pattern.len(), line_no)),
                Some((n, _)) if n != rule.pattern.len() => {
                    return Err(AsmError::MixedArity {
                        line: line_no,
                        expected: n,
                        found: rule.pattern.len(),
                    })
                }
                Some(_) => {}
            }
            let block = blocks
                .last_mut()
                .ok_or(AsmError::RuleOutsideState { line: line_no })?;
            if block.name == "halt" {
                return Err(AsmError::RuleOnHalt { line: line_no });
            }
            if block.rules.iter().any(|r| r.pattern == rule.pattern) {
                return Err(AsmError::DuplicateRule {
                    line: line_no,
                    state: block.name.clone(),
                    pattern: pattern_name(&rule.pattern),
                });
            }
            block.rules.push(rule);
        } else {
            return Err(AsmError::Parse {
                line: line_no,
                col: c.pos + 1,
                expected: "`state` or `on`",
            });
        }
    }

    let uses_oracle = matches!(arity, Some((4, _)));

    // canonical order: start, limit, the rest as declared, halt last
    let mut names = vec!["start".to_string(), "limit".to_string()];
    for b in &blocks {
        if !matches!(b.name.as_str(), "start" | "limit" | "halt") {
            names.push(b.name.clone());
        }
    }
    names.push("halt".to_string());

    let combos = if uses_oracle { 16 } else { 8 };
    let mut table = Vec::with_capacity((names.len() - 1) * combos);
    for state_name in &names[..names.len() - 1] {
        let rules: &[RawRule] = blocks
            .iter()
            .find(|b| &b.name == state_name)
            .map_or(&[], |b| &b.rules);
        for scan in 0..combos {
            let matching = rules.iter().filter(|r| pattern_matches(&r.pattern, scan));
            let mut best: Option<(&RawRule, usize)> = None;
            let mut tie: Option<&RawRule> = None;
            for r in matching {
                let spec = r.pattern.iter().filter(|p| matches!(p, Pat::Bit(_))).count();
                match best {
                    Some((_, s)) if s > spec => {}
                    Some((_, s)) if s == spec => tie = Some(r),
                    _ => {
                        best = Some((r, spec));
                        tie = None;
                    }
                }
            }
            let scanned = || scanned_name(scan, if uses_oracle { 4 } else { 3 });
            let Some((rule, _)) = best else {
                return Err(AsmError::MissingCase { state: state_name.clone(), scanned: scanned() });
            };
            if let Some(other) = tie {
                return Err(AsmError::AmbiguousRules {
                    state: state_name.clone(),
                    scanned: scanned(),
                    first: rule.line.min(other.line),
                    second: rule.line.max(other.line),
                });
            }
            let next = names
                .iter()
                .position(|n| *n == rule.goto)
                .ok_or_else(|| AsmError::UnknownState { line: rule.line, name: rule.goto.clone() })?;
            let mut write = [false; 3];
            for (c, w) in write.iter_mut().enumerate() {
                *w = match rule.write[c] {
                    WriteSpec::Bit(b) => b,
                    WriteSpec::Keep => scan >> c & 1 == 1,
                };
            }
            table.push(Transition {
                write,
                mv: rule.mv,
                next: State(u16::try_from(next).unwrap()),
            });
        }
    }

    Ok(Program::new(names, uses_oracle, table).expect("assembler produced an invalid table"))
}

fn pattern_matches(pattern: &[Pat], scan: usize) -> bool {
    pattern
        .iter()
        .enumerate()
        .all(|(c, p)| match p {
            Pat::Bit(b) => *b == (scan >> c & 1 == 1),
            Pat::Any => true,
        })
}

fn pattern_name(pattern: &[Pat]) -> String {
    let mut s = String::from("(");
    for (i, p) in pattern.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push(match p {
            Pat::Bit(true) => '1',
            Pat::Bit(false) => '0',
            Pat::Any => '_',
        });
    }
    s.push(')');
    s
}

/// Canonical text for a program: every state in index order, every scanned
/// combination spelled out, explicit write triples. Assembling the result
/// reproduces the program exactly.
pub fn disassemble(p: &Program) -> String {
    let mut out = String::new();
    let arity = if p.uses_oracle() { 4 } else { 3 };
    for idx in 0..p.state_count() - 1 {
        let state = State(u16::try_from(idx).unwrap());
        let _ = writeln!(out, "state {}:", p.name_of(state));
        for scan in 0..p.combo_count() {
            let t = p.transition(state, scan);
            let mut w = String::new();
            for (c, b) in t.write.iter().enumerate() {
                if c > 0 {
                    w.push(',');
                }
                w.push(if *b { '1' } else { '0' });
            }
            let _ = writeln!(
                out,
                "  on {}: write ({}), move {}, goto {}",
                scanned_name(scan, arity),
                w,
                match t.mv {
                    Move::Left => "L",
                    Move::Right => "R",
                },
                p.name_of(t.next),
            );
        }
    }
    out
}

struct LineCursor<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
}

impl LineCursor<'_> {
    fn skip_ws(&mut self) {
        while self.src.get(self.pos).is_some_and(|b| *b == b' ' || *b == b'\t') {
            self.pos += 1;
        }
    }

    fn eat(&mut self, lit: &str) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(lit.as_bytes()) {
            self.pos += lit.len();
            true
        } else {
            false
        }
    }

    /// Like `eat` but requires a word boundary, so `state` does not
    /// swallow the prefix of `statex`.
    fn eat_word(&mut self, word: &str) -> bool {
        self.skip_ws();
        let end = self.pos + word.len();
        if self.src[self.pos..].starts_with(word.as_bytes())
            && !self.src.get(end).is_some_and(|b| b.is_ascii_alphanumeric() || *b == b'_' || *b == b'-')
        {
            self.pos = end;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, lit: &'static str) -> Result<(), AsmError> {
        if self.eat(lit) {
            Ok(())
        } else {
            Err(self.err(lit))
        }
    }

    fn err(&self, expected: &'static str) -> AsmError {
        AsmError::Parse { line: self.line, col: self.pos + 1, expected }
    }

    fn ident(&mut self) -> Result<String, AsmError> {
        self.skip_ws();
        let start = self.pos;
        if !self.src.get(self.pos).is_some_and(|b| b.is_ascii_alphabetic()) {
            return Err(self.err("a state name"));
        }
        while self
            .src
            .get(self.pos)
            .is_some_and(|b| b.is_ascii_alphanumeric() || *b == b'_' || *b == b'-')
        {
            self.pos += 1;
        }
        Ok(std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string())
    }

    fn pat_bit(&mut self) -> Result<Pat, AsmError> {
        self.skip_ws();
        let p = match self.src.get(self.pos) {
            Some(b'0') => Pat::Bit(false),
            Some(b'1') => Pat::Bit(true),
            Some(b'_') => Pat::Any,
            _ => return Err(self.err("0, 1, or _")),
        };
        self.pos += 1;
        Ok(p)
    }

    fn finish(&mut self) -> Result<(), AsmError> {
        self.skip_ws();
        if self.pos == self.src.len() {
            Ok(())
        } else {
            Err(self.err("end of line"))
        }
    }

    /// Everything after the `on` keyword.
    fn rule(&mut self, line: usize) -> Result<RawRule, AsmError> {
        self.expect("(")?;
        let mut pattern = vec![self.pat_bit()?];
        while self.eat(",") {
            pattern.push(self.pat_bit()?);
        }
        self.expect(")")?;
        if pattern.len() != 3 && pattern.len() != 4 {
            return Err(self.err("a 3- or 4-component scan pattern"));
        }
        self.expect(":")?;
        if !self.eat_word("write") {
            return Err(self.err("`write`"));
        }
        let write = if self.eat_word("same") {
            [WriteSpec::Keep; 3]
        } else {
            self.expect("(")?;
            let mut w = [WriteSpec::Keep; 3];
            for (c, slot) in w.iter_mut().enumerate() {
                if c > 0 {
                    self.expect(",")?;
                }
                *slot = match self.pat_bit()? {
                    Pat::Bit(b) => WriteSpec::Bit(b),
                    Pat::Any => WriteSpec::Keep,
                };
            }
            self.expect(")")?;
            w
        };
        self.expect(",")?;
        if !self.eat_word("move") {
            return Err(self.err("`move`"));
        }
        self.skip_ws();
        let mv = match self.src.get(self.pos) {
            Some(b'L') => Move::Left,
            Some(b'R') => Move::Right,
            _ => return Err(self.err("L or R")),
        };
        self.pos += 1;
        self.expect(",")?;
        if !self.eat_word("goto") {
            return Err(self.err("`goto`"));
        }
        let goto = self.ident()?;
        self.finish()?;
        Ok(RawRule { pattern, write, mv, goto, line })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "state start:\n  on (_,_,_): write (_,_,1), move R, goto halt\n\
                           state limit:\n  on (_,_,_): write same, move R, goto halt\n";

    #[test]
    fn assembles_the_minimal_total_program() {
        let p = assemble(MINIMAL).unwrap();
        assert_eq!(p.state_count(), 3);
        assert_eq!(p.state_names(), ["start", "limit", "halt"]);
        assert!(!p.uses_oracle());
        // every expansion of the wildcard writes output := 1 and keeps the rest
        for scan in 0..8 {
            let t = p.transition(Program::START, scan);
            assert_eq!(t.write[0], scan & 1 == 1);
            assert_eq!(t.write[1], scan >> 1 & 1 == 1);
            assert!(t.write[2]);
            assert_eq!(t.next, p.halt_state());
        }
    }

    #[test]
    fn specific_rules_beat_wildcards() {
        let p = assemble(
            "state start:\n\
             \x20 on (_,_,_): write same, move R, goto start\n\
             \x20 on (1,_,_): write same, move R, goto halt\n\
             \x20 on (1,1,_): write same, move L, goto limit\n\
             state limit:\n  on (_,_,_): write same, move R, goto halt\n",
        )
        .unwrap();
        assert_eq!(p.transition(Program::START, 0b000).next, Program::START);
        assert_eq!(p.transition(Program::START, 0b001).next, p.halt_state());
        assert_eq!(p.transition(Program::START, 0b011).next, Program::LIMIT);
        assert_eq!(p.transition(Program::START, 0b111).next, Program::LIMIT);
    }

    #[test]
    fn missing_limit_rules_are_rejected() {
        let err = assemble("state start:\n  on (_,_,_): write same, move R, goto halt\n");
        assert_eq!(
            err.unwrap_err(),
            AsmError::MissingCase { state: "limit".into(), scanned: "(0,0,0)".into() }
        );
    }

    #[test]
    fn partial_coverage_names_the_first_uncovered_case() {
        let err = assemble(
            "state start:\n  on (1,_,_): write same, move R, goto halt\n\
             state limit:\n  on (_,_,_): write same, move R, goto halt\n",
        );
        assert_eq!(
            err.unwrap_err(),
            AsmError::MissingCase { state: "start".into(), scanned: "(0,0,0)".into() }
        );
    }

    #[test]
    fn equally_specific_overlap_is_ambiguous() {
        let err = assemble(
            "state start:\n\
             \x20 on (0,_,_): write same, move R, goto halt\n\
             \x20 on (_,1,_): write same, move R, goto halt\n\
             \x20 on (_,_,_): write same, move R, goto halt\n\
             state limit:\n  on (_,_,_): write same, move R, goto halt\n",
        );
        assert_eq!(
            err.unwrap_err(),
            AsmError::AmbiguousRules {
                state: "start".into(),
                scanned: "(0,1,0)".into(),
                first: 2,
                second: 3,
            }
        );
    }

    #[test]
    fn other_semantic_errors() {
        let dup = "state start:\n  on (_,_,_): write same, move R, goto halt\n\
                   \x20 on (_,_,_): write same, move L, goto halt\n";
        assert!(matches!(assemble(dup), Err(AsmError::DuplicateRule { line: 3, .. })));

        let unknown = "state start:\n  on (_,_,_): write same, move R, goto nowhere\n\
                       state limit:\n  on (_,_,_): write same, move R, goto halt\n";
        assert!(matches!(assemble(unknown), Err(AsmError::UnknownState { line: 2, .. })));

        let on_halt = "state halt:\n  on (_,_,_): write same, move R, goto halt\n";
        assert!(matches!(assemble(on_halt), Err(AsmError::RuleOnHalt { line: 2 })));

        let mixed = "state start:\n  on (_,_,_): write same, move R, goto halt\n\
                     \x20 on (_,_,_,1): write same, move R, goto halt\n";
        assert!(matches!(
            assemble(mixed),
            Err(AsmError::MixedArity { line: 3, expected: 3, found: 4 })
        ));

        let orphan = "on (_,_,_): write same, move R, goto halt\n";
        assert!(matches!(assemble(orphan), Err(AsmError::RuleOutsideState { line: 1 })));

        let redeclared = "state start:\n  on (_,_,_): write same, move R, goto halt\nstate start:\n";
        assert!(matches!(assemble(redeclared), Err(AsmError::DuplicateState { line: 3, .. })));
    }

    #[test]
    fn parse_errors_carry_position() {
        assert_eq!(
            assemble("state start\n").unwrap_err(),
            AsmError::Parse { line: 1, col: 12, expected: ":" }
        );
        assert!(matches!(
            assemble("state start:\n  on (2,_,_): write same, move R, goto halt\n").unwrap_err(),
            AsmError::Parse { line: 2, col: 7, .. }
        ));
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let text = format!("# a comment\n\n{MINIMAL}  # trailing comment\n");
        assert!(assemble(&text).is_ok());
    }

    #[test]
    fn disassemble_round_trips() {
        let p = assemble(MINIMAL).unwrap();
        assert_eq!(assemble(&disassemble(&p)).unwrap(), p);

        let oracle = assemble(
            "state start:\n  on (_,_,_,0): write (_,_,0), move R, goto s2\n\
             \x20 on (_,_,_,1): write (_,_,1), move R, goto s2\n\
             state s2:\n  on (_,_,_,_): write same, move L, goto halt\n\
             state limit:\n  on (_,_,_,_): write same, move R, goto halt\n",
        )
        .unwrap();
        assert_eq!(oracle.state_names(), ["start", "limit", "s2", "halt"]);
        assert_eq!(assemble(&disassemble(&oracle)).unwrap(), oracle);
    }
}
