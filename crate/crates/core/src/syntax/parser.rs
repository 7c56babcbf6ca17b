use std::collections::{BTreeSet, HashMap, HashSet};

use thiserror::Error;

use super::{Atom, Constraint, Program, Rule};
use crate::state::State;
use crate::terms::{name, Name, Substitutable, Term, Var};

/// Prefix reserved for generated variables.
pub const RESERVED_PREFIX: &str = "__";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("duplicate rule name `{0}`")]
    DuplicateRule(String),
    #[error("rule `{0}` has both heads empty")]
    EmptyHeads(String),
    #[error("`{symbol}` used with arity {found}, previously {expected}")]
    ArityClash {
        symbol: String,
        expected: usize,
        found: usize,
    },
    #[error("variable `{0}` uses the reserved prefix `__`")]
    ReservedVariable(String),
    #[error("invalid character `{0}`")]
    BadChar(char),
    #[error("expected {expected}, found {found}")]
    Unexpected { expected: String, found: String },
    #[error("user atom `{0}` is not allowed in a guard")]
    AtomInGuard(String),
    #[error("`{0}` is not a valid atom")]
    NotAnAtom(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Var(String),
    Ident(String),
    Int(String),
    LParen,
    RParen,
    Comma,
    Dot,
    At,
    Backslash,
    Simp,
    Prop,
    Bar,
    Semi,
    Equals,
    Plus,
    Hash,
    Colon,
    FalseState,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Var(s) | Tok::Ident(s) | Tok::Int(s) => format!("`{s}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::At => "`@`".into(),
            Tok::Backslash => "`\\`".into(),
            Tok::Simp => "`<=>`".into(),
            Tok::Prop => "`==>`".into(),
            Tok::Bar => "`|`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Equals => "`=`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Hash => "`#`".into(),
            Tok::Colon => "`:`".into(),
            Tok::FalseState => "`<false>`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let mut push = |tok: Tok, len: usize, i: &mut usize, col: &mut usize| {
            out.push(Spanned {
                tok,
                line: l0,
                column: c0,
            });
            *i += len;
            *col += len;
        };
        let starts = |s: &str| chars[i..].iter().take(s.len()).copied().eq(s.chars());
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
            }
            '%' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '(' => push(Tok::LParen, 1, &mut i, &mut col),
            ')' => push(Tok::RParen, 1, &mut i, &mut col),
            ',' => push(Tok::Comma, 1, &mut i, &mut col),
            '.' => push(Tok::Dot, 1, &mut i, &mut col),
            '@' => push(Tok::At, 1, &mut i, &mut col),
            '\\' => push(Tok::Backslash, 1, &mut i, &mut col),
            '|' => push(Tok::Bar, 1, &mut i, &mut col),
            ';' => push(Tok::Semi, 1, &mut i, &mut col),
            '+' => push(Tok::Plus, 1, &mut i, &mut col),
            '#' => push(Tok::Hash, 1, &mut i, &mut col),
            ':' => push(Tok::Colon, 1, &mut i, &mut col),
            '<' if starts("<=>") => push(Tok::Simp, 3, &mut i, &mut col),
            '<' if starts("<false>") => push(Tok::FalseState, 7, &mut i, &mut col),
            '=' if starts("==>") => push(Tok::Prop, 3, &mut i, &mut col),
            '=' => push(Tok::Equals, 1, &mut i, &mut col),
            c if c.is_ascii_alphanumeric() || c == '_' => {
                let mut j = i;
                if c.is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                } else {
                    while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                        j += 1;
                    }
                }
                let word: String = chars[i..j].iter().collect();
                let tok = if c.is_ascii_digit() {
                    Tok::Int(word)
                } else if c.is_ascii_uppercase() || c == '_' {
                    Tok::Var(word)
                } else {
                    Tok::Ident(word)
                };
                let len = j - i;
                push(tok, len, &mut i, &mut col);
            }
            other => {
                return Err(ParseError {
                    line,
                    column: col,
                    kind: ParseErrorKind::BadChar(other),
                })
            }
        }
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}

/// A body or guard item before it is sorted into user/built-in parts.
enum Goal {
    Top,
    Builtin(Constraint),
    User(Atom),
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    preds: HashMap<Name, usize>,
    functors: HashMap<Name, usize>,
    anon: u32,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn new(text: &str) -> PResult<Parser> {
        Ok(Parser {
            toks: lex(text)?,
            pos: 0,
            preds: HashMap::new(),
            functors: HashMap::new(),
            anon: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.column)
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err_at(&self, (line, column): (usize, usize), kind: ParseErrorKind) -> ParseError {
        ParseError { line, column, kind }
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        self.err_at(
            self.here(),
            ParseErrorKind::Unexpected {
                expected: expected.to_string(),
                found: self.peek().describe(),
            },
        )
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> PResult<()> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(expected))
        }
    }

    fn check_arity(&mut self, at: (usize, usize), sym: &Name, arity: usize, predicate: bool) -> PResult<()> {
        let table = if predicate { &mut self.preds } else { &mut self.functors };
        match table.get(sym) {
            Some(&a) if a != arity => Err(ParseError {
                line: at.0,
                column: at.1,
                kind: ParseErrorKind::ArityClash {
                    symbol: sym.to_string(),
                    expected: a,
                    found: arity,
                },
            }),
            Some(_) => Ok(()),
            None => {
                table.insert(sym.clone(), arity);
                Ok(())
            }
        }
    }

    fn term(&mut self) -> PResult<Term> {
        let mut lhs = self.primary()?;
        while *self.peek() == Tok::Plus {
            let at = self.here();
            self.bump();
            let rhs = self.primary()?;
            let plus = name("+");
            self.check_arity(at, &plus, 2, false)?;
            lhs = Term::App(plus, vec![lhs, rhs]);
        }
        Ok(lhs)
    }

    fn primary(&mut self) -> PResult<Term> {
        let at = self.here();
        match self.peek().clone() {
            Tok::Var(v) => {
                self.bump();
                if v == "_" {
                    self.anon += 1;
                    return Ok(Term::Var(Var::Fresh {
                        base: name("_"),
                        id: self.anon,
                    }));
                }
                if v.starts_with(RESERVED_PREFIX) {
                    return Err(self.err_at(at, ParseErrorKind::ReservedVariable(v)));
                }
                Ok(Term::var(&v))
            }
            Tok::Int(n) => {
                self.bump();
                let sym = name(&n);
                self.check_arity(at, &sym, 0, false)?;
                Ok(Term::App(sym, Vec::new()))
            }
            Tok::Ident(f) => {
                self.bump();
                let args = self.args()?;
                let sym = name(&f);
                self.check_arity(at, &sym, args.len(), false)?;
                Ok(Term::App(sym, args))
            }
            Tok::LParen => {
                self.bump();
                let t = self.term()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(t)
            }
            _ => Err(self.unexpected("a term")),
        }
    }

    fn args(&mut self) -> PResult<Vec<Term>> {
        let mut args = Vec::new();
        if *self.peek() == Tok::LParen {
            self.bump();
            loop {
                args.push(self.term()?);
                match self.bump() {
                    Tok::Comma => continue,
                    Tok::RParen => break,
                    _ => {
                        self.pos -= 1;
                        return Err(self.unexpected("`,` or `)`"));
                    }
                }
            }
        }
        Ok(args)
    }

    /// Parses a user atom; the argument terms share the functor table but
    /// the predicate goes to its own table.
    fn atom(&mut self) -> PResult<Atom> {
        let at = self.here();
        match self.peek().clone() {
            Tok::Ident(p) if p != "true" && p != "false" => {
                self.bump();
                let args = self.args()?;
                let pred = name(&p);
                self.check_arity(at, &pred, args.len(), true)?;
                Ok(Atom { pred, args })
            }
            _ => Err(self.unexpected("a user atom")),
        }
    }

    fn goal(&mut self) -> PResult<Goal> {
        let at = self.here();
        match self.peek().clone() {
            Tok::Ident(w) if w == "true" || w == "false" => {
                let save = self.pos;
                self.bump();
                if *self.peek() != Tok::Equals && *self.peek() != Tok::LParen {
                    return Ok(if w == "true" {
                        Goal::Top
                    } else {
                        Goal::Builtin(Constraint::False)
                    });
                }
                self.pos = save;
            }
            _ => {}
        }
        if let Tok::Ident(_) = self.peek() {
            // Look ahead: an atom unless followed by `=` or `+`.
            let save = self.pos;
            let saved_preds = self.preds.clone();
            let saved_functors = self.functors.clone();
            let atom_err = match self.atom() {
                Ok(a) if !matches!(self.peek(), Tok::Equals | Tok::Plus) => {
                    return Ok(Goal::User(a));
                }
                Ok(_) => None,
                Err(e) => Some(e),
            };
            self.pos = save;
            self.preds = saved_preds;
            self.functors = saved_functors;
            let lhs = self.term()?;
            if *self.peek() != Tok::Equals {
                return Err(atom_err.unwrap_or_else(|| self.err_at(at, ParseErrorKind::NotAnAtom(lhs.to_string()))));
            }
            return self.equation(lhs);
        }
        let lhs = self.term()?;
        if *self.peek() == Tok::Equals {
            self.equation(lhs)
        } else {
            Err(self.err_at(at, ParseErrorKind::NotAnAtom(lhs.to_string())))
        }
    }

    fn equation(&mut self, lhs: Term) -> PResult<Goal> {
        self.bump();
        let rhs = self.term()?;
        Ok(Goal::Builtin(Constraint::Eq(lhs, rhs)))
    }

    /// Comma (or semicolon) separated goals; returns whether a `;` was seen.
    fn goals(&mut self) -> PResult<(Vec<Goal>, bool)> {
        let mut out = vec![self.goal()?];
        let mut semi = false;
        loop {
            match self.peek() {
                Tok::Comma => {
                    self.bump();
                }
                Tok::Semi => {
                    semi = true;
                    self.bump();
                }
                _ => break,
            }
            out.push(self.goal()?);
        }
        Ok((out, semi))
    }

    fn head_list(&mut self) -> PResult<Vec<Atom>> {
        let mut out = Vec::new();
        if matches!(self.peek(), Tok::Simp | Tok::Prop | Tok::Backslash) {
            return Ok(out);
        }
        loop {
            out.push(self.atom()?);
            if *self.peek() == Tok::Comma {
                self.bump();
            } else {
                break;
            }
        }
        Ok(out)
    }

    fn rule(&mut self) -> PResult<Rule> {
        let rule_at = self.here();
        let rname = match self.bump() {
            Tok::Ident(n) => n,
            _ => {
                self.pos -= 1;
                return Err(self.unexpected("a rule name"));
            }
        };
        self.expect(Tok::At, "`@`")?;
        let first = self.head_list()?;
        let (kept, removed) = match self.peek() {
            Tok::Backslash => {
                self.bump();
                let second = self.head_list()?;
                self.expect(Tok::Simp, "`<=>`")?;
                (first, second)
            }
            Tok::Simp => {
                self.bump();
                (Vec::new(), first)
            }
            Tok::Prop => {
                self.bump();
                (first, Vec::new())
            }
            _ => return Err(self.unexpected("`\\`, `<=>` or `==>`")),
        };
        if kept.is_empty() && removed.is_empty() {
            return Err(self.err_at(rule_at, ParseErrorKind::EmptyHeads(rname)));
        }
        let (first_goals, semi) = self.goals()?;
        let (guard_goals, body_goals) = if *self.peek() == Tok::Bar {
            if semi {
                return Err(self.unexpected("`.`"));
            }
            self.bump();
            (first_goals, self.goals()?.0)
        } else {
            (Vec::new(), first_goals)
        };
        let mut guard = Vec::new();
        for g in guard_goals {
            match g {
                Goal::Top => {}
                Goal::Builtin(c) => guard.push(c),
                Goal::User(a) => return Err(self.err_at(rule_at, ParseErrorKind::AtomInGuard(a.to_string()))),
            }
        }
        let (mut user_body, mut builtin_body) = (Vec::new(), Vec::new());
        for g in body_goals {
            match g {
                Goal::Top => {}
                Goal::Builtin(c) => builtin_body.push(c),
                Goal::User(a) => user_body.push(a),
            }
        }
        self.expect(Tok::Dot, "`.`")?;
        Ok(Rule {
            name: name(&rname),
            kept,
            removed,
            guard,
            user_body,
            builtin_body,
        })
    }

    fn program(&mut self) -> PResult<Program> {
        let mut rules = Vec::new();
        let mut seen = HashSet::new();
        while *self.peek() != Tok::Eof {
            let at = self.here();
            let r = self.rule()?;
            if !seen.insert(r.name.clone()) {
                return Err(self.err_at(at, ParseErrorKind::DuplicateRule(r.name.to_string())));
            }
            rules.push(r);
        }
        Ok(Program { rules })
    }

    fn state(&mut self) -> PResult<State> {
        let mut user = Vec::new();
        let mut builtin = Vec::new();
        if *self.peek() == Tok::FalseState {
            self.bump();
            builtin.push(Constraint::False);
        } else if !matches!(self.peek(), Tok::Hash | Tok::Eof) {
            for g in self.goals()?.0 {
                match g {
                    Goal::Top => {}
                    Goal::Builtin(c) => builtin.push(c),
                    Goal::User(a) => user.push(a),
                }
            }
        }
        let globals = if *self.peek() == Tok::Hash {
            self.bump();
            match self.bump() {
                Tok::Ident(w) if w == "globals" => {}
                _ => {
                    self.pos -= 1;
                    return Err(self.unexpected("`globals`"));
                }
            }
            self.expect(Tok::Colon, "`:`")?;
            let mut gs = BTreeSet::new();
            while let Tok::Var(v) = self.peek().clone() {
                let at = self.here();
                if v.starts_with(RESERVED_PREFIX) {
                    return Err(self.err_at(at, ParseErrorKind::ReservedVariable(v)));
                }
                self.bump();
                gs.insert(Var::named(&v));
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
            Some(gs)
        } else {
            None
        };
        if *self.peek() == Tok::Dot {
            self.bump();
        }
        if *self.peek() != Tok::Eof {
            return Err(self.unexpected("end of input"));
        }
        let mut state = State::new(user, builtin, BTreeSet::new());
        state.globals = globals.unwrap_or_else(|| state.vars());
        Ok(state)
    }
}

/// Parses a `.chr` program.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    Parser::new(text)?.program()
}

/// Parses a query such as `leq(X,Y), leq(Y,X) # globals: X, Y`. Without a
/// `# globals:` clause every free variable is global.
pub fn parse_state(text: &str) -> Result<State, ParseError> {
    Parser::new(text)?.state()
}
