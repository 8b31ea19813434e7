//! The `.krama` plan language.
//!
//! A document is line oriented: one declaration, instruction or
//! composition per line, `#` starts a comment.
//!
//! ```text
//! object rice : raw
//! action pick(x) requires x=raw yields x=held
//! prop ready
//! intend(ready, served)
//! i1: pick(rice) when ready for served after i0
//! seq i1 -> i2 -> i3
//! artha i1 i2 i3
//! repeat stepwise prime coat over [p1 p2; p1 p2]
//! formula ((pick{rice} ->i cook{rice,pot}) ->p served)
//! ```

mod document;
mod format;
mod lexer;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use indexmap::IndexMap;
use serde::Serialize;
use thiserror::Error;

use crate::domain::{
    ActionEffect, ActionName, CoreError, Instruction, Label, Model, ObjectId, Proposition, StateLabel, WorldState,
};
use crate::formula::Formula;
use crate::sequencing::ObjectMatrix;

pub use document::{AnnotatedInstruction, CompositionRequest, DependencyMode, PlanDocument, Step};
pub use format::format_plan;
use lexer::{tokenize_line, Pos, Tok, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ParseErrorKind {
    Syntax,
    Resolution,
    Arity,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParseErrorKind::Syntax => "syntax error",
            ParseErrorKind::Resolution => "resolution error",
            ParseErrorKind::Arity => "arity error",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("{line}:{column}: {kind}: {message}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    pub(crate) fn new(kind: ParseErrorKind, pos: Pos, message: impl Into<String>) -> Self {
        Self {
            kind,
            line: pos.line,
            column: pos.column,
            message: message.into(),
        }
    }
}

const RESERVED: &[&str] = &[
    "object",
    "action",
    "prop",
    "intend",
    "seq",
    "artha",
    "repeat",
    "formula",
    "sequential",
    "stepwise",
    "over",
    "requires",
    "yields",
    "when",
    "for",
    "after",
];

type Result<T> = std::result::Result<T, ParseError>;

/// An identifier with the position it was read from.
#[derive(Debug, Clone)]
struct Name {
    text: String,
    pos: Pos,
}

struct Binding {
    param: Name,
    state: Name,
}

struct ActionDecl {
    name: Name,
    params: Vec<Name>,
    requires: Vec<Binding>,
    yields: Vec<Binding>,
}

struct InstrDecl {
    label: Name,
    action: Name,
    args: Vec<Name>,
    when: Option<Name>,
    purpose: Option<Name>,
    after: Option<Name>,
}

enum MatrixSyntax {
    Broadcast(Vec<Name>),
    Rows(Vec<Vec<Name>>),
}

enum ComposeDecl {
    Seq(Vec<Name>),
    Artha(Vec<Name>),
    Repeat {
        stepwise: bool,
        actions: Vec<Name>,
        matrix: MatrixSyntax,
        pos: Pos,
    },
    Formula(FormulaSyntax),
}

/// Unresolved formula tree; atoms keep source positions for error reports.
enum FormulaSyntax {
    Atom(Name, Vec<Name>),
    Purpose(Box<FormulaSyntax>, Name),
    Reason(Name, Box<FormulaSyntax>),
    Seq(Box<FormulaSyntax>, Box<FormulaSyntax>),
    Par(Box<FormulaSyntax>, Box<FormulaSyntax>),
    Choice(Box<FormulaSyntax>, Box<FormulaSyntax>),
    Group(Vec<FormulaSyntax>),
}

#[derive(Default)]
struct Raw {
    objects: Vec<(Name, Name)>,
    actions: Vec<ActionDecl>,
    props: Vec<Name>,
    intends: Vec<(Name, Name)>,
    instrs: Vec<InstrDecl>,
    compose: Option<(Pos, ComposeDecl)>,
}

/// Cursor over the tokens of one line.
struct Cursor<'a> {
    toks: &'a [Token],
    k: usize,
    end: Pos,
}

impl<'a> Cursor<'a> {
    fn new(toks: &'a [Token], line_no: usize, line_len: usize) -> Self {
        Self {
            toks,
            k: 0,
            end: Pos {
                line: line_no,
                column: line_len + 1,
            },
        }
    }

    fn peek(&self) -> Option<&'a Tok> {
        self.toks.get(self.k).map(|t| &t.tok)
    }

    fn peek_at(&self, n: usize) -> Option<&'a Tok> {
        self.toks.get(self.k + n).map(|t| &t.tok)
    }

    fn pos(&self) -> Pos {
        self.toks.get(self.k).map_or(self.end, |t| t.pos)
    }

    fn at_end(&self) -> bool {
        self.k >= self.toks.len()
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError::new(ParseErrorKind::Syntax, self.pos(), message)
    }

    fn found(&self) -> String {
        self.peek().map_or_else(|| "end of line".to_string(), Tok::describe)
    }

    fn expect(&mut self, want: Tok) -> Result<Pos> {
        if self.peek() == Some(&want) {
            let pos = self.pos();
            self.k += 1;
            Ok(pos)
        } else {
            Err(self.error(format!("expected {}, found {}", want.describe(), self.found())))
        }
    }

    fn eat(&mut self, want: &Tok) -> bool {
        if self.peek() == Some(want) {
            self.k += 1;
            true
        } else {
            false
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.k += 1;
            true
        } else {
            false
        }
    }

    /// Any identifier, reserved or not.
    fn word(&mut self) -> Result<Name> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let name = Name {
                    text: s.clone(),
                    pos: self.pos(),
                };
                self.k += 1;
                Ok(name)
            }
            _ => Err(self.error(format!("expected identifier, found {}", self.found()))),
        }
    }

    /// An identifier that is not a reserved word.
    fn name(&mut self) -> Result<Name> {
        let pos = self.pos();
        let name = self.word()?;
        if RESERVED.contains(&name.text.as_str()) {
            return Err(ParseError::new(
                ParseErrorKind::Syntax,
                pos,
                format!("`{}` is a reserved word", name.text),
            ));
        }
        Ok(name)
    }

    fn finish(&self) -> Result<()> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.error(format!("unexpected {}", self.found())))
        }
    }

    /// `ID ("," ID)*` up to (not including) `close`; may be empty.
    fn name_list(&mut self, close: &Tok) -> Result<Vec<Name>> {
        let mut out = Vec::new();
        if self.peek() == Some(close) {
            return Ok(out);
        }
        loop {
            out.push(self.name()?);
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        Ok(out)
    }
}

/// Parses a plan document.
pub fn parse_plan(text: &str) -> Result<PlanDocument> {
    let mut raw = Raw::default();
    let mut any = false;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let toks = tokenize_line(line, line_no)?;
        if toks.is_empty() {
            continue;
        }
        any = true;
        let mut cur = Cursor::new(&toks, line_no, line.chars().count());
        statement(&mut cur, &mut raw)?;
        cur.finish()?;
    }
    if !any {
        return Err(ParseError::new(
            ParseErrorKind::Syntax,
            Pos { line: 1, column: 1 },
            "empty plan document",
        ));
    }
    resolve(raw)
}

/// Parses a standalone formula such as `((pick{rice} ->i cook{rice,pot}) ->p fed)`.
///
/// Identifiers are only checked for well-formedness, not resolved against
/// any model.
pub fn parse_formula(text: &str) -> Result<Formula> {
    let toks = tokenize_line(text, 1)?;
    let mut cur = Cursor::new(&toks, 1, text.chars().count());
    let syn = formula_term(&mut cur)?;
    cur.finish()?;
    unchecked_formula(syn)
}

fn statement(cur: &mut Cursor<'_>, raw: &mut Raw) -> Result<()> {
    let start = cur.pos();
    let head = match cur.peek() {
        Some(Tok::Ident(s)) => s.clone(),
        _ => return Err(cur.error(format!("expected a statement, found {}", cur.found()))),
    };
    match head.as_str() {
        "object" => {
            cur.k += 1;
            let name = cur.name()?;
            cur.expect(Tok::Colon)?;
            let state = cur.name()?;
            raw.objects.push((name, state));
        }
        "action" => {
            cur.k += 1;
            let name = cur.name()?;
            cur.expect(Tok::LParen)?;
            let params = cur.name_list(&Tok::RParen)?;
            cur.expect(Tok::RParen)?;
            let requires = if cur.eat_keyword("requires") {
                bindings(cur)?
            } else {
                vec![]
            };
            let yields = if cur.eat_keyword("yields") {
                bindings(cur)?
            } else {
                vec![]
            };
            raw.actions.push(ActionDecl {
                name,
                params,
                requires,
                yields,
            });
        }
        "prop" => {
            cur.k += 1;
            raw.props.push(cur.name()?);
        }
        "intend" => {
            cur.k += 1;
            cur.expect(Tok::LParen)?;
            let r = cur.name()?;
            cur.expect(Tok::Comma)?;
            let p = cur.name()?;
            cur.expect(Tok::RParen)?;
            raw.intends.push((r, p));
        }
        "seq" => {
            cur.k += 1;
            let mut labels = vec![cur.name()?];
            while cur.eat(&Tok::Arrow) {
                labels.push(cur.name()?);
            }
            set_compose(raw, start, ComposeDecl::Seq(labels))?;
        }
        "artha" => {
            cur.k += 1;
            let mut labels = vec![cur.name()?];
            while !cur.at_end() {
                labels.push(cur.name()?);
            }
            set_compose(raw, start, ComposeDecl::Artha(labels))?;
        }
        "repeat" => {
            cur.k += 1;
            let stepwise = if cur.eat_keyword("stepwise") {
                true
            } else if cur.eat_keyword("sequential") {
                false
            } else {
                return Err(cur.error(format!("expected `sequential` or `stepwise`, found {}", cur.found())));
            };
            let mut actions = vec![cur.name()?];
            while !cur.is_keyword("over") && !cur.at_end() {
                actions.push(cur.name()?);
            }
            if !cur.eat_keyword("over") {
                return Err(cur.error("expected `over` followed by an object matrix"));
            }
            let matrix = matrix(cur)?;
            set_compose(
                raw,
                start,
                ComposeDecl::Repeat {
                    stepwise,
                    actions,
                    matrix,
                    pos: start,
                },
            )?;
        }
        "formula" => {
            cur.k += 1;
            let f = formula_term(cur)?;
            set_compose(raw, start, ComposeDecl::Formula(f))?;
        }
        _ if cur.peek_at(1) == Some(&Tok::Colon) => {
            let label = cur.name()?;
            cur.expect(Tok::Colon)?;
            let action = cur.name()?;
            cur.expect(Tok::LParen)?;
            let args = cur.name_list(&Tok::RParen)?;
            cur.expect(Tok::RParen)?;
            let when = if cur.eat_keyword("when") {
                Some(cur.name()?)
            } else {
                None
            };
            let purpose = if cur.eat_keyword("for") {
                Some(cur.name()?)
            } else {
                None
            };
            let after = if cur.eat_keyword("after") {
                Some(cur.name()?)
            } else {
                None
            };
            raw.instrs.push(InstrDecl {
                label,
                action,
                args,
                when,
                purpose,
                after,
            });
        }
        _ => {
            return Err(cur.error(format!("unknown statement starting with `{head}`")));
        }
    }
    Ok(())
}

fn set_compose(raw: &mut Raw, pos: Pos, decl: ComposeDecl) -> Result<()> {
    if raw.compose.is_some() {
        return Err(ParseError::new(
            ParseErrorKind::Syntax,
            pos,
            "a document may contain only one composition statement",
        ));
    }
    raw.compose = Some((pos, decl));
    Ok(())
}

fn bindings(cur: &mut Cursor<'_>) -> Result<Vec<Binding>> {
    let mut out = Vec::new();
    loop {
        let param = cur.name()?;
        cur.expect(Tok::Eq)?;
        let state = cur.name()?;
        out.push(Binding { param, state });
        if !cur.eat(&Tok::Comma) {
            break;
        }
    }
    Ok(out)
}

fn matrix(cur: &mut Cursor<'_>) -> Result<MatrixSyntax> {
    if cur.eat(&Tok::LBracket) {
        let mut rows = vec![];
        let mut row = vec![];
        loop {
            match cur.peek() {
                Some(Tok::RBracket) => {
                    cur.k += 1;
                    rows.push(std::mem::take(&mut row));
                    break;
                }
                Some(Tok::Semicolon) => {
                    cur.k += 1;
                    rows.push(std::mem::take(&mut row));
                }
                Some(Tok::Comma) => cur.k += 1,
                _ => row.push(cur.name()?),
            }
        }
        Ok(MatrixSyntax::Rows(rows))
    } else {
        let mut row = vec![];
        while !cur.at_end() {
            if !cur.eat(&Tok::Comma) {
                row.push(cur.name()?);
            }
        }
        if row.is_empty() {
            return Err(cur.error("expected objects after `over`"));
        }
        Ok(MatrixSyntax::Broadcast(row))
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum OpKind {
    Seq,
    Par,
    Choice,
    Group,
    Purpose,
}

fn op_kind(t: Option<&Tok>) -> Option<OpKind> {
    match t? {
        Tok::SeqOp => Some(OpKind::Seq),
        Tok::ParOp => Some(OpKind::Par),
        Tok::ChoiceOp => Some(OpKind::Choice),
        Tok::GroupOp => Some(OpKind::Group),
        Tok::PurposeOp => Some(OpKind::Purpose),
        _ => None,
    }
}

fn formula_term(cur: &mut Cursor<'_>) -> Result<FormulaSyntax> {
    match cur.peek() {
        Some(Tok::Ident(_)) => {
            let action = cur.name()?;
            cur.expect(Tok::LBrace)?;
            let objects = cur.name_list(&Tok::RBrace)?;
            cur.expect(Tok::RBrace)?;
            Ok(FormulaSyntax::Atom(action, objects))
        }
        Some(Tok::LParen) => {
            cur.k += 1;
            let f = formula_inner(cur)?;
            cur.expect(Tok::RParen)?;
            Ok(f)
        }
        _ => Err(cur.error(format!("expected a formula, found {}", cur.found()))),
    }
}

fn formula_inner(cur: &mut Cursor<'_>) -> Result<FormulaSyntax> {
    if matches!(cur.peek(), Some(Tok::Ident(_))) && cur.peek_at(1) == Some(&Tok::ReasonOp) {
        let r = cur.name()?;
        cur.k += 1;
        let f = formula_term(cur)?;
        return Ok(FormulaSyntax::Reason(r, Box::new(f)));
    }
    if cur.eat(&Tok::GroupOp) {
        return Ok(FormulaSyntax::Group(vec![formula_term(cur)?]));
    }
    let first = formula_term(cur)?;
    let Some(kind) = op_kind(cur.peek()) else {
        return Ok(first);
    };
    if kind == OpKind::Purpose {
        cur.k += 1;
        let p = cur.name()?;
        if op_kind(cur.peek()).is_some() {
            return Err(cur.error("`->p` must be the only operator inside its parentheses"));
        }
        return Ok(FormulaSyntax::Purpose(Box::new(first), p));
    }
    let mut operands = vec![first];
    while let Some(k) = op_kind(cur.peek()) {
        if k != kind {
            return Err(cur.error("mixed operators need explicit parentheses"));
        }
        cur.k += 1;
        operands.push(formula_term(cur)?);
    }
    let fold = |ctor: fn(Box<FormulaSyntax>, Box<FormulaSyntax>) -> FormulaSyntax, ops: Vec<FormulaSyntax>| {
        ops.into_iter()
            .reduce(|a, b| ctor(Box::new(a), Box::new(b)))
            .expect("at least two operands")
    };
    Ok(match kind {
        OpKind::Seq => fold(FormulaSyntax::Seq, operands),
        OpKind::Par => fold(FormulaSyntax::Par, operands),
        OpKind::Choice => fold(FormulaSyntax::Choice, operands),
        OpKind::Group => FormulaSyntax::Group(operands),
        OpKind::Purpose => unreachable!(),
    })
}

fn core_error(pos: Pos, kind: ParseErrorKind, e: CoreError) -> ParseError {
    ParseError::new(kind, pos, e.to_string())
}

fn ident<T>(name: &Name, make: impl FnOnce(String) -> std::result::Result<T, CoreError>) -> Result<T> {
    make(name.text.clone()).map_err(|e| core_error(name.pos, ParseErrorKind::Syntax, e))
}

fn unchecked_formula(syn: FormulaSyntax) -> Result<Formula> {
    let mut resolver = |action: &Name, args: &[Name]| -> Result<Instruction> {
        let a = ident(action, ActionName::new)?;
        let objs = args
            .iter()
            .map(|o| ident(o, ObjectId::new))
            .collect::<Result<Vec<_>>>()?;
        Instruction::new(a, objs).map_err(|e| core_error(action.pos, ParseErrorKind::Syntax, e))
    };
    build_formula(syn, &mut resolver, &mut |p| ident(p, Proposition::new))
}

fn build_formula(
    syn: FormulaSyntax,
    atom: &mut dyn FnMut(&Name, &[Name]) -> Result<Instruction>,
    prop: &mut dyn FnMut(&Name) -> Result<Proposition>,
) -> Result<Formula> {
    Ok(match syn {
        FormulaSyntax::Atom(a, objs) => Formula::atom(atom(&a, &objs)?),
        FormulaSyntax::Purpose(f, p) => Formula::purpose(build_formula(*f, atom, prop)?, prop(&p)?),
        FormulaSyntax::Reason(r, f) => {
            let r = prop(&r)?;
            Formula::reason(r, build_formula(*f, atom, prop)?)
        }
        FormulaSyntax::Seq(f, g) => Formula::seq(build_formula(*f, atom, prop)?, build_formula(*g, atom, prop)?),
        FormulaSyntax::Par(f, g) => Formula::par(build_formula(*f, atom, prop)?, build_formula(*g, atom, prop)?),
        FormulaSyntax::Choice(f, g) => Formula::choice(build_formula(*f, atom, prop)?, build_formula(*g, atom, prop)?),
        FormulaSyntax::Group(members) => {
            let members = members
                .into_iter()
                .map(|m| build_formula(m, atom, prop))
                .collect::<Result<Vec<_>>>()?;
            Formula::par_group(members).expect("parser never builds empty groups")
        }
    })
}

fn resolution(pos: Pos, message: impl Into<String>) -> ParseError {
    ParseError::new(ParseErrorKind::Resolution, pos, message)
}

fn arity(pos: Pos, message: impl Into<String>) -> ParseError {
    ParseError::new(ParseErrorKind::Arity, pos, message)
}

/// Turns the raw statements into a checked document.
fn resolve(raw: Raw) -> Result<PlanDocument> {
    let mut model = Model::default();
    let mut world = BTreeMap::new();

    for (name, state) in &raw.objects {
        let o = ident(name, ObjectId::new)?;
        if !model.objects.insert(o.clone()) {
            return Err(resolution(name.pos, format!("object `{o}` declared twice")));
        }
        world.insert(o, ident(state, StateLabel::new)?);
    }

    for decl in &raw.actions {
        let action = ident(&decl.name, ActionName::new)?;
        let mut seen = BTreeSet::new();
        for p in &decl.params {
            if !seen.insert(p.text.as_str()) {
                return Err(ParseError::new(
                    ParseErrorKind::Syntax,
                    p.pos,
                    format!("parameter `{}` repeated", p.text),
                ));
            }
        }
        let slot_states = |bindings: &[Binding]| -> Result<Vec<Option<StateLabel>>> {
            let mut slots = vec![None; decl.params.len()];
            for b in bindings {
                let slot = decl.params.iter().position(|p| p.text == b.param.text).ok_or_else(|| {
                    resolution(
                        b.param.pos,
                        format!("`{}` is not a parameter of `{}`", b.param.text, decl.name.text),
                    )
                })?;
                if slots[slot].is_some() {
                    return Err(ParseError::new(
                        ParseErrorKind::Syntax,
                        b.param.pos,
                        format!("`{}` bound twice", b.param.text),
                    ));
                }
                slots[slot] = Some(ident(&b.state, StateLabel::new)?);
            }
            Ok(slots)
        };
        let effect = ActionEffect {
            action: action.clone(),
            params: decl.params.iter().map(|p| p.text.clone()).collect(),
            required: slot_states(&decl.requires)?,
            yielded: slot_states(&decl.yields)?,
        };
        if model.effect(&action, effect.arity()).is_some() {
            return Err(resolution(
                decl.name.pos,
                format!("action `{action}` with {} parameter(s) declared twice", effect.arity()),
            ));
        }
        model.add_effect(effect);
    }

    for p in &raw.props {
        let prop = ident(p, Proposition::new)?;
        if !model.propositions.insert(prop) {
            return Err(resolution(p.pos, format!("proposition `{}` declared twice", p.text)));
        }
    }

    let lookup_prop = |model: &Model, n: &Name| -> Result<Proposition> {
        let p = ident(n, Proposition::new)?;
        if model.propositions.contains(&p) {
            Ok(p)
        } else {
            Err(resolution(n.pos, format!("undeclared proposition `{}`", n.text)))
        }
    };

    for (r, p) in &raw.intends {
        let pair = (lookup_prop(&model, r)?, lookup_prop(&model, p)?);
        model.intention.insert(pair);
    }

    let resolve_instruction = |model: &Model, action: &Name, args: &[Name]| -> Result<Instruction> {
        let a = ident(action, ActionName::new)?;
        if !model.actions.contains(&a) {
            return Err(resolution(action.pos, format!("undeclared action `{a}`")));
        }
        if model.effect(&a, args.len()).is_none() {
            let arities: Vec<String> = model
                .effects
                .keys()
                .filter(|(name, _)| name == &a)
                .map(|(_, n)| n.to_string())
                .collect();
            return Err(arity(
                action.pos,
                format!("`{a}` takes {} argument(s), got {}", arities.join(" or "), args.len()),
            ));
        }
        let mut objs = Vec::with_capacity(args.len());
        for o in args {
            let id = ident(o, ObjectId::new)?;
            if !model.objects.contains(&id) {
                return Err(resolution(o.pos, format!("undeclared object `{id}`")));
            }
            objs.push(id);
        }
        Instruction::new(a, objs).map_err(|e| core_error(action.pos, ParseErrorKind::Syntax, e))
    };

    let mut instructions: IndexMap<Label, AnnotatedInstruction> = IndexMap::new();
    for d in &raw.instrs {
        let label = ident(&d.label, Label::new)?;
        if instructions.contains_key(&label) {
            return Err(resolution(d.label.pos, format!("label `{label}` used twice")));
        }
        let instruction = resolve_instruction(&model, &d.action, &d.args)?;
        let precondition = d.when.as_ref().map(|n| lookup_prop(&model, n)).transpose()?;
        let purpose = d.purpose.as_ref().map(|n| lookup_prop(&model, n)).transpose()?;
        let declared_dependency = d.after.as_ref().map(|n| ident(n, Label::new)).transpose()?;
        instructions.insert(
            label,
            AnnotatedInstruction {
                instruction,
                precondition,
                purpose,
                declared_dependency,
            },
        );
    }
    for d in &raw.instrs {
        if let Some(after) = &d.after {
            if after.text == d.label.text {
                return Err(resolution(after.pos, "an instruction cannot depend on itself"));
            }
            if !instructions.keys().any(|l| l.as_str() == after.text) {
                return Err(resolution(after.pos, format!("undeclared label `{}`", after.text)));
            }
        }
    }

    let lookup_label = |n: &Name| -> Result<Label> {
        let l = ident(n, Label::new)?;
        if instructions.contains_key(&l) {
            Ok(l)
        } else {
            Err(resolution(n.pos, format!("undeclared label `{}`", n.text)))
        }
    };

    let composition = match raw.compose {
        None => {
            if instructions.is_empty() {
                return Err(ParseError::new(
                    ParseErrorKind::Syntax,
                    Pos { line: 1, column: 1 },
                    "plan declares no instructions",
                ));
            }
            CompositionRequest::SrutiChain(instructions.keys().cloned().collect())
        }
        Some((_, ComposeDecl::Seq(labels))) => {
            CompositionRequest::SrutiChain(labels.iter().map(lookup_label).collect::<Result<_>>()?)
        }
        Some((_, ComposeDecl::Artha(labels))) => {
            let mut out = Vec::new();
            for n in &labels {
                let l = lookup_label(n)?;
                if out.contains(&l) {
                    return Err(resolution(n.pos, format!("label `{l}` listed twice")));
                }
                out.push(l);
            }
            CompositionRequest::ArthaLink(out)
        }
        Some((
            _,
            ComposeDecl::Repeat {
                stepwise,
                actions,
                matrix,
                pos,
            },
        )) => {
            let mut names = Vec::new();
            for a in &actions {
                let name = ident(a, ActionName::new)?;
                if !model.actions.contains(&name) {
                    return Err(resolution(a.pos, format!("undeclared action `{name}`")));
                }
                if model.effect(&name, 1).is_none() {
                    return Err(arity(
                        a.pos,
                        format!("repeated action `{name}` must take exactly one object"),
                    ));
                }
                names.push(name);
            }
            let rows = match matrix {
                MatrixSyntax::Broadcast(row) => vec![row; names.len()],
                MatrixSyntax::Rows(rows) => rows,
            };
            if rows.len() != names.len() {
                return Err(ParseError::new(
                    ParseErrorKind::Syntax,
                    pos,
                    format!("matrix has {} row(s) but {} action(s)", rows.len(), names.len()),
                ));
            }
            let mut grid = Vec::new();
            for row in &rows {
                let mut out = Vec::new();
                for o in row {
                    let id = ident(o, ObjectId::new)?;
                    if !model.objects.contains(&id) {
                        return Err(resolution(o.pos, format!("undeclared object `{id}`")));
                    }
                    out.push(id);
                }
                grid.push(out);
            }
            let matrix =
                ObjectMatrix::new(grid).map_err(|e| ParseError::new(ParseErrorKind::Syntax, pos, e.to_string()))?;
            if stepwise {
                CompositionRequest::StepParallel { actions: names, matrix }
            } else {
                CompositionRequest::SequentialCompletion { actions: names, matrix }
            }
        }
        Some((_, ComposeDecl::Formula(syn))) => {
            let f = build_formula(syn, &mut |a, args| resolve_instruction(&model, a, args), &mut |p| {
                lookup_prop(&model, p)
            })?;
            CompositionRequest::RawFormula(f)
        }
    };

    model.facts = given_propositions(&model, &instructions, &composition);

    Ok(PlanDocument {
        model,
        initial_world: WorldState::new(world),
        instructions,
        composition,
    })
}

/// Propositions no instruction or formula produces as a purpose hold from
/// the start.
fn given_propositions(
    model: &Model,
    instructions: &IndexMap<Label, AnnotatedInstruction>,
    composition: &CompositionRequest,
) -> BTreeSet<Proposition> {
    let mut produced: BTreeSet<&Proposition> = instructions.values().filter_map(|i| i.purpose.as_ref()).collect();
    fn purposes<'a>(f: &'a Formula, out: &mut BTreeSet<&'a Proposition>) {
        if let Formula::Purpose(_, p) = f {
            out.insert(p);
        }
        for c in f.children() {
            purposes(c, out);
        }
    }
    if let CompositionRequest::RawFormula(f) = composition {
        purposes(f, &mut produced);
    }
    model
        .propositions
        .iter()
        .filter(|p| !produced.contains(p))
        .cloned()
        .collect()
}
