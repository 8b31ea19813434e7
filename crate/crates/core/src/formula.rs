//! Imperative formulas over instructions.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::domain::{CoreError, Instruction, ObjectId, Proposition};

/// Members of an n-ary parallel group. Never empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Formula>", into = "Vec<Formula>")]
pub struct Group(Vec<Formula>);

impl Group {
    pub fn new(members: Vec<Formula>) -> Result<Self, CoreError> {
        if members.is_empty() {
            Err(CoreError::EmptyGroup)
        } else {
            Ok(Self(members))
        }
    }

    pub fn members(&self) -> &[Formula] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl TryFrom<Vec<Formula>> for Group {
    type Error = CoreError;
    fn try_from(value: Vec<Formula>) -> Result<Self, Self::Error> {
        Group::new(value)
    }
}

impl From<Group> for Vec<Formula> {
    fn from(value: Group) -> Self {
        value.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Formula {
    Atom(Instruction),
    /// `f ->p p`
    Purpose(Box<Formula>, Proposition),
    /// `r ->r f`
    Reason(Proposition, Box<Formula>),
    /// `f ->i g`
    Seq(Box<Formula>, Box<Formula>),
    /// `f & g`
    Par(Box<Formula>, Box<Formula>),
    /// `f (+) g`
    Choice(Box<Formula>, Box<Formula>),
    /// `f ||i g ||i ...`
    ParGroup(Group),
}

impl Formula {
    pub fn atom(i: Instruction) -> Self {
        Formula::Atom(i)
    }

    pub fn purpose(f: Formula, p: Proposition) -> Self {
        Formula::Purpose(Box::new(f), p)
    }

    pub fn reason(r: Proposition, f: Formula) -> Self {
        Formula::Reason(r, Box::new(f))
    }

    pub fn seq(f: Formula, g: Formula) -> Self {
        Formula::Seq(Box::new(f), Box::new(g))
    }

    pub fn par(f: Formula, g: Formula) -> Self {
        Formula::Par(Box::new(f), Box::new(g))
    }

    pub fn choice(f: Formula, g: Formula) -> Self {
        Formula::Choice(Box::new(f), Box::new(g))
    }

    pub fn par_group(members: Vec<Formula>) -> Result<Self, CoreError> {
        Group::new(members).map(Formula::ParGroup)
    }

    /// Left-nested `->i` chain of the given formulas; `None` when empty.
    pub fn chain(formulas: impl IntoIterator<Item = Formula>) -> Option<Formula> {
        formulas.into_iter().reduce(Formula::seq)
    }

    /// Immediate subformulas, left to right.
    pub fn children(&self) -> Vec<&Formula> {
        match self {
            Formula::Atom(_) => vec![],
            Formula::Purpose(f, _) | Formula::Reason(_, f) => vec![f],
            Formula::Seq(f, g) | Formula::Par(f, g) | Formula::Choice(f, g) => vec![f, g],
            Formula::ParGroup(g) => g.members().iter().collect(),
        }
    }

    /// Instruction leaves in left-to-right order.
    pub fn leaves(&self) -> Vec<&Instruction> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a Instruction>) {
        match self {
            Formula::Atom(i) => out.push(i),
            _ => {
                for c in self.children() {
                    c.collect_leaves(out);
                }
            }
        }
    }

    /// Objects of every instruction leaf.
    pub fn leaf_objects(&self) -> BTreeSet<ObjectId> {
        self.leaves()
            .into_iter()
            .flat_map(|i| i.objects().iter().cloned())
            .collect()
    }

    /// Leaves that can run first: the head of a sequence, every member of a
    /// parallel or choice composition.
    pub fn first_leaves(&self) -> Vec<&Instruction> {
        match self {
            Formula::Atom(i) => vec![i],
            Formula::Purpose(f, _) | Formula::Reason(_, f) => f.first_leaves(),
            Formula::Seq(f, _) => f.first_leaves(),
            Formula::Par(f, g) | Formula::Choice(f, g) => {
                let mut v = f.first_leaves();
                v.extend(g.first_leaves());
                v
            }
            Formula::ParGroup(g) => g.members().iter().flat_map(|m| m.first_leaves()).collect(),
        }
    }

    /// Leaves that can run last; mirror image of [`Formula::first_leaves`].
    pub fn last_leaves(&self) -> Vec<&Instruction> {
        match self {
            Formula::Atom(i) => vec![i],
            Formula::Purpose(f, _) | Formula::Reason(_, f) => f.last_leaves(),
            Formula::Seq(_, g) => g.last_leaves(),
            Formula::Par(f, g) | Formula::Choice(f, g) => {
                let mut v = f.last_leaves();
                v.extend(g.last_leaves());
                v
            }
            Formula::ParGroup(g) => g.members().iter().flat_map(|m| m.last_leaves()).collect(),
        }
    }

    pub fn first_objects(&self) -> BTreeSet<ObjectId> {
        objects_of(self.first_leaves())
    }

    pub fn last_objects(&self) -> BTreeSet<ObjectId> {
        objects_of(self.last_leaves())
    }

    /// The trailing unit of a `->i` chain: descends through right operands
    /// of `Seq` only.
    pub fn last_unit(&self) -> &Formula {
        match self {
            Formula::Seq(_, g) => g.last_unit(),
            other => other,
        }
    }

    /// The leading unit of a `->i` chain.
    pub fn first_unit(&self) -> &Formula {
        match self {
            Formula::Seq(f, _) => f.first_unit(),
            other => other,
        }
    }

    /// `(r, instruction, p)` when shaped `r ->r (i ->p p)`.
    pub fn as_annotated(&self) -> Option<(&Proposition, &Instruction, &Proposition)> {
        match self {
            Formula::Reason(r, inner) => match inner.as_ref() {
                Formula::Purpose(a, p) => match a.as_ref() {
                    Formula::Atom(i) => Some((r, i, p)),
                    _ => None,
                },
                _ => None,
            },
            _ => None,
        }
    }

    /// Number of `Seq` nodes along the left spine.
    pub fn seq_depth(&self) -> usize {
        match self {
            Formula::Seq(f, _) => 1 + f.seq_depth(),
            _ => 0,
        }
    }

    /// Operands of a left-nested `->i` chain, in order.
    pub fn chain_operands(&self) -> Vec<&Formula> {
        match self {
            Formula::Seq(f, g) => {
                let mut v = f.chain_operands();
                v.push(g);
                v
            }
            other => vec![other],
        }
    }

    pub fn render(&self, notation: Notation) -> String {
        let mut s = String::new();
        self.render_into(&mut s, notation);
        s
    }

    fn render_into(&self, out: &mut String, n: Notation) {
        let ops = n.ops();
        match self {
            Formula::Atom(i) => {
                out.push_str(i.action().as_str());
                out.push('{');
                for (k, o) in i.objects().iter().enumerate() {
                    if k > 0 {
                        out.push(',');
                    }
                    out.push_str(o.as_str());
                }
                out.push('}');
            }
            Formula::Purpose(f, p) => {
                out.push('(');
                f.render_into(out, n);
                out.push(' ');
                out.push_str(ops.purpose);
                out.push(' ');
                out.push_str(p.as_str());
                out.push(')');
            }
            Formula::Reason(r, f) => {
                out.push('(');
                out.push_str(r.as_str());
                out.push(' ');
                out.push_str(ops.reason);
                out.push(' ');
                f.render_into(out, n);
                out.push(')');
            }
            Formula::Seq(f, g) => binary(out, n, f, ops.seq, g),
            Formula::Par(f, g) => binary(out, n, f, ops.par, g),
            Formula::Choice(f, g) => binary(out, n, f, ops.choice, g),
            Formula::ParGroup(g) => {
                out.push('(');
                if g.len() == 1 {
                    out.push_str(ops.group);
                    out.push(' ');
                    g.members()[0].render_into(out, n);
                } else {
                    for (k, m) in g.members().iter().enumerate() {
                        if k > 0 {
                            out.push(' ');
                            out.push_str(ops.group);
                            out.push(' ');
                        }
                        m.render_into(out, n);
                    }
                }
                out.push(')');
            }
        }
    }
}

fn binary(out: &mut String, n: Notation, f: &Formula, op: &str, g: &Formula) {
    out.push('(');
    f.render_into(out, n);
    out.push(' ');
    out.push_str(op);
    out.push(' ');
    g.render_into(out, n);
    out.push(')');
}

fn objects_of(leaves: Vec<&Instruction>) -> BTreeSet<ObjectId> {
    leaves.into_iter().flat_map(|i| i.objects().iter().cloned()).collect()
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(Notation::Ascii))
    }
}

/// Operator spelling used when rendering formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Notation {
    #[default]
    Ascii,
    Unicode,
}

pub(crate) struct OpSpelling {
    pub seq: &'static str,
    pub par: &'static str,
    pub choice: &'static str,
    pub group: &'static str,
    pub purpose: &'static str,
    pub reason: &'static str,
}

impl Notation {
    pub(crate) fn ops(self) -> OpSpelling {
        match self {
            Notation::Ascii => OpSpelling {
                seq: "->i",
                par: "&",
                choice: "(+)",
                group: "||i",
                purpose: "->p",
                reason: "->r",
            },
            Notation::Unicode => OpSpelling {
                seq: "→i",
                par: "∧",
                choice: "⊕",
                group: "∥i",
                purpose: "→p",
                reason: "→r",
            },
        }
    }
}
