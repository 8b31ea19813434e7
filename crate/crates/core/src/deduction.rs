//! OCS and PLS derivations: rule application, independent proof checking,
//! a synthesizer that derives any valid sequence, and a line-oriented text
//! form for proofs.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use serde::Serialize;
use thiserror::Error;

use crate::domain::{Label, ObjectId, Proposition};
use crate::formula::Formula;
use crate::parser::{parse_formula, PlanDocument, Step};
use crate::validity::{validate_sequence, CorollaryReason, DependencyRule, FirstFailure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Rule {
    Premise,
    Ocs,
    Pls,
    /// Both side conditions hold and are recorded in a single step.
    OcsPls,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::Premise => "premise",
            Rule::Ocs => "OCS",
            Rule::Pls => "PLS",
            Rule::OcsPls => "OCS+PLS",
        }
    }

    fn from_name(s: &str) -> Option<Rule> {
        [Rule::Premise, Rule::Ocs, Rule::Pls, Rule::OcsPls]
            .into_iter()
            .find(|r| r.name() == s)
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Sequent {
    pub context: Vec<Formula>,
    pub conclusion: Formula,
}

/// What a step claims justifies it. Premises carry the label they cite;
/// OCS records the shared objects, PLS the linking proposition.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize)]
pub struct Evidence {
    pub shared: BTreeSet<ObjectId>,
    pub linked: Option<Proposition>,
    pub label: Option<Label>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct ProofStep {
    pub rule: Rule,
    pub premises: Vec<ProofStep>,
    pub sequent: Sequent,
    pub evidence: Evidence,
}

/// A derivation of an instruction sequence. Consecutive segments are
/// independent sub-sequences: no rule links them, which is only allowed
/// where the two neighbouring steps do not depend on each other.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Proof {
    pub segments: Vec<ProofStep>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum SideCondition {
    NoSharedObject,
    PurposePreconditionMismatch {
        purpose: Proposition,
        precondition: Proposition,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeductionError {
    #[error("side condition failed: {0:?}")]
    SideConditionFailed(SideCondition),
    #[error("{0}")]
    ShapeError(String),
}

impl ProofStep {
    /// A leaf justified by a plan instruction and its annotations.
    pub fn premise(step: &Step) -> ProofStep {
        let f = step.item.formula();
        ProofStep {
            rule: Rule::Premise,
            premises: vec![],
            sequent: Sequent {
                context: vec![f.clone()],
                conclusion: f,
            },
            evidence: Evidence {
                label: step.label.clone(),
                ..Evidence::default()
            },
        }
    }

    pub fn conclusion(&self) -> &Formula {
        &self.sequent.conclusion
    }

    /// Premise leaves, left to right.
    pub fn leaves(&self) -> Vec<&ProofStep> {
        if self.rule == Rule::Premise {
            return vec![self];
        }
        self.premises.iter().flat_map(ProofStep::leaves).collect()
    }

    /// Number of OCS/PLS applications in this subtree.
    pub fn rule_count(&self) -> usize {
        usize::from(self.rule != Rule::Premise) + self.premises.iter().map(ProofStep::rule_count).sum::<usize>()
    }

    fn rules_into(&self, out: &mut Vec<Rule>) {
        for p in &self.premises {
            p.rules_into(out);
        }
        if self.rule != Rule::Premise {
            out.push(self.rule);
        }
    }
}

impl Proof {
    pub fn leaves(&self) -> Vec<&ProofStep> {
        self.segments.iter().flat_map(ProofStep::leaves).collect()
    }

    /// Rules applied, in post-order across segments.
    pub fn rules(&self) -> Vec<Rule> {
        let mut out = Vec::new();
        for s in &self.segments {
            s.rules_into(&mut out);
        }
        out
    }

    /// The concluded formula: segment conclusions joined left to right.
    pub fn conclusion(&self) -> Option<Formula> {
        Formula::chain(self.segments.iter().map(|s| s.conclusion().clone()))
    }
}

fn ocs_evidence(left: &Formula, right: &Formula) -> Result<BTreeSet<ObjectId>, DeductionError> {
    let shared: BTreeSet<ObjectId> = left
        .last_objects()
        .intersection(&right.first_objects())
        .cloned()
        .collect();
    if shared.is_empty() {
        Err(DeductionError::SideConditionFailed(SideCondition::NoSharedObject))
    } else {
        Ok(shared)
    }
}

fn pls_evidence(left: &Formula, right: &Formula) -> Result<Proposition, DeductionError> {
    let (_, _, purpose) = left
        .last_unit()
        .as_annotated()
        .ok_or_else(|| DeductionError::ShapeError(format!("`{left}` does not end in an annotated instruction")))?;
    let (precondition, _, _) = right
        .first_unit()
        .as_annotated()
        .ok_or_else(|| DeductionError::ShapeError(format!("`{right}` does not start with an annotated instruction")))?;
    if purpose == precondition {
        Ok(purpose.clone())
    } else {
        Err(DeductionError::SideConditionFailed(
            SideCondition::PurposePreconditionMismatch {
                purpose: purpose.clone(),
                precondition: precondition.clone(),
            },
        ))
    }
}

fn evidence_for(rule: Rule, left: &Formula, right: &Formula) -> Result<Evidence, DeductionError> {
    let mut ev = Evidence::default();
    match rule {
        Rule::Premise => return Err(DeductionError::ShapeError("a premise has no operands".into())),
        Rule::Ocs => ev.shared = ocs_evidence(left, right)?,
        Rule::Pls => ev.linked = Some(pls_evidence(left, right)?),
        Rule::OcsPls => {
            ev.shared = ocs_evidence(left, right)?;
            ev.linked = Some(pls_evidence(left, right)?);
        }
    }
    Ok(ev)
}

fn combine(rule: Rule, p1: ProofStep, p2: ProofStep, evidence: Evidence) -> ProofStep {
    let mut context = p1.sequent.context.clone();
    context.extend(p2.sequent.context.iter().cloned());
    let conclusion = Formula::seq(p1.sequent.conclusion.clone(), p2.sequent.conclusion.clone());
    ProofStep {
        rule,
        premises: vec![p1, p2],
        sequent: Sequent { context, conclusion },
        evidence,
    }
}

/// Applies `rule` to two proofs, checking its side condition.
pub fn apply_rule(rule: Rule, p1: &ProofStep, p2: &ProofStep) -> Result<ProofStep, DeductionError> {
    let ev = evidence_for(rule, p1.conclusion(), p2.conclusion())?;
    Ok(combine(rule, p1.clone(), p2.clone(), ev))
}

pub fn apply_ocs(p1: &ProofStep, p2: &ProofStep) -> Result<ProofStep, DeductionError> {
    apply_rule(Rule::Ocs, p1, p2)
}

pub fn apply_pls(p1: &ProofStep, p2: &ProofStep) -> Result<ProofStep, DeductionError> {
    apply_rule(Rule::Pls, p1, p2)
}

/// The strongest applicable rule, if any.
fn best_rule(left: &Formula, right: &Formula) -> Option<(Rule, Evidence)> {
    [Rule::OcsPls, Rule::Ocs, Rule::Pls]
        .into_iter()
        .find_map(|r| evidence_for(r, left, right).ok().map(|ev| (r, ev)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DerivationFailure {
    pub reason: Option<CorollaryReason>,
    pub at: Option<FirstFailure>,
    pub message: String,
}

impl fmt::Display for DerivationFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Builds a proof of `ordered`, linking each new step to the proof so far
/// with OCS, PLS or both. Where no rule applies the pair must be
/// independent, and a new segment starts.
pub fn derive(doc: &PlanDocument, ordered: &[Step], rule: DependencyRule) -> Result<Proof, DerivationFailure> {
    if ordered.is_empty() {
        return Err(DerivationFailure {
            reason: None,
            at: None,
            message: "nothing to derive: the sequence is empty".into(),
        });
    }
    let report = validate_sequence(doc, ordered, rule);
    if !report.valid {
        let at = report.first_failure.clone();
        let place = match &at {
            Some(FirstFailure::Pair { first, second, .. }) => format!("pair ({first}, {second})"),
            Some(FirstFailure::Start { step }) => format!("first step {step}"),
            None => "an unknown position".into(),
        };
        return Err(DerivationFailure {
            reason: report.corollary_reason,
            message: format!(
                "sequence is not valid: {:?} at {place}",
                report.corollary_reason.unwrap()
            ),
            at,
        });
    }

    let mut segments = Vec::new();
    let mut cur = ProofStep::premise(&ordered[0]);
    for k in 1..ordered.len() {
        let next = ProofStep::premise(&ordered[k]);
        match best_rule(cur.conclusion(), next.conclusion()) {
            Some((r, ev)) => cur = combine(r, cur, next, ev),
            None if !rule.dependent(&ordered[k - 1], &ordered[k]) => {
                segments.push(std::mem::replace(&mut cur, next));
            }
            None => {
                return Err(DerivationFailure {
                    reason: Some(CorollaryReason::NoCommonObject),
                    at: Some(FirstFailure::Pair {
                        index: k - 1,
                        first: ordered[k - 1].name(),
                        second: ordered[k].name(),
                    }),
                    message: format!("no rule links dependent pair ({}, {})", ordered[k - 1], ordered[k]),
                });
            }
        }
    }
    segments.push(cur);
    Ok(Proof { segments })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DerivationCheck {
    pub accepted: bool,
    pub diagnostics: Vec<String>,
}

/// Re-verifies every step of `proof` against `doc` without trusting any
/// recorded evidence, then re-validates the concluded instruction order.
pub fn check_derivation(proof: &Proof, doc: &PlanDocument, rule: DependencyRule) -> DerivationCheck {
    let mut diagnostics = Vec::new();
    if proof.segments.is_empty() {
        diagnostics.push("proof has no segments".to_string());
    }
    let pool = doc.premise_pool();
    let mut order: Vec<Step> = Vec::new();
    let mut seg_bounds = Vec::new();
    for (s, seg) in proof.segments.iter().enumerate() {
        seg_bounds.push(order.len());
        check_step(seg, &pool, &mut order, &mut diagnostics, &format!("segment {}", s + 1));
    }
    if diagnostics.is_empty() {
        for &b in seg_bounds.iter().skip(1) {
            if rule.dependent(&order[b - 1], &order[b]) {
                diagnostics.push(format!(
                    "segments split the dependent pair ({}, {})",
                    order[b - 1],
                    order[b]
                ));
            }
        }
    }
    if diagnostics.is_empty() {
        let report = validate_sequence(doc, &order, rule);
        if !report.valid {
            diagnostics.push(format!(
                "concluded order is not valid: {:?}",
                report.corollary_reason.unwrap()
            ));
        }
    }
    DerivationCheck {
        accepted: diagnostics.is_empty(),
        diagnostics,
    }
}

fn check_step(step: &ProofStep, pool: &[Step], order: &mut Vec<Step>, diags: &mut Vec<String>, at: &str) {
    let concl = step.conclusion();
    if step.rule == Rule::Premise {
        if !step.premises.is_empty() {
            diags.push(format!("{at}: a premise cannot have sub-proofs"));
        }
        if step.sequent.context != [concl.clone()] {
            diags.push(format!("{at}: premise context must be exactly its conclusion"));
        }
        if !step.evidence.shared.is_empty() || step.evidence.linked.is_some() {
            diags.push(format!("{at}: premise carries rule evidence"));
        }
        let found = pool
            .iter()
            .find(|s| s.label == step.evidence.label && &s.item.formula() == concl);
        match found {
            Some(s) => order.push(s.clone()),
            None => diags.push(format!("{at}: `{concl}` is not a plan instruction")),
        }
        return;
    }
    let [p1, p2] = step.premises.as_slice() else {
        diags.push(format!("{at}: {} needs exactly two sub-proofs", step.rule));
        return;
    };
    check_step(p1, pool, order, diags, &format!("{at}.1"));
    check_step(p2, pool, order, diags, &format!("{at}.2"));
    match evidence_for(step.rule, p1.conclusion(), p2.conclusion()) {
        Err(e) => diags.push(format!("{at}: {} does not apply: {e}", step.rule)),
        Ok(ev) if ev != step.evidence => diags.push(format!("{at}: recorded evidence does not match")),
        Ok(_) => {}
    }
    let expected = Formula::seq(p1.conclusion().clone(), p2.conclusion().clone());
    if concl != &expected {
        diags.push(format!("{at}: conclusion should be `{expected}`"));
    }
    let mut context = p1.sequent.context.clone();
    context.extend(p2.sequent.context.iter().cloned());
    if step.sequent.context != context {
        diags.push(format!("{at}: context does not combine the sub-proof contexts"));
    }
}

const PROOF_HEADER: &str = "krama-proof 1";

/// Deterministic text form: a header, then each segment as an indented
/// pre-order listing of its steps.
pub fn format_proof(proof: &Proof) -> String {
    let mut out = String::new();
    writeln!(out, "{PROOF_HEADER}").unwrap();
    for (k, seg) in proof.segments.iter().enumerate() {
        writeln!(out, "segment {}", k + 1).unwrap();
        write_step(&mut out, seg, 1);
    }
    out
}

fn write_step(out: &mut String, step: &ProofStep, depth: usize) {
    out.push_str(&"  ".repeat(depth));
    out.push_str(step.rule.name());
    if step.rule == Rule::Premise {
        let label = step.evidence.label.as_ref().map_or("-", |l| l.as_str());
        write!(out, " {label}").unwrap();
    }
    if matches!(step.rule, Rule::Ocs | Rule::OcsPls) {
        let shared: Vec<&str> = step.evidence.shared.iter().map(|o| o.as_str()).collect();
        write!(out, " shared={}", shared.join(",")).unwrap();
    }
    if let Some(p) = &step.evidence.linked {
        write!(out, " link={p}").unwrap();
    }
    writeln!(out, " :: {}", step.conclusion()).unwrap();
    for p in &step.premises {
        write_step(out, p, depth + 1);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("proof line {line}: {message}")]
pub struct ProofParseError {
    pub line: usize,
    pub message: String,
}

struct ProofLine {
    line: usize,
    depth: usize,
    rule: Rule,
    evidence: Evidence,
    conclusion: Formula,
}

/// Reads the format written by [`format_proof`]. Contexts are rebuilt from
/// the tree shape.
pub fn parse_proof(text: &str) -> Result<Proof, ProofParseError> {
    let err = |line: usize, message: String| ProofParseError { line, message };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, l)) if l.trim() == PROOF_HEADER => {}
        Some((k, _)) => return Err(err(k + 1, format!("expected `{PROOF_HEADER}`"))),
        None => return Err(err(1, "empty proof".into())),
    }
    let mut segments: Vec<Vec<ProofLine>> = Vec::new();
    for (k, raw) in lines {
        let n = k + 1;
        let trimmed = raw.trim_start();
        let indent = raw.len() - trimmed.len();
        if indent == 0 {
            if !trimmed.starts_with("segment") {
                return Err(err(n, "expected `segment`".into()));
            }
            segments.push(Vec::new());
            continue;
        }
        if indent % 2 != 0 {
            return Err(err(n, "indentation must be a multiple of two spaces".into()));
        }
        let Some(seg) = segments.last_mut() else {
            return Err(err(n, "step outside a segment".into()));
        };
        let (head, formula) = trimmed
            .split_once(" :: ")
            .ok_or_else(|| err(n, "missing ` :: ` before the conclusion".into()))?;
        let conclusion = parse_formula(formula).map_err(|e| err(n, e.message))?;
        let mut words = head.split_whitespace();
        let rule_word = words.next().unwrap_or_default();
        let rule = Rule::from_name(rule_word).ok_or_else(|| err(n, format!("unknown rule `{rule_word}`")))?;
        let mut evidence = Evidence::default();
        if rule == Rule::Premise {
            let label = words
                .next()
                .ok_or_else(|| err(n, "premise needs a label or `-`".into()))?;
            if label != "-" {
                evidence.label = Some(Label::new(label).map_err(|e| err(n, e.to_string()))?);
            }
        }
        for w in words {
            if let Some(list) = w.strip_prefix("shared=") {
                for o in list.split(',').filter(|o| !o.is_empty()) {
                    evidence
                        .shared
                        .insert(ObjectId::new(o).map_err(|e| err(n, e.to_string()))?);
                }
            } else if let Some(p) = w.strip_prefix("link=") {
                evidence.linked = Some(Proposition::new(p).map_err(|e| err(n, e.to_string()))?);
            } else {
                return Err(err(n, format!("unexpected `{w}`")));
            }
        }
        seg.push(ProofLine {
            line: n,
            depth: indent / 2,
            rule,
            evidence,
            conclusion,
        });
    }
    let mut out = Vec::new();
    for seg in segments {
        let mut k = 0;
        let root = build_step(&seg, &mut k, 1)?;
        if k != seg.len() {
            return Err(err(seg[k].line, "unexpected extra step".into()));
        }
        out.push(root);
    }
    Ok(Proof { segments: out })
}

fn build_step(lines: &[ProofLine], k: &mut usize, depth: usize) -> Result<ProofStep, ProofParseError> {
    let Some(l) = lines.get(*k) else {
        let line = lines.last().map_or(1, |l| l.line);
        return Err(ProofParseError {
            line,
            message: "missing sub-proof".into(),
        });
    };
    if l.depth != depth {
        return Err(ProofParseError {
            line: l.line,
            message: format!("expected a step at depth {depth}"),
        });
    }
    *k += 1;
    let (premises, context) = if l.rule == Rule::Premise {
        (vec![], vec![l.conclusion.clone()])
    } else {
        let a = build_step(lines, k, depth + 1)?;
        let b = build_step(lines, k, depth + 1)?;
        let mut ctx = a.sequent.context.clone();
        ctx.extend(b.sequent.context.iter().cloned());
        (vec![a, b], ctx)
    };
    Ok(ProofStep {
        rule: l.rule,
        premises,
        sequent: Sequent {
            context,
            conclusion: l.conclusion.clone(),
        },
        evidence: l.evidence.clone(),
    })
}
