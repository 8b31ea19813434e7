//! Object and functional dependency checks over consecutive instructions,
//! and the per-pair report for a whole sequence.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::domain::{shared_objects, Instruction, Model, ObjectId, Proposition, StateLabel, WorldState};
use crate::parser::{PlanDocument, Step};
use crate::semantics::{requirement_checks, SemanticsError};

/// Source of the dependency predicate `D` between consecutive steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DependencyRule {
    /// The second step names the first in its `after` annotation.
    Declared,
    /// The steps share an object, or the first's purpose is the second's
    /// precondition.
    Inferred,
    /// Every consecutive pair depends; used for direct-assertion chains.
    Asserted,
}

/// The proposition linking `prev` to `next`, if the first's purpose is the
/// second's precondition.
pub fn purpose_link(prev: &Step, next: &Step) -> Option<Proposition> {
    match (&prev.item.purpose, &next.item.precondition) {
        (Some(p), Some(r)) if p == r => Some(p.clone()),
        _ => None,
    }
}

impl DependencyRule {
    pub fn dependent(self, prev: &Step, next: &Step) -> bool {
        match self {
            DependencyRule::Declared => prev.label.is_some() && next.item.declared_dependency == prev.label,
            DependencyRule::Inferred => {
                check_object_dependency(prev.instruction(), next.instruction()) || purpose_link(prev, next).is_some()
            }
            DependencyRule::Asserted => true,
        }
    }
}

/// At least one object in common.
pub fn check_object_dependency(i: &Instruction, j: &Instruction) -> bool {
    !shared_objects(i, j).is_empty()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StateCheck {
    pub object: ObjectId,
    /// `None` when `j` places no requirement on this object.
    pub expected: Option<StateLabel>,
    pub actual: Option<StateLabel>,
    pub ok: bool,
}

/// Compares each shared object's state in `world` (the state right after
/// `i` ran) with what `j` requires of it.
pub fn check_functional_dependency(
    model: &Model,
    world: &WorldState,
    i: &Instruction,
    j: &Instruction,
) -> Result<Vec<StateCheck>, SemanticsError> {
    let effect = model.effect_for(j).ok_or_else(|| SemanticsError::UnknownAction {
        action: j.action().clone(),
        arity: j.arity(),
    })?;
    Ok(shared_objects(i, j)
        .into_iter()
        .map(|o| {
            let expected = effect.required_for(j, &o).cloned();
            let actual = world.get(&o).cloned();
            let ok = expected.is_none() || expected == actual;
            StateCheck {
                object: o,
                expected,
                actual,
                ok,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CorollaryReason {
    NoCommonObject,
    StateMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PairFinding {
    /// Position of the first instruction of the pair, counting from 0.
    pub index: usize,
    pub first: String,
    pub second: String,
    pub dependency: bool,
    pub shared: BTreeSet<ObjectId>,
    pub purpose_link: Option<Proposition>,
    pub state_checks: Vec<StateCheck>,
    /// Set only for dependent pairs that fail a condition.
    pub failure: Option<CorollaryReason>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepIssue {
    UnknownAction {
        index: usize,
        step: String,
    },
    RequirementUnmet {
        index: usize,
        step: String,
        object: ObjectId,
        expected: StateLabel,
        actual: Option<StateLabel>,
    },
}

impl StepIssue {
    pub fn index(&self) -> usize {
        match self {
            StepIssue::UnknownAction { index, .. } | StepIssue::RequirementUnmet { index, .. } => *index,
        }
    }
}

/// Where a sequence first goes wrong.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "at", rename_all = "snake_case")]
pub enum FirstFailure {
    /// The pair starting at `index`.
    Pair {
        index: usize,
        first: String,
        second: String,
    },
    /// The opening instruction cannot run in the initial world.
    Start { step: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidityReport {
    pub valid: bool,
    pub pair_findings: Vec<PairFinding>,
    pub step_issues: Vec<StepIssue>,
    pub corollary_reason: Option<CorollaryReason>,
    pub first_failure: Option<FirstFailure>,
    pub world_after: WorldState,
}

impl ValidityReport {
    /// Pairs with neither shared objects nor a purpose link.
    pub fn unrelated_pairs(&self) -> impl Iterator<Item = &PairFinding> {
        self.pair_findings
            .iter()
            .filter(|p| p.shared.is_empty() && p.purpose_link.is_none())
    }
}

/// Threads the initial world through `ordered` and checks every dependent
/// consecutive pair for a shared object and matching states. Every step
/// must also be able to run; a step that cannot leaves the world as it was.
pub fn validate_sequence(doc: &PlanDocument, ordered: &[Step], rule: DependencyRule) -> ValidityReport {
    validate_in(&doc.model, &doc.initial_world, ordered, rule)
}

/// [`validate_sequence`] against an explicit model and world.
pub fn validate_in(model: &Model, initial: &WorldState, ordered: &[Step], rule: DependencyRule) -> ValidityReport {
    let mut world = initial.clone();
    let mut pair_findings = Vec::new();
    let mut step_issues = Vec::new();
    let mut first: Option<(CorollaryReason, FirstFailure)> = None;

    for (k, step) in ordered.iter().enumerate() {
        let instr = step.instruction();
        let pair_at = |k: usize| FirstFailure::Pair {
            index: k - 1,
            first: ordered[k - 1].name(),
            second: step.name(),
        };
        if k > 0 {
            let prev = &ordered[k - 1];
            let dependency = rule.dependent(prev, step);
            let shared = shared_objects(prev.instruction(), instr);
            let state_checks =
                check_functional_dependency(model, &world, prev.instruction(), instr).unwrap_or_default();
            let failure = if !dependency {
                None
            } else if shared.is_empty() {
                Some(CorollaryReason::NoCommonObject)
            } else if state_checks.iter().any(|c| !c.ok) || model.effect_for(instr).is_none() {
                Some(CorollaryReason::StateMismatch)
            } else {
                None
            };
            if let (Some(reason), None) = (failure, &first) {
                first = Some((reason, pair_at(k)));
            }
            pair_findings.push(PairFinding {
                index: k - 1,
                first: prev.name(),
                second: step.name(),
                dependency,
                shared,
                purpose_link: purpose_link(prev, step),
                state_checks,
                failure,
            });
        }

        let issue = match model.effect_for(instr) {
            None => Some(StepIssue::UnknownAction {
                index: k,
                step: step.name(),
            }),
            Some(effect) => {
                let unmet = requirement_checks(effect, &world, instr).find(|(_, req, actual)| Some(*req) != *actual);
                match unmet {
                    Some((o, req, actual)) => Some(StepIssue::RequirementUnmet {
                        index: k,
                        step: step.name(),
                        object: o.clone(),
                        expected: req.clone(),
                        actual: actual.cloned(),
                    }),
                    None => {
                        for (o, y) in instr.objects().iter().zip(&effect.yielded) {
                            if let Some(s) = y {
                                world.set(o.clone(), s.clone());
                            }
                        }
                        None
                    }
                }
            }
        };
        if let Some(issue) = issue {
            if first.is_none() {
                let at = if k == 0 {
                    FirstFailure::Start { step: step.name() }
                } else {
                    pair_at(k)
                };
                first = Some((CorollaryReason::StateMismatch, at));
            }
            step_issues.push(issue);
        }
    }

    let (corollary_reason, first_failure) = match first {
        Some((r, f)) => (Some(r), Some(f)),
        None => (None, None),
    };
    ValidityReport {
        valid: corollary_reason.is_none(),
        pair_findings,
        step_issues,
        corollary_reason,
        first_failure,
        world_after: world,
    }
}
