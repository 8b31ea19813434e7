//! Brute-force ground truth: run every ordering of a plan's instructions
//! directly against the effect tables and compare with the validity and
//! derivation verdicts.

use std::collections::BTreeMap;

use itertools::Itertools;
use serde::Serialize;
use thiserror::Error;

use crate::deduction::{check_derivation, derive};
use crate::domain::{Instruction, Model, ObjectId, StateLabel, WorldState};
use crate::parser::{DependencyMode, PlanDocument, Step};
use crate::sequencing::{SequencingError, TieBreak};
use crate::validity::validate_sequence;

pub const DEFAULT_BOUND: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleOptions {
    /// Largest instruction count that will be enumerated.
    pub bound: usize,
    pub mode: DependencyMode,
    pub tie: TieBreak,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            bound: DEFAULT_BOUND,
            mode: DependencyMode::default(),
            tie: TieBreak::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("{count} instructions exceed the enumeration bound of {bound}")]
    TooLarge { count: usize, bound: usize },
    #[error(transparent)]
    Sequencing(#[from] SequencingError),
    #[error("reference plan has {reference} instructions, subject has {subject}")]
    ReferenceMismatch { subject: usize, reference: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OracleVerdict {
    pub sequence: Vec<String>,
    pub executable: bool,
    pub theorem_valid: bool,
    pub derivable: bool,
}

/// Runs `seq` from `initial` using only the effect tables.
pub fn executable<'a>(model: &Model, initial: &WorldState, seq: impl IntoIterator<Item = &'a Instruction>) -> bool {
    let mut states: BTreeMap<&ObjectId, &StateLabel> = initial.iter().collect();
    for i in seq {
        let Some(effect) = model.effects.get(&(i.action().clone(), i.objects().len())) else {
            return false;
        };
        for (o, req) in i.objects().iter().zip(&effect.required) {
            if let Some(req) = req {
                if states.get(o) != Some(&req) {
                    return false;
                }
            }
        }
        for (o, y) in i.objects().iter().zip(&effect.yielded) {
            if let Some(y) = y {
                states.insert(o, y);
            }
        }
    }
    true
}

fn steps_within_bound(doc: &PlanDocument, opts: &OracleOptions) -> Result<Vec<Step>, OracleError> {
    let (steps, _) = doc.composition_steps(opts.tie)?;
    if steps.len() > opts.bound {
        return Err(OracleError::TooLarge {
            count: steps.len(),
            bound: opts.bound,
        });
    }
    Ok(steps)
}

/// Calls `visit` with the verdict for every ordering, in lexicographic
/// order of instruction positions. Execution uses `reference`'s model and
/// initial world; validity and derivability use `subject`'s.
pub fn for_each_ordering(
    subject: &PlanDocument,
    reference: &PlanDocument,
    opts: &OracleOptions,
    mut visit: impl FnMut(OracleVerdict),
) -> Result<usize, OracleError> {
    let steps = steps_within_bound(subject, opts)?;
    let reference_steps = steps_within_bound(reference, opts)?;
    if steps.len() != reference_steps.len() {
        return Err(OracleError::ReferenceMismatch {
            subject: steps.len(),
            reference: reference_steps.len(),
        });
    }
    let rule = subject.dependency_rule(opts.mode);
    let mut count = 0;
    for perm in (0..steps.len()).permutations(steps.len()) {
        let ordered: Vec<Step> = perm.iter().map(|&k| steps[k].clone()).collect();
        let executable = executable(
            &reference.model,
            &reference.initial_world,
            perm.iter().map(|&k| reference_steps[k].instruction()),
        );
        let theorem_valid = validate_sequence(subject, &ordered, rule).valid;
        let derivable = derive(subject, &ordered, rule)
            .map(|p| check_derivation(&p, subject, rule).accepted)
            .unwrap_or(false);
        visit(OracleVerdict {
            sequence: ordered.iter().map(Step::name).collect(),
            executable,
            theorem_valid,
            derivable,
        });
        count += 1;
    }
    Ok(count)
}

/// One verdict per ordering of the plan's instructions.
pub fn enumerate_orderings(doc: &PlanDocument, opts: &OracleOptions) -> Result<Vec<OracleVerdict>, OracleError> {
    let mut out = Vec::new();
    for_each_ordering(doc, doc, opts, |v| out.push(v))?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscrepancyKind {
    /// Derivable but not valid.
    Unsound,
    /// Valid but not derivable.
    Incomplete,
    /// Validity and direct execution disagree.
    ExecutionMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Discrepancy {
    pub kinds: Vec<DiscrepancyKind>,
    pub verdict: OracleVerdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CrossCheckReport {
    pub permutations: usize,
    pub executable: usize,
    pub theorem_valid: usize,
    pub derivable: usize,
    pub discrepancies: Vec<Discrepancy>,
}

impl CrossCheckReport {
    pub fn passed(&self) -> bool {
        self.discrepancies.is_empty()
    }
}

/// Cross-checks a plan against itself.
pub fn cross_check(doc: &PlanDocument, opts: &OracleOptions) -> Result<CrossCheckReport, OracleError> {
    cross_check_with_reference(doc, doc, opts)
}

/// Cross-checks `subject`'s validity and derivations against execution
/// under `reference`'s effect model.
pub fn cross_check_with_reference(
    subject: &PlanDocument,
    reference: &PlanDocument,
    opts: &OracleOptions,
) -> Result<CrossCheckReport, OracleError> {
    let mut report = CrossCheckReport {
        permutations: 0,
        executable: 0,
        theorem_valid: 0,
        derivable: 0,
        discrepancies: Vec::new(),
    };
    report.permutations = for_each_ordering(subject, reference, opts, |v| {
        report.executable += usize::from(v.executable);
        report.theorem_valid += usize::from(v.theorem_valid);
        report.derivable += usize::from(v.derivable);
        let mut kinds = Vec::new();
        if v.derivable && !v.theorem_valid {
            kinds.push(DiscrepancyKind::Unsound);
        }
        if v.theorem_valid && !v.derivable {
            kinds.push(DiscrepancyKind::Incomplete);
        }
        if v.theorem_valid != v.executable {
            kinds.push(DiscrepancyKind::ExecutionMismatch);
        }
        if !kinds.is_empty() {
            report.discrepancies.push(Discrepancy { kinds, verdict: v });
        }
    })?;
    Ok(report)
}
