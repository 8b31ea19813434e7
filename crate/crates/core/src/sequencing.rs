//! Builders for the three sequencing methods: direct-assertion chains,
//! purpose-linked chains and the two repetition schedules.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::domain::{ActionName, Instruction, ObjectId};
use crate::formula::Formula;
use crate::parser::Step;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SequencingError {
    #[error("cannot sequence an empty list of instructions")]
    EmptySequence,
    #[error("object matrix has {rows} row(s) but {actions} action(s)")]
    ShapeMismatch { rows: usize, actions: usize },
    #[error("object matrix must be a non-empty rectangle")]
    RaggedMatrix,
    #[error("`{0}` needs both a precondition and a purpose to be purpose-linked")]
    MissingAnnotation(String),
    #[error("purpose chain breaks after `{after}`: no remaining instruction has precondition `{purpose}`")]
    ChainBroken { after: String, purpose: String },
    #[error("purpose chain is ambiguous at `{position}`: candidates {candidates:?}")]
    ChainAmbiguous { position: String, candidates: Vec<String> },
    #[error("purpose chain loops through {0:?}")]
    ChainCycle(Vec<String>),
}

/// An `n x T` grid: row `k` lists the objects action `k` is repeated over.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectMatrix {
    rows: Vec<Vec<ObjectId>>,
}

impl ObjectMatrix {
    pub fn new(rows: Vec<Vec<ObjectId>>) -> Result<Self, SequencingError> {
        let width = rows.first().map_or(0, Vec::len);
        if width == 0 || rows.iter().any(|r| r.len() != width) {
            return Err(SequencingError::RaggedMatrix);
        }
        Ok(Self { rows })
    }

    /// The same object row for each of `n` actions.
    pub fn broadcast(row: Vec<ObjectId>, n: usize) -> Result<Self, SequencingError> {
        Self::new(vec![row; n])
    }

    pub fn rows(&self) -> &[Vec<ObjectId>] {
        &self.rows
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    /// Number of repetitions `T`.
    pub fn column_count(&self) -> usize {
        self.rows[0].len()
    }

    pub fn get(&self, row: usize, column: usize) -> &ObjectId {
        &self.rows[row][column]
    }
}

fn unary(action: &ActionName, object: &ObjectId) -> Formula {
    Formula::atom(Instruction::new(action.clone(), vec![object.clone()]).expect("one object cannot repeat"))
}

/// `(((i1 ->i i2) ->i i3) ... ->i in)`; a single instruction stays an atom.
pub fn build_sruti_chain(instructions: &[Instruction]) -> Result<Formula, SequencingError> {
    Formula::chain(instructions.iter().cloned().map(Formula::atom)).ok_or(SequencingError::EmptySequence)
}

/// Left-nested chain over each step's annotated formula.
pub fn chain_steps(steps: &[Step]) -> Result<Formula, SequencingError> {
    Formula::chain(steps.iter().map(|s| s.item.formula())).ok_or(SequencingError::EmptySequence)
}

/// How [`link_artha_chain`] treats several equally good successors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    #[default]
    Strict,
    /// Take the first candidate in declaration order and record a warning.
    FirstMatch,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArthaChain {
    pub order: Vec<Step>,
    pub warnings: Vec<String>,
}

/// Orders annotated instructions so each purpose is the next precondition.
///
/// `items` is taken in declaration order, which is also the tie-break
/// order under [`TieBreak::FirstMatch`].
pub fn link_artha_chain(items: &[Step], tie: TieBreak) -> Result<ArthaChain, SequencingError> {
    if items.is_empty() {
        return Err(SequencingError::EmptySequence);
    }
    for s in items {
        if s.item.precondition.is_none() || s.item.purpose.is_none() {
            return Err(SequencingError::MissingAnnotation(s.name()));
        }
    }
    let pre = |s: &Step| s.item.precondition.clone().unwrap();
    let pur = |s: &Step| s.item.purpose.clone().unwrap();

    let mut warnings = Vec::new();
    let mut pick = |candidates: Vec<usize>, position: String| -> Result<usize, SequencingError> {
        if candidates.len() == 1 || tie == TieBreak::FirstMatch {
            if candidates.len() > 1 {
                warnings.push(format!(
                    "ambiguous purpose chain at {position}: chose {} among {}",
                    items[candidates[0]].name(),
                    candidates
                        .iter()
                        .map(|&c| items[c].name())
                        .collect::<Vec<_>>()
                        .join(", ")
                ));
            }
            Ok(candidates[0])
        } else {
            Err(SequencingError::ChainAmbiguous {
                position,
                candidates: candidates.iter().map(|&c| items[c].name()).collect(),
            })
        }
    };

    let purposes: BTreeSet<_> = items.iter().map(pur).collect();
    let starts: Vec<usize> = (0..items.len())
        .filter(|&k| !purposes.contains(&pre(&items[k])))
        .collect();
    if starts.is_empty() {
        return Err(SequencingError::ChainCycle(items.iter().map(Step::name).collect()));
    }
    let first = pick(starts, "start".to_string())?;

    let mut used = vec![false; items.len()];
    used[first] = true;
    let mut order = vec![first];
    while order.len() < items.len() {
        let last = &items[*order.last().unwrap()];
        let want = pur(last);
        let candidates: Vec<usize> = (0..items.len())
            .filter(|&k| !used[k] && pre(&items[k]) == want)
            .collect();
        if candidates.is_empty() {
            let rest: Vec<usize> = (0..items.len()).filter(|&k| !used[k]).collect();
            let rest_purposes: BTreeSet<_> = rest.iter().map(|&k| pur(&items[k])).collect();
            if rest.iter().all(|&k| rest_purposes.contains(&pre(&items[k]))) {
                return Err(SequencingError::ChainCycle(
                    rest.iter().map(|&k| items[k].name()).collect(),
                ));
            }
            return Err(SequencingError::ChainBroken {
                after: last.name(),
                purpose: want.to_string(),
            });
        }
        let next = pick(candidates, format!("after {}", last.name()))?;
        used[next] = true;
        order.push(next);
    }
    Ok(ArthaChain {
        order: order.into_iter().map(|k| items[k].clone()).collect(),
        warnings,
    })
}

fn check_shape(actions: &[ActionName], matrix: &ObjectMatrix) -> Result<(), SequencingError> {
    if actions.is_empty() {
        return Err(SequencingError::EmptySequence);
    }
    if matrix.row_count() != actions.len() {
        return Err(SequencingError::ShapeMismatch {
            rows: matrix.row_count(),
            actions: actions.len(),
        });
    }
    Ok(())
}

/// Complete the whole action sequence on column `j` before column `j+1`;
/// the per-column chains are themselves joined by `->i`.
pub fn expand_sequential_completion(actions: &[ActionName], matrix: &ObjectMatrix) -> Result<Formula, SequencingError> {
    check_shape(actions, matrix)?;
    let columns = (0..matrix.column_count()).map(|j| {
        Formula::chain(actions.iter().enumerate().map(|(k, a)| unary(a, matrix.get(k, j))))
            .expect("at least one action")
    });
    Ok(Formula::chain(columns).expect("at least one column"))
}

/// Apply each action to every object of its row as a parallel group, then
/// move on to the next action.
pub fn expand_step_parallel(actions: &[ActionName], matrix: &ObjectMatrix) -> Result<Formula, SequencingError> {
    check_shape(actions, matrix)?;
    let groups = actions.iter().enumerate().map(|(k, a)| {
        let mut members: Vec<Formula> = matrix.rows()[k].iter().map(|o| unary(a, o)).collect();
        if members.len() == 1 {
            members.pop().unwrap()
        } else {
            Formula::par_group(members).expect("non-empty row")
        }
    });
    Ok(Formula::chain(groups).expect("at least one action"))
}
