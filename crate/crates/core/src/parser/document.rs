use std::collections::BTreeSet;
use std::fmt;

use indexmap::IndexMap;
use serde::Serialize;

use crate::domain::{ActionName, Instruction, Label, Model, Proposition, WorldState};
use crate::formula::Formula;
use crate::sequencing::{self, ArthaChain, ObjectMatrix, SequencingError, TieBreak};
use crate::validity::DependencyRule;

/// An instruction together with its precondition, purpose and declared
/// predecessor.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct AnnotatedInstruction {
    pub instruction: Instruction,
    pub precondition: Option<Proposition>,
    pub purpose: Option<Proposition>,
    pub declared_dependency: Option<Label>,
}

impl AnnotatedInstruction {
    pub fn plain(instruction: Instruction) -> Self {
        Self {
            instruction,
            precondition: None,
            purpose: None,
            declared_dependency: None,
        }
    }

    /// `r ->r (i ->p p)`, dropping whichever wrapper is not annotated.
    pub fn formula(&self) -> Formula {
        let mut f = Formula::atom(self.instruction.clone());
        if let Some(p) = &self.purpose {
            f = Formula::purpose(f, p.clone());
        }
        if let Some(r) = &self.precondition {
            f = Formula::reason(r.clone(), f);
        }
        f
    }
}

/// One entry of an ordered instruction sequence. Instructions generated by
/// a repetition have no label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Step {
    pub label: Option<Label>,
    #[serde(flatten)]
    pub item: AnnotatedInstruction,
}

impl Step {
    pub fn labeled(label: Label, item: AnnotatedInstruction) -> Self {
        Self {
            label: Some(label),
            item,
        }
    }

    pub fn unlabeled(instruction: Instruction) -> Self {
        Self {
            label: None,
            item: AnnotatedInstruction::plain(instruction),
        }
    }

    pub fn instruction(&self) -> &Instruction {
        &self.item.instruction
    }

    /// Label when present, otherwise the instruction text.
    pub fn name(&self) -> String {
        match &self.label {
            Some(l) => l.to_string(),
            None => self.item.instruction.to_string(),
        }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Which sequencing method the document asks for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CompositionRequest {
    SrutiChain(Vec<Label>),
    ArthaLink(Vec<Label>),
    SequentialCompletion {
        actions: Vec<ActionName>,
        matrix: ObjectMatrix,
    },
    StepParallel {
        actions: Vec<ActionName>,
        matrix: ObjectMatrix,
    },
    RawFormula(Formula),
}

impl CompositionRequest {
    pub fn method_name(&self) -> &'static str {
        match self {
            CompositionRequest::SrutiChain(_) => "sruti",
            CompositionRequest::ArthaLink(_) => "artha",
            CompositionRequest::SequentialCompletion { .. } => "seq-complete",
            CompositionRequest::StepParallel { .. } => "step-parallel",
            CompositionRequest::RawFormula(_) => "formula",
        }
    }
}

/// A parsed plan: model, initial world, labeled instructions and the
/// requested composition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanDocument {
    pub model: Model,
    pub initial_world: WorldState,
    pub instructions: IndexMap<Label, AnnotatedInstruction>,
    pub composition: CompositionRequest,
}

impl PlanDocument {
    pub fn step(&self, label: &Label) -> Option<Step> {
        self.instructions
            .get(label)
            .map(|item| Step::labeled(label.clone(), item.clone()))
    }

    /// Every labeled instruction in declaration order.
    pub fn all_steps(&self) -> Vec<Step> {
        self.instructions
            .iter()
            .map(|(l, item)| Step::labeled(l.clone(), item.clone()))
            .collect()
    }

    fn steps_for(&self, labels: &[Label]) -> Vec<Step> {
        labels
            .iter()
            .map(|l| self.step(l).expect("labels resolved at parse time"))
            .collect()
    }

    /// The formula the composition request denotes.
    pub fn composition_formula(&self, tie: TieBreak) -> Result<(Formula, Vec<String>), SequencingError> {
        match &self.composition {
            CompositionRequest::SrutiChain(labels) => {
                let steps = self.steps_for(labels);
                Ok((sequencing::chain_steps(&steps)?, vec![]))
            }
            CompositionRequest::ArthaLink(labels) => {
                let ArthaChain { order, warnings } = sequencing::link_artha_chain(&self.artha_candidates(labels), tie)?;
                Ok((sequencing::chain_steps(&order)?, warnings))
            }
            CompositionRequest::SequentialCompletion { actions, matrix } => {
                Ok((sequencing::expand_sequential_completion(actions, matrix)?, vec![]))
            }
            CompositionRequest::StepParallel { actions, matrix } => {
                Ok((sequencing::expand_step_parallel(actions, matrix)?, vec![]))
            }
            CompositionRequest::RawFormula(f) => Ok((f.clone(), vec![])),
        }
    }

    /// The instructions of the composition in execution order.
    pub fn composition_steps(&self, tie: TieBreak) -> Result<(Vec<Step>, Vec<String>), SequencingError> {
        match &self.composition {
            CompositionRequest::SrutiChain(labels) => Ok((self.steps_for(labels), vec![])),
            CompositionRequest::ArthaLink(labels) => {
                let chain = sequencing::link_artha_chain(&self.artha_candidates(labels), tie)?;
                Ok((chain.order, chain.warnings))
            }
            _ => {
                let (f, warnings) = self.composition_formula(tie)?;
                Ok((self.steps_of_leaves(&f), warnings))
            }
        }
    }

    fn artha_candidates(&self, labels: &[Label]) -> Vec<Step> {
        // Ties break by declaration order, not by the order of the artha list.
        let wanted: BTreeSet<&Label> = labels.iter().collect();
        self.instructions
            .iter()
            .filter(|(l, _)| wanted.contains(l))
            .map(|(l, item)| Step::labeled(l.clone(), item.clone()))
            .collect()
    }

    /// Unlabeled steps for the formula's leaves, left to right.
    pub fn steps_of_leaves(&self, f: &Formula) -> Vec<Step> {
        f.leaves().into_iter().map(|i| Step::unlabeled(i.clone())).collect()
    }

    /// Steps a derivation may cite as premises: every labeled instruction
    /// plus the unlabeled instructions the composition generates.
    pub fn premise_pool(&self) -> Vec<Step> {
        let mut pool = self.all_steps();
        if let Ok((f, _)) = self.composition_formula(TieBreak::FirstMatch) {
            if !matches!(
                self.composition,
                CompositionRequest::SrutiChain(_) | CompositionRequest::ArthaLink(_)
            ) {
                for step in self.steps_of_leaves(&f) {
                    if !pool.contains(&step) {
                        pool.push(step);
                    }
                }
            }
        }
        pool
    }

    /// How consecutive dependencies are determined for this document's own
    /// composition. Direct-assertion chains assert a dependency between
    /// every consecutive pair; other methods infer it.
    pub fn dependency_rule(&self, mode: DependencyMode) -> DependencyRule {
        match (mode, &self.composition) {
            (DependencyMode::Declared, _) => DependencyRule::Declared,
            (DependencyMode::Inferred, CompositionRequest::SrutiChain(_)) => DependencyRule::Asserted,
            (DependencyMode::Inferred, _) => DependencyRule::Inferred,
        }
    }
}

/// User-facing choice of where dependencies come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DependencyMode {
    /// Only `after` annotations create dependencies.
    Declared,
    /// Dependencies follow from the sequencing method and the instructions.
    #[default]
    Inferred,
}
