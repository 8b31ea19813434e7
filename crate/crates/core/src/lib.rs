//! Action-object imperative logic: plan documents, three-valued evaluation,
//! instruction sequencing, dependency validation and OCS/PLS derivations.

pub mod cli;
pub mod deduction;
pub mod domain;
pub mod formula;
pub mod oracle;
pub mod parser;
pub mod semantics;
pub mod sequencing;
pub mod validity;

pub use domain::{
    make_instruction, shared_objects, ActionEffect, ActionName, CoreError, EvalStatus, Instruction, Label, Model,
    ObjectId, Proposition, StateLabel, WorldState,
};
pub use formula::{Formula, Group, Notation};
pub use parser::{
    format_plan, parse_formula, parse_plan, AnnotatedInstruction, CompositionRequest, DependencyMode, ParseError,
    ParseErrorKind, PlanDocument, Step,
};
pub use semantics::{apply_effects, eval_atomic, eval_formula, EvalTrace, SemanticsError};
pub use sequencing::{
    build_sruti_chain, expand_sequential_completion, expand_step_parallel, link_artha_chain, ObjectMatrix,
    SequencingError, TieBreak,
};
pub use validity::{validate_sequence, CorollaryReason, DependencyRule, ValidityReport};
