//! Shared value types: identifiers, instructions, effect tables, models and
//! world states.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised by the value constructors in this module.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoreError {
    #[error("identifier is empty")]
    EmptyIdentifier,
    #[error("`{0}` is not a valid identifier")]
    InvalidIdentifier(String),
    #[error("object `{object}` appears more than once in `{action}`")]
    DuplicateObject { action: String, object: String },
    #[error("a parallel group needs at least one member")]
    EmptyGroup,
}

/// Returns true when `s` is an identifier token: a letter or underscore
/// followed by letters, digits or underscores.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_alphanumeric() || c == '_')
}

fn check_identifier(s: &str) -> Result<(), CoreError> {
    if s.is_empty() {
        Err(CoreError::EmptyIdentifier)
    } else if !is_identifier(s) {
        Err(CoreError::InvalidIdentifier(s.to_string()))
    } else {
        Ok(())
    }
}

macro_rules! identifier_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "String")]
        pub struct $name(String);

        impl $name {
            pub fn new(name: impl Into<String>) -> Result<Self, CoreError> {
                let name = name.into();
                check_identifier(&name)?;
                Ok(Self(name))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl TryFrom<String> for $name {
            type Error = CoreError;
            fn try_from(value: String) -> Result<Self, Self::Error> {
                Self::new(value)
            }
        }

        impl TryFrom<&str> for $name {
            type Error = CoreError;
            fn try_from(value: &str) -> Result<Self, Self::Error> {
                Self::new(value)
            }
        }

        impl From<$name> for String {
            fn from(value: $name) -> String {
                value.0
            }
        }

        impl AsRef<str> for $name {
            fn as_ref(&self) -> &str {
                &self.0
            }
        }
    };
}

identifier_type!(
    /// Name of an action such as `pick` or `cook`.
    ActionName
);
identifier_type!(
    /// Name of an object acted upon, such as `rice`.
    ObjectId
);
identifier_type!(
    /// Opaque symbolic state of an object (`raw`, `held`, `cooked`, ...).
    StateLabel
);
identifier_type!(
    /// A precondition or purpose proposition.
    Proposition
);
identifier_type!(
    /// Label naming an instruction in a plan document (`i1`, `chop`, ...).
    Label
);

/// An action bound to an ordered list of distinct objects.
///
/// The order binds objects to the action's argument slots; dependency
/// checks only look at the object set.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Instruction {
    action: ActionName,
    objects: Vec<ObjectId>,
}

impl Instruction {
    pub fn new(action: ActionName, objects: Vec<ObjectId>) -> Result<Self, CoreError> {
        let mut seen = BTreeSet::new();
        for o in &objects {
            if !seen.insert(o) {
                return Err(CoreError::DuplicateObject {
                    action: action.to_string(),
                    object: o.to_string(),
                });
            }
        }
        Ok(Self { action, objects })
    }

    pub fn action(&self) -> &ActionName {
        &self.action
    }

    pub fn objects(&self) -> &[ObjectId] {
        &self.objects
    }

    pub fn arity(&self) -> usize {
        self.objects.len()
    }

    pub fn object_set(&self) -> BTreeSet<ObjectId> {
        self.objects.iter().cloned().collect()
    }

    pub fn mentions(&self, object: &ObjectId) -> bool {
        self.objects.contains(object)
    }
}

impl fmt::Display for Instruction {
    /// Declaration form, e.g. `cook(rice, pot)` or `wait()`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.action)?;
        for (k, o) in self.objects.iter().enumerate() {
            if k > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{o}")?;
        }
        f.write_str(")")
    }
}

/// Builds an instruction from an action and its objects.
pub fn make_instruction(action: ActionName, objects: Vec<ObjectId>) -> Result<Instruction, CoreError> {
    Instruction::new(action, objects)
}

/// Objects the two instructions have in common.
pub fn shared_objects(i: &Instruction, j: &Instruction) -> BTreeSet<ObjectId> {
    i.objects.iter().filter(|o| j.mentions(o)).cloned().collect()
}

/// Three-valued outcome of evaluating an imperative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EvalStatus {
    /// Satisfaction.
    S,
    /// Violation.
    V,
    /// No intention to achieve the goal.
    N,
}

impl fmt::Display for EvalStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalStatus::S => "S",
            EvalStatus::V => "V",
            EvalStatus::N => "N",
        })
    }
}

/// Required and yielded object states for one action signature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionEffect {
    pub action: ActionName,
    /// Parameter names, one per argument slot.
    pub params: Vec<String>,
    pub required: Vec<Option<StateLabel>>,
    pub yielded: Vec<Option<StateLabel>>,
}

impl ActionEffect {
    /// An effect with `arity` unconstrained slots and no yields.
    pub fn inert(action: ActionName, arity: usize) -> Self {
        Self {
            action,
            params: (1..=arity).map(|k| format!("x{k}")).collect(),
            required: vec![None; arity],
            yielded: vec![None; arity],
        }
    }

    pub fn arity(&self) -> usize {
        self.params.len()
    }

    /// Required state of `object` when the effect is bound to `instruction`.
    pub fn required_for(&self, instruction: &Instruction, object: &ObjectId) -> Option<&StateLabel> {
        let slot = instruction.objects().iter().position(|o| o == object)?;
        self.required.get(slot).and_then(Option::as_ref)
    }
}

/// Declared tables plus the effect model that gives instructions meaning.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Model {
    pub propositions: BTreeSet<Proposition>,
    pub actions: BTreeSet<ActionName>,
    pub objects: BTreeSet<ObjectId>,
    /// Propositions that hold before any instruction runs.
    pub facts: BTreeSet<Proposition>,
    /// (precondition, goal) pairs the agent intends; every other pair is false.
    pub intention: BTreeSet<(Proposition, Proposition)>,
    pub effects: BTreeMap<(ActionName, usize), ActionEffect>,
}

impl Model {
    pub fn intends(&self, precondition: &Proposition, goal: &Proposition) -> bool {
        self.intention.contains(&(precondition.clone(), goal.clone()))
    }

    pub fn effect(&self, action: &ActionName, arity: usize) -> Option<&ActionEffect> {
        self.effects.get(&(action.clone(), arity))
    }

    pub fn effect_for(&self, instruction: &Instruction) -> Option<&ActionEffect> {
        self.effect(instruction.action(), instruction.arity())
    }

    /// Registers an effect, adding its action to the action table.
    pub fn add_effect(&mut self, effect: ActionEffect) {
        self.actions.insert(effect.action.clone());
        self.effects.insert((effect.action.clone(), effect.arity()), effect);
    }
}

/// State label of every object at one point in time.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WorldState {
    states: BTreeMap<ObjectId, StateLabel>,
}

impl WorldState {
    pub fn new(states: BTreeMap<ObjectId, StateLabel>) -> Self {
        Self { states }
    }

    pub fn get(&self, object: &ObjectId) -> Option<&StateLabel> {
        self.states.get(object)
    }

    pub fn set(&mut self, object: ObjectId, state: StateLabel) {
        self.states.insert(object, state);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ObjectId, &StateLabel)> {
        self.states.iter()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

impl FromIterator<(ObjectId, StateLabel)> for WorldState {
    fn from_iter<T: IntoIterator<Item = (ObjectId, StateLabel)>>(iter: T) -> Self {
        Self {
            states: iter.into_iter().collect(),
        }
    }
}

impl fmt::Display for WorldState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, (o, s)) in self.states.iter().enumerate() {
            if k > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{o}={s}")?;
        }
        f.write_str("}")
    }
}
