//! Three-valued evaluation of formulas against a model and a world state.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::domain::{
    ActionEffect, ActionName, EvalStatus, Instruction, Model, ObjectId, Proposition, StateLabel, WorldState,
};
use crate::formula::Formula;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SemanticsError {
    #[error("no effect declared for `{action}` with {arity} argument(s)")]
    UnknownAction { action: ActionName, arity: usize },
    #[error("`{instruction}` needs {object}={expected} but found {}", actual.as_ref().map_or("nothing", |s| s.as_str()))]
    RequirementUnmet {
        instruction: Instruction,
        object: ObjectId,
        expected: StateLabel,
        actual: Option<StateLabel>,
    },
    #[error("precondition `{0}` is not a declared proposition")]
    ContextError(Proposition),
}

/// Why a node did not evaluate to S.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagnostic {
    RequirementUnmet {
        object: ObjectId,
        expected: StateLabel,
        actual: Option<StateLabel>,
    },
    NotIntended {
        precondition: Option<Proposition>,
        goal: Proposition,
    },
    PreconditionFalse {
        precondition: Proposition,
    },
    /// The left operand did not reach S, so the right one was not run.
    LeftOperandFailed,
    NoCommonObject,
    ParallelObjectConflict {
        shared: BTreeSet<ObjectId>,
    },
    NoBranchSatisfied,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceStep {
    /// Child indices from the root down to this node.
    pub path: Vec<usize>,
    pub formula: String,
    pub status: EvalStatus,
    pub world: WorldState,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<Diagnostic>,
}

/// Outcome of [`eval_formula`] with every visited node in post-order; the
/// root is always the last step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EvalTrace {
    pub status: EvalStatus,
    pub world_after: WorldState,
    pub truths_after: BTreeSet<Proposition>,
    pub steps: Vec<TraceStep>,
}

/// Pairs `(object, required, current)` for every constrained slot.
pub(crate) fn requirement_checks<'a>(
    effect: &'a ActionEffect,
    world: &'a WorldState,
    i: &'a Instruction,
) -> impl Iterator<Item = (&'a ObjectId, &'a StateLabel, Option<&'a StateLabel>)> + 'a {
    i.objects()
        .iter()
        .zip(&effect.required)
        .filter_map(move |(o, req)| req.as_ref().map(|req| (o, req, world.get(o))))
}

fn effect_of<'m>(model: &'m Model, i: &Instruction) -> Result<&'m ActionEffect, SemanticsError> {
    model.effect_for(i).ok_or_else(|| SemanticsError::UnknownAction {
        action: i.action().clone(),
        arity: i.arity(),
    })
}

fn write_yields(effect: &ActionEffect, world: &WorldState, i: &Instruction) -> WorldState {
    let mut next = world.clone();
    for (o, y) in i.objects().iter().zip(&effect.yielded) {
        if let Some(s) = y {
            next.set(o.clone(), s.clone());
        }
    }
    next
}

/// World after `i` runs; fails if any required state is not current.
pub fn apply_effects(model: &Model, world: &WorldState, i: &Instruction) -> Result<WorldState, SemanticsError> {
    let effect = effect_of(model, i)?;
    if let Some((o, req, actual)) = requirement_checks(effect, world, i).find(|(_, req, actual)| Some(*req) != *actual)
    {
        return Err(SemanticsError::RequirementUnmet {
            instruction: i.clone(),
            object: o.clone(),
            expected: req.clone(),
            actual: actual.cloned(),
        });
    }
    Ok(write_yields(effect, world, i))
}

/// S with the updated world when every requirement holds, V with the world
/// untouched otherwise.
pub fn eval_atomic(
    model: &Model,
    world: &WorldState,
    i: &Instruction,
) -> Result<(EvalStatus, WorldState), SemanticsError> {
    match apply_effects(model, world, i) {
        Ok(w) => Ok((EvalStatus::S, w)),
        Err(SemanticsError::RequirementUnmet { .. }) => Ok((EvalStatus::V, world.clone())),
        Err(e) => Err(e),
    }
}

/// Evaluates `f` with the model's facts as the initially true propositions.
pub fn eval_formula(model: &Model, world: &WorldState, f: &Formula) -> Result<EvalTrace, SemanticsError> {
    eval_formula_with(model, world, &model.facts, f)
}

/// Evaluates `f` with an explicit set of initially true propositions.
pub fn eval_formula_with(
    model: &Model,
    world: &WorldState,
    truths: &BTreeSet<Proposition>,
    f: &Formula,
) -> Result<EvalTrace, SemanticsError> {
    let mut ev = Evaluator {
        model,
        steps: Vec::new(),
    };
    let start = State {
        world: world.clone(),
        truths: truths.clone(),
    };
    let (status, end) = ev.eval(f, &mut Vec::new(), &start, None)?;
    Ok(EvalTrace {
        status,
        world_after: end.world,
        truths_after: end.truths,
        steps: ev.steps,
    })
}

#[derive(Clone)]
struct State {
    world: WorldState,
    truths: BTreeSet<Proposition>,
}

struct Evaluator<'m> {
    model: &'m Model,
    steps: Vec<TraceStep>,
}

impl Evaluator<'_> {
    fn record(
        &mut self,
        f: &Formula,
        path: &[usize],
        status: EvalStatus,
        world: &WorldState,
        diagnostic: Option<Diagnostic>,
    ) {
        self.steps.push(TraceStep {
            path: path.to_vec(),
            formula: f.to_string(),
            status,
            world: world.clone(),
            diagnostic,
        });
    }

    fn child(
        &mut self,
        f: &Formula,
        path: &mut Vec<usize>,
        k: usize,
        st: &State,
        reason: Option<&Proposition>,
    ) -> Result<(EvalStatus, State), SemanticsError> {
        path.push(k);
        let out = self.eval(f, path, st, reason);
        path.pop();
        out
    }

    fn eval(
        &mut self,
        f: &Formula,
        path: &mut Vec<usize>,
        st: &State,
        reason: Option<&Proposition>,
    ) -> Result<(EvalStatus, State), SemanticsError> {
        let (status, end, diag) = match f {
            Formula::Atom(i) => {
                let effect = effect_of(self.model, i)?;
                match requirement_checks(effect, &st.world, i).find(|(_, req, actual)| Some(*req) != *actual) {
                    Some((o, req, actual)) => (
                        EvalStatus::V,
                        st.clone(),
                        Some(Diagnostic::RequirementUnmet {
                            object: o.clone(),
                            expected: req.clone(),
                            actual: actual.cloned(),
                        }),
                    ),
                    None => {
                        let world = write_yields(effect, &st.world, i);
                        (
                            EvalStatus::S,
                            State {
                                world,
                                truths: st.truths.clone(),
                            },
                            None,
                        )
                    }
                }
            }
            Formula::Purpose(inner, goal) => {
                let intended = match reason {
                    Some(r) => self.model.intends(r, goal),
                    None => st.truths.iter().any(|q| self.model.intends(q, goal)),
                };
                if !intended {
                    let diag = Diagnostic::NotIntended {
                        precondition: reason.cloned(),
                        goal: goal.clone(),
                    };
                    (EvalStatus::N, st.clone(), Some(diag))
                } else {
                    let (s, mut end) = self.child(inner, path, 0, st, reason)?;
                    if s == EvalStatus::S {
                        end.truths.insert(goal.clone());
                        (s, end, None)
                    } else {
                        (s, st.clone(), None)
                    }
                }
            }
            Formula::Reason(tau, inner) => {
                if !self.model.propositions.contains(tau) {
                    return Err(SemanticsError::ContextError(tau.clone()));
                }
                if !st.truths.contains(tau) {
                    let diag = Diagnostic::PreconditionFalse {
                        precondition: tau.clone(),
                    };
                    (EvalStatus::V, st.clone(), Some(diag))
                } else {
                    let (s, end) = self.child(inner, path, 0, st, Some(tau))?;
                    (s, if s == EvalStatus::S { end } else { st.clone() }, None)
                }
            }
            Formula::Seq(a, b) => {
                let (sa, mid) = self.child(a, path, 0, st, reason)?;
                if sa != EvalStatus::S {
                    (EvalStatus::V, st.clone(), Some(Diagnostic::LeftOperandFailed))
                } else {
                    let (sb, end) = self.child(b, path, 1, &mid, reason)?;
                    if sb != EvalStatus::S {
                        (EvalStatus::V, st.clone(), None)
                    } else if a.last_objects().is_disjoint(&b.first_objects()) {
                        (EvalStatus::V, st.clone(), Some(Diagnostic::NoCommonObject))
                    } else {
                        (EvalStatus::S, end, None)
                    }
                }
            }
            Formula::Par(a, b) => {
                let (sa, mid) = self.child(a, path, 0, st, reason)?;
                let right_start = State {
                    world: mid.world.clone(),
                    truths: st.truths.clone(),
                };
                let (sb, end) = self.child(b, path, 1, &right_start, reason)?;
                if sa != EvalStatus::S || sb != EvalStatus::S {
                    (EvalStatus::V, st.clone(), None)
                } else {
                    let shared: BTreeSet<ObjectId> =
                        a.leaf_objects().intersection(&b.leaf_objects()).cloned().collect();
                    if shared.is_empty() {
                        let truths = mid.truths.union(&end.truths).cloned().collect();
                        (
                            EvalStatus::S,
                            State {
                                world: end.world,
                                truths,
                            },
                            None,
                        )
                    } else {
                        (
                            EvalStatus::V,
                            st.clone(),
                            Some(Diagnostic::ParallelObjectConflict { shared }),
                        )
                    }
                }
            }
            Formula::Choice(a, b) => {
                let (sa, ea) = self.child(a, path, 0, st, reason)?;
                let (sb, eb) = self.child(b, path, 1, st, reason)?;
                if sa == EvalStatus::S {
                    (EvalStatus::S, ea, None)
                } else if sb == EvalStatus::S {
                    (EvalStatus::S, eb, None)
                } else {
                    (EvalStatus::V, st.clone(), Some(Diagnostic::NoBranchSatisfied))
                }
            }
            Formula::ParGroup(group) => {
                let mut cur = st.world.clone();
                let mut truths = st.truths.clone();
                let mut all_s = true;
                for (k, m) in group.members().iter().enumerate() {
                    let start = State {
                        world: cur,
                        truths: st.truths.clone(),
                    };
                    let (s, end) = self.child(m, path, k, &start, reason)?;
                    all_s &= s == EvalStatus::S;
                    cur = end.world;
                    truths.extend(end.truths);
                }
                let mut seen = BTreeSet::new();
                let mut shared = BTreeSet::new();
                for m in group.members() {
                    for o in m.leaf_objects() {
                        if !seen.insert(o.clone()) {
                            shared.insert(o);
                        }
                    }
                }
                if !all_s {
                    (EvalStatus::V, st.clone(), None)
                } else if !shared.is_empty() {
                    (
                        EvalStatus::V,
                        st.clone(),
                        Some(Diagnostic::ParallelObjectConflict { shared }),
                    )
                } else {
                    (EvalStatus::S, State { world: cur, truths }, None)
                }
            }
        };
        self.record(f, path, status, &end.world, diag);
        Ok((status, end))
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::domain::tests::{act, instr, obj};
    use proptest::prelude::*;

    fn st(s: &str) -> StateLabel {
        StateLabel::new(s).unwrap()
    }

    fn prop(s: &str) -> Proposition {
        Proposition::new(s).unwrap()
    }

    pub(crate) fn effect(a: &str, req: &[Option<&str>], yie: &[Option<&str>]) -> ActionEffect {
        ActionEffect {
            action: act(a),
            params: (0..req.len()).map(|k| format!("x{k}")).collect(),
            required: req.iter().map(|s| s.map(st)).collect(),
            yielded: yie.iter().map(|s| s.map(st)).collect(),
        }
    }

    pub(crate) fn world(pairs: &[(&str, &str)]) -> WorldState {
        pairs.iter().map(|(o, s)| (obj(o), st(s))).collect()
    }

    pub(crate) fn rice_model() -> Model {
        let mut m = Model::default();
        m.add_effect(effect("pick", &[Some("raw")], &[Some("held")]));
        m.add_effect(effect(
            "cook",
            &[Some("held"), Some("empty")],
            &[Some("cooked"), Some("used")],
        ));
        m.add_effect(effect(
            "add",
            &[Some("cooked"), Some("empty")],
            &[Some("served"), Some("full")],
        ));
        m.add_effect(effect("wash", &[None], &[Some("clean")]));
        m.add_effect(effect("wait", &[], &[]));
        for o in ["rice", "pot", "dish", "pan"] {
            m.objects.insert(obj(o));
        }
        m
    }

    fn rice_world() -> WorldState {
        world(&[("rice", "raw"), ("pot", "empty"), ("dish", "empty"), ("pan", "dirty")])
    }

    fn a(name: &str, objs: &[&str]) -> Formula {
        Formula::atom(instr(name, objs))
    }

    #[test]
    fn atomic_examples() {
        let m = rice_model();
        let (s, w) = eval_atomic(&m, &world(&[("rice", "raw")]), &instr("pick", &["rice"])).unwrap();
        assert_eq!((s, w), (EvalStatus::S, world(&[("rice", "held")])));
        let cooked = world(&[("rice", "cooked")]);
        assert_eq!(
            eval_atomic(&m, &cooked, &instr("pick", &["rice"])).unwrap(),
            (EvalStatus::V, cooked.clone())
        );
        assert_eq!(
            eval_atomic(&m, &cooked, &instr("wait", &[])).unwrap(),
            (EvalStatus::S, cooked)
        );
        assert!(matches!(
            eval_atomic(&m, &rice_world(), &instr("stir", &["rice"])),
            Err(SemanticsError::UnknownAction { .. })
        ));
    }

    #[test]
    fn apply_effects_examples() {
        let m = rice_model();
        assert_eq!(
            apply_effects(&m, &world(&[("rice", "raw")]), &instr("pick", &["rice"])).unwrap(),
            world(&[("rice", "held")])
        );
        assert_eq!(
            apply_effects(
                &m,
                &world(&[("rice", "held"), ("pot", "empty")]),
                &instr("cook", &["rice", "pot"])
            )
            .unwrap(),
            world(&[("rice", "cooked"), ("pot", "used")])
        );
        let w = rice_world();
        assert_eq!(apply_effects(&m, &w, &instr("wait", &[])).unwrap(), w);
        assert!(matches!(
            apply_effects(&m, &w, &instr("add", &["rice", "dish"])),
            Err(SemanticsError::RequirementUnmet { .. })
        ));
    }

    #[test]
    fn rice_chain_is_satisfied() {
        let f = Formula::chain([
            a("pick", &["rice"]),
            a("cook", &["rice", "pot"]),
            a("add", &["rice", "dish"]),
        ])
        .unwrap();
        let t = eval_formula(&rice_model(), &rice_world(), &f).unwrap();
        assert_eq!(t.status, EvalStatus::S);
        assert_eq!(t.world_after.get(&obj("rice")), Some(&st("served")));
        assert_eq!(t.steps.len(), 5);
        assert_eq!(t.steps.last().unwrap().world, t.world_after);
        assert!(t.steps.last().unwrap().path.is_empty());
    }

    #[test]
    fn swapped_rice_is_violated() {
        let f = Formula::chain([
            a("pick", &["rice"]),
            a("add", &["rice", "dish"]),
            a("cook", &["rice", "pot"]),
        ])
        .unwrap();
        let t = eval_formula(&rice_model(), &rice_world(), &f).unwrap();
        assert_eq!(t.status, EvalStatus::V);
        assert_eq!(t.world_after, rice_world());
    }

    #[test]
    fn seq_without_common_object_is_violated() {
        let f = Formula::seq(a("pick", &["rice"]), a("wash", &["pan"]));
        let t = eval_formula(&rice_model(), &rice_world(), &f).unwrap();
        assert_eq!(t.status, EvalStatus::V);
        assert_eq!(t.steps.last().unwrap().diagnostic, Some(Diagnostic::NoCommonObject));
    }

    #[test]
    fn purpose_without_intention_is_n() {
        let mut m = rice_model();
        m.propositions.extend([prop("r"), prop("p1")]);
        m.facts.insert(prop("r"));
        let f = Formula::purpose(a("pick", &["rice"]), prop("p1"));
        let t = eval_formula(&m, &rice_world(), &f).unwrap();
        assert_eq!(t.status, EvalStatus::N);

        m.intention.insert((prop("r"), prop("p1")));
        let t = eval_formula(&m, &rice_world(), &f).unwrap();
        assert_eq!(t.status, EvalStatus::S);
        assert!(t.truths_after.contains(&prop("p1")));
    }

    #[test]
    fn reason_checks_context() {
        let mut m = rice_model();
        m.propositions.extend([prop("r"), prop("p1"), prop("p2")]);
        m.facts.insert(prop("r"));
        m.intention.insert((prop("r"), prop("p1")));
        m.intention.insert((prop("p1"), prop("p2")));
        let i1 = Formula::reason(prop("r"), Formula::purpose(a("pick", &["rice"]), prop("p1")));
        let i2 = Formula::reason(prop("p1"), Formula::purpose(a("cook", &["rice", "pot"]), prop("p2")));
        let t = eval_formula(&m, &rice_world(), &Formula::seq(i1.clone(), i2.clone())).unwrap();
        assert_eq!(t.status, EvalStatus::S);

        // p1 is false before i1 has run.
        let t = eval_formula(&m, &rice_world(), &i2).unwrap();
        assert_eq!(t.status, EvalStatus::V);
        assert!(matches!(
            t.steps.last().unwrap().diagnostic,
            Some(Diagnostic::PreconditionFalse { .. })
        ));

        let bad = Formula::reason(prop("ghost"), a("pick", &["rice"]));
        assert_eq!(
            eval_formula(&m, &rice_world(), &bad),
            Err(SemanticsError::ContextError(prop("ghost")))
        );
    }

    #[test]
    fn par_with_shared_object_conflicts() {
        let m = rice_model();
        let f = Formula::par(a("pick", &["rice"]), a("cook", &["rice", "pot"]));
        let t = eval_formula(&m, &rice_world(), &f).unwrap();
        assert_eq!(t.status, EvalStatus::V);
        assert!(matches!(
            &t.steps.last().unwrap().diagnostic,
            Some(Diagnostic::ParallelObjectConflict { shared }) if shared.contains(&obj("rice"))
        ));
        let f = Formula::par(a("pick", &["rice"]), a("wash", &["pan"]));
        assert_eq!(eval_formula(&m, &rice_world(), &f).unwrap().status, EvalStatus::S);
    }

    #[test]
    fn choice_takes_first_satisfied_branch() {
        let m = rice_model();
        let f = Formula::choice(a("add", &["rice", "dish"]), a("pick", &["rice"]));
        let t = eval_formula(&m, &rice_world(), &f).unwrap();
        assert_eq!(t.status, EvalStatus::S);
        assert_eq!(t.world_after.get(&obj("rice")), Some(&st("held")));
        let f = Formula::choice(a("add", &["rice", "dish"]), a("cook", &["rice", "pot"]));
        assert_eq!(eval_formula(&m, &rice_world(), &f).unwrap().status, EvalStatus::V);
    }

    #[test]
    fn group_requires_disjoint_members() {
        let mut m = Model::default();
        m.add_effect(effect("prime", &[Some("bare")], &[Some("primed")]));
        let w = world(&[("p1", "bare"), ("p2", "bare")]);
        let g = Formula::par_group(vec![a("prime", &["p1"]), a("prime", &["p2"])]).unwrap();
        let t = eval_formula(&m, &w, &g).unwrap();
        assert_eq!(t.status, EvalStatus::S);
        assert_eq!(t.world_after, world(&[("p1", "primed"), ("p2", "primed")]));
        let dup = Formula::par_group(vec![a("prime", &["p1"]), a("prime", &["p1"])]).unwrap();
        assert_eq!(eval_formula(&m, &w, &dup).unwrap().status, EvalStatus::V);
    }

    #[test]
    fn n_under_seq_becomes_v() {
        let mut m = rice_model();
        m.propositions.insert(prop("p1"));
        let f = Formula::seq(
            Formula::purpose(a("pick", &["rice"]), prop("p1")),
            a("cook", &["rice", "pot"]),
        );
        let t = eval_formula(&m, &rice_world(), &f).unwrap();
        assert_eq!(t.status, EvalStatus::V);
        assert!(t.steps.iter().any(|s| s.status == EvalStatus::N));
    }

    fn arb_leaf() -> impl Strategy<Value = Formula> {
        prop_oneof![
            Just(a("pick", &["rice"])),
            Just(a("cook", &["rice", "pot"])),
            Just(a("add", &["rice", "dish"])),
            Just(a("wash", &["pan"])),
            Just(a("wait", &[])),
        ]
    }

    fn arb_formula() -> impl Strategy<Value = Formula> {
        arb_leaf().prop_recursive(4, 16, 3, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(f, g)| Formula::seq(f, g)),
                (inner.clone(), inner.clone()).prop_map(|(f, g)| Formula::par(f, g)),
                (inner.clone(), inner.clone()).prop_map(|(f, g)| Formula::choice(f, g)),
                prop::collection::vec(inner, 1..4).prop_map(|v| Formula::par_group(v).unwrap()),
            ]
        })
    }

    proptest! {
        #[test]
        fn structural_properties(f in arb_formula()) {
            let m = rice_model();
            let t = eval_formula(&m, &rice_world(), &f).unwrap();
            prop_assert_eq!(&t, &eval_formula(&m, &rice_world(), &f).unwrap());
            prop_assert_eq!(&t.steps.last().unwrap().world, &t.world_after);
            prop_assert_ne!(t.status, EvalStatus::N);
            for step in t.steps.iter().filter(|s| s.status == EvalStatus::S) {
                let mut node = &f;
                for &k in &step.path {
                    node = node.children()[k];
                }
                match node {
                    Formula::Seq(x, y) => prop_assert!(!x.leaf_objects().is_disjoint(&y.leaf_objects())),
                    Formula::Par(x, y) => prop_assert!(x.leaf_objects().is_disjoint(&y.leaf_objects())),
                    _ => {}
                }
            }
        }

        #[test]
        fn group_order_does_not_change_status(members in prop::collection::vec(arb_leaf(), 1..5)) {
            let m = rice_model();
            let fwd = Formula::par_group(members.clone()).unwrap();
            let mut rev = members;
            rev.reverse();
            let back = Formula::par_group(rev).unwrap();
            let (a, b) = (eval_formula(&m, &rice_world(), &fwd).unwrap(), eval_formula(&m, &rice_world(), &back).unwrap());
            prop_assert_eq!(a.status, b.status);
            if a.status == EvalStatus::S {
                prop_assert_eq!(a.world_after, b.world_after);
            }
        }

        #[test]
        fn frame_property(o in "rice|pot|dish|pan") {
            let m = rice_model();
            let i = instr("pick", &["rice"]);
            let before = rice_world();
            let after = apply_effects(&m, &before, &i).unwrap();
            let o = obj(&o);
            if !i.mentions(&o) {
                prop_assert_eq!(before.get(&o), after.get(&o));
            }
        }
    }
}
