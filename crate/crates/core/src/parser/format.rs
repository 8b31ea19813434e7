use std::fmt::Write;

use super::{CompositionRequest, PlanDocument};
use crate::domain::{ActionEffect, StateLabel};
use crate::formula::Notation;
use crate::sequencing::ObjectMatrix;

/// Renders a document in canonical form. Declarations are sorted,
/// instructions keep their order, comments are dropped.
pub fn format_plan(doc: &PlanDocument) -> String {
    let mut sections: Vec<String> = Vec::new();
    let model = &doc.model;

    let mut s = String::new();
    for (o, state) in doc.initial_world.iter() {
        writeln!(s, "object {o} : {state}").unwrap();
    }
    sections.push(s);

    let mut s = String::new();
    for effect in model.effects.values() {
        writeln!(s, "{}", action_line(effect)).unwrap();
    }
    sections.push(s);

    let mut s = String::new();
    for p in &model.propositions {
        writeln!(s, "prop {p}").unwrap();
    }
    for (r, p) in &model.intention {
        writeln!(s, "intend({r}, {p})").unwrap();
    }
    sections.push(s);

    let mut s = String::new();
    for (label, item) in &doc.instructions {
        write!(s, "{label}: {}", item.instruction).unwrap();
        if let Some(r) = &item.precondition {
            write!(s, " when {r}").unwrap();
        }
        if let Some(p) = &item.purpose {
            write!(s, " for {p}").unwrap();
        }
        if let Some(l) = &item.declared_dependency {
            write!(s, " after {l}").unwrap();
        }
        s.push('\n');
    }
    sections.push(s);

    let mut s = String::new();
    match &doc.composition {
        CompositionRequest::SrutiChain(labels) => {
            let names: Vec<&str> = labels.iter().map(|l| l.as_str()).collect();
            writeln!(s, "seq {}", names.join(" -> ")).unwrap();
        }
        CompositionRequest::ArthaLink(labels) => {
            let names: Vec<&str> = labels.iter().map(|l| l.as_str()).collect();
            writeln!(s, "artha {}", names.join(" ")).unwrap();
        }
        CompositionRequest::SequentialCompletion { actions, matrix } => {
            writeln!(s, "repeat sequential {}", repeat_tail(actions, matrix)).unwrap();
        }
        CompositionRequest::StepParallel { actions, matrix } => {
            writeln!(s, "repeat stepwise {}", repeat_tail(actions, matrix)).unwrap();
        }
        CompositionRequest::RawFormula(f) => {
            writeln!(s, "formula {}", f.render(Notation::Ascii)).unwrap();
        }
    }
    sections.push(s);

    sections
        .into_iter()
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}

fn action_line(effect: &ActionEffect) -> String {
    let mut s = format!("action {}({})", effect.action, effect.params.join(", "));
    let bindings = |slots: &[Option<StateLabel>]| -> Vec<String> {
        effect
            .params
            .iter()
            .zip(slots)
            .filter_map(|(p, st)| st.as_ref().map(|st| format!("{p}={st}")))
            .collect()
    };
    let req = bindings(&effect.required);
    if !req.is_empty() {
        write!(s, " requires {}", req.join(", ")).unwrap();
    }
    let yie = bindings(&effect.yielded);
    if !yie.is_empty() {
        write!(s, " yields {}", yie.join(", ")).unwrap();
    }
    s
}

fn repeat_tail(actions: &[crate::domain::ActionName], matrix: &ObjectMatrix) -> String {
    let names: Vec<&str> = actions.iter().map(|a| a.as_str()).collect();
    let row_text =
        |row: &[crate::domain::ObjectId]| -> String { row.iter().map(|o| o.as_str()).collect::<Vec<_>>().join(" ") };
    let rows = matrix.rows();
    let body = if rows.iter().all(|r| r == &rows[0]) {
        row_text(&rows[0])
    } else {
        format!("[{}]", rows.iter().map(|r| row_text(r)).collect::<Vec<_>>().join("; "))
    };
    format!("{} over {}", names.join(" "), body)
}
