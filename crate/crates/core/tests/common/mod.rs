#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use krama::{parse_plan, Label, PlanDocument, Step};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("corpus")
}

pub fn corpus_text(name: &str) -> String {
    std::fs::read_to_string(corpus_dir().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn corpus(name: &str) -> PlanDocument {
    parse_plan(&corpus_text(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Every well-formed corpus file, sorted by name.
pub fn corpus_files() -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(corpus_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "krama"))
        .collect();
    files.sort();
    files
}

pub fn malformed_files() -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(corpus_dir().join("malformed"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    files
}

pub fn steps(doc: &PlanDocument, labels: &[&str]) -> Vec<Step> {
    labels
        .iter()
        .map(|l| doc.step(&Label::new(*l).unwrap()).unwrap())
        .collect()
}

/// Shape limits for generated plans.
#[derive(Debug, Clone, Copy)]
pub struct Limits {
    pub max_instructions: usize,
    pub max_objects: usize,
    pub max_states: usize,
    pub max_arity: usize,
}

pub const LIMITS: Limits = Limits {
    max_instructions: 6,
    max_objects: 4,
    max_states: 3,
    max_arity: 2,
};

struct ActionSpec {
    arity: usize,
    required: Vec<Option<usize>>,
    yielded: Vec<Option<usize>>,
}

/// A random plan as `.krama` text with a `seq` over its instructions.
///
/// About half of the instructions are picked so that they can run and
/// share an object with their predecessor, which keeps a healthy share of
/// valid plans in the mix.
pub fn random_plan_text(rng: &mut ChaCha8Rng, limits: Limits) -> String {
    let n_obj = rng.gen_range(1..=limits.max_objects);
    let n_states = rng.gen_range(1..=limits.max_states);
    let n_actions = rng.gen_range(1..=3);
    let maybe_state = |rng: &mut ChaCha8Rng| {
        if rng.gen_bool(0.35) {
            None
        } else {
            Some(rng.gen_range(0..n_states))
        }
    };
    let actions: Vec<ActionSpec> = (0..n_actions)
        .map(|_| {
            let arity = rng.gen_range(0..=limits.max_arity.min(n_obj));
            ActionSpec {
                arity,
                required: (0..arity).map(|_| maybe_state(rng)).collect(),
                yielded: (0..arity).map(|_| maybe_state(rng)).collect(),
            }
        })
        .collect();
    let mut world: BTreeMap<usize, usize> = (0..n_obj).map(|o| (o, rng.gen_range(0..n_states))).collect();

    let mut text = String::new();
    for (o, s) in &world {
        text.push_str(&format!("object o{o} : s{s}\n"));
    }
    for (k, a) in actions.iter().enumerate() {
        let params: Vec<String> = (0..a.arity).map(|p| format!("x{p}")).collect();
        text.push_str(&format!("action a{k}({})", params.join(", ")));
        let bind = |slots: &[Option<usize>]| -> Vec<String> {
            slots
                .iter()
                .enumerate()
                .filter_map(|(p, s)| s.map(|s| format!("x{p}=s{s}")))
                .collect()
        };
        let req = bind(&a.required);
        if !req.is_empty() {
            text.push_str(&format!(" requires {}", req.join(", ")));
        }
        let yie = bind(&a.yielded);
        if !yie.is_empty() {
            text.push_str(&format!(" yields {}", yie.join(", ")));
        }
        text.push('\n');
    }

    let n_instr = rng.gen_range(1..=limits.max_instructions);
    let objects: Vec<usize> = (0..n_obj).collect();
    let mut prev: Vec<usize> = Vec::new();
    let mut labels = Vec::new();
    for k in 0..n_instr {
        let mut candidates: Vec<(usize, Vec<usize>)> = Vec::new();
        for (ai, a) in actions.iter().enumerate() {
            for _ in 0..4 {
                let objs: Vec<usize> = objects.choose_multiple(rng, a.arity).cloned().collect();
                candidates.push((ai, objs));
            }
        }
        let runnable = |(ai, objs): &(usize, Vec<usize>)| {
            let a = &actions[*ai];
            objs.iter()
                .zip(&a.required)
                .all(|(o, r)| r.is_none_or(|r| world[o] == r))
                && (prev.is_empty() || objs.iter().any(|o| prev.contains(o)))
        };
        let good: Vec<&(usize, Vec<usize>)> = candidates.iter().filter(|c| runnable(c)).collect();
        let (ai, objs) = if !good.is_empty() && rng.gen_bool(0.5) {
            (*good.choose(rng).unwrap()).clone()
        } else {
            candidates.choose(rng).unwrap().clone()
        };
        let a = &actions[ai];
        if objs
            .iter()
            .zip(&a.required)
            .all(|(o, r)| r.is_none_or(|r| world[o] == r))
        {
            for (o, y) in objs.iter().zip(&a.yielded) {
                if let Some(y) = y {
                    world.insert(*o, *y);
                }
            }
        }
        let args: Vec<String> = objs.iter().map(|o| format!("o{o}")).collect();
        text.push_str(&format!("i{k}: a{ai}({})\n", args.join(", ")));
        labels.push(format!("i{k}"));
        prev = objs;
    }
    labels.shuffle(rng);
    if rng.gen_bool(0.5) {
        labels.sort();
    }
    text.push_str(&format!("seq {}\n", labels.join(" -> ")));
    text
}

pub fn random_plan(rng: &mut ChaCha8Rng, limits: Limits) -> PlanDocument {
    let text = random_plan_text(rng, limits);
    parse_plan(&text).unwrap_or_else(|e| panic!("generated plan does not parse: {e}\n{text}"))
}
