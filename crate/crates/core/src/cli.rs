//! The `krama` command line. [`run`] does all the work so that tests can
//! drive it with in-memory streams.

use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::deduction::{check_derivation, derive, format_proof, parse_proof};
use crate::domain::{EvalStatus, Label};
use crate::formula::{Formula, Notation};
use crate::oracle::{cross_check_with_reference, OracleOptions, DEFAULT_BOUND};
use crate::parser::{format_plan, parse_plan, CompositionRequest, DependencyMode, PlanDocument};
use crate::semantics::eval_formula;
use crate::sequencing::{self, TieBreak};
use crate::validity::{validate_sequence, DependencyRule, FirstFailure, ValidityReport};

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Human,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Deps {
    Declared,
    Inferred,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Sruti,
    Artha,
    SeqComplete,
    StepParallel,
}

/// Evaluate, sequence, validate and derive instruction plans.
#[derive(Debug, Parser)]
#[command(name = "krama", version)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub options: GlobalOptions,
}

#[derive(Debug, Args)]
pub struct GlobalOptions {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value = "human")]
    pub format: OutputFormat,
    /// Where consecutive dependencies come from.
    #[arg(long, global = true, value_enum, default_value = "inferred")]
    pub deps: Deps,
    /// Resolve ambiguous purpose chains by declaration order instead of failing.
    #[arg(long, global = true)]
    pub first_match: bool,
    /// Render formulas with Unicode connectives.
    #[arg(long, global = true)]
    pub unicode: bool,
    /// Warn about consecutive instructions with nothing in common.
    #[arg(long, global = true)]
    pub strict: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the canonical form of a plan.
    Parse { file: PathBuf },
    /// Evaluate the plan's composition to S, V or N.
    Eval { file: PathBuf },
    /// Check object and functional dependencies along the plan's order.
    Validate { file: PathBuf },
    /// Render the formula a sequencing method builds.
    Sequence {
        file: PathBuf,
        /// Defaults to the method the plan's composition statement uses.
        #[arg(long, value_enum)]
        method: Option<Method>,
    },
    /// Derive the plan's order with OCS and PLS.
    Derive {
        file: PathBuf,
        /// Print the proof in its text form.
        #[arg(long)]
        emit_proof: bool,
    },
    /// Check a proof written by `derive --emit-proof`.
    Check { file: PathBuf, proof: PathBuf },
    /// Run every ordering and compare execution, validity and derivability.
    Oracle {
        file: PathBuf,
        /// Execute orderings under this plan's effect model instead.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Largest instruction count to enumerate.
        #[arg(long, default_value_t = DEFAULT_BOUND as u64, value_parser = clap::value_parser!(u64).range(1..))]
        bound: u64,
        /// List the verdict for every ordering.
        #[arg(long)]
        verdicts: bool,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Parse { .. } => "parse",
            Command::Eval { .. } => "eval",
            Command::Validate { .. } => "validate",
            Command::Sequence { .. } => "sequence",
            Command::Derive { .. } => "derive",
            Command::Check { .. } => "check",
            Command::Oracle { .. } => "oracle",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct Diagnostic {
    severity: &'static str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    column: Option<usize>,
}

impl Diagnostic {
    fn error(message: impl Into<String>) -> Self {
        Self {
            severity: "error",
            message: message.into(),
            line: None,
            column: None,
        }
    }

    fn warning(message: impl Into<String>) -> Self {
        Self {
            severity: "warning",
            ..Self::error(message)
        }
    }
}

/// What a subcommand produced.
struct Outcome {
    code: i32,
    human: String,
    result: Value,
    diagnostics: Vec<Diagnostic>,
}

struct Failure {
    code: i32,
    diagnostic: Diagnostic,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            diagnostic: Diagnostic::error(message),
        }
    }
}

/// Parses `args` (program name first), runs the subcommand and returns
/// the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let config = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    execute(&config, out, err)
}

/// Runs an already parsed configuration.
pub fn execute(config: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let opts = &config.options;
    let (code, human, result, diagnostics) = match dispatch(config) {
        Ok(o) => (o.code, o.human, o.result, o.diagnostics),
        Err(f) => (f.code, String::new(), Value::Null, vec![f.diagnostic]),
    };
    match opts.format {
        OutputFormat::Json => {
            let doc = json!({
                "version": SCHEMA_VERSION,
                "subcommand": config.command.name(),
                "result": result,
                "diagnostics": diagnostics,
            });
            let _ = writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("values serialize"));
        }
        OutputFormat::Human => {
            let _ = out.write_all(human.as_bytes());
            for d in &diagnostics {
                let place = match (d.line, d.column) {
                    (Some(l), Some(c)) => format!("{l}:{c}: "),
                    _ => String::new(),
                };
                let _ = writeln!(err, "{}: {place}{}", d.severity, d.message);
            }
        }
    }
    code
}

fn read_input(path: &PathBuf) -> Result<String, Failure> {
    let mut text = String::new();
    let res = if path.as_os_str() == "-" {
        std::io::stdin().read_to_string(&mut text).map(|_| ())
    } else {
        std::fs::read_to_string(path).map(|t| text = t)
    };
    res.map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(text)
}

fn load(path: &PathBuf) -> Result<PlanDocument, Failure> {
    let text = read_input(path)?;
    parse_plan(&text).map_err(|e| Failure {
        code: EXIT_USAGE,
        diagnostic: Diagnostic {
            severity: "error",
            message: format!("{}: {}", e.kind, e.message),
            line: Some(e.line),
            column: Some(e.column),
        },
    })
}

fn notation(opts: &GlobalOptions) -> Notation {
    if opts.unicode {
        Notation::Unicode
    } else {
        Notation::Ascii
    }
}

fn tie(opts: &GlobalOptions) -> TieBreak {
    if opts.first_match {
        TieBreak::FirstMatch
    } else {
        TieBreak::Strict
    }
}

fn mode(opts: &GlobalOptions) -> DependencyMode {
    match opts.deps {
        Deps::Declared => DependencyMode::Declared,
        Deps::Inferred => DependencyMode::Inferred,
    }
}

fn rule_name(rule: DependencyRule) -> &'static str {
    match rule {
        DependencyRule::Declared => "declared",
        DependencyRule::Inferred => "inferred",
        DependencyRule::Asserted => "asserted",
    }
}

fn warnings(list: Vec<String>) -> Vec<Diagnostic> {
    list.into_iter().map(Diagnostic::warning).collect()
}

fn composed(doc: &PlanDocument, opts: &GlobalOptions) -> Result<(Formula, Vec<String>), Failure> {
    doc.composition_formula(tie(opts))
        .map_err(|e| Failure::usage(e.to_string()))
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("values serialize")
}

fn dispatch(config: &RunConfig) -> Result<Outcome, Failure> {
    let opts = &config.options;
    match &config.command {
        Command::Parse { file } => {
            let doc = load(file)?;
            let canonical = format_plan(&doc);
            Ok(Outcome {
                code: EXIT_OK,
                result: json!({
                    "canonical": canonical,
                    "instructions": doc.instructions.len(),
                    "method": doc.composition.method_name(),
                }),
                human: canonical,
                diagnostics: vec![],
            })
        }
        Command::Eval { file } => {
            let doc = load(file)?;
            let (f, warns) = composed(&doc, opts)?;
            let trace = eval_formula(&doc.model, &doc.initial_world, &f).map_err(|e| Failure::usage(e.to_string()))?;
            let mut human = format!("status: {}\nworld: {}\ntrace:\n", trace.status, trace.world_after);
            for s in &trace.steps {
                let path: Vec<String> = s.path.iter().map(usize::to_string).collect();
                let node = if path.is_empty() {
                    "root".to_string()
                } else {
                    path.join(".")
                };
                human.push_str(&format!("  {} {node} {}", s.status, s.formula));
                if let Some(d) = &s.diagnostic {
                    human.push_str(&format!("  [{}]", serde_json::to_string(d).expect("serializes")));
                }
                human.push('\n');
            }
            Ok(Outcome {
                code: if trace.status == EvalStatus::S {
                    EXIT_OK
                } else {
                    EXIT_INVALID
                },
                human,
                result: json!({
                    "formula": f.render(notation(opts)),
                    "status": trace.status,
                    "world_after": trace.world_after,
                    "truths_after": trace.truths_after,
                    "steps": trace.steps,
                }),
                diagnostics: warnings(warns),
            })
        }
        Command::Validate { file } => {
            let doc = load(file)?;
            let (steps, warns) = doc
                .composition_steps(tie(opts))
                .map_err(|e| Failure::usage(e.to_string()))?;
            let rule = doc.dependency_rule(mode(opts));
            let report = validate_sequence(&doc, &steps, rule);
            let mut diagnostics = warnings(warns);
            if opts.strict {
                for p in report.unrelated_pairs() {
                    diagnostics.push(Diagnostic::warning(format!(
                        "{} and {} share no object and no purpose link",
                        p.first, p.second
                    )));
                }
            }
            let mut result = to_value(&report);
            result["rule"] = json!(rule_name(rule));
            Ok(Outcome {
                code: if report.valid { EXIT_OK } else { EXIT_INVALID },
                human: validity_text(&report, rule),
                result,
                diagnostics,
            })
        }
        Command::Sequence { file, method } => {
            let doc = load(file)?;
            let (f, warns) = match method {
                None => composed(&doc, opts)?,
                Some(m) => sequence_with(&doc, *m, tie(opts))?,
            };
            let rendered = f.render(notation(opts));
            Ok(Outcome {
                code: EXIT_OK,
                human: format!("{rendered}\n"),
                result: json!({
                    "method": method.map_or(doc.composition.method_name(), method_name),
                    "formula": rendered,
                    "instructions": f.leaves().len(),
                }),
                diagnostics: warnings(warns),
            })
        }
        Command::Derive { file, emit_proof } => {
            let doc = load(file)?;
            let (steps, warns) = doc
                .composition_steps(tie(opts))
                .map_err(|e| Failure::usage(e.to_string()))?;
            let rule = doc.dependency_rule(mode(opts));
            match derive(&doc, &steps, rule) {
                Ok(proof) => {
                    let rules: Vec<&str> = proof.rules().iter().map(|r| r.name()).collect();
                    let text = format_proof(&proof);
                    let human = if *emit_proof {
                        text.clone()
                    } else {
                        format!(
                            "derivable: yes\nsegments: {}\nrules: {}\n",
                            proof.segments.len(),
                            if rules.is_empty() {
                                "none".to_string()
                            } else {
                                rules.join(", ")
                            }
                        )
                    };
                    let mut result = json!({
                        "derivable": true,
                        "rule": rule_name(rule),
                        "segments": proof.segments.len(),
                        "rules": rules,
                    });
                    if *emit_proof {
                        result["proof"] = json!(text);
                    }
                    Ok(Outcome {
                        code: EXIT_OK,
                        human,
                        result,
                        diagnostics: warnings(warns),
                    })
                }
                Err(failure) => {
                    let mut diagnostics = warnings(warns);
                    diagnostics.push(Diagnostic::error(failure.message.clone()));
                    Ok(Outcome {
                        code: EXIT_INVALID,
                        human: "derivable: no\n".into(),
                        result: json!({
                            "derivable": false,
                            "rule": rule_name(rule),
                            "failure": failure,
                        }),
                        diagnostics,
                    })
                }
            }
        }
        Command::Check { file, proof } => {
            let doc = load(file)?;
            let text = read_input(proof)?;
            let proof = parse_proof(&text).map_err(|e| Failure {
                code: EXIT_USAGE,
                diagnostic: Diagnostic {
                    line: Some(e.line),
                    ..Diagnostic::error(e.message)
                },
            })?;
            let rule = doc.dependency_rule(mode(opts));
            let check = check_derivation(&proof, &doc, rule);
            let (steps, warns) = doc
                .composition_steps(tie(opts))
                .map_err(|e| Failure::usage(e.to_string()))?;
            let planned: Vec<Option<&Label>> = steps.iter().map(|s| s.label.as_ref()).collect();
            let concluded: Vec<Option<&Label>> = proof.leaves().iter().map(|l| l.evidence.label.as_ref()).collect();
            let matches_plan = planned == concluded;
            let mut human = format!("accepted: {}\n", if check.accepted { "yes" } else { "no" });
            for d in &check.diagnostics {
                human.push_str(&format!("  {d}\n"));
            }
            human.push_str(&format!(
                "matches plan order: {}\n",
                if matches_plan { "yes" } else { "no" }
            ));
            let mut result = to_value(&check);
            result["matches_plan"] = json!(matches_plan);
            Ok(Outcome {
                code: if check.accepted && matches_plan {
                    EXIT_OK
                } else {
                    EXIT_INVALID
                },
                human,
                result,
                diagnostics: warnings(warns),
            })
        }
        Command::Oracle {
            file,
            reference,
            bound,
            verdicts,
        } => {
            let doc = load(file)?;
            let reference_doc = reference.as_ref().map(load).transpose()?;
            let oracle_opts = OracleOptions {
                bound: usize::try_from(*bound).unwrap_or(usize::MAX),
                mode: mode(opts),
                tie: tie(opts),
            };
            let reference_doc = reference_doc.as_ref().unwrap_or(&doc);
            let mut all = Vec::new();
            let report = if *verdicts {
                crate::oracle::for_each_ordering(&doc, reference_doc, &oracle_opts, |v| all.push(v))
                    .and_then(|_| cross_check_with_reference(&doc, reference_doc, &oracle_opts))
            } else {
                cross_check_with_reference(&doc, reference_doc, &oracle_opts)
            }
            .map_err(|e| Failure::usage(e.to_string()))?;
            let mut human = format!(
                "permutations: {}\nexecutable: {}\ntheorem_valid: {}\nderivable: {}\ndiscrepancies: {}\n",
                report.permutations,
                report.executable,
                report.theorem_valid,
                report.derivable,
                report.discrepancies.len()
            );
            for d in &report.discrepancies {
                let kinds: Vec<String> = d.kinds.iter().map(|k| format!("{k:?}")).collect();
                human.push_str(&format!("  {} [{}]\n", d.verdict.sequence.join(" "), kinds.join(", ")));
            }
            for v in &all {
                human.push_str(&format!(
                    "  {} executable={} valid={} derivable={}\n",
                    v.sequence.join(" "),
                    v.executable,
                    v.theorem_valid,
                    v.derivable
                ));
            }
            let mut result = to_value(&report);
            result["passed"] = json!(report.passed());
            if *verdicts {
                result["verdicts"] = to_value(&all);
            }
            Ok(Outcome {
                code: if report.passed() { EXIT_OK } else { EXIT_INVALID },
                human,
                result,
                diagnostics: vec![],
            })
        }
    }
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Sruti => "sruti",
        Method::Artha => "artha",
        Method::SeqComplete => "seq-complete",
        Method::StepParallel => "step-parallel",
    }
}

/// Builds `method`'s formula from the plan. The chain methods use the
/// composition's instructions when it names some, otherwise every labeled
/// instruction; the repetition methods need a `repeat` composition.
fn sequence_with(doc: &PlanDocument, method: Method, tie: TieBreak) -> Result<(Formula, Vec<String>), Failure> {
    let usage = |e: sequencing::SequencingError| Failure::usage(e.to_string());
    let repeat = match &doc.composition {
        CompositionRequest::SequentialCompletion { actions, matrix }
        | CompositionRequest::StepParallel { actions, matrix } => Some((actions, matrix)),
        _ => None,
    };
    match method {
        Method::Sruti => {
            let (steps, warns) = match &doc.composition {
                CompositionRequest::SrutiChain(_) | CompositionRequest::ArthaLink(_) => {
                    doc.composition_steps(tie).map_err(usage)?
                }
                _ if repeat.is_some() => doc.composition_steps(tie).map_err(usage)?,
                _ => (doc.all_steps(), vec![]),
            };
            Ok((sequencing::chain_steps(&steps).map_err(usage)?, warns))
        }
        Method::Artha => {
            let items = match &doc.composition {
                CompositionRequest::ArthaLink(labels) | CompositionRequest::SrutiChain(labels) => {
                    let mut order = doc.all_steps();
                    order.retain(|s| s.label.as_ref().is_some_and(|l| labels.contains(l)));
                    order
                }
                _ => doc.all_steps(),
            };
            let chain = sequencing::link_artha_chain(&items, tie).map_err(usage)?;
            Ok((sequencing::chain_steps(&chain.order).map_err(usage)?, chain.warnings))
        }
        Method::SeqComplete | Method::StepParallel => {
            let (actions, matrix) =
                repeat.ok_or_else(|| Failure::usage("this method needs a `repeat` composition in the plan"))?;
            let f = if method == Method::SeqComplete {
                sequencing::expand_sequential_completion(actions, matrix)
            } else {
                sequencing::expand_step_parallel(actions, matrix)
            };
            Ok((f.map_err(usage)?, vec![]))
        }
    }
}

fn validity_text(report: &ValidityReport, rule: DependencyRule) -> String {
    let mut s = format!("valid: {}\nrule: {}\n", report.valid, rule_name(rule));
    for p in &report.pair_findings {
        let shared: Vec<&str> = p.shared.iter().map(|o| o.as_str()).collect();
        s.push_str(&format!(
            "pair {} ({}, {}): {}, shared {{{}}}",
            p.index + 1,
            p.first,
            p.second,
            if p.dependency { "dependent" } else { "independent" },
            shared.join(", ")
        ));
        for c in &p.state_checks {
            let show = |x: &Option<crate::domain::StateLabel>| x.as_ref().map_or("-".to_string(), |v| v.to_string());
            s.push_str(&format!(
                ", {} {}/{} {}",
                c.object,
                show(&c.actual),
                show(&c.expected),
                if c.ok { "ok" } else { "mismatch" }
            ));
        }
        if let Some(r) = p.failure {
            s.push_str(&format!(" -> {r:?}"));
        }
        s.push('\n');
    }
    for issue in &report.step_issues {
        s.push_str(&format!(
            "step issue: {}\n",
            serde_json::to_string(issue).expect("serializes")
        ));
    }
    if let Some(reason) = report.corollary_reason {
        let at = match &report.first_failure {
            Some(FirstFailure::Pair { first, second, .. }) => format!("pair ({first}, {second})"),
            Some(FirstFailure::Start { step }) => format!("first step {step}"),
            None => String::new(),
        };
        s.push_str(&format!("corollary_reason: {reason:?} at {at}\n"));
    }
    s
}
