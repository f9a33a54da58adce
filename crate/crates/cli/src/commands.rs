use std::fs;

use serde::Serialize;

use metastab::asymptotics::{parse, AsymptoticScalar};
use metastab::hierarchy::ClusterTree;
use metastab::metastable::{metastable_mixture, MetastableError, TimeClass, TimeScaleLattice};
use metastab::model::{Diagnostic, Mode, ProcessSpec, ReducedSpec, SpecDocument, SpecError};
use metastab::montecarlo::{
    occupation_distribution, ConcreteKernel, Execution, Sampler, SimOptions,
};
use metastab::presets::{preset, PRESETS};
use metastab::report::{
    marginal_map, start_distribution, table, AnalysisDoc, LabelMap, MetastableDoc,
    MetastableReportDoc, Presentation, SimulationDoc,
};
use metastab::verify::{mc_start, verify, VerifyOptions};

use crate::{
    Command, Format, MetastableArgs, PresetsArgs, SamplerArg, SimulateArgs, SpecArg, VerifyArgs,
};

pub const EXIT_INVALID: u8 = 1;
pub const EXIT_COMMENSURATE: u8 = 2;
pub const EXIT_VERIFY: u8 = 3;
pub const EXIT_IO: u8 = 4;

pub enum Failure {
    /// A report that is printed before exiting with `code`.
    Report {
        output: String,
        code: u8,
    },
    Message {
        message: String,
        code: u8,
    },
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure::Message {
        message: message.into(),
        code,
    }
}

type Outcome = Result<String, Failure>;

pub fn run(command: &Command, format: Format) -> Outcome {
    match command {
        Command::Validate(a) => validate(a, format),
        Command::Reduce(a) => reduce(a, format),
        Command::Analyze(a) => analyze(a, format),
        Command::Metastable(a) => metastable(a, format),
        Command::Simulate(a) => simulate(a, format),
        Command::Verify(a) => verify_cmd(a, format),
        Command::Presets(a) => presets(a, format),
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn render<T: Serialize>(format: Format, value: &T, text: impl FnOnce() -> String) -> String {
    match format {
        Format::Json => json(value),
        Format::Text => text(),
    }
}

fn read_document(arg: &SpecArg) -> Result<String, Failure> {
    if let Some(name) = arg.spec.strip_prefix("preset:") {
        return preset(name)
            .map(|p| p.document().to_json())
            .ok_or_else(|| fail(EXIT_INVALID, format!("unknown preset `{name}`")));
    }
    fs::read_to_string(&arg.spec)
        .map_err(|e| fail(EXIT_IO, format!("cannot read {}: {e}", arg.spec)))
}

fn load(arg: &SpecArg) -> Result<ProcessSpec, Failure> {
    let text = read_document(arg)?;
    let (spec, warnings) = metastab::model::load(&text).map_err(|e| match e {
        SpecError::Invalid(diags) => fail(
            EXIT_INVALID,
            diags
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("\n"),
        ),
        e => fail(EXIT_INVALID, e.to_string()),
    })?;
    for w in warnings {
        eprintln!("{w}");
    }
    Ok(spec)
}

fn load_reduced(arg: &SpecArg) -> Result<ReducedSpec, Failure> {
    load(arg)?
        .into_reduced()
        .map_err(|e| fail(EXIT_INVALID, e.to_string()))
}

fn build(spec: &ReducedSpec) -> Result<(ClusterTree, TimeScaleLattice), Failure> {
    let tree = ClusterTree::build(spec).map_err(|e| fail(EXIT_INVALID, e.to_string()))?;
    let lattice = TimeScaleLattice::new(&tree);
    Ok((tree, lattice))
}

#[derive(Serialize)]
struct ValidateDoc {
    valid: bool,
    mode: Mode,
    states: usize,
    diagnostics: Vec<Diagnostic>,
}

fn validate(arg: &SpecArg, format: Format) -> Outcome {
    let text = read_document(arg)?;
    let doc = SpecDocument::from_json(&text).map_err(|e| fail(EXIT_INVALID, e.to_string()))?;
    let diagnostics = match doc.to_spec() {
        Ok(spec) => spec.validate(),
        Err(diags) => diags,
    };
    let report = ValidateDoc {
        valid: !diagnostics.iter().any(Diagnostic::is_error),
        mode: doc.mode,
        states: doc.states.len(),
        diagnostics,
    };
    let output = render(format, &report, || {
        let mut out: String = report
            .diagnostics
            .iter()
            .map(|d| format!("{d}\n"))
            .collect();
        out.push_str(if report.valid { "valid\n" } else { "invalid\n" });
        out
    });
    if report.valid {
        Ok(output)
    } else {
        Err(Failure::Report {
            output,
            code: EXIT_INVALID,
        })
    }
}

fn reduce(arg: &SpecArg, format: Format) -> Outcome {
    let spec = load_reduced(arg)?;
    let doc = SpecDocument::from_reduced(&spec);
    Ok(match format {
        Format::Json => doc.to_json() + "\n",
        Format::Text => {
            let rows: Vec<Vec<String>> = doc
                .transitions
                .iter()
                .map(|t| {
                    vec![
                        t.from.clone(),
                        t.to.clone(),
                        t.p.clone(),
                        t.tau.clone().unwrap_or_default(),
                    ]
                })
                .collect();
            format!(
                "states: {}\n\n{}",
                doc.states.join(" "),
                table(&["from", "to", "p", "tau"], &rows)
            )
        }
    })
}

fn analyze(arg: &SpecArg, format: Format) -> Outcome {
    let spec = load_reduced(arg)?;
    let (tree, lattice) = build(&spec)?;
    let doc = AnalysisDoc::new(&tree, &lattice);
    Ok(render(format, &doc, || doc.to_text()))
}

fn start_labels(spec: &ReducedSpec, from: &Option<String>) -> Vec<String> {
    match from {
        Some(l) => vec![l.clone()],
        None => spec
            .origin
            .as_ref()
            .map_or(&spec.states, |o| &o.states)
            .clone(),
    }
}

fn start_of(
    spec: &ReducedSpec,
    label: &str,
) -> Result<Vec<(usize, metastab::asymptotics::Rational)>, Failure> {
    start_distribution(spec, label)
        .ok_or_else(|| fail(EXIT_INVALID, format!("unknown state `{label}`")))
}

fn parse_time(spec: &ReducedSpec, text: &str) -> Result<AsymptoticScalar, Failure> {
    parse(&spec.basis, text)
        .map_err(|e| fail(EXIT_INVALID, format!("bad time scale `{text}`: {e}")))
}

fn metastable_failure(e: MetastableError) -> Failure {
    match e {
        MetastableError::Commensurate { .. } => fail(EXIT_COMMENSURATE, e.to_string()),
        e => fail(EXIT_INVALID, e.to_string()),
    }
}

fn metastable(a: &MetastableArgs, format: Format) -> Outcome {
    let spec = load_reduced(&a.spec)?;
    let (tree, lattice) = build(&spec)?;
    let how = Presentation::for_spec(&spec, a.pairs);
    let t = a
        .time
        .as_deref()
        .map(|t| parse_time(&spec, t))
        .transpose()?;
    let mut reports = Vec::new();
    for label in start_labels(&spec, &a.from) {
        let start = start_of(&spec, &label)?;
        let doc = match &t {
            Some(t) => MetastableDoc::at_time(&spec, &tree, &lattice, &label, &start, t, how),
            None => MetastableDoc::full(&spec, &tree, &lattice, &label, &start, how),
        }
        .map_err(metastable_failure)?;
        reports.push(doc);
    }
    let doc = MetastableReportDoc { reports };
    Ok(render(format, &doc, || doc.to_text()))
}

fn sim_options(sampler: SamplerArg, sequential: bool) -> SimOptions {
    SimOptions {
        execution: if sequential {
            Execution::Sequential
        } else {
            Execution::default()
        },
        sampler: match sampler {
            SamplerArg::Auto => Sampler::Auto,
            SamplerArg::Path => Sampler::Path,
            SamplerArg::Uniformized => Sampler::Uniformized,
        },
        ..SimOptions::default()
    }
}

fn simulate(a: &SimulateArgs, format: Format) -> Outcome {
    let spec = load_reduced(&a.spec)?;
    let kernel =
        ConcreteKernel::instantiate(&spec, a.eps).map_err(|e| fail(EXIT_INVALID, e.to_string()))?;
    let label = a
        .from
        .clone()
        .unwrap_or_else(|| start_labels(&spec, &None)[0].clone());
    let start = mc_start(&spec, &label, a.eps).map_err(|e| fail(EXIT_INVALID, e))?;

    // a scale expression gets a prediction; a plain number is only a clock time
    let scale = parse(&spec.basis, &a.time).ok();
    let time = match &scale {
        Some(s) => s
            .evaluate(&spec.basis, a.eps)
            .map_err(|e| fail(EXIT_INVALID, format!("cannot evaluate `{}`: {e}", a.time)))?,
        None => a.time.parse::<f64>().map_err(|_| {
            fail(
                EXIT_INVALID,
                format!("`{}` is neither a scale nor a number", a.time),
            )
        })?,
    };
    let marginal = spec.origin.is_some() && !a.pairs;
    let predicted = match &scale {
        Some(s) => {
            let (tree, lattice) = build(&spec)?;
            match lattice.classify(s) {
                Ok(TimeClass::Interval(_)) => {
                    let mu = metastable_mixture(&tree, &lattice, &start_of(&spec, &label)?, s)
                        .map_err(metastable_failure)?;
                    Some(if marginal {
                        marginal_map(&spec, &mu)
                    } else {
                        LabelMap(
                            mu.iter()
                                .map(|(i, w)| (spec.states[i].clone(), w.to_string()))
                                .collect(),
                        )
                    })
                }
                _ => None,
            }
        }
        None => None,
    };
    let result = occupation_distribution(
        &kernel,
        &start,
        time,
        a.samples,
        a.seed,
        &sim_options(a.sampler, a.sequential),
    )
    .map_err(|e| fail(EXIT_INVALID, e.to_string()))?;
    let doc = SimulationDoc::new(
        &spec,
        &kernel,
        &result,
        &label,
        scale.map(|s| s.display(&spec.basis).to_string()),
        predicted.as_ref(),
        marginal,
    );
    Ok(render(format, &doc, || doc.to_text()))
}

fn verify_cmd(a: &VerifyArgs, format: Format) -> Outcome {
    let spec = load_reduced(&a.spec)?;
    let (tree, lattice) = build(&spec)?;
    if a.eps_list.is_empty() || a.eps_list.iter().any(|e| e.is_nan() || *e <= 0.0) {
        return Err(fail(EXIT_INVALID, "--eps-list needs positive values"));
    }
    let opts = VerifyOptions {
        eps_list: a.eps_list.clone(),
        mc_eps: a.mc_eps,
        samples: a.samples,
        seed: a.seed,
        starts: a.from.clone(),
        oracle_tol: a.oracle_tol,
        hitting_tol: a.hitting_tol,
        occupancy_tol: a.occupancy_tol,
        path_jump_limit: a.path_jump_limit,
        sim: sim_options(SamplerArg::Auto, a.sequential),
    };
    let doc = verify(&spec, &tree, &lattice, &opts);
    let output = render(format, &doc, || doc.to_text());
    if doc.ok() {
        Ok(output)
    } else {
        Err(Failure::Report {
            output,
            code: EXIT_VERIFY,
        })
    }
}

#[derive(Serialize)]
struct PresetDoc {
    name: &'static str,
    description: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    path: Option<String>,
}

fn presets(a: &PresetsArgs, format: Format) -> Outcome {
    let mut docs = Vec::new();
    if let Some(dir) = &a.out_dir {
        fs::create_dir_all(dir)
            .map_err(|e| fail(EXIT_IO, format!("cannot create {}: {e}", dir.display())))?;
    }
    for p in PRESETS {
        let path = match &a.out_dir {
            Some(dir) => {
                let path = dir.join(p.file);
                fs::write(&path, p.document().to_json() + "\n")
                    .map_err(|e| fail(EXIT_IO, format!("cannot write {}: {e}", path.display())))?;
                Some(path.display().to_string())
            }
            None => None,
        };
        docs.push(PresetDoc {
            name: p.name,
            description: p.description,
            path,
        });
    }
    Ok(render(format, &docs, || {
        let rows: Vec<Vec<String>> = docs
            .iter()
            .map(|d| {
                vec![
                    d.name.to_string(),
                    d.path
                        .clone()
                        .unwrap_or_else(|| format!("preset:{}", d.name)),
                    d.description.to_string(),
                ]
            })
            .collect();
        table(&["name", "spec", "description"], &rows)
    }))
}
