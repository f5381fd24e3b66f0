use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use qeck_core::bench::{self, IMPLEMENTATION, SPECIFICATION};
use qeck_core::engine::{check_programs, BasisInput, CheckOptions};
use qeck_core::lang::{load_definition, validate, CheckedProgram};
use qeck_core::scheduler::{explore_with, simulate, Mode, Value, DEFAULT_NODE_BUDGET};

/// Equivalence checker for concurrent quantum protocols.
#[derive(Parser)]
#[command(name = "qeck", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Structured,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Sequential,
    Concurrent,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Sequential => Mode::Sequential,
            ModeArg::Concurrent => Mode::Concurrent,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check an implementation against its specification.
    Check {
        /// File holding the `Implementation` definition (and optionally the
        /// `Specification`).
        #[arg(long = "impl")]
        implementation: PathBuf,
        /// File holding the `Specification`; defaults to the `--impl` file.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "sequential")]
        mode: ModeArg,
        /// Maximum configurations visited per basis input.
        #[arg(long, default_value_t = DEFAULT_NODE_BUDGET, value_parser = clap::value_parser!(u64).range(1..))]
        budget: u64,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Compare weighted mixtures with the dense simulator when branches
        /// disagree.
        #[arg(long)]
        refine_mixture: bool,
    },
    /// Count interleavings and measurement branches of an implementation.
    Count {
        #[arg(long = "impl")]
        implementation: PathBuf,
        #[arg(long, value_enum, default_value = "concurrent")]
        mode: ModeArg,
        #[arg(long, default_value_t = DEFAULT_NODE_BUDGET, value_parser = clap::value_parser!(u64).range(1..))]
        budget: u64,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Check every `.qp` file of a corpus directory in both modes.
    Bench {
        #[arg(default_value = "corpus")]
        dir: PathBuf,
        #[arg(long, default_value_t = DEFAULT_NODE_BUDGET, value_parser = clap::value_parser!(u64).range(1..))]
        budget: u64,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Print every step of one sequential run with the state after it.
    Simulate {
        /// Simulate the `Implementation` of this file.
        #[arg(long = "impl", conflicts_with = "spec", required_unless_present = "spec")]
        implementation: Option<PathBuf>,
        /// Simulate the `Specification` of this file.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Comma-separated basis values, one per input: 0, 1, + or i.
        #[arg(long, default_value = "")]
        input: String,
        /// Comma-separated measurement results (0 or 1), one per measurement.
        #[arg(long, default_value = "")]
        force_outcomes: String,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
}

fn load(path: &Path, name: &str) -> Result<CheckedProgram, String> {
    let source = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let program = load_definition(&source, name).map_err(|e| format!("{}: {e}", path.display()))?;
    validate(&program).map_err(|e| format!("{}: {e}", path.display()))
}

fn json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable")
}

fn parse_outcomes(text: &str) -> Result<Vec<bool>, String> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| match s {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(format!("bad outcome {other:?} (expected 0 or 1)")),
        })
        .collect()
}

fn cmd_check(
    implementation: &Path,
    spec: Option<&Path>,
    options: CheckOptions,
    format: Format,
) -> Result<ExitCode, String> {
    let ip = load(implementation, IMPLEMENTATION)?;
    let sp = load(spec.unwrap_or(implementation), SPECIFICATION)?;
    let report = check_programs(&ip, &sp, &options).map_err(|e| e.to_string())?;
    match format {
        Format::Text => print!("{}", report.to_text()),
        Format::Structured => println!("{}", report.to_json()),
    }
    Ok(ExitCode::from(report.verdict.exit_code() as u8))
}

#[derive(serde::Serialize)]
struct Counts {
    protocol: String,
    interleavings: Option<u64>,
    branches: u64,
}

fn cmd_count(path: &Path, mode: Mode, budget: u64, format: Format) -> Result<ExitCode, String> {
    let p = load(path, IMPLEMENTATION)?;
    let total = |mode: Mode| -> Result<u64, String> {
        let mut leaves = 0;
        for input in BasisInput::enumerate(&p.input_sorts()) {
            leaves += explore_with(&p, &input, mode, budget, |_, _| Ok(()))
                .map_err(|e| format!("input {input}: {e}"))?
                .leaves;
        }
        Ok(leaves)
    };
    let counts = Counts {
        protocol: p.name().to_string(),
        interleavings: match mode {
            Mode::Concurrent => Some(total(Mode::Concurrent)?),
            Mode::Sequential => None,
        },
        branches: total(Mode::Sequential)?,
    };
    match format {
        Format::Structured => println!("{}", json(&counts)),
        Format::Text => {
            let file = path.display().to_string();
            match counts.interleavings {
                Some(i) => {
                    println!("{:<30} {:>16} {:>10}", "Protocol", "No. Interleaving", "No. Branch");
                    println!("{file:<30} {i:>16} {:>10}", counts.branches);
                }
                None => {
                    println!("{:<30} {:>10}", "Protocol", "No. Branch");
                    println!("{file:<30} {:>10}", counts.branches);
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_bench(dir: &Path, budget: u64, format: Format) -> Result<ExitCode, String> {
    let rows = bench::bench_dir(dir, budget).map_err(|e| format!("{}: {e}", dir.display()))?;
    match format {
        Format::Text => print!("{}", bench::render_table(&rows)),
        Format::Structured => println!("{}", json(&rows)),
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(serde::Serialize)]
struct SimStep {
    step: String,
    state: Vec<String>,
}

#[derive(serde::Serialize)]
struct SimResult {
    steps: Vec<SimStep>,
    outputs: Vec<(String, String)>,
}

fn cmd_simulate(path: &Path, name: &str, input: &str, forced: &str, format: Format) -> Result<ExitCode, String> {
    let p = load(path, name)?;
    let input = BasisInput::parse_for(input, &p.input_sorts())?;
    let forced = parse_outcomes(forced)?;
    let (trace, end) = simulate(&p, &input, &forced).map_err(|e| e.to_string())?;
    let steps: Vec<SimStep> = trace
        .into_iter()
        .map(|t| SimStep {
            step: t.label,
            state: t.state.dump(),
        })
        .collect();
    let mut outputs = Vec::new();
    for &(slot, value) in &end.emitted_outputs {
        let var = p.outputs[slot].var.clone();
        let shown = match value {
            Value::Bit(b) => (b as u8).to_string(),
            Value::Qubit(q) => match end.state.subset_separable(&[q]) {
                Some(t) => format!("{{{}}}", t.dump().join(", ")),
                None => "entangled".to_string(),
            },
        };
        outputs.push((var, shown));
    }
    let result = SimResult { steps, outputs };
    match format {
        Format::Structured => println!("{}", json(&result)),
        Format::Text => {
            for s in &result.steps {
                println!("{}", s.step);
                println!("    {{{}}}", s.state.join(", "));
            }
            for (var, shown) in &result.outputs {
                println!("output {var} = {shown}");
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Check {
            implementation,
            spec,
            mode,
            budget,
            format,
            refine_mixture,
        } => {
            let options = CheckOptions {
                mode: mode.into(),
                budget,
                refine_mixture,
                ..CheckOptions::default()
            };
            cmd_check(&implementation, spec.as_deref(), options, format)
        }
        Command::Count {
            implementation,
            mode,
            budget,
            format,
        } => cmd_count(&implementation, mode.into(), budget, format),
        Command::Bench { dir, budget, format } => cmd_bench(&dir, budget, format),
        Command::Simulate {
            implementation,
            spec,
            input,
            force_outcomes,
            format,
        } => match (implementation, spec) {
            (Some(path), _) => cmd_simulate(&path, IMPLEMENTATION, &input, &force_outcomes, format),
            (None, Some(path)) => cmd_simulate(&path, SPECIFICATION, &input, &force_outcomes, format),
            (None, None) => unreachable!("clap requires one of --impl/--spec"),
        },
    };
    match result {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
