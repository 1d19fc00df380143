use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hasse::error::Error;
use hasse::model::{error_stratum_formula, pipe_random_term_formula};
use hasse::skeleton::diagnostics;
use hasse::{
    compile, compute_anova, generate_plan, render, skeleton_table, CompileFailure, CompileOptions,
    Compiled, DataTable, InteractionPolicy, RenderFormat, RenderOptions,
};

#[derive(Parser)]
#[command(
    name = "hasse",
    version,
    about = "Compile experiment designs into Hasse diagrams, ANOVA skeletons, model formulas and randomized plans"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Design file.
    design: PathBuf,
    /// Write output here instead of stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Merge zero-df factors into their unique parent.
    #[arg(long)]
    merge_zero_df: bool,
    /// Override the interaction policy of the design.
    #[arg(long, value_enum)]
    interactions: Option<Interactions>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Interactions {
    None,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum Dialect {
    Error,
    Pipe,
}

#[derive(Clone, Copy, ValueEnum)]
enum TableFormat {
    Text,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum DiagramFormat {
    Dot,
    Ascii,
    Tikz,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the design and report diagnostics.
    Check(Common),
    /// Print the skeleton ANOVA table.
    Table {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "text")]
        format: TableFormat,
    },
    /// Print the model formula in one or both dialects.
    Formula {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        dialect: Option<Dialect>,
    },
    /// Draw the experiment diagram.
    Render {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "dot")]
        format: DiagramFormat,
        /// Leave level counts off the labels.
        #[arg(long)]
        no_levels: bool,
        /// Leave degrees of freedom off the labels.
        #[arg(long)]
        no_df: bool,
    },
    /// Generate a randomized layout as CSV.
    Plan {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: u64,
    },
    /// Compute the ANOVA table for a data file.
    Anova {
        #[command(flatten)]
        common: Common,
        /// CSV with the plan columns and a final `response` column.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: TableFormat,
    },
}

enum Failure {
    /// Design or data is invalid (exit 1).
    Invalid(String),
    /// Unreadable input or syntax error (exit 2).
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse(_) => Failure::Usage(e.to_string()),
            other => Failure::Invalid(other.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn load(c: &Common) -> Result<Compiled, Failure> {
    let text = read(&c.design)?;
    let opts = CompileOptions {
        interactions: c.interactions.map(|i| match i {
            Interactions::None => InteractionPolicy::None,
            Interactions::All => InteractionPolicy::All,
        }),
        merge_zero_df: c.merge_zero_df,
    };
    compile(&text, &opts).map_err(|f| match f {
        CompileFailure::Invalid(report) => Failure::Invalid(report.to_string().trim_end().into()),
        CompileFailure::Error(e) => e.into(),
    })
}

fn emit(c: &Common, text: &str) -> Result<(), Failure> {
    match &c.output {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Usage(format!("{}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Usage(e.to_string())),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Check(common) => {
            let compiled = load(&common)?;
            let mut out = compiled.report.to_string();
            for d in diagnostics(&compiled.diagram) {
                out.push_str(&format!("{d}\n"));
            }
            if out.is_empty() {
                out.push_str("ok\n");
            }
            emit(&common, &out)
        }
        Command::Table { common, format } => {
            let compiled = load(&common)?;
            let t = skeleton_table(&compiled.diagram).map_err(Error::from)?;
            emit(
                &common,
                &match format {
                    TableFormat::Text => t.to_text(),
                    TableFormat::Csv => t.to_csv(),
                },
            )
        }
        Command::Formula { common, dialect } => {
            let compiled = load(&common)?;
            let d = &compiled.diagram;
            let out = match dialect {
                Some(Dialect::Error) => {
                    format!("{}\n", error_stratum_formula(d).map_err(Error::from)?)
                }
                Some(Dialect::Pipe) => format!("{}\n", pipe_random_term_formula(d)),
                None => {
                    let error = match error_stratum_formula(d) {
                        Ok(f) => f.to_string(),
                        Err(e) => {
                            eprintln!("note: {e}");
                            "-".into()
                        }
                    };
                    format!("{error}\n{}\n", pipe_random_term_formula(d))
                }
            };
            emit(&common, &out)
        }
        Command::Render {
            common,
            format,
            no_levels,
            no_df,
        } => {
            let compiled = load(&common)?;
            let opts = RenderOptions {
                show_levels: !no_levels,
                show_df: !no_df,
                ..RenderOptions::new(match format {
                    DiagramFormat::Dot => RenderFormat::Dot,
                    DiagramFormat::Ascii => RenderFormat::Ascii,
                    DiagramFormat::Tikz => RenderFormat::Tikz,
                })
            };
            let s = render(&compiled.diagram, &opts).map_err(Error::from)?;
            emit(&common, &s)
        }
        Command::Plan { common, seed } => {
            let compiled = load(&common)?;
            let plan = generate_plan(&compiled.diagram, seed).map_err(Error::from)?;
            emit(&common, &plan.to_csv())
        }
        Command::Anova {
            common,
            data,
            format,
        } => {
            let compiled = load(&common)?;
            let table = DataTable::from_csv(&read(&data)?).map_err(Error::from)?;
            let a = compute_anova(&compiled.diagram, &table).map_err(Error::from)?;
            emit(
                &common,
                &match format {
                    TableFormat::Text => a.to_text(),
                    TableFormat::Csv => a.to_csv(),
                },
            )
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(2)
        }
    }
}
