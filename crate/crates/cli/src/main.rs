//! `mvrc` — static robustness analysis of transaction workloads against
//! multiversion Read Committed.
//!
//! Exit codes: 0 robust/success, 1 not robust, 2 input or validation error,
//! 3 internal invariant violation found by the oracle.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mvrc_core::bench::{abbreviation, auction_n, load_benchmark, BenchmarkId};
use mvrc_core::dsl::{emit_workload, parse_workload};
use mvrc_core::oracle::{fuzz_soundness, FuzzConfig};
use mvrc_core::robustness::{check_robust, maximal_robust_subsets, AnalysisError, Verdict};
use mvrc_core::sql::translate_sql_file;
use mvrc_core::summary::{FlowClass, SummaryGraph};
use mvrc_core::workload::{AnalysisSettings, Btp, Granularity, Method, Schema};

#[derive(Parser)]
#[command(name = "mvrc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum GranularityArg {
    Attr,
    Tuple,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Type2,
    Type1,
}

#[derive(Args)]
struct WorkloadArgs {
    /// Workload description file.
    #[arg(long, value_name = "PATH", conflicts_with = "bench")]
    workload: Option<PathBuf>,
    /// Built-in benchmark: smallbank, tpcc, auction, or auction(N).
    #[arg(long, value_name = "ID")]
    bench: Option<String>,
    /// Restrict the analysis to these programs (names or abbreviations,
    /// comma separated).
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    programs: Vec<String>,
}

#[derive(Args)]
struct SettingsArgs {
    /// Dependency granularity.
    #[arg(long, value_enum, default_value = "attr")]
    granularity: GranularityArg,
    /// Honor foreign-key constraints (default).
    #[arg(long, overrides_with = "no_fk")]
    fk: bool,
    /// Ignore foreign-key constraints.
    #[arg(long)]
    no_fk: bool,
    /// Cycle criterion.
    #[arg(long, value_enum, default_value = "type2")]
    method: MethodArg,
}

impl SettingsArgs {
    fn settings(&self) -> AnalysisSettings {
        AnalysisSettings::new(
            match self.granularity {
                GranularityArg::Attr => Granularity::Attribute,
                GranularityArg::Tuple => Granularity::Tuple,
            },
            !self.no_fk,
            match self.method {
                MethodArg::Type2 => Method::Type2,
                MethodArg::Type1 => Method::Type1,
            },
        )
    }
}

#[derive(Subcommand)]
enum Command {
    /// Decide robustness of a workload and print a cycle witness if any.
    Check {
        #[command(flatten)]
        workload: WorkloadArgs,
        #[command(flatten)]
        settings: SettingsArgs,
    },
    /// List all maximal robust subsets of the workload's programs.
    Subsets {
        #[command(flatten)]
        workload: WorkloadArgs,
        #[command(flatten)]
        settings: SettingsArgs,
    },
    /// Export the summary graph in DOT format.
    Graph {
        #[command(flatten)]
        workload: WorkloadArgs,
        #[command(flatten)]
        settings: SettingsArgs,
        /// Output path for the DOT file.
        #[arg(long, value_name = "PATH")]
        dot: PathBuf,
    },
    /// Time robustness checks over the scaled auction workload and write a
    /// CSV of (n, mean seconds, edges, counterflow edges, verdict).
    Scale {
        /// Scaling factors, comma separated.
        #[arg(long, value_name = "LIST", value_delimiter = ',', required = true)]
        n_list: Vec<u32>,
        /// Timed repetitions per factor.
        #[arg(long, default_value_t = 3)]
        repeats: u32,
        /// Output CSV path.
        #[arg(long, value_name = "PATH")]
        csv: PathBuf,
        #[command(flatten)]
        settings: SettingsArgs,
    },
    /// Cross-check the analysis against randomized multiversion schedules.
    Fuzz {
        #[command(flatten)]
        workload: WorkloadArgs,
        #[command(flatten)]
        settings: SettingsArgs,
        /// Number of accepted schedules to inspect.
        #[arg(long, default_value_t = 10_000)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        max_txns: usize,
        #[arg(long, default_value_t = 3)]
        max_tuples: u32,
    },
    /// Translate SQL transaction programs into the workload language.
    Sql2btp {
        /// SQL input file.
        sql: PathBuf,
        /// Workload file providing the schema block.
        #[arg(long, value_name = "PATH")]
        schema: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn load_workload(args: &WorkloadArgs) -> Result<(Schema, Vec<Btp>, bool), String> {
    let (schema, programs, is_bench) = match (&args.workload, &args.bench) {
        (Some(path), None) => {
            let text = fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            let (schema, programs) =
                parse_workload(&text, path.to_str()).map_err(render_diagnostics)?;
            (schema, programs, false)
        }
        (None, Some(id)) => {
            let id: BenchmarkId = id.parse().map_err(|e| format!("{e}"))?;
            let (schema, programs) = load_benchmark(id);
            (schema, programs, true)
        }
        _ => return Err("exactly one of --workload or --bench is required".into()),
    };
    let programs = filter_programs(programs, &args.programs)?;
    Ok((schema, programs, is_bench))
}

fn filter_programs(programs: Vec<Btp>, wanted: &[String]) -> Result<Vec<Btp>, String> {
    if wanted.is_empty() {
        return Ok(programs);
    }
    let mut chosen = Vec::new();
    for name in wanted {
        let found = programs
            .iter()
            .find(|p| p.name == *name || abbreviation(&p.name) == name)
            .ok_or_else(|| format!("no program named {name:?} in the workload"))?;
        chosen.push(found.clone());
    }
    Ok(chosen)
}

fn render_diagnostics(diagnostics: Vec<mvrc_core::dsl::Diagnostic>) -> String {
    diagnostics
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

fn render_analysis_error(err: AnalysisError) -> String {
    match err {
        AnalysisError::Invalid(report) => report
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join("\n"),
        other => other.to_string(),
    }
}

fn subset_line(names: &[String], abbreviate: bool) -> String {
    let shown: Vec<&str> = names
        .iter()
        .map(|n| {
            if abbreviate {
                abbreviation(n)
            } else {
                n.as_str()
            }
        })
        .collect();
    format!("{{{}}}", shown.join(", "))
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Check { workload, settings } => {
            let (schema, programs, _) = load_workload(&workload)?;
            let settings = settings.settings();
            let (verdict, graph) =
                check_robust(&schema, &programs, &settings).map_err(render_analysis_error)?;
            println!("{}", verdict.describe(&graph));
            Ok(if verdict.robust {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Subsets { workload, settings } => {
            let (schema, programs, is_bench) = load_workload(&workload)?;
            let settings = settings.settings();
            let subsets = maximal_robust_subsets(&schema, &programs, &settings)
                .map_err(render_analysis_error)?;
            println!(
                "maximal robust subsets ({}, {}):",
                settings.label(),
                match settings.method {
                    Method::Type2 => "type2",
                    Method::Type1 => "type1",
                }
            );
            for subset in &subsets {
                println!("{}", subset_line(subset, is_bench));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Graph {
            workload,
            settings,
            dot,
        } => {
            let (schema, programs, _) = load_workload(&workload)?;
            let settings = settings.settings();
            let (_, graph) =
                check_robust(&schema, &programs, &settings).map_err(render_analysis_error)?;
            let rendered = render_dot(&graph);
            fs::write(&dot, rendered)
                .map_err(|e| format!("cannot write {}: {e}", dot.display()))?;
            let stats = graph.stats();
            println!(
                "wrote {} ({} nodes, {} edges, {} counterflow)",
                dot.display(),
                stats.nodes,
                stats.edges,
                stats.counterflow_edges
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Scale {
            n_list,
            repeats,
            csv,
            settings,
        } => {
            let settings = settings.settings();
            let mut out = String::from("n,mean_seconds,edges,counterflow_edges,verdict\n");
            for &n in &n_list {
                if repeats == 0 {
                    continue;
                }
                let (schema, programs) = auction_n(n.max(1));
                let mut total = 0.0f64;
                let mut last: Option<(Verdict, SummaryGraph)> = None;
                for _ in 0..repeats {
                    let start = Instant::now();
                    let result = check_robust(&schema, &programs, &settings)
                        .map_err(render_analysis_error)?;
                    total += start.elapsed().as_secs_f64();
                    last = Some(result);
                }
                let (verdict, graph) = last.expect("at least one repetition");
                let stats = graph.stats();
                let line = format!(
                    "{n},{:.6},{},{},{}\n",
                    total / f64::from(repeats),
                    stats.edges,
                    stats.counterflow_edges,
                    if verdict.robust {
                        "ROBUST"
                    } else {
                        "NOT ROBUST"
                    }
                );
                print!("{line}");
                out.push_str(&line);
            }
            fs::write(&csv, out).map_err(|e| format!("cannot write {}: {e}", csv.display()))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Fuzz {
            workload,
            settings,
            budget,
            seed,
            max_txns,
            max_tuples,
        } => {
            let (schema, programs, _) = load_workload(&workload)?;
            let settings = settings.settings();
            let config = FuzzConfig {
                budget,
                seed,
                max_txns,
                max_tuples,
                ..FuzzConfig::default()
            };
            let report = fuzz_soundness(&schema, &programs, &settings, &config)
                .map_err(render_analysis_error)?;
            println!("{}", report.summary());
            if report.expected_counterexamples > 0 {
                println!(
                    "note: workload is not declared robust; {} non-serializable schedule(s) \
                     found as expected",
                    report.expected_counterexamples
                );
            }
            if report.is_clean() {
                Ok(ExitCode::SUCCESS)
            } else {
                if let Some(first) = &report.first_violation {
                    eprintln!("invariant violation: {first}");
                }
                Ok(ExitCode::from(3))
            }
        }
        Command::Sql2btp { sql, schema } => {
            let sql_text = fs::read_to_string(&sql)
                .map_err(|e| format!("cannot read {}: {e}", sql.display()))?;
            let schema_text = fs::read_to_string(&schema)
                .map_err(|e| format!("cannot read {}: {e}", schema.display()))?;
            let (schema, _) =
                parse_workload(&schema_text, schema.to_str()).map_err(render_diagnostics)?;
            let translated = translate_sql_file(&sql_text, &schema).map_err(render_diagnostics)?;
            // Attach the candidates as annotations, then comment them out:
            // the emitted file parses cleanly while keeping the proposals
            // visible for review.
            let programs: Vec<Btp> = translated
                .iter()
                .map(|p| p.btp.clone().with_annotations(p.candidates.clone()))
                .collect();
            let emitted = emit_workload(&schema, &programs);
            for line in emitted.lines() {
                match line.strip_prefix("  constraint ") {
                    Some(rest) => println!("  # candidate: constraint {rest}"),
                    None => println!("{line}"),
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// DOT rendering: one node per LTP, solid edges for non-counterflow,
/// dashed for counterflow, labeled with the source and target statements.
fn render_dot(graph: &SummaryGraph) -> String {
    let mut out = String::from("digraph summary {\n");
    for node in &graph.nodes {
        out.push_str(&format!("  \"{}\";\n", node.name));
    }
    for edge in &graph.edges {
        let src = &graph.nodes[edge.src_program];
        let dst = &graph.nodes[edge.dst_program];
        let style = match edge.flow {
            FlowClass::NonCounterflow => "",
            FlowClass::Counterflow => ", style=dashed",
        };
        out.push_str(&format!(
            "  \"{}\" -> \"{}\" [label=\"{} -> {}\"{}];\n",
            src.name,
            dst.name,
            src.statements[edge.src_stmt].display_label(),
            dst.statements[edge.dst_stmt].display_label(),
            style
        ));
    }
    out.push_str("}\n");
    out
}
