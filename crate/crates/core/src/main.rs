use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use finslerlab::expr;
use finslerlab::jets::{JetContext, MAX_ORDER};
use finslerlab::manifest::{self, CheckKind};
use finslerlab::report;
use finslerlab::run::{self, RunOptions};
use finslerlab::suite::{self, SuiteOptions};

#[derive(Parser)]
#[command(name = "finslerlab", version, about = "Curvature engine for (alpha, beta) Finsler metrics")]
struct Cli {
    /// Seed for random sample points (overrides the manifest seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Tolerance override, `<check>=<value>`; for verify-paper a bare value
    /// replaces every numerical limit.
    #[arg(long = "tol", global = true, value_name = "NAME=VALUE")]
    tol: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the checks of a JSON manifest and print the JSON report.
    Run {
        manifest: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the per-point CSV table.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Include wall-clock timings (reports stop being byte-reproducible).
        #[arg(long)]
        timings: bool,
        /// Negate the curvature terms of the Ricci identities.
        #[arg(long)]
        flip_convention: bool,
    },
    /// Run the built-in reproduction scenarios.
    VerifyPaper {
        /// Only scenarios whose anchor contains this text.
        #[arg(long)]
        filter: Option<String>,
        /// Negate the curvature terms of the Ricci identities.
        #[arg(long)]
        flip_convention: bool,
        /// Print the outcomes as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Evaluate an expression and its partial derivatives at a point.
    Eval {
        #[arg(long)]
        expr: String,
        /// Comma-separated coordinates.
        #[arg(long, allow_hyphen_values = true)]
        at: String,
        /// Highest derivative order to report.
        #[arg(long, default_value_t = 1)]
        order: usize,
    },
}

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn parse_named_tolerances(items: &[String]) -> Result<BTreeMap<String, f64>, String> {
    let known: Vec<&str> = CheckKind::ALL.iter().map(|k| k.tolerance_key()).collect();
    items
        .iter()
        .map(|item| {
            let (name, value) = item.split_once('=').ok_or_else(|| format!("--tol expects NAME=VALUE, got {item:?}"))?;
            if !known.contains(&name) {
                return Err(format!("unknown tolerance {name:?}; expected one of {}", known.join(", ")));
            }
            let v: f64 = value.parse().map_err(|_| format!("tolerance {name:?} is not a number: {value:?}"))?;
            if v.is_nan() || v <= 0.0 {
                return Err(format!("tolerance {name:?} must be positive"));
            }
            Ok((name.to_string(), v))
        })
        .collect()
}

fn configure_threads() {
    if let Some(n) = std::env::var("FINSLERLAB_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // Failure only means a pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    match cli.command {
        Command::Run { manifest: path, out, csv, timings, flip_convention } => {
            let tolerances = match parse_named_tolerances(&cli.tol) {
                Ok(t) => t,
                Err(e) => return fail(e),
            };
            let m = match manifest::load_manifest(&path) {
                Ok(m) => m,
                Err(e) => return fail(format!("{}: {e}", path.display())),
            };
            let opts = RunOptions { seed: cli.seed, tolerances, timings, flip_convention };
            let rep = run::run(&m, &opts);
            let json = rep.to_json();
            match out {
                Some(p) => {
                    if let Err(e) = fs::write(&p, format!("{json}\n")) {
                        return fail(format!("{}: {e}", p.display()));
                    }
                }
                None => println!("{json}"),
            }
            if let Some(p) = csv {
                let (header, rows) = rep.csv_table();
                let written = fs::File::create(&p).map_err(|e| e.to_string()).and_then(|f| {
                    report::write_csv(f, &header, &rows).map_err(|e| e.to_string())
                });
                if let Err(e) = written {
                    return fail(format!("{}: {e}", p.display()));
                }
            }
            for c in rep.checks.iter().filter(|c| !c.verdict) {
                eprintln!("check {} failed", c.name);
            }
            if rep.verdict {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Command::VerifyPaper { filter, flip_convention, json } => {
            let tolerance = match cli.tol.as_slice() {
                [] => None,
                [v] => match v.rsplit('=').next().and_then(|s| s.parse::<f64>().ok()) {
                    Some(t) if t > 0.0 => Some(t),
                    _ => return fail(format!("--tol expects a positive number, got {v:?}")),
                },
                _ => return fail("verify-paper takes at most one --tol"),
            };
            let opts = SuiteOptions { seed: cli.seed.unwrap_or(suite::DEFAULT_SEED), tolerance, flip_convention };
            let outcomes = suite::verify(filter.as_deref(), &opts);
            if outcomes.is_empty() {
                return fail("no scenario matches the filter");
            }
            if json {
                println!("{}", report::to_json(&outcomes).expect("outcomes serialize"));
            } else {
                print!("{}", suite::format_table(&outcomes));
            }
            if outcomes.iter().all(|o| o.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Command::Eval { expr: text, at, order } => {
            let ast = match expr::parse(&text) {
                Ok(a) => a,
                Err(e) => return fail(e),
            };
            let point: Result<Vec<f64>, _> = at.split(',').map(|s| s.trim().parse::<f64>()).collect();
            let point = match point {
                Ok(p) if !p.is_empty() => p,
                _ => return fail(format!("--at expects comma-separated numbers, got {at:?}")),
            };
            if order > MAX_ORDER {
                return fail(format!("--order must be at most {MAX_ORDER}"));
            }
            let ctx: Arc<JetContext> = match JetContext::new(point.len(), order.max(1)) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            let jet = match expr::eval_jet(&ast, &ctx, &point) {
                Ok(j) => j,
                Err(e) => return fail(e),
            };
            let mut partials = serde_json::Map::new();
            for pos in 0..ctx.len() {
                let mi = ctx.multi_index(pos);
                let degree: usize = mi.iter().map(|&e| e as usize).sum();
                if degree > order {
                    continue;
                }
                let key: Vec<String> = mi.iter().map(u8::to_string).collect();
                let v = jet.partial(mi).expect("multi-index from the same context");
                partials.insert(key.join(","), report::float(v));
            }
            let out = serde_json::json!({
                "expr": ast.to_string(),
                "at": point.iter().map(|v| report::float(*v)).collect::<Vec<_>>(),
                "order": order,
                "partials": partials,
            });
            println!("{}", report::to_json(&out).expect("json value serializes"));
            ExitCode::SUCCESS
        }
    }
}
