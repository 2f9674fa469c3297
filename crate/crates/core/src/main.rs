use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use shaderevo::api::{self, ServeConfig};
use shaderevo::cli::{parse_point, run_oracle_evolution};
use shaderevo::codegen::emit_shader;
use shaderevo::evolution::EvolutionParams;
use shaderevo::expr::{self, Expr};

#[derive(Parser)]
#[command(name = "shaderevo", version, about = "Evolve vertex-shader displacements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP API.
    Serve {
        #[arg(long, env = "PORT", default_value_t = api::DEFAULT_PORT,
              value_parser = clap::value_parser!(u16).range(1..))]
        port: u16,
        #[arg(long, env = "DATA_DIR", default_value = "./data")]
        data_dir: PathBuf,
        /// Directory with the web UI bundle, served at `/`.
        #[arg(long, env = "STATIC_DIR")]
        static_dir: Option<PathBuf>,
    },
    /// Evolve toward a target with a scripted selector; one JSON line per generation.
    Evolve {
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 10)]
        generations: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        pop: usize,
        #[arg(long, default_value_t = 9)]
        subset: usize,
    },
    /// Print the vertex shader for an expression.
    Emit {
        #[arg(long)]
        expr: String,
    },
    /// Evaluate an expression at one point.
    Eval {
        #[arg(long)]
        expr: String,
        /// Point as x,y,z,t.
        #[arg(long, allow_hyphen_values = true)]
        at: String,
    },
}

fn usage_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn parse_expr(text: &str) -> Result<Expr, ExitCode> {
    expr::deserialize(text).map_err(|e| usage_error(format!("cannot parse expression `{text}`: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Serve { port, data_dir, static_dir } => {
            tracing_subscriber::fmt()
                .with_writer(io::stderr)
                .with_env_filter(
                    tracing_subscriber::EnvFilter::try_from_default_env()
                        .unwrap_or_else(|_| "info".into()),
                )
                .init();
            let config = ServeConfig { port, data_dir, static_dir, ..ServeConfig::default() };
            let runtime = match tokio::runtime::Runtime::new() {
                Ok(rt) => rt,
                Err(e) => {
                    eprintln!("error: cannot start runtime: {e}");
                    return ExitCode::FAILURE;
                }
            };
            match runtime.block_on(api::serve(config)) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
        Command::Evolve { target, generations, seed, pop, subset } => {
            let target = match parse_expr(&target) {
                Ok(t) => t,
                Err(code) => return code,
            };
            let params = EvolutionParams { population_size: pop, subset_size: subset, seed, ..Default::default() };
            if let Err(e) = params.validate() {
                return usage_error(e);
            }
            let stdout = io::stdout();
            let mut out = stdout.lock();
            let mut write_failed = false;
            let result = run_oracle_evolution(target, params, generations, |report| {
                let line = serde_json::to_string(report).expect("report serializes");
                write_failed |= writeln!(out, "{line}").is_err();
            });
            match result {
                Ok(_) if !write_failed => ExitCode::SUCCESS,
                Ok(_) => ExitCode::FAILURE,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
        Command::Emit { expr } => match parse_expr(&expr) {
            Ok(e) => {
                print!("{}", emit_shader(&e).glsl_source);
                ExitCode::SUCCESS
            }
            Err(code) => code,
        },
        Command::Eval { expr, at } => {
            let e = match parse_expr(&expr) {
                Ok(e) => e,
                Err(code) => return code,
            };
            let point = match parse_point(&at) {
                Ok(p) => p,
                Err(msg) => return usage_error(msg),
            };
            println!("{}", serde_json::to_string(&e.evaluate(&point)).expect("finite value"));
            ExitCode::SUCCESS
        }
    }
}
