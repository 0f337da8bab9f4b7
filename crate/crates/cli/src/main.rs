//! `hyplab` — stability scans, Evans scans, boundary-layer expansions and
//! small-viscosity convergence studies for hyperbolic-parabolic
//! boundary-value models.
//!
//! Exit codes: 0 completed, 1 acceptance criterion failed, 2 input/model
//! error, 3 numerical failure.

use clap::{Args, Parser, Subcommand};
use hyplab_cli::{accept, commands};
use hyplab_core::model::resolve_model;
use hyplab_core::CoreError;
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "hyplab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Model file path or builtin:<name> (see `hyplab list`).
    #[arg(long)]
    model: String,
    // Builtin parameter overrides.
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    a: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    b: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    theta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    u: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    v: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    rho: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    temp: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    gas_r: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    cv: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    g11: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    g12: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    s1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    s2: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    nl: Option<f64>,
}

impl ModelArgs {
    fn overrides(&self) -> BTreeMap<String, f64> {
        let mut map = BTreeMap::new();
        let pairs: [(&str, Option<f64>); 16] = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("a", self.a),
            ("b", self.b),
            ("theta", self.theta),
            ("u", self.u),
            ("v", self.v),
            ("rho", self.rho),
            ("temp", self.temp),
            ("gas_r", self.gas_r),
            ("cv", self.cv),
            ("g11", self.g11),
            ("g12", self.g12),
            ("s1", self.s1),
            ("s2", self.s2),
            ("nl", self.nl),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                map.insert(k.to_string(), v);
            }
        }
        map
    }
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Output directory for report files.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Angular resolution of hemisphere grids.
    #[arg(long, default_value_t = 64)]
    grid: usize,
    /// Gamma levels of the hemisphere scan.
    #[arg(long, value_delimiter = ',')]
    gamma_levels: Option<Vec<f64>>,
    /// Worker threads (default: rayon's choice).
    #[arg(long)]
    jobs: Option<usize>,
    /// Seed for randomized scans.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Override of the UNIFORM verdict threshold on min |det|.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// List builtin models and their parameters.
    List,
    /// Lopatinski + boundary-Cauchy stability report.
    Stability {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Low-frequency Evans function and degeneracy scan.
    Evans {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Build a boundary-layer expansion and report residuals.
    Expand {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        common: CommonArgs,
        /// Number of expansion terms.
        #[arg(long, default_value_t = 2)]
        order: usize,
    },
    /// Small-viscosity convergence study.
    Converge {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        common: CommonArgs,
        /// Viscosities, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.05, 0.025, 0.0125])]
        eps: Vec<f64>,
    },
    /// Run the acceptance suite.
    Accept {
        #[command(flatten)]
        common: CommonArgs,
        /// Run only criteria whose name contains this string (or a 1-based id).
        #[arg(long)]
        only: Option<String>,
    },
}

fn exit_code_for(e: &CoreError) -> ExitCode {
    match e {
        CoreError::SchemaError(_)
        | CoreError::InvariantViolation { .. }
        | CoreError::UnknownBuiltin(_)
        | CoreError::SyntaxError { .. }
        | CoreError::UnknownIdentifier { .. }
        | CoreError::Io(_)
        | CoreError::WrongShape(_) => ExitCode::from(2),
        _ => ExitCode::from(3),
    }
}

fn setup_jobs(common: &CommonArgs) {
    if let Some(j) = common.jobs {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for b in hyplab_core::model::registry() {
                let params: Vec<String> =
                    b.params.iter().map(|(k, v)| format!("{k} = {v}")).collect();
                println!("{:<10} {} [{}]", b.name, b.description, params.join(", "));
            }
            ExitCode::SUCCESS
        }
        Command::Stability { model, common } => {
            setup_jobs(&common);
            run_model_command(&model, &common, |m, opts, out| {
                commands::cmd_stability(m, opts, out)
            })
        }
        Command::Evans { model, common } => {
            setup_jobs(&common);
            run_model_command(&model, &common, |m, opts, out| {
                commands::cmd_evans(m, opts, out)
            })
        }
        Command::Expand {
            model,
            common,
            order,
        } => {
            setup_jobs(&common);
            run_model_command(&model, &common, |m, _opts, out| {
                commands::cmd_expand(m, order, out)
            })
        }
        Command::Converge { model, common, eps } => {
            setup_jobs(&common);
            run_model_command(&model, &common, |m, _opts, out| {
                commands::cmd_converge(m, &eps, out)
            })
        }
        Command::Accept { common, only } => {
            setup_jobs(&common);
            let results = accept::run_all(only.as_deref());
            let mut all_pass = true;
            for r in &results {
                let status = if r.pass { "PASS" } else { "FAIL" };
                println!(
                    "[{status}] {:>2}. {:<40} ({:.1}s) {}",
                    r.id, r.name, r.seconds, r.details
                );
                all_pass &= r.pass;
            }
            let summary = serde_json::json!({
                "schemaVersion": 1,
                "pass": all_pass,
                "criteria": results.iter().map(|r| serde_json::json!({
                    "id": r.id, "name": r.name, "group": r.group, "pass": r.pass,
                    "seconds": r.seconds, "details": r.details,
                })).collect::<Vec<_>>(),
            });
            let _ = std::fs::create_dir_all(&common.out);
            let _ = hyplab_core::report::write_json(&common.out.join("acceptance.json"), &summary);
            if all_pass {
                println!("acceptance: all {} criteria passed", results.len());
                ExitCode::SUCCESS
            } else {
                println!("acceptance: FAILURES present");
                ExitCode::from(1)
            }
        }
    }
}

fn run_model_command(
    margs: &ModelArgs,
    common: &CommonArgs,
    f: impl Fn(
        &hyplab_core::HyperbolicParabolicModel,
        &commands::ScanOptions,
        &std::path::Path,
    ) -> hyplab_core::Result<serde_json::Value>,
) -> ExitCode {
    let model = match resolve_model(&margs.model, &margs.overrides()) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("model error: {e}");
            return ExitCode::from(2);
        }
    };
    let mut opts = commands::ScanOptions {
        angles: common.grid,
        seed: common.seed,
        ..Default::default()
    };
    if let Some(levels) = &common.gamma_levels {
        opts.gamma_levels = levels.clone();
    }
    if let Some(tol) = common.tol {
        opts.uniform_threshold = tol;
    }
    match f(&model, &opts, &common.out) {
        Ok(_) => {
            println!("report written to {}", common.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
