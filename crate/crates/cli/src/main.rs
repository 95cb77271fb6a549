use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fredkin_cli::config::{self, ExperimentConfig};
use fredkin_cli::presets::PRESETS;
use fredkin_cli::run::case_records;
use fredkin_cli::CliError;
use toml::{Table, Value};

#[derive(Parser)]
#[command(name = "fredkin", version, about = "Fredkin-type interaction: cat states, entanglement and open-system dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write CSV tables plus manifest.json
    Run(ConfigArgs),
    /// List the presets, or print one preset as a config file
    Presets {
        /// Preset to print in full
        name: Option<String>,
    },
    /// Print the frame quantities and approximation-check margins only
    Check(ConfigArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Config file; `-` reads standard input
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preset used as the base layer
    #[arg(long)]
    preset: Option<String>,
    /// Output directory, replacing `output.dir`
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Dotted `key=value` override, e.g. `params.g=0.02`; repeatable
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut table = match &self.config {
            Some(path) => config::read_table(path)?,
            None => Table::new(),
        };
        if let Some(p) = &self.preset {
            table.insert("preset".into(), Value::String(p.clone()));
        }
        let mut overrides = self
            .overrides
            .iter()
            .map(|s| config::parse_override(s))
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(dir) = &self.out_dir {
            overrides.push(("output.dir".into(), Value::String(dir.display().to_string())));
        }
        config::resolve(table, &overrides)
    }
}

fn list_presets() {
    println!("{:<7} {:<10} summary", "name", "figure");
    for p in PRESETS {
        println!("{:<7} {:<10} {}", p.name, p.figure, p.summary);
    }
}

fn show_preset(name: &str) -> Result<(), CliError> {
    let p = fredkin_cli::presets::find(name).ok_or_else(|| CliError::Config(format!("unknown preset `{name}`")))?;
    let text = toml::to_string(&p.config()).map_err(|e| CliError::Internal(e.to_string()))?;
    println!("# {}: {}", p.figure, p.summary);
    print!("{text}");
    Ok(())
}

fn check(cfg: &ExperimentConfig) -> Result<(), CliError> {
    println!("case,xi_b,xi_c,g_b,g_c,omega_a_tilde,n_b,n_c,r_b,r_c,threshold,satisfied");
    for c in case_records(cfg)? {
        let (f, a) = (&c.frame, &c.approx);
        let label = if c.label.is_empty() { "-" } else { c.label.as_str() };
        println!(
            "{label},{},{},{},{},{},{},{},{},{},{},{}",
            f.xi_b, f.xi_c, f.g_b, f.g_c, f.omega_a_tilde, a.n_b, a.n_c, a.r_b, a.r_c, a.threshold, a.satisfied
        );
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Presets { name: None } => {
            list_presets();
            Ok(())
        }
        Command::Presets { name: Some(n) } => show_preset(&n),
        Command::Check(args) => check(&args.resolve()?),
        Command::Run(args) => {
            let cfg = args.resolve()?;
            let report = fredkin_cli::run(&cfg)?;
            println!(
                "wrote {} files to {}",
                report.manifest.outputs.len(),
                report.dir.display()
            );
            if !report.diagnostics_passed() {
                let failed: Vec<&str> = report
                    .manifest
                    .diagnostics
                    .iter()
                    .filter(|d| !d.passed)
                    .map(|d| d.label.as_str())
                    .collect();
                return Err(CliError::Diagnostic(format!(
                    "trajectory diagnostics failed for: {}",
                    failed.join(", ")
                )));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
