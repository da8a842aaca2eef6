use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use physlab::config::{parse_pairs, parse_set};
use physlab::presets::{self, human_duration};
use physlab::{HarnessError, Result};

#[derive(Parser)]
#[command(name = "physlab", version, about = "Seeded experiment presets for physical-layer deep-learning studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset and write its artifacts plus manifest.json to --out.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// List the registered presets.
    List,
    /// Check a configuration without running it.
    Validate {
        #[command(flatten)]
        config: ConfigArgs,
    },
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    preset: String,
    /// key = value file; `#` starts a comment. --set entries win over it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. --set tier=desk.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

impl ConfigArgs {
    fn overrides(&self) -> Result<Vec<(String, String)>> {
        let mut out = Vec::new();
        if let Some(path) = &self.config {
            out.extend(read_config(path)?);
        }
        for s in &self.sets {
            out.push(parse_set(s).map_err(|v| HarnessError::Invalid(vec![v]))?);
        }
        Ok(out)
    }
}

fn read_config(path: &Path) -> Result<Vec<(String, String)>> {
    let text =
        std::fs::read_to_string(path).map_err(|source| HarnessError::ReadConfig { path: path.into(), source })?;
    parse_pairs(&text).map_err(|v| HarnessError::Invalid(vec![v]))
}

fn list() {
    let all = presets::registry();
    let w = all.iter().map(|p| p.name.len()).max().unwrap_or(0);
    for p in all {
        println!("{:w$}  {}", p.name, p.description());
    }
}

fn validate(args: &ConfigArgs) -> Result<()> {
    let preset = presets::find(&args.preset)?;
    let v = presets::validate(&preset, &args.overrides()?);
    for x in &v.violations {
        println!("{x}");
    }
    if let Some(est) = v.estimate_seconds {
        println!("estimated runtime: {}", human_duration(est));
    }
    if v.ok() {
        println!("ok");
        Ok(())
    } else {
        Err(HarnessError::Invalid(v.violations.into_iter().filter(|x| x.is_error()).collect()))
    }
}

fn run(args: &ConfigArgs, seed: u64, out: &Path) -> Result<()> {
    let preset = presets::find(&args.preset)?;
    let overrides = args.overrides()?;
    let v = presets::validate(&preset, &overrides);
    for w in v.violations.iter().filter(|x| !x.is_error()) {
        eprintln!("{w}");
    }
    let m = presets::run(&preset, seed, &overrides, out)?;
    for f in &m.files {
        println!("{}  {}", f.sha256, out.join(&f.name).display());
    }
    println!("manifest: {}", out.join(presets::MANIFEST).display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::List => {
            list();
            Ok(())
        }
        Command::Validate { config } => validate(config),
        Command::Run { config, seed, out } => run(config, *seed, out),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("physlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
