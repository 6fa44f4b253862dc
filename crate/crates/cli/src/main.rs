use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use roughbill_cli::{resolve_config, run, CliError, Command};

#[derive(Parser)]
#[command(name = "roughbill", version, about = "Rough billiards and strict collision maps on SE(n)")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate one trajectory and write it as CSV.
    Simulate,
    /// Run one of the experiments.
    Experiment {
        #[command(subcommand)]
        which: Experiment,
    },
    /// Numerical checks of the contact geometry.
    Verify {
        #[command(subcommand)]
        which: Verify,
    },
    /// Print the resolved configuration without running anything.
    Config,
}

#[derive(Subcommand, Clone, Copy)]
enum Experiment {
    ReturnAngle,
    Caustics,
    Bounded,
    Strip,
}

#[derive(Subcommand, Clone, Copy)]
enum Verify {
    Strict,
    Orthogonality,
    Dims,
}

/// Flags override values read from `--config`.
#[derive(Args)]
struct Opts {
    /// Flat key=value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    table: Option<String>,
    /// Table size: circle radius, wedge half-angle, strip width or plate gap.
    #[arg(long = "r", global = true)]
    table_size: Option<String>,
    /// Ball radius.
    #[arg(long = "R", global = true)]
    ball_radius: Option<String>,
    #[arg(long, global = true)]
    n: Option<String>,
    /// none | full | rank:k[:angle...] | random:cond@w,... | hemisphere:x;y[;z] | faces:cond/cond/...
    #[arg(long, global = true, allow_hyphen_values = true)]
    rough: Option<String>,
    #[arg(long, global = true)]
    steps: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long, global = true)]
    out: Option<String>,
    #[arg(long, global = true)]
    svg: Option<String>,
    #[arg(long, global = true)]
    count: Option<String>,
    #[arg(long, global = true)]
    trials: Option<String>,
    #[arg(long, global = true)]
    k: Option<String>,
    /// Any other key, as key=value. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE", allow_hyphen_values = true)]
    set: Vec<String>,
}

impl Opts {
    fn pairs(&self) -> Result<BTreeMap<String, String>, String> {
        let mut map = BTreeMap::new();
        for s in &self.set {
            let (k, v) = s.split_once('=').ok_or_else(|| format!("--set expects key=value, got `{s}`"))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let flags = [
            ("table", &self.table),
            ("r", &self.table_size),
            ("R", &self.ball_radius),
            ("n", &self.n),
            ("rough", &self.rough),
            ("steps", &self.steps),
            ("seed", &self.seed),
            ("out", &self.out),
            ("svg", &self.svg),
            ("count", &self.count),
            ("trials", &self.trials),
            ("k", &self.k),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                map.insert(k.to_string(), v.clone());
            }
        }
        Ok(map)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::Simulate | Cmd::Config => Command::Simulate,
        Cmd::Experiment { which } => match which {
            Experiment::ReturnAngle => Command::ReturnAngle,
            Experiment::Caustics => Command::Caustics,
            Experiment::Bounded => Command::Bounded,
            Experiment::Strip => Command::Strip,
        },
        Cmd::Verify { which } => match which {
            Verify::Strict => Command::VerifyStrict,
            Verify::Orthogonality => Command::VerifyOrthogonality,
            Verify::Dims => Command::VerifyDims,
        },
    };
    let result = (|| -> Result<(), CliError> {
        let flags = cli.opts.pairs().map_err(|e| roughbill_cli::ConfigErrors(vec![e]))?;
        let text = match &cli.opts.config {
            Some(p) => Some(std::fs::read_to_string(p).map_err(|source| CliError::Io { path: p.clone(), source })?),
            None => None,
        };
        let cfg = resolve_config(command, text.as_deref(), &flags)?;
        let stdout = io::stdout();
        let mut out = stdout.lock();
        if matches!(cli.command, Cmd::Config) {
            return out
                .write_all(cfg.to_config_string().as_bytes())
                .map_err(|source| CliError::Io { path: "<stdout>".into(), source });
        }
        run(command, &cfg, &mut out)?;
        out.flush().map_err(|source| CliError::Io { path: "<stdout>".into(), source })
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
