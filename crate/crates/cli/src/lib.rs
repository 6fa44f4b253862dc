//! Command-line front end for the rough billiard library.

pub mod config;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use roughbill::billiard::{self, stream_rng};
use roughbill::contact::{self, algebra_dim};
use roughbill::experiments::{self, AngleSampler, LaunchFace, ReturnAngleConfig, StripConfig};
use roughbill::{BilliardError, BilliardState, ContactError, ContactGeometry, ExperimentReport, RigidBody, Trajectory};

pub use config::{parse_config, ConfigErrors, RoughSpec, RunConfig, Sampler, TableKind, DEFAULT_SEED};
use config::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    ReturnAngle,
    Caustics,
    Bounded,
    Strip,
    VerifyStrict,
    VerifyOrthogonality,
    VerifyDims,
}

impl Command {
    /// Keys whose defaults differ for this command. Config files and flags override them.
    pub fn defaults(self) -> &'static [(&'static str, &'static str)] {
        match self {
            Command::Caustics => &[("table", "circle"), ("n", "2")],
            Command::Bounded => &[("table", "plates3d"), ("rough", "rank:2"), ("steps", "10000")],
            Command::Strip => &[("table", "strip"), ("rough", "random:none@1,full@1"), ("count", "100"), ("steps", "10000")],
            Command::ReturnAngle => &[("table", "box"), ("R", "0.2")],
            _ => &[],
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigErrors),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Billiard(#[from] BilliardError),
    #[error("{0}")]
    Contact(#[from] ContactError),
    #[error("trajectory stopped after {steps} collisions: {reason}")]
    Terminated { steps: usize, reason: String },
    #[error("verification failed: {0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Terminated { .. } | CliError::Billiard(_) | CliError::Contact(_) => 4,
            CliError::Failed(_) => 5,
        }
    }
}

/// Merges command defaults, config file pairs and flag pairs (later wins) and validates.
pub fn resolve_config(
    cmd: Command,
    file: Option<&str>,
    flags: &BTreeMap<String, String>,
) -> Result<RunConfig, ConfigErrors> {
    let mut map: BTreeMap<String, String> =
        cmd.defaults().iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    if let Some(text) = file {
        map.extend(config::parse_pairs(text)?);
    }
    map.extend(flags.iter().map(|(k, v)| (k.clone(), v.clone())));
    RunConfig::from_pairs(&map)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn io_at(path: &Path) -> impl Fn(io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

fn stdout_err(source: io::Error) -> CliError {
    CliError::Io { path: PathBuf::from("<stdout>"), source }
}

/// Initial state from the configuration.
pub fn initial_state(cfg: &RunConfig) -> Result<BilliardState, CliError> {
    let (center, velocity, spin) = cfg.initial_data();
    Ok(BilliardState::from_center(center, velocity, spin)?)
}

/// Simulates the configured trajectory. A trajectory cut short by an impact error is returned as is.
pub fn simulate(cfg: &RunConfig) -> Result<Trajectory, CliError> {
    let state = initial_state(cfg)?;
    let mut rng = stream_rng(cfg.seed, 0);
    Ok(billiard::simulate(&state, &cfg.build_table(), &cfg.ball(), &cfg.boundary_condition(), cfg.steps, &mut rng)?)
}

fn write_trajectory(cfg: &RunConfig, traj: &Trajectory, out: &mut dyn Write, csv_to_stdout: bool) -> Result<(), CliError> {
    let ball = cfg.ball();
    match &cfg.out {
        Some(p) => {
            let mut f = create(p)?;
            traj.write_csv(&ball, &mut f).and_then(|_| f.flush()).map_err(io_at(p))?;
        }
        None if csv_to_stdout => traj.write_csv(&ball, &mut *out).map_err(stdout_err)?,
        None => {}
    }
    if let Some(p) = &cfg.svg {
        let mut f = create(p)?;
        traj.write_svg((0, 1), &mut f).and_then(|_| f.flush()).map_err(io_at(p))?;
    }
    Ok(())
}

fn finish(traj: &Trajectory) -> Result<(), CliError> {
    match &traj.termination {
        Some(e) => Err(CliError::Terminated { steps: traj.steps(), reason: e.to_string() }),
        None => Ok(()),
    }
}

fn print_report(report: &ExperimentReport, out: &mut dyn Write) -> Result<(), CliError> {
    out.write_all(report.to_key_value().as_bytes()).map_err(stdout_err)
}

/// Runs a command, writing reports (or the trajectory CSV when no `out` path is set) to `out`.
pub fn run(cmd: Command, cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        Command::Simulate => {
            let traj = simulate(cfg)?;
            write_trajectory(cfg, &traj, out, true)?;
            if cfg.out.is_some() {
                let mut r = ExperimentReport::new("simulate");
                r.push("steps", traj.steps() as f64);
                r.push("energy_drift", traj.energy_drift(&cfg.ball()));
                print_report(&r, out)?;
            }
            finish(&traj)
        }
        Command::Caustics => {
            let traj = simulate(cfg)?;
            write_trajectory(cfg, &traj, out, false)?;
            finish(&traj)?;
            let mut r = experiments::caustic_analysis(&traj)?;
            r.push("energy_drift", traj.energy_drift(&cfg.ball()));
            print_report(&r, out)
        }
        Command::Bounded => {
            let traj = simulate(cfg)?;
            write_trajectory(cfg, &traj, out, false)?;
            finish(&traj)?;
            let axes: Vec<usize> = match cfg.table {
                TableKind::Plates | TableKind::Strip => (0..cfg.n - 1).collect(),
                _ => (0..cfg.n).collect(),
            };
            let mut r = experiments::boundedness_report(&traj, &axes);
            r.push("energy_drift", traj.energy_drift(&cfg.ball()));
            print_report(&r, out)
        }
        Command::Strip => {
            if cfg.table != TableKind::Strip {
                return Err(ConfigErrors(vec!["table: the strip experiment needs table = strip".into()]).into());
            }
            let sc = StripConfig {
                width: cfg.r,
                ball: cfg.ball(),
                bc: cfg.boundary_condition(),
                seeds: cfg.count,
                steps: cfg.steps,
                seed: cfg.seed,
            };
            let (r, traces) = experiments::strip_experiment(&sc)?;
            if let Some(p) = &cfg.out {
                let lags: Vec<usize> = (1..=cfg.steps.max(1)).filter(|l| l.is_power_of_two()).collect();
                let msd = experiments::mean_square_displacement(&traces, &lags);
                let mut f = create(p)?;
                let mut body = String::from("lag,msd\n");
                for (l, m) in lags.iter().zip(&msd) {
                    body.push_str(&format!("{l},{}\n", fmt_f64(*m)));
                }
                f.write_all(body.as_bytes()).and_then(|_| f.flush()).map_err(io_at(p))?;
            }
            print_report(&r, out)
        }
        Command::ReturnAngle => {
            let rc = ReturnAngleConfig {
                face: LaunchFace { sides: cfg.sides.clone(), face: 0 },
                ball: cfg.ball(),
                bc: cfg.boundary_condition(),
                sampler: match cfg.sampler {
                    Sampler::Cosine => AngleSampler::Cosine,
                    Sampler::Uniform => AngleSampler::UniformAngle,
                },
                spin: true,
                count: cfg.count,
                seed: cfg.seed,
                step_cap: 10_000,
                bins: cfg.bins,
            };
            let r = experiments::return_angle_experiment(&rc)?;
            if let Some(h) = &r.histogram {
                if let Some(p) = &cfg.out {
                    let mut f = create(p)?;
                    f.write_all(h.to_csv().as_bytes()).and_then(|_| f.flush()).map_err(io_at(p))?;
                }
                if let Some(p) = &cfg.svg {
                    let mut f = create(p)?;
                    h.write_svg(|phi| (2.0 * phi).sin(), &mut f).and_then(|_| f.flush()).map_err(io_at(p))?;
                }
            }
            print_report(&r, out)
        }
        Command::VerifyStrict => {
            let mut rng = stream_rng(cfg.seed, 0);
            let s = contact::strictness_suite(cfg.n, cfg.k, cfg.trials, &mut rng)?;
            let mut r = ExperimentReport::new("strict");
            r.push("n", cfg.n as f64);
            r.push("trials", cfg.trials as f64);
            for (name, value, _) in s.checks() {
                r.push(name, value);
            }
            r.pass = Some(s.passes());
            print_report(&r, out)?;
            if s.passes() { Ok(()) } else { Err(CliError::Failed(format!("max residual {:.3e}", s.max_residual()))) }
        }
        Command::VerifyOrthogonality => {
            let mut rng = stream_rng(cfg.seed, 0);
            let o = contact::orthogonality_suite(cfg.n, cfg.trials, &mut rng)?;
            let mut r = ExperimentReport::new("orthogonality");
            r.push("n", cfg.n as f64);
            r.push("trials", cfg.trials as f64);
            r.push("dims_ok", if o.dims_ok { 1.0 } else { 0.0 });
            r.push("cross_inner", o.cross_inner);
            r.push("normal_membership", o.normal_membership);
            r.push("min_singular_value", o.min_singular_value);
            r.pass = Some(o.passes());
            print_report(&r, out)?;
            if o.passes() { Ok(()) } else { Err(CliError::Failed(format!("{o:?}"))) }
        }
        Command::VerifyDims => {
            let n = cfg.n;
            let mut rng = stream_rng(cfg.seed, 0);
            let q = contact::ContactConfiguration::random(n, &mut rng)?;
            let body = RigidBody::ball(1.0, 1.0, n).map_err(BilliardError::from)?;
            let geom = ContactGeometry::new(q.clone(), [&body, &body])?;
            let mut r = ExperimentReport::new("dims");
            r.push("n", n as f64);
            r.push("dim_g", algebra_dim(n) as f64);
            r.push("dim_tangent", contact::subspace_boundary_tangent(&q)?.dim() as f64);
            r.push("dim_nonslip", geom.nonslip().dim() as f64);
            r.push("dim_rolling", contact::subspace_rolling(&q)?.dim() as f64);
            r.push("dim_diag", contact::subspace_diag(&q)?.dim() as f64);
            r.push("dim_impulse", geom.impulse().dim() as f64);
            for m in 1..=5 {
                for k in 0..m {
                    r.push(&format!("grassmannian_n{m}_k{k}"), contact::grassmannian_dim(m, k)? as f64);
                }
            }
            print_report(&r, out)
        }
    }
}
