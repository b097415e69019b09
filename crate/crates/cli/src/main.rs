use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lnslab::config::{ExperimentConfig, Scenario};
use lnslab::verify::Faults;
use lnslab::{calibrate, demo, scenarios, verify, write_json, RunError};

#[derive(Parser)]
#[command(name = "lnslab", version, about = "Navier-Stokes perturbation experiments around weak-L3 backgrounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat TOML config overlaying the scenario defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for every random draw (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; reports are reproducible at a fixed count.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the configured datum without assertions.
    Simulate(Common),
    /// Small datum around the mollified Landau background; checks decay.
    Stability(Common),
    /// DSS datum and a smooth control; checks non-decay.
    Counterexample(Common),
    /// Invariant suite over every module.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Fault injection: flip the polar component of the Landau formula.
        #[arg(long, hide = true)]
        fault_landau_sign: bool,
    },
    /// Picard iteration on seeded R^8 instances.
    FixedpointDemo(Common),
    /// Lorentz norms of the configured datum.
    Norms(Common),
    /// Write the mollified Landau background.
    LandauGen(Common),
    /// Write the DSS datum and its annulus inequalities.
    DssGen(Common),
    /// Rerun the threshold sweep behind the default eps1, eps2.
    Calibrate(Common),
}

fn load(common: &Common, scenario: Scenario) -> Result<ExperimentConfig, RunError> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p, scenario)?,
        None => ExperimentConfig::defaults(scenario),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out = o.to_string_lossy().into_owned();
    }
    if let Some(t) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| RunError::Config(format!("thread pool: {e}")))?;
    }
    Ok(cfg)
}

fn verdict(pass: bool, what: &str) -> ExitCode {
    if pass {
        println!("{what}: pass");
        ExitCode::SUCCESS
    } else {
        println!("{what}: FAIL");
        ExitCode::from(1)
    }
}

fn run(cli: Cli) -> Result<ExitCode, RunError> {
    match cli.command {
        Command::Simulate(c) => {
            let cfg = load(&c, Scenario::Stability)?;
            let traj = scenarios::run_simulate(&cfg, Some(Path::new(&cfg.out)))?;
            let last = traj.final_row();
            println!("t = {} L3 = {:.6e} L3inf = {:.6e}", last.t, last.l3, last.l3winf);
            Ok(ExitCode::SUCCESS)
        }
        Command::Stability(c) => {
            let cfg = load(&c, Scenario::Stability)?;
            let r = scenarios::run_stability(&cfg, Some(Path::new(&cfg.out)))?;
            println!(
                "A = {:.4} ‖u0‖_(3,q) = {:.4e} gate {:?}; L3 ratio {:.4e} (target {}), C = {:.4}, A·K = {:.4}",
                r.background_weak_norm,
                r.data_norm,
                r.applied_gate,
                r.l3.final_ratio,
                r.decay_target,
                r.uniform_bound_constant,
                r.energy.a_k_hat
            );
            Ok(verdict(r.pass, "stability"))
        }
        Command::Counterexample(c) => {
            let cfg = load(&c, Scenario::Counterexample)?;
            let r = scenarios::run_counterexample(&cfg, Some(Path::new(&cfg.out)))?;
            println!(
                "weak norm {:.4}; min ratio {:.4}; r1 {:?}; control final ratio {:.4}{}",
                r.data_weak_norm,
                r.min_ratio,
                r.r1,
                r.control_final_ratio,
                if r.degenerate { " (degenerate datum)" } else { "" }
            );
            Ok(verdict(r.pass, "counterexample"))
        }
        Command::Verify {
            common,
            fault_landau_sign,
        } => {
            let cfg = load(&common, Scenario::Verify)?;
            let faults = Faults {
                landau_sign_flip: fault_landau_sign,
            };
            let r = verify::run_verify(&cfg, faults)?;
            let dir = Path::new(&cfg.out);
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join("verify.json"), r.to_json())?;
            for i in &r.items {
                println!(
                    "{:<12} {:<38} {} measured {:.3e} slack {:.3e}",
                    i.module,
                    i.name,
                    if i.pass { "pass" } else { "FAIL" },
                    i.measured,
                    i.slack
                );
            }
            Ok(verdict(r.pass, "verify"))
        }
        Command::FixedpointDemo(c) => {
            let cfg = load(&c, Scenario::FixedpointDemo)?;
            let r = demo::run_fixedpoint_demo(&cfg, Some(Path::new(&cfg.out)))?;
            println!(
                "{} instances; worst ratio {:.6}; worst uniqueness spread {:.3e}; scalar oracle {:.3e}",
                r.instances.len(),
                r.worst_ratio,
                r.worst_spread,
                r.scalar_oracle_error
            );
            Ok(verdict(r.pass, "fixedpoint-demo"))
        }
        Command::Norms(c) => {
            let cfg = load(&c, Scenario::Norms)?;
            let r = scenarios::run_norms(&cfg, Some(Path::new(&cfg.out)))?;
            println!("{}", serde_json::to_string_pretty(&r).expect("serializes"));
            Ok(ExitCode::SUCCESS)
        }
        Command::LandauGen(c) => {
            let cfg = load(&c, Scenario::Stability)?;
            let r = demo::landau_gen(&cfg, Path::new(&cfg.out))?;
            println!("a = {} weak norm {:.6}", r.a, r.weak_norm);
            Ok(ExitCode::SUCCESS)
        }
        Command::DssGen(c) => {
            let cfg = load(&c, Scenario::Counterexample)?;
            let r = demo::dss_gen(&cfg, Path::new(&cfg.out))?;
            println!("{}", r.inequalities.to_json());
            Ok(verdict(r.inequalities.both_hold(), "dss inequalities"))
        }
        Command::Calibrate(c) => {
            let cfg = load(&c, Scenario::Stability)?;
            let r = calibrate::calibrate_thresholds(&calibrate::SweepSettings::default())?;
            for s in &r.steps {
                println!(
                    "eps1 {:>6} eps2 {:>6} max ratio {:?} converged {} accepted {}",
                    s.eps1, s.eps2, s.max_ratio, s.converged, s.accepted
                );
            }
            write_json(Path::new(&cfg.out), "calibration.json", &r)?;
            Ok(verdict(r.thresholds.is_some(), "calibration"))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("lnslab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
