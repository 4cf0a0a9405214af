use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use zpltune::tuner::TunePlan;
use zpltune_bench::request::{Aim, AutotuneRequest, BurstRequest, Command, MapRequest, ScanRequest};
use zpltune_bench::session::CommandOutput;
use zpltune_bench::{parse_config, replay, Session, SessionConfig};

/// Simulated ZPL tuning bench.
///
/// Every run writes `config.json`, `log.jsonl` and `state.json` to `--out`.
/// Pass `--log` with a previous log to continue that session.
#[derive(Parser)]
#[command(name = "zpltune", version)]
struct Cli {
    /// Session config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Log to resume from; replayed and verified first.
    #[arg(long, global = true)]
    log: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a script (JSON array of commands) or the default scenario.
    Simulate {
        #[arg(long)]
        script: Option<PathBuf>,
    },
    Scan {
        /// GHz
        #[arg(long, allow_hyphen_values = true)]
        start: f64,
        #[arg(long, allow_hyphen_values = true)]
        stop: f64,
        #[arg(long)]
        step_mhz: Option<f64>,
        #[arg(long)]
        dwell: Option<f64>,
        #[command(flatten)]
        aim: AimArgs,
    },
    Burst {
        #[command(flatten)]
        aim: AimArgs,
        /// mW
        #[arg(long)]
        power: f64,
        /// s
        #[arg(long)]
        duration: f64,
    },
    Autotune {
        /// MHz
        #[arg(long)]
        tolerance: Option<f64>,
        /// GHz
        #[arg(long, allow_hyphen_values = true)]
        target: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        ids: Option<Vec<String>>,
    },
    Map {
        /// GHz
        #[arg(long, allow_hyphen_values = true)]
        probe: f64,
        /// µm, as lo,hi
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        y: Vec<f64>,
        #[arg(long, default_value_t = 0.5)]
        step: f64,
        #[arg(long, default_value_t = 0.1)]
        dwell: f64,
    },
    /// Verify that a log replays bit-exactly and export the final state.
    Replay,
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
}

#[derive(Args)]
struct AimArgs {
    /// Emitter id to point at.
    #[arg(long)]
    at: Option<String>,
    /// Lateral position x,y in µm.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "at")]
    pos: Option<Vec<f64>>,
}

impl AimArgs {
    fn aim(&self) -> Option<Aim> {
        if self.pos.as_ref().is_some_and(|p| p.len() != 2) {
            return None;
        }
        match (&self.at, &self.pos) {
            (Some(id), _) => Some(Aim::Emitter(id.clone())),
            (_, Some(p)) => Some(Aim::Position([p[0], p[1]])),
            _ => None,
        }
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Cmd::Serve { port } = cli.cmd {
        let rt = tokio::runtime::Runtime::new()?;
        eprintln!("listening on 0.0.0.0:{port}");
        return Ok(rt.block_on(zpltune_bench::server::serve(port))?);
    }

    let config = load_config(&cli)?;
    let mut session = match &cli.log {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let log = zpltune_bench::log::read_jsonl(text.as_bytes())?;
            replay(config, &log)?
        }
        None => Session::new(config)?,
    };
    fs::create_dir_all(&cli.out)?;

    let commands = match &cli.cmd {
        Cmd::Simulate { script: Some(p) } => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str::<Vec<Command>>(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        Cmd::Simulate { script: None } => default_scenario(&session),
        Cmd::Scan { start, stop, step_mhz, dwell, aim } => {
            let mut r = ScanRequest::window(*start, *stop);
            r.step_mhz = *step_mhz;
            r.dwell = *dwell;
            r.aim = aim.aim();
            vec![Command::Scan(r)]
        }
        Cmd::Burst { aim, power, duration } => {
            let Some(aim) = aim.aim() else { bail!("burst needs --at or --pos") };
            vec![Command::Burst(BurstRequest { aim, power: *power, duration: *duration })]
        }
        Cmd::Autotune { tolerance, target, ids } => {
            let mut plan = TunePlan::default();
            if let Some(t) = tolerance {
                plan.tolerance = *t;
            }
            plan.target = target.map(zpltune::Detuning);
            vec![Command::Autotune(AutotuneRequest { plan, ids: ids.clone(), survey: None })]
        }
        Cmd::Map { probe, x, y, step, dwell } => {
            if x.len() != 2 || y.len() != 2 {
                bail!("--x and --y take lo,hi");
            }
            vec![Command::Map(MapRequest {
                probe: *probe,
                x: [x[0], x[1]],
                y: [y[0], y[1]],
                step_um: *step,
                dwell: *dwell,
                probe_power: 1.0,
            })]
        }
        Cmd::Replay => vec![],
        Cmd::Serve { .. } => unreachable!(),
    };

    let mut failure = None;
    for (k, cmd) in commands.iter().enumerate() {
        match session.execute(cmd) {
            Ok(out) => write_output(&cli.out, k, &out)?,
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    write_session(&cli.out, &session)?;
    if let Some(e) = failure {
        eprintln!("{}", serde_json::to_string(&e.body())?);
        std::process::exit(1);
    }
    println!("{} log entries, clock {:.3} s -> {}", session.log().len(), session.clock(), cli.out.display());
    Ok(())
}

fn load_config(cli: &Cli) -> Result<SessionConfig> {
    let Some(path) = &cli.config else { bail!("--config is required") };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut config = parse_config(&text).map_err(|errs| {
        let lines: Vec<String> = errs.iter().map(ToString::to_string).collect();
        anyhow::anyhow!("invalid config {}:\n{}", path.display(), lines.join("\n"))
    })?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

/// Survey scan, autotune, verification scan.
fn default_scenario(session: &Session) -> Vec<Command> {
    let lines: Vec<f64> = (0..session.emitters().len()).map(|i| session.line_of(i).ghz()).collect();
    let lo = lines.iter().copied().fold(f64::INFINITY, f64::min) - 5.0;
    let hi = lines.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 5.0;
    let mut survey = ScanRequest::window(lo, hi);
    survey.step_mhz = Some(20.0);
    vec![Command::Scan(survey.clone()), Command::Autotune(AutotuneRequest::default()), Command::Scan(survey)]
}

fn write_output(dir: &Path, k: usize, out: &CommandOutput) -> Result<()> {
    match out {
        CommandOutput::Scan(s) => {
            let spectra = dir.join("spectra");
            fs::create_dir_all(&spectra)?;
            let f = fs::File::create(spectra.join(format!("scan_{:04}.csv", s.seq)))?;
            zpltune::lineshape::io::write_csv(&s.spectrum, f)?;
        }
        CommandOutput::Map(m) => {
            m.write_pgm(fs::File::create(dir.join(format!("map_{k:02}.pgm")))?)?;
            m.write_csv(fs::File::create(dir.join(format!("map_{k:02}.csv")))?)?;
        }
        CommandOutput::Autotune(report) => {
            fs::write(dir.join("report.json"), serde_json::to_string_pretty(report)?)?;
            println!(
                "autotune: success {}, mean bursts {:.1}, target {:.3} GHz",
                report.succeeded(),
                report.mean_bursts(),
                report.target.ghz()
            );
        }
        CommandOutput::Burst(_) | CommandOutput::Wait { .. } => {}
    }
    Ok(())
}

fn write_session(dir: &Path, session: &Session) -> Result<()> {
    fs::write(dir.join("config.json"), session.config().to_json_pretty())?;
    let mut log = Vec::new();
    zpltune_bench::log::write_jsonl(session.log(), &mut log)?;
    fs::write(dir.join("log.jsonl"), log)?;
    fs::write(dir.join("state.json"), serde_json::to_string_pretty(&session.state())?)?;
    Ok(())
}
