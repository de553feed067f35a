use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nucspin_cli::{ apply_overrides, dispatch, parse_config, resolve_seed, CliError, Command, Config, SEED_ENV };

/// Virtual nuclear-spin qubit lab.
#[derive(Parser, Debug)]
#[command(name = "nucspin-lab", version)]
struct Args {
    /// rabi, ramsey, tomo, t1, t2, transport or report
    command: String,

    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<String>,
    /// sampled or analytic
    #[arg(long)]
    mode: Option<String>,
    /// a, b or c (tomo)
    #[arg(long)]
    state: Option<String>,
    #[arg(long)]
    shots: Option<u64>,
    /// 1 or 2 (rabi)
    #[arg(long)]
    atoms: Option<u32>,
    /// Bootstrap resamples (tomo)
    #[arg(long)]
    resamples: Option<usize>,
    /// raw or unfolded (tomo)
    #[arg(long)]
    likelihood: Option<String>,
    /// Grid points (holds for t2)
    #[arg(long)]
    points: Option<usize>,
    /// Worker threads; defaults to all cores
    #[arg(long)]
    threads: Option<usize>,
}

fn run(args: Args) -> Result<(), CliError> {
    let command: Command = args.command.parse()?;
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            parse_config(&text)?
        }
        None => Config::default(),
    };

    let mut overrides: Vec<(&str, String)> = Vec::new();
    let mut per_command = |flag: &str, key: Option<&'static str>, value: String| match key {
        Some(key) => {
            overrides.push((key, value));
            Ok(())
        }
        None => Err(CliError::Usage(format!("--{flag} does not apply to `{}`", command.name()))),
    };
    if let Some(v) = args.shots {
        per_command("shots", command.shots_key(), v.to_string())?;
    }
    if let Some(v) = args.points {
        per_command("points", command.points_key(), v.to_string())?;
    }
    if let Some(v) = args.atoms {
        per_command("atoms", (command == Command::Rabi).then_some("rabi.atoms"), v.to_string())?;
    }
    let tomo = (command == Command::Tomo).then_some(());
    if let Some(v) = args.state {
        per_command("state", tomo.map(|_| "tomo.state"), v)?;
    }
    if let Some(v) = args.resamples {
        per_command("resamples", tomo.map(|_| "tomo.resamples"), v.to_string())?;
    }
    if let Some(v) = args.likelihood {
        per_command("likelihood", tomo.map(|_| "tomo.likelihood"), v)?;
    }
    if let Some(v) = args.seed {
        overrides.push(("seed", v.to_string()));
    }
    if let Some(v) = args.mode {
        overrides.push(("mode", v));
    }
    if let Some(v) = args.out {
        overrides.push(("output", v));
    }
    apply_overrides(&mut cfg, &overrides)?;
    resolve_seed(&mut cfg, std::env::var(SEED_ENV).ok().as_deref())?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Usage(e.to_string()))?;
    let written = pool.install(|| dispatch(command, &cfg))?;
    for path in written {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Usage(e.to_string().lines().next().unwrap_or("bad arguments").to_string());
            eprintln!("{}", err.to_json_line());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
