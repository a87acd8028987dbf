use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use layered_scatter::error::Error;
use layered_scatter::forward::{blowup_experiment, synthesize_dataset, Scene};
use layered_scatter::geometry::Point;
use layered_scatter::layered_green::{SourceKind, SourceSpec};
use layered_scatter::verify::{standard_suite, SuiteOptions};

mod config;

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "layered-scatter", version, about = "Acoustic scattering in a two-layered medium with a rough interface")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "LAYERED_SCATTER_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate the layered Green's function (no obstacle) at one or more points.
    Green {
        #[arg(long)]
        config: PathBuf,
        /// Target point `x1,x2`; may be repeated.
        #[arg(long = "x", required = true, value_parser = parse_point, allow_hyphen_values = true)]
        x: Vec<Point>,
        /// Source point `x1,x2`.
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        xs: Point,
        #[arg(long, value_enum, default_value_t = KindArg::Monopole)]
        kind: KindArg,
        #[arg(long, value_enum, default_value_t = Part::Total)]
        part: Part,
    },
    /// Synthesize u^s for every configured source and receiver.
    Forward {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "nearfield.csv")]
        out: PathBuf,
    },
    /// Incident-norm blow-up along a source sequence approaching the interface.
    DemoUniqueness {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "blowup.csv")]
        out: PathBuf,
    },
    /// Run the invariant suite and print a JSON report.
    Verify {
        #[arg(long)]
        config: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Evaluate β on the wrong branch; the suite must then fail.
        #[arg(long, hide = true)]
        debug_flip_branch: bool,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KindArg {
    Monopole,
    #[value(name = "dipole-1")]
    Dipole1,
    #[value(name = "dipole-2")]
    Dipole2,
}

impl From<KindArg> for SourceKind {
    fn from(k: KindArg) -> SourceKind {
        match k {
            KindArg::Monopole => SourceKind::Monopole,
            KindArg::Dipole1 => SourceKind::Dipole1,
            KindArg::Dipole2 => SourceKind::Dipole2,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Part {
    Total,
    Scattered,
}

fn parse_point(s: &str) -> Result<Point, String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `x1,x2`, got `{s}`"))?;
    let p = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    Ok(Point::new(p(a)?, p(b)?))
}

enum Failure {
    Check,
    Config(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

fn load(path: &Path) -> Result<RunConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    Ok(RunConfig::parse(&text)?)
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn cmd_green(cfg: &RunConfig, x: &[Point], xs: Point, kind: SourceKind, part: Part) -> Result<String, Failure> {
    let mut scene_cfg = cfg.scene()?;
    scene_cfg.obstacle = None;
    let scene = Scene::build(&scene_cfg)?;
    let ev = scene.solve(&[SourceSpec { kind, position: xs }])?;
    let mut out = String::new();
    for &p in x {
        let v = match part {
            Part::Total => ev.total_at(p, 0)?,
            Part::Scattered => ev.scattered_at(p, 0)?,
        };
        writeln!(out, "{:.14e},{:.14e}", v.re, v.im).unwrap();
    }
    Ok(out)
}

fn cmd_forward(cfg: &RunConfig) -> Result<String, Failure> {
    let sources = cfg.sources();
    if sources.is_empty() {
        return Err(Failure::Config("forward needs at least one entry in `sources`".into()));
    }
    let receivers = cfg.receivers.ok_or_else(|| Failure::Config("forward needs a `receivers` section".into()))?;
    let scene = Scene::build(&cfg.scene()?)?;
    let rows = synthesize_dataset(&scene, &sources, &receivers.points())?;
    let mut out = String::from("source_index,xs1,xs2,x1,x2,re_us,im_us\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.source_index, r.source.x1, r.source.x2, r.receiver.x1, r.receiver.x2, r.value.re, r.value.im
        )
        .unwrap();
    }
    Ok(out)
}

#[derive(Serialize)]
struct BlowupFooter<'a> {
    exponent: f64,
    ratio: f64,
    increasing_from: usize,
    warnings: &'a [String],
}

fn cmd_demo_uniqueness(cfg: &RunConfig) -> Result<String, Failure> {
    let seq = cfg.blowup().ok_or_else(|| Failure::Config("demo-uniqueness needs `experiment.blowup`".into()))?;
    let rep = blowup_experiment(&cfg.interface, cfg.medium.kappa1, &seq)?;
    let mut out = String::from("n,N_n\n");
    for r in &rep.rows {
        writeln!(out, "{},{}", r.n, r.norm_sq).unwrap();
    }
    let footer = BlowupFooter { exponent: rep.exponent, ratio: rep.ratio, increasing_from: rep.increasing_from, warnings: &rep.warnings };
    writeln!(out, "# {}", serde_json::to_string(&footer).unwrap()).unwrap();
    Ok(out)
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Green { config, x, xs, kind, part } => {
            let cfg = load(&config)?;
            print!("{}", cmd_green(&cfg, &x, xs, kind.into(), part)?);
        }
        Command::Forward { config, out } => {
            let cfg = load(&config)?;
            write(&out, &cmd_forward(&cfg)?)?;
        }
        Command::DemoUniqueness { config, out } => {
            let cfg = load(&config)?;
            write(&out, &cmd_demo_uniqueness(&cfg)?)?;
        }
        Command::Verify { config, out, debug_flip_branch } => {
            let cfg = load(&config)?;
            let records = standard_suite(&SuiteOptions { medium: cfg.medium, tol: cfg.quadrature.tol, flip_branch: debug_flip_branch });
            let mut report = serde_json::to_string_pretty(&records).unwrap();
            report.push('\n');
            match out {
                Some(path) => write(&path, &report)?,
                None => print!("{report}"),
            }
            if let Some(r) = records.iter().find(|r| !r.pass) {
                eprintln!("check failed: {} (value {}, tolerance {})", r.check, r.value, r.tolerance);
                return Err(Failure::Check);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
