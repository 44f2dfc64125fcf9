use clap::{Parser, Subcommand};
use projconvex_cli::commands::{self, sweep_csv, sweep_pass};
use projconvex_cli::render::{cmd_render, residual_plot};
use projconvex_cli::spec::OrbifoldSpec;
use projconvex_cli::{parse_vector, CliError};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "projconvex", version, about = "Convex real projective orbifolds: development, sweeps and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Develop a spec and write OBJ, JSON and a report.
    Develop {
        spec: PathBuf,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a parameter grid and write CSV plus an SVG residual plot.
    Sweep {
        spec: PathBuf,
        #[arg(long)]
        param: String,
        /// `a:b`
        #[arg(long)]
        range: String,
        #[arg(long)]
        steps: usize,
        /// CSV path; the plot goes next to it with an `.svg` extension.
        #[arg(long)]
        out: PathBuf,
        /// Also compute the smallest log-Hessian eigenvalue.
        #[arg(long)]
        kv: bool,
    },
    /// Draw a developed complex as SVG.
    Render {
        complex: PathBuf,
        #[arg(long, default_value = "auto")]
        chart: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Koszul–Vinberg value and log-Hessian on a model cone.
    Kv {
        #[arg(long)]
        cone: String,
        #[arg(long)]
        dim: usize,
        /// Comma-separated coordinates.
        #[arg(long)]
        point: String,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Check the dihedral relations of a reflection spec.
    CoxeterCheck {
        spec: PathBuf,
        #[arg(long)]
        depth: Option<usize>,
    },
    /// Classify the ends of a glued spec.
    ClassifyEnds { spec: PathBuf },
    /// Hilbert distance between two points of a body (unit disk by default).
    HilbertDist {
        #[arg(long)]
        body: Option<PathBuf>,
        #[arg(long, allow_hyphen_values = true)]
        p: String,
        #[arg(long, allow_hyphen_values = true)]
        q: String,
    },
}

fn parse_range(text: &str) -> Result<(f64, f64), CliError> {
    let (a, b) = text
        .split_once(':')
        .ok_or_else(|| CliError::InvalidArgument(format!("range {text:?} is not a:b")))?;
    let v = parse_vector(&format!("{a},{b}"))?;
    Ok((v[0], v[1]))
}

fn print_json(value: &impl serde::Serialize) {
    print_text(&format!("{}\n", serde_json::to_string_pretty(value).expect("serialisable")));
}

/// Writes to stdout, ignoring a closed pipe.
fn print_text(text: &str) {
    let _ = std::io::stdout().write_all(text.as_bytes());
}

fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Develop { spec, depth, out } => {
            let report = commands::cmd_develop(&OrbifoldSpec::load(&spec)?, depth, &out)?;
            print_text(&report.to_text());
            Ok(report.all_pass())
        }
        Command::Sweep { spec, param, range, steps, out, kv } => {
            let spec = OrbifoldSpec::load(&spec)?;
            let rows = commands::cmd_sweep(&spec, &param, parse_range(&range)?, steps, kv)?;
            std::fs::write(&out, sweep_csv(&rows))?;
            let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.value, r.residual)).collect();
            std::fs::write(out.with_extension("svg"), residual_plot(&points, &param))?;
            print_text(&format!("{} rows written to {}\n", rows.len(), out.display()));
            Ok(sweep_pass(&rows))
        }
        Command::Render { complex, chart, out } => {
            cmd_render(&complex, &chart, &out)?;
            Ok(true)
        }
        Command::Kv { cone, dim, point, samples, seed } => {
            print_json(&commands::cmd_kv(&cone, dim, &parse_vector(&point)?, samples, seed)?);
            Ok(true)
        }
        Command::CoxeterCheck { spec, depth } => {
            let report = commands::cmd_coxeter_check(&OrbifoldSpec::load(&spec)?, depth)?;
            print_text(&report.to_text());
            Ok(report.all_pass())
        }
        Command::ClassifyEnds { spec } => {
            print_json(&commands::cmd_classify_ends(&OrbifoldSpec::load(&spec)?)?);
            Ok(true)
        }
        Command::HilbertDist { body, p, q } => {
            let d = commands::cmd_hilbert_dist(body.as_deref(), &parse_vector(&p)?, &parse_vector(&q)?)?;
            print_json(&serde_json::json!({ "distance": d }));
            Ok(true)
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("PROJCONVEX_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
