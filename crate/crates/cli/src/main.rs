//! `wellround`: command-line front end for the well-roundedness toolkit.
//!
//! Subcommands: reduce, kan, certify, blc-check, count, version.  Every
//! report embeds the tool version, the seed, and an echo of the parsed
//! configuration, so a report file identifies the run that produced it.
//! Identical configurations produce byte-identical reports; the thread count
//! changes scheduling only, never numbers.

mod family;

use std::path::PathBuf;

use clap::{error::ErrorKind, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use wellround_core::calculus::{blc_check, family_total_oracle, BlcCheckParams};
use wellround_core::certifier::{certify, named_oracle, CertifyParams, ModeChoice, WrReport};
use wellround_core::counting::{counting_report, CountKind, VolumeReference};
use wellround_core::error::{Error, Result};
use wellround_core::group::builtin_group;
use wellround_core::intmat::IntMatrix;
use wellround_core::io::read_matrix_file;
use wellround_core::lattice::{canonicalize, is_in_reduced_siegel_set, reduce_basis, LatticeBasis};
use wellround_core::matrix::{kan_decompose, Matrix};

const TOOL: &str = "wellround";
const VERSION: &str = env!("CARGO_PKG_VERSION");
const DEFAULT_SEED: u64 = 0x00C0_FFEE;

#[derive(Parser)]
#[command(name = TOOL, version = VERSION, about = "Well-roundedness toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Seed for every randomized estimate; fixed default for reproducibility.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,

    /// Worker threads (default: available parallelism). The environment
    /// variable WELLROUND_THREADS overrides this flag.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Report file path; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

impl FormatArg {
    fn as_str(self) -> &'static str {
        match self {
            FormatArg::Json => "json",
            FormatArg::Csv => "csv",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Auto,
    Sampled,
    Exact,
}

impl ModeArg {
    fn as_str(self) -> &'static str {
        match self {
            ModeArg::Auto => "auto",
            ModeArg::Sampled => "sampled",
            ModeArg::Exact => "exact",
        }
    }
}

impl From<ModeArg> for ModeChoice {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Auto => ModeChoice::Auto,
            ModeArg::Sampled => ModeChoice::Sampled,
            ModeArg::Exact => ModeChoice::Exact,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Reduce a lattice basis and report its canonical fundamental-domain form.
    Reduce {
        /// Basis matrix file ("rows cols" header, then rows of decimals).
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Decompose a square matrix into orthogonal x diagonal x unipotent factors.
    Kan {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Estimate fattened/eroded volumes of a set and fit its Lipschitz constant.
    Certify {
        /// Group name, e.g. R2, SO2, SL2, R1xR2.
        #[arg(long)]
        group: Option<String>,
        /// Set spec, e.g. disk:1, square:0.5, box:1,2, polygon:x,y;...
        #[arg(long)]
        set: Option<String>,
        /// Family document; certifies the family's total space instead of --group/--set.
        #[arg(long)]
        family: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
        mode: ModeArg,
        /// Comma-separated epsilon grid.
        #[arg(long = "eps-grid", default_value = "0.01,0.02,0.05")]
        eps_grid: String,
        /// Monte Carlo points per epsilon.
        #[arg(long, default_value_t = 20_000)]
        points: usize,
        /// Perturbation pairs per point in sampled mode.
        #[arg(long, default_value_t = 32)]
        perts: usize,
        /// Re-estimate under a grid of perturbation counts to expose the bias trend.
        #[arg(long = "pert-study", default_value_t = false)]
        pert_study: bool,
    },
    /// Check the four bounded-family conditions for a fiber family document.
    BlcCheck {
        #[arg(long)]
        family: PathBuf,
        #[arg(long = "eps-grid", default_value = "0.01,0.05")]
        eps_grid: String,
        /// Base points sampled from the base set.
        #[arg(long = "base-points", default_value_t = 8)]
        base_points: usize,
        /// Monte Carlo points per fiber estimate.
        #[arg(long, default_value_t = 20_000)]
        points: usize,
        /// Base perturbation pairs per point.
        #[arg(long, default_value_t = 8)]
        perts: usize,
    },
    /// Count lattice points in dilated bodies or SL2(Z) norm balls.
    Count {
        /// integer_points or sl2z_ball.
        #[arg(long)]
        kind: String,
        /// Comma-separated scale grid.
        #[arg(long = "T-grid")]
        t_grid: String,
        /// analytic or monte_carlo_volume.
        #[arg(long, default_value = "analytic")]
        reference: String,
        /// Samples for Monte Carlo reference volumes.
        #[arg(long, default_value_t = 100_000)]
        points: usize,
    },
    /// Print the tool name and version as a report.
    Version,
}

/// Flags as parsed, echoed into every report. Thread count is deliberately
/// not part of the echo: it must not change report bytes.
#[derive(Serialize)]
struct ConfigEcho {
    command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    input: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    group: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    set: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    family: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eps_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    perts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pert_study: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    base_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kind: Option<String>,
    #[serde(rename = "T_grid", skip_serializing_if = "Option::is_none")]
    t_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference: Option<String>,
    format: &'static str,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<String>,
}

impl ConfigEcho {
    fn new(command: &'static str, cli_seed: u64, format: FormatArg, out: &Option<PathBuf>) -> Self {
        ConfigEcho {
            command,
            input: None,
            group: None,
            set: None,
            family: None,
            mode: None,
            eps_grid: None,
            points: None,
            perts: None,
            pert_study: None,
            base_points: None,
            kind: None,
            t_grid: None,
            reference: None,
            format: format.as_str(),
            seed: cli_seed,
            out: out.as_ref().map(|p| p.display().to_string()),
        }
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    version: &'static str,
    seed: u64,
    config: &'a ConfigEcho,
    report: T,
}

#[derive(Serialize)]
struct ReduceReport {
    reduced: Matrix,
    transform: IntMatrix,
    a: Vec<f64>,
    n_coeffs: Matrix,
    #[serde(rename = "member_of_F")]
    member_of_f: bool,
    active_inequalities: Vec<String>,
}

#[derive(Serialize)]
struct KanReport {
    k: Matrix,
    a: Vec<f64>,
    n: Matrix,
    reconstruction_error: f64,
}

fn parse_grid(s: &str, what: &str) -> Result<Vec<f64>> {
    let vals: Result<Vec<f64>> = s
        .split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("bad {what} entry '{tok}'")))
        })
        .collect();
    let vals = vals?;
    if vals.is_empty() {
        return Err(Error::InvalidInput(format!("{what} is empty")));
    }
    Ok(vals)
}

fn configure_threads(flag: Option<usize>) -> Result<()> {
    let n = match std::env::var("WELLROUND_THREADS") {
        Ok(s) => Some(s.trim().parse::<usize>().map_err(|_| {
            Error::InvalidInput(format!("WELLROUND_THREADS must be a positive integer, got '{s}'"))
        })?),
        Err(_) => flag,
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(Error::InvalidInput("thread count must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidInput(format!("thread pool setup failed: {e}")))?;
    }
    Ok(())
}

fn envelope_json<T: Serialize>(config: &ConfigEcho, report: T) -> Result<String> {
    let env = Envelope { version: VERSION, seed: config.seed, config, report };
    let mut text = serde_json::to_string_pretty(&env)
        .map_err(|e| Error::InvalidInput(format!("report serialization failed: {e}")))?;
    text.push('\n');
    Ok(text)
}

fn csv_with_header(config: &ConfigEcho, body: &str) -> Result<String> {
    let echo = serde_json::to_string(config)
        .map_err(|e| Error::InvalidInput(format!("config serialization failed: {e}")))?;
    Ok(format!("# {TOOL} {VERSION}\n# seed: {}\n# config: {echo}\n{body}", config.seed))
}

fn emit(text: String, out: &Option<PathBuf>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Error::Io(format!("writing {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json_only(format: FormatArg, command: &str) -> Result<()> {
    if format == FormatArg::Csv {
        return Err(Error::InvalidInput(format!(
            "{command} emits a structured report; use --format json"
        )));
    }
    Ok(())
}

fn certify_csv(report: &WrReport) -> String {
    let mut body = String::from("eps,ratio,stderr\n");
    for i in 0..report.epsilons.len() {
        body.push_str(&format!(
            "{},{},{}\n",
            report.epsilons[i], report.ratios[i], report.ratio_stderrs[i]
        ));
    }
    body
}

fn run(cli: Cli) -> Result<()> {
    configure_threads(cli.threads)?;
    let seed = cli.seed;
    let format = cli.format;
    let out = cli.out;

    match cli.command {
        Command::Reduce { input } => {
            json_only(format, "reduce")?;
            let mut config = ConfigEcho::new("reduce", seed, format, &out);
            config.input = Some(input.display().to_string());
            let mat = read_matrix_file(&input)?;
            let basis = LatticeBasis::new(mat)?;
            let reduced = canonicalize(&reduce_basis(&basis)?)?;
            let membership =
                is_in_reduced_siegel_set(&LatticeBasis::new(reduced.reduced.clone())?)?;
            let report = ReduceReport {
                reduced: reduced.reduced.clone(),
                transform: reduced.transform.clone(),
                a: reduced.a.clone(),
                n_coeffs: reduced.n_coeffs.clone(),
                member_of_f: membership.member,
                active_inequalities: membership.active_inequalities,
            };
            emit(envelope_json(&config, report)?, &out)
        }
        Command::Kan { input } => {
            json_only(format, "kan")?;
            let mut config = ConfigEcho::new("kan", seed, format, &out);
            config.input = Some(input.display().to_string());
            let mat = read_matrix_file(&input)?;
            let kan = kan_decompose(&mat)?;
            let err = kan.reconstruct().sub(&mat).max_abs();
            let report =
                KanReport { k: kan.k.clone(), a: kan.a.clone(), n: kan.n.clone(), reconstruction_error: err };
            emit(envelope_json(&config, report)?, &out)
        }
        Command::Certify { group, set, family, mode, eps_grid, points, perts, pert_study } => {
            let epsilons = parse_grid(&eps_grid, "eps-grid")?;
            let mut config = ConfigEcho::new("certify", seed, format, &out);
            config.mode = Some(mode.as_str());
            config.eps_grid = Some(epsilons.clone());
            config.points = Some(points);
            config.perts = Some(perts);
            if pert_study {
                config.pert_study = Some(true);
            }

            let oracle = match (&family, &group, &set) {
                (Some(path), None, None) => {
                    config.family = Some(path.display().to_string());
                    family_total_oracle(&family::load_family(path)?)?
                }
                (Some(_), _, _) => {
                    return Err(Error::InvalidInput(
                        "--family replaces --group/--set; give one or the other".into(),
                    ))
                }
                (None, Some(g), Some(s)) => {
                    config.group = Some(g.clone());
                    config.set = Some(s.clone());
                    named_oracle(&builtin_group(g)?, s)?
                }
                (None, _, _) => {
                    return Err(Error::InvalidInput(
                        "certify needs --group and --set, or --family".into(),
                    ))
                }
            };

            let params = CertifyParams {
                epsilons,
                n_points: points,
                n_pert: perts,
                seed,
                mode: mode.into(),
                pert_study,
            };
            let report = certify(&oracle, &params)?;
            match format {
                FormatArg::Json => emit(envelope_json(&config, report)?, &out),
                FormatArg::Csv => emit(csv_with_header(&config, &certify_csv(&report))?, &out),
            }
        }
        Command::BlcCheck { family, eps_grid, base_points, points, perts } => {
            json_only(format, "blc-check")?;
            let epsilons = parse_grid(&eps_grid, "eps-grid")?;
            let mut config = ConfigEcho::new("blc-check", seed, format, &out);
            config.family = Some(family.display().to_string());
            config.eps_grid = Some(epsilons.clone());
            config.base_points = Some(base_points);
            config.points = Some(points);
            config.perts = Some(perts);

            let fam = family::load_family(&family)?;
            let params = BlcCheckParams {
                epsilons,
                n_base: base_points,
                n_fiber: points,
                n_pert: perts,
                seed,
            };
            let report = blc_check(&fam, &params)?;
            emit(envelope_json(&config, report)?, &out)
        }
        Command::Count { kind, t_grid, reference, points } => {
            let grid = parse_grid(&t_grid, "T-grid")?;
            let kind: CountKind = kind.parse()?;
            let reference: VolumeReference = reference.parse()?;
            let mut config = ConfigEcho::new("count", seed, format, &out);
            config.kind = Some(kind.as_str().to_string());
            config.t_grid = Some(grid.clone());
            config.reference = Some(reference.as_str().to_string());
            config.points = Some(points);

            let report = counting_report(kind, &grid, reference, points, seed)?;
            match format {
                FormatArg::Json => emit(envelope_json(&config, report)?, &out),
                FormatArg::Csv => emit(csv_with_header(&config, &report.to_csv())?, &out),
            }
        }
        Command::Version => {
            json_only(format, "version")?;
            let config = ConfigEcho::new("version", seed, format, &out);
            let report = serde_json::json!({ "name": TOOL, "version": VERSION });
            emit(envelope_json(&config, report)?, &out)
        }
    }
}

fn diagnostic(tag: &str, message: &str) {
    eprintln!("{}", serde_json::json!({ "error": tag, "message": message }));
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                print!("{e}");
                std::process::exit(0);
            }
            _ => {
                diagnostic("InvalidInput", &e.to_string());
                std::process::exit(2);
            }
        },
    };
    match run(cli) {
        Ok(()) => {}
        Err(err) => {
            diagnostic(err.tag(), &err.to_string());
            std::process::exit(err.exit_code());
        }
    }
}
