//! `dtameta` command-line front end.

mod bundle;
mod error;
mod plot;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand, ValueEnum};
use dtameta::data::{builtin_dataset, parse_csv, Dataset, Formula, TableFormat};
use dtameta::model::{Model, ModelKind, ModelSpec};
use dtameta::sampler::ChainConfig;
use dtameta::summary::{compare, fit};

use crate::bundle::{DataSource, RunManifest};
use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "dtameta",
    version,
    about = "Bayesian copula meta-analysis of diagnostic test accuracy"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a model and write a result bundle.
    Fit(FitArgs),
    /// Draw a forest or trace plot from a bundle.
    Plot(PlotArgs),
    /// Tabulate two or more bundles fitted to the same data.
    Compare(CompareArgs),
}

#[derive(clap::Args, Debug)]
#[command(group(ArgGroup::new("source").required(true).args(["data", "builtin"])))]
struct FitArgs {
    /// Model family: gauss, fgm, c90, c270, frank or brma.
    #[arg(long)]
    copula: String,
    /// CSV file with one row per study.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Built-in dataset: telomerase or ascus.
    #[arg(long)]
    builtin: Option<String>,
    /// Study identifier column of the CSV.
    #[arg(long, default_value = "ID")]
    sid: String,
    /// Column layout of the CSV: dis_nondis or tp_fp_tn_fn.
    #[arg(long, default_value = "dis_nondis")]
    format: String,
    /// `intercept` or `cellmeans:COV`.
    #[arg(long, default_value = "intercept")]
    formula: String,
    #[arg(long, default_value_t = 2000)]
    iter: usize,
    #[arg(long, default_value_t = 1000)]
    warmup: usize,
    #[arg(long, default_value_t = 1)]
    thin: usize,
    #[arg(long, default_value_t = 3)]
    chains: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output directory of the bundle.
    #[arg(long, env = "DTAMETA_OUT", default_value = "dtameta-out")]
    out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum PlotKind {
    Forest,
    Trace,
}

#[derive(clap::Args, Debug)]
struct PlotArgs {
    /// Bundle directory written by `fit`.
    bundle: PathBuf,
    #[arg(long, value_enum, default_value = "forest")]
    kind: PlotKind,
    /// SVG path; defaults to `<bundle>/<kind>.svg`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct CompareArgs {
    /// Bundle directories.
    #[arg(required = true, num_args = 2..)]
    bundles: Vec<PathBuf>,
    /// CSV path of the comparison table.
    #[arg(long, default_value = "comparison.csv")]
    out: PathBuf,
}

fn load_data(args: &FitArgs) -> Result<(Dataset, DataSource), CliError> {
    match (&args.builtin, &args.data) {
        (Some(name), _) => Ok((builtin_dataset(name)?, DataSource::Builtin { name: name.clone() })),
        (None, Some(path)) => {
            let format: TableFormat = args.format.parse().map_err(CliError::usage)?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
            // covariates are whatever columns the formula asks for
            let formula: Formula = args.formula.parse().map_err(CliError::usage)?;
            let covariates: Vec<&str> = match &formula {
                Formula::Intercept => vec![],
                Formula::CellMeans(c) => vec![c.as_str()],
            };
            let ds = parse_csv(&text, format, &args.sid, &covariates)?;
            let source = DataSource::File {
                path: path.display().to_string(),
                sid: args.sid.clone(),
                format: args.format.clone(),
            };
            Ok((ds, source))
        }
        (None, None) => Err(CliError::Usage("one of --data or --builtin is required".into())),
    }
}

fn cmd_fit(args: FitArgs) -> Result<(), CliError> {
    let kind: ModelKind = args.copula.parse().map_err(CliError::usage)?;
    let formula: Formula = args.formula.parse().map_err(CliError::usage)?;
    let config = ChainConfig::new(args.iter, args.warmup, args.thin, args.seed).with_chains(args.chains);
    config.validate().map_err(CliError::usage)?;
    let (data, source) = load_data(&args)?;
    let spec = ModelSpec::new(kind, formula.clone(), &data)?;
    let model = Model::new(spec, data)?;
    let (draws, summary) = fit(&model, &config)?;
    let manifest = RunManifest::new("fit", source, kind, &formula, &config, &args.out);
    bundle::write(&args.out, &manifest, &model, &draws, &summary)?;
    print!("{}", report::summary_block(&summary));
    println!("bundle written to {}", args.out.display());
    Ok(())
}

fn cmd_plot(args: PlotArgs) -> Result<(), CliError> {
    let summary = bundle::read_summary(&args.bundle)?;
    let (svg, name) = match args.kind {
        PlotKind::Forest => (plot::forest(&summary), "forest.svg"),
        PlotKind::Trace => {
            let draws = bundle::read_draws(&args.bundle)?;
            (plot::trace(&summary, &draws)?, "trace.svg")
        }
    };
    let out = args.out.unwrap_or_else(|| args.bundle.join(name));
    std::fs::write(&out, svg).map_err(|e| CliError::Data(format!("cannot write {}: {e}", out.display())))?;
    println!("plot written to {}", out.display());
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<(), CliError> {
    let fits = args
        .bundles
        .iter()
        .map(|b| bundle::read_summary(b))
        .collect::<Result<Vec<_>, _>>()?;
    let table = compare(&fits)?;
    std::fs::write(&args.out, table.to_csv()?)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", args.out.display())))?;
    print!("{}", table.to_text());
    println!("table written to {}", args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let text: Vec<&str> = msg
                .lines()
                .take_while(|l| !l.starts_with("Usage:"))
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .collect();
            eprintln!("error[usage]: {}", text.join(" ").trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Plot(a) => cmd_plot(a),
        Command::Compare(a) => cmd_compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(e.code())
        }
    }
}
