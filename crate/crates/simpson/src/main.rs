//! Command-line front end: analyze a stratified table, scan record files for
//! reversing covariates, synthesize a reversing stratifier, compute mixture
//! predictions and render the two-segment diagram.
//!
//! Exit codes: 0 success, 1 validation error, 2 infeasible synthesis.

use std::fs;
use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use simpson::analysis::{detect_reversal, DetectOptions, Reversal};
use simpson::error::Error;
use simpson::figure::{build_figure, render_svg, RenderOptions};
use simpson::ingest::{
    aggregate, parse_marginal_json, parse_table_json, read_dsv, scan_covariates, ColumnMapping,
    DEFAULT_MAX_STRATA,
};
use simpson::mixture::mixture_from_table;
use simpson::prob::{parse_rational, Probability};
use simpson::synthesis::{synthesize_reverser, verify, SplitMode, SynthesisSpec};
use simpson::tables::{Exposure, Outcome, StratifiedTable};

#[derive(Parser)]
#[command(name = "simpson", version, about = "Simpson's-paradox reversal analysis for 2x2xK tables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Dsv,
    Json,
}

#[derive(Args)]
struct InputArgs {
    /// Input file; '-' reads stdin.
    #[arg(long)]
    input: String,
    /// dsv: delimiter-separated records with a header row.
    /// json: pre-aggregated table schema.
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Field delimiter for dsv input.
    #[arg(long, default_value = ",")]
    delimiter: char,
}

#[derive(Args)]
struct MappingArgs {
    /// Outcome (X) column name.
    #[arg(long)]
    outcome: Option<String>,
    /// Exposure (Y) column name.
    #[arg(long)]
    exposure: Option<String>,
    /// Value of the outcome column counted as success.
    #[arg(long)]
    success_label: Option<String>,
    /// Value of the outcome column counted as failure (inferred when omitted).
    #[arg(long)]
    failure_label: Option<String>,
    /// Value of the exposure column counted as exposed.
    #[arg(long)]
    exposed_label: Option<String>,
    /// Value of the exposure column counted as unexposed (inferred when omitted).
    #[arg(long)]
    unexposed_label: Option<String>,
    /// Cap on distinct stratifier values per column.
    #[arg(long, default_value_t = DEFAULT_MAX_STRATA)]
    max_strata: usize,
}

impl MappingArgs {
    fn build(&self, stratifiers: Vec<String>) -> Result<ColumnMapping, Error> {
        let need = |v: &Option<String>, flag: &str| {
            v.clone()
                .ok_or_else(|| Error::Parse(format!("dsv input requires --{flag}")))
        };
        Ok(ColumnMapping {
            outcome_column: need(&self.outcome, "outcome")?,
            exposure_column: need(&self.exposure, "exposure")?,
            stratifier_columns: stratifiers,
            success_label: need(&self.success_label, "success-label")?,
            failure_label: self.failure_label.clone(),
            exposed_label: need(&self.exposed_label, "exposed-label")?,
            unexposed_label: self.unexposed_label.clone(),
            max_strata: self.max_strata,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Reversal report for one stratified table (JSON to stdout or --out).
    Analyze {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        mapping: MappingArgs,
        /// Stratifier column (dsv input).
        #[arg(long)]
        stratifier: Option<String>,
        /// Skip strata with an empty conditioning margin instead of failing.
        #[arg(long)]
        skip_zero_margins: bool,
        /// Evaluate the Min/Max interval conditions for K > 2 too.
        #[arg(long)]
        multiway_intervals: bool,
        /// Require strict reversal for a nonzero "reversal" verdict in the
        /// summary line (the full report always carries both).
        #[arg(long, conflicts_with = "weak")]
        strict: bool,
        /// Accept weak reversal in the summary line (default).
        #[arg(long)]
        weak: bool,
        /// Also render the diagram to this SVG path (K = 2 only).
        #[arg(long)]
        figure: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scan candidate stratifier columns of a record file for reversal.
    Scan {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        mapping: MappingArgs,
        /// Comma-separated candidate stratifier columns.
        #[arg(long, value_delimiter = ',')]
        stratifiers: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Construct a binary stratifier that reverses a marginal 2x2 table.
    Synthesize {
        /// Marginal table JSON: {"counts": {...}} or {"probabilities": {...}}.
        #[arg(long)]
        input: String,
        /// Required per-stratum gap, e.g. "1/1000" or "0.001".
        #[arg(long)]
        epsilon: Option<String>,
        #[arg(long, value_enum, default_value = "fractional")]
        mode: CliSplitMode,
        /// Split a zero-delta marginal into two positively associated strata.
        #[arg(long)]
        allow_zero_delta: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mixture prediction over (stratum 1, ..., stratum K, pooled) priors.
    Predict {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        mapping: MappingArgs,
        #[arg(long)]
        stratifier: Option<String>,
        /// Comma-separated priors, one per stratum plus one for the pooled
        /// table, e.g. "0.25,0.25,0.5". Exact rationals accepted.
        #[arg(long, value_delimiter = ',')]
        priors: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render the two-segment diagram for a binary-stratified table.
    Figure {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        mapping: MappingArgs,
        #[arg(long)]
        stratifier: Option<String>,
        /// Unit-segment width in SVG user units.
        #[arg(long, default_value_t = 600)]
        width: u32,
        /// Draw mark and ratio labels.
        #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
        labels: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CliSplitMode {
    Integer,
    Fractional,
}

fn read_input(path: &str) -> Result<String, Error> {
    if path == "-" {
        let mut buf = String::new();
        std::io::stdin().read_to_string(&mut buf)?;
        Ok(buf)
    } else {
        Ok(fs::read_to_string(path)?)
    }
}

/// Loads a stratified table from either input format.
fn load_table(
    input: &InputArgs,
    mapping: &MappingArgs,
    stratifier: &Option<String>,
) -> Result<(StratifiedTable, Vec<String>), Error> {
    let text = read_input(&input.input)?;
    match input.format {
        Format::Json => Ok((parse_table_json(&text)?, Vec::new())),
        Format::Dsv => {
            let stratifier = stratifier
                .clone()
                .ok_or_else(|| Error::Parse("dsv input requires --stratifier".into()))?;
            let records = read_dsv(text.as_bytes(), input.delimiter as u8)?;
            let mapping = mapping.build(vec![stratifier.clone()])?;
            let agg = aggregate(&records, &mapping, &stratifier)?;
            Ok((agg.table, agg.warnings))
        }
    }
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<(), Error> {
    match out {
        Some(path) => fs::write(path, content)?,
        None => print!("{content}"),
    }
    Ok(())
}

fn run() -> Result<u8, Error> {
    let cli = Cli::parse();
    match cli.command {
        Command::Analyze {
            input,
            mapping,
            stratifier,
            skip_zero_margins,
            multiway_intervals,
            strict,
            weak: _,
            figure,
            out,
        } => {
            let (table, warnings) = load_table(&input, &mapping, &stratifier)?;
            let opts = DetectOptions {
                skip_zero_margin_strata: skip_zero_margins,
                multiway_intervals,
            };
            let mut report = detect_reversal(&table, &opts)?;
            report.warnings.extend(warnings);
            if let Some(figure_path) = figure {
                let model = build_figure(&table)?;
                let svg = render_svg(&model, &RenderOptions::default());
                fs::write(figure_path, svg)?;
            }
            let reversed = match (strict, report.reversal) {
                (true, Reversal::Strict) => true,
                (true, _) => false,
                (false, r) => r != Reversal::None,
            };
            let mut value = serde_json::to_value(&report).map_err(|e| Error::Parse(e.to_string()))?;
            value["reversed"] = serde_json::Value::Bool(reversed);
            emit(&out, &format!("{}\n", serde_json::to_string_pretty(&value).unwrap()))?;
            Ok(0)
        }
        Command::Scan {
            input,
            mapping,
            stratifiers,
            out,
        } => {
            let text = read_input(&input.input)?;
            let records = read_dsv(text.as_bytes(), input.delimiter as u8)?;
            let mapping = mapping.build(stratifiers)?;
            let scan = scan_covariates(&records, &mapping)?;
            emit(&out, &format!("{}\n", serde_json::to_string_pretty(&scan).unwrap()))?;
            Ok(0)
        }
        Command::Synthesize {
            input,
            epsilon,
            mode,
            allow_zero_delta,
            out,
        } => {
            let marginal = parse_marginal_json(&read_input(&input)?)?;
            let spec = SynthesisSpec {
                marginal,
                margin_epsilon: epsilon.as_deref().map(parse_rational).transpose()?,
                mode: match mode {
                    CliSplitMode::Integer => SplitMode::Integer,
                    CliSplitMode::Fractional => SplitMode::Fractional,
                },
                allow_zero_delta,
            };
            match synthesize_reverser(&spec) {
                Ok(result) => {
                    let check = verify(&result, &spec);
                    let mut value =
                        serde_json::to_value(&result).map_err(|e| Error::Parse(e.to_string()))?;
                    value["verified"] = serde_json::Value::Bool(check.ok);
                    emit(&out, &format!("{}\n", serde_json::to_string_pretty(&value).unwrap()))?;
                    Ok(0)
                }
                Err(e @ Error::InfeasibleAtResolution(_)) => {
                    eprintln!("error: {e}");
                    Ok(2)
                }
                Err(e) => Err(e),
            }
        }
        Command::Predict {
            input,
            mapping,
            stratifier,
            priors,
            out,
        } => {
            let (table, _) = load_table(&input, &mapping, &stratifier)?;
            let priors = priors
                .iter()
                .map(|s| Probability::new(parse_rational(s)?))
                .collect::<Result<Vec<_>, _>>()?;
            let p = mixture_from_table(&table, &priors, Outcome::Success, Exposure::Exposed)?;
            let value = serde_json::json!({ "prediction": serde_json::to_value(&p).unwrap() });
            emit(&out, &format!("{}\n", serde_json::to_string_pretty(&value).unwrap()))?;
            Ok(0)
        }
        Command::Figure {
            input,
            mapping,
            stratifier,
            width,
            labels,
            out,
        } => {
            let (table, _) = load_table(&input, &mapping, &stratifier)?;
            let model = build_figure(&table)?;
            let svg = render_svg(&model, &RenderOptions { width, labels });
            emit(&out, &svg)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
