//! Command-line surface of the anonymization engine.
//!
//! ```text
//! tabanon anonymize --input F --policy P --output G --report R
//! tabanon check --input F --policy P
//! tabanon hierarchy-validate --policy P [--input F]
//! ```

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use tabanon::csvio::{read_table_csv, table_to_string};
use tabanon::hierarchy::build_hierarchy;
use tabanon::{
    check_privacy, parse_policy_file, run_pipeline, validate_hierarchy, Cell, CsvOptions, Error, PolicyFile,
};

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success,
    /// The privacy target cannot be met (budget exhausted, l not reached,
    /// or `check` found a violation).
    PrivacyUnachievable,
    /// Bad input, policy or arguments.
    InputError,
}

impl ExitStatus {
    pub fn code(self) -> u8 {
        match self {
            ExitStatus::Success => 0,
            ExitStatus::PrivacyUnachievable => 1,
            ExitStatus::InputError => 2,
        }
    }

    fn from_error(e: &Error) -> Self {
        if e.is_privacy_unachievable() {
            ExitStatus::PrivacyUnachievable
        } else {
            ExitStatus::InputError
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "tabanon", version, about = "Anonymize tabular microdata")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct CsvArgs {
    /// Suppressed-cell marker; overrides the policy.
    #[arg(long)]
    marker: Option<String>,
    /// Single-character field delimiter.
    #[arg(long, default_value = ",")]
    delimiter: char,
}

impl CsvArgs {
    fn options(&self, policy: &PolicyFile) -> Result<CsvOptions, Error> {
        if !self.delimiter.is_ascii() {
            return Err(Error::InvalidParam(format!(
                "delimiter `{}` is not ASCII",
                self.delimiter
            )));
        }
        Ok(CsvOptions {
            delimiter: self.delimiter as u8,
            marker: self
                .marker
                .clone()
                .unwrap_or_else(|| policy.suppressed_marker.clone()),
        })
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the full pipeline and write the publishable table and its report.
    Anonymize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[command(flatten)]
        csv: CsvArgs,
    },
    /// Measure k, l and per-attribute frequencies without changing anything.
    Check {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        #[command(flatten)]
        csv: CsvArgs,
    },
    /// Validate every hierarchy declared in a policy.
    HierarchyValidate {
        #[arg(long)]
        policy: PathBuf,
        /// Table supplying observed values for date-pattern hierarchies.
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        csv: CsvArgs,
    },
}

fn envelope(body: serde_json::Value) -> String {
    let doc = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "report": body,
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("report serializes");
    text.push('\n');
    text
}

fn to_value<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("report serializes")
}

fn write_file(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

fn anonymize(
    input: &Path,
    policy: &Path,
    output: &Path,
    report: &Path,
    csv: &CsvArgs,
    out: &mut dyn Write,
) -> Result<ExitStatus, Error> {
    let policy = parse_policy_file(policy)?;
    let options = csv.options(&policy)?;
    let raw = read_table_csv(input, &options)?;
    let (published, rep) = run_pipeline(&raw, &policy)?;
    write_file(output, &table_to_string(&published, &options)?)?;
    write_file(report, &envelope(to_value(&rep)))?;
    for w in &rep.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    let _ = writeln!(
        out,
        "published {} of {} rows; achieved k = {}",
        published.row_count(),
        raw.row_count(),
        rep.achieved_k.map_or("n/a".to_owned(), |k| k.to_string())
    );
    Ok(ExitStatus::Success)
}

fn check(input: &Path, policy: &Path, csv: &CsvArgs, out: &mut dyn Write) -> Result<ExitStatus, Error> {
    let policy = parse_policy_file(policy)?;
    let options = csv.options(&policy)?;
    let d = read_table_csv(input, &options)?;
    let rep = check_privacy(&d, &policy)?;
    let _ = out.write_all(envelope(to_value(&rep)).as_bytes());
    Ok(if rep.passed {
        ExitStatus::Success
    } else {
        ExitStatus::PrivacyUnachievable
    })
}

fn hierarchy_validate(
    policy: &Path,
    input: Option<&Path>,
    csv: &CsvArgs,
    out: &mut dyn Write,
) -> Result<ExitStatus, Error> {
    let policy = parse_policy_file(policy)?;
    let data = match input {
        Some(p) => Some(read_table_csv(p, &csv.options(&policy)?)?),
        None => None,
    };
    let mut results = Vec::new();
    let mut all_valid = true;
    for (name, spec) in &policy.named_hierarchies {
        let mut observed = BTreeSet::new();
        if let Some(d) = &data {
            for (attr, s) in &policy.hierarchies {
                if s == spec && d.has_attribute(attr) {
                    observed.extend(d.column(attr)?.filter_map(Cell::as_value).map(str::to_owned));
                }
            }
        }
        let entry = match build_hierarchy(name, spec, &observed) {
            Ok(h) => {
                let v = validate_hierarchy(&h);
                let uncovered: Vec<&String> = observed.iter().filter(|o| !h.covers_ground(o)).collect();
                all_valid &= v.is_valid() && uncovered.is_empty();
                json!({
                    "name": name,
                    "valid": v.is_valid() && uncovered.is_empty(),
                    "height": v.height,
                    "violations": to_value(&v.violations),
                    "uncovered_values": uncovered,
                })
            }
            Err(e) => {
                all_valid = false;
                json!({ "name": name, "valid": false, "error": e.to_string() })
            }
        };
        results.push(entry);
    }
    let _ = out.write_all(envelope(json!({ "hierarchies": results })).as_bytes());
    Ok(if all_valid {
        ExitStatus::Success
    } else {
        ExitStatus::InputError
    })
}

/// Runs the CLI with explicit output streams.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let informational = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = if informational {
                write!(out, "{e}")
            } else {
                write!(err, "{e}")
            };
            return if informational {
                ExitStatus::Success
            } else {
                ExitStatus::InputError
            };
        }
    };
    let result = match &cli.command {
        Command::Anonymize {
            input,
            policy,
            output,
            report,
            csv,
        } => anonymize(input, policy, output, report, csv, out),
        Command::Check { input, policy, csv } => check(input, policy, csv, out),
        Command::HierarchyValidate { policy, input, csv } => {
            hierarchy_validate(policy, input.as_deref(), csv, out)
        }
    };
    match result {
        Ok(status) => status,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            ExitStatus::from_error(&e)
        }
    }
}

/// Entry point used by the binary: stdout/stderr, exit status returned.
pub fn cli_main<I, T>(argv: I) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run(argv, &mut std::io::stdout(), &mut std::io::stderr())
}
