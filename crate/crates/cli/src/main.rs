mod commands;
mod options;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use promptad_core::prompt::Scenario;

use options::{DataRoot, ModelArgs, PreprocessorArgs, StoreArgs, TemplateArgs};

#[derive(Parser)]
#[command(name = "promptad", version, about = "Prompt-based industrial anomaly detection toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the prompt sent for one test sample under one configuration.
    Compose {
        #[arg(long)]
        scenario: Scenario,
        /// Dataset root (directory, or eval CSV for crimp-features).
        #[arg(long)]
        data: PathBuf,
        /// Configuration key, e.g. `few3+ti-oi-ci-ei`.
        #[arg(long)]
        config: String,
        /// Test sample id; defaults to the first test sample.
        #[arg(long)]
        sample: Option<String>,
        #[command(flatten)]
        template: TemplateArgs,
    },
    /// Inspect or edit the versioned template store.
    Template {
        #[command(subcommand)]
        action: TemplateAction,
    },
    /// Turn an expert note into a proposed template edit, then approve or reject it.
    Refine {
        #[command(flatten)]
        store: StoreArgs,
        /// The expert's note.
        #[arg(long, conflicts_with = "notes_file", required_unless_present = "notes_file")]
        notes: Option<String>,
        #[arg(long)]
        notes_file: Option<PathBuf>,
        /// Sections the pre-processor may rewrite: context, expertise, output.
        #[arg(long, value_delimiter = ',', required = true)]
        target: Vec<String>,
        /// Prompt-engineering guidelines; the bundled text when absent.
        #[arg(long)]
        guidelines: Option<PathBuf>,
        /// Approve without asking.
        #[arg(long, short = 'y')]
        yes: bool,
        #[command(flatten)]
        model: PreprocessorArgs,
    },
    /// Run the prompt ablation over a dataset and write a run directory.
    Ablate {
        #[arg(long)]
        scenario: Scenario,
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated configuration keys; the scenario's default rows when absent.
        #[arg(long, value_delimiter = ',')]
        configs: Vec<String>,
        /// Replace the dataset's in-prompt reference samples.
        #[arg(long, value_delimiter = ',')]
        reference_ids: Option<Vec<String>>,
        #[arg(long, default_value = "runs")]
        runs: PathBuf,
        /// Defaults to an id derived from the inputs.
        #[arg(long)]
        run_id: Option<String>,
        /// Classify one sample at a time.
        #[arg(long)]
        serial: bool,
        #[command(flatten)]
        template: TemplateArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Isolation Forest ramp-up over growing normal-only training sets.
    BenchIf {
        /// Curves CSV; only the normal curves are used.
        #[arg(long)]
        pool: PathBuf,
        /// Evaluation curves (CSV or crimp directory layout).
        #[arg(long)]
        eval: PathBuf,
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        /// Contamination grid; 0.10 to 0.50 in steps of 0.05 when absent.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trees: usize,
        #[arg(long)]
        out: PathBuf,
        /// Constant overlay `label=precision,recall,f1` (fractions); repeatable.
        #[arg(long)]
        benchmark: Vec<String>,
        #[arg(long)]
        serial: bool,
    },
    /// Threshold an external score set on a stratified validation split.
    BenchScores {
        /// CSV with `sample_id,score,label`.
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        val_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
    /// Show the rows or misclassified samples of a finished run.
    Report {
        #[arg(long, default_value = "runs")]
        runs: PathBuf,
        #[arg(long)]
        run_id: Option<String>,
        #[arg(long)]
        misclassified: bool,
        #[arg(long)]
        json: bool,
    },
    /// Serve the JSON API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value = "runs")]
        runs: PathBuf,
        #[command(flatten)]
        store: StoreArgs,
        /// `scenario=path`; repeatable.
        #[arg(long)]
        data: Vec<DataRoot>,
        /// Environment variable holding the shared bearer token.
        #[arg(long)]
        token_env: Option<String>,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        preprocessor: PreprocessorArgs,
    },
}

#[derive(Subcommand)]
enum TemplateAction {
    /// Print a version in the template file format.
    Show {
        #[command(flatten)]
        store: StoreArgs,
        #[arg(long)]
        version: Option<u64>,
    },
    /// List versions with their provenance.
    History {
        #[command(flatten)]
        store: StoreArgs,
    },
    /// Save a template file as the next version.
    Set {
        #[command(flatten)]
        store: StoreArgs,
        file: PathBuf,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    match commands::run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
