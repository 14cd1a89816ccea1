use std::ffi::OsString;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

mod cmd_data;
mod cmd_latent;
mod cmd_model;
mod cmd_rir;
mod config;

#[derive(Parser)]
#[command(
    name = "reverbkit",
    version,
    about = "Reverberation-aware speech restoration toolkit"
)]
#[command(args_override_self = true)]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Log level: error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a shoebox room impulse response.
    SimulateRir(cmd_rir::SimulateArgs),
    /// Report RT60, DRR and direct-path position of an RIR.
    AnalyzeRir(cmd_rir::AnalyzeArgs),
    /// Build degraded training pairs with the clean/reverberant target switch.
    Degrade(cmd_data::DegradeArgs),
    /// Re-reverberate a dry signal with a simulated RIR matched on RT60 and DRR.
    Baseline(cmd_rir::BaselineArgs),
    /// Train the reverb encoder and decoder on a corpus.
    Train(cmd_model::TrainArgs),
    /// Extract a reverb feature from a WAV file.
    Encode(cmd_model::EncodeArgs),
    /// Decode a clean utterance's log-mel spectrogram under a reverb feature.
    DecodeDemo(cmd_model::DecodeArgs),
    /// Interpolate between two reverb features.
    Interp(cmd_latent::InterpArgs),
    /// Fit PCA to a set of reverb features.
    Pca(cmd_latent::PcaArgs),
    /// Sample reverb features from the principal plane.
    Sample(cmd_latent::SampleArgs),
    /// Score hypothesis audio against references (MCD, GPE).
    Evaluate(cmd_data::EvaluateArgs),
    /// Generate a synthetic corpus of clean/reverberant/degraded triples.
    SynthCorpus(cmd_data::SynthArgs),
}

const SUBCOMMANDS: &[&str] = &[
    "simulate-rir",
    "analyze-rir",
    "degrade",
    "baseline",
    "train",
    "encode",
    "decode-demo",
    "interp",
    "pca",
    "sample",
    "evaluate",
    "synth-corpus",
];

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    match cli.command {
        Command::SimulateRir(a) => cmd_rir::simulate(a),
        Command::AnalyzeRir(a) => cmd_rir::analyze(a),
        Command::Degrade(a) => cmd_data::degrade(a),
        Command::Baseline(a) => cmd_rir::baseline(a),
        Command::Train(a) => cmd_model::train(a),
        Command::Encode(a) => cmd_model::encode(a),
        Command::DecodeDemo(a) => cmd_model::decode_demo(a),
        Command::Interp(a) => cmd_latent::interp(a),
        Command::Pca(a) => cmd_latent::pca(a),
        Command::Sample(a) => cmd_latent::sample(a),
        Command::Evaluate(a) => cmd_data::evaluate(a),
        Command::SynthCorpus(a) => cmd_data::synth_corpus(a),
    }
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<reverbkit::Error>() {
            return e.kind();
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return "io";
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return "json";
        }
    }
    "error"
}

fn report(kind: &str, message: &str) {
    let line = serde_json::json!({ "error": kind, "message": message.replace('\n', " ") });
    eprintln!("{line}");
}

fn main() -> ExitCode {
    let argv: Vec<OsString> = std::env::args_os().collect();
    let argv = match config::expand_config(argv, SUBCOMMANDS) {
        Ok(a) => a,
        Err(e) => {
            report("config", &format!("{e:#}"));
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let body = msg.split("\n\nUsage:").next().unwrap_or("");
            let body = body
                .trim_start_matches("error: ")
                .split_whitespace()
                .collect::<Vec<_>>()
                .join(" ");
            report("usage", &body);
            return ExitCode::from(2);
        }
    };
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(error_kind(&e), &format!("{e:#}"));
            ExitCode::FAILURE
        }
    }
}
