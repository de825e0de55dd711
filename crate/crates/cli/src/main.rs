mod args;
mod commands;
mod config;

use std::process::ExitCode;

use clap::{CommandFactory, Parser};
use undermine::{Error, ErrorKind, Result};

use args::{Cli, Command};

fn run() -> Result<String> {
    let argv = config::expand(std::env::args_os().collect(), &Cli::command())?;
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            std::process::exit(0);
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            return Err(Error::Config(first.trim_start_matches("error: ").to_owned()));
        }
    };
    log::debug!("running {}", cli.command.name());
    match &cli.command {
        Command::Ingest(a) => commands::ingest(a),
        Command::Synth(a) => commands::synth(a),
        Command::TrainRanker(a) => commands::train_ranker_cmd(a),
        Command::EvalRanker(a) => commands::eval_ranker(a),
        Command::TrainGenerator(a) => commands::train_generator_cmd(a),
        Command::Generate(a) => commands::generate(a),
        Command::Undermine(a) => commands::undermine_cmd(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Compare(a) => commands::compare(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let (label, code) = match e.kind() {
                ErrorKind::Config => ("config", 2),
                ErrorKind::Data => ("data", 3),
                ErrorKind::Model => ("model", 4),
            };
            eprintln!("{}", serde_json::json!({ "error": label, "message": e.to_string() }));
            ExitCode::from(code)
        }
    }
}
