//! `tablrp`: run the pipeline subcommands against an output directory.
//!
//! Every key of the run configuration is also a `--kebab-case` flag; flags
//! override the file given with `--config`. The output directory falls back
//! to `$TABLRP_OUT`, then `./tablrp-out`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};
use tablrp::pipeline::{run, run_sequence, KeyKind, RunConfig, Subcommand};
use tablrp::Error;

fn about(cmd: Subcommand) -> &'static str {
    match cmd {
        Subcommand::Prep => {
            "Load, encode and split the CSV; writes encoded.csv, encoder.json, split.json"
        }
        Subcommand::Train => {
            "Train the network on the training split; writes checkpoint.json, history.csv"
        }
        Subcommand::Eval => {
            "Score the checkpoint on the test split and cross-validate; writes metrics.json/.md"
        }
        Subcommand::Explain => {
            "Attribute test predictions with each method; writes attributions and heatmaps"
        }
        Subcommand::Rank => {
            "Rank features per method and outcome group; writes rank.json, subset.json"
        }
        Subcommand::Reduce => "Retrain on the selected subset; writes study.json/.md",
        Subcommand::Compare => "Compare method rankings; writes compare_tp.csv, overlap.json",
        Subcommand::Bench => "Time explanations per record; writes timing.json/.md",
        Subcommand::Report => "Bundle every available artifact into report.md",
    }
}

fn cli() -> Command {
    let mut cmd = Command::new("tablrp")
        .version(env!("CARGO_PKG_VERSION"))
        .about("1-D CNNs on tabular data, explained with LRP, LIME and SHAP")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("config")
                .long("config")
                .short('c')
                .global(true)
                .value_name("FILE")
                .help("TOML run configuration"),
        )
        .arg(
            Arg::new("verbose")
                .long("verbose")
                .short('v')
                .global(true)
                .action(ArgAction::Count)
                .help("More log output (repeat for debug)"),
        );
    for (key, kind) in RunConfig::keys() {
        let flag = key.replace('_', "-");
        let help = match kind {
            KeyKind::List => format!("override `{key}` (comma-separated)"),
            _ => format!("override `{key}`"),
        };
        cmd = cmd.arg(
            Arg::new(key)
                .long(flag)
                .global(true)
                .value_name("VALUE")
                .help(help)
                .help_heading("Configuration"),
        );
    }
    for sub in Subcommand::ALL {
        cmd = cmd.subcommand(Command::new(sub.name()).about(about(sub)));
    }
    cmd.subcommand(Command::new("all").about("Run every subcommand in order"))
        .subcommand(Command::new("config").about("Print the resolved configuration"))
}

fn overrides(m: &ArgMatches) -> Vec<(String, String)> {
    RunConfig::keys()
        .into_iter()
        .filter_map(|(k, _)| m.get_one::<String>(k).map(|v| (k.to_string(), v.clone())))
        .collect()
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::SpecParse { .. } => 2,
        Error::MissingArtifact { .. } => 3,
        Error::Mismatch(_) => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let m = cli().get_matches();
    let (name, sub) = m.subcommand().expect("subcommand is required");
    let level = match sub.get_count("verbose").max(m.get_count("verbose")) {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let mut ov = overrides(&m);
    ov.extend(overrides(sub));
    let config = sub
        .get_one::<String>("config")
        .or(m.get_one::<String>("config"))
        .map(PathBuf::from);
    let result = RunConfig::load_file(config.as_deref(), &ov).and_then(|cfg| match name {
        "config" => cfg.to_toml().map(|t| {
            print!("{t}");
            Vec::new()
        }),
        "all" => run_sequence(&Subcommand::ALL, &cfg),
        other => run(other.parse()?, &cfg),
    });
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.kind());
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_definition_is_consistent() {
        cli().debug_assert();
    }

    #[test]
    fn every_config_key_is_a_flag() {
        let m = cli()
            .try_get_matches_from([
                "tablrp",
                "train",
                "--seed",
                "4",
                "--explain-methods",
                "lrp,lime",
            ])
            .unwrap();
        let (_, sub) = m.subcommand().unwrap();
        let ov = overrides(sub);
        assert!(ov.contains(&("seed".into(), "4".into())));
        let cfg = RunConfig::load(None, &ov).unwrap();
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.explain_methods.len(), 2);
    }
}
