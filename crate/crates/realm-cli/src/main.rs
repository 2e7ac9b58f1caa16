use std::path::PathBuf;
use std::process::ExitCode;

use realm_cli::config::RunConfig;
use realm_cli::{commands, CliError, CliResult};

const USAGE: &str = "\
usage: realm <command> [options]

commands:
  pretrain   train the source model and write model.json
  adapt      run online adaptation of a pretrained model over the target stream
  sweep      run the pipeline once per value of one config key
  check      run the math invariant suite

options:
  --config FILE          read a `key = value` config file first
  --model FILE           pretrained model (adapt only)
  --axis NAME            sweep axis: lr_alpha_lambda, severity, n_target, d,
                         alpha0, lambda0, strategy (sweep only)
  --values a,b,c         comma-separated sweep values (sweep only)
  --KEY VALUE            override any config key, e.g. --seed 11 --strategy eata

exit codes: 0 success, 1 check/runtime failure, 2 config error.
";

struct ParsedArgs {
    command: String,
    config: RunConfig,
    model_path: Option<PathBuf>,
    axis: Option<String>,
    values: Vec<String>,
}

fn parse_args(args: &[String]) -> CliResult<ParsedArgs> {
    let command = args
        .first()
        .cloned()
        .ok_or_else(|| CliError::Config("missing command".to_string()))?;

    // First pass: find --config so file values load before overrides apply.
    let mut config = RunConfig::default();
    for i in 1..args.len() {
        if args[i] == "--config" {
            let path = args
                .get(i + 1)
                .ok_or_else(|| CliError::Config("missing value for --config".to_string()))?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read config file: {e}")))?;
            config = RunConfig::from_file_text(&text)?;
            break;
        }
    }

    let mut model_path = None;
    let mut axis = None;
    let mut values = Vec::new();
    let mut i = 1;
    while i < args.len() {
        let flag = &args[i];
        let key = flag
            .strip_prefix("--")
            .ok_or_else(|| CliError::Config(format!("expected --key value, got '{flag}'")))?;
        let value = args
            .get(i + 1)
            .ok_or_else(|| CliError::Config(format!("missing value for --{key}")))?;
        match key {
            "config" => {} // already handled
            "model" => model_path = Some(PathBuf::from(value)),
            "axis" => axis = Some(value.clone()),
            "values" => {
                values = value.split(',').map(|s| s.trim().to_string()).collect();
            }
            _ => config.apply(key, value)?,
        }
        i += 2;
    }
    Ok(ParsedArgs { command, config, model_path, axis, values })
}

fn run(args: &[String]) -> CliResult<()> {
    let parsed = parse_args(args)?;
    match parsed.command.as_str() {
        "pretrain" => commands::cmd_pretrain(&parsed.config),
        "adapt" => {
            let model = parsed
                .model_path
                .ok_or_else(|| CliError::Config("adapt requires --model FILE".to_string()))?;
            commands::cmd_adapt(&parsed.config, &model)
        }
        "sweep" => {
            let axis = parsed
                .axis
                .ok_or_else(|| CliError::Config("sweep requires --axis NAME".to_string()))?;
            commands::cmd_sweep(&parsed.config, &axis, &parsed.values)
        }
        "check" => commands::cmd_check(),
        other => Err(CliError::Config(format!("unknown command '{other}'"))),
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.is_empty() || args[0] == "--help" || args[0] == "-h" || args[0] == "help" {
        print!("{USAGE}");
        return ExitCode::SUCCESS;
    }
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
