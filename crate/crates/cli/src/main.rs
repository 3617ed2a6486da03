use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use unktx_cli::commands::{
    cmd_cluster, cmd_label, cmd_oracle_check, cmd_synth, filter_matcher, ClusterFormat,
};
use unktx_cli::error::{CliError, CliResult};
use unktx_cli::fetch::{fetch, RpcClient};
use unktx_cli::pipeline::{run_config_file, write_stdout_report};

#[derive(Parser)]
#[command(name = "unktx", version, about = "Unknown-transaction pattern extraction and clustering")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a synthetic ledger from a generator spec (JSON or .toml).
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Append blocks from a node's JSON-RPC interface, resuming after the
    /// last complete line of `--out`.
    Fetch {
        /// Defaults to $NODE_RPC_URL. Credentials come from $NODE_RPC_AUTH.
        #[arg(long)]
        node_url: Option<String>,
        #[arg(long)]
        from: u64,
        #[arg(long)]
        to: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the whole pipeline as described by a config file.
    Run {
        config: PathBuf,
        /// Also print the class report to standard output.
        #[arg(long)]
        stdout: bool,
    },
    /// Recompute canonical labels for a forest dump.
    Label {
        dump: PathBuf,
        /// Fail if a stored label differs from the recomputed one.
        #[arg(long)]
        check: bool,
    },
    /// Cluster a forest dump and print the class report.
    Cluster {
        dump: PathBuf,
        /// Drop components whose root scripts match the filter rules.
        #[arg(long)]
        filter: bool,
        /// Rule file to use instead of the built-in filters.
        #[arg(long)]
        filter_rules: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Cross-check canonical labels against brute force.
    OracleCheck {
        max_n: usize,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "oracle-report.json")]
        report: PathBuf,
    },
}

fn dispatch(cmd: Cmd) -> CliResult<()> {
    let stdout = std::io::stdout();
    match cmd {
        Cmd::Synth { spec, seed, out } => cmd_synth(&spec, seed, &out),
        Cmd::Fetch {
            node_url,
            from,
            to,
            out,
        } => {
            let client = RpcClient::from_env(node_url.as_deref())?;
            let o = fetch(&client, from, to, &out)?;
            eprintln!("fetched {} blocks, last good height {:?}", o.written, o.last_good);
            Ok(())
        }
        Cmd::Run { config, stdout: print } => {
            let s = run_config_file(&config)?;
            if s.counts.inexact_labels > 0 {
                log::warn!("{} labels came from a truncated search", s.counts.inexact_labels);
            }
            if print {
                write_stdout_report(&s, stdout.lock())?;
            }
            Ok(())
        }
        Cmd::Label { dump, check } => cmd_label(&dump, check, stdout.lock()),
        Cmd::Cluster {
            dump,
            filter,
            filter_rules,
            format,
        } => {
            let m = if filter || filter_rules.is_some() {
                Some(filter_matcher(filter_rules.as_deref())?)
            } else {
                None
            };
            let format = match format {
                Format::Csv => ClusterFormat::Csv,
                Format::Json => ClusterFormat::Json,
            };
            let dropped = cmd_cluster(&dump, m.as_ref(), format, stdout.lock())?;
            if !dropped.is_empty() {
                eprintln!("dropped {}", serde_json::to_string(&dropped).map_err(CliError::internal)?);
            }
            Ok(())
        }
        Cmd::OracleCheck {
            max_n,
            samples,
            seed,
            report,
        } => {
            let r = cmd_oracle_check(max_n, samples, seed, &report, stdout.lock())?;
            if r.passed() {
                Ok(())
            } else {
                Err(CliError::internal(anyhow::anyhow!(
                    "oracle disagreement, see {}",
                    report.display()
                )))
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
