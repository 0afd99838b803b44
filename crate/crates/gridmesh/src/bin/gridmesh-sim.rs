use std::process::ExitCode;

use clap::Parser;
use gridmesh::sim::{run, SimConfig};

/// Runs concurrent clients against one sheet and checks they converge.
#[derive(Parser)]
#[command(name = "gridmesh-sim", version)]
struct Args {
    /// Server address (`host:port`), or `in-process` for a simulated server.
    #[arg(long, default_value = "in-process")]
    server: String,
    #[arg(long, default_value_t = 5)]
    clients: usize,
    /// Edits per client.
    #[arg(long, default_value_t = 200)]
    edits: usize,
    #[arg(long, default_value_t = 50)]
    poll_min_ms: u64,
    #[arg(long, default_value_t = 500)]
    poll_max_ms: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Probability that any client call is lost.
    #[arg(long, default_value_t = 0.0)]
    drop_rate: f64,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if args.clients == 0 || args.poll_min_ms == 0 || args.poll_min_ms > args.poll_max_ms {
        eprintln!("need at least one client and 0 < poll-min-ms <= poll-max-ms");
        return ExitCode::from(2);
    }
    if !(0.0..1.0).contains(&args.drop_rate) {
        eprintln!("drop-rate must be in [0, 1)");
        return ExitCode::from(2);
    }
    let config = SimConfig {
        server: (args.server != "in-process").then_some(args.server),
        clients: args.clients,
        edits: args.edits,
        poll_min_ms: args.poll_min_ms,
        poll_max_ms: args.poll_max_ms,
        seed: args.seed,
        drop_rate: args.drop_rate,
    };
    match run(&config) {
        Ok(report) => {
            println!("{}", report.summary().trim_end());
            if report.converged() && report.exactly_once() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("simulation failed: {e}");
            ExitCode::FAILURE
        }
    }
}
