use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::Parser;
use gridmesh_core::templates::{load_template, TEMPLATE_NAMES};
use gridmesh_server::{auth, spawn_ticker, RunningServer, ServerConfig, Service, Store};

/// The gridmesh sync server.
#[derive(Parser)]
#[command(name = "gridmesh-server", version)]
struct Args {
    #[arg(long, default_value_t = 7370)]
    port: u16,
    /// Address to bind.
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, env = "GRIDMESH_DATA_DIR", default_value = "gridmesh-data")]
    data_dir: PathBuf,
    /// How long after its last open or poll a session still counts as present.
    #[arg(long, default_value_t = 10)]
    presence_timeout_s: u64,
    /// Sessions idle for longer than this expire.
    #[arg(long, default_value_t = 86_400)]
    session_ttl_s: u64,
    /// Directory with the web client; a placeholder page is served without it.
    #[arg(long)]
    static_dir: Option<PathBuf>,
    /// Install a template sheet for `--author`, print its key, and exit.
    #[arg(long, value_name = "NAME", requires = "author")]
    install_template: Option<String>,
    #[arg(long)]
    author: Option<String>,
    /// Sheet id for the installed template; a random one is printed if omitted.
    #[arg(long)]
    secret: Option<String>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let config = ServerConfig {
        data_dir: Some(args.data_dir.clone()),
        presence_window_ms: args.presence_timeout_s * 1000,
        session_ttl_ms: args.session_ttl_s * 1000,
        ..Default::default()
    };
    let store = match Store::new(config) {
        Ok(s) => Arc::new(s),
        Err(e) => {
            eprintln!("cannot open {}: {e}", args.data_dir.display());
            return ExitCode::FAILURE;
        }
    };

    if let Some(name) = args.install_template {
        let Ok(pack) = load_template(&name) else {
            eprintln!("unknown template {name:?}; available: {}", TEMPLATE_NAMES.join(", "));
            return ExitCode::from(2);
        };
        let author = args.author.expect("clap requires --author");
        let secret = args.secret.unwrap_or_else(auth::new_token);
        return match store.install_template(&author, &pack, &secret) {
            Ok(key) => {
                println!("installed {key} with sheet id {secret}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("install failed: {e}");
                ExitCode::FAILURE
            }
        };
    }

    let addr: SocketAddr = match format!("{}:{}", args.host, args.port).parse() {
        Ok(a) => a,
        Err(e) => {
            eprintln!("bad address: {e}");
            return ExitCode::from(2);
        }
    };
    spawn_ticker(store.clone(), Duration::from_millis(250));
    match RunningServer::start(Service::new(store), args.static_dir, addr) {
        Ok(server) => {
            println!("gridmesh-server listening on http://{}", server.addr);
            server.wait()
        }
        Err(e) => {
            eprintln!("cannot listen on {addr}: {e}");
            ExitCode::FAILURE
        }
    }
}
