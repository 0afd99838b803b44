//! Convergence simulator.
//!
//! Several clients edit one sheet concurrently and poll at their own fixed
//! intervals. Time is virtual: events run in timestamp order from a seeded
//! RNG, so a run is reproducible from its seed. Once every client has made
//! its edits the simulation keeps ticking until nothing is pending, then
//! checks that every display equals the server's sheet and that every client
//! applied each seq exactly once.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use gridmesh_client::{rpc, ClientError, Http, InProcess, Lossy, SyncClient, Transport};
use gridmesh_core::clock::ManualClock;
use gridmesh_core::rpc::*;
use gridmesh_core::{CellAddress, CellContent};
use gridmesh_server::{HashCost, ServerConfig, Service, Store};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use sha2::{Digest, Sha256};

/// Edits land in this many columns and rows, so clients collide often.
const AREA_COLS: u32 = 4;
const AREA_ROWS: u32 = 5;
/// Virtual time allowed for settling after the last edit.
const SETTLE_LIMIT_MS: u64 = 600_000;

#[derive(Debug, Clone)]
pub struct SimConfig {
    /// `None` runs an in-process server with a virtual clock.
    pub server: Option<String>,
    pub clients: usize,
    pub edits: usize,
    pub poll_min_ms: u64,
    pub poll_max_ms: u64,
    pub seed: u64,
    /// Chance that any one client call is lost, before or after it runs.
    pub drop_rate: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { server: None, clients: 5, edits: 200, poll_min_ms: 50, poll_max_ms: 500, seed: 42, drop_rate: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub last_seq: u64,
    /// First 16 hex digits of the SHA-256 of the server's save string.
    pub hash: String,
    pub server_sheet: String,
    pub displays: Vec<String>,
    /// Clients whose applied seqs were not exactly `1..=last_seq`.
    pub feed_violations: Vec<usize>,
    pub virtual_ms: u64,
    pub wall: Duration,
}

impl SimReport {
    pub fn converged(&self) -> bool {
        self.displays.iter().all(|d| *d == self.server_sheet)
    }

    pub fn exactly_once(&self) -> bool {
        self.feed_violations.is_empty()
    }

    /// `CONVERGED seq=N bytes=H` on success, else one line per problem.
    pub fn summary(&self) -> String {
        if self.converged() && self.exactly_once() {
            return format!("CONVERGED seq={} bytes={}", self.last_seq, self.hash);
        }
        let mut out = format!("DIVERGED seq={} bytes={}\n", self.last_seq, self.hash);
        for (i, d) in self.displays.iter().enumerate().filter(|(_, d)| **d != self.server_sheet) {
            let server: Vec<&str> = self.server_sheet.lines().collect();
            let client: Vec<&str> = d.lines().collect();
            let only_server = server.iter().filter(|l| !client.contains(l)).count();
            let only_client = client.iter().filter(|l| !server.contains(l)).count();
            out += &format!("client {i}: {only_server} lines only on the server, {only_client} only on the client\n");
            if let Some(line) = server.iter().find(|l| !client.contains(l)) {
                out += &format!("  first missing: {line}\n");
            }
        }
        for i in &self.feed_violations {
            out += &format!("client {i}: applied seqs are not exactly 1..={}\n", self.last_seq);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Event {
    Tick,
    Edit,
}

fn random_content(rng: &mut StdRng) -> CellContent {
    let cell = |rng: &mut StdRng| {
        CellAddress::new(rng.gen_range(1..=AREA_COLS), rng.gen_range(1..=AREA_ROWS)).expect("inside the grid")
    };
    match rng.gen_range(0..20) {
        0..=13 => CellContent::Number(rng.gen_range(-500..500) as f64 / 4.0),
        14..=16 => CellContent::text(["P", "A", "note", "x y"][rng.gen_range(0..4)]),
        17 => CellContent::formula(format!("SUM({}:{})", cell(rng), cell(rng))).expect("valid formula"),
        18 => CellContent::formula(format!("{}*2+{}", cell(rng), cell(rng))).expect("valid formula"),
        _ => CellContent::formula(format!("IF({}>0,{},0)", cell(rng), cell(rng))).expect("valid formula"),
    }
}

fn sha_prefix(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn creds(user: &str) -> Credentials {
    Credentials { username: user.to_string(), password: format!("{user}-password") }
}

/// Runs one simulation to completion.
pub fn run(config: &SimConfig) -> Result<SimReport, ClientError> {
    assert!(config.clients > 0 && config.poll_min_ms > 0 && config.poll_min_ms <= config.poll_max_ms);
    let started = Instant::now();
    let clock = ManualClock::new(0);
    let base: Arc<dyn Transport> = match &config.server {
        None => {
            let server_config = ServerConfig { hash_cost: HashCost::Fast, ..Default::default() };
            let store = Store::with_clock(server_config, Arc::new(clock.clone())).expect("in-memory store");
            Arc::new(InProcess::new(Service::new(Arc::new(store))))
        }
        Some(addr) => Arc::new(Http::new(addr, Duration::from_secs(10))),
    };
    let mut rng = StdRng::seed_from_u64(config.seed);

    // A real server outlives runs, so names get a per-run suffix there.
    let run_id = match config.server {
        None => format!("{}", config.seed),
        Some(_) => format!("{}-{:x}", config.seed, rand::random::<u32>()),
    };
    let users: Vec<String> = (0..config.clients).map(|i| format!("sim{run_id}-{i}")).collect();
    for u in &users {
        rpc::<()>(&base, methods::CREATE_ACCOUNT, "", creds(u))?;
    }
    let owner: LoginResult = rpc(&base, methods::LOGIN, "", creds(&users[0]))?;
    let secret = format!("secret-{run_id}");
    let key: SheetKey = rpc(
        &base,
        methods::CREATE_SHEET,
        &owner.session,
        CreateSheetParams { group: "sim".into(), secret: secret.clone() },
    )?;

    let mut clients = Vec::with_capacity(config.clients);
    for (i, user) in users.iter().enumerate() {
        let interval = rng.gen_range(config.poll_min_ms..=config.poll_max_ms);
        let link = Arc::new(Lossy::new(base.clone(), config.drop_rate, config.seed.wrapping_mul(31).wrapping_add(i as u64)));
        let client_seed = rng.gen();
        let mut attempts = 0;
        let client = loop {
            match SyncClient::connect(link.clone(), &creds(user), key.clone(), &secret, interval, client_seed) {
                Err(ClientError::ConnectFailed(_)) if attempts < 100 => attempts += 1,
                other => break other?,
            }
        };
        clients.push(client);
    }

    let mut queue = BinaryHeap::new();
    let mut edits_left = vec![config.edits; config.clients];
    for (i, c) in clients.iter().enumerate() {
        queue.push(Reverse((rng.gen_range(0..c.poll_interval_ms()), i, Event::Tick)));
        if config.edits > 0 {
            queue.push(Reverse((rng.gen_range(0..config.poll_max_ms), i, Event::Edit)));
        }
    }
    let mut last_edit_at = 0;
    let mut now = 0;
    while let Some(Reverse((at, i, event))) = queue.pop() {
        now = at;
        clock.set(now);
        let c = &mut clients[i];
        match event {
            Event::Edit => {
                let addr = CellAddress::new(rng.gen_range(1..=AREA_COLS), rng.gen_range(1..=AREA_ROWS)).expect("inside");
                c.local_edit(addr, random_content(&mut rng))?;
                edits_left[i] -= 1;
                last_edit_at = now;
                if edits_left[i] > 0 {
                    queue.push(Reverse((now + rng.gen_range(1..=config.poll_max_ms), i, Event::Edit)));
                }
            }
            Event::Tick => {
                let _ = c.tick();
                let delay = c.next_delay_ms();
                let done = edits_left.iter().all(|&n| n == 0);
                if done && settled(&clients) {
                    break;
                }
                if done && now - last_edit_at > SETTLE_LIMIT_MS {
                    break;
                }
                queue.push(Reverse((now + delay, i, Event::Tick)));
            }
        }
    }

    let opened: OpenSheetResult =
        rpc(&base, methods::OPEN_SHEET, &owner.session, OpenSheetParams { key: key.clone(), secret })?;
    let expected: Vec<u64> = (1..=opened.last_seq).collect();
    let feed_violations = clients.iter().enumerate().filter(|(_, c)| c.applied_seqs() != expected).map(|(i, _)| i).collect();
    Ok(SimReport {
        last_seq: opened.last_seq,
        hash: sha_prefix(&opened.snapshot),
        displays: clients.iter().map(SyncClient::display_string).collect(),
        server_sheet: opened.snapshot,
        feed_violations,
        virtual_ms: now,
        wall: started.elapsed(),
    })
}

/// Nothing pending anywhere and every client at the same seq. Once edits stop
/// the server's last seq can only grow through pending commands, so this
/// means every client has seen the whole log.
fn settled<T: Transport>(clients: &[SyncClient<T>]) -> bool {
    let seq = clients[0].confirmed_seq();
    clients.iter().all(|c| c.pending_len() == 0 && c.confirmed_seq() == seq)
}
