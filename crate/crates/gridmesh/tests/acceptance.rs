//! Acceptance suite. Each test checks one numbered criterion and prints a
//! single `criterion N PASS|FAIL` line before asserting.
//!
//! Run with `cargo test -p gridmesh --test acceptance -- --nocapture` to see
//! the lines of passing criteria too.

use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::sync::Arc;
use std::time::{Duration, Instant};

use gridmesh::sim::{run, SimConfig};
use gridmesh_client::{rpc, ClientError, Http};
use gridmesh_core::autopilot::{linear_trend, run_job, JobValue};
use gridmesh_core::clock::ManualClock;
use gridmesh_core::formula::{evaluate_formula, parse_formula};
use gridmesh_core::import::{import_csv, ImportOptions};
use gridmesh_core::rpc::*;
use gridmesh_core::templates::load_template;
use gridmesh_core::{parse_save_string, replay_log, serialize_sheet, CellAddress, ComputedValue, SheetName};
use gridmesh_server::{HashCost, ServerConfig, Store};
use gridmesh_testkit::gen::{random_csv, random_log, random_sheet};
use gridmesh_testkit::ols::{close, normal_equations, random_series, scale, sse};
use gridmesh_testkit::oracle::{random_value, render, values_agree, FormulaGen, Oracle, Pos};
use rand::rngs::StdRng;
use rand::SeedableRng;

const SIM_SEEDS: [u64; 10] = [42, 1, 2, 3, 4, 5, 6, 7, 8, 9];
/// Relative tolerance for numeric formula results and OLS coefficients.
const REL_TOL: f64 = 1e-9;

fn verdict(n: u32, title: &str, ok: bool, detail: String) {
    println!("criterion {n} {}: {title} ({detail})", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} failed: {title}: {detail}");
}

#[test]
fn criterion_1_convergence() {
    let started = Instant::now();
    let mut failures = Vec::new();
    let mut lines = Vec::new();
    for seed in SIM_SEEDS {
        let out = Command::new(env!("CARGO_BIN_EXE_gridmesh-sim"))
            .args(["--clients", "5", "--edits", "200", "--poll-min-ms", "50", "--poll-max-ms", "500"])
            .args(["--seed", &seed.to_string()])
            .output()
            .expect("gridmesh-sim runs");
        let stdout = String::from_utf8_lossy(&out.stdout).trim().to_string();
        if !out.status.success() || !stdout.starts_with("CONVERGED seq=1000 ") {
            failures.push(format!("seed {seed}: {stdout}"));
        }
        lines.push(stdout);
    }
    let elapsed = started.elapsed();
    let ok = failures.is_empty() && elapsed < Duration::from_secs(60);
    let detail = format!("10 seeds, {:.1}s total, seed 42: {}; failures: {failures:?}", elapsed.as_secs_f64(), lines[0]);
    verdict(1, "every simulated client display equals the server sheet", ok, detail);
}

#[test]
fn criterion_2_exactly_once_feed() {
    let mut runs = 0;
    let mut bad = Vec::new();
    for drop_rate in [0.0, 0.2] {
        for seed in SIM_SEEDS {
            let config = SimConfig { seed, drop_rate, ..Default::default() };
            let report = run(&config).expect("simulation runs");
            runs += 1;
            if !report.exactly_once() || !report.converged() {
                bad.push(format!("seed {seed} drop {drop_rate}: {}", report.summary()));
            }
        }
    }
    verdict(2, "each client applies seqs 1..N exactly once", bad.is_empty(), format!("{runs} runs incl. 20% loss; bad: {bad:?}"));
}

#[test]
fn criterion_3_replay_determinism() {
    let started = Instant::now();
    let mut rng = StdRng::seed_from_u64(303);
    let mut mismatches = 0;
    for _ in 0..100 {
        let log = random_log(&mut rng, 1000, 8, 8);
        let a = serialize_sheet(&replay_log(SheetName::default(), &log));
        let b = serialize_sheet(&replay_log(SheetName::default(), &log));
        mismatches += usize::from(a != b);
    }
    let elapsed = started.elapsed();
    let ok = mismatches == 0 && elapsed < Duration::from_secs(10);
    verdict(3, "replaying a log twice gives identical bytes", ok, format!("100 logs x 1000 commands, {mismatches} mismatches, {:.2}s", elapsed.as_secs_f64()));
}

#[test]
fn criterion_4_formula_oracle() {
    let started = Instant::now();
    let mut rng = StdRng::seed_from_u64(404);
    let gen = FormulaGen { cols: 5, rows: 5, max_depth: 4 };
    let mut mismatches = Vec::new();
    for _ in 0..10_000 {
        let mut cells: HashMap<Pos, ComputedValue> = HashMap::new();
        for col in 1..=5 {
            for row in 1..=5 {
                if let Some(v) = random_value(&mut rng, true) {
                    cells.insert((col, row), v);
                }
            }
        }
        let tree = gen.expr(&mut rng, 0);
        let src = render(&tree);
        let expected = Oracle::new(&cells).eval(&tree);
        let expr = parse_formula(&src).expect("generated formulas parse");
        let actual = evaluate_formula(&expr, &|a: CellAddress| cells.get(&(a.col(), a.row())).cloned());
        if !values_agree(&actual, &expected, REL_TOL) && mismatches.len() < 5 {
            mismatches.push(format!("{src}: {actual:?} vs {expected:?}"));
        }
    }
    let elapsed = started.elapsed();
    let ok = mismatches.is_empty() && elapsed < Duration::from_secs(30);
    verdict(4, "engine agrees with the reference interpreter", ok, format!("10000 formulas, depth <= 4, {:.2}s, mismatches: {mismatches:?}", elapsed.as_secs_f64()));
}

#[test]
fn criterion_5_round_trip() {
    let mut rng = StdRng::seed_from_u64(505);
    let mut sheet_failures = 0;
    for _ in 0..1000 {
        let sheet = random_sheet(&mut rng, 8, 12, 40);
        let text = serialize_sheet(&sheet);
        let ok = match parse_save_string(&text) {
            Ok(back) => back == sheet && serialize_sheet(&back) == text && serialize_sheet(&sheet) == text,
            Err(_) => false,
        };
        sheet_failures += usize::from(!ok);
    }
    let mut csv_failures = 0;
    for i in 0..100 {
        let csv = random_csv(&mut rng);
        let options = ImportOptions { has_header: i % 4 == 0, ..Default::default() };
        let ok = match import_csv(csv.as_bytes(), &options) {
            Ok(saved) => parse_save_string(&saved).map(|s| serialize_sheet(&s) == saved).unwrap_or(false),
            Err(_) => false,
        };
        csv_failures += usize::from(!ok);
    }
    let ok = sheet_failures == 0 && csv_failures == 0;
    verdict(5, "save strings round-trip and CSV import is a fixpoint", ok, format!("{sheet_failures}/1000 sheet and {csv_failures}/100 CSV failures"));
}

#[test]
fn criterion_6_reference_values() {
    let attendance = load_template("school-attendance").unwrap();
    let sheet = attendance.sheet();
    let at = |s: &gridmesh_core::Sheet, a: &str| s.get_cell(a.parse().unwrap()).value();
    let job = |id: &str| {
        let j = attendance.jobs.iter().find(|j| j.id == id).unwrap();
        run_job(&sheet, j.range, &j.kind)
    };
    let present = at(&sheet, "C8");
    let absent = at(&sheet, "C9");
    let marks = load_template("school-marks").unwrap().sheet();
    let percent = at(&marks, "H2");
    let num = |n: f64| Some(ComputedValue::Num(n));
    let ok = present == num(3.0)
        && absent == num(2.0)
        && job("present") == JobValue::Value { value: ComputedValue::Num(3.0) }
        && job("absent") == JobValue::Value { value: ComputedValue::Num(2.0) }
        && percent == num(80.0);
    verdict(6, "attendance and marks templates reproduce the reference figures", ok, format!("COUNTIF P = {present:?}, COUNTIF A = {absent:?}, 24/30*100 = {percent:?}"));
}

struct ServerProcess {
    child: Child,
    addr: String,
}

fn start_server(data_dir: &Path) -> ServerProcess {
    let mut child = Command::new(env!("CARGO_BIN_EXE_gridmesh-server"))
        .args(["--port", "0", "--data-dir"])
        .arg(data_dir)
        .stdout(Stdio::piped())
        .spawn()
        .expect("server starts");
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().rsplit("http://").next().expect("address printed").to_string();
    ServerProcess { child, addr }
}

fn open_remote(http: &Http, user: &Credentials, key: &SheetKey) -> Result<OpenSheetResult, ClientError> {
    let login: LoginResult = rpc(http, methods::LOGIN, "", user)?;
    rpc(http, methods::OPEN_SHEET, &login.session, OpenSheetParams { key: key.clone(), secret: "sesame".into() })
}

#[test]
fn criterion_7_durability() {
    let dir = tempfile::tempdir().unwrap();
    let mut server = start_server(dir.path());
    let http = Http::new(&server.addr, Duration::from_secs(10));
    let user = Credentials { username: "durable".into(), password: "durable-password".into() };
    rpc::<()>(&http, methods::CREATE_ACCOUNT, "", &user).unwrap();
    let session = rpc::<LoginResult>(&http, methods::LOGIN, "", &user).unwrap().session;
    let key: SheetKey =
        rpc(&http, methods::CREATE_SHEET, &session, CreateSheetParams { group: "g".into(), secret: "sesame".into() }).unwrap();
    let mut rng = StdRng::seed_from_u64(707);
    let mut acked = 0;
    for cmd in random_log(&mut rng, 500, 6, 10) {
        let params = SendCommandsParams { key: key.clone(), commands: vec![cmd.to_string()] };
        let r: SendCommandsResult = rpc(&http, methods::SEND_COMMANDS, &session, params).unwrap();
        acked = r.last_seq;
    }
    let before = open_remote(&http, &user, &key).unwrap();
    server.child.kill().unwrap();
    server.child.wait().unwrap();

    let mut restarted = start_server(dir.path());
    let http = Http::new(&restarted.addr, Duration::from_secs(10));
    let after = open_remote(&http, &user, &key).unwrap();
    restarted.child.kill().unwrap();
    restarted.child.wait().unwrap();
    let ok = acked == 500 && after.last_seq == 500 && after.snapshot == before.snapshot;
    verdict(7, "state after SIGKILL and restart equals state before", ok, format!("{acked} acked, {} after restart, {} bytes identical: {}", after.last_seq, before.snapshot.len(), after.snapshot == before.snapshot));
}

#[test]
fn criterion_8_auth_gates() {
    let clock = ManualClock::new(10_000);
    let config = ServerConfig { hash_cost: HashCost::Fast, ..Default::default() };
    let store = Store::with_clock(config, Arc::new(clock.clone())).unwrap();
    let ann = Credentials { username: "ann".into(), password: "ann-password".into() };
    let bob = Credentials { username: "bob".into(), password: "bob-password".into() };
    store.create_account(&ann).unwrap();
    store.create_account(&bob).unwrap();
    let ann_session = store.login(&ann).unwrap().session;
    let key = store.create_sheet(&ann_session, &CreateSheetParams { group: "g".into(), secret: "sesame".into() }).unwrap();
    store.send_commands(&ann_session, &SendCommandsParams { key: key.clone(), commands: vec!["set A1 value n 1".into()] }).unwrap();
    let bob_session = store.login(&bob).unwrap().session;

    let mut outcomes = Vec::new();
    let mut check = |name: &str, expected: RpcErrorCode, attempt: &dyn Fn() -> Option<RpcErrorCode>| {
        let before = store.state_digest();
        let got = attempt();
        let unchanged = store.state_digest() == before;
        outcomes.push((name.to_string(), got == Some(expected) && unchanged, format!("{name}: {got:?}, unchanged {unchanged}")));
    };
    check("wrong password", RpcErrorCode::BadCredentials, &|| {
        store.login(&Credentials { username: "ann".into(), password: "guess-guess".into() }).err().map(|e| e.code)
    });
    check("wrong sheet id", RpcErrorCode::AuthDenied, &|| {
        store.open_sheet(&bob_session, &OpenSheetParams { key: key.clone(), secret: "guess".into() }).err().map(|e| e.code)
    });
    check("non-member poll", RpcErrorCode::NotMember, &|| {
        store.poll_changes(&bob_session, &PollChangesParams { key: key.clone(), since_seq: 0 }).err().map(|e| e.code)
    });
    clock.advance(store.config().session_ttl_ms + 1);
    check("expired session", RpcErrorCode::AuthRequired, &|| {
        store.poll_changes(&ann_session, &PollChangesParams { key: key.clone(), since_seq: 0 }).err().map(|e| e.code)
    });
    let ok = outcomes.iter().all(|(_, ok, _)| *ok);
    let detail: Vec<String> = outcomes.into_iter().map(|(_, _, d)| d).collect();
    verdict(8, "rejected calls return their error and leave the store hash unchanged", ok, detail.join("; "));
}

#[test]
fn criterion_9_least_squares() {
    let mut rng = StdRng::seed_from_u64(909);
    let mut off = Vec::new();
    let mut not_optimal = 0;
    let h = 1e-3;
    for _ in 0..1000 {
        let ys = random_series(&mut rng);
        let t = linear_trend(&ys).unwrap();
        let (slope, intercept) = normal_equations(&ys);
        let s = scale(&ys);
        if !(close(t.slope, slope, s, REL_TOL) && close(t.intercept, intercept, s, REL_TOL)) && off.len() < 3 {
            off.push(format!("{ys:?}"));
        }
        let best = sse(&ys, t.slope, t.intercept);
        let probes = [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h)];
        not_optimal += usize::from(probes.iter().any(|(ds, di)| sse(&ys, t.slope + ds, t.intercept + di) < best));
    }
    let ok = off.is_empty() && not_optimal == 0;
    verdict(9, "trend lines match the normal equations and are local optima", ok, format!("1000 series, tolerance {REL_TOL:e}, off: {off:?}, probe failures: {not_optimal}"));
}
