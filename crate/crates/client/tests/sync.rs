use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use gridmesh_client::{ClientError, Http, InProcess, Lossy, SyncClient, Transport, TransportError};
use gridmesh_core::rpc::*;
use gridmesh_core::{serialize_sheet, CellAddress, CellContent, ComputedValue};
use gridmesh_server::{HashCost, RunningServer, ServerConfig, Service, Store};
use proptest::prelude::*;

fn service() -> Service {
    let config = ServerConfig { hash_cost: HashCost::Fast, ..Default::default() };
    Service::new(Arc::new(Store::new(config).unwrap()))
}

fn creds(user: &str) -> Credentials {
    Credentials { username: user.into(), password: format!("{user}-password") }
}

/// Creates `users` and a sheet `owner/g` with secret `sesame`.
fn setup(svc: &Service, owner: &str, users: &[&str]) -> SheetKey {
    for u in std::iter::once(&owner).chain(users) {
        svc.store().create_account(&creds(u)).unwrap();
    }
    let token = svc.store().login(&creds(owner)).unwrap().session;
    svc.store().create_sheet(&token, &CreateSheetParams { group: "g".into(), secret: "sesame".into() }).unwrap()
}

fn connect<T: Transport>(transport: T, user: &str, key: &SheetKey) -> SyncClient<T> {
    SyncClient::connect(transport, &creds(user), key.clone(), "sesame", 100, 1).unwrap()
}

fn addr(s: &str) -> CellAddress {
    s.parse().unwrap()
}

fn server_string(svc: &Service, key: &SheetKey) -> String {
    serialize_sheet(&svc.store().materialized(key).unwrap())
}

/// A transport that can be switched off, or told to lose the next response.
struct Switch<T> {
    inner: T,
    down: AtomicBool,
    lose_responses: AtomicUsize,
}

impl<T> Switch<T> {
    fn new(inner: T) -> Arc<Self> {
        Arc::new(Self { inner, down: AtomicBool::new(false), lose_responses: AtomicUsize::new(0) })
    }
}

impl<T: Transport> Transport for Switch<T> {
    fn call(&self, req: &RpcRequest) -> Result<RpcResponse, TransportError> {
        if self.down.load(Ordering::SeqCst) {
            return Err(TransportError("down".into()));
        }
        let resp = self.inner.call(req)?;
        if self.lose_responses.load(Ordering::SeqCst) > 0 {
            self.lose_responses.fetch_sub(1, Ordering::SeqCst);
            return Err(TransportError("response lost".into()));
        }
        Ok(resp)
    }
}

#[test]
fn connect_reflects_server_state() {
    let svc = service();
    let key = setup(&svc, "ann", &["bob"]);
    let c = connect(InProcess::new(svc.clone()), "bob", &key);
    assert!(c.confirmed().is_empty());
    assert_eq!(c.confirmed_seq(), 0);

    let mut ann = connect(InProcess::new(svc.clone()), "ann", &key);
    for (i, v) in ["1", "2", "=A1+A2"].iter().enumerate() {
        ann.edit_input(addr(&format!("A{}", i + 1)), v).unwrap();
    }
    let late = connect(InProcess::new(svc.clone()), "bob", &key);
    assert_eq!(late.confirmed_seq(), 3);
    assert_eq!(serialize_sheet(late.confirmed()), server_string(&svc, &key));

    let wrong = SyncClient::connect(InProcess::new(svc.clone()), &creds("bob"), key.clone(), "nope", 100, 1);
    assert!(matches!(wrong, Err(ClientError::Rpc(RpcError { code: RpcErrorCode::AuthDenied, .. }))));
    let down = Switch::new(InProcess::new(svc.clone()));
    down.down.store(true, Ordering::SeqCst);
    let failed = SyncClient::connect(down, &creds("bob"), key, "sesame", 100, 1);
    assert!(matches!(failed, Err(ClientError::ConnectFailed(_))));
}

#[test]
fn edits_show_immediately_and_echoes_are_suppressed() {
    let svc = service();
    let key = setup(&svc, "ann", &["bob"]);
    let mut ann = connect(InProcess::new(svc.clone()), "ann", &key);
    let mut bob = connect(InProcess::new(svc.clone()), "bob", &key);

    ann.local_edit(addr("A1"), CellContent::Number(5.0)).unwrap();
    assert_eq!(ann.display().get_cell(addr("A1")).value(), Some(ComputedValue::Num(5.0)));
    assert_eq!(ann.pending_len(), 1);
    let before = ann.display_string();
    assert_eq!(ann.tick().unwrap(), 1);
    assert_eq!(ann.pending_len(), 0);
    assert_eq!(ann.display_string(), before);

    bob.local_edit(addr("B1"), CellContent::Number(7.0)).unwrap();
    ann.tick().unwrap();
    assert_eq!(ann.display().get_cell(addr("B1")).value(), Some(ComputedValue::Num(7.0)));

    assert!(matches!(ann.edit_input(addr("C1"), "=SUM(A1:"), Err(ClientError::MalformedFormula(_))));
    assert!(matches!(ann.local_edit(addr("C1"), CellContent::Number(f64::NAN)), Err(ClientError::InvalidContent(_))));
    assert!(matches!(ann.local_edit(addr("C1"), CellContent::text("a\nb")), Err(ClientError::InvalidContent(_))));
    assert_eq!(ann.pending_len(), 0);
}

#[test]
fn last_writer_in_server_order_wins() {
    let svc = service();
    let key = setup(&svc, "ann", &["bob"]);
    let mut ann = connect(InProcess::new(svc.clone()), "ann", &key);
    let mut bob = connect(InProcess::new(svc.clone()), "bob", &key);
    ann.local_edit(addr("A1"), CellContent::Number(1.0)).unwrap();
    bob.local_edit(addr("A1"), CellContent::Number(2.0)).unwrap();
    // before polling, each sees its own value
    assert_eq!(ann.display().get_cell(addr("A1")).value(), Some(ComputedValue::Num(1.0)));
    ann.tick().unwrap();
    bob.tick().unwrap();
    for c in [&ann, &bob] {
        assert_eq!(c.display().get_cell(addr("A1")).value(), Some(ComputedValue::Num(2.0)));
        assert_eq!(c.display_string(), server_string(&svc, &key));
    }
}

#[test]
fn offline_edits_wait_and_failed_ticks_change_nothing() {
    let svc = service();
    let key = setup(&svc, "ann", &["bob"]);
    let link = Switch::new(InProcess::new(svc.clone()));
    let mut ann = connect(link.clone(), "ann", &key);
    let mut bob = connect(InProcess::new(svc.clone()), "bob", &key);

    link.down.store(true, Ordering::SeqCst);
    ann.local_edit(addr("A1"), CellContent::Number(1.0)).unwrap();
    ann.local_edit(addr("A2"), CellContent::Number(2.0)).unwrap();
    bob.local_edit(addr("B1"), CellContent::Number(3.0)).unwrap();
    let shown = ann.display_string();
    assert!(ann.tick().is_err());
    assert_eq!(ann.display_string(), shown);
    assert_eq!(ann.pending_len(), 2);
    let delay = ann.next_delay_ms();
    assert!((100..200).contains(&delay), "{delay}");

    link.down.store(false, Ordering::SeqCst);
    ann.tick().unwrap();
    assert_eq!(ann.next_delay_ms(), 100);
    ann.tick().unwrap();
    bob.tick().unwrap();
    assert_eq!(ann.pending_len(), 0);
    assert_eq!(ann.display_string(), server_string(&svc, &key));
    assert_eq!(bob.display_string(), server_string(&svc, &key));
    assert_eq!(ann.applied_seqs(), [1, 2, 3]);
}

#[test]
fn a_lost_acknowledgement_is_not_resent() {
    let svc = service();
    let key = setup(&svc, "ann", &[]);
    let link = Switch::new(InProcess::new(svc.clone()));
    let mut ann = connect(link.clone(), "ann", &key);
    link.lose_responses.store(1, Ordering::SeqCst);
    ann.local_edit(addr("A1"), CellContent::Number(1.0)).unwrap();
    // the send landed but looked failed, so this one only queues
    ann.local_edit(addr("A2"), CellContent::Number(2.0)).unwrap();
    assert_eq!(svc.store().materialized(&key).unwrap().len(), 1);
    ann.tick().unwrap();
    ann.tick().unwrap();
    assert_eq!(ann.pending_len(), 0);
    assert_eq!(ann.applied_seqs(), [1, 2]);
    assert_eq!(ann.display_string(), server_string(&svc, &key));
}

#[test]
fn chat_and_presence_through_the_client() {
    let svc = service();
    let key = setup(&svc, "ann", &["bob"]);
    let ann = connect(InProcess::new(svc.clone()), "ann", &key);
    let bob = connect(InProcess::new(svc.clone()), "bob", &key);
    assert_eq!(ann.send_chat("hello").unwrap(), 1);
    let log = bob.poll_chat(0).unwrap();
    assert_eq!(log.messages[0].username, "ann");
    assert_eq!(bob.active_users().unwrap(), ["ann", "bob"]);
}

#[test]
fn works_over_http() {
    let svc = service();
    let key = setup(&svc, "ann", &["bob"]);
    let server = RunningServer::start(svc.clone(), None, SocketAddr::from(([127, 0, 0, 1], 0))).unwrap();
    let http = || Http::new(&server.addr.to_string(), Duration::from_secs(5));
    let mut ann = connect(http(), "ann", &key);
    let mut bob = connect(http(), "bob", &key);
    ann.edit_input(addr("A1"), "4").unwrap();
    ann.edit_input(addr("A2"), "=A1*A1").unwrap();
    bob.tick().unwrap();
    assert_eq!(bob.display().get_cell(addr("A2")).value(), Some(ComputedValue::Num(16.0)));

    let agent = ureq::Agent::config_builder().http_status_as_error(false).build().new_agent();
    let url = format!("http://{}", server.addr);
    let resp = agent.post(&format!("{url}/api")).send("not json").unwrap();
    assert_eq!(resp.status(), 400);
    let mut resp = agent.post(&format!("{url}/api")).send(r#"{"method":"nope"}"#).unwrap();
    assert_eq!(resp.status(), 200);
    let body: RpcResponse = resp.body_mut().read_json().unwrap();
    assert_eq!(body.into_result().unwrap_err().code, RpcErrorCode::UnknownMethod);
    let mut page = agent.get(&url).call().unwrap();
    assert!(page.body_mut().read_to_string().unwrap().contains("gridmesh"));
    assert_eq!(agent.get(&format!("{url}/missing.js")).call().unwrap().status(), 404);
}

#[derive(Debug, Clone)]
enum Step {
    Edit { client: usize, cell: u8, value: i8 },
    Tick { client: usize },
}

fn step(clients: usize) -> impl Strategy<Value = Step> {
    prop_oneof![
        (0..clients, 0u8..6, any::<i8>()).prop_map(|(client, cell, value)| Step::Edit { client, cell, value }),
        (0..clients).prop_map(|client| Step::Tick { client }),
    ]
}

/// Lossy until `calm` is set, then reliable.
struct Weather {
    reliable: InProcess,
    lossy: Lossy<InProcess>,
    calm: Arc<AtomicBool>,
}

impl Transport for Weather {
    fn call(&self, req: &RpcRequest) -> Result<RpcResponse, TransportError> {
        if self.calm.load(Ordering::SeqCst) {
            self.reliable.call(req)
        } else {
            self.lossy.call(req)
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Any interleaving of edits and ticks over lossy links converges once the
    /// links calm down, with every seq applied exactly once.
    #[test]
    fn random_schedules_converge(steps in prop::collection::vec(step(3), 1..80), seed in any::<u64>()) {
        let svc = service();
        let key = setup(&svc, "c0", &["c1", "c2"]);
        let calm = Arc::new(AtomicBool::new(true));
        let mut clients: Vec<_> = (0..3u64)
            .map(|i| {
                let link = Weather {
                    reliable: InProcess::new(svc.clone()),
                    lossy: Lossy::new(InProcess::new(svc.clone()), 0.3, seed ^ i),
                    calm: calm.clone(),
                };
                connect(link, &format!("c{i}"), &key)
            })
            .collect();
        calm.store(false, Ordering::SeqCst);
        for step in steps {
            match step {
                Step::Edit { client, cell, value } => {
                    let target = CellAddress::new(1 + u32::from(cell % 2), 1 + u32::from(cell / 2)).unwrap();
                    clients[client].local_edit(target, CellContent::Number(value.into())).unwrap();
                }
                Step::Tick { client } => {
                    let c = &mut clients[client];
                    let (shown, seq) = (c.display_string(), c.confirmed_seq());
                    match c.tick() {
                        Ok(_) => prop_assert!(c.confirmed_seq() >= seq),
                        Err(_) => {
                            prop_assert_eq!(c.display_string(), shown);
                            prop_assert_eq!(c.confirmed_seq(), seq);
                        }
                    }
                }
            }
        }
        calm.store(true, Ordering::SeqCst);
        for _ in 0..3 {
            for c in clients.iter_mut() {
                c.tick().unwrap();
            }
        }
        let server = server_string(&svc, &key);
        let last = svc.store().materialized(&key).map(|_| clients[0].confirmed_seq()).unwrap();
        for c in &clients {
            prop_assert_eq!(c.pending_len(), 0);
            prop_assert_eq!(c.display_string(), server.clone());
            prop_assert_eq!(c.applied_seqs().to_vec(), (1..=last).collect::<Vec<u64>>());
        }
    }
}
