use std::collections::BTreeMap;

use gridmesh_core::command::apply_command;
use gridmesh_core::{replay_log, serialize_sheet, CellContent, Command, Sheet, SheetName};
use gridmesh_testkit::gen::{random_address, random_content, random_log};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;

fn name() -> SheetName {
    SheetName::new("log").unwrap()
}

/// Stored content with cached values stripped, for comparing intent.
fn source(c: &CellContent) -> String {
    match c {
        CellContent::Formula(f) => format!("={}", f.source()),
        // the sheet stores -0 as 0
        CellContent::Number(n) => format!("{:?}", n + 0.0),
        other => format!("{other:?}"),
    }
}

#[test]
fn replay_twice_is_byte_identical() {
    let mut rng = StdRng::seed_from_u64(9);
    for _ in 0..100 {
        let log = random_log(&mut rng, 1_000, 10, 10);
        let a = serialize_sheet(&replay_log(name(), &log));
        let b = serialize_sheet(&replay_log(name(), &log));
        assert_eq!(a, b);
    }
}

#[test]
fn per_command_and_batched_replay_agree() {
    let mut rng = StdRng::seed_from_u64(10);
    for _ in 0..50 {
        let log = random_log(&mut rng, 200, 6, 6);
        let mut stepwise = Sheet::new(name());
        for cmd in &log {
            apply_command(&mut stepwise, cmd);
        }
        assert_eq!(stepwise, replay_log(name(), &log));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn last_writer_wins(seed in any::<u64>(), len in 0usize..300) {
        let mut rng = StdRng::seed_from_u64(seed);
        let log = random_log(&mut rng, len, 5, 5);
        let sheet = replay_log(name(), &log);
        let mut last = BTreeMap::new();
        for cmd in &log {
            last.insert(cmd.target(), cmd.content());
        }
        for (addr, content) in &last {
            prop_assert_eq!(source(sheet.get_cell(*addr)), source(content));
        }
        prop_assert_eq!(sheet.len(), last.values().filter(|c| !c.is_empty()).count());
    }

    #[test]
    fn disjoint_logs_commute(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut by_target = BTreeMap::new();
        for _ in 0..40 {
            let addr = random_address(&mut rng, 8, 8);
            by_target.insert(addr, Command::set(addr, random_content(&mut rng, 8, 8)));
        }
        let mut log: Vec<Command> = by_target.into_values().collect();
        let reference = serialize_sheet(&replay_log(name(), &log));
        for _ in 0..5 {
            log.shuffle(&mut rng);
            prop_assert_eq!(serialize_sheet(&replay_log(name(), &log)), reference.clone());
        }
    }
}
