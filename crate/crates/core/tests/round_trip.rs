use gridmesh_core::{parse_command, parse_save_string, serialize_command, serialize_sheet, Sheet, SheetName};
use gridmesh_testkit::gen::{random_command, random_sheet};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;

#[test]
fn thousand_random_sheets_round_trip() {
    let mut rng = StdRng::seed_from_u64(1);
    for _ in 0..1_000 {
        let sheet = random_sheet(&mut rng, 8, 12, 40);
        let text = serialize_sheet(&sheet);
        let back = parse_save_string(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
        assert_eq!(back, sheet, "{text}");
        assert_eq!(serialize_sheet(&back), text);
    }
}

#[test]
fn serialization_ignores_insertion_order() {
    let mut rng = StdRng::seed_from_u64(2);
    for _ in 0..200 {
        let sheet = random_sheet(&mut rng, 6, 6, 30);
        let mut cells: Vec<_> = sheet.cells().map(|(a, c)| (a, c.clone())).collect();
        cells.shuffle(&mut rng);
        let mut rebuilt = Sheet::new(SheetName::new(sheet.name().as_str()).unwrap());
        for (a, c) in cells {
            rebuilt.set_cell(a, c).unwrap();
        }
        gridmesh_core::formula::recalculate_sheet(&mut rebuilt);
        assert_eq!(serialize_sheet(&rebuilt), serialize_sheet(&sheet));
    }
}

#[test]
fn command_text_is_canonicalised() {
    for (input, canonical) in [
        ("set a1 value n 5.0", "set A1 value n 5"),
        ("set b2 value n -0", "set B2 value n 0"),
        ("set AA10 value n 1e3", "set AA10 value n 1000"),
        ("set c3 formula sum(a1:a2)", "set C3 formula sum(a1:a2)"),
        ("set d4 text t  two  spaces", "set D4 text t  two  spaces"),
        ("set e5 empty", "set E5 empty"),
    ] {
        assert_eq!(serialize_command(&parse_command(input).unwrap()), canonical);
    }
}

proptest! {
    #[test]
    fn commands_round_trip(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let cmd = random_command(&mut rng, 30, 30);
        let text = serialize_command(&cmd);
        prop_assert_eq!(parse_command(&text).unwrap(), cmd);
        prop_assert_eq!(serialize_command(&parse_command(&text).unwrap()), text);
    }

    #[test]
    fn command_parser_never_panics(text in "\\PC{0,40}") {
        let _ = parse_command(&text);
    }
}
