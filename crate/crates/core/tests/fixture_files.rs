use std::path::Path;

use loccforge::fixtures;
use loccforge::io::{parse_measurement, serialize_measurement};
use loccforge::Tolerances;

fn dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures"))
}

#[test]
fn shipped_documents_match_builders() {
    for (name, m) in fixtures::documents() {
        let text = std::fs::read_to_string(dir().join(format!("{name}.json"))).unwrap();
        assert_eq!(text, serialize_measurement(&m), "{name} is stale; run the write_fixtures example");
        let back = parse_measurement(&text, &Tolerances::default()).unwrap();
        assert_eq!(back.num_ops(), m.num_ops(), "{name}");
    }
    let broken = std::fs::read_to_string(dir().join("broken.json")).unwrap();
    assert_eq!(broken, fixtures::broken_document());
    assert!(parse_measurement(&broken, &Tolerances::default()).is_err());
}
