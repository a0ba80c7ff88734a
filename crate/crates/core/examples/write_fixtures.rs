//! Regenerates the documents in `fixtures/`.

use std::path::Path;

use loccforge::fixtures;
use loccforge::io::serialize_measurement;

fn main() -> std::io::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    std::fs::create_dir_all(&dir)?;
    for (name, m) in fixtures::documents() {
        std::fs::write(dir.join(format!("{name}.json")), serialize_measurement(&m))?;
    }
    std::fs::write(dir.join("broken.json"), fixtures::broken_document())?;
    Ok(())
}
