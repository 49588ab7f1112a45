//! Regenerate the bundled toy model under `data/toy/` (noise-free counts at
//! the ground-truth weights, plus a bypass scenario).
//!
//! cargo run --example generate_toy_data [-- OUT_DIR]

use std::path::PathBuf;

use flowfit::io::export_model;
use flowfit::network::Link;
use flowfit::scenario::{NetworkEdit, Scenario};
use flowfit::synthetic::toy_model;

fn main() -> flowfit::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/toy"));
    let mut model = toy_model(0.0, 0)?;
    model.scenarios = vec![Scenario::new(
        "bypass",
        vec![
            NetworkEdit::AddLink(Link::new("n2-n5", "n2", "n5", 16.0, 20000.0)),
            NetworkEdit::AddLink(Link::new("n5-n2", "n5", "n2", 16.0, 20000.0)),
        ],
    )];
    let spec = export_model(&model, &dir)?;
    println!("wrote {}", spec.display());
    Ok(())
}
