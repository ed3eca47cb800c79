//! Regenerates the bundled mini-dataset:
//! `cargo run -p glitchscope-core --example make_mini_dataset -- crates/core/fixtures/mini`

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "fixtures/mini".into());
    let manifest = glitchscope_core::synthetic::write_mini_dataset(&dir)?;
    println!("wrote {} records to {dir}", manifest.len());
    Ok(())
}
