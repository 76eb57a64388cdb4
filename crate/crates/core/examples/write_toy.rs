//! Writes the two-blob toy problem as a config directory.
//!
//! `cargo run --example write_toy -- DIR [SEED]`

use std::path::PathBuf;

use folkm::toy::{two_blobs, ToyConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "toy".into()));
    let seed = args.next().map(|s| s.parse().expect("seed must be an integer")).unwrap_or(ToyConfig::default().seed);
    let problem = two_blobs(&ToyConfig { seed, ..ToyConfig::default() });
    match problem.save(&dir) {
        Ok(path) => println!("wrote {}", path.display()),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
