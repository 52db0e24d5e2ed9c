//! Drive the command-line front end from code with a TOML config.
//!
//! Same as `ddshaper --out <dir> response --config examples/configs/response.toml`.

use clap::Parser;
use ddshaper::cli::{run, Cli};

fn main() {
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/response.toml");
    let out = std::env::temp_dir().join("ddshaper-cli");
    let cli = Cli::parse_from(["ddshaper", "--out", out.to_str().unwrap(), "response", "--config", config]);
    match run(&cli) {
        Ok(dir) => {
            for entry in std::fs::read_dir(&dir).unwrap() {
                println!("{}", entry.unwrap().path().display());
            }
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            std::process::exit(e.code);
        }
    }
}
