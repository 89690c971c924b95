//! Writes the synthetic half-hourly market panel used in the docs:
//! `cargo run -p mfiv --example market_fixture -- out.csv [T] [seed]`.

use std::path::PathBuf;

use mfiv::io::{synthetic_market_dataset, write_dataset_csv, CsvSchema};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = PathBuf::from(args.next().ok_or("usage: market_fixture <out.csv> [T] [seed]")?);
    let t: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(730);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1);
    let data = synthetic_market_dataset(t, seed)?;
    write_dataset_csv(&path, &data, &CsvSchema::default())?;
    println!("wrote {} days to {}", t, path.display());
    Ok(())
}
