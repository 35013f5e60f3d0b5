//! Dumps the large-scale gains and a window of per-round channel
//! realizations to CSV for external analysis.
//!
//! ```bash
//! cargo run --release --example dump_channels -- out/channels
//! ```

use std::fmt::Write as _;
use std::path::PathBuf;

use otafl::channel::{large_scale_gains, place_nodes, sample_channel, PathLossParams};

fn main() -> otafl::error::Result<()> {
    let out: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("out/channels"));
    std::fs::create_dir_all(&out).map_err(|source| otafl::error::Error::Io {
        path: out.display().to_string(),
        source,
    })?;

    let seed = 7;
    let rounds = 20u64;
    let topology = place_nodes(seed, 500.0, 3, 6, 4)?;
    let gains = large_scale_gains(&topology, &PathLossParams::default())?;

    let mut beta_csv = String::from("ue,ap,beta\n");
    for k in 0..topology.n_ues() {
        for l in 0..topology.n_aps() {
            let _ = writeln!(beta_csv, "{k},{l},{}", gains.beta(k, l));
        }
    }
    let beta_path = out.join("beta.csv");
    std::fs::write(&beta_path, beta_csv).map_err(|source| otafl::error::Error::Io {
        path: beta_path.display().to_string(),
        source,
    })?;

    let mut ch_csv = String::from("round,ue,ap,antenna,re,im\n");
    for t in 1..=rounds {
        let ch = sample_channel(&topology, &gains, seed, t)?;
        for k in 0..topology.n_ues() {
            for l in 0..topology.n_aps() {
                for (a, z) in ch.h[k][l].iter().enumerate() {
                    let _ = writeln!(ch_csv, "{t},{k},{l},{a},{},{}", z.re, z.im);
                }
            }
        }
    }
    let ch_path = out.join("channels.csv");
    std::fs::write(&ch_path, ch_csv).map_err(|source| otafl::error::Error::Io {
        path: ch_path.display().to_string(),
        source,
    })?;

    println!("wrote {}", beta_path.display());
    println!("wrote {} ({} rounds)", ch_path.display(), rounds);
    Ok(())
}
