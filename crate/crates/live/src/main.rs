//! `owah-live`: serve human-controlled sessions over the episodes in a data
//! directory.

use std::fs;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::Parser;
use owah::baselines::HelperResources;
use owah::bench::{Dataset, Split};
use owah::gpn::GpnParams;
use owah_live::{serve, LiveService};

#[derive(Parser)]
#[command(name = "owah-live", version, about = "Human-in-the-loop session server")]
struct Cli {
    /// Directory holding datasets and checkpoints.
    #[arg(long, env = "OWAH_DATA_DIR", default_value = "data")]
    data_dir: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8787")]
    addr: SocketAddr,
}

fn load_gpn(path: PathBuf) -> Result<Option<Arc<GpnParams>>> {
    if !path.exists() {
        return Ok(None);
    }
    let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Some(Arc::new(GpnParams::from_bytes(&bytes, None).with_context(|| format!("loading {}", path.display()))?)))
}

#[tokio::main]
async fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let mut datasets = Vec::new();
    for split in Split::ALL {
        let path = cli.data_dir.join(format!("{split}.json"));
        if path.exists() {
            let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            datasets.push(Dataset::from_json(&text).with_context(|| format!("parsing {}", path.display()))?);
        }
    }
    if datasets.is_empty() {
        bail!("no datasets in {}; run `owah gen-data` first", cli.data_dir.display());
    }
    let resources = HelperResources {
        gpn_large: load_gpn(cli.data_dir.join("gpn_large.bin"))?,
        gpn_small: load_gpn(cli.data_dir.join("gpn_small.bin"))?,
        ..Default::default()
    };
    let service = Arc::new(LiveService::new(datasets, resources));
    log::info!("{} episodes available", service.episode_ids().count());
    serve(service, cli.addr).await?;
    Ok(())
}
