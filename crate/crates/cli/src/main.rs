//! `owah`: generate datasets, train the goal proposal network, evaluate
//! helpers and replay episode records.

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};
use owah::baselines::HelperSpec;
use owah::bench::Split;
use owah::gpn::TrainConfig;
use owah::nopa::NopaConfig;
use owah_cli::{dataset_path, gpn_path, DATA_DIR_ENV};

#[derive(Parser)]
#[command(name = "owah", version, about = "Online household helping benchmark")]
struct Cli {
    /// Directory holding datasets, checkpoints and reports.
    #[arg(long, env = DATA_DIR_ENV, default_value = "data", global = true)]
    data_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate solo-planner episodes for one split, or all of them.
    GenData {
        #[arg(long, default_value = "all")]
        split: String,
        /// Episodes per split; defaults to the desk-scale size.
        #[arg(long)]
        count: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train the goal proposal network.
    TrainGpn {
        /// Training dataset; defaults to the large training split.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Held-out dataset to score; defaults to the test split when present.
        #[arg(long)]
        heldout: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a helper, e.g. `--helper nopa` or `--helper nopa,no_return`.
    Eval {
        #[arg(long)]
        helper: HelperSpec,
        #[arg(long, default_value = "test")]
        split: Split,
        #[arg(long, default_value_t = 3)]
        runs: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report path; the F1 curve CSV is written alongside.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write every episode record as JSONL into this directory.
        #[arg(long)]
        records: Option<PathBuf>,
        /// Override the particle plan horizon (default 15).
        #[arg(long)]
        t_prop: Option<usize>,
        /// Override the step estimate for goal-only subgoals (default 100).
        #[arg(long)]
        l_max: Option<u32>,
    },
    /// Replay an episode record and verify every state hash.
    Replay { record: PathBuf },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let dir = cli.data_dir;
    match cli.command {
        Command::GenData { split, count, seed } => {
            let splits = if split == "all" { Split::ALL.to_vec() } else { vec![split.parse()?] };
            for s in splits {
                let data = owah_cli::gen_data(&dir, s, count.unwrap_or(s.default_size()), seed)?;
                println!(
                    "{s}: {} episodes, {} skipped, {} steps -> {}",
                    data.episodes.len(),
                    data.skipped.len(),
                    data.total_steps(),
                    dataset_path(&dir, s).display()
                );
            }
        }
        Command::TrainGpn { dataset, heldout, epochs, seed, out } => {
            let dataset = dataset.unwrap_or_else(|| dataset_path(&dir, Split::TrainLarge));
            let heldout = heldout.or_else(|| Some(dataset_path(&dir, Split::Test)).filter(|p| p.exists()));
            let out = out.unwrap_or_else(|| gpn_path(&dir, Default::default()));
            let cfg = TrainConfig { epochs, seed, ..Default::default() };
            let s = owah_cli::train(&dataset, heldout.as_deref(), &cfg, &out)?;
            println!("{} examples, train loss {:.4} -> {:.4}", s.examples, s.initial_loss, s.final_loss);
            if let Some((before, after)) = s.heldout {
                println!("held-out loss {before:.4} -> {after:.4}");
            }
            println!("wrote {}", out.display());
        }
        Command::Eval { helper, split, runs, seed, out, records, t_prop, l_max } => {
            let mut nopa = NopaConfig::default();
            nopa.t_prop = t_prop.unwrap_or(nopa.t_prop);
            nopa.l_max = l_max.unwrap_or(nopa.l_max);
            let (report, recs) = owah_cli::eval(&dir, &helper, split, runs, seed, nopa)?;
            if let Some(rdir) = records {
                owah_cli::write_records(&recs, &rdir)?;
            }
            let out = out.unwrap_or_else(|| dir.join("reports").join(format!("{}_{split}.json", helper.to_string().replace(',', "+"))));
            owah_cli::write_report(&report, &out)?;
            println!(
                "{helper} on {split}: speedup {:.3} ± {:.3} (n={}), completed {}, wrote {}",
                report.speedup.mean,
                report.speedup.se,
                report.speedup.n,
                report.completed,
                out.display()
            );
        }
        Command::Replay { record } => {
            let (rec, last) = owah_cli::replay(&record)?;
            println!("{}: {} ticks replayed, final state {}", rec.header.episode, rec.len(), last.state_hash());
        }
    }
    Ok(())
}
