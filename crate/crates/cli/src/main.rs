use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use impetus_core::features::{default_extractors, extract_features, write_features, FeatureSpec};
use impetus_core::slide::{partition_patches, read_slide_store, tissue_mask};
use impetus_service::cohort::{desk_cohort, slide_dirs_in, write_cohort};
use impetus_service::http::{serve, SessionManager};
use impetus_service::scripted::{default_annotators, simulate};
use impetus_service::SessionConfig;

#[derive(Parser)]
#[command(name = "impetus", version, about = "Mixed-initiative slide triage")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract per-patch features from a slide store into a feature file.
    Features {
        slide_dir: PathBuf,
        #[arg(long, default_value = "color-stat")]
        extractor: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the REST API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Sessions are persisted here and restored on start.
        #[arg(long)]
        session_dir: PathBuf,
    },
    /// Run a scripted annotator over slide stores that carry ground truth.
    Simulate {
        /// Directory holding one slide store per subdirectory.
        #[arg(long)]
        slides: PathBuf,
        #[arg(long, default_value = "diligent")]
        policy: String,
        #[arg(long, default_value_t = 5)]
        iters: u32,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write the standard 16-slide synthetic cohort.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Features { slide_dir, extractor, out } => {
            let slide = read_slide_store(&slide_dir).with_context(|| format!("reading {}", slide_dir.display()))?;
            let mut grid = partition_patches(&slide)?;
            tissue_mask(&slide, &mut grid);
            let registry = default_extractors();
            let spec = FeatureSpec {
                dimension: registry.get(&extractor)?.dimension(),
                extractor_name: extractor,
            };
            let m = extract_features(&slide, &grid, &spec, &registry)?;
            write_features(&m, &out)?;
            println!("{} patches × {} features → {}", m.n_patches(), m.dimension(), out.display());
        }
        Command::Serve { port, host, session_dir } => {
            let addr: SocketAddr = format!("{host}:{port}").parse().context("bad listen address")?;
            let manager = Arc::new(SessionManager::load_existing(session_dir)?);
            tokio::runtime::Runtime::new()?.block_on(serve(manager, addr))?;
        }
        Command::Simulate { slides, policy, iters, out, seed } => {
            let dirs = slide_dirs_in(&slides)?;
            if dirs.is_empty() {
                bail!("no slide stores under {}", slides.display());
            }
            let policy = default_annotators().get(&policy)?;
            let config = SessionConfig {
                master_seed: seed,
                ..Default::default()
            }
            .apply_env()?;
            let (report, _) = simulate(&dirs, policy.as_ref(), iters, config)?;
            let csv = report.write(&out)?;
            for r in &report.iterations {
                let auc = r.auc.map_or("n/a".to_string(), |a| format!("{a:.4}"));
                println!(
                    "iteration {}: auc {auc}, pools +{} −{} (discarded {}), confidence high {} mid {} low {}",
                    r.iteration, r.pools.positive, r.pools.negative, r.pools.discarded, r.confidence.high, r.confidence.mid, r.confidence.low
                );
            }
            println!("report: {} and {}", out.display(), csv.display());
        }
        Command::Synth { out, seed } => {
            let dirs = write_cohort(&desk_cohort(), &out, seed)?;
            println!("wrote {} slides under {}", dirs.len(), out.display());
        }
    }
    Ok(())
}
