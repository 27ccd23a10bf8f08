use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use scimap::pipeline::{
    cmd_build_networks, cmd_cluster, cmd_evaluate, cmd_prepare_topics, cmd_report, PipelineConfig,
};
use scimap::synth::{write_synthetic, SyntheticSpec};
use scimap::Error;

/// Similarity networks, CPM Leiden clustering and per-topic clustering
/// effectiveness for document corpora.
#[derive(Parser)]
#[command(name = "scimap", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the citation and text similarity networks.
    BuildNetworks {
        #[arg(long)]
        config: PathBuf,
    },
    /// Cluster both networks at every configured resolution.
    Cluster {
        #[arg(long)]
        config: PathBuf,
        /// Override the configured resolutions (repeatable).
        #[arg(long = "resolution")]
        resolutions: Vec<f64>,
        /// Override the clustering seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Prepare the topic set from annotations and the taxonomy.
    PrepareTopics {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compute effectiveness records and citation/text ratios.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        /// Override the configured coverages (repeatable).
        #[arg(long = "coverage")]
        coverages: Vec<f64>,
    },
    /// Aggregate records into the report bundle.
    Report {
        #[arg(long)]
        config: PathBuf,
    },
    /// Generate a synthetic corpus, taxonomy and ground-truth file.
    Synth {
        /// TOML file with the synthetic spec.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Override the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn print_warnings(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::BuildNetworks { config } => {
            let cfg = PipelineConfig::load(&config)?;
            let out = cmd_build_networks(&cfg)?;
            print_warnings(&out.warnings);
            let cache = |hit: bool| if hit { " (cached)" } else { "" };
            println!(
                "citation network: {}{}",
                out.citation.display(),
                cache(out.citation_cached)
            );
            println!(
                "text network: {}{}",
                out.text.display(),
                cache(out.text_cached)
            );
        }
        Command::Cluster {
            config,
            resolutions,
            seed,
        } => {
            let mut cfg = PipelineConfig::load(&config)?;
            if !resolutions.is_empty() {
                cfg.clustering.resolutions = resolutions;
            }
            if let Some(seed) = seed {
                cfg.clustering.seed = seed;
            }
            cfg.validate_settings()?;
            let out = cmd_cluster(&cfg)?;
            print_warnings(&out.warnings);
            println!(
                "network\tresolution\tclusters\tdocs\tmin\tmedian\tmax\t|S|\tS_min\tS_median\tS_max"
            );
            for run in &out.runs {
                match &run.stats {
                    Some(s) => println!(
                        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}{}",
                        run.network,
                        run.resolution,
                        s.clusters,
                        s.documents,
                        s.min_size,
                        s.median_size,
                        s.max_size,
                        s.half_cover_count,
                        s.half_cover_min,
                        s.half_cover_median,
                        s.half_cover_max,
                        if run.cached { "\t(cached)" } else { "" }
                    ),
                    None => println!(
                        "{}\t{}\tempty solution (all clusters below the minimum size)",
                        run.network, run.resolution
                    ),
                }
            }
        }
        Command::PrepareTopics { config } => {
            let cfg = PipelineConfig::load(&config)?;
            let out = cmd_prepare_topics(&cfg)?;
            print_warnings(&out.warnings);
            println!(
                "{} topics written to {}{}",
                out.topic_count,
                out.topics_path.display(),
                if out.cached { " (cached)" } else { "" }
            );
            if out.skipped_count > 0 {
                println!(
                    "{} annotations skipped (no tree position)",
                    out.skipped_count
                );
            }
            print!("{}", out.counts_table);
        }
        Command::Evaluate { config, coverages } => {
            let mut cfg = PipelineConfig::load(&config)?;
            if !coverages.is_empty() {
                cfg.evaluation.coverages = coverages;
            }
            cfg.validate_settings()?;
            let out = cmd_evaluate(&cfg)?;
            print_warnings(&out.warnings);
            println!(
                "{} records, {} ratios, {} skips{}",
                out.record_count,
                out.ratio_count,
                out.skip_count,
                if out.cached { " (cached)" } else { "" }
            );
            println!("records: {}", out.records_path.display());
            println!("ratios: {}", out.ratios_path.display());
        }
        Command::Report { config } => {
            let cfg = PipelineConfig::load(&config)?;
            let out = cmd_report(&cfg)?;
            print_warnings(&out.warnings);
            println!(
                "report bundle in {}{}",
                out.bundle.dir.display(),
                if out.cached { " (cached)" } else { "" }
            );
            for file in &out.bundle.files {
                println!("  {}", file.display());
            }
        }
        Command::Synth {
            spec,
            out_dir,
            seed,
        } => {
            let mut spec = SyntheticSpec::load(&spec)?;
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            let files = write_synthetic(&spec, &out_dir)?;
            println!("corpus: {}", files.corpus.display());
            println!("taxonomy: {}", files.taxonomy.display());
            println!("ground truth: {}", files.ground_truth.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::FAILURE
        }
    }
}
