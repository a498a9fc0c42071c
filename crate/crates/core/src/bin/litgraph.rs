use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use litgraph::eval::ScorerKind;
use litgraph::pipeline::{plan, run_pipeline, Artifacts, EmbedderKind, PipelineConfig, Services, Stage};
use litgraph::Method;

/// Literature-graph construction and benchmark toolkit.
#[derive(Parser)]
#[command(name = "litgraph", version)]
struct Cli {
    /// JSON configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads / requests in flight.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Print the stage plan and exit.
    #[arg(long, global = true)]
    dry_run: bool,
    /// Directory for artifacts not given explicitly.
    #[arg(long, global = true)]
    work_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Endpoints {
    #[arg(long)]
    llm_url: Option<String>,
    #[arg(long)]
    llm_model: Option<String>,
    /// `http` or `hashing`.
    #[arg(long)]
    embedder: Option<EmbedderKind>,
    #[arg(long)]
    embed_url: Option<String>,
    #[arg(long)]
    embed_model: Option<String>,
    /// Precomputed embeddings file.
    #[arg(long)]
    embeddings: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Stream a metadata snapshot into corpus.jsonl + corpus.idx.
    Ingest {
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// Generate three-level concepts for every corpus paper.
    Concepts {
        #[command(flatten)]
        endpoints: Endpoints,
    },
    /// Embed concept levels and title+abstract text.
    Embed {
        #[command(flatten)]
        endpoints: Endpoints,
    },
    /// Select the top-k papers for a query.
    Retrieve {
        #[arg(long)]
        query: Option<String>,
        #[arg(long)]
        k: Option<usize>,
        /// `concept` or `baseline`.
        #[arg(long)]
        method: Option<Method>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        endpoints: Endpoints,
    },
    /// Similarity histogram for a query as CSV.
    Histogram {
        #[arg(long)]
        query: Option<String>,
        #[arg(long)]
        bins: Option<usize>,
        #[arg(long)]
        method: Option<Method>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        endpoints: Endpoints,
    },
    /// Process LaTeX sources of the selected papers.
    Process {
        #[arg(long)]
        src_dir: Option<PathBuf>,
        #[arg(long)]
        subset: Option<PathBuf>,
        /// Extra blocklist JSON merged into the default one.
        #[arg(long)]
        blocklist: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Assemble the citation subgraph.
    BuildGraph {
        #[arg(long)]
        subset: Option<PathBuf>,
        #[arg(long)]
        processed: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Most-cited papers of the graph.
    Influential {
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Hold-out split and train/bench task datasets.
    GenDatasets {
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        holdout: Option<f64>,
        #[arg(long)]
        completion_fraction: Option<f64>,
        /// Also emit related-work prompts without cited titles.
        #[arg(long)]
        plain_related_work: bool,
        #[arg(long)]
        templates: Option<PathBuf>,
        /// Directory for train.jsonl and bench.jsonl.
        #[arg(long = "out-dir")]
        data_dir: Option<PathBuf>,
    },
    /// Score a model endpoint on a bench file.
    Evaluate {
        #[arg(long)]
        bench: Option<PathBuf>,
        /// `token-overlap` or `embedding-greedy`.
        #[arg(long)]
        scorer: Option<ScorerKind>,
        #[arg(long)]
        model_url: Option<String>,
        #[arg(long)]
        model_name: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        endpoints: Endpoints,
    },
    /// Node, edge and token counts of a graph.
    Stats {
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Several stages in order, from configuration.
    Run {
        /// Comma-separated stages; defaults to the full pipeline.
        #[arg(long, value_delimiter = ',')]
        stages: Vec<Stage>,
    },
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

impl Endpoints {
    fn apply(self, cfg: &mut PipelineConfig) {
        set_opt(&mut cfg.llm_url, self.llm_url);
        set(&mut cfg.llm_model, self.llm_model);
        set(&mut cfg.embedder, self.embedder);
        set_opt(&mut cfg.embed_url, self.embed_url);
        set(&mut cfg.embed_model, self.embed_model);
        set_opt(&mut cfg.embeddings, self.embeddings);
    }
}

/// Folds command flags into the configuration and artifact paths.
fn resolve(cli: Cli) -> Result<(PipelineConfig, Artifacts, Vec<Stage>, bool)> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    set_opt(&mut cfg.seed, cli.seed);
    set(&mut cfg.jobs, cli.jobs);
    set(&mut cfg.out_dir, cli.work_dir);
    let mut art = Artifacts::under(&cfg.out_dir);

    let stages = match cli.command {
        Command::Ingest { snapshot } => {
            set_opt(&mut cfg.snapshot, snapshot);
            vec![Stage::Ingest]
        }
        Command::Concepts { endpoints } => {
            endpoints.apply(&mut cfg);
            vec![Stage::Concepts]
        }
        Command::Embed { endpoints } => {
            endpoints.apply(&mut cfg);
            vec![Stage::Embed]
        }
        Command::Retrieve {
            query,
            k,
            method,
            out,
            endpoints,
        } => {
            set_opt(&mut cfg.query, query);
            set(&mut cfg.k, k);
            set(&mut cfg.method, method);
            set(&mut art.subset, out);
            endpoints.apply(&mut cfg);
            vec![Stage::Retrieve]
        }
        Command::Histogram {
            query,
            bins,
            method,
            out,
            endpoints,
        } => {
            set_opt(&mut cfg.query, query);
            set(&mut cfg.bins, bins);
            set(&mut cfg.method, method);
            set(&mut art.histogram, out);
            endpoints.apply(&mut cfg);
            vec![Stage::Histogram]
        }
        Command::Process {
            src_dir,
            subset,
            blocklist,
            out,
        } => {
            set_opt(&mut cfg.source_dir, src_dir);
            set_opt(&mut cfg.blocklist, blocklist);
            set(&mut art.subset, subset);
            set(&mut art.processed, out);
            vec![Stage::Process]
        }
        Command::BuildGraph { subset, processed, out } => {
            set(&mut art.subset, subset);
            set(&mut art.processed, processed);
            set(&mut art.graph, out);
            vec![Stage::BuildGraph]
        }
        Command::Influential { graph, n, out } => {
            set(&mut art.graph, graph);
            set(&mut cfg.influential_n, n);
            set(&mut art.influential, out);
            vec![Stage::Influential]
        }
        Command::GenDatasets {
            graph,
            holdout,
            completion_fraction,
            plain_related_work,
            templates,
            data_dir,
        } => {
            set(&mut art.graph, graph);
            set(&mut cfg.holdout, holdout);
            set(&mut cfg.completion_fraction, completion_fraction);
            cfg.plain_related_work |= plain_related_work;
            set_opt(&mut cfg.templates, templates);
            if let Some(dir) = data_dir {
                art.bench = dir.join(litgraph::taskgen::BENCH_FILE);
                art.data_dir = dir;
            }
            vec![Stage::GenDatasets]
        }
        Command::Evaluate {
            bench,
            scorer,
            model_url,
            model_name,
            out,
            endpoints,
        } => {
            set(&mut art.bench, bench);
            set(&mut cfg.scorer, scorer);
            set_opt(&mut cfg.model_url, model_url);
            set(&mut cfg.model_name, model_name);
            set(&mut art.report, out);
            endpoints.apply(&mut cfg);
            vec![Stage::Evaluate]
        }
        Command::Stats { graph, out } => {
            set(&mut art.graph, graph);
            set(&mut art.stats, out);
            vec![Stage::Stats]
        }
        Command::Run { stages } => {
            if stages.is_empty() {
                Stage::DEFAULT_RUN.to_vec()
            } else {
                stages
            }
        }
    };
    Ok((cfg, art, stages, cli.dry_run))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<()> {
    let (cfg, art, stages, dry_run) = resolve(Cli::parse())?;
    cfg.validate(&stages).context("configuration rejected")?;
    if dry_run {
        print!("{}", plan(&cfg, &art, &stages));
        return Ok(());
    }
    let services = Services::from_config(&cfg);
    for line in run_pipeline(&cfg, &art, &stages, &services)? {
        println!("{line}");
    }
    Ok(())
}
