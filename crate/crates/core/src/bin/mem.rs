use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use eventmem::config::Config;
use eventmem::construction::{ingest_session, read_sessions_jsonl};
use eventmem::harness::{aggregate_stats, load_dataset, render_table, run_benchmark};
use eventmem::llm::{ChatProvider, Gateway, OpenAiChatProvider, ReplayProvider};
use eventmem::memory::{Embedder, HashEmbedder, HttpEmbedder, MemoryStore};
use eventmem::search::{run_search, SearchStats};
use eventmem::service::{self, AppState};

/// Event-graph memory for conversational agents.
///
/// The chat backend is a replay fixture when `MEM_LLM_REPLAY` (or
/// `--replay`) names one, otherwise the OpenAI-compatible endpoint at
/// `MEM_LLM_URL`. Embeddings come from `MEM_EMBED_URL` when set and from
/// the built-in hashing embedder otherwise.
#[derive(Parser)]
#[command(name = "mem", version)]
struct Cli {
    /// Replay fixture (JSON Lines of {"key", "response_text"}).
    #[arg(long, global = true, env = "MEM_LLM_REPLAY")]
    replay: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build or extend a store from utterance JSON Lines.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        store: PathBuf,
        /// Used when the store does not exist yet.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Answer one question against a store.
    Query {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        question: String,
        /// Print the full search result as JSON.
        #[arg(long)]
        trace: bool,
        /// Overrides the configuration saved in the store.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Score a QA dataset against a store.
    Bench {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// JSON report path; the text table goes to stdout.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Aggregate a search log (one stats object per line).
    Stats {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
    /// Write the store's graph snapshot.
    ExportGraph {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
}

fn provider(replay: Option<&Path>) -> Result<Arc<dyn ChatProvider>> {
    Ok(match replay {
        Some(path) => Arc::new(
            ReplayProvider::from_path(path).with_context(|| format!("loading replay fixture {}", path.display()))?,
        ),
        None => Arc::new(OpenAiChatProvider::from_env().context("no chat backend configured")?),
    })
}

fn embedder(config: &Config) -> Arc<dyn Embedder> {
    match HttpEmbedder::from_env(config.embedding_dim) {
        Some(http) => Arc::new(http),
        None => Arc::new(HashEmbedder::new(config.embedding_dim, config.embedding_seed)),
    }
}

fn load_store(path: &Path, config: Option<&Path>) -> Result<MemoryStore> {
    let mut store = MemoryStore::load(path).with_context(|| format!("loading store {}", path.display()))?;
    if let Some(c) = config {
        store.config = Config::load(c)?;
    }
    Ok(store)
}

/// Accepts bare stats objects or any object carrying a `stats` field.
fn read_stats_log(text: &str) -> Result<Vec<SearchStats>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut value: serde_json::Value =
            serde_json::from_str(line).with_context(|| format!("line {}", n + 1))?;
        if let Some(inner) = value.get_mut("stats") {
            value = inner.take();
        }
        out.push(serde_json::from_value(value).with_context(|| format!("line {}", n + 1))?);
    }
    Ok(out)
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("MEM_LOG").unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let replay = cli.replay.as_deref();

    match cli.command {
        Command::Ingest { input, store, config } => {
            let text = fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
            let sessions = read_sessions_jsonl(&text)?;
            let mut mem = if store.exists() {
                load_store(&store, None)?
            } else {
                MemoryStore::new(config.as_deref().map(Config::load).transpose()?.unwrap_or_default())
            };
            let provider = provider(replay)?;
            let embedder = embedder(&mem.config);
            let cfg = mem.config.clone();
            let gateway = Gateway::new(provider.as_ref(), &cfg);
            for batch in &sessions {
                let report = ingest_session(&mut mem, batch, &gateway, embedder.as_ref())?;
                println!(
                    "{}: {} inserted, {} merged, {} linked, {} relations{}",
                    report.session_id,
                    report.inserted.len(),
                    report.merged.len(),
                    report.linked.len(),
                    report.relations_added,
                    if report.reclustered { ", reclustered" } else { "" }
                );
            }
            mem.save(&store)?;
            println!(
                "{} events, {} relations, {} topics",
                mem.graph.len(),
                mem.graph.relation_count(),
                mem.topics.len()
            );
        }
        Command::Query {
            store,
            question,
            trace,
            config,
        } => {
            let mem = load_store(&store, config.as_deref())?;
            let provider = provider(replay)?;
            let embedder = embedder(&mem.config);
            let gateway = Gateway::new(provider.as_ref(), &mem.config);
            let result = run_search(&question, &mem, &gateway, embedder.as_ref(), &mem.config)?;
            if trace {
                println!("{}", serde_json::to_string_pretty(&result)?);
            } else {
                println!("{}", result.answer);
            }
        }
        Command::Bench {
            store,
            dataset,
            out,
            config,
        } => {
            let mem = load_store(&store, config.as_deref())?;
            let text = fs::read_to_string(&dataset).with_context(|| format!("reading {}", dataset.display()))?;
            let data = load_dataset(&text);
            if data.records.is_empty() {
                bail!("no usable questions in {}", dataset.display());
            }
            let provider = provider(replay)?;
            let embedder = embedder(&mem.config);
            let gateway = Gateway::new(provider.as_ref(), &mem.config);
            let report = run_benchmark(&data, &mem, &gateway, embedder.as_ref(), &mem.config);
            fs::write(&out, serde_json::to_vec_pretty(&report)?)?;
            print!("{}", report.render_text());
        }
        Command::Stats { input, json } => {
            let text = fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
            let agg = aggregate_stats(&read_stats_log(&text)?);
            if json {
                println!("{}", serde_json::to_string_pretty(&agg)?);
            } else {
                print!("{}", render_table(&agg));
            }
        }
        Command::Serve { store, addr } => {
            let mem = load_store(&store, None)?;
            // Blocking HTTP clients must be built outside the async runtime.
            let provider = provider(replay)?;
            let embedder = embedder(&mem.config);
            let state = Arc::new(AppState::new(mem, provider, embedder).persist_to(&store));
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind(&addr)
                    .await
                    .with_context(|| format!("binding {addr}"))?;
                eprintln!("listening on {}", listener.local_addr()?);
                service::serve(listener, state).await?;
                anyhow::Ok(())
            })?;
        }
        Command::ExportGraph { store, format, out } => {
            let mem = load_store(&store, None)?;
            let bytes = match format {
                Format::Json => mem.snapshot_bytes(),
            };
            match out {
                Some(path) => fs::write(path, bytes)?,
                None => {
                    use std::io::Write;
                    std::io::stdout().write_all(&bytes)?;
                }
            }
        }
    }
    Ok(())
}
