pub mod config;
pub mod generate;

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use reposcope::chains::CallChain;
use reposcope::eval::{run_benchmark, Variant};
use reposcope::graph::Rssg;
use reposcope::index::Index;
use reposcope::pipeline::{build_context, predict_chains, run_pipeline};
use reposcope::prompt::ByteApprox;
use reposcope::retrieval::ContextView;
use serde::Serialize;

use config::{Config, Overrides};
use generate::{generate, GenerateError};

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CORPUS: i32 = 2;
pub const EXIT_NETWORK: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "reposcope",
    version,
    about = "Call-chain-aware context retrieval and prompting for repository-level code generation"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Repository root.
    #[arg(long, global = true, default_value = ".")]
    pub root: PathBuf,
    /// Index file [default: <root>/.reposcope/index.json].
    #[arg(long, global = true)]
    pub index: Option<PathBuf>,
    /// Config file [default: <root>/reposcope.toml].
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Glob of files to skip; repeatable.
    #[arg(long = "exclude", global = true)]
    pub exclude: Vec<String>,
    #[arg(long, global = true)]
    pub window: Option<usize>,
    #[arg(long, global = true)]
    pub stride: Option<usize>,
    /// `hashed` or `remote`.
    #[arg(long, global = true)]
    pub embedding: Option<String>,
    #[arg(long, global = true)]
    pub clusters: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub alpha1: Option<f64>,
    #[arg(long, global = true)]
    pub alpha2: Option<f64>,
    #[arg(long, global = true)]
    pub alpha3: Option<f64>,
    #[arg(long, global = true)]
    pub l_max: Option<usize>,
    #[arg(long, global = true)]
    pub tau: Option<usize>,
    #[arg(long, global = true)]
    pub k_chain: Option<usize>,
    #[arg(long, global = true)]
    pub k_caller: Option<usize>,
    #[arg(long, global = true)]
    pub k_sim_function: Option<usize>,
    #[arg(long, global = true)]
    pub k_sim_fragment: Option<usize>,
    /// Prompt token budget.
    #[arg(long, global = true)]
    pub ell: Option<usize>,
    /// Stage-2 order, e.g. `chains,callers,simfn,simfrag`.
    #[arg(long, global = true)]
    pub priority: Option<String>,
    #[arg(long, global = true)]
    pub llm_url: Option<String>,
    #[arg(long, global = true)]
    pub llm_model: Option<String>,
    #[arg(long, global = true)]
    pub temperature: Option<f64>,
    #[arg(long, global = true)]
    pub retries: Option<u32>,
}

impl GlobalArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            exclude: (!self.exclude.is_empty()).then(|| self.exclude.clone()),
            window: self.window,
            stride: self.stride,
            embedding: self.embedding.clone(),
            clusters: self.clusters,
            seed: self.seed,
            alpha1: self.alpha1,
            alpha2: self.alpha2,
            alpha3: self.alpha3,
            l_max: self.l_max,
            tau: self.tau,
            k_chain: self.k_chain,
            k_caller: self.k_caller,
            k_sim_function: self.k_sim_function,
            k_sim_fragment: self.k_sim_fragment,
            ell: self.ell,
            priority: self.priority.clone(),
            llm_url: self.llm_url.clone(),
            llm_model: self.llm_model.clone(),
            temperature: self.temperature,
            retries: self.retries,
            ..Overrides::default()
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse the repository, build the graph, embed, cluster and save the index.
    Index,
    /// Predict call chains for a target (`<file>:<qualified_name>`).
    PredictChains {
        target: String,
        #[arg(long)]
        json: bool,
    },
    /// Show the four retrieved context views for a target.
    Retrieve {
        target: String,
        #[arg(long)]
        json: bool,
    },
    /// Compose the budgeted prompt for a target.
    Prompt {
        target: String,
        /// Write the prompt here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the budget plan as JSON.
        #[arg(long)]
        emit_plan: Option<PathBuf>,
    },
    /// Send a prompt to the chat endpoint.
    Generate {
        /// Prompt file; `-` or absent reads stdin.
        #[arg(long)]
        prompt_file: Option<PathBuf>,
        /// Print the prompt and skip the request.
        #[arg(long)]
        dry_run: bool,
    },
    /// Chains, views, plan and prompt for a target, optionally generating.
    Pipeline {
        target: String,
        /// Directory for prompt.txt, plan.json, chains.json, context.json.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Send the prompt to the chat endpoint.
        #[arg(long)]
        generate: bool,
        /// With --generate: print the prompt, skip the request.
        #[arg(long)]
        dry_run: bool,
    },
    /// Callee-F1 ablation over a corpus of repositories.
    Eval {
        /// Directory whose subdirectories are repositories.
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "full,no-wes,no-dfs,no-cce")]
        variants: String,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

/// An error with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: anyhow::Error,
}

impl Failure {
    fn usage(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: EXIT_USAGE,
            error: error.into(),
        }
    }

    fn corpus(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: EXIT_CORPUS,
            error: error.into(),
        }
    }
}

impl From<reposcope::Error> for Failure {
    fn from(e: reposcope::Error) -> Self {
        let code = match e {
            reposcope::Error::InvalidArgument(_) | reposcope::Error::Pattern { .. } => EXIT_USAGE,
            reposcope::Error::Embedding(_) => EXIT_NETWORK,
            _ => EXIT_CORPUS,
        };
        Self { code, error: e.into() }
    }
}

impl From<GenerateError> for Failure {
    fn from(e: GenerateError) -> Self {
        let code = match e {
            GenerateError::MissingUrl => EXIT_USAGE,
            GenerateError::Http(_) | GenerateError::BadResponse(_) => EXIT_NETWORK,
        };
        Self { code, error: e.into() }
    }
}

type Outcome = Result<(), Failure>;

pub fn default_index_path(root: &Path) -> PathBuf {
    root.join(".reposcope").join("index.json")
}

/// Runs a parsed command with environment layer `env`, writing to `out`.
pub fn run(cli: Cli, env: Overrides, out: &mut dyn Write) -> Outcome {
    let g = &cli.global;
    let cfg = Config::load(g.root.clone(), g.config.as_deref(), env, g.overrides()).map_err(Failure::usage)?;
    let index_path = g.index.clone().unwrap_or_else(|| default_index_path(&cfg.root));
    match cli.command {
        Command::Index => cmd_index(&cfg, &index_path, out),
        Command::PredictChains { target, json } => {
            let index = load_index(&index_path)?;
            let (graph, _, chains) = predict_chains(&index, &target, &cfg.pipeline.chain)?;
            if json {
                write_json(out, &chain_listing(&graph, &chains))
            } else {
                for line in chain_lines(&graph, &chains) {
                    emit(out, &line)?;
                }
                Ok(())
            }
        }
        Command::Retrieve { target, json } => {
            let index = load_index(&index_path)?;
            let provider = cfg.embedding.provider();
            let (_, context) = build_context(&index, &target, provider.as_ref(), &cfg.pipeline, &ByteApprox)?;
            if json {
                return write_json(out, &context);
            }
            for view in ContextView::ALL {
                emit(out, &format!("[{view}]"))?;
                for unit in context.view(view) {
                    emit(
                        out,
                        &format!("  {:>2}. {} ({} tokens)", unit.rank + 1, unit.label, unit.token_len),
                    )?;
                }
            }
            Ok(())
        }
        Command::Prompt {
            target,
            out: file,
            emit_plan,
        } => {
            let index = load_index(&index_path)?;
            let provider = cfg.embedding.provider();
            let result = run_pipeline(&index, &target, provider.as_ref(), &cfg.pipeline, &ByteApprox)?;
            if let Some(path) = emit_plan {
                write_file(&path, &json_bytes(&result.plan)?)?;
            }
            match file {
                Some(path) => write_file(&path, result.prompt.as_bytes()),
                None => emit_raw(out, &result.prompt),
            }
        }
        Command::Generate { prompt_file, dry_run } => {
            let prompt = read_prompt(prompt_file.as_deref())?;
            if dry_run {
                return emit_raw(out, &prompt);
            }
            let completion = generate(&prompt, &cfg.generation)?;
            emit_raw(out, &completion)
        }
        Command::Pipeline {
            target,
            out: dir,
            generate: wants_generation,
            dry_run,
        } => {
            let index = load_index(&index_path)?;
            let provider = cfg.embedding.provider();
            let result = run_pipeline(&index, &target, provider.as_ref(), &cfg.pipeline, &ByteApprox)?;
            if let Some(dir) = &dir {
                fs::create_dir_all(dir).map_err(|e| Failure::corpus(anyhow::anyhow!("{}: {e}", dir.display())))?;
                write_file(&dir.join("prompt.txt"), result.prompt.as_bytes())?;
                write_file(&dir.join("plan.json"), &json_bytes(&result.plan)?)?;
                write_file(
                    &dir.join("chains.json"),
                    &json_bytes(&chain_listing(&index.graph, &result.chains))?,
                )?;
                write_file(&dir.join("context.json"), &json_bytes(&result.context)?)?;
            }
            if !wants_generation || dry_run {
                return emit_raw(out, &result.prompt);
            }
            let completion = generate(&result.prompt, &cfg.generation)?;
            if let Some(dir) = &dir {
                write_file(&dir.join("generation.txt"), completion.as_bytes())?;
            }
            emit_raw(out, &completion)
        }
        Command::Eval {
            corpus,
            variants,
            report,
        } => cmd_eval(&cfg, &corpus, &variants, report.as_deref(), out),
    }
}

fn cmd_index(cfg: &Config, index_path: &Path, out: &mut dyn Write) -> Outcome {
    let provider = cfg.embedding.provider();
    let (index, _) = Index::build(&cfg.root, &cfg.index, provider.as_ref())?;
    index.persist(index_path)?;
    let s = index.summary();
    emit(
        out,
        &format!(
            "indexed {}: {} files, {} entities, {} triples, {} fragments, {} clusters",
            cfg.root.display(),
            s.files,
            s.entities,
            s.triples,
            s.fragments,
            s.clusters
        ),
    )?;
    for d in &index.diagnostics {
        eprintln!("warning: {d}");
    }
    emit(out, &format!("wrote {}", index_path.display()))
}

fn cmd_eval(cfg: &Config, corpus: &Path, variants: &str, report: Option<&Path>, out: &mut dyn Write) -> Outcome {
    let variants: Vec<Variant> = variants
        .split(',')
        .map(|v| v.trim().parse::<Variant>())
        .collect::<Result<_, _>>()
        .map_err(Failure::from)?;
    let entries = fs::read_dir(corpus).map_err(|e| Failure::corpus(anyhow::anyhow!("{}: {e}", corpus.display())))?;
    let mut repos: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    repos.sort();
    let provider = cfg.embedding.provider();
    let mut indexed = Vec::with_capacity(repos.len());
    for repo in &repos {
        let name = repo
            .file_name()
            .map_or_else(String::new, |n| n.to_string_lossy().into_owned());
        let (index, _) = Index::build(repo, &cfg.index, provider.as_ref())?;
        indexed.push((name, index));
    }
    let reports = run_benchmark(&indexed, &variants, &cfg.pipeline.chain)?;
    emit(
        out,
        &format!(
            "{} repositories, {} targets",
            indexed.len(),
            reports.first().map_or(0, |r| r.targets.len())
        ),
    )?;
    emit(
        out,
        "variant   k_chain  matched  mean_pred  precision  recall  f1      f1_functions",
    )?;
    for r in &reports {
        emit(
            out,
            &format!(
                "{:<9} {:>7}  {:<7}  {:>9.3}  {:>9.4}  {:>6.4}  {:.4}  {:.4}",
                r.variant.to_string(),
                r.k_chain,
                r.matched,
                r.mean_predicted,
                r.micro.precision,
                r.micro.recall,
                r.micro.f1,
                r.functions_only.f1
            ),
        )?;
    }
    if let Some(path) = report {
        write_file(path, &json_bytes(&reports)?)?;
    }
    Ok(())
}

fn load_index(path: &Path) -> Result<Index, Failure> {
    if !path.exists() {
        return Err(Failure::corpus(anyhow::anyhow!(
            "no index at {}; run `reposcope index` first",
            path.display()
        )));
    }
    Ok(Index::load(path)?)
}

fn read_prompt(file: Option<&Path>) -> Result<String, Failure> {
    match file {
        Some(path) if path != Path::new("-") => fs::read_to_string(path)
            .with_context(|| format!("cannot read prompt {}", path.display()))
            .map_err(Failure::usage),
        _ => {
            let mut text = String::new();
            std::io::stdin()
                .read_to_string(&mut text)
                .context("cannot read prompt from stdin")
                .map_err(Failure::usage)?;
            Ok(text)
        }
    }
}

#[derive(Serialize)]
struct ChainListing {
    score: f64,
    start: String,
    core: Vec<String>,
    relations: Vec<String>,
    extensions: Vec<String>,
}

fn chain_listing(graph: &Rssg, chains: &[CallChain]) -> Vec<ChainListing> {
    let path = |id| graph.entity(id).path.clone();
    chains
        .iter()
        .map(|c| ChainListing {
            score: c.score,
            start: path(c.start),
            core: c.core.entities.iter().map(|&e| path(e)).collect(),
            relations: c.core.relations.iter().map(ToString::to_string).collect(),
            extensions: c.extensions.iter().map(|x| path(x.entity)).collect(),
        })
        .collect()
}

fn chain_lines(graph: &Rssg, chains: &[CallChain]) -> Vec<String> {
    let mut lines = Vec::new();
    for (i, c) in chains.iter().enumerate() {
        let mut line = format!("{}. [{:.4}] {}", i + 1, c.score, graph.entity(c.core.entities[0]).path);
        for (rel, &e) in c.core.relations.iter().zip(&c.core.entities[1..]) {
            line.push_str(&format!(" -{rel}-> {}", graph.entity(e).path));
        }
        lines.push(line);
        for x in &c.extensions {
            lines.push(format!("     + {}", graph.entity(x.entity).path));
        }
    }
    lines
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, Failure> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(Failure::corpus)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn write_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Outcome {
    let bytes = json_bytes(value)?;
    out.write_all(&bytes).map_err(Failure::corpus)
}

fn write_file(path: &Path, bytes: &[u8]) -> Outcome {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::corpus(anyhow::anyhow!("{}: {e}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| Failure::corpus(anyhow::anyhow!("{}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, line: &str) -> Outcome {
    writeln!(out, "{line}").map_err(Failure::corpus)
}

fn emit_raw(out: &mut dyn Write, text: &str) -> Outcome {
    out.write_all(text.as_bytes()).map_err(Failure::corpus)
}
