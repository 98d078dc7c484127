//! Layered configuration: flags over environment over `reposcope.toml` over
//! built-in defaults.

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context};
use reposcope::chains::ChainConfig;
use reposcope::embedding::{EmbeddingProvider, HashedProvider, RemoteProvider};
use reposcope::index::IndexSettings;
use reposcope::pipeline::PipelineConfig;
use reposcope::retrieval::{parse_priority, ContextView};
use serde::Deserialize;

pub const CONFIG_FILE: &str = "reposcope.toml";
pub const DEFAULT_MODEL: &str = "gpt-4o-mini";
pub const DEFAULT_EMBED_MODEL: &str = "text-embedding-3-small";

/// One configuration layer. `None` leaves the value to a lower layer.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub exclude: Option<Vec<String>>,
    pub window: Option<usize>,
    pub stride: Option<usize>,
    pub embedding: Option<String>,
    pub embedding_dim: Option<usize>,
    pub embed_url: Option<String>,
    pub embed_key: Option<String>,
    pub embed_model: Option<String>,
    pub clusters: Option<usize>,
    pub seed: Option<u64>,
    pub alpha1: Option<f64>,
    pub alpha2: Option<f64>,
    pub alpha3: Option<f64>,
    pub l_max: Option<usize>,
    pub tau: Option<usize>,
    pub k_chain: Option<usize>,
    pub k_caller: Option<usize>,
    pub k_sim_function: Option<usize>,
    pub k_sim_fragment: Option<usize>,
    pub ell: Option<usize>,
    pub priority: Option<String>,
    pub llm_url: Option<String>,
    pub llm_key: Option<String>,
    pub llm_model: Option<String>,
    pub temperature: Option<f64>,
    pub retries: Option<u32>,
    pub timeout_secs: Option<u64>,
}

macro_rules! overlay {
    ($self:ident, $other:ident, $($field:ident),* $(,)?) => {
        $( if $other.$field.is_some() { $self.$field = $other.$field; } )*
    };
}

impl Overrides {
    /// Values set in `other` win.
    pub fn overlay(mut self, other: Overrides) -> Self {
        overlay!(
            self,
            other,
            exclude,
            window,
            stride,
            embedding,
            embedding_dim,
            embed_url,
            embed_key,
            embed_model,
            clusters,
            seed,
            alpha1,
            alpha2,
            alpha3,
            l_max,
            tau,
            k_chain,
            k_caller,
            k_sim_function,
            k_sim_fragment,
            ell,
            priority,
            llm_url,
            llm_key,
            llm_model,
            temperature,
            retries,
            timeout_secs,
        );
        self
    }

    /// Reads `REPOSCOPE_*` variables through `var`.
    pub fn from_env(var: impl Fn(&str) -> Option<String>) -> anyhow::Result<Self> {
        fn parsed<T: std::str::FromStr>(var: &impl Fn(&str) -> Option<String>, name: &str) -> anyhow::Result<Option<T>>
        where
            T::Err: std::fmt::Display,
        {
            match var(name) {
                None => Ok(None),
                Some(raw) => raw
                    .trim()
                    .parse()
                    .map(Some)
                    .map_err(|e| anyhow::anyhow!("{name}={raw}: {e}")),
            }
        }
        let text = |name: &str| var(name).filter(|v| !v.is_empty());
        Ok(Self {
            exclude: text("REPOSCOPE_EXCLUDE").map(|v| {
                v.split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect()
            }),
            window: parsed(&var, "REPOSCOPE_WINDOW")?,
            stride: parsed(&var, "REPOSCOPE_STRIDE")?,
            embedding: text("REPOSCOPE_EMBEDDING"),
            embedding_dim: parsed(&var, "REPOSCOPE_EMBEDDING_DIM")?,
            embed_url: text("REPOSCOPE_EMBED_URL"),
            embed_key: text("REPOSCOPE_EMBED_KEY"),
            embed_model: text("REPOSCOPE_EMBED_MODEL"),
            clusters: parsed(&var, "REPOSCOPE_CLUSTERS")?,
            seed: parsed(&var, "REPOSCOPE_SEED")?,
            alpha1: parsed(&var, "REPOSCOPE_ALPHA1")?,
            alpha2: parsed(&var, "REPOSCOPE_ALPHA2")?,
            alpha3: parsed(&var, "REPOSCOPE_ALPHA3")?,
            l_max: parsed(&var, "REPOSCOPE_L_MAX")?,
            tau: parsed(&var, "REPOSCOPE_TAU")?,
            k_chain: parsed(&var, "REPOSCOPE_K_CHAIN")?,
            k_caller: parsed(&var, "REPOSCOPE_K_CALLER")?,
            k_sim_function: parsed(&var, "REPOSCOPE_K_SIM_FUNCTION")?,
            k_sim_fragment: parsed(&var, "REPOSCOPE_K_SIM_FRAGMENT")?,
            ell: parsed(&var, "REPOSCOPE_ELL")?,
            priority: text("REPOSCOPE_PRIORITY"),
            llm_url: text("REPOSCOPE_LLM_URL"),
            llm_key: text("REPOSCOPE_LLM_KEY"),
            llm_model: text("REPOSCOPE_LLM_MODEL"),
            temperature: parsed(&var, "REPOSCOPE_TEMPERATURE")?,
            retries: parsed(&var, "REPOSCOPE_RETRIES")?,
            timeout_secs: parsed(&var, "REPOSCOPE_TIMEOUT")?,
        })
    }

    pub fn from_process_env() -> anyhow::Result<Self> {
        Self::from_env(|name| std::env::var(name).ok())
    }

    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let file: FileConfig = toml::from_str(text)?;
        Ok(file.into())
    }

    /// Reads `path` if it exists; a missing file is an empty layer.
    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        match std::fs::read_to_string(path) {
            Ok(text) => Self::from_toml(&text).with_context(|| format!("invalid config file {}", path.display())),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::default()),
            Err(e) => Err(e).with_context(|| format!("cannot read {}", path.display())),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    index: IndexSection,
    #[serde(default)]
    embedding: EmbeddingSection,
    #[serde(default)]
    chain: ChainSection,
    #[serde(default)]
    retrieval: RetrievalSection,
    #[serde(default)]
    generation: GenerationSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct IndexSection {
    exclude: Option<Vec<String>>,
    window: Option<usize>,
    stride: Option<usize>,
    clusters: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbeddingSection {
    provider: Option<String>,
    dim: Option<usize>,
    url: Option<String>,
    key: Option<String>,
    model: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChainSection {
    alpha1: Option<f64>,
    alpha2: Option<f64>,
    alpha3: Option<f64>,
    l_max: Option<usize>,
    tau: Option<usize>,
    k_chain: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RetrievalSection {
    k_caller: Option<usize>,
    k_sim_function: Option<usize>,
    k_sim_fragment: Option<usize>,
    ell: Option<usize>,
    priority: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenerationSection {
    url: Option<String>,
    key: Option<String>,
    model: Option<String>,
    temperature: Option<f64>,
    retries: Option<u32>,
    timeout_secs: Option<u64>,
}

impl From<FileConfig> for Overrides {
    fn from(f: FileConfig) -> Self {
        Self {
            exclude: f.index.exclude,
            window: f.index.window,
            stride: f.index.stride,
            clusters: f.index.clusters,
            seed: f.index.seed,
            embedding: f.embedding.provider,
            embedding_dim: f.embedding.dim,
            embed_url: f.embedding.url,
            embed_key: f.embedding.key,
            embed_model: f.embedding.model,
            alpha1: f.chain.alpha1,
            alpha2: f.chain.alpha2,
            alpha3: f.chain.alpha3,
            l_max: f.chain.l_max,
            tau: f.chain.tau,
            k_chain: f.chain.k_chain,
            k_caller: f.retrieval.k_caller,
            k_sim_function: f.retrieval.k_sim_function,
            k_sim_fragment: f.retrieval.k_sim_fragment,
            ell: f.retrieval.ell,
            priority: f.retrieval.priority,
            llm_url: f.generation.url,
            llm_key: f.generation.key,
            llm_model: f.generation.model,
            temperature: f.generation.temperature,
            retries: f.generation.retries,
            timeout_secs: f.generation.timeout_secs,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EmbeddingChoice {
    Hashed {
        dim: usize,
    },
    Remote {
        url: String,
        key: Option<String>,
        model: String,
    },
}

impl EmbeddingChoice {
    pub fn provider(&self) -> Box<dyn EmbeddingProvider> {
        match self {
            Self::Hashed { dim } => Box::new(HashedProvider::new(*dim)),
            Self::Remote { url, key, model } => Box::new(RemoteProvider::new(url.clone(), key.clone(), model.clone())),
        }
    }

    pub fn is_remote(&self) -> bool {
        matches!(self, Self::Remote { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Endpoint {
    pub url: Option<String>,
    pub key: Option<String>,
    pub model: String,
    pub temperature: f64,
    pub retries: u32,
    pub timeout: Duration,
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub root: PathBuf,
    pub index: IndexSettings,
    pub embedding: EmbeddingChoice,
    pub pipeline: PipelineConfig,
    pub generation: Endpoint,
}

impl Config {
    pub fn resolve(root: PathBuf, o: Overrides) -> anyhow::Result<Self> {
        let defaults = IndexSettings::default();
        let index = IndexSettings {
            window: o.window.unwrap_or(defaults.window),
            stride: o.stride.unwrap_or(defaults.stride),
            excludes: o.exclude.unwrap_or_default(),
            clusters: o.clusters,
            seed: o.seed.unwrap_or(defaults.seed),
        };
        if index.window == 0 || index.stride == 0 {
            bail!("window and stride must be positive");
        }
        if index.clusters == Some(0) {
            bail!("clusters must be positive");
        }

        let embedding = match o.embedding.as_deref().unwrap_or("hashed") {
            "hashed" => {
                let dim = o.embedding_dim.unwrap_or(256);
                if dim < 2 {
                    bail!("embedding dim must be at least 2");
                }
                EmbeddingChoice::Hashed { dim }
            }
            "remote" => EmbeddingChoice::Remote {
                url: o
                    .embed_url
                    .context("remote embeddings need a URL (REPOSCOPE_EMBED_URL or [embedding] url)")?,
                key: o.embed_key,
                model: o.embed_model.unwrap_or_else(|| DEFAULT_EMBED_MODEL.to_string()),
            },
            other => bail!("unknown embedding provider `{other}` (expected hashed or remote)"),
        };

        let base = ChainConfig::default();
        let chain = ChainConfig {
            alpha1: o.alpha1.unwrap_or(base.alpha1),
            alpha2: o.alpha2.unwrap_or(base.alpha2),
            alpha3: o.alpha3.unwrap_or(base.alpha3),
            l_max: o.l_max.unwrap_or(base.l_max),
            tau: o.tau.unwrap_or(base.tau),
            k_chain: o.k_chain.unwrap_or(base.k_chain),
            phi: base.phi,
        };
        chain.validate()?;
        let base = PipelineConfig::default();
        let priority: Vec<ContextView> = match &o.priority {
            Some(p) => parse_priority(p)?,
            None => base.priority.clone(),
        };
        let pipeline = PipelineConfig {
            chain,
            k_caller: o.k_caller.unwrap_or(base.k_caller),
            k_sim_function: o.k_sim_function.unwrap_or(base.k_sim_function),
            k_sim_fragment: o.k_sim_fragment.unwrap_or(base.k_sim_fragment),
            ell: o.ell.unwrap_or(base.ell),
            priority,
        };
        if pipeline.ell == 0 {
            bail!("ell must be positive");
        }

        let temperature = o.temperature.unwrap_or(0.0);
        if !temperature.is_finite() || temperature < 0.0 {
            bail!("temperature must be a non-negative number");
        }
        let generation = Endpoint {
            url: o.llm_url,
            key: o.llm_key,
            model: o.llm_model.unwrap_or_else(|| DEFAULT_MODEL.to_string()),
            temperature,
            retries: o.retries.unwrap_or(0),
            timeout: Duration::from_secs(o.timeout_secs.unwrap_or(120)),
        };
        Ok(Self {
            root,
            index,
            embedding,
            pipeline,
            generation,
        })
    }

    /// Defaults, then `<root>/reposcope.toml` (or `file`), then the
    /// environment, then `flags`.
    pub fn load(root: PathBuf, file: Option<&Path>, env: Overrides, flags: Overrides) -> anyhow::Result<Self> {
        let from_file = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
                Overrides::from_toml(&text).with_context(|| format!("invalid config file {}", path.display()))?
            }
            None => Overrides::from_file(&root.join(CONFIG_FILE))?,
        };
        Self::resolve(root, from_file.overlay(env).overlay(flags))
    }
}
