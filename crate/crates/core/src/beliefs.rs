//! Belief stores: fact id -> probability of truth.
//!
//! Three providers fill a store: a table loaded from disk, a trained
//! model (see the trainer), and a remote endpoint serving next-token
//! log-probabilities for a prompt built from one of the two fixed
//! prompt formats. Remote responses are cached on disk keyed by the
//! format and the exact prompt bytes, so repeated runs are cheap and
//! reproducible.

use std::cell::Cell;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::circuit::WeightMap;
use crate::logic::FactId;

#[derive(Debug, Error)]
pub enum BeliefError {
    #[error("no belief recorded for fact {id}")]
    UnknownFact { id: FactId },
    #[error("belief {value} for {id} is not a probability")]
    InvalidProbability { id: FactId, value: f64 },
    #[error("label sets must be nonempty and disjoint")]
    BadLabelSets,
    #[error("transport failure: {message}")]
    Transport { message: String },
    #[error("endpoint returned no token probabilities")]
    NoLogprobs,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> BeliefError {
    BeliefError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Where a belief entry came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    #[default]
    Table,
    Trained,
    Remote,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeliefEntry {
    pub p_true: f64,
    pub provenance: Provenance,
}

/// Map from fact id to probability of truth.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BeliefStore {
    entries: BTreeMap<FactId, BeliefEntry>,
}

impl BeliefStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(
        &mut self,
        id: FactId,
        p_true: f64,
        provenance: Provenance,
    ) -> Result<(), BeliefError> {
        if !p_true.is_finite() || !(0.0..=1.0).contains(&p_true) {
            return Err(BeliefError::InvalidProbability { id, value: p_true });
        }
        self.entries.insert(id, BeliefEntry { p_true, provenance });
        Ok(())
    }

    pub fn get(&self, id: &FactId) -> Option<BeliefEntry> {
        self.entries.get(id).copied()
    }

    /// The stored probability of the fact being true.
    pub fn belief(&self, id: &FactId) -> Result<f64, BeliefError> {
        self.entries
            .get(id)
            .map(|e| e.p_true)
            .ok_or_else(|| BeliefError::UnknownFact { id: id.clone() })
    }

    /// The discrete belief under a threshold.
    pub fn believed(&self, id: &FactId, threshold: f64) -> Result<bool, BeliefError> {
        Ok(discretize(self.belief(id)?, threshold))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FactId, &BeliefEntry)> {
        self.entries.iter()
    }

    pub fn ids(&self) -> impl Iterator<Item = &FactId> {
        self.entries.keys()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_weights(&self) -> WeightMap {
        self.entries
            .iter()
            .map(|(id, e)| (id.clone(), e.p_true))
            .collect()
    }
}

impl FromIterator<(FactId, f64)> for BeliefStore {
    fn from_iter<T: IntoIterator<Item = (FactId, f64)>>(iter: T) -> Self {
        let entries = iter
            .into_iter()
            .map(|(id, p)| {
                (
                    id,
                    BeliefEntry {
                        p_true: p,
                        provenance: Provenance::Table,
                    },
                )
            })
            .collect();
        BeliefStore { entries }
    }
}

/// Discrete belief: true strictly above the threshold; ties and
/// undetermined values map to false.
pub fn discretize(p_true: f64, threshold: f64) -> bool {
    p_true > threshold
}

pub const DEFAULT_THRESHOLD: f64 = 0.5;

// ---------------------------------------------------------------------------
// Prompt formats
// ---------------------------------------------------------------------------

/// A prompt template with its affirmative and negative answer tokens.
/// Tokens are matched after trimming and lowercasing.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptFormat {
    pub id: u8,
    pub template: String,
    pub true_labels: Vec<String>,
    pub false_labels: Vec<String>,
}

impl PromptFormat {
    pub fn new(
        id: u8,
        template: impl Into<String>,
        true_labels: Vec<String>,
        false_labels: Vec<String>,
    ) -> Result<Self, BeliefError> {
        if true_labels.is_empty() || false_labels.is_empty() {
            return Err(BeliefError::BadLabelSets);
        }
        let norm = |v: &[String]| -> Vec<String> {
            v.iter().map(|s| s.trim().to_ascii_lowercase()).collect()
        };
        let t = norm(&true_labels);
        let f = norm(&false_labels);
        if t.iter().any(|x| f.contains(x)) {
            return Err(BeliefError::BadLabelSets);
        }
        Ok(PromptFormat {
            id,
            template: template.into(),
            true_labels: t,
            false_labels: f,
        })
    }

    /// Label set `[true, false]`.
    pub fn format1() -> Self {
        PromptFormat::new(
            1,
            "You can answer only with \"true\" or \"false\". Is the fact true? Fact: <statement>",
            vec!["true".into()],
            vec!["false".into()],
        )
        .expect("built-in format is valid")
    }

    /// Label set `[yes, no]`.
    pub fn format2() -> Self {
        PromptFormat::new(
            2,
            "You can answer only with \"yes\" or \"no\". Is the fact true? Fact: <statement>",
            vec!["yes".into()],
            vec!["no".into()],
        )
        .expect("built-in format is valid")
    }

    pub fn by_id(id: u8) -> Option<Self> {
        match id {
            1 => Some(Self::format1()),
            2 => Some(Self::format2()),
            _ => None,
        }
    }

    pub fn render(&self, statement: &str) -> String {
        self.template.replace("<statement>", statement)
    }

    fn is_true_label(&self, token: &str) -> bool {
        let t = token.trim().to_ascii_lowercase();
        self.true_labels.contains(&t)
    }

    fn is_false_label(&self, token: &str) -> bool {
        let t = token.trim().to_ascii_lowercase();
        self.false_labels.contains(&t)
    }
}

// ---------------------------------------------------------------------------
// Remote extraction
// ---------------------------------------------------------------------------

/// Anything that can serve next-token log-probabilities for a prompt.
pub trait LogprobClient {
    fn next_token_logprobs(
        &self,
        prompt: &str,
        top_logprobs: usize,
    ) -> Result<BTreeMap<String, f64>, BeliefError>;
}

/// Extracted belief with the raw label masses kept for diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemoteBelief {
    pub p_true: f64,
    pub true_mass: f64,
    pub false_mass: f64,
}

/// Mass below which the answer counts as undetermined (and therefore
/// false).
pub const UNDETERMINED_MASS: f64 = 1e-9;

pub const DEFAULT_TOP_LOGPROBS: usize = 20;

/// Query the client once and normalize the affirmative label mass over
/// the union of affirmative and negative labels. An undetermined
/// answer (next to no mass on either label set) maps to probability
/// zero.
pub fn extract_remote_belief(
    client: &impl LogprobClient,
    format: &PromptFormat,
    statement: &str,
) -> Result<RemoteBelief, BeliefError> {
    let prompt = format.render(statement);
    let logprobs = client.next_token_logprobs(&prompt, DEFAULT_TOP_LOGPROBS)?;
    if logprobs.is_empty() {
        return Err(BeliefError::NoLogprobs);
    }
    let mut true_mass = 0.0;
    let mut false_mass = 0.0;
    for (token, lp) in &logprobs {
        if format.is_true_label(token) {
            true_mass += lp.exp();
        } else if format.is_false_label(token) {
            false_mass += lp.exp();
        }
    }
    let denom = true_mass + false_mass;
    let p_true = if denom < UNDETERMINED_MASS {
        0.0
    } else {
        true_mass / denom
    };
    Ok(RemoteBelief {
        p_true,
        true_mass,
        false_mass,
    })
}

/// HTTP client for the endpoint contract: POST a JSON body
/// `{"prompt": ..., "top_logprobs": ...}`, receive
/// `{"logprobs": {token: logprob, ...}}` for the next position.
pub struct HttpLogprobClient {
    url: String,
    client: reqwest::blocking::Client,
}

impl HttpLogprobClient {
    pub fn new(url: impl Into<String>) -> Self {
        HttpLogprobClient {
            url: url.into(),
            client: reqwest::blocking::Client::new(),
        }
    }
}

#[derive(Serialize)]
struct LogprobRequest<'a> {
    prompt: &'a str,
    top_logprobs: usize,
}

#[derive(Deserialize)]
struct LogprobResponse {
    logprobs: BTreeMap<String, f64>,
}

impl LogprobClient for HttpLogprobClient {
    fn next_token_logprobs(
        &self,
        prompt: &str,
        top_logprobs: usize,
    ) -> Result<BTreeMap<String, f64>, BeliefError> {
        let resp = self
            .client
            .post(&self.url)
            .json(&LogprobRequest {
                prompt,
                top_logprobs,
            })
            .send()
            .map_err(|e| BeliefError::Transport {
                message: e.to_string(),
            })?;
        let resp = resp
            .error_for_status()
            .map_err(|e| BeliefError::Transport {
                message: e.to_string(),
            })?;
        let body: LogprobResponse = resp.json().map_err(|e| BeliefError::Transport {
            message: format!("bad response body: {e}"),
        })?;
        Ok(body.logprobs)
    }
}

/// Remote belief provider with a content-addressed on-disk cache.
///
/// The cache key is the SHA-256 of the format id and the exact prompt
/// bytes; a hit never touches the endpoint.
pub struct RemoteProvider<C> {
    client: C,
    format: PromptFormat,
    cache_dir: Option<PathBuf>,
    requests: Cell<u64>,
}

impl<C: LogprobClient> RemoteProvider<C> {
    pub fn new(client: C, format: PromptFormat) -> Self {
        RemoteProvider {
            client,
            format,
            cache_dir: None,
            requests: Cell::new(0),
        }
    }

    pub fn with_cache_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.cache_dir = Some(dir.into());
        self
    }

    pub fn format(&self) -> &PromptFormat {
        &self.format
    }

    /// Endpoint requests actually issued (cache hits excluded).
    pub fn request_count(&self) -> u64 {
        self.requests.get()
    }

    fn cache_path(&self, prompt: &str) -> Option<PathBuf> {
        let dir = self.cache_dir.as_ref()?;
        let mut hasher = Sha256::new();
        hasher.update([self.format.id]);
        hasher.update(prompt.as_bytes());
        let digest = hasher.finalize();
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        Some(dir.join(format!("{hex}.json")))
    }

    pub fn belief_for(&self, statement: &str) -> Result<RemoteBelief, BeliefError> {
        let prompt = self.format.render(statement);
        let cache_path = self.cache_path(&prompt);
        if let Some(path) = &cache_path {
            if let Ok(text) = fs::read_to_string(path) {
                if let Ok(cached) = serde_json::from_str::<RemoteBelief>(&text) {
                    return Ok(cached);
                }
            }
        }
        self.requests.set(self.requests.get() + 1);
        let belief = extract_remote_belief(&self.client, &self.format, statement)?;
        if let Some(path) = &cache_path {
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
            }
            let text = serde_json::to_string(&belief).expect("belief serializes");
            fs::write(path, text).map_err(|e| io_err(path, e))?;
        }
        Ok(belief)
    }

    /// Materialize a belief store for `(fact id, statement)` pairs.
    pub fn store_for<'a>(
        &self,
        items: impl Iterator<Item = (FactId, &'a str)>,
    ) -> Result<BeliefStore, BeliefError> {
        let mut store = BeliefStore::new();
        for (id, statement) in items {
            let b = self.belief_for(statement)?;
            store.insert(id, b.p_true, Provenance::Remote)?;
        }
        Ok(store)
    }
}

// ---------------------------------------------------------------------------
// Belief tables on disk
// ---------------------------------------------------------------------------

pub const BELIEFS_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct BeliefMeta {
    format_version: u32,
    file: String,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct BeliefRecord {
    fact_id: FactId,
    p_true: f64,
    #[serde(default)]
    provenance: Provenance,
}

/// Load a line-delimited belief table. A leading metadata line (as
/// written by [`save_belief_table`]) is accepted and skipped.
pub fn load_belief_table(path: &Path) -> Result<BeliefStore, BeliefError> {
    let content = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut store = BeliefStore::new();
    for (lineno, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if lineno == 0 && serde_json::from_str::<BeliefMeta>(line).is_ok() {
            continue;
        }
        let rec: BeliefRecord = serde_json::from_str(line).map_err(|e| BeliefError::Malformed {
            path: path.display().to_string(),
            line: lineno + 1,
            message: e.to_string(),
        })?;
        store.insert(rec.fact_id, rec.p_true, rec.provenance)?;
    }
    Ok(store)
}

pub fn save_belief_table(path: &Path, store: &BeliefStore, seed: u64) -> Result<(), BeliefError> {
    let mut out = String::new();
    let meta = BeliefMeta {
        format_version: BELIEFS_FORMAT_VERSION,
        file: "beliefs".to_string(),
        seed,
    };
    out.push_str(&serde_json::to_string(&meta).expect("meta serializes"));
    out.push('\n');
    for (id, entry) in store.iter() {
        let rec = BeliefRecord {
            fact_id: id.clone(),
            p_true: entry.p_true,
            provenance: entry.provenance,
        };
        out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}
