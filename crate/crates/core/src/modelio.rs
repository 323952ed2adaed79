//! Model responses: deterministic mocks and OpenAI-compatible endpoints,
//! behind an append-only JSON-lines cache.

use crate::corpus::{Label, PromptInstance};
use crate::hashing::{hex_digest, unit_interval};
use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::{BTreeSet, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("cannot read model config {path}: {source}")]
    ConfigIo {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse model config {path} at line {line}, column {column}: {message}")]
    ConfigParse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("cache {path}: {source}")]
    CacheIo {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot start async runtime: {0}")]
    Runtime(#[source] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApiKind {
    #[default]
    Chat,
    Completions,
}

fn default_timeout() -> u64 {
    60
}
fn default_retries() -> u32 {
    3
}
fn default_parallel() -> usize {
    4
}
fn default_max_tokens() -> u32 {
    64
}
fn default_backoff() -> u64 {
    500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointSpec {
    /// e.g. `http://localhost:8000/v1`; `/chat/completions` or `/completions` is appended.
    pub base_url: String,
    /// Name of the environment variable holding the API key, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    pub model_name: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_parallel")]
    pub max_parallel: usize,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default)]
    pub api: ApiKind,
    #[serde(default = "default_backoff")]
    pub retry_backoff_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MockSpec {
    /// Answers the ground-truth label.
    Oracle,
    ConstantNo,
    ConstantYes,
    /// Oracle, except that answers for the target identities are flipped
    /// with the given probability (decided per law, situation and identity).
    Biased {
        targets: BTreeSet<String>,
        flip_probability: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Answers correctly with probability `t`, otherwise NO.
    Checkpoint {
        t: f64,
        #[serde(default)]
        identity_noise: bool,
        #[serde(default)]
        seed: u64,
    },
}

impl MockSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        let (name, value) = match self {
            MockSpec::Biased { flip_probability, .. } => ("flip_probability", *flip_probability),
            MockSpec::Checkpoint { t, .. } => ("t", *t),
            _ => return Ok(()),
        };
        if !(0.0..=1.0).contains(&value) {
            return Err(ModelError::Config(format!("{name} must lie in [0, 1], got {value}")));
        }
        Ok(())
    }

    /// The mock's answer for one instance: a pure function of the instance
    /// fields and the spec.
    pub fn respond(&self, instance: &PromptInstance) -> &'static str {
        let truth = instance.label;
        let key = instance.identity_key.as_deref().unwrap_or("");
        let answer = match self {
            MockSpec::Oracle => truth,
            MockSpec::ConstantNo => Label::No,
            MockSpec::ConstantYes => Label::Yes,
            MockSpec::Biased {
                targets,
                flip_probability,
                seed,
            } => {
                let flip = targets.contains(key)
                    && unit_interval(*seed, &["bias", &instance.law_id, &instance.situation_id, key]) < *flip_probability;
                if flip {
                    truth.negate()
                } else {
                    truth
                }
            }
            MockSpec::Checkpoint {
                t,
                identity_noise,
                seed,
            } => {
                let bucket = t_bucket(*t);
                let mut parts = vec!["checkpoint", instance.law_id.as_str(), instance.situation_id.as_str(), bucket.as_str()];
                if *identity_noise {
                    parts.push(key);
                }
                if unit_interval(*seed, &parts) < *t {
                    truth
                } else {
                    Label::No
                }
            }
        };
        match answer {
            Label::Yes => "Yes",
            Label::No => "No",
        }
    }
}

fn t_bucket(t: f64) -> String {
    format!("{:.4}", t)
}

/// Mock for a finetuning snapshot at progress `t`.
pub fn checkpoint_family(t: f64, identity_noise: bool, seed: u64) -> Result<MockSpec, ModelError> {
    let spec = MockSpec::Checkpoint { t, identity_noise, seed };
    spec.validate()?;
    Ok(spec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSource {
    /// Stable name of this source; part of every cache key.
    pub model_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<EndpointSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mock: Option<MockSpec>,
}

impl ModelSource {
    pub fn mock(model_id: impl Into<String>, spec: MockSpec) -> Self {
        ModelSource {
            model_id: model_id.into(),
            endpoint: None,
            mock: Some(spec),
        }
    }

    pub fn remote(model_id: impl Into<String>, endpoint: EndpointSpec) -> Self {
        ModelSource {
            model_id: model_id.into(),
            endpoint: Some(endpoint),
            mock: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let src = std::fs::read_to_string(path).map_err(|source| ModelError::ConfigIo {
            path: path.to_path_buf(),
            source,
        })?;
        let source: ModelSource = serde_json::from_str(&src).map_err(|e| ModelError::ConfigParse {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        source.validate()?;
        Ok(source)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.model_id.trim().is_empty() {
            return Err(ModelError::Config("model_id must not be empty".into()));
        }
        match (&self.endpoint, &self.mock) {
            (Some(_), Some(_)) | (None, None) => Err(ModelError::Config(
                "exactly one of `endpoint` and `mock` must be given".into(),
            )),
            (None, Some(mock)) => mock.validate(),
            (Some(ep), None) => {
                if ep.max_parallel == 0 {
                    return Err(ModelError::Config("max_parallel must be at least 1".into()));
                }
                if ep.max_tokens == 0 {
                    return Err(ModelError::Config("max_tokens must be at least 1".into()));
                }
                if !(ep.base_url.starts_with("http://") || ep.base_url.starts_with("https://")) {
                    return Err(ModelError::Config(format!("base_url `{}` is not an http(s) URL", ep.base_url)));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawResponse {
    pub instance_id: String,
    pub model_id: String,
    /// Recorded as returned, possibly empty.
    pub raw_text: String,
    pub latency_ms: u64,
    #[serde(default)]
    pub retrieved_from_cache: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferFailure {
    pub instance_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CacheEntry {
    key: String,
    model_id: String,
    raw_text: String,
    latency_ms: u64,
}

pub fn cache_key(model_id: &str, rendered_text: &str) -> String {
    hex_digest(&[model_id, rendered_text])
}

/// Append-only JSON-lines cache. Later entries for a key win; corrupt lines
/// are skipped with a warning.
#[derive(Debug, Default)]
pub struct ResponseCache {
    path: Option<PathBuf>,
    entries: HashMap<String, CacheEntry>,
    corrupt_lines: usize,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn open(path: &Path) -> Result<Self, ModelError> {
        let io_err = |source| ModelError::CacheIo {
            path: path.to_path_buf(),
            source,
        };
        let mut cache = ResponseCache {
            path: Some(path.to_path_buf()),
            ..Self::default()
        };
        if !path.exists() {
            return Ok(cache);
        }
        let reader = BufReader::new(File::open(path).map_err(io_err)?);
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(io_err)?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<CacheEntry>(&line) {
                Ok(entry) => {
                    cache.entries.insert(entry.key.clone(), entry);
                }
                Err(e) => {
                    log::warn!("{}:{}: skipping corrupt cache entry: {e}", path.display(), n + 1);
                    cache.corrupt_lines += 1;
                }
            }
        }
        Ok(cache)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn corrupt_lines(&self) -> usize {
        self.corrupt_lines
    }

    pub fn get(&self, model_id: &str, rendered_text: &str) -> Option<(&str, u64)> {
        self.entries
            .get(&cache_key(model_id, rendered_text))
            .map(|e| (e.raw_text.as_str(), e.latency_ms))
    }

    fn writer(&self) -> Result<Option<(PathBuf, File)>, ModelError> {
        let Some(path) = &self.path else { return Ok(None) };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|source| ModelError::CacheIo {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|source| ModelError::CacheIo {
                path: path.clone(),
                source,
            })?;
        Ok(Some((path.clone(), file)))
    }

    fn insert(
        &mut self,
        writer: &mut Option<(PathBuf, File)>,
        model_id: &str,
        rendered_text: &str,
        raw_text: &str,
        latency_ms: u64,
    ) -> Result<(), ModelError> {
        let entry = CacheEntry {
            key: cache_key(model_id, rendered_text),
            model_id: model_id.to_string(),
            raw_text: raw_text.to_string(),
            latency_ms,
        };
        if let Some((path, file)) = writer {
            let mut line = serde_json::to_string(&entry).expect("cache entry serializes");
            line.push('\n');
            // one write per line keeps each entry atomic for concurrent readers
            file.write_all(line.as_bytes()).map_err(|source| ModelError::CacheIo {
                path: path.clone(),
                source,
            })?;
        }
        self.entries.insert(entry.key.clone(), entry);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InferStats {
    pub network_calls: usize,
    pub mock_calls: usize,
    pub cache_hits: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    /// Order-aligned with the input instances.
    pub outcomes: Vec<Result<RawResponse, InferFailure>>,
    pub stats: InferStats,
}

impl BatchResult {
    pub fn responses(&self) -> impl Iterator<Item = &RawResponse> {
        self.outcomes.iter().filter_map(|o| o.as_ref().ok())
    }

    pub fn failures(&self) -> impl Iterator<Item = &InferFailure> {
        self.outcomes.iter().filter_map(|o| o.as_ref().err())
    }
}

/// Obtains one response per instance. The cache is consulted first; every
/// new response is appended to it. Remote failures are reported per
/// instance and never abort the batch.
pub fn infer_batch(
    instances: &[PromptInstance],
    source: &ModelSource,
    cache: &mut ResponseCache,
) -> Result<BatchResult, ModelError> {
    source.validate()?;
    let model_id = source.model_id.as_str();
    let mut stats = InferStats::default();
    let mut outcomes: Vec<Option<Result<RawResponse, InferFailure>>> = vec![None; instances.len()];
    let mut misses = Vec::new();
    for (idx, inst) in instances.iter().enumerate() {
        match cache.get(model_id, &inst.rendered_text) {
            Some((text, latency_ms)) => {
                stats.cache_hits += 1;
                outcomes[idx] = Some(Ok(RawResponse {
                    instance_id: inst.instance_id.clone(),
                    model_id: model_id.to_string(),
                    raw_text: text.to_string(),
                    latency_ms,
                    retrieved_from_cache: true,
                }));
            }
            None => misses.push(idx),
        }
    }

    let mut writer = if misses.is_empty() { None } else { cache.writer()? };
    match (&source.mock, &source.endpoint) {
        (Some(mock), _) => {
            for idx in misses {
                let inst = &instances[idx];
                let text = mock.respond(inst);
                stats.mock_calls += 1;
                cache.insert(&mut writer, model_id, &inst.rendered_text, text, 0)?;
                outcomes[idx] = Some(Ok(RawResponse {
                    instance_id: inst.instance_id.clone(),
                    model_id: model_id.to_string(),
                    raw_text: text.to_string(),
                    latency_ms: 0,
                    retrieved_from_cache: false,
                }));
            }
        }
        (None, Some(endpoint)) if !misses.is_empty() => {
            let api_key = match &endpoint.api_key_env {
                Some(var) => Some(std::env::var(var).map_err(|_| {
                    ModelError::Config(format!("environment variable `{var}` holding the API key is not set"))
                })?),
                None => None,
            };
            let client = RemoteClient::new(endpoint, api_key)?;
            let runtime = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(ModelError::Runtime)?;
            runtime.block_on(async {
                let mut pending = stream::iter(misses)
                    .map(|idx| {
                        let client = &client;
                        async move {
                            let started = Instant::now();
                            let result = client.complete(&instances[idx].rendered_text).await;
                            (idx, result, started.elapsed().as_millis() as u64)
                        }
                    })
                    .buffer_unordered(endpoint.max_parallel);
                // single consumer: the only writer of the cache
                while let Some((idx, result, latency_ms)) = pending.next().await {
                    let inst = &instances[idx];
                    let (calls, result) = result;
                    stats.network_calls += calls;
                    outcomes[idx] = Some(match result {
                        Ok(text) => {
                            cache.insert(&mut writer, model_id, &inst.rendered_text, &text, latency_ms)?;
                            Ok(RawResponse {
                                instance_id: inst.instance_id.clone(),
                                model_id: model_id.to_string(),
                                raw_text: text,
                                latency_ms,
                                retrieved_from_cache: false,
                            })
                        }
                        Err(error) => {
                            log::warn!("{}: {error}", inst.instance_id);
                            stats.failures += 1;
                            Err(InferFailure {
                                instance_id: inst.instance_id.clone(),
                                error,
                            })
                        }
                    });
                }
                Ok::<(), ModelError>(())
            })?;
        }
        _ => {}
    }
    Ok(BatchResult {
        outcomes: outcomes.into_iter().map(|o| o.expect("every instance resolved")).collect(),
        stats,
    })
}

struct RemoteClient<'a> {
    spec: &'a EndpointSpec,
    http: reqwest::Client,
    url: String,
    api_key: Option<String>,
}

enum Attempt {
    Retry(String),
    Fatal(String),
}

impl<'a> RemoteClient<'a> {
    fn new(spec: &'a EndpointSpec, api_key: Option<String>) -> Result<Self, ModelError> {
        let http = reqwest::Client::builder()
            .timeout(Duration::from_secs(spec.timeout_secs.max(1)))
            .build()
            .map_err(|e| ModelError::Config(format!("cannot build HTTP client: {e}")))?;
        let suffix = match spec.api {
            ApiKind::Chat => "chat/completions",
            ApiKind::Completions => "completions",
        };
        Ok(RemoteClient {
            spec,
            http,
            url: format!("{}/{suffix}", spec.base_url.trim_end_matches('/')),
            api_key,
        })
    }

    fn body(&self, prompt: &str) -> Value {
        match self.spec.api {
            ApiKind::Chat => json!({
                "model": self.spec.model_name,
                "messages": [{"role": "user", "content": prompt}],
                "temperature": 0,
                "max_tokens": self.spec.max_tokens,
            }),
            ApiKind::Completions => json!({
                "model": self.spec.model_name,
                "prompt": prompt,
                "temperature": 0,
                "max_tokens": self.spec.max_tokens,
            }),
        }
    }

    /// Returns the number of requests sent and the completion text.
    async fn complete(&self, prompt: &str) -> (usize, Result<String, String>) {
        let body = self.body(prompt);
        let mut calls = 0;
        let mut last = String::new();
        for attempt in 0..=self.spec.max_retries {
            if attempt > 0 {
                let backoff = self.spec.retry_backoff_ms.saturating_mul(1 << (attempt - 1).min(10));
                tokio::time::sleep(Duration::from_millis(backoff)).await;
            }
            calls += 1;
            match self.attempt(&body).await {
                Ok(text) => return (calls, Ok(text)),
                Err(Attempt::Fatal(e)) => return (calls, Err(e)),
                Err(Attempt::Retry(e)) => last = e,
            }
        }
        (calls, Err(format!("giving up after {calls} attempt(s): {last}")))
    }

    async fn attempt(&self, body: &Value) -> Result<String, Attempt> {
        let mut request = self.http.post(&self.url).json(body);
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request.send().await.map_err(|e| Attempt::Retry(format!("request failed: {e}")))?;
        let status = response.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(Attempt::Retry(format!("endpoint returned {status}")));
        }
        if !status.is_success() {
            return Err(Attempt::Fatal(format!("endpoint returned {status}")));
        }
        let reply: Value = response
            .json()
            .await
            .map_err(|e| Attempt::Fatal(format!("malformed reply: {e}")))?;
        let choice = &reply["choices"][0];
        let text = match self.spec.api {
            ApiKind::Chat => choice["message"]["content"].as_str(),
            ApiKind::Completions => choice["text"].as_str(),
        };
        text.map(str::to_string)
            .ok_or_else(|| Attempt::Fatal(format!("malformed reply: no completion text in {reply}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::IdentityType;

    fn instance(i: usize, label: Label, key: &str) -> PromptInstance {
        PromptInstance {
            instance_id: format!("d/region/l{}/s{i}/{key}", i % 3),
            sample_id: Some(format!("d/region/l{}/s{i}", i % 3)),
            law_id: format!("l{}", i % 3),
            situation_id: format!("s{i}"),
            identity_type: Some(IdentityType::Region),
            identity_key: Some(key.into()),
            rendered_text: format!("prompt {i} {key}"),
            label,
        }
    }

    #[test]
    fn simple_mocks() {
        let yes = instance(0, Label::Yes, "a");
        let no = instance(1, Label::No, "a");
        assert_eq!(MockSpec::Oracle.respond(&yes), "Yes");
        assert_eq!(MockSpec::Oracle.respond(&no), "No");
        assert_eq!(MockSpec::ConstantNo.respond(&yes), "No");
        assert_eq!(MockSpec::ConstantYes.respond(&no), "Yes");
    }

    #[test]
    fn checkpoint_endpoints() {
        let zero = checkpoint_family(0.0, true, 1).unwrap();
        let one = checkpoint_family(1.0, true, 1).unwrap();
        for i in 0..200 {
            let inst = instance(i, if i % 2 == 0 { Label::Yes } else { Label::No }, "k");
            assert_eq!(zero.respond(&inst), MockSpec::ConstantNo.respond(&inst));
            assert_eq!(one.respond(&inst), MockSpec::Oracle.respond(&inst));
        }
        assert!(checkpoint_family(1.5, false, 1).is_err());
        assert!(checkpoint_family(-0.1, false, 1).is_err());
    }

    #[test]
    fn checkpoint_treats_identities_alike_without_noise() {
        let spec = checkpoint_family(0.5, false, 9).unwrap();
        for i in 0..100 {
            let a = spec.respond(&instance(i, Label::Yes, "a"));
            let b = spec.respond(&instance(i, Label::Yes, "b"));
            assert_eq!(a, b);
        }
    }

    #[test]
    fn checkpoint_accuracy_tracks_t() {
        let spec = checkpoint_family(0.25, false, 3).unwrap();
        let correct = (0..4000)
            .filter(|&i| spec.respond(&instance(i, Label::Yes, "a")) == "Yes")
            .count();
        let rate = correct as f64 / 4000.0;
        assert!((rate - 0.25).abs() < 0.03, "{rate}");
    }

    #[test]
    fn biased_with_zero_probability_is_oracle() {
        let spec = MockSpec::Biased {
            targets: ["a".to_string()].into(),
            flip_probability: 0.0,
            seed: 4,
        };
        for i in 0..100 {
            let inst = instance(i, if i % 3 == 0 { Label::Yes } else { Label::No }, "a");
            assert_eq!(spec.respond(&inst), MockSpec::Oracle.respond(&inst));
        }
        let always = MockSpec::Biased {
            targets: ["a".to_string()].into(),
            flip_probability: 1.0,
            seed: 4,
        };
        assert_eq!(always.respond(&instance(0, Label::Yes, "a")), "No");
        assert_eq!(always.respond(&instance(0, Label::Yes, "b")), "Yes");
    }

    #[test]
    fn source_requires_exactly_one_variant() {
        let both: Result<ModelSource, _> = serde_json::from_str(
            r#"{"model_id":"m","mock":{"kind":"oracle"},"endpoint":{"base_url":"http://x","model_name":"m"}}"#,
        );
        assert!(both.unwrap().validate().is_err());
        let none: ModelSource = serde_json::from_str(r#"{"model_id":"m"}"#).unwrap();
        assert!(none.validate().is_err());
        let ep: ModelSource = serde_json::from_str(
            r#"{"model_id":"m","endpoint":{"base_url":"http://x","model_name":"m","max_parallel":0}}"#,
        )
        .unwrap();
        assert!(ep.validate().is_err());
        let ok: ModelSource =
            serde_json::from_str(r#"{"model_id":"m","mock":{"kind":"checkpoint","t":0.5}}"#).unwrap();
        ok.validate().unwrap();
    }

    #[test]
    fn endpoint_defaults() {
        let ep: EndpointSpec = serde_json::from_str(r#"{"base_url":"http://x","model_name":"m"}"#).unwrap();
        assert_eq!((ep.timeout_secs, ep.max_retries, ep.max_parallel, ep.max_tokens), (60, 3, 4, 64));
        assert_eq!(ep.api, ApiKind::Chat);
    }

    #[test]
    fn mock_batch_uses_cache_on_rerun() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let insts: Vec<PromptInstance> = (0..20).map(|i| instance(i, Label::No, "a")).collect();
        let source = ModelSource::mock("oracle", MockSpec::Oracle);
        let mut cache = ResponseCache::open(&path).unwrap();
        let first = infer_batch(&insts, &source, &mut cache).unwrap();
        assert_eq!(first.stats.mock_calls, 20);
        let mut cache = ResponseCache::open(&path).unwrap();
        let second = infer_batch(&insts, &source, &mut cache).unwrap();
        assert_eq!(second.stats.cache_hits, 20);
        assert_eq!(second.stats.mock_calls, 0);
        for (a, b) in first.responses().zip(second.responses()) {
            assert_eq!(a.raw_text, b.raw_text);
            assert!(b.retrieved_from_cache);
        }
    }

    #[test]
    fn cache_skips_corrupt_lines_and_round_trips_text() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let mut cache = ResponseCache::open(&path).unwrap();
        let mut w = cache.writer().unwrap();
        let odd = "  Yes,\n the law \"applies\" — ünïcödé\t";
        cache.insert(&mut w, "m", "prompt", odd, 12).unwrap();
        drop(w);
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        writeln!(f, "{{not json").unwrap();
        let reopened = ResponseCache::open(&path).unwrap();
        assert_eq!(reopened.corrupt_lines(), 1);
        assert_eq!(reopened.get("m", "prompt"), Some((odd, 12)));
        assert_eq!(reopened.get("other", "prompt"), None);
    }
}
