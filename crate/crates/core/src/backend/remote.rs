//! HTTP client for a model server speaking the `/v1` JSON protocol.

use std::time::Duration;

use reqwest::blocking::{Client, RequestBuilder};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{check_prefix, Backend, BackendMeta, Embedding, TokenDistribution, TokenId};
use crate::error::{Error, Result};

/// Bearer token sent with every request when set.
pub const TOKEN_ENV: &str = "TPCA_REMOTE_TOKEN";

#[derive(Debug, Clone)]
pub struct RemoteBackend {
    base: String,
    client: Client,
    token: Option<String>,
    meta: BackendMeta,
}

#[derive(Deserialize)]
struct ErrorBody {
    error: String,
}

#[derive(Deserialize)]
struct EmbeddingsBody {
    embeddings: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct LogProbsBody {
    log_probs: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct IdsBody {
    ids: Vec<TokenId>,
}

#[derive(Deserialize)]
struct TextBody {
    text: String,
}

impl RemoteBackend {
    /// Connects and fetches `/v1/meta`.
    pub fn connect(url: &str) -> Result<Self> {
        let client = Client::builder()
            .timeout(Duration::from_secs(300))
            .build()
            .map_err(|e| Error::InvalidBackend(e.to_string()))?;
        let mut backend = RemoteBackend {
            base: url.trim_end_matches('/').to_string(),
            client,
            token: std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty()),
            meta: BackendMeta {
                embed_dim: 2,
                vocab_size: 2,
                bos_id: 0,
                eos_id: 1,
            },
        };
        let meta: BackendMeta = backend.send(backend.client.get(backend.url("meta")))?;
        meta.validate()?;
        backend.meta = meta;
        Ok(backend)
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    fn url(&self, route: &str) -> String {
        format!("{}/v1/{route}", self.base)
    }

    fn post<B: Serialize, T: DeserializeOwned>(&self, route: &str, body: &B) -> Result<T> {
        self.send(self.client.post(self.url(route)).json(body))
    }

    fn send<T: DeserializeOwned>(&self, req: RequestBuilder) -> Result<T> {
        let req = match &self.token {
            Some(t) => req.bearer_auth(t),
            None => req,
        };
        let resp = req.send().map_err(|e| Error::BackendUnreachable {
            url: self.base.clone(),
            reason: e.to_string(),
        })?;
        let status = resp.status();
        let bytes = resp.bytes().map_err(|e| Error::BackendUnreachable {
            url: self.base.clone(),
            reason: e.to_string(),
        })?;
        if !status.is_success() {
            let message = serde_json::from_slice::<ErrorBody>(&bytes)
                .map(|b| b.error)
                .unwrap_or_else(|_| String::from_utf8_lossy(&bytes).into_owned());
            return Err(Error::Remote {
                status: status.as_u16(),
                message,
            });
        }
        serde_json::from_slice(&bytes).map_err(|e| Error::Remote {
            status: status.as_u16(),
            message: format!("malformed response body: {e}"),
        })
    }
}

impl Backend for RemoteBackend {
    fn meta(&self) -> BackendMeta {
        self.meta
    }

    fn encode_texts(&self, texts: &[String]) -> Result<Vec<Embedding>> {
        let trimmed: Vec<&str> = texts.iter().map(|t| t.trim()).collect();
        if trimmed.iter().any(|t| t.is_empty()) {
            return Err(Error::EmptyText);
        }
        if trimmed.is_empty() {
            return Ok(Vec::new());
        }
        let body: EmbeddingsBody = self.post("encode_text", &json!({ "texts": trimmed }))?;
        if body.embeddings.len() != texts.len() {
            return Err(Error::Remote {
                status: 200,
                message: format!(
                    "expected {} embeddings, got {}",
                    texts.len(),
                    body.embeddings.len()
                ),
            });
        }
        body.embeddings
            .into_iter()
            .map(|v| {
                if v.len() != self.meta.embed_dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.meta.embed_dim,
                        got: v.len(),
                    });
                }
                Embedding::normalized(v)
            })
            .collect()
    }

    fn next_token(&self, prefix_ids: &[TokenId], condition: &Embedding) -> Result<TokenDistribution> {
        check_prefix(&self.meta, prefix_ids, condition)?;
        let body: LogProbsBody = self.post(
            "next_token",
            &json!({ "prefix_ids": [prefix_ids], "condition": condition.as_slice() }),
        )?;
        let row = body.log_probs.into_iter().next().ok_or_else(|| Error::Remote {
            status: 200,
            message: "empty log_probs".into(),
        })?;
        if row.len() != self.meta.vocab_size {
            return Err(Error::DimensionMismatch {
                expected: self.meta.vocab_size,
                got: row.len(),
            });
        }
        TokenDistribution::from_log_probs(row)
    }

    fn tokenize(&self, text: &str) -> Result<Vec<TokenId>> {
        let body: IdsBody = self.post("tokenize", &json!({ "text": text }))?;
        Ok(body.ids)
    }

    fn detokenize(&self, ids: &[TokenId]) -> Result<String> {
        if let Some(&bad) = ids.iter().find(|&&id| id as usize >= self.meta.vocab_size) {
            return Err(Error::UnknownTokenId(bad));
        }
        let body: TextBody = self.post("detokenize", &json!({ "ids": ids }))?;
        Ok(body.text)
    }

    fn fingerprint(&self) -> String {
        format!(
            "remote:{} dim={} vocab={} bos={} eos={}",
            self.base, self.meta.embed_dim, self.meta.vocab_size, self.meta.bos_id, self.meta.eos_id
        )
    }
}
