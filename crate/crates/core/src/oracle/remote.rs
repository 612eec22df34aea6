//! Client for the masked-LM HTTP service.
//!
//! Wire protocol (JSON over HTTP):
//!
//! * `POST /v1/masked_predict` with
//!   `{"tokens": [..., "[MASK]", ...], "target_position": i, "candidates": [...]}`
//!   answers `{"probabilities": {candidate: p}, "model_id": "...",
//!   "tokenization_note": {candidate: pieces}}`.
//! * `POST /v1/batch` takes a JSON array of such requests (at most 64) and
//!   answers an array of responses in the same order.

use std::collections::BTreeMap;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{MaskedQuery, OracleError, SequenceOracle};

/// Probabilities below this are clamped so every score stays finite.
const MIN_PROB: f64 = 1e-300;

pub const MAX_BATCH: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub timeout_secs: f64,
    pub max_inflight: usize,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            endpoint: "http://127.0.0.1:8000".into(),
            timeout_secs: 30.0,
            max_inflight: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskedPredictRequest {
    pub tokens: Vec<String>,
    pub target_position: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<String>>,
}

impl MaskedPredictRequest {
    pub fn new(query: &MaskedQuery, candidates: &[String]) -> Self {
        MaskedPredictRequest {
            tokens: query.wire_tokens(),
            target_position: query.target(),
            candidates: Some(candidates.to_vec()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskedPredictResponse {
    pub probabilities: BTreeMap<String, f64>,
    pub model_id: String,
    #[serde(default)]
    pub tokenization_note: BTreeMap<String, u32>,
}

impl MaskedPredictResponse {
    fn logprobs(&self, candidates: &[String]) -> Result<Vec<f64>, OracleError> {
        candidates
            .iter()
            .map(|c| {
                let p = *self.probabilities.get(c).ok_or_else(|| {
                    OracleError::BadResponse(format!("no probability for candidate {c:?}"))
                })?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(OracleError::BadResponse(format!(
                        "probability {p} for {c:?} outside [0, 1]"
                    )));
                }
                Ok(p.max(MIN_PROB).ln())
            })
            .collect()
    }
}

/// Counting semaphore bounding concurrent requests.
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn enter(&self) -> GateGuard<'_> {
        let mut free = self.free.lock().expect("gate lock poisoned");
        while *free == 0 {
            free = self.cv.wait(free).expect("gate lock poisoned");
        }
        *free -= 1;
        GateGuard(self)
    }
}

struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("gate lock poisoned") += 1;
        self.0.cv.notify_one();
    }
}

pub struct RemoteOracle {
    config: RemoteConfig,
    agent: ureq::Agent,
    gate: Gate,
}

impl RemoteOracle {
    pub fn new(config: RemoteConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        let gate = Gate {
            free: Mutex::new(config.max_inflight.max(1)),
            cv: Condvar::new(),
        };
        RemoteOracle {
            config,
            agent,
            gate,
        }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.config.endpoint.trim_end_matches('/'), path)
    }

    fn post<B: Serialize, T: for<'de> Deserialize<'de>>(
        &self,
        path: &str,
        body: &B,
    ) -> Result<T, OracleError> {
        let _slot = self.gate.enter();
        let mut response = self
            .agent
            .post(&self.url(path))
            .send_json(body)
            .map_err(|e| OracleError::Unavailable(e.to_string()))?;
        let status = response.status().as_u16();
        if status != 200 {
            let text = response.body_mut().read_to_string().unwrap_or_default();
            return Err(match status {
                502..=504 => OracleError::Unavailable(format!("HTTP {status}: {text}")),
                _ => OracleError::BadResponse(format!("HTTP {status}: {text}")),
            });
        }
        response
            .body_mut()
            .read_json()
            .map_err(|e| OracleError::BadResponse(e.to_string()))
    }

    pub fn predict(&self, request: &MaskedPredictRequest) -> Result<MaskedPredictResponse, OracleError> {
        self.post("/v1/masked_predict", request)
    }

    /// Sends requests through the batch endpoint in chunks of [`MAX_BATCH`].
    pub fn predict_batch(
        &self,
        requests: &[MaskedPredictRequest],
    ) -> Result<Vec<MaskedPredictResponse>, OracleError> {
        let mut out = Vec::with_capacity(requests.len());
        for chunk in requests.chunks(MAX_BATCH) {
            let answers: Vec<MaskedPredictResponse> = self.post("/v1/batch", &chunk)?;
            if answers.len() != chunk.len() {
                return Err(OracleError::BadResponse(format!(
                    "batch of {} answered with {} responses",
                    chunk.len(),
                    answers.len()
                )));
            }
            out.extend(answers);
        }
        Ok(out)
    }

    /// Log-probabilities for several (query, candidates) pairs in one round trip.
    pub fn masked_logprobs_batch(
        &self,
        queries: &[(MaskedQuery, Vec<String>)],
    ) -> Result<Vec<Vec<f64>>, OracleError> {
        let requests: Vec<_> = queries
            .iter()
            .map(|(q, c)| MaskedPredictRequest::new(q, c))
            .collect();
        let responses = self.predict_batch(&requests)?;
        responses
            .iter()
            .zip(queries)
            .map(|(r, (_, c))| r.logprobs(c))
            .collect()
    }
}

impl SequenceOracle for RemoteOracle {
    fn masked_logprob(&self, query: &MaskedQuery, token: &str) -> Result<f64, OracleError> {
        Ok(self.masked_logprobs(query, &[token.to_string()])?[0])
    }

    fn masked_logprobs(
        &self,
        query: &MaskedQuery,
        candidates: &[String],
    ) -> Result<Vec<f64>, OracleError> {
        self.predict(&MaskedPredictRequest::new(query, candidates))?
            .logprobs(candidates)
    }
}
