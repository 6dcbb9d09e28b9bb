//! ThingSpeak-style cloud updates: query serialization, an HTTP client and an
//! in-process stub that records requests and answers with entry ids.

use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use wheelsim_core::health::CloudPayload;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CloudError {
    #[error("cloud endpoint unreachable: {0}")]
    Unreachable(String),
    #[error("cloud endpoint rejected the api key")]
    RejectedKey,
    #[error("api key must be non-empty and URL-safe")]
    InvalidKey,
}

/// Record of one accepted update.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UploadRecord {
    pub query: String,
    pub entry_id: u64,
}

fn key_is_url_safe(k: &str) -> bool {
    !k.is_empty() && k.bytes().all(|b| b.is_ascii_alphanumeric() || b"-_.~".contains(&b))
}

fn rounded(v: Option<f64>) -> String {
    v.map(|x| format!("{}", x.round() as i64)).unwrap_or_default()
}

/// `api_key=K&field1=bpm&field2=spo2&field3=ecg&field4=tempF&field5=ambientC&field6=lead`.
/// Unavailable vitals serialize as empty values.
pub fn payload_query(payload: &CloudPayload, api_key: &str) -> Result<String, CloudError> {
    if !key_is_url_safe(api_key) {
        return Err(CloudError::InvalidKey);
    }
    Ok(format!(
        "api_key={api_key}&field1={}&field2={}&field3={}&field4={:.2}&field5={:.2}&field6={}",
        rounded(payload.beats_per_minute),
        rounded(payload.spo2),
        payload.ecg_value,
        payload.object_temp_f,
        payload.ambient_temp_c,
        payload.lead_status,
    ))
}

/// Destination for update queries.
pub trait CloudSink: Send {
    /// Send one query string; returns the entry id.
    fn send_query(&mut self, query: &str) -> Result<u64, CloudError>;
}

pub fn cloud_update(payload: &CloudPayload, api_key: &str, sink: &mut dyn CloudSink) -> Result<UploadRecord, CloudError> {
    let query = payload_query(payload, api_key)?;
    let entry_id = sink.send_query(&query)?;
    Ok(UploadRecord { query, entry_id })
}

/// Server-side state of the stub: recorded queries and the id counter.
/// Replies "0" to a wrong key, as ThingSpeak does.
#[derive(Debug, Clone, Default)]
pub struct CloudStub {
    inner: Arc<Mutex<StubInner>>,
}

#[derive(Debug, Default)]
struct StubInner {
    accepted_key: Option<String>,
    requests: Vec<String>,
    next_id: u64,
}

impl CloudStub {
    /// Accept any key when `accepted_key` is `None`.
    pub fn new(accepted_key: Option<String>) -> Self {
        Self { inner: Arc::new(Mutex::new(StubInner { accepted_key, requests: Vec::new(), next_id: 0 })) }
    }

    /// Handle one raw query string; returns the response body.
    pub fn handle_query(&self, query: &str) -> String {
        let mut inner = self.inner.lock().expect("stub poisoned");
        inner.requests.push(query.to_string());
        let key = query.split('&').find_map(|kv| kv.strip_prefix("api_key="));
        let accepted = match (&inner.accepted_key, key) {
            (_, None) => false,
            (None, Some(_)) => true,
            (Some(want), Some(got)) => want == got,
        };
        if !accepted {
            return "0".into();
        }
        inner.next_id += 1;
        inner.next_id.to_string()
    }

    pub fn requests(&self) -> Vec<String> {
        self.inner.lock().expect("stub poisoned").requests.clone()
    }
}

fn parse_entry_id(body: &str) -> Result<u64, CloudError> {
    match body.trim().parse::<u64>() {
        Ok(0) => Err(CloudError::RejectedKey),
        Ok(id) => Ok(id),
        Err(_) => Err(CloudError::Unreachable(format!("unexpected response {body:?}"))),
    }
}

impl CloudSink for CloudStub {
    fn send_query(&mut self, query: &str) -> Result<u64, CloudError> {
        parse_entry_id(&self.handle_query(query))
    }
}

/// HTTP GET against `<base_url>/update?<query>`.
pub struct HttpCloudClient {
    base_url: String,
    agent: ureq::Agent,
}

impl HttpCloudClient {
    pub fn new(base_url: impl Into<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        Self { base_url: base_url.into().trim_end_matches('/').to_string(), agent }
    }
}

impl CloudSink for HttpCloudClient {
    fn send_query(&mut self, query: &str) -> Result<u64, CloudError> {
        let url = format!("{}/update?{query}", self.base_url);
        let mut resp = self.agent.get(&url).call().map_err(|e| CloudError::Unreachable(e.to_string()))?;
        let body = resp.body_mut().read_to_string().map_err(|e| CloudError::Unreachable(e.to_string()))?;
        parse_entry_id(&body)
    }
}
