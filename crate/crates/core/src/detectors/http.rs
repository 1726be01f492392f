use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Mutex, OnceLock};
use std::thread;
use std::time::{Duration, Instant};

use percent_encoding::{utf8_percent_encode, NON_ALPHANUMERIC};
use reqwest::blocking::{Client, Response};
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};
use url::Url;

use super::{Capability, Detector, DetectorError, Label, Verdict};
use crate::mutation::RequestMethod;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    pub url: String,
    pub param: String,
    pub blocked_statuses: Vec<u16>,
    pub block_body: Option<String>,
    pub rate_limit_per_sec: f64,
    pub timeout_secs: f64,
    pub transport_retries: u32,
    pub throttle_retries: u32,
    pub backoff_base_ms: u64,
    pub i_own_this_target: bool,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            url: String::new(),
            param: "id".into(),
            blocked_statuses: vec![403, 406],
            block_body: None,
            rate_limit_per_sec: 10.0,
            timeout_secs: 10.0,
            transport_retries: 3,
            throttle_retries: 5,
            backoff_base_ms: 500,
            i_own_this_target: false,
        }
    }
}

/// Remote target judged by HTTP status (and optionally a block-page marker).
#[derive(Debug)]
pub struct HttpDetector {
    config: HttpConfig,
    url: Url,
    host: String,
    client: Client,
    calls: AtomicU64,
    attempts: AtomicU64,
}

impl HttpDetector {
    pub fn new(config: HttpConfig) -> Result<Self, DetectorError> {
        if !config.i_own_this_target {
            return Err(DetectorError::NotAuthorized);
        }
        let url = Url::parse(&config.url).map_err(|e| DetectorError::Config(e.to_string()))?;
        let host = format!("{}:{}", url.host_str().unwrap_or(""), url.port_or_known_default().unwrap_or(0));
        if config.rate_limit_per_sec <= 0.0 {
            return Err(DetectorError::Config("rate limit must be positive".into()));
        }
        let client = Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .build()
            .map_err(|e| DetectorError::Config(e.to_string()))?;
        Ok(HttpDetector { config, url, host, client, calls: AtomicU64::new(0), attempts: AtomicU64::new(0) })
    }

    /// HTTP requests actually sent, including retries.
    pub fn attempts(&self) -> u64 {
        self.attempts.load(Ordering::Relaxed)
    }

    fn send(&self, wire: &str, method: RequestMethod) -> reqwest::Result<Response> {
        let param = &self.config.param;
        match method {
            RequestMethod::Get => {
                let mut url = self.url.clone();
                url.set_query(Some(&format!("{param}={wire}")));
                self.client.get(url).send()
            }
            RequestMethod::GetJson => {
                let doc = format!("{{\"{param}\":\"{wire}\"}}");
                let mut url = self.url.clone();
                url.set_query(Some(&format!("{param}={}", utf8_percent_encode(&doc, NON_ALPHANUMERIC))));
                self.client.get(url).send()
            }
            RequestMethod::Post => self
                .client
                .post(self.url.clone())
                .header("Content-Type", "application/x-www-form-urlencoded")
                .body(format!("{param}={wire}"))
                .send(),
            RequestMethod::PostJson => self
                .client
                .post(self.url.clone())
                .header("Content-Type", "application/json")
                .body(format!("{{\"{param}\":\"{wire}\"}}"))
                .send(),
        }
    }

    fn wait_for_slot(&self) {
        static NEXT: OnceLock<Mutex<HashMap<String, Instant>>> = OnceLock::new();
        let interval = Duration::from_secs_f64(1.0 / self.config.rate_limit_per_sec);
        let wait = {
            let mut next = NEXT.get_or_init(Default::default).lock().unwrap_or_else(|e| e.into_inner());
            let now = Instant::now();
            let slot = next.get(&self.host).copied().filter(|t| *t > now).unwrap_or(now);
            next.insert(self.host.clone(), slot + interval);
            slot - now
        };
        if !wait.is_zero() {
            thread::sleep(wait);
        }
    }

    fn backoff(&self, attempt: u32) -> Duration {
        Duration::from_millis(self.config.backoff_base_ms.saturating_mul(1 << attempt.min(16)))
    }
}

impl Detector for HttpDetector {
    fn name(&self) -> &str {
        "http"
    }

    fn capability(&self) -> Capability {
        Capability::WithoutProbability
    }

    fn detect(&self, wire: &str, method: RequestMethod) -> Result<Verdict, DetectorError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let start = Instant::now();
        let mut transport_failures = 0;
        let mut throttled = 0;
        loop {
            self.wait_for_slot();
            self.attempts.fetch_add(1, Ordering::Relaxed);
            let response = match self.send(wire, method) {
                Ok(r) => r,
                Err(e) => {
                    if transport_failures >= self.config.transport_retries {
                        return Err(if e.is_timeout() {
                            DetectorError::Timeout
                        } else {
                            DetectorError::Transport(e.to_string())
                        });
                    }
                    thread::sleep(self.backoff(transport_failures));
                    transport_failures += 1;
                    continue;
                }
            };
            let status = response.status();
            if status == StatusCode::TOO_MANY_REQUESTS {
                if throttled >= self.config.throttle_retries {
                    return Err(DetectorError::TooManyRequests);
                }
                thread::sleep(self.backoff(throttled));
                throttled += 1;
                continue;
            }
            let mut blocked = self.config.blocked_statuses.contains(&status.as_u16());
            if let Some(marker) = &self.config.block_body {
                let body = response.text().unwrap_or_default();
                blocked |= body.contains(marker.as_str());
            }
            return Ok(Verdict {
                label: if blocked { Label::Blocked } else { Label::Passed },
                score: None,
                latency: start.elapsed(),
                raw_status: Some(status.as_u16()),
                rule: None,
            });
        }
    }

    fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}
