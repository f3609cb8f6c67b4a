use std::io::{self, Read};
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum FetchError {
    #[error("{url}: timed out")]
    Timeout { url: String },
    #[error("{url}: HTTP status {status}")]
    HttpStatus { url: String, status: u16 },
    #[error("{url}: {message}")]
    Transport { url: String, message: String },
    #[error("aborted after {failed} of {attempted} fetches failed")]
    TooManyFailures { failed: usize, attempted: usize },
    #[error("rate limit must be positive")]
    InvalidBudget,
}

impl FetchError {
    fn is_transient(&self) -> bool {
        match self {
            FetchError::Timeout { .. } | FetchError::Transport { .. } => true,
            FetchError::HttpStatus { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FetchConfig {
    /// Requests per second, including retries.
    pub rate_limit: f64,
    /// When set, only this many leading bytes are requested and read.
    pub prefix_bytes: Option<u64>,
    pub retries: u32,
    pub timeout: Duration,
    /// Abort once more than this fraction of attempted URLs has failed.
    pub max_failure_ratio: f64,
    /// The failure ratio is only checked after this many URLs.
    pub min_attempts: usize,
}

impl Default for FetchConfig {
    fn default() -> Self {
        Self {
            rate_limit: 5.0,
            prefix_bytes: None,
            retries: 2,
            timeout: Duration::from_secs(30),
            max_failure_ratio: 0.5,
            min_attempts: 10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Fetched {
    pub url: String,
    pub result: Result<Vec<u8>, FetchError>,
}

struct Pacer {
    start: Instant,
    interval: Duration,
    issued: u32,
}

impl Pacer {
    fn wait(&mut self) {
        let due = self.start + self.interval * self.issued;
        let now = Instant::now();
        if due > now {
            thread::sleep(due - now);
        }
        self.issued += 1;
    }
}

fn classify_io(url: &str, e: &io::Error) -> FetchError {
    if matches!(e.kind(), io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock) {
        FetchError::Timeout {
            url: url.to_string(),
        }
    } else {
        FetchError::Transport {
            url: url.to_string(),
            message: e.to_string(),
        }
    }
}

fn get_once(agent: &ureq::Agent, url: &str, prefix: Option<u64>) -> Result<Vec<u8>, FetchError> {
    let mut request = agent.get(url);
    if let Some(n) = prefix {
        request = request.set("Range", &format!("bytes=0-{}", n.saturating_sub(1)));
    }
    let response = match request.call() {
        Ok(r) => r,
        Err(ureq::Error::Status(status, _)) => {
            return Err(FetchError::HttpStatus {
                url: url.to_string(),
                status,
            })
        }
        Err(ureq::Error::Transport(t)) => {
            let timed_out = std::error::Error::source(&t)
                .and_then(|s| s.downcast_ref::<io::Error>())
                .map(|e| matches!(e.kind(), io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock))
                .unwrap_or(false);
            return Err(if timed_out {
                FetchError::Timeout {
                    url: url.to_string(),
                }
            } else {
                FetchError::Transport {
                    url: url.to_string(),
                    message: t.to_string(),
                }
            });
        }
    };
    let mut body = Vec::new();
    let reader = response.into_reader();
    // Servers may ignore Range and send the whole file.
    let read = match prefix {
        Some(n) => reader.take(n).read_to_end(&mut body),
        None => reader.take(u64::MAX).read_to_end(&mut body),
    };
    read.map_err(|e| classify_io(url, &e))?;
    Ok(body)
}

/// Downloads each URL in order, paced to `rate_limit` requests per second.
///
/// Per-URL failures are reported in the result list; the whole fetch only
/// fails when the failure ratio crosses the configured threshold.
pub fn fetch_remote(urls: &[String], cfg: &FetchConfig) -> Result<Vec<Fetched>, FetchError> {
    if !(cfg.rate_limit > 0.0 && cfg.rate_limit.is_finite()) {
        return Err(FetchError::InvalidBudget);
    }
    let agent = ureq::AgentBuilder::new().timeout(cfg.timeout).build();
    let mut pacer = Pacer {
        start: Instant::now(),
        interval: Duration::from_secs_f64(1.0 / cfg.rate_limit),
        issued: 0,
    };
    let mut out = Vec::with_capacity(urls.len());
    let mut failed = 0;
    for (i, url) in urls.iter().enumerate() {
        let mut attempt = 0;
        let result = loop {
            pacer.wait();
            match get_once(&agent, url, cfg.prefix_bytes) {
                Err(e) if e.is_transient() && attempt < cfg.retries => attempt += 1,
                other => break other,
            }
        };
        if result.is_err() {
            failed += 1;
        }
        out.push(Fetched {
            url: url.clone(),
            result,
        });
        let attempted = i + 1;
        if attempted >= cfg.min_attempts
            && failed as f64 / attempted as f64 > cfg.max_failure_ratio
        {
            return Err(FetchError::TooManyFailures { failed, attempted });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_budget_is_rejected() {
        let cfg = FetchConfig {
            rate_limit: 0.0,
            ..FetchConfig::default()
        };
        assert_eq!(fetch_remote(&[], &cfg).unwrap_err(), FetchError::InvalidBudget);
    }

    #[test]
    fn unreachable_hosts_fail_per_item() {
        let cfg = FetchConfig {
            rate_limit: 1000.0,
            retries: 0,
            timeout: Duration::from_millis(500),
            ..FetchConfig::default()
        };
        // Port 9 on localhost is closed in the sandbox.
        let out = fetch_remote(&["http://127.0.0.1:9/x.jpg".to_string()], &cfg).unwrap();
        assert!(out[0].result.is_err());
    }
}
