use std::collections::HashSet;
use std::time::{Duration, Instant};

use tracing::{info, warn};

use super::xml::{parse_esearch_xml, parse_pubmed_xml, XmlError};
use super::{plan_fetch, IngestError, RawAbstract, RequestDescriptor, RequestKind, SearchSpec};

/// Retries after the first attempt of any request.
pub const MAX_RETRIES: usize = 3;
/// Sleep before retry 1, 2 and 3.
pub const BACKOFF_SCHEDULE: [Duration; MAX_RETRIES] = [
    Duration::from_secs(1),
    Duration::from_secs(2),
    Duration::from_secs(4),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: Vec<u8>,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
#[error("{0}")]
pub struct TransportError(pub String);

/// Issues a single GET. Implementations must not retry or sleep.
pub trait Transport {
    fn get(&mut self, url: &str) -> Result<HttpResponse, TransportError>;
}

/// Monotonic time source; injectable so tests can run on virtual time.
pub trait Clock {
    fn now(&self) -> Duration;
    fn sleep(&mut self, d: Duration);
}

#[derive(Debug)]
pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock {
            origin: Instant::now(),
        }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep(&mut self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Enforces a minimum gap between consecutive outbound requests.
#[derive(Debug, Default)]
pub struct Pacer {
    last: Option<Duration>,
}

impl Pacer {
    pub fn wait(&mut self, clock: &mut dyn Clock, min_delay: Duration) {
        if let Some(last) = self.last {
            let elapsed = clock.now().saturating_sub(last);
            if elapsed < min_delay {
                clock.sleep(min_delay - elapsed);
            }
        }
        self.last = Some(clock.now());
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FetchError {
    #[error(transparent)]
    Config(#[from] IngestError),
    #[error("{what} failed after {attempts} attempts: {reason}")]
    Exhausted {
        what: String,
        attempts: usize,
        reason: String,
    },
    #[error("{what} returned HTTP {status}")]
    Status { what: String, status: u16 },
    #[error("{what}: {source}")]
    Parse {
        what: String,
        #[source]
        source: XmlError,
    },
    #[error("sink rejected record {pmid}: {message}")]
    Sink { pmid: u64, message: String },
}

#[derive(Debug, Default, Clone, PartialEq, Eq, serde::Serialize)]
pub struct FetchSummary {
    /// Records delivered to the sink.
    pub fetched: usize,
    /// Articles without an abstract.
    pub skipped: usize,
    /// Fetch pages requested (the search request is not a page).
    pub pages: usize,
    /// Delivered records that are not structured (kept for counting; the
    /// labeler discards them).
    pub unstructured: usize,
    pub duplicates: usize,
    pub retries: usize,
    /// Result-set size reported by the search.
    pub count: u64,
}

struct Requester<'a> {
    transport: &'a mut dyn Transport,
    clock: &'a mut dyn Clock,
    pacer: Pacer,
    retries: usize,
}

impl Requester<'_> {
    fn request(
        &mut self,
        url: &str,
        what: &str,
        min_delay: Duration,
    ) -> Result<Vec<u8>, FetchError> {
        let mut attempt = 0;
        loop {
            self.pacer.wait(self.clock, min_delay);
            let reason = match self.transport.get(url) {
                Ok(resp) if resp.status == 200 => return Ok(resp.body),
                Ok(resp) if resp.status == 429 || resp.status >= 500 => {
                    format!("HTTP {}", resp.status)
                }
                Ok(resp) => {
                    return Err(FetchError::Status {
                        what: what.to_string(),
                        status: resp.status,
                    })
                }
                Err(e) => e.0,
            };
            if attempt == MAX_RETRIES {
                return Err(FetchError::Exhausted {
                    what: what.to_string(),
                    attempts: attempt + 1,
                    reason,
                });
            }
            let backoff = BACKOFF_SCHEDULE[attempt];
            warn!(%what, %reason, retry = attempt + 1, ?backoff, "request failed, backing off");
            self.clock.sleep(backoff);
            self.retries += 1;
            attempt += 1;
        }
    }
}

/// Run the search, then stream every page through the XML parser into
/// `sink`. Requests are strictly sequential and paced.
pub fn fetch_corpus(
    spec: &SearchSpec,
    base_url: &str,
    transport: &mut dyn Transport,
    clock: &mut dyn Clock,
    sink: &mut dyn FnMut(RawAbstract) -> Result<(), String>,
) -> Result<FetchSummary, FetchError> {
    spec.validate()?;
    let mut req = Requester {
        transport,
        clock,
        pacer: Pacer::default(),
        retries: 0,
    };
    let search = RequestDescriptor {
        kind: RequestKind::Search,
        min_delay: spec.min_delay(),
    };
    let body = req.request(
        &search.url(base_url, spec, None),
        "search",
        search.min_delay,
    )?;
    let result = parse_esearch_xml(&body).map_err(|source| FetchError::Parse {
        what: "search".into(),
        source,
    })?;
    info!(count = result.count, "search complete");

    let mut summary = FetchSummary {
        count: result.count,
        ..FetchSummary::default()
    };
    let plan = plan_fetch(spec, result.count)?;
    // PMIDs already delivered; a record repeated on a later page is dropped.
    let mut seen = HashSet::new();
    for (page_no, desc) in plan.iter().skip(1).enumerate() {
        let what = format!("page {}", page_no + 1);
        let url = desc.url(base_url, spec, Some(&result.history));
        let body = req.request(&url, &what, desc.min_delay)?;
        let batch = parse_pubmed_xml(&body).map_err(|source| FetchError::Parse {
            what: what.clone(),
            source,
        })?;
        summary.pages += 1;
        summary.skipped += batch.skipped_without_abstract;
        summary.duplicates += batch.duplicate_pmids;
        for a in batch.abstracts {
            let pmid = a.pmid;
            if !seen.insert(pmid) {
                warn!(pmid, "PMID repeated across pages; keeping the first");
                summary.duplicates += 1;
                continue;
            }
            summary.unstructured += usize::from(!a.is_structured);
            sink(a).map_err(|message| FetchError::Sink { pmid, message })?;
            summary.fetched += 1;
        }
    }
    summary.retries = req.retries;
    Ok(summary)
}
