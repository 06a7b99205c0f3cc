//! PubMed E-utilities ingestion: request planning, paced fetching with
//! retries, and parsing of `PubmedArticleSet` XML into [`RawAbstract`]s.

use std::collections::BTreeSet;
use std::time::Duration;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

mod fetch;
mod http;
mod xml;

pub use fetch::{
    fetch_corpus, Clock, FetchError, FetchSummary, HttpResponse, Pacer, SystemClock, Transport,
    TransportError, BACKOFF_SCHEDULE, MAX_RETRIES,
};
pub use http::UreqTransport;
pub use xml::{parse_esearch_xml, parse_pubmed_xml, ParsedBatch, SearchResult, XmlError};

/// E-utilities `retmax` hard limit.
pub const MAX_PAGE_SIZE: u32 = 10_000;
/// Minimum spacing between requests without an API key (3 requests/second).
pub const DEFAULT_MIN_DELAY: Duration = Duration::from_millis(334);
/// Minimum spacing with `NCBI_API_KEY` set (10 requests/second).
pub const API_KEY_MIN_DELAY: Duration = Duration::from_millis(100);

pub const EUTILS_BASE: &str = "https://eutils.ncbi.nlm.nih.gov/entrez/eutils";

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum IngestError {
    #[error("invalid page_size {0}: must be in 1..={MAX_PAGE_SIZE}")]
    PageSize(u32),
    #[error("empty query")]
    EmptyQuery,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Filter {
    ClinicalTrial,
    Humans,
    English,
}

impl Filter {
    pub const ALL: [Filter; 3] = [Filter::ClinicalTrial, Filter::Humans, Filter::English];

    fn term(self) -> &'static str {
        match self {
            Filter::ClinicalTrial => "clinical trial[pt]",
            Filter::Humans => "humans[mh]",
            Filter::English => "english[la]",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchSpec {
    pub query_terms: String,
    pub filters: BTreeSet<Filter>,
    pub date_cutoff: Option<NaiveDate>,
    pub page_size: u32,
    pub api_key: Option<String>,
}

impl SearchSpec {
    /// A search with all three default filters and the largest page size.
    pub fn new(query_terms: impl Into<String>) -> Self {
        SearchSpec {
            query_terms: query_terms.into(),
            filters: Filter::ALL.into_iter().collect(),
            date_cutoff: None,
            page_size: MAX_PAGE_SIZE,
            api_key: None,
        }
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if self.page_size == 0 || self.page_size > MAX_PAGE_SIZE {
            return Err(IngestError::PageSize(self.page_size));
        }
        if self.query_terms.trim().is_empty() {
            return Err(IngestError::EmptyQuery);
        }
        Ok(())
    }

    /// Full `term=` value: the user query ANDed with every filter.
    pub fn term(&self) -> String {
        let mut term = format!("({})", self.query_terms.trim());
        for f in &self.filters {
            term.push_str(" AND ");
            term.push_str(f.term());
        }
        term
    }

    pub fn min_delay(&self) -> Duration {
        if self.api_key.is_some() {
            API_KEY_MIN_DELAY
        } else {
            DEFAULT_MIN_DELAY
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct RawSection {
    pub heading: String,
    pub nlm_category: Option<String>,
    pub body: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct RawAbstract {
    pub pmid: u64,
    pub is_structured: bool,
    pub sections: Vec<RawSection>,
}

/// Result-set handle returned by `esearch` with `usehistory=y`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct History {
    pub web_env: String,
    pub query_key: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RequestKind {
    Search,
    Fetch { retstart: u64, retmax: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestDescriptor {
    pub kind: RequestKind,
    pub min_delay: Duration,
}

impl RequestDescriptor {
    /// Build the request URL. Fetch requests need the history handle from
    /// the preceding search.
    pub fn url(&self, base: &str, spec: &SearchSpec, history: Option<&History>) -> String {
        let mut params: Vec<(&str, String)> = vec![("db", "pubmed".into())];
        match &self.kind {
            RequestKind::Search => {
                params.push(("term", spec.term()));
                params.push(("usehistory", "y".into()));
                params.push(("retmax", "0".into()));
                if let Some(date) = spec.date_cutoff {
                    params.push(("datetype", "pdat".into()));
                    params.push(("mindate", "1800/01/01".into()));
                    params.push(("maxdate", date.format("%Y/%m/%d").to_string()));
                }
            }
            RequestKind::Fetch { retstart, retmax } => {
                if let Some(h) = history {
                    params.push(("query_key", h.query_key.clone()));
                    params.push(("WebEnv", h.web_env.clone()));
                }
                params.push(("retstart", retstart.to_string()));
                params.push(("retmax", retmax.to_string()));
            }
        }
        params.push(("retmode", "xml".into()));
        if let Some(key) = &spec.api_key {
            params.push(("api_key", key.clone()));
        }
        let endpoint = match self.kind {
            RequestKind::Search => "esearch.fcgi",
            RequestKind::Fetch { .. } => "efetch.fcgi",
        };
        let query: Vec<String> = params
            .into_iter()
            .map(|(k, v)| format!("{k}={}", percent_encode(&v)))
            .collect();
        format!(
            "{}/{endpoint}?{}",
            base.trim_end_matches('/'),
            query.join("&")
        )
    }
}

fn percent_encode(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => {
                out.push(b as char)
            }
            b' ' => out.push('+'),
            _ => out.push_str(&format!("%{b:02X}")),
        }
    }
    out
}

/// The search descriptor followed by fetch pages covering `[0, count)`.
pub fn plan_fetch(spec: &SearchSpec, count: u64) -> Result<Vec<RequestDescriptor>, IngestError> {
    spec.validate()?;
    let min_delay = spec.min_delay();
    let page = u64::from(spec.page_size);
    let mut plan = vec![RequestDescriptor {
        kind: RequestKind::Search,
        min_delay,
    }];
    let mut start = 0;
    while start < count {
        plan.push(RequestDescriptor {
            kind: RequestKind::Fetch {
                retstart: start,
                retmax: spec.page_size,
            },
            min_delay,
        });
        start += page;
    }
    Ok(plan)
}
