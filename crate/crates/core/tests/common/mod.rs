#![allow(dead_code)]

use std::cell::{Cell, RefCell};
use std::path::PathBuf;
use std::rc::Rc;
use std::time::Duration;

pub mod checks;

use piostack::ingest::{Clock, HttpResponse, Transport, TransportError};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn bundled_corpus() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/pubmed_fixture.xml")
}

/// Virtual time shared by the clock and the transport.
#[derive(Clone, Default)]
pub struct VirtualClock(pub Rc<Cell<Duration>>);

impl Clock for VirtualClock {
    fn now(&self) -> Duration {
        self.0.get()
    }
    fn sleep(&mut self, d: Duration) {
        self.0.set(self.0.get() + d);
    }
}

pub enum Reply {
    Ok(Vec<u8>),
    Status(u16),
    Drop,
}

/// Replies to searches with a fixed history handle and to fetch pages by
/// `retstart`, optionally failing the first attempts of a page.
pub struct MockServer {
    pub clock: VirtualClock,
    pub count: u64,
    pub pages: Vec<Vec<u8>>,
    pub page_size: u64,
    /// (page index, number of failures, failure reply status or 0 = dropped connection)
    pub failures: Vec<(usize, usize, u16)>,
    pub log: Rc<RefCell<Vec<(Duration, String)>>>,
}

impl MockServer {
    pub fn new(clock: VirtualClock, count: u64, page_size: u64, pages: Vec<Vec<u8>>) -> Self {
        MockServer {
            clock,
            count,
            pages,
            page_size,
            failures: Vec::new(),
            log: Rc::default(),
        }
    }

    pub fn request_times(&self) -> Vec<Duration> {
        self.log.borrow().iter().map(|(t, _)| *t).collect()
    }

    fn reply(&mut self, url: &str) -> Reply {
        if url.contains("esearch.fcgi") {
            return Reply::Ok(esearch_xml(self.count).into_bytes());
        }
        let retstart: u64 = url
            .split(['?', '&'])
            .find_map(|kv| kv.strip_prefix("retstart="))
            .and_then(|v| v.parse().ok())
            .expect("fetch url carries retstart");
        let page = (retstart / self.page_size) as usize;
        let seen = self
            .log
            .borrow()
            .iter()
            .filter(|(_, u)| u.contains(&format!("retstart={retstart}&")))
            .count();
        for &(p, n, status) in &self.failures {
            if p == page && seen <= n {
                return if status == 0 {
                    Reply::Drop
                } else {
                    Reply::Status(status)
                };
            }
        }
        Reply::Ok(self.pages[page].clone())
    }
}

impl Transport for MockServer {
    fn get(&mut self, url: &str) -> Result<HttpResponse, TransportError> {
        self.log
            .borrow_mut()
            .push((self.clock.now(), url.to_string()));
        // each request takes 20 ms of virtual time
        self.clock
            .0
            .set(self.clock.0.get() + Duration::from_millis(20));
        match self.reply(url) {
            Reply::Ok(body) => Ok(HttpResponse { status: 200, body }),
            Reply::Status(status) => Ok(HttpResponse {
                status,
                body: b"error".to_vec(),
            }),
            Reply::Drop => Err(TransportError("connection reset".into())),
        }
    }
}

pub fn esearch_xml(count: u64) -> String {
    format!(
        "<?xml version=\"1.0\"?><eSearchResult><Count>{count}</Count><RetMax>0</RetMax><RetStart>0</RetStart>\
         <QueryKey>1</QueryKey><WebEnv>MCID_test</WebEnv><IdList/></eSearchResult>"
    )
}

pub fn one_article_page(pmid: u64) -> Vec<u8> {
    format!(
        "<?xml version=\"1.0\"?><PubmedArticleSet><PubmedArticle><MedlineCitation><PMID Version=\"1\">{pmid}</PMID>\
         <Article><Abstract><AbstractText Label=\"PATIENTS\">Twenty patients with asthma.</AbstractText></Abstract>\
         </Article></MedlineCitation></PubmedArticle></PubmedArticleSet>"
    )
    .into_bytes()
}
