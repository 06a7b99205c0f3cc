use std::collections::HashSet;

use quick_xml::errors::{Error as QxError, SyntaxError};
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::{History, RawAbstract, RawSection};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum XmlError {
    #[error("malformed XML at byte {offset}: {message}")]
    Malformed { offset: u64, message: String },
    #[error("truncated XML stream at byte {offset}: {message}")]
    Truncated { offset: u64, message: String },
    #[error("PubmedArticle ending at byte {offset} has no MedlineCitation/PMID")]
    MissingPmid { offset: u64 },
    #[error("esearch response is missing <{0}>")]
    MissingField(&'static str),
}

/// Output of one parsed `PubmedArticleSet` payload.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct ParsedBatch {
    pub abstracts: Vec<RawAbstract>,
    /// `PubmedArticle` elements seen.
    pub articles: usize,
    /// Articles without an `Abstract` (or with only empty `AbstractText`).
    pub skipped_without_abstract: usize,
    /// Articles dropped because their PMID was already seen in this batch.
    pub duplicate_pmids: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchResult {
    pub count: u64,
    pub history: History,
}

#[derive(Default)]
struct ArticleState {
    pmid: Option<u64>,
    has_abstract: bool,
    labeled: bool,
    sections: Vec<RawSection>,
}

struct SectionState {
    heading: Option<String>,
    nlm_category: Option<String>,
    body: String,
    depth: usize,
}

fn truncated_or_malformed(err: QxError, offset: u64) -> XmlError {
    let message = err.to_string();
    match err {
        QxError::Syntax(
            SyntaxError::UnclosedTag
            | SyntaxError::UnclosedComment
            | SyntaxError::UnclosedCData
            | SyntaxError::UnclosedDoctype
            | SyntaxError::UnclosedPIOrXmlDecl
            | SyntaxError::InvalidBangMarkup,
        ) => XmlError::Truncated { offset, message },
        _ => XmlError::Malformed { offset, message },
    }
}

fn attr(e: &BytesStart<'_>, name: &[u8], offset: u64) -> Result<Option<String>, XmlError> {
    for a in e.attributes() {
        let a = a.map_err(|err| XmlError::Malformed {
            offset,
            message: err.to_string(),
        })?;
        if a.key.as_ref() == name {
            let v = a.unescape_value().map_err(|err| XmlError::Malformed {
                offset,
                message: err.to_string(),
            })?;
            return Ok(Some(v.into_owned()));
        }
    }
    Ok(None)
}

/// Parse a `PubmedArticleSet` payload.
///
/// One [`RawAbstract`] is produced per `PubmedArticle` with an `Abstract`;
/// each `AbstractText` child becomes a section whose heading is its `Label`
/// attribute verbatim (empty when absent). Inline markup inside
/// `AbstractText` contributes its text.
pub fn parse_pubmed_xml(payload: &[u8]) -> Result<ParsedBatch, XmlError> {
    let mut reader = Reader::from_reader(payload);
    reader.config_mut().check_end_names = true;

    let mut batch = ParsedBatch::default();
    let mut seen = HashSet::new();
    let mut path: Vec<Vec<u8>> = Vec::new();
    let mut article: Option<ArticleState> = None;
    let mut section: Option<SectionState> = None;
    let mut pmid_text: Option<String> = None;
    let mut buf = Vec::new();

    loop {
        buf.clear();
        let offset = reader.buffer_position();
        let event = reader
            .read_event_into(&mut buf)
            .map_err(|e| truncated_or_malformed(e, reader.error_position()))?;
        match event {
            Event::Start(e) => {
                let name = e.name().as_ref().to_vec();
                let parent = path.last().map(Vec::as_slice);
                if let Some(s) = section.as_mut() {
                    s.depth += 1;
                } else {
                    match (name.as_slice(), parent) {
                        (b"PubmedArticle", _) => article = Some(ArticleState::default()),
                        (b"PMID", Some(b"MedlineCitation")) => {
                            if article.as_ref().is_some_and(|a| a.pmid.is_none()) {
                                pmid_text = Some(String::new());
                            }
                        }
                        (b"Abstract", Some(b"Article")) => {
                            if let Some(a) = article.as_mut() {
                                a.has_abstract = true;
                            }
                        }
                        (b"AbstractText", Some(b"Abstract")) if article.is_some() => {
                            section = Some(SectionState {
                                heading: attr(&e, b"Label", offset)?,
                                nlm_category: attr(&e, b"NlmCategory", offset)?,
                                body: String::new(),
                                depth: 0,
                            });
                        }
                        _ => {}
                    }
                }
                path.push(name);
            }
            Event::Empty(e) => {
                // <AbstractText Label="X"/> carries no body and is dropped.
                if e.name().as_ref() == b"Abstract"
                    && path.last().map(Vec::as_slice) == Some(b"Article")
                {
                    if let Some(a) = article.as_mut() {
                        a.has_abstract = true;
                    }
                }
            }
            Event::Text(t) => {
                let text = t.unescape().map_err(|err| XmlError::Malformed {
                    offset: reader.buffer_position(),
                    message: err.to_string(),
                })?;
                if let Some(s) = section.as_mut() {
                    s.body.push_str(&text);
                } else if let Some(p) = pmid_text.as_mut() {
                    p.push_str(&text);
                }
            }
            Event::CData(c) => {
                let text = String::from_utf8_lossy(&c);
                if let Some(s) = section.as_mut() {
                    s.body.push_str(&text);
                }
            }
            Event::End(e) => {
                path.pop();
                if let Some(s) = section.as_mut() {
                    if s.depth > 0 {
                        s.depth -= 1;
                        continue;
                    }
                    let s = section.take().expect("section open");
                    let body = s.body.trim().to_string();
                    if let (false, Some(a)) = (body.is_empty(), article.as_mut()) {
                        // Label presence, not content, marks structure.
                        a.labeled |= s.heading.is_some();
                        a.sections.push(RawSection {
                            heading: s.heading.unwrap_or_default(),
                            nlm_category: s.nlm_category,
                            body,
                        });
                    }
                    continue;
                }
                match e.name().as_ref() {
                    b"PMID" => {
                        if let (Some(text), Some(a)) = (pmid_text.take(), article.as_mut()) {
                            let pmid = text.trim().parse().map_err(|_| XmlError::Malformed {
                                offset: reader.buffer_position(),
                                message: format!("non-numeric PMID {:?}", text.trim()),
                            })?;
                            a.pmid = Some(pmid);
                        }
                    }
                    b"PubmedArticle" => {
                        let a = article.take().unwrap_or_default();
                        batch.articles += 1;
                        let pmid = a.pmid.ok_or(XmlError::MissingPmid {
                            offset: reader.buffer_position(),
                        })?;
                        if !a.has_abstract || a.sections.is_empty() {
                            batch.skipped_without_abstract += 1;
                        } else if !seen.insert(pmid) {
                            batch.duplicate_pmids += 1;
                        } else {
                            batch.abstracts.push(RawAbstract {
                                pmid,
                                is_structured: a.labeled,
                                sections: a.sections,
                            });
                        }
                    }
                    _ => {}
                }
            }
            Event::Eof => {
                if let Some(open) = path.last() {
                    return Err(XmlError::Truncated {
                        offset: reader.buffer_position(),
                        message: format!("stream ended inside <{}>", String::from_utf8_lossy(open)),
                    });
                }
                break;
            }
            _ => {}
        }
    }
    Ok(batch)
}

/// Extract `Count`, `QueryKey` and `WebEnv` from an `eSearchResult`.
pub fn parse_esearch_xml(payload: &[u8]) -> Result<SearchResult, XmlError> {
    let mut reader = Reader::from_reader(payload);
    let mut buf = Vec::new();
    let mut depth = 0usize;
    let mut current: Option<Vec<u8>> = None;
    let (mut count, mut key, mut env) = (None, None, None);
    loop {
        match reader
            .read_event_into(&mut buf)
            .map_err(|e| truncated_or_malformed(e, reader.error_position()))?
        {
            Event::Start(e) => {
                depth += 1;
                // Only direct children of eSearchResult; TranslationStack
                // also contains <Count>.
                current = (depth == 2).then(|| e.name().as_ref().to_vec());
            }
            Event::End(_) => {
                depth = depth.saturating_sub(1);
                current = None;
            }
            Event::Text(t) => {
                let text = t.unescape().map_err(|err| XmlError::Malformed {
                    offset: reader.buffer_position(),
                    message: err.to_string(),
                })?;
                match current.as_deref() {
                    Some(b"Count") => count = text.trim().parse::<u64>().ok(),
                    Some(b"QueryKey") => key = Some(text.trim().to_string()),
                    Some(b"WebEnv") => env = Some(text.trim().to_string()),
                    _ => {}
                }
            }
            Event::Eof => {
                if depth > 0 {
                    return Err(XmlError::Truncated {
                        offset: reader.buffer_position(),
                        message: "esearch response ended early".into(),
                    });
                }
                break;
            }
            _ => {}
        }
        buf.clear();
    }
    Ok(SearchResult {
        count: count.ok_or(XmlError::MissingField("Count"))?,
        history: History {
            query_key: key.ok_or(XmlError::MissingField("QueryKey"))?,
            web_env: env.ok_or(XmlError::MissingField("WebEnv"))?,
        },
    })
}
