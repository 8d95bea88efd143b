//! Encyclopedia lookups over HTTP.

use std::time::Duration;

use comicforge_core::caption::{ProviderError, TermProvider};
use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use serde::Deserialize;

const TERM_ENCODE: &AsciiSet = &NON_ALPHANUMERIC.remove(b'_').remove(b'-').remove(b'.');

/// Queries a page-summary endpoint. A 404 means the term has no article.
pub struct HttpTermProvider {
    agent: ureq::Agent,
    template: String,
}

#[derive(Deserialize)]
struct Summary {
    #[serde(rename = "type", default)]
    kind: String,
    content_urls: Option<ContentUrls>,
}

#[derive(Deserialize)]
struct ContentUrls {
    desktop: Page,
}

#[derive(Deserialize)]
struct Page {
    page: String,
}

impl HttpTermProvider {
    /// `template` contains `{term}`.
    pub fn new(template: &str, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .user_agent("comicforge/0.1")
            .build()
            .into();
        HttpTermProvider { agent, template: template.to_string() }
    }

    pub fn url_for(&self, term: &str) -> String {
        let title = term.replace(' ', "_");
        self.template
            .replace("{term}", &utf8_percent_encode(&title, TERM_ENCODE).to_string())
    }
}

impl TermProvider for HttpTermProvider {
    fn lookup(&self, term: &str) -> Result<Option<String>, ProviderError> {
        let unavailable = |e: ureq::Error| ProviderError::Unavailable(e.to_string());
        let mut resp = self.agent.get(&self.url_for(term)).call().map_err(unavailable)?;
        match resp.status().as_u16() {
            404 => return Ok(None),
            200 => {}
            s => return Err(ProviderError::Unavailable(format!("status {s}"))),
        }
        let summary: Summary = resp.body_mut().read_json().map_err(unavailable)?;
        if summary.kind == "disambiguation" {
            return Ok(None);
        }
        Ok(summary.content_urls.map(|c| c.desktop.page))
    }
}
