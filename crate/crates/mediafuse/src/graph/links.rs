use crate::core::normalize_domain;

use super::{GraphError, Result, MAX_NEIGHBORS};

/// Extract the domains wrapped in `<s>...</s>` tags from a raw LLM reply.
///
/// Each tag body is normalized; duplicates are dropped preserving first
/// occurrence and the list is truncated to five entries. A reply with no
/// usable tag is an [`GraphError::EmptyResponse`].
pub fn parse_llm_response(text: &str) -> Result<Vec<String>> {
    let mut out: Vec<String> = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find("<s>") {
        let after = &rest[start + 3..];
        let Some(end) = after.find("</s>") else {
            break;
        };
        let body = &after[..end];
        if let Ok(domain) = normalize_domain(body) {
            if !out.contains(&domain) {
                out.push(domain);
            }
        }
        rest = &after[end + 4..];
    }
    if out.is_empty() {
        return Err(GraphError::EmptyResponse);
    }
    out.truncate(MAX_NEIGHBORS);
    Ok(out)
}

/// Article-link filter: keep URLs that live on `site_domain` itself and are
/// longer than 65 characters; order is preserved and duplicates dropped.
pub fn filter_article_links(links: &[String], site_domain: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for url in links {
        if url.len() <= 65 {
            continue;
        }
        let Ok(host) = normalize_domain(url) else {
            continue;
        };
        if host != site_domain {
            continue;
        }
        if !out.contains(url) {
            out.push(url.clone());
        }
    }
    out
}
