//! HTML to `DomGraph`: parsing, content-root selection, pruning, main
//! image and reference text selection, and graph construction.

mod graph;
mod tags;
mod tree;

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

pub use graph::{
    build_graph, declared_size, excise_reference, extract_reference_text, select_main_image,
    DomGraph, DomNode, GraphOptions, ImageSize, NodeKind, Reference, ReferenceCandidate,
    ReferenceSource, ANCHOR_ATTR,
};
pub use tags::{TagGroup, TAG_GROUP_COUNT, TAG_GROUP_TABLE_VERSION};
pub use tree::{
    document_title, normalize_text, parse_html, prune_tree, select_content_root, Denylist, DomTree,
    TreeData, TreeId, TreeNode, DEFAULT_DENYLIST,
};

use crate::error::{Result, WiceError};

/// One crawled HTML document plus provenance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageRecord {
    pub page_id: String,
    pub site_id: String,
    pub url: String,
    pub html: Vec<u8>,
    pub language_hint: Option<String>,
}

/// Registrable domain of a URL, approximated without a public suffix list:
/// the last two host labels, or three for `*.co.uk`-style hosts.
pub fn site_id_from_url(url: &str) -> String {
    let rest = url.split_once("://").map_or(url, |(_, r)| r);
    let host = rest.split(['/', '?', '#']).next().unwrap_or("");
    let host = host.rsplit_once('@').map_or(host, |(_, h)| h);
    let host = host.split(':').next().unwrap_or("").to_ascii_lowercase();
    let labels: Vec<&str> = host.split('.').filter(|l| !l.is_empty()).collect();
    let keep = match labels.as_slice() {
        [.., second, tld]
            if tld.len() == 2 && ["co", "com", "org", "net", "gov", "ac", "edu"].contains(second) =>
        {
            3
        }
        _ => 2,
    };
    labels[labels.len().saturating_sub(keep)..].join(".")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreprocessOptions {
    pub denylist: Denylist,
    pub graph: GraphOptions,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        PreprocessOptions { denylist: Denylist::default(), graph: GraphOptions::default() }
    }
}

fn prepare(html: &[u8], options: &PreprocessOptions) -> Result<(Option<String>, DomTree, TreeId)> {
    let tree = parse_html(html)?;
    let title = document_title(&tree);
    let content = select_content_root(&tree);
    let pruned = prune_tree(&content, &options.denylist);
    let image = select_main_image(&pruned)?;
    Ok((title, pruned, image))
}

/// Full preprocessing of a training page. Pages without an image or a
/// reference text are rejected.
pub fn preprocess_page(page: &PageRecord, options: &PreprocessOptions) -> Result<DomGraph> {
    let (title, tree, image) = prepare(&page.html, options)?;
    let candidate = extract_reference_text(&tree, image)?;
    let (tree, image) = excise_reference(&tree, image, &candidate);
    let mut graph = build_graph(&tree, image, Some(candidate.reference()), options.graph);
    graph.page_id = page.page_id.clone();
    graph.site_id = page.site_id.clone();
    graph.title = title;
    Ok(graph)
}

/// Preprocessing for inference: a reference text is used (and excised)
/// when present, but its absence is not an error.
pub fn preprocess_unlabeled(
    page_id: &str,
    html: &[u8],
    options: &PreprocessOptions,
) -> Result<DomGraph> {
    let (title, tree, image) = prepare(html, options)?;
    let mut graph = match extract_reference_text(&tree, image) {
        Ok(candidate) => {
            let (tree, image) = excise_reference(&tree, image, &candidate);
            build_graph(&tree, image, Some(candidate.reference()), options.graph)
        }
        Err(WiceError::NoReferenceText) => build_graph(&tree, image, None, options.graph),
        Err(e) => return Err(e),
    };
    graph.page_id = page_id.to_string();
    graph.title = title;
    Ok(graph)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub page_id: String,
    pub site_id: String,
    pub url: String,
}

/// Read a tab-separated `page_id, site_id, url` manifest. An empty
/// `site_id` column is derived from the URL.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let file = fs::File::open(path).map_err(|e| WiceError::io(path, e))?;
    let mut entries = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| WiceError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let [page_id, site_id, url] = cols.as_slice() else {
            return Err(WiceError::parse(path.display().to_string(), i + 1, "expected 3 tab-separated columns"));
        };
        let site_id = if site_id.is_empty() { site_id_from_url(url) } else { site_id.to_string() };
        entries.push(ManifestEntry { page_id: page_id.to_string(), site_id, url: url.to_string() });
    }
    Ok(entries)
}

pub fn write_manifest(out: &mut impl Write, entries: &[ManifestEntry]) -> std::io::Result<()> {
    for e in entries {
        writeln!(out, "{}\t{}\t{}", e.page_id, e.site_id, e.url)?;
    }
    Ok(())
}

/// Load `{page_id}.html` from a corpus directory.
pub fn load_page(corpus_dir: &Path, entry: &ManifestEntry) -> Result<PageRecord> {
    let path = corpus_dir.join(format!("{}.html", entry.page_id));
    let html = fs::read(&path).map_err(|e| WiceError::io(&path, e))?;
    Ok(PageRecord {
        page_id: entry.page_id.clone(),
        site_id: entry.site_id.clone(),
        url: entry.url.clone(),
        html,
        language_hint: None,
    })
}

/// One JSON record per line.
pub fn write_graphs(out: &mut impl Write, graphs: &[DomGraph]) -> std::io::Result<()> {
    for g in graphs {
        serde_json::to_writer(&mut *out, g)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_graphs(path: &Path) -> Result<Vec<DomGraph>> {
    let file = fs::File::open(path).map_err(|e| WiceError::io(path, e))?;
    let mut graphs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| WiceError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let graph: DomGraph = serde_json::from_str(&line)
            .map_err(|e| WiceError::parse(path.display().to_string(), i + 1, e.to_string()))?;
        graph
            .validate()
            .map_err(|m| WiceError::parse(path.display().to_string(), i + 1, m))?;
        graphs.push(graph);
    }
    Ok(graphs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn page(html: &str) -> PageRecord {
        PageRecord {
            page_id: "p".into(),
            site_id: "s".into(),
            url: "https://s.example/p".into(),
            html: html.as_bytes().to_vec(),
            language_hint: None,
        }
    }

    #[test]
    fn site_ids() {
        assert_eq!(site_id_from_url("https://www.lemonde.fr/a/b.html"), "lemonde.fr");
        assert_eq!(site_id_from_url("http://news.bbc.co.uk:8080/x"), "bbc.co.uk");
        assert_eq!(site_id_from_url("example.org"), "example.org");
    }

    #[test]
    fn full_pipeline() {
        let html = r#"<html><head><title>Doc title</title></head><body><nav>menu</nav>
            <article><h1>Headline here</h1><figure><img src=x width=10 height=10>
            <figcaption>A caption text</figcaption></figure><p>Body paragraph</p>
            <button>Click</button></article></body></html>"#;
        let g = preprocess_page(&page(html), &PreprocessOptions::default()).unwrap();
        g.validate().unwrap();
        assert_eq!(g.title.as_deref(), Some("Doc title"));
        assert_eq!(g.reference_text(), Some("A caption text"));
        let texts: Vec<_> = g.nodes.iter().filter_map(|n| n.text.as_deref()).collect();
        assert_eq!(texts, ["Headline here", "Body paragraph"]);
        assert_eq!(g.nodes[0].raw_tag, "article");
    }

    #[test]
    fn rejects_pages_without_reference() {
        let html = "<body><img src=x><p>text here</p></body>";
        assert!(matches!(
            preprocess_page(&page(html), &PreprocessOptions::default()),
            Err(WiceError::NoReferenceText)
        ));
        let g = preprocess_unlabeled("p", html.as_bytes(), &PreprocessOptions::default()).unwrap();
        assert!(g.reference.is_none());
        g.validate().unwrap();
    }

    #[test]
    fn deterministic_output() {
        let html = r#"<body><div><img alt="x y" width=5 height=5><p>one two</p><span>three</span></div></body>"#;
        let a = preprocess_page(&page(html), &PreprocessOptions::default()).unwrap();
        let b = preprocess_page(&page(html), &PreprocessOptions::default()).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
