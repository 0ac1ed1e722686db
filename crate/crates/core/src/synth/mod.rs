//! Synthetic news-like corpora with a planted context paragraph.
//!
//! Every page has one large figure whose caption is the reference text and
//! one paragraph, marked with [`ANCHOR_ATTR`]` = "ctx"`, that repeats most
//! of the caption's key words. Sites differ in layout, in the element that
//! wraps the planted paragraph, in the marker words their captions use and
//! in their boilerplate, so models trained on some sites transfer only
//! partly to others.

mod words;

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dom_graph::{site_id_from_url, write_manifest, ManifestEntry, PageRecord, ANCHOR_ATTR};
use crate::error::{Result, WiceError};
use words::*;

/// Anchor value of the planted paragraph.
pub const CONTEXT_ANCHOR: &str = "ctx";

pub const MANIFEST_FILE: &str = "manifest.tsv";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.tsv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// Planted paragraph right after the figure.
    CaptionAdjacent,
    /// Planted paragraph several paragraphs below the figure.
    CaptionFar,
    /// Extra boilerplate blocks around the figure and the planted paragraph.
    BoilerplateHeavy,
}

/// Markup around the planted paragraph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Wrapper {
    Paragraph,
    DivParagraph,
    SectionParagraph,
    Blockquote,
    DivSpan,
    ParagraphStrong,
    ListItem,
}

impl Wrapper {
    const ALL: [Wrapper; 7] = [
        Wrapper::Paragraph,
        Wrapper::DivParagraph,
        Wrapper::SectionParagraph,
        Wrapper::Blockquote,
        Wrapper::DivSpan,
        Wrapper::ParagraphStrong,
        Wrapper::ListItem,
    ];

    fn render(self, text: &str) -> String {
        let a = format!("{ANCHOR_ATTR}=\"{CONTEXT_ANCHOR}\"");
        match self {
            Wrapper::Paragraph => format!("<p {a}>{text}</p>"),
            Wrapper::DivParagraph => format!("<div {a} class=\"lede\"><p>{text}</p></div>"),
            Wrapper::SectionParagraph => format!("<section {a}><p>{text}</p></section>"),
            Wrapper::Blockquote => format!("<blockquote {a}><p>{text}</p></blockquote>"),
            Wrapper::DivSpan => format!("<div {a}><span>{text}</span></div>"),
            Wrapper::ParagraphStrong => format!("<p {a}><strong>{text}</strong></p>"),
            Wrapper::ListItem => format!("<ul {a}><li>{text}</li></ul>"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContentRoot {
    Main,
    Article,
    Body,
}

/// Everything shared by the pages of one site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateSpec {
    pub template_id: String,
    pub site_name: String,
    pub domain: String,
    pub layout: Layout,
    pub wrapper: Wrapper,
    pub root: ContentRoot,
    /// Inclusive range of body paragraphs per page.
    pub paragraphs: (usize, usize),
    /// Topic indices used for off-topic paragraphs.
    pub distractor_topics: Vec<usize>,
    /// Marker words shared by captions and planted paragraphs.
    pub registers: Vec<String>,
    pub boilerplate: Vec<String>,
    /// Probability of a photo credit inside the figure.
    pub credit_rate: f64,
    pub seed: u64,
}

pub fn topic_count() -> usize {
    TOPICS.len()
}

pub fn topic_name(i: usize) -> &'static str {
    TOPICS[i % TOPICS.len()].0
}

fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The `n_sites` site templates of a corpus.
pub fn site_templates(n_sites: usize, seed: u64) -> Vec<TemplateSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, 0x5173));
    let mut names: Vec<(usize, usize)> =
        (0..SITE_PREFIXES.len()).flat_map(|a| (0..SITE_SUFFIXES.len()).map(move |b| (a, b))).collect();
    names.shuffle(&mut rng);
    (0..n_sites)
        .map(|i| {
            let (a, b) = names[i % names.len()];
            let round = i / names.len();
            let stem = format!("{}{}", SITE_PREFIXES[a], SITE_SUFFIXES[b]);
            let stem = if round == 0 { stem } else { format!("{stem}{round}") };
            let mut site_name = format!("{} {}", capitalize(SITE_PREFIXES[a]), capitalize(SITE_SUFFIXES[b]));
            if round > 0 {
                site_name.push_str(&format!(" {round}"));
            }
            let domain = format!("{stem}.{}", TLDS.choose(&mut rng).unwrap());
            let layout = [Layout::CaptionAdjacent, Layout::CaptionFar, Layout::BoilerplateHeavy][i % 3];
            let wrapper = *Wrapper::ALL.choose(&mut rng).unwrap();
            let root = *[ContentRoot::Main, ContentRoot::Article, ContentRoot::Body].choose(&mut rng).unwrap();
            let lo = rng.gen_range(2..=4);
            let hi = lo + rng.gen_range(1..=3);
            let mut topics: Vec<usize> = (0..TOPICS.len()).collect();
            topics.shuffle(&mut rng);
            let registers = REGISTERS.choose_multiple(&mut rng, 3).map(|s| s.to_string()).collect();
            let mut boilerplate: Vec<String> = BOILERPLATE.choose_multiple(&mut rng, 4).map(|s| s.to_string()).collect();
            boilerplate.push(format!("more from the {}", site_name.to_lowercase()));
            TemplateSpec {
                template_id: site_id_from_url(&format!("https://www.{domain}/")),
                site_name,
                domain,
                layout,
                wrapper,
                root,
                paragraphs: (lo, hi),
                distractor_topics: topics[..4].to_vec(),
                registers,
                boilerplate,
                credit_rate: rng.gen_range(0.5..1.0),
                seed: mix(seed, i as u64 + 1),
            }
        })
        .collect()
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn sentence(rng: &mut ChaCha8Rng, content: &[&str]) -> String {
    let mut out = Vec::with_capacity(content.len() * 2);
    for (i, w) in content.iter().enumerate() {
        out.push(*w);
        if i + 1 < content.len() && rng.gen_bool(0.45) {
            out.push(FILLER.choose(rng).unwrap());
        }
    }
    let mut s = capitalize(&out.join(" "));
    s.push('.');
    s
}

/// One generated page and the anchor of its planted paragraph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedPage {
    pub record: PageRecord,
    pub topic: String,
    pub anchor: String,
}

/// Build one page. A pure function of its arguments.
pub fn generate_page(spec: &TemplateSpec, page_id: &str, topic: usize, seed: u64) -> GeneratedPage {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(spec.seed, seed));
    let (topic_name, pool) = TOPICS[topic % TOPICS.len()];
    let mut words: Vec<&str> = pool.to_vec();
    words.shuffle(&mut rng);
    let (key, rest) = words.split_at(6);
    let mut rest = rest.to_vec();
    let register = spec.registers[rng.gen_range(0..spec.registers.len())].as_str();

    // Caption: a marker word and six key words.
    let mut caption_words = vec![register];
    caption_words.extend(key);
    let caption = sentence(&mut rng, &caption_words);

    // Planted paragraph: most key words, usually the same marker word.
    let overlap = rng.gen_range(3..=6);
    let mut planted_words: Vec<&str> = key.choose_multiple(&mut rng, overlap).copied().collect();
    let own_register = if rng.gen_bool(0.85) {
        register
    } else {
        spec.registers[rng.gen_range(0..spec.registers.len())].as_str()
    };
    planted_words.push(own_register);
    for _ in 0..rng.gen_range(3..=5) {
        planted_words.push(rest.pop().unwrap());
    }
    planted_words.push(VERBS.choose(&mut rng).unwrap());
    planted_words.shuffle(&mut rng);
    let planted = sentence(&mut rng, &planted_words);

    let headline_words: Vec<&str> =
        vec![rest.pop().unwrap(), rest.pop().unwrap(), VERBS.choose(&mut rng).unwrap(), rest.pop().unwrap()];
    let headline = sentence(&mut rng, &headline_words).trim_end_matches('.').to_string();

    let n_body = rng.gen_range(spec.paragraphs.0..=spec.paragraphs.1);
    let mut body = Vec::with_capacity(n_body);
    for _ in 0..n_body {
        let len = rng.gen_range(5..=8);
        let mut ws: Vec<&str> = rest.choose_multiple(&mut rng, len).copied().collect();
        ws.push(VERBS.choose(&mut rng).unwrap());
        if rng.gen_bool(0.12) {
            ws.push(key.choose(&mut rng).unwrap());
        }
        ws.shuffle(&mut rng);
        body.push(sentence(&mut rng, &ws));
    }

    let mut distractors = Vec::new();
    let candidates: Vec<usize> = spec.distractor_topics.iter().copied().filter(|&t| t != topic % TOPICS.len()).collect();
    for _ in 0..rng.gen_range(2..=3) {
        let other = TOPICS[*candidates.choose(&mut rng).unwrap()].1;
        let len = rng.gen_range(5..=8);
        let mut ws: Vec<&str> = other.choose_multiple(&mut rng, len).copied().collect();
        if rng.gen_bool(0.3) {
            ws.push(spec.registers.choose(&mut rng).unwrap());
        }
        ws.shuffle(&mut rng);
        distractors.push(sentence(&mut rng, &ws));
    }

    let author = format!("{} {}", capitalize(FIRST_NAMES.choose(&mut rng).unwrap()), capitalize(LAST_NAMES.choose(&mut rng).unwrap()));
    let credit = format!("Photo {} / {}", AGENCIES.choose(&mut rng).unwrap(), author);
    let alt = if rng.gen_bool(0.5) { String::new() } else { topic_name.to_string() };
    let slug = headline.to_lowercase().replace(' ', "-");
    let url = format!("https://www.{}/{}/{slug}-{page_id}.html", spec.domain, 2000 + rng.gen_range(10..25));

    let mut figure = format!(
        "<figure><img src=\"/media/{page_id}.jpg\" width=\"{}\" height=\"{}\" alt=\"{alt}\"><figcaption>{caption}</figcaption>",
        rng.gen_range(640..1200),
        rng.gen_range(360..800)
    );
    if rng.gen_bool(spec.credit_rate) {
        let _ = write!(figure, "<span class=\"credit\">{credit}</span>");
    }
    figure.push_str("</figure>");

    let boiler = |rng: &mut ChaCha8Rng| -> String {
        format!("<div class=\"promo\">{}</div>", spec.boilerplate.choose(rng).unwrap())
    };
    let para = |t: &String| format!("<p>{t}</p>");
    let planted_html = spec.wrapper.render(&planted);

    let mut blocks: Vec<String> = Vec::new();
    blocks.push(format!("<h1>{headline}</h1>"));
    blocks.push(format!("<div class=\"byline\"><span>By {author}</span><time>{} {}</time></div>", rng.gen_range(1..29), ["march", "june", "october"].choose(&mut rng).unwrap()));
    match spec.layout {
        Layout::CaptionAdjacent => {
            blocks.push(figure);
            blocks.push(planted_html);
            blocks.extend(body.iter().map(para));
            blocks.push(boiler(&mut rng));
        }
        Layout::CaptionFar => {
            blocks.push(figure);
            let at = rng.gen_range(2.min(n_body)..=n_body);
            blocks.extend(body[..at].iter().map(para));
            blocks.push(planted_html);
            blocks.extend(body[at..].iter().map(para));
            blocks.push(boiler(&mut rng));
        }
        Layout::BoilerplateHeavy => {
            blocks.push(boiler(&mut rng));
            blocks.push(figure);
            blocks.push(boiler(&mut rng));
            let at = rng.gen_range(1.min(n_body)..=n_body.min(2));
            blocks.extend(body[..at].iter().map(para));
            blocks.push(planted_html);
            blocks.push(boiler(&mut rng));
            blocks.extend(body[at..].iter().map(para));
            blocks.push(boiler(&mut rng));
        }
    }
    let mut aside = String::from("<aside><h2>Related</h2>");
    for d in &distractors {
        let _ = write!(aside, "<div class=\"teaser\"><a href=\"/related\">{d}</a></div>");
    }
    aside.push_str("<img src=\"/ads/banner.png\" width=\"300\" height=\"250\" alt=\"advert\"></aside>");
    blocks.push(aside);

    let content = blocks.join("\n");
    let wrapped = match spec.root {
        ContentRoot::Main => format!("<main>\n{content}\n</main>"),
        ContentRoot::Article => format!("<article>\n{content}\n</article>"),
        ContentRoot::Body => format!("<div class=\"content\">\n{content}\n</div>"),
    };
    let html = format!(
        "<!DOCTYPE html>\n<html lang=\"en\"><head><meta charset=\"utf-8\"><title>{headline} | {site}</title>\
<style>body {{ font-family: serif; }}</style><script>window.analytics = [];</script></head>\n<body>\n\
<header><img src=\"/logo.png\" width=\"120\" height=\"40\" alt=\"{site}\"><nav><a href=\"/\">Home</a><a href=\"/news\">News</a><a href=\"/sport\">Sport</a></nav></header>\n\
{wrapped}\n<footer><p>{site} all rights reserved</p><a href=\"/privacy\">Privacy</a></footer>\n</body></html>\n",
        site = spec.site_name,
    );

    GeneratedPage {
        record: PageRecord {
            page_id: page_id.to_string(),
            site_id: spec.template_id.clone(),
            url,
            html: html.into_bytes(),
            language_hint: Some("en".into()),
        },
        topic: topic_name.to_string(),
        anchor: CONTEXT_ANCHOR.to_string(),
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub templates: Vec<TemplateSpec>,
    pub pages: Vec<GeneratedPage>,
}

/// `n_pages` pages spread round-robin over `n_sites` sites.
pub fn generate_corpus(n_pages: usize, n_sites: usize, seed: u64) -> Result<SynthCorpus> {
    if n_sites == 0 || n_pages < n_sites {
        return Err(WiceError::InvalidConfig(format!(
            "need at least one site and no more sites than pages, got {n_pages} pages and {n_sites} sites"
        )));
    }
    let templates = site_templates(n_sites, seed);
    let pages = (0..n_pages)
        .into_par_iter()
        .map(|i| {
            let page_seed = mix(seed, 0x9A6E_0000 + i as u64);
            let topic = (page_seed % TOPICS.len() as u64) as usize;
            generate_page(&templates[i % n_sites], &format!("p{i:06}"), topic, page_seed)
        })
        .collect();
    Ok(SynthCorpus { templates, pages })
}

impl SynthCorpus {
    pub fn manifest(&self) -> Vec<ManifestEntry> {
        self.pages
            .iter()
            .map(|p| ManifestEntry {
                page_id: p.record.page_id.clone(),
                site_id: p.record.site_id.clone(),
                url: p.record.url.clone(),
            })
            .collect()
    }

    /// `page_id \t anchor` lines.
    pub fn ground_truth(&self) -> String {
        let mut out = String::new();
        for p in &self.pages {
            let _ = writeln!(out, "{}\t{}", p.record.page_id, p.anchor);
        }
        out
    }

    /// Write `manifest.tsv`, `ground_truth.tsv` and one `{page_id}.html` per page.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| WiceError::io(dir, e))?;
        for p in &self.pages {
            let path = dir.join(format!("{}.html", p.record.page_id));
            fs::write(&path, &p.record.html).map_err(|e| WiceError::io(&path, e))?;
        }
        let path = dir.join(MANIFEST_FILE);
        let mut buf = Vec::new();
        write_manifest(&mut buf, &self.manifest()).map_err(|e| WiceError::io(&path, e))?;
        fs::write(&path, buf).map_err(|e| WiceError::io(&path, e))?;
        let path = dir.join(GROUND_TRUTH_FILE);
        fs::File::create(&path)
            .and_then(|mut f| f.write_all(self.ground_truth().as_bytes()))
            .map_err(|e| WiceError::io(&path, e))
    }
}

/// Parse a ground-truth sidecar into `(page_id, anchor)` pairs.
pub fn read_ground_truth(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).map_err(|e| WiceError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            l.split_once('\t')
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .ok_or_else(|| WiceError::parse(path.display().to_string(), i + 1, "expected page_id\\tanchor"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dom_graph::{preprocess_page, PreprocessOptions, ReferenceSource};

    #[test]
    fn pages_are_deterministic() {
        let t = site_templates(3, 7);
        let a = generate_page(&t[1], "p1", 2, 99);
        let b = generate_page(&t[1], "p1", 2, 99);
        assert_eq!(a, b);
        assert_ne!(a.record.html, generate_page(&t[1], "p1", 2, 100).record.html);
    }

    #[test]
    fn small_corpus_shape() {
        let c = generate_corpus(10, 2, 0).unwrap();
        let m = c.manifest();
        assert_eq!(m.len(), 10);
        let sites: std::collections::BTreeSet<&str> = m.iter().map(|e| e.site_id.as_str()).collect();
        assert_eq!(sites.len(), 2);
        let again = generate_corpus(10, 2, 0).unwrap();
        assert_eq!(c.pages, again.pages);
        assert!(generate_corpus(1, 2, 0).is_err());
    }

    #[test]
    fn every_page_survives_preprocessing_with_its_anchor() {
        let c = generate_corpus(120, 12, 3).unwrap();
        for p in &c.pages {
            let g = preprocess_page(&p.record, &PreprocessOptions::default()).unwrap();
            assert_eq!(g.reference.as_ref().unwrap().reference_source, ReferenceSource::Figcaption);
            assert!(g.text_node_ids().len() >= 3);
            let node = g.anchored_text_node(&p.anchor).expect("anchor survives");
            assert!(g.nodes[node].is_text());
            assert_eq!(g.nodes.iter().filter(|n| n.is_main_image).count(), 1);
        }
    }

    #[test]
    fn templates_are_distinct() {
        let t = site_templates(40, 0);
        let ids: std::collections::BTreeSet<&str> = t.iter().map(|s| s.template_id.as_str()).collect();
        assert_eq!(ids.len(), 40);
    }
}
