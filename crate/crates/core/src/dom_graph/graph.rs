use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::tags::TagGroup;
use super::tree::{normalize_text, DomTree, TreeData, TreeId};
use crate::error::{Result, WiceError};

/// Attribute used by generated corpora to anchor ground-truth nodes.
pub const ANCHOR_ATTR: &str = "data-wice-anchor";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    Element,
    Text,
    Image,
    /// A `<figcaption>` left in the graph (it held a losing reference candidate).
    ReferenceHolder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceSource {
    Alt,
    Figcaption,
    TitleAttr,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomNode {
    pub node_id: usize,
    pub raw_tag: String,
    pub tag_group: TagGroup,
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    pub is_main_image: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<String>,
}

impl DomNode {
    pub fn is_text(&self) -> bool {
        self.kind == NodeKind::Text
    }
}

/// The supervision target: the longest of alt text, caption and image title.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reference {
    pub reference_text: String,
    pub reference_source: ReferenceSource,
}

/// Typed node/edge graph of one page, nodes in document order.
///
/// Graphs built from unlabeled pages (inference) carry no reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomGraph {
    pub page_id: String,
    #[serde(default)]
    pub site_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(flatten)]
    pub reference: Option<Reference>,
    pub nodes: Vec<DomNode>,
    pub edges: Vec<(usize, usize)>,
}

impl DomGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn reference_text(&self) -> Option<&str> {
        self.reference.as_ref().map(|r| r.reference_text.as_str())
    }

    pub fn text_node_ids(&self) -> Vec<usize> {
        self.nodes.iter().filter(|n| n.is_text()).map(|n| n.node_id).collect()
    }

    pub fn text_mask(&self) -> Vec<bool> {
        self.nodes.iter().map(DomNode::is_text).collect()
    }

    pub fn image_node(&self) -> Option<usize> {
        self.nodes.iter().find(|n| n.is_main_image).map(|n| n.node_id)
    }

    pub fn text(&self, id: usize) -> Option<&str> {
        self.nodes.get(id).and_then(|n| n.text.as_deref())
    }

    /// First text node at or below the element carrying `anchor`.
    pub fn anchored_text_node(&self, anchor: &str) -> Option<usize> {
        let start = self.nodes.iter().find(|n| n.anchor.as_deref() == Some(anchor))?.node_id;
        let children = self.children_lists();
        let mut stack = vec![start];
        while let Some(n) = stack.pop() {
            if self.nodes[n].is_text() {
                return Some(n);
            }
            stack.extend(children[n].iter().rev());
        }
        None
    }

    pub fn children_lists(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        for &(p, c) in &self.edges {
            out[p].push(c);
        }
        out
    }

    /// Undirected neighbour lists (no self loops).
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        for &(p, c) in &self.edges {
            out[p].push(c);
            out[c].push(p);
        }
        out
    }

    /// Tree distance from `source` to every node (`usize::MAX` if unreachable).
    pub fn distances_from(&self, source: usize) -> Result<Vec<usize>> {
        if source >= self.nodes.len() {
            return Err(WiceError::UnknownNode(source));
        }
        let neighbors = self.neighbors();
        let mut dist = vec![usize::MAX; self.nodes.len()];
        dist[source] = 0;
        let mut queue = VecDeque::from([source]);
        while let Some(n) = queue.pop_front() {
            for &m in &neighbors[n] {
                if dist[m] == usize::MAX {
                    dist[m] = dist[n] + 1;
                    queue.push_back(m);
                }
            }
        }
        Ok(dist)
    }

    /// Length of the undirected tree path between `a` and `b`.
    pub fn graph_distance(&self, a: usize, b: usize) -> Result<usize> {
        if b >= self.nodes.len() {
            return Err(WiceError::UnknownNode(b));
        }
        if a >= self.nodes.len() {
            return Err(WiceError::UnknownNode(a));
        }
        // Walk both nodes up to their lowest common ancestor.
        let mut parent = vec![None; self.nodes.len()];
        for &(p, c) in &self.edges {
            parent[c] = Some(p);
        }
        let depth = |mut n: usize| {
            let mut d = 0;
            while let Some(p) = parent[n] {
                n = p;
                d += 1;
            }
            d
        };
        let (mut x, mut y) = (a, b);
        let (mut dx, mut dy) = (depth(x), depth(y));
        let mut steps = 0;
        while dx > dy {
            x = parent[x].expect("depth bookkeeping");
            dx -= 1;
            steps += 1;
        }
        while dy > dx {
            y = parent[y].expect("depth bookkeeping");
            dy -= 1;
            steps += 1;
        }
        while x != y {
            match (parent[x], parent[y]) {
                (Some(px), Some(py)) => {
                    x = px;
                    y = py;
                    steps += 2;
                }
                // Disconnected forest: fall back to search.
                _ => return Ok(self.distances_from(a)?[b]),
            }
        }
        Ok(steps)
    }

    /// Check the structural invariants of a freshly built graph.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let n = self.nodes.len();
        if n == 0 {
            return Err("graph has no nodes".into());
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.node_id != i {
                return Err(format!("node {i} has id {}", node.node_id));
            }
            if node.is_text() != node.text.is_some() {
                return Err(format!("node {i}: text present iff kind = text"));
            }
            if node.text.as_deref().is_some_and(|t| t.is_empty()) {
                return Err(format!("node {i}: empty text"));
            }
        }
        let images = self.nodes.iter().filter(|n| n.is_main_image).count();
        if images != 1 {
            return Err(format!("{images} main images"));
        }
        if self.edges.len() + 1 != n {
            return Err(format!("{} edges for {n} nodes", self.edges.len()));
        }
        let mut has_parent = vec![false; n];
        for &(p, c) in &self.edges {
            if p >= n || c >= n {
                return Err(format!("edge ({p}, {c}) out of range"));
            }
            if has_parent[c] {
                return Err(format!("node {c} has two parents"));
            }
            has_parent[c] = true;
        }
        let roots = has_parent.iter().filter(|h| !**h).count();
        if roots != 1 {
            return Err(format!("{roots} roots"));
        }
        let root = has_parent.iter().position(|h| !h).unwrap_or(0);
        let dist = self.distances_from(root).map_err(|e| e.to_string())?;
        if dist.iter().any(|&d| d == usize::MAX) {
            return Err("graph is disconnected".into());
        }
        if let Some(r) = &self.reference {
            if r.reference_text.is_empty() {
                return Err("empty reference text".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageSize {
    pub width: f64,
    pub height: f64,
}

impl ImageSize {
    pub fn area(self) -> f64 {
        self.width * self.height
    }
}

fn parse_pixels(value: &str, require_unit: bool) -> Option<f64> {
    let v = value.trim().to_ascii_lowercase();
    let number = match v.strip_suffix("px") {
        Some(n) => n.trim_end(),
        None if require_unit => return None,
        None => v.as_str(),
    };
    if number.is_empty() || !number.chars().all(|c| c.is_ascii_digit() || c == '.') {
        return None;
    }
    number.parse::<f64>().ok().filter(|x| x.is_finite() && *x > 0.0)
}

fn style_pixels(style: &str, property: &str) -> Option<f64> {
    style.split(';').find_map(|decl| {
        let (key, value) = decl.split_once(':')?;
        (key.trim().eq_ignore_ascii_case(property)).then(|| parse_pixels(value, true)).flatten()
    })
}

/// Pixel size declared on an `<img>` by attributes, else inline style.
pub fn declared_size(tree: &DomTree, id: TreeId) -> Option<ImageSize> {
    let style = tree.attr(id, "style").unwrap_or("");
    let dim = |name: &str| {
        tree.attr(id, name).and_then(|v| parse_pixels(v, false)).or_else(|| style_pixels(style, name))
    };
    Some(ImageSize { width: dim("width")?, height: dim("height")? })
}

/// The biggest `<img>` by declared area. Ties and unknown sizes resolve
/// by document order, with unknown sizes ranked below every known one.
pub fn select_main_image(tree: &DomTree) -> Result<TreeId> {
    let mut best: Option<(TreeId, Option<f64>)> = None;
    for id in tree.elements_by_tag("img") {
        let area = declared_size(tree, id).map(ImageSize::area);
        let better = match (&best, area) {
            (None, _) => true,
            (Some((_, None)), Some(_)) => true,
            (Some((_, Some(b))), Some(a)) => a > *b,
            _ => false,
        };
        if better {
            best = Some((id, area));
        }
    }
    best.map(|(id, _)| id).ok_or(WiceError::NoImage)
}

/// A reference candidate together with where it lives in the tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceCandidate {
    pub text: String,
    pub source: ReferenceSource,
    /// The `<figcaption>` element for caption references.
    pub holder: Option<TreeId>,
}

impl ReferenceCandidate {
    pub fn reference(&self) -> Reference {
        Reference { reference_text: self.text.clone(), reference_source: self.source }
    }
}

fn figcaption_of(tree: &DomTree, image: TreeId) -> Option<TreeId> {
    let figure = tree.ancestors(image).find(|&a| tree.tag(a) == Some("figure"))?;
    let enclosing: Vec<TreeId> = tree.ancestors(image).collect();
    let mut stack: Vec<TreeId> = tree.children(figure).iter().rev().copied().collect();
    while let Some(n) = stack.pop() {
        match tree.tag(n) {
            Some("figcaption") if !enclosing.contains(&n) => return Some(n),
            Some("figcaption") => stack.extend(tree.children(n).iter().rev()),
            Some("figure") => continue,
            _ => stack.extend(tree.children(n).iter().rev()),
        }
    }
    None
}

/// Longest of alt text, enclosing figure caption and image title, ties
/// resolved in that order.
pub fn extract_reference_text(tree: &DomTree, image: TreeId) -> Result<ReferenceCandidate> {
    let caption = figcaption_of(tree, image);
    let candidates = [
        (tree.attr(image, "alt").map(normalize_text), ReferenceSource::Alt, None),
        (caption.map(|c| normalize_text(&tree.text_content(c))), ReferenceSource::Figcaption, caption),
        (tree.attr(image, "title").map(normalize_text), ReferenceSource::TitleAttr, None),
    ];
    let mut best: Option<ReferenceCandidate> = None;
    for (text, source, holder) in candidates {
        let Some(text) = text.filter(|t| !t.is_empty()) else { continue };
        let longer = best.as_ref().map_or(true, |b| text.chars().count() > b.text.chars().count());
        if longer {
            best = Some(ReferenceCandidate { text, source, holder });
        }
    }
    best.ok_or(WiceError::NoReferenceText)
}

/// Remove the winning reference source so the graph cannot reveal it.
/// Returns the new tree and the image's id in it.
pub fn excise_reference(
    tree: &DomTree,
    image: TreeId,
    candidate: &ReferenceCandidate,
) -> (DomTree, TreeId) {
    match (candidate.source, candidate.holder) {
        (ReferenceSource::Alt, _) => (tree.without_attr(image, "alt"), image),
        (ReferenceSource::TitleAttr, _) => (tree.without_attr(image, "title"), image),
        (ReferenceSource::Figcaption, Some(holder)) => {
            let (out, map) = tree.rebuild(tree.root(), |_, id| id != holder);
            (out, map[image].expect("image is outside the caption"))
        }
        (ReferenceSource::Figcaption, None) => (tree.clone(), image),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphOptions {
    /// Text leaves shorter than this (in characters, after normalisation)
    /// are dropped.
    pub min_text_chars: usize,
}

impl Default for GraphOptions {
    fn default() -> Self {
        GraphOptions { min_text_chars: 2 }
    }
}

/// Turn a pruned tree into a `DomGraph`: one node per element and per
/// kept text leaf, parent-child edges, document order.
pub fn build_graph(
    tree: &DomTree,
    image: TreeId,
    reference: Option<Reference>,
    options: GraphOptions,
) -> DomGraph {
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let mut stack: Vec<(TreeId, Option<usize>)> = vec![(tree.root(), None)];
    while let Some((id, parent)) = stack.pop() {
        let node = match &tree.node(id).data {
            TreeData::Element { tag, .. } => {
                let kind = match tag.as_str() {
                    "img" => NodeKind::Image,
                    "figcaption" => NodeKind::ReferenceHolder,
                    _ => NodeKind::Element,
                };
                DomNode {
                    node_id: nodes.len(),
                    raw_tag: tag.clone(),
                    tag_group: TagGroup::from_tag(tag),
                    kind,
                    text: None,
                    is_main_image: id == image,
                    anchor: tree.attr(id, ANCHOR_ATTR).map(str::to_string),
                }
            }
            TreeData::Document => DomNode {
                node_id: nodes.len(),
                raw_tag: "#document".into(),
                tag_group: TagGroup::Unknown,
                kind: NodeKind::Element,
                text: None,
                is_main_image: false,
                anchor: None,
            },
            TreeData::Text(raw) => {
                let text = normalize_text(raw);
                if text.chars().count() < options.min_text_chars.max(1) {
                    continue;
                }
                DomNode {
                    node_id: nodes.len(),
                    raw_tag: "#text".into(),
                    tag_group: TagGroup::TextLeaf,
                    kind: NodeKind::Text,
                    text: Some(text),
                    is_main_image: false,
                    anchor: None,
                }
            }
            TreeData::Comment(_) => continue,
        };
        let new_id = node.node_id;
        nodes.push(node);
        if let Some(p) = parent {
            edges.push((p, new_id));
        }
        for &c in tree.children(id).iter().rev() {
            stack.push((c, Some(new_id)));
        }
    }
    DomGraph { page_id: String::new(), site_id: String::new(), title: None, reference, nodes, edges }
}
