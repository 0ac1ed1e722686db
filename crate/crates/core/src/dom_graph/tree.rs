//! Arena-backed DOM tree recovered with an HTML5 parser, plus the
//! content-root and pruning passes that run before graph construction.

use std::collections::BTreeSet;

use scraper::{Html, Node};

use crate::error::{Result, WiceError};

pub type TreeId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TreeData {
    Document,
    Element { tag: String, attrs: Vec<(String, String)> },
    Text(String),
    Comment(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeNode {
    pub data: TreeData,
    pub parent: Option<TreeId>,
    pub children: Vec<TreeId>,
}

/// Rooted tree of elements and text leaves. Nodes are always stored in
/// pre-order, so two trees with the same shape and content compare equal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomTree {
    nodes: Vec<TreeNode>,
}

impl DomTree {
    pub fn root(&self) -> TreeId {
        0
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: TreeId) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn children(&self, id: TreeId) -> &[TreeId] {
        &self.nodes[id].children
    }

    pub fn parent(&self, id: TreeId) -> Option<TreeId> {
        self.nodes[id].parent
    }

    pub fn tag(&self, id: TreeId) -> Option<&str> {
        match &self.nodes[id].data {
            TreeData::Element { tag, .. } => Some(tag),
            _ => None,
        }
    }

    pub fn attr(&self, id: TreeId, name: &str) -> Option<&str> {
        match &self.nodes[id].data {
            TreeData::Element { attrs, .. } => {
                attrs.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
            }
            _ => None,
        }
    }

    pub fn ids(&self) -> impl Iterator<Item = TreeId> {
        0..self.nodes.len()
    }

    /// Element ids with the given tag, in document order.
    pub fn elements_by_tag<'a>(&'a self, tag: &'a str) -> impl Iterator<Item = TreeId> + 'a {
        self.ids().filter(move |&id| self.tag(id) == Some(tag))
    }

    pub fn ancestors(&self, id: TreeId) -> impl Iterator<Item = TreeId> + '_ {
        std::iter::successors(self.parent(id), move |&p| self.parent(p))
    }

    /// Ids of `id` and all its descendants, in document order.
    pub fn descendants(&self, id: TreeId) -> Vec<TreeId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.nodes[n].children.iter().rev());
        }
        out
    }

    /// Concatenated text of all text descendants.
    pub fn text_content(&self, id: TreeId) -> String {
        self.descendants(id)
            .into_iter()
            .filter_map(|n| match &self.nodes[n].data {
                TreeData::Text(t) => Some(t.as_str()),
                _ => None,
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn count_elements(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n.data, TreeData::Element { .. })).count()
    }

    /// Copy the subtree under `root`, skipping every node for which `keep`
    /// returns false together with its descendants. Returns the new tree
    /// and the mapping from old ids to new ids.
    pub fn rebuild<F>(&self, root: TreeId, mut keep: F) -> (DomTree, Vec<Option<TreeId>>)
    where
        F: FnMut(&DomTree, TreeId) -> bool,
    {
        let mut map = vec![None; self.nodes.len()];
        let mut nodes: Vec<TreeNode> = Vec::new();
        let mut stack: Vec<(TreeId, Option<TreeId>)> = vec![(root, None)];
        while let Some((old, new_parent)) = stack.pop() {
            if old != root && !keep(self, old) {
                continue;
            }
            let new_id = nodes.len();
            map[old] = Some(new_id);
            nodes.push(TreeNode {
                data: self.nodes[old].data.clone(),
                parent: new_parent,
                children: Vec::new(),
            });
            if let Some(p) = new_parent {
                nodes[p].children.push(new_id);
            }
            for &c in self.nodes[old].children.iter().rev() {
                stack.push((c, Some(new_id)));
            }
        }
        (DomTree { nodes }, map)
    }

    pub fn subtree(&self, root: TreeId) -> DomTree {
        self.rebuild(root, |_, _| true).0
    }

    /// Copy of the tree with one attribute removed from one element.
    pub fn without_attr(&self, id: TreeId, name: &str) -> DomTree {
        let mut out = self.clone();
        if let TreeData::Element { attrs, .. } = &mut out.nodes[id].data {
            attrs.retain(|(k, _)| k != name);
        }
        out
    }
}

/// Parse raw bytes into a DOM tree following HTML5 error recovery.
///
/// Invalid UTF-8 sequences are replaced. Input with no markup or text at
/// all yields `MalformedDocument`.
pub fn parse_html(html: &[u8]) -> Result<DomTree> {
    let source = String::from_utf8_lossy(html);
    if source.trim().is_empty() {
        return Err(WiceError::MalformedDocument);
    }
    let document = Html::parse_document(&source);

    let mut nodes: Vec<TreeNode> = Vec::new();
    let mut stack = vec![(document.tree.root(), None::<TreeId>)];
    while let Some((node, parent)) = stack.pop() {
        let data = match node.value() {
            Node::Document | Node::Fragment => TreeData::Document,
            Node::Element(el) => {
                let mut attrs: Vec<(String, String)> = el
                    .attrs()
                    .map(|(k, v)| (k.to_ascii_lowercase(), v.to_string()))
                    .collect();
                attrs.sort();
                TreeData::Element { tag: el.name().to_ascii_lowercase(), attrs }
            }
            Node::Text(t) => TreeData::Text(t.to_string()),
            Node::Comment(c) => TreeData::Comment(c.to_string()),
            Node::Doctype(_) | Node::ProcessingInstruction(_) => continue,
        };
        let id = nodes.len();
        nodes.push(TreeNode { data, parent, children: Vec::new() });
        if let Some(p) = parent {
            nodes[p].children.push(id);
        }
        let children: Vec<_> = node.children().collect();
        for child in children.into_iter().rev() {
            stack.push((child, Some(id)));
        }
    }

    let tree = DomTree { nodes };
    if tree.count_elements() == 0 {
        return Err(WiceError::MalformedDocument);
    }
    Ok(tree)
}

/// Text of the document `<title>` element, whitespace-normalised.
pub fn document_title(tree: &DomTree) -> Option<String> {
    tree.elements_by_tag("title")
        .map(|id| normalize_text(&tree.text_content(id)))
        .find(|t| !t.is_empty())
}

/// Subtree rooted at the first `<main>`, else the first `<article>`, else
/// `<body>`; the whole tree when none exist.
pub fn select_content_root(tree: &DomTree) -> DomTree {
    for tag in ["main", "article", "body"] {
        if let Some(id) = tree.elements_by_tag(tag).next() {
            return tree.subtree(id);
        }
    }
    tree.clone()
}

/// Tags removed together with their subtrees before graph construction.
///
/// `header` is special: it is only removed when it has no `<article>`
/// ancestor, since article headers usually carry the headline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Denylist {
    tags: BTreeSet<String>,
}

pub const DEFAULT_DENYLIST: &[&str] = &[
    "style", "script", "button", "noscript", "svg", "iframe", "form", "input", "select", "nav",
    "footer", "header", "link", "meta",
];

impl Default for Denylist {
    fn default() -> Self {
        Denylist::new(DEFAULT_DENYLIST.iter().copied())
    }
}

impl Denylist {
    pub fn new<I, S>(tags: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Denylist { tags: tags.into_iter().map(|t| t.as_ref().trim().to_ascii_lowercase()).collect() }
    }

    /// One tag per line; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Self {
        Denylist::new(
            text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn contains(&self, tag: &str) -> bool {
        self.tags.contains(tag)
    }

    pub fn tags(&self) -> impl Iterator<Item = &str> {
        self.tags.iter().map(String::as_str)
    }

    fn removes(&self, tree: &DomTree, id: TreeId) -> bool {
        match tree.tag(id) {
            Some("header") if self.contains("header") => {
                !tree.ancestors(id).any(|a| tree.tag(a) == Some("article"))
            }
            Some(tag) => self.contains(tag),
            None => false,
        }
    }
}

/// Remove denylisted elements with their subtrees, comments, and
/// whitespace-only text leaves.
pub fn prune_tree(tree: &DomTree, denylist: &Denylist) -> DomTree {
    prune_with_map(tree, denylist).0
}

pub(crate) fn prune_with_map(tree: &DomTree, denylist: &Denylist) -> (DomTree, Vec<Option<TreeId>>) {
    tree.rebuild(tree.root(), |t, id| match &t.node(id).data {
        TreeData::Element { .. } => !denylist.removes(t, id),
        TreeData::Text(s) => !s.trim().is_empty(),
        TreeData::Comment(_) => false,
        TreeData::Document => true,
    })
}

/// Collapse whitespace runs into single spaces and trim.
pub fn normalize_text(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}
