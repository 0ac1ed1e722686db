//! Fixed mapping from HTML tag names to the 22 node-type groups used as
//! one-hot node features. The table is mirrored in `docs/tag_groups.md`;
//! the two must stay in sync (checked by the integration tests).

use serde::{Deserialize, Serialize};

/// Number of node-type groups.
pub const TAG_GROUP_COUNT: usize = 22;

/// Version of the mapping table; bump whenever a tag moves between groups.
pub const TAG_GROUP_TABLE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
#[repr(u8)]
pub enum TagGroup {
    Header = 0,
    Paragraph = 1,
    ListContainer = 2,
    ListItem = 3,
    Table = 4,
    Link = 5,
    Inline = 6,
    Figure = 7,
    Figcaption = 8,
    Image = 9,
    Media = 10,
    Quote = 11,
    Code = 12,
    Division = 13,
    Span = 14,
    Sectioning = 15,
    Aside = 16,
    Time = 17,
    Label = 18,
    Interactive = 19,
    Unknown = 20,
    TextLeaf = 21,
}

impl TagGroup {
    pub const ALL: [TagGroup; TAG_GROUP_COUNT] = [
        TagGroup::Header,
        TagGroup::Paragraph,
        TagGroup::ListContainer,
        TagGroup::ListItem,
        TagGroup::Table,
        TagGroup::Link,
        TagGroup::Inline,
        TagGroup::Figure,
        TagGroup::Figcaption,
        TagGroup::Image,
        TagGroup::Media,
        TagGroup::Quote,
        TagGroup::Code,
        TagGroup::Division,
        TagGroup::Span,
        TagGroup::Sectioning,
        TagGroup::Aside,
        TagGroup::Time,
        TagGroup::Label,
        TagGroup::Interactive,
        TagGroup::Unknown,
        TagGroup::TextLeaf,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<TagGroup> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            TagGroup::Header => "header",
            TagGroup::Paragraph => "paragraph",
            TagGroup::ListContainer => "list_container",
            TagGroup::ListItem => "list_item",
            TagGroup::Table => "table",
            TagGroup::Link => "link",
            TagGroup::Inline => "inline",
            TagGroup::Figure => "figure",
            TagGroup::Figcaption => "figcaption",
            TagGroup::Image => "image",
            TagGroup::Media => "media",
            TagGroup::Quote => "quote",
            TagGroup::Code => "code",
            TagGroup::Division => "division",
            TagGroup::Span => "span",
            TagGroup::Sectioning => "sectioning",
            TagGroup::Aside => "aside",
            TagGroup::Time => "time",
            TagGroup::Label => "label",
            TagGroup::Interactive => "interactive",
            TagGroup::Unknown => "unknown",
            TagGroup::TextLeaf => "text_leaf",
        }
    }

    /// Tags explicitly listed for this group. `Unknown` and `TextLeaf`
    /// have no members: they catch everything else and text leaves.
    pub fn members(self) -> &'static [&'static str] {
        match self {
            TagGroup::Header => &["h1", "h2", "h3", "h4", "h5", "h6", "hgroup"],
            TagGroup::Paragraph => &["p", "address"],
            TagGroup::ListContainer => &["ul", "ol", "dl", "menu", "dir"],
            TagGroup::ListItem => &["li", "dt", "dd"],
            TagGroup::Table => &[
                "table", "thead", "tbody", "tfoot", "tr", "td", "th", "caption", "colgroup", "col",
            ],
            TagGroup::Link => &["a"],
            TagGroup::Inline => &[
                "em", "strong", "b", "i", "u", "s", "small", "mark", "sub", "sup", "abbr", "cite",
                "dfn", "del", "ins", "bdi", "bdo", "font", "big", "strike", "br", "wbr", "ruby",
                "rt", "rp",
            ],
            TagGroup::Figure => &["figure"],
            TagGroup::Figcaption => &["figcaption"],
            TagGroup::Image => &["img"],
            TagGroup::Media => &[
                "picture", "source", "video", "audio", "track", "canvas", "embed", "object",
                "param", "map", "area",
            ],
            TagGroup::Quote => &["blockquote", "q"],
            TagGroup::Code => &["pre", "code", "kbd", "samp", "var", "tt"],
            TagGroup::Division => &["div", "center", "hr"],
            TagGroup::Span => &["span"],
            TagGroup::Sectioning => &["article", "section", "main", "body", "html"],
            TagGroup::Aside => &["aside"],
            TagGroup::Time => &["time", "data"],
            TagGroup::Label => &["label", "legend", "fieldset", "output"],
            TagGroup::Interactive => &[
                "details", "summary", "dialog", "textarea", "option", "optgroup", "datalist",
                "progress", "meter",
            ],
            TagGroup::Unknown | TagGroup::TextLeaf => &[],
        }
    }

    /// Group of an element tag name (case-insensitive).
    pub fn from_tag(tag: &str) -> TagGroup {
        let lower = tag.to_ascii_lowercase();
        Self::ALL
            .iter()
            .copied()
            .find(|g| g.members().contains(&lower.as_str()))
            .unwrap_or(TagGroup::Unknown)
    }
}

impl From<TagGroup> for u8 {
    fn from(group: TagGroup) -> u8 {
        group as u8
    }
}

impl TryFrom<u8> for TagGroup {
    type Error = u8;

    fn try_from(value: u8) -> Result<Self, u8> {
        TagGroup::from_index(value as usize).ok_or(value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn headers_share_a_group() {
        assert_eq!(TagGroup::from_tag("h1"), TagGroup::from_tag("h2"));
        assert_eq!(TagGroup::from_tag("H3"), TagGroup::Header);
        assert_eq!(TagGroup::from_tag("p"), TagGroup::Paragraph);
    }

    #[test]
    fn unknown_tags_fall_back() {
        assert_eq!(TagGroup::from_tag("my-widget"), TagGroup::Unknown);
    }

    #[test]
    fn members_are_disjoint() {
        let mut seen = HashSet::new();
        for g in TagGroup::ALL {
            for m in g.members() {
                assert!(seen.insert(*m), "{m} listed twice");
            }
        }
    }

    #[test]
    fn index_round_trip() {
        for (i, g) in TagGroup::ALL.iter().enumerate() {
            assert_eq!(g.index(), i);
            assert_eq!(TagGroup::try_from(i as u8), Ok(*g));
        }
        assert!(TagGroup::try_from(22u8).is_err());
    }
}
