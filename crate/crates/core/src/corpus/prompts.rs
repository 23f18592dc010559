use alloc::string::String;

use super::SourceKind;

const SLOT: &str = "<text>";

/// The editing template for `kind`, with a `<text>` slot.
pub fn template(kind: SourceKind) -> &'static str {
    match kind {
        SourceKind::Arxiv => include_str!("../../assets/prompts/arxiv.txt"),
        SourceKind::Gutenberg => include_str!("../../assets/prompts/gutenberg.txt"),
        SourceKind::Wiki => include_str!("../../assets/prompts/wiki.txt"),
    }
}

/// Fills the template for `kind` with `text`. Source kinds are parsed with
/// [`SourceKind::from_str`](core::str::FromStr), which rejects unknown names.
pub fn build_polish_prompt(kind: SourceKind, text: &str) -> String {
    template(kind).replacen(SLOT, text, 1)
}
