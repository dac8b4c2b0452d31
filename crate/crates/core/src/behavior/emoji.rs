use super::emoji_table::EXTENDED_PICTOGRAPHIC;

const ZWJ: char = '\u{200D}';
const VS15: char = '\u{FE0E}';
const VS16: char = '\u{FE0F}';
const KEYCAP: char = '\u{20E3}';

pub fn is_extended_pictographic(c: char) -> bool {
    let cp = c as u32;
    EXTENDED_PICTOGRAPHIC
        .binary_search_by(|&(lo, hi)| {
            if hi < cp {
                std::cmp::Ordering::Less
            } else if lo > cp {
                std::cmp::Ordering::Greater
            } else {
                std::cmp::Ordering::Equal
            }
        })
        .is_ok()
}

fn is_regional_indicator(c: char) -> bool {
    ('\u{1F1E6}'..='\u{1F1FF}').contains(&c)
}

fn is_skin_tone(c: char) -> bool {
    ('\u{1F3FB}'..='\u{1F3FF}').contains(&c)
}

/// Whether one extended grapheme cluster is an emoji.
///
/// True for clusters carrying an Extended_Pictographic code point (this
/// covers ZWJ sequences, skin-tone and variation-selector forms), for
/// regional-indicator flag pairs, and for keycap sequences.
pub fn is_emoji_grapheme(grapheme: &str) -> bool {
    grapheme
        .chars()
        .any(|c| is_extended_pictographic(c) || is_regional_indicator(c) || c == KEYCAP)
}

/// Canonical lookup key for an emoji: presentation selectors removed.
/// `"☺️"` and `"☺"` share a key.
pub fn emoji_key(grapheme: &str) -> String {
    grapheme.chars().filter(|&c| c != VS15 && c != VS16).collect()
}

/// Lookup key with skin-tone modifiers removed as well, used as a fallback
/// so `👍🏽` finds a mapping for `👍`.
pub fn emoji_base_key(grapheme: &str) -> String {
    let mut key: String = grapheme
        .chars()
        .filter(|&c| c != VS15 && c != VS16 && !is_skin_tone(c))
        .collect();
    // a dangling joiner can be left behind by the removal
    while key.ends_with(ZWJ) {
        key.pop();
    }
    key
}
