//! Ordered tweet-cleaning pipeline: URL/mention/hashtag removal, Latin-letter
//! and digit stripping, punctuation removal, whitespace collapsing. Emoji are
//! preserved verbatim, including ZWJ sequences and variation selectors.
//!
//! Rules always run in the fixed order below; structured tokens go first so
//! the later character-class rules cannot destroy their '@'/'#'/'/' sentinels.
//! `normalize_text` iterates the sequence to a fixpoint, so the output is
//! idempotent for every rule subset.

use serde::{Deserialize, Serialize};
use unicode_properties::emoji::EmojiStatus;
use unicode_properties::{GeneralCategory, GeneralCategoryGroup, UnicodeEmoji,
    UnicodeGeneralCategory};

use crate::corpus::Corpus;

/// The cleaning rules, in their fixed application order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleName {
    StripUrls,
    StripMentions,
    StripHashtags,
    StripRomanLetters,
    StripNumbers,
    StripPunctuation,
    NormalizeWhitespace,
}

pub const RULE_ORDER: [RuleName; 7] = [
    RuleName::StripUrls,
    RuleName::StripMentions,
    RuleName::StripHashtags,
    RuleName::StripRomanLetters,
    RuleName::StripNumbers,
    RuleName::StripPunctuation,
    RuleName::NormalizeWhitespace,
];

impl RuleName {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleName::StripUrls => "strip_urls",
            RuleName::StripMentions => "strip_mentions",
            RuleName::StripHashtags => "strip_hashtags",
            RuleName::StripRomanLetters => "strip_roman_letters",
            RuleName::StripNumbers => "strip_numbers",
            RuleName::StripPunctuation => "strip_punctuation",
            RuleName::NormalizeWhitespace => "normalize_whitespace",
        }
    }
}

/// Per-rule enable flags. Everything defaults to on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RulePipeline {
    pub strip_urls: bool,
    pub strip_mentions: bool,
    pub strip_hashtags: bool,
    pub strip_roman_letters: bool,
    pub strip_numbers: bool,
    pub strip_punctuation: bool,
    pub normalize_whitespace: bool,
    /// When set, `strip_hashtags` removes only the '#' sentinel and keeps
    /// the tag word. Default is whole-token removal.
    pub hashtag_keep_word: bool,
}

impl Default for RulePipeline {
    fn default() -> Self {
        RulePipeline {
            strip_urls: true,
            strip_mentions: true,
            strip_hashtags: true,
            strip_roman_letters: true,
            strip_numbers: true,
            strip_punctuation: true,
            normalize_whitespace: true,
            hashtag_keep_word: false,
        }
    }
}

impl RulePipeline {
    fn enabled(&self, rule: RuleName) -> bool {
        match rule {
            RuleName::StripUrls => self.strip_urls,
            RuleName::StripMentions => self.strip_mentions,
            RuleName::StripHashtags => self.strip_hashtags,
            RuleName::StripRomanLetters => self.strip_roman_letters,
            RuleName::StripNumbers => self.strip_numbers,
            RuleName::StripPunctuation => self.strip_punctuation,
            RuleName::NormalizeWhitespace => self.normalize_whitespace,
        }
    }
}

/// A post after cleaning, with provenance of which rules changed it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormalizedPost {
    pub id: String,
    pub text: String,
    pub applied: Vec<RuleName>,
    pub became_empty: bool,
}

/// Corpus-level normalization result with per-rule change counts.
#[derive(Debug, Clone)]
pub struct NormalizedCorpus {
    pub posts: Vec<NormalizedPost>,
    pub empty_count: usize,
    /// Number of posts each rule changed, indexed parallel to `RULE_ORDER`.
    pub change_counts: [usize; 7],
}

/// Emoji classification per code point, in context.
///
/// A scalar counts as emoji when it has default emoji presentation (or is an
/// emoji modifier base/modifier). Text-default emoji like U+2764 also count.
/// Keycap bases ('#', '*', '0'-'9') count only when followed by U+FE0F, so
/// the digit and punctuation rules still apply to them in ordinary text.
/// U+FE0F, U+20E3 and U+200D are kept when glued to an emoji neighbour.
fn emoji_mask(chars: &[char]) -> Vec<bool> {
    fn standalone(c: char) -> bool {
        matches!(
            c.emoji_status(),
            EmojiStatus::EmojiPresentation
                | EmojiStatus::EmojiModifierBase
                | EmojiStatus::EmojiPresentationAndModifierBase
                | EmojiStatus::EmojiPresentationAndEmojiComponent
                | EmojiStatus::EmojiPresentationAndModifierAndEmojiComponent
                | EmojiStatus::EmojiOther
        )
    }
    fn emoji_capable(c: char) -> bool {
        // Emoji=YES in UTS #51, including the keycap bases.
        !matches!(
            c.emoji_status(),
            EmojiStatus::NonEmoji | EmojiStatus::NonEmojiButEmojiComponent
        )
    }

    let n = chars.len();
    let mut mask: Vec<bool> = chars.iter().map(|&c| standalone(c)).collect();
    // Mark text-presentation bases promoted by VS16, then glue components.
    for i in 0..n {
        match chars[i] {
            '\u{FE0F}' => {
                if i > 0 && (mask[i - 1] || emoji_capable(chars[i - 1])) {
                    mask[i - 1] = true;
                    mask[i] = true;
                }
            }
            '\u{20E3}' => {
                if i > 0 && mask[i - 1] {
                    mask[i] = true;
                }
            }
            '\u{200D}' => {
                if i > 0 && mask[i - 1] && i + 1 < n && standalone(chars[i + 1]) {
                    mask[i] = true;
                }
            }
            _ => {}
        }
    }
    mask
}

fn is_latin_letter(c: char) -> bool {
    c.is_ascii_alphabetic()
        || (('\u{00C0}'..='\u{024F}').contains(&c) && c.is_alphabetic())
}

fn is_strippable_digit(c: char) -> bool {
    c.is_ascii_digit()
        || ('\u{09E6}'..='\u{09EF}').contains(&c) // Bengali/Assamese digits
        || ('\u{0AE6}'..='\u{0AEF}').contains(&c) // Gujarati digits
}

fn is_strippable_punct(c: char) -> bool {
    c.general_category_group() == GeneralCategoryGroup::Punctuation
        || matches!(
            c.general_category(),
            GeneralCategory::CurrencySymbol | GeneralCategory::MathSymbol
        )
}

/// Where a mention/hashtag body ends: whitespace, punctuation, or emoji.
fn is_token_boundary(c: char, emoji: bool) -> bool {
    emoji || c.is_whitespace() || is_strippable_punct(c)
}

/// Matches a URL starting at `start` and returns the index one past its end.
/// Accepts `http://`/`https://` schemes, `www.` prefixes, and bare
/// `domain.tld/...` forms; consumption stops at whitespace or emoji.
fn url_end(chars: &[char], mask: &[bool], start: usize) -> Option<usize> {
    let token_end = (start..chars.len())
        .find(|&i| chars[i].is_whitespace() || mask[i])
        .unwrap_or(chars.len());
    let token: String = chars[start..token_end].iter().collect();
    let lower = token.to_ascii_lowercase();
    if lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.") {
        return Some(token_end);
    }
    // bare domain.tld/...: ASCII labels, at least one dot, alphabetic TLD, a slash
    let t = &chars[start..token_end];
    let mut i = 0;
    let mut last_label_start;
    let mut labels = 0;
    loop {
        let label_start = i;
        while i < t.len() && (t[i].is_ascii_alphanumeric() || t[i] == '-') {
            i += 1;
        }
        if i == label_start {
            return None;
        }
        labels += 1;
        last_label_start = label_start;
        if i < t.len() && t[i] == '.' {
            i += 1;
            continue;
        }
        break;
    }
    if labels < 2 || i >= t.len() || t[i] != '/' {
        return None;
    }
    let tld = &t[last_label_start..i];
    if tld.len() >= 2 && tld.iter().all(|c| c.is_ascii_alphabetic()) {
        Some(token_end)
    } else {
        None
    }
}

fn strip_urls(chars: &[char], mask: &[bool]) -> Vec<char> {
    let mut out = Vec::with_capacity(chars.len());
    let mut i = 0;
    while i < chars.len() {
        let at_token_start = i == 0 || chars[i - 1].is_whitespace();
        if at_token_start && !mask[i] {
            if let Some(end) = url_end(chars, mask, i) {
                i = end;
                continue;
            }
        }
        out.push(chars[i]);
        i += 1;
    }
    out
}

fn strip_sentinel_tokens(
    chars: &[char],
    mask: &[bool],
    sentinel: char,
    keep_word: bool,
) -> Vec<char> {
    let mut out = Vec::with_capacity(chars.len());
    let mut i = 0;
    while i < chars.len() {
        if chars[i] == sentinel && !mask[i] {
            i += 1;
            while !keep_word && i < chars.len() && !is_token_boundary(chars[i], mask[i]) {
                i += 1;
            }
            continue;
        }
        out.push(chars[i]);
        i += 1;
    }
    out
}

fn filter_chars(chars: &[char], mask: &[bool], pred: impl Fn(char) -> bool) -> Vec<char> {
    chars
        .iter()
        .zip(mask)
        .filter(|(c, &m)| m || !pred(**c))
        .map(|(&c, _)| c)
        .collect()
}

fn collapse_whitespace(chars: &[char]) -> Vec<char> {
    let mut out = Vec::with_capacity(chars.len());
    let mut pending_space = false;
    for &c in chars {
        if c.is_whitespace() {
            pending_space = !out.is_empty();
        } else {
            if pending_space {
                out.push(' ');
                pending_space = false;
            }
            out.push(c);
        }
    }
    out
}

fn apply_rule(rule: RuleName, chars: &[char], rules: &RulePipeline) -> Vec<char> {
    let mask = emoji_mask(chars);
    match rule {
        RuleName::StripUrls => strip_urls(chars, &mask),
        RuleName::StripMentions => strip_sentinel_tokens(chars, &mask, '@', false),
        RuleName::StripHashtags => {
            strip_sentinel_tokens(chars, &mask, '#', rules.hashtag_keep_word)
        }
        RuleName::StripRomanLetters => filter_chars(chars, &mask, is_latin_letter),
        RuleName::StripNumbers => filter_chars(chars, &mask, is_strippable_digit),
        RuleName::StripPunctuation => filter_chars(chars, &mask, is_strippable_punct),
        RuleName::NormalizeWhitespace => collapse_whitespace(chars),
    }
}

/// Clean one string, reporting which rules changed it.
pub fn normalize_text_traced(text: &str, rules: &RulePipeline) -> (String, Vec<RuleName>) {
    let mut chars: Vec<char> = text.chars().collect();
    let mut applied = Vec::new();
    // Iterate to a fixpoint so partial rule subsets stay idempotent too.
    loop {
        let mut changed = false;
        for rule in RULE_ORDER {
            if !rules.enabled(rule) {
                continue;
            }
            let next = apply_rule(rule, &chars, rules);
            if next != chars {
                changed = true;
                if !applied.contains(&rule) {
                    applied.push(rule);
                }
                chars = next;
            }
        }
        if !changed {
            break;
        }
    }
    (chars.into_iter().collect(), applied)
}

/// Clean one string with the given pipeline. Total function, never fails.
pub fn normalize_text(text: &str, rules: &RulePipeline) -> String {
    normalize_text_traced(text, rules).0
}

/// Normalize every post in a corpus, preserving order and ids. Posts whose
/// text becomes empty are kept (id alignment with predictions must survive)
/// and flagged.
pub fn normalize_corpus(corpus: &Corpus, rules: &RulePipeline) -> NormalizedCorpus {
    let mut posts = Vec::with_capacity(corpus.len());
    let mut empty_count = 0;
    let mut change_counts = [0usize; 7];
    for post in corpus.posts() {
        let (text, applied) = normalize_text_traced(&post.text, rules);
        let became_empty = text.is_empty() && !post.text.is_empty();
        if became_empty {
            empty_count += 1;
        }
        for (slot, rule) in change_counts.iter_mut().zip(RULE_ORDER) {
            if applied.contains(&rule) {
                *slot += 1;
            }
        }
        posts.push(NormalizedPost {
            id: post.id.clone(),
            text,
            applied,
            became_empty,
        });
    }
    NormalizedCorpus {
        posts,
        empty_count,
        change_counts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Corpus, Language, RawPost};

    fn norm(s: &str) -> String {
        normalize_text(s, &RulePipeline::default())
    }

    #[test]
    fn mention_and_url_are_dropped() {
        assert_eq!(norm("ভালো না @user123 https://t.co/xyz 😡"), "ভালো না 😡");
    }

    #[test]
    fn hashtag_keep_word_preserves_the_tag_text() {
        let rules = RulePipeline {
            hashtag_keep_word: true,
            ..RulePipeline::default()
        };
        assert_eq!(normalize_text("#ঘৃণা ছড়াবেন না", &rules), "ঘৃণা ছড়াবেন না");
        // Default drops the whole token.
        assert_eq!(norm("#ঘৃণা ছড়াবেন না"), "ছড়াবেন না");
    }

    #[test]
    fn empty_input_stays_empty() {
        assert_eq!(norm(""), "");
    }

    #[test]
    fn hashtag_digits_and_parens_are_dropped() {
        assert_eq!(norm("#hate શબ્દ 42 ()"), "શબ્દ");
    }

    #[test]
    fn emoji_only_input_survives() {
        assert_eq!(norm("😂😂"), "😂😂");
    }

    #[test]
    fn zwj_sequence_survives() {
        let family = "\u{1F469}\u{200D}\u{1F469}\u{200D}\u{1F467}";
        assert_eq!(norm(family), family);
    }

    #[test]
    fn keycap_sequence_survives_but_plain_digit_does_not() {
        let keycap = "\u{0034}\u{FE0F}\u{20E3}"; // 4️⃣
        assert_eq!(norm(keycap), keycap);
        assert_eq!(norm("4"), "");
    }

    #[test]
    fn native_digits_are_stripped() {
        assert_eq!(norm("৪২ কথা"), "কথা"); // Bengali digits
        assert_eq!(norm("૪૨ વાત"), "વાત"); // Gujarati digits
    }

    #[test]
    fn whitespace_is_collapsed_and_trimmed() {
        assert_eq!(norm("  ক\n\nখ\tগ  "), "ক খ গ");
    }

    #[test]
    fn bare_domain_with_path_is_a_url() {
        assert_eq!(norm("দেখুন t.co/abc এখন"), "দেখুন এখন");
    }

    #[test]
    fn domain_without_path_is_not_a_url() {
        // "t.co" alone does not match; its letters and dot fall to later rules
        assert_eq!(norm("t.co"), "");
        assert_eq!(norm("কথা t.co কথা"), "কথা কথা");
    }

    #[test]
    fn normalize_corpus_flags_empty_posts() {
        let posts = vec![
            RawPost {
                id: "a".into(),
                text: "ভালো".into(),
                label: None,
            },
            RawPost {
                id: "b".into(),
                text: "https://t.co/xyz".into(),
                label: None,
            },
            RawPost {
                id: "c".into(),
                text: "কথা @x".into(),
                label: None,
            },
        ];
        let corpus = Corpus::from_posts(posts, Language::Bengali).unwrap();
        let normalized = normalize_corpus(&corpus, &RulePipeline::default());
        assert_eq!(normalized.posts.len(), 3);
        assert_eq!(normalized.empty_count, 1);
        assert!(normalized.posts[1].became_empty);
        assert_eq!(normalized.posts[1].text, "");
        let ids: Vec<&str> = normalized.posts.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
    }

    #[test]
    fn already_clean_corpus_has_no_applied_rules() {
        let posts = vec![RawPost {
            id: "a".into(),
            text: "ভালো কথা".into(),
            label: None,
        }];
        let corpus = Corpus::from_posts(posts, Language::Bengali).unwrap();
        let normalized = normalize_corpus(&corpus, &RulePipeline::default());
        assert!(normalized.posts[0].applied.is_empty());
        assert_eq!(normalized.change_counts, [0; 7]);
    }

    #[test]
    fn disabled_rules_are_skipped() {
        let rules = RulePipeline {
            strip_numbers: false,
            ..RulePipeline::default()
        };
        assert_eq!(normalize_text("কথা 42", &rules), "কথা 42");
    }
}
