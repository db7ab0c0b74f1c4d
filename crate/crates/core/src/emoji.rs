//! Emoji inventory, emoji extraction and usage frequencies.
//!
//! The inventory is loaded from an emoji-data style file (one codepoint,
//! codepoint sequence or codepoint range per line) plus a separate
//! category map, since the 1.0 data file carries no display categories.
//! A copy of the Emoji 1.0 list (1,281 entries) and a default category map
//! ship with the crate, see [`EmojiInventory::builtin`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BUILTIN_EMOJI_DATA: &str = include_str!("../data/emoji-data-1.0.txt");
pub const BUILTIN_CATEGORY_MAP: &str = include_str!("../data/emoji-categories.tsv");

pub const UNCATEGORIZED: &str = "Uncategorized";

/// The nine display categories used for grouping, in presentation order.
pub const CATEGORY_LABELS: [&str; 9] = [
    "Smileys",
    "People",
    "Nature",
    "Food & Drink",
    "Travel & Places",
    "Activities",
    "Objects",
    "Symbols",
    "Flags",
];

const VS_TEXT: char = '\u{FE0E}';
const VS_EMOJI: char = '\u{FE0F}';
const ZWJ: char = '\u{200D}';

pub fn is_variation_selector(c: char) -> bool {
    c == VS_TEXT || c == VS_EMOJI
}

pub fn is_skin_tone_modifier(c: char) -> bool {
    ('\u{1F3FB}'..='\u{1F3FF}').contains(&c)
}

/// Renders an emoji as space-separated uppercase hex codepoints (`1F1FA 1F1F8`).
pub fn codepoints(emoji: &str) -> String {
    emoji
        .chars()
        .map(|c| format!("{:04X}", c as u32))
        .collect::<Vec<_>>()
        .join(" ")
}

fn parse_codepoints(field: &str) -> std::result::Result<Vec<char>, String> {
    field
        .split_whitespace()
        .map(|hex| {
            let value = u32::from_str_radix(hex, 16).map_err(|_| format!("bad codepoint {hex:?}"))?;
            char::from_u32(value).ok_or_else(|| format!("invalid scalar value {hex}"))
        })
        .collect()
}

/// Result of [`EmojiInventory::normalize_emoji`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizedEmoji {
    pub sequence: String,
    pub is_emoji: bool,
}

/// A piece of scanned text: either an inventory emoji (canonical form) or
/// the non-emoji text between emoji.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment {
    Text(String),
    Emoji(String),
}

#[derive(Debug, Clone)]
pub struct EmojiInventory {
    categories: BTreeMap<String, String>,
    max_len: usize,
    warnings: Vec<String>,
}

impl EmojiInventory {
    /// Inventory built from the shipped Emoji 1.0 list and category map.
    pub fn builtin() -> Self {
        Self::from_sources(
            BUILTIN_EMOJI_DATA,
            "emoji-data-1.0.txt",
            BUILTIN_CATEGORY_MAP,
            "emoji-categories.tsv",
        )
        .expect("shipped emoji data parses")
    }

    pub fn load(emoji_data: &Path, category_map: &Path) -> Result<Self> {
        let data = std::fs::read_to_string(emoji_data).map_err(|e| Error::io(emoji_data, e))?;
        let cats = std::fs::read_to_string(category_map).map_err(|e| Error::io(category_map, e))?;
        Self::from_sources(
            &data,
            &emoji_data.display().to_string(),
            &cats,
            &category_map.display().to_string(),
        )
    }

    pub fn from_sources(emoji_data: &str, data_name: &str, category_map: &str, map_name: &str) -> Result<Self> {
        let mut sequences = BTreeSet::new();
        for (idx, raw) in emoji_data.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let code_field = line.split(';').next().unwrap_or("").trim();
            let err = |m: String| Error::parse(data_name, idx + 1, m);
            if let Some((lo, hi)) = code_field.split_once("..") {
                let lo = parse_codepoints(lo).map_err(err)?;
                let hi = parse_codepoints(hi).map_err(err)?;
                if lo.len() != 1 || hi.len() != 1 || lo[0] > hi[0] {
                    return Err(err(format!("bad codepoint range {code_field:?}")));
                }
                for value in lo[0] as u32..=hi[0] as u32 {
                    if let Some(c) = char::from_u32(value) {
                        sequences.insert(c.to_string());
                    }
                }
            } else {
                let cps = parse_codepoints(code_field).map_err(err)?;
                if cps.is_empty() {
                    return Err(err("missing codepoint field".into()));
                }
                let canonical: String = cps.into_iter().filter(|c| !is_variation_selector(*c)).collect();
                if canonical.chars().count() > 1 && canonical.chars().any(is_skin_tone_modifier) {
                    return Err(err(format!(
                        "skin-tone modifier sequence {code_field:?} is not supported"
                    )));
                }
                sequences.insert(canonical);
            }
        }

        let mut labels = HashMap::new();
        for (idx, raw) in category_map.lines().enumerate() {
            let line = raw.trim_end_matches(['\r', '\n']);
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (code, label) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(map_name, idx + 1, "expected CODEPOINTS<tab>Category"))?;
            let cps = parse_codepoints(code).map_err(|m| Error::parse(map_name, idx + 1, m))?;
            let key: String = cps.into_iter().filter(|c| !is_variation_selector(*c)).collect();
            labels.insert(key, label.trim().to_string());
        }

        let mut warnings = Vec::new();
        let mut categories = BTreeMap::new();
        for seq in sequences {
            let label = match labels.get(&seq) {
                Some(l) => l.clone(),
                None => {
                    warnings.push(format!("emoji {} missing from category map", codepoints(&seq)));
                    UNCATEGORIZED.to_string()
                }
            };
            categories.insert(seq, label);
        }
        if !warnings.is_empty() {
            warn!("{} inventory entries have no category", warnings.len());
        }
        let max_len = categories.keys().map(|k| k.chars().count()).max().unwrap_or(1);
        Ok(Self {
            categories,
            max_len,
            warnings,
        })
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    pub fn contains(&self, emoji: &str) -> bool {
        self.categories.contains_key(emoji)
    }

    pub fn category_of(&self, emoji: &str) -> Option<&str> {
        self.categories.get(emoji).map(String::as_str)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.categories.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Strips variation selectors (and a skin-tone modifier trailing a base
    /// emoji) and looks the result up. Sequences that do not match are
    /// returned unchanged and flagged as non-emoji.
    pub fn normalize_emoji(&self, sequence: &str) -> NormalizedEmoji {
        let stripped: String = sequence.chars().filter(|c| !is_variation_selector(*c)).collect();
        if self.contains(&stripped) {
            return NormalizedEmoji {
                sequence: stripped,
                is_emoji: true,
            };
        }
        let base: String = stripped.chars().filter(|c| !is_skin_tone_modifier(*c)).collect();
        if !base.is_empty() && base != stripped && self.contains(&base) {
            return NormalizedEmoji {
                sequence: base,
                is_emoji: true,
            };
        }
        NormalizedEmoji {
            sequence: sequence.to_string(),
            is_emoji: false,
        }
    }

    /// Splits `text` into inventory emoji and the text between them, using
    /// longest match. Variation selectors and zero-width joiners are
    /// dropped, so ZWJ sequences outside the inventory decompose into their
    /// constituent emoji; skin-tone modifiers trailing an emoji are dropped
    /// as well.
    pub fn scan(&self, text: &str) -> Vec<Segment> {
        let chars: Vec<char> = text.chars().collect();
        let mut out = Vec::new();
        let mut pending = String::new();
        let mut i = 0;
        let mut key = String::new();
        let mut ends = Vec::with_capacity(self.max_len);
        while i < chars.len() {
            let c = chars[i];
            if is_variation_selector(c) || c == ZWJ {
                i += 1;
                continue;
            }
            // Significant chars starting at i, skipping selectors.
            key.clear();
            ends.clear();
            let mut j = i;
            while j < chars.len() && ends.len() < self.max_len {
                if is_variation_selector(chars[j]) || chars[j] == ZWJ {
                    j += 1;
                    continue;
                }
                key.push(chars[j]);
                j += 1;
                ends.push((key.len(), j));
            }
            let matched = ends
                .iter()
                .rev()
                .find(|(byte_len, _)| self.categories.contains_key(&key[..*byte_len]))
                .copied();
            match matched {
                Some((byte_len, next)) => {
                    if !pending.is_empty() {
                        out.push(Segment::Text(std::mem::take(&mut pending)));
                    }
                    out.push(Segment::Emoji(key[..byte_len].to_string()));
                    i = next;
                    while i < chars.len()
                        && (is_variation_selector(chars[i]) || chars[i] == ZWJ || is_skin_tone_modifier(chars[i]))
                    {
                        i += 1;
                    }
                }
                None => {
                    pending.push(c);
                    i += 1;
                }
            }
        }
        if !pending.is_empty() {
            out.push(Segment::Text(pending));
        }
        out
    }

    /// Inventory emoji found in `text`, in order of occurrence.
    pub fn extract(&self, text: &str) -> Vec<String> {
        self.scan(text)
            .into_iter()
            .filter_map(|s| match s {
                Segment::Emoji(e) => Some(e),
                Segment::Text(_) => None,
            })
            .collect()
    }
}

/// Exact per-corpus emoji counts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyTable {
    counts: BTreeMap<String, BTreeMap<String, u64>>,
}

impl FrequencyTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a corpus with no counts (so empty corpora are visible).
    pub fn add_corpus(&mut self, corpus: &str) {
        self.counts.entry(corpus.to_string()).or_default();
    }

    pub fn add(&mut self, corpus: &str, emoji: &str, n: u64) {
        let per = self.counts.entry(corpus.to_string()).or_default();
        *per.entry(emoji.to_string()).or_default() += n;
    }

    /// Adds every count of `other` into `self`.
    pub fn merge(&mut self, other: FrequencyTable) {
        for (corpus, per) in other.counts {
            let mine = self.counts.entry(corpus).or_default();
            for (emoji, n) in per {
                *mine.entry(emoji).or_default() += n;
            }
        }
    }

    pub fn corpora(&self) -> impl Iterator<Item = &str> {
        self.counts.keys().map(String::as_str)
    }

    pub fn count(&self, corpus: &str, emoji: &str) -> u64 {
        self.counts.get(corpus).and_then(|m| m.get(emoji)).copied().unwrap_or(0)
    }

    pub fn counts(&self, corpus: &str) -> Option<&BTreeMap<String, u64>> {
        self.counts.get(corpus)
    }

    pub fn total(&self, corpus: &str) -> u64 {
        self.counts.get(corpus).map(|m| m.values().sum()).unwrap_or(0)
    }

    /// Summed count of an emoji over all corpora.
    pub fn grand_count(&self, emoji: &str) -> u64 {
        self.counts.values().filter_map(|m| m.get(emoji)).sum()
    }

    /// Relative frequencies for one corpus; `None` when the corpus has no
    /// emoji at all (normalization undefined).
    pub fn normalized(&self, corpus: &str) -> Option<BTreeMap<String, f64>> {
        let total = self.total(corpus);
        if total == 0 {
            return None;
        }
        let per = self.counts.get(corpus)?;
        Some(per.iter().map(|(e, &n)| (e.clone(), n as f64 / total as f64)).collect())
    }

    /// The `k` most frequent emoji of a corpus, descending count, ties by codepoint.
    pub fn top_k(&self, corpus: &str, k: usize) -> Vec<(String, u64)> {
        let mut items: Vec<(String, u64)> = self
            .counts
            .get(corpus)
            .map(|m| m.iter().filter(|(_, &n)| n > 0).map(|(e, &n)| (e.clone(), n)).collect())
            .unwrap_or_default();
        items.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        items.truncate(k);
        items
    }

    /// Counts summed per display category.
    pub fn by_category(&self, corpus: &str, inventory: &EmojiInventory) -> BTreeMap<String, u64> {
        let mut out = BTreeMap::new();
        if let Some(per) = self.counts.get(corpus) {
            for (emoji, &n) in per {
                let label = inventory.category_of(emoji).unwrap_or(UNCATEGORIZED);
                *out.entry(label.to_string()).or_default() += n;
            }
        }
        out
    }
}

/// Counts inventory emoji tokens of one corpus. Tokens are expected in
/// canonical form (as produced by the tokenizer); counting runs as parallel
/// partial counts merged by addition.
pub fn count_frequencies<S>(corpus: &str, streams: &[S], inventory: &EmojiInventory) -> FrequencyTable
where
    S: AsRef<[String]> + Sync,
{
    let counts = streams
        .par_iter()
        .fold(HashMap::<&str, u64>::new, |mut acc, stream| {
            for tok in stream.as_ref() {
                if inventory.contains(tok) {
                    *acc.entry(tok.as_str()).or_default() += 1;
                }
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_default() += v;
            }
            a
        });
    let mut table = FrequencyTable::new();
    table.add_corpus(corpus);
    for (emoji, n) in counts {
        table.add(corpus, emoji, n);
    }
    table
}

/// Emoji present in every corpus of a table whose summed count reaches a threshold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharedEmojiSet {
    pub threshold: u64,
    pub emoji: Vec<String>,
}

impl SharedEmojiSet {
    pub fn len(&self) -> usize {
        self.emoji.len()
    }

    pub fn is_empty(&self) -> bool {
        self.emoji.is_empty()
    }

    pub fn contains(&self, emoji: &str) -> bool {
        self.emoji.iter().any(|e| e == emoji)
    }
}

/// Ordered by descending total count, ties broken by codepoint order.
pub fn shared_set(table: &FrequencyTable, threshold: u64) -> SharedEmojiSet {
    let corpora: Vec<&str> = table.corpora().collect();
    let mut candidates: BTreeSet<&str> = BTreeSet::new();
    for c in &corpora {
        if let Some(per) = table.counts(c) {
            candidates.extend(per.iter().filter(|(_, &n)| n > 0).map(|(e, _)| e.as_str()));
        }
    }
    let mut members: Vec<(String, u64)> = candidates
        .into_iter()
        .filter(|e| !corpora.is_empty() && corpora.iter().all(|c| table.count(c, e) >= 1))
        .map(|e| (e.to_string(), table.grand_count(e)))
        .filter(|(_, total)| *total >= threshold)
        .collect();
    members.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    SharedEmojiSet {
        threshold,
        emoji: members.into_iter().map(|(e, _)| e).collect(),
    }
}
