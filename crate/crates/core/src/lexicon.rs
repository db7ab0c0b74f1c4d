//! LIWC-style category lexicons (`.dic` layout) and the Ekman emotion word list.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A lexicon entry: a literal word or a prefix stem ending in `*`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Pattern {
    Literal(String),
    Prefix(String),
}

impl Pattern {
    pub fn parse(raw: &str) -> std::result::Result<Self, String> {
        if raw.is_empty() {
            return Err("empty pattern".into());
        }
        match raw.find('*') {
            None => Ok(Pattern::Literal(raw.to_string())),
            Some(pos) if pos == raw.len() - 1 && pos > 0 => Ok(Pattern::Prefix(raw[..pos].to_string())),
            Some(_) => Err(format!("wildcard must be final and follow a stem: {raw:?}")),
        }
    }

    pub fn matches(&self, token: &str) -> bool {
        match self {
            Pattern::Literal(w) => w == token,
            Pattern::Prefix(p) => token.starts_with(p.as_str()),
        }
    }
}

impl std::fmt::Display for Pattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Pattern::Literal(w) => f.write_str(w),
            Pattern::Prefix(p) => write!(f, "{p}*"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Category {
    pub name: String,
    pub patterns: BTreeSet<Pattern>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Lexicon {
    pub language: String,
    pub categories: BTreeMap<u32, Category>,
}

impl Lexicon {
    pub fn load(path: &Path, language: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string(), language)
    }

    /// Parses the `.dic` layout: a header of `id name` lines between two `%`
    /// lines, then body lines `word id id ...`. Duplicate body lines are
    /// merged; a word may sit in several categories.
    pub fn parse(text: &str, source: &str, language: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let mut categories: BTreeMap<u32, Category> = BTreeMap::new();

        loop {
            match lines.next() {
                Some((_, l)) if l.trim().is_empty() => continue,
                Some((_, l)) if l.trim() == "%" => break,
                Some((i, _)) => return Err(Error::parse(source, i + 1, "expected opening `%` line")),
                None => return Err(Error::parse(source, 0, "empty lexicon")),
            }
        }
        let mut closed = false;
        let mut names = BTreeSet::new();
        for (i, raw) in lines.by_ref() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if line == "%" {
                closed = true;
                break;
            }
            let mut parts = line.split_whitespace();
            let id: u32 = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::parse(source, i + 1, "header line must start with a numeric id"))?;
            let name = parts.collect::<Vec<_>>().join(" ");
            if name.is_empty() {
                return Err(Error::parse(source, i + 1, "category without a name"));
            }
            if !names.insert(name.clone()) {
                return Err(Error::parse(source, i + 1, format!("duplicate category name {name:?}")));
            }
            if categories.contains_key(&id) {
                return Err(Error::parse(source, i + 1, format!("duplicate category id {id}")));
            }
            categories.insert(
                id,
                Category {
                    name,
                    patterns: BTreeSet::new(),
                },
            );
        }
        if !closed {
            return Err(Error::parse(
                source,
                text.lines().count(),
                "missing closing `%` after header",
            ));
        }

        for (i, raw) in lines {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            // word fields come first; trailing all-digit fields are category ids
            let split = fields
                .iter()
                .rposition(|f| !f.chars().all(|c| c.is_ascii_digit()))
                .map(|p| p + 1)
                .unwrap_or(0);
            if split == 0 {
                return Err(Error::parse(source, i + 1, "body line without a word"));
            }
            if split == fields.len() {
                return Err(Error::parse(source, i + 1, "body line without category ids"));
            }
            let word = fields[..split].join(" ");
            let pattern = Pattern::parse(&word).map_err(|m| Error::parse(source, i + 1, m))?;
            for f in &fields[split..] {
                let id: u32 = f.parse().map_err(|_| Error::parse(source, i + 1, "bad id"))?;
                let cat = categories
                    .get_mut(&id)
                    .ok_or_else(|| Error::parse(source, i + 1, format!("undeclared category id {id}")))?;
                cat.patterns.insert(pattern.clone());
            }
        }
        Ok(Self {
            language: language.to_string(),
            categories,
        })
    }

    /// Writes the lexicon back in `.dic` layout.
    pub fn to_dic(&self) -> String {
        let mut out = String::from("%\n");
        for (id, cat) in &self.categories {
            out.push_str(&format!("{id}\t{}\n", cat.name));
        }
        out.push_str("%\n");
        let mut by_pattern: BTreeMap<&Pattern, Vec<u32>> = BTreeMap::new();
        for (id, cat) in &self.categories {
            for p in &cat.patterns {
                by_pattern.entry(p).or_default().push(*id);
            }
        }
        for (p, ids) in by_pattern {
            out.push_str(&p.to_string());
            for id in ids {
                out.push_str(&format!("\t{id}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn category_names(&self) -> BTreeSet<&str> {
        self.categories.values().map(|c| c.name.as_str()).collect()
    }

    pub fn category(&self, name: &str) -> Option<&Category> {
        self.categories.values().find(|c| c.name == name)
    }
}

/// Concrete in-vocabulary tokens per category.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ExpandedLexicon {
    pub tokens: BTreeMap<String, BTreeSet<String>>,
    /// Patterns that matched no vocabulary token.
    pub unmatched_patterns: usize,
    /// Categories left with no in-vocabulary token.
    pub degenerate: Vec<String>,
}

/// Expands literals and prefix stems against a vocabulary.
pub fn expand_patterns<'a, I>(lexicon: &Lexicon, vocabulary: I) -> ExpandedLexicon
where
    I: IntoIterator<Item = &'a str>,
{
    let mut sorted: Vec<&str> = vocabulary.into_iter().collect();
    sorted.sort_unstable();
    sorted.dedup();

    let mut out = ExpandedLexicon::default();
    for cat in lexicon.categories.values() {
        let mut set = BTreeSet::new();
        for p in &cat.patterns {
            let hit = match p {
                Pattern::Literal(w) => {
                    let found = sorted.binary_search(&w.as_str()).is_ok();
                    if found {
                        set.insert(w.clone());
                    }
                    found
                }
                Pattern::Prefix(stem) => {
                    let start = sorted.partition_point(|t| *t < stem.as_str());
                    let before = set.len();
                    set.extend(
                        sorted[start..]
                            .iter()
                            .take_while(|t| t.starts_with(stem.as_str()))
                            .map(|t| t.to_string()),
                    );
                    set.len() > before || sorted.get(start).is_some_and(|t| t.starts_with(stem.as_str()))
                }
            };
            if !hit {
                out.unmatched_patterns += 1;
            }
        }
        if set.is_empty() {
            out.degenerate.push(cat.name.clone());
        }
        out.tokens.insert(cat.name.clone(), set);
    }
    out
}

/// Category names common to all lexicons, in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharedCategorySchema {
    pub categories: Vec<String>,
}

pub fn shared_schema(lexicons: &[&Lexicon]) -> Result<SharedCategorySchema> {
    let mut iter = lexicons.iter();
    let first = iter
        .next()
        .ok_or_else(|| Error::Config("shared schema needs at least one lexicon".into()))?;
    let mut common: BTreeSet<&str> = first.category_names();
    for lex in iter {
        let names = lex.category_names();
        common.retain(|n| names.contains(n));
    }
    if common.is_empty() {
        return Err(Error::EmptySchema);
    }
    Ok(SharedCategorySchema {
        categories: common.into_iter().map(str::to_string).collect(),
    })
}

/// Noun and adjective form of one emotion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmotionForms {
    pub noun: String,
    pub adjective: String,
}

/// Emotion words per language, keyed by emotion name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EkmanWordList {
    pub languages: BTreeMap<String, BTreeMap<String, EmotionForms>>,
}

impl Default for EkmanWordList {
    fn default() -> Self {
        let english = [
            ("anger", "anger", "angry"),
            ("disgust", "disgust", "disgusted"),
            ("fear", "fear", "terrified"),
            ("happiness", "happiness", "happy"),
            ("sadness", "sadness", "sad"),
            ("surprise", "surprise", "surprised"),
        ]
        .into_iter()
        .map(|(e, n, a)| {
            (
                e.to_string(),
                EmotionForms {
                    noun: n.into(),
                    adjective: a.into(),
                },
            )
        })
        .collect();
        Self {
            languages: BTreeMap::from([("en".to_string(), english)]),
        }
    }
}

/// An emotion word with a language-independent label such as `sadness/noun`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmotionWord {
    pub label: String,
    pub word: String,
}

impl EkmanWordList {
    /// Parses a TOML document with one table per language and one
    /// `emotion = [noun, adjective]` entry per emotion.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let raw: BTreeMap<String, BTreeMap<String, Vec<String>>> =
            toml::from_str(text).map_err(|e| Error::parse(source, 0, e.to_string()))?;
        let mut languages = BTreeMap::new();
        for (lang, emotions) in raw {
            let mut forms = BTreeMap::new();
            for (emotion, words) in emotions {
                if words.len() != 2 || words.iter().any(|w| w.trim().is_empty()) {
                    return Err(Error::parse(
                        source,
                        0,
                        format!("{lang}.{emotion}: expected [noun, adjective]"),
                    ));
                }
                forms.insert(
                    emotion,
                    EmotionForms {
                        noun: words[0].clone(),
                        adjective: words[1].clone(),
                    },
                );
            }
            languages.insert(lang, forms);
        }
        Ok(Self { languages })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Words for a language tag, matched on the primary subtag.
    pub fn words_for(&self, lang: &str) -> Option<Vec<EmotionWord>> {
        let primary = lang.split(['-', '_']).next().unwrap_or(lang).to_ascii_lowercase();
        let forms = self.languages.get(lang).or_else(|| self.languages.get(&primary))?;
        let mut out = Vec::with_capacity(forms.len() * 2);
        for (emotion, f) in forms {
            out.push(EmotionWord {
                label: format!("{emotion}/noun"),
                word: f.noun.clone(),
            });
            out.push(EmotionWord {
                label: format!("{emotion}/adj"),
                word: f.adjective.clone(),
            });
        }
        Some(out)
    }
}
