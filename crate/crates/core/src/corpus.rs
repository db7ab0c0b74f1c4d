//! Post ingestion: record parsing, filtering, meta-token normalization and
//! tokenization into training streams.

use std::fmt;
use std::path::PathBuf;
use std::sync::LazyLock;

use regex::{Captures, Regex};
use serde::{Deserialize, Serialize};

use crate::emoji::{EmojiInventory, Segment};
use crate::error::{Error, Result};

/// Default direct-retweet prefixes: Twitter `RT @user:` and Weibo `@user//`.
pub const DEFAULT_RETWEET_PATTERNS: [&str; 2] = [r"^\s*RT @\w+:", r"^\s*@\w+//"];

pub const META_TOKENS: [&str; 9] = [
    "<url>",
    "<email>",
    "<user>",
    "<percent>",
    "<money>",
    "<phone>",
    "<emoticon>",
    "<time>",
    "<date>",
];

/// One social-media post as it arrives on an input line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostRecord {
    pub post_id: String,
    pub text: String,
    pub country: String,
    pub lang: String,
    #[serde(default)]
    pub pre_tokenized: bool,
}

impl PostRecord {
    /// Parses one JSON input line and checks the record invariants.
    pub fn from_json_line(line: &str) -> std::result::Result<Self, String> {
        let rec: PostRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
        if rec.text.trim().is_empty() {
            return Err("empty text".into());
        }
        if rec.country.trim().is_empty() || rec.lang.trim().is_empty() {
            return Err("empty country or lang".into());
        }
        Ok(rec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CultureGroup {
    West,
    East,
}

impl fmt::Display for CultureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CultureGroup::West => f.write_str("West"),
            CultureGroup::East => f.write_str("East"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusHandle {
    pub corpus_id: String,
    pub culture: CultureGroup,
    pub sources: Vec<PathBuf>,
}

/// Why a record was dropped, or `Keep`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Keep,
    Language,
    Country,
    Retweet,
}

#[derive(Debug, Clone)]
pub struct FilterConfig {
    pub languages: Vec<String>,
    pub countries: Vec<String>,
    retweet: Vec<Regex>,
}

impl FilterConfig {
    pub fn new(languages: Vec<String>, countries: Vec<String>, retweet_patterns: &[String]) -> Result<Self> {
        let retweet = retweet_patterns
            .iter()
            .map(|p| Regex::new(p).map_err(|e| Error::Config(format!("retweet pattern {p:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            languages,
            countries,
            retweet,
        })
    }

    pub fn with_default_markers(languages: Vec<String>, countries: Vec<String>) -> Self {
        let pats: Vec<String> = DEFAULT_RETWEET_PATTERNS.iter().map(|s| s.to_string()).collect();
        Self::new(languages, countries, &pats).expect("default patterns compile")
    }

    pub fn language_ok(&self, rec: &PostRecord) -> bool {
        self.languages.is_empty() || self.languages.iter().any(|l| lang_matches(l, &rec.lang))
    }

    pub fn country_ok(&self, rec: &PostRecord) -> bool {
        self.countries.is_empty()
            || self
                .countries
                .iter()
                .any(|c| c.eq_ignore_ascii_case(rec.country.trim()))
    }

    pub fn is_retweet(&self, rec: &PostRecord) -> bool {
        self.retweet.iter().any(|r| r.is_match(&rec.text))
    }

    /// Applies the predicates in the order language, country, retweet.
    pub fn check(&self, rec: &PostRecord) -> Verdict {
        if !self.language_ok(rec) {
            Verdict::Language
        } else if !self.country_ok(rec) {
            Verdict::Country
        } else if self.is_retweet(rec) {
            Verdict::Retweet
        } else {
            Verdict::Keep
        }
    }
}

/// `configured` matches `tag` when it equals it or is a subtag prefix of it
/// (`en` matches `en-GB`), case-insensitively.
pub fn lang_matches(configured: &str, tag: &str) -> bool {
    let c = configured.trim().to_ascii_lowercase().replace('_', "-");
    let t = tag.trim().to_ascii_lowercase().replace('_', "-");
    t == c || t.starts_with(&format!("{c}-"))
}

/// Languages written without spaces between words; no lowercasing for these.
pub fn is_space_delimited(lang: &str) -> bool {
    let primary = lang.trim().split(['-', '_']).next().unwrap_or("").to_ascii_lowercase();
    !matches!(primary.as_str(), "zh" | "ja" | "th" | "lo" | "km" | "my" | "bo")
}

pub fn filter_post(record: PostRecord, config: &FilterConfig) -> Option<PostRecord> {
    match config.check(&record) {
        Verdict::Keep => Some(record),
        _ => None,
    }
}

fn re(pattern: &str) -> Regex {
    Regex::new(pattern).expect("static pattern")
}

static URL_RE: LazyLock<Regex> = LazyLock::new(|| re(r#"(?i)(?:https?://|www\.)[^\s<>"]+"#));
static EMAIL_RE: LazyLock<Regex> =
    LazyLock::new(|| re(r"(?i)\b[a-z0-9._%+-]+@[a-z0-9-]+(?:\.[a-z0-9-]+)*\.[a-z]{2,}\b"));
static USER_RE: LazyLock<Regex> = LazyLock::new(|| re(r"@\w+"));
static DATE_RE: LazyLock<Regex> = LazyLock::new(|| {
    re(
        r"(?i)\b\d{1,4}[/.-]\d{1,2}[/.-]\d{1,4}\b|\b(?:jan|feb|mar|apr|may|jun|jul|aug|sep|sept|oct|nov|dec)[a-z]*\.? \d{1,2}(?:st|nd|rd|th)?(?:,? \d{4})?\b",
    )
});
static TIME_RE: LazyLock<Regex> =
    LazyLock::new(|| re(r"(?i)\b\d{1,2}:\d{2}(?::\d{2})?(?:\s?[ap]m\b)?|\b\d{1,2}\s?[ap]m\b"));
static PHONE_RE: LazyLock<Regex> =
    LazyLock::new(|| re(r"(?:\+\d{1,3}[\s.-]?)?(?:\(\d{3}\)|\b\d{3})[\s.-]?\d{3}[\s.-]?\d{4}\b"));
static MONEY_RE: LazyLock<Regex> = LazyLock::new(|| {
    re(r"[$€£¥]\s?\d+(?:[.,]\d+)*|\b\d+(?:[.,]\d+)*\s?(?:[$€£¥]|(?i:usd|eur|gbp|jpy|dollars?|euros?|pounds?|yen)\b)")
});
static PERCENT_RE: LazyLock<Regex> = LazyLock::new(|| re(r"\b\d+(?:[.,]\d+)?\s?%"));
static SPAN_RE: LazyLock<Regex> = LazyLock::new(|| re(r"\S+"));

const EMOTICONS: [&str; 34] = [
    ":)", ":-)", ":(", ":-(", ":D", ":-D", ";)", ";-)", ":P", ":-P", ":p", ":-p", ":o", ":O", ":/", ":-/", ":|", ":'(",
    ":*", ":-*", "<3", "</3", "xD", "XD", "xd", ":]", ":[", "=)", "=(", "^_^", "^^", "-_-", "o_O", "O_o",
];

/// Replaces URLs, e-mail addresses, @-mentions, dates, times, phone
/// numbers, currency amounts, percentages and ASCII emoticons with
/// meta-tokens. Everything else is preserved; the function is idempotent.
pub fn normalize_text(text: &str) -> String {
    let mut out = text.to_string();
    for (pattern, token) in [
        (&*URL_RE, "<url>"),
        (&*EMAIL_RE, "<email>"),
        (&*USER_RE, "<user>"),
        (&*DATE_RE, "<date>"),
        (&*TIME_RE, "<time>"),
        (&*PHONE_RE, "<phone>"),
        (&*MONEY_RE, "<money>"),
        (&*PERCENT_RE, "<percent>"),
    ] {
        if pattern.is_match(&out) {
            out = pattern.replace_all(&out, token).into_owned();
        }
    }
    SPAN_RE
        .replace_all(&out, |c: &Captures| {
            let span = &c[0];
            if EMOTICONS.contains(&span) {
                "<emoticon>".to_string()
            } else {
                span.to_string()
            }
        })
        .into_owned()
}

static WORD_RE: LazyLock<Regex> =
    LazyLock::new(|| re(r"<(?:url|email|user|percent|money|phone|emoticon|time|date)>|#\w+|\w+(?:['’-]\w+)*|[^\s\w]"));

/// Tokens of one post.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenStream {
    pub post_id: String,
    pub tokens: Vec<String>,
}

impl AsRef<[String]> for TokenStream {
    fn as_ref(&self) -> &[String] {
        &self.tokens
    }
}

impl TokenStream {
    /// `post_id<TAB>tok tok tok`
    pub fn to_line(&self) -> String {
        let id: String = self
            .post_id
            .chars()
            .map(|c| if c == '\t' || c == '\n' || c == '\r' { ' ' } else { c })
            .collect();
        format!("{}\t{}", id, self.tokens.join(" "))
    }

    pub fn from_line(line: &str) -> Option<Self> {
        let (id, rest) = line.split_once('\t')?;
        Some(Self {
            post_id: id.to_string(),
            tokens: rest.split(' ').filter(|t| !t.is_empty()).map(str::to_string).collect(),
        })
    }
}

fn push_word(tokens: &mut Vec<String>, word: &str, lowercase: bool) {
    if word.is_empty() {
        return;
    }
    if META_TOKENS.contains(&word) || !lowercase {
        tokens.push(word.to_string());
    } else {
        tokens.push(word.to_lowercase());
    }
}

/// Splits a post into verbal tokens, meta-tokens and standalone emoji.
///
/// Emoji are located on the raw text first, so an emoji glued to a word or
/// URL is always split out. Pre-tokenized records are split on whitespace
/// only.
pub fn tokenize(record: &PostRecord, inventory: &EmojiInventory) -> TokenStream {
    let lowercase = is_space_delimited(&record.lang);
    let mut tokens = Vec::new();
    for segment in inventory.scan(&record.text) {
        match segment {
            Segment::Emoji(e) => tokens.push(e),
            Segment::Text(text) => {
                if record.pre_tokenized {
                    for piece in text.split_whitespace() {
                        push_word(&mut tokens, &normalize_text(piece), lowercase);
                    }
                } else {
                    let normalized = normalize_text(&text);
                    for m in WORD_RE.find_iter(&normalized) {
                        push_word(&mut tokens, m.as_str(), lowercase);
                    }
                }
            }
        }
    }
    TokenStream {
        post_id: record.post_id.clone(),
        tokens,
    }
}
