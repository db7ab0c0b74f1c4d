//! Synthetic two-culture corpora for pipeline tests.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CATEGORIES: [&str; 6] = ["alpha", "bravo", "charlie", "delta", "echo", "foxtrot"];
/// Emoji tied to `alpha` in every corpus.
pub const E1: &str = "😀";
/// Emoji tied to `alpha` in the West and to `charlie` in the East.
pub const E2: &str = "😢";
/// Remaining emoji and their home category.
pub const OTHERS: [(&str, usize); 7] = [
    ("🍕", 1),
    ("🚗", 2),
    ("🐶", 3),
    ("⚽", 4),
    ("🎉", 5),
    ("❤", 2),
    ("😂", 4),
];
const PROFILE: [f64; 6] = [0.5, 0.25, 0.12, 0.08, 0.05, 0.0];
const FILLERS: [&str; 8] = ["the", "and", "so", "very", "just", "today", "now", "with"];
const EMOTIONS: [&str; 12] = [
    "anger",
    "angry",
    "disgust",
    "disgusted",
    "fear",
    "terrified",
    "happiness",
    "happy",
    "sadness",
    "sad",
    "surprise",
    "surprised",
];

pub struct Corpus {
    pub id: &'static str,
    pub west: bool,
    pub lang: &'static str,
    pub country: &'static str,
}

pub const CORPORA: [Corpus; 5] = [
    Corpus {
        id: "US",
        west: true,
        lang: "en",
        country: "US",
    },
    Corpus {
        id: "UK",
        west: true,
        lang: "en",
        country: "GB",
    },
    Corpus {
        id: "CA",
        west: true,
        lang: "en",
        country: "CA",
    },
    Corpus {
        id: "CN",
        west: false,
        lang: "zh",
        country: "CN",
    },
    Corpus {
        id: "JP",
        west: false,
        lang: "ja",
        country: "JP",
    },
];

pub fn word(category: usize, k: usize) -> String {
    format!("{}{k}", CATEGORIES[category])
}

/// Category weights for an emoji whose strongest category is `home`.
fn profile(home: usize) -> [f64; 6] {
    let mut p = [0.0; 6];
    for (c, slot) in p.iter_mut().enumerate() {
        *slot = PROFILE[(c + 6 - home) % 6];
    }
    p
}

fn pick(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut r = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if r < *w {
            return i;
        }
        r -= w;
    }
    weights.len() - 1
}

fn post_text(rng: &mut ChaCha8Rng, west: bool) -> String {
    let mut emoji_pool: Vec<(&str, usize)> = vec![(E1, 0), (E2, if west { 0 } else { 2 })];
    emoji_pool.extend(OTHERS);
    let mut tokens: Vec<String> = Vec::new();
    let category = if rng.random::<f64>() < 0.2 {
        rng.random_range(0..6)
    } else {
        let &(emoji, home) = emoji_pool.choose(rng).unwrap();
        tokens.push(emoji.to_string());
        if emoji == E1 || emoji == E2 {
            home
        } else {
            pick(rng, &profile(home))
        }
    };
    for _ in 0..4 {
        tokens.push(word(category, rng.random_range(0..10)));
    }
    if !tokens.iter().any(|t| t == E1 || t == E2) {
        // categories next to each other in the cycle share contexts
        let next = (category + if rng.random_bool(0.5) { 1 } else { 5 }) % 6;
        tokens.push(word(next, rng.random_range(0..10)));
    }
    for _ in 0..2 {
        tokens.push(FILLERS.choose(rng).unwrap().to_string());
    }
    if rng.random::<f64>() < 0.5 {
        tokens.push(EMOTIONS.choose(rng).unwrap().to_string());
    }
    let n = tokens.len();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        tokens.swap(i, j);
    }
    tokens.join(" ")
}

fn json_line(id: &str, text: &str, country: &str, lang: &str) -> String {
    serde_json::json!({ "post_id": id, "text": text, "country": country, "lang": lang }).to_string()
}

/// Writes one JSONL file per corpus, including records that the filters
/// must drop: 7 malformed, 11 wrong language, 5 wrong country, 13 retweets.
pub fn write_corpora(dir: &Path, posts: usize, seed: u64) -> Vec<PathBuf> {
    let mut paths = Vec::new();
    for (ci, c) in CORPORA.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(31).wrapping_add(ci as u64));
        let mut out = String::new();
        for i in 0..posts {
            let text = post_text(&mut rng, c.west);
            let _ = writeln!(out, "{}", json_line(&format!("{}-{i}", c.id), &text, c.country, c.lang));
        }
        for i in 0..7 {
            let _ = writeln!(out, "{{\"post_id\": \"bad{i}\", \"text\": ");
        }
        for i in 0..11 {
            let _ = writeln!(
                out,
                "{}",
                json_line(&format!("lang{i}"), "alpha1 alpha2 😀", c.country, "fr")
            );
        }
        for i in 0..5 {
            let _ = writeln!(
                out,
                "{}",
                json_line(&format!("geo{i}"), "alpha1 alpha2 😀", "BR", c.lang)
            );
        }
        for i in 0..13 {
            let text = if c.west {
                "RT @someone: alpha1 😀"
            } else {
                "@someone// alpha1 😀"
            };
            let _ = writeln!(out, "{}", json_line(&format!("rt{i}"), text, c.country, c.lang));
        }
        let path = dir.join(format!("{}.jsonl", c.id));
        std::fs::write(&path, out).unwrap();
        paths.push(path);
    }
    paths
}

/// Lexicon over the six categories; `extra` adds a category only this
/// lexicon has, which must fall out of the shared schema.
pub fn lexicon_text(extra: Option<&str>) -> String {
    let mut s = String::from("%\n");
    for (i, c) in CATEGORIES.iter().enumerate() {
        let _ = writeln!(s, "{}\t{c}", i + 1);
    }
    if let Some(e) = extra {
        let _ = writeln!(s, "99\t{e}");
    }
    s.push_str("%\n");
    for (i, c) in CATEGORIES.iter().enumerate() {
        // half the words literally, the rest through one stem
        for k in 0..5 {
            let _ = writeln!(s, "{}\t{}", word(i, k), i + 1);
        }
        let _ = writeln!(s, "{c}*\t{}", i + 1);
    }
    if extra.is_some() {
        s.push_str("the\t99\n");
    }
    s
}

pub const EKMAN_TOML: &str = r#"
[en]
anger = ["anger", "angry"]
disgust = ["disgust", "disgusted"]
fear = ["fear", "terrified"]
happiness = ["happiness", "happy"]
sadness = ["sadness", "sad"]
surprise = ["surprise", "surprised"]

[zh]
anger = ["anger", "angry"]
disgust = ["disgust", "disgusted"]
fear = ["fear", "terrified"]
happiness = ["happiness", "happy"]
sadness = ["sadness", "sad"]
surprise = ["surprise", "surprised"]

[ja]
anger = ["anger", "angry"]
disgust = ["disgust", "disgusted"]
fear = ["fear", "terrified"]
happiness = ["happiness", "happy"]
sadness = ["sadness", "sad"]
surprise = ["surprise", "surprised"]
"#;

pub struct FixtureOptions {
    pub posts: usize,
    pub runs: usize,
    pub dim: usize,
    pub epochs: usize,
    pub seed: u64,
    pub threshold: u64,
    /// Corpus ids to include; all when empty.
    pub only: Vec<&'static str>,
}

impl Default for FixtureOptions {
    fn default() -> Self {
        Self {
            posts: 4000,
            runs: 2,
            dim: 24,
            epochs: 20,
            seed: 11,
            threshold: 5,
            only: Vec::new(),
        }
    }
}

/// Writes corpora, lexicons, emotion words and `config.toml` into `dir`.
pub fn write_fixture(dir: &Path, opts: &FixtureOptions) -> PathBuf {
    write_corpora(dir, opts.posts, opts.seed);
    std::fs::write(dir.join("en.dic"), lexicon_text(Some("extra"))).unwrap();
    std::fs::write(dir.join("asia.dic"), lexicon_text(None)).unwrap();
    std::fs::write(dir.join("ekman.toml"), EKMAN_TOML).unwrap();
    let mut cfg = format!(
        "seed = {}\nruns = {}\nshared_threshold = {}\nekman = \"ekman.toml\"\n\n[train]\ndim = {}\nepochs = {}\nmin_count = 3\nsubsample = 0.0\n",
        opts.seed, opts.runs, opts.threshold, opts.dim, opts.epochs
    );
    for c in CORPORA
        .iter()
        .filter(|c| opts.only.is_empty() || opts.only.contains(&c.id))
    {
        let lex = if c.west { "en.dic" } else { "asia.dic" };
        let _ = write!(
            cfg,
            "\n[[corpus]]\nid = \"{}\"\nculture = \"{}\"\ninputs = [\"{}.jsonl\"]\nlanguage = \"{}\"\ncountries = [\"{}\"]\npre_tokenized = {}\nlexicon = \"{lex}\"\n",
            c.id,
            if c.west { "West" } else { "East" },
            c.id,
            c.lang,
            c.country,
            !c.west
        );
    }
    let path = dir.join("config.toml");
    std::fs::write(&path, cfg).unwrap();
    path
}
