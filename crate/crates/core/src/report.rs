//! Analysis document and CSV tables written by the pipeline.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analytics::{CategoryScc, CountryMatrix, CultureTriple, FrequencyReport, IconReport};
use crate::corpus::CultureGroup;
use crate::emoji::{codepoints, EmojiInventory, FrequencyTable, UNCATEGORIZED};
use crate::error::{Error, Result};
use crate::projection::SimilarityTensor;

/// Record counts of one corpus through the ingest filters.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestCounts {
    pub read: u64,
    pub malformed: u64,
    pub after_language: u64,
    pub after_country: u64,
    pub after_retweet: u64,
    /// Posts with at least one token.
    pub tokenized: u64,
    pub tokens: u64,
}

impl IngestCounts {
    /// Stage counts never grow along the filter chain.
    pub fn is_monotone(&self) -> bool {
        let valid = self.read - self.malformed.min(self.read);
        valid >= self.after_language
            && self.after_language >= self.after_country
            && self.after_country >= self.after_retweet
            && self.after_retweet >= self.tokenized
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub id: String,
    pub culture: CultureGroup,
    pub counts: IngestCounts,
    pub vocabulary: usize,
}

/// Everything the analysis stage produces; `report.json` serializes it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub corpora: Vec<CorpusSummary>,
    pub runs: usize,
    pub seed: u64,
    pub shared_threshold: u64,
    /// Category order used for orthonormalization.
    pub schema: Vec<String>,
    pub dropped_categories: Vec<String>,
    pub emotion_items: Vec<String>,
    pub shared_emoji: Vec<String>,
    pub targets: Vec<String>,
    pub frequency: FrequencyReport,
    pub category_scc: Option<Vec<CategoryScc>>,
    pub icons: Option<IconReport>,
    pub country: Option<CountryMatrix>,
    pub triples: Option<Vec<CultureTriple>>,
    pub notes: Vec<String>,
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_err(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `culture_or_corpus,run_or_avg,category,target,similarity`: every run of
/// every corpus, each corpus' run average, then each culture average.
pub fn write_tensor_csv(tensor: &SimilarityTensor, path: &Path, raw: bool) -> Result<()> {
    let (runs, avgs) = if raw {
        (&tensor.raw_runs, &tensor.raw_run_avg)
    } else {
        (&tensor.runs, &tensor.run_avg)
    };
    let mut rows: Vec<[String; 5]> = Vec::new();
    let mut push = |who: &str, run: &str, g: &crate::projection::Grid| {
        for (i, item) in tensor.items.iter().enumerate() {
            for (j, target) in tensor.targets.iter().enumerate() {
                rows.push([
                    who.to_string(),
                    run.to_string(),
                    item.clone(),
                    target.clone(),
                    g.get(i, j).to_string(),
                ]);
            }
        }
    };
    for (c, corpus) in tensor.corpora.iter().enumerate() {
        for (r, g) in runs[c].iter().enumerate() {
            push(corpus, &r.to_string(), g);
        }
        push(corpus, "avg", &avgs[c]);
    }
    if !raw {
        for (group, g) in &tensor.culture_avg {
            push(&group.to_string(), "avg", g);
        }
    } else {
        for group in [CultureGroup::West, CultureGroup::East] {
            let members: Vec<&crate::projection::Grid> = tensor.members(group).iter().map(|&i| &avgs[i]).collect();
            if !members.is_empty() {
                push(&group.to_string(), "avg", &crate::projection::Grid::mean_of(&members));
            }
        }
    }
    write_rows(
        path,
        &["culture_or_corpus", "run_or_avg", "category", "target", "similarity"],
        rows,
    )
}

/// `corpus,emoji,codepoints,count,normalized_freq,category`, per corpus and
/// then pooled per culture.
pub fn write_frequencies_csv(
    table: &FrequencyTable,
    corpora: &[(String, CultureGroup)],
    inventory: &EmojiInventory,
    path: &Path,
) -> Result<()> {
    let cat = |e: &str| inventory.category_of(e).unwrap_or(UNCATEGORIZED).to_string();
    let mut rows = Vec::new();
    let mut emit = |who: &str, counts: &BTreeMap<String, u64>| {
        let total: u64 = counts.values().sum();
        for (e, n) in counts {
            let f = if total > 0 { *n as f64 / total as f64 } else { 0.0 };
            rows.push(vec![
                who.to_string(),
                e.clone(),
                codepoints(e),
                n.to_string(),
                f.to_string(),
                cat(e),
            ]);
        }
    };
    for (id, _) in corpora {
        if let Some(c) = table.counts(id) {
            emit(id, c);
        }
    }
    for group in [CultureGroup::West, CultureGroup::East] {
        let mut pooled: BTreeMap<String, u64> = BTreeMap::new();
        let mut any = false;
        for (id, _) in corpora.iter().filter(|c| c.1 == group) {
            any = true;
            if let Some(c) = table.counts(id) {
                for (e, n) in c {
                    *pooled.entry(e.clone()).or_default() += n;
                }
            }
        }
        if any {
            emit(&group.to_string(), &pooled);
        }
    }
    write_rows(
        path,
        &["corpus", "emoji", "codepoints", "count", "normalized_freq", "category"],
        rows,
    )
}

fn join_top(list: &[(String, f64)]) -> String {
    list.iter().map(|p| p.0.as_str()).collect::<Vec<_>>().join(" ")
}

/// Writes every analysis table present in `analysis` and returns the file
/// names written.
pub fn write_analysis_csvs(analysis: &Analysis, dir: &Path) -> Result<Vec<String>> {
    let mut written = Vec::new();
    let f = &analysis.frequency;
    write_rows(
        &dir.join("frequency_categories.csv"),
        &["category", "west", "east", "scc"],
        f.categories
            .iter()
            .map(|c| vec![c.category.clone(), c.west.to_string(), c.east.to_string(), opt(c.scc)]),
    )?;
    written.push("frequency_categories.csv".to_string());

    if let Some(cs) = &analysis.category_scc {
        write_rows(
            &dir.join("category_scc.csv"),
            &["category", "rho", "top5_west", "top5_east"],
            cs.iter().map(|c| {
                vec![
                    c.category.clone(),
                    c.rho.to_string(),
                    join_top(&c.top5_west),
                    join_top(&c.top5_east),
                ]
            }),
        )?;
        written.push("category_scc.csv".to_string());
    }
    if let Some(icons) = &analysis.icons {
        write_rows(
            &dir.join("icon_scc.csv"),
            &["emoji", "scc", "unicode_category"],
            icons
                .icons
                .iter()
                .map(|i| vec![i.emoji.clone(), i.scc.to_string(), i.unicode_category.clone()]),
        )?;
        write_rows(
            &dir.join("icon_categories.csv"),
            &["unicode_category", "count", "mean", "std"],
            icons.by_category.iter().map(|g| {
                vec![
                    g.category.clone(),
                    g.count.to_string(),
                    g.mean.to_string(),
                    g.std.to_string(),
                ]
            }),
        )?;
        written.push("icon_scc.csv".to_string());
        written.push("icon_categories.csv".to_string());
    }
    if let Some(m) = &analysis.country {
        let mut header = vec!["corpus"];
        header.extend(m.corpora.iter().map(String::as_str));
        write_rows(
            &dir.join("country_matrix.csv"),
            &header,
            m.corpora.iter().zip(&m.matrix).map(|(id, row)| {
                std::iter::once(id.clone())
                    .chain(row.iter().map(|v| v.to_string()))
                    .collect::<Vec<_>>()
            }),
        )?;
        written.push("country_matrix.csv".to_string());
    }
    if let Some(t) = &analysis.triples {
        write_rows(
            &dir.join("triples.csv"),
            &["item", "in_west", "in_east", "cross"],
            t.iter()
                .map(|x| vec![x.item.clone(), opt(x.in_west), opt(x.in_east), opt(x.cross)]),
        )?;
        written.push("triples.csv".to_string());
    }
    Ok(written)
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e.line(), e.to_string()))
}
