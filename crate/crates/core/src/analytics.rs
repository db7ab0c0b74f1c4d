//! Rank and product-moment correlations and the cross-cultural analyses
//! built on them.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::CultureGroup;
use crate::embedding::EmbeddingModel;
use crate::emoji::{EmojiInventory, FrequencyTable, SharedEmojiSet, UNCATEGORIZED};
use crate::error::{Error, Result};
use crate::projection::{cosine, mean, Grid, SimilarityTensor};

/// 1-based ranks with ties given the average of the positions they span.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && x[order[j]] == x[order[i]] {
            j += 1;
        }
        // positions i+1 ..= j
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

fn check_inputs(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::UndefinedCorrelation(format!(
            "length mismatch {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::UndefinedCorrelation(format!(
            "need at least 3 values, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::UndefinedCorrelation("non-finite value".into()));
    }
    Ok(())
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_inputs(x, y)?;
    let mx = mean(x);
    let my = mean(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("zero variance".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_inputs(x, y)?;
    pearson(&average_ranks(x), &average_ranks(y)).map_err(|_| Error::UndefinedCorrelation("zero rank variance".into()))
}

/// Indices of the `k` largest values, descending; ties keep input order.
fn top_indices(values: &[f64], k: usize, largest: bool) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        let o = values[b].total_cmp(&values[a]);
        (if largest { o } else { o.reverse() }).then(a.cmp(&b))
    });
    idx.truncate(k);
    idx
}

fn cultures(tensor: &SimilarityTensor) -> Result<(&Grid, &Grid)> {
    match (tensor.culture(CultureGroup::West), tensor.culture(CultureGroup::East)) {
        (Some(w), Some(e)) => Ok((w, e)),
        _ => Err(Error::Config(
            "cross-culture analysis needs corpora in both West and East".into(),
        )),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryScc {
    pub category: String,
    pub rho: f64,
    pub top5_west: Vec<(String, f64)>,
    pub top5_east: Vec<(String, f64)>,
}

/// Per category, the rank correlation of its West and East similarity
/// vectors over all targets, with the five most similar targets per culture.
pub fn category_scc(tensor: &SimilarityTensor) -> Result<Vec<CategoryScc>> {
    let (w, e) = cultures(tensor)?;
    if tensor.categories.len() < 2 {
        return Err(Error::UndefinedCorrelation("need at least 2 categories".into()));
    }
    let top = |row: &[f64]| {
        top_indices(row, 5, true)
            .into_iter()
            .map(|j| (tensor.targets[j].clone(), row[j]))
            .collect::<Vec<_>>()
    };
    tensor
        .categories
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let rho = spearman(w.row(i), e.row(i))
                .map_err(|err| Error::UndefinedCorrelation(format!("category {name:?}: {err}")))?;
            Ok(CategoryScc {
                category: name.clone(),
                rho,
                top5_west: top(w.row(i)),
                top5_east: top(e.row(i)),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IconScc {
    pub emoji: String,
    pub scc: f64,
    pub unicode_category: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStat {
    pub category: String,
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IconReport {
    pub icons: Vec<IconScc>,
    pub by_category: Vec<GroupStat>,
    pub top5: Vec<IconScc>,
    pub bottom5: Vec<IconScc>,
}

/// Per target, the rank correlation of its West and East profiles across
/// the categories, aggregated by Unicode category.
pub fn icon_scc(tensor: &SimilarityTensor, inventory: &EmojiInventory) -> Result<IconReport> {
    let (w, e) = cultures(tensor)?;
    let k = tensor.categories.len();
    if k < 3 {
        return Err(Error::UndefinedCorrelation(format!(
            "icon profiles need at least 3 categories, schema has {k}"
        )));
    }
    let icons: Vec<IconScc> = tensor
        .targets
        .iter()
        .enumerate()
        .map(|(j, emoji)| {
            let pw: Vec<f64> = (0..k).map(|i| w.get(i, j)).collect();
            let pe: Vec<f64> = (0..k).map(|i| e.get(i, j)).collect();
            let scc =
                spearman(&pw, &pe).map_err(|err| Error::UndefinedCorrelation(format!("emoji {emoji:?}: {err}")))?;
            Ok(IconScc {
                emoji: emoji.clone(),
                scc,
                unicode_category: inventory.category_of(emoji).unwrap_or(UNCATEGORIZED).to_string(),
            })
        })
        .collect::<Result<_>>()?;

    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for icon in &icons {
        groups.entry(icon.unicode_category.as_str()).or_default().push(icon.scc);
    }
    let by_category = groups
        .into_iter()
        .map(|(cat, vals)| {
            let m = mean(&vals);
            let var = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / vals.len() as f64;
            GroupStat {
                category: cat.to_string(),
                count: vals.len(),
                mean: m,
                std: var.sqrt(),
            }
        })
        .collect();
    let sccs: Vec<f64> = icons.iter().map(|i| i.scc).collect();
    let top5 = top_indices(&sccs, 5, true)
        .into_iter()
        .map(|j| icons[j].clone())
        .collect();
    let bottom5 = top_indices(&sccs, 5, false)
        .into_iter()
        .map(|j| icons[j].clone())
        .collect();
    Ok(IconReport {
        icons,
        by_category,
        top5,
        bottom5,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryMatrix {
    pub corpora: Vec<String>,
    pub cultures: Vec<CultureGroup>,
    pub emoji: Vec<String>,
    pub excluded: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
    /// Mean of the matrix over West-East corpus pairs.
    pub cross_pair_mean: Option<f64>,
    /// Pearson correlation of the culture-averaged emoji-emoji vectors.
    pub culture_level: Option<f64>,
}

/// Upper-triangle emoji-emoji cosines of one model, row-major over `i < j`.
pub fn pairwise_similarities(model: &EmbeddingModel, emoji: &[String]) -> Result<Vec<f64>> {
    let vecs: Vec<Vec<f64>> = emoji
        .iter()
        .map(|e| model.vector_f64(e).ok_or_else(|| Error::NotFound(e.clone())))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(emoji.len() * emoji.len().saturating_sub(1) / 2);
    for i in 0..vecs.len() {
        for j in i + 1..vecs.len() {
            out.push(cosine(&vecs[i], &vecs[j])?);
        }
    }
    Ok(out)
}

/// Pearson matrix between corpora of their run-averaged emoji-emoji
/// similarity vectors.
pub fn country_similarity_matrix(
    corpora: &[(&str, CultureGroup, &[EmbeddingModel])],
    emoji: &[String],
) -> Result<CountryMatrix> {
    let (kept, excluded): (Vec<String>, Vec<String>) = emoji
        .iter()
        .cloned()
        .partition(|e| corpora.iter().all(|(_, _, runs)| runs.iter().all(|m| m.contains(e))));
    let vectors: Vec<Vec<f64>> = corpora
        .par_iter()
        .map(|(_, _, runs)| {
            let per_run = runs
                .iter()
                .map(|m| pairwise_similarities(m, &kept))
                .collect::<Result<Vec<_>>>()?;
            let mut avg = vec![0.0; per_run.first().map_or(0, Vec::len)];
            let mut buf = Vec::with_capacity(per_run.len());
            for (k, a) in avg.iter_mut().enumerate() {
                buf.clear();
                buf.extend(per_run.iter().map(|r| r[k]));
                *a = mean(&buf);
            }
            Ok(avg)
        })
        .collect::<Result<_>>()?;

    let n = corpora.len();
    let mut matrix = vec![vec![1.0; n]; n];
    for a in 0..n {
        for b in a + 1..n {
            let r = pearson(&vectors[a], &vectors[b])?;
            matrix[a][b] = r;
            matrix[b][a] = r;
        }
    }
    let cultures: Vec<CultureGroup> = corpora.iter().map(|c| c.1).collect();
    let cross: Vec<f64> = (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .filter(|&(a, b)| cultures[a] != cultures[b])
        .map(|(a, b)| matrix[a][b])
        .collect();
    let culture_vec = |g: CultureGroup| -> Option<Vec<f64>> {
        let members: Vec<&Vec<f64>> = vectors
            .iter()
            .zip(&cultures)
            .filter(|(_, c)| **c == g)
            .map(|(v, _)| v)
            .collect();
        if members.is_empty() {
            return None;
        }
        let mut buf = Vec::with_capacity(members.len());
        Some(
            (0..members[0].len())
                .map(|k| {
                    buf.clear();
                    buf.extend(members.iter().map(|m| m[k]));
                    mean(&buf)
                })
                .collect(),
        )
    };
    let culture_level = match (culture_vec(CultureGroup::West), culture_vec(CultureGroup::East)) {
        (Some(w), Some(e)) => Some(pearson(&w, &e)?),
        _ => None,
    };
    Ok(CountryMatrix {
        corpora: corpora.iter().map(|c| c.0.to_string()).collect(),
        cultures,
        emoji: kept,
        excluded,
        matrix,
        cross_pair_mean: (!cross.is_empty()).then(|| mean(&cross)),
        culture_level,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryFrequency {
    pub category: String,
    pub west: f64,
    pub east: f64,
    /// West vs East frequency SCC over shared emoji of this category.
    pub scc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyReport {
    /// Culture-level normalized frequencies.
    pub west: BTreeMap<String, f64>,
    pub east: BTreeMap<String, f64>,
    pub top15_west: Vec<(String, f64)>,
    pub top15_east: Vec<(String, f64)>,
    /// West vs East SCC over the full shared set.
    pub overall_scc: Option<f64>,
    pub categories: Vec<CategoryFrequency>,
    pub warnings: Vec<String>,
}

fn culture_frequencies(table: &FrequencyTable, members: &[&str]) -> BTreeMap<String, f64> {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for c in members {
        if let Some(m) = table.counts(c) {
            for (e, n) in m {
                *counts.entry(e.clone()).or_default() += n;
            }
        }
    }
    let total: u64 = counts.values().sum();
    if total == 0 {
        return BTreeMap::new();
    }
    counts.into_iter().map(|(e, n)| (e, n as f64 / total as f64)).collect()
}

fn top15(freq: &BTreeMap<String, f64>) -> Vec<(String, f64)> {
    let mut v: Vec<(String, f64)> = freq.iter().map(|(e, f)| (e.clone(), *f)).collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v.truncate(15);
    v
}

/// Culture-level frequency comparison: counts are pooled within each culture
/// and normalized by the culture total.
pub fn frequency_analysis(
    table: &FrequencyTable,
    corpora: &[(&str, CultureGroup)],
    inventory: &EmojiInventory,
    shared: &SharedEmojiSet,
) -> FrequencyReport {
    let members = |g: CultureGroup| corpora.iter().filter(|c| c.1 == g).map(|c| c.0).collect::<Vec<_>>();
    let west = culture_frequencies(table, &members(CultureGroup::West));
    let east = culture_frequencies(table, &members(CultureGroup::East));
    let mut warnings = Vec::new();
    let get = |m: &BTreeMap<String, f64>, e: &str| m.get(e).copied().unwrap_or(0.0);

    let overall_scc = if west.is_empty() || east.is_empty() {
        warnings.push("frequency SCC skipped: a culture has no emoji counts".into());
        None
    } else {
        let w: Vec<f64> = shared.emoji.iter().map(|e| get(&west, e)).collect();
        let e: Vec<f64> = shared.emoji.iter().map(|e| get(&east, e)).collect();
        match spearman(&w, &e) {
            Ok(r) => Some(r),
            Err(err) => {
                warnings.push(format!("overall frequency SCC undefined: {err}"));
                None
            }
        }
    };

    let mut by_cat: BTreeMap<String, (f64, f64, Vec<&str>)> = BTreeMap::new();
    for (emoji, cat) in inventory.entries() {
        let slot = by_cat.entry(cat.to_string()).or_insert((0.0, 0.0, Vec::new()));
        slot.0 += get(&west, emoji);
        slot.1 += get(&east, emoji);
        if shared.contains(emoji) {
            slot.2.push(emoji);
        }
    }
    let mut categories = Vec::new();
    for (cat, (w, e, emoji)) in by_cat {
        if w == 0.0 && e == 0.0 {
            warnings.push(format!("Unicode category {cat:?} has no occurrences; omitted"));
            continue;
        }
        let wv: Vec<f64> = emoji.iter().map(|x| get(&west, x)).collect();
        let ev: Vec<f64> = emoji.iter().map(|x| get(&east, x)).collect();
        let scc = match spearman(&wv, &ev) {
            Ok(r) => Some(r),
            Err(err) => {
                warnings.push(format!("frequency SCC for {cat:?} undefined: {err}"));
                None
            }
        };
        categories.push(CategoryFrequency {
            category: cat,
            west: w,
            east: e,
            scc,
        });
    }

    FrequencyReport {
        top15_west: top15(&west),
        top15_east: top15(&east),
        west,
        east,
        overall_scc,
        categories,
        warnings,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CultureTriple {
    pub item: String,
    pub in_west: Option<f64>,
    pub in_east: Option<f64>,
    pub cross: Option<f64>,
}

/// For every item, mean SCC of its run-averaged target profiles over corpus
/// pairs within the West, within the East, and across cultures.
pub fn culture_triples(tensor: &SimilarityTensor) -> Result<Vec<CultureTriple>> {
    let n = tensor.corpora.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    tensor
        .items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let mut west = Vec::new();
            let mut east = Vec::new();
            let mut cross = Vec::new();
            for &(a, b) in &pairs {
                let r = spearman(tensor.run_avg[a].row(i), tensor.run_avg[b].row(i))
                    .map_err(|err| Error::UndefinedCorrelation(format!("item {item:?}: {err}")))?;
                match (tensor.cultures[a], tensor.cultures[b]) {
                    (CultureGroup::West, CultureGroup::West) => west.push(r),
                    (CultureGroup::East, CultureGroup::East) => east.push(r),
                    _ => cross.push(r),
                }
            }
            let m = |v: &[f64]| (!v.is_empty()).then(|| mean(v));
            Ok(CultureTriple {
                item: item.clone(),
                in_west: m(&west),
                in_east: m(&east),
                cross: m(&cross),
            })
        })
        .collect()
}
