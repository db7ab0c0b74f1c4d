//! Category vectors, Gram-Schmidt orthonormalization and the cosine
//! similarity tensor over (corpus, run, item, target).

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::CultureGroup;
use crate::embedding::EmbeddingModel;
use crate::error::{Error, Result};
use crate::lexicon::EmotionWord;

/// Threshold on the residual norm (relative to the input norm) below which a
/// vector is treated as dependent on the ones before it.
pub const RANK_TOLERANCE: f64 = 1e-10;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Mean of `values`, rounded once: the sum is carried as a double-double and
/// divided with an FMA-corrected quotient.
pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let (mut hi, mut lo) = (0.0f64, 0.0f64);
    for &x in values {
        let s = hi + x;
        let bb = s - hi;
        let err = (hi - (s - bb)) + (x - bb);
        hi = s;
        lo += err;
    }
    let s = hi + lo;
    lo -= s - hi;
    hi = s;
    let n = values.len() as f64;
    let q = hi / n;
    let r = (-q).mul_add(n, hi) + lo;
    q + r / n
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    let nu = norm(u);
    let nv = norm(v);
    if nu == 0.0 || nv == 0.0 || !nu.is_finite() || !nv.is_finite() {
        return Err(Error::ZeroNorm);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Mean of the input vectors of `tokens` present in `model`.
///
/// Returns the vector and the number of tokens used. A zero result is
/// returned as is; callers decide whether that makes the category unusable.
pub fn category_vector<'a, I>(name: &str, tokens: I, model: &EmbeddingModel) -> Result<(Vec<f64>, usize)>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut acc = vec![0.0f64; model.dim()];
    let mut n = 0usize;
    for t in tokens {
        if let Some(v) = model.vector(t) {
            for (a, x) in acc.iter_mut().zip(v) {
                *a += *x as f64;
            }
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::DegenerateCategory(name.to_string()));
    }
    let inv = 1.0 / n as f64;
    acc.iter_mut().for_each(|a| *a *= inv);
    Ok((acc, n))
}

/// Classical Gram-Schmidt with one re-orthogonalization pass.
///
/// `names[k]` labels `vectors[k]` in the rank-deficiency error.
pub fn gram_schmidt(names: &[String], vectors: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    assert_eq!(names.len(), vectors.len(), "one name per vector");
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for (name, a) in names.iter().zip(vectors) {
        let scale = norm(a);
        let mut v = a.clone();
        for _ in 0..2 {
            let coeffs: Vec<f64> = basis.iter().map(|q| dot(q, &v)).collect();
            for (q, c) in basis.iter().zip(&coeffs) {
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= c * qi;
                }
            }
        }
        let r = norm(&v);
        let residual = if scale > 0.0 { r / scale } else { 0.0 };
        if residual.is_nan() || residual < RANK_TOLERANCE {
            return Err(Error::RankDeficient {
                category: name.clone(),
                residual,
            });
        }
        v.iter_mut().for_each(|x| *x /= r);
        basis.push(v);
    }
    Ok(basis)
}

/// Raw and orthonormalized category vectors for one (corpus, run).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryVectorSet {
    pub corpus: String,
    pub run: usize,
    /// Orthonormalization order.
    pub order: Vec<String>,
    pub raw: Vec<Vec<f64>>,
    pub ortho: Vec<Vec<f64>>,
    /// In-vocabulary tokens averaged into each raw vector.
    pub sizes: Vec<usize>,
}

/// Dense row-major `rows × cols` table of similarities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Grid {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Elementwise mean of equally shaped grids.
    pub fn mean_of(grids: &[&Grid]) -> Grid {
        let first = grids.first().expect("at least one grid");
        let mut out = Grid::zeros(first.rows, first.cols);
        let mut buf = Vec::with_capacity(grids.len());
        for k in 0..out.data.len() {
            buf.clear();
            buf.extend(grids.iter().map(|g| g.data[k]));
            out.data[k] = mean(&buf);
        }
        out
    }
}

/// One corpus as seen by the projection stage.
#[derive(Debug, Clone, Copy)]
pub struct CorpusInput<'a> {
    pub id: &'a str,
    pub culture: CultureGroup,
    pub models: &'a [EmbeddingModel],
    /// Expanded lexicon tokens per category name.
    pub expanded: &'a BTreeMap<String, BTreeSet<String>>,
    /// Emotion words in this corpus' language; empty disables them.
    pub ekman: &'a [EmotionWord],
}

/// Similarities of every item (category or emotion word) to every target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTensor {
    /// Categories in orthonormalization order.
    pub categories: Vec<String>,
    /// Emotion-word labels such as `sadness/noun`.
    pub ekman: Vec<String>,
    /// `categories` followed by `ekman`; the row order of every grid.
    pub items: Vec<String>,
    pub targets: Vec<String>,
    pub corpora: Vec<String>,
    pub cultures: Vec<CultureGroup>,
    /// `[corpus][run]`, orthonormalized category rows.
    pub runs: Vec<Vec<Grid>>,
    /// `[corpus][run]`, raw category rows.
    pub raw_runs: Vec<Vec<Grid>>,
    pub run_avg: Vec<Grid>,
    pub raw_run_avg: Vec<Grid>,
    pub culture_avg: BTreeMap<CultureGroup, Grid>,
    pub vector_sets: Vec<Vec<CategoryVectorSet>>,
    pub dropped_categories: Vec<String>,
    pub dropped_targets: Vec<String>,
    pub dropped_ekman: Vec<String>,
    pub notes: Vec<String>,
}

impl SimilarityTensor {
    pub fn item_index(&self, item: &str) -> Option<usize> {
        self.items.iter().position(|i| i == item)
    }

    pub fn target_index(&self, target: &str) -> Option<usize> {
        self.targets.iter().position(|t| t == target)
    }

    pub fn corpus_index(&self, id: &str) -> Option<usize> {
        self.corpora.iter().position(|c| c == id)
    }

    pub fn culture(&self, group: CultureGroup) -> Option<&Grid> {
        self.culture_avg.get(&group)
    }

    /// Corpus indices belonging to `group`, in input order.
    pub fn members(&self, group: CultureGroup) -> Vec<usize> {
        (0..self.corpora.len()).filter(|&i| self.cultures[i] == group).collect()
    }
}

/// Builds the tensor: category vectors per run, symmetric removal of
/// degenerate categories and unusable targets, orthonormalization in schema
/// order, cosines, then run and culture averages.
pub fn build_tensor(inputs: &[CorpusInput<'_>], schema: &[String], targets: &[String]) -> Result<SimilarityTensor> {
    if inputs.is_empty() {
        return Err(Error::Config("no corpora to project".into()));
    }
    let runs = inputs[0].models.len();
    if runs == 0 || inputs.iter().any(|c| c.models.len() != runs) {
        return Err(Error::Config(
            "every corpus needs the same non-zero number of runs".into(),
        ));
    }
    let mut notes = Vec::new();

    // categories: drop if empty or zero in any corpus/run
    let mut dropped_categories = BTreeSet::new();
    for c in inputs {
        for name in schema {
            let tokens = c.expanded.get(name);
            let usable = tokens.is_some_and(|t| {
                c.models
                    .iter()
                    .all(|m| match category_vector(name, t.iter().map(String::as_str), m) {
                        Ok((v, _)) => norm(&v) > 0.0,
                        Err(_) => false,
                    })
            });
            if !usable && dropped_categories.insert(name.clone()) {
                notes.push(format!(
                    "category {name:?} is degenerate in corpus {:?}; dropped everywhere",
                    c.id
                ));
            }
        }
    }
    let categories: Vec<String> = schema
        .iter()
        .filter(|n| !dropped_categories.contains(*n))
        .cloned()
        .collect();
    if categories.is_empty() {
        return Err(Error::EmptySchema);
    }

    let mut kept_targets = Vec::new();
    let mut dropped_targets = Vec::new();
    for t in targets {
        let ok = inputs.iter().all(|c| {
            c.models
                .iter()
                .all(|m| m.vector(t).is_some_and(|v| v.iter().any(|x| *x != 0.0)))
        });
        if ok {
            kept_targets.push(t.clone());
        } else {
            notes.push(format!("target {t:?} missing from at least one vocabulary; excluded"));
            dropped_targets.push(t.clone());
        }
    }

    // emotion words: labels present in every corpus, word in vocabulary
    let mut ekman = Vec::new();
    let mut dropped_ekman = Vec::new();
    if inputs.iter().all(|c| !c.ekman.is_empty()) {
        let labels: BTreeSet<&str> = inputs[0].ekman.iter().map(|w| w.label.as_str()).collect();
        for label in labels {
            let ok = inputs.iter().all(|c| {
                c.ekman.iter().find(|w| w.label == label).is_some_and(|w| {
                    c.models
                        .iter()
                        .all(|m| m.vector(&w.word).is_some_and(|v| v.iter().any(|x| *x != 0.0)))
                })
            });
            if ok {
                ekman.push(label.to_string());
            } else {
                notes.push(format!(
                    "emotion word {label:?} unavailable in at least one corpus; excluded"
                ));
                dropped_ekman.push(label.to_string());
            }
        }
    } else if inputs.iter().any(|c| !c.ekman.is_empty()) {
        notes.push("emotion words missing for at least one corpus language; emotion items skipped".into());
    }

    let items: Vec<String> = categories.iter().chain(ekman.iter()).cloned().collect();

    let cells: Vec<(usize, usize)> = (0..inputs.len()).flat_map(|c| (0..runs).map(move |r| (c, r))).collect();
    let computed: Vec<(CategoryVectorSet, Grid, Grid)> = cells
        .par_iter()
        .map(|&(ci, r)| {
            let c = &inputs[ci];
            let model = &c.models[r];
            let mut raw = Vec::with_capacity(categories.len());
            let mut sizes = Vec::with_capacity(categories.len());
            for name in &categories {
                let (v, n) = category_vector(name, c.expanded[name].iter().map(String::as_str), model)?;
                raw.push(v);
                sizes.push(n);
            }
            let ortho = gram_schmidt(&categories, &raw)?;
            let target_vecs: Vec<Vec<f64>> = kept_targets
                .iter()
                .map(|t| model.vector_f64(t).expect("checked"))
                .collect();
            let ekman_vecs: Vec<Vec<f64>> = ekman
                .iter()
                .map(|label| {
                    let w = c.ekman.iter().find(|w| &w.label == label).expect("checked");
                    model.vector_f64(&w.word).expect("checked")
                })
                .collect();
            let fill = |rows: &[Vec<f64>]| -> Result<Grid> {
                let mut g = Grid::zeros(items.len(), kept_targets.len());
                for (i, rv) in rows.iter().chain(ekman_vecs.iter()).enumerate() {
                    for (j, tv) in target_vecs.iter().enumerate() {
                        g.set(i, j, cosine(rv, tv)?);
                    }
                }
                Ok(g)
            };
            let grid = fill(&ortho)?;
            let raw_grid = fill(&raw)?;
            let set = CategoryVectorSet {
                corpus: c.id.to_string(),
                run: r,
                order: categories.clone(),
                raw,
                ortho,
                sizes,
            };
            Ok((set, grid, raw_grid))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut vector_sets = vec![Vec::with_capacity(runs); inputs.len()];
    let mut run_grids = vec![Vec::with_capacity(runs); inputs.len()];
    let mut raw_grids = vec![Vec::with_capacity(runs); inputs.len()];
    for ((ci, _), (set, g, rg)) in cells.iter().zip(computed) {
        vector_sets[*ci].push(set);
        run_grids[*ci].push(g);
        raw_grids[*ci].push(rg);
    }
    let avg = |grids: &Vec<Grid>| Grid::mean_of(&grids.iter().collect::<Vec<_>>());
    let run_avg: Vec<Grid> = run_grids.iter().map(avg).collect();
    let raw_run_avg: Vec<Grid> = raw_grids.iter().map(avg).collect();

    let cultures: Vec<CultureGroup> = inputs.iter().map(|c| c.culture).collect();
    let mut culture_avg = BTreeMap::new();
    for group in [CultureGroup::West, CultureGroup::East] {
        let members: Vec<&Grid> = run_avg
            .iter()
            .zip(&cultures)
            .filter(|(_, g)| **g == group)
            .map(|(m, _)| m)
            .collect();
        if !members.is_empty() {
            culture_avg.insert(group, Grid::mean_of(&members));
        }
    }

    Ok(SimilarityTensor {
        categories,
        ekman,
        items,
        targets: kept_targets,
        corpora: inputs.iter().map(|c| c.id.to_string()).collect(),
        cultures,
        runs: run_grids,
        raw_runs: raw_grids,
        run_avg,
        raw_run_avg,
        culture_avg,
        vector_sets,
        dropped_categories: dropped_categories.into_iter().collect(),
        dropped_targets,
        dropped_ekman,
        notes,
    })
}
