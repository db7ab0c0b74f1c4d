//! Staged pipeline: ingest, train, project, analyze, report.
//!
//! Every stage reads the previous stage's files from the output directory,
//! so later stages can be rerun without retraining. `manifest.json` records
//! per-stage fingerprints; a full run skips stages whose fingerprint and
//! outputs are already present.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytics::{category_scc, country_similarity_matrix, culture_triples, frequency_analysis, icon_scc};
use crate::charts::emit_charts;
use crate::config::RunConfig;
use crate::corpus::{tokenize, CultureGroup, FilterConfig, PostRecord, TokenStream, Verdict};
use crate::embedding::{build_vocabulary, load_model, save_model, train_cbow, EmbeddingModel, TrainMode, Vocabulary};
use crate::emoji::{count_frequencies, shared_set, EmojiInventory, FrequencyTable, SharedEmojiSet};
use crate::error::{Error, Result};
use crate::lexicon::{expand_patterns, shared_schema, EkmanWordList, EmotionWord, Lexicon};
use crate::projection::{build_tensor, CorpusInput, SimilarityTensor};
use crate::report::{
    read_json, write_analysis_csvs, write_frequencies_csv, write_json, write_tensor_csv, Analysis, CorpusSummary,
    IngestCounts,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ingest,
    Train,
    Project,
    Analyze,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Ingest,
        Stage::Train,
        Stage::Project,
        Stage::Analyze,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Train => "train",
            Stage::Project => "project",
            Stage::Analyze => "analyze",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A single stage or the whole chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    One(Stage),
    All,
}

impl FromStr for Selection {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "all" {
            return Ok(Selection::All);
        }
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .map(Selection::One)
            .ok_or_else(|| format!("unknown stage {s:?}; expected ingest, train, project, analyze, report or all"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub deterministic: bool,
    /// Worker threads for parallel training; 0 picks the rayon pool size.
    pub threads: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            deterministic: true,
            threads: 0,
        }
    }
}

impl RunOptions {
    fn mode(&self) -> TrainMode {
        if self.deterministic {
            TrainMode::Deterministic
        } else {
            let threads = if self.threads == 0 {
                rayon::current_num_threads()
            } else {
                self.threads
            };
            TrainMode::Parallel { threads }
        }
    }

    fn label(&self) -> &'static str {
        if self.deterministic {
            "deterministic"
        } else {
            "parallel"
        }
    }
}

/// File locations under the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn tokens(&self, corpus: &str) -> PathBuf {
        self.root.join("tokens").join(format!("{corpus}.tsv"))
    }

    pub fn frequencies_json(&self) -> PathBuf {
        self.root.join("tokens").join("frequencies.json")
    }

    pub fn vocab(&self, corpus: &str) -> PathBuf {
        self.root.join("vocab").join(format!("{corpus}.tsv"))
    }

    pub fn model(&self, corpus: &str, run: usize) -> PathBuf {
        self.root.join("models").join(corpus).join(format!("run{run}.vec"))
    }

    pub fn projection(&self) -> PathBuf {
        self.root.join("projection.json")
    }

    pub fn analysis(&self) -> PathBuf {
        self.root.join("analysis.json")
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn charts(&self) -> PathBuf {
        self.root.join("charts")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub fingerprint: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub mode: String,
    pub config: RunConfig,
    pub stages: BTreeMap<Stage, StageRecord>,
    pub counts: BTreeMap<String, IngestCounts>,
    pub vocabulary: BTreeMap<String, usize>,
    pub warnings: Vec<String>,
    pub charts_omitted: Vec<String>,
}

impl RunManifest {
    fn new(config: &RunConfig, opts: &RunOptions) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            mode: opts.label().to_string(),
            config: config.clone(),
            stages: BTreeMap::new(),
            counts: BTreeMap::new(),
            vocabulary: BTreeMap::new(),
            warnings: Vec::new(),
            charts_omitted: Vec::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }
}

/// Artifacts persisted by the projection stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub schema: Vec<String>,
    pub shared: SharedEmojiSet,
    pub tensor: SimilarityTensor,
}

pub struct Pipeline {
    config: RunConfig,
    opts: RunOptions,
    layout: Layout,
    manifest: RunManifest,
    inventory: EmojiInventory,
}

fn stage_err(stage: Stage) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Stage { .. } => e,
        other => Error::Stage {
            stage: stage.name(),
            source: Box::new(other),
        },
    }
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(())
}

impl Pipeline {
    pub fn new(config: RunConfig, opts: RunOptions) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config.out_dir);
        std::fs::create_dir_all(&layout.root).map_err(|e| Error::io(&layout.root, e))?;
        let inventory = match &config.inventory {
            Some(inv) => EmojiInventory::load(&inv.data, &inv.categories)?,
            None => EmojiInventory::builtin(),
        };
        for w in inventory.warnings() {
            warn!("{w}");
        }
        let manifest = match RunManifest::load(&layout.manifest()) {
            Ok(mut m) if m.mode == opts.label() => {
                m.config = config.clone();
                m
            }
            _ => RunManifest::new(&config, &opts),
        };
        Ok(Self {
            config,
            opts,
            layout,
            manifest,
            inventory,
        })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    fn fingerprint(&self, stage: Stage) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.config).unwrap_or_default());
        h.update(self.opts.label().as_bytes());
        h.update(stage.name().as_bytes());
        h.update(env!("CARGO_PKG_VERSION").as_bytes());
        format!("{:x}", h.finalize())
    }

    fn outputs_present(&self, stage: Stage) -> bool {
        let l = &self.layout;
        let ids = self.config.corpora.iter().map(|c| c.id.as_str());
        match stage {
            Stage::Ingest => l.frequencies_json().exists() && ids.clone().all(|id| l.tokens(id).exists()),
            Stage::Train => ids
                .clone()
                .all(|id| l.vocab(id).exists() && (0..self.config.runs).all(|r| l.model(id, r).exists())),
            Stage::Project => l.projection().exists() && l.file("tensor.csv").exists(),
            Stage::Analyze => l.analysis().exists() && l.file("frequencies.csv").exists(),
            Stage::Report => l.file("report.json").exists(),
        }
    }

    fn is_current(&self, stage: Stage) -> bool {
        self.manifest
            .stages
            .get(&stage)
            .is_some_and(|r| r.fingerprint == self.fingerprint(stage))
            && self.outputs_present(stage)
    }

    fn save_manifest(&self) -> Result<()> {
        write_json(&self.manifest, &self.layout.manifest())
    }

    fn warn(&mut self, msg: String) {
        warn!("{msg}");
        if !self.manifest.warnings.contains(&msg) {
            self.manifest.warnings.push(msg);
        }
    }

    /// Runs one stage, or every stage in order skipping those already
    /// current. A stage that reruns forces all later stages to rerun.
    pub fn run(&mut self, selection: Selection) -> Result<&RunManifest> {
        match selection {
            Selection::One(stage) => self.run_stage(stage)?,
            Selection::All => {
                let mut dirty = false;
                for stage in Stage::ALL {
                    if !dirty && self.is_current(stage) {
                        info!("stage {stage}: up to date, skipped");
                        continue;
                    }
                    dirty = true;
                    self.run_stage(stage)?;
                }
            }
        }
        Ok(&self.manifest)
    }

    pub fn run_stage(&mut self, stage: Stage) -> Result<()> {
        info!("stage {stage}: start");
        let start = Instant::now();
        let result = match stage {
            Stage::Ingest => self.ingest(),
            Stage::Train => self.train(),
            Stage::Project => self.project(),
            Stage::Analyze => self.analyze(),
            Stage::Report => self.report(),
        };
        if let Err(e) = result {
            self.manifest.stages.remove(&stage);
            let _ = self.save_manifest();
            return Err(stage_err(stage)(e));
        }
        let record = StageRecord {
            fingerprint: self.fingerprint(stage),
            seconds: start.elapsed().as_secs_f64(),
        };
        info!("stage {stage}: done in {:.2}s", record.seconds);
        self.manifest.stages.insert(stage, record);
        self.save_manifest().map_err(stage_err(stage))
    }

    fn ingest(&mut self) -> Result<()> {
        let inventory = &self.inventory;
        let layout = &self.layout;
        let retweet = &self.config.retweet_patterns;
        let results: Vec<(String, IngestCounts, FrequencyTable)> = self
            .config
            .corpora
            .par_iter()
            .map(|c| {
                let filter = FilterConfig::new(vec![c.language.clone()], c.countries.clone(), retweet)?;
                let mut counts = IngestCounts::default();
                let out_path = layout.tokens(&c.id);
                create_parent(&out_path)?;
                let file = File::create(&out_path).map_err(|e| Error::io(&out_path, e))?;
                let mut out = BufWriter::new(file);
                let mut streams: Vec<TokenStream> = Vec::new();
                for input in &c.inputs {
                    let f = File::open(input).map_err(|e| Error::io(input, e))?;
                    for (n, line) in BufReader::new(f).lines().enumerate() {
                        let line = line.map_err(|e| Error::io(input, e))?;
                        if line.trim().is_empty() {
                            continue;
                        }
                        counts.read += 1;
                        let mut rec = match PostRecord::from_json_line(&line) {
                            Ok(r) => r,
                            Err(msg) => {
                                counts.malformed += 1;
                                log::debug!("{}:{}: skipped malformed record: {msg}", input.display(), n + 1);
                                continue;
                            }
                        };
                        rec.pre_tokenized |= c.pre_tokenized;
                        match filter.check(&rec) {
                            Verdict::Language => continue,
                            Verdict::Country => {
                                counts.after_language += 1;
                                continue;
                            }
                            Verdict::Retweet => {
                                counts.after_language += 1;
                                counts.after_country += 1;
                                continue;
                            }
                            Verdict::Keep => {
                                counts.after_language += 1;
                                counts.after_country += 1;
                                counts.after_retweet += 1;
                            }
                        }
                        let stream = tokenize(&rec, inventory);
                        if stream.tokens.is_empty() {
                            continue;
                        }
                        counts.tokenized += 1;
                        counts.tokens += stream.tokens.len() as u64;
                        writeln!(out, "{}", stream.to_line()).map_err(|e| Error::io(&out_path, e))?;
                        streams.push(stream);
                    }
                }
                out.flush().map_err(|e| Error::io(&out_path, e))?;
                let mut table = count_frequencies(&c.id, &streams, inventory);
                table.add_corpus(&c.id);
                Ok((c.id.clone(), counts, table))
            })
            .collect::<Result<_>>()?;

        let mut table = FrequencyTable::new();
        for (id, counts, t) in results {
            info!(
                "{id}: read {} malformed {} lang {} country {} retweet {} tokenized {}",
                counts.read,
                counts.malformed,
                counts.after_language,
                counts.after_country,
                counts.after_retweet,
                counts.tokenized
            );
            if counts.malformed > 0 {
                self.warn(format!("{id}: {} malformed records skipped", counts.malformed));
            }
            self.manifest.counts.insert(id, counts);
            table.merge(t);
        }
        write_json(&table, &self.layout.frequencies_json())
    }

    fn read_streams(&self, corpus: &str) -> Result<Vec<TokenStream>> {
        let path = self.layout.tokens(corpus);
        let f = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = Vec::new();
        for (n, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| Error::io(&path, e))?;
            let s = TokenStream::from_line(&line)
                .ok_or_else(|| Error::parse(path.display().to_string(), n + 1, "expected post_id<TAB>tokens"))?;
            out.push(s);
        }
        Ok(out)
    }

    fn train(&mut self) -> Result<()> {
        let params = self.config.train_params();
        let runs = self.config.runs;
        let mode = self.opts.mode();
        let mut prepared = Vec::new();
        for c in &self.config.corpora {
            let streams = self.read_streams(&c.id)?;
            let vocab = build_vocabulary(&streams, params.min_count)?;
            let vpath = self.layout.vocab(&c.id);
            create_parent(&vpath)?;
            vocab.save(&vpath)?;
            let encoded = vocab.encode(&streams);
            prepared.push((c.id.clone(), vocab, encoded));
        }
        for (id, vocab, _) in &prepared {
            self.manifest.vocabulary.insert(id.clone(), vocab.len());
        }

        let cells: Vec<(usize, usize)> = (0..prepared.len())
            .flat_map(|c| (0..runs).map(move |r| (c, r)))
            .collect();
        let layout = &self.layout;
        let train_one = |&(ci, r): &(usize, usize)| -> Result<()> {
            let (id, vocab, encoded) = &prepared[ci];
            let p = crate::embedding::TrainParams {
                seed: params.seed.wrapping_add(r as u64),
                ..params.clone()
            };
            let model = train_cbow(encoded, vocab, &p, mode)?;
            info!("{id} run {r}: epoch losses {:?}", model.meta.epoch_loss);
            let path = layout.model(id, r);
            create_parent(&path)?;
            save_model(&model, &path)
        };
        match mode {
            TrainMode::Deterministic => cells.par_iter().try_for_each(train_one),
            TrainMode::Parallel { .. } => cells.iter().try_for_each(train_one),
        }
    }

    fn load_models(&self, corpus: &str) -> Result<Vec<EmbeddingModel>> {
        (0..self.config.runs)
            .into_par_iter()
            .map(|r| load_model(&self.layout.model(corpus, r)))
            .collect()
    }

    fn ekman_words(&mut self) -> Result<Vec<Vec<EmotionWord>>> {
        let list = match &self.config.ekman {
            Some(p) => EkmanWordList::load(p)?,
            None => EkmanWordList::default(),
        };
        let mut out = Vec::new();
        let mut missing = Vec::new();
        for c in &self.config.corpora {
            match list.words_for(&c.language) {
                Some(w) => out.push(w),
                None => {
                    missing.push(format!(
                        "no emotion words for language {:?} (corpus {})",
                        c.language, c.id
                    ));
                    out.push(Vec::new());
                }
            }
        }
        for m in missing {
            self.warn(m);
        }
        Ok(out)
    }

    fn project(&mut self) -> Result<()> {
        let table: FrequencyTable = read_json(&self.layout.frequencies_json())?;
        let shared = shared_set(&table, self.config.shared_threshold);
        info!(
            "shared emoji set: {} emoji at threshold {}",
            shared.len(),
            shared.threshold
        );
        if shared.is_empty() {
            self.warn(format!("shared emoji set is empty at threshold {}", shared.threshold));
        }

        let lexicons = self
            .config
            .corpora
            .iter()
            .map(|c| Lexicon::load(&c.lexicon, &c.language))
            .collect::<Result<Vec<_>>>()?;
        let schema = shared_schema(&lexicons.iter().collect::<Vec<_>>())?.categories;
        let ekman = self.ekman_words()?;

        let mut models = Vec::new();
        let mut expanded = Vec::new();
        let mut notes = Vec::new();
        for (c, lex) in self.config.corpora.iter().zip(&lexicons) {
            let ms = self.load_models(&c.id)?;
            let vocab = Vocabulary::load(&self.layout.vocab(&c.id))?;
            let ex = expand_patterns(lex, vocab.tokens().iter().map(String::as_str));
            if ex.unmatched_patterns > 0 {
                notes.push(format!(
                    "{}: {} lexicon patterns matched no token",
                    c.id, ex.unmatched_patterns
                ));
            }
            let mut tokens = ex.tokens;
            tokens.retain(|k, _| schema.contains(k));
            models.push(ms);
            expanded.push(tokens);
        }
        for n in notes {
            self.warn(n);
        }

        let inputs: Vec<CorpusInput<'_>> = self
            .config
            .corpora
            .iter()
            .enumerate()
            .map(|(i, c)| CorpusInput {
                id: &c.id,
                culture: c.culture,
                models: &models[i],
                expanded: &expanded[i],
                ekman: &ekman[i],
            })
            .collect();
        let tensor = build_tensor(&inputs, &schema, &shared.emoji)?;
        for n in &tensor.notes {
            self.warn(n.clone());
        }
        write_tensor_csv(&tensor, &self.layout.file("tensor.csv"), false)?;
        write_tensor_csv(&tensor, &self.layout.file("tensor_raw.csv"), true)?;
        write_json(&Projection { schema, shared, tensor }, &self.layout.projection())
    }

    fn analyze(&mut self) -> Result<()> {
        let projection: Projection = read_json(&self.layout.projection())?;
        let table: FrequencyTable = read_json(&self.layout.frequencies_json())?;
        let tensor = &projection.tensor;
        let corpora: Vec<(String, CultureGroup)> =
            self.config.corpora.iter().map(|c| (c.id.clone(), c.culture)).collect();
        write_frequencies_csv(&table, &corpora, &self.inventory, &self.layout.file("frequencies.csv"))?;

        let pairs: Vec<(&str, CultureGroup)> = corpora.iter().map(|(id, g)| (id.as_str(), *g)).collect();
        let frequency = frequency_analysis(&table, &pairs, &self.inventory, &projection.shared);
        let mut notes: Vec<String> = frequency.warnings.clone();
        notes.extend(tensor.notes.iter().cloned());

        let both = self.config.has_both_cultures();
        let (category, icons) = if both {
            (Some(category_scc(tensor)?), Some(icon_scc(tensor, &self.inventory)?))
        } else {
            let msg = "only one culture group configured: cross-culture analytics skipped".to_string();
            self.warn(msg.clone());
            notes.push(msg);
            (None, None)
        };

        let models: Vec<Vec<EmbeddingModel>> = self
            .config
            .corpora
            .iter()
            .map(|c| self.load_models(&c.id))
            .collect::<Result<_>>()?;
        let country_input: Vec<(&str, CultureGroup, &[EmbeddingModel])> = corpora
            .iter()
            .zip(&models)
            .map(|((id, g), m)| (id.as_str(), *g, m.as_slice()))
            .collect();
        let country = country_similarity_matrix(&country_input, &tensor.targets)?;
        let triples = culture_triples(tensor)?;

        let analysis = Analysis {
            corpora: self
                .config
                .corpora
                .iter()
                .map(|c| CorpusSummary {
                    id: c.id.clone(),
                    culture: c.culture,
                    counts: self.manifest.counts.get(&c.id).cloned().unwrap_or_default(),
                    vocabulary: models
                        .iter()
                        .zip(&self.config.corpora)
                        .find(|(_, cc)| cc.id == c.id)
                        .map_or(0, |(m, _)| m[0].len()),
                })
                .collect(),
            runs: self.config.runs,
            seed: self.config.train_params().seed,
            shared_threshold: self.config.shared_threshold,
            schema: tensor.categories.clone(),
            dropped_categories: tensor.dropped_categories.clone(),
            emotion_items: tensor.ekman.clone(),
            shared_emoji: projection.shared.emoji.clone(),
            targets: tensor.targets.clone(),
            frequency,
            category_scc: category,
            icons,
            country: Some(country),
            triples: Some(triples),
            notes,
        };
        write_analysis_csvs(&analysis, &self.layout.root)?;
        write_json(&analysis, &self.layout.analysis())
    }

    fn report(&mut self) -> Result<()> {
        let analysis: Analysis = read_json(&self.layout.analysis())?;
        write_json(&analysis, &self.layout.file("report.json"))?;
        let charts = emit_charts(&analysis, &self.layout.charts())?;
        for name in &charts.omitted {
            self.warn(format!("chart {name} omitted: section empty"));
        }
        self.manifest.charts_omitted = charts.omitted;
        Ok(())
    }
}

/// Loads the config, applies CLI overrides and runs the selection.
pub fn run_pipeline(
    mut config: RunConfig,
    out: Option<PathBuf>,
    opts: RunOptions,
    selection: Selection,
) -> Result<RunManifest> {
    if let Some(out) = out {
        config.out_dir = out;
    }
    let mut p = Pipeline::new(config, opts)?;
    p.run(selection)?;
    Ok(p.manifest().clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selection_parses() {
        assert_eq!("all".parse::<Selection>().unwrap(), Selection::All);
        assert_eq!("train".parse::<Selection>().unwrap(), Selection::One(Stage::Train));
        assert!("bogus".parse::<Selection>().is_err());
    }

    #[test]
    fn layout_paths() {
        let l = Layout::new("/o");
        assert_eq!(l.model("US", 2), PathBuf::from("/o/models/US/run2.vec"));
        assert_eq!(l.tokens("JP"), PathBuf::from("/o/tokens/JP.tsv"));
    }
}
