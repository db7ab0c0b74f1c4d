//! Acceptance checks. Each prints one `[PASS]` or `[FAIL]` line; the process
//! exits nonzero if any fails.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use emojisem::analytics::{category_scc, icon_scc, pearson, spearman};
use emojisem::config::RunConfig;
use emojisem::corpus::{tokenize, CultureGroup, PostRecord};
use emojisem::embedding::{
    build_vocabulary, cbow_gradients, cbow_loss, neighbors, train_cbow, EmbeddingModel, Matrix, ModelMeta, TrainMode,
    TrainParams,
};
use emojisem::emoji::{count_frequencies, shared_set, EmojiInventory, FrequencyTable};
use emojisem::pipeline::{Pipeline, Projection, RunOptions, Selection};
use emojisem::projection::{build_tensor, dot, gram_schmidt, mean, norm, CorpusInput, Grid};

type Check = Result<String, String>;
type Criterion = (&'static str, &'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:.2?}, limit {limit:?}"))
}

// ---------------------------------------------------------------- oracles

fn oracle_ranks(x: &[f64]) -> Vec<f64> {
    // rank of x[i] = 1 + #smaller + (#equal - 1) / 2
    x.iter()
        .map(|&v| {
            let less = x.iter().filter(|&&y| y < v).count() as f64;
            let equal = x.iter().filter(|&&y| y == v).count() as f64;
            1.0 + less + (equal - 1.0) / 2.0
        })
        .collect()
}

fn oracle_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / n;
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / n;
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum::<f64>() / n;
    cov / (vx.sqrt() * vy.sqrt())
}

fn random_pair(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let n = rng.random_range(3..=20);
    let ties = rng.random_bool(0.5);
    let draw = |rng: &mut ChaCha8Rng| {
        if ties {
            rng.random_range(0..4) as f64
        } else {
            rng.random_range(-10.0..10.0)
        }
    };
    loop {
        let x: Vec<f64> = (0..n).map(|_| draw(rng)).collect();
        let y: Vec<f64> = (0..n).map(|_| draw(rng)).collect();
        let constant = |v: &[f64]| v.iter().all(|a| *a == v[0]);
        if !constant(&x) && !constant(&y) {
            return (x, y);
        }
    }
}

// ---------------------------------------------------------------- criteria

fn correlations() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = (0.0f64, 0.0f64);
    let mut tied = 0;
    for _ in 0..1000 {
        let (x, y) = random_pair(&mut rng);
        if oracle_ranks(&x).iter().any(|r| r.fract() != 0.0) {
            tied += 1;
        }
        let s = spearman(&x, &y).map_err(|e| e.to_string())?;
        let p = pearson(&x, &y).map_err(|e| e.to_string())?;
        let s_want = oracle_pearson(&oracle_ranks(&x), &oracle_ranks(&y));
        let p_want = oracle_pearson(&x, &y);
        worst.0 = worst.0.max((s - s_want).abs());
        worst.1 = worst.1.max((p - p_want).abs());
    }
    ensure(worst.0 <= 1e-12, || format!("spearman off by {:e}", worst.0))?;
    ensure(worst.1 <= 1e-12, || format!("pearson off by {:e}", worst.1))?;
    ensure(tied > 100, || format!("only {tied} pairs with ties"))?;
    within(start.elapsed(), Duration::from_secs(5))?;
    Ok(format!(
        "1000 pairs ({tied} tied), max error spearman {:.1e} pearson {:.1e}",
        worst.0, worst.1
    ))
}

fn orthonormalization() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let d = 100;
    let (mut worst_ortho, mut worst_span) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let k = rng.random_range(1..=20);
        let vs: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let names: Vec<String> = (0..k).map(|i| format!("c{i}")).collect();
        let es = gram_schmidt(&names, &vs).map_err(|e| e.to_string())?;
        for i in 0..k {
            for j in 0..k {
                let want = if i == j { 1.0 } else { 0.0 };
                worst_ortho = worst_ortho.max((dot(&es[i], &es[j]) - want).abs());
            }
            // a_i minus its projection onto the output basis, relative to |a_i|
            let mut r = vs[i].clone();
            for e in &es {
                let c = dot(&vs[i], e);
                r.iter_mut().zip(e).for_each(|(x, y)| *x -= c * y);
            }
            worst_span = worst_span.max(norm(&r) / norm(&vs[i]));
        }
    }
    ensure(worst_ortho <= 1e-10, || format!("orthonormality error {worst_ortho:e}"))?;
    ensure(worst_span <= 1e-8, || format!("span residual {worst_span:e}"))?;
    within(start.elapsed(), Duration::from_secs(5))?;
    Ok(format!(
        "100 sets, orthonormality {worst_ortho:.1e}, span residual {worst_span:.1e}"
    ))
}

fn gradient_check() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let d = rng.random_range(5..=30);
        let nc = rng.random_range(1..=8);
        let nt = rng.random_range(2..=6);
        let mut ctx: Vec<Vec<f64>> = (0..nc)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let mut rows: Vec<Vec<f64>> = (0..nt)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let loss = |ctx: &[Vec<f64>], rows: &[Vec<f64>]| {
            let t: Vec<(&[f64], bool)> = rows.iter().enumerate().map(|(i, r)| (r.as_slice(), i == 0)).collect();
            cbow_loss(ctx, &t)
        };
        let (g_ctx, g_rows) = {
            let t: Vec<(&[f64], bool)> = rows.iter().enumerate().map(|(i, r)| (r.as_slice(), i == 0)).collect();
            cbow_gradients(&ctx, &t)
        };
        let mut analytic = Vec::new();
        let mut numeric = Vec::new();
        for i in 0..nc {
            for j in 0..d {
                let x = ctx[i][j];
                ctx[i][j] = x + h;
                let up = loss(&ctx, &rows);
                ctx[i][j] = x - h;
                let down = loss(&ctx, &rows);
                ctx[i][j] = x;
                numeric.push((up - down) / (2.0 * h));
                analytic.push(g_ctx[i][j]);
            }
        }
        for i in 0..nt {
            for j in 0..d {
                let x = rows[i][j];
                rows[i][j] = x + h;
                let up = loss(&ctx, &rows);
                rows[i][j] = x - h;
                let down = loss(&ctx, &rows);
                rows[i][j] = x;
                numeric.push((up - down) / (2.0 * h));
                analytic.push(g_rows[i][j]);
            }
        }
        let diff: f64 = analytic
            .iter()
            .zip(&numeric)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale = norm(&analytic).max(norm(&numeric)).max(1e-12);
        worst = worst.max(diff / scale);
    }
    ensure(worst < 1e-4, || format!("relative error {worst:e}"))?;
    within(start.elapsed(), Duration::from_secs(5))?;
    Ok(format!("10 points, max relative error {worst:.1e}"))
}

fn synonym_corpus(seed: u64) -> (Vec<Vec<String>>, Vec<(String, String)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool: Vec<String> = (0..120).map(|i| format!("w{i}")).collect();
    let pairs: Vec<(String, String)> = (0..5).map(|i| (format!("syn{i}a"), format!("syn{i}b"))).collect();
    let contexts: Vec<Vec<&String>> = (0..5).map(|_| pool.choose_multiple(&mut rng, 10).collect()).collect();
    let mut sentences = Vec::new();
    let mut tokens = 0;
    while tokens < 200_000 {
        let s: Vec<String> = if rng.random_bool(0.7) {
            let p = rng.random_range(0..5);
            let mut s: Vec<String> = (0..8)
                .map(|_| contexts[p].choose(&mut rng).unwrap().to_string())
                .collect();
            let word = if rng.random_bool(0.5) { &pairs[p].0 } else { &pairs[p].1 };
            s.insert(4, word.clone());
            s
        } else {
            (0..9).map(|_| pool.choose(&mut rng).unwrap().clone()).collect()
        };
        tokens += s.len();
        sentences.push(s);
    }
    (sentences, pairs)
}

fn planted_synonyms() -> Check {
    let start = Instant::now();
    let (sentences, pairs) = synonym_corpus(4);
    let tokens: usize = sentences.iter().map(Vec::len).sum();
    let vocab = build_vocabulary(&sentences, 1).map_err(|e| e.to_string())?;
    let encoded = vocab.encode(&sentences);
    let mut hits = vec![0usize; pairs.len()];
    for run in 0..5 {
        let params = TrainParams {
            dim: 50,
            epochs: 5,
            window: 4,
            min_count: 1,
            subsample: 1e-3,
            seed: 100 + run,
            ..TrainParams::default()
        };
        let model = train_cbow(&encoded, &vocab, &params, TrainMode::Deterministic).map_err(|e| e.to_string())?;
        let in_top3 = |a: &str, b: &str| -> Result<bool, String> {
            Ok(neighbors(&model, a, 3)
                .map_err(|e| e.to_string())?
                .iter()
                .any(|(t, _)| t == b))
        };
        for (i, (a, b)) in pairs.iter().enumerate() {
            if in_top3(a, b)? && in_top3(b, a)? {
                hits[i] += 1;
            }
        }
    }
    ensure(hits.iter().all(|&h| h >= 4), || {
        format!("runs with mutual top-3 per pair: {hits:?}")
    })?;
    within(start.elapsed(), Duration::from_secs(120))?;
    Ok(format!(
        "{tokens} tokens, mutual top-3 runs per pair {hits:?}, {:.1?}",
        start.elapsed()
    ))
}

fn run_fixture(dir: &Path, opts: &common::FixtureOptions) -> Result<(), String> {
    let cfg = common::write_fixture(dir, opts);
    let config = RunConfig::load(&cfg).map_err(|e| e.to_string())?;
    let mut p = Pipeline::new(config, RunOptions::default()).map_err(|e| e.to_string())?;
    p.run(Selection::All).map_err(|e| e.to_string())?;
    Ok(())
}

fn output_files(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap().flatten() {
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
            if matches!(ext, "vec" | "csv" | "json" | "svg") && path.file_name().unwrap() != "manifest.json" {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Check {
    let start = Instant::now();
    let opts = common::FixtureOptions::default();
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    run_fixture(a.path(), &opts)?;
    run_fixture(b.path(), &opts)?;
    let fa = output_files(&a.path().join("out"));
    let fb = output_files(&b.path().join("out"));
    ensure(fa.keys().eq(fb.keys()), || "different output file sets".into())?;
    let vecs = fa.keys().filter(|k| k.ends_with(".vec")).count();
    let csvs = fa.keys().filter(|k| k.ends_with(".csv")).count();
    ensure(vecs == 10 && csvs >= 8, || {
        format!("expected 10 models and 8+ CSVs, got {vecs} and {csvs}")
    })?;
    for (name, bytes) in &fa {
        ensure(fb[name] == *bytes, || format!("{name} differs between runs"))?;
    }
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!(
        "{} files byte-identical ({vecs} models, {csvs} CSVs), {:.1?}",
        fa.len(),
        start.elapsed()
    ))
}

fn sign_test() -> Check {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    run_fixture(dir.path(), &common::FixtureOptions::default())?;
    let text = std::fs::read_to_string(dir.path().join("out/projection.json")).map_err(|e| e.to_string())?;
    let projection: Projection = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let tensor = &projection.tensor;

    let sccs = category_scc(tensor).map_err(|e| e.to_string())?;
    let alpha = sccs.iter().find(|c| c.category == "alpha").ok_or("alpha missing")?;
    ensure(alpha.rho > 0.0, || format!("category SCC(alpha) = {}", alpha.rho))?;
    let listed = |top: &[(String, f64)]| top.iter().any(|(e, _)| e == common::E1);
    ensure(listed(&alpha.top5_west), || {
        format!("E1 not in West top-5 {:?}", alpha.top5_west)
    })?;
    ensure(listed(&alpha.top5_east), || {
        format!("E1 not in East top-5 {:?}", alpha.top5_east)
    })?;

    let icons = icon_scc(tensor, &EmojiInventory::builtin()).map_err(|e| e.to_string())?;
    let scc = |e: &str| icons.icons.iter().find(|i| i.emoji == e).map(|i| i.scc);
    let (s1, s2) = (
        scc(common::E1).ok_or("E1 missing")?,
        scc(common::E2).ok_or("E2 missing")?,
    );
    ensure(s1 > s2, || format!("icon SCC E1 {s1} <= E2 {s2}"))?;
    within(start.elapsed(), Duration::from_secs(120))?;
    Ok(format!(
        "SCC(alpha) {:.3}, icon SCC E1 {s1:.3} > E2 {s2:.3}, {:.1?}",
        alpha.rho,
        start.elapsed()
    ))
}

fn frequency_exactness() -> Check {
    // (corpus, repetitions, text)
    let posts: [(&str, usize, &str); 11] = [
        ("X", 50, "good morning 😂"),
        ("X", 30, "so sad 😭😭"),
        ("X", 20, "pizza🍕 night 😂"),
        ("X", 10, "no emoji here"),
        ("X", 9, "walk 🐶"),
        ("X", 1, "🎉 party"),
        ("Y", 30, "lol 😂😂"),
        ("Y", 20, "🍕🍕 party"),
        ("Y", 28, "rain ☔ again"),
        ("Y", 1, "🎉"),
        ("Y", 1, "good dog 🐶"),
    ];
    let total_posts: usize = posts.iter().map(|p| p.1).sum();
    ensure(total_posts == 200, || format!("fixture has {total_posts} posts"))?;

    let inventory = EmojiInventory::builtin();
    let mut table = FrequencyTable::new();
    for corpus in ["X", "Y"] {
        let mut streams = Vec::new();
        for (i, (c, reps, text)) in posts.iter().enumerate().filter(|p| p.1 .0 == corpus) {
            for r in 0..*reps {
                let line = serde_json::json!({
                    "post_id": format!("{c}{i}-{r}"), "text": text, "country": c, "lang": "en"
                })
                .to_string();
                let rec = PostRecord::from_json_line(&line)?;
                streams.push(tokenize(&rec, &inventory));
            }
        }
        table.merge(count_frequencies(corpus, &streams, &inventory));
    }

    let want: [(&str, &[(&str, u64)]); 2] = [
        ("X", &[("😂", 70), ("😭", 60), ("🍕", 20), ("🐶", 9), ("🎉", 1)]),
        ("Y", &[("😂", 60), ("🍕", 40), ("☔", 28), ("🎉", 1), ("🐶", 1)]),
    ];
    for (corpus, counts) in want {
        let got: BTreeMap<String, u64> = table.counts(corpus).cloned().unwrap_or_default();
        let expect: BTreeMap<String, u64> = counts.iter().map(|(e, n)| (e.to_string(), *n)).collect();
        ensure(got == expect, || format!("{corpus}: counts {got:?}, want {expect:?}"))?;
        let total: u64 = counts.iter().map(|c| c.1).sum();
        let norm = table.normalized(corpus).ok_or("no normalized table")?;
        let sum: f64 = norm.values().sum();
        ensure((sum - 1.0).abs() <= 1e-9, || format!("{corpus}: normalized sum {sum}"))?;
        for (e, n) in counts {
            ensure(norm[*e] == *n as f64 / total as f64, || {
                format!("{corpus}: share of {e}")
            })?;
        }
    }

    let expect_shared: [(u64, &[&str]); 3] = [(1, &["😂", "🍕", "🐶", "🎉"]), (3, &["😂", "🍕", "🐶"]), (1000, &[])];
    for (threshold, members) in expect_shared {
        let got = shared_set(&table, threshold).emoji;
        ensure(got == members, || {
            format!("threshold {threshold}: {got:?}, want {members:?}")
        })?;
    }
    Ok("200 posts: counts, shares and shared sets at thresholds 1/3/1000 exact".into())
}

fn inventory_size() -> Check {
    let n = EmojiInventory::builtin().len();
    ensure(n == 1281, || format!("{n} entries"))?;
    Ok(format!("{n} entries"))
}

fn toy_model(rng: &mut ChaCha8Rng, tokens: &[&str], d: usize) -> EmbeddingModel {
    let data = (0..tokens.len() * d).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    EmbeddingModel::new(
        tokens.iter().map(|t| t.to_string()).collect(),
        Matrix {
            rows: tokens.len(),
            cols: d,
            data,
        },
        None,
        ModelMeta {
            params: TrainParams {
                dim: d,
                ..TrainParams::default()
            },
            mode: "deterministic".into(),
            epoch_loss: vec![],
        },
    )
}

fn linearity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let tokens = ["a1", "a2", "b1", "c1", "c2", "😀", "😢", "🍕"];
    let lexicon = BTreeMap::from([
        ("a".to_string(), ["a1", "a2"].iter().map(|s| s.to_string()).collect()),
        ("b".to_string(), ["b1"].iter().map(|s| s.to_string()).collect()),
        (
            "c".to_string(),
            ["c1", "c2", "a1"].iter().map(|s| s.to_string()).collect(),
        ),
    ]);
    let schema: Vec<String> = lexicon.keys().cloned().collect();
    let targets: Vec<String> = ["😀", "😢", "🍕"].iter().map(|s| s.to_string()).collect();
    let runs: Vec<EmbeddingModel> = (0..2).map(|_| toy_model(&mut rng, &tokens, 16)).collect();
    let tensor = |models: &[EmbeddingModel]| {
        let input = CorpusInput {
            id: "US",
            culture: CultureGroup::West,
            models,
            expanded: &lexicon,
            ekman: &[],
        };
        build_tensor(&[input], &schema, &targets).map_err(|e| e.to_string())
    };
    let both = tensor(&runs)?;
    let a = tensor(&runs[..1])?;
    let b = tensor(&runs[1..])?;
    let mut worst = 0.0f64;
    for k in 0..both.run_avg[0].data.len() {
        let want = (a.run_avg[0].data[k] + b.run_avg[0].data[k]) / 2.0;
        worst = worst.max((both.run_avg[0].data[k] - want).abs());
    }
    ensure(worst <= 1e-12, || format!("run average off by {worst:e}"))?;

    ensure(mean(&[0.2, 0.4, 0.6]) == 0.4, || {
        format!("mean(0.2, 0.4, 0.6) = {:?}", mean(&[0.2, 0.4, 0.6]))
    })?;
    let grids: Vec<Grid> = [0.2, 0.4, 0.6]
        .iter()
        .map(|&v| Grid {
            rows: 1,
            cols: 1,
            data: vec![v],
        })
        .collect();
    let west = Grid::mean_of(&grids.iter().collect::<Vec<_>>());
    ensure(west.data[0] == 0.4, || format!("West average {:?}", west.data[0]))?;

    // the culture grid of a built tensor is the mean of its members
    let corpora: Vec<Vec<EmbeddingModel>> = (0..3).map(|_| vec![toy_model(&mut rng, &tokens, 16)]).collect();
    let ids = ["US", "UK", "CA"];
    let inputs: Vec<CorpusInput> = corpora
        .iter()
        .zip(ids)
        .map(|(models, id)| CorpusInput {
            id,
            culture: CultureGroup::West,
            models,
            expanded: &lexicon,
            ekman: &[],
        })
        .collect();
    let t = build_tensor(&inputs, &schema, &targets).map_err(|e| e.to_string())?;
    let culture = t.culture(CultureGroup::West).ok_or("no West grid")?;
    for k in 0..culture.data.len() {
        let vals: Vec<f64> = t.run_avg.iter().map(|g| g.data[k]).collect();
        ensure(culture.data[k] == mean(&vals), || format!("culture cell {k}"))?;
    }
    Ok(format!(
        "run average error {worst:.1e}; West mean of 0.2/0.4/0.6 is exactly 0.4"
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("AC1", "correlation oracles", correlations),
        ("AC2", "orthonormalization", orthonormalization),
        ("AC3", "CBOW gradient check", gradient_check),
        ("AC4", "planted synonym recovery", planted_synonyms),
        ("AC5", "deterministic reruns", determinism),
        ("AC6", "end-to-end sign test", sign_test),
        ("AC7", "frequency exactness", frequency_exactness),
        ("AC8", "inventory size", inventory_size),
        ("AC9", "averaging linearity", linearity),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        match check() {
            Ok(detail) => println!("[PASS] {id} {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {id} {name}: {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} of 9 criteria failed");
        ExitCode::FAILURE
    } else {
        println!("all 9 criteria passed");
        ExitCode::SUCCESS
    }
}
