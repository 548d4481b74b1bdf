//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Run with `cargo test -p covsearch --test acceptance -- --nocapture` to
//! see the lines. A criterion that cannot be met as stated is reported as
//! FAIL with the reason and listed in `KNOWN_UNATTAINABLE`; any other
//! failure fails the test.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use covsearch::corpus::{
    build_indexable_docs, Corpus, DocumentRecord, IndexVariant, IndexableDoc,
};
use covsearch::eval::{
    agreement, evaluate_all, read_qrels, read_run, source_stats, EvalMetric, EvalOptions,
    MetricReport, Qrels,
};
use covsearch::fusion::{
    fusion_of_fusions, fusion_of_runs, rrf_fuse, soboroff_select, RrfParams, SoboroffParams,
};
use covsearch::index::{InvertedIndex, Tokenizer};
use covsearch::pipeline::{Pipeline, PipelineConfig, Recipe};
use covsearch::query::{build_weighted_query, parse_topics, EntityLexicon, Ontology, Topic};
use covsearch::retrieval::{
    bm25_search, collapse_paragraphs, recency_rerank, rm3_search, Bm25Params, QueryTerms, Rm3Params,
};
use covsearch::run::{Run, RunEntry, Scored, MAX_RESULTS};

// Criteria whose stated target is arithmetically unreachable. They still
// run and print FAIL; the reason is part of the printed line.
const KNOWN_UNATTAINABLE: &[u32] = &[3];

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

fn data() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn acceptance() {
    let criteria: Vec<(u32, &str, fn() -> Outcome)> = vec![
        (1, "metric oracle equivalence", c1_metric_oracle),
        (2, "trec_eval golden fixture", c2_golden),
        (3, "rrf correctness", c3_rrf),
        (4, "fusion recipes on toy corpus", c4_recipes),
        (5, "source table reproduction", c5_source_table),
        (6, "agreement fixture", c6_agreement),
        (7, "pipeline determinism", c7_determinism),
        (8, "invariant suites", c8_invariants),
        (9, "soboroff selection", c9_soboroff),
    ];
    println!();
    let mut unexpected = Vec::new();
    for (n, name, f) in criteria {
        let out = catch_unwind(AssertUnwindSafe(f))
            .unwrap_or_else(|e| {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                Outcome::new(false, format!("panicked: {msg}"))
            });
        let status = if out.pass { "PASS" } else { "FAIL" };
        println!("{status} [{n}] {name}: {}", out.detail);
        if !out.pass && !KNOWN_UNATTAINABLE.contains(&n) {
            unexpected.push(n);
        }
    }
    assert!(unexpected.is_empty(), "criteria failed: {unexpected:?}");
}

// ---------------------------------------------------------------------------
// 1. metric oracle

/// Brute-force per-topic metrics straight from the definitions, over the
/// full ranking. Shares nothing with the library except the input types.
struct Oracle {
    p: Vec<f64>,
    ndcg: Vec<f64>,
    map: f64,
    bpref: f64,
    rbp: f64,
}

fn oracle_topic(entries: &[(String, f64)], judged: &BTreeMap<String, u8>, cuts: &[usize]) -> Oracle {
    let mut order: Vec<&(String, f64)> = entries.iter().collect();
    order.sort_by(|a, b| match b.1.partial_cmp(&a.1).unwrap() {
        std::cmp::Ordering::Equal => b.0.cmp(&a.0),
        o => o,
    });
    let g: Vec<u8> = order.iter().map(|(d, _)| judged.get(d).copied().unwrap_or(0)).collect();
    let rel: Vec<bool> = g.iter().map(|&x| x >= 1).collect();
    let judged_nonrel: Vec<bool> = order.iter().map(|(d, _)| judged.get(d) == Some(&0)).collect();
    let big_r = judged.values().filter(|&&x| x >= 1).count();
    let big_n = judged.values().filter(|&&x| x == 0).count();

    let p = cuts
        .iter()
        .map(|&k| (0..k).filter(|&i| i < rel.len() && rel[i]).count() as f64 / k as f64)
        .collect();

    let mut ideal: Vec<u8> = judged.values().copied().collect();
    ideal.sort();
    ideal.reverse();
    let ndcg = cuts
        .iter()
        .map(|&k| {
            let mut dcg = 0.0;
            let mut idcg = 0.0;
            for i in 0..k {
                let disc = 1.0 / (i as f64 + 2.0).log2();
                if i < g.len() {
                    dcg += g[i] as f64 * disc;
                }
                if i < ideal.len() {
                    idcg += ideal[i] as f64 * disc;
                }
            }
            if idcg > 0.0 {
                dcg / idcg
            } else {
                0.0
            }
        })
        .collect();

    let mut map = 0.0;
    let mut bpref = 0.0;
    for i in 0..rel.len() {
        if !rel[i] {
            continue;
        }
        let rel_upto = (0..=i).filter(|&j| rel[j]).count();
        map += rel_upto as f64 / (i + 1) as f64;
        let nonrel_above = (0..i).filter(|&j| judged_nonrel[j]).count();
        bpref += if big_n == 0 {
            1.0
        } else {
            1.0 - nonrel_above.min(big_r) as f64 / big_r.min(big_n) as f64
        };
    }
    let rbp = (0..rel.len()).filter(|&i| rel[i]).map(|i| 0.5 * 0.5f64.powi(i as i32)).sum();
    Oracle {
        p,
        ndcg,
        map: map / big_r as f64,
        bpref: bpref / big_r as f64,
        rbp,
    }
}

type Instance = (BTreeMap<u32, Vec<(String, f64)>>, BTreeMap<u32, BTreeMap<String, u8>>);

fn random_instance(r: &mut ChaCha8Rng) -> Instance {
    let n_topics = r.gen_range(1..=20);
    let n_docs = r.gen_range(1..=100);
    let pool: Vec<String> = (0..n_docs).map(|i| format!("doc{i:03}")).collect();
    let mut run = BTreeMap::new();
    let mut qrels = BTreeMap::new();
    for t in 1..=n_topics {
        if r.gen_bool(0.9) {
            let k = r.gen_range(0..=n_docs);
            let mut docs = pool.clone();
            docs.shuffle(r);
            // few distinct scores, so ties are common
            let ret = docs[..k].iter().map(|d| (d.clone(), r.gen_range(0..8) as f64 * 0.5)).collect();
            run.insert(t, ret);
        }
        if r.gen_bool(0.9) {
            let mut judged = BTreeMap::new();
            for d in &pool {
                if r.gen_bool(0.5) {
                    judged.insert(d.clone(), r.gen_range(0..=2u8));
                }
            }
            qrels.insert(t, judged);
        }
    }
    (run, qrels)
}

fn to_run(map: &BTreeMap<u32, Vec<(String, f64)>>) -> Run {
    let mut run = Run::new("r");
    for (t, docs) in map {
        if docs.is_empty() {
            continue;
        }
        run.insert_scored(*t, docs.iter().map(|(d, s)| Scored::new(d.clone(), d.clone(), *s)).collect(), MAX_RESULTS);
    }
    run
}

fn to_qrels(map: &BTreeMap<u32, BTreeMap<String, u8>>) -> Qrels {
    let mut q = Qrels::new();
    for (t, judged) in map {
        for (d, g) in judged {
            q.insert(*t, d.clone(), *g).unwrap();
        }
    }
    q
}

fn c1_metric_oracle() -> Outcome {
    let cuts = vec![1, 5, 10, 20, 30];
    let opts = EvalOptions { cuts: cuts.clone(), ..EvalOptions::default() };
    let mut r = rng(1);
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for _ in 0..200 {
        let (run_map, qrels_map) = random_instance(&mut r);
        let report = evaluate_all(&to_run(&run_map), &to_qrels(&qrels_map), &opts);
        let mut means = Oracle { p: vec![0.0; cuts.len()], ndcg: vec![0.0; cuts.len()], map: 0.0, bpref: 0.0, rbp: 0.0 };
        let mut n = 0usize;
        for (t, judged) in &qrels_map {
            if !judged.values().any(|&g| g >= 1) {
                assert!(!report.per_topic.contains_key(t), "topic {t} without relevant docs was evaluated");
                continue;
            }
            let empty = Vec::new();
            let o = oracle_topic(run_map.get(t).unwrap_or(&empty), judged, &cuts);
            let got = &report.per_topic[t];
            let pairs = o
                .p
                .iter()
                .zip(&got.precision)
                .chain(o.ndcg.iter().zip(&got.ndcg))
                .chain([(&o.map, &got.map), (&o.bpref, &got.bpref), (&o.rbp, &got.rbp)]);
            for (a, b) in pairs {
                worst = worst.max((a - b).abs());
                checked += 1;
            }
            for i in 0..cuts.len() {
                means.p[i] += o.p[i];
                means.ndcg[i] += o.ndcg[i];
            }
            means.map += o.map;
            means.bpref += o.bpref;
            means.rbp += o.rbp;
            n += 1;
        }
        assert_eq!(report.num_topics(), n);
        if n > 0 {
            let m = &report.mean;
            let nf = n as f64;
            let pairs = means
                .p
                .iter()
                .zip(&m.precision)
                .chain(means.ndcg.iter().zip(&m.ndcg))
                .chain([(&means.map, &m.map), (&means.bpref, &m.bpref), (&means.rbp, &m.rbp)]);
            for (a, b) in pairs {
                worst = worst.max((a / nf - b).abs());
                checked += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    Outcome::new(
        worst <= 1e-6 && elapsed < Duration::from_secs(5),
        format!("200 instances, {checked} values, max |diff| {worst:.2e}, {elapsed:.2?}"),
    )
}

// ---------------------------------------------------------------------------
// 2. golden fixture

fn report_value(report: &MetricReport, measure: &str, topic: &str) -> f64 {
    let tm = if topic == "all" {
        &report.mean
    } else {
        &report.per_topic[&topic.parse::<u32>().unwrap()]
    };
    let cut_index = |k: &str| report.cuts.iter().position(|c| c.to_string() == k).unwrap();
    if let Some(k) = measure.strip_prefix("P_") {
        tm.precision[cut_index(k)]
    } else if let Some(k) = measure.strip_prefix("ndcg_cut_") {
        tm.ndcg[cut_index(k)]
    } else {
        match measure {
            "bpref" => tm.bpref,
            "map" => tm.map,
            "rbp" => tm.rbp,
            other => panic!("unexpected measure {other}"),
        }
    }
}

fn c2_golden() -> Outcome {
    let dir = data().join("golden");
    let run = read_run(&dir.join("run.txt")).unwrap();
    let qrels = read_qrels(&dir.join("qrels.txt")).unwrap();
    let report = evaluate_all(&run, &qrels, &EvalOptions::default());
    let reference = std::fs::read_to_string(dir.join("reference.tsv")).unwrap();
    let mut n = 0;
    let mut mismatches = Vec::new();
    for line in reference.lines().filter(|l| !l.starts_with('#')) {
        let f: Vec<&str> = line.split('\t').collect();
        let want: f64 = f[2].parse().unwrap();
        let got = report_value(&report, f[0], f[1]);
        if format!("{got:.4}") != format!("{want:.4}") {
            mismatches.push(format!("{} {} got {got:.4} want {want:.4}", f[0], f[1]));
        }
        n += 1;
    }
    Outcome::new(
        mismatches.is_empty() && n == 78,
        if mismatches.is_empty() {
            format!("{n} reference values match to 4 dp")
        } else {
            format!("{} of {n} differ: {}", mismatches.len(), mismatches.join("; "))
        },
    )
}

// ---------------------------------------------------------------------------
// 3. rrf

fn random_runs(r: &mut ChaCha8Rng, tag: &str) -> Vec<Run> {
    let n_runs = r.gen_range(1..=6);
    let pool: Vec<String> = (0..r.gen_range(5..60)).map(|i| format!("d{i:02}")).collect();
    (0..n_runs)
        .map(|i| {
            let mut run = Run::new(format!("{tag}{i}"));
            for t in 1..=3u32 {
                let mut docs = pool.clone();
                docs.shuffle(r);
                let k = r.gen_range(1..=docs.len());
                let scored = docs[..k]
                    .iter()
                    .enumerate()
                    .map(|(j, d)| Scored::new(d.clone(), d.clone(), (k - j) as f64))
                    .collect();
                run.insert_scored(t, scored, MAX_RESULTS);
            }
            run
        })
        .collect()
}

fn brute_rrf(runs: &[Run], topic: u32, k: f64) -> Vec<(String, f64)> {
    let mut ranks: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for run in runs {
        for e in run.entries(topic) {
            ranks.entry(e.original_id.clone()).or_default().push(e.rank);
        }
    }
    let mut scored: Vec<(String, f64)> = ranks
        .into_iter()
        .map(|(d, mut rs)| {
            rs.sort();
            (d, rs.iter().map(|&r| 1.0 / (k + r as f64)).sum())
        })
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| b.0.cmp(&a.0)));
    scored
}

fn c3_rrf() -> Outcome {
    let p = RrfParams::default();
    let mut r = rng(3);
    let mut random_ok = 0;
    for _ in 0..100 {
        let runs = random_runs(&mut r, "r");
        let fused = rrf_fuse(&runs, &p, "f").unwrap();
        let ok = (1..=3).all(|t| {
            let want = brute_rrf(&runs, t, p.k);
            let got = fused.entries(t);
            got.iter()
                .take(10)
                .zip(want.iter().take(10))
                .all(|(g, w)| g.original_id == w.0 && (g.score - w.1).abs() < 1e-12)
                && got.len() == want.len().min(MAX_RESULTS)
        });
        random_ok += usize::from(ok);
    }

    // one run, including tied scores, must come back in its own order
    let mut single_ok = true;
    for _ in 0..20 {
        let mut run = Run::new("solo");
        let docs = (0..50).map(|i| Scored::new(format!("s{i:02}"), format!("s{i:02}"), r.gen_range(0..5) as f64)).collect();
        run.insert_scored(1, docs, MAX_RESULTS);
        let fused = rrf_fuse([&run], &p, "f").unwrap();
        let ids = |x: &Run| x.entries(1).iter().map(|e| e.surrogate_id.clone()).collect::<Vec<_>>();
        single_ok &= ids(&fused) == ids(&run);
    }

    let mut a = Run::new("a");
    a.insert_scored(1, vec![Scored::new("x", "x", 2.0), Scored::new("y", "y", 1.0)], MAX_RESULTS);
    let mut b = Run::new("b");
    b.insert_scored(1, vec![Scored::new("y", "y", 2.0), Scored::new("x", "x", 1.0)], MAX_RESULTS);
    let hand = rrf_fuse([&a, &b], &p, "h").unwrap().entries(1)[0].score;
    let exact = 123.0 / 3782.0; // 1/61 + 1/62
    let literal = 0.0325251;
    let hand_exact = (hand - exact).abs() < 1e-12;
    let hand_literal = (hand - literal).abs() <= 1e-6;

    let pass = random_ok == 100 && single_ok && hand_exact && hand_literal;
    Outcome::new(
        pass,
        format!(
            "random {random_ok}/100 top-10 match brute force; single-run order {}; \
             hand case {hand:.7} = 123/3782 {}; stated literal {literal} {} (|diff| {:.1e}, \
             the literal does not equal 1/61 + 1/62)",
            if single_ok { "preserved" } else { "BROKEN" },
            if hand_exact { "ok" } else { "WRONG" },
            if hand_literal { "matches" } else { "not reproducible to 1e-6" },
            (hand - literal).abs()
        ),
    )
}

// ---------------------------------------------------------------------------
// 4. fusion recipes

fn toy_config(out: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig::load(&data().join("toy/pipeline.toml")).unwrap();
    cfg.output_dir = out.to_path_buf();
    cfg
}

fn ids(run: &Run) -> Vec<(u32, String)> {
    run.all_entries().map(|e| (e.topic, e.surrogate_id.clone())).collect()
}

fn c4_recipes() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let produce = |recipe| {
        let mut p = Pipeline::new(toy_config(tmp.path())).unwrap();
        p.produce(recipe).unwrap().0
    };
    let mut notes = Vec::new();
    let mut ok = true;
    let mut toy = Vec::new();
    for recipe in [Recipe::FusionOfRuns, Recipe::FusionOfFusions] {
        let first = produce(recipe);
        let second = produce(recipe);
        let valid = first.validate().is_empty();
        let same = first == second;
        ok &= valid && same && first.topic_set().len() == 5;
        notes.push(format!("{recipe}: valid {valid}, deterministic {same}, {} entries", first.len()));
        toy.push(first);
    }
    let toy_differs = ids(&toy[0]) != ids(&toy[1]);

    // witness: smallest seed whose 4x4 runs fuse differently
    let p = RrfParams::default();
    let mut witness = None;
    for seed in 0..1000u64 {
        let mut r = rng(seed);
        let pool: Vec<String> = (0..8).map(|i| format!("w{i}")).collect();
        let groups: Vec<Vec<Run>> = (0..4)
            .map(|g| {
                (0..4)
                    .map(|i| {
                        let mut docs = pool.clone();
                        docs.shuffle(&mut r);
                        let mut run = Run::new(format!("g{g}r{i}"));
                        let n = docs.len();
                        run.insert_scored(
                            1,
                            docs.into_iter().enumerate().map(|(j, d)| Scored::new(d.clone(), d, (n - j) as f64)).collect(),
                            MAX_RESULTS,
                        );
                        run
                    })
                    .collect()
            })
            .collect();
        let flat: Vec<Run> = groups.iter().flatten().cloned().collect();
        let a = fusion_of_runs(&flat, &p, "a").unwrap();
        let b = fusion_of_fusions(&groups, &p, "b").unwrap();
        if ids(&a) != ids(&b) {
            witness = Some((seed, ids(&a)[..3].to_vec(), ids(&b)[..3].to_vec()));
            break;
        }
    }
    ok &= witness.is_some();
    let w = match &witness {
        Some((seed, a, b)) => format!(
            "witness seed {seed}: fusionOfRuns top-3 {:?} vs fusionOfFusions {:?}",
            a.iter().map(|x| &x.1).collect::<Vec<_>>(),
            b.iter().map(|x| &x.1).collect::<Vec<_>>()
        ),
        None => "no witness found".into(),
    };
    Outcome::new(ok, format!("{}; toy outputs differ: {toy_differs}; {w}", notes.join("; ")))
}

// ---------------------------------------------------------------------------
// 5. source table

// (source, partially relevant, relevant, documents)
const TABLE: [(&str, usize, usize, usize); 6] = [
    ("biorxiv", 45, 62, 764),
    ("CZI", 19, 17, 117),
    ("Elsevier", 368, 374, 19457),
    ("medrxiv", 178, 348, 1088),
    ("PMC", 312, 183, 28648),
    ("WHO", 44, 70, 1004),
];
const TABLE_PCT: [(f64, f64); 6] = [
    (4.66, 5.88),
    (1.97, 1.61),
    (38.1, 35.48),
    (18.43, 33.02),
    (32.3, 17.36),
    (4.55, 6.64),
];

fn check_table(qrels: &Qrels, records: &[DocumentRecord]) -> Result<(), String> {
    let table = source_stats(qrels, records);
    for ((src, part, rel, docs), (pp, rp)) in TABLE.iter().zip(TABLE_PCT) {
        let row = table
            .rows
            .iter()
            .find(|r| r.source == *src)
            .ok_or_else(|| format!("missing row {src}"))?;
        let got = (row.partially_relevant, row.relevant, row.docs, row.partially_relevant_pct, row.relevant_pct);
        if got != (*part, *rel, *docs, pp, rp) {
            return Err(format!("{src}: got {got:?}"));
        }
    }
    let t = &table.total;
    if (t.partially_relevant, t.relevant, t.docs) != (966, 1054, 51078) {
        return Err(format!("total {} {} {}", t.partially_relevant, t.relevant, t.docs));
    }
    Ok(())
}

/// Records and qrels with the table's per-source counts. Some documents
/// are judged both 1 and 2 on different topics, and some are judged
/// several times with the same grade, so unique counting is exercised.
fn synthetic_table() -> (Qrels, Vec<DocumentRecord>) {
    let mut records = Vec::new();
    let mut qrels = Qrels::new();
    for (src, part, rel, docs) in TABLE {
        let ids: Vec<String> = (0..docs).map(|i| format!("{src}-{i:05}")).collect();
        for id in &ids {
            let mut rec = DocumentRecord::new(id.clone(), "", "");
            rec.source = src.to_string();
            records.push(rec);
        }
        let both = part.min(rel) / 3;
        for (i, id) in ids[..part].iter().enumerate() {
            qrels.insert(1 + (i % 30) as u32, id.clone(), 1).unwrap();
            if i % 7 == 0 {
                qrels.insert(31, id.clone(), 1).unwrap();
            }
        }
        // the first `both` relevant docs are also partially relevant above
        for (i, id) in ids[part - both..part - both + rel].iter().enumerate() {
            qrels.insert(32 + (i % 5) as u32, id.clone(), 2).unwrap();
        }
        for id in &ids[part - both + rel..(part - both + rel + 40).min(docs)] {
            qrels.insert(40, id.clone(), 0).unwrap();
        }
    }
    (qrels, records)
}

fn c5_source_table() -> Outcome {
    let (qrels, records) = synthetic_table();
    let synthetic = check_table(&qrels, &records);
    let real = match (std::env::var_os("COVSEARCH_ROUND1_QRELS"), std::env::var_os("COVSEARCH_METADATA_2020_04_10")) {
        (Some(q), Some(m)) => {
            let records = covsearch::corpus::parse_metadata(
                Path::new(&m),
                covsearch::corpus::MetadataFormat::from_path(Path::new(&m)),
            )
            .unwrap();
            Some(check_table(&read_qrels(Path::new(&q)).unwrap(), &records))
        }
        _ => None,
    };
    let pass = synthetic.is_ok() && real.as_ref().is_none_or(|r| r.is_ok());
    let real_note = match &real {
        None => "real round-1 data not supplied (set COVSEARCH_ROUND1_QRELS and COVSEARCH_METADATA_2020_04_10), skipped".to_string(),
        Some(Ok(())) => "real round-1 data reproduces every cell".to_string(),
        Some(Err(e)) => format!("real data mismatch: {e}"),
    };
    Outcome::new(
        pass,
        format!(
            "synthetic reconstruction {}; {real_note}",
            match synthetic {
                Ok(()) => "reproduces all counts, percentages and totals 966/1054/51078".to_string(),
                Err(e) => format!("mismatch: {e}"),
            }
        ),
    )
}

// ---------------------------------------------------------------------------
// 6. agreement

fn c6_agreement() -> Outcome {
    let dir = data().join("agreement");
    let ours = read_qrels(&dir.join("ours.txt")).unwrap();
    let nist = read_qrels(&dir.join("nist.txt")).unwrap();
    let graded = agreement(&ours, &nist, false).unwrap();
    let swapped = agreement(&nist, &ours, false).unwrap();
    let binary = agreement(&ours, &nist, true).unwrap();
    let pa = format!("{:.1}", graded.pct_agree());
    let pd = format!("{:.1}", graded.pct_disagree());
    let pass = (graded.common, graded.agreed, graded.disagreed) == (243, 127, 116)
        && pa == "52.3"
        && pd == "47.7"
        && graded.only_a == 55
        && (swapped.common, swapped.agreed, swapped.only_b) == (243, 127, 55);
    Outcome::new(
        pass,
        format!(
            "graded: common {} agreed {} ({pa}%) disagreed {} ({pd}%), only ours {}; binary: agreed {} ({:.1}%)",
            graded.common,
            graded.agreed,
            graded.disagreed,
            graded.only_a,
            binary.agreed,
            binary.pct_agree()
        ),
    )
}

// ---------------------------------------------------------------------------
// 7. determinism

fn dir_contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

fn c7_determinism() -> Outcome {
    let start = Instant::now();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    covsearch::pipeline::run_pipeline(toy_config(a.path())).unwrap();
    covsearch::pipeline::run_pipeline(toy_config(b.path())).unwrap();
    let elapsed = start.elapsed();
    let (fa, fb) = (dir_contents(a.path()), dir_contents(b.path()));
    let runs = fa.keys().filter(|k| k.ends_with(".run")).count();
    let reports = fa.keys().filter(|k| k.ends_with(".eval.txt")).count();
    let identical = fa == fb;
    let all_valid = fa
        .iter()
        .filter(|(k, _)| k.ends_with(".run"))
        .all(|(k, _)| read_run(&a.path().join(k)).map(|r| r.validate().is_empty()).unwrap_or(false));
    Outcome::new(
        identical && runs == 7 && reports == 7 && all_valid && elapsed < Duration::from_secs(10),
        format!(
            "{} files ({runs} runs, {reports} reports), byte-identical {identical}, runs valid {all_valid}, \
             two invocations {elapsed:.2?}",
            fa.len()
        ),
    )
}

// ---------------------------------------------------------------------------
// 8. invariants

fn random_docs(r: &mut ChaCha8Rng, vocab: usize) -> Vec<IndexableDoc> {
    let n = r.gen_range(1..=20);
    (0..n)
        .map(|i| {
            let len = r.gen_range(0..=15);
            let text = (0..len).map(|_| format!("w{}", r.gen_range(0..vocab))).collect::<Vec<_>>().join(" ");
            IndexableDoc {
                surrogate_id: format!("d{i}"),
                original_id: format!("d{i}"),
                text,
                variant: IndexVariant::TitleAbstract,
                paragraph_index: None,
            }
        })
        .collect()
}

fn index_recount(r: &mut ChaCha8Rng) -> Result<(), String> {
    let docs = random_docs(r, 12);
    let idx = InvertedIndex::build(&docs, &Tokenizer::raw()).map_err(|e| e.to_string())?;
    let mut tf: BTreeMap<(String, usize), u32> = BTreeMap::new();
    let mut total = 0u64;
    for (i, d) in docs.iter().enumerate() {
        let words: Vec<&str> = d.text.split(' ').filter(|w| !w.is_empty()).collect();
        total += words.len() as u64;
        if idx.docs()[i].length as usize != words.len() || idx.docs()[i].surrogate_id != d.surrogate_id {
            return Err(format!("doc {i} length"));
        }
        for w in words {
            *tf.entry((w.to_string(), i)).or_default() += 1;
        }
    }
    let terms: BTreeSet<&String> = tf.keys().map(|(t, _)| t).collect();
    if idx.num_docs() != docs.len() || idx.total_terms() != total || idx.num_terms() != terms.len() {
        return Err("collection stats".into());
    }
    if (idx.avgdl() - total as f64 / docs.len() as f64).abs() > 1e-12 {
        return Err("avgdl".into());
    }
    for t in terms {
        let want: Vec<(u32, u32)> = tf.iter().filter(|((w, _), _)| w == t).map(|((_, d), c)| (*d as u32, *c)).collect();
        let got: Vec<(u32, u32)> = idx.postings(t).iter().map(|p| (p.doc, p.tf)).collect();
        if want != got || idx.df(t) != want.len() {
            return Err(format!("postings for {t}"));
        }
    }
    Ok(())
}

fn recency_partition(r: &mut ChaCha8Rng) -> Result<(), String> {
    let n_docs = r.gen_range(1..80);
    let records: Vec<DocumentRecord> = (0..n_docs)
        .map(|i| {
            let mut rec = DocumentRecord::new(format!("p{i:02}"), "t", "a");
            rec.publish_year = [None, Some(2019), Some(2020), Some(2020), Some(2018)][r.gen_range(0..5)];
            rec
        })
        .collect();
    let years: HashMap<String, Option<u16>> = records.iter().map(|x| (x.doc_id.clone(), x.publish_year)).collect();
    let corpus = Corpus::new(records).map_err(|e| e.to_string())?;
    let mut run = Run::new("r");
    let docs = (0..n_docs).map(|i| Scored::new(format!("p{i:02}"), format!("p{i:02}"), r.gen::<f64>())).collect();
    run.insert_scored(1, docs, MAX_RESULTS);
    let top_n = r.gen_range(0..100);
    let out = recency_rerank(&run, &corpus, top_n, 2020).map_err(|e| e.to_string())?;
    let before: Vec<&RunEntry> = run.entries(1).iter().collect();
    let cut = top_n.min(before.len());
    let mut want: Vec<&str> = before[..cut]
        .iter()
        .filter(|e| years[&e.original_id] == Some(2020))
        .map(|e| e.surrogate_id.as_str())
        .collect();
    want.extend(before[..cut].iter().filter(|e| years[&e.original_id] != Some(2020)).map(|e| e.surrogate_id.as_str()));
    want.extend(before[cut..].iter().map(|e| e.surrogate_id.as_str()));
    let got: Vec<&str> = out.entries(1).iter().map(|e| e.surrogate_id.as_str()).collect();
    if got != want || !out.validate().is_empty() {
        return Err("recency order".into());
    }
    Ok(())
}

fn collapse_unique(r: &mut ChaCha8Rng) -> Result<(), String> {
    let mut run = Run::new("r");
    let n = r.gen_range(1..60);
    let docs = (0..n)
        .map(|_| {
            let orig = format!("o{}", r.gen_range(0..15));
            Scored::new(format!("{orig}.{}", r.gen_range(0..6)), orig, r.gen_range(0..10) as f64)
        })
        .collect::<Vec<_>>();
    let mut seen = BTreeSet::new();
    let docs: Vec<Scored> = docs.into_iter().filter(|d| seen.insert(d.surrogate_id.clone())).collect();
    run.insert_scored(1, docs, MAX_RESULTS);
    let out = collapse_paragraphs(&run);
    let got = out.entries(1);
    let uniq: BTreeSet<&str> = got.iter().map(|e| e.original_id.as_str()).collect();
    let originals: BTreeSet<&str> = run.entries(1).iter().map(|e| e.original_id.as_str()).collect();
    if uniq.len() != got.len() || uniq != originals || !out.validate().is_empty() {
        return Err("collapse duplicates".into());
    }
    // each kept score is the best score of that original
    for e in got {
        let best = run.entries(1).iter().filter(|x| x.original_id == e.original_id).map(|x| x.score).fold(f64::MIN, f64::max);
        if e.score != best || e.surrogate_id != e.original_id {
            return Err(format!("collapse kept wrong entry for {}", e.original_id));
        }
    }
    Ok(())
}

fn weight_set(r: &mut ChaCha8Rng, topics: &[Topic], ontology: &Ontology, lexicon: &EntityLexicon) -> Result<(), String> {
    let words = [
        "covid-19", "sars-cov-2", "coronavirus", "origin", "bats", "animal", "mice", "immunity", "weather", "death",
        "coronavirus infection", "influenza", "spike proteins", "drugs", "stomach pain", "the", "of",
    ];
    let mut t = topics[r.gen_range(0..topics.len())].clone();
    let extra: Vec<&str> = (0..r.gen_range(0..5)).map(|_| words[r.gen_range(0..words.len())]).collect();
    t.query = format!("{} {}", t.query, extra.join(" "));
    let q = build_weighted_query(&t, ontology, lexicon);
    let allowed = [1.0, 0.7, 0.4, 0.1];
    if q.terms.iter().any(|x| !allowed.contains(&x.weight())) {
        return Err(format!("weights {:?}", q.terms.iter().map(|x| x.weight()).collect::<Vec<_>>()));
    }
    Ok(())
}

fn rm3_identity(r: &mut ChaCha8Rng) -> Result<(), String> {
    let docs = random_docs(r, 8);
    let tok = Tokenizer::raw();
    let idx = InvertedIndex::build(&docs, &tok).map_err(|e| e.to_string())?;
    let q = QueryTerms::analyze(&format!("w{} w{}", r.gen_range(0..10), r.gen_range(0..10)), &tok);
    let bp = Bm25Params::default();
    let rp = Rm3Params { original_weight: 1.0, fb_docs: r.gen_range(1..5), fb_terms: r.gen_range(1..10) };
    let a = rm3_search(&idx, &q, &bp, &rp).map_err(|e| e.to_string())?;
    let b = bm25_search(&idx, &q, &bp).map_err(|e| e.to_string())?;
    if a != b {
        return Err("rm3 differs".into());
    }
    Ok(())
}

fn c8_invariants() -> Outcome {
    let toy = data().join("toy");
    let topics = parse_topics(&toy.join("topics.xml")).unwrap();
    let ontology = Ontology::load(&toy.join("ontology.jsonl")).unwrap();
    let lexicon = EntityLexicon::load(&toy.join("lexicon.tsv")).unwrap();
    let mut r = rng(8);
    let mut suites: Vec<(&str, usize, Vec<String>)> = Vec::new();
    let mut run_suite = |name, cases, f: &mut dyn FnMut(&mut ChaCha8Rng) -> Result<(), String>| {
        let failures = (0..cases).filter_map(|_| f(&mut r).err()).collect();
        suites.push((name, cases, failures));
    };
    run_suite("index recount", 1000, &mut index_recount);
    run_suite("recency partition", 300, &mut recency_partition);
    run_suite("collapse unique", 300, &mut collapse_unique);
    run_suite("weight set", 300, &mut |r| weight_set(r, &topics, &ontology, &lexicon));
    run_suite("rm3 identity", 300, &mut rm3_identity);
    // the paragraph builder feeds collapse; its surrogates must map back
    let records = Corpus::load(&toy.join("metadata.csv"), Some(&toy.join("fulltext.jsonl"))).unwrap();
    let para = build_indexable_docs(records.records(), IndexVariant::Paragraph);
    let para_ok = para.iter().all(|d| d.surrogate_id.starts_with(&format!("{}.", d.original_id)));
    let failed: usize = suites.iter().map(|s| s.2.len()).sum();
    let detail = suites
        .iter()
        .map(|(n, c, f)| format!("{n} {}/{c}", c - f.len()))
        .collect::<Vec<_>>()
        .join(", ");
    let first = suites.iter().flat_map(|s| s.2.first()).next().cloned().unwrap_or_default();
    Outcome::new(
        failed == 0 && para_ok,
        format!("{detail}; {failed} failures{}", if first.is_empty() { String::new() } else { format!(" (first: {first})") }),
    )
}

// ---------------------------------------------------------------------------
// 9. soboroff

fn c9_soboroff() -> Outcome {
    let mut dir: Vec<PathBuf> = std::fs::read_dir(data().join("toy/external"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    dir.sort();
    let candidates: Vec<Run> = dir.iter().map(|p| read_run(p).unwrap()).collect();
    let p = SoboroffParams { seed: 2020, ..SoboroffParams::default() };
    let s = soboroff_select(&candidates, &p, EvalMetric::Map).unwrap();
    let again = soboroff_select(&candidates, &p, EvalMetric::Map).unwrap();
    let other = soboroff_select(&candidates, &SoboroffParams { seed: 7, ..p }, EvalMetric::Map).unwrap();

    // rank by mean rank independently; ties are broken by input position
    let mut by_mean: Vec<usize> = (0..candidates.len()).collect();
    by_mean.sort_by(|&a, &b| s.mean_ranks[a].partial_cmp(&s.mean_ranks[b]).unwrap().then(a.cmp(&b)));
    let top: BTreeSet<usize> = by_mean[..9].iter().copied().collect();
    let bottom: BTreeSet<usize> = by_mean[18..].iter().copied().collect();
    let chosen: BTreeSet<usize> = s.selected.iter().copied().collect();
    let middle: BTreeSet<usize> = by_mean[9..18].iter().copied().collect();
    let excluded = chosen.is_disjoint(&top) && chosen.is_disjoint(&bottom);
    let pass = candidates.len() == 27 && s.selected.len() == 9 && chosen.len() == 9 && excluded && chosen == middle && s == again;
    Outcome::new(
        pass,
        format!(
            "27 candidates, selected {:?}, excludes top-9 and bottom-9 {excluded}, reproducible {}, seed 7 selection {}",
            s.selected.iter().map(|&i| candidates[i].tag()).collect::<Vec<_>>(),
            s == again,
            if other.selected == s.selected { "same" } else { "differs" }
        ),
    )
}
