//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p robustmt-cli --test acceptance`. Criteria whose
//! stated premise does not hold on the host (hardware, external data) are
//! still executed and reported, but do not fail the run. `ACCEPTANCE_ONLY=2,3`
//! restricts the run to the listed criteria.

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robustmt::corpusbuild::rotation_slice;
use robustmt::eval::{corpus_bleu, tokenize_13a};
use robustmt::filtering::{attention_stats, attention_stats_at, AttentionMatrix, FilterConfig, Rule};
use robustmt::filtering::{CorpusFilter, Decision};
use robustmt::noise::{augment_corpus, noise_pair, NoiseRuleSet, VariantMap};
use robustmt::pipeline::{train_model, PostprocessOptions, Postprocessor, PreprocessOptions, Preprocessor};
use robustmt::subword::{apply_bpe_unit, case_encode, train_bpe, META_SYMBOL};
use robustmt::textnorm::{normalize_chars, NormTable};
use robustmt::SentencePair;

// Pinned tolerances and budgets.
const CASING_BUDGET: Duration = Duration::from_millis(1);
const ROUND_TRIP_LINES: usize = 10_000;
const ROUND_TRIP_BUDGET: Duration = Duration::from_secs(30);
const BPE_CORPORA: usize = 200;
const BPE_MAX_WORDS: usize = 50;
const BPE_BUDGET: Duration = Duration::from_secs(60);
const ENTROPY_TOL: f64 = 1e-12;
const MONOTONICITY_SAMPLES: usize = 1_000;
const FILTER_PAIRS: usize = 1_000;
const PLANTED_COPIES: usize = 50;
const PLANTED_RATIO: usize = 60;
const DEFAULT_RATIO: f64 = 1.8;
const COMMONCRAWL_RATIO: f64 = 1.5;
const IDENTITY_BLEU_TOL: f64 = 1e-9;
const ORACLE_BLEU_TOL: f64 = 1e-6;
const ROTATION_BUDGET: Duration = Duration::from_secs(1);
const THROUGHPUT_LINES: usize = 1_000_000;
const THROUGHPUT_BUDGET: Duration = Duration::from_secs(300);
const THROUGHPUT_CORES: usize = 4;
/// Peak RSS may grow at most this much between a 10x smaller run and the full run.
const MEMORY_GROWTH_ALLOWANCE_KB: u64 = 64 * 1024;

enum Outcome {
    Pass(String),
    Fail(String),
    /// Executed, but the criterion's premise is not met on this host.
    Unattainable(String),
}

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("inline casing examples", c1_casing),
        ("preprocess/postprocess round trip", c2_round_trip),
        ("BPE merge oracle", c3_bpe_oracle),
        ("attention statistics", c4_attention),
        ("filter report exactness", c5_filter),
        ("BLEU identity, oracle and corruption", c6_bleu),
        ("rotation coverage", c7_rotation),
        ("noise determinism and purity", c8_noise),
        ("published BLEU and hallucination tables", c9_not_reproducible),
        ("filter + preprocess throughput", c10_throughput),
    ];
    // ACCEPTANCE_ONLY=2,3 runs a subset
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|n| n.trim().parse().ok()).collect());
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if only.as_ref().is_some_and(|o| !o.contains(&(i + 1))) {
            continue;
        }
        let (tag, detail) = match f() {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Unattainable(d) => ("UNATTAINABLE", d),
        };
        println!("criterion {:>2} {tag:<12} {name}: {detail}", i + 1);
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

// 1

fn c1_casing() -> Outcome {
    let start = Instant::now();
    let tasty = case_encode(&["They", "▁were", "▁SO", "▁TAS", "TY", "!!"]).map(|s| s.to_string());
    let mac = case_encode(&["▁Mac", "Donalds"]).map(|s| s.to_string());
    let elapsed = start.elapsed();
    let ok = tasty.as_deref().ok() == Some("they <T> ▁were ▁so <U> ▁tas <U> ty <U> !!")
        && mac.as_deref().ok() == Some("▁mac <T> donalds <T>")
        && elapsed < CASING_BUDGET;
    check(ok, format!("{tasty:?} / {mac:?} in {elapsed:?}"))
}

// 2

const JAPANESE: &[char] = &['日', '本', '語', 'の', 'テ', 'キ', 'ス', 'ト', 'で', 'す', '猫', 'が', '寝', 'る', 'あ', 'り'];
const ACCENTED: &[char] = &['é', 'è', 'ê', 'à', 'ç', 'ù', 'ô', 'î', 'œ', 'ë'];
const CYRILLIC: &[char] = &['п', 'р', 'и', 'в', 'е', 'т', 'м', 'д'];
const EMOJIS: &[&str] = &["🙂", "😀", "👍🏽", "❤️", "🎉", "😂😂", "🇫🇷"];
const REDDIT: &[&str] = &["/r/france", "r/AskReddit", "u/Bob_42", "/u/pierre", "r/de"];
const PUNCT: &[&str] = &["!!", "?", ",", "...", ":", "(ok)", "\"", "'"];

fn random_word(rng: &mut ChaCha8Rng) -> String {
    let len = rng.gen_range(1..9);
    let script = rng.gen_range(0..10);
    let letters: String = (0..len)
        .map(|_| match script {
            0..=5 => rng.gen_range(b'a'..=b'z') as char,
            6 | 7 => {
                if rng.gen_bool(0.4) {
                    *ACCENTED.choose(rng).unwrap()
                } else {
                    rng.gen_range(b'a'..=b'z') as char
                }
            }
            8 => *CYRILLIC.choose(rng).unwrap(),
            _ => *JAPANESE.choose(rng).unwrap(),
        })
        .collect();
    match rng.gen_range(0..6) {
        0 => letters.to_uppercase(),
        1 => {
            let mut c = letters.chars();
            let first = c.next().unwrap();
            first.to_uppercase().chain(c).collect()
        }
        2 => letters
            .chars()
            .map(|c| if rng.gen_bool(0.5) { c.to_uppercase().next().unwrap() } else { c })
            .collect(),
        _ => letters,
    }
}

fn random_line(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(0..14);
    let mut line = String::new();
    for i in 0..n {
        let token = match rng.gen_range(0..20) {
            0 | 1 => EMOJIS.choose(rng).unwrap().to_string(),
            2 => REDDIT.choose(rng).unwrap().to_string(),
            3 | 4 => PUNCT.choose(rng).unwrap().to_string(),
            5 => rng.gen_range(0..100_000).to_string(),
            _ => random_word(rng),
        };
        // glue some tokens to the previous one
        if i > 0 && !rng.gen_bool(0.2) {
            line.push(' ');
        }
        line.push_str(&token);
    }
    line
}

fn c2_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let table = NormTable::nfkc_lite();
    let mut lines = Vec::with_capacity(ROUND_TRIP_LINES);
    while lines.len() < ROUND_TRIP_LINES {
        let line = random_line(&mut rng);
        // the round trip contract covers normalized text
        if normalize_chars(&line, &table) == line {
            lines.push(line);
        }
    }
    let start = Instant::now();
    let opts = PreprocessOptions::default();
    let model = match train_model(&lines[..2_000], 1_000, 0, META_SYMBOL, &opts) {
        Ok(m) => m,
        Err(e) => return Outcome::Fail(format!("training failed: {e}")),
    };
    let pre = Preprocessor::new(model, opts);
    let post = Postprocessor::new(META_SYMBOL, PostprocessOptions::for_target("en"));
    let mut failures = Vec::new();
    for line in &lines {
        let result = pre.preprocess(line).map(|p| post.postprocess(&p.to_line("<MTNT> <real>"), &p.placeholders));
        match result {
            // the two prefix tags are stripped by design; nothing else may be repaired
            Ok((back, report)) if back == *line && report.stripped_tags == 2 && report.anomalies() == 2 => {}
            other => failures.push(format!("{line:?} -> {other:?}")),
        }
    }
    let elapsed = start.elapsed();
    let passed = lines.len() - failures.len();
    let mut detail = format!("{passed}/{} identical in {elapsed:.2?}", lines.len());
    if let Some(f) = failures.first() {
        detail.push_str(&format!("; first failure {f}"));
    }
    check(failures.is_empty() && elapsed < ROUND_TRIP_BUDGET, detail)
}

// 3

/// Recounts every adjacent pair from scratch before each merge.
fn brute_force_merges(words: &[(String, u64)], target: usize) -> Vec<(String, String)> {
    let mut segs: Vec<(Vec<String>, u64)> = words
        .iter()
        .map(|(w, c)| (w.chars().map(String::from).collect(), *c))
        .collect();
    let mut pieces: HashSet<String> = segs.iter().flat_map(|(s, _)| s.iter().cloned()).collect();
    let mut merges = Vec::new();
    while pieces.len() < target {
        let mut counts: HashMap<(String, String), u64> = HashMap::new();
        for (s, c) in &segs {
            for w in s.windows(2) {
                *counts.entry((w[0].clone(), w[1].clone())).or_default() += c;
            }
        }
        let Some(best) = counts
            .into_iter()
            .max_by(|(pa, ca), (pb, cb)| ca.cmp(cb).then_with(|| pb.cmp(pa)))
            .map(|(p, _)| p)
        else {
            break;
        };
        let merged = format!("{}{}", best.0, best.1);
        for (s, _) in &mut segs {
            let mut out = Vec::with_capacity(s.len());
            let mut i = 0;
            while i < s.len() {
                if i + 1 < s.len() && s[i] == best.0 && s[i + 1] == best.1 {
                    out.push(merged.clone());
                    i += 2;
                } else {
                    out.push(s[i].clone());
                    i += 1;
                }
            }
            *s = out;
        }
        pieces.insert(merged);
        merges.push(best);
    }
    merges
}

fn c3_bpe_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let start = Instant::now();
    let mut concat_checks = 0;
    for corpus_no in 0..BPE_CORPORA {
        let alphabet = &b"abcde"[..rng.gen_range(2..=5)];
        let n_words = rng.gen_range(1..=BPE_MAX_WORDS);
        let mut words: HashMap<String, u64> = HashMap::new();
        while words.len() < n_words {
            let len = rng.gen_range(1..8);
            let w: String = (0..len).map(|_| *alphabet.choose(&mut rng).unwrap() as char).collect();
            words.insert(w, rng.gen_range(1..6));
        }
        let mut words: Vec<(String, u64)> = words.into_iter().collect();
        words.sort();
        // one word per line keeps every unit equal to its word
        let lines: Vec<&str> = words
            .iter()
            .flat_map(|(w, c)| std::iter::repeat_n(w.as_str(), *c as usize))
            .collect();
        let chars: HashSet<char> = words.iter().flat_map(|(w, _)| w.chars()).collect();
        let target = chars.len() + rng.gen_range(0..40);
        // every word becomes one `▁word` unit
        let units: Vec<(String, u64)> = words.iter().map(|(w, c)| (format!("{META_SYMBOL}{w}"), *c)).collect();
        let target = target + 1;
        let model = match train_bpe(&lines, target, 0, META_SYMBOL) {
            Ok(m) => m,
            Err(e) => return Outcome::Fail(format!("corpus {corpus_no}: {e}")),
        };
        let expected = brute_force_merges(&units, target);
        if model.merges() != expected.as_slice() {
            return Outcome::Fail(format!(
                "corpus {corpus_no}: merges {:?} != oracle {:?}",
                model.merges(),
                expected
            ));
        }
        for _ in 0..10 {
            let len = rng.gen_range(0..12);
            let unit: String = (0..len).map(|_| *b"abcdefx".choose(&mut rng).unwrap() as char).collect();
            if apply_bpe_unit(&unit, &model).concat() != unit {
                return Outcome::Fail(format!("pieces of {unit:?} do not re-concatenate"));
            }
            concat_checks += 1;
        }
    }
    let elapsed = start.elapsed();
    check(
        elapsed < BPE_BUDGET,
        format!("{BPE_CORPORA} corpora equal the oracle, {concat_checks} re-concatenations, {elapsed:.2?}"),
    )
}

// 4

fn random_attention(rng: &mut ChaCha8Rng) -> AttentionMatrix {
    let rows = rng.gen_range(1..12);
    let cols = rng.gen_range(2..12);
    let mut values = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        let raw: Vec<f64> = (0..cols).map(|_| rng.gen::<f64>().powi(3) + 1e-9).collect();
        let sum: f64 = raw.iter().sum();
        values.extend(raw.iter().map(|v| v / sum));
    }
    AttentionMatrix::new(rows, cols, values).expect("rows sum to one")
}

fn c4_attention() -> Outcome {
    let mut worst = 0.0f64;
    for n in 2..=64 {
        let s = attention_stats(&AttentionMatrix::uniform(n));
        worst = worst.max((s.mean_row_entropy - (n as f64).ln()).abs());
        if s.frac_below(0.5) != Some(0.0) {
            return Outcome::Fail(format!("uniform {n}x{n}: frac_below[0.5] = {:?}", s.frac_below(0.5)));
        }
    }
    if worst > ENTROPY_TOL {
        return Outcome::Fail(format!("uniform entropy off by {worst:e}"));
    }
    for (rows, cols) in [(1, 2), (5, 8), (20, 3)] {
        let s = attention_stats(&AttentionMatrix::eos_collapsed(rows, cols));
        if s.mean_row_entropy != 0.0 || s.frac_below(0.2) != Some(1.0) {
            return Outcome::Fail(format!("EOS one-hot {rows}x{cols}: {s:?}"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let thresholds: Vec<f64> = (0..=20).map(|i| i as f64 * 0.05).collect();
    for sample in 0..MONOTONICITY_SAMPLES {
        let s = attention_stats_at(&random_attention(&mut rng), &thresholds);
        if s.frac_below.windows(2).any(|w| w[0].1 > w[1].1) {
            return Outcome::Fail(format!("sample {sample} not monotone: {:?}", s.frac_below));
        }
    }
    Outcome::Pass(format!(
        "uniform entropy within {worst:e} of ln n, one-hot extremes exact, {MONOTONICITY_SAMPLES} monotone samples"
    ))
}

// 5

fn words(rng: &mut ChaCha8Rng, n: usize, prefix: &str) -> String {
    (0..n)
        .map(|_| format!("{prefix}{}", rng.gen_range(0..500)))
        .collect::<Vec<_>>()
        .join(" ")
}

fn c5_filter() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut pairs = Vec::with_capacity(FILTER_PAIRS);
    let mut kinds: Vec<u8> = std::iter::repeat_n(1, PLANTED_COPIES)
        .chain(std::iter::repeat_n(2, PLANTED_RATIO))
        .chain(std::iter::repeat_n(0, FILTER_PAIRS - PLANTED_COPIES - PLANTED_RATIO))
        .collect();
    kinds.shuffle(&mut rng);
    for (i, kind) in kinds.iter().enumerate() {
        let pair = match kind {
            // copy that also breaks the ratio rule is attributed to the copy rule
            1 if i % 2 == 0 => {
                let s = words(&mut rng, 4, "s");
                (s.to_uppercase(), format!("{s} !"))
            }
            1 => {
                let s = words(&mut rng, 6, "s");
                (s.clone(), s)
            }
            2 => {
                let n = rng.gen_range(2..6);
                let m = (n as f64 * DEFAULT_RATIO).floor() as usize + 1;
                if rng.gen_bool(0.5) {
                    (words(&mut rng, n, "s"), words(&mut rng, m, "t"))
                } else {
                    (words(&mut rng, m, "s"), words(&mut rng, n, "t"))
                }
            }
            _ => {
                let n = rng.gen_range(3..10);
                let m = n + rng.gen_range(0..2);
                (words(&mut rng, n, "s"), words(&mut rng, m, "t"))
            }
        };
        pairs.push(SentencePair::new(pair.0, pair.1, "europarl", i as u64));
    }
    let cfg = FilterConfig::default();
    if cfg.max_ratio != Some(DEFAULT_RATIO) || cfg.ratio_for("CommonCrawl") != Some(COMMONCRAWL_RATIO) {
        return Outcome::Fail(format!("default thresholds changed: {cfg:?}"));
    }
    let filter = CorpusFilter::new(cfg, None).expect("default config is valid");
    let (_, report) = filter.filter_chunk(pairs.clone(), None).expect("no attention");
    let t = report.totals;
    let exact = t.dropped_copy == PLANTED_COPIES as u64
        && t.dropped_length == PLANTED_RATIO as u64
        && t.kept == (FILTER_PAIRS - PLANTED_COPIES - PLANTED_RATIO) as u64
        && t.is_conserved();
    let decisions = filter.decide_chunk(&pairs, None).expect("no attention");
    let attributed = kinds.iter().zip(&decisions).all(|(k, d)| match k {
        1 => *d == Decision::Drop(Rule::Copy),
        2 => *d == Decision::Drop(Rule::Length),
        _ => *d == Decision::Keep,
    });

    // 5 source tokens against 8 target tokens: ratio 1.6
    let at_1_6 = |origin: &str| SentencePair::new("a b c d e", "p q r s t u v w", origin, 0);
    let per_origin = filter
        .decide_chunk(&[at_1_6("commoncrawl"), at_1_6("europarl"), at_1_6("news-commentary")], None)
        .expect("no attention");
    let origins_ok = per_origin == [Decision::Drop(Rule::Length), Decision::Keep, Decision::Keep];
    check(
        exact && attributed && origins_ok,
        format!(
            "copy={} length={} kept={} per-pair attribution {} ratio 1.6: {:?}",
            t.dropped_copy, t.dropped_length, t.kept, attributed, per_origin
        ),
    )
}

// 6

/// Fixtures whose text is already 13a-tokenized, so the oracle can split on spaces.
const BLEU_FIXTURES: &[(&[&str], &[&str])] = &[
    (
        &["the cat sat on the mat .", "a dog barked loudly"],
        &["the cat sat on a mat .", "the dog barked very loudly"],
    ),
    (
        &["I am so happy 🙂 today", "thanks for the link !"],
        &["I am very happy 🙂 today", "thanks for the link !"],
    ),
    (
        &["it was 3 pm and the train left", "see you soon"],
        &["it was 3 pm when the train left", "see you later"],
    ),
    (
        &["go to the store", "buy some milk and bread please", "then come home"],
        &["go to the shop", "buy milk and bread please", "then come back home"],
    ),
    (
        &["the the the the the the", "hello world"],
        &["the cat is on the mat", "hello there world"],
    ),
];

fn ngrams(tokens: &[&str], n: usize) -> Vec<Vec<String>> {
    if tokens.len() < n {
        return Vec::new();
    }
    (0..=tokens.len() - n)
        .map(|i| tokens[i..i + n].iter().map(|t| t.to_string()).collect())
        .collect()
}

/// Clipped counts by pairwise scanning, exp smoothing, brevity penalty.
fn oracle_bleu(hyps: &[&str], refs: &[&str]) -> f64 {
    let (mut correct, mut total) = ([0u64; 4], [0u64; 4]);
    let (mut hyp_len, mut ref_len) = (0u64, 0u64);
    for (h, r) in hyps.iter().zip(refs) {
        let ht: Vec<&str> = h.split(' ').collect();
        let rt: Vec<&str> = r.split(' ').collect();
        hyp_len += ht.len() as u64;
        ref_len += rt.len() as u64;
        for n in 1..=4 {
            let hg = ngrams(&ht, n);
            let rg = ngrams(&rt, n);
            total[n - 1] += hg.len() as u64;
            let mut seen: Vec<&Vec<String>> = Vec::new();
            for g in &hg {
                if seen.contains(&g) {
                    continue;
                }
                seen.push(g);
                let in_hyp = hg.iter().filter(|x| *x == g).count();
                let in_ref = rg.iter().filter(|x| *x == g).count();
                correct[n - 1] += in_hyp.min(in_ref) as u64;
            }
        }
    }
    let mut smooth = 1.0;
    let mut log_sum = 0.0;
    for n in 0..4 {
        if total[n] == 0 {
            return 0.0;
        }
        let p = if correct[n] == 0 {
            smooth *= 2.0;
            100.0 / (smooth * total[n] as f64)
        } else {
            100.0 * correct[n] as f64 / total[n] as f64
        };
        log_sum += p.ln();
    }
    let bp = if hyp_len >= ref_len {
        1.0
    } else if hyp_len == 0 {
        0.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    bp * (log_sum / 4.0).exp()
}

fn c6_bleu() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_identity = 0.0f64;
    for _ in 0..100 {
        let lines: Vec<String> = (0..rng.gen_range(1..6))
            .map(|_| {
                let n = rng.gen_range(4..15);
                words(&mut rng, n, "w")
            })
            .collect();
        let s = corpus_bleu(&lines, &lines).expect("aligned").score;
        worst_identity = worst_identity.max((s - 100.0).abs());
    }
    if worst_identity > IDENTITY_BLEU_TOL {
        return Outcome::Fail(format!("identical corpora off 100 by {worst_identity:e}"));
    }
    let mut worst_oracle = 0.0f64;
    let mut corruptions = 0;
    for (i, (hyps, refs)) in BLEU_FIXTURES.iter().enumerate() {
        for line in hyps.iter().chain(refs.iter()) {
            if tokenize_13a(line).join(" ") != *line {
                return Outcome::Fail(format!("fixture {i} is not pre-tokenized: {line:?}"));
            }
        }
        let score = corpus_bleu(hyps, refs).expect("aligned").score;
        let expected = oracle_bleu(hyps, refs);
        worst_oracle = worst_oracle.max((score - expected).abs());
        for (li, line) in hyps.iter().enumerate() {
            for ti in 0..line.split(' ').count() {
                let mut corrupted: Vec<String> = hyps.iter().map(|s| s.to_string()).collect();
                let mut toks: Vec<&str> = line.split(' ').collect();
                toks[ti] = "zzzq";
                corrupted[li] = toks.join(" ");
                let c = corpus_bleu(&corrupted, refs).expect("aligned").score;
                corruptions += 1;
                if c > score {
                    return Outcome::Fail(format!("fixture {i}: corrupting {line:?} at {ti} raised {score} to {c}"));
                }
            }
        }
    }
    check(
        worst_oracle <= ORACLE_BLEU_TOL,
        format!(
            "identity within {worst_identity:e}, oracle within {worst_oracle:e} on {} fixtures, {corruptions} corruptions never raised the score",
            BLEU_FIXTURES.len()
        ),
    )
}

// 7

fn c7_rotation() -> Outcome {
    let start = Instant::now();
    for pool in 1..=25usize {
        for k in 1..=10usize {
            let mut covered = vec![0u8; pool];
            for epoch in 1..=k {
                let Ok(r) = rotation_slice(pool, k, epoch) else {
                    return Outcome::Fail(format!("pool={pool} k={k} epoch={epoch} rejected"));
                };
                for i in r {
                    covered[i] += 1;
                }
            }
            if covered.iter().any(|&c| c != 1) {
                return Outcome::Fail(format!("pool={pool} k={k}: not a partition {covered:?}"));
            }
            if rotation_slice(pool, k, k + 1).ok() != rotation_slice(pool, k, 1).ok() {
                return Outcome::Fail(format!("pool={pool} k={k}: epoch k+1 differs from epoch 1"));
            }
        }
    }
    let elapsed = start.elapsed();
    check(elapsed < ROTATION_BUDGET, format!("250 (pool, k) cases partition exactly in {elapsed:.2?}"))
}

// 8

fn c8_noise() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let pairs: Vec<SentencePair> = (0..500)
        .map(|i| {
            let n = rng.gen_range(3..12);
            let src: Vec<String> = (0..n).map(|_| random_word(&mut rng)).collect();
            let origin = if i % 2 == 0 { "mtnt" } else { "europarl" };
            SentencePair::new(src.join(" ") + " , très bien !", format!("target {i}"), origin, i as u64)
        })
        .collect();
    let rules = NoiseRuleSet::for_language("fr")
        .expect("fr rules")
        .with_all_probabilities(0.3);
    let mut variants = VariantMap::default();
    variants.insert("bien", "bein", 3);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("pool")
            .install(|| augment_corpus(&pairs, &rules, &variants, 77))
    };
    let (one, four) = (run(1), run(4));
    let deterministic = one == four;
    let n = pairs.len();
    let targets_pure = (0..n).all(|i| one[i].pair.target == one[n + i].pair.target);
    let changed = (0..n).filter(|&i| one[i].pair.source != one[n + i].pair.source).count();
    let zero = NoiseRuleSet::zero();
    let identity = pairs.iter().all(|p| noise_pair(p, &zero, &variants, 77) == *p);
    check(
        deterministic && targets_pure && identity && changed > 0,
        format!(
            "1 vs 4 workers identical: {deterministic}, targets untouched: {targets_pure}, zero rules identity: {identity}, {changed}/{n} sources noised"
        ),
    )
}

// 9

fn c9_not_reproducible() -> Outcome {
    Outcome::Unattainable(
        "translation-quality tables need WMT-scale Transformer training; criteria 2-8 stand in for them, \
         and the filter drop shares are targets for runs on real data"
            .into(),
    )
}

// 10

const FR_WORDS: &[&str] = &[
    "le", "la", "les", "un", "une", "des", "chat", "chien", "maison", "voiture", "est", "sont", "très", "petit",
    "grand", "avec", "pour", "dans", "sur", "mais", "nous", "vous", "ils", "elle", "aujourd'hui", "demain", "bien",
    "vraiment", "merci", "bonjour", "c'est", "pas", "que", "qui", "ville", "monde", "travail", "école", "été",
];
const EN_WORDS: &[&str] = &[
    "the", "a", "an", "cat", "dog", "house", "car", "is", "are", "very", "small", "big", "with", "for", "in",
    "on", "but", "we", "you", "they", "she", "today", "tomorrow", "well", "really", "thanks", "hello", "it's",
    "not", "that", "who", "city", "world", "work", "school", "summer", "and", "of", "to",
];

fn synthetic_line(rng: &mut ChaCha8Rng, vocab: &[&str], n: usize) -> String {
    let mut line = String::new();
    for i in 0..n {
        if i > 0 {
            line.push(' ');
        }
        let w = vocab.choose(rng).unwrap();
        match rng.gen_range(0..20) {
            0 => line.push_str(&w.to_uppercase()),
            1 | 2 => {
                let mut c = w.chars();
                line.extend(c.next().unwrap().to_uppercase().chain(c));
            }
            _ => line.push_str(w),
        }
    }
    match rng.gen_range(0..10) {
        0 => line.push_str(" 🙂"),
        1 => line.push_str(" /r/france"),
        2 => line.push_str(" !!"),
        _ => line.push_str(" ."),
    }
    line
}

fn write_corpus(dir: &Path, lines: usize) -> std::io::Result<()> {
    use std::io::Write;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut src = std::io::BufWriter::new(std::fs::File::create(dir.join("c.fr"))?);
    let mut tgt = std::io::BufWriter::new(std::fs::File::create(dir.join("c.en"))?);
    for _ in 0..lines {
        let n = rng.gen_range(4..20);
        let m = (n as i64 + rng.gen_range(-2..3)).max(3) as usize;
        writeln!(src, "{}", synthetic_line(&mut rng, FR_WORDS, n))?;
        writeln!(tgt, "{}", synthetic_line(&mut rng, EN_WORDS, m))?;
    }
    src.flush()?;
    tgt.flush()
}

/// Runs the binary and samples its peak resident set (VmHWM) from /proc.
fn run_measured(dir: &Path, args: &[&str]) -> Result<(Duration, Option<u64>), String> {
    let start = Instant::now();
    let mut child = Command::new(env!("CARGO_BIN_EXE_robustmt"))
        .current_dir(dir)
        .args(args)
        .stdout(std::process::Stdio::null())
        .stderr(std::process::Stdio::piped())
        .spawn()
        .map_err(|e| e.to_string())?;
    let status_path = format!("/proc/{}/status", child.id());
    let mut peak: Option<u64> = None;
    let status = loop {
        if let Some(s) = child.try_wait().map_err(|e| e.to_string())? {
            break s;
        }
        if let Ok(text) = std::fs::read_to_string(&status_path) {
            let hwm = text
                .lines()
                .find_map(|l| l.strip_prefix("VmHWM:"))
                .and_then(|v| v.trim().trim_end_matches("kB").trim().parse::<u64>().ok());
            if hwm.is_some() {
                peak = peak.max(hwm);
            }
        }
        std::thread::sleep(Duration::from_millis(20));
    };
    let elapsed = start.elapsed();
    if !status.success() {
        let mut err = String::new();
        if let Some(mut e) = child.stderr.take() {
            let _ = std::io::Read::read_to_string(&mut e, &mut err);
        }
        return Err(format!("{args:?} exited with {status}: {err}"));
    }
    Ok((elapsed, peak))
}

fn pipeline_run(lines: usize) -> Result<(Duration, Option<u64>, usize), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = dir.path();
    write_corpus(p, lines).map_err(|e| e.to_string())?;
    std::fs::write(
        p.join("pipeline.ini"),
        "pair = fr-en\nseed = 10\n[corpus.synthetic]\nsource = c.fr\ntarget = c.en\ntag = MTNT\n\
         [subword]\nsource_model = fr.bpe\ntarget_model = en.bpe\nvocab_size = 400\n",
    )
    .map_err(|e| e.to_string())?;
    // models are trained up front; the timed criterion is filter + preprocess
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let opts = PreprocessOptions::default();
    for (vocab, path) in [(FR_WORDS, "fr.bpe"), (EN_WORDS, "en.bpe")] {
        let sample: Vec<String> = (0..5_000).map(|_| synthetic_line(&mut rng, vocab, 10)).collect();
        train_model(&sample, 400, 0, META_SYMBOL, &opts)
            .and_then(|m| m.save(p.join(path)))
            .map_err(|e| e.to_string())?;
    }
    let (t1, m1) = run_measured(p, &["filter", "--config", "pipeline.ini"])?;
    let (t2, m2) = run_measured(p, &["preprocess", "--config", "pipeline.ini"])?;
    let out = std::fs::read_to_string(p.join("out/preprocessed/synthetic.src")).map_err(|e| e.to_string())?;
    Ok((t1 + t2, m1.max(m2), out.lines().count()))
}

fn c10_throughput() -> Outcome {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let small = match pipeline_run(THROUGHPUT_LINES / 10) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(e),
    };
    let full = match pipeline_run(THROUGHPUT_LINES) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(e),
    };
    let (elapsed, peak, kept) = full;
    let bounded = match (small.1, peak) {
        (Some(a), Some(b)) => b <= a + MEMORY_GROWTH_ALLOWANCE_KB,
        _ => false,
    };
    let fast = elapsed < THROUGHPUT_BUDGET;
    let detail = format!(
        "{THROUGHPUT_LINES} lines ({kept} kept) in {elapsed:.1?} on {cores} core(s); peak RSS {} kB vs {} kB at {} lines",
        peak.map_or("?".into(), |v| v.to_string()),
        small.1.map_or("?".into(), |v| v.to_string()),
        THROUGHPUT_LINES / 10
    );
    match (fast && bounded, cores >= THROUGHPUT_CORES) {
        (true, _) => Outcome::Pass(detail),
        (false, true) => Outcome::Fail(detail),
        // the budget is stated for a 4-core machine
        (false, false) if bounded => Outcome::Unattainable(format!(
            "{detail}; time budget assumes {THROUGHPUT_CORES} cores"
        )),
        (false, false) => Outcome::Fail(detail),
    }
}
