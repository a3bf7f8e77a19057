use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use robustmt::corpusbuild::{build_epoch, parse_tagged, tag_line, BtHook, EpochPlan, ExternalBtHook, IdentityBtHook, Pools, TypeTag};
use robustmt::eval::pretokenized_bleu;
use robustmt::filtering::{CorpusFilter, FilterReport, HookIdentifier, LanguageIdentifier, LidError, NgramIdentifier};
use robustmt::hook::LineHook;
use robustmt::noise::{mine_variants, noise_chunk, Lexicon, MiningOptions, VariantMap};
use robustmt::pipeline::{tag_prefix, train_model, PostprocessOptions, PostprocessReport, Postprocessor, PreprocessOptions, Preprocessor};
use robustmt::placeholder::{parity_filter, PlaceholderMap};
use robustmt::subword::SubwordModel;

use crate::config::{CorpusConfig, PipelineConfig};
use crate::error::{CliError, Result};
use crate::io::{read_lines, write_text, AttentionStream, Output, PairReader};

pub const FILTERED: &str = "filtered";
pub const NOISE: &str = "noise";
pub const PREPROCESSED: &str = "preprocessed";
pub const EPOCHS: &str = "epochs";

pub fn stage_files(output: &Path, stage: &str, name: &str) -> (PathBuf, PathBuf) {
    let dir = output.join(stage);
    (dir.join(format!("{name}.src")), dir.join(format!("{name}.tgt")))
}

/// Newest existing output of `stages` for a corpus, else its configured files.
fn latest_input(cfg: &PipelineConfig, corpus: &CorpusConfig, stages: &[&str]) -> (PathBuf, PathBuf) {
    for stage in stages {
        let (s, t) = stage_files(&cfg.output, stage, &corpus.name);
        if s.is_file() && t.is_file() {
            log::info!("{}: reading {stage} output", corpus.name);
            return (s, t);
        }
    }
    (corpus.source.clone(), corpus.target.clone())
}

/// Passes results through but remembers a hook failure, so the command exits
/// with the hook status instead of silently dropping every pair.
struct CheckedHookLid {
    inner: HookIdentifier,
    failure: Mutex<Option<String>>,
}

impl LanguageIdentifier for CheckedHookLid {
    fn identify(&self, text: &str) -> std::result::Result<Option<String>, LidError> {
        self.identify_batch(&[text]).pop().expect("one result per input")
    }

    fn identify_batch(&self, texts: &[&str]) -> Vec<std::result::Result<Option<String>, LidError>> {
        let out = self.inner.identify_batch(texts);
        if let Some(Err(e)) = out.iter().find(|r| r.is_err()) {
            self.failure.lock().unwrap().get_or_insert_with(|| e.to_string());
        }
        out
    }
}

pub fn filter(cfg: &PipelineConfig) -> Result<String> {
    let hooked = cfg.lid_hook.as_ref().map(|hook| CheckedHookLid {
        inner: HookIdentifier { hook: hook.clone() },
        failure: Mutex::new(None),
    });
    let ngram = NgramIdentifier::builtin();
    let classifier: Option<&dyn LanguageIdentifier> = match (&cfg.filter.lid, &hooked) {
        (None, _) => None,
        (Some(_), Some(h)) => Some(h),
        (Some(lid), None) => {
            for lang in [&lid.source_lang, &lid.target_lang] {
                if !ngram.languages().contains(&lang.as_str()) {
                    return Err(CliError::field("filter.lid", format!("no built-in profile for `{lang}`")));
                }
            }
            Some(&ngram)
        }
    };
    let filter = CorpusFilter::new(cfg.filter.clone(), classifier)?;
    let mut report = FilterReport::default();
    for corpus in &cfg.corpora {
        let mut reader = PairReader::open(&corpus.source, &corpus.target, &corpus.origin)?;
        let mut attention = match (&corpus.attention, &cfg.filter.attention) {
            (Some(path), Some(_)) => Some(AttentionStream::open(path)?),
            _ => None,
        };
        let (sp, tp) = stage_files(&cfg.output, FILTERED, &corpus.name);
        let (mut so, mut to) = (Output::create(&sp)?, Output::create(&tp)?);
        loop {
            let chunk = reader.chunk(cfg.chunk_lines)?;
            if chunk.is_empty() {
                break;
            }
            let matrices = attention.as_mut().map(|a| a.take(chunk.len())).transpose()?;
            let (kept, chunk_report) = filter.filter_chunk(chunk, matrices.as_deref())?;
            if let Some(msg) = hooked.as_ref().and_then(|h| h.failure.lock().unwrap().take()) {
                return Err(CliError::Hook(msg));
            }
            report.merge(&chunk_report);
            for p in kept {
                so.line(&p.source)?;
                to.line(&p.target)?;
            }
        }
        if let Some(a) = attention.as_mut() {
            a.expect_end()?;
        }
        so.finish()?;
        to.finish()?;
    }
    let text = report.to_key_values();
    write_text(&cfg.output.join(FILTERED).join("report.txt"), &text)?;
    Ok(text)
}

fn preprocess_options(cfg: &PipelineConfig) -> PreprocessOptions {
    PreprocessOptions {
        normalize_chars: cfg.subword.normalize_chars,
        placeholders: cfg.placeholders,
    }
}

/// Streams lines of several files; the first read error is kept aside.
struct LineStream<'a> {
    files: std::vec::IntoIter<PathBuf>,
    current: Option<(PathBuf, std::io::Lines<std::io::BufReader<std::fs::File>>)>,
    error: &'a mut Option<CliError>,
}

impl Iterator for LineStream<'_> {
    type Item = String;

    fn next(&mut self) -> Option<String> {
        loop {
            if self.error.is_some() {
                return None;
            }
            if let Some((path, lines)) = &mut self.current {
                match lines.next() {
                    Some(Ok(line)) => return Some(line),
                    Some(Err(e)) => {
                        *self.error = Some(CliError::io(path, e));
                        return None;
                    }
                    None => self.current = None,
                }
            }
            let path = self.files.next()?;
            match crate::io::open(&path) {
                Ok(r) => self.current = Some((path, std::io::BufRead::lines(r))),
                Err(e) => *self.error = Some(e),
            }
        }
    }
}

fn train_on(cfg: &PipelineConfig, files: Vec<PathBuf>, meta: char) -> Result<SubwordModel> {
    let mut error = None;
    let stream = LineStream {
        files: files.into_iter(),
        current: None,
        error: &mut error,
    };
    let model = train_model(
        stream,
        cfg.subword.vocab_size,
        cfg.subword.vocab_threshold,
        meta,
        &preprocess_options(cfg),
    );
    if let Some(e) = error {
        return Err(e);
    }
    Ok(model?)
}

pub fn bpe_train(cfg: &PipelineConfig) -> Result<String> {
    let corpora = cfg.select(&cfg.subword.train)?;
    let (mut sources, mut targets) = (Vec::new(), Vec::new());
    for c in corpora {
        let (s, t) = latest_input(cfg, c, &[FILTERED]);
        sources.push(s);
        targets.push(t);
    }
    let meta = cfg.subword.meta_symbol;
    let (sm, tm) = if cfg.subword.joint {
        let model = train_on(cfg, sources.into_iter().chain(targets).collect(), meta)?;
        (model.clone(), model)
    } else {
        (train_on(cfg, sources, meta)?, train_on(cfg, targets, meta)?)
    };
    let mut report = String::new();
    for (side, model, path) in [("source", &sm, &cfg.subword.source_model), ("target", &tm, &cfg.subword.target_model)] {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        model.save(path)?;
        let _ = writeln!(report, "{side}_model={}", path.display());
        let _ = writeln!(report, "{side}_merges={}", model.merges().len());
        let _ = writeln!(report, "{side}_vocab={}", model.vocab().len());
    }
    let _ = write!(report, "joint={}", cfg.subword.joint);
    Ok(report)
}

/// Loads a variant map, or mines one from the configured lexicon and text.
fn variants(cfg: &PipelineConfig) -> Result<VariantMap> {
    let n = &cfg.noise;
    if let Some(path) = n.variants.as_ref().filter(|p| p.is_file()) {
        return Ok(VariantMap::load(path)?);
    }
    let (Some(lexicon), Some(mono)) = (&n.lexicon, &n.monolingual) else {
        return Ok(VariantMap::default());
    };
    let lexicon = Lexicon::load(lexicon)?;
    let lines = read_lines(mono)?;
    let map = mine_variants(&lines, &lexicon, MiningOptions { min_freq: n.min_freq })?;
    let out = n
        .variants
        .clone()
        .unwrap_or_else(|| cfg.output.join(NOISE).join("variants.tsv"));
    if let Some(dir) = out.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    map.save(&out)?;
    Ok(map)
}

pub fn noise(cfg: &PipelineConfig, seed: u64) -> Result<String> {
    let variants = variants(cfg)?;
    let mut report = format!("seed={seed}\nvariant_words={}\nvariants={}\n", variants.len(), variants.variant_count());
    for corpus in cfg.select(&cfg.noise.corpora)? {
        let (src, tgt) = latest_input(cfg, corpus, &[FILTERED]);
        let mut reader = PairReader::open(&src, &tgt, &corpus.origin)?;
        let (sp, tp) = stage_files(&cfg.output, NOISE, &corpus.name);
        let (ns, nt) = (sp.with_extension("src.part"), tp.with_extension("tgt.part"));
        let (mut so, mut to) = (Output::create(&sp)?, Output::create(&tp)?);
        let (mut nso, mut nto) = (Output::create(&ns)?, Output::create(&nt)?);
        let tag = corpus.tag.as_deref();
        let (mut lines, mut changed) = (0u64, 0u64);
        loop {
            let chunk = reader.chunk(cfg.chunk_lines)?;
            if chunk.is_empty() {
                break;
            }
            let noised = noise_chunk(&chunk, &cfg.noise.rules, &variants, seed);
            for (clean, noisy) in chunk.iter().zip(&noised) {
                so.line(&tag_line(&clean.source, tag, TypeTag::Real)?)?;
                to.line(&clean.target)?;
                nso.line(&tag_line(&noisy.source, tag, TypeTag::Noise)?)?;
                nto.line(&noisy.target)?;
                changed += u64::from(clean.source != noisy.source);
            }
            lines += chunk.len() as u64;
        }
        nso.finish()?;
        nto.finish()?;
        // clean half first, then the noised half
        for (part, mut out) in [(ns, so), (nt, to)] {
            for line in read_lines(&part)? {
                out.line(&line)?;
            }
            out.finish()?;
            std::fs::remove_file(&part).map_err(|e| CliError::io(&part, e))?;
        }
        let _ = writeln!(report, "{}.lines={lines}\n{}.noised_changed={changed}", corpus.name, corpus.name);
    }
    Ok(report.trim_end().to_string())
}

#[derive(Debug, Default)]
struct PreprocessCounts {
    input: u64,
    output: u64,
    dropped_parity: u64,
    placeholders: [u64; 3],
}

pub fn preprocess(cfg: &PipelineConfig) -> Result<String> {
    let load = |field: &str, path: &Path| -> Result<Preprocessor> {
        if !path.is_file() {
            return Err(CliError::field(field, format!("model not found: {} (run bpe-train)", path.display())));
        }
        Ok(Preprocessor::new(SubwordModel::load(path)?, preprocess_options(cfg)))
    };
    let src_pre = load("subword.source_model", &cfg.subword.source_model)?;
    let tgt_pre = load("subword.target_model", &cfg.subword.target_model)?;
    let mut manifest = String::new();
    for corpus in &cfg.corpora {
        let (src, tgt) = latest_input(cfg, corpus, &[NOISE, FILTERED]);
        let mut reader = PairReader::open(&src, &tgt, &corpus.origin)?;
        let default_prefix = tag_prefix(corpus.tag.as_deref(), corpus.type_tag)?;
        let dir = cfg.output.join(PREPROCESSED);
        let (sp, tp) = stage_files(&cfg.output, PREPROCESSED, &corpus.name);
        let (mut so, mut to) = (Output::create(&sp)?, Output::create(&tp)?);
        let mut sidecar = Output::create(&dir.join(format!("{}.src.ph", corpus.name)))?;
        let mut counts = PreprocessCounts::default();
        loop {
            let chunk = reader.chunk(cfg.chunk_lines)?;
            if chunk.is_empty() {
                break;
            }
            counts.input += chunk.len() as u64;
            let processed: Vec<Option<(String, String, PlaceholderMap)>> = chunk
                .par_iter()
                .map(|p| {
                    // lines tagged upstream (noise) keep their tags
                    let (prefix, text) = match parse_tagged(&p.source) {
                        Some((c, t, text)) => (c.map_or(t.to_string(), |c| format!("{c} {t}")), text),
                        None => (default_prefix.clone(), p.source.as_str()),
                    };
                    let s = src_pre.preprocess(text)?;
                    let t = tgt_pre.preprocess(&p.target)?;
                    if cfg.placeholders && !parity_filter(&s.placeholders, &t.placeholders) {
                        return Ok(None);
                    }
                    Ok(Some((s.to_line(&prefix), t.to_line(""), s.placeholders)))
                })
                .collect::<std::result::Result<_, robustmt::subword::SubwordError>>()
                .map_err(|e| CliError::Data(format!("{}: {e}", corpus.name)))?;
            for item in processed {
                let Some((s, t, map)) = item else {
                    counts.dropped_parity += 1;
                    continue;
                };
                for (n, c) in counts.placeholders.iter_mut().zip(map.counts()) {
                    *n += c as u64;
                }
                so.line(&s)?;
                to.line(&t)?;
                sidecar.line(&map.to_sidecar())?;
                counts.output += 1;
            }
        }
        so.finish()?;
        to.finish()?;
        sidecar.finish()?;
        let name = &corpus.name;
        let _ = writeln!(manifest, "{name}.input={}", counts.input);
        let _ = writeln!(manifest, "{name}.output={}", counts.output);
        let _ = writeln!(manifest, "{name}.dropped_placeholder_parity={}", counts.dropped_parity);
        for (kind, n) in robustmt::placeholder::PlaceholderKind::ALL.iter().zip(counts.placeholders) {
            let _ = writeln!(manifest, "{name}.placeholders_{}={n}", kind.name());
        }
    }
    let manifest = manifest.trim_end().to_string();
    write_text(&cfg.output.join(PREPROCESSED).join("manifest.txt"), &format!("{manifest}\n"))?;
    Ok(manifest)
}

pub struct PostprocessArgs<'a> {
    pub input: &'a Path,
    pub sidecar: Option<&'a Path>,
    pub output: Option<&'a Path>,
}

pub fn postprocess(cfg: &PipelineConfig, args: PostprocessArgs<'_>) -> Result<(Vec<String>, String)> {
    let lines = read_lines(args.input)?;
    let maps = match args.sidecar {
        None => vec![PlaceholderMap::default(); lines.len()],
        Some(path) => {
            let side = read_lines(path)?;
            if side.len() != lines.len() {
                return Err(CliError::Data(format!(
                    "{} has {} lines but {} has {}",
                    path.display(),
                    side.len(),
                    args.input.display(),
                    lines.len()
                )));
            }
            side.iter()
                .enumerate()
                .map(|(i, l)| {
                    PlaceholderMap::from_sidecar(l)
                        .map_err(|e| CliError::Data(format!("{}:{}: {e}", path.display(), i + 1)))
                })
                .collect::<Result<_>>()?
        }
    };
    let post = Postprocessor::new(
        cfg.subword.meta_symbol,
        PostprocessOptions {
            normalize_punct: cfg.normalize_punct,
            french_quotes: cfg.french_quotes,
        },
    );
    let results: Vec<(String, PostprocessReport)> = lines
        .par_iter()
        .zip(maps.par_iter())
        .map(|(line, map)| post.postprocess(line, map))
        .collect();
    let mut report = PostprocessReport::default();
    let mut out = Vec::with_capacity(results.len());
    for (text, r) in results {
        report.merge(&r);
        out.push(text);
    }
    if let Some(path) = args.output {
        let mut o = Output::create(path)?;
        for l in &out {
            o.line(l)?;
        }
        o.finish()?;
    }
    Ok((out, report.to_string()))
}

pub struct EpochArgs<'a> {
    pub epoch: usize,
    pub plan: &'a Path,
    pub output: &'a Path,
    pub hook: Option<LineHook>,
    pub identity: bool,
    pub seed: u64,
}

pub fn build_epochs(args: EpochArgs<'_>) -> Result<String> {
    if args.epoch == 0 {
        return Err(CliError::field("--epoch", "epochs are numbered from 1"));
    }
    let plan = EpochPlan::load(args.plan)?;
    let external;
    let hook: &dyn BtHook = match (&args.hook, args.identity) {
        (_, true) => &IdentityBtHook,
        (Some(h), false) => {
            external = ExternalBtHook(h.clone());
            &external
        }
        (None, false) => {
            let needs = plan.components.iter().any(|c| c.type_tag == TypeTag::Bt);
            if needs {
                return Err(CliError::field("epochs.bt_hook", "plan has BT components; set a hook or pass --identity-hook"));
            }
            &IdentityBtHook
        }
    };
    let pools = Pools::load(&plan)?;
    let out = build_epoch(args.epoch, &plan, &pools, hook, args.seed)?;
    let dir = args.output.join(EPOCHS);
    let stem = format!("epoch-{}", args.epoch);
    let (mut so, mut to) = (
        Output::create(&dir.join(format!("{stem}.src")))?,
        Output::create(&dir.join(format!("{stem}.tgt")))?,
    );
    for l in &out.lines {
        so.line(&l.source)?;
        to.line(&l.target)?;
    }
    so.finish()?;
    to.finish()?;
    let manifest = out.manifest.to_text();
    write_text(&dir.join(format!("{stem}.manifest")), &manifest)?;
    Ok(manifest.trim_end().to_string())
}

pub struct ScoreArgs<'a> {
    pub hyp: &'a Path,
    pub reference: &'a Path,
    pub tokenize: Tokenize,
    pub tokenizer_hook: Option<LineHook>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Tokenize {
    #[value(name = "13a")]
    Thirteen,
    None,
}

pub fn score(args: ScoreArgs<'_>) -> Result<(String, String)> {
    let mut hyps = read_lines(args.hyp)?;
    let mut refs = read_lines(args.reference)?;
    let mut pretokenized = args.tokenize == Tokenize::None;
    if let Some(hook) = &args.tokenizer_hook {
        hyps = hook.run(&hyps, &[])?;
        refs = hook.run(&refs, &[])?;
        pretokenized = true;
    }
    let bleu = pretokenized_bleu(&hyps, &refs, pretokenized).map_err(|e| CliError::Data(e.to_string()))?;
    let mut report = format!("bleu={}\nbrevity_penalty={}\n", bleu.score, bleu.brevity_penalty);
    for (n, p) in bleu.precisions.iter().enumerate() {
        let _ = writeln!(report, "precision_{}={p}", n + 1);
    }
    let _ = write!(
        report,
        "hyp_len={}\nref_len={}\nsignature={}",
        bleu.stats.hyp_len, bleu.stats.ref_len, bleu.signature
    );
    Ok((bleu.to_string(), report))
}
