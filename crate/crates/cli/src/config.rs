//! Pipeline configuration: one INI-style file, paths relative to it.
//!
//! ```text
//! pair = fr-en
//! seed = 13
//! output = out
//!
//! [corpus.mtnt]
//! source = data/mtnt.fr
//! target = data/mtnt.en
//! tag = MTNT
//!
//! [filter]
//! max_ratio = 1.8
//! max_ratio.commoncrawl = 1.5
//!
//! [subword]
//! source_model = models/fr.bpe
//! target_model = models/en.bpe
//! vocab_size = 16000
//! ```

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::{Path, PathBuf};

use ini::{Ini, Properties};
use robustmt::corpusbuild::{corpus_tag_token, TypeTag};
use robustmt::filtering::{AttentionFilterConfig, FilterConfig, LidConfig, COMMONCRAWL_MAX_RATIO, DEFAULT_MAX_RATIO};
use robustmt::hook::LineHook;
use robustmt::noise::NoiseRuleSet;
use robustmt::subword::META_SYMBOL;

use crate::error::{resolve, CliError, Result};

pub const LANGUAGE_PAIRS: [&str; 4] = ["fr-en", "en-fr", "ja-en", "en-ja"];
pub const DEFAULT_CHUNK_LINES: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LangPair {
    pub source: String,
    pub target: String,
}

#[derive(Debug, Clone)]
pub struct CorpusConfig {
    pub name: String,
    /// Origin used by per-origin filter rules; defaults to the name.
    pub origin: String,
    pub source: PathBuf,
    pub target: PathBuf,
    pub attention: Option<PathBuf>,
    /// Bare corpus tag name (`MTNT`).
    pub tag: Option<String>,
    pub type_tag: TypeTag,
}

#[derive(Debug, Clone)]
pub struct SubwordConfig {
    pub source_model: PathBuf,
    pub target_model: PathBuf,
    pub vocab_size: usize,
    pub vocab_threshold: u64,
    /// One model trained on both sides, written to both paths.
    pub joint: bool,
    pub normalize_chars: bool,
    pub meta_symbol: char,
    /// Corpora used for training; empty means all.
    pub train: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct NoiseConfig {
    pub corpora: Vec<String>,
    pub rules: NoiseRuleSet,
    pub lexicon: Option<PathBuf>,
    pub monolingual: Option<PathBuf>,
    pub variants: Option<PathBuf>,
    pub min_freq: u64,
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub path: PathBuf,
    pub pair: LangPair,
    pub seed: Option<u64>,
    pub output: PathBuf,
    pub chunk_lines: usize,
    pub corpora: Vec<CorpusConfig>,
    pub filter: FilterConfig,
    pub lid_hook: Option<LineHook>,
    pub subword: SubwordConfig,
    pub placeholders: bool,
    pub noise: NoiseConfig,
    pub plan: Option<PathBuf>,
    pub bt_hook: Option<LineHook>,
    pub normalize_punct: bool,
    pub french_quotes: bool,
    pub tokenizer_hook: Option<LineHook>,
}

/// Typed access to one section with `section.key` field paths in errors.
struct Section<'a> {
    name: String,
    props: Option<&'a Properties>,
    used: HashSet<String>,
}

impl<'a> Section<'a> {
    fn new(name: &str, props: Option<&'a Properties>) -> Self {
        Self {
            name: name.to_string(),
            props,
            used: HashSet::new(),
        }
    }

    fn path_of(&self, key: &str) -> String {
        if self.name.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.name)
        }
    }

    fn raw(&mut self, key: &str) -> Option<&'a str> {
        self.used.insert(key.to_string());
        self.props?.get(key).map(str::trim).filter(|v| !v.is_empty())
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|e| CliError::field(&self.path_of(key), format!("cannot parse `{v}`: {e}"))),
        }
    }

    fn opt<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| CliError::field(&self.path_of(key), format!("cannot parse `{v}`: {e}"))),
        }
    }

    fn list(&mut self, key: &str) -> Vec<String> {
        self.raw(key)
            .map(|v| v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
            .unwrap_or_default()
    }

    fn path(&mut self, base: &Path, key: &str) -> Option<PathBuf> {
        self.raw(key).map(|v| resolve(base, v))
    }

    fn hook(&mut self, base: &Path, key: &str) -> Option<LineHook> {
        self.raw(key).map(|v| parse_hook(base, v))
    }

    /// Rejects keys that were never asked for (typos).
    fn finish(&self, extra_ok: impl Fn(&str) -> bool) -> Result<()> {
        let Some(props) = self.props else { return Ok(()) };
        for (key, _) in props.iter() {
            if !self.used.contains(key) && !extra_ok(key) {
                return Err(CliError::field(&self.path_of(key), "unknown key"));
            }
        }
        Ok(())
    }
}

/// `program arg...`; a program containing `/` is relative to the config file.
pub fn parse_hook(base: &Path, value: &str) -> LineHook {
    let mut words = value.split_whitespace();
    let program = words.next().unwrap_or_default();
    let program = if program.contains('/') {
        resolve(base, program)
    } else {
        PathBuf::from(program)
    };
    LineHook::new(program).with_args(words)
}

fn require_file(field: &str, path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::field(field, format!("file not found: {}", path.display())))
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        let ini = Ini::load_from_str_noescape(text)
            .map_err(|e| CliError::Validation(format!("{}:{}: {}", path.display(), e.line, e.msg)))?;

        let known_sections = ["filter", "subword", "placeholders", "noise", "epochs", "postprocess", "score"];
        let mut seen = BTreeSet::new();
        for (name, _) in ini.iter() {
            if let Some(name) = name {
                if !seen.insert(name.to_string()) {
                    return Err(CliError::field(name, "duplicate section"));
                }
                if !known_sections.contains(&name) && !name.starts_with("corpus.") {
                    return Err(CliError::field(name, "unknown section"));
                }
            }
        }

        let mut top = Section::new("", Some(ini.general_section()));
        let pair_text = top.raw("pair").ok_or_else(|| CliError::field("pair", "missing"))?;
        if !LANGUAGE_PAIRS.contains(&pair_text) {
            return Err(CliError::field("pair", format!("must be one of {}", LANGUAGE_PAIRS.join(", "))));
        }
        let (src, tgt) = pair_text.split_once('-').expect("pairs contain a dash");
        let pair = LangPair {
            source: src.to_string(),
            target: tgt.to_string(),
        };
        let seed = top.opt::<u64>("seed")?;
        let output = top.path(&base, "output").unwrap_or_else(|| base.join("out"));
        let chunk_lines = top.parse("chunk_lines", DEFAULT_CHUNK_LINES)?;
        if chunk_lines == 0 {
            return Err(CliError::field("chunk_lines", "must be positive"));
        }
        top.finish(|_| false)?;

        let mut corpora = Vec::new();
        for (name, props) in ini.iter() {
            let Some(section) = name else { continue };
            let Some(cname) = section.strip_prefix("corpus.") else { continue };
            if cname.is_empty() {
                return Err(CliError::field(section, "corpus name is empty"));
            }
            let mut s = Section::new(section, Some(props));
            let source = s
                .path(&base, "source")
                .ok_or_else(|| CliError::field(&s.path_of("source"), "missing"))?;
            let target = s
                .path(&base, "target")
                .ok_or_else(|| CliError::field(&s.path_of("target"), "missing"))?;
            let tag = s.raw("tag").map(str::to_string);
            if let Some(t) = &tag {
                corpus_tag_token(t).map_err(|e| CliError::field(&s.path_of("tag"), e))?;
            }
            let type_tag = match s.raw("type") {
                None => TypeTag::Real,
                Some(t) => TypeTag::parse(t)
                    .ok_or_else(|| CliError::field(&s.path_of("type"), "must be real, BT, noise or rev"))?,
            };
            corpora.push(CorpusConfig {
                name: cname.to_string(),
                origin: s.raw("origin").unwrap_or(cname).to_lowercase(),
                source,
                target,
                attention: s.path(&base, "attention"),
                tag: tag.map(|t| t.trim_start_matches('<').trim_end_matches('>').to_string()),
                type_tag,
            });
            s.finish(|_| false)?;
        }

        let mut f = Section::new("filter", ini.section(Some("filter")));
        let mut origin_max_ratio = HashMap::from([("commoncrawl".to_string(), COMMONCRAWL_MAX_RATIO)]);
        if let Some(props) = ini.section(Some("filter")) {
            for (key, value) in props.iter() {
                if let Some(origin) = key.strip_prefix("max_ratio.") {
                    let r: f64 = value
                        .trim()
                        .parse()
                        .map_err(|_| CliError::field(&format!("filter.{key}"), "not a number"))?;
                    origin_max_ratio.insert(origin.to_lowercase(), r);
                }
            }
        }
        let lid_enabled = f.parse("lid", true)?;
        let max_ratio = match f.raw("max_ratio") {
            Some("off") => None,
            _ => Some(f.parse("max_ratio", DEFAULT_MAX_RATIO)?),
        };
        let attention_enabled = f.parse("attention", false)?;
        let defaults = AttentionFilterConfig::default();
        let min_entropy = f.parse("min_entropy", defaults.min_entropy)?;
        let max_frac_below = match f.raw("max_frac_below") {
            None => defaults.max_frac_below,
            Some(v) => parse_frac_pairs(v).ok_or_else(|| {
                CliError::field("filter.max_frac_below", "expected `theta:max[, theta:max...]`")
            })?,
        };
        let filter = FilterConfig {
            copy: f.parse("copy", true)?,
            lid: lid_enabled.then(|| LidConfig {
                source_lang: pair.source.clone(),
                target_lang: pair.target.clone(),
            }),
            max_ratio,
            origin_max_ratio,
            attention: attention_enabled.then_some(AttentionFilterConfig {
                min_entropy,
                max_frac_below,
            }),
            exclude_origins: f.list("exclude_origins").into_iter().map(|o| o.to_lowercase()).collect(),
        };
        filter
            .validate()
            .map_err(|e| CliError::field("filter.max_ratio", e))?;
        let lid_hook = f.hook(&base, "lid_hook");
        f.finish(|k| k.starts_with("max_ratio."))?;

        let mut sw = Section::new("subword", ini.section(Some("subword")));
        let meta_text = sw.raw("meta_symbol");
        let meta_symbol = match meta_text {
            None => META_SYMBOL,
            Some(m) => {
                let mut chars = m.chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) if !c.is_whitespace() => c,
                    _ => return Err(CliError::field("subword.meta_symbol", "must be one non-space character")),
                }
            }
        };
        let subword = SubwordConfig {
            source_model: sw
                .path(&base, "source_model")
                .unwrap_or_else(|| base.join(format!("models/{}.bpe", pair.source))),
            target_model: sw
                .path(&base, "target_model")
                .unwrap_or_else(|| base.join(format!("models/{}.bpe", pair.target))),
            vocab_size: sw.parse("vocab_size", 16_000)?,
            vocab_threshold: sw.parse("vocab_threshold", 0)?,
            joint: sw.parse("joint", false)?,
            normalize_chars: sw.parse("normalize_chars", true)?,
            meta_symbol,
            train: sw.list("train"),
        };
        sw.finish(|_| false)?;

        let mut ph = Section::new("placeholders", ini.section(Some("placeholders")));
        let placeholders = ph.parse("enabled", true)?;
        ph.finish(|_| false)?;

        let mut n = Section::new("noise", ini.section(Some("noise")));
        let mut rules = NoiseRuleSet::for_language(&pair.source).map_err(|e| CliError::field("pair", e))?;
        if let Some(p) = n.path(&base, "confusions") {
            require_file("noise.confusions", &p)?;
            rules = rules.with_confusions_file(&p).map_err(|e| CliError::field("noise.confusions", e))?;
        }
        if let Some(p) = n.path(&base, "punct") {
            require_file("noise.punct", &p)?;
            rules = rules.with_punct_file(&p).map_err(|e| CliError::field("noise.punct", e))?;
        }
        rules.word_replace_prob = n.parse("word_replace", rules.word_replace_prob)?;
        rules.punct_substitution_prob = n.parse("punct_substitution", rules.punct_substitution_prob)?;
        rules.letter_swap_prob = n.parse("letter_swap", rules.letter_swap_prob)?;
        rules.space_around_punct_prob = n.parse("space_around_punct", rules.space_around_punct_prob)?;
        rules.accent_removal_prob = n.parse("accent_removal", rules.accent_removal_prob)?;
        if let Some(p) = n.opt::<f64>("confusion")? {
            rules.confusions.iter_mut().for_each(|c| c.probability = p);
        }
        rules.validate().map_err(|e| CliError::field("noise", e))?;
        let noise = NoiseConfig {
            corpora: n.list("corpora"),
            rules,
            lexicon: n.path(&base, "lexicon"),
            monolingual: n.path(&base, "monolingual"),
            variants: n.path(&base, "variants"),
            min_freq: n.parse("min_freq", 1)?,
        };
        n.finish(|_| false)?;

        let mut ep = Section::new("epochs", ini.section(Some("epochs")));
        let plan = ep.path(&base, "plan");
        let bt_hook = ep.hook(&base, "bt_hook");
        ep.finish(|_| false)?;

        let mut pp = Section::new("postprocess", ini.section(Some("postprocess")));
        let normalize_punct = pp.parse("normalize_punct", false)?;
        let french_quotes = pp.parse("french_quotes", pair.target == "fr")?;
        pp.finish(|_| false)?;

        let mut sc = Section::new("score", ini.section(Some("score")));
        let tokenizer_hook = sc.hook(&base, "tokenizer_hook");
        sc.finish(|_| false)?;

        let cfg = Self {
            path: path.to_path_buf(),
            pair,
            seed,
            output,
            chunk_lines,
            corpora,
            filter,
            lid_hook,
            subword,
            placeholders,
            noise,
            plan,
            bt_hook,
            normalize_punct,
            french_quotes,
            tokenizer_hook,
        };
        cfg.check_references()?;
        Ok(cfg)
    }

    /// Every referenced corpus name exists and every input file is present.
    fn check_references(&self) -> Result<()> {
        let names: HashSet<&str> = self.corpora.iter().map(|c| c.name.as_str()).collect();
        for (field, list) in [("subword.train", &self.subword.train), ("noise.corpora", &self.noise.corpora)] {
            for name in list {
                if !names.contains(name.as_str()) {
                    return Err(CliError::field(field, format!("unknown corpus `{name}`")));
                }
            }
        }
        for c in &self.corpora {
            require_file(&format!("corpus.{}.source", c.name), &c.source)?;
            require_file(&format!("corpus.{}.target", c.name), &c.target)?;
            if let Some(a) = &c.attention {
                require_file(&format!("corpus.{}.attention", c.name), a)?;
            }
        }
        for (field, path) in [
            ("noise.lexicon", &self.noise.lexicon),
            ("noise.monolingual", &self.noise.monolingual),
            ("epochs.plan", &self.plan),
        ] {
            if let Some(p) = path {
                require_file(field, p)?;
            }
        }
        Ok(())
    }

    pub fn corpus(&self, name: &str) -> Result<&CorpusConfig> {
        self.corpora
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| CliError::Validation(format!("unknown corpus `{name}`")))
    }

    /// Corpora named in `names`, or all when empty.
    pub fn select(&self, names: &[String]) -> Result<Vec<&CorpusConfig>> {
        if names.is_empty() {
            return Ok(self.corpora.iter().collect());
        }
        names.iter().map(|n| self.corpus(n)).collect()
    }

    pub fn require_seed(&self, cli_seed: Option<u64>) -> Result<u64> {
        cli_seed
            .or(self.seed)
            .ok_or_else(|| CliError::field("seed", "required (set `seed` in the config or pass --seed)"))
    }
}

fn parse_frac_pairs(v: &str) -> Option<Vec<(f64, f64)>> {
    v.split(',')
        .map(|item| {
            let (t, m) = item.trim().split_once(':')?;
            let (t, m): (f64, f64) = (t.trim().parse().ok()?, m.trim().parse().ok()?);
            ((0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&m)).then_some((t, m))
        })
        .collect()
}
