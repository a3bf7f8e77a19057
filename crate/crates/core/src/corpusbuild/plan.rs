use std::collections::HashSet;
use std::path::{Path, PathBuf};

use ini::Ini;

use super::{corpus_tag_token, CorpusBuildError, TypeTag};

/// Softmax temperature handed to the back-translation hook by default.
pub const DEFAULT_BT_TEMPERATURE: f64 = 1.0 / 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Whole pool every epoch (re-sampled for back-translation).
    Full,
    /// One 1/k slice per epoch, cycling.
    Rotate(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub name: String,
    pub type_tag: TypeTag,
    /// Bare corpus name, e.g. `MTNT`.
    pub corpus: Option<String>,
    pub mode: Mode,
    /// Absent for back-translation pools, which are target-side only.
    pub source: Option<PathBuf>,
    pub target: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochPlan {
    pub components: Vec<Component>,
    pub bt_temperature: f64,
}

/// Decimal number or `a/b` fraction.
fn parse_real(text: &str) -> Option<f64> {
    let text = text.trim();
    let v = match text.split_once('/') {
        Some((a, b)) => a.trim().parse::<f64>().ok()? / b.trim().parse::<f64>().ok()?,
        None => text.parse().ok()?,
    };
    v.is_finite().then_some(v)
}

fn parse_mode(text: &str) -> Option<Mode> {
    let mut words = text.split_whitespace();
    let mode = match words.next()? {
        "full" | "full_resample" => Mode::Full,
        "rotate" => {
            let k = words.next()?;
            let k = k.strip_prefix("1/").unwrap_or(k).parse().ok()?;
            if k == 0 {
                return None;
            }
            Mode::Rotate(k)
        }
        _ => return None,
    };
    words.next().is_none().then_some(mode)
}

impl EpochPlan {
    /// Parses an INI-style plan. Relative paths resolve against `base_dir`.
    ///
    /// ```text
    /// bt_temperature = 1/0.9
    ///
    /// [mtnt-bt]
    /// type = BT
    /// corpus = MTNT
    /// mode = rotate 5
    /// target = mono.en
    /// ```
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, CorpusBuildError> {
        let ini = Ini::load_from_str_noescape(text).map_err(|e| CorpusBuildError::Plan {
            line: e.line,
            message: e.msg.to_string(),
        })?;
        let general = ini.general_section();
        let bt_temperature = match general.get("bt_temperature") {
            None => DEFAULT_BT_TEMPERATURE,
            Some(v) => parse_real(v).filter(|t| *t > 0.0).ok_or_else(|| CorpusBuildError::Plan {
                line: 0,
                message: format!("bt_temperature must be a positive number, got `{v}`"),
            })?,
        };
        if let Some((key, _)) = general.iter().find(|(k, _)| *k != "bt_temperature") {
            return Err(CorpusBuildError::Plan {
                line: 0,
                message: format!("unknown top-level key `{key}`"),
            });
        }

        let mut names = HashSet::new();
        let mut components = Vec::new();
        for (section, props) in ini.iter() {
            let Some(name) = section else { continue };
            let err = |message: String| CorpusBuildError::Component {
                component: name.to_string(),
                message,
            };
            if !names.insert(name) {
                return Err(err("duplicate component".into()));
            }
            for (key, _) in props.iter() {
                if !["type", "corpus", "mode", "source", "target"].contains(&key) {
                    return Err(err(format!("unknown key `{key}`")));
                }
            }
            let type_tag = props
                .get("type")
                .and_then(TypeTag::parse)
                .ok_or_else(|| err("`type` must be one of real, BT, noise, rev".into()))?;
            let corpus = match props.get("corpus").map(str::trim).filter(|c| !c.is_empty()) {
                Some(c) => {
                    corpus_tag_token(c)?;
                    Some(c.trim_start_matches('<').trim_end_matches('>').to_string())
                }
                None => None,
            };
            let mode = match props.get("mode") {
                None => Mode::Full,
                Some(m) => parse_mode(m).ok_or_else(|| err(format!("bad mode `{m}` (full | rotate K)")))?,
            };
            let path = |key: &str| props.get(key).map(|p| base_dir.join(p.trim()));
            let target = path("target").ok_or_else(|| err("missing `target`".into()))?;
            let source = path("source");
            match (type_tag, &source) {
                (TypeTag::Bt, Some(_)) => return Err(err("back-translation pools take only `target`".into())),
                (TypeTag::Bt, None) => {}
                (_, None) => return Err(err("missing `source`".into())),
                _ => {}
            }
            components.push(Component {
                name: name.to_string(),
                type_tag,
                corpus,
                mode,
                source,
                target,
            });
        }
        if components.is_empty() {
            return Err(CorpusBuildError::Plan {
                line: 0,
                message: "plan has no components".into(),
            });
        }
        Ok(Self {
            components,
            bt_temperature,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CorpusBuildError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| CorpusBuildError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }
}
