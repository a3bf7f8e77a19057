use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;

use crate::hook::{HookError, LineHook};
use crate::seed::derive_seed;

use super::{rotation_slice, tag_line, CorpusBuildError, EpochPlan, Mode, TypeTag};

/// Synchronous batch back-translator: one output line per input line.
pub trait BtHook {
    fn back_translate(&self, targets: &[String], temperature: f64, seed: u64) -> Result<Vec<String>, HookError>;
}

/// Returns its input unchanged; for dry runs and tests.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityBtHook;

impl BtHook for IdentityBtHook {
    fn back_translate(&self, targets: &[String], _temperature: f64, _seed: u64) -> Result<Vec<String>, HookError> {
        Ok(targets.to_vec())
    }
}

/// External executable called as `PROGRAM [ARGS] --temperature T --seed S`.
#[derive(Debug, Clone)]
pub struct ExternalBtHook(pub LineHook);

impl BtHook for ExternalBtHook {
    fn back_translate(&self, targets: &[String], temperature: f64, seed: u64) -> Result<Vec<String>, HookError> {
        let extra = [
            "--temperature".to_string(),
            temperature.to_string(),
            "--seed".to_string(),
            seed.to_string(),
        ];
        self.0.run(targets, &extra)
    }
}

/// Lines of one component; `source` is absent for back-translation pools.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Pool {
    pub source: Option<Vec<String>>,
    pub target: Vec<String>,
}

fn read_lines(path: &Path) -> Result<Vec<String>, CorpusBuildError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusBuildError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(text.lines().map(str::to_string).collect())
}

/// Pools keyed by component name.
#[derive(Debug, Clone, Default)]
pub struct Pools(pub BTreeMap<String, Pool>);

impl Pools {
    /// Reads every component's files and checks side-by-side line counts.
    pub fn load(plan: &EpochPlan) -> Result<Self, CorpusBuildError> {
        let mut pools = BTreeMap::new();
        for c in &plan.components {
            let target = read_lines(&c.target)?;
            let source = c.source.as_deref().map(read_lines).transpose()?;
            if let Some(s) = &source {
                if s.len() != target.len() {
                    return Err(CorpusBuildError::Component {
                        component: c.name.clone(),
                        message: format!("{} source lines but {} target lines", s.len(), target.len()),
                    });
                }
            }
            pools.insert(c.name.clone(), Pool { source, target });
        }
        Ok(Self(pools))
    }

    pub fn insert(&mut self, name: impl Into<String>, pool: Pool) {
        self.0.insert(name.into(), pool);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedLine {
    pub source: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub component: String,
    pub type_tag: TypeTag,
    pub corpus: Option<String>,
    pub pool_size: usize,
    pub slice: Range<usize>,
    pub lines: usize,
    /// Seed handed to the back-translation hook.
    pub hook_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochManifest {
    pub epoch: usize,
    pub seed: u64,
    pub bt_temperature: f64,
    pub entries: Vec<ManifestEntry>,
}

impl EpochManifest {
    pub fn total_lines(&self) -> usize {
        self.entries.iter().map(|e| e.lines).sum()
    }

    /// One `key=value` line per component after a header line.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "epoch={} seed={} bt_temperature={} total_lines={}\n",
            self.epoch,
            self.seed,
            self.bt_temperature,
            self.total_lines()
        );
        for e in &self.entries {
            let _ = write!(
                out,
                "component={} type={} corpus={} pool_size={} slice_start={} slice_end={} lines={}",
                e.component,
                e.type_tag,
                e.corpus.as_deref().unwrap_or("-"),
                e.pool_size,
                e.slice.start,
                e.slice.end,
                e.lines
            );
            if let Some(s) = e.hook_seed {
                let _ = write!(out, " hook_seed={s}");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochOutput {
    pub lines: Vec<TaggedLine>,
    pub manifest: EpochManifest,
}

/// Assembles the training set of one 1-based epoch, components in plan order.
pub fn build_epoch(
    epoch: usize,
    plan: &EpochPlan,
    pools: &Pools,
    hook: &dyn BtHook,
    seed: u64,
) -> Result<EpochOutput, CorpusBuildError> {
    let mut lines = Vec::new();
    let mut entries = Vec::new();
    for c in &plan.components {
        let err = |message: String| CorpusBuildError::Component {
            component: c.name.clone(),
            message,
        };
        let pool = pools.0.get(&c.name).ok_or_else(|| err("no pool loaded".into()))?;
        let n = pool.target.len();
        let slice = match c.mode {
            Mode::Full => 0..n,
            Mode::Rotate(k) => rotation_slice(n, k, epoch).map_err(|e| err(e.to_string()))?,
        };
        let targets = &pool.target[slice.clone()];
        let (sources, hook_seed): (Vec<String>, Option<u64>) = match c.type_tag {
            TypeTag::Bt => {
                let s = derive_seed(seed, &format!("bt/{}", c.name), epoch as u64);
                let out = hook
                    .back_translate(targets, plan.bt_temperature, s)
                    .map_err(|source| CorpusBuildError::Hook {
                        component: c.name.clone(),
                        source,
                    })?;
                if out.len() != targets.len() {
                    return Err(CorpusBuildError::Hook {
                        component: c.name.clone(),
                        source: HookError::LineCount {
                            program: c.name.clone().into(),
                            expected: targets.len(),
                            got: out.len(),
                        },
                    });
                }
                (out, Some(s))
            }
            _ => {
                let src = pool.source.as_ref().ok_or_else(|| err("pool has no source side".into()))?;
                if src.len() != n {
                    return Err(err(format!("{} source lines but {n} target lines", src.len())));
                }
                (src[slice.clone()].to_vec(), None)
            }
        };
        let before = lines.len();
        for (s, t) in sources.into_iter().zip(targets) {
            // reversed pools are listed in their original direction
            let (s, t) = if c.type_tag == TypeTag::Rev { (t.clone(), s) } else { (s, t.clone()) };
            lines.push(TaggedLine {
                source: tag_line(&s, c.corpus.as_deref(), c.type_tag)?,
                target: t,
            });
        }
        entries.push(ManifestEntry {
            component: c.name.clone(),
            type_tag: c.type_tag,
            corpus: c.corpus.clone(),
            pool_size: n,
            slice,
            lines: lines.len() - before,
            hook_seed,
        });
    }
    Ok(EpochOutput {
        lines,
        manifest: EpochManifest {
            epoch,
            seed,
            bt_temperature: plan.bt_temperature,
            entries,
        },
    })
}
