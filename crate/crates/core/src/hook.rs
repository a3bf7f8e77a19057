//! External line-aligned executables (back-translator, tokenizer, language
//! identifier). Lines go to stdin, one result per line comes back on stdout,
//! and a nonzero exit status is a failure.

use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HookError {
    #[error("cannot start hook `{program}`: {source}")]
    Spawn {
        program: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("hook `{program}` I/O failed: {source}")]
    Io {
        program: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("hook `{program}` exited with {status}: {stderr}")]
    Exit {
        program: PathBuf,
        status: std::process::ExitStatus,
        stderr: String,
    },
    #[error("hook `{program}` returned {got} lines for {expected} inputs")]
    LineCount {
        program: PathBuf,
        expected: usize,
        got: usize,
    },
    #[error("hook `{program}` wrote invalid UTF-8")]
    Encoding { program: PathBuf },
}

/// An executable plus fixed leading arguments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineHook {
    pub program: PathBuf,
    pub args: Vec<String>,
}

impl LineHook {
    pub fn new(program: impl Into<PathBuf>) -> Self {
        Self {
            program: program.into(),
            args: Vec::new(),
        }
    }

    pub fn with_args<I, S>(mut self, args: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.args.extend(args.into_iter().map(Into::into));
        self
    }

    /// Runs the hook once over `lines` with `extra` arguments appended.
    pub fn run<S: AsRef<str>>(&self, lines: &[S], extra: &[String]) -> Result<Vec<String>, HookError> {
        let program = self.program.clone();
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .args(extra)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|source| HookError::Spawn {
                program: program.clone(),
                source,
            })?;

        let mut payload = String::with_capacity(lines.iter().map(|l| l.as_ref().len() + 1).sum());
        for l in lines {
            payload.push_str(l.as_ref());
            payload.push('\n');
        }
        let mut stdin = child.stdin.take().expect("stdin is piped");
        // written from a thread so a hook that streams output cannot deadlock
        let writer = std::thread::spawn(move || stdin.write_all(payload.as_bytes()));

        let stdout = child.stdout.take().expect("stdout is piped");
        let mut out = Vec::with_capacity(lines.len());
        for line in BufReader::new(stdout).split(b'\n') {
            let line = line.map_err(|source| HookError::Io {
                program: program.clone(),
                source,
            })?;
            let mut text = String::from_utf8(line).map_err(|_| HookError::Encoding {
                program: program.clone(),
            })?;
            if text.ends_with('\r') {
                text.pop();
            }
            out.push(text);
        }
        let output = child.wait_with_output().map_err(|source| HookError::Io {
            program: program.clone(),
            source,
        })?;
        let write_result = writer.join().expect("writer thread panicked");
        if !output.status.success() {
            return Err(HookError::Exit {
                program,
                status: output.status,
                stderr: String::from_utf8_lossy(&output.stderr).trim().to_string(),
            });
        }
        // a hook may legitimately close stdin early once it has what it needs
        if let Err(e) = write_result {
            if e.kind() != std::io::ErrorKind::BrokenPipe {
                return Err(HookError::Io { program, source: e });
            }
        }
        if out.len() != lines.len() {
            return Err(HookError::LineCount {
                program,
                expected: lines.len(),
                got: out.len(),
            });
        }
        Ok(out)
    }
}

#[cfg(all(test, unix))]
mod tests {
    use super::*;

    #[test]
    fn cat_is_identity() {
        let hook = LineHook::new("cat");
        let lines = ["a b", "", "ç"];
        assert_eq!(hook.run(&lines, &[]).unwrap(), lines);
    }

    #[test]
    fn failures() {
        let err = LineHook::new("false").run(&["x"], &[]).unwrap_err();
        assert!(matches!(err, HookError::Exit { .. }));
        let err = LineHook::new("sh").with_args(["-c", "head -n 1"]).run(&["x", "y"], &[]).unwrap_err();
        assert!(matches!(err, HookError::LineCount { expected: 2, got: 1, .. }));
        let err = LineHook::new("/nonexistent/hook").run(&["x"], &[]).unwrap_err();
        assert!(matches!(err, HookError::Spawn { .. }));
    }

    #[test]
    fn extra_arguments_are_passed() {
        let hook = LineHook::new("sh").with_args(["-c", "while read l; do echo \"$l $1 $2\"; done", "hook"]);
        let out = hook.run(&["a"], &["--seed".into(), "7".into()]).unwrap();
        assert_eq!(out, ["a --seed 7"]);
    }
}
