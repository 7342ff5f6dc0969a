//! Bernoulli trial streams.
//!
//! A [`TrialSource`] hands out one outcome per call. Outcomes are assumed
//! independent and identically distributed; for [`SyntheticSource`] that is
//! true by construction, for [`ExternalSource`] it is the simulator's
//! responsibility.

use std::io::{BufRead, BufReader};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::time::{Duration, Instant};

use thiserror::Error;

use super::rng::SplitMix64;

/// How long a child gets to exit after its stdin is closed.
pub const DEFAULT_GRACE: Duration = Duration::from_secs(5);

const MAX_REPORTED_LINE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Success,
    Failure,
}

impl Outcome {
    pub fn is_success(self) -> bool {
        matches!(self, Outcome::Success)
    }
}

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("failed to spawn `{command}`: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("simulator ended its output after {consumed} trials")]
    EndOfStream { consumed: u64 },
    #[error("simulator sent malformed line {line:?} after {consumed} trials (expected \"0\" or \"1\")")]
    Malformed { consumed: u64, line: String },
    #[error("reading from simulator failed after {consumed} trials: {source}")]
    Io {
        consumed: u64,
        #[source]
        source: std::io::Error,
    },
}

impl SourceError {
    /// Trials successfully read before the failure, when known.
    pub fn trials_consumed(&self) -> Option<u64> {
        match self {
            SourceError::Spawn { .. } => None,
            SourceError::EndOfStream { consumed }
            | SourceError::Malformed { consumed, .. }
            | SourceError::Io { consumed, .. } => Some(*consumed),
        }
    }
}

pub trait TrialSource {
    fn next_trial(&mut self) -> Result<Outcome, SourceError>;

    /// Human-readable label, recorded in results.
    fn descriptor(&self) -> String;

    /// Number of outcomes handed out so far.
    fn consumed(&self) -> u64;

    fn seed(&self) -> Option<u64> {
        None
    }

    /// Called once the stopping rule has fired. No further trials are read.
    fn finish(&mut self) -> Result<(), SourceError> {
        Ok(())
    }
}

/// Seeded synthetic Bernoulli stream: trial `i` succeeds iff the `i`-th
/// SplitMix64 unit draw is below `p_true`.
#[derive(Debug, Clone)]
pub struct SyntheticSource {
    p_true: f64,
    seed: u64,
    rng: SplitMix64,
    consumed: u64,
}

impl SyntheticSource {
    /// Returns `None` unless `0 < p_true < 1`.
    pub fn new(p_true: f64, seed: u64) -> Option<Self> {
        (p_true > 0.0 && p_true < 1.0).then(|| Self { p_true, seed, rng: SplitMix64::new(seed), consumed: 0 })
    }

    pub fn p_true(&self) -> f64 {
        self.p_true
    }
}

impl TrialSource for SyntheticSource {
    fn next_trial(&mut self) -> Result<Outcome, SourceError> {
        self.consumed += 1;
        Ok(if self.rng.next_unit() < self.p_true { Outcome::Success } else { Outcome::Failure })
    }

    fn descriptor(&self) -> String {
        format!("synthetic(p={}, seed={})", self.p_true, self.seed)
    }

    fn consumed(&self) -> u64 {
        self.consumed
    }

    fn seed(&self) -> Option<u64> {
        Some(self.seed)
    }
}

/// Convenience constructor for [`SyntheticSource`].
pub fn synthetic_source(p_true: f64, seed: u64) -> Option<SyntheticSource> {
    SyntheticSource::new(p_true, seed)
}

/// Degenerate stream that always returns the same outcome (`p = 0` or `p = 1`).
#[derive(Debug, Clone)]
pub struct ConstantSource {
    outcome: Outcome,
    consumed: u64,
}

impl ConstantSource {
    pub fn new(outcome: Outcome) -> Self {
        Self { outcome, consumed: 0 }
    }
}

impl TrialSource for ConstantSource {
    fn next_trial(&mut self) -> Result<Outcome, SourceError> {
        self.consumed += 1;
        Ok(self.outcome)
    }

    fn descriptor(&self) -> String {
        match self.outcome {
            Outcome::Success => "constant(success)".into(),
            Outcome::Failure => "constant(failure)".into(),
        }
    }

    fn consumed(&self) -> u64 {
        self.consumed
    }
}

/// An external simulator process streaming one outcome per line.
///
/// Protocol: each trial is the byte `'0'` or `'1'` followed by a single
/// line feed, flushed per line. Anything else is a protocol error. When the
/// run ends the child's stdin and stdout are closed; a child still alive
/// after the grace period is killed.
#[derive(Debug)]
pub struct ExternalSource {
    label: String,
    child: Option<Child>,
    stdin: Option<ChildStdin>,
    stdout: Option<BufReader<ChildStdout>>,
    consumed: u64,
    grace: Duration,
    line: Vec<u8>,
}

impl ExternalSource {
    pub fn spawn<S: AsRef<str>>(command: &str, arguments: &[S]) -> Result<Self, SourceError> {
        let mut cmd = Command::new(command);
        cmd.args(arguments.iter().map(|a| a.as_ref()))
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit());
        let label = std::iter::once(command)
            .chain(arguments.iter().map(|a| a.as_ref()))
            .collect::<Vec<_>>()
            .join(" ");
        let mut child = cmd.spawn().map_err(|source| SourceError::Spawn { command: label.clone(), source })?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().map(BufReader::new);
        Ok(Self {
            label,
            child: Some(child),
            stdin,
            stdout,
            consumed: 0,
            grace: DEFAULT_GRACE,
            line: Vec::with_capacity(4),
        })
    }

    /// Override the shutdown grace period.
    pub fn with_grace(mut self, grace: Duration) -> Self {
        self.grace = grace;
        self
    }

    fn shutdown(&mut self) {
        self.stdin.take();
        self.stdout.take();
        let Some(mut child) = self.child.take() else {
            return;
        };
        let deadline = Instant::now() + self.grace;
        loop {
            match child.try_wait() {
                Ok(Some(_)) => return,
                Ok(None) if Instant::now() < deadline => std::thread::sleep(Duration::from_millis(10)),
                _ => break,
            }
        }
        let _ = child.kill();
        let _ = child.wait();
    }
}

impl TrialSource for ExternalSource {
    fn next_trial(&mut self) -> Result<Outcome, SourceError> {
        let consumed = self.consumed;
        let reader = self.stdout.as_mut().ok_or(SourceError::EndOfStream { consumed })?;
        self.line.clear();
        let read = reader
            .read_until(b'\n', &mut self.line)
            .map_err(|source| SourceError::Io { consumed, source })?;
        if read == 0 {
            return Err(SourceError::EndOfStream { consumed });
        }
        let outcome = match self.line.as_slice() {
            b"1\n" => Outcome::Success,
            b"0\n" => Outcome::Failure,
            other => {
                let shown = &other[..other.len().min(MAX_REPORTED_LINE)];
                return Err(SourceError::Malformed { consumed, line: String::from_utf8_lossy(shown).into_owned() });
            }
        };
        self.consumed += 1;
        Ok(outcome)
    }

    fn descriptor(&self) -> String {
        format!("external({})", self.label)
    }

    fn consumed(&self) -> u64 {
        self.consumed
    }

    fn finish(&mut self) -> Result<(), SourceError> {
        self.shutdown();
        Ok(())
    }
}

impl Drop for ExternalSource {
    fn drop(&mut self) {
        self.shutdown();
    }
}

/// Spawn `command arguments…` as an [`ExternalSource`].
pub fn external_source<S: AsRef<str>>(command: &str, arguments: &[S]) -> Result<ExternalSource, SourceError> {
    ExternalSource::spawn(command, arguments)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_rejects_degenerate_p() {
        assert!(SyntheticSource::new(0.0, 1).is_none());
        assert!(SyntheticSource::new(1.0, 1).is_none());
        assert!(SyntheticSource::new(f64::NAN, 1).is_none());
    }

    #[test]
    fn synthetic_is_deterministic() {
        let mut a = SyntheticSource::new(0.37, 11).unwrap();
        let mut b = SyntheticSource::new(0.37, 11).unwrap();
        for _ in 0..1000 {
            assert_eq!(a.next_trial().unwrap(), b.next_trial().unwrap());
        }
        assert_eq!(a.consumed(), 1000);
        assert_eq!(a.seed(), Some(11));
    }

    #[test]
    fn malformed_and_eof_carry_counts() {
        let mut src = ExternalSource::spawn("sh", &["-c", "printf '1\\n0\\nx\\n'"]).unwrap();
        assert_eq!(src.next_trial().unwrap(), Outcome::Success);
        assert_eq!(src.next_trial().unwrap(), Outcome::Failure);
        match src.next_trial() {
            Err(SourceError::Malformed { consumed, line }) => {
                assert_eq!(consumed, 2);
                assert_eq!(line, "x\n");
            }
            other => panic!("expected malformed, got {other:?}"),
        }

        let mut src = ExternalSource::spawn("sh", &["-c", "printf '1\\n'"]).unwrap();
        src.next_trial().unwrap();
        assert!(matches!(src.next_trial(), Err(SourceError::EndOfStream { consumed: 1 })));
    }

    #[test]
    fn crlf_is_a_protocol_error() {
        let mut src = ExternalSource::spawn("sh", &["-c", "printf '1\\r\\n'"]).unwrap();
        assert!(matches!(src.next_trial(), Err(SourceError::Malformed { consumed: 0, .. })));
    }

    #[test]
    fn spawn_failure() {
        let err = ExternalSource::spawn::<&str>("/nonexistent/simulator", &[]).unwrap_err();
        assert!(matches!(err, SourceError::Spawn { .. }));
        assert_eq!(err.trials_consumed(), None);
    }
}
