use std::io::{BufRead, BufReader, Write};
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One problem reported by a checker. `offset` and `length` count
/// characters, not bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub offset: usize,
    pub length: usize,
    pub message: String,
    #[serde(default)]
    pub replacements: Vec<String>,
}

pub trait GrammarChecker {
    /// Returns one issue list per input sentence, in input order.
    fn check_batch(&mut self, batch: &[String]) -> Result<Vec<Vec<Issue>>>;
}

/// Runs an external program once per batch. The program reads one sentence
/// per line on stdin and writes, per input line, one line holding a JSON
/// array of issue objects `{offset, length, message, replacements}`.
pub struct SubprocessChecker {
    command: Vec<String>,
}

impl SubprocessChecker {
    pub fn new(command: Vec<String>) -> Result<Self> {
        if command.is_empty() {
            return Err(Error::Config("checker command is empty".into()));
        }
        Ok(Self { command })
    }
}

impl GrammarChecker for SubprocessChecker {
    fn check_batch(&mut self, batch: &[String]) -> Result<Vec<Vec<Issue>>> {
        let program = &self.command[0];
        let mut child = Command::new(program)
            .args(&self.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| Error::io(program, e))?;

        let mut stdin = child.stdin.take().expect("stdin is piped");
        let input: String = batch.iter().map(|s| format!("{}\n", s.replace('\n', " "))).collect();
        let writer = std::thread::spawn(move || stdin.write_all(input.as_bytes()));

        let stdout = child.stdout.take().expect("stdout is piped");
        let mut results = Vec::with_capacity(batch.len());
        for (i, line) in BufReader::new(stdout).lines().enumerate() {
            let line = line.map_err(|e| Error::io(program, e))?;
            let issues: Vec<Issue> = serde_json::from_str(&line)
                .map_err(|e| Error::format(program, i + 1, format!("bad checker response: {e}")))?;
            results.push(issues);
        }
        let _ = writer.join();
        let status = child.wait().map_err(|e| Error::io(program, e))?;
        if !status.success() {
            return Err(Error::Data(format!("checker exited with {status}")));
        }
        if results.len() != batch.len() {
            return Err(Error::Data(format!(
                "checker answered {} of {} sentences",
                results.len(),
                batch.len()
            )));
        }
        Ok(results)
    }
}

/// In-process checker flagging immediately repeated words ("the the").
#[derive(Debug, Default, Clone, Copy)]
pub struct RepeatedWordChecker;

impl GrammarChecker for RepeatedWordChecker {
    fn check_batch(&mut self, batch: &[String]) -> Result<Vec<Vec<Issue>>> {
        Ok(batch.iter().map(|s| repeated_words(s)).collect())
    }
}

fn repeated_words(sentence: &str) -> Vec<Issue> {
    let mut words: Vec<(usize, String)> = Vec::new();
    let mut current = String::new();
    let mut start = 0;
    for (i, c) in sentence.chars().chain(std::iter::once(' ')).enumerate() {
        if c.is_alphanumeric() || c == '\'' {
            if current.is_empty() {
                start = i;
            }
            current.push(c);
        } else if !current.is_empty() {
            words.push((start, std::mem::take(&mut current)));
        }
    }
    words
        .windows(2)
        .filter(|w| w[0].1.to_lowercase() == w[1].1.to_lowercase())
        .map(|w| {
            let end = w[1].0 + w[1].1.chars().count();
            Issue {
                offset: w[0].0,
                length: end - w[0].0,
                message: format!("possible repeated word: {:?}", w[1].1),
                replacements: vec![w[0].1.clone()],
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckOptions {
    pub batch_size: usize,
    /// Replace each flagged span with the checker's first suggestion.
    pub apply_suggestions: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            batch_size: 256,
            apply_suggestions: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckedSentence {
    pub sentence: String,
    pub issues: Vec<Issue>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CheckReport {
    pub results: Vec<CheckedSentence>,
    pub warnings: Vec<String>,
}

/// Sends sentences to `checker` in batches. The checker is advisory: when it
/// fails, the affected sentences pass through unchanged with no issues and a
/// warning is recorded.
pub fn check_external(
    sentences: &[String],
    checker: &mut dyn GrammarChecker,
    opts: CheckOptions,
) -> CheckReport {
    let mut report = CheckReport::default();
    for chunk in sentences.chunks(opts.batch_size.max(1)) {
        match checker.check_batch(chunk) {
            Ok(issue_lists) => {
                for (s, issues) in chunk.iter().zip(issue_lists) {
                    let sentence = if opts.apply_suggestions {
                        apply_first_suggestions(s, &issues)
                    } else {
                        s.clone()
                    };
                    report.results.push(CheckedSentence { sentence, issues });
                }
            }
            Err(e) => {
                let msg = format!("grammar checker unavailable, passing {} sentences through: {e}", chunk.len());
                log::warn!("{msg}");
                report.warnings.push(msg);
                report.results.extend(chunk.iter().map(|s| CheckedSentence {
                    sentence: s.clone(),
                    issues: Vec::new(),
                }));
            }
        }
    }
    report
}

/// Applies the first replacement of each non-overlapping issue, scanning
/// from the end so earlier offsets stay valid.
pub fn apply_first_suggestions(sentence: &str, issues: &[Issue]) -> String {
    let mut chars: Vec<char> = sentence.chars().collect();
    let mut ordered: Vec<&Issue> = issues.iter().filter(|i| !i.replacements.is_empty()).collect();
    ordered.sort_by_key(|i| std::cmp::Reverse(i.offset));
    let mut limit = chars.len();
    for issue in ordered {
        let end = issue.offset + issue.length;
        if end > limit {
            continue;
        }
        chars.splice(issue.offset..end, issue.replacements[0].chars());
        limit = issue.offset;
    }
    chars.into_iter().collect()
}
