//! Loaders for the ATOMIC-2020 and GLUCOSE releases.
//!
//! Malformed rows never abort a load: they are collected as [`Reject`]s and
//! the remaining rows are returned in file order.

use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relations::{Category, RelationTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            other => Err(Error::Config(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triple {
    /// `split << 32 | row`, where row is the zero-based line index in the
    /// split's file. Independent of which other splits were loaded.
    pub id: u64,
    pub head: String,
    pub relation: String,
    pub tail: String,
    pub category: Category,
    pub split: Split,
}

pub fn triple_id(split: Split, row: usize) -> u64 {
    ((split as u64) << 32) | row as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Specificity {
    Specific,
    General,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlucoseRecord {
    /// `row * 20 + (dimension - 1) * 2 + specificity`.
    pub id: u64,
    pub dimension: u8,
    pub specificity: Specificity,
    pub antecedent: String,
    pub connective: String,
    pub consequent: String,
}

pub const GLUCOSE_CONNECTIVES: [&str; 5] = [
    ">Causes/Enables>",
    ">Motivates>",
    ">Enables>",
    ">Causes>",
    ">Results in>",
];

pub fn glucose_id(row: usize, dimension: u8, specificity: Specificity) -> u64 {
    row as u64 * 20 + (dimension as u64 - 1) * 2 + specificity as u64
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub source_file: String,
    /// One-based line number in the source file.
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Loaded<T> {
    pub records: Vec<T>,
    pub rejects: Vec<Reject>,
    /// Rows (or, for GLUCOSE, non-empty statement cells) considered.
    pub input_rows: usize,
}

impl<T> Default for Loaded<T> {
    fn default() -> Self {
        Self { records: Vec::new(), rejects: Vec::new(), input_rows: 0 }
    }
}

impl<T> Loaded<T> {
    fn extend(&mut self, other: Loaded<T>) {
        self.records.extend(other.records);
        self.rejects.extend(other.rejects);
        self.input_rows += other.input_rows;
    }
}

fn is_jsonl(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "jsonl")
}

/// Finds the file for `split` inside an ATOMIC release directory:
/// `<split>.tsv`, falling back to `<split>.jsonl`.
pub fn atomic_split_path(dir: &Path, split: Split) -> PathBuf {
    let tsv = dir.join(format!("{split}.tsv"));
    if tsv.exists() {
        return tsv;
    }
    let jsonl = dir.join(format!("{split}.jsonl"));
    if jsonl.exists() {
        jsonl
    } else {
        tsv
    }
}

/// Loads the requested splits of an ATOMIC-2020 release directory, in the
/// order given.
pub fn load_atomic(dir: &Path, splits: &[Split], table: &RelationTable) -> Result<Loaded<Triple>> {
    let mut out = Loaded::default();
    for &split in splits {
        out.extend(load_atomic_file(&atomic_split_path(dir, split), split, table, false)?);
    }
    Ok(out)
}

enum RowOutcome<T> {
    Skip,
    Record(T),
    Reject(usize, String),
}

pub fn load_atomic_file(
    path: &Path,
    split: Split,
    table: &RelationTable,
    accept_auxiliary: bool,
) -> Result<Loaded<Triple>> {
    let text = crate::io::read_to_string(path)?;
    let source = path.display().to_string();
    let jsonl = is_jsonl(path);
    let lines: Vec<&str> = text.lines().collect();

    let lookup = |name: &str| {
        if accept_auxiliary {
            table.category(name)
        } else {
            table.get(name).map(|r| r.category)
        }
    };

    let outcomes: Vec<RowOutcome<Triple>> = lines
        .par_iter()
        .enumerate()
        .map(|(row, line)| {
            let line = line.strip_suffix('\r').unwrap_or(line);
            if line.trim().is_empty() {
                return RowOutcome::Skip;
            }
            if jsonl {
                parse_triple_json(line, &lookup)
            } else {
                if row == 0 && line == "head\trelation\ttail" {
                    return RowOutcome::Skip;
                }
                parse_triple_tsv(line, split, row, &lookup)
            }
            .map_or_else(|reason| RowOutcome::Reject(row + 1, reason), RowOutcome::Record)
        })
        .collect();

    let mut out = Loaded::default();
    for o in outcomes {
        match o {
            RowOutcome::Skip => {}
            RowOutcome::Record(t) => {
                out.input_rows += 1;
                out.records.push(t);
            }
            RowOutcome::Reject(row, reason) => {
                out.input_rows += 1;
                out.rejects.push(Reject {
                    source_file: source.clone(),
                    row,
                    reason,
                });
            }
        }
    }
    if !out.rejects.is_empty() {
        log::warn!("{source}: {} of {} rows rejected", out.rejects.len(), out.input_rows);
    }
    Ok(out)
}

fn parse_triple_tsv(
    line: &str,
    split: Split,
    row: usize,
    lookup: &impl Fn(&str) -> Option<Category>,
) -> std::result::Result<Triple, String> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 3 {
        return Err(format!("expected 3 tab-separated columns, found {}", cols.len()));
    }
    let (head, relation, tail) = (cols[0].trim(), cols[1].trim(), cols[2].trim());
    let category = lookup(relation).ok_or_else(|| format!("unknown relation {relation:?}"))?;
    if head.is_empty() || tail.is_empty() {
        return Err("empty head or tail".to_string());
    }
    Ok(Triple {
        id: triple_id(split, row),
        head: head.to_string(),
        relation: relation.to_string(),
        tail: tail.to_string(),
        category,
        split,
    })
}

fn parse_triple_json(
    line: &str,
    lookup: &impl Fn(&str) -> Option<Category>,
) -> std::result::Result<Triple, String> {
    let t: Triple = serde_json::from_str(line).map_err(|e| format!("invalid record: {e}"))?;
    match lookup(&t.relation) {
        None => Err(format!("unknown relation {:?}", t.relation)),
        Some(c) if c != t.category => Err(format!(
            "category {} does not match relation {} ({c})",
            t.category, t.relation
        )),
        Some(_) if t.head.trim().is_empty() || t.tail.trim().is_empty() => {
            Err("empty head or tail".to_string())
        }
        Some(_) => Ok(t),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlucoseOptions {
    pub include_specific: bool,
    pub include_general: bool,
}

impl Default for GlucoseOptions {
    fn default() -> Self {
        Self {
            include_specific: true,
            include_general: true,
        }
    }
}

/// Splits one natural-language GLUCOSE statement at its connective marker.
pub fn split_statement(cell: &str) -> std::result::Result<(String, &'static str, String), String> {
    let found: Vec<(usize, &'static str)> = GLUCOSE_CONNECTIVES
        .iter()
        .flat_map(|&c| cell.match_indices(c).map(move |(i, _)| (i, c)))
        .collect();
    let (pos, marker) = match found.as_slice() {
        [] if cell.contains('>') => return Err("unrecognised connective".to_string()),
        [] => return Err("no connective marker".to_string()),
        [one] => *one,
        _ => return Err("more than one connective marker".to_string()),
    };
    let antecedent = cell[..pos].trim();
    let consequent = cell[pos + marker.len()..].trim();
    if antecedent.is_empty() || consequent.is_empty() {
        return Err("empty span around connective".to_string());
    }
    Ok((antecedent.to_string(), marker, consequent.to_string()))
}

fn is_empty_cell(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || c.eq_ignore_ascii_case("escaped")
}

/// Loads the GLUCOSE CSV release (columns `<d>_specificNL` / `<d>_generalNL`
/// for d in 1..=10) or a JSONL file of [`GlucoseRecord`]s.
pub fn load_glucose(path: &Path, opts: GlucoseOptions) -> Result<Loaded<GlucoseRecord>> {
    if is_jsonl(path) {
        return load_glucose_jsonl(path, opts);
    }
    let source = path.display().to_string();
    let data = crate::io::read_bytes(path)?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(data.as_slice());
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();

    let mut columns = Vec::new();
    for dimension in 1..=10u8 {
        for (spec, suffix, enabled) in [
            (Specificity::Specific, "specificNL", opts.include_specific),
            (Specificity::General, "generalNL", opts.include_general),
        ] {
            let name = format!("{dimension}_{suffix}");
            match headers.iter().position(|h| h.trim() == name) {
                Some(col) if enabled => columns.push((col, dimension, spec, name)),
                Some(_) => {}
                None => {
                    return Err(Error::format(path, 1, format!("missing column {name}")));
                }
            }
        }
    }

    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| line_at(&data, p.byte() as usize));
        rows.push((line, rec));
    }

    let per_row: Vec<Loaded<GlucoseRecord>> = rows
        .par_iter()
        .enumerate()
        .map(|(row, (line, rec))| {
            let mut out = Loaded::default();
            for (col, dimension, spec, name) in &columns {
                let cell = rec.get(*col).unwrap_or("");
                if is_empty_cell(cell) {
                    continue;
                }
                out.input_rows += 1;
                match split_statement(cell) {
                    Ok((antecedent, connective, consequent)) => out.records.push(GlucoseRecord {
                        id: glucose_id(row, *dimension, *spec),
                        dimension: *dimension,
                        specificity: *spec,
                        antecedent,
                        connective: connective.to_string(),
                        consequent,
                    }),
                    Err(reason) => out.rejects.push(Reject {
                        source_file: source.clone(),
                        row: *line,
                        reason: format!("{name}: {reason}"),
                    }),
                }
            }
            out
        })
        .collect();

    let mut out = Loaded::default();
    for r in per_row {
        out.extend(r);
    }
    Ok(out)
}

fn load_glucose_jsonl(path: &Path, opts: GlucoseOptions) -> Result<Loaded<GlucoseRecord>> {
    let text = crate::io::read_to_string(path)?;
    let source = path.display().to_string();
    let mut out = Loaded::default();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<GlucoseRecord>(line)
            .map_err(|e| format!("invalid record: {e}"))
            .and_then(|r| {
                if !(1..=10).contains(&r.dimension) {
                    Err(format!("dimension {} out of range", r.dimension))
                } else if !GLUCOSE_CONNECTIVES.contains(&r.connective.as_str()) {
                    Err(format!("unknown connective {:?}", r.connective))
                } else if r.antecedent.trim().is_empty() || r.consequent.trim().is_empty() {
                    Err("empty span".to_string())
                } else {
                    Ok(r)
                }
            });
        let wanted = |r: &GlucoseRecord| match r.specificity {
            Specificity::Specific => opts.include_specific,
            Specificity::General => opts.include_general,
        };
        match parsed {
            Ok(r) if !wanted(&r) => {}
            Ok(r) => {
                out.input_rows += 1;
                out.records.push(r);
            }
            Err(reason) => {
                out.input_rows += 1;
                out.rejects.push(Reject {
                    source_file: source.clone(),
                    row: i + 1,
                    reason,
                });
            }
        }
    }
    Ok(out)
}

/// One-based line of the record starting at `byte`. The csv reader's own
/// line counter drifts on CRLF input, and after a CRLF the record offset
/// points at the `\n`.
fn line_at(data: &[u8], byte: usize) -> usize {
    let end = if data.get(byte) == Some(&b'\n') { byte + 1 } else { byte };
    1 + data[..end].iter().filter(|&&b| b == b'\n').count()
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format(path, line, format!("{other:?}")),
    }
}
