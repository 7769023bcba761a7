//! Benchmark converters: COPA / BCOPA-CE to multiple-choice instances and
//! TCR to relation instances with event-boundary markers.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg_ingest::Reject;

pub const PROMPT_CAUSE: &str = "It is because ";
pub const PROMPT_EFFECT: &str = "As a result, ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AsksFor {
    Cause,
    Effect,
}

impl AsksFor {
    pub fn prompt(self) -> &'static str {
        match self {
            AsksFor::Cause => PROMPT_CAUSE,
            AsksFor::Effect => PROMPT_EFFECT,
        }
    }
}

impl fmt::Display for AsksFor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AsksFor::Cause => "cause",
            AsksFor::Effect => "effect",
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    Easy,
    Hard,
    #[default]
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceInstance {
    pub id: String,
    pub premise: String,
    pub choice1: String,
    pub choice2: String,
    pub asks_for: AsksFor,
    pub label: u8,
    #[serde(default)]
    pub subset: Subset,
    #[serde(default)]
    pub prompted: bool,
}

impl ChoiceInstance {
    /// The choices without any prompt prefix.
    pub fn original_choices(&self) -> (&str, &str) {
        if self.prompted {
            let p = self.asks_for.prompt();
            (
                self.choice1.strip_prefix(p).unwrap_or(&self.choice1),
                self.choice2.strip_prefix(p).unwrap_or(&self.choice2),
            )
        } else {
            (&self.choice1, &self.choice2)
        }
    }
}

/// Multiple-choice row in the SWAG layout: a context, candidate endings and
/// the zero-based index of the correct ending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwagRow {
    pub id: String,
    pub sent1: String,
    pub sent2: String,
    pub ending0: String,
    pub ending1: String,
    pub label: u8,
}

impl From<&ChoiceInstance> for SwagRow {
    fn from(c: &ChoiceInstance) -> Self {
        SwagRow {
            id: c.id.clone(),
            sent1: c.premise.clone(),
            sent2: String::new(),
            ending0: c.choice1.clone(),
            ending1: c.choice2.clone(),
            label: c.label - 1,
        }
    }
}

/// Parses a COPA-format XML file (also used by BCOPA-CE).
pub fn load_copa(path: &Path) -> Result<Vec<ChoiceInstance>> {
    let text = crate::io::read_to_string(path)?;
    parse_copa(&text).map_err(|(line, msg)| Error::format(path, line, msg))
}

pub fn parse_copa(xml: &str) -> std::result::Result<Vec<ChoiceInstance>, (usize, String)> {
    let doc = roxmltree::Document::parse(xml).map_err(|e| (e.pos().row as usize, e.to_string()))?;
    let line_of = |n: roxmltree::Node| doc.text_pos_at(n.range().start).row as usize;
    let mut out = Vec::new();
    for item in doc.root_element().children().filter(|n| n.has_tag_name("item")) {
        let line = line_of(item);
        let attr = |name: &str| {
            item.attribute(name)
                .ok_or_else(|| (line, format!("item is missing attribute {name}")))
        };
        let id = attr("id")?.to_string();
        let asks_for = match attr("asks-for")? {
            "cause" => AsksFor::Cause,
            "effect" | "result" => AsksFor::Effect,
            other => return Err((line, format!("unknown asks-for value {other:?}"))),
        };
        let label = match attr("most-plausible-alternative")? {
            "1" => 1,
            "2" => 2,
            other => return Err((line, format!("most-plausible-alternative must be 1 or 2, got {other:?}"))),
        };
        let child = |tag: &str| {
            item.children()
                .find(|n| n.has_tag_name(tag))
                .map(|n| n.text().unwrap_or("").trim().to_string())
                .ok_or_else(|| (line, format!("item {id} has no <{tag}> element")))
        };
        out.push(ChoiceInstance {
            premise: child("p")?,
            choice1: child("a1")?,
            choice2: child("a2")?,
            id,
            asks_for,
            label,
            subset: Subset::None,
            prompted: false,
        });
    }
    Ok(out)
}

/// Prefixes both choices with the question-type prompt. Applying it to an
/// already prompted instance returns it unchanged.
pub fn add_prompt(inst: &ChoiceInstance) -> ChoiceInstance {
    let mut out = inst.clone();
    if !inst.prompted {
        let p = inst.asks_for.prompt();
        out.choice1 = format!("{p}{}", inst.choice1);
        out.choice2 = format!("{p}{}", inst.choice2);
        out.prompted = true;
    }
    out
}

/// 90/10 hyperparameter-tuning split of the COPA development set.
pub fn tuning_split(instances: Vec<ChoiceInstance>, seed: u64) -> (Vec<ChoiceInstance>, Vec<ChoiceInstance>) {
    crate::split::seeded_split(instances, seed, |c| c.id.clone().into_bytes())
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EasyHardIndex {
    #[serde(default, deserialize_with = "ids_as_strings")]
    pub easy: Vec<String>,
    #[serde(default, deserialize_with = "ids_as_strings")]
    pub hard: Vec<String>,
}

fn ids_as_strings<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Vec<String>, D::Error> {
    let values: Vec<serde_json::Value> = Vec::deserialize(d)?;
    values
        .into_iter()
        .map(|v| match v {
            serde_json::Value::String(s) => Ok(s),
            serde_json::Value::Number(n) => Ok(n.to_string()),
            other => Err(serde::de::Error::custom(format!("invalid id {other}"))),
        })
        .collect()
}

impl EasyHardIndex {
    pub fn load(path: &Path) -> Result<Self> {
        let text = crate::io::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.line(), e.to_string()))
    }
}

/// Tags instances listed in the index; returns warnings for index ids that
/// match no instance.
pub fn tag_easy_hard(instances: &mut [ChoiceInstance], index: &EasyHardIndex) -> Vec<String> {
    let mut tags: HashMap<&str, Subset> = HashMap::new();
    let mut warnings = Vec::new();
    for (ids, subset) in [(&index.easy, Subset::Easy), (&index.hard, Subset::Hard)] {
        for id in ids {
            if let Some(prev) = tags.insert(id, subset) {
                if prev != subset {
                    warnings.push(format!("id {id} is listed as both easy and hard; using hard"));
                }
            }
        }
    }
    let present: HashSet<&str> = instances.iter().map(|i| i.id.as_str()).collect();
    let mut missing: Vec<&str> = tags.keys().copied().filter(|id| !present.contains(id)).collect();
    missing.sort();
    for id in missing {
        warnings.push(format!("index id {id} matches no instance"));
    }
    for inst in instances.iter_mut() {
        inst.subset = tags.get(inst.id.as_str()).copied().unwrap_or(Subset::None);
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    warnings
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Markers {
    pub e1_open: String,
    pub e1_close: String,
    pub e2_open: String,
    pub e2_close: String,
}

impl Default for Markers {
    fn default() -> Self {
        Self {
            e1_open: "<e1>".into(),
            e1_close: "</e1>".into(),
            e2_open: "<e2>".into(),
            e2_close: "</e2>".into(),
        }
    }
}

impl Markers {
    fn all(&self) -> [&str; 4] {
        [&self.e1_open, &self.e1_close, &self.e2_open, &self.e2_close]
    }
}

/// A sentence (or sentence pair) with two event spans. Spans are
/// `[start, end)` character offsets into `text`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationInstance {
    pub id: String,
    pub text: String,
    pub e1: [usize; 2],
    pub e2: [usize; 2],
    pub label: String,
    #[serde(default)]
    pub rendered: String,
}

impl RelationInstance {
    pub fn validate(&self, markers: &Markers) -> std::result::Result<(), String> {
        let len = self.text.chars().count();
        for (name, [s, e]) in [("e1", self.e1), ("e2", self.e2)] {
            if s >= e {
                return Err(format!("{name} span [{s}, {e}) is empty"));
            }
            if e > len {
                return Err(format!("{name} span [{s}, {e}) exceeds text length {len}"));
            }
        }
        if self.e1[0] < self.e2[1] && self.e2[0] < self.e1[1] {
            return Err("event spans overlap".into());
        }
        if let Some(m) = markers.all().iter().find(|m| self.text.contains(**m)) {
            return Err(format!("text already contains marker {m:?}"));
        }
        if self.label.trim().is_empty() {
            return Err("empty label".into());
        }
        Ok(())
    }
}

/// Wraps the two event spans in their boundary markers. Text outside the
/// markers is left byte-for-byte intact.
pub fn render_with_markers(inst: &RelationInstance, markers: &Markers) -> String {
    let mut inserts: Vec<(usize, u8, &str)> = vec![
        (inst.e1[0], 1, &markers.e1_open),
        (inst.e1[1], 0, &markers.e1_close),
        (inst.e2[0], 1, &markers.e2_open),
        (inst.e2[1], 0, &markers.e2_close),
    ];
    // at a shared boundary the closing marker goes first
    inserts.sort_by_key(|&(pos, order, _)| (pos, order));
    let mut out = String::with_capacity(inst.text.len() + 20);
    let mut next = inserts.iter().peekable();
    for (i, c) in inst.text.chars().enumerate() {
        while let Some(&&(_, _, m)) = next.peek().filter(|(p, _, _)| *p == i) {
            out.push_str(m);
            next.next();
        }
        out.push(c);
    }
    for &(_, _, m) in next {
        out.push_str(m);
    }
    out
}

pub fn strip_markers(rendered: &str, markers: &Markers) -> String {
    markers
        .all()
        .iter()
        .fold(rendered.to_string(), |acc, m| acc.replace(m, ""))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TcrLoad {
    pub instances: Vec<RelationInstance>,
    pub rejects: Vec<Reject>,
}

/// Reads TCR instances from the intermediate JSONL schema
/// `{"id","text","e1":[start,end],"e2":[start,end],"label"}` and renders
/// the marked text for each valid instance.
pub fn load_tcr(path: &Path, markers: &Markers) -> Result<TcrLoad> {
    let text = crate::io::read_to_string(path)?;
    let source = path.display().to_string();
    let mut out = TcrLoad::default();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<RelationInstance>(line)
            .map_err(|e| format!("invalid record: {e}"))
            .and_then(|inst| inst.validate(markers).map(|_| inst));
        match parsed {
            Ok(mut inst) => {
                inst.rendered = render_with_markers(&inst, markers);
                out.instances.push(inst);
            }
            Err(reason) => out.rejects.push(Reject {
                source_file: source.clone(),
                row: i + 1,
                reason,
            }),
        }
    }
    Ok(out)
}
