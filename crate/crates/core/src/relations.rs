//! The ATOMIC-2020 relation table: relation names, their category and the
//! human-readable template used to verbalize a triple.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const RELATION_COUNT: usize = 23;
pub const SUBJECT_SLOT: &str = "{subject}";
pub const TARGET_SLOT: &str = "{target}";

const SHIPPED_TABLE: &str = include_str!("../data/atomic_templates.v1.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Event,
    Physical,
    Social,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Event, Category::Physical, Category::Social];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Event => "event",
            Category::Physical => "physical",
            Category::Social => "social",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationTemplate {
    pub name: String,
    pub category: Category,
    /// Sentence pattern with one `{subject}` and one `{target}` slot.
    pub pattern: String,
}

impl RelationTemplate {
    pub fn render(&self, subject: &str, target: &str) -> String {
        self.pattern
            .replacen(SUBJECT_SLOT, subject, 1)
            .replacen(TARGET_SLOT, target, 1)
    }
}

#[derive(Deserialize)]
struct TableFile {
    version: String,
    relations: Vec<RelationTemplate>,
    #[serde(default)]
    auxiliary: Vec<RelationTemplate>,
}

/// The 23 core relations plus auxiliary templates for relation names that
/// only appear in some mirrors of the graph. Auxiliary relations are
/// rejected by the loader unless explicitly enabled.
#[derive(Debug, Clone)]
pub struct RelationTable {
    version: String,
    entries: Vec<RelationTemplate>,
    auxiliary: Vec<RelationTemplate>,
    index: HashMap<String, (bool, usize)>,
}

impl RelationTable {
    pub fn shipped() -> Self {
        Self::from_json(SHIPPED_TABLE).expect("shipped relation table is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = crate::io::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Data(msg) => Error::format(path, 0, msg),
            other => other,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: TableFile = serde_json::from_str(text)
            .map_err(|e| Error::Data(format!("relation table: {e}")))?;
        if file.relations.len() != RELATION_COUNT {
            return Err(Error::Data(format!(
                "relation table must have {RELATION_COUNT} entries, found {}",
                file.relations.len()
            )));
        }
        for cat in Category::ALL {
            if !file.relations.iter().any(|r| r.category == cat) {
                return Err(Error::Data(format!("relation table has no {cat} relation")));
            }
        }
        let mut index = HashMap::new();
        for (aux, list) in [(false, &file.relations), (true, &file.auxiliary)] {
            for (i, r) in list.iter().enumerate() {
                if r.pattern.matches(SUBJECT_SLOT).count() != 1
                    || r.pattern.matches(TARGET_SLOT).count() != 1
                {
                    return Err(Error::Data(format!(
                        "template for {} must contain exactly one {SUBJECT_SLOT} and one {TARGET_SLOT}",
                        r.name
                    )));
                }
                if r.pattern.find(SUBJECT_SLOT) > r.pattern.find(TARGET_SLOT) {
                    return Err(Error::Data(format!(
                        "template for {} places the target before the subject",
                        r.name
                    )));
                }
                if index.insert(r.name.clone(), (aux, i)).is_some() {
                    return Err(Error::Data(format!("duplicate relation {}", r.name)));
                }
            }
        }
        Ok(Self {
            version: file.version,
            entries: file.relations,
            auxiliary: file.auxiliary,
            index,
        })
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn entries(&self) -> &[RelationTemplate] {
        &self.entries
    }

    /// Core relations only.
    pub fn get(&self, name: &str) -> Option<&RelationTemplate> {
        match self.index.get(name) {
            Some(&(false, i)) => Some(&self.entries[i]),
            _ => None,
        }
    }

    /// Core or auxiliary relation.
    pub fn get_any(&self, name: &str) -> Option<&RelationTemplate> {
        self.index.get(name).map(|&(aux, i)| {
            if aux {
                &self.auxiliary[i]
            } else {
                &self.entries[i]
            }
        })
    }

    pub fn category(&self, name: &str) -> Option<Category> {
        self.get_any(name).map(|r| r.category)
    }
}

impl Default for RelationTable {
    fn default() -> Self {
        Self::shipped()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_table_has_23_relations_across_three_categories() {
        let t = RelationTable::shipped();
        assert_eq!(t.entries().len(), 23);
        let count = |c| t.entries().iter().filter(|r| r.category == c).count();
        assert_eq!(count(Category::Social), 9);
        assert_eq!(count(Category::Physical), 7);
        assert_eq!(count(Category::Event), 7);
    }

    #[test]
    fn pinned_exemplar_templates() {
        let t = RelationTable::shipped();
        assert!(t.get("xEffect").unwrap().pattern.contains("as a result, PersonX will"));
        assert!(t
            .get_any("HasPrerequisite")
            .unwrap()
            .pattern
            .contains("to do this, one requires"));
        assert!(t.get("HasPrerequisite").is_none());
        assert_eq!(t.category("xAttr"), Some(Category::Social));
    }

    #[test]
    fn rejects_wrong_size_and_bad_slots() {
        let one = r#"{"version":"v","relations":[{"name":"a","category":"event","pattern":"{subject} x {target}"}]}"#;
        assert!(RelationTable::from_json(one).is_err());

        let mut v: serde_json::Value = serde_json::from_str(SHIPPED_TABLE).unwrap();
        v["relations"][0]["pattern"] = "{subject} needs".into();
        assert!(RelationTable::from_json(&v.to_string()).is_err());
    }
}
