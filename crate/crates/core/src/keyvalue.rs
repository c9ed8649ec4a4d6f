//! Line-oriented `key = value` text format shared by the device preset file,
//! CLI config files and model header files.
//!
//! ```text
//! # comment
//! top_level = 1
//!
//! [W]
//! v_on = 0.5
//! ```
//!
//! Keys before the first `[section]` header land in the unnamed section `""`.

use std::fmt;
use std::str::FromStr;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum KvError {
    #[error("line {line}: expected `key = value`, found {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: duplicate key `{key}` in section [{section}]")]
    Duplicate {
        line: usize,
        section: String,
        key: String,
    },
    #[error("missing section [{0}]")]
    MissingSection(String),
    #[error("section [{section}]: missing key `{key}`")]
    MissingKey { section: String, key: String },
    #[error("section [{section}]: key `{key}` has invalid value {value:?}")]
    BadValue {
        section: String,
        key: String,
        value: String,
    },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Section {
    pub name: String,
    entries: Vec<(String, String)>,
}

impl Section {
    pub fn new(name: impl Into<String>) -> Self {
        Section {
            name: name.into(),
            entries: Vec::new(),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Inserts or replaces a key, keeping first-insertion order.
    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        let key = key.into();
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(entry) => entry.1 = value,
            None => self.entries.push((key, value)),
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn require(&self, key: &str) -> Result<&str, KvError> {
        self.get(key).ok_or_else(|| KvError::MissingKey {
            section: self.name.clone(),
            key: key.to_string(),
        })
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<T, KvError> {
        let raw = self.require(key)?;
        raw.parse().map_err(|_| KvError::BadValue {
            section: self.name.clone(),
            key: key.to_string(),
            value: raw.to_string(),
        })
    }

    pub fn parse_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, KvError> {
        match self.get(key) {
            None => Ok(None),
            Some(_) => self.parse(key).map(Some),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Document {
    sections: Vec<Section>,
}

impl Document {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn require_section(&self, name: &str) -> Result<&Section, KvError> {
        self.section(name)
            .ok_or_else(|| KvError::MissingSection(name.to_string()))
    }

    pub fn section_mut(&mut self, name: &str) -> &mut Section {
        match self.sections.iter().position(|s| s.name == name) {
            Some(i) => &mut self.sections[i],
            None => {
                self.sections.push(Section::new(name));
                self.sections.last_mut().unwrap()
            }
        }
    }

    pub fn sections(&self) -> impl Iterator<Item = &Section> {
        self.sections.iter()
    }

    /// The unnamed section holding keys that precede any header.
    pub fn root(&self) -> Option<&Section> {
        self.section("")
    }
}

impl FromStr for Document {
    type Err = KvError;

    fn from_str(text: &str) -> Result<Self, KvError> {
        let mut doc = Document::new();
        let mut current = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                current = name.trim().to_string();
                doc.section_mut(&current);
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(KvError::Syntax {
                    line: line_no,
                    text: raw.to_string(),
                });
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(KvError::Syntax {
                    line: line_no,
                    text: raw.to_string(),
                });
            }
            let section = doc.section_mut(&current);
            if section.get(key).is_some() {
                return Err(KvError::Duplicate {
                    line: line_no,
                    section: current.clone(),
                    key: key.to_string(),
                });
            }
            section.set(key, value.trim());
        }
        Ok(doc)
    }
}

impl fmt::Display for Document {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for section in &self.sections {
            if !first {
                writeln!(f)?;
            }
            first = false;
            if !section.name.is_empty() {
                writeln!(f, "[{}]", section.name)?;
            }
            for (k, v) in section.entries() {
                writeln!(f, "{k} = {v}")?;
            }
        }
        Ok(())
    }
}
