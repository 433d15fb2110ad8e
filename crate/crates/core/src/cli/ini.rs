//! Minimal INI reader: `[section]` headers, `key = value` lines and `#`
//! comments. Keys are unique within a section; sections may not repeat.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IniDocument {
    pub path: PathBuf,
    pub sections: Vec<Section>,
}

impl IniDocument {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::parse(&text, path)
    }

    /// `path` is only used in error messages.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut sections: Vec<Section> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err(line, format!("unterminated section header `{content}`")))?
                    .trim();
                if name.is_empty() {
                    return Err(err(line, "empty section name".into()));
                }
                if sections.iter().any(|s| s.name == name) {
                    return Err(err(line, format!("section [{name}] appears twice")));
                }
                sections.push(Section {
                    name: name.to_string(),
                    line,
                    entries: Vec::new(),
                });
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(line, format!("expected `key = value`, got `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(err(line, "missing key before `=`".into()));
            }
            let section = sections
                .last_mut()
                .ok_or_else(|| err(line, format!("key `{key}` outside any section")))?;
            if section.entries.iter().any(|e| e.key == key) {
                return Err(err(line, format!("key `{key}` repeated in [{}]", section.name)));
            }
            section.entries.push(Entry {
                key: key.to_string(),
                value: value.to_string(),
                line,
            });
        }
        Ok(Self {
            path: path.to_path_buf(),
            sections,
        })
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    /// Fails on the first section not in `allowed`.
    pub fn check_sections(&self, allowed: &[&str]) -> Result<()> {
        match self.sections.iter().find(|s| !allowed.contains(&s.name.as_str())) {
            Some(s) => Err(self.error(s.line, format!("unknown section [{}]", s.name))),
            None => Ok(()),
        }
    }

    pub fn error(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            message: message.into(),
        }
    }

    /// Parses `entry.value` as `T`, reporting the key and line on failure.
    pub fn value<T: FromStr>(&self, entry: &Entry) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        entry.value.parse::<T>().map_err(|e| {
            self.error(
                entry.line,
                format!("invalid value `{}` for `{}`: {e}", entry.value, entry.key),
            )
        })
    }

    /// Comma-separated list of `T`.
    pub fn list<T: FromStr>(&self, entry: &Entry) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        entry
            .value
            .split(',')
            .map(|item| {
                item.trim().parse::<T>().map_err(|e| {
                    self.error(
                        entry.line,
                        format!("invalid item `{}` in `{}`: {e}", item.trim(), entry.key),
                    )
                })
            })
            .collect()
    }
}
