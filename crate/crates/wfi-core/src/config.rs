//! Run-configuration files: a flat `key = value` grammar with optional
//! `[section]` headers, full-line `#` comments, and nothing else. Values
//! stay raw strings until a typed accessor asks for them, so a config is
//! also its own diffable manifest.
//!
//! ```text
//! # global keys first
//! seed = 42
//!
//! [grid]
//! nx = 50
//! widths = 20 20 20
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

/// Keys of one section, each with the line it was defined on.
type Section = BTreeMap<String, (usize, String)>;

/// A parsed configuration. The global (pre-section) scope is the section
/// named `""`.
#[derive(Debug, Clone, Default)]
pub struct Config {
    sections: BTreeMap<String, Section>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let mut sections: BTreeMap<String, Section> = BTreeMap::new();
        let mut current = String::new();
        sections.insert(current.clone(), Section::new());
        for (ln, raw) in text.lines().enumerate() {
            let ln = ln + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| {
                    Error::parse(ln, format!("unterminated section header {line:?}"))
                })?;
                if name.is_empty()
                    || !name
                        .chars()
                        .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '-')
                {
                    return Err(Error::parse(
                        ln,
                        format!("section name {name:?} must be nonempty [a-z0-9_-]"),
                    ));
                }
                if sections.contains_key(name) && !name.is_empty() {
                    return Err(Error::parse(ln, format!("duplicate section [{name}]")));
                }
                current = name.to_string();
                sections.insert(current.clone(), Section::new());
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::parse(ln, format!("expected `key = value` or `[section]`, got {line:?}"))
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::parse(ln, "empty key"));
            }
            let section = sections.get_mut(&current).expect("current section exists");
            if section
                .insert(key.to_string(), (ln, value.trim().to_string()))
                .is_some()
            {
                let scope = if current.is_empty() {
                    "global scope".to_string()
                } else {
                    format!("[{current}]")
                };
                return Err(Error::parse(ln, format!("duplicate key {key} in {scope}")));
            }
        }
        Ok(Config { sections })
    }

    pub fn from_file(path: &Path) -> Result<Config> {
        Config::parse(&std::fs::read_to_string(path)?)
    }

    fn describe(section: &str, key: &str) -> String {
        if section.is_empty() {
            key.to_string()
        } else {
            format!("[{section}] {key}")
        }
    }

    /// True if the section appeared in the file (even empty).
    pub fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    pub fn has(&self, section: &str, key: &str) -> bool {
        self.sections
            .get(section)
            .is_some_and(|s| s.contains_key(key))
    }

    /// The raw string value, or a config error naming the key.
    pub fn get_str(&self, section: &str, key: &str) -> Result<&str> {
        self.opt_str(section, key)?
            .ok_or_else(|| Error::Config(format!("missing key {}", Self::describe(section, key))))
    }

    pub fn opt_str(&self, section: &str, key: &str) -> Result<Option<&str>> {
        Ok(self
            .sections
            .get(section)
            .and_then(|s| s.get(key))
            .map(|(_, v)| v.as_str()))
    }

    fn typed<T>(&self, section: &str, key: &str, what: &str) -> Result<Option<T>>
    where
        T: std::str::FromStr,
    {
        match self.sections.get(section).and_then(|s| s.get(key)) {
            None => Ok(None),
            Some((ln, v)) => v.parse().map(Some).map_err(|_| {
                Error::Config(format!(
                    "{} = {v:?} (line {ln}) is not {what}",
                    Self::describe(section, key)
                ))
            }),
        }
    }

    pub fn get_f64(&self, section: &str, key: &str) -> Result<f64> {
        self.opt_f64(section, key)?
            .ok_or_else(|| Error::Config(format!("missing key {}", Self::describe(section, key))))
    }

    pub fn opt_f64(&self, section: &str, key: &str) -> Result<Option<f64>> {
        self.typed(section, key, "a number")
    }

    pub fn get_usize(&self, section: &str, key: &str) -> Result<usize> {
        self.opt_usize(section, key)?
            .ok_or_else(|| Error::Config(format!("missing key {}", Self::describe(section, key))))
    }

    pub fn opt_usize(&self, section: &str, key: &str) -> Result<Option<usize>> {
        self.typed(section, key, "a non-negative integer")
    }

    pub fn get_u64(&self, section: &str, key: &str) -> Result<u64> {
        self.opt_u64(section, key)?
            .ok_or_else(|| Error::Config(format!("missing key {}", Self::describe(section, key))))
    }

    pub fn opt_u64(&self, section: &str, key: &str) -> Result<Option<u64>> {
        self.typed(section, key, "a u64")
    }

    pub fn get_bool(&self, section: &str, key: &str) -> Result<bool> {
        self.opt_bool(section, key)?
            .ok_or_else(|| Error::Config(format!("missing key {}", Self::describe(section, key))))
    }

    pub fn opt_bool(&self, section: &str, key: &str) -> Result<Option<bool>> {
        match self.opt_str(section, key)? {
            None => Ok(None),
            Some("true") => Ok(Some(true)),
            Some("false") => Ok(Some(false)),
            Some(v) => Err(Error::Config(format!(
                "{} = {v:?} is not true/false",
                Self::describe(section, key)
            ))),
        }
    }

    /// Space-separated number list; an absent key yields None, an empty
    /// value an empty list.
    pub fn opt_f64_list(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>> {
        match self.opt_str(section, key)? {
            None => Ok(None),
            Some(v) => v
                .split_whitespace()
                .map(|w| {
                    w.parse().map_err(|_| {
                        Error::Config(format!(
                            "{} contains {w:?}, not a number",
                            Self::describe(section, key)
                        ))
                    })
                })
                .collect::<Result<Vec<f64>>>()
                .map(Some),
        }
    }

    pub fn opt_usize_list(&self, section: &str, key: &str) -> Result<Option<Vec<usize>>> {
        match self.opt_str(section, key)? {
            None => Ok(None),
            Some(v) => v
                .split_whitespace()
                .map(|w| {
                    w.parse().map_err(|_| {
                        Error::Config(format!(
                            "{} contains {w:?}, not a non-negative integer",
                            Self::describe(section, key)
                        ))
                    })
                })
                .collect::<Result<Vec<usize>>>()
                .map(Some),
        }
    }

    /// Reject typos early: every key present in `section` must be in
    /// `allowed`.
    pub fn assert_only(&self, section: &str, allowed: &[&str]) -> Result<()> {
        if let Some(keys) = self.sections.get(section) {
            for (key, (ln, _)) in keys {
                if !allowed.contains(&key.as_str()) {
                    return Err(Error::Config(format!(
                        "unknown key {} (line {ln}); expected one of: {}",
                        Self::describe(section, key),
                        allowed.join(", ")
                    )));
                }
            }
        }
        Ok(())
    }

    /// Section names in file-independent (sorted) order, global scope
    /// excluded.
    pub fn section_names(&self) -> Vec<&str> {
        self.sections
            .keys()
            .filter(|k| !k.is_empty())
            .map(String::as_str)
            .collect()
    }
}
