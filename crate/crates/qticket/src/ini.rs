//! Flat `key = value` config files with `[section]` headers.
//!
//! Keys before the first header are shared by every section. Blank lines and
//! lines starting with `#` or `;` are ignored.

use std::collections::BTreeMap;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Ini {
    pub sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl Ini {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut ini = Ini::default();
        let mut current = String::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| format!("line {}: unterminated section header", no + 1))?;
                current = name.trim().to_string();
                ini.sections.entry(current.clone()).or_default();
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| format!("line {}: expected key = value", no + 1))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(format!("line {}: empty key", no + 1));
            }
            ini.sections.entry(current.clone()).or_default().insert(k.to_string(), v.trim().to_string());
        }
        Ok(ini)
    }

    /// Shared keys overlaid with those of `section`.
    pub fn resolved(&self, section: &str) -> BTreeMap<String, String> {
        let mut out = self.sections.get("").cloned().unwrap_or_default();
        if let Some(s) = self.sections.get(section) {
            out.extend(s.iter().map(|(k, v)| (k.clone(), v.clone())));
        }
        out
    }

    pub fn render(section: &str, entries: &[(String, String)]) -> String {
        let mut s = format!("[{section}]\n");
        for (k, v) in entries {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }
}
