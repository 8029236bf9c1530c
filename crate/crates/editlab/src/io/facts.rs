//! Fact files: one JSON object per line.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::EditFact;

const FACTS_HEADER: &str = "# editlab facts v1";

/// Load facts from a line-delimited JSON file, preserving order. Blank lines
/// and `#` comments are skipped; malformed lines and duplicate ids are
/// reported with their line numbers.
pub fn load_facts(path: &Path) -> Result<Vec<EditFact>> {
    let label = path.display().to_string();
    let text = super::read_to_string(path)?;
    let mut facts = Vec::new();
    let mut seen: BTreeMap<u64, usize> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fact: EditFact = serde_json::from_str(line)
            .map_err(|e| Error::file_format(&label, line_no, e.to_string()))?;
        fact.validate()
            .map_err(|e| Error::file_format(&label, line_no, e.to_string()))?;
        if let Some(&first_line) = seen.get(&fact.id) {
            return Err(Error::DuplicateIdInFile {
                path: label,
                id: fact.id,
                first_line,
                second_line: line_no,
            });
        }
        seen.insert(fact.id, line_no);
        facts.push(fact);
    }
    Ok(facts)
}

/// Write facts in the format [`load_facts`] reads; field values round-trip
/// exactly.
pub fn write_facts(facts: &[EditFact], path: &Path) -> Result<()> {
    let mut out = String::from(FACTS_HEADER);
    out.push('\n');
    for fact in facts {
        out.push_str(&serde_json::to_string(fact).expect("fact serialization cannot fail"));
        out.push('\n');
    }
    super::write_atomic(path, out.as_bytes())
}
