//! The native JSON instance format. `docs/instance.schema.json` describes it.

use std::path::Path;

use crate::error::Result;
use crate::model::ProblemInstance;

pub fn parse_instance(text: &str) -> Result<ProblemInstance> {
    Ok(serde_json::from_str(text)?)
}

pub fn serialize_instance(inst: &ProblemInstance) -> String {
    let mut s = serde_json::to_string_pretty(inst).expect("instances always serialize");
    s.push('\n');
    s
}

pub fn load_instance(path: &Path) -> Result<ProblemInstance> {
    parse_instance(&std::fs::read_to_string(path)?)
}

pub fn save_instance(inst: &ProblemInstance, path: &Path) -> Result<()> {
    Ok(std::fs::write(path, serialize_instance(inst))?)
}
