//! Prompt template assets and filling.
//!
//! Templates live as versioned text files under `prompts/` so that request
//! fingerprints stay stable across builds; editing a template is an explicit,
//! reviewable change that invalidates recorded cassettes on purpose.

pub const PLANNER_SYSTEM: &str = include_str!("../prompts/planner_system.txt");
pub const PLANNER_USER: &str = include_str!("../prompts/planner_user.txt");
pub const EDITOR_SYSTEM: &str = include_str!("../prompts/editor_system.txt");
pub const EDITOR_USER: &str = include_str!("../prompts/editor_user.txt");
pub const TAXONOMY_SYSTEM: &str = include_str!("../prompts/taxonomy_system.txt");
pub const TAXONOMY_USER: &str = include_str!("../prompts/taxonomy_user.txt");
pub const REASK_USER: &str = include_str!("../prompts/reask_user.txt");

/// Substitutes `{{NAME}}` placeholders in a single pass over the template.
/// Injected values are never rescanned, so content containing placeholder
/// syntax cannot corrupt the output.
pub fn fill_template(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find("{{") {
        out.push_str(&rest[..open]);
        let after = &rest[open + 2..];
        match after.find("}}") {
            Some(close) => {
                let name = &after[..close];
                match values.iter().find(|(k, _)| *k == name) {
                    Some((_, value)) => out.push_str(value),
                    None => {
                        // Unknown placeholder: keep it verbatim.
                        out.push_str("{{");
                        out.push_str(name);
                        out.push_str("}}");
                    }
                }
                rest = &after[close + 2..];
            }
            None => {
                out.push_str("{{");
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}
