use std::collections::BTreeMap;

use labloop_core::Role;
use serde::{Deserialize, Serialize};

use super::schema::Schema;

pub const KEYWORDS: &str = "keywords";
pub const RELEVANCE: &str = "relevance";
pub const PASSAGES: &str = "passages";
pub const RECORDS: &str = "records";

/// Prompt text with `{{slot}}` placeholders and the schema its answer must
/// satisfy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub template_id: String,
    pub body: String,
    pub schema_id: String,
}

impl PromptTemplate {
    /// Slot names in order of first appearance.
    pub fn slots(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        let mut rest = self.body.as_str();
        while let Some(open) = rest.find("{{") {
            let after = &rest[open + 2..];
            let Some(close) = after.find("}}") else { break };
            let name = after[..close].trim();
            if !out.contains(&name) {
                out.push(name);
            }
            rest = &after[close + 2..];
        }
        out
    }

    /// Fills every slot. Returns the first slot with no binding as the error.
    pub fn render(&self, bindings: &BTreeMap<String, String>) -> Result<String, String> {
        let mut out = String::with_capacity(self.body.len());
        let mut rest = self.body.as_str();
        while let Some(open) = rest.find("{{") {
            let after = &rest[open + 2..];
            let Some(close) = after.find("}}") else { break };
            let name = after[..close].trim();
            let value = bindings.get(name).ok_or_else(|| name.to_string())?;
            out.push_str(&rest[..open]);
            out.push_str(value);
            rest = &after[close + 2..];
        }
        out.push_str(rest);
        Ok(out)
    }
}

/// Templates and schemas known to a gateway.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    pub templates: BTreeMap<String, PromptTemplate>,
    pub schemas: BTreeMap<String, Schema>,
}

impl Registry {
    /// The four prompts used by the mining pipeline.
    pub fn builtin() -> Registry {
        let mut r = Registry::default();
        r.add_schema(
            "keyword_list",
            Schema::Array {
                items: Box::new(Schema::String { min_len: 1 }),
                min_items: Some(5),
                max_items: Some(5),
                unique: true,
            },
        );
        r.add_schema("percentage", Schema::Number { min: Some(0.0), max: Some(100.0) });
        r.add_schema(
            "passage_set",
            Schema::Object {
                fields: vec![(
                    "passages".into(),
                    Schema::Array {
                        items: Box::new(Schema::String { min_len: 1 }),
                        min_items: None,
                        max_items: None,
                        unique: false,
                    },
                )],
            },
        );
        let roles = Role::ALL.iter().map(|r| r.as_str().to_string()).collect();
        r.add_schema(
            "substance_records",
            Schema::Object {
                fields: vec![(
                    "records".into(),
                    Schema::Array {
                        items: Box::new(Schema::Object {
                            fields: vec![
                                ("name".into(), Schema::String { min_len: 1 }),
                                ("cas".into(), Schema::String { min_len: 1 }),
                                ("role".into(), Schema::Enum { values: roles }),
                                ("purpose".into(), Schema::String { min_len: 1 }),
                                ("relevance".into(), Schema::Number { min: Some(0.0), max: Some(100.0) }),
                            ],
                        }),
                        min_items: None,
                        max_items: None,
                        unique: false,
                    },
                )],
            },
        );

        r.add_template(
            KEYWORDS,
            "You are planning a literature search for a materials research project.\n\
             Requirement: {{requirement}}\n\
             Propose exactly five distinct search keywords. Answer with a JSON array of five strings.",
            "keyword_list",
        );
        r.add_template(
            RELEVANCE,
            "Rate how relevant the article below is to the research requirement, from 0 (unrelated) to 100 (directly on topic).\n\
             Requirement: {{requirement}}\n\
             Title: {{title}}\n\
             Abstract: {{abstract}}\n\
             Answer with a single JSON number.",
            "percentage",
        );
        r.add_template(
            PASSAGES,
            "Read the article text below and copy out every passage that names a chemical substance together with what it is used for. \
             Each passage must be self-contained.\n\
             Article {{article_id}}:\n{{fulltext}}\n\
             Answer with a JSON object {\"passages\": [string, ...]}; use an empty list if no substances are described.",
            "passage_set",
        );
        r.add_template(
            RECORDS,
            "Turn the passages below into substance records. For each substance give its name, CAS registry number, \
             role (colorant, additive, solvent, reactor or adjuster), purpose, and relevance to the requirement from 0 to 100.\n\
             Requirement: {{requirement}}\n\
             Passages:\n{{passages}}\n\
             Answer with a JSON object {\"records\": [{\"name\", \"cas\", \"role\", \"purpose\", \"relevance\"}, ...]}.",
            "substance_records",
        );
        r
    }

    pub fn add_schema(&mut self, id: &str, schema: Schema) {
        self.schemas.insert(id.to_string(), schema);
    }

    pub fn add_template(&mut self, id: &str, body: &str, schema_id: &str) {
        self.templates.insert(
            id.to_string(),
            PromptTemplate { template_id: id.to_string(), body: body.to_string(), schema_id: schema_id.to_string() },
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bind(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn slots_are_listed_once_in_order() {
        let t = PromptTemplate {
            template_id: "t".into(),
            body: "{{a}} and {{ b }} then {{a}}".into(),
            schema_id: "s".into(),
        };
        assert_eq!(t.slots(), ["a", "b"]);
        assert_eq!(t.render(&bind(&[("a", "x"), ("b", "y")])).unwrap(), "x and y then x");
        assert_eq!(t.render(&bind(&[("a", "x")])), Err("b".to_string()));
    }

    #[test]
    fn builtin_templates_resolve_their_schemas() {
        let r = Registry::builtin();
        assert_eq!(r.templates.len(), 4);
        for t in r.templates.values() {
            assert!(r.schemas.contains_key(&t.schema_id), "{}", t.template_id);
            assert!(!t.slots().is_empty());
        }
    }
}
