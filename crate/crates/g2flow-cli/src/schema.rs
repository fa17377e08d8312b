//! Validation of emitted JSON documents against the schema files shipped in
//! the repository's `schemas/` directory.
//!
//! The validator covers the subset of JSON Schema those files use: `type`
//! (single name or list of alternatives), `properties`, `required`, `items`,
//! `enum`, and boolean `additionalProperties`. Anything else in a schema is
//! rejected loudly rather than silently ignored, so the schema files cannot
//! drift ahead of the checker.

use serde_json::Value;

const KNOWN_KEYWORDS: &[&str] = &[
    "$schema",
    "title",
    "description",
    "type",
    "properties",
    "required",
    "items",
    "enum",
    "additionalProperties",
];

/// Check `instance` against `schema`, returning one message per violation.
///
/// An empty vector means the instance validates. Messages carry the JSON
/// pointer of the offending location.
pub fn validate(schema: &Value, instance: &Value) -> Vec<String> {
    let mut errors = Vec::new();
    check(schema, instance, "", &mut errors);
    errors
}

fn check(schema: &Value, instance: &Value, path: &str, errors: &mut Vec<String>) {
    let Some(obj) = schema.as_object() else {
        errors.push(format!("{}: schema node is not an object", loc(path)));
        return;
    };
    for key in obj.keys() {
        if !KNOWN_KEYWORDS.contains(&key.as_str()) {
            errors.push(format!("{}: unsupported schema keyword `{key}`", loc(path)));
        }
    }
    if let Some(ty) = obj.get("type") {
        if !type_matches(ty, instance, path, errors) {
            errors.push(format!(
                "{}: expected type {}, got {}",
                loc(path),
                type_names(ty),
                value_type(instance)
            ));
            return;
        }
    }
    if let Some(allowed) = obj.get("enum") {
        let ok = allowed
            .as_array()
            .map(|list| list.iter().any(|v| v == instance))
            .unwrap_or(false);
        if !ok {
            errors.push(format!(
                "{}: value {instance} is not in the enum",
                loc(path)
            ));
        }
    }
    if let Some(req) = obj.get("required").and_then(Value::as_array) {
        if let Some(map) = instance.as_object() {
            for name in req.iter().filter_map(Value::as_str) {
                if !map.contains_key(name) {
                    errors.push(format!("{}: missing required field `{name}`", loc(path)));
                }
            }
        }
    }
    if let Some(props) = obj.get("properties").and_then(Value::as_object) {
        if let Some(map) = instance.as_object() {
            for (name, sub) in props {
                if let Some(v) = map.get(name) {
                    check(sub, v, &format!("{path}/{name}"), errors);
                }
            }
            if obj.get("additionalProperties") == Some(&Value::Bool(false)) {
                for name in map.keys() {
                    if !props.contains_key(name) {
                        errors.push(format!("{}: unexpected field `{name}`", loc(path)));
                    }
                }
            }
        }
    }
    if let Some(items) = obj.get("items") {
        if let Some(arr) = instance.as_array() {
            for (i, v) in arr.iter().enumerate() {
                check(items, v, &format!("{path}/{i}"), errors);
            }
        }
    }
}

fn type_matches(ty: &Value, instance: &Value, path: &str, errors: &mut Vec<String>) -> bool {
    match ty {
        Value::String(name) => single_type_matches(name, instance),
        Value::Array(names) => names.iter().any(|n| {
            n.as_str()
                .map(|name| single_type_matches(name, instance))
                .unwrap_or(false)
        }),
        _ => {
            errors.push(format!("{}: malformed `type` keyword", loc(path)));
            false
        }
    }
}

fn single_type_matches(name: &str, instance: &Value) -> bool {
    match name {
        "object" => instance.is_object(),
        "array" => instance.is_array(),
        "string" => instance.is_string(),
        "number" => instance.is_number(),
        "integer" => instance.as_i64().is_some() || instance.as_u64().is_some(),
        "boolean" => instance.is_boolean(),
        "null" => instance.is_null(),
        _ => false,
    }
}

fn type_names(ty: &Value) -> String {
    match ty {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn value_type(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

fn loc(path: &str) -> &str {
    if path.is_empty() {
        "(root)"
    } else {
        path
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn accepts_matching_object() {
        let schema = json!({
            "type": "object",
            "required": ["a"],
            "properties": {
                "a": {"type": "number"},
                "b": {"type": ["string", "null"]}
            },
            "additionalProperties": false
        });
        assert!(validate(&schema, &json!({"a": 1.5, "b": null})).is_empty());
        assert!(validate(&schema, &json!({"a": 2, "b": "hi"})).is_empty());
    }

    #[test]
    fn reports_missing_required_and_wrong_types() {
        let schema = json!({
            "type": "object",
            "required": ["a"],
            "properties": {"a": {"type": "number"}}
        });
        let errs = validate(&schema, &json!({"a": "not a number"}));
        assert_eq!(errs.len(), 1, "{errs:?}");
        assert!(errs[0].contains("/a"));
        let errs = validate(&schema, &json!({}));
        assert!(errs[0].contains("missing required field `a`"));
    }

    #[test]
    fn rejects_extra_fields_when_closed() {
        let schema = json!({
            "type": "object",
            "properties": {"a": {"type": "number"}},
            "additionalProperties": false
        });
        let errs = validate(&schema, &json!({"a": 1, "z": 2}));
        assert!(errs.iter().any(|e| e.contains("unexpected field `z`")));
    }

    #[test]
    fn checks_array_items_and_enums() {
        let schema = json!({
            "type": "array",
            "items": {"type": "string", "enum": ["x", "y"]}
        });
        assert!(validate(&schema, &json!(["x", "y", "x"])).is_empty());
        let errs = validate(&schema, &json!(["x", "q"]));
        assert!(errs.iter().any(|e| e.contains("/1")));
    }

    #[test]
    fn flags_unknown_schema_keywords() {
        let schema = json!({"type": "number", "minimum": 0});
        let errs = validate(&schema, &json!(3));
        assert!(errs
            .iter()
            .any(|e| e.contains("unsupported schema keyword")));
    }
}
