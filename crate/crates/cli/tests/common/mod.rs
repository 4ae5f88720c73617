#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use regex::Regex;
use serde_json::Value;

pub fn ugrm<S: AsRef<std::ffi::OsStr>>(args: &[S]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ugrm"))
        .args(args)
        .output()
        .expect("failed to spawn ugrm")
}

pub fn ugrm_ok<S: AsRef<std::ffi::OsStr>>(args: &[S]) -> Output {
    let out = ugrm(args);
    assert!(
        out.status.success(),
        "ugrm exited with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn read_json(path: &Path) -> Value {
    let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    serde_json::from_str(&text).unwrap()
}

pub fn schema() -> Value {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("schema/output.schema.json");
    read_json(&path)
}

/// Validates against the subset of JSON Schema 2020-12 used by the output
/// schema. Unknown keywords are an error rather than silently ignored.
pub fn validate(schema: &Value, doc: &Value) -> Result<(), String> {
    Validator { root: schema }.check(schema, doc, "$")
}

struct Validator<'a> {
    root: &'a Value,
}

const ANNOTATIONS: &[&str] = &["$schema", "$id", "$defs", "title", "description"];

fn type_matches(name: &str, v: &Value) -> bool {
    match name {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        "number" => v.is_number(),
        "integer" => v.is_i64() || v.is_u64() || v.as_f64().is_some_and(|x| x.fract() == 0.0),
        other => panic!("unknown type {other:?} in schema"),
    }
}

impl Validator<'_> {
    fn resolve(&self, reference: &str) -> &Value {
        let pointer = reference
            .strip_prefix('#')
            .unwrap_or_else(|| panic!("only local references are supported: {reference}"));
        self.root
            .pointer(pointer)
            .unwrap_or_else(|| panic!("dangling reference {reference}"))
    }

    fn check(&self, schema: &Value, doc: &Value, at: &str) -> Result<(), String> {
        let rules = schema.as_object().expect("schema nodes are objects");
        for (key, rule) in rules {
            match key.as_str() {
                k if ANNOTATIONS.contains(&k) => {}
                "$ref" => self.check(self.resolve(rule.as_str().unwrap()), doc, at)?,
                "type" => {
                    let ok = match rule {
                        Value::String(t) => type_matches(t, doc),
                        Value::Array(ts) => {
                            ts.iter().any(|t| type_matches(t.as_str().unwrap(), doc))
                        }
                        _ => panic!("bad type rule"),
                    };
                    if !ok {
                        return Err(format!("{at}: expected type {rule}, got {doc}"));
                    }
                }
                "const" => {
                    if doc != rule {
                        return Err(format!("{at}: expected {rule}, got {doc}"));
                    }
                }
                "enum" => {
                    if !rule.as_array().unwrap().contains(doc) {
                        return Err(format!("{at}: {doc} not in {rule}"));
                    }
                }
                "minimum" | "maximum" | "exclusiveMinimum" => {
                    if let Some(x) = doc.as_f64() {
                        let bound = rule.as_f64().unwrap();
                        let ok = match key.as_str() {
                            "minimum" => x >= bound,
                            "maximum" => x <= bound,
                            _ => x > bound,
                        };
                        if !ok {
                            return Err(format!("{at}: {x} violates {key} {bound}"));
                        }
                    }
                }
                "pattern" => {
                    if let Some(s) = doc.as_str() {
                        let re = Regex::new(rule.as_str().unwrap()).unwrap();
                        if !re.is_match(s) {
                            return Err(format!("{at}: {s:?} does not match {rule}"));
                        }
                    }
                }
                "minItems" => {
                    if let Some(items) = doc.as_array() {
                        if (items.len() as u64) < rule.as_u64().unwrap() {
                            return Err(format!("{at}: fewer than {rule} items"));
                        }
                    }
                }
                "items" => {
                    if let Some(items) = doc.as_array() {
                        for (i, item) in items.iter().enumerate() {
                            self.check(rule, item, &format!("{at}[{i}]"))?;
                        }
                    }
                }
                "properties" => {
                    if let Some(obj) = doc.as_object() {
                        for (name, sub) in rule.as_object().unwrap() {
                            if let Some(v) = obj.get(name) {
                                self.check(sub, v, &format!("{at}.{name}"))?;
                            }
                        }
                    }
                }
                "required" => {
                    if let Some(obj) = doc.as_object() {
                        for name in rule.as_array().unwrap() {
                            let name = name.as_str().unwrap();
                            if !obj.contains_key(name) {
                                return Err(format!("{at}: missing required {name:?}"));
                            }
                        }
                    }
                }
                "additionalProperties" => {
                    assert_eq!(
                        rule,
                        &Value::Bool(false),
                        "only additionalProperties: false is supported"
                    );
                    if let Some(obj) = doc.as_object() {
                        let known = rules.get("properties").and_then(Value::as_object);
                        for name in obj.keys() {
                            if !known.is_some_and(|k| k.contains_key(name)) {
                                return Err(format!("{at}: unexpected property {name:?}"));
                            }
                        }
                    }
                }
                "oneOf" => {
                    let branches = rule.as_array().unwrap();
                    let passing = branches
                        .iter()
                        .filter(|b| self.check(b, doc, at).is_ok())
                        .count();
                    if passing != 1 {
                        return Err(format!(
                            "{at}: {passing} of {} oneOf branches match",
                            branches.len()
                        ));
                    }
                }
                "anyOf" => {
                    let branches = rule.as_array().unwrap();
                    let errors: Vec<String> = branches
                        .iter()
                        .filter_map(|b| self.check(b, doc, at).err())
                        .collect();
                    if errors.len() == branches.len() {
                        return Err(format!(
                            "{at}: no anyOf branch matches: {}",
                            errors.join("; ")
                        ));
                    }
                }
                other => panic!("schema keyword {other:?} is not supported by the test validator"),
            }
        }
        Ok(())
    }
}
