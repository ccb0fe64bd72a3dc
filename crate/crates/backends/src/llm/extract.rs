//! Pulling the completion text and the JSON object out of model responses.

use serde_json::Value;

/// Completion text from a response body. Accepts a top-level `text` field
/// and the common chat/completion shapes.
pub fn completion_text(body: &Value) -> Option<&str> {
    if let Some(t) = body.get("text").and_then(Value::as_str) {
        return Some(t);
    }
    let choice = body.get("choices").and_then(|c| c.get(0));
    if let Some(t) = choice.and_then(|c| c.pointer("/message/content")).and_then(Value::as_str) {
        return Some(t);
    }
    if let Some(t) = choice.and_then(|c| c.get("text")).and_then(Value::as_str) {
        return Some(t);
    }
    match body.get("content") {
        Some(Value::String(s)) => Some(s),
        Some(Value::Array(parts)) => parts.iter().find_map(|p| p.get("text").and_then(Value::as_str)),
        _ => None,
    }
}

/// End (exclusive, in bytes) of the balanced `{...}` starting at `start`.
fn balanced_end(text: &str, start: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, c) in text[start..].char_indices() {
        if in_string {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_string = true,
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(start + i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

/// The first balanced `{...}` in `text` that parses as a JSON object.
pub fn first_json_object(text: &str) -> Option<Value> {
    text.match_indices('{').find_map(|(start, _)| {
        let end = balanced_end(text, start)?;
        match serde_json::from_str::<Value>(&text[start..end]) {
            Ok(v @ Value::Object(_)) => Some(v),
            _ => None,
        }
    })
}

/// Strips code fences and quote fences a model may wrap rewritten text in.
pub fn strip_fences(text: &str) -> &str {
    let mut t = text.trim();
    for fence in ["\"\"\"\"", "\"\"\"", "```"] {
        if let Some(inner) = t.strip_prefix(fence).and_then(|r| r.strip_suffix(fence)) {
            t = inner.trim();
            if fence == "```" {
                if let Some((first, rest)) = t.split_once('\n') {
                    if !first.contains(' ') && first.len() < 16 {
                        t = rest.trim();
                    }
                }
            }
            break;
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn completion_shapes() {
        assert_eq!(completion_text(&json!({"text": "a"})), Some("a"));
        assert_eq!(completion_text(&json!({"choices": [{"message": {"content": "b"}}]})), Some("b"));
        assert_eq!(completion_text(&json!({"choices": [{"text": "c"}]})), Some("c"));
        assert_eq!(completion_text(&json!({"content": [{"type": "text", "text": "d"}]})), Some("d"));
        assert_eq!(completion_text(&json!({"other": 1})), None);
    }

    #[test]
    fn json_after_prose() {
        let text = "Here is the record:\n{\"Age\": 50, \"Sex\": \"Female\"} and more {\"x\": 1}";
        assert_eq!(first_json_object(text), Some(json!({"Age": 50, "Sex": "Female"})));
    }

    #[test]
    fn braces_inside_strings_are_ignored() {
        let text = r#"{"Diagnosis name": "cancer {left}", "Notes": []}"#;
        assert_eq!(first_json_object(text).unwrap()["Diagnosis name"], "cancer {left}");
    }

    #[test]
    fn non_json_braces_are_skipped() {
        let text = "template {subject} then {\"Age\": 3}";
        assert_eq!(first_json_object(text), Some(json!({"Age": 3})));
        assert_eq!(first_json_object("no object {here"), None);
    }

    #[test]
    fn fences_removed() {
        assert_eq!(strip_fences("```text\nabc\n```"), "abc");
        assert_eq!(strip_fences("\"\"\"\"\nabc\n\"\"\"\""), "abc");
        assert_eq!(strip_fences("  plain  "), "plain");
    }
}
