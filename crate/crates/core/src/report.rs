//! Deterministic report serialization.
//!
//! Reports must be byte-identical across repeated runs, so floats are
//! rendered with a fixed 17-significant-digit scientific format and all
//! collections keep insertion order.

use std::fmt::Write as _;

/// Fixed float rendering: 17 significant digits, scientific notation.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        return "\"nan\"".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "\"inf\"".into() } else { "\"-inf\"".into() };
    }
    format!("{x:.16e}")
}

/// Minimal JSON value with deterministic rendering.
#[derive(Debug, Clone)]
pub enum Json {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    Array(Vec<Json>),
    /// Object entries keep their insertion order.
    Object(Vec<(String, Json)>),
}

impl Json {
    pub fn object() -> Json {
        Json::Object(Vec::new())
    }

    pub fn push(&mut self, key: &str, value: Json) -> &mut Self {
        if let Json::Object(entries) = self {
            entries.push((key.to_string(), value));
        } else {
            panic!("push on non-object Json");
        }
        self
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        self.write(&mut out, 0);
        out.push('\n');
        out
    }

    fn write(&self, out: &mut String, indent: usize) {
        match self {
            Json::Null => out.push_str("null"),
            Json::Bool(b) => {
                let _ = write!(out, "{b}");
            }
            Json::Int(i) => {
                let _ = write!(out, "{i}");
            }
            Json::Float(x) => out.push_str(&fmt_f64(*x)),
            Json::Str(s) => {
                out.push('"');
                for c in s.chars() {
                    match c {
                        '"' => out.push_str("\\\""),
                        '\\' => out.push_str("\\\\"),
                        '\n' => out.push_str("\\n"),
                        c if (c as u32) < 0x20 => {
                            let _ = write!(out, "\\u{:04x}", c as u32);
                        }
                        c => out.push(c),
                    }
                }
                out.push('"');
            }
            Json::Array(items) => {
                if items.is_empty() {
                    out.push_str("[]");
                    return;
                }
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push('\n');
                    out.push_str(&"  ".repeat(indent + 1));
                    item.write(out, indent + 1);
                }
                out.push('\n');
                out.push_str(&"  ".repeat(indent));
                out.push(']');
            }
            Json::Object(entries) => {
                if entries.is_empty() {
                    out.push_str("{}");
                    return;
                }
                out.push('{');
                for (i, (k, v)) in entries.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push('\n');
                    out.push_str(&"  ".repeat(indent + 1));
                    let _ = write!(out, "\"{k}\": ");
                    v.write(out, indent + 1);
                }
                out.push('\n');
                out.push_str(&"  ".repeat(indent));
                out.push('}');
            }
        }
    }
}

/// Render one CSV row; floats use the fixed format, strings are raw (no
/// quoting is needed for the identifiers this crate emits).
pub fn csv_row(fields: &[CsvField<'_>]) -> String {
    let mut out = String::new();
    for (i, f) in fields.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        match f {
            CsvField::Str(s) => out.push_str(s),
            CsvField::Float(x) => {
                if x.is_finite() {
                    let _ = write!(out, "{x:.16e}");
                } else {
                    let _ = write!(out, "{x}");
                }
            }
            CsvField::Int(v) => {
                let _ = write!(out, "{v}");
            }
        }
    }
    out.push('\n');
    out
}

pub enum CsvField<'a> {
    Str(&'a str),
    Float(f64),
    Int(i64),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_has_17_digits() {
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_f64(-0.5), "-5.0000000000000000e-1");
    }

    #[test]
    fn object_renders_in_insertion_order() {
        let mut obj = Json::object();
        obj.push("zeta", Json::Int(1));
        obj.push("alpha", Json::Int(2));
        let s = obj.render();
        assert!(s.find("zeta").unwrap() < s.find("alpha").unwrap());
    }

    #[test]
    fn rendering_is_reproducible() {
        let mut obj = Json::object();
        obj.push("x", Json::Float(std::f64::consts::PI));
        obj.push("list", Json::Array(vec![Json::Float(1.5e-300), Json::Bool(true)]));
        assert_eq!(obj.render(), obj.render());
    }
}
