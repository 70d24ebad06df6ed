//! Deterministic machine-readable output.
//!
//! JSON objects keep their field order, floats print with 17 significant
//! digits so doubles round-trip, and lines end with LF. Identical inputs
//! therefore produce byte-identical output.

use num_complex::Complex64 as C64;

/// 17-significant-digit float formatting.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{:.16e}", x)
    } else if x.is_nan() {
        "\"nan\"".to_string()
    } else if x > 0.0 {
        "\"inf\"".to_string()
    } else {
        "\"-inf\"".to_string()
    }
}

/// Minimal ordered JSON document.
#[derive(Debug, Clone)]
pub enum Json {
    Num(f64),
    Int(i64),
    Str(String),
    Bool(bool),
    Arr(Vec<Json>),
    Obj(Vec<(String, Json)>),
}

impl Json {
    pub fn obj(fields: Vec<(&str, Json)>) -> Json {
        Json::Obj(fields.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }

    pub fn complex(z: C64) -> Json {
        Json::obj(vec![("re", Json::Num(z.re)), ("im", Json::Num(z.im))])
    }

    fn render_into(&self, out: &mut String) {
        match self {
            Json::Num(x) => out.push_str(&fmt_f64(*x)),
            Json::Int(i) => out.push_str(&i.to_string()),
            Json::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Json::Str(s) => {
                out.push('"');
                for c in s.chars() {
                    match c {
                        '"' => out.push_str("\\\""),
                        '\\' => out.push_str("\\\\"),
                        '\n' => out.push_str("\\n"),
                        c if (c as u32) < 0x20 => {
                            out.push_str(&format!("\\u{:04x}", c as u32))
                        }
                        c => out.push(c),
                    }
                }
                out.push('"');
            }
            Json::Arr(items) => {
                out.push('[');
                for (i, it) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    it.render_into(out);
                }
                out.push(']');
            }
            Json::Obj(fields) => {
                out.push('{');
                for (i, (k, v)) in fields.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push('"');
                    out.push_str(k);
                    out.push_str("\":");
                    v.render_into(out);
                }
                out.push('}');
            }
        }
    }

    /// Render with a trailing newline.
    pub fn render(&self) -> String {
        let mut s = String::new();
        self.render_into(&mut s);
        s.push('\n');
        s
    }
}

/// CSV with a header row, comma separator and LF line endings.
pub struct Csv {
    out: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self {
            out: format!("{}\n", header.join(",")),
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.out.push_str(&fields.join(","));
        self.out.push('\n');
    }

    pub fn finish(self) -> String {
        self.out
    }
}

/// CSV float cell (no quotes; '.' decimal point).
pub fn csv_f64(x: f64) -> String {
    format!("{:.16e}", x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_and_fields_stay_ordered() {
        let x = 0.1 + 0.2;
        let s = fmt_f64(x);
        assert_eq!(s.parse::<f64>().unwrap(), x);
        let doc = Json::obj(vec![
            ("b", Json::Num(1.0)),
            ("a", Json::Int(2)),
            ("z", Json::Str("q\"x".into())),
        ]);
        assert_eq!(
            doc.render(),
            "{\"b\":1.0000000000000000e0,\"a\":2,\"z\":\"q\\\"x\"}\n"
        );
    }

    #[test]
    fn csv_layout() {
        let mut c = Csv::new(&["j", "v"]);
        c.row(&["1".into(), csv_f64(0.5)]);
        assert_eq!(c.finish(), "j,v\n1,5.0000000000000000e-1\n");
    }
}
