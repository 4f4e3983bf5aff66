//! Tabular traces with CSV and JSON encodings.

use std::fmt::Write as _;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
}

/// One run's output: a strictly increasing index column and any number of
/// named real columns of the same length.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub scenario: String,
    pub field: String,
    pub params: Map<String, Value>,
    pub index_name: String,
    pub times: Vec<f64>,
    pub columns: Vec<Column>,
    /// Base names of columns stored as `name_re`/`name_im` pairs.
    pub complex: Vec<String>,
    pub verdicts: Map<String, Value>,
    pub provenance: Map<String, Value>,
}

impl TraceRecord {
    pub fn new(scenario: impl Into<String>, field: impl Into<String>, times: Vec<f64>) -> Result<Self> {
        Self::with_index(scenario, field, "t", times)
    }

    pub fn with_index(scenario: impl Into<String>, field: impl Into<String>, index: &str, times: Vec<f64>) -> Result<Self> {
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Trace(format!("{index} values must be strictly increasing")));
        }
        Ok(Self {
            scenario: scenario.into(),
            field: field.into(),
            params: Map::new(),
            index_name: index.to_string(),
            times,
            columns: Vec::new(),
            complex: Vec::new(),
            verdicts: Map::new(),
            provenance: Map::new(),
        })
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if values.len() != self.times.len() {
            return Err(Error::Trace(format!(
                "column {name} has {} rows, expected {}",
                values.len(),
                self.times.len()
            )));
        }
        if name == self.index_name || self.columns.iter().any(|c| c.name == name) {
            return Err(Error::Trace(format!("duplicate column {name}")));
        }
        self.columns.push(Column { name, values });
        Ok(())
    }

    /// Adds `name_re` and `name_im`.
    pub fn push_complex(&mut self, name: &str, values: &[num_complex::Complex64]) -> Result<()> {
        self.push(format!("{name}_re"), values.iter().map(|z| z.re).collect())?;
        self.push(format!("{name}_im"), values.iter().map(|z| z.im).collect())?;
        self.complex.push(name.to_string());
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|c| c.name == name).map(|c| c.values.as_slice())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.index_name);
        for c in &self.columns {
            out.push(',');
            out.push_str(&c.name);
        }
        out.push('\n');
        for (i, t) in self.times.iter().enumerate() {
            out.push_str(&fmt_num(*t));
            for c in &self.columns {
                out.push(',');
                out.push_str(&fmt_num(c.values[i]));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let mut columns = Map::new();
        for c in &self.columns {
            let base = self.complex.iter().find(|b| c.name == format!("{b}_re") || c.name == format!("{b}_im"));
            match base {
                Some(b) if c.name.ends_with("_re") => {
                    let im = self.column(&format!("{b}_im")).expect("complex pair");
                    let vals = c.values.iter().zip(im).map(|(&re, &im)| json!({"re": num(re), "im": num(im)}));
                    columns.insert(b.clone(), Value::Array(vals.collect()));
                }
                Some(_) => {}
                None => {
                    columns.insert(c.name.clone(), Value::Array(c.values.iter().map(|&v| num(v)).collect()));
                }
            }
        }
        json!({
            "scenario": self.scenario,
            "field": self.field,
            "params": self.params,
            "index": self.index_name,
            "times": self.times.iter().map(|&v| num(v)).collect::<Vec<_>>(),
            "columns": columns,
            "verdicts": self.verdicts,
            "provenance": self.provenance,
        })
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("trace is valid JSON");
        s.push('\n');
        s
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let bad = |what: &str| Error::Trace(format!("malformed trace JSON: {what}"));
        let obj = v.as_object().ok_or_else(|| bad("not an object"))?;
        let text = |k: &str| obj.get(k).and_then(Value::as_str).map(str::to_string).ok_or_else(|| bad(k));
        let map = |k: &str| obj.get(k).and_then(Value::as_object).cloned().unwrap_or_default();
        let nums = |v: &Value| -> Result<Vec<f64>> {
            v.as_array()
                .ok_or_else(|| bad("expected an array"))?
                .iter()
                .map(|x| match x {
                    Value::Null => Ok(f64::NAN),
                    Value::String(s) => s.parse().map_err(|_| bad("number")),
                    other => other.as_f64().ok_or_else(|| bad("number")),
                })
                .collect()
        };
        let index = obj.get("index").and_then(Value::as_str).unwrap_or("t").to_string();
        let times = nums(obj.get("times").ok_or_else(|| bad("times"))?)?;
        let mut trace = Self::with_index(text("scenario")?, text("field")?, &index, times)?;
        trace.params = map("params");
        trace.verdicts = map("verdicts");
        trace.provenance = map("provenance");
        for (name, vals) in obj.get("columns").and_then(Value::as_object).ok_or_else(|| bad("columns"))? {
            let arr = vals.as_array().ok_or_else(|| bad("expected an array"))?;
            if arr.first().is_some_and(Value::is_object) {
                let part = |k: &str| -> Result<Vec<f64>> {
                    nums(&Value::Array(arr.iter().map(|e| e.get(k).cloned().unwrap_or(Value::Null)).collect()))
                };
                let (re, im) = (part("re")?, part("im")?);
                let zs: Vec<_> = re.into_iter().zip(im).map(|(a, b)| num_complex::Complex64::new(a, b)).collect();
                trace.push_complex(name, &zs)?;
            } else {
                trace.push(name.clone(), nums(vals)?)?;
            }
        }
        Ok(trace)
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&serde_json::from_str(&text)?)
    }
}

/// 17 significant digits, so values round-trip exactly.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        let mut s = String::new();
        write!(s, "{:.16e}", v + 0.0).unwrap();
        s
    }
}

fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v + 0.0)
    } else {
        Value::String(fmt_num(v))
    }
}
