//! Result records and their NDJSON / CSV renderings.
//!
//! Records carry numbers only. Timing, version and the configuration echo go
//! to a separate run header so that the record stream of a fixed
//! configuration is byte-identical from run to run.

use serde::{Serialize, Serializer};

use crate::estimators::mc::{MCEstimate, Summary};

use super::config::Format;

/// Column order of both renderings.
pub const COLUMNS: [&str; 8] = ["quantity", "n", "i", "param", "mean", "stderr", "count", "tag"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub quantity: String,
    pub n: Option<usize>,
    pub i: Option<usize>,
    /// `s`, `β`, `x` or a regime parameter; `∞` is written as `"inf"`.
    #[serde(serialize_with = "param_ser")]
    pub param: Option<f64>,
    pub mean: f64,
    pub stderr: f64,
    pub count: u64,
    pub tag: String,
}

fn param_ser<S: Serializer>(p: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match p {
        Some(v) if v.is_infinite() => s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" }),
        Some(v) => s.serialize_f64(*v),
        None => s.serialize_none(),
    }
}

impl Record {
    pub fn new(quantity: impl Into<String>, mean: f64, stderr: f64, count: u64, tag: impl Into<String>) -> Self {
        Record { quantity: quantity.into(), n: None, i: None, param: None, mean, stderr, count, tag: tag.into() }
    }

    pub fn from_summary(quantity: impl Into<String>, s: Summary, tag: impl Into<String>) -> Self {
        Self::new(quantity, s.mean, s.stderr, s.count, tag)
    }

    pub fn from_estimate(quantity: impl Into<String>, e: &MCEstimate, tag: impl Into<String>) -> Self {
        Self::from_summary(quantity, e.summary(), tag)
    }

    pub fn at(mut self, n: usize, i: usize) -> Self {
        self.n = Some(n);
        self.i = Some(i);
        self
    }

    pub fn at_n(mut self, n: usize) -> Self {
        self.n = Some(n);
        self
    }

    pub fn param(mut self, p: f64) -> Self {
        self.param = Some(p);
        self
    }

    fn csv_line(&self) -> String {
        let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        let param = match self.param {
            Some(v) if v.is_infinite() => if v > 0.0 { "inf" } else { "-inf" }.to_string(),
            Some(v) => float(v),
            None => String::new(),
        };
        [self.quantity.clone(), opt(self.n), opt(self.i), param, float(self.mean), float(self.stderr), self.count.to_string(), self.tag.clone()].join(",")
    }
}

/// Shortest round-trip decimal, switching to exponent notation far from 1.
fn float(v: f64) -> String {
    format!("{v:?}")
}

pub fn render(records: &[Record], format: Format) -> String {
    let mut out = String::new();
    match format {
        Format::Json => {
            for r in records {
                out.push_str(&serde_json::to_string(r).expect("records serialize"));
                out.push('\n');
            }
        }
        Format::Csv => {
            out.push_str(&COLUMNS.join(","));
            out.push('\n');
            for r in records {
                out.push_str(&r.csv_line());
                out.push('\n');
            }
        }
    }
    out
}

/// Everything about a run that is not a result.
#[derive(Debug, Clone, Serialize)]
pub struct RunHeader {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub config: String,
    pub conformity: String,
    pub diagnostics: Vec<String>,
    pub elapsed_seconds: f64,
    pub exit_code: i32,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_and_csv_columns() {
        let r = Record::new("lambda", 0.25, 0.01, 100, "ok").at(1024, 512).param(f64::INFINITY);
        let json = render(std::slice::from_ref(&r), Format::Json);
        assert_eq!(json, "{\"quantity\":\"lambda\",\"n\":1024,\"i\":512,\"param\":\"inf\",\"mean\":0.25,\"stderr\":0.01,\"count\":100,\"tag\":\"ok\"}\n");
        let csv = render(&[r, Record::new("slope", -0.5, 1e-7, 6, "ok")], Format::Csv);
        assert_eq!(csv, "quantity,n,i,param,mean,stderr,count,tag\nlambda,1024,512,inf,0.25,0.01,100,ok\nslope,,,,-0.5,1e-7,6,ok\n");
    }

    #[test]
    fn json_keeps_full_precision() {
        let x = 0.1 + 0.2;
        let r = Record::new("q", x, 0.0, 1, "ok");
        let v: serde_json::Value = serde_json::from_str(render(&[r], Format::Json).trim()).unwrap();
        assert_eq!(v["mean"].as_f64().unwrap(), x);
        assert!(v["n"].is_null());
    }
}
