//! Run manifests and byte-stable CSV/JSON rendering.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub params: Value,
    pub seed: Option<u64>,
    pub version: &'static str,
    /// SHA-256 of the output body (CSV rows or the `data` JSON value).
    pub digest: String,
}

impl RunManifest {
    pub fn new(command: &'static str, params: &impl Serialize, seed: Option<u64>) -> Self {
        Self {
            command,
            params: serde_json::to_value(params).expect("parameters serialize"),
            seed,
            version: env!("CARGO_PKG_VERSION"),
            digest: String::new(),
        }
    }

    fn sealed(mut self, body: &str) -> Self {
        self.digest = hex::encode(Sha256::digest(body.as_bytes()));
        self
    }
}

/// `%.12g`-style rendering: 12 significant digits, trailing zeros trimmed.
pub fn g12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn opt_g12(x: Option<f64>) -> String {
    x.map(g12).unwrap_or_default()
}

/// CSV with the manifest as a leading `#` comment.
pub struct Csv {
    body: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self {
            body: header.join(",") + "\n",
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        let _ = writeln!(self.body, "{}", fields.join(","));
    }

    pub fn render(self, manifest: RunManifest) -> String {
        let manifest = manifest.sealed(&self.body);
        format!(
            "# manifest: {}\n{}",
            serde_json::to_string(&manifest).expect("manifest serializes"),
            self.body
        )
    }
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    manifest: RunManifest,
    data: &'a T,
}

/// Pretty JSON document `{manifest, data}`.
pub fn json(manifest: RunManifest, data: &impl Serialize) -> String {
    let body = serde_json::to_string(data).expect("data serializes");
    let doc = Document {
        manifest: manifest.sealed(&body),
        data,
    };
    serde_json::to_string_pretty(&doc).expect("document serializes") + "\n"
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(g12(0.95), "0.95");
        assert_eq!(g12(1.0), "1");
        assert_eq!(g12(1.0 / 3.0), "0.333333333333");
        assert_eq!(g12(2.0 / 3.0), "0.666666666667");
        assert_eq!(g12(123456.0), "123456");
        assert_eq!(g12(1e-7), "1e-7");
        assert_eq!(g12(-0.0400000000001), "-0.0400000000001");
        assert_eq!(g12(0.99999999999999), "1");
        assert_eq!(g12(3.5e15), "3.5e15");
    }

    #[test]
    fn manifest_digest_covers_the_body() {
        let mut a = Csv::new(&["x"]);
        a.row(&["1".into()]);
        let mut b = Csv::new(&["x"]);
        b.row(&["2".into()]);
        let m = || RunManifest::new("t", &serde_json::json!({}), None);
        assert_ne!(a.render(m()), b.render(m()));
    }
}
