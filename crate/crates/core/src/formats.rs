//! Text formats: channel configs, region files, number rendering.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::channels::{ChannelError, FeedbackStateSpec, IcGfChannel, LdicParams};
use crate::regions::{HalfPlane, RateRegion};

/// Significant digits of every emitted number.
pub const SIG_DIGITS: usize = 9;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("expected a {expected} channel config")]
    WrongKind { expected: &'static str },
}

pub type Result<T> = std::result::Result<T, FormatError>;

/// Rounds to [`SIG_DIGITS`] significant digits; `-0` becomes `0`.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return if x == 0.0 { 0.0 } else { x };
    }
    format!("{:.*e}", SIG_DIGITS - 1, x).parse().unwrap_or(x)
}

pub fn fmt_num(x: f64) -> String {
    format!("{}", round_sig(x))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().map(round_sig).and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_value),
        Value::Object(o) => o.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON with every float rounded to [`SIG_DIGITS`] digits.
pub fn to_json_rounded<T: Serialize>(value: &T) -> String {
    let mut v = serde_json::to_value(value).expect("serializable value");
    round_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v).expect("json value");
    s.push('\n');
    s
}

fn default_on() -> f64 {
    1.0
}

/// Channel description read by the command-line front end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ChannelConfig {
    Ldic {
        q: usize,
        n11: usize,
        n12: usize,
        n21: usize,
        n22: usize,
        #[serde(default = "default_on")]
        p1: f64,
        #[serde(default = "default_on")]
        p2: f64,
        /// Pearson correlation of the two "on" indicators.
        #[serde(default)]
        state_correlation: f64,
    },
    Table {
        /// `|X1|, |X2|, |Y1|, |Y2|, |Y3|, |Y4|`
        alphabets: [usize; 6],
        /// `P(y1,y2,y3,y4 | x1,x2)`, row-major with `y4` fastest.
        weights: Vec<f64>,
    },
}

impl ChannelConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn ldic_params(&self) -> Result<LdicParams> {
        match *self {
            Self::Ldic { q, n11, n12, n21, n22, .. } => Ok(LdicParams::new(q, n11, n12, n21, n22)?),
            Self::Table { .. } => Err(FormatError::WrongKind { expected: "ldic" }),
        }
    }

    pub fn feedback(&self) -> Result<FeedbackStateSpec> {
        match *self {
            Self::Ldic {
                p1,
                p2,
                state_correlation,
                ..
            } => Ok(FeedbackStateSpec::correlated(p1, p2, state_correlation)?),
            Self::Table { .. } => Err(FormatError::WrongKind { expected: "ldic" }),
        }
    }

    pub fn table_channel(&self) -> Result<IcGfChannel> {
        match self {
            Self::Table { alphabets, weights } => Ok(IcGfChannel::new(*alphabets, weights.clone())?),
            Self::Ldic { .. } => Err(FormatError::WrongKind { expected: "table" }),
        }
    }

    /// Hash of the canonical serialization, used in region metadata.
    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("serializable config").as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMetadata {
    /// What produced the region, e.g. `capacity` or `inner:2`.
    pub source: String,
    pub channel_hash: String,
    pub distribution_hash: String,
    pub tolerance: f64,
}

/// On-disk region: half-planes, vertices, metadata and optional witnesses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionFile {
    pub halfplanes: Vec<HalfPlane>,
    pub vertices: Vec<[f64; 2]>,
    pub metadata: RegionMetadata,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witnesses: Option<Value>,
}

impl RegionFile {
    pub fn new(region: &RateRegion, metadata: RegionMetadata) -> Self {
        Self {
            halfplanes: region.halfplanes().to_vec(),
            vertices: region.vertices().to_vec(),
            metadata,
            witnesses: None,
        }
    }

    pub fn with_witnesses<T: Serialize>(mut self, w: &T) -> Self {
        self.witnesses = Some(serde_json::to_value(w).expect("serializable witnesses"));
        self
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_text(&self) -> String {
        to_json_rounded(self)
    }

    pub fn region(&self) -> RateRegion {
        RateRegion::from_parts(self.halfplanes.clone(), self.vertices.clone())
    }
}

/// Closed vertex polyline, one `R1<TAB>R2` pair per line.
pub fn polyline_tsv(region: &RateRegion) -> String {
    let mut out = String::from("R1\tR2\n");
    let v = region.vertices();
    for p in v.iter().chain(v.first()) {
        out.push_str(&format!("{}\t{}\n", fmt_num(p[0]), fmt_num(p[1])));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_num(2.0), "2");
        assert_eq!(fmt_num(-0.0), "0");
        assert_eq!(fmt_num(123456.78901234), "123456.789");
        assert_eq!(fmt_num(2.9999999999), "3");
    }

    #[test]
    fn parses_ldic_config() {
        let c = ChannelConfig::parse(r#"{"kind":"ldic","q":2,"n11":2,"n12":1,"n21":1,"n22":2,"p1":0.5,"p2":1}"#).unwrap();
        assert_eq!(c.ldic_params().unwrap(), LdicParams::new(2, 2, 1, 1, 2).unwrap());
        assert_eq!(c.feedback().unwrap().p1(), 0.5);
        assert!(matches!(c.table_channel(), Err(FormatError::WrongKind { .. })));
    }

    #[test]
    fn parses_table_config() {
        let mut w = vec![0.0; 4 * 2 * 2];
        for x1 in 0..2 {
            for x2 in 0..2 {
                w[(x1 * 2 + x2) * 4 + x1 * 2 + x2] = 1.0;
            }
        }
        let text = serde_json::json!({"kind": "table", "alphabets": [2, 2, 1, 1, 2, 2], "weights": w}).to_string();
        let c = ChannelConfig::parse(&text).unwrap();
        assert_eq!(c.table_channel().unwrap().weight([1, 0], [0, 0, 1, 0]), 1.0);
    }

    #[test]
    fn malformed_config_is_a_parse_error() {
        assert!(matches!(ChannelConfig::parse("{\"kind\":\"ldic\"}"), Err(FormatError::Parse(_))));
        assert!(matches!(ChannelConfig::parse("not json"), Err(FormatError::Parse(_))));
    }

    #[test]
    fn out_of_range_gain_is_semantic() {
        let c = ChannelConfig::parse(r#"{"kind":"ldic","q":1,"n11":2,"n12":0,"n21":0,"n22":0}"#).unwrap();
        assert!(matches!(c.ldic_params(), Err(FormatError::Channel(_))));
    }

    #[test]
    fn region_file_round_trip() {
        let r = RateRegion::from_halfplanes(&[HalfPlane::new(1.0, 1.0, 1.0 / 3.0)], [1.0, 1.0]);
        let meta = RegionMetadata {
            source: "test".into(),
            channel_hash: sha256_hex(b"c"),
            distribution_hash: sha256_hex(b"d"),
            tolerance: 1e-9,
        };
        let f = RegionFile::new(&r, meta);
        let text = f.to_text();
        let back = RegionFile::parse(&text).unwrap();
        assert_eq!(back.to_text(), text);
        let rr = back.region();
        assert!(rr.contains([1.0 / 3.0, 0.0], 1e-8));
        assert!(!rr.contains([0.4, 0.0], 1e-8));
    }

    #[test]
    fn polyline_is_closed() {
        let r = RateRegion::from_halfplanes(&[], [1.0, 2.0]);
        let t = polyline_tsv(&r);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[1], lines[5]);
    }
}
