//! Parametric sets: parameter/value pairs whose values may be the general
//! symbol `*`, together with congruence, the partial order `leq`, the
//! parametric sum and the similarity ratio used for routing.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Text used for the general symbol in canonical forms and files.
pub const GENERAL: &str = "*";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlgebraError {
    #[error("parameter identifier must be non-empty")]
    EmptyIdentifier,
    #[error("duplicate parameter identifier `{0}`")]
    DuplicateIdentifier(String),
    #[error("parameter sets are not congruent: {left} vs {right}")]
    NotCongruent { left: String, right: String },
    #[error("similarity is undefined for empty parameter sets")]
    Empty,
    #[error("pair identifiers differ: `{0}` vs `{1}`")]
    IdentifierMismatch(String, String),
    #[error("name similarity expects identifier `name`, got `{0}`")]
    NotNamePair(String),
    #[error("invalid similarity config: need 0 < beta < alpha < 1 (alpha={alpha}, beta={beta})")]
    BadConfig { alpha: f64, beta: f64 },
    #[error("cannot parse parameter set `{text}`: {reason}")]
    Parse { text: String, reason: String },
}

/// A parameter value: a canonical literal token or the general symbol.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ParamValue {
    Literal(String),
    General,
}

impl ParamValue {
    /// Builds a value from a raw token. `*` becomes the general symbol and
    /// anything that reads as a finite number is rendered in a fixed decimal
    /// form so `1.0`, `1` and `1e0` compare equal.
    pub fn parse(token: &str) -> ParamValue {
        let token = token.trim();
        if token == GENERAL {
            return ParamValue::General;
        }
        ParamValue::Literal(canonical_token(token))
    }

    pub fn literal(token: impl AsRef<str>) -> ParamValue {
        ParamValue::Literal(canonical_token(token.as_ref().trim()))
    }

    pub fn from_number(x: f64) -> ParamValue {
        ParamValue::Literal(render_number(x))
    }

    pub fn is_general(&self) -> bool {
        matches!(self, ParamValue::General)
    }

    pub fn as_str(&self) -> &str {
        match self {
            ParamValue::Literal(s) => s,
            ParamValue::General => GENERAL,
        }
    }

    /// Pairwise compatibility used by `leq`: equal, or either side general.
    pub fn compatible(&self, other: &ParamValue) -> bool {
        self.is_general() || other.is_general() || self == other
    }
}

fn canonical_token(token: &str) -> String {
    match token.parse::<f64>() {
        Ok(x) if x.is_finite() && looks_numeric(token) => render_number(x),
        _ => token.to_string(),
    }
}

// `f64::from_str` also accepts "inf" and "nan"; those stay plain text.
fn looks_numeric(token: &str) -> bool {
    token
        .chars()
        .all(|c| c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E'))
}

fn render_number(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    format!("{x}")
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for ParamValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for ParamValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        ParamValue::from_json(&v).map_err(serde::de::Error::custom)
    }
}

impl ParamValue {
    /// Accepts strings, numbers, booleans and null from JSON documents.
    pub fn from_json(v: &serde_json::Value) -> Result<ParamValue, String> {
        match v {
            serde_json::Value::String(s) => Ok(ParamValue::parse(s)),
            serde_json::Value::Number(n) => n
                .as_f64()
                .map(ParamValue::from_number)
                .ok_or_else(|| format!("unrepresentable number {n}")),
            serde_json::Value::Bool(b) => Ok(ParamValue::Literal(b.to_string())),
            serde_json::Value::Null => Ok(ParamValue::Literal("none".into())),
            other => Err(format!("expected a scalar value, found {other}")),
        }
    }
}

/// A single `(p, v)` pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamPair {
    pub param: String,
    pub value: ParamValue,
}

impl ParamPair {
    pub fn new(param: impl Into<String>, value: ParamValue) -> Result<ParamPair, AlgebraError> {
        let param = param.into();
        if param.trim().is_empty() {
            return Err(AlgebraError::EmptyIdentifier);
        }
        Ok(ParamPair { param, value })
    }

    pub fn name(value: ParamValue) -> ParamPair {
        ParamPair { param: "name".into(), value }
    }
}

/// At most one value per parameter identifier, kept sorted by identifier.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamSet {
    pairs: BTreeMap<String, ParamValue>,
}

impl ParamSet {
    pub fn new() -> ParamSet {
        ParamSet::default()
    }

    pub fn from_pairs<I>(pairs: I) -> Result<ParamSet, AlgebraError>
    where
        I: IntoIterator<Item = ParamPair>,
    {
        let mut set = ParamSet::new();
        for pair in pairs {
            if pair.param.trim().is_empty() {
                return Err(AlgebraError::EmptyIdentifier);
            }
            if set.pairs.insert(pair.param.clone(), pair.value).is_some() {
                return Err(AlgebraError::DuplicateIdentifier(pair.param));
            }
        }
        Ok(set)
    }

    /// Convenience constructor from `(identifier, token)` pairs where the
    /// token `*` denotes the general symbol.
    pub fn of<K, V>(pairs: &[(K, V)]) -> ParamSet
    where
        K: AsRef<str>,
        V: AsRef<str>,
    {
        ParamSet::try_of(pairs).expect("invalid parameter set literal")
    }

    pub fn try_of<K, V>(pairs: &[(K, V)]) -> Result<ParamSet, AlgebraError>
    where
        K: AsRef<str>,
        V: AsRef<str>,
    {
        ParamSet::from_pairs(pairs.iter().map(|(k, v)| ParamPair {
            param: k.as_ref().trim().to_string(),
            value: ParamValue::parse(v.as_ref()),
        }))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn get(&self, param: &str) -> Option<&ParamValue> {
        self.pairs.get(param)
    }

    pub fn contains_param(&self, param: &str) -> bool {
        self.pairs.contains_key(param)
    }

    /// Replaces or adds a pair.
    pub fn set(&mut self, param: impl Into<String>, value: ParamValue) -> Result<(), AlgebraError> {
        let param = param.into();
        if param.trim().is_empty() {
            return Err(AlgebraError::EmptyIdentifier);
        }
        self.pairs.insert(param, value);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ParamValue)> {
        self.pairs.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn identifiers(&self) -> impl Iterator<Item = &str> {
        self.pairs.keys().map(String::as_str)
    }

    /// True when no value is the general symbol.
    pub fn is_concrete(&self) -> bool {
        self.pairs.values().all(|v| !v.is_general())
    }

    /// Number of identical pairs, `|P ∩ Q|`.
    pub fn intersection_len(&self, other: &ParamSet) -> usize {
        self.pairs
            .iter()
            .filter(|(k, v)| other.pairs.get(*k) == Some(v))
            .count()
    }

    /// Canonical text form `{p1=v1, p2=*}`.
    pub fn canonical(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for ParamSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.pairs.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        f.write_str("}")
    }
}

impl FromStr for ParamSet {
    type Err = AlgebraError;

    /// Parses the canonical text form. Braces are optional and so is the
    /// whitespace around separators.
    fn from_str(text: &str) -> Result<ParamSet, AlgebraError> {
        let err = |reason: &str| AlgebraError::Parse { text: text.to_string(), reason: reason.to_string() };
        let mut body = text.trim();
        if let Some(rest) = body.strip_prefix('{') {
            body = rest.strip_suffix('}').ok_or_else(|| err("missing closing brace"))?;
        } else if body.ends_with('}') {
            return Err(err("missing opening brace"));
        }
        let body = body.trim();
        if body.is_empty() {
            return Ok(ParamSet::new());
        }
        let mut pairs = Vec::new();
        for item in body.split(',') {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| err(&format!("expected `param=value`, found `{}`", item.trim())))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(err("empty parameter identifier"));
            }
            if v.is_empty() {
                return Err(err(&format!("empty value for `{k}`")));
            }
            pairs.push(ParamPair { param: k.to_string(), value: ParamValue::parse(v) });
        }
        ParamSet::from_pairs(pairs)
    }
}

impl Serialize for ParamSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.pairs.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ParamSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let pairs = BTreeMap::<String, ParamValue>::deserialize(d)?;
        if pairs.keys().any(|k| k.trim().is_empty()) {
            return Err(serde::de::Error::custom(AlgebraError::EmptyIdentifier));
        }
        Ok(ParamSet { pairs })
    }
}

/// Weights for mismatching pairs: `alpha` when exactly one side is general,
/// `beta` when both are different literals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityConfig {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        SimilarityConfig { alpha: 0.5, beta: 0.1 }
    }
}

impl SimilarityConfig {
    pub fn new(alpha: f64, beta: f64) -> Result<SimilarityConfig, AlgebraError> {
        let cfg = SimilarityConfig { alpha, beta };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), AlgebraError> {
        let ok = 0.0 < self.beta && self.beta < self.alpha && self.alpha < 1.0;
        if ok {
            Ok(())
        } else {
            Err(AlgebraError::BadConfig { alpha: self.alpha, beta: self.beta })
        }
    }

    pub fn pair_similarity(&self, a: &ParamValue, b: &ParamValue) -> f64 {
        if a == b {
            1.0
        } else if a.is_general() || b.is_general() {
            self.alpha
        } else {
            self.beta
        }
    }

    /// Smallest similarity attainable for sets of `len` pairs.
    pub fn lower_bound(&self, len: usize) -> f64 {
        // Same multiplication order as `similarity` so the bound is attained bit for bit.
        let product = (0..len).fold(1.0, |acc, _| acc * self.beta);
        product / len as f64
    }
}

pub fn congruent(p: &ParamSet, q: &ParamSet) -> bool {
    p.len() == q.len() && p.identifiers().all(|k| q.contains_param(k))
}

/// `P ≤ Q`: every pair of `P` has a same-identifier pair in `Q` that is
/// equal or where either side is general.
pub fn leq(p: &ParamSet, q: &ParamSet) -> bool {
    p.iter().all(|(k, v)| q.get(k).is_some_and(|w| v.compatible(w)))
}

/// Parametric sum: agreeing values are kept, differing values become `*`.
/// The empty set is the identity.
pub fn psum(p: &ParamSet, q: &ParamSet) -> Result<ParamSet, AlgebraError> {
    if p.is_empty() {
        return Ok(q.clone());
    }
    if q.is_empty() {
        return Ok(p.clone());
    }
    if !congruent(p, q) {
        return Err(AlgebraError::NotCongruent { left: p.to_string(), right: q.to_string() });
    }
    let pairs = p
        .pairs
        .iter()
        .map(|(k, v)| {
            let w = &q.pairs[k];
            let merged = if v == w { v.clone() } else { ParamValue::General };
            (k.clone(), merged)
        })
        .collect();
    Ok(ParamSet { pairs })
}

/// Folds `psum` over a sequence, starting from the empty set.
pub fn psum_all<'a, I>(sets: I) -> Result<ParamSet, AlgebraError>
where
    I: IntoIterator<Item = &'a ParamSet>,
{
    sets.into_iter().try_fold(ParamSet::new(), |acc, s| psum(&acc, s))
}

/// Similarity ratio: `(#matches + Π mismatch weights) / |P|`, where the
/// product contributes 0 when nothing mismatches.
pub fn similarity(p: &ParamSet, q: &ParamSet, cfg: &SimilarityConfig) -> Result<f64, AlgebraError> {
    if p.is_empty() || q.is_empty() {
        return Err(AlgebraError::Empty);
    }
    if !congruent(p, q) {
        return Err(AlgebraError::NotCongruent { left: p.to_string(), right: q.to_string() });
    }
    let mut matches = 0usize;
    let mut product = 1.0;
    let mut mismatched = false;
    for (k, v) in p.iter() {
        let w = &q.pairs[k];
        if v == w {
            matches += 1;
        } else {
            mismatched = true;
            product *= cfg.pair_similarity(v, w);
        }
    }
    let tail = if mismatched { product } else { 0.0 };
    Ok((matches as f64 + tail) / p.len() as f64)
}

/// Similarity of two singleton `name` pairs, as used by root-level routing.
pub fn name_similarity(a: &ParamPair, b: &ParamPair, cfg: &SimilarityConfig) -> Result<f64, AlgebraError> {
    if a.param != b.param {
        return Err(AlgebraError::IdentifierMismatch(a.param.clone(), b.param.clone()));
    }
    if a.param != "name" {
        return Err(AlgebraError::NotNamePair(a.param.clone()));
    }
    let left = ParamSet::from_pairs([a.clone()])?;
    let right = ParamSet::from_pairs([b.clone()])?;
    similarity(&left, &right, cfg)
}
