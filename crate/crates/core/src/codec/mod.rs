//! Codecs: a decoder circuit, an encoder and a verifier for a family of labeled columns.

mod bundle;
pub(crate) mod recipes;
mod registry;
pub(crate) mod scheme;

use std::fmt;
use std::sync::Arc;

use rand::rngs::StdRng;
use serde_json::{json, Value as Json};

use crate::circuit::{BuildError, Circuit, EvalError};
use crate::column::{representation_size_bytes, Column, ColumnError, ElementType};
use crate::ops::{CatalogError, Ports, VerifyOp};

pub use bundle::{read_bundle, write_bundle, BundleError, MANIFEST};
pub use recipes::{Alternate, Differentiate, ElementwiseAdd, Patch, Segmentize, SmallDictFit};
pub use registry::Registry;

#[derive(Debug, Clone, thiserror::Error)]
pub enum CodecError {
    #[error("unknown scheme `{0}`")]
    UnknownScheme(String),
    #[error("scheme `{0}` is already registered")]
    DuplicateId(String),
    #[error("bad scheme parameters: {0}")]
    BadParams(String),
    #[error("not encodable: {0}")]
    NotEncodable(String),
    #[error("verification failed: {0}")]
    VerificationFailed(String),
    #[error("incompatible inner schemes: {0}")]
    Incompatible(String),
    #[error("decoder construction: {0}")]
    Build(String),
    #[error("decoding failed: {0}")]
    Decode(String),
}

impl From<CatalogError> for CodecError {
    fn from(e: CatalogError) -> Self {
        CodecError::BadParams(e.to_string())
    }
}

impl From<BuildError> for CodecError {
    fn from(e: BuildError) -> Self {
        CodecError::Build(e.to_string())
    }
}

impl From<ColumnError> for CodecError {
    fn from(e: ColumnError) -> Self {
        CodecError::NotEncodable(e.to_string())
    }
}

impl From<EvalError> for CodecError {
    fn from(e: EvalError) -> Self {
        CodecError::Decode(e.to_string())
    }
}

/// An encoded form: scheme, completed parameters and the labeled columns.
#[derive(Clone, Debug, PartialEq)]
pub struct SchemeInstance {
    pub scheme: String,
    pub params: Json,
    pub columns: Ports,
}

impl SchemeInstance {
    pub fn new(scheme: impl Into<String>, params: Json, columns: Ports) -> Self {
        SchemeInstance { scheme: scheme.into(), params, columns }
    }

    pub fn size_bytes(&self) -> u64 {
        representation_size_bytes(self.columns.values())
    }
}

/// A codec for one scheme. Parameters select among a family of decoders (types, widths,
/// basis sizes); everything data-dependent lives in the encoded columns.
pub trait Codec: Send + Sync {
    fn id(&self) -> String;

    /// The decoder circuit: inputs are the encoded labels, outputs the decoded labels.
    fn decoder(&self, params: &Json) -> Result<Circuit, CodecError>;

    /// Validity constraints on a well-typed encoded form beyond decoder success.
    fn check(&self, params: &Json, enc: &Ports) -> Result<(), String>;

    /// Encodes a decoded family. `params` may be partial; the instance carries the completed set.
    fn encode(&self, params: &Json, dec: &Ports) -> Result<SchemeInstance, CodecError>;

    /// Representative of the decoded family's class under the scheme's equivalence.
    fn canonicalize(&self, _params: &Json, dec: &Ports) -> Ports {
        dec.clone()
    }

    /// A random member of the scheme's encodable set, with the parameter hints to encode it.
    fn sample(&self, rng: &mut StdRng) -> (Json, Ports);

    /// A targeted corruption of a valid instance, violating one listed constraint.
    fn corrupt(&self, _inst: &SchemeInstance, _rng: &mut StdRng) -> Option<SchemeInstance> {
        None
    }

    /// A column close to `col` that this scheme encodes exactly, used by additive
    /// composition. With `below`, every element must be at most the original.
    fn approximate(&self, _params: &Json, _col: &Column, _below: bool) -> Option<Column> {
        None
    }
}

pub type CodecRef = Arc<dyn Codec>;

impl fmt::Debug for dyn Codec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Codec({})", self.id())
    }
}

/// A ratio of two byte counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

pub fn resolve(scheme: &str) -> Result<CodecRef, CodecError> {
    Registry::builtin().resolve(scheme)
}

/// The verifier as a decision circuit: the lifted verify operator.
pub fn verifier(scheme: &str, params: &Json) -> Result<Circuit, CodecError> {
    let op = VerifyOp::new(scheme, params.clone())?;
    Ok(crate::transform::lift_operator(Arc::new(op)))
}

/// Decides validity of an encoded form; never fails on malformed input.
pub fn verify(inst: &SchemeInstance) -> bool {
    verify_reason(inst).is_ok()
}

/// Like [`verify`], with the reason for rejection.
pub fn verify_reason(inst: &SchemeInstance) -> Result<(), String> {
    let codec = resolve(&inst.scheme).map_err(|e| e.to_string())?;
    verify_with(&*codec, &inst.params, &inst.columns)
}

pub(crate) fn verify_with(codec: &dyn Codec, params: &Json, cols: &Ports) -> Result<(), String> {
    let dec = codec.decoder(params).map_err(|e| e.to_string())?;
    check_labels(&dec, cols)?;
    codec.check(params, cols)?;
    dec.evaluate_sequential(cols).map(|_| ()).map_err(|e| e.to_string())
}

fn check_labels(dec: &Circuit, cols: &Ports) -> Result<(), String> {
    for (l, t) in &dec.signature.inputs {
        match cols.get(l) {
            None => return Err(format!("missing column `{l}`")),
            Some(c) if c.element_type() != t => {
                return Err(format!("column `{l}` has type {}, expected {t}", c.element_type()))
            }
            _ => {}
        }
    }
    if let Some(l) = cols.keys().find(|l| !dec.signature.inputs.contains_key(*l)) {
        return Err(format!("unexpected column `{l}`"));
    }
    Ok(())
}

/// Decodes after verifying.
pub fn decode(inst: &SchemeInstance) -> Result<Ports, CodecError> {
    let codec = resolve(&inst.scheme)?;
    verify_with(&*codec, &inst.params, &inst.columns).map_err(CodecError::VerificationFailed)?;
    Ok(codec.decoder(&inst.params)?.evaluate(&inst.columns)?)
}

pub fn encode(scheme: &str, params: &Json, input: &Ports) -> Result<SchemeInstance, CodecError> {
    resolve(scheme)?.encode(params, input)
}

/// Encodes a single column under a column scheme.
pub fn encode_column(scheme: &str, params: &Json, col: &Column) -> Result<SchemeInstance, CodecError> {
    encode(scheme, params, &single("column", col.clone()))
}

/// Decoded size over encoded size.
pub fn compression_ratio(inst: &SchemeInstance) -> Result<Ratio, CodecError> {
    let dec = decode(inst)?;
    Ok(Ratio { num: representation_size_bytes(dec.values()), den: inst.size_bytes() })
}

/// Whether two decoded families are equivalent under the scheme's relation.
pub fn equivalent(scheme: &str, params: &Json, a: &Ports, b: &Ports) -> Result<bool, CodecError> {
    let c = resolve(scheme)?;
    Ok(c.canonicalize(params, a) == c.canonicalize(params, b))
}

// Helpers shared by the scheme implementations.

pub(crate) fn single(label: &str, c: Column) -> Ports {
    let mut p = Ports::new();
    p.insert(label.to_string(), c);
    p
}

pub(crate) fn ports<const N: usize>(items: [(&str, Column); N]) -> Ports {
    items.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

pub(crate) fn get<'a>(p: &'a Ports, label: &str) -> Result<&'a Column, String> {
    p.get(label).ok_or_else(|| format!("missing column `{label}`"))
}

pub(crate) fn input<'a>(p: &'a Ports, label: &str) -> Result<&'a Column, CodecError> {
    p.get(label).ok_or_else(|| CodecError::BadParams(format!("input lacks `{label}`")))
}

/// The value of a length-1 non-negative integer column.
pub(crate) fn scalar(p: &Ports, label: &str) -> Result<u64, String> {
    let c = get(p, label)?;
    if c.len() != 1 {
        return Err(format!("`{label}` must be a scalar, has length {}", c.len()));
    }
    c.value(0).as_u64().ok_or_else(|| format!("`{label}` is negative"))
}

pub(crate) fn indices(p: &Ports, label: &str) -> Result<Vec<u64>, String> {
    let c = get(p, label)?;
    c.to_i128s()
        .ok_or_else(|| format!("`{label}` is not integral"))?
        .into_iter()
        .map(|v| u64::try_from(v).map_err(|_| format!("`{label}` has a negative value")))
        .collect()
}

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

pub(crate) fn not_encodable(msg: impl Into<String>) -> CodecError {
    CodecError::NotEncodable(msg.into())
}

/// Index column of type `ty`, failing with not-encodable if a value does not fit.
pub(crate) fn index_column(ty: &ElementType, v: Vec<u64>, what: &str) -> Result<Column, CodecError> {
    Column::from_u64s(ty.clone(), v).map_err(|e| not_encodable(format!("{what}: {e}")))
}

/// Copies `base` and sets the given keys.
pub(crate) fn with(base: &Json, extra: Json) -> Json {
    let mut out = if base.is_object() { base.clone() } else { json!({}) };
    if let (Some(o), Some(e)) = (out.as_object_mut(), extra.as_object()) {
        for (k, v) in e {
            o.insert(k.clone(), v.clone());
        }
    }
    out
}

/// The decoded element type: the `type` parameter, or the input column's type.
pub(crate) fn decoded_type(params: &Json, col: &Column) -> Result<ElementType, CodecError> {
    match params.get("type") {
        Some(_) => {
            let t = crate::ops::Params(params).ty("type")?;
            if t != *col.element_type() {
                return Err(CodecError::BadParams(format!(
                    "column has type {}, parameters say {t}",
                    col.element_type()
                )));
            }
            Ok(t)
        }
        None => Ok(col.element_type().clone()),
    }
}

pub(crate) fn ty_str(t: &ElementType) -> Json {
    Json::String(t.to_string())
}
