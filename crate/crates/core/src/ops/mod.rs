//! The operator library: every vertex of a circuit carries one of these.

mod arith;
mod catalog;
mod elementwise;
mod fused;
mod host;
mod segment;
mod structural;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde_json::{json, Value as Json};

use crate::circuit::Signature;
use crate::column::{Column, ColumnError, ElementType};

pub use arith::{Aggregate, AggregateMode, Carve, Derivative, IsSameAsPrevious, PrefixAggregate, Reduce, SplitFirst};
pub use catalog::{Catalog, CatalogError, Factory};
pub use elementwise::{CmpOp, Elementwise, ElementwiseFn};
pub use fused::FusedOp;
pub use host::{segment_label, SegmentizeOp, VerifyOp};
pub use segment::{Assemble, ComposeSegments, ReplicateSegments, ReplicateWithinSegments, Transpose, Unzip, Zip};
pub use structural::{
    Concatenate, Gather, Iota, Length, NoOp, Permute, Replicate, Scalar, Scatter, Select, SelectIndices,
};

pub type Ports = BTreeMap<String, Column>;
pub type OpRef = Arc<dyn Operator>;

#[derive(Debug, thiserror::Error)]
pub enum OpError {
    #[error("missing input port `{0}`")]
    MissingPort(String),
    #[error("port `{port}` expects {expected}, got {found}")]
    PortType { port: String, expected: ElementType, found: ElementType },
    #[error("port `{0}` must carry a single value")]
    NotScalar(String),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("arithmetic overflow: {0}")]
    Overflow(String),
    #[error("{0}")]
    Precondition(String),
    #[error(transparent)]
    Column(#[from] ColumnError),
    #[error("inner circuit failed: {0}")]
    Inner(String),
}

/// A named, parameterized partial function from input columns to output columns.
pub trait Operator: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    /// Parameters as written to circuit files; `Catalog::build(name, params)` recreates the operator.
    fn params(&self) -> Json;

    fn signature(&self) -> &Signature;

    fn apply(&self, inputs: &Ports) -> Result<Ports, OpError>;

    /// Key for duplicate elimination. Operators returning `None` never merge.
    fn dedup_key(&self) -> Option<String> {
        Some(format!("{}{}", self.name(), self.params()))
    }
}

pub(crate) fn port<'a>(ports: &'a Ports, name: &str) -> Result<&'a Column, OpError> {
    ports.get(name).ok_or_else(|| OpError::MissingPort(name.to_string()))
}

/// Reads a length-1 integer port as a non-negative count or index.
pub(crate) fn scalar_usize(ports: &Ports, name: &str) -> Result<usize, OpError> {
    let c = port(ports, name)?;
    if c.len() != 1 {
        return Err(OpError::NotScalar(name.to_string()));
    }
    let v = c.value(0).as_i128().ok_or_else(|| OpError::Precondition(format!("`{name}` is not an integer")))?;
    usize::try_from(v).map_err(|_| OpError::OutOfRange(format!("`{name}` = {v} is negative or too large")))
}

pub(crate) fn one(name: &str, col: Column) -> Ports {
    let mut p = Ports::new();
    p.insert(name.to_string(), col);
    p
}

pub(crate) fn same_len(a: &Column, b: &Column, what: &str) -> Result<(), OpError> {
    if a.len() != b.len() {
        return Err(OpError::LengthMismatch(format!("{what}: {} vs {}", a.len(), b.len())));
    }
    Ok(())
}

pub(crate) fn index_of(c: &Column, what: &str) -> Result<Vec<usize>, OpError> {
    c.to_indices().map_err(|_| OpError::OutOfRange(format!("negative value in `{what}`")))
}

/// Parameter record accessor used by the operator factories.
pub(crate) struct Params<'a>(pub &'a Json);

impl Params<'_> {
    pub fn get(&self, key: &str) -> Option<&Json> {
        self.0.get(key)
    }

    pub fn ty(&self, key: &str) -> Result<ElementType, CatalogError> {
        let s = self
            .0
            .get(key)
            .and_then(|v| v.as_str())
            .ok_or_else(|| CatalogError::BadParams(format!("missing type parameter `{key}`")))?;
        s.parse().map_err(|e: ColumnError| CatalogError::BadParams(e.to_string()))
    }

    pub fn ty_or(&self, key: &str, default: ElementType) -> Result<ElementType, CatalogError> {
        if self.0.get(key).is_none() {
            return Ok(default);
        }
        self.ty(key)
    }

    pub fn types(&self, key: &str) -> Result<Vec<ElementType>, CatalogError> {
        let arr = self
            .0
            .get(key)
            .and_then(|v| v.as_array())
            .ok_or_else(|| CatalogError::BadParams(format!("missing type list `{key}`")))?;
        arr.iter()
            .map(|v| {
                v.as_str()
                    .ok_or_else(|| CatalogError::BadParams(format!("`{key}` entries must be strings")))?
                    .parse()
                    .map_err(|e: ColumnError| CatalogError::BadParams(e.to_string()))
            })
            .collect()
    }

    pub fn u64(&self, key: &str) -> Result<u64, CatalogError> {
        self.0
            .get(key)
            .and_then(|v| v.as_u64())
            .ok_or_else(|| CatalogError::BadParams(format!("missing integer parameter `{key}`")))
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64, CatalogError> {
        if self.0.get(key).is_none() {
            return Ok(default);
        }
        self.u64(key)
    }

    pub fn str(&self, key: &str) -> Result<&str, CatalogError> {
        self.0
            .get(key)
            .and_then(|v| v.as_str())
            .ok_or_else(|| CatalogError::BadParams(format!("missing string parameter `{key}`")))
    }

    pub fn bool_or(&self, key: &str, default: bool) -> bool {
        self.0.get(key).and_then(|v| v.as_bool()).unwrap_or(default)
    }
}

pub(crate) fn ty_json(t: &ElementType) -> Json {
    json!(t.to_string())
}
