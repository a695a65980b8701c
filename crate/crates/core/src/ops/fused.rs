use std::sync::Arc;

use serde_json::{json, Value as Json};

use super::{OpError, Operator, Ports};
use crate::circuit::{Circuit, Signature};

/// A composite operator that evaluates a captured circuit; interior edges are never exposed.
#[derive(Debug, Clone)]
pub struct FusedOp {
    name: String,
    inner: Arc<Circuit>,
}

impl FusedOp {
    pub fn new(name: impl Into<String>, inner: Circuit) -> Self {
        FusedOp { name: name.into(), inner: Arc::new(inner) }
    }

    pub fn circuit(&self) -> &Circuit {
        &self.inner
    }
}

impl Operator for FusedOp {
    fn name(&self) -> &str {
        &self.name
    }
    fn params(&self) -> Json {
        json!({"circuit": self.inner.to_json()})
    }
    fn signature(&self) -> &Signature {
        &self.inner.signature
    }
    fn apply(&self, inputs: &Ports) -> Result<Ports, OpError> {
        self.inner.evaluate(inputs).map_err(|e| OpError::Inner(e.to_string()))
    }
    fn dedup_key(&self) -> Option<String> {
        None
    }
}
