use serde_json::{json, Map, Value as Json};

use super::{Circuit, Direction, Edge, PortRef, Signature};
use crate::ops::{Catalog, CatalogError};

#[derive(Debug, thiserror::Error)]
pub enum CircuitFileError {
    #[error("malformed circuit file: {0}")]
    Malformed(String),
    #[error("vertex `{vertex}`: {source}")]
    Operator { vertex: String, source: CatalogError },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn bad(msg: impl Into<String>) -> CircuitFileError {
    CircuitFileError::Malformed(msg.into())
}

fn parse_port(s: &str, dir: Direction) -> Result<PortRef, CircuitFileError> {
    let (v, p) = s.split_once('.').ok_or_else(|| bad(format!("port `{s}` is not of the form vertex.port")))?;
    Ok(PortRef { vertex: v.to_string(), port: p.to_string(), dir })
}

impl Circuit {
    /// The circuit file form. Keys are sorted, so output is deterministic.
    pub fn to_json(&self) -> Json {
        let vertices: Vec<Json> =
            self.vertices.iter().map(|(id, op)| json!({"id": id, "op": op.name(), "params": op.params()})).collect();
        let edges: Vec<Json> =
            self.edges.iter().map(|e| json!({"from": e.from.to_string(), "to": e.to.to_string()})).collect();
        let interface: Map<String, Json> =
            self.interface.iter().map(|(l, p)| (l.clone(), Json::String(p.to_string()))).collect();
        json!({
            "signature": serde_json::to_value(&self.signature).expect("signature serializes"),
            "vertices": vertices,
            "edges": edges,
            "interface": interface,
        })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("json") + "\n"
    }

    pub fn from_json(j: &Json, catalog: &Catalog) -> Result<Circuit, CircuitFileError> {
        let signature: Signature = serde_json::from_value(j.get("signature").cloned().unwrap_or(json!({})))
            .map_err(|e| bad(format!("signature: {e}")))?;
        let mut c = Circuit { signature, ..Circuit::default() };
        for v in j.get("vertices").and_then(|v| v.as_array()).ok_or_else(|| bad("`vertices` must be an array"))? {
            let id = v.get("id").and_then(|x| x.as_str()).ok_or_else(|| bad("vertex without `id`"))?;
            let op = v.get("op").and_then(|x| x.as_str()).ok_or_else(|| bad(format!("vertex `{id}` without `op`")))?;
            let params = v.get("params").cloned().unwrap_or(json!({}));
            let built = catalog
                .build(op, &params)
                .map_err(|source| CircuitFileError::Operator { vertex: id.to_string(), source })?;
            if c.vertices.insert(id.to_string(), built).is_some() {
                return Err(bad(format!("duplicate vertex id `{id}`")));
            }
        }
        if let Some(edges) = j.get("edges") {
            for e in edges.as_array().ok_or_else(|| bad("`edges` must be an array"))? {
                let from = e.get("from").and_then(|x| x.as_str()).ok_or_else(|| bad("edge without `from`"))?;
                let to = e.get("to").and_then(|x| x.as_str()).ok_or_else(|| bad("edge without `to`"))?;
                c.edges.insert(Edge::new(parse_port(from, Direction::Out)?, parse_port(to, Direction::In)?));
            }
        }
        if let Some(iface) = j.get("interface") {
            for (label, p) in iface.as_object().ok_or_else(|| bad("`interface` must be an object"))? {
                let p = p.as_str().ok_or_else(|| bad(format!("interface `{label}` must be a port string")))?;
                let dir = if c.signature.inputs.contains_key(label) { Direction::In } else { Direction::Out };
                c.interface.insert(label.clone(), parse_port(p, dir)?);
            }
        }
        Ok(c)
    }

    pub fn from_json_str(s: &str, catalog: &Catalog) -> Result<Circuit, CircuitFileError> {
        Circuit::from_json(&serde_json::from_str(s)?, catalog)
    }

    pub fn read_file(path: impl AsRef<std::path::Path>, catalog: &Catalog) -> Result<Circuit, CircuitFileError> {
        Circuit::from_json_str(&std::fs::read_to_string(path)?, catalog)
    }
}
