use std::collections::BTreeMap;
use std::str::FromStr;
use std::sync::{Arc, OnceLock, RwLock};

use serde_json::Value as Json;

use super::arith::{
    Aggregate, AggregateMode, Carve, Derivative, IsSameAsPrevious, PrefixAggregate, Reduce, SplitFirst,
};
use super::elementwise::Elementwise;
use super::fused::FusedOp;
use super::host::{SegmentizeOp, VerifyOp};
use super::segment::{Assemble, ComposeSegments, ReplicateSegments, ReplicateWithinSegments, Transpose, Unzip, Zip};
use super::structural::{
    Concatenate, Gather, Iota, Length, NoOp, Permute, Replicate, Scalar, Scatter, Select, SelectIndices,
};
use super::{OpRef, Params};
use crate::circuit::Circuit;
use crate::column::{ElementType, Value};

#[derive(Debug, Clone, thiserror::Error)]
pub enum CatalogError {
    #[error("unknown operator `{0}`")]
    UnknownOperator(String),
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("operator name `{0}` is already taken")]
    NameCollision(String),
}

pub type Factory = Arc<dyn Fn(&Json, &Catalog) -> Result<OpRef, CatalogError> + Send + Sync>;

/// Operator factories by name, plus composite operators registered at run time.
pub struct Catalog {
    factories: BTreeMap<String, Factory>,
    composites: RwLock<BTreeMap<String, FusedOp>>,
}

impl std::fmt::Debug for Catalog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Catalog").field("operators", &self.names()).finish()
    }
}

fn arc<T: super::Operator + 'static>(op: T) -> OpRef {
    Arc::new(op)
}

fn mode(p: &Params) -> Result<AggregateMode, CatalogError> {
    match p.get("mode").and_then(|m| m.as_str()).unwrap_or("inclusive") {
        "inclusive" => Ok(AggregateMode::Inclusive),
        "exclusive" => Ok(AggregateMode::Exclusive),
        m => Err(CatalogError::BadParams(format!("unknown mode `{m}`"))),
    }
}

impl Catalog {
    pub fn empty() -> Self {
        Catalog { factories: BTreeMap::new(), composites: RwLock::new(BTreeMap::new()) }
    }

    /// Every builtin operator.
    pub fn standard() -> Self {
        let mut c = Catalog::empty();
        let idx = |p: &Params, key: &str| p.ty_or(key, ElementType::U64);
        c.add("noop", |j, _| Ok(arc(NoOp::new(Params(j).ty("type")?))));
        c.add("scalar", |j, _| {
            let p = Params(j);
            let ty = p.ty("type")?;
            let raw = p.get("value").ok_or_else(|| CatalogError::BadParams("scalar needs `value`".into()))?;
            let v = Value::from_json(raw, &ty).map_err(|e| CatalogError::BadParams(e.to_string()))?;
            Ok(arc(Scalar::new(ty, v)?))
        });
        c.add("replicate", move |j, _| {
            let p = Params(j);
            Ok(arc(Replicate::new(p.ty("type")?, idx(&p, "factor_type")?)?))
        });
        c.add("select", |j, _| {
            let p = Params(j);
            Ok(arc(Select::new(p.ty("type")?, p.bool_or("relaxed", false))))
        });
        c.add("iota", move |j, _| Ok(arc(Iota::new(idx(&Params(j), "type")?)?)));
        c.add("permute", move |j, _| {
            let p = Params(j);
            Ok(arc(Permute::new(p.ty("type")?, idx(&p, "index_type")?)?))
        });
        c.add("length", move |j, _| {
            let p = Params(j);
            Ok(arc(Length::new(p.ty("type")?, idx(&p, "out_type")?)?))
        });
        c.add("concatenate", |j, _| {
            let p = Params(j);
            Ok(arc(Concatenate::new(p.ty("type")?, p.u64_or("k", 2)? as usize)?))
        });
        c.add("scatter", move |j, _| {
            let p = Params(j);
            Ok(arc(Scatter::new(p.ty("type")?, idx(&p, "index_type")?)?))
        });
        c.add("gather", move |j, _| {
            let p = Params(j);
            Ok(arc(Gather::new(p.ty("type")?, idx(&p, "index_type")?)?))
        });
        c.add("select_indices", move |j, _| Ok(arc(SelectIndices::new(idx(&Params(j), "type")?)?)));
        c.add("transpose", move |j, _| {
            let p = Params(j);
            Ok(arc(Transpose::new(p.ty("type")?, idx(&p, "index_type")?)?))
        });
        c.add("replicate_segments", move |j, _| {
            let p = Params(j);
            Ok(arc(ReplicateSegments::new(p.ty("type")?, idx(&p, "index_type")?)?))
        });
        c.add("replicate_within_segments", move |j, _| {
            let p = Params(j);
            Ok(arc(ReplicateWithinSegments::new(p.ty("type")?, idx(&p, "index_type")?)?))
        });
        c.add("zip", |j, _| Ok(arc(Zip::new(Params(j).types("types")?)?)));
        c.add("unzip", |j, _| Ok(arc(Unzip::new(Params(j).types("types")?)?)));
        c.add("compose_segments", move |j, _| {
            let p = Params(j);
            Ok(arc(ComposeSegments::new(p.ty("type")?, p.u64("k")? as usize, idx(&p, "index_type")?)?))
        });
        c.add("assemble", move |j, _| {
            let p = Params(j);
            Ok(arc(Assemble::new(p.ty("type")?, p.u64("k")? as usize, idx(&p, "index_type")?)?))
        });
        c.add("derivative", |j, _| Ok(arc(Derivative::new(Params(j).ty("type")?)?)));
        c.add("prefix_aggregate", |j, _| {
            let p = Params(j);
            let op = Aggregate::from_str(p.get("op").and_then(|v| v.as_str()).unwrap_or("add"))?;
            Ok(arc(PrefixAggregate::new(p.ty("type")?, op, mode(&p)?)?))
        });
        c.add("reduce", |j, _| {
            let p = Params(j);
            let op = Aggregate::from_str(p.get("op").and_then(|v| v.as_str()).unwrap_or("add"))?;
            Ok(arc(Reduce::new(p.ty("type")?, op)?))
        });
        c.add("is_same_as_previous", |j, _| Ok(arc(IsSameAsPrevious::new(Params(j).ty("type")?))));
        c.add("split_first", |j, _| Ok(arc(SplitFirst::new(Params(j).ty("type")?))));
        c.add("carve", |j, _| {
            let p = Params(j);
            Ok(arc(Carve::new(p.ty_or("type", ElementType::U64)?, p.u64("w")? as u8, p.u64("p")? as u8)?))
        });
        c.add("elementwise", |j, _| Ok(arc(Elementwise::from_params(j)?)));
        c.add("segmentize", |j, cat| Ok(arc(SegmentizeOp::from_params(j, cat)?)));
        c.add("verify", |j, _| Ok(arc(VerifyOp::from_params(j)?)));
        c
    }

    /// The shared standard catalog.
    pub fn global() -> &'static Catalog {
        static CATALOG: OnceLock<Catalog> = OnceLock::new();
        CATALOG.get_or_init(Catalog::standard)
    }

    fn add(&mut self, name: &str, f: impl Fn(&Json, &Catalog) -> Result<OpRef, CatalogError> + Send + Sync + 'static) {
        self.factories.insert(name.to_string(), Arc::new(f));
    }

    /// Registers a new operator factory; names must be unused.
    pub fn register(&mut self, name: &str, f: Factory) -> Result<(), CatalogError> {
        if self.contains(name) {
            return Err(CatalogError::NameCollision(name.to_string()));
        }
        self.factories.insert(name.to_string(), f);
        Ok(())
    }

    /// Registers a fused operator under its own name.
    pub fn register_composite(&self, op: FusedOp) -> Result<(), CatalogError> {
        use super::Operator;
        let name = op.name().to_string();
        if self.factories.contains_key(&name) {
            return Err(CatalogError::NameCollision(name));
        }
        let mut comps = self.composites.write().unwrap();
        if comps.contains_key(&name) {
            return Err(CatalogError::NameCollision(name));
        }
        comps.insert(name, op);
        Ok(())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name) || self.composites.read().unwrap().contains_key(name)
    }

    pub fn names(&self) -> Vec<String> {
        let mut v: Vec<String> = self.factories.keys().cloned().collect();
        v.extend(self.composites.read().unwrap().keys().cloned());
        v
    }

    /// Instantiates an operator. Names not in the catalog build a fused operator when the
    /// parameters carry its circuit, so fused circuits stay loadable from files.
    pub fn build(&self, name: &str, params: &Json) -> Result<OpRef, CatalogError> {
        if let Some(f) = self.factories.get(name) {
            return f(params, self);
        }
        if let Some(op) = self.composites.read().unwrap().get(name) {
            return Ok(Arc::new(op.clone()));
        }
        if let Some(cj) = params.get("circuit") {
            let inner = Circuit::from_json(cj, self).map_err(|e| CatalogError::BadParams(e.to_string()))?;
            return Ok(Arc::new(FusedOp::new(name, inner)));
        }
        Err(CatalogError::UnknownOperator(name.to_string()))
    }
}

impl Default for Catalog {
    fn default() -> Self {
        Catalog::standard()
    }
}
