//! Host procedures packaged as single operators: scheme verification and per-segment decoding.

use std::sync::Arc;

use rayon::prelude::*;
use serde_json::{json, Value as Json};

use super::{port, Catalog, CatalogError, OpError, Operator, Ports};
use crate::circuit::{Circuit, Signature};
use crate::codec::{self, CodecRef};
use crate::column::{Column, ElementType};

/// Decides whether its inputs form a valid encoded form of a scheme. Output `accept` is a
/// single bit.
pub struct VerifyOp {
    scheme: String,
    params: Json,
    codec: CodecRef,
    sig: Signature,
}

impl std::fmt::Debug for VerifyOp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "VerifyOp({})", self.scheme)
    }
}

impl VerifyOp {
    pub fn new(scheme: &str, params: Json) -> Result<Self, CatalogError> {
        let codec = codec::resolve(scheme).map_err(|e| CatalogError::BadParams(e.to_string()))?;
        let dec = codec.decoder(&params).map_err(|e| CatalogError::BadParams(e.to_string()))?;
        let mut sig = Signature::new().with_output("accept", ElementType::Bit);
        sig.inputs = dec.signature.inputs.clone();
        Ok(VerifyOp { scheme: scheme.to_string(), params, codec, sig })
    }

    pub fn from_params(j: &Json) -> Result<Self, CatalogError> {
        let scheme = super::Params(j).str("scheme")?.to_string();
        VerifyOp::new(&scheme, j.get("params").cloned().unwrap_or(json!({})))
    }
}

impl Operator for VerifyOp {
    fn name(&self) -> &str {
        "verify"
    }
    fn params(&self) -> Json {
        json!({"scheme": self.scheme, "params": self.params})
    }
    fn signature(&self) -> &Signature {
        &self.sig
    }
    fn apply(&self, inputs: &Ports) -> Result<Ports, OpError> {
        let ok = codec::verify_with(&*self.codec, &self.params, inputs).is_ok();
        Ok(super::one("accept", Column::bools(&[ok])))
    }
}

/// Decodes a segmentized encoded form: every inner label `L` arrives concatenated over the
/// segments, with `L_len` giving each segment's share. With several alternatives, a `choice`
/// column picks the inner decoder per segment and labels read `alt<i>.L`.
pub struct SegmentizeOp {
    inners: Vec<Arc<Circuit>>,
    sig: Signature,
}

impl std::fmt::Debug for SegmentizeOp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SegmentizeOp({} alternatives)", self.inners.len())
    }
}

/// Label of inner input `l` of alternative `i` when there are `k` alternatives.
pub fn segment_label(k: usize, i: usize, l: &str) -> String {
    if k == 1 {
        l.to_string()
    } else {
        format!("alt{i}.{l}")
    }
}

impl SegmentizeOp {
    pub fn new(inners: Vec<Circuit>) -> Result<Self, CatalogError> {
        let bad = |m: String| CatalogError::BadParams(m);
        let first = inners.first().ok_or_else(|| bad("segmentize needs an inner decoder".into()))?;
        let out_ty = match first.signature.outputs.iter().collect::<Vec<_>>().as_slice() {
            [(l, t)] if l.as_str() == "column" => (*t).clone(),
            _ => return Err(bad("inner decoders must have the single output `column`".into())),
        };
        let k = inners.len();
        let mut sig = Signature::new().with_output("column", out_ty.clone());
        if k > 1 {
            sig = sig.with_input("choice", ElementType::U8);
        }
        for (i, c) in inners.iter().enumerate() {
            if c.signature.outputs.get("column") != Some(&out_ty) || c.signature.outputs.len() != 1 {
                return Err(bad("alternatives must decode to the same column type".into()));
            }
            if c.signature.inputs.is_empty() {
                return Err(bad("inner decoders need at least one input".into()));
            }
            for (l, t) in &c.signature.inputs {
                sig = sig
                    .with_input(segment_label(k, i, l), t.clone())
                    .with_input(segment_label(k, i, &format!("{l}_len")), ElementType::U64);
            }
        }
        if k > 256 {
            return Err(bad("at most 256 alternatives".into()));
        }
        Ok(SegmentizeOp { inners: inners.into_iter().map(Arc::new).collect(), sig })
    }

    pub fn from_params(j: &Json, cat: &Catalog) -> Result<Self, CatalogError> {
        let arr = j
            .get("inners")
            .and_then(|v| v.as_array())
            .ok_or_else(|| CatalogError::BadParams("segmentize needs `inners`".into()))?;
        let inners = arr
            .iter()
            .map(|c| Circuit::from_json(c, cat).map_err(|e| CatalogError::BadParams(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        SegmentizeOp::new(inners)
    }

    pub fn alternatives(&self) -> usize {
        self.inners.len()
    }

    /// Splits the encoded columns into per-segment families: `(alternative, inputs)`.
    pub fn split(&self, inputs: &Ports) -> Result<Vec<(usize, Ports)>, OpError> {
        let k = self.inners.len();
        let choice: Vec<usize> = if k > 1 {
            super::index_of(port(inputs, "choice")?, "choice")?
        } else {
            let (l, _) = self.inners[0].signature.inputs.iter().next().unwrap();
            vec![0; port(inputs, &format!("{l}_len"))?.len()]
        };
        let mut cursors: Vec<Vec<(String, Vec<usize>, usize)>> = Vec::with_capacity(k);
        for (i, c) in self.inners.iter().enumerate() {
            let count = choice.iter().filter(|x| **x == i).count();
            let mut labels = Vec::new();
            for l in c.signature.inputs.keys() {
                let lens = super::index_of(port(inputs, &segment_label(k, i, &format!("{l}_len")))?, "lengths")?;
                if lens.len() != count {
                    return Err(OpError::LengthMismatch(format!(
                        "`{l}_len` has {} entries for {count} segments",
                        lens.len()
                    )));
                }
                let total: usize = lens.iter().try_fold(0usize, |a, b| a.checked_add(*b)).unwrap_or(usize::MAX);
                let data = port(inputs, &segment_label(k, i, l))?;
                if total != data.len() {
                    return Err(OpError::LengthMismatch(format!(
                        "`{l}` has {} elements, lengths sum to {total}",
                        data.len()
                    )));
                }
                labels.push((l.clone(), lens, 0));
            }
            cursors.push(labels);
        }
        if let Some(bad) = choice.iter().find(|c| **c >= k) {
            return Err(OpError::OutOfRange(format!("choice {bad} with {k} alternatives")));
        }
        let mut seen = vec![0usize; k];
        let mut out = Vec::with_capacity(choice.len());
        for &i in &choice {
            let j = seen[i];
            seen[i] += 1;
            let mut seg = Ports::new();
            for (l, lens, offset) in cursors[i].iter_mut() {
                let data = port(inputs, &segment_label(k, i, l))?;
                seg.insert(l.clone(), data.slice(*offset, *offset + lens[j]));
                *offset += lens[j];
            }
            out.push((i, seg));
        }
        Ok(out)
    }
}

impl Operator for SegmentizeOp {
    fn name(&self) -> &str {
        "segmentize"
    }
    fn params(&self) -> Json {
        json!({"inners": self.inners.iter().map(|c| c.to_json()).collect::<Vec<_>>()})
    }
    fn signature(&self) -> &Signature {
        &self.sig
    }
    fn apply(&self, inputs: &Ports) -> Result<Ports, OpError> {
        let segs = self.split(inputs)?;
        let parts = segs
            .par_iter()
            .enumerate()
            .map(|(s, (i, p))| {
                self.inners[*i]
                    .evaluate_sequential(p)
                    .map(|mut o| o.remove("column").unwrap())
                    .map_err(|e| OpError::Inner(format!("segment {s}: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let ty = self.sig.outputs["column"].clone();
        let refs: Vec<&Column> = parts.iter().collect();
        Ok(super::one("column", Column::concat(&refs, &ty)?))
    }
    fn dedup_key(&self) -> Option<String> {
        None
    }
}
