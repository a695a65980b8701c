//! Generic scheme composition: patching, segmentization, alternation, elementwise
//! addition, differentiation and small-dictionary fitting over inner column schemes.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::Rng;
use serde_json::{json, Value as Json};

use super::scheme::{self, by_frequency, col_values, index_ty, int_values, typed, u64_col};
use super::{ensure, get, not_encodable, with, Codec, CodecError, CodecRef, SchemeInstance};
use crate::circuit::{Builder, Circuit};
use crate::column::{Column, ElementType, Value};
use crate::ops::{segment_label, ElementwiseFn, Ports, SegmentizeOp};
use crate::transform::{assign_input, union_tagged};

/// Feeds `outer`'s input `outer_input` from `inner`'s output `inner_output`, hiding the latter.
pub(crate) fn attach(
    outer: &Circuit,
    outer_input: &str,
    inner: &Circuit,
    inner_output: &str,
) -> Result<Circuit, CodecError> {
    let u = union_tagged(outer, inner);
    let out_label = u
        .label_map
        .get(inner_output)
        .cloned()
        .ok_or_else(|| CodecError::Build(format!("inner lacks `{inner_output}`")))?;
    let src = u.circuit.interface[&out_label].clone();
    let mut c = assign_input(&u.circuit, outer_input, &src).map_err(|e| CodecError::Build(e.to_string()))?;
    c.signature.outputs.remove(&out_label);
    c.interface.remove(&out_label);
    Ok(c)
}

/// Inner decoder with its input labels prefixed `prefix.`; it must decode a single `column`.
fn inner_decoder(codec: &CodecRef, params: &Json, prefix: &str) -> Result<Circuit, CodecError> {
    let c = codec.decoder(params)?;
    if c.signature.outputs.len() != 1 || !c.signature.outputs.contains_key("column") {
        return Err(CodecError::Incompatible(format!("{} does not decode a single column", codec.id())));
    }
    let map: BTreeMap<String, String> =
        c.signature.inputs.keys().map(|l| (l.clone(), format!("{prefix}.{l}"))).collect();
    Ok(c.relabel(&map))
}

fn column_type(codec: &CodecRef, params: &Json) -> Result<ElementType, CodecError> {
    Ok(codec
        .decoder(params)?
        .signature
        .outputs
        .get("column")
        .cloned()
        .ok_or_else(|| CodecError::Incompatible(codec.id()))?)
}

fn part(enc: &Ports, prefix: &str) -> Ports {
    let p = format!("{prefix}.");
    enc.iter().filter_map(|(l, c)| l.strip_prefix(&p).map(|s| (s.to_string(), c.clone()))).collect()
}

fn put(into: &mut Ports, prefix: &str, cols: Ports) {
    for (l, c) in cols {
        into.insert(format!("{prefix}.{l}"), c);
    }
}

fn sub_params<'a>(params: &'a Json, key: &str) -> Json {
    params.get(key).cloned().unwrap_or(json!({}))
}

fn the_column(p: &Ports) -> Result<&Column, CodecError> {
    super::input(p, "column")
}

fn single_column(c: Column) -> Ports {
    super::single("column", c)
}

fn decode_part(codec: &CodecRef, params: &Json, cols: &Ports) -> Result<Column, String> {
    super::verify_with(&**codec, params, cols)?;
    let mut out =
        codec.decoder(params).map_err(|e| e.to_string())?.evaluate_sequential(cols).map_err(|e| e.to_string())?;
    out.remove("column").ok_or_else(|| "no column".to_string())
}

fn corrupt_part(codec: &CodecRef, params: &Json, enc: &Ports, prefix: &str, rng: &mut StdRng) -> Option<Ports> {
    let inner = SchemeInstance::new(codec.id(), params.clone(), part(enc, prefix));
    let bad = codec.corrupt(&inner, rng)?;
    let mut out: Ports = enc
        .iter()
        .filter(|(l, _)| !l.starts_with(&format!("{prefix}.")))
        .map(|(l, c)| (l.clone(), c.clone()))
        .collect();
    put(&mut out, prefix, bad.columns);
    Some(out)
}

// Patch

/// Base column decoded by the inner scheme, overlaid with a subcolumn of patches.
pub struct Patch {
    inner: CodecRef,
}

impl Patch {
    pub fn new(inner: CodecRef) -> Self {
        Patch { inner }
    }

    /// Base candidates for a column: the column itself, the inner scheme's approximation,
    /// central-range trims and the mode everywhere.
    fn candidates(&self, params: &Json, col: &Column) -> Vec<Column> {
        let mut out = vec![col.clone()];
        if let Some(a) = self.inner.approximate(&sub_params(params, "inner"), col, false) {
            out.push(a);
        }
        if let Some(v) = col.to_i128s() {
            let mut sorted = v.clone();
            sorted.sort_unstable();
            let n = sorted.len();
            if n > 0 {
                let median = sorted[n / 2];
                for q in [0.001, 0.01, 0.05, 0.1, 0.25] {
                    let k = ((n as f64) * q) as usize;
                    let (lo, hi) = (sorted[k], sorted[n - 1 - k]);
                    let base: Vec<i128> = v.iter().map(|x| if *x < lo || *x > hi { median } else { *x }).collect();
                    out.push(Column::from_i128(col.element_type().clone(), base).unwrap());
                }
            }
        }
        if let Some((mode, _)) = by_frequency(col).first() {
            out.push(Column::new(col.element_type().clone(), vec![mode.clone(); col.len()]).unwrap());
        }
        out
    }
}

impl Codec for Patch {
    fn id(&self) -> String {
        format!("patch({})", self.inner.id())
    }

    fn decoder(&self, params: &Json) -> Result<Circuit, CodecError> {
        let ip = sub_params(params, "inner");
        let inner = inner_decoder(&self.inner, &ip, "base")?;
        let t = column_type(&self.inner, &ip)?;
        let it = scheme::ty_or(params, "index_type", ElementType::U32)?;
        let mut b = Builder::new();
        let base = b.input("base_column", t.clone());
        let pos = b.input("patch_pos", it);
        let data = b.input("patch_data", t);
        let out = b.scatter(&base, &pos, &data);
        b.output("column", &out);
        attach(&b.finish()?, "base_column", &inner, "column")
    }

    fn check(&self, params: &Json, enc: &Ports) -> Result<(), String> {
        self.inner.check(&sub_params(params, "inner"), &part(enc, "base"))?;
        ensure(get(enc, "patch_pos")?.len() == get(enc, "patch_data")?.len(), || {
            "patch columns differ in length".into()
        })
    }

    fn encode(&self, params: &Json, dec: &Ports) -> Result<SchemeInstance, CodecError> {
        let col = the_column(dec)?;
        let t = super::decoded_type(params, col)?;
        let ip = typed(sub_params(params, "inner"), &t);
        let mut best: Option<SchemeInstance> = None;
        let mut last_err = None;
        for base in self.candidates(params, col) {
            let inner = match self.inner.encode(&ip, &single_column(base.clone())) {
                Ok(i) => i,
                Err(e) => {
                    last_err = Some(e);
                    continue;
                }
            };
            let at: Vec<usize> = (0..col.len()).filter(|&i| base.value(i) != col.value(i)).collect();
            let it = index_ty(params, "index_type", col.len() as u64)?;
            let mut cols = Ports::new();
            put(&mut cols, "base", inner.columns);
            cols.insert(
                "patch_pos".into(),
                super::index_column(&it, at.iter().map(|&i| i as u64).collect(), "patch_pos")?,
            );
            cols.insert("patch_data".into(), col.take(&at));
            let p = with(params, json!({"inner": inner.params, "type": t.to_string(), "index_type": it.to_string()}));
            let inst = SchemeInstance::new(self.id(), p, cols);
            if best.as_ref().is_none_or(|b| inst.size_bytes() < b.size_bytes()) {
                best = Some(inst);
            }
        }
        best.ok_or_else(|| last_err.unwrap_or_else(|| not_encodable("no base candidate")))
    }

    fn sample(&self, rng: &mut StdRng) -> (Json, Ports) {
        let (hints, dec) = self.inner.sample(rng);
        let col = dec["column"].clone();
        if col.is_empty() || col.to_i128s().is_none() {
            return (json!({"inner": hints}), dec);
        }
        let mut v = col.to_i128s().unwrap();
        let (lo, hi) = col.element_type().int_range().unwrap();
        for _ in 0..rng.random_range(0..=3) {
            let i = rng.random_range(0..v.len());
            v[i] = rng.random_range(lo.max(-(1 << 30))..=hi.min(1 << 30));
        }
        (json!({"inner": hints}), single_column(Column::from_i128(col.element_type().clone(), v).unwrap()))
    }

    fn corrupt(&self, inst: &SchemeInstance, rng: &mut StdRng) -> Option<SchemeInstance> {
        let cols = if rng.random_bool(0.5) && !inst.columns["patch_pos"].is_empty() {
            let n = Column::len(
                &decode_part(&self.inner, &sub_params(&inst.params, "inner"), &part(&inst.columns, "base")).ok()?,
            );
            scheme::with_col(&inst.columns, "patch_pos", scheme::set_at(&inst.columns["patch_pos"], 0, n as i128)?)
        } else {
            corrupt_part(&self.inner, &sub_params(&inst.params, "inner"), &inst.columns, "base", rng)?
        };
        Some(SchemeInstance::new(inst.scheme.clone(), inst.params.clone(), cols))
    }
}

// Segmentize and alternate

/// Inner schemes applied separately to consecutive segments. Uniform segmentation uses a
/// fixed segment length (with a choice among alternatives per segment); variable
/// segmentation grows each segment greedily as far as the inner scheme can encode it.
pub struct Segmentize {
    alts: Vec<CodecRef>,
    uniform: bool,
    alternate: bool,
}

/// Alternation between several schemes over uniform segments.
pub struct Alternate;

impl Alternate {
    #[allow(clippy::new_ret_no_self)]
    pub fn new(alts: Vec<CodecRef>) -> Result<Segmentize, CodecError> {
        if alts.len() < 2 {
            return Err(CodecError::Incompatible("alternate needs at least two schemes".into()));
        }
        let mut s = Segmentize::uniform(alts)?;
        s.alternate = true;
        Ok(s)
    }
}

const DEFAULT_SEGMENT: u64 = 64;

impl Segmentize {
    pub fn uniform(alts: Vec<CodecRef>) -> Result<Self, CodecError> {
        if alts.is_empty() || alts.len() > 256 {
            return Err(CodecError::Incompatible("segmentize needs 1 to 256 inner schemes".into()));
        }
        Ok(Segmentize { alts, uniform: true, alternate: false })
    }

    pub fn variable(inner: CodecRef) -> Self {
        Segmentize { alts: vec![inner], uniform: false, alternate: false }
    }

    fn alt_params(&self, params: &Json, i: usize) -> Json {
        match params.get("inners").and_then(|a| a.as_array()) {
            Some(a) => a.get(i).cloned().unwrap_or(json!({})),
            None => sub_params(params, "inner"),
        }
    }

    fn params_with(&self, params: &Json, alts: Vec<Json>) -> Json {
        if self.alts.len() == 1 {
            with(params, json!({"inner": alts[0]}))
        } else {
            with(params, json!({"inners": alts}))
        }
    }

    fn op(&self, params: &Json) -> Result<SegmentizeOp, CodecError> {
        let inners = (0..self.alts.len())
            .map(|i| self.alts[i].decoder(&self.alt_params(params, i)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SegmentizeOp::new(inners)?)
    }

    /// Completed inner parameters, pinned from the whole column or else its first elements.
    fn pin(&self, i: usize, params: &Json, col: &Column, first: usize) -> Option<Json> {
        let p = typed(self.alt_params(params, i), col.element_type());
        let whole = self.alts[i].encode(&p, &single_column(col.clone()));
        match whole {
            Ok(inst) => Some(inst.params),
            Err(_) => {
                let head = col.slice(0, first.min(col.len()));
                self.alts[i].encode(&p, &single_column(head)).ok().map(|inst| inst.params)
            }
        }
    }

    fn encode_segment(&self, i: usize, pinned: &Json, seg: &Column) -> Option<SchemeInstance> {
        let inst = self.alts[i].encode(pinned, &single_column(seg.clone())).ok()?;
        (inst.params == *pinned).then_some(inst)
    }
}

impl Codec for Segmentize {
    fn id(&self) -> String {
        let names: Vec<String> = self.alts.iter().map(|a| a.id()).collect();
        let kind = match (self.alternate, self.uniform) {
            (true, _) => "alternate",
            (false, true) => "segmentize_uniform",
            (false, false) => "segmentize_variable",
        };
        format!("{kind}({})", names.join(","))
    }

    fn decoder(&self, params: &Json) -> Result<Circuit, CodecError> {
        let op = self.op(params)?;
        let mut b = Builder::new();
        let sig = crate::ops::Operator::signature(&op).clone();
        let wires: Vec<(String, crate::circuit::Wire)> =
            sig.inputs.iter().map(|(l, t)| (l.clone(), b.input(l, t.clone()))).collect();
        let ins: Vec<(&str, &crate::circuit::Wire)> = wires.iter().map(|(l, w)| (l.as_str(), w)).collect();
        let out = b.add(Arc::new(op), &ins);
        if self.uniform {
            b.input("segment_length", ElementType::U64);
        }
        b.output("column", &out["column"]);
        Ok(b.finish()?)
    }

    fn check(&self, params: &Json, enc: &Ports) -> Result<(), String> {
        let op = self.op(params).map_err(|e| e.to_string())?;
        let segs = op.split(enc).map_err(|e| e.to_string())?;
        let l = if self.uniform {
            let l = super::scalar(enc, "segment_length")?;
            ensure(l > 0, || "segment length must be positive".into())?;
            Some(l as usize)
        } else {
            None
        };
        let count = segs.len();
        for (s, (i, cols)) in segs.into_iter().enumerate() {
            let p = self.alt_params(params, i);
            let col = decode_part(&self.alts[i], &p, &cols).map_err(|e| format!("segment {s}: {e}"))?;
            if let Some(l) = l {
                let ok = if s + 1 < count { col.len() == l } else { (1..=l).contains(&col.len()) };
                ensure(ok, || format!("segment {s} decodes to {} elements, segment length is {l}", col.len()))?;
            } else {
                ensure(!col.is_empty(), || format!("segment {s} is empty"))?;
            }
        }
        Ok(())
    }

    fn encode(&self, params: &Json, dec: &Ports) -> Result<SchemeInstance, CodecError> {
        let col = the_column(dec)?;
        let t = super::decoded_type(params, col)?;
        let l = scheme::num_or(params, "segment_length", DEFAULT_SEGMENT)?.max(1) as usize;
        let k = self.alts.len();
        let first = if self.uniform { l } else { 1 };
        let pinned: Vec<Option<Json>> = (0..k).map(|i| self.pin(i, params, col, first)).collect();
        if pinned.iter().all(|p| p.is_none()) {
            return Err(not_encodable(format!("no inner scheme of {} encodes the first segment", self.id())));
        }
        let mut chosen: Vec<(usize, SchemeInstance)> = Vec::new();
        let mut at = 0;
        while at < col.len() {
            if self.uniform {
                let seg = col.slice(at, (at + l).min(col.len()));
                let best = (0..k)
                    .filter_map(|i| Some((i, self.encode_segment(i, pinned[i].as_ref()?, &seg)?)))
                    .min_by_key(|(_, inst)| inst.size_bytes())
                    .ok_or_else(|| not_encodable(format!("segment at {at} fits no inner scheme")))?;
                chosen.push(best);
                at += seg.len();
            } else {
                let p = pinned[0].as_ref().unwrap();
                let fits = |len: usize| self.encode_segment(0, p, &col.slice(at, at + len));
                let rest = col.len() - at;
                let mut good = fits(1).ok_or_else(|| not_encodable(format!("element {at} fits no segment")))?;
                let (mut lo, mut hi) = (1usize, None);
                let mut step = 2usize;
                while hi.is_none() && lo < rest {
                    let len = step.min(rest);
                    match fits(len) {
                        Some(inst) => {
                            good = inst;
                            lo = len;
                            step *= 2;
                        }
                        None => hi = Some(len),
                    }
                }
                if let Some(mut hi) = hi {
                    while hi - lo > 1 {
                        let mid = (lo + hi) / 2;
                        match fits(mid) {
                            Some(inst) => {
                                good = inst;
                                lo = mid;
                            }
                            None => hi = mid,
                        }
                    }
                }
                chosen.push((0, good));
                at += lo;
            }
        }
        let alt_params: Vec<Json> = (0..k)
            .map(|i| match &pinned[i] {
                Some(p) => p.clone(),
                None => typed(self.alt_params(params, i), &t),
            })
            .collect();
        let labels: Vec<Vec<(String, ElementType)>> = (0..k)
            .map(|i| self.alts[i].decoder(&alt_params[i]).map(|d| d.signature.inputs.into_iter().collect()))
            .collect::<Result<_, _>>()?;
        let mut cols = Ports::new();
        for (i, labels) in labels.iter().enumerate() {
            for (lab, lt) in labels {
                let parts: Vec<&Column> =
                    chosen.iter().filter(|(a, _)| *a == i).map(|(_, inst)| &inst.columns[lab]).collect();
                let lens: Vec<u64> = parts.iter().map(|c| c.len() as u64).collect();
                cols.insert(segment_label(k, i, lab), Column::concat(&parts, lt)?);
                cols.insert(segment_label(k, i, &format!("{lab}_len")), Column::u64s(lens));
            }
        }
        if k > 1 {
            cols.insert("choice".into(), u64_col(&ElementType::U8, chosen.iter().map(|(i, _)| *i as u64).collect()));
        }
        let mut p = self.params_with(params, alt_params);
        p = with(&p, json!({"type": t.to_string()}));
        if self.uniform {
            cols.insert("segment_length".into(), Column::scalar_u64(l as u64));
            p = with(&p, json!({"segment_length": l}));
        }
        Ok(SchemeInstance::new(self.id(), p, cols))
    }

    fn sample(&self, rng: &mut StdRng) -> (Json, Ports) {
        let (h0, d0) = self.alts[0].sample(rng);
        let mut col = d0["column"].clone();
        let mut hints = vec![h0];
        for a in &self.alts[1..] {
            let (h, d) = a.sample(rng);
            if d["column"].element_type() == col.element_type() {
                col = Column::concat(&[&col, &d["column"]], &col.element_type().clone()).unwrap();
            }
            hints.push(h);
        }
        let mut p = self.params_with(&json!({}), hints);
        if self.uniform {
            p = with(&p, json!({"segment_length": rng.random_range(1..=16)}));
        }
        (p, single_column(col))
    }

    fn corrupt(&self, inst: &SchemeInstance, rng: &mut StdRng) -> Option<SchemeInstance> {
        let lens: Vec<&String> = inst.columns.keys().filter(|l| l.ends_with("_len")).collect();
        let cols = if self.uniform && rng.random_bool(0.3) {
            let l = inst.columns["segment_length"].value(0).as_u64()?;
            scheme::with_col(&inst.columns, "segment_length", Column::scalar_u64(l + 1 + rng.random_range(0..3)))
        } else {
            let lab = lens[rng.random_range(0..lens.len())].clone();
            let c = &inst.columns[&lab];
            scheme::with_col(&inst.columns, &lab, scheme::tweak(c, rng, |x| x + 1)?)
        };
        Some(SchemeInstance::new(inst.scheme.clone(), inst.params.clone(), cols))
    }
}

// Elementwise addition

/// Sum of two inner decodings: a model part and a residual part.
pub struct ElementwiseAdd {
    a: CodecRef,
    b: CodecRef,
}

impl ElementwiseAdd {
    pub fn new(a: CodecRef, b: CodecRef) -> Self {
        ElementwiseAdd { a, b }
    }
}

impl Codec for ElementwiseAdd {
    fn id(&self) -> String {
        format!("elementwise_add({},{})", self.a.id(), self.b.id())
    }

    fn decoder(&self, params: &Json) -> Result<Circuit, CodecError> {
        let (pa, pb) = (sub_params(params, "a"), sub_params(params, "b"));
        let (da, db) = (inner_decoder(&self.a, &pa, "a")?, inner_decoder(&self.b, &pb, "b")?);
        let t = column_type(&self.a, &pa)?;
        if column_type(&self.b, &pb)? != t || !t.is_numeric() {
            return Err(CodecError::Incompatible("elementwise_add needs equal numeric decoded types".into()));
        }
        let mut b = Builder::new();
        let x = b.input("lhs_column", t.clone());
        let y = b.input("rhs_column", t);
        let s = b.binary(ElementwiseFn::Add, &x, &y);
        b.output("column", &s);
        let c = attach(&b.finish()?, "lhs_column", &da, "column")?;
        attach(&c, "rhs_column", &db, "column")
    }

    fn check(&self, params: &Json, enc: &Ports) -> Result<(), String> {
        self.a.check(&sub_params(params, "a"), &part(enc, "a"))?;
        self.b.check(&sub_params(params, "b"), &part(enc, "b"))
    }

    fn encode(&self, params: &Json, dec: &Ports) -> Result<SchemeInstance, CodecError> {
        let col = the_column(dec)?;
        let t = super::decoded_type(params, col)?;
        let pa = typed(sub_params(params, "a"), &t);
        let model = self
            .a
            .approximate(&pa, col, t.is_unsigned())
            .ok_or_else(|| CodecError::Incompatible(format!("{} cannot approximate a column", self.a.id())))?;
        let ea = self.a.encode(&pa, &single_column(model.clone()))?;
        let resid = if let (Some(x), Some(m)) = (col.to_i128s(), model.to_i128s()) {
            scheme::col_i128(&t, x.iter().zip(&m).map(|(x, m)| x - m).collect(), "residual")?
        } else {
            let (x, m) = (col.as_f64().unwrap(), model.as_f64().unwrap());
            Column::from_f64s(t.clone(), x.iter().zip(m).map(|(x, m)| x - m).collect())?
        };
        let eb = self.b.encode(&typed(sub_params(params, "b"), &t), &single_column(resid))?;
        let mut cols = Ports::new();
        put(&mut cols, "a", ea.columns);
        put(&mut cols, "b", eb.columns);
        let p = with(params, json!({"a": ea.params, "b": eb.params, "type": t.to_string()}));
        let inst = SchemeInstance::new(self.id(), p, cols);
        let back = super::verify_with(self, &inst.params, &inst.columns).and_then(|_| {
            self.decoder(&inst.params).map_err(|e| e.to_string())?.evaluate(&inst.columns).map_err(|e| e.to_string())
        });
        match back {
            Ok(out) if out["column"] == *col => Ok(inst),
            Ok(_) => Err(not_encodable("floating-point residual does not reproduce the column")),
            Err(e) => Err(not_encodable(e)),
        }
    }

    fn sample(&self, rng: &mut StdRng) -> (Json, Ports) {
        let (ha, da) = self.a.sample(rng);
        let col = &da["column"];
        let out = match col.to_i128s() {
            Some(v) => {
                let t = col.element_type();
                let (_, hi) = t.int_range().unwrap();
                let noisy: Vec<i128> = v.iter().map(|x| (x + rng.random_range(0..4)).min(hi)).collect();
                Column::from_i128(t.clone(), noisy).unwrap()
            }
            None => col.clone(),
        };
        (json!({"a": ha}), single_column(out))
    }

    fn corrupt(&self, inst: &SchemeInstance, rng: &mut StdRng) -> Option<SchemeInstance> {
        let (key, codec) = if rng.random_bool(0.5) { ("a", &self.a) } else { ("b", &self.b) };
        let cols = corrupt_part(codec, &sub_params(&inst.params, key), &inst.columns, key, rng)?;
        Some(SchemeInstance::new(inst.scheme.clone(), inst.params.clone(), cols))
    }
}

// Differentiation

/// The first element plus the differences of consecutive elements, encoded by the inner
/// scheme as a signed 64-bit column; decoding integrates.
pub struct Differentiate {
    inner: CodecRef,
}

impl Differentiate {
    pub fn new(inner: CodecRef) -> Self {
        Differentiate { inner }
    }
}

impl Codec for Differentiate {
    fn id(&self) -> String {
        format!("differentiate({})", self.inner.id())
    }

    fn decoder(&self, params: &Json) -> Result<Circuit, CodecError> {
        let ip = sub_params(params, "inner");
        let inner = inner_decoder(&self.inner, &ip, "d")?;
        if column_type(&self.inner, &ip)? != ElementType::I64 {
            return Err(CodecError::Incompatible("differences must decode as i64".into()));
        }
        let t = scheme::ty(params, "type")?;
        let mut b = Builder::new();
        let first = b.input("first", t.clone());
        let d = b.input("differences", ElementType::I64);
        let f = b.cast(&first, &ElementType::I64);
        let nd = b.length(&d);
        let z = b.zeros(&ElementType::U64, &nd);
        let fb = b.gather(&z, &f);
        let sums = b.prefix(&d, crate::ops::Aggregate::Add, crate::ops::AggregateMode::Inclusive);
        let tail = b.binary(ElementwiseFn::Add, &sums, &fb);
        let all = b.concat(&[&f, &tail]);
        let out = b.cast(&all, &t);
        b.output("column", &out);
        attach(&b.finish()?, "differences", &inner, "column")
    }

    fn check(&self, params: &Json, enc: &Ports) -> Result<(), String> {
        ensure(get(enc, "first")?.len() <= 1, || "`first` holds at most one element".into())?;
        self.inner.check(&sub_params(params, "inner"), &part(enc, "d"))
    }

    fn encode(&self, params: &Json, dec: &Ports) -> Result<SchemeInstance, CodecError> {
        let col = the_column(dec)?;
        let t = super::decoded_type(params, col)?;
        let v = int_values(col)?;
        let d: Vec<i128> = v.windows(2).map(|w| w[1] - w[0]).collect();
        let dc = scheme::col_i128(&ElementType::I64, d, "differences")?;
        let inner = self.inner.encode(&typed(sub_params(params, "inner"), &ElementType::I64), &single_column(dc))?;
        let mut cols = Ports::new();
        cols.insert("first".into(), col.slice(0, col.len().min(1)));
        put(&mut cols, "d", inner.columns);
        let p = with(params, json!({"inner": inner.params, "type": t.to_string()}));
        Ok(SchemeInstance::new(self.id(), p, cols))
    }

    fn sample(&self, rng: &mut StdRng) -> (Json, Ports) {
        let (h, d) = self.inner.sample(rng);
        let steps = d["column"].to_i128s().unwrap_or_default();
        let mut x = rng.random_range(-1000i128..1000);
        let mut out = Vec::with_capacity(steps.len() + 1);
        if !steps.is_empty() || rng.random_bool(0.8) {
            out.push(x);
        }
        for s in steps {
            x += s;
            out.push(x);
        }
        (json!({"inner": h}), single_column(Column::from_i128(ElementType::I64, out).unwrap()))
    }

    fn corrupt(&self, inst: &SchemeInstance, rng: &mut StdRng) -> Option<SchemeInstance> {
        let cols = if rng.random_bool(0.3) {
            let f = &inst.columns["first"];
            let two = Column::concat(
                &[f, f, &Column::new(f.element_type().clone(), vec![scheme::zero_of(f.element_type())]).ok()?],
                f.element_type(),
            )
            .ok()?;
            scheme::with_col(&inst.columns, "first", two)
        } else {
            corrupt_part(&self.inner, &sub_params(&inst.params, "inner"), &inst.columns, "d", rng)?
        };
        Some(SchemeInstance::new(inst.scheme.clone(), inst.params.clone(), cols))
    }
}

// Small-dictionary fitting

/// The most frequent values go to a short dictionary; index 0 defers an element to the
/// residual column, which the inner scheme encodes.
pub struct SmallDictFit {
    inner: CodecRef,
}

impl SmallDictFit {
    pub fn new(inner: CodecRef) -> Self {
        SmallDictFit { inner }
    }
}

/// Splits a column into a dictionary of its `size` most frequent values, 1-based indices
/// (0 for the rest) and the residual elements in order.
pub(crate) fn fit_small_dictionary(col: &Column, size: usize) -> (Vec<Value>, Vec<u64>, Vec<usize>) {
    let dict: Vec<Value> = by_frequency(col).into_iter().take(size).map(|(v, _)| v).collect();
    let at: BTreeMap<&Value, u64> = dict.iter().enumerate().map(|(i, v)| (v, i as u64 + 1)).collect();
    let mut idx = Vec::with_capacity(col.len());
    let mut rest = Vec::new();
    for (i, v) in col.iter().enumerate() {
        let k = at.get(&v).copied().unwrap_or(0);
        if k == 0 {
            rest.push(i);
        }
        idx.push(k);
    }
    (dict, idx, rest)
}

impl Codec for SmallDictFit {
    fn id(&self) -> String {
        format!("small_dict_fit({})", self.inner.id())
    }

    fn decoder(&self, params: &Json) -> Result<Circuit, CodecError> {
        let ip = sub_params(params, "inner");
        let inner = inner_decoder(&self.inner, &ip, "residual")?;
        let t = column_type(&self.inner, &ip)?;
        let it = scheme::ty_or(params, "index_type", ElementType::U8)?;
        let mut b = Builder::new();
        let dict = b.input("dictionary", t.clone());
        let idx = b.input("indices", it);
        let res = b.input("residual_column", t);
        let out = b.dict_with_residual(&dict, &idx, &res);
        b.output("column", &out);
        attach(&b.finish()?, "residual_column", &inner, "column")
    }

    fn check(&self, params: &Json, enc: &Ports) -> Result<(), String> {
        self.inner.check(&sub_params(params, "inner"), &part(enc, "residual"))
    }

    fn encode(&self, params: &Json, dec: &Ports) -> Result<SchemeInstance, CodecError> {
        let col = the_column(dec)?;
        let t = super::decoded_type(params, col)?;
        let it = scheme::ty_or(params, "index_type", ElementType::U8)?;
        let cap =
            (it.int_range().ok_or_else(|| CodecError::BadParams("index type must be an integer".into()))?.1) as usize;
        let size = scheme::num_or(params, "dict_size", 15)?.min(cap as u64) as usize;
        let (dict, idx, rest) = fit_small_dictionary(col, size);
        let inner = self.inner.encode(&typed(sub_params(params, "inner"), &t), &single_column(col.take(&rest)))?;
        let mut cols = Ports::new();
        cols.insert("dictionary".into(), col_values(&t, dict, "dictionary")?);
        cols.insert("indices".into(), super::index_column(&it, idx, "indices")?);
        put(&mut cols, "residual", inner.columns);
        let p = with(
            params,
            json!({"inner": inner.params, "type": t.to_string(), "index_type": it.to_string(), "dict_size": size}),
        );
        Ok(SchemeInstance::new(self.id(), p, cols))
    }

    fn sample(&self, rng: &mut StdRng) -> (Json, Ports) {
        let (h, d) = self.inner.sample(rng);
        let col = d["column"].clone();
        if col.is_empty() {
            return (json!({"inner": h}), d);
        }
        let extra: Vec<usize> = (0..col.len() * 2).map(|_| rng.random_range(0..col.len().min(3))).collect();
        let mixed = Column::concat(&[&col, &col.take(&extra)], &col.element_type().clone()).unwrap();
        (json!({"inner": h}), single_column(mixed))
    }

    fn corrupt(&self, inst: &SchemeInstance, rng: &mut StdRng) -> Option<SchemeInstance> {
        let d = inst.columns["dictionary"].len() as i128;
        let cols = if rng.random_bool(0.5) && !inst.columns["indices"].is_empty() {
            let c = &inst.columns["indices"];
            let (_, hi) = c.element_type().int_range()?;
            if d >= hi {
                return None;
            }
            scheme::with_col(&inst.columns, "indices", scheme::tweak(c, rng, |_| d + 1)?)
        } else {
            corrupt_part(&self.inner, &sub_params(&inst.params, "inner"), &inst.columns, "residual", rng)?
        };
        Some(SchemeInstance::new(inst.scheme.clone(), inst.params.clone(), cols))
    }
}
