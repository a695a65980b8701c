//! A codec assembled from plain functions, used by every builtin scheme.

use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::Rng;
use serde_json::{json, Value as Json};

use super::{Codec, CodecError, SchemeInstance};
use crate::circuit::Circuit;
use crate::column::{Column, ElementType, Value};
use crate::ops::{Params, Ports};

pub(crate) type DecoderFn = fn(&Json) -> Result<Circuit, CodecError>;
pub(crate) type CheckFn = fn(&Json, &Ports) -> Result<(), String>;
pub(crate) type EncodeFn = fn(&Json, &Ports) -> Result<(Json, Ports), CodecError>;
pub(crate) type CanonFn = fn(&Json, &Ports) -> Ports;
pub(crate) type SampleFn = fn(&mut StdRng) -> (Json, Ports);
pub(crate) type CorruptFn = fn(&Json, &Ports, &mut StdRng) -> Option<Ports>;
pub(crate) type ApproxFn = fn(&Json, &Column, bool) -> Option<Column>;

pub(crate) struct FnScheme {
    pub id: &'static str,
    pub decoder: DecoderFn,
    pub check: CheckFn,
    pub encode: EncodeFn,
    pub canon: Option<CanonFn>,
    pub sample: SampleFn,
    pub corrupt: Option<CorruptFn>,
    pub approx: Option<ApproxFn>,
}

impl FnScheme {
    pub fn new(id: &'static str, decoder: DecoderFn, check: CheckFn, encode: EncodeFn, sample: SampleFn) -> Self {
        FnScheme { id, decoder, check, encode, canon: None, sample, corrupt: None, approx: None }
    }

    pub fn canon(mut self, f: CanonFn) -> Self {
        self.canon = Some(f);
        self
    }

    pub fn corrupt(mut self, f: CorruptFn) -> Self {
        self.corrupt = Some(f);
        self
    }

    pub fn approx(mut self, f: ApproxFn) -> Self {
        self.approx = Some(f);
        self
    }
}

impl Codec for FnScheme {
    fn id(&self) -> String {
        self.id.to_string()
    }
    fn decoder(&self, params: &Json) -> Result<Circuit, CodecError> {
        (self.decoder)(params)
    }
    fn check(&self, params: &Json, enc: &Ports) -> Result<(), String> {
        (self.check)(params, enc)
    }
    fn encode(&self, params: &Json, dec: &Ports) -> Result<SchemeInstance, CodecError> {
        let (p, cols) = (self.encode)(params, dec)?;
        Ok(SchemeInstance::new(self.id, p, cols))
    }
    fn canonicalize(&self, params: &Json, dec: &Ports) -> Ports {
        match self.canon {
            Some(f) => f(params, dec),
            None => dec.clone(),
        }
    }
    fn sample(&self, rng: &mut StdRng) -> (Json, Ports) {
        (self.sample)(rng)
    }
    fn corrupt(&self, inst: &SchemeInstance, rng: &mut StdRng) -> Option<SchemeInstance> {
        let f = self.corrupt?;
        let cols = f(&inst.params, &inst.columns, rng)?;
        Some(SchemeInstance::new(inst.scheme.clone(), inst.params.clone(), cols))
    }
    fn approximate(&self, params: &Json, col: &Column, below: bool) -> Option<Column> {
        self.approx.and_then(|f| f(params, col, below))
    }
}

// Parameter access.

pub(crate) fn ty(params: &Json, key: &str) -> Result<ElementType, CodecError> {
    Ok(Params(params).ty(key)?)
}

pub(crate) fn ty_or(params: &Json, key: &str, d: ElementType) -> Result<ElementType, CodecError> {
    Ok(Params(params).ty_or(key, d)?)
}

pub(crate) fn num(params: &Json, key: &str) -> Result<u64, CodecError> {
    Ok(Params(params).u64(key)?)
}

pub(crate) fn num_or(params: &Json, key: &str, d: u64) -> Result<u64, CodecError> {
    Ok(Params(params).u64_or(key, d)?)
}

/// The given type parameter if present, else `d`, as JSON-ready string.
pub(crate) fn pick_ty(params: &Json, key: &str, d: ElementType) -> Result<ElementType, CodecError> {
    ty_or(params, key, d)
}

/// The only column of a single-column family.
pub(crate) fn the_column(dec: &Ports) -> Result<&Column, CodecError> {
    super::input(dec, "column")
}

pub(crate) fn int_values(c: &Column) -> Result<Vec<i128>, CodecError> {
    c.to_i128s().ok_or_else(|| super::not_encodable(format!("{} is not an integer type", c.element_type())))
}

pub(crate) fn col_i128(ty: &ElementType, v: Vec<i128>, what: &str) -> Result<Column, CodecError> {
    Column::from_i128(ty.clone(), v).map_err(|e| super::not_encodable(format!("{what}: {e}")))
}

pub(crate) fn col_values(ty: &ElementType, v: Vec<Value>, what: &str) -> Result<Column, CodecError> {
    Column::new(ty.clone(), v).map_err(|e| super::not_encodable(format!("{what}: {e}")))
}

pub(crate) fn u64_col(ty: &ElementType, v: Vec<u64>) -> Column {
    Column::from_u64s(ty.clone(), v).expect("index column fits its type")
}

/// The minimal standard unsigned type for values up to `max`, unless `key` fixes it.
pub(crate) fn index_ty(params: &Json, key: &str, max: u64) -> Result<ElementType, CodecError> {
    pick_ty(params, key, ElementType::unsigned_for(max))
}

/// Checks that a type parameter, when present, matches the column's type.
pub(crate) fn column_ty(params: &Json, c: &Column) -> Result<ElementType, CodecError> {
    super::decoded_type(params, c)
}

pub(crate) fn zero_of(ty: &ElementType) -> Value {
    match ty {
        ElementType::Bit => Value::Bit(false),
        ElementType::Float(_) => Value::Float(0.0),
        ElementType::Int(_) => Value::Int(0),
        ElementType::Unit => Value::Unit,
        ElementType::Product(cs) => Value::Tuple(cs.iter().map(zero_of).collect()),
        _ => Value::UInt(0),
    }
}

/// Distinct values in order of first occurrence, and each element's entry.
pub(crate) fn first_fit(c: &Column) -> (Vec<Value>, Vec<u64>) {
    let mut at: BTreeMap<Value, u64> = BTreeMap::new();
    let mut dict = Vec::new();
    let idx = c
        .iter()
        .map(|v| {
            *at.entry(v.clone()).or_insert_with(|| {
                dict.push(v);
                dict.len() as u64 - 1
            })
        })
        .collect();
    (dict, idx)
}

/// Values by descending frequency, ties by value.
pub(crate) fn by_frequency(c: &Column) -> Vec<(Value, usize)> {
    let mut f: BTreeMap<Value, usize> = BTreeMap::new();
    for v in c.iter() {
        *f.entry(v).or_default() += 1;
    }
    let mut v: Vec<(Value, usize)> = f.into_iter().collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v
}

pub(crate) fn is_strictly_increasing<T: PartialOrd>(v: &[T]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

pub(crate) fn all_distinct<T: Ord + Clone>(v: &[T]) -> bool {
    let mut s = v.to_vec();
    s.sort();
    s.windows(2).all(|w| w[0] != w[1])
}

/// Exclusive prefix sums.
pub(crate) fn starts_of(lengths: &[u64]) -> Vec<u64> {
    let mut acc = 0u64;
    lengths
        .iter()
        .map(|l| {
            let s = acc;
            acc = acc.saturating_add(*l);
            s
        })
        .collect()
}

/// Maximal runs of equal values as `(value, length)`.
pub(crate) fn runs(c: &Column) -> Vec<(Value, u64)> {
    let mut out: Vec<(Value, u64)> = Vec::new();
    for v in c.iter() {
        match out.last_mut() {
            Some((last, n)) if *last == v => *n += 1,
            _ => out.push((v, 1)),
        }
    }
    out
}

pub(crate) fn json_types(ts: &[ElementType]) -> Json {
    Json::Array(ts.iter().map(super::ty_str).collect())
}

/// Applies `f` to a randomly chosen element of an integer column, keeping its type.
pub(crate) fn tweak(c: &Column, rng: &mut StdRng, f: impl Fn(i128) -> i128) -> Option<Column> {
    if c.is_empty() {
        return None;
    }
    let mut v = c.to_i128s()?;
    let i = rng.random_range(0..v.len());
    v[i] = f(v[i]);
    Column::from_i128(c.element_type().clone(), v).ok()
}

/// Sets element `i` of an integer column.
pub(crate) fn set_at(c: &Column, i: usize, x: i128) -> Option<Column> {
    let mut v = c.to_i128s()?;
    *v.get_mut(i)? = x;
    Column::from_i128(c.element_type().clone(), v).ok()
}

/// Drops the last element, or appends a copy of the first.
pub(crate) fn resize(c: &Column, rng: &mut StdRng) -> Option<Column> {
    if !c.is_empty() && rng.random_bool(0.5) {
        Some(c.slice(0, c.len() - 1))
    } else {
        let extra = if c.is_empty() {
            Column::new(c.element_type().clone(), vec![zero_of(c.element_type())]).ok()?
        } else {
            c.slice(0, 1)
        };
        Column::concat(&[c, &extra], c.element_type()).ok()
    }
}

/// Zeros in place of column `label`, in a type the decoder does not accept. For schemes
/// whose every well-typed form is valid, typing is the constraint left to violate.
pub(crate) fn mistyped(p: &Ports, label: &str) -> Option<Ports> {
    let c = p.get(label)?;
    let t = match c.element_type() {
        ElementType::Bit => ElementType::U8,
        ElementType::UInt(w) => ElementType::Int(*w),
        ElementType::Int(w) => ElementType::UInt(*w),
        _ => ElementType::I64,
    };
    Some(with_col(p, label, Column::from_i128(t, vec![0; c.len()]).ok()?))
}

pub(crate) fn with_col(p: &Ports, label: &str, c: Column) -> Ports {
    let mut out = p.clone();
    out.insert(label.to_string(), c);
    out
}

/// `{ "type": ty }` merged into `base`.
pub(crate) fn typed(base: Json, t: &ElementType) -> Json {
    super::with(&base, json!({"type": t.to_string()}))
}

pub(crate) mod rand_data {
    //! Random decoded families for the scheme samplers.

    use rand::rngs::StdRng;
    use rand::seq::SliceRandom;
    use rand::Rng;

    use crate::column::{Column, ElementType};

    pub const INT_TYPES: [ElementType; 6] =
        [ElementType::U8, ElementType::U16, ElementType::U32, ElementType::I8, ElementType::I32, ElementType::I64];

    pub fn int_type(rng: &mut StdRng) -> ElementType {
        INT_TYPES[rng.random_range(0..INT_TYPES.len())].clone()
    }

    pub fn len(rng: &mut StdRng, max: usize) -> usize {
        if rng.random_bool(0.05) {
            0
        } else {
            rng.random_range(1..=max)
        }
    }

    /// A value in `[lo, hi]` clipped to the type's range.
    pub fn int_in(rng: &mut StdRng, ty: &ElementType, lo: i128, hi: i128) -> i128 {
        let (tlo, thi) = ty.int_range().unwrap();
        let (lo, hi) = (lo.max(tlo), hi.min(thi));
        rng.random_range(lo..=hi)
    }

    pub fn ints(rng: &mut StdRng, ty: &ElementType, n: usize, lo: i128, hi: i128) -> Column {
        let v = (0..n).map(|_| int_in(rng, ty, lo, hi)).collect();
        Column::from_i128(ty.clone(), v).unwrap()
    }

    /// Uniform over the type's full range (or a wide window for 64-bit types).
    pub fn any_ints(rng: &mut StdRng, ty: &ElementType, n: usize) -> Column {
        let (lo, hi) = ty.int_range().unwrap();
        ints(rng, ty, n, lo.max(-(1 << 40)), hi.min(1 << 40))
    }

    /// Values drawn from a small random pool, so repetitions are common.
    pub fn pooled(rng: &mut StdRng, ty: &ElementType, n: usize, pool: usize) -> Column {
        let p = any_ints(rng, ty, pool.max(1));
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..p.len())).collect();
        p.take(&idx)
    }

    /// Runs of random lengths up to `max_run`.
    pub fn runs(rng: &mut StdRng, ty: &ElementType, n: usize, max_run: usize) -> Column {
        let mut v = Vec::with_capacity(n);
        let (lo, hi) = ty.int_range().unwrap();
        while v.len() < n {
            let x = rng.random_range(lo.max(-1000)..=hi.min(1000));
            let r = rng.random_range(1..=max_run).min(n - v.len());
            v.extend(std::iter::repeat_n(x, r));
        }
        Column::from_i128(ty.clone(), v).unwrap()
    }

    pub fn floats(rng: &mut StdRng, n: usize) -> Column {
        Column::from_f64s(ElementType::F64, (0..n).map(|_| (rng.random_range(-1000..1000) as f64) / 8.0).collect())
            .unwrap()
    }

    /// A column of a randomly chosen scalar type, including bits and floats.
    pub fn any_column(rng: &mut StdRng, n: usize) -> Column {
        match rng.random_range(0..8) {
            0 => Column::bits((0..n).map(|_| rng.random_bool(0.5)).collect()),
            1 => floats(rng, n),
            _ => {
                let t = int_type(rng);
                any_ints(rng, &t, n)
            }
        }
    }

    /// `m` distinct indices below `n`, in random order.
    pub fn distinct(rng: &mut StdRng, n: usize, m: usize) -> Vec<u64> {
        let mut all: Vec<u64> = rand::seq::index::sample(rng, n, m.min(n)).into_iter().map(|x| x as u64).collect();
        all.shuffle(rng);
        all
    }

    pub fn sorted_distinct(rng: &mut StdRng, n: usize, m: usize) -> Vec<u64> {
        let mut v = distinct(rng, n, m);
        v.sort_unstable();
        v
    }

    /// Random lengths summing to `n`, possibly with zero-length parts.
    pub fn split(rng: &mut StdRng, n: usize, zeros: bool) -> Vec<u64> {
        let mut out = Vec::new();
        let mut left = n;
        while left > 0 {
            if zeros && rng.random_bool(0.1) {
                out.push(0);
            }
            let l = rng.random_range(1..=left.min(12));
            out.push(l as u64);
            left -= l;
        }
        out
    }

    /// Bytes of short random words.
    pub fn strings(rng: &mut StdRng, count: usize, max_len: usize, alphabet: usize) -> Vec<Vec<u8>> {
        (0..count)
            .map(|_| {
                let l = rng.random_range(0..=max_len);
                (0..l).map(|_| b'a' + rng.random_range(0..alphabet.min(26)) as u8).collect()
            })
            .collect()
    }
}
