use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::Rng;
use serde_json::{json, Value as Json};

use super::{family, nonneg, with_types, MAX_DOMAIN};
use crate::circuit::{Builder, Circuit};
use crate::codec::scheme::{
    index_ty, mistyped, num, num_or, rand_data, resize, set_at, tweak, ty_or, with_col, FnScheme,
};
use crate::codec::{ensure, get, index_column, input, not_encodable, scalar, CodecError};
use crate::column::{Column, ElementType as T};
use crate::ops::{ElementwiseFn as F, Ports};

pub(super) fn schemes() -> Vec<FnScheme> {
    vec![
        FnScheme::new("indexset.sparse", sparse_decoder, sparse_check, sparse_encode, set_sample)
            .canon(canon_set)
            .corrupt(sparse_corrupt),
        FnScheme::new("indexset.dense", dense_decoder, no_check, dense_encode, set_sample)
            .canon(canon_set)
            .corrupt(|_, enc, _| mistyped(enc, "characteristic")),
        FnScheme::new("indexset.contiguous", contiguous_decoder, contiguous_check, contiguous_encode, range_sample)
            .canon(canon_set)
            .corrupt(contiguous_corrupt),
        FnScheme::new("partition", partition_decoder, no_check, partition_encode, partition_sample)
            .canon(canon_partition)
            .corrupt(|_, enc, _| mistyped(enc, "partition")),
        FnScheme::new("partition.k", parts_decoder, parts_check, parts_encode, partition_sample).corrupt(parts_corrupt),
        FnScheme::new("value.indicators", indicators_decoder, indicators_check, indicators_encode, indicators_sample)
            .corrupt(indicators_corrupt),
    ]
}

fn no_check(_: &Json, _: &Ports) -> Result<(), String> {
    Ok(())
}

/// Index sets decode to `full_length` and the elements in increasing order.
fn canon_set(_: &Json, dec: &Ports) -> Ports {
    let mut out = dec.clone();
    if let Some(Ok(mut e)) = dec.get("elements").map(|c| nonneg(c, "elements")) {
        e.sort_unstable();
        out.insert("elements".into(), Column::u64s(e));
    }
    out
}

/// The set as full length and sorted, distinct elements.
fn index_set(dec: &Ports) -> Result<(u64, Vec<u64>), CodecError> {
    let n = scalar(dec, "full_length").map_err(not_encodable)?;
    let mut e = nonneg(input(dec, "elements")?, "elements")?;
    e.sort_unstable();
    if e.windows(2).any(|w| w[0] == w[1]) {
        return Err(not_encodable("repeated element"));
    }
    if e.last().is_some_and(|&x| x >= n) {
        return Err(not_encodable("element beyond the full length"));
    }
    Ok((n, e))
}

fn set_sample(rng: &mut StdRng) -> (Json, Ports) {
    let n = rand_data::len(rng, 60);
    let m = rng.random_range(0..=n);
    let e = rand_data::distinct(rng, n, m);
    (json!({}), family([("full_length", Column::scalar_u64(n as u64)), ("elements", Column::u64s(e))]))
}

fn range_sample(rng: &mut StdRng) -> (Json, Ports) {
    let n = rand_data::len(rng, 60) as u64;
    let s = rng.random_range(0..=n);
    let l = rng.random_range(0..=n - s);
    (json!({}), family([("full_length", Column::scalar_u64(n)), ("elements", Column::u64s((s..s + l).collect()))]))
}

// Sparse

fn sparse_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let it = ty_or(p, "index_type", T::U64)?;
    let mut b = Builder::new();
    let n = b.input("domain", it.clone());
    let e = b.input("members", it);
    let n = b.cast(&n, &T::U64);
    let e = b.cast(&e, &T::U64);
    let none = b.zeros(&T::Bit, &n);
    let k = b.length(&e);
    let ones = b.ones_bits(&k);
    let mask = b.scatter(&none, &e, &ones);
    let sorted = b.select_indices(&mask);
    b.output("full_length", &n);
    b.output("elements", &sorted);
    Ok(b.finish()?)
}

fn sparse_check(_: &Json, enc: &Ports) -> Result<(), String> {
    let n = scalar(enc, "domain")?;
    ensure(n <= MAX_DOMAIN, || format!("full length {n} exceeds {MAX_DOMAIN}"))
}

fn sparse_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let (n, e) = index_set(dec)?;
    let it = index_ty(p, "index_type", n)?;
    let cols = family([
        ("domain", index_column(&it, vec![n], "full_length")?),
        ("members", index_column(&it, e, "elements")?),
    ]);
    Ok((with_types(p, &[("index_type", &it)]), cols))
}

fn sparse_corrupt(_: &Json, enc: &Ports, rng: &mut StdRng) -> Option<Ports> {
    let e = enc.get("members")?;
    if e.is_empty() {
        return Some(with_col(enc, "domain", resize(enc.get("domain")?, rng)?));
    }
    let n = enc.get("domain")?.to_i128s()?[0];
    let i = rng.random_range(0..e.len());
    Some(with_col(enc, "members", set_at(e, i, n)?))
}

// Dense

fn dense_decoder(_: &Json) -> Result<Circuit, CodecError> {
    let mut b = Builder::new();
    let c = b.input("characteristic", T::Bit);
    let n = b.length(&c);
    let e = b.select_indices(&c);
    b.output("full_length", &n);
    b.output("elements", &e);
    Ok(b.finish()?)
}

fn dense_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let (n, e) = index_set(dec)?;
    if n > MAX_DOMAIN {
        return Err(not_encodable(format!("full length {n} exceeds {MAX_DOMAIN}")));
    }
    let mut bits = vec![false; n as usize];
    for x in e {
        bits[x as usize] = true;
    }
    Ok((p.clone(), family([("characteristic", Column::bools(&bits))])))
}

// Contiguous

fn contiguous_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let it = ty_or(p, "index_type", T::U64)?;
    let mut b = Builder::new();
    let n = b.input("domain", it.clone());
    let s = b.input("start", it.clone());
    let l = b.input("length", it);
    let n = b.cast(&n, &T::U64);
    let s = b.cast(&s, &T::U64);
    let l = b.cast(&l, &T::U64);
    let i = b.iota(&l);
    let e = b.with_scalar(F::Add, &i, &s);
    b.output("full_length", &n);
    b.output("elements", &e);
    Ok(b.finish()?)
}

fn contiguous_check(_: &Json, enc: &Ports) -> Result<(), String> {
    let (n, s, l) = (scalar(enc, "domain")?, scalar(enc, "start")?, scalar(enc, "length")?);
    ensure(s.checked_add(l).is_some_and(|end| end <= n), || format!("range {s}+{l} exceeds full length {n}"))
}

fn contiguous_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let (n, e) = index_set(dec)?;
    let (s, l) = match (e.first(), e.last()) {
        (Some(&a), Some(&z)) if z - a + 1 == e.len() as u64 => (a, e.len() as u64),
        (None, _) => (0, 0),
        _ => return Err(not_encodable("elements are not contiguous")),
    };
    let it = index_ty(p, "index_type", n)?;
    let col = |v| index_column(&it, vec![v], "range");
    let cols = family([("domain", col(n)?), ("start", col(s)?), ("length", col(l)?)]);
    Ok((with_types(p, &[("index_type", &it)]), cols))
}

fn contiguous_corrupt(_: &Json, enc: &Ports, _: &mut StdRng) -> Option<Ports> {
    let n = enc.get("domain")?.to_i128s()?[0];
    let out = with_col(enc, "start", set_at(enc.get("start")?, 0, n)?);
    Some(with_col(&out, "length", set_at(enc.get("length")?, 0, 1)?))
}

// Partitions

fn canon_partition(_: &Json, dec: &Ports) -> Ports {
    let mut out = dec.clone();
    if let Some(Ok(v)) = dec.get("part").map(|c| nonneg(c, "part")) {
        let mut ids = BTreeMap::new();
        let relabeled = v
            .iter()
            .map(|x| {
                let next = ids.len() as u64;
                *ids.entry(*x).or_insert(next)
            })
            .collect();
        out.insert("part".into(), Column::u64s(relabeled));
    }
    out
}

fn partition_sample(rng: &mut StdRng) -> (Json, Ports) {
    let n = rand_data::len(rng, 40);
    let k = rng.random_range(1..5u64);
    let v = (0..n).map(|_| rng.random_range(0..k)).collect();
    (json!({"parts": k}), family([("part", Column::u64s(v))]))
}

fn partition_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let it = ty_or(p, "index_type", T::U64)?;
    let mut b = Builder::new();
    let part = b.input("partition", it);
    let part = b.cast(&part, &T::U64);
    b.output("part", &part);
    Ok(b.finish()?)
}

fn partition_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let canon = canon_partition(p, dec);
    let v = nonneg(input(&canon, "part")?, "part")?;
    let it = index_ty(p, "index_type", v.iter().copied().max().unwrap_or(0))?;
    Ok((with_types(p, &[("index_type", &it)]), family([("partition", index_column(&it, v, "partition")?)])))
}

fn part_label(j: u64) -> String {
    format!("pos_{}", j + 1)
}

/// Part `j` lists its indices; together the lists are a permutation of the index domain.
fn parts_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let it = ty_or(p, "index_type", T::U64)?;
    let k = num(p, "parts")?;
    if k == 0 {
        return Err(CodecError::BadParams("`parts` must be positive".into()));
    }
    let mut b = Builder::new();
    let mut pos = Vec::new();
    let mut ids = Vec::new();
    for j in 0..k {
        let pj = b.input(&part_label(j), it.clone());
        let pj = b.cast(&pj, &T::U64);
        let lj = b.length(&pj);
        let id = b.scalar_u64(j);
        ids.push(b.replicate(&id, &lj));
        pos.push(pj);
    }
    let perm = b.concat(&pos.iter().collect::<Vec<_>>());
    let vals = b.concat(&ids.iter().collect::<Vec<_>>());
    let part = b.permute(&perm, &vals);
    b.output("part", &part);
    Ok(b.finish()?)
}

fn parts_check(p: &Json, enc: &Ports) -> Result<(), String> {
    let k = num(p, "parts").map_err(|e| e.to_string())?;
    let n: usize = (0..k).map(|j| get(enc, &part_label(j)).map(|c| c.len())).sum::<Result<usize, _>>()?;
    ensure(n as u64 <= MAX_DOMAIN, || format!("{n} indices exceed {MAX_DOMAIN}"))
}

fn parts_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let v = nonneg(input(dec, "part")?, "part")?;
    let k = num_or(p, "parts", v.iter().copied().max().map_or(1, |m| m + 1))?;
    if k == 0 || v.iter().any(|&x| x >= k) {
        return Err(not_encodable(format!("part ids must lie below {k}")));
    }
    let it = index_ty(p, "index_type", (v.len() as u64).saturating_sub(1))?;
    let mut cols = Ports::new();
    for j in 0..k {
        let idx: Vec<u64> = (0..v.len() as u64).filter(|&i| v[i as usize] == j).collect();
        cols.insert(part_label(j), index_column(&it, idx, "positions")?);
    }
    Ok((with_types(&crate::codec::with(p, json!({"parts": k})), &[("index_type", &it)]), cols))
}

fn parts_corrupt(p: &Json, enc: &Ports, _: &mut StdRng) -> Option<Ports> {
    let k = p.get("parts")?.as_u64()?;
    let mut entries = Vec::new();
    for j in 0..k {
        let l = part_label(j);
        entries.extend(enc.get(&l)?.to_i128s()?.into_iter().enumerate().map(|(i, v)| (l.clone(), i, v)));
    }
    let (l, i, _) = entries.first()?.clone();
    // Repeat another index, or step outside a one-element domain.
    let v = entries.get(1).map_or(1, |e| e.2);
    Some(with_col(enc, &l, set_at(&enc[&l], i, v)?))
}

// Value indicators: one bitmap per value, each of the column's length.

fn indicators_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let it = ty_or(p, "index_type", T::U64)?;
    let t = ty_or(p, "type", T::U64)?;
    let mut b = Builder::new();
    let d = b.input("domain_size", it);
    let bits = b.input("bitmaps", T::Bit);
    let d = b.cast(&d, &T::U64);
    let total = b.length(&bits);
    let n = b.binary(F::Div, &total, &d);
    let k = b.select_indices(&bits);
    let v = b.with_scalar(F::Div, &k, &n);
    let pos = b.with_scalar(F::Mod, &k, &n);
    let v = b.cast(&v, &t);
    let out = b.permute(&pos, &v);
    b.output("column", &out);
    Ok(b.finish()?)
}

fn indicators_check(_: &Json, enc: &Ports) -> Result<(), String> {
    let d = scalar(enc, "domain_size")?;
    let total = get(enc, "bitmaps")?.len() as u64;
    ensure(d >= 1, || "domain size 0".into())?;
    ensure(total % d == 0, || format!("{total} indicator bits for {d} values"))?;
    let set = get(enc, "bitmaps")?.as_bits().map_or(0, |b| b.count_ones()) as u64;
    ensure(set == total / d, || format!("{set} indicators set for {} elements", total / d))
}

fn indicators_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let c = input(dec, "column")?;
    if !c.element_type().is_unsigned() {
        return Err(not_encodable("value indicators need an unsigned column"));
    }
    let v = nonneg(c, "column")?;
    let d = num_or(p, "domain_size", v.iter().copied().max().map_or(1, |m| m + 1))?;
    let n = v.len() as u64;
    if d == 0 || v.iter().any(|&x| x >= d) || d.saturating_mul(n) > MAX_DOMAIN {
        return Err(not_encodable(format!("values do not fit a domain of {d}")));
    }
    let mut bits = vec![false; (d * n) as usize];
    for (i, x) in v.iter().enumerate() {
        bits[(*x * n) as usize + i] = true;
    }
    let it = index_ty(p, "index_type", d)?;
    let cols = family([("domain_size", index_column(&it, vec![d], "domain_size")?), ("bitmaps", Column::bools(&bits))]);
    Ok((with_types(p, &[("type", c.element_type()), ("index_type", &it)]), cols))
}

fn indicators_sample(rng: &mut StdRng) -> (Json, Ports) {
    let n = rand_data::len(rng, 30);
    let d = rng.random_range(1..6u64);
    let v = (0..n).map(|_| rng.random_range(0..d)).collect();
    (json!({}), family([("column", Column::from_u64s(T::U8, v).unwrap())]))
}

fn indicators_corrupt(_: &Json, enc: &Ports, rng: &mut StdRng) -> Option<Ports> {
    let b = enc.get("bitmaps")?;
    Some(with_col(enc, "bitmaps", tweak(b, rng, |x| 1 - x)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::repr::testing::exercise;

    fn u(v: &[u64]) -> Column {
        Column::u64s(v.to_vec())
    }

    #[test]
    fn sampled_roundtrips() {
        for s in schemes() {
            exercise(&s, 60);
        }
    }

    #[test]
    fn index_set_examples() {
        let dense = dense_decoder(&json!({})).unwrap();
        let out = dense.evaluate(&family([("characteristic", Column::bools(&[true, false, true]))])).unwrap();
        assert_eq!(out["full_length"], u(&[3]));
        assert_eq!(out["elements"], u(&[0, 2]));
        let cont = contiguous_decoder(&json!({})).unwrap();
        let out = cont.evaluate(&family([("domain", u(&[10])), ("start", u(&[2])), ("length", u(&[3]))])).unwrap();
        assert_eq!(out["elements"], u(&[2, 3, 4]));
        let sparse = sparse_decoder(&json!({})).unwrap();
        let out = sparse.evaluate(&family([("domain", u(&[8])), ("members", u(&[5, 1]))])).unwrap();
        assert_eq!(out["elements"], u(&[1, 5]));
        assert!(sparse.evaluate(&family([("domain", u(&[8])), ("members", u(&[5, 5]))])).is_err());
    }

    #[test]
    fn partition_materialization() {
        let (params, cols) = parts_encode(&json!({"parts": 2}), &family([("part", u(&[0, 1, 0]))])).unwrap();
        assert_eq!(cols["pos_1"], Column::from_u64s(T::U8, vec![0, 2]).unwrap());
        assert_eq!(cols["pos_2"], Column::from_u64s(T::U8, vec![1]).unwrap());
        assert_eq!(parts_decoder(&params).unwrap().evaluate(&cols).unwrap()["part"], u(&[0, 1, 0]));
        let (_, cols) = parts_encode(&json!({"parts": 3}), &family([("part", u(&[2, 2]))])).unwrap();
        assert!(cols["pos_1"].is_empty() && cols["pos_2"].is_empty());
        assert_eq!(canon_partition(&json!({}), &family([("part", u(&[7, 3, 7]))]))["part"], u(&[0, 1, 0]));
    }

    #[test]
    fn one_hot_value_indicators() {
        // Domain {a..e}; the middle indicator set means `c`.
        let c = indicators_decoder(&json!({"type": "u8"})).unwrap();
        let bits = Column::bools(&[false, false, true, false, false]);
        let out = c.evaluate(&family([("domain_size", u(&[5])), ("bitmaps", bits)])).unwrap();
        assert_eq!(out["column"], Column::from_u64s(T::U8, vec![2]).unwrap());
        let two = Column::bools(&[true, false, true, false]);
        assert!(c.evaluate(&family([("domain_size", u(&[2])), ("bitmaps", two)])).is_err());
    }
}
