use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::Rng;
use serde_json::{json, Value as Json};

use crate::circuit::{Builder, Circuit, Wire};
use crate::codec::scheme::{num, num_or, rand_data, resize, set_at, with_col, FnScheme};
use crate::codec::{ensure, get, index_column, indices, input, not_encodable, ports, with, CodecError};
use crate::column::{Column, ElementType as T};
use crate::ops::{ElementwiseFn as F, Ports};
use crate::repr::nonneg;

pub(super) fn schemes() -> Vec<FnScheme> {
    vec![
        FnScheme::new("idx.common_prefix", prefix_decoder, prefix_check, prefix_encode, set_sample)
            .canon(canon_set)
            .corrupt(prefix_corrupt),
        FnScheme::new("idx.common_upper_half", upper_decoder, upper_check, upper_encode, set_sample)
            .canon(canon_set)
            .corrupt(upper_corrupt),
    ]
}

/// Total size of an encoded form in bits, counting each element at its type's width.
pub fn upper_half_size_bits(enc: &Ports) -> u64 {
    enc.values().map(|c| c.len() as u64 * c.element_type().width_bits() as u64).sum()
}

fn canon_set(_: &Json, dec: &Ports) -> Ports {
    let Some(c) = dec.get("elements").and_then(|c| c.to_i128s()) else {
        return dec.clone();
    };
    let mut v: Vec<u64> = c.into_iter().map(|x| x as u64).collect();
    v.sort_unstable();
    ports([("elements", Column::u64s(v))])
}

fn set_sample(rng: &mut StdRng) -> (Json, Ports) {
    let w = [8u64, 12, 16, 20][rng.random_range(0..4)];
    let p = rng.random_range(1..w);
    let h = w / 2;
    let blocks = rng.random_range(1..6usize);
    let mut v: Vec<u64> = Vec::new();
    for _ in 0..blocks {
        let hi = rng.random_range(0..1u64 << (w - h));
        let m = if rng.random_bool(0.4) { 1 } else { rng.random_range(1..12) };
        v.extend(rand_data::distinct(rng, 1 << h, m).into_iter().map(|lo| (hi << h) | lo));
    }
    if rng.random_bool(0.05) {
        v.clear();
    }
    v.sort_unstable();
    v.dedup();
    (json!({"w": w, "p": p}), ports([("elements", Column::u64s(v))]))
}

fn widths(p: &Json) -> Result<(u8, u8), CodecError> {
    let (w, q) = (num(p, "w")?, num(p, "p")?);
    if !(0 < q && q < w && w <= 64) {
        return Err(CodecError::BadParams(format!("need 0 < p < w <= 64, got w={w}, p={q}")));
    }
    Ok((w as u8, q as u8))
}

/// Sorted distinct elements below `2^w`.
fn members(dec: &Ports, w: u8) -> Result<Vec<u64>, CodecError> {
    let mut v = nonneg(input(dec, "elements")?, "elements")?;
    v.sort_unstable();
    if v.windows(2).any(|x| x[0] == x[1]) {
        return Err(not_encodable("repeated element"));
    }
    if w < 64 && v.last().is_some_and(|x| x >> w != 0) {
        return Err(not_encodable(format!("an element exceeds {w} bits")));
    }
    Ok(v)
}

/// Elements of a common-prefix form; a count of 0 stands for a full block of `2^(w−p)`.
fn prefix_elements(b: &mut Builder, w: u8, q: u8) -> Wire {
    let low = T::UInt(w - q);
    let pre = b.input("prefix", T::UInt(q));
    let cnt = b.input("suffix_count", low.clone());
    let suf = b.input("suffix", low);
    let block = 1u64 << (w - q);
    let cnt = b.cast(&cnt, &T::U64);
    let full = b.compare(&cnt, crate::ops::CmpOp::Eq, 0u64);
    let full = b.bit_to_u64(&full);
    let full = b.with_const(F::Mul, &full, block);
    let cnt = b.binary(F::Add, &cnt, &full);
    let r = b.run_index(&cnt);
    let pre = b.cast(&pre, &T::U64);
    let hi = b.gather(&r, &pre);
    let hi = b.with_const(F::Mul, &hi, block);
    let lo = b.cast(&suf, &T::U64);
    b.binary(F::Add, &hi, &lo)
}

fn prefix_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let (w, q) = widths(p)?;
    let mut b = Builder::new();
    let out = prefix_elements(&mut b, w, q);
    b.output("elements", &out);
    Ok(b.finish()?)
}

fn counts(enc: &Ports, w: u8, q: u8) -> Result<Vec<u64>, String> {
    let pre = indices(enc, "prefix")?;
    ensure(pre.windows(2).all(|x| x[0] < x[1]), || "prefixes are not increasing".into())?;
    let c = indices(enc, "suffix_count")?;
    ensure(c.len() == pre.len(), || format!("{} counts for {} prefixes", c.len(), pre.len()))?;
    let c: Vec<u64> = c.into_iter().map(|x| if x == 0 { 1 << (w - q) } else { x }).collect();
    let suf = indices(enc, "suffix")?;
    let total: u64 = c.iter().sum();
    ensure(total == suf.len() as u64, || format!("counts add up to {total}, {} suffixes", suf.len()))?;
    let mut at = 0usize;
    for x in &c {
        let g = &suf[at..at + *x as usize];
        ensure(g.windows(2).all(|y| y[0] < y[1]), || "suffixes within a prefix are not increasing".into())?;
        at += *x as usize;
    }
    Ok(pre)
}

fn prefix_check(p: &Json, enc: &Ports) -> Result<(), String> {
    let (w, q) = widths(p).map_err(|e| e.to_string())?;
    counts(enc, w, q).map(|_| ())
}

fn prefix_form(v: &[u64], w: u8, q: u8) -> Result<Ports, CodecError> {
    let h = w - q;
    let mut groups: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    for x in v {
        groups.entry(x >> h).or_default().push(x & ((1u64 << h) - 1));
    }
    let full = 1u64 << h;
    let pre = groups.keys().copied().collect();
    let cnt = groups.values().map(|g| if g.len() as u64 == full { 0 } else { g.len() as u64 }).collect();
    let suf = groups.into_values().flatten().collect();
    Ok(ports([
        ("prefix", index_column(&T::UInt(q), pre, "prefix")?),
        ("suffix_count", index_column(&T::UInt(h), cnt, "suffix_count")?),
        ("suffix", index_column(&T::UInt(h), suf, "suffix")?),
    ]))
}

fn prefix_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let w = num_or(p, "w", 32)?;
    let p = with(p, json!({"w": w, "p": num_or(p, "p", w / 2)?}));
    let (w, q) = widths(&p)?;
    let v = members(dec, w)?;
    Ok((p, prefix_form(&v, w, q)?))
}

fn prefix_corrupt(_: &Json, enc: &Ports, rng: &mut StdRng) -> Option<Ports> {
    let pre = enc.get("prefix")?;
    if pre.len() >= 2 {
        let v = pre.value(1).as_u64()? as i128;
        return Some(with_col(enc, "prefix", set_at(pre, 0, v)?));
    }
    Some(with_col(enc, "suffix", resize(enc.get("suffix")?, rng)?))
}

// Naive elements alone in their half-width block, the rest under common upper halves.

fn upper_width(p: &Json) -> Result<u8, CodecError> {
    let w = num(p, "w")?;
    if w % 2 != 0 || !(2..=64).contains(&w) {
        return Err(CodecError::BadParams(format!("w must be even and at most 64, got {w}")));
    }
    Ok(w as u8)
}

fn upper_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let w = upper_width(p)?;
    let mut b = Builder::new();
    let naive = b.input("naive", T::UInt(w));
    let naive = b.cast(&naive, &T::U64);
    let rest = prefix_elements(&mut b, w, w / 2);
    let out = b.concat(&[&naive, &rest]);
    b.output("elements", &out);
    Ok(b.finish()?)
}

fn upper_check(p: &Json, enc: &Ports) -> Result<(), String> {
    let w = upper_width(p).map_err(|e| e.to_string())?;
    let pre = counts(enc, w, w / 2)?;
    let mut blocks: Vec<u64> = indices(enc, "naive")?.iter().map(|x| x >> (w / 2)).collect();
    blocks.sort_unstable();
    ensure(blocks.windows(2).all(|x| x[0] < x[1]), || "two naive elements share a block".into())?;
    ensure(blocks.iter().all(|x| pre.binary_search(x).is_err()), || {
        "a naive element shares a block with a prefix".into()
    })?;
    get(enc, "naive").map(|_| ())
}

fn upper_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let p = with(p, json!({"w": num_or(p, "w", 32)?}));
    let w = upper_width(&p)?;
    let v = members(dec, w)?;
    let h = w / 2;
    let mut size: BTreeMap<u64, usize> = BTreeMap::new();
    for x in &v {
        *size.entry(x >> h).or_default() += 1;
    }
    let (single, shared): (Vec<u64>, Vec<u64>) = v.iter().partition(|x| size[&(*x >> h)] == 1);
    let mut cols = prefix_form(&shared, w, h)?;
    cols.insert("naive".into(), index_column(&T::UInt(w), single, "naive")?);
    let p = p
        .as_object()
        .map(|o| {
            Json::Object(o.iter().filter(|(k, _)| k.as_str() != "p").map(|(k, v)| (k.clone(), v.clone())).collect())
        })
        .unwrap();
    Ok((p, cols))
}

fn upper_corrupt(p: &Json, enc: &Ports, rng: &mut StdRng) -> Option<Ports> {
    let w = upper_width(p).ok()?;
    let naive = enc.get("naive")?;
    let pre = enc.get("prefix")?;
    if !naive.is_empty() && !pre.is_empty() {
        let x = (pre.value(0).as_u64()? << (w / 2)) as i128;
        return Some(with_col(enc, "naive", set_at(naive, 0, x)?));
    }
    if naive.len() >= 2 {
        let x = naive.value(0).as_u64()? as i128;
        return Some(with_col(enc, "naive", set_at(naive, 1, x ^ 1)?));
    }
    Some(with_col(enc, "suffix", resize(enc.get("suffix")?, rng)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::verify_with;
    use crate::repr::testing::exercise;

    #[test]
    fn sampled_roundtrips() {
        for s in schemes() {
            exercise(&s, 150);
        }
    }

    #[test]
    fn common_prefix_example() {
        let s = &schemes()[0];
        let p = json!({"w": 8, "p": 3});
        let e = ports([
            ("prefix", Column::from_u64s(T::UInt(3), vec![5]).unwrap()),
            ("suffix_count", Column::from_u64s(T::UInt(5), vec![2]).unwrap()),
            ("suffix", Column::from_u64s(T::UInt(5), vec![1, 9]).unwrap()),
        ]);
        verify_with(s, &p, &e).unwrap();
        assert_eq!((s.decoder)(&p).unwrap().evaluate(&e).unwrap()["elements"], Column::u64s(vec![161, 169]));
        let (_, empty) = (s.encode)(&p, &ports([("elements", Column::u64s(vec![]))])).unwrap();
        assert!(empty.values().all(|c| c.is_empty()));
        // A full block is written with count 0.
        let all: Vec<u64> = (32..64).collect();
        let (_, e) = (s.encode)(&p, &ports([("elements", Column::u64s(all.clone()))])).unwrap();
        assert_eq!(e["suffix_count"].to_i128s().unwrap(), vec![0]);
        assert_eq!((s.decoder)(&p).unwrap().evaluate(&e).unwrap()["elements"], Column::u64s(all));
    }

    #[test]
    fn upper_half_singles() {
        let s = &schemes()[1];
        let v = vec![0x0102, 0x0103, 0x0500, 0x7fff];
        let (p, e) = (s.encode)(&json!({"w": 16}), &ports([("elements", Column::u64s(v))])).unwrap();
        assert_eq!(e["naive"].to_i128s().unwrap(), vec![0x0500, 0x7fff]);
        assert_eq!(e["prefix"].to_i128s().unwrap(), vec![1]);
        verify_with(s, &p, &e).unwrap();
        let clash = with_col(&e, "naive", Column::from_u64s(T::U16, vec![0x0104, 0x7fff]).unwrap());
        assert!(verify_with(s, &p, &clash).is_err());
        assert_eq!(upper_half_size_bits(&e), 2 * 16 + 8 + 8 + 2 * 8);
    }
}
