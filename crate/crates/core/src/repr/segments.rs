use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Value as Json};

use super::{canon_subcolumn, family, nonneg, sorted_subcolumn, with_types};
use crate::circuit::{Builder, Circuit, Wire};
use crate::codec::scheme::{
    all_distinct, index_ty, num, pick_ty, rand_data, resize, set_at, starts_of, ty, ty_or, with_col, FnScheme,
};
use crate::codec::{ensure, get, index_column, indices, input, not_encodable, scalar, CodecError};
use crate::column::{Column, ElementType as T};
use crate::ops::{ElementwiseFn as F, Ports};

pub(super) fn schemes() -> Vec<FnScheme> {
    vec![
        FnScheme::new("segmentation", seg_decoder, seg_check, seg_encode, seg_sample).corrupt(seg_corrupt),
        FnScheme::new("segmentation.uniform", useg_decoder, useg_check, useg_encode, useg_sample).corrupt(useg_corrupt),
        FnScheme::new("segmented", segd_decoder, segd_check, segd_encode, segd_sample).corrupt(seg_corrupt),
        FnScheme::new("segmented.uniform", usegd_decoder, useg_check, usegd_encode, usegd_sample).corrupt(useg_corrupt),
        FnScheme::new("subcolumn.segmented", ssc_decoder, ssc_check, ssc_encode, ssc_sample)
            .canon(canon_subcolumn)
            .corrupt(ssc_corrupt),
    ]
}

// Variable-length segmentation: `start` and `length` per segment; decoded as the segment
// number of every element plus the segment count.

fn variable(b: &mut Builder, it: &T) -> (Wire, Wire) {
    let _start = b.input("start", it.clone());
    let length = b.input("length", it.clone());
    let seg = b.run_index(&length);
    let count = b.length(&length);
    (seg, count)
}

fn seg_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let it = ty_or(p, "index_type", T::U64)?;
    let mut b = Builder::new();
    let (seg, count) = variable(&mut b, &it);
    b.output("segment", &seg);
    b.output("segment_count", &count);
    Ok(b.finish()?)
}

/// Gap-free, zero-anchored descriptors; returns the covered length.
fn descriptors(enc: &Ports) -> Result<u64, String> {
    let s = indices(enc, "start")?;
    let l = indices(enc, "length")?;
    ensure(s.len() == l.len(), || format!("{} starts for {} lengths", s.len(), l.len()))?;
    let mut at = 0u64;
    for (j, (&s, &l)) in s.iter().zip(&l).enumerate() {
        ensure(s == at, || format!("segment {j} starts at {s}, expected {at}"))?;
        at = at.checked_add(l).ok_or("segment lengths overflow")?;
    }
    Ok(at)
}

fn seg_check(_: &Json, enc: &Ports) -> Result<(), String> {
    descriptors(enc).map(|_| ())
}

/// Segment lengths from a non-decreasing segment-number column and the segment count.
fn lengths_of(dec: &Ports) -> Result<Vec<u64>, CodecError> {
    let seg = nonneg(input(dec, "segment")?, "segment")?;
    let count = scalar(dec, "segment_count").map_err(not_encodable)?;
    if seg.windows(2).any(|w| w[0] > w[1]) {
        return Err(not_encodable("segment numbers decrease"));
    }
    if seg.last().is_some_and(|&s| s >= count) {
        return Err(not_encodable("segment number beyond the segment count"));
    }
    let mut l = vec![0u64; count as usize];
    for s in seg {
        l[s as usize] += 1;
    }
    Ok(l)
}

fn descriptor_columns(p: &Json, lengths: &[u64]) -> Result<(Json, Ports), CodecError> {
    let total: u64 = lengths.iter().sum();
    let it = index_ty(p, "index_type", total)?;
    let cols = family([
        ("start", index_column(&it, starts_of(lengths), "start")?),
        ("length", index_column(&it, lengths.to_vec(), "length")?),
    ]);
    Ok((with_types(p, &[("index_type", &it)]), cols))
}

fn seg_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    descriptor_columns(p, &lengths_of(dec)?)
}

fn segmentation(lengths: &[u64]) -> Ports {
    let seg: Vec<u64> =
        lengths.iter().enumerate().flat_map(|(j, &l)| std::iter::repeat_n(j as u64, l as usize)).collect();
    family([("segment", Column::u64s(seg)), ("segment_count", Column::scalar_u64(lengths.len() as u64))])
}

fn random_lengths(rng: &mut StdRng) -> Vec<u64> {
    let n = rand_data::len(rng, 40);
    let mut l = rand_data::split(rng, n, true);
    if rng.random_bool(0.2) {
        l.push(0);
    }
    l
}

fn seg_sample(rng: &mut StdRng) -> (Json, Ports) {
    (json!({}), segmentation(&random_lengths(rng)))
}

fn seg_corrupt(_: &Json, enc: &Ports, rng: &mut StdRng) -> Option<Ports> {
    let s = enc.get("start")?;
    let v = s.to_i128s()?;
    match v.len() {
        0 => Some(with_col(enc, "start", resize(s, rng)?)),
        1 => Some(with_col(enc, "start", set_at(s, 0, 1)?)),
        _ => set_at(s, 1, v[1] + 1).or_else(|| set_at(s, 1, v[1] - 1)).map(|c| with_col(enc, "start", c)),
    }
}

// Uniform segmentation: one segment length for all but a possibly shorter last segment.

fn uniform(b: &mut Builder, n: &Wire, l: &Wire) -> (Wire, Wire) {
    let seg = b.segment_of(n, l);
    let one = b.scalar_u64(1);
    let up = b.binary(F::Add, n, l);
    let up = b.binary(F::Sub, &up, &one);
    let count = b.binary(F::Div, &up, l);
    (seg, count)
}

fn useg_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let it = ty_or(p, "index_type", T::U64)?;
    let mut b = Builder::new();
    let l = b.input("segment_length", it.clone());
    let n = b.input("overall_length", it);
    let l = b.cast(&l, &T::U64);
    let n = b.cast(&n, &T::U64);
    let (seg, count) = uniform(&mut b, &n, &l);
    b.output("segment", &seg);
    b.output("segment_count", &count);
    Ok(b.finish()?)
}

fn useg_check(_: &Json, enc: &Ports) -> Result<(), String> {
    ensure(scalar(enc, "segment_length")? > 0, || "segment length 0".into())
}

/// The segment length of a uniform segmentation given as segment numbers.
fn uniform_length(p: &Json, dec: &Ports) -> Result<u64, CodecError> {
    let seg = nonneg(input(dec, "segment")?, "segment")?;
    let count = scalar(dec, "segment_count").map_err(not_encodable)?;
    let n = seg.len() as u64;
    let l =
        if n == 0 { num(p, "segment_length").unwrap_or(1) } else { seg.iter().take_while(|&&s| s == 0).count() as u64 };
    let ok = l > 0 && seg.iter().enumerate().all(|(i, &s)| s == i as u64 / l) && count == n.div_ceil(l);
    if !ok {
        return Err(not_encodable("not a uniform segmentation"));
    }
    Ok(l)
}

fn useg_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let l = uniform_length(p, dec)?;
    let n = input(dec, "segment")?.len() as u64;
    let it = index_ty(p, "index_type", l.max(n))?;
    let cols = family([
        ("segment_length", index_column(&it, vec![l], "segment_length")?),
        ("overall_length", index_column(&it, vec![n], "overall_length")?),
    ]);
    Ok((with_types(p, &[("index_type", &it)]), cols))
}

fn uniform_family(n: u64, l: u64) -> Ports {
    family([
        ("segment", Column::u64s((0..n).map(|i| i / l).collect())),
        ("segment_count", Column::scalar_u64(n.div_ceil(l))),
    ])
}

fn useg_sample(rng: &mut StdRng) -> (Json, Ports) {
    let n = rand_data::len(rng, 50) as u64;
    let l = rng.random_range(1..8);
    (json!({"segment_length": l}), uniform_family(n, l))
}

fn useg_corrupt(_: &Json, enc: &Ports, _: &mut StdRng) -> Option<Ports> {
    Some(with_col(enc, "segment_length", set_at(enc.get("segment_length")?, 0, 0)?))
}

// Segmented columns: data with a segmentation.

fn segd_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let it = ty_or(p, "index_type", T::U64)?;
    let t = ty(p, "type")?;
    let mut b = Builder::new();
    let data = b.input("values", t);
    let (seg, count) = variable(&mut b, &it);
    b.output("data", &data);
    b.output("segment", &seg);
    b.output("segment_count", &count);
    Ok(b.finish()?)
}

fn segd_check(_: &Json, enc: &Ports) -> Result<(), String> {
    let total = descriptors(enc)?;
    let n = get(enc, "values")?.len() as u64;
    ensure(total == n, || format!("segments cover {total} of {n} elements"))
}

fn data_of(p: &Json, dec: &Ports) -> Result<(Column, T), CodecError> {
    let data = input(dec, "data")?;
    if data.len() != input(dec, "segment")?.len() {
        return Err(not_encodable("`data` and `segment` differ in length"));
    }
    let t = pick_ty(p, "type", data.element_type().clone())?;
    Ok((data.clone(), t))
}

fn segd_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let (data, t) = data_of(p, dec)?;
    let (params, mut cols) = descriptor_columns(p, &lengths_of(dec)?)?;
    cols.insert("values".into(), data);
    Ok((with_types(&params, &[("type", &t)]), cols))
}

fn segd_sample(rng: &mut StdRng) -> (Json, Ports) {
    let l = random_lengths(rng);
    let mut f = segmentation(&l);
    f.insert("data".into(), rand_data::any_column(rng, l.iter().sum::<u64>() as usize));
    (json!({}), f)
}

fn usegd_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let it = ty_or(p, "index_type", T::U64)?;
    let t = ty(p, "type")?;
    let mut b = Builder::new();
    let data = b.input("values", t);
    let l = b.input("segment_length", it);
    let l = b.cast(&l, &T::U64);
    let n = b.length(&data);
    let (seg, count) = uniform(&mut b, &n, &l);
    b.output("data", &data);
    b.output("segment", &seg);
    b.output("segment_count", &count);
    Ok(b.finish()?)
}

fn usegd_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let (data, t) = data_of(p, dec)?;
    let l = uniform_length(p, dec)?;
    let it = index_ty(p, "index_type", l)?;
    let cols = family([("values", data), ("segment_length", index_column(&it, vec![l], "segment_length")?)]);
    Ok((with_types(p, &[("type", &t), ("index_type", &it)]), cols))
}

fn usegd_sample(rng: &mut StdRng) -> (Json, Ports) {
    let (hints, mut f) = useg_sample(rng);
    let n = f["segment"].len();
    f.insert("data".into(), rand_data::any_column(rng, n));
    (hints, f)
}

// Segmented subcolumn: whole segments of a uniform segmentation, placed by segment number.
// Only the segment at the largest position may be short.

fn ssc_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let it = ty_or(p, "index_type", T::U64)?;
    let t = ty(p, "type")?;
    let mut b = Builder::new();
    let l = b.input("segment_length", it.clone());
    let sp = b.input("segment_pos", it);
    let data = b.input("values", t);
    let l = b.cast(&l, &T::U64);
    let sp = b.cast(&sp, &T::U64);
    let n = b.length(&data);
    let i = b.iota(&n);
    let s = b.with_scalar(F::Div, &i, &l);
    let off = b.with_scalar(F::Mod, &i, &l);
    let base = b.gather(&s, &sp);
    let base = b.with_scalar(F::Mul, &base, &l);
    let pos = b.binary(F::Add, &base, &off);
    b.output("pos", &pos);
    b.output("data", &data);
    Ok(b.finish()?)
}

fn ssc_check(_: &Json, enc: &Ports) -> Result<(), String> {
    let l = scalar(enc, "segment_length")?;
    ensure(l > 0, || "segment length 0".into())?;
    let sp = indices(enc, "segment_pos")?;
    let n = get(enc, "values")?.len() as u64;
    ensure(sp.len() as u64 == n.div_ceil(l), || {
        format!("{} segment positions for {n} elements in segments of {l}", sp.len())
    })?;
    ensure(all_distinct(&sp), || "overlapping segment positions".into())?;
    if n % l != 0 {
        let last = *sp.last().unwrap();
        ensure(sp.iter().all(|&x| x <= last), || "the short segment is not at the largest position".into())?;
    }
    Ok(())
}

/// Block numbers for segment length `l`, if the sorted positions consist of whole blocks
/// plus at most one short block at the top.
fn blocks(pos: &[u64], l: u64) -> Option<Vec<u64>> {
    let mut out = Vec::new();
    for (k, chunk) in pos.chunks(l as usize).enumerate() {
        let b = chunk[0] / l;
        if chunk[0] % l != 0 || chunk.iter().enumerate().any(|(j, &x)| x != chunk[0] + j as u64) {
            return None;
        }
        if out.last().is_some_and(|&prev| prev >= b)
            || (chunk.len() < l as usize && k + 1 != pos.len().div_ceil(l as usize))
        {
            return None;
        }
        out.push(b);
    }
    Some(out)
}

fn ssc_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let (pos, data) = sorted_subcolumn(dec)?;
    let candidates: Vec<u64> = match num(p, "segment_length") {
        Ok(l) if l > 0 => vec![l],
        Ok(_) => return Err(CodecError::BadParams("segment length 0".into())),
        Err(_) => vec![64, 32, 16, 8, 4, 2, 1],
    };
    let (l, sp) = candidates
        .into_iter()
        .find_map(|l| blocks(&pos, l).map(|b| (l, b)))
        .ok_or_else(|| not_encodable("positions do not form whole segments"))?;
    let it = index_ty(p, "index_type", l.max(sp.iter().copied().max().unwrap_or(0)))?;
    let t = pick_ty(p, "type", data.element_type().clone())?;
    let cols = family([
        ("segment_length", index_column(&it, vec![l], "segment_length")?),
        ("segment_pos", index_column(&it, sp, "segment_pos")?),
        ("values", data),
    ]);
    Ok((with_types(&crate::codec::with(p, json!({"segment_length": l})), &[("type", &t), ("index_type", &it)]), cols))
}

fn ssc_sample(rng: &mut StdRng) -> (Json, Ports) {
    let l = rng.random_range(1..5u64);
    let k = rand_data::len(rng, 6);
    let bl = rand_data::sorted_distinct(rng, 20, k);
    let mut pos = Vec::new();
    for (j, b) in bl.iter().enumerate() {
        let len = if j + 1 == bl.len() { rng.random_range(1..=l) } else { l };
        pos.extend((0..len).map(|o| b * l + o));
    }
    pos.shuffle(rng);
    let data = rand_data::any_column(rng, pos.len());
    (json!({"segment_length": l}), family([("pos", Column::u64s(pos)), ("data", data)]))
}

fn ssc_corrupt(_: &Json, enc: &Ports, rng: &mut StdRng) -> Option<Ports> {
    let sp = enc.get("segment_pos")?;
    if sp.len() >= 2 {
        let v = sp.to_i128s()?;
        return Some(with_col(enc, "segment_pos", set_at(sp, 0, v[1])?));
    }
    if rng.random_bool(0.5) {
        return Some(with_col(enc, "segment_pos", resize(sp, rng)?));
    }
    Some(with_col(enc, "segment_length", set_at(enc.get("segment_length")?, 0, 0)?))
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
    fn segmentation_descriptors() {
        let c = seg_decoder(&json!({})).unwrap();
        let ok = family([("start", u(&[0, 2, 2])), ("length", u(&[2, 0, 3]))]);
        assert!(seg_check(&json!({}), &ok).is_ok());
        let out = c.evaluate(&ok).unwrap();
        assert_eq!(out["segment"], u(&[0, 0, 2, 2, 2]));
        assert_eq!(out["segment_count"], u(&[3]));
        assert!(seg_check(&json!({}), &family([("start", u(&[1])), ("length", u(&[2]))])).is_err());
        assert!(seg_check(&json!({}), &family([("start", u(&[0, 3])), ("length", u(&[2, 1]))])).is_err());
    }

    #[test]
    fn segmented_subcolumn_example() {
        let c = ssc_decoder(&json!({"type": "u64"})).unwrap();
        let enc = family([("segment_length", u(&[2])), ("segment_pos", u(&[0, 3])), ("values", u(&[10, 11, 12, 13]))]);
        let out = c.evaluate(&enc).unwrap();
        assert_eq!(out["pos"], u(&[0, 1, 6, 7]));
        // "helloworld" without its "low": two whole segments of 3 and a short one on top.
        let word = Column::u64s(b"helloworld".iter().map(|&c| c as u64).collect());
        let keep: Vec<usize> = (0..10).filter(|i| !(3..6).contains(i)).collect();
        let dec = family([("pos", u(&keep.iter().map(|&i| i as u64).collect::<Vec<_>>())), ("data", word.take(&keep))]);
        let (params, enc) = ssc_encode(&json!({"segment_length": 3}), &dec).unwrap();
        assert_eq!(enc["segment_pos"], Column::from_u64s(T::U8, vec![0, 2, 3]).unwrap());
        assert_eq!(ssc_decoder(&params).unwrap().evaluate(&enc).unwrap()["data"], word.take(&keep));
        assert!(ssc_encode(&json!({"segment_length": 2}), &dec).is_err());
        let (params, _) = ssc_encode(&json!({}), &dec).unwrap();
        assert_eq!(params["segment_length"], json!(1));
    }
}
