use rand::rngs::StdRng;
use rand::Rng;
use serde_json::{json, Value as Json};

use super::fit::{interpolate, poly_at};
use super::{coefficient, confirm, horner, ints_of};
use crate::circuit::{Builder, Circuit, Wire};
use crate::codec::scheme::{
    col_i128, column_ty, index_ty, num, num_or, rand_data, resize, starts_of, the_column, tweak, ty, ty_or, with_col,
    FnScheme,
};
use crate::codec::{ensure, get, index_column, indices, not_encodable, ports, scalar, with, CodecError};
use crate::column::{Column, ElementType as T};
use crate::ops::{ElementwiseFn as F, Ports};
use crate::repr::with_types;

pub(super) fn schemes() -> Vec<FnScheme> {
    vec![
        FnScheme::new("spline.generalized", generalized_decoder, generalized_check, generalized_encode, spline_sample)
            .corrupt(generalized_corrupt),
        FnScheme::new("spline.knotted", knotted_decoder, knotted_check, knotted_encode, knotted_sample)
            .corrupt(knotted_corrupt),
        FnScheme::new("spline.equiknotted", equi_decoder, equi_check, equi_encode, spline_sample)
            .corrupt(coeff_corrupt)
            .approx(equi_approx),
        FnScheme::new("for", for_decoder, for_check, for_encode, for_sample).corrupt(for_corrupt),
    ]
}

struct Shape {
    t: T,
    it: T,
    k: u64,
    absolute: bool,
}

fn shape(p: &Json) -> Result<Shape, CodecError> {
    let absolute = match p.get("origin").and_then(|o| o.as_str()).unwrap_or("segment") {
        "segment" => false,
        "absolute" => true,
        o => return Err(CodecError::BadParams(format!("unknown origin `{o}`"))),
    };
    let k = num_or(p, "k", 2)?;
    if !(1..=8).contains(&k) {
        return Err(CodecError::BadParams("`k` must be between 1 and 8".into()));
    }
    Ok(Shape { t: ty(p, "type")?, it: ty_or(p, "index_type", T::U64)?, k, absolute })
}

/// Evaluates segment `r`'s polynomial at `x` (the offset, or the index itself).
fn evaluate(b: &mut Builder, s: &Shape, coeffs: &Wire, r: &Wire, off: &Wire) -> Wire {
    let x = if s.absolute {
        let n = b.length(off);
        b.iota(&n)
    } else {
        off.clone()
    };
    let x = b.cast(&x, &T::I64);
    let cs: Vec<Wire> = (0..s.k).map(|j| coefficient(b, coeffs, r, s.k, j)).collect();
    let v = horner(b, &x, &cs);
    b.cast(&v, &s.t)
}

fn coeff_count(enc: &Ports, segments: u64, k: u64) -> Result<(), String> {
    let c = get(enc, "coefficients")?.len() as u64;
    ensure(c == segments * k, || format!("{c} coefficients for {segments} segments of {k}"))
}

// Fitting

/// A segment `[start, start + len)` and its polynomial in the offset.
struct Piece {
    start: usize,
    len: usize,
    c: Vec<i128>,
}

/// The longest prefix of `y` one polynomial with at most `k` coefficients reproduces.
fn fit_prefix(y: &[i128], k: usize) -> Piece {
    let (c, t) = (1..=k.min(y.len()))
        .rev()
        .find_map(|t| interpolate(&y[..t]).map(|c| (c, t)))
        .unwrap_or_else(|| (vec![y[0]], 1));
    let len = t + y[t..].iter().enumerate().take_while(|(e, v)| poly_at(&c, (t + e) as i128) == Some(**v)).count();
    Piece { start: 0, len, c }
}

fn greedy(y: &[i128], k: usize) -> Vec<Piece> {
    let mut out = Vec::new();
    let mut s = 0;
    while s < y.len() {
        let mut p = fit_prefix(&y[s..], k);
        p.start = s;
        s += p.len;
        out.push(p);
    }
    out
}

/// Coefficients of `q(x − s)` from those of `q`.
fn shifted(c: &[i128], s: i128) -> Option<Vec<i128>> {
    let mut out = vec![0i128; c.len()];
    // Horner on polynomials: acc = acc·(x − s) + c_j
    for cj in c.iter().rev() {
        let mut next = vec![0i128; c.len()];
        for (d, a) in out.iter().enumerate() {
            if *a == 0 {
                continue;
            }
            if d + 1 < c.len() {
                next[d + 1] = next[d + 1].checked_add(*a)?;
            }
            next[d] = next[d].checked_sub(a.checked_mul(s)?)?;
        }
        next[0] = next[0].checked_add(*cj)?;
        out = next;
    }
    Some(out)
}

/// The coefficient column, padded to `k` per segment and shifted for the absolute origin.
fn coefficients(pieces: &[Piece], k: usize, absolute: bool) -> Result<Column, CodecError> {
    let mut all = Vec::with_capacity(pieces.len() * k);
    for p in pieces {
        let mut c = p.c.clone();
        c.resize(k, 0);
        if absolute {
            c = shifted(&c, p.start as i128).ok_or_else(|| not_encodable("coefficients overflow"))?;
        }
        all.extend(c);
    }
    col_i128(&T::I64, all, "coefficients")
}

fn fitted(p: &Json, col: &Column) -> Result<(Json, Shape, Vec<i128>), CodecError> {
    let t = column_ty(p, col)?;
    let p = with_types(&with(p, json!({"k": num_or(p, "k", 2)?})), &[("type", &t)]);
    let s = Shape { it: T::U64, ..shape(&p)? };
    Ok((p, s, ints_of(col)?))
}

fn finish(
    p: Json,
    s: &Shape,
    mut cols: Vec<(&str, Vec<u64>)>,
    coeffs: Column,
    max: u64,
) -> Result<(Json, Ports), CodecError> {
    let it = index_ty(&p, "index_type", max)?;
    let mut out = Ports::new();
    for (l, v) in cols.drain(..) {
        out.insert(l.into(), index_column(&it, v, l)?);
    }
    out.insert("coefficients".into(), coeffs);
    Ok((with_types(&p, &[("type", &s.t), ("index_type", &it)]), out))
}

// Segments given by start positions and lengths

fn generalized_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let s = shape(p)?;
    let mut b = Builder::new();
    let _ = b.input("segment_start_pos", s.it.clone());
    let l = b.input("segment_length", s.it.clone());
    let c = b.input("coefficients", T::I64);
    let (off, r) = b.run_offsets(&l);
    let out = evaluate(&mut b, &s, &c, &r, &off);
    b.output("column", &out);
    Ok(b.finish()?)
}

fn generalized_check(p: &Json, enc: &Ports) -> Result<(), String> {
    let k = shape(p).map_err(|e| e.to_string())?.k;
    let (st, l) = (indices(enc, "segment_start_pos")?, indices(enc, "segment_length")?);
    ensure(st.len() == l.len(), || "start positions and lengths differ in count".into())?;
    ensure(l.iter().all(|x| *x > 0), || "a segment is empty".into())?;
    ensure(st == starts_of(&l), || "segments leave a gap or overlap".into())?;
    coeff_count(enc, l.len() as u64, k)
}

fn generalized_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let col = the_column(dec)?;
    let (p, s, y) = fitted(p, col)?;
    let pieces = greedy(&y, s.k as usize);
    let coeffs = coefficients(&pieces, s.k as usize, s.absolute)?;
    let starts = pieces.iter().map(|x| x.start as u64).collect();
    let lens = pieces.iter().map(|x| x.len as u64).collect();
    let out = finish(p, &s, vec![("segment_start_pos", starts), ("segment_length", lens)], coeffs, y.len() as u64)?;
    confirm(generalized_decoder, &out.0, &out.1, col)?;
    Ok(out)
}

fn generalized_corrupt(_: &Json, enc: &Ports, rng: &mut StdRng) -> Option<Ports> {
    Some(with_col(enc, "segment_start_pos", tweak(enc.get("segment_start_pos")?, rng, |x| x + 1)?))
}

// Knots: segment j covers [knot_j, knot_{j+1}), the last one also its end knot n − 1.

fn knotted_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let s = shape(p)?;
    let mut b = Builder::new();
    let knots = b.input("knots", s.it.clone());
    let c = b.input("coefficients", T::I64);
    let kn = b.cast(&knots, &T::U64);
    let m = b.length(&kn);
    let last = b.reduce(&kn, crate::ops::Aggregate::Max);
    let some = b.with_const(F::Min, &m, 1u64);
    let n = b.binary(F::Add, &last, &some);
    let ids = b.iota(&m);
    let zero = b.zeros(&T::U64, &n);
    let marks = b.scatter(&zero, &kn, &ids);
    let r = b.prefix(&marks, crate::ops::Aggregate::Max, crate::ops::AggregateMode::Inclusive);
    // The end knot opens no segment of its own.
    let r1 = b.with_const(F::Add, &r, 1u64);
    let end = b.with_scalar(F::Eq, &r1, &m);
    let end = b.bit_to_u64(&end);
    let r = b.binary(F::Sub, &r, &end);
    let i = b.iota(&n);
    let at = b.gather(&r, &kn);
    let off = b.binary(F::Sub, &i, &at);
    let out = evaluate(&mut b, &s, &c, &r, &off);
    b.output("column", &out);
    Ok(b.finish()?)
}

fn knotted_check(p: &Json, enc: &Ports) -> Result<(), String> {
    let k = shape(p).map_err(|e| e.to_string())?.k;
    let kn = indices(enc, "knots")?;
    ensure(kn.len() != 1, || "a single knot bounds no segment".into())?;
    ensure(kn.first().is_none_or(|x| *x == 0), || "the first knot is not 0".into())?;
    ensure(kn.windows(2).all(|w| w[0] < w[1]), || "knots are not increasing".into())?;
    ensure(kn.last().is_none_or(|x| *x < crate::repr::MAX_DOMAIN), || "the last knot is too large".into())?;
    coeff_count(enc, kn.len().saturating_sub(1) as u64, k)
}

fn knotted_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let col = the_column(dec)?;
    let (p, s, y) = fitted(p, col)?;
    let n = y.len();
    if n == 1 {
        return Err(not_encodable("a knotted spline needs two points"));
    }
    let mut pieces = greedy(&y, s.k as usize);
    // The last segment must hold at least two points.
    if pieces.last().is_some_and(|x| x.len == 1) {
        pieces.pop();
        let prev = pieces.last_mut().unwrap();
        prev.len -= 1;
        if prev.len == 0 {
            pieces.pop();
        }
        let c = interpolate(&y[n - 2..])
            .filter(|c| c.len() <= s.k as usize)
            .or_else(|| (y[n - 2] == y[n - 1]).then(|| vec![y[n - 1]]));
        let c = c.ok_or_else(|| not_encodable("the last two points need a line"))?;
        pieces.push(Piece { start: n - 2, len: 2, c });
    }
    let coeffs = coefficients(&pieces, s.k as usize, s.absolute)?;
    let mut knots: Vec<u64> = pieces.iter().map(|x| x.start as u64).collect();
    if n > 0 {
        knots.push(n as u64 - 1);
    }
    let out = finish(p, &s, vec![("knots", knots)], coeffs, n as u64)?;
    confirm(knotted_decoder, &out.0, &out.1, col)?;
    Ok(out)
}

fn knotted_corrupt(_: &Json, enc: &Ports, rng: &mut StdRng) -> Option<Ports> {
    let k = enc.get("knots")?;
    if k.len() >= 2 && rng.random_bool(0.5) {
        return Some(with_col(enc, "knots", crate::codec::scheme::set_at(k, 0, 1)?));
    }
    coeff_corrupt(&Json::Null, enc, rng)
}

// Equal intervals

fn equi_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let s = shape(p)?;
    let mut b = Builder::new();
    let l = b.input("interval_length", s.it.clone());
    let c = b.input("coefficients", T::I64);
    let n = b.input("length", s.it.clone());
    let l = b.cast(&l, &T::U64);
    let n = b.cast(&n, &T::U64);
    let r = b.segment_of(&n, &l);
    let i = b.iota(&n);
    let st = b.with_scalar(F::Mul, &r, &l);
    let off = b.binary(F::Sub, &i, &st);
    let out = evaluate(&mut b, &s, &c, &r, &off);
    b.output("column", &out);
    Ok(b.finish()?)
}

fn equi_check(p: &Json, enc: &Ports) -> Result<(), String> {
    let k = shape(p).map_err(|e| e.to_string())?.k;
    let (l, n) = (scalar(enc, "interval_length")?, scalar(enc, "length")?);
    ensure(l > 0, || "the interval length must be positive".into())?;
    ensure(n <= crate::repr::MAX_DOMAIN, || format!("length {n} is too large"))?;
    coeff_count(enc, n.div_ceil(l), k)
}

/// Fixed-length chunks, each reproduced by one polynomial.
fn chunked(y: &[i128], l: usize, k: usize) -> Option<Vec<Piece>> {
    y.chunks(l)
        .enumerate()
        .map(|(j, c)| {
            let mut p = fit_prefix(c, k);
            p.start = j * l;
            (p.len == c.len()).then_some(p)
        })
        .collect()
}

fn equi_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let col = the_column(dec)?;
    let (p, s, y) = fitted(p, col)?;
    let k = s.k as usize;
    let (l, pieces) = match p.get("interval_length") {
        Some(_) => {
            let l = num(&p, "interval_length")?.max(1);
            (
                l,
                chunked(&y, l as usize, k)
                    .ok_or_else(|| not_encodable(format!("an interval of {l} is not polynomial")))?,
            )
        }
        None => [64u64, 32, 16, 8, 4, 2, 1].iter().find_map(|&l| chunked(&y, l as usize, k).map(|c| (l, c))).unwrap(),
    };
    let coeffs = coefficients(&pieces, k, s.absolute)?;
    let n = y.len() as u64;
    let out = finish(
        with(&p, json!({"interval_length": l})),
        &s,
        vec![("interval_length", vec![l]), ("length", vec![n])],
        coeffs,
        n.max(l),
    )?;
    confirm(equi_decoder, &out.0, &out.1, col)?;
    Ok(out)
}

/// Per-interval minimum (with `below`) or first value, as a step function.
fn equi_approx(p: &Json, col: &Column, below: bool) -> Option<Column> {
    let l = num_or(p, "interval_length", 64).ok()?.max(1) as usize;
    let y = col.to_i128s()?;
    let v: Vec<i128> = y
        .chunks(l)
        .flat_map(|c| {
            let m = if below { *c.iter().min().unwrap() } else { c[0] };
            std::iter::repeat_n(m, c.len())
        })
        .collect();
    Column::from_i128(col.element_type().clone(), v).ok()
}

fn coeff_corrupt(_: &Json, enc: &Ports, rng: &mut StdRng) -> Option<Ports> {
    Some(with_col(enc, "coefficients", resize(enc.get("coefficients")?, rng)?))
}

fn piecewise(rng: &mut StdRng, n: usize, k: usize, t: &T) -> Column {
    let (lo, hi) = t.int_range().unwrap();
    let mut v = Vec::with_capacity(n);
    while v.len() < n {
        let len = rng.random_range(1..16).min(n - v.len());
        let c: Vec<i128> = (0..k)
            .map(|j| [rng.random_range(-100..100), rng.random_range(-5..6), rng.random_range(-1..2)][j.min(2)])
            .collect();
        v.extend((0..len as i128).map(|x| poly_at(&c, x).unwrap().clamp(lo, hi)));
    }
    Column::from_i128(t.clone(), v).unwrap()
}

fn spline_hints(rng: &mut StdRng) -> (Json, usize) {
    let k = rng.random_range(1..4);
    let origin = if rng.random_bool(0.3) { "absolute" } else { "segment" };
    (json!({"k": k, "origin": origin}), k)
}

fn spline_sample(rng: &mut StdRng) -> (Json, Ports) {
    let (h, k) = spline_hints(rng);
    let n = rand_data::len(rng, 60);
    let t = [T::I32, T::I64][rng.random_range(0..2)].clone();
    (h, ports([("column", piecewise(rng, n, k, &t))]))
}

fn knotted_sample(rng: &mut StdRng) -> (Json, Ports) {
    let (h, _) = spline_hints(rng);
    let h = with(&h, json!({"k": rng.random_range(2..4)}));
    let k = h["k"].as_u64().unwrap() as usize;
    let n = if rng.random_bool(0.05) { 0 } else { rng.random_range(2..60) };
    (h, ports([("column", piecewise(rng, n, k, &T::I64))]))
}

// Frame of reference: a per-segment reference plus narrow non-negative offsets.

fn for_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let (t, it, ot) = (ty(p, "type")?, ty_or(p, "index_type", T::U64)?, ty(p, "offset_type")?);
    let mut b = Builder::new();
    let l = b.input("segment_length", it);
    let rf = b.input("reference", t.clone());
    let off = b.input("offsets", ot);
    let l = b.cast(&l, &T::U64);
    let n = b.length(&off);
    let s = b.segment_of(&n, &l);
    let base = b.gather(&s, &rf);
    let base = b.cast(&base, &T::I64);
    let o = b.cast(&off, &T::I64);
    let sum = b.binary(F::Add, &base, &o);
    let out = b.cast(&sum, &t);
    b.output("column", &out);
    Ok(b.finish()?)
}

fn for_check(_: &Json, enc: &Ports) -> Result<(), String> {
    let l = scalar(enc, "segment_length")?;
    ensure(l > 0, || "segment length must be positive".into())?;
    let n = get(enc, "offsets")?.len() as u64;
    let r = get(enc, "reference")?.len() as u64;
    ensure(r == n.div_ceil(l), || format!("{r} references for {} segments", n.div_ceil(l)))
}

fn for_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let col = the_column(dec)?;
    let t = column_ty(p, col)?;
    let y = ints_of(col)?;
    let l = num_or(p, "segment_length", 64)?.max(1);
    let refs: Vec<i128> = y.chunks(l as usize).map(|c| *c.iter().min().unwrap()).collect();
    let off: Vec<i128> = y.iter().enumerate().map(|(i, v)| v - refs[i / l as usize]).collect();
    let hi = off.iter().copied().max().unwrap_or(0);
    let ot = ty_or(p, "offset_type", T::unsigned_for(u64::try_from(hi).unwrap_or(u64::MAX)))?;
    let it = index_ty(p, "index_type", l)?;
    let cols = ports([
        ("segment_length", index_column(&it, vec![l], "segment_length")?),
        ("reference", col_i128(&t, refs, "reference")?),
        ("offsets", col_i128(&ot, off, "offsets")?),
    ]);
    let p =
        with_types(&with(p, json!({"segment_length": l})), &[("type", &t), ("index_type", &it), ("offset_type", &ot)]);
    confirm(for_decoder, &p, &cols, col)?;
    Ok((p, cols))
}

fn for_sample(rng: &mut StdRng) -> (Json, Ports) {
    let n = rand_data::len(rng, 80);
    let t = [T::I32, T::I64, T::U32, T::U16][rng.random_range(0..4)].clone();
    let mut v = Vec::with_capacity(n);
    while v.len() < n {
        let base = rand_data::int_in(rng, &t, -100_000, 100_000 - 300);
        let len = rng.random_range(1..20).min(n - v.len());
        v.extend((0..len).map(|_| base + rng.random_range(0..300)));
    }
    let h = json!({"segment_length": rng.random_range(1..20)});
    (h, ports([("column", Column::from_i128(t, v).unwrap())]))
}

fn for_corrupt(_: &Json, enc: &Ports, rng: &mut StdRng) -> Option<Ports> {
    Some(with_col(enc, "reference", resize(enc.get("reference")?, rng)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::verify_with;
    use crate::repr::testing::exercise;

    fn scheme(id: &str) -> FnScheme {
        schemes().into_iter().find(|s| s.id == id).unwrap()
    }

    fn run(id: &str, p: &Json, enc: &Ports) -> Result<Column, String> {
        let s = scheme(id);
        verify_with(&s, p, enc)?;
        Ok((s.decoder)(p).unwrap().evaluate(enc).unwrap()["column"].clone())
    }

    fn encode(id: &str, p: Json, col: &Column) -> (Json, Ports) {
        (scheme(id).encode)(&p, &ports([("column", col.clone())])).unwrap()
    }

    #[test]
    fn sampled_roundtrips() {
        for s in schemes() {
            exercise(&s, 150);
        }
    }

    #[test]
    fn equiknotted_steps() {
        let p = json!({"type": "i64", "k": 1, "index_type": "u8"});
        let u8s = |v| Column::from_u64s(T::U8, v).unwrap();
        let e = ports([
            ("interval_length", u8s(vec![2])),
            ("coefficients", Column::i64s(vec![4, 9])),
            ("length", u8s(vec![4])),
        ]);
        assert_eq!(run("spline.equiknotted", &p, &e).unwrap(), Column::i64s(vec![4, 4, 9, 9]));
        let short = with_col(&e, "length", u8s(vec![5]));
        assert!(run("spline.equiknotted", &p, &short).is_err());
    }

    /// A piecewise-linear ramp, checked against direct evaluation of each piece.
    #[test]
    fn knotted_ramp() {
        let ramp: Vec<i64> = (0..20).map(|i| if i < 8 { 3 * i } else { 24 - 2 * (i - 8) }).collect();
        let col = Column::i64s(ramp.clone());
        for origin in ["segment", "absolute"] {
            let (p, e) = encode("spline.knotted", json!({"k": 2, "origin": origin}), &col);
            // The peak fits both pieces; the greedy fit keeps it in the first.
            assert_eq!(e["knots"].to_i128s().unwrap(), vec![0, 9, 19]);
            assert_eq!(run("spline.knotted", &p, &e).unwrap(), col);
        }
        let (p, e) = encode("spline.knotted", json!({"k": 2}), &col);
        let c = e["coefficients"].to_i128s().unwrap();
        let direct: Vec<i64> =
            (0..20).map(|i| if i < 9 { (c[0] + c[1] * i) as i64 } else { (c[2] + c[3] * (i - 9)) as i64 }).collect();
        assert_eq!(direct, ramp);
        let bad = with_col(&e, "knots", Column::from_u64s(T::U8, vec![0, 19, 8]).unwrap());
        assert!(run("spline.knotted", &p, &bad).is_err());
    }

    /// One segment is the generated polynomial.
    #[test]
    fn single_segment_is_generated() {
        let col = Column::i64s((0..30).map(|i| 5 - 2 * i + i * i).collect());
        let (_, e) = encode("spline.generalized", json!({"k": 3}), &col);
        assert_eq!(e["segment_length"].len(), 1);
        assert_eq!(e["coefficients"], Column::i64s(vec![5, -2, 1]));
        let (_, e) = encode("spline.equiknotted", json!({"k": 3, "interval_length": 30}), &col);
        assert_eq!(e["coefficients"], Column::i64s(vec![5, -2, 1]));
    }

    #[test]
    fn frame_of_reference() {
        let p = json!({"type": "i64", "index_type": "u8", "offset_type": "u8"});
        let e = ports([
            ("segment_length", Column::from_u64s(T::U8, vec![2]).unwrap()),
            ("reference", Column::i64s(vec![100, 200])),
            ("offsets", Column::from_u64s(T::U8, vec![1, 2, 3]).unwrap()),
        ]);
        assert_eq!(run("for", &p, &e).unwrap(), Column::i64s(vec![101, 102, 203]));
        let z = with_col(&e, "offsets", Column::from_u64s(T::U8, vec![0, 0, 0]).unwrap());
        assert_eq!(run("for", &p, &z).unwrap(), Column::i64s(vec![100, 100, 200]));
    }

    #[test]
    fn taylor_shift() {
        let c = vec![1, 2, 3];
        let s = shifted(&c, 5).unwrap();
        for x in 5..12 {
            assert_eq!(poly_at(&s, x), poly_at(&c, x - 5));
        }
    }
}
