use rand::rngs::StdRng;
use rand::Rng;
use serde_json::{json, Value as Json};

use crate::circuit::{Builder, Circuit};
use crate::codec::scheme::{
    col_values, column_ty, index_ty, is_strictly_increasing, num, rand_data, runs, set_at, starts_of, the_column,
    tweak, ty, ty_or, with_col, FnScheme,
};
use crate::codec::{ensure, get, index_column, indices, not_encodable, ports, scalar, with, CodecError};
use crate::column::{Column, ElementType as T, Value};
use crate::ops::{Aggregate, AggregateMode, Ports};
use crate::repr::with_types;

pub(super) fn schemes() -> Vec<FnScheme> {
    vec![
        FnScheme::new("run.full", full_decoder, full_check, full_encode, runs_sample).corrupt(full_corrupt),
        FnScheme::new("run.rle", rle_decoder, rle_check, rle_encode, runs_sample).corrupt(rle_corrupt),
        FnScheme::new("run.rpe", rpe_decoder, rpe_check, rpe_encode, runs_sample).corrupt(rpe_corrupt),
        FnScheme::new("run.rle.capped", rle_decoder, capped_check, capped_encode, capped_sample)
            .corrupt(capped_corrupt),
    ]
}

fn runs_sample(rng: &mut StdRng) -> (Json, Ports) {
    let n = rand_data::len(rng, 80);
    let col = match rng.random_range(0..6) {
        0 => {
            let b = rand_data::runs(rng, &T::U8, n, 9);
            Column::bits(b.iter().map(|v| v.as_u64().unwrap() % 2 == 1).collect())
        }
        1 => {
            let f = rand_data::floats(rng, 6);
            let r = rand_data::runs(rng, &T::U8, n, 9);
            f.take(&r.iter().map(|v| v.as_u64().unwrap() as usize % 6).collect::<Vec<_>>())
        }
        _ => {
            let t = rand_data::int_type(rng);
            rand_data::runs(rng, &t, n, 12)
        }
    };
    (json!({}), ports([("column", col)]))
}

fn capped_sample(rng: &mut StdRng) -> (Json, Ports) {
    let (_, d) = runs_sample(rng);
    (json!({"cap": rng.random_range(1..6)}), d)
}

/// Maximal runs as value column and lengths.
fn split_runs(col: &Column, t: &T) -> Result<(Column, Vec<u64>), CodecError> {
    let (v, l): (Vec<Value>, Vec<u64>) = runs(col).into_iter().unzip();
    Ok((col_values(t, v, "values")?, l))
}

fn run_form(
    p: &Json,
    t: &T,
    cols: Vec<(&str, Vec<u64>)>,
    values: Column,
    max: u64,
) -> Result<(Json, Ports), CodecError> {
    let it = index_ty(p, "index_type", max)?;
    let mut out = Ports::new();
    for (label, v) in cols {
        out.insert(label.into(), index_column(&it, v, label)?);
    }
    out.insert("value".into(), values);
    Ok((with_types(p, &[("type", t), ("index_type", &it)]), out))
}

fn types(p: &Json) -> Result<(T, T), CodecError> {
    Ok((ty(p, "type")?, ty_or(p, "index_type", T::U64)?))
}

fn positive_lengths(l: &[u64]) -> Result<(), String> {
    ensure(l.iter().all(|x| *x > 0), || "a run has length 0".into())
}

fn aligned(enc: &Ports, a: &str, b: &str) -> Result<(), String> {
    let (x, y) = (get(enc, a)?.len(), get(enc, b)?.len());
    ensure(x == y, || format!("`{a}` has {x} entries, `{b}` has {y}"))
}

// Start positions, lengths and values

fn full_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let (t, it) = types(p)?;
    let mut b = Builder::new();
    let _ = b.input("start_position", it.clone());
    let l = b.input("length", it);
    let v = b.input("value", t);
    let out = b.expand(&v, &l);
    b.output("column", &out);
    Ok(b.finish()?)
}

fn full_check(p: &Json, enc: &Ports) -> Result<(), String> {
    rle_check(p, enc)?;
    aligned(enc, "start_position", "length")?;
    let s = indices(enc, "start_position")?;
    ensure(s == starts_of(&indices(enc, "length")?), || "runs leave a gap or overlap".into())
}

fn full_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let col = the_column(dec)?;
    let t = column_ty(p, col)?;
    let (v, l) = split_runs(col, &t)?;
    let s = starts_of(&l);
    run_form(p, &t, vec![("start_position", s), ("length", l)], v, col.len() as u64)
}

fn full_corrupt(_: &Json, enc: &Ports, rng: &mut StdRng) -> Option<Ports> {
    Some(with_col(enc, "start_position", tweak(enc.get("start_position")?, rng, |x| x + 1)?))
}

// Lengths and values

fn rle_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let (t, it) = types(p)?;
    let mut b = Builder::new();
    let l = b.input("length", it);
    let v = b.input("value", t);
    let out = b.expand(&v, &l);
    b.output("column", &out);
    Ok(b.finish()?)
}

fn rle_check(_: &Json, enc: &Ports) -> Result<(), String> {
    aligned(enc, "length", "value")?;
    positive_lengths(&indices(enc, "length")?)
}

fn rle_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let col = the_column(dec)?;
    let t = column_ty(p, col)?;
    let (v, l) = split_runs(col, &t)?;
    let max = l.iter().copied().max().unwrap_or(0);
    run_form(p, &t, vec![("length", l)], v, max)
}

fn rle_corrupt(_: &Json, enc: &Ports, rng: &mut StdRng) -> Option<Ports> {
    Some(with_col(enc, "length", tweak(enc.get("length")?, rng, |_| 0)?))
}

// Start positions only, with the overall length

fn rpe_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let (t, it) = types(p)?;
    let mut b = Builder::new();
    let s = b.input("start_position", it.clone());
    let v = b.input("value", t);
    let n = b.input("overall_length", it);
    let n = b.cast(&n, &T::U64);
    let m = b.length(&s);
    let ids = b.iota(&m);
    let zero = b.zeros(&T::U64, &n);
    let marks = b.scatter(&zero, &s, &ids);
    let r = b.prefix(&marks, Aggregate::Max, AggregateMode::Inclusive);
    let out = b.gather(&r, &v);
    b.output("column", &out);
    Ok(b.finish()?)
}

fn rpe_check(_: &Json, enc: &Ports) -> Result<(), String> {
    aligned(enc, "start_position", "value")?;
    let s = indices(enc, "start_position")?;
    let n = scalar(enc, "overall_length")?;
    ensure(s.first().is_none_or(|x| *x == 0), || "the first run does not start at 0".into())?;
    ensure(is_strictly_increasing(&s), || "start positions are not increasing".into())?;
    ensure(s.last().is_none_or(|x| *x < n), || format!("a run starts past the length {n}"))?;
    ensure(n == 0 || !s.is_empty(), || "a non-empty column needs a run".into())
}

fn rpe_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let col = the_column(dec)?;
    let t = column_ty(p, col)?;
    let (v, l) = split_runs(col, &t)?;
    let n = col.len() as u64;
    run_form(p, &t, vec![("start_position", starts_of(&l)), ("overall_length", vec![n])], v, n)
}

fn rpe_corrupt(_: &Json, enc: &Ports, rng: &mut StdRng) -> Option<Ports> {
    let s = enc.get("start_position")?;
    if s.len() >= 2 && rng.random_bool(0.5) {
        return Some(with_col(enc, "start_position", set_at(s, 1, 0)?));
    }
    let n = enc.get("overall_length")?;
    let v = n.scalar_value_u64()?;
    if v == 0 {
        return None;
    }
    Some(with_col(enc, "start_position", set_at(s, s.len() - 1, v as i128)?))
}

// Lengths capped at r

fn capped_check(p: &Json, enc: &Ports) -> Result<(), String> {
    rle_check(p, enc)?;
    let r = num(p, "cap").map_err(|e| e.to_string())?;
    ensure(indices(enc, "length")?.iter().all(|x| *x <= r), || format!("a run is longer than the cap {r}"))
}

/// A run of length `L` becomes ⌊L/r⌋ runs of `r` and one of `L mod r` when that is non-zero.
pub fn cap_runs(lengths: &[u64], r: u64) -> Vec<(usize, u64)> {
    let mut out = Vec::new();
    for (j, &l) in lengths.iter().enumerate() {
        out.extend(std::iter::repeat_n((j, r), (l / r) as usize));
        if l % r != 0 {
            out.push((j, l % r));
        }
    }
    out
}

fn capped_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let col = the_column(dec)?;
    let t = column_ty(p, col)?;
    let r = num(p, "cap")?;
    if r == 0 {
        return Err(CodecError::BadParams("the cap must be positive".into()));
    }
    let (v, l) = split_runs(col, &t)?;
    let pieces = cap_runs(&l, r);
    let values = v.take(&pieces.iter().map(|x| x.0).collect::<Vec<_>>());
    let lengths: Vec<u64> = pieces.iter().map(|x| x.1).collect();
    let max = lengths.iter().copied().max().unwrap_or(0);
    if max > r {
        return Err(not_encodable("run split failed"));
    }
    run_form(&with(p, json!({"cap": r})), &t, vec![("length", lengths)], values, r)
}

fn capped_corrupt(p: &Json, enc: &Ports, rng: &mut StdRng) -> Option<Ports> {
    let r = p.get("cap")?.as_u64()? as i128;
    Some(with_col(enc, "length", tweak(enc.get("length")?, rng, |_| r + 1)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::verify_with;
    use crate::repr::testing::exercise;

    fn scheme(id: &str) -> FnScheme {
        schemes().into_iter().find(|s| s.id == id).unwrap()
    }

    fn bytes(s: &str) -> Column {
        Column::from_u64s(T::U8, s.bytes().map(u64::from).collect()).unwrap()
    }

    fn u8s(v: Vec<u64>) -> Column {
        Column::from_u64s(T::U8, v).unwrap()
    }

    fn run(id: &str, p: &Json, enc: &Ports) -> Result<Column, String> {
        let s = scheme(id);
        verify_with(&s, p, enc)?;
        Ok((s.decoder)(p).unwrap().evaluate(enc).unwrap()["column"].clone())
    }

    #[test]
    fn sampled_roundtrips() {
        for s in schemes() {
            exercise(&s, 150);
        }
    }

    #[test]
    fn run_forms() {
        let p = json!({"type": "u8", "index_type": "u8"});
        let rle = ports([("value", bytes("ab")), ("length", u8s(vec![2, 3]))]);
        assert_eq!(run("run.rle", &p, &rle).unwrap(), bytes("aabbb"));
        let rpe =
            ports([("value", bytes("ab")), ("start_position", u8s(vec![0, 2])), ("overall_length", u8s(vec![5]))]);
        assert_eq!(run("run.rpe", &p, &rpe).unwrap(), bytes("aabbb"));
        let full = ports([("value", bytes("ab")), ("start_position", u8s(vec![0, 2])), ("length", u8s(vec![2, 3]))]);
        assert_eq!(run("run.full", &p, &full).unwrap(), bytes("aabbb"));
        let gap = with_col(&full, "start_position", u8s(vec![0, 3]));
        assert!(run("run.full", &p, &gap).is_err());
        let zero = with_col(&rle, "length", u8s(vec![0, 5]));
        assert!(run("run.rle", &p, &zero).is_err());
    }

    #[test]
    fn capped_split() {
        let s = scheme("run.rle.capped");
        let (p, e) = (s.encode)(&json!({"cap": 2}), &ports([("column", bytes("xxxxx"))])).unwrap();
        assert_eq!(e["length"].to_i128s().unwrap(), vec![2, 2, 1]);
        assert_eq!(e["value"], bytes("xxx"));
        assert_eq!(cap_runs(&[4, 1], 2), vec![(0, 2), (0, 2), (1, 1)]);
        assert!(run("run.rle", &p, &e).is_ok());
    }
}
