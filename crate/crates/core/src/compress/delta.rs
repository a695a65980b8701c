use rand::rngs::StdRng;
use rand::Rng;
use serde_json::{json, Value as Json};

use super::{confirm, ints_of, signed_fit};
use crate::circuit::{Builder, Circuit, Wire};
use crate::codec::scheme::{
    col_i128, column_ty, index_ty, num_or, rand_data, resize, set_at, the_column, ty, ty_or, with_col, FnScheme,
};
use crate::codec::{ensure, get, index_column, indices, not_encodable, ports, scalar, with, CodecError};
use crate::column::{Column, ElementType as T};
use crate::ops::{Aggregate, AggregateMode, ElementwiseFn as F, Ports};
use crate::repr::with_types;

pub(super) fn schemes() -> Vec<FnScheme> {
    vec![
        FnScheme::new("delta.naive", naive_decoder, naive_check, naive_encode, delta_sample).corrupt(base_corrupt),
        FnScheme::new("delta", segmented_decoder, segmented_check, segmented_encode, delta_sample)
            .corrupt(base_corrupt),
        FnScheme::new("delta.patched", patched_decoder, patched_check, patched_encode, spiky_sample)
            .corrupt(patched_corrupt),
    ]
}

fn delta_sample(rng: &mut StdRng) -> (Json, Ports) {
    let n = rand_data::len(rng, 80);
    let t = [T::I32, T::I64, T::U32, T::U16][rng.random_range(0..4)].clone();
    let (lo, hi) = t.int_range().unwrap();
    let mut x = rand_data::int_in(rng, &t, 0, 30_000);
    let mut v = Vec::with_capacity(n);
    for _ in 0..n {
        x = (x + rng.random_range(-100..200)).clamp(lo, hi.min(1 << 40));
        v.push(x);
    }
    let h = json!({"segment_length": rng.random_range(1..30)});
    (h, ports([("column", Column::from_i128(t, v).unwrap())]))
}

/// Mostly small steps with occasional jumps.
fn spiky_sample(rng: &mut StdRng) -> (Json, Ports) {
    let n = rand_data::len(rng, 80);
    let mut x = 0i128;
    let v: Vec<i128> = (0..n)
        .map(|_| {
            x += if rng.random_bool(0.08) { rng.random_range(-100_000..100_000) } else { rng.random_range(-50..50) };
            x
        })
        .collect();
    let h = if rng.random_bool(0.5) { json!({"delta_type": "i8"}) } else { json!({}) };
    (
        with(&h, json!({"segment_length": rng.random_range(1..40)})),
        ports([("column", Column::from_i128(T::I64, v).unwrap())]),
    )
}

fn base_corrupt(_: &Json, enc: &Ports, rng: &mut StdRng) -> Option<Ports> {
    Some(with_col(enc, "base", resize(enc.get("base")?, rng)?))
}

fn differences(y: &[i128], l: usize) -> Vec<i128> {
    (0..y.len()).map(|i| if i % l == 0 { 0 } else { y[i] - y[i - 1] }).collect()
}

// Single chain

fn naive_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let (t, dt) = (ty(p, "type")?, ty(p, "delta_type")?);
    let mut b = Builder::new();
    let base = b.input("base", t.clone());
    let d = b.input("delta", dt);
    let d = b.cast(&d, &T::I64);
    let run = b.prefix(&d, Aggregate::Add, AggregateMode::Inclusive);
    let base = b.cast(&base, &T::I64);
    let sum = b.with_scalar(F::Add, &run, &base);
    let out = b.cast(&sum, &t);
    b.output("column", &out);
    Ok(b.finish()?)
}

fn naive_check(_: &Json, enc: &Ports) -> Result<(), String> {
    let n = get(enc, "base")?.len();
    ensure(n == 1, || format!("`base` must be a scalar, has length {n}"))
}

fn naive_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let col = the_column(dec)?;
    let t = column_ty(p, col)?;
    let y = ints_of(col)?;
    let d = differences(&y, usize::MAX);
    let dt = ty_or(p, "delta_type", delta_type(&d))?;
    let cols = ports([
        ("base", col_i128(&t, vec![y.first().copied().unwrap_or(0)], "base")?),
        ("delta", col_i128(&dt, d, "delta")?),
    ]);
    let p = with_types(p, &[("type", &t), ("delta_type", &dt)]);
    confirm(naive_decoder, &p, &cols, col)?;
    Ok((p, cols))
}

fn delta_type(d: &[i128]) -> T {
    signed_fit(d.iter().copied().min().unwrap_or(0), d.iter().copied().max().unwrap_or(0))
}

// Chains restarting at every segment

/// `base[s] + P[i] − E[s·ℓ]` with `P`, `E` the inclusive and exclusive running sums.
fn integrate(b: &mut Builder, t: &T, len: &Wire, base: &Wire, d: &Wire) -> Wire {
    let l = b.cast(len, &T::U64);
    let n = b.length(d);
    let s = b.segment_of(&n, &l);
    let inc = b.prefix(d, Aggregate::Add, AggregateMode::Inclusive);
    let exc = b.prefix(d, Aggregate::Add, AggregateMode::Exclusive);
    let first = b.with_scalar(F::Mul, &s, &l);
    let origin = b.gather(&first, &exc);
    let base = b.cast(base, &T::I64);
    let base = b.gather(&s, &base);
    let rel = b.binary(F::Sub, &inc, &origin);
    let sum = b.binary(F::Add, &base, &rel);
    b.cast(&sum, t)
}

fn segmented_types(p: &Json) -> Result<(T, T, T), CodecError> {
    Ok((ty(p, "type")?, ty_or(p, "index_type", T::U64)?, ty(p, "delta_type")?))
}

fn segmented_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let (t, it, dt) = segmented_types(p)?;
    let mut b = Builder::new();
    let l = b.input("segment_length", it);
    let base = b.input("base", t.clone());
    let d = b.input("delta", dt);
    let d = b.cast(&d, &T::I64);
    let out = integrate(&mut b, &t, &l, &base, &d);
    b.output("column", &out);
    Ok(b.finish()?)
}

fn segmented_check(_: &Json, enc: &Ports) -> Result<(), String> {
    let l = scalar(enc, "segment_length")?;
    ensure(l > 0, || "segment length must be positive".into())?;
    let n = get(enc, "delta")?.len() as u64;
    let m = get(enc, "base")?.len() as u64;
    ensure(m == n.div_ceil(l), || format!("{m} bases for {} segments", n.div_ceil(l)))
}

struct Chains {
    t: T,
    l: u64,
    bases: Vec<i128>,
    d: Vec<i128>,
}

fn chains(p: &Json, col: &Column) -> Result<Chains, CodecError> {
    let t = column_ty(p, col)?;
    let y = ints_of(col)?;
    let l = num_or(p, "segment_length", 128)?.max(1);
    let bases = y.iter().step_by(l as usize).copied().collect();
    Ok(Chains { d: differences(&y, l as usize), t, l, bases })
}

fn segmented_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let col = the_column(dec)?;
    let c = chains(p, col)?;
    let dt = ty_or(p, "delta_type", delta_type(&c.d))?;
    let it = index_ty(p, "index_type", c.l)?;
    let cols = ports([
        ("segment_length", index_column(&it, vec![c.l], "segment_length")?),
        ("base", col_i128(&c.t, c.bases, "base")?),
        ("delta", col_i128(&dt, c.d, "delta")?),
    ]);
    let p = with_types(
        &with(p, json!({"segment_length": c.l})),
        &[("type", &c.t), ("index_type", &it), ("delta_type", &dt)],
    );
    confirm(segmented_decoder, &p, &cols, col)?;
    Ok((p, cols))
}

// Patches applied to the differences before integration

fn patched_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let (t, it, dt) = segmented_types(p)?;
    let pt = ty_or(p, "patch_index_type", T::U32)?;
    let mut b = Builder::new();
    let l = b.input("segment_length", it);
    let base = b.input("base", t.clone());
    let d = b.input("delta", dt);
    let pos = b.input("patch_pos", pt);
    let data = b.input("patch_data", T::I64);
    let d = b.cast(&d, &T::I64);
    let d = b.scatter(&d, &pos, &data);
    let out = integrate(&mut b, &t, &l, &base, &d);
    b.output("column", &out);
    Ok(b.finish()?)
}

fn patched_check(p: &Json, enc: &Ports) -> Result<(), String> {
    segmented_check(p, enc)?;
    let pos = indices(enc, "patch_pos")?;
    let m = get(enc, "patch_data")?.len();
    ensure(pos.len() == m, || format!("{} patch positions for {m} patch values", pos.len()))?;
    ensure(pos.windows(2).all(|w| w[0] < w[1]), || "patch positions are not increasing".into())
}

/// Positions whose difference does not fit `dt`.
fn outliers(d: &[i128], dt: &T) -> Vec<usize> {
    let (lo, hi) = dt.int_range().unwrap();
    (0..d.len()).filter(|&i| d[i] < lo || d[i] > hi).collect()
}

fn patched_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let col = the_column(dec)?;
    let c = chains(p, col)?;
    let n = c.d.len();
    let pt = index_ty(p, "patch_index_type", n.saturating_sub(1) as u64)?;
    let cost =
        |dt: &T| n as u64 * dt.width_bits() as u64 + outliers(&c.d, dt).len() as u64 * (pt.width_bits() as u64 + 64);
    let dt = match p.get("delta_type") {
        Some(_) => ty(p, "delta_type")?,
        None => [T::I8, T::I16, T::I32, T::I64].into_iter().min_by_key(cost).unwrap(),
    };
    if !dt.is_integer() || dt.is_unsigned() {
        return Err(CodecError::BadParams(format!("delta type {dt} must be a signed integer type")));
    }
    let at = outliers(&c.d, &dt);
    let mut narrow = c.d.clone();
    for &i in &at {
        narrow[i] = 0;
    }
    let it = index_ty(p, "index_type", c.l)?;
    let cols = ports([
        ("segment_length", index_column(&it, vec![c.l], "segment_length")?),
        ("base", col_i128(&c.t, c.bases, "base")?),
        ("delta", col_i128(&dt, narrow, "delta")?),
        ("patch_pos", index_column(&pt, at.iter().map(|&i| i as u64).collect(), "patch_pos")?),
        ("patch_data", col_i128(&T::I64, at.iter().map(|&i| c.d[i]).collect(), "patch_data")?),
    ]);
    let p = with_types(
        &with(p, json!({"segment_length": c.l})),
        &[("type", &c.t), ("index_type", &it), ("delta_type", &dt), ("patch_index_type", &pt)],
    );
    confirm(patched_decoder, &p, &cols, col).map_err(|_| not_encodable("differences overflow the work type"))?;
    Ok((p, cols))
}

fn patched_corrupt(_: &Json, enc: &Ports, rng: &mut StdRng) -> Option<Ports> {
    let pos = enc.get("patch_pos")?;
    if pos.len() >= 2 {
        let v = pos.value(0).as_u64()? as i128;
        return Some(with_col(enc, "patch_pos", set_at(pos, 1, v)?));
    }
    Some(with_col(enc, "patch_data", resize(enc.get("patch_data")?, rng)?))
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

    fn i8s(v: Vec<i128>) -> Column {
        Column::from_i128(T::I8, v).unwrap()
    }

    #[test]
    fn sampled_roundtrips() {
        for s in schemes() {
            exercise(&s, 150);
        }
    }

    #[test]
    fn chains() {
        let p = json!({"type": "i64", "delta_type": "i8"});
        let e = ports([("base", Column::i64s(vec![10])), ("delta", i8s(vec![-1, 2, 2]))]);
        assert_eq!(run("delta.naive", &p, &e).unwrap(), Column::i64s(vec![9, 11, 13]));
        let p = json!({"type": "i64", "delta_type": "i8", "index_type": "u8"});
        let e = ports([
            ("segment_length", Column::from_u64s(T::U8, vec![2]).unwrap()),
            ("base", Column::i64s(vec![0, 100])),
            ("delta", i8s(vec![1, 1, 2, 3])),
        ]);
        assert_eq!(run("delta", &p, &e).unwrap(), Column::i64s(vec![1, 2, 102, 105]));
    }

    /// Fewest decompressed-domain patches: keep the longest chain of elements whose
    /// pairwise differences a run of narrow deltas can bridge.
    fn decompressed_patches(y: &[i128], step: i128) -> usize {
        let mut best = vec![1usize; y.len()];
        for b in 0..y.len() {
            for a in 0..b {
                if (y[b] - y[a]).abs() <= step * (b - a) as i128 {
                    best[b] = best[b].max(best[a] + 1);
                }
            }
        }
        y.len() - best.into_iter().max().unwrap_or(0)
    }

    /// k zeros followed by copies of (k+1)·M: one compressed-domain patch against at least k.
    #[test]
    fn compressed_domain_patching() {
        let (k, m) = (4usize, 127i128);
        for copies in [k, k + 3] {
            let mut y = vec![0i128; k];
            y.extend(std::iter::repeat_n((k as i128 + 1) * m, copies));
            let col = Column::from_i128(T::I64, y.clone()).unwrap();
            let hints = json!({"delta_type": "i8", "segment_length": y.len()});
            let (p, e) = (scheme("delta.patched").encode)(&hints, &ports([("column", col.clone())])).unwrap();
            assert_eq!(e["patch_pos"].to_i128s().unwrap(), vec![k as i128]);
            assert_eq!(run("delta.patched", &p, &e).unwrap(), col);
            assert!(decompressed_patches(&y, m) >= k);
        }
    }
}
