use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::Rng;
use serde_json::{json, Value as Json};

use crate::circuit::{Builder, Circuit};
use crate::codec::scheme::{index_ty, num, rand_data, resize, set_at, starts_of, tweak, ty, ty_or, with_col, FnScheme};
use crate::codec::{ensure, get, index_column, indices, input, not_encodable, ports, scalar, with, CodecError};
use crate::column::{Column, ElementType as T, Value};
use crate::ops::{ElementwiseFn as F, Ports};
use crate::repr::{nonneg, with_types, MAX_DOMAIN};

pub(super) fn schemes() -> Vec<FnScheme> {
    vec![
        FnScheme::new("pvw", pvw_decoder, pvw_check, pvw_encode, periodic_sample).corrupt(pvw_corrupt),
        FnScheme::new("vwdict", vw_decoder, vw_check, vw_encode, words_sample).corrupt(vw_corrupt),
        FnScheme::new("vwdict.unique", vw_decoder, vw_unique_check, vw_encode, words_sample).corrupt(vw_unique_corrupt),
        FnScheme::new("vwdict.monotone", vw_decoder, vw_monotone_check, vw_monotone_encode, words_sample)
            .corrupt(vw_monotone_corrupt),
    ]
}

/// Element lengths and the element list.
fn elements(dec: &Ports) -> Result<(Vec<u64>, &Column), CodecError> {
    let l = nonneg(input(dec, "element_lengths")?, "element_lengths")?;
    let data = input(dec, "elements")?;
    if l.iter().sum::<u64>() != data.len() as u64 {
        return Err(not_encodable("element lengths do not add up to the data length"));
    }
    Ok((l, data))
}

fn family(lengths: Vec<u64>, data: Vec<u64>) -> Ports {
    ports([("element_lengths", Column::u64s(lengths)), ("elements", Column::from_u64s(T::U8, data).unwrap())])
}

// Widths shared by each group of `period` consecutive elements

fn pvw_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let (t, it, wt) = (ty(p, "type")?, ty_or(p, "index_type", T::U64)?, ty_or(p, "width_type", T::U64)?);
    let mut b = Builder::new();
    let period = b.input("period", it.clone());
    let w = b.input("widths", wt);
    let n = b.input("length", it);
    let data = b.input("data", t);
    let period = b.cast(&period, &T::U64);
    let n = b.cast(&n, &T::U64);
    let g = b.segment_of(&n, &period);
    let w = b.cast(&w, &T::U64);
    let lens = b.gather(&g, &w);
    b.output("element_lengths", &lens);
    b.output("elements", &data);
    Ok(b.finish()?)
}

fn pvw_check(_: &Json, enc: &Ports) -> Result<(), String> {
    let (period, n) = (scalar(enc, "period")?, scalar(enc, "length")?);
    ensure(period > 0, || "the period must be positive".into())?;
    ensure(n <= MAX_DOMAIN, || format!("length {n} is too large"))?;
    let w = indices(enc, "widths")?;
    ensure(w.len() as u64 == n.div_ceil(period), || format!("{} widths for {} groups", w.len(), n.div_ceil(period)))?;
    let used = w.iter().enumerate().try_fold(0u64, |acc, (g, x)| {
        let size = period.min(n - g as u64 * period);
        acc.checked_add(x.checked_mul(size)?)
    });
    let d = get(enc, "data")?.len() as u64;
    ensure(used == Some(d), || format!("groups cover {used:?} data elements, {d} given"))
}

fn pvw_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let (l, data) = elements(dec)?;
    let t = data.element_type().clone();
    let uniform = |q: usize| l.chunks(q).all(|c| c.iter().all(|x| *x == c[0]));
    let period = match p.get("period") {
        Some(_) => {
            let q = num(p, "period")?.max(1);
            if !uniform(q as usize) {
                return Err(not_encodable(format!("element lengths vary within a group of {q}")));
            }
            q
        }
        None => [64u64, 32, 16, 8, 4, 2, 1].into_iter().find(|q| uniform(*q as usize)).unwrap(),
    };
    let w: Vec<u64> = l.chunks(period as usize).map(|c| c[0]).collect();
    let n = l.len() as u64;
    let it = index_ty(p, "index_type", n.max(period))?;
    let wt = index_ty(p, "width_type", w.iter().copied().max().unwrap_or(0))?;
    let cols = ports([
        ("period", index_column(&it, vec![period], "period")?),
        ("widths", index_column(&wt, w, "widths")?),
        ("length", index_column(&it, vec![n], "length")?),
        ("data", data.clone()),
    ]);
    Ok((
        with_types(&with(p, json!({"period": period})), &[("type", &t), ("index_type", &it), ("width_type", &wt)]),
        cols,
    ))
}

fn periodic_sample(rng: &mut StdRng) -> (Json, Ports) {
    let period = rng.random_range(1..6u64);
    let groups = rand_data::len(rng, 8);
    let mut lengths = Vec::new();
    for g in 0..groups {
        let size = if g + 1 == groups { rng.random_range(1..=period) } else { period };
        let w = rng.random_range(0..5);
        lengths.extend(std::iter::repeat_n(w, size as usize));
    }
    let total: u64 = lengths.iter().sum();
    let data = (0..total).map(|_| rng.random_range(97..100)).collect();
    (json!({"period": period}), family(lengths, data))
}

fn pvw_corrupt(_: &Json, enc: &Ports, rng: &mut StdRng) -> Option<Ports> {
    if rng.random_bool(0.5) {
        return Some(with_col(enc, "widths", resize(enc.get("widths")?, rng)?));
    }
    let d = enc.get("data")?;
    let extra = Column::new(d.element_type().clone(), vec![crate::codec::scheme::zero_of(d.element_type())]).ok()?;
    Some(with_col(enc, "data", Column::concat(&[d, &extra], d.element_type()).ok()?))
}

// Dictionary of variable-width entries

fn vw_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let (t, it, et) = (ty(p, "type")?, ty_or(p, "index_type", T::U32)?, ty_or(p, "entry_type", T::U32)?);
    let mut b = Builder::new();
    let idx = b.input("indices", it);
    let st = b.input("entry_start_positions", et.clone());
    let ln = b.input("entry_lengths", et);
    let data = b.input("entry_data", t);
    let st = b.gather(&idx, &st);
    let st = b.cast(&st, &T::U64);
    let ln = b.gather(&idx, &ln);
    let ln = b.cast(&ln, &T::U64);
    let (off, r) = b.run_offsets(&ln);
    let base = b.gather(&r, &st);
    let at = b.binary(F::Add, &base, &off);
    let out = b.gather(&at, &data);
    b.output("element_lengths", &ln);
    b.output("elements", &out);
    Ok(b.finish()?)
}

/// The entries as value sequences.
fn entries(enc: &Ports) -> Result<Vec<Vec<Value>>, String> {
    let (st, ln) = (indices(enc, "entry_start_positions")?, indices(enc, "entry_lengths")?);
    ensure(st.len() == ln.len(), || format!("{} entry starts for {} entry lengths", st.len(), ln.len()))?;
    let data = get(enc, "entry_data")?;
    st.iter()
        .zip(&ln)
        .map(|(s, l)| {
            let end =
                s.checked_add(*l).filter(|e| *e <= data.len() as u64).ok_or("an entry overruns the entry data")?;
            Ok((*s..end).map(|i| data.value(i as usize)).collect())
        })
        .collect()
}

fn vw_check(_: &Json, enc: &Ports) -> Result<(), String> {
    let e = entries(enc)?;
    let idx = indices(enc, "indices")?;
    ensure(idx.iter().all(|x| (*x as usize) < e.len()), || format!("an index exceeds the {} entries", e.len()))?;
    let total =
        idx.iter().try_fold(0u64, |a, x| a.checked_add(e[*x as usize].len() as u64)).ok_or("decoded size overflows")?;
    ensure(total <= MAX_DOMAIN, || format!("{total} decoded elements exceed {MAX_DOMAIN}"))
}

fn vw_unique_check(p: &Json, enc: &Ports) -> Result<(), String> {
    vw_check(p, enc)?;
    let mut e = entries(enc)?;
    e.sort();
    ensure(e.windows(2).all(|x| x[0] != x[1]), || "two entries are equal".into())
}

fn vw_monotone_check(p: &Json, enc: &Ports) -> Result<(), String> {
    vw_check(p, enc)?;
    ensure(entries(enc)?.windows(2).all(|x| x[0] < x[1]), || "entries are not increasing".into())
}

fn words(dec: &Ports) -> Result<(Vec<Vec<Value>>, T), CodecError> {
    let (l, data) = elements(dec)?;
    let w = starts_of(&l).iter().zip(&l).map(|(s, n)| (*s..s + n).map(|i| data.value(i as usize)).collect()).collect();
    Ok((w, data.element_type().clone()))
}

fn vw_form(p: &Json, t: &T, dict: Vec<Vec<Value>>, idx: Vec<u64>) -> Result<(Json, Ports), CodecError> {
    let lens: Vec<u64> = dict.iter().map(|e| e.len() as u64).collect();
    let st = starts_of(&lens);
    let total: u64 = lens.iter().sum();
    let it = index_ty(p, "index_type", dict.len().saturating_sub(1) as u64)?;
    let et = index_ty(p, "entry_type", total)?;
    let cols = ports([
        ("indices", index_column(&it, idx, "indices")?),
        ("entry_start_positions", index_column(&et, st, "entry_start_positions")?),
        ("entry_lengths", index_column(&et, lens, "entry_lengths")?),
        ("entry_data", Column::new(t.clone(), dict.concat())?),
    ]);
    Ok((with_types(p, &[("type", t), ("index_type", &it), ("entry_type", &et)]), cols))
}

fn vw_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let (w, t) = words(dec)?;
    let mut at: BTreeMap<Vec<Value>, u64> = BTreeMap::new();
    let mut dict = Vec::new();
    let idx = w
        .into_iter()
        .map(|x| {
            *at.entry(x.clone()).or_insert_with(|| {
                dict.push(x);
                dict.len() as u64 - 1
            })
        })
        .collect();
    vw_form(p, &t, dict, idx)
}

fn vw_monotone_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let (w, t) = words(dec)?;
    let mut dict = w.clone();
    dict.sort();
    dict.dedup();
    let idx = w.iter().map(|x| dict.binary_search(x).unwrap() as u64).collect();
    vw_form(p, &t, dict, idx)
}

fn words_sample(rng: &mut StdRng) -> (Json, Ports) {
    let v = rng.random_range(1..8);
    let vocab = rand_data::strings(rng, v, 5, 4);
    let n = rand_data::len(rng, 30);
    let seq: Vec<&Vec<u8>> = (0..n).map(|_| &vocab[rng.random_range(0..vocab.len())]).collect();
    let lengths = seq.iter().map(|w| w.len() as u64).collect();
    let data = seq.iter().flat_map(|w| w.iter().map(|b| u64::from(*b))).collect();
    (json!({}), family(lengths, data))
}

fn vw_corrupt(_: &Json, enc: &Ports, rng: &mut StdRng) -> Option<Ports> {
    let e = enc.get("entry_lengths")?.len() as i128;
    match tweak(enc.get("indices")?, rng, |_| e) {
        Some(c) => Some(with_col(enc, "indices", c)),
        None => {
            let d = enc.get("entry_data")?.len() as i128;
            Some(with_col(enc, "entry_start_positions", tweak(enc.get("entry_start_positions")?, rng, |_| d + 1)?))
        }
    }
}

/// Appends a second copy of the first entry.
fn vw_unique_corrupt(_: &Json, enc: &Ports, _: &mut StdRng) -> Option<Ports> {
    let (st, ln) = (enc.get("entry_start_positions")?, enc.get("entry_lengths")?);
    if st.is_empty() {
        return None;
    }
    let st2 = Column::concat(&[st, &st.slice(0, 1)], st.element_type()).ok()?;
    let ln2 = Column::concat(&[ln, &ln.slice(0, 1)], ln.element_type()).ok()?;
    Some(with_col(&with_col(enc, "entry_start_positions", st2), "entry_lengths", ln2))
}

fn vw_monotone_corrupt(p: &Json, enc: &Ports, rng: &mut StdRng) -> Option<Ports> {
    let (st, ln) = (enc.get("entry_start_positions")?, enc.get("entry_lengths")?);
    if st.len() < 2 {
        return vw_unique_corrupt(p, enc, rng);
    }
    let (s0, s1) = (st.value(0).as_u64()? as i128, st.value(1).as_u64()? as i128);
    let (l0, l1) = (ln.value(0).as_u64()? as i128, ln.value(1).as_u64()? as i128);
    let st = set_at(&set_at(st, 0, s1)?, 1, s0)?;
    let ln = set_at(&set_at(ln, 0, l1)?, 1, l0)?;
    Some(with_col(&with_col(enc, "entry_start_positions", st), "entry_lengths", ln))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::verify_with;
    use crate::repr::testing::exercise;

    fn scheme(id: &str) -> FnScheme {
        schemes().into_iter().find(|s| s.id == id).unwrap()
    }

    fn text(words: &[&str]) -> Ports {
        family(words.iter().map(|w| w.len() as u64).collect(), words.concat().bytes().map(u64::from).collect())
    }

    fn bytes(s: &str) -> Column {
        Column::from_u64s(T::U8, s.bytes().map(u64::from).collect()).unwrap()
    }

    fn run(id: &str, p: &Json, enc: &Ports) -> Result<Ports, String> {
        let s = scheme(id);
        verify_with(&s, p, enc)?;
        Ok((s.decoder)(p).unwrap().evaluate(enc).unwrap())
    }

    #[test]
    fn sampled_roundtrips() {
        for s in schemes() {
            exercise(&s, 150);
        }
    }

    #[test]
    fn periodic_widths() {
        let p = json!({"type": "u8", "index_type": "u8", "width_type": "u8"});
        let u8s = |v| Column::from_u64s(T::U8, v).unwrap();
        let e = ports([
            ("period", u8s(vec![2])),
            ("widths", u8s(vec![1, 2])),
            ("length", u8s(vec![3])),
            ("data", bytes("abcd")),
        ]);
        let out = run("pvw", &p, &e).unwrap();
        assert_eq!(out["element_lengths"], Column::u64s(vec![1, 1, 2]));
        assert_eq!(out["elements"], bytes("abcd"));
        let tail = with_col(&e, "data", bytes("abcdef"));
        assert!(run("pvw", &p, &tail).is_err());
        // Period 1 lists every width.
        let (p1, e1) = (scheme("pvw").encode)(&json!({"period": 1}), &text(&["a", "bcd", "", "ef"])).unwrap();
        assert_eq!(e1["widths"].to_i128s().unwrap(), vec![1, 3, 0, 2]);
        assert!(run("pvw", &p1, &e1).is_ok());
        // Uniform widths make a single group.
        let (_, e2) = (scheme("pvw").encode)(&json!({}), &text(&["ab", "cd", "ef"])).unwrap();
        assert_eq!(e2["widths"].to_i128s().unwrap(), vec![2]);
    }

    #[test]
    fn fish_and_cat() {
        let words = ["a", "fish", "and", "a", "cat", "and", "a", "fish"];
        let s = scheme("vwdict");
        let (p, e) = (s.encode)(&json!({}), &text(&words)).unwrap();
        assert_eq!(e["entry_lengths"].len(), 4);
        assert_eq!(e["entry_data"], bytes("afishandcat"));
        assert_eq!(run("vwdict", &p, &e).unwrap(), text(&words));
        let (p, e) = (scheme("vwdict.monotone").encode)(&json!({}), &text(&words)).unwrap();
        assert_eq!(e["entry_data"], bytes("aandcatfish"));
        assert_eq!(run("vwdict.monotone", &p, &e).unwrap(), text(&words));
    }

    #[test]
    fn shared_and_overlapping_entries() {
        let p = json!({"type": "u8", "index_type": "u8", "entry_type": "u8"});
        let u8s = |v| Column::from_u64s(T::U8, v).unwrap();
        let one = ports([
            ("indices", u8s(vec![0, 0, 0])),
            ("entry_start_positions", u8s(vec![0])),
            ("entry_lengths", u8s(vec![2])),
            ("entry_data", bytes("hi")),
        ]);
        assert_eq!(run("vwdict", &p, &one).unwrap(), text(&["hi", "hi", "hi"]));
        let over = ports([
            ("indices", u8s(vec![0, 1, 0])),
            ("entry_start_positions", u8s(vec![0, 1])),
            ("entry_lengths", u8s(vec![2, 2])),
            ("entry_data", bytes("abc")),
        ]);
        assert_eq!(run("vwdict.monotone", &p, &over).unwrap(), text(&["ab", "bc", "ab"]));
        let overrun = with_col(&over, "entry_lengths", u8s(vec![2, 3]));
        assert!(run("vwdict", &p, &overrun).is_err());
    }
}
