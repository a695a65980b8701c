use rand::rngs::StdRng;
use rand::Rng;
use serde_json::{json, Value as Json};

use super::{canon_subcolumn, family, sorted_subcolumn, with_types, MAX_DOMAIN};
use crate::circuit::{Builder, Circuit};
use crate::codec::scheme::{
    by_frequency, column_ty, index_ty, rand_data, resize, set_at, the_column, ty, ty_or, with_col, FnScheme,
};
use crate::codec::{ensure, get, index_column, indices, CodecError};
use crate::column::{Column, ElementType as T};
use crate::ops::{Aggregate, ElementwiseFn as F, Ports};

pub(super) fn schemes() -> Vec<FnScheme> {
    vec![
        FnScheme::new("indexed", indexed_decoder, indexed_check, indexed_encode, column_sample)
            .corrupt(indexed_corrupt),
        FnScheme::new("subcolumn.std", std_decoder, std_check, std_encode, subcolumn_sample)
            .canon(canon_subcolumn)
            .corrupt(std_corrupt),
        FnScheme::new("subcolumn.overlay", overlay_decoder, pair_check, overlay_encode, subcolumn_sample)
            .canon(canon_subcolumn)
            .corrupt(overlay_corrupt),
        FnScheme::new("subcolumn.union.disjoint", union_decoder, pair_check, union_encode, subcolumn_sample)
            .canon(canon_subcolumn)
            .corrupt(union_corrupt),
        FnScheme::new(
            "column.complementing",
            complementing_decoder,
            complementing_check,
            complementing_encode,
            pooled_sample,
        )
        .corrupt(complementing_corrupt),
        FnScheme::new("column.overlaid", overlaid_decoder, overlaid_check, overlaid_encode, pooled_sample)
            .corrupt(overlaid_corrupt),
    ]
}

fn types(p: &Json) -> Result<(T, T), CodecError> {
    Ok((ty(p, "type")?, ty_or(p, "index_type", T::U64)?))
}

/// Duplicates the first element of `label` into its second slot, or resizes `fallback`.
fn duplicate_or_resize(enc: &Ports, label: &str, fallback: &str, rng: &mut StdRng) -> Option<Ports> {
    let c = enc.get(label)?;
    if c.len() >= 2 {
        let first = c.to_i128s()?[0];
        return Some(with_col(enc, label, set_at(c, 1, first)?));
    }
    Some(with_col(enc, fallback, resize(enc.get(fallback)?, rng)?))
}

fn column_sample(rng: &mut StdRng) -> (Json, Ports) {
    let n = rand_data::len(rng, 40);
    (json!({}), family([("column", rand_data::any_column(rng, n))]))
}

fn pooled_sample(rng: &mut StdRng) -> (Json, Ports) {
    let n = rand_data::len(rng, 40);
    let t = rand_data::int_type(rng);
    let pool = rng.random_range(1..4);
    (json!({}), family([("column", rand_data::pooled(rng, &t, n, pool))]))
}

fn subcolumn_sample(rng: &mut StdRng) -> (Json, Ports) {
    let m = rand_data::len(rng, 30);
    let domain = m + rng.random_range(0..30);
    let pos = rand_data::distinct(rng, domain, m);
    (json!({}), family([("pos", Column::u64s(pos)), ("data", rand_data::any_column(rng, m))]))
}

// Indexed

fn indexed_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let (t, it) = types(p)?;
    let mut b = Builder::new();
    let pos = b.input("pos", it);
    let data = b.input("data", t);
    let out = b.permute(&pos, &data);
    b.output("column", &out);
    Ok(b.finish()?)
}

fn indexed_check(_: &Json, enc: &Ports) -> Result<(), String> {
    let (p, d) = (get(enc, "pos")?, get(enc, "data")?);
    ensure(p.len() == d.len(), || format!("{} positions for {} values", p.len(), d.len()))
}

fn indexed_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let c = the_column(dec)?;
    let t = column_ty(p, c)?;
    let n = c.len() as u64;
    let it = index_ty(p, "index_type", n.saturating_sub(1))?;
    let pos = index_column(&it, (0..n).collect(), "pos")?;
    Ok((with_types(p, &[("type", &t), ("index_type", &it)]), family([("pos", pos), ("data", c.clone())])))
}

fn indexed_corrupt(_: &Json, enc: &Ports, rng: &mut StdRng) -> Option<Ports> {
    duplicate_or_resize(enc, "pos", "data", rng)
}

// Standard subcolumn

fn std_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let (t, it) = types(p)?;
    let mut b = Builder::new();
    let pos = b.input("positions", it);
    let data = b.input("values", t);
    let pos = b.cast(&pos, &T::U64);
    b.output("pos", &pos);
    b.output("data", &data);
    Ok(b.finish()?)
}

fn std_check(_: &Json, enc: &Ports) -> Result<(), String> {
    let p = indices(enc, "positions")?;
    ensure(p.len() == get(enc, "values")?.len(), || "`pos` and `data` differ in length".into())?;
    ensure(crate::codec::scheme::all_distinct(&p), || "repeated position".into())
}

fn subcolumn_params(p: &Json, pos: &[u64], data: &Column) -> Result<(Json, T), CodecError> {
    let t = crate::codec::scheme::pick_ty(p, "type", data.element_type().clone())?;
    let it = index_ty(p, "index_type", pos.iter().copied().max().unwrap_or(0))?;
    Ok((with_types(p, &[("type", &t), ("index_type", &it)]), it))
}

fn std_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let (pos, data) = sorted_subcolumn(dec)?;
    let (params, it) = subcolumn_params(p, &pos, &data)?;
    Ok((params, family([("positions", index_column(&it, pos, "pos")?), ("values", data)])))
}

fn std_corrupt(_: &Json, enc: &Ports, rng: &mut StdRng) -> Option<Ports> {
    duplicate_or_resize(enc, "positions", "values", rng)
}

// Overlay and disjoint union of two subcolumns

fn pair_check(_: &Json, enc: &Ports) -> Result<(), String> {
    for j in 1..=2 {
        let p = indices(enc, &format!("pos_{j}"))?;
        let d = get(enc, &format!("data_{j}"))?;
        ensure(p.len() == d.len(), || format!("`pos_{j}` and `data_{j}` differ in length"))?;
        ensure(p.iter().all(|&x| x < MAX_DOMAIN), || format!("position in `pos_{j}` exceeds {MAX_DOMAIN}"))?;
    }
    Ok(())
}

/// Combined domain: `present` marks covered indices, `owner` the source of each, counted
/// through the concatenation of both data columns. In overlay mode the second subcolumn
/// wins on shared indices; otherwise shared indices are rejected.
fn pair_decoder(p: &Json, overlay: bool) -> Result<Circuit, CodecError> {
    let (t, it) = types(p)?;
    let mut b = Builder::new();
    let p1 = b.input("pos_1", it.clone());
    let d1 = b.input("data_1", t.clone());
    let p2 = b.input("pos_2", it);
    let d2 = b.input("data_2", t);
    let p1 = b.cast(&p1, &T::U64);
    let p2 = b.cast(&p2, &T::U64);
    let all = b.concat(&[&p1, &p2]);
    let next = b.with_const(F::Add, &all, 1u64);
    let n = b.reduce(&next, Aggregate::Max);
    let total = b.length(&all);
    let ids = b.iota(&total);
    let no_bits = b.zeros(&T::Bit, &n);
    let no_owner = b.zeros(&T::U64, &n);
    let (present, owner) = if overlay {
        let l1 = b.length(&p1);
        let l2 = b.length(&p2);
        let i1 = b.iota(&l1);
        let i2 = b.iota(&l2);
        let i2 = b.with_scalar(F::Add, &i2, &l1);
        let o1 = b.ones_bits(&l1);
        let o2 = b.ones_bits(&l2);
        let m = b.scatter(&no_bits, &p1, &o1);
        let m = b.scatter(&m, &p2, &o2);
        let w = b.scatter(&no_owner, &p1, &i1);
        let w = b.scatter(&w, &p2, &i2);
        (m, w)
    } else {
        let ones = b.ones_bits(&total);
        (b.scatter(&no_bits, &all, &ones), b.scatter(&no_owner, &all, &ids))
    };
    let data = b.concat(&[&d1, &d2]);
    let pos = b.select_indices(&present);
    let src = b.select(&owner, &present);
    let out = b.gather(&src, &data);
    b.output("pos", &pos);
    b.output("data", &out);
    Ok(b.finish()?)
}

fn overlay_decoder(p: &Json) -> Result<Circuit, CodecError> {
    pair_decoder(p, true)
}

fn union_decoder(p: &Json) -> Result<Circuit, CodecError> {
    pair_decoder(p, false)
}

fn split_encode(p: &Json, dec: &Ports, at: fn(usize) -> usize) -> Result<(Json, Ports), CodecError> {
    let (pos, data) = sorted_subcolumn(dec)?;
    if pos.last().is_some_and(|&x| x >= MAX_DOMAIN) {
        return Err(crate::codec::not_encodable(format!("position exceeds {MAX_DOMAIN}")));
    }
    let (params, it) = subcolumn_params(p, &pos, &data)?;
    let h = at(pos.len());
    let cols = family([
        ("pos_1", index_column(&it, pos[..h].to_vec(), "pos")?),
        ("data_1", data.slice(0, h)),
        ("pos_2", index_column(&it, pos[h..].to_vec(), "pos")?),
        ("data_2", data.slice(h, data.len())),
    ]);
    Ok((params, cols))
}

fn overlay_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    split_encode(p, dec, |n| n)
}

fn union_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    split_encode(p, dec, |n| n / 2)
}

fn overlay_corrupt(_: &Json, enc: &Ports, rng: &mut StdRng) -> Option<Ports> {
    duplicate_or_resize(enc, "pos_1", "data_1", rng)
}

fn union_corrupt(_: &Json, enc: &Ports, rng: &mut StdRng) -> Option<Ports> {
    let (p1, p2) = (enc.get("pos_1")?, enc.get("pos_2")?);
    if !p1.is_empty() && !p2.is_empty() {
        let shared = p1.to_i128s()?[rng.random_range(0..p1.len())];
        return Some(with_col(enc, "pos_2", set_at(p2, 0, shared)?));
    }
    duplicate_or_resize(enc, "pos_1", "data_1", rng)
}

// Complementing subcolumns

fn complementing_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let (t, it) = types(p)?;
    let mut b = Builder::new();
    let pos = b.input("pos", it);
    let d1 = b.input("data_1", t.clone());
    let d2 = b.input("data_2", t);
    let l1 = b.length(&d1);
    let l2 = b.length(&d2);
    let n = b.binary(F::Add, &l1, &l2);
    let pos = b.cast(&pos, &T::U64);
    let k = b.length(&pos);
    let none = b.zeros(&T::Bit, &n);
    let ones = b.ones_bits(&k);
    let mask = b.scatter(&none, &pos, &ones);
    let open = b.unary(F::Not, &mask);
    let all = b.iota(&n);
    let rest = b.select(&all, &open);
    let perm = b.concat(&[&pos, &rest]);
    let data = b.concat(&[&d1, &d2]);
    let out = b.permute(&perm, &data);
    b.output("column", &out);
    Ok(b.finish()?)
}

fn complementing_check(_: &Json, enc: &Ports) -> Result<(), String> {
    let (p, d) = (get(enc, "pos")?, get(enc, "data_1")?);
    ensure(p.len() == d.len(), || format!("{} positions for {} values", p.len(), d.len()))
}

/// Positions holding something other than the most frequent value.
fn exceptions(c: &Column) -> (Vec<usize>, Vec<usize>) {
    let mode = by_frequency(c).first().map(|(v, _)| v.clone());
    (0..c.len()).partition(|&i| Some(c.value(i)) != mode)
}

fn complementing_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let c = the_column(dec)?;
    let t = column_ty(p, c)?;
    let it = index_ty(p, "index_type", (c.len() as u64).saturating_sub(1))?;
    let (odd, common) = exceptions(c);
    let pos = index_column(&it, odd.iter().map(|&i| i as u64).collect(), "pos")?;
    let cols = family([("pos", pos), ("data_1", c.take(&odd)), ("data_2", c.take(&common))]);
    Ok((with_types(p, &[("type", &t), ("index_type", &it)]), cols))
}

fn complementing_corrupt(_: &Json, enc: &Ports, rng: &mut StdRng) -> Option<Ports> {
    duplicate_or_resize(enc, "pos", "data_1", rng)
}

// Overlaid column

fn overlaid_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let (t, it) = types(p)?;
    let mut b = Builder::new();
    let data = b.input("data", t.clone());
    let pos = b.input("overlay_pos", it);
    let over = b.input("overlay_data", t);
    let out = b.scatter(&data, &pos, &over);
    b.output("column", &out);
    Ok(b.finish()?)
}

fn overlaid_check(_: &Json, enc: &Ports) -> Result<(), String> {
    let (p, d) = (get(enc, "overlay_pos")?, get(enc, "overlay_data")?);
    ensure(p.len() == d.len(), || format!("{} overlay positions for {} values", p.len(), d.len()))
}

fn overlaid_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let c = the_column(dec)?;
    let t = column_ty(p, c)?;
    let it = index_ty(p, "index_type", (c.len() as u64).saturating_sub(1))?;
    let (odd, common) = exceptions(c);
    let base = match common.first() {
        Some(&i) => Column::new(t.clone(), vec![c.value(i); c.len()])?,
        None => c.clone(),
    };
    let pos = index_column(&it, odd.iter().map(|&i| i as u64).collect(), "overlay_pos")?;
    let cols = family([("data", base), ("overlay_pos", pos), ("overlay_data", c.take(&odd))]);
    Ok((with_types(p, &[("type", &t), ("index_type", &it)]), cols))
}

fn overlaid_corrupt(_: &Json, enc: &Ports, rng: &mut StdRng) -> Option<Ports> {
    duplicate_or_resize(enc, "overlay_pos", "overlay_data", rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::repr::testing::exercise;

    fn run(c: &Circuit, cols: Ports) -> Result<Ports, crate::circuit::EvalError> {
        c.evaluate(&cols)
    }

    fn u(v: &[u64]) -> Column {
        Column::u64s(v.to_vec())
    }

    fn p() -> Json {
        json!({"type": "u64", "index_type": "u64"})
    }

    #[test]
    fn sampled_roundtrips() {
        for s in schemes() {
            exercise(&s, 60);
        }
    }

    #[test]
    fn complementing_examples() {
        let c = complementing_decoder(&p()).unwrap();
        let out = run(&c, family([("pos", u(&[1])), ("data_1", u(&[9])), ("data_2", u(&[5, 6]))])).unwrap();
        assert_eq!(out["column"], u(&[5, 9, 6]));
        let out = run(&c, family([("pos", u(&[])), ("data_1", u(&[])), ("data_2", u(&[5, 6]))])).unwrap();
        assert_eq!(out["column"], u(&[5, 6]));
        let out = run(&c, family([("pos", u(&[1, 0])), ("data_1", u(&[7, 8])), ("data_2", u(&[]))])).unwrap();
        assert_eq!(out["column"], u(&[8, 7]));
        assert!(run(&c, family([("pos", u(&[3])), ("data_1", u(&[9])), ("data_2", u(&[5, 6]))])).is_err());
    }

    #[test]
    fn overlay_prefers_second_and_union_rejects_overlap() {
        let cols =
            family([("pos_1", u(&[0, 4])), ("data_1", u(&[1, 2])), ("pos_2", u(&[4, 2])), ("data_2", u(&[7, 8]))]);
        let out = run(&overlay_decoder(&p()).unwrap(), cols.clone()).unwrap();
        assert_eq!(out["pos"], u(&[0, 2, 4]));
        assert_eq!(out["data"], u(&[1, 8, 7]));
        assert!(run(&union_decoder(&p()).unwrap(), cols).is_err());
        let disjoint = family([("pos_1", u(&[3])), ("data_1", u(&[1])), ("pos_2", u(&[0])), ("data_2", u(&[2]))]);
        let out = run(&union_decoder(&p()).unwrap(), disjoint).unwrap();
        assert_eq!(out["pos"], u(&[0, 3]));
        assert_eq!(out["data"], u(&[2, 1]));
    }

    #[test]
    fn patched_fabric() {
        // 8-bit fabric, wide patch values scattered on top.
        let p = json!({"type": "u16", "index_type": "u8"});
        let c = overlaid_decoder(&p).unwrap();
        let fabric = Column::from_u64s(T::U16, vec![65, 66, 67, 68]).unwrap();
        let cols = family([
            ("data", fabric),
            ("overlay_pos", Column::from_u64s(T::U8, vec![2]).unwrap()),
            ("overlay_data", Column::from_u64s(T::U16, vec![0x0416]).unwrap()),
        ]);
        assert_eq!(run(&c, cols).unwrap()["column"], Column::from_u64s(T::U16, vec![65, 66, 0x0416, 68]).unwrap());
    }
}
