use rand::rngs::StdRng;
use rand::Rng;
use serde_json::{json, Value as Json};

use super::fit::{least_squares, Basis};
use super::{confirm, ints_of, signed_fit, work_type};
use crate::circuit::{Builder, Circuit, Wire};
use crate::codec::scheme::{
    by_frequency, col_i128, column_ty, mistyped, rand_data, resize, the_column, ty, ty_or, with_col, zero_of, FnScheme,
};
use crate::codec::{ensure, get, not_encodable, ports, scalar, with, CodecError};
use crate::column::{Column, ElementType as T};
use crate::ops::{ElementwiseFn as F, Ports};
use crate::repr::with_types;

pub(super) fn schemes() -> Vec<FnScheme> {
    vec![
        FnScheme::new("constant", constant_decoder, constant_check, constant_encode, constant_sample)
            .corrupt(constant_corrupt)
            .approx(constant_approx),
        FnScheme::new("generated", generated_decoder, generated_check, generated_encode, generated_sample)
            .corrupt(coeff_corrupt)
            .approx(generated_approx),
        FnScheme::new("generated.poly", generated_decoder, generated_check, generated_encode, poly_sample)
            .corrupt(coeff_corrupt)
            .approx(generated_approx),
        FnScheme::new("noisy.generated", noisy_decoder, noisy_check, noisy_encode, noisy_sample).corrupt(noisy_corrupt),
        FnScheme::new("nullsup", nullsup_decoder, no_check, nullsup_encode, nullsup_sample)
            .corrupt(|_, enc, _| mistyped(enc, "data")),
    ]
}

fn no_check(_: &Json, _: &Ports) -> Result<(), String> {
    Ok(())
}

// Constant

fn constant_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let t = ty(p, "type")?;
    let mut b = Builder::new();
    let v = b.input("value", t);
    let n = b.input("length", T::U64);
    let out = b.replicate(&v, &n);
    b.output("column", &out);
    Ok(b.finish()?)
}

fn constant_check(_: &Json, enc: &Ports) -> Result<(), String> {
    scalar(enc, "length")?;
    let v = get(enc, "value")?;
    ensure(v.len() == 1, || format!("`value` must be a scalar, has length {}", v.len()))
}

fn constant_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let col = the_column(dec)?;
    let t = column_ty(p, col)?;
    if let Some(i) = (1..col.len()).find(|&i| col.value(i) != col.value(0)) {
        return Err(not_encodable(format!("element {i} differs from element 0")));
    }
    let v = if col.is_empty() { Column::new(t.clone(), vec![zero_of(&t)])? } else { col.slice(0, 1) };
    Ok((with_types(p, &[("type", &t)]), ports([("value", v), ("length", Column::scalar_u64(col.len() as u64))])))
}

fn constant_sample(rng: &mut StdRng) -> (Json, Ports) {
    let n = rand_data::len(rng, 40);
    let v = rand_data::any_column(rng, 1);
    let col = v.take(&vec![0; n]);
    (json!({}), ports([("column", col)]))
}

fn constant_corrupt(_: &Json, enc: &Ports, rng: &mut StdRng) -> Option<Ports> {
    Some(with_col(enc, "value", resize(enc.get("value")?, rng)?))
}

/// The most frequent value, or the minimum when the approximation must stay below.
fn constant_approx(_: &Json, col: &Column, below: bool) -> Option<Column> {
    let v = if below { col.iter().min()? } else { by_frequency(col).first()?.0.clone() };
    Some(col.take(&vec![col.iter().position(|x| x == v)?; col.len()]))
}

// Linear combinations of basis functions

fn basis_of(p: &Json) -> Result<Vec<Basis>, CodecError> {
    if let Some(d) = p.get("degree") {
        let d =
            d.as_u64().filter(|d| *d <= 8).ok_or_else(|| CodecError::BadParams("`degree` must be at most 8".into()))?;
        return Ok(Basis::polynomial(d as u32));
    }
    let arr =
        p.get("basis").and_then(|b| b.as_array()).ok_or_else(|| CodecError::BadParams("missing `basis`".into()))?;
    arr.iter()
        .map(|b| b.as_str().ok_or("basis entries are strings".to_string()).and_then(|s| s.parse()))
        .collect::<Result<Vec<Basis>, String>>()
        .map_err(CodecError::BadParams)
}

/// The basis function evaluated at every index of the `i64` index column `x`, in `w`.
fn basis_wire(b: &mut Builder, f: Basis, x: &Wire, w: &T) -> Wire {
    let v = match f {
        Basis::Pow(0) => {
            let one = b.scalar(&T::I64, 1i64);
            b.broadcast(&one, x)
        }
        Basis::Pow(k) => {
            let mut acc = x.clone();
            for _ in 1..k {
                acc = b.binary(F::Mul, &acc, x);
            }
            acc
        }
        Basis::Mod(m) => b.with_const(F::Mod, x, m as i64),
        Basis::Div(m) => b.with_const(F::Div, x, m as i64),
    };
    b.cast(&v, w)
}

/// `Σ_j coeffs[j] · f_j(i)` for `i < length`, in the work type of `t`.
fn combination(b: &mut Builder, basis: &[Basis], t: &T, length: &Wire, coeffs: &Wire) -> Wire {
    let w = work_type(t);
    let i = b.iota(length);
    let x = b.cast(&i, &T::I64);
    let mut sum: Option<Wire> = None;
    for (j, f) in basis.iter().enumerate() {
        let at = b.scalar_u64(j as u64);
        let c = b.gather(&at, coeffs);
        let c = b.broadcast(&c, &x);
        let fx = basis_wire(b, *f, &x, &w);
        let term = b.binary(F::Mul, &c, &fx);
        sum = Some(match sum {
            Some(s) => b.binary(F::Add, &s, &term),
            None => term,
        });
    }
    match sum {
        Some(s) => s,
        None => b.zeros(&w, length),
    }
}

fn generated_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let (t, basis) = (ty(p, "type")?, basis_of(p)?);
    let mut b = Builder::new();
    let n = b.input("length", T::U64);
    let c = b.input("coefficients", work_type(&t));
    let s = combination(&mut b, &basis, &t, &n, &c);
    let out = b.cast(&s, &t);
    b.output("column", &out);
    Ok(b.finish()?)
}

fn generated_check(p: &Json, enc: &Ports) -> Result<(), String> {
    scalar(enc, "length")?;
    let k = basis_of(p).map_err(|e| e.to_string())?.len();
    let m = get(enc, "coefficients")?.len();
    ensure(m == k, || format!("{m} coefficients for {k} basis functions"))
}

fn coeff_corrupt(_: &Json, enc: &Ports, rng: &mut StdRng) -> Option<Ports> {
    Some(with_col(enc, "coefficients", resize(enc.get("coefficients")?, rng)?))
}

/// Parameters with the basis spelled out, unless a polynomial degree already fixes it.
fn completed(p: &Json, t: &T) -> Result<(Json, Vec<Basis>), CodecError> {
    let p =
        if p.get("degree").is_none() && p.get("basis").is_none() { with(p, json!({"degree": 1})) } else { p.clone() };
    let basis = basis_of(&p)?;
    Ok((with_types(&p, &[("type", t)]), basis))
}

fn as_f64s(col: &Column) -> Result<Vec<f64>, CodecError> {
    if let Some(v) = col.to_i128s() {
        return Ok(v.iter().map(|x| *x as f64).collect());
    }
    col.as_f64().map(|v| v.to_vec()).ok_or_else(|| not_encodable(format!("{} is not numeric", col.element_type())))
}

/// Candidate coefficient columns: rounded to integers, then to coarse and fine binary fractions.
fn coefficient_candidates(t: &T, c: &[f64]) -> Vec<Column> {
    if t.is_integer() {
        return col_i128(&T::I64, c.iter().map(|x| x.round() as i128).collect(), "").into_iter().collect();
    }
    let mut out: Vec<Column> = [0, 4, 10, 20, 30]
        .iter()
        .map(|k| {
            let s = (1u64 << k) as f64;
            Column::from_f64s(T::F64, c.iter().map(|x| (x * s).round() / s).collect()).unwrap()
        })
        .collect();
    out.push(Column::from_f64s(T::F64, c.to_vec()).unwrap());
    out
}

fn generated_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let col = the_column(dec)?;
    let t = column_ty(p, col)?;
    if !t.is_numeric() {
        return Err(not_encodable(format!("{t} is not numeric")));
    }
    let (p, basis) = completed(p, &t)?;
    let y = as_f64s(col)?;
    let c = least_squares(&basis, &y).ok_or_else(|| not_encodable("singular basis"))?;
    let n = Column::scalar_u64(col.len() as u64);
    for cand in coefficient_candidates(&t, &c) {
        let cols = ports([("length", n.clone()), ("coefficients", cand)]);
        if confirm(generated_decoder, &p, &cols, col).is_ok() {
            return Ok((p, cols));
        }
    }
    Err(not_encodable("no exact combination of the basis"))
}

/// Rounded least-squares model; with `below`, the intercept absorbs the largest excess.
fn generated_approx(p: &Json, col: &Column, below: bool) -> Option<Column> {
    let t = col.element_type().clone();
    let (_, basis) = completed(p, &t).ok()?;
    let x = col.to_i128s()?;
    let y: Vec<f64> = x.iter().map(|v| *v as f64).collect();
    let mut c: Vec<i128> = least_squares(&basis, &y)?.iter().map(|v| v.round() as i128).collect();
    let model = |c: &[i128]| -> Option<Vec<i128>> {
        (0..x.len() as u64)
            .map(|i| basis.iter().zip(c).try_fold(0i128, |a, (f, cj)| a.checked_add(cj.checked_mul(f.at(i))?)))
            .collect()
    };
    let mut m = model(&c)?;
    if below {
        let excess = m.iter().zip(&x).map(|(m, x)| m - x).max().unwrap_or(0);
        if excess > 0 {
            let j = basis.iter().position(|f| *f == Basis::Pow(0))?;
            c[j] -= excess;
            m = model(&c)?;
        }
    }
    let (lo, hi) = t.int_range()?;
    if m.iter().any(|v| *v < lo || *v > hi || v.unsigned_abs() > i64::MAX as u128) {
        return None;
    }
    Column::from_i128(t, m).ok()
}

fn random_line(rng: &mut StdRng, basis: &[Basis], n: usize, t: &T) -> Column {
    let (lo, hi) = t.int_range().unwrap();
    loop {
        let c: Vec<i128> = basis
            .iter()
            .map(|f| if *f == Basis::Pow(0) { rng.random_range(-50..200) } else { rng.random_range(-3..4) })
            .collect();
        let v: Vec<i128> = (0..n as u64).map(|i| basis.iter().zip(&c).map(|(f, cj)| cj * f.at(i)).sum()).collect();
        if v.iter().all(|x| *x >= lo && *x <= hi) {
            return Column::from_i128(t.clone(), v).unwrap();
        }
    }
}

fn generated_sample(rng: &mut StdRng) -> (Json, Ports) {
    let n = rand_data::len(rng, 40);
    let menu = [Basis::Pow(0), Basis::Pow(1), Basis::Mod(3), Basis::Div(5), Basis::Mod(7)];
    let mut basis: Vec<Basis> = menu.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
    if basis.is_empty() {
        basis.push(Basis::Pow(0));
    }
    let names: Vec<String> = basis.iter().map(|b| b.to_string()).collect();
    if rng.random_bool(0.2) {
        let c0 = rng.random_range(-40..40) as f64 / 4.0;
        let c1 = rng.random_range(-8..8) as f64 / 8.0;
        let v = (0..n).map(|i| c0 + c1 * i as f64).collect();
        return (json!({"degree": 1}), ports([("column", Column::from_f64s(T::F64, v).unwrap())]));
    }
    let t = [T::I32, T::I64, T::I16][rng.random_range(0..3)].clone();
    (json!({ "basis": names }), ports([("column", random_line(rng, &basis, n, &t))]))
}

fn poly_sample(rng: &mut StdRng) -> (Json, Ports) {
    let n = rand_data::len(rng, 40);
    let d = rng.random_range(0..3u32);
    (json!({ "degree": d }), ports([("column", random_line(rng, &Basis::polynomial(d), n, &T::I64))]))
}

// Generated plus narrow noise

fn noisy_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let (t, basis, nt) = (ty(p, "type")?, basis_of(p)?, ty(p, "noise_type")?);
    let mut b = Builder::new();
    let n = b.input("length", T::U64);
    let c = b.input("coefficients", T::I64);
    let noise = b.input("noise", nt);
    let s = combination(&mut b, &basis, &T::I64, &n, &c);
    let e = b.cast(&noise, &T::I64);
    let sum = b.binary(F::Add, &s, &e);
    let out = b.cast(&sum, &t);
    b.output("column", &out);
    Ok(b.finish()?)
}

fn noisy_check(p: &Json, enc: &Ports) -> Result<(), String> {
    generated_check(p, enc)?;
    let (n, m) = (scalar(enc, "length")?, get(enc, "noise")?.len() as u64);
    ensure(n == m, || format!("{m} noise values for length {n}"))
}

fn noisy_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let col = the_column(dec)?;
    let t = column_ty(p, col)?;
    let x = ints_of(col)?;
    let (p, basis) = completed(p, &t)?;
    let y: Vec<f64> = x.iter().map(|v| *v as f64).collect();
    let mut c: Vec<i128> = least_squares(&basis, &y)
        .ok_or_else(|| not_encodable("singular basis"))?
        .iter()
        .map(|v| v.round() as i128)
        .collect();
    let model = |c: &[i128]| -> Vec<i128> {
        (0..x.len() as u64).map(|i| basis.iter().zip(c).map(|(f, cj)| cj * f.at(i)).sum()).collect()
    };
    let mut r: Vec<i128> = x.iter().zip(model(&c)).map(|(x, m)| x - m).collect();
    let intercept = basis.iter().position(|f| *f == Basis::Pow(0));
    let nt = match ty_or(&p, "noise_type", T::Bottom)? {
        T::Bottom => {
            let (lo, hi) = (r.iter().copied().min().unwrap_or(0), r.iter().copied().max().unwrap_or(0));
            match intercept {
                Some(_) if t.is_unsigned() => T::unsigned_for(u64::try_from(hi - lo).unwrap_or(u64::MAX)),
                _ => signed_fit(lo, hi),
            }
        }
        nt => nt,
    };
    if nt.is_unsigned() {
        let lo = r.iter().copied().min().unwrap_or(0);
        if lo < 0 {
            let j = intercept.ok_or_else(|| not_encodable("unsigned noise needs a constant basis function"))?;
            c[j] += lo;
            r = x.iter().zip(model(&c)).map(|(x, m)| x - m).collect();
        }
    }
    let noise = Column::from_i128(nt.clone(), r).map_err(|e| not_encodable(format!("noise: {e}")))?;
    let cols = ports([
        ("length", Column::scalar_u64(x.len() as u64)),
        ("coefficients", col_i128(&T::I64, c, "coefficients")?),
        ("noise", noise),
    ]);
    let p = with_types(&p, &[("noise_type", &nt)]);
    confirm(noisy_decoder, &p, &cols, col)?;
    Ok((p, cols))
}

fn noisy_sample(rng: &mut StdRng) -> (Json, Ports) {
    let n = rand_data::len(rng, 60);
    let t = [T::I32, T::I64, T::U32][rng.random_range(0..3)].clone();
    let slope = rng.random_range(0..50) as i128;
    let base = rng.random_range(100..1000) as i128;
    let v = (0..n as i128).map(|i| base + slope * i + rng.random_range(-20..=20)).collect();
    (json!({}), ports([("column", Column::from_i128(t, v).unwrap())]))
}

fn noisy_corrupt(_: &Json, enc: &Ports, rng: &mut StdRng) -> Option<Ports> {
    Some(with_col(enc, "noise", resize(enc.get("noise")?, rng)?))
}

// Narrowing

fn nullsup_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let (t, nt) = (ty(p, "type")?, ty(p, "narrow_type")?);
    let mut b = Builder::new();
    let d = b.input("data", nt);
    let out = b.cast(&d, &t);
    b.output("column", &out);
    Ok(b.finish()?)
}

/// The narrowest standard width of the same signedness holding every value.
fn narrowest(t: &T, v: &[i128]) -> T {
    let (lo, hi) = (v.iter().copied().min().unwrap_or(0), v.iter().copied().max().unwrap_or(0));
    if t.is_unsigned() {
        T::unsigned_for(hi as u64)
    } else {
        signed_fit(lo, hi)
    }
}

fn nullsup_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let col = the_column(dec)?;
    let t = column_ty(p, col)?;
    let v = ints_of(col)?;
    let nt = ty_or(p, "narrow_type", narrowest(&t, &v))?;
    let (lo, hi) =
        nt.int_range().ok_or_else(|| CodecError::BadParams(format!("narrow type {nt} is not an integer type")))?;
    if let Some(i) = v.iter().position(|x| *x < lo || *x > hi) {
        return Err(not_encodable(format!("element {i} ({}) does not fit {nt}", v[i])));
    }
    Ok((with_types(p, &[("type", &t), ("narrow_type", &nt)]), ports([("data", Column::from_i128(nt, v)?)])))
}

fn nullsup_sample(rng: &mut StdRng) -> (Json, Ports) {
    let n = rand_data::len(rng, 40);
    let t = rand_data::int_type(rng);
    let (lo, hi) = t.int_range().unwrap();
    let r = [100i128, 30_000, 1 << 30][rng.random_range(0..3)];
    (json!({}), ports([("column", rand_data::ints(rng, &t, n, lo.max(-r), hi.min(r)))]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::repr::testing::exercise;

    fn ints(t: T, v: Vec<i128>) -> Column {
        Column::from_i128(t, v).unwrap()
    }

    fn col(c: Column) -> Ports {
        ports([("column", c)])
    }

    fn enc(s: &FnScheme, p: Json, c: Column) -> Result<(Json, Ports), CodecError> {
        (s.encode)(&p, &col(c))
    }

    fn decode(s: &FnScheme, p: &Json, e: &Ports) -> Column {
        (s.decoder)(p).unwrap().evaluate(e).unwrap()["column"].clone()
    }

    #[test]
    fn sampled_roundtrips() {
        for s in schemes() {
            exercise(&s, 120);
        }
    }

    #[test]
    fn constant_examples() {
        let s = &schemes()[0];
        let p = json!({"type": "i32"});
        let e = ports([("value", ints(T::I32, vec![7])), ("length", Column::scalar_u64(3))]);
        assert_eq!(decode(s, &p, &e), ints(T::I32, vec![7, 7, 7]));
        assert!(matches!(enc(s, json!({}), ints(T::I32, vec![5, 6])), Err(CodecError::NotEncodable(_))));
        let (_, e) = enc(s, json!({}), Column::empty(T::I32)).unwrap();
        assert_eq!(e["length"], Column::scalar_u64(0));
    }

    #[test]
    fn generated_examples() {
        let s = &schemes()[1];
        let run = |deg: u64, c: Vec<i64>, n: u64| {
            let p = json!({"type": "i64", "degree": deg});
            decode(s, &p, &ports([("length", Column::scalar_u64(n)), ("coefficients", Column::i64s(c))]))
        };
        assert_eq!(run(0, vec![7], 3), Column::i64s(vec![7, 7, 7]));
        assert_eq!(run(1, vec![3, 2], 4), Column::i64s(vec![3, 5, 7, 9]));
        assert_eq!(run(2, vec![0, 0, 1], 4), Column::i64s(vec![0, 1, 4, 9]));
        let (p, e) = enc(s, json!({"basis": ["pow:0", "mod:3"]}), ints(T::I16, vec![5, 7, 9, 5, 7, 9, 5])).unwrap();
        assert_eq!(e["coefficients"], Column::i64s(vec![5, 2]));
        assert_eq!(decode(s, &p, &e), ints(T::I16, vec![5, 7, 9, 5, 7, 9, 5]));
        assert!(enc(s, json!({}), ints(T::I16, vec![1, 5, 2])).is_err());
    }

    #[test]
    fn noisy_examples() {
        let s = &schemes()[3];
        let p = json!({"type": "i32", "basis": ["pow:0"], "noise_type": "i8"});
        let e = ports([
            ("length", Column::scalar_u64(3)),
            ("coefficients", Column::i64s(vec![10])),
            ("noise", ints(T::I8, vec![-1, 0, 2])),
        ]);
        assert_eq!(decode(s, &p, &e), ints(T::I32, vec![9, 10, 12]));
        let zero = with_col(&e, "noise", ints(T::I8, vec![0, 0, 0]));
        assert_eq!(decode(s, &p, &zero), ints(T::I32, vec![10, 10, 10]));
    }

    /// Noisy-linear data: the least-squares slope leaves residuals inside a narrow window.
    #[test]
    fn noisy_linear_fit() {
        let v: Vec<i128> = (0..1000).map(|i| 5000 + 37 * i + ((i * 7919) % 41) - 20).collect();
        let s = &schemes()[3];
        let (p, e) = enc(s, json!({}), ints(T::I64, v.clone())).unwrap();
        assert_eq!(p["noise_type"], "i8");
        let c = e["coefficients"].to_i128s().unwrap();
        let r: Vec<i128> = v.iter().enumerate().map(|(i, x)| x - c[0] - c[1] * i as i128).collect();
        assert!(r.iter().all(|x| (-128..128).contains(x)));
        assert_eq!(decode(s, &p, &e), ints(T::I64, v));
    }

    #[test]
    fn nullsup_examples() {
        let s = &schemes()[4];
        let (p, e) = enc(s, json!({}), ints(T::U32, vec![1, 2, 255])).unwrap();
        assert_eq!(p["narrow_type"], "u8");
        assert_eq!(e["data"].len() * 4, 12);
        assert_eq!(decode(s, &p, &e), ints(T::U32, vec![1, 2, 255]));
        let err = enc(s, json!({"narrow_type": "u8"}), ints(T::U32, vec![256])).unwrap_err();
        assert!(err.to_string().contains("element 0"));
        let (p, e) = enc(s, json!({}), ints(T::I16, vec![-3])).unwrap();
        assert_eq!(p["narrow_type"], "i8");
        assert_eq!(decode(s, &p, &e), ints(T::I16, vec![-3]));
    }

    #[test]
    fn approximations_stay_below() {
        let s = &schemes()[2];
        let x = ints(T::U32, vec![10, 13, 11, 16, 20, 19, 25]);
        let m = (s.approx.unwrap())(&json!({"degree": 1}), &x, true).unwrap();
        assert!(m.to_i128s().unwrap().iter().zip(x.to_i128s().unwrap()).all(|(m, x)| *m <= x));
        assert!(enc(s, json!({"degree": 1}), m).is_ok());
        let c = (schemes()[0].approx.unwrap())(&json!({}), &x, true).unwrap();
        assert_eq!(c, ints(T::U32, vec![10; 7]));
    }
}
