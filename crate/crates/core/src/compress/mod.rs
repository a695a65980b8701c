//! Compression schemes: generated and noisy-generated columns, narrowing, dictionaries,
//! run encodings, splines, frame of reference, deltas, cascaded and segment dictionaries,
//! index sets and variable-width forms.

mod basic;
mod delta;
mod dicts;
pub mod fit;
mod index;
pub mod pushdown;
mod runs;
mod splines;
mod varwidth;

use std::sync::Arc;

use serde_json::Value as Json;

use crate::circuit::{Builder, Wire};
use crate::codec::scheme::{DecoderFn, FnScheme};
use crate::codec::{not_encodable, CodecError, CodecRef};
use crate::column::{Column, ElementType as T};
use crate::ops::{ElementwiseFn as F, Ports};

pub use index::upper_half_size_bits;

pub fn schemes() -> Vec<CodecRef> {
    let all: Vec<FnScheme> = [
        basic::schemes(),
        dicts::schemes(),
        runs::schemes(),
        splines::schemes(),
        delta::schemes(),
        index::schemes(),
        varwidth::schemes(),
    ]
    .into_iter()
    .flatten()
    .collect();
    all.into_iter().map(|s| Arc::new(s) as CodecRef).collect()
}

/// The type decoders compute in: `f64` for floats, `i64` otherwise.
pub(crate) fn work_type(t: &T) -> T {
    if matches!(t, T::Float(_)) {
        T::F64
    } else {
        T::I64
    }
}

/// Runs the decoder on an encoded form and insists it reproduces `col`.
pub(crate) fn confirm(dec: DecoderFn, params: &Json, cols: &Ports, col: &Column) -> Result<(), CodecError> {
    let out = dec(params)?.evaluate(cols).map_err(|e| not_encodable(e.to_string()))?;
    if out.get("column") == Some(col) {
        Ok(())
    } else {
        Err(not_encodable("fitted form does not reproduce the column"))
    }
}

/// Per-element coefficient `coeffs[r·k + j]` for a u64 index column `r`.
pub(crate) fn coefficient(b: &mut Builder, coeffs: &Wire, r: &Wire, k: u64, j: u64) -> Wire {
    let base = b.with_const(F::Mul, r, k);
    let at = b.with_const(F::Add, &base, j);
    b.gather(&at, coeffs)
}

/// Horner evaluation of `Σ_j c_j · x^j` with per-element coefficient columns.
pub(crate) fn horner(b: &mut Builder, x: &Wire, cs: &[Wire]) -> Wire {
    let mut acc = cs.last().expect("at least one coefficient").clone();
    for c in cs[..cs.len() - 1].iter().rev() {
        let m = b.binary(F::Mul, &acc, x);
        acc = b.binary(F::Add, &m, c);
    }
    acc
}

/// Values of an integer column as `i128`, or a not-encodable error for other types.
pub(crate) fn ints_of(c: &Column) -> Result<Vec<i128>, CodecError> {
    c.to_i128s().ok_or_else(|| not_encodable(format!("{} is not an integer type", c.element_type())))
}

/// The narrowest standard signed type holding `[lo, hi]`.
pub(crate) fn signed_fit(lo: i128, hi: i128) -> T {
    for w in [8u8, 16, 32, 64] {
        let half = 1i128 << (w - 1);
        if lo >= -half && hi < half {
            return T::Int(w);
        }
    }
    T::Int(64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registers_every_compression_id() {
        let ids: Vec<String> = schemes().iter().map(|s| s.id()).collect();
        for id in [
            "constant",
            "generated",
            "generated.poly",
            "noisy.generated",
            "nullsup",
            "dict",
            "dict.unique",
            "dict.monotone",
            "run.full",
            "run.rle",
            "run.rpe",
            "run.rle.capped",
            "spline.generalized",
            "spline.knotted",
            "spline.equiknotted",
            "for",
            "delta.naive",
            "delta",
            "delta.patched",
            "segdict",
            "segdict.two_level",
            "cascade",
            "subdict",
            "idx.common_prefix",
            "idx.common_upper_half",
            "pvw",
            "vwdict",
            "vwdict.unique",
            "vwdict.monotone",
        ] {
            assert!(ids.iter().any(|i| i == id), "{id} missing");
        }
    }
}
