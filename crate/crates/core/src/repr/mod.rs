//! Structural representation schemes: subcolumns, segmentations, index sets, partitions,
//! components, variable-width and nullable columns.

mod components;
mod segments;
mod sets;
mod subcolumn;
mod varwidth;

use std::sync::Arc;

use serde_json::{json, Value as Json};

use crate::codec::scheme::FnScheme;
use crate::codec::{not_encodable, CodecError, CodecRef};
use crate::column::{Column, ElementType};
use crate::ops::Ports;

/// Largest index domain a decoder materializes (masks and index maps of this length).
pub const MAX_DOMAIN: u64 = 1 << 28;

pub fn schemes() -> Vec<CodecRef> {
    let all: Vec<FnScheme> =
        [subcolumn::schemes(), segments::schemes(), sets::schemes(), components::schemes(), varwidth::schemes()]
            .into_iter()
            .flatten()
            .collect();
    all.into_iter().map(|s| Arc::new(s) as CodecRef).collect()
}

/// `base` with the given type parameters set.
pub(crate) fn with_types(base: &Json, kv: &[(&str, &ElementType)]) -> Json {
    let mut extra = serde_json::Map::new();
    for (k, t) in kv {
        extra.insert(k.to_string(), json!(t.to_string()));
    }
    crate::codec::with(base, Json::Object(extra))
}

/// Non-negative integer values of a column, for encoders.
pub(crate) fn nonneg(c: &Column, what: &str) -> Result<Vec<u64>, CodecError> {
    c.to_i128s()
        .ok_or_else(|| not_encodable(format!("`{what}` is not integral")))?
        .into_iter()
        .map(|v| u64::try_from(v).map_err(|_| not_encodable(format!("`{what}` has a negative value"))))
        .collect()
}

/// A subcolumn `{pos, data}` sorted by position, rejecting repeated positions.
pub(crate) fn sorted_subcolumn(dec: &Ports) -> Result<(Vec<u64>, Column), CodecError> {
    let pos = crate::codec::input(dec, "pos")?;
    let data = crate::codec::input(dec, "data")?;
    if pos.len() != data.len() {
        return Err(not_encodable("`pos` and `data` differ in length"));
    }
    let p = nonneg(pos, "pos")?;
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by_key(|&i| p[i]);
    if order.windows(2).any(|w| p[w[0]] == p[w[1]]) {
        return Err(not_encodable("repeated position"));
    }
    Ok((order.iter().map(|&i| p[i]).collect(), data.take(&order)))
}

/// Subcolumn equality: same position-to-value map, whatever the order.
pub(crate) fn canon_subcolumn(_: &Json, dec: &Ports) -> Ports {
    match sorted_subcolumn(dec) {
        Ok((p, d)) => {
            let mut out = dec.clone();
            out.insert("pos".into(), Column::u64s(p));
            out.insert("data".into(), d);
            out
        }
        Err(_) => dec.clone(),
    }
}

/// Decoded family helper.
pub(crate) fn family<const N: usize>(items: [(&str, Column); N]) -> Ports {
    crate::codec::ports(items)
}

#[cfg(test)]
pub(crate) mod testing {
    use rand::SeedableRng;

    use crate::codec::{verify_with, Codec};

    /// Sample, encode, verify, decode, compare; then corrupt and expect rejection.
    pub fn exercise(codec: &dyn Codec, rounds: u64) {
        for seed in 0..rounds {
            let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
            let (hints, dec) = codec.sample(&mut rng);
            let inst = codec
                .encode(&hints, &dec)
                .unwrap_or_else(|e| panic!("{} seed {seed}: encode failed: {e}\n{dec:?}", codec.id()));
            verify_with(codec, &inst.params, &inst.columns)
                .unwrap_or_else(|e| panic!("{} seed {seed}: rejects own encoding: {e}\n{inst:?}", codec.id()));
            let out = codec.decoder(&inst.params).unwrap().evaluate(&inst.columns).unwrap();
            assert_eq!(
                codec.canonicalize(&inst.params, &out),
                codec.canonicalize(&inst.params, &dec),
                "{} seed {seed}: roundtrip",
                codec.id()
            );
            if let Some(bad) = codec.corrupt(&inst, &mut rng) {
                assert!(
                    verify_with(codec, &bad.params, &bad.columns).is_err(),
                    "{} seed {seed}: accepted corruption {bad:?}",
                    codec.id()
                );
            }
        }
    }
}
