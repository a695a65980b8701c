//! Shared inputs for the benchmarks.

use colcirc::ops::Ports;
use colcirc::{gen, Column, ElementType};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` random u32 values as the single input `col`.
pub fn u32_input(n: usize) -> Ports {
    let mut r = rng(1);
    let v = (0..n).map(|_| r.random::<u32>() as u64).collect();
    Ports::from([("col".to_string(), Column::from_u64s(ElementType::U32, v).unwrap())])
}

pub fn lineitem(n: usize) -> Ports {
    gen::lineitem(&mut rng(2), n)
}

/// Columns suited to a scheme family, by scheme id.
pub fn column_for(scheme: &str, n: usize) -> Column {
    let mut r = rng(3);
    match scheme {
        s if s.starts_with("run") => gen::runs(&mut r, n, 16, 64),
        s if s.starts_with("dict") || s == "cascade" || s == "subdict" => gen::zipf(&mut r, n, 200, 1.1),
        "delta" | "delta.patched" | "for" => {
            let v = gen::noisy_linear(&mut r, n, 1_000_000, 7, 3.0);
            Column::from_u64s(ElementType::U64, v.as_i64().unwrap().iter().map(|x| *x as u64).collect()).unwrap()
        }
        _ => gen::zipf(&mut r, n, 1 << 16, 0.5),
    }
}
