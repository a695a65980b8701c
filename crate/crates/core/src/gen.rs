//! Synthetic column data for tests, benchmarks and the `gen` command.

use rand::Rng;
use rand_distr::{Distribution, Geometric, Normal, Zipf};

use crate::column::{Column, ElementType};
use crate::ops::Ports;

/// Runs of random values with lengths uniform in `1..=max_run`, truncated to `n`.
pub fn runs(rng: &mut impl Rng, n: usize, max_run: usize, distinct: u64) -> Column {
    let mut v = Vec::with_capacity(n);
    while v.len() < n {
        let x = rng.random_range(0..distinct.max(1));
        let len = rng.random_range(1..=max_run.max(1)).min(n - v.len());
        v.extend(std::iter::repeat_n(x, len));
    }
    Column::u64s(v)
}

/// Zipf-distributed values in `0..support` with exponent `s`; value 0 is the most frequent.
pub fn zipf(rng: &mut impl Rng, n: usize, support: u64, s: f64) -> Column {
    let z = Zipf::new(support.max(1) as f64, s).expect("zipf parameters");
    Column::u64s((0..n).map(|_| z.sample(rng) as u64 - 1).collect())
}

/// `intercept + slope·i` plus rounded Gaussian noise, as i64.
pub fn noisy_linear(rng: &mut impl Rng, n: usize, intercept: i64, slope: i64, sigma: f64) -> Column {
    let noise = Normal::new(0.0, sigma.max(0.0)).expect("noise parameters");
    Column::i64s((0..n).map(|i| intercept + slope * i as i64 + noise.sample(rng).round() as i64).collect())
}

/// Element widths `1 + G` with `G` geometric of success probability `p`, so the mean is `1/p`.
pub fn geometric_widths(rng: &mut impl Rng, n: usize, p: f64) -> Column {
    let g = Geometric::new(p).expect("geometric parameter");
    Column::u64s((0..n).map(|_| 1 + g.sample(rng)).collect())
}

/// Monte Carlo estimate over `groups` groups of `k` geometric widths: the mean group
/// maximum and the mean single width.
pub fn max_width_estimate(rng: &mut impl Rng, groups: usize, k: usize, p: f64) -> (f64, f64) {
    let g = Geometric::new(p).expect("geometric parameter");
    let (mut max_sum, mut sum) = (0u64, 0u64);
    for _ in 0..groups {
        let mut m = 0;
        for _ in 0..k {
            let w = 1 + g.sample(rng);
            sum += w;
            m = m.max(w);
        }
        max_sum += m;
    }
    (max_sum as f64 / groups as f64, sum as f64 / (groups * k) as f64)
}

/// The expected maximum of `k` independent widths `1 + G`, summed in closed form:
/// `E[max] = Σ_{w≥0} 1 − (1 − q^w)^k` with `q = 1 − p`.
pub fn expected_max_width(k: u32, p: f64) -> f64 {
    let q = 1.0 - p;
    let mut total = 0.0;
    let mut tail: f64 = 1.0;
    while tail > 1e-15 {
        total += 1.0 - (1.0 - tail).powi(k as i32);
        tail *= q;
    }
    total
}

/// Lineitem-like columns for the Q6-shaped query: ship dates over 1992..1999 in days,
/// discounts 0..=10 hundredths, quantities 1..=50 and prices in cents.
pub fn lineitem(rng: &mut impl Rng, n: usize) -> Ports {
    let mut cols = Ports::new();
    let col = |ty: ElementType, v: Vec<u64>| Column::from_u64s(ty, v).unwrap();
    let ship = (0..n).map(|_| rng.random_range(8035..10592)).collect();
    let disc = (0..n).map(|_| rng.random_range(0..=10)).collect();
    let qty = (0..n).map(|_| rng.random_range(1..=50)).collect();
    let price = (0..n).map(|_| rng.random_range(90_000..=10_500_000)).collect();
    cols.insert("l_shipdate".into(), col(ElementType::U32, ship));
    cols.insert("l_discount".into(), col(ElementType::U8, disc));
    cols.insert("l_quantity".into(), col(ElementType::U8, qty));
    cols.insert("l_extendedprice".into(), col(ElementType::U64, price));
    cols
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = runs(&mut rng, 100, 5, 3);
        assert_eq!(r.len(), 100);
        let z = zipf(&mut rng, 1000, 10, 1.2);
        let v = z.as_u64().unwrap();
        assert!(v.iter().all(|x| *x < 10));
        assert!(v.iter().filter(|x| **x == 0).count() > v.iter().filter(|x| **x == 9).count());
        let w = geometric_widths(&mut rng, 100, 0.5);
        assert!(w.as_u64().unwrap().iter().all(|x| *x >= 1));
        assert_eq!(noisy_linear(&mut rng, 5, 10, 2, 0.0), Column::i64s(vec![10, 12, 14, 16, 18]));
    }

    #[test]
    fn closed_form_max() {
        // One width has mean 1/p; for two, Σ 2·2^-w − 4^-w = 4 − 4/3.
        assert!((expected_max_width(1, 0.25) - 4.0).abs() < 1e-9);
        assert!((expected_max_width(2, 0.5) - 8.0 / 3.0).abs() < 1e-9);
    }
}
