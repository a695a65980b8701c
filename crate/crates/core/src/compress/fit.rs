//! Basis functions and small least-squares fits used by the model-based encoders.

use std::fmt;
use std::str::FromStr;

/// A basis function over the index domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Basis {
    /// `i^k`
    Pow(u32),
    /// `i mod m`
    Mod(u64),
    /// `i / m`, rounded down
    Div(u64),
}

impl Basis {
    pub fn at(&self, i: u64) -> i128 {
        match *self {
            Basis::Pow(k) => (i as i128).checked_pow(k).unwrap_or(i128::MAX),
            Basis::Mod(m) => (i % m) as i128,
            Basis::Div(m) => (i / m) as i128,
        }
    }

    /// The monomials `1, i, …, i^degree`.
    pub fn polynomial(degree: u32) -> Vec<Basis> {
        (0..=degree).map(Basis::Pow).collect()
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Basis::Pow(k) => write!(f, "pow:{k}"),
            Basis::Mod(m) => write!(f, "mod:{m}"),
            Basis::Div(m) => write!(f, "div:{m}"),
        }
    }
}

impl FromStr for Basis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (name, arg) = s.split_once(':').ok_or_else(|| format!("basis `{s}` lacks an argument"))?;
        let arg: u64 = arg.parse().map_err(|_| format!("basis `{s}` has a bad argument"))?;
        match name {
            "pow" if arg <= 8 => Ok(Basis::Pow(arg as u32)),
            "mod" if arg > 0 => Ok(Basis::Mod(arg)),
            "div" if arg > 0 => Ok(Basis::Div(arg)),
            _ => Err(format!("unknown basis `{s}`")),
        }
    }
}

/// Solves a square system by Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut y: Vec<f64>) -> Option<Vec<f64>> {
    let k = y.len();
    for c in 0..k {
        let p = (c..k).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-300 {
            return None;
        }
        a.swap(c, p);
        y.swap(c, p);
        for r in c + 1..k {
            let f = a[r][c] / a[c][c];
            for j in c..k {
                a[r][j] -= f * a[c][j];
            }
            y[r] -= f * y[c];
        }
    }
    let mut x = vec![0.0; k];
    for c in (0..k).rev() {
        let s: f64 = (c + 1..k).map(|j| a[c][j] * x[j]).sum();
        x[c] = (y[c] - s) / a[c][c];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Least-squares coefficients for `y ≈ Σ_j x_j · basis_j(i)` over `i = 0..y.len()`.
///
/// Columns are scaled to unit maximum before forming the normal equations.
pub fn least_squares(basis: &[Basis], y: &[f64]) -> Option<Vec<f64>> {
    let keep = independent(basis, y.len());
    let sub: Vec<Basis> = basis.iter().zip(&keep).filter(|x| *x.1).map(|x| *x.0).collect();
    let mut c = fit(&sub, y)?.into_iter();
    Some(keep.iter().map(|k| if *k { c.next().unwrap() } else { 0.0 }).collect())
}

/// Which basis functions are linearly independent of the earlier ones over `0..n`.
fn independent(basis: &[Basis], n: usize) -> Vec<bool> {
    let mut kept: Vec<Vec<f64>> = Vec::new();
    basis
        .iter()
        .map(|b| {
            let mut v: Vec<f64> = (0..n as u64).map(|i| b.at(i) as f64).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            for q in &kept {
                let d: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= d * b);
            }
            let rest = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let ok = norm > 0.0 && rest > 1e-9 * norm;
            if ok {
                kept.push(v.iter().map(|x| x / rest).collect());
            }
            ok
        })
        .collect()
}

fn fit(basis: &[Basis], y: &[f64]) -> Option<Vec<f64>> {
    let k = basis.len();
    let n = y.len();
    let scale: Vec<f64> =
        basis.iter().map(|b| (0..n as u64).map(|i| b.at(i).unsigned_abs() as f64).fold(1.0, f64::max)).collect();
    let mut ata = vec![vec![0.0; k]; k];
    let mut aty = vec![0.0; k];
    for (i, yi) in y.iter().enumerate() {
        let row: Vec<f64> = basis.iter().zip(&scale).map(|(b, s)| b.at(i as u64) as f64 / s).collect();
        for r in 0..k {
            aty[r] += row[r] * yi;
            for c in 0..k {
                ata[r][c] += row[r] * row[c];
            }
        }
    }
    let x = solve(ata, aty)?;
    Some(x.iter().zip(&scale).map(|(x, s)| x / s).collect())
}

/// Evaluates `Σ_j c_j · x^j` exactly, `None` on overflow.
pub fn poly_at(c: &[i128], x: i128) -> Option<i128> {
    c.iter().rev().try_fold(0i128, |acc, cj| acc.checked_mul(x)?.checked_add(*cj))
}

/// Integer coefficients of the polynomial through `(x0 + t, y[t])` in offsets `t`, when the
/// rounded interpolant hits every point.
pub fn interpolate(y: &[i128]) -> Option<Vec<i128>> {
    let k = y.len();
    let a: Vec<Vec<f64>> = (0..k).map(|t| (0..k).map(|j| (t as f64).powi(j as i32)).collect()).collect();
    let c: Vec<i128> = solve(a, y.iter().map(|v| *v as f64).collect())?.iter().map(|v| v.round() as i128).collect();
    y.iter().enumerate().all(|(t, v)| poly_at(&c, t as i128) == Some(*v)).then_some(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_names_roundtrip() {
        for b in [Basis::Pow(0), Basis::Pow(3), Basis::Mod(7), Basis::Div(4)] {
            assert_eq!(b.to_string().parse::<Basis>().unwrap(), b);
        }
        assert!("pow".parse::<Basis>().is_err());
        assert!("mod:0".parse::<Basis>().is_err());
    }

    #[test]
    fn fits_exact_lines() {
        let y: Vec<f64> = (0..50).map(|i| 3.0 + 2.0 * i as f64).collect();
        let c = least_squares(&Basis::polynomial(1), &y).unwrap();
        assert!((c[0] - 3.0).abs() < 1e-6 && (c[1] - 2.0).abs() < 1e-6);
        assert_eq!(interpolate(&[0, 1, 4]), Some(vec![0, 0, 1]));
        assert_eq!(interpolate(&[0, 1]), Some(vec![0, 1]));
        // Half-integral coefficients do not round to an exact fit.
        assert_eq!(interpolate(&[0, 0, 1]), None);
    }
}
