//! Dense complex linear algebra helpers on top of `faer`.

use faer::linalg::solvers::Solve;
use faer::{c64, Mat, MatRef, Side};

use crate::error::{Error, Result};

pub type CMat = Mat<c64>;

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// Higham (2005) 1-norm bounds for each Padé degree.
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA13: f64 = 5.371920351148152;

pub fn c(re: f64) -> c64 {
    c64::new(re, 0.0)
}

/// Maximum absolute column sum.
pub fn norm_one(a: MatRef<'_, c64>) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs(a: MatRef<'_, c64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

pub fn max_abs_diff(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    m
}

/// Largest entry of `|A - A†|`.
pub fn hermiticity_deviation(a: MatRef<'_, c64>) -> f64 {
    let n = a.nrows();
    let mut m = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            m = m.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    m
}

pub fn trace(a: MatRef<'_, c64>) -> c64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

pub fn is_finite(a: MatRef<'_, c64>) -> bool {
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let z = a[(i, j)];
            if !z.re.is_finite() || !z.im.is_finite() {
                return false;
            }
        }
    }
    true
}

fn poly(a_pows: &[&CMat], coeffs: &[f64], ident: &CMat) -> CMat {
    let mut out = ident * faer::Scale(c(coeffs[0]));
    for (k, p) in a_pows.iter().enumerate() {
        out += *p * faer::Scale(c(coeffs[k + 1]));
    }
    out
}

/// Matrix exponential by scaling and squaring with a Padé approximant.
pub fn expm(a: MatRef<'_, c64>) -> Result<CMat> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.ncols(),
        });
    }
    if !is_finite(a) {
        return Err(Error::NonFinite("matrix exponential argument"));
    }
    let ident = CMat::identity(n, n);
    let norm = norm_one(a);

    for &(m, theta) in &THETA {
        if norm <= theta {
            let coeffs: &[f64] = match m {
                3 => &PADE3,
                5 => &PADE5,
                7 => &PADE7,
                _ => &PADE9,
            };
            let a = a.to_owned();
            let a2 = &a * &a;
            let mut even: Vec<CMat> = vec![a2.clone()];
            for _ in 1..m / 2 {
                let next = even.last().unwrap() * &a2;
                even.push(next);
            }
            let mut u = &ident * faer::Scale(c(coeffs[1]));
            let mut v = &ident * faer::Scale(c(coeffs[0]));
            for (k, p) in even.iter().enumerate() {
                let pow = 2 * (k + 1);
                v += p * faer::Scale(c(coeffs[pow]));
                u += p * faer::Scale(c(coeffs[pow + 1]));
            }
            let u = &a * &u;
            return pade_solve(&u, &v);
        }
    }

    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scale = 0.5f64.powi(s);
    let a = a.to_owned() * faer::Scale(c(scale));
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &PADE13;

    let inner_u = poly(&[&a2, &a4, &a6], &[0.0, b[9], b[11], b[13]], &ident);
    let u = &a6 * &inner_u + poly(&[&a2, &a4, &a6], &[b[1], b[3], b[5], b[7]], &ident);
    let u = &a * &u;
    let inner_v = poly(&[&a2, &a4, &a6], &[0.0, b[8], b[10], b[12]], &ident);
    let v = &a6 * &inner_v + poly(&[&a2, &a4, &a6], &[b[0], b[2], b[4], b[6]], &ident);

    let mut r = pade_solve(&u, &v)?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

fn pade_solve(u: &CMat, v: &CMat) -> Result<CMat> {
    let p = v + u;
    let q = v - u;
    let r = q.partial_piv_lu().solve(&p);
    if !is_finite(r.as_ref()) {
        return Err(Error::Decomposition("singular Padé denominator".into()));
    }
    Ok(r)
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(a: MatRef<'_, c64>) -> Result<Vec<f64>> {
    if !is_finite(a) {
        return Err(Error::NonFinite("Hermitian eigenvalue input"));
    }
    let mut ev = a
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Decomposition(format!("{e:?}")))?;
    ev.sort_by(|x, y| x.total_cmp(y));
    Ok(ev)
}

/// Singular values in descending order.
pub fn singular_values(a: MatRef<'_, c64>) -> Result<Vec<f64>> {
    if !is_finite(a) {
        return Err(Error::NonFinite("singular value input"));
    }
    let mut sv = a
        .singular_values()
        .map_err(|e| Error::Decomposition(format!("{e:?}")))?;
    sv.sort_by(|x, y| y.total_cmp(x));
    Ok(sv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(vals: &[c64]) -> CMat {
        let n = vals.len();
        CMat::from_fn(n, n, |i, j| if i == j { vals[i] } else { c64::ZERO })
    }

    #[test]
    fn expm_of_diagonal() {
        for scale in [1e-3, 0.1, 0.9, 2.0, 5.0, 40.0] {
            let vals: Vec<c64> = (0..5)
                .map(|k| c64::new(-(k as f64) * scale * 0.3, scale * k as f64))
                .collect();
            let e = expm(diag(&vals).as_ref()).unwrap();
            let expect = diag(&vals.iter().map(|z| z.exp()).collect::<Vec<_>>());
            assert!(max_abs_diff(e.as_ref(), expect.as_ref()) < 1e-11, "scale {scale}");
        }
    }

    #[test]
    fn expm_of_nilpotent() {
        // exp of a single Jordan block with zero eigenvalue is the truncated series
        let n = 4;
        let a = CMat::from_fn(n, n, |i, j| if j == i + 1 { c(2.0) } else { c64::ZERO });
        let e = expm(a.as_ref()).unwrap();
        assert!((e[(0, 1)] - c(2.0)).norm() < 1e-13);
        assert!((e[(0, 2)] - c(2.0)).norm() < 1e-13);
        assert!((e[(0, 3)] - c(8.0 / 6.0)).norm() < 1e-13);
    }

    #[test]
    fn expm_rotation_generator() {
        let t = 7.3;
        let a = CMat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => c(-t),
            (1, 0) => c(t),
            _ => c64::ZERO,
        });
        let e = expm(a.as_ref()).unwrap();
        assert!((e[(0, 0)] - c(t.cos())).norm() < 1e-12);
        assert!((e[(1, 0)] - c(t.sin())).norm() < 1e-12);
    }

    #[test]
    fn expm_rejects_nan() {
        let mut a = CMat::zeros(2, 2);
        a[(0, 0)] = c(f64::NAN);
        assert!(matches!(expm(a.as_ref()), Err(Error::NonFinite(_))));
    }

    #[test]
    fn eigen_and_svd_agree_on_hermitian() {
        let a = CMat::from_fn(6, 6, |i, j| {
            let (i, j) = (i as f64, j as f64);
            c64::new((i + j).cos(), (i - j).sin())
        });
        let ev = hermitian_eigenvalues(a.as_ref()).unwrap();
        let sv = singular_values(a.as_ref()).unwrap();
        let mut abs: Vec<f64> = ev.iter().map(|x| x.abs()).collect();
        abs.sort_by(|x, y| y.total_cmp(x));
        for (x, y) in abs.iter().zip(&sv) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
