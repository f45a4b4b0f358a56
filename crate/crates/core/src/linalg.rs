//! Log-determinants of `I + s H H*` for complex channel matrices.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// `log2 det(I + snr * H H^*)` via a Cholesky factorisation of the smaller
/// Gram matrix (Sylvester's identity lets us use `H^* H` when `H` is tall).
/// Returns `None` when the factorisation fails or the result is not finite.
pub fn log2_det_identity_plus(h: &DMatrix<Complex64>, snr: f64) -> Option<f64> {
    if h.nrows() == 0 || h.ncols() == 0 {
        return Some(0.0);
    }
    let gram = if h.nrows() <= h.ncols() {
        h * h.adjoint()
    } else {
        h.adjoint() * h
    };
    let dim = gram.nrows();
    let mut m = gram * Complex64::new(snr, 0.0);
    for i in 0..dim {
        m[(i, i)] += Complex64::new(1.0, 0.0);
    }
    let chol = m.cholesky()?;
    let l = chol.l_dirty();
    let ln_det: f64 = (0..dim).map(|i| 2.0 * l[(i, i)].re.ln()).sum();
    let v = ln_det / std::f64::consts::LN_2;
    v.is_finite().then_some(v)
}

/// `sum_i log2(1 + snr * ||h_i||^2)` over the rows of `H`; Hadamard's bound on
/// the log-determinant.
pub fn log2_hadamard_bound(h: &DMatrix<Complex64>, snr: f64) -> f64 {
    h.row_iter()
        .map(|row| (1.0 + snr * row.iter().map(|z| z.norm_sqr()).sum::<f64>()).log2())
        .sum()
}

/// `trace(snr * H H^*) = snr * ||H||_F^2`.
pub fn trace_gram(h: &DMatrix<Complex64>, snr: f64) -> f64 {
    snr * h.iter().map(|z| z.norm_sqr()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn scalar_case() {
        let h = DMatrix::from_element(1, 1, Complex64::from_polar(0.5, 1.3));
        let v = log2_det_identity_plus(&h, 3.0).unwrap();
        assert!((v - (1.0_f64 + 3.0 * 0.25).log2()).abs() < 1e-14);
    }

    #[test]
    fn two_by_two_matches_closed_form() {
        let h = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.5), c(-0.3, 0.2), c(0.7, -1.1), c(0.4, 0.9)]);
        let s = 2.5;
        // M = I + s H H*, det = m11 m22 - |m12|^2
        let g = &h * h.adjoint();
        let m11 = 1.0 + s * g[(0, 0)].re;
        let m22 = 1.0 + s * g[(1, 1)].re;
        let m12 = s * g[(0, 1)];
        let det = m11 * m22 - m12.norm_sqr();
        let v = log2_det_identity_plus(&h, s).unwrap();
        assert!((v - det.log2()).abs() < 1e-12);
    }

    #[test]
    fn tall_and_wide_agree() {
        let h = DMatrix::from_fn(3, 5, |i, k| Complex64::from_polar(1.0 / (1.0 + (i + k) as f64), (i * 7 + k) as f64));
        let a = log2_det_identity_plus(&h, 4.0).unwrap();
        let b = log2_det_identity_plus(&h.adjoint(), 4.0).unwrap();
        assert!((a - b).abs() < 1e-11);
    }

    #[test]
    fn chain_of_bounds() {
        let h = DMatrix::from_fn(4, 6, |i, k| Complex64::from_polar(0.3 + 0.1 * i as f64, (i + 3 * k) as f64));
        let s = 1.7;
        let ld = log2_det_identity_plus(&h, s).unwrap();
        let had = log2_hadamard_bound(&h, s);
        let tr = trace_gram(&h, s) / std::f64::consts::LN_2;
        assert!(ld <= had + 1e-12);
        assert!(had <= tr + 1e-12);
    }
}
