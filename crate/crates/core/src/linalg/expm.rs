use super::matrix::DenseMatrix;
use super::solve::Lu;
use crate::{Error, Result};

/// Order of the diagonal Padé approximant used by [`mat_exp`].
pub const PADE_ORDER: usize = 6;

/// Coefficients of the [6/6] Padé approximant of `exp`:
/// `c_k = (12−k)!·6! / (12!·k!·(6−k)!)`.
const PADE6: [f64; PADE_ORDER + 1] = [
    1.0,
    1.0 / 2.0,
    5.0 / 44.0,
    1.0 / 66.0,
    1.0 / 792.0,
    1.0 / 15_840.0,
    1.0 / 665_280.0,
];

/// Scaled argument norm (1-norm) the Padé approximant is applied to.
const SCALED_NORM_MAX: f64 = 0.5;

/// `e^{Mt}` by scaling and squaring with a [6/6] Padé approximant.
///
/// The argument is halved `s` times until `‖Mt‖₁ / 2^s ≤ 0.5`, the rational
/// approximant `D(X)⁻¹N(X)` is evaluated on the scaled matrix and the result
/// is squared `s` times.
pub fn mat_exp(m: &DenseMatrix, t: f64) -> Result<DenseMatrix> {
    if !m.is_square() {
        return Err(Error::InvalidArgument(alloc::format!(
            "matrix exponential needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if !t.is_finite() {
        return Err(Error::NonFinite("matrix exponential time argument"));
    }
    let n = m.rows();
    let scaled = m.scale(t);
    let norm = scaled.norm_1();

    let mut squarings = 0u32;
    let mut factor = 1.0;
    while norm * factor > SCALED_NORM_MAX {
        factor *= 0.5;
        squarings += 1;
        if squarings > 1100 {
            return Err(Error::NonFinite("matrix exponential argument"));
        }
    }
    let x = scaled.scale(factor);

    // Horner-free accumulation of even and odd powers.
    let ident = DenseMatrix::identity(n);
    let mut even = ident.scale(PADE6[0]);
    let mut odd = DenseMatrix::zeros(n, n);
    let mut power = ident;
    for (k, &c) in PADE6.iter().enumerate().skip(1) {
        power = &power * &x;
        let term = power.scale(c);
        if k % 2 == 0 {
            even = &even + &term;
        } else {
            odd = &odd + &term;
        }
    }
    let numer = &even + &odd;
    let denom = &even - &odd;

    let lu = Lu::factor(&denom)?;
    let mut r = lu.solve_matrix(&numer);
    for _ in 0..squarings {
        r = r.matmul(&r)?;
    }
    r.ensure_finite("matrix exponential")?;
    Ok(r)
}
