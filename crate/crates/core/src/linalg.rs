//! Small fixed-size linear algebra: 2×2 symmetric matrices for the
//! coefficient belief and 3×3 spectra for the closed-loop check.

use num_complex::Complex;

use crate::Scalar;

pub type Vec2<S> = [S; 2];
pub type Mat2<S> = [[S; 2]; 2];
pub type Vec3<S> = [S; 3];
pub type Mat3<S> = [[S; 3]; 3];

/// Determinant magnitude below which a 2×2 matrix is treated as singular.
pub const DET_FLOOR: f64 = 1e-300;

#[inline]
pub fn det2<S: Scalar>(m: &Mat2<S>) -> S {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// Adjugate inverse. `None` when `|det| <= DET_FLOOR` (or the determinant is not finite).
pub fn inv2<S: Scalar>(m: &Mat2<S>) -> Option<Mat2<S>> {
    let det = det2(m);
    if !det.is_finite() || det.abs() <= S::lit(DET_FLOOR) || det == S::zero() {
        return None;
    }
    let r = S::one() / det;
    Some([[m[1][1] * r, -m[0][1] * r], [-m[1][0] * r, m[0][0] * r]])
}

#[inline]
pub fn mat2_vec<S: Scalar>(m: &Mat2<S>, v: &Vec2<S>) -> Vec2<S> {
    [
        m[0][0] * v[0] + m[0][1] * v[1],
        m[1][0] * v[0] + m[1][1] * v[1],
    ]
}

#[inline]
pub fn mat2_add<S: Scalar>(a: &Mat2<S>, b: &Mat2<S>) -> Mat2<S> {
    [
        [a[0][0] + b[0][0], a[0][1] + b[0][1]],
        [a[1][0] + b[1][0], a[1][1] + b[1][1]],
    ]
}

#[inline]
pub fn mat2_sub<S: Scalar>(a: &Mat2<S>, b: &Mat2<S>) -> Mat2<S> {
    [
        [a[0][0] - b[0][0], a[0][1] - b[0][1]],
        [a[1][0] - b[1][0], a[1][1] - b[1][1]],
    ]
}

/// (M + Mᵀ) / 2
#[inline]
pub fn symmetrize<S: Scalar>(m: &Mat2<S>) -> Mat2<S> {
    let off = (m[0][1] + m[1][0]) * S::half();
    [[m[0][0], off], [off, m[1][1]]]
}

/// Eigenvalues of a symmetric 2×2 matrix, ascending.
pub fn sym_eigenvalues2<S: Scalar>(m: &Mat2<S>) -> (S, S) {
    let a = m[0][0];
    let d = m[1][1];
    let b = (m[0][1] + m[1][0]) * S::half();
    let mean = (a + d) * S::half();
    let radius = (((a - d) * S::half()).powi(2) + b * b).sqrt();
    (mean - radius, mean + radius)
}

/// Symmetric within `tol` and both eigenvalues strictly positive.
pub fn is_spd2<S: Scalar>(m: &Mat2<S>, tol: S) -> bool {
    if (m[0][1] - m[1][0]).abs() > tol {
        return false;
    }
    if !(m[0][0].is_finite() && m[0][1].is_finite() && m[1][1].is_finite()) {
        return false;
    }
    // Sylvester's criterion is numerically kinder than the eigenvalue formula
    // for badly scaled matrices.
    m[0][0] > S::zero() && m[1][1] > S::zero() && det2(&symmetrize(m)) > S::zero()
}

/// Positive semidefinite up to a small relative slack.
pub fn is_psd2<S: Scalar>(m: &Mat2<S>, slack: S) -> bool {
    let (lo, hi) = sym_eigenvalues2(m);
    let scale = hi.abs().max(lo.abs()).max(S::min_positive_value());
    lo >= -slack * scale
}

/// Coefficients `[c2, c1, c0]` of the monic characteristic polynomial
/// `λ³ + c2·λ² + c1·λ + c0 = det(λI − M)`.
pub fn char_poly3<S: Scalar>(m: &Mat3<S>) -> [S; 3] {
    let trace = m[0][0] + m[1][1] + m[2][2];
    let minors = (m[0][0] * m[1][1] - m[0][1] * m[1][0])
        + (m[0][0] * m[2][2] - m[0][2] * m[2][0])
        + (m[1][1] * m[2][2] - m[1][2] * m[2][1]);
    [-trace, minors, -det3(m)]
}

pub fn det3<S: Scalar>(m: &Mat3<S>) -> S {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Roots of `λ³ + c2·λ² + c1·λ + c0`.
///
/// One real root is located by bracketing + Newton polishing; the remaining
/// quadratic factor is solved in closed form.
pub fn cubic_roots<S: Scalar>(c: [S; 3]) -> [Complex<S>; 3] {
    let [c2, c1, c0] = c;
    let p = |x: S| ((x + c2) * x + c1) * x + c0;
    let dp = |x: S| (S::lit(3.0) * x + S::two() * c2) * x + c1;

    // Cauchy bound: every root lies in |λ| <= 1 + max|c_i|.
    let bound = S::one() + c2.abs().max(c1.abs()).max(c0.abs());
    let (mut lo, mut hi) = (-bound, bound);
    // p(-bound) <= 0 <= p(bound) for a monic cubic.
    for _ in 0..200 {
        let mid = (lo + hi) * S::half();
        if p(mid) > S::zero() {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= S::epsilon() * bound {
            break;
        }
    }
    let mut r = (lo + hi) * S::half();
    for _ in 0..8 {
        let d = dp(r);
        if d == S::zero() {
            break;
        }
        let step = p(r) / d;
        if !step.is_finite() {
            break;
        }
        r = r - step;
    }

    // Deflate: λ³ + c2λ² + c1λ + c0 = (λ − r)(λ² + b1λ + b0)
    let b1 = c2 + r;
    let b0 = c1 + r * b1;
    let disc = b1 * b1 - S::lit(4.0) * b0;
    let half_b = -b1 * S::half();
    let (q1, q2) = if disc >= S::zero() {
        let sq = disc.sqrt() * S::half();
        (
            Complex::new(half_b + sq, S::zero()),
            Complex::new(half_b - sq, S::zero()),
        )
    } else {
        let sq = (-disc).sqrt() * S::half();
        (Complex::new(half_b, sq), Complex::new(half_b, -sq))
    };
    [Complex::new(r, S::zero()), q1, q2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn inverse_roundtrip() {
        let m = [[2.0f64, 1.0], [1.0, 3.0]];
        let inv = inv2(&m).unwrap();
        let id00 = m[0][0] * inv[0][0] + m[0][1] * inv[1][0];
        let id01 = m[0][0] * inv[0][1] + m[0][1] * inv[1][1];
        assert_relative_eq!(id00, 1.0, epsilon = 1e-15);
        assert!(id01.abs() < 1e-15);
    }

    #[test]
    fn singular_has_no_inverse() {
        assert!(inv2(&[[1.0f64, 2.0], [2.0, 4.0]]).is_none());
        assert!(inv2(&[[1e-200f64, 0.0], [0.0, 1e-200]]).is_none());
    }

    #[test]
    fn spd_checks() {
        assert!(is_spd2(&[[1e-4f64, -1e-5], [-1e-5, 0.125]], 1e-12));
        assert!(!is_spd2(&[[1.0f64, 2.0], [2.0, 1.0]], 1e-12));
        assert!(!is_spd2(&[[1.0f64, 0.1], [0.0, 1.0]], 1e-12));
    }

    #[test]
    fn cubic_with_known_roots() {
        // (λ+1)(λ+2)(λ+3) = λ³ + 6λ² + 11λ + 6
        let mut re: Vec<f64> = cubic_roots([6.0, 11.0, 6.0]).iter().map(|z| z.re).collect();
        re.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_relative_eq!(re[0], -3.0, epsilon = 1e-12);
        assert_relative_eq!(re[1], -2.0, epsilon = 1e-12);
        assert_relative_eq!(re[2], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn cubic_complex_pair() {
        // (λ+1)(λ² + 2λ + 5): roots −1, −1 ± 2i
        let roots = cubic_roots([3.0f64, 7.0, 5.0]);
        let mut im: Vec<f64> = roots.iter().map(|z| z.im).collect();
        im.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_relative_eq!(im[0], -2.0, epsilon = 1e-12);
        assert_relative_eq!(im[2], 2.0, epsilon = 1e-12);
        for z in roots {
            assert_relative_eq!(z.re, -1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn char_poly_of_diagonal() {
        let m = [[1.0f64, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 3.0]];
        assert_eq!(char_poly3(&m), [-6.0, 11.0, -6.0]);
    }
}
