//! Dense complex matrix exponential via Padé approximation with scaling and
//! squaring (the [13/13] scheme of Higham 2005).
//!
//! The squeeze and displacement operators used elsewhere are exponentials of
//! dense anti-Hermitian generators on spaces of a few hundred dimensions, for
//! which this is both accurate and cheap. No external linear-algebra backend
//! is pulled in; the single linear solve is a partial-pivot Gaussian
//! elimination written out below.

use ndarray::Array2;

use crate::C64;

/// Padé [13/13] numerator coefficients.
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

/// 1-norm threshold above which the argument is scaled down by powers of two.
const THETA13: f64 = 5.371920351148152;

/// Computes `exp(m)` for a square complex matrix.
///
/// Panics if `m` is not square; callers in this crate construct arguments
/// from tagged operators, which are square by construction.
pub fn expm(m: &Array2<C64>) -> Array2<C64> {
    assert_eq!(m.nrows(), m.ncols(), "expm needs a square matrix");
    let norm = one_norm(m);
    let s = if norm > THETA13 {
        ((norm / THETA13).log2().ceil() as i32).max(0)
    } else {
        0
    };
    let scaled = m.mapv(|c| c / C64::new(2f64.powi(s), 0.0));
    let mut result = pade13(&scaled);
    for _ in 0..s {
        result = result.dot(&result);
    }
    result
}

/// Maximum absolute column sum.
fn one_norm(m: &Array2<C64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|c| c.norm()).sum::<f64>())
        .fold(0.0_f64, f64::max)
}

/// The [13/13] Padé approximant `p(m)/q(m)` evaluated as a single solve.
fn pade13(m: &Array2<C64>) -> Array2<C64> {
    let dim = m.nrows();
    let eye = Array2::<C64>::eye(dim);
    let m2 = m.dot(m);
    let m4 = m2.dot(&m2);
    let m6 = m4.dot(&m2);

    let b = |k: usize| C64::new(PADE13[k], 0.0);

    // odd part: u = m (m6 (b13 m6 + b11 m4 + b9 m2) + b7 m6 + b5 m4 + b3 m2 + b1 I)
    let inner_u = m6.mapv(|c| c * b(13)) + m4.mapv(|c| c * b(11)) + m2.mapv(|c| c * b(9));
    let u = m.dot(
        &(m6.dot(&inner_u)
            + m6.mapv(|c| c * b(7))
            + m4.mapv(|c| c * b(5))
            + m2.mapv(|c| c * b(3))
            + eye.mapv(|c| c * b(1))),
    );
    // even part: v = m6 (b12 m6 + b10 m4 + b8 m2) + b6 m6 + b4 m4 + b2 m2 + b0 I
    let inner_v = m6.mapv(|c| c * b(12)) + m4.mapv(|c| c * b(10)) + m2.mapv(|c| c * b(8));
    let v = m6.dot(&inner_v)
        + m6.mapv(|c| c * b(6))
        + m4.mapv(|c| c * b(4))
        + m2.mapv(|c| c * b(2))
        + eye.mapv(|c| c * b(0));

    // exp(m) ~ (v - u)^-1 (v + u)
    let lhs = &v - &u;
    let rhs = &v + &u;
    solve_many(lhs, rhs)
}

/// Solves `a x = rhs` column-wise by LU with partial pivoting on the
/// augmented matrix.
fn solve_many(mut a: Array2<C64>, mut rhs: Array2<C64>) -> Array2<C64> {
    let dim = a.nrows();
    for col in 0..dim {
        // pivot on the largest remaining entry in this column
        let mut pivot_row = col;
        let mut pivot_mag = a[[col, col]].norm();
        for row in col + 1..dim {
            let mag = a[[row, col]].norm();
            if mag > pivot_mag {
                pivot_mag = mag;
                pivot_row = row;
            }
        }
        assert!(
            pivot_mag > 0.0,
            "singular matrix in Pade solve; the approximant denominator should never be singular"
        );
        if pivot_row != col {
            for j in 0..dim {
                a.swap([col, j], [pivot_row, j]);
                rhs.swap([col, j], [pivot_row, j]);
            }
        }
        let pivot = a[[col, col]];
        for row in col + 1..dim {
            let factor = a[[row, col]] / pivot;
            if factor == C64::new(0.0, 0.0) {
                continue;
            }
            for j in col..dim {
                let sub = factor * a[[col, j]];
                a[[row, j]] -= sub;
            }
            for j in 0..dim {
                let sub = factor * rhs[[col, j]];
                rhs[[row, j]] -= sub;
            }
        }
    }
    // back substitution
    let mut x = Array2::<C64>::zeros((dim, dim));
    for j in 0..dim {
        for row in (0..dim).rev() {
            let mut acc = rhs[[row, j]];
            for k in row + 1..dim {
                acc -= a[[row, k]] * x[[k, j]];
            }
            x[[row, j]] = acc / a[[row, row]];
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let z = Array2::<C64>::zeros((4, 4));
        let e = expm(&z);
        let eye = Array2::<C64>::eye(4);
        assert!(e.iter().zip(eye.iter()).all(|(x, y)| (x - y).norm() < 1e-14));
    }

    #[test]
    fn exp_of_diagonal_exponentiates_entries() {
        let m = array![
            [c(0.3, 0.0), c(0.0, 0.0)],
            [c(0.0, 0.0), c(-1.2, 0.8)],
        ];
        let e = expm(&m);
        assert!((e[[0, 0]] - c(0.3, 0.0).exp()).norm() < 1e-13);
        assert!((e[[1, 1]] - c(-1.2, 0.8).exp()).norm() < 1e-13);
        assert!(e[[0, 1]].norm() < 1e-14 && e[[1, 0]].norm() < 1e-14);
    }

    #[test]
    fn exp_of_pauli_x_rotation() {
        // exp(-i t sigma_x) = cos t I - i sin t sigma_x
        let t = 0.7;
        let m = array![
            [c(0.0, 0.0), c(0.0, -t)],
            [c(0.0, -t), c(0.0, 0.0)],
        ];
        let e = expm(&m);
        assert!((e[[0, 0]] - c(t.cos(), 0.0)).norm() < 1e-13);
        assert!((e[[0, 1]] - c(0.0, -t.sin())).norm() < 1e-13);
    }

    #[test]
    fn large_norm_argument_is_scaled_and_squared() {
        // 40 i sigma_z: well above the Pade threshold, still exactly diagonal
        let m = array![
            [c(0.0, 40.0), c(0.0, 0.0)],
            [c(0.0, 0.0), c(0.0, -40.0)],
        ];
        let e = expm(&m);
        assert!((e[[0, 0]] - c(40.0_f64.cos(), 40.0_f64.sin())).norm() < 1e-11);
        assert!((e[[1, 1]] - c(40.0_f64.cos(), -40.0_f64.sin())).norm() < 1e-11);
    }

    #[test]
    fn anti_hermitian_generator_gives_unitary() {
        // -i H for a random-ish Hermitian H
        let h = array![
            [c(1.0, 0.0), c(0.4, 0.3), c(0.0, -0.2)],
            [c(0.4, -0.3), c(-0.5, 0.0), c(1.1, 0.0)],
            [c(0.0, 0.2), c(1.1, 0.0), c(2.0, 0.0)],
        ];
        let gen = h.mapv(|x| x * c(0.0, -1.0));
        let u = expm(&gen);
        let udag_u = u.t().mapv(|x| x.conj()).dot(&u);
        let eye = Array2::<C64>::eye(3);
        let worst = udag_u
            .iter()
            .zip(eye.iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0_f64, f64::max);
        assert!(worst < 1e-12, "unitarity residual {worst:.3e}");
    }
}
