use super::{AutodiffError, Tape, Var};
use crate::tensor::Tensor;

/// Gradients smaller than this are compared in absolute rather than relative
/// terms, since central differences carry roughly `1e-10` of rounding noise.
const RELATIVE_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    pub max_relative_error: f64,
    pub max_abs_error: f64,
    /// Coordinate with the largest relative error.
    pub worst_coordinate: usize,
    pub checked: usize,
}

/// Compares the tape gradient of `f` at `x` against central differences.
///
/// `f` records a scalar function of its input variable on a fresh tape. Only
/// `coords` (flat row-major indices) are perturbed when given.
pub fn finite_difference_check<F>(
    mut f: F,
    x: &Tensor,
    step: f64,
    coords: Option<&[usize]>,
) -> Result<GradientCheck, AutodiffError>
where
    F: FnMut(&mut Tape, Var) -> Result<Var, AutodiffError>,
{
    let mut tape = Tape::new();
    let input = tape.leaf(x.clone(), true);
    let out = f(&mut tape, input)?;
    let analytic = tape.backward(out)?.take_or_zeros(input, x.shape());

    let mut eval = |point: Tensor| -> Result<f64, AutodiffError> {
        let mut tape = Tape::new();
        let input = tape.leaf(point, false);
        let out = f(&mut tape, input)?;
        Ok(tape.value(out).item())
    };

    let all: Vec<usize>;
    let coords = match coords {
        Some(c) => c,
        None => {
            all = (0..x.len()).collect();
            &all
        }
    };
    let mut report = GradientCheck {
        max_relative_error: 0.0,
        max_abs_error: 0.0,
        worst_coordinate: 0,
        checked: coords.len(),
    };
    for &k in coords {
        let mut plus = x.clone();
        plus.as_mut_slice()[k] += step;
        let mut minus = x.clone();
        minus.as_mut_slice()[k] -= step;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * step);
        let exact = analytic.as_slice()[k];
        let abs = (numeric - exact).abs();
        let rel = abs / exact.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
        report.max_abs_error = report.max_abs_error.max(abs);
        if rel > report.max_relative_error {
            report.max_relative_error = rel;
            report.worst_coordinate = k;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::sparse::CsrMatrix;

    const STEP: f64 = 1e-6;
    const TOL: f64 = 1e-4;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize, lo: f64, hi: f64) -> Tensor {
        Tensor::from_vec(r, c, (0..r * c).map(|_| rng.random_range(lo..hi)).collect())
    }

    /// Checks a unary primitive at 20 random points, contracted against a
    /// random weight so every output coordinate matters.
    fn check_unary<G>(name: &str, shape: (usize, usize), lo: f64, hi: f64, mut g: G)
    where
        G: FnMut(&mut Tape, Var) -> Result<Var, AutodiffError>,
    {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let x = random(&mut rng, shape.0, shape.1, lo, hi);
            let mut weight = None;
            let report = finite_difference_check(
                |tape, v| {
                    let y = g(tape, v)?;
                    let (r, c) = tape.shape(y);
                    let w = weight
                        .get_or_insert_with(|| {
                            let mut wr = ChaCha8Rng::seed_from_u64((r * 31 + c) as u64);
                            random(&mut wr, r, c, -1.0, 1.0)
                        })
                        .clone();
                    let w = tape.constant(w);
                    let yw = tape.elementwise_mul(y, w)?;
                    tape.sum_all(yw)
                },
                &x,
                STEP,
                None,
            )
            .unwrap();
            assert!(report.max_relative_error < TOL, "{name}: {report:?}");
        }
    }

    #[test]
    fn unary_primitives() {
        check_unary("transpose", (3, 4), -1.0, 1.0, |t, x| t.transpose(x));
        check_unary("scalar_mul", (3, 4), -1.0, 1.0, |t, x| t.scalar_mul(x, -2.5));
        check_unary("add_scalar", (3, 4), -1.0, 1.0, |t, x| t.add_scalar(x, 0.3));
        check_unary("selu", (4, 5), -2.0, 2.0, |t, x| t.selu(x));
        check_unary("exp", (3, 3), -1.0, 1.0, |t, x| t.exp(x));
        check_unary("log2_eps", (3, 4), 1e-3, 1.0, |t, x| t.log2_eps(x, 1e-8));
        check_unary("xlogx_eps", (3, 4), 1e-3, 1.0, |t, x| t.xlogx_eps(x, 1e-8));
        check_unary("trace", (4, 4), -1.0, 1.0, |t, x| t.trace(x));
        check_unary("row_sum", (3, 4), -1.0, 1.0, |t, x| t.row_sum(x));
        check_unary("col_sum", (3, 4), -1.0, 1.0, |t, x| t.col_sum(x));
        check_unary("diag_extract", (4, 4), -1.0, 1.0, |t, x| t.diag_extract(x));
        check_unary("sum_all", (3, 4), -1.0, 1.0, |t, x| t.sum_all(x));
        check_unary("dropout_mask_apply", (3, 4), -1.0, 1.0, |t, x| {
            let mask = Tensor::from_vec(3, 4, (0..12).map(|k| f64::from(k % 2 == 0) * 2.0).collect());
            t.dropout_mask_apply(x, mask)
        });
    }

    #[test]
    fn binary_primitives() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let other = random(&mut rng, 4, 3, -1.0, 1.0);
        let same = random(&mut rng, 3, 4, -1.0, 1.0);
        let row = random(&mut rng, 1, 4, -1.0, 1.0);
        check_unary("matmul_left", (3, 4), -1.0, 1.0, |t, x| {
            let b = t.constant(other.clone());
            t.matmul(x, b)
        });
        check_unary("matmul_right", (3, 5), -1.0, 1.0, |t, x| {
            let a = t.constant(other.clone());
            t.matmul(a, x)
        });
        check_unary("add", (3, 4), -1.0, 1.0, |t, x| {
            let b = t.constant(same.clone());
            t.add(x, b)
        });
        check_unary("sub", (3, 4), -1.0, 1.0, |t, x| {
            let b = t.constant(same.clone());
            t.sub(b, x)
        });
        check_unary("elementwise_mul", (3, 4), -1.0, 1.0, |t, x| {
            let b = t.constant(same.clone());
            t.elementwise_mul(b, x)
        });
        check_unary("add_row_broadcast_input", (3, 4), -1.0, 1.0, |t, x| {
            let r = t.constant(row.clone());
            t.add_row_broadcast(x, r)
        });
        check_unary("add_row_broadcast_row", (1, 4), -1.0, 1.0, |t, r| {
            let x = t.constant(same.clone());
            t.add_row_broadcast(x, r)
        });
        let m = Arc::new(CsrMatrix::from_triplets(
            3,
            4,
            &[(0, 0, 0.5), (0, 3, -1.0), (1, 1, 2.0), (2, 2, 0.25), (2, 0, 1.5)],
        ));
        check_unary("sparse_dense_matmul", (4, 2), -1.0, 1.0, |t, x| t.sparse_dense_matmul(&m, x));
    }

    #[test]
    fn softmax_logits_and_temperature() {
        check_unary("softmax_logits", (4, 3), -2.0, 2.0, |t, z| {
            let temp = t.constant(Tensor::scalar(0.7));
            t.row_softmax_with_temperature(z, temp)
        });
        let logits = Tensor::from_rows(&[vec![0.3, -1.2, 0.8], vec![1.0, 0.1, -0.4]]);
        check_unary("softmax_temperature", (1, 1), 0.3, 3.0, |t, temp| {
            let z = t.constant(logits.clone());
            t.row_softmax_with_temperature(z, temp)
        });
    }

    #[test]
    fn batch_norm_all_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x0 = random(&mut rng, 6, 3, -1.0, 1.0);
        let g0 = random(&mut rng, 1, 3, 0.5, 1.5);
        let b0 = random(&mut rng, 1, 3, -0.5, 0.5);
        check_unary("batch_norm_input", (6, 3), -1.0, 1.0, |t, x| {
            let g = t.constant(g0.clone());
            let b = t.constant(b0.clone());
            t.batch_feature_norm(x, g, b)
        });
        check_unary("batch_norm_gamma", (1, 3), 0.5, 1.5, |t, g| {
            let x = t.constant(x0.clone());
            let b = t.constant(b0.clone());
            t.batch_feature_norm(x, g, b)
        });
        check_unary("batch_norm_beta", (1, 3), -0.5, 0.5, |t, b| {
            let x = t.constant(x0.clone());
            let g = t.constant(g0.clone());
            t.batch_feature_norm(x, g, b)
        });
    }

    #[test]
    fn pooled_trace_gradient_matches_closed_form() {
        // d tr(SᵀFS)/dS = (F + Fᵀ)S.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let triplets: Vec<_> = (0..5)
            .flat_map(|i| (0..5).map(move |j| (i, j)))
            .filter(|&(i, j)| (i + 2 * j) % 3 != 0)
            .map(|(i, j)| (i, j, ((i * 5 + j) as f64 + 1.0) / 40.0))
            .collect();
        let f = Arc::new(CsrMatrix::from_triplets(5, 5, &triplets));
        let s0 = random(&mut rng, 5, 3, 0.0, 1.0);
        let pooled = |t: &mut Tape, s: Var| {
            let fs = t.sparse_dense_matmul(&f, s)?;
            let st = t.transpose(s)?;
            let c = t.matmul(st, fs)?;
            t.trace(c)
        };
        let report = finite_difference_check(pooled, &s0, STEP, None).unwrap();
        assert!(report.max_relative_error < TOL, "{report:?}");

        let mut tape = Tape::new();
        let s = tape.leaf(s0.clone(), true);
        let out = pooled(&mut tape, s).unwrap();
        let grad = tape.backward(out).unwrap().get(s).unwrap().clone();
        let dense = f.to_dense();
        let sym = dense.zip_map(&dense.transpose(), |a, b| a + b);
        assert!(grad.max_abs_diff(&sym.matmul(&s0)) < 1e-14);
    }

    #[test]
    fn linear_map_gradient() {
        // loss = sum_all(W·X) with dW = 1·Xᵀ summed over output columns.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random(&mut rng, 4, 3, -1.0, 1.0);
        let w0 = random(&mut rng, 2, 4, -1.0, 1.0);
        let report = finite_difference_check(
            |t, w| {
                let xv = t.constant(x.clone());
                let y = t.matmul(w, xv)?;
                t.sum_all(y)
            },
            &w0,
            STEP,
            None,
        )
        .unwrap();
        assert!(report.max_relative_error < TOL, "{report:?}");
    }

    #[test]
    fn shared_use_finite_differences() {
        let w0 = Tensor::from_rows(&[vec![0.4, -0.9, 1.3]]);
        let report = finite_difference_check(
            |t, w| {
                let a = t.sum_all(w)?;
                let sq = t.elementwise_mul(w, w)?;
                let b = t.sum_all(sq)?;
                t.add(a, b)
            },
            &w0,
            STEP,
            None,
        )
        .unwrap();
        assert!(report.max_relative_error < TOL, "{report:?}");
    }

    #[test]
    fn sampled_coordinates() {
        let x = Tensor::from_rows(&[vec![1.0, 2.0, 3.0, 4.0]]);
        let report = finite_difference_check(
            |t, v| {
                let sq = t.elementwise_mul(v, v)?;
                t.sum_all(sq)
            },
            &x,
            STEP,
            Some(&[1, 3]),
        )
        .unwrap();
        assert_eq!(report.checked, 2);
        assert!(report.max_relative_error < TOL);
    }
}
