//! Finite-difference stencils on uniform nodes.

use std::ops::{Add, Mul};

/// Fornberg's recursion: weights `w[j]` such that
/// `f^(m)(x0) ≈ Σ w[j] f(nodes[j])` for derivative order `m`.
pub fn fornberg_weights(x0: f64, nodes: &[f64], m: usize) -> Vec<f64> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; m + 1]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

/// Stencils of accuracy `order` for derivative `deriv` on an axis of
/// `points` nodes with unit spacing. Row `i` holds the first node index and
/// the weights for node `i`; rows near either edge are one-sided.
#[derive(Clone, Debug)]
pub struct AxisStencil {
    rows: Vec<(usize, Vec<f64>)>,
}

impl AxisStencil {
    pub fn new(points: usize, deriv: usize, order: usize) -> Self {
        let half = order / 2;
        let central: Vec<f64> = {
            let nodes: Vec<f64> = (0..=2 * half).map(|j| j as f64).collect();
            fornberg_weights(half as f64, &nodes, deriv)
        };
        let edge_len = (order + deriv).min(points);
        let edge_nodes: Vec<f64> = (0..edge_len).map(|j| j as f64).collect();
        let rows = (0..points)
            .map(|i| {
                if i >= half && i + half < points {
                    (i - half, central.clone())
                } else if i < half {
                    (0, fornberg_weights(i as f64, &edge_nodes, deriv))
                } else {
                    let start = points - edge_len;
                    (start, fornberg_weights((i - start) as f64, &edge_nodes, deriv))
                }
            })
            .collect();
        AxisStencil { rows }
    }

    /// Applies the stencil along one line; `line` and `out` share layout.
    pub fn apply<T>(&self, line: &[T], out: &mut [T], scale: f64)
    where
        T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
    {
        for (i, (start, w)) in self.rows.iter().enumerate() {
            let mut acc = T::default();
            for (j, &wj) in w.iter().enumerate() {
                acc = acc + line[start + j] * wj;
            }
            out[i] = acc * scale;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classic_central_weights() {
        let w = fornberg_weights(2.0, &[0.0, 1.0, 2.0, 3.0, 4.0], 1);
        let expect = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
        let w2 = fornberg_weights(1.0, &[0.0, 1.0, 2.0], 2);
        assert!((w2[0] - 1.0).abs() < 1e-14 && (w2[1] + 2.0).abs() < 1e-14);
    }

    #[test]
    fn edge_rows_differentiate_polynomials_exactly() {
        for order in [2, 4, 6, 8] {
            let n = 20;
            for deriv in [1, 2] {
                let st = AxisStencil::new(n, deriv, order);
                let p = order + deriv - 1;
                let f: Vec<f64> = (0..n).map(|i| (i as f64 * 0.1).powi(p as i32)).collect();
                let mut out = vec![0.0; n];
                st.apply(&f, &mut out, 1.0 / 0.1f64.powi(deriv as i32));
                for (i, o) in out.iter().enumerate() {
                    let x = i as f64 * 0.1;
                    let exact = if deriv == 1 {
                        p as f64 * x.powi(p as i32 - 1)
                    } else {
                        (p * (p - 1)) as f64 * x.powi(p as i32 - 2)
                    };
                    assert!((o - exact).abs() < 1e-7 * (1.0 + exact.abs()), "{order} {deriv} {i}");
                }
            }
        }
    }
}
