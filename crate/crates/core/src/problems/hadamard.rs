use rand::Rng as _;

use crate::rng::{stream, Stream};
use crate::{Error, Result};

/// Normalized Sylvester–Hadamard matrix of size `order` (a power of two):
/// entries `±1/√order`, symmetric and its own inverse.
pub fn sylvester_hadamard(order: usize) -> Result<Vec<Vec<f64>>> {
    if order == 0 || !order.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "Hadamard order {order} is not a power of two"
        )));
    }
    let mut h = vec![vec![1.0f64]];
    while h.len() < order {
        let s = h.len();
        let mut next = vec![vec![0.0; 2 * s]; 2 * s];
        for i in 0..s {
            for j in 0..s {
                let v = h[i][j];
                next[i][j] = v;
                next[i][j + s] = v;
                next[i + s][j] = v;
                next[i + s][j + s] = -v;
            }
        }
        h = next;
    }
    let c = 1.0 / (order as f64).sqrt();
    for row in &mut h {
        row.iter_mut().for_each(|v| *v *= c);
    }
    Ok(h)
}

/// Stacks `k` blocks `H·S_j`, where each `S_j` is a diagonal matrix of
/// uniform random signs. Returns `k·block` rows of length `block`.
pub fn gen_hadamard_measurements(k: usize, block: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if k == 0 {
        return Err(Error::InvalidParameter("need at least one sign block".into()));
    }
    let h = sylvester_hadamard(block)?;
    let mut rng = stream(seed, Stream::Aux);
    let mut rows = Vec::with_capacity(k * block);
    for _ in 0..k {
        let signs: Vec<f64> = (0..block)
            .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        for hr in &h {
            rows.push(hr.iter().zip(&signs).map(|(hv, s)| hv * s).collect());
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = a.len();
        (0..n)
            .map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect())
            .collect()
    }

    #[test]
    fn symmetric_involution_at_every_size() {
        for p in 0..=8 {
            let order = 1 << p;
            let h = sylvester_hadamard(order).unwrap();
            let hh = matmul(&h, &h);
            for i in 0..order {
                for j in 0..order {
                    assert_eq!(h[i][j], h[j][i]);
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((hh[i][j] - want).abs() <= 1e-12, "order {order}");
                }
            }
        }
    }

    #[test]
    fn order_four_is_exact() {
        let h = sylvester_hadamard(4).unwrap();
        assert!(h.iter().flatten().all(|&v| v == 0.5 || v == -0.5));
        assert_eq!(matmul(&h, &h), vec![
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
        ]);
    }

    #[test]
    fn three_blocks_of_256() {
        let a = gen_hadamard_measurements(3, 256, 11).unwrap();
        assert_eq!(a.len(), 768);
        for row in &a {
            assert_eq!(row.len(), 256);
            assert!(row.iter().all(|&v| v == 1.0 / 16.0 || v == -1.0 / 16.0));
            let n2: f64 = row.iter().map(|v| v * v).sum();
            assert!((n2 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_order() {
        assert!(sylvester_hadamard(12).is_err());
        assert!(gen_hadamard_measurements(0, 4, 1).is_err());
    }
}
