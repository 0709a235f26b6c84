use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};

/// Number of labeled DAGs on `n` nodes by Robinson's recursion
/// `G(n) = sum_{k=1..n} (-1)^(k+1) C(n,k) 2^(k(n-k)) G(n-k)`, `G(0) = 1`.
pub fn robinson_dag_count(n: usize) -> BigUint {
    let mut g: Vec<BigInt> = vec![BigInt::one()];
    for m in 1..=n {
        let mut sum = BigInt::zero();
        let mut binom = BigInt::one();
        for k in 1..=m {
            // C(m, k) = C(m, k-1) * (m - k + 1) / k
            binom = binom * (m - k + 1) / k;
            let term = &binom * (&g[m - k] << (k * (m - k)));
            if k % 2 == 1 {
                sum += term;
            } else {
                sum -= term;
            }
        }
        g.push(sum);
    }
    g.pop()
        .and_then(|v| v.to_biguint())
        .expect("DAG counts are positive")
}
