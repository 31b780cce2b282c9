//! Small shared combinatorial helpers.

/// Visit every size-`m` subset of `0..n` in lexicographic order.
pub(crate) fn for_each_combination(n: usize, m: usize, mut f: impl FnMut(&[usize])) {
    if m > n {
        return;
    }
    if m == 0 {
        f(&[]);
        return;
    }
    let mut idx: Vec<usize> = (0..m).collect();
    loop {
        f(&idx);
        let mut i = m;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] + 1 <= n - (m - i) {
                idx[i] += 1;
                for j in i + 1..m {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Exact binomial coefficient in u64; panics on overflow.
pub(crate) fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut num: u128 = 1;
    for i in 0..k {
        num = num * (n - i) as u128 / (i + 1) as u128;
    }
    u64::try_from(num).expect("binomial overflow")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combinations_counted() {
        let mut n = 0;
        for_each_combination(6, 3, |c| {
            assert_eq!(c.len(), 3);
            assert!(c.windows(2).all(|w| w[0] < w[1]));
            n += 1;
        });
        assert_eq!(n, 20);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(12, 6), 924);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(5, 6), 0);
        assert_eq!(binomial(64, 32), 1832624140942590534);
    }
}
