//! Subset enumeration in lexicographic order.

/// `C(n, k)`, saturating at `u64::MAX`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(binomial(n, k).min(1 << 24) as usize);
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        // advance to the next combination
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
    out
}

/// Sign patterns in `{±1}^k`, as `i8`, in binary counting order with `+1`
/// first. When `fix_first` is set only patterns with a leading `+1` are
/// produced (the other half are their negations).
pub fn sign_patterns(k: usize, fix_first: bool) -> Vec<Vec<i8>> {
    let free = if fix_first && k > 0 { k - 1 } else { k };
    (0..1usize << free)
        .map(|mask| {
            let mut s = Vec::with_capacity(k);
            if fix_first && k > 0 {
                s.push(1);
            }
            for b in (0..free).rev() {
                s.push(if mask >> b & 1 == 0 { 1 } else { -1 });
            }
            s
        })
        .collect()
}

/// Complement of a sorted subset of `0..n`.
pub fn complement(n: usize, subset: &[usize]) -> Vec<usize> {
    let mut mask = vec![true; n];
    for &i in subset {
        mask[i] = false;
    }
    (0..n).filter(|&i| mask[i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_match_binomial() {
        for n in 0..9 {
            for k in 0..=n {
                assert_eq!(subsets(n, k).len() as u64, binomial(n, k));
            }
        }
        assert_eq!(binomial(40, 4), 91_390);
        assert_eq!(binomial(3, 5), 0);
    }

    #[test]
    fn lexicographic() {
        assert_eq!(subsets(4, 2), vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(subsets(3, 0), vec![Vec::<usize>::new()]);
    }

    #[test]
    fn signs() {
        assert_eq!(sign_patterns(2, false).len(), 4);
        assert_eq!(sign_patterns(2, true), vec![vec![1, 1], vec![1, -1]]);
        assert_eq!(complement(5, &[1, 3]), vec![0, 2, 4]);
    }
}
