/// An order-preserving matching between gold rows and predicted columns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Alignment {
    /// Matched `(gold, pred)` index pairs, strictly increasing in both.
    pub pairs: Vec<(usize, usize)>,
    pub total: f64,
}

/// Maximum-weight order-preserving matching over `s` (rows = gold, columns =
/// predictions) by dynamic programming with traceback. On ties the
/// traceback skips rather than matches, so zero-weight pairs never appear.
pub fn best_alignment(s: &[Vec<f64>]) -> Alignment {
    let n = s.len();
    let m = s.first().map_or(0, Vec::len);
    if n == 0 || m == 0 {
        return Alignment::default();
    }
    let mut a = vec![vec![0.0f64; m + 1]; n + 1];
    for i in 1..=n {
        assert_eq!(s[i - 1].len(), m, "ragged similarity matrix");
        for j in 1..=m {
            a[i][j] = a[i - 1][j]
                .max(a[i][j - 1])
                .max(a[i - 1][j - 1] + s[i - 1][j - 1]);
        }
    }
    let mut pairs = Vec::new();
    let (mut i, mut j) = (n, m);
    while i > 0 && j > 0 {
        if a[i][j] == a[i - 1][j] {
            i -= 1;
        } else if a[i][j] == a[i][j - 1] {
            j -= 1;
        } else {
            pairs.push((i - 1, j - 1));
            i -= 1;
            j -= 1;
        }
    }
    pairs.reverse();
    Alignment {
        pairs,
        total: a[n][m],
    }
}
