//! Brute-force reference implementations of the evaluation metrics.
//!
//! Each oracle works from first principles (pair counting, explicit
//! enumeration of tie orderings) and shares no code with the library.

#![allow(dead_code)]

/// Probability that a random positive outranks a random negative, ties ½.
pub fn auroc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let (mut wins, mut pairs) = (0.0, 0usize);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if positive[i] && !positive[j] {
                pairs += 1;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    (pairs > 0).then(|| wins / pairs as f64)
}

/// Trapezoid area of the retained-quality curve for one rejection order.
fn curve_area(order: &[usize], quality: &[f64]) -> f64 {
    let n = order.len();
    let points: Vec<f64> = (0..n)
        .map(|k| {
            let kept = &order[k..];
            kept.iter().map(|&i| quality[i]).sum::<f64>() / kept.len() as f64
        })
        .collect();
    (0..n - 1).map(|k| (points[k] + points[k + 1]) / 2.0 / n as f64).sum()
}

/// Calls `f` with every permutation of `items` (Heap's algorithm).
fn permutations(items: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
    if k <= 1 {
        f(items);
        return;
    }
    for i in 0..k {
        permutations(items, k - 1, f);
        let j = if k.is_multiple_of(2) { i } else { 0 };
        items.swap(j, k - 1);
    }
}

/// Mean curve area over every rejection order consistent with `key`
/// (descending), enumerating all orderings inside tie groups.
fn expected_area(key: &[f64], quality: &[f64]) -> f64 {
    let mut idx: Vec<usize> = (0..key.len()).collect();
    idx.sort_by(|&a, &b| key[b].partial_cmp(&key[a]).unwrap());
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &i in &idx {
        match groups.last_mut() {
            Some(g) if key[g[0]] == key[i] => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    let mut total = 0.0;
    let mut count = 0usize;
    fn walk(groups: &[Vec<usize>], prefix: &mut Vec<usize>, quality: &[f64], total: &mut f64, count: &mut usize) {
        match groups.split_first() {
            None => {
                *total += curve_area(prefix, quality);
                *count += 1;
            }
            Some((g, rest)) => {
                let mut items = g.clone();
                let len = items.len();
                permutations(&mut items, len, &mut |perm| {
                    let mark = prefix.len();
                    prefix.extend_from_slice(perm);
                    walk(rest, prefix, quality, total, count);
                    prefix.truncate(mark);
                });
            }
        }
    }
    walk(&groups, &mut Vec::new(), quality, &mut total, &mut count);
    total / count as f64
}

/// Number of rejection orders `expected_area` would enumerate.
pub fn tie_orderings(key: &[f64]) -> usize {
    let mut sorted = key.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut total = 1usize;
    let mut run = 1usize;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
            total = total.saturating_mul(run);
        } else {
            run = 1;
        }
    }
    total
}

/// PRR from enumerated curves: uncertainty rejects the highest score first,
/// the oracle the lowest quality first, random keeps the mean quality.
pub fn prr(scores: &[f64], quality: &[f64]) -> Option<f64> {
    let n = scores.len();
    if n < 2 || quality.iter().all(|&q| q == quality[0]) {
        return None;
    }
    let ours = expected_area(scores, quality);
    let neg_quality: Vec<f64> = quality.iter().map(|q| -q).collect();
    let oracle = expected_area(&neg_quality, quality);
    let mean = quality.iter().sum::<f64>() / n as f64;
    let random = mean * (n - 1) as f64 / n as f64;
    Some((ours - random) / (oracle - random))
}

/// Rank of each entry: 1 + number smaller + half the number of other equal entries.
fn ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let less = x.iter().filter(|&&w| w < v).count() as f64;
            let equal = x.iter().filter(|&&w| w == v).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Spearman's ρ as the Pearson correlation of counted ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() < 3 {
        return None;
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    (va > 0.0 && vb > 0.0).then(|| cov / (va * vb).sqrt())
}

/// Kendall's τ-b from signed pair products.
pub fn kendall(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len();
    let (mut s, mut nx, mut ny) = (0.0, 0.0, 0.0);
    for i in 0..n {
        for j in 0..i {
            let sx = (a[i] - a[j]).signum() * f64::from(a[i] != a[j]);
            let sy = (b[i] - b[j]).signum() * f64::from(b[i] != b[j]);
            s += sx * sy;
            nx += sx * sx;
            ny += sy * sy;
        }
    }
    (nx > 0.0 && ny > 0.0).then(|| s / (nx * ny).sqrt())
}
