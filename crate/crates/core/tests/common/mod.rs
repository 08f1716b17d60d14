//! Reference implementations used as test oracles. They are written for
//! clarity and share no code with the library.

#![allow(dead_code)]

/// Weighted pool-adjacent-violators by repeated block merging.
pub fn reference_pava(y: &[f64], w: &[f64]) -> Vec<f64> {
    // (weighted sum, weight, count)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::new();
    for (&yi, &wi) in y.iter().zip(w) {
        blocks.push((wi * yi, wi, 1));
        while blocks.len() > 1 {
            let (s2, w2, c2) = blocks[blocks.len() - 1];
            let (s1, w1, c1) = blocks[blocks.len() - 2];
            if s1 / w1 <= s2 / w2 {
                break;
            }
            blocks.pop();
            *blocks.last_mut().unwrap() = (s1 + s2, w1 + w2, c1 + c2);
        }
    }
    blocks
        .iter()
        .flat_map(|&(s, w, c)| std::iter::repeat_n(s / w, c))
        .collect()
}

/// Least-squares isotonic regression of `y` on `x` with tied `x` pooled,
/// returned per observation in input order.
pub fn reference_isotonic(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| x[i].partial_cmp(&x[j]).unwrap());
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &i in &order {
        match groups.last_mut() {
            Some(g) if x[g[0]] == x[i] => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    let means: Vec<f64> = groups
        .iter()
        .map(|g| g.iter().map(|&i| y[i]).sum::<f64>() / g.len() as f64)
        .collect();
    let weights: Vec<f64> = groups.iter().map(|g| g.len() as f64).collect();
    let fitted = reference_pava(&means, &weights);
    let mut out = vec![0.0; x.len()];
    for (g, f) in groups.iter().zip(fitted) {
        for &i in g {
            out[i] = f;
        }
    }
    out
}

/// Monotone least squares by enumerating every split of the sequence into
/// consecutive blocks. Exponential in `y.len()`; use for n <= 10.
pub fn brute_force_isotonic(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << (n - 1)) {
        let mut fitted = Vec::with_capacity(n);
        let mut start = 0;
        for end in 1..=n {
            if end == n || mask & (1 << (end - 1)) != 0 {
                let m = y[start..end].iter().sum::<f64>() / (end - start) as f64;
                fitted.extend(std::iter::repeat_n(m, end - start));
                start = end;
            }
        }
        if fitted.windows(2).any(|p| p[0] > p[1]) {
            continue;
        }
        let sse: f64 = y.iter().zip(&fitted).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().is_none_or(|(s, _)| sse < *s) {
            best = Some((sse, fitted));
        }
    }
    best.unwrap().1
}

pub fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
