use std::collections::BTreeMap;

use statrs::distribution::{ContinuousCDF, StudentsT};

use super::EvalError;

/// Cohen's κ for two raters over the same items.
pub fn cohen_kappa<T: Ord>(labels_a: &[T], labels_b: &[T]) -> Result<f64, EvalError> {
    if labels_a.len() != labels_b.len() || labels_a.is_empty() {
        return Err(EvalError::Shape(format!(
            "label lists of length {} and {}",
            labels_a.len(),
            labels_b.len()
        )));
    }
    let n = labels_a.len() as f64;
    let agree = labels_a.iter().zip(labels_b).filter(|(a, b)| a == b).count() as f64;
    let p_o = agree / n;
    let mut marg_a: BTreeMap<&T, f64> = BTreeMap::new();
    let mut marg_b: BTreeMap<&T, f64> = BTreeMap::new();
    for a in labels_a {
        *marg_a.entry(a).or_default() += 1.0;
    }
    for b in labels_b {
        *marg_b.entry(b).or_default() += 1.0;
    }
    let p_e: f64 = marg_a
        .iter()
        .map(|(label, ca)| ca * marg_b.get(label).copied().unwrap_or(0.0))
        .sum::<f64>()
        / (n * n);
    if (1.0 - p_e).abs() < f64::EPSILON {
        return if p_o == 1.0 { Ok(1.0) } else { Err(EvalError::DegenerateMarginals) };
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// 1-based ranks with ties given their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && values[order[end + 1]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end) as f64 / 2.0 + 1.0;
        for &idx in &order[start..=end] {
            ranks[idx] = rank;
        }
        start = end + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub rho: f64,
    pub p_two_sided: f64,
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<(), EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::Shape(format!("lengths {} and {}", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(EvalError::Shape(format!("need at least 3 pairs, got {}", x.len())));
    }
    Ok(())
}

fn rank_rho(x: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>, f64), EvalError> {
    check_pair(x, y)?;
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let rho = pearson(&rx, &ry).ok_or(EvalError::DegenerateInput)?;
    Ok((rx, ry, rho))
}

/// Spearman's ρ with a two-sided p from the t approximation on n − 2
/// degrees of freedom.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<Correlation, EvalError> {
    let (_, _, rho) = rank_rho(x, y)?;
    let df = (x.len() - 2) as f64;
    let p = if rho.abs() >= 1.0 {
        0.0
    } else {
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("df is positive");
        (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
    };
    Ok(Correlation { rho, p_two_sided: p })
}

pub const EXACT_PERMUTATION_MAX_N: usize = 10;

/// Spearman's ρ with an exact two-sided permutation p: the share of all n!
/// orderings of the y ranks whose |ρ| is at least the observed one.
pub fn spearman_rho_exact(x: &[f64], y: &[f64]) -> Result<Correlation, EvalError> {
    if x.len() > EXACT_PERMUTATION_MAX_N {
        return Err(EvalError::Shape(format!(
            "exact permutation p supports n <= {EXACT_PERMUTATION_MAX_N}, got {}",
            x.len()
        )));
    }
    let (rx, ry, rho) = rank_rho(x, y)?;
    let observed = rho.abs() - 1e-12;
    let mut perm = ry.clone();
    let (mut hits, mut total) = (0u64, 0u64);
    heap_permutations(&mut perm, &mut |p| {
        total += 1;
        if pearson(&rx, p).is_some_and(|r| r.abs() >= observed) {
            hits += 1;
        }
    });
    Ok(Correlation {
        rho,
        p_two_sided: hits as f64 / total as f64,
    })
}

fn heap_permutations(items: &mut [f64], visit: &mut impl FnMut(&[f64])) {
    let n = items.len();
    let mut c = vec![0usize; n];
    visit(items);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                items.swap(0, i);
            } else {
                items.swap(c[i], i);
            }
            visit(items);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}
