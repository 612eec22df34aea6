//! Unit-sphere helpers shared by sense induction and category formation.
//!
//! Matrix cells are log-probabilities. Clustering works on probability-space
//! directions: each vector is exponentiated after subtracting its maximum, so
//! a uniform shift in log space (a global scaling of probabilities) leaves
//! the direction unchanged. EMPTY cells are coordinate 0.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Scales `v` to unit length; `None` for the zero vector.
pub fn normalized(v: &[f64]) -> Option<Vec<f64>> {
    let n = norm(v);
    (n > 0.0 && n.is_finite()).then(|| v.iter().map(|x| x / n).collect())
}

/// Unit probability-space direction of a log-probability vector. Returns the
/// zero vector when every cell is EMPTY.
pub fn prob_direction<I>(logs: I) -> Vec<f64>
where
    I: IntoIterator<Item = Option<f64>>,
    I::IntoIter: Clone,
{
    let logs = logs.into_iter();
    let max = logs
        .clone()
        .flatten()
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return logs.map(|_| 0.0).collect();
    }
    let raw: Vec<f64> = logs.map(|x| x.map_or(0.0, |x| (x - max).exp())).collect();
    let n = norm(&raw);
    raw.into_iter().map(|x| x / n).collect()
}

/// `1 - cos(a, b)` for unit vectors; a zero vector is at distance 1 from
/// everything but itself.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return if na == nb { 0.0 } else { 1.0 };
    }
    (1.0 - dot(a, b) / (na * nb)).max(0.0)
}
