//! OPTICS ordering with xi-steep cluster extraction over a precomputed
//! distance matrix. Follows the scikit-learn formulation, including the
//! rounding of distances to 15 decimals and predecessor correction.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticsParams {
    pub min_samples: usize,
    pub xi: f64,
    /// Defaults to `min_samples` when `None`.
    pub min_cluster_size: Option<usize>,
    pub predecessor_correction: bool,
}

impl Default for OpticsParams {
    fn default() -> Self {
        OpticsParams {
            min_samples: 2,
            xi: 0.05,
            min_cluster_size: None,
            predecessor_correction: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpticsResult {
    pub ordering: Vec<usize>,
    pub reachability: Vec<f64>,
    pub core_distances: Vec<f64>,
    pub predecessor: Vec<Option<usize>>,
    /// Cluster label per point, `-1` for noise.
    pub labels: Vec<i64>,
    /// Extracted clusters as inclusive spans of the ordering.
    pub clusters: Vec<(usize, usize)>,
}

fn round15(x: f64) -> f64 {
    if x.is_finite() {
        (x * 1e15).round_ties_even() / 1e15
    } else {
        x
    }
}

/// Runs OPTICS on an `n x n` symmetric distance matrix (row-major).
pub fn optics(dist: &[Vec<f64>], params: &OpticsParams) -> OpticsResult {
    let n = dist.len();
    let min_samples = params.min_samples.max(2).min(n.max(1));
    let core_distances: Vec<f64> = dist
        .iter()
        .map(|row| {
            let mut d = row.clone();
            d.sort_by(f64::total_cmp);
            round15(d[min_samples - 1])
        })
        .collect();

    let mut reachability = vec![f64::INFINITY; n];
    let mut predecessor = vec![None; n];
    let mut processed = vec![false; n];
    let mut ordering = Vec::with_capacity(n);
    for _ in 0..n {
        let point = (0..n)
            .filter(|&i| !processed[i])
            .min_by(|&a, &b| reachability[a].total_cmp(&reachability[b]).then(a.cmp(&b)))
            .expect("an unprocessed point remains");
        processed[point] = true;
        ordering.push(point);
        if core_distances[point].is_finite() {
            for q in 0..n {
                if processed[q] {
                    continue;
                }
                let r = round15(dist[point][q].max(core_distances[point]));
                if r < reachability[q] {
                    reachability[q] = r;
                    predecessor[q] = Some(point);
                }
            }
        }
    }

    let min_cluster_size = params.min_cluster_size.unwrap_or(min_samples).max(2);
    let plot: Vec<f64> = ordering.iter().map(|&i| reachability[i]).collect();
    let pred_plot: Vec<Option<usize>> = ordering.iter().map(|&i| predecessor[i]).collect();
    let clusters = xi_clusters(&plot, &pred_plot, &ordering, params, min_samples, min_cluster_size);

    let mut in_order = vec![-1i64; n];
    let mut label = 0;
    for &(s, e) in &clusters {
        if in_order[s..=e].iter().all(|&l| l == -1) {
            in_order[s..=e].iter_mut().for_each(|l| *l = label);
            label += 1;
        }
    }
    let mut labels = vec![-1i64; n];
    for (pos, &point) in ordering.iter().enumerate() {
        labels[point] = in_order[pos];
    }
    OpticsResult {
        ordering,
        reachability,
        core_distances,
        predecessor,
        labels,
        clusters,
    }
}

struct SteepDown {
    start: usize,
    end: usize,
    mib: f64,
}

fn extend_region(steep: &[bool], xward: &[bool], start: usize, min_samples: usize) -> usize {
    let mut non_xward = 0;
    let mut end = start;
    for index in start..steep.len() {
        if steep[index] {
            non_xward = 0;
            end = index;
        } else if !xward[index] {
            non_xward += 1;
            if non_xward > min_samples {
                break;
            }
        } else {
            return end;
        }
    }
    end
}

fn filter_sdas(sdas: Vec<SteepDown>, mib: f64, xi_complement: f64, r: &[f64]) -> Vec<SteepDown> {
    if mib.is_infinite() {
        return Vec::new();
    }
    sdas.into_iter()
        .filter(|d| mib <= r[d.start] * xi_complement)
        .map(|mut d| {
            d.mib = d.mib.max(mib);
            d
        })
        .collect()
}

fn correct_predecessor(
    r: &[f64],
    pred: &[Option<usize>],
    ordering: &[usize],
    s: usize,
    mut e: usize,
) -> Option<(usize, usize)> {
    while s < e {
        if r[s] > r[e] {
            return Some((s, e));
        }
        if let Some(p) = pred[e] {
            if ordering[s..e].contains(&p) {
                return Some((s, e));
            }
        }
        e -= 1;
    }
    None
}

fn xi_clusters(
    plot: &[f64],
    pred: &[Option<usize>],
    ordering: &[usize],
    params: &OpticsParams,
    min_samples: usize,
    min_cluster_size: usize,
) -> Vec<(usize, usize)> {
    let mut r = plot.to_vec();
    r.push(f64::INFINITY);
    let xi_complement = 1.0 - params.xi;
    let n = plot.len();
    let ratio: Vec<f64> = (0..n).map(|i| r[i] / r[i + 1]).collect();
    let steep_up: Vec<bool> = ratio.iter().map(|&x| x <= xi_complement).collect();
    let steep_down: Vec<bool> = ratio.iter().map(|&x| x >= 1.0 / xi_complement).collect();
    let down: Vec<bool> = ratio.iter().map(|&x| x > 1.0).collect();
    let up: Vec<bool> = ratio.iter().map(|&x| x < 1.0).collect();

    let mut sdas: Vec<SteepDown> = Vec::new();
    let mut clusters = Vec::new();
    let mut index = 0;
    let mut mib = 0.0f64;
    for steep_index in (0..n).filter(|&i| steep_up[i] || steep_down[i]) {
        if steep_index < index {
            continue;
        }
        mib = r[index..=steep_index].iter().fold(mib, |m, &x| nan_max(m, x));
        if steep_down[steep_index] {
            sdas = filter_sdas(sdas, mib, xi_complement, &r);
            let end = extend_region(&steep_down, &up, steep_index, min_samples);
            sdas.push(SteepDown {
                start: steep_index,
                end,
                mib: 0.0,
            });
            index = end + 1;
            mib = r[index];
        } else {
            sdas = filter_sdas(sdas, mib, xi_complement, &r);
            let u_start = steep_index;
            let u_end = extend_region(&steep_up, &down, u_start, min_samples);
            index = u_end + 1;
            mib = r[index];
            let mut found = Vec::new();
            for d in &sdas {
                let mut c_start = d.start;
                let mut c_end = u_end;
                if r[c_end + 1] * xi_complement < d.mib {
                    continue;
                }
                let d_max = r[d.start];
                if d_max * xi_complement >= r[c_end + 1] {
                    while r[c_start + 1] > r[c_end + 1] && c_start < d.end {
                        c_start += 1;
                    }
                } else if r[c_end + 1] * xi_complement >= d_max {
                    while r[c_end - 1] > d_max && c_end > u_start {
                        c_end -= 1;
                    }
                }
                if params.predecessor_correction {
                    match correct_predecessor(&r, pred, ordering, c_start, c_end) {
                        Some((s, e)) => {
                            c_start = s;
                            c_end = e;
                        }
                        None => continue,
                    }
                }
                if c_end + 1 - c_start < min_cluster_size || c_start > d.end || c_end < u_start {
                    continue;
                }
                found.push((c_start, c_end));
            }
            found.reverse();
            clusters.extend(found);
        }
    }
    clusters
}

/// `max` that propagates NaN the way `numpy.max` does.
fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn euclid(points: &[[f64; 2]]) -> Vec<Vec<f64>> {
        points
            .iter()
            .map(|a| {
                points
                    .iter()
                    .map(|b| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt())
                    .collect()
            })
            .collect()
    }

    #[test]
    fn identical_points_form_one_cluster() {
        let d = vec![vec![0.0; 5]; 5];
        let res = optics(&d, &OpticsParams::default());
        assert_eq!(res.labels, vec![0; 5]);
    }

    // Expected values produced by scikit-learn 1.7
    // (`OPTICS(metric="precomputed", ...).fit(D)`).
    #[test]
    fn matches_reference_on_small_blobs() {
        let pts = [
            [0.0, 0.0],
            [0.1, 0.0],
            [0.0, 0.12],
            [5.0, 5.0],
            [5.1, 5.05],
            [5.0, 5.2],
            [10.0, 0.0],
            [2.5, 9.0],
        ];
        let res = optics(&euclid(&pts), &OpticsParams::default());
        assert_eq!(res.ordering, vec![0, 1, 2, 3, 4, 5, 7, 6]);
        assert_eq!(res.labels, vec![0, 0, 0, 1, 1, 1, 1, 1]);
    }

    const BLOBS: [[f64; 2]; 24] = [
        [-0.241, -0.397], [-0.075, 0.126], [0.341, 0.033], [-0.166, -0.235],
        [0.225, 0.49], [0.082, -0.37], [2.713, 3.48], [3.061, 2.48],
        [2.975, 2.651], [2.811, 2.854], [2.786, 3.166], [2.981, 2.823],
        [0.123, 4.249], [-0.493, 3.923], [-0.294, 3.948], [-0.387, 4.006],
        [-0.011, 3.909], [-0.314, 3.881], [4.45, 0.532], [-0.808, 3.588],
        [1.588, 4.392], [-0.116, 0.558], [4.399, 2.057], [2.051, -0.11],
    ];

    #[test]
    fn matches_reference_on_noisy_blobs() {
        let d = euclid(&BLOBS);
        let res = optics(&d, &OpticsParams::default());
        assert_eq!(
            res.ordering,
            vec![0, 3, 5, 1, 2, 21, 4, 23, 18, 22, 7, 8, 11, 9, 10, 6, 20, 12, 16, 14, 17, 15, 13, 19]
        );
        assert_eq!(
            res.labels,
            vec![0, 0, -1, 0, 1, 0, 2, 2, 2, 2, 2, 2, 3, 3, 3, 3, 3, 3, -1, 3, -1, 1, 2, -1]
        );
        let params = OpticsParams { min_samples: 3, xi: 0.1, ..Default::default() };
        let res = optics(&d, &params);
        assert_eq!(
            res.ordering,
            vec![0, 3, 5, 1, 2, 21, 4, 23, 18, 7, 8, 11, 9, 10, 6, 22, 20, 12, 14, 15, 17, 13, 16, 19]
        );
        assert_eq!(
            res.labels,
            vec![0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 2, 2, 2, 2, 2, 2, -1, 2, -1, 0, -1, 0]
        );
    }
}
