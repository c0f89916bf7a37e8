use crate::error::{Error, Result};
use crate::warp::{FeatureMap, Semantics};

/// Number of smoothing passes standing in for a two-layer refinement head.
pub const DEFAULT_REFINE_PASSES: usize = 2;

/// Fixed 3x3 smoothing with every pixel treated as covered.
pub fn refine(feature: &FeatureMap, passes: usize) -> FeatureMap {
    let coverage = vec![true; feature.plane_len()];
    refine_masked(feature, &coverage, passes).expect("coverage sized from the map")
}

/// Edge-preserving 3x3 smoothing restricted to covered pixels.
///
/// Generic maps average each covered pixel with its covered neighbors.
/// Class-probability maps average only neighbors that share the pixel's
/// argmax class, falling back to all covered neighbors for isolated pixels,
/// and are renormalized afterwards. Uncovered pixels are left untouched.
pub fn refine_masked(feature: &FeatureMap, coverage: &[bool], passes: usize) -> Result<FeatureMap> {
    if coverage.len() != feature.plane_len() {
        return Err(Error::invalid("coverage mask must match the feature plane"));
    }
    let mut cur = feature.clone();
    for _ in 0..passes {
        cur = smooth_once(&cur, coverage);
    }
    Ok(cur)
}

fn argmax_labels(f: &FeatureMap) -> Vec<usize> {
    let n = f.plane_len();
    (0..n)
        .map(|i| {
            let mut best = 0;
            for c in 1..f.channels {
                if f.data[c * n + i] > f.data[best * n + i] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

fn smooth_once(f: &FeatureMap, coverage: &[bool]) -> FeatureMap {
    let (h, w) = f.dims();
    let n = h * w;
    let class_prob = f.semantics == Semantics::ClassProb;
    let labels = if class_prob { argmax_labels(f) } else { Vec::new() };
    let mut out = f.clone();
    let mut nbrs = Vec::with_capacity(9);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !coverage[i] {
                continue;
            }
            nbrs.clear();
            for ny in y.saturating_sub(1)..(y + 2).min(h) {
                for nx in x.saturating_sub(1)..(x + 2).min(w) {
                    let j = ny * w + nx;
                    if j != i && coverage[j] {
                        nbrs.push(j);
                    }
                }
            }
            if class_prob {
                let same: Vec<usize> = nbrs.iter().copied().filter(|&j| labels[j] == labels[i]).collect();
                if !same.is_empty() {
                    nbrs = same;
                }
            }
            if nbrs.is_empty() {
                continue;
            }
            let k = (nbrs.len() + 1) as f64;
            for c in 0..f.channels {
                let centre = f.data[c * n + i];
                let delta: f64 = nbrs.iter().map(|&j| f.data[c * n + j] - centre).sum();
                out.data[c * n + i] = centre + delta / k;
            }
            if class_prob {
                let total: f64 = (0..f.channels).map(|c| out.data[c * n + i]).sum();
                if (total - 1.0).abs() > 1e-9 && total > 0.0 {
                    for c in 0..f.channels {
                        out.data[c * n + i] /= total;
                    }
                }
            }
        }
    }
    out
}
