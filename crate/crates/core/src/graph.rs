//! Per-view K-nearest-neighbor similarity graph with a Gaussian kernel.
//!
//! Bandwidth is local: sigma_n is the mean distance of instance n to its K
//! nearest neighbors, so similarities adapt to local density. The graph is
//! built once (brute force, which doubles as the reference implementation)
//! and can be cached on disk keyed by a content hash of the feature matrix.

use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Floor for the local bandwidth; guards duplicated points.
pub const SIGMA_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
    pub similarity: f64,
}

/// K nearest neighbors of every instance in one view, sorted by descending
/// similarity (ascending distance), ties broken toward the lower index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewGraph {
    k: usize,
    content_hash: String,
    sigma: Vec<f64>,
    neighbors: Vec<Vec<Neighbor>>,
}

impl ViewGraph {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn content_hash(&self) -> &str {
        &self.content_hash
    }

    /// Local bandwidth of instance n.
    pub fn sigma(&self, n: usize) -> f64 {
        self.sigma[n]
    }

    pub fn neighbors_of(&self, n: usize) -> Result<&[Neighbor]> {
        self.neighbors.get(n).map(|v| v.as_slice()).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "instance {n} out of range for a graph over {} instances",
                self.neighbors.len()
            ))
        })
    }

    /// Writes the graph as JSON next to its content hash.
    pub fn save_cache(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).expect("graph serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }

    /// Loads a cached graph, accepting it only if the stored content hash and
    /// K match the given feature matrix.
    pub fn load_cache(
        path: &Path,
        features: &FeatureMatrix,
        k: usize,
    ) -> Result<Option<ViewGraph>> {
        if !path.exists() {
            return Ok(None);
        }
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let graph: ViewGraph = serde_json::from_str(&text)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        if graph.k != k || graph.content_hash != features.content_hash() {
            return Ok(None);
        }
        Ok(Some(graph))
    }
}

/// Brute-force K-nearest-neighbor graph over Euclidean distance with a
/// Gaussian kernel: s = exp(-(d / sigma_n)^2).
pub fn build_view_graph(features: &FeatureMatrix, k: usize) -> Result<ViewGraph> {
    let n = features.rows();
    if k == 0 {
        return Err(Error::Config("graph needs k >= 1".into()));
    }
    if k >= n {
        return Err(Error::Config(format!(
            "graph needs k < instance count, got k={k} with {n} instances"
        )));
    }
    let mut sigma = Vec::with_capacity(n);
    let mut neighbors = Vec::with_capacity(n);
    let mut scratch: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for i in 0..n {
        scratch.clear();
        let xi = features.row(i);
        for j in 0..n {
            if j == i {
                continue;
            }
            let xj = features.row(j);
            let d2: f64 = xi
                .iter()
                .zip(xj)
                .map(|(a, b)| {
                    let d = a - b;
                    d * d
                })
                .sum();
            scratch.push((d2, j));
        }
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        scratch.select_nth_unstable_by(k - 1, cmp);
        scratch.truncate(k);
        scratch.sort_unstable_by(cmp);

        let distances: Vec<f64> = scratch.iter().map(|&(d2, _)| d2.sqrt()).collect();
        let s = (distances.iter().sum::<f64>() / k as f64).max(SIGMA_FLOOR);
        sigma.push(s);
        neighbors.push(
            scratch
                .iter()
                .zip(&distances)
                .map(|(&(_, j), &d)| Neighbor {
                    index: j,
                    distance: d,
                    similarity: (-(d / s) * (d / s)).exp(),
                })
                .collect(),
        );
    }
    Ok(ViewGraph {
        k,
        content_hash: features.content_hash(),
        sigma,
        neighbors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line_points(xs: &[f64]) -> FeatureMatrix {
        FeatureMatrix::new(xs.len(), 1, xs.to_vec()).unwrap()
    }

    #[test]
    fn nearest_neighbor_on_a_line() {
        let f = line_points(&[0.0, 1.0, 2.0, 10.0]);
        let g = build_view_graph(&f, 1).unwrap();
        let nb = g.neighbors_of(0).unwrap();
        assert_eq!(nb.len(), 1);
        assert_eq!(nb[0].index, 1);
        assert_abs_diff_eq!(g.sigma(0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(nb[0].similarity, (-1.0f64).exp(), epsilon = 1e-15);
        // The far point's nearest neighbor is the closest of the cluster.
        assert_eq!(g.neighbors_of(3).unwrap()[0].index, 2);
    }

    #[test]
    fn bandwidth_is_mean_neighbor_distance() {
        // Distances from the origin point: 1, 2, 3 -> sigma 2; the
        // distance-2 neighbor then has similarity e^{-1}.
        let f = line_points(&[0.0, 1.0, -2.0, 3.0]);
        let g = build_view_graph(&f, 3).unwrap();
        assert_abs_diff_eq!(g.sigma(0), 2.0, epsilon = 1e-15);
        let nb = g.neighbors_of(0).unwrap();
        assert_eq!(nb[1].index, 2);
        assert_abs_diff_eq!(nb[1].similarity, (-1.0f64).exp(), epsilon = 1e-15);
        // Sorted by ascending distance.
        assert!(nb[0].distance <= nb[1].distance && nb[1].distance <= nb[2].distance);
    }

    #[test]
    fn distance_ties_break_toward_lower_index() {
        // Points 1 and 2 are both at distance 1 from point 0.
        let f = line_points(&[0.0, 1.0, -1.0, 5.0]);
        let g = build_view_graph(&f, 1).unwrap();
        assert_eq!(g.neighbors_of(0).unwrap()[0].index, 1);
    }

    #[test]
    fn duplicate_points_hit_the_sigma_floor() {
        let f = line_points(&[3.0, 3.0, 9.0]);
        let g = build_view_graph(&f, 1).unwrap();
        assert_eq!(g.sigma(0), SIGMA_FLOOR);
        // Zero distance keeps similarity at 1.
        assert_abs_diff_eq!(
            g.neighbors_of(0).unwrap()[0].similarity,
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn matches_independent_full_sort() {
        let n = 60;
        let d = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data: Vec<f64> = (0..n * d).map(|_| rng.random::<f64>() * 4.0).collect();
        let f = FeatureMatrix::new(n, d, data).unwrap();
        let k = 5;
        let g = build_view_graph(&f, k).unwrap();
        for i in 0..n {
            let mut all: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let dist = f
                        .row(i)
                        .iter()
                        .zip(f.row(j))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    (dist, j)
                })
                .collect();
            all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let expected_sigma = all[..k].iter().map(|x| x.0).sum::<f64>() / k as f64;
            assert_abs_diff_eq!(g.sigma(i), expected_sigma, epsilon = 1e-12);
            for (nb, (dist, j)) in g.neighbors_of(i).unwrap().iter().zip(&all[..k]) {
                assert_eq!(nb.index, *j);
                assert_abs_diff_eq!(nb.distance, *dist, epsilon = 1e-12);
                let s = (-(dist / expected_sigma).powi(2)).exp();
                assert_abs_diff_eq!(nb.similarity, s, epsilon = 1e-12);
                assert!(nb.similarity > 0.0 && nb.similarity <= 1.0);
            }
        }
    }

    #[test]
    fn rejects_degenerate_k() {
        let f = line_points(&[0.0, 1.0, 2.0]);
        assert!(build_view_graph(&f, 0).is_err());
        assert!(build_view_graph(&f, 3).is_err());
    }

    #[test]
    fn cache_round_trip_and_invalidation() {
        let f = line_points(&[0.0, 1.0, 2.0, 10.0]);
        let g = build_view_graph(&f, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("graph.json");
        g.save_cache(&path).unwrap();
        let loaded = ViewGraph::load_cache(&path, &f, 2).unwrap().unwrap();
        assert_eq!(g, loaded);
        // Different K or different features: cache is ignored.
        assert!(ViewGraph::load_cache(&path, &f, 3).unwrap().is_none());
        let other = line_points(&[0.0, 1.0, 2.0, 11.0]);
        assert!(ViewGraph::load_cache(&path, &other, 2).unwrap().is_none());
    }
}
