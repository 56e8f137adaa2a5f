use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::geometry::{NeighborIndex, PointCloud, Rgb, Vec3};

/// Sorted, duplicate-free indices into a source cloud.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Cluster {
    indices: Vec<usize>,
}

impl Cluster {
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Self { indices }
    }

    pub(crate) fn from_sorted(indices: Vec<usize>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        Self { indices }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub(crate) fn check_bounds(&self, len: usize) -> Result<()> {
        match self.indices.last() {
            Some(&index) if index >= len => Err(Error::IndexOutOfBounds { index, len }),
            _ => Ok(()),
        }
    }
}

/// The cloud without the points listed in `k`.
pub fn remove_indices(c: &PointCloud, k: &Cluster) -> Result<PointCloud> {
    k.check_bounds(c.len())?;
    let mut removed = k.indices().iter().peekable();
    let keep: Vec<usize> = (0..c.len())
        .filter(|i| {
            if removed.peek() == Some(&i) {
                removed.next();
                false
            } else {
                true
            }
        })
        .collect();
    Ok(c.select(&keep))
}

/// Connected components of the graph joining points at distance
/// `<= tolerance`, keeping those with size in `[min_size, max_size]`.
/// Output is ordered by descending size, then by smallest member index.
pub fn euclidean_cluster(
    c: &PointCloud,
    tolerance: f64,
    min_size: usize,
    max_size: usize,
) -> Vec<Cluster> {
    let index = NeighborIndex::new(c.points());
    let all: Vec<usize> = (0..c.len()).collect();
    let mut clusters = grow(c.points(), &index, &all, tolerance, |_, _| true);
    finish(&mut clusters, min_size, max_size);
    clusters
}

/// Splits `k` into pieces that are connected both spatially (distance
/// `<= spatial_tolerance`) and chromatically (circular hue difference
/// `<= hue_tolerance` degrees).
pub fn color_split(
    c: &PointCloud,
    k: &Cluster,
    spatial_tolerance: f64,
    hue_tolerance: f64,
    min_size: usize,
) -> Result<Vec<Cluster>> {
    let colors = c.colors().ok_or(Error::Colorless)?;
    k.check_bounds(c.len())?;
    let members = k.indices();
    let local: Vec<Vec3> = members.iter().map(|&i| c.points()[i]).collect();
    let hues: Vec<f64> = members.iter().map(|&i| hue(colors[i])).collect();
    let index = NeighborIndex::new(&local);
    let order: Vec<usize> = (0..local.len()).collect();
    let pieces = grow(&local, &index, &order, spatial_tolerance, |a, b| {
        hue_distance(hues[a], hues[b]) <= hue_tolerance
    });
    let mut out: Vec<Cluster> = pieces
        .into_iter()
        .map(|p| Cluster::from_sorted(p.indices.iter().map(|&i| members[i]).collect()))
        .collect();
    finish(&mut out, min_size, usize::MAX);
    Ok(out)
}

/// Breadth-first flood fill over `seeds` (ascending), linking neighbors
/// within `tolerance` that also satisfy `linked`.
fn grow(
    points: &[Vec3],
    index: &NeighborIndex,
    seeds: &[usize],
    tolerance: f64,
    linked: impl Fn(usize, usize) -> bool,
) -> Vec<Cluster> {
    let mut visited = vec![false; points.len()];
    let mut clusters = Vec::new();
    let mut queue = VecDeque::new();
    let mut buf = Vec::new();
    for &seed in seeds {
        if visited[seed] {
            continue;
        }
        visited[seed] = true;
        queue.push_back(seed);
        let mut members = Vec::new();
        while let Some(i) = queue.pop_front() {
            members.push(i);
            index.radius_search_into(&points[i], tolerance, &mut buf);
            for &j in &buf {
                if !visited[j] && linked(i, j) {
                    visited[j] = true;
                    queue.push_back(j);
                }
            }
        }
        clusters.push(Cluster::new(members));
    }
    clusters
}

fn finish(clusters: &mut Vec<Cluster>, min_size: usize, max_size: usize) {
    clusters.retain(|k| k.len() >= min_size && k.len() <= max_size);
    clusters.sort_by(|a, b| b.len().cmp(&a.len()).then(a.indices[0].cmp(&b.indices[0])));
}

/// Hue in degrees `[0, 360)`; grays map to 0.
pub fn hue([r, g, b]: Rgb) -> f64 {
    let (r, g, b) = (r as f64 / 255.0, g as f64 / 255.0, b as f64 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    if delta == 0.0 {
        return 0.0;
    }
    let h = if max == r {
        60.0 * ((g - b) / delta)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    h.rem_euclid(360.0)
}

/// Circular distance between two hues, in `[0, 180]`.
pub fn hue_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}
