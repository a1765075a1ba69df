//! k-means and Ward hierarchical clustering of visit vectors, adjusted Rand
//! index, and elbow-based choice of k.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::VisitVector;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Kmeans,
    Ward,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Kmeans => write!(f, "kmeans"),
            Method::Ward => write!(f, "ward"),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kmeans" => Ok(Method::Kmeans),
            "ward" => Ok(Method::Ward),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

/// Assignment of visit ids to cluster ids plus per-cluster statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub method: Method,
    pub k: usize,
    pub visit_ids: Vec<String>,
    pub labels: Vec<usize>,
    pub wcss: f64,
    pub sizes: Vec<usize>,
}

impl Clustering {
    pub fn assignment(&self) -> HashMap<&str, usize> {
        self.visit_ids
            .iter()
            .map(|s| s.as_str())
            .zip(self.labels.iter().copied())
            .collect()
    }

    /// TSV: visit_id, cluster.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        for (id, label) in self.visit_ids.iter().zip(&self.labels) {
            writeln!(out, "{id}\t{label}").map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    pub fn load(path: &Path, method: Method) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut visit_ids = Vec::new();
        let mut labels = Vec::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 2 {
                return Err(Error::Malformed {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    message: "expected 2 columns".into(),
                });
            }
            visit_ids.push(cols[0].to_string());
            labels.push(cols[1].parse().map_err(|_| Error::Malformed {
                path: path.to_path_buf(),
                line: idx + 1,
                message: "bad cluster id".into(),
            })?);
        }
        let k = labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut sizes = vec![0usize; k];
        for &l in &labels {
            sizes[l] += 1;
        }
        Ok(Clustering {
            method,
            k,
            visit_ids,
            labels,
            wcss: f64::NAN,
            sizes,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterStats {
    pub method: Method,
    pub k: usize,
    pub sizes: Vec<usize>,
    pub wcss: f64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ari: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elbow_curve: Option<Vec<(usize, f64)>>,
}

/// One merge step: cluster ids follow the singleton-then-merged convention
/// (singletons 0..n-1, step s creates node n+s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub node_a: usize,
    pub node_b: usize,
    pub height: f64,
    pub new_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    /// TSV: node_a, node_b, height, new_size.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        for m in &self.merges {
            writeln!(out, "{}\t{}\t{}\t{}", m.node_a, m.node_b, m.height, m.new_size)
                .map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn compute_wcss(points: &[&[f64]], labels: &[usize], k: usize) -> f64 {
    let dim = points[0].len();
    let mut means = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.iter().zip(labels) {
        counts[l] += 1;
        for (m, v) in means[l].iter_mut().zip(*p) {
            *m += v;
        }
    }
    for (mean, &c) in means.iter_mut().zip(&counts) {
        if c > 0 {
            for m in mean.iter_mut() {
                *m /= c as f64;
            }
        }
    }
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| sq_dist(p, &means[l]))
        .sum()
}

fn kmeans_pp_centers(
    points: &[&[f64]],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(points[rng.random_range(0..n)].to_vec());
    let mut dists: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = dists.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &d) in dists.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.push(points[next].to_vec());
        for (d, p) in dists.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, centers.last().unwrap()));
        }
    }
    centers
}

fn lloyd(points: &[&[f64]], mut centers: Vec<Vec<f64>>, k: usize) -> (Vec<usize>, f64) {
    let n = points.len();
    let dim = points[0].len();
    let mut labels = vec![0usize; n];
    let mut prev_wcss = f64::INFINITY;
    for _iter in 0..300 {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let d = sq_dist(p, center);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        // reseed emptied clusters with the point farthest from its center
        let mut counts = vec![0usize; k];
        for &l in &labels {
            counts[l] += 1;
        }
        for c in 0..k {
            if counts[c] == 0 {
                let (far, _) = points
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (i, sq_dist(p, &centers[labels[i]])))
                    .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                    .unwrap();
                counts[labels[far]] -= 1;
                labels[far] = c;
                counts[c] = 1;
                changed = true;
            }
        }
        let wcss = compute_wcss(points, &labels, k);
        assert!(
            wcss <= prev_wcss + 1e-9 * (1.0 + prev_wcss.abs().min(f64::MAX)),
            "Lloyd iteration increased WCSS: {prev_wcss} -> {wcss}"
        );
        prev_wcss = wcss;
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        for (p, &l) in points.iter().zip(&labels) {
            for (s, v) in sums[l].iter_mut().zip(*p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for s in sums[c].iter_mut() {
                    *s /= counts[c] as f64;
                }
                centers[c] = sums[c].clone();
            }
        }
    }
    let wcss = compute_wcss(points, &labels, k);
    (labels, wcss)
}

/// Canonical relabeling: cluster ids in order of first appearance, empty
/// clusters removed.
fn canonicalize(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map: HashMap<usize, usize> = HashMap::new();
    let mut out = Vec::with_capacity(labels.len());
    for &l in labels {
        let next = map.len();
        let id = *map.entry(l).or_insert(next);
        out.push(id);
    }
    (out, map.len())
}

/// Lloyd's algorithm from k-means++ seeding; best WCSS over restarts.
pub fn kmeans(
    vectors: &[VisitVector],
    k: usize,
    restarts: usize,
    seed: u64,
) -> Result<Clustering> {
    let n = vectors.len();
    if k > n {
        return Err(Error::TooManyClusters { k, n });
    }
    assert!(k >= 1 && restarts >= 1);
    let points: Vec<&[f64]> = vectors.iter().map(|v| v.vector.as_slice()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..restarts {
        let centers = kmeans_pp_centers(&points, k, &mut rng);
        let (labels, wcss) = lloyd(&points, centers, k);
        if best.as_ref().is_none_or(|(_, w)| wcss < *w) {
            best = Some((labels, wcss));
        }
    }
    let (labels, wcss) = best.unwrap();
    let (labels, actual_k) = canonicalize(&labels);
    let mut sizes = vec![0usize; actual_k];
    for &l in &labels {
        sizes[l] += 1;
    }
    Ok(Clustering {
        method: Method::Kmeans,
        k: actual_k,
        visit_ids: vectors.iter().map(|v| v.visit_id.clone()).collect(),
        labels,
        wcss,
        sizes,
    })
}

/// Full Ward agglomeration via the Lance-Williams recurrence. Pairwise
/// merge costs start at ||x_i - x_j||^2 / 2, the Ward cost of merging two
/// singletons.
pub fn ward_dendrogram(points: &[&[f64]]) -> Dendrogram {
    let n = points.len();
    // active cluster id -> (matrix row, size); rows index the cost table
    let mut cost: HashMap<(usize, usize), f64> = HashMap::new();
    for i in 0..n {
        for j in i + 1..n {
            cost.insert((i, j), sq_dist(points[i], points[j]) / 2.0);
        }
    }
    let mut active: BTreeSet<usize> = (0..n).collect();
    let mut size: HashMap<usize, usize> = (0..n).map(|i| (i, 1)).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    let key = |a: usize, b: usize| if a < b { (a, b) } else { (b, a) };
    for step in 0..n.saturating_sub(1) {
        let mut best: Option<((usize, usize), f64)> = None;
        for (&a, &b) in active
            .iter()
            .flat_map(|a| active.iter().filter(move |b| *b > a).map(move |b| (a, b)))
        {
            let c = cost[&(a, b)];
            match best {
                Some((_, bc)) if c >= bc => {}
                _ => best = Some(((a, b), c)),
            }
        }
        let ((a, b), height) = best.unwrap();
        let new_id = n + step;
        let na = size[&a];
        let nb = size[&b];
        let new_size = na + nb;
        merges.push(Merge {
            node_a: a,
            node_b: b,
            height,
            new_size,
        });
        active.remove(&a);
        active.remove(&b);
        for &c in &active {
            let nc = size[&c] as f64;
            let dac = cost[&key(a, c)];
            let dbc = cost[&key(b, c)];
            let dab = height;
            let total = (na + nb) as f64 + nc;
            let updated =
                ((na as f64 + nc) * dac + (nb as f64 + nc) * dbc - nc * dab) / total;
            cost.insert(key(new_id, c), updated);
        }
        active.insert(new_id);
        size.insert(new_id, new_size);
    }
    Dendrogram { merges }
}

/// Cluster membership after applying the first n - k merges.
pub fn cut_dendrogram(dendrogram: &Dendrogram, n: usize, k: usize) -> Vec<usize> {
    // union-find over singleton + merged node ids
    let total = n + dendrogram.merges.len();
    let mut parent: Vec<usize> = (0..total).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (step, m) in dendrogram.merges.iter().take(n - k).enumerate() {
        let new_id = n + step;
        let ra = find(&mut parent, m.node_a);
        let rb = find(&mut parent, m.node_b);
        parent[ra] = new_id;
        parent[rb] = new_id;
    }
    let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    canonicalize(&roots).0
}

/// Ward clustering cut at k clusters.
pub fn ward(vectors: &[VisitVector], k: usize) -> Result<(Clustering, Dendrogram)> {
    let n = vectors.len();
    if k > n {
        return Err(Error::TooManyClusters { k, n });
    }
    assert!(k >= 1);
    let points: Vec<&[f64]> = vectors.iter().map(|v| v.vector.as_slice()).collect();
    let dendrogram = ward_dendrogram(&points);
    let labels = cut_dendrogram(&dendrogram, n, k);
    let wcss = compute_wcss(&points, &labels, k);
    let mut sizes = vec![0usize; k];
    for &l in &labels {
        sizes[l] += 1;
    }
    Ok((
        Clustering {
            method: Method::Ward,
            k,
            visit_ids: vectors.iter().map(|v| v.visit_id.clone()).collect(),
            labels,
            wcss,
            sizes,
        },
        dendrogram,
    ))
}

fn choose2(x: usize) -> f64 {
    (x as f64) * (x as f64 - 1.0) / 2.0
}

/// Adjusted Rand index between two clusterings of the same visit set.
pub fn adjusted_rand(u: &Clustering, v: &Clustering) -> Result<f64> {
    let ua = u.assignment();
    let va = v.assignment();
    let u_ids: BTreeSet<&str> = ua.keys().copied().collect();
    let v_ids: BTreeSet<&str> = va.keys().copied().collect();
    if u_ids != v_ids {
        let only_u: Vec<&&str> = u_ids.difference(&v_ids).collect();
        let only_v: Vec<&&str> = v_ids.difference(&u_ids).collect();
        return Err(Error::MismatchedIds(format!(
            "only in first: {only_u:?}; only in second: {only_v:?}"
        )));
    }
    let mut table: HashMap<(usize, usize), usize> = HashMap::new();
    let mut row: HashMap<usize, usize> = HashMap::new();
    let mut col: HashMap<usize, usize> = HashMap::new();
    for id in &u_ids {
        let i = ua[id];
        let j = va[id];
        *table.entry((i, j)).or_insert(0) += 1;
        *row.entry(i).or_insert(0) += 1;
        *col.entry(j).or_insert(0) += 1;
    }
    let n = u_ids.len();
    let sum_ij: f64 = table.values().map(|&c| choose2(c)).sum();
    let sum_a: f64 = row.values().map(|&c| choose2(c)).sum();
    let sum_b: f64 = col.values().map(|&c| choose2(c)).sum();
    let total = choose2(n);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_a * sum_b / total;
    let max_index = 0.5 * (sum_a + sum_b);
    if (max_index - expected).abs() < f64::EPSILON * total {
        return Ok(1.0);
    }
    Ok((sum_ij - expected) / (max_index - expected))
}

pub struct ElbowResult {
    pub k: usize,
    pub curve: Vec<(usize, f64)>,
    pub degenerate: bool,
}

/// WCSS curve over a k range with the relative-improvement elbow rule and a
/// second-difference fallback.
#[allow(clippy::too_many_arguments)]
pub fn elbow_k(
    vectors: &[VisitVector],
    k_min: usize,
    k_max: usize,
    method: Method,
    tau: f64,
    restarts: usize,
    seed: u64,
) -> Result<ElbowResult> {
    let n = vectors.len();
    assert!(k_min >= 2 && k_min <= k_max);
    let k_max = k_max.min(n);
    if k_min > n {
        return Err(Error::TooManyClusters { k: k_min, n });
    }
    // compute one step past k_max so the improvement rule covers k_max
    let k_top = (k_max + 1).min(n);
    let mut wcss_by_k: Vec<(usize, f64)> = Vec::new();
    match method {
        Method::Kmeans => {
            for k in k_min..=k_top {
                let c = kmeans(vectors, k, restarts, seed)?;
                wcss_by_k.push((k, c.wcss));
            }
        }
        Method::Ward => {
            let points: Vec<&[f64]> = vectors.iter().map(|v| v.vector.as_slice()).collect();
            let dendrogram = ward_dendrogram(&points);
            for k in k_min..=k_top {
                let labels = cut_dendrogram(&dendrogram, n, k);
                wcss_by_k.push((k, compute_wcss(&points, &labels, k)));
            }
        }
    }
    let curve: Vec<(usize, f64)> = wcss_by_k
        .iter()
        .copied()
        .filter(|(k, _)| *k <= k_max)
        .collect();
    if wcss_by_k.iter().all(|&(_, w)| w < 1e-12) {
        eprintln!("warning: all points identical, defaulting to k = {k_min}");
        return Ok(ElbowResult {
            k: k_min,
            curve,
            degenerate: true,
        });
    }
    for window in wcss_by_k.windows(2) {
        let (k, w) = window[0];
        let (_, w_next) = window[1];
        let improvement = if w > 0.0 { (w - w_next) / w } else { 0.0 };
        if improvement < tau {
            return Ok(ElbowResult {
                k,
                curve,
                degenerate: false,
            });
        }
    }
    // no k qualified: maximize the second difference over interior points
    let mut best = (wcss_by_k[0].0, f64::NEG_INFINITY);
    for w in wcss_by_k.windows(3) {
        let (k, mid) = w[1];
        let second = w[0].1 - 2.0 * mid + w[2].1;
        if second > best.1 {
            best = (k, second);
        }
    }
    Ok(ElbowResult {
        k: best.0,
        curve,
        degenerate: false,
    })
}
