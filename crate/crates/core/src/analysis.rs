//! Interpretation toolkit: cluster recommendation profiles, contingency
//! tables with correspondence analysis, and 2-D projections (PCA, exact
//! t-SNE) emitted as data and SVG.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::cluster::Clustering;
use crate::corpus::{AnnotatedVisit, Lexicon};
use crate::{Error, Result};

/// One profile row: a recommendation term with the percentage of the
/// cluster's visits containing it.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRow {
    pub term: String,
    pub label: String,
    pub pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterProfile {
    pub cluster: usize,
    pub rows: Vec<ProfileRow>,
}

/// Per-cluster recommendation terms ranked by within-cluster visit
/// fraction. Terms ranking in the top 15 of at least three clusters are
/// treated as generic and filtered out before taking `top_n`.
pub fn cluster_profile(
    clustering: &Clustering,
    annotated: &[AnnotatedVisit],
    top_n: usize,
    lexicon: Option<&Lexicon>,
) -> Vec<ClusterProfile> {
    const COMMON_TOP: usize = 15;
    const COMMON_MIN_CLUSTERS: usize = 3;
    let assignment = clustering.assignment();
    // per cluster: term -> number of visits containing it
    let mut counts: Vec<HashMap<&str, usize>> = vec![HashMap::new(); clustering.k];
    let mut cluster_sizes = vec![0usize; clustering.k];
    for visit in annotated {
        let Some(&cluster) = assignment.get(visit.visit_id.as_str()) else {
            continue;
        };
        cluster_sizes[cluster] += 1;
        let unique: HashSet<&str> = visit
            .recommendation_concepts
            .iter()
            .map(|c| c.as_str())
            .collect();
        for term in unique {
            *counts[cluster].entry(term).or_insert(0) += 1;
        }
    }
    let ranked = |cluster: usize| -> Vec<(&str, f64)> {
        let size = cluster_sizes[cluster].max(1) as f64;
        let mut rows: Vec<(&str, f64)> = counts[cluster]
            .iter()
            .map(|(&t, &c)| (t, c as f64 / size))
            .collect();
        rows.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(b.0)));
        rows
    };
    let mut top15_hits: HashMap<&str, usize> = HashMap::new();
    for cluster in 0..clustering.k {
        for (term, _) in ranked(cluster).into_iter().take(COMMON_TOP) {
            *top15_hits.entry(term).or_insert(0) += 1;
        }
    }
    let generic: HashSet<&str> = top15_hits
        .iter()
        .filter(|(_, &n)| n >= COMMON_MIN_CLUSTERS)
        .map(|(&t, _)| t)
        .collect();
    let label_of = |term: &str| -> String {
        lexicon
            .and_then(|l| l.get(term))
            .and_then(|e| e.labels.first().cloned())
            .unwrap_or_default()
    };
    (0..clustering.k)
        .map(|cluster| {
            let rows: Vec<ProfileRow> = ranked(cluster)
                .into_iter()
                .filter(|(t, _)| !generic.contains(t))
                .take(top_n)
                .map(|(term, frac)| ProfileRow {
                    term: term.to_string(),
                    label: label_of(term),
                    pct: frac * 100.0,
                })
                .collect();
            if rows.is_empty() {
                eprintln!("warning: cluster {cluster} has no characteristic recommendation terms");
            }
            ClusterProfile { cluster, rows }
        })
        .collect()
}

/// TSV: cluster, term, label, pct.
pub fn save_profiles(profiles: &[ClusterProfile], path: &Path) -> Result<()> {
    let mut out = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    writeln!(out, "cluster\tterm\tlabel\tpct").map_err(|e| Error::io(path, e))?;
    for p in profiles {
        for r in &p.rows {
            writeln!(out, "{}\t{}\t{}\t{:.2}", p.cluster, r.term, r.label, r.pct)
                .map_err(|e| Error::io(path, e))?;
        }
    }
    Ok(())
}

/// Cross-tabulation of cluster ids against a categorical visit label.
#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyTable {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ContingencyTable {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::from("cluster");
        for col in &self.cols {
            out.push('\t');
            out.push_str(col);
        }
        out.push('\n');
        for (row, counts) in self.rows.iter().zip(&self.counts) {
            out.push_str(row);
            for count in counts {
                out.push_str(&format!("\t{count}"));
            }
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// counts[i][j] = visits in cluster i carrying label j; visits without
/// metadata are bucketed under "∅".
pub fn contingency(
    clustering: &Clustering,
    metadata: &HashMap<String, String>,
) -> ContingencyTable {
    let mut tally: BTreeMap<(usize, String), u64> = BTreeMap::new();
    let mut labels: HashSet<String> = HashSet::new();
    for (id, &cluster) in clustering
        .visit_ids
        .iter()
        .zip(&clustering.labels)
    {
        let label = metadata.get(id).cloned().unwrap_or_else(|| "∅".to_string());
        labels.insert(label.clone());
        *tally.entry((cluster, label)).or_insert(0) += 1;
    }
    let rows: Vec<String> = (0..clustering.k).map(|c| c.to_string()).collect();
    let mut cols: Vec<String> = labels.into_iter().collect();
    cols.sort();
    let counts = (0..clustering.k)
        .map(|i| {
            cols.iter()
                .map(|j| tally.get(&(i, j.clone())).copied().unwrap_or(0))
                .collect()
        })
        .collect();
    ContingencyTable { rows, cols, counts }
}

#[derive(Debug, Clone)]
pub struct CaResult {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    /// Principal coordinates, first two dimensions.
    pub row_coords: Vec<[f64; 2]>,
    pub col_coords: Vec<[f64; 2]>,
    /// Squared singular values of the standardized residual matrix.
    pub inertias: Vec<f64>,
    pub total_inertia: f64,
}

/// Correspondence analysis: SVD of the standardized residuals
/// D_r^{-1/2} (P - r c^T) D_c^{-1/2}.
pub fn correspondence_analysis(table: &ContingencyTable) -> Result<CaResult> {
    // drop all-zero rows and columns before decomposition
    let keep_rows: Vec<usize> = (0..table.rows.len())
        .filter(|&i| table.counts[i].iter().any(|&c| c > 0))
        .collect();
    let keep_cols: Vec<usize> = (0..table.cols.len())
        .filter(|&j| table.counts.iter().any(|r| r[j] > 0))
        .collect();
    if keep_rows.len() < table.rows.len() || keep_cols.len() < table.cols.len() {
        eprintln!("warning: dropping all-zero rows/columns from contingency table");
    }
    if keep_rows.is_empty() || keep_cols.is_empty() {
        return Err(Error::Invalid("contingency table has zero grand total".into()));
    }
    let nr = keep_rows.len();
    let nc = keep_cols.len();
    let total: f64 = table.total() as f64;
    let p = DMatrix::from_fn(nr, nc, |i, j| {
        table.counts[keep_rows[i]][keep_cols[j]] as f64 / total
    });
    let r: Vec<f64> = (0..nr).map(|i| p.row(i).sum()).collect();
    let c: Vec<f64> = (0..nc).map(|j| p.column(j).sum()).collect();
    let s = DMatrix::from_fn(nr, nc, |i, j| {
        (p[(i, j)] - r[i] * c[j]) / (r[i] * c[j]).sqrt()
    });
    let total_inertia: f64 = s.iter().map(|v| v * v).sum();

    let mut svd = s.svd(true, true);
    svd.sort_by_singular_values();
    let u = svd.u.as_ref().unwrap();
    let v_t = svd.v_t.as_ref().unwrap();
    let sigma = &svd.singular_values;
    let rank = sigma.len();
    let inertias: Vec<f64> = sigma.iter().map(|s| s * s).collect();
    if total_inertia < 1e-14 {
        eprintln!("warning: contingency table is rank-0 (perfect independence)");
    }
    let coord = |mass: f64, axis_u: f64, dim: usize| -> f64 {
        if dim < rank {
            axis_u * sigma[dim] / mass.sqrt()
        } else {
            0.0
        }
    };
    let mut row_coords = vec![[0.0; 2]; nr];
    let mut col_coords = vec![[0.0; 2]; nc];
    for dim in 0..2.min(rank) {
        if sigma[dim] < 1e-12 {
            continue;
        }
        for i in 0..nr {
            row_coords[i][dim] = coord(r[i], u[(i, dim)], dim);
        }
        for j in 0..nc {
            col_coords[j][dim] = coord(c[j], v_t[(dim, j)], dim);
        }
    }
    Ok(CaResult {
        row_labels: keep_rows.iter().map(|&i| table.rows[i].clone()).collect(),
        col_labels: keep_cols.iter().map(|&j| table.cols[j].clone()).collect(),
        row_coords,
        col_coords,
        inertias,
        total_inertia,
    })
}

/// TSV with an inertia header, then point_type (row|col), label, dim1, dim2.
pub fn save_ca(result: &CaResult, path: &Path) -> Result<()> {
    let mut out = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let inertias: Vec<String> = result.inertias.iter().map(|v| format!("{v:.6}")).collect();
    writeln!(out, "# inertias\t{}", inertias.join("\t")).map_err(|e| Error::io(path, e))?;
    writeln!(out, "# total_inertia\t{:.6}", result.total_inertia)
        .map_err(|e| Error::io(path, e))?;
    writeln!(out, "point_type\tlabel\tdim1\tdim2").map_err(|e| Error::io(path, e))?;
    for (label, coords) in result.row_labels.iter().zip(&result.row_coords) {
        writeln!(out, "row\t{}\t{}\t{}", label, coords[0], coords[1])
            .map_err(|e| Error::io(path, e))?;
    }
    for (label, coords) in result.col_labels.iter().zip(&result.col_coords) {
        writeln!(out, "col\t{}\t{}\t{}", label, coords[0], coords[1])
            .map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Items placed in the plane, optionally colored by a categorical key.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection2D {
    pub ids: Vec<String>,
    pub coords: Vec<[f64; 2]>,
    pub color_key: Option<Vec<String>>,
}

impl Projection2D {
    /// TSV: id, x, y, color.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        for (i, id) in self.ids.iter().enumerate() {
            let color = self
                .color_key
                .as_ref()
                .map(|k| k[i].as_str())
                .unwrap_or("");
            writeln!(out, "{}\t{}\t{}\t{}", id, self.coords[i][0], self.coords[i][1], color)
                .map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PcaResult {
    pub projection: Projection2D,
    /// Variance captured by each of the two components.
    pub explained: [f64; 2],
    pub total_variance: f64,
}

/// Projects onto the top-2 principal directions of the column-centered
/// data. Sign convention: the first nonzero loading of each component is
/// positive.
pub fn pca_2d(items: &[(String, Vec<f64>)]) -> Result<PcaResult> {
    assert!(items.len() >= 3);
    let n = items.len();
    let d = items[0].1.len();
    let mut centered = DMatrix::from_fn(n, d, |i, j| items[i].1[j]);
    for j in 0..d {
        let mean = centered.column(j).sum() / n as f64;
        for i in 0..n {
            centered[(i, j)] -= mean;
        }
    }
    let mut svd = centered.clone().svd(false, true);
    svd.sort_by_singular_values();
    let sigma = &svd.singular_values;
    if sigma.is_empty() || sigma[0] < 1e-12 {
        return Err(Error::ZeroVariance);
    }
    let v_t = svd.v_t.as_ref().unwrap();
    let denom = (n - 1) as f64;
    let total_variance: f64 = sigma.iter().map(|s| s * s / denom).sum();
    let mut components = [vec![0.0; d], vec![0.0; d]];
    let mut explained = [0.0; 2];
    for dim in 0..2.min(sigma.len()) {
        let mut axis: Vec<f64> = (0..d).map(|j| v_t[(dim, j)]).collect();
        if let Some(first) = axis.iter().find(|v| v.abs() > 1e-12) {
            if *first < 0.0 {
                for v in &mut axis {
                    *v = -*v;
                }
            }
        }
        explained[dim] = sigma[dim] * sigma[dim] / denom;
        components[dim] = axis;
    }
    let coords: Vec<[f64; 2]> = (0..n)
        .map(|i| {
            let project = |axis: &[f64]| -> f64 {
                (0..d).map(|j| centered[(i, j)] * axis[j]).sum()
            };
            [project(&components[0]), project(&components[1])]
        })
        .collect();
    Ok(PcaResult {
        projection: Projection2D {
            ids: items.iter().map(|(id, _)| id.clone()).collect(),
            coords,
            color_key: None,
        },
        explained,
        total_variance,
    })
}

/// Per-point conditional distributions p_{j|i} whose entropy matches
/// ln(perplexity) to 1e-5 via bisection on the Gaussian precision.
/// Returns the row-stochastic matrix and the achieved entropies.
pub fn input_probabilities(points: &[&[f64]], perplexity: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = points.len();
    let target = perplexity.ln();
    let sq = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
    };
    let dist: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| sq(points[i], points[j])).collect())
        .collect();
    let mut cond = vec![vec![0.0; n]; n];
    let mut entropies = vec![0.0; n];
    for i in 0..n {
        let mut beta = 1.0;
        let mut beta_min = f64::NEG_INFINITY;
        let mut beta_max = f64::INFINITY;
        let mut row = vec![0.0; n];
        let mut entropy = 0.0;
        for _ in 0..50 {
            let mut sum = 0.0;
            for j in 0..n {
                row[j] = if j == i { 0.0 } else { (-beta * dist[i][j]).exp() };
                sum += row[j];
            }
            if sum <= 0.0 {
                // beta overshot every neighbor into underflow
                beta_max = beta;
                beta = if beta_min.is_finite() {
                    (beta + beta_min) / 2.0
                } else {
                    beta / 2.0
                };
                continue;
            }
            // H = ln(sum) + beta * E[d]
            let weighted: f64 = (0..n).map(|j| row[j] * dist[i][j]).sum();
            entropy = sum.ln() + beta * weighted / sum;
            for v in &mut row {
                *v /= sum;
            }
            if (entropy - target).abs() <= 1e-5 {
                break;
            }
            if entropy > target {
                beta_min = beta;
                beta = if beta_max.is_finite() {
                    (beta + beta_max) / 2.0
                } else {
                    beta * 2.0
                };
            } else {
                beta_max = beta;
                beta = if beta_min.is_finite() {
                    (beta + beta_min) / 2.0
                } else {
                    beta / 2.0
                };
            }
        }
        cond[i] = row;
        entropies[i] = entropy;
    }
    (cond, entropies)
}

#[derive(Debug, Clone)]
pub struct TsneResult {
    pub projection: Projection2D,
    /// (iteration, KL divergence) every 50 iterations.
    pub kl_checkpoints: Vec<(usize, f64)>,
}

/// Exact O(n^2) t-SNE with early exaggeration and momentum switching.
pub fn tsne_2d(
    items: &[(String, Vec<f64>)],
    perplexity: f64,
    iterations: usize,
    seed: u64,
) -> Result<TsneResult> {
    let n = items.len();
    assert!(n >= 3);
    let max_perplexity = ((n - 1) as f64 / 3.0).max(1.0);
    let perplexity = if perplexity > max_perplexity {
        eprintln!("warning: perplexity lowered to {max_perplexity:.2} for n = {n}");
        max_perplexity
    } else {
        perplexity
    };
    let points: Vec<&[f64]> = items.iter().map(|(_, v)| v.as_slice()).collect();
    let (cond, _) = input_probabilities(&points, perplexity);
    // symmetrized joint distribution
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = (cond[i][j] + cond[j][i]) / (2.0 * n as f64);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = move || -> f64 {
        // Box-Muller
        let u1: f64 = rng.random_range(f64::EPSILON..1.0);
        let u2: f64 = rng.random_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };
    let mut y: Vec<f64> = (0..n * 2).map(|_| gauss() * 1e-4).collect();
    let mut velocity = vec![0.0; n * 2];
    // per-parameter adaptive gains as in the reference implementation
    let mut gains = vec![1.0_f64; n * 2];

    const EXAGGERATION: f64 = 12.0;
    const EXAGGERATION_UNTIL: usize = 250;
    const LEARNING_RATE: f64 = 200.0;

    let kl_divergence = |y: &[f64], p: &[f64]| -> f64 {
        let mut q_sum = 0.0;
        let mut q = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let dx = y[i * 2] - y[j * 2];
                let dy = y[i * 2 + 1] - y[j * 2 + 1];
                let w = 1.0 / (1.0 + dx * dx + dy * dy);
                q[i * n + j] = w;
                q[j * n + i] = w;
                q_sum += 2.0 * w;
            }
        }
        let mut kl = 0.0;
        for idx in 0..n * n {
            if p[idx] > 0.0 {
                kl += p[idx] * (p[idx] / (q[idx] / q_sum).max(1e-12)).ln();
            }
        }
        kl
    };

    let mut checkpoints = Vec::new();
    for iter in 0..iterations {
        let exaggeration = if iter < EXAGGERATION_UNTIL {
            EXAGGERATION
        } else {
            1.0
        };
        let momentum = if iter < EXAGGERATION_UNTIL { 0.5 } else { 0.8 };
        // Student-t affinities
        let mut weights = vec![0.0; n * n];
        let mut w_sum = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let dx = y[i * 2] - y[j * 2];
                let dy = y[i * 2 + 1] - y[j * 2 + 1];
                let w = 1.0 / (1.0 + dx * dx + dy * dy);
                weights[i * n + j] = w;
                weights[j * n + i] = w;
                w_sum += 2.0 * w;
            }
        }
        let mut grad = vec![0.0; n * 2];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let w = weights[i * n + j];
                let q = (w / w_sum).max(1e-12);
                let coeff = 4.0 * (exaggeration * p[i * n + j] - q) * w;
                grad[i * 2] += coeff * (y[i * 2] - y[j * 2]);
                grad[i * 2 + 1] += coeff * (y[i * 2 + 1] - y[j * 2 + 1]);
            }
        }
        for idx in 0..n * 2 {
            gains[idx] = if (grad[idx] > 0.0) != (velocity[idx] > 0.0) {
                gains[idx] + 0.2
            } else {
                (gains[idx] * 0.8).max(0.01)
            };
            velocity[idx] = momentum * velocity[idx] - LEARNING_RATE * gains[idx] * grad[idx];
            y[idx] += velocity[idx];
        }
        // keep the embedding centered
        for d in 0..2 {
            let mean: f64 = (0..n).map(|i| y[i * 2 + d]).sum::<f64>() / n as f64;
            for i in 0..n {
                y[i * 2 + d] -= mean;
            }
        }
        if (iter + 1) % 50 == 0 || iter + 1 == iterations {
            let kl = kl_divergence(&y, &p);
            if !kl.is_finite() {
                return Err(Error::NonFiniteObjective);
            }
            checkpoints.push((iter + 1, kl));
        }
    }
    let coords = (0..n).map(|i| [y[i * 2], y[i * 2 + 1]]).collect();
    Ok(TsneResult {
        projection: Projection2D {
            ids: items.iter().map(|(id, _)| id.clone()).collect(),
            coords,
            color_key: None,
        },
        kl_checkpoints: checkpoints,
    })
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

/// Standalone SVG scatter plot with categorical colors, legend and axes.
/// Byte-identical output for identical input.
pub fn emit_svg(projection: &Projection2D, path: &Path) -> Result<()> {
    let svg = render_svg(projection);
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}

pub fn render_svg(projection: &Projection2D) -> String {
    const WIDTH: f64 = 800.0;
    const HEIGHT: f64 = 600.0;
    const MARGIN: f64 = 60.0;
    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for c in &projection.coords {
        min_x = min_x.min(c[0]);
        max_x = max_x.max(c[0]);
        min_y = min_y.min(c[1]);
        max_y = max_y.max(c[1]);
    }
    if !min_x.is_finite() {
        min_x = 0.0;
        max_x = 1.0;
        min_y = 0.0;
        max_y = 1.0;
    }
    let pad = |lo: &mut f64, hi: &mut f64| {
        if *hi - *lo < 1e-12 {
            *lo -= 0.5;
            *hi += 0.5;
        }
    };
    pad(&mut min_x, &mut max_x);
    pad(&mut min_y, &mut max_y);
    let sx = (WIDTH - 2.0 * MARGIN) / (max_x - min_x);
    let sy = (HEIGHT - 2.0 * MARGIN) / (max_y - min_y);
    let px = |x: f64| MARGIN + (x - min_x) * sx;
    let py = |y: f64| HEIGHT - MARGIN - (y - min_y) * sy;

    let mut categories: Vec<String> = projection
        .color_key
        .as_ref()
        .map(|keys| {
            let set: std::collections::BTreeSet<String> = keys.iter().cloned().collect();
            set.into_iter().collect()
        })
        .unwrap_or_default();
    categories.sort();
    let color_of = |idx: usize| -> &str {
        match (&projection.color_key, categories.is_empty()) {
            (Some(keys), false) => {
                let pos = categories.iter().position(|c| *c == keys[idx]).unwrap();
                PALETTE[pos % PALETTE.len()]
            }
            _ => PALETTE[0],
        }
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    // axes
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    ));
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        b = HEIGHT - MARGIN
    ));
    for t in 0..=4 {
        let fx = min_x + (max_x - min_x) * t as f64 / 4.0;
        let fy = min_y + (max_y - min_y) * t as f64 / 4.0;
        let tx = px(fx);
        let ty = py(fy);
        svg.push_str(&format!(
            "<line x1=\"{tx:.2}\" y1=\"{b}\" x2=\"{tx:.2}\" y2=\"{b2}\" stroke=\"black\"/>\n",
            b = HEIGHT - MARGIN,
            b2 = HEIGHT - MARGIN + 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{tx:.2}\" y=\"{ly}\" font-size=\"11\" text-anchor=\"middle\">{fx:.2}</text>\n",
            ly = HEIGHT - MARGIN + 18.0
        ));
        svg.push_str(&format!(
            "<line x1=\"{m2}\" y1=\"{ty:.2}\" x2=\"{m}\" y2=\"{ty:.2}\" stroke=\"black\"/>\n",
            m = MARGIN,
            m2 = MARGIN - 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{lx}\" y=\"{ty:.2}\" font-size=\"11\" text-anchor=\"end\">{fy:.2}</text>\n",
            lx = MARGIN - 8.0
        ));
    }
    for (idx, c) in projection.coords.iter().enumerate() {
        svg.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"{}\" fill-opacity=\"0.8\"/>\n",
            px(c[0]),
            py(c[1]),
            color_of(idx)
        ));
    }
    // legend: one swatch rect + text per category
    for (i, category) in categories.iter().enumerate() {
        let ly = MARGIN + i as f64 * 18.0;
        svg.push_str(&format!(
            "<rect class=\"legend\" x=\"{x}\" y=\"{ly}\" width=\"12\" height=\"12\" fill=\"{}\"/>\n",
            PALETTE[i % PALETTE.len()],
            x = WIDTH - MARGIN - 100.0
        ));
        svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{ty}\" font-size=\"12\">{}</text>\n",
            escape_xml(category),
            x = WIDTH - MARGIN - 84.0,
            ty = ly + 10.0
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
