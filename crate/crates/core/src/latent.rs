//! PCA over reverb features, interpolation and sampling on the principal
//! plane.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::container;
use crate::error::{Error, Result};
use crate::model::ReverbFeature;

const PCA_MAGIC: &[u8; 4] = b"RVBP";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k` orthonormal rows of length `D`.
    pub components: Vec<Vec<f64>>,
    /// Sample variances along each component, non-increasing.
    pub variances: Vec<f64>,
    /// Total sample variance of the fitted data.
    pub total_variance: f64,
    /// Bounding box of the fitted data in the first two coordinates.
    pub region: Option<PlaneRegion>,
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order and the matching unit
/// eigenvectors as rows.
pub fn symmetric_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let scale: f64 = m
        .iter()
        .flatten()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j][j].total_cmp(&m[i][i]));
    let values = order.iter().map(|&i| m[i][i]).collect();
    let vectors = order
        .iter()
        .map(|&i| v.iter().map(|row| row[i]).collect())
        .collect();
    (values, vectors)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl PcaModel {
    /// Fits `k` principal axes to the rows of `features`. Each component is
    /// oriented so that its largest-magnitude entry is positive.
    pub fn fit(features: &[Vec<f64>], k: usize) -> Result<Self> {
        let n = features.len();
        if n < 2 {
            return Err(Error::invalid(format!(
                "PCA needs at least 2 points, got {n}"
            )));
        }
        let d = features[0].len();
        if let Some(bad) = features.iter().find(|f| f.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: bad.len(),
            });
        }
        if k == 0 || k > d.min(n - 1) {
            return Err(Error::invalid(format!(
                "{k} components from {n} points of dimension {d}"
            )));
        }
        let mean: Vec<f64> = (0..d)
            .map(|j| features.iter().map(|f| f[j]).sum::<f64>() / n as f64)
            .collect();
        let mut cov = vec![vec![0.0; d]; d];
        for f in features {
            let c: Vec<f64> = f.iter().zip(&mean).map(|(x, m)| x - m).collect();
            for i in 0..d {
                for j in i..d {
                    cov[i][j] += c[i] * c[j];
                }
            }
        }
        for i in 0..d {
            for j in i..d {
                cov[i][j] /= (n - 1) as f64;
                cov[j][i] = cov[i][j];
            }
        }
        let total_variance = (0..d).map(|i| cov[i][i]).sum();
        let (values, vectors) = symmetric_eigen(&cov);
        let tol = 1e-12 * values[0].abs().max(f64::MIN_POSITIVE);
        let rank = values.iter().filter(|v| **v > tol).count();
        let k_eff = if rank < k {
            log::warn!("data has rank {rank}; keeping {rank} of {k} requested components");
            rank.max(1)
        } else {
            k
        };
        let components = vectors
            .into_iter()
            .take(k_eff)
            .map(|mut v| {
                let lead = v
                    .iter()
                    .copied()
                    .max_by(|a, b| a.abs().total_cmp(&b.abs()))
                    .unwrap_or(0.0);
                if lead < 0.0 {
                    v.iter_mut().for_each(|x| *x = -*x);
                }
                v
            })
            .collect();
        let variances = values.into_iter().take(k_eff).map(|v| v.max(0.0)).collect();
        let mut pca = Self {
            mean,
            components,
            variances,
            total_variance,
            region: None,
        };
        if k_eff >= 2 {
            let rows: Vec<ReverbFeature> = features
                .iter()
                .map(|f| ReverbFeature::new(f.clone()))
                .collect::<Result<_>>()?;
            pca.region = Some(PlaneRegion::bounding(&pca, &rows)?);
        }
        Ok(pca)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn project(&self, c: &ReverbFeature) -> Result<Vec<f64>> {
        if c.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: c.dim(),
            });
        }
        let centered: Vec<f64> = c
            .values()
            .iter()
            .zip(&self.mean)
            .map(|(x, m)| x - m)
            .collect();
        Ok(self
            .components
            .iter()
            .map(|row| dot(row, &centered))
            .collect())
    }

    pub fn lift(&self, z: &[f64]) -> Result<ReverbFeature> {
        if z.len() != self.n_components() {
            return Err(Error::DimensionMismatch {
                expected: self.n_components(),
                actual: z.len(),
            });
        }
        let mut out = self.mean.clone();
        for (row, zi) in self.components.iter().zip(z) {
            for (o, r) in out.iter_mut().zip(row) {
                *o += zi * r;
            }
        }
        ReverbFeature::new(out)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        #[derive(Serialize)]
        struct Header {
            dim: usize,
            k: usize,
            total_variance: f64,
            region: Option<PlaneRegion>,
        }
        let header = Header {
            dim: self.dim(),
            k: self.n_components(),
            total_variance: self.total_variance,
            region: self.region,
        };
        let mut payload = self.mean.clone();
        payload.extend(self.components.iter().flatten());
        payload.extend(&self.variances);
        container::encode(PCA_MAGIC, &header, &payload)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            dim: usize,
            k: usize,
            total_variance: f64,
            #[serde(default)]
            region: Option<PlaneRegion>,
        }
        let (h, payload): (Header, Vec<f64>) = container::decode("pca", PCA_MAGIC, bytes)?;
        if h.dim == 0 || payload.len() != h.dim * (h.k + 1) + h.k {
            return Err(Error::Malformed {
                kind: "pca",
                reason: format!(
                    "payload length {} does not match D={} k={}",
                    payload.len(),
                    h.dim,
                    h.k
                ),
            });
        }
        let mean = payload[..h.dim].to_vec();
        let components = payload[h.dim..h.dim * (h.k + 1)]
            .chunks(h.dim)
            .map(|c| c.to_vec())
            .collect();
        let variances = payload[h.dim * (h.k + 1)..].to_vec();
        Ok(Self {
            mean,
            components,
            variances,
            total_variance: h.total_variance,
            region: h.region,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        container::write_file(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&container::read_file(path)?)
    }
}

/// `(1 − α)·c1 + α·c2` for `α ∈ [0, 1]`. The endpoints return the inputs
/// unchanged.
pub fn interpolate(c1: &ReverbFeature, c2: &ReverbFeature, alpha: f64) -> Result<ReverbFeature> {
    if c1.dim() != c2.dim() {
        return Err(Error::DimensionMismatch {
            expected: c1.dim(),
            actual: c2.dim(),
        });
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!(
            "interpolation weight {alpha} outside [0, 1]"
        )));
    }
    if alpha == 0.0 {
        return Ok(c1.clone());
    }
    if alpha == 1.0 {
        return Ok(c2.clone());
    }
    ReverbFeature::new(
        c1.values()
            .iter()
            .zip(c2.values())
            .map(|(a, b)| (1.0 - alpha) * a + alpha * b)
            .collect(),
    )
}

/// Axis-aligned box in the first two principal coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneRegion {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl PlaneRegion {
    /// Bounding box of the projections of `features`.
    pub fn bounding(pca: &PcaModel, features: &[ReverbFeature]) -> Result<Self> {
        if pca.n_components() < 2 {
            return Err(Error::invalid("plane sampling needs at least 2 components"));
        }
        let mut region = Self {
            min: [f64::INFINITY; 2],
            max: [f64::NEG_INFINITY; 2],
        };
        for f in features {
            let z = pca.project(f)?;
            for a in 0..2 {
                region.min[a] = region.min[a].min(z[a]);
                region.max[a] = region.max[a].max(z[a]);
            }
        }
        if features.is_empty() {
            return Err(Error::invalid("no features to bound"));
        }
        Ok(region)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PlaneSampling {
    /// `n × n` regular grid including the box corners; `n = 1` gives the
    /// box centre.
    Grid {
        n: usize,
    },
    Uniform {
        count: usize,
    },
}

/// Features lifted from points of the principal plane; coordinates beyond
/// the second are zero. Returns the plane coordinates alongside.
pub fn sample_plane<R: Rng + ?Sized>(
    pca: &PcaModel,
    region: &PlaneRegion,
    sampling: PlaneSampling,
    rng: &mut R,
) -> Result<Vec<([f64; 2], ReverbFeature)>> {
    let k = pca.n_components();
    if k < 2 {
        return Err(Error::invalid("plane sampling needs at least 2 components"));
    }
    if (0..2).any(|a| !(region.min[a] <= region.max[a])) {
        return Err(Error::invalid("empty sampling region"));
    }
    let points: Vec<[f64; 2]> = match sampling {
        PlaneSampling::Grid { n } => {
            if n == 0 {
                return Err(Error::invalid("grid needs at least one point per axis"));
            }
            let coord = |a: usize, i: usize| {
                if n == 1 {
                    0.5 * (region.min[a] + region.max[a])
                } else if i == n - 1 {
                    region.max[a]
                } else {
                    region.min[a] + (region.max[a] - region.min[a]) * i as f64 / (n - 1) as f64
                }
            };
            (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .map(|(i, j)| [coord(0, i), coord(1, j)])
                .collect()
        }
        PlaneSampling::Uniform { count } => (0..count)
            .map(|_| {
                let mut p = [0.0; 2];
                for a in 0..2 {
                    p[a] = if region.min[a] == region.max[a] {
                        region.min[a]
                    } else {
                        rng.random_range(region.min[a]..region.max[a])
                    };
                }
                p
            })
            .collect(),
    };
    points
        .into_iter()
        .map(|p| {
            let mut z = vec![0.0; k];
            z[..2].copy_from_slice(&p);
            Ok((p, pca.lift(&z)?))
        })
        .collect()
}
