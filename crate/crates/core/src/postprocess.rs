//! Embedding post-processing: PCA with optional whitening, and cosine
//! similarity.
//!
//! The projection is computed by a one-sided Jacobi SVD of the mean-centered
//! data rather than an eigendecomposition of the covariance matrix. Component
//! signs are fixed by making each component's largest-magnitude entry
//! positive, so repeated fits of the same data are identical.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::vecmath::{dot, norm};

pub const PROJECTION_MAGIC: &[u8; 8] = b"LXPRJ001";

/// A fitted PCA transform.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// Mean of the fit data, length `D`.
    pub mean: Vec<f64>,
    /// `n_components` orthonormal rows of length `D`.
    pub components: Vec<Vec<f64>>,
    pub whiten: bool,
    /// Per-component standard deviations of the fit data (unbiased, `N-1`
    /// convention); divisors applied iff `whiten`. Always populated so the
    /// serialized form is self-describing.
    pub scales: Vec<f64>,
}

impl Projection {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }
}

/// Cosine similarity, clamped to `[-1, 1]` against rounding.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Argument(format!(
            "cosine needs equal lengths, got {} and {}",
            u.len(),
            v.len()
        )));
    }
    let nu = norm(u);
    let nv = norm(v);
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::UndefinedSimilarity);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Fit a PCA projection on `vectors` (N rows of length D).
///
/// With `whiten`, projected fit data has unit variance per component; a
/// component whose variance is numerically zero is reported as
/// [`Error::SingularComponent`] rather than silently producing infinities.
pub fn fit_projection(vectors: &[Vec<f64>], n_components: usize, whiten: bool) -> Result<Projection> {
    let n = vectors.len();
    if n_components == 0 {
        return Err(Error::Argument("n_components must be at least 1".into()));
    }
    if n <= n_components {
        return Err(Error::Argument(format!(
            "need more than {n_components} rows to fit {n_components} components, got {n}"
        )));
    }
    let dim = vectors[0].len();
    if n_components > dim {
        return Err(Error::Argument(format!(
            "n_components {n_components} exceeds input dimension {dim}"
        )));
    }
    if vectors.iter().any(|v| v.len() != dim) {
        return Err(Error::Argument("rows have inconsistent lengths".into()));
    }

    let mut mean = vec![0.0; dim];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }

    // Centered data as columns for the one-sided Jacobi sweep; the rotation
    // accumulator is also kept column-major.
    let mut cols: Vec<Vec<f64>> = (0..dim)
        .map(|j| vectors.iter().map(|v| v[j] - mean[j]).collect())
        .collect();
    let mut v_cols: Vec<Vec<f64>> = (0..dim)
        .map(|j| {
            let mut col = vec![0.0; dim];
            col[j] = 1.0;
            col
        })
        .collect();
    jacobi_orthogonalize(&mut cols, &mut v_cols);

    // Singular values are the column norms; right singular vectors are the
    // columns of the accumulated rotation.
    let mut order: Vec<(f64, usize)> =
        cols.iter().enumerate().map(|(j, c)| (norm(c), j)).collect();
    order.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));

    let mut components = Vec::with_capacity(n_components);
    let mut scales = Vec::with_capacity(n_components);
    for (rank, &(sigma, j)) in order.iter().take(n_components).enumerate() {
        let mut comp: Vec<f64> = v_cols[j].clone();
        // Sign convention: largest-magnitude entry positive.
        let lead = comp
            .iter()
            .cloned()
            .fold((0.0f64, 0.0f64), |acc, x| if x.abs() > acc.0 { (x.abs(), x) } else { acc })
            .1;
        if lead < 0.0 {
            for x in comp.iter_mut() {
                *x = -*x;
            }
        }
        let variance = sigma * sigma / (n as f64 - 1.0);
        if whiten && variance <= 1e-12 {
            return Err(Error::SingularComponent { component: rank, variance });
        }
        components.push(comp);
        scales.push(variance.sqrt());
    }

    Ok(Projection { mean, components, whiten, scales })
}

/// One-sided Jacobi: rotate column pairs of `cols` until mutually orthogonal,
/// accumulating the same rotations into `v_cols`.
fn jacobi_orthogonalize(cols: &mut [Vec<f64>], v_cols: &mut [Vec<f64>]) {
    let dim = cols.len();
    let eps = 1e-14;
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..dim {
            for q in (p + 1)..dim {
                let (app, aqq, apq) = {
                    let cp = &cols[p];
                    let cq = &cols[q];
                    (dot(cp, cp), dot(cq, cq), dot(cp, cq))
                };
                if apq == 0.0 || apq.abs() <= eps * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(cols, p, q, c, s);
                rotate_columns(v_cols, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
}

fn rotate_columns(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    for i in 0..cols[p].len() {
        let xp = cols[p][i];
        let xq = cols[q][i];
        cols[p][i] = c * xp - s * xq;
        cols[q][i] = s * xp + c * xq;
    }
}

/// Apply a fitted projection to one vector.
pub fn project(p: &Projection, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != p.input_dim() {
        return Err(Error::Argument(format!(
            "projection expects dimension {}, got {}",
            p.input_dim(),
            v.len()
        )));
    }
    let centered: Vec<f64> = v.iter().zip(&p.mean).map(|(x, m)| x - m).collect();
    Ok(p.components
        .iter()
        .zip(&p.scales)
        .map(|(comp, &scale)| {
            let coord = dot(comp, &centered);
            if p.whiten { coord / scale } else { coord }
        })
        .collect())
}

/// Apply a fitted projection to many vectors.
pub fn project_all(p: &Projection, vectors: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    vectors.iter().map(|v| project(p, v)).collect()
}

pub fn write_projection<W: Write>(w: &mut W, p: &Projection) -> Result<()> {
    w.write_all(PROJECTION_MAGIC)?;
    w.write_all(&(p.input_dim() as u32).to_le_bytes())?;
    w.write_all(&(p.n_components() as u32).to_le_bytes())?;
    w.write_all(&[p.whiten as u8])?;
    let write_f32s = |w: &mut W, xs: &[f64]| -> Result<()> {
        for &x in xs {
            w.write_all(&(x as f32).to_le_bytes())?;
        }
        Ok(())
    };
    write_f32s(w, &p.mean)?;
    for comp in &p.components {
        write_f32s(w, comp)?;
    }
    write_f32s(w, &p.scales)?;
    Ok(())
}

pub fn read_projection<R: Read>(r: &mut R) -> Result<Projection> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != PROJECTION_MAGIC {
        return Err(Error::Format("bad magic bytes: not a projection file".into()));
    }
    let mut buf4 = [0u8; 4];
    r.read_exact(&mut buf4)?;
    let dim = u32::from_le_bytes(buf4) as usize;
    r.read_exact(&mut buf4)?;
    let n_components = u32::from_le_bytes(buf4) as usize;
    let mut flag = [0u8; 1];
    r.read_exact(&mut flag)?;
    let whiten = flag[0] != 0;
    let read_f32s = |r: &mut R, len: usize| -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(len);
        let mut b = [0u8; 4];
        for _ in 0..len {
            r.read_exact(&mut b)?;
            out.push(f32::from_le_bytes(b) as f64);
        }
        Ok(out)
    };
    let mean = read_f32s(r, dim)?;
    let mut components = Vec::with_capacity(n_components);
    for _ in 0..n_components {
        components.push(read_f32s(r, dim)?);
    }
    let scales = read_f32s(r, n_components)?;
    Ok(Projection { mean, components, whiten, scales })
}

pub fn write_projection_file(path: &Path, p: &Projection) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_projection(&mut w, p)?;
    w.flush()?;
    Ok(())
}

pub fn read_projection_file(path: &Path) -> Result<Projection> {
    read_projection(&mut BufReader::new(File::open(path)?))
}
