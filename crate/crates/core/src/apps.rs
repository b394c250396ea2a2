//! θ-scheme heat driver and Gaussian random-field sampler, with dense oracles.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::compress::SparsityPattern;
use crate::error::{Error, Result};
use crate::factor::{cholesky, FactorBundle};
use crate::meshgeom::CellTree;
use crate::ordering::{nested_dissection, sparsity_graph};
use crate::quadrature::gauss_legendre;
use crate::sparse::SparseMatrix;
use crate::wavelet::WaveletBasis;

/// Gaussian spot of height 100 circling the origin once per unit time.
pub fn heat_source(x: [f64; 2], t: f64) -> f64 {
    let (s, c) = (2.0 * std::f64::consts::PI * t).sin_cos();
    100.0 * (-40.0 * (x[0] - c).powi(2) - 40.0 * (x[1] - s).powi(2)).exp()
}

/// Cell means of `f` over the leaves by tensor Gauss rules of `order` points.
pub fn leaf_means(tree: &CellTree, order: usize, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
    let (gx, gw) = gauss_legendre(order);
    let dim = tree.dim();
    tree.leaves()
        .iter()
        .map(|&leaf| {
            let b = tree.cell_box(leaf);
            let mut acc = 0.0;
            if dim == 1 {
                for (x, w) in gx.iter().zip(&gw) {
                    acc += w * f([b.lo[0] + x * (b.hi[0] - b.lo[0]), 0.0]);
                }
            } else {
                for (x, wx) in gx.iter().zip(&gw) {
                    for (y, wy) in gx.iter().zip(&gw) {
                        let p = [b.lo[0] + x * (b.hi[0] - b.lo[0]), b.lo[1] + y * (b.hi[1] - b.lo[1])];
                        acc += wx * wy * f(p);
                    }
                }
            }
            acc
        })
        .collect()
}

/// Load vector `[(f, ψ_λ)]` of the leaf-mean projection of `f`.
pub fn load_vector(basis: &WaveletBasis, f: impl Fn([f64; 2]) -> f64) -> Result<Vec<f64>> {
    basis.forward_transform(&leaf_means(basis.tree(), 4, f))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThetaSchemeConfig {
    pub theta: f64,
    pub t_end: f64,
    pub steps: usize,
}

impl Default for ThetaSchemeConfig {
    fn default() -> Self {
        ThetaSchemeConfig {
            theta: 0.5,
            t_end: 3.0,
            steps: 150,
        }
    }
}

impl ThetaSchemeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::Parameter {
                name: "driver.theta",
                value: self.theta,
                constraint: "0 <= theta <= 1".into(),
            });
        }
        if self.steps == 0 {
            return Err(Error::Parameter {
                name: "driver.steps",
                value: 0.0,
                constraint: "steps >= 1".into(),
            });
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Parameter {
                name: "driver.t_end",
                value: self.t_end,
                constraint: "t_end > 0".into(),
            });
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t_end * i as f64 / self.steps as f64
    }
}

/// `A = G + θΔt S`.
pub fn theta_system_matrix(cfg: &ThetaSchemeConfig, g: &SparseMatrix, s: &SparseMatrix) -> Result<SparseMatrix> {
    Ok(g.add_scaled(1.0, s, cfg.theta * cfg.dt())?.with_symmetric(g.is_symmetric_flag() && s.is_symmetric_flag()))
}

/// Steps `G u' + S u = f` with a factorization of `G + θΔt S`; returns all
/// `M + 1` coefficient vectors.
pub fn run_theta_scheme(
    cfg: &ThetaSchemeConfig,
    g: &SparseMatrix,
    s: &SparseMatrix,
    factor: &FactorBundle,
    u0: &[f64],
    mut load: impl FnMut(f64) -> Result<Vec<f64>>,
) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let dt = cfg.dt();
    let th = cfg.theta;
    let mut out = Vec::with_capacity(cfg.steps + 1);
    out.push(u0.to_vec());
    let mut f_prev = load(0.0)?;
    for i in 0..cfg.steps {
        let f_next = load(cfg.time(i + 1))?;
        let u = &out[i];
        let gu = g.matvec(u)?;
        let su = s.matvec(u)?;
        let rhs: Vec<f64> = (0..u.len())
            .map(|k| gu[k] - (1.0 - th) * dt * su[k] + dt * ((1.0 - th) * f_prev[k] + th * f_next[k]))
            .collect();
        out.push(factor.solve(&rhs)?);
        f_prev = f_next;
    }
    Ok(out)
}

/// Dense reference stepping with an LU of `G + θΔt S`.
pub fn run_theta_scheme_dense(
    cfg: &ThetaSchemeConfig,
    g: &DMatrix<f64>,
    s: &DMatrix<f64>,
    u0: &[f64],
    mut load: impl FnMut(f64) -> Result<Vec<f64>>,
) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let dt = cfg.dt();
    let th = cfg.theta;
    let lu = (g + s * (th * dt)).lu();
    let explicit = g - s * ((1.0 - th) * dt);
    let mut out = vec![u0.to_vec()];
    let mut f_prev = DVector::from_vec(load(0.0)?);
    for i in 0..cfg.steps {
        let f_next = DVector::from_vec(load(cfg.time(i + 1))?);
        let u = DVector::from_column_slice(&out[i]);
        let rhs = &explicit * u + (&f_prev * (1.0 - th) + &f_next * th) * dt;
        let x = lu
            .solve(&rhs)
            .ok_or_else(|| Error::Invalid("dense theta system is singular".into()))?;
        out.push(x.as_slice().to_vec());
        f_prev = f_next;
    }
    Ok(out)
}

/// Nested-dissection ordering of the pattern of `a` followed by Cholesky.
/// Without a basis the graph vertices are bisected by index.
pub fn factor_with_nested_dissection(a: &SparseMatrix, leaf_size: usize, basis: Option<&WaveletBasis>) -> Result<FactorBundle> {
    let mut graph = sparsity_graph(&SparsityPattern::from_matrix(a));
    if let Some(b) = basis {
        graph = graph.with_basis(b);
    }
    let (perm, _) = nested_dissection(&graph, leaf_size)?;
    cholesky(a, &perm)
}

/// Unit-interval uniform from 53 random bits, never 0 or 1.
fn uniform(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard normals of sample `stream`: ChaCha20 seeded with `seed`, one
/// 64-bit word per variate, mapped through the inverse normal CDF.
pub fn standard_normals(seed: u64, stream: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    (0..n).map(|_| normal.inverse_cdf(uniform(rng.next_u64()))).collect()
}

/// Failed Cholesky of a compressed covariance.
pub fn covariance_error(column: usize, pivot: f64) -> Error {
    Error::Invalid(format!(
        "covariance is not numerically positive definite (pivot {pivot:e} at column {column}); \
         analytic kernels such as the Gaussian are not supported by the Cholesky sampler"
    ))
}

/// Compressed covariance `C^G`, mean coefficients `ā^G` and the two factors
/// used by `a = G⁻¹(ā^G + L x)`.
#[derive(Clone, Debug)]
pub struct FieldModel {
    pub covariance: SparseMatrix,
    pub mass: SparseMatrix,
    pub mean: Vec<f64>,
    /// `None` for a zero covariance.
    pub chol_c: Option<FactorBundle>,
    pub chol_g: FactorBundle,
    pub seed: u64,
}

impl FieldModel {
    /// Orders and factorizes `C^G` and `G` independently.
    pub fn new(
        covariance: SparseMatrix,
        mass: SparseMatrix,
        mean: Vec<f64>,
        basis: Option<&WaveletBasis>,
        leaf_size: usize,
        seed: u64,
    ) -> Result<Self> {
        let n = covariance.ncols();
        if mean.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: mean.len(),
            });
        }
        let chol_c = if covariance.nnz() == 0 {
            None
        } else {
            Some(factor_with_nested_dissection(&covariance, leaf_size, basis).map_err(|e| match e {
                Error::NotPositiveDefinite { column, pivot } => covariance_error(column, pivot),
                other => other,
            })?)
        };
        let chol_g = factor_with_nested_dissection(&mass, leaf_size, basis)?;
        Ok(FieldModel {
            covariance,
            mass,
            mean,
            chol_c,
            chol_g,
            seed,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Sample number `index`; its normals come from stream `index`.
    pub fn sample(&self, index: u64) -> Result<Vec<f64>> {
        let n = self.dim();
        let mut y = self.mean.clone();
        if let Some(f) = &self.chol_c {
            let x = standard_normals(self.seed, index, n);
            // C = Pᵀ L Lᵀ P, so Pᵀ L x has covariance C
            let lx = f.l.matvec(&x)?;
            for (yi, v) in y.iter_mut().zip(f.perm.apply_inverse(&lx)) {
                *yi += v;
            }
        }
        self.chol_g.solve(&y)
    }
}

pub fn sample_field(model: &FieldModel, count: usize) -> Result<Vec<Vec<f64>>> {
    (0..count as u64).map(|i| model.sample(i)).collect()
}

/// Top `m` eigenpairs of a dense symmetric matrix, descending.
pub fn kl_reference(c: &DMatrix<f64>, m: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = c.nrows();
    if m > n {
        return Err(Error::Parameter {
            name: "modes",
            value: m as f64,
            constraint: format!("modes <= {n}"),
        });
    }
    let eig = SymmetricEigen::new(c.clone());
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = idx[..m].iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, m, |r, k| eig.eigenvectors[(r, idx[k])]);
    Ok((values, vectors))
}

/// Eigendecomposition sampler `G⁻¹(ā^G + Σ √μ_k x_k a_k)`; negative
/// eigenvalues from compression are clipped to zero.
pub fn sample_field_kl(model: &FieldModel, seed: u64, count: usize) -> Result<Vec<Vec<f64>>> {
    let n = model.dim();
    let (mu, a) = kl_reference(&model.covariance.to_dense(), n)?;
    let scaled = DMatrix::from_fn(n, n, |r, k| a[(r, k)] * mu[k].max(0.0).sqrt());
    (0..count as u64)
        .map(|i| {
            let x = DVector::from_vec(standard_normals(seed, i, n));
            let y = &scaled * x + DVector::from_column_slice(&model.mean);
            model.chol_g.solve(y.as_slice())
        })
        .collect()
}

pub fn empirical_mean(samples: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = samples.first().ok_or_else(|| Error::Invalid("no samples".into()))?;
    let mut m = vec![0.0; first.len()];
    for s in samples {
        for (a, b) in m.iter_mut().zip(s) {
            *a += b;
        }
    }
    let k = samples.len() as f64;
    Ok(m.into_iter().map(|v| v / k).collect())
}

/// Unbiased sample covariance.
pub fn empirical_covariance(samples: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if samples.len() < 2 {
        return Err(Error::Invalid(format!(
            "empirical covariance needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    let n = samples[0].len();
    let mean = empirical_mean(samples)?;
    let x = DMatrix::from_fn(n, samples.len(), |r, c| samples[c][r] - mean[r]);
    Ok(&x * x.transpose() / (samples.len() - 1) as f64)
}

/// Same samples written as leaf values.
pub fn leaf_values(basis: &WaveletBasis, coefficients: &[f64]) -> Result<Vec<f64>> {
    basis.inverse_transform(coefficients)
}

/// `x,y,value` rows for each leaf cell centre.
pub fn leaf_csv(tree: &CellTree, values: &[f64]) -> String {
    let mut s = String::from("x,y,value\n");
    for (c, v) in tree.leaf_centers().iter().zip(values) {
        s.push_str(&format!("{:e},{:e},{:e}\n", c[0], c[1], v));
    }
    s
}
