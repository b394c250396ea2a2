//! Radial kernels with their operator order.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelKind {
    /// `k(x, y) = 2‖x−y‖^{-(n+2s)}`, Galerkin form `∬ (u(y)−u(x))(v(y)−v(x)) k/2`.
    FractionalLaplacian { s: f64 },
    /// `exp(−‖x−y‖/ℓ)`.
    Exponential { ell: f64 },
    /// `exp(−‖x−y‖²/(2ℓ²))`.
    Gaussian { ell: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub dim: usize,
    /// Operator order `2q` used by the compression rule.
    pub order2q: f64,
    pub singular_diagonal: bool,
    /// Decay constants `c_{0}` and `c_{1}` for `|α|+|β| = 0` and `1`.
    pub calibration: [f64; 2],
}

fn check_dim(n: usize) -> Result<()> {
    if n == 1 || n == 2 {
        Ok(())
    } else {
        Err(Error::Parameter {
            name: "dimension",
            value: n as f64,
            constraint: "n ∈ {1, 2}".into(),
        })
    }
}

pub fn fractional_laplacian_kernel(s: f64, n: usize) -> Result<KernelSpec> {
    check_dim(n)?;
    if !(s > 0.0 && s < 0.5) {
        return Err(Error::Parameter {
            name: "kernel.s",
            value: s,
            constraint: "0 < s < 1/2".into(),
        });
    }
    Ok(KernelSpec::new(KernelKind::FractionalLaplacian { s }, n, 2.0 * s, true))
}

fn check_ell(ell: f64) -> Result<()> {
    if ell > 0.0 && ell.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter {
            name: "kernel.correlation_length",
            value: ell,
            constraint: "ℓ > 0".into(),
        })
    }
}

pub fn exponential_covariance_kernel(ell: f64, n: usize) -> Result<KernelSpec> {
    check_dim(n)?;
    check_ell(ell)?;
    Ok(KernelSpec::new(
        KernelKind::Exponential { ell },
        n,
        -(n as f64 + 1.0),
        false,
    ))
}

pub fn gaussian_covariance_kernel(ell: f64, n: usize) -> Result<KernelSpec> {
    check_dim(n)?;
    check_ell(ell)?;
    Ok(KernelSpec::new(
        KernelKind::Gaussian { ell },
        n,
        -(n as f64 + 1.0),
        false,
    ))
}

/// Log-spaced distances over three decades ending at 1.
pub fn decay_grid(points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| 10f64.powf(-3.0 + 3.0 * i as f64 / (points - 1) as f64))
        .collect()
}

impl KernelSpec {
    fn new(kind: KernelKind, dim: usize, order2q: f64, singular_diagonal: bool) -> Self {
        let mut k = KernelSpec {
            kind,
            dim,
            order2q,
            singular_diagonal,
            calibration: [0.0; 2],
        };
        k.calibration = k.fit_decay_constants(&decay_grid(61));
        k
    }

    /// Replaces the order used by the compression rule and refits the constants.
    pub fn with_order2q(mut self, order2q: f64) -> Self {
        self.order2q = order2q;
        self.calibration = self.fit_decay_constants(&decay_grid(61));
        self
    }

    /// Kernel as a function of the distance.
    pub fn radial(&self, r: f64) -> f64 {
        match self.kind {
            KernelKind::FractionalLaplacian { s } => 2.0 * r.powf(-(self.dim as f64 + 2.0 * s)),
            KernelKind::Exponential { ell } => (-r / ell).exp(),
            KernelKind::Gaussian { ell } => (-0.5 * (r / ell).powi(2)).exp(),
        }
    }

    pub fn evaluate(&self, x: &[f64], y: &[f64]) -> f64 {
        let r = x
            .iter()
            .zip(y)
            .take(self.dim)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        self.radial(r)
    }

    /// Exponent `σ` of the diagonal singularity `r^{-σ}`; zero for bounded kernels.
    pub fn singularity(&self) -> f64 {
        match self.kind {
            KernelKind::FractionalLaplacian { s } => self.dim as f64 + 2.0 * s,
            _ => 0.0,
        }
    }

    /// Length over which a bounded kernel varies appreciably.
    pub fn length_scale(&self) -> Option<f64> {
        match self.kind {
            KernelKind::FractionalLaplacian { .. } => None,
            KernelKind::Exponential { ell } | KernelKind::Gaussian { ell } => Some(ell),
        }
    }

    pub fn is_fractional_laplacian(&self) -> bool {
        matches!(self.kind, KernelKind::FractionalLaplacian { .. })
    }

    /// Decay exponent `n + 2q`.
    pub fn decay_exponent(&self) -> f64 {
        self.dim as f64 + self.order2q
    }

    /// Central finite difference of the kernel along one coordinate of `x`.
    fn derivative(&self, r: f64) -> f64 {
        let h = 1e-6 * r;
        (self.radial(r + h) - self.radial(r - h)) / (2.0 * h)
    }

    /// Measured `|∂^α_x ∂^β_y k| · r^{n+2q+|α|+|β|}` for `|α|+|β| ∈ {0, 1}`.
    pub fn decay_ratios(&self, r: f64) -> [f64; 2] {
        let e = self.decay_exponent();
        [
            self.radial(r).abs() * r.powf(e),
            self.derivative(r).abs() * r.powf(e + 1.0),
        ]
    }

    fn fit_decay_constants(&self, grid: &[f64]) -> [f64; 2] {
        let mut c = [0.0f64; 2];
        for &r in grid {
            let q = self.decay_ratios(r);
            c[0] = c[0].max(q[0]);
            c[1] = c[1].max(q[1]);
        }
        c
    }
}
