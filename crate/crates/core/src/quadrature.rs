//! Integrals of radial kernels over pairs of axis-aligned boxes.
//!
//! `∫_A ∫_B κ(‖x−y‖) dy dx` is rewritten as `∫ κ(‖z‖) Π_d T_d(z_d) dz` with
//! `z = y − x`, where `T_d` is the piecewise-linear overlap length of the
//! one-dimensional factors. Splitting every axis at the kinks of `T_d` and at
//! zero leaves sub-boxes on which the integrand is the kernel times a
//! polynomial, with any singularity sitting in a corner. Corner squares use
//! Duffy coordinates with a power substitution in the radial variable; all
//! other sub-boxes are refined towards the origin until they are well
//! separated and then integrated by tensor Gauss–Legendre rules.

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::meshgeom::Aabb;

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, t);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = t;
            }
            dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
            let dt = p1 / dp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        x[i] = 0.5 * (1.0 - t);
        w[i] = 1.0 / ((1.0 - t * t) * dp * dp);
    }
    (x, w)
}

/// Integrator for one kernel; rules are precomputed.
#[derive(Clone, Debug)]
pub struct BoxPairIntegrator {
    kernel: KernelSpec,
    regular: (Vec<f64>, Vec<f64>),
    radial: (Vec<f64>, Vec<f64>),
    angular: (Vec<f64>, Vec<f64>),
    power: f64,
    separation: f64,
}

#[derive(Clone, Copy, Debug)]
struct SubBox {
    lo: [f64; 2],
    hi: [f64; 2],
}

impl BoxPairIntegrator {
    pub fn new(kernel: &KernelSpec) -> Self {
        let sigma = kernel.singularity();
        let n = kernel.dim as f64;
        let power = if sigma == 0.0 {
            1.0
        } else {
            let frac = (n - sigma).rem_euclid(1.0);
            if frac < 1e-12 {
                1.0
            } else {
                (1.0 / frac).min(8.0)
            }
        };
        BoxPairIntegrator {
            kernel: kernel.clone(),
            regular: gauss_legendre(12),
            radial: gauss_legendre(16),
            angular: gauss_legendre(20),
            power,
            separation: 1.0,
        }
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    /// `∫_A ∫_B k(‖x−y‖) dy dx`. Boxes may overlap only for bounded kernels.
    pub fn integrate(&self, a: &Aabb, b: &Aabb) -> Result<f64> {
        let dim = self.kernel.dim;
        let mut cuts: Vec<Vec<f64>> = Vec::with_capacity(dim);
        for d in 0..dim {
            let mut c = vec![
                b.lo[d] - a.hi[d],
                b.lo[d] - a.lo[d],
                b.hi[d] - a.hi[d],
                b.hi[d] - a.lo[d],
            ];
            let (zlo, zhi) = (c[0], c[3]);
            if zlo < 0.0 && 0.0 < zhi {
                c.push(0.0);
            }
            c.sort_by(|x, y| x.partial_cmp(y).unwrap());
            c.dedup();
            cuts.push(c);
        }
        let overlap = |d: usize, z: f64| -> f64 {
            (a.hi[d].min(b.hi[d] - z) - a.lo[d].max(b.lo[d] - z)).max(0.0)
        };
        let mut total = 0.0;
        let n1 = if dim == 2 { cuts[1].len() - 1 } else { 1 };
        for i in 0..cuts[0].len() - 1 {
            for j in 0..n1 {
                let mut lo = [cuts[0][i], 0.0];
                let mut hi = [cuts[0][i + 1], 0.0];
                if dim == 2 {
                    lo[1] = cuts[1][j];
                    hi[1] = cuts[1][j + 1];
                }
                if (0..dim).any(|d| hi[d] <= lo[d]) {
                    continue;
                }
                // overlap factors are linear on the sub-box; parametrize each
                // from the endpoint nearer the origin to avoid cancellation
                let mut start = [0.0; 2];
                let mut len = [0.0; 2];
                let mut t0 = [1.0; 2];
                let mut slope = [0.0; 2];
                for d in 0..dim {
                    let (near, far) = if hi[d] <= 0.0 { (hi[d], lo[d]) } else { (lo[d], hi[d]) };
                    start[d] = near.abs();
                    len[d] = hi[d] - lo[d];
                    t0[d] = overlap(d, near);
                    slope[d] = (overlap(d, far) - t0[d]) / len[d];
                }
                let g = |w: [f64; 2]| -> f64 {
                    let mut t = 1.0;
                    let mut r2 = 0.0;
                    for d in 0..dim {
                        t *= t0[d] + slope[d] * w[d];
                        let z = start[d] + w[d];
                        r2 += z * z;
                    }
                    if t <= 0.0 {
                        0.0
                    } else {
                        t * self.kernel.radial(r2.sqrt())
                    }
                };
                let corner = (0..dim).all(|d| start[d] == 0.0);
                total += if corner {
                    self.corner(len, &g)?
                } else {
                    let sb = SubBox {
                        lo: [0.0; 2],
                        hi: len,
                    };
                    self.adaptive(sb, start, &g)?
                };
            }
        }
        Ok(total)
    }

    /// Sub-box `[0, len]` in coordinates measured from the singular corner.
    fn corner(&self, len: [f64; 2], g: &dyn Fn([f64; 2]) -> f64) -> Result<f64> {
        let dim = self.kernel.dim;
        let mut m = len[..dim].iter().cloned().fold(f64::INFINITY, f64::min);
        if let Some(ell) = self.kernel.length_scale() {
            m = m.min(ell);
        }
        let p = self.power;
        let (tx, tw) = &self.radial;
        let mut total = 0.0;
        if dim == 1 {
            for (&t, &wt) in tx.iter().zip(tw) {
                let u = t.powf(p);
                let jac = m * p * t.powf(p - 1.0);
                total += wt * jac * g([m * u, 0.0]);
            }
            if len[0] > m {
                total += self.adaptive(
                    SubBox {
                        lo: [m, 0.0],
                        hi: [len[0], 0.0],
                    },
                    [0.0; 2],
                    g,
                )?;
            }
            return Ok(total);
        }
        let (vx, vw) = &self.angular;
        for (&t, &wt) in tx.iter().zip(tw) {
            let u = t.powf(p);
            let ju = m * m * u * p * t.powf(p - 1.0);
            for (&v, &wv) in vx.iter().zip(vw) {
                let lo = g([m * u, m * u * v]);
                let hi = g([m * u * v, m * u]);
                total += wt * wv * ju * (lo + hi);
            }
        }
        // remainder of the sub-box outside the corner square
        let rest = [
            SubBox {
                lo: [m, 0.0],
                hi: [len[0], len[1]],
            },
            SubBox {
                lo: [0.0, m],
                hi: [m, len[1]],
            },
        ];
        for r in rest {
            if r.hi[0] > r.lo[0] && r.hi[1] > r.lo[1] {
                total += self.adaptive(r, [0.0; 2], g)?;
            }
        }
        Ok(total)
    }

    /// Refines towards the origin until each piece is well separated.
    /// `offset` is the distance of the local origin from the singular point
    /// along each axis.
    fn adaptive(&self, sb: SubBox, offset: [f64; 2], f: &dyn Fn([f64; 2]) -> f64) -> Result<f64> {
        let dim = self.kernel.dim;
        let scale = self.kernel.length_scale().unwrap_or(f64::INFINITY);
        let diam0 = diameter(&sb, dim);
        let (gx, gw) = &self.regular;
        let mut total = 0.0;
        let mut stack = vec![sb];
        while let Some(b) = stack.pop() {
            let diam = diameter(&b, dim);
            let dist = origin_distance(&b, offset, dim);
            if dist >= self.separation * diam && diam <= 2.0 * scale {
                let mut s = 0.0;
                let w0 = b.hi[0] - b.lo[0];
                if dim == 1 {
                    for (&x, &w) in gx.iter().zip(gw) {
                        s += w * f([b.lo[0] + w0 * x, 0.0]);
                    }
                    total += s * w0;
                } else {
                    let w1 = b.hi[1] - b.lo[1];
                    for (&x, &wx) in gx.iter().zip(gw) {
                        for (&y, &wy) in gx.iter().zip(gw) {
                            s += wx * wy * f([b.lo[0] + w0 * x, b.lo[1] + w1 * y]);
                        }
                    }
                    total += s * w0 * w1;
                }
                continue;
            }
            if dist == 0.0 || diam < 1e-13 * diam0 {
                return Err(Error::Quadrature(format!(
                    "sub-box [{:?}, {:?}] touches the singularity",
                    b.lo, b.hi
                )));
            }
            let widths: Vec<f64> = (0..dim).map(|d| b.hi[d] - b.lo[d]).collect();
            let wmax = widths.iter().cloned().fold(0.0, f64::max);
            let mut parts = vec![b];
            for d in 0..dim {
                if widths[d] >= 0.5 * wmax {
                    let mid = 0.5 * (b.lo[d] + b.hi[d]);
                    parts = parts
                        .into_iter()
                        .flat_map(|p| {
                            let mut l = p;
                            let mut r = p;
                            l.hi[d] = mid;
                            r.lo[d] = mid;
                            [l, r]
                        })
                        .collect();
                }
            }
            stack.extend(parts);
        }
        Ok(total)
    }
}

fn diameter(b: &SubBox, dim: usize) -> f64 {
    (0..dim)
        .map(|d| (b.hi[d] - b.lo[d]).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn origin_distance(b: &SubBox, offset: [f64; 2], dim: usize) -> f64 {
    (0..dim)
        .map(|d| {
            let g = offset[d] + b.lo[d];
            g * g
        })
        .sum::<f64>()
        .sqrt()
}

/// `∫_A ∫_B |x−y|^{-(1+2s)} dy dx` for disjoint intervals, in closed form.
pub fn fractional_interval_pair(s: f64, a: (f64, f64), b: (f64, f64)) -> f64 {
    let (a, b) = if a.0 <= b.0 { (a, b) } else { (b, a) };
    let g = |t: f64| t.powf(1.0 - 2.0 * s) / (-2.0 * s * (1.0 - 2.0 * s));
    g(b.0 - a.1) - g(b.1 - a.1) - g(b.0 - a.0) + g(b.1 - a.0)
}
