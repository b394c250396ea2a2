//! Acceptance criteria 1 to 10. Runs without the libtest harness so that each
//! criterion prints exactly one PASS/FAIL line; exits nonzero if any fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wavedirect::apps::{
    empirical_covariance, empirical_mean, factor_with_nested_dissection, heat_source, load_vector,
    run_theta_scheme, run_theta_scheme_dense, sample_field, sample_field_kl, theta_system_matrix, FieldModel,
    ThetaSchemeConfig,
};
use wavedirect::compress::{
    assemble_compressed, assemble_dense, compression_pattern, decay_bound, decay_report, support_distance,
    CompressionParams, DecayRow, SparsityPattern,
};
use wavedirect::factor::{
    lu, numeric_cholesky, reconstruction_error, symbolic_cholesky, symbolic_counts, FactorBundle,
};
use wavedirect::kernels::{exponential_covariance_kernel, fractional_laplacian_kernel};
use wavedirect::meshgeom::{build_dyadic_hierarchy, DomainSpec};
use wavedirect::ordering::{fill_in_oracle, nested_dissection, sparsity_graph, Permutation, SparsityGraph};
use wavedirect::sparse::SparseMatrix;
use wavedirect::wavelet::{build_basis, mass_matrix, monomial_exponents, WaveletBasis};

type Check = std::result::Result<String, String>;

fn basis(domain: &DomainSpec, j: u32, dt: usize) -> WaveletBasis {
    build_basis(build_dyadic_hierarchy(domain, j).unwrap(), dt).unwrap()
}

fn heat_basis(j: u32) -> WaveletBasis {
    basis(&DomainSpec::centered_square(2.5), j, 2)
}

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    d / b.iter().map(|y| y * y).sum::<f64>().sqrt()
}

fn ensure(ok: bool, msg: String) -> Check {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Moments `∫ ψ x^α` in coordinates where the root cell is the unit box and
/// `ψ` is normalized in that measure.
fn max_moment(b: &WaveletBasis) -> f64 {
    let tree = b.tree();
    let n = tree.dim();
    let unit = (1u64 << tree.max_level()) as f64;
    let exps = monomial_exponents(n, b.vanishing_moments());
    let h = 1.0 / unit;
    let scale = h.powf(-0.5 * n as f64);
    let mono = |lo: f64, hi: f64, a: u32| (hi.powi(a as i32 + 1) - lo.powi(a as i32 + 1)) / (a as f64 + 1.0);
    let mut worst = 0.0f64;
    for i in 0..b.len() {
        if b.index(i).level == 0 {
            continue;
        }
        let range = tree.cell(b.index(i).support).leaf_range.clone();
        let coeffs = b.coefficients(i);
        for e in &exps {
            let mut m = 0.0;
            for (c, leaf) in coeffs.iter().zip(&tree.leaves()[range.clone()]) {
                let g = tree.grid_box(*leaf);
                let mut v = 1.0;
                for d in 0..n {
                    v *= mono(g.lo[d] as f64 / unit, g.hi[d] as f64 / unit, e[d]);
                }
                m += c * scale * v;
            }
            worst = worst.max(m.abs());
        }
    }
    worst
}

fn criterion_1() -> Check {
    let mut moment = 0.0f64;
    let mut gram = 0.0f64;
    for (dom, j, dt) in [
        (DomainSpec::interval(1.0), 8, 1),
        (DomainSpec::interval(1.0), 8, 3),
        (DomainSpec::centered_square(2.5), 4, 2),
        (DomainSpec::square(4.0), 4, 3),
    ] {
        let b = basis(&dom, j, dt);
        assert!(b.len() <= 256);
        moment = moment.max(max_moment(&b));
        let g = b.gram_matrix(0.0).to_dense();
        gram = gram.max((g - DMatrix::<f64>::identity(b.len(), b.len())).amax());
    }
    let mut roundtrip = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (dom, j, dt) in [(DomainSpec::interval(1.0), 12, 2), (DomainSpec::centered_square(2.5), 6, 2)] {
        let b = basis(&dom, j, dt);
        assert_eq!(b.len(), 4096);
        let v: Vec<f64> = (0..b.len()).map(|_| rng.next_u32() as f64 / u32::MAX as f64 - 0.5).collect();
        let back = b.inverse_transform(&b.forward_transform(&v).unwrap()).unwrap();
        let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let err = v.iter().zip(&back).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        roundtrip = roundtrip.max(err / vmax);
    }
    ensure(
        moment <= 1e-12 && gram <= 1e-12 && roundtrip <= 1e-13,
        format!("moments {moment:.1e} <= 1e-12, |Gram - I| {gram:.1e} <= 1e-12, roundtrip {roundtrip:.1e} <= 1e-13"),
    )
}

/// Retained pairs by the three-case rule, evaluated from cell indices.
fn brute_force_pattern(b: &WaveletBasis, a: f64, delta: f64, dt: f64, q: f64) -> Vec<Vec<usize>> {
    let tree = b.tree();
    let big_j = tree.max_level() as f64;
    let interval = |i: usize| {
        let c = tree.cell(b.index(i).support);
        let w = 0.5f64.powi(c.level as i32);
        (c.index[0] as f64 * w, (c.index[0] + 1) as f64 * w)
    };
    let dist = |x: (f64, f64), y: (f64, f64)| (x.0 - y.1).max(y.0 - x.1).max(0.0);
    let cut = |j: f64, j2: f64| {
        let b1 = a * f64::max(
            2f64.powf(-j.min(j2)),
            2f64.powf((2.0 * big_j * (delta - q) - (j + j2) * (delta + dt)) / (2.0 * (dt + q))),
        );
        let bs = a * f64::max(
            2f64.powf(-j.max(j2)),
            2f64.powf((2.0 * big_j * (delta - q) - (j + j2) * delta - j.max(j2) * dt) / (dt + 2.0 * q)),
        );
        (b1, bs)
    };
    let n = b.len();
    let mut cols = vec![Vec::new(); n];
    for (lp, col) in cols.iter_mut().enumerate() {
        for l in 0..n {
            let (j, j2) = (b.index(l).level, b.index(lp).level);
            let (d_l, d_lp) = (interval(l), interval(lp));
            let dd = dist(d_l, d_lp);
            let (bb, bs) = cut(j as f64, j2 as f64);
            let case1 = dd > bb && j > 0 && j2 > 0;
            // singular support taken as the support itself, so both orientations test dd
            let near = dd <= 2f64.powi(-(j.min(j2) as i32));
            let case2 = near && j != j2 && dd > bs;
            if !(case1 || case2) {
                col.push(l);
            }
        }
    }
    cols
}

fn criterion_2() -> Check {
    let b = basis(&DomainSpec::interval(1.0), 10, 1);
    let p = CompressionParams::new(1.25, 1, 1, 1.25, 0.375, 10).map_err(|e| e.to_string())?;
    let pat = compression_pattern(&b, &p);
    let oracle = brute_force_pattern(&b, 1.25, 1.25, 1.0, 0.375);
    let mismatched = (0..b.len()).filter(|&j| pat.cols[j] != oracle[j]).count();
    ensure(
        mismatched == 0,
        format!("N = {}, nnz {} vs brute force {}, mismatched columns {mismatched}", b.len(), pat.nnz(),
            oracle.iter().map(Vec::len).sum::<usize>()),
    )
}

fn criterion_3() -> Check {
    let b = basis(&DomainSpec::interval(1.0), 9, 1);
    let k = fractional_laplacian_kernel(0.375, 1).unwrap();
    let a = assemble_dense(&k, &b).map_err(|e| e.to_string())?;
    let tree = b.tree();
    let mut rows = Vec::new();
    for l in 0..b.len() {
        for lp in 0..b.len() {
            let (il, ilp) = (b.index(l), b.index(lp));
            // the estimate concerns wavelets with disjoint supports
            if il.level == 0 || ilp.level == 0 {
                continue;
            }
            let dist = support_distance(tree, il.support, ilp.support);
            if dist <= 0.0 {
                continue;
            }
            rows.push(DecayRow {
                lambda: l,
                lambda2: lp,
                entry: a[(l, lp)],
                bound: decay_bound(&b, &k, il.level, ilp.level, dist),
            });
        }
    }
    let report = decay_report(&b, rows);
    // largest |entry| / bound per finer level of the pair, to show whether the
    // constant saturates even where the coarse-level fit is exceeded
    let mut by_level = vec![0.0f64; tree.max_level() as usize + 1];
    for r in &report.rows {
        let j = b.index(r.lambda).level.max(b.index(r.lambda2).level) as usize;
        by_level[j] = by_level[j].max(r.entry.abs() / r.bound);
    }
    let top = by_level.len() - 1;
    ensure(
        report.violations == 0 && report.max_violation_ratio <= 1.0,
        format!(
            "{} pairs, fitted constant {:.3e}, max ratio {:.3}, violations {}; |entry|/bound on the two finest levels {:.3}, {:.3}",
            report.rows.len(),
            report.fitted_constant,
            report.max_violation_ratio,
            report.violations,
            by_level[top - 1],
            by_level[top]
        ),
    )
}

fn criterion_4() -> Check {
    let b = basis(&DomainSpec::interval(1.0), 10, 1);
    let n = b.len();
    let k = fractional_laplacian_kernel(0.375, 1).unwrap();
    let p = CompressionParams::defaults(&b, &k).map_err(|e| e.to_string())?;
    let s = assemble_compressed(&k, &b, &p).map_err(|e| e.to_string())?;
    let a = s.add_scaled(1.0, &mass_matrix(&b), 1.0).unwrap().with_symmetric(true);
    let f = load_vector(&b, |x| (2.0 * std::f64::consts::PI * x[0]).sin() + x[0] * x[0]).unwrap();
    let u = factor_with_nested_dissection(&a, 32, Some(&b)).map_err(|e| e.to_string())?.solve(&f).unwrap();
    let dense = assemble_dense(&k, &b).map_err(|e| e.to_string())? + DMatrix::<f64>::identity(n, n);
    let ud = dense
        .cholesky()
        .ok_or("dense matrix not positive definite")?
        .solve(&DVector::from_vec(f));
    let err = rel_l2(&u, ud.as_slice());
    let fill = s.nnz() as f64 / (n * n) as f64;
    ensure(
        err <= 0.01 && fill <= 0.25,
        format!("relative l2 difference {err:.2e} <= 1e-2, nnz/N^2 = {fill:.3} <= 0.25"),
    )
}

fn heat_pattern(j: u32) -> (WaveletBasis, SparsityPattern) {
    let b = heat_basis(j);
    let k = fractional_laplacian_kernel(0.375, 2).unwrap();
    let p = CompressionParams::defaults(&b, &k).unwrap();
    let pat = compression_pattern(&b, &p);
    (b, pat)
}

fn criterion_5() -> Check {
    let anz: Vec<f64> = (5..=7).map(|j| heat_pattern(j).1.anz()).collect();
    let r1 = anz[1] / anz[0];
    let r2 = anz[2] / anz[1];
    // the pattern fixes nnz(A_J); check it against an assembled matrix once
    let (b, pat) = heat_pattern(5);
    let k = fractional_laplacian_kernel(0.375, 2).unwrap();
    let s = assemble_compressed(&k, &b, &CompressionParams::defaults(&b, &k).unwrap()).map_err(|e| e.to_string())?;
    let cfg = ThetaSchemeConfig::default();
    let a = theta_system_matrix(&cfg, &mass_matrix(&b), &s).unwrap();
    let assembled_ok = SparsityPattern::from_matrix(&a).cols.iter().zip(&pat.cols).all(|(x, y)| x.iter().all(|i| y.binary_search(i).is_ok()));
    ensure(
        r1 <= 1.6 && r2 <= 1.6 && assembled_ok,
        format!(
            "anz(A) {:.1} -> {:.1} -> {:.1} at N = 1024, 4096, 16384; ratios {r1:.3}, {r2:.3} <= 1.6; assembled A inside pattern at N = 1024: {} (anz {:.1})",
            anz[0], anz[1], anz[2], assembled_ok, a.anz()
        ),
    )
}

fn criterion_6() -> Check {
    let (b, pat) = heat_pattern(7);
    let n = b.len();
    let graph = sparsity_graph(&pat).with_basis(&b);
    let (perm, tree) = nested_dissection(&graph, 32).map_err(|e| e.to_string())?;
    tree.check(&graph)?;
    let nd: usize = symbolic_counts(&pat, &perm).map_err(|e| e.to_string())?.1.iter().sum();
    let lw: usize = symbolic_counts(&pat, &Permutation::identity(n)).map_err(|e| e.to_string())?.1.iter().sum();
    let anz_a = pat.anz();
    let (r_nd, r_lw) = (nd as f64 / n as f64 / anz_a, lw as f64 / n as f64 / anz_a);
    ensure(
        r_nd <= 6.0 && r_nd < r_lw,
        format!("N = {n}: anz(L)/anz(A) = {r_nd:.2} <= 6 with nested dissection, {r_lw:.2} levelwise"),
    )
}

fn residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let r = a.matvec(x).unwrap();
    let d: f64 = r.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    d / b.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn random_graph(n: usize, m: usize, rng: &mut ChaCha8Rng) -> SparsityGraph {
    let edges: Vec<(usize, usize)> = (0..m)
        .map(|_| ((rng.next_u32() as usize) % n, (rng.next_u32() as usize) % n))
        .collect();
    SparsityGraph::from_edges(n, &edges)
}

fn criterion_7() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_rec = 0.0f64;
    let mut worst_res = 0.0f64;
    let mut check_driver = |a: &SparseMatrix, f: &FactorBundle, rhs: usize, rng: &mut ChaCha8Rng| {
        worst_rec = worst_rec.max(reconstruction_error(f, a));
        for _ in 0..rhs {
            let b: Vec<f64> = (0..a.ncols()).map(|_| rng.next_u32() as f64 / u32::MAX as f64 - 0.5).collect();
            worst_res = worst_res.max(residual(a, &f.solve(&b).unwrap(), &b));
        }
    };
    // heat driver, N = 1024
    let hb = heat_basis(5);
    let k = fractional_laplacian_kernel(0.375, 2).unwrap();
    let s = assemble_compressed(&k, &hb, &CompressionParams::defaults(&hb, &k).unwrap()).map_err(|e| e.to_string())?;
    let a_heat = theta_system_matrix(&ThetaSchemeConfig::default(), &mass_matrix(&hb), &s).unwrap();
    let graph = sparsity_graph(&SparsityPattern::from_matrix(&a_heat)).with_basis(&hb);
    let (perm, _) = nested_dissection(&graph, 32).unwrap();
    let sym = symbolic_cholesky(&SparsityPattern::from_matrix(&a_heat), &perm).unwrap();
    let predicted = sym.nnz_l();
    let f_heat = numeric_cholesky(&a_heat, &sym).map_err(|e| e.to_string())?;
    check_driver(&a_heat, &f_heat, 100, &mut rng);
    let ones = vec![1.0; a_heat.ncols()];
    let x = f_heat.solve(&a_heat.matvec(&ones).unwrap()).unwrap();
    let ones_err = x.iter().fold(0.0f64, |m, v| m.max((v - 1.0).abs()));
    // 1D fractional driver, N = 1024
    let b1 = basis(&DomainSpec::interval(1.0), 10, 1);
    let k1 = fractional_laplacian_kernel(0.375, 1).unwrap();
    let s1 = assemble_compressed(&k1, &b1, &CompressionParams::defaults(&b1, &k1).unwrap()).map_err(|e| e.to_string())?;
    let a1 = s1.add_scaled(1.0, &mass_matrix(&b1), 1.0).unwrap().with_symmetric(true);
    let f1 = factor_with_nested_dissection(&a1, 32, Some(&b1)).map_err(|e| e.to_string())?;
    check_driver(&a1, &f1, 10, &mut rng);
    // field sampler covariance, N = 256
    let (fb, c) = field_covariance();
    let fc = factor_with_nested_dissection(&c, 32, Some(&fb)).map_err(|e| e.to_string())?;
    check_driver(&c, &fc, 10, &mut rng);
    // LU on a nonsymmetric perturbation of the heat matrix restricted to N = 256
    let hb4 = heat_basis(4);
    let s4 = assemble_compressed(&k, &hb4, &CompressionParams::defaults(&hb4, &k).unwrap()).map_err(|e| e.to_string())?;
    let a4 = theta_system_matrix(&ThetaSchemeConfig::default(), &mass_matrix(&hb4), &s4).unwrap();
    let scale = a4.max_abs();
    let noisy: Vec<(usize, usize, f64)> = a4
        .triplets()
        .map(|(r, c, v)| {
            // antisymmetric noise: same magnitude, opposite sign across the diagonal
            let h = (((r.min(c) * 7919 + r.max(c) * 104729) % 1000) as f64 / 1000.0 - 0.5) * scale;
            let sign = if r < c { 1.0 } else if r > c { -1.0 } else { 0.0 };
            (r, c, v + 0.01 * sign * h)
        })
        .collect();
    let an = SparseMatrix::from_triplets(a4.nrows(), a4.ncols(), noisy);
    let g4 = sparsity_graph(&SparsityPattern::from_matrix(&an)).with_basis(&hb4);
    let (p4, _) = nested_dissection(&g4, 32).unwrap();
    let flu = lu(&an, &p4).map_err(|e| e.to_string())?;
    let lu_rec = reconstruction_error(&flu, &an);
    let bl: Vec<f64> = (0..an.ncols()).map(|i| (i as f64).cos()).collect();
    let lu_res = residual(&an, &flu.solve(&bl).unwrap(), &bl);
    // path-lemma oracle vs symbolic factorization
    let mut oracle_mismatch = 0;
    for trial in 0..100 {
        let n = 20 + (trial * 37) % 181;
        let g = random_graph(n, 2 * n, &mut rng);
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            order.swap(i, (rng.next_u32() as usize) % (i + 1));
        }
        let perm = if trial % 2 == 0 {
            Permutation::from_order(order).unwrap()
        } else {
            nested_dissection(&g, 8).unwrap().0
        };
        let pat = SparsityPattern {
            n,
            cols: (0..n)
                .map(|j| {
                    let mut c = g.adj[j].clone();
                    c.push(j);
                    c.sort_unstable();
                    c
                })
                .collect(),
            symmetric: true,
        };
        let sym = symbolic_cholesky(&pat, &perm).unwrap();
        let oracle = fill_in_oracle(&g, &perm).unwrap();
        if (0..n).any(|j| sym.rowidx[sym.colptr[j]..sym.colptr[j + 1]] != oracle.cols[j][..]) {
            oracle_mismatch += 1;
        }
    }
    ensure(
        worst_rec <= 1e-10
            && worst_res <= 1e-8
            && ones_err <= 1e-10
            && predicted == f_heat.stats.nnz_l
            && lu_rec <= 1e-10
            && lu_res <= 1e-8
            && oracle_mismatch == 0,
        format!(
            "reconstruction {worst_rec:.1e}, residual {worst_res:.1e}, ones {ones_err:.1e}, predicted nnz(L) = numeric: {}, \
             LU reconstruction {lu_rec:.1e} residual {lu_res:.1e}, oracle mismatches {oracle_mismatch}/100",
            predicted == f_heat.stats.nnz_l
        ),
    )
}

fn manufactured_order() -> f64 {
    let n = 4;
    let s = SparseMatrix::from_triplets(
        n,
        n,
        (0..n)
            .flat_map(|i| {
                let mut v = vec![(i, i, 2.0 + i as f64)];
                if i + 1 < n {
                    v.push((i, i + 1, -1.0));
                    v.push((i + 1, i, -1.0));
                }
                v
            })
            .collect(),
    )
    .with_symmetric(true);
    let sd = s.to_dense();
    let exact = |t: f64| DVector::from_fn(n, |k, _| ((k + 1) as f64 * t).sin() + (-t).exp());
    let deriv = |t: f64| DVector::from_fn(n, |k, _| (k + 1) as f64 * ((k + 1) as f64 * t).cos() - (-t).exp());
    let err = |steps: usize| {
        let cfg = ThetaSchemeConfig {
            theta: 0.5,
            t_end: 1.0,
            steps,
        };
        let g = SparseMatrix::identity(n);
        let f = factor_with_nested_dissection(&theta_system_matrix(&cfg, &g, &s).unwrap(), 32, None).unwrap();
        let tr = run_theta_scheme(&cfg, &g, &s, &f, exact(0.0).as_slice(), |t| {
            Ok((deriv(t) + &sd * exact(t)).as_slice().to_vec())
        })
        .unwrap();
        (DVector::from_column_slice(&tr[steps]) - exact(1.0)).norm()
    };
    let (e1, e2, e3) = (err(20), err(40), err(80));
    ((e1 / e2).log2()).min((e2 / e3).log2())
}

fn criterion_8() -> Check {
    let order = manufactured_order();
    let b = heat_basis(4);
    let k = fractional_laplacian_kernel(0.375, 2).unwrap();
    let s = assemble_compressed(&k, &b, &CompressionParams::defaults(&b, &k).unwrap()).map_err(|e| e.to_string())?;
    let cfg = ThetaSchemeConfig::default();
    let g = mass_matrix(&b);
    let a = theta_system_matrix(&cfg, &g, &s).unwrap();
    let f = factor_with_nested_dissection(&a, 32, Some(&b)).map_err(|e| e.to_string())?;
    let load = |t: f64| load_vector(&b, |x| heat_source(x, t));
    let u0 = vec![0.0; b.len()];
    let tr = run_theta_scheme(&cfg, &g, &s, &f, &u0, load).map_err(|e| e.to_string())?;
    let sd = assemble_dense(&k, &b).map_err(|e| e.to_string())?;
    let trd = run_theta_scheme_dense(&cfg, &g.to_dense(), &sd, &u0, load).map_err(|e| e.to_string())?;
    let diff = tr.iter().zip(&trd).skip(1).map(|(x, y)| rel_l2(x, y)).fold(0.0, f64::max);
    ensure(
        order >= 1.9 && diff <= 1e-2,
        format!("Crank-Nicolson order {order:.3} >= 1.9, compressed vs dense trajectory {diff:.2e} <= 1e-2 (N = 256, M = 150)"),
    )
}

fn field_basis() -> WaveletBasis {
    basis(&DomainSpec::centered_square(4.0), 4, 5)
}

fn field_covariance() -> (WaveletBasis, SparseMatrix) {
    let b = field_basis();
    let k = exponential_covariance_kernel(1.0, 2).unwrap();
    let p = CompressionParams::new(1.25, 1, 5, 1.5, 0.5 * k.order2q, 4).unwrap();
    let c = assemble_compressed(&k, &b, &p).unwrap();
    (b, c)
}

fn criterion_9() -> Check {
    const M: usize = 20000;
    let (b, c) = field_covariance();
    let mean = load_vector(&b, |_| 1.0).unwrap();
    let model = FieldModel::new(c.clone(), mass_matrix(&b), mean.clone(), Some(&b), 32, 2024).map_err(|e| e.to_string())?;
    let samples = sample_field(&model, M).map_err(|e| e.to_string())?;
    let kl = sample_field_kl(&model, 4048, M).map_err(|e| e.to_string())?;
    // G = I, so the coefficient covariance is C itself
    let cd = c.to_dense();
    let n = b.len();
    let emp_mean = empirical_mean(&samples).unwrap();
    let mean_ok = (0..n).all(|k| (emp_mean[k] - mean[k]).abs() <= 4.0 * (cd[(k, k)] / M as f64).sqrt());
    let worst_mean = (0..n)
        .map(|k| (emp_mean[k] - mean[k]).abs() / (cd[(k, k)] / M as f64).sqrt())
        .fold(0.0, f64::max);
    let emp = empirical_covariance(&samples).unwrap();
    let emp_kl = empirical_covariance(&kl).unwrap();
    // standard error of a Gaussian sample covariance entry; the band is the
    // largest one, a per-entry 4σ test over 3·10^4 entries fails by chance
    let se = |k: usize, l: usize| ((cd[(k, k)] * cd[(l, l)] + cd[(k, l)].powi(2)) / M as f64).sqrt();
    let (mut band, mut dev, mut dev_kl, mut z_max) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for k in 0..n {
        for l in 0..n {
            band = band.max(4.0 * se(k, l));
            dev = dev.max((emp[(k, l)] - cd[(k, l)]).abs());
            dev_kl = dev_kl.max((emp[(k, l)] - emp_kl[(k, l)]).abs());
            z_max = z_max.max((emp[(k, l)] - cd[(k, l)]).abs() / se(k, l));
        }
    }
    ensure(
        mean_ok && dev <= band && dev_kl <= 2.0 * band,
        format!(
            "(a) mean deviation {worst_mean:.2} <= 4 standard errors, (b) |emp - C| {dev:.2e} <= band {band:.2e} \
             (largest per-entry z {z_max:.2}), (c) Cholesky vs eigen sampler {dev_kl:.2e} <= {:.2e}",
            2.0 * band
        ),
    )
}

fn criterion_10() -> Check {
    let exe = env!("CARGO_BIN_EXE_wavedirect");
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    for (name, body) in [
        ("heat", "driver.kind = heat\nmesh.levels = 4\n".to_string()),
        (
            "sample",
            "domain.size = 4\ndomain.origin = -2,-2\nbasis.vanishing_moments = 5\nkernel.kind = exponential\n\
             driver.kind = sample\ndriver.samples = 8\ndriver.seed = 99\n"
                .to_string(),
        ),
    ] {
        let mut outputs = Vec::new();
        for run in 0..2 {
            // both runs write to the same path so config.txt is comparable too
            let dir = tmp.path().join(name);
            let cfg = tmp.path().join(format!("{name}.conf"));
            std::fs::write(&cfg, format!("{body}output.dir = {}\n", dir.display())).unwrap();
            let status = Command::new(exe)
                .args(["run", "--config"])
                .arg(&cfg)
                .args(["--threads", if run == 0 { "1" } else { "3" }])
                .output()
                .map_err(|e| e.to_string())?;
            if !status.status.success() {
                return Err(format!("{name} run failed: {}", String::from_utf8_lossy(&status.stderr)));
            }
            let kept = tmp.path().join(format!("{name}{run}"));
            std::fs::rename(&dir, &kept).map_err(|e| e.to_string())?;
            outputs.push(kept);
        }
        let files = read_dir_sorted(&outputs[0]);
        for f in &files {
            let a = std::fs::read(outputs[0].join(f)).unwrap();
            let b = std::fs::read(outputs[1].join(f)).map_err(|e| e.to_string())?;
            if a != b {
                return Err(format!("{name}: {f} differs between runs"));
            }
        }
        notes.push(format!("{name}: {} files identical", files.len()));
    }
    Ok(notes.join(", "))
}

fn read_dir_sorted(p: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(p)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

fn main() {
    let criteria: [(u32, &str, f64, fn() -> Check); 10] = [
        (1, "wavelet correctness", 5.0, criterion_1),
        (2, "compression rule oracle", 30.0, criterion_2),
        (3, "decay estimate", 60.0, criterion_3),
        (4, "compression accuracy", 120.0, criterion_4),
        (5, "sparsity trend", 900.0, criterion_5),
        (6, "fill control", 600.0, criterion_6),
        (7, "factorization exactness", 300.0, criterion_7),
        (8, "theta scheme", 600.0, criterion_8),
        (9, "random field", 600.0, criterion_9),
        (10, "determinism", f64::INFINITY, criterion_10),
    ];
    let mut failed = 0;
    for (id, name, limit, f) in criteria {
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        let within = secs < limit;
        let (pass, detail) = match outcome {
            Ok(d) => (within, d),
            Err(d) => (false, d),
        };
        if !pass {
            failed += 1;
        }
        let limit_text = if limit.is_finite() { format!(" < {limit:.0} s") } else { String::new() };
        println!(
            "criterion {id:>2} [{}] {name}: {detail} ({secs:.1} s{limit_text})",
            if pass { "PASS" } else { "FAIL" }
        );
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
