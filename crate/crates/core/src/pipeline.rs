//! Assemble → order → factor → drive, with file export.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::apps::{
    covariance_error, heat_source, leaf_values, load_vector, run_theta_scheme, theta_system_matrix, FieldModel, ThetaSchemeConfig,
};
use crate::compress::{assemble_compressed, compression_pattern, SparsityPattern};
use crate::config::{DriverName, RunConfig};
use crate::error::{Error, Result};
use crate::factor::{numeric_cholesky, symbolic_cholesky, symbolic_counts, FactorBundle};
use crate::meshgeom::build_dyadic_hierarchy;
use crate::mtx::{read_matrix_market, read_permutation, write_matrix_market, write_permutation};
use crate::ordering::{nested_dissection, sparsity_graph, Permutation};
use crate::sparse::SparseMatrix;
use crate::wavelet::{build_basis, mass_matrix, WaveletBasis};

pub const STATS_HEADER: &str = "N,nnz_A,anz_A,nnz_L,anz_L,t_nd,t_chol";

/// Wall-clock seconds per stage.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Timings {
    pub t_wem: f64,
    pub t_nd: f64,
    pub t_chol: f64,
    pub t_drive: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub n: usize,
    pub nnz_a: usize,
    pub anz_a: f64,
    pub nnz_l: usize,
    pub anz_l: f64,
    pub timings: Timings,
    pub files: Vec<PathBuf>,
}

impl RunSummary {
    /// One table row in the column layout `N, t_WEM, anz(A), t_ND, t_Chol, anz(L)`.
    pub fn timing_table(&self) -> String {
        let t = &self.timings;
        format!(
            "{:>8} {:>10} {:>8} {:>10} {:>10} {:>8} {:>10}\n{:>8} {:>10.3} {:>8.1} {:>10.3} {:>10.3} {:>8.1} {:>10.3}\n",
            "N", "t_WEM", "anz(A)", "t_ND", "t_Chol", "anz(L)", "t_drive",
            self.n, t.t_wem, self.anz_a, t.t_nd, t.t_chol, self.anz_l, t.t_drive
        )
    }

    pub fn stats_csv(&self, timings: bool) -> String {
        let (nd, ch) = if timings {
            (format!("{:e}", self.timings.t_nd), format!("{:e}", self.timings.t_chol))
        } else {
            ("-".to_string(), "-".to_string())
        };
        format!(
            "{STATS_HEADER}\n{},{},{},{},{},{nd},{ch}\n",
            self.n, self.nnz_a, self.anz_a, self.nnz_l, self.anz_l
        )
    }
}

/// Files written so far; removed again unless the run completes.
struct OutputGuard {
    dir: PathBuf,
    created_dir: bool,
    files: Vec<PathBuf>,
    done: bool,
}

impl OutputGuard {
    fn new(dir: &Path) -> Result<Self> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir)?;
        Ok(OutputGuard {
            dir: dir.to_path_buf(),
            created_dir,
            files: Vec::new(),
            done: false,
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }

    fn write(&mut self, name: &str, text: &str) -> Result<()> {
        let p = self.path(name);
        fs::write(p, text)?;
        Ok(())
    }
}

impl Drop for OutputGuard {
    fn drop(&mut self) {
        if self.done {
            return;
        }
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

/// Matrix, ordering and factor of one run.
pub struct Stage {
    pub basis: WaveletBasis,
    pub pattern: SparsityPattern,
    pub galerkin: SparseMatrix,
    pub system: SparseMatrix,
    pub perm: Permutation,
    pub factor: FactorBundle,
    pub timings: Timings,
}

/// Builds the basis, assembles the compressed Galerkin matrix, forms the
/// system matrix of the driver and factorizes it.
pub fn prepare(cfg: &RunConfig) -> Result<Stage> {
    cfg.validate()?;
    let kernel = cfg.kernel_spec()?;
    let params = cfg.compression(&kernel)?;
    let mut timings = Timings::default();

    let t = Instant::now();
    let tree = build_dyadic_hierarchy(&cfg.domain(), cfg.levels)?;
    let basis = build_basis(tree, cfg.vanishing_moments)?;
    let pattern = compression_pattern(&basis, &params);
    let galerkin = assemble_compressed(&kernel, &basis, &params)?;
    timings.t_wem = t.elapsed().as_secs_f64();

    let g = mass_matrix(&basis);
    let system = match cfg.driver {
        DriverName::Heat => theta_system_matrix(&theta_config(cfg), &g, &galerkin)?,
        DriverName::Sample => galerkin.clone(),
        // the fractional Laplacian annihilates constants; factor G + S instead
        DriverName::Factor if kernel.singular_diagonal => g.add_scaled(1.0, &galerkin, 1.0)?.with_symmetric(true),
        DriverName::Factor => galerkin.clone(),
    };

    let t = Instant::now();
    let graph = sparsity_graph(&SparsityPattern::from_matrix(&system)).with_basis(&basis);
    let (perm, _) = nested_dissection(&graph, cfg.leaf_size)?;
    timings.t_nd = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let sym = symbolic_cholesky(&SparsityPattern::from_matrix(&system), &perm)?;
    let factor = numeric_cholesky(&system, &sym).map_err(|e| match (cfg.driver, e) {
        (DriverName::Sample, Error::NotPositiveDefinite { column, pivot }) => covariance_error(column, pivot),
        (_, e) => e,
    })?;
    timings.t_chol = t.elapsed().as_secs_f64();

    Ok(Stage {
        basis,
        pattern,
        galerkin,
        system,
        perm,
        factor,
        timings,
    })
}

pub fn theta_config(cfg: &RunConfig) -> ThetaSchemeConfig {
    ThetaSchemeConfig {
        theta: cfg.theta,
        t_end: cfg.t_end,
        steps: cfg.steps,
    }
}

/// Executes the configured driver and writes its artifacts to `output.dir`.
pub fn run(cfg: &RunConfig, threads: usize) -> Result<RunSummary> {
    cfg.validate()?;
    let mut out = OutputGuard::new(&cfg.output_dir)?;
    let stage = prepare(cfg)?;
    let mut timings = stage.timings.clone();

    let t = Instant::now();
    match cfg.driver {
        DriverName::Heat => {
            let text = heat_trajectory_csv(cfg, &stage)?;
            out.write("trajectory.csv", &text)?;
        }
        DriverName::Sample => {
            let text = sample_csv(cfg, &stage, threads)?;
            out.write("fields.csv", &text)?;
        }
        DriverName::Factor => {}
    }
    timings.t_drive = t.elapsed().as_secs_f64();

    let a = &stage.system;
    let p = out.path("A.mtx");
    write_matrix_market(&p, a)?;
    let p = out.path("L.mtx");
    write_matrix_market(&p, &stage.factor.l)?;
    let p = out.path("perm.txt");
    write_permutation(&p, stage.perm.forward())?;
    let summary = RunSummary {
        n: a.ncols(),
        nnz_a: a.nnz(),
        anz_a: a.anz(),
        nnz_l: stage.factor.stats.nnz_l,
        anz_l: stage.factor.stats.anz_l,
        timings,
        files: Vec::new(),
    };
    out.write("stats.csv", &summary.stats_csv(cfg.timings))?;
    out.write("config.txt", &cfg.to_text())?;
    out.done = true;
    Ok(RunSummary {
        files: out.files.clone(),
        ..summary
    })
}

fn heat_trajectory_csv(cfg: &RunConfig, stage: &Stage) -> Result<String> {
    let tc = theta_config(cfg);
    let basis = &stage.basis;
    let g = mass_matrix(basis);
    let u0 = vec![0.0; basis.len()];
    let traj = run_theta_scheme(&tc, &g, &stage.galerkin, &stage.factor, &u0, |t| {
        load_vector(basis, |x| heat_source(x, t))
    })?;
    let centers = basis.tree().leaf_centers();
    let mut s = String::from("step,t,x,y,value\n");
    for (i, u) in traj.iter().enumerate() {
        if i % cfg.snapshot_every != 0 && i != cfg.steps {
            continue;
        }
        let vals = leaf_values(basis, u)?;
        for (c, v) in centers.iter().zip(vals) {
            let _ = writeln!(s, "{i},{:e},{:e},{:e},{:e}", tc.time(i), c[0], c[1], v);
        }
    }
    Ok(s)
}

fn sample_csv(cfg: &RunConfig, stage: &Stage, threads: usize) -> Result<String> {
    let basis = &stage.basis;
    let mean = load_vector(basis, |_| cfg.mean)?;
    let model = FieldModel {
        covariance: stage.galerkin.clone(),
        mass: mass_matrix(basis),
        mean,
        chol_c: Some(stage.factor.clone()),
        chol_g: crate::factor::cholesky(&mass_matrix(basis), &Permutation::identity(basis.len()))?,
        seed: cfg.seed,
    };
    let samples = draw_parallel(&model, cfg.samples, threads.max(1))?;
    let centers = basis.tree().leaf_centers();
    let mut s = String::from("sample,x,y,value\n");
    for (k, coeff) in samples.iter().enumerate() {
        let vals = leaf_values(basis, coeff)?;
        for (c, v) in centers.iter().zip(vals) {
            let _ = writeln!(s, "{k},{:e},{:e},{:e}", c[0], c[1], v);
        }
    }
    Ok(s)
}

/// Samples `0..count` split over `threads` workers; sample `k` always uses
/// stream `k`, so the result does not depend on the split.
pub fn draw_parallel(model: &FieldModel, count: usize, threads: usize) -> Result<Vec<Vec<f64>>> {
    let chunk = count.div_ceil(threads.max(1)).max(1);
    let parts: Vec<Result<Vec<Vec<f64>>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..count)
            .step_by(chunk)
            .map(|start| {
                let end = (start + chunk).min(count);
                scope.spawn(move || (start..end).map(|k| model.sample(k as u64)).collect())
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sampler thread")).collect()
    });
    let mut out = Vec::with_capacity(count);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct StatsReport {
    pub n: usize,
    pub nnz: usize,
    pub anz: f64,
    /// Predicted `nnz(L)` under the given permutation.
    pub nnz_l: Option<usize>,
}

impl std::fmt::Display for StatsReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "N     {}", self.n)?;
        writeln!(f, "nnz   {}", self.nnz)?;
        writeln!(f, "anz   {}", self.anz)?;
        if let Some(l) = self.nnz_l {
            writeln!(f, "nnz_L {l}")?;
            writeln!(f, "anz_L {}", l as f64 / self.n as f64)?;
        }
        Ok(())
    }
}

pub fn stats(matrix: &Path, perm: Option<&Path>) -> Result<StatsReport> {
    let a = read_matrix_market(matrix)?;
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!("{}x{} matrix is not square", a.nrows(), a.ncols())));
    }
    let nnz_l = match perm {
        Some(p) => {
            let perm = Permutation::from_forward(read_permutation(p)?)?;
            let (_, counts) = symbolic_counts(&SparsityPattern::from_matrix(&a), &perm)?;
            Some(counts.iter().sum())
        }
        None => None,
    };
    Ok(StatsReport {
        n: a.ncols(),
        nnz: a.nnz(),
        anz: a.anz(),
        nnz_l,
    })
}
