//! Run configuration: flat `key = value` text with dotted keys and `#` comments.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::compress::CompressionParams;
use crate::error::{Error, Result};
use crate::kernels::{exponential_covariance_kernel, fractional_laplacian_kernel, gaussian_covariance_kernel, KernelSpec};
use crate::meshgeom::{DomainSpec, HoleBox};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainKindName {
    Interval,
    Square,
    LShape,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelName {
    FractionalLaplacian,
    Exponential,
    Gaussian,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DriverName {
    Heat,
    Sample,
    Factor,
}

/// `None` stands for `auto`.
pub type Auto<T> = Option<T>;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub domain_kind: DomainKindName,
    pub domain_size: f64,
    pub domain_origin: [f64; 2],
    pub domain_holes: Vec<HoleBox>,
    pub levels: u32,
    pub vanishing_moments: usize,
    pub kernel: KernelName,
    pub s: f64,
    pub correlation_length: f64,
    pub order2q: Auto<f64>,
    pub a: f64,
    pub delta: Auto<f64>,
    pub leaf_size: usize,
    pub driver: DriverName,
    pub theta: f64,
    pub t_end: f64,
    pub steps: usize,
    pub snapshot_every: usize,
    pub samples: usize,
    pub mean: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub timings: bool,
}

impl Default for RunConfig {
    /// Heat driver on the square of side 2.5 centred at the origin, N = 256.
    fn default() -> Self {
        RunConfig {
            domain_kind: DomainKindName::Square,
            domain_size: 2.5,
            domain_origin: [-1.25, -1.25],
            domain_holes: Vec::new(),
            levels: 4,
            vanishing_moments: 2,
            kernel: KernelName::FractionalLaplacian,
            s: 0.375,
            correlation_length: 1.0,
            order2q: None,
            a: 1.25,
            delta: None,
            leaf_size: 32,
            driver: DriverName::Heat,
            theta: 0.5,
            t_end: 3.0,
            steps: 150,
            snapshot_every: 10,
            samples: 4,
            mean: 0.0,
            seed: 1,
            output_dir: PathBuf::from("out"),
            timings: false,
        }
    }
}

fn cfg_err(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| cfg_err(key, format!("`{v}`: {e}")))
}

fn parse_auto(key: &str, v: &str) -> Result<Auto<f64>> {
    if v == "auto" {
        Ok(None)
    } else {
        parse_num(key, v).map(Some)
    }
}

fn parse_pair(key: &str, v: &str) -> Result<[f64; 2]> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [x, y] => Ok([parse_num(key, x)?, parse_num(key, y)?]),
        [x] => Ok([parse_num(key, x)?, 0.0]),
        _ => Err(cfg_err(key, format!("`{v}`: expected `x,y`"))),
    }
}

/// Holes as `x0,y0,x1,y1` separated by `;`.
fn parse_holes(key: &str, v: &str) -> Result<Vec<HoleBox>> {
    v.split(';')
        .map(str::trim)
        .filter(|h| !h.is_empty())
        .map(|h| {
            let c: Vec<f64> = h
                .split(',')
                .map(|x| parse_num::<f64>(key, x.trim()))
                .collect::<Result<_>>()?;
            if c.len() != 4 {
                return Err(cfg_err(key, format!("`{h}`: expected `x0,y0,x1,y1`")));
            }
            Ok(HoleBox {
                lo: [c[0], c[1]],
                hi: [c[2], c[3]],
            })
        })
        .collect()
}

fn fmt_auto(v: Auto<f64>) -> String {
    v.map_or("auto".into(), |x| x.to_string())
}

impl RunConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: format!("duplicate key `{key}`"),
                });
            }
            cfg.set(key, value)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, path)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "domain.kind" => {
                self.domain_kind = match v {
                    "interval" => DomainKindName::Interval,
                    "square" => DomainKindName::Square,
                    "lshape" => DomainKindName::LShape,
                    _ => return Err(cfg_err(key, format!("`{v}`: expected interval, square or lshape"))),
                }
            }
            "domain.size" => self.domain_size = parse_num(key, v)?,
            "domain.origin" => self.domain_origin = parse_pair(key, v)?,
            "domain.holes" => self.domain_holes = parse_holes(key, v)?,
            "mesh.levels" => self.levels = parse_num(key, v)?,
            "basis.vanishing_moments" => self.vanishing_moments = parse_num(key, v)?,
            "kernel.kind" => {
                self.kernel = match v {
                    "fractional_laplacian" => KernelName::FractionalLaplacian,
                    "exponential" => KernelName::Exponential,
                    "gaussian" => KernelName::Gaussian,
                    _ => {
                        return Err(cfg_err(
                            key,
                            format!("`{v}`: expected fractional_laplacian, exponential or gaussian"),
                        ))
                    }
                }
            }
            "kernel.s" => self.s = parse_num(key, v)?,
            "kernel.correlation_length" => self.correlation_length = parse_num(key, v)?,
            "kernel.order2q" => self.order2q = parse_auto(key, v)?,
            "compression.a" => self.a = parse_num(key, v)?,
            "compression.delta" => self.delta = parse_auto(key, v)?,
            "ordering.leaf_size" => self.leaf_size = parse_num(key, v)?,
            "driver.kind" => {
                self.driver = match v {
                    "heat" => DriverName::Heat,
                    "sample" => DriverName::Sample,
                    "factor" => DriverName::Factor,
                    _ => return Err(cfg_err(key, format!("`{v}`: expected heat, sample or factor"))),
                }
            }
            "driver.theta" => self.theta = parse_num(key, v)?,
            "driver.t_end" => self.t_end = parse_num(key, v)?,
            "driver.steps" => self.steps = parse_num(key, v)?,
            "driver.snapshot_every" => self.snapshot_every = parse_num(key, v)?,
            "driver.samples" => self.samples = parse_num(key, v)?,
            "driver.mean" => self.mean = parse_num(key, v)?,
            "driver.seed" => self.seed = parse_num(key, v)?,
            "output.dir" => self.output_dir = PathBuf::from(v),
            "output.timings" => self.timings = parse_num(key, v)?,
            _ => return Err(cfg_err(key, "unknown key")),
        }
        Ok(())
    }

    /// Every effective value; parsing the result gives back `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let domain = match self.domain_kind {
            DomainKindName::Interval => "interval",
            DomainKindName::Square => "square",
            DomainKindName::LShape => "lshape",
        };
        let kernel = match self.kernel {
            KernelName::FractionalLaplacian => "fractional_laplacian",
            KernelName::Exponential => "exponential",
            KernelName::Gaussian => "gaussian",
        };
        let driver = match self.driver {
            DriverName::Heat => "heat",
            DriverName::Sample => "sample",
            DriverName::Factor => "factor",
        };
        let holes: Vec<String> = self
            .domain_holes
            .iter()
            .map(|h| format!("{},{},{},{}", h.lo[0], h.lo[1], h.hi[0], h.hi[1]))
            .collect();
        let _ = writeln!(s, "domain.kind = {domain}");
        let _ = writeln!(s, "domain.size = {}", self.domain_size);
        let _ = writeln!(s, "domain.origin = {},{}", self.domain_origin[0], self.domain_origin[1]);
        let _ = writeln!(s, "domain.holes = {}", holes.join(";"));
        let _ = writeln!(s, "mesh.levels = {}", self.levels);
        let _ = writeln!(s, "basis.vanishing_moments = {}", self.vanishing_moments);
        let _ = writeln!(s, "kernel.kind = {kernel}");
        let _ = writeln!(s, "kernel.s = {}", self.s);
        let _ = writeln!(s, "kernel.correlation_length = {}", self.correlation_length);
        let _ = writeln!(s, "kernel.order2q = {}", fmt_auto(self.order2q));
        let _ = writeln!(s, "compression.a = {}", self.a);
        let _ = writeln!(s, "compression.delta = {}", fmt_auto(self.delta));
        let _ = writeln!(s, "ordering.leaf_size = {}", self.leaf_size);
        let _ = writeln!(s, "driver.kind = {driver}");
        let _ = writeln!(s, "driver.theta = {}", self.theta);
        let _ = writeln!(s, "driver.t_end = {}", self.t_end);
        let _ = writeln!(s, "driver.steps = {}", self.steps);
        let _ = writeln!(s, "driver.snapshot_every = {}", self.snapshot_every);
        let _ = writeln!(s, "driver.samples = {}", self.samples);
        let _ = writeln!(s, "driver.mean = {}", self.mean);
        let _ = writeln!(s, "driver.seed = {}", self.seed);
        let _ = writeln!(s, "output.dir = {}", self.output_dir.display());
        let _ = writeln!(s, "output.timings = {}", self.timings);
        s
    }

    pub fn domain(&self) -> DomainSpec {
        let d = match self.domain_kind {
            DomainKindName::Interval => DomainSpec::interval(self.domain_size),
            DomainKindName::Square => DomainSpec::square(self.domain_size),
            DomainKindName::LShape => DomainSpec::lshape(self.domain_size, self.domain_holes.clone()),
        };
        d.with_origin(self.domain_origin)
    }

    pub fn dim(&self) -> usize {
        self.domain().dim()
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec> {
        let n = self.dim();
        let k = match self.kernel {
            KernelName::FractionalLaplacian => fractional_laplacian_kernel(self.s, n)?,
            KernelName::Exponential => exponential_covariance_kernel(self.correlation_length, n)?,
            KernelName::Gaussian => gaussian_covariance_kernel(self.correlation_length, n)?,
        };
        Ok(match self.order2q {
            Some(o) => k.with_order2q(o),
            None => k,
        })
    }

    /// Compression parameters; `auto` places `δ` at the midpoint of `(d, d̃ + 2q)`.
    pub fn compression(&self, kernel: &KernelSpec) -> Result<CompressionParams> {
        let d = 1usize;
        let q = 0.5 * kernel.order2q;
        let delta = self
            .delta
            .unwrap_or(0.5 * (d as f64 + self.vanishing_moments as f64 + 2.0 * q));
        CompressionParams::new(self.a, d, self.vanishing_moments, delta, q, self.levels)
    }

    /// All checks that do not need the basis or any assembly.
    pub fn validate(&self) -> Result<()> {
        let kernel = self.kernel_spec()?;
        self.compression(&kernel)?;
        if self.vanishing_moments == 0 {
            return Err(cfg_err("basis.vanishing_moments", "must be >= 1"));
        }
        if self.leaf_size == 0 {
            return Err(cfg_err("ordering.leaf_size", "must be >= 1"));
        }
        if self.levels > 14 {
            return Err(cfg_err("mesh.levels", "must be <= 14"));
        }
        if self.driver == DriverName::Heat {
            if self.dim() != 2 {
                return Err(cfg_err("driver.kind", "the heat driver needs a two-dimensional domain"));
            }
            if !(0.0..=1.0).contains(&self.theta) {
                return Err(cfg_err("driver.theta", format!("{} outside [0, 1]", self.theta)));
            }
            if self.steps == 0 {
                return Err(cfg_err("driver.steps", "must be >= 1"));
            }
            if !(self.t_end > 0.0) {
                return Err(cfg_err("driver.t_end", "must be > 0"));
            }
            if self.snapshot_every == 0 {
                return Err(cfg_err("driver.snapshot_every", "must be >= 1"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn print_and_parse_roundtrip() {
        let mut c = RunConfig::default();
        c.domain_kind = DomainKindName::LShape;
        c.domain_size = 4.0;
        c.domain_origin = [0.0, 0.0];
        c.domain_holes = vec![HoleBox {
            lo: [0.5, 0.5],
            hi: [1.0, 1.0],
        }];
        c.delta = Some(1.1);
        c.theta = 0.1 + 0.2;
        let back = RunConfig::parse(&c.to_text(), Path::new("mem")).unwrap();
        assert_eq!(back, c);
        let d = RunConfig::default();
        assert_eq!(RunConfig::parse(&d.to_text(), Path::new("mem")).unwrap(), d);
    }

    #[test]
    fn comments_and_unknown_keys() {
        let c = RunConfig::parse("# heading\nmesh.levels = 3 # trailing\n\n", Path::new("m")).unwrap();
        assert_eq!(c.levels, 3);
        match RunConfig::parse("mesh.level = 3\n", Path::new("m")) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "mesh.level"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            RunConfig::parse("mesh.levels 3\n", Path::new("m")),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn delta_outside_admissible_interval() {
        let mut c = RunConfig::default();
        c.delta = Some(3.0);
        let e = c.validate().unwrap_err().to_string();
        assert!(e.contains("compression.delta") && e.contains("d < δ < d̃ + 2q"), "{e}");
    }
}
