//! Wigner matrices, the rank-one all-ones deformation, and the deformed ensemble
//! `M = W / sqrt(n) + A` with `A_ij = theta / n`.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use num_complex::Complex64;
use num_rational::Ratio;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SymmetryClass {
    ComplexHermitian,
    RealSymmetric,
}

impl SymmetryClass {
    pub fn as_str(self) -> &'static str {
        match self {
            SymmetryClass::ComplexHermitian => "complex",
            SymmetryClass::RealSymmetric => "real",
        }
    }
}

impl fmt::Display for SymmetryClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SymmetryClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "complex" | "complex-hermitian" | "hermitian" => Ok(SymmetryClass::ComplexHermitian),
            "real" | "real-symmetric" | "symmetric" => Ok(SymmetryClass::RealSymmetric),
            other => Err(Error::Parse(format!("unknown symmetry class `{other}`"))),
        }
    }
}

/// Symmetric entry distributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LawKind {
    Gaussian,
    Rademacher,
    UniformSymmetric,
}

impl LawKind {
    pub const ALL: [LawKind; 3] = [LawKind::Gaussian, LawKind::Rademacher, LawKind::UniformSymmetric];

    pub fn as_str(self) -> &'static str {
        match self {
            LawKind::Gaussian => "gaussian",
            LawKind::Rademacher => "rademacher",
            LawKind::UniformSymmetric => "uniform",
        }
    }

    /// `E[X^{2k}] / Var(X)^k` for the standardized law, as an exact rational.
    pub fn moment_ratio(self, k: u32) -> Ratio<u64> {
        match self {
            LawKind::Gaussian => Ratio::from_integer((1..=k as u64).map(|i| 2 * i - 1).product()),
            LawKind::Rademacher => Ratio::from_integer(1),
            LawKind::UniformSymmetric => Ratio::new(3u64.pow(k), 2 * k as u64 + 1),
        }
    }
}

impl fmt::Display for LawKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LawKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gaussian" | "normal" => Ok(LawKind::Gaussian),
            "rademacher" => Ok(LawKind::Rademacher),
            "uniform" | "uniform-symmetric" => Ok(LawKind::UniformSymmetric),
            other => Err(Error::Parse(format!("unknown entry law `{other}`"))),
        }
    }
}

/// A centred symmetric real law with a given variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntryLaw {
    pub kind: LawKind,
    pub component_variance: f64,
}

impl EntryLaw {
    pub fn new(kind: LawKind, component_variance: f64) -> Self {
        EntryLaw { kind, component_variance }
    }

    /// `E[X^order]`; zero for odd orders.
    pub fn moment(&self, order: u32) -> f64 {
        if order % 2 == 1 {
            return 0.0;
        }
        let k = order / 2;
        let r = self.kind.moment_ratio(k);
        self.component_variance.powi(k as i32) * (*r.numer() as f64 / *r.denom() as f64)
    }

    /// Smallest `beta` with `E[X^{2k}] <= (beta k)^k` for `k = 1..=k_max`.
    pub fn beta_bound(&self, k_max: u32) -> f64 {
        (1..=k_max)
            .map(|k| self.moment(2 * k).powf(1.0 / k as f64) / k as f64)
            .fold(0.0, f64::max)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let sd = self.component_variance.sqrt();
        match self.kind {
            LawKind::Gaussian => {
                let z: f64 = rng.sample(StandardNormal);
                sd * z
            }
            LawKind::Rademacher => {
                if rng.random::<bool>() {
                    sd
                } else {
                    -sd
                }
            }
            LawKind::UniformSymmetric => {
                let a = sd * 3f64.sqrt();
                rng.random_range(-a..a)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n: usize,
    pub sigma: f64,
    pub theta: f64,
    pub diag_sigma: f64,
    pub symmetry: SymmetryClass,
    pub law: LawKind,
    pub master_seed: u64,
}

impl EnsembleConfig {
    pub fn new(
        n: usize,
        sigma: f64,
        theta: f64,
        symmetry: SymmetryClass,
        law: LawKind,
        master_seed: u64,
    ) -> Result<Self> {
        let cfg = EnsembleConfig { n, sigma, theta, diag_sigma: sigma, symmetry, law, master_seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_diag_sigma(mut self, diag_sigma: f64) -> Result<Self> {
        self.diag_sigma = diag_sigma;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be >= 1".into()));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::InvalidConfig(format!("sigma must be > 0, got {}", self.sigma)));
        }
        if !(self.theta.is_finite() && self.theta >= 0.0) {
            return Err(Error::InvalidConfig(format!("theta must be >= 0, got {}", self.theta)));
        }
        if !(self.diag_sigma.is_finite() && self.diag_sigma > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "diag_sigma must be > 0, got {}",
                self.diag_sigma
            )));
        }
        Ok(())
    }

    /// Law of one real component of an off-diagonal entry.
    pub fn offdiag_law(&self) -> EntryLaw {
        let v = match self.symmetry {
            SymmetryClass::ComplexHermitian => self.sigma * self.sigma / 2.0,
            SymmetryClass::RealSymmetric => self.sigma * self.sigma,
        };
        EntryLaw::new(self.law, v)
    }

    pub fn diag_law(&self) -> EntryLaw {
        EntryLaw::new(self.law, self.diag_sigma * self.diag_sigma)
    }

    /// Stable FNV-1a hash of the configuration, used as sample provenance.
    pub fn config_hash(&self) -> u64 {
        let text = format!(
            "n={};sigma={:e};theta={:e};diag_sigma={:e};symmetry={};law={};seed={}",
            self.n, self.sigma, self.theta, self.diag_sigma, self.symmetry, self.law, self.master_seed
        );
        text.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
            (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
        })
    }

    pub fn regime(&self) -> Result<Regime> {
        regime_of(self.theta, self.sigma)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Entries {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

/// Dense row-major Hermitian (or real symmetric) matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSample {
    pub dim: usize,
    pub entries: Entries,
    pub provenance: (u64, u64),
}

impl MatrixSample {
    pub fn real(dim: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), dim * dim);
        MatrixSample { dim, entries: Entries::Real(data), provenance: (0, 0) }
    }

    pub fn complex(dim: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), dim * dim);
        MatrixSample { dim, entries: Entries::Complex(data), provenance: (0, 0) }
    }

    pub fn is_complex(&self) -> bool {
        matches!(self.entries, Entries::Complex(_))
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        match &self.entries {
            Entries::Real(a) => Complex64::new(a[i * self.dim + j], 0.0),
            Entries::Complex(a) => a[i * self.dim + j],
        }
    }

    /// Exact (bitwise) Hermitian check with finiteness.
    pub fn is_hermitian(&self) -> bool {
        let n = self.dim;
        (0..n).all(|i| {
            (i..n).all(|j| {
                let a = self.get(i, j);
                let b = self.get(j, i);
                a.re.is_finite() && a.im.is_finite() && a.re == b.re && a.im == -b.im
            })
        })
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i).re).sum()
    }

    pub fn max_abs_entry(&self) -> f64 {
        match &self.entries {
            Entries::Real(a) => a.iter().fold(0.0, |m, x| m.max(x.abs())),
            Entries::Complex(a) => a.iter().fold(0.0, |m, x| m.max(x.norm())),
        }
    }

    pub fn scaled(&self, factor: f64) -> MatrixSample {
        let entries = match &self.entries {
            Entries::Real(a) => Entries::Real(a.iter().map(|x| x * factor).collect()),
            Entries::Complex(a) => Entries::Complex(a.iter().map(|x| x * factor).collect()),
        };
        MatrixSample { dim: self.dim, entries, provenance: self.provenance }
    }

    /// Adds `c` to every entry (a real all-ones shift keeps Hermitian symmetry).
    pub fn shifted_all(&self, c: f64) -> MatrixSample {
        let entries = match &self.entries {
            Entries::Real(a) => Entries::Real(a.iter().map(|x| x + c).collect()),
            Entries::Complex(a) => Entries::Complex(a.iter().map(|x| x + c).collect()),
        };
        MatrixSample { dim: self.dim, entries, provenance: self.provenance }
    }

    /// `P M P^T` for the permutation `i -> perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> MatrixSample {
        let n = self.dim;
        assert_eq!(perm.len(), n);
        let entries = match &self.entries {
            Entries::Real(a) => {
                let mut out = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        out[perm[i] * n + perm[j]] = a[i * n + j];
                    }
                }
                Entries::Real(out)
            }
            Entries::Complex(a) => {
                let mut out = vec![Complex64::new(0.0, 0.0); n * n];
                for i in 0..n {
                    for j in 0..n {
                        out[perm[i] * n + perm[j]] = a[i * n + j];
                    }
                }
                Entries::Complex(out)
            }
        };
        MatrixSample { dim: n, entries, provenance: self.provenance }
    }

    /// Plain-text dump, one row per line, `re` or `re+imI` tokens.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for i in 0..self.dim {
            let row: Vec<String> = (0..self.dim)
                .map(|j| match &self.entries {
                    Entries::Real(a) => format!("{}", a[i * self.dim + j]),
                    Entries::Complex(a) => {
                        let z = a[i * self.dim + j];
                        if z.im.is_sign_negative() {
                            format!("{}{}I", z.re, z.im)
                        } else {
                            format!("{}+{}I", z.re, z.im)
                        }
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }
}

/// Wigner matrix `W` for `(config, sample_index)`.
///
/// Row `i` uses its own counter stream; within a row the diagonal entry is
/// drawn first, then the entries `j > i` in order (real and imaginary parts
/// consecutively in the complex class).
pub fn sample_wigner(config: &EnsembleConfig, sample_index: u64) -> MatrixSample {
    let n = config.n;
    let off = config.offdiag_law();
    let diag = config.diag_law();
    let provenance = (config.config_hash(), sample_index);
    match config.symmetry {
        SymmetryClass::RealSymmetric => {
            let mut a = vec![0.0; n * n];
            for i in 0..n {
                let mut rng = rng::stream(config.master_seed, sample_index, i as u64);
                a[i * n + i] = diag.sample(&mut rng);
                for j in i + 1..n {
                    let x = off.sample(&mut rng);
                    a[i * n + j] = x;
                    a[j * n + i] = x;
                }
            }
            MatrixSample { dim: n, entries: Entries::Real(a), provenance }
        }
        SymmetryClass::ComplexHermitian => {
            let mut a = vec![Complex64::new(0.0, 0.0); n * n];
            for i in 0..n {
                let mut rng = rng::stream(config.master_seed, sample_index, i as u64);
                a[i * n + i] = Complex64::new(diag.sample(&mut rng), 0.0);
                for j in i + 1..n {
                    let re = off.sample(&mut rng);
                    let im = off.sample(&mut rng);
                    a[i * n + j] = Complex64::new(re, im);
                    a[j * n + i] = Complex64::new(re, -im);
                }
            }
            MatrixSample { dim: n, entries: Entries::Complex(a), provenance }
        }
    }
}

/// The `n x n` matrix with every entry `theta / n`.
pub fn deformation_matrix(n: usize, theta: f64) -> Result<MatrixSample> {
    if n == 0 {
        return Err(Error::InvalidConfig("n must be >= 1".into()));
    }
    if !(theta >= 0.0) {
        return Err(Error::InvalidConfig(format!("theta must be >= 0, got {theta}")));
    }
    Ok(MatrixSample::real(n, vec![theta / n as f64; n * n]))
}

/// `W / sqrt(n)` for the same draw used by [`sample_deformed`].
pub fn sample_normalized_wigner(config: &EnsembleConfig, sample_index: u64) -> MatrixSample {
    sample_wigner(config, sample_index).scaled(1.0 / (config.n as f64).sqrt())
}

pub fn sample_deformed(config: &EnsembleConfig, sample_index: u64) -> MatrixSample {
    let base = sample_normalized_wigner(config, sample_index);
    if config.theta == 0.0 {
        return base;
    }
    base.shifted_all(config.theta / config.n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegimeLabel {
    Supercritical,
    Critical,
    Subcritical,
}

impl fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegimeLabel::Supercritical => "supercritical",
            RegimeLabel::Critical => "critical",
            RegimeLabel::Subcritical => "subcritical",
        })
    }
}

/// Phase of the largest eigenvalue together with the outlier location and
/// fluctuation scale where they are defined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regime {
    pub label: RegimeLabel,
    pub theta: f64,
    pub sigma: f64,
    pub rho_theta: Option<f64>,
    pub sigma_theta: Option<f64>,
}

impl Regime {
    pub fn rho_theta(&self) -> Result<f64> {
        self.rho_theta
            .ok_or_else(|| Error::Regime("rho_theta is undefined at theta = 0".into()))
    }

    pub fn sigma_theta(&self) -> Result<f64> {
        self.sigma_theta.ok_or_else(|| {
            Error::Regime(format!(
                "sigma_theta requires theta > sigma (theta = {}, sigma = {})",
                self.theta, self.sigma
            ))
        })
    }

    pub fn is_supercritical(&self) -> bool {
        self.label == RegimeLabel::Supercritical
    }
}

pub fn regime_of(theta: f64, sigma: f64) -> Result<Regime> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidConfig(format!("sigma must be > 0, got {sigma}")));
    }
    if !(theta.is_finite() && theta >= 0.0) {
        return Err(Error::InvalidConfig(format!("theta must be >= 0, got {theta}")));
    }
    let label = if theta > sigma {
        RegimeLabel::Supercritical
    } else if theta == sigma {
        RegimeLabel::Critical
    } else {
        RegimeLabel::Subcritical
    };
    let rho_theta = (theta > 0.0).then(|| theta + sigma * sigma / theta);
    let sigma_theta =
        (theta > sigma).then(|| sigma * ((theta * theta - sigma * sigma) / (theta * theta)).sqrt());
    Ok(Regime { label, theta, sigma, rho_theta, sigma_theta })
}
