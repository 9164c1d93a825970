//! Dense Hermitian eigenvalues, trace powers, interlacing and the rescaled
//! edge/outlier statistics.

use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::ensembles::{regime_of, Entries, MatrixSample, Regime};
use crate::error::{Error, Result};

/// Iteration cap per eigenvalue in the QL sweep.
pub const MAX_SWEEPS: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    /// Descending.
    pub values: Vec<f64>,
    pub dim: usize,
    pub residual_tol: f64,
}

impl Spectrum {
    pub fn from_values(mut values: Vec<f64>) -> Self {
        values.sort_by(|a, b| b.total_cmp(a));
        let dim = values.len();
        let scale = values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        Spectrum { values, dim, residual_tol: f64::EPSILON * dim.max(1) as f64 * scale.max(1.0) }
    }

    pub fn largest(&self) -> f64 {
        self.values[0]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "lambda"])?;
        for (i, v) in self.values.iter().enumerate() {
            w.write_record([(i + 1).to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

trait Scalar: Copy + Send + Sync {
    fn zero() -> Self;
    fn from_re(x: f64) -> Self;
    fn re(self) -> f64;
    fn abs(self) -> f64;
    fn norm_sqr(self) -> f64;
    fn conj(self) -> Self;
    fn scale(self, s: f64) -> Self;
    fn add(self, o: Self) -> Self;
    fn sub(self, o: Self) -> Self;
    fn mul(self, o: Self) -> Self;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_re(x: f64) -> Self {
        x
    }
    fn re(self) -> f64 {
        self
    }
    fn abs(self) -> f64 {
        f64::abs(self)
    }
    fn norm_sqr(self) -> f64 {
        self * self
    }
    fn conj(self) -> Self {
        self
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn mul(self, o: Self) -> Self {
        self * o
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn from_re(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn re(self) -> f64 {
        self.re
    }
    fn abs(self) -> f64 {
        self.norm()
    }
    fn norm_sqr(self) -> f64 {
        Complex64::norm_sqr(&self)
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn mul(self, o: Self) -> Self {
        self * o
    }
}

/// Householder reduction to a real symmetric tridiagonal matrix.
///
/// Only the lower triangle of `a` (row-major, `n x n`) is read and updated.
/// Returns `(diag, offdiag)` with `offdiag.len() == n - 1`.
fn tridiagonalize<T: Scalar>(a: &mut [T], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n.saturating_sub(1)];
    let mut v = vec![T::zero(); n];
    let mut p = vec![T::zero(); n];
    for k in 0..n.saturating_sub(1) {
        d[k] = a[k * n + k].re();
        let lo = k + 1;
        let x0 = a[lo * n + k];
        let tail: f64 = (lo + 1..n).map(|i| a[i * n + k].norm_sqr()).sum();
        if tail == 0.0 {
            // already tridiagonal in this column; a unimodular diagonal
            // similarity makes the entry real
            e[k] = x0.abs();
            continue;
        }
        let x0_abs = x0.abs();
        let alpha = (x0.norm_sqr() + tail).sqrt();
        let phase = if x0_abs == 0.0 { None } else { Some(x0.scale(1.0 / x0_abs)) };
        // v = x - beta e1 with beta = -phase * alpha, so v0 = x0 + phase * alpha
        v[lo] = match phase {
            Some(ph) => x0.add(ph.scale(alpha)),
            None => T::from_re(alpha),
        };
        for i in lo + 1..n {
            v[i] = a[i * n + k];
        }
        let vnorm2 = 2.0 * alpha * (alpha + x0_abs);
        let tau = 2.0 / vnorm2;
        e[k] = alpha;

        // p = tau * B v on the trailing block, B Hermitian stored lower
        for i in lo..n {
            p[i] = T::zero();
        }
        for i in lo..n {
            let row = &a[i * n..i * n + i + 1];
            let vi = v[i];
            let mut acc = T::zero();
            for j in lo..i {
                let bij = row[j];
                acc = acc.add(bij.mul(v[j]));
                p[j] = p[j].add(bij.conj().mul(vi));
            }
            p[i] = p[i].add(acc).add(row[i].mul(vi));
        }
        let mut kk = 0.0;
        for i in lo..n {
            p[i] = p[i].scale(tau);
            kk += v[i].conj().mul(p[i]).re();
        }
        let half_k = 0.5 * tau * kk;
        for i in lo..n {
            p[i] = p[i].sub(v[i].scale(half_k));
        }
        // B -= v w* + w v*
        for i in lo..n {
            let vi = v[i];
            let wi = p[i];
            let row = &mut a[i * n..i * n + i + 1];
            for j in lo..=i {
                row[j] = row[j].sub(vi.mul(p[j].conj())).sub(wi.mul(v[j].conj()));
            }
        }
    }
    if n > 0 {
        d[n - 1] = a[(n - 1) * n + n - 1].re();
    }
    (d, e)
}

/// Implicit-shift QL on a symmetric tridiagonal matrix (eigenvalues only).
fn tridiagonal_ql(d: &mut [f64], off: &[f64]) -> Result<()> {
    let n = d.len();
    if n <= 1 {
        return Ok(());
    }
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(off);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            if iter == MAX_SWEEPS {
                return Err(Error::NoConvergence { index: l, sweeps: MAX_SWEEPS });
            }
            iter += 1;
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// All eigenvalues, descending.
pub fn eigenvalues(m: &MatrixSample) -> Result<Spectrum> {
    let n = m.dim;
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let (mut d, e) = match &m.entries {
        Entries::Real(a) => tridiagonalize(&mut a.clone(), n),
        Entries::Complex(a) => tridiagonalize(&mut a.clone(), n),
    };
    tridiagonal_ql(&mut d, &e)?;
    let mut s = Spectrum::from_values(d);
    s.residual_tol = s.residual_tol.max(f64::EPSILON * n as f64 * m.max_abs_entry());
    Ok(s)
}

/// Eigenvalues of a real symmetric tridiagonal matrix.
pub fn tridiagonal_eigenvalues(diag: &[f64], offdiag: &[f64]) -> Result<Spectrum> {
    if diag.is_empty() {
        return Err(Error::EmptyInput);
    }
    if offdiag.len() + 1 != diag.len() {
        return Err(Error::DimensionMismatch { left: diag.len(), right: offdiag.len() + 1 });
    }
    let mut d = diag.to_vec();
    tridiagonal_ql(&mut d, offdiag)?;
    Ok(Spectrum::from_values(d))
}

/// `sum_i lambda_i^l`.
pub fn trace_power(s: &Spectrum, l: u32) -> f64 {
    s.values.iter().map(|x| x.powi(l as i32)).sum()
}

pub fn trace_power_of(m: &MatrixSample, l: u32) -> Result<f64> {
    Ok(trace_power(&eigenvalues(m)?, l))
}

/// `Tr M^l` by repeated dense multiplication; the cross-check route.
pub fn trace_power_direct(m: &MatrixSample, l: u32) -> f64 {
    let n = m.dim;
    if l == 0 {
        return n as f64;
    }
    let a: Vec<Complex64> = (0..n * n).map(|k| m.get(k / n, k % n)).collect();
    let mut acc = a.clone();
    for _ in 1..l {
        let mut next = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for k in 0..n {
                let x = acc[i * n + k];
                if x == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    next[i * n + j] += x * a[k * n + j];
                }
            }
        }
        acc = next;
    }
    (0..n).map(|i| acc[i * n + i].re).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterlacingReport {
    pub holds: bool,
    pub violations: usize,
    pub max_violation: f64,
    /// 1-based index of the worst violation.
    pub worst_index: Option<usize>,
    pub slack: f64,
}

/// Checks `lambda_1 >= base_1 >= lambda_2 >= base_2 >= ... >= lambda_n >= base_n`.
pub fn interlacing_check(deformed: &Spectrum, base: &Spectrum) -> Result<InterlacingReport> {
    if deformed.dim != base.dim {
        return Err(Error::DimensionMismatch { left: deformed.dim, right: base.dim });
    }
    let scale = deformed
        .values
        .iter()
        .chain(&base.values)
        .fold(0.0f64, |m, x| m.max(x.abs()));
    let slack = 1e-8 * (1.0 + scale);
    let mut violations = 0;
    let mut max_violation = 0.0f64;
    let mut worst_index = None;
    let mut note = |gap: f64, idx: usize| {
        if gap > slack {
            violations += 1;
        }
        if gap > max_violation {
            max_violation = gap;
            worst_index = Some(idx);
        }
    };
    for i in 0..base.dim {
        note(base.values[i] - deformed.values[i], i + 1);
        if i + 1 < base.dim {
            note(deformed.values[i + 1] - base.values[i], i + 1);
        }
    }
    Ok(InterlacingReport { holds: violations == 0, violations, max_violation, worst_index, slack })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluctuationSample {
    pub n: usize,
    pub rho_theta: Option<f64>,
    pub sigma: f64,
    pub supercritical: bool,
    /// `2 sqrt(n) (lambda_j / rho - 1)` for positive eigenvalues (supercritical only).
    pub xi: Vec<f64>,
    /// `n^{2/3} (lambda_j + 2 sigma)` for negative eigenvalues.
    pub tau: Vec<f64>,
    /// `n^{2/3} (lambda_j - 2 sigma)` for the top `k`.
    pub edge_u: Vec<f64>,
    pub lambda_1: f64,
}

impl FluctuationSample {
    /// `sqrt(n) (lambda_1 - rho_theta)`.
    pub fn leading_deviation(&self) -> Result<f64> {
        let rho = self.require_super()?;
        Ok((self.n as f64).sqrt() * (self.lambda_1 - rho))
    }

    /// `xi_1 = 2 sqrt(n) (lambda_1 / rho - 1)`.
    pub fn xi_1(&self) -> Result<f64> {
        self.require_super()?;
        self.xi.first().copied().ok_or(Error::EmptyInput)
    }

    pub fn lambda_from_xi(&self, xi: f64) -> Result<f64> {
        let rho = self.require_super()?;
        Ok(rho * (1.0 + xi / (2.0 * (self.n as f64).sqrt())))
    }

    fn require_super(&self) -> Result<f64> {
        match (self.supercritical, self.rho_theta) {
            (true, Some(r)) => Ok(r),
            _ => Err(Error::Regime("supercritical statistics requested outside theta > sigma".into())),
        }
    }
}

pub fn rescaled_fluctuation(s: &Spectrum, regime: &Regime, n: usize, k: usize) -> Result<FluctuationSample> {
    if k > s.dim || n == 0 {
        return Err(Error::InvalidConfig(format!("need 1 <= n and k <= dim (k = {k}, dim = {})", s.dim)));
    }
    let sigma = regime.sigma;
    let nf = n as f64;
    let n23 = nf.powf(2.0 / 3.0);
    let supercritical = regime.is_supercritical();
    let xi = match (supercritical, regime.rho_theta) {
        (true, Some(rho)) => s
            .values
            .iter()
            .filter(|&&x| x > 0.0)
            .map(|&x| 2.0 * nf.sqrt() * (x / rho - 1.0))
            .collect(),
        _ => Vec::new(),
    };
    let tau = s.values.iter().filter(|&&x| x < 0.0).map(|&x| n23 * (x + 2.0 * sigma)).collect();
    let edge_u = s.values[..k].iter().map(|&x| n23 * (x - 2.0 * sigma)).collect();
    Ok(FluctuationSample {
        n,
        rho_theta: regime.rho_theta,
        sigma,
        supercritical,
        xi,
        tau,
        edge_u,
        lambda_1: s.values[0],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OutlierCensus {
    pub count_mid: usize,
    pub count_far: usize,
}

/// Eigenvalues beyond index 1 above the midpoint of `[2 sigma, rho]`, and all
/// eigenvalues beyond `rho (1 + n^{-1/3})`.
pub fn outlier_census(s: &Spectrum, theta: f64, sigma: f64, n: usize) -> Result<OutlierCensus> {
    let regime = regime_of(theta, sigma)?;
    if !regime.is_supercritical() {
        return Err(Error::Regime(format!("outlier census needs theta > sigma (theta = {theta}, sigma = {sigma})")));
    }
    let rho = regime.rho_theta()?;
    let mid = 2.0 * sigma + (rho - 2.0 * sigma) / 2.0;
    let far = rho * (1.0 + (n as f64).powf(-1.0 / 3.0));
    Ok(OutlierCensus {
        count_mid: s.values.iter().skip(1).filter(|&&x| x > mid).count(),
        count_far: s.values.iter().filter(|&&x| x > far).count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{deformation_matrix, regime_of, sample_deformed, EnsembleConfig, LawKind, SymmetryClass};

    #[test]
    fn swap_matrix() {
        let s = eigenvalues(&MatrixSample::real(2, vec![0.0, 1.0, 1.0, 0.0])).unwrap();
        assert!((s.values[0] - 1.0).abs() < 1e-14 && (s.values[1] + 1.0).abs() < 1e-14);
        assert!((trace_power(&s, 2) - 2.0).abs() < 1e-13);
        assert!(trace_power(&s, 3).abs() < 1e-13);
    }

    #[test]
    fn identity_power() {
        let s = eigenvalues(&MatrixSample::real(2, vec![1.0, 0.0, 0.0, 1.0])).unwrap();
        assert_eq!(trace_power(&s, 3), 2.0);
    }

    #[test]
    fn complex_two_by_two() {
        // [[0, i], [-i, 0]] has eigenvalues +-1
        let m = MatrixSample::complex(
            2,
            vec![
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(0.0, -1.0),
                Complex64::new(0.0, 0.0),
            ],
        );
        let s = eigenvalues(&m).unwrap();
        assert!((s.values[0] - 1.0).abs() < 1e-14 && (s.values[1] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn known_tridiagonal() {
        // path graph Laplacian-like: eigenvalues 2 cos(pi j / (n+1))
        let n = 12;
        let s = tridiagonal_eigenvalues(&vec![0.0; n], &vec![1.0; n - 1]).unwrap();
        for (j, v) in s.values.iter().enumerate() {
            let want = 2.0 * (std::f64::consts::PI * (j + 1) as f64 / (n + 1) as f64).cos();
            assert!((v - want).abs() < 1e-12);
        }
    }

    #[test]
    fn trace_and_power_routes_agree() {
        for sym in [SymmetryClass::ComplexHermitian, SymmetryClass::RealSymmetric] {
            let c = EnsembleConfig::new(30, 1.0, 2.0, sym, LawKind::Gaussian, 9).unwrap();
            let m = sample_deformed(&c, 0);
            let s = eigenvalues(&m).unwrap();
            assert_eq!(s.dim, 30);
            assert!(s.values.windows(2).all(|w| w[0] >= w[1]));
            assert!((s.sum() - m.trace()).abs() <= 1e-10 * 30.0 * m.max_abs_entry());
            for l in 1..=8 {
                let a = trace_power(&s, l);
                let b = trace_power_direct(&m, l);
                assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0), "L={l}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn interlacing_trivial_cases() {
        let n = 5;
        let deformed = eigenvalues(&deformation_matrix(n, 2.0).unwrap()).unwrap();
        let base = Spectrum::from_values(vec![0.0; n]);
        assert!(interlacing_check(&deformed, &base).unwrap().holds);
        assert!(interlacing_check(&base, &base).unwrap().holds);
        let short = Spectrum::from_values(vec![0.0; 4]);
        assert!(matches!(interlacing_check(&base, &short), Err(Error::DimensionMismatch { .. })));
        let bad = Spectrum::from_values(vec![0.0, 0.0, 0.0, 0.0, -1.0]);
        let r = interlacing_check(&bad, &base).unwrap();
        assert!(!r.holds && r.worst_index == Some(5));
    }

    #[test]
    fn fluctuation_examples() {
        let n = 100usize;
        let r = regime_of(2.0, 1.0).unwrap();
        let rho = 2.5;
        let s = Spectrum::from_values(vec![rho, 0.0, -1.0]);
        let f = rescaled_fluctuation(&s, &r, n, 1).unwrap();
        assert_eq!(f.leading_deviation().unwrap(), 0.0);
        let lam = rho * (1.0 + 1.0 / (2.0 * (n as f64).sqrt()));
        let f = rescaled_fluctuation(&Spectrum::from_values(vec![lam, 0.0]), &r, n, 1).unwrap();
        assert!((f.xi_1().unwrap() - 1.0).abs() < 1e-12);
        assert!((f.lambda_from_xi(f.xi_1().unwrap()).unwrap() - lam).abs() < 1e-15);

        let sub = regime_of(0.5, 1.0).unwrap();
        let f = rescaled_fluctuation(&Spectrum::from_values(vec![2.0, -2.0]), &sub, n, 1).unwrap();
        assert_eq!(f.edge_u, vec![0.0]);
        assert_eq!(f.tau, vec![0.0]);
        assert!(f.leading_deviation().is_err());
        assert!(rescaled_fluctuation(&s, &r, n, 4).is_err());
    }

    #[test]
    fn census_examples() {
        let mut v = vec![0.0; 10];
        v[0] = 2.5;
        let c = outlier_census(&Spectrum::from_values(v.clone()), 2.0, 1.0, 10).unwrap();
        assert_eq!(c.count_mid, 0);
        v[1] = 2.3;
        let c = outlier_census(&Spectrum::from_values(v), 2.0, 1.0, 10).unwrap();
        assert_eq!(c.count_mid, 1);
        assert!(outlier_census(&Spectrum::from_values(vec![1.0]), 1.0, 1.0, 1).is_err());
    }

    #[test]
    fn csv_export() {
        let mut buf = Vec::new();
        Spectrum::from_values(vec![-1.0, 1.5]).write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "index,lambda\n1,1.5\n2,-1\n");
    }
}
