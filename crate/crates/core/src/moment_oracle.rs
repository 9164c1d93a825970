//! Exact `E[Tr M^L]` for small `n` by summing over all closed paths, and the
//! leading-order predictors it is compared against.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::combinatorics::{binomial, catalan, ln_big};
use crate::ensembles::{EntryLaw, LawKind, SymmetryClass};
use crate::error::{Error, Result};
use crate::path_model::count_trajectories;
use crate::report::Check;

/// Largest `n^L` accepted by [`exact_trace_expectation`].
pub const PATH_SUM_LIMIT: u64 = 100_000_000;

/// Exact joint entry moments of a Wigner ensemble up to a fixed total order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentModel {
    pub symmetry: SymmetryClass,
    pub law: LawKind,
    pub sigma: f64,
    pub diag_sigma: f64,
    pub max_order: u32,
    /// `offdiag_joint[a][b] = E[W^a conj(W)^b]` for `a + b <= max_order`.
    pub offdiag_joint: Vec<Vec<f64>>,
    /// `diag_moments[r] = E[W_ii^r]`.
    pub diag_moments: Vec<f64>,
    pub beta_bound: f64,
}

/// `E[X^r]` of the law as an exact float (zero for odd `r`).
fn component_moment(law: &EntryLaw, r: u32) -> f64 {
    law.moment(r)
}

impl MomentModel {
    pub fn new(symmetry: SymmetryClass, law: LawKind, sigma: f64, diag_sigma: f64, max_order: u32) -> Self {
        let diag = EntryLaw::new(law, diag_sigma * diag_sigma);
        let k = max_order as usize;
        let mut joint = vec![vec![0.0; k + 1]; k + 1];
        match symmetry {
            SymmetryClass::RealSymmetric => {
                let w = EntryLaw::new(law, sigma * sigma);
                for a in 0..=k {
                    for b in 0..=k - a {
                        joint[a][b] = component_moment(&w, (a + b) as u32);
                    }
                }
            }
            SymmetryClass::ComplexHermitian => {
                // W = X + iY, X and Y independent with variance sigma^2 / 2
                let c = EntryLaw::new(law, sigma * sigma / 2.0);
                for a in 0..=k {
                    for b in 0..=k - a {
                        joint[a][b] = complex_joint(&c, a as u64, b as u64);
                    }
                }
            }
        }
        let diag_moments = (0..=max_order).map(|r| component_moment(&diag, r)).collect();
        let off_beta = match symmetry {
            SymmetryClass::RealSymmetric => EntryLaw::new(law, sigma * sigma),
            SymmetryClass::ComplexHermitian => EntryLaw::new(law, sigma * sigma / 2.0),
        };
        MomentModel {
            symmetry,
            law,
            sigma,
            diag_sigma,
            max_order,
            offdiag_joint: joint,
            diag_moments,
            beta_bound: off_beta.beta_bound(max_order.max(2) / 2).max(diag.beta_bound(max_order.max(2) / 2)),
        }
    }

    /// Model with `diag_sigma = sigma` and tables deep enough for `Tr M^L`.
    pub fn for_trace(symmetry: SymmetryClass, law: LawKind, sigma: f64, l: u32) -> Self {
        Self::new(symmetry, law, sigma, sigma, l)
    }

    pub fn joint(&self, a: u32, b: u32) -> Result<f64> {
        if a + b > self.max_order {
            return Err(Error::MomentOrder { order: a + b, max: self.max_order });
        }
        Ok(match self.symmetry {
            SymmetryClass::RealSymmetric => self.offdiag_joint[(a + b) as usize][0],
            SymmetryClass::ComplexHermitian => self.offdiag_joint[a as usize][b as usize],
        })
    }

    pub fn diag(&self, r: u32) -> Result<f64> {
        self.diag_moments
            .get(r as usize)
            .copied()
            .ok_or(Error::MomentOrder { order: r, max: self.max_order })
    }
}

/// `E[(X + iY)^a (X - iY)^b]` for iid symmetric components; always real.
fn complex_joint(c: &EntryLaw, a: u64, b: u64) -> f64 {
    let mut total = 0.0;
    for alpha in 0..=a {
        for beta in 0..=b {
            let rx = (alpha + beta) as u32;
            let ry = (a - alpha + b - beta) as u32;
            if rx % 2 == 1 || ry % 2 == 1 {
                continue;
            }
            // i^{a-alpha} (-i)^{b-beta} = i^{ry} (-1)^{b-beta}; ry even so i^{ry} = (-1)^{ry/2}
            let sign = if ((ry / 2) as u64 + (b - beta)) % 2 == 0 { 1.0 } else { -1.0 };
            let coef = to_f64(binomial(a, alpha as i64)) * to_f64(binomial(b, beta as i64));
            total += sign * coef * c.moment(rx) * c.moment(ry);
        }
    }
    total
}

fn to_f64(x: num_bigint::BigUint) -> f64 {
    num_traits::ToPrimitive::to_f64(&x).unwrap_or(f64::INFINITY)
}

/// `E[(W/sqrt(n) + theta/n)^a (conj(W)/sqrt(n) + theta/n)^b]` for one entry.
pub fn edge_moment(model: &MomentModel, a: u32, b: u32, is_diagonal: bool, theta: f64, n: usize) -> Result<f64> {
    if a + b == 0 {
        return Err(Error::Domain("edge moment needs a + b >= 1".into()));
    }
    let c = theta / n as f64;
    let scale = 1.0 / (n as f64).sqrt();
    let mut total = 0.0;
    for alpha in 0..=a {
        for beta in 0..=b {
            let j = if is_diagonal { model.diag(alpha + beta)? } else { model.joint(alpha, beta)? };
            if j == 0.0 {
                continue;
            }
            let coef = to_f64(binomial(a as u64, alpha as i64)) * to_f64(binomial(b as u64, beta as i64));
            total += coef * c.powi((a - alpha + b - beta) as i32) * scale.powi((alpha + beta) as i32) * j;
        }
    }
    Ok(total)
}

/// Neumaier compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

struct PathSum<'a> {
    n: usize,
    len: usize,
    /// `off[a][b]`, `diag[r]`: precomputed edge moments.
    off: &'a [Vec<f64>],
    diag: &'a [f64],
    /// Directed counts per unordered edge `(i <= j)`: `(i -> j, j -> i)`.
    counts: Vec<(u32, u32)>,
    touched: Vec<usize>,
    path: Vec<usize>,
    acc: Neumaier,
}

impl PathSum<'_> {
    fn index(&self, i: usize, j: usize) -> usize {
        i.min(j) * self.n + i.max(j)
    }

    fn step(&mut self, i: usize, j: usize) {
        let e = self.index(i, j);
        let c = &mut self.counts[e];
        if c.0 + c.1 == 0 {
            self.touched.push(e);
        }
        if i <= j {
            c.0 += 1;
        } else {
            c.1 += 1;
        }
    }

    fn unstep(&mut self, i: usize, j: usize) {
        let e = self.index(i, j);
        let c = &mut self.counts[e];
        if i <= j {
            c.0 -= 1;
        } else {
            c.1 -= 1;
        }
        if c.0 + c.1 == 0 {
            self.touched.pop();
        }
    }

    fn weight(&self) -> f64 {
        let mut w = 1.0;
        for &e in &self.touched {
            let (a, b) = self.counts[e];
            let (i, j) = (e / self.n, e % self.n);
            w *= if i == j { self.diag[(a + b) as usize] } else { self.off[a as usize][b as usize] };
            if w == 0.0 {
                break;
            }
        }
        w
    }

    fn walk(&mut self, depth: usize) {
        let last = self.path[depth - 1];
        if depth == self.len {
            let first = self.path[0];
            self.step(last, first);
            let w = self.weight();
            self.acc.add(w);
            self.unstep(last, first);
            return;
        }
        for v in 0..self.n {
            self.step(last, v);
            self.path[depth] = v;
            self.walk(depth + 1);
            self.unstep(last, v);
        }
    }
}

/// `E[Tr M^L]` summed over all `n^L` closed paths, each weighted by the
/// product over its unordered edges of [`edge_moment`].
pub fn exact_trace_expectation(n: usize, l: u32, model: &MomentModel, theta: f64) -> Result<f64> {
    if n == 0 || l == 0 {
        return Err(Error::InvalidConfig("need n >= 1 and L >= 1".into()));
    }
    let size = (n as u64).checked_pow(l).unwrap_or(u64::MAX);
    if size > PATH_SUM_LIMIT {
        return Err(Error::SizeGuard { what: format!("path sum with n^L = {n}^{l}"), limit: PATH_SUM_LIMIT });
    }
    if l > model.max_order {
        return Err(Error::MomentOrder { order: l, max: model.max_order });
    }
    let lu = l as usize;
    let mut off = vec![vec![0.0; lu + 1]; lu + 1];
    for a in 0..=lu {
        for b in 0..=lu - a {
            if a + b > 0 {
                off[a][b] = edge_moment(model, a as u32, b as u32, false, theta, n)?;
            }
        }
    }
    let diag: Vec<f64> = (0..=lu)
        .map(|r| if r == 0 { Ok(1.0) } else { edge_moment(model, r as u32, 0, true, theta, n) })
        .collect::<Result<_>>()?;
    let partials: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i0| {
            let mut ps = PathSum {
                n,
                len: lu,
                off: &off,
                diag: &diag,
                counts: vec![(0, 0); n * n],
                touched: Vec::with_capacity(lu),
                path: vec![0; lu],
                acc: Neumaier::default(),
            };
            ps.path[0] = i0;
            ps.walk(1);
            ps.acc.value()
        })
        .collect();
    let mut total = Neumaier::default();
    for p in partials {
        total.add(p);
    }
    Ok(total.value())
}

/// The leading-order quantities for `Tr M^{2s}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticPredictions {
    pub s: u64,
    pub theta: f64,
    pub sigma: f64,
    pub n: u64,
    pub rho_theta: Option<f64>,
    /// `sum_{l even > 0} T_{m,l} theta^l sigma^{2m} exp(-(l+m)^2 / 2n)`.
    pub s_marked: f64,
    /// `s_marked / rho^{2s}`, tending to `1 - sigma^2/theta^2` above the transition.
    pub marked_ratio: Option<f64>,
    pub target_marked: Option<f64>,
    pub target_unmarked: Option<f64>,
    pub target_total: Option<f64>,
    /// `n T_{s,0} sigma^{2s}` and its Stirling form `n (2 sigma)^{2s} / (sqrt(pi) s^{3/2})`.
    pub even_term: f64,
    pub even_stirling: f64,
    /// `sum_{l even > 0} T_{m,l} theta^l sigma^{2m} / (2 sigma)^{2s}`.
    pub edge_ratio: f64,
    pub critical_target: f64,
    pub subcritical_target: f64,
}

pub fn asymptotic_predictions(s: u64, theta: f64, sigma: f64, n: u64) -> Result<AsymptoticPredictions> {
    if s == 0 || !(sigma > 0.0) || !(theta >= 0.0) || n == 0 {
        return Err(Error::InvalidConfig("need s >= 1, sigma > 0, theta >= 0, n >= 1".into()));
    }
    let rho = (theta > 0.0).then(|| theta + sigma * sigma / theta);
    let two_s = 2 * s;
    // log-space terms; theta = 0 makes every l > 0 term vanish
    let mut s_marked = Neumaier::default();
    let mut marked_scaled = Neumaier::default();
    let mut edge = Neumaier::default();
    if theta > 0.0 {
        for l in (2..=two_s).step_by(2) {
            let m = (two_s - l) / 2;
            let ln_t = ln_big(&count_trajectories(m, l));
            let ln_w = ln_t + l as f64 * theta.ln() + 2.0 * m as f64 * sigma.ln();
            let damp = -(((l + m) * (l + m)) as f64) / (2.0 * n as f64);
            s_marked.add((ln_w + damp).exp());
            if let Some(r) = rho {
                marked_scaled.add((ln_w + damp - two_s as f64 * r.ln()).exp());
            }
            edge.add((ln_w - two_s as f64 * (2.0 * sigma).ln()).exp());
        }
    }
    let ln_cat = ln_big(&catalan(s));
    let p2s = |x: f64| x.powi(two_s as i32);
    Ok(AsymptoticPredictions {
        s,
        theta,
        sigma,
        n,
        rho_theta: rho,
        s_marked: s_marked.value(),
        marked_ratio: rho.map(|_| marked_scaled.value()),
        target_marked: rho.map(|r| p2s(r) * (1.0 - sigma * sigma / (theta * theta))),
        target_unmarked: rho.map(|r| p2s(r) * sigma * sigma / (theta * theta)),
        target_total: rho.map(p2s),
        even_term: n as f64 * (ln_cat + two_s as f64 * sigma.ln()).exp(),
        even_stirling: n as f64 * p2s(2.0 * sigma) / (std::f64::consts::PI.sqrt() * (s as f64).powf(1.5)),
        edge_ratio: edge.value(),
        critical_target: 0.5,
        subcritical_target: 0.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniversalityRow {
    pub n: usize,
    pub first: f64,
    pub second: f64,
    pub delta: f64,
}

/// Relative oracle difference between two entry models over `n_list`; must be
/// finite and strictly decreasing in `n` (or identically zero).
pub fn trace_universality_probe(
    n_list: &[usize],
    l: u32,
    theta: f64,
    models: (&MomentModel, &MomentModel),
) -> Result<(Vec<UniversalityRow>, Check)> {
    let rows = n_list
        .iter()
        .map(|&n| {
            let first = exact_trace_expectation(n, l, models.0, theta)?;
            let second = exact_trace_expectation(n, l, models.1, theta)?;
            let delta = if first == second { 0.0 } else { (first - second).abs() / first.abs() };
            Ok(UniversalityRow { n, first, second, delta })
        })
        .collect::<Result<Vec<_>>>()?;
    let finite = rows.iter().all(|r| r.delta.is_finite());
    let all_zero = rows.iter().all(|r| r.delta == 0.0);
    let decreasing = rows.windows(2).all(|w| w[1].delta < w[0].delta);
    let check = Check::new(
        "trace_universality",
        json!({
            "L": l,
            "theta": theta,
            "n": n_list,
            "laws": [models.0.law.as_str(), models.1.law.as_str()],
            "symmetry": models.0.symmetry.as_str(),
            "delta": rows.iter().map(|r| r.delta).collect::<Vec<_>>(),
        }),
        finite && (all_zero || decreasing),
    )
    .value(rows.last().map(|r| r.delta).unwrap_or(0.0));
    Ok((rows, check))
}

/// JSON record `{n, L, theta, sigma, law, symmetry, value}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRecord {
    pub n: usize,
    #[serde(rename = "L")]
    pub l: u32,
    pub theta: f64,
    pub sigma: f64,
    pub law: String,
    pub symmetry: String,
    pub value: f64,
}

pub fn oracle_record(n: usize, l: u32, model: &MomentModel, theta: f64) -> Result<OracleRecord> {
    Ok(OracleRecord {
        n,
        l,
        theta,
        sigma: model.sigma,
        law: model.law.as_str().into(),
        symmetry: model.symmetry.as_str().into(),
        value: exact_trace_expectation(n, l, model, theta)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const C: SymmetryClass = SymmetryClass::ComplexHermitian;
    const R: SymmetryClass = SymmetryClass::RealSymmetric;

    #[test]
    fn model_invariants() {
        for sym in [C, R] {
            for law in LawKind::ALL {
                let m = MomentModel::new(sym, law, 1.3, 1.0, 8);
                assert_eq!(m.joint(1, 0).unwrap(), 0.0);
                assert!((m.joint(1, 1).unwrap() - 1.69).abs() < 1e-12);
                for a in 0..=8u32 {
                    for b in 0..=8 - a {
                        if (a + b) % 2 == 1 {
                            assert_eq!(m.joint(a, b).unwrap(), 0.0);
                        }
                    }
                }
                assert!(m.joint(5, 4).is_err());
                assert!(m.beta_bound.is_finite());
            }
        }
        let g = MomentModel::new(C, LawKind::Gaussian, 1.5, 1.5, 12);
        for a in 0..=6u32 {
            for b in 0..=6u32 {
                let want = if a == b { (1..=a).product::<u32>() as f64 * 1.5f64.powi(2 * a as i32) } else { 0.0 };
                assert!((g.joint(a, b).unwrap() - want).abs() < 1e-9 * want.max(1.0), "({a},{b})");
            }
        }
    }

    #[test]
    fn edge_moment_examples() {
        let m = MomentModel::new(C, LawKind::Gaussian, 1.0, 1.0, 4);
        let (theta, n) = (2.0, 5usize);
        assert!((edge_moment(&m, 1, 0, false, theta, n).unwrap() - 0.4).abs() < 1e-15);
        assert!((edge_moment(&m, 1, 1, false, theta, n).unwrap() - (0.2 + 4.0 / 25.0)).abs() < 1e-15);
        assert!((edge_moment(&m, 2, 0, false, theta, n).unwrap() - 4.0 / 25.0).abs() < 1e-15);
        assert!(edge_moment(&m, 0, 0, false, theta, n).is_err());
        assert!(edge_moment(&m, 3, 2, false, theta, n).is_err());
        // theta = 0 reduces to scaled Wigner moments
        assert!((edge_moment(&m, 2, 2, false, 0.0, n).unwrap() - 2.0 / 25.0).abs() < 1e-15);
    }

    #[test]
    fn trace_examples() {
        for sym in [C, R] {
            for law in LawKind::ALL {
                let m = MomentModel::for_trace(sym, law, 1.0, 5);
                assert!((exact_trace_expectation(3, 1, &m, 2.0).unwrap() - 2.0).abs() < 1e-14);
                assert!((exact_trace_expectation(3, 2, &m, 2.0).unwrap() - 7.0).abs() < 1e-13);
                assert_eq!(exact_trace_expectation(4, 5, &m, 0.0).unwrap(), 0.0);
                assert_eq!(exact_trace_expectation(3, 3, &m, 0.0).unwrap(), 0.0);
            }
        }
        let m = MomentModel::for_trace(C, LawKind::Gaussian, 1.0, 2);
        assert!(matches!(exact_trace_expectation(10_001, 2, &m, 0.0), Err(Error::SizeGuard { .. })));
        assert!(matches!(exact_trace_expectation(3, 4, &m, 0.0), Err(Error::MomentOrder { .. })));
    }

    #[test]
    fn gue_fourth_moment() {
        // E Tr (W/sqrt n)^4 = 2 n + 1/n for GUE with unit variance
        let m = MomentModel::for_trace(C, LawKind::Gaussian, 1.0, 4);
        for n in 2..=5usize {
            let want = 2.0 * n as f64 + 1.0 / n as f64;
            assert!((exact_trace_expectation(n, 4, &m, 0.0).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn predictor_ratios() {
        let p = asymptotic_predictions(60, 2.0, 1.0, 1_000_000).unwrap();
        let r = p.marked_ratio.unwrap();
        assert!((0.70..=0.80).contains(&r), "{r}");
        assert!((p.target_marked.unwrap() / p.target_total.unwrap() - 0.75).abs() < 1e-12);
        let sub = asymptotic_predictions(60, 0.5, 1.0, 1_000_000).unwrap();
        assert!(sub.edge_ratio <= 0.05);
        let zero = asymptotic_predictions(3, 0.0, 1.0, 10).unwrap();
        assert!(zero.rho_theta.is_none() && zero.edge_ratio == 0.0);
        assert!((zero.even_term - 50.0).abs() < 1e-9);
    }

    #[test]
    fn universality_examples() {
        let g = MomentModel::for_trace(C, LawKind::Gaussian, 1.0, 4);
        let r = MomentModel::for_trace(C, LawKind::Rademacher, 1.0, 4);
        let (rows, check) = trace_universality_probe(&[3, 4, 5], 2, 2.0, (&g, &r)).unwrap();
        assert!(rows.iter().all(|x| x.delta == 0.0) && check.pass);
        let (rows, _) = trace_universality_probe(&[3, 4], 4, 2.0, (&g, &g)).unwrap();
        assert!(rows.iter().all(|x| x.delta == 0.0));
    }
}
