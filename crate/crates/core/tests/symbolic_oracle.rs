//! `E Tr M^L` by expanding the matrix product as a polynomial in the entry
//! variables and integrating monomial by monomial; compared with the path-sum
//! oracle.

use std::collections::BTreeMap;

use num_complex::Complex64;
use wigner_core::ensembles::{LawKind, SymmetryClass};
use wigner_core::moment_oracle::{edge_moment, exact_trace_expectation, MomentModel};

/// Exponent vector -> coefficient.
type Poly = BTreeMap<Vec<u8>, Complex64>;

fn mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = Poly::new();
    for (ea, ca) in a {
        for (eb, cb) in b {
            let e: Vec<u8> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
            *out.entry(e).or_default() += ca * cb;
        }
    }
    out
}

fn add(a: &mut Poly, b: &Poly) {
    for (e, c) in b {
        *a.entry(e.clone()).or_default() += c;
    }
}

/// `E x^k` for one real variable of the given law and variance.
fn moment(law: LawKind, var: f64, k: u32) -> f64 {
    if k % 2 == 1 {
        return 0.0;
    }
    let sd = var.sqrt();
    match law {
        LawKind::Gaussian => sd.powi(k as i32) * (1..k).step_by(2).map(|j| j as f64).product::<f64>(),
        LawKind::Rademacher => sd.powi(k as i32),
        LawKind::UniformSymmetric => (sd * 3f64.sqrt()).powi(k as i32) / (k + 1) as f64,
    }
}

fn symbolic(n: usize, l: u32, sym: SymmetryClass, law: LawKind, sigma: f64, theta: f64) -> f64 {
    // variables: diagonal d_i, then (x_e, y_e) for each i < j
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let nv = n + 2 * pairs.len();
    let var = |k: usize, c: f64| -> Poly {
        let mut e = vec![0u8; nv];
        e[k] = 1;
        Poly::from([(e, Complex64::new(c, 0.0))])
    };
    let constant = |c: f64| Poly::from([(vec![0u8; nv], Complex64::new(c, 0.0))]);
    let sn = (n as f64).sqrt();
    let shift = theta / n as f64;
    let mut m = vec![vec![Poly::new(); n]; n];
    for i in 0..n {
        let mut p = var(i, 1.0 / sn);
        add(&mut p, &constant(shift));
        m[i][i] = p;
    }
    for (q, &(i, j)) in pairs.iter().enumerate() {
        let (xk, yk) = (n + 2 * q, n + 2 * q + 1);
        let mut upper = var(xk, 1.0 / sn);
        add(&mut upper, &constant(shift));
        let mut lower = upper.clone();
        if sym == SymmetryClass::ComplexHermitian {
            let mut e = vec![0u8; nv];
            e[yk] = 1;
            upper.insert(e.clone(), Complex64::new(0.0, 1.0 / sn));
            lower.insert(e, Complex64::new(0.0, -1.0 / sn));
        }
        m[i][j] = upper;
        m[j][i] = lower;
    }
    let mut power = m.clone();
    for _ in 1..l {
        let mut next = vec![vec![Poly::new(); n]; n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let t = mul(&power[i][k], &m[k][j]);
                    add(&mut next[i][j], &t);
                }
            }
        }
        power = next;
    }
    let off_var = match sym {
        SymmetryClass::ComplexHermitian => sigma * sigma / 2.0,
        SymmetryClass::RealSymmetric => sigma * sigma,
    };
    let mut total = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for (e, c) in &power[i][i] {
            let mut w = 1.0;
            for (k, &p) in e.iter().enumerate() {
                let v = if k < n { sigma * sigma } else { off_var };
                w *= moment(law, v, p as u32);
            }
            total += c * w;
        }
    }
    assert!(total.im.abs() < 1e-12 * total.re.abs().max(1.0));
    total.re
}

#[test]
fn path_sum_matches_symbolic_expansion() {
    for n in 1..=3 {
        for l in 1..=4 {
            for sym in [SymmetryClass::ComplexHermitian, SymmetryClass::RealSymmetric] {
                for law in LawKind::ALL {
                    for (sigma, theta) in [(1.0, 0.0), (1.0, 2.0), (0.7, 0.5)] {
                        let model = MomentModel::new(sym, law, sigma, sigma, l);
                        let exact = exact_trace_expectation(n, l, &model, theta).unwrap();
                        let sym_val = symbolic(n, l, sym, law, sigma, theta);
                        let tol = 1e-12 * sym_val.abs().max(1e-300);
                        assert!(
                            (exact - sym_val).abs() <= tol.max(1e-14),
                            "n={n} L={l} {sym} {law} sigma={sigma} theta={theta}: {exact} vs {sym_val}"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn odd_traces_vanish_without_deformation() {
    for n in 1..=4 {
        for l in [1, 3, 5] {
            for sym in [SymmetryClass::ComplexHermitian, SymmetryClass::RealSymmetric] {
                for law in LawKind::ALL {
                    let model = MomentModel::new(sym, law, 1.0, 1.0, l);
                    assert_eq!(exact_trace_expectation(n, l, &model, 0.0).unwrap(), 0.0);
                }
            }
        }
    }
}

#[test]
fn edge_moment_limits() {
    let model = MomentModel::new(SymmetryClass::RealSymmetric, LawKind::Gaussian, 1.0, 1.0, 6);
    // theta = 0: plain moments of W_ij / sqrt(n)
    let n = 4;
    let e = edge_moment(&model, 2, 2, false, 0.0, n).unwrap();
    assert!((e - 3.0 / 16.0).abs() < 1e-15);
    // sigma -> 0: (theta / n)^{a + b}
    let tiny = MomentModel::new(SymmetryClass::RealSymmetric, LawKind::Gaussian, 1e-9, 1e-9, 6);
    let e = edge_moment(&tiny, 2, 1, false, 2.0, n).unwrap();
    assert!((e - 0.125).abs() < 1e-12);
}
