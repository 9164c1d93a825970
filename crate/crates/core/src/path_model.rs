//! Closed vertex walks, marked instants, trajectories and path types.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::Zero;
use serde::Serialize;

use crate::combinatorics::{binomial, factorial};
use crate::error::{Error, Result};

/// Largest `L` accepted by [`enumerate_trajectories`].
pub const ENUMERATION_LIMIT: u64 = 30;

/// Unordered edge key.
pub fn edge(a: u32, b: u32) -> (u32, u32) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// `i_0, ..., i_L` with `i_L = i_0`, vertices in `1..=ambient_n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct ClosedPath {
    vertices: Vec<u32>,
    ambient_n: u32,
}

impl ClosedPath {
    pub fn new(vertices: Vec<u32>, ambient_n: u32) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::Domain("a closed path needs at least one step".into()));
        }
        if vertices.first() != vertices.last() {
            return Err(Error::Domain(format!(
                "path is not closed: starts at {} and ends at {}",
                vertices[0],
                vertices[vertices.len() - 1]
            )));
        }
        if let Some(&v) = vertices.iter().find(|&&v| v == 0 || v > ambient_n) {
            return Err(Error::Domain(format!("vertex {v} outside 1..={ambient_n}")));
        }
        Ok(ClosedPath { vertices, ambient_n })
    }

    /// Ambient dimension set to the largest vertex.
    pub fn from_vertices(vertices: Vec<u32>) -> Result<Self> {
        let n = vertices.iter().copied().max().unwrap_or(0);
        Self::new(vertices, n)
    }

    pub fn with_ambient(&self, ambient_n: u32) -> Result<Self> {
        Self::new(self.vertices.clone(), ambient_n)
    }

    pub fn vertices(&self) -> &[u32] {
        &self.vertices
    }

    pub fn ambient_n(&self) -> u32 {
        self.ambient_n
    }

    /// Number of steps `L`.
    pub fn len(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn origin(&self) -> u32 {
        self.vertices[0]
    }

    /// Edge traversed at instant `j` (1-based).
    pub fn edge_at(&self, j: usize) -> (u32, u32) {
        edge(self.vertices[j - 1], self.vertices[j])
    }
}

impl fmt::Display for ClosedPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.vertices.iter().map(u32::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

impl FromStr for ClosedPath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let vertices = s
            .trim()
            .trim_start_matches('{')
            .trim_end_matches('}')
            .split(',')
            .map(|t| t.trim().parse::<u32>().map_err(|e| Error::Parse(format!("vertex `{t}`: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        ClosedPath::from_vertices(vertices)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Instant {
    Marked,
    Unmarked,
}

/// Instant `j` is marked iff the unordered edge it uses has been traversed an
/// odd number of times up to and including `j`.
pub fn classify_instants(p: &ClosedPath) -> Vec<Instant> {
    let mark = |odd: bool| if odd { Instant::Marked } else { Instant::Unmarked };
    if p.len() <= 64 {
        // linear scan beats hashing on short paths
        let mut counts: Vec<((u32, u32), u32)> = Vec::with_capacity(p.len());
        return (1..=p.len())
            .map(|j| {
                let e = p.edge_at(j);
                let c = match counts.iter_mut().find(|(k, _)| *k == e) {
                    Some((_, c)) => c,
                    None => {
                        counts.push((e, 0));
                        &mut counts.last_mut().unwrap().1
                    }
                };
                *c += 1;
                mark(*c % 2 == 1)
            })
            .collect();
    }
    let mut counts: HashMap<(u32, u32), u32> = HashMap::new();
    (1..=p.len())
        .map(|j| {
            let c = counts.entry(p.edge_at(j)).or_insert(0);
            *c += 1;
            mark(*c % 2 == 1)
        })
        .collect()
}

/// A nonnegative walk of `+-1` steps started at 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Trajectory {
    steps: Vec<i8>,
}

impl Trajectory {
    pub fn new(steps: Vec<i8>) -> Result<Self> {
        let mut x = 0i64;
        for (t, &s) in steps.iter().enumerate() {
            if s != 1 && s != -1 {
                return Err(Error::Domain(format!("step {s} at instant {} is not +-1", t + 1)));
            }
            x += s as i64;
            if x < 0 {
                return Err(Error::Domain(format!("trajectory goes negative at instant {}", t + 1)));
            }
        }
        Ok(Trajectory { steps })
    }

    pub fn steps(&self) -> &[i8] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn end_level(&self) -> i64 {
        self.steps.iter().map(|&s| s as i64).sum()
    }

    /// Number of down steps.
    pub fn m(&self) -> usize {
        self.steps.iter().filter(|&&s| s < 0).count()
    }

    pub fn class(&self) -> PathClass {
        PathClass { m: self.m() as u64, l: self.end_level() as u64 }
    }

    /// `x(0), ..., x(L)`.
    pub fn levels(&self) -> Vec<i64> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        let mut x = 0;
        out.push(0);
        for &s in &self.steps {
            x += s as i64;
            out.push(x);
        }
        out
    }

    pub fn last_step_up(&self) -> bool {
        self.steps.last() == Some(&1)
    }
}

impl fmt::Display for Trajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &s in &self.steps {
            f.write_str(if s > 0 { "U" } else { "D" })?;
        }
        Ok(())
    }
}

impl FromStr for Trajectory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let steps = s
            .trim()
            .chars()
            .map(|c| match c {
                'U' | 'u' => Ok(1),
                'D' | 'd' => Ok(-1),
                other => Err(Error::Parse(format!("trajectory symbol `{other}`"))),
            })
            .collect::<Result<Vec<i8>>>()?;
        Trajectory::new(steps)
    }
}

/// `m` unmarked instants, end level `l`, length `l + 2m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct PathClass {
    pub m: u64,
    pub l: u64,
}

impl PathClass {
    pub fn length(&self) -> u64 {
        self.l + 2 * self.m
    }
}

pub fn trajectory_of(p: &ClosedPath) -> Trajectory {
    let steps: Vec<i8> = classify_instants(p)
        .into_iter()
        .map(|i| if i == Instant::Marked { 1 } else { -1 })
        .collect();
    // an unmarked instant closes an edge opened earlier, so the walk stays >= 0
    let t = Trajectory { steps };
    debug_assert!(t.levels().iter().all(|&x| x >= 0));
    t
}

/// All of `T_{m,l}` in lexicographic order (`U < D`).
pub fn enumerate_trajectories(m: u64, l: u64) -> Result<Vec<Trajectory>> {
    let len = l + 2 * m;
    if len > ENUMERATION_LIMIT {
        return Err(Error::SizeGuard {
            what: format!("enumeration of T_{{{m},{l}}} (length {len})"),
            limit: ENUMERATION_LIMIT,
        });
    }
    let mut out = Vec::new();
    let mut steps = Vec::with_capacity(len as usize);
    fn rec(steps: &mut Vec<i8>, x: i64, ups: u64, downs: u64, m: u64, l: u64, out: &mut Vec<Trajectory>) {
        if ups == l + m && downs == m {
            out.push(Trajectory { steps: steps.clone() });
            return;
        }
        if ups < l + m {
            steps.push(1);
            rec(steps, x + 1, ups + 1, downs, m, l, out);
            steps.pop();
        }
        if downs < m && x > 0 {
            steps.push(-1);
            rec(steps, x - 1, ups, downs + 1, m, l, out);
            steps.pop();
        }
    }
    rec(&mut steps, 0, 0, 0, m, l, &mut out);
    Ok(out)
}

/// `|T_{m,l}| = C(L, l+m) - C(L, m-1)`; zero for negative indices.
pub fn count_trajectories_signed(m: i64, l: i64) -> BigUint {
    if m < 0 || l < 0 {
        return BigUint::zero();
    }
    let len = (l + 2 * m) as u64;
    binomial(len, l + m) - binomial(len, m - 1)
}

pub fn count_trajectories(m: u64, l: u64) -> BigUint {
    count_trajectories_signed(m as i64, l as i64)
}

/// `L! (l+1) / ((l+m+1)! m!)`.
pub fn count_trajectories_factorial(m: u64, l: u64) -> BigUint {
    let len = l + 2 * m;
    factorial(len) * BigUint::from(l + 1) / (factorial(l + m + 1) * factorial(m))
}

/// `(T_{m,l-1}, T_{m-1,l+1})`: members of `T_{m,l}` ending up and down.
pub fn last_step_split(m: u64, l: u64) -> Result<(BigUint, BigUint)> {
    if l + 2 * m == 0 {
        return Err(Error::Domain("last_step_split needs l + 2m >= 1".into()));
    }
    let (m, l) = (m as i64, l as i64);
    Ok((count_trajectories_signed(m, l - 1), count_trajectories_signed(m - 1, l + 1)))
}

/// `N_0, ..., N_{l+m}`: vertices by number of marked occurrences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PathType {
    pub counts: Vec<u64>,
}

impl PathType {
    pub fn n(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `sum_k k N_k`, the number of marked instants.
    pub fn marked_total(&self) -> u64 {
        self.counts.iter().enumerate().map(|(k, &c)| k as u64 * c).sum()
    }

    /// `M = sum_{k>=2} (k-1) N_k`.
    pub fn self_intersections(&self) -> u64 {
        self.counts.iter().enumerate().skip(2).map(|(k, &c)| (k as u64 - 1) * c).sum()
    }

    /// `M_1 = sum_{k>=11} N_k`.
    pub fn m1(&self) -> u64 {
        self.counts.iter().skip(11).sum()
    }

    /// `M_2 = sum_{k=2..=10} N_k`.
    pub fn m2(&self) -> u64 {
        self.counts.iter().skip(2).take(9).sum()
    }

    pub fn max_type(&self) -> usize {
        self.counts.iter().rposition(|&c| c > 0).filter(|&k| k > 0).unwrap_or(0)
    }
}

/// Marked occurrences per vertex.
fn marked_multiplicity(p: &ClosedPath) -> BTreeMap<u32, u64> {
    let mut mult = BTreeMap::new();
    for (j, inst) in classify_instants(p).into_iter().enumerate() {
        if inst == Instant::Marked {
            *mult.entry(p.vertices[j + 1]).or_insert(0) += 1;
        }
    }
    mult
}

pub fn path_type(p: &ClosedPath) -> PathType {
    let mult = marked_multiplicity(p);
    let traj = trajectory_of(p);
    let lm = (traj.len() - traj.m()) as usize;
    let mut counts = vec![0u64; lm + 1];
    for &k in mult.values() {
        counts[k as usize] += 1;
    }
    counts[0] = p.ambient_n as u64 - mult.len() as u64;
    PathType { counts }
}

/// No marked instant revisits a vertex already seen at an earlier marked instant.
pub fn is_simple(p: &ClosedPath) -> bool {
    marked_multiplicity(p).values().all(|&k| k <= 1)
}

/// Marked instants `j` with `i_j = i_0`.
pub fn origin_marked_instants(p: &ClosedPath) -> Vec<usize> {
    classify_instants(p)
        .into_iter()
        .enumerate()
        .filter(|&(j, inst)| inst == Instant::Marked && p.vertices[j + 1] == p.origin())
        .map(|(j, _)| j + 1)
        .collect()
}

pub fn is_origin_marked(p: &ClosedPath) -> bool {
    !origin_marked_instants(p).is_empty()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VertexStats {
    pub max_type: usize,
    pub max_marked_out_degree: usize,
    pub nonclosed: BTreeSet<u32>,
    pub odd_edge_count: usize,
}

/// Self-intersection and closing statistics of a path.
///
/// A vertex of self-intersection is non-closed when, at some unmarked instant
/// leaving it, more than one incident edge is still open (odd count so far).
pub fn vertex_stats(p: &ClosedPath) -> VertexStats {
    let inst = classify_instants(p);
    let mult = marked_multiplicity(p);
    let max_type = mult.values().copied().max().unwrap_or(0) as usize;

    let mut out_deg: HashMap<u32, usize> = HashMap::new();
    let mut counts: HashMap<(u32, u32), u32> = HashMap::new();
    let mut nonclosed = BTreeSet::new();
    for j in 1..=p.len() {
        let v = p.vertices[j - 1];
        match inst[j - 1] {
            Instant::Marked => *out_deg.entry(v).or_insert(0) += 1,
            Instant::Unmarked => {
                if mult.get(&v).copied().unwrap_or(0) >= 2 {
                    let open = counts
                        .iter()
                        .filter(|&(&(a, b), &c)| c % 2 == 1 && (a == v || b == v))
                        .count();
                    if open > 1 {
                        nonclosed.insert(v);
                    }
                }
            }
        }
        *counts.entry(p.edge_at(j)).or_insert(0) += 1;
    }
    VertexStats {
        max_type,
        max_marked_out_degree: out_deg.values().copied().max().unwrap_or(0),
        nonclosed,
        odd_edge_count: counts.values().filter(|&&c| c % 2 == 1).count(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Instant::{Marked as M, Unmarked as U};

    fn path(s: &str) -> ClosedPath {
        s.parse().unwrap()
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify_instants(&path("1,2,1")), vec![M, U]);
        assert_eq!(classify_instants(&path("1,2,3,1")), vec![M, M, M]);
        let c = classify_instants(&path("1,2,1,3,4,5,6,3,1"));
        let marked: Vec<usize> = (1..=8).filter(|&j| c[j - 1] == M).collect();
        assert_eq!(marked, vec![1, 3, 4, 5, 6, 7]);
    }

    #[test]
    fn trajectory_examples() {
        let t = trajectory_of(&path("1,2,1"));
        assert_eq!((t.to_string(), t.end_level()), ("UD".to_string(), 0));
        let t = trajectory_of(&path("1,2,3,1"));
        assert_eq!((t.to_string(), t.end_level()), ("UUU".to_string(), 3));
        let t = trajectory_of(&path("1,2,1,3,4,5,6,3,1"));
        assert_eq!(t.to_string(), "UDUUUUUD");
        assert_eq!(t.class(), PathClass { m: 2, l: 4 });
    }

    #[test]
    fn enumeration_examples() {
        let show = |m, l| -> Vec<String> {
            enumerate_trajectories(m, l).unwrap().iter().map(|t| t.to_string()).collect()
        };
        assert_eq!(show(1, 0), vec!["UD"]);
        assert_eq!(show(1, 2), vec!["UUUD", "UUDU", "UDUU"]);
        assert_eq!(show(3, 0).len(), 5);
        assert!(matches!(enumerate_trajectories(16, 0), Err(Error::SizeGuard { .. })));
    }

    #[test]
    fn counts_and_closed_forms() {
        assert_eq!(count_trajectories(1, 2), BigUint::from(3u32));
        assert_eq!(count_trajectories(2, 2), BigUint::from(9u32));
        assert_eq!(count_trajectories(3, 0), BigUint::from(5u32));
        for m in 0..=7u64 {
            for l in 0..=(14 - 2 * m) {
                let c = count_trajectories(m, l);
                assert_eq!(c, count_trajectories_factorial(m, l));
                assert_eq!(c, BigUint::from(enumerate_trajectories(m, l).unwrap().len()));
                if l + 2 * m > 0 {
                    let (u, d) = last_step_split(m, l).unwrap();
                    assert_eq!(u + d, c);
                }
            }
        }
    }

    #[test]
    fn split_examples() {
        let (u, d) = last_step_split(1, 2).unwrap();
        assert_eq!((u, d), (BigUint::from(2u32), BigUint::from(1u32)));
        let (u, d) = last_step_split(3, 0).unwrap();
        assert_eq!((u, d), (BigUint::zero(), count_trajectories(2, 1)));
        let (u, d) = last_step_split(0, 4).unwrap();
        assert_eq!((u, d), (BigUint::from(1u32), BigUint::zero()));
        assert!(last_step_split(0, 0).is_err());
    }

    #[test]
    fn type_examples() {
        let t = path_type(&path("1,2,1").with_ambient(5).unwrap());
        assert_eq!(t.counts, vec![4, 1]);
        let t = path_type(&path("1,2,3,1").with_ambient(5).unwrap());
        assert_eq!(t.counts, vec![2, 3, 0, 0]);
        let t = path_type(&path("1,2,1,3,4,5,6,3,1"));
        assert_eq!(&t.counts[..3], &[1, 4, 1]);
        assert_eq!((t.n(), t.marked_total(), t.self_intersections()), (6, 6, 1));
        assert_eq!((t.m1(), t.m2(), t.max_type()), (0, 1, 2));
    }

    #[test]
    fn simple_examples() {
        assert!(is_simple(&path("1,2,3,1")));
        assert!(!is_simple(&path("1,2,1,2,1")));
        assert!(is_simple(&path("1,2,1")));
    }

    #[test]
    fn origin_marking() {
        assert!(is_origin_marked(&path("1,2,3,1")));
        assert!(!is_origin_marked(&path("1,2,1")));
        assert_eq!(origin_marked_instants(&path("4,5,6,3,1,2,1,3,4")), vec![8]);
    }

    #[test]
    fn vertex_stat_examples() {
        let s = vertex_stats(&path("1,2,1"));
        assert_eq!((s.max_type, s.odd_edge_count), (1, 0));
        assert!(s.nonclosed.is_empty());
        assert_eq!(vertex_stats(&path("1,2,3,1")).odd_edge_count, 3);
        let s = vertex_stats(&path("1,2,1,3,4,5,6,3,1"));
        assert_eq!(s.odd_edge_count, 4);
        assert_eq!(s.max_type, 2);
        // leaving 3 at instant 8, edges (13), (34), (36) are open
        assert_eq!(s.nonclosed, BTreeSet::from([3]));
        // star walk: 1 -> 2 -> 1 -> 3 -> 1 leaves 1 twice at marked instants
        assert_eq!(vertex_stats(&path("1,2,1,3,1")).max_marked_out_degree, 2);
    }

    #[test]
    fn parse_errors() {
        assert!("1,2,3".parse::<ClosedPath>().is_err());
        assert!("1,x,1".parse::<ClosedPath>().is_err());
        assert!(ClosedPath::new(vec![1, 7, 1], 3).is_err());
        assert!("UDD".parse::<Trajectory>().is_err());
        assert_eq!("UUD".parse::<Trajectory>().unwrap().to_string(), "UUD");
        assert_eq!(path("{1,2,1}").to_string(), "1,2,1");
    }
}
