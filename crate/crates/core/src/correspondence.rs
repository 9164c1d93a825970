//! The rotation taking last-step-down paths to marked-origin paths, the
//! accompanying trajectory surgery, two-path gluing and the `K_N` statistic.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::combinatorics::binomial;
use crate::error::{Error, Result};
use crate::path_model::{
    count_trajectories, count_trajectories_signed, is_origin_marked, trajectory_of, ClosedPath,
    Trajectory,
};
use crate::report::Check;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorrespondenceResult {
    pub image: ClosedPath,
    /// Cut instant `t`: the first traversal of the first edge of odd multiplicity.
    pub shift_k: usize,
    /// `x(t - 1)`: edges opened and not yet closed before the cut.
    pub level_p: i64,
}

/// Sorted list of unordered edges, one entry per traversal.
pub fn edge_multiset(p: &ClosedPath) -> Vec<(u32, u32)> {
    let mut out: Vec<_> = (1..=p.len()).map(|j| p.edge_at(j)).collect();
    out.sort_unstable();
    out
}

fn first_odd_instant(p: &ClosedPath) -> Option<usize> {
    let edges = edge_multiset(p);
    let odd = |e: (u32, u32)| {
        let lo = edges.partition_point(|&x| x < e);
        let hi = edges.partition_point(|&x| x <= e);
        (hi - lo) % 2 == 1
    };
    (1..=p.len()).find(|&j| odd(p.edge_at(j)))
}

/// Rotates `p` to start just after the first traversal of its first odd edge.
pub fn to_marked_origin(p: &ClosedPath) -> Result<CorrespondenceResult> {
    let x = trajectory_of(p);
    if x.end_level() == 0 {
        return Err(Error::Domain(format!("path {p} has no edge of odd multiplicity")));
    }
    if x.last_step_up() {
        return Err(Error::Domain(format!("path {p} ends with a marked (up) step")));
    }
    let t = first_odd_instant(p).expect("l > 0 implies an odd edge");
    let v = p.vertices();
    let len = p.len();
    let mut image = Vec::with_capacity(len + 1);
    image.extend_from_slice(&v[t..=len]);
    image.extend_from_slice(&v[1..=t]);
    Ok(CorrespondenceResult {
        image: ClosedPath::new(image, p.ambient_n())?,
        shift_k: t,
        level_p: x.levels()[t - 1],
    })
}

/// Inverse rotation; `shift_k = 0` is the identity.
pub fn from_marked_origin(r: &CorrespondenceResult) -> Result<ClosedPath> {
    let len = r.image.len();
    if r.shift_k == 0 {
        return Ok(r.image.clone());
    }
    if r.shift_k > len {
        return Err(Error::Domain(format!("shift {} exceeds path length {len}", r.shift_k)));
    }
    let v = r.image.vertices();
    let mut out = Vec::with_capacity(len + 1);
    out.extend_from_slice(&v[len - r.shift_k..=len]);
    out.extend_from_slice(&v[1..=len - r.shift_k]);
    let p = ClosedPath::new(out, r.image.ambient_n())?;
    match to_marked_origin(&p) {
        Ok(back) if back == *r => Ok(p),
        _ => Err(Error::Domain(format!(
            "image {} with shift {} and level {} is not produced by the correspondence",
            r.image, r.shift_k, r.level_p
        ))),
    }
}

/// First `t` with `x(t) = level` and `x(s) >= level` for every `s >= t`.
pub fn first_stable_hit(x: &Trajectory, level: i64) -> Option<usize> {
    let lv = x.levels();
    let mut candidate = None;
    for t in (0..lv.len()).rev() {
        if lv[t] < level {
            break;
        }
        if lv[t] == level {
            candidate = Some(t);
        }
    }
    candidate
}

/// Maps the trajectory `x'` of a correspondence image with level `p` and cut
/// `shift_k` into `T_{m-p, l+2p}`.
///
/// With `T = L - shift_k`, the steps of `x'` on `[T, L]` are reversed and
/// negated and the first of them is turned into an up step.
pub fn trajectory_surgery(x_prime: &Trajectory, p: i64, shift_k: usize) -> Result<Trajectory> {
    let len = x_prime.len();
    if shift_k == 0 || shift_k > len || p < 0 {
        return Err(Error::Domain(format!("need 1 <= shift <= {len} and p >= 0 (shift {shift_k}, p {p})")));
    }
    let l = x_prime.end_level();
    let t_cut = len - shift_k;
    let lv = x_prime.levels();
    if lv[t_cut] != l + p - 1 || lv[t_cut..].iter().any(|&y| y < l - 1) || !x_prime.last_step_up() {
        return Err(Error::Domain(format!(
            "trajectory {x_prime} is not an image trajectory for p = {p}, shift = {shift_k}"
        )));
    }
    let steps = x_prime.steps();
    let mut out = steps[..t_cut].to_vec();
    out.extend(steps[t_cut..].iter().rev().map(|&s| -s));
    out[t_cut] = 1;
    let x2 = Trajectory::new(out)?;
    debug_assert_eq!(first_stable_hit(&x2, l + p), Some(t_cut + 1));
    Ok(x2)
}

/// Recovers `(x', shift_k)` from `x'' = trajectory_surgery(x', p, shift_k)`,
/// knowing `p` and the original end level `l`.
pub fn inverse_surgery(x2: &Trajectory, p: i64, l: i64) -> Result<(Trajectory, usize)> {
    let len = x2.len();
    let hit = first_stable_hit(x2, l + p)
        .filter(|&h| h >= 1 && x2.steps()[h - 1] == 1)
        .ok_or_else(|| Error::Domain(format!("{x2} never settles at level {}", l + p)))?;
    let t_cut = hit - 1;
    let steps = x2.steps();
    let mut tail: Vec<i8> = steps[t_cut..].to_vec();
    tail[0] = -1;
    let mut out = steps[..t_cut].to_vec();
    out.extend(tail.iter().rev().map(|&s| -s));
    Ok((Trajectory::new(out)?, len - t_cut))
}

/// `sum_{p=1}^m T_{m-p, l+2p} = C(L, m-1) = C(L, m) - T_{m,l}` with `L = l + 2m`.
pub fn verify_count_identity(m: u64, l: u64) -> bool {
    let len = l + 2 * m;
    let lhs: BigUint = (1..=m as i64)
        .map(|p| count_trajectories_signed(m as i64 - p, l as i64 + 2 * p))
        .fold(BigUint::zero(), |a, b| a + b);
    let rhs = binomial(len, m as i64 - 1);
    lhs == rhs && binomial(len, m as i64) - count_trajectories(m, l) == rhs
}

/// Two-path construction: read `p1` up to the left endpoint `v` of its first
/// edge `(v, w)` shared with `p2`, follow `p2` for `L - 1` steps from `v` to
/// `w` (backwards when `p2` uses the edge as `v -> w`), then finish `p1`.
pub fn glue_paths(p1: &ClosedPath, p2: &ClosedPath) -> Result<ClosedPath> {
    let len = p1.len();
    if p2.len() != len {
        return Err(Error::DimensionMismatch { left: len, right: p2.len() });
    }
    let (a, b) = (p1.vertices(), p2.vertices());
    let (t, u) = (1..=len)
        .find_map(|t| (1..=len).find(|&u| p2.edge_at(u) == p1.edge_at(t)).map(|u| (t, u)))
        .ok_or_else(|| Error::Domain(format!("paths {p1} and {p2} share no edge")))?;
    let (v, w) = (a[t - 1], a[t]);
    let same = b[u - 1] == v && b[u] == w;
    let mut out = Vec::with_capacity(2 * len - 1);
    out.extend_from_slice(&a[..t]);
    for s in 1..len {
        // p2 is cyclic with period len
        let idx = if same { (u - 1 + len * 2 - s) % len } else { (u + s) % len };
        out.push(b[idx]);
    }
    debug_assert_eq!(*out.last().unwrap(), w);
    out.extend_from_slice(&a[t + 1..]);
    ClosedPath::new(out, p1.ambient_n().max(p2.ambient_n()))
}

/// Window starts `tau` in `[0, L_o - window + 1]` whose window
/// `[tau, tau + window - 1]` never drops below `x(tau)`.
pub fn k_statistic(x: &Trajectory, window: usize) -> usize {
    let lv = x.levels();
    let lo = x.len();
    if window == 0 || window > lo + 1 {
        return 0;
    }
    (0..=lo + 1 - window)
        .filter(|&tau| lv[tau..tau + window].iter().all(|&y| y >= lv[tau]))
        .count()
}

/// Closed path number `idx` among the `n^len` walks on `1..=n`.
pub fn closed_path_from_index(mut idx: u64, len: usize, n: u32) -> ClosedPath {
    let mut v = Vec::with_capacity(len + 1);
    for _ in 0..len {
        v.push((idx % n as u64) as u32 + 1);
        idx /= n as u64;
    }
    v.reverse();
    v.push(v[0]);
    ClosedPath::new(v, n).expect("valid by construction")
}

fn walk_count(len: usize, n: u32) -> u64 {
    (n as u64).pow(len as u32)
}

/// Per-path checks of the correspondence; `None` when the path is not admissible.
fn check_one(p: &ClosedPath) -> Option<std::result::Result<(), String>> {
    let x = trajectory_of(p);
    if x.end_level() == 0 || x.last_step_up() {
        return None;
    }
    let fail = |why: &str| Some(Err(format!("{p}: {why}")));
    let r = match to_marked_origin(p) {
        Ok(r) => r,
        Err(e) => return fail(&e.to_string()),
    };
    match from_marked_origin(&r) {
        Ok(back) if back == *p => {}
        _ => return fail("round trip failed"),
    }
    let y = trajectory_of(&r.image);
    if y.class() != x.class() {
        return fail("class changed");
    }
    if edge_multiset(&r.image) != edge_multiset(p) {
        return fail("edge multiset changed");
    }
    if !y.last_step_up() || !is_origin_marked(&r.image) {
        return fail("image lacks a marked origin or a last step up");
    }
    let (m, l) = (x.m() as i64, x.end_level());
    match trajectory_surgery(&y, r.level_p, r.shift_k) {
        Ok(x2) => {
            let c = x2.class();
            if c.m as i64 != m - r.level_p || c.l as i64 != l + 2 * r.level_p {
                return fail("surgery output has the wrong class");
            }
            match inverse_surgery(&x2, r.level_p, l) {
                Ok((back, k)) if back == y && k == r.shift_k => {}
                _ => return fail("surgery is not invertible"),
            }
        }
        Err(e) => return fail(&e.to_string()),
    }
    Some(Ok(()))
}

/// Exhaustive round trip, class, weight and surgery checks over every
/// admissible path of length `1..=max_len` on `n` vertices.
pub fn correspondence_census(max_len: usize, n: u32) -> Result<Check> {
    let total: u64 = (1..=max_len).map(|l| walk_count(l, n)).sum();
    if total > 50_000_000 {
        return Err(Error::SizeGuard { what: format!("census of {total} walks"), limit: 50_000_000 });
    }
    let mut admissible = 0u64;
    let mut failures = 0u64;
    let mut first_failure: Option<String> = None;
    for len in 1..=max_len {
        let (a, f, c) = (0..walk_count(len, n))
            .into_par_iter()
            .map(|idx| match check_one(&closed_path_from_index(idx, len, n)) {
                None => (0u64, 0u64, None),
                Some(Ok(())) => (1, 0, None),
                Some(Err(msg)) => (1, 1, Some((idx, msg))),
            })
            .reduce(
                || (0, 0, None),
                |x, y| {
                    let c = match (x.2, y.2) {
                        (Some(a), Some(b)) => Some(if a.0 <= b.0 { a } else { b }),
                        (a, b) => a.or(b),
                    };
                    (x.0 + y.0, x.1 + y.1, c)
                },
            );
        admissible += a;
        failures += f;
        if first_failure.is_none() {
            first_failure = c.map(|c| c.1);
        }
    }
    Ok(Check::new("correspondence_round_trip", json!({"max_len": max_len, "vertices": n}), failures == 0)
        .value(failures as f64)
        .threshold(0.0)
        .counterexample(first_failure)
        .note(format!("{admissible} admissible paths checked")))
}

/// Exhaustive gluing census: every correlated ordered pair of length-`len`
/// walks on `vertex_budget` vertices is glued; each glued path must have at
/// most `2 len K_N(x)` preimages, `x` its trajectory and the window `len`.
pub fn preimage_bound_check(len: usize, vertex_budget: u32) -> Result<Check> {
    if len == 0 || len > 5 || vertex_budget == 0 || vertex_budget > 5 {
        return Err(Error::SizeGuard {
            what: format!("gluing census with L = {len}, {vertex_budget} vertices"),
            limit: 5,
        });
    }
    let count = walk_count(len, vertex_budget);
    let paths: Vec<ClosedPath> = (0..count).map(|i| closed_path_from_index(i, len, vertex_budget)).collect();
    let glued: Vec<ClosedPath> = paths
        .par_iter()
        .flat_map_iter(|p1| paths.iter().filter_map(move |p2| glue_paths(p1, p2).ok()))
        .collect();
    let mut preimages: HashMap<ClosedPath, u64> = HashMap::new();
    for g in glued {
        *preimages.entry(g).or_insert(0) += 1;
    }
    let mut worst: Option<(f64, String)> = None;
    let mut failures = 0u64;
    let mut keys: Vec<_> = preimages.iter().collect();
    keys.sort_by(|a, b| a.0.vertices().cmp(b.0.vertices()));
    for (g, &c) in keys {
        let bound = 2 * len as u64 * k_statistic(&trajectory_of(g), len) as u64;
        let ratio = c as f64 / bound.max(1) as f64;
        if c > bound {
            failures += 1;
        }
        if worst.as_ref().is_none_or(|w| ratio > w.0) {
            worst = Some((ratio, format!("{g}: {c} preimages, bound {bound}")));
        }
    }
    let (ratio, detail) = worst.unwrap_or((0.0, String::new()));
    Ok(Check::new("gluing_preimage_bound", json!({"L": len, "vertices": vertex_budget}), failures == 0)
        .value(ratio)
        .threshold(1.0)
        .counterexample((failures > 0).then(|| detail.clone()))
        .note(format!("{} glued paths, {failures} over the bound; tightest {detail}", preimages.len())))
}

/// Uniform draw from `T_{m,l}` by the cycle lemma: among the rotations of a
/// shuffled word with `l+m+1` ups and `m` downs exactly `l+1` have positive
/// partial sums; pick one at random and drop its leading up step.
pub fn sample_trajectory<R: Rng + ?Sized>(m: u64, l: u64, rng: &mut R) -> Trajectory {
    let n = (l + 2 * m + 1) as usize;
    let mut word = vec![1i8; n];
    for s in word.iter_mut().take(m as usize) {
        *s = -1;
    }
    word.shuffle(rng);
    let mut prefix = vec![0i64; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + word[i] as i64;
    }
    let total = prefix[n];
    // suffix_min[r] = min prefix[k] for k in (r, n]
    let mut suffix_min = vec![i64::MAX; n + 1];
    for r in (0..n).rev() {
        suffix_min[r] = suffix_min[r + 1].min(prefix[r + 1]);
    }
    let mut good = Vec::with_capacity(l as usize + 1);
    let mut head_min = i64::MAX; // min prefix[k] for k in [1, r]
    for r in 0..n {
        if r > 0 {
            head_min = head_min.min(prefix[r]);
        }
        let wraps_ok = r == 0 || head_min + total > prefix[r];
        if suffix_min[r] > prefix[r] && wraps_ok {
            good.push(r);
        }
    }
    debug_assert_eq!(good.len(), l as usize + 1);
    let r = good[rng.random_range(0..good.len())];
    let steps: Vec<i8> = word[r + 1..].iter().chain(&word[..r]).copied().collect();
    Trajectory::new(steps).expect("cycle lemma rotation is nonnegative")
}

/// Mean of `K_N` over `samples` uniform members of `T_{m,l}` with window
/// `L_o / 2 + 1` (the gluing of two length-`L` paths has `L_o = 2L - 2`).
pub fn mean_k_statistic(m: u64, l: u64, samples: u64, seed: u64) -> f64 {
    let lo = (l + 2 * m) as usize;
    let window = lo / 2 + 1;
    let sum: u64 = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, i, (m << 32) | l);
            k_statistic(&sample_trajectory(m, l, &mut r), window) as u64
        })
        .sum();
    sum as f64 / samples as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path_model::{edge, enumerate_trajectories};

    fn path(s: &str) -> ClosedPath {
        s.parse().unwrap()
    }

    fn traj(s: &str) -> Trajectory {
        s.parse().unwrap()
    }

    #[test]
    fn worked_correspondence() {
        let p = path("1,2,1,3,4,5,6,3,1");
        let r = to_marked_origin(&p).unwrap();
        assert_eq!(r.image.to_string(), "4,5,6,3,1,2,1,3,4");
        assert_eq!((r.shift_k, r.level_p), (4, 1));
        assert_eq!(edge_multiset(&r.image), edge_multiset(&p));
        let y = trajectory_of(&r.image);
        assert!(y.last_step_up() && is_origin_marked(&r.image));
        assert_eq!(y.class(), trajectory_of(&p).class());
        assert_eq!(from_marked_origin(&r).unwrap(), p);
        assert!(to_marked_origin(&path("1,2,3,1")).is_err());
        assert!(to_marked_origin(&path("1,2,1")).is_err());
    }

    #[test]
    fn inverse_rejects_inconsistent_input() {
        let r = to_marked_origin(&path("1,2,1,3,4,5,6,3,1")).unwrap();
        let bad = CorrespondenceResult { shift_k: 3, ..r.clone() };
        assert!(from_marked_origin(&bad).is_err());
        let too_far = CorrespondenceResult { shift_k: 9, ..r.clone() };
        assert!(from_marked_origin(&too_far).is_err());
        let id = CorrespondenceResult { shift_k: 0, ..r.clone() };
        assert_eq!(from_marked_origin(&id).unwrap(), r.image);
    }

    #[test]
    fn worked_surgery() {
        let x = traj("UUUUUDDU");
        let x2 = trajectory_surgery(&x, 1, 4).unwrap();
        assert_eq!(x2.to_string(), "UUUUUUUD");
        assert_eq!(x2.class(), crate::path_model::PathClass { m: 1, l: 6 });
        assert_eq!(first_stable_hit(&x2, 5), Some(5));
        assert_eq!(inverse_surgery(&x2, 1, 4).unwrap(), (x, 4));
        assert!(trajectory_surgery(&traj("UUUUUDDU"), 2, 4).is_err());
    }

    #[test]
    fn surgery_consuming_all_downs() {
        // single down step, p = m = 1: result is all up
        let p = path("1,2,3,2,1");
        assert!(to_marked_origin(&p).is_err()); // l = 0
        // unmarked origin 2, class (m=1, l=3), cut inside the first excursion
        let p = path("2,1,3,4,1,2");
        let r = to_marked_origin(&p).unwrap();
        assert_eq!((r.shift_k, r.level_p), (2, 1));
        let x2 = trajectory_surgery(&trajectory_of(&r.image), r.level_p, r.shift_k).unwrap();
        assert_eq!(x2.to_string(), "UUUUU");
    }

    #[test]
    fn count_identity_examples() {
        assert!(verify_count_identity(2, 2));
        assert!(verify_count_identity(1, 0));
        assert!(verify_count_identity(3, 0));
        for m in 0..=12 {
            for l in (0..=24 - 2 * m).step_by(2) {
                assert!(verify_count_identity(m, l), "m={m} l={l}");
            }
        }
    }

    #[test]
    fn gluing_examples() {
        let g = glue_paths(&path("1,2,1"), &path("1,2,1")).unwrap();
        assert_eq!(g.to_string(), "1,2,1");
        assert!(glue_paths(&path("1,2,1"), &path("3,4,3")).is_err());
        let p1 = path("1,2,3,1");
        let p2 = path("2,3,4,2");
        let g = glue_paths(&p1, &p2).unwrap();
        assert_eq!(g.to_string(), "1,2,4,3,1");
        let mut union = edge_multiset(&p1);
        union.extend(edge_multiset(&p2));
        union.sort_unstable();
        for _ in 0..2 {
            let i = union.iter().position(|&e| e == edge(2, 3)).unwrap();
            union.remove(i);
        }
        assert_eq!(edge_multiset(&g), union);
        // opposite orientation: p2 uses 3 -> 2
        let g = glue_paths(&p1, &path("3,2,4,3")).unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!(g.to_string(), "1,2,4,3,1");
        assert!(glue_paths(&p1, &path("1,2,1")).is_err());
    }

    #[test]
    fn k_statistic_examples() {
        assert_eq!(k_statistic(&traj("UUDD"), 3), 2);
        assert_eq!(k_statistic(&traj("UUUU"), 2), 4);
        assert_eq!(k_statistic(&traj("UDUUD"), 1), 6);
    }

    #[test]
    fn small_gluing_census() {
        assert!(preimage_bound_check(2, 3).unwrap().pass);
        assert!(preimage_bound_check(6, 3).is_err());
    }

    #[test]
    fn cycle_lemma_sampler_is_uniform() {
        let (m, l) = (3u64, 2u64);
        let all = enumerate_trajectories(m, l).unwrap();
        let mut hits: HashMap<Trajectory, u64> = HashMap::new();
        let draws = 28_000u64;
        let mut r = rng::stream(1, 0, 0);
        for _ in 0..draws {
            let t = sample_trajectory(m, l, &mut r);
            assert_eq!(t.class(), crate::path_model::PathClass { m, l });
            *hits.entry(t).or_insert(0) += 1;
        }
        assert_eq!(hits.len(), all.len());
        let expect = draws as f64 / all.len() as f64;
        let chi2: f64 = hits.values().map(|&h| (h as f64 - expect).powi(2) / expect).sum();
        // 27 degrees of freedom; 99.9% quantile is about 55.5
        assert!(chi2 < 55.5, "chi2 = {chi2}");
    }
}
