//! Cardinality matching: a large subset with equal treated and control
//! counts whose covariate mean differences stay strictly inside caps,
//! followed by a within-subset pairing.
//!
//! The subset search is a local-search heuristic, not an exact optimizer:
//! the caps are guaranteed on the result, the cardinality is not maximal in
//! general. Caps are checked against the full-sample standardization.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::balance::smd_masked;
use crate::data::{Caps, Covariates, MatchedDataset};
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng;

pub const DEFAULT_MIN_PAIRS: usize = 10;
/// Default near-exact tolerance, in raw units of the covariate.
pub const DEFAULT_NEAR_EXACT_TOLERANCE: f64 = 1.0;
pub const DEFAULT_MAX_ITERATIONS: usize = 200_000;

/// The search aims inside this fraction of each cap, so the strict
/// inequality survives any rounding in later recomputation.
const TARGET: f64 = 0.999;
/// Candidates per side examined exactly for each move.
const SHORTLIST: usize = 12;
/// Swap-only repair budget when trying to grow the subset by one pair.
const GROW_REPAIR_STEPS: usize = 300;
const PINV_RTOL: f64 = 1e-10;
const PAIRING_SEED_TAG: u64 = 0x7061_6972;

/// Restrict pairs to units agreeing on one covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearExact {
    pub covariate: String,
    /// Maximum within-pair absolute difference, in raw units.
    pub tolerance: f64,
}

impl NearExact {
    pub fn new(covariate: impl Into<String>) -> Self {
        NearExact { covariate: covariate.into(), tolerance: DEFAULT_NEAR_EXACT_TOLERANCE }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchOptions {
    pub near_exact: Option<NearExact>,
    pub min_pairs: usize,
    pub seed: u64,
    pub max_iterations: usize,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions { near_exact: None, min_pairs: DEFAULT_MIN_PAIRS, seed: 0, max_iterations: DEFAULT_MAX_ITERATIONS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub kept_treated: Vec<usize>,
    pub kept_control: Vec<usize>,
    /// `(treated, control)` indices into the full dataset.
    pub pairs: Vec<(usize, usize)>,
    pub caps: Vec<f64>,
    /// Treated-minus-control means of the kept units.
    pub achieved_smds: Vec<f64>,
    pub iterations: usize,
    /// How `pairs` was formed. Without near-exact restrictions the pairing
    /// is done after the subset is chosen and plays no part in the caps.
    pub pairing: String,
}

impl MatchResult {
    pub fn n_pairs(&self) -> usize {
        self.pairs.len()
    }

    /// Kept units of `full` in their original order, with pair blocks.
    pub fn matched_dataset(&self, full: &MatchedDataset) -> MatchedDataset {
        let mut units: Vec<usize> = self.kept_treated.iter().chain(&self.kept_control).copied().collect();
        units.sort_unstable();
        let mut local = alloc::vec![usize::MAX; full.n_units()];
        for (j, &u) in units.iter().enumerate() {
            local[u] = j;
        }
        let pairs: Vec<(usize, usize)> = self.pairs.iter().map(|&(t, c)| (local[t], local[c])).collect();
        full.select_units(&units).with_pairs(&pairs)
    }
}

#[derive(Clone)]
struct State {
    pairs: Vec<(usize, usize)>,
    kept: Vec<bool>,
    /// `sum_T - sum_C` per covariate over the kept units.
    diff: Vec<f64>,
}

struct Search<'a> {
    x: &'a Covariates,
    /// `(covariate, cap)` for finite caps.
    capped: Vec<(usize, f64)>,
    treated: Vec<usize>,
    control: Vec<usize>,
    /// Near-exact covariate and its tolerance on the standardized scale.
    compat: Option<(usize, f64)>,
    iterations: usize,
    max_iterations: usize,
}

enum Move {
    SwapControl { pair: usize, unit: usize },
    SwapTreated { pair: usize, unit: usize },
    Drop { pair: usize },
}

impl Search<'_> {
    fn compatible(&self, t: usize, c: usize) -> bool {
        match self.compat {
            None => true,
            Some((k, tol)) => (self.x.get(t, k) - self.x.get(c, k)).abs() <= tol,
        }
    }

    fn fresh_diff(&self, pairs: &[(usize, usize)]) -> Vec<f64> {
        let mut diff = alloc::vec![0.0; self.x.n_cols()];
        for &(t, c) in pairs {
            for (k, d) in diff.iter_mut().enumerate() {
                *d += self.x.get(t, k) - self.x.get(c, k);
            }
        }
        diff
    }

    /// Squared cap excess of `diff + delta` over `n` pairs.
    fn violation(&self, diff: &[f64], n: usize, delta: impl Fn(usize) -> f64) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let inv = 1.0 / n as f64;
        self.capped
            .iter()
            .map(|&(k, cap)| {
                let e = ((diff[k] + delta(k)) * inv).abs() / cap - TARGET;
                if e > 0.0 {
                    e * e
                } else {
                    0.0
                }
            })
            .sum()
    }

    fn gradient(&self, s: &State) -> Vec<f64> {
        let n = s.pairs.len() as f64;
        let mut g = alloc::vec![0.0; self.x.n_cols()];
        for &(k, cap) in &self.capped {
            let d = s.diff[k] / n;
            let e = d.abs() / cap - TARGET;
            if e > 0.0 {
                g[k] = 2.0 * e * d.signum() / (cap * n);
            }
        }
        g
    }

    fn score(&self, g: &[f64], i: usize) -> f64 {
        g.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(k, v)| v * self.x.get(i, k)).sum()
    }

    fn delta(&self, add: usize, sub: usize) -> impl Fn(usize) -> f64 + '_ {
        move |k| self.x.get(add, k) - self.x.get(sub, k)
    }

    /// Indices of the `len` smallest keys, ties by position.
    fn shortlist(keys: impl Iterator<Item = (usize, f64)>, len: usize) -> Vec<usize> {
        let mut v: Vec<(usize, f64)> = keys.collect();
        v.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        v.truncate(len);
        v.into_iter().map(|(i, _)| i).collect()
    }

    /// Best cardinality-preserving swap, if it lowers the violation. With
    /// `limit` only the most promising units by first-order score are tried
    /// on each side; otherwise every admissible swap is.
    fn best_swap(&self, s: &State, g: &[f64], current: f64, limit: Option<usize>) -> Option<(Move, f64)> {
        let n = s.pairs.len();
        let mut best: Option<(Move, f64)> = None;
        let mut consider = |mv: Move, v: f64| {
            if v < current * (1.0 - 1e-12) && best.as_ref().is_none_or(|(_, b)| v < *b) {
                best = Some((mv, v));
            }
        };
        let pick = |keys: Vec<(usize, f64)>| match limit {
            Some(l) => Self::shortlist(keys.into_iter(), l),
            None => keys.into_iter().map(|(i, _)| i).collect(),
        };
        // control swap: delta = x_old - x_new; old with low g.x, new with high g.x
        let outs = pick(s.pairs.iter().enumerate().map(|(p, &(_, c))| (p, self.score(g, c))).collect());
        let ins = pick(self.control.iter().filter(|&&c| !s.kept[c]).map(|&c| (c, -self.score(g, c))).collect());
        for &p in &outs {
            let (t, c_old) = s.pairs[p];
            for &c_new in &ins {
                if self.compatible(t, c_new) {
                    consider(Move::SwapControl { pair: p, unit: c_new }, self.violation(&s.diff, n, self.delta(c_old, c_new)));
                }
            }
        }
        // treated swap: delta = x_new - x_old; old with high g.x, new with low g.x
        let outs = pick(s.pairs.iter().enumerate().map(|(p, &(t, _))| (p, -self.score(g, t))).collect());
        let ins = pick(self.treated.iter().filter(|&&t| !s.kept[t]).map(|&t| (t, self.score(g, t))).collect());
        for &p in &outs {
            let (t_old, c) = s.pairs[p];
            for &t_new in &ins {
                if self.compatible(t_new, c) {
                    consider(Move::SwapTreated { pair: p, unit: t_new }, self.violation(&s.diff, n, self.delta(t_new, t_old)));
                }
            }
        }
        best
    }

    /// The pair whose removal leaves the smallest violation; ties go to the
    /// lower treated index.
    fn best_drop(&self, s: &State) -> Option<Move> {
        let n = s.pairs.len();
        if n <= 1 {
            return None;
        }
        let mut best: Option<(usize, f64)> = None;
        for p in 0..n {
            let (t, c) = s.pairs[p];
            let v = self.violation(&s.diff, n - 1, self.delta(c, t));
            let better = match best {
                None => true,
                Some((bp, bv)) => v < bv || (v == bv && t < s.pairs[bp].0),
            };
            if better {
                best = Some((p, v));
            }
        }
        best.map(|(pair, _)| Move::Drop { pair })
    }

    fn apply(&self, s: &mut State, mv: Move) {
        match mv {
            Move::SwapControl { pair, unit } => {
                let (_, old) = s.pairs[pair];
                for (k, d) in s.diff.iter_mut().enumerate() {
                    *d += self.x.get(old, k) - self.x.get(unit, k);
                }
                s.kept[old] = false;
                s.kept[unit] = true;
                s.pairs[pair].1 = unit;
            }
            Move::SwapTreated { pair, unit } => {
                let (old, _) = s.pairs[pair];
                for (k, d) in s.diff.iter_mut().enumerate() {
                    *d += self.x.get(unit, k) - self.x.get(old, k);
                }
                s.kept[old] = false;
                s.kept[unit] = true;
                s.pairs[pair].0 = unit;
            }
            Move::Drop { pair } => {
                let (t, c) = s.pairs.swap_remove(pair);
                for (k, d) in s.diff.iter_mut().enumerate() {
                    *d -= self.x.get(t, k) - self.x.get(c, k);
                }
                s.kept[t] = false;
                s.kept[c] = false;
            }
        }
    }

    /// Moves towards feasibility: improving swaps first, then (if allowed)
    /// dropping pairs. Returns whether every cap holds at the end.
    fn repair(&mut self, s: &mut State, allow_drop: bool, mut budget: usize) -> bool {
        s.diff = self.fresh_diff(&s.pairs);
        loop {
            let v = self.violation(&s.diff, s.pairs.len(), |_| 0.0);
            if v == 0.0 {
                return true;
            }
            if budget == 0 || self.iterations >= self.max_iterations {
                return false;
            }
            budget -= 1;
            self.iterations += 1;
            let g = self.gradient(s);
            let swap = self.best_swap(s, &g, v, Some(SHORTLIST)).or_else(|| self.best_swap(s, &g, v, None));
            if let Some((mv, _)) = swap {
                self.apply(s, mv);
            } else if allow_drop {
                match self.best_drop(s) {
                    Some(mv) => self.apply(s, mv),
                    None => return false,
                }
            } else {
                return false;
            }
        }
    }

    /// Tries to add one pair for each unmatched treated unit, keeping an
    /// addition only when swaps can restore feasibility.
    fn grow(&mut self, s: &mut State) {
        loop {
            let mut added = false;
            for ti in 0..self.treated.len() {
                let t = self.treated[ti];
                if s.kept[t] || self.iterations >= self.max_iterations {
                    continue;
                }
                let n = s.pairs.len();
                let best = self
                    .control
                    .iter()
                    .filter(|&&c| !s.kept[c] && self.compatible(t, c))
                    .map(|&c| (c, self.violation(&s.diff, n + 1, self.delta(t, c))))
                    .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
                let Some((c, v)) = best else { continue };
                self.iterations += 1;
                let snapshot = s.clone();
                s.pairs.push((t, c));
                s.kept[t] = true;
                s.kept[c] = true;
                for (k, d) in s.diff.iter_mut().enumerate() {
                    *d += self.x.get(t, k) - self.x.get(c, k);
                }
                if v == 0.0 || self.repair(s, false, GROW_REPAIR_STEPS) {
                    added = true;
                } else {
                    *s = snapshot;
                }
            }
            if !added {
                return;
            }
        }
    }
}

/// Rows of `x` mapped so that Euclidean distance equals Mahalanobis distance
/// under `cov(x)` (pseudo-inverse when singular).
fn whitened_rows(x: &Covariates) -> Vec<Vec<f64>> {
    let k = x.n_cols();
    let root: DMatrix<f64> = linalg::pinv_sqrt(&linalg::covariance(x), PINV_RTOL);
    (0..x.n_rows())
        .map(|i| {
            let row = x.row(i);
            (0..k).map(|a| (0..k).map(|b| root[(a, b)] * row[b]).sum()).collect()
        })
        .collect()
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

/// Greedy nearest neighbour: treated units in seeded random order each take
/// the closest unused admissible control (ties by index).
fn greedy_pairs(
    z: &[Vec<f64>],
    treated: &[usize],
    control: &[usize],
    admissible: impl Fn(usize, usize) -> bool,
    seed: u64,
) -> Vec<(usize, usize)> {
    let mut order = treated.to_vec();
    order.shuffle(&mut rng::substream(rng::derive_seed(seed, PAIRING_SEED_TAG), 0));
    let mut used = alloc::vec![false; control.len()];
    let mut pairs = Vec::with_capacity(order.len());
    for t in order {
        let best = control
            .iter()
            .enumerate()
            .filter(|&(j, &c)| !used[j] && admissible(t, c))
            .map(|(j, &c)| (j, squared_distance(&z[t], &z[c])))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        if let Some((j, _)) = best {
            used[j] = true;
            pairs.push((t, control[j]));
        }
    }
    pairs
}

/// Pairs every treated unit of `dataset` with a control, greedily by
/// Mahalanobis distance under the dataset's own covariance.
pub fn pair_units(dataset: &MatchedDataset, seed: u64) -> Result<Vec<(usize, usize)>> {
    let w = dataset.treatment();
    let treated = w.treated_indices();
    let control = w.control_indices();
    if treated.len() != control.len() {
        return Err(Error::UnequalArms { treated: treated.len(), control: control.len() });
    }
    let z = whitened_rows(dataset.covariates());
    Ok(greedy_pairs(&z, &treated, &control, |_, _| true, seed))
}

/// Largest subset (heuristically) with equal arm sizes whose standardized
/// mean differences satisfy `|SMD_k| < cap_k` for every covariate.
pub fn cardinality_match(dataset: &MatchedDataset, caps: &Caps, options: &MatchOptions) -> Result<MatchResult> {
    let names = dataset.covariate_names();
    let cap_vec = caps.resolve(names).map_err(|v| Error::Invalid(alloc::vec![v]))?;
    let x = dataset.covariates();
    let w = dataset.treatment();
    let compat = match &options.near_exact {
        None => None,
        Some(ne) => {
            let k = dataset
                .covariate_index(&ne.covariate)
                .ok_or_else(|| Error::Invalid(alloc::vec![crate::Violation::UnknownCovariate(ne.covariate.clone())]))?;
            if !(ne.tolerance >= 0.0) {
                return Err(Error::InvalidArgument("near-exact tolerance must be non-negative".into()));
            }
            let sd = dataset.scales().map_or(1.0, |s| s[k].sd);
            Some((k, ne.tolerance / sd * (1.0 + 1e-12)))
        }
    };
    let mut search = Search {
        x,
        capped: cap_vec.iter().copied().enumerate().filter(|(_, c)| c.is_finite()).collect(),
        treated: w.treated_indices(),
        control: w.control_indices(),
        compat,
        iterations: 0,
        max_iterations: options.max_iterations,
    };

    let z = whitened_rows(x);
    let pairs = greedy_pairs(&z, &search.treated, &search.control, |t, c| search.compatible(t, c), options.seed);
    let mut kept = alloc::vec![false; dataset.n_units()];
    for &(t, c) in &pairs {
        kept[t] = true;
        kept[c] = true;
    }
    let mut state = State { diff: search.fresh_diff(&pairs), pairs, kept };
    let budget = options.max_iterations;
    if !search.repair(&mut state, true, budget) {
        return Err(Error::Infeasible { pairs: 0, min_pairs: options.min_pairs });
    }
    search.grow(&mut state);

    let mut kept_treated: Vec<usize> = state.pairs.iter().map(|p| p.0).collect();
    let mut kept_control: Vec<usize> = state.pairs.iter().map(|p| p.1).collect();
    kept_treated.sort_unstable();
    kept_control.sort_unstable();
    let n_pairs = kept_treated.len();
    if n_pairs < options.min_pairs.max(1) {
        return Err(Error::Infeasible { pairs: n_pairs, min_pairs: options.min_pairs });
    }

    let mut units: Vec<usize> = kept_treated.iter().chain(&kept_control).copied().collect();
    units.sort_unstable();
    let sub = dataset.select_units(&units);
    let achieved_smds = smd_masked(sub.covariates(), &sub.treatment().to_f64(), n_pairs, n_pairs);
    if achieved_smds.iter().zip(&cap_vec).any(|(d, c)| !(d.abs() < *c)) {
        return Err(Error::Infeasible { pairs: n_pairs, min_pairs: options.min_pairs });
    }

    let (pairs, pairing) = if options.near_exact.is_some() {
        let mut p = state.pairs;
        p.sort_unstable();
        (p, String::from("near_exact_search_pairs"))
    } else {
        let local = pair_units(&sub, options.seed)?;
        let mut p: Vec<(usize, usize)> = local.into_iter().map(|(t, c)| (units[t], units[c])).collect();
        p.sort_unstable();
        (p, String::from("post_hoc_greedy_mahalanobis"))
    };

    Ok(MatchResult {
        kept_treated,
        kept_control,
        pairs,
        caps: cap_vec,
        achieved_smds,
        iterations: search.iterations,
        pairing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{validate, Assignment, DesignSpec};
    use alloc::vec;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn dataset(rows: &[Vec<f64>], w: &[u8]) -> MatchedDataset {
        let raw = Covariates::from_rows(rows).unwrap();
        let k = raw.n_cols();
        MatchedDataset::from_raw(&raw, MatchedDataset::default_names(k), Assignment::from_indicator(w).unwrap()).unwrap()
    }

    fn opts(min_pairs: usize) -> MatchOptions {
        MatchOptions { min_pairs, ..MatchOptions::default() }
    }

    fn shifted(seed: u64, nt: usize, nc: usize, shift: f64) -> MatchedDataset {
        let mut r = rng::substream(seed, 0);
        let mut rows = Vec::new();
        let mut w = Vec::new();
        for i in 0..nt + nc {
            let t = i < nt;
            let s = if t { shift } else { 0.0 };
            rows.push((0..4).map(|_| Distribution::<f64>::sample(&StandardNormal, &mut r) + s).collect::<Vec<f64>>());
            w.push(u8::from(t));
        }
        dataset(&rows, &w)
    }

    #[test]
    fn identical_arms_keep_everything() {
        let pts: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64, ((i * 7) % 5) as f64]).collect();
        let rows: Vec<Vec<f64>> = pts.iter().chain(&pts).cloned().collect();
        let w: Vec<u8> = (0..24).map(|i| u8::from(i < 12)).collect();
        let ds = dataset(&rows, &w);
        let r = cardinality_match(&ds, &Caps::Uniform(0.1), &opts(1)).unwrap();
        assert_eq!(r.n_pairs(), 12);
        assert!(r.achieved_smds.iter().all(|d| d.abs() < 1e-12));
    }

    /// Largest `s` such that some `s` treated and `s` controls meet the caps.
    fn brute_force_size(ds: &MatchedDataset, cap: f64) -> usize {
        let t = ds.treatment().treated_indices();
        let c = ds.treatment().control_indices();
        let mut best = 0;
        for tm in 1u32..(1 << t.len()) {
            for cm in 1u32..(1 << c.len()) {
                if tm.count_ones() != cm.count_ones() {
                    continue;
                }
                let mut units: Vec<usize> = (0..t.len()).filter(|i| tm >> i & 1 == 1).map(|i| t[i]).collect();
                units.extend((0..c.len()).filter(|i| cm >> i & 1 == 1).map(|i| c[i]));
                units.sort_unstable();
                let sub = ds.select_units(&units);
                let s = tm.count_ones() as usize;
                let d = smd_masked(sub.covariates(), &sub.treatment().to_f64(), s, s);
                if d.iter().all(|v| v.abs() < cap) {
                    best = best.max(s);
                }
            }
        }
        best
    }

    #[test]
    fn drops_the_outlier_pair() {
        let rows = vec![
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![10.0, 0.5],
            vec![0.02, 1.0],
            vec![1.01, 0.0],
            vec![5.0, 3.0],
        ];
        let ds = dataset(&rows, &[1, 1, 1, 0, 0, 0]);
        assert_eq!(brute_force_size(&ds, 0.1), 2);
        let r = cardinality_match(&ds, &Caps::Uniform(0.1), &opts(1)).unwrap();
        assert_eq!(r.kept_treated, vec![0, 1]);
        assert_eq!(r.n_pairs(), 2);
    }

    #[test]
    fn matches_exhaustive_size_on_small_instances() {
        for seed in 0..8 {
            let ds = shifted(seed, 3, 3, 0.8);
            let best = brute_force_size(&ds, 0.3);
            match cardinality_match(&ds, &Caps::Uniform(0.3), &opts(1)) {
                Ok(r) => {
                    assert!(r.n_pairs() <= best);
                    assert!(r.achieved_smds.iter().all(|d| d.abs() < 0.3));
                }
                Err(Error::Infeasible { .. }) => assert_eq!(best, 0, "seed {seed}"),
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn caps_hold_and_result_is_a_valid_paired_dataset() {
        let ds = shifted(3, 60, 120, 0.4);
        let loose = cardinality_match(&ds, &Caps::Uniform(0.1), &MatchOptions::default()).unwrap();
        let tight = cardinality_match(&ds, &Caps::Uniform(0.01), &MatchOptions::default()).unwrap();
        for r in [&loose, &tight] {
            assert!(r.achieved_smds.iter().zip(&r.caps).all(|(d, c)| d.abs() < *c));
            let m = r.matched_dataset(&ds);
            validate(&m, &DesignSpec::paired()).unwrap();
            assert_eq!(m.n_units(), 2 * r.n_pairs());
            let d = crate::balance::smd_vector(&m, m.treatment()).unwrap();
            assert_eq!(d, r.achieved_smds);
        }
        assert!(loose.n_pairs() >= tight.n_pairs());
        assert!(loose.n_pairs() >= 48, "{}", loose.n_pairs());
    }

    #[test]
    fn deterministic_under_seed() {
        let ds = shifted(5, 30, 60, 0.5);
        let o = MatchOptions { seed: 11, ..MatchOptions::default() };
        let a = cardinality_match(&ds, &Caps::Uniform(0.05), &o).unwrap();
        let b = cardinality_match(&ds, &Caps::Uniform(0.05), &o).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn near_exact_pairs_agree() {
        let mut r = rng::substream(9, 0);
        let mut rows = Vec::new();
        let mut w = Vec::new();
        for i in 0..90 {
            let year = f64::from(r.random_range(0..6u32)) + 1990.0;
            rows.push(vec![StandardNormal.sample(&mut r), year]);
            w.push(u8::from(i < 30));
        }
        let ds = dataset(&rows, &w);
        let o = MatchOptions { near_exact: Some(NearExact::new("x2")), ..MatchOptions::default() };
        let res = cardinality_match(&ds, &Caps::Uniform(0.1), &o).unwrap();
        for &(t, c) in &res.pairs {
            assert!((rows[t][1] - rows[c][1]).abs() <= 1.0);
            assert!(ds.treatment().is_treated(t) && !ds.treatment().is_treated(c));
        }
    }

    #[test]
    fn too_few_pairs_is_infeasible() {
        let ds = shifted(1, 5, 5, 0.3);
        let err = cardinality_match(&ds, &Caps::Uniform(0.1), &MatchOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Infeasible { min_pairs: 10, .. }));
    }

    #[test]
    fn pair_units_short_edges() {
        let rows = vec![vec![0.0, 0.0], vec![10.0, 10.0], vec![10.1, 9.9], vec![0.1, -0.1]];
        let ds = dataset(&rows, &[1, 1, 0, 0]);
        let mut p = pair_units(&ds, 0).unwrap();
        p.sort_unstable();
        assert_eq!(p, vec![(0, 3), (1, 2)]);

        let pts: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let rows: Vec<Vec<f64>> = pts.iter().chain(&pts).cloned().collect();
        let w: Vec<u8> = (0..12).map(|i| u8::from(i < 6)).collect();
        let ds = dataset(&rows, &w);
        let z = whitened_rows(ds.covariates());
        let total: f64 = pair_units(&ds, 4).unwrap().iter().map(|&(t, c)| squared_distance(&z[t], &z[c])).sum();
        assert_eq!(total, 0.0);

        let ds = dataset(&rows[..5].iter().cloned().chain(rows[6..9].iter().cloned()).collect::<Vec<_>>(), &[1, 1, 1, 1, 1, 0, 0, 0]);
        assert!(matches!(pair_units(&ds, 0), Err(Error::UnequalArms { treated: 5, control: 3 })));
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..n {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn greedy_pairing_close_to_optimal_assignment() {
        let mut r = rng::substream(21, 0);
        let rows: Vec<Vec<f64>> = (0..8).map(|_| (0..2).map(|_| StandardNormal.sample(&mut r)).collect()).collect();
        let ds = dataset(&rows, &[1, 1, 1, 1, 0, 0, 0, 0]);
        let z = whitened_rows(ds.covariates());
        let dist = |t: usize, c: usize| crate::math::sqrt(squared_distance(&z[t], &z[c]));
        let greedy: f64 = pair_units(&ds, 0).unwrap().iter().map(|&(t, c)| dist(t, c)).sum();
        let optimal = permutations(4)
            .iter()
            .map(|p| (0..4).map(|i| dist(i, 4 + p[i])).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        assert!(greedy <= 1.25 * optimal, "greedy {greedy} optimal {optimal}");
    }
}
