//! Samplers, membership tests, and exact enumerators for assignment
//! mechanisms.
//!
//! Complete and block designs are sampled exactly by partial Fisher-Yates
//! shuffles. Constrained designs are sampled by rejection from their
//! unconstrained counterpart, which keeps the draw uniform on the
//! acceptance set.

use alloc::vec::Vec;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::balance::mean_difference_masked;
use crate::data::{validate, Assignment, Block, DesignKind, DesignSpec, MatchedDataset};
use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_MAX_ATTEMPTS: u64 = 100_000;
pub const DEFAULT_ENUMERATION_LIMIT: u128 = 2_000_000;

/// One accepted assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentDraw {
    pub assignment: Assignment,
    pub draw_index: usize,
    /// Rejections + 1.
    pub attempts: u64,
}

/// `M` draws from one design and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawSet {
    pub draws: Vec<AssignmentDraw>,
    pub seed: u64,
    pub generator: &'static str,
}

impl DrawSet {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn total_attempts(&self) -> u64 {
        self.draws.iter().map(|d| d.attempts).sum()
    }

    /// Accepted draws per proposal.
    pub fn acceptance_rate(&self) -> f64 {
        self.draws.len() as f64 / self.total_attempts().max(1) as f64
    }

    pub fn assignments(&self) -> impl Iterator<Item = &Assignment> + '_ {
        self.draws.iter().map(|d| &d.assignment)
    }
}

#[derive(Debug, Clone)]
enum Counting {
    /// Uniform `n_treated`-subset of all units.
    Complete { n_treated: usize },
    /// Uniform within each block; units outside every block keep their
    /// observed assignment.
    Blocks { blocks: Vec<Block>, fixed: Vec<usize> },
    /// One treated unit per pair.
    Pairs { pairs: Vec<[usize; 2]>, fixed: Vec<usize> },
}

/// A [`DesignSpec`] bound to a dataset and validated against it.
#[derive(Debug, Clone)]
pub struct Design<'a> {
    spec: DesignSpec,
    dataset: &'a MatchedDataset,
    counting: Counting,
    /// `(covariate, cap)` sorted tightest first; infinite caps dropped.
    caps: Vec<(usize, f64)>,
    /// Column sums of the capped covariates, aligned with `caps`.
    cap_totals: Vec<f64>,
    /// Present for constrained complete designs with two-valued capped
    /// covariates.
    staged: Option<StagedProposal>,
    max_attempts: u64,
}

/// Largest number of two-valued covariates split on by [`StagedProposal`].
const MAX_STAGED_BINARIES: usize = 10;

/// The uniform `N_T`-subset proposal generated in stages. Units are grouped
/// into cells by their values of the two-valued capped covariates. Treated
/// counts are drawn one covariate at a time as a tree of hypergeometric
/// splits, so a proposal whose count for some covariate already breaks its
/// cap is rejected before any unit is chosen. Survivors pick their treated
/// units uniformly within each cell. The proposal distribution is exactly
/// that of a uniform subset.
#[derive(Debug, Clone)]
struct StagedProposal {
    /// `(covariate, high value, low value, cap, column total)` per level.
    levels: Vec<(usize, f64, f64, f64, f64)>,
    /// `group_sizes[l][g]`: units whose first `l` level bits spell `g`.
    group_sizes: Vec<Vec<u32>>,
    /// Units of each leaf cell.
    cells: Vec<Vec<usize>>,
    /// The first split, which every proposal uses.
    root: HypergeometricCdf,
}

impl StagedProposal {
    fn new(dataset: &MatchedDataset, n_treated: usize, caps: &[(usize, f64)], totals: &[f64]) -> Option<Self> {
        let x = dataset.covariates();
        let mut levels = Vec::new();
        for (&(k, cap), &total) in caps.iter().zip(totals) {
            let col = x.column(k);
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            if col.iter().all(|&v| v == hi || v == lo) && hi > lo && levels.len() < MAX_STAGED_BINARIES {
                levels.push((k, hi, lo, cap, total));
            }
        }
        if levels.is_empty() {
            return None;
        }
        let depth = levels.len();
        let mut cells = alloc::vec![Vec::new(); 1 << depth];
        for i in 0..dataset.n_units() {
            let cell = levels.iter().fold(0usize, |c, &(k, hi, _, _, _)| (c << 1) | usize::from(x.get(i, k) == hi));
            cells[cell].push(i);
        }
        let group_sizes: Vec<Vec<u32>> = (0..=depth)
            .map(|l| {
                let mut g = alloc::vec![0u32; 1 << l];
                for (cell, units) in cells.iter().enumerate() {
                    g[cell >> (depth - l)] += units.len() as u32;
                }
                g
            })
            .collect();
        let root = HypergeometricCdf::new(dataset.n_units() as u32, group_sizes[1][1], n_treated as u32);
        Some(StagedProposal { levels, group_sizes, cells, root })
    }
}

fn ln_choose(n: u32, k: u32) -> f64 {
    libm::lgamma(f64::from(n) + 1.0) - libm::lgamma(f64::from(k) + 1.0) - libm::lgamma(f64::from(n - k) + 1.0)
}

/// `(smallest value, CDF over the support)` of the number of successes among
/// `draws` items taken without replacement from `population` items of
/// which `successes` are successes.
#[derive(Debug, Clone)]
struct HypergeometricCdf {
    low: u32,
    cdf: Vec<f64>,
}

impl HypergeometricCdf {
    fn new(population: u32, successes: u32, draws: u32) -> Self {
        let low = draws.saturating_sub(population - successes);
        let high = successes.min(draws);
        let base = ln_choose(population, draws);
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = (low..=high)
            .map(|j| {
                acc += libm::exp(ln_choose(successes, j) + ln_choose(population - successes, draws - j) - base);
                acc
            })
            .collect();
        cdf.iter_mut().for_each(|c| *c /= acc);
        *cdf.last_mut().expect("nonempty support") = 1.0;
        HypergeometricCdf { low, cdf }
    }

    fn sample<R: RngCore>(&self, rng: &mut R) -> u32 {
        if self.cdf.len() == 1 {
            return self.low;
        }
        let u: f64 = rng.random();
        self.low + self.cdf.partition_point(|&c| c <= u) as u32
    }
}

/// Lazily built CDFs for every split of a [`StagedProposal`], indexed by
/// `[level][group][treated count of the group]`.
#[derive(Debug, Clone)]
struct SplitTables {
    tables: Vec<Vec<Vec<Option<HypergeometricCdf>>>>,
}

impl SplitTables {
    fn new(staged: &StagedProposal) -> Self {
        let tables = (0..staged.levels.len())
            .map(|l| staged.group_sizes[l].iter().map(|&pop| alloc::vec![None; pop as usize + 1]).collect())
            .collect();
        SplitTables { tables }
    }

    fn sample<R: RngCore>(&mut self, staged: &StagedProposal, rng: &mut R, level: usize, group: usize, treated: u32) -> u32 {
        let slot = &mut self.tables[level][group][treated as usize];
        let cdf = slot.get_or_insert_with(|| {
            HypergeometricCdf::new(staged.group_sizes[level][group], staged.group_sizes[level + 1][2 * group + 1], treated)
        });
        cdf.sample(rng)
    }
}

/// Relative band around a cap inside which the fast check defers to the
/// exact one.
const FAST_CHECK_SLACK: f64 = 1e-9;

fn fixed_units(dataset: &MatchedDataset, blocks: &[Block]) -> Vec<usize> {
    let mut in_block = alloc::vec![false; dataset.n_units()];
    for b in blocks {
        for &u in &b.units {
            in_block[u] = true;
        }
    }
    (0..dataset.n_units()).filter(|&i| !in_block[i]).collect()
}

impl<'a> Design<'a> {
    pub fn new(spec: &DesignSpec, dataset: &'a MatchedDataset) -> Result<Self> {
        validate(dataset, spec)?;
        let counting = match spec.kind {
            DesignKind::Complete | DesignKind::Constrained => {
                Counting::Complete { n_treated: spec.n_treated.unwrap_or_else(|| dataset.n_treated()) }
            }
            DesignKind::Block => {
                let blocks = dataset.blocks().unwrap_or_default().to_vec();
                let fixed = fixed_units(dataset, &blocks);
                Counting::Blocks { blocks, fixed }
            }
            DesignKind::Paired | DesignKind::ConstrainedPaired => {
                let blocks = dataset.blocks().unwrap_or_default();
                let fixed = fixed_units(dataset, blocks);
                Counting::Pairs { pairs: blocks.iter().map(|b| [b.units[0], b.units[1]]).collect(), fixed }
            }
        };
        let mut caps: Vec<(usize, f64)> = match &spec.caps {
            Some(c) if spec.kind.is_constrained() => c
                .resolve(dataset.covariate_names())
                .map_err(|v| Error::Invalid(alloc::vec![v]))?
                .into_iter()
                .enumerate()
                .filter(|(_, c)| c.is_finite())
                .collect(),
            _ => Vec::new(),
        };
        caps.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let x = dataset.covariates();
        let cap_totals: Vec<f64> = caps.iter().map(|&(k, _)| x.column(k).iter().sum()).collect();
        let staged = match counting {
            Counting::Complete { n_treated } if !caps.is_empty() => StagedProposal::new(dataset, n_treated, &caps, &cap_totals),
            _ => None,
        };
        Ok(Design { spec: spec.clone(), dataset, counting, caps, cap_totals, staged, max_attempts: DEFAULT_MAX_ATTEMPTS })
    }

    pub fn with_max_attempts(mut self, max_attempts: u64) -> Self {
        self.max_attempts = max_attempts.max(1);
        self
    }

    pub fn spec(&self) -> &DesignSpec {
        &self.spec
    }

    pub fn dataset(&self) -> &'a MatchedDataset {
        self.dataset
    }

    pub fn n_units(&self) -> usize {
        self.dataset.n_units()
    }

    /// Resolved cap per covariate (infinite where unconstrained), or `None`
    /// for unconstrained designs.
    pub fn caps(&self) -> Option<Vec<f64>> {
        if !self.spec.kind.is_constrained() {
            return None;
        }
        let mut v = alloc::vec![f64::INFINITY; self.dataset.n_covariates()];
        for &(k, c) in &self.caps {
            v[k] = c;
        }
        Some(v)
    }

    fn satisfies_counting(&self, w: &Assignment) -> bool {
        let obs = self.dataset.treatment();
        match &self.counting {
            Counting::Complete { n_treated } => w.n_treated() == *n_treated,
            Counting::Blocks { blocks, fixed } => {
                fixed.iter().all(|&i| w.is_treated(i) == obs.is_treated(i))
                    && blocks
                        .iter()
                        .all(|b| b.units.iter().filter(|&&i| w.is_treated(i)).count() == b.n_treated)
            }
            Counting::Pairs { pairs, fixed } => {
                fixed.iter().all(|&i| w.is_treated(i) == obs.is_treated(i))
                    && pairs.iter().all(|&[a, b]| w.is_treated(a) != w.is_treated(b))
            }
        }
    }

    /// Strict `|SMD_k| < cap_k` for every capped covariate.
    fn satisfies_caps(&self, mask: &[f64], n_treated: usize) -> bool {
        let n_control = mask.len() - n_treated;
        if n_treated == 0 || n_control == 0 {
            return self.caps.is_empty();
        }
        let x = self.dataset.covariates();
        self.caps.iter().all(|&(k, cap)| {
            mean_difference_masked(x.column(k), mask, n_treated as f64, n_control as f64).abs() < cap
        })
    }

    /// Whether `w` lies in the support of the design.
    pub fn in_support(&self, w: &Assignment) -> bool {
        if w.len() != self.n_units() || !self.satisfies_counting(w) {
            return false;
        }
        self.caps.is_empty() || self.satisfies_caps(&w.to_f64(), w.n_treated())
    }

    /// Fills `scratch.treated` with the treated units of a fresh proposal.
    fn propose<R: RngCore>(&self, rng: &mut R, scratch: &mut Scratch) {
        let treated = &mut scratch.treated;
        treated.clear();
        match &self.counting {
            Counting::Complete { n_treated } => {
                let perm = &mut scratch.perm;
                let n = perm.len();
                for i in 0..*n_treated {
                    let j = rng.random_range(i..n);
                    perm.swap(i, j);
                }
                treated.extend_from_slice(&perm[..*n_treated]);
            }
            Counting::Blocks { blocks, fixed } => {
                let obs = self.dataset.treatment();
                treated.extend(fixed.iter().copied().filter(|&i| obs.is_treated(i)));
                for (b, units) in blocks.iter().zip(scratch.block_perms.iter_mut()) {
                    let n = units.len();
                    for i in 0..b.n_treated {
                        let j = rng.random_range(i..n);
                        units.swap(i, j);
                    }
                    treated.extend_from_slice(&units[..b.n_treated]);
                }
            }
            Counting::Pairs { pairs, fixed } => {
                let obs = self.dataset.treatment();
                treated.extend(fixed.iter().copied().filter(|&i| obs.is_treated(i)));
                let mut bits = 0u64;
                for (j, &[a, b]) in pairs.iter().enumerate() {
                    if j % 64 == 0 {
                        bits = rng.next_u64();
                    }
                    treated.push(if bits & 1 == 1 { a } else { b });
                    bits >>= 1;
                }
            }
        }
    }

    /// Staged form of the complete-design proposal. Returns false when the
    /// proposal is already known to violate a cap; otherwise
    /// `scratch.treated` holds the proposal.
    fn propose_staged<R: RngCore>(&self, staged: &StagedProposal, n_treated: usize, rng: &mut R, scratch: &mut Scratch) -> bool {
        let n = self.n_units();
        let nt = n_treated as f64;
        let nc = (n - n_treated) as f64;
        let (counts, parents) = (&mut scratch.group_counts, &mut scratch.parent_counts);
        counts.clear();
        counts.push(n_treated as u32);
        for (l, &(_, hi, lo, cap, total)) in staged.levels.iter().enumerate() {
            core::mem::swap(counts, parents);
            counts.clear();
            let mut with_high = 0u32;
            for (g, &t) in parents.iter().enumerate() {
                let h = match &mut scratch.splits {
                    Some(splits) if l > 0 => splits.sample(staged, rng, l, g, t),
                    _ => staged.root.sample(rng),
                };
                counts.push(t - h);
                counts.push(h);
                with_high += h;
            }
            let st = hi * f64::from(with_high) + lo * (nt - f64::from(with_high));
            if (st / nt - (total - st) / nc).abs() > cap * (1.0 + FAST_CHECK_SLACK) {
                return false;
            }
        }
        scratch.treated.clear();
        for ((units, perm), &t) in staged.cells.iter().zip(scratch.cell_perms.iter_mut()).zip(counts.iter()) {
            let m = units.len();
            for i in 0..t as usize {
                let j = rng.random_range(i..m);
                perm.swap(i, j);
            }
            scratch.treated.extend_from_slice(&perm[..t as usize]);
        }
        true
    }

    fn fill_mask(scratch: &mut Scratch) {
        scratch.mask.iter_mut().for_each(|m| *m = 0.0);
        for &i in &scratch.treated {
            scratch.mask[i] = 1.0;
        }
    }

    /// Cap check of the proposal in `scratch`. A cheap sum over the treated
    /// units settles every case away from the boundary; near it the answer
    /// comes from [`Self::satisfies_caps`] so sampler and `in_support` agree.
    fn proposal_in_caps(&self, scratch: &mut Scratch) -> bool {
        let x = self.dataset.covariates();
        let nt = scratch.treated.len();
        let nc = self.n_units() - nt;
        if nt == 0 || nc == 0 {
            return self.caps.is_empty();
        }
        let mut unsure = false;
        for (&(k, cap), &total) in self.caps.iter().zip(&self.cap_totals) {
            let col = x.column(k);
            let st: f64 = scratch.treated.iter().map(|&i| col[i]).sum();
            let d = (st / nt as f64 - (total - st) / nc as f64).abs();
            if d > cap * (1.0 + FAST_CHECK_SLACK) {
                return false;
            }
            unsure |= d >= cap * (1.0 - FAST_CHECK_SLACK);
        }
        if unsure {
            Self::fill_mask(scratch);
            return self.satisfies_caps(&scratch.mask, nt);
        }
        true
    }

    fn scratch(&self) -> Scratch {
        let n = self.n_units();
        let block_perms = match &self.counting {
            Counting::Blocks { blocks, .. } => blocks.iter().map(|b| b.units.clone()).collect(),
            _ => Vec::new(),
        };
        Scratch {
            perm: (0..n).collect(),
            mask: alloc::vec![0.0; n],
            treated: Vec::new(),
            block_perms,
            cell_perms: self.staged.as_ref().map(|s| s.cells.clone()).unwrap_or_default(),
            group_counts: Vec::new(),
            parent_counts: Vec::new(),
            splits: self.staged.as_ref().map(SplitTables::new),
        }
    }

    /// One uniform draw from the support, rejection-sampling constrained
    /// designs. `draw_index` is only recorded.
    pub fn sample<R: RngCore>(&self, rng: &mut R, draw_index: usize) -> Result<AssignmentDraw> {
        let mut scratch = self.scratch();
        let mut attempts = 0u64;
        while attempts < self.max_attempts {
            attempts += 1;
            let alive = match (&self.staged, &self.counting) {
                (Some(staged), Counting::Complete { n_treated }) => self.propose_staged(staged, *n_treated, rng, &mut scratch),
                _ => {
                    self.propose(rng, &mut scratch);
                    true
                }
            };
            if alive && (self.caps.is_empty() || self.proposal_in_caps(&mut scratch)) {
                Self::fill_mask(&mut scratch);
                let assignment = Assignment::new(scratch.mask.iter().map(|&m| m == 1.0).collect());
                return Ok(AssignmentDraw { assignment, draw_index, attempts });
            }
        }
        Err(Error::SupportExhausted { draw_index, attempts })
    }

    /// Draw `index` of the stream keyed by `seed`.
    pub fn sample_indexed(&self, seed: u64, index: usize) -> Result<AssignmentDraw> {
        let mut r = rng::substream(seed, index as u64);
        self.sample(&mut r, index)
    }

    /// `m` independent draws; draw `i` depends only on `(seed, i)`.
    pub fn draw_set(&self, m: usize, seed: u64) -> Result<DrawSet> {
        if m == 0 {
            return Err(Error::InvalidArgument("m must be at least 1".into()));
        }
        let draws = (0..m).map(|i| self.sample_indexed(seed, i)).collect::<Result<Vec<_>>>()?;
        Ok(DrawSet { draws, seed, generator: rng::GENERATOR })
    }

    /// Number of assignments satisfying the counting constraints.
    pub fn candidate_count(&self) -> u128 {
        match &self.counting {
            Counting::Complete { n_treated } => binomial(self.n_units() as u64, *n_treated as u64),
            Counting::Blocks { blocks, .. } => blocks
                .iter()
                .map(|b| binomial(b.units.len() as u64, b.n_treated as u64))
                .fold(1u128, |a, c| a.saturating_mul(c)),
            Counting::Pairs { pairs, .. } => {
                if pairs.len() >= 128 {
                    u128::MAX
                } else {
                    1u128 << pairs.len()
                }
            }
        }
    }

    /// Every support member, in a fixed order. Fails when the candidate
    /// space exceeds `limit`.
    pub fn enumerate_support(&self, limit: u128) -> Result<Vec<Assignment>> {
        let size = self.candidate_count();
        if size > limit {
            return Err(Error::LimitExceeded { size, limit });
        }
        let n = self.n_units();
        let obs = self.dataset.treatment();
        let mut out = Vec::new();
        let mut keep = |bits: Vec<bool>| {
            let w = Assignment::new(bits);
            if self.in_support(&w) {
                out.push(w);
            }
        };
        match &self.counting {
            Counting::Complete { n_treated } => {
                for_each_combination(n, *n_treated, |idx| {
                    let mut bits = alloc::vec![false; n];
                    for &i in idx {
                        bits[i] = true;
                    }
                    keep(bits);
                });
            }
            Counting::Blocks { blocks, fixed } => {
                let per_block: Vec<Vec<Vec<usize>>> = blocks
                    .iter()
                    .map(|b| {
                        let mut combos = Vec::new();
                        for_each_combination(b.units.len(), b.n_treated, |idx| {
                            combos.push(idx.iter().map(|&r| b.units[r]).collect());
                        });
                        combos
                    })
                    .collect();
                let mut choice = alloc::vec![0usize; blocks.len()];
                loop {
                    let mut bits = alloc::vec![false; n];
                    for &i in fixed {
                        bits[i] = obs.is_treated(i);
                    }
                    for (j, &c) in choice.iter().enumerate() {
                        for &u in &per_block[j][c] {
                            bits[u] = true;
                        }
                    }
                    keep(bits);
                    if !advance(&mut choice, |j| per_block[j].len()) {
                        break;
                    }
                }
            }
            Counting::Pairs { pairs, fixed } => {
                for code in 0..(1u128 << pairs.len()) {
                    let mut bits = alloc::vec![false; n];
                    for &i in fixed {
                        bits[i] = obs.is_treated(i);
                    }
                    for (j, &[a, b]) in pairs.iter().enumerate() {
                        if code >> j & 1 == 1 {
                            bits[a] = true;
                        } else {
                            bits[b] = true;
                        }
                    }
                    keep(bits);
                }
            }
        }
        Ok(out)
    }
}

struct Scratch {
    perm: Vec<usize>,
    mask: Vec<f64>,
    treated: Vec<usize>,
    block_perms: Vec<Vec<usize>>,
    cell_perms: Vec<Vec<usize>>,
    group_counts: Vec<u32>,
    parent_counts: Vec<u32>,
    splits: Option<SplitTables>,
}

/// Mixed-radix increment; false once every digit has wrapped.
fn advance(digits: &mut [usize], radix: impl Fn(usize) -> usize) -> bool {
    for j in 0..digits.len() {
        digits[j] += 1;
        if digits[j] < radix(j) {
            return true;
        }
        digits[j] = 0;
    }
    false
}

/// Calls `f` with every `k`-subset of `0..n` in lexicographic order.
fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = match acc.checked_mul(u128::from(n - i)) {
            Some(v) => v / u128::from(i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Membership of `w` in the support of `spec` on `dataset`.
pub fn in_support(spec: &DesignSpec, dataset: &MatchedDataset, w: &Assignment) -> Result<bool> {
    Ok(Design::new(spec, dataset)?.in_support(w))
}

pub fn sample<R: RngCore>(spec: &DesignSpec, dataset: &MatchedDataset, rng: &mut R) -> Result<AssignmentDraw> {
    Design::new(spec, dataset)?.sample(rng, 0)
}

pub fn draw_set(spec: &DesignSpec, dataset: &MatchedDataset, m: usize, seed: u64) -> Result<DrawSet> {
    Design::new(spec, dataset)?.draw_set(m, seed)
}

pub fn enumerate_support(spec: &DesignSpec, dataset: &MatchedDataset, limit: u128) -> Result<Vec<Assignment>> {
    Design::new(spec, dataset)?.enumerate_support(limit)
}
