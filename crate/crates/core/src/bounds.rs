//! Lower bounds on data movement and an exhaustive oracle for the
//! maximal-subcomputation problem `P(X)`: maximize `|H|` subject to
//! `D(H) <= X`, where `D(H) = |U_k H|_k| + sum_k |footprint(H|_k)|`.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::triangle::sigma;

/// One update `C[i][j] (+|-)= A[i][k] * A[j][k]`, indices 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OpTriple {
    pub i: u32,
    pub j: u32,
    pub k: u32,
}

impl OpTriple {
    pub fn new(i: u32, j: u32, k: u32) -> Self {
        OpTriple { i, j, k }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    /// `1 <= j < i <= N`, `1 <= k <= M`.
    Syrk,
    /// `1 <= k < j < i <= N`.
    Chol,
}

impl std::str::FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "syrk" => Ok(Domain::Syrk),
            "chol" => Ok(Domain::Chol),
            other => Err(Error::InvalidArgument(format!("unknown domain `{other}`"))),
        }
    }
}

/// All operations of a domain, ordered by `(k, i, j)`. `m` is ignored for
/// Cholesky.
pub fn domain_triples(domain: Domain, n: u32, m: u32) -> Vec<OpTriple> {
    let mut out = Vec::new();
    match domain {
        Domain::Syrk => {
            for k in 1..=m {
                for i in 1..=n {
                    for j in 1..i {
                        out.push(OpTriple::new(i, j, k));
                    }
                }
            }
        }
        Domain::Chol => {
            for k in 1..=n {
                for i in k + 1..=n {
                    for j in k + 1..i {
                        out.push(OpTriple::new(i, j, k));
                    }
                }
            }
        }
    }
    out
}

/// Number of elements accessed by a set of operations. Duplicates count once.
pub fn data_accessed(h: &[OpTriple]) -> u64 {
    let pairs: BTreeSet<(u32, u32)> = h.iter().map(|t| (t.i, t.j)).collect();
    let mut footprints: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
    for t in h {
        let f = footprints.entry(t.k).or_default();
        f.insert(t.i);
        f.insert(t.j);
    }
    pairs.len() as u64 + footprints.values().map(|f| f.len() as u64).sum::<u64>()
}

/// `sqrt(2) / (3 sqrt(3)) * X^(3/2)`.
pub fn hmax_bound(x: f64) -> f64 {
    2f64.sqrt() / (3.0 * 3f64.sqrt()) * x.powf(1.5)
}

/// `N^2 M / (sqrt(2) sqrt(S))`.
pub fn syrk_lower_bound(n: f64, m: f64, s: f64) -> f64 {
    n * n * m / (2f64.sqrt() * s.sqrt())
}

/// `N^3 / (3 sqrt(2) sqrt(S))`.
pub fn chol_lower_bound(n: f64, s: f64) -> f64 {
    n * n * n / (3.0 * 2f64.sqrt() * s.sqrt())
}

pub const SYRK_BOUND_CONSTANT: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// `1 / (3 sqrt(2))`.
pub const CHOL_BOUND_CONSTANT: f64 = std::f64::consts::FRAC_1_SQRT_2 / 3.0;

/// Stationary point of the relaxed problem
/// `max K I(I-1)/2  s.t.  I(I-1)/2 + K I <= X`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PprimeOptimum {
    pub i: f64,
    pub k: f64,
    pub value: f64,
}

pub fn pprime_optimum(x: f64) -> PprimeOptimum {
    let s = (1.0 + 6.0 * x).sqrt();
    let i = 2.0 / 3.0 + s / 3.0;
    let k = (i - 0.5) * (1.0 - 1.0 / i);
    let value = (s - 1.0).powi(2) * (2.0 * s + 1.0) / 108.0;
    PprimeOptimum { i, k, value }
}

/// Objective of `(I, J, K)` in the relaxed balanced problem.
pub fn pprime_objective(i: f64, j: f64, k: f64) -> f64 {
    k * i * (i - 1.0) / 2.0 + j * (j - 1.0) / 2.0
}

/// Data accessed by `(I, J, K)` in the relaxed balanced problem.
pub fn pprime_cost(i: f64, j: f64, k: f64) -> f64 {
    i * (i - 1.0) / 2.0 + k * i + j
}

/// Folds the partial iteration into the full ones: `(I, 0, K + J(J-1)/(I(I-1)))`.
pub fn j_elimination(i: f64, j: f64, k: f64) -> (f64, f64, f64) {
    (i, 0.0, k + j * (j - 1.0) / (i * (i - 1.0)))
}

/// First `m` pairs of `TB([1, sigma(m)])` in row order.
pub fn canonical_triangle(m: u64) -> Vec<(u32, u32)> {
    let mut out = Vec::with_capacity(m as usize);
    let mut i = 2u32;
    while (out.len() as u64) < m {
        for j in 1..i {
            if out.len() as u64 == m {
                break;
            }
            out.push((i, j));
        }
        i += 1;
    }
    out
}

/// Balanced solution `B(x, m)`: `K = floor(x/m)` iterations holding the
/// canonical triangle of `m` pairs, then one holding `m' = x - K m` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Balanced {
    pub full_iterations: u64,
    pub m: u64,
    pub remainder: u64,
    pub ops: Vec<OpTriple>,
}

impl Balanced {
    /// `D(B)` from the closed form.
    pub fn cost(&self) -> u64 {
        balanced_cost(self.full_iterations * self.m + self.remainder, self.m)
    }
}

pub fn balanced_solution(x: u64, m: u64) -> Result<Balanced> {
    if m == 0 {
        return Err(Error::InvalidArgument("balanced solution needs m >= 1".into()));
    }
    let (full, rem) = (x / m, x % m);
    let mut ops = Vec::with_capacity(x as usize);
    for k in 0..full {
        ops.extend(canonical_triangle(m).into_iter().map(|(i, j)| OpTriple::new(i, j, k as u32 + 1)));
    }
    ops.extend(canonical_triangle(rem).into_iter().map(|(i, j)| OpTriple::new(i, j, full as u32 + 1)));
    Ok(Balanced { full_iterations: full, m, remainder: rem, ops })
}

/// `D(B(x, m))`.
pub fn balanced_cost(x: u64, m: u64) -> u64 {
    let (full, rem) = (x / m, x % m);
    let union = if full >= 1 { m } else { rem };
    union + full * sigma(m) + sigma(rem)
}

/// Largest `|H|` per cost, for every subset of a small domain.
#[derive(Debug, Clone)]
pub struct PmaxProfile {
    pub triples: Vec<OpTriple>,
    /// `best[d]` is the largest `|H|` with `D(H) <= d`, with a witness mask.
    best: Vec<(u32, u64)>,
}

pub const DEFAULT_ORACLE_LIMIT: usize = 18;

impl PmaxProfile {
    /// `D` of the whole domain; `P(X)` is constant beyond it.
    pub fn full_cost(&self) -> u64 {
        self.best.len() as u64 - 1
    }

    pub fn pmax(&self, x: u64) -> u32 {
        self.best[(x as usize).min(self.best.len() - 1)].0
    }

    pub fn witness(&self, x: u64) -> Vec<OpTriple> {
        let mask = self.best[(x as usize).min(self.best.len() - 1)].1;
        self.triples.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, t)| *t).collect()
    }
}

struct Search<'a> {
    triples: &'a [OpTriple],
    n: usize,
    pair_uses: Vec<u32>,
    row_uses: Vec<u32>,
    cost: u64,
    best: Vec<(u32, u64)>,
}

impl Search<'_> {
    fn pair(&self, t: &OpTriple) -> usize {
        t.i as usize * (self.n + 1) + t.j as usize
    }

    fn rows(&self, t: &OpTriple) -> [usize; 2] {
        let base = t.k as usize * (self.n + 1);
        [base + t.i as usize, base + t.j as usize]
    }

    fn add(&mut self, t: &OpTriple) {
        let p = self.pair(t);
        self.pair_uses[p] += 1;
        self.cost += (self.pair_uses[p] == 1) as u64;
        for r in self.rows(t) {
            self.row_uses[r] += 1;
            self.cost += (self.row_uses[r] == 1) as u64;
        }
    }

    fn remove(&mut self, t: &OpTriple) {
        let p = self.pair(t);
        self.cost -= (self.pair_uses[p] == 1) as u64;
        self.pair_uses[p] -= 1;
        for r in self.rows(t) {
            self.cost -= (self.row_uses[r] == 1) as u64;
            self.row_uses[r] -= 1;
        }
    }

    fn dfs(&mut self, next: usize, size: u32, mask: u64) {
        let slot = &mut self.best[self.cost as usize];
        if size > slot.0 {
            *slot = (size, mask);
        }
        for b in next..self.triples.len() {
            let t = self.triples[b];
            self.add(&t);
            self.dfs(b + 1, size + 1, mask | 1 << b);
            self.remove(&t);
        }
    }
}

/// Exhaustive `P(X)` profile over every subset of the domain.
pub fn oracle_profile(domain: Domain, n: u32, m: u32, limit: usize) -> Result<PmaxProfile> {
    let triples = domain_triples(domain, n, m);
    let limit = limit.min(63);
    if triples.len() > limit {
        return Err(Error::DomainTooLarge { triples: triples.len(), limit });
    }
    let full = data_accessed(&triples) as usize;
    let n = n as usize;
    let kmax = triples.iter().map(|t| t.k as usize).max().unwrap_or(0);
    let mut search = Search {
        triples: &triples,
        n,
        pair_uses: vec![0; (n + 1) * (n + 1)],
        row_uses: vec![0; (kmax + 1) * (n + 1)],
        cost: 0,
        best: vec![(0, 0); full + 1],
    };
    search.dfs(0, 0, 0);
    let mut best = search.best;
    for d in 1..best.len() {
        if best[d - 1].0 >= best[d].0 {
            best[d] = best[d - 1];
        }
    }
    Ok(PmaxProfile { triples, best })
}

/// Optimum of `P(X)` with a witness achieving it.
pub fn brute_force_pmax(n: u32, m: u32, x: u64, domain: Domain, limit: usize) -> Result<(u32, Vec<OpTriple>)> {
    let profile = oracle_profile(domain, n, m, limit)?;
    Ok((profile.pmax(x), profile.witness(x)))
}

/// `P(X)` for SYRK via its iteration symmetry: fix the set `U` of `C`
/// entries, then each iteration independently picks a footprint size `f`
/// and gains the most pairs of `U` spanned by `f` rows. Exact, and feasible
/// for `N <= 6` at any `M`.
pub fn syrk_pmax_structured(n: u32, m: u32, x: u64) -> Result<u32> {
    if n > 6 {
        return Err(Error::DomainTooLarge { triples: (n * (n - 1) / 2 * m) as usize, limit: 15 * m as usize });
    }
    let n = n as usize;
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..i).map(move |j| (i, j))).collect();
    // pair mask spanned by each row subset
    let spanned: Vec<u32> = (0u32..1 << n)
        .map(|v| {
            pairs
                .iter()
                .enumerate()
                .filter(|(_, &(i, j))| v >> i & 1 == 1 && v >> j & 1 == 1)
                .fold(0u32, |acc, (b, _)| acc | 1 << b)
        })
        .collect();
    let mut best = 0u32;
    for u in 0u32..1 << pairs.len() {
        let union = u.count_ones() as u64;
        if union > x {
            continue;
        }
        let mut gain = vec![0u32; n + 1];
        for (v, &sp) in spanned.iter().enumerate() {
            let f = (v as u32).count_ones() as usize;
            gain[f] = gain[f].max((u & sp).count_ones());
        }
        let budget = (x - union) as usize;
        let mut dp = vec![0u32; budget + 1];
        for _ in 0..m {
            let mut next = dp.clone();
            for b in 0..=budget {
                for (f, &g) in gain.iter().enumerate().skip(1) {
                    if f <= b {
                        next[b] = next[b].max(dp[b - f] + g);
                    }
                }
            }
            dp = next;
        }
        best = best.max(dp[budget]);
    }
    Ok(best)
}
