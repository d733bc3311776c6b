//! Triangle blocks and the cyclic indexing family that packs them into the
//! square zones of a symmetric matrix.
//!
//! With zones of side `c`, block `B(i, j)` takes one row from each of the `k`
//! zone rows: row `u*c + f(i, j, u)`. Two blocks overlap exactly when their
//! row functions agree on two different arguments, and the cyclic family
//! avoids that whenever `c` is coprime with every integer in `[2, k-2]`.

use std::collections::HashMap;

use num_integer::Integer;

use crate::error::{Error, Result};

/// Smallest side length of a triangle block holding at least `m` pairs:
/// the least `s` with `m <= s(s-1)/2`.
pub fn sigma(m: u64) -> u64 {
    if m == 0 {
        return 0;
    }
    let mut s = ((2.0 * m as f64).sqrt() as u64).max(1);
    while s * (s - 1) / 2 >= m && s > 1 {
        s -= 1;
    }
    while s * (s - 1) / 2 < m {
        s += 1;
    }
    s
}

/// `ceil(sqrt(1/4 + 2m) + 1/2)` evaluated in floating point.
pub fn sigma_closed_form(m: u64) -> u64 {
    if m == 0 {
        return 0;
    }
    ((0.25 + 2.0 * m as f64).sqrt() + 0.5).ceil() as u64
}

/// Row offset of block `(i, j)` inside zone row `u`.
pub fn cyclic_index(i: usize, j: usize, c: usize, u: usize) -> usize {
    if u == 0 {
        j
    } else {
        (i + j * (u - 1)) % c
    }
}

/// Primes `p <= bound`.
pub fn primes_up_to(bound: usize) -> Vec<usize> {
    let mut sieve = vec![true; bound + 1];
    let mut out = Vec::new();
    for p in 2..=bound {
        if sieve[p] {
            out.push(p);
            let mut q = p * p;
            while q <= bound {
                sieve[q] = false;
                q += p;
            }
        }
    }
    out
}

/// Product of all primes `<= k - 2`, or `None` when it exceeds `u128`.
pub fn primorial_q(k: usize) -> Option<u128> {
    primes_up_to(k.saturating_sub(2))
        .into_iter()
        .try_fold(1u128, |acc, p| acc.checked_mul(p as u128))
}

/// Largest `c <= x` with `gcd(c, q) = 1`.
pub fn largest_coprime_below(x: u128, q: u128) -> u128 {
    assert!(x >= 1);
    (1..=x).rev().find(|c| c.gcd(&q) == 1).unwrap_or(1)
}

/// Same search as [`largest_coprime_below`] with `q` given by its prime
/// factors, which stays exact when `q` itself overflows. Returns 0 for
/// `x == 0`.
pub fn largest_coprime_with_primes(x: usize, primes: &[usize]) -> usize {
    (1..=x).rev().find(|c| primes.iter().all(|p| c % p != 0)).unwrap_or(0)
}

/// Two blocks whose row functions agree at two arguments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Collision {
    pub first: (usize, usize),
    pub second: (usize, usize),
    pub u: usize,
    pub v: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FamilyCheck {
    pub valid: bool,
    pub witness: Option<Collision>,
}

/// Exhaustive validity check of the cyclic `(c, k)` family.
pub fn validate_family(c: usize, k: usize) -> FamilyCheck {
    for u in 0..k {
        for v in u + 1..k {
            let mut seen: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
            for i in 0..c {
                for j in 0..c {
                    let key = (cyclic_index(i, j, c, u), cyclic_index(i, j, c, v));
                    if let Some(&first) = seen.get(&key) {
                        let witness = Collision { first, second: (i, j), u, v };
                        return FamilyCheck { valid: false, witness: Some(witness) };
                    }
                    seen.insert(key, (i, j));
                }
            }
        }
    }
    FamilyCheck { valid: true, witness: None }
}

/// Whether `c` is coprime with every integer in `[2, k-2]`.
pub fn coprime_with_small_integers(c: usize, k: usize) -> bool {
    (2..k.saturating_sub(1)).all(|d| c.gcd(&d) == 1)
}

/// All subdiagonal pairs of a strictly increasing row set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriangleBlock {
    rows: Vec<usize>,
}

impl TriangleBlock {
    pub fn new(rows: Vec<usize>) -> Result<Self> {
        if rows.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("triangle block rows must be strictly increasing".into()));
        }
        Ok(TriangleBlock { rows })
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn side(&self) -> usize {
        self.rows.len()
    }

    /// `|R| (|R| - 1) / 2`.
    pub fn len(&self) -> usize {
        self.rows.len() * self.rows.len().saturating_sub(1) / 2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Pairs `(r, r')` with `r > r'`, ordered by `r` then `r'`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(move |(u, &r)| self.rows[..u].iter().map(move |&r2| (r, r2)))
    }

    pub fn contains(&self, r: usize, r2: usize) -> bool {
        r > r2 && self.rows.binary_search(&r).is_ok() && self.rows.binary_search(&r2).is_ok()
    }
}

/// Largest `k` such that a block of `k` tiles of side `tile` plus one column
/// sliver of `A` (`k * tile` elements) fits: `tile^2 k(k-1)/2 + k tile <= S`.
/// With `tile = 1` this is the largest `k` with `k(k+1)/2 <= S`.
pub fn block_side(capacity: usize, tile: usize) -> Result<usize> {
    if tile == 0 {
        return Err(Error::InvalidArgument("tile size must be positive".into()));
    }
    let need = |k: usize| tile * tile * (k * k.saturating_sub(1) / 2) + k * tile;
    if need(2) > capacity {
        return Err(Error::MemoryTooSmall {
            capacity,
            reason: format!("a pair of {tile}x{tile} tiles needs {} elements", need(2)),
        });
    }
    let mut k = 2;
    while need(k + 1) <= capacity {
        k += 1;
    }
    Ok(k)
}

/// Zone partition chosen by TBS for one `n`-row call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrianglePlan {
    pub n: usize,
    pub capacity: usize,
    /// Side of the `b x b` tiles the blocks are made of (1 for plain TBS).
    pub tile: usize,
    /// Number of tile rows per block.
    pub k: usize,
    /// Primes whose product is `q`.
    pub primes: Vec<usize>,
    /// Zone side, in tiles.
    pub c: usize,
    /// Rows left to square-tile SYRK: `n - c k b`.
    pub l: usize,
    pub fallback: bool,
    /// Number of nested TBS levels that use triangle blocks.
    pub depth: usize,
}

impl TrianglePlan {
    /// `q` as an integer, `None` when it does not fit in 128 bits.
    pub fn q(&self) -> Option<u128> {
        self.primes.iter().try_fold(1u128, |acc, &p| acc.checked_mul(p as u128))
    }

    /// Rows of one zone: `c * tile`.
    pub fn zone_rows(&self) -> usize {
        self.c * self.tile
    }

    /// Rows covered by triangle blocks and recursive calls.
    pub fn blocked_rows(&self) -> usize {
        if self.fallback {
            0
        } else {
            self.c * self.k * self.tile
        }
    }

    /// Gap `n/(k b) - c`, the quantity bounded by `q`.
    pub fn gap(&self) -> f64 {
        self.n as f64 / (self.k * self.tile) as f64 - self.c as f64
    }

    pub const CSV_HEADER: &'static str = "N,S,b,k,q,c,l,fallback,depth";

    pub fn csv_row(&self) -> String {
        let q = self.q().map_or_else(|| "overflow".to_string(), |q| q.to_string());
        format!(
            "{},{},{},{},{q},{},{},{},{}",
            self.n, self.capacity, self.tile, self.k, self.c, self.l, self.fallback, self.depth
        )
    }

    /// Tile rows of block `(i, j)`.
    pub fn block(&self, i: usize, j: usize) -> Result<TriangleBlock> {
        enumerate_block(self, i, j)
    }
}

/// Plan for plain TBS: `k` maximal with `k(k+1)/2 <= S`.
pub fn build_plan(n: usize, capacity: usize) -> Result<TrianglePlan> {
    build_tiled_plan(n, capacity, 1)
}

/// Plan for TBS over `tile x tile` tiles.
pub fn build_tiled_plan(n: usize, capacity: usize, tile: usize) -> Result<TrianglePlan> {
    if capacity < 3 {
        return Err(Error::MemoryTooSmall { capacity, reason: "TBS needs at least 3 elements".into() });
    }
    let k = block_side(capacity, tile)?;
    let primes = primes_up_to(k - 2);
    let c = largest_coprime_with_primes(n / (k * tile), &primes);
    let fallback = c < k - 1 || c == 0;
    let l = if fallback { n } else { n - c * k * tile };
    let depth = if fallback { 0 } else { 1 + build_tiled_plan(c * tile, capacity, tile)?.depth };
    Ok(TrianglePlan { n, capacity, tile, k, primes, c, l, fallback, depth })
}

/// Rows `u*c + f(i, j, u)`, `u < k`, of block `(i, j)` (in tile units).
pub fn enumerate_block(plan: &TrianglePlan, i: usize, j: usize) -> Result<TriangleBlock> {
    let c = plan.c;
    if plan.fallback {
        return Err(Error::InvalidArgument("plan has no triangle blocks".into()));
    }
    if i >= c || j >= c {
        return Err(Error::InvalidArgument(format!("block ({i}, {j}) outside [0, {c})^2")));
    }
    Ok(TriangleBlock { rows: (0..plan.k).map(|u| u * c + cyclic_index(i, j, c, u)).collect() })
}
