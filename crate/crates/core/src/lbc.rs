//! Large Block Cholesky.
//!
//! A right-looking factorization over blocks of `b` columns. Iteration `i`
//! factors the diagonal block `A[I0, I0]` with the one-tile kernel, solves
//! the panel `A[I1, I0]` against it, and subtracts `A[I1, I0] A[I1, I0]^T`
//! from the trailing triangle `A[I1, I1]` with TBS.

use std::ops::Range;

use crate::baseline::{chunks, count_factor, ooc_chol_view, ooc_trsm_view, run_factor};
use crate::error::{Error, Result};
use crate::io_model::IoReport;
use crate::machine::{Machine, PanelView, TriView, Update};
use crate::matrix::PackedTriangular;
use crate::scalar::Scalar;
use crate::tbs::tbs_view;

/// `max(1, floor(sqrt(N)))`.
pub fn choose_block_size(n: usize) -> usize {
    n.isqrt().max(1)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LbcPlan {
    pub n: usize,
    pub b: usize,
    /// Column ranges `I0` of successive iterations; the last may be short.
    pub blocks: Vec<Range<usize>>,
}

impl LbcPlan {
    pub fn new(n: usize, block: Option<usize>) -> Result<Self> {
        let b = block.unwrap_or_else(|| choose_block_size(n));
        if b == 0 {
            return Err(Error::InvalidArgument("block size must be positive".into()));
        }
        Ok(LbcPlan { n, b, blocks: chunks(0..n, b).collect() })
    }

    /// Trailing range `I1` of iteration `i`.
    pub fn trailing(&self, i: usize) -> Range<usize> {
        self.blocks[i].end..self.n
    }
}

/// Loads issued by one iteration, split by sub-kernel.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LbcIteration {
    pub start: usize,
    pub width: usize,
    pub trailing: usize,
    pub chol_loads: u64,
    pub trsm_loads: u64,
    pub tbs_loads: u64,
}

/// LBC on a view over a shared machine.
pub fn lbc_view<T: Scalar>(m: &mut Machine<'_, T>, a: &TriView, plan: &LbcPlan) -> Result<Vec<LbcIteration>> {
    if plan.n != a.n() {
        return Err(Error::DimensionMismatch(format!("plan for {} rows, matrix has {}", plan.n, a.n())));
    }
    let mut iterations = Vec::with_capacity(plan.blocks.len());
    for (i, i0) in plan.blocks.iter().enumerate() {
        let i1 = plan.trailing(i);
        let diag = a.sub(i0.start, i0.len());
        let mut it = LbcIteration { start: i0.start, width: i0.len(), trailing: i1.len(), ..Default::default() };

        let before = m.ledger().loads();
        ooc_chol_view(m, &diag).map_err(|e| shift_column(e, i0.start))?;
        it.chol_loads = m.ledger().loads() - before;

        if !i1.is_empty() {
            let panel = PanelView::packed_block(a.matrix(), a.base() + i1.start, a.base() + i0.start, i1.len(), i0.len())?;
            let before = m.ledger().loads();
            ooc_trsm_view(m, &diag, &panel).map_err(|e| shift_column(e, i0.start))?;
            it.trsm_loads = m.ledger().loads() - before;

            let before = m.ledger().loads();
            tbs_view(m, &panel, &a.sub(i1.start, i1.len()), 1, Update::Subtract)?;
            it.tbs_loads = m.ledger().loads() - before;
        }
        iterations.push(it);
    }
    Ok(iterations)
}

fn shift_column(e: Error, offset: usize) -> Error {
    match e {
        Error::NotPositiveDefinite { column } => Error::NotPositiveDefinite { column: column + offset },
        Error::SingularTriangle { column } => Error::SingularTriangle { column: column + offset },
        other => other,
    }
}

/// Cholesky factor of an SPD matrix with blocks of `block` columns
/// (default `floor(sqrt(N))`).
pub fn lbc<T: Scalar>(
    a: &PackedTriangular<T>,
    capacity: usize,
    block: Option<usize>,
) -> Result<(PackedTriangular<T>, IoReport)> {
    let plan = LbcPlan::new(a.n(), block)?;
    run_factor(a, capacity, |m, view| lbc_view(m, view, &plan).map(drop))
}

pub fn lbc_count(n: usize, capacity: usize, block: Option<usize>) -> Result<IoReport> {
    Ok(lbc_count_with_stats(n, capacity, block)?.0)
}

pub fn lbc_count_with_stats(n: usize, capacity: usize, block: Option<usize>) -> Result<(IoReport, Vec<LbcIteration>)> {
    let plan = LbcPlan::new(n, block)?;
    let mut iterations = Vec::new();
    let report = count_factor(n, capacity, |m, view| {
        iterations = lbc_view(m, view, &plan)?;
        Ok(())
    })?;
    Ok((report, iterations))
}

/// Four-term cost decomposition plus a lower-order allowance:
/// `b^2 N/(3 sqrt S) + b N^2/(2 sqrt S) + N^3/(3 sqrt 2 sqrt S) + N^3/(6b) + c5 N^2 log2 N`.
pub fn lbc_envelope(n: f64, b: f64, s: f64, c5: f64) -> f64 {
    let rs = s.sqrt();
    b * b * n / (3.0 * rs)
        + b * n * n / (2.0 * rs)
        + n * n * n / (3.0 * 2f64.sqrt() * rs)
        + n * n * n / (6.0 * b)
        + c5 * n * n * n.max(1.0).log2()
}
