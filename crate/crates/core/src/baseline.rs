//! Square-tile out-of-core building blocks: SYRK, triangular solve and
//! left-looking Cholesky, plus the element-streaming schedules of the plain
//! triple loops.
//!
//! All kernels start and finish with nothing of theirs resident, so they
//! compose freely on a shared ledger.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::io_model::{IoLedger, IoReport, MatrixId};
use crate::machine::{Machine, PanelView, TriView, Update};
use crate::matrix::{packed_len, Matrix, PackedTriangular};
use crate::scalar::Scalar;

/// Largest `t` with `t^2 + 2t <= capacity`: one result tile plus two operand
/// slivers.
pub fn square_tile(capacity: usize) -> Result<usize> {
    if capacity < 3 {
        return Err(Error::MemoryTooSmall {
            capacity,
            reason: "a 1x1 tile and two operands need 3 elements".into(),
        });
    }
    let mut t = ((capacity + 1) as f64).sqrt() as usize;
    while t * t + 2 * t > capacity {
        t -= 1;
    }
    while (t + 1) * (t + 1) + 2 * (t + 1) <= capacity {
        t += 1;
    }
    Ok(t)
}

/// Partition of a `rows x cols` index space into `tile x tile` tiles, the
/// last row and column of tiles possibly ragged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileGrid {
    pub rows: usize,
    pub cols: usize,
    pub tile: usize,
}

impl TileGrid {
    pub fn new(rows: usize, cols: usize, tile: usize) -> Self {
        assert!(tile > 0);
        TileGrid { rows, cols, tile }
    }

    pub fn row_tiles(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        chunks(0..self.rows, self.tile)
    }

    pub fn col_tiles(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        chunks(0..self.cols, self.tile)
    }

    /// `(tile row, tile column)` holding element `(i, j)`.
    pub fn tile_of(&self, i: usize, j: usize) -> (usize, usize) {
        (i / self.tile, j / self.tile)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows.div_ceil(self.tile), self.cols.div_ceil(self.tile))
    }
}

pub(crate) fn chunks(range: Range<usize>, step: usize) -> impl Iterator<Item = Range<usize>> {
    let end = range.end;
    range.clone().step_by(step.max(1)).map(move |s| s..(s + step).min(end))
}

/// Square-tile SYRK restricted to rows `rows` of `c`: updates every
/// `c[i][j]`, `i` in `rows`, `j <= i`.
///
/// Row tiles cover `rows`; column tiles cover `[0, rows.start)` and then
/// coincide with the row tiles, so each tile is either a full rectangle or a
/// diagonal triangle. Each C tile is loaded once and written back once; for
/// every column of A the kernel streams one sliver per tile side.
pub fn ooc_syrk_rows<T: Scalar>(
    m: &mut Machine<'_, T>,
    a: &PanelView,
    c: &TriView,
    rows: Range<usize>,
    update: Update,
) -> Result<()> {
    if a.rows() != c.n() {
        return Err(Error::DimensionMismatch(format!("A has {} rows, C has side {}", a.rows(), c.n())));
    }
    if rows.is_empty() {
        return Ok(());
    }
    let t = square_tile(m.capacity())?;
    let cols = a.cols();
    let row_tiles: Vec<_> = chunks(rows.clone(), t).collect();
    let col_tiles: Vec<_> = chunks(0..rows.start, t).chain(row_tiles.iter().cloned()).collect();

    for ri in &row_tiles {
        for cj in col_tiles.iter().take_while(|cj| cj.start <= ri.start) {
            let diagonal = cj == ri;
            let cells: Vec<(usize, usize)> = ri
                .clone()
                .flat_map(|i| cj.clone().filter(move |&j| j <= i).map(move |j| (i, j)))
                .collect();
            m.load_all(cells.iter().map(|&(i, j)| c.addr(i, j)))?;
            for k in 0..cols {
                m.load_all(ri.clone().map(|i| a.addr(i, k)))?;
                if !diagonal {
                    m.load_all(cj.clone().map(|j| a.addr(j, k)))?;
                }
                if m.is_computing() {
                    for &(i, j) in &cells {
                        m.fma(c.addr(i, j), a.addr(i, k), a.addr(j, k), update)?;
                    }
                }
                m.evict_all(ri.clone().map(|i| a.addr(i, k)), false)?;
                if !diagonal {
                    m.evict_all(cj.clone().map(|j| a.addr(j, k)), false)?;
                }
            }
            m.evict_all(cells.iter().map(|&(i, j)| c.addr(i, j)), true)?;
        }
    }
    Ok(())
}

/// Square-tile SYRK over the whole of `c`.
pub fn ooc_syrk_view<T: Scalar>(m: &mut Machine<'_, T>, a: &PanelView, c: &TriView, update: Update) -> Result<()> {
    ooc_syrk_rows(m, a, c, 0..c.n(), update)
}

/// Solves `X L^T = B` in place: every row `r` of `b` becomes `r L^{-T}`.
///
/// When the whole factor fits next to one row of `b` it stays resident and
/// `b` is streamed row by row. Otherwise `b` is processed in `t x t` tiles,
/// each pulling the already-solved columns to its left and then finishing
/// against the diagonal block of `l` one row at a time.
pub fn ooc_trsm_view<T: Scalar>(m: &mut Machine<'_, T>, l: &TriView, b: &PanelView) -> Result<()> {
    let w = l.n();
    if b.cols() != w {
        return Err(Error::DimensionMismatch(format!("B has {} columns, L has side {w}", b.cols())));
    }
    let cap = m.capacity();
    if packed_len(w) + w <= cap {
        let factor: Vec<_> = (0..w).flat_map(|j| (0..=j).map(move |p| l.addr(j, p))).collect();
        m.load_all(factor.iter().copied())?;
        for r in 0..b.rows() {
            m.load_all((0..w).map(|j| b.addr(r, j)))?;
            if m.is_computing() {
                for j in 0..w {
                    for p in 0..j {
                        m.fma(b.addr(r, j), b.addr(r, p), l.addr(j, p), Update::Subtract)?;
                    }
                    divide_by_diagonal(m, b.addr(r, j), l.addr(j, j), j)?;
                }
            }
            m.evict_all((0..w).map(|j| b.addr(r, j)), true)?;
        }
        m.evict_all(factor, false)?;
        return Ok(());
    }

    let t = square_tile(cap)?;
    for ri in chunks(0..b.rows(), t) {
        for cj in chunks(0..w, t) {
            let tile: Vec<_> = ri.clone().flat_map(|r| cj.clone().map(move |j| b.addr(r, j))).collect();
            m.load_all(tile.iter().copied())?;
            for p in 0..cj.start {
                m.load_all(ri.clone().map(|r| b.addr(r, p)))?;
                m.load_all(cj.clone().map(|j| l.addr(j, p)))?;
                if m.is_computing() {
                    for r in ri.clone() {
                        for j in cj.clone() {
                            m.fma(b.addr(r, j), b.addr(r, p), l.addr(j, p), Update::Subtract)?;
                        }
                    }
                }
                m.evict_all(ri.clone().map(|r| b.addr(r, p)), false)?;
                m.evict_all(cj.clone().map(|j| l.addr(j, p)), false)?;
            }
            for j in cj.clone() {
                let lrow = cj.start..=j;
                m.load_all(lrow.clone().map(|p| l.addr(j, p)))?;
                if m.is_computing() {
                    for r in ri.clone() {
                        for p in cj.start..j {
                            m.fma(b.addr(r, j), b.addr(r, p), l.addr(j, p), Update::Subtract)?;
                        }
                        divide_by_diagonal(m, b.addr(r, j), l.addr(j, j), j)?;
                    }
                }
                m.evict_all(lrow.map(|p| l.addr(j, p)), false)?;
            }
            m.evict_all(tile, true)?;
        }
    }
    Ok(())
}

fn divide_by_diagonal<T: Scalar>(
    m: &mut Machine<'_, T>,
    dst: crate::io_model::ElementAddr,
    diag: crate::io_model::ElementAddr,
    column: usize,
) -> Result<()> {
    let d = m.read(diag)?;
    if d == T::zero() {
        return Err(Error::SingularTriangle { column });
    }
    let v = m.read(dst)? / d;
    m.write(dst, v)
}

/// Factor a resident lower triangle in place (rows/cols `range` of `a`).
fn factor_resident<T: Scalar>(m: &mut Machine<'_, T>, a: &TriView, range: Range<usize>) -> Result<()> {
    for k in range.clone() {
        let pivot = m.read(a.addr(k, k))?;
        if !(pivot > T::zero()) {
            return Err(Error::NotPositiveDefinite { column: k });
        }
        let d = pivot.sqrt();
        m.write(a.addr(k, k), d)?;
        for i in k + 1..range.end {
            let v = m.read(a.addr(i, k))? / d;
            m.write(a.addr(i, k), v)?;
        }
        for i in k + 1..range.end {
            for j in k + 1..=i {
                m.fma(a.addr(i, j), a.addr(i, k), a.addr(j, k), Update::Subtract)?;
            }
        }
    }
    Ok(())
}

/// One-tile left-looking Cholesky of the SPD block `a`, in place.
///
/// A block that fits entirely is loaded once and factored in fast memory.
/// Otherwise each `t x t` tile of the lower triangle is loaded once, updated
/// with the finished columns to its left (streamed as slivers), then either
/// factored (diagonal tile) or solved against the finished diagonal tile one
/// factor row at a time.
pub fn ooc_chol_view<T: Scalar>(m: &mut Machine<'_, T>, a: &TriView) -> Result<()> {
    let n = a.n();
    let cap = m.capacity();
    if packed_len(n) <= cap {
        let all: Vec<_> = (0..n).flat_map(|i| (0..=i).map(move |j| a.addr(i, j))).collect();
        m.load_all(all.iter().copied())?;
        if m.is_computing() {
            factor_resident(m, a, 0..n)?;
        }
        return m.evict_all(all, true);
    }

    let t = square_tile(cap)?;
    let tiles: Vec<_> = chunks(0..n, t).collect();
    for (jt, cj) in tiles.iter().enumerate() {
        for ri in &tiles[jt..] {
            let diagonal = ri == cj;
            let cells: Vec<(usize, usize)> = ri
                .clone()
                .flat_map(|i| cj.clone().filter(move |&j| j <= i).map(move |j| (i, j)))
                .collect();
            m.load_all(cells.iter().map(|&(i, j)| a.addr(i, j)))?;
            for p in 0..cj.start {
                m.load_all(ri.clone().map(|i| a.addr(i, p)))?;
                if !diagonal {
                    m.load_all(cj.clone().map(|j| a.addr(j, p)))?;
                }
                if m.is_computing() {
                    for &(i, j) in &cells {
                        m.fma(a.addr(i, j), a.addr(i, p), a.addr(j, p), Update::Subtract)?;
                    }
                }
                m.evict_all(ri.clone().map(|i| a.addr(i, p)), false)?;
                if !diagonal {
                    m.evict_all(cj.clone().map(|j| a.addr(j, p)), false)?;
                }
            }
            if diagonal {
                if m.is_computing() {
                    factor_resident(m, a, cj.clone())?;
                }
            } else {
                for j in cj.clone() {
                    let lrow = cj.start..=j;
                    m.load_all(lrow.clone().map(|p| a.addr(j, p)))?;
                    if m.is_computing() {
                        for i in ri.clone() {
                            for p in cj.start..j {
                                m.fma(a.addr(i, j), a.addr(i, p), a.addr(j, p), Update::Subtract)?;
                            }
                            let d = m.read(a.addr(j, j))?;
                            let v = m.read(a.addr(i, j))? / d;
                            m.write(a.addr(i, j), v)?;
                        }
                    }
                    m.evict_all(lrow.map(|p| a.addr(j, p)), false)?;
                }
            }
            m.evict_all(cells.iter().map(|&(i, j)| a.addr(i, j)), true)?;
        }
    }
    Ok(())
}

/// Plain triple-loop SYRK, streaming every operand through fast memory.
/// Needs only three resident elements.
pub fn streaming_syrk_view<T: Scalar>(m: &mut Machine<'_, T>, a: &PanelView, c: &TriView) -> Result<()> {
    for i in 0..c.n() {
        for j in 0..=i {
            m.load(c.addr(i, j))?;
            for k in 0..a.cols() {
                m.load(a.addr(i, k))?;
                m.load(a.addr(j, k))?;
                if m.is_computing() {
                    m.fma(c.addr(i, j), a.addr(i, k), a.addr(j, k), Update::Add)?;
                }
                m.evict(a.addr(i, k), false)?;
                if j != i {
                    m.evict(a.addr(j, k), false)?;
                }
            }
            m.evict(c.addr(i, j), true)?;
        }
    }
    Ok(())
}

/// Plain right-looking Cholesky, streaming every operand.
pub fn streaming_cholesky_view<T: Scalar>(m: &mut Machine<'_, T>, a: &TriView) -> Result<()> {
    let n = a.n();
    for k in 0..n {
        let kk = a.addr(k, k);
        m.load(kk)?;
        if m.is_computing() {
            let pivot = m.read(kk)?;
            if !(pivot > T::zero()) {
                return Err(Error::NotPositiveDefinite { column: k });
            }
            m.write(kk, pivot.sqrt())?;
        }
        for i in k + 1..n {
            m.load(a.addr(i, k))?;
            if m.is_computing() {
                let v = m.read(a.addr(i, k))? / m.read(kk)?;
                m.write(a.addr(i, k), v)?;
            }
            m.evict(a.addr(i, k), true)?;
        }
        m.evict(kk, true)?;
        for i in k + 1..n {
            for j in k + 1..=i {
                m.load_all([a.addr(i, j), a.addr(i, k), a.addr(j, k)])?;
                if m.is_computing() {
                    m.fma(a.addr(i, j), a.addr(i, k), a.addr(j, k), Update::Subtract)?;
                }
                m.evict(a.addr(i, j), true)?;
                m.evict(a.addr(i, k), false)?;
                if j != i {
                    m.evict(a.addr(j, k), false)?;
                }
            }
        }
    }
    Ok(())
}

// Owned-matrix entry points.

pub(crate) fn run_syrk<T: Scalar>(
    a: &Matrix<T>,
    c: &mut PackedTriangular<T>,
    capacity: usize,
    kernel: impl FnOnce(&mut Machine<'_, T>, &PanelView, &TriView) -> Result<()>,
) -> Result<IoReport> {
    if a.rows() != c.n() {
        return Err(Error::DimensionMismatch(format!("A has {} rows, C has side {}", a.rows(), c.n())));
    }
    let (pa, pc) = (PanelView::dense(MatrixId::A, a.rows(), a.cols()), TriView::full(MatrixId::C, c.n()));
    let mut m = Machine::computing(IoLedger::new(capacity));
    m.attach_read_only(MatrixId::A, a.as_slice());
    m.attach_mut(MatrixId::C, c.as_mut_slice());
    kernel(&mut m, &pa, &pc)?;
    Ok(m.report())
}

pub(crate) fn count_syrk(
    n: usize,
    cols: usize,
    capacity: usize,
    kernel: impl FnOnce(&mut Machine<'_, f64>, &PanelView, &TriView) -> Result<()>,
) -> Result<IoReport> {
    let mut m = Machine::<f64>::counting(IoLedger::new(capacity));
    kernel(&mut m, &PanelView::dense(MatrixId::A, n, cols), &TriView::full(MatrixId::C, n))?;
    Ok(m.report())
}

pub(crate) fn run_factor<T: Scalar>(
    a: &PackedTriangular<T>,
    capacity: usize,
    kernel: impl FnOnce(&mut Machine<'_, T>, &TriView) -> Result<()>,
) -> Result<(PackedTriangular<T>, IoReport)> {
    let mut l = a.clone();
    let view = TriView::full(MatrixId::A, l.n());
    let report = {
        let mut m = Machine::computing(IoLedger::new(capacity));
        m.attach_mut(MatrixId::A, l.as_mut_slice());
        kernel(&mut m, &view)?;
        m.report()
    };
    Ok((l, report))
}

pub(crate) fn count_factor(
    n: usize,
    capacity: usize,
    kernel: impl FnOnce(&mut Machine<'_, f64>, &TriView) -> Result<()>,
) -> Result<IoReport> {
    let mut m = Machine::<f64>::counting(IoLedger::new(capacity));
    kernel(&mut m, &TriView::full(MatrixId::A, n))?;
    Ok(m.report())
}

/// `C += A A^T` with square tiles, fast memory of `capacity` elements.
pub fn ooc_syrk<T: Scalar>(a: &Matrix<T>, c: &mut PackedTriangular<T>, capacity: usize) -> Result<IoReport> {
    run_syrk(a, c, capacity, |m, pa, pc| ooc_syrk_view(m, pa, pc, Update::Add))
}

pub fn ooc_syrk_count(n: usize, cols: usize, capacity: usize) -> Result<IoReport> {
    count_syrk(n, cols, capacity, |m, pa, pc| ooc_syrk_view(m, pa, pc, Update::Add))
}

/// Triple-loop SYRK under the simulator.
pub fn streaming_syrk<T: Scalar>(a: &Matrix<T>, c: &mut PackedTriangular<T>, capacity: usize) -> Result<IoReport> {
    run_syrk(a, c, capacity, streaming_syrk_view)
}

pub fn streaming_syrk_count(n: usize, cols: usize, capacity: usize) -> Result<IoReport> {
    count_syrk(n, cols, capacity, streaming_syrk_view)
}

/// `B <- B L^{-T}` for a dense `B` with `l.n()` columns.
pub fn ooc_trsm<T: Scalar>(l: &PackedTriangular<T>, b: &mut Matrix<T>, capacity: usize) -> Result<IoReport> {
    if b.cols() != l.n() {
        return Err(Error::DimensionMismatch(format!("B has {} columns, L has side {}", b.cols(), l.n())));
    }
    let lv = TriView::full(MatrixId::C, l.n());
    let bv = PanelView::dense(MatrixId::A, b.rows(), b.cols());
    let mut m = Machine::computing(IoLedger::new(capacity));
    m.attach_read_only(MatrixId::C, l.as_slice());
    m.attach_mut(MatrixId::A, b.as_mut_slice());
    ooc_trsm_view(&mut m, &lv, &bv)?;
    Ok(m.report())
}

pub fn ooc_trsm_count(width: usize, rows: usize, capacity: usize) -> Result<IoReport> {
    let mut m = Machine::<f64>::counting(IoLedger::new(capacity));
    ooc_trsm_view(&mut m, &TriView::full(MatrixId::C, width), &PanelView::dense(MatrixId::A, rows, width))?;
    Ok(m.report())
}

/// Out-of-core Cholesky of an SPD matrix; returns `L` and the transfer counts.
pub fn ooc_chol<T: Scalar>(a: &PackedTriangular<T>, capacity: usize) -> Result<(PackedTriangular<T>, IoReport)> {
    run_factor(a, capacity, ooc_chol_view)
}

pub fn ooc_chol_count(n: usize, capacity: usize) -> Result<IoReport> {
    count_factor(n, capacity, ooc_chol_view)
}

/// Triple-loop Cholesky under the simulator.
pub fn streaming_cholesky<T: Scalar>(
    a: &PackedTriangular<T>,
    capacity: usize,
) -> Result<(PackedTriangular<T>, IoReport)> {
    run_factor(a, capacity, streaming_cholesky_view)
}

pub fn streaming_cholesky_count(n: usize, capacity: usize) -> Result<IoReport> {
    count_factor(n, capacity, streaming_cholesky_view)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{random_spd, reference_cholesky, reference_syrk};
    use proptest::prelude::*;

    fn rel_err(got: &PackedTriangular<f64>, want: &PackedTriangular<f64>) -> f64 {
        got.max_abs_diff(want) / want.max_abs().max(1.0)
    }

    #[test]
    fn tile_sizes() {
        assert!(square_tile(2).is_err());
        assert_eq!(square_tile(3), Ok(1));
        assert_eq!(square_tile(8), Ok(2));
        assert_eq!(square_tile(110), Ok(9));
        assert_eq!(square_tile(465), Ok(20));
        for s in 3..2000 {
            let t = square_tile(s).unwrap();
            assert!(t * t + 2 * t <= s && (t + 1) * (t + 1) + 2 * (t + 1) > s);
        }
    }

    #[test]
    fn tile_grid_covers_everything_once() {
        let g = TileGrid::new(10, 7, 3);
        assert_eq!(g.shape(), (4, 3));
        let mut seen = vec![0; 70];
        for (ti, r) in g.row_tiles().enumerate() {
            for (tj, c) in g.col_tiles().enumerate() {
                for i in r.clone() {
                    for j in c.clone() {
                        seen[i * 7 + j] += 1;
                        assert_eq!(g.tile_of(i, j), (ti, tj));
                    }
                }
            }
        }
        assert!(seen.iter().all(|&s| s == 1));
    }

    #[test]
    fn syrk_single_tile() {
        let a = Matrix::from_rows(&[&[1.0], &[2.0]]).unwrap();
        let mut c = PackedTriangular::zeros(2);
        let r = ooc_syrk(&a, &mut c, 3).unwrap();
        assert_eq!(c.as_slice(), &[1.0, 2.0, 4.0]);
        assert_eq!(r.loads_of(MatrixId::C), 3);

        // Big enough for one diagonal tile: every A element is loaded once.
        let a = Matrix::<f64>::random(2, 5, -1.0, 1.0, 1);
        let mut c = PackedTriangular::zeros(2);
        let r = ooc_syrk(&a, &mut c, 8).unwrap();
        assert_eq!(r.loads_of(MatrixId::A), 2 * 5);
        assert_eq!(r.loads_of(MatrixId::C), 3);
        assert_eq!(r.stores, 3);
    }

    #[test]
    fn syrk_one_diagonal_tile_loads_t_m() {
        // t = 5 for S = 35; N = t, so exactly one diagonal tile.
        let r = ooc_syrk_count(5, 11, 35).unwrap();
        assert_eq!(r.loads_of(MatrixId::A), 5 * 11);
    }

    #[test]
    fn syrk_count_matches_compute() {
        let a = Matrix::<f64>::random(64, 16, -1.0, 1.0, 3);
        let mut c = PackedTriangular::zeros(64);
        let computed = ooc_syrk(&a, &mut c, 110).unwrap();
        assert_eq!(computed, ooc_syrk_count(64, 16, 110).unwrap());
    }

    #[test]
    fn syrk_loads_each_c_element_once() {
        let r = ooc_syrk_count(47, 3, 55).unwrap();
        assert_eq!(r.loads_of(MatrixId::C), packed_len(47) as u64);
        assert!(r.peak_resident <= 55);
    }

    #[test]
    fn syrk_rows_only_touches_requested_rows() {
        let a = Matrix::<f64>::random(9, 4, -1.0, 1.0, 8);
        let mut c = PackedTriangular::zeros(9);
        let pa = PanelView::dense(MatrixId::A, 9, 4);
        let pc = TriView::full(MatrixId::C, 9);
        let mut m = Machine::computing(IoLedger::new(15));
        m.attach_read_only(MatrixId::A, a.as_slice());
        m.attach_mut(MatrixId::C, c.as_mut_slice());
        ooc_syrk_rows(&mut m, &pa, &pc, 6..9, Update::Add).unwrap();
        assert_eq!(m.report().loads_of(MatrixId::C), (packed_len(9) - packed_len(6)) as u64);
        drop(m);
        let want = reference_syrk(&a, &PackedTriangular::zeros(9)).unwrap();
        for i in 0..9 {
            for j in 0..=i {
                let expect = if i >= 6 { want.get(i, j) } else { 0.0 };
                assert!((c.get(i, j) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn trsm_examples() {
        let l = PackedTriangular::from_vec(2, vec![2.0, 0.0, 4.0]).unwrap();
        let mut b = Matrix::from_rows(&[&[2.0, 8.0]]).unwrap();
        ooc_trsm(&l, &mut b, 15).unwrap();
        assert_eq!(b.as_slice(), &[1.0, 2.0]);

        let orig = Matrix::<f64>::random(5, 4, -1.0, 1.0, 2);
        let mut b = orig.clone();
        ooc_trsm(&PackedTriangular::identity(4), &mut b, 8).unwrap();
        assert_eq!(b, orig);
    }

    #[test]
    fn trsm_zero_diagonal() {
        let l = PackedTriangular::from_vec(2, vec![1.0, 0.0, 0.0]).unwrap();
        let mut b = Matrix::from_rows(&[&[1.0, 1.0]]).unwrap();
        assert_eq!(ooc_trsm(&l, &mut b, 15), Err(Error::SingularTriangle { column: 1 }));
        let mut b = Matrix::from_rows(&[&[1.0, 1.0]]).unwrap();
        assert_eq!(ooc_trsm(&l, &mut b, 3), Err(Error::SingularTriangle { column: 1 }));
    }

    fn check_trsm(width: usize, rows: usize, capacity: usize, seed: u64) {
        let l = reference_cholesky(&random_spd::<f64>(width, seed)).unwrap();
        let orig = Matrix::<f64>::random(rows, width, -1.0, 1.0, seed ^ 0xff);
        let mut b = orig.clone();
        let r = ooc_trsm(&l, &mut b, capacity).unwrap();
        // multiply back: b l^T must give the original rows
        for i in 0..rows {
            for j in 0..width {
                let v: f64 = (0..=j).map(|p| b[(i, p)] * l.get(j, p)).sum();
                assert!((v - orig[(i, j)]).abs() <= 1e-9 * orig.max_abs().max(1.0));
            }
        }
        assert!(r.peak_resident <= capacity);
        assert_eq!(r, ooc_trsm_count(width, rows, capacity).unwrap());
    }

    #[test]
    fn trsm_reconstructs() {
        check_trsm(8, 16, 110, 4); // factor resident
        check_trsm(8, 16, 15, 4); // tiled
        check_trsm(13, 7, 20, 5);
        check_trsm(1, 3, 3, 6);
    }

    #[test]
    fn trsm_io_envelope() {
        // b^2 M / sqrt(S) leading term plus c2 * b M with c2 = 4.
        for &(w, rows, s) in &[(64usize, 128usize, 110usize), (96, 64, 120), (50, 200, 55)] {
            let r = ooc_trsm_count(w, rows, s).unwrap();
            let lead = (w * w * rows) as f64 / (s as f64).sqrt();
            let lower = 4.0 * (w * rows) as f64;
            assert!((r.loads as f64) <= lead * 1.25 + lower, "{w} {rows} {s}: {}", r.loads);
        }
    }

    #[test]
    fn chol_examples() {
        let (l, r) = ooc_chol(&PackedTriangular::from_vec(1, vec![9.0]).unwrap(), 3).unwrap();
        assert_eq!(l.as_slice(), &[3.0]);
        assert_eq!(r.loads, 1);

        // Whole matrix resident: loaded exactly once.
        let a = random_spd::<f64>(10, 1);
        let (_, r) = ooc_chol(&a, 100).unwrap();
        assert_eq!(r.loads, packed_len(10) as u64);
        let (_, r) = ooc_chol(&a, 55).unwrap();
        assert_eq!(r.loads, packed_len(10) as u64);
    }

    #[test]
    fn chol_random_64() {
        let a = random_spd::<f64>(64, 11);
        let (l, r) = ooc_chol(&a, 110).unwrap();
        assert!(l.lower_times_transpose().max_abs_diff(&a) <= 1e-9 * a.max_abs());
        let b = 64f64;
        assert!((r.loads as f64) <= b * b * b / (3.0 * 110f64.sqrt()) + 10.0 * b * b);
        assert!(r.peak_resident <= 110);
        assert_eq!(r, ooc_chol_count(64, 110).unwrap());
    }

    #[test]
    fn chol_rejects_indefinite_with_column() {
        let mut a = random_spd::<f64>(20, 2);
        a.set(13, 13, -1.0);
        assert_eq!(ooc_chol(&a, 15), Err(Error::NotPositiveDefinite { column: 13 }));
        assert_eq!(ooc_chol(&a, 1000), Err(Error::NotPositiveDefinite { column: 13 }));
    }

    #[test]
    fn streaming_kernels_match_reference() {
        let a = Matrix::<f64>::random(9, 4, -1.0, 1.0, 9);
        let mut c = PackedTriangular::zeros(9);
        let r = streaming_syrk(&a, &mut c, 3).unwrap();
        assert!(rel_err(&c, &reference_syrk(&a, &PackedTriangular::zeros(9)).unwrap()) < 1e-12);
        assert_eq!(r.peak_resident, 3);
        assert_eq!(r, streaming_syrk_count(9, 4, 3).unwrap());

        let s = random_spd::<f64>(9, 3);
        let (l, r) = streaming_cholesky(&s, 3).unwrap();
        assert!(rel_err(&l, &reference_cholesky(&s).unwrap()) < 1e-12);
        assert_eq!(r, streaming_cholesky_count(9, 3).unwrap());
    }

    #[test]
    fn syrk_io_envelope() {
        for &(n, m, s) in &[(8 * 10usize, 10usize, 120usize), (200, 16, 55), (128, 12, 110)] {
            let t = (s as f64).sqrt();
            if (n as f64) < 8.0 * t || (m as f64) < t {
                continue;
            }
            let r = ooc_syrk_count(n, m, s).unwrap();
            let ratio = r.loads_of(MatrixId::A) as f64 / ((n * n * m) as f64 / t);
            assert!((0.9..=1.3).contains(&ratio), "{n} {m} {s}: {ratio}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn kernels_match_references(n in 1usize..=48, m in 1usize..=24, s in prop::sample::select(vec![3usize, 15, 55, 120]), seed: u64) {
            let a = Matrix::<f64>::random(n, m, -1.0, 1.0, seed);
            let c0 = PackedTriangular::<f64>::random(n, -1.0, 1.0, seed ^ 0x5eed);
            let mut c = c0.clone();
            let r = ooc_syrk(&a, &mut c, s).unwrap();
            prop_assert!(rel_err(&c, &reference_syrk(&a, &c0).unwrap()) <= 1e-9);
            prop_assert!(r.peak_resident <= s);

            let spd = random_spd::<f64>(n, seed);
            let (l, r) = ooc_chol(&spd, s).unwrap();
            prop_assert!(rel_err(&l, &reference_cholesky(&spd).unwrap()) <= 1e-9);
            prop_assert!(r.peak_resident <= s);
        }
    }
}
