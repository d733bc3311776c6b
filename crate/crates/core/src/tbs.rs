//! Triangle Block SYRK.
//!
//! The first `c k b` rows of `C` are split into `k` diagonal zones (handled
//! by recursive calls) and `k(k-1)/2` square zones that are tiled by `c^2`
//! disjoint triangle blocks. Each block keeps its `C` entries resident while
//! every column of `A` streams through once, `k b` elements at a time. The
//! remaining `l` rows go through square-tile SYRK, as does any call whose
//! zones would be too small for a valid cyclic family.

use crate::baseline::{count_syrk, ooc_syrk_rows, run_syrk};
use crate::error::{Error, Result};
use crate::io_model::IoReport;
use crate::machine::{Machine, PanelView, TriView, Update};
use crate::matrix::{Matrix, PackedTriangular};
use crate::scalar::Scalar;
use crate::triangle::{build_tiled_plan, enumerate_block, TrianglePlan};

/// Transfer breakdown of one TBS run, summed over all recursion levels.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TbsStats {
    pub blocks: u64,
    /// Loads of `A` issued while processing triangle blocks.
    pub block_loads_a: u64,
    /// Loads of `C` issued while processing triangle blocks.
    pub block_loads_c: u64,
    /// `C` entries covered by triangle blocks.
    pub block_elements: u64,
    pub min_block_loads_a: Option<u64>,
    pub max_block_loads_a: Option<u64>,
    /// Rows sent to square-tile SYRK as remainder strips.
    pub strip_rows: u64,
    /// Calls that fell back to square-tile SYRK entirely.
    pub fallback_calls: u64,
    pub max_depth: usize,
}

impl TbsStats {
    fn record_block(&mut self, loads_a: u64, loads_c: u64, elements: u64) {
        self.blocks += 1;
        self.block_loads_a += loads_a;
        self.block_loads_c += loads_c;
        self.block_elements += elements;
        self.min_block_loads_a = Some(self.min_block_loads_a.map_or(loads_a, |m| m.min(loads_a)));
        self.max_block_loads_a = Some(self.max_block_loads_a.map_or(loads_a, |m| m.max(loads_a)));
    }
}

/// TBS on views over a shared machine. `tile = 1` is the element-wise
/// algorithm; larger tiles give the tiled variant.
pub fn tbs_view<T: Scalar>(
    m: &mut Machine<'_, T>,
    a: &PanelView,
    c: &TriView,
    tile: usize,
    update: Update,
) -> Result<TbsStats> {
    if a.rows() != c.n() {
        return Err(Error::DimensionMismatch(format!("A has {} rows, C has side {}", a.rows(), c.n())));
    }
    let mut stats = TbsStats::default();
    recurse(m, a, c, tile, update, 0, &mut stats)?;
    Ok(stats)
}

fn recurse<T: Scalar>(
    m: &mut Machine<'_, T>,
    a: &PanelView,
    c: &TriView,
    tile: usize,
    update: Update,
    depth: usize,
    stats: &mut TbsStats,
) -> Result<()> {
    let n = c.n();
    let plan = build_tiled_plan(n, m.capacity(), tile)?;
    if plan.fallback {
        stats.fallback_calls += 1;
        return ooc_syrk_rows(m, a, c, 0..n, update);
    }
    stats.max_depth = stats.max_depth.max(depth + 1);

    let blocked = plan.blocked_rows();
    stats.strip_rows += (n - blocked) as u64;
    ooc_syrk_rows(m, a, c, blocked..n, update)?;

    let zone = plan.zone_rows();
    for z in 0..plan.k {
        recurse(m, &a.sub_rows(z * zone, zone), &c.sub(z * zone, zone), tile, update, depth + 1, stats)?;
    }

    for i in 0..plan.c {
        for j in 0..plan.c {
            run_block(m, a, c, &plan, i, j, update, stats)?;
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_block<T: Scalar>(
    m: &mut Machine<'_, T>,
    a: &PanelView,
    c: &TriView,
    plan: &TrianglePlan,
    i: usize,
    j: usize,
    update: Update,
    stats: &mut TbsStats,
) -> Result<()> {
    let b = plan.tile;
    let block = enumerate_block(plan, i, j)?;
    // Element rows of the block, ascending: tiles are disjoint and increasing.
    let rows: Vec<usize> = block.rows().iter().flat_map(|&t| t * b..(t + 1) * b).collect();
    let cells: Vec<(usize, usize)> = block
        .pairs()
        .flat_map(|(tu, tv)| (tu * b..(tu + 1) * b).flat_map(move |r| (tv * b..(tv + 1) * b).map(move |s| (r, s))))
        .collect();

    let before_a = m.ledger().loads_of(a.matrix());
    let before_c = m.ledger().loads_of(c.matrix());
    m.load_all(cells.iter().map(|&(r, s)| c.addr(r, s)))?;
    let loads_c = m.ledger().loads_of(c.matrix()) - before_c;

    for col in 0..a.cols() {
        m.load_all(rows.iter().map(|&r| a.addr(r, col)))?;
        if m.is_computing() {
            for &(r, s) in &cells {
                m.fma(c.addr(r, s), a.addr(r, col), a.addr(s, col), update)?;
            }
        }
        m.evict_all(rows.iter().map(|&r| a.addr(r, col)), false)?;
    }
    m.evict_all(cells.iter().map(|&(r, s)| c.addr(r, s)), true)?;

    let loads_a = m.ledger().loads_of(a.matrix()) - before_a;
    stats.record_block(loads_a, loads_c, cells.len() as u64);
    Ok(())
}

/// `C += A A^T` with triangle blocks.
pub fn tbs<T: Scalar>(a: &Matrix<T>, c: &mut PackedTriangular<T>, capacity: usize) -> Result<IoReport> {
    tbs_tiled(a, c, capacity, 1)
}

pub fn tbs_count(n: usize, cols: usize, capacity: usize) -> Result<IoReport> {
    tbs_tiled_count(n, cols, capacity, 1)
}

/// `C += A A^T` with triangle blocks of `tile x tile` tiles.
pub fn tbs_tiled<T: Scalar>(
    a: &Matrix<T>,
    c: &mut PackedTriangular<T>,
    capacity: usize,
    tile: usize,
) -> Result<IoReport> {
    check_tile(capacity, tile)?;
    run_syrk(a, c, capacity, |m, pa, pc| tbs_view(m, pa, pc, tile, Update::Add).map(drop))
}

pub fn tbs_tiled_count(n: usize, cols: usize, capacity: usize, tile: usize) -> Result<IoReport> {
    Ok(tbs_tiled_count_with_stats(n, cols, capacity, tile)?.0)
}

/// Count-mode run returning the per-region breakdown as well.
pub fn tbs_tiled_count_with_stats(
    n: usize,
    cols: usize,
    capacity: usize,
    tile: usize,
) -> Result<(IoReport, TbsStats)> {
    check_tile(capacity, tile)?;
    let mut stats = TbsStats::default();
    let report = count_syrk(n, cols, capacity, |m, pa, pc| {
        stats = tbs_view(m, pa, pc, tile, Update::Add)?;
        Ok(())
    })?;
    Ok((report, stats))
}

fn check_tile(capacity: usize, tile: usize) -> Result<()> {
    if tile == 0 || tile * tile > capacity {
        return Err(Error::InvalidArgument(format!(
            "tile {tile} does not fit a fast memory of {capacity} elements"
        )));
    }
    Ok(())
}

/// Which part of the schedule computes a `C` entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// Inside a triangle block at the given recursion depth.
    Block { depth: usize },
    /// Square-tile remainder rows of some call.
    Strip,
    /// A call too small for triangle blocks.
    Fallback,
}

/// Region owning each entry of the lower triangle, built from the plans
/// alone. Fails if any entry would be computed twice.
pub fn partition_map(n: usize, capacity: usize, tile: usize) -> Result<Vec<Vec<Option<Region>>>> {
    let mut map: Vec<Vec<Option<Region>>> = (0..n).map(|i| vec![None; i + 1]).collect();
    fill(&mut map, 0, n, capacity, tile, 0)?;
    Ok(map)
}

fn fill(
    map: &mut [Vec<Option<Region>>],
    base: usize,
    n: usize,
    capacity: usize,
    tile: usize,
    depth: usize,
) -> Result<()> {
    let mut mark = |i: usize, j: usize, r: Region| -> Result<()> {
        let slot = &mut map[base + i][base + j];
        if slot.is_some() {
            return Err(Error::InvalidArgument(format!("entry ({}, {}) covered twice", base + i, base + j)));
        }
        *slot = Some(r);
        Ok(())
    };
    let plan = build_tiled_plan(n, capacity, tile)?;
    if plan.fallback {
        for i in 0..n {
            for j in 0..=i {
                mark(i, j, Region::Fallback)?;
            }
        }
        return Ok(());
    }
    let blocked = plan.blocked_rows();
    for i in blocked..n {
        for j in 0..=i {
            mark(i, j, Region::Strip)?;
        }
    }
    for bi in 0..plan.c {
        for bj in 0..plan.c {
            for (tu, tv) in enumerate_block(&plan, bi, bj)?.pairs() {
                for r in tu * tile..(tu + 1) * tile {
                    for s in tv * tile..(tv + 1) * tile {
                        mark(r, s, Region::Block { depth })?;
                    }
                }
            }
        }
    }
    let zone = plan.zone_rows();
    for z in 0..plan.k {
        fill(map, base + z * zone, zone, capacity, tile, depth + 1)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline::ooc_syrk_count;
    use crate::io_model::{Event, IoLedger, MatrixId};
    use crate::matrix::{packed_len, reference_syrk};

    fn rel_err(got: &PackedTriangular<f64>, want: &PackedTriangular<f64>) -> f64 {
        got.max_abs_diff(want) / want.max_abs().max(1.0)
    }

    fn check_tbs(n: usize, cols: usize, s: usize, tile: usize, seed: u64) {
        let a = Matrix::<f64>::random(n, cols, -1.0, 1.0, seed);
        let c0 = PackedTriangular::random(n, -1.0, 1.0, seed + 1);
        let mut c = c0.clone();
        let r = tbs_tiled(&a, &mut c, s, tile).unwrap();
        assert!(rel_err(&c, &reference_syrk(&a, &c0).unwrap()) <= 1e-9, "n={n} m={cols} s={s} b={tile}");
        assert!(r.peak_resident <= s);
        assert_eq!(r, tbs_tiled_count(n, cols, s, tile).unwrap());
    }

    #[test]
    fn small_cases() {
        let a = Matrix::from_rows(&[&[1.0], &[2.0]]).unwrap();
        let mut c = PackedTriangular::zeros(2);
        tbs(&a, &mut c, 3).unwrap();
        assert_eq!(c.as_slice(), &[1.0, 2.0, 4.0]);
        // far below k(k-1): everything falls back
        let (_, stats) = tbs_tiled_count_with_stats(20, 3, 55, 1).unwrap();
        assert_eq!((stats.blocks, stats.fallback_calls), (0, 1));
        check_tbs(20, 3, 55, 1, 1);
    }

    #[test]
    fn matches_reference_across_shapes() {
        check_tbs(95, 8, 15, 1, 2);
        check_tbs(100, 5, 15, 1, 3);
        check_tbs(61, 7, 6, 1, 4);
        check_tbs(128, 9, 55, 1, 5);
        check_tbs(90, 4, 3, 1, 6);
        check_tbs(100, 6, 120, 2, 7);
        check_tbs(77, 5, 120, 3, 8);
        check_tbs(128, 3, 120, 4, 9);
    }

    #[test]
    fn single_precision() {
        let a = Matrix::<f32>::random(60, 5, -1.0, 1.0, 3);
        let c0 = PackedTriangular::<f32>::zeros(60);
        let mut c = c0.clone();
        tbs(&a, &mut c, 15).unwrap();
        assert!(c.max_abs_diff(&reference_syrk(&a, &c0).unwrap()) <= 1e-4);
    }

    #[test]
    fn tile_of_one_is_plain_tbs() {
        for &(n, m, s) in &[(95usize, 8usize, 15usize), (300, 3, 21), (64, 2, 6)] {
            let a = Matrix::<f64>::random(n, m, -1.0, 1.0, n as u64);
            let (mut c1, mut c2) = (PackedTriangular::zeros(n), PackedTriangular::zeros(n));
            let r1 = tbs(&a, &mut c1, s).unwrap();
            let r2 = tbs_tiled(&a, &mut c2, s, 1).unwrap();
            assert_eq!(r1, r2);
            assert_eq!(c1, c2);
            assert_eq!(tbs_count(n, m, s).unwrap(), tbs_tiled_count(n, m, s, 1).unwrap());
        }
    }

    #[test]
    fn tile_errors() {
        assert!(tbs_tiled_count(10, 2, 15, 4).is_err());
        assert!(tbs_tiled_count(10, 2, 15, 0).is_err());
        // b^2 fits but a pair of tiles with their slivers does not
        assert!(tbs_tiled_count(10, 2, 16, 4).is_err());
    }

    #[test]
    fn example_plan_k5() {
        // S = 15: k = 5, N = 5 * 19 = 95, no remainder strip.
        let (r, stats) = tbs_tiled_count_with_stats(95, 8, 15, 1).unwrap();
        assert_eq!(stats.blocks, 19 * 19);
        assert_eq!(stats.block_elements, 19 * 19 * 10);
        assert_eq!(stats.block_loads_c, stats.block_elements);
        assert_eq!((stats.min_block_loads_a, stats.max_block_loads_a), (Some(5 * 8), Some(5 * 8)));
        assert_eq!(stats.strip_rows, 0);
        assert_eq!(r.loads_of(MatrixId::C), packed_len(95) as u64);
        assert_eq!(r.peak_resident, 15);
    }

    #[test]
    fn each_c_entry_loaded_exactly_once() {
        for &(n, s, tile) in &[(95usize, 15usize, 1usize), (333, 21, 1), (200, 120, 2), (150, 10, 1)] {
            let mut mach = Machine::<f64>::counting(IoLedger::with_trace(s));
            tbs_view(&mut mach, &PanelView::dense(MatrixId::A, n, 2), &TriView::full(MatrixId::C, n), tile, Update::Add)
                .unwrap();
            let ledger = mach.into_ledger();
            let mut hits = vec![0u32; packed_len(n)];
            let mut writes = vec![0u32; packed_len(n)];
            for e in ledger.trace().unwrap() {
                match *e {
                    Event::Load(a) if a.matrix == MatrixId::C => hits[a.offset] += 1,
                    Event::Evict { addr, dirty } if addr.matrix == MatrixId::C => {
                        assert!(dirty);
                        writes[addr.offset] += 1
                    }
                    _ => {}
                }
            }
            assert!(hits.iter().all(|&h| h == 1), "n={n} s={s}");
            assert!(writes.iter().all(|&h| h == 1));
            assert_eq!(ledger.resident_count(), 0);
        }
    }

    #[test]
    fn partition_covers_every_entry_once() {
        for s in [3usize, 6, 10, 15, 21, 28] {
            for n in (1..=500).step_by(7) {
                let map = partition_map(n, s, 1).unwrap();
                let mut block_entries = 0u64;
                for i in 0..n {
                    for j in 0..=i {
                        let r = map[i][j].unwrap_or_else(|| panic!("gap at ({i},{j}) n={n} s={s}"));
                        if i == j {
                            assert!(!matches!(r, Region::Block { .. }));
                        }
                        if matches!(r, Region::Block { .. }) {
                            block_entries += 1;
                        }
                    }
                }
                let (_, stats) = tbs_tiled_count_with_stats(n, 1, s, 1).unwrap();
                assert_eq!(stats.block_elements, block_entries);
                assert_eq!(stats.block_loads_c, block_entries);
            }
        }
    }

    #[test]
    fn tiled_partition_covers_every_entry_once() {
        for &(s, b) in &[(120usize, 2usize), (120, 3), (900, 10), (60, 1)] {
            for n in [1usize, 17, 64, 128, 200, 333] {
                let map = partition_map(n, s, b).unwrap();
                assert!(map.iter().all(|row| row.iter().all(Option::is_some)));
            }
        }
    }

    #[test]
    fn beats_square_tiles_when_large() {
        let s = 55;
        let n = 10 * 53; // k = 10, c = 53
        let tbs_loads = tbs_count(n, 16, s).unwrap().loads_of(MatrixId::A);
        let ocs_loads = ooc_syrk_count(n, 16, s).unwrap().loads_of(MatrixId::A);
        assert!(tbs_loads < ocs_loads, "{tbs_loads} vs {ocs_loads}");
    }

    #[test]
    fn subtracting_update() {
        let a = Matrix::<f64>::random(70, 3, -1.0, 1.0, 12);
        let mut c = PackedTriangular::zeros(70);
        let view_a = PanelView::dense(MatrixId::A, 70, 3);
        let view_c = TriView::full(MatrixId::C, 70);
        let mut m = Machine::computing(IoLedger::new(10));
        m.attach_read_only(MatrixId::A, a.as_slice());
        m.attach_mut(MatrixId::C, c.as_mut_slice());
        tbs_view(&mut m, &view_a, &view_c, 1, Update::Subtract).unwrap();
        drop(m);
        let want = reference_syrk(&a, &PackedTriangular::zeros(70)).unwrap();
        for i in 0..70 {
            for j in 0..=i {
                assert!((c.get(i, j) + want.get(i, j)).abs() < 1e-12);
            }
        }
    }
}
