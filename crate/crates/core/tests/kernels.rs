use proptest::prelude::*;
use symk::baseline::ooc_chol_count;
use symk::lbc::{choose_block_size, lbc, lbc_count_with_stats, lbc_envelope};
use symk::matrix::{random_spd, reference_cholesky, reference_syrk};
use symk::tbs::{tbs, tbs_count, tbs_tiled, tbs_tiled_count, tbs_tiled_count_with_stats};
use symk::triangle::{build_plan, build_tiled_plan};
use symk::{Matrix64, MatrixId, Packed64};

fn rel(got: &Packed64, want: &Packed64) -> f64 {
    got.max_abs_diff(want) / want.max_abs().max(1.0)
}

fn max_tile(s: usize) -> usize {
    (1..).take_while(|b| b * b + 2 * b <= s).last().unwrap_or(1)
}

#[test]
fn lbc_256_within_four_term_envelope() {
    let (n, s) = (256, 120);
    let a = random_spd::<f64>(n, 256);
    let (l, r) = lbc(&a, s, None).unwrap();
    assert!(rel(&l, &reference_cholesky(&a).unwrap()) <= 1e-9);
    assert!(l.lower_times_transpose().max_abs_diff(&a) <= 1e-9 * a.max_abs());
    let env = lbc_envelope(n as f64, choose_block_size(n) as f64, s as f64, 8.0);
    assert!((r.loads as f64) <= env, "{} > {env}", r.loads);
    assert!(r.peak_resident <= s);
}

#[test]
fn lbc_iterations_within_kernel_envelopes() {
    // Q_OCC(b) + Q_OCT(b, r) + Q_TBS(r, b) per iteration, r the trailing size;
    // the TBS share also pays r(r+1)/2 for reading the trailing triangle once.
    for &(n, s, block) in &[(400usize, 465usize, None), (300, 55, None), (250, 120, Some(30)), (200, 15, Some(9))] {
        let (_, its) = lbc_count_with_stats(n, s, block).unwrap();
        let rs = (s as f64).sqrt();
        for it in its {
            let (b, r) = (it.width as f64, it.trailing as f64);
            let occ = b.powi(3) / (3.0 * rs) * 1.25 + 10.0 * b * b;
            assert!(it.chol_loads as f64 <= occ, "chol n={n} s={s} at {}", it.start);
            let oct = b * b * r / rs * 1.25 + 4.0 * b * r;
            assert!(it.trsm_loads as f64 <= oct, "trsm n={n} s={s} at {}", it.start);
            if it.trailing > 0 {
                let k = build_plan(it.trailing, s).unwrap().k as f64;
                let tbs = r * r * b / (k - 1.0) + r * (r + 1.0) / 2.0 + 16.0 * r * b * r.max(2.0).log2();
                assert!(it.tbs_loads as f64 <= tbs, "tbs n={n} s={s} at {}: {} > {tbs}", it.start, it.tbs_loads);
            }
        }
    }
}

#[test]
fn lbc_with_one_block_matches_ooc_chol_ledger() {
    for &(n, s) in &[(1usize, 3usize), (10, 15), (40, 120)] {
        let (r, its) = lbc_count_with_stats(n, s, Some(n)).unwrap();
        assert_eq!(its.len(), 1);
        assert_eq!(r, ooc_chol_count(n, s).unwrap());
    }
}

#[test]
fn tiled_blocks_load_k_b_m_elements_of_a() {
    for &(n, m, s, b) in &[(400usize, 6usize, 120usize, 2usize), (500, 3, 900, 10), (300, 5, 99, 3)] {
        let plan = build_tiled_plan(n, s, b).unwrap();
        let (_, stats) = tbs_tiled_count_with_stats(n, m, s, b).unwrap();
        assert!(stats.blocks > 0, "n={n} s={s} b={b}");
        let expect = (plan.k * b * m) as u64;
        assert_eq!((stats.min_block_loads_a, stats.max_block_loads_a), (Some(expect), Some(expect)));
    }
}

#[test]
fn tiled_a_loads_within_envelope() {
    for &(n, m, s, b) in &[(600usize, 8usize, 120usize, 2usize), (1000, 4, 900, 10), (700, 16, 465, 3)] {
        let r = tbs_tiled_count(n, m, s, b).unwrap();
        let k = build_tiled_plan(n, s, b).unwrap().k as f64;
        let (nf, mf) = (n as f64, m as f64);
        let env = nf * nf * mf / ((k - 1.0) * b as f64) + 16.0 * nf * mf * nf.log2();
        assert!((r.loads_of(MatrixId::A) as f64) <= env);
    }
}

#[test]
fn equality_case_fills_memory_exactly() {
    // S = k(k+1)/2: a block holds k(k-1)/2 entries of C and k of A.
    for &(s, k) in &[(15usize, 5usize), (21, 6), (55, 10)] {
        let c = build_plan(10_000, s).unwrap().c;
        assert_eq!(tbs_count(k * c, 2, s).unwrap().peak_resident, s);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn tbs_matches_reference(
        n in 1usize..=160,
        m in 1usize..=24,
        s in prop::sample::select(vec![3usize, 6, 15, 21, 55, 120]),
        pick in 0usize..8,
        seed: u64,
    ) {
        let b = 1 + pick % max_tile(s);
        let a = Matrix64::random(n, m, -1.0, 1.0, seed);
        let c0 = Packed64::random(n, -1.0, 1.0, seed ^ 7);
        let want = reference_syrk(&a, &c0).unwrap();

        let mut c = c0.clone();
        let r = tbs(&a, &mut c, s).unwrap();
        prop_assert!(rel(&c, &want) <= 1e-9);
        prop_assert!(r.peak_resident <= s);
        prop_assert_eq!(&r, &tbs_count(n, m, s).unwrap());
        prop_assert_eq!(r.loads_of(MatrixId::C), (n * (n + 1) / 2) as u64);

        let mut c = c0.clone();
        let r = tbs_tiled(&a, &mut c, s, b).unwrap();
        prop_assert!(rel(&c, &want) <= 1e-9);
        prop_assert!(r.peak_resident <= s);
        prop_assert_eq!(r, tbs_tiled_count(n, m, s, b).unwrap());
    }

    #[test]
    fn lbc_matches_reference(n in 1usize..=96, s in prop::sample::select(vec![3usize, 15, 55, 120]), block in 0usize..12, seed: u64) {
        let a = random_spd::<f64>(n, seed);
        let block = if block == 0 { None } else { Some(block) };
        let (l, r) = lbc(&a, s, block).unwrap();
        prop_assert!(rel(&l, &reference_cholesky(&a).unwrap()) <= 1e-9);
        prop_assert!(r.peak_resident <= s);
    }

    #[test]
    fn plan_gap_is_bounded(n in 1usize..100_000, s in 3usize..2_000) {
        let plan = build_plan(n, s).unwrap();
        let q = plan.q().unwrap() as f64;
        if !plan.fallback {
            prop_assert!(plan.gap() <= q);
            prop_assert!((plan.l as f64) < plan.k as f64 * (q + 1.0));
            prop_assert!(plan.c + 1 >= plan.k);
        }
        prop_assert!(plan.k * (plan.k + 1) / 2 <= s);
        prop_assert!((plan.k + 1) * (plan.k + 2) / 2 > s);
    }
}
