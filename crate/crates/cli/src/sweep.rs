use std::collections::BTreeMap;
use std::io::{self, Write};

use rayon::prelude::*;

use crate::experiment::{run, Algo, BoundReport, ExperimentSpec, RunError};

/// Runs every spec (concurrently, one ledger each) and returns the results
/// in input order.
pub fn sweep(specs: &[ExperimentSpec]) -> Vec<Result<BoundReport, RunError>> {
    specs.par_iter().map(run).collect()
}

/// Writes the header and one row per successful run. Failed runs are
/// reported to `errors` and counted.
pub fn write_csv<W: Write, E: Write>(
    out: &mut W,
    errors: &mut E,
    specs: &[ExperimentSpec],
    results: &[Result<BoundReport, RunError>],
) -> io::Result<usize> {
    writeln!(out, "{}", BoundReport::CSV_HEADER)?;
    let mut failed = 0;
    for (spec, r) in specs.iter().zip(results) {
        match r {
            Ok(report) => writeln!(out, "{}", report.csv_row())?,
            Err(e) => {
                failed += 1;
                writeln!(errors, "error: {} N={} M={} S={}: {e}", spec.algo, spec.n, spec.m, spec.s)?;
            }
        }
    }
    out.flush()?;
    Ok(failed)
}

/// Plain-text data for ratio-vs-N plots: one block per `(algo, M, S)`,
/// blocks separated by two blank lines so gnuplot can address them with
/// `index`.
pub fn write_plot_data<W: Write>(out: &mut W, results: &[Result<BoundReport, RunError>]) -> io::Result<()> {
    let mut series: BTreeMap<(Algo, usize, usize), Vec<&BoundReport>> = BTreeMap::new();
    for r in results.iter().flatten() {
        series.entry((r.spec.algo, r.spec.reported_m(), r.spec.s)).or_default().push(r);
    }
    for (i, ((algo, m, s), mut rows)) in series.into_iter().enumerate() {
        if i > 0 {
            writeln!(out, "\n")?;
        }
        rows.sort_by_key(|r| r.spec.n);
        writeln!(out, "# algo={algo} M={m} S={s}")?;
        writeln!(out, "# N ratio loads_A lower_bound")?;
        for r in rows {
            writeln!(out, "{} {:.6} {} {:.3}", r.spec.n, r.ratio, r.loads_a(), r.lower_bound)?;
        }
    }
    out.flush()
}
