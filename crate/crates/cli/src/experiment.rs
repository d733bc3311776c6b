use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;
use std::str::FromStr;

use symk::baseline::{
    ooc_chol, ooc_chol_count, ooc_syrk, ooc_syrk_count, square_tile, streaming_cholesky, streaming_cholesky_count,
    streaming_syrk, streaming_syrk_count,
};
use symk::bounds::{chol_lower_bound, syrk_lower_bound, CHOL_BOUND_CONSTANT, SYRK_BOUND_CONSTANT};
use symk::lbc::{choose_block_size, lbc, lbc_count, lbc_envelope};
use symk::matrix::{random_spd, reference_cholesky, reference_syrk};
use symk::matrix_file::{read_matrix, write_packed, StoredMatrix};
use symk::tbs::{tbs, tbs_count, tbs_tiled, tbs_tiled_count};
use symk::triangle::build_tiled_plan;
use symk::{IoReport, Matrix64, MatrixId, Mode, Packed64};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algo {
    RefSyrk,
    OocSyrk,
    Tbs,
    TbsTiled,
    RefChol,
    OocChol,
    Lbc,
}

impl Algo {
    pub const ALL: [Algo; 7] =
        [Algo::RefSyrk, Algo::OocSyrk, Algo::Tbs, Algo::TbsTiled, Algo::RefChol, Algo::OocChol, Algo::Lbc];

    pub fn name(self) -> &'static str {
        match self {
            Algo::RefSyrk => "ref-syrk",
            Algo::OocSyrk => "ooc-syrk",
            Algo::Tbs => "tbs",
            Algo::TbsTiled => "tbs-tiled",
            Algo::RefChol => "ref-chol",
            Algo::OocChol => "ooc-chol",
            Algo::Lbc => "lbc",
        }
    }

    pub fn is_syrk(self) -> bool {
        matches!(self, Algo::RefSyrk | Algo::OocSyrk | Algo::Tbs | Algo::TbsTiled)
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algo {
    type Err = RunError;

    fn from_str(s: &str) -> Result<Self, RunError> {
        Algo::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| RunError::Invalid(format!("unknown algorithm `{s}`")))
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Kernel(#[from] symk::Error),
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error("{algo} N={n}: result differs from the reference by {rel:.3e} (relative)")]
    Verification { algo: Algo, n: usize, rel: f64 },
    #[error("{algo} N={n} S={s}: ratio {ratio:.6} is below the lower-bound constant {constant:.6}")]
    BeatsLowerBound { algo: Algo, n: usize, s: usize, ratio: f64, constant: f64 },
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
}

/// Default limit on matrix elements allocated in compute mode.
pub const DEFAULT_COMPUTE_CAP: usize = 1 << 24;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub algo: Algo,
    pub n: usize,
    /// Columns of `A`; ignored by the Cholesky algorithms.
    pub m: usize,
    pub s: usize,
    pub mode: Mode,
    pub seed: u64,
    pub tile: Option<usize>,
    pub block: Option<usize>,
    pub compute_cap: usize,
    pub in_matrix: Option<PathBuf>,
    pub out_matrix: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(algo: Algo, n: usize, m: usize, s: usize) -> Self {
        ExperimentSpec {
            algo,
            n,
            m,
            s,
            mode: Mode::Count,
            seed: 0,
            tile: None,
            block: None,
            compute_cap: DEFAULT_COMPUTE_CAP,
            in_matrix: None,
            out_matrix: None,
        }
    }

    /// `M` as reported: the Cholesky kernels have no `M`.
    pub fn reported_m(&self) -> usize {
        if self.algo.is_syrk() {
            self.m
        } else {
            0
        }
    }

    /// Block or tile size the algorithm actually uses.
    pub fn effective_b(&self) -> Result<usize, RunError> {
        Ok(match self.algo {
            Algo::RefSyrk | Algo::RefChol | Algo::Tbs => 1,
            Algo::OocSyrk | Algo::OocChol => square_tile(self.s)?,
            Algo::TbsTiled => self.tile.unwrap_or(1),
            Algo::Lbc => self.block.unwrap_or_else(|| choose_block_size(self.n)),
        })
    }

    fn check(&self) -> Result<(), RunError> {
        if self.n == 0 {
            return Err(RunError::Invalid("N must be positive".into()));
        }
        if self.algo.is_syrk() && self.m == 0 {
            return Err(RunError::Invalid(format!("{} needs M >= 1", self.algo)));
        }
        if self.tile.is_some() && self.algo != Algo::TbsTiled {
            return Err(RunError::Invalid(format!("--tile applies only to tbs-tiled, not {}", self.algo)));
        }
        if self.block.is_some() && self.algo != Algo::Lbc {
            return Err(RunError::Invalid(format!("--block applies only to lbc, not {}", self.algo)));
        }
        if self.mode == Mode::Compute {
            let elements = self.n * (self.n + 1) / 2 + if self.algo.is_syrk() { self.n * self.m } else { 0 };
            if elements > self.compute_cap {
                return Err(RunError::Invalid(format!(
                    "compute mode would allocate {elements} elements, above the cap of {}",
                    self.compute_cap
                )));
            }
        } else if self.in_matrix.is_some() || self.out_matrix.is_some() {
            return Err(RunError::Invalid("matrix files require compute mode".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub spec: ExperimentSpec,
    pub b: usize,
    pub io: IoReport,
    pub lower_bound: f64,
    /// Leading-order cost formula of the algorithm, where one exists.
    pub upper_envelope: Option<f64>,
    pub ratio: f64,
}

impl BoundReport {
    pub const CSV_HEADER: &'static str =
        "algo,N,M,S,b,mode,loads_A,loads_C,stores,peak_resident,lower_bound,ratio";

    pub fn loads_a(&self) -> u64 {
        self.io.loads_of(MatrixId::A)
    }

    pub fn loads_c(&self) -> u64 {
        self.io.loads_of(MatrixId::C)
    }

    pub fn csv_row(&self) -> String {
        let s = &self.spec;
        let mode = match s.mode {
            Mode::Compute => "compute",
            Mode::Count => "count",
        };
        format!(
            "{},{},{},{},{},{mode},{},{},{},{},{:.3},{:.6}",
            s.algo,
            s.n,
            s.reported_m(),
            s.s,
            self.b,
            self.loads_a(),
            self.loads_c(),
            self.io.stores,
            self.io.peak_resident,
            self.lower_bound,
            self.ratio
        )
    }
}

fn open(path: &PathBuf) -> Result<BufReader<File>, RunError> {
    File::open(path).map(BufReader::new).map_err(|source| RunError::File { path: path.clone(), source })
}

fn save(path: &PathBuf, m: &Packed64) -> Result<(), RunError> {
    let f = File::create(path).map_err(|source| RunError::File { path: path.clone(), source })?;
    write_packed(&mut BufWriter::new(f), m)?;
    Ok(())
}

fn syrk_input(spec: &ExperimentSpec) -> Result<Matrix64, RunError> {
    match &spec.in_matrix {
        None => Ok(Matrix64::random(spec.n, spec.m, -1.0, 1.0, spec.seed)),
        Some(path) => match read_matrix::<f64, _>(&mut open(path)?)? {
            StoredMatrix::Dense(a) if a.rows() == spec.n && a.cols() == spec.m => Ok(a),
            StoredMatrix::Dense(a) => Err(RunError::Invalid(format!(
                "{} holds a {}x{} matrix, expected {}x{}",
                path.display(),
                a.rows(),
                a.cols(),
                spec.n,
                spec.m
            ))),
            StoredMatrix::Packed(_) => Err(RunError::Invalid(format!("{}: SYRK input must be dense", path.display()))),
        },
    }
}

fn chol_input(spec: &ExperimentSpec) -> Result<Packed64, RunError> {
    match &spec.in_matrix {
        None => Ok(random_spd(spec.n, spec.seed)),
        Some(path) => match read_matrix::<f64, _>(&mut open(path)?)? {
            StoredMatrix::Packed(a) if a.n() == spec.n => Ok(a),
            StoredMatrix::Packed(a) => {
                Err(RunError::Invalid(format!("{} holds N={}, expected {}", path.display(), a.n(), spec.n)))
            }
            StoredMatrix::Dense(_) => {
                Err(RunError::Invalid(format!("{}: Cholesky input must be packed", path.display())))
            }
        },
    }
}

fn count(spec: &ExperimentSpec, b: usize) -> symk::Result<IoReport> {
    let (n, m, s) = (spec.n, spec.m, spec.s);
    match spec.algo {
        Algo::RefSyrk => streaming_syrk_count(n, m, s),
        Algo::OocSyrk => ooc_syrk_count(n, m, s),
        Algo::Tbs => tbs_count(n, m, s),
        Algo::TbsTiled => tbs_tiled_count(n, m, s, b),
        Algo::RefChol => streaming_cholesky_count(n, s),
        Algo::OocChol => ooc_chol_count(n, s),
        Algo::Lbc => lbc_count(n, s, Some(b)),
    }
}

fn compute(spec: &ExperimentSpec, b: usize) -> Result<IoReport, RunError> {
    let s = spec.s;
    let (result, want, io) = if spec.algo.is_syrk() {
        let a = syrk_input(spec)?;
        let mut c = Packed64::zeros(spec.n);
        let io = match spec.algo {
            Algo::RefSyrk => streaming_syrk(&a, &mut c, s)?,
            Algo::OocSyrk => ooc_syrk(&a, &mut c, s)?,
            Algo::Tbs => tbs(&a, &mut c, s)?,
            _ => tbs_tiled(&a, &mut c, s, b)?,
        };
        let want = reference_syrk(&a, &Packed64::zeros(spec.n))?;
        (c, want, io)
    } else {
        let a = chol_input(spec)?;
        let (l, io) = match spec.algo {
            Algo::RefChol => streaming_cholesky(&a, s)?,
            Algo::OocChol => ooc_chol(&a, s)?,
            _ => lbc(&a, s, Some(b))?,
        };
        let want = reference_cholesky(&a)?;
        (l, want, io)
    };
    let rel = result.max_abs_diff(&want) / want.max_abs().max(1.0);
    if !(rel <= 1e-9) {
        return Err(RunError::Verification { algo: spec.algo, n: spec.n, rel });
    }
    if let Some(path) = &spec.out_matrix {
        save(path, &result)?;
    }
    Ok(io)
}

/// Runs one experiment and relates its traffic to the lower bound.
pub fn run(spec: &ExperimentSpec) -> Result<BoundReport, RunError> {
    spec.check()?;
    let b = spec.effective_b()?;
    let io = match spec.mode {
        Mode::Count => count(spec, b)?,
        Mode::Compute => compute(spec, b)?,
    };
    let (n, m, s) = (spec.n as f64, spec.m as f64, spec.s as f64);
    let (lower_bound, ratio, constant) = if spec.algo.is_syrk() {
        let ratio = io.loads_of(MatrixId::A) as f64 / (n * n * m / s.sqrt());
        (syrk_lower_bound(n, m, s), ratio, SYRK_BOUND_CONSTANT)
    } else {
        (chol_lower_bound(n, s), io.loads as f64 / (n * n * n / s.sqrt()), CHOL_BOUND_CONSTANT)
    };
    let upper_envelope = match spec.algo {
        Algo::Tbs | Algo::TbsTiled => {
            let k = build_tiled_plan(spec.n, spec.s, b)?.k as f64;
            Some(n * n * m / ((k - 1.0) * b as f64))
        }
        Algo::OocSyrk => Some(n * n * m / b as f64),
        Algo::Lbc => Some(lbc_envelope(n, b as f64, s, 0.0)),
        _ => None,
    };
    if spec.mode == Mode::Count && ratio < constant {
        return Err(RunError::BeatsLowerBound { algo: spec.algo, n: spec.n, s: spec.s, ratio, constant });
    }
    Ok(BoundReport { spec: spec.clone(), b, io, lower_bound, upper_envelope, ratio })
}
