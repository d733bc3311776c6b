//! Execution context shared by all out-of-core kernels.
//!
//! A [`Machine`] couples an [`IoLedger`] with, optionally, the numeric
//! contents of slow memory. In count mode it carries no data and the kernels
//! only replay their load/evict schedule; in compute mode every arithmetic
//! operation first checks that its operands are resident. Kernels address
//! elements exclusively through views, so both modes drive the ledger with
//! the same address sequence.

use crate::error::{Error, Result};
use crate::io_model::{ElementAddr, IoLedger, IoReport, MatrixId};
use crate::matrix::packed_index;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Compute,
    Count,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "compute" => Ok(Mode::Compute),
            "count" => Ok(Mode::Count),
            other => Err(Error::InvalidArgument(format!("unknown mode `{other}`"))),
        }
    }
}

/// Whether an update accumulates `+ a b` (SYRK) or `- a b` (Cholesky).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Update {
    Add,
    Subtract,
}

enum Buffer<'a, T> {
    ReadOnly(&'a [T]),
    ReadWrite(&'a mut [T]),
}

pub struct Machine<'a, T> {
    ledger: IoLedger,
    buffers: Option<Vec<Option<Buffer<'a, T>>>>,
}

impl<'a, T: Scalar> Machine<'a, T> {
    /// Schedule-only machine: no numeric data is touched.
    pub fn counting(ledger: IoLedger) -> Self {
        Machine { ledger, buffers: None }
    }

    /// Machine with numeric slow memory; attach matrices before running.
    pub fn computing(ledger: IoLedger) -> Self {
        Machine { ledger, buffers: Some(Vec::new()) }
    }

    pub fn new(mode: Mode, ledger: IoLedger) -> Self {
        match mode {
            Mode::Compute => Self::computing(ledger),
            Mode::Count => Self::counting(ledger),
        }
    }

    fn attach(&mut self, id: MatrixId, buf: Buffer<'a, T>) {
        if let Some(bufs) = &mut self.buffers {
            let i = id.0 as usize;
            if bufs.len() <= i {
                bufs.resize_with(i + 1, || None);
            }
            bufs[i] = Some(buf);
        }
    }

    pub fn attach_read_only(&mut self, id: MatrixId, data: &'a [T]) {
        self.attach(id, Buffer::ReadOnly(data));
    }

    pub fn attach_mut(&mut self, id: MatrixId, data: &'a mut [T]) {
        self.attach(id, Buffer::ReadWrite(data));
    }

    pub fn is_computing(&self) -> bool {
        self.buffers.is_some()
    }

    pub fn mode(&self) -> Mode {
        if self.is_computing() {
            Mode::Compute
        } else {
            Mode::Count
        }
    }

    pub fn capacity(&self) -> usize {
        self.ledger.capacity()
    }

    pub fn ledger(&self) -> &IoLedger {
        &self.ledger
    }

    pub fn report(&self) -> IoReport {
        self.ledger.snapshot()
    }

    pub fn into_ledger(self) -> IoLedger {
        self.ledger
    }

    #[inline]
    pub fn load(&mut self, addr: ElementAddr) -> Result<()> {
        self.ledger.load(addr)
    }

    #[inline]
    pub fn evict(&mut self, addr: ElementAddr, dirty: bool) -> Result<()> {
        self.ledger.evict(addr, dirty)
    }

    pub fn load_all(&mut self, addrs: impl IntoIterator<Item = ElementAddr>) -> Result<()> {
        addrs.into_iter().try_for_each(|a| self.ledger.load(a))
    }

    pub fn evict_all(&mut self, addrs: impl IntoIterator<Item = ElementAddr>, dirty: bool) -> Result<()> {
        addrs.into_iter().try_for_each(|a| self.ledger.evict(a, dirty))
    }

    fn slow(&self, addr: ElementAddr) -> Result<T> {
        let buf = self
            .buffers
            .as_ref()
            .and_then(|b| b.get(addr.matrix.0 as usize))
            .and_then(Option::as_ref)
            .ok_or_else(|| Error::InvalidArgument(format!("no data attached for {addr}")))?;
        let slice: &[T] = match buf {
            Buffer::ReadOnly(s) => s,
            Buffer::ReadWrite(s) => s,
        };
        slice
            .get(addr.offset)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("{addr} outside attached storage")))
    }

    fn slow_mut(&mut self, addr: ElementAddr) -> Result<&mut T> {
        let buf = self
            .buffers
            .as_mut()
            .and_then(|b| b.get_mut(addr.matrix.0 as usize))
            .and_then(Option::as_mut)
            .ok_or_else(|| Error::InvalidArgument(format!("no data attached for {addr}")))?;
        match buf {
            Buffer::ReadOnly(_) => Err(Error::ReadOnly { addr }),
            Buffer::ReadWrite(s) => s
                .get_mut(addr.offset)
                .ok_or_else(|| Error::InvalidArgument(format!("{addr} outside attached storage"))),
        }
    }

    /// Value of a resident operand.
    pub fn read(&self, addr: ElementAddr) -> Result<T> {
        self.ledger.require_resident(&[addr])?;
        self.slow(addr)
    }

    /// Overwrites a resident operand.
    pub fn write(&mut self, addr: ElementAddr, v: T) -> Result<()> {
        self.ledger.require_resident(&[addr])?;
        *self.slow_mut(addr)? = v;
        Ok(())
    }

    /// `dst (+|-)= x * y`, all three resident.
    #[inline]
    pub fn fma(&mut self, dst: ElementAddr, x: ElementAddr, y: ElementAddr, update: Update) -> Result<()> {
        self.ledger.require_resident(&[dst, x, y])?;
        let p = self.slow(x)? * self.slow(y)?;
        let d = self.slow_mut(dst)?;
        match update {
            Update::Add => *d += p,
            Update::Subtract => *d -= p,
        }
        Ok(())
    }
}

/// Rectangular window onto a matrix held in slow memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PanelView {
    matrix: MatrixId,
    rows: usize,
    cols: usize,
    layout: PanelLayout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PanelLayout {
    RowMajor { row0: usize, col0: usize, stride: usize },
    /// Strictly-below-diagonal block of a packed lower triangle.
    PackedLower { row0: usize, col0: usize },
}

impl PanelView {
    /// Whole dense row-major `rows x cols` matrix.
    pub fn dense(matrix: MatrixId, rows: usize, cols: usize) -> Self {
        PanelView { matrix, rows, cols, layout: PanelLayout::RowMajor { row0: 0, col0: 0, stride: cols } }
    }

    /// Block `[row0, row0+rows) x [col0, col0+cols)` of a packed lower
    /// triangle; the block must lie on or below the diagonal.
    pub fn packed_block(matrix: MatrixId, row0: usize, col0: usize, rows: usize, cols: usize) -> Result<Self> {
        if rows > 0 && cols > 0 && row0 < col0 + cols - 1 {
            return Err(Error::InvalidArgument(format!(
                "block at ({row0}, {col0}) of size {rows}x{cols} crosses the diagonal"
            )));
        }
        Ok(PanelView { matrix, rows, cols, layout: PanelLayout::PackedLower { row0, col0 } })
    }

    pub fn matrix(&self) -> MatrixId {
        self.matrix
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Rows `[start, start+len)` of this panel.
    pub fn sub_rows(&self, start: usize, len: usize) -> Self {
        debug_assert!(start + len <= self.rows);
        let layout = match self.layout {
            PanelLayout::RowMajor { row0, col0, stride } => PanelLayout::RowMajor { row0: row0 + start, col0, stride },
            PanelLayout::PackedLower { row0, col0 } => PanelLayout::PackedLower { row0: row0 + start, col0 },
        };
        PanelView { rows: len, layout, ..*self }
    }

    #[inline]
    pub fn addr(&self, r: usize, c: usize) -> ElementAddr {
        debug_assert!(r < self.rows && c < self.cols);
        let offset = match self.layout {
            PanelLayout::RowMajor { row0, col0, stride } => (row0 + r) * stride + col0 + c,
            PanelLayout::PackedLower { row0, col0 } => packed_index(row0 + r, col0 + c),
        };
        ElementAddr::new(self.matrix, offset)
    }
}

/// Diagonal block `[base, base+n)^2` of a packed lower triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TriView {
    matrix: MatrixId,
    n: usize,
    base: usize,
}

impl TriView {
    pub fn full(matrix: MatrixId, n: usize) -> Self {
        TriView { matrix, n, base: 0 }
    }

    pub fn matrix(&self) -> MatrixId {
        self.matrix
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn sub(&self, start: usize, len: usize) -> Self {
        debug_assert!(start + len <= self.n);
        TriView { n: len, base: self.base + start, ..*self }
    }

    /// Entry `(i, j)`, `j <= i`.
    #[inline]
    pub fn addr(&self, i: usize, j: usize) -> ElementAddr {
        debug_assert!(j <= i && i < self.n);
        ElementAddr::new(self.matrix, packed_index(self.base + i, self.base + j))
    }
}
