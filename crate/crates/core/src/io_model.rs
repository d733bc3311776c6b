//! Two-level memory simulator.
//!
//! Slow memory is unbounded and holds every matrix. Fast memory holds at most
//! `capacity` scalar elements. Schedules move elements explicitly with
//! [`IoLedger::load`] and [`IoLedger::evict`]; nothing is ever evicted
//! implicitly, so overflowing the fast memory is reported as an error.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// Tag of a logical matrix living in slow memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MatrixId(pub u8);

impl MatrixId {
    /// Operand of SYRK, or the matrix being factored by Cholesky.
    pub const A: MatrixId = MatrixId(0);
    /// Result of SYRK.
    pub const C: MatrixId = MatrixId(1);
}

/// One scalar element of one matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ElementAddr {
    pub matrix: MatrixId,
    pub offset: usize,
}

impl ElementAddr {
    pub const fn new(matrix: MatrixId, offset: usize) -> Self {
        ElementAddr { matrix, offset }
    }
}

impl fmt::Display for ElementAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "matrix {}[{}]", self.matrix.0, self.offset)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    Load(ElementAddr),
    Evict { addr: ElementAddr, dirty: bool },
}

/// Counters of a finished (or running) schedule.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IoReport {
    pub loads: u64,
    pub stores: u64,
    pub peak_resident: usize,
    pub per_matrix_loads: BTreeMap<MatrixId, u64>,
}

impl IoReport {
    pub fn loads_of(&self, id: MatrixId) -> u64 {
        self.per_matrix_loads.get(&id).copied().unwrap_or(0)
    }

    pub const CSV_HEADER: &'static str = "algo,N,M,S,loads_A,loads_C,stores,peak_resident";

    pub fn csv_row(&self, algo: &str, n: usize, m: usize, s: usize) -> String {
        format!(
            "{algo},{n},{m},{s},{},{},{},{}",
            self.loads_of(MatrixId::A),
            self.loads_of(MatrixId::C),
            self.stores,
            self.peak_resident
        )
    }
}

/// Fast-memory state plus monotone transfer counters.
#[derive(Debug, Clone)]
pub struct IoLedger {
    capacity: usize,
    // resident[matrix][offset]
    resident: Vec<Vec<bool>>,
    resident_count: usize,
    report: IoReport,
    trace: Option<Vec<Event>>,
}

impl IoLedger {
    pub fn new(capacity: usize) -> Self {
        IoLedger {
            capacity,
            resident: Vec::new(),
            resident_count: 0,
            report: IoReport::default(),
            trace: None,
        }
    }

    /// Ledger that also records every transition.
    pub fn with_trace(capacity: usize) -> Self {
        IoLedger { trace: Some(Vec::new()), ..Self::new(capacity) }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn resident_count(&self) -> usize {
        self.resident_count
    }

    pub fn is_resident(&self, addr: ElementAddr) -> bool {
        self.resident
            .get(addr.matrix.0 as usize)
            .and_then(|m| m.get(addr.offset))
            .copied()
            .unwrap_or(false)
    }

    fn slot(&mut self, addr: ElementAddr) -> &mut bool {
        let m = addr.matrix.0 as usize;
        if self.resident.len() <= m {
            self.resident.resize_with(m + 1, Vec::new);
        }
        let v = &mut self.resident[m];
        if v.len() <= addr.offset {
            v.resize((addr.offset + 1).max(v.len() * 2), false);
        }
        &mut v[addr.offset]
    }

    /// Bring `addr` into fast memory. Touching a resident element is free.
    pub fn load(&mut self, addr: ElementAddr) -> Result<()> {
        if self.is_resident(addr) {
            return Ok(());
        }
        if self.resident_count >= self.capacity {
            return Err(Error::CapacityExceeded { addr, capacity: self.capacity });
        }
        *self.slot(addr) = true;
        self.resident_count += 1;
        self.report.loads += 1;
        *self.report.per_matrix_loads.entry(addr.matrix).or_insert(0) += 1;
        self.report.peak_resident = self.report.peak_resident.max(self.resident_count);
        if let Some(t) = &mut self.trace {
            t.push(Event::Load(addr));
        }
        Ok(())
    }

    /// Drop `addr` from fast memory, writing it back when `dirty`.
    pub fn evict(&mut self, addr: ElementAddr, dirty: bool) -> Result<()> {
        if !self.is_resident(addr) {
            return Err(Error::EvictNotResident { addr });
        }
        *self.slot(addr) = false;
        self.resident_count -= 1;
        if dirty {
            self.report.stores += 1;
        }
        if let Some(t) = &mut self.trace {
            t.push(Event::Evict { addr, dirty });
        }
        Ok(())
    }

    /// Fails on the first operand that is not resident.
    pub fn require_resident(&self, addrs: &[ElementAddr]) -> Result<()> {
        match addrs.iter().find(|a| !self.is_resident(**a)) {
            Some(&addr) => Err(Error::NotResident { addr }),
            None => Ok(()),
        }
    }

    pub fn snapshot(&self) -> IoReport {
        self.report.clone()
    }

    pub fn loads(&self) -> u64 {
        self.report.loads
    }

    pub fn loads_of(&self, id: MatrixId) -> u64 {
        self.report.loads_of(id)
    }

    pub fn trace(&self) -> Option<&[Event]> {
        self.trace.as_deref()
    }

    /// Replays `events` on this ledger.
    pub fn replay(&mut self, events: &[Event]) -> Result<()> {
        for e in events {
            match *e {
                Event::Load(a) => self.load(a)?,
                Event::Evict { addr, dirty } => self.evict(addr, dirty)?,
            }
        }
        Ok(())
    }
}
