//! Per-task capability degradation estimated from robot discrepancies, and
//! the threshold rule that re-triggers allocation.
//!
//! Discrepancies are averaged per species (row-normalized `P`), then per
//! capability over the species that possess it (column-normalized `Q̄`), so
//! every estimate is a convex combination of discrepancies in `[0, 1]`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::team::{binary_shadow, CapabilityMatrix, SpeciesMapping};

/// Degradation estimates for every task plus the snapshot taken at the last
/// allocator solve.
#[derive(Debug, Clone, PartialEq)]
pub struct DegradationState {
    /// `M × U`, rows are `d_m`.
    pub d: DMatrix<f64>,
    pub snapshot: DMatrix<f64>,
    /// Tick of the last solve.
    pub last_solve: u64,
}

impl DegradationState {
    pub fn new(num_tasks: usize, num_capabilities: usize) -> Self {
        DegradationState {
            d: DMatrix::zeros(num_tasks, num_capabilities),
            snapshot: DMatrix::zeros(num_tasks, num_capabilities),
            last_solve: 0,
        }
    }

    pub fn task(&self, m: usize) -> DVector<f64> {
        self.d.row(m).transpose()
    }

    pub fn set_task(&mut self, m: usize, dm: &DVector<f64>) {
        self.d.set_row(m, &dm.transpose());
    }

    /// Record a solve at `tick`.
    pub fn take_snapshot(&mut self, tick: u64) {
        self.snapshot.copy_from(&self.d);
        self.last_solve = tick;
    }

    pub fn triggered(&self, chi: f64) -> bool {
        reallocation_trigger(&self.d, &self.snapshot, chi)
    }
}

/// `P` and `Q̄` restricted to the robots in `members` and the species they
/// belong to (ascending species order).
pub fn task_submatrices(
    members: &[usize],
    mapping: &SpeciesMapping,
    q: &CapabilityMatrix,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut species: Vec<usize> = members.iter().map(|&i| mapping.species_of(i)).collect();
    species.sort_unstable();
    species.dedup();
    let p_sub = DMatrix::from_fn(species.len(), members.len(), |r, c| {
        f64::from(u8::from(mapping.species_of(members[c]) == species[r]))
    });
    let qbar = binary_shadow(q.matrix());
    let qbar_sub = DMatrix::from_fn(species.len(), q.num_capabilities(), |r, c| qbar[(species[r], c)]);
    (p_sub, qbar_sub)
}

fn normalize_rows(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for mut row in out.row_iter_mut() {
        let s: f64 = row.sum();
        if s != 0.0 {
            row /= s;
        }
    }
    out
}

fn normalize_cols(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for mut col in out.column_iter_mut() {
        let s: f64 = col.sum();
        if s != 0.0 {
            col /= s;
        }
    }
    out
}

/// `d*_m = normcols(Q̄_sub)ᵀ · normrows(P_sub) · ΔV_m`.
pub fn instantaneous_degradation(
    dv: &[f64],
    p_sub: &DMatrix<f64>,
    qbar_sub: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    if p_sub.ncols() != dv.len() {
        return Err(Error::Dimension {
            context: "P_sub columns vs discrepancies",
            expected: dv.len(),
            actual: p_sub.ncols(),
        });
    }
    if p_sub.nrows() != qbar_sub.nrows() {
        return Err(Error::Dimension {
            context: "P_sub rows vs Q̄_sub rows",
            expected: qbar_sub.nrows(),
            actual: p_sub.nrows(),
        });
    }
    if dv.is_empty() {
        return Ok(DVector::zeros(qbar_sub.ncols()));
    }
    let per_species = normalize_rows(p_sub) * DVector::from_column_slice(dv);
    Ok(normalize_cols(qbar_sub).transpose() * per_species)
}

/// Diagonal of `Θ_m`: 1 where some species in the task has the capability.
pub fn capability_indicator(qbar_sub: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(
        qbar_sub.ncols(),
        qbar_sub
            .column_iter()
            .map(|c| f64::from(u8::from(c.iter().any(|&v| v > 0.0)))),
    )
}

/// `d ← d + Δt·Θ(d* − d)`; gated entries are returned bit-identical.
pub fn update_degradation(
    d: &DVector<f64>,
    d_star: &DVector<f64>,
    theta: &DVector<f64>,
    dt: f64,
) -> DVector<f64> {
    DVector::from_fn(d.len(), |u, _| {
        if theta[u] == 0.0 {
            d[u]
        } else {
            (d[u] + dt * theta[u] * (d_star[u] - d[u])).clamp(0.0, 1.0)
        }
    })
}

/// True iff some entry grew by at least `chi` since the snapshot.
/// Decreases never trigger.
pub fn reallocation_trigger(d: &DMatrix<f64>, snapshot: &DMatrix<f64>, chi: f64) -> bool {
    d.iter().zip(snapshot.iter()).any(|(now, then)| now - then >= chi)
}
