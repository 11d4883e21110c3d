use serde::Serialize;

/// Below this predicted change no progress was expected and no discrepancy
/// is attributed.
pub const DEGENERATE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiscrepancyRecord {
    pub robot: usize,
    pub dv: f64,
    pub dv_smoothed: f64,
    pub tick: u64,
}

/// Fraction of the predicted task-value change that failed to materialize,
/// clamped to `[0, 1]`.
pub fn task_discrepancy(v_prev: f64, v_meas: f64, v_pred: f64) -> f64 {
    let expected = v_pred - v_prev;
    if expected.abs() < DEGENERATE_EPS {
        return 0.0;
    }
    (1.0 - (v_meas - v_prev) / expected).clamp(0.0, 1.0)
}

/// First-order low-pass filter of the discrepancy.
pub fn smooth_discrepancy(prev: f64, dv: f64, dt: f64) -> f64 {
    (prev + dt * (dv - prev)).clamp(0.0, 1.0)
}
