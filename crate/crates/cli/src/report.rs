//! Error reports in millimetres and degrees.

use deskasm_core::se3::rpy_from_rot;
use deskasm_core::Pose;
use serde::{Deserialize, Serialize};
use std::fmt::Write;

/// Estimate minus truth. Angles are the roll, pitch and yaw of
/// `R_est * R_true^T`; `dd` is the change in distance from the frame origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ErrorRow {
    pub label: String,
    pub dx_mm: f64,
    pub dy_mm: f64,
    pub dz_mm: f64,
    pub dd_mm: f64,
    pub droll_deg: f64,
    pub dpitch_deg: f64,
    pub dyaw_deg: f64,
}

impl ErrorRow {
    pub fn between(label: impl Into<String>, est: &Pose, truth: &Pose) -> Self {
        let dt = est.position - truth.position;
        let e = rpy_from_rot(&(est.rotation * truth.rotation.transpose()));
        Self {
            label: label.into(),
            dx_mm: dt.x * 1e3,
            dy_mm: dt.y * 1e3,
            dz_mm: dt.z * 1e3,
            dd_mm: (est.position.norm() - truth.position.norm()) * 1e3,
            droll_deg: e.roll.to_degrees(),
            dpitch_deg: e.pitch.to_degrees(),
            dyaw_deg: e.yaw.to_degrees(),
        }
    }

    fn values(&self) -> [f64; 7] {
        [
            self.dx_mm,
            self.dy_mm,
            self.dz_mm,
            self.dd_mm,
            self.droll_deg,
            self.dpitch_deg,
            self.dyaw_deg,
        ]
    }

    fn from_values(label: String, v: [f64; 7]) -> Self {
        Self {
            label,
            dx_mm: v[0],
            dy_mm: v[1],
            dz_mm: v[2],
            dd_mm: v[3],
            droll_deg: v[4],
            dpitch_deg: v[5],
            dyaw_deg: v[6],
        }
    }

    /// `Δd (Δr, Δp, Δy)`.
    pub fn compact(&self) -> String {
        format!(
            "{:.2} ({:.2}, {:.2}, {:.2})",
            self.dd_mm, self.droll_deg, self.dpitch_deg, self.dyaw_deg
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PrecisionReport {
    pub rows: Vec<ErrorRow>,
    /// Mean absolute value of each column.
    pub mean_abs: ErrorRow,
}

impl PrecisionReport {
    pub fn new(rows: Vec<ErrorRow>) -> Self {
        let mean_abs = Self::aggregate(&rows);
        Self { rows, mean_abs }
    }

    fn aggregate(rows: &[ErrorRow]) -> ErrorRow {
        let mut sum = [0.0; 7];
        for r in rows {
            for (s, v) in sum.iter_mut().zip(r.values()) {
                *s += v.abs();
            }
        }
        let n = rows.len().max(1) as f64;
        ErrorRow::from_values("mean |Δ|".into(), sum.map(|s| s / n))
    }

    /// Whether the aggregate row matches the rows it was computed from.
    pub fn is_consistent(&self) -> bool {
        let again = Self::aggregate(&self.rows);
        again
            .values()
            .iter()
            .zip(self.mean_abs.values())
            .all(|(a, b)| (a - b).abs() <= 1e-9 * (1.0 + a.abs()))
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<22} {:>8} {:>8} {:>8}   Δd (Δr, Δp, Δy) [mm, deg]",
            "", "Δx mm", "Δy mm", "Δz mm"
        );
        for r in self.rows.iter().chain(std::iter::once(&self.mean_abs)) {
            let _ = writeln!(
                out,
                "{:<22} {:>8.2} {:>8.2} {:>8.2}   {}",
                r.label,
                r.dx_mm,
                r.dy_mm,
                r.dz_mm,
                r.compact()
            );
        }
        out
    }
}
