use std::io::Write;

use crate::temporal::export::{write_csv, CsvTable, ExportError};

use super::simulate::Trajectory;
use super::step::SpatialState;

/// Spatial column names `x0..` and `th0..` for an ambient dimension.
pub fn spatial_header(ambient: usize) -> Vec<String> {
    (0..ambient)
        .map(|k| format!("x{k}"))
        .chain((0..ambient).map(|k| format!("th{k}")))
        .collect()
}

/// Writes the temporal columns followed by x and Θ components.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, out: W) -> Result<(), ExportError> {
    let header = spatial_header(traj.fiber.ambient_dim());
    write_csv(
        &traj.temporal,
        &header,
        |i| {
            let sp = &traj.spatial[i];
            sp.x.iter().chain(&sp.theta).copied().collect()
        },
        out,
    )
}

/// Recovers the spatial states from a table written by
/// [`write_trajectory_csv`]; `None` when the table has no spatial columns.
pub fn spatial_states(table: &CsvTable) -> Option<Vec<SpatialState>> {
    let xs = table.indexed_columns("x");
    let ts = table.indexed_columns("th");
    if xs.is_empty() || xs.len() != ts.len() {
        return None;
    }
    let xi: Vec<usize> = xs.iter().map(|c| table.column_index(c).unwrap()).collect();
    let ti: Vec<usize> = ts.iter().map(|c| table.column_index(c).unwrap()).collect();
    Some(
        table
            .rows
            .iter()
            .map(|r| SpatialState {
                x: xi.iter().map(|&k| r[k]).collect(),
                theta: ti.iter().map(|&k| r[k]).collect(),
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::catalog;
    use crate::rng::trajectory_rng;
    use crate::spatial::{simulate_full, Fiber};
    use crate::temporal::export::read_csv;
    use crate::temporal::{StepParams, TemporalState};

    #[test]
    fn round_trip() {
        let m = catalog("sinh", &[]).unwrap();
        let f = Fiber::hyperbolic(3);
        let tr = simulate_full(
            TemporalState::from_tdot(&m, 0.0, 1.0, 1.5),
            SpatialState::origin(&f),
            &m,
            &f,
            &StepParams::new(1.0, 3, 1e-2),
            1.0,
            5,
            &mut trajectory_rng(3, 1),
        );
        let mut buf = Vec::new();
        write_trajectory_csv(&tr, &mut buf).unwrap();
        let table = read_csv(buf.as_slice()).unwrap();
        assert_eq!(table.header.len(), 6 + 8);
        assert_eq!(spatial_states(&table).unwrap(), tr.spatial);
    }
}
