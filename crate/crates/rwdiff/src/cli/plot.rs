use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use anyhow::{bail, Context, Result};

use crate::spatial::fiber::norm;
use crate::spatial::export::spatial_states;
use crate::spatial::{Fiber, FiberKind, SpatialState};
use crate::temporal::export::{read_csv, read_sidecar, sidecar_path, CsvTable};

use super::svg::{line_plot, Series};
use super::{PlotArgs, EXIT_OK};

fn column(table: &CsvTable, name: &str) -> Result<Vec<f64>> {
    table.column(name).with_context(|| format!("input has no `{name}` column"))
}

fn write_series(dir: &Path, stem: &str, header: &[String], rows: &[Vec<f64>], svg: &str) -> Result<()> {
    let path = dir.join(format!("{stem}.csv"));
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    std::fs::write(dir.join(format!("{stem}.svg")), svg)?;
    Ok(())
}

fn two_column(dir: &Path, stem: &str, x_name: &str, y_name: &str, xs: &[f64], ys: &[f64]) -> Result<()> {
    let rows: Vec<Vec<f64>> = xs.iter().zip(ys).map(|(x, y)| vec![*x, *y]).collect();
    let svg = line_plot(
        stem,
        x_name,
        y_name,
        &[Series {
            name: y_name,
            points: xs.iter().copied().zip(ys.iter().copied()).collect(),
        }],
    );
    write_series(dir, stem, &[x_name.to_string(), y_name.to_string()], &rows, &svg)
}

/// |x − cos(A)U − sin(A)V| at every sample, with (U, V) read off the last one.
pub fn great_circle_residuals(conformal: &[f64], states: &[SpatialState]) -> Vec<f64> {
    let (Some(&a_end), Some(end)) = (conformal.last(), states.last()) else {
        return Vec::new();
    };
    let (s, c) = a_end.sin_cos();
    let u: Vec<f64> = end.x.iter().zip(&end.theta).map(|(x, t)| c * x - s * t).collect();
    let v: Vec<f64> = end.x.iter().zip(&end.theta).map(|(x, t)| s * x + c * t).collect();
    conformal
        .iter()
        .zip(states)
        .map(|(a, sp)| {
            let (s, c) = a.sin_cos();
            let d: Vec<f64> = sp.x.iter().zip(u.iter().zip(&v)).map(|(x, (p, q))| x - c * p - s * q).collect();
            norm(&d)
        })
        .collect()
}

pub fn cmd_plot_data(a: &PlotArgs) -> Result<i32> {
    let file = File::open(&a.input).with_context(|| format!("opening {}", a.input.display()))?;
    let table = read_csv(BufReader::new(file))?;
    let fiber: Option<Fiber> = match a.fiber {
        Some(f) => Some(f),
        None => {
            let side = sidecar_path(&a.input);
            if side.exists() {
                read_sidecar(&side)?.fiber.map(|f| f.parse()).transpose()?
            } else {
                None
            }
        }
    };
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let s = column(&table, "s")?;
    let tdot = column(&table, "tdot")?;
    let clock = column(&table, "clock")?;
    let log_tdot: Vec<f64> = tdot.iter().map(|v| v.ln()).collect();
    two_column(&a.out, "log_tdot", "s", "log_tdot", &s, &log_tdot)?;
    two_column(&a.out, "clock", "s", "clock", &s, &clock)?;

    let theta_cols = table.indexed_columns("th");
    if theta_cols.is_empty() {
        bail!("input has no direction columns; plot-data needs a full trajectory");
    }
    let thetas: Vec<Vec<f64>> = theta_cols.iter().map(|c| column(&table, c)).collect::<Result<_>>()?;
    let mut header = vec!["clock".to_string()];
    header.extend(theta_cols.iter().cloned());
    let rows: Vec<Vec<f64>> = (0..s.len())
        .map(|i| std::iter::once(clock[i]).chain(thetas.iter().map(|c| c[i])).collect())
        .collect();
    let series: Vec<Series> = theta_cols
        .iter()
        .zip(&thetas)
        .map(|(name, col)| Series {
            name,
            points: clock.iter().copied().zip(col.iter().copied()).collect(),
        })
        .collect();
    let svg = line_plot("theta_vs_clock", "clock", "theta", &series);
    write_series(&a.out, "theta_vs_clock", &header, &rows, &svg)?;

    if fiber.map(|f| f.kind) == Some(FiberKind::Spherical) {
        let states = spatial_states(&table).context("malformed spatial columns")?;
        let conformal = column(&table, "conformal")?;
        let residual = great_circle_residuals(&conformal, &states);
        two_column(&a.out, "great_circle_residual", "s", "residual", &s, &residual)?;
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residual_vanishes_on_an_exact_great_circle() {
        let conformal: Vec<f64> = (0..20).map(|k| 0.3 * k as f64).collect();
        let states: Vec<SpatialState> = conformal
            .iter()
            .map(|a| SpatialState {
                x: vec![a.cos(), a.sin(), 0.0, 0.0],
                theta: vec![-a.sin(), a.cos(), 0.0, 0.0],
            })
            .collect();
        let r = great_circle_residuals(&conformal, &states);
        assert!(r.iter().all(|v| *v < 1e-12), "{r:?}");
    }
}
