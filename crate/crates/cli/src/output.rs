//! CSV tables. Floats use the shortest representation that parses back to
//! the same value, so tables round-trip exactly.

use std::path::Path;

use rte_core::analysis::{ConvergenceTable, ErrorReport, MethodComparison};
use rte_core::dg::DGSolution;
use rte_core::mesh::TriangleMesh;

use crate::CliError;

pub const TABLE_HEADER: [&str; 10] = ["level", "h", "n_elems", "n_dirs", "e1", "e2", "e3", "e4", "eh", "iters"];
pub const RATES_HEADER: [&str; 7] = ["from_level", "to_level", "e1", "e2", "e3", "e4", "eh"];

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>, CliError> {
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?)
}

pub fn write_table(path: &Path, rows: &[ErrorReport]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(TABLE_HEADER)?;
    for r in rows {
        w.write_record([
            r.level.to_string(),
            num(r.h),
            r.n_elems.to_string(),
            r.n_dirs.to_string(),
            num(r.e1),
            num(r.e2),
            num(r.e3),
            num(r.e4),
            num(r.eh),
            r.iterations.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_rates(path: &Path, table: &ConvergenceTable) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(RATES_HEADER)?;
    for (p, r) in table.rates.iter().enumerate() {
        let mut rec = vec![table.rows[p].level.to_string(), table.rows[p + 1].level.to_string()];
        rec.extend(r.iter().map(|&x| num(x)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: u64) -> Result<T, CliError> {
    let raw = rec.get(i).unwrap_or("");
    raw.parse()
        .map_err(|_| CliError::Config(format!("table line {line}, column {}: cannot parse {raw:?}", TABLE_HEADER[i])))
}

/// Reads a table written by [`write_table`] and recomputes the rates.
pub fn read_table(path: &Path) -> Result<ConvergenceTable, CliError> {
    let mut r = csv::Reader::from_path(path)?;
    if r.headers()?.iter().ne(TABLE_HEADER) {
        return Err(CliError::Config(format!("{}: unexpected header", path.display())));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push(ErrorReport {
            level: field(&rec, 0, line)?,
            h: field(&rec, 1, line)?,
            n_elems: field(&rec, 2, line)?,
            n_dirs: field(&rec, 3, line)?,
            e1: field(&rec, 4, line)?,
            e2: field(&rec, 5, line)?,
            e3: field(&rec, 6, line)?,
            e4: field(&rec, 7, line)?,
            eh: field(&rec, 8, line)?,
            iterations: field(&rec, 9, line)?,
        });
    }
    Ok(ConvergenceTable::from_rows(rows))
}

/// `level,h,delta,eh_dodsd,eh_dodg,ratio`.
pub fn write_delta_effect(path: &Path, cmp: &MethodComparison, c_bar: f64) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["level", "h", "delta", "eh_dodsd", "eh_dodg", "ratio"])?;
    for ((a, b), q) in cmp.dodsd.rows.iter().zip(&cmp.dodg.rows).zip(cmp.eh_ratios()) {
        w.write_record([a.level.to_string(), num(a.h), num(c_bar * a.h), num(a.eh), num(b.eh), num(q)])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per direction and element: `l,K,centroid_x,centroid_y,u_mean`.
pub fn write_field(path: &Path, sol: &DGSolution, mesh: &TriangleMesh) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["l", "K", "centroid_x", "centroid_y", "u_mean"])?;
    let centroids: Vec<[f64; 2]> = (0..mesh.n_triangles())
        .map(|k| {
            let p = mesh.triangle_points(k);
            [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0]
        })
        .collect();
    for l in 0..sol.n_dirs() {
        for (k, c) in centroids.iter().enumerate() {
            let u = sol.element(l, k);
            let mean = (u[0] + u[1] + u[2]) / 3.0;
            w.write_record([l.to_string(), k.to_string(), num(c[0]), num(c[1]), num(mean)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `iteration,residual`.
pub fn write_residuals(path: &Path, history: &[f64]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["iteration", "residual"])?;
    for (i, r) in history.iter().enumerate() {
        w.write_record([(i + 1).to_string(), num(*r)])?;
    }
    w.flush()?;
    Ok(())
}

/// Key-value pairs as a two-column CSV.
pub fn write_key_values(path: &Path, pairs: &[(&str, String)]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["key", "value"])?;
    for (k, v) in pairs {
        w.write_record([*k, v.as_str()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn format_table(table: &ConvergenceTable) -> String {
    let mut s = format!(
        "{:>5} {:>10} {:>8} {:>6} {:>11} {:>11} {:>11} {:>11} {:>11} {:>6}\n",
        "level", "h", "n_elems", "n_dirs", "e1", "e2", "e3", "e4", "eh", "iters"
    );
    for r in &table.rows {
        s.push_str(&format!(
            "{:>5} {:>10.4e} {:>8} {:>6} {:>11.4e} {:>11.4e} {:>11.4e} {:>11.4e} {:>11.4e} {:>6}\n",
            r.level, r.h, r.n_elems, r.n_dirs, r.e1, r.e2, r.e3, r.e4, r.eh, r.iterations
        ));
    }
    for (p, r) in table.rates.iter().enumerate() {
        s.push_str(&format!(
            "rate {}->{}: e1 {:.3} e2 {:.3} e3 {:.3} e4 {:.3} eh {:.3}\n",
            table.rows[p].level,
            table.rows[p + 1].level,
            r[0],
            r[1],
            r[2],
            r[3],
            r[4]
        ));
    }
    s
}
