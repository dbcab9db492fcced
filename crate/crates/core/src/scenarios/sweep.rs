use std::cmp::Ordering;
use std::time::Instant;

use rayon::prelude::*;
use toml::{Table as Doc, Value};

use crate::error::{Error, Result};
use crate::model::{normalize_units, set_key};

use super::{run_config, Cell, ScenarioResult, Table};

fn cmp_values(a: &Value, b: &Value) -> Ordering {
    match (num(a), num(b)) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        _ => a.to_string().cmp(&b.to_string()),
    }
}

fn num(v: &Value) -> Option<f64> {
    match v {
        Value::Integer(i) => Some(*i as f64),
        Value::Float(x) => Some(*x),
        _ => None,
    }
}

fn cell(v: &Value) -> Cell {
    match (num(v), v) {
        (Some(x), _) => Cell::Num(x),
        (None, Value::String(s)) => Cell::Text(s.clone()),
        (None, other) => Cell::Text(other.to_string()),
    }
}

/// Cartesian product of the axis values, sorted lexicographically with
/// numbers compared by value.
pub fn sweep_cells(values: &[Vec<Value>]) -> Vec<Vec<Value>> {
    let mut cells: Vec<Vec<Value>> = vec![vec![]];
    for axis in values {
        let mut sorted = axis.clone();
        sorted.sort_by(cmp_values);
        cells = cells
            .into_iter()
            .flat_map(|prefix| {
                sorted.iter().map(move |v| {
                    let mut c = prefix.clone();
                    c.push(v.clone());
                    c
                })
            })
            .collect();
    }
    cells
}

/// Column names for the axes: the key without its section unless that
/// would be ambiguous.
fn axis_columns(keys: &[String]) -> Vec<String> {
    let short: Vec<&str> = keys.iter().map(|k| k.rsplit('.').next().unwrap_or(k)).collect();
    keys.iter()
        .zip(&short)
        .map(|(k, s)| if short.iter().filter(|x| *x == s).count() > 1 { k.clone() } else { s.to_string() })
        .collect()
}

/// Run every cell of the document's [sweep] and report the observables at
/// the final output time, one row per (cell, observable). Failed cells go
/// to a `<id>_failures` table; the sweep fails only if every cell does.
pub fn sweep(id: &str, raw: &Doc) -> Result<ScenarioResult> {
    let start = Instant::now();
    let cfg = normalize_units(raw)?;
    if cfg.sweep.is_empty() {
        return Err(Error::validation("sweep", "the configuration has no [sweep] axes"));
    }
    let keys: Vec<String> = cfg.sweep.iter().map(|a| a.key.clone()).collect();
    let values: Vec<Vec<Value>> = cfg.sweep.iter().map(|a| a.values.clone()).collect();
    let cells = sweep_cells(&values);
    let mut base = raw.clone();
    base.remove("sweep");

    let outcomes: Vec<Result<ScenarioResult>> = cells
        .par_iter()
        .map(|cell_values| {
            let mut doc = base.clone();
            for (k, v) in keys.iter().zip(cell_values) {
                set_key(&mut doc, k, v.clone())?;
            }
            run_config(id, &normalize_units(&doc)?)
        })
        .collect();

    let cols = axis_columns(&keys);
    let mut header: Vec<&str> = cols.iter().map(String::as_str).collect();
    header.extend(["observable", "value"]);
    let mut table = Table::new(id, &header);
    let mut fail_header: Vec<&str> = cols.iter().map(String::as_str).collect();
    fail_header.push("error");
    let mut failures = Table::new(format!("{id}_failures"), &fail_header);

    let mut res = ScenarioResult::new(id, crate::model::denormalize(&cfg));
    res.parameters.insert(
        "sweep".into(),
        Value::Table(
            keys.iter()
                .zip(&values)
                .map(|(k, v)| (k.clone(), Value::Array(v.clone())))
                .collect(),
        ),
    );
    let mut ok = 0usize;
    for (cell_values, outcome) in cells.iter().zip(outcomes) {
        let axis: Vec<Cell> = cell_values.iter().map(cell).collect();
        match outcome {
            Ok(r) => {
                ok += 1;
                let traj = &r.tables[0];
                let last = traj.rows.last().expect("trajectory has rows");
                for (name, v) in traj.columns.iter().zip(last).skip(1) {
                    let mut row = axis.clone();
                    row.push(Cell::Text(name.clone()));
                    row.push(v.clone());
                    table.push(row);
                }
                res.absorb(r.stats, r.diagnostics);
            }
            Err(e) => {
                let mut row = axis;
                row.push(Cell::Text(e.to_string()));
                failures.push(row);
            }
        }
    }
    if ok == 0 {
        return Err(Error::Numerical(format!("all {} sweep cells failed", cells.len())));
    }
    res.summary.push(("cells".into(), cells.len() as f64));
    res.summary.push(("failed_cells".into(), (cells.len() - ok) as f64));
    res.tables.push(table);
    if !failures.rows.is_empty() {
        res.tables.push(failures);
    }
    res.wall_time_s = start.elapsed().as_secs_f64();
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cartesian_order() {
        let cells = sweep_cells(&[
            vec![Value::Float(3.0), Value::Integer(1)],
            vec![Value::Float(10.0), Value::Float(2.0), Value::Float(1.0), Value::Float(0.5)],
        ]);
        assert_eq!(cells.len(), 8);
        assert_eq!(cells[0], vec![Value::Integer(1), Value::Float(0.5)]);
        assert_eq!(cells[7], vec![Value::Float(3.0), Value::Float(10.0)]);
    }

    #[test]
    fn column_names() {
        assert_eq!(
            axis_columns(&["geometry.V_rs_MHz".into(), "atom.gamma_r_MHz".into()]),
            vec!["V_rs_MHz", "gamma_r_MHz"]
        );
        assert_eq!(axis_columns(&["a.x".into(), "b.x".into()]), vec!["a.x", "b.x"]);
    }
}
