//! Trajectory files `t,S,V,I,R,u` and costate files
//! `t,lambda1,lambda2,lambda3`, one row per grid node.

use std::io::Read;

use crate::error::{Result, SvirError};
use crate::model::{ControlPath, SvirState, TimeGrid};
use crate::pmp::CostateState;

use super::fmt_num;

const HEADER: [&str; 6] = ["t", "S", "V", "I", "R", "u"];

pub fn write_trajectory(grid: &TimeGrid, states: &[SvirState], control: &ControlPath) -> String {
    let mut out = HEADER.join(",");
    out.push('\n');
    for (k, (x, u)) in states.iter().zip(control.values()).enumerate() {
        let row = [grid.time(k), x.s, x.v, x.i, x.r, *u].map(fmt_num);
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn write_costates(grid: &TimeGrid, costates: &[CostateState]) -> String {
    let mut out = String::from("t,lambda1,lambda2,lambda3\n");
    for (k, l) in costates.iter().enumerate() {
        let row = [grid.time(k), l.lambda1, l.lambda2, l.lambda3].map(fmt_num);
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub states: Vec<SvirState>,
    pub control: ControlPath,
}

fn line_err(line: usize, msg: impl Into<String>) -> SvirError {
    SvirError::validation(format!("trajectory line {line}"), msg)
}

/// Reads a trajectory. Times must be uniformly spaced (to 1e-6 of the step)
/// and controls must lie in `[0, 1]`.
pub fn read_trajectory<R: Read>(reader: R) -> Result<Trajectory> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| line_err(1, e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != HEADER {
        return Err(line_err(1, format!("expected header {}", HEADER.join(","))));
    }
    let mut rows: Vec<[f64; 6]> = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| line_err(line, e.to_string()))?;
        if rec.len() != 6 {
            return Err(line_err(line, format!("expected 6 fields, found {}", rec.len())));
        }
        let mut row = [0.0f64; 6];
        for c in 0..6 {
            row[c] = rec[c]
                .parse()
                .map_err(|_| line_err(line, format!("{} = {:?} is not a number", HEADER[c], &rec[c])))?;
            if !row[c].is_finite() {
                return Err(line_err(line, format!("{} is not finite", HEADER[c])));
            }
        }
        if !(0.0..=1.0).contains(&row[5]) {
            return Err(line_err(line, format!("u = {} is outside [0, 1]", row[5])));
        }
        rows.push(row);
    }
    if rows.len() < 2 {
        return Err(SvirError::validation("trajectory", "needs at least 2 rows"));
    }
    let n = rows.len() - 1;
    let (t0, tf) = (rows[0][0], rows[n][0]);
    if tf <= t0 {
        return Err(line_err(n + 2, "final time does not exceed the initial time"));
    }
    let h = (tf - t0) / n as f64;
    for (k, row) in rows.iter().enumerate() {
        let expected = t0 + k as f64 * h;
        if (row[0] - expected).abs() > 1e-6 * h + 1e-9 * expected.abs() {
            return Err(line_err(k + 2, format!("t = {} breaks the uniform step {h}", row[0])));
        }
    }
    let grid = TimeGrid::new(t0, tf, n)?;
    let states = rows.iter().map(|r| SvirState::new(r[1], r[2], r[3], r[4])).collect();
    let control = ControlPath::new(rows.iter().map(|r| r[5]).collect(), &grid, 1.0)?;
    Ok(Trajectory { grid, states, control })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{integrate_forward, ModelParams};

    #[test]
    fn write_read_round_trip() {
        let grid = TimeGrid::new(0.0, 5.0, 50).unwrap();
        let u = ControlPath::constant(&grid, 0.3, 1.0).unwrap();
        let states = integrate_forward(&ModelParams::baseline(), &u, &SvirState::baseline_initial(), &grid).unwrap();
        let text = write_trajectory(&grid, &states, &u);
        let back = read_trajectory(text.as_bytes()).unwrap();
        assert_eq!(back.grid, grid);
        assert_eq!(back.control, u);
        for (a, b) in back.states.iter().zip(&states) {
            assert!((a.i - b.i).abs() <= 5e-10 * b.i);
        }
        assert_eq!(write_trajectory(&back.grid, &back.states, &back.control), text);
    }

    #[test]
    fn rejects_malformed() {
        for text in [
            "t,S,V,I,R\n",
            "t,S,V,I,R,u\n0,1,0,0,0,0\n",
            "t,S,V,I,R,u\n0,1,0,0,0,0\n1,1,0,0,0,2\n",
            "t,S,V,I,R,u\n0,1,0,0,0,0\n1,1,0,0,0,0\n3,1,0,0,0,0\n",
            "t,S,V,I,R,u\n1,1,0,0,0,0\n0,1,0,0,0,0\n",
            "t,S,V,I,R,u\n0,1,0,0,0,0\n1,1,0,NaN,0,0\n",
        ] {
            assert!(read_trajectory(text.as_bytes()).is_err(), "{text:?}");
        }
    }
}
