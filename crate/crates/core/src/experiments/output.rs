//! CSV, summary, and plot-script files of a run.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::adjoint::JumpRecord;
use crate::error::{Error, Result};
use crate::optimizer::SolveReport;

pub const SOLUTION_FILE: &str = "solution.csv";
pub const JUMPS_FILE: &str = "jumps.csv";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const PLOT_FILE: &str = "plot.gp";

/// Header and rows of a numeric CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    /// Values are written with 17 significant digits, so parsing them back is exact.
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<String> = lines.next().ok_or(Error::EmptyInput)?.split(',').map(|h| h.trim().to_string()).collect();
        let mut rows = Vec::new();
        for (idx, line) in lines.enumerate() {
            let row = line
                .split(',')
                .map(|cell| cell.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::Config(format!("row {}: {e}", idx + 1)))?;
            if row.len() != header.len() {
                return Err(Error::DimensionMismatch(format!("row {} has {} cells, header has {}", idx + 1, row.len(), header.len())));
            }
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }
}

fn names(prefix: &str, dim: usize) -> Vec<String> {
    if dim == 1 {
        vec![prefix.to_string()]
    } else {
        (1..=dim).map(|i| format!("{prefix}_{i}")).collect()
    }
}

/// `t, u, x, lambda, dlambda` over the forward nodes; vector quantities expand
/// into `x_1 .. x_n` and so on.
pub fn solution_table(report: &SolveReport) -> Table {
    let grid = *report.control.grid();
    let (n, m) = (report.state.dim(), report.control.dim());
    let mut header = vec!["t".to_string()];
    header.extend(names("u", m));
    header.extend(names("x", n));
    header.extend(names("lambda", n));
    header.extend(names("dlambda", n));
    let nh = grid.n_hist();
    let rows = (0..=grid.n_fwd())
        .map(|j| {
            let mut row = vec![grid.forward_time(j)];
            row.extend_from_slice(report.control.node(j));
            row.extend_from_slice(report.state.node(nh + j));
            row.extend_from_slice(report.adjoint.lambda.node(j));
            row.extend_from_slice(report.adjoint.dlambda.node(j));
            row
        })
        .collect();
    Table { header, rows }
}

pub fn jumps_table(jumps: &[JumpRecord]) -> Table {
    let header = ["component", "time", "magnitude", "predicted", "relative_gap", "s1", "s2"];
    let rows = jumps
        .iter()
        .map(|j| {
            let (s1, s2) = j.argmax_interval.unwrap_or((f64::NAN, f64::NAN));
            vec![j.component as f64, j.time, j.magnitude, j.predicted, j.relative_gap(), s1, s2]
        })
        .collect();
    Table { header: header.iter().map(|h| h.to_string()).collect(), rows }
}

pub fn summary_text(report: &SolveReport, dt: f64, k: f64, seconds: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "dt            {dt:e}");
    let _ = writeln!(s, "k             {k:e}");
    let _ = writeln!(s, "termination   {:?}", report.termination);
    let _ = writeln!(s, "iterations    {}", report.iterations);
    let _ = writeln!(s, "objective     {:.12e}", report.objective());
    let _ = writeln!(s, "initial       {:.12e}", report.objective_history[0]);
    let _ = writeln!(s, "stationarity  {:.3e}", report.stationarity());
    let _ = writeln!(s, "seconds       {seconds:.2}");
    let _ = writeln!(s, "jumps         {}", report.jumps.len());
    if !report.jumps.is_empty() {
        let _ = writeln!(s, "\n{:>4} {:>10} {:>14} {:>14} {:>8}  argmax interval", "comp", "time", "magnitude", "predicted", "gap");
        for j in &report.jumps {
            let interval = j.argmax_interval.map_or("-".to_string(), |(a, b)| format!("[{a:.4}, {b:.4}]"));
            let _ = writeln!(
                s,
                "{:>4} {:>10.4} {:>14.6e} {:>14.6e} {:>7.2}%  {interval}",
                j.component,
                j.time,
                j.magnitude,
                j.predicted,
                100.0 * j.relative_gap()
            );
        }
    }
    s
}

/// Gnuplot script drawing control, state, adjoint, and its difference quotient
/// from `solution.csv` (scalar problems), with dashed markers at the jump times.
pub fn plot_script(jumps: &[JumpRecord]) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set terminal pngcairo size 1200,900\n");
    s.push_str("set output 'fig1.png'\n");
    s.push_str("set key off\n");
    s.push_str("set xlabel 't'\n");
    for j in jumps {
        let _ = writeln!(s, "set arrow from {:.6}, graph 0 to {:.6}, graph 1 nohead dashtype 2 linecolor rgb 'gray'", j.time, j.time);
    }
    s.push_str("set multiplot layout 2,2\n");
    for (col, title) in [(2, "control u"), (3, "state x"), (4, "adjoint lambda"), (5, "dlambda")] {
        let _ = writeln!(s, "set title '{title}'");
        let _ = writeln!(s, "plot '{SOLUTION_FILE}' using 1:{col} every ::1 with lines linewidth 1.5");
    }
    s.push_str("unset multiplot\n");
    s
}

pub fn emit_plot_script(report: &SolveReport, output_dir: &Path) -> Result<PathBuf> {
    if !output_dir.join(SOLUTION_FILE).is_file() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{} missing in {}", SOLUTION_FILE, output_dir.display()),
        )));
    }
    let path = output_dir.join(PLOT_FILE);
    fs::write(&path, plot_script(&report.jumps))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn jump(time: f64) -> JumpRecord {
        JumpRecord {
            component: 0,
            time,
            magnitude: -0.01,
            predicted: -0.011,
            argmax_interval: Some((time, time + 0.2)),
            cluster: (0, 0),
            core: (0, 0),
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let table = Table {
            header: vec!["t".into(), "x".into()],
            rows: vec![vec![0.1, 1.0 / 3.0], vec![f64::MIN_POSITIVE, -2.0f64.sqrt() * 1e300]],
        };
        assert_eq!(Table::parse(&table.to_csv()).unwrap(), table);
        assert_eq!(table.column("x").unwrap()[0], 1.0 / 3.0);
        assert!(table.column("y").is_none());
    }

    #[test]
    fn ragged_rows_are_rejected() {
        assert!(Table::parse("a,b\n1,2\n3\n").is_err());
        assert!(Table::parse("").is_err());
    }

    #[test]
    fn plot_script_has_four_panels_and_optional_markers() {
        let with = plot_script(&[jump(0.5), jump(1.87)]);
        for col in 2..=5 {
            assert!(with.contains(&format!("using 1:{col} ")));
        }
        assert_eq!(with.matches("set arrow").count(), 2);
        let without = plot_script(&[]);
        assert!(!without.contains("set arrow"));
        assert_eq!(without, plot_script(&[]));
    }

    #[test]
    fn jumps_table_has_one_row_per_record() {
        let t = jumps_table(&[jump(0.5)]);
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.column("time").unwrap(), vec![0.5]);
        assert!(jumps_table(&[]).rows.is_empty());
    }
}
