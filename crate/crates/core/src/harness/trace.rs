use std::io::{self, Write};

use crate::error::{Error, Result};

/// One sample of a closed-loop run.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub r: f64,
    /// Noise-free plant output.
    pub y: f64,
    pub x_star1: f64,
    pub e1: f64,
    /// `y - x*_1`.
    pub e1_bar: f64,
    pub u: f64,
    pub selected: usize,
    pub e1_tilde: Vec<f64>,
    pub z: Vec<f64>,
    pub z_acc: Vec<f64>,
    /// Ground-truth total disturbance `f - r^{(n)}`.
    pub disturbance: f64,
}

/// Uniformly sampled record of one run, `duration / dt + 1` rows.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulationTrace {
    pub scenario: String,
    pub config_hash: String,
    pub law: String,
    pub observers: usize,
    pub dt: f64,
    pub rows: Vec<TraceRow>,
}

impl SimulationTrace {
    pub fn columns(observers: usize) -> Vec<String> {
        let mut cols: Vec<String> = ["t", "r", "y", "x_star1", "e1", "e1_bar", "u", "selected"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for prefix in ["e1_tilde", "z", "z_acc"] {
            cols.extend((0..observers).map(|j| format!("{prefix}_{j}")));
        }
        cols.push("disturbance".into());
        cols
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let cols = Self::columns(self.observers);
        writeln!(out, "# paradrc trace")?;
        writeln!(out, "# scenario: {}", self.scenario)?;
        writeln!(out, "# law: {}", self.law)?;
        writeln!(out, "# config_sha256: {}", self.config_hash)?;
        writeln!(out, "# observers: {}", self.observers)?;
        writeln!(out, "# dt: {}", self.dt)?;
        writeln!(out, "# rows: {}", self.rows.len())?;
        writeln!(out, "{}", cols.join(","))?;
        let mut line = String::new();
        for row in &self.rows {
            line.clear();
            for v in [row.t, row.r, row.y, row.x_star1, row.e1, row.e1_bar, row.u] {
                push_num(&mut line, v);
            }
            line.push_str(&row.selected.to_string());
            line.push(',');
            for group in [&row.e1_tilde, &row.z, &row.z_acc] {
                for &v in group.iter() {
                    push_num(&mut line, v);
                }
            }
            line.push_str(&row.disturbance.to_string());
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let file = std::fs::File::create(path)?;
        let mut w = io::BufWriter::new(file);
        self.write_csv(&mut w)?;
        w.flush().map_err(Error::from)
    }
}

fn push_num(line: &mut String, v: f64) {
    line.push_str(&v.to_string());
    line.push(',');
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_layout() {
        assert_eq!(
            SimulationTrace::columns(2).join(","),
            "t,r,y,x_star1,e1,e1_bar,u,selected,e1_tilde_0,e1_tilde_1,z_0,z_1,z_acc_0,z_acc_1,disturbance"
        );
    }

    #[test]
    fn every_row_has_every_column() {
        let row = TraceRow {
            t: 0.0,
            r: 1.0,
            y: 0.5,
            x_star1: 0.5,
            e1: -0.5,
            e1_bar: 0.0,
            u: 2.0,
            selected: 1,
            e1_tilde: vec![0.0, 0.1],
            z: vec![0.0, 0.2],
            z_acc: vec![0.0, 0.2],
            disturbance: -3.0,
        };
        let trace = SimulationTrace {
            scenario: "x".into(),
            config_hash: "h".into(),
            law: "switched".into(),
            observers: 2,
            dt: 0.1,
            rows: vec![row.clone(), row],
        };
        let csv = trace.to_csv_string();
        let data: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data.len(), 3);
        let width = data[0].split(',').count();
        assert!(data.iter().all(|l| l.split(',').count() == width));
    }
}
