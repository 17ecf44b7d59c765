use std::fmt::Write as _;
use std::io::{self, Write};

/// One recorded sample. Vector quantities are stored flat: `x` by player
/// then coordinate, `lambda` and `eta` by agent then component.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub t: f64,
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
    pub eta: Vec<f64>,
    pub lambda_bar: Vec<f64>,
    pub kkt_residual: f64,
    /// `max_i ‖η_i − σ(x)‖`.
    pub eta_disagreement: f64,
    /// `max_i ‖λ_i − λ̄‖`.
    pub lambda_disagreement: f64,
    pub constraint_norm: f64,
    pub lyapunov: Option<f64>,
}

impl Record {
    pub fn consensus_disagreement(&self) -> f64 {
        self.eta_disagreement.max(self.lambda_disagreement)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    /// `n_i` for each player.
    pub dims: Vec<usize>,
    pub agg_dim: usize,
    pub constraint_rows: usize,
    pub records: Vec<Record>,
}

impl TrajectoryLog {
    pub fn new(dims: Vec<usize>, agg_dim: usize, constraint_rows: usize) -> Self {
        Self { dims, agg_dim, constraint_rows, records: Vec::new() }
    }

    pub fn last(&self) -> Option<&Record> {
        self.records.last()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.t)
    }

    pub fn header(&self) -> String {
        let mut cols = vec!["t".to_string()];
        for (i, &d) in self.dims.iter().enumerate() {
            cols.extend((0..d).map(|k| format!("x[{i}][{k}]")));
        }
        for i in 0..self.dims.len() {
            cols.extend((0..self.constraint_rows).map(|k| format!("lambda[{i}][{k}]")));
        }
        for i in 0..self.dims.len() {
            cols.extend((0..self.agg_dim).map(|k| format!("eta[{i}][{k}]")));
        }
        cols.extend((0..self.constraint_rows).map(|k| format!("lambdabar[{k}]")));
        cols.extend(
            ["kkt_residual", "consensus_disagreement", "constraint_norm", "lyapunov"]
                .iter()
                .map(|s| s.to_string()),
        );
        cols.join(",")
    }

    /// CSV with one row per record. Numbers use Rust's shortest round-trip
    /// formatting; `lyapunov` is empty when no reference point was given.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", self.header())?;
        let mut line = String::new();
        for r in &self.records {
            line.clear();
            let _ = write!(line, "{}", r.t);
            for v in r.x.iter().chain(&r.lambda).chain(&r.eta).chain(&r.lambda_bar) {
                let _ = write!(line, ",{v}");
            }
            let _ = write!(
                line,
                ",{},{},{},",
                r.kkt_residual,
                r.consensus_disagreement(),
                r.constraint_norm
            );
            if let Some(v) = r.lyapunov {
                let _ = write!(line, "{v}");
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut log = TrajectoryLog::new(vec![1, 2], 1, 1);
        log.records.push(Record {
            t: 0.5,
            x: vec![1.0, 2.0, 3.0],
            lambda: vec![0.1, 0.2],
            eta: vec![4.0, 5.0],
            lambda_bar: vec![0.15],
            kkt_residual: 1e-3,
            eta_disagreement: 0.5,
            lambda_disagreement: 0.05,
            constraint_norm: 2.0,
            lyapunov: None,
        });
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,x[0][0],x[1][0],x[1][1],lambda[0][0],lambda[1][0],eta[0][0],eta[1][0],lambdabar[0],\
             kkt_residual,consensus_disagreement,constraint_norm,lyapunov"
        );
        assert_eq!(lines.next().unwrap(), "0.5,1,2,3,0.1,0.2,4,5,0.15,0.001,0.5,2,");
    }
}
