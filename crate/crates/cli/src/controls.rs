//! Open-loop controls for `simulate`: inline constants or a sampled CSV.

use std::path::Path;

use faccs::dynamics::{ControlLaw, ControlSignal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ControlsError {
    #[error("controls: expected {expected} channels, got {found}")]
    Channels { expected: usize, found: usize },
    #[error("controls: `{0}` is not a number")]
    Number(String),
    #[error("{file}:{line}: {message}")]
    Table { file: String, line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Piecewise-linear interpolation of samples `(t_i, u_i)`, held constant
/// outside the sampled range.
#[derive(Debug, Clone)]
pub struct Sampled {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl Sampled {
    pub fn is_zero(&self) -> bool {
        self.values.iter().flatten().all(|&x| x == 0.0)
    }
}

impl ControlLaw for Sampled {
    fn channels(&self) -> usize {
        self.values[0].len()
    }

    fn eval_into(&self, t: f64, out: &mut [f64]) {
        let i = self.times.partition_point(|&s| s <= t);
        if i == 0 {
            out.copy_from_slice(&self.values[0]);
        } else if i == self.times.len() {
            out.copy_from_slice(&self.values[i - 1]);
        } else {
            let (t0, t1) = (self.times[i - 1], self.times[i]);
            let w = (t - t0) / (t1 - t0);
            for (o, (a, b)) in out.iter_mut().zip(self.values[i - 1].iter().zip(&self.values[i])) {
                *o = a + w * (b - a);
            }
        }
    }
}

pub enum Controls {
    Constant(ControlSignal, bool),
    Sampled(Sampled),
}

impl Controls {
    pub fn law(&self) -> &dyn ControlLaw {
        match self {
            Controls::Constant(s, _) => s,
            Controls::Sampled(s) => s,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Controls::Constant(_, zero) => *zero,
            Controls::Sampled(s) => s.is_zero(),
        }
    }
}

pub fn parse_list(s: &str) -> Result<Vec<f64>, ControlsError> {
    s.split(',')
        .map(str::trim)
        .map(|x| x.parse().map_err(|_| ControlsError::Number(x.to_string())))
        .collect()
}

/// `arg` is a CSV file when one exists at that path, else a comma list.
pub fn parse(arg: Option<&str>, channels: usize) -> Result<Controls, ControlsError> {
    let Some(arg) = arg else {
        return Ok(Controls::Constant(ControlSignal::zero(channels), true));
    };
    if Path::new(arg).is_file() {
        return read_csv(arg, channels).map(Controls::Sampled);
    }
    let u = parse_list(arg)?;
    if u.len() != channels {
        return Err(ControlsError::Channels {
            expected: channels,
            found: u.len(),
        });
    }
    let zero = u.iter().all(|&x| x == 0.0);
    Ok(Controls::Constant(ControlSignal::constant(&u), zero))
}

fn read_csv(path: &str, channels: usize) -> Result<Sampled, ControlsError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let table = |line: u64, message: String| ControlsError::Table {
        file: path.to_string(),
        line,
        message,
    };
    let width = r.headers()?.len();
    if width != channels + 1 {
        return Err(table(1, format!("expected columns t,u1..u{channels}, found {width} columns")));
    }
    let (mut times, mut values) = (Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let row: Vec<f64> = rec
            .iter()
            .map(|x| x.parse().map_err(|_| table(line, format!("`{x}` is not a number"))))
            .collect::<Result<_, _>>()?;
        if let Some(&last) = times.last() {
            if row[0] <= last {
                return Err(table(line, "times must increase".into()));
            }
        }
        times.push(row[0]);
        values.push(row[1..].to_vec());
    }
    if times.is_empty() {
        return Err(table(1, "no samples".into()));
    }
    Ok(Sampled { times, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_and_holds() {
        let s = Sampled {
            times: vec![0.0, 1.0, 3.0],
            values: vec![vec![0.0], vec![2.0], vec![0.0]],
        };
        assert_eq!(s.eval(-1.0), vec![0.0]);
        assert_eq!(s.eval(0.5), vec![1.0]);
        assert_eq!(s.eval(2.0), vec![1.0]);
        assert_eq!(s.eval(5.0), vec![0.0]);
    }

    #[test]
    fn inline_lists() {
        assert!(parse(Some("0, 0, 0"), 3).unwrap().is_zero());
        assert!(!parse(Some("0.1,0,0"), 3).unwrap().is_zero());
        assert!(matches!(parse(Some("1,2"), 3), Err(ControlsError::Channels { .. })));
        assert!(matches!(parse(Some("1,x,2"), 3), Err(ControlsError::Number(_))));
        assert!(parse(None, 2).unwrap().is_zero());
    }

    #[test]
    fn csv_file() {
        let dir = std::env::temp_dir().join(format!("faccs-controls-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("u.csv");
        std::fs::write(&p, "t,u1,u2\n0,0,1\n1,2,1\n").unwrap();
        let c = parse(Some(p.to_str().unwrap()), 2).unwrap();
        assert_eq!(c.law().eval(0.5), vec![1.0, 1.0]);
        std::fs::write(&p, "t,u1,u2\n0,0,1\n0,2,1\n").unwrap();
        match parse(Some(p.to_str().unwrap()), 2) {
            Err(ControlsError::Table { line, .. }) => assert_eq!(line, 3),
            _ => panic!("non-increasing times accepted"),
        }
        std::fs::remove_dir_all(dir).ok();
    }
}
