//! Fidelity datasets and their CSV form.
//!
//! CSV layout: header `x1,...,xd,f[,cost]`, one row per simulation, `.` as
//! the decimal separator.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Simulator outputs observed at distinct positive fidelity vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub costs: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(points: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        let ds = Dataset {
            points,
            values,
            costs: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn with_costs(points: Vec<Vec<f64>>, values: Vec<f64>, costs: Vec<f64>) -> Result<Self> {
        let ds = Dataset {
            points,
            values,
            costs: Some(costs),
        };
        ds.validate()?;
        Ok(ds)
    }

    /// One-dimensional convenience constructor.
    pub fn univariate(xs: &[f64], values: &[f64]) -> Result<Self> {
        Self::new(xs.iter().map(|&x| vec![x]).collect(), values.to_vec())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::InvalidData("at least one point is required".into()));
        }
        if self.points.len() != self.values.len() {
            return Err(Error::InvalidData(format!(
                "{} points but {} values",
                self.points.len(),
                self.values.len()
            )));
        }
        let d = self.dim();
        if d == 0 {
            return Err(Error::InvalidData(
                "points must have at least one coordinate".into(),
            ));
        }
        for (i, p) in self.points.iter().enumerate() {
            if p.len() != d {
                return Err(Error::InvalidData(format!(
                    "point {i} has {} coordinates, expected {d}",
                    p.len()
                )));
            }
            for (k, &c) in p.iter().enumerate() {
                if !(c > 0.0) || !c.is_finite() {
                    return Err(Error::InvalidData(format!(
                        "point {i} coordinate {k} must be positive and finite, got {c}"
                    )));
                }
            }
        }
        for (i, &v) in self.values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidData(format!("value {i} is not finite: {v}")));
            }
        }
        for i in 0..self.points.len() {
            for j in (i + 1)..self.points.len() {
                if self.points[i] == self.points[j] {
                    return Err(Error::InvalidData(format!(
                        "points {i} and {j} coincide; fidelities must be distinct"
                    )));
                }
            }
        }
        if let Some(costs) = &self.costs {
            if costs.len() != self.points.len() {
                return Err(Error::InvalidData(format!(
                    "{} costs for {} points",
                    costs.len(),
                    self.points.len()
                )));
            }
            if costs.iter().any(|c| !(*c > 0.0)) {
                return Err(Error::InvalidData("costs must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let cols: Vec<&str> = headers.iter().collect();
        let d = cols.iter().take_while(|c| c.starts_with('x')).count();
        if d == 0 || cols.len() < d + 1 || cols[d] != "f" {
            return Err(Error::InvalidData(format!(
                "expected header x1,...,xd,f[,cost], got {}",
                cols.join(",")
            )));
        }
        let has_cost = cols.len() > d + 1 && cols[d + 1] == "cost";
        let mut points = Vec::new();
        let mut values = Vec::new();
        let mut costs = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            let parse = |i: usize| -> Result<f64> {
                record
                    .get(i)
                    .ok_or_else(|| Error::InvalidData(format!("row {row}: missing column {i}")))?
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidData(format!("row {row}, column {i}: {e}")))
            };
            let mut p = Vec::with_capacity(d);
            for i in 0..d {
                p.push(parse(i)?);
            }
            points.push(p);
            values.push(parse(d)?);
            if has_cost {
                costs.push(parse(d + 1)?);
            }
        }
        let ds = Dataset {
            points,
            values,
            costs: if has_cost { Some(costs) } else { None },
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::InvalidData(format!("cannot open {}: {e}", path.display())))?;
        Self::from_csv_reader(file)
    }

    pub fn to_csv_writer<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let d = self.dim();
        let mut header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
        header.push("f".into());
        if self.costs.is_some() {
            header.push("cost".into());
        }
        wtr.write_record(&header)?;
        for i in 0..self.len() {
            let mut row: Vec<String> = self.points[i].iter().map(|v| fmt_float(*v)).collect();
            row.push(fmt_float(self.values[i]));
            if let Some(costs) = &self.costs {
                row.push(fmt_float(costs[i]));
            }
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// 17 significant digits: enough to reproduce any double exactly on parse.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let ds = Dataset::with_costs(
            vec![vec![0.5, 1.0], vec![0.25, 0.125]],
            vec![1.5, -2.0e-7],
            vec![1.0, 8.0],
        )
        .unwrap();
        let mut buf = Vec::new();
        ds.to_csv_writer(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x1,x2,f,cost\n"), "{text}");
        let back = Dataset::from_csv_reader(buf.as_slice()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn csv_without_cost() {
        let text = "x1,f\n0.5,1.5\n1.0,2.0\n";
        let ds = Dataset::from_csv_reader(text.as_bytes()).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.dim(), 1);
        assert_eq!(ds.costs, None);
        assert_eq!(ds.values, vec![1.5, 2.0]);
    }

    #[test]
    fn rejects_invalid() {
        // zero component
        assert!(Dataset::new(vec![vec![0.0]], vec![1.0]).is_err());
        // duplicate points
        assert!(Dataset::new(vec![vec![0.5], vec![0.5]], vec![1.0, 2.0]).is_err());
        // empty
        assert!(Dataset::new(vec![], vec![]).is_err());
        // ragged
        assert!(Dataset::new(vec![vec![0.5], vec![0.5, 1.0]], vec![1.0, 2.0]).is_err());
        // bad header
        assert!(Dataset::from_csv_reader("a,b\n1,2\n".as_bytes()).is_err());
    }
}
