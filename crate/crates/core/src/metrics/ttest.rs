use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: usize,
    /// Differences had zero variance; `p` is 1 when all were zero, else 0.
    pub degenerate: bool,
}

/// Two-sided paired t-test on `a - b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::Validation("t-test: samples differ in length".into()));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Validation("t-test: need at least two pairs".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let df = n - 1;
    if d.iter().all(|&x| x == d[0]) {
        let (t, p) = if d[0] == 0.0 {
            (0.0, 1.0)
        } else {
            (f64::INFINITY.copysign(d[0]), 0.0)
        };
        return Ok(TTest {
            t,
            p,
            df,
            degenerate: true,
        });
    }
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / df as f64;
    let t = mean / (var / n as f64).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df as f64)
        .map_err(|e| Error::Validation(format!("t-test: {e}")))?;
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(TTest {
        t,
        p,
        df,
        degenerate: false,
    })
}
