//! CSV readers and writers with fixed headers.
//!
//! | content                  | columns                   |
//! |--------------------------|---------------------------|
//! | explicit sequence        | `value`                   |
//! | observation              | `j,eps,y`                 |
//! | posterior summary        | `j,sigma,post_mean`       |
//! | dimension distribution   | `m,log_weight,prob`       |
//! | adaptive estimate        | `j,omega,theta_hat`       |
//!
//! Indices are 1-based. `omega` is empty beyond `M_ε`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchical::{AdaptiveEstimate, DimensionDistribution};
use crate::model::Observation;
use crate::posterior::PosteriorSummary;

#[derive(Serialize, Deserialize)]
struct ValueRow {
    value: f64,
}

#[derive(Serialize, Deserialize)]
struct ObservationRow {
    j: usize,
    eps: f64,
    y: f64,
}

#[derive(Serialize, Deserialize)]
struct SummaryRow {
    j: usize,
    sigma: f64,
    post_mean: f64,
}

#[derive(Serialize)]
struct DistributionRow {
    m: usize,
    log_weight: f64,
    prob: f64,
}

#[derive(Serialize)]
struct EstimateRow {
    j: usize,
    omega: Option<f64>,
    theta_hat: f64,
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(true).from_writer(w)
}

fn check_index(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "row index {found} where {expected} was expected"
        )))
    }
}

/// Reads a single-column `value` file.
pub fn read_values<R: Read>(r: R) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_reader(r);
    if rdr.headers()?.iter().collect::<Vec<_>>() != ["value"] {
        return Err(Error::InvalidArgument(
            "expected a single column with header \"value\"".into(),
        ));
    }
    let out: Vec<f64> = rdr
        .deserialize::<ValueRow>()
        .map(|row| row.map(|r| r.value))
        .collect::<std::result::Result<_, _>>()?;
    if out.is_empty() {
        return Err(Error::InvalidArgument("value file has no rows".into()));
    }
    Ok(out)
}

pub fn write_values<W: Write>(w: W, values: &[f64]) -> Result<()> {
    let mut wtr = writer(w);
    for &value in values {
        wtr.serialize(ValueRow { value })?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_observation<W: Write>(w: W, obs: &Observation) -> Result<()> {
    let mut wtr = writer(w);
    for (i, &y) in obs.y.iter().enumerate() {
        wtr.serialize(ObservationRow {
            j: i + 1,
            eps: obs.eps,
            y,
        })?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads an observation; the seed is not stored in the file and is set to 0.
pub fn read_observation<R: Read>(r: R) -> Result<Observation> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut y = Vec::new();
    let mut eps = None;
    for (i, row) in rdr.deserialize::<ObservationRow>().enumerate() {
        let row = row?;
        check_index(i + 1, row.j)?;
        match eps {
            None => eps = Some(row.eps),
            Some(e) if e != row.eps => {
                return Err(Error::InvalidArgument("inconsistent eps column".into()))
            }
            _ => {}
        }
        y.push(row.y);
    }
    let eps = eps.ok_or_else(|| Error::InvalidArgument("observation file has no rows".into()))?;
    Observation::new(y, eps, 0)
}

pub fn write_summary<W: Write>(w: W, summary: &PosteriorSummary) -> Result<()> {
    let mut wtr = writer(w);
    for (i, (&sigma, &post_mean)) in summary
        .post_var()
        .iter()
        .zip(summary.post_mean())
        .enumerate()
    {
        wtr.serialize(SummaryRow {
            j: i + 1,
            sigma,
            post_mean,
        })?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_summary<R: Read>(r: R) -> Result<PosteriorSummary> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut var = Vec::new();
    let mut mean = Vec::new();
    for (i, row) in rdr.deserialize::<SummaryRow>().enumerate() {
        let row = row?;
        check_index(i + 1, row.j)?;
        var.push(row.sigma);
        mean.push(row.post_mean);
    }
    PosteriorSummary::new(var, mean)
}

pub fn write_distribution<W: Write>(w: W, dist: &DimensionDistribution) -> Result<()> {
    let mut wtr = writer(w);
    for (i, (&log_weight, &prob)) in dist.log_weights().iter().zip(dist.probs()).enumerate() {
        wtr.serialize(DistributionRow {
            m: i + 1,
            log_weight,
            prob,
        })?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_estimate<W: Write>(w: W, est: &AdaptiveEstimate) -> Result<()> {
    let mut wtr = writer(w);
    for (i, &theta_hat) in est.values().iter().enumerate() {
        wtr.serialize(EstimateRow {
            j: i + 1,
            omega: est.omega().get(i).copied(),
            theta_hat,
        })?;
    }
    wtr.flush()?;
    Ok(())
}
