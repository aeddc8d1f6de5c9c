use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::stats::MarginalRow;
use crate::error::Result;

/// Filter state after one analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRecord {
    pub time: f64,
    pub filter_mean: f64,
    pub optimal_mean: Option<f64>,
    pub ess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalTable {
    pub tag: String,
    pub rows: Vec<MarginalRow>,
}

/// Scalar results. Fields that do not apply to an experiment are `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rmse_to_optimal: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_attempt: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_switched: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub switch_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub posterior_modes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smoothing_window: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observed_x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_mean_at_obs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_std_at_obs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub posterior_mean_at_obs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_band_mass: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub posterior_band_mass: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub indicator_support: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_ess: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub series: Vec<SeriesRecord>,
    #[serde(skip)]
    pub marginals: Vec<MarginalTable>,
    pub summary: Summary,
}

impl RunReport {
    pub fn marginal(&self, tag: &str) -> Option<&MarginalTable> {
        self.marginals.iter().find(|m| m.tag == tag)
    }

    /// Write `series.csv`, one `marginal_<tag>.csv` per table and
    /// `report.json` into `dir`, creating it if needed.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_series_csv(&dir.join("series.csv"), &self.series)?;
        for table in &self.marginals {
            write_marginal_csv(&dir.join(format!("marginal_{}.csv", table.tag)), &table.rows)?;
        }
        let mut json = serde_json::to_value(self)?;
        json["marginal_tags"] = self.marginals.iter().map(|m| m.tag.clone()).collect();
        fs::write(dir.join("report.json"), serde_json::to_string_pretty(&json)? + "\n")?;
        Ok(())
    }
}

pub fn write_series_csv(path: &Path, series: &[SeriesRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(["time", "filter_mean", "optimal_mean", "ess"])?;
    for r in series {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_series_csv(path: &Path) -> Result<Vec<SeriesRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn write_marginal_csv(path: &Path, rows: &[MarginalRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(["x", "bin_lo", "bin_hi", "mass"])?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_marginal_csv(path: &Path) -> Result<Vec<MarginalRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}
