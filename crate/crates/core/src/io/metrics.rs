use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::agent::PerType;
use crate::error::{Error, Result};

/// Column contract of `metrics.csv`, one row per update.
pub const METRICS_COLUMNS: &[&str] = &[
    "update",
    "theta",
    "train_consumer",
    "train_firm",
    "train_government",
    "entropy_coeff_consumer",
    "entropy_coeff_firm",
    "entropy_coeff_government",
    "reward_consumer",
    "reward_firm",
    "reward_government",
    "mean_price",
    "mean_wage",
    "tax_income",
    "tax_corporate",
    "mean_consumption",
    "mean_hours",
    "mean_export",
    "no_ponzi_rate",
    "entropy_consumer",
    "entropy_firm",
    "entropy_government",
    "policy_loss_consumer",
    "policy_loss_firm",
    "policy_loss_government",
    "value_loss_consumer",
    "value_loss_firm",
    "value_loss_government",
    "grad_norm_consumer",
    "grad_norm_firm",
    "grad_norm_government",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsRow {
    pub update: usize,
    pub theta: f64,
    pub trained: PerType<bool>,
    pub entropy_coeff: PerType<f64>,
    /// Mean undiscounted episode return per agent, raw units.
    pub reward: PerType<f64>,
    pub mean_price: f64,
    pub mean_wage: f64,
    pub tax_income: f64,
    pub tax_corporate: f64,
    pub mean_consumption: f64,
    pub mean_hours: f64,
    pub mean_export: f64,
    pub no_ponzi_rate: f64,
    pub entropy: PerType<f64>,
    pub policy_loss: PerType<f64>,
    pub value_loss: PerType<f64>,
    pub grad_norm: PerType<f64>,
}

impl MetricsRow {
    pub fn to_csv(&self) -> String {
        let mut v: Vec<String> = vec![self.update.to_string(), self.theta.to_string()];
        let flag = |b: bool| u8::from(b).to_string();
        v.extend([flag(self.trained.consumer), flag(self.trained.firm), flag(self.trained.government)]);
        let per = |p: &PerType<f64>| [p.consumer.to_string(), p.firm.to_string(), p.government.to_string()];
        v.extend(per(&self.entropy_coeff));
        v.extend(per(&self.reward));
        for x in [
            self.mean_price,
            self.mean_wage,
            self.tax_income,
            self.tax_corporate,
            self.mean_consumption,
            self.mean_hours,
            self.mean_export,
            self.no_ponzi_rate,
        ] {
            v.push(x.to_string());
        }
        v.extend(per(&self.entropy));
        v.extend(per(&self.policy_loss));
        v.extend(per(&self.value_loss));
        v.extend(per(&self.grad_norm));
        debug_assert_eq!(v.len(), METRICS_COLUMNS.len());
        v.join(",")
    }
}

/// Appends rows to `metrics.csv`, flushing after each one.
pub struct MetricsWriter {
    path: PathBuf,
    file: File,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
        writeln!(file, "{}", METRICS_COLUMNS.join(",")).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            file,
        })
    }

    /// Reopens an existing file for a resumed run, dropping any rows at or
    /// after `from_update` (written after the checkpoint being resumed).
    pub fn resume(path: &Path, from_update: usize) -> Result<Self> {
        if !path.exists() {
            return Self::create(path);
        }
        let reader = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
        let mut kept = Vec::new();
        for (k, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if k == 0 {
                if line != METRICS_COLUMNS.join(",") {
                    return Err(Error::Checkpoint(format!(
                        "{} has an unexpected header",
                        path.display()
                    )));
                }
                kept.push(line);
                continue;
            }
            let update: usize = line
                .split(',')
                .next()
                .and_then(|u| u.parse().ok())
                .ok_or_else(|| Error::Checkpoint(format!("malformed row in {}", path.display())))?;
            if update < from_update {
                kept.push(line);
            }
        }
        let mut text = kept.join("\n");
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))?;
        let file = OpenOptions::new()
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            file,
        })
    }

    pub fn append(&mut self, row: &MetricsRow) -> Result<()> {
        writeln!(self.file, "{}", row.to_csv()).map_err(|e| Error::io(&self.path, e))?;
        self.file.flush().map_err(|e| Error::io(&self.path, e))
    }
}
