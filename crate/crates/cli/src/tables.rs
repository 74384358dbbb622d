//! Tabular artifacts: writers for every stage output and readers for the
//! artifacts that downstream stages consume. Floats are written with the
//! shortest round-trip representation so re-reading is lossless.

use std::path::Path;

use anyhow::{bail, Context, Result};
use bvarkit_core::bvar::{GridPoint, MinnesotaHyper};
use bvarkit_core::{MonthDate, SeasonalFit, SeasonalMethod};
use nalgebra::DMatrix;

pub fn write_seasonal_fit(
    path: &Path,
    fit: &SeasonalFit,
    variables: &[String],
) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["variable", "month", "level", "method"])?;
    for (j, name) in variables.iter().enumerate() {
        for month in 1..=12u32 {
            writer.write_record(&[
                name.clone(),
                month.to_string(),
                fit.monthly_means[(month as usize - 1, j)].to_string(),
                fit.method.as_str().to_string(),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}

pub fn read_seasonal_fit(path: &Path, variables: &[String]) -> Result<SeasonalFit> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut means = DMatrix::zeros(12, variables.len());
    let mut method = SeasonalMethod::Dummy;
    for record in reader.records() {
        let record = record?;
        let name = record.get(0).unwrap_or_default();
        let j = variables
            .iter()
            .position(|v| v == name)
            .with_context(|| format!("seasonal fit mentions unknown variable `{name}`"))?;
        let month: usize = record.get(1).unwrap_or_default().parse()?;
        let level: f64 = record.get(2).unwrap_or_default().parse()?;
        means[(month - 1, j)] = level;
        method = SeasonalMethod::parse(record.get(3).unwrap_or_default())
            .map_err(|e| anyhow::anyhow!("{e}"))?;
    }
    Ok(SeasonalFit { monthly_means: means, method })
}

pub fn write_hyper(path: &Path, hyper: &MinnesotaHyper, trend: bool, log_marginal: f64) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "b_ar",
        "lambda1",
        "lambda2",
        "lambda3",
        "lambda4",
        "lags",
        "trend",
        "log_marginal",
    ])?;
    writer.write_record(&[
        hyper.b_ar.to_string(),
        hyper.lambda1.to_string(),
        hyper.lambda2.to_string(),
        hyper.lambda3.to_string(),
        hyper.lambda4.to_string(),
        hyper.lags.to_string(),
        trend.to_string(),
        log_marginal.to_string(),
    ])?;
    writer.flush()?;
    Ok(())
}

pub fn read_hyper(path: &Path) -> Result<(MinnesotaHyper, bool)> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let record = reader
        .records()
        .next()
        .context("hyperparameter table is empty")??;
    let field = |i: usize| -> Result<f64> {
        record
            .get(i)
            .context("missing field")?
            .parse()
            .context("bad number in hyperparameter table")
    };
    let hyper = MinnesotaHyper::new(
        field(0)?,
        field(1)?,
        field(2)?,
        field(3)?,
        field(4)?,
        record.get(5).context("missing lags")?.parse()?,
    )
    .map_err(|e| anyhow::anyhow!("{e}"))?;
    let trend: bool = record.get(6).context("missing trend")?.parse()?;
    Ok((hyper, trend))
}

pub fn write_grid(path: &Path, table: &[GridPoint], best: &MinnesotaHyper) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "b_ar",
        "lambda1",
        "lambda2",
        "lambda3",
        "lambda4",
        "log_marginal",
        "selected",
    ])?;
    for point in table {
        writer.write_record(&[
            point.hyper.b_ar.to_string(),
            point.hyper.lambda1.to_string(),
            point.hyper.lambda2.to_string(),
            point.hyper.lambda3.to_string(),
            point.hyper.lambda4.to_string(),
            point
                .log_marginal
                .map(|v| v.to_string())
                .unwrap_or_else(|| "failed".into()),
            (point.hyper == *best).to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_matrix(path: &Path, matrix: &DMatrix<f64>, labels: &[String]) -> Result<()> {
    if matrix.nrows() != labels.len() || matrix.ncols() != labels.len() {
        bail!("matrix/label size mismatch");
    }
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec!["variable".to_string()];
    header.extend_from_slice(labels);
    writer.write_record(&header)?;
    for (i, label) in labels.iter().enumerate() {
        let mut record = vec![label.clone()];
        for j in 0..matrix.ncols() {
            record.push(matrix[(i, j)].to_string());
        }
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_matrix(path: &Path, labels: &[String]) -> Result<DMatrix<f64>> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let m = labels.len();
    let mut matrix = DMatrix::zeros(m, m);
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if i >= m {
            bail!("matrix file has too many rows");
        }
        if record.get(0) != Some(labels[i].as_str()) {
            bail!("matrix rows out of order at line {}", i + 2);
        }
        for j in 0..m {
            matrix[(i, j)] = record
                .get(j + 1)
                .with_context(|| format!("missing cell ({i}, {j})"))?
                .parse()?;
        }
    }
    Ok(matrix)
}

/// Long-format coefficient table: equation, regressor, value.
pub fn write_coefficients(
    path: &Path,
    coeffs: &bvarkit_core::VarCoefficients,
    variables: &[String],
) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["equation", "regressor", "value"])?;
    for (i, equation) in variables.iter().enumerate() {
        for (p, phi) in coeffs.lag_matrices.iter().enumerate() {
            for (j, regressor) in variables.iter().enumerate() {
                writer.write_record(&[
                    equation.clone(),
                    format!("{regressor}.L{}", p + 1),
                    phi[(i, j)].to_string(),
                ])?;
            }
        }
        writer.write_record(&[equation.clone(), "const".into(), coeffs.intercept[i].to_string()])?;
        if let Some(trend) = &coeffs.trend {
            writer.write_record(&[equation.clone(), "trend".into(), trend[i].to_string()])?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Band table rows: one per (first_key, second_key, step).
pub struct BandTable<'a> {
    pub key_names: [&'a str; 2],
    pub step_name: &'a str,
}

pub fn write_band_rows<W: std::io::Write>(
    writer: &mut csv::Writer<W>,
    keys: [&str; 2],
    band: &bvarkit_core::Band,
    column: usize,
    steps: impl Iterator<Item = String>,
) -> Result<()> {
    for (row, step) in steps.enumerate() {
        writer.write_record(&[
            keys[0].to_string(),
            keys[1].to_string(),
            step,
            band.lower[(row, column)].to_string(),
            band.median[(row, column)].to_string(),
            band.upper[(row, column)].to_string(),
            band.mean[(row, column)].to_string(),
        ])?;
    }
    Ok(())
}

pub fn write_dic(path: &Path, rows: &[(usize, bool, f64)]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["lags", "trend", "dic"])?;
    for (lags, trend, dic) in rows {
        writer.write_record(&[lags.to_string(), trend.to_string(), dic.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

/// Threshold-crossing table; `never` columns stay empty when the quantile
/// lands in the never-crossing mass.
pub struct CrossingRow {
    pub variable: String,
    pub threshold: f64,
    pub month: Option<u32>,
    pub share_never: f64,
    pub lower: Option<String>,
    pub median: Option<String>,
    pub upper: Option<String>,
}

pub fn write_crossings(path: &Path, rows: &[CrossingRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "variable",
        "threshold",
        "month",
        "share_never",
        "q05",
        "median",
        "q95",
    ])?;
    for row in rows {
        writer.write_record(&[
            row.variable.clone(),
            row.threshold.to_string(),
            row.month.map(|m| m.to_string()).unwrap_or_default(),
            row.share_never.to_string(),
            row.lower.clone().unwrap_or_default(),
            row.median.clone().unwrap_or_default(),
            row.upper.clone().unwrap_or_default(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Fan table: date, variable, q05, q50, q95, mean.
pub fn write_fan(
    path: &Path,
    band: &bvarkit_core::Band,
    variables: &[String],
    start: MonthDate,
) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["date", "variable", "q05", "q50", "q95", "mean"])?;
    for step in 0..band.mean.nrows() {
        let date = start.add_months(step as i64).to_string();
        for (j, name) in variables.iter().enumerate() {
            writer.write_record(&[
                date.clone(),
                name.clone(),
                band.lower[(step, j)].to_string(),
                band.median[(step, j)].to_string(),
                band.upper[(step, j)].to_string(),
                band.mean[(step, j)].to_string(),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Per-variable deterministic path: date, variable, value.
pub fn write_deterministic(
    path: &Path,
    component: &DMatrix<f64>,
    variables: &[String],
    start: MonthDate,
) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["date", "variable", "value"])?;
    for row in 0..component.nrows() {
        let date = start.add_months(row as i64).to_string();
        for (j, name) in variables.iter().enumerate() {
            writer.write_record(&[date.clone(), name.clone(), component[(row, j)].to_string()])?;
        }
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use bvarkit_core::bvar::MinnesotaHyper;

    #[test]
    fn hyper_round_trips() {
        let dir = std::env::temp_dir().join("bvarkit-tables-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("hyper.csv");
        let hyper = MinnesotaHyper::new(0.9, 0.3, 0.5, 1.51, 100.0, 12).unwrap();
        write_hyper(&path, &hyper, true, -12.345678901234).unwrap();
        let (back, trend) = read_hyper(&path).unwrap();
        assert_eq!(back, hyper);
        assert!(trend);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn matrix_round_trips() {
        let dir = std::env::temp_dir().join("bvarkit-matrix-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("sigma.csv");
        let labels: Vec<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        let matrix = DMatrix::from_row_slice(2, 2, &[1.5, -0.25, -0.25, 2.0 / 3.0]);
        write_matrix(&path, &matrix, &labels).unwrap();
        let back = read_matrix(&path, &labels).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(back[(i, j)].to_bits(), matrix[(i, j)].to_bits());
            }
        }
        std::fs::remove_dir_all(&dir).ok();
    }
}
