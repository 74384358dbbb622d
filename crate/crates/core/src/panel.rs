//! Aligned monthly multivariate panels and deterministic deseasonalization.
//!
//! A [`TimeSeriesPanel`] is a T×M matrix of monthly observations plus
//! variable metadata. Columns are always stored in causal-ordering order
//! (the ordering later consumed by the recursive identification), and the
//! panel is rectangular: no missing values inside the window. Leading and
//! trailing months with missing cells are trimmed on load; interior gaps
//! are an error, never interpolated.
//!
//! Deseasonalization regresses each series on twelve monthly dummies,
//! which is exactly per-calendar-month demeaning. Output stays in levels.

use std::collections::HashSet;
use std::io::{Read, Write};

use nalgebra::DMatrix;

use crate::date::MonthDate;
use crate::error::{Error, Result};

/// Metadata for one series in the panel.
#[derive(Clone, Debug, PartialEq)]
pub struct VariableSpec {
    /// Short identifier, must be unique within a panel.
    pub name: String,
    /// Free-text units, e.g. `10^6 km^2` or `ppm`.
    pub units: String,
    /// Position in the causal ordering, `0..M`.
    pub ordering_index: usize,
}

impl VariableSpec {
    pub fn new(name: impl Into<String>, units: impl Into<String>, ordering_index: usize) -> Self {
        Self {
            name: name.into(),
            units: units.into(),
            ordering_index,
        }
    }
}

/// Aligned monthly panel. Immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeriesPanel {
    start: MonthDate,
    values: DMatrix<f64>,
    variables: Vec<VariableSpec>,
}

impl TimeSeriesPanel {
    /// Builds a panel from already-aligned data. `variables` must be sorted
    /// by `ordering_index` (0..M, matching the column order of `values`),
    /// names must be unique, and every cell must be finite.
    pub fn new(
        start: MonthDate,
        values: DMatrix<f64>,
        variables: Vec<VariableSpec>,
    ) -> Result<Self> {
        if values.ncols() != variables.len() {
            return Err(Error::invalid(format!(
                "{} columns but {} variable specs",
                values.ncols(),
                variables.len()
            )));
        }
        if values.nrows() == 0 {
            return Err(Error::EmptyWindow);
        }
        let mut seen = HashSet::new();
        for (k, v) in variables.iter().enumerate() {
            if !seen.insert(v.name.as_str()) {
                return Err(Error::DuplicateVariable(v.name.clone()));
            }
            if v.ordering_index != k {
                return Err(Error::InvalidOrdering(format!(
                    "variable `{}` has ordering_index {} at column {}",
                    v.name, v.ordering_index, k
                )));
            }
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("panel contains non-finite values"));
        }
        Ok(Self {
            start,
            values,
            variables,
        })
    }

    /// Number of monthly observations T.
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    /// Number of variables M.
    pub fn width(&self) -> usize {
        self.values.ncols()
    }

    pub fn start(&self) -> MonthDate {
        self.start
    }

    /// Date of the last observation.
    pub fn end(&self) -> MonthDate {
        self.start.add_months(self.len() as i64 - 1)
    }

    pub fn date_at(&self, row: usize) -> MonthDate {
        self.start.add_months(row as i64)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    pub fn names(&self) -> Vec<&str> {
        self.variables.iter().map(|v| v.name.as_str()).collect()
    }

    /// Column index of a variable.
    pub fn var_index(&self, name: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.var_index(name)?;
        Ok(self.values.column(j).iter().copied().collect())
    }

    /// Last `p` rows, used as initial conditions for forecasting.
    pub fn tail(&self, p: usize) -> Result<DMatrix<f64>> {
        if p > self.len() {
            return Err(Error::invalid(format!(
                "requested {} lagged rows from a panel of length {}",
                p,
                self.len()
            )));
        }
        Ok(self.values.rows(self.len() - p, p).into_owned())
    }

    /// Replaces the data matrix, keeping dates and metadata. Used by the
    /// deseasonalization routines.
    fn with_values(&self, values: DMatrix<f64>) -> Self {
        Self {
            start: self.start,
            values,
            variables: self.variables.clone(),
        }
    }
}

/// How a panel was deseasonalized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeasonalMethod {
    /// Monthly-dummy OLS, i.e. per-calendar-month demeaning.
    Dummy,
    /// Structural time-series trend extraction, constant seasonal pattern.
    BsmStatic,
    /// Structural time-series trend extraction, year-specific seasonal.
    BsmEvolving,
}

impl SeasonalMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            SeasonalMethod::Dummy => "dummy",
            SeasonalMethod::BsmStatic => "bsm-static",
            SeasonalMethod::BsmEvolving => "bsm-evolving",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "dummy" => Ok(SeasonalMethod::Dummy),
            "bsm-static" => Ok(SeasonalMethod::BsmStatic),
            "bsm-evolving" => Ok(SeasonalMethod::BsmEvolving),
            other => Err(Error::invalid(format!(
                "unknown deseasonalization method `{other}`"
            ))),
        }
    }
}

/// Estimated seasonal pattern, one row per calendar month (January first).
/// Skipped variables carry zeros, so adding the fitted pattern back always
/// reconstructs the raw series.
#[derive(Clone, Debug)]
pub struct SeasonalFit {
    /// 12×M matrix of per-month level estimates.
    pub monthly_means: DMatrix<f64>,
    pub method: SeasonalMethod,
}

impl SeasonalFit {
    /// Seasonal level for `variable` in calendar month `month` (1..=12).
    pub fn mean_for(&self, month: u32, variable: usize) -> f64 {
        self.monthly_means[(month as usize - 1, variable)]
    }
}

/// Reads a panel from delimiter-separated text with a header row whose
/// first column is `date` in `YYYY-MM` form. Columns are matched to `spec`
/// by name and reordered by `ordering_index`. Leading/trailing rows with
/// missing cells are trimmed to the maximal common window; interior gaps
/// and gap months are errors.
pub fn load_panel<R: Read>(source: R, spec: &[VariableSpec]) -> Result<TimeSeriesPanel> {
    if spec.is_empty() {
        return Err(Error::invalid("no variables requested"));
    }
    let mut order: Vec<usize> = (0..spec.len()).collect();
    order.sort_by_key(|&k| spec[k].ordering_index);
    {
        let indices: Vec<usize> = order.iter().map(|&k| spec[k].ordering_index).collect();
        if indices != (0..spec.len()).collect::<Vec<_>>() {
            return Err(Error::InvalidOrdering(format!(
                "ordering_index values {indices:?} are not a permutation of 0..{}",
                spec.len()
            )));
        }
    }

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    if headers.is_empty() || !headers[0].eq_ignore_ascii_case("date") {
        return Err(Error::invalid("first column must be `date`"));
    }
    // Column position of each requested variable, in ordering order.
    let mut positions = Vec::with_capacity(spec.len());
    for &k in &order {
        let name = &spec[k].name;
        let pos = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::UnknownVariable(name.clone()))?;
        positions.push(pos);
    }

    let mut dates: Vec<MonthDate> = Vec::new();
    let mut rows: Vec<Vec<Option<f64>>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let date: MonthDate = record
            .get(0)
            .ok_or_else(|| Error::ParseDate(String::new()))?
            .trim()
            .parse()?;
        if let Some(&prev) = dates.last() {
            let expected = prev.add_months(1);
            if date != expected {
                return Err(Error::NonContiguousDates {
                    expected,
                    found: date,
                });
            }
        }
        let mut row = Vec::with_capacity(positions.len());
        for (j, &pos) in positions.iter().enumerate() {
            let raw = record.get(pos).unwrap_or("").trim();
            if raw.is_empty() || raw.eq_ignore_ascii_case("na") || raw.eq_ignore_ascii_case("nan")
            {
                row.push(None);
            } else {
                let value: f64 = raw.parse().map_err(|_| Error::ParseCell {
                    row: i + 2, // 1-based, counting the header line
                    column: spec[order[j]].name.clone(),
                    value: raw.to_string(),
                })?;
                if value.is_finite() {
                    row.push(Some(value));
                } else {
                    row.push(None);
                }
            }
        }
        dates.push(date);
        rows.push(row);
    }

    // Trim ragged edges to the maximal window where every column is present.
    let complete = |row: &Vec<Option<f64>>| row.iter().all(|c| c.is_some());
    let first = rows.iter().position(complete).ok_or(Error::EmptyWindow)?;
    let last = rows.iter().rposition(complete).unwrap();
    for (offset, row) in rows[first..=last].iter().enumerate() {
        if let Some(j) = row.iter().position(|c| c.is_none()) {
            return Err(Error::InteriorGap {
                column: spec[order[j]].name.clone(),
                date: dates[first + offset],
            });
        }
    }

    let t = last - first + 1;
    let m = spec.len();
    let values = DMatrix::from_fn(t, m, |i, j| rows[first + i][j].unwrap());
    let variables = order
        .iter()
        .enumerate()
        .map(|(k, &src)| VariableSpec {
            name: spec[src].name.clone(),
            units: spec[src].units.clone(),
            ordering_index: k,
        })
        .collect();
    TimeSeriesPanel::new(dates[first], values, variables)
}

/// Writes a panel in the same format accepted by [`load_panel`]. Floats are
/// emitted with the shortest representation that parses back to the same
/// value, so write∘load is the identity.
pub fn write_panel<W: Write>(panel: &TimeSeriesPanel, sink: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    let mut header = vec!["date".to_string()];
    header.extend(panel.variables().iter().map(|v| v.name.clone()));
    writer.write_record(&header)?;
    for i in 0..panel.len() {
        let mut record = vec![panel.date_at(i).to_string()];
        for j in 0..panel.width() {
            record.push(panel.values()[(i, j)].to_string());
        }
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Removes the per-calendar-month mean from every column not listed in
/// `skip`. Equivalent to OLS on twelve monthly dummies. Skipped columns
/// pass through bit-for-bit and get a zero seasonal pattern.
pub fn deseason_dummies(
    panel: &TimeSeriesPanel,
    skip: &HashSet<String>,
) -> Result<(TimeSeriesPanel, SeasonalFit)> {
    for name in skip {
        panel.var_index(name)?;
    }
    let t = panel.len();
    let m = panel.width();
    let mut means = DMatrix::zeros(12, m);
    let mut counts = [0usize; 12];
    for i in 0..t {
        counts[panel.date_at(i).month0()] += 1;
    }
    for j in 0..m {
        if skip.contains(&panel.variables()[j].name) {
            continue;
        }
        for i in 0..t {
            means[(panel.date_at(i).month0(), j)] += panel.values()[(i, j)];
        }
        for month in 0..12 {
            if counts[month] > 0 {
                means[(month, j)] /= counts[month] as f64;
            }
        }
    }
    let mut values = panel.values().clone();
    for j in 0..m {
        if skip.contains(&panel.variables()[j].name) {
            continue;
        }
        for i in 0..t {
            values[(i, j)] -= means[(panel.date_at(i).month0(), j)];
        }
    }
    Ok((
        panel.with_values(values),
        SeasonalFit {
            monthly_means: means,
            method: SeasonalMethod::Dummy,
        },
    ))
}

/// Contiguous sub-panel over `start..=end`.
pub fn restrict_window(
    panel: &TimeSeriesPanel,
    start: MonthDate,
    end: MonthDate,
) -> Result<TimeSeriesPanel> {
    if end < start {
        return Err(Error::EmptyWindow);
    }
    for date in [start, end] {
        if date < panel.start() || date > panel.end() {
            return Err(Error::OutOfRange {
                date,
                start: panel.start(),
                end: panel.end(),
            });
        }
    }
    let offset = panel.start().months_until(start) as usize;
    let t = start.months_until(end) as usize + 1;
    let values = panel.values().rows(offset, t).into_owned();
    TimeSeriesPanel::new(start, values, panel.variables().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn spec(names: &[&str]) -> Vec<VariableSpec> {
        names
            .iter()
            .enumerate()
            .map(|(k, n)| VariableSpec::new(*n, "", k))
            .collect()
    }

    fn csv_for(names: &[&str], start: MonthDate, rows: &[Vec<f64>]) -> String {
        let mut out = format!("date,{}\n", names.join(","));
        for (i, row) in rows.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&format!(
                "{},{}\n",
                start.add_months(i as i64),
                cells.join(",")
            ));
        }
        out
    }

    fn monthly_panel(names: &[&str], start: &str, rows: &[Vec<f64>]) -> TimeSeriesPanel {
        let text = csv_for(names, start.parse().unwrap(), rows);
        load_panel(text.as_bytes(), &spec(names)).unwrap()
    }

    #[test]
    fn loads_full_sample_dimensions() {
        // 468 months = 1980-01 .. 2018-12, 8 named columns.
        let names = ["CO2", "TCC", "PR", "AT", "SST", "SIE", "SIT", "Albedo"];
        let rows: Vec<Vec<f64>> = (0..468)
            .map(|i| (0..8).map(|j| (i * 8 + j) as f64 * 0.25).collect())
            .collect();
        let panel = monthly_panel(&names, "1980-01", &rows);
        assert_eq!(panel.len(), 468);
        assert_eq!(panel.width(), 8);
        assert_eq!(panel.end().to_string(), "2018-12");
    }

    #[test]
    fn loads_minimal_panel() {
        let panel = monthly_panel(&["x"], "2000-01", &[vec![1.0], vec![2.0], vec![3.0]]);
        assert_eq!(panel.len(), 3);
        assert_eq!(panel.width(), 1);
    }

    #[test]
    fn rejects_gap_months() {
        let text = "date,x\n2000-01,1\n2000-03,2\n";
        let err = load_panel(text.as_bytes(), &spec(&["x"])).unwrap_err();
        assert!(matches!(err, Error::NonContiguousDates { .. }), "{err}");
    }

    #[test]
    fn rejects_unknown_variable_and_bad_cells() {
        let text = "date,x\n2000-01,1\n";
        let err = load_panel(text.as_bytes(), &spec(&["y"])).unwrap_err();
        assert!(matches!(err, Error::UnknownVariable(_)));

        let text = "date,x\n2000-01,oops\n";
        let err = load_panel(text.as_bytes(), &spec(&["x"])).unwrap_err();
        assert!(matches!(err, Error::ParseCell { .. }));
    }

    #[test]
    fn trims_ragged_edges_but_rejects_interior_gaps() {
        let text = "date,x,y\n2000-01,,1\n2000-02,2,2\n2000-03,3,3\n2000-04,4,\n";
        let panel = load_panel(text.as_bytes(), &spec(&["x", "y"])).unwrap();
        assert_eq!(panel.len(), 2);
        assert_eq!(panel.start().to_string(), "2000-02");

        let text = "date,x\n2000-01,1\n2000-02,\n2000-03,3\n";
        let err = load_panel(text.as_bytes(), &spec(&["x"])).unwrap_err();
        assert!(matches!(err, Error::InteriorGap { .. }));
    }

    #[test]
    fn reorders_columns_by_ordering_index() {
        let text = "date,a,b\n2000-01,1,10\n2000-02,2,20\n";
        let spec = vec![VariableSpec::new("a", "", 1), VariableSpec::new("b", "", 0)];
        let panel = load_panel(text.as_bytes(), &spec).unwrap();
        assert_eq!(panel.names(), vec!["b", "a"]);
        assert_eq!(panel.values()[(0, 0)], 10.0);
        assert_eq!(panel.values()[(0, 1)], 1.0);
    }

    #[test]
    fn deseason_absorbs_pure_seasonal_pattern() {
        let pattern: Vec<f64> = (0..12).map(|m| (m as f64) * 1.5 - 3.0).collect();
        let rows: Vec<Vec<f64>> = (0..48).map(|i| vec![pattern[i % 12]]).collect();
        let panel = monthly_panel(&["x"], "2000-01", &rows);
        let (deseason, fit) = deseason_dummies(&panel, &HashSet::new()).unwrap();
        for i in 0..deseason.len() {
            assert_abs_diff_eq!(deseason.values()[(i, 0)], 0.0, epsilon = 1e-12);
        }
        for m in 0..12 {
            assert_abs_diff_eq!(fit.monthly_means[(m, 0)], pattern[m], epsilon = 1e-12);
        }
    }

    #[test]
    fn deseason_trend_has_zero_monthly_means() {
        let rows: Vec<Vec<f64>> = (0..120).map(|i| vec![i as f64]).collect();
        let panel = monthly_panel(&["x"], "2000-01", &rows);
        let (deseason, _) = deseason_dummies(&panel, &HashSet::new()).unwrap();
        let mut sums = [0.0f64; 12];
        let mut counts = [0usize; 12];
        for i in 0..deseason.len() {
            let m = deseason.date_at(i).month0();
            sums[m] += deseason.values()[(i, 0)];
            counts[m] += 1;
        }
        for m in 0..12 {
            assert_abs_diff_eq!(sums[m] / counts[m] as f64, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn deseason_skip_passes_through_bitwise() {
        let rows: Vec<Vec<f64>> = (0..36)
            .map(|i| vec![(i % 12) as f64, 0.1 + i as f64 / 7.0])
            .collect();
        let panel = monthly_panel(&["co2", "x"], "2000-01", &rows);
        let skip: HashSet<String> = ["co2".to_string()].into();
        let (deseason, fit) = deseason_dummies(&panel, &skip).unwrap();
        for i in 0..panel.len() {
            assert_eq!(
                deseason.values()[(i, 0)].to_bits(),
                panel.values()[(i, 0)].to_bits()
            );
        }
        for m in 0..12 {
            assert_eq!(fit.monthly_means[(m, 0)], 0.0);
        }
    }

    #[test]
    fn deseason_is_idempotent() {
        let rows: Vec<Vec<f64>> = (0..100)
            .map(|i| vec![((i % 12) as f64).sin() * 4.0 + i as f64 * 0.03])
            .collect();
        let panel = monthly_panel(&["x"], "1990-05", &rows);
        let none = HashSet::new();
        let (once, _) = deseason_dummies(&panel, &none).unwrap();
        let (twice, fit2) = deseason_dummies(&once, &none).unwrap();
        let scale = once.values().amax().max(1.0);
        for i in 0..once.len() {
            assert!((twice.values()[(i, 0)] - once.values()[(i, 0)]).abs() <= 1e-10 * scale);
        }
        for m in 0..12 {
            assert!(fit2.monthly_means[(m, 0)].abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn restrict_window_counts_months() {
        let rows: Vec<Vec<f64>> = (0..468).map(|i| vec![i as f64]).collect();
        let panel = monthly_panel(&["x"], "1980-01", &rows);
        let sub = restrict_window(
            &panel,
            "1984-01".parse().unwrap(),
            "2018-12".parse().unwrap(),
        )
        .unwrap();
        assert_eq!(sub.len(), 420);
        assert_eq!(sub.values()[(0, 0)], 48.0);

        let full = restrict_window(&panel, panel.start(), panel.end()).unwrap();
        assert_eq!(&full, &panel);

        let err = restrict_window(
            &panel,
            "1990-01".parse().unwrap(),
            "1989-12".parse().unwrap(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::EmptyWindow));
    }

    #[test]
    fn restrict_window_rejects_out_of_range() {
        let rows: Vec<Vec<f64>> = (0..24).map(|i| vec![i as f64]).collect();
        let panel = monthly_panel(&["x"], "2000-01", &rows);
        let err = restrict_window(
            &panel,
            "1999-01".parse().unwrap(),
            "2000-06".parse().unwrap(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::OutOfRange { .. }));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn write_then_load_round_trips(
            seed_rows in prop::collection::vec(
                prop::collection::vec(-1e6f64..1e6, 3),
                2..40,
            )
        ) {
            let panel = monthly_panel(&["a", "b", "c"], "1995-07", &seed_rows);
            let mut buffer = Vec::new();
            write_panel(&panel, &mut buffer).unwrap();
            let reloaded = load_panel(buffer.as_slice(), &spec(&["a", "b", "c"])).unwrap();
            prop_assert_eq!(reloaded.start(), panel.start());
            for i in 0..panel.len() {
                for j in 0..panel.width() {
                    prop_assert_eq!(
                        reloaded.values()[(i, j)].to_bits(),
                        panel.values()[(i, j)].to_bits()
                    );
                }
            }
        }

        #[test]
        fn deseason_monthly_means_vanish(
            rows in prop::collection::vec(prop::collection::vec(-100f64..100.0, 2), 24..80),
            start_month in 1u32..=12,
        ) {
            let start = MonthDate::new(2001, start_month).unwrap();
            let text = csv_for(&["u", "v"], start, &rows);
            let panel = load_panel(text.as_bytes(), &spec(&["u", "v"])).unwrap();
            let (deseason, _) = deseason_dummies(&panel, &HashSet::new()).unwrap();
            for j in 0..2 {
                let scale = panel.values().column(j).amax().max(1.0);
                let mut sums = [0.0f64; 12];
                let mut counts = [0usize; 12];
                for i in 0..deseason.len() {
                    let m = deseason.date_at(i).month0();
                    sums[m] += deseason.values()[(i, j)];
                    counts[m] += 1;
                }
                for m in 0..12 {
                    if counts[m] > 0 {
                        prop_assert!((sums[m] / counts[m] as f64).abs() <= 1e-10 * scale);
                    }
                }
            }
        }
    }
}
