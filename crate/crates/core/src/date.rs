//! Monthly calendar dates.
//!
//! Everything in this crate runs at monthly frequency, so dates are plain
//! `(year, month)` pairs with month arithmetic and a `YYYY-MM` text form.
//! There are no days, time zones or calendars to worry about.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// A calendar month, e.g. `1980-01`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MonthDate {
    pub year: i32,
    /// 1-based month, `1..=12`.
    pub month: u32,
}

impl MonthDate {
    pub fn new(year: i32, month: u32) -> Result<Self, Error> {
        if !(1..=12).contains(&month) {
            return Err(Error::ParseDate(format!("{year}-{month}")));
        }
        Ok(Self { year, month })
    }

    /// Months since year 0, used for arithmetic and ordering.
    pub fn index(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    pub fn from_index(index: i64) -> Self {
        Self {
            year: index.div_euclid(12) as i32,
            month: (index.rem_euclid(12) + 1) as u32,
        }
    }

    pub fn add_months(self, n: i64) -> Self {
        Self::from_index(self.index() + n)
    }

    /// Signed number of months from `self` to `other`.
    pub fn months_until(self, other: MonthDate) -> i64 {
        other.index() - self.index()
    }

    /// Zero-based calendar month, January = 0. Convenient for indexing
    /// 12-row seasonal tables.
    pub fn month0(self) -> usize {
        self.month as usize - 1
    }
}

impl fmt::Display for MonthDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for MonthDate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let err = || Error::ParseDate(s.to_string());
        let (y, m) = s.split_once('-').ok_or_else(err)?;
        let year: i32 = y.parse().map_err(|_| err())?;
        let month: u32 = m.parse().map_err(|_| err())?;
        MonthDate::new(year, month).map_err(|_| err())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display_round_trip() {
        let d: MonthDate = "1980-01".parse().unwrap();
        assert_eq!(d, MonthDate { year: 1980, month: 1 });
        assert_eq!(d.to_string(), "1980-01");
    }

    #[test]
    fn month_arithmetic() {
        let d: MonthDate = "2018-12".parse().unwrap();
        assert_eq!(d.add_months(1).to_string(), "2019-01");
        assert_eq!(d.add_months(-12).to_string(), "2017-12");
        let start: MonthDate = "1984-01".parse().unwrap();
        let end: MonthDate = "2018-12".parse().unwrap();
        // inclusive window length
        assert_eq!(start.months_until(end) + 1, 420);
    }

    #[test]
    fn rejects_bad_dates() {
        assert!("2018-13".parse::<MonthDate>().is_err());
        assert!("2018-00".parse::<MonthDate>().is_err());
        assert!("201812".parse::<MonthDate>().is_err());
        assert!("2018-1x".parse::<MonthDate>().is_err());
    }

    #[test]
    fn from_index_handles_negative_years() {
        let d = MonthDate::from_index(-1);
        assert_eq!(d, MonthDate { year: -1, month: 12 });
        assert_eq!(d.index(), -1);
    }
}
