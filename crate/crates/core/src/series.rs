use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A labeled scalar signal, e.g. received signal level in dBm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub id: String,
    pub label: String,
    pub samples: Vec<f64>,
}

impl TimeSeries {
    pub fn new(id: impl Into<String>, label: impl Into<String>, samples: Vec<f64>) -> Result<Self> {
        let series = TimeSeries {
            id: id.into(),
            label: label.into(),
            samples,
        };
        series.validate()?;
        Ok(series)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::InvalidSeries(format!("series `{}` is empty", self.id)));
        }
        if let Some(t) = self.samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidSeries(format!(
                "series `{}` has a non-finite sample at index {t}",
                self.id
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(TimeSeries::new("a", "x", vec![]).is_err());
        assert!(TimeSeries::new("a", "x", vec![1.0, f64::NAN]).is_err());
        assert!(TimeSeries::new("a", "x", vec![1.0, f64::INFINITY]).is_err());
        assert!(TimeSeries::new("a", "x", vec![-80.0]).is_ok());
    }
}
