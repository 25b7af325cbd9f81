use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Opaque driver identity such as `D1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct DriverLabel(String);

impl DriverLabel {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.trim().is_empty() {
            return Err(Error::InvalidParameter("driver label must be nonempty".into()));
        }
        Ok(Self(id))
    }

    /// `D{index}`, the naming used for enrolled and simulated drivers.
    pub fn numbered(index: usize) -> Self {
        Self(format!("D{index}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for DriverLabel {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        Self::new(value)
    }
}

impl From<DriverLabel> for String {
    fn from(label: DriverLabel) -> Self {
        label.0
    }
}

impl fmt::Display for DriverLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::str::FromStr for DriverLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::new(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_blank_labels() {
        assert!(DriverLabel::new("").is_err());
        assert!(serde_json::from_str::<DriverLabel>("\"  \"").is_err());
        assert_eq!(DriverLabel::numbered(3).as_str(), "D3");
    }
}
