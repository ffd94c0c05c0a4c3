//! Census geographic identifiers.
//!
//! A block GEOID is 15 digits: state (2) + county (3) + tract (6) + block (4).
//! Dropping the last 4 digits yields the 11-digit tract GEOID. Both are stored
//! as integers internally; `Display` restores the zero-padded string form.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Raised when a geocode string has the wrong length or non-digit characters.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("bad geoid {text:?}: expected {expected_len} digits")]
pub struct BadGeoid {
    pub text: String,
    pub expected_len: usize,
}

fn parse_digits(s: &str, expected_len: usize) -> Result<u64, BadGeoid> {
    let bytes = s.as_bytes();
    if bytes.len() != expected_len {
        return Err(BadGeoid {
            text: s.to_string(),
            expected_len,
        });
    }
    let mut value = 0u64;
    for &b in bytes {
        if !b.is_ascii_digit() {
            return Err(BadGeoid {
                text: s.to_string(),
                expected_len,
            });
        }
        value = value * 10 + u64::from(b - b'0');
    }
    Ok(value)
}

/// An 11-digit census tract identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TractId(u64);

impl TractId {
    pub fn parse(s: &str) -> Result<Self, BadGeoid> {
        parse_digits(s, 11).map(TractId)
    }

    /// The 2-digit state FIPS prefix, as an integer.
    pub fn state_fips(self) -> u64 {
        self.0 / 1_000_000_000
    }

    /// The 5-digit state+county prefix, as an integer.
    pub fn county_fips(self) -> u64 {
        self.0 / 1_000_000
    }

    pub fn as_u64(self) -> u64 {
        self.0
    }
}

impl fmt::Display for TractId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:011}", self.0)
    }
}

impl FromStr for TractId {
    type Err = BadGeoid;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl TryFrom<String> for TractId {
    type Error = BadGeoid;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        Self::parse(&s)
    }
}

impl From<TractId> for String {
    fn from(id: TractId) -> String {
        id.to_string()
    }
}

/// A 15-digit census block identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct BlockId(u64);

impl BlockId {
    pub fn parse(s: &str) -> Result<Self, BadGeoid> {
        parse_digits(s, 15).map(BlockId)
    }

    /// Truncate to the containing tract (first 11 digits).
    pub fn tract(self) -> TractId {
        TractId(self.0 / 10_000)
    }

    /// The 2-digit state FIPS prefix, as an integer.
    pub fn state_fips(self) -> u64 {
        self.0 / 10_000_000_000_000
    }

    pub fn as_u64(self) -> u64 {
        self.0
    }
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:015}", self.0)
    }
}

impl FromStr for BlockId {
    type Err = BadGeoid;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl TryFrom<String> for BlockId {
    type Error = BadGeoid;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        Self::parse(&s)
    }
}

impl From<BlockId> for String {
    fn from(id: BlockId) -> String {
        id.to_string()
    }
}

/// Parse a 2-digit state FIPS code such as `"06"`.
pub fn parse_state_fips(s: &str) -> Result<u64, BadGeoid> {
    parse_digits(s, 2)
}

/// Parse a 5-digit state+county FIPS code such as `"06075"`.
pub fn parse_county_fips(s: &str) -> Result<u64, BadGeoid> {
    parse_digits(s, 5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_truncates_to_tract() {
        let block = BlockId::parse("060750117001001").unwrap();
        assert_eq!(block.tract().to_string(), "06075011700");
        let block = BlockId::parse("060014271001002").unwrap();
        assert_eq!(block.tract().to_string(), "06001427100");
    }

    #[test]
    fn leading_zeros_survive_round_trip() {
        let tract = TractId::parse("01001000100").unwrap();
        assert_eq!(tract.to_string(), "01001000100");
        let block = BlockId::parse("010010001001001").unwrap();
        assert_eq!(block.to_string(), "010010001001001");
    }

    #[test]
    fn rejects_wrong_length_and_non_digits() {
        assert!(TractId::parse("0607501170").is_err());
        assert!(TractId::parse("06075011700x").is_err());
        assert!(BlockId::parse("06075011700100").is_err());
        assert!(BlockId::parse("06075011700100a").is_err());
        assert!(BlockId::parse("").is_err());
    }

    #[test]
    fn fips_prefixes() {
        let tract = TractId::parse("06075011700").unwrap();
        assert_eq!(tract.state_fips(), 6);
        assert_eq!(tract.county_fips(), 6075);
        let block = BlockId::parse("320010001001001").unwrap();
        assert_eq!(block.state_fips(), 32);
    }
}
