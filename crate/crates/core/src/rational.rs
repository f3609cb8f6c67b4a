use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// An unsigned Exif rational.
///
/// Stored unreduced so that `1/125` and `2/250` stay distinguishable, which is
/// what a byte-exact round trip through an IFD requires. Components are kept
/// in 64 bits so that values which do not fit the 32-bit tag encoding can be
/// represented and rejected at emit time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ExifRational {
    numerator: u64,
    denominator: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RationalError {
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("cannot parse {0:?} as a rational")]
    Syntax(String),
}

impl ExifRational {
    pub fn new(numerator: u64, denominator: u64) -> Result<Self, RationalError> {
        if denominator == 0 {
            return Err(RationalError::ZeroDenominator);
        }
        Ok(Self {
            numerator,
            denominator,
        })
    }

    pub fn integer(value: u64) -> Self {
        Self {
            numerator: value,
            denominator: 1,
        }
    }

    pub fn numerator(&self) -> u64 {
        self.numerator
    }

    pub fn denominator(&self) -> u64 {
        self.denominator
    }

    pub fn value(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }

    pub fn is_positive(&self) -> bool {
        self.numerator > 0
    }

    pub fn fits_u32(&self) -> bool {
        self.numerator <= u32::MAX as u64 && self.denominator <= u32::MAX as u64
    }

    /// Parses a decimal literal such as `5.6` into `56/10` without going
    /// through floating point.
    pub fn from_decimal(text: &str) -> Result<Self, RationalError> {
        let bad = || RationalError::Syntax(text.to_string());
        let (int_part, frac_part) = match text.split_once('.') {
            Some((i, f)) => (i, f),
            None => (text, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        if !int_part.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
            || frac_part.len() > 9
        {
            return Err(bad());
        }
        let digits = format!("{int_part}{frac_part}");
        let numerator: u64 = digits.parse().map_err(|_| bad())?;
        let denominator = 10u64.pow(frac_part.len() as u32);
        Self::new(numerator, denominator)
    }

    /// Renders the value the way camera menus and gphoto2 spell it:
    /// `30`, `1/125`, `0.5`, `5.6`.
    pub fn camera_label(&self) -> String {
        if self.denominator == 1 {
            self.numerator.to_string()
        } else if self.numerator == 1 {
            format!("1/{}", self.denominator)
        } else {
            format_decimal(self.value())
        }
    }
}

/// Shortest decimal rendering with at most four fractional digits.
pub fn format_decimal(value: f64) -> String {
    let s = format!("{value:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

impl fmt::Display for ExifRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator)
    }
}

impl FromStr for ExifRational {
    type Err = RationalError;

    /// Accepts `num/den` and plain decimals.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s.split_once('/') {
            Some((n, d)) => {
                let n = n
                    .trim()
                    .parse::<u64>()
                    .map_err(|_| RationalError::Syntax(s.to_string()))?;
                let d = d
                    .trim()
                    .parse::<u64>()
                    .map_err(|_| RationalError::Syntax(s.to_string()))?;
                Self::new(n, d)
            }
            None => Self::from_decimal(s),
        }
    }
}

impl Serialize for ExifRational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ExifRational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Text(String),
            Int(u64),
            Float(f64),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Repr::Int(n) => Ok(Self::integer(n)),
            Repr::Float(x) => {
                if !x.is_finite() || x < 0.0 {
                    return Err(serde::de::Error::custom(format!("invalid rational {x}")));
                }
                Self::from_decimal(&x.to_string()).map_err(serde::de::Error::custom)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fraction_and_decimal() {
        assert_eq!("1/125".parse::<ExifRational>().unwrap(), ExifRational::new(1, 125).unwrap());
        assert_eq!("5.6".parse::<ExifRational>().unwrap(), ExifRational::new(56, 10).unwrap());
        assert_eq!("30".parse::<ExifRational>().unwrap(), ExifRational::integer(30));
        assert_eq!("1/0".parse::<ExifRational>(), Err(RationalError::ZeroDenominator));
        assert!("abc".parse::<ExifRational>().is_err());
        assert!(".".parse::<ExifRational>().is_err());
    }

    #[test]
    fn camera_labels() {
        assert_eq!(ExifRational::new(1, 125).unwrap().camera_label(), "1/125");
        assert_eq!(ExifRational::new(56, 10).unwrap().camera_label(), "5.6");
        assert_eq!(ExifRational::new(5, 10).unwrap().camera_label(), "0.5");
        assert_eq!(ExifRational::integer(8).camera_label(), "8");
    }

    #[test]
    fn serde_uses_slash_form() {
        let r = ExifRational::new(1, 4000).unwrap();
        assert_eq!(serde_json::to_string(&r).unwrap(), "\"1/4000\"");
        let back: ExifRational = serde_json::from_str("\"1/4000\"").unwrap();
        assert_eq!(back, r);
        let dec: ExifRational = serde_json::from_str("5.6").unwrap();
        assert_eq!(dec.value(), 5.6);
    }
}
