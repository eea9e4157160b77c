//! Activity codes for the supported classification schemes.
//!
//! HS product codes are digit strings of even length (2, 4 or 6); their depth is
//! the digit count. IPC/CPC codes follow the class / subclass / main group /
//! subgroup hierarchy, e.g. `Y02E 10/50`. Their depth uses the customary "digit"
//! naming of the patent literature: 3 = class (`Y02`), 4 = subclass (`Y02E`),
//! 5 = main group (`Y02E 10`), 6 = subgroup (`Y02E 10/50`). Custom codes are
//! opaque tokens of depth 1.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "HS")]
    Hs,
    #[serde(rename = "IPC")]
    Ipc,
    #[serde(rename = "CPC")]
    Cpc,
    #[serde(rename = "custom")]
    Custom,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Hs => "HS",
            Scheme::Ipc => "IPC",
            Scheme::Cpc => "CPC",
            Scheme::Custom => "custom",
        }
    }

    fn is_patent(self) -> bool {
        matches!(self, Scheme::Ipc | Scheme::Cpc)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hs" => Ok(Scheme::Hs),
            "ipc" => Ok(Scheme::Ipc),
            "cpc" => Ok(Scheme::Cpc),
            "custom" => Ok(Scheme::Custom),
            _ => Err(Error::UnknownScheme(s.to_string())),
        }
    }
}

fn patent_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^([A-Z][0-9]{2})(?:([A-Z])(?:([0-9]{1,4})(?:/([0-9]{1,6}))?)?)?$").unwrap()
    })
}

/// A validated activity identifier. Ordering is by scheme, then canonical code.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActivityCode {
    scheme: Scheme,
    code: String,
    depth: usize,
}

impl ActivityCode {
    pub fn new(scheme: Scheme, raw: &str) -> Result<Self> {
        let invalid = || Error::InvalidCode {
            scheme: scheme.to_string(),
            code: raw.to_string(),
        };
        match scheme {
            Scheme::Hs => {
                let code = raw.trim();
                let len = code.len();
                if !(2..=6).contains(&len) || len % 2 != 0 || !code.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(invalid());
                }
                Ok(ActivityCode {
                    scheme,
                    code: code.to_string(),
                    depth: len,
                })
            }
            Scheme::Ipc | Scheme::Cpc => {
                let compact = fold_patent(raw);
                let caps = patent_regex().captures(&compact).ok_or_else(invalid)?;
                let class = &caps[1];
                let (code, depth) = match (caps.get(2), caps.get(3), caps.get(4)) {
                    (None, _, _) => (class.to_string(), 3),
                    (Some(sub), None, _) => (format!("{class}{}", sub.as_str()), 4),
                    (Some(sub), Some(group), None) => {
                        (format!("{class}{} {}", sub.as_str(), group.as_str()), 5)
                    }
                    (Some(sub), Some(group), Some(subgroup)) => (
                        format!("{class}{} {}/{}", sub.as_str(), group.as_str(), subgroup.as_str()),
                        6,
                    ),
                };
                Ok(ActivityCode { scheme, code, depth })
            }
            Scheme::Custom => {
                let code = raw.trim();
                if code.is_empty() || code.chars().any(char::is_whitespace) {
                    return Err(invalid());
                }
                Ok(ActivityCode {
                    scheme,
                    code: code.to_string(),
                    depth: 1,
                })
            }
        }
    }

    pub fn hs(raw: &str) -> Result<Self> {
        Self::new(Scheme::Hs, raw)
    }

    pub fn cpc(raw: &str) -> Result<Self> {
        Self::new(Scheme::Cpc, raw)
    }

    /// Custom codes never fail on non-empty tokens; panics on invalid input.
    pub fn custom(raw: &str) -> Self {
        Self::new(Scheme::Custom, raw).expect("custom code must be a non-empty token")
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Canonical code text, e.g. `Y02E 10/50` or `850231`.
    pub fn code(&self) -> &str {
        &self.code
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Case- and whitespace-folded form used for matching.
    pub fn normalized(&self) -> String {
        normalize_code(self.scheme, &self.code)
    }

    /// Truncate to `depth`. Codes already at or above that depth are returned
    /// unchanged.
    pub fn truncate(&self, depth: usize) -> Result<Self> {
        if depth == 0 {
            return Err(Error::Config("truncation depth must be >= 1".into()));
        }
        if depth >= self.depth {
            return Ok(self.clone());
        }
        match self.scheme {
            Scheme::Hs => {
                if depth % 2 != 0 || depth < 2 {
                    return Err(Error::Config(format!(
                        "HS codes truncate to 2, 4 or 6 digits, not {depth}"
                    )));
                }
                Ok(ActivityCode {
                    scheme: self.scheme,
                    code: self.code[..depth].to_string(),
                    depth,
                })
            }
            Scheme::Ipc | Scheme::Cpc => {
                if depth < 3 {
                    return Err(Error::Config(format!(
                        "patent codes truncate to depth 3..=6, not {depth}"
                    )));
                }
                let cut = match depth {
                    3 => 3,
                    4 => 4,
                    _ => self.code.find('/').unwrap_or(self.code.len()),
                };
                Ok(ActivityCode {
                    scheme: self.scheme,
                    code: self.code[..cut].to_string(),
                    depth,
                })
            }
            Scheme::Custom => Ok(self.clone()),
        }
    }
}

impl fmt::Display for ActivityCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.scheme, self.code)
    }
}

impl FromStr for ActivityCode {
    type Err = Error;

    /// Parses the `SCHEME:code` display form.
    fn from_str(s: &str) -> Result<Self> {
        let (scheme, code) = s
            .split_once(':')
            .ok_or_else(|| Error::UnknownScheme(s.to_string()))?;
        ActivityCode::new(scheme.parse()?, code)
    }
}

impl Serialize for ActivityCode {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ActivityCode {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn fold_patent(raw: &str) -> String {
    raw.chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| c.to_ascii_uppercase())
        .collect()
}

/// Scheme-aware normalisation of a (possibly partial) code string.
pub fn normalize_code(scheme: Scheme, raw: &str) -> String {
    if scheme.is_patent() {
        fold_patent(raw)
    } else {
        raw.trim().to_string()
    }
}

/// Validates the characters of a partial code used as a prefix pattern.
pub(crate) fn validate_prefix(scheme: Scheme, raw: &str) -> Result<String> {
    let norm = normalize_code(scheme, raw);
    let ok = !norm.is_empty()
        && match scheme {
            Scheme::Hs => norm.len() <= 6 && norm.bytes().all(|b| b.is_ascii_digit()),
            Scheme::Ipc | Scheme::Cpc => {
                norm.as_bytes()[0].is_ascii_uppercase()
                    && norm.bytes().all(|b| b.is_ascii_uppercase() || b.is_ascii_digit() || b == b'/')
            }
            Scheme::Custom => !norm.chars().any(char::is_whitespace),
        };
    if ok {
        Ok(norm)
    } else {
        Err(Error::InvalidCode {
            scheme: scheme.to_string(),
            code: raw.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hs_codes_validate_length_and_digits() {
        assert_eq!(ActivityCode::hs("850231").unwrap().depth(), 6);
        assert!(ActivityCode::hs("85023").is_err());
        assert!(ActivityCode::hs("85023a").is_err());
        assert!(ActivityCode::hs("8502310").is_err());
    }

    #[test]
    fn cpc_codes_are_canonicalised() {
        let c = ActivityCode::cpc(" y02e10/50").unwrap();
        assert_eq!(c.code(), "Y02E 10/50");
        assert_eq!(c.depth(), 6);
        assert_eq!(c.normalized(), "Y02E10/50");
        assert_eq!(ActivityCode::cpc("H01L").unwrap().depth(), 4);
        assert_eq!(ActivityCode::cpc("Y02").unwrap().depth(), 3);
        assert!(ActivityCode::cpc("Y2").is_err());
        assert!(ActivityCode::cpc("Y02 10/50").is_err());
    }

    #[test]
    fn truncation_walks_the_hierarchy() {
        let c = ActivityCode::cpc("Y02E 10/50").unwrap();
        assert_eq!(c.truncate(5).unwrap().code(), "Y02E 10");
        assert_eq!(c.truncate(4).unwrap().code(), "Y02E");
        assert_eq!(c.truncate(3).unwrap().code(), "Y02");
        let h = ActivityCode::hs("850231").unwrap();
        assert_eq!(h.truncate(4).unwrap().code(), "8502");
        assert!(h.truncate(3).is_err());
        // truncated codes re-parse as valid codes of the same scheme
        for d in 3..=6 {
            let t = c.truncate(d).unwrap();
            assert_eq!(ActivityCode::cpc(t.code()).unwrap(), t);
        }
    }

    #[test]
    fn display_round_trips() {
        for c in [
            ActivityCode::hs("850231").unwrap(),
            ActivityCode::cpc("Y02E 10/50").unwrap(),
            ActivityCode::custom("a1"),
        ] {
            assert_eq!(c.to_string().parse::<ActivityCode>().unwrap(), c);
        }
        assert!(matches!("XX:1".parse::<ActivityCode>(), Err(Error::UnknownScheme(_))));
    }
}
