//! The nine indirect identifier categories.

use core::fmt;
use core::str::FromStr;

use alloc::string::{String, ToString};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// Indirect personal identifier category.
///
/// Declaration order is the fixed schema order (also used for keyboard
/// shortcuts 1 to 9 in the review UI and for report rows).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    Body,
    Details,
    /// Socio-economic status and criminal history.
    Sec,
    Family,
    Facility,
    RelTime,
    Lifestyle,
    /// Direct identifiers that slipped through de-identification, or indirect
    /// descriptions of them.
    PhiRef,
    Other,
}

impl Category {
    pub const ALL: [Category; 9] = [
        Category::Body,
        Category::Details,
        Category::Sec,
        Category::Family,
        Category::Facility,
        Category::RelTime,
        Category::Lifestyle,
        Category::PhiRef,
        Category::Other,
    ];

    /// Conflict resolution order, highest priority first. Rare, high-risk
    /// categories win over frequent ones.
    pub const PRIORITY: [Category; 9] = [
        Category::PhiRef,
        Category::Details,
        Category::Sec,
        Category::Family,
        Category::Body,
        Category::Lifestyle,
        Category::Facility,
        Category::RelTime,
        Category::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Body => "BODY",
            Category::Details => "DETAILS",
            Category::Sec => "SEC",
            Category::Family => "FAMILY",
            Category::Facility => "FACILITY",
            Category::RelTime => "RELTIME",
            Category::Lifestyle => "LIFESTYLE",
            Category::PhiRef => "PHI_REF",
            Category::Other => "OTHER",
        }
    }

    /// Position in [`Category::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    /// Rank in [`Category::PRIORITY`]; lower wins.
    pub fn priority_rank(self) -> usize {
        match self {
            Category::PhiRef => 0,
            Category::Details => 1,
            Category::Sec => 2,
            Category::Family => 3,
            Category::Body => 4,
            Category::Lifestyle => 5,
            Category::Facility => 6,
            Category::RelTime => 7,
            Category::Other => 8,
        }
    }

    /// The higher-priority of two categories.
    pub fn prevailing(self, other: Category) -> Category {
        if other.priority_rank() < self.priority_rank() {
            other
        } else {
            self
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Category::Body => {
                "Weight, height, or a description of a person's body or body modifications \
                 (scars, tattoos, piercings, weight change over a period)."
            }
            Category::Details => {
                "Events that caused an injury or happened in the clinical center (accidents, \
                 aggression, refusing medication, leaving AMA), how the person was brought in, \
                 and statements or complaints the person expressed."
            }
            Category::Sec => {
                "Socio-economic or criminal history: employment, health insurance, legal \
                 guardianship, homelessness, subsidized housing, incarceration."
            }
            Category::Family => {
                "Detailed family information (adoption, twins, IVF pregnancy), family medical \
                 history, or family involvement in care."
            }
            Category::Facility => {
                "Hospital names, units, labs, departments, facilities, consulting services or \
                 teams, floors and rooms, medical branches, outside doctors."
            }
            Category::RelTime => {
                "Age or time-related information such as postoperative day numbers, day of life, \
                 or exact times of lab draws and medication; not times intrinsic to the disease."
            }
            Category::Lifestyle => {
                "Hobbies, sports, playing an instrument, diet, private lifestyle, tobacco, \
                 alcohol or substance use."
            }
            Category::PhiRef => {
                "Direct identifiers missed by de-identification, or an indirect description of \
                 one (e.g. lives in a halfway house)."
            }
            Category::Other => {
                "Other sensitive non-medical information: languages, ethnicity, sexual \
                 orientation."
            }
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;

    /// Accepts the canonical names plus a few documented aliases:
    /// `SOCIO` for `SEC`, `DIRECT_ID`/`DIRECTID` for `PHI_REF`, `FCLT` for
    /// `FACILITY`, `LFSTL` for `LIFESTYLE`. Aliases are case-insensitive,
    /// canonical names are matched case-insensitively as well.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let upper = s.trim().to_ascii_uppercase();
        let cat = match upper.as_str() {
            "BODY" => Category::Body,
            "DETAILS" => Category::Details,
            "SEC" | "SOCIO" => Category::Sec,
            "FAMILY" => Category::Family,
            "FACILITY" | "FCLT" => Category::Facility,
            "RELTIME" => Category::RelTime,
            "LIFESTYLE" | "LFSTL" => Category::Lifestyle,
            "PHI_REF" | "DIRECT_ID" | "DIRECTID" => Category::PhiRef,
            "OTHER" => Category::Other,
            _ => return Err(Error::UnknownCategory(s.to_string())),
        };
        Ok(cat)
    }
}

impl Serialize for Category {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Category {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}
