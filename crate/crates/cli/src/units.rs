//! Physical quantities written with unit suffixes (`0.45mm`, `5us`,
//! `25cm2/s`, `10mrad`). Everything is normalized to SI on parse; a bare
//! number is taken to be SI already.

use std::fmt;
use std::str::FromStr;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Time,
    Diffusivity,
    Angle,
}

impl Dimension {
    /// Suffixes and their SI scale, longest suffix first so that `mm`
    /// wins over `m` and `mrad` over `rad`.
    fn suffixes(self) -> &'static [(&'static str, f64)] {
        match self {
            Dimension::Length => &[
                ("um", 1e-6),
                ("µm", 1e-6),
                ("nm", 1e-9),
                ("mm", 1e-3),
                ("cm", 1e-2),
                ("m", 1.0),
            ],
            Dimension::Time => &[("us", 1e-6), ("µs", 1e-6), ("ns", 1e-9), ("ms", 1e-3), ("s", 1.0)],
            Dimension::Diffusivity => &[("cm2/s", 1e-4), ("mm2/s", 1e-6), ("m2/s", 1.0)],
            Dimension::Angle => &[
                ("mrad", 1e-3),
                ("urad", 1e-6),
                ("µrad", 1e-6),
                ("rad", 1.0),
                ("deg", std::f64::consts::PI / 180.0),
            ],
        }
    }

    fn name(self) -> &'static str {
        match self {
            Dimension::Length => "length",
            Dimension::Time => "time",
            Dimension::Diffusivity => "diffusion coefficient",
            Dimension::Angle => "angle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("cannot read {text:?} as a {dimension}; expected a number with one of the suffixes {accepted}")]
pub struct UnitError {
    text: String,
    dimension: &'static str,
    accepted: String,
}

/// Parse `text` as a quantity of dimension `dim`, returning its SI value.
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64, UnitError> {
    let fail = || UnitError {
        text: text.to_owned(),
        dimension: dim.name(),
        accepted: dim.suffixes().iter().map(|(s, _)| *s).collect::<Vec<_>>().join(", "),
    };
    let trimmed = text.trim();
    let (number, scale) = dim
        .suffixes()
        .iter()
        .find_map(|&(suffix, scale)| trimmed.strip_suffix(suffix).map(|n| (n.trim_end(), scale)))
        .unwrap_or((trimmed, 1.0));
    let value: f64 = number.parse().map_err(|_| fail())?;
    if !value.is_finite() {
        return Err(fail());
    }
    Ok(value * scale)
}

macro_rules! quantity {
    ($(#[$doc:meta])* $name:ident, $dim:expr) => {
        $(#[$doc])*
        #[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
        pub struct $name(pub f64);

        impl $name {
            pub fn si(self) -> f64 {
                self.0
            }
        }

        impl FromStr for $name {
            type Err = UnitError;

            fn from_str(s: &str) -> Result<Self, UnitError> {
                parse_quantity(s, $dim).map($name)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_f64(self.0)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                d.deserialize_any(QuantityVisitor($dim)).map($name)
            }
        }
    };
}

quantity!(
    /// Length in metres.
    Length,
    Dimension::Length
);
quantity!(
    /// Time in seconds.
    Time,
    Dimension::Time
);
quantity!(
    /// Diffusion coefficient in m²/s.
    Diffusivity,
    Dimension::Diffusivity
);
quantity!(
    /// Angle in radians.
    Angle,
    Dimension::Angle
);

struct QuantityVisitor(Dimension);

impl Visitor<'_> for QuantityVisitor {
    type Value = f64;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "a {} as an SI number or a string with a unit suffix", self.0.name())
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
        Ok(v)
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
        Ok(v as f64)
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
        Ok(v as f64)
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
        parse_quantity(v, self.0).map_err(E::custom)
    }
}
