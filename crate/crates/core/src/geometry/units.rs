use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::GeometryError;

/// Length units accepted in answers and ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthUnit {
    Meter,
    Centimeter,
    Millimeter,
    Inch,
    Foot,
}

impl LengthUnit {
    pub const ALL: [LengthUnit; 5] = [
        LengthUnit::Meter,
        LengthUnit::Centimeter,
        LengthUnit::Millimeter,
        LengthUnit::Inch,
        LengthUnit::Foot,
    ];

    /// Centimeters per unit.
    pub fn cm_factor(self) -> f64 {
        match self {
            LengthUnit::Meter => 100.0,
            LengthUnit::Centimeter => 1.0,
            LengthUnit::Millimeter => 0.1,
            LengthUnit::Inch => 2.54,
            LengthUnit::Foot => 30.48,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            LengthUnit::Meter => "m",
            LengthUnit::Centimeter => "cm",
            LengthUnit::Millimeter => "mm",
            LengthUnit::Inch => "in",
            LengthUnit::Foot => "ft",
        }
    }

    /// Plural word used when rendering answers ("2.5 meters").
    pub fn plural(self) -> &'static str {
        match self {
            LengthUnit::Meter => "meters",
            LengthUnit::Centimeter => "centimeters",
            LengthUnit::Millimeter => "millimeters",
            LengthUnit::Inch => "inches",
            LengthUnit::Foot => "feet",
        }
    }
}

impl fmt::Display for LengthUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for LengthUnit {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().trim_end_matches('.').to_ascii_lowercase();
        Ok(match lower.as_str() {
            "m" | "meter" | "meters" | "metre" | "metres" => LengthUnit::Meter,
            "cm" | "centimeter" | "centimeters" | "centimetre" | "centimetres" => {
                LengthUnit::Centimeter
            }
            "mm" | "millimeter" | "millimeters" | "millimetre" | "millimetres" => {
                LengthUnit::Millimeter
            }
            "in" | "inch" | "inches" | "\"" => LengthUnit::Inch,
            "ft" | "foot" | "feet" | "'" => LengthUnit::Foot,
            _ => return Err(GeometryError::UnknownUnit(s.to_string())),
        })
    }
}

/// Converts a length to centimeters with a single multiplication.
pub fn convert_length_to_cm(value: f64, unit: LengthUnit) -> f64 {
    value * unit.cm_factor()
}

/// String-unit variant; fails on units outside the table.
pub fn convert_to_cm(value: f64, unit: &str) -> Result<f64, GeometryError> {
    Ok(convert_length_to_cm(value, unit.parse()?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_values() {
        assert_eq!(convert_length_to_cm(1.0, LengthUnit::Meter), 100.0);
        assert_eq!(convert_length_to_cm(1.0, LengthUnit::Foot), 30.48);
        assert_eq!(convert_length_to_cm(1.0, LengthUnit::Inch), 2.54);
        assert_eq!(convert_length_to_cm(1.0, LengthUnit::Millimeter), 0.1);
        for u in LengthUnit::ALL {
            assert_eq!(convert_length_to_cm(0.0, u), 0.0);
        }
    }

    #[test]
    fn parses_aliases() {
        assert_eq!("Meters".parse::<LengthUnit>().unwrap(), LengthUnit::Meter);
        assert_eq!("feet".parse::<LengthUnit>().unwrap(), LengthUnit::Foot);
        assert_eq!("inches".parse::<LengthUnit>().unwrap(), LengthUnit::Inch);
        assert!(matches!("furlong".parse::<LengthUnit>(), Err(GeometryError::UnknownUnit(_))));
        assert!(convert_to_cm(1.0, "yards").is_err());
    }
}
