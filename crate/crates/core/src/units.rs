//! Unit-suffixed physical values in config files, e.g. `"2 mm/s"` or
//! `"300 um^2/s"`. Everything is converted to micrometres and seconds.

use crate::error::{Error, Result};

/// Physical dimension a config value must have.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Time,
    Velocity,
    Diffusivity,
}

impl Dimension {
    fn name(self) -> &'static str {
        match self {
            Dimension::Length => "length",
            Dimension::Time => "time",
            Dimension::Velocity => "velocity",
            Dimension::Diffusivity => "diffusivity",
        }
    }
}

fn length_scale(unit: &str) -> Option<f64> {
    Some(match unit {
        "nm" => 1e-3,
        "um" | "µm" | "μm" => 1.0,
        "mm" => 1e3,
        "cm" => 1e4,
        "m" => 1e6,
        _ => return None,
    })
}

fn time_scale(unit: &str) -> Option<f64> {
    Some(match unit {
        "us" | "µs" | "μs" => 1e-6,
        "ms" => 1e-3,
        "s" => 1.0,
        "min" => 60.0,
        _ => return None,
    })
}

/// Splits `"<len>^2"` / `"<len>²"`.
fn squared_length(unit: &str) -> Option<f64> {
    let base = unit
        .strip_suffix("^2")
        .or_else(|| unit.strip_suffix('²'))?;
    length_scale(base).map(|s| s * s)
}

fn unit_scale(unit: &str, dim: Dimension) -> Option<f64> {
    match dim {
        Dimension::Length => length_scale(unit),
        Dimension::Time => time_scale(unit),
        Dimension::Velocity => {
            let (num, den) = unit.split_once('/')?;
            Some(length_scale(num)? / time_scale(den)?)
        }
        Dimension::Diffusivity => {
            let (num, den) = unit.split_once('/')?;
            Some(squared_length(num)? / time_scale(den)?)
        }
    }
}

/// Parses `"<number> <unit>"` (the space is optional) into crate units.
/// Bare numbers are rejected.
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64> {
    let s = text.trim();
    let split = s
        .char_indices()
        .find(|&(i, c)| {
            !(c.is_ascii_digit()
                || c == '.'
                || c == '+'
                || c == '-'
                || ((c == 'e' || c == 'E')
                    && s[i + 1..].starts_with(|n: char| n.is_ascii_digit() || n == '-' || n == '+')))
        })
        .map_or(s.len(), |(i, _)| i);
    let (num, unit) = s.split_at(split);
    let unit = unit.trim();
    if unit.is_empty() {
        return Err(Error::Parse(format!(
            "`{text}` needs a {} unit",
            dim.name()
        )));
    }
    let value: f64 = num
        .parse()
        .map_err(|_| Error::Parse(format!("`{text}`: bad number `{num}`")))?;
    let scale = unit_scale(unit, dim).ok_or_else(|| {
        Error::Parse(format!("`{text}`: `{unit}` is not a {} unit", dim.name()))
    })?;
    if !value.is_finite() {
        return Err(Error::Parse(format!("`{text}` is not finite")));
    }
    Ok(value * scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn conversions() {
        let cases = [
            ("5 um", Dimension::Length, 5.0),
            ("5µm", Dimension::Length, 5.0),
            ("0.5 mm", Dimension::Length, 500.0),
            ("2e-3 m", Dimension::Length, 2000.0),
            ("0.1 ms", Dimension::Time, 1e-4),
            ("2 s", Dimension::Time, 2.0),
            ("1 min", Dimension::Time, 60.0),
            ("2 mm/s", Dimension::Velocity, 2000.0),
            ("2000 um/s", Dimension::Velocity, 2000.0),
            ("300 um^2/s", Dimension::Diffusivity, 300.0),
            ("300 µm²/s", Dimension::Diffusivity, 300.0),
            ("3e-10 m^2/s", Dimension::Diffusivity, 300.0),
        ];
        for (text, dim, want) in cases {
            assert_relative_eq!(parse_quantity(text, dim).unwrap(), want, max_relative = 1e-12);
        }
    }

    #[test]
    fn rejects_missing_or_wrong_units() {
        assert!(parse_quantity("300", Dimension::Diffusivity).is_err());
        assert!(parse_quantity("5 s", Dimension::Length).is_err());
        assert!(parse_quantity("2 mm", Dimension::Velocity).is_err());
        assert!(parse_quantity("300 um/s", Dimension::Diffusivity).is_err());
        assert!(parse_quantity("fast um/s", Dimension::Velocity).is_err());
        assert!(parse_quantity("", Dimension::Time).is_err());
    }
}
