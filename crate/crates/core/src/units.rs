//! Unit-tagged quantities for config files.
//!
//! Internally everything is SI (Pa, m³/s). Config files may give either a
//! bare number (SI) or a string with a unit suffix, e.g. `"350 bar"`,
//! `"35 MPa"`, `"120 L/min"`. Values are always written back as SI numbers.

use serde::{Deserialize, Serialize};

pub const BAR: f64 = 1.0e5;
pub const LITERS_PER_MINUTE: f64 = 1.0e-3 / 60.0;

#[derive(Deserialize)]
#[serde(untagged)]
enum Repr {
    Number(f64),
    Text(String),
}

fn split_unit(text: &str) -> Result<(f64, String), String> {
    let text = text.trim();
    let bytes = text.as_bytes();
    let end = (0..bytes.len())
        .find(|&i| {
            let c = bytes[i] as char;
            let exponent = (c == 'e' || c == 'E')
                && i > 0
                && bytes[i - 1].is_ascii_digit()
                && bytes
                    .get(i + 1)
                    .is_some_and(|n| n.is_ascii_digit() || *n == b'-' || *n == b'+');
            c.is_ascii_alphabetic() && !exponent
        })
        .unwrap_or(text.len());
    let (num, unit) = text.split_at(end);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("cannot parse number in {text:?}"))?;
    Ok((value, unit.trim().to_ascii_lowercase()))
}

/// Pressure in pascal.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(try_from = "Repr", into = "f64")]
pub struct Pressure(pub f64);

impl Pressure {
    pub fn from_bar(bar: f64) -> Self {
        Pressure(bar * BAR)
    }

    pub fn pa(self) -> f64 {
        self.0
    }

    pub fn bar(self) -> f64 {
        self.0 / BAR
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let (value, unit) = split_unit(text)?;
        let scale = match unit.as_str() {
            "" | "pa" => 1.0,
            "kpa" => 1.0e3,
            "mpa" => 1.0e6,
            "bar" => BAR,
            "psi" => 6_894.757_293_168,
            other => return Err(format!("unknown pressure unit {other:?}")),
        };
        Ok(Pressure(value * scale))
    }
}

impl TryFrom<Repr> for Pressure {
    type Error = String;
    fn try_from(r: Repr) -> Result<Self, String> {
        match r {
            Repr::Number(v) => Ok(Pressure(v)),
            Repr::Text(t) => Pressure::parse(&t),
        }
    }
}

impl From<Pressure> for f64 {
    fn from(p: Pressure) -> f64 {
        p.0
    }
}

/// Volume flow in m³/s.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(try_from = "Repr", into = "f64")]
pub struct Flow(pub f64);

impl Flow {
    pub fn from_lpm(lpm: f64) -> Self {
        Flow(lpm * LITERS_PER_MINUTE)
    }

    pub fn m3s(self) -> f64 {
        self.0
    }

    pub fn lpm(self) -> f64 {
        self.0 / LITERS_PER_MINUTE
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let (value, unit) = split_unit(text)?;
        let scale = match unit.replace(' ', "").as_str() {
            "" | "m3/s" | "m^3/s" => 1.0,
            "l/min" | "lpm" => LITERS_PER_MINUTE,
            "l/s" => 1.0e-3,
            other => return Err(format!("unknown flow unit {other:?}")),
        };
        Ok(Flow(value * scale))
    }
}

impl TryFrom<Repr> for Flow {
    type Error = String;
    fn try_from(r: Repr) -> Result<Self, String> {
        match r {
            Repr::Number(v) => Ok(Flow(v)),
            Repr::Text(t) => Flow::parse(&t),
        }
    }
}

impl From<Flow> for f64 {
    fn from(q: Flow) -> f64 {
        q.0
    }
}

/// `deserialize_with` helper: a list of pressures, each a number (Pa) or a
/// unit-suffixed string, into plain pascal values.
pub fn de_pressures<'de, D>(d: D) -> Result<Vec<f64>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    let v: Vec<Pressure> = Vec::deserialize(d)?;
    Ok(v.into_iter().map(Pressure::pa).collect())
}
