use crate::error::{Error, Result};

const GRAY: &str = include_str!("../../data/gray.txt");
const VIRIDIS: &str = include_str!("../../data/viridis.txt");

/// 256-entry RGB lookup table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Colormap {
    table: Vec<[u8; 3]>,
}

impl Colormap {
    /// Parses 256 lines of `r g b`; `#` lines are comments.
    pub fn parse(text: &str) -> Result<Self> {
        let mut table = Vec::with_capacity(256);
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let vals: Vec<u8> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| Error::format(format!("bad colormap entry {line:?}"))))
                .collect::<Result<_>>()?;
            if vals.len() != 3 {
                return Err(Error::format(format!("colormap entry {line:?} is not an RGB triple")));
            }
            table.push([vals[0], vals[1], vals[2]]);
        }
        if table.len() != 256 {
            return Err(Error::format(format!("colormap has {} entries, expected 256", table.len())));
        }
        Ok(Self { table })
    }

    pub fn gray() -> Self {
        Self::parse(GRAY).expect("bundled table is valid")
    }

    pub fn viridis() -> Self {
        Self::parse(VIRIDIS).expect("bundled table is valid")
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "gray" => Ok(Self::gray()),
            "viridis" => Ok(Self::viridis()),
            other => Err(Error::contract(format!("unknown colormap {other:?} (expected gray or viridis)"))),
        }
    }

    pub fn entry(&self, index: u8) -> [u8; 3] {
        self.table[index as usize]
    }

    /// Colour for `v` in `[0, 1]` (clamped), index `round(255 v)`.
    pub fn map(&self, v: f64) -> [u8; 3] {
        self.entry(unit_to_index(v))
    }
}

pub(crate) fn unit_to_index(v: f64) -> u8 {
    if v.is_nan() {
        return 0;
    }
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}
