//! Named parameter sets for the published experiments and the comparison pipeline.

use std::fmt;
use std::str::FromStr;

use crate::domain::{DensityField, SimConfig};
use crate::error::ObservableError;
use crate::observables::{rel_l1_errors, RelErrors};

/// Snapshot times used by default.
pub const DEFAULT_OUTPUT_TIMES: [f64; 5] = [0.0, 4.0, 20.0, 60.0, 100.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Preset {
    /// Constant growth, no division.
    Case1Growth,
    /// Division, no growth.
    Case2Frag,
    /// Growth and division.
    Case3Both,
    /// Diffusion and repulsion only.
    AppendixANone,
    /// Repulsion only.
    AppendixANoD,
}

impl Preset {
    pub const ALL: [Preset; 5] =
        [Preset::Case1Growth, Preset::Case2Frag, Preset::Case3Both, Preset::AppendixANone, Preset::AppendixANoD];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Case1Growth => "case1-growth",
            Preset::Case2Frag => "case2-frag",
            Preset::Case3Both => "case3-both",
            Preset::AppendixANone => "appendixA-none",
            Preset::AppendixANoD => "appendixA-noD",
        }
    }

    /// Fields that differ from the defaults, as `(key, value)`.
    pub fn overrides(self) -> &'static [(&'static str, f64)] {
        match self {
            Preset::Case1Growth => &[("beta_bar", 0.0), ("growth_g", 0.008)],
            Preset::Case2Frag => &[("growth_g", 0.0), ("beta_bar", 0.05)],
            Preset::Case3Both => &[("growth_g", 0.008), ("beta_bar", 0.05)],
            Preset::AppendixANone => &[("growth_g", 0.0), ("beta_bar", 0.0)],
            Preset::AppendixANoD => &[("growth_g", 0.0), ("beta_bar", 0.0), ("diffusion_d", 0.0)],
        }
    }

    pub fn config(self) -> SimConfig {
        let mut c = SimConfig::default();
        for &(key, value) in self.overrides() {
            match key {
                "beta_bar" => c.beta_bar = value,
                "growth_g" => c.growth_g = value,
                "diffusion_d" => c.diffusion_d = value,
                _ => unreachable!("preset override {key}"),
            }
        }
        c
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnknownPreset(pub String);

impl fmt::Display for UnknownPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = Preset::ALL.iter().map(|p| p.name()).collect();
        write!(f, "unknown preset `{}` (expected one of {})", self.0, names.join(", "))
    }
}

impl std::error::Error for UnknownPreset {}

impl FromStr for Preset {
    type Err = UnknownPreset;

    /// Accepts full names and the short forms `case1`, `case2`, `case3`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "case1" => return Ok(Preset::Case1Growth),
            "case2" => return Ok(Preset::Case2Frag),
            "case3" => return Ok(Preset::Case3Both),
            _ => {}
        }
        Preset::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(&lower))
            .ok_or_else(|| UnknownPreset(s.to_string()))
    }
}

/// Relative errors of `other` against `reference`, snapshot by snapshot.
pub fn compare_series(
    reference: &[DensityField],
    other: &[DensityField],
) -> Result<Vec<(f64, RelErrors)>, ObservableError> {
    if reference.len() != other.len() {
        return Err(ObservableError::TimeMismatch);
    }
    reference
        .iter()
        .zip(other)
        .map(|(a, b)| {
            if (a.time - b.time).abs() > 1e-9 * a.time.abs().max(1.0) {
                return Err(ObservableError::TimeMismatch);
            }
            Ok((a.time, rel_l1_errors(a, b)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_differ_from_defaults_only_in_overrides() {
        let base = SimConfig::default();
        for p in Preset::ALL {
            let c = p.config();
            for key in SimConfig::FIELDS {
                let stated = p.overrides().iter().find(|(k, _)| *k == key);
                match stated {
                    Some((_, v)) => assert_eq!(c.get(key).unwrap(), v.to_string(), "{p} {key}"),
                    None => assert_eq!(c.get(key), base.get(key), "{p} {key}"),
                }
            }
            assert!(c.validate().is_empty());
        }
    }

    #[test]
    fn preset_names_round_trip() {
        for p in Preset::ALL {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        assert_eq!("case2".parse::<Preset>().unwrap(), Preset::Case2Frag);
        assert!("case9".parse::<Preset>().is_err());
    }

    #[test]
    fn compare_requires_matching_times() {
        let g = crate::domain::Grid3::new(0.0, 1.0, 2, 0.2, 1.0, 2).unwrap();
        let mut a = DensityField::zeros(g.clone());
        a.values[0] = 1.0;
        let mut b = a.clone();
        b.time = 1.0;
        assert_eq!(compare_series(&[a.clone()], &[b]), Err(ObservableError::TimeMismatch));
        let rows = compare_series(&[a.clone()], &[a]).unwrap();
        assert_eq!(rows[0].1.e_tot, 0.0);
    }
}
