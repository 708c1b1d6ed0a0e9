//! Built-in project files.
//!
//! A directory named by `PPCSIM_PRESET_DIR` is searched first for
//! `<name>.toml`, so local files can shadow or extend the built-ins.

use std::path::PathBuf;

use crate::io::{parse_config, ProjectConfig};
use crate::{Error, Result};

pub const PRESET_DIR_ENV: &str = "PPCSIM_PRESET_DIR";

const BUILTIN: &[(&str, &str)] = &[
    ("paper-fig4", include_str!("../presets/paper-fig4.toml")),
    ("paper-fig5a", include_str!("../presets/paper-fig5a.toml")),
    ("paper-fig5b", include_str!("../presets/paper-fig5b.toml")),
];

fn user_dir() -> Option<PathBuf> {
    std::env::var_os(PRESET_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

/// Built-in names followed by any extra ones found in the preset directory, sorted.
pub fn preset_names() -> Vec<String> {
    let mut names: Vec<String> = BUILTIN.iter().map(|(n, _)| n.to_string()).collect();
    if let Some(dir) = user_dir() {
        if let Ok(entries) = std::fs::read_dir(dir) {
            let mut extra: Vec<String> = entries
                .filter_map(|e| e.ok())
                .map(|e| e.path())
                .filter(|p| p.extension().is_some_and(|x| x == "toml"))
                .filter_map(|p| p.file_stem().and_then(|s| s.to_str()).map(str::to_string))
                .filter(|n| !names.contains(n))
                .collect();
            extra.sort();
            names.extend(extra);
        }
    }
    names
}

pub fn preset_text(name: &str) -> Result<String> {
    if let Some(dir) = user_dir() {
        let path = dir.join(format!("{name}.toml"));
        if path.is_file() {
            return std::fs::read_to_string(&path).map_err(|e| Error::io(path, e));
        }
    }
    BUILTIN
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| t.to_string())
        .ok_or_else(|| {
            Error::config(
                "preset",
                format!("unknown preset {name:?}; available: {}", preset_names().join(", ")),
            )
        })
}

pub fn load_preset(name: &str) -> Result<ProjectConfig> {
    parse_config(&preset_text(name)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::GeometryLaw;

    #[test]
    fn builtins_parse() {
        for (name, _) in BUILTIN {
            let cfg = load_preset(name).unwrap();
            assert_eq!(cfg.preset.as_deref(), Some(*name));
            cfg.resolve().unwrap();
        }
        assert!(load_preset("nope").is_err());
    }

    #[test]
    fn fig4_modes_and_dampings() {
        let p = load_preset("paper-fig4").unwrap().resolve().unwrap();
        let labels: Vec<&str> = p.system.modes().iter().map(|m| m.label()).collect();
        assert_eq!(labels, ["A", "B", "C"]);
        let d: Vec<f64> = p.system.modes().iter().map(|m| m.intrinsic_damping()).collect();
        assert_eq!(d, [0.02387, 0.03579, 0.0329]);
        assert_eq!(p.config.modes[0].size_mm, Some(8.0));
        assert!(matches!(p.geometry.laws()[0], GeometryLaw::Fixed { .. }));
        assert_eq!(p.l_values.len(), 71);
        assert_eq!(p.l_values[35], 11.0);
        assert_eq!(p.grid.points(), 2001);
        assert_eq!(p.regions, [(6.0, 9.0), (13.0, 16.0)]);
    }

    #[test]
    fn fit_presets_cover_their_windows() {
        let a = load_preset("paper-fig5a").unwrap().resolve().unwrap();
        assert_eq!(a.l_values, [7.4, 7.5, 7.6, 7.7, 7.8, 7.9, 8.0, 8.1]);
        assert_eq!(a.fit_region, Some((7.4, 8.1)));
        let b = load_preset("paper-fig5b").unwrap().resolve().unwrap();
        assert_eq!(b.l_values, [14.2, 14.3, 14.4, 14.5, 14.6]);
        assert!(b.fit.is_some());
    }
}
