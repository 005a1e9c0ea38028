use super::{ExperimentConfig, ExperimentError};

const BUNDLED: &[(&str, &str)] = &[
    (
        "flat_static_classical",
        include_str!("../../configs/flat_static_classical.toml"),
    ),
    ("harnack_circle", include_str!("../../configs/harnack_circle.toml")),
    (
        "logpotential_constant",
        include_str!("../../configs/logpotential_constant.toml"),
    ),
    (
        "prescribed_growth",
        include_str!("../../configs/prescribed_growth.toml"),
    ),
    (
        "flat_static_exact",
        include_str!("../../configs/flat_static_exact.toml"),
    ),
    (
        "flat_logpotential_exact",
        include_str!("../../configs/flat_logpotential_exact.toml"),
    ),
    (
        "conformal_growth_exact",
        include_str!("../../configs/conformal_growth_exact.toml"),
    ),
    (
        "ricci_surface_bump",
        include_str!("../../configs/ricci_surface_bump.toml"),
    ),
];

#[derive(Clone, Debug, PartialEq)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub description: String,
    pub source: &'static str,
}

/// Bundled experiments in catalog order.
pub fn catalog() -> Vec<CatalogEntry> {
    BUNDLED
        .iter()
        .map(|&(name, source)| CatalogEntry {
            name,
            description: bundled(name).map(|c| c.description).unwrap_or_default(),
            source,
        })
        .collect()
}

/// Parsed and validated bundled config.
pub fn bundled(name: &str) -> Result<ExperimentConfig, ExperimentError> {
    let (_, source) = BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| ExperimentError::UnknownExperiment(name.to_string()))?;
    ExperimentConfig::from_toml(source)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn names_unique_and_match_config() {
        let names: BTreeSet<_> = BUNDLED.iter().map(|(n, _)| *n).collect();
        assert_eq!(names.len(), BUNDLED.len());
        for required in [
            "flat_static_classical",
            "ricci_surface_bump",
            "logpotential_constant",
            "harnack_circle",
        ] {
            assert!(names.contains(required), "{required}");
        }
        for entry in catalog() {
            let config = bundled(entry.name).unwrap();
            assert_eq!(config.name, entry.name);
            assert!(!entry.description.is_empty());
        }
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(bundled("nope"), Err(ExperimentError::UnknownExperiment(_))));
    }
}
