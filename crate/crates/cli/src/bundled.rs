//! Experiment configs compiled into the binary.

const BUNDLED: &[(&str, &str)] = &[
    ("adult20", include_str!("../configs/adult20.conf")),
    ("adult5", include_str!("../configs/adult5.conf")),
    ("banana20", include_str!("../configs/banana20.conf")),
    ("banana5", include_str!("../configs/banana5.conf")),
    ("example1", include_str!("../configs/example1.conf")),
    ("example2", include_str!("../configs/example2.conf")),
    ("example3", include_str!("../configs/example3.conf")),
    ("example4", include_str!("../configs/example4.conf")),
    ("example5", include_str!("../configs/example5.conf")),
    ("example6", include_str!("../configs/example6.conf")),
    ("example7", include_str!("../configs/example7.conf")),
    ("example8", include_str!("../configs/example8.conf")),
    ("stability_demo", include_str!("../configs/stability_demo.conf")),
    ("waveform20", include_str!("../configs/waveform20.conf")),
    ("waveform5", include_str!("../configs/waveform5.conf")),
];

/// Names of the bundled configs, sorted.
pub fn list_experiments() -> Vec<&'static str> {
    let mut names: Vec<&str> = BUNDLED.iter().map(|(n, _)| *n).collect();
    names.sort_unstable();
    names
}

pub fn bundled_config(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;

    #[test]
    fn listing() {
        let names = list_experiments();
        assert!(names.len() >= 14);
        assert!(names.contains(&"example1") && names.contains(&"banana5"));
        assert!(names.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn every_bundled_config_parses_and_is_named_after_itself() {
        for name in list_experiments() {
            let cfg = ExperimentConfig::parse(bundled_config(name).unwrap()).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(cfg.name, name);
            assert_eq!(cfg.realizations, 20);
        }
    }
}
