//! Run configuration for the CLI: command-line flags over a JSON config file
//! over `MAXCON_*` environment variables over defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::maxcon::{MaxConConfig, Variant, DEFAULT_M};
use crate::model::Tolerance;
use crate::seed;

pub const ENV_PREFIX: &str = "MAXCON_";

/// One source of settings. Unset fields defer to the next source.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    pub eps: Option<f64>,
    pub m: Option<usize>,
    pub q: Option<f64>,
    pub seed: Option<u64>,
    pub variant: Option<Variant>,
    pub local_expansion: Option<bool>,
    pub verbosity: Option<u8>,
}

impl ConfigLayer {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Reads `MAXCON_*` variables; other variables are ignored, unknown
    /// `MAXCON_*` keys are rejected.
    pub fn from_env<I, K, V>(vars: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut layer = ConfigLayer::default();
        for (key, value) in vars {
            let Some(name) = key.as_ref().strip_prefix(ENV_PREFIX) else { continue };
            let value = value.as_ref().trim();
            let bad = |what: &str| Error::invalid(format!("{}{name}={value:?} is not a valid {what}", ENV_PREFIX));
            match name {
                "EPS" => layer.eps = Some(value.parse().map_err(|_| bad("number"))?),
                "M" => layer.m = Some(value.parse().map_err(|_| bad("count"))?),
                "Q" => layer.q = Some(value.parse().map_err(|_| bad("number"))?),
                "SEED" => layer.seed = Some(value.parse().map_err(|_| bad("seed"))?),
                "VARIANT" => layer.variant = Some(value.parse()?),
                "LOCAL_EXPANSION" => layer.local_expansion = Some(value.parse().map_err(|_| bad("boolean"))?),
                "VERBOSITY" => layer.verbosity = Some(value.parse().map_err(|_| bad("level"))?),
                other => return Err(Error::invalid(format!("unknown environment setting {ENV_PREFIX}{other}"))),
            }
        }
        Ok(layer)
    }

    /// Fields of `self`, falling back to `lower` where unset.
    pub fn over(self, lower: ConfigLayer) -> ConfigLayer {
        ConfigLayer {
            eps: self.eps.or(lower.eps),
            m: self.m.or(lower.m),
            q: self.q.or(lower.q),
            seed: self.seed.or(lower.seed),
            variant: self.variant.or(lower.variant),
            local_expansion: self.local_expansion.or(lower.local_expansion),
            verbosity: self.verbosity.or(lower.verbosity),
        }
    }
}

/// Fully resolved settings. Its JSON form is itself a valid config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub eps: f64,
    pub m: usize,
    pub q: Option<f64>,
    pub seed: u64,
    pub variant: Variant,
    pub local_expansion: bool,
    pub verbosity: u8,
}

impl RunConfig {
    pub fn tolerance(&self) -> Result<Tolerance> {
        Tolerance::new(self.eps)
    }

    pub fn maxcon_config(&self) -> Result<MaxConConfig> {
        let mut cfg = MaxConConfig::new(self.tolerance()?, self.seed)
            .with_m(self.m)
            .with_variant(self.variant)
            .with_local_expansion(self.local_expansion);
        cfg.q = self.q;
        Ok(cfg)
    }

    pub fn as_layer(&self) -> ConfigLayer {
        ConfigLayer {
            eps: Some(self.eps),
            m: Some(self.m),
            q: self.q,
            seed: Some(self.seed),
            variant: Some(self.variant),
            local_expansion: Some(self.local_expansion),
            verbosity: Some(self.verbosity),
        }
    }
}

/// Merges the three sources. A missing seed is drawn from entropy; the
/// resolved value is part of the returned config so runs stay replayable.
pub fn resolve_config(cli: ConfigLayer, env: ConfigLayer, file: Option<ConfigLayer>) -> Result<RunConfig> {
    if cli.variant == Some(Variant::Full) && cli.local_expansion == Some(false) {
        return Err(Error::invalid("--variant full conflicts with --no-expand; use --variant nL"));
    }
    let merged = cli.over(file.unwrap_or_default()).over(env);
    let eps = merged.eps.ok_or_else(|| Error::invalid("no tolerance given: pass --eps or set eps"))?;
    Tolerance::new(eps)?;
    let m = merged.m.unwrap_or(DEFAULT_M);
    ensure!(m >= 1, "m must be at least 1");
    if let Some(q) = merged.q {
        ensure!(q > 0.0 && q < 1.0, "q must lie in (0, 1), got {q}");
    }
    let seed = merged.seed.unwrap_or_else(|| {
        let s = seed::from_entropy();
        log::info!("no seed given, drew {s}");
        s
    });
    Ok(RunConfig {
        eps,
        m,
        q: merged.q,
        seed,
        variant: merged.variant.unwrap_or_default(),
        local_expansion: merged.local_expansion.unwrap_or(true),
        verbosity: merged.verbosity.unwrap_or(0),
    })
}

/// Reads a JSON config file into a layer.
pub fn load_layer(path: &Path) -> Result<ConfigLayer> {
    ConfigLayer::from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn layer(json: &str) -> ConfigLayer {
        ConfigLayer::from_json(json).unwrap()
    }

    #[test]
    fn cli_beats_file_beats_env() {
        let cli = ConfigLayer {
            q: Some(0.2),
            ..Default::default()
        };
        let file = layer(r#"{"q": 0.5, "eps": 0.1, "m": 300}"#);
        let env = ConfigLayer::from_env([("MAXCON_M", "500"), ("MAXCON_SEED", "7"), ("HOME", "/root")]).unwrap();
        let cfg = resolve_config(cli, env, Some(file)).unwrap();
        assert_eq!(cfg.q, Some(0.2));
        assert_eq!(cfg.m, 300);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.eps, 0.1);
    }

    #[test]
    fn env_alone() {
        let env = ConfigLayer::from_env([("MAXCON_M", "500"), ("MAXCON_EPS", "0.2")]).unwrap();
        let cfg = resolve_config(ConfigLayer::default(), env, None).unwrap();
        assert_eq!(cfg.m, 500);
        assert!(cfg.local_expansion);
    }

    #[test]
    fn unknown_and_malformed_input_rejected() {
        assert!(ConfigLayer::from_json(r#"{"eps": 0.1, "mm": 3}"#).is_err());
        assert!(ConfigLayer::from_json("{eps: 0.1").is_err());
        assert!(ConfigLayer::from_env([("MAXCON_FOO", "1")]).is_err());
        assert!(ConfigLayer::from_env([("MAXCON_M", "many")]).is_err());
        let conflict = ConfigLayer {
            eps: Some(0.1),
            variant: Some(Variant::Full),
            local_expansion: Some(false),
            ..Default::default()
        };
        assert!(resolve_config(conflict, ConfigLayer::default(), None).is_err());
        assert!(resolve_config(ConfigLayer::default(), ConfigLayer::default(), None).is_err());
    }

    #[test]
    fn missing_seed_is_recorded() {
        let cli = ConfigLayer {
            eps: Some(0.1),
            ..Default::default()
        };
        let cfg = resolve_config(cli, ConfigLayer::default(), None).unwrap();
        let again = resolve_config(ConfigLayer::default(), ConfigLayer::default(), Some(cfg.as_layer())).unwrap();
        assert_eq!(again.seed, cfg.seed);
    }

    proptest! {
        #[test]
        fn serialised_config_re_resolves_identically(
            eps in 0.0f64..10.0,
            m in 1usize..5000,
            q in proptest::option::of(0.01f64..0.99),
            seed in any::<u64>(),
            v in 0usize..4,
            expand in any::<bool>(),
        ) {
            let variant = Variant::ALL[v];
            let cfg = RunConfig { eps, m, q, seed, variant, local_expansion: expand, verbosity: 1 };
            let json = serde_json::to_string(&cfg).unwrap();
            let back = resolve_config(ConfigLayer::default(), ConfigLayer::default(), Some(layer(&json))).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}
