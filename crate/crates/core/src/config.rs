//! Run configuration and its strict JSON schema.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::experiments::{CorollaryConfig, CounterexampleConfig, TheoremConfig, WishartConfig};
use crate::report::Format;

pub const SEED_ENV: &str = "SUBGAUSS_SEED";
pub const THREADS_ENV: &str = "SUBGAUSS_THREADS";
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_OUTPUT_DIR: &str = "results";

pub const SCHEMA_HELP: &str = r#"Configuration file: one JSON object. Unknown keys are rejected.

Common keys
  "experiment"  (required) "theorem" | "corollary" | "wishart" | "counterexample" | "all"
  "seed"        unsigned 64-bit integer (default: $SUBGAUSS_SEED, else 42)
  "output_dir"  directory for reports (default "results")
  "format"      "csv" | "json" (default "csv")

theorem         "dims" [16,64,256], "kappas" [1,4,16], "maps" ["sgn","clamp"],
                "samples" 100000, "directions" 64, "lambdas" [0.25,0.5,1]
corollary       "dims" [32,64,128], "w_draws" 50, "samples" 100000,
                "directions" 64, "lambdas" [0.25,0.5,1]
wishart         "dims" [64,128,256], "trials" 1000, "threshold" 100
counterexample  "dims" [16,64,256], "samples" 100000, "directions" 16
all             "theorem" {...}, "corollary" {...}, "wishart" {...},
                "counterexample" {...}  (each with the keys above)

Maps: sgn, clamp, cos, threshold:<t>, const:<c>.
"directions" counts random unit directions; the n coordinate directions and
the all-ones direction are always included. "lambdas" lists positive values
and is mirrored to a symmetric grid.
"#;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Theorem,
    Corollary,
    Wishart,
    Counterexample,
    All,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Theorem => "theorem",
            ExperimentKind::Corollary => "corollary",
            ExperimentKind::Wishart => "wishart",
            ExperimentKind::Counterexample => "counterexample",
            ExperimentKind::All => "all",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct AllConfig {
    pub theorem: TheoremConfig,
    pub corollary: CorollaryConfig,
    pub wishart: WishartConfig,
    pub counterexample: CounterexampleConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Parameters {
    Theorem(TheoremConfig),
    Corollary(CorollaryConfig),
    Wishart(WishartConfig),
    Counterexample(CounterexampleConfig),
    All(AllConfig),
}

impl Parameters {
    pub fn defaults(kind: ExperimentKind) -> Self {
        match kind {
            ExperimentKind::Theorem => Parameters::Theorem(TheoremConfig::default()),
            ExperimentKind::Corollary => Parameters::Corollary(CorollaryConfig::default()),
            ExperimentKind::Wishart => Parameters::Wishart(WishartConfig::default()),
            ExperimentKind::Counterexample => Parameters::Counterexample(CounterexampleConfig::default()),
            ExperimentKind::All => Parameters::All(AllConfig::default()),
        }
    }

    pub fn kind(&self) -> ExperimentKind {
        match self {
            Parameters::Theorem(_) => ExperimentKind::Theorem,
            Parameters::Corollary(_) => ExperimentKind::Corollary,
            Parameters::Wishart(_) => ExperimentKind::Wishart,
            Parameters::Counterexample(_) => ExperimentKind::Counterexample,
            Parameters::All(_) => ExperimentKind::All,
        }
    }

    fn set_seed(&mut self, seed: u64) {
        match self {
            Parameters::Theorem(c) => c.seed = seed,
            Parameters::Corollary(c) => c.seed = seed,
            Parameters::Wishart(c) => c.seed = seed,
            Parameters::Counterexample(c) => c.seed = seed,
            Parameters::All(c) => {
                c.theorem.seed = seed;
                c.corollary.seed = seed;
                c.wishart.seed = seed;
                c.counterexample.seed = seed;
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let nested = |prefix: &str, r: Result<()>| {
            r.map_err(|e| match e {
                Error::Validation { path, value, message } => Error::Validation {
                    path: format!("{prefix}.{path}"),
                    value,
                    message,
                },
                other => other,
            })
        };
        match self {
            Parameters::Theorem(c) => c.validate(),
            Parameters::Corollary(c) => c.validate(),
            Parameters::Wishart(c) => c.validate(),
            Parameters::Counterexample(c) => c.validate(),
            Parameters::All(c) => {
                nested("theorem", c.theorem.validate())?;
                nested("corollary", c.corollary.validate())?;
                nested("wishart", c.wishart.validate())?;
                nested("counterexample", c.counterexample.validate())
            }
        }
    }

    fn to_value(&self) -> Result<Value> {
        let v = match self {
            Parameters::Theorem(c) => serde_json::to_value(c),
            Parameters::Corollary(c) => serde_json::to_value(c),
            Parameters::Wishart(c) => serde_json::to_value(c),
            Parameters::Counterexample(c) => serde_json::to_value(c),
            Parameters::All(c) => serde_json::to_value(c),
        };
        v.map_err(|e| Error::Serialization(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub parameters: Parameters,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub format: Format,
}

impl RunConfig {
    /// Defaults for `kind`, seeded from the environment when set.
    pub fn defaults(kind: ExperimentKind) -> Result<Self> {
        let mut cfg = RunConfig {
            parameters: Parameters::defaults(kind),
            output_dir: PathBuf::from(DEFAULT_OUTPUT_DIR),
            seed: DEFAULT_SEED,
            format: Format::Csv,
        };
        cfg.set_seed(seed_from_env(std::env::var(SEED_ENV).ok().as_deref())?);
        Ok(cfg)
    }

    pub fn experiment(&self) -> ExperimentKind {
        self.parameters.kind()
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.parameters.set_seed(seed);
    }

    pub fn validate(&self) -> Result<()> {
        self.parameters.validate()
    }

    /// The flat JSON form accepted by [`parse_config`].
    pub fn to_json(&self) -> Result<Value> {
        let mut object = Map::new();
        object.insert("experiment".into(), Value::from(self.experiment().as_str()));
        object.insert("seed".into(), Value::from(self.seed));
        object.insert("output_dir".into(), Value::from(self.output_dir.to_string_lossy().into_owned()));
        object.insert("format".into(), Value::from(self.format.as_str()));
        if let Value::Object(params) = self.parameters.to_value()? {
            object.extend(params);
        }
        Ok(Value::Object(object))
    }
}

fn seed_from_env(value: Option<&str>) -> Result<u64> {
    match value {
        None => Ok(DEFAULT_SEED),
        Some(s) => s
            .trim()
            .parse()
            .map_err(|_| Error::validation(SEED_ENV, s, "seed must be an unsigned 64-bit integer")),
    }
}

fn schema_error(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.into(),
        message: message.into(),
    }
}

fn deserialize<T: serde::de::DeserializeOwned>(value: Value) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { "$".to_string() } else { format!("$.{path}") };
        schema_error(path, e.inner().to_string())
    })
}

/// Parses a configuration, taking the default seed from `SUBGAUSS_SEED`.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with_env(text, std::env::var(SEED_ENV).ok().as_deref())
}

/// Parses a configuration with an explicit value for the seed variable.
pub fn parse_config_with_env(text: &str, env_seed: Option<&str>) -> Result<RunConfig> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| schema_error(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
    let Value::Object(mut object) = value else {
        return Err(schema_error("$", "configuration must be a JSON object"));
    };
    let kind: ExperimentKind = match object.remove("experiment") {
        Some(v) => deserialize(v).map_err(|e| match e {
            Error::Schema { message, .. } => schema_error("$.experiment", message),
            other => other,
        })?,
        None => return Err(schema_error("$.experiment", "missing required key \"experiment\"")),
    };
    let seed = match object.remove("seed") {
        Some(v) => v
            .as_u64()
            .ok_or_else(|| schema_error("$.seed", format!("expected an unsigned 64-bit integer, got {v}")))?,
        None => seed_from_env(env_seed)?,
    };
    let output_dir = match object.remove("output_dir") {
        Some(Value::String(s)) => PathBuf::from(s),
        Some(v) => return Err(schema_error("$.output_dir", format!("expected a string, got {v}"))),
        None => PathBuf::from(DEFAULT_OUTPUT_DIR),
    };
    let format = match object.remove("format") {
        Some(v) => deserialize(v).map_err(|e| match e {
            Error::Schema { message, .. } => schema_error("$.format", message),
            other => other,
        })?,
        None => Format::Csv,
    };
    let rest = Value::Object(object);
    let parameters = match kind {
        ExperimentKind::Theorem => Parameters::Theorem(deserialize(rest)?),
        ExperimentKind::Corollary => Parameters::Corollary(deserialize(rest)?),
        ExperimentKind::Wishart => Parameters::Wishart(deserialize(rest)?),
        ExperimentKind::Counterexample => Parameters::Counterexample(deserialize(rest)?),
        ExperimentKind::All => Parameters::All(deserialize(rest)?),
    };
    let mut cfg = RunConfig {
        parameters,
        output_dir,
        seed,
        format,
    };
    cfg.set_seed(seed);
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counterexample_example() {
        let cfg = parse_config_with_env(
            r#"{"experiment":"counterexample","dims":[16,64,256],"samples":100000,"seed":7}"#,
            None,
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        match &cfg.parameters {
            Parameters::Counterexample(c) => {
                assert_eq!(c.dims, vec![16, 64, 256]);
                assert_eq!(c.seed, 7);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn kappa_below_one_is_a_validation_error() {
        let err = parse_config_with_env(r#"{"experiment":"theorem","kappas":[0.5]}"#, None).unwrap_err();
        assert!(matches!(err, Error::Validation { ref path, .. } if path == "kappas[0]"), "{err:?}");
    }

    #[test]
    fn unknown_key_names_the_key() {
        let err = parse_config_with_env(r#"{"experiment":"theorem","kapa":[4]}"#, None).unwrap_err();
        match err {
            Error::Schema { message, .. } => assert!(message.contains("kapa"), "{message}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn nested_unknown_key_has_path() {
        let err = parse_config_with_env(r#"{"experiment":"all","wishart":{"trails":100}}"#, None).unwrap_err();
        match err {
            Error::Schema { path, message } => {
                assert!(path.contains("wishart"), "{path}");
                assert!(message.contains("trails"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn seed_precedence() {
        let cfg = parse_config_with_env(r#"{"experiment":"wishart"}"#, Some("9")).unwrap();
        assert_eq!(cfg.seed, 9);
        let cfg = parse_config_with_env(r#"{"experiment":"wishart","seed":3}"#, Some("9")).unwrap();
        assert_eq!(cfg.seed, 3);
        let cfg = parse_config_with_env(r#"{"experiment":"wishart"}"#, None).unwrap();
        assert_eq!(cfg.seed, DEFAULT_SEED);
        assert!(parse_config_with_env(r#"{"experiment":"wishart"}"#, Some("x")).is_err());
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(parse_config_with_env("[1]", None), Err(Error::Schema { .. })));
        assert!(matches!(parse_config_with_env("{", None), Err(Error::Schema { .. })));
        assert!(matches!(parse_config_with_env("{}", None), Err(Error::Schema { .. })));
        assert!(matches!(
            parse_config_with_env(r#"{"experiment":"lemma"}"#, None),
            Err(Error::Schema { .. })
        ));
        assert!(matches!(
            parse_config_with_env(r#"{"experiment":"wishart","trials":"many"}"#, None),
            Err(Error::Schema { .. })
        ));
    }

    #[test]
    fn round_trip() {
        let cfg = parse_config_with_env(
            r#"{"experiment":"all","seed":11,"format":"json","output_dir":"out","theorem":{"dims":[8,16]}}"#,
            None,
        )
        .unwrap();
        let text = serde_json::to_string(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(parse_config_with_env(&text, None).unwrap(), cfg);
    }
}
