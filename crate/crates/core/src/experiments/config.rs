use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::dictionary::Mixing;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    RankSweep,
    RegularVsSingular,
    DictCompare,
    EstimateRlct,
}

impl Study {
    pub fn as_str(self) -> &'static str {
        match self {
            Study::RankSweep => "rank_sweep",
            Study::RegularVsSingular => "regular_vs_singular",
            Study::DictCompare => "dict_compare",
            Study::EstimateRlct => "estimate_rlct",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Study::RankSweep, Study::RegularVsSingular, Study::DictCompare, Study::EstimateRlct]
            .into_iter()
            .find(|st| st.as_str() == s)
    }
}

impl fmt::Display for Study {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Everything a study run depends on.
///
/// For `dict_compare`, `d` is the column count of the overcomplete
/// dictionary and `ranks` holds the single span dimension `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub study: Study,
    pub d: usize,
    pub p: usize,
    pub ranks: Vec<usize>,
    pub sigma2: f64,
    pub tau2: f64,
    pub n_grid: Vec<usize>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// Sample size of the single-dataset dictionary table.
    pub table_n: usize,
    pub dictionary_mixing: Mixing,
}

/// Fields whose value is a list.
pub const LIST_FIELDS: [&str; 3] = ["ranks", "n_grid", "seeds"];

pub fn default_n_grid() -> Vec<usize> {
    (0..=8).map(|k| 50usize << k).collect()
}

impl ExperimentConfig {
    pub fn defaults_for(study: Study) -> Self {
        let (p, ranks) = match study {
            Study::RankSweep | Study::EstimateRlct => (6, (1..=6).collect()),
            Study::RegularVsSingular => (6, vec![4, 6]),
            Study::DictCompare => (8, vec![3]),
        };
        Self {
            study,
            d: 6,
            p,
            ranks,
            sigma2: 1.0,
            tau2: 1.0,
            n_grid: default_n_grid(),
            seeds: (0..20).collect(),
            output_dir: PathBuf::from("results"),
            table_n: 200,
            dictionary_mixing: Mixing::RowOrthonormal,
        }
    }

    pub fn field_names() -> Vec<&'static str> {
        vec![
            "study",
            "d",
            "p",
            "ranks",
            "sigma2",
            "tau2",
            "n_grid",
            "seeds",
            "output_dir",
            "table_n",
            "dictionary_mixing",
        ]
    }

    /// Study defaults, then the JSON document on top. Unknown keys and a
    /// `study` that disagrees with the requested one are config errors.
    pub fn from_json_str(study: Study, text: &str) -> Result<Self> {
        let doc: Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config is not valid JSON: {e}")))?;
        let Value::Object(fields) = doc else {
            return Err(Error::Config("config must be a JSON object".into()));
        };
        Self::defaults_for(study).merged(fields.into_iter().collect())
    }

    /// Applies `(key, value)` pairs with the same rules as a config file.
    pub fn with_overrides(self, pairs: Vec<(String, Value)>) -> Result<Self> {
        self.merged(pairs)
    }

    fn merged(self, pairs: Vec<(String, Value)>) -> Result<Self> {
        let known = Self::field_names();
        let study = self.study;
        let Value::Object(mut base) = serde_json::to_value(&self)? else {
            unreachable!("config serializes to an object")
        };
        for (key, value) in pairs {
            if !known.contains(&key.as_str()) {
                return Err(Error::Config(format!("unknown config key `{key}`")));
            }
            if key == "study" && value != Value::String(study.as_str().into()) {
                return Err(Error::Config(format!("config is for study {value}, but {study} was requested")));
            }
            base.insert(key, value);
        }
        let cfg: Self = serde_json::from_value(Value::Object(Map::from_iter(base)))
            .map_err(|e| Error::Config(format!("bad config value: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.d == 0 || self.p == 0 {
            return fail(format!("d and p must be positive (d={}, p={})", self.d, self.p));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite() && self.tau2 > 0.0 && self.tau2.is_finite()) {
            return fail(format!("sigma2 and tau2 must be positive (sigma2={}, tau2={})", self.sigma2, self.tau2));
        }
        if self.ranks.is_empty() {
            return fail("ranks must not be empty".into());
        }
        if self.n_grid.len() < 2 {
            return fail(format!("n_grid needs at least 2 points, got {}", self.n_grid.len()));
        }
        if self.n_grid.iter().any(|&n| n < 2) {
            return fail("every n_grid entry must be >= 2".into());
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return fail("n_grid must be strictly increasing".into());
        }
        if self.seeds.is_empty() {
            return fail("at least one seed is required".into());
        }
        if self.table_n < 2 {
            return fail(format!("table_n must be >= 2, got {}", self.table_n));
        }
        match self.study {
            Study::DictCompare => {
                let [r] = self.ranks[..] else {
                    return fail(format!("dict_compare takes exactly one rank, got {:?}", self.ranks));
                };
                if r == 0 || r > self.p || r >= self.d {
                    return fail(format!(
                        "dict_compare needs 0 < r <= p and r < d (r={r}, p={}, d={})",
                        self.p, self.d
                    ));
                }
            }
            _ => {
                let limit = self.p.min(self.d);
                if let Some(r) = self.ranks.iter().find(|&&r| r == 0 || r > limit) {
                    return fail(format!("rank {r} outside 1..={limit}"));
                }
                let mut sorted = self.ranks.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() != self.ranks.len() {
                    return fail(format!("ranks must be distinct, got {:?}", self.ranks));
                }
                if self.study == Study::RegularVsSingular
                    && (self.ranks.len() != 2 || !self.ranks.contains(&self.d))
                {
                    return fail(format!(
                        "regular_vs_singular needs two ranks, one equal to d={} (got {:?})",
                        self.d, self.ranks
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config always serializes")
    }

    /// SHA-256 of the compact JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config always serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn defaults_validate() {
        for st in [Study::RankSweep, Study::RegularVsSingular, Study::DictCompare, Study::EstimateRlct] {
            ExperimentConfig::defaults_for(st).validate().unwrap();
        }
        assert_eq!(default_n_grid(), vec![50, 100, 200, 400, 800, 1600, 3200, 6400, 12800]);
    }

    #[test]
    fn json_merges_over_defaults() {
        let cfg = ExperimentConfig::from_json_str(Study::RankSweep, r#"{"ranks": [2, 3], "sigma2": 0.5}"#).unwrap();
        assert_eq!(cfg.ranks, vec![2, 3]);
        assert_eq!(cfg.sigma2, 0.5);
        assert_eq!(cfg.d, 6);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = ExperimentConfig::from_json_str(Study::RankSweep, r#"{"rank": [2]}"#).unwrap_err();
        assert!(matches!(err, Error::Config(m) if m.contains("rank")));
    }

    #[test]
    fn study_mismatch_rejected() {
        assert!(ExperimentConfig::from_json_str(Study::RankSweep, r#"{"study": "dict_compare"}"#).is_err());
        assert!(ExperimentConfig::from_json_str(Study::RankSweep, r#"{"study": "rank_sweep"}"#).is_ok());
    }

    #[test]
    fn invalid_values_rejected() {
        let base = ExperimentConfig::defaults_for(Study::RankSweep);
        let cases = vec![
            ("ranks", json!([7])),
            ("ranks", json!([])),
            ("n_grid", json!([100, 50])),
            ("n_grid", json!([1, 50])),
            ("n_grid", json!([50])),
            ("seeds", json!([])),
            ("sigma2", json!(0.0)),
            ("d", json!("six")),
        ];
        for (k, v) in cases {
            assert!(base.clone().with_overrides(vec![(k.into(), v.clone())]).is_err(), "{k}={v}");
        }
    }

    #[test]
    fn regular_vs_singular_needs_regular_rank() {
        let base = ExperimentConfig::defaults_for(Study::RegularVsSingular);
        assert!(base.clone().with_overrides(vec![("ranks".into(), json!([2, 4]))]).is_err());
        assert!(base.with_overrides(vec![("ranks".into(), json!([2, 6]))]).is_ok());
    }

    #[test]
    fn json_round_trip_and_hash() {
        let cfg = ExperimentConfig::defaults_for(Study::DictCompare);
        let back = ExperimentConfig::from_json_str(Study::DictCompare, &cfg.to_json_pretty()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert_eq!(cfg.hash().len(), 64);
        assert_ne!(cfg.hash(), ExperimentConfig::defaults_for(Study::RankSweep).hash());
    }
}
