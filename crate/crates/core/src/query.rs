//! Text queries and the metadata filters applied after retrieval.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use core::fmt;
use core::str::FromStr;
use serde::{Deserialize, Serialize};

use crate::config::DEFAULT_K;
use crate::error::CoreError;
use crate::record::{Platform, ScreenRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterField {
    Platform,
    Category,
}

impl FromStr for FilterField {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "platform" => Ok(FilterField::Platform),
            "category" => Ok(FilterField::Category),
            other => Err(CoreError::InvalidQuery(format!(
                "unknown filter key `{other}` (expected platform or category)"
            ))),
        }
    }
}

impl fmt::Display for FilterField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FilterField::Platform => "platform",
            FilterField::Category => "category",
        })
    }
}

/// Field constraints: a record must match every field, and for a field with
/// several accepted values, any one of them.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Filters(BTreeMap<FilterField, BTreeSet<String>>);

impl Filters {
    pub fn new() -> Self {
        Filters::default()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn add(&mut self, field: FilterField, value: impl Into<String>) -> Result<(), CoreError> {
        let value = value.into();
        if field == FilterField::Platform {
            value.parse::<Platform>().map_err(|_| {
                CoreError::InvalidQuery(format!("unknown platform `{value}` in filter"))
            })?;
        }
        self.0.entry(field).or_default().insert(value);
        Ok(())
    }

    /// Parse one `key=value` pair.
    pub fn add_pair(&mut self, pair: &str) -> Result<(), CoreError> {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| CoreError::InvalidQuery(format!("filter `{pair}` is not key=value")))?;
        self.add(key.trim().parse()?, value.trim())
    }

    pub fn matches(&self, record: &ScreenRecord) -> bool {
        self.matches_fields(record.platform, record.category.as_deref())
    }

    /// Same as [`Filters::matches`] for callers that keep only the
    /// filterable attributes in memory.
    pub fn matches_fields(&self, platform: Platform, category: Option<&str>) -> bool {
        self.0.iter().all(|(field, values)| match field {
            FilterField::Platform => values.contains(platform.as_str()),
            FilterField::Category => category.is_some_and(|c| values.contains(c)),
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (FilterField, &str)> {
        self.0
            .iter()
            .flat_map(|(f, vs)| vs.iter().map(move |v| (*f, v.as_str())))
    }
}

fn default_k() -> usize {
    DEFAULT_K
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub text: String,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default, skip_serializing_if = "Filters::is_empty")]
    pub filters: Filters,
}

impl Query {
    pub fn new(text: impl Into<String>, k: usize) -> Result<Self, CoreError> {
        let q = Query {
            text: text.into(),
            k,
            filters: Filters::new(),
        };
        q.validate()?;
        Ok(q)
    }

    pub fn with_filters(mut self, filters: Filters) -> Self {
        self.filters = filters;
        self
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if self.text.trim().is_empty() {
            return Err(CoreError::InvalidQuery("query text is empty".to_string()));
        }
        if self.k == 0 {
            return Err(CoreError::InvalidQuery("k must be at least 1".to_string()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(platform: Platform, category: Option<&str>) -> ScreenRecord {
        ScreenRecord {
            id: "x".into(),
            app_id: "a".into(),
            app_url: "u".into(),
            caption: "c".into(),
            image_path: "p".into(),
            platform,
            category: category.map(Into::into),
        }
    }

    #[test]
    fn filters_and_across_fields_or_within() {
        let mut f = Filters::new();
        f.add_pair("platform=ios").unwrap();
        f.add_pair("platform=web").unwrap();
        f.add_pair("category=health").unwrap();
        assert!(f.matches(&rec(Platform::Ios, Some("health"))));
        assert!(f.matches(&rec(Platform::Web, Some("health"))));
        assert!(!f.matches(&rec(Platform::Android, Some("health"))));
        assert!(!f.matches(&rec(Platform::Ios, None)));
    }

    #[test]
    fn unknown_key_and_bad_platform_rejected() {
        let mut f = Filters::new();
        assert!(f.add_pair("color=red").is_err());
        assert!(f.add_pair("platform=symbian").is_err());
        assert!(f.add_pair("nokeyvalue").is_err());
    }

    #[test]
    fn query_validation() {
        assert!(Query::new("  ", 3).is_err());
        assert!(Query::new("login", 0).is_err());
        assert!(Query::new("login", 1).is_ok());
    }
}
