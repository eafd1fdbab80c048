use alloc::format;
use alloc::string::String;
use core::fmt;
use core::str::FromStr;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Platform {
    Ios,
    Android,
    Web,
    #[default]
    Unknown,
}

impl Platform {
    pub fn as_str(self) -> &'static str {
        match self {
            Platform::Ios => "ios",
            Platform::Android => "android",
            Platform::Web => "web",
            Platform::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Platform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Platform {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ios" => Ok(Platform::Ios),
            "android" => Ok(Platform::Android),
            "web" => Ok(Platform::Web),
            "unknown" => Ok(Platform::Unknown),
            other => Err(CoreError::InvalidRecord(format!("unknown platform `{other}`"))),
        }
    }
}

/// One screenshot in the repository, traceable to the app it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScreenRecord {
    pub id: String,
    pub app_id: String,
    pub app_url: String,
    pub caption: String,
    pub image_path: String,
    pub platform: Platform,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
}

impl ScreenRecord {
    pub fn validate(&self) -> Result<(), CoreError> {
        if self.id.trim().is_empty() {
            return Err(CoreError::InvalidRecord("id is empty".into()));
        }
        if self.id.len() > u16::MAX as usize {
            return Err(CoreError::InvalidRecord("id longer than 65535 bytes".into()));
        }
        if self.app_id.trim().is_empty() {
            return Err(CoreError::InvalidRecord(format!("record `{}` has an empty app_id", self.id)));
        }
        if self.caption.trim().is_empty() {
            return Err(CoreError::InvalidRecord(format!("record `{}` has an empty caption", self.id)));
        }
        if self.image_path.trim().is_empty() {
            return Err(CoreError::InvalidRecord(format!("record `{}` has an empty image_path", self.id)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec() -> ScreenRecord {
        ScreenRecord {
            id: "s1".into(),
            app_id: "app".into(),
            app_url: "https://example.com/app".into(),
            caption: "Health report".into(),
            image_path: "img/s1.png".into(),
            platform: Platform::Ios,
            category: None,
        }
    }

    #[test]
    fn valid_record_passes() {
        assert!(rec().validate().is_ok());
    }

    #[test]
    fn blank_caption_or_app_rejected() {
        let mut r = rec();
        r.caption = "  \t".into();
        assert!(r.validate().is_err());
        let mut r = rec();
        r.app_id = String::new();
        assert!(r.validate().is_err());
    }

    #[test]
    fn platform_round_trips_through_str() {
        for p in [Platform::Ios, Platform::Android, Platform::Web, Platform::Unknown] {
            assert_eq!(p.as_str().parse::<Platform>().unwrap(), p);
        }
        assert!("windows".parse::<Platform>().is_err());
    }
}
