//! Versioned prompt templates shipped in `templates/`.
//!
//! A template has `#` comment lines, then a `[system]` part and a `[user]`
//! part. `{slot}` markers are replaced verbatim.

use super::{ChatMessage, GenError};

pub const REFINE_V1: &str = include_str!("../../templates/refine.v1.txt");
pub const CODE_V1: &str = include_str!("../../templates/code.v1.txt");
pub const ADJUST_V1: &str = include_str!("../../templates/adjust.v1.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    system: String,
    user: String,
}

impl Template {
    pub fn parse(text: &str) -> Result<Self, GenError> {
        let body: String = text
            .lines()
            .skip_while(|l| l.starts_with('#'))
            .collect::<Vec<_>>()
            .join("\n");
        let rest = body
            .strip_prefix("[system]\n")
            .ok_or_else(|| GenError::Template("template must start with [system]".into()))?;
        let (system, user) = rest
            .split_once("\n[user]\n")
            .ok_or_else(|| GenError::Template("template has no [user] part".into()))?;
        Ok(Template {
            system: system.trim_end().to_string(),
            user: user.trim_end().to_string(),
        })
    }

    pub fn render(&self, slots: &[(&str, &str)]) -> Vec<ChatMessage> {
        let fill = |s: &str| {
            slots
                .iter()
                .fold(s.to_string(), |acc, (k, v)| acc.replace(&format!("{{{k}}}"), v))
        };
        vec![
            ChatMessage::new("system", fill(&self.system)),
            ChatMessage::new("user", fill(&self.user)),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct Templates {
    pub refine: Template,
    pub code: Template,
    pub adjust: Template,
}

impl Templates {
    pub fn builtin() -> Self {
        Templates {
            refine: Template::parse(REFINE_V1).expect("bundled refine template"),
            code: Template::parse(CODE_V1).expect("bundled code template"),
            adjust: Template::parse(ADJUST_V1).expect("bundled adjust template"),
        }
    }
}
