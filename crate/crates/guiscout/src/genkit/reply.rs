//! Parsing model replies into sections and HTML.

use super::UiSection;

/// Render sections in the same line-structured form the refine step asks
/// the model to reply with.
pub fn render_sections(sections: &[UiSection]) -> String {
    let mut out = String::new();
    for s in sections {
        out.push_str(&format!("[section] {}\n[description] {}\n[code]\n", s.name, s.description));
        if !s.code_example.is_empty() {
            out.push_str(s.code_example.trim_end_matches('\n'));
            out.push('\n');
        }
        out.push_str("[end]\n");
    }
    out
}

/// Lines of the first fenced block opened by "```" + `tag`.
fn fenced<'a>(text: &'a str, tag: &str) -> Option<Vec<&'a str>> {
    let mut lines = text.lines();
    lines.by_ref().find(|l| l.trim() == format!("```{tag}"))?;
    let mut body = Vec::new();
    for l in lines {
        if l.trim() == "```" {
            return Some(body);
        }
        body.push(l);
    }
    None
}

/// Extract sections from a refine reply. Errors describe what is missing.
pub fn parse_sections(reply: &str) -> Result<Vec<UiSection>, String> {
    let body = fenced(reply, "sections").ok_or("no ```sections fenced block")?;
    let mut sections = Vec::new();
    let mut iter = body.into_iter().peekable();
    while let Some(line) = iter.next() {
        if line.trim().is_empty() {
            continue;
        }
        let name = line
            .strip_prefix("[section]")
            .map(str::trim)
            .ok_or_else(|| format!("expected [section], found `{line}`"))?;
        if name.is_empty() {
            return Err("section with empty name".into());
        }
        let desc_line = iter.next().ok_or_else(|| format!("section `{name}` has no [description]"))?;
        let description = desc_line
            .strip_prefix("[description]")
            .map(str::trim)
            .ok_or_else(|| format!("section `{name}`: expected [description], found `{desc_line}`"))?;
        match iter.next() {
            Some(l) if l.trim() == "[code]" => {}
            _ => return Err(format!("section `{name}` has no [code]")),
        }
        let mut code = Vec::new();
        loop {
            match iter.next() {
                Some(l) if l.trim() == "[end]" => break,
                Some(l) => code.push(l),
                None => return Err(format!("section `{name}` is missing [end]")),
            }
        }
        sections.push(UiSection {
            name: name.to_string(),
            description: description.to_string(),
            code_example: code.join("\n"),
        });
    }
    if sections.is_empty() {
        return Err("sections block is empty".into());
    }
    Ok(sections)
}

/// The HTML inside a ```html block, else inside the first fenced block,
/// else the whole reply. Trimmed.
pub fn extract_html(reply: &str) -> String {
    if let Some(body) = fenced(reply, "html") {
        return body.join("\n").trim().to_string();
    }
    let mut lines = reply.lines();
    if lines.by_ref().any(|l| l.trim_start().starts_with("```")) {
        let body: Vec<&str> = lines.take_while(|l| l.trim() != "```").collect();
        return body.join("\n").trim().to_string();
    }
    reply.trim().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_sections_verbatim() {
        let reply = "Sure!\n```sections\n[section] header section\n[description] Title bar\n[code]\n<header>\n  <h1>Hi</h1>\n</header>\n[end]\n\n[section] footer section\n[description] Links\n[code]\n<footer></footer>\n[end]\n```\n";
        let s = parse_sections(reply).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].name, "header section");
        assert_eq!(s[0].description, "Title bar");
        assert_eq!(s[0].code_example, "<header>\n  <h1>Hi</h1>\n</header>");
        assert_eq!(s[1].name, "footer section");
    }

    #[test]
    fn render_then_parse_round_trips() {
        let s = vec![UiSection {
            name: "charts section".into(),
            description: "Heart rate trend".into(),
            code_example: "<canvas id=\"hr\"></canvas>".into(),
        }];
        let reply = format!("```sections\n{}```\n", render_sections(&s));
        assert_eq!(parse_sections(&reply).unwrap(), s);
    }

    #[test]
    fn malformed_replies_explain_themselves() {
        assert!(parse_sections("just prose").is_err());
        assert!(parse_sections("```sections\n```").is_err());
        assert!(parse_sections("```sections\n[section] a\n[code]\nx\n[end]\n```").is_err());
        assert!(parse_sections("```sections\n[section] a\n[description] d\n[code]\nx\n```").is_err());
        assert!(parse_sections("```sections\n[section] \n[description] d\n[code]\n[end]\n```").is_err());
    }

    #[test]
    fn html_extraction() {
        assert_eq!(extract_html("```html\n<p>x</p>\n```"), "<p>x</p>");
        assert_eq!(extract_html("text\n```\n<p>y</p>\n```\nmore"), "<p>y</p>");
        assert_eq!(extract_html("  <p>z</p>\n"), "<p>z</p>");
        assert_eq!(extract_html("   "), "");
    }
}
