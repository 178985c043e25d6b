//! A small Jinja-style template engine: `{{ var }}`, `{{ loop.index }}`,
//! `{% if var %}…{% else %}…{% endif %}` and `{% for x in list %}…{% endfor %}`.
//! A line holding nothing but a block tag is dropped from the output.

use std::collections::BTreeMap;

use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("template variable `{0}` is not defined")]
    MissingVariable(String),
    #[error("template syntax error at byte {at}: {message}")]
    Syntax { at: usize, message: String },
    #[error("`{0}` is not a list")]
    NotAList(String),
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Text(String),
    Var(String),
    If {
        cond: String,
        then: Vec<Node>,
        otherwise: Vec<Node>,
    },
    For {
        item: String,
        list: String,
        body: Vec<Node>,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Text(String),
    Var(String),
    Tag(usize, String),
}

/// Drops lines that consist solely of one `{% … %}` tag, keeping the tag.
fn trim_block_lines(src: &str) -> String {
    let mut out = String::with_capacity(src.len());
    for line in src.split_inclusive('\n') {
        let t = line.trim();
        if t.starts_with("{%") && t.ends_with("%}") && t.matches("{%").count() == 1 {
            out.push_str(t);
        } else {
            out.push_str(line);
        }
    }
    out
}

fn tokenize(src: &str) -> Result<Vec<Token>, TemplateError> {
    let mut out = Vec::new();
    let mut rest = src;
    let mut offset = 0;
    loop {
        let next = [rest.find("{{"), rest.find("{%")]
            .into_iter()
            .flatten()
            .min();
        let Some(i) = next else {
            if !rest.is_empty() {
                out.push(Token::Text(rest.to_string()));
            }
            return Ok(out);
        };
        if i > 0 {
            out.push(Token::Text(rest[..i].to_string()));
        }
        let close = if rest[i..].starts_with("{{") {
            "}}"
        } else {
            "%}"
        };
        let Some(j) = rest[i + 2..].find(close) else {
            return Err(TemplateError::Syntax {
                at: offset + i,
                message: format!("unclosed tag, expected `{close}`"),
            });
        };
        let inner = rest[i + 2..i + 2 + j].trim().to_string();
        out.push(if close == "}}" {
            Token::Var(inner)
        } else {
            Token::Tag(offset + i, inner)
        });
        let consumed = i + 2 + j + 2;
        offset += consumed;
        rest = &rest[consumed..];
    }
}

fn syntax(at: usize, message: impl Into<String>) -> TemplateError {
    TemplateError::Syntax {
        at,
        message: message.into(),
    }
}

fn is_ident_path(s: &str) -> bool {
    !s.is_empty()
        && s.split('.')
            .all(|p| !p.is_empty() && p.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'))
}

/// Parses until one of `stops` is met; returns the nodes and the stop tag.
fn parse(
    tokens: &mut std::iter::Peekable<std::vec::IntoIter<Token>>,
    stops: &[&str],
) -> Result<(Vec<Node>, Option<(usize, String)>), TemplateError> {
    let mut nodes = Vec::new();
    while let Some(tok) = tokens.next() {
        match tok {
            Token::Text(t) => nodes.push(Node::Text(t)),
            Token::Var(v) => {
                if !is_ident_path(&v) {
                    return Err(syntax(0, format!("bad variable expression `{v}`")));
                }
                nodes.push(Node::Var(v))
            }
            Token::Tag(at, tag) => {
                let words: Vec<&str> = tag.split_whitespace().collect();
                match words.as_slice() {
                    [w] if stops.contains(w) => return Ok((nodes, Some((at, w.to_string())))),
                    ["if", cond] if is_ident_path(cond) => {
                        let (then, stop) = parse(tokens, &["else", "endif"])?;
                        let otherwise = match stop {
                            Some((_, s)) if s == "else" => {
                                let (o, stop) = parse(tokens, &["endif"])?;
                                if stop.is_none() {
                                    return Err(syntax(at, "unterminated if"));
                                }
                                o
                            }
                            Some(_) => Vec::new(),
                            None => return Err(syntax(at, "unterminated if")),
                        };
                        nodes.push(Node::If {
                            cond: cond.to_string(),
                            then,
                            otherwise,
                        });
                    }
                    ["for", item, "in", list] if is_ident_path(item) && is_ident_path(list) => {
                        let (body, stop) = parse(tokens, &["endfor"])?;
                        if stop.is_none() {
                            return Err(syntax(at, "unterminated for"));
                        }
                        nodes.push(Node::For {
                            item: item.to_string(),
                            list: list.to_string(),
                            body,
                        });
                    }
                    _ => return Err(syntax(at, format!("unexpected tag `{tag}`"))),
                }
            }
        }
    }
    Ok((nodes, None))
}

/// A parsed template.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    nodes: Vec<Node>,
}

impl Template {
    pub fn parse(src: &str) -> Result<Self, TemplateError> {
        let mut tokens = tokenize(&trim_block_lines(src))?.into_iter().peekable();
        match parse(&mut tokens, &[])? {
            (nodes, None) => Ok(Self { nodes }),
            (_, Some((at, tag))) => Err(syntax(at, format!("unexpected `{tag}`"))),
        }
    }

    pub fn render(&self, vars: &BTreeMap<String, Value>) -> Result<String, TemplateError> {
        let mut scopes = vec![vars.clone()];
        let mut out = String::new();
        render(&self.nodes, &mut scopes, &mut out)?;
        Ok(out)
    }
}

fn lookup<'a>(
    scopes: &'a [BTreeMap<String, Value>],
    path: &str,
) -> Result<&'a Value, TemplateError> {
    let mut parts = path.split('.');
    let head = parts.next().unwrap_or_default();
    let mut v = scopes
        .iter()
        .rev()
        .find_map(|s| s.get(head))
        .ok_or_else(|| TemplateError::MissingVariable(path.to_string()))?;
    for p in parts {
        v = v
            .get(p)
            .ok_or_else(|| TemplateError::MissingVariable(path.to_string()))?;
    }
    Ok(v)
}

fn truthy(v: &Value) -> bool {
    match v {
        Value::Null => false,
        Value::Bool(b) => *b,
        Value::Number(n) => n.as_f64() != Some(0.0),
        Value::String(s) => !s.is_empty(),
        Value::Array(a) => !a.is_empty(),
        Value::Object(o) => !o.is_empty(),
    }
}

fn render(
    nodes: &[Node],
    scopes: &mut Vec<BTreeMap<String, Value>>,
    out: &mut String,
) -> Result<(), TemplateError> {
    for node in nodes {
        match node {
            Node::Text(t) => out.push_str(t),
            Node::Var(path) => match lookup(scopes, path)? {
                Value::String(s) => out.push_str(s),
                Value::Null => {}
                other => out.push_str(&other.to_string()),
            },
            Node::If {
                cond,
                then,
                otherwise,
            } => {
                let branch = if truthy(lookup(scopes, cond)?) {
                    then
                } else {
                    otherwise
                };
                render(branch, scopes, out)?;
            }
            Node::For { item, list, body } => {
                let items = match lookup(scopes, list)? {
                    Value::Array(a) => a.clone(),
                    _ => return Err(TemplateError::NotAList(list.clone())),
                };
                let n = items.len();
                for (k, v) in items.into_iter().enumerate() {
                    let mut scope = BTreeMap::new();
                    scope.insert(item.clone(), v);
                    scope.insert(
                        "loop".to_string(),
                        serde_json::json!({ "index": k + 1, "index0": k, "first": k == 0, "last": k + 1 == n }),
                    );
                    scopes.push(scope);
                    let r = render(body, scopes, out);
                    scopes.pop();
                    r?;
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn vars(v: Value) -> BTreeMap<String, Value> {
        serde_json::from_value(v).unwrap()
    }

    #[test]
    fn substitution_and_blocks() {
        let t = Template::parse("a {{ x }} b\n{% if y %}\nY={{ y }}\n{% endif %}\nend\n").unwrap();
        assert_eq!(
            t.render(&vars(json!({"x": "1", "y": "2"}))).unwrap(),
            "a 1 b\nY=2\nend\n"
        );
        assert_eq!(
            t.render(&vars(json!({"x": 3, "y": null}))).unwrap(),
            "a 3 b\nend\n"
        );
    }

    #[test]
    fn loops() {
        let t = Template::parse(
            "plan:\n{% for item in xs %}\n    {{ loop.index }}. {{ item }}\n{% endfor %}\ndone",
        )
        .unwrap();
        assert_eq!(
            t.render(&vars(json!({"xs": ["a", "b"]}))).unwrap(),
            "plan:\n    1. a\n    2. b\ndone"
        );
        assert_eq!(t.render(&vars(json!({"xs": []}))).unwrap(), "plan:\ndone");
    }

    #[test]
    fn else_branch() {
        let t = Template::parse("{% if a %}A{% else %}B{% endif %}").unwrap();
        assert_eq!(t.render(&vars(json!({"a": ""}))).unwrap(), "B");
    }

    #[test]
    fn errors() {
        let t = Template::parse("{{ nope }}").unwrap();
        assert_eq!(
            t.render(&BTreeMap::new()),
            Err(TemplateError::MissingVariable("nope".into()))
        );
        assert!(matches!(
            Template::parse("{% if a %}x"),
            Err(TemplateError::Syntax { .. })
        ));
        assert!(matches!(
            Template::parse("{{ a"),
            Err(TemplateError::Syntax { .. })
        ));
        assert!(matches!(
            Template::parse("{% endfor %}"),
            Err(TemplateError::Syntax { .. })
        ));
        let t = Template::parse("{% for i in s %}{% endfor %}").unwrap();
        assert_eq!(
            t.render(&vars(json!({"s": "x"}))),
            Err(TemplateError::NotAList("s".into()))
        );
    }

    #[test]
    fn plain_json_braces_pass_through() {
        let src = "{\"a\": {\"b\": 1} }\n";
        assert_eq!(
            Template::parse(src)
                .unwrap()
                .render(&BTreeMap::new())
                .unwrap(),
            src
        );
    }
}
