//! Reader for the KEEL `.dat` format (ARFF-like header followed by
//! comma-separated rows).

use super::{pick_minority, Dataset, FeatureSpec, Schema, Value};
use crate::{Error, Result};

#[derive(Debug)]
struct Attribute {
    name: String,
    categories: Option<Vec<String>>,
}

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn unquote(s: &str) -> &str {
    let s = s.trim();
    for q in ['\'', '"'] {
        if s.len() >= 2 && s.starts_with(q) && s.ends_with(q) {
            return &s[1..s.len() - 1];
        }
    }
    s
}

fn parse_attribute(rest: &str, line: usize) -> Result<Attribute> {
    let rest = rest.trim();
    let (name, tail) = if let Some(q) = rest.chars().next().filter(|c| *c == '\'' || *c == '"') {
        let close = rest[1..]
            .find(q)
            .ok_or_else(|| err(line, "unterminated quoted attribute name"))?;
        (&rest[1..close + 1], &rest[close + 2..])
    } else {
        let end = rest
            .find(|c: char| c.is_whitespace() || c == '{')
            .ok_or_else(|| err(line, "attribute declaration without a type"))?;
        (&rest[..end], &rest[end..])
    };
    let tail = tail.trim();
    if name.is_empty() {
        return Err(err(line, "empty attribute name"));
    }
    if let Some(body) = tail.strip_prefix('{') {
        let body = body
            .strip_suffix('}')
            .ok_or_else(|| err(line, "unterminated category list"))?;
        let categories: Vec<String> = body
            .split(',')
            .map(|c| unquote(c).to_string())
            .filter(|c| !c.is_empty())
            .collect();
        if categories.is_empty() {
            return Err(err(line, format!("attribute `{name}` declares no categories")));
        }
        Ok(Attribute {
            name: name.to_string(),
            categories: Some(categories),
        })
    } else {
        let ty = tail
            .split_whitespace()
            .next()
            .ok_or_else(|| err(line, format!("attribute `{name}` has no type")))?
            .to_ascii_lowercase();
        match ty.as_str() {
            "real" | "integer" | "numeric" => Ok(Attribute {
                name: name.to_string(),
                categories: None,
            }),
            other => Err(err(line, format!("unsupported attribute type `{other}`"))),
        }
    }
}

fn name_list(rest: &str) -> Vec<String> {
    rest.split(',')
        .map(|s| unquote(s).to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

/// Parses a KEEL `.dat` file. The class is the `@outputs` attribute when
/// declared, otherwise the last attribute; `@inputs` selects and orders the
/// features when present.
pub fn parse_keel(text: &str) -> Result<Dataset> {
    let mut relation = String::from("dataset");
    let mut attributes: Vec<Attribute> = Vec::new();
    let mut inputs: Option<Vec<String>> = None;
    let mut outputs: Option<Vec<String>> = None;
    let mut data_start = None;

    let lines: Vec<&str> = text.lines().collect();
    for (idx, raw) in lines.iter().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        if !line.starts_with('@') {
            return Err(err(line_no, "data row before @data"));
        }
        let (keyword, rest) = line
            .split_once(char::is_whitespace)
            .map(|(k, r)| (k, r.trim()))
            .unwrap_or((line, ""));
        match keyword.to_ascii_lowercase().as_str() {
            "@relation" => relation = unquote(rest).to_string(),
            "@attribute" => attributes.push(parse_attribute(rest, line_no)?),
            "@inputs" | "@input" => inputs = Some(name_list(rest)),
            "@outputs" | "@output" => outputs = Some(name_list(rest)),
            "@data" => {
                data_start = Some(idx + 1);
                break;
            }
            other => return Err(err(line_no, format!("unknown header directive `{other}`"))),
        }
    }

    let data_start = data_start.ok_or_else(|| err(lines.len(), "missing @data section"))?;
    if attributes.len() < 2 {
        return Err(err(data_start, "need at least one feature and a class attribute"));
    }
    let find = |name: &str| {
        attributes
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| err(data_start, format!("unknown attribute `{name}` in @inputs/@outputs")))
    };
    let class_idx = match &outputs {
        Some(out) if out.len() == 1 => find(&out[0])?,
        Some(out) => {
            return Err(err(
                data_start,
                format!("expected one output attribute, found {}", out.len()),
            ))
        }
        None => attributes.len() - 1,
    };
    let feature_idx: Vec<usize> = match &inputs {
        Some(names) => names.iter().map(|n| find(n)).collect::<Result<_>>()?,
        None => (0..attributes.len()).filter(|&i| i != class_idx).collect(),
    };
    if feature_idx.contains(&class_idx) {
        return Err(err(data_start, "class attribute listed among inputs"));
    }

    let features = feature_idx
        .iter()
        .map(|&i| {
            let a = &attributes[i];
            match &a.categories {
                None => Ok(FeatureSpec::numeric(a.name.clone())),
                Some(c) => FeatureSpec::categorical(a.name.clone(), c.clone())
                    .map_err(|e| err(data_start, e.to_string())),
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let mut label_counts: Vec<(String, usize)> = attributes[class_idx]
        .categories
        .clone()
        .unwrap_or_default()
        .into_iter()
        .map(|c| (c, 0))
        .collect();
    let mut rows = Vec::new();
    let mut raw_labels = Vec::new();

    for (idx, raw) in lines.iter().enumerate().skip(data_start) {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(unquote).collect();
        if fields.len() != attributes.len() {
            return Err(err(
                line_no,
                format!("expected {} values, found {}", attributes.len(), fields.len()),
            ));
        }
        if fields.iter().any(|f| *f == "?") {
            return Err(err(line_no, "missing values (`?`) are not supported"));
        }
        let mut row = Vec::with_capacity(feature_idx.len());
        for &fi in &feature_idx {
            let field = fields[fi];
            let attr = &attributes[fi];
            let value = match &attr.categories {
                None => Value::Num(field.parse::<f64>().map_err(|_| {
                    err(line_no, format!("`{field}` is not numeric (attribute `{}`)", attr.name))
                })?),
                Some(cats) => Value::Cat(cats.iter().position(|c| c == field).ok_or_else(|| {
                    err(line_no, format!("`{field}` is not a category of `{}`", attr.name))
                })?),
            };
            row.push(value);
        }
        let label = fields[class_idx].to_string();
        match label_counts.iter_mut().find(|(l, _)| *l == label) {
            Some(entry) => entry.1 += 1,
            None if attributes[class_idx].categories.is_some() => {
                return Err(err(line_no, format!("class `{label}` was not declared")))
            }
            None => label_counts.push((label.clone(), 1)),
        }
        rows.push(row);
        raw_labels.push(label);
    }

    if label_counts.len() > 2 {
        let present = label_counts.iter().filter(|(_, c)| *c > 0).count();
        if present > 2 || attributes[class_idx].categories.is_some() {
            return Err(Error::Dataset(format!(
                "{} classes declared; only binary problems are supported",
                label_counts.len()
            )));
        }
    }
    let (positive, negative) = pick_minority(&label_counts)?;
    let labels = raw_labels.iter().map(|l| *l == positive).collect();
    Dataset::new(relation, Schema::new(features), rows, labels, positive, negative)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{class_stats, FeatureKind};

    const SMALL: &str = "@relation toy\n\
        @attribute Sex {M, F, I}\n\
        @attribute Length real [0.0, 1.0]\n\
        @attribute Class {positive, negative}\n\
        @inputs Sex, Length\n\
        @outputs Class\n\
        @data\n\
        M, 0.5, positive\n\
        F, 0.25, negative\n\
        I, 0.75, negative\n";

    #[test]
    fn parses_header_and_rows() {
        let ds = parse_keel(SMALL).unwrap();
        assert_eq!(ds.name, "toy");
        assert_eq!(ds.schema.len(), 2);
        assert!(matches!(ds.schema.features[0].kind, FeatureKind::Categorical { .. }));
        assert_eq!(ds.rows[2], vec![Value::Cat(2), Value::Num(0.75)]);
        assert_eq!(ds.positive_label, "positive");
        assert_eq!(class_stats(&ds), (1, 2, 2.0));
    }

    #[test]
    fn tie_is_broken_by_declaration_order() {
        let text = "@relation t\n@attribute x real\n@attribute c {b, a}\n@data\n\
                    1, a\n2, a\n3, b\n4, b\n";
        let ds = parse_keel(text).unwrap();
        assert_eq!(ds.positive_label, "b");
        assert_eq!(ds.labels, vec![false, false, true, true]);
    }

    #[test]
    fn arity_error_names_line() {
        let text = "@relation t\n@attribute x real\n@attribute c {a, b}\n@data\n1, a\n2\n3, b\n";
        match parse_keel(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 6),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_multiclass_missing_values_and_bad_header() {
        let multi = "@relation t\n@attribute x real\n@attribute c {a, b, z}\n@data\n1, a\n2, b\n3, z\n";
        assert!(matches!(parse_keel(multi), Err(Error::Dataset(_))));
        let missing = "@relation t\n@attribute x real\n@attribute c {a, b}\n@data\n?, a\n2, b\n";
        assert!(matches!(parse_keel(missing), Err(Error::Parse { line: 5, .. })));
        let bad = "@relation t\n@attribute x complex\n@attribute c {a, b}\n@data\n";
        assert!(matches!(parse_keel(bad), Err(Error::Parse { line: 2, .. })));
        assert!(parse_keel("@relation t\n@attribute x real\n").is_err());
    }

    #[test]
    fn outputs_directive_overrides_last_attribute() {
        let text = "@relation t\n@attribute c {p, n}\n@attribute x real\n@inputs x\n@outputs c\n@data\n\
                    p, 1.0\nn, 2.0\nn, 3.0\n";
        let ds = parse_keel(text).unwrap();
        assert_eq!(ds.schema.features[0].name, "x");
        assert_eq!(ds.labels, vec![true, false, false]);
    }

    #[test]
    fn quoted_names_and_integer_types() {
        let text = "@relation 'q r'\n@attribute 'a b' integer [0, 9]\n@attribute 'Class' {x, y}\n@data\n1, x\n2, y\n3,y\n";
        let ds = parse_keel(text).unwrap();
        assert_eq!(ds.name, "q r");
        assert_eq!(ds.schema.features[0].name, "a b");
    }
}
