//! Line-oriented structured text: `[section]` headers with `key = value`
//! entries, `#` comments, repeated keys allowed. Shared by the robot, scene,
//! and benchmark config formats.

use nalgebra::Vector3;

use super::ModelError;

#[derive(Debug, Clone)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

#[derive(Debug, Clone)]
pub struct Document {
    pub path: String,
    pub sections: Vec<Section>,
}

impl Document {
    pub fn parse(path: &str, text: &str) -> Result<Document, ModelError> {
        let mut sections: Vec<Section> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| ModelError::Parse {
                    path: path.into(),
                    line: line_no,
                    message: "unterminated section header".into(),
                })?;
                sections.push(Section {
                    name: name.trim().to_string(),
                    line: line_no,
                    entries: Vec::new(),
                });
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ModelError::Parse {
                path: path.into(),
                line: line_no,
                message: format!("expected 'key = value', got '{line}'"),
            })?;
            let section = sections.last_mut().ok_or_else(|| ModelError::Parse {
                path: path.into(),
                line: line_no,
                message: "entry before any [section] header".into(),
            })?;
            section.entries.push(Entry {
                key: key.trim().to_string(),
                value: value.trim().to_string(),
                line: line_no,
            });
        }
        Ok(Document {
            path: path.into(),
            sections,
        })
    }

    pub fn sections_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Section> {
        self.sections.iter().filter(move |s| s.name == name)
    }

    pub fn error(&self, line: usize, message: impl Into<String>) -> ModelError {
        ModelError::Parse {
            path: self.path.clone(),
            line,
            message: message.into(),
        }
    }
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    pub fn values<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a Entry> {
        self.entries.iter().filter(move |e| e.key == key)
    }

    pub fn require<'a>(&'a self, doc: &Document, key: &str) -> Result<&'a Entry, ModelError> {
        self.get(key)
            .ok_or_else(|| doc.error(self.line, format!("[{}] is missing key '{key}'", self.name)))
    }
}

pub fn parse_f64(doc: &Document, entry: &Entry) -> Result<f64, ModelError> {
    entry
        .value
        .parse::<f64>()
        .map_err(|_| doc.error(entry.line, format!("'{}' is not a number", entry.value)))
}

pub fn parse_usize(doc: &Document, entry: &Entry) -> Result<usize, ModelError> {
    entry
        .value
        .parse::<usize>()
        .map_err(|_| doc.error(entry.line, format!("'{}' is not an integer", entry.value)))
}

pub fn parse_floats(doc: &Document, entry: &Entry) -> Result<Vec<f64>, ModelError> {
    entry
        .value
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| doc.error(entry.line, format!("'{tok}' is not a number")))
        })
        .collect()
}

pub fn parse_vec3(doc: &Document, entry: &Entry) -> Result<Vector3<f64>, ModelError> {
    let v = parse_floats(doc, entry)?;
    if v.len() != 3 {
        return Err(doc.error(entry.line, format!("expected 3 numbers, got {}", v.len())));
    }
    Ok(Vector3::new(v[0], v[1], v[2]))
}

/// Six numbers: translation followed by a rotation vector.
pub fn parse_pose(doc: &Document, entry: &Entry) -> Result<(Vector3<f64>, Vector3<f64>), ModelError> {
    let v = parse_floats(doc, entry)?;
    if v.len() != 6 {
        return Err(doc.error(entry.line, format!("expected 6 numbers, got {}", v.len())));
    }
    Ok((
        Vector3::new(v[0], v[1], v[2]),
        Vector3::new(v[3], v[4], v[5]),
    ))
}
