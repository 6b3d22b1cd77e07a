//! Line-delimited JSON game logs.
//!
//! One canonical game record per line; keys appear in the order of the
//! [`GameLog`] fields and absent optionals are written as `null`.

use crate::game::{canonicalize, GameError, GameLog, MISSIONS_TO_WIN};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::error::Category;
use std::io::{self, BufRead, Write};
use thiserror::Error;

#[derive(Debug, Copy, Clone, PartialEq, Eq)]
pub enum Strictness {
    /// The first malformed or invalid line aborts the parse.
    Strict,
    /// Malformed or invalid lines are skipped and recorded.
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

/// An ordered collection of valid, canonical games.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GameStream {
    pub games: Vec<GameLog>,
    pub source: String,
    pub parse_errors: Vec<LineError>,
}

impl GameStream {
    pub fn new(source: impl Into<String>, games: Vec<GameLog>) -> Self {
        Self {
            games,
            source: source.into(),
            parse_errors: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.games.len()
    }

    pub fn is_empty(&self) -> bool {
        self.games.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: schema error at `{field}`: {message}")]
    Schema {
        line: usize,
        field: String,
        message: String,
    },
    #[error("line {line}: {source}")]
    Invalid {
        line: usize,
        #[source]
        source: GameError,
    },
}

impl IngestError {
    pub fn line(&self) -> Option<usize> {
        match self {
            IngestError::Io(_) => None,
            IngestError::Schema { line, .. } | IngestError::Invalid { line, .. } => Some(*line),
        }
    }
}

/// A JSON document that is malformed or does not fit the expected schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SchemaError {
    /// Path of the offending field, `.` for the document itself.
    pub field: String,
    pub message: String,
    /// The text is not JSON at all (as opposed to JSON of the wrong shape).
    pub syntax: bool,
}

/// Deserializes a JSON document, reporting the path of the first bad field.
pub fn parse_json_record<T: DeserializeOwned>(text: &str) -> Result<T, SchemaError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|err| {
        let path = err.path().to_string();
        let inner = err.into_inner();
        let syntax = matches!(
            inner.classify(),
            Category::Syntax | Category::Eof | Category::Io
        );
        let message = inner.to_string();
        // serde reports a missing key against its parent object
        let field = match missing_field_name(&message) {
            Some(name) if path == "." => name.to_string(),
            Some(name) => format!("{path}.{name}"),
            None => path,
        };
        SchemaError {
            field,
            message,
            syntax,
        }
    })
}

/// Parses one JSON line into a raw (not yet validated) game log.
pub fn parse_game_line(text: &str, line: usize) -> Result<GameLog, IngestError> {
    parse_json_record(text).map_err(|e| IngestError::Schema {
        line,
        field: e.field,
        message: e.message,
    })
}

fn missing_field_name(message: &str) -> Option<&str> {
    let rest = message.strip_prefix("missing field `")?;
    rest.split('`').next()
}

/// Parses, validates and canonicalizes a stream of game records.
pub fn parse_game_stream<R: BufRead>(
    reader: R,
    strictness: Strictness,
    source: impl Into<String>,
) -> Result<GameStream, IngestError> {
    let mut stream = GameStream::new(source, Vec::new());
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let text = line?;
        if text.trim().is_empty() {
            continue;
        }
        let parsed = parse_game_line(&text, line_no).and_then(|log| {
            canonicalize(&log).map_err(|source| IngestError::Invalid {
                line: line_no,
                source,
            })
        });
        match (parsed, strictness) {
            (Ok(log), _) => stream.games.push(log),
            (Err(err), Strictness::Strict) => return Err(err),
            (Err(err), Strictness::Lenient) => stream.parse_errors.push(LineError {
                line: line_no,
                message: err.to_string(),
            }),
        }
    }
    Ok(stream)
}

pub fn parse_game_bytes(
    bytes: &[u8],
    strictness: Strictness,
    source: &str,
) -> Result<GameStream, IngestError> {
    parse_game_stream(bytes, strictness, source)
}

/// Keeps games in which three missions succeeded and the shot was recorded.
pub fn filter_assassination_eligible(stream: &GameStream) -> GameStream {
    GameStream {
        games: stream
            .games
            .iter()
            .filter(|g| is_eligible(g))
            .cloned()
            .collect(),
        source: stream.source.clone(),
        parse_errors: stream.parse_errors.clone(),
    }
}

pub fn is_eligible(log: &GameLog) -> bool {
    log.succeeded_missions() >= MISSIONS_TO_WIN && log.assassination.is_some()
}

/// Writes one JSON object per line; returns the number of bytes written.
pub fn write_game_stream<W: Write>(stream: &GameStream, mut dest: W) -> Result<u64, IngestError> {
    let mut written = 0u64;
    for game in &stream.games {
        let mut line = serde_json::to_vec(game).map_err(io::Error::from)?;
        line.push(b'\n');
        dest.write_all(&line)?;
        written += line.len() as u64;
    }
    dest.flush()?;
    Ok(written)
}
