//! Readers for answer corpora: the Stack Exchange `Posts.xml` dump and JSON Lines.

use std::io::{BufRead, Write};

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::markup::RawAnswer;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("xml error at byte {position}: {message}")]
    Xml { position: u64, message: String },
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// Streams answer rows (`PostTypeId="2"`) out of a `Posts.xml` dump.
pub struct PostsXmlReader<R: BufRead> {
    reader: Reader<R>,
    buf: Vec<u8>,
    done: bool,
}

impl<R: BufRead> PostsXmlReader<R> {
    pub fn new(input: R) -> Self {
        let mut reader = Reader::from_reader(input);
        reader.config_mut().trim_text(true);
        PostsXmlReader {
            reader,
            buf: Vec::new(),
            done: false,
        }
    }

    fn xml_error(&self, message: impl ToString) -> IngestError {
        IngestError::Xml {
            position: self.reader.buffer_position(),
            message: message.to_string(),
        }
    }

    fn answer_from_row(&self, row: &BytesStart<'_>) -> Result<Option<RawAnswer>, IngestError> {
        let mut id = None;
        let mut post_type = None;
        let mut body = None;
        for attr in row.attributes() {
            let attr = attr.map_err(|e| self.xml_error(e))?;
            match attr.key.as_ref() {
                b"Id" => {
                    let v = attr.unescape_value().map_err(|e| self.xml_error(e))?;
                    id = Some(v.parse::<u64>().map_err(|e| self.xml_error(e))?);
                }
                b"PostTypeId" => {
                    post_type = Some(attr.unescape_value().map_err(|e| self.xml_error(e))?.into_owned())
                }
                b"Body" => body = Some(attr.unescape_value().map_err(|e| self.xml_error(e))?.into_owned()),
                _ => {}
            }
        }
        if post_type.as_deref() != Some("2") {
            return Ok(None);
        }
        match id {
            Some(post_id) => Ok(Some(RawAnswer {
                post_id,
                body: body.unwrap_or_default(),
            })),
            None => Err(self.xml_error("answer row without Id")),
        }
    }
}

impl<R: BufRead> Iterator for PostsXmlReader<R> {
    type Item = Result<RawAnswer, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            self.buf.clear();
            let event = match self.reader.read_event_into(&mut self.buf) {
                Ok(ev) => ev.into_owned(),
                Err(e) => {
                    self.done = true;
                    return Some(Err(self.xml_error(e)));
                }
            };
            match event {
                Event::Empty(row) | Event::Start(row) if row.name().as_ref() == b"row" => {
                    match self.answer_from_row(&row) {
                        Ok(Some(answer)) => return Some(Ok(answer)),
                        Ok(None) => {}
                        Err(e) => return Some(Err(e)),
                    }
                }
                Event::Eof => self.done = true,
                _ => {}
            }
        }
        None
    }
}

/// Iterates JSON Lines records, skipping blank lines.
pub fn read_jsonl<T: DeserializeOwned, R: BufRead>(
    input: R,
) -> impl Iterator<Item = Result<T, IngestError>> {
    input
        .lines()
        .enumerate()
        .filter_map(|(idx, line)| match line {
            Err(e) => Some(Err(IngestError::Io(e))),
            Ok(l) if l.trim().is_empty() => None,
            Ok(l) => Some(serde_json::from_str(&l).map_err(|source| IngestError::Json {
                line: idx + 1,
                source,
            })),
        })
}

pub fn write_jsonl<T: Serialize, W: Write>(
    mut out: W,
    records: impl IntoIterator<Item = T>,
) -> Result<(), IngestError> {
    for record in records {
        serde_json::to_writer(&mut out, &record).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}
