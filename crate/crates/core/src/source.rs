use std::path::Path;

use serde::{Deserialize, Serialize};

/// A PuzzleScript program as text, tagged with where it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceText {
    content: String,
    pub origin: String,
}

impl SourceText {
    /// Line endings are normalized to LF.
    pub fn new(content: impl Into<String>, origin: impl Into<String>) -> Self {
        let content: String = content.into();
        let content = if content.contains('\r') {
            content.replace("\r\n", "\n").replace('\r', "\n")
        } else {
            content
        };
        Self {
            content,
            origin: origin.into(),
        }
    }

    /// Invalid UTF-8 sequences are replaced rather than rejected.
    pub fn from_bytes(bytes: &[u8], origin: impl Into<String>) -> Self {
        Self::new(String::from_utf8_lossy(bytes).into_owned(), origin)
    }

    pub fn read(path: &Path) -> std::io::Result<Self> {
        let bytes = std::fs::read(path)?;
        Ok(Self::from_bytes(&bytes, path.display().to_string()))
    }

    pub fn content(&self) -> &str {
        &self.content
    }

    pub fn into_content(self) -> String {
        self.content
    }
}
