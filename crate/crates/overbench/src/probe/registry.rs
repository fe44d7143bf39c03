use std::collections::HashMap;

use crate::error::{Error, Result};

/// Maps signature text to dense integer ids starting at 0.
///
/// Populated before producers start and read-only afterwards; ids are
/// assigned on first registration and stable from then on.
#[derive(Debug, Default, Clone)]
pub struct StringRegistry {
    by_text: HashMap<String, i32>,
    by_id: Vec<String>,
}

impl StringRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the existing id for `signature`, or assigns the next dense id.
    pub fn register_signature(&mut self, signature: &str) -> Result<i32> {
        if signature.is_empty() {
            return Err(Error::InvalidConfig("signature must be non-empty".into()));
        }
        if let Some(&id) = self.by_text.get(signature) {
            return Ok(id);
        }
        let id = self.by_id.len() as i32;
        self.by_text.insert(signature.to_owned(), id);
        self.by_id.push(signature.to_owned());
        Ok(id)
    }

    pub fn lookup(&self, signature: &str) -> Option<i32> {
        self.by_text.get(signature).copied()
    }

    pub fn resolve(&self, id: i32) -> Option<&str> {
        usize::try_from(id).ok().and_then(|i| self.by_id.get(i)).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }

    /// Entries in id order, for embedding into a trace file.
    pub fn entries(&self) -> impl Iterator<Item = (i32, &str)> {
        self.by_id.iter().enumerate().map(|(i, s)| (i as i32, s.as_str()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_registration_gets_zero() {
        let mut reg = StringRegistry::new();
        assert_eq!(reg.register_signature("monitoredMethod").unwrap(), 0);
    }

    #[test]
    fn re_registration_is_idempotent() {
        let mut reg = StringRegistry::new();
        let a = reg.register_signature("monitoredMethod").unwrap();
        let b = reg.register_signature("monitoredMethod").unwrap();
        assert_eq!(a, b);
        assert_eq!(reg.len(), 1);
    }

    #[test]
    fn distinct_texts_get_dense_ids() {
        let mut reg = StringRegistry::new();
        assert_eq!(reg.register_signature("a").unwrap(), 0);
        assert_eq!(reg.register_signature("b").unwrap(), 1);
        assert_eq!(reg.resolve(1), Some("b"));
        assert_eq!(reg.resolve(2), None);
    }

    #[test]
    fn empty_signature_rejected() {
        let mut reg = StringRegistry::new();
        assert!(reg.register_signature("").is_err());
    }
}
