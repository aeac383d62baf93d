use std::cell::RefCell;
use std::collections::HashSet;
use std::fmt;

use serde::de::{DeserializeSeed, Deserializer, MapAccess, SeqAccess, Visitor};

use crate::error::{Error, Result};

/// Paths of object keys that occur more than once, in document order.
pub fn duplicate_keys(text: &str) -> Result<Vec<String>> {
    let out = RefCell::new(Vec::new());
    let mut de = serde_json::Deserializer::from_str(text);
    Seed { path: String::new(), out: &out }
        .deserialize(&mut de)
        .map_err(|e| Error::config(".", format!("invalid JSON: {e}")))?;
    Ok(out.into_inner())
}

struct Seed<'a> {
    path: String,
    out: &'a RefCell<Vec<String>>,
}

impl<'de> DeserializeSeed<'de> for Seed<'_> {
    type Value = ();
    fn deserialize<D: Deserializer<'de>>(self, d: D) -> std::result::Result<(), D::Error> {
        d.deserialize_any(self)
    }
}

impl<'de> Visitor<'de> for Seed<'_> {
    type Value = ();

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("any JSON value")
    }

    fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<(), A::Error> {
        let mut seen = HashSet::new();
        while let Some(key) = map.next_key::<String>()? {
            let path = format!("{}.{key}", self.path);
            if !seen.insert(key) {
                self.out.borrow_mut().push(path.clone());
            }
            map.next_value_seed(Seed { path, out: self.out })?;
        }
        Ok(())
    }

    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<(), A::Error> {
        let mut i = 0;
        while seq
            .next_element_seed(Seed {
                path: format!("{}[{i}]", self.path),
                out: self.out,
            })?
            .is_some()
        {
            i += 1;
        }
        Ok(())
    }

    fn visit_bool<E>(self, _: bool) -> std::result::Result<(), E> {
        Ok(())
    }
    fn visit_i64<E>(self, _: i64) -> std::result::Result<(), E> {
        Ok(())
    }
    fn visit_u64<E>(self, _: u64) -> std::result::Result<(), E> {
        Ok(())
    }
    fn visit_f64<E>(self, _: f64) -> std::result::Result<(), E> {
        Ok(())
    }
    fn visit_str<E>(self, _: &str) -> std::result::Result<(), E> {
        Ok(())
    }
    fn visit_unit<E>(self) -> std::result::Result<(), E> {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_duplicates_are_reported() {
        let d = duplicate_keys(r#"{"a":{"b":1,"b":2},"c":[{"x":1,"x":0}],"a":3}"#).unwrap();
        assert_eq!(d, vec![".a.b", ".c[0].x", ".a"]);
    }

    #[test]
    fn clean_documents_have_none() {
        assert!(duplicate_keys(r#"{"a":[1,2,{"b":null}]}"#).unwrap().is_empty());
    }
}
