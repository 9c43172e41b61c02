use std::borrow::Borrow;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Interned identifier. Cloning is a refcount bump; ordering is by content.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Name(Arc<str>);

impl Name {
    pub fn new(s: &str) -> Self {
        Name(Arc::from(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Name {
    fn from(s: &str) -> Self {
        Name::new(s)
    }
}

impl From<String> for Name {
    fn from(s: String) -> Self {
        Name(Arc::from(s))
    }
}

impl From<&String> for Name {
    fn from(s: &String) -> Self {
        Name::new(s)
    }
}

impl std::ops::Deref for Name {
    type Target = str;
    fn deref(&self) -> &str {
        &self.0
    }
}

impl Borrow<str> for Name {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl AsRef<str> for Name {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl Serialize for Name {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Name {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d).map(Name::from)
    }
}

pub type Elem = Name;
pub type ObjId = Name;
pub type CompId = Name;

/// Sorted, duplicate-free list of base points.
pub type Label = Vec<Name>;

/// Normalises a label: sorted and deduplicated.
pub fn label<I, S>(points: I) -> Label
where
    I: IntoIterator<Item = S>,
    S: Into<Name>,
{
    let mut v: Vec<Name> = points.into_iter().map(Into::into).collect();
    v.sort();
    v.dedup();
    v
}

pub fn label_string(l: &[Name]) -> String {
    l.iter().map(Name::as_str).collect::<Vec<_>>().join(",")
}

pub fn is_sublabel(small: &[Name], big: &[Name]) -> bool {
    small.iter().all(|x| big.binary_search(x).is_ok())
}
