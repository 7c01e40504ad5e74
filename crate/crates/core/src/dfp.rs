//! Application-level device fingerprinting and payload masking.
//!
//! A [`DeviceFeatureSet`] is reduced to a canonical text form
//! (`category.name=value` entries sorted and joined with `|`), which is then
//! hashed into a 128-hex-character [`DeviceFingerprint`]. A [`PreSharedKey`]
//! expands into a 256-hex-character [`KeyMask`] that is XORed nibble by
//! nibble over the fused watermark payload.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha512};
use thiserror::Error;

/// Hex length of a device fingerprint (512-bit digest).
pub const FINGERPRINT_HEX_LEN: usize = 128;
/// Hex length of the key mask and of the fused payload it covers.
pub const MASK_HEX_LEN: usize = 256;
pub const MIN_KEY_BYTES: usize = 16;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DfpError {
    #[error("feature set has no entries")]
    EmptyFeatureSet,
    #[error("unknown feature category {0:?}")]
    UnknownCategory(String),
    #[error("feature name {0:?} is empty after normalisation")]
    InvalidName(String),
    #[error("duplicate feature entry {0}")]
    DuplicateEntry(String),
    #[error("malformed feature document: {0}")]
    InvalidDocument(String),
    #[error("malformed canonical entry {0:?}")]
    InvalidCanonical(String),
    #[error("pre-shared key is {0} bytes, at least 16 required")]
    KeyTooShort(usize),
    #[error("expected {expected} hex characters, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("invalid hex character {0:?}")]
    InvalidHex(char),
    #[error("reading key: {0}")]
    KeyIo(String),
}

/// Feature taxonomy of mobile capture devices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureCategory {
    Application,
    Basic,
    Biometric,
    Camera,
    Hardware,
    Network,
    Screen,
    Sensor,
    Touchpad,
    User,
}

impl FeatureCategory {
    pub const ALL: [FeatureCategory; 10] = [
        Self::Application,
        Self::Basic,
        Self::Biometric,
        Self::Camera,
        Self::Hardware,
        Self::Network,
        Self::Screen,
        Self::Sensor,
        Self::Touchpad,
        Self::User,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Application => "application",
            Self::Basic => "basic",
            Self::Biometric => "biometric",
            Self::Camera => "camera",
            Self::Hardware => "hardware",
            Self::Network => "network",
            Self::Screen => "screen",
            Self::Sensor => "sensor",
            Self::Touchpad => "touchpad",
            Self::User => "user",
        }
    }
}

impl FromStr for FeatureCategory {
    type Err = DfpError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.trim().to_lowercase();
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == wanted)
            .ok_or_else(|| DfpError::UnknownCategory(s.to_string()))
    }
}

impl fmt::Display for FeatureCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureEntry {
    pub category: FeatureCategory,
    pub name: String,
    pub value: String,
}

/// Non-empty set of device attributes, unique per normalised `(category, name)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceFeatureSet {
    entries: Vec<FeatureEntry>,
}

fn normalize_name(name: &str) -> String {
    name.to_lowercase()
        .chars()
        .filter(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || *c == '.')
        .collect()
}

fn normalize_value(value: &str) -> String {
    // '=' and '|' are structural in the canonical form, so values keep only
    // alphanumerics and dots.
    value
        .to_lowercase()
        .chars()
        .filter(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || *c == '.')
        .collect()
}

impl DeviceFeatureSet {
    pub fn new(entries: Vec<FeatureEntry>) -> Result<Self, DfpError> {
        if entries.is_empty() {
            return Err(DfpError::EmptyFeatureSet);
        }
        let mut seen = std::collections::BTreeSet::new();
        for e in &entries {
            let name = normalize_name(&e.name);
            if name.is_empty() {
                return Err(DfpError::InvalidName(e.name.clone()));
            }
            if !seen.insert((e.category, name.clone())) {
                return Err(DfpError::DuplicateEntry(format!("{}.{}", e.category, name)));
            }
        }
        Ok(Self { entries })
    }

    /// Convenience constructor from `(category, name, value)` triples.
    pub fn from_triples<I, S1, S2, S3>(triples: I) -> Result<Self, DfpError>
    where
        I: IntoIterator<Item = (S1, S2, S3)>,
        S1: AsRef<str>,
        S2: Into<String>,
        S3: Into<String>,
    {
        let entries = triples
            .into_iter()
            .map(|(c, n, v)| {
                Ok(FeatureEntry {
                    category: c.as_ref().parse()?,
                    name: n.into(),
                    value: v.into(),
                })
            })
            .collect::<Result<Vec<_>, DfpError>>()?;
        Self::new(entries)
    }

    /// Parses `{"category": {"name": "value", ...}, ...}`. Scalar JSON
    /// values (numbers, booleans) are accepted and stringified; `null` is
    /// treated as an empty value.
    pub fn from_json(text: &str) -> Result<Self, DfpError> {
        let doc: serde_json::Value =
            serde_json::from_str(text).map_err(|e| DfpError::InvalidDocument(e.to_string()))?;
        Self::from_json_value(&doc)
    }

    pub fn from_json_value(doc: &serde_json::Value) -> Result<Self, DfpError> {
        use serde_json::Value;
        let obj = doc
            .as_object()
            .ok_or_else(|| DfpError::InvalidDocument("top level must be an object".into()))?;
        let mut entries = Vec::new();
        for (category, attrs) in obj {
            let category: FeatureCategory = category.parse()?;
            let attrs = attrs.as_object().ok_or_else(|| {
                DfpError::InvalidDocument(format!("category {category} must map to an object"))
            })?;
            for (name, value) in attrs {
                let value = match value {
                    Value::String(s) => s.clone(),
                    Value::Number(n) => n.to_string(),
                    Value::Bool(b) => b.to_string(),
                    Value::Null => String::new(),
                    _ => {
                        return Err(DfpError::InvalidDocument(format!(
                            "{category}.{name}: nested values are not supported"
                        )))
                    }
                };
                entries.push(FeatureEntry {
                    category,
                    name: name.clone(),
                    value,
                });
            }
        }
        Self::new(entries)
    }

    pub fn entries(&self) -> &[FeatureEntry] {
        &self.entries
    }

    /// Canonical text: normalised entries sorted by category then name
    /// (byte order) and joined as `category.name=value|...`.
    pub fn canonicalize(&self) -> CanonicalFeatures {
        let mut parts: Vec<(&'static str, String, String)> = self
            .entries
            .iter()
            .map(|e| {
                (
                    e.category.as_str(),
                    normalize_name(&e.name),
                    normalize_value(&e.value),
                )
            })
            .collect();
        parts.sort();
        let text = parts
            .iter()
            .map(|(c, n, v)| format!("{c}.{n}={v}"))
            .collect::<Vec<_>>()
            .join("|");
        CanonicalFeatures(text)
    }

    pub fn fingerprint(&self) -> DeviceFingerprint {
        DeviceFingerprint::of_canonical(&self.canonicalize())
    }
}

/// Output of [`DeviceFeatureSet::canonicalize`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CanonicalFeatures(String);

impl CanonicalFeatures {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Parses canonical text back into a feature set.
    pub fn parse(text: &str) -> Result<DeviceFeatureSet, DfpError> {
        if text.is_empty() {
            return Err(DfpError::EmptyFeatureSet);
        }
        let entries = text
            .split('|')
            .map(|part| {
                let (key, value) = part
                    .split_once('=')
                    .ok_or_else(|| DfpError::InvalidCanonical(part.to_string()))?;
                let (category, name) = key
                    .split_once('.')
                    .ok_or_else(|| DfpError::InvalidCanonical(part.to_string()))?;
                Ok(FeatureEntry {
                    category: category.parse()?,
                    name: name.to_string(),
                    value: value.to_string(),
                })
            })
            .collect::<Result<Vec<_>, DfpError>>()?;
        DeviceFeatureSet::new(entries)
    }
}

impl fmt::Display for CanonicalFeatures {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn sha512_hex(parts: &[&[u8]]) -> String {
    let mut h = Sha512::new();
    for p in parts {
        h.update(p);
    }
    hex::encode(h.finalize())
}

fn check_hex(s: &str, expected: usize) -> Result<(), DfpError> {
    if s.len() != expected {
        return Err(DfpError::LengthMismatch {
            expected,
            actual: s.len(),
        });
    }
    match s.chars().find(|c| !matches!(c, '0'..='9' | 'a'..='f')) {
        Some(bad) => Err(DfpError::InvalidHex(bad)),
        None => Ok(()),
    }
}

/// 128 lowercase hex characters identifying a device.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct DeviceFingerprint(String);

impl DeviceFingerprint {
    /// SHA-512 of the canonical text, hex encoded.
    pub fn of_canonical(canonical: &CanonicalFeatures) -> Self {
        Self::of_text(canonical.as_str())
    }

    pub(crate) fn of_text(text: &str) -> Self {
        Self(sha512_hex(&[text.as_bytes()]))
    }

    pub fn from_hex(hex: &str) -> Result<Self, DfpError> {
        check_hex(hex, FINGERPRINT_HEX_LEN)?;
        Ok(Self(hex.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for DeviceFingerprint {
    type Error = DfpError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        check_hex(&s, FINGERPRINT_HEX_LEN)?;
        Ok(Self(s))
    }
}

impl From<DeviceFingerprint> for String {
    fn from(fp: DeviceFingerprint) -> Self {
        fp.0
    }
}

impl fmt::Display for DeviceFingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Deployment-wide secret shared by capture devices and the verifier.
/// Deliberately neither `Serialize` nor `Display`.
#[derive(Clone, PartialEq, Eq)]
pub struct PreSharedKey(Vec<u8>);

impl PreSharedKey {
    pub fn new(bytes: impl Into<Vec<u8>>) -> Result<Self, DfpError> {
        let bytes = bytes.into();
        if bytes.len() < MIN_KEY_BYTES {
            return Err(DfpError::KeyTooShort(bytes.len()));
        }
        Ok(Self(bytes))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, DfpError> {
        let path = path.as_ref();
        let bytes =
            std::fs::read(path).map_err(|e| DfpError::KeyIo(format!("{}: {e}", path.display())))?;
        Self::new(bytes)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    /// `hex(SHA-512(key ‖ 0x00)) ‖ hex(SHA-512(key ‖ 0x01))`.
    pub fn derive_mask(&self) -> KeyMask {
        let mut hex = sha512_hex(&[&self.0, &[0x00]]);
        hex.push_str(&sha512_hex(&[&self.0, &[0x01]]));
        KeyMask(hex)
    }
}

impl fmt::Debug for PreSharedKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PreSharedKey(<{} bytes redacted>)", self.0.len())
    }
}

/// 256 lowercase hex characters derived from a [`PreSharedKey`].
#[derive(Clone, PartialEq, Eq)]
pub struct KeyMask(String);

impl KeyMask {
    pub fn from_hex(hex: &str) -> Result<Self, DfpError> {
        check_hex(hex, MASK_HEX_LEN)?;
        Ok(Self(hex.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for KeyMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("KeyMask(<redacted>)")
    }
}

fn nibble(c: char) -> Result<u8, DfpError> {
    match c {
        '0'..='9' => Ok(c as u8 - b'0'),
        'a'..='f' => Ok(c as u8 - b'a' + 10),
        _ => Err(DfpError::InvalidHex(c)),
    }
}

/// Nibble-wise XOR of a 256-hex payload with the mask. Applying it twice
/// restores the payload.
pub fn apply_mask(payload_hex: &str, mask: &KeyMask) -> Result<String, DfpError> {
    if payload_hex.len() != MASK_HEX_LEN {
        return Err(DfpError::LengthMismatch {
            expected: MASK_HEX_LEN,
            actual: payload_hex.len(),
        });
    }
    payload_hex
        .chars()
        .zip(mask.0.chars())
        .map(|(p, m)| {
            let x = nibble(p)? ^ nibble(m)?;
            Ok(char::from_digit(u32::from(x), 16).expect("nibble"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EMPTY_SHA512: &str = "cf83e1357eefb8bdf1542850d66d8007d620e4050b5715dc83f4a921d36ce9ce\
                                47d0d13c5d85f2b0ff8318d2877eec2f63b931bd47417a81a538327af927da3e";

    fn set(triples: &[(&str, &str, &str)]) -> DeviceFeatureSet {
        DeviceFeatureSet::from_triples(triples.iter().copied()).unwrap()
    }

    #[test]
    fn canonical_single_entry() {
        let fs = set(&[("basic", "model", "Pixel 4")]);
        assert_eq!(fs.canonicalize().as_str(), "basic.model=pixel4");
    }

    #[test]
    fn canonical_sorts_and_strips() {
        let fs = set(&[("hardware", "ram", "8 GB"), ("basic", "os", "Android 12")]);
        assert_eq!(fs.canonicalize().as_str(), "basic.os=android12|hardware.ram=8gb");
    }

    #[test]
    fn permutations_agree() {
        let a = set(&[("camera", "lens", "f/1.8"), ("basic", "model", "X"), ("user", "id", "7")]);
        let b = set(&[("user", "id", "7"), ("camera", "lens", "f/1.8"), ("basic", "model", "X")]);
        assert_eq!(a.canonicalize(), b.canonicalize());
        assert_eq!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn structural_characters_are_dropped_from_values() {
        let fs = set(&[("network", "mac", "AA:BB|cc=dd"), ("screen", "dpi", "")]);
        let c = fs.canonicalize();
        assert_eq!(c.as_str(), "network.mac=aabbccdd|screen.dpi=");
        assert_eq!(CanonicalFeatures::parse(c.as_str()).unwrap().canonicalize(), c);
    }

    #[test]
    fn empty_and_duplicate_sets_are_rejected() {
        assert_eq!(DeviceFeatureSet::new(vec![]), Err(DfpError::EmptyFeatureSet));
        let err = DeviceFeatureSet::from_triples([("basic", "Model", "a"), ("basic", "model", "b")])
            .unwrap_err();
        assert!(matches!(err, DfpError::DuplicateEntry(_)));
        let err = DeviceFeatureSet::from_triples([("gpu", "x", "y")]).unwrap_err();
        assert!(matches!(err, DfpError::UnknownCategory(_)));
        let err = DeviceFeatureSet::from_triples([("basic", " ?", "y")]).unwrap_err();
        assert!(matches!(err, DfpError::InvalidName(_)));
    }

    #[test]
    fn json_document() {
        let fs = DeviceFeatureSet::from_json(
            r#"{"hardware": {"ram": "8 GB", "cores": 8}, "basic": {"os": "Android 12", "rooted": false}}"#,
        )
        .unwrap();
        assert_eq!(
            fs.canonicalize().as_str(),
            "basic.os=android12|basic.rooted=false|hardware.cores=8|hardware.ram=8gb"
        );
        assert!(DeviceFeatureSet::from_json("[1,2]").is_err());
        assert!(DeviceFeatureSet::from_json(r#"{"basic": {"a": [1]}}"#).is_err());
        assert_eq!(DeviceFeatureSet::from_json("{}"), Err(DfpError::EmptyFeatureSet));
    }

    #[test]
    fn empty_string_digest_matches_published_constant() {
        assert_eq!(DeviceFingerprint::of_text("").as_str(), EMPTY_SHA512);
    }

    #[test]
    fn fingerprint_is_fixed_width_lower_hex() {
        let fp = set(&[("basic", "model", "Pixel 4")]).fingerprint();
        assert_eq!(fp.as_str().len(), FINGERPRINT_HEX_LEN);
        assert!(DeviceFingerprint::from_hex(fp.as_str()).is_ok());
        assert!(DeviceFingerprint::from_hex(&fp.as_str().to_uppercase()).is_err());
        assert!(DeviceFingerprint::from_hex("abc").is_err());
    }

    #[test]
    fn one_character_changes_move_the_fingerprint() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let alphabet = b"abcdefghijklmnopqrstuvwxyz0123456789.=|";
        for _ in 0..1000 {
            let len = rng.random_range(1..64);
            let mut a: Vec<u8> = (0..len)
                .map(|_| alphabet[rng.random_range(0..alphabet.len())])
                .collect();
            let b = a.clone();
            let at = rng.random_range(0..len);
            let orig = a[at];
            while a[at] == orig {
                a[at] = alphabet[rng.random_range(0..alphabet.len())];
            }
            let fa = DeviceFingerprint::of_text(std::str::from_utf8(&a).unwrap());
            let fb = DeviceFingerprint::of_text(std::str::from_utf8(&b).unwrap());
            assert_ne!(fa, fb);
        }
    }

    #[test]
    fn key_length_and_mask_shape() {
        assert_eq!(PreSharedKey::new(vec![1u8; 15]), Err(DfpError::KeyTooShort(15)));
        let key = PreSharedKey::new(vec![7u8; 16]).unwrap();
        let mask = key.derive_mask();
        assert_eq!(mask.as_str().len(), MASK_HEX_LEN);
        assert_eq!(mask, key.derive_mask());
        let mut other = vec![7u8; 16];
        other[9] = 8;
        assert_ne!(PreSharedKey::new(other).unwrap().derive_mask(), mask);
        // The two halves come from different counters.
        assert_ne!(&mask.as_str()[..128], &mask.as_str()[128..]);
        assert!(!format!("{key:?}").contains('7'));
    }

    #[test]
    fn mask_xor_arithmetic() {
        let zero = KeyMask::from_hex(&"0".repeat(256)).unwrap();
        let payload: String = "0123456789abcdef".repeat(16);
        assert_eq!(apply_mask(&payload, &zero).unwrap(), payload);

        let fives = KeyMask::from_hex(&"5".repeat(256)).unwrap();
        let a = "a".repeat(256);
        assert_eq!(apply_mask(&a, &fives).unwrap(), "f".repeat(256));

        assert!(matches!(
            apply_mask("abcd", &zero),
            Err(DfpError::LengthMismatch { expected: 256, actual: 4 })
        ));
        assert_eq!(
            apply_mask(&"g".repeat(256), &zero),
            Err(DfpError::InvalidHex('g'))
        );
    }

    fn entry_strategy() -> impl Strategy<Value = (usize, String, String)> {
        (0..10usize, "[A-Za-z][A-Za-z0-9 _.]{0,8}", "[ -~]{0,12}")
    }

    proptest! {
        #[test]
        fn canonicalization_is_idempotent(entries in proptest::collection::vec(entry_strategy(), 1..8)) {
            let triples: Vec<_> = entries
                .into_iter()
                .map(|(c, n, v)| (FeatureCategory::ALL[c].as_str(), n, v))
                .collect();
            if let Ok(fs) = DeviceFeatureSet::from_triples(triples.clone()) {
                let once = fs.canonicalize();
                let again = CanonicalFeatures::parse(once.as_str()).unwrap().canonicalize();
                prop_assert_eq!(&once, &again);

                let mut reversed = triples;
                reversed.reverse();
                let rev = DeviceFeatureSet::from_triples(reversed).unwrap();
                prop_assert_eq!(rev.fingerprint(), fs.fingerprint());
                prop_assert_eq!(fs.fingerprint().as_str().len(), FINGERPRINT_HEX_LEN);
            }
        }

        #[test]
        fn masking_is_an_involution(payload in "[0-9a-f]{256}", key in proptest::collection::vec(any::<u8>(), 16..64)) {
            let mask = PreSharedKey::new(key).unwrap().derive_mask();
            let masked = apply_mask(&payload, &mask).unwrap();
            prop_assert_eq!(masked.len(), 256);
            prop_assert_eq!(apply_mask(&masked, &mask).unwrap(), payload);
        }
    }
}
