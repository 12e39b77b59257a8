//! Plain-text `key = value` configuration files, run manifests, and the
//! FNV-1a content hash used to fingerprint artifacts.
//!
//! Lines are `key = value`; `#` starts a comment; keys are dotted paths.
//! Later assignments override earlier ones, which is how flag overrides and
//! manifest reruns are layered.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Ordered key/value store with typed accessors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvConfig {
    map: BTreeMap<String, String>,
}

impl KvConfig {
    pub fn new() -> Self {
        KvConfig::default()
    }

    pub fn parse(text: &str) -> Result<KvConfig> {
        let mut map = BTreeMap::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("line {}: expected `key = value`, got {raw:?}", ln + 1))
            })?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(KvConfig { map })
    }

    pub fn load(path: &Path) -> Result<KvConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        KvConfig::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.map.insert(key.to_string(), value.to_string());
    }

    /// Copies every entry of `other` over this config (other wins).
    pub fn merge(&mut self, other: &KvConfig) {
        for (k, v) in &other.map {
            self.map.insert(k.clone(), v.clone());
        }
    }

    pub fn contains(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|s| s.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Config(format!("missing mandatory key {key:?}")))
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("key {key:?}: {e}")))
            })
            .transpose()
    }

    pub fn require_f64(&self, key: &str) -> Result<f64> {
        self.get_f64(key)?
            .ok_or_else(|| Error::Config(format!("missing mandatory key {key:?}")))
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>> {
        self.get(key)
            .map(|v| {
                v.parse::<u64>()
                    .map_err(|e| Error::Parse(format!("key {key:?}: {e}")))
            })
            .transpose()
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>> {
        self.get(key)
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|e| Error::Parse(format!("key {key:?}: {e}")))
            })
            .transpose()
    }

    pub fn get_bool(&self, key: &str) -> Result<Option<bool>> {
        self.get(key)
            .map(|v| match v {
                "true" | "on" | "1" | "yes" => Ok(true),
                "false" | "off" | "0" | "no" => Ok(false),
                other => Err(Error::Parse(format!("key {key:?}: bad boolean {other:?}"))),
            })
            .transpose()
    }

    /// Comma-separated pair of floats, e.g. `0.096,-0.1625`.
    pub fn get_pair(&self, key: &str) -> Result<Option<[f64; 2]>> {
        self.get(key)
            .map(|v| {
                let parts: Vec<&str> = v.split(',').map(|p| p.trim()).collect();
                if parts.len() != 2 {
                    return Err(Error::Parse(format!("key {key:?}: expected two values")));
                }
                Ok([
                    parts[0]
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("key {key:?}: {e}")))?,
                    parts[1]
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("key {key:?}: {e}")))?,
                ])
            })
            .transpose()
    }

    /// Keys beginning with `prefix.`, with the prefix stripped.
    pub fn section(&self, prefix: &str) -> Vec<(String, String)> {
        let dotted = format!("{prefix}.");
        self.map
            .iter()
            .filter(|(k, _)| k.starts_with(&dotted))
            .map(|(k, v)| (k[dotted.len()..].to_string(), v.clone()))
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &String)> {
        self.map.iter()
    }

    /// Renders the config as sorted `key = value` lines.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.map {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }
}

/// 64-bit FNV-1a hash (content fingerprinting, not cryptographic).
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

pub fn hash_file(path: &Path) -> Result<u64> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(fnv1a64(&bytes))
}

/// Writes a run manifest: the resolved configuration plus an FNV-1a
/// fingerprint per produced artifact. A manifest parses as a [`KvConfig`],
/// so a rerun can consume it directly as its configuration.
pub fn write_manifest(path: &Path, resolved: &KvConfig, artifacts: &[PathBuf]) -> Result<()> {
    let mut manifest = resolved.clone();
    for art in artifacts {
        let name = art
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| art.display().to_string());
        manifest.set(&format!("artifact.{name}"), format!("{:016x}", hash_file(art)?));
    }
    manifest.write(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_overrides() {
        let cfg = KvConfig::parse("a.b = 1\n# comment\n c = x y # trailing\na.b=2\n").unwrap();
        assert_eq!(cfg.get("a.b"), Some("2"));
        assert_eq!(cfg.get("c"), Some("x y"));
        assert!(cfg.get("missing").is_none());
    }

    #[test]
    fn rejects_lines_without_equals() {
        assert!(KvConfig::parse("just words\n").is_err());
    }

    #[test]
    fn typed_accessors() {
        let cfg = KvConfig::parse("f = 2.5\nn = 7\nb = on\npair = 1.0, -2.0\n").unwrap();
        assert_eq!(cfg.get_f64("f").unwrap(), Some(2.5));
        assert_eq!(cfg.get_u64("n").unwrap(), Some(7));
        assert_eq!(cfg.get_bool("b").unwrap(), Some(true));
        assert_eq!(cfg.get_pair("pair").unwrap(), Some([1.0, -2.0]));
        assert!(cfg.get_f64("b").is_err());
        assert!(cfg.require("nope").is_err());
    }

    #[test]
    fn render_parse_round_trip() {
        let mut cfg = KvConfig::new();
        cfg.set("sim.speed", 0.4);
        cfg.set("session.id", "trial-01");
        let back = KvConfig::parse(&cfg.render()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn fnv_is_stable() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_ne!(fnv1a64(b"ab"), fnv1a64(b"ba"));
    }

    #[test]
    fn section_strips_prefix() {
        let cfg = KvConfig::parse("imu.front.file = f.csv\nimu.rear.file = r.csv\n").unwrap();
        let sec = cfg.section("imu.front");
        assert_eq!(sec, vec![("file".to_string(), "f.csv".to_string())]);
    }
}
