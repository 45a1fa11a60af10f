//! JSON config assembly for `simulate`: flag overrides land on top of the
//! config file (last wins), and the seed resolves from, in order, the
//! --seed flag, the assembled config, or a fresh draw.

use serde_json::{json, Value};

use crate::CliError;

/// Split one `key=value` override; the value is parsed as JSON when
/// possible and kept as a string otherwise, so `noise.enabled=true` is a
/// bool but `length_policy=pad_to_longest` stays a string.
pub(crate) fn parse_set(pair: &str) -> Result<(String, Value), CliError> {
    let (key, raw) = pair
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got {pair:?}")))?;
    if key.is_empty() {
        return Err(CliError::Usage(format!("--set has an empty key: {pair:?}")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

/// Insert `value` at a dotted path, creating intermediate objects as
/// needed: `reverb.provider.kind=synthetic` touches three levels.
pub(crate) fn set_dotted(root: &mut Value, key: &str, value: Value) -> Result<(), CliError> {
    let (path, last) = match key.rsplit_once('.') {
        Some((p, l)) => (Some(p), l),
        None => (None, key),
    };
    if last.is_empty() {
        return Err(CliError::Usage(format!("--set key {key:?} ends in a dot")));
    }
    let mut cur = root;
    if let Some(path) = path {
        for part in path.split('.') {
            if part.is_empty() {
                return Err(CliError::Usage(format!(
                    "--set key {key:?} has an empty path segment"
                )));
            }
            let obj = cur.as_object_mut().ok_or_else(|| {
                CliError::Usage(format!(
                    "--set key {key:?}: {part:?} is not an object in the config"
                ))
            })?;
            cur = obj.entry(part.to_string()).or_insert_with(|| json!({}));
        }
    }
    let obj = cur.as_object_mut().ok_or_else(|| {
        CliError::Usage(format!("--set key {key:?} indexes into a non-object value"))
    })?;
    obj.insert(last.to_string(), value);
    Ok(())
}

/// Where the final seed came from, for the caller's reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum SeedSource {
    Flag,
    Config,
    Drawn,
}

/// Fix the seed inside the assembled config. A --seed flag always wins; a
/// seed already present in the config is respected; otherwise one is
/// drawn from OS entropy and written back so the config hash covers it.
pub(crate) fn resolve_seed(
    root: &mut Value,
    flag: Option<u64>,
) -> Result<(u64, SeedSource), CliError> {
    if let Some(seed) = flag {
        root["seed"] = json!(seed);
        return Ok((seed, SeedSource::Flag));
    }
    if let Some(v) = root.get("seed") {
        let seed = v.as_u64().ok_or_else(|| {
            CliError::Data(format!("config seed must be a nonnegative integer, got {v}"))
        })?;
        return Ok((seed, SeedSource::Config));
    }
    let seed: u64 = rand::random();
    root["seed"] = json!(seed);
    Ok((seed, SeedSource::Drawn))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_parses_json_values_and_falls_back_to_strings() {
        assert_eq!(parse_set("a=5").unwrap(), ("a".to_string(), json!(5)));
        assert_eq!(
            parse_set("noise.enabled=true").unwrap(),
            ("noise.enabled".to_string(), json!(true))
        );
        assert_eq!(
            parse_set("snr_range_db=[-3,3]").unwrap(),
            ("snr_range_db".to_string(), json!([-3, 3]))
        );
        assert_eq!(
            parse_set("length_policy=pad_to_longest").unwrap(),
            ("length_policy".to_string(), json!("pad_to_longest"))
        );
        assert!(matches!(parse_set("novalue"), Err(CliError::Usage(_))));
        assert!(matches!(parse_set("=5"), Err(CliError::Usage(_))));
    }

    #[test]
    fn dotted_keys_create_and_overwrite() {
        let mut root = json!({});
        set_dotted(&mut root, "seed", json!(7)).unwrap();
        set_dotted(&mut root, "noise.enabled", json!(true)).unwrap();
        set_dotted(&mut root, "noise.snr_range_db", json!([0, 10])).unwrap();
        set_dotted(&mut root, "noise.enabled", json!(false)).unwrap();
        assert_eq!(
            root,
            json!({"seed": 7, "noise": {"enabled": false, "snr_range_db": [0, 10]}})
        );
    }

    #[test]
    fn dotted_path_through_scalar_is_a_usage_error() {
        let mut root = json!({"seed": 7});
        assert!(matches!(
            set_dotted(&mut root, "seed.sub", json!(1)),
            Err(CliError::Usage(_))
        ));
        assert!(matches!(
            set_dotted(&mut root, "a..b", json!(1)),
            Err(CliError::Usage(_))
        ));
    }

    #[test]
    fn seed_resolution_precedence() {
        let mut root = json!({"seed": 3});
        let (s, src) = resolve_seed(&mut root, Some(9)).unwrap();
        assert_eq!((s, src), (9, SeedSource::Flag));
        assert_eq!(root["seed"], json!(9));

        let mut root = json!({"seed": 3});
        let (s, src) = resolve_seed(&mut root, None).unwrap();
        assert_eq!((s, src), (3, SeedSource::Config));

        let mut root = json!({});
        let (_, src) = resolve_seed(&mut root, None).unwrap();
        assert_eq!(src, SeedSource::Drawn);
        assert!(root["seed"].is_u64());

        let mut root = json!({"seed": -4});
        assert!(matches!(
            resolve_seed(&mut root, None),
            Err(CliError::Data(_))
        ));
    }
}
