//! On-disk artifacts: actor checkpoints, master bundles and policy
//! manifests.
//!
//! * **Actor checkpoint** (`.ikhm`): the raw network checkpoint format from
//!   the core crate — magic `IKHM`, version, layer shapes and parameters.
//! * **Master bundle** (`.ikha`): a master checkpoint together with the
//!   ordered skill labels it was trained against, so a master can never be
//!   silently re-attached to a permuted or different skill set. Layout, all
//!   integers little-endian: magic `IKHA`, `u32` version (1), `u32` skill
//!   count, then per skill a `u32` label byte length and UTF-8 label, then a
//!   `u32` byte length and the embedded actor checkpoint.
//! * **Manifest**: ordered `label = path` lines naming the frozen skills;
//!   paths are resolved relative to the manifest file's directory.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use ikh_core::net::{decode_checkpoint, encode_checkpoint, CheckpointError, Mlp};
use ikh_core::compose::PolicySet;
use thiserror::Error;

use crate::kv;

const BUNDLE_MAGIC: &[u8; 4] = b"IKHA";
const BUNDLE_VERSION: u32 = 1;

/// Errors raised while reading or writing artifacts.
#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid checkpoint: {source}")]
    Checkpoint {
        path: String,
        #[source]
        source: CheckpointError,
    },
    #[error("{path}: invalid master bundle: {reason}")]
    Bundle { path: String, reason: String },
    #[error("manifest {path}: {reason}")]
    Manifest { path: String, reason: String },
    #[error("manifest {path} lists no policies")]
    ManifestEmpty { path: String },
    #[error("{0}")]
    PolicySet(#[from] ikh_core::Error),
}

fn io_err(path: &Path, source: std::io::Error) -> ArtifactError {
    ArtifactError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Saves an actor network as a checkpoint file.
pub fn save_actor(path: &Path, actor: &Mlp) -> Result<(), ArtifactError> {
    std::fs::write(path, encode_checkpoint(actor)).map_err(|e| io_err(path, e))
}

/// Loads an actor network from a checkpoint file.
pub fn load_actor(path: &Path) -> Result<Mlp, ArtifactError> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    decode_checkpoint(&bytes).map_err(|source| ArtifactError::Checkpoint {
        path: path.display().to_string(),
        source,
    })
}

/// A master checkpoint plus the ordered skill labels it blends.
#[derive(Debug, Clone, PartialEq)]
pub struct MasterBundle {
    pub labels: Vec<String>,
    pub actor: Mlp,
}

/// Serializes a master bundle.
pub fn encode_master(bundle: &MasterBundle) -> Vec<u8> {
    let actor_bytes = encode_checkpoint(&bundle.actor);
    let mut out = Vec::new();
    out.extend_from_slice(BUNDLE_MAGIC);
    out.extend_from_slice(&BUNDLE_VERSION.to_le_bytes());
    out.extend_from_slice(&(bundle.labels.len() as u32).to_le_bytes());
    for label in &bundle.labels {
        out.extend_from_slice(&(label.len() as u32).to_le_bytes());
        out.extend_from_slice(label.as_bytes());
    }
    out.extend_from_slice(&(actor_bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(&actor_bytes);
    out
}

/// Deserializes a master bundle, rejecting truncated or corrupt input.
pub fn decode_master(bytes: &[u8]) -> Result<MasterBundle, String> {
    let mut cursor = 0usize;
    let take = |cursor: &mut usize, n: usize| -> Result<&[u8], String> {
        let end = cursor.checked_add(n).ok_or("length overflow")?;
        let slice = bytes.get(*cursor..end).ok_or("unexpected end of file")?;
        *cursor = end;
        Ok(slice)
    };
    let take_u32 = |cursor: &mut usize| -> Result<u32, String> {
        let raw = take(cursor, 4)?;
        Ok(u32::from_le_bytes(raw.try_into().expect("4 bytes")))
    };

    if take(&mut cursor, 4)? != BUNDLE_MAGIC {
        return Err("bad magic, expected IKHA".into());
    }
    let version = take_u32(&mut cursor)?;
    if version != BUNDLE_VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let count = take_u32(&mut cursor)? as usize;
    if count == 0 {
        return Err("bundle lists no skills".into());
    }
    let mut labels = Vec::with_capacity(count);
    for _ in 0..count {
        let len = take_u32(&mut cursor)? as usize;
        let raw = take(&mut cursor, len)?;
        let label = core::str::from_utf8(raw).map_err(|_| "label is not UTF-8")?;
        labels.push(label.to_string());
    }
    let actor_len = take_u32(&mut cursor)? as usize;
    let actor_bytes = take(&mut cursor, actor_len)?;
    if cursor != bytes.len() {
        return Err("trailing bytes after bundle".into());
    }
    let actor = decode_checkpoint(actor_bytes).map_err(|e| format!("embedded actor: {e}"))?;
    Ok(MasterBundle { labels, actor })
}

/// Saves a master bundle to a file.
pub fn save_master(path: &Path, bundle: &MasterBundle) -> Result<(), ArtifactError> {
    std::fs::write(path, encode_master(bundle)).map_err(|e| io_err(path, e))
}

/// Loads a master bundle from a file.
pub fn load_master(path: &Path) -> Result<MasterBundle, ArtifactError> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    decode_master(&bytes).map_err(|reason| ArtifactError::Bundle {
        path: path.display().to_string(),
        reason,
    })
}

/// Parses manifest text into ordered `(label, path)` pairs.
pub fn parse_manifest(text: &str, origin: &Path) -> Result<Vec<(String, String)>, ArtifactError> {
    let display = origin.display().to_string();
    let pairs = kv::parse(text).map_err(|e| ArtifactError::Manifest {
        path: display.clone(),
        reason: e.to_string(),
    })?;
    if pairs.is_empty() {
        return Err(ArtifactError::ManifestEmpty { path: display });
    }
    let mut out: Vec<(String, String)> = Vec::with_capacity(pairs.len());
    for pair in pairs {
        if out.iter().any(|(label, _)| *label == pair.key) {
            return Err(ArtifactError::Manifest {
                path: display,
                reason: format!("line {}: duplicate label `{}`", pair.line, pair.key),
            });
        }
        if pair.value.is_empty() {
            return Err(ArtifactError::Manifest {
                path: display,
                reason: format!("line {}: label `{}` has no path", pair.line, pair.key),
            });
        }
        out.push((pair.key, pair.value));
    }
    Ok(out)
}

/// Loads the frozen policy set named by a manifest file.
///
/// Relative checkpoint paths are resolved against the manifest's directory,
/// so a manifest can travel with its checkpoints. `bounds` is the shared
/// action box of the skills.
pub fn load_policy_set(
    manifest_path: &Path,
    bounds: (f64, f64),
) -> Result<Arc<PolicySet>, ArtifactError> {
    let text = std::fs::read_to_string(manifest_path).map_err(|e| io_err(manifest_path, e))?;
    let entries = parse_manifest(&text, manifest_path)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut labels = Vec::with_capacity(entries.len());
    let mut actors = Vec::with_capacity(entries.len());
    for (label, rel) in entries {
        let rel_path = PathBuf::from(&rel);
        let path = if rel_path.is_absolute() {
            rel_path
        } else {
            base.join(rel_path)
        };
        actors.push(load_actor(&path)?);
        labels.push(label);
    }
    Ok(Arc::new(PolicySet::new(labels, actors, bounds)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ikh_core::net::{Activation, Mlp};
    use ikh_core::rng::seeded;

    fn net(dims: &[usize], rng: &mut ikh_core::rng::ChaCha8Rng) -> Mlp {
        Mlp::new(dims, Activation::Relu, Activation::Identity, rng).unwrap()
    }

    fn toy_actor(seed: u64) -> Mlp {
        net(&[5, 8, 4], &mut seeded(seed))
    }

    #[test]
    fn actor_round_trips_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("actor.ikhm");
        let actor = toy_actor(3);
        save_actor(&path, &actor).unwrap();
        let loaded = load_actor(&path).unwrap();
        assert_eq!(actor.param_hash(), loaded.param_hash());
    }

    #[test]
    fn master_bundle_round_trips_and_rejects_corruption() {
        let bundle = MasterBundle {
            labels: vec!["left".into(), "right".into(), "straight".into()],
            actor: toy_actor(9),
        };
        let bytes = encode_master(&bundle);
        let back = decode_master(&bytes).unwrap();
        assert_eq!(back.labels, bundle.labels);
        assert_eq!(back.actor.param_hash(), bundle.actor.param_hash());

        // Truncation anywhere fails.
        for cut in [0, 3, 7, 11, bytes.len() / 2, bytes.len() - 1] {
            assert!(decode_master(&bytes[..cut]).is_err(), "cut at {cut}");
        }
        // Bad magic fails.
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_master(&bad).is_err());
        // Trailing garbage fails.
        let mut long = bytes.clone();
        long.push(0);
        assert!(decode_master(&long).is_err());
    }

    #[test]
    fn manifest_parses_in_order_and_rejects_duplicates() {
        let origin = Path::new("skills.manifest");
        let entries =
            parse_manifest("b = nets/b.ikhm\na = nets/a.ikhm\n", origin).unwrap();
        assert_eq!(
            entries,
            vec![
                ("b".to_string(), "nets/b.ikhm".to_string()),
                ("a".to_string(), "nets/a.ikhm".to_string()),
            ]
        );
        assert!(matches!(
            parse_manifest("a = x\na = y\n", origin),
            Err(ArtifactError::Manifest { .. })
        ));
        assert!(matches!(
            parse_manifest("# only comments\n", origin),
            Err(ArtifactError::ManifestEmpty { .. })
        ));
        assert!(matches!(
            parse_manifest("a =\n", origin),
            Err(ArtifactError::Manifest { .. })
        ));
    }

    #[test]
    fn policy_set_loads_relative_to_manifest() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("nets")).unwrap();
        let mut rng = seeded(11);
        // Actor head widths must be twice the action dim; obs dim shared.
        let a = net(&[5, 6, 4], &mut rng);
        let b = net(&[5, 10, 4], &mut rng);
        save_actor(&dir.path().join("nets/a.ikhm"), &a).unwrap();
        save_actor(&dir.path().join("nets/b.ikhm"), &b).unwrap();
        let manifest = dir.path().join("skills.manifest");
        std::fs::write(&manifest, "alpha = nets/a.ikhm\nbeta = nets/b.ikhm\n").unwrap();

        let set = load_policy_set(&manifest, (-1.0, 1.0)).unwrap();
        assert_eq!(set.labels(), ["alpha".to_string(), "beta".to_string()]);
        assert_eq!(set.len(), 2);
        assert_eq!(set.obs_dim(), 5);
        assert_eq!(set.action_dim(), 2);
        assert_eq!(set.param_hashes(), vec![a.param_hash(), b.param_hash()]);
    }

    #[test]
    fn policy_set_loading_surfaces_missing_files_and_bad_shapes() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = dir.path().join("m.manifest");
        std::fs::write(&manifest, "ghost = nowhere.ikhm\n").unwrap();
        assert!(matches!(
            load_policy_set(&manifest, (-1.0, 1.0)),
            Err(ArtifactError::Io { .. })
        ));

        // Mismatched obs dims are a policy-set validation error.
        let mut rng = seeded(4);
        let a = net(&[5, 6, 4], &mut rng);
        let b = net(&[7, 6, 4], &mut rng);
        save_actor(&dir.path().join("a.ikhm"), &a).unwrap();
        save_actor(&dir.path().join("b.ikhm"), &b).unwrap();
        std::fs::write(&manifest, "a = a.ikhm\nb = b.ikhm\n").unwrap();
        assert!(matches!(
            load_policy_set(&manifest, (-1.0, 1.0)),
            Err(ArtifactError::PolicySet(_))
        ));
    }
}
