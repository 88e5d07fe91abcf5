//! On-disk light-set document: versioned, human-readable JSON.
//!
//! Serialization keeps full f64 precision (shortest round-trip decimals), so
//! save/load is lossless. Unknown fields are rejected. Directions whose norm
//! is within [`DIRECTION_NORM_TOLERANCE`] of one are renormalized on load;
//! anything further off is rejected.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Direction, Light, LightSet, Rgb};

pub const FORMAT_VERSION: u32 = 1;

/// Tolerance on `|direction| - 1` under which a stored direction is
/// renormalized instead of rejected. Wide enough to accept hand-written
/// values like (0, 0, 1.01).
pub const DIRECTION_NORM_TOLERANCE: f64 = 2e-2;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LightSetDocument {
    version: u32,
    lights: Vec<LightRecord>,
    ambient: [f64; 3],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LightRecord {
    /// Unit direction toward the light.
    l: [f64; 3],
    /// Distance, meters.
    d: f64,
    /// Angular size, steradians.
    s: f64,
    /// Linear RGB radiance.
    c: [f64; 3],
}

fn light_from_record(index: usize, rec: &LightRecord) -> Result<Light> {
    let [x, y, z] = rec.l;
    let norm = (x * x + y * y + z * z).sqrt();
    if !norm.is_finite() || (norm - 1.0).abs() > DIRECTION_NORM_TOLERANCE {
        return Err(Error::InvalidLightSet(format!(
            "light {index}: direction norm {norm} too far from unit"
        )));
    }
    let direction = Direction::new(x, y, z)
        .ok_or_else(|| Error::InvalidLightSet(format!("light {index}: zero direction")))?;
    Light::new(direction, rec.d, rec.s, Rgb::new(rec.c[0], rec.c[1], rec.c[2]))
        .map_err(|e| Error::InvalidLightSet(format!("light {index}: {e}")))
}

pub fn load_lightset(path: &Path) -> Result<LightSet> {
    let reader = BufReader::new(File::open(path)?);
    let doc: LightSetDocument = serde_json::from_reader(reader)
        .map_err(|e| Error::InvalidLightSet(e.to_string()))?;
    if doc.version != FORMAT_VERSION {
        return Err(Error::InvalidLightSet(format!(
            "unsupported version {}, expected {FORMAT_VERSION}",
            doc.version
        )));
    }
    let lights = doc
        .lights
        .iter()
        .enumerate()
        .map(|(i, rec)| light_from_record(i, rec))
        .collect::<Result<Vec<_>>>()?;
    let ambient = Rgb::new(doc.ambient[0], doc.ambient[1], doc.ambient[2]);
    LightSet::new(lights, ambient)
}

pub fn save_lightset(set: &LightSet, path: &Path) -> Result<()> {
    for light in &set.lights {
        if light.distance <= 0.0
            || light.solid_angle <= 0.0
            || light.solid_angle > 4.0 * PI
            || !light.color.is_non_negative()
        {
            return Err(Error::InvalidLightSet("light violates invariants".into()));
        }
    }
    let doc = LightSetDocument {
        version: FORMAT_VERSION,
        lights: set
            .lights
            .iter()
            .map(|l| LightRecord {
                l: l.direction.to_array(),
                d: l.distance,
                s: l.solid_angle,
                c: l.color.to_array(),
            })
            .collect(),
        ambient: set.ambient.to_array(),
    };
    let mut writer = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut writer, &doc)
        .map_err(|e| Error::InvalidLightSet(e.to_string()))?;
    writer.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_set() -> LightSet {
        let light = Light::new(
            Direction::new(0.0, 0.0, 1.0).unwrap(),
            2.0,
            0.1,
            Rgb::splat(5.0),
        )
        .unwrap();
        LightSet::new(vec![light], Rgb::splat(0.1)).unwrap()
    }

    #[test]
    fn round_trip_preserves_everything() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lights.txt");
        let set = sample_set();
        save_lightset(&set, &path).unwrap();
        let loaded = load_lightset(&path).unwrap();
        assert_eq!(set, loaded);
    }

    #[test]
    fn ambient_only_set_is_valid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lights.txt");
        let set = LightSet::new(vec![], Rgb::splat(0.2)).unwrap();
        save_lightset(&set, &path).unwrap();
        let loaded = load_lightset(&path).unwrap();
        assert_eq!(loaded.len(), 0);
        assert_eq!(loaded.ambient, Rgb::splat(0.2));
    }

    fn write_doc(contents: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lights.txt");
        std::fs::write(&path, contents).unwrap();
        (dir, path)
    }

    #[test]
    fn near_unit_direction_renormalized() {
        let (_dir, path) = write_doc(
            r#"{"version":1,"lights":[{"l":[0.0,0.0,1.01],"d":2.0,"s":0.1,"c":[1,1,1]}],"ambient":[0,0,0]}"#,
        );
        let set = load_lightset(&path).unwrap();
        let d = set.lights[0].direction;
        assert!((d.z() - 1.0).abs() < 1e-12 && d.x() == 0.0 && d.y() == 0.0);
    }

    #[test]
    fn far_from_unit_direction_rejected() {
        let (_dir, path) = write_doc(
            r#"{"version":1,"lights":[{"l":[0.0,0.0,1.05],"d":2.0,"s":0.1,"c":[1,1,1]}],"ambient":[0,0,0]}"#,
        );
        assert!(matches!(load_lightset(&path), Err(Error::InvalidLightSet(_))));
    }

    #[test]
    fn negative_parameters_rejected() {
        for bad in [
            r#"{"version":1,"lights":[{"l":[0,0,1],"d":-2.0,"s":0.1,"c":[1,1,1]}],"ambient":[0,0,0]}"#,
            r#"{"version":1,"lights":[{"l":[0,0,1],"d":2.0,"s":-0.1,"c":[1,1,1]}],"ambient":[0,0,0]}"#,
            r#"{"version":1,"lights":[{"l":[0,0,1],"d":2.0,"s":0.1,"c":[-1,1,1]}],"ambient":[0,0,0]}"#,
        ] {
            let (_dir, path) = write_doc(bad);
            assert!(matches!(load_lightset(&path), Err(Error::InvalidLightSet(_))), "{bad}");
        }
    }

    #[test]
    fn unknown_fields_rejected() {
        let (_dir, path) = write_doc(
            r#"{"version":1,"lights":[],"ambient":[0,0,0],"extra":true}"#,
        );
        assert!(matches!(load_lightset(&path), Err(Error::InvalidLightSet(_))));
    }

    #[test]
    fn unsupported_version_rejected() {
        let (_dir, path) = write_doc(r#"{"version":2,"lights":[],"ambient":[0,0,0]}"#);
        assert!(matches!(load_lightset(&path), Err(Error::InvalidLightSet(_))));
    }
}
