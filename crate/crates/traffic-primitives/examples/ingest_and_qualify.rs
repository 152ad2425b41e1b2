//! Load raw GPS encounters (latitude/longitude), project them onto a local
//! east-north plane, and qualify them by duration and closest approach.
//!
//! ```bash
//! cargo run --release -p traffic-primitives --example ingest_and_qualify
//! ```

use traffic_primitives::encounter::{
    load_encounter_csv, project_to_local_frame, qualify_encounter, write_encounter_csv,
    DrivingEncounter, Frame, TrajectorySample,
};
use traffic_primitives::synth::{generate_encounter, ScenarioFamily, ScenarioSpec};

/// Turn a metric synthetic encounter into a fake GPS recording around Ann
/// Arbor, the inverse of the equirectangular projection.
fn to_geographic(enc: &DrivingEncounter) -> DrivingEncounter {
    let (lat0, lon0) = (42.2808, -83.7430);
    let m_per_deg = 6_371_008.8_f64.to_radians();
    let to_deg = |p: [f64; 2]| {
        [
            lat0 + p[1] / m_per_deg,
            lon0 + p[0] / (m_per_deg * lat0.to_radians().cos()),
        ]
    };
    DrivingEncounter {
        id: format!("{}_gps", enc.id),
        samples: enc
            .samples
            .iter()
            .map(|s| TrajectorySample {
                t: s.t,
                p1: to_deg(s.p1),
                p2: to_deg(s.p2),
                v1: s.v1,
                v2: s.v2,
            })
            .collect(),
        rate_hz: enc.rate_hz,
        frame: Frame::GeographicDegrees,
    }
}

fn main() -> anyhow::Result<()> {
    let dir = std::env::temp_dir().join("traffic-primitives-example-ingest");
    std::fs::create_dir_all(&dir)?;

    // Three raw recordings: one good, one too short, one too distant.
    let good = to_geographic(
        &generate_encounter(&ScenarioSpec::new(ScenarioFamily::VerticalCross, 1))?.encounter,
    );
    let mut short = to_geographic(
        &generate_encounter(&ScenarioSpec::new(ScenarioFamily::SameDirection, 2))?.encounter,
    );
    short.samples.truncate(60);
    short.id = "too_short_gps".into();
    let far = {
        let mut spec = ScenarioSpec::new(ScenarioFamily::BothStill, 3);
        spec.start1.position = [-90.0, 0.0];
        spec.start2.position = [90.0, 0.0];
        let mut enc = to_geographic(&generate_encounter(&spec)?.encounter);
        enc.id = "too_far_gps".into();
        enc
    };

    for enc in [&good, &short, &far] {
        write_encounter_csv(enc, dir.join(format!("{}.csv", enc.id)))?;
    }

    for name in [good.id.as_str(), "too_short_gps", "too_far_gps"] {
        let raw = load_encounter_csv(dir.join(format!("{name}.csv")))?;
        let local = project_to_local_frame(&raw)?;
        let verdict = qualify_encounter(&local, 10.0, 100.0);
        match verdict.reason() {
            None => println!(
                "{name:<22} qualified  (duration {:.1} s, closest approach {:.1} m)",
                local.duration_s(),
                local.min_mutual_distance(),
            ),
            Some(reason) => println!("{name:<22} rejected   (failed rule: {reason})"),
        }
    }
    Ok(())
}
