//! Seeded synthetic cities: region polygons, walked frame traces with
//! ground-truth labels, and one procedural capture per frame.
//!
//! Every random draw comes from a stream keyed by `(seed, purpose, index)`,
//! so outputs do not depend on thread scheduling.

pub mod texture;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use kerbside_core::frame::{Frame, FrameSet, GeoPoint, Region, RegionSet};
use kerbside_core::geo::assign_regions;
use kerbside_core::taxonomy::{SurfaceClass, parse_surface_class};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imageio::{ImageFormat, write_image};
use crate::manifest::save_manifest;
use crate::regions::save_regions;
use texture::{Style, splitmix64, texture, transition_texture};

/// Seed used by the CLI when none is given.
pub const DEFAULT_SEED: u64 = 42;
/// Appearance shift of the extra cities in the default cross-city setup.
pub const LARGE_STYLE_SHIFT: f64 = 2.0;

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const REGIONS_FILE: &str = "regions.geojson";
pub const IMAGE_DIR: &str = "images";

/// Degrees between consecutive frames along a walk.
const STEP_DEG: f64 = 1e-5;
/// Side of each square region, in degrees.
const REGION_SIDE_DEG: f64 = 0.01;
const REGION_PITCH_DEG: f64 = 0.012;
const CITY_PITCH_DEG: f64 = 0.05;
const FRAME_INTERVAL_MS: i64 = 800;
const START_MS: i64 = 1_600_000_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitySpec {
    pub name: String,
    pub n_regions: usize,
    /// Magnitude of the city-wide appearance change (0 = none).
    pub style_shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub cities: Vec<CitySpec>,
    pub segments_per_region: usize,
    /// Inclusive `[min, max]` frames per segment, transitions excluded.
    pub frames_per_segment_range: (usize, usize),
    /// Relative weight per canonical class name; transition is ignored.
    pub class_mix: BTreeMap<String, f64>,
    /// 0..=1; scales per-pixel noise.
    pub noise_level: f64,
    /// Appearance spread between adjacent-region pairs (districts).
    #[serde(default = "default_district_jitter")]
    pub district_jitter: f64,
    /// Appearance spread between the two regions of a district.
    #[serde(default = "default_region_jitter")]
    pub region_jitter: f64,
    /// South-west corner of the first city's first region, `[lat, lon]`.
    #[serde(default = "default_origin")]
    pub origin: (f64, f64),
    #[serde(default)]
    pub image_format: SynthImageFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthImageFormat {
    #[default]
    Pgm,
    Png,
}

fn default_district_jitter() -> f64 {
    2.0
}

fn default_region_jitter() -> f64 {
    0.2
}

fn default_origin() -> (f64, f64) {
    (53.07, 8.80)
}

/// Frame shares of the five surfaces across all regions of the collected
/// corpus (asphalt 5643, cobblestone 5326, grass 2754, ground 8023,
/// pavement 17390).
pub fn corpus_class_mix() -> BTreeMap<String, f64> {
    [
        ("asphalt", 5643.0),
        ("cobblestone", 5326.0),
        ("grass", 2754.0),
        ("ground_unimproved", 8023.0),
        ("pavement", 17390.0),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

impl GeneratorConfig {
    /// One six-region city, corpus class mix.
    pub fn bremen_like(seed: u64) -> Self {
        GeneratorConfig {
            seed,
            cities: vec![CitySpec {
                name: "Bremen".into(),
                n_regions: 6,
                style_shift: 0.0,
            }],
            segments_per_region: 10,
            frames_per_segment_range: (8, 14),
            class_mix: corpus_class_mix(),
            noise_level: 0.75,
            district_jitter: default_district_jitter(),
            region_jitter: default_region_jitter(),
            origin: default_origin(),
            image_format: SynthImageFormat::Pgm,
        }
    }

    /// Six Bremen regions plus one region each for two more cities whose
    /// appearance is shifted by `style_shift`.
    pub fn three_cities(seed: u64, style_shift: f64) -> Self {
        let mut config = Self::bremen_like(seed);
        config.cities.push(CitySpec {
            name: "Hamburg".into(),
            n_regions: 1,
            style_shift,
        });
        config.cities.push(CitySpec {
            name: "Hannover".into(),
            n_regions: 1,
            style_shift,
        });
        config
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.into()));
        if self.cities.is_empty() || self.cities.iter().any(|c| c.n_regions == 0) {
            return bad("every city needs at least one region");
        }
        if self.cities.iter().any(|c| c.style_shift.is_nan() || c.style_shift < 0.0) {
            return bad("style_shift must be >= 0");
        }
        let (lo, hi) = self.frames_per_segment_range;
        if lo == 0 || lo > hi {
            return bad("frames_per_segment_range must satisfy 1 <= min <= max");
        }
        if self.segments_per_region == 0 {
            return bad("segments_per_region must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.noise_level) {
            return bad("noise_level must be in [0, 1]");
        }
        if !(self.district_jitter >= 0.0 && self.region_jitter >= 0.0) {
            return bad("jitter must be >= 0");
        }
        let mut any = false;
        for (name, w) in &self.class_mix {
            let class = parse_surface_class(name).map_err(|e| Error::Config(e.to_string()))?;
            if !(*w >= 0.0 && w.is_finite()) {
                return bad("class weights must be finite and >= 0");
            }
            any |= *w > 0.0 && !class.is_transition();
        }
        if !any {
            return bad("at least one surface class needs a positive weight");
        }
        if self.cities.iter().map(|c| c.n_regions).sum::<usize>() > 26 {
            return bad("at most 26 regions (ids A-Z)");
        }
        Ok(())
    }

    fn weights(&self) -> [f64; 5] {
        let mut w = [0.0; 5];
        for (name, weight) in &self.class_mix {
            if let Ok(c) = parse_surface_class(name) {
                if !c.is_transition() {
                    w[c.index()] += weight;
                }
            }
        }
        w
    }
}

/// A generated dataset on disk.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub frames: FrameSet,
    pub regions: RegionSet,
    pub manifest_path: PathBuf,
    pub regions_path: PathBuf,
    pub image_root: PathBuf,
}

/// Per-purpose random stream.
fn stream(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(purpose.wrapping_mul(0x1000_0001) ^ splitmix64(index))))
}

/// Uniform offsets in `[-1, 1]` for (brightness, log-contrast, log-scale).
fn style_offset(rng: &mut ChaCha8Rng, magnitude: f64) -> Style {
    let mut u = || rng.random_range(-1.0..=1.0f64);
    Style {
        brightness: 18.0 * magnitude * u(),
        contrast: (0.25 * magnitude * u()).exp(),
        scale: (0.1 * magnitude * u()).exp(),
        noise: 0.0,
    }
}

/// A random direction of unit length scaled by `shift`.
fn city_offset(rng: &mut ChaCha8Rng, shift: f64) -> Style {
    let v: [f64; 3] = [
        rng.random_range(-1.0..=1.0),
        rng.random_range(-1.0..=1.0),
        rng.random_range(-1.0..=1.0),
    ];
    let norm = (v.iter().map(|x| x * x).sum::<f64>()).sqrt().max(1e-9);
    Style {
        brightness: 45.0 * shift * v[0] / norm,
        contrast: (0.5 * shift * v[1] / norm).exp(),
        scale: (0.5 * shift * v[2] / norm).exp(),
        noise: 0.0,
    }
}

/// Largest-remainder apportionment of `n` slots to the weights.
fn apportion(weights: &[f64; 5], n: usize) -> Vec<SurfaceClass> {
    let total: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / total * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..5).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let short = n - counts.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        counts[i] += 1;
    }
    counts
        .iter()
        .enumerate()
        .flat_map(|(i, c)| std::iter::repeat_n(SurfaceClass::SURFACES[i], *c))
        .collect()
}

enum Capture {
    Surface(SurfaceClass),
    Blend(SurfaceClass, SurfaceClass),
}

struct PlannedFrame {
    frame: Frame,
    capture: Capture,
    style: Style,
    seed: u64,
}

fn region_letter(i: usize) -> String {
    char::from(b'A' + i as u8).to_string()
}

/// Builds regions and the labelled traces without touching the disk.
fn plan(config: &GeneratorConfig) -> Result<(RegionSet, Vec<PlannedFrame>)> {
    config.validate()?;
    let weights = config.weights();
    let (min_frames, max_frames) = config.frames_per_segment_range;
    let pixel_noise = Style {
        noise: 40.0 * config.noise_level,
        ..Style::default()
    };

    let mut regions = Vec::new();
    let mut planned = Vec::new();
    let mut region_index = 0usize;
    for (city_index, city) in config.cities.iter().enumerate() {
        let city_style = city_offset(&mut stream(config.seed, 1, city_index as u64), city.style_shift);
        let mut classes = apportion(&weights, city.n_regions * config.segments_per_region);
        classes.shuffle(&mut stream(config.seed, 2, city_index as u64));

        let mut districts = Vec::new();
        for local in 0..city.n_regions {
            let region_id = region_letter(region_index);
            let lat0 = config.origin.0 + city_index as f64 * CITY_PITCH_DEG;
            let lon0 = config.origin.1 + local as f64 * REGION_PITCH_DEG;
            let corner = |dlat: f64, dlon: f64| GeoPoint {
                lat: lat0 + dlat,
                lon: lon0 + dlon,
            };
            regions.push(Region::new(
                region_id.clone(),
                city.name.clone(),
                vec![
                    corner(0.0, 0.0),
                    corner(0.0, REGION_SIDE_DEG),
                    corner(REGION_SIDE_DEG, REGION_SIDE_DEG),
                    corner(REGION_SIDE_DEG, 0.0),
                ],
            )?);

            let district = local / 2;
            if districts.len() <= district {
                let key = (city_index * 64 + district) as u64;
                districts.push(style_offset(&mut stream(config.seed, 3, key), config.district_jitter));
            }
            let region_style = city_style
                .compose(districts[district])
                .compose(style_offset(&mut stream(config.seed, 4, region_index as u64), config.region_jitter))
                .compose(pixel_noise);

            let mut walk = stream(config.seed, 5, region_index as u64);
            let mut clock = START_MS + region_index as i64 * 100_000_000;
            let mut previous: Option<SurfaceClass> = None;
            let mut seq = 0usize;
            let region_classes = &classes[local * config.segments_per_region..(local + 1) * config.segments_per_region];
            for (s, &class) in region_classes.iter().enumerate() {
                let segment_id = format!("{region_id}-s{s:02}");
                let n_frames = walk.random_range(min_frames..=max_frames);
                let n_transitions = match previous {
                    Some(p) if p != class => walk.random_range(1..=2),
                    _ => 0,
                };
                let total = n_frames + n_transitions;
                let angle = walk.random_range(0.0..std::f64::consts::TAU);
                let (dlat, dlon) = (angle.sin() * STEP_DEG, angle.cos() * STEP_DEG);
                let margin = total as f64 * STEP_DEG + 1e-4;
                let start_lat = walk.random_range(margin..REGION_SIDE_DEG - margin);
                let start_lon = walk.random_range(margin..REGION_SIDE_DEG - margin);
                clock += 30_000;
                for k in 0..total {
                    let location = GeoPoint {
                        lat: lat0 + start_lat + dlat * k as f64,
                        lon: lon0 + start_lon + dlon * k as f64,
                    };
                    clock += FRAME_INTERVAL_MS + walk.random_range(-40..=40);
                    let frame_id = format!("{region_id}-{seq:05}");
                    let (label, capture) = if k < n_transitions {
                        (SurfaceClass::Transition, Capture::Blend(previous.unwrap(), class))
                    } else {
                        (class, Capture::Surface(class))
                    };
                    let frame = Frame::new(frame_id.clone(), clock, location, format!("{IMAGE_DIR}/{frame_id}.{}", image_format(config).extension()))
                        .with_label(label)
                        .with_segment(segment_id.clone());
                    planned.push(PlannedFrame {
                        frame,
                        capture,
                        style: region_style,
                        seed: splitmix64(config.seed ^ splitmix64(0xF00D ^ (region_index as u64) << 32 ^ seq as u64)),
                    });
                    seq += 1;
                }
                previous = Some(class);
            }
            region_index += 1;
        }
    }
    Ok((RegionSet::new(regions)?, planned))
}

fn image_format(config: &GeneratorConfig) -> ImageFormat {
    match config.image_format {
        SynthImageFormat::Pgm => ImageFormat::Pnm,
        SynthImageFormat::Png => ImageFormat::Png,
    }
}

/// The labelled frames and regions `generate` would write, without images.
pub fn plan_frames(config: &GeneratorConfig) -> Result<(FrameSet, RegionSet)> {
    let (regions, planned) = plan(config)?;
    let frames = FrameSet::new(planned.into_iter().map(|p| p.frame).collect())?;
    let (frames, _) = assign_regions(frames, &regions)?;
    Ok((frames, regions))
}

/// Writes `manifest.csv`, `regions.geojson` and `images/` under `out_dir`.
pub fn generate(config: &GeneratorConfig, out_dir: &Path) -> Result<Dataset> {
    let (regions, planned) = plan(config)?;
    let image_root = out_dir.to_path_buf();
    let image_dir = out_dir.join(IMAGE_DIR);
    fs::create_dir_all(&image_dir).map_err(|e| Error::io(&image_dir, e))?;
    let format = image_format(config);

    planned.par_iter().try_for_each(|p| {
        let img = match p.capture {
            Capture::Surface(c) => texture(c, &p.style, p.seed),
            Capture::Blend(a, b) => transition_texture(a, b, &p.style, p.seed),
        };
        write_image(&image_root.join(&p.frame.image_ref), &img, format)
    })?;

    let frames = FrameSet::new(planned.into_iter().map(|p| p.frame).collect())?;
    let manifest_path = out_dir.join(MANIFEST_FILE);
    let regions_path = out_dir.join(REGIONS_FILE);
    save_manifest(&manifest_path, &frames)?;
    save_regions(&regions_path, &regions)?;
    let (frames, _) = assign_regions(frames, &regions)?;
    Ok(Dataset {
        frames,
        regions,
        manifest_path,
        regions_path,
        image_root,
    })
}
