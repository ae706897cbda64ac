//! Procedural ground textures, one archetype per surface class.
//!
//! All generators work at capture resolution (480 × 640, portrait) in gray
//! levels. Sizes below are in capture pixels before the style's `scale`.

use kerbside_core::{Image, SurfaceClass};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CAPTURE_WIDTH: usize = 480;
pub const CAPTURE_HEIGHT: usize = 640;

/// Appearance parameters shared by a city, district, region or frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Style {
    /// Added to every gray level.
    pub brightness: f64,
    /// Multiplies deviations from mid-gray.
    pub contrast: f64,
    /// Multiplies every feature size.
    pub scale: f64,
    /// Amplitude of per-pixel uniform noise, in gray levels.
    pub noise: f64,
}

impl Default for Style {
    fn default() -> Self {
        Style {
            brightness: 0.0,
            contrast: 1.0,
            scale: 1.0,
            noise: 0.0,
        }
    }
}

impl Style {
    /// Composes two offsets: brightness and noise add, contrast and scale
    /// multiply.
    pub fn compose(self, other: Style) -> Style {
        Style {
            brightness: self.brightness + other.brightness,
            contrast: self.contrast * other.contrast,
            scale: self.scale * other.scale,
            noise: self.noise + other.noise,
        }
    }
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn lattice(ix: i64, iy: i64, seed: u64) -> f64 {
    let h = splitmix64(seed ^ splitmix64((ix as u64) ^ splitmix64(iy as u64).rotate_left(17)));
    (h >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

fn smooth(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Smoothly interpolated lattice noise in [-1, 1] with cells `cx × cy`.
fn value_noise(x: f64, y: f64, cx: f64, cy: f64, seed: u64) -> f64 {
    let (fx, fy) = (x / cx, y / cy);
    let (ix, iy) = (fx.floor() as i64, fy.floor() as i64);
    let (tx, ty) = (smooth(fx - ix as f64), smooth(fy - iy as f64));
    let a = lattice(ix, iy, seed);
    let b = lattice(ix + 1, iy, seed);
    let c = lattice(ix, iy + 1, seed);
    let d = lattice(ix + 1, iy + 1, seed);
    let top = a + (b - a) * tx;
    let bottom = c + (d - c) * tx;
    top + (bottom - top) * ty
}

struct Canvas {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl Canvas {
    fn from_fn(width: usize, height: usize, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x as f64, y as f64));
            }
        }
        Canvas { width, height, values }
    }

    fn finish(self, style: &Style, rng: &mut ChaCha8Rng) -> Image {
        let pixels = self
            .values
            .into_iter()
            .map(|v| {
                let n = if style.noise > 0.0 {
                    rng.random_range(-style.noise..=style.noise)
                } else {
                    0.0
                };
                let g = 128.0 + style.brightness + style.contrast * (v - 128.0) + n;
                g.round().clamp(0.0, 255.0) as u8
            })
            .collect();
        Image::gray(self.width, self.height, pixels).expect("canvas size matches buffer")
    }
}

fn asphalt(style: &Style, seed: u64) -> Canvas {
    let s = style.scale;
    Canvas::from_fn(CAPTURE_WIDTH, CAPTURE_HEIGHT, |x, y| {
        let grain = value_noise(x, y, 2.5 * s, 2.5 * s, seed);
        let drift = value_noise(x, y, 60.0 * s, 60.0 * s, seed ^ 1);
        let fleck = lattice(x as i64, y as i64, seed ^ 2);
        100.0 + 9.0 * grain + 6.0 * drift + if fleck > 0.985 { 25.0 } else { 0.0 }
    })
}

fn cobblestone(style: &Style, seed: u64) -> Canvas {
    let cell = 44.0 * style.scale;
    Canvas::from_fn(CAPTURE_WIDTH, CAPTURE_HEIGHT, |x, y| {
        let row = (y / cell).floor();
        // Running bond: odd rows shifted by half a stone.
        let shift = if row as i64 % 2 == 0 { 0.0 } else { 0.5 * cell };
        let col = ((x + shift) / cell).floor();
        let (ri, ci) = (row as i64, col as i64);
        let jitter_x = 0.12 * cell * lattice(ci, ri, seed);
        let jitter_y = 0.12 * cell * lattice(ci, ri, seed ^ 3);
        let cx = (col + 0.5) * cell - shift + jitter_x;
        let cy = (row + 0.5) * cell + jitter_y;
        let radius = 0.40 * cell * (1.0 + 0.08 * lattice(ci, ri, seed ^ 4));
        let (dx, dy) = ((x - cx) / radius, (y - cy) / radius);
        // Superellipse: rounded squares.
        let r = (dx.abs().powi(4) + dy.abs().powi(4)).powf(0.25);
        let fine = value_noise(x, y, 3.0, 3.0, seed ^ 5);
        if r < 1.0 {
            let tone = 128.0 + 22.0 * lattice(ci, ri, seed ^ 6);
            tone - 28.0 * r * r + 6.0 * fine
        } else {
            52.0 + 8.0 * fine
        }
    })
}

fn grass(style: &Style, seed: u64) -> Canvas {
    let s = style.scale;
    Canvas::from_fn(CAPTURE_WIDTH, CAPTURE_HEIGHT, |x, y| {
        // Blades: thin vertical streaks.
        let blades = value_noise(x, y, 1.3 * s, 7.0 * s, seed);
        let clumps = value_noise(x, y, 30.0 * s, 30.0 * s, seed ^ 7);
        let speck = lattice(x as i64, y as i64, seed ^ 8);
        105.0 + 42.0 * blades + 14.0 * clumps + 12.0 * speck
    })
}

struct Patch {
    x: f64,
    y: f64,
    rx: f64,
    ry: f64,
    delta: f64,
}

fn ground(style: &Style, seed: u64) -> Canvas {
    let s = style.scale;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 9);
    let patches: Vec<Patch> = (0..rng.random_range(3..7))
        .map(|_| Patch {
            x: rng.random_range(0.0..CAPTURE_WIDTH as f64),
            y: rng.random_range(0.0..CAPTURE_HEIGHT as f64),
            rx: rng.random_range(30.0..80.0) * s,
            ry: rng.random_range(25.0..60.0) * s,
            delta: rng.random_range(-28.0..28.0),
        })
        .collect();
    Canvas::from_fn(CAPTURE_WIDTH, CAPTURE_HEIGHT, |x, y| {
        let blotch = value_noise(x, y, 26.0 * s, 26.0 * s, seed);
        let pebbles = value_noise(x, y, 6.0 * s, 6.0 * s, seed ^ 10);
        let mut v = 122.0 + 26.0 * blotch + 11.0 * pebbles;
        for p in &patches {
            let d = ((x - p.x) / p.rx).powi(2) + ((y - p.y) / p.ry).powi(2);
            if d < 1.0 {
                v += p.delta * (1.0 - d);
            }
        }
        v
    })
}

fn pavement(style: &Style, seed: u64) -> Canvas {
    let s = style.scale;
    let slab = 100.0 * s;
    let joint = (3.5 * s).max(1.5);
    let phase_x = lattice(0, 0, seed ^ 11).abs() * slab;
    let phase_y = lattice(0, 0, seed ^ 12).abs() * slab;
    Canvas::from_fn(CAPTURE_WIDTH, CAPTURE_HEIGHT, |x, y| {
        let (u, v) = (x + phase_x, y + phase_y);
        let (sx, sy) = ((u / slab).floor(), (v / slab).floor());
        let on_joint = u - sx * slab < joint || v - sy * slab < joint;
        let surface = value_noise(x, y, 40.0 * s, 40.0 * s, seed);
        if on_joint {
            88.0 + 4.0 * surface
        } else {
            158.0 + 7.0 * lattice(sx as i64, sy as i64, seed ^ 13) + 4.0 * surface
        }
    })
}

/// One capture of a non-transition surface. Deterministic in `seed`.
pub fn texture(class: SurfaceClass, style: &Style, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed));
    let field_seed = rng.random::<u64>();
    let canvas = match class {
        SurfaceClass::Asphalt => asphalt(style, field_seed),
        SurfaceClass::Cobblestone => cobblestone(style, field_seed),
        SurfaceClass::Grass => grass(style, field_seed),
        SurfaceClass::GroundUnimproved => ground(style, field_seed),
        SurfaceClass::Pavement => pavement(style, field_seed),
        SurfaceClass::Transition => {
            panic!("transition captures are blends; use transition_texture")
        }
    };
    canvas.finish(style, &mut rng)
}

/// Two surfaces split along a jittered diagonal.
pub fn transition_texture(from: SurfaceClass, to: SurfaceClass, style: &Style, seed: u64) -> Image {
    let a = texture(from, style, seed);
    let b = texture(to, style, splitmix64(seed ^ 0xD1A6));
    let offset = 0.3 * lattice(0, 0, seed ^ 14);
    let (w, h) = (CAPTURE_WIDTH as f64, CAPTURE_HEIGHT as f64);
    Image::from_fn(CAPTURE_WIDTH, CAPTURE_HEIGHT, |x, y| {
        if x as f64 / w + y as f64 / h < 1.0 + offset {
            a.get(x, y, 0)
        } else {
            b.get(x, y, 0)
        }
    })
}
