//! Procedural surface samplers for the toy shape library.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::Distribution;

use crate::cloud::Point;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Shape {
    Sphere,
    Cube,
    Cylinder,
    Cone,
    Torus,
    Pyramid,
    Capsule,
    Ellipsoid,
    LBracket,
    Tube,
    Hemisphere,
    Wedge,
}

impl Shape {
    pub const ALL: [Shape; 12] = [
        Shape::Sphere,
        Shape::Cube,
        Shape::Cylinder,
        Shape::Cone,
        Shape::Torus,
        Shape::Pyramid,
        Shape::Capsule,
        Shape::Ellipsoid,
        Shape::LBracket,
        Shape::Tube,
        Shape::Hemisphere,
        Shape::Wedge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Shape::Sphere => "sphere",
            Shape::Cube => "cube",
            Shape::Cylinder => "cylinder",
            Shape::Cone => "cone",
            Shape::Torus => "torus",
            Shape::Pyramid => "pyramid",
            Shape::Capsule => "capsule",
            Shape::Ellipsoid => "ellipsoid",
            Shape::LBracket => "l_bracket",
            Shape::Tube => "tube",
            Shape::Hemisphere => "hemisphere",
            Shape::Wedge => "wedge",
        }
    }

    /// Points sampled uniformly by area on one randomly sized instance,
    /// in the shape's own frame.
    pub fn sample<R: Rng + ?Sized>(self, n: usize, rng: &mut R) -> Vec<Point> {
        let patches = self.patches(rng);
        sample_patches(&patches, n, rng)
    }

    fn patches<R: Rng + ?Sized>(self, rng: &mut R) -> Vec<Patch> {
        let mut j = || rng.random_range(0.9..1.1);
        match self {
            Shape::Sphere => vec![Patch::Zone { center: 0.0, r: 1.0, lo: -1.0, hi: 1.0 }],
            Shape::Cube => cuboid([j(), j(), j()]),
            Shape::Cylinder => {
                let (r, h) = (0.5 * j(), j());
                vec![
                    Patch::Side { r, z0: -h, z1: h },
                    Patch::Disk { z: -h, r0: 0.0, r1: r },
                    Patch::Disk { z: h, r0: 0.0, r1: r },
                ]
            }
            Shape::Cone => {
                let (r, h) = (0.7 * j(), 1.6 * j());
                vec![Patch::Cone { r, h, base: -h / 2.0 }, Patch::Disk { z: -h / 2.0, r0: 0.0, r1: r }]
            }
            Shape::Torus => vec![Patch::Torus { big: 0.8 * j(), small: 0.25 * j() }],
            Shape::Pyramid => {
                let (s, h) = (0.8 * j(), 1.4 * j());
                let z0 = -h / 3.0;
                let apex = [0.0, 0.0, z0 + h];
                let c = [[-s, -s, z0], [s, -s, z0], [s, s, z0], [-s, s, z0]];
                let mut out: Vec<Patch> = (0..4).map(|i| Patch::Tri([c[i], c[(i + 1) % 4], apex])).collect();
                out.push(Patch::Tri([c[0], c[1], c[2]]));
                out.push(Patch::Tri([c[0], c[2], c[3]]));
                out
            }
            Shape::Capsule => {
                let (r, half) = (0.4 * j(), 0.6 * j());
                vec![
                    Patch::Side { r, z0: -half, z1: half },
                    Patch::Zone { center: half, r, lo: 0.0, hi: r },
                    Patch::Zone { center: -half, r, lo: -r, hi: 0.0 },
                ]
            }
            Shape::Ellipsoid => vec![Patch::Ellipsoid([j(), 0.6 * j(), 0.4 * j()])],
            Shape::LBracket => {
                let (a, t, d) = (2.0 * j(), 0.6 * j(), 0.6 * j());
                let outline = [[0.0, 0.0], [a, 0.0], [a, t], [t, t], [t, a], [0.0, a]];
                let caps = [
                    [[0.0, 0.0], [a, 0.0], [a, t]],
                    [[0.0, 0.0], [a, t], [0.0, t]],
                    [[0.0, t], [t, t], [t, a]],
                    [[0.0, t], [t, a], [0.0, a]],
                ];
                extrude(&outline, &caps, d)
            }
            Shape::Tube => {
                let (r, h) = (0.5 * j(), j());
                let inner = 0.7 * r;
                vec![
                    Patch::Side { r, z0: -h, z1: h },
                    Patch::Side { r: inner, z0: -h, z1: h },
                    Patch::Disk { z: -h, r0: inner, r1: r },
                    Patch::Disk { z: h, r0: inner, r1: r },
                ]
            }
            Shape::Hemisphere => vec![
                Patch::Zone { center: 0.0, r: 1.0, lo: 0.0, hi: 1.0 },
                Patch::Disk { z: 0.0, r0: 0.0, r1: 1.0 },
            ],
            Shape::Wedge => {
                let (a, b, d) = (2.0 * j(), j(), j());
                let outline = [[0.0, 0.0], [a, 0.0], [0.0, b]];
                extrude(&outline, &[outline], d)
            }
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Shape::ALL
            .into_iter()
            .find(|shape| shape.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown shape `{s}`")))
    }
}

enum Patch {
    Tri([Point; 3]),
    /// Flat annulus (a disk when `r0 = 0`) in the plane `z`.
    Disk { z: f64, r0: f64, r1: f64 },
    /// Open cylinder wall around the z axis.
    Side { r: f64, z0: f64, z1: f64 },
    /// Lateral cone surface with its apex above the base.
    Cone { r: f64, h: f64, base: f64 },
    /// Slice `lo ≤ z − center ≤ hi` of a sphere centred on the z axis.
    Zone { center: f64, r: f64, lo: f64, hi: f64 },
    Torus { big: f64, small: f64 },
    Ellipsoid([f64; 3]),
}

impl Patch {
    fn area(&self) -> f64 {
        match *self {
            Patch::Tri([a, b, c]) => {
                let u = crate::cloud::sub(&b, &a);
                let v = crate::cloud::sub(&c, &a);
                0.5 * crate::cloud::norm3(&crate::cloud::cross(&u, &v))
            }
            Patch::Disk { r0, r1, .. } => PI * (r1 * r1 - r0 * r0),
            Patch::Side { r, z0, z1 } => TAU * r * (z1 - z0),
            Patch::Cone { r, h, .. } => PI * r * (r * r + h * h).sqrt(),
            Patch::Zone { r, lo, hi, .. } => TAU * r * (hi - lo),
            Patch::Torus { big, small } => TAU * TAU * big * small,
            Patch::Ellipsoid([a, b, c]) => {
                // Thomsen's approximation; only used for mixing weights.
                let p = 1.6075;
                let m = ((a * b).powf(p) + (a * c).powf(p) + (b * c).powf(p)) / 3.0;
                2.0 * TAU * m.powf(1.0 / p)
            }
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let theta = rng.random_range(0.0..TAU);
        match *self {
            Patch::Tri([a, b, c]) => {
                let (mut u, mut v): (f64, f64) = (rng.random(), rng.random());
                if u + v > 1.0 {
                    u = 1.0 - u;
                    v = 1.0 - v;
                }
                std::array::from_fn(|k| a[k] + u * (b[k] - a[k]) + v * (c[k] - a[k]))
            }
            Patch::Disk { z, r0, r1 } => {
                let rho = (r0 * r0 + rng.random::<f64>() * (r1 * r1 - r0 * r0)).sqrt();
                [rho * theta.cos(), rho * theta.sin(), z]
            }
            Patch::Side { r, z0, z1 } => [r * theta.cos(), r * theta.sin(), rng.random_range(z0..z1)],
            Patch::Cone { r, h, base } => {
                let t = rng.random::<f64>().sqrt();
                [r * t * theta.cos(), r * t * theta.sin(), base + h * (1.0 - t)]
            }
            Patch::Zone { center, r, lo, hi } => {
                let z = rng.random_range(lo..hi);
                let rho = (r * r - z * z).max(0.0).sqrt();
                [rho * theta.cos(), rho * theta.sin(), center + z]
            }
            Patch::Torus { big, small } => loop {
                let v = rng.random_range(0.0..TAU);
                if rng.random::<f64>() * (big + small) <= big + small * v.cos() {
                    let rho = big + small * v.cos();
                    break [rho * theta.cos(), rho * theta.sin(), small * v.sin()];
                }
            },
            Patch::Ellipsoid([a, b, c]) => {
                let min = a.min(b).min(c);
                loop {
                    let u: [f64; 3] = rand_distr::UnitSphere.sample(rng);
                    let g = ((u[0] / a).powi(2) + (u[1] / b).powi(2) + (u[2] / c).powi(2)).sqrt();
                    if rng.random::<f64>() <= g * min {
                        break [a * u[0], b * u[1], c * u[2]];
                    }
                }
            }
        }
    }
}

fn sample_patches<R: Rng + ?Sized>(patches: &[Patch], n: usize, rng: &mut R) -> Vec<Point> {
    let weights: Vec<f64> = patches.iter().map(Patch::area).collect();
    let pick = WeightedIndex::new(&weights).expect("every shape has positive area");
    (0..n).map(|_| patches[pick.sample(rng)].sample(rng)).collect()
}

fn cuboid(half: [f64; 3]) -> Vec<Patch> {
    let corner = |m: usize| -> Point { std::array::from_fn(|k| if m >> k & 1 == 1 { half[k] } else { -half[k] }) };
    let faces = [[0, 1, 3, 2], [4, 5, 7, 6], [0, 1, 5, 4], [2, 3, 7, 6], [0, 2, 6, 4], [1, 3, 7, 5]];
    faces
        .iter()
        .flat_map(|f| {
            [
                Patch::Tri([corner(f[0]), corner(f[1]), corner(f[2])]),
                Patch::Tri([corner(f[0]), corner(f[2]), corner(f[3])]),
            ]
        })
        .collect()
}

/// Prism over a planar outline with the given cap triangulation.
fn extrude(outline: &[[f64; 2]], caps: &[[[f64; 2]; 3]], depth: f64) -> Vec<Patch> {
    let lift = |p: [f64; 2], z: f64| [p[0], p[1], z];
    let mut out = Vec::new();
    for t in caps {
        out.push(Patch::Tri(t.map(|p| lift(p, 0.0))));
        out.push(Patch::Tri(t.map(|p| lift(p, depth))));
    }
    for i in 0..outline.len() {
        let (p, q) = (outline[i], outline[(i + 1) % outline.len()]);
        out.push(Patch::Tri([lift(p, 0.0), lift(q, 0.0), lift(q, depth)]));
        out.push(Patch::Tri([lift(p, 0.0), lift(q, depth), lift(p, depth)]));
    }
    out
}
