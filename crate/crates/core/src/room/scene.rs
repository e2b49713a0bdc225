//! Random shoebox rooms, microphone array and source placement.

use alloc::vec::Vec;

use num_traits::Float;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const SPEED_OF_SOUND: f64 = 340.0;
pub const WALL_MARGIN: f64 = 0.1;
pub const ARRAY_RADIUS: f64 = 0.1;
pub const N_MICS: usize = 6;

pub const LENGTH_RANGE: (f64, f64) = (4.0, 10.0);
pub const WIDTH_RANGE: (f64, f64) = (4.0, 10.0);
pub const HEIGHT_RANGE: (f64, f64) = (2.5, 3.0);
pub const T60_RANGE: (f64, f64) = (0.3, 0.8);
pub const DISTANCE_RANGE: (f64, f64) = (0.2, 1.0);
const MAX_TRIES: usize = 10_000;

pub type Point = [f64; 3];

pub fn distance(a: Point, b: Point) -> f64 {
    Float::sqrt((0..3).map(|i| (a[i] - b[i]) * (a[i] - b[i])).sum::<f64>())
}

/// Room geometry and reverberation time, shared by several placements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Room {
    /// Length, width, height in metres.
    pub dims: Point,
    pub t60: f64,
}

impl Room {
    pub fn volume(&self) -> f64 {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn surface(&self) -> f64 {
        let [l, w, h] = self.dims;
        2.0 * (l * w + l * h + w * h)
    }

    pub fn sample(rng: &mut ChaCha8Rng) -> Self {
        let mut u = |r: (f64, f64)| rng.random_range(r.0..=r.1);
        let dims = [u(LENGTH_RANGE), u(WIDTH_RANGE), u(HEIGHT_RANGE)];
        Self { dims, t60: u(T60_RANGE) }
    }

    pub fn contains(&self, p: Point, margin: f64) -> bool {
        (0..3).all(|i| p[i] >= margin && p[i] <= self.dims[i] - margin)
    }
}

/// A room with one source and a six-microphone array.
#[derive(Debug, Clone, PartialEq)]
pub struct RoomScene {
    pub room: Room,
    pub source: Point,
    pub array_center: Point,
    pub mics: Vec<Point>,
}

/// Six microphones on the axes of a sphere of radius `ARRAY_RADIUS`.
pub fn array_positions(center: Point) -> Vec<Point> {
    let mut out = Vec::with_capacity(N_MICS);
    for axis in 0..3 {
        for sign in [1.0, -1.0] {
            let mut p = center;
            p[axis] += sign * ARRAY_RADIUS;
            out.push(p);
        }
    }
    out
}

impl RoomScene {
    pub fn source_distance(&self) -> f64 {
        distance(self.source, self.array_center)
    }

    /// Places the array and source uniformly in `room`, rejecting draws that
    /// violate the wall margin.
    pub fn sample_in(room: Room, rng: &mut ChaCha8Rng) -> Result<Self> {
        let m = WALL_MARGIN + ARRAY_RADIUS;
        for _ in 0..MAX_TRIES {
            let center = [
                rng.random_range(m..room.dims[0] - m),
                rng.random_range(m..room.dims[1] - m),
                rng.random_range(m..room.dims[2] - m),
            ];
            let d = rng.random_range(DISTANCE_RANGE.0..=DISTANCE_RANGE.1);
            // Uniform direction on the sphere.
            let z: f64 = rng.random_range(-1.0..=1.0);
            let phi: f64 = rng.random_range(0.0..core::f64::consts::TAU);
            let r = Float::sqrt(1.0 - z * z);
            let dir = [r * Float::cos(phi), r * Float::sin(phi), z];
            let source = [center[0] + d * dir[0], center[1] + d * dir[1], center[2] + d * dir[2]];
            if room.contains(source, WALL_MARGIN) {
                return Ok(Self {
                    room,
                    source,
                    array_center: center,
                    mics: array_positions(center),
                });
            }
        }
        Err(Error::Generation("could not place source and array inside the room".into()))
    }

    pub fn sample(seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let room = Room::sample(&mut rng);
        Self::sample_in(room, &mut rng)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Generation(m.into()));
        let [l, w, h] = self.room.dims;
        if !(LENGTH_RANGE.0..=LENGTH_RANGE.1).contains(&l)
            || !(WIDTH_RANGE.0..=WIDTH_RANGE.1).contains(&w)
            || !(HEIGHT_RANGE.0..=HEIGHT_RANGE.1).contains(&h)
        {
            return bad("room dimensions out of range");
        }
        if !(T60_RANGE.0..=T60_RANGE.1).contains(&self.room.t60) {
            return bad("t60 out of range");
        }
        if !self.room.contains(self.source, WALL_MARGIN)
            || self.mics.iter().any(|&p| !self.room.contains(p, WALL_MARGIN))
        {
            return bad("position closer than the wall margin");
        }
        if self.mics.len() != N_MICS
            || self
                .mics
                .iter()
                .any(|&p| Float::abs(distance(p, self.array_center) - ARRAY_RADIUS) > 1e-9)
        {
            return bad("microphones not on the array sphere");
        }
        let d = self.source_distance();
        if !(DISTANCE_RANGE.0 - 1e-12..=DISTANCE_RANGE.1 + 1e-12).contains(&d) {
            return bad("source distance out of range");
        }
        Ok(())
    }
}

/// Uniform wall absorption giving `t60` by Sabine's formula.
pub fn absorption_from_t60(room: &Room) -> Result<f64> {
    if !(room.t60 > 0.0) {
        return Err(Error::Generation("t60 must be positive".into()));
    }
    let a = 0.161 * room.volume() / (room.surface() * room.t60);
    if a > 0.99 {
        return Err(Error::Generation("room too small for the requested t60".into()));
    }
    Ok(a)
}
