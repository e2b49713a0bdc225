//! Multi-channel data synthesis with image-source room acoustics.

mod mix;
mod rir;
mod scene;
mod sources;

pub use mix::{noise_gain, power, render_mixture, snr_db, MixtureExample};
pub use rir::{
    delay_samples, direct_path_rir, image_method_rir, images, schroeder_curve, schroeder_t60, Image, Rir,
};
pub use scene::{
    absorption_from_t60, array_positions, distance, Point, Room, RoomScene, ARRAY_RADIUS, DISTANCE_RANGE,
    HEIGHT_RANGE, LENGTH_RANGE, N_MICS, SPEED_OF_SOUND, T60_RANGE, WALL_MARGIN, WIDTH_RANGE,
};
pub use sources::{noise_like, speech_like};
