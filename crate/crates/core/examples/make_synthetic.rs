//! Writes a small separable face-like dataset: `s1..s5/1..10.pgm` plus
//! `manifest.txt` and a two-class `manifest-2class.txt`.
//!
//! Usage: `cargo run -p facebn --example make_synthetic -- <out-dir>`

use std::fs;
use std::path::PathBuf;

use facebn::imaging::{save_image, GrayImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SIDE: usize = 24;
const BLOCK: usize = SIDE / 3;
const CLASSES: usize = 5;
const PER_CLASS: usize = 10;

/// Base intensity of block type `t` at pixel (x, y). Types 0-3 are flat,
/// 4-5 checkerboards, 6-7 horizontal stripes; all levels sit mid-bin for 8
/// gray levels so small noise never changes a GLCM bin.
fn block_value(t: usize, x: usize, y: usize) -> i32 {
    const LEVELS: [i32; 4] = [48, 112, 176, 240];
    match t {
        0..=3 => LEVELS[t],
        4 | 5 => LEVELS[2 * (t - 4) + (x + y) % 2],
        _ => LEVELS[2 * (t - 6) + y % 2],
    }
}

fn face(class: usize, rng: &mut ChaCha8Rng) -> GrayImage {
    let mut pixels = Vec::with_capacity(SIDE * SIDE);
    for y in 0..SIDE {
        for x in 0..SIDE {
            let block = (y / BLOCK) * 3 + x / BLOCK;
            let t = (block + class) % 8;
            let v = block_value(t, x, y) + rng.gen_range(-4..=4);
            pixels.push(v.clamp(0, 255) as u8);
        }
    }
    GrayImage::new(SIDE, SIDE, pixels).expect("valid size")
}

fn main() {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "synthetic5".into()));
    let mut rng = ChaCha8Rng::seed_from_u64(2013);
    let mut manifest = String::from("# synthetic 5-class set, 24x24, 10 images per class\n");
    let mut two = String::from("# first two classes of the synthetic set\n");
    for class in 0..CLASSES {
        let dir = out.join(format!("s{}", class + 1));
        fs::create_dir_all(&dir).expect("create class directory");
        for i in 1..=PER_CLASS {
            save_image(dir.join(format!("{i}.pgm")), &face(class, &mut rng)).expect("write image");
            let line = format!("s{}/{i}.pgm {class}\n", class + 1);
            if class < 2 {
                two.push_str(&line);
            }
            manifest.push_str(&line);
        }
    }
    fs::write(out.join("manifest.txt"), manifest).expect("write manifest");
    fs::write(out.join("manifest-2class.txt"), two).expect("write manifest");
}
