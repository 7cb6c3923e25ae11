use acuity::kernel::presets::build_preset;
use acuity::pipeline::score_single;
use acuity::raster::GrayImage;
use std::time::Instant;

fn rand_img(n: usize, seed: u64) -> GrayImage {
    let mut state = seed;
    let px: Vec<f64> = (0..n * n)
        .map(|_| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64).clamp(0.0, 1.0)
        })
        .collect();
    GrayImage::new(n, n, px).unwrap()
}

fn main() {
    let preset = &build_preset("natural-1").unwrap().unwrap()[0];
    for n in [64usize, 128, 256, 512, 1024, 2048] {
        let img = rand_img(n, 42);
        let mut times = vec![];
        for _ in 0..3 {
            let t = Instant::now();
            let s = score_single(&img, &preset.kernel, preset.spec.moment).unwrap();
            times.push(t.elapsed().as_secs_f64());
            std::hint::black_box(s);
        }
        times.sort_by(f64::total_cmp);
        println!("{n}x{n}: median {:.4}s", times[1]);
    }
}
