#![no_main]

use libfuzzer_sys::fuzz_target;
use tcs_loss::analysis::{curves_by_loss, overhead_table, read_curves, Convention};

fuzz_target!(|data: &[u8]| {
    if let Ok(points) = read_curves(data) {
        let curves = curves_by_loss(&points);
        let _ = overhead_table(&curves, 1e-15, 15, Convention::Floor);
    }
});
