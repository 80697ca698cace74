#![no_main]

use libfuzzer_sys::fuzz_target;
use tcs_loss::decoder::{mwpm_table, DistanceTable};
use tcs_loss::lattice::Side;
use tcs_loss::matching::brute_force_min;

// Byte layout: event count, then one byte per upper-triangle pair weight
// (0 = unreachable), then one byte per boundary weight (0 = none).
fuzz_target!(|data: &[u8]| {
    let Some((&count, rest)) = data.split_first() else { return };
    let n = (count % 9) as usize;
    let pairs = n * n.saturating_sub(1) / 2;
    if rest.len() < pairs + n {
        return;
    }
    let mut pair = vec![i64::MAX; n * n];
    let mut k = 0;
    for i in 0..n {
        pair[i * n + i] = 0;
        for j in i + 1..n {
            if rest[k] != 0 {
                pair[i * n + j] = rest[k] as i64;
                pair[j * n + i] = rest[k] as i64;
            }
            k += 1;
        }
    }
    let boundary: Vec<Option<(i64, Side, bool)>> =
        rest[pairs..pairs + n].iter().map(|&b| (b != 0).then(|| (b as i64, if b % 2 == 0 { Side::Low } else { Side::High }, b % 2 == 0))).collect();
    let table = DistanceTable { n, pair_parity: vec![false; n * n], pair, boundary };
    let rows: Vec<Vec<i64>> = (0..n).map(|i| (0..n).map(|j| table.pair(i, j)).collect()).collect();
    let costs: Vec<Option<i64>> = table.boundary.iter().map(|b| b.map(|x| x.0)).collect();
    let exact = brute_force_min(&rows, &costs);
    let got = mwpm_table(&table).ok().map(|m| m.weight);
    assert_eq!(got, exact);
});
