#![no_main]

use libfuzzer_sys::fuzz_target;
use tcs_loss::pauli::PauliString;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(p) = text.parse::<PauliString>() {
        let again: PauliString = p.to_string().parse().expect("display output parses");
        assert_eq!(again, p);
        let sq = p.mul(&p).expect("same length");
        assert!(sq.is_identity());
    }
});
