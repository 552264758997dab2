use eventmem::topics::cluster_count;

use crate::ensure;

pub fn check() -> Result<String, String> {
    for n in 1..=300usize {
        let floor = n / 5;
        let expected = if floor > 50 { 50 } else if floor < 2 { 2 } else { floor };
        let got = cluster_count(n).map_err(|e| e.to_string())?;
        ensure!(got == expected, "n={n}: got {got}, expected {expected}");
    }
    ensure!(cluster_count(0).is_err(), "n=0 accepted");
    Ok("n = 1..=300".into())
}
