//! Number formatting shared by the CSV and JSON writers.

/// Round-trip-safe scientific notation with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    if v == 0.0 {
        // Avoid "-0" noise in snapshots.
        return "0.0000000000000000e0".to_string();
    }
    format!("{v:.16e}")
}
