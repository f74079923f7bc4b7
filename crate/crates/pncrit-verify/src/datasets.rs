//! Reference cell counts used by golden tests: abalone observations
//! cross-classified by sex (female, infant, male) and ring count, with
//! sparse outer ring classes already merged into their neighbors. Total
//! 4177 observations in 63 cells, so the categorical model has p = 62.

/// Female abalone counts for ring classes 5 through 24.
pub const ABALONE_FEMALE: [u64; 20] = [
    4, 16, 44, 122, 238, 248, 200, 128, 88, 56, 41, 30, 26, 19, 15, 12, 7, 3, 6, 4,
];

/// Infant abalone counts for ring classes 1 through 21.
pub const ABALONE_INFANT: [u64; 21] = [
    1, 1, 12, 51, 100, 216, 267, 274, 173, 92, 62, 21, 24, 14, 10, 7, 7, 5, 2, 2, 1,
];

/// Male abalone counts for ring classes 3 through 24.
pub const ABALONE_MALE: [u64; 22] = [
    3, 6, 11, 27, 80, 172, 278, 294, 225, 118, 91, 56, 52, 30, 25, 18, 15, 12, 6, 3, 3, 3,
];

/// All 63 cells concatenated female-infant-male.
pub fn abalone_cells() -> Vec<u64> {
    let mut cells = Vec::with_capacity(63);
    cells.extend_from_slice(&ABALONE_FEMALE);
    cells.extend_from_slice(&ABALONE_INFANT);
    cells.extend_from_slice(&ABALONE_MALE);
    cells
}

/// Human-readable labels matching [`abalone_cells`] ("F-5", "I-1", ...).
pub fn abalone_labels() -> Vec<String> {
    let mut labels = Vec::with_capacity(63);
    for r in 0..ABALONE_FEMALE.len() {
        labels.push(format!("F-{}", r + 5));
    }
    for r in 0..ABALONE_INFANT.len() {
        labels.push(format!("I-{}", r + 1));
    }
    for r in 0..ABALONE_MALE.len() {
        labels.push(format!("M-{}", r + 3));
    }
    labels
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn abalone_totals_are_consistent() {
        let cells = abalone_cells();
        assert_eq!(cells.len(), 63);
        assert_eq!(cells.iter().sum::<u64>(), 4177);
        assert_eq!(abalone_labels().len(), 63);
        assert!(cells.iter().all(|&c| c > 0));
    }

    #[test]
    fn abalone_inverse_mass_matches_golden_value() {
        let cells = abalone_cells();
        let n: u64 = cells.iter().sum();
        let m_hat: f64 = cells.iter().map(|&c| n as f64 / c as f64).sum();
        approx::assert_relative_eq!(m_hat, 36128.328218, epsilon = 1e-6);
    }
}
