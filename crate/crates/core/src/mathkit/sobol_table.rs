//! Joe–Kuo (new-joe-kuo-6.21201) primitive polynomials and initial direction
//! numbers for Sobol dimensions 2..=64. Dimension 1 is the van der Corput
//! sequence and has no entry.

pub(crate) struct DirectionEntry {
    /// Degree `s` of the primitive polynomial.
    pub degree: u32,
    /// Interior polynomial coefficients `a`, packed with the highest interior term in the top bit.
    pub coeffs: u32,
    /// Initial odd direction integers `m_1..m_s`.
    pub init: &'static [u32],
}

pub(crate) const DIRECTIONS: [DirectionEntry; 63] = [
    DirectionEntry { degree: 1, coeffs: 0, init: &[1] },
    DirectionEntry { degree: 2, coeffs: 1, init: &[1, 3] },
    DirectionEntry { degree: 3, coeffs: 1, init: &[1, 3, 1] },
    DirectionEntry { degree: 3, coeffs: 2, init: &[1, 1, 1] },
    DirectionEntry { degree: 4, coeffs: 1, init: &[1, 1, 3, 3] },
    DirectionEntry { degree: 4, coeffs: 4, init: &[1, 3, 5, 13] },
    DirectionEntry { degree: 5, coeffs: 2, init: &[1, 1, 5, 5, 17] },
    DirectionEntry { degree: 5, coeffs: 4, init: &[1, 1, 5, 5, 5] },
    DirectionEntry { degree: 5, coeffs: 7, init: &[1, 1, 7, 11, 19] },
    DirectionEntry { degree: 5, coeffs: 11, init: &[1, 1, 5, 1, 1] },
    DirectionEntry { degree: 5, coeffs: 13, init: &[1, 1, 1, 3, 11] },
    DirectionEntry { degree: 5, coeffs: 14, init: &[1, 3, 5, 5, 31] },
    DirectionEntry { degree: 6, coeffs: 1, init: &[1, 3, 3, 9, 7, 49] },
    DirectionEntry { degree: 6, coeffs: 13, init: &[1, 1, 1, 15, 21, 21] },
    DirectionEntry { degree: 6, coeffs: 16, init: &[1, 3, 1, 13, 27, 49] },
    DirectionEntry { degree: 6, coeffs: 19, init: &[1, 1, 1, 15, 7, 5] },
    DirectionEntry { degree: 6, coeffs: 22, init: &[1, 3, 1, 15, 13, 25] },
    DirectionEntry { degree: 6, coeffs: 25, init: &[1, 1, 5, 5, 19, 61] },
    DirectionEntry { degree: 7, coeffs: 1, init: &[1, 3, 7, 11, 23, 15, 103] },
    DirectionEntry { degree: 7, coeffs: 4, init: &[1, 3, 7, 13, 13, 15, 69] },
    DirectionEntry { degree: 7, coeffs: 7, init: &[1, 1, 3, 13, 7, 35, 63] },
    DirectionEntry { degree: 7, coeffs: 8, init: &[1, 3, 5, 9, 1, 25, 53] },
    DirectionEntry { degree: 7, coeffs: 14, init: &[1, 3, 1, 13, 9, 35, 107] },
    DirectionEntry { degree: 7, coeffs: 19, init: &[1, 3, 1, 5, 27, 61, 31] },
    DirectionEntry { degree: 7, coeffs: 21, init: &[1, 1, 5, 11, 19, 41, 61] },
    DirectionEntry { degree: 7, coeffs: 28, init: &[1, 3, 5, 3, 3, 13, 69] },
    DirectionEntry { degree: 7, coeffs: 31, init: &[1, 1, 7, 13, 1, 19, 1] },
    DirectionEntry { degree: 7, coeffs: 32, init: &[1, 3, 7, 5, 13, 19, 59] },
    DirectionEntry { degree: 7, coeffs: 37, init: &[1, 1, 3, 9, 25, 29, 41] },
    DirectionEntry { degree: 7, coeffs: 41, init: &[1, 3, 5, 13, 23, 1, 55] },
    DirectionEntry { degree: 7, coeffs: 42, init: &[1, 3, 7, 3, 13, 59, 17] },
    DirectionEntry { degree: 7, coeffs: 50, init: &[1, 3, 1, 3, 5, 53, 69] },
    DirectionEntry { degree: 7, coeffs: 55, init: &[1, 1, 5, 5, 23, 33, 13] },
    DirectionEntry { degree: 7, coeffs: 56, init: &[1, 1, 7, 7, 1, 61, 123] },
    DirectionEntry { degree: 7, coeffs: 59, init: &[1, 1, 7, 9, 13, 61, 49] },
    DirectionEntry { degree: 7, coeffs: 62, init: &[1, 3, 3, 5, 3, 55, 33] },
    DirectionEntry { degree: 8, coeffs: 14, init: &[1, 3, 1, 15, 31, 13, 49, 245] },
    DirectionEntry { degree: 8, coeffs: 21, init: &[1, 3, 5, 15, 31, 59, 63, 97] },
    DirectionEntry { degree: 8, coeffs: 22, init: &[1, 3, 1, 11, 11, 11, 77, 249] },
    DirectionEntry { degree: 8, coeffs: 38, init: &[1, 3, 1, 11, 27, 43, 71, 9] },
    DirectionEntry { degree: 8, coeffs: 47, init: &[1, 1, 7, 15, 21, 11, 81, 45] },
    DirectionEntry { degree: 8, coeffs: 49, init: &[1, 3, 7, 3, 25, 31, 65, 79] },
    DirectionEntry { degree: 8, coeffs: 50, init: &[1, 3, 1, 1, 19, 11, 3, 205] },
    DirectionEntry { degree: 8, coeffs: 52, init: &[1, 1, 5, 9, 19, 21, 29, 157] },
    DirectionEntry { degree: 8, coeffs: 56, init: &[1, 3, 7, 11, 1, 33, 89, 185] },
    DirectionEntry { degree: 8, coeffs: 67, init: &[1, 3, 3, 3, 15, 9, 79, 71] },
    DirectionEntry { degree: 8, coeffs: 70, init: &[1, 3, 7, 11, 15, 39, 119, 27] },
    DirectionEntry { degree: 8, coeffs: 84, init: &[1, 1, 3, 1, 11, 31, 97, 225] },
    DirectionEntry { degree: 8, coeffs: 97, init: &[1, 1, 1, 3, 23, 43, 57, 177] },
    DirectionEntry { degree: 8, coeffs: 103, init: &[1, 3, 7, 7, 17, 17, 37, 71] },
    DirectionEntry { degree: 8, coeffs: 115, init: &[1, 3, 1, 5, 27, 63, 123, 213] },
    DirectionEntry { degree: 8, coeffs: 122, init: &[1, 1, 3, 5, 11, 43, 53, 133] },
    DirectionEntry { degree: 9, coeffs: 8, init: &[1, 3, 5, 5, 29, 17, 47, 173, 479] },
    DirectionEntry { degree: 9, coeffs: 13, init: &[1, 3, 3, 11, 3, 1, 109, 9, 69] },
    DirectionEntry { degree: 9, coeffs: 16, init: &[1, 1, 1, 5, 17, 39, 23, 5, 343] },
    DirectionEntry { degree: 9, coeffs: 22, init: &[1, 3, 1, 5, 25, 15, 31, 103, 499] },
    DirectionEntry { degree: 9, coeffs: 25, init: &[1, 1, 1, 11, 11, 17, 63, 105, 183] },
    DirectionEntry { degree: 9, coeffs: 44, init: &[1, 1, 5, 11, 9, 29, 97, 231, 363] },
    DirectionEntry { degree: 9, coeffs: 47, init: &[1, 1, 5, 15, 19, 45, 41, 7, 383] },
    DirectionEntry { degree: 9, coeffs: 52, init: &[1, 3, 7, 7, 31, 19, 83, 137, 221] },
    DirectionEntry { degree: 9, coeffs: 55, init: &[1, 1, 1, 3, 23, 15, 111, 223, 83] },
    DirectionEntry { degree: 9, coeffs: 59, init: &[1, 1, 5, 13, 31, 15, 55, 25, 161] },
    DirectionEntry { degree: 9, coeffs: 62, init: &[1, 1, 3, 13, 25, 47, 39, 87, 257] },
];
