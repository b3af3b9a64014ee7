//! Small shared helpers.

/// Advances a little-endian mixed-radix counter; false when it wraps to zero.
pub(crate) fn bump(digits: &mut [usize], base: usize) -> bool {
    for d in digits.iter_mut() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_enumerates_all_tuples() {
        let mut digits = vec![0usize; 3];
        let mut count = 1;
        while bump(&mut digits, 3) {
            count += 1;
        }
        assert_eq!(count, 27);
        assert_eq!(digits, vec![0, 0, 0]);
        let mut empty: Vec<usize> = vec![];
        assert!(!bump(&mut empty, 2));
    }
}
