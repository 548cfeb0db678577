//! Message normalization: lowercase, every ASCII digit to `0`, runs of `0`
//! collapsed to a single `0`. Applied in that order, in one pass.

use rayon::prelude::*;

use crate::ingest::RecordSet;

/// ```
/// use fastlad::normalize::normalize_message;
/// assert_eq!(normalize_message("Time 12:34:56"), "time 0:0:0");
/// assert_eq!(normalize_message("v100 A"), "v0 a");
/// ```
pub fn normalize_message(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut last_zero = false;
    let mut push = |c: char, out: &mut String| {
        let c = if c.is_ascii_digit() { '0' } else { c };
        if c == '0' {
            if last_zero {
                return;
            }
            last_zero = true;
        } else {
            last_zero = false;
        }
        out.push(c);
    };
    for c in raw.chars() {
        if c.is_ascii() {
            push(c.to_ascii_lowercase(), &mut out);
        } else {
            for l in c.to_lowercase() {
                push(l, &mut out);
            }
        }
    }
    out
}

/// Fills `normalized` on every record from its raw text.
pub fn normalize_records(rs: &mut RecordSet) {
    rs.records_mut()
        .par_iter_mut()
        .for_each(|r| r.normalized = Some(normalize_message(&r.raw)));
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn table_example() {
        assert_eq!(
            normalize_message(
                "4 ddr error(s) detected and corrected on rank 0, symbol 11 over 20609 seconds"
            ),
            "0 ddr error(s) detected and corrected on rank 0, symbol 0 over 0 seconds"
        );
    }

    #[test]
    fn small_cases() {
        assert_eq!(normalize_message(""), "");
        assert_eq!(normalize_message("Time 12:34:56"), "time 0:0:0");
        assert_eq!(normalize_message("v100 A"), "v0 a");
        assert_eq!(normalize_message("0x00ff 0 0"), "0x0ff 0 0");
        // Non-ASCII digits are not numerals here.
        assert_eq!(normalize_message("\u{0663}\u{0664}"), "\u{0663}\u{0664}");
        assert_eq!(normalize_message("ÄRGER\t7"), "ärger\t0");
    }

    proptest! {
        #[test]
        fn idempotent(s in "\\PC{0,64}") {
            let once = normalize_message(&s);
            prop_assert_eq!(normalize_message(&once), once);
        }

        #[test]
        fn output_shape(s in "[ -~\\t]{0,80}") {
            let out = normalize_message(&s);
            prop_assert!(!out.bytes().any(|b| b.is_ascii_uppercase()));
            prop_assert!(!out.bytes().any(|b| b.is_ascii_digit() && b != b'0'));
            prop_assert!(!out.contains("00"));
            let strip = |t: &str| t.chars().filter(|c| !c.is_ascii_alphanumeric()).collect::<String>();
            prop_assert_eq!(strip(&out), strip(&s));
        }
    }
}
