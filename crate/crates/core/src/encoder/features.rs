const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Signed hashed token counts over lowercase alphanumeric tokens.
///
/// Tokenizer-free and deterministic: the same text always maps to the same
/// `feat_dim`-long vector.
pub fn text_features(text: &str, feat_dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; feat_dim];
    if feat_dim == 0 {
        return out;
    }
    let lower = text.to_lowercase();
    for token in lower
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
    {
        let h = fnv1a(token.as_bytes());
        let slot = (h % feat_dim as u64) as usize;
        let sign = if (h >> 63) == 0 { 1.0 } else { -1.0 };
        out[slot] += sign;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_case_insensitive() {
        let a = text_features("MRI image shows normal brain", 32);
        assert_eq!(a, text_features("mri IMAGE shows, normal brain.", 32));
        assert!(a.iter().any(|&v| v != 0.0));
    }

    #[test]
    fn distinct_templates_differ() {
        use crate::corpus::{abnormality_text, Abnormality};
        let a = text_features(abnormality_text(Abnormality::Normal), 64);
        let b = text_features(abnormality_text(Abnormality::Wmh), 64);
        assert_ne!(a, b);
    }
}
