//! Direct candidate-to-result similarities on skills and titles. Every
//! feature is the arithmetic mean over the ideal candidates, and zero when
//! there are none.

use crate::corpus::MemberId;
use crate::expertise::ExpertiseMatrix;
use crate::scalar::Scalar;

use super::profile::PreparedProfile;

fn intersection_size<K: Ord>(a: &[K], b: &[K]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Jaccard index of two sorted, de-duplicated sets; zero when both are empty.
pub fn jaccard<K: Ord, T: Scalar>(a: &[K], b: &[K]) -> T {
    let inter = intersection_size(a, b);
    let union = a.len() + b.len() - inter;
    if union == 0 {
        T::zero()
    } else {
        T::of(inter as f64 / union as f64)
    }
}

/// Cosine of the binary indicator vectors of two sorted sets.
pub fn binary_cosine<K: Ord, T: Scalar>(a: &[K], b: &[K]) -> T {
    if a.is_empty() || b.is_empty() {
        return T::zero();
    }
    let inter = intersection_size(a, b) as f64;
    T::of(inter / ((a.len() * b.len()) as f64).sqrt())
}

/// Cosine of two sparse vectors sorted by key.
pub fn sparse_cosine<T: Scalar>(a: &[(u32, T)], b: &[(u32, T)]) -> T {
    let norm = |v: &[(u32, T)]| v.iter().map(|&(_, x)| x * x).sum::<T>().sqrt();
    let (na, nb) = (norm(a), norm(b));
    if na == T::zero() || nb == T::zero() {
        return T::zero();
    }
    let (mut i, mut j) = (0, 0);
    let mut dot = T::zero();
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                dot += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    (dot / (na * nb)).clamp01()
}

fn mean<T: Scalar>(values: impl Iterator<Item = T>) -> T {
    let (mut sum, mut n) = (T::zero(), 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    if n == 0 {
        T::zero()
    } else {
        sum / T::of(n as f64)
    }
}

pub fn skill_jaccard<T: Scalar>(ics: &[&PreparedProfile<T>], r: &PreparedProfile<T>) -> T {
    mean(ics.iter().map(|c| jaccard(&c.skills, &r.skills)))
}

/// Mean cosine between expertise-weighted skill vectors.
pub fn skill_cosine<T: Scalar>(ics: &[MemberId], r: MemberId, expertise: &ExpertiseMatrix<T>) -> T {
    let rv = expertise.row(r);
    mean(ics.iter().map(|&c| sparse_cosine(expertise.row(c), rv)))
}

/// Mean `(jaccard, cosine)` over the stop-worded current-title word sets.
pub fn title_similarity<T: Scalar>(ics: &[&PreparedProfile<T>], r: &PreparedProfile<T>) -> (T, T) {
    let rw = &r.current_title_words;
    (
        mean(ics.iter().map(|c| jaccard(&c.current_title_words, rw))),
        mean(ics.iter().map(|c| binary_cosine(&c.current_title_words, rw))),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expertise::Stage;
    use crate::text::StopWords;

    #[test]
    fn skill_jaccard_hand_cases() {
        let (ml, ir, java, python) = (1u32, 2, 3, 4);
        let j: f64 = jaccard(&[ml, ir, java], &[ml, ir, python]);
        assert!((j - 0.5).abs() < 1e-12);
        assert_eq!(jaccard::<u32, f64>(&[1, 2], &[1, 2]), 1.0);
        assert_eq!(jaccard::<u32, f64>(&[1, 2], &[3]), 0.0);
        assert_eq!(jaccard::<u32, f64>(&[], &[]), 0.0);
    }

    #[test]
    fn expertise_cosine_hand_cases() {
        let (ml, ir) = (1, 2);
        let e = ExpertiseMatrix::from_cells(
            Stage::Densified,
            [
                (10, ml, 0.8f64),
                (10, ir, 0.6),
                (11, ml, 0.4),
                (11, ir, 0.3),
                (12, ml, 1.0),
                (13, ml, 0.5),
                (13, ir, 0.5),
                (14, 9, 0.7),
            ],
        )
        .unwrap();
        assert!((skill_cosine(&[10], 11, &e) - 1.0).abs() < 1e-12);
        assert_eq!(skill_cosine(&[12], 14, &e), 0.0);
        assert!((skill_cosine(&[12], 13, &e) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
        assert_eq!(skill_cosine(&[12], 999, &e), 0.0);
        assert_eq!(skill_cosine(&[], 13, &e), 0.0);
        // Averaged over candidates.
        let avg = skill_cosine(&[10, 12], 13, &e);
        let expect = (sparse_cosine(e.row(10), e.row(13)) + 0.5f64.sqrt()) / 2.0;
        assert!((avg - expect).abs() < 1e-12);
    }

    #[test]
    fn title_word_sets() {
        let sw = StopWords::bundled();
        let a = sw.word_set("Senior Software Engineer");
        let b = sw.word_set("Software Engineer");
        let j: f64 = jaccard(&a, &b);
        assert!((j - 2.0 / 3.0).abs() < 1e-12);
        let c: f64 = binary_cosine(&a, &b);
        assert!((c - 2.0 / 6f64.sqrt()).abs() < 1e-12);
        assert_eq!(binary_cosine::<String, f64>(&a, &a), 1.0);
        assert_eq!(jaccard::<String, f64>(&a, &sw.word_set("Nurse")), 0.0);
        assert_eq!(binary_cosine::<String, f64>(&sw.word_set("of the"), &a), 0.0);
    }
}
