/// A local maximum that survived prominence and separation filtering.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub index: usize,
    pub amplitude: f64,
    pub prominence: f64,
}

/// Local maxima whose topographic prominence is at least `min_prominence`,
/// thinned so that kept peaks are at least `min_separation` samples apart.
///
/// Thinning is greedy from the tallest peak down; equal heights keep the
/// earlier index. Plateaus report their first sample. The result is sorted
/// by index.
pub fn detect_peaks(x: &[f64], min_prominence: f64, min_separation: usize) -> Vec<Peak> {
    let min_separation = min_separation.max(1);
    let n = x.len();
    let mut candidates = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if x[i] > x[i - 1] {
            let mut j = i;
            while j + 1 < n && x[j + 1] == x[i] {
                j += 1;
            }
            if j + 1 < n && x[j + 1] < x[i] {
                let prominence = prominence(x, i);
                if prominence >= min_prominence {
                    candidates.push(Peak {
                        index: i,
                        amplitude: x[i],
                        prominence,
                    });
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }

    candidates.sort_by(|a, b| b.amplitude.total_cmp(&a.amplitude).then(a.index.cmp(&b.index)));
    let mut kept: Vec<Peak> = Vec::with_capacity(candidates.len());
    for c in candidates {
        if kept.iter().all(|k| k.index.abs_diff(c.index) >= min_separation) {
            kept.push(c);
        }
    }
    kept.sort_by_key(|p| p.index);
    kept
}

fn prominence(x: &[f64], peak: usize) -> f64 {
    let h = x[peak];
    let mut left_min = h;
    for &v in x[..peak].iter().rev() {
        if v > h {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = h;
    for &v in &x[peak + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ramp_has_no_peaks() {
        let x: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert!(detect_peaks(&x, 1.0, 1).is_empty());
    }

    #[test]
    fn close_equal_peaks_keep_earlier() {
        let mut x = vec![0.0; 50];
        x[20] = 10.0;
        x[25] = 10.0;
        let p = detect_peaks(&x, 1.0, 10);
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].index, 20);
    }

    #[test]
    fn prominence_filters_shoulders() {
        // A big peak with a small ripple on its flank.
        let x = [0.0, 5.0, 4.0, 4.5, 10.0, 0.0];
        let p = detect_peaks(&x, 2.0, 1);
        assert_eq!(p.iter().map(|p| p.index).collect::<Vec<_>>(), vec![4]);
        assert_eq!(p[0].prominence, 10.0);
        let all = detect_peaks(&x, 0.4, 1);
        assert_eq!(all.len(), 2);
        assert_eq!(all[0].prominence, 1.0);
    }

    #[test]
    fn plateau_reports_first_sample() {
        let x = [0.0, 3.0, 3.0, 3.0, 0.0];
        let p = detect_peaks(&x, 1.0, 1);
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].index, 1);
    }

    proptest! {
        #[test]
        fn sorted_and_separated(
            xs in proptest::collection::vec(-50.0f64..50.0, 0..300),
            sep in 1usize..30,
            prom in 0.1f64..20.0,
        ) {
            let p = detect_peaks(&xs, prom, sep);
            for w in p.windows(2) {
                prop_assert!(w[0].index < w[1].index);
                prop_assert!(w[1].index - w[0].index >= sep);
            }
            for q in &p {
                prop_assert!(q.prominence >= prom);
            }
        }
    }
}
