use more_web::{caption_scores, filter_for_expert, random_matrix, spectrum};

#[test]
fn random_matrix_is_seeded() {
    assert_eq!(random_matrix(3, 4, 7), random_matrix(3, 4, 7));
    assert_ne!(random_matrix(3, 4, 7), random_matrix(3, 4, 8));
    assert_eq!(random_matrix(3, 4, 7).len(), 12);
}

#[test]
fn spectrum_of_a_diagonal_matrix() {
    let s = spectrum(2, 3, &[0.0, 3.0, 0.0, -5.0, 0.0, 0.0]).unwrap();
    assert!((s[0] - 5.0).abs() < 1e-12 && (s[1] - 3.0).abs() < 1e-12);
    assert!(spectrum(2, 2, &[1.0]).is_err());
}

#[test]
fn expert_filters_drop_rank_and_the_last_keeps_everything() {
    let w = random_matrix(6, 6, 1);
    let views: Vec<_> = (1..=3).map(|i| filter_for_expert(6, 6, &w, i, 3).unwrap()).collect();
    assert_eq!(views.iter().map(|v| v.retained).collect::<Vec<_>>(), [2, 4, 6]);
    assert!(views[0].removed_norm > views[1].removed_norm && views[2].removed_norm == 0.0);
    let diff = views[2]
        .filtered
        .iter()
        .zip(&w)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(diff < 1e-8);
    let s = spectrum(6, 6, &views[0].filtered).unwrap();
    assert!(s[2] < 1e-10 * s[0]);
    assert!(filter_for_expert(6, 6, &w, 4, 3).is_err());
}

#[test]
fn caption_scores_json() {
    let out = caption_scores("A dog runs.", "a dog runs .\na cat sleeps").unwrap();
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["bleu"][0], 1.0);
    assert_eq!(v["rouge_l"], 1.0);
    assert_eq!(v["tokens"].as_array().unwrap().len(), 4);
    assert!(caption_scores("a dog", "\n\n").is_err());
}
