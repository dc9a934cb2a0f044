use std::sync::Arc;

use mtdiag_core::classifier::Prediction;
use mtdiag_core::explainer::{Explanation, Method, TargetNeuron, TokenScores};
use mtdiag_core::Side;
use mtdiag_service::{router, Store};
use serde_json::Value;

fn explanation(id: u64, logits: [f64; 2], side: Side, scores: &[f64]) -> Explanation {
    let p = Prediction::from_logits(id, logits, side);
    let toks = |prefix: &str| -> Vec<(String, f64)> {
        scores.iter().enumerate().map(|(i, &s)| (format!("{prefix}{i}"), s)).collect()
    };
    Explanation {
        sample_id: id,
        method: Method::LrpEpsilon,
        target_neuron: TargetNeuron::Machine,
        machine_side: side,
        logits,
        softmax: p.softmax,
        logit_machine: p.logit_machine(),
        softmax_machine: p.softmax_machine(),
        token_scores: TokenScores {
            source: toks("src"),
            left: toks(if id == 3 { "not" } else { "l" }),
            right: toks("r"),
        },
        checkpoint_checksum: "abc".into(),
        config_checksum: Some("cfg".into()),
    }
}

fn fixture() -> Vec<Explanation> {
    vec![
        explanation(0, [0.0, 3.0], Side::Right, &[0.5, -2.0]),
        explanation(1, [1.0, 0.0], Side::Right, &[0.0, 0.0]),
        explanation(2, [0.0, 0.2], Side::Right, &[0.1, 0.3]),
        explanation(3, [4.0, 0.0], Side::Left, &[1.0, 1.0]),
        explanation(4, [0.0, 0.2], Side::Right, &[0.3, 0.1]),
    ]
}

const STATS: &[u8] = b"{\"alpha\":0.001,  \"note\": \"kept verbatim\"}\n";

async fn spawn(store: Store) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        axum::serve(listener, router(Arc::new(store))).await.unwrap();
    });
    format!("http://{addr}")
}

async fn get(base: &str, path: &str) -> (u16, Vec<u8>) {
    let resp = reqwest::get(format!("{base}{path}")).await.unwrap();
    let status = resp.status().as_u16();
    (status, resp.bytes().await.unwrap().to_vec())
}

async fn json(base: &str, path: &str) -> (u16, Value) {
    let (status, body) = get(base, path).await;
    (status, serde_json::from_slice(&body).unwrap())
}

fn ids(page: &Value) -> Vec<u64> {
    page["segments"].as_array().unwrap().iter().map(|s| s["sample_id"].as_u64().unwrap()).collect()
}

#[tokio::test]
async fn top_one_is_the_most_confident_segment() {
    let base = spawn(Store::new(fixture(), None)).await;
    let (status, page) = json(&base, "/api/segments?limit=1").await;
    assert_eq!(status, 200);
    assert_eq!(ids(&page), vec![3]);
    assert_eq!(page["total"], 5);
    assert_eq!(page["segments"][0]["rank"], 1);
}

#[tokio::test]
async fn default_order_breaks_ties_by_id() {
    let base = spawn(Store::new(fixture(), None)).await;
    let (_, page) = json(&base, "/api/segments").await;
    assert_eq!(ids(&page), vec![3, 0, 2, 4, 1]);
    let (_, page) = json(&base, "/api/segments?direction=ascending&activation=logit").await;
    assert_eq!(ids(&page), vec![1, 2, 4, 0, 3]);
}

#[tokio::test]
async fn softmax_range_matches_brute_force() {
    let data = fixture();
    let base = spawn(Store::new(data.clone(), None)).await;
    let (_, page) = json(&base, "/api/segments?softmax_lo=0.9&softmax_hi=1.0&limit=200").await;
    let mut got = ids(&page);
    got.sort_unstable();
    let want: Vec<u64> = data
        .iter()
        .filter(|e| (0.9..=1.0).contains(&e.softmax_machine))
        .map(|e| e.sample_id)
        .collect();
    assert_eq!(got, want);
    assert_eq!(page["total"], want.len());
}

#[tokio::test]
async fn filters_on_correctness_tokens_and_scores() {
    let base = spawn(Store::new(fixture(), None)).await;
    let (_, page) = json(&base, "/api/segments?correctness=incorrect").await;
    assert_eq!(ids(&page), vec![1]);
    let (_, page) = json(&base, "/api/segments?q=not").await;
    assert_eq!(ids(&page), vec![3]);
    let (_, page) = json(&base, "/api/segments?min_score=1.5").await;
    assert_eq!(ids(&page), vec![0]);
}

#[tokio::test]
async fn offset_at_total_gives_empty_page() {
    let base = spawn(Store::new(fixture(), None)).await;
    let (status, page) = json(&base, "/api/segments?offset=5").await;
    assert_eq!(status, 200);
    assert!(ids(&page).is_empty());
    assert_eq!(page["total"], 5);
}

#[tokio::test]
async fn pages_visit_every_match_once() {
    let base = spawn(Store::new(fixture(), None)).await;
    let mut seen = Vec::new();
    for offset in (0..5).step_by(2) {
        let (_, page) = json(&base, &format!("/api/segments?offset={offset}&limit=2")).await;
        seen.extend(ids(&page));
    }
    assert_eq!(seen, vec![3, 0, 2, 4, 1]);
}

#[tokio::test]
async fn malformed_requests_are_rejected() {
    let base = spawn(Store::new(fixture(), None)).await;
    for path in [
        "/api/segments?softmax_lo=0.8&softmax_hi=0.2",
        "/api/segments?softmax_hi=1.5",
        "/api/segments?limit=0",
        "/api/segments?limit=201",
        "/api/segments?offset=-1",
        "/api/segments?neuron=both",
        "/api/segments?min_score=-1",
        "/api/segments/abc",
    ] {
        let (status, body) = json(&base, path).await;
        assert_eq!(status, 400, "{path}");
        assert!(body["error"].as_str().is_some_and(|m| !m.is_empty()), "{path}");
    }
}

#[tokio::test]
async fn single_segment_is_normalized_per_sample() {
    let data = fixture();
    let base = spawn(Store::new(data.clone(), None)).await;
    let (status, view) = json(&base, "/api/segments/0").await;
    assert_eq!(status, 200);
    assert_eq!(view["rank"], 2);
    let intensities: Vec<f64> = ["source", "left", "right"]
        .iter()
        .flat_map(|k| view[*k].as_array().unwrap().clone())
        .map(|t| t["intensity"].as_f64().unwrap())
        .collect();
    assert!(intensities.iter().all(|i| (-1.0..=1.0).contains(i)));
    assert_eq!(intensities.iter().fold(0.0f64, |m, i| m.max(i.abs())), 1.0);
    // scores round-trip unnormalized
    let left: Vec<f64> = view["left"].as_array().unwrap().iter().map(|t| t["score"].as_f64().unwrap()).collect();
    let stored: Vec<f64> = data[0].token_scores.left.iter().map(|(_, s)| *s).collect();
    assert_eq!(left, stored);

    let (_, zero) = json(&base, "/api/segments/1").await;
    assert!(zero["right"].as_array().unwrap().iter().all(|t| t["intensity"] == 0.0));

    let (status, _) = json(&base, "/api/segments/99").await;
    assert_eq!(status, 404);
}

#[tokio::test]
async fn stats_pass_through_verbatim() {
    let base = spawn(Store::new(fixture(), Some(STATS.to_vec()))).await;
    let (a, b) = tokio::join!(get(&base, "/api/stats"), get(&base, "/api/stats"));
    assert_eq!(a, (200, STATS.to_vec()));
    assert_eq!(a, b);

    let missing = spawn(Store::new(fixture(), None)).await;
    let (status, _) = get(&missing, "/api/stats").await;
    assert_eq!(status, 404);
}

#[tokio::test]
async fn meta_describes_the_store() {
    let base = spawn(Store::new(fixture(), None)).await;
    let (_, meta) = json(&base, "/api/meta").await;
    assert_eq!(meta["checkpoint_checksum"], "abc");
    assert_eq!(meta["method"], "lrp_epsilon");
    assert_eq!(meta["corpus_size"], 5);
}

#[tokio::test]
async fn requests_do_not_change_answers() {
    let base = spawn(Store::new(fixture(), Some(STATS.to_vec()))).await;
    let first = get(&base, "/api/segments?limit=3&offset=1").await;
    for path in ["/api/segments/2", "/api/stats", "/api/segments?q=r", "/api/meta"] {
        get(&base, path).await;
    }
    assert_eq!(get(&base, "/api/segments?limit=3&offset=1").await, first);
}
