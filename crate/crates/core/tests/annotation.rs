#[path = "support/oracles.rs"]
mod oracles;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use forge_core::annotation::server::router;
use forge_core::annotation::{
    agreement_matrix, apply_review, assign_samples, fleiss_kappa, AgreementMatrix, CategorySet,
    Decision, DecisionLog, GoldLabel, Phase, Reason, ReviewPolicy, ReviewService, Session, Verdict,
};
use forge_core::dataset::DatasetEntry;
use forge_core::decl::DeclKind;
use proptest::prelude::*;
use tower::ServiceExt;

fn matrix(items: usize, n: usize, k: usize) -> impl Strategy<Value = Vec<Vec<usize>>> {
    prop::collection::vec(prop::collection::vec(0..k, n), items..=items).prop_map(move |ratings| {
        ratings
            .into_iter()
            .map(|r| {
                let mut row = vec![0; k];
                for c in r {
                    row[c] += 1;
                }
                row
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn kappa_matches_oracle_10x3x3(rows in matrix(10, 3, 3)) {
        let m = AgreementMatrix::new(rows.clone()).unwrap();
        let want = oracles::fleiss_kappa(&rows);
        match fleiss_kappa(&m) {
            Ok(got) if want.is_nan() => prop_assert_eq!(got, 1.0),
            Ok(got) => {
                prop_assert!((got - want).abs() <= 1e-12, "{} vs {}", got, want);
                prop_assert!((-1.0..=1.0).contains(&got));
            }
            Err(e) => prop_assert!(false, "{}", e),
        }
    }

    #[test]
    fn kappa_matches_oracle_any_shape(items in 1usize..15, n in 2usize..6, k in 2usize..6, seed in any::<u64>()) {
        let mut rng = oracles::Lcg(seed);
        let rows: Vec<Vec<usize>> = (0..items)
            .map(|_| {
                let mut row = vec![0; k];
                for _ in 0..n {
                    row[rng.below(k as u64) as usize] += 1;
                }
                row
            })
            .collect();
        let m = AgreementMatrix::new(rows.clone()).unwrap();
        let want = oracles::fleiss_kappa(&rows);
        let got = fleiss_kappa(&m).unwrap();
        if want.is_nan() {
            // all ratings in one category: expected agreement is 1
            prop_assert_eq!(got, 1.0);
        } else {
            prop_assert!((got - want).abs() <= 1e-12, "{} vs {}", got, want);
        }
    }

    #[test]
    fn assignment_counts_exact(per in 1usize..8, raters in 1usize..4, extra in 0usize..3, seed in any::<u64>()) {
        let annotators: Vec<String> = (0..raters + extra).map(|i| format!("a{i}")).collect();
        let slots = annotators.len() * per;
        prop_assume!(slots.is_multiple_of(raters));
        let items: Vec<String> = (0..slots / raters).map(|i| format!("e{i}")).collect();
        let asg = assign_samples(&items, &annotators, per, raters, seed).unwrap();
        prop_assert_eq!(asg.len(), items.len());
        prop_assert!(asg.values().all(|r| r.len() == raters));
        for a in &annotators {
            prop_assert_eq!(asg.values().filter(|r| r.contains(a)).count(), per);
        }
    }

    #[test]
    fn any_remove_is_anti_monotone(votes in prop::collection::vec((0usize..6, 0usize..3, any::<bool>()), 0..20), extra in (0usize..6, 3usize..5)) {
        let entries: Vec<String> = (0..6).map(|i| format!("e{i}")).collect();
        let mk = |(e, a, keep): (usize, usize, bool)| {
            if keep {
                Decision::new(&entries[e], &format!("a{a}"), Verdict::Keep, Reason::Ok)
            } else {
                Decision::new(&entries[e], &format!("a{a}"), Verdict::Remove, Reason::Faulty)
            }
        };
        let mut ds: Vec<Decision> = votes.into_iter().map(mk).collect();
        let before = apply_review(&entries, &ds, ReviewPolicy::AnyRemove).unwrap();
        ds.push(mk((extra.0, extra.1, false)));
        let after = apply_review(&entries, &ds, ReviewPolicy::AnyRemove).unwrap();
        prop_assert!(after.iter().all(|id| before.contains(id)));
    }
}

#[test]
fn calibration_twenty_by_four() {
    let items: Vec<String> = (0..20).map(|i| format!("e{i}")).collect();
    let anns: Vec<String> = (0..4).map(|i| format!("a{i}")).collect();
    let asg = assign_samples(&items, &anns, 10, 2, 7).unwrap();
    assert!(asg.values().all(|r| r.len() == 2));
}

fn entry(id: &str) -> DatasetEntry {
    DatasetEntry {
        id: id.into(),
        package: "p".into(),
        enclosing_class: "C".into(),
        kind: DeclKind::Method,
        code: format!("public void m{id}() {{}}"),
        documentation: if id == "e0" {
            "/** Mail bob@example.com. */".into()
        } else {
            "/** Does it. */".into()
        },
        repo: "r".into(),
        license_id: "MIT".into(),
        uses_lambda: false,
    }
}

fn session(phase: Phase) -> Session {
    let items: Vec<String> = (0..10).map(|i| format!("e{i}")).collect();
    let assignment = items
        .iter()
        .map(|i| {
            (
                i.clone(),
                BTreeSet::from(["a".to_string(), "b".to_string()]),
            )
        })
        .collect();
    let gold = (phase == Phase::Calibration).then(|| {
        items
            .iter()
            .map(|i| {
                (
                    i.clone(),
                    GoldLabel {
                        verdict: Verdict::Keep,
                        reason: Reason::Ok,
                    },
                )
            })
            .collect::<BTreeMap<_, _>>()
    });
    Session {
        id: "cal".into(),
        annotators: vec!["a".into(), "b".into()],
        items,
        assignment,
        phase,
        gold,
    }
}

fn service(log: &std::path::Path) -> Arc<ReviewService> {
    let entries = (0..12).map(|i| entry(&format!("e{i}"))).collect();
    Arc::new(
        ReviewService::new(
            vec![session(Phase::Calibration)],
            entries,
            DecisionLog::open(log).unwrap(),
        )
        .unwrap(),
    )
}

async fn call(svc: &Arc<ReviewService>, req: Request<Body>) -> (StatusCode, serde_json::Value) {
    let resp = router(svc.clone(), None).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), 1 << 20)
        .await
        .unwrap();
    (status, serde_json::from_slice(&bytes).unwrap())
}

fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

fn post(d: &serde_json::Value) -> Request<Body> {
    Request::post("/api/decision")
        .header("content-type", "application/json")
        .body(Body::from(d.to_string()))
        .unwrap()
}

fn vote(entry: &str, ann: &str, keep: bool) -> serde_json::Value {
    let (verdict, reason) = if keep {
        ("keep", "ok")
    } else {
        ("remove", "faulty")
    };
    serde_json::json!({"entry_id": entry, "annotator_id": ann, "verdict": verdict, "reason": reason})
}

#[tokio::test]
async fn queue_shrinks_with_decisions() {
    let dir = tempfile::tempdir().unwrap();
    let svc = service(&dir.path().join("d.jsonl"));
    for i in 0..4 {
        let (status, body) = call(&svc, post(&vote(&format!("e{i}"), "a", true))).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(body["entry_id"], format!("e{i}"));
        assert!(!body["timestamp"].as_str().unwrap().is_empty());
    }
    let (status, q) = call(&svc, get("/api/queue?annotator=a")).await;
    assert_eq!(status, StatusCode::OK);
    let q = q.as_array().unwrap();
    assert_eq!(q.len(), 6);
    assert!(q.iter().all(|i| i["id"] != "e0" && i["code"].is_string()));

    let (_, q) = call(&svc, get("/api/queue?annotator=b")).await;
    assert_eq!(q.as_array().unwrap().len(), 10);
    assert_eq!(q[0]["pii_flags"], serde_json::json!(["email"]));

    let (_, p) = call(&svc, get("/api/progress?session=cal")).await;
    assert_eq!(p["decided"], 4);
    assert_eq!(p["assignments"], 20);
}

#[tokio::test]
async fn bad_requests() {
    let dir = tempfile::tempdir().unwrap();
    let svc = service(&dir.path().join("d.jsonl"));
    let inconsistent = serde_json::json!({"entry_id": "e1", "annotator_id": "a", "verdict": "keep", "reason": "faulty"});
    assert_eq!(
        call(&svc, post(&inconsistent)).await.0,
        StatusCode::BAD_REQUEST
    );
    // e11 is in the dataset but not assigned
    assert_eq!(
        call(&svc, post(&vote("e11", "a", true))).await.0,
        StatusCode::BAD_REQUEST
    );
    assert_eq!(
        call(&svc, post(&vote("zzz", "a", true))).await.0,
        StatusCode::NOT_FOUND
    );
    assert_eq!(
        call(&svc, get("/api/queue?annotator=nobody")).await.0,
        StatusCode::NOT_FOUND
    );
    assert_eq!(
        call(&svc, get("/api/agreement?session=nope")).await.0,
        StatusCode::NOT_FOUND
    );
}

#[tokio::test]
async fn agreement_equals_direct_kappa() {
    let dir = tempfile::tempdir().unwrap();
    let svc = service(&dir.path().join("d.jsonl"));
    let (_, pending) = call(&svc, get("/api/agreement?session=cal")).await;
    assert_eq!(pending["status"], "pending");
    assert!(pending["kappa"].is_null());

    let mut decisions = Vec::new();
    for i in 0..10 {
        for (ann, keep) in [("a", i % 3 != 0), ("b", i % 4 != 0)] {
            let v = vote(&format!("e{i}"), ann, keep);
            call(&svc, post(&v)).await;
            decisions.push(serde_json::from_value::<Decision>(v).unwrap());
        }
    }
    let (_, body) = call(&svc, get("/api/agreement?session=cal")).await;
    let m = agreement_matrix(
        &session(Phase::Calibration),
        &decisions,
        CategorySet::Verdict,
    )
    .unwrap();
    let direct = fleiss_kappa(&m).unwrap();
    assert_eq!(body["kappa"].as_f64().unwrap(), direct);
    assert_eq!(body["items"], 10);
    assert_eq!(body["raters"], 2);
    assert_eq!(body["status"], "complete");
    assert!((direct - oracles::fleiss_kappa(&m.rows)).abs() <= 1e-12);

    let (_, p) = call(&svc, get("/api/progress?session=cal")).await;
    assert_eq!(p["complete_items"], 10);
    // a: wrong on e0,e3,e6,e9 → 0.6; b: wrong on e0,e4,e8 → 0.7
    assert_eq!(p["annotators"][0]["qualification"], 0.6);
    assert_eq!(p["annotators"][1]["qualified"], false);
}

#[tokio::test]
async fn decisions_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("d.jsonl");
    {
        let svc = service(&log);
        call(&svc, post(&vote("e0", "a", true))).await;
        call(&svc, post(&vote("e1", "a", false))).await;
        call(&svc, post(&vote("e1", "a", true))).await;
    }
    let svc = service(&log);
    let (_, q) = call(&svc, get("/api/queue?annotator=a")).await;
    assert_eq!(q.as_array().unwrap().len(), 8);
    let reopened = DecisionLog::open(&log).unwrap();
    assert_eq!(reopened.all().len(), 3, "superseded decisions stay logged");
    assert_eq!(reopened.effective().len(), 2);
}
