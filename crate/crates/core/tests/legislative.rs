use srb_core::legislative::{bundled_corpus, bundled_qa, evaluate_qa, load_corpus, Bm25Params, RetrievalIndex};
use std::path::Path;
use std::time::Instant;

#[test]
fn corpus_on_disk_matches_bundle() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/legislative");
    assert_eq!(load_corpus(&dir).unwrap(), bundled_corpus());
    assert_eq!(bundled_qa().len(), 50);
}

#[test]
fn top1_accuracy_and_latency() {
    let index = RetrievalIndex::build(bundled_corpus(), Bm25Params::default()).unwrap();
    let qa = bundled_qa();
    let mut hits = 0;
    let mut worst = 0.0f64;
    for item in &qa {
        let t0 = Instant::now();
        let top = index.retrieve(&item.question, 1).unwrap();
        worst = worst.max(t0.elapsed().as_secs_f64());
        if top.first().map(|h| h.id.as_str()) == Some(item.answer_clause_id.as_str()) {
            hits += 1;
        }
    }
    let accuracy = hits as f64 / qa.len() as f64;
    let report = evaluate_qa(&index, &qa);
    assert_eq!(report.correct, hits);
    println!("accuracy {accuracy:.2}, slowest query {:.3} ms, misses {:?}", worst * 1e3, report.misses);
    assert!(accuracy >= 0.9);
    assert!(worst < 0.05);
}
