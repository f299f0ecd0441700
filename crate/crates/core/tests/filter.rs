use std::collections::BTreeMap;

use forge_core::extract::{extract_source, ExtractionRecord};
use forge_core::filter::{
    apply_filters, deduplicate, validate_javadoc, validate_snippet, RuleSet, DUPLICATE,
    EMPTY_DESCRIPTION, UNBALANCED,
};
use proptest::prelude::*;

/// One record per method, each with a distinct body and description.
fn methods(repo: &str, n: usize) -> Vec<ExtractionRecord> {
    let mut src = String::from("package fx;\n\npublic class Gen {\n");
    for i in 0..n {
        src.push_str(&format!(
            "    /**\n     * Returns the constant number {i} for callers.\n     * @return the value\n     */\n    public int value{i}() {{\n        return {i} * 7 + 1;\n    }}\n\n"
        ));
    }
    src.push_str("}\n");
    let fx = extract_source(&src, repo, "fx/Gen.java", "MIT");
    assert_eq!(fx.records.len(), n);
    fx.records
}

fn with_description(mut r: ExtractionRecord, desc: &str) -> ExtractionRecord {
    r.javadoc.description = desc.into();
    r
}

fn moved(mut r: ExtractionRecord, repo: &str) -> ExtractionRecord {
    r.repo = repo.into();
    r
}

#[test]
fn pipeline_fixture_counts() {
    let base = methods("alpha", 9);
    let mut input = base.clone();
    // two invalid doc comments: tag-only bodies leave no description
    input[1] = with_description(input[1].clone(), "");
    input[4] = with_description(input[4].clone(), "  \n ");
    // one snippet truncated mid-body
    let code = input[6].code.clone();
    input[6].code = code[..code.rfind('}').unwrap()].to_string();
    // two vendored copies of valid records
    input.push(moved(base[0].clone(), "beta"));
    input.push(moved(base[2].clone(), "beta"));
    // and one more valid record with fresh text
    let mut extra = methods("gamma", 1).remove(0);
    extra.code = extra.code.replace("7 + 1", "11 - 2");
    input.push(extra);
    assert_eq!(input.len(), 12);

    let out = apply_filters(input, &RuleSet::default());
    assert_eq!(out.kept.len(), 7);
    assert_eq!(out.counts[EMPTY_DESCRIPTION], 2);
    assert_eq!(out.counts[UNBALANCED], 1);
    assert_eq!(out.counts[DUPLICATE], 2);
    let nonzero: BTreeMap<_, _> = out.counts.iter().filter(|(_, v)| **v > 0).collect();
    assert_eq!(nonzero.len(), 3);
    assert_eq!(
        out.kept.len() + out.rejected.len() + out.duplicates_dropped,
        out.input
    );
    assert!(out.kept.iter().all(|r| r.repo != "beta"));
}

#[test]
fn all_valid_five_are_kept() {
    let out = apply_filters(methods("alpha", 5), &RuleSet::default());
    assert_eq!(out.kept.len(), 5);
    assert!(out.rejected.is_empty());
    assert_eq!(out.duplicates_dropped, 0);
}

#[test]
fn empty_input_all_counts_zero() {
    let out = apply_filters(Vec::new(), &RuleSet::default());
    assert_eq!(out.input, 0);
    assert!(out.kept.is_empty());
    assert!(out.counts.values().all(|v| *v == 0));
    assert!(out.flag_counts.values().all(|v| *v == 0));
}

#[test]
fn unknown_rule_id_is_rejected_up_front() {
    let err = RuleSet::from_ids(&[("no_such_rule", None)], 20, 20_000).unwrap_err();
    assert!(err.to_string().contains("no_such_rule"));
}

#[test]
fn same_code_different_docs_both_kept() {
    let a = methods("alpha", 1).remove(0);
    let b = moved(
        with_description(a.clone(), "Something else entirely."),
        "beta",
    );
    let (unique, dropped) = deduplicate(vec![a, b]);
    assert_eq!((unique.len(), dropped), (2, 0));
}

/// Pairwise oracle: a record survives unless an earlier record by
/// (repo, path, span) has equal collapsed code and description.
fn brute_force_kept(records: &[ExtractionRecord]) -> usize {
    let norm = |s: &str| {
        let mut out = String::new();
        for w in s
            .split(|c: char| c.is_whitespace())
            .filter(|w| !w.is_empty())
        {
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(w);
        }
        out
    };
    let pos = |r: &ExtractionRecord| (r.repo.clone(), r.rel_path.clone(), r.decl.span);
    (0..records.len())
        .filter(|&i| {
            !(0..records.len()).any(|j| {
                j != i
                    && (pos(&records[j]), j) < (pos(&records[i]), i)
                    && norm(&records[j].code) == norm(&records[i].code)
                    && norm(&records[j].javadoc.description)
                        == norm(&records[i].javadoc.description)
            })
        })
        .count()
}

#[test]
fn ten_records_three_duplicate_pairs() {
    let base = methods("alpha", 7);
    let mut input = base.clone();
    for (i, repo) in [(0, "zz"), (3, "beta"), (5, "aa")] {
        let mut copy = moved(base[i].clone(), repo);
        // whitespace differences do not defeat the key
        copy.code = copy.code.replace("return", "return   ");
        input.push(copy);
    }
    assert_eq!(input.len(), 10);
    let want = brute_force_kept(&input);
    assert_eq!(want, 7);
    let (unique, dropped) = deduplicate(input);
    assert_eq!((unique.len(), dropped), (want, 3));
    // "aa" sorts before "alpha": its copy is the first occurrence
    assert!(unique.iter().any(|r| r.repo == "aa"));
    assert!(!unique.iter().any(|r| r.repo == "zz" || r.repo == "beta"));
}

fn mutate(r: ExtractionRecord, op: u8, i: usize) -> ExtractionRecord {
    let mut r = r;
    match op % 5 {
        0 => r,
        1 => with_description(r, ""),
        2 => {
            r.code = r.code.trim_end_matches('}').to_string();
            r
        }
        3 => {
            r.code = format!("int x{i};");
            r
        }
        _ => moved(r, "dup"),
    }
}

proptest! {
    #[test]
    fn filter_properties(ops in prop::collection::vec((0u8..5, 0usize..6), 0..24)) {
        let pool = methods("alpha", 6);
        let input: Vec<ExtractionRecord> = ops
            .iter()
            .enumerate()
            .map(|(i, &(op, pick))| mutate(pool[pick].clone(), op, i))
            .collect();
        let rules = RuleSet::default();
        let out = apply_filters(input.clone(), &rules);

        prop_assert_eq!(out.kept.len() + out.rejected.len() + out.duplicates_dropped, input.len());
        for r in &out.kept {
            prop_assert!(input.contains(r));
            prop_assert!(validate_javadoc(&r.javadoc).is_ok());
            prop_assert!(validate_snippet(r, rules.min_code_len, rules.max_code_len).is_ok());
        }
        let again = apply_filters(out.kept.clone(), &rules);
        prop_assert_eq!(&again.kept, &out.kept);
        prop_assert_eq!(apply_filters(input, &rules).kept, out.kept);
    }
}
