use std::io::Cursor;

use proptest::prelude::*;

use super::*;

fn adjacency_from(n: usize, pairs: &[(usize, usize)]) -> SparseAdjacency {
    SparseAdjacency::from_pairs(n, pairs.to_vec(), IdMap::numeric(n))
        .unwrap()
        .0
}

fn attributes_from(n: usize, d: usize, triplets: &[(usize, usize, u32)]) -> AttributeMatrix {
    let counts = CsrMatrix::from_triplets(n, d, triplets.to_vec(), 0, |a, b| a + b).unwrap();
    AttributeMatrix::new(counts, IdMap::numeric(d))
}

/// Straight scalar evaluation of the doubly-normalized TF-IDF formula on a
/// dense copy, independent of the CSR code path.
fn tfidf_oracle(dense: &[Vec<u32>]) -> Vec<Vec<f64>> {
    let n = dense.len();
    let d = dense.first().map_or(0, Vec::len);
    let mut out = vec![vec![0.0; d]; n];
    for i in 0..n {
        let row_max = *dense[i].iter().max().unwrap_or(&0);
        for j in 0..d {
            if dense[i][j] == 0 {
                continue;
            }
            let support = (0..n).filter(|&r| dense[r][j] > 0).count();
            let idf = n as f64 / support as f64;
            let tf = 0.5 + 0.5 * f64::from(dense[i][j]) / f64::from(row_max);
            out[i][j] = idf * tf;
        }
    }
    out
}

#[test]
fn two_node_cycle() {
    let (a, stats) = load_edge_list(Cursor::new("a b\nb a\n"), true).unwrap();
    assert_eq!(a.n(), 2);
    assert_eq!(a.nnz(), 2);
    assert!(a.has_edge(0, 1));
    assert!(a.has_edge(1, 0));
    assert_eq!(stats.deduped, 0);
}

#[test]
fn duplicate_edges_dedup() {
    let (a, stats) = load_edge_list(Cursor::new("a b\na b\n"), true).unwrap();
    assert_eq!(a.nnz(), 1);
    assert_eq!(stats.deduped, 1);
}

#[test]
fn self_loops_dropped_and_counted() {
    let (a, stats) = load_edge_list(Cursor::new("a a\na b\nb b\n"), true).unwrap();
    assert_eq!(a.nnz(), 1);
    assert_eq!(stats.dropped_self_loops, 2);
}

#[test]
fn comments_and_blank_lines_skipped() {
    let (a, _) = load_edge_list(Cursor::new("# header\n\na b\n"), true).unwrap();
    assert_eq!(a.nnz(), 1);
}

#[test]
fn undirected_mode_mirrors_edges() {
    let (a, _) = load_edge_list(Cursor::new("a b\n"), false).unwrap();
    assert!(a.has_edge(0, 1));
    assert!(a.has_edge(1, 0));
}

#[test]
fn malformed_line_reports_line_number() {
    let err = load_edge_list(Cursor::new("a b\nonly_one\n"), true).unwrap_err();
    match err {
        Error::Parse { line, .. } => assert_eq!(line, 2),
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn empty_edge_list_is_an_error() {
    assert!(matches!(
        load_edge_list(Cursor::new("# nothing\n"), true),
        Err(Error::EmptyInput(_))
    ));
}

#[test]
fn first_seen_index_order() {
    let (a, _) = load_edge_list(Cursor::new("u v\nw u\n"), true).unwrap();
    assert_eq!(a.id_map().name(0), "u");
    assert_eq!(a.id_map().name(1), "v");
    assert_eq!(a.id_map().name(2), "w");
}

#[test]
fn write_then_reload_is_canonical() {
    let (a, _) = load_edge_list(Cursor::new("c a\na b\nc a\na c\n"), true).unwrap();
    let mut first = Vec::new();
    write_edge_list(&a, &mut first).unwrap();
    let (b, stats) = load_edge_list(Cursor::new(&first), true).unwrap();
    assert_eq!(stats.deduped, 0);
    let mut second = Vec::new();
    write_edge_list(&b, &mut second).unwrap();
    assert_eq!(first, second);
}

#[test]
fn transpose_reverses_edges() {
    let a = adjacency_from(3, &[(0, 1), (2, 1)]);
    let t = a.transpose();
    assert!(t.has_edge(1, 0));
    assert!(t.has_edge(1, 2));
    assert_eq!(t.transpose(), a);
}

#[test]
fn attribute_single_record() {
    let (a, _) = load_edge_list(Cursor::new("a b\n"), true).unwrap();
    let (x, _) = load_attributes(Cursor::new("a #x 2\n"), a.id_map(), UnknownNodePolicy::Fail)
        .unwrap();
    assert_eq!(x.d(), 1);
    assert_eq!(x.counts().get(0, 0), Some(2));
}

#[test]
fn attribute_counts_sum() {
    let (a, _) = load_edge_list(Cursor::new("a b\n"), true).unwrap();
    let (x, _) = load_attributes(
        Cursor::new("a #x 1\na #x 1\n"),
        a.id_map(),
        UnknownNodePolicy::Fail,
    )
    .unwrap();
    assert_eq!(x.counts().get(0, 0), Some(2));
}

#[test]
fn attribute_count_must_be_positive_integer() {
    let (a, _) = load_edge_list(Cursor::new("a b\n"), true).unwrap();
    for bad in ["a #x 0\n", "a #x -3\n", "a #x 1.5\n"] {
        assert!(matches!(
            load_attributes(Cursor::new(bad), a.id_map(), UnknownNodePolicy::Fail),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}

#[test]
fn unknown_node_skip_vs_fail() {
    let (a, _) = load_edge_list(Cursor::new("a b\n"), true).unwrap();
    let (x, stats) = load_attributes(
        Cursor::new("ghost #x 1\na #x 1\n"),
        a.id_map(),
        UnknownNodePolicy::SkipAndCount,
    )
    .unwrap();
    assert_eq!(stats.skipped_unknown_nodes, 1);
    assert_eq!(x.nnz(), 1);
    assert!(matches!(
        load_attributes(
            Cursor::new("ghost #x 1\n"),
            a.id_map(),
            UnknownNodePolicy::Fail
        ),
        Err(Error::MissingNodes { .. })
    ));
}

#[test]
fn filter_removes_edgeless_node() {
    let a = adjacency_from(3, &[(0, 1)]);
    let x = attributes_from(3, 1, &[(2, 0, 5)]);
    let (fa, fx, removed) = filter_isolated(&a, &x).unwrap();
    assert_eq!(fa.n(), 2);
    assert_eq!(removed, vec!["2".to_string()]);
    assert_eq!(fx.n(), 2);
    assert_eq!(fx.nnz(), 0);
}

#[test]
fn filter_keeps_triangle_intact() {
    let a = adjacency_from(3, &[(0, 1), (1, 2), (2, 0)]);
    let x = attributes_from(3, 2, &[(0, 0, 1), (2, 1, 1)]);
    let (fa, fx, removed) = filter_isolated(&a, &x).unwrap();
    assert!(removed.is_empty());
    assert_eq!(fa, a);
    assert_eq!(fx, x);
}

#[test]
fn filter_is_idempotent() {
    let a = adjacency_from(4, &[(0, 1)]);
    let x = attributes_from(4, 1, &[(3, 0, 1)]);
    let (fa, fx, removed) = filter_isolated(&a, &x).unwrap();
    assert_eq!(removed.len(), 2);
    let (fa2, fx2, removed2) = filter_isolated(&fa, &fx).unwrap();
    assert!(removed2.is_empty());
    assert_eq!(fa, fa2);
    assert_eq!(fx, fx2);
}

#[test]
fn binarize_example() {
    let x = attributes_from(2, 2, &[(0, 0, 2), (1, 0, 1), (1, 1, 3)]);
    let b = binarize(&x);
    assert_eq!(b.counts().get(0, 0), Some(1));
    assert_eq!(b.counts().get(0, 1), None);
    assert_eq!(b.counts().get(1, 0), Some(1));
    assert_eq!(b.counts().get(1, 1), Some(1));
}

#[test]
fn binarize_all_zero_is_identity() {
    let x = attributes_from(2, 2, &[]);
    assert_eq!(binarize(&x), x);
}

#[test]
fn tfidf_hand_example() {
    // X = [[2, 0], [1, 1]]: column supports 2 and 1, row maxima 2 and 1.
    let x = attributes_from(2, 2, &[(0, 0, 2), (1, 0, 1), (1, 1, 1)]);
    let (t, stats) = tfidf_transform(&x);
    let w = t.weights();
    assert!((w.get(0, 0).unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(w.get(0, 1), None);
    assert!((w.get(1, 0).unwrap() - 1.0).abs() < 1e-12);
    assert!((w.get(1, 1).unwrap() - 2.0).abs() < 1e-12);
    assert_eq!(stats, TfidfStats::default());

    let oracle = tfidf_oracle(&[vec![2, 0], vec![1, 1]]);
    for (r, c, v) in w.iter() {
        assert!((v - oracle[r][c]).abs() < 1e-12);
    }
}

#[test]
fn tfidf_single_cell() {
    let x = attributes_from(1, 1, &[(0, 0, 1)]);
    let (t, _) = tfidf_transform(&x);
    assert!((t.weights().get(0, 0).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn tfidf_reports_empty_rows_and_columns() {
    let x = attributes_from(3, 2, &[(0, 1, 1)]);
    let (_, stats) = tfidf_transform(&x);
    assert_eq!(stats.empty_rows, 2);
    assert_eq!(stats.zero_support_columns, 1);
}

#[test]
fn market_round_trips() {
    let a = adjacency_from(4, &[(0, 1), (2, 3), (3, 0)]);
    let mut buf = Vec::new();
    market::write_adjacency(&a, &mut buf).unwrap();
    let back = market::read_adjacency(Cursor::new(&buf)).unwrap();
    assert_eq!(back.n(), 4);
    assert_eq!(back.edges().collect::<Vec<_>>(), a.edges().collect::<Vec<_>>());

    let x = attributes_from(2, 3, &[(0, 2, 7), (1, 0, 1)]);
    let mut buf = Vec::new();
    market::write_attributes(&x, &mut buf).unwrap();
    let back = market::read_attributes(Cursor::new(&buf)).unwrap();
    assert_eq!(back.counts(), x.counts());
}

fn sparse_counts() -> impl Strategy<Value = (usize, usize, Vec<(usize, usize, u32)>)> {
    (1usize..7, 1usize..7).prop_flat_map(|(n, d)| {
        let entry = (0..n, 0..d, 1u32..5);
        proptest::collection::vec(entry, 0..=n * d).prop_map(move |t| (n, d, t))
    })
}

proptest! {
    #[test]
    fn binarize_is_idempotent((n, d, triplets) in sparse_counts()) {
        let x = attributes_from(n, d, &triplets);
        let once = binarize(&x);
        let twice = binarize(&once);
        prop_assert_eq!(&once, &twice);
        prop_assert!(once.counts().same_pattern(x.counts()));
    }

    #[test]
    fn tfidf_preserves_pattern_and_matches_oracle((n, d, triplets) in sparse_counts()) {
        let x = attributes_from(n, d, &triplets);
        let (t, _) = tfidf_transform(&x);
        prop_assert!(t.weights().same_pattern(x.counts()));
        let mut dense = vec![vec![0u32; d]; n];
        for (r, c, v) in x.counts().iter() {
            dense[r][c] = v;
        }
        let oracle = tfidf_oracle(&dense);
        for (r, c, v) in t.weights().iter() {
            prop_assert!((v - oracle[r][c]).abs() < 1e-12);
            prop_assert!(v > 0.0 && v.is_finite());
        }
    }

    #[test]
    fn tfidf_decreases_with_column_support((n, d, triplets) in sparse_counts()) {
        let x = attributes_from(n, d, &triplets);
        let (t, _) = tfidf_transform(&x);
        // Add one fresh entry to a column and its other entries must shrink.
        let fresh = (0..n).flat_map(|r| (0..d).map(move |c| (r, c)))
            .find(|&(r, c)| x.counts().get(r, c).is_none());
        if let Some((r, c)) = fresh {
            let mut more = triplets.clone();
            more.push((r, c, 1));
            let (t2, _) = tfidf_transform(&attributes_from(n, d, &more));
            for (i, j, v) in t.weights().iter() {
                if j == c && i != r {
                    prop_assert!(t2.weights().get(i, j).unwrap() < v);
                }
            }
        }
    }

    #[test]
    fn tfidf_nondecreasing_in_count((n, d, triplets) in sparse_counts()) {
        let x = attributes_from(n, d, &triplets);
        if x.nnz() == 0 {
            return Ok(());
        }
        let (t, _) = tfidf_transform(&x);
        let (r0, c0, _) = x.counts().iter().next().unwrap();
        let mut more = triplets.clone();
        more.push((r0, c0, 1));
        let (t2, _) = tfidf_transform(&attributes_from(n, d, &more));
        prop_assert!(t2.weights().get(r0, c0).unwrap() >= t.weights().get(r0, c0).unwrap() - 1e-12);
    }

    #[test]
    fn edge_list_round_trip_bytes((n, pairs) in (2usize..8).prop_flat_map(|n| {
        (Just(n), proptest::collection::vec(((0..n), (0..n)), 1..20))
    })) {
        let pairs: Vec<_> = pairs.into_iter().filter(|(s, d)| s != d).collect();
        if pairs.is_empty() {
            return Ok(());
        }
        let touched: std::collections::BTreeSet<usize> =
            pairs.iter().flat_map(|&(s, d)| [s, d]).collect();
        let renum: std::collections::HashMap<usize, usize> =
            touched.iter().enumerate().map(|(k, &v)| (v, k)).collect();
        let pairs: Vec<_> = pairs.iter().map(|&(s, d)| (renum[&s], renum[&d])).collect();
        let a = adjacency_from(touched.len(), &pairs);
        let mut first = Vec::new();
        write_edge_list(&a, &mut first).unwrap();
        let (b, _) = load_edge_list(Cursor::new(&first), true).unwrap();
        let mut second = Vec::new();
        write_edge_list(&b, &mut second).unwrap();
        prop_assert_eq!(first, second);
    }
}
