mod common;

#[test]
fn merge_matches_partition_enumeration() {
    common::merge_trials(200, 11).unwrap();
}

#[test]
fn lp_matches_vertex_enumeration() {
    common::lp_trials(100, 12).unwrap();
}

#[test]
fn labeling_matches_route_enumeration() {
    common::espprc_trials(100, 13).unwrap();
}

#[test]
fn branch_and_price_matches_brute_force() {
    common::routing_trials(60, 14).unwrap();
}

#[test]
fn partition_counts_are_bell_numbers() {
    let bell = [1, 1, 2, 5, 15, 52, 203];
    for (n, &b) in bell.iter().enumerate() {
        assert_eq!(common::partitions(n).len(), b);
    }
}
