use compsense_core::ptb::{parse_ptb, PtbTree};
use proptest::prelude::*;

fn atom() -> impl Strategy<Value = String> {
    prop_oneof![
        "[A-Z]{1,4}",
        "[a-z]{1,8}",
        Just("-LRB-".to_string()),
        Just(",".to_string()),
        Just("PRP$".to_string()),
        Just("''".to_string()),
    ]
}

fn tree() -> impl Strategy<Value = PtbTree> {
    let pre = (atom(), atom()).prop_map(|(t, w)| PtbTree::preterminal(t, w));
    pre.prop_recursive(6, 64, 5, |inner| {
        (atom(), prop::collection::vec(inner, 1..5)).prop_map(|(l, c)| PtbTree::node(l, c))
    })
}

fn leaves_recursive(t: &PtbTree, parent: &str, out: &mut Vec<(String, String)>) {
    match t {
        PtbTree::Leaf(w) => out.push((w.clone(), parent.to_string())),
        PtbTree::Node { label, children } => {
            for c in children {
                leaves_recursive(c, label, out);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn render_then_parse_is_identity(t in tree()) {
        let text = t.to_string();
        prop_assert_eq!(parse_ptb(&text).unwrap(), t.clone());
        let spaced = text.replace(' ', " \n\t ");
        prop_assert_eq!(parse_ptb(&spaced).unwrap(), t);
    }

    #[test]
    fn leaves_match_recursive_walk(t in tree()) {
        let mut expected = Vec::new();
        leaves_recursive(&t, "", &mut expected);
        prop_assert_eq!(t.leaves_with_pos(), expected);
        prop_assert_eq!(t.leaf_count(), t.leaves_with_pos().len());
    }
}

#[test]
fn fifty_leaf_tree_in_order() {
    let words: Vec<String> = (0..50).map(|i| format!("w{i}")).collect();
    // right-branching: (X (T w0) (X (T w1) ... ))
    let mut t = PtbTree::preterminal("T", words[49].clone());
    for w in words[..49].iter().rev() {
        t = PtbTree::node("X", vec![PtbTree::preterminal("T", w.clone()), t]);
    }
    let got: Vec<String> = parse_ptb(&t.to_string()).unwrap().leaves_with_pos().into_iter().map(|(w, _)| w).collect();
    assert_eq!(got, words);
}

#[test]
fn deep_tree_does_not_overflow() {
    let depth = 100_000;
    let text = format!("{}(T w){}", "(X ".repeat(depth), ")".repeat(depth));
    let t = parse_ptb(&text).unwrap();
    assert_eq!(t.leaves_with_pos(), vec![("w".to_string(), "T".to_string())]);
}
