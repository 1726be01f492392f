use super::*;

fn oracle() -> Oracle {
    Oracle::default()
}

fn names(r: &ExecutionResult) -> Vec<String> {
    r.rows().unwrap().iter().filter(|s| !s.starts_with('~')).cloned().collect()
}

#[test]
fn tautology_selects_every_row() {
    let o = oracle();
    let t = &o.templates()[2];
    assert_eq!(names(&o.execute("1' or 1=1 -- ", t)).len(), 5);
    assert_eq!(names(&o.execute("1' or 1=1 --+", t)).len(), 5);
}

#[test]
fn plain_numeric_lookup() {
    let o = oracle();
    assert_eq!(names(&o.execute("1", &o.templates()[0])), ["0|t:admin"]);
}

#[test]
fn truncated_expression_is_a_syntax_error() {
    let o = oracle();
    assert_eq!(o.execute("1' or", &o.templates()[2]).error_class(), Some(ErrorClass::Syntax));
}

#[test]
fn equivalence_examples() {
    let o = oracle();
    assert!(o.equivalent("1' or 1=1 -- ", "1' oR 1=1 -- "));
    assert!(!o.equivalent("1' or 1=1 -- ", "1' or 1=2 -- "));
    assert!(o.equivalent("1' or 1=1 -- ", "1' or 1=1 -- "));
    assert!(o.equivalent("1' or 1 = 1 --+", "1'/*x*/||/*!50000true*/--+"));
    assert!(o.equivalent("1' or 1 = 1 --+", "1' or (select ord('r') regexp 114) = 0x1 --+"));
}

#[test]
fn stacked_writes_change_the_outcome() {
    let o = oracle();
    assert!(!o.equivalent("1; select 1", "1; delete from users"));
    assert!(!o.equivalent("1", "1; update users set name = 'x'"));
}

#[test]
fn mysql_functions_are_available() {
    let o = oracle();
    let t = &o.templates()[2];
    for p in [
        "1' and sleep(5) -- ",
        "1' union select concat(version(), database()) -- ",
        "1' union select table_name from information_schema.tables -- ",
        "1' and if(1=1, benchmark(10, md5('a')), 0) -- ",
    ] {
        let r = o.execute(p, t);
        assert!(r.rows().is_some() || p.contains("md5"), "{p}: {r}");
    }
    assert_eq!(
        o.execute("1' and extractvalue(1, concat(0x7e, version())) -- ", t).error_class(),
        Some(ErrorClass::Runtime)
    );
}

#[test]
fn execution_is_deterministic() {
    let o = oracle();
    let t = &o.templates()[0];
    let p = "1 union select rand() -- ";
    assert_eq!(o.execute(p, t), o.execute(p, t));
}

#[test]
fn catalog_truth_values() {
    let o = oracle();
    for v in ["1", "(select 1)", "2<>3", "true", "not false", "rand() >= 0", "'a' = 'a'"] {
        assert_eq!(o.truth_of(v), Some(true), "{v}");
    }
    for v in ["0", "(select 0)", "2=3", "false"] {
        assert_eq!(o.truth_of(v), Some(false), "{v}");
    }
    assert_eq!(o.truth_of("select 1"), None);
}

#[test]
fn verified_grammar_drops_unparenthesized_subqueries() {
    let g = verified_grammar();
    let truths = g.catalog().get("sigma_true").unwrap();
    assert!(!truths.contains(&"select 1".to_string()));
    assert!(truths.contains(&"(select 1)".to_string()));
    let complex = g.catalog().get("tau_complex").unwrap();
    assert_eq!(complex.len(), 3, "{complex:?}");
    assert_eq!(
        g.catalog().get("gamma_benign").unwrap().len(),
        Grammar::builtin().catalog().get("gamma_benign").unwrap().len()
    );
}

#[test]
fn wire_equivalence_decodes_first() {
    let o = oracle();
    assert!(o.equivalent_wire("1' or 1=1 --+", "1' or%0A1=1 --+", RequestMethod::Get).unwrap());
    assert!(o.equivalent_wire("1\\\" or 1=1 -- ", "1\\\" or\\t1=1 -- ", RequestMethod::PostJson).unwrap());
}
