// Generated list of bundled clause texts.
pub(crate) const CLAUSE_TEXTS: &[(&str, &str)] = &[
    ("c01", include_str!("../data/legislative/clauses/c01.txt")),
    ("c02", include_str!("../data/legislative/clauses/c02.txt")),
    ("c03", include_str!("../data/legislative/clauses/c03.txt")),
    ("c04", include_str!("../data/legislative/clauses/c04.txt")),
    ("c05", include_str!("../data/legislative/clauses/c05.txt")),
    ("c06", include_str!("../data/legislative/clauses/c06.txt")),
    ("c07", include_str!("../data/legislative/clauses/c07.txt")),
    ("c08", include_str!("../data/legislative/clauses/c08.txt")),
    ("c09", include_str!("../data/legislative/clauses/c09.txt")),
    ("c10", include_str!("../data/legislative/clauses/c10.txt")),
    ("c11", include_str!("../data/legislative/clauses/c11.txt")),
    ("c12", include_str!("../data/legislative/clauses/c12.txt")),
    ("c13", include_str!("../data/legislative/clauses/c13.txt")),
    ("c14", include_str!("../data/legislative/clauses/c14.txt")),
    ("c15", include_str!("../data/legislative/clauses/c15.txt")),
    ("c16", include_str!("../data/legislative/clauses/c16.txt")),
    ("c17", include_str!("../data/legislative/clauses/c17.txt")),
    ("c18", include_str!("../data/legislative/clauses/c18.txt")),
    ("c19", include_str!("../data/legislative/clauses/c19.txt")),
    ("c20", include_str!("../data/legislative/clauses/c20.txt")),
    ("c21", include_str!("../data/legislative/clauses/c21.txt")),
    ("c22", include_str!("../data/legislative/clauses/c22.txt")),
    ("c23", include_str!("../data/legislative/clauses/c23.txt")),
    ("c24", include_str!("../data/legislative/clauses/c24.txt")),
    ("c25", include_str!("../data/legislative/clauses/c25.txt")),
    ("c26", include_str!("../data/legislative/clauses/c26.txt")),
    ("c27", include_str!("../data/legislative/clauses/c27.txt")),
    ("c28", include_str!("../data/legislative/clauses/c28.txt")),
    ("c29", include_str!("../data/legislative/clauses/c29.txt")),
    ("c30", include_str!("../data/legislative/clauses/c30.txt")),
    ("c31", include_str!("../data/legislative/clauses/c31.txt")),
    ("c32", include_str!("../data/legislative/clauses/c32.txt")),
    ("c33", include_str!("../data/legislative/clauses/c33.txt")),
    ("c34", include_str!("../data/legislative/clauses/c34.txt")),
    ("c35", include_str!("../data/legislative/clauses/c35.txt")),
    ("c36", include_str!("../data/legislative/clauses/c36.txt")),
    ("c37", include_str!("../data/legislative/clauses/c37.txt")),
    ("c38", include_str!("../data/legislative/clauses/c38.txt")),
    ("c39", include_str!("../data/legislative/clauses/c39.txt")),
    ("c40", include_str!("../data/legislative/clauses/c40.txt")),
    ("c41", include_str!("../data/legislative/clauses/c41.txt")),
    ("c42", include_str!("../data/legislative/clauses/c42.txt")),
    ("c43", include_str!("../data/legislative/clauses/c43.txt")),
    ("c44", include_str!("../data/legislative/clauses/c44.txt")),
    ("c45", include_str!("../data/legislative/clauses/c45.txt")),
    ("c46", include_str!("../data/legislative/clauses/c46.txt")),
    ("c47", include_str!("../data/legislative/clauses/c47.txt")),
    ("c48", include_str!("../data/legislative/clauses/c48.txt")),
    ("c49", include_str!("../data/legislative/clauses/c49.txt")),
    ("c50", include_str!("../data/legislative/clauses/c50.txt")),
];
