use super::{Arm, Subject, TrialData};
use crate::rank::Direction;

/// Postnatal depression (EPDS) trial: id, arm, baseline and six monthly visits,
/// records packed nine fields at a time, `.` marking a missed visit.
pub const EPDS_LISTING: &str = "\
1 0 18 17 18 15 17 14 15 2 0 27 26 23 18 17 12 10
3 0 16 17 14 . . . . 4 0 17 14 23 17 13 12 12
5 0 15 12 10 8 4 5 5 6 0 20 19 11.54 9 8 6.82 5.05
7 0 16 13 13 9 7 8 7 8 0 28 26 27 . . . .
9 0 28 26 24 19 13.94 11 9 10 0 25 9 12 15 12 13 20
11 0 24 14 . . . . . 12 0 16 19 13 14 23 15 11
13 0 26 13 22 . . . . 14 0 21 7 13 . . . .
15 0 21 18 . . . . . 16 0 22 18 . . . . .
17 0 26 19 13 22 12 18 13 18 0 19 19 7 8 2 5 6
19 0 22 20 15 20 17 15 13.73 20 0 16 7 8 12 10 10 12
21 0 21 19 18 16 13 16 15 22 0 20 16 21 17 21 16 18
23 0 17 15 . . . . . 24 0 22 20 21 17 14 14 10
25 0 19 16 19 . . . . 26 0 21 7 4 4.19 4.73 3.03 3.45
27 0 18 19 . . . . . 28 1 21 13 12 9 9 13 6
29 1 27 8 17 15 7 5 7 30 1 15 8 12.27 10 10 6 5.96
31 1 24 14 14 13 12 18 15 32 1 15 15 16 11 14 12 8
33 1 17 9 5 3 6 0 2 34 1 20 7 7 7 12 9 6
35 1 18 8 1 1 2 0 1 36 1 28 11 7 3 2 2 2
37 1 21 7 8 6 6.5 4.64 4.97 38 1 18 8 6 4 11 7 6
39 1 27.46 22 27 24 22 24 23 40 1 19 14 12 15 12 9 6
41 1 20 13 10 7 9 11 11 42 1 16 17 26 . . . .
43 1 21 19 9 9 12 5 7 44 1 23 11 7 5 8 2 3
45 1 23 16 13 . . . . 46 1 24 16 15 11 11 11 11
47 1 25 20 18 16 9 10 6 48 1 22 15 17.57 12 9 8 6.5
49 1 20 7 2 1 0 0 2 50 1 20 12.13 8 6 3 2 3
51 1 25 15 24 18 15.19 13 12.32 52 1 18 17 6 2 2 0 1
53 1 26 1 18 10 13 12 10 54 1 20 27 13 9 8 4 5
55 1 17 20 10 8.89 8.49 7.02 6.79 56 1 22 12 . . . . .
57 1 22 15.38 2 4 6 3 3 58 1 23 11 9 10 8 7 4
59 1 17 15 . . . . . 60 1 22 7 12 15 . . .
61 1 26 24 . . . . .
";

const FIELDS: usize = 9;

/// The built-in EPDS dataset; lower scores win.
pub fn embedded_epds() -> TrialData {
    let tokens: Vec<&str> = EPDS_LISTING.split_whitespace().collect();
    assert_eq!(tokens.len() % FIELDS, 0, "EPDS listing is not a whole number of records");
    let value = |tok: &str| -> Option<f64> {
        (tok != ".").then(|| tok.parse().expect("EPDS listing holds numeric scores"))
    };
    let subjects = tokens
        .chunks(FIELDS)
        .map(|rec| Subject {
            id: rec[0].to_string(),
            arm: Arm::from_code(rec[1].parse().expect("arm code")).expect("arm is 0 or 1"),
            baseline: value(rec[2]),
            outcomes: rec[3..].iter().map(|t| value(t)).collect(),
        })
        .collect();
    let labels = (1..=6).map(|t| format!("y{t}")).collect();
    TrialData::new(subjects, Direction::Lower, "y0", labels).expect("EPDS listing is valid")
}
