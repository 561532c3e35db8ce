//! Hand-built rows for the three tables, each paired with the record it
//! must parse to.

use chrono::NaiveDate;

use xenoscope::ingest::LineError;
use xenoscope::model::{EventRecord, GkgRecord, MentionRecord, RootCode, ThemeMention};

/// Tab-joins `width` columns, filling the given positions.
pub fn row(width: usize, cells: &[(usize, &str)]) -> String {
    let mut cols = vec![""; width];
    for &(i, v) in cells {
        cols[i] = v;
    }
    cols.join("\t")
}

fn event(id: u64, date: (i32, u32, u32), added: &str, url: &str) -> EventRecord {
    let d = NaiveDate::from_ymd_opt(date.0, date.1, date.2).unwrap();
    let added = chrono::NaiveDateTime::parse_from_str(added, "%Y%m%d%H%M%S").unwrap();
    EventRecord::new(id, d, added, url)
}

pub fn event_cases() -> Vec<(String, EventRecord)> {
    let mut out = Vec::new();

    // A fully populated row as published, every column present.
    let full = "1046400017\t20220615\t202206\t2022\t2022.4493\tUSAREF\tREFUGEE\tUSA\t\t\t\tREF\t\t\t\tUSAGOV\tUNITED STATES\tUSA\t\t\t\tGOV\t\t\t\t0\t043\t043\t04\t1\t2.8\t6\t1\t6\t-2.31\t3\tTexas, United States\tUS\tUSTX\t\t31.106\t-97.6475\tTX\t3\tTexas, United States\tUS\tUSTX\t\t31.106\t-97.6475\tTX\t3\tTexas, United States\tUS\tUSTX\t\t31.106\t-97.6475\tTX\t20220615001500\thttps://www.example.com/news/2022/06/15/shelter";
    let mut e = event(
        1046400017,
        (2022, 6, 15),
        "20220615001500",
        "https://www.example.com/news/2022/06/15/shelter",
    );
    e.actor1_code = Some("USAREF".into());
    e.actor1_country = Some("USA".into());
    e.actor2_code = Some("USAGOV".into());
    e.actor2_country = Some("USA".into());
    e.event_root_code = Some(RootCode::new(4).unwrap());
    e.action_geo_country = Some("US".into());
    out.push((full.to_string(), e));

    // Actor 2 absent, root code with surrounding blanks.
    let line = row(
        61,
        &[
            (0, "7"),
            (1, "20211231"),
            (5, "REF"),
            (7, "NGA"),
            (28, " 19 "),
            (53, "NI"),
            (59, "20220101000000"),
            (60, "http://a/b"),
        ],
    );
    let mut e = event(7, (2021, 12, 31), "20220101000000", "http://a/b");
    e.actor1_code = Some("REF".into());
    e.actor1_country = Some("NGA".into());
    e.event_root_code = Some(RootCode::new(19).unwrap());
    e.action_geo_country = Some("NI".into());
    out.push((line, e));

    // Unparseable root code is kept raw.
    let line = row(
        61,
        &[
            (0, "8"),
            (1, "20220301"),
            (15, "MEXREF"),
            (17, "MEX"),
            (28, "--"),
            (59, "20220301001500"),
            (60, "u"),
        ],
    );
    let mut e = event(8, (2022, 3, 1), "20220301001500", "u");
    e.actor2_code = Some("MEXREF".into());
    e.actor2_country = Some("MEX".into());
    e.unparsed_root_code = Some("--".into());
    out.push((line, e));

    // Everything optional left empty.
    let line = row(61, &[(0, "9"), (1, "20220301"), (59, "20220301001500"), (60, "")]);
    out.push((line, event(9, (2022, 3, 1), "20220301001500", "")));
    out
}

pub fn mention_cases() -> Vec<(String, MentionRecord)> {
    let full = "1046400017\t20220615000000\t20220615001500\t1\texample.com\thttps://www.example.com/news/2022/06/15/shelter\t1\t-1\t220\t224\t1\t0\t3120\t-2.3121387283237\t0\t";
    vec![
        (
            full.to_string(),
            MentionRecord {
                global_event_id: 1046400017,
                mention_identifier: "https://www.example.com/news/2022/06/15/shelter".into(),
                mention_tone: -2.3121387283237,
            },
        ),
        (
            row(16, &[(0, "3"), (5, "doc-3"), (13, "0")]),
            MentionRecord {
                global_event_id: 3,
                mention_identifier: "doc-3".into(),
                mention_tone: 0.0,
            },
        ),
    ]
}

fn theme(name: &str, offset: Option<u64>) -> ThemeMention {
    ThemeMention {
        name: name.into(),
        char_offset: offset.unwrap_or(0),
        offset_missing: offset.is_none(),
    }
}

pub fn gkg_cases() -> Vec<(String, GkgRecord)> {
    let v2 = "DISCRIMINATION_IMMIGRATION_XENOPHOBIA,120;REFUGEES,221;TAX_FNCACT_REFUGEES,221;";
    let full = row(
        27,
        &[
            (0, "20220615001500-12"),
            (1, "20220615001500"),
            (2, "1"),
            (3, "example.com"),
            (4, "https://www.example.com/news/2022/06/15/shelter"),
            (7, "DISCRIMINATION_IMMIGRATION_XENOPHOBIA;REFUGEES;TAX_FNCACT_REFUGEES"),
            (8, v2),
            (15, "-2.31,1.2,3.5,4.7,20.1,0,422"),
        ],
    );
    vec![
        (
            full,
            GkgRecord {
                gkg_record_id: "20220615001500-12".into(),
                document_identifier: "https://www.example.com/news/2022/06/15/shelter".into(),
                themes: vec![
                    theme("DISCRIMINATION_IMMIGRATION_XENOPHOBIA", Some(120)),
                    theme("REFUGEES", Some(221)),
                    theme("TAX_FNCACT_REFUGEES", Some(221)),
                ],
            },
        ),
        // A theme without an offset keeps its name.
        (
            row(27, &[(0, "g2"), (4, "doc-2"), (8, "IMMIGRATION;EPU_POLICY,15")]),
            GkgRecord {
                gkg_record_id: "g2".into(),
                document_identifier: "doc-2".into(),
                themes: vec![theme("IMMIGRATION", None), theme("EPU_POLICY", Some(15))],
            },
        ),
        (
            row(27, &[(0, "g3"), (4, "doc-3")]),
            GkgRecord {
                gkg_record_id: "g3".into(),
                document_identifier: "doc-3".into(),
                themes: vec![],
            },
        ),
    ]
}

pub enum Malformed {
    Event(String, LineError),
    Mention(String, LineError),
    Gkg(String, LineError),
}

pub fn malformed_cases() -> Vec<Malformed> {
    use LineError::*;
    vec![
        Malformed::Event(
            row(31, &[(0, "1")]),
            ColumnCountMismatch {
                expected: 61,
                found: 31,
            },
        ),
        Malformed::Event(
            row(61, &[(0, "x1"), (1, "20220101"), (59, "20220101000000")]),
            BadEventId("x1".into()),
        ),
        Malformed::Event(
            row(61, &[(0, "1"), (1, "2022-01-01"), (59, "20220101000000")]),
            BadTimestamp {
                field: "event_date",
                raw: "2022-01-01".into(),
            },
        ),
        Malformed::Mention(row(16, &[(0, "1"), (13, "1.0")]), EmptyMentionIdentifier),
        Malformed::Mention(row(16, &[(0, "1"), (5, "d"), (13, "NaN")]), BadTone("NaN".into())),
        Malformed::Mention(
            row(15, &[(0, "1")]),
            ColumnCountMismatch {
                expected: 16,
                found: 15,
            },
        ),
        Malformed::Gkg(row(27, &[(0, "g")]), EmptyDocumentIdentifier),
        Malformed::Gkg(row(5, &[]), ColumnCountMismatch { expected: 27, found: 5 }),
    ]
}
