use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fourier_stream::stream::{
    hyperplane_stream, load_csv, write_csv, Concept, ConceptSchedule, LoadOptions, StreamRecord,
};

/// Chi-squared critical value for 9 degrees of freedom at 0.01.
const CHI2_9_01: f64 = 21.666;

fn generate(schedule: &ConceptSchedule) -> Vec<StreamRecord> {
    let space = Arc::new(schedule.space().unwrap());
    hyperplane_stream(schedule, space).unwrap().collect()
}

/// Per-record flags: did the emitted label disagree with the segment's rule?
fn flips(schedule: &ConceptSchedule, records: &[StreamRecord]) -> Vec<bool> {
    let space = schedule.space().unwrap();
    let mut out = Vec::with_capacity(records.len());
    let mut rest = records;
    for &(id, len) in &schedule.segments {
        let concept = Concept::generate(schedule.seed, id, &space);
        let (segment, tail) = rest.split_at(len);
        out.extend(segment.iter().map(|r| concept.label(&r.values) != r.label));
        rest = tail;
    }
    out
}

#[test]
fn noiseless_stream_obeys_every_rule() {
    let schedule = ConceptSchedule::benchmark(0.0, 4);
    let records = generate(&schedule);
    assert_eq!(records.len(), 150_000);
    assert!(flips(&schedule, &records).iter().all(|f| !f));
}

#[test]
fn noise_fraction_is_ten_percent() {
    for seed in 0..3 {
        let schedule = ConceptSchedule::benchmark(0.1, seed);
        let records = generate(&schedule);
        let flipped = flips(&schedule, &records).iter().filter(|&&f| f).count();
        let rate = flipped as f64 / records.len() as f64;
        assert!((rate - 0.1).abs() <= 0.01, "seed {seed}: {rate}");
    }
}

#[test]
fn noise_is_uniform_over_stream_deciles() {
    let schedule = ConceptSchedule::benchmark(0.1, 9);
    let records = generate(&schedule);
    let flags = flips(&schedule, &records);
    let decile = flags.len() / 10;
    let expected = decile as f64 * 0.1;
    let chi2: f64 = flags
        .chunks(decile)
        .map(|c| {
            let observed = c.iter().filter(|&&f| f).count() as f64;
            (observed - expected).powi(2) / expected
        })
        .sum();
    assert!(chi2 < CHI2_9_01, "chi2 = {chi2}");
}

#[test]
fn recurring_segments_share_their_rule() {
    let schedule = ConceptSchedule {
        segments: vec![(3, 2_000), (5, 2_000), (3, 2_000)],
        noise_rate: 0.0,
        seed: 21,
        n_attrs: 8,
        cardinality: 3,
    };
    let records = generate(&schedule);
    let space = schedule.space().unwrap();
    // both occurrences of concept 3 must follow the same parameters
    let first = Concept::generate(21, 3, &space);
    let other = Concept::generate(21, 5, &space);
    assert!(records[..2_000].iter().all(|r| first.label(&r.values) == r.label));
    assert!(records[4_000..].iter().all(|r| first.label(&r.values) == r.label));
    let disagree = records[4_000..].iter().filter(|r| other.label(&r.values) != r.label).count();
    assert!(disagree > 0, "distinct concepts should label differently");
}

#[test]
fn same_seed_gives_identical_bytes() {
    let schedule = ConceptSchedule::recurring(4, 1_000, 2, 0.2, 77);
    let space = schedule.space().unwrap();
    let render = || {
        let mut out = Vec::new();
        write_csv(&mut out, &space, generate(&schedule)).unwrap();
        out
    };
    assert_eq!(render(), render());
    let mut other = schedule.clone();
    other.seed = 78;
    let mut out = Vec::new();
    write_csv(&mut out, &space, generate(&other)).unwrap();
    assert_ne!(out, render());
}

#[test]
fn spam_shaped_csv_loads_every_row() {
    const ROWS: usize = 9_324;
    const ATTRS: usize = 499;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut file = tempfile::NamedTempFile::new().unwrap();
    {
        let mut w = std::io::BufWriter::new(file.as_file_mut());
        let header: Vec<String> = (0..ATTRS).map(|m| format!("w{m}")).chain(["spam".into()]).collect();
        writeln!(w, "{}", header.join(",")).unwrap();
        for _ in 0..ROWS {
            let row: Vec<String> = (0..=ATTRS).map(|_| rng.gen_range(0..2u8).to_string()).collect();
            writeln!(w, "{}", row.join(",")).unwrap();
        }
    }
    let data = load_csv(
        file.path(),
        "spam",
        LoadOptions {
            integer_codes: true,
            ..LoadOptions::default()
        },
    )
    .unwrap();
    assert_eq!(data.records.len(), ROWS);
    assert_eq!(data.space.dim(), ATTRS);
    assert_eq!(data.skipped, 0);
    assert!(data.space.cardinalities().iter().all(|&c| c == 2));
}
